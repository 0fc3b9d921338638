//! Discrete D = −∂_z + φ_z, its adjoint D̄, the Gram product H = D̄D and an
//! independent assembly of the magnetic Schrödinger form ¼(Σ Π_j†Π_j + Δφ).
//!
//! D is written as −½[(∂_x − iA₁) − i(∂_y − iA₂)] with A = (−φ_y, φ_x) and
//! the covariant differences carry link phases exp(−i∫A·dl). A single
//! one-sided stencil has a second zero in the Brillouin zone, so D_h stacks
//! the four forward/backward combinations (FF, BB, FB, BF), each scaled by ½:
//! their spurious zeros sit at different momenta and only k = 0 survives.
//! Rows live on the grid closure so that D̄_h = D_hᴴ is the exact summation
//! by parts of the Dirichlet problem.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{integrate, FieldC, Grid2D, Support};
use crate::sparse::{mirror_upper, CsrMatrix};
use crate::weights::WeightModel;

type C = Complex64;

/// Forward/backward choice per axis of one stacked block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    ForwardForward,
    BackwardBackward,
    ForwardBackward,
    BackwardForward,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::ForwardForward,
        Orientation::BackwardBackward,
        Orientation::ForwardBackward,
        Orientation::BackwardForward,
    ];

    /// (x forward, y forward)
    fn forward(self) -> (bool, bool) {
        match self {
            Orientation::ForwardForward => (true, true),
            Orientation::BackwardBackward => (false, false),
            Orientation::ForwardBackward => (true, false),
            Orientation::BackwardForward => (false, true),
        }
    }
}

/// The stacked operator D_h : interior → 4 × closure.
#[derive(Clone, Debug)]
pub struct FactoredOp {
    d: CsrMatrix,
    n: usize,
    m: usize,
    grid_key: u64,
}

impl FactoredOp {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.d
    }

    /// Rows of one orientation block (m × n).
    pub fn block(&self, o: Orientation) -> CsrMatrix {
        let s = Orientation::ALL.iter().position(|x| *x == o).unwrap();
        self.d.row_block(s * self.m, (s + 1) * self.m)
    }

    /// Stacked values D_h u (length 4m).
    pub fn apply(&self, u: &FieldC) -> Result<Vec<C>> {
        if u.grid_key() != self.grid_key || u.support() != Support::Interior {
            return Err(Error::Usage("D_h applies to interior fields of its own grid".into()));
        }
        Ok(self.d.mul_vec(u.values()))
    }

    /// D̄_h v for a stacked vector.
    pub fn apply_adjoint(&self, v: &[C]) -> Result<Vec<C>> {
        if v.len() != self.d.nrows() {
            return Err(Error::Usage("stacked vector has the wrong length".into()));
        }
        let mut out = vec![C::new(0.0, 0.0); self.n];
        // (D_hᴴ v)_j = Σ_i conj(d_ij) v_i, accumulated in row order.
        for i in 0..self.d.nrows() {
            let (cols, vals) = self.d.row(i);
            for (c, a) in cols.iter().zip(vals) {
                out[*c] += a.conj() * v[i];
            }
        }
        Ok(out)
    }

    /// Collapses a stacked vector to one closure field, ½Σ_s v_s. Applied to
    /// D_h w this is the centred covariant difference −½(∇_x − i∇_y)w.
    pub fn synthesize(&self, v: &[C]) -> FieldC {
        let m = self.m;
        let vals = (0..m).map(|p| 0.5 * (v[p] + v[m + p] + v[2 * m + p] + v[3 * m + p])).collect();
        FieldC::from_parts(self.grid_key, Support::Closure, vals)
    }

    /// h²·‖v‖² for a stacked vector.
    pub fn stacked_norm_sqr(&self, grid: &Grid2D, v: &[C]) -> f64 {
        let s = crate::linalg::norm2(v);
        s * s * grid.h() * grid.h()
    }

    pub fn grid_key(&self) -> u64 {
        self.grid_key
    }
}

/// Hermitian positive operator on interior fields.
#[derive(Clone, Debug)]
pub struct SparseHermitianOp {
    h: CsrMatrix,
    factor: Option<FactoredOp>,
    grid_key: u64,
}

impl SparseHermitianOp {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.h
    }

    pub fn factor(&self) -> Option<&FactoredOp> {
        self.factor.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn grid_key(&self) -> u64 {
        self.grid_key
    }

    pub fn apply(&self, u: &FieldC) -> Result<FieldC> {
        if u.grid_key() != self.grid_key || u.support() != Support::Interior {
            return Err(Error::Usage("operator applies to interior fields of its own grid".into()));
        }
        Ok(FieldC::from_parts(self.grid_key, Support::Interior, self.h.mul_vec(u.values())))
    }

    /// Dirichlet restriction to the given interior indices.
    pub fn restrict(&self, idx: &[usize]) -> CsrMatrix {
        self.h.principal_submatrix(idx)
    }

    pub fn write_matrix_market<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        self.h.write_matrix_market(out, true)
    }
}

fn link_phase(weight: &WeightModel, a: C, b: C) -> Result<C> {
    let theta = weight.link_integral(a, b)?;
    Ok(C::from_polar(1.0, -theta))
}

/// Stacked covariant discretisation of D = −∂_z + φ_z.
#[allow(non_snake_case)]
pub fn assemble_D(grid: &Grid2D, weight: &WeightModel) -> Result<FactoredOp> {
    let (n, m, h) = (grid.n(), grid.m(), grid.h());
    let q = 0.25 / h;
    let i_ = C::new(0.0, 1.0);
    let rows: Vec<Vec<(usize, C)>> = Orientation::ALL
        .iter()
        .flat_map(|o| (0..m).map(move |p| (*o, p)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(o, p)| -> Result<Vec<(usize, C)>> {
            let (fx, fy) = o.forward();
            let (i, j) = grid.lattice(p);
            let zp = grid.point(p);
            let mut row: Vec<(usize, C)> = Vec::with_capacity(3);
            let mut diag = C::new(0.0, 0.0);
            // x part: −¼·a
            let (dx, cdiag, sign) = if fx { (1, q, -1.0) } else { (-1, -q, 1.0) };
            diag += cdiag;
            if let Some(nb) = grid.interior_index_of(i + dx, j) {
                let u = link_phase(weight, zp, grid.point(nb))?;
                row.push((nb, u * (sign * q)));
            }
            // y part: +¼·i·b
            let (dy, cdiag, sign) = if fy { (1, -q, 1.0) } else { (-1, q, -1.0) };
            diag += i_ * cdiag;
            if let Some(nb) = grid.interior_index_of(i, j + dy) {
                let u = link_phase(weight, zp, grid.point(nb))?;
                row.push((nb, i_ * u * (sign * q)));
            }
            if p < n {
                row.push((p, diag));
            }
            row.sort_by_key(|e| e.0);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(FactoredOp { d: CsrMatrix::from_rows(n, rows), n, m, grid_key: grid.key() })
}

/// D̄_h, defined as the conjugate transpose of D_h.
#[allow(non_snake_case)]
pub fn assemble_Dbar(op: &FactoredOp) -> CsrMatrix {
    op.d.adjoint()
}

/// H = D̄_h D_h as an exact Gram product; the factor is retained.
#[allow(non_snake_case)]
pub fn assemble_H(grid: &Grid2D, weight: &WeightModel) -> Result<SparseHermitianOp> {
    let op = assemble_D(grid, weight)?;
    Ok(SparseHermitianOp { h: op.d.gram(), factor: Some(op), grid_key: grid.key() })
}

/// ¼(Σ_j Π_j†Π_j + diag Δφ) with Π_j = −i(∂_j⁺ − iA_j): forward differences,
/// the potential on the diagonal, Dirichlet rows on the closure. Written out
/// entry by entry, independently of [`assemble_H`].
pub fn assemble_schrodinger(grid: &Grid2D, weight: &WeightModel) -> Result<SparseHermitianOp> {
    let (n, h) = (grid.n(), grid.h());
    let inv_h = 1.0 / h;
    let upper: Vec<Vec<(usize, C)>> = (0..n)
        .into_par_iter()
        .map(|p| -> Result<Vec<(usize, C)>> {
            let z = grid.point(p);
            let (a1, a2) = weight.vector_potential(z)?;
            let lap = weight.laplacian(z)?;
            let (i, j) = grid.lattice(p);
            let cx = C::new(-inv_h, -a1);
            let cy = C::new(-inv_h, -a2);
            // row p of Π_j contributes |c_j|², row p − e_j contributes 1/h²
            let diag = 0.25 * (cx.norm_sqr() + cy.norm_sqr() + 2.0 * inv_h * inv_h + lap);
            let mut row = vec![(p, C::new(diag, 0.0))];
            if let Some(e) = grid.interior_index_of(i + 1, j) {
                row.push((e, 0.25 * cx.conj() * inv_h));
            }
            if let Some(e) = grid.interior_index_of(i, j + 1) {
                row.push((e, 0.25 * cy.conj() * inv_h));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    // neighbours in +x/+y always carry larger indices in lexicographic order
    let upper = upper
        .into_iter()
        .map(|mut r| {
            r.sort_by_key(|e| e.0);
            r
        })
        .collect();
    Ok(SparseHermitianOp { h: mirror_upper(n, upper), factor: None, grid_key: grid.key() })
}

/// ⟨H u, v⟩ in the h²-weighted inner product.
pub fn quadratic_form(grid: &Grid2D, op: &SparseHermitianOp, u: &FieldC, v: &FieldC) -> Result<C> {
    if op.grid_key != grid.key() {
        return Err(Error::Usage("operator is bound to a different grid".into()));
    }
    let hu = op.apply(u)?;
    integrate(grid, &hu, v)
}
