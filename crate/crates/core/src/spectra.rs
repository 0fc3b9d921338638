//! Bottom of the spectrum of a Hermitian positive definite operator.
//!
//! [`smallest_eigs`] runs a block Krylov iteration on H⁻¹ (shift-invert at
//! zero) with full reorthogonalisation, Rayleigh–Ritz on H itself and thick
//! restarts. Landau levels are degenerate to ~1e-4, so the block size is k:
//! a single starting vector cannot resolve multiplicities.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{orthonormalize_against, Block};
use crate::error::{Error, Result};
use crate::grid::{FieldC, Grid2D, Support};
use crate::linalg::{conjugate_gradient, norm2, random_vector, BandedCholesky};
use crate::operator::SparseHermitianOp;
use crate::sparse::CsrMatrix;

type C = Complex64;

/// How H⁻¹ is applied inside the Krylov iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolve {
    /// Banded Cholesky factor of H.
    Direct,
    /// Conjugate gradients at one tenth of the eigen tolerance.
    Cg { max_iter: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov dimension is `krylov_factor·k`, at least `min_krylov`.
    pub krylov_factor: usize,
    pub min_krylov: usize,
    pub seed: u64,
    pub inner: InnerSolve,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_restarts: 10, krylov_factor: 4, min_krylov: 32, seed: 0, inner: InnerSolve::Direct }
    }
}

impl EigenOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Raw eigenpairs of a matrix; vectors have unit Euclidean norm.
#[derive(Clone, Debug)]
pub struct RawEigen {
    pub lambdas: Vec<f64>,
    pub vectors: Vec<Vec<C>>,
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambdas: Vec<f64>,
    /// Orthonormal under the h²-weighted inner product.
    pub vectors: Vec<FieldC>,
    /// ‖Hv − λv‖/‖v‖ recomputed by direct multiplication.
    pub residuals: Vec<f64>,
    /// Number of restart cycles used.
    pub iterations: usize,
    pub converged: Vec<bool>,
    pub tol: f64,
}

impl EigenResult {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }

    pub fn k(&self) -> usize {
        self.lambdas.len()
    }
}

#[derive(Clone, Debug)]
pub struct InverseOutcome {
    pub field: FieldC,
    pub iterations: usize,
    pub residual: f64,
}

/// w with ‖Hw − g‖/‖g‖ ≤ tol by conjugate gradients.
pub fn apply_inverse(op: &SparseHermitianOp, g: &FieldC, tol: f64, max_iter: usize) -> Result<InverseOutcome> {
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("solver tolerance must be positive, got {tol}")));
    }
    if g.grid_key() != op.grid_key() || g.support() != Support::Interior {
        return Err(Error::Usage("right-hand side is bound to a different grid".into()));
    }
    let out = conjugate_gradient(op.matrix(), g.values(), tol, max_iter)?;
    Ok(InverseOutcome {
        field: FieldC::from_parts(op.grid_key(), Support::Interior, out.x),
        iterations: out.iterations,
        residual: out.residual,
    })
}

/// The k smallest eigenpairs of `op`; vectors are scaled to unit
/// h²-weighted norm.
pub fn smallest_eigs(op: &SparseHermitianOp, h: f64, k: usize, opts: &EigenOptions) -> Result<EigenResult> {
    let n = op.dim();
    if k == 0 || 4 * k > n {
        return Err(Error::Usage(format!("k = {k} must satisfy 1 <= k <= n/4 = {}", n / 4)));
    }
    let raw = eigs_smallest(op.matrix(), k, opts)?;
    let vectors = raw
        .vectors
        .into_iter()
        .map(|v| FieldC::from_parts(op.grid_key(), Support::Interior, v.into_iter().map(|x| x / h).collect()))
        .collect();
    Ok(EigenResult {
        lambdas: raw.lambdas,
        vectors,
        residuals: raw.residuals,
        iterations: raw.iterations,
        converged: raw.converged,
        tol: opts.tol,
    })
}

enum Inner<'a> {
    Direct(BandedCholesky),
    Cg { a: &'a CsrMatrix, tol: f64, max_iter: usize },
}

impl Inner<'_> {
    fn solve_block(&self, b: &Block) -> Result<Block> {
        let cols: Vec<&[C]> = (0..b.cols).map(|j| b.col(j)).collect();
        let out: Vec<Vec<C>> = match self {
            Inner::Direct(f) => cols.par_iter().map(|c| f.solve(c)).collect(),
            Inner::Cg { a, tol, max_iter } => cols
                .iter()
                .map(|c| conjugate_gradient(a, c, *tol, *max_iter).map(|o| o.x))
                .collect::<Result<_>>()?,
        };
        Ok(Block::from_columns(b.rows, &out))
    }
}

fn apply_block(a: &CsrMatrix, v: &Block, start: usize) -> Block {
    let cols: Vec<Vec<C>> = (start..v.cols).into_par_iter().map(|j| a.mul_vec(v.col(j))).collect();
    Block::from_columns(v.rows, &cols)
}

/// Block shift-invert Krylov with thick restart on a raw matrix.
pub fn eigs_smallest(a: &CsrMatrix, k: usize, opts: &EigenOptions) -> Result<RawEigen> {
    let n = a.nrows();
    if k == 0 || k > n {
        return Err(Error::Usage(format!("cannot compute {k} eigenpairs of a {n}×{n} matrix")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Usage("eigen tolerance must be positive".into()));
    }
    let dim = (opts.krylov_factor * k).max(opts.min_krylov).min(n);
    if dim == n {
        return dense_smallest(a, k, opts.tol);
    }
    let inner = match opts.inner {
        InnerSolve::Direct => Inner::Direct(BandedCholesky::factor(a)?),
        InnerSolve::Cg { max_iter } => Inner::Cg { a, tol: opts.tol * 0.1, max_iter },
    };
    let b = k.min(dim / 2).max(1);
    // thick restart keeps this many Ritz vectors
    let q = (dim / 2).max(k).min(dim - b);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<Vec<C>> = (0..b).map(|_| random_vector(&mut rng, n)).collect();
    let mut basis = orthonormalize_against(&Block::new(n), 0, Block::from_columns(n, &start));
    let mut hbasis = apply_block(a, &basis, 0);
    // projected matrix on the leading `known` columns
    let mut g_known = DMatrix::<C>::from_element(0, 0, C::new(0.0, 0.0));
    let mut cur = basis.clone();
    let mut cycle = 0;
    loop {
        let mut exhausted = false;
        while basis.cols < dim {
            let w = inner.solve_block(&cur)?;
            let w = orthonormalize_against(&basis, basis.cols, w);
            if w.cols == 0 {
                exhausted = true;
                break;
            }
            let take = (dim - basis.cols).min(w.cols);
            let w = w.columns(0, take);
            basis.append(&w);
            cur = w;
        }
        let mdim = basis.cols;
        let known = g_known.nrows();
        hbasis.append(&apply_block(a, &basis, hbasis.cols));
        // Rayleigh–Ritz on H; only the columns added this cycle are new
        let fresh = basis.adjoint_mul(mdim, &hbasis.columns(known, mdim));
        let mut g = DMatrix::from_element(mdim, mdim, C::new(0.0, 0.0));
        g.view_mut((0, 0), (known, known)).copy_from(&g_known);
        for j in known..mdim {
            for i in 0..=j {
                let v = fresh[(i, j - known)];
                let v = if i >= known { 0.5 * (v + fresh[(j, i - known)].conj()) } else { v };
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
        for i in 0..mdim {
            g[(i, i)].im = 0.0;
        }
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..mdim).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let kk = k.min(mdim);
        let qq = q.min(mdim).max(kk);
        let mut y = DMatrix::from_element(mdim, qq, C::new(0.0, 0.0));
        for (c, &o) in order.iter().take(qq).enumerate() {
            y.set_column(c, &eig.eigenvectors.column(o));
        }
        let ritz = basis.mul(&y);
        let lambdas: Vec<f64> = order.iter().take(kk).map(|&o| eig.eigenvalues[o]).collect();
        let residuals: Vec<f64> = (0..kk)
            .into_par_iter()
            .map(|j| {
                let v = ritz.col(j);
                let hv = a.mul_vec(v);
                let r: Vec<C> = hv.iter().zip(v).map(|(p, q)| p - q * lambdas[j]).collect();
                norm2(&r) / norm2(v)
            })
            .collect();
        let converged: Vec<bool> = residuals.iter().map(|r| *r <= opts.tol).collect();
        let done = converged.iter().all(|c| *c) && kk == k;
        if done || exhausted || cycle == opts.max_restarts {
            let vectors = ritz.columns(0, kk).to_columns();
            return Ok(RawEigen { lambdas, vectors, residuals, converged, iterations: cycle + 1 });
        }
        let theta: Vec<f64> = order.iter().take(qq).map(|&o| eig.eigenvalues[o]).collect();
        basis = ritz;
        hbasis = apply_block(a, &basis, 0);
        g_known = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(qq, theta.iter().map(|t| C::new(*t, 0.0))));
        cur = basis.columns(0, b.min(basis.cols));
        cycle += 1;
    }
}

/// Dense fallback for matrices small enough to decompose outright.
pub fn dense_smallest(a: &CsrMatrix, k: usize, tol: f64) -> Result<RawEigen> {
    let eig = SymmetricEigen::new(a.to_dense());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut lambdas = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &o in order.iter().take(k) {
        let v: Vec<C> = eig.eigenvectors.column(o).iter().copied().collect();
        let l = eig.eigenvalues[o];
        let hv = a.mul_vec(&v);
        let r: Vec<C> = hv.iter().zip(&v).map(|(p, q)| p - q * l).collect();
        residuals.push(norm2(&r) / norm2(&v));
        lambdas.push(l);
        vectors.push(v);
    }
    let converged = residuals.iter().map(|r| *r <= tol).collect();
    Ok(RawEigen { lambdas, vectors, residuals, converged, iterations: 1 })
}

/// Share of |v|² carried by interior points within `width` of the mask
/// boundary. Dirichlet edge states have values near 1.
pub fn boundary_mass_fraction(grid: &Grid2D, v: &FieldC, width: f64) -> f64 {
    let mut edge = 0.0;
    let mut total = 0.0;
    for (k, x) in v.values().iter().enumerate() {
        let w = x.norm_sqr();
        total += w;
        if grid.distance_to_boundary(grid.point(k)) < width {
            edge += w;
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterCount {
    pub count: usize,
    /// The window reaches the largest computed eigenvalue, so more may
    /// exist beyond k.
    pub saturated: bool,
}

/// Converged eigenvalues in [center − halfwidth, center + halfwidth].
pub fn cluster_count(e: &EigenResult, center: f64, halfwidth: f64) -> ClusterCount {
    let (lo, hi) = (center - halfwidth, center + halfwidth);
    let count = e.lambdas.iter().zip(&e.converged).filter(|(l, c)| **c && **l >= lo && **l <= hi).count();
    let top = e.lambdas.last().copied().unwrap_or(f64::NEG_INFINITY);
    ClusterCount { count, saturated: count == e.k() || (count > 0 && top <= hi) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularValues {
    /// σ_j = λ_j^{-1/2}, non-increasing.
    pub sigma: Vec<f64>,
    /// Σ_{i≤j} σ_i².
    pub partial_trace: Vec<f64>,
}

/// Leading singular values of the canonical solution operator T = D(D̄D)⁻¹.
pub fn solution_singular_values(lambdas: &[f64]) -> Result<SingularValues> {
    if let Some(bad) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::Consistency(format!("non-positive eigenvalue {bad} of a positive operator")));
    }
    let mut l = lambdas.to_vec();
    l.sort_by(f64::total_cmp);
    let sigma: Vec<f64> = l.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut acc = 0.0;
    let partial_trace = sigma
        .iter()
        .map(|s| {
            acc += s * s;
            acc
        })
        .collect();
    Ok(SingularValues { sigma, partial_trace })
}
