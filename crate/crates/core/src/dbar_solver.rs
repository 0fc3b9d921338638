//! Canonical (minimal weighted norm) solution of ∂̄u = f in L²_φ.
//!
//! With v = u e^{−φ} and g = f e^{−φ} the equation becomes D̄v = g, and the
//! minimal solution is v = Tg = D(D̄D)⁻¹g. All certificates are computed in
//! the (v, g) gauge where the discrete identities are exact; e^{±φ} is only
//! applied at input and output.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldC, Grid2D, Support};
use crate::linalg::norm2;
use crate::operator::{assemble_H, SparseHermitianOp};
use crate::spectra::apply_inverse;
use crate::weights::WeightModel;

type C = Complex64;

/// Largest φ for which e^{φ} is still comfortably representable.
pub const PHI_BUDGET: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Highest monomial degree in the orthogonality certificate.
    pub ortho_degree: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 20_000, ortho_degree: 10 }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    /// The solution on the interior.
    pub u: FieldC,
    /// u·e^{−φ} on the interior.
    pub v: FieldC,
    /// ‖D̄_h v − g‖/‖g‖ with the stacked v.
    pub residual_rel: f64,
    /// ‖u‖_φ by grid quadrature.
    pub weighted_norm: f64,
    /// ‖Tg‖ of the stacked field, the quantity the T*T identity controls.
    pub stacked_norm: f64,
    pub ortho_defect: f64,
    pub ortho_degree: usize,
    pub cg_iterations: usize,
    /// ∫ e^{−2φ} over |z| > R for radial weights, bounding the mass lost to
    /// truncation.
    pub tail_mass: Option<f64>,
}

/// Built-in right-hand sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    One,
    Zbar,
    Gaussian,
}

impl Source {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "one" => Some(Source::One),
            "zbar" => Some(Source::Zbar),
            "gaussian" => Some(Source::Gaussian),
            _ => None,
        }
    }

    pub fn sample(self, grid: &Grid2D) -> FieldC {
        FieldC::from_fn(grid, Support::Interior, |z| match self {
            Source::One => C::new(1.0, 0.0),
            Source::Zbar => z.conj(),
            Source::Gaussian => C::new((-z.norm_sqr()).exp(), 0.0),
        })
    }
}

/// Result of applying T = D_h H⁻¹ to g.
#[derive(Clone, Debug)]
pub struct TApplication {
    /// Stacked D_h w.
    pub v: Vec<C>,
    /// w = H⁻¹g.
    pub w: FieldC,
    pub iterations: usize,
    /// ‖D̄_h v − g‖/‖g‖.
    pub residual_rel: f64,
}

/// T g = D_h H⁻¹ g; `op` must carry its factor.
pub fn apply_solution_operator(op: &SparseHermitianOp, g: &FieldC, tol: f64, max_iter: usize) -> Result<TApplication> {
    let factor = op
        .factor()
        .ok_or_else(|| Error::Usage("solution operator needs the factored assembly of H".into()))?;
    let inv = apply_inverse(op, g, tol, max_iter)?;
    let v = factor.apply(&inv.field)?;
    let back = factor.apply_adjoint(&v)?;
    let gn = norm2(g.values());
    let diff: Vec<C> = back.iter().zip(g.values()).map(|(a, b)| a - b).collect();
    let residual_rel = if gn > 0.0 { norm2(&diff) / gn } else { norm2(&diff) };
    Ok(TApplication { v, w: inv.field, iterations: inv.iterations, residual_rel })
}

fn phi_samples(grid: &Grid2D, weight: &WeightModel, support: Support) -> Result<Vec<f64>> {
    let phi: Vec<f64> = (0..grid.len(support)).map(|k| weight.eval(grid.point(k))).collect::<Result<_>>()?;
    let mut worst: Option<f64> = None;
    for (k, p) in phi.iter().enumerate() {
        if *p > PHI_BUDGET {
            let r = grid.point(k).norm();
            worst = Some(worst.map_or(r, |w: f64| w.min(r)));
        }
    }
    match worst {
        Some(radius) => Err(Error::DomainTooLarge { radius }),
        None => Ok(phi),
    }
}

/// 2π∫_R^∞ r e^{−2 r^m} dr for monomial weights.
fn radial_tail(weight: &WeightModel, r0: f64) -> Option<f64> {
    let WeightModel::Monomial { m } = weight else { return None };
    let f = |r: f64| r * (-2.0 * r.powf(*m)).exp();
    let (a, b, steps) = (r0, r0 + 10.0, 4000usize);
    let h = (b - a) / steps as f64;
    let mut s = f(a) + f(b);
    for i in 1..steps {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    Some(2.0 * std::f64::consts::PI * s * h / 3.0)
}

/// Minimal-norm solution of ∂̄u = f with certificates.
pub fn canonical_solve(grid: &Grid2D, weight: &WeightModel, f: &FieldC, opts: &SolveOptions) -> Result<SolveReport> {
    let h = assemble_H(grid, weight)?;
    canonical_solve_with(grid, weight, &h, f, opts)
}

/// As [`canonical_solve`] with a prebuilt factored H.
pub fn canonical_solve_with(
    grid: &Grid2D,
    weight: &WeightModel,
    op: &SparseHermitianOp,
    f: &FieldC,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    if f.grid_key() != grid.key() || f.support() != Support::Interior {
        return Err(Error::Usage("right-hand side is bound to a different grid".into()));
    }
    if f.values().iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Usage("right-hand side has non-finite samples".into()));
    }
    let phi = phi_samples(grid, weight, Support::Closure)?;
    let g_vals: Vec<C> = f.values().iter().zip(&phi).map(|(fv, p)| fv * (-p).exp()).collect();
    let g = FieldC::from_values(grid, Support::Interior, g_vals)?;
    let t = apply_solution_operator(op, &g, opts.tol, opts.max_iter)?;
    let factor = op.factor().expect("checked by apply_solution_operator");
    let synth = factor.synthesize(&t.v).to_interior(grid);
    let u = FieldC::from_values(
        grid,
        Support::Interior,
        synth.values().iter().zip(&phi).map(|(v, p)| v * p.exp()).collect(),
    )?;
    let hh = grid.h() * grid.h();
    let weighted_norm = (norm2(synth.values()).powi(2) * hh).sqrt();
    let stacked_norm = factor.stacked_norm_sqr(grid, &t.v).sqrt();
    let ortho_defect = orthogonality_defect(grid, weight, &u, opts.ortho_degree)?;
    Ok(SolveReport {
        u,
        v: synth,
        residual_rel: t.residual_rel,
        weighted_norm,
        stacked_norm,
        ortho_defect,
        ortho_degree: opts.ortho_degree,
        cg_iterations: t.iterations,
        tail_mass: radial_tail(weight, grid.r()),
    })
}

/// max_{k≤K} |⟨u, z^k⟩_φ| / (‖u‖_φ‖z^k‖_φ) by grid quadrature.
pub fn orthogonality_defect(grid: &Grid2D, weight: &WeightModel, u: &FieldC, degree: usize) -> Result<f64> {
    if u.grid_key() != grid.key() || u.support() != Support::Interior {
        return Err(Error::Usage("field is bound to a different grid".into()));
    }
    let phi = phi_samples(grid, weight, Support::Interior)?;
    let damp: Vec<f64> = phi.iter().map(|p| (-p).exp()).collect();
    let ue: Vec<C> = u.values().iter().zip(&damp).map(|(a, d)| a * d).collect();
    let un = norm2(&ue);
    if un == 0.0 {
        return Ok(0.0);
    }
    let pts: Vec<C> = grid.interior_points().collect();
    let mut worst = 0.0_f64;
    for k in 0..=degree {
        let pk: Vec<C> = pts.iter().zip(&damp).map(|(z, d)| z.powu(k as u32) * d).collect();
        let pn = norm2(&pk);
        if !(pn.is_finite() && pn > f64::MIN_POSITIVE * 1e20) {
            return Err(Error::DegreeTooLarge { degree: k });
        }
        let ip = crate::linalg::cdot(&pk, &ue);
        worst = worst.max(ip.norm() / (un * pn));
    }
    Ok(worst)
}

/// min over random polynomials p (degree ≤ 5, standard normal coefficients)
/// of ‖u + p‖_φ − ‖u‖_φ. Negative values expose a holomorphic component in u.
pub fn minimality_probe(grid: &Grid2D, weight: &WeightModel, report: &SolveReport, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Ok(f64::INFINITY);
    }
    let phi = phi_samples(grid, weight, Support::Interior)?;
    let ve: Vec<C> = report.u.values().iter().zip(&phi).map(|(a, p)| a * (-p).exp()).collect();
    let h = grid.h();
    let base = norm2(&ve) * h;
    let pts: Vec<C> = grid.interior_points().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..trials {
        let deg = rng.random_range(0..=5usize);
        let coef: Vec<C> = (0..=deg).map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        let pert: Vec<C> = pts
            .iter()
            .zip(&phi)
            .zip(&ve)
            .map(|((z, p), v)| {
                let mut acc = C::new(0.0, 0.0);
                for c in coef.iter().rev() {
                    acc = acc * z + c;
                }
                v + acc * (-p).exp()
            })
            .collect();
        best = best.min(norm2(&pert) * h - base);
    }
    Ok(best)
}
