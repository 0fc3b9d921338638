//! Numerical evidence for or against compactness of the canonical solution
//! operator, fused into a verdict.
//!
//! Three signatures are scanned:
//! - growth of min Δφ on rings (sufficient for compactness);
//! - growth of the local ground energy μ̂ on unit balls, a lower envelope
//!   for the quadratic form (sufficient for compactness when it grows);
//! - a bounded magnetic energy ∫_{Q_w}(|B|² + Δφ) together with a lowest
//!   cluster whose multiplicity grows with the domain (obstruction).
//!
//! Verdicts are evidence from a truncated domain, never proofs.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ball_subgrid, build_grid, Grid2D, Shape};
use crate::operator::{assemble_H, SparseHermitianOp};
use crate::spectra::{cluster_count, eigs_smallest, smallest_eigs, EigenOptions};
use crate::weights::{WeightModel, GL_NODES, GL_WEIGHTS};

type C = Complex64;

/// Fewest lattice points accepted in a ball eigenproblem.
pub const MIN_BALL_POINTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Compact,
    NonCompact,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyParams {
    /// Ring radii for all scans.
    pub radii: Vec<f64>,
    pub samples_per_ring: usize,
    /// Radius of the balls for μ̂.
    pub ball_radius: f64,
    /// Relative band for a flat magnetic-energy profile.
    pub eps_flat: f64,
    /// Outermost/innermost min Δφ ratio that counts as growth.
    pub laplacian_ratio: f64,
    /// Outermost min Δφ must also reach this value.
    pub laplacian_floor: f64,
    /// Cluster-count ratio between consecutive domains that counts as growth.
    pub growth_ratio: f64,
    /// μ̂ slope must exceed this fraction of the mean μ̂.
    pub mu_slope: f64,
    /// Disk radii of the degeneracy probe.
    pub degeneracy_radii: Vec<f64>,
    pub degeneracy_k: usize,
    pub halfwidth: f64,
    /// Largest plaquette flux Δφ·h² for which ball energies are trusted.
    pub max_flux: f64,
    pub eig_tol: f64,
    pub seed: u64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            radii: vec![1.0, 2.0, 3.0, 4.0],
            samples_per_ring: 8,
            ball_radius: 1.0,
            eps_flat: 0.15,
            laplacian_ratio: 4.0,
            laplacian_floor: 10.0,
            growth_ratio: 1.5,
            mu_slope: 0.1,
            degeneracy_radii: vec![3.0, 4.5],
            degeneracy_k: 64,
            halfwidth: 0.2,
            max_flux: std::f64::consts::FRAC_PI_2,
            eig_tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuProfile {
    /// (ring radius, min μ̂ over the ring)
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of μ̂ against radius.
    pub slope: f64,
    pub mean: f64,
}

impl MuProfile {
    pub fn strictly_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 > w[0].1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracySample {
    pub radius: f64,
    pub count: usize,
    pub saturated: bool,
    /// Window centre (the domain's lowest eigenvalue).
    pub center: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub fired: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub verdict: Verdict,
    pub mu_profile: MuProfile,
    /// (|w|, F(w)) for every sampled centre, ordered by |w|.
    pub magnetic_integral_profile: Vec<(f64, f64)>,
    /// (radius, min Δφ on the circle)
    pub laplacian_profile: Vec<(f64, f64)>,
    pub degeneracy_growth: Vec<DegeneracySample>,
    pub criteria_fired: Vec<String>,
    pub criteria: Vec<Criterion>,
    pub params: ClassifyParams,
    pub max_plaquette_flux: f64,
    pub disclaimer: String,
}

/// Smallest eigenvalue of H restricted (Dirichlet) to the lattice points of
/// B(z0, r).
pub fn local_ground_energy(grid: &Grid2D, op: &SparseHermitianOp, z0: C, r: f64, tol: f64) -> Result<f64> {
    let idx = ball_subgrid(grid, z0, r)?;
    if idx.len() < MIN_BALL_POINTS {
        return Err(Error::Resolution(format!(
            "ball B({}{:+}i, {r}) holds {} lattice points, need {MIN_BALL_POINTS}",
            z0.re,
            z0.im,
            idx.len()
        )));
    }
    let sub = op.restrict(&idx);
    let opts = EigenOptions { tol, ..EigenOptions::default() };
    let e = eigs_smallest(&sub, 1, &opts)?;
    Ok(e.lambdas[0])
}

fn ring_centers(radius: f64, samples: usize) -> Vec<C> {
    if radius == 0.0 {
        return vec![C::new(0.0, 0.0)];
    }
    (0..samples.max(1))
        .map(|k| C::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / samples.max(1) as f64))
        .collect()
}

fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// For each radius, the minimum of μ̂ over `samples_per_ring` centres on the
/// circle, with the least-squares slope of the profile.
pub fn mu_profile(
    grid: &Grid2D,
    op: &SparseHermitianOp,
    radii: &[f64],
    samples_per_ring: usize,
    ball_radius: f64,
    tol: f64,
) -> Result<MuProfile> {
    let mut jobs = Vec::new();
    for (ri, &rho) in radii.iter().enumerate() {
        for c in ring_centers(rho, samples_per_ring) {
            if !grid.contains_ball(c, ball_radius) {
                return Err(Error::Config(format!(
                    "ring of radius {rho} leaves no margin of {ball_radius} inside the grid"
                )));
            }
            jobs.push((ri, c));
        }
    }
    let energies: Vec<(usize, f64)> = jobs
        .into_par_iter()
        .map(|(ri, c)| local_ground_energy(grid, op, c, ball_radius, tol).map(|e| (ri, e)))
        .collect::<Result<_>>()?;
    let points: Vec<(f64, f64)> = radii
        .iter()
        .enumerate()
        .map(|(ri, &rho)| {
            let m = energies.iter().filter(|e| e.0 == ri).map(|e| e.1).fold(f64::INFINITY, f64::min);
            (rho, m)
        })
        .collect();
    let mean = if points.is_empty() { 0.0 } else { points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64 };
    Ok(MuProfile { slope: ls_slope(&points), mean, points })
}

/// ∫_{B(w,1)} (|Δφ|² + Δφ) dλ by a polar product rule (8 radial panels of
/// 4-point Gauss–Legendre, 64 angles).
pub fn magnetic_integral(grid: &Grid2D, weight: &WeightModel, w: C) -> Result<f64> {
    if !grid.contains_ball(w, 1.0) {
        return Err(Error::Config(format!("unit ball at {}{:+}i is not inside the grid", w.re, w.im)));
    }
    const PANELS: usize = 8;
    const ANGLES: usize = 64;
    let mut s = 0.0;
    for p in 0..PANELS {
        for (t, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let rho = (p as f64 + t) / PANELS as f64;
            let mut ring = 0.0;
            for a in 0..ANGLES {
                let z = w + C::from_polar(rho, 2.0 * std::f64::consts::PI * a as f64 / ANGLES as f64);
                let b = weight.laplacian(z)?;
                ring += b * b + b;
            }
            s += wt / PANELS as f64 * rho * ring * (2.0 * std::f64::consts::PI / ANGLES as f64);
        }
    }
    Ok(s)
}

fn laplacian_profile(weight: &WeightModel, radii: &[f64], samples: usize) -> Result<Vec<(f64, f64)>> {
    radii
        .iter()
        .map(|&rho| {
            let m = ring_centers(rho, samples.max(64))
                .into_iter()
                .map(|z| weight.laplacian(z))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            Ok((rho, m))
        })
        .collect()
}

fn degeneracy_probe(weight: &WeightModel, h: f64, p: &ClassifyParams) -> Result<Vec<DegeneracySample>> {
    p.degeneracy_radii
        .iter()
        .map(|&r| {
            let g = build_grid(r, h, Shape::Disk)?;
            let op = assemble_H(&g, weight)?;
            let k = p.degeneracy_k.min(g.n() / 4).max(1);
            let opts = EigenOptions { tol: p.eig_tol, seed: p.seed, ..EigenOptions::default() };
            let e = smallest_eigs(&op, h, k, &opts)?;
            let center = e.lambdas[0];
            let c = cluster_count(&e, center, p.halfwidth);
            Ok(DegeneracySample { radius: r, count: c.count, saturated: c.saturated, center })
        })
        .collect()
}

/// Runs all scans on `grid` and fuses them into a verdict.
pub fn classify(grid: &Grid2D, weight: &WeightModel, p: &ClassifyParams) -> Result<CompactnessReport> {
    if p.radii.is_empty() {
        return Err(Error::Config("diagnose needs at least one ring radius".into()));
    }
    let mut radii = p.radii.clone();
    radii.sort_by(f64::total_cmp);
    let op = assemble_H(grid, weight)?;
    let h = grid.h();

    // flux through one plaquette over the scanned region
    let reach = radii.last().unwrap() + p.ball_radius;
    let mut max_flux = 0.0_f64;
    for k in 0..grid.n() {
        let z = grid.point(k);
        if z.norm() <= reach {
            max_flux = max_flux.max(weight.laplacian(z)? * h * h);
        }
    }

    let lap = laplacian_profile(weight, &radii, p.samples_per_ring)?;
    let mu = mu_profile(grid, &op, &radii, p.samples_per_ring, p.ball_radius, p.eig_tol)?;

    let mut centers: Vec<C> = vec![C::new(0.0, 0.0)];
    for &rho in &radii {
        centers.extend(ring_centers(rho, p.samples_per_ring));
    }
    let mut magnetic: Vec<(f64, f64)> = centers
        .par_iter()
        .map(|w| magnetic_integral(grid, weight, *w).map(|f| (w.norm(), f)))
        .collect::<Result<_>>()?;
    magnetic.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut criteria = Vec::new();

    let (inner, outer) = (lap.first().unwrap().1, lap.last().unwrap().1);
    let lap_ratio = if inner > 0.0 { outer / inner } else if outer > 0.0 { f64::INFINITY } else { 0.0 };
    let lap_fired = outer >= p.laplacian_ratio * inner && outer >= p.laplacian_floor && lap.len() >= 2;
    criteria.push(Criterion {
        name: "laplacian_growth".into(),
        fired: lap_fired,
        statistic: if lap_ratio.is_finite() { lap_ratio } else { f64::MAX },
        threshold: p.laplacian_ratio,
        note: format!("outermost min laplacian {outer:.4} (floor {}), innermost {inner:.4}", p.laplacian_floor),
    });

    let flux_ok = max_flux <= p.max_flux;
    let mu_fired = flux_ok && mu.points.len() >= 2 && mu.strictly_increasing() && mu.slope > p.mu_slope * mu.mean;
    criteria.push(Criterion {
        name: "ground_energy_growth".into(),
        fired: mu_fired,
        statistic: if mu.mean > 0.0 { mu.slope / mu.mean } else { 0.0 },
        threshold: p.mu_slope,
        note: if flux_ok {
            format!("slope {:.4}, mean {:.4}, strictly increasing: {}", mu.slope, mu.mean, mu.strictly_increasing())
        } else {
            format!("skipped: plaquette flux {max_flux:.3} exceeds {:.3}; refine h", p.max_flux)
        },
    });

    let fmin = magnetic.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let fmax = magnetic.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
    let fmean = magnetic.iter().map(|m| m.1).sum::<f64>() / magnetic.len() as f64;
    let spread = if fmean > 0.0 { (fmax - fmin) / fmean } else { f64::INFINITY };
    let flat = fmin > 0.0 && spread <= p.eps_flat;
    let (degeneracy, growth) = if flat {
        let d = degeneracy_probe(weight, h, p)?;
        let grows = d.len() >= 2
            && d.iter().all(|s| !s.saturated && s.count > 0)
            && d.windows(2).all(|w| w[1].count as f64 >= p.growth_ratio * w[0].count as f64);
        (d, grows)
    } else {
        (Vec::new(), false)
    };
    let ratio = degeneracy
        .windows(2)
        .map(|w| if w[0].count > 0 { w[1].count as f64 / w[0].count as f64 } else { 0.0 })
        .fold(f64::INFINITY, f64::min);
    criteria.push(Criterion {
        name: "bounded_magnetic_energy_with_degeneracy".into(),
        fired: flat && growth,
        statistic: if spread.is_finite() { spread } else { f64::MAX },
        threshold: p.eps_flat,
        note: if !flat {
            format!("magnetic energy not flat or vanishing: min {fmin:.4}, max {fmax:.4}; degeneracy probe skipped")
        } else {
            format!(
                "magnetic energy in [{fmin:.4}, {fmax:.4}]; weakest cluster growth {:.3} (threshold {})",
                if ratio.is_finite() { ratio } else { 0.0 },
                p.growth_ratio
            )
        },
    });

    let criteria_fired: Vec<String> = criteria.iter().filter(|c| c.fired).map(|c| c.name.clone()).collect();
    let compact = lap_fired || mu_fired;
    let noncompact = flat && growth;
    let verdict = match (compact, noncompact) {
        (true, false) => Verdict::Compact,
        (false, true) => Verdict::NonCompact,
        _ => Verdict::Inconclusive,
    };
    let report = CompactnessReport {
        verdict,
        mu_profile: mu,
        magnetic_integral_profile: magnetic,
        laplacian_profile: lap,
        degeneracy_growth: degeneracy,
        criteria_fired: criteria_fired.clone(),
        criteria,
        params: p.clone(),
        max_plaquette_flux: max_flux,
        disclaimer: "numerical evidence on a truncated domain, not a proof".into(),
    };
    if compact && noncompact {
        return Err(Error::ConflictingVerdicts { fired: criteria_fired, report: Box::new(report) });
    }
    Ok(report)
}
