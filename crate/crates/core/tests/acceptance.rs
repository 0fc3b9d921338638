//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use dbarlab::dbar_solver::{apply_solution_operator, SolveOptions};
use dbarlab::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type C = Complex64;

/// Width of the boundary layer used to tell Dirichlet edge states from bulk
/// Landau states (about three magnetic lengths for B = 4).
const EDGE_WIDTH: f64 = 1.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_field(rng: &mut ChaCha8Rng, grid: &Grid2D) -> FieldC {
    let vals = (0..grid.n())
        .map(|_| C::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    FieldC::from_values(grid, Support::Interior, vals).unwrap()
}

fn h_dot(h: f64, a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<C>() * (h * h)
}

fn structural() -> Outcome {
    let grid = build_grid(4.0, 0.1, Shape::Square).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut notes = Vec::new();
    let mut pass = true;
    for m in [2.0, 4.0] {
        let w = WeightModel::monomial(m).unwrap();
        let op = assemble_H(&grid, &w).unwrap();
        let d = op.factor().unwrap();
        let dbar = assemble_Dbar(d);
        let herm = op.matrix().is_exactly_hermitian();
        let (mut gram, mut adj) = (0.0_f64, 0.0_f64);
        for _ in 0..100 {
            let u = random_field(&mut rng, &grid);
            let du = d.apply(&u).unwrap();
            let hu = op.apply(&u).unwrap();
            let q = h_dot(grid.h(), hu.values(), u.values()).re;
            let dn = h_dot(grid.h(), &du, &du).re;
            gram = gram.max((q - dn).abs() / dn);
            let v: Vec<C> =
                (0..du.len()).map(|_| C::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect();
            let lhs = h_dot(grid.h(), &du, &v);
            let rhs = h_dot(grid.h(), u.values(), &dbar.mul_vec(&v));
            let vn = h_dot(grid.h(), &v, &v).re.sqrt();
            adj = adj.max((lhs - rhs).norm() / (dn.sqrt() * vn));
        }
        pass &= herm && gram <= 1e-12 && adj <= 1e-13;
        notes.push(format!("m={m}: hermitian={herm} gram={gram:.1e} adjoint={adj:.1e}"));
    }
    outcome(pass, notes.join("; "))
}

struct Landau {
    grid: Grid2D,
    op: SparseHermitianOp,
    eig: EigenResult,
}

fn landau_run(r: f64, h: f64, k: usize) -> Landau {
    let grid = build_grid(r, h, Shape::Square).unwrap();
    let op = assemble_H(&grid, &WeightModel::fock()).unwrap();
    let eig = smallest_eigs(&op, h, k, &EigenOptions::default()).unwrap();
    Landau { grid, op, eig }
}

fn bulk(run: &Landau) -> Vec<(f64, bool)> {
    run.eig
        .lambdas
        .iter()
        .zip(&run.eig.vectors)
        .zip(&run.eig.converged)
        .filter(|(_, c)| **c)
        .map(|((l, v), _)| (*l, boundary_mass_fraction(&run.grid, v, EDGE_WIDTH) < 0.5))
        .collect()
}

fn landau(main: &Landau) -> Outcome {
    // dense cross-check on a small domain first
    let small = build_grid(3.0, 0.25, Shape::Square).unwrap();
    let sop = assemble_H(&small, &WeightModel::fock()).unwrap();
    let dense = dense_smallest(sop.matrix(), 20, 1e-8).unwrap();
    let krylov = eigs_smallest(sop.matrix(), 20, &EigenOptions::default()).unwrap();
    let cross = dense.lambdas.iter().zip(&krylov.lambdas).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let e = &main.eig;
    let l1 = e.lambdas[0];
    let levels = bulk(main);
    let gap_all = levels.iter().filter(|(l, _)| (2.5..=3.5).contains(l)).count();
    let gap_bulk = levels.iter().filter(|(l, b)| *b && (2.5..=3.5).contains(l)).count();
    let second: Vec<f64> = levels.iter().filter(|(l, b)| *b && *l > 3.5).map(|(l, _)| *l).collect();
    let second_ok = !second.is_empty() && second.iter().all(|l| (l - 4.0).abs() <= 0.2);
    let (s_lo, s_hi) =
        second.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), l| (a.min(*l), b.max(*l)));
    let conv = e.converged.iter().filter(|c| **c).count();
    let pass = cross <= 1e-8 && (1.9..=2.1).contains(&l1) && gap_bulk == 0 && second_ok;
    outcome(
        pass,
        format!(
            "dense/krylov R=3 h=0.25 max|dλ|={cross:.1e} (dense λ1={:.4}); R=6 h=0.1: λ1={l1:.5}, \
             converged {conv}/{}, bulk states in [2.5,3.5]={gap_bulk} (edge states {gap_all}), \
             second bulk cluster {} states in [{s_lo:.4}, {s_hi:.4}]",
            dense.lambdas[0],
            e.k(),
            second.len()
        ),
    )
}

fn diagnose_grid() -> Grid2D {
    build_grid(5.5, 0.05, Shape::Square).unwrap()
}

fn noncompact(main: &Landau) -> Outcome {
    let smaller = landau_run(4.0, 0.1, 80);
    let c6 = cluster_count(&main.eig, 2.0, 0.2);
    let c4 = cluster_count(&smaller.eig, 2.0, 0.2);
    let ratio = c6.count as f64 / c4.count.max(1) as f64;
    let rep = classify(&diagnose_grid(), &WeightModel::fock(), &ClassifyParams::default());
    let (verdict, fired) = match &rep {
        Ok(r) => (format!("{:?}", r.verdict), r.criteria_fired.join(",")),
        Err(e) => (format!("error: {e}"), String::new()),
    };
    let pass = !c6.saturated
        && !c4.saturated
        && ratio >= 1.8
        && matches!(&rep, Ok(r) if r.verdict == Verdict::NonCompact);
    outcome(
        pass,
        format!(
            "count R=6 {} (sat {}), R=4 {} (sat {}), ratio {ratio:.3}; verdict {verdict} [{fired}]",
            c6.count, c6.saturated, c4.count, c4.saturated
        ),
    )
}

fn compact() -> Outcome {
    let rep = match classify(&diagnose_grid(), &WeightModel::monomial(4.0).unwrap(), &ClassifyParams::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("classify failed: {e}")),
    };
    let pts = &rep.mu_profile.points;
    let at = |rho: f64| pts.iter().find(|p| p.0 == rho).map(|p| p.1).unwrap_or(f64::NAN);
    let (m2, m4) = (at(2.0), at(4.0));
    let pass = rep.mu_profile.strictly_increasing() && m4 >= 2.0 * m2 && rep.verdict == Verdict::Compact;
    let prof: Vec<String> = pts.iter().map(|(r, m)| format!("{r}:{m:.3}")).collect();
    outcome(
        pass,
        format!(
            "mu profile [{}], mu(4)/mu(2)={:.2}, verdict {:?} [{}]",
            prof.join(" "),
            m4 / m2,
            rep.verdict,
            rep.criteria_fired.join(",")
        ),
    )
}

fn canonical() -> Outcome {
    // oracle: u = z̄, ‖z̄‖²_φ = ∫ r² e^{−2r²} dλ = π/4
    let oracle = {
        let n = 200_000;
        let b = 8.0;
        let dr = b / n as f64;
        (0..n).map(|i| {
            let r = (i as f64 + 0.5) * dr;
            2.0 * PI * r.powi(3) * (-2.0 * r * r).exp() * dr
        })
        .sum::<f64>()
    };
    let grid = build_grid(6.0, 0.05, Shape::Square).unwrap();
    let w = WeightModel::fock();
    let f = FieldC::from_fn(&grid, Support::Interior, |_| C::new(1.0, 0.0));
    let rep = canonical_solve(&grid, &w, &f, &SolveOptions::default()).unwrap();
    let mut max_rel = 0.0_f64;
    for (k, u) in rep.u.values().iter().enumerate() {
        let z = grid.point(k);
        if z.norm() <= 3.0 && z.norm() > 0.0 {
            max_rel = max_rel.max((u - z.conj()).norm() / z.norm());
        }
    }
    let nsq = rep.weighted_norm.powi(2);
    let norm_err = (nsq - oracle).abs() / oracle;
    let mini = minimality_probe(&grid, &w, &rep, 100, 0).unwrap();
    let pass = (oracle - PI / 4.0).abs() < 1e-9
        && max_rel <= 0.05
        && norm_err <= 0.02
        && rep.ortho_defect <= 1e-3
        && mini >= -1e-6;
    outcome(
        pass,
        format!(
            "max rel err {max_rel:.2e}, ‖u‖²={nsq:.5} vs π/4 (rel {norm_err:.2e}), ortho(K=10)={:.2e}, \
             minimality {mini:.3e}, CG iters {}",
            rep.ortho_defect, rep.cg_iterations
        ),
    )
}

fn tstar_t(main: &Landau) -> Outcome {
    let grid = &main.grid;
    let tol = 1e-10;
    let sigma1 = solution_singular_values(&main.eig.lambdas[..1]).unwrap().sigma[0];
    let factor = main.op.factor().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut worst_id, mut worst_bound) = (0.0_f64, 0.0_f64);
    for _ in 0..20 {
        let g = random_field(&mut rng, grid);
        let t = apply_solution_operator(&main.op, &g, tol, 20_000).unwrap();
        let tt = factor.stacked_norm_sqr(grid, &t.v);
        let gw = integrate(grid, &g, &t.w).unwrap().re;
        let gn = integrate(grid, &g, &g).unwrap().re;
        worst_id = worst_id.max((tt - gw).abs() / (10.0 * tol * gn));
        worst_bound = worst_bound.max(tt.sqrt() / (sigma1 * gn.sqrt()));
    }
    outcome(
        worst_id <= 1.0 && worst_bound <= 1.0,
        format!("max |TT-G|/(10 tol ‖g‖²) = {worst_id:.3}, max ‖Tg‖/(σ1‖g‖) = {worst_bound:.4}, σ1={sigma1:.5}"),
    )
}

fn magnetic_scan() -> Outcome {
    let grid = build_grid(6.0, 0.1, Shape::Square).unwrap();
    let w = WeightModel::fock();
    let target = 20.0 * PI;
    let mut vals = Vec::new();
    for rho in [0.0, 1.0, 2.0, 3.0, 4.0] {
        let n = if rho == 0.0 { 1 } else { 8 };
        for j in 0..n {
            let c = C::from_polar(rho, 2.0 * PI * j as f64 / n as f64);
            if grid.contains_ball(c, 1.0) {
                vals.push(magnetic_integral(&grid, &w, c).unwrap());
            }
        }
    }
    let worst = vals.iter().map(|v| (v - target).abs() / target).fold(0.0, f64::max);
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), v| (a.min(*v), b.max(*v)));
    let spread = (hi - lo) / lo;
    outcome(
        worst <= 0.02 && spread <= 0.15,
        format!("{} centres, max rel dev from 20π {worst:.2e}, spread {spread:.2e}", vals.len()),
    )
}

/// C^∞ bump of radius 1 centred off the origin.
fn bump(z: C) -> C {
    let r2 = (z - C::new(0.3, 0.0)).norm_sqr();
    if r2 >= 1.0 {
        C::new(0.0, 0.0)
    } else {
        C::new((-1.0 / (1.0 - r2)).exp(), 0.0)
    }
}

fn form_defect(w: &WeightModel, h: f64) -> f64 {
    let grid = build_grid(2.0, h, Shape::Square).unwrap();
    let a = assemble_H(&grid, w).unwrap();
    let b = assemble_schrodinger(&grid, w).unwrap();
    let u = FieldC::from_fn(&grid, Support::Interior, bump);
    let (au, bu) = (a.apply(&u).unwrap(), b.apply(&u).unwrap());
    let diff: Vec<C> = au.values().iter().zip(bu.values()).map(|(x, y)| x - y).collect();
    (h_dot(h, &diff, &diff).re / h_dot(h, u.values(), u.values()).re).sqrt()
}

fn convergence(main: &Landau) -> Outcome {
    let w4 = WeightModel::monomial(4.0).unwrap();
    let d: Vec<f64> = [0.025, 0.0125, 0.00625].iter().map(|h| form_defect(&w4, *h)).collect();
    let ratios = [d[0] / d[1], d[1] / d[2]];
    let fock: Vec<f64> = [0.025, 0.0125].iter().map(|h| form_defect(&WeightModel::fock(), *h)).collect();

    let fine = build_grid(6.0, 0.05, Shape::Square).unwrap();
    let fop = assemble_H(&fine, &WeightModel::fock()).unwrap();
    let fe = smallest_eigs(&fop, 0.05, 1, &EigenOptions::default()).unwrap();
    let (c1, f1) = (main.eig.lambdas[0], fe.lambdas[0]);
    let shift = (c1 - f1).abs() / f1;
    let pass = (1.5..=2.5).contains(&ratios[1]) && shift <= 0.03;
    outcome(
        pass,
        format!(
            "m=4 defects {:.3e} {:.3e} {:.3e} ratios {:.3} {:.3}; m=2 ratio {:.3} (info); \
             λ1 h=0.1 {c1:.5} h=0.05 {f1:.5} (residual {:.1e}) shift {shift:.2e}",
            d[0],
            d[1],
            d[2],
            ratios[0],
            ratios[1],
            fock[0] / fock[1],
            fe.residuals[0]
        ),
    )
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| outcome(false, "panicked".into()));
    println!(
        "criterion {id} {} {name} ({:.1}s): {}",
        if res.pass { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64(),
        res.detail
    );
    res.pass
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut ok = true;
    ok &= run(1, "structural exactness", structural);
    let t = Instant::now();
    let main_run = landau_run(6.0, 0.1, 160);
    println!("(shared R=6 h=0.1 k=160 eigensolve: {:.1}s)", t.elapsed().as_secs_f64());
    ok &= run(2, "landau levels", || landau(&main_run));
    ok &= run(3, "noncompactness signature", || noncompact(&main_run));
    ok &= run(4, "compactness signature", compact);
    ok &= run(5, "canonical solve", canonical);
    ok &= run(6, "T*T identity", || tstar_t(&main_run));
    ok &= run(7, "magnetic integral scan", magnetic_scan);
    ok &= run(8, "convergence discipline", || convergence(&main_run));
    if !ok {
        std::process::exit(1);
    }
}
