//! The pipeline behind each subcommand. Every command produces a list of
//! artifacts in memory; nothing touches the output directory until the
//! computation is done.

use std::collections::BTreeMap;
use std::path::Path;

use dbarlab::compactness::MuProfile;
use dbarlab::dbar_solver::{canonical_solve, Source, SolveOptions};
use dbarlab::weights::{DoublingReport, WeightDescriptor};
use dbarlab::{
    assemble_H, classify, cluster_count, doubling_report, minimality_probe, mu_profile, smallest_eigs,
    solution_singular_values, Complex64, CompactnessReport, EigenOptions, Error, FieldC, Grid2D, Support, Verdict,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cache::{key_of, Artifact, ResultCache};
use crate::config::{Format, RunConfig};
use crate::failure::{Failure, EXIT_NUMERICAL};

type C = Complex64;

pub const ARTIFACTS: [(&str, &str); 5] = [
    ("weights-check", "weights.json"),
    ("eigs", "eigs.json"),
    ("solve", "solve.json"),
    ("diagnose", "diagnose.json"),
    ("scan-mu", "scan_mu.json"),
];

/// Wrapper written around every JSON product.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub result: T,
}

/// What a command hands back to `main`.
pub struct Outcome {
    pub summary: String,
    /// Failure to report after the artifacts are on disk.
    pub deferred: Option<Failure>,
}

/// Hash of everything except the output block, shared by all commands run
/// from the same configuration.
pub fn config_hash(cfg: &RunConfig, weight: &WeightDescriptor) -> String {
    let mut c = cfg.clone();
    c.output = Default::default();
    key_of("config", &(c, weight))
}

fn envelope<T: Serialize>(command: &str, cfg: &RunConfig, weight: &WeightDescriptor, result: T) -> Result<Vec<u8>, Failure> {
    let env = Envelope {
        command: command.to_string(),
        config_hash: config_hash(cfg, weight),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: RunConfig { output: Default::default(), ..cfg.clone() },
        result,
    };
    let mut bytes = serde_json::to_vec_pretty(&env)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn dat(rows: &[(f64, f64)], header: &str) -> Vec<u8> {
    let mut s = format!("# {header}\n");
    for (a, b) in rows {
        s.push_str(&format!("{a:.17e} {b:.17e}\n"));
    }
    s.into_bytes()
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Failure::io(e.to_string()))
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in artifacts {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn json_field<'a>(artifacts: &'a [Artifact], file: &str) -> Option<Value> {
    artifacts.iter().find(|a| a.0 == file).and_then(|a| serde_json::from_slice(&a.1).ok())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WeightsCheck {
    pub descriptor: WeightDescriptor,
    pub subharmonic: bool,
    pub min_laplacian: f64,
    pub max_laplacian: f64,
    pub doubling: DoublingReport,
}

pub fn weights_check(cfg: &RunConfig) -> Result<(Vec<Artifact>, Outcome), Failure> {
    let w = cfg.weight_model()?;
    let grid = cfg.build_grid()?;
    w.check_subharmonic()?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..grid.len(Support::Closure) {
        let l = w.laplacian(grid.point(k))?;
        lo = lo.min(l);
        hi = hi.max(l);
    }
    let r = grid.r();
    let centers = [C::new(0.0, 0.0), C::new(r / 4.0, 0.0), C::new(r / 2.0, 0.0)];
    let doubling = doubling_report(&w, &centers, &[0.5, 1.0], grid.h().min(0.5))?;
    let desc = w.describe();
    let result = WeightsCheck { descriptor: desc.clone(), subharmonic: true, min_laplacian: lo, max_laplacian: hi, doubling };
    let summary = format!(
        "weights-check: {} subharmonic, Δφ in [{lo:.4}, {hi:.4}], doubling constant {}",
        desc.kind,
        result.doubling.c_hat.map_or("n/a".to_string(), |c| format!("{c:.4}"))
    );
    let bytes = envelope("weights-check", cfg, &desc, result)?;
    Ok((vec![("weights.json".into(), bytes)], Outcome { summary, deferred: None }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EigsResult {
    pub n: usize,
    pub k: usize,
    pub lambdas: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
    pub all_converged: bool,
    pub restart_cycles: usize,
    pub sigma: Vec<f64>,
    pub cluster_center: f64,
    pub cluster_halfwidth: f64,
    pub cluster_count: usize,
    pub cluster_saturated: bool,
}

pub fn eigs(cfg: &RunConfig, cache: &ResultCache) -> Result<(Vec<Artifact>, Outcome), Failure> {
    let w = cfg.weight_model()?;
    let desc = w.describe();
    let key = key_of("eigs", &(&cfg.weight, &desc, &cfg.grid, &cfg.eigs, cfg.seed, &cfg.output.formats));
    let (artifacts, hit) = cache.get_or_compute(&key, || {
        let grid = cfg.build_grid()?;
        let op = assemble_H(&grid, &w)?;
        let opts = EigenOptions {
            tol: cfg.eigs.tol,
            max_restarts: cfg.eigs.max_restarts,
            seed: cfg.seed,
            ..EigenOptions::default()
        };
        let e = smallest_eigs(&op, grid.h(), cfg.eigs.k, &opts)?;
        let sv = solution_singular_values(&e.lambdas)?;
        let cc = cluster_count(&e, cfg.eigs.center, cfg.eigs.halfwidth);
        let mut out = Vec::new();
        if cfg.wants(Format::Csv) {
            let rows = (0..e.k()).map(|i| {
                vec![
                    (i + 1).to_string(),
                    format!("{:.17e}", e.lambdas[i]),
                    format!("{:.6e}", e.residuals[i]),
                    e.converged[i].to_string(),
                    format!("{:.17e}", sv.sigma[i]),
                    format!("{:.17e}", sv.partial_trace[i]),
                ]
            });
            out.push(("eigs.csv".to_string(), csv_bytes(&["index", "lambda", "residual", "converged", "sigma", "partial_trace"], rows)?));
        }
        if cfg.wants(Format::Mtx) {
            let mut buf = Vec::new();
            op.write_matrix_market(&mut buf)?;
            out.push(("H.mtx".to_string(), buf));
        }
        let result = EigsResult {
            n: grid.n(),
            k: e.k(),
            all_converged: e.all_converged(),
            restart_cycles: e.iterations,
            sigma: sv.sigma,
            cluster_center: cfg.eigs.center,
            cluster_halfwidth: cfg.eigs.halfwidth,
            cluster_count: cc.count,
            cluster_saturated: cc.saturated,
            lambdas: e.lambdas,
            residuals: e.residuals,
            converged: e.converged,
        };
        out.push(("eigs.json".to_string(), envelope("eigs", cfg, &desc, result)?));
        Ok(out)
    })?;
    let j = json_field(&artifacts, "eigs.json").ok_or_else(|| Failure::io("cached eigs entry lacks eigs.json"))?;
    let r = &j["result"];
    let conv = r["converged"].as_array().map_or(0, |a| a.iter().filter(|c| c.as_bool() == Some(true)).count());
    let k = r["k"].as_u64().unwrap_or(0);
    let summary = format!(
        "eigs: n={} k={k} λ1={:.6} converged {conv}/{k} cluster({}±{})={}{}",
        r["n"],
        r["lambdas"][0].as_f64().unwrap_or(f64::NAN),
        cfg.eigs.center,
        cfg.eigs.halfwidth,
        r["cluster_count"],
        if hit { " (cached)" } else { "" }
    );
    let deferred = (conv as u64 != k).then(|| Failure {
        exit_code: EXIT_NUMERICAL,
        kind: "non_convergence".into(),
        message: format!("{} of {k} eigenpairs missed the residual tolerance {}", k - conv as u64, cfg.eigs.tol),
    });
    Ok((artifacts, Outcome { summary, deferred }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub source: String,
    pub residual_rel: f64,
    pub weighted_norm: f64,
    pub weighted_norm_sqr: f64,
    pub stacked_norm: f64,
    pub ortho_defect: f64,
    pub ortho_degree: usize,
    pub minimality: Option<f64>,
    pub minimality_trials: usize,
    pub cg_iterations: usize,
    pub tail_mass: Option<f64>,
}

/// Reads f from a CSV with columns x,y,re,im. Every interior lattice point
/// must be present; points off the interior are ignored.
fn read_source_csv(grid: &Grid2D, path: &Path) -> Result<FieldC, Failure> {
    #[derive(Deserialize)]
    struct Row {
        x: f64,
        y: f64,
        re: f64,
        im: f64,
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let h = grid.h();
    let mut vals: Vec<Option<C>> = vec![None; grid.n()];
    for row in rdr.deserialize() {
        let r: Row = row?;
        let (fi, fj) = (r.x / h, r.y / h);
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() > 1e-6 || (fj - j).abs() > 1e-6 {
            return Err(Failure::config(format!("source point ({}, {}) is off the lattice of spacing {h}", r.x, r.y)));
        }
        if !(r.re.is_finite() && r.im.is_finite()) {
            return Err(Failure::config(format!("source value at ({}, {}) is not finite", r.x, r.y)));
        }
        if let Some(k) = grid.interior_index_of(i as i64, j as i64) {
            vals[k] = Some(C::new(r.re, r.im));
        }
    }
    let missing = vals.iter().filter(|v| v.is_none()).count();
    if missing > 0 {
        return Err(Failure::config(format!("source {} misses {missing} interior lattice points", path.display())));
    }
    Ok(FieldC::from_values(grid, Support::Interior, vals.into_iter().map(|v| v.unwrap()).collect())?)
}

pub fn solve(cfg: &RunConfig, cache: &ResultCache) -> Result<(Vec<Artifact>, Outcome), Failure> {
    let w = cfg.weight_model()?;
    let desc = w.describe();
    let grid = cfg.build_grid()?;
    let builtin = Source::parse(&cfg.solver.source);
    let source_digest = match builtin {
        Some(_) => None,
        None => {
            let bytes = std::fs::read(&cfg.solver.source)
                .map_err(|e| Failure::config(format!("cannot read source {}: {e}", cfg.solver.source)))?;
            Some(key_of("source", &bytes))
        }
    };
    let f = match builtin {
        Some(s) => s.sample(&grid),
        None => read_source_csv(&grid, Path::new(&cfg.solver.source))?,
    };
    let key = key_of("solve", &(&cfg.weight, &desc, &cfg.grid, &cfg.solver, &source_digest, cfg.seed, &cfg.output.formats));
    let (artifacts, hit) = cache.get_or_compute(&key, || {
        let opts = SolveOptions { tol: cfg.solver.tol, max_iter: cfg.solver.max_iter, ortho_degree: cfg.solver.ortho_degree };
        let rep = canonical_solve(&grid, &w, &f, &opts)?;
        let minimality = match cfg.solver.minimality_trials {
            0 => None,
            t => Some(minimality_probe(&grid, &w, &rep, t, cfg.seed)?),
        };
        let mut out = Vec::new();
        if cfg.wants(Format::Csv) {
            let rows = rep.u.values().iter().enumerate().map(|(k, u)| {
                let z = grid.point(k);
                vec![format!("{:.17e}", z.re), format!("{:.17e}", z.im), format!("{:.17e}", u.re), format!("{:.17e}", u.im)]
            });
            out.push(("u.csv".to_string(), csv_bytes(&["x", "y", "re", "im"], rows)?));
        }
        let result = SolveResult {
            source: cfg.solver.source.clone(),
            residual_rel: rep.residual_rel,
            weighted_norm: rep.weighted_norm,
            weighted_norm_sqr: rep.weighted_norm * rep.weighted_norm,
            stacked_norm: rep.stacked_norm,
            ortho_defect: rep.ortho_defect,
            ortho_degree: rep.ortho_degree,
            minimality,
            minimality_trials: cfg.solver.minimality_trials,
            cg_iterations: rep.cg_iterations,
            tail_mass: rep.tail_mass,
        };
        out.push(("solve.json".to_string(), envelope("solve", cfg, &desc, result)?));
        Ok(out)
    })?;
    let j = json_field(&artifacts, "solve.json").ok_or_else(|| Failure::io("cached solve entry lacks solve.json"))?;
    let r = &j["result"];
    let summary = format!(
        "solve: source={} ‖u‖²_φ={:.6} ortho={:.2e} residual={:.2e} cg={}{}",
        cfg.solver.source,
        r["weighted_norm_sqr"].as_f64().unwrap_or(f64::NAN),
        r["ortho_defect"].as_f64().unwrap_or(f64::NAN),
        r["residual_rel"].as_f64().unwrap_or(f64::NAN),
        r["cg_iterations"],
        if hit { " (cached)" } else { "" }
    );
    Ok((artifacts, Outcome { summary, deferred: None }))
}

fn report_artifacts(cfg: &RunConfig, desc: &WeightDescriptor, rep: &CompactnessReport) -> Result<Vec<Artifact>, Failure> {
    let mut out = Vec::new();
    if cfg.wants(Format::Dat) {
        out.push(("mu_profile.dat".to_string(), dat(&rep.mu_profile.points, "radius min_mu_hat")));
        out.push(("magnetic_integral.dat".to_string(), dat(&rep.magnetic_integral_profile, "abs_w F_w")));
        out.push(("laplacian_profile.dat".to_string(), dat(&rep.laplacian_profile, "radius min_laplacian")));
        let deg: Vec<(f64, f64)> = rep.degeneracy_growth.iter().map(|d| (d.radius, d.count as f64)).collect();
        out.push(("degeneracy.dat".to_string(), dat(&deg, "domain_radius cluster_count")));
    }
    out.push(("diagnose.json".to_string(), envelope("diagnose", cfg, desc, rep)?));
    Ok(out)
}

pub fn diagnose(cfg: &RunConfig, cache: &ResultCache, strict: bool) -> Result<(Vec<Artifact>, Outcome), Failure> {
    let w = cfg.weight_model()?;
    let desc = w.describe();
    let grid = cfg.build_grid()?;
    let params = cfg.classify_params();
    let key = key_of("diagnose", &(&cfg.weight, &desc, &cfg.grid, &params, &cfg.output.formats));
    let mut conflict: Option<Failure> = None;
    let (artifacts, hit) = cache.get_or_compute(&key, || match classify(&grid, &w, &params) {
        Ok(rep) => report_artifacts(cfg, &desc, &rep),
        Err(Error::ConflictingVerdicts { fired, report }) => {
            let out = report_artifacts(cfg, &desc, &report)?;
            conflict = Some(Error::ConflictingVerdicts { fired, report }.into());
            Ok(out)
        }
        Err(e) => Err(e.into()),
    })?;
    let j = json_field(&artifacts, "diagnose.json").ok_or_else(|| Failure::io("cached diagnose entry lacks diagnose.json"))?;
    let rep: CompactnessReport = serde_json::from_value(j["result"].clone())?;
    let summary = format!(
        "diagnose: verdict {:?} (fired: {}){}",
        rep.verdict,
        if rep.criteria_fired.is_empty() { "none".to_string() } else { rep.criteria_fired.join(", ") },
        if hit { " (cached)" } else { "" }
    );
    // a cached conflicting report is recognised by having both kinds fire
    let conflict = conflict.or_else(|| {
        let compact = rep.criteria_fired.iter().any(|c| c != "bounded_magnetic_energy_with_degeneracy");
        let noncompact = rep.criteria_fired.iter().any(|c| c == "bounded_magnetic_energy_with_degeneracy");
        (compact && noncompact).then(|| Failure {
            exit_code: EXIT_NUMERICAL,
            kind: "consistency".into(),
            message: format!("conflicting verdicts: {}", rep.criteria_fired.join(", ")),
        })
    });
    let deferred = conflict.or_else(|| {
        (strict && rep.verdict == Verdict::Inconclusive)
            .then(|| Failure::inconclusive("no compactness criterion fired and --strict is set"))
    });
    Ok((artifacts, Outcome { summary, deferred }))
}

pub fn scan_mu(cfg: &RunConfig, cache: &ResultCache) -> Result<(Vec<Artifact>, Outcome), Failure> {
    let w = cfg.weight_model()?;
    let desc = w.describe();
    let d = &cfg.diagnose;
    let subset = (&d.radii, d.samples_per_ring, d.ball_radius, d.eig_tol);
    let key = key_of("scan-mu", &(&cfg.weight, &desc, &cfg.grid, subset, &cfg.output.formats));
    let (artifacts, hit) = cache.get_or_compute(&key, || {
        let grid = cfg.build_grid()?;
        let op = assemble_H(&grid, &w)?;
        let mut radii = d.radii.clone();
        radii.sort_by(f64::total_cmp);
        let prof = mu_profile(&grid, &op, &radii, d.samples_per_ring, d.ball_radius, d.eig_tol)?;
        let mut out = Vec::new();
        if cfg.wants(Format::Dat) {
            out.push(("mu_profile.dat".to_string(), dat(&prof.points, "radius min_mu_hat")));
        }
        out.push(("scan_mu.json".to_string(), envelope("scan-mu", cfg, &desc, &prof)?));
        Ok(out)
    })?;
    let j = json_field(&artifacts, "scan_mu.json").ok_or_else(|| Failure::io("cached scan-mu entry lacks scan_mu.json"))?;
    let prof: MuProfile = serde_json::from_value(j["result"].clone())?;
    let pts: Vec<String> = prof.points.iter().map(|(r, m)| format!("{r}:{m:.4}")).collect();
    let summary = format!(
        "scan-mu: [{}] slope {:.4} increasing={}{}",
        pts.join(" "),
        prof.slope,
        prof.strictly_increasing(),
        if hit { " (cached)" } else { "" }
    );
    Ok((artifacts, Outcome { summary, deferred: None }))
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub generated_at: u64,
    pub tool_version: String,
    /// config hash → command → result
    pub runs: BTreeMap<String, BTreeMap<String, Value>>,
}

fn headline(command: &str, r: &Value) -> String {
    let f = |v: &Value| v.as_f64().map_or("n/a".to_string(), |x| format!("{x:.6}"));
    match command {
        "weights-check" => format!("{} Δφ in [{}, {}]", r["descriptor"]["kind"].as_str().unwrap_or("?"), f(&r["min_laplacian"]), f(&r["max_laplacian"])),
        "eigs" => format!("λ1 = {}, {} pairs, all converged = {}", f(&r["lambdas"][0]), r["k"], r["all_converged"]),
        "solve" => format!("‖u‖²_φ = {}, ortho = {:.2e}", f(&r["weighted_norm_sqr"]), r["ortho_defect"].as_f64().unwrap_or(f64::NAN)),
        "diagnose" => format!("verdict {}", r["verdict"].as_str().unwrap_or("?")),
        "scan-mu" => format!("slope {}", f(&r["slope"])),
        _ => String::new(),
    }
}

/// Merges the JSON artifacts found in `dir` into report.json and report.txt.
pub fn report(dir: &Path) -> Result<(Vec<Artifact>, Outcome), Failure> {
    let mut runs: BTreeMap<String, BTreeMap<String, Value>> = BTreeMap::new();
    let mut absent = Vec::new();
    for (command, file) in ARTIFACTS {
        let path = dir.join(file);
        let Ok(bytes) = std::fs::read(&path) else {
            absent.push(file);
            continue;
        };
        let v: Value = serde_json::from_slice(&bytes)
            .map_err(|e| Failure::io(format!("artifact {} is not valid JSON: {e}", path.display())))?;
        let hash = v["config_hash"].as_str().unwrap_or("unknown").to_string();
        runs.entry(hash).or_default().insert(command.to_string(), v["result"].clone());
    }
    if runs.is_empty() {
        return Err(Failure::missing(format!("no run artifacts in {}; absent: {}", dir.display(), absent.join(", "))));
    }
    let generated_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut text = format!("{:<14} {:<14} {}\n", "config", "command", "result");
    for (hash, cmds) in &runs {
        for (cmd, r) in cmds {
            text.push_str(&format!("{:<14} {:<14} {}\n", &hash[..hash.len().min(12)], cmd, headline(cmd, r)));
        }
    }
    let n_runs = runs.len();
    let n_products: usize = runs.values().map(|c| c.len()).sum();
    let rep = Report { generated_at, tool_version: env!("CARGO_PKG_VERSION").to_string(), runs };
    let mut json = serde_json::to_vec_pretty(&rep)?;
    json.push(b'\n');
    let summary = format!("report: {n_products} products from {n_runs} configuration(s)");
    Ok((vec![("report.json".into(), json), ("report.txt".into(), text.into_bytes())], Outcome { summary, deferred: None }))
}
