//! Run configuration: strict TOML plus `--section.key=value` overrides.

use std::path::{Path, PathBuf};

use dbarlab::compactness::ClassifyParams;
use dbarlab::weights::TabulatedWeight;
use dbarlab::{build_grid, Grid2D, Shape, WeightModel};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Monomial,
    Fock,
    Tabulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub kind: WeightKind,
    pub m: f64,
    pub table_path: Option<PathBuf>,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { kind: WeightKind::Fock, m: 2.0, table_path: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "R")]
    pub r: f64,
    pub h: f64,
    pub shape: Shape,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { r: 6.0, h: 0.1, shape: Shape::Square }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Built-in name ("one", "zbar", "gaussian") or a CSV path with x,y,re,im.
    pub source: String,
    pub ortho_degree: usize,
    pub minimality_trials: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 20_000, source: "one".into(), ortho_degree: 10, minimality_trials: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigsConfig {
    pub k: usize,
    pub tol: f64,
    pub max_restarts: usize,
    /// Window reported by the cluster count.
    pub center: f64,
    pub halfwidth: f64,
}

impl Default for EigsConfig {
    fn default() -> Self {
        Self { k: 40, tol: 1e-8, max_restarts: 10, center: 2.0, halfwidth: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub radii: Vec<f64>,
    pub samples_per_ring: usize,
    pub ball_radius: f64,
    pub eps_flat: f64,
    pub laplacian_ratio: f64,
    pub laplacian_floor: f64,
    pub growth_ratio: f64,
    pub mu_slope: f64,
    pub degeneracy_radii: Vec<f64>,
    pub degeneracy_k: usize,
    pub halfwidth: f64,
    pub max_flux: f64,
    pub eig_tol: f64,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        let p = ClassifyParams::default();
        Self {
            radii: p.radii,
            samples_per_ring: p.samples_per_ring,
            ball_radius: p.ball_radius,
            eps_flat: p.eps_flat,
            laplacian_ratio: p.laplacian_ratio,
            laplacian_floor: p.laplacian_floor,
            growth_ratio: p.growth_ratio,
            mu_slope: p.mu_slope,
            degeneracy_radii: p.degeneracy_radii,
            degeneracy_k: p.degeneracy_k,
            halfwidth: p.halfwidth,
            max_flux: p.max_flux,
            eig_tol: p.eig_tol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Dat,
    Mtx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), formats: vec![Format::Csv, Format::Json, Format::Dat] }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub weight: WeightConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub eigs: EigsConfig,
    pub diagnose: DiagnoseConfig,
    pub output: OutputConfig,
}

/// Parses `value` as a TOML scalar or array, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<(), Failure> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Failure::config(format!("malformed override key '{key}'")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Failure::config(format!("override '{key}' descends into non-table '{p}'")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(value));
    Ok(())
}

impl RunConfig {
    /// Reads the optional config file, applies overrides in order, then
    /// validates. Nothing is computed or written before this succeeds.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, Failure> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::config(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Failure::config(format!("malformed config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Failure::config(format!("invalid config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Failure::config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("grid.R", self.grid.r)?;
        positive("grid.h", self.grid.h)?;
        positive("solver.tol", self.solver.tol)?;
        positive("eigs.tol", self.eigs.tol)?;
        positive("eigs.halfwidth", self.eigs.halfwidth)?;
        positive("diagnose.ball_radius", self.diagnose.ball_radius)?;
        positive("diagnose.eps_flat", self.diagnose.eps_flat)?;
        positive("diagnose.halfwidth", self.diagnose.halfwidth)?;
        positive("diagnose.max_flux", self.diagnose.max_flux)?;
        positive("diagnose.eig_tol", self.diagnose.eig_tol)?;
        if self.solver.max_iter == 0 {
            return Err(Failure::config("solver.max_iter must be positive"));
        }
        if self.eigs.k == 0 {
            return Err(Failure::config("eigs.k must be positive"));
        }
        if self.diagnose.samples_per_ring == 0 || self.diagnose.degeneracy_k == 0 {
            return Err(Failure::config("diagnose sample counts must be positive"));
        }
        if self.diagnose.radii.iter().chain(&self.diagnose.degeneracy_radii).any(|r| !(*r >= 0.0)) {
            return Err(Failure::config("diagnose radii must be non-negative"));
        }
        match self.weight.kind {
            WeightKind::Monomial if !(self.weight.m >= 2.0) => {
                Err(Failure::config(format!("weight.m must be at least 2, got {}", self.weight.m)))
            }
            WeightKind::Tabulated if self.weight.table_path.is_none() => {
                Err(Failure::config("tabulated weight needs weight.table_path"))
            }
            _ => Ok(()),
        }
    }

    pub fn weight_model(&self) -> Result<WeightModel, Failure> {
        Ok(match self.weight.kind {
            WeightKind::Fock => WeightModel::fock(),
            WeightKind::Monomial => WeightModel::monomial(self.weight.m)?,
            WeightKind::Tabulated => {
                let path = self.weight.table_path.as_ref().expect("validated");
                WeightModel::tabulated(TabulatedWeight::from_csv(path)?)
            }
        })
    }

    pub fn build_grid(&self) -> Result<Grid2D, Failure> {
        Ok(build_grid(self.grid.r, self.grid.h, self.grid.shape)?)
    }

    pub fn classify_params(&self) -> ClassifyParams {
        let d = &self.diagnose;
        ClassifyParams {
            radii: d.radii.clone(),
            samples_per_ring: d.samples_per_ring,
            ball_radius: d.ball_radius,
            eps_flat: d.eps_flat,
            laplacian_ratio: d.laplacian_ratio,
            laplacian_floor: d.laplacian_floor,
            growth_ratio: d.growth_ratio,
            mu_slope: d.mu_slope,
            degeneracy_radii: d.degeneracy_radii.clone(),
            degeneracy_k: d.degeneracy_k,
            halfwidth: d.halfwidth,
            max_flux: d.max_flux,
            eig_tol: d.eig_tol,
            seed: self.seed,
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(k: &str, v: &str) -> (String, String) {
        (k.to_string(), v.to_string())
    }

    #[test]
    fn defaults_validate() {
        let c = RunConfig::load(None, &[]).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.grid.r, 6.0);
    }

    #[test]
    fn overrides_win_and_parse_types() {
        let c = RunConfig::load(
            None,
            &[ov("grid.R", "8"), ov("grid.shape", "disk"), ov("diagnose.radii", "[1.0, 2.5]"), ov("weight.kind", "monomial"), ov("weight.m", "4")],
        )
        .unwrap();
        assert_eq!(c.grid.r, 8.0);
        assert_eq!(c.grid.shape, Shape::Disk);
        assert_eq!(c.diagnose.radii, vec![1.0, 2.5]);
        assert_eq!(c.weight.m, 4.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::load(None, &[ov("grid.radius", "3")]).is_err());
        assert!(RunConfig::load(None, &[ov("bogus.x", "1")]).is_err());
    }

    #[test]
    fn nonpositive_rejected() {
        assert!(RunConfig::load(None, &[ov("grid.h", "0")]).is_err());
        assert!(RunConfig::load(None, &[ov("weight.kind", "monomial"), ov("weight.m", "1.5")]).is_err());
    }
}
