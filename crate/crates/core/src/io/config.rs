use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuitmap::{CircuitParams, FreeParam, LjReading, TuneTargets};
use crate::error::{Error, Result};
use crate::meanfield::MeanFieldOptions;
use crate::model::ModelParams;
use crate::phasescan::ScanMethod;
use crate::spectra::{linspace, CutoffPolicy, Sweep};
use crate::spinmap::SpinMapOptions;

/// Full run configuration. Every block is optional in the file; missing keys
/// take the defaults of the corresponding solver and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand the file is meant for; informational, a mismatch is an error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    pub model: ModelParams,
    /// Sweep of the second axis, `var:lo:hi:count` with var `g` or `mu`.
    pub sweep: String,
    /// Hopping grid of the scan, `lo:hi:count`.
    pub t_grid: String,
    pub scan: ScanBlock,
    pub cutoff: CutoffPolicy,
    pub meanfield: MeanFieldOptions,
    pub spinmap: SpinMapOptions,
    pub gapprofile: GapProfileBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Worker threads; all available cores when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Recorded in the metadata; the minimizers are deterministic and do not draw from it.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: None,
            model: ModelParams::default(),
            sweep: "g:0:2:201".to_string(),
            t_grid: "0:0.6:61".to_string(),
            scan: ScanBlock::default(),
            cutoff: CutoffPolicy::default(),
            meanfield: MeanFieldOptions::default(),
            spinmap: SpinMapOptions::default(),
            gapprofile: GapProfileBlock::default(),
            circuit: None,
            output: None,
            workers: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanBlock {
    pub method: ScanMethod,
    /// Bisect the mean-field frontier inside each bracketing grid interval.
    pub refine_frontier: bool,
}

impl Default for ScanBlock {
    fn default() -> Self {
        Self {
            method: ScanMethod::Both,
            refine_frontier: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapProfileBlock {
    /// Excitation gaps reported per coupling value.
    pub levels: usize,
}

impl Default for GapProfileBlock {
    fn default() -> Self {
        Self { levels: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitBlock {
    pub params: CircuitParams,
    #[serde(default)]
    pub reading: LjReading,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneBlock {
    pub free: Vec<FreeParam>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

impl TuneBlock {
    pub fn targets(&self) -> TuneTargets {
        TuneTargets {
            omega: self.omega,
            g: self.g,
        }
    }
}

/// Parses `lo:hi:count` into an evenly spaced grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("grid `{s}` is not of the form lo:hi:count"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count == 0 || !lo.is_finite() || !hi.is_finite() || (count > 1 && !(hi > lo)) {
        return Err(bad());
    }
    Ok(linspace(lo, hi, count))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Reads a TOML file, or JSON when the extension is `.json`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        };
        cfg.map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sweep(&self) -> Result<Sweep> {
        Sweep::parse(&self.sweep)
    }

    pub fn t_values(&self) -> Result<Vec<f64>> {
        let grid = parse_grid(&self.t_grid)?;
        if grid[0] < 0.0 {
            return Err(Error::Config("t grid must be >= 0".into()));
        }
        Ok(grid)
    }

    /// Checks the model, the grids and that every tolerance is positive.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.sweep()?;
        self.t_values()?;
        positive("cutoff.rel_tol", self.cutoff.rel_tol)?;
        if self.cutoff.ceiling == 0 {
            return Err(Error::Config("cutoff.ceiling must be positive".into()));
        }
        if self.cutoff.n_max == Some(0) {
            return Err(Error::Config("cutoff.n_max must be positive".into()));
        }
        positive("meanfield.tol", self.meanfield.tol)?;
        positive("meanfield.psi_epsilon", self.meanfield.psi_epsilon)?;
        if let Some(p) = self.meanfield.psi_max {
            positive("meanfield.psi_max", p)?;
        }
        if self.meanfield.grid < 2 || self.meanfield.max_iter == 0 {
            return Err(Error::Config("meanfield.grid must be >= 2 and max_iter >= 1".into()));
        }
        positive("spinmap.hierarchy", self.spinmap.hierarchy)?;
        positive("spinmap.selection_tol", self.spinmap.selection_tol)?;
        if self.spinmap.states < 3 {
            return Err(Error::Config("spinmap.states must be >= 3".into()));
        }
        if self.gapprofile.levels == 0 {
            return Err(Error::Config("gapprofile.levels must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if let Some(c) = &self.circuit {
            c.params.validate()?;
            if let Some(t) = &c.tune {
                if t.free.is_empty() {
                    return Err(Error::Config("circuit.tune.free is empty".into()));
                }
                if let Some(w) = t.omega {
                    positive("circuit.tune.omega", w)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn misspelt_model_key_is_named() {
        let err = RunConfig::from_toml("[model]\nomga0 = 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("omga0"), "{err}");
        let err = RunConfig::from_json(r#"{"model": {"omga0": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("omga0"), "{err}");
    }

    #[test]
    fn unknown_top_level_key_is_rejected() {
        assert!(RunConfig::from_toml("sweeep = \"g:0:1:3\"\n").is_err());
    }

    #[test]
    fn partial_blocks_keep_defaults() {
        let cfg = RunConfig::from_toml(
            "sweep = \"mu:-0.5:0.5:11\"\n[model]\nn_atoms = 3\ng1 = 0.4\ng2 = 0.4\n[meanfield]\ntol = 1e-7\n",
        )
        .unwrap();
        assert_eq!(cfg.model.n_atoms, 3);
        assert_eq!(cfg.model.z, 2);
        assert_eq!(cfg.meanfield.tol, 1e-7);
        assert_eq!(cfg.meanfield.grid, MeanFieldOptions::default().grid);
        assert_eq!(cfg.sweep().unwrap().grid.len(), 11);
        cfg.validate().unwrap();
    }

    #[test]
    fn circuit_block_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.workers = Some(3);
        cfg.output = Some(PathBuf::from("out/run"));
        cfg.circuit = Some(CircuitBlock {
            params: CircuitParams {
                l1: 1e-9,
                l2: 1.2e-9,
                la: 4.1e-7,
                lb: 4.3e-7,
                ca: 1.6e-10,
                cb: 1.5e-10,
                cg: 1e-15,
                cj: 2e-15,
                d: 0.01,
                xs: 0.003,
                phi0: 2.067_833_848e-15,
                e_charge: 1.602_176_634e-19,
                matrix_element: 1e-16,
                omega0_atom: 3e10,
            },
            reading: LjReading::Deduplicated,
            tune: Some(TuneBlock {
                free: vec![FreeParam::Lb, FreeParam::Xs],
                omega: Some(3e10),
                g: None,
            }),
        });
        let toml = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&toml).unwrap(), cfg);
        let json = cfg.to_json().unwrap();
        assert_eq!(RunConfig::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn non_positive_tolerance_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.meanfield.tol = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.spinmap.selection_tol = -1e-9;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn grids_parse() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:3").is_err());
    }
}
