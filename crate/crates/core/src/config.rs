//! TOML run configuration for the `fastosc` binary.
//!
//! Unknown keys are rejected everywhere. Every section has defaults, so an
//! empty file (or no file) is a valid configuration.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lab::{LadderConfig, Observable};
use crate::periodic::{TrigPoly, TrigPolyRepr};
use crate::systems::{preset, preset_names, InitialPhase, Potential, PresetParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub system: SystemConfig,
    pub simulate: SimulateConfig,
    pub covariance: CovarianceConfig,
    pub form: FormConfig,
    pub converge: ConvergeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out_dir: PathBuf::from("fastosc-out"),
            workers: None,
            system: SystemConfig::default(),
            simulate: SimulateConfig::default(),
            covariance: CovarianceConfig::default(),
            form: FormConfig::default(),
            converge: ConvergeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub preset: String,
    /// Slow initial state; the preset default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub initial_phase: InitialPhase,
    pub params: PresetParams,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            preset: "robot".into(),
            x0: None,
            initial_phase: InitialPhase::default(),
            params: PresetParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Fast,
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub which: Which,
    pub t_end: f64,
    /// Fixed step; when absent `min(c_dt ε², T/100)` for the fast system and
    /// `dt_limit` for the limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub c_dt: f64,
    pub dt_limit: f64,
    pub n_paths: usize,
    pub record_paths: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            which: Which::Fast,
            t_end: 1.0,
            dt: None,
            c_dt: 0.1,
            dt_limit: 1e-3,
            n_paths: 1000,
            record_paths: false,
        }
    }
}

/// A trigonometric driver: `"cos"`, `"sin:3"`, or an inline
/// `{ period, coeffs = [[k, re, im], ...] }` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriverSpec {
    Named(String),
    Inline(TrigPolyRepr),
}

impl DriverSpec {
    pub fn to_trig(&self, period: f64) -> Result<TrigPoly, String> {
        match self {
            DriverSpec::Inline(r) => TrigPoly::try_from(r.clone()).map_err(|e| e.to_string()),
            DriverSpec::Named(s) => {
                let (name, k) = match s.split_once(':') {
                    Some((n, k)) => (
                        n,
                        k.parse::<i64>()
                            .map_err(|_| format!("bad frequency in `{s}`"))?,
                    ),
                    None => (s.as_str(), 1),
                };
                if k <= 0 {
                    return Err(format!("frequency in `{s}` must be positive"));
                }
                match name {
                    "cos" => Ok(TrigPoly::cos(k, period)),
                    "sin" => Ok(TrigPoly::sin(k, period)),
                    _ => Err(format!(
                        "unknown driver `{s}` (expected cos[:k], sin[:k] or an inline table)"
                    )),
                }
            }
        }
    }

    fn label(&self) -> String {
        match self {
            DriverSpec::Named(s) => s.clone(),
            DriverSpec::Inline(_) => "inline".into(),
        }
    }
}

pub fn driver_labels(d: &[DriverSpec]) -> Vec<String> {
    d.iter().map(DriverSpec::label).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceConfig {
    pub drivers: Vec<DriverSpec>,
    pub period: f64,
    /// Use the mean-zero antiderivatives (amplitude-scaling covariance)
    /// instead of the drivers themselves.
    pub antiderivatives: bool,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        CovarianceConfig {
            drivers: vec![
                DriverSpec::Named("cos".into()),
                DriverSpec::Named("sin".into()),
            ],
            period: TAU,
            antiderivatives: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FormMethod {
    OuSeries,
    Ergodic,
    Integrated,
    Mc,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub z_min: f64,
    pub z_max: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            z_min: -8.0,
            z_max: 8.0,
            n: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub t_max: f64,
    pub dt: f64,
    pub n_paths: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            t_max: 20.0,
            dt: 1e-3,
            n_paths: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormConfig {
    pub method: FormMethod,
    /// Single frequency pair for `ou-series`; the driver matrix otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<i64>,
    /// Trigonometric drivers `φ(m)` (period 2π) for the integrated-noise form.
    pub drivers: Vec<DriverSpec>,
    /// Polynomial drivers `φ(z) = Σ c_j z^j` for the ergodic form.
    pub ergodic_drivers: Vec<Vec<f64>>,
    /// Polynomial `ρ(z)` coefficients.
    pub rho: Vec<f64>,
    pub potential: Potential,
    pub grid: GridConfig,
    pub mc: McConfig,
}

impl Default for FormConfig {
    fn default() -> Self {
        FormConfig {
            method: FormMethod::All,
            k: None,
            l: None,
            drivers: vec![DriverSpec::Named("cos".into())],
            ergodic_drivers: vec![vec![0.0, 1.0]],
            rho: vec![0.0, 1.0],
            potential: Potential::Quadratic { c: 1.0 },
            grid: GridConfig::default(),
            mc: McConfig::default(),
        }
    }
}

impl FormConfig {
    /// Whether `ρ(z) = z` and `U = z²/2`, where the closed-form series applies.
    pub fn is_ou_case(&self) -> bool {
        let rho_is_z = self.rho.len() >= 2
            && self.rho[0] == 0.0
            && self.rho[1] == 1.0
            && self.rho[2..].iter().all(|c| *c == 0.0);
        rho_is_z && self.potential == Potential::Quadratic { c: 1.0 }
    }
}

/// `Σ c_j z^j`.
pub fn polynomial(c: &[f64], z: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * z + a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    pub epsilons: Vec<f64>,
    pub t_end: f64,
    pub c_dt: f64,
    pub dt_limit: f64,
    pub n_paths: usize,
    pub observables: Vec<Observable>,
    /// Write each rung's terminal states as CSV.
    pub dump_terminal: bool,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            epsilons: vec![0.4, 0.2, 0.1],
            t_end: 1.0,
            c_dt: 0.1,
            dt_limit: 1e-3,
            n_paths: 10_000,
            observables: vec![Observable::Coordinate(0), Observable::Coordinate(1)],
            dump_terminal: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Parses TOML; the error text carries the line, column and key.
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn ladder(&self) -> LadderConfig {
        let c = &self.converge;
        let mut l = LadderConfig::new(
            c.epsilons.clone(),
            c.t_end,
            c.n_paths,
            self.seed,
            c.observables.clone(),
        )
        .with_workers(self.workers);
        l.c_dt = c.c_dt;
        l.dt_limit = c.dt_limit;
        l.keep_ensembles = c.dump_terminal;
        l
    }

    /// Semantic checks of the sections a subcommand uses.
    pub fn validate(&self, section: Section) -> Result<(), ConfigError> {
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be at least 1"));
        }
        match section {
            Section::Simulate => {
                self.validate_system()?;
                let s = &self.simulate;
                positive("simulate.t_end", s.t_end)?;
                positive("simulate.c_dt", s.c_dt)?;
                positive("simulate.dt_limit", s.dt_limit)?;
                if let Some(dt) = s.dt {
                    positive("simulate.dt", dt)?;
                }
                if s.n_paths == 0 {
                    return Err(invalid("simulate.n_paths", "must be at least 1"));
                }
            }
            Section::Covariance => {
                let c = &self.covariance;
                positive("covariance.period", c.period)?;
                if c.drivers.is_empty() {
                    return Err(invalid("covariance.drivers", "empty"));
                }
                for (i, d) in c.drivers.iter().enumerate() {
                    d.to_trig(c.period)
                        .map_err(|e| invalid(&format!("covariance.drivers[{i}]"), e))?;
                }
            }
            Section::Form => {
                let f = &self.form;
                for (i, d) in f.drivers.iter().enumerate() {
                    let p = d
                        .to_trig(TAU)
                        .map_err(|e| invalid(&format!("form.drivers[{i}]"), e))?;
                    if (p.period() - TAU).abs() > 1e-12 {
                        return Err(invalid(&format!("form.drivers[{i}]"), "period must be 2π"));
                    }
                }
                if f.grid.n < 8 || f.grid.n % 2 != 0 {
                    return Err(invalid("form.grid.n", "must be even and at least 8"));
                }
                if !(f.grid.z_max > f.grid.z_min) {
                    return Err(invalid("form.grid", "z_max must exceed z_min"));
                }
                if f.rho.is_empty() {
                    return Err(invalid("form.rho", "empty polynomial"));
                }
                positive("form.mc.t_max", f.mc.t_max)?;
                positive("form.mc.dt", f.mc.dt)?;
                if f.mc.n_paths < 2 {
                    return Err(invalid("form.mc.n_paths", "must be at least 2"));
                }
                if f.l.is_some() && f.k.is_none() {
                    return Err(invalid("form.l", "given without form.k"));
                }
            }
            Section::Converge => {
                self.validate_system()?;
                self.ladder()
                    .validate()
                    .map_err(|e| invalid("converge", e.to_string()))?;
                positive("converge.dt_limit", self.converge.dt_limit)?;
            }
        }
        Ok(())
    }

    fn validate_system(&self) -> Result<(), ConfigError> {
        if !preset_names().contains(&self.system.preset.as_str()) {
            return Err(invalid(
                "system.preset",
                format!(
                    "unknown preset `{}` (known: {})",
                    self.system.preset,
                    preset_names().join(", ")
                ),
            ));
        }
        let p = preset(&self.system.preset, &self.system.params)
            .map_err(|e| invalid("system.params", e.to_string()))?;
        if let Some(x0) = &self.system.x0 {
            if x0.len() != p.dim_x() {
                return Err(invalid(
                    "system.x0",
                    format!(
                        "has {} entries, preset `{}` has {} slow coordinates",
                        x0.len(),
                        p.name,
                        p.dim_x()
                    ),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Simulate,
    Covariance,
    Form,
    Converge,
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip_through_toml() {
        let mut c = RunConfig::default();
        c.workers = Some(3);
        c.system.x0 = Some(vec![0.1, 0.2]);
        c.covariance.drivers.push(DriverSpec::Inline(TrigPolyRepr {
            period: TAU,
            coeffs: vec![(2, 0.5, 0.0), (-2, 0.5, 0.0)],
        }));
        let text = c.to_toml();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let e = RunConfig::parse("seed = 3\n[converge]\nepsilon = [0.1]\n").unwrap_err();
        assert!(e.contains("epsilon"), "{e}");
        assert!(e.contains("line 3"), "{e}");
        assert!(RunConfig::parse("[system.params]\nbogus = 1\n").is_err());
    }

    #[test]
    fn drivers_parse() {
        let d = |s: &str| DriverSpec::Named(s.into()).to_trig(TAU);
        assert_eq!(d("cos").unwrap(), TrigPoly::cos(1, TAU));
        assert_eq!(d("sin:3").unwrap(), TrigPoly::sin(3, TAU));
        assert!(d("tan").is_err());
        assert!(d("cos:0").is_err());
        let c: RunConfig = RunConfig::parse(
            "[covariance]\ndrivers = [\"cos\", { period = 6.283185307179586, coeffs = [[1, 0.0, -0.5], [-1, 0.0, 0.5]] }]\n",
        )
        .unwrap();
        assert_eq!(
            c.covariance.drivers[1].to_trig(TAU).unwrap(),
            TrigPoly::sin(1, TAU)
        );
    }

    #[test]
    fn semantic_validation_names_the_field() {
        let mut c = RunConfig::default();
        c.converge.epsilons = vec![0.1, 0.2];
        let e = c.validate(Section::Converge).unwrap_err().to_string();
        assert!(e.starts_with("converge"), "{e}");
        let mut c = RunConfig::default();
        c.system.preset = "nope".into();
        let e = c.validate(Section::Simulate).unwrap_err().to_string();
        assert!(e.starts_with("system.preset"), "{e}");
        let mut c = RunConfig::default();
        c.system.x0 = Some(vec![1.0]);
        assert!(c.validate(Section::Simulate).is_err());
        assert!(RunConfig::default().validate(Section::Form).is_ok());
    }

    #[test]
    fn ou_case_detection_and_polynomials() {
        let mut f = FormConfig::default();
        assert!(f.is_ou_case());
        f.rho = vec![0.0, 2.0];
        assert!(!f.is_ou_case());
        assert_eq!(polynomial(&[-0.5, 0.0, 1.0], 2.0), 3.5);
    }
}
