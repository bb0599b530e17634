//! Convergence in law of fast systems to their limits over a ladder of ε.
//!
//! The limit ensemble is simulated once (Heun, fine step) and every rung's
//! fast ensemble is compared with it through observable means, variances,
//! the observable covariance matrix and marginal two-sample KS distances.

mod fit;

pub use fit::{ks_critical, ks_distance, rate_fit, RateFit};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, tags};
use crate::sde::{
    simulate_ensemble, EnsembleConfig, InitialState, ItoSystem, PathEnsemble, SdeError,
    StratonovichSystem,
};
use crate::stats::{combined_se, covariance_with_se, mean_se, variance_se};
use crate::systems::SystemError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("empty sample")]
    EmptySample,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid ladder configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Scalar functional of the slow coordinates `x`.
///
/// Text forms: `x1` (1-based coordinate), `radius`, `x1^3`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Observable {
    Coordinate(usize),
    Radius,
    Moment { coord: usize, power: u32 },
}

impl Observable {
    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Observable::Coordinate(i) => x[i],
            Observable::Radius => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Observable::Moment { coord, power } => x[coord].powi(power as i32),
        }
    }

    fn max_coord(&self) -> Option<usize> {
        match *self {
            Observable::Coordinate(i) | Observable::Moment { coord: i, .. } => Some(i),
            Observable::Radius => None,
        }
    }

    /// Coordinates `x1..x_d`.
    pub fn coordinates(d: usize) -> Vec<Observable> {
        (0..d).map(Observable::Coordinate).collect()
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Coordinate(i) => write!(f, "x{}", i + 1),
            Observable::Radius => write!(f, "radius"),
            Observable::Moment { coord, power } => write!(f, "x{}^{power}", coord + 1),
        }
    }
}

impl FromStr for Observable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "radius" {
            return Ok(Observable::Radius);
        }
        let bad = || format!("unknown observable `{s}` (expected x<i>, x<i>^<p> or radius)");
        let rest = s.strip_prefix('x').ok_or_else(bad)?;
        let (idx, power) = match rest.split_once('^') {
            Some((i, p)) => (i, Some(p.parse::<u32>().map_err(|_| bad())?)),
            None => (rest, None),
        };
        let i: usize = idx.parse().map_err(|_| bad())?;
        if i == 0 {
            return Err(bad());
        }
        Ok(match power {
            None | Some(1) => Observable::Coordinate(i - 1),
            Some(p) => Observable::Moment {
                coord: i - 1,
                power: p,
            },
        })
    }
}

impl TryFrom<String> for Observable {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Observable> for String {
    fn from(o: Observable) -> String {
        o.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderConfig {
    pub epsilons: Vec<f64>,
    pub t_end: f64,
    pub c_dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub observables: Vec<Observable>,
    /// Step of the Heun limit ensemble.
    pub dt_limit: f64,
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Keep each rung's ensemble in the report for dumping.
    #[serde(skip)]
    pub keep_ensembles: bool,
}

impl LadderConfig {
    pub fn new(
        epsilons: Vec<f64>,
        t_end: f64,
        n_paths: usize,
        seed: u64,
        observables: Vec<Observable>,
    ) -> Self {
        LadderConfig {
            epsilons,
            t_end,
            c_dt: 0.1,
            n_paths,
            seed,
            observables,
            dt_limit: 1e-3,
            workers: None,
            keep_ensembles: false,
        }
    }

    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    /// `min(c_dt ε², T/100)`.
    pub fn rung_dt(&self, epsilon: f64) -> f64 {
        (self.c_dt * epsilon * epsilon).min(self.t_end / 100.0)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::InvalidConfig(m));
        if self.epsilons.is_empty() {
            return bad("empty ε list".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return bad(format!("ε = {e} outside (0, 1]"));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("ε list must be strictly decreasing".into());
        }
        if !(self.t_end > 0.0) || !(self.c_dt > 0.0) || !(self.dt_limit > 0.0) {
            return bad(format!(
                "T = {}, c_dt = {}, dt_limit = {}",
                self.t_end, self.c_dt, self.dt_limit
            ));
        }
        if self.n_paths < 2 {
            return bad("n_paths must be at least 2".into());
        }
        if self.observables.is_empty() {
            return bad("no observables".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableStats {
    pub observable: String,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub observable: String,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub ks: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub dt: f64,
    pub n_steps: usize,
    pub n_completed: usize,
    pub blow_up_fraction: f64,
    pub flagged_fraction: f64,
    pub observables: Vec<ObservableStats>,
    pub covariance: Vec<Vec<f64>>,
    pub covariance_se: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RungReport {
    pub epsilon: f64,
    /// `None` when more than half of the paths were dropped.
    pub summary: Option<EnsembleSummary>,
    pub drop_rate: f64,
    pub aborted: bool,
    pub discrepancies: Vec<Discrepancy>,
    /// `‖C_ε − C_0‖_F / ‖C_0‖_F` for the observable covariance.
    pub relative_covariance_discrepancy: f64,
    #[serde(skip)]
    pub ensemble: Option<PathEnsemble>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeEntry {
    pub observable: String,
    pub stat: String,
    pub fit: Option<RateFit>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub config: LadderConfig,
    pub ks_critical_1pct: f64,
    pub limit: EnsembleSummary,
    pub rungs: Vec<RungReport>,
    pub slopes: Vec<SlopeEntry>,
}

/// Result of the "non-increasing within slack" check on one discrepancy
/// sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneCheck {
    pub observable: String,
    pub stat: String,
    pub values: Vec<f64>,
    pub passes: bool,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    epsilon: f64,
    observable: &'a str,
    stat: &'a str,
    value: f64,
    stderr: f64,
}

impl EnsembleReport {
    pub fn completed_rungs(&self) -> impl Iterator<Item = &RungReport> {
        self.rungs.iter().filter(|r| !r.aborted)
    }

    /// Whether each mean/variance discrepancy satisfies
    /// `d_{r+1} ≤ d_r + slack · √(se_r² + se_{r+1}²)` over completed rungs.
    pub fn monotone_checks(&self, slack: f64) -> Vec<MonotoneCheck> {
        let rungs: Vec<&RungReport> = self.completed_rungs().collect();
        let mut out = Vec::new();
        for (j, o) in self.config.observables.iter().enumerate() {
            for stat in ["mean", "variance"] {
                let pick = |r: &RungReport| {
                    let d = &r.discrepancies[j];
                    if stat == "mean" {
                        (d.mean, d.mean_se)
                    } else {
                        (d.variance, d.variance_se)
                    }
                };
                let seq: Vec<(f64, f64)> = rungs.iter().map(|r| pick(r)).collect();
                let passes = seq
                    .windows(2)
                    .all(|w| w[1].0 <= w[0].0 + slack * combined_se(w[0].1, w[1].1));
                out.push(MonotoneCheck {
                    observable: o.name(),
                    stat: stat.into(),
                    values: seq.iter().map(|s| s.0).collect(),
                    passes,
                });
            }
        }
        out
    }

    /// CSV `epsilon,observable,stat,value,stderr`. Limit rows use `epsilon = 0`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        summary_rows(&mut wr, 0.0, &self.config.observables, &self.limit)?;
        for r in &self.rungs {
            let e = r.epsilon;
            wr.serialize(CsvRow {
                epsilon: e,
                observable: "all",
                stat: "drop_rate",
                value: r.drop_rate,
                stderr: 0.0,
            })?;
            let Some(s) = &r.summary else {
                wr.serialize(CsvRow {
                    epsilon: e,
                    observable: "all",
                    stat: "aborted",
                    value: 1.0,
                    stderr: 0.0,
                })?;
                continue;
            };
            summary_rows(&mut wr, e, &self.config.observables, s)?;
            for d in &r.discrepancies {
                let o = d.observable.as_str();
                wr.serialize(CsvRow {
                    epsilon: e,
                    observable: o,
                    stat: "mean_discrepancy",
                    value: d.mean,
                    stderr: d.mean_se,
                })?;
                wr.serialize(CsvRow {
                    epsilon: e,
                    observable: o,
                    stat: "variance_discrepancy",
                    value: d.variance,
                    stderr: d.variance_se,
                })?;
                wr.serialize(CsvRow {
                    epsilon: e,
                    observable: o,
                    stat: "ks",
                    value: d.ks,
                    stderr: 0.0,
                })?;
            }
            wr.serialize(CsvRow {
                epsilon: e,
                observable: "all",
                stat: "relative_covariance_discrepancy",
                value: r.relative_covariance_discrepancy,
                stderr: 0.0,
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn summary_rows<W: Write>(
    wr: &mut csv::Writer<W>,
    epsilon: f64,
    observables: &[Observable],
    s: &EnsembleSummary,
) -> csv::Result<()> {
    for o in &s.observables {
        let name = o.observable.as_str();
        wr.serialize(CsvRow {
            epsilon,
            observable: name,
            stat: "mean",
            value: o.mean,
            stderr: o.mean_se,
        })?;
        wr.serialize(CsvRow {
            epsilon,
            observable: name,
            stat: "variance",
            value: o.variance,
            stderr: o.variance_se,
        })?;
    }
    for i in 0..observables.len() {
        for j in i + 1..observables.len() {
            let name = format!("{},{}", observables[i], observables[j]);
            wr.serialize(CsvRow {
                epsilon,
                observable: &name,
                stat: "covariance",
                value: s.covariance[i][j],
                stderr: s.covariance_se[i][j],
            })?;
        }
    }
    wr.serialize(CsvRow {
        epsilon,
        observable: "all",
        stat: "blow_up_fraction",
        value: s.blow_up_fraction,
        stderr: 0.0,
    })
}

struct Sampled {
    summary: EnsembleSummary,
    /// `values[j]` holds observable `j` on every completed path.
    values: Vec<Vec<f64>>,
    cov: DMatrix<f64>,
}

fn summarize(ens: &PathEnsemble, observables: &[Observable], d_x: usize) -> Sampled {
    let rows: Vec<Vec<f64>> = ens
        .completed()
        .map(|(_, x)| observables.iter().map(|o| o.eval(&x[..d_x])).collect())
        .collect();
    let values: Vec<Vec<f64>> = (0..observables.len())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let stats = observables
        .iter()
        .zip(&values)
        .map(|(o, v)| {
            let (mean, mse) = mean_se(v);
            let (var, vse) = variance_se(v);
            ObservableStats {
                observable: o.name(),
                mean,
                mean_se: mse,
                variance: var,
                variance_se: vse,
            }
        })
        .collect();
    let (cov, cse) = covariance_with_se(&rows);
    let to_rows = |m: &DMatrix<f64>| {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    };
    Sampled {
        summary: EnsembleSummary {
            dt: ens.dt,
            n_steps: ens.n_steps,
            n_completed: rows.len(),
            blow_up_fraction: ens.blow_ups() as f64 / ens.n_paths as f64,
            flagged_fraction: ens.flagged() as f64 / ens.n_paths as f64,
            observables: stats,
            covariance: to_rows(&cov),
            covariance_se: to_rows(&cse),
        },
        values,
        cov,
    }
}

pub type FastBuilder<'a> = dyn Fn(f64) -> Result<(ItoSystem, InitialState), LabError> + Sync + 'a;

/// Runs the ladder. `fast_builder(ε)` returns the fast system (Euler–Maruyama)
/// and its initial state; observables read the first `d_x` coordinates of
/// both fast and limit states.
pub fn run_ladder(
    fast_builder: &FastBuilder<'_>,
    limit: &StratonovichSystem,
    limit_init: &InitialState,
    d_x: usize,
    cfg: &LadderConfig,
) -> Result<EnsembleReport, LabError> {
    cfg.validate()?;
    if let Some(i) = cfg
        .observables
        .iter()
        .filter_map(Observable::max_coord)
        .max()
    {
        if i >= d_x {
            return Err(LabError::InvalidConfig(format!(
                "observable x{} but d_x = {d_x}",
                i + 1
            )));
        }
    }
    if limit.dim < d_x {
        return Err(LabError::InvalidConfig(format!(
            "limit dim {} < d_x = {d_x}",
            limit.dim
        )));
    }
    let obs = &cfg.observables;
    let limit_cfg = EnsembleConfig::new(
        cfg.t_end,
        cfg.dt_limit,
        cfg.n_paths,
        derive_seed(cfg.seed, tags::LIMIT_ENSEMBLE),
    )
    .with_workers(cfg.workers);
    let limit_ens = simulate_ensemble(limit, limit_init, &limit_cfg)?;
    if limit_ens.drop_rate() > 0.5 {
        return Err(LabError::InvalidConfig(format!(
            "limit ensemble dropped {:.1}% of paths",
            100.0 * limit_ens.drop_rate()
        )));
    }
    let lim = summarize(&limit_ens, obs, d_x);
    let lim_norm = lim.cov.norm();

    let mut rungs = Vec::with_capacity(cfg.epsilons.len());
    for (r, &eps) in cfg.epsilons.iter().enumerate() {
        let (sys, init) = fast_builder(eps)?;
        if sys.dim < d_x {
            return Err(LabError::InvalidConfig(format!(
                "fast dim {} < d_x = {d_x}",
                sys.dim
            )));
        }
        let ecfg = EnsembleConfig::new(
            cfg.t_end,
            cfg.rung_dt(eps),
            cfg.n_paths,
            derive_seed(cfg.seed, tags::RUNG_BASE + r as u64),
        )
        .with_workers(cfg.workers);
        let ens = simulate_ensemble(&sys, &init, &ecfg)?;
        let drop_rate = ens.drop_rate();
        if drop_rate > 0.5 {
            rungs.push(RungReport {
                epsilon: eps,
                summary: None,
                drop_rate,
                aborted: true,
                discrepancies: vec![],
                relative_covariance_discrepancy: f64::NAN,
                ensemble: cfg.keep_ensembles.then_some(ens),
            });
            continue;
        }
        let fast = summarize(&ens, obs, d_x);
        let discrepancies = (0..obs.len())
            .map(|j| {
                let (a, b) = (&fast.summary.observables[j], &lim.summary.observables[j]);
                Ok(Discrepancy {
                    observable: a.observable.clone(),
                    mean: (a.mean - b.mean).abs(),
                    mean_se: combined_se(a.mean_se, b.mean_se),
                    variance: (a.variance - b.variance).abs(),
                    variance_se: combined_se(a.variance_se, b.variance_se),
                    ks: ks_distance(&fast.values[j], &lim.values[j])?,
                })
            })
            .collect::<Result<Vec<_>, LabError>>()?;
        let rel = if lim_norm > 0.0 {
            (&fast.cov - &lim.cov).norm() / lim_norm
        } else {
            (&fast.cov - &lim.cov).norm()
        };
        rungs.push(RungReport {
            epsilon: eps,
            summary: Some(fast.summary),
            drop_rate,
            aborted: false,
            discrepancies,
            relative_covariance_discrepancy: rel,
            ensemble: cfg.keep_ensembles.then_some(ens),
        });
    }

    let done: Vec<&RungReport> = rungs.iter().filter(|r| !r.aborted).collect();
    let eps: Vec<f64> = done.iter().map(|r| r.epsilon).collect();
    let mut slopes = Vec::new();
    for (j, o) in obs.iter().enumerate() {
        for stat in ["mean", "variance"] {
            let errs: Vec<f64> = done
                .iter()
                .map(|r| {
                    let d = &r.discrepancies[j];
                    if stat == "mean" {
                        d.mean
                    } else {
                        d.variance
                    }
                })
                .collect();
            let (fit, note) = match rate_fit(&errs, &eps) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            slopes.push(SlopeEntry {
                observable: o.name(),
                stat: stat.into(),
                fit,
                note,
            });
        }
    }

    Ok(EnsembleReport {
        config: cfg.clone(),
        ks_critical_1pct: ks_critical(cfg.n_paths, cfg.n_paths, 0.01),
        limit: lim.summary,
        rungs,
        slopes,
    })
}
