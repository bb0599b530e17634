use serde::Serialize;

use super::FormsError;
use crate::rng::{derive_seed, path_rng, tags, PathRng};
use crate::sde::{parallel_map, trace_path, PathStatus, SdeError};
use crate::stats::mean_se;
use crate::systems::DiffusionSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemigroupMcConfig {
    pub t_max: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl SemigroupMcConfig {
    pub fn new(t_max: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        SemigroupMcConfig {
            t_max,
            dt,
            n_paths,
            seed,
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Paths that blew up or tripped a guard and were left out.
    pub dropped: usize,
}

/// Monte Carlo estimate of `∫₀^{T_max} E_μ[(φ(M₀) − φ̄)(ψ(M_t) − ψ̄)] dt`.
///
/// `M₀` is drawn by `sampler`, the driver is integrated by Euler–Maruyama and
/// the time integral by a left-point sum. `φ̄` and `ψ̄ T_max` are the
/// empirical means of `φ(M₀)` and of `∫ψ(M_t)dt` over all paths.
pub fn semigroup_mc_form(
    phi: &(dyn Fn(&[f64]) -> f64 + Sync),
    psi: &(dyn Fn(&[f64]) -> f64 + Sync),
    driver: &DiffusionSpec,
    sampler: &(dyn Fn(&mut PathRng) -> Vec<f64> + Sync),
    cfg: &SemigroupMcConfig,
) -> Result<McEstimate, FormsError> {
    if !(cfg.t_max > 0.0) || !(cfg.dt > 0.0) || cfg.n_paths < 2 {
        return Err(SdeError::InvalidParameter(format!(
            "T_max = {}, dt = {}, n_paths = {}",
            cfg.t_max, cfg.dt, cfg.n_paths
        ))
        .into());
    }
    let sys = driver.ito_system()?;
    let n_steps = ((cfg.t_max / cfg.dt) - 1e-9).ceil() as usize;
    let dt = cfg.t_max / n_steps as f64;
    let seed = derive_seed(cfg.seed, tags::SEMIGROUP_MC);
    let dim = driver.dim();

    let runs = parallel_map(cfg.n_paths, cfg.workers, |i| {
        let mut rng = path_rng(seed, i as u64);
        let m0 = sampler(&mut rng);
        if m0.len() != dim {
            return None;
        }
        let f0 = phi(&m0);
        let mut integral = 0.0;
        let (_, status) = trace_path(&sys, m0, n_steps, dt, &mut rng, |step, m| {
            if step < n_steps {
                integral += psi(m) * dt;
            }
        });
        (status == PathStatus::Completed).then_some((f0, integral))
    });
    let kept: Vec<(f64, f64)> = runs.iter().flatten().copied().collect();
    let dropped = cfg.n_paths - kept.len();
    if kept.len() < 2 {
        return Err(SdeError::InvalidParameter(format!(
            "{dropped} of {} paths dropped",
            cfg.n_paths
        ))
        .into());
    }
    let n = kept.len() as f64;
    let phi_bar = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let int_bar = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let y: Vec<f64> = kept
        .iter()
        .map(|&(f, i)| (f - phi_bar) * (i - int_bar))
        .collect();
    let (value, stderr) = mean_se(&y);
    Ok(McEstimate {
        value,
        stderr,
        n_paths: kept.len(),
        dropped,
    })
}
