//! Itô and Stratonovich path integration with correlated Wiener increments.

mod ensemble;
mod field;
mod system;

pub use ensemble::{
    parallel_map, simulate_ensemble, trace_path, EnsembleConfig, InitialState, PathEnsemble,
    PathStatus,
};
pub(crate) use field::Scratch;
pub use field::{jacobian_step, FieldFn, ScalarField, ScalarFn, VectorField};
pub use system::{ito_to_strat, strat_to_ito, Guard, ItoSystem, SdeSystem, StratonovichSystem};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("non-finite state after step")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Scratch buffers reused across steps of one path.
#[derive(Debug, Clone)]
pub struct Workspace {
    drift: Vec<f64>,
    drift2: Vec<f64>,
    col: Vec<f64>,
    col2: Vec<f64>,
    pred: Vec<f64>,
    cols_at_x: Vec<f64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Workspace {
            drift: vec![0.0; dim],
            drift2: vec![0.0; dim],
            col: vec![0.0; dim],
            col2: vec![0.0; dim],
            pred: vec![0.0; dim],
            cols_at_x: Vec::new(),
        }
    }
}

/// One-step map of a time discretization.
pub trait Scheme: Sync {
    fn system(&self) -> &SdeSystem;

    /// Writes the next state into `out`; `dw` are per-column increments.
    fn step_into(&self, x: &[f64], dt: f64, dw: &[f64], ws: &mut Workspace, out: &mut [f64]);
}

impl Scheme for ItoSystem {
    fn system(&self) -> &SdeSystem {
        self.inner()
    }

    fn step_into(&self, x: &[f64], dt: f64, dw: &[f64], ws: &mut Workspace, out: &mut [f64]) {
        self.drift.eval_into(x, &mut ws.drift);
        for i in 0..self.dim {
            out[i] = x[i] + ws.drift[i] * dt;
        }
        for (c, &w) in self.columns.iter().zip(dw) {
            if w == 0.0 {
                continue;
            }
            c.eval_into(x, &mut ws.col);
            out.iter_mut().zip(&ws.col).for_each(|(o, b)| *o += b * w);
        }
    }
}

impl Scheme for StratonovichSystem {
    fn system(&self) -> &SdeSystem {
        self.inner()
    }

    fn step_into(&self, x: &[f64], dt: f64, dw: &[f64], ws: &mut Workspace, out: &mut [f64]) {
        let d = self.dim;
        ws.cols_at_x.resize(self.columns.len() * d, 0.0);
        self.drift.eval_into(x, &mut ws.drift);
        for i in 0..d {
            ws.pred[i] = x[i] + ws.drift[i] * dt;
        }
        for (k, (c, &w)) in self.columns.iter().zip(dw).enumerate() {
            let col = &mut ws.cols_at_x[k * d..(k + 1) * d];
            c.eval_into(x, col);
            ws.pred
                .iter_mut()
                .zip(col.iter())
                .for_each(|(p, b)| *p += b * w);
        }
        self.drift.eval_into(&ws.pred, &mut ws.drift2);
        for i in 0..d {
            out[i] = x[i] + 0.5 * (ws.drift[i] + ws.drift2[i]) * dt;
        }
        for (k, (c, &w)) in self.columns.iter().zip(dw).enumerate() {
            let col = &ws.cols_at_x[k * d..(k + 1) * d];
            c.eval_into(&ws.pred, &mut ws.col2);
            for i in 0..d {
                out[i] += 0.5 * (col[i] + ws.col2[i]) * w;
            }
        }
    }
}

fn checked_step<S: Scheme>(sys: &S, x: &[f64], dt: f64, dw: &[f64]) -> Result<Vec<f64>, SdeError> {
    let s = sys.system();
    if !(dt > 0.0) {
        return Err(SdeError::InvalidParameter(format!("dt = {dt}")));
    }
    if x.len() != s.dim || dw.len() != s.columns.len() {
        return Err(SdeError::Dimension(format!(
            "state {} / increments {} for dim {} with {} columns",
            x.len(),
            dw.len(),
            s.dim,
            s.columns.len()
        )));
    }
    let mut ws = Workspace::new(s.dim);
    let mut out = vec![0.0; s.dim];
    sys.step_into(x, dt, dw, &mut ws, &mut out);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(SdeError::NonFinite)
    }
}

/// `x + a(x)dt + Σ_k b_k(x)dW_k`.
pub fn euler_maruyama_step(
    sys: &ItoSystem,
    x: &[f64],
    dt: f64,
    dw: &[f64],
) -> Result<Vec<f64>, SdeError> {
    checked_step(sys, x, dt, dw)
}

/// Heun predictor–corrector, consistent with the Stratonovich interpretation.
pub fn heun_stratonovich_step(
    sys: &StratonovichSystem,
    x: &[f64],
    dt: f64,
    dw: &[f64],
) -> Result<Vec<f64>, SdeError> {
    checked_step(sys, x, dt, dw)
}

/// `S·ξ·√dt` with `ξ` i.i.d. standard normal.
pub fn sample_correlated_increments<R: Rng + ?Sized>(
    s: &DMatrix<f64>,
    dt: f64,
    rng: &mut R,
) -> Vec<f64> {
    let sq = dt.sqrt();
    let xi: Vec<f64> = (0..s.ncols())
        .map(|_| rng.sample::<f64, _>(StandardNormal) * sq)
        .collect();
    (0..s.nrows())
        .map(|i| (0..s.ncols()).map(|j| s[(i, j)] * xi[j]).sum())
        .collect()
}
