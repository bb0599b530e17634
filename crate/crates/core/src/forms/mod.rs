//! Bilinear forms giving the covariance of the limiting Wiener driver.
//!
//! * [`form_ergodic_1d`]: `⟨φ,ψ⟩_M` for `dM = −U'(M)dt + dW`, by a
//!   finite-difference solve of the Schrödinger-type operator
//!   `H = −½∂² + ½(U'² − U'')` on a [`SchrodingerGrid1D`].
//! * [`solve_gk`] / [`form_integrated`]: the integrated-noise form
//!   `−Σ_k conj(φ̂₁(k)) φ̂₂(k) ḡ_k`.
//! * [`ou_integrated_form`]: the closed-form series for `ρ(z) = z`, `U = z²/2`.
//! * [`semigroup_mc_form`]: Monte Carlo estimate of `∫₀^∞ E_μ[φ(M₀)ψ(M_t)]dt`.

mod ergodic;
mod gk;
mod grid;
mod mc;
mod ou;

pub use ergodic::{form_ergodic_1d, form_ergodic_values, ErgodicForm};
pub use gk::{form_integrated, integrated_covariance, solve_gk, GkSolution, GkTable};
pub use grid::{SchrodingerGrid1D, GROUND_STATE_TOL};
pub use mc::{semigroup_mc_form, McEstimate, SemigroupMcConfig};
pub use ou::{ou_closed_form_k1, ou_form_matrix, ou_integrated_form, OU_SERIES_MAX_TERMS};

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::periodic::{gram_matrix, CovarianceForm, PeriodicError, TrigPoly};
use crate::sde::SdeError;
use crate::systems::SystemError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormsError {
    #[error(transparent)]
    Periodic(#[from] PeriodicError),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("grid too coarse: ground-state residual {residual:e} exceeds {tolerance:e}")]
    GridTooCoarse { residual: f64, tolerance: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("solve did not produce a finite result: {0}")]
    NotConverged(String),
    #[error("singular system solving for g_{k}")]
    SolverSingular { k: i64 },
    #[error("frequency {0} missing from the g_k table")]
    MissingFrequency(i64),
}

/// Amplitude-scaling covariance of the motivating case `(1/ε)φ(W/ε)`:
/// the Gram matrix of the mean-zero antiderivatives.
pub fn amplitude_wiener_special_case(phi: &[TrigPoly]) -> Result<CovarianceForm, PeriodicError> {
    let anti = phi
        .iter()
        .map(|p| p.antiderivative_mean_zero())
        .collect::<Result<Vec<_>, _>>()?;
    gram_matrix(&anti)
}

/// One `alpha,beta,value,method,stderr` output row (1-based indices).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormRow {
    pub alpha: usize,
    pub beta: usize,
    pub value: f64,
    pub method: String,
    pub stderr: f64,
}

pub fn write_form_csv<W: Write>(rows: &[FormRow], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wr.write_record(["alpha", "beta", "value", "method", "stderr"])?;
    }
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn quad_gram(phis: &[TrigPoly]) -> Vec<f64> {
        let n = 10_000;
        let anti: Vec<TrigPoly> = phis
            .iter()
            .map(|p| p.antiderivative_mean_zero().unwrap())
            .collect();
        let mut out = vec![];
        for a in &anti {
            for b in &anti {
                out.push(
                    (0..n)
                        .map(|j| {
                            let t = TAU * j as f64 / n as f64;
                            a.eval(t) * b.eval(t)
                        })
                        .sum::<f64>()
                        / n as f64,
                );
            }
        }
        out
    }

    #[test]
    fn special_case_matches_quadrature() {
        for phis in [
            vec![TrigPoly::cos(1, TAU)],
            vec![TrigPoly::cos(1, TAU), TrigPoly::sin(1, TAU)],
            vec![TrigPoly::cos(2, TAU)],
        ] {
            let c = amplitude_wiener_special_case(&phis).unwrap();
            let q = quad_gram(&phis);
            for (x, y) in c.matrix().iter().zip(q.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let c = amplitude_wiener_special_case(&[TrigPoly::cos(2, TAU)]).unwrap();
        assert!((c.matrix()[(0, 0)] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn csv_rows() {
        let rows = vec![FormRow {
            alpha: 1,
            beta: 1,
            value: 0.5,
            method: "ergodic".into(),
            stderr: 0.0,
        }];
        let mut buf = Vec::new();
        write_form_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "alpha,beta,value,method,stderr\n1,1,0.5,ergodic,0.0\n"
        );
    }
}
