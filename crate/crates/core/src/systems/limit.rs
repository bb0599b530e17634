use std::sync::Arc;

use super::amplitude::{block_transform, kappa_at, kappa_scaled_column, KAPPA_MIN};
use super::{check_fields, DiffusionSpec, SystemError};
use crate::periodic::CovarianceForm;
use crate::sde::{
    strat_to_ito, ItoSystem, ScalarField, Scratch, SdeSystem, StratonovichSystem, VectorField,
};

/// Scalar factor in front of `Σ_α v_α ∘ dB_α`.
#[derive(Clone, Debug)]
pub enum NoiseGain {
    /// `√2` in the time-scaling limits.
    Constant(f64),
    /// `2/κ(M)`, with `M` simulated alongside `X`.
    InverseKappa {
        driver: DiffusionSpec,
        theta_map: ScalarField,
    },
}

/// `dX = b̄(X)dt + gain · Σ_α v_α(X) ∘ dB_α`, `Cov(B) = cov·t`.
#[derive(Clone, Debug)]
pub struct LimitSystemSpec {
    pub b_bar: VectorField,
    pub v: Vec<VectorField>,
    pub cov: CovarianceForm,
    pub gain: NoiseGain,
}

impl LimitSystemSpec {
    pub fn dim_x(&self) -> usize {
        self.b_bar.dim_out()
    }

    /// `d_X`, plus `d_M` when the gain is coupled to `M`.
    pub fn state_dim(&self) -> usize {
        self.dim_x()
            + match &self.gain {
                NoiseGain::Constant(_) => 0,
                NoiseGain::InverseKappa { driver, .. } => driver.dim(),
            }
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        if self.b_bar.dim_in() != self.dim_x() {
            return Err(SystemError::Dimension("b̄ is not square".into()));
        }
        check_fields(&self.v, self.dim_x())?;
        if self.cov.dim() != self.v.len() {
            return Err(SystemError::Dimension(format!(
                "covariance is {}×{} for {} vector fields",
                self.cov.dim(),
                self.cov.dim(),
                self.v.len()
            )));
        }
        if let NoiseGain::InverseKappa { driver, .. } = &self.gain {
            driver.validate()?;
        }
        Ok(())
    }

    pub fn stratonovich(&self) -> Result<StratonovichSystem, SystemError> {
        self.validate()?;
        let dx = self.dim_x();
        let s = self.cov.sqrt();
        let sys = match &self.gain {
            NoiseGain::Constant(g) => {
                let cols = self.v.iter().map(|v| v.scaled(*g)).collect();
                let mut sys = SdeSystem::new(self.b_bar.clone(), cols);
                if !self.v.is_empty() {
                    sys = sys.with_noise_transform(s.clone());
                }
                sys
            }
            NoiseGain::InverseKappa { driver, theta_map } => {
                let dm = driver.dim();
                let dim = dx + dm;
                let b = self.b_bar.clone();
                let mu = driver.stratonovich_drift();
                let drift = VectorField::new(dim, dim, move |st, out| {
                    let (x, m) = st.split_at(dx);
                    let (ox, om) = out.split_at_mut(dx);
                    b.eval_into(x, ox);
                    mu.eval_into(m, om);
                });
                let mut cols: Vec<VectorField> = self
                    .v
                    .iter()
                    .map(|v| kappa_scaled_column(v.clone(), theta_map.clone(), driver.clone(), dx))
                    .collect();
                for sigma in &driver.sigma {
                    cols.push(embed_m_column(sigma.clone(), dx));
                }
                let t = block_transform(s, driver.noise_dim());
                let drv = Arc::new(driver.clone());
                let th = theta_map.clone();
                SdeSystem::new(drift, cols)
                    .with_noise_transform(t)
                    .with_guard("KappaVanished", move |st| {
                        kappa_at(&th, &drv, &st[dx..]) >= KAPPA_MIN
                    })
            }
        };
        Ok(StratonovichSystem::new(sys)?)
    }

    /// Itô form of [`Self::stratonovich`].
    pub fn ito(&self) -> Result<ItoSystem, SystemError> {
        Ok(strat_to_ito(&self.stratonovich()?))
    }

    /// Initial limit state from the slow state and (if coupled) `m`.
    pub fn state(&self, x: &[f64], m: &[f64]) -> Vec<f64> {
        let mut s = x.to_vec();
        if matches!(self.gain, NoiseGain::InverseKappa { .. }) {
            s.extend_from_slice(m);
        }
        s
    }
}

fn embed_m_column(sigma: VectorField, dx: usize) -> VectorField {
    let dm = sigma.dim_out();
    let dim = dx + dm;
    let s1 = sigma.clone();
    let f = VectorField::new(dim, dim, move |st, out| {
        out[..dx].fill(0.0);
        s1.eval_into(&st[dx..], &mut out[dx..]);
    });
    if !sigma.has_analytic_jacobian() {
        return f;
    }
    f.with_jacobian(move |st, j| {
        j.fill(0.0);
        let mut js = Scratch::zeros(dm * dm);
        sigma.jacobian_into(&st[dx..], &mut js);
        for r in 0..dm {
            for c in 0..dm {
                j[(dx + r) * dim + dx + c] = js[r * dm + c];
            }
        }
    })
}
