//! Fast multiscale systems and their limiting Stratonovich systems.
//!
//! Three regimes are assembled from the same ingredients: amplitude scaling
//! (driver evaluated at `ϑ(M)/ε`), ergodic time scaling (driver evaluated at
//! `M(t/ε²)`) and time scaling by an integrated process `M = ∫ρ(Z)`.

mod amplitude;
mod expr;
mod limit;
mod potential;
mod presets;
mod time;

pub use amplitude::{
    build_amplitude_fast, build_amplitude_limit, kappa, AmplitudeScalingSpec, KAPPA_MIN,
};
pub use expr::SpeedFunction;
pub use limit::{LimitSystemSpec, NoiseGain};
pub use potential::{validate_potential, Potential, PotentialReport};
pub use presets::{
    preset, preset_names, printed_mips_limit, printed_robot_limit, InitialPhase, Preset,
    PresetParams, PresetSystem,
};
pub use time::{
    build_integrated_limit, build_integrated_noise_fast, build_time_fast, build_time_limit,
    IntegratedNoiseSpec, TimeScalingSpec,
};

use std::f64::consts::TAU;

use thiserror::Error;

use crate::periodic::{average_over_period, PeriodicError, TrigPoly};
use crate::sde::{ItoSystem, ScalarField, Scratch, SdeError, SdeSystem, VectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error(transparent)]
    Periodic(#[from] PeriodicError),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("potential fails validation: {0}")]
    PotentialInvalid(String),
    #[error("unknown preset `{0}` (known: robot, mips, ou_integrated)")]
    UnknownPreset(String),
}

/// Driving diffusion `dM = μ(M)dt + Σ_k σ_k(M) dW_k` (Itô).
#[derive(Clone, Debug)]
pub struct DiffusionSpec {
    pub mu: VectorField,
    pub sigma: Vec<VectorField>,
}

impl DiffusionSpec {
    pub fn new(mu: VectorField, sigma: Vec<VectorField>) -> Self {
        DiffusionSpec { mu, sigma }
    }

    /// `M = W` in `R^d`.
    pub fn standard_wiener(d: usize) -> Self {
        DiffusionSpec::new(VectorField::zero(d, d), unit_columns(d))
    }

    /// `dM = −∇U(M)dt + dW`.
    pub fn gradient(u: &ScalarField) -> Self {
        let d = u.dim();
        let u2 = u.clone();
        let u3 = u.clone();
        let mu = VectorField::new(d, d, move |m, out| {
            u2.gradient_into(m, out);
            out.iter_mut().for_each(|o| *o = -*o);
        })
        .with_jacobian(move |m, j| {
            u3.hessian_into(m, j);
            j.iter_mut().for_each(|o| *o = -*o);
        });
        DiffusionSpec::new(mu, unit_columns(d))
    }

    /// `dM = −M dt + dW` in `R^d`.
    pub fn ornstein_uhlenbeck(d: usize) -> Self {
        DiffusionSpec::new(
            VectorField::linear(-nalgebra::DMatrix::identity(d, d)),
            unit_columns(d),
        )
    }

    pub fn dim(&self) -> usize {
        self.mu.dim_out()
    }

    pub fn noise_dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        let d = self.dim();
        if self.mu.dim_in() != d {
            return Err(SystemError::Dimension(format!(
                "driver drift maps {}→{d}",
                self.mu.dim_in()
            )));
        }
        for (k, s) in self.sigma.iter().enumerate() {
            if s.dim_in() != d || s.dim_out() != d {
                return Err(SystemError::Dimension(format!(
                    "driver column {k} is not {d}→{d}"
                )));
            }
        }
        Ok(())
    }

    pub fn ito_system(&self) -> Result<ItoSystem, SystemError> {
        self.validate()?;
        Ok(ItoSystem::new(SdeSystem::new(
            self.mu.clone(),
            self.sigma.clone(),
        ))?)
    }

    /// Drift of the same process written in Stratonovich form,
    /// `μ − ½ Σ_k (∇σ_k) σ_k`.
    pub fn stratonovich_drift(&self) -> VectorField {
        let sys = SdeSystem::new(self.mu.clone(), self.sigma.clone());
        let d = self.dim();
        VectorField::new(d, d, move |m, out| {
            sys.drift.eval_into(m, out);
            let mut c = vec![0.0; d];
            sys.stratonovich_correction(m, &mut c);
            out.iter_mut().zip(&c).for_each(|(o, c)| *o -= c);
        })
    }
}

fn unit_columns(d: usize) -> Vec<VectorField> {
    (0..d)
        .map(|k| {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            VectorField::constant(d, e)
        })
        .collect()
}

/// `b(x, θ) = b₀(x) + Σ_j b_j(x) ψ_j(θ)` with trigonometric `ψ_j`.
#[derive(Clone, Debug)]
pub struct TrigDrift {
    base: VectorField,
    terms: Vec<(VectorField, TrigPoly)>,
}

impl TrigDrift {
    pub fn new(base: VectorField) -> Self {
        TrigDrift {
            base,
            terms: Vec::new(),
        }
    }

    pub fn zero(d: usize) -> Self {
        TrigDrift::new(VectorField::zero(d, d))
    }

    pub fn with_term(mut self, field: VectorField, psi: TrigPoly) -> Result<Self, SystemError> {
        if !psi.is_real() {
            return Err(PeriodicError::NotReal.into());
        }
        if field.dim_in() != self.dim() || field.dim_out() != self.dim() {
            return Err(SystemError::Dimension(format!(
                "drift term maps {}→{}, expected {d}→{d}",
                field.dim_in(),
                field.dim_out(),
                d = self.dim()
            )));
        }
        self.terms.push((field, psi));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.base.dim_out()
    }

    pub fn base(&self) -> &VectorField {
        &self.base
    }

    pub fn terms(&self) -> &[(VectorField, TrigPoly)] {
        &self.terms
    }

    pub fn check_period(&self, period: f64) -> Result<(), SystemError> {
        for (_, p) in &self.terms {
            if (p.period() - period).abs() > 1e-12 * period {
                return Err(PeriodicError::PeriodMismatch(period, p.period()).into());
            }
        }
        Ok(())
    }

    pub fn eval_into(&self, x: &[f64], theta: f64, out: &mut [f64]) {
        self.base.eval_into(x, out);
        if self.terms.is_empty() {
            return;
        }
        let mut tmp = Scratch::zeros(out.len());
        for (f, p) in &self.terms {
            let c = p.eval(theta);
            if c != 0.0 {
                f.eval_into(x, &mut tmp);
                out.iter_mut()
                    .zip(tmp.iter())
                    .for_each(|(o, t)| *o += c * t);
            }
        }
    }

    /// `b̄(x) = (1/P)∫ b(x, θ)dθ`; each `ψ_j` is averaged on a grid fine
    /// enough to be exact for its degree.
    pub fn average(&self) -> VectorField {
        let mut weights = vec![1.0];
        let mut fields = vec![self.base.clone()];
        for (f, p) in &self.terms {
            let n = 2 * p.max_frequency().unsigned_abs() as usize + 2;
            weights.push(average_over_period(|t| p.eval(t), p.period(), n));
            fields.push(f.clone());
        }
        VectorField::linear_combination(&weights, &fields)
    }
}

/// `b(x, m) = b₀(x) + Σ_j b_j(x) ψ_j(m)` with general scalar `ψ_j`.
#[derive(Clone, Debug)]
pub struct FieldDrift {
    base: VectorField,
    terms: Vec<(VectorField, ScalarField)>,
}

impl FieldDrift {
    pub fn new(base: VectorField) -> Self {
        FieldDrift {
            base,
            terms: Vec::new(),
        }
    }

    pub fn zero(d: usize) -> Self {
        FieldDrift::new(VectorField::zero(d, d))
    }

    pub fn with_term(mut self, field: VectorField, psi: ScalarField) -> Self {
        self.terms.push((field, psi));
        self
    }

    pub fn dim(&self) -> usize {
        self.base.dim_out()
    }

    pub fn eval_into(&self, x: &[f64], m: &[f64], out: &mut [f64]) {
        self.base.eval_into(x, out);
        let mut tmp = Scratch::zeros(out.len());
        for (f, p) in &self.terms {
            let c = p.eval(m);
            if c != 0.0 {
                f.eval_into(x, &mut tmp);
                out.iter_mut()
                    .zip(tmp.iter())
                    .for_each(|(o, t)| *o += c * t);
            }
        }
    }

    /// `b̄(x) = b₀(x) + Σ_j b_j(x) E_μ[ψ_j]` for a supplied expectation.
    pub fn average(&self, expectation: &dyn Fn(&ScalarField) -> f64) -> VectorField {
        let mut weights = vec![1.0];
        let mut fields = vec![self.base.clone()];
        for (f, p) in &self.terms {
            weights.push(expectation(p));
            fields.push(f.clone());
        }
        VectorField::linear_combination(&weights, &fields)
    }
}

pub(crate) fn check_epsilon(eps: f64) -> Result<(), SystemError> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(SystemError::InvalidParameter(format!(
            "epsilon must be positive, got {eps}"
        )))
    }
}

pub(crate) fn check_fields(v: &[VectorField], d: usize) -> Result<(), SystemError> {
    for (a, f) in v.iter().enumerate() {
        if f.dim_in() != d || f.dim_out() != d {
            return Err(SystemError::Dimension(format!(
                "v_{} maps {}→{}, slow state has dimension {d}",
                a + 1,
                f.dim_in(),
                f.dim_out()
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_trig_drivers(phi: &[TrigPoly], period: f64) -> Result<(), SystemError> {
    for p in phi {
        if (p.period() - period).abs() > 1e-12 * period {
            return Err(PeriodicError::PeriodMismatch(period, p.period()).into());
        }
        if !p.is_real() {
            return Err(PeriodicError::NotReal.into());
        }
        if !p.is_mean_zero() {
            return Err(PeriodicError::NonZeroMean(p.mean().norm()).into());
        }
    }
    Ok(())
}

/// Adds `(1/ε) Σ_α φ_α v_α(x)` to `out`.
#[inline]
pub(crate) fn add_driven(
    out: &mut [f64],
    x: &[f64],
    v: &[VectorField],
    phis: impl Iterator<Item = f64>,
    inv_eps: f64,
    tmp: &mut [f64],
) {
    for (f, c) in v.iter().zip(phis) {
        if c != 0.0 {
            f.eval_into(x, tmp);
            out.iter_mut()
                .zip(tmp.iter())
                .for_each(|(o, t)| *o += inv_eps * c * t);
        }
    }
}

pub(crate) const TWO_PI: f64 = TAU;
