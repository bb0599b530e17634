use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::field::{Scratch, VectorField};
use super::SdeError;

/// Runtime path check; returning `false` flags the path and stops it.
#[derive(Clone)]
pub struct Guard {
    pub name: String,
    pub check: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
}

impl fmt::Debug for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Guard({})", self.name)
    }
}

/// Shape shared by Itô and Stratonovich systems:
/// `dx = a(x)dt + Σ_α b_α(x) dW_α` with `dW = T·dξ` when a noise transform
/// `T` (columns × raw noises) is present.
#[derive(Clone, Debug)]
pub struct SdeSystem {
    pub dim: usize,
    pub drift: VectorField,
    pub columns: Vec<VectorField>,
    pub noise_transform: Option<DMatrix<f64>>,
    /// Coordinates stored modulo a period after every step.
    pub periodic: Vec<(usize, f64)>,
    pub guard: Option<Guard>,
}

impl SdeSystem {
    pub fn new(drift: VectorField, columns: Vec<VectorField>) -> Self {
        SdeSystem {
            dim: drift.dim_out(),
            drift,
            columns,
            noise_transform: None,
            periodic: Vec::new(),
            guard: None,
        }
    }

    pub fn with_noise_transform(mut self, t: DMatrix<f64>) -> Self {
        self.noise_transform = Some(t);
        self
    }

    pub fn with_periodic(mut self, coord: usize, period: f64) -> Self {
        self.periodic.push((coord, period));
        self
    }

    pub fn with_guard(
        mut self,
        name: impl Into<String>,
        check: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.guard = Some(Guard {
            name: name.into(),
            check: Arc::new(check),
        });
        self
    }

    pub fn validate(&self) -> Result<(), SdeError> {
        let d = self.dim;
        if self.drift.dim_in() != d || self.drift.dim_out() != d {
            return Err(SdeError::Dimension(format!(
                "drift maps {}→{}, state dim {d}",
                self.drift.dim_in(),
                self.drift.dim_out()
            )));
        }
        for (i, c) in self.columns.iter().enumerate() {
            if c.dim_in() != d || c.dim_out() != d {
                return Err(SdeError::Dimension(format!(
                    "column {i} maps {}→{}, state dim {d}",
                    c.dim_in(),
                    c.dim_out()
                )));
            }
        }
        if let Some(t) = &self.noise_transform {
            if t.nrows() != self.columns.len() {
                return Err(SdeError::Dimension(format!(
                    "noise transform has {} rows for {} columns",
                    t.nrows(),
                    self.columns.len()
                )));
            }
        }
        for &(c, p) in &self.periodic {
            if c >= d || !(p > 0.0) {
                return Err(SdeError::Dimension(format!(
                    "bad periodic coordinate {c} (P={p})"
                )));
            }
        }
        Ok(())
    }

    /// Number of raw independent standard Wiener increments per step.
    pub fn noise_dim(&self) -> usize {
        match &self.noise_transform {
            Some(t) => t.ncols(),
            None => self.columns.len(),
        }
    }

    /// Covariance of the per-column increments per unit time, `T·Tᵀ`.
    pub fn increment_covariance(&self) -> DMatrix<f64> {
        match &self.noise_transform {
            Some(t) => t * t.transpose(),
            None => DMatrix::identity(self.columns.len(), self.columns.len()),
        }
    }

    /// Maps raw increments `ξ·√dt` to per-column increments.
    pub fn transform_increments(&self, raw: &[f64], out: &mut [f64]) {
        match &self.noise_transform {
            Some(t) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..t.ncols()).map(|j| t[(i, j)] * raw[j]).sum();
                }
            }
            None => out.copy_from_slice(raw),
        }
    }

    pub fn wrap(&self, x: &mut [f64]) {
        for &(c, p) in &self.periodic {
            x[c] = x[c].rem_euclid(p);
        }
    }

    /// `½ Σ_{αβ} (T Tᵀ)_{αβ} (∇b_α) b_β`, i.e. `½ Σ_γ (∇b̃_γ) b̃_γ` over the
    /// effective columns `b̃_γ = Σ_α T_{αγ} b_α`.
    pub fn stratonovich_correction(&self, x: &[f64], out: &mut [f64]) {
        self.correction_with(&self.increment_covariance(), x, out);
    }

    fn correction_with(&self, cov: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let d = self.dim;
        let n = self.columns.len();
        if n == 0 {
            return;
        }
        let mut cols = Scratch::zeros(n * d);
        for (b, c) in self.columns.iter().enumerate() {
            c.eval_into(x, &mut cols[b * d..(b + 1) * d]);
        }
        let mut jac = Scratch::zeros(d * d);
        let mut mixed = Scratch::zeros(d);
        for (a, ca) in self.columns.iter().enumerate() {
            mixed.fill(0.0);
            let mut any = false;
            for b in 0..n {
                let w = cov[(a, b)];
                if w != 0.0 {
                    any = true;
                    for i in 0..d {
                        mixed[i] += w * cols[b * d + i];
                    }
                }
            }
            if !any {
                continue;
            }
            ca.jacobian_into(x, &mut jac);
            for r in 0..d {
                let s: f64 = (0..d).map(|c| jac[r * d + c] * mixed[c]).sum();
                out[r] += 0.5 * s;
            }
        }
    }
}

/// Itô SDE, integrated with Euler–Maruyama.
#[derive(Clone, Debug)]
pub struct ItoSystem(SdeSystem);

/// Stratonovich SDE, integrated with the Heun predictor–corrector.
#[derive(Clone, Debug)]
pub struct StratonovichSystem(SdeSystem);

impl ItoSystem {
    pub fn new(sys: SdeSystem) -> Result<Self, SdeError> {
        sys.validate()?;
        Ok(ItoSystem(sys))
    }

    pub fn inner(&self) -> &SdeSystem {
        &self.0
    }

    pub fn into_inner(self) -> SdeSystem {
        self.0
    }
}

impl StratonovichSystem {
    pub fn new(sys: SdeSystem) -> Result<Self, SdeError> {
        sys.validate()?;
        Ok(StratonovichSystem(sys))
    }

    pub fn inner(&self) -> &SdeSystem {
        &self.0
    }

    pub fn into_inner(self) -> SdeSystem {
        self.0
    }
}

impl Deref for ItoSystem {
    type Target = SdeSystem;
    fn deref(&self) -> &SdeSystem {
        &self.0
    }
}

impl Deref for StratonovichSystem {
    type Target = SdeSystem;
    fn deref(&self) -> &SdeSystem {
        &self.0
    }
}

fn shifted_drift(sys: &SdeSystem, sign: f64) -> VectorField {
    let base = sys.clone();
    let cov = sys.increment_covariance();
    let d = sys.dim;
    VectorField::new(d, d, move |x, out| {
        base.drift.eval_into(x, out);
        let mut corr = Scratch::zeros(d);
        base.correction_with(&cov, x, &mut corr);
        out.iter_mut()
            .zip(corr.iter())
            .for_each(|(o, c)| *o += sign * c);
    })
}

/// Itô form of a Stratonovich system: drift gains `½ Σ_γ (∇b̃_γ) b̃_γ`,
/// diffusion unchanged.
pub fn strat_to_ito(sys: &StratonovichSystem) -> ItoSystem {
    let mut out = sys.0.clone();
    out.drift = shifted_drift(&sys.0, 1.0);
    ItoSystem(out)
}

/// Inverse of [`strat_to_ito`].
pub fn ito_to_strat(sys: &ItoSystem) -> StratonovichSystem {
    let mut out = sys.0.clone();
    out.drift = shifted_drift(&sys.0, -1.0);
    StratonovichSystem(out)
}
