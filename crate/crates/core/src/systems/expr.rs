//! Built-in scalar expressions for speed functions `u(x)` and `w(x)`.

use serde::{Deserialize, Serialize};

use crate::sde::{Scratch, VectorField};

/// Scalar function of the slow state, selected by name with parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeedFunction {
    /// `offset + slope·x`
    Affine { offset: f64, slope: Vec<f64> },
    /// `base + amplitude·exp(−|x − center|² / (2 width²))`
    GaussianBump {
        base: f64,
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `base + amplitude·|x − center|²`
    Radial {
        base: f64,
        amplitude: f64,
        center: Vec<f64>,
    },
}

impl Default for SpeedFunction {
    fn default() -> Self {
        SpeedFunction::GaussianBump {
            base: 0.5,
            amplitude: 0.5,
            center: vec![0.0, 0.0],
            width: 1.0,
        }
    }
}

impl SpeedFunction {
    pub fn dim(&self) -> usize {
        match self {
            SpeedFunction::Affine { slope, .. } => slope.len(),
            SpeedFunction::GaussianBump { center, .. } | SpeedFunction::Radial { center, .. } => {
                center.len()
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.dim() == 0 {
            return Err("speed function has dimension 0".into());
        }
        if let SpeedFunction::GaussianBump { width, .. } = self {
            if !(*width > 0.0) {
                return Err(format!("gaussian_bump width must be positive, got {width}"));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SpeedFunction::Affine { offset, slope } => {
                offset + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            }
            SpeedFunction::GaussianBump {
                base,
                amplitude,
                center,
                width,
            } => {
                let r2 = dist2(x, center);
                base + amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            SpeedFunction::Radial {
                base,
                amplitude,
                center,
            } => base + amplitude * dist2(x, center),
        }
    }

    pub fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        match self {
            SpeedFunction::Affine { slope, .. } => g.copy_from_slice(slope),
            SpeedFunction::GaussianBump {
                amplitude,
                center,
                width,
                ..
            } => {
                let w2 = width * width;
                let e = amplitude * (-dist2(x, center) / (2.0 * w2)).exp();
                for i in 0..g.len() {
                    g[i] = -e * (x[i] - center[i]) / w2;
                }
            }
            SpeedFunction::Radial {
                amplitude, center, ..
            } => {
                for i in 0..g.len() {
                    g[i] = 2.0 * amplitude * (x[i] - center[i]);
                }
            }
        }
    }

    /// `∂_i u(x)`.
    pub fn gradient_at(&self, x: &[f64], i: usize) -> f64 {
        let mut g = Scratch::zeros(self.dim());
        self.gradient_into(x, &mut g);
        g[i]
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    /// `x ↦ u(x) e_axis` with analytic Jacobian `e_axis ∇uᵀ`.
    pub fn along_axis(&self, axis: usize) -> VectorField {
        let d = self.dim();
        let f = self.clone();
        let g = self.clone();
        VectorField::new(d, d, move |x, out| {
            out.fill(0.0);
            out[axis] = f.value(x);
        })
        .with_jacobian(move |x, j| {
            j.fill(0.0);
            g.gradient_into(x, &mut j[axis * d..(axis + 1) * d]);
        })
    }

    /// Short symbolic form for reports.
    pub fn describe(&self) -> String {
        match self {
            SpeedFunction::Affine { offset, slope } => format!("{offset} + {slope:?}·x"),
            SpeedFunction::GaussianBump {
                base,
                amplitude,
                center,
                width,
            } => format!("{base} + {amplitude}·exp(-|x - {center:?}|²/(2·{width}²))"),
            SpeedFunction::Radial {
                base,
                amplitude,
                center,
            } => format!("{base} + {amplitude}·|x - {center:?}|²"),
        }
    }
}

fn dist2(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum()
}
