//! Named confining potentials and the growth / Schrödinger-potential checks.

use serde::{Deserialize, Serialize};

use crate::sde::ScalarField;

/// One-dimensional potential `U(z)` selected by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// `½ c z²`
    Quadratic { c: f64 },
    /// `¼ a z⁴ + ½ b z²`
    Quartic { a: f64, b: f64 },
    /// `s·√(z² + δ²)`, a smoothed `s|z|`
    SmoothAbs { slope: f64, delta: f64 },
    /// `U = 0` (fails the growth condition; useful as a negative control)
    Flat,
}

impl Default for Potential {
    fn default() -> Self {
        Potential::Quadratic { c: 1.0 }
    }
}

impl Potential {
    pub fn field(&self) -> ScalarField {
        match *self {
            Potential::Quadratic { c } => {
                ScalarField::univariate(move |z| 0.5 * c * z * z, move |z| c * z, move |_| c)
            }
            Potential::Quartic { a, b } => ScalarField::univariate(
                move |z| 0.25 * a * z.powi(4) + 0.5 * b * z * z,
                move |z| a * z.powi(3) + b * z,
                move |z| 3.0 * a * z * z + b,
            ),
            Potential::SmoothAbs { slope, delta } => ScalarField::univariate(
                move |z| slope * (z * z + delta * delta).sqrt(),
                move |z| slope * z / (z * z + delta * delta).sqrt(),
                move |z| slope * delta * delta / (z * z + delta * delta).powf(1.5),
            ),
            Potential::Flat => ScalarField::univariate(|_| 0.0, |_| 0.0, |_| 0.0),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Potential::Quadratic { c } => format!("U(z) = {c}·z²/2"),
            Potential::Quartic { a, b } => format!("U(z) = {a}·z⁴/4 + {b}·z²/2"),
            Potential::SmoothAbs { slope, delta } => format!("U(z) = {slope}·√(z² + {delta}²)"),
            Potential::Flat => "U(z) = 0".into(),
        }
    }
}

/// Outcome of [`validate_potential`]; `violations` is empty on success.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialReport {
    pub half_width: f64,
    pub intervals: usize,
    /// Fitted slope and offset of the bound `U(z) ≥ a|z| − c`.
    pub a: f64,
    pub c: f64,
    /// `min V` over the grid and a constant `c_V > 0` with `V > −c_V`.
    pub v_min: f64,
    pub c_v: f64,
    pub v_increasing_outward: bool,
    pub violations: Vec<String>,
}

impl PotentialReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks on `[−L, L]` (`n` intervals): linear growth of `U` fitted on the
/// outer half of the grid, and `V = ½(U'² − U'')` finite, bounded below and
/// non-decreasing in `|z|` on the outer half with net growth to the edge.
pub fn validate_potential(u: &ScalarField, half_width: f64, n: usize) -> PotentialReport {
    let mut violations = Vec::new();
    let n = n.max(4);
    let l = half_width;
    let zs: Vec<f64> = (0..=n)
        .map(|i| -l + 2.0 * l * i as f64 / n as f64)
        .collect();
    let us: Vec<f64> = zs.iter().map(|&z| u.eval(&[z])).collect();
    let vs: Vec<f64> = zs
        .iter()
        .map(|&z| {
            let g = u.gradient(&[z])[0];
            let h = u.hessian(&[z])[0];
            0.5 * (g * g - h)
        })
        .collect();

    // least squares of U against |z| on the outer half
    let outer: Vec<usize> = (0..=n).filter(|&i| zs[i].abs() >= 0.5 * l).collect();
    let m = outer.len() as f64;
    let mr = outer.iter().map(|&i| zs[i].abs()).sum::<f64>() / m;
    let mu = outer.iter().map(|&i| us[i]).sum::<f64>() / m;
    let sxx: f64 = outer.iter().map(|&i| (zs[i].abs() - mr).powi(2)).sum();
    let sxy: f64 = outer
        .iter()
        .map(|&i| (zs[i].abs() - mr) * (us[i] - mu))
        .sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c = zs
        .iter()
        .zip(&us)
        .map(|(z, u)| a * z.abs() - u)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    if !(a > 1e-8) {
        violations.push(format!("U(z) ≥ a|z| − c fails: fitted a = {a:.3e}"));
    }

    let v_min = vs.iter().copied().fold(f64::INFINITY, f64::min);
    if vs.iter().any(|v| !v.is_finite()) || us.iter().any(|u| !u.is_finite()) {
        violations.push("U or V not finite on the grid".into());
    }
    let c_v = (-v_min).max(0.0) + 1e-9 * (1.0 + v_min.abs());

    let scale = vs.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    let tol = 1e-9 * scale;
    let mid = n / 2;
    let right_ok = (mid..n)
        .filter(|&i| zs[i] >= 0.5 * l)
        .all(|i| vs[i + 1] >= vs[i] - tol);
    let left_ok = (1..=mid)
        .filter(|&i| zs[i] <= -0.5 * l)
        .all(|i| vs[i - 1] >= vs[i] - tol);
    let at_half = |z: f64| {
        let i = ((z + l) / (2.0 * l) * n as f64).round() as usize;
        vs[i.min(n)]
    };
    let grows = vs[n] > at_half(0.5 * l) + tol && vs[0] > at_half(-0.5 * l) + tol;
    let v_increasing_outward = right_ok && left_ok && grows;
    if !v_increasing_outward {
        violations.push("V is not increasing toward the grid boundary".into());
    }
    PotentialReport {
        half_width: l,
        intervals: n,
        a,
        c,
        v_min,
        c_v,
        v_increasing_outward,
        violations,
    }
}
