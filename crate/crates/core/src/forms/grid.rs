use rand::Rng;

use super::FormsError;
use crate::sde::ScalarField;

/// Default bound on `‖H e^{−U}‖ / ‖e^{−U}‖` for the analytic-`V` operator.
pub const GROUND_STATE_TOL: f64 = 1e-5;

/// Uniform grid on `[z_min, z_max]` carrying `U`, `V = ½(U'² − U'')` and
/// the ground state `q = e^{−(U − min U)}`.
///
/// Solves use the discrete potential `V_h = D²q / (2q)`, which makes `q` an
/// exact null vector of `H_h = −½D² + V_h`, and by default combine the
/// spacings `h` and `2h` by Richardson extrapolation.
#[derive(Debug, Clone)]
pub struct SchrodingerGrid1D {
    z: Vec<f64>,
    h: f64,
    u: Vec<f64>,
    v: Vec<f64>,
    q: Vec<f64>,
    richardson: bool,
}

impl SchrodingerGrid1D {
    /// `n` intervals (`n + 1` nodes) on `[z_min, z_max]`.
    pub fn new(u: &ScalarField, z_min: f64, z_max: f64, n: usize) -> Result<Self, FormsError> {
        if u.dim() != 1 {
            return Err(FormsError::InvalidGrid(
                "potential must be one-dimensional".into(),
            ));
        }
        if !(z_max > z_min) || !z_min.is_finite() || !z_max.is_finite() {
            return Err(FormsError::InvalidGrid(format!(
                "interval [{z_min}, {z_max}]"
            )));
        }
        if n < 8 || n % 2 != 0 {
            return Err(FormsError::InvalidGrid(format!(
                "need an even interval count ≥ 8, got {n}"
            )));
        }
        let h = (z_max - z_min) / n as f64;
        let z: Vec<f64> = (0..=n).map(|i| z_min + h * i as f64).collect();
        let uv: Vec<f64> = z.iter().map(|&x| u.eval(&[x])).collect();
        let v: Vec<f64> = z
            .iter()
            .map(|&x| {
                let g = u.gradient(&[x])[0];
                0.5 * (g * g - u.hessian(&[x])[0])
            })
            .collect();
        if uv.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(FormsError::InvalidGrid(
                "U or V not finite on the grid".into(),
            ));
        }
        let umin = uv.iter().copied().fold(f64::INFINITY, f64::min);
        let q: Vec<f64> = uv.iter().map(|x| (-(x - umin)).exp()).collect();
        if q.iter().any(|&x| x < 1e-150) {
            return Err(FormsError::InvalidGrid(
                "e^{-U} underflows at the grid ends; shrink the interval".into(),
            ));
        }
        Ok(SchrodingerGrid1D {
            z,
            h,
            u: uv,
            v,
            q,
            richardson: true,
        })
    }

    /// Symmetric-in-weight truncation: each end is placed where
    /// `e^{−2U} < 1e−16 · max e^{−2U}`, searched outward in steps of 0.25.
    pub fn auto(u: &ScalarField, n: usize) -> Result<Self, FormsError> {
        let f = |z: f64| u.eval(&[z]);
        let scan: Vec<f64> = (-400..=400).map(|i| 0.05 * i as f64).collect();
        let (zc, umin) = scan
            .iter()
            .map(|&z| (z, f(z)))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        // e^{−2(U−min)} < 1e−16  ⇔  U − min > 8 ln 10
        let cut = 8.0 * std::f64::consts::LN_10;
        let reach = |dir: f64| -> Result<f64, FormsError> {
            let mut z = zc;
            for _ in 0..4000 {
                z += 0.25 * dir;
                if f(z) - umin > cut {
                    return Ok(z);
                }
            }
            Err(FormsError::InvalidGrid(
                "potential does not confine within |z| ≤ 1000".into(),
            ))
        };
        let (lo, hi) = (reach(-1.0)?, reach(1.0)?);
        SchrodingerGrid1D::new(u, lo, hi, n)
    }

    pub fn with_richardson(mut self, on: bool) -> Self {
        self.richardson = on;
        self
    }

    pub fn richardson(&self) -> bool {
        self.richardson
    }

    pub fn nodes(&self) -> &[f64] {
        &self.z
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn intervals(&self) -> usize {
        self.z.len() - 1
    }

    pub fn potential(&self) -> &[f64] {
        &self.u
    }

    /// Analytic `V` at the nodes.
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Ground state `e^{−(U − min U)}`.
    pub fn ground_state(&self) -> &[f64] {
        &self.q
    }

    /// Unnormalized invariant weights `e^{−2(U − min U)}`.
    pub fn weights(&self) -> Vec<f64> {
        self.q.iter().map(|q| q * q).collect()
    }

    /// `K = Σ w Δz` with the shifted weights.
    pub fn normalization(&self) -> f64 {
        self.h * self.q.iter().map(|q| q * q).sum::<f64>()
    }

    /// `c_V = max(0, −min V)`.
    pub fn c_v(&self) -> f64 {
        (-self.v.iter().copied().fold(f64::INFINITY, f64::min)).max(0.0)
    }

    /// `‖H q‖ / ‖q‖` over interior nodes, with `H = −½D² + V` (analytic `V`).
    pub fn ground_state_residual(&self) -> f64 {
        let q = &self.q;
        let h2 = self.h * self.h;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..q.len() - 1 {
            let r = -0.5 * (q[i + 1] - 2.0 * q[i] + q[i - 1]) / h2 + self.v[i] * q[i];
            num += r * r;
            den += q[i] * q[i];
        }
        (num / den).sqrt()
    }

    pub fn check_ground_state(&self, tolerance: f64) -> Result<(), FormsError> {
        let residual = self.ground_state_residual();
        if residual <= tolerance {
            Ok(())
        } else {
            Err(FormsError::GridTooCoarse {
                residual,
                tolerance,
            })
        }
    }

    /// `∫ f dμ` for the invariant density `e^{−2U}/K`.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut s = 0.0;
        let mut w = 0.0;
        for (z, q) in self.z.iter().zip(&self.q) {
            s += q * q * f(*z);
            w += q * q;
        }
        s / w
    }

    /// Draw from the invariant density by inverting the piecewise-linear CDF.
    pub fn sample_invariant<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let w = self.weights();
        let mut cdf = Vec::with_capacity(w.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..w.len() {
            acc += 0.5 * (w[i - 1] + w[i]);
            cdf.push(acc);
        }
        let t = rng.random::<f64>() * acc;
        let i = cdf.partition_point(|&c| c < t).clamp(1, w.len() - 1);
        let frac = (t - cdf[i - 1]) / (cdf[i] - cdf[i - 1]).max(f64::MIN_POSITIVE);
        self.z[i - 1] + frac * self.h
    }

    /// Ground state and spacing of the sub-grid taking every `stride`-th node.
    pub(crate) fn sub(&self, stride: usize) -> (Vec<f64>, f64) {
        (
            self.q.iter().step_by(stride).copied().collect(),
            self.h * stride as f64,
        )
    }
}

/// `V_h = (q_{i+1} − 2q_i + q_{i−1}) / (2h² q_i)` at interior nodes.
pub(crate) fn discrete_potential(q: &[f64], h: f64) -> Vec<f64> {
    let h2 = h * h;
    (1..q.len() - 1)
        .map(|i| (q[i + 1] - 2.0 * q[i] + q[i - 1]) / (2.0 * h2 * q[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_rng;
    use crate::stats::{mean_se, variance_se};
    use crate::systems::Potential;

    fn ou() -> ScalarField {
        Potential::Quadratic { c: 1.0 }.field()
    }

    #[test]
    fn ground_state_residual_is_second_order() {
        let r1 = SchrodingerGrid1D::new(&ou(), -8.0, 8.0, 2000)
            .unwrap()
            .ground_state_residual();
        let r2 = SchrodingerGrid1D::new(&ou(), -8.0, 8.0, 4000)
            .unwrap()
            .ground_state_residual();
        assert!(r2 < GROUND_STATE_TOL);
        assert!((r1 / r2 - 4.0).abs() < 0.1, "{r1} {r2}");
    }

    #[test]
    fn discrete_potential_annihilates_ground_state() {
        let g = SchrodingerGrid1D::new(&ou(), -8.0, 8.0, 400).unwrap();
        let q = g.ground_state();
        let vh = discrete_potential(q, g.spacing());
        let h2 = g.spacing().powi(2);
        for i in 1..q.len() - 1 {
            let r = -0.5 * (q[i + 1] - 2.0 * q[i] + q[i - 1]) / h2 + vh[i - 1] * q[i];
            assert!(r.abs() < 1e-12);
        }
        // V_h is consistent with V
        for i in (1..q.len() - 1).step_by(37) {
            assert!((vh[i - 1] - g.v()[i]).abs() < 1e-2 * (1.0 + g.v()[i].abs()));
        }
    }

    #[test]
    fn auto_truncation_and_invariant_moments() {
        let g = SchrodingerGrid1D::auto(&ou(), 4000).unwrap();
        let (lo, hi) = (g.nodes()[0], *g.nodes().last().unwrap());
        assert!(lo < -6.0 && hi > 6.0 && lo > -7.0 && hi < 7.0);
        assert!((g.expectation(|z| z * z) - 0.5).abs() < 1e-10);
        let mut rng = path_rng(1, 0);
        let xs: Vec<f64> = (0..50_000).map(|_| g.sample_invariant(&mut rng)).collect();
        let (m, se) = mean_se(&xs);
        assert!(m.abs() < 3.0 * se);
        let (v, se) = variance_se(&xs);
        assert!((v - 0.5).abs() < 3.0 * se, "{v} ± {se}");
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(SchrodingerGrid1D::new(&ou(), 1.0, -1.0, 100).is_err());
        assert!(SchrodingerGrid1D::new(&ou(), -1.0, 1.0, 101).is_err());
        assert!(SchrodingerGrid1D::new(&ou(), -100.0, 100.0, 1000).is_err());
        assert!(SchrodingerGrid1D::auto(&Potential::Flat.field(), 100).is_err());
    }
}
