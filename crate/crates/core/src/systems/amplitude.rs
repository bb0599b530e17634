use std::sync::Arc;

use nalgebra::DMatrix;

use super::limit::{LimitSystemSpec, NoiseGain};
use super::{
    add_driven, check_epsilon, check_fields, check_trig_drivers, DiffusionSpec, SystemError,
    TrigDrift,
};
use crate::periodic::{gram_matrix, TrigPoly};
use crate::sde::{ItoSystem, ScalarField, Scratch, SdeSystem, VectorField};

/// Paths on which `κ(M)` falls below this value are flagged.
pub const KAPPA_MIN: f64 = 1e-8;

/// Amplitude scaling: `dX = b(X, ϑ(M)/ε)dt + (1/ε) Σ_α v_α(X) φ_α(ϑ(M)/ε) dt`.
#[derive(Clone, Debug)]
pub struct AmplitudeScalingSpec {
    pub b: TrigDrift,
    pub v: Vec<VectorField>,
    pub phi: Vec<TrigPoly>,
    pub theta_map: ScalarField,
    pub driver: DiffusionSpec,
    pub epsilon: f64,
}

impl AmplitudeScalingSpec {
    pub fn dim_x(&self) -> usize {
        self.b.dim()
    }

    pub fn dim_m(&self) -> usize {
        self.driver.dim()
    }

    /// Common period of the drivers (2π when there are none).
    pub fn period(&self) -> f64 {
        self.phi
            .first()
            .map(|p| p.period())
            .or_else(|| self.b.terms().first().map(|(_, p)| p.period()))
            .unwrap_or(super::TWO_PI)
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        check_epsilon(self.epsilon)?;
        if self.v.len() != self.phi.len() {
            return Err(SystemError::Dimension(format!(
                "{} vector fields for {} drivers",
                self.v.len(),
                self.phi.len()
            )));
        }
        check_fields(&self.v, self.dim_x())?;
        check_trig_drivers(&self.phi, self.period())?;
        self.b.check_period(self.period())?;
        self.driver.validate()?;
        if self.theta_map.dim() != self.dim_m() {
            return Err(SystemError::Dimension(format!(
                "ϑ takes {} arguments, driver has dimension {}",
                self.theta_map.dim(),
                self.dim_m()
            )));
        }
        Ok(())
    }

    /// `ς_k(m) = ∇ϑ(m)·σ_k(m)`.
    pub fn varsigma(&self, m: &[f64]) -> Vec<f64> {
        varsigma(&self.theta_map, &self.driver, m)
    }

    /// `κ(m) = √(Σ_k ς_k(m)²)`.
    pub fn kappa(&self, m: &[f64]) -> f64 {
        self.varsigma(m).iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Itô drift of `ϑ(M)`: `∇ϑ·μ + ½ Σ_k Σ_ij σ_ki σ_kj ∂_i∂_j ϑ`.
    pub fn rho_drift(&self, m: &[f64]) -> f64 {
        rho_drift(&self.theta_map, &self.driver, m)
    }

    /// Fast state `(x, Θ, m)` with `Θ = ϑ(m)/ε mod P`.
    pub fn fast_state(&self, x: &[f64], m: &[f64]) -> Vec<f64> {
        let mut s = x.to_vec();
        s.push((self.theta_map.eval(m) / self.epsilon).rem_euclid(self.period()));
        s.extend_from_slice(m);
        s
    }

    /// Limit state `(x, m)`.
    pub fn limit_state(&self, x: &[f64], m: &[f64]) -> Vec<f64> {
        let mut s = x.to_vec();
        s.extend_from_slice(m);
        s
    }
}

fn varsigma(theta: &ScalarField, driver: &DiffusionSpec, m: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; driver.sigma.len()];
    varsigma_into(theta, driver, m, &mut out);
    out
}

fn varsigma_into(theta: &ScalarField, driver: &DiffusionSpec, m: &[f64], out: &mut [f64]) {
    let d = m.len();
    let mut g = Scratch::zeros(d);
    theta.gradient_into(m, &mut g);
    let mut col = Scratch::zeros(d);
    for (o, s) in out.iter_mut().zip(&driver.sigma) {
        s.eval_into(m, &mut col);
        *o = g.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
    }
}

/// `κ(m)` without heap allocation for small driver dimensions.
pub(crate) fn kappa_at(theta: &ScalarField, driver: &DiffusionSpec, m: &[f64]) -> f64 {
    let mut vs = Scratch::zeros(driver.sigma.len());
    varsigma_into(theta, driver, m, &mut vs);
    vs.iter().map(|s| s * s).sum::<f64>().sqrt()
}

fn rho_drift(theta: &ScalarField, driver: &DiffusionSpec, m: &[f64]) -> f64 {
    let d = m.len();
    let mut g = Scratch::zeros(d);
    theta.gradient_into(m, &mut g);
    let mut h = Scratch::zeros(d * d);
    theta.hessian_into(m, &mut h);
    let mut mu = Scratch::zeros(d);
    driver.mu.eval_into(m, &mut mu);
    let mut r: f64 = g.iter().zip(mu.iter()).map(|(a, b)| a * b).sum();
    let mut col = Scratch::zeros(d);
    for s in &driver.sigma {
        s.eval_into(m, &mut col);
        for i in 0..d {
            for j in 0..d {
                r += 0.5 * col[i] * col[j] * h[i * d + j];
            }
        }
    }
    r
}

pub fn kappa(spec: &AmplitudeScalingSpec, m: &[f64]) -> f64 {
    spec.kappa(m)
}

/// Coupled Itô system for `(X, Θ, M)`:
/// `dΘ = (1/ε)ρ(M)dt + (1/ε)Σ_k ς_k(M)dW_k` tracked modulo `P`.
pub fn build_amplitude_fast(spec: &AmplitudeScalingSpec) -> Result<ItoSystem, SystemError> {
    spec.validate()?;
    let dx = spec.dim_x();
    let dm = spec.dim_m();
    let dim = dx + 1 + dm;
    let inv_eps = 1.0 / spec.epsilon;
    let s = Arc::new(spec.clone());

    let sd = s.clone();
    let drift = VectorField::new(dim, dim, move |st, out| {
        let (x, rest) = st.split_at(dx);
        let theta = rest[0];
        let m = &rest[1..];
        let (ox, orest) = out.split_at_mut(dx);
        sd.b.eval_into(x, theta, ox);
        let mut tmp = Scratch::zeros(dx);
        add_driven(
            ox,
            x,
            &sd.v,
            sd.phi.iter().map(|p| p.eval(theta)),
            inv_eps,
            &mut tmp,
        );
        orest[0] = inv_eps * sd.rho_drift(m);
        sd.driver.mu.eval_into(m, &mut orest[1..]);
    });

    let columns = (0..spec.driver.noise_dim())
        .map(|k| {
            let sc = s.clone();
            VectorField::new(dim, dim, move |st, out| {
                let m = &st[dx + 1..];
                out[..dx].fill(0.0);
                let col = &mut out[dx + 1..];
                sc.driver.sigma[k].eval_into(m, col);
                let mut g = Scratch::zeros(m.len());
                sc.theta_map.gradient_into(m, &mut g);
                out[dx] = inv_eps * g.iter().zip(col.iter()).map(|(a, b)| a * b).sum::<f64>();
            })
        })
        .collect();

    let sg = s.clone();
    let sys = SdeSystem::new(drift, columns)
        .with_periodic(dx, spec.period())
        .with_guard("KappaVanished", move |st| {
            kappa_at(&sg.theta_map, &sg.driver, &st[dx + 1..]) >= KAPPA_MIN
        });
    Ok(ItoSystem::new(sys)?)
}

/// Limit `dX = b̄(X)dt + (2/κ(M)) Σ_α v_α(X)∘dB_α` coupled to `M`, with
/// `Cov(B) = Gram(Φ_α)` for the mean-zero antiderivatives `Φ_α`.
pub fn build_amplitude_limit(spec: &AmplitudeScalingSpec) -> Result<LimitSystemSpec, SystemError> {
    spec.validate()?;
    let antiderivatives = spec
        .phi
        .iter()
        .map(|p| p.antiderivative_mean_zero())
        .collect::<Result<Vec<_>, _>>()?;
    let cov = gram_matrix(&antiderivatives)?;
    let lim = LimitSystemSpec {
        b_bar: spec.b.average(),
        v: spec.v.clone(),
        cov,
        gain: NoiseGain::InverseKappa {
            driver: spec.driver.clone(),
            theta_map: spec.theta_map.clone(),
        },
    };
    lim.validate()?;
    Ok(lim)
}

/// `(2/κ(m))·v(x)` on the joint state `(x, m)`, embedded in the X block.
pub(crate) fn kappa_scaled_column(
    v: VectorField,
    theta: ScalarField,
    driver: DiffusionSpec,
    dx: usize,
) -> VectorField {
    let dm = driver.dim();
    let dim = dx + dm;
    let kappa_of = {
        let theta = theta.clone();
        let driver = driver.clone();
        move |m: &[f64]| kappa_at(&theta, &driver, m)
    };
    let k1 = kappa_of.clone();
    let v1 = v.clone();
    let field = VectorField::new(dim, dim, move |st, out| {
        let (x, m) = st.split_at(dx);
        let gain = 2.0 / k1(m);
        v1.eval_into(x, &mut out[..dx]);
        out[..dx].iter_mut().for_each(|o| *o *= gain);
        out[dx..].fill(0.0);
    });
    if !v.has_analytic_jacobian() {
        return field;
    }
    field.with_jacobian(move |st, j| {
        let (x, m) = st.split_at(dx);
        let k = kappa_of(m);
        let gain = 2.0 / k;
        j.fill(0.0);
        let mut jv = Scratch::zeros(dx * dx);
        v.jacobian_into(x, &mut jv);
        let mut vx = Scratch::zeros(dx);
        v.eval_into(x, &mut vx);
        // ∂_m (2/κ) by central differences on κ
        let mut mp = Scratch::copy_of(m);
        let mut dgain = Scratch::zeros(dm);
        for c in 0..dm {
            let h = crate::sde::jacobian_step(m[c]);
            mp[c] = m[c] + h;
            let kp = kappa_of(&mp);
            mp[c] = m[c] - h;
            let km = kappa_of(&mp);
            mp[c] = m[c];
            dgain[c] = (2.0 / kp - 2.0 / km) / (2.0 * h);
        }
        for r in 0..dx {
            for c in 0..dx {
                j[r * dim + c] = gain * jv[r * dx + c];
            }
            for c in 0..dm {
                j[r * dim + dx + c] = vx[r] * dgain[c];
            }
        }
    })
}

/// Block-diagonal `diag(S, I)` mixing the limit's X channels only.
pub(crate) fn block_transform(s: &DMatrix<f64>, n_m: usize) -> DMatrix<f64> {
    let nb = s.nrows();
    let mut t = DMatrix::zeros(nb + n_m, nb + n_m);
    t.view_mut((0, 0), (nb, nb)).copy_from(s);
    for k in 0..n_m {
        t[(nb + k, nb + k)] = 1.0;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::TrigPoly;
    use crate::rng::path_rng;
    use crate::sde::{trace_path, InitialState};
    use crate::stats::variance_se;
    use std::f64::consts::TAU;

    fn identity_theta(d: usize) -> ScalarField {
        ScalarField::linear(vec![1.0; d])
    }

    fn scalar_spec(theta: ScalarField, eps: f64) -> AmplitudeScalingSpec {
        AmplitudeScalingSpec {
            b: TrigDrift::zero(1),
            v: vec![],
            phi: vec![],
            theta_map: theta,
            driver: DiffusionSpec::standard_wiener(1),
            epsilon: eps,
        }
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(scalar_spec(identity_theta(1), 1.0).kappa(&[0.3]), 1.0);
        assert_eq!(
            scalar_spec(ScalarField::linear(vec![2.0]), 1.0).kappa(&[0.3]),
            2.0
        );
        let mut s = scalar_spec(identity_theta(2), 1.0);
        s.driver = DiffusionSpec::standard_wiener(2);
        assert!((s.kappa(&[0.1, -4.0]) - 2f64.sqrt()).abs() < 1e-15);
        // ρ for ϑ = m², M = W: ½·2 = 1
        let sq = ScalarField::new(1, |m| m[0] * m[0])
            .with_gradient(|m, g| g[0] = 2.0 * m[0])
            .with_hessian(|_, h| h[0] = 2.0);
        assert_eq!(scalar_spec(sq, 1.0).rho_drift(&[0.7]), 1.0);
    }

    #[test]
    fn decoupled_when_drivers_vanish() {
        let b = TrigDrift::new(VectorField::new(1, 1, |x, o| o[0] = -x[0]));
        let spec = AmplitudeScalingSpec {
            b,
            v: vec![VectorField::constant(1, vec![1.0])],
            phi: vec![TrigPoly::zero(TAU)],
            ..scalar_spec(identity_theta(1), 1.0)
        };
        let sys = build_amplitude_fast(&spec).unwrap();
        let d = sys.drift.eval(&[0.5, 1.3, 0.2]);
        assert_eq!(d[0], -0.5);
    }

    #[test]
    fn assembly_fidelity() {
        let eps = 0.1;
        let u = super::super::SpeedFunction::default();
        let v = vec![u.along_axis(0), u.along_axis(1)];
        let b = TrigDrift::new(VectorField::new(2, 2, |x, o| {
            o[0] = x[1];
            o[1] = 0.5;
        }))
        .with_term(
            VectorField::new(2, 2, |x, o| {
                o[0] = x[0] * x[1];
                o[1] = 1.0;
            }),
            TrigPoly::sin(2, TAU),
        )
        .unwrap();
        let spec = AmplitudeScalingSpec {
            b: b.clone(),
            v: v.clone(),
            phi: vec![TrigPoly::cos(1, TAU), TrigPoly::sin(1, TAU)],
            theta_map: identity_theta(1),
            driver: DiffusionSpec::standard_wiener(1),
            epsilon: eps,
        };
        let sys = build_amplitude_fast(&spec).unwrap();
        for (x, th) in [([0.3, -0.2], 1.1), ([2.0, 1.0], 5.9), ([-1.0, 0.4], 0.0)] {
            let st = [x[0], x[1], th, 0.7];
            let got = sys.drift.eval(&st);
            let mut want = [0.0; 2];
            b.eval_into(&x, th, &mut want);
            let ux = u.value(&x);
            want[0] += ux * th.cos() / eps;
            want[1] += ux * th.sin() / eps;
            assert!((got[0] - want[0]).abs() <= 1e-14 * (1.0 + want[0].abs()));
            assert!((got[1] - want[1]).abs() <= 1e-14 * (1.0 + want[1].abs()));
            assert_eq!(got[2], 0.0);
            assert_eq!(got[3], 0.0);
        }
        let c = sys.columns[0].eval(&[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(c, vec![0.0, 0.0, 1.0 / eps, 1.0]);
    }

    #[test]
    fn theta_increment_variance() {
        let eps = 0.1;
        let dt = 1e-3;
        let sys = build_amplitude_fast(&scalar_spec(identity_theta(1), eps)).unwrap();
        // one step from Θ near the middle of the period so the wrap is inactive
        let n = 100_000;
        let incs: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = path_rng(3, i);
                let (x, _) = trace_path(&sys, vec![0.0, 3.0, 0.0], 1, dt, &mut rng, |_, _| {});
                x[1] - 3.0
            })
            .collect();
        let (v, se) = variance_se(&incs);
        let target = dt / (eps * eps);
        assert!((v - target).abs() <= 3.0 * se, "{v} vs {target} ± {se}");
        let _ = InitialState::Fixed(vec![]);
    }

    #[test]
    fn kappa_guard_flags_paths() {
        // ϑ(m) = m², κ = 2|m| vanishes at m = 0
        let sq = ScalarField::new(1, |m| m[0] * m[0])
            .with_gradient(|m, g| g[0] = 2.0 * m[0])
            .with_hessian(|_, h| h[0] = 2.0);
        let mut spec = scalar_spec(sq, 1.0);
        spec.driver = DiffusionSpec::new(VectorField::zero(1, 1), vec![VectorField::zero(1, 1)]);
        let sys = build_amplitude_fast(&spec).unwrap();
        let mut rng = path_rng(0, 0);
        let (_, status) = trace_path(&sys, vec![0.0, 0.0, 0.0], 3, 0.1, &mut rng, |_, _| {});
        assert!(matches!(
            status,
            crate::sde::PathStatus::Flagged { step: 1, .. }
        ));
    }

    #[test]
    fn rejects_bad_drivers() {
        let mut spec = scalar_spec(identity_theta(1), 0.1);
        spec.v = vec![VectorField::constant(1, vec![1.0])];
        spec.phi = vec![TrigPoly::constant(1.0, TAU)];
        assert!(build_amplitude_fast(&spec).is_err());
        spec.phi = vec![TrigPoly::cos(1, TAU)];
        spec.epsilon = 0.0;
        assert!(build_amplitude_fast(&spec).is_err());
    }
}
