use std::sync::Arc;

use nalgebra::DMatrix;

use super::limit::{LimitSystemSpec, NoiseGain};
use super::potential::validate_potential;
use super::{
    add_driven, check_epsilon, check_fields, check_trig_drivers, DiffusionSpec, FieldDrift,
    SystemError, TrigDrift, TWO_PI,
};
use crate::periodic::{CovarianceForm, TrigPoly};
use crate::sde::{ItoSystem, ScalarField, SdeSystem, VectorField};

/// Ergodic time scaling:
/// `dX = b(X, M(t/ε²))dt + (1/ε) Σ_α v_α(X) φ_α(M(t/ε²)) dt`.
#[derive(Clone, Debug)]
pub struct TimeScalingSpec {
    pub b: FieldDrift,
    pub v: Vec<VectorField>,
    pub phi: Vec<ScalarField>,
    pub driver: DiffusionSpec,
    pub epsilon: f64,
}

impl TimeScalingSpec {
    pub fn dim_x(&self) -> usize {
        self.b.dim()
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
        self.driver.validate()?;
        if let Some(p) = self.phi.iter().find(|p| p.dim() != self.driver.dim()) {
            return Err(SystemError::Dimension(format!(
                "driver function takes {} arguments, M has dimension {}",
                p.dim(),
                self.driver.dim()
            )));
        }
        Ok(())
    }
}

/// Coupled system for `(X, M^ε)` with `dM^ε = μ/ε² dt + Σ_k σ_k/ε dW_k`.
pub fn build_time_fast(spec: &TimeScalingSpec) -> Result<ItoSystem, SystemError> {
    spec.validate()?;
    let dx = spec.dim_x();
    let dm = spec.driver.dim();
    let dim = dx + dm;
    let inv_eps = 1.0 / spec.epsilon;
    let s = Arc::new(spec.clone());
    let sd = s.clone();
    let drift = VectorField::new(dim, dim, move |st, out| {
        let (x, m) = st.split_at(dx);
        let (ox, om) = out.split_at_mut(dx);
        sd.b.eval_into(x, m, ox);
        let mut tmp = vec![0.0; dx];
        add_driven(
            ox,
            x,
            &sd.v,
            sd.phi.iter().map(|p| p.eval(m)),
            inv_eps,
            &mut tmp,
        );
        sd.driver.mu.eval_into(m, om);
        om.iter_mut().for_each(|o| *o *= inv_eps * inv_eps);
    });
    let columns = (0..spec.driver.noise_dim())
        .map(|k| {
            let sc = s.clone();
            VectorField::new(dim, dim, move |st, out| {
                out[..dx].fill(0.0);
                sc.driver.sigma[k].eval_into(&st[dx..], &mut out[dx..]);
                out[dx..].iter_mut().for_each(|o| *o *= inv_eps);
            })
        })
        .collect();
    Ok(ItoSystem::new(SdeSystem::new(drift, columns))?)
}

/// `dX = b̄(X)dt + √2 Σ_α v_α(X)∘dB_α` with `Cov(B) = form_values`.
/// `expectation` integrates a function of `m` against the invariant measure.
pub fn build_time_limit(
    spec: &TimeScalingSpec,
    form_values: &DMatrix<f64>,
    expectation: &dyn Fn(&ScalarField) -> f64,
) -> Result<LimitSystemSpec, SystemError> {
    spec.validate()?;
    let cov = CovarianceForm::from_matrix(form_values.clone())?;
    let lim = LimitSystemSpec {
        b_bar: spec.b.average(expectation),
        v: spec.v.clone(),
        cov,
        gain: NoiseGain::Constant(2f64.sqrt()),
    };
    lim.validate()?;
    Ok(lim)
}

/// Time scaling by integrated noise: `dM = ρ(Z)/ε² dt`,
/// `dZ = −U'(Z)/ε² dt + (1/ε)dW`, drivers and drift trigonometric in `M`.
#[derive(Clone, Debug)]
pub struct IntegratedNoiseSpec {
    pub b: TrigDrift,
    pub v: Vec<VectorField>,
    pub phi: Vec<TrigPoly>,
    pub rho: ScalarField,
    pub potential: ScalarField,
    pub epsilon: f64,
    /// Half-width and interval count of the potential validation grid.
    pub check_half_width: f64,
    pub check_intervals: usize,
}

impl IntegratedNoiseSpec {
    pub fn new(
        b: TrigDrift,
        v: Vec<VectorField>,
        phi: Vec<TrigPoly>,
        rho: ScalarField,
        potential: ScalarField,
        epsilon: f64,
    ) -> Self {
        IntegratedNoiseSpec {
            b,
            v,
            phi,
            rho,
            potential,
            epsilon,
            check_half_width: 10.0,
            check_intervals: 2000,
        }
    }

    pub fn dim_x(&self) -> usize {
        self.b.dim()
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
        check_trig_drivers(&self.phi, TWO_PI)?;
        self.b.check_period(TWO_PI)?;
        if self.rho.dim() != 1 || self.potential.dim() != 1 {
            return Err(SystemError::Dimension(
                "ρ and U must be functions of scalar z".into(),
            ));
        }
        Ok(())
    }

    /// Fast state `(x, m, z)`.
    pub fn fast_state(&self, x: &[f64], m: f64, z: f64) -> Vec<f64> {
        let mut s = x.to_vec();
        s.push(m.rem_euclid(TWO_PI));
        s.push(z);
        s
    }
}

/// Coupled system for `(X, M, Z)` with `M` tracked modulo 2π.
pub fn build_integrated_noise_fast(spec: &IntegratedNoiseSpec) -> Result<ItoSystem, SystemError> {
    spec.validate()?;
    let report = validate_potential(&spec.potential, spec.check_half_width, spec.check_intervals);
    if !report.passes() {
        return Err(SystemError::PotentialInvalid(report.violations.join("; ")));
    }
    let dx = spec.dim_x();
    let dim = dx + 2;
    let inv_eps = 1.0 / spec.epsilon;
    let s = Arc::new(spec.clone());
    let drift = VectorField::new(dim, dim, move |st, out| {
        let x = &st[..dx];
        let (m, z) = (st[dx], st[dx + 1]);
        let (ox, orest) = out.split_at_mut(dx);
        s.b.eval_into(x, m, ox);
        let mut tmp = vec![0.0; dx];
        add_driven(
            ox,
            x,
            &s.v,
            s.phi.iter().map(|p| p.eval(m)),
            inv_eps,
            &mut tmp,
        );
        let mut g = [0.0];
        s.potential.gradient_into(&[z], &mut g);
        orest[0] = inv_eps * inv_eps * s.rho.eval(&[z]);
        orest[1] = -inv_eps * inv_eps * g[0];
    });
    let mut e = vec![0.0; dim];
    e[dx + 1] = inv_eps;
    let sys = SdeSystem::new(drift, vec![VectorField::constant(dim, e)]).with_periodic(dx, TWO_PI);
    Ok(ItoSystem::new(sys)?)
}

/// `dX = b̄(X)dt + √2 Σ_α v_α(X)∘dB_α` with `Cov(B) = form_values`
/// (the integrated-noise form on the drivers).
pub fn build_integrated_limit(
    spec: &IntegratedNoiseSpec,
    form_values: &DMatrix<f64>,
) -> Result<LimitSystemSpec, SystemError> {
    spec.validate()?;
    let lim = LimitSystemSpec {
        b_bar: spec.b.average(),
        v: spec.v.clone(),
        cov: CovarianceForm::from_matrix(form_values.clone())?,
        gain: NoiseGain::Constant(2f64.sqrt()),
    };
    lim.validate()?;
    Ok(lim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{simulate_ensemble, EnsembleConfig, InitialState};
    use crate::stats::variance_se;

    fn ou_time_spec(eps: f64) -> TimeScalingSpec {
        TimeScalingSpec {
            b: FieldDrift::zero(1),
            v: vec![VectorField::constant(1, vec![1.0])],
            phi: vec![ScalarField::linear(vec![1.0])],
            driver: DiffusionSpec::ornstein_uhlenbeck(1),
            epsilon: eps,
        }
    }

    #[test]
    fn unit_epsilon_leaves_driver_unscaled() {
        let sys = build_time_fast(&ou_time_spec(1.0)).unwrap();
        assert_eq!(sys.drift.eval(&[0.0, 0.4]), vec![0.4, -0.4]);
        assert_eq!(sys.columns[0].eval(&[0.0, 0.4]), vec![0.0, 1.0]);
    }

    #[test]
    fn driver_variance_is_stationary_for_any_epsilon() {
        for (eps, seed) in [(1.0, 1), (0.3, 2)] {
            let sys = build_time_fast(&ou_time_spec(eps)).unwrap();
            let cfg = EnsembleConfig::new(5.0 * eps * eps, 1e-2 * eps * eps, 10_000, seed);
            let ens = simulate_ensemble(&sys, &InitialState::Fixed(vec![0.0, 0.0]), &cfg).unwrap();
            let m: Vec<f64> = ens.completed().map(|(_, x)| x[1]).collect();
            let (v, se) = variance_se(&m);
            assert!((v - 0.5).abs() <= 3.0 * se + 1e-3, "eps {eps}: {v} ± {se}");
        }
    }

    #[test]
    fn no_driver_leaves_plain_drift() {
        let mut spec = ou_time_spec(0.1);
        spec.phi = vec![ScalarField::new(1, |_| 0.0)];
        spec.b = FieldDrift::new(VectorField::new(1, 1, |x, o| o[0] = 2.0 * x[0]));
        let sys = build_time_fast(&spec).unwrap();
        assert_eq!(sys.drift.eval(&[1.5, 3.0])[0], 3.0);
    }

    #[test]
    fn time_limit_averages_and_checks_psd() {
        let mut spec = ou_time_spec(0.1);
        spec.b = FieldDrift::zero(1).with_term(
            VectorField::constant(1, vec![1.0]),
            ScalarField::new(1, |m| m[0] * m[0]),
        );
        let lim = build_time_limit(&spec, &DMatrix::from_element(1, 1, 0.5), &|_| 0.5).unwrap();
        assert_eq!(lim.b_bar.eval(&[0.0]), vec![0.5]);
        assert!(build_time_limit(&spec, &DMatrix::from_element(1, 1, -0.5), &|_| 0.5).is_err());
        let lim = build_time_limit(&spec, &DMatrix::zeros(1, 1), &|_| 0.0).unwrap();
        assert_eq!(lim.ito().unwrap().drift.eval(&[0.3]), vec![0.0]);
    }

    fn ou_integrated(eps: f64, rho: ScalarField) -> IntegratedNoiseSpec {
        IntegratedNoiseSpec::new(
            TrigDrift::zero(1),
            vec![VectorField::constant(1, vec![1.0])],
            vec![TrigPoly::cos(1, TWO_PI)],
            rho,
            ScalarField::univariate(|z| 0.5 * z * z, |z| z, |_| 1.0),
            eps,
        )
    }

    #[test]
    fn integrated_assembly() {
        let sys = build_integrated_noise_fast(&ou_integrated(1.0, ScalarField::linear(vec![1.0])))
            .unwrap();
        let (x, m, z) = (0.2, 0.9, -0.4);
        let d = sys.drift.eval(&[x, m, z]);
        assert!((d[0] - m.cos()).abs() < 1e-15);
        assert_eq!(d[1], z);
        assert_eq!(d[2], -z);
        assert_eq!(sys.columns[0].eval(&[x, m, z]), vec![0.0, 0.0, 1.0]);
        // ρ = 0 freezes M
        let sys =
            build_integrated_noise_fast(&ou_integrated(0.1, ScalarField::new(1, |_| 0.0))).unwrap();
        let d = sys.drift.eval(&[0.0, 0.5, 3.0]);
        assert_eq!(d[1], 0.0);
        assert!((d[0] - 10.0 * 0.5f64.cos()).abs() < 1e-13);
    }

    #[test]
    fn integrated_z_is_stationary_ou() {
        let sys = build_integrated_noise_fast(&ou_integrated(0.2, ScalarField::linear(vec![1.0])))
            .unwrap();
        let cfg = EnsembleConfig::new(0.3, 1e-2 * 0.04, 10_000, 5);
        let ens = simulate_ensemble(&sys, &InitialState::Fixed(vec![0.0, 0.0, 0.0]), &cfg).unwrap();
        let z: Vec<f64> = ens.completed().map(|(_, s)| s[2]).collect();
        let (v, se) = variance_se(&z);
        assert!((v - 0.5).abs() <= 3.0 * se + 1e-3, "{v} ± {se}");
        assert!(ens.completed().all(|(_, s)| (0.0..TWO_PI).contains(&s[1])));
    }

    #[test]
    fn flat_potential_rejected() {
        let mut spec = ou_integrated(0.1, ScalarField::linear(vec![1.0]));
        spec.potential = ScalarField::univariate(|_| 0.0, |_| 0.0, |_| 0.0);
        assert!(matches!(
            build_integrated_noise_fast(&spec),
            Err(SystemError::PotentialInvalid(_))
        ));
    }
}
