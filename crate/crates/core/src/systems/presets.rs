//! Ready-made systems: the phototactic robot, the MIPS particle and an
//! Ornstein–Uhlenbeck integrated-noise driver.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::amplitude::{build_amplitude_fast, build_amplitude_limit, AmplitudeScalingSpec};
use super::limit::LimitSystemSpec;
use super::potential::Potential;
use super::time::{build_integrated_limit, build_integrated_noise_fast, IntegratedNoiseSpec};
use super::{DiffusionSpec, SpeedFunction, SystemError, TrigDrift};
use crate::forms::ou_form_matrix;
use crate::periodic::TrigPoly;
use crate::sde::{
    InitialState, ItoSystem, ScalarField, SdeSystem, StratonovichSystem, VectorField,
};

const NAMES: [&str; 3] = ["robot", "mips", "ou_integrated"];

pub fn preset_names() -> &'static [&'static str] {
    &NAMES
}

/// Free parameters shared by the presets; each preset reads the ones it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetParams {
    pub epsilon: f64,
    /// Robot delay gain `k`.
    pub k: f64,
    /// MIPS coefficient `κ`.
    pub kappa_mips: f64,
    /// Drop the `x₂` `sin²` drift term of the MIPS particle (see [`preset`]).
    pub mips_literal: bool,
    /// Linear damping `b₀(x) = −λx` of the integrated-noise preset.
    pub lambda: f64,
    /// Robot speed function.
    pub u: SpeedFunction,
    /// MIPS speed function.
    pub w: SpeedFunction,
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams {
            epsilon: 0.1,
            k: 1.0,
            kappa_mips: 1.0,
            mips_literal: false,
            lambda: 0.0,
            u: SpeedFunction::default(),
            w: SpeedFunction::default(),
        }
    }
}

/// Law of the fast phase at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPhase {
    /// `M(0) = 0` (and `Z(0) = 0`), so `Θ(0) = ϑ(0)/ε`.
    Zero,
    /// `Θ(0)` uniform on `[0, P)`; for the integrated preset `M(0)` uniform
    /// on `[0, 2π)` and `Z(0) ~ N(0, ½)`.
    #[default]
    Stationary,
}

#[derive(Clone, Debug)]
pub enum PresetSystem {
    Amplitude(AmplitudeScalingSpec),
    Integrated(IntegratedNoiseSpec),
}

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub params: PresetParams,
    pub system: PresetSystem,
}

/// Builds a named preset.
///
/// * `robot`: `φ = {cos, sin}` (P = 2π), `v_α = u e_α`, `ϑ(m) = m`, `M = W`,
///   drift `−k u (∂₁u cos² + ∂₂u cos·sin, ∂₁u cos·sin + ∂₂u sin²)`.
/// * `mips`: same shape with drift `κ (∂₁w cos² + ∂₂w cos·sin, ∂₁w cos·sin + ∂₂w sin²)`
///   and `v_α = w e_α`; with `mips_literal` the `∂₂w sin²` term is dropped.
/// * `ou_integrated`: `d_X = 1`, `b₀ = −λx`, `v = 1`, `φ = cos`, `ρ(z) = z`, `U = z²/2`.
pub fn preset(name: &str, params: &PresetParams) -> Result<Preset, SystemError> {
    let (name, system) = match name {
        "robot" => ("robot", PresetSystem::Amplitude(robot_spec(params)?)),
        "mips" => ("mips", PresetSystem::Amplitude(mips_spec(params)?)),
        "ou_integrated" => ("ou_integrated", PresetSystem::Integrated(ou_spec(params)?)),
        other => return Err(SystemError::UnknownPreset(other.to_string())),
    };
    Ok(Preset {
        name,
        params: params.clone(),
        system,
    })
}

fn check_speed(f: &SpeedFunction, name: &str) -> Result<(), SystemError> {
    f.validate()
        .map_err(|e| SystemError::InvalidParameter(format!("{name}: {e}")))?;
    if f.dim() != 2 {
        return Err(SystemError::Dimension(format!(
            "{name} must be a function on the plane, got dimension {}",
            f.dim()
        )));
    }
    Ok(())
}

fn trig_squares() -> Result<(TrigPoly, TrigPoly, TrigPoly), SystemError> {
    let c = TrigPoly::cos(1, TAU);
    let s = TrigPoly::sin(1, TAU);
    Ok((c.mul(&c)?, c.mul(&s)?, s.mul(&s)?))
}

/// Field `x ↦ coef · f(x) · (a₁ ∂₁f, a₂ ∂₂f)` style terms, built from a closure.
fn plane_field(f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> VectorField {
    VectorField::new(2, 2, f)
}

fn amplitude_shell(b: TrigDrift, speed: &SpeedFunction, epsilon: f64) -> AmplitudeScalingSpec {
    AmplitudeScalingSpec {
        b,
        v: vec![speed.along_axis(0), speed.along_axis(1)],
        phi: vec![TrigPoly::cos(1, TAU), TrigPoly::sin(1, TAU)],
        theta_map: ScalarField::linear(vec![1.0]),
        driver: DiffusionSpec::standard_wiener(1),
        epsilon,
    }
}

fn robot_spec(p: &PresetParams) -> Result<AmplitudeScalingSpec, SystemError> {
    check_speed(&p.u, "u")?;
    let (cc, cs, ss) = trig_squares()?;
    let k = p.k;
    let (u1, u2, u3) = (p.u.clone(), p.u.clone(), p.u.clone());
    let b = TrigDrift::zero(2)
        .with_term(
            plane_field(move |x, o| {
                let mut g = [0.0; 2];
                u1.gradient_into(x, &mut g);
                o[0] = -k * u1.value(x) * g[0];
                o[1] = 0.0;
            }),
            cc,
        )?
        .with_term(
            plane_field(move |x, o| {
                let mut g = [0.0; 2];
                u2.gradient_into(x, &mut g);
                let uu = u2.value(x);
                o[0] = -k * uu * g[1];
                o[1] = -k * uu * g[0];
            }),
            cs,
        )?
        .with_term(
            plane_field(move |x, o| {
                let mut g = [0.0; 2];
                u3.gradient_into(x, &mut g);
                o[0] = 0.0;
                o[1] = -k * u3.value(x) * g[1];
            }),
            ss,
        )?;
    Ok(amplitude_shell(b, &p.u, p.epsilon))
}

fn mips_spec(p: &PresetParams) -> Result<AmplitudeScalingSpec, SystemError> {
    check_speed(&p.w, "w")?;
    let (cc, cs, ss) = trig_squares()?;
    let kap = p.kappa_mips;
    let (w1, w2, w3) = (p.w.clone(), p.w.clone(), p.w.clone());
    let mut b = TrigDrift::zero(2)
        .with_term(
            plane_field(move |x, o| {
                o[0] = kap * w1.gradient_at(x, 0);
                o[1] = 0.0;
            }),
            cc,
        )?
        .with_term(
            plane_field(move |x, o| {
                let mut g = [0.0; 2];
                w2.gradient_into(x, &mut g);
                o[0] = kap * g[1];
                o[1] = kap * g[0];
            }),
            cs,
        )?;
    if !p.mips_literal {
        b = b.with_term(
            plane_field(move |x, o| {
                o[0] = 0.0;
                o[1] = kap * w3.gradient_at(x, 1);
            }),
            ss,
        )?;
    }
    Ok(amplitude_shell(b, &p.w, p.epsilon))
}

fn ou_spec(p: &PresetParams) -> Result<IntegratedNoiseSpec, SystemError> {
    let lambda = p.lambda;
    let b = TrigDrift::new(
        VectorField::new(1, 1, move |x, o| o[0] = -lambda * x[0])
            .with_jacobian(move |_, j| j[0] = -lambda),
    );
    Ok(IntegratedNoiseSpec::new(
        b,
        vec![VectorField::constant(1, vec![1.0])],
        vec![TrigPoly::cos(1, TAU)],
        ScalarField::linear(vec![1.0]),
        Potential::Quadratic { c: 1.0 }.field(),
        p.epsilon,
    ))
}

impl Preset {
    pub fn dim_x(&self) -> usize {
        match &self.system {
            PresetSystem::Amplitude(s) => s.dim_x(),
            PresetSystem::Integrated(s) => s.dim_x(),
        }
    }

    /// Starting slow state used when none is configured.
    pub fn default_x0(&self) -> Vec<f64> {
        match &self.system {
            PresetSystem::Amplitude(_) => vec![0.5, 0.0],
            PresetSystem::Integrated(_) => vec![0.0],
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Preset, SystemError> {
        let mut p = self.params.clone();
        p.epsilon = epsilon;
        preset(self.name, &p)
    }

    pub fn fast(&self) -> Result<ItoSystem, SystemError> {
        match &self.system {
            PresetSystem::Amplitude(s) => build_amplitude_fast(s),
            PresetSystem::Integrated(s) => build_integrated_noise_fast(s),
        }
    }

    /// Fast state from slow state `x0`, with `M(0) = 0` (and `Z(0) = 0`).
    pub fn fast_state(&self, x0: &[f64]) -> Vec<f64> {
        match &self.system {
            PresetSystem::Amplitude(s) => s.fast_state(x0, &[0.0]),
            PresetSystem::Integrated(s) => s.fast_state(x0, 0.0, 0.0),
        }
    }

    /// Initial law of the fast state for slow state `x0`.
    pub fn fast_initial(&self, x0: &[f64], phase: InitialPhase) -> InitialState {
        let fixed = self.fast_state(x0);
        match (phase, &self.system) {
            (InitialPhase::Zero, _) => InitialState::Fixed(fixed),
            (InitialPhase::Stationary, PresetSystem::Amplitude(s)) => {
                let (i, p) = (x0.len(), s.period());
                InitialState::sampled(move |rng| {
                    let mut st = fixed.clone();
                    st[i] = rng.random::<f64>() * p;
                    st
                })
            }
            (InitialPhase::Stationary, PresetSystem::Integrated(_)) => {
                let i = x0.len();
                InitialState::sampled(move |rng| {
                    let mut st = fixed.clone();
                    st[i] = rng.random::<f64>() * TAU;
                    st[i + 1] =
                        rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
                    st
                })
            }
        }
    }

    pub fn limit(&self) -> Result<LimitSystemSpec, SystemError> {
        match &self.system {
            PresetSystem::Amplitude(s) => build_amplitude_limit(s),
            PresetSystem::Integrated(s) => build_integrated_limit(s, &ou_form_matrix(&s.phi)),
        }
    }

    pub fn limit_state(&self, x0: &[f64]) -> Result<Vec<f64>, SystemError> {
        Ok(self.limit()?.state(x0, &[0.0]))
    }

    /// Symbolic summary of the fast system and its limit.
    pub fn describe(&self) -> String {
        let p = &self.params;
        match self.name {
            "robot" => format!(
                "robot: amplitude scaling, P = 2π, ϑ(m) = m, M = W, Θ = W/ε mod 2π\n\
                 parameters: ε = {}, k = {}, u(x) = {}\n\
                 fast:\n\
                 \x20 dx1/dt = -k u ∂1u cos²Θ - k u ∂2u cosΘ sinΘ + (1/ε) u cosΘ\n\
                 \x20 dx2/dt = -k u ∂1u cosΘ sinΘ - k u ∂2u sin²Θ + (1/ε) u sinΘ\n\
                 limit (Stratonovich, κ ≡ 1, 2 dB = √2 dW since Cov(B) = t·I/2):\n\
                 \x20 dx1 = -(k/2) u ∂1u dt + √2 u ∘ dW1\n\
                 \x20 dx2 = -(k/2) u ∂2u dt + √2 u ∘ dW2\n\
                 limit (Itô):\n\
                 \x20 dxi = (-(k/2) u ∂iu + u ∂iu) dt + √2 u dWi",
                p.epsilon,
                p.k,
                p.u.describe()
            ),
            "mips" => format!(
                "mips: amplitude scaling, P = 2π, ϑ(m) = m, M = W, Θ = W/ε mod 2π\n\
                 parameters: ε = {}, κ = {}, w(x) = {}, mips_literal = {}\n\
                 fast:\n\
                 \x20 dx1/dt = κ ∂1w cos²Θ + κ ∂2w cosΘ sinΘ + (1/ε) w cosΘ\n\
                 \x20 dx2/dt = κ ∂1w cosΘ sinΘ + {} + (1/ε) w sinΘ\n\
                 limit (Itô):\n\
                 \x20 dx1 = (κ/2 ∂1w + w ∂1w) dt + √2 w dW1\n\
                 \x20 dx2 = ({}w ∂2w) dt + √2 w dW2\n\
                 limit (Stratonovich):\n\
                 \x20 dxi = (κ/2) ∂iw dt + √2 w ∘ dWi{}",
                p.epsilon,
                p.kappa_mips,
                p.w.describe(),
                p.mips_literal,
                if p.mips_literal {
                    "0 (term dropped)"
                } else {
                    "κ ∂2w sin²Θ"
                },
                if p.mips_literal { "" } else { "κ/2 ∂2w + " },
                if p.mips_literal {
                    "  (i = 1; for i = 2 the κ term is absent)"
                } else {
                    ""
                },
            ),
            _ => format!(
                "ou_integrated: time scaling by integrated noise\n\
                 parameters: ε = {}, λ = {}\n\
                 fast:\n\
                 \x20 dx = -λ x dt + (1/ε) cos(M) dt\n\
                 \x20 dM = (1/ε²) Z dt  (mod 2π)\n\
                 \x20 dZ = -(1/ε²) Z dt + (1/ε) dW\n\
                 limit:\n\
                 \x20 dx = -λ x dt + √2 dB,  Var(B(1)) = ⟨cos, cos⟩ = √(2eπ) erf(1/√2) / 2",
                p.epsilon, p.lambda
            ),
        }
    }
}

/// The robot limit written out directly:
/// `dx_i = −½k u ∂_iu dt + √2 u ∘ dW_i`, independent `W_1, W_2`.
pub fn printed_robot_limit(k: f64, u: &SpeedFunction) -> StratonovichSystem {
    let u1 = u.clone();
    let drift = VectorField::new(2, 2, move |x, o| {
        let mut g = [0.0; 2];
        u1.gradient_into(x, &mut g);
        let v = u1.value(x);
        o[0] = -0.5 * k * v * g[0];
        o[1] = -0.5 * k * v * g[1];
    });
    let cols = (0..2)
        .map(|a| u.along_axis(a).scaled(2f64.sqrt()))
        .collect();
    StratonovichSystem::new(SdeSystem::new(drift, cols)).expect("valid planar system")
}

/// The MIPS limit in Itô form:
/// `dx_i = (½κ ∂_iw + w ∂_iw) dt + √2 w dW_i`.
pub fn printed_mips_limit(kappa: f64, w: &SpeedFunction) -> ItoSystem {
    let w1 = w.clone();
    let drift = VectorField::new(2, 2, move |x, o| {
        let mut g = [0.0; 2];
        w1.gradient_into(x, &mut g);
        let v = w1.value(x);
        for i in 0..2 {
            o[i] = 0.5 * kappa * g[i] + v * g[i];
        }
    });
    let cols = (0..2)
        .map(|a| w.along_axis(a).scaled(2f64.sqrt()))
        .collect();
    ItoSystem::new(SdeSystem::new(drift, cols)).expect("valid planar system")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_rng;
    use rand::Rng;

    fn affine(c0: f64, s: [f64; 2]) -> SpeedFunction {
        SpeedFunction::Affine {
            offset: c0,
            slope: s.to_vec(),
        }
    }

    #[test]
    fn robot_limit_drift_value() {
        // u = 1 and ∂₁u = 1 at the origin, k = 2 ⇒ −1
        let p = PresetParams {
            k: 2.0,
            u: affine(1.0, [1.0, 0.0]),
            ..Default::default()
        };
        let lim = preset("robot", &p).unwrap().limit().unwrap();
        let st = lim.stratonovich().unwrap();
        let d = st.drift.eval(&[0.0, 0.0, 0.0]);
        assert!((d[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn robot_limit_channels_independent_equal_gain() {
        let lim = preset("robot", &PresetParams::default())
            .unwrap()
            .limit()
            .unwrap();
        let c = lim.cov.matrix();
        assert!((c[(0, 0)] - 0.5).abs() < 1e-15 && (c[(1, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(c[(0, 1)], 0.0);
    }

    #[test]
    fn mips_limit_drift_value() {
        // κ = 2, ∂₁w = 1, w = 1 ⇒ ½·2·1 + 1·1 = 2 (Itô)
        let p = PresetParams {
            kappa_mips: 2.0,
            w: affine(1.0, [1.0, 0.0]),
            ..Default::default()
        };
        let ito = preset("mips", &p).unwrap().limit().unwrap().ito().unwrap();
        let d = ito.drift.eval(&[0.0, 0.0, 0.0]);
        assert!((d[0] - 2.0).abs() < 1e-12, "{d:?}");
        let printed = printed_mips_limit(2.0, &p.w).drift.eval(&[0.0, 0.0]);
        assert!((printed[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mips_literal_drops_term() {
        let p = PresetParams {
            w: affine(1.0, [0.0, 1.0]),
            kappa_mips: 2.0,
            mips_literal: true,
            ..Default::default()
        };
        let lit = preset("mips", &p).unwrap().limit().unwrap();
        assert_eq!(lit.b_bar.eval(&[0.0, 0.0])[1], 0.0);
        let cor = preset(
            "mips",
            &PresetParams {
                mips_literal: false,
                ..p
            },
        )
        .unwrap()
        .limit()
        .unwrap();
        assert!((cor.b_bar.eval(&[0.0, 0.0])[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(
            preset("nope", &PresetParams::default()),
            Err(SystemError::UnknownPreset(_))
        ));
    }

    #[test]
    fn robot_limit_matches_printed_form() {
        let p = PresetParams::default();
        let lim = preset("robot", &p).unwrap().limit().unwrap();
        let ours_s = lim.stratonovich().unwrap();
        let ours_i = lim.ito().unwrap();
        let printed_s = printed_robot_limit(p.k, &p.u);
        let printed_i = crate::sde::strat_to_ito(&printed_s);
        let mut rng = path_rng(4, 0);
        let mut cols = vec![0.0; 3];
        let mut mixed = vec![0.0; 3];
        for _ in 0..100 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let st = [x[0], x[1], rng.random_range(-2.0..2.0)];
            let ds = ours_s.drift.eval(&st);
            let di = ours_i.drift.eval(&st);
            let ps = printed_s.drift.eval(&x);
            let pi = printed_i.drift.eval(&x);
            for i in 0..2 {
                assert!((ds[i] - ps[i]).abs() <= 1e-12);
                assert!((di[i] - pi[i]).abs() <= 1e-12, "{di:?} vs {pi:?}");
            }
            // effective columns Σ_α T_αγ b_α(x)
            let t = ours_s.noise_transform.as_ref().unwrap();
            for g in 0..2 {
                mixed.fill(0.0);
                for (a, c) in ours_s.columns.iter().enumerate() {
                    c.eval_into(&st, &mut cols);
                    for i in 0..3 {
                        mixed[i] += t[(a, g)] * cols[i];
                    }
                }
                let want = printed_s.columns[g].eval(&x);
                for i in 0..2 {
                    assert!((mixed[i] - want[i]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn presets_dimensions_and_finiteness() {
        let mut rng = path_rng(8, 0);
        for name in preset_names() {
            let pr = preset(
                name,
                &PresetParams {
                    epsilon: 1.0,
                    ..Default::default()
                },
            )
            .unwrap();
            let fast = pr.fast().unwrap();
            let lim = pr.limit().unwrap();
            let (ls, li) = (lim.stratonovich().unwrap(), lim.ito().unwrap());
            assert_eq!(fast.dim, pr.fast_state(&pr.default_x0()).len());
            assert_eq!(ls.dim, pr.limit_state(&pr.default_x0()).unwrap().len());
            assert_eq!(lim.dim_x(), pr.dim_x());
            for _ in 0..100 {
                let st: Vec<f64> = (0..ls.dim).map(|_| rng.random_range(-3.0..3.0)).collect();
                assert!(ls.drift.eval(&st).iter().all(|v| v.is_finite()));
                assert!(li.drift.eval(&st).iter().all(|v| v.is_finite()));
                for c in &ls.columns {
                    assert!(c.eval(&st).iter().all(|v| v.is_finite()));
                }
            }
            assert!(!pr.describe().is_empty());
        }
    }

    #[test]
    fn ou_integrated_limit_covariance() {
        let lim = preset("ou_integrated", &PresetParams::default())
            .unwrap()
            .limit()
            .unwrap();
        let want = 0.5
            * (2.0 * std::f64::consts::E * std::f64::consts::PI).sqrt()
            * statrs::function::erf::erf(std::f64::consts::FRAC_1_SQRT_2);
        assert!((lim.cov.matrix()[(0, 0)] - want).abs() < 1e-10);
    }
}
