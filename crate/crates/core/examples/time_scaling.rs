//! Ergodic time scaling: `dX = −X dt + (1/ε) M(t/ε²) dt` with `M` an OU
//! process converges to `dX = −X dt + √2 dB`, `Var B(1) = ⟨m, m⟩ = ½`.

use fastosc::forms::{form_ergodic_1d, SchrodingerGrid1D};
use fastosc::sde::{simulate_ensemble, EnsembleConfig, InitialState, ScalarField, VectorField};
use fastosc::stats::mean_se;
use fastosc::systems::{
    build_time_fast, build_time_limit, DiffusionSpec, FieldDrift, Potential, TimeScalingSpec,
};
use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t_end: f64 = 2.0;
    let n_paths = 4000;
    let grid = SchrodingerGrid1D::new(&Potential::Quadratic { c: 1.0 }.field(), -8.0, 8.0, 4000)?;
    let form = form_ergodic_1d(|z| z, |z| z, &grid)?.value;
    // noise rate 2·⟨m, m⟩ against unit mean reversion
    let exact = form * (1.0 - (-2.0 * t_end).exp());
    println!("⟨m, m⟩ = {form:.8}; limit Var X(T) = {exact:.5}");

    let spec = |eps: f64| TimeScalingSpec {
        b: FieldDrift::new(VectorField::linear(-DMatrix::identity(1, 1))),
        v: vec![VectorField::constant(1, vec![1.0])],
        phi: vec![ScalarField::linear(vec![1.0])],
        driver: DiffusionSpec::ornstein_uhlenbeck(1),
        epsilon: eps,
    };

    let expectation = |f: &ScalarField| grid.expectation(|z| f.eval(&[z]));
    let limit = build_time_limit(&spec(1.0), &DMatrix::from_element(1, 1, form), &expectation)?;
    let ens = simulate_ensemble(
        &limit.ito()?,
        &InitialState::Fixed(vec![0.0]),
        &EnsembleConfig::new(t_end, 1e-3, n_paths, 3),
    )?;
    report("limit", &ens.completed().map(|(_, x)| x[0]).collect::<Vec<_>>());

    for eps in [0.4, 0.2, 0.1] {
        let fast = build_time_fast(&spec(eps))?;
        let init = InitialState::sampled(|r| vec![0.0, Normal::new(0.0, 0.5f64.sqrt()).unwrap().sample(r)]);
        let dt = (0.1 * eps * eps).min(t_end / 100.0);
        let ens = simulate_ensemble(&fast, &init, &EnsembleConfig::new(t_end, dt, n_paths, 4))?;
        report(&format!("ε = {eps}"), &ens.completed().map(|(_, x)| x[0]).collect::<Vec<_>>());
    }
    Ok(())
}

fn report(label: &str, xs: &[f64]) {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let (m, se) = mean_se(&sq);
    println!("{label:>8}: Var X(T) ≈ {m:.4} ± {se:.4}");
}
