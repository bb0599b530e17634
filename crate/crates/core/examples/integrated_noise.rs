//! Time scaling by integrated noise on the `ou_integrated` preset: the slow
//! coordinate converges to an OU process whose noise intensity is the
//! covariance form `⟨cos, cos⟩`.

use fastosc::forms::{ou_integrated_form, OU_SERIES_MAX_TERMS};
use fastosc::sde::{simulate_ensemble, EnsembleConfig};
use fastosc::stats::mean_se;
use fastosc::systems::{preset, InitialPhase, PresetParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_paths = std::env::args().nth(1).map_or(Ok(2000), |s| s.parse())?;
    let t_end = 1.0;
    let base = preset("ou_integrated", &PresetParams::default())?;
    println!("{}\n", base.describe());
    let x0 = base.default_x0();

    // λ = 0: X(T) − x0 = √2 B(T)
    let form = ou_integrated_form(1, 1, OU_SERIES_MAX_TERMS).re / 2.0;
    println!("limit variance 2⟨cos, cos⟩T = {:.4}", 2.0 * form * t_end);

    let lim = base.limit()?;
    let limit_init = fastosc::sde::InitialState::Fixed(base.limit_state(&x0)?);
    let ens = simulate_ensemble(&lim.ito()?, &limit_init, &EnsembleConfig::new(t_end, 1e-3, n_paths, 1))?;
    report("limit", &ens.completed().map(|(_, x)| x[0]).collect::<Vec<_>>());

    for eps in [0.4, 0.2, 0.1] {
        let p = base.with_epsilon(eps)?;
        let dt = (0.1 * eps * eps).min(t_end / 100.0);
        let ens = simulate_ensemble(
            &p.fast()?,
            &p.fast_initial(&x0, InitialPhase::Stationary),
            &EnsembleConfig::new(t_end, dt, n_paths, 2),
        )?;
        report(&format!("ε = {eps}"), &ens.completed().map(|(_, x)| x[0]).collect::<Vec<_>>());
    }
    Ok(())
}

fn report(label: &str, xs: &[f64]) {
    let (m, se) = mean_se(xs);
    let centred: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let (v, vse) = mean_se(&centred);
    println!("{label:>8}: mean {m:.4} ± {se:.4}, variance {v:.4} ± {vse:.4}");
}
