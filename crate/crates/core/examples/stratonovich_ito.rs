//! The robot limit integrated two ways: Heun on the Stratonovich form and
//! Euler–Maruyama on the converted Itô form, plus the hand-written limit.

use fastosc::sde::{simulate_ensemble, EnsembleConfig, InitialState, PathEnsemble};
use fastosc::stats::{combined_se, mean_se};
use fastosc::systems::{preset, printed_robot_limit, PresetParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_paths = std::env::args().nth(1).map_or(Ok(4000), |s| s.parse())?;
    let params = PresetParams::default();
    let p = preset("robot", &params)?;
    let lim = p.limit()?;
    let x0 = p.default_x0();
    let cfg = |seed| EnsembleConfig::new(1.0, 1e-3, n_paths, seed);

    let init = InitialState::Fixed(p.limit_state(&x0)?);
    let heun = simulate_ensemble(&lim.stratonovich()?, &init, &cfg(1))?;
    let em = simulate_ensemble(&lim.ito()?, &init, &cfg(2))?;
    let printed = simulate_ensemble(
        &printed_robot_limit(params.k, &params.u),
        &InitialState::Fixed(x0.clone()),
        &cfg(3),
    )?;

    println!("{:>10} {:>18} {:>18} {:>18}", "", "Heun (Strat.)", "EM (Itô)", "printed limit");
    for i in 0..2 {
        let cells: Vec<String> = [&heun, &em, &printed]
            .iter()
            .map(|e| {
                let (m, se) = mean_se(&coord(e, i));
                format!("{m:>9.4} ± {se:.4}")
            })
            .collect();
        println!("{:>10} {}", format!("E x{}", i + 1), cells.join(" "));
    }
    let (a, sa) = mean_se(&coord(&heun, 0));
    let (b, sb) = mean_se(&coord(&em, 0));
    println!("Heun vs EM on E x1: {:.2} combined SE", (a - b).abs() / combined_se(sa, sb));
    Ok(())
}

fn coord(e: &PathEnsemble, i: usize) -> Vec<f64> {
    e.completed().map(|(_, x)| x[i]).collect()
}
