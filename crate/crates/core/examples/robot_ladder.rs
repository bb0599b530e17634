//! ε-ladder for the robot preset: fast ensembles against the limit ensemble.
//!
//! `cargo run --release --example robot_ladder -- [n_paths] [zero|stationary]`

use fastosc::lab::{run_ladder, LabError, LadderConfig, Observable};
use fastosc::sde::InitialState;
use fastosc::systems::{preset, InitialPhase, PresetParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_paths: usize = args.next().map_or(Ok(2000), |a| a.parse())?;
    let phase = match args.next().as_deref() {
        Some("zero") => InitialPhase::Zero,
        _ => InitialPhase::Stationary,
    };
    let base = preset("robot", &PresetParams::default())?;
    let x0 = base.default_x0();
    let limit = base.limit()?.stratonovich()?;
    let limit_init = InitialState::Fixed(base.limit_state(&x0)?);
    let builder = |eps: f64| -> Result<_, LabError> {
        let p = base.with_epsilon(eps)?;
        Ok((p.fast()?, p.fast_initial(&x0, phase)))
    };
    let cfg = LadderConfig::new(
        vec![0.4, 0.2, 0.1],
        1.0,
        n_paths,
        2024,
        Observable::coordinates(2),
    );
    let report = run_ladder(&builder, &limit, &limit_init, 2, &cfg)?;
    println!(
        "phase {phase:?}, {n_paths} paths, KS 1% critical {:.4}",
        report.ks_critical_1pct
    );
    for r in &report.rungs {
        println!("ε = {}", r.epsilon);
        for d in &r.discrepancies {
            println!(
                "  {}: |Δmean| {:.4} ± {:.4}, |Δvar| {:.4} ± {:.4}, KS {:.4}",
                d.observable, d.mean, d.mean_se, d.variance, d.variance_se, d.ks
            );
        }
        println!(
            "  relative covariance discrepancy {:.4}",
            r.relative_covariance_discrepancy
        );
    }
    for c in report.monotone_checks(2.0) {
        println!(
            "{} {}: {:?} non-increasing within 2 SE: {}",
            c.observable, c.stat, c.values, c.passes
        );
    }
    Ok(())
}
