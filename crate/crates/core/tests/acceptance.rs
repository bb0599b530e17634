//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed; the process
//! exits non-zero if any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use fastosc::forms::{
    form_ergodic_1d, form_integrated, ou_closed_form_k1, ou_integrated_form, semigroup_mc_form,
    GkTable, SchrodingerGrid1D, SemigroupMcConfig, OU_SERIES_MAX_TERMS,
};
use fastosc::lab::{ks_critical, run_ladder, EnsembleReport, LabError, LadderConfig, Observable};
use fastosc::periodic::{gram_matrix, psd_sqrt, TrigPoly};
use fastosc::rng::{path_rng, PathRng};
use fastosc::sde::{
    sample_correlated_increments, simulate_ensemble, EnsembleConfig, InitialState, VectorField,
};
use fastosc::stats::{combined_se, covariance_with_se, mean_se};
use fastosc::systems::{
    preset, DiffusionSpec, InitialPhase, Potential, PresetParams, SpeedFunction,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ou_grid() -> SchrodingerGrid1D {
    SchrodingerGrid1D::new(&Potential::Quadratic { c: 1.0 }.field(), -8.0, 8.0, 4000).unwrap()
}

fn ou_invariant(rng: &mut PathRng) -> f64 {
    Normal::new(0.0, FRAC_1_SQRT_2).unwrap().sample(rng)
}

fn criterion_1() -> Outcome {
    let v = ou_integrated_form(1, 1, OU_SERIES_MAX_TERMS).re;
    let c = ou_closed_form_k1();
    let d = (v - c).abs();
    outcome(
        d < 1e-10,
        format!("series {v:.15}, √(2eπ)·erf(1/√2) = {c:.15}, |Δ| = {d:.1e} (tol 1e-10)"),
    )
}

fn criterion_2() -> Outcome {
    let cos = TrigPoly::cos(1, TAU);
    let series = 0.5 * ou_integrated_form(1, 1, OU_SERIES_MAX_TERMS).re;
    let table = GkTable::for_drivers(&ou_grid(), |z| z, std::slice::from_ref(&cos)).unwrap();
    let grid = form_integrated(&cos, &cos, &table).unwrap().re;
    let rel = (grid - series).abs() / series;

    // (M, Z): dM = Z dt, dZ = −Z dt + dW, started from uniform × N(0, ½)
    let mu = VectorField::new(2, 2, |x, o| {
        o[0] = x[1];
        o[1] = -x[1];
    });
    let driver = DiffusionSpec::new(mu, vec![VectorField::constant(2, vec![0.0, 1.0])]);
    let sampler = |r: &mut PathRng| {
        let m = r.random::<f64>() * TAU;
        vec![m, ou_invariant(r)]
    };
    let cfg = SemigroupMcConfig::new(20.0, 1e-3, 10_000, 2);
    let f = |x: &[f64]| x[0].cos();
    let mc = semigroup_mc_form(&f, &f, &driver, &sampler, &cfg).unwrap();
    let z = (mc.value - series).abs() / mc.stderr;
    outcome(
        rel < 1e-6 && z < 3.0,
        format!(
            "series {series:.10}, grid {grid:.10} (rel {rel:.1e}, tol 1e-6), MC {:.4} ± {:.4} ({z:.2} SE, tol 3)",
            mc.value, mc.stderr
        ),
    )
}

fn criterion_3() -> Outcome {
    let g = gram_matrix(&[TrigPoly::cos(1, TAU), TrigPoly::sin(1, TAU)]).unwrap();
    let half = DMatrix::identity(2, 2) * 0.5;
    let e1 = (g.matrix() - &half).amax();
    let s = psd_sqrt(g.matrix()).unwrap();
    let e2 = (s - DMatrix::identity(2, 2) * FRAC_1_SQRT_2).amax();
    outcome(
        e1 < 1e-12 && e2 < 1e-12,
        format!("max |G − I/2| = {e1:.1e}, max |√G − I/√2| = {e2:.1e} (tol 1e-12)"),
    )
}

fn criterion_4() -> Outcome {
    let f = form_ergodic_1d(|z| z, |z| z, &ou_grid()).unwrap().value;
    let d = (f - 0.5).abs();
    let cfg = SemigroupMcConfig::new(20.0, 1e-3, 10_000, 4);
    let z = |x: &[f64]| x[0];
    let sampler = |r: &mut PathRng| vec![ou_invariant(r)];
    let mc = semigroup_mc_form(
        &z,
        &z,
        &DiffusionSpec::ornstein_uhlenbeck(1),
        &sampler,
        &cfg,
    )
    .unwrap();
    let s = (mc.value - f).abs() / mc.stderr;
    outcome(
        d < 1e-6 && s < 3.0,
        format!(
            "grid {f:.10} (|Δ| {d:.1e}, tol 1e-6), MC {:.4} ± {:.4} ({s:.2} SE, tol 3)",
            mc.value, mc.stderr
        ),
    )
}

fn robot_params() -> PresetParams {
    PresetParams {
        u: SpeedFunction::GaussianBump {
            base: 0.5,
            amplitude: 0.5,
            center: vec![0.0, 0.0],
            width: 1.0,
        },
        k: 1.0,
        ..PresetParams::default()
    }
}

fn criterion_5() -> Outcome {
    let p = preset("robot", &robot_params()).unwrap();
    let lim = p.limit().unwrap();
    let x0 = p.default_x0();
    let init = InitialState::Fixed(p.limit_state(&x0).unwrap());
    let heun = simulate_ensemble(
        &lim.stratonovich().unwrap(),
        &init,
        &EnsembleConfig::new(1.0, 1e-3, 10_000, 51),
    )
    .unwrap();
    let em = simulate_ensemble(
        &lim.ito().unwrap(),
        &init,
        &EnsembleConfig::new(1.0, 1e-3, 10_000, 52),
    )
    .unwrap();
    let xs = |e: &fastosc::sde::PathEnsemble| -> Vec<Vec<f64>> {
        e.completed().map(|(_, x)| x[..2].to_vec()).collect()
    };
    let (a, b) = (xs(&heun), xs(&em));
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        let (ma, sa) = mean_se(&a.iter().map(|x| x[i]).collect::<Vec<_>>());
        let (mb, sb) = mean_se(&b.iter().map(|x| x[i]).collect::<Vec<_>>());
        worst = worst.max((ma - mb).abs() / combined_se(sa, sb));
    }
    let (ca, sa) = covariance_with_se(&a);
    let (cb, sb) = covariance_with_se(&b);
    for i in 0..2 {
        for j in i..2 {
            worst =
                worst.max((ca[(i, j)] - cb[(i, j)]).abs() / combined_se(sa[(i, j)], sb[(i, j)]));
        }
    }
    outcome(
        worst < 3.0 && a.len() == 10_000 && b.len() == 10_000,
        format!("largest mean/covariance gap {worst:.2} combined SE (tol 3); Var(x1) Heun {:.4}, EM {:.4}", ca[(0, 0)], cb[(0, 0)]),
    )
}

fn ladder_config(workers: Option<usize>) -> LadderConfig {
    LadderConfig::new(
        vec![0.4, 0.2, 0.1],
        1.0,
        10_000,
        2024,
        Observable::coordinates(2),
    )
    .with_workers(workers)
}

fn robot_ladder(workers: Option<usize>) -> EnsembleReport {
    let base = preset("robot", &robot_params()).unwrap();
    let x0 = base.default_x0();
    let limit = base.limit().unwrap().stratonovich().unwrap();
    let limit_init = InitialState::Fixed(base.limit_state(&x0).unwrap());
    let builder = |eps: f64| -> Result<_, LabError> {
        let p = base.with_epsilon(eps)?;
        Ok((p.fast()?, p.fast_initial(&x0, InitialPhase::Stationary)))
    };
    run_ladder(&builder, &limit, &limit_init, 2, &ladder_config(workers)).unwrap()
}

fn criterion_6(report: &EnsembleReport) -> Outcome {
    let checks = report.monotone_checks(2.0);
    let monotone = checks.iter().all(|c| c.passes);
    let last = report.rungs.last().unwrap();
    let rel = last.relative_covariance_discrepancy;
    let crit = 1.5 * ks_critical(10_000, 10_000, 0.01);
    let ks = last.discrepancies.iter().map(|d| d.ks).fold(0.0, f64::max);
    let aborted = report.rungs.iter().any(|r| r.aborted);
    let seqs: Vec<String> = checks
        .iter()
        .map(|c| {
            let v: Vec<String> = c.values.iter().map(|v| format!("{v:.4}")).collect();
            format!(
                "{} {} [{}]{}",
                c.observable,
                c.stat,
                v.join(", "),
                if c.passes { "" } else { " ✗" }
            )
        })
        .collect();
    outcome(
        monotone && rel < 0.1 && ks < crit && !aborted,
        format!(
            "discrepancies {}; ε=0.1 rel. cov. {rel:.4} (tol 0.1), max KS {ks:.4} (tol {crit:.4})",
            seqs.join("; ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let s = psd_sqrt(&(DMatrix::identity(2, 2) * 0.5)).unwrap();
    let dt = 1e-2;
    let mut rng = path_rng(7, 0);
    let rows: Vec<Vec<f64>> = (0..1_000_000)
        .map(|_| sample_correlated_increments(&s, dt, &mut rng))
        .collect();
    let (c, se) = covariance_with_se(&rows);
    let target = DMatrix::identity(2, 2) * (0.5 * dt);
    let worst = (0..4)
        .map(|i| (c[i] - target[i]).abs() / se[i])
        .fold(0.0, f64::max);
    outcome(
        worst < 3.0,
        format!("largest |Ĉ − ½I·dt| = {worst:.2} SE (tol 3)"),
    )
}

fn criterion_8() -> Outcome {
    let table = GkTable::build(&ou_grid(), |z| z, (1..=5).flat_map(|k| [k, -k])).unwrap();
    let mut conj: f64 = 0.0;
    let mut re_max = f64::NEG_INFINITY;
    for k in 1..=5 {
        let (a, b) = (table.gbar(k).unwrap(), table.gbar(-k).unwrap());
        conj = conj.max((b - a.conj()).norm());
        re_max = re_max.max(a.re).max(b.re);
    }
    let grid =
        SchrodingerGrid1D::new(&Potential::Quadratic { c: 1.0 }.field(), -8.0, 8.0, 2000).unwrap();
    let mut asym: f64 = 0.0;
    let mut min_diag = f64::INFINITY;
    for s in 0..200u64 {
        let f = random_function(2 * s);
        let h = random_function(2 * s + 1);
        let fh = form_ergodic_1d(&f, &h, &grid).unwrap().value;
        let hf = form_ergodic_1d(&h, &f, &grid).unwrap().value;
        asym = asym.max((fh - hf).abs());
        min_diag = min_diag.min(form_ergodic_1d(&f, &f, &grid).unwrap().value);
    }
    outcome(
        conj <= 1e-10 && re_max <= 1e-10 && asym <= 1e-9 && min_diag >= -1e-9,
        format!(
            "max |ḡ₋ₖ − conj ḡₖ| {conj:.1e}, max Re ḡₖ {re_max:.3}, max asymmetry {asym:.1e}, min ⟨φ,φ⟩ {min_diag:.3e}"
        ),
    )
}

fn random_function(seed: u64) -> impl Fn(f64) -> f64 {
    let mut rng = path_rng(seed, 99);
    let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..3.0)).collect();
    move |z: f64| {
        c[0] * z
            + c[1] * z * z
            + c[2] * (w[0] * z).sin()
            + c[3] * (w[1] * z).cos()
            + c[4] * (-w[2] * z * z).exp()
    }
}

fn criterion_9(reference: &EnsembleReport) -> Outcome {
    let bytes = |r: &EnsembleReport| {
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        (r.to_json(), csv)
    };
    let a = bytes(reference);
    let b = bytes(&robot_ladder(Some(1)));
    let c = bytes(&robot_ladder(Some(3)));
    outcome(
        a == b && a == c,
        format!(
            "report JSON/CSV identical for default pool, 1 and 3 workers ({} CSV bytes)",
            a.1.len()
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |n: usize, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        println!(
            "criterion {n}: {} [{:.1}s] {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failures += 1;
        }
    };
    report(1, &mut criterion_1);
    report(2, &mut criterion_2);
    report(3, &mut criterion_3);
    report(4, &mut criterion_4);
    report(5, &mut criterion_5);
    let ladder = robot_ladder(None);
    report(6, &mut || criterion_6(&ladder));
    report(7, &mut criterion_7);
    report(8, &mut criterion_8);
    report(9, &mut || criterion_9(&ladder));
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
