//! Command-line front end: argument parsing and subcommand dispatch.

use std::f64::consts::TAU;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use crate::config::{
    driver_labels, polynomial, ConfigError, FormMethod, RunConfig, Section, Which,
};
use crate::forms::{
    amplitude_wiener_special_case, form_ergodic_1d, integrated_covariance, ou_closed_form_k1,
    ou_form_matrix, ou_integrated_form, semigroup_mc_form, write_form_csv, FormRow, GkTable,
    SchrodingerGrid1D, SemigroupMcConfig, OU_SERIES_MAX_TERMS,
};
use crate::lab::{run_ladder, LabError};
use crate::periodic::{gram_matrix, TrigPoly};
use crate::rng::PathRng;
use crate::sde::{simulate_ensemble, EnsembleConfig, InitialState, VectorField};
use crate::systems::{preset, preset_names, DiffusionSpec, PresetParams};
use crate::Error;

#[derive(Debug, Parser)]
#[command(
    name = "fastosc",
    version,
    about = "Fast-oscillation limits of SDE systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration (defaults are used when omitted)
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    pub workers: Option<usize>,
    /// Validate the configuration and exit
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the fast system or its limit and dump terminal states
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Gram matrix of trigonometric drivers and its PSD square root
    Covariance {
        #[command(flatten)]
        common: Common,
    },
    /// Covariance forms by series, grid solves and Monte Carlo
    Form {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: Option<FormMethod>,
        /// Frequency k for a single ou-series value
        #[arg(long, allow_negative_numbers = true)]
        k: Option<i64>,
        /// Frequency l (defaults to k)
        #[arg(long, allow_negative_numbers = true)]
        l: Option<i64>,
    },
    /// ε-ladder comparison of fast ensembles with the limit ensemble
    Converge {
        #[command(flatten)]
        common: Common,
    },
    /// List presets or describe one
    Preset {
        /// `list` or a preset name (lists when omitted)
        #[arg(default_value = "list")]
        name: String,
        #[arg(long)]
        describe: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn runtime(e: impl Into<Error>) -> CliError {
    CliError::Runtime(e.into().to_string())
}

/// Runs a parsed command; returns the lines to print on success.
pub fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    match cli.command {
        Command::Preset { name, describe } => preset_cmd(&name, describe),
        Command::Simulate { common } => {
            let cfg = prepare(&common, Section::Simulate, |_| {})?;
            if common.dry_run {
                return Ok(vec![dry_run_line("simulate", &cfg)]);
            }
            simulate_cmd(&cfg)
        }
        Command::Covariance { common } => {
            let cfg = prepare(&common, Section::Covariance, |_| {})?;
            if common.dry_run {
                return Ok(vec![dry_run_line("covariance", &cfg)]);
            }
            covariance_cmd(&cfg)
        }
        Command::Form {
            common,
            method,
            k,
            l,
        } => {
            let cfg = prepare(&common, Section::Form, |c| {
                if let Some(m) = method {
                    c.form.method = m;
                }
                if k.is_some() {
                    c.form.k = k;
                    c.form.l = l;
                } else if l.is_some() {
                    c.form.l = l;
                }
            })?;
            if common.dry_run {
                return Ok(vec![dry_run_line("form", &cfg)]);
            }
            form_cmd(&cfg)
        }
        Command::Converge { common } => {
            let cfg = prepare(&common, Section::Converge, |_| {})?;
            if common.dry_run {
                return Ok(vec![dry_run_line("converge", &cfg)]);
            }
            converge_cmd(&cfg)
        }
    }
}

fn prepare(
    common: &Common,
    section: Section,
    overrides: impl FnOnce(&mut RunConfig),
) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = d.clone();
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    overrides(&mut cfg);
    cfg.validate(section)?;
    Ok(cfg)
}

fn dry_run_line(cmd: &str, cfg: &RunConfig) -> String {
    format!("{cmd}: configuration valid (seed {}, dry run)", cfg.seed)
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<BufWriter<File>, CliError> {
    let p = cfg.out_dir.join(name);
    Ok(BufWriter::new(File::create(&p).map_err(runtime)?))
}

fn start_output(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out_dir).map_err(runtime)?;
    fs::write(cfg.out_dir.join("config.toml"), cfg.to_toml()).map_err(runtime)
}

fn preset_cmd(name: &str, describe: bool) -> Result<Vec<String>, CliError> {
    if name == "list" {
        return Ok(preset_names().iter().map(|s| s.to_string()).collect());
    }
    let p = preset(name, &PresetParams::default()).map_err(|e| CliError::Config(e.to_string()))?;
    if describe {
        Ok(p.describe().lines().map(str::to_string).collect())
    } else {
        Ok(vec![format!(
            "{}: d_X = {}, default x0 = {:?}",
            p.name,
            p.dim_x(),
            p.default_x0()
        )])
    }
}

fn simulate_cmd(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let s = &cfg.simulate;
    let p = preset(&cfg.system.preset, &cfg.system.params).map_err(runtime)?;
    let x0 = cfg.system.x0.clone().unwrap_or_else(|| p.default_x0());
    let eps = cfg.system.params.epsilon;
    let (ens, label) = match s.which {
        Which::Fast => {
            let dt = s.dt.unwrap_or((s.c_dt * eps * eps).min(s.t_end / 100.0));
            let mut ec =
                EnsembleConfig::new(s.t_end, dt, s.n_paths, cfg.seed).with_workers(cfg.workers);
            ec.record_paths = s.record_paths;
            let sys = p.fast().map_err(runtime)?;
            let ens = simulate_ensemble(&sys, &p.fast_initial(&x0, cfg.system.initial_phase), &ec)
                .map_err(runtime)?;
            (ens, "fast")
        }
        Which::Limit => {
            let dt = s.dt.unwrap_or(s.dt_limit);
            let mut ec =
                EnsembleConfig::new(s.t_end, dt, s.n_paths, cfg.seed).with_workers(cfg.workers);
            ec.record_paths = s.record_paths;
            let sys = p.limit().and_then(|l| l.stratonovich()).map_err(runtime)?;
            let init = p.limit_state(&x0).map_err(runtime)?;
            let ens = simulate_ensemble(&sys, &InitialState::Fixed(init), &ec).map_err(runtime)?;
            (ens, "limit")
        }
    };
    start_output(cfg)?;
    ens.write_terminal_csv(out_file(cfg, "terminal.csv")?)
        .map_err(runtime)?;
    if s.record_paths {
        ens.write_paths_jsonl(out_file(cfg, "paths.jsonl")?)
            .map_err(runtime)?;
    }
    let dropped = ens.blow_ups() + ens.flagged();
    let line = format!(
        "simulate: preset {} ({label}), ε = {eps}, {} paths × {} steps of {:.3e}, {} dropped, seed {} -> {}",
        p.name,
        ens.n_paths,
        ens.n_steps,
        ens.dt,
        dropped,
        cfg.seed,
        cfg.out_dir.display()
    );
    if ens.drop_rate() > 0.5 {
        return Err(CliError::Runtime(format!(
            "{line}\nmore than half of the paths were dropped"
        )));
    }
    Ok(vec![line])
}

fn matrix_rows(
    m: &nalgebra::DMatrix<f64>,
    method: &str,
    se: Option<&nalgebra::DMatrix<f64>>,
) -> Vec<FormRow> {
    let mut rows = Vec::new();
    for a in 0..m.nrows() {
        for b in 0..m.ncols() {
            rows.push(FormRow {
                alpha: a + 1,
                beta: b + 1,
                value: m[(a, b)],
                method: method.into(),
                stderr: se.map_or(0.0, |s| s[(a, b)]),
            });
        }
    }
    rows
}

fn table(rows: &[FormRow]) -> Vec<String> {
    let mut out = vec![format!(
        "{:>5} {:>5} {:>22} {:>14} {}",
        "alpha", "beta", "value", "stderr", "method"
    )];
    out.extend(rows.iter().map(|r| {
        format!(
            "{:>5} {:>5} {:>22.15} {:>14.3e} {}",
            r.alpha, r.beta, r.value, r.stderr, r.method
        )
    }));
    out
}

fn covariance_cmd(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let c = &cfg.covariance;
    let drivers: Vec<TrigPoly> = c
        .drivers
        .iter()
        .map(|d| d.to_trig(c.period))
        .collect::<Result<_, _>>()
        .map_err(CliError::Config)?;
    let form = if c.antiderivatives {
        amplitude_wiener_special_case(&drivers)
    } else {
        gram_matrix(&drivers)
    }
    .map_err(runtime)?;
    let sqrt = form.sqrt();
    let method = if c.antiderivatives {
        "gram-antiderivative"
    } else {
        "gram"
    };
    let mut rows = matrix_rows(form.matrix(), method, None);
    rows.extend(matrix_rows(&sqrt, "sqrt", None));
    start_output(cfg)?;
    write_form_csv(&rows, out_file(cfg, "covariance.csv")?).map_err(runtime)?;
    let mut out = table(&rows);
    out.push(format!(
        "covariance: {} drivers [{}], seed {} -> {}",
        drivers.len(),
        driver_labels(&c.drivers).join(", "),
        cfg.seed,
        cfg.out_dir.display()
    ));
    Ok(out)
}

fn integrated_driver(rho: Vec<f64>, u: &crate::sde::ScalarField) -> DiffusionSpec {
    let u = u.clone();
    let mu = VectorField::new(2, 2, move |x, o| {
        o[0] = polynomial(&rho, x[1]);
        o[1] = -u.gradient(&[x[1]])[0];
    });
    DiffusionSpec::new(mu, vec![VectorField::constant(2, vec![0.0, 1.0])])
}

fn form_cmd(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let f = &cfg.form;
    let mut out = Vec::new();
    let mut rows: Vec<FormRow> = Vec::new();
    let want = |m: FormMethod| f.method == m || f.method == FormMethod::All;
    let drivers: Vec<TrigPoly> = f
        .drivers
        .iter()
        .map(|d| d.to_trig(TAU))
        .collect::<Result<_, _>>()
        .map_err(CliError::Config)?;

    if want(FormMethod::OuSeries) {
        if let Some(k) = f.k {
            let l = f.l.unwrap_or(k);
            let v = ou_integrated_form(k, l, OU_SERIES_MAX_TERMS);
            out.push(format!(
                "ou-series ⟨e^(i{l}m), e^(i{k}m)⟩ = {:.15} {:+.3e}i",
                v.re, v.im
            ));
            rows.push(FormRow {
                alpha: 1,
                beta: 1,
                value: v.re,
                method: format!("ou-series(k={k};l={l})"),
                stderr: 0.0,
            });
            if k == 1 && l == 1 {
                out.push(format!(
                    "closed form √(2eπ)·erf(1/√2) = {:.15}",
                    ou_closed_form_k1()
                ));
            }
        } else if !drivers.is_empty() {
            if !f.is_ou_case() && f.method == FormMethod::All {
                out.push("ou-series skipped: ρ(z) = z with U = z²/2 required".into());
            } else {
                rows.extend(matrix_rows(&ou_form_matrix(&drivers), "ou-series", None));
            }
        }
    }

    let needs_grid =
        want(FormMethod::Ergodic) || want(FormMethod::Integrated) || want(FormMethod::Mc);
    let single_value = f.k.is_some() && f.method == FormMethod::OuSeries;
    if needs_grid && !single_value {
        let u = f.potential.field();
        let grid =
            SchrodingerGrid1D::new(&u, f.grid.z_min, f.grid.z_max, f.grid.n).map_err(runtime)?;
        let rho = f.rho.clone();
        let mut gk = None;
        if want(FormMethod::Integrated) && !drivers.is_empty() {
            let table =
                GkTable::for_drivers(&grid, |z| polynomial(&rho, z), &drivers).map_err(runtime)?;
            let m = integrated_covariance(&drivers, &table).map_err(runtime)?;
            rows.extend(matrix_rows(&m, "integrated", None));
            gk = Some(table);
        }
        if want(FormMethod::Ergodic) {
            let e = &f.ergodic_drivers;
            for (a, pa) in e.iter().enumerate() {
                for (b, pb) in e.iter().enumerate() {
                    let v = form_ergodic_1d(|z| polynomial(pa, z), |z| polynomial(pb, z), &grid)
                        .map_err(runtime)?;
                    rows.push(FormRow {
                        alpha: a + 1,
                        beta: b + 1,
                        value: v.value,
                        method: "ergodic".into(),
                        stderr: 0.0,
                    });
                }
            }
        }
        if want(FormMethod::Mc) {
            let mc = SemigroupMcConfig::new(f.mc.t_max, f.mc.dt, f.mc.n_paths, cfg.seed)
                .with_workers(cfg.workers);
            let g = &grid;
            if !drivers.is_empty() {
                let spec = integrated_driver(rho.clone(), &u);
                let sampler = |r: &mut PathRng| {
                    let m = r.random::<f64>() * TAU;
                    vec![m, g.sample_invariant(r)]
                };
                for (a, pa) in drivers.iter().enumerate() {
                    for (b, pb) in drivers.iter().enumerate() {
                        let est = semigroup_mc_form(
                            &|x: &[f64]| pa.eval(x[0]),
                            &|x: &[f64]| pb.eval(x[0]),
                            &spec,
                            &sampler,
                            &mc,
                        )
                        .map_err(runtime)?;
                        rows.push(FormRow {
                            alpha: a + 1,
                            beta: b + 1,
                            value: est.value,
                            method: "integrated-mc".into(),
                            stderr: est.stderr,
                        });
                    }
                }
            }
            let spec = DiffusionSpec::gradient(&u);
            let sampler = |r: &mut PathRng| vec![g.sample_invariant(r)];
            let e = &f.ergodic_drivers;
            for (a, pa) in e.iter().enumerate() {
                for (b, pb) in e.iter().enumerate() {
                    let est = semigroup_mc_form(
                        &|x: &[f64]| polynomial(pa, x[0]),
                        &|x: &[f64]| polynomial(pb, x[0]),
                        &spec,
                        &sampler,
                        &mc,
                    )
                    .map_err(runtime)?;
                    rows.push(FormRow {
                        alpha: a + 1,
                        beta: b + 1,
                        value: est.value,
                        method: "ergodic-mc".into(),
                        stderr: est.stderr,
                    });
                }
            }
        }
        start_output(cfg)?;
        if let Some(t) = gk {
            t.write_csv(out_file(cfg, "gk.csv")?).map_err(runtime)?;
        }
    } else {
        start_output(cfg)?;
    }
    write_form_csv(&rows, out_file(cfg, "form.csv")?).map_err(runtime)?;
    if !rows.is_empty() {
        out.extend(table(&rows));
    }
    out.push(format!(
        "form: method {:?}, {} rows, seed {} -> {}",
        f.method,
        rows.len(),
        cfg.seed,
        cfg.out_dir.display()
    ));
    Ok(out)
}

fn converge_cmd(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let base = preset(&cfg.system.preset, &cfg.system.params).map_err(runtime)?;
    let x0 = cfg.system.x0.clone().unwrap_or_else(|| base.default_x0());
    let limit = base
        .limit()
        .and_then(|l| l.stratonovich())
        .map_err(runtime)?;
    let limit_init = InitialState::Fixed(base.limit_state(&x0).map_err(runtime)?);
    let builder = |eps: f64| -> Result<_, LabError> {
        let p = base.with_epsilon(eps)?;
        Ok((p.fast()?, p.fast_initial(&x0, cfg.system.initial_phase)))
    };
    let ladder = cfg.ladder();
    let report =
        run_ladder(&builder, &limit, &limit_init, base.dim_x(), &ladder).map_err(runtime)?;
    start_output(cfg)?;
    report
        .write_csv(out_file(cfg, "report.csv")?)
        .map_err(runtime)?;
    fs::write(cfg.out_dir.join("report.json"), report.to_json()).map_err(runtime)?;
    for r in &report.rungs {
        if let Some(ens) = &r.ensemble {
            ens.write_terminal_csv(out_file(cfg, &format!("terminal_eps{}.csv", r.epsilon))?)
                .map_err(runtime)?;
        }
    }
    let mut out: Vec<String> = report
        .rungs
        .iter()
        .map(|r| {
            if r.aborted {
                format!("ε = {}: aborted, {:.1}% of paths dropped", r.epsilon, 100.0 * r.drop_rate)
            } else {
                let ks = r.discrepancies.iter().map(|d| d.ks).fold(0.0, f64::max);
                format!(
                    "ε = {}: relative covariance discrepancy {:.4}, max KS {:.4} (1% critical {:.4})",
                    r.epsilon, r.relative_covariance_discrepancy, ks, report.ks_critical_1pct
                )
            }
        })
        .collect();
    let line = format!(
        "converge: preset {}, ε = {:?}, {} paths, seed {} -> {}",
        base.name,
        ladder.epsilons,
        ladder.n_paths,
        cfg.seed,
        cfg.out_dir.display()
    );
    if report.rungs.iter().any(|r| r.aborted) {
        out.push(line);
        return Err(CliError::Runtime(format!(
            "{}\nrung aborted: more than half of the paths blew up",
            out.join("\n")
        )));
    }
    out.push(line);
    Ok(out)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
