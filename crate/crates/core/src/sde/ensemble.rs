use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{Scheme, SdeError, Workspace};
use crate::rng::{path_rng, PathRng};

pub type InitialSampler = Arc<dyn Fn(&mut PathRng) -> Vec<f64> + Send + Sync>;

/// Starting point of every path: fixed, or drawn from the path's own stream
/// before the first increment.
#[derive(Clone)]
pub enum InitialState {
    Fixed(Vec<f64>),
    Sampled(InitialSampler),
}

impl InitialState {
    pub fn sampled(f: impl Fn(&mut PathRng) -> Vec<f64> + Send + Sync + 'static) -> Self {
        InitialState::Sampled(Arc::new(f))
    }

    fn draw(&self, rng: &mut PathRng) -> Vec<f64> {
        match self {
            InitialState::Fixed(x) => x.clone(),
            InitialState::Sampled(f) => f(rng),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EnsembleConfig {
    pub t_end: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub workers: Option<usize>,
    pub record_paths: bool,
}

impl EnsembleConfig {
    pub fn new(t_end: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        EnsembleConfig {
            t_end,
            dt,
            n_paths,
            seed,
            workers: None,
            record_paths: false,
        }
    }

    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    pub fn recording(mut self) -> Self {
        self.record_paths = true;
        self
    }

    /// Number of steps `⌈T/dt⌉`; the step actually used is `T/n_steps`.
    pub fn n_steps(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.n_steps() as f64
    }

    fn validate(&self) -> Result<(), SdeError> {
        if !(self.t_end > 0.0) || !(self.dt > 0.0) || self.n_paths == 0 {
            return Err(SdeError::InvalidParameter(format!(
                "T = {}, dt = {}, n_paths = {}",
                self.t_end, self.dt, self.n_paths
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PathStatus {
    Completed,
    BlownUp { step: usize },
    Flagged { step: usize, guard: String },
}

/// Integrates one path, calling `observe(step, state)` for the initial state
/// (step 0) and after every completed step.
pub fn trace_path<S: Scheme>(
    sys: &S,
    mut x: Vec<f64>,
    n_steps: usize,
    dt: f64,
    rng: &mut PathRng,
    mut observe: impl FnMut(usize, &[f64]),
) -> (Vec<f64>, PathStatus) {
    let s = sys.system();
    let d = s.dim;
    let sq = dt.sqrt();
    let mut ws = Workspace::new(d);
    let mut raw = vec![0.0; s.noise_dim()];
    let mut dw = vec![0.0; s.columns.len()];
    let mut next = vec![0.0; d];
    s.wrap(&mut x);
    observe(0, &x);
    for step in 1..=n_steps {
        raw.iter_mut()
            .for_each(|r| *r = rng.sample::<f64, _>(StandardNormal) * sq);
        s.transform_increments(&raw, &mut dw);
        sys.step_into(&x, dt, &dw, &mut ws, &mut next);
        if !next.iter().all(|v| v.is_finite()) {
            return (x, PathStatus::BlownUp { step });
        }
        s.wrap(&mut next);
        std::mem::swap(&mut x, &mut next);
        if let Some(g) = &s.guard {
            if !(g.check)(&x) {
                return (
                    x,
                    PathStatus::Flagged {
                        step,
                        guard: g.name.clone(),
                    },
                );
            }
        }
        observe(step, &x);
    }
    (x, PathStatus::Completed)
}

/// Order-preserving map over `0..n` on `workers` threads (`Some(1)` runs inline).
pub fn parallel_map<T, F>(n: usize, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match workers {
        Some(1) => (0..n).map(f).collect(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("thread pool")
            .install(|| (0..n).into_par_iter().map(&f).collect()),
        None => (0..n).into_par_iter().map(f).collect(),
    }
}

/// Terminal states (and optionally full paths) of independent paths.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub dim: usize,
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub terminal: Vec<Vec<f64>>,
    pub status: Vec<PathStatus>,
    pub paths: Option<Vec<Vec<Vec<f64>>>>,
}

/// Simulates `n_paths` paths; path `i` uses stream `(seed, i)` only.
pub fn simulate_ensemble<S: Scheme>(
    sys: &S,
    init: &InitialState,
    cfg: &EnsembleConfig,
) -> Result<PathEnsemble, SdeError> {
    cfg.validate()?;
    let n_steps = cfg.n_steps();
    let dt = cfg.step();
    let dim = sys.system().dim;
    let record = cfg.record_paths;
    let results = parallel_map(cfg.n_paths, cfg.workers, |i| {
        let mut rng = path_rng(cfg.seed, i as u64);
        let x0 = init.draw(&mut rng);
        let mut path = Vec::new();
        let (x, status) = trace_path(sys, x0, n_steps, dt, &mut rng, |_, s| {
            if record {
                path.push(s.to_vec());
            }
        });
        (x, status, path)
    });
    let mut terminal = Vec::with_capacity(cfg.n_paths);
    let mut status = Vec::with_capacity(cfg.n_paths);
    let mut paths = record.then(Vec::new);
    for (x, s, p) in results {
        if x.len() != dim {
            return Err(SdeError::Dimension(format!(
                "initial state has {} entries, system dim {dim}",
                x.len()
            )));
        }
        terminal.push(x);
        status.push(s);
        if let Some(ps) = paths.as_mut() {
            ps.push(p);
        }
    }
    Ok(PathEnsemble {
        dim,
        n_paths: cfg.n_paths,
        n_steps,
        dt,
        seed: cfg.seed,
        terminal,
        status,
        paths,
    })
}

#[derive(Serialize)]
struct PathRecord<'a> {
    path_id: usize,
    step: usize,
    t: f64,
    x: &'a [f64],
}

impl PathEnsemble {
    /// `(path_id, terminal state)` of paths that finished without blow-up or flag.
    pub fn completed(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.terminal
            .iter()
            .zip(&self.status)
            .enumerate()
            .filter(|(_, (_, s))| **s == PathStatus::Completed)
            .map(|(i, (x, _))| (i, x.as_slice()))
    }

    pub fn completed_states(&self) -> Vec<Vec<f64>> {
        self.completed().map(|(_, x)| x.to_vec()).collect()
    }

    pub fn blow_ups(&self) -> usize {
        self.status
            .iter()
            .filter(|s| matches!(s, PathStatus::BlownUp { .. }))
            .count()
    }

    pub fn flagged(&self) -> usize {
        self.status
            .iter()
            .filter(|s| matches!(s, PathStatus::Flagged { .. }))
            .count()
    }

    /// Fraction of paths dropped from statistics (blow-ups plus flagged).
    pub fn drop_rate(&self) -> f64 {
        (self.blow_ups() + self.flagged()) as f64 / self.n_paths as f64
    }

    /// CSV `path_id,x_1,...,x_d`, one row per completed path.
    pub fn write_terminal_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["path_id".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x_{i}")));
        wr.write_record(&header)?;
        for (i, x) in self.completed() {
            let mut rec = vec![i.to_string()];
            rec.extend(x.iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// JSONL with one `{path_id, step, t, x}` record per recorded state.
    pub fn write_paths_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let Some(paths) = &self.paths else {
            return Ok(());
        };
        for (i, p) in paths.iter().enumerate() {
            for (step, x) in p.iter().enumerate() {
                let rec = PathRecord {
                    path_id: i,
                    step,
                    t: step as f64 * self.dt,
                    x,
                };
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}
