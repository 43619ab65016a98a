use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetConfig, ExperimentConfig, ExperimentKind};
use super::data::{
    add_noise, exact_rof_minimizer, gen_lemniscate, gen_piecewise_signal, gen_sphere_image, gen_spd_image,
    lemniscate_center, sphere_signal_setup, spd_signal_setup,
};
use super::ExperimentError;
use crate::manifolds::{Manifold, ManifoldKind, Spd3, Sphere2};
use crate::small::{Mat3, Vec3};
use crate::solvers::{lrcpa, pd_rssn, ResidualSchedule, SolverTrace, Stage, WarmStart};
use crate::tvmodel::{PrimalImage, TvParams, TvProblem};

/// Manifold-specific pieces of the synthetic data sets.
trait DataManifold: Manifold<f64> {
    fn piecewise() -> (Self::Point, Self::Point, Self::Point);
    fn image(n: usize) -> PrimalImage<f64, Self>;
    fn image_base() -> Self::Point;
    fn lemniscate(n: usize) -> Option<(PrimalImage<f64, Self>, Self::Point)>;
    fn point_from(v: &[f64]) -> Self::Point;
}

impl DataManifold for Sphere2 {
    fn piecewise() -> (Vec3<f64>, Vec3<f64>, Vec3<f64>) {
        sphere_signal_setup()
    }
    fn image(n: usize) -> PrimalImage<f64, Self> {
        gen_sphere_image(n)
    }
    fn image_base() -> Vec3<f64> {
        Vec3::unit(2)
    }
    fn lemniscate(n: usize) -> Option<(PrimalImage<f64, Self>, Vec3<f64>)> {
        Some((gen_lemniscate(n), lemniscate_center()))
    }
    fn point_from(v: &[f64]) -> Vec3<f64> {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl DataManifold for Spd3 {
    fn piecewise() -> (Mat3<f64>, Mat3<f64>, Mat3<f64>) {
        spd_signal_setup()
    }
    fn image(n: usize) -> PrimalImage<f64, Self> {
        gen_spd_image(n)
    }
    fn image_base() -> Mat3<f64> {
        Mat3::identity()
    }
    fn lemniscate(_: usize) -> Option<(PrimalImage<f64, Self>, Mat3<f64>)> {
        None
    }
    fn point_from(v: &[f64]) -> Mat3<f64> {
        let mut a = [0.0; 9];
        a.copy_from_slice(v);
        Mat3::from(a)
    }
}

/// Data image, default base point and optional reference solution for one
/// size of the data set.
struct Instance<M: Manifold<f64>> {
    size: usize,
    data: PrimalImage<f64, M>,
    base: M::Point,
    reference: Option<PrimalImage<f64, M>>,
}

fn instances<M: DataManifold>(cfg: &ExperimentConfig) -> Result<Vec<Instance<M>>, ExperimentError> {
    let noise = cfg.dataset.noise();
    let noisy = |img: PrimalImage<f64, M>| {
        if noise > 0.0 {
            add_noise::<f64, M>(&img, noise, cfg.seed)
        } else {
            img
        }
    };
    match &cfg.dataset {
        DatasetConfig::Piecewise { ell } => {
            let (p1, p2, m) = M::piecewise();
            let reference = exact_rof_minimizer::<f64, M>(&p1, &p2, *ell, cfg.model.alpha)
                .map_err(|e| ExperimentError::Config(format!("reference solution: {e}")))?;
            Ok(vec![Instance {
                size: 2 * ell,
                data: gen_piecewise_signal::<f64, M>(&p1, &p2, *ell),
                base: m,
                reference: Some(reference),
            }])
        }
        DatasetConfig::Image { sizes, .. } => Ok(sizes
            .iter()
            .map(|&n| Instance {
                size: n,
                data: noisy(M::image(n)),
                base: M::image_base(),
                reference: None,
            })
            .collect()),
        DatasetConfig::Lemniscate { points, .. } => {
            let (img, center) = M::lemniscate(*points)
                .ok_or_else(|| ExperimentError::Config("the lemniscate lives on the sphere".into()))?;
            Ok(vec![Instance {
                size: *points,
                data: noisy(img),
                base: center,
                reference: None,
            }])
        }
    }
}

fn problem<M: DataManifold>(cfg: &ExperimentConfig, inst: &Instance<M>) -> Result<TvProblem<f64, M>, ExperimentError> {
    let m = &cfg.model;
    let base = m.base_point.as_deref().map_or(inst.base, M::point_from);
    let params = TvParams {
        alpha: m.alpha,
        beta: m.beta,
        sigma: m.sigma,
        tau: m.tau,
        q: m.q,
        base_point: base,
    };
    TvProblem::new(inst.data.clone(), params).map_err(|e| ExperimentError::Config(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    PdRssn,
    Lrcpa,
}

/// First row of a trace at or below a relative error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetHit {
    pub eps_rel: f64,
    pub stage: Option<Stage>,
    /// Iteration index within `stage`.
    pub iter: Option<usize>,
    pub cpu_seconds: Option<f64>,
}

/// Outcome of one solver run, computed from its trace alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub solver: SolverKind,
    pub size: usize,
    pub warm_start: Option<WarmStart>,
    pub schedule: Option<ResidualSchedule<f64>>,
    pub presteps: usize,
    pub newton_iters: usize,
    pub lrcpa_iters: usize,
    pub final_x_norm: f64,
    pub final_eps_rel: f64,
    pub final_cost: f64,
    pub final_dist_ref: Option<f64>,
    /// Final relative error at or below the stopping tolerance, or `X = 0`.
    pub converged: bool,
    pub cpu_seconds: f64,
    pub targets: Vec<TargetHit>,
    /// Order estimates over the Newton rows.
    pub q_rates: Vec<Option<f64>>,
    pub error: Option<String>,
    /// Trace file relative to the output directory.
    pub trace_file: String,
}

/// Run identity without results.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub label: String,
    pub solver: SolverKind,
    pub size: usize,
    pub warm_start: Option<WarmStart>,
    pub schedule: Option<ResidualSchedule<f64>>,
}

/// Stage rows are counted as iterations, so the starting row is excluded.
fn iterations(trace: &SolverTrace, stage: Stage) -> usize {
    trace.count(stage).saturating_sub(1)
}

impl RunSummary {
    /// `eps_stop` is the stopping tolerance the run was given.
    pub fn from_trace(
        spec: &RunSpec,
        trace: &SolverTrace,
        eps_stop: f64,
        targets: &[f64],
        error: Option<String>,
    ) -> Self {
        let last = trace.last();
        let converged = error.is_none() && last.is_some_and(|r| r.eps_rel <= eps_stop || r.x_norm == 0.0);
        let targets = targets
            .iter()
            .map(|&t| {
                let hit = trace.rows.iter().find(|r| r.eps_rel <= t);
                TargetHit {
                    eps_rel: t,
                    stage: hit.map(|r| r.stage),
                    iter: hit.map(|r| r.iter),
                    cpu_seconds: hit.map(|r| r.cpu_seconds),
                }
            })
            .collect();
        RunSummary {
            label: spec.label.clone(),
            solver: spec.solver,
            size: spec.size,
            warm_start: spec.warm_start,
            schedule: spec.schedule,
            presteps: iterations(trace, Stage::Prestep),
            newton_iters: iterations(trace, Stage::Newton),
            lrcpa_iters: iterations(trace, Stage::Lrcpa),
            final_x_norm: last.map_or(f64::NAN, |r| r.x_norm),
            final_eps_rel: last.map_or(f64::NAN, |r| r.eps_rel),
            final_cost: last.map_or(f64::NAN, |r| r.cost),
            final_dist_ref: last.and_then(|r| r.dist_ref),
            converged,
            cpu_seconds: last.map_or(0.0, |r| r.cpu_seconds),
            targets,
            q_rates: trace.q_rate(Some(Stage::Newton)),
            error,
            trace_file: format!("traces/{}.csv", spec.label),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub kind: ExperimentKind,
    pub manifold: ManifoldKind,
    pub seed: u64,
    pub runs: Vec<RunSummary>,
}

impl ExperimentSummary {
    pub fn has_errors(&self) -> bool {
        self.runs.iter().any(|r| r.error.is_some())
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Plain-text table with one line per run.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} ({:?}, {:?}, seed {})", self.name, self.kind, self.manifold, self.seed);
        let mut head = format!("{:<40} {:>5} {:>6} {:>6} {:>10}", "run", "pre", "newton", "lrcpa", "eps_rel");
        if let Some(r) = self.runs.first() {
            for t in &r.targets {
                let _ = write!(head, " {:>9}", format!("@{:.0e}", t.eps_rel));
            }
        }
        let _ = writeln!(out, "{head} {:>9} status", "dist_ref");
        for r in &self.runs {
            let iters = if r.solver == SolverKind::Lrcpa { r.lrcpa_iters } else { r.newton_iters };
            let mut line = format!(
                "{:<40} {:>5} {:>6} {:>6} {:>10.3e}",
                r.label,
                r.presteps,
                if r.solver == SolverKind::PdRssn { iters.to_string() } else { "-".into() },
                if r.solver == SolverKind::Lrcpa { iters.to_string() } else { "-".into() },
                r.final_eps_rel
            );
            for t in &r.targets {
                let cell = match (t.stage, t.iter) {
                    (Some(Stage::Prestep), Some(i)) => format!("p{i}"),
                    (Some(_), Some(i)) => i.to_string(),
                    _ => "-".into(),
                };
                let _ = write!(line, " {cell:>9}");
            }
            let dist = r.final_dist_ref.map_or("-".into(), |d| format!("{d:.2e}"));
            let status = match (&r.error, r.converged) {
                (Some(e), _) => e.as_str(),
                (None, true) => "ok",
                (None, false) => "not converged",
            };
            let _ = writeln!(out, "{line} {dist:>9} {status}");
        }
        out
    }
}

/// Summary and traces of an executed experiment, in run order.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub summary: ExperimentSummary,
    pub traces: Vec<SolverTrace>,
}

impl RunReport {
    pub fn trace(&self, label: &str) -> Option<&SolverTrace> {
        self.summary
            .runs
            .iter()
            .position(|r| r.label == label)
            .map(|i| &self.traces[i])
    }
}

fn start_label(w: WarmStart) -> &'static str {
    match w {
        WarmStart::Cold => "cold",
        WarmStart::DualWarm => "dual_warm",
        WarmStart::Presteps => "presteps",
    }
}

/// Injected residuals draw from the schedule seed offset by the experiment
/// seed.
fn seeded(s: &ResidualSchedule<f64>, seed: u64) -> ResidualSchedule<f64> {
    match *s {
        ResidualSchedule::InjectedRandom { forcing, seed: own } => ResidualSchedule::InjectedRandom {
            forcing,
            seed: own.wrapping_add(seed),
        },
        other => other,
    }
}

fn specs(cfg: &ExperimentConfig, size: usize) -> Vec<RunSpec> {
    let mut out = Vec::new();
    for &w in &cfg.solver.warm_starts {
        for s in &cfg.solver.schedules {
            out.push(RunSpec {
                label: format!("n{size}_{}_{}", start_label(w), s.label()),
                solver: SolverKind::PdRssn,
                size,
                warm_start: Some(w),
                schedule: Some(*s),
            });
        }
    }
    if cfg.lrcpa.is_some() {
        out.push(RunSpec {
            label: format!("n{size}_lrcpa"),
            solver: SolverKind::Lrcpa,
            size,
            warm_start: None,
            schedule: None,
        });
    }
    out
}

fn execute_on<M: DataManifold>(cfg: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    let insts = instances::<M>(cfg)?;
    let problems = insts
        .iter()
        .map(|i| problem(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, RunSpec)> = insts
        .iter()
        .enumerate()
        .flat_map(|(k, inst)| specs(cfg, inst.size).into_iter().map(move |s| (k, s)))
        .collect();
    let results: Vec<(RunSummary, SolverTrace)> = jobs
        .par_iter()
        .map(|(k, spec)| {
            let prob = &problems[*k];
            let reference = insts[*k].reference.as_ref();
            let (trace, error, stop) = match spec.solver {
                SolverKind::PdRssn => {
                    let sc = cfg.solver.config(spec.warm_start.unwrap_or(WarmStart::Presteps));
                    let sched = seeded(&spec.schedule.unwrap_or(ResidualSchedule::Exact), cfg.seed);
                    let run = pd_rssn(prob, &sc, &sched, reference);
                    (run.trace, run.error, sc.eps_rel_stop)
                }
                SolverKind::Lrcpa => {
                    let lc = cfg.lrcpa.as_ref().map(|l| l.config()).unwrap_or_default();
                    let run = lrcpa(prob, &lc, reference);
                    (run.trace, run.error, lc.eps_rel_stop)
                }
            };
            let error = error.map(|e| e.to_string());
            let summary = RunSummary::from_trace(spec, &trace, stop, &cfg.targets, error);
            (summary, trace)
        })
        .collect();
    let (runs, traces) = results.into_iter().unzip();
    Ok(RunReport {
        summary: ExperimentSummary {
            name: cfg.name.clone(),
            kind: cfg.kind,
            manifold: cfg.manifold,
            seed: cfg.seed,
            runs,
        },
        traces,
    })
}

/// Runs every configured solver without touching the file system. Solver
/// failures are recorded per run; only configuration problems are errors.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    cfg.validate()?;
    match cfg.manifold {
        ManifoldKind::Sphere2 => execute_on::<Sphere2>(cfg),
        ManifoldKind::Spd3 => execute_on::<Spd3>(cfg),
    }
}

/// Writes `config.toml`, `summary.json` and `traces/<label>.csv` under `dir`.
pub fn write_report(cfg: &ExperimentConfig, report: &RunReport, dir: &Path) -> Result<(), ExperimentError> {
    let traces = dir.join("traces");
    fs::create_dir_all(&traces).map_err(|e| ExperimentError::io(&traces, e))?;
    let path = dir.join("config.toml");
    fs::write(&path, cfg.to_toml()).map_err(|e| ExperimentError::io(&path, e))?;
    for (run, trace) in report.summary.runs.iter().zip(&report.traces) {
        let path = dir.join(&run.trace_file);
        let file = fs::File::create(&path).map_err(|e| ExperimentError::io(&path, e))?;
        trace.write_csv(file)?;
    }
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&report.summary)?;
    fs::write(&path, json).map_err(|e| ExperimentError::io(&path, e))?;
    Ok(())
}

/// [`execute`] followed by [`write_report`] into the configured output
/// directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    let report = execute(cfg)?;
    write_report(cfg, &report, &cfg.output_dir())?;
    Ok(report)
}

/// Data set of one size as written by [`write_datasets`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dataset<M: Manifold<f64>> {
    pub manifold: ManifoldKind,
    pub size: usize,
    pub base_point: M::Point,
    pub data: PrimalImage<f64, M>,
    pub reference: Option<PrimalImage<f64, M>>,
}

fn datasets_on<M: DataManifold>(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let mut written = Vec::new();
    for inst in instances::<M>(cfg)? {
        let ds = Dataset::<M> {
            manifold: M::KIND,
            size: inst.size,
            base_point: cfg.model.base_point.as_deref().map_or(inst.base, M::point_from),
            data: inst.data,
            reference: inst.reference,
        };
        let path = dir.join(format!("{}_n{}.json", cfg.name, inst.size));
        fs::write(&path, serde_json::to_string(&ds)?).map_err(|e| ExperimentError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes the data set of every configured size as JSON into `dir`.
pub fn write_datasets(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    cfg.validate()?;
    match cfg.manifold {
        ManifoldKind::Sphere2 => datasets_on::<Sphere2>(cfg, dir),
        ManifoldKind::Spd3 => datasets_on::<Spd3>(cfg, dir),
    }
}
