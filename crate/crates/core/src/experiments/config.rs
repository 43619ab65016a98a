use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::manifolds::ManifoldKind;
use crate::solvers::{ResidualSchedule, SolverConfig, WarmStart};
use crate::tvmodel::TvNorm;

/// What an experiment measures. Decides which data set is admissible and
/// whether a reference solution is attached to the traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Piecewise constant signal with a closed-form minimizer.
    KnownMinimizer1d,
    /// PD-RSSN against lRCPA on one synthetic image.
    Denoise2d,
    /// Newton iteration counts over several image sizes.
    Scaling,
    /// Convergence-order estimates under injected linear residuals.
    InexactRates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// `2ℓ` samples, the first half at one endpoint and the rest at the
    /// other.
    Piecewise { ell: usize },
    /// Synthetic `N × N` images, one run per size.
    Image {
        sizes: Vec<usize>,
        #[serde(default)]
        noise: f64,
    },
    /// Noisy samples of the spherical lemniscate.
    Lemniscate {
        points: usize,
        #[serde(default)]
        noise: f64,
    },
}

impl DatasetConfig {
    /// Sizes that index the runs: `2ℓ`, each `N`, or the point count.
    pub fn sizes(&self) -> Vec<usize> {
        match self {
            DatasetConfig::Piecewise { ell } => vec![2 * ell],
            DatasetConfig::Image { sizes, .. } => sizes.clone(),
            DatasetConfig::Lemniscate { points, .. } => vec![*points],
        }
    }

    pub fn noise(&self) -> f64 {
        match self {
            DatasetConfig::Piecewise { .. } => 0.0,
            DatasetConfig::Image { noise, .. } | DatasetConfig::Lemniscate { noise, .. } => *noise,
        }
    }
}

/// ℓ²-TV model parameters. `base_point` holds three coordinates on the
/// sphere or nine row-major entries of an SPD matrix; when absent the data
/// set's natural base point is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    pub sigma: f64,
    pub tau: f64,
    #[serde(default = "default_q")]
    pub q: TvNorm,
    #[serde(default)]
    pub base_point: Option<Vec<f64>>,
}

fn default_q() -> TvNorm {
    TvNorm::Isotropic
}

/// PD-RSSN settings. One run is made per entry of `warm_starts` and per
/// residual schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_eps_stop")]
    pub eps_rel_stop: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_presteps_eps")]
    pub presteps_eps: f64,
    #[serde(default = "default_max_presteps")]
    pub max_presteps: usize,
    #[serde(default = "default_starts")]
    pub warm_starts: Vec<WarmStart>,
    #[serde(default = "default_schedules")]
    pub schedules: Vec<ResidualSchedule<f64>>,
}

fn default_max_iters() -> usize {
    50
}
fn default_eps_stop() -> f64 {
    1e-10
}
fn default_gamma() -> f64 {
    0.2
}
fn default_presteps_eps() -> f64 {
    0.5
}
fn default_max_presteps() -> usize {
    10_000
}
fn default_starts() -> Vec<WarmStart> {
    vec![WarmStart::Presteps]
}
fn default_schedules() -> Vec<ResidualSchedule<f64>> {
    vec![ResidualSchedule::Exact]
}

impl SolverSection {
    pub fn config(&self, warm_start: WarmStart) -> SolverConfig<f64> {
        SolverConfig {
            max_iters: self.max_iters,
            eps_rel_stop: self.eps_rel_stop,
            gamma: self.gamma,
            presteps_eps: self.presteps_eps,
            max_presteps: self.max_presteps,
            warm_start,
        }
    }
}

/// Standalone lRCPA run for comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrcpaSection {
    pub max_iters: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_eps_stop")]
    pub eps_rel_stop: f64,
}

impl LrcpaSection {
    pub fn config(&self) -> SolverConfig<f64> {
        SolverConfig {
            max_iters: self.max_iters,
            eps_rel_stop: self.eps_rel_stop,
            gamma: self.gamma,
            ..SolverConfig::default()
        }
    }
}

/// One experiment, read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub manifold: ManifoldKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    #[serde(default = "default_solver")]
    pub solver: SolverSection,
    #[serde(default)]
    pub lrcpa: Option<LrcpaSection>,
    /// Relative errors at which iteration counts are reported.
    #[serde(default)]
    pub targets: Vec<f64>,
}

fn default_solver() -> SolverSection {
    toml::from_str("").expect("solver defaults")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    /// Output directory, defaulting to `out/<name>`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| Path::new("out").join(&self.name))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("name must be a non-empty file name, got {:?}", self.name));
        }
        match (&self.kind, &self.dataset) {
            (ExperimentKind::KnownMinimizer1d, DatasetConfig::Piecewise { .. })
            | (ExperimentKind::Denoise2d | ExperimentKind::Scaling, DatasetConfig::Image { .. })
            | (ExperimentKind::InexactRates, DatasetConfig::Lemniscate { .. }) => {}
            (kind, data) => {
                return bad(format!("data set {data:?} does not fit experiment kind {kind:?}"))
            }
        }
        match &self.dataset {
            DatasetConfig::Piecewise { ell } if *ell == 0 => return bad("ell must be at least 1".into()),
            DatasetConfig::Image { sizes, .. } if sizes.is_empty() || sizes.iter().any(|&n| n < 2) => {
                return bad("image sizes must be non-empty and at least 2".into())
            }
            DatasetConfig::Lemniscate { points, .. } if *points < 2 => {
                return bad("lemniscate needs at least 2 points".into())
            }
            DatasetConfig::Lemniscate { .. } if self.manifold != ManifoldKind::Sphere2 => {
                return bad("the lemniscate lives on the sphere".into())
            }
            _ => {}
        }
        let m = &self.model;
        for (name, v) in [("alpha", m.alpha), ("sigma", m.sigma), ("tau", m.tau)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("model.{name} must be positive, got {v}"));
            }
        }
        if !(m.beta >= 0.0 && m.beta.is_finite()) {
            return bad(format!("model.beta must be non-negative, got {}", m.beta));
        }
        let noise = self.dataset.noise();
        if !(noise >= 0.0 && noise.is_finite()) {
            return bad(format!("noise must be non-negative, got {noise}"));
        }
        if let Some(b) = &self.model.base_point {
            let want = match self.manifold {
                ManifoldKind::Sphere2 => 3,
                ManifoldKind::Spd3 => 9,
            };
            if b.len() != want {
                return bad(format!("base_point needs {want} entries, got {}", b.len()));
            }
        }
        if self.solver.warm_starts.is_empty() || self.solver.schedules.is_empty() {
            return bad("solver.warm_starts and solver.schedules must be non-empty".into());
        }
        for s in &self.solver.schedules {
            s.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        self.solver
            .config(WarmStart::Cold)
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        if let Some(l) = &self.lrcpa {
            l.config().validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        if self.targets.iter().any(|t| !(*t > 0.0)) {
            return bad("targets must be positive".into());
        }
        Ok(())
    }
}
