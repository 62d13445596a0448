//! Experiment configuration: every parameter of a run, serializable so that each
//! output file can embed the configuration that produced it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qdim_core::dimension::{Schedule, Window};
use qdim_core::ifs::ModelFile;
use qdim_core::quantizer::{Anchor, Method, Strategy};
use qdim_core::IfsModel;

use crate::error::CliError;

const CANTOR: &str = include_str!("../models/cantor.json");
const DYADIC_LEBESGUE: &str = include_str!("../models/dyadic-lebesgue.json");
const GEOMETRIC: &str = include_str!("../models/geom-a05-b033.json");

/// Names of the bundled models.
pub const PRESETS: [&str; 3] = ["cantor", "dyadic-lebesgue", "geom-a05-b033"];

fn preset(name: &str) -> Option<&'static str> {
    match name {
        "cantor" => Some(CANTOR),
        "dyadic-lebesgue" => Some(DYADIC_LEBESGUE),
        "geom-a05-b033" => Some(GEOMETRIC),
        _ => None,
    }
}

/// A bundled model name, a path to a model file, or an inline model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Named(String),
    Inline(ModelFile),
}

impl Default for ModelSource {
    fn default() -> Self {
        ModelSource::Named("cantor".into())
    }
}

impl ModelSource {
    /// Loads the description; relative paths are taken from `base`.
    pub fn load(&self, base: &Path) -> Result<ModelFile, CliError> {
        match self {
            ModelSource::Inline(m) => Ok(m.clone()),
            ModelSource::Named(name) => {
                let text = match preset(name) {
                    Some(text) => text.to_string(),
                    None => {
                        let path = base.join(name);
                        std::fs::read_to_string(&path).map_err(|e| {
                            CliError::Config(format!(
                                "model `{name}` is neither a bundled model ({}) nor a readable file: {e}",
                                PRESETS.join(", ")
                            ))
                        })?
                    }
                };
                ModelFile::from_json(&text).map_err(|e| CliError::Config(format!("model `{name}`: {e}")))
            }
        }
    }

    /// Replaces names and paths by the model they refer to.
    pub fn resolve(&self, base: &Path) -> Result<(ModelSource, IfsModel), CliError> {
        let file = self.load(base)?;
        let model = file.build().map_err(|e| CliError::core("building the model", e))?;
        Ok((ModelSource::Inline(file), model))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorSpec {
    Center,
    WidestGap,
    Optimal,
}

impl AnchorSpec {
    pub fn to_core(self) -> Anchor {
        match self {
            AnchorSpec::Center => Anchor::Center,
            AnchorSpec::WidestGap => Anchor::WidestGap,
            AnchorSpec::Optimal => Anchor::Optimal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum StrategySpec {
    Antichain { anchor: AnchorSpec },
    AntichainFit { anchor: AnchorSpec },
    Lloyd { iters: usize },
    AntichainPolish { anchor: AnchorSpec, iters: usize },
    Grid,
}

impl StrategySpec {
    pub fn to_core(self) -> Strategy {
        match self {
            StrategySpec::Antichain { anchor } => Strategy::Antichain { anchor: anchor.to_core() },
            StrategySpec::AntichainFit { anchor } => Strategy::AntichainFit { anchor: anchor.to_core() },
            StrategySpec::Lloyd { iters } => Strategy::Lloyd { iters },
            StrategySpec::AntichainPolish { anchor, iters } => {
                Strategy::AntichainPolish { anchor: anchor.to_core(), iters }
            }
            StrategySpec::Grid => Strategy::Grid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum EvalSpec {
    /// Certified quadrature at the run tolerance.
    Exact,
    /// Monte-Carlo with the run seed.
    Mc { samples: usize, ci_level: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum WindowSpec {
    Named(WindowName),
    Range { n_min: usize, n_max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowName {
    All,
    TopHalf,
}

impl WindowSpec {
    pub fn to_core(self, ns: &[usize]) -> Option<Window> {
        match self {
            WindowSpec::Named(WindowName::All) => Window::all(ns),
            WindowSpec::Named(WindowName::TopHalf) => Window::top_half(ns),
            WindowSpec::Range { n_min, n_max } => Some(Window { n_min, n_max }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimConfig {
    /// Truncation lengths of the `t_N` sequence.
    pub truncations: Vec<usize>,
}

impl Default for DimConfig {
    fn default() -> Self {
        DimConfig { truncations: vec![2, 5, 10, 20, 40] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    /// Codebook sizes, strictly increasing.
    pub ns: Vec<usize>,
    pub strategy: StrategySpec,
    pub eval: EvalSpec,
    pub window: WindowSpec,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            ns: (5..=12).map(|k| 1usize << k).collect(),
            strategy: StrategySpec::AntichainPolish { anchor: AnchorSpec::Optimal, iters: 10 },
            eval: EvalSpec::Exact,
            window: WindowSpec::Named(WindowName::All),
        }
    }
}

impl EstimateConfig {
    pub fn method(&self, tol: f64, seed: u64) -> Method {
        match self.eval {
            EvalSpec::Exact => Method::Exact { tol },
            EvalSpec::Mc { samples, ci_level } => Method::Mc { samples, seed, ci_level },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntichainConfig {
    /// Build `F_n` at `eps = 1/(n p_min)`; exactly one of `n` and `eps` is set.
    pub n: Option<usize>,
    pub eps: Option<f64>,
    pub anchor: AnchorSpec,
}

impl Default for AntichainConfig {
    fn default() -> Self {
        AntichainConfig { n: Some(16), eps: None, anchor: AnchorSpec::Center }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Second measure for `ρ_1` / `ρ_r`; if absent, only the continuity table is produced.
    pub against: Option<ModelSource>,
    pub r: f64,
    /// Continuity table (infinite models): truncation lengths and codebook sizes.
    pub truncations: Vec<usize>,
    pub ns: Vec<usize>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { against: None, r: 2.0, truncations: vec![5, 10, 20, 40], ns: vec![1, 4, 16, 64] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `p_j = (1 - a - θ)(a + θ)^{j-1}`, maps fixed.
    GeometricWeight,
    /// First two weights `1/(k+2)`: the weights are not bounded below along the schedule.
    EqualHead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub schedule: ScheduleKind,
    pub thetas: Vec<f64>,
    /// Parameters `k` of the equal-head schedule.
    pub ks: Vec<usize>,
    pub truncations: Vec<usize>,
    pub floor_fraction: f64,
    pub norm_letters: usize,
    /// Also certify `ρ_1` between each entry and the base model.
    pub rho1: bool,
    /// Lattice sizes of the discontinuity demo; empty skips the demo.
    pub lattice_ms: Vec<usize>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            schedule: ScheduleKind::GeometricWeight,
            thetas: Schedule::default_thetas(),
            ks: vec![1, 2, 4, 8, 16, 32],
            truncations: vec![2, 5, 10, 20, 40],
            floor_fraction: 0.5,
            norm_letters: 64,
            rho1: false,
            lattice_ms: vec![4, 8, 16],
        }
    }
}

/// Everything a run depends on. Worker count and config location are not part of it:
/// they do not change any output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    pub seed: u64,
    pub tol: f64,
    pub out: PathBuf,
    pub dim: DimConfig,
    pub estimate: EstimateConfig,
    pub antichain: AntichainConfig,
    pub metrics: MetricsConfig,
    pub stability: StabilityConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelSource::default(),
            seed: 0,
            tol: 1e-6,
            out: PathBuf::from("out"),
            dim: DimConfig::default(),
            estimate: EstimateConfig::default(),
            antichain: AntichainConfig::default(),
            metrics: MetricsConfig::default(),
            stability: StabilityConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Config(if path == "." { inner.to_string() } else { format!("{path}: {inner}") })
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks the parameters that the numerical routines would otherwise reject late.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        let increasing = |ns: &[usize]| !ns.is_empty() && ns[0] > 0 && ns.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.estimate.ns) {
            return bad("estimate.ns must be a non-empty, strictly increasing list of positive sizes".into());
        }
        if let WindowSpec::Range { n_min, n_max } = self.estimate.window {
            if n_min > n_max {
                return bad(format!("estimate.window is empty: n_min {n_min} > n_max {n_max}"));
            }
        }
        match (self.antichain.n, self.antichain.eps) {
            (Some(0), _) => return bad("antichain.n must be positive".into()),
            (Some(_), None) => {}
            (None, Some(eps)) if eps > 0.0 && eps <= 1.0 => {}
            (None, Some(eps)) => return bad(format!("antichain.eps must lie in (0, 1], got {eps}")),
            _ => return bad("set exactly one of antichain.n and antichain.eps".into()),
        }
        if !(self.metrics.r >= 1.0) {
            return bad(format!("metrics.r must be at least 1, got {}", self.metrics.r));
        }
        if self.metrics.ns.contains(&0) || self.metrics.truncations.iter().any(|&t| t < 2) {
            return bad("metrics.ns must be positive and metrics.truncations at least 2".into());
        }
        let s = &self.stability;
        if !(s.floor_fraction > 0.0 && s.floor_fraction <= 1.0) {
            return bad(format!("stability.floor_fraction must lie in (0, 1], got {}", s.floor_fraction));
        }
        if s.lattice_ms.contains(&0) || s.truncations.contains(&0) {
            return bad("stability.lattice_ms and stability.truncations must be positive".into());
        }
        Ok(())
    }
}
