//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::concentration::{ConvexFamily, ConvexSet};
use crate::error::{Error, Result};
use crate::measure::{Atom, DensityPiece, Measure1D, MeasureKind};

/// A problem with the configuration itself (unreadable, malformed, missing
/// or unknown keys).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
    #[serde(default)]
    pub tau: TauConfig,
    #[serde(default)]
    pub poincare: PoincareConfig,
    pub concentrate: Option<ConcentrateConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A one-dimensional measure, inline or loaded from `file`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub file: Option<PathBuf>,
    pub kind: Option<String>,
    pub a: Option<f64>,
    pub r: Option<f64>,
    pub rate: Option<f64>,
    pub sigma: Option<f64>,
    pub atoms: Option<Vec<Atom>>,
    pub density_pieces: Option<Vec<DensityPiece>>,
    pub symmetric: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    #[serde(default = "default_h_list")]
    pub h: Vec<f64>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig { h: default_h_list() }
    }
}

fn default_h_list() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSuite {
    AImpliesC,
    LemmaBob,
    LemmaBobex,
    LemmaBound,
    CImpliesB,
}

impl TauSuite {
    pub const ALL: [TauSuite; 5] = [TauSuite::AImpliesC, TauSuite::LemmaBob, TauSuite::LemmaBobex, TauSuite::LemmaBound, TauSuite::CImpliesB];

    pub fn name(self) -> &'static str {
        match self {
            TauSuite::AImpliesC => "a_implies_c",
            TauSuite::LemmaBob => "lemma_bob",
            TauSuite::LemmaBobex => "lemma_bobex",
            TauSuite::LemmaBound => "lemma_bound",
            TauSuite::CImpliesB => "c_implies_b",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauConfig {
    #[serde(default = "one")]
    pub h: f64,
    /// Tail-ratio level; defaults to `lambda*(h)`.
    pub lambda: Option<f64>,
    /// Replaces `17 h / (1 - lambda)^2`.
    pub c_tau: Option<f64>,
    /// Multiplies the constant in use.
    #[serde(default = "one")]
    pub c_tau_scale: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_starts")]
    pub adversarial_starts: usize,
    #[serde(default = "default_steps")]
    pub adversarial_steps: usize,
    #[serde(default = "all_suites")]
    pub suites: Vec<TauSuite>,
}

impl Default for TauConfig {
    fn default() -> Self {
        TauConfig {
            h: 1.0,
            lambda: None,
            c_tau: None,
            c_tau_scale: 1.0,
            trials: default_trials(),
            adversarial_starts: default_starts(),
            adversarial_steps: default_steps(),
            suites: all_suites(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_trials() -> usize {
    200
}
fn default_starts() -> usize {
    8
}
fn default_steps() -> usize {
    200
}
fn all_suites() -> Vec<TauSuite> {
    TauSuite::ALL.to_vec()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareConfig {
    /// Constant to certify; defaults to the estimated lower bound.
    pub cp: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl Default for PoincareConfig {
    fn default() -> Self {
        PoincareConfig { cp: None, trials: default_trials() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// `A + sqrt(2t) C B_2 + 2t C B_1`.
    TwoLevel,
    /// `A + {sum φ₀(y_i/C) <= t}`.
    CostBall,
    /// Deviation of a convex function from its median.
    Deviation,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrateConfig {
    pub experiment: Experiment,
    pub dim: usize,
    #[serde(default = "one")]
    pub h: f64,
    pub lambda: Option<f64>,
    pub c_tau: Option<f64>,
    pub t_grid: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub set: Option<ConvexSet>,
    pub function: Option<ConvexFamily>,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

fn default_samples() -> usize {
    100_000
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> std::result::Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &dir).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn measure_spec(&self) -> std::result::Result<MeasureSpec, ConfigError> {
        let spec = self.measure.clone().ok_or_else(|| ConfigError("missing [measure] table".into()))?;
        match &spec.file {
            None => Ok(spec),
            Some(file) => {
                let others = spec.kind.is_some()
                    || spec.a.is_some()
                    || spec.r.is_some()
                    || spec.rate.is_some()
                    || spec.sigma.is_some()
                    || spec.atoms.is_some()
                    || spec.density_pieces.is_some();
                if others {
                    return Err(ConfigError("measure: `file` cannot be combined with inline keys".into()));
                }
                let path = self.base_dir.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
                let mut loaded: MeasureSpec = toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
                if loaded.file.is_some() {
                    return Err(ConfigError(format!("{}: nested `file` keys are not followed", path.display())));
                }
                if spec.symmetric.is_some() {
                    loaded.symmetric = spec.symmetric;
                }
                Ok(loaded)
            }
        }
    }
}

impl MeasureSpec {
    /// Checks that exactly the keys of `kind` are present, then builds the
    /// measure. Key errors are configuration errors; invalid values are
    /// measure errors.
    pub fn build(&self) -> std::result::Result<Result<Measure1D>, ConfigError> {
        let kind = self.kind.as_deref().ok_or_else(|| ConfigError("measure: missing key `kind`".into()))?;
        let present = [
            ("a", self.a.is_some()),
            ("r", self.r.is_some()),
            ("rate", self.rate.is_some()),
            ("sigma", self.sigma.is_some()),
            ("atoms", self.atoms.is_some()),
            ("density_pieces", self.density_pieces.is_some()),
        ];
        let allowed: &[&str] = match kind {
            "two_point" => &["a"],
            "uniform" => &["r"],
            "exponential" => &["rate"],
            "gaussian" => &["sigma"],
            "mix" => &["atoms", "density_pieces"],
            other => return Err(ConfigError(format!("measure: unknown kind `{other}`"))),
        };
        for (key, set) in present {
            if set && !allowed.contains(&key) {
                return Err(ConfigError(format!("measure: key `{key}` does not apply to kind `{kind}`")));
            }
        }
        let need = |key: &str, v: Option<f64>| v.ok_or_else(|| ConfigError(format!("measure: kind `{kind}` requires key `{key}`")));
        let mk = match kind {
            "two_point" => MeasureKind::TwoPoint { a: need("a", self.a)? },
            "uniform" => MeasureKind::Uniform { r: need("r", self.r)? },
            "exponential" => MeasureKind::Exponential { rate: need("rate", self.rate)? },
            "gaussian" => MeasureKind::Gaussian { sigma: need("sigma", self.sigma)? },
            _ => MeasureKind::Mix {
                atoms: self.atoms.clone().unwrap_or_default(),
                density_pieces: self.density_pieces.clone().unwrap_or_default(),
            },
        };
        Ok(Measure1D::from_kind(mk, self.symmetric.unwrap_or(true)))
    }
}

/// Seed from the command line, falling back to the config file.
pub fn resolve_seed(cli: Option<u64>, cfg: &RunConfig) -> std::result::Result<u64, ConfigError> {
    cli.or(cfg.seed).ok_or_else(|| ConfigError("this command is randomized: pass --seed N or set `seed` in the config".into()))
}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError(e.to_string())
    }
}
