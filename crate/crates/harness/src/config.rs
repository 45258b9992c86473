//! Experiment configuration in TOML.
//!
//! ```toml
//! scenario = "rates"
//! replications = 64
//! levels = 18
//! base_seed = 7
//!
//! [[point]]
//! sigma = 0.6
//! alpha = 1.8
//!
//! [[point]]
//! sigma = 0.95
//! innovation = { family = "gaussian", variance = 1.0 }
//! ```
//!
//! Unknown keys are rejected everywhere. See the README for the full schema.

use std::path::PathBuf;

use mslln_core::coefficients::{CoefficientSpec, Sidedness};
use mslln_core::estimators::FitRange;
use mslln_core::innovations::{product_tail_alpha, Coupling, InnovationSpec, TailIndex};
use mslln_core::stochastic_approx::MAX_LEVELS;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Largest default half-width; explicit `half_width` keys may exceed it.
pub const DEFAULT_HALF_WIDTH_CAP: usize = 1 << 20;

/// Largest dyadic level accepted by the path-based scenarios.
pub const MAX_PATH_LEVELS: u32 = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Rates,
    Decompose,
    Sa,
    Autocov,
    Appell,
    Simulate,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rates => "rates",
            Self::Decompose => "decompose",
            Self::Sa => "sa",
            Self::Autocov => "autocov",
            Self::Appell => "appell",
            Self::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    TwoSided,
    Causal,
}

impl From<Sided> for Sidedness {
    fn from(s: Sided) -> Self {
        match s {
            Sided::TwoSided => Sidedness::TwoSided,
            Sided::Causal => Sidedness::OneSidedCausal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingConfig {
    Identical,
    Independent,
}

impl From<CouplingConfig> for Coupling {
    fn from(c: CouplingConfig) -> Self {
        match c {
            CouplingConfig::Identical => Coupling::Identical,
            CouplingConfig::Independent => Coupling::Independent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnovationConfig {
    PowerLaw {
        #[serde(default = "one")]
        x_min: f64,
        beta: f64,
    },
    FoldedT {
        beta: f64,
    },
    Gaussian {
        #[serde(default = "one")]
        variance: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl InnovationConfig {
    pub fn to_spec(self) -> mslln_core::Result<InnovationSpec> {
        match self {
            Self::PowerLaw { x_min, beta } => InnovationSpec::power_law(x_min, beta),
            Self::FoldedT { beta } => InnovationSpec::folded_t(beta),
            Self::Gaussian { variance } => InnovationSpec::gaussian(variance),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub lo: u32,
    pub hi: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Replication count below which estimates are marked
    /// `insufficient_replications`.
    #[serde(default = "default_min_replications")]
    pub min_replications: usize,
    /// Points with `|alpha - 1/(2 - sigma - sigma_bar)|` below this are
    /// flagged as near the bifurcation line.
    #[serde(default = "default_bifurcation_margin")]
    pub bifurcation_margin: f64,
}

fn default_min_replications() -> usize {
    mslln_core::estimators::MIN_REPLICATIONS
}

fn default_bifurcation_margin() -> f64 {
    0.1
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            min_replications: default_min_replications(),
            bifurcation_margin: default_bifurcation_margin(),
        }
    }
}

/// One grid point. Keys irrelevant to the scenario are ignored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sided: Option<Sided>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<usize>,
    /// Shorthand for a unit power law whose square has tail index `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovation: Option<InnovationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovation_bar: Option<InnovationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// Rows of the kernel direction matrix, normalized to unit operator norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub levels: u32,
    /// TOML integers are signed, so seeds above `i64::MAX` are written as
    /// decimal strings; both forms are accepted.
    #[serde(default, with = "seed_repr")]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(rename = "point")]
    pub points: Vec<GridPoint>,
}

fn default_replications() -> usize {
    1
}

mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => v.serialize(s),
            Err(_) => seed.to_string().serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => u64::try_from(v).map_err(|_| de::Error::custom(format!("base_seed must be non-negative, got {v}"))),
            Repr::Text(t) => t.parse().map_err(|_| de::Error::custom(format!("base_seed `{t}` is not a u64"))),
        }
    }
}

/// A validated grid point with model objects built.
#[derive(Debug, Clone)]
pub struct ResolvedPoint {
    pub index: usize,
    pub coef: CoefficientSpec,
    pub coef_bar: CoefficientSpec,
    pub spec: InnovationSpec,
    pub spec_bar: InnovationSpec,
    pub coupling: Coupling,
    /// Tail index of the innovation product (or of `|Xi|^2` for `sa`).
    pub tail: TailIndex,
    pub half_width: usize,
    pub chi: f64,
    pub lags: Vec<usize>,
    pub p: f64,
    pub nu: f64,
    pub h0: Vec<f64>,
}

impl ResolvedPoint {
    pub fn sigma(&self) -> f64 {
        self.coef.sigma()
    }

    pub fn sigma_bar(&self) -> f64 {
        self.coef_bar.sigma()
    }

    pub fn dim(&self) -> usize {
        self.coef.cols()
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Validation(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Built-in grid for a scenario.
    pub fn default_for(scenario: Scenario) -> Self {
        let point = |sigma: f64| GridPoint {
            sigma,
            ..GridPoint::default()
        };
        let (replications, levels, points) = match scenario {
            Scenario::Rates => (
                64,
                18,
                vec![
                    GridPoint {
                        alpha: Some(1.8),
                        ..point(0.6)
                    },
                    GridPoint {
                        alpha: Some(1.25),
                        ..point(0.95)
                    },
                    GridPoint {
                        innovation: Some(InnovationConfig::Gaussian { variance: 1.0 }),
                        ..point(0.95)
                    },
                ],
            ),
            Scenario::Decompose => (
                20,
                10,
                [0.5, 1.0, 2.0]
                    .into_iter()
                    .map(|nu| GridPoint {
                        alpha: Some(1.8),
                        nu: Some(nu),
                        half_width: Some(256),
                        ..point(0.75)
                    })
                    .collect(),
            ),
            Scenario::Sa => (
                64,
                18,
                vec![GridPoint {
                    innovation: Some(InnovationConfig::PowerLaw { x_min: 1.0, beta: 4.0 }),
                    chi: Some(1.0),
                    matrix: Some(vec![vec![1.0, 0.0], vec![1.0, 1.0]]),
                    ..point(0.8)
                }],
            ),
            Scenario::Autocov => (
                64,
                18,
                vec![GridPoint {
                    sided: Some(Sided::Causal),
                    alpha: Some(1.8),
                    lags: Some(vec![0, 1, 2]),
                    p: Some(1.15),
                    ..point(0.8)
                }],
            ),
            Scenario::Appell => (
                64,
                16,
                vec![GridPoint {
                    sided: Some(Sided::Causal),
                    alpha: Some(1.8),
                    ..point(0.8)
                }],
            ),
            Scenario::Simulate => (
                1,
                10,
                vec![GridPoint {
                    alpha: Some(1.8),
                    half_width: Some(1024),
                    ..point(0.75)
                }],
            ),
        };
        Self {
            scenario,
            replications,
            levels,
            base_seed: 0,
            out_dir: None,
            fit: None,
            tolerances: Tolerances::default(),
            points,
        }
    }

    pub fn fit_range(&self) -> Result<FitRange, HarnessError> {
        let range = match (self.scenario, self.fit) {
            (_, Some(f)) => FitRange::new(f.lo, f.hi),
            // the top five iterate checkpoints
            (Scenario::Sa, None) => FitRange::new(self.levels.saturating_sub(4), self.levels),
            (_, None) => FitRange::default_for(self.levels),
        };
        let range = range.map_err(|e| HarnessError::Validation(format!("fit range: {e}")))?;
        let top = if self.scenario == Scenario::Sa {
            self.levels
        } else {
            self.levels.saturating_sub(1)
        };
        if range.hi > top {
            return Err(HarnessError::Validation(format!(
                "fit range ends at level {}, data ends at {top}",
                range.hi
            )));
        }
        Ok(range)
    }

    /// Checks every grid point and builds its model objects. Nothing runs
    /// until this succeeds.
    pub fn resolve(&self) -> Result<Vec<ResolvedPoint>, HarnessError> {
        if self.replications == 0 {
            return Err(HarnessError::Validation("replications must be at least 1".into()));
        }
        if self.points.is_empty() {
            return Err(HarnessError::Validation("grid has no points".into()));
        }
        let cap = if self.scenario == Scenario::Sa {
            MAX_LEVELS
        } else {
            MAX_PATH_LEVELS
        };
        if self.levels > cap {
            return Err(HarnessError::Validation(format!(
                "horizon cap exceeded: {} dyadic levels requested, at most {cap} allowed",
                self.levels
            )));
        }
        if matches!(self.scenario, Scenario::Rates | Scenario::Appell | Scenario::Sa) {
            self.fit_range()?;
        }
        let t = self.tolerances;
        if t.bifurcation_margin.is_nan() || t.bifurcation_margin < 0.0 || t.min_replications == 0 {
            return Err(HarnessError::Validation("invalid tolerances".into()));
        }
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| self.resolve_point(i, p).map_err(|e| HarnessError::Validation(format!("point {i}: {e}"))))
            .collect()
    }

    fn resolve_point(&self, index: usize, p: &GridPoint) -> Result<ResolvedPoint, String> {
        let err = |e: mslln_core::Error| e.to_string();
        let scenario = self.scenario;
        let spec = match (p.alpha, p.innovation) {
            (Some(_), Some(_)) => return Err("give either `alpha` or `innovation`, not both".into()),
            (Some(a), None) => InnovationSpec::power_law_with_square_tail(a).map_err(err)?,
            (None, Some(c)) => c.to_spec().map_err(err)?,
            (None, None) => InnovationSpec::gaussian(1.0).map_err(err)?,
        };
        let coupling: Coupling = p.coupling.unwrap_or(CouplingConfig::Identical).into();
        let spec_bar = match (coupling, p.innovation_bar) {
            (Coupling::Identical, Some(_)) => return Err("`innovation_bar` requires independent coupling".into()),
            (Coupling::Identical, None) => spec,
            (Coupling::Independent, Some(c)) => c.to_spec().map_err(err)?,
            (Coupling::Independent, None) => spec,
        };
        let default_sided = if matches!(scenario, Scenario::Autocov | Scenario::Appell) {
            Sided::Causal
        } else {
            Sided::TwoSided
        };
        let sided = p.sided.unwrap_or(default_sided);
        if scenario == Scenario::Autocov && sided != Sided::Causal {
            return Err("autocovariance runs need a causal kernel".into());
        }
        let half_width = p
            .half_width
            .unwrap_or_else(|| (1usize << (self.levels + 1).min(30)).min(DEFAULT_HALF_WIDTH_CAP));
        let scale = p.scale.unwrap_or(1.0);
        let sigma_bar = p.sigma_bar.unwrap_or(p.sigma);
        let matrix = match &p.matrix {
            Some(rows) => Some(to_matrix(rows)?),
            None => None,
        };
        let single_kernel = matches!(scenario, Scenario::Sa | Scenario::Autocov | Scenario::Appell);
        if single_kernel && (p.sigma_bar.is_some_and(|s| s != p.sigma) || coupling != Coupling::Identical) {
            return Err(format!("{} uses one kernel and identical coupling", scenario.name()));
        }
        let build = |sigma: f64| -> Result<CoefficientSpec, String> {
            match &matrix {
                Some(m) => CoefficientSpec::from_matrix(sigma, sided.into(), m * scale, half_width).map_err(err),
                None => CoefficientSpec::scalar(sigma, sided.into(), scale, half_width).map_err(err),
            }
        };
        let coef = build(p.sigma)?;
        let coef_bar = build(sigma_bar)?;

        let tail = product_tail_alpha(spec, spec_bar, coupling).map_err(err)?;
        let chi = p.chi.unwrap_or(1.0);
        let lags = p.lags.clone().unwrap_or_else(|| vec![0]);
        let pp = p.p.unwrap_or(1.0);
        let nu = p.nu.unwrap_or(1.0);
        let mut h0 = Vec::new();

        match scenario {
            Scenario::Decompose => {
                if coef.cols() != 1 || coef.rows() != 1 {
                    return Err("decompose supports scalar kernels only".into());
                }
                if !(nu > 0.0 && nu.is_finite()) {
                    return Err(format!("nu must be positive, got {nu}"));
                }
            }
            Scenario::Autocov | Scenario::Appell => {
                if coef.cols() != 1 || coef.rows() != 1 {
                    return Err(format!("{} supports scalar kernels only", scenario.name()));
                }
                if lags.is_empty() {
                    return Err("lags must be non-empty".into());
                }
                if !(1.0..2.0).contains(&pp) {
                    return Err(format!("p must lie in [1, 2), got {pp}"));
                }
                spec.moment(2.0).map_err(err)?;
            }
            Scenario::Sa => {
                if coef.rows() < 2 {
                    return Err("sa needs a joint kernel with at least two rows".into());
                }
                let d = coef.rows() - 1;
                h0 = p.h0.clone().unwrap_or_else(|| vec![0.0; d]);
                let config = mslln_core::stochastic_approx::SaConfig {
                    chi,
                    joint: coef.clone(),
                    innovations: spec,
                    seed: 0,
                    h0: h0.clone(),
                    levels: self.levels,
                    strategy: Default::default(),
                };
                config.validate().map_err(err)?;
                config.target().map_err(err)?;
            }
            Scenario::Rates | Scenario::Simulate => {}
        }
        if matches!(scenario, Scenario::Rates) {
            spec.moment(2.0).map_err(err)?;
            spec_bar.moment(2.0).map_err(err)?;
        }
        Ok(ResolvedPoint {
            index,
            coef,
            coef_bar,
            spec,
            spec_bar,
            coupling,
            tail,
            half_width,
            chi,
            lags,
            p: pp,
            nu,
            h0,
        })
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err("matrix must be a non-empty rectangular list of rows".into());
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied()))
}
