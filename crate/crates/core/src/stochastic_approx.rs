//! Stochastic approximation `h_k = h_{k-1} + k^{-chi} (y_{k+1} z_k - z_k z_k^T h_{k-1})`
//! driven by a joint linear process `(z_k, y_{k+1})`.
//!
//! The joint kernel has `d + 1` rows: rows `0..d` produce the regressor `z_k`
//! and the last row the response `y_{k+1}`. `h_n` is the iterate after `n`
//! updates, so `h_0` is the starting point and the checkpoint errors are
//! `|h_{n_r} - h*|` at `n_r = 2^r`.

use nalgebra::{DMatrix, DVector};

use crate::coefficients::CoefficientSpec;
use crate::error::{invalid, Error, Result};
use crate::innovations::{cross_moment, Coupling, InnovationSpec, InnovationStream, TailIndex};
use crate::linear_process::{ConvolutionStrategy, PathGenerator, VectorSeries};
use crate::partial_sums::analytic_mean;
use crate::stats::median;
use crate::estimators::{log2_slope, FitRange};

/// Largest condition number of `A` accepted by [`sa_target`].
pub const CONDITION_LIMIT: f64 = 1e8;

/// Iterate norm treated as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Largest horizon `2^levels` accepted by [`SaConfig::validate`].
pub const MAX_LEVELS: u32 = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct SaTarget {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub h_star: DVector<f64>,
    pub condition: f64,
}

/// `A = E[z z^T]`, `b = E[y z]` and `h* = A^{-1} b` from the analytic mean
/// of the joint process truncated at `half_width`.
pub fn sa_target(joint: &CoefficientSpec, sigma_xi: &DMatrix<f64>, half_width: usize) -> Result<SaTarget> {
    let d = regressor_dim(joint)?;
    let mean = analytic_mean(joint, joint, sigma_xi, half_width)?.matrix;
    let a = mean.view((0, 0), (d, d)).into_owned();
    let b = mean.view((0, d), (d, 1)).column(0).into_owned();
    let sv = a.clone().singular_values();
    let (smax, smin) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), v| (hi.max(*v), lo.min(*v)));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllPosedTarget {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    let h_star = a
        .clone()
        .lu()
        .solve(&b)
        .ok_or(Error::IllPosedTarget {
            condition,
            limit: CONDITION_LIMIT,
        })?;
    Ok(SaTarget {
        a,
        b,
        h_star,
        condition,
    })
}

fn regressor_dim(joint: &CoefficientSpec) -> Result<usize> {
    if joint.rows() < 2 {
        return Err(invalid(
            "joint",
            "joint kernel needs d + 1 >= 2 rows (regressor and response)",
        ));
    }
    Ok(joint.rows() - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaConfig {
    /// Gain exponent, `mu_k = k^{-chi}`.
    pub chi: f64,
    pub joint: CoefficientSpec,
    pub innovations: InnovationSpec,
    pub seed: u64,
    pub h0: Vec<f64>,
    /// Horizon `n = 2^levels`.
    pub levels: u32,
    pub strategy: ConvolutionStrategy,
}

impl SaConfig {
    pub fn new(chi: f64, joint: CoefficientSpec, innovations: InnovationSpec, seed: u64, levels: u32) -> Result<Self> {
        let d = regressor_dim(&joint)?;
        let config = Self {
            chi,
            joint,
            innovations,
            seed,
            h0: vec![0.0; d],
            levels,
            strategy: ConvolutionStrategy::Auto,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.5 && self.chi <= 1.0) {
            return Err(invalid("chi", format!("must lie in (1/2, 1], got {}", self.chi)));
        }
        let d = regressor_dim(&self.joint)?;
        if self.h0.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "h0 has {} entries, regressor dimension is {d}",
                self.h0.len()
            )));
        }
        if self.levels > MAX_LEVELS {
            return Err(Error::HorizonCapExceeded {
                levels: self.levels,
                cap: MAX_LEVELS,
            });
        }
        self.innovations.validate()
    }

    pub fn dim(&self) -> usize {
        self.joint.rows() - 1
    }

    pub fn horizon(&self) -> usize {
        1usize << self.levels
    }

    pub fn stream(&self) -> Result<InnovationStream> {
        InnovationStream::identical(
            self.innovations,
            self.seed,
            self.horizon() + 2 * self.joint.half_width(),
            self.joint.cols(),
        )
    }

    pub fn target(&self) -> Result<SaTarget> {
        let sigma = cross_moment(self.innovations, Coupling::Identical, self.joint.cols())?;
        sa_target(&self.joint, &sigma, self.joint.half_width())
    }

    /// Rows `(z_k, y_{k+1})`, `k = 1..n`.
    pub fn joint_path(&self) -> Result<VectorSeries> {
        self.validate()?;
        let generator = PathGenerator::new(self.joint.clone(), self.joint.clone(), self.horizon(), self.strategy)?;
        Ok(generator.generate(&self.stream()?.sample())?.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaCheckpoint {
    pub r: u32,
    pub n: usize,
    /// Euclidean `|h_n - h*|`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaTrace {
    pub checkpoints: Vec<SaCheckpoint>,
    /// Update index at which `|h_k|` exceeded [`DIVERGENCE_NORM`] or became
    /// non-finite; later checkpoints are missing.
    pub aborted_at: Option<usize>,
    pub final_iterate: Vec<f64>,
    /// `h_1..h_n` when requested.
    pub iterates: Option<Vec<Vec<f64>>>,
}

impl SaTrace {
    pub fn is_aborted(&self) -> bool {
        self.aborted_at.is_some()
    }

    pub fn error_at(&self, r: u32) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.r == r).map(|c| c.error)
    }
}

/// Runs the recursion over the rows of `path` (each `(z_k, y_{k+1})`) for
/// `n = 2^levels` updates.
pub fn run_recursion(
    path: &VectorSeries,
    chi: f64,
    h0: &[f64],
    h_star: &[f64],
    levels: u32,
    keep_iterates: bool,
) -> Result<SaTrace> {
    let d = h0.len();
    if path.dim() != d + 1 || h_star.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "path rows have {} entries, h0 {d}, h* {}",
            path.dim(),
            h_star.len()
        )));
    }
    let n = 1usize << levels;
    if path.len() < n {
        return Err(Error::SampleTooShort {
            len: path.len(),
            needed: n,
        });
    }
    let mut h = h0.to_vec();
    let mut checkpoints = Vec::with_capacity(levels as usize + 1);
    let mut iterates = keep_iterates.then(|| Vec::with_capacity(n));
    let mut aborted_at = None;
    for k in 1..=n {
        let row = path.row(k - 1);
        let (z, y) = (&row[..d], row[d]);
        let gain = (k as f64).powf(-chi);
        // b_k - A_k h = z (y - z^T h)
        let residual = y - z.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
        for (hi, zi) in h.iter_mut().zip(z) {
            *hi += gain * zi * residual;
        }
        let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= DIVERGENCE_NORM) {
            aborted_at = Some(k);
            break;
        }
        if let Some(it) = iterates.as_mut() {
            it.push(h.clone());
        }
        if k.is_power_of_two() {
            let error = h
                .iter()
                .zip(h_star)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            checkpoints.push(SaCheckpoint {
                r: k.trailing_zeros(),
                n: k,
                error,
            });
        }
    }
    Ok(SaTrace {
        checkpoints,
        aborted_at,
        final_iterate: h,
        iterates,
    })
}

/// Generates the joint path for `config` and runs the recursion against the
/// analytic target.
pub fn sa_iterate(config: &SaConfig) -> Result<(SaTarget, SaTrace)> {
    let target = config.target()?;
    let path = config.joint_path()?;
    let trace = run_recursion(
        &path,
        config.chi,
        &config.h0,
        target.h_star.as_slice(),
        config.levels,
        false,
    )?;
    Ok((target, trace))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaRate {
    /// `gamma0 = min(chi - 1/alpha, chi + 2 sigma - 2)`.
    pub gamma0: f64,
    /// `false` when `gamma0 <= 0`: no rate is guaranteed.
    pub guaranteed: bool,
}

/// Guaranteed decay exponent of `|h_n - h*|`. `alpha` is the tail index of
/// `|Xi|^2`; a light tail counts as `1/alpha = 1/2`.
pub fn sa_theoretical_rate(chi: f64, sigma: f64, tail: TailIndex) -> SaRate {
    let inv_alpha = if tail.is_light() { 0.5 } else { 1.0 / tail.alpha() };
    let gamma0 = (chi - inv_alpha).min(chi + 2.0 * sigma - 2.0);
    SaRate {
        gamma0,
        guaranteed: gamma0 > 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayEstimate {
    /// Minus the slope of `log2(median error)` against `r`.
    pub gamma_hat: f64,
    pub stderr: f64,
    pub r_lo: u32,
    pub r_hi: u32,
    /// Completed traces used.
    pub replications: usize,
    pub aborted: usize,
}

/// Decay exponent from the median checkpoint error over non-aborted traces.
pub fn decay_exponent(traces: &[SaTrace], range: FitRange) -> Result<DecayEstimate> {
    let complete: Vec<&SaTrace> = traces.iter().filter(|t| !t.is_aborted()).collect();
    if complete.is_empty() {
        return Err(Error::SampleTooShort { len: 0, needed: 1 });
    }
    let range = FitRange::new(range.lo, range.hi)?;
    let points: Vec<(u32, f64)> = range
        .levels()
        .map(|r| {
            let errors: Vec<f64> = complete
                .iter()
                .map(|t| t.error_at(r).ok_or(Error::LevelsExceedLength { levels: r, len: 0 }))
                .collect::<Result<_>>()?;
            Ok((r, median(&errors).unwrap_or(f64::NAN)))
        })
        .collect::<Result<_>>()?;
    let (slope, stderr) = log2_slope(&points)?;
    Ok(DecayEstimate {
        gamma_hat: -slope,
        stderr,
        r_lo: range.lo,
        r_hi: range.hi,
        replications: complete.len(),
        aborted: traces.len() - complete.len(),
    })
}
