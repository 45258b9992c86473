//! Theoretical rate thresholds, empirical growth exponents from ledgers, and
//! the autocovariance and rank-two Appell applications.

use std::fmt;

use crate::coefficients::{coefficient_inner, CoefficientSpec};
use crate::error::{invalid, Error, Result};
use crate::innovations::TailIndex;
use crate::partial_sums::{LedgerBuilder, PartialSumLedger};
use crate::stats::{fit_line, median};

/// Tolerance on `alpha = 1 / (2 - sigma - sigma_bar)` for the bifurcation flag.
pub const BIFURCATION_TOL: f64 = 1e-9;

/// Replications required by [`empirical_exponent`].
pub const MIN_REPLICATIONS: usize = 32;

/// Dyadic levels required in a fit.
pub const MIN_FIT_LEVELS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    LrdDominant,
    HtDominant,
    Clt,
    Bifurcation,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::LrdDominant => "LRD-dominant",
            Regime::HtDominant => "HT-dominant",
            Regime::Clt => "CLT",
            Regime::Bifurcation => "Bifurcation",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalRate {
    /// `e* = max(2 - sigma - sigma_bar, 1/alpha, 1/2)`.
    pub exponent: f64,
    pub regime: Regime,
    /// `p* = 1 / e*`.
    pub critical_p: f64,
    /// `|(2 - sigma - sigma_bar) - 1/alpha|`; zero for light tails.
    pub bifurcation_gap: f64,
}

/// Growth exponent of `S_n` predicted for kernels with decay `sigma`,
/// `sigma_bar` and product tail index `alpha`. A light tail counts as
/// `1/alpha = 1/2`; the CLT label wins ties with `1/2`.
pub fn theoretical_exponent(sigma: f64, sigma_bar: f64, tail: TailIndex) -> Result<TheoreticalRate> {
    for (name, s) in [("sigma", sigma), ("sigma_bar", sigma_bar)] {
        if !(s > 0.5 && s <= 1.0) {
            return Err(invalid(name, format!("must lie in (1/2, 1], got {s}")));
        }
    }
    let lrd = 2.0 - sigma - sigma_bar;
    let (ht, alpha) = match tail {
        TailIndex::LightTail => (0.5, f64::INFINITY),
        TailIndex::Finite { alpha, .. } => {
            if !(alpha > 1.0) {
                return Err(invalid("alpha", format!("must exceed 1, got {alpha}")));
            }
            (1.0 / alpha, alpha)
        }
    };
    let exponent = lrd.max(ht).max(0.5);
    let bifurcation = alpha < 2.0 && lrd > 0.0 && (alpha - 1.0 / lrd).abs() <= BIFURCATION_TOL;
    let regime = if bifurcation {
        Regime::Bifurcation
    } else if exponent == 0.5 {
        Regime::Clt
    } else if lrd >= ht {
        Regime::LrdDominant
    } else {
        Regime::HtDominant
    };
    Ok(TheoreticalRate {
        exponent,
        regime,
        critical_p: 1.0 / exponent,
        bifurcation_gap: if tail.is_light() { 0.0 } else { (lrd - ht).abs() },
    })
}

/// Inclusive range of block indices `r` used in a slope fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitRange {
    pub lo: u32,
    pub hi: u32,
}

impl FitRange {
    pub fn new(lo: u32, hi: u32) -> Result<Self> {
        if hi < lo || hi - lo + 1 < MIN_FIT_LEVELS {
            return Err(invalid(
                "fit range",
                format!("[{lo}, {hi}] has fewer than {MIN_FIT_LEVELS} levels"),
            ));
        }
        Ok(Self { lo, hi })
    }

    /// `[max(8, R - 8), R - 1]`, widened downward to four levels when `R` is
    /// small.
    pub fn default_for(levels: u32) -> Result<Self> {
        if levels < MIN_FIT_LEVELS {
            return Err(invalid(
                "levels",
                format!("need at least {MIN_FIT_LEVELS} dyadic levels, got {levels}"),
            ));
        }
        let hi = levels - 1;
        let lo = 8.max(levels.saturating_sub(8)).min(hi + 1 - MIN_FIT_LEVELS);
        Self::new(lo, hi)
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> {
        self.lo..=self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub slope: f64,
    pub stderr: f64,
    pub r_lo: u32,
    pub r_hi: u32,
    pub replications: usize,
    /// `(r, median M_r)` over the fit range.
    pub medians: Vec<(u32, f64)>,
}

/// Median of `M_r` across replications.
pub fn median_block_max(ledgers: &[PartialSumLedger], r: u32) -> Result<f64> {
    let values: Vec<f64> = ledgers
        .iter()
        .map(|l| {
            l.block_max(r).ok_or(Error::LevelsExceedLength {
                levels: r + 1,
                len: 1usize << l.levels,
            })
        })
        .collect::<Result<_>>()?;
    median(&values).ok_or(Error::SampleTooShort { len: 0, needed: 1 })
}

/// OLS slope of `log2(value)` against `r`.
pub fn log2_slope(points: &[(u32, f64)]) -> Result<(f64, f64)> {
    if let Some((r, _)) = points.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Degenerate(format!(
            "non-positive or non-finite value at level {r}"
        )));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|(r, v)| (*r as f64, v.log2())).collect();
    let fit = fit_line(&xy)?;
    Ok((fit.slope, fit.slope_stderr))
}

/// Slope of `log2(median_reps M_r)` against `r` with at least
/// [`MIN_REPLICATIONS`] ledgers.
pub fn empirical_exponent(ledgers: &[PartialSumLedger], range: FitRange) -> Result<RateEstimate> {
    empirical_exponent_with(ledgers, range, MIN_REPLICATIONS)
}

pub fn empirical_exponent_with(
    ledgers: &[PartialSumLedger],
    range: FitRange,
    min_replications: usize,
) -> Result<RateEstimate> {
    if ledgers.len() < min_replications.max(1) {
        return Err(Error::SampleTooShort {
            len: ledgers.len(),
            needed: min_replications,
        });
    }
    let range = FitRange::new(range.lo, range.hi)?;
    let medians: Vec<(u32, f64)> = range
        .levels()
        .map(|r| median_block_max(ledgers, r).map(|m| (r, m)))
        .collect::<Result<_>>()?;
    let (slope, stderr) = log2_slope(&medians)?;
    Ok(RateEstimate {
        slope,
        stderr,
        r_lo: range.lo,
        r_hi: range.hi,
        replications: ledgers.len(),
        medians,
    })
}

/// `gamma_h = E[xi^2] sum_j c_j c_{j+h}` over the truncated kernel.
pub fn population_autocov(
    coef: &CoefficientSpec,
    second_moment: f64,
    h: usize,
    half_width: usize,
) -> Result<f64> {
    Ok(second_moment * coefficient_inner(coef, coef, h as i64, half_width)?.value)
}

/// Upper end `min(1/(2 - 2 sigma), alpha, 2)` of the admissible `p` for
/// autocovariances, where `alpha` is the tail index of `xi^2`.
pub fn autocov_critical_p(sigma: f64, tail: TailIndex) -> f64 {
    let lrd = if sigma >= 1.0 {
        f64::INFINITY
    } else {
        1.0 / (2.0 - 2.0 * sigma)
    };
    lrd.min(tail.alpha()).min(2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutocovPath {
    pub lag: usize,
    pub n: usize,
    pub gamma: f64,
    pub gamma_hat: f64,
    /// Ledger of `x_k x_{k+h} - gamma_h`.
    pub ledger: PartialSumLedger,
}

impl AutocovPath {
    /// `(n_r, gamma_hat_{n_r} - gamma_h)` at every checkpoint.
    pub fn deviations(&self) -> Vec<(usize, f64)> {
        self.ledger
            .checkpoints
            .iter()
            .map(|c| (c.n, c.sum[(0, 0)] / c.n as f64))
            .collect()
    }
}

/// Sample autocovariance `(1/n) sum_{k<=n} x_k x_{k+h}` and its centered
/// ledger up to `levels`.
pub fn autocov_pair(x: &[f64], n: usize, h: i64, gamma: f64, levels: u32) -> Result<AutocovPath> {
    if h < 0 {
        return Err(invalid("h", format!("lag must be non-negative, got {h}")));
    }
    let lag = h as usize;
    if x.len() < n + lag {
        return Err(Error::SampleTooShort {
            len: x.len(),
            needed: n + lag,
        });
    }
    if n == 0 || n < 1usize << levels {
        return Err(Error::LevelsExceedLength { levels, len: n });
    }
    let mut builder = LedgerBuilder::new(1, 1, levels);
    let mut total = 0.0;
    for k in 0..n {
        let p = x[k] * x[k + lag];
        total += p;
        builder.push_scalar(p - gamma);
    }
    Ok(AutocovPath {
        lag,
        n,
        gamma,
        gamma_hat: total / n as f64,
        ledger: builder.finish()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedDeviation {
    pub value: f64,
    /// `false` when `p` is outside `(0, critical_p)`.
    pub admissible: bool,
}

/// `n^{1 - 1/p} (gamma_hat - gamma)`.
pub fn normalized_deviation(
    n: usize,
    p: f64,
    gamma_hat: f64,
    gamma: f64,
    critical_p: f64,
) -> NormalizedDeviation {
    let value = if p == 1.0 {
        gamma_hat - gamma
    } else {
        (n as f64).powf(1.0 - 1.0 / p) * (gamma_hat - gamma)
    };
    NormalizedDeviation {
        value,
        admissible: p > 0.0 && p < critical_p,
    }
}

/// Ledger of `A_2(x_k) = x_k^2 - mu2` for `k <= 2^{levels+1} - 1`.
pub fn appell2_sums(x: &[f64], mu2: f64, levels: u32) -> Result<PartialSumLedger> {
    if x.len() < 1usize << levels {
        return Err(Error::LevelsExceedLength {
            levels,
            len: x.len(),
        });
    }
    let mut builder = LedgerBuilder::new(1, 1, levels);
    for v in x.iter().take((1usize << (levels + 1)) - 1) {
        builder.push_scalar(v * v - mu2);
    }
    builder.finish()
}
