//! I.i.d. zero-mean innovation pairs and their moment and tail oracles.
//!
//! Heavy-tailed families are sign-symmetrized: a magnitude is drawn from a
//! non-negative law and a fair random sign is attached, which keeps every
//! absolute moment and tail exponent while forcing mean zero.

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{invalid, Error, Result};
use crate::quadrature;
use crate::seed;

const QUAD_TOL: f64 = 1e-13;

/// Marginal law of one innovation coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnovationSpec {
    /// Power law magnitude with density `(beta-1)/x_min (x/x_min)^{-beta}` on
    /// `[x_min, inf)`, random sign.
    PowerLawSymmetric { x_min: f64, beta: f64 },
    /// `|t|` with `t` Student-t on `beta - 1` degrees of freedom, random sign.
    FoldedTSymmetric { beta: f64 },
    Gaussian { variance: f64 },
}

impl InnovationSpec {
    pub fn power_law(x_min: f64, beta: f64) -> Result<Self> {
        let spec = Self::PowerLawSymmetric { x_min, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn folded_t(beta: f64) -> Result<Self> {
        let spec = Self::FoldedTSymmetric { beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(variance: f64) -> Result<Self> {
        let spec = Self::Gaussian { variance };
        spec.validate()?;
        Ok(spec)
    }

    /// Power law whose square has tail exponent `alpha`: `beta = 2 alpha + 1`.
    pub fn power_law_with_square_tail(alpha: f64) -> Result<Self> {
        Self::power_law(1.0, 2.0 * alpha + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::PowerLawSymmetric { x_min, beta } => {
                if !(x_min > 0.0 && x_min.is_finite()) {
                    return Err(invalid("x_min", format!("must be positive, got {x_min}")));
                }
                check_beta(beta)
            }
            Self::FoldedTSymmetric { beta } => check_beta(beta),
            Self::Gaussian { variance } => {
                if !(variance > 0.0 && variance.is_finite()) {
                    return Err(invalid(
                        "variance",
                        format!("must be positive, got {variance}"),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Tail exponent of `|xi|`: `P(|xi| > t) ~ t^{-a}`. `None` for light tails.
    pub fn magnitude_tail_exponent(&self) -> Option<f64> {
        match *self {
            Self::PowerLawSymmetric { beta, .. } | Self::FoldedTSymmetric { beta } => {
                Some(beta - 1.0)
            }
            Self::Gaussian { .. } => None,
        }
    }

    /// Absolute moment `E|xi|^r`.
    pub fn moment(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid("r", format!("moment order must be positive, got {r}")));
        }
        self.validate()?;
        match *self {
            Self::PowerLawSymmetric { x_min, beta } => {
                if r >= beta - 1.0 {
                    return Err(Error::MomentDoesNotExist {
                        order: r,
                        bound: beta - 1.0,
                    });
                }
                Ok(x_min.powf(r) * (beta - 1.0) / (beta - 1.0 - r))
            }
            Self::FoldedTSymmetric { beta } => {
                if r >= beta - 1.0 {
                    return Err(Error::MomentDoesNotExist {
                        order: r,
                        bound: beta - 1.0,
                    });
                }
                let q = quadrature::half_line(|x| x.powf(r) * folded_t_density(beta, x), 0.0, QUAD_TOL);
                Ok(q.value)
            }
            Self::Gaussian { variance } => {
                // E|Z|^r = 2^{r/2} Γ((r+1)/2) / sqrt(pi)
                let sd = variance.sqrt();
                Ok(sd.powf(r) * 2f64.powf(r / 2.0) * gamma((r + 1.0) / 2.0)
                    / std::f64::consts::PI.sqrt())
            }
        }
    }

    /// `P(xi^2 > s)`.
    pub fn square_survival(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 1.0;
        }
        match *self {
            Self::PowerLawSymmetric { x_min, beta } => {
                let floor = x_min * x_min;
                if s < floor {
                    1.0
                } else {
                    (s / floor).powf(-(beta - 1.0) / 2.0)
                }
            }
            Self::FoldedTSymmetric { beta } => {
                let t = StudentsT::new(0.0, 1.0, beta - 1.0).expect("validated degrees of freedom");
                2.0 * t.sf(s.sqrt())
            }
            Self::Gaussian { variance } => erfc((s / (2.0 * variance)).sqrt()),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Self::PowerLawSymmetric { x_min, beta } => {
                // one 64-bit word: top 53 bits give u in [0, 1), bit 0 the sign
                let bits = rng.next_u64();
                let u = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                let magnitude = x_min * (1.0 - u).powf(-1.0 / (beta - 1.0));
                if bits & 1 == 1 {
                    -magnitude
                } else {
                    magnitude
                }
            }
            Self::FoldedTSymmetric { beta } => {
                let t = StudentT::new(beta - 1.0).expect("validated degrees of freedom");
                let magnitude: f64 = t.sample(rng);
                let magnitude = magnitude.abs();
                if rng.next_u64() & 1 == 1 {
                    -magnitude
                } else {
                    magnitude
                }
            }
            Self::Gaussian { variance } => {
                let z: f64 = rng.sample(StandardNormal);
                variance.sqrt() * z
            }
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 3.0 && beta.is_finite()) {
        return Err(invalid(
            "beta",
            format!("must exceed 3 for a finite second moment, got {beta}"),
        ));
    }
    Ok(())
}

/// Density of the folded t law with parameter `beta` at `x >= 0`.
pub fn folded_t_density(beta: f64, x: f64) -> f64 {
    let nu = beta - 1.0;
    let log_norm = std::f64::consts::LN_2 + ln_gamma(beta / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln();
    (log_norm - beta / 2.0 * (x * x / nu).ln_1p()).exp()
}

/// Dependence between the two innovation streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// The partner innovation equals the primary one.
    Identical,
    /// The partner innovation is drawn independently.
    Independent,
}

/// Seeded description of a finite innovation sequence `(Xi_l, Xi_bar_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationStream {
    spec: InnovationSpec,
    spec_bar: InnovationSpec,
    coupling: Coupling,
    seed: u64,
    length: usize,
    dimension: usize,
}

impl InnovationStream {
    pub fn new(
        spec: InnovationSpec,
        spec_bar: InnovationSpec,
        coupling: Coupling,
        seed: u64,
        length: usize,
        dimension: usize,
    ) -> Result<Self> {
        spec.validate()?;
        spec_bar.validate()?;
        if length == 0 {
            return Err(invalid("length", "stream length must be at least 1"));
        }
        if dimension == 0 {
            return Err(invalid("dimension", "innovation dimension must be at least 1"));
        }
        if coupling == Coupling::Identical && spec != spec_bar {
            return Err(invalid(
                "coupling",
                "identical coupling requires equal marginal specs",
            ));
        }
        Ok(Self {
            spec,
            spec_bar,
            coupling,
            seed,
            length,
            dimension,
        })
    }

    /// Identical coupling with a single marginal.
    pub fn identical(spec: InnovationSpec, seed: u64, length: usize, dimension: usize) -> Result<Self> {
        Self::new(spec, spec, Coupling::Identical, seed, length, dimension)
    }

    pub fn spec(&self) -> InnovationSpec {
        self.spec
    }

    pub fn spec_bar(&self) -> InnovationSpec {
        self.spec_bar
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Same stream, different length. Prefixes agree across lengths.
    pub fn with_length(&self, length: usize) -> Result<Self> {
        Self::new(
            self.spec,
            self.spec_bar,
            self.coupling,
            self.seed,
            length,
            self.dimension,
        )
    }

    /// Materializes the pair sequence. Coordinates are drawn in index order,
    /// `l` outer and coordinate inner, so a longer stream extends a shorter one.
    pub fn sample(&self) -> InnovationPairs {
        let total = self.length * self.dimension;
        let mut rng = seed::stream_rng(self.seed, 0);
        let xi: Vec<f64> = (0..total).map(|_| self.spec.draw(&mut rng)).collect();
        let xi_bar = match self.coupling {
            Coupling::Identical => None,
            Coupling::Independent => {
                let mut rng = seed::stream_rng(self.seed, 1);
                Some((0..total).map(|_| self.spec_bar.draw(&mut rng)).collect())
            }
        };
        InnovationPairs {
            dimension: self.dimension,
            xi,
            xi_bar,
        }
    }

    /// `E[Xi Xi_bar^T]`: `E[xi^2] I` for identical coupling and zero for
    /// independent zero-mean streams.
    pub fn cross_moment(&self) -> Result<DMatrix<f64>> {
        cross_moment(self.spec, self.coupling, self.dimension)
    }
}

/// `E[Xi Xi_bar^T]` for coordinates drawn i.i.d. from `spec`.
pub fn cross_moment(spec: InnovationSpec, coupling: Coupling, dimension: usize) -> Result<DMatrix<f64>> {
    Ok(match coupling {
        Coupling::Identical => DMatrix::identity(dimension, dimension) * spec.moment(2.0)?,
        Coupling::Independent => DMatrix::zeros(dimension, dimension),
    })
}

/// Materialized innovations, row-major `length x dimension`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationPairs {
    dimension: usize,
    xi: Vec<f64>,
    xi_bar: Option<Vec<f64>>,
}

impl InnovationPairs {
    /// Builds pairs from explicit values. `xi_bar = None` means identical.
    pub fn from_values(dimension: usize, xi: Vec<f64>, xi_bar: Option<Vec<f64>>) -> Result<Self> {
        if dimension == 0 || !xi.len().is_multiple_of(dimension) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not split into rows of {dimension}",
                xi.len()
            )));
        }
        if let Some(bar) = &xi_bar {
            if bar.len() != xi.len() {
                return Err(Error::DimensionMismatch(format!(
                    "partner stream has {} values, primary has {}",
                    bar.len(),
                    xi.len()
                )));
            }
        }
        Ok(Self {
            dimension,
            xi,
            xi_bar,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.xi.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn is_identical(&self) -> bool {
        self.xi_bar.is_none()
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn xi_bar(&self) -> &[f64] {
        self.xi_bar.as_deref().unwrap_or(&self.xi)
    }

    /// Coordinate `i` of the primary stream as a contiguous series.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.xi.iter().skip(i).step_by(self.dimension).copied().collect()
    }

    pub fn column_bar(&self, i: usize) -> Vec<f64> {
        self.xi_bar().iter().skip(i).step_by(self.dimension).copied().collect()
    }

    /// Multiplies every innovation by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dimension: self.dimension,
            xi: self.xi.iter().map(|v| v * factor).collect(),
            xi_bar: self
                .xi_bar
                .as_ref()
                .map(|b| b.iter().map(|v| v * factor).collect()),
        }
    }
}

/// Tail exponent of the innovation product `|xi xi_bar|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailIndex {
    /// `sup_t t^alpha P(|xi xi_bar| > t) < inf` holds at `alpha`. A
    /// conservative value is a guaranteed bound, not necessarily the largest.
    Finite { alpha: f64, conservative: bool },
    /// Every moment of the product is finite.
    LightTail,
}

impl TailIndex {
    pub fn exact(alpha: f64) -> Self {
        Self::Finite {
            alpha,
            conservative: false,
        }
    }

    /// `alpha`, or `+inf` for light tails.
    pub fn alpha(&self) -> f64 {
        match *self {
            Self::Finite { alpha, .. } => alpha,
            Self::LightTail => f64::INFINITY,
        }
    }

    pub fn is_light(&self) -> bool {
        matches!(self, Self::LightTail)
    }
}

/// Largest `alpha` with `sup_t t^alpha P(|xi_1 xi_bar_1| > t) < inf`.
///
/// Identical coupling squares the innovation, halving the magnitude tail
/// exponent. Independent products are reported as the smaller marginal
/// magnitude exponent with the conservative flag set: the exact exponent
/// carries a logarithmic correction when the two tie.
pub fn product_tail_alpha(
    spec: InnovationSpec,
    spec_bar: InnovationSpec,
    coupling: Coupling,
) -> Result<TailIndex> {
    spec.validate()?;
    spec_bar.validate()?;
    match coupling {
        Coupling::Identical => {
            if spec != spec_bar {
                return Err(invalid(
                    "coupling",
                    "identical coupling requires equal marginal specs",
                ));
            }
            Ok(match spec.magnitude_tail_exponent() {
                Some(a) => TailIndex::exact(a / 2.0),
                None => TailIndex::LightTail,
            })
        }
        Coupling::Independent => {
            let a = spec.magnitude_tail_exponent().unwrap_or(f64::INFINITY);
            let b = spec_bar.magnitude_tail_exponent().unwrap_or(f64::INFINITY);
            let alpha = a.min(b);
            Ok(if alpha.is_finite() {
                TailIndex::Finite {
                    alpha,
                    conservative: true,
                }
            } else {
                TailIndex::LightTail
            })
        }
    }
}

/// Minimum number of order statistics accepted by [`hill_tail_index`].
pub const HILL_MIN_K: usize = 50;

/// Hill estimator of the tail index over the top `k` order statistics of a
/// non-negative sample: `k / sum_{i<k} ln(X_(i) / X_(k))`, descending order.
pub fn hill_tail_index(sample: &[f64], k: usize) -> Result<f64> {
    if k < HILL_MIN_K {
        return Err(invalid("k", format!("need at least {HILL_MIN_K} order statistics, got {k}")));
    }
    if sample.len() <= k {
        return Err(Error::SampleTooShort {
            len: sample.len(),
            needed: k,
        });
    }
    if sample.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid("sample", "values must be finite and non-negative"));
    }
    let mut values = sample.to_vec();
    // descending: index k holds the (k+1)-th largest, indices < k the top k
    let (top, threshold, _) = values.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let threshold = *threshold;
    if threshold <= 0.0 {
        return Err(Error::Degenerate(
            "threshold order statistic is zero".into(),
        ));
    }
    let log_excess: f64 = top.iter().map(|x| (x / threshold).ln()).sum();
    if log_excess <= 0.0 {
        return Err(Error::Degenerate(
            "top order statistics show no variation".into(),
        ));
    }
    Ok(k as f64 / log_excess)
}
