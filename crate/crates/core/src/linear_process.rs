//! Truncated linear processes `X_k = sum_l C_{k-l} Xi_l`.
//!
//! Innovation layout: for half-width `L` the sample index `0` holds `l = 1 - L`,
//! so path index `k = 1..n` reads innovations `k - L ..= k + L`, i.e. sample
//! positions `k - 1 ..= k - 1 + 2L`. A stream of length `n + 2L` covers a path
//! of length `n`, and longer streams extend shorter ones, which keeps dyadic
//! checkpoints nested.

use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::coefficients::{CoefficientSpec, Sidedness};
use crate::error::{invalid, Error, Result};
use crate::innovations::{InnovationPairs, InnovationStream};

/// Products of path length and kernel length above which `Auto` switches to
/// the FFT route.
const DIRECT_WORK_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionStrategy {
    /// Blocked direct summation in a fixed order.
    Direct,
    /// Real FFT of the padded innovations against the kernel spectrum.
    Fft,
    #[default]
    Auto,
}

/// Convolution of a fixed offset table `c_{-L..=L}` against innovation
/// series laid out as described in the module docs.
pub struct ConvolutionPlan {
    table: Vec<f64>,
    half_width: usize,
    n: usize,
    route: Route,
}

enum Route {
    Zero,
    Direct,
    Fft {
        len: usize,
        spectrum: Vec<Complex<f64>>,
        forward: Arc<dyn RealToComplex<f64>>,
        inverse: Arc<dyn ComplexToReal<f64>>,
    },
}

impl std::fmt::Debug for ConvolutionPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let route = match &self.route {
            Route::Zero => "zero".to_string(),
            Route::Direct => "direct".to_string(),
            Route::Fft { len, .. } => format!("fft({len})"),
        };
        f.debug_struct("ConvolutionPlan")
            .field("half_width", &self.half_width)
            .field("n", &self.n)
            .field("route", &route)
            .finish()
    }
}

impl ConvolutionPlan {
    /// `table` must have odd length `2L + 1`.
    pub fn new(table: Vec<f64>, n: usize, strategy: ConvolutionStrategy) -> Result<Self> {
        if table.len() % 2 != 1 {
            return Err(invalid("table", "offset table must have odd length 2L + 1"));
        }
        let half_width = table.len() / 2;
        let use_fft = match strategy {
            ConvolutionStrategy::Direct => false,
            ConvolutionStrategy::Fft => true,
            ConvolutionStrategy::Auto => n.saturating_mul(table.len()) > DIRECT_WORK_LIMIT,
        };
        let route = if table.iter().all(|c| *c == 0.0) {
            Route::Zero
        } else if use_fft {
            let len = (n + 2 * half_width).next_power_of_two().max(2);
            let mut planner = RealFftPlanner::<f64>::new();
            let forward = planner.plan_fft_forward(len);
            let inverse = planner.plan_fft_inverse(len);
            let mut padded = vec![0.0; len];
            padded[..table.len()].copy_from_slice(&table);
            let mut spectrum = forward.make_output_vec();
            forward
                .process(&mut padded, &mut spectrum)
                .expect("buffer sizes come from the plan");
            Route::Fft {
                len,
                spectrum,
                forward,
                inverse,
            }
        } else {
            Route::Direct
        };
        Ok(Self {
            table,
            half_width,
            n,
            route,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn required_length(&self) -> usize {
        self.n + 2 * self.half_width
    }

    /// `out[k-1] = sum_{j=-L}^{L} c_j series[k - 1 - j + L]` for `k = 1..n`.
    pub fn apply(&self, series: &[f64]) -> Result<Vec<f64>> {
        let need = self.required_length();
        if series.len() < need {
            return Err(Error::StreamTooShort {
                have: series.len(),
                need,
            });
        }
        let width = 2 * self.half_width;
        Ok(match &self.route {
            Route::Zero => vec![0.0; self.n],
            Route::Direct => (0..self.n)
                .map(|i| {
                    series[i..=i + width]
                        .iter()
                        .rev()
                        .zip(&self.table)
                        .map(|(x, c)| x * c)
                        .sum()
                })
                .collect(),
            Route::Fft {
                len,
                spectrum,
                forward,
                inverse,
            } => {
                let mut buf = vec![0.0; *len];
                buf[..need].copy_from_slice(&series[..need]);
                let mut freq = forward.make_output_vec();
                forward
                    .process(&mut buf, &mut freq)
                    .expect("buffer sizes come from the plan");
                for (a, b) in freq.iter_mut().zip(spectrum) {
                    *a *= b;
                }
                inverse
                    .process(&mut freq, &mut buf)
                    .expect("buffer sizes come from the plan");
                let norm = 1.0 / *len as f64;
                buf[width..width + self.n].iter().map(|v| v * norm).collect()
            }
        })
    }
}

/// Row-major series of `len` vectors of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSeries {
    dim: usize,
    data: Vec<f64>,
}

impl VectorSeries {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not split into vectors of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn scalar(data: Vec<f64>) -> Self {
        Self { dim: 1, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Vector at zero-based position `i` (path index `k = i + 1`).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Coordinate `c` as a contiguous series.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// Rows `start..start + len`.
    pub fn window(&self, start: usize, len: usize) -> VectorSeries {
        VectorSeries {
            dim: self.dim,
            data: self.data[start * self.dim..(start + len) * self.dim].to_vec(),
        }
    }
}

/// The pair of paths `(x_1..x_n, xbar_1..xbar_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPaths {
    pub x: VectorSeries,
    pub x_bar: VectorSeries,
}

impl PairPaths {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Reusable generator for a fixed kernel pair and path length. Kernel
/// spectra are computed once, so replications only pay for the innovations.
#[derive(Debug)]
pub struct PathGenerator {
    coef: CoefficientSpec,
    coef_bar: CoefficientSpec,
    n: usize,
    half_width: usize,
    plan: ConvolutionPlan,
    plan_bar: Option<ConvolutionPlan>,
}

impl PathGenerator {
    pub fn new(
        coef: CoefficientSpec,
        coef_bar: CoefficientSpec,
        n: usize,
        strategy: ConvolutionStrategy,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "path length must be at least 1"));
        }
        if coef.cols() != coef_bar.cols() {
            return Err(Error::DimensionMismatch(format!(
                "kernels read {} and {} innovation coordinates",
                coef.cols(),
                coef_bar.cols()
            )));
        }
        let half_width = coef.half_width().max(coef_bar.half_width());
        let plan = ConvolutionPlan::new(coef.envelope_table(half_width), n, strategy)?;
        let plan_bar = if coef_bar == coef {
            None
        } else {
            Some(ConvolutionPlan::new(
                coef_bar.envelope_table(half_width),
                n,
                strategy,
            )?)
        };
        Ok(Self {
            coef,
            coef_bar,
            n,
            half_width,
            plan,
            plan_bar,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Innovation count needed: `n + 2L`.
    pub fn required_length(&self) -> usize {
        self.n + 2 * self.half_width
    }

    pub fn generate(&self, innovations: &InnovationPairs) -> Result<PairPaths> {
        if innovations.dimension() != self.coef.cols() {
            return Err(Error::DimensionMismatch(format!(
                "innovations have dimension {}, kernel expects {}",
                innovations.dimension(),
                self.coef.cols()
            )));
        }
        if innovations.len() < self.required_length() {
            return Err(Error::StreamTooShort {
                have: innovations.len(),
                need: self.required_length(),
            });
        }
        let m = innovations.dimension();
        let columns: Vec<Vec<f64>> = (0..m).map(|i| innovations.column(i)).collect();
        let filtered: Vec<Vec<f64>> = columns
            .iter()
            .map(|c| self.plan.apply(c))
            .collect::<Result<_>>()?;
        let x = mix_columns(&self.coef, &filtered, self.n);

        let x_bar = if innovations.is_identical() && self.plan_bar.is_none() {
            x.clone()
        } else {
            let bar_columns: Vec<Vec<f64>> = if innovations.is_identical() {
                columns
            } else {
                (0..m).map(|i| innovations.column_bar(i)).collect()
            };
            let plan = self.plan_bar.as_ref().unwrap_or(&self.plan);
            let filtered: Vec<Vec<f64>> = bar_columns
                .iter()
                .map(|c| plan.apply(c))
                .collect::<Result<_>>()?;
            mix_columns(&self.coef_bar, &filtered, self.n)
        };
        Ok(PairPaths { x, x_bar })
    }
}

// X_k = M u_k, u_k the envelope-filtered innovation vector
fn mix_columns(coef: &CoefficientSpec, filtered: &[Vec<f64>], n: usize) -> VectorSeries {
    let m = coef.direction();
    let d = m.nrows();
    let mut data = vec![0.0; n * d];
    for k in 0..n {
        for r in 0..d {
            data[k * d + r] = filtered
                .iter()
                .enumerate()
                .map(|(i, col)| m[(r, i)] * col[k])
                .sum();
        }
    }
    VectorSeries { dim: d, data }
}

/// Everything needed to produce one pair of paths.
#[derive(Debug, Clone)]
pub struct PathConfig {
    pub coef: CoefficientSpec,
    pub coef_bar: CoefficientSpec,
    pub stream: InnovationStream,
    pub n: usize,
    pub strategy: ConvolutionStrategy,
}

impl PathConfig {
    /// Half-width of the innovation layout, the larger of the two kernels'.
    pub fn half_width(&self) -> usize {
        self.coef.half_width().max(self.coef_bar.half_width())
    }
}

/// Generates `(x, xbar)` from a seeded stream covering `[1 - L, n + L]`.
pub fn generate_pair_paths(config: &PathConfig) -> Result<PairPaths> {
    let generator = PathGenerator::new(
        config.coef.clone(),
        config.coef_bar.clone(),
        config.n,
        config.strategy,
    )?;
    if config.stream.length() < generator.required_length() {
        return Err(Error::StreamTooShort {
            have: config.stream.length(),
            need: generator.required_length(),
        });
    }
    generator.generate(&config.stream.sample())
}

/// `(x_1..x_n, x_{1+h}..x_{n+h})` from one causal kernel and the primary
/// innovations. The stream must cover `n + h + 2L` values.
pub fn generate_lagged_pair(
    coef: &CoefficientSpec,
    stream: &InnovationStream,
    n: usize,
    h: usize,
    strategy: ConvolutionStrategy,
) -> Result<(VectorSeries, VectorSeries)> {
    let path = extended_path(coef, &stream.sample(), n + h, strategy)?;
    Ok((path.window(0, n), path.window(h, n)))
}

/// Causal path `x_1..x_len` from the primary innovations.
pub fn extended_path(
    coef: &CoefficientSpec,
    innovations: &InnovationPairs,
    len: usize,
    strategy: ConvolutionStrategy,
) -> Result<VectorSeries> {
    if coef.sidedness() != Sidedness::OneSidedCausal {
        return Err(invalid("coef", "lagged pairs require a one-sided causal kernel"));
    }
    let primary = InnovationPairs::from_values(innovations.dimension(), innovations.xi().to_vec(), None)?;
    let generator = PathGenerator::new(coef.clone(), coef.clone(), len, strategy)?;
    Ok(generator.generate(&primary)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::InnovationSpec;

    #[test]
    fn delta_kernel_is_identity() {
        let delta = CoefficientSpec::delta(1.0).unwrap();
        let g = InnovationSpec::gaussian(1.0).unwrap();
        let stream = InnovationStream::identical(g, 5, 64, 1).unwrap();
        let config = PathConfig {
            coef: delta.clone(),
            coef_bar: delta,
            stream: stream.clone(),
            n: 64,
            strategy: ConvolutionStrategy::Auto,
        };
        let paths = generate_pair_paths(&config).unwrap();
        assert_eq!(paths.x.as_slice(), stream.sample().xi());
    }

    #[test]
    fn short_stream_is_rejected() {
        let k = CoefficientSpec::scalar(0.8, Sidedness::TwoSided, 1.0, 4).unwrap();
        let g = InnovationSpec::gaussian(1.0).unwrap();
        let stream = InnovationStream::identical(g, 5, 20, 1).unwrap();
        let config = PathConfig {
            coef: k.clone(),
            coef_bar: k,
            stream,
            n: 16,
            strategy: ConvolutionStrategy::Direct,
        };
        assert_eq!(
            generate_pair_paths(&config).unwrap_err(),
            Error::StreamTooShort { have: 20, need: 24 }
        );
    }

    #[test]
    fn lagged_pair_of_delta_is_shift() {
        let delta = CoefficientSpec::scalar(1.0, Sidedness::OneSidedCausal, 1.0, 0).unwrap();
        let g = InnovationSpec::gaussian(1.0).unwrap();
        let stream = InnovationStream::identical(g, 2, 40, 1).unwrap();
        let xi = stream.sample();
        let (a, b) = generate_lagged_pair(&delta, &stream, 30, 3, ConvolutionStrategy::Auto).unwrap();
        assert_eq!(a.as_slice(), &xi.xi()[..30]);
        assert_eq!(b.as_slice(), &xi.xi()[3..33]);
        let (a0, b0) = generate_lagged_pair(&delta, &stream, 30, 0, ConvolutionStrategy::Auto).unwrap();
        assert_eq!(a0, b0);
    }

    #[test]
    fn lagged_pair_requires_causal_kernel() {
        let k = CoefficientSpec::scalar(0.8, Sidedness::TwoSided, 1.0, 2).unwrap();
        let g = InnovationSpec::gaussian(1.0).unwrap();
        let stream = InnovationStream::identical(g, 2, 40, 1).unwrap();
        assert!(generate_lagged_pair(&k, &stream, 10, 1, ConvolutionStrategy::Auto).is_err());
    }

    #[test]
    fn fft_and_direct_agree() {
        let k = CoefficientSpec::scalar(0.7, Sidedness::TwoSided, 1.3, 37).unwrap();
        let g = InnovationSpec::power_law(1.0, 4.5).unwrap();
        let xi = InnovationStream::identical(g, 8, 300 + 74, 1).unwrap().sample();
        let direct = PathGenerator::new(k.clone(), k.clone(), 300, ConvolutionStrategy::Direct)
            .unwrap()
            .generate(&xi)
            .unwrap();
        let fft = PathGenerator::new(k.clone(), k, 300, ConvolutionStrategy::Fft)
            .unwrap()
            .generate(&xi)
            .unwrap();
        let scale = direct.x.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in direct.x.as_slice().iter().zip(fft.x.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }
}
