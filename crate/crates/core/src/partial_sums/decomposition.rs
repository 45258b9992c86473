//! Exact seven-piece split of the scalar centered partial sums.
//!
//! With `d_k = (sum_l c_{k-l} xi_l)(sum_m cbar_{k-m} xibar_m)` and a window
//! `T`, each index `l` is either in the window `[k-T, k+T]`, above it
//! (`l > k+T`) or below it (`l < k-T`). Splitting both factors by region and
//! separating `l = m` gives:
//!
//! | piece              | index pairs `(l, m)`                     |
//! |--------------------|------------------------------------------|
//! | `Diagonal`         | `l = m`                                  |
//! | `InWindowOffDiag`  | both in the window, `l != m`             |
//! | `FarAbove`         | both above, `l != m`                     |
//! | `FarBelow`         | both below, `l != m`                     |
//! | `MixedAbove`       | one in the window, one above             |
//! | `MixedBelow`       | one in the window, one below             |
//! | `Cross`            | one above, one below                     |
//!
//! The off-diagonal pieces have mean zero, so the whole centering constant
//! `d` is carried by `Diagonal`.

use crate::coefficients::CoefficientSpec;
use crate::error::{invalid, Error, Result};
use crate::innovations::InnovationPairs;
use crate::linear_process::{ConvolutionPlan, ConvolutionStrategy, PathGenerator};
use crate::stats::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Piece {
    Diagonal,
    InWindowOffDiag,
    FarAbove,
    FarBelow,
    MixedAbove,
    MixedBelow,
    Cross,
}

impl Piece {
    pub const ALL: [Piece; 7] = [
        Piece::Diagonal,
        Piece::InWindowOffDiag,
        Piece::FarAbove,
        Piece::FarBelow,
        Piece::MixedAbove,
        Piece::MixedBelow,
        Piece::Cross,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Piece::Diagonal => "diagonal",
            Piece::InWindowOffDiag => "in_window_off_diag",
            Piece::FarAbove => "far_above",
            Piece::FarBelow => "far_below",
            Piece::MixedAbove => "mixed_above",
            Piece::MixedBelow => "mixed_below",
            Piece::Cross => "cross",
        }
    }

    /// Fraction of the centering constant `d` subtracted from this piece.
    pub fn centering_share(self) -> f64 {
        match self {
            Piece::Diagonal => 1.0,
            _ => 0.0,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Window half-length `T(n) = floor(n^nu)`.
pub fn window_for(n: usize, nu: f64) -> usize {
    let t = (n as f64).powf(nu) * (1.0 + 1e-12);
    if t >= usize::MAX as f64 {
        usize::MAX
    } else {
        t.floor() as usize
    }
}

/// Per-`k` increments of every piece for a fixed window.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceSeries {
    pub window: usize,
    pub mean: f64,
    pieces: [Vec<f64>; 7],
}

impl PieceSeries {
    pub fn piece(&self, piece: Piece) -> &[f64] {
        &self.pieces[piece.index()]
    }

    pub fn len(&self) -> usize {
        self.pieces[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces[0].is_empty()
    }

    /// Sum of the seven increments at zero-based position `i`.
    pub fn total(&self, i: usize) -> f64 {
        self.pieces.iter().map(|p| p[i]).sum()
    }
}

fn check_scalar(
    innovations: &InnovationPairs,
    coef: &CoefficientSpec,
    coef_bar: &CoefficientSpec,
) -> Result<()> {
    let scalar = |c: &CoefficientSpec| c.rows() == 1 && c.cols() == 1;
    if !scalar(coef) || !scalar(coef_bar) || innovations.dimension() != 1 {
        return Err(Error::Unsupported(
            "the decomposition is defined for scalar processes (d = m = 1)".into(),
        ));
    }
    Ok(())
}

/// Seven-piece increments of `d_k - d` for `k = 1..n` with window `T`.
pub fn piece_series(
    innovations: &InnovationPairs,
    coef: &CoefficientSpec,
    coef_bar: &CoefficientSpec,
    n: usize,
    window: usize,
    mean: f64,
    strategy: ConvolutionStrategy,
) -> Result<PieceSeries> {
    check_scalar(innovations, coef, coef_bar)?;
    let half_width = coef.half_width().max(coef_bar.half_width());
    let need = n + 2 * half_width;
    if innovations.len() < need {
        return Err(Error::StreamTooShort {
            have: innovations.len(),
            need,
        });
    }
    let sign = coef.direction()[(0, 0)];
    let sign_bar = coef_bar.direction()[(0, 0)];
    let table: Vec<f64> = coef.envelope_table(half_width).iter().map(|c| c * sign).collect();
    let table_bar: Vec<f64> = coef_bar
        .envelope_table(half_width)
        .iter()
        .map(|c| c * sign_bar)
        .collect();
    let table_diag: Vec<f64> = table.iter().zip(&table_bar).map(|(a, b)| a * b).collect();

    let xi = innovations.xi();
    let xi_bar = innovations.xi_bar();
    let product: Vec<f64> = xi.iter().zip(xi_bar).map(|(a, b)| a * b).collect();

    // [window, above, below] for each of x, xbar and the diagonal
    let filter = |table: &[f64], series: &[f64]| -> Result<[Vec<f64>; 3]> {
        let mut out: [Vec<f64>; 3] = Default::default();
        for (slot, region) in out.iter_mut().zip(Region::ALL) {
            let t = window_table(table, window, region);
            *slot = ConvolutionPlan::new(t, n, strategy)?.apply(series)?;
        }
        Ok(out)
    };
    let [xw, xa, xb] = filter(&table, xi)?;
    let [yw, ya, yb] = filter(&table_bar, xi_bar)?;
    let [gw, ga, gb] = filter(&table_diag, &product)?;

    let mut pieces: [Vec<f64>; 7] = Default::default();
    for p in pieces.iter_mut() {
        p.reserve_exact(n);
    }
    for k in 0..n {
        pieces[0].push(gw[k] + ga[k] + gb[k] - mean);
        pieces[1].push(xw[k] * yw[k] - gw[k]);
        pieces[2].push(xa[k] * ya[k] - ga[k]);
        pieces[3].push(xb[k] * yb[k] - gb[k]);
        pieces[4].push(xw[k] * ya[k] + xa[k] * yw[k]);
        pieces[5].push(xw[k] * yb[k] + xb[k] * yw[k]);
        pieces[6].push(xa[k] * yb[k] + xb[k] * ya[k]);
    }
    Ok(PieceSeries {
        window,
        mean,
        pieces,
    })
}

/// Offsets `j = k - l` grouped by where `l` falls relative to `[k-T, k+T]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Window,
    Above,
    Below,
}

impl Region {
    const ALL: [Region; 3] = [Region::Window, Region::Above, Region::Below];

    fn contains(self, offset: i64, window: usize) -> bool {
        let t = window.min(i64::MAX as usize) as i64;
        match self {
            Region::Window => offset.abs() <= t,
            // l > k + T  <=>  j < -T
            Region::Above => offset < -t,
            Region::Below => offset > t,
        }
    }
}

/// Copy of an envelope table (offsets `-L..=L`) keeping only `region`.
fn window_table(table: &[f64], window: usize, region: Region) -> Vec<f64> {
    let half = (table.len() / 2) as i64;
    table
        .iter()
        .enumerate()
        .map(|(t, c)| if region.contains(t as i64 - half, window) { *c } else { 0.0 })
        .collect()
}

/// Piece totals at one dyadic checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceCheckpoint {
    pub r: u32,
    pub n: usize,
    pub window: usize,
    pub totals: [f64; 7],
    /// `sum_{k<=n} (d_k - d)` from the generated paths.
    pub direct: f64,
    /// `sum_{k<=n} (|d_k| + |d|)`, the conditioning scale of `direct`.
    pub scale: f64,
}

impl PieceCheckpoint {
    pub fn total(&self, piece: Piece) -> f64 {
        self.totals[piece.index()]
    }

    pub fn pieces_sum(&self) -> f64 {
        compensated_sum(self.totals.iter().copied())
    }

    /// `|sum of pieces - direct| / scale`.
    pub fn reconstruction_error(&self) -> f64 {
        let diff = (self.pieces_sum() - self.direct).abs();
        if self.scale == 0.0 {
            diff
        } else {
            diff / self.scale
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub nu: f64,
    pub mean: f64,
    pub checkpoints: Vec<PieceCheckpoint>,
}

impl Decomposition {
    pub fn max_reconstruction_error(&self) -> f64 {
        self.checkpoints
            .iter()
            .map(PieceCheckpoint::reconstruction_error)
            .fold(0.0, f64::max)
    }

    /// Centering constant assigned to each piece.
    pub fn centering_split(&self) -> [(Piece, f64); 7] {
        Piece::ALL.map(|p| (p, p.centering_share() * self.mean))
    }
}

/// Decomposes `sum_{k<=n_r} (d_k - d)` at every checkpoint `n_r = 2^r`,
/// `r = 0..=levels`, using the window `T(n_r) = floor(n_r^nu)`.
pub fn decompose(
    innovations: &InnovationPairs,
    coef: &CoefficientSpec,
    coef_bar: &CoefficientSpec,
    levels: u32,
    nu: f64,
    mean: f64,
    strategy: ConvolutionStrategy,
) -> Result<Decomposition> {
    check_scalar(innovations, coef, coef_bar)?;
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(invalid("nu", format!("window exponent must be positive, got {nu}")));
    }
    let n = 1usize << levels;
    let paths = PathGenerator::new(coef.clone(), coef_bar.clone(), n, strategy)?.generate(innovations)?;
    let products: Vec<f64> = paths
        .x
        .as_slice()
        .iter()
        .zip(paths.x_bar.as_slice())
        .map(|(a, b)| a * b)
        .collect();

    let mut checkpoints = Vec::with_capacity(levels as usize + 1);
    for r in 0..=levels {
        let n_r = 1usize << r;
        let window = window_for(n_r, nu);
        let series = piece_series(innovations, coef, coef_bar, n_r, window, mean, strategy)?;
        let totals = Piece::ALL.map(|p| compensated_sum(series.piece(p).iter().copied()));
        let direct = compensated_sum(products[..n_r].iter().map(|d| d - mean));
        let scale = products[..n_r].iter().map(|d| d.abs() + mean.abs()).sum();
        checkpoints.push(PieceCheckpoint {
            r,
            n: n_r,
            window,
            totals,
            direct,
            scale,
        });
    }
    Ok(Decomposition {
        nu,
        mean,
        checkpoints,
    })
}
