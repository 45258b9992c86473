//! Outer-product series `D_k = X_k Xbar_k^T`, their analytic mean, dyadic
//! partial-sum ledgers and the diagonal/off-diagonal decomposition.

mod decomposition;
mod ledger;
mod truncation;

pub use decomposition::{
    decompose, piece_series, window_for, Decomposition, Piece, PieceCheckpoint, PieceSeries,
};
pub use ledger::{centered_ledger, Checkpoint, LedgerBuilder, PartialSumLedger};
pub use truncation::{truncated_split, truncation_theta, TruncatedSplit};

use nalgebra::DMatrix;

use crate::coefficients::{coefficient_inner, CoefficientSpec};
use crate::error::{Error, Result};
use crate::linear_process::VectorSeries;

/// `D_1..D_n`, each `rows x cols`, stored row-major one matrix after another.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterSeries {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl OuterSeries {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.rows * self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Entries of `D_{i+1}`, row-major.
    pub fn term(&self, i: usize) -> &[f64] {
        let size = self.rows * self.cols;
        &self.data[i * size..(i + 1) * size]
    }

    pub fn matrix(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, self.term(i))
    }
}

/// Entrywise outer products of two equally long vector series.
pub fn outer_series(x: &VectorSeries, x_bar: &VectorSeries) -> Result<OuterSeries> {
    if x.len() != x_bar.len() {
        return Err(Error::DimensionMismatch(format!(
            "path lengths differ: {} and {}",
            x.len(),
            x_bar.len()
        )));
    }
    let (rows, cols) = (x.dim(), x_bar.dim());
    let mut data = Vec::with_capacity(x.len() * rows * cols);
    for i in 0..x.len() {
        let (a, b) = (x.row(i), x_bar.row(i));
        for ai in a {
            data.extend(b.iter().map(|bj| ai * bj));
        }
    }
    Ok(OuterSeries { rows, cols, data })
}

/// `D = sum_{|l| <= L} C_l Sigma Cbar_l^T` with a bound on the truncated tail.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticMean {
    pub matrix: DMatrix<f64>,
    /// Max-entry bound on the omitted `|l| > L` part.
    pub remainder: f64,
}

impl AnalyticMean {
    /// The `1 x 1` mean as a scalar.
    pub fn scalar(&self) -> Option<f64> {
        (self.matrix.nrows() == 1 && self.matrix.ncols() == 1).then(|| self.matrix[(0, 0)])
    }
}

/// Mean of `D_k` for the kernels truncated at half-width `L`, given the
/// innovation cross moment `Sigma = E[Xi Xibar^T]`.
pub fn analytic_mean(
    coef: &CoefficientSpec,
    coef_bar: &CoefficientSpec,
    cross_moment: &DMatrix<f64>,
    half_width: usize,
) -> Result<AnalyticMean> {
    if cross_moment.nrows() != coef.cols() || cross_moment.ncols() != coef_bar.cols() {
        return Err(Error::DimensionMismatch(format!(
            "cross moment is {}x{}, kernels read {} and {} coordinates",
            cross_moment.nrows(),
            cross_moment.ncols(),
            coef.cols(),
            coef_bar.cols()
        )));
    }
    let inner = coefficient_inner(coef, coef_bar, 0, half_width)?;
    let shape = coef.direction() * cross_moment * coef_bar.direction().transpose();
    let max_entry = shape.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(AnalyticMean {
        matrix: shape * inner.value,
        remainder: inner.remainder * max_entry,
    })
}
