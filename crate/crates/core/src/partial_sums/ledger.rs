use nalgebra::DMatrix;

use super::{AnalyticMean, OuterSeries};
use crate::error::{Error, Result};

/// Centered partial sum at checkpoint `n = 2^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub r: u32,
    pub n: usize,
    pub sum: DMatrix<f64>,
}

/// Partial sums `S_n = sum_{k<=n} (D_k - D)` recorded at `n_r = 2^r`,
/// `r = 0..=R`, and block maxima `M_r = max_{n_r <= n < n_{r+1}} ||S_n||`
/// for the complete blocks `r = 0..R`. The norm is the max-abs entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSumLedger {
    pub rows: usize,
    pub cols: usize,
    pub levels: u32,
    pub checkpoints: Vec<Checkpoint>,
    pub block_maxima: Vec<f64>,
}

impl PartialSumLedger {
    pub fn checkpoint(&self, r: u32) -> Option<&Checkpoint> {
        self.checkpoints.get(r as usize)
    }

    pub fn block_max(&self, r: u32) -> Option<f64> {
        self.block_maxima.get(r as usize).copied()
    }

    /// Scalar sums at every checkpoint (entry `(0, 0)`).
    pub fn scalar_sums(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.sum[(0, 0)]).collect()
    }
}

/// Streaming construction of a [`PartialSumLedger`] from centered terms.
#[derive(Debug, Clone)]
pub struct LedgerBuilder {
    rows: usize,
    cols: usize,
    levels: u32,
    count: usize,
    running: Vec<f64>,
    checkpoints: Vec<Checkpoint>,
    block_maxima: Vec<f64>,
    current_max: f64,
}

impl LedgerBuilder {
    pub fn new(rows: usize, cols: usize, levels: u32) -> Self {
        Self {
            rows,
            cols,
            levels,
            count: 0,
            running: vec![0.0; rows * cols],
            checkpoints: Vec::with_capacity(levels as usize + 1),
            block_maxima: Vec::with_capacity(levels as usize),
            current_max: 0.0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds one centered term, row-major.
    pub fn push(&mut self, term: &[f64]) {
        debug_assert_eq!(term.len(), self.running.len());
        for (s, t) in self.running.iter_mut().zip(term) {
            *s += t;
        }
        self.advance();
    }

    pub fn push_scalar(&mut self, term: f64) {
        debug_assert_eq!(self.running.len(), 1);
        self.running[0] += term;
        self.advance();
    }

    fn advance(&mut self) {
        self.count += 1;
        let n = self.count;
        if n >= 1usize << (self.levels + 1) {
            // beyond the last recorded block
            return;
        }
        let norm = self.running.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if n.is_power_of_two() {
            if n > 1 {
                self.block_maxima.push(self.current_max);
            }
            self.current_max = 0.0;
            if n.trailing_zeros() <= self.levels {
                self.checkpoints.push(Checkpoint {
                    r: n.trailing_zeros(),
                    n,
                    sum: DMatrix::from_row_slice(self.rows, self.cols, &self.running),
                });
            }
        }
        self.current_max = self.current_max.max(norm);
    }

    pub fn finish(self) -> Result<PartialSumLedger> {
        let needed = 1usize << self.levels;
        if self.count < needed {
            return Err(Error::LevelsExceedLength {
                levels: self.levels,
                len: self.count,
            });
        }
        let mut block_maxima = self.block_maxima;
        block_maxima.truncate(self.levels as usize);
        Ok(PartialSumLedger {
            rows: self.rows,
            cols: self.cols,
            levels: self.levels,
            checkpoints: self.checkpoints,
            block_maxima,
        })
    }
}

/// Ledger of `D_k - D` up to dyadic level `levels`.
pub fn centered_ledger(
    series: &OuterSeries,
    mean: &AnalyticMean,
    levels: u32,
) -> Result<PartialSumLedger> {
    if mean.matrix.nrows() != series.rows() || mean.matrix.ncols() != series.cols() {
        return Err(Error::DimensionMismatch(format!(
            "mean is {}x{}, series terms are {}x{}",
            mean.matrix.nrows(),
            mean.matrix.ncols(),
            series.rows(),
            series.cols()
        )));
    }
    if series.len() < 1usize << levels {
        return Err(Error::LevelsExceedLength {
            levels,
            len: series.len(),
        });
    }
    // row-major copy of D to match the term layout
    let centre: Vec<f64> = mean.matrix.transpose().iter().copied().collect();
    let mut builder = LedgerBuilder::new(series.rows(), series.cols(), levels);
    let mut term = vec![0.0; centre.len()];
    let last = (1usize << (levels + 1)) - 1;
    for i in 0..series.len().min(last) {
        for ((t, d), c) in term.iter_mut().zip(series.term(i)).zip(&centre) {
            *t = d - c;
        }
        builder.push(&term);
    }
    builder.finish()
}
