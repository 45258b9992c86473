//! Polynomially decaying coefficient kernels `C_l = c_l M`.
//!
//! The scalar envelope is `c_0 = s` and `c_l = s |l|^{-sigma}` for `l != 0`,
//! truncated at a half-width `L`. `M` is a fixed `d x m` direction matrix of
//! unit operator norm, so `sup_l |l|^sigma ||C_l|| = |s|`.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::stats::compensated_sum;

/// Default ceiling for [`CoefficientSpec::choose_half_width`].
pub const DEFAULT_HALF_WIDTH_CAP: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sidedness {
    TwoSided,
    /// `c_l = 0` for `l < 0`.
    OneSidedCausal,
}

impl Sidedness {
    fn tail_factor(self) -> f64 {
        match self {
            Self::TwoSided => 2.0,
            Self::OneSidedCausal => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSpec {
    sigma: f64,
    sidedness: Sidedness,
    scale: f64,
    direction: DMatrix<f64>,
    half_width: usize,
}

impl CoefficientSpec {
    /// Kernel with an explicit direction matrix, which must have unit
    /// operator norm.
    pub fn new(
        sigma: f64,
        sidedness: Sidedness,
        scale: f64,
        direction: DMatrix<f64>,
        half_width: usize,
    ) -> Result<Self> {
        if !(sigma > 0.5 && sigma <= 1.0) {
            return Err(invalid("sigma", format!("must lie in (1/2, 1], got {sigma}")));
        }
        if !(scale != 0.0 && scale.is_finite()) {
            return Err(invalid("scale", format!("must be finite and nonzero, got {scale}")));
        }
        if direction.nrows() == 0 || direction.ncols() == 0 {
            return Err(invalid("direction", "matrix must be non-empty"));
        }
        let norm = operator_norm(&direction);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "direction",
                format!("operator norm must be 1, got {norm}"),
            ));
        }
        Ok(Self {
            sigma,
            sidedness,
            scale,
            direction,
            half_width,
        })
    }

    /// Scalar kernel (`d = m = 1`).
    pub fn scalar(sigma: f64, sidedness: Sidedness, scale: f64, half_width: usize) -> Result<Self> {
        Self::new(sigma, sidedness, scale, DMatrix::from_element(1, 1, 1.0), half_width)
    }

    /// Kernel `c_l A` for an arbitrary nonzero matrix `A`: the direction is
    /// `A / ||A||` and the operator norm is folded into the scale.
    pub fn from_matrix(
        sigma: f64,
        sidedness: Sidedness,
        matrix: DMatrix<f64>,
        half_width: usize,
    ) -> Result<Self> {
        let norm = operator_norm(&matrix);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("direction", "matrix must be finite and nonzero"));
        }
        Self::new(sigma, sidedness, norm, matrix / norm, half_width)
    }

    /// Identity convolution: `c_0 = scale`, half-width zero.
    pub fn delta(scale: f64) -> Result<Self> {
        Self::scalar(1.0, Sidedness::TwoSided, scale, 0)
    }

    pub fn with_half_width(mut self, half_width: usize) -> Self {
        self.half_width = half_width;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sidedness(&self) -> Sidedness {
        self.sidedness
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn direction(&self) -> &DMatrix<f64> {
        &self.direction
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Output dimension `d`.
    pub fn rows(&self) -> usize {
        self.direction.nrows()
    }

    /// Innovation dimension `m`.
    pub fn cols(&self) -> usize {
        self.direction.ncols()
    }

    /// Untruncated scalar envelope `c_l`.
    pub fn envelope(&self, l: i64) -> f64 {
        if l < 0 && self.sidedness == Sidedness::OneSidedCausal {
            return 0.0;
        }
        if l == 0 {
            self.scale
        } else {
            self.scale * (l.unsigned_abs() as f64).powf(-self.sigma)
        }
    }

    /// Truncated envelope: zero outside `|l| <= half_width`.
    pub fn truncated_envelope(&self, l: i64) -> f64 {
        if l.unsigned_abs() as usize > self.half_width {
            0.0
        } else {
            self.envelope(l)
        }
    }

    /// Envelope table over offsets `-L..=L` for `L = max(half_width, pad)`;
    /// entries beyond the own half-width are zero.
    pub fn envelope_table(&self, pad: usize) -> Vec<f64> {
        let width = self.half_width.max(pad) as i64;
        (-width..=width).map(|l| self.truncated_envelope(l)).collect()
    }

    /// Upper bound on `sum_{|l| > L} c_l^2` by integral comparison:
    /// `s^2 f L^{1 - 2 sigma} / (2 sigma - 1)` with `f = 2` for two-sided and
    /// `f = 1` for causal kernels. At `L = 0` the whole off-centre energy
    /// bound `s^2 f (1 + 1/(2 sigma - 1))` is returned.
    pub fn truncation_error(&self, half_width: usize) -> f64 {
        let s2 = self.scale * self.scale;
        let f = self.sidedness.tail_factor();
        let k = 2.0 * self.sigma - 1.0;
        if half_width == 0 {
            return s2 * f * (1.0 + 1.0 / k);
        }
        s2 * f * (half_width as f64).powf(-k) / k
    }

    /// Upper bound on the total energy `sum_l c_l^2` of the untruncated kernel.
    pub fn energy_bound(&self) -> f64 {
        self.scale * self.scale + self.truncation_error(0)
    }

    /// Smallest power-of-two half-width whose truncation error is at most
    /// `tol^2`, searching up to [`DEFAULT_HALF_WIDTH_CAP`].
    pub fn choose_half_width(&self, tol: f64) -> Result<usize> {
        self.choose_half_width_capped(tol, DEFAULT_HALF_WIDTH_CAP)
    }

    pub fn choose_half_width_capped(&self, tol: f64, cap: usize) -> Result<usize> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid("tol", format!("must be positive, got {tol}")));
        }
        let target = tol * tol;
        let mut width = 1usize;
        while width <= cap {
            if self.truncation_error(width) <= target {
                return Ok(width);
            }
            width = match width.checked_mul(2) {
                Some(w) => w,
                None => break,
            };
        }
        Err(Error::HalfWidthCapExceeded { cap })
    }
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(*v))
}

/// Truncated lagged inner product with a remainder bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerProduct {
    /// `sum_l c_l cbar_{l+h}` over `|l| <= L`, `|l + h| <= L`.
    pub value: f64,
    /// Bound on the omitted part of the untruncated sum.
    pub remainder: f64,
}

/// `sum_l c_l cbar_{l+h}` over `|l| <= L`, `|l + h| <= L`, using each kernel
/// truncated at its own half-width, so the value is the exact lag-`h` cross
/// moment factor of the generated paths whenever `L` covers both kernels.
pub fn coefficient_inner(
    spec: &CoefficientSpec,
    spec_bar: &CoefficientSpec,
    h: i64,
    half_width: usize,
) -> Result<InnerProduct> {
    if h.unsigned_abs() as usize > half_width {
        return Err(invalid(
            "h",
            format!("lag {h} exceeds half-width {half_width}"),
        ));
    }
    let width = half_width as i64;
    let lo = (-width).max(-width - h);
    let hi = width.min(width - h);
    let value = compensated_sum(
        (lo..=hi).map(|l| spec.truncated_envelope(l) * spec_bar.truncated_envelope(l + h)),
    );
    // Cauchy-Schwarz on the two tails that the truncation removes
    let cut = spec.half_width().min(half_width);
    let cut_bar = spec_bar.half_width().min(half_width);
    let remainder = (spec.truncation_error(cut) * spec_bar.energy_bound()).sqrt()
        + (spec.energy_bound() * spec_bar.truncation_error(cut_bar)).sqrt();
    Ok(InnerProduct { value, remainder })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_sided(sigma: f64, half_width: usize) -> CoefficientSpec {
        CoefficientSpec::scalar(sigma, Sidedness::TwoSided, 1.0, half_width).unwrap()
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(two_sided(0.75, 0).envelope(16), 0.125);
        assert_eq!(two_sided(1.0, 0).envelope(-2), 0.5);
        let causal = CoefficientSpec::scalar(0.8, Sidedness::OneSidedCausal, 1.0, 10).unwrap();
        assert_eq!(causal.envelope(-3), 0.0);
        assert_eq!(causal.envelope(0), 1.0);
    }

    #[test]
    fn validation() {
        assert!(CoefficientSpec::scalar(0.5, Sidedness::TwoSided, 1.0, 4).is_err());
        assert!(CoefficientSpec::scalar(1.01, Sidedness::TwoSided, 1.0, 4).is_err());
        assert!(CoefficientSpec::scalar(0.7, Sidedness::TwoSided, 0.0, 4).is_err());
        let bad = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(CoefficientSpec::new(0.7, Sidedness::TwoSided, 1.0, bad.clone(), 4).is_err());
        let spec = CoefficientSpec::from_matrix(0.7, Sidedness::TwoSided, bad, 4).unwrap();
        assert!((spec.scale() - 2f64.sqrt()).abs() < 1e-12);
        assert!((operator_norm(spec.direction()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_error_examples() {
        assert!((two_sided(0.75, 0).truncation_error(1_000_000) - 4e-3).abs() < 1e-15);
        assert!((two_sided(1.0, 0).truncation_error(1000) - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn choose_half_width_examples() {
        assert_eq!(two_sided(0.75, 0).choose_half_width(0.0632).unwrap(), 1 << 20);
        assert_eq!(two_sided(1.0, 0).choose_half_width(1.0).unwrap(), 2);
        assert_eq!(
            two_sided(0.51, 0).choose_half_width(1e-3),
            Err(Error::HalfWidthCapExceeded {
                cap: DEFAULT_HALF_WIDTH_CAP
            })
        );
    }

    #[test]
    fn inner_product_of_delta_kernel() {
        let delta = CoefficientSpec::delta(1.0).unwrap();
        let ip = coefficient_inner(&delta, &delta, 0, 0).unwrap();
        assert_eq!(ip.value, 1.0);
    }

    #[test]
    fn inner_product_rejects_large_lag() {
        let k = two_sided(0.8, 4);
        assert!(coefficient_inner(&k, &k, 5, 4).is_err());
    }

    #[test]
    fn envelope_table_pads_with_zeros() {
        let k = two_sided(1.0, 1);
        assert_eq!(k.envelope_table(2), vec![0.0, 1.0, 1.0, 1.0, 0.0]);
    }
}
