//! Bounded/remainder split of squared innovations at a truncation level `u`.

use crate::error::{invalid, Result};
use crate::innovations::InnovationSpec;
use crate::quadrature;

const QUAD_TOL: f64 = 1e-12;

/// `theta(u) = int_0^u P(xi^2 > s) ds = E[xi^2 min u]`, with the quadrature
/// error estimate when no closed form is used.
pub fn truncation_theta(spec: &InnovationSpec, u: f64) -> Result<(f64, Option<f64>)> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(invalid("u", format!("truncation level must be positive, got {u}")));
    }
    spec.validate()?;
    match *spec {
        InnovationSpec::PowerLawSymmetric { x_min, beta } => {
            let floor = x_min * x_min;
            if u <= floor {
                return Ok((u, None));
            }
            // P(xi^2 > s) = (s / floor)^{-a} above the floor, a = (beta - 1) / 2
            let a = (beta - 1.0) / 2.0;
            let tail = if (a - 1.0).abs() < 1e-12 {
                floor * (u / floor).ln()
            } else {
                floor * (1.0 - (u / floor).powf(1.0 - a)) / (a - 1.0)
            };
            Ok((floor + tail, None))
        }
        _ => {
            let q = quadrature::interval(|s| spec.square_survival(s), 0.0, u, QUAD_TOL);
            Ok((q.value, Some(q.error)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSplit {
    pub u: f64,
    pub theta: f64,
    /// `E[v]`.
    pub mean: f64,
    /// `(v_i min u) - theta`.
    pub bounded: Vec<f64>,
    /// `(v_i - E[v]) - bounded_i`.
    pub remainder: Vec<f64>,
    pub quadrature_error: Option<f64>,
}

/// Splits `v_i - E[v]` for `v_i = xi_i^2` into a part bounded by `u + theta`
/// and a remainder carrying the excess over `u`.
pub fn truncated_split(values: &[f64], u: f64, spec: &InnovationSpec) -> Result<TruncatedSplit> {
    let (theta, quadrature_error) = truncation_theta(spec, u)?;
    let mean = spec.moment(2.0)?;
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(invalid("values", format!("must be nonnegative, got {v}")));
    }
    let bounded: Vec<f64> = values.iter().map(|v| v.min(u) - theta).collect();
    let remainder = values
        .iter()
        .zip(&bounded)
        .map(|(v, b)| (v - mean) - b)
        .collect();
    Ok(TruncatedSplit {
        u,
        theta,
        mean,
        bounded,
        remainder,
        quadrature_error,
    })
}
