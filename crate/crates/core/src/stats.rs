//! Small descriptive statistics used by the estimators and reports.

use crate::error::{Error, Result};

/// Median of a sample; the mean of the two central values for even lengths.
/// NaNs are not allowed.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Robust location estimate for samples whose variance may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianOfMeans {
    pub estimate: f64,
    /// Scaled median absolute deviation of the group means divided by the
    /// square root of the group count. Only a rough yardstick: it is not a
    /// standard error when the variance is infinite.
    pub pseudo_stderr: f64,
    pub groups: usize,
}

/// Splits `values` into `groups` contiguous groups of equal size (dropping the
/// remainder), averages each and returns the median of the group means.
pub fn median_of_means(values: &[f64], groups: usize) -> Result<MedianOfMeans> {
    if groups == 0 || values.len() < groups {
        return Err(Error::SampleTooShort {
            len: values.len(),
            needed: groups.saturating_sub(1),
        });
    }
    let size = values.len() / groups;
    let means: Vec<f64> = values.chunks_exact(size).take(groups).map(mean).collect();
    let estimate = median(&means).unwrap_or(f64::NAN);
    let deviations: Vec<f64> = means.iter().map(|m| (m - estimate).abs()).collect();
    let mad = median(&deviations).unwrap_or(f64::NAN);
    Ok(MedianOfMeans {
        estimate,
        pseudo_stderr: 1.4826 * mad / (groups as f64).sqrt(),
        groups,
    })
}

/// Ratio of the fourth to the squared second raw moment.
pub fn moment_ratio(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m2 = values.iter().map(|v| v * v).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v * v) * (v * v)).sum::<f64>() / n;
    m4 / (m2 * m2)
}

/// Ordinary least squares line through `(x, y)` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; NaN with only two points.
    pub slope_stderr: f64,
}

pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::SampleTooShort {
            len: points.len(),
            needed: 1,
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae are equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points
        .iter()
        .map(|p| {
            let e = p.1 - intercept - slope * p.0;
            e * e
        })
        .sum();
    let slope_stderr = if points.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
    })
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}
