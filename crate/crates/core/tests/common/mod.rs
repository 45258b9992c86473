#![allow(dead_code)]

use mslln_core::coefficients::CoefficientSpec;
use rand::Rng;

/// Brute-force `X_k = sum_{|k-l| <= L} c_{k-l} M Xi_l`, `k = 1..n`, with the
/// stream row `p` holding `Xi_l` for `l = p + 1 - L`. Row-major `n x d`.
pub fn naive_path(coef: &CoefficientSpec, xi: &[f64], n: usize, half_width: usize) -> Vec<f64> {
    let m = coef.cols();
    let d = coef.rows();
    let w = half_width as i64;
    let mut out = vec![0.0; n * d];
    for k in 1..=n as i64 {
        for l in (k - w)..=(k + w) {
            let c = coef.truncated_envelope(k - l);
            let p = (l - 1 + w) as usize;
            for r in 0..d {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += coef.direction()[(r, i)] * xi[p * m + i];
                }
                out[(k as usize - 1) * d + r] += c * acc;
            }
        }
    }
    out
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

pub fn uniform(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = mslln_core::seed::stream_rng(seed, 7);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

pub fn sample_sd(v: &[f64]) -> f64 {
    mslln_core::stats::variance(v).sqrt()
}
