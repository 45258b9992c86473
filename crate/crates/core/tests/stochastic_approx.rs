use mslln_core::coefficients::{CoefficientSpec, Sidedness};
use mslln_core::innovations::{InnovationSpec, TailIndex};
use mslln_core::linear_process::{ConvolutionStrategy, VectorSeries};
use mslln_core::stats::median_of_means;
use mslln_core::stochastic_approx::{run_recursion, sa_iterate, sa_target, sa_theoretical_rate, SaConfig};
use nalgebra::{DMatrix, DVector};

fn gaussian() -> InnovationSpec {
    InnovationSpec::gaussian(1.0).unwrap()
}

#[test]
fn delta_target() {
    // rows: z (2 coordinates) then y
    let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.3, -0.4, 0.5]);
    let joint = CoefficientSpec::from_matrix(1.0, Sidedness::TwoSided, m.clone(), 0).unwrap();
    let t = sa_target(&joint, &DMatrix::identity(3, 3), 0).unwrap();
    let s2 = joint.scale() * joint.scale();
    let a_expected = DMatrix::identity(2, 2) * (s2 / s2);
    let dir = joint.direction() * joint.scale();
    assert!((t.a.clone() - a_expected).abs().max() < 1e-12);
    // b = E[y z]: cross moments of the last coordinate with the regressors
    assert!((t.b[0] - dir[(2, 0)] * dir[(0, 0)]).abs() < 1e-12);
    assert!((t.b[0] - 0.3).abs() < 1e-12 && (t.b[1] + 0.4).abs() < 1e-12);
}

#[test]
fn noiseless_regression_recovers_truth() {
    let z = DMatrix::from_row_slice(2, 3, &[1.0, 0.2, 0.0, -0.5, 1.0, 0.7]);
    let h_true = DVector::from_vec(vec![1.5, -0.25]);
    let y = h_true.transpose() * &z;
    let mut m = DMatrix::zeros(3, 3);
    m.view_mut((0, 0), (2, 3)).copy_from(&z);
    m.view_mut((2, 0), (1, 3)).copy_from(&y);
    let joint = CoefficientSpec::from_matrix(0.8, Sidedness::TwoSided, m, 64).unwrap();
    let t = sa_target(&joint, &DMatrix::identity(3, 3), 64).unwrap();
    assert!((t.h_star - h_true).abs().max() < 1e-10);
}

#[test]
fn target_matches_monte_carlo_least_squares() {
    let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.1, 0.9, 0.4, 0.5, -0.6, 0.8]);
    let joint = CoefficientSpec::from_matrix(0.8, Sidedness::TwoSided, m, 1 << 10).unwrap();
    let config = SaConfig::new(1.0, joint, gaussian(), 77, 20).unwrap();
    let target = config.target().unwrap();
    let path = config.joint_path().unwrap();
    let groups = 16;
    let size = path.len() / groups;
    let mut estimates = [Vec::new(), Vec::new()];
    for g in 0..groups {
        let mut a = DMatrix::<f64>::zeros(2, 2);
        let mut b = DVector::<f64>::zeros(2);
        for i in g * size..(g + 1) * size {
            let row = path.row(i);
            let z = DVector::from_row_slice(&row[..2]);
            a += &z * z.transpose();
            b += &z * row[2];
        }
        let h = a.lu().solve(&b).unwrap();
        estimates[0].push(h[0]);
        estimates[1].push(h[1]);
    }
    for (i, est) in estimates.iter().enumerate() {
        let mom = median_of_means(est, groups).unwrap();
        assert!(
            (mom.estimate - target.h_star[i]).abs() < 4.0 * mom.pseudo_stderr,
            "coordinate {i}: {mom:?} vs {}",
            target.h_star[i]
        );
    }
}

#[test]
fn noiseless_iid_converges() {
    // y = z with i.i.d. Gaussian z: A = 1, h* = 1
    let m = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
    let joint = CoefficientSpec::from_matrix(1.0, Sidedness::TwoSided, m, 0).unwrap();
    let config = SaConfig::new(1.0, joint, gaussian(), 5, 16).unwrap();
    let (target, trace) = sa_iterate(&config).unwrap();
    assert!((target.h_star[0] - 1.0).abs() < 1e-12);
    assert!(!trace.is_aborted());
    let errors: Vec<f64> = trace.checkpoints.iter().map(|c| c.error).collect();
    assert!(*errors.last().unwrap() < 0.1, "{errors:?}");
    assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
}

#[test]
fn trace_equals_reference_loop() {
    let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, -0.3, 0.8, 0.6, 0.6]);
    let joint = CoefficientSpec::from_matrix(0.75, Sidedness::TwoSided, m, 8).unwrap();
    let mut config = SaConfig::new(0.8, joint, InnovationSpec::power_law(1.0, 4.0).unwrap(), 9, 4).unwrap();
    config.h0 = vec![0.5, -1.0];
    let (target, trace) = sa_iterate(&config).unwrap();
    let path = config.joint_path().unwrap();
    let mut h = [0.5f64, -1.0];
    let mut errs = vec![];
    for k in 1..=16usize {
        let r = path.row(k - 1);
        let mu = (k as f64).powf(-0.8);
        let e = r[2] - (r[0] * h[0] + r[1] * h[1]);
        h = [h[0] + mu * r[0] * e, h[1] + mu * r[1] * e];
        if k.is_power_of_two() {
            let d0 = h[0] - target.h_star[0];
            let d1 = h[1] - target.h_star[1];
            errs.push((d0 * d0 + d1 * d1).sqrt());
        }
    }
    let got: Vec<f64> = trace.checkpoints.iter().map(|c| c.error).collect();
    assert_eq!(got.len(), 5);
    for (a, b) in got.iter().zip(&errs) {
        assert!((a - b).abs() <= 1e-14 * b.max(1.0));
    }
}

#[test]
fn recursion_increment_relation() {
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.7, 0.4]);
    let joint = CoefficientSpec::from_matrix(0.8, Sidedness::TwoSided, m, 64).unwrap();
    let config = SaConfig::new(0.9, joint, InnovationSpec::folded_t(4.0).unwrap(), 3, 12).unwrap();
    let path = config.joint_path().unwrap();
    let trace = run_recursion(&path, 0.9, &[0.0], &[0.0], 12, true).unwrap();
    let iterates = trace.iterates.unwrap();
    let mut prev = 0.0;
    for (i, h) in iterates.iter().enumerate() {
        let k = i + 1;
        let r = path.row(i);
        let step = (k as f64).powf(-0.9) * (r[1] * r[0] - r[0] * r[0] * prev);
        assert!((h[0] - prev - step).abs() <= 1e-15 * (1.0 + h[0].abs() + step.abs()));
        prev = h[0];
    }
}

#[test]
fn translation_equivariance() {
    let z = DMatrix::from_row_slice(2, 3, &[1.0, 0.2, 0.0, -0.5, 1.0, 0.7]);
    let noise = [0.1, 0.0, 0.4];
    let build = |h: [f64; 2]| {
        let mut m = DMatrix::zeros(3, 3);
        m.view_mut((0, 0), (2, 3)).copy_from(&z);
        for c in 0..3 {
            m[(2, c)] = h[0] * z[(0, c)] + h[1] * z[(1, c)] + noise[c];
        }
        CoefficientSpec::from_matrix(0.85, Sidedness::TwoSided, m, 128).unwrap()
    };
    let (h, delta) = ([0.5, 1.0], [2.0, -3.0]);
    let a = SaConfig::new(1.0, build(h), gaussian(), 31, 12).unwrap();
    let mut b = SaConfig::new(1.0, build([h[0] + delta[0], h[1] + delta[1]]), gaussian(), 31, 12).unwrap();
    b.h0 = delta.to_vec();
    let (ta, ra) = sa_iterate(&a).unwrap();
    let (tb, rb) = sa_iterate(&b).unwrap();
    for (i, d) in delta.iter().enumerate() {
        assert!((tb.h_star[i] - ta.h_star[i] - d).abs() < 1e-10);
    }
    for (x, y) in ra.checkpoints.iter().zip(&rb.checkpoints) {
        assert!((x.error - y.error).abs() < 1e-9 * (1.0 + x.error), "{x:?} {y:?}");
    }
}

#[test]
fn theoretical_rate_examples() {
    let r = sa_theoretical_rate(1.0, 0.8, TailIndex::exact(1.5));
    assert!((r.gamma0 - 1.0 / 3.0).abs() < 1e-12);
    assert!((sa_theoretical_rate(1.0, 0.75, TailIndex::exact(2.0)).gamma0 - 0.5).abs() < 1e-12);
    let r = sa_theoretical_rate(0.6, 0.95, TailIndex::exact(1.25));
    assert!((r.gamma0 + 0.2).abs() < 1e-12);
    assert!(!r.guaranteed);
    let light = sa_theoretical_rate(1.0, 0.9, TailIndex::LightTail);
    assert!((light.gamma0 - 0.5).abs() < 1e-12);
}

#[test]
fn invalid_chi_rejected() {
    let joint = CoefficientSpec::from_matrix(0.8, Sidedness::TwoSided, DMatrix::from_row_slice(2, 1, &[1.0, 1.0]), 4)
        .unwrap();
    for chi in [0.0, 0.5, 1.5, f64::NAN] {
        assert!(SaConfig::new(chi, joint.clone(), gaussian(), 1, 4).is_err());
    }
}

#[test]
fn recursion_checks_dimensions() {
    let path = VectorSeries::new(3, vec![0.0; 48]).unwrap();
    assert!(run_recursion(&path, 1.0, &[0.0], &[0.0], 4, false).is_err());
    let _ = ConvolutionStrategy::Auto;
}
