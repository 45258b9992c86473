mod common;

use mslln_core::coefficients::{CoefficientSpec, Sidedness};
use mslln_core::innovations::{Coupling, InnovationPairs, InnovationSpec, InnovationStream};
use mslln_core::linear_process::{generate_pair_paths, ConvolutionStrategy, PathConfig, PathGenerator, VectorSeries};
use mslln_core::partial_sums::{
    analytic_mean, centered_ledger, decompose, outer_series, piece_series, truncated_split, truncation_theta,
    AnalyticMean, LedgerBuilder, PartialSumLedger, Piece,
};
use mslln_core::quadrature;
use mslln_core::stats::{mean, median_of_means, variance};
use mslln_core::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn scalar_ledger(terms: &[f64], levels: u32) -> PartialSumLedger {
    let mut b = LedgerBuilder::new(1, 1, levels);
    terms.iter().for_each(|t| b.push_scalar(*t));
    b.finish().unwrap()
}

#[test]
fn outer_examples() {
    let x = VectorSeries::scalar(vec![1.5, -2.0]);
    let d = outer_series(&x, &x).unwrap();
    assert_eq!(d.term(0), &[2.25]);
    assert_eq!(d.term(1), &[4.0]);
    let a = VectorSeries::new(2, vec![1.0, 0.0]).unwrap();
    let b = VectorSeries::new(2, vec![0.0, 1.0]).unwrap();
    assert_eq!(outer_series(&a, &b).unwrap().matrix(0), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
}

#[test]
fn outer_transpose_identity() {
    let u = common::uniform(1, 3 * 50);
    let v = common::uniform(2, 3 * 50);
    let x = VectorSeries::new(3, u).unwrap();
    let y = VectorSeries::new(3, v).unwrap();
    let xy = outer_series(&x, &y).unwrap();
    let yx = outer_series(&y, &x).unwrap();
    for i in 0..50 {
        assert_eq!(xy.matrix(i).transpose(), yx.matrix(i));
    }
}

#[test]
fn analytic_mean_examples() {
    let delta = CoefficientSpec::delta(1.0).unwrap();
    let pl = InnovationSpec::power_law(1.0, 5.0).unwrap();
    let sigma = InnovationStream::identical(pl, 0, 1, 1).unwrap().cross_moment().unwrap();
    assert_eq!(analytic_mean(&delta, &delta, &sigma, 0).unwrap().scalar(), Some(2.0));

    let l = 1usize << 20;
    let k = CoefficientSpec::scalar(1.0, Sidedness::TwoSided, 1.0, l).unwrap();
    let m = analytic_mean(&k, &k, &DMatrix::identity(1, 1), l).unwrap();
    let direct = 1.0 + 2.0 * (1..=l).rev().map(|j| 1.0 / (j as f64 * j as f64)).sum::<f64>();
    assert!((m.scalar().unwrap() - direct).abs() < 1e-13 * direct);
    assert!((m.scalar().unwrap() - 4.2899).abs() < 1e-4);

    let g = InnovationSpec::gaussian(1.0).unwrap();
    let indep = InnovationStream::new(g, g, Coupling::Independent, 0, 1, 1).unwrap().cross_moment().unwrap();
    assert_eq!(analytic_mean(&k, &k, &indep, l).unwrap().scalar(), Some(0.0));
}

#[test]
fn matrix_mean_matches_term_sum() {
    let a = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 0.2, 0.3, 1.0, -1.0]);
    let b = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 1.0, 1.0, 0.0]);
    let l = 40;
    let k = CoefficientSpec::from_matrix(0.7, Sidedness::TwoSided, a, l).unwrap();
    let kb = CoefficientSpec::from_matrix(0.9, Sidedness::OneSidedCausal, b, l).unwrap();
    let sigma = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.3, 0.0, 0.3, 1.5]);
    let got = analytic_mean(&k, &kb, &sigma, l).unwrap().matrix;
    let mut want = DMatrix::zeros(2, 2);
    for j in -(l as i64)..=l as i64 {
        let c = k.direction() * k.envelope(j);
        let cb = kb.direction() * kb.envelope(j);
        want += &c * &sigma * cb.transpose();
    }
    assert!((got - want).abs().max() < 1e-12);
}

#[test]
fn mean_correctness_gaussian() {
    let (n, l, reps) = (1usize << 14, 1usize << 10, 256u64);
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, -0.2, 0.8]);
    let k = CoefficientSpec::from_matrix(0.75, Sidedness::TwoSided, m, l).unwrap();
    let g = InnovationSpec::gaussian(1.0).unwrap();
    let generator = PathGenerator::new(k.clone(), k.clone(), n, ConvolutionStrategy::Auto).unwrap();
    let mut per_rep: Vec<Vec<f64>> = vec![Vec::new(); 4];
    for rep in 0..reps {
        let xi = InnovationStream::identical(g, mslln_core::seed::mix(7, 0, rep), n + 2 * l, 2).unwrap().sample();
        let p = generator.generate(&xi).unwrap();
        let d = outer_series(&p.x, &p.x_bar).unwrap();
        for (e, slot) in per_rep.iter_mut().enumerate() {
            slot.push((0..n).map(|i| d.term(i)[e]).sum::<f64>() / n as f64);
        }
    }
    let mean_d = analytic_mean(&k, &k, &DMatrix::identity(2, 2), l).unwrap().matrix;
    for (e, values) in per_rep.iter().enumerate() {
        let se = (variance(values) / values.len() as f64).sqrt();
        let want = mean_d[(e / 2, e % 2)];
        assert!((mean(values) - want).abs() < 4.0 * se, "entry {e}: {} vs {want} (se {se})", mean(values));
    }
}

#[test]
fn mean_correctness_heavy_median_of_means() {
    let (n, l, reps) = (1usize << 14, 1usize << 10, 256u64);
    let k = CoefficientSpec::scalar(0.75, Sidedness::TwoSided, 1.0, l).unwrap();
    let spec = InnovationSpec::power_law(1.0, 5.0).unwrap();
    let generator = PathGenerator::new(k.clone(), k.clone(), n, ConvolutionStrategy::Auto).unwrap();
    let averages: Vec<f64> = (0..reps)
        .map(|rep| {
            let xi = InnovationStream::identical(spec, mslln_core::seed::mix(8, 0, rep), n + 2 * l, 1).unwrap().sample();
            let x = generator.generate(&xi).unwrap().x.into_vec();
            x.iter().map(|v| v * v).sum::<f64>() / n as f64
        })
        .collect();
    let mom = median_of_means(&averages, 16).unwrap();
    let want = analytic_mean(&k, &k, &DMatrix::from_element(1, 1, 2.0), l).unwrap().scalar().unwrap();
    assert!((mom.estimate - want).abs() < 4.0 * mom.pseudo_stderr, "{mom:?} vs {want}");
}

#[test]
fn ledger_hand_case() {
    let ledger = scalar_ledger(&[1.0, -1.0, 2.0, -2.0], 2);
    assert_eq!(ledger.scalar_sums(), vec![1.0, 0.0, 0.0]);
    assert_eq!(ledger.block_maxima, vec![1.0, 2.0]);
}

#[test]
fn constant_series_gives_zero_ledger() {
    let x = VectorSeries::new(2, [1.0, 2.0].repeat(64)).unwrap();
    let d = outer_series(&x, &x).unwrap();
    let mean = AnalyticMean {
        matrix: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
        remainder: 0.0,
    };
    let ledger = centered_ledger(&d, &mean, 6).unwrap();
    assert!(ledger.checkpoints.iter().all(|c| c.sum.iter().all(|v| *v == 0.0)));
    assert!(ledger.block_maxima.iter().all(|m| *m == 0.0));
}

#[test]
fn ledger_rejects_too_many_levels() {
    let x = VectorSeries::scalar(vec![1.0; 15]);
    let d = outer_series(&x, &x).unwrap();
    let mean = AnalyticMean { matrix: DMatrix::zeros(1, 1), remainder: 0.0 };
    assert_eq!(
        centered_ledger(&d, &mean, 4).unwrap_err(),
        Error::LevelsExceedLength { levels: 4, len: 15 }
    );
}

#[test]
fn ledger_matches_running_sums() {
    let terms = common::uniform(3, 255);
    let ledger = scalar_ledger(&terms, 7);
    let mut s = 0.0;
    let mut sums = vec![];
    for t in &terms {
        s += t;
        sums.push(s);
    }
    for c in &ledger.checkpoints {
        assert_eq!(c.sum[(0, 0)], sums[c.n - 1]);
    }
    for r in 0..7usize {
        let block = &sums[(1 << r) - 1..(1 << (r + 1)) - 1];
        assert_eq!(ledger.block_maxima[r], block.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }
}

proptest! {
    #[test]
    fn ledger_additivity(terms in prop::collection::vec(-10.0f64..10.0, 64)) {
        let whole = scalar_ledger(&terms, 6);
        let first = scalar_ledger(&terms[..32], 5);
        for r in 0..=5u32 {
            prop_assert_eq!(&whole.checkpoints[r as usize], &first.checkpoints[r as usize]);
        }
        let second: f64 = terms[32..].iter().sum();
        let joined = first.checkpoints[5].sum[(0, 0)] + second;
        prop_assert!((whole.checkpoints[6].sum[(0, 0)] - joined).abs() < 1e-9);
    }

    #[test]
    fn ledger_norm_bounds(terms in prop::collection::vec(-10.0f64..10.0, 127)) {
        let ledger = scalar_ledger(&terms, 6);
        for r in 0..6usize {
            let m = ledger.block_maxima[r];
            prop_assert!(m >= ledger.checkpoints[r].sum[(0, 0)].abs());
            let next_term = terms[(1 << (r + 1)) - 1];
            prop_assert!(ledger.checkpoints[r + 1].sum[(0, 0)].abs() <= m + next_term.abs() + 1e-12);
        }
    }
}

// Classifies every (l, m) pair directly; an independent route to the pieces.
#[allow(clippy::too_many_arguments)]
fn brute_force_pieces(
    xi: &[f64],
    xi_bar: &[f64],
    coef: &CoefficientSpec,
    coef_bar: &CoefficientSpec,
    n: usize,
    half_width: usize,
    window: usize,
    mean: f64,
) -> [f64; 7] {
    let w = half_width as i64;
    let t = window as i64;
    let mut totals = [0.0; 7];
    let region = |k: i64, l: i64| -> u8 {
        if (l - k).abs() <= t {
            0
        } else if l > k + t {
            1
        } else {
            2
        }
    };
    for k in 1..=n as i64 {
        for l in (k - w)..=(k + w) {
            for m in (k - w)..=(k + w) {
                let v = coef.truncated_envelope(k - l)
                    * coef.direction()[(0, 0)]
                    * coef_bar.truncated_envelope(k - m)
                    * coef_bar.direction()[(0, 0)]
                    * xi[(l - 1 + w) as usize]
                    * xi_bar[(m - 1 + w) as usize];
                let piece = if l == m {
                    Piece::Diagonal
                } else {
                    match (region(k, l), region(k, m)) {
                        (0, 0) => Piece::InWindowOffDiag,
                        (1, 1) => Piece::FarAbove,
                        (2, 2) => Piece::FarBelow,
                        (0, 1) | (1, 0) => Piece::MixedAbove,
                        (0, 2) | (2, 0) => Piece::MixedBelow,
                        _ => Piece::Cross,
                    }
                };
                totals[Piece::ALL.iter().position(|p| *p == piece).unwrap()] += v;
            }
        }
        totals[0] -= mean;
    }
    totals
}

#[test]
fn pieces_match_pair_classification() {
    let (n, l) = (32usize, 8usize);
    let k = CoefficientSpec::scalar(0.7, Sidedness::TwoSided, 1.3, l).unwrap();
    let kb = CoefficientSpec::scalar(0.9, Sidedness::OneSidedCausal, -0.8, 5).unwrap();
    let spec = InnovationSpec::power_law(1.0, 4.6).unwrap();
    let pairs = InnovationStream::new(spec, spec, Coupling::Independent, 11, n + 2 * l, 1).unwrap().sample();
    for window in [0usize, 1, 3, 8, 20] {
        let s = piece_series(&pairs, &k, &kb, n, window, 0.4, ConvolutionStrategy::Direct).unwrap();
        let want = brute_force_pieces(pairs.xi(), pairs.xi_bar(), &k, &kb, n, l, window, 0.4);
        for (i, p) in Piece::ALL.iter().enumerate() {
            let got: f64 = s.piece(*p).iter().sum();
            assert!((got - want[i]).abs() < 1e-10 * (1.0 + want[i].abs()), "T={window} {p:?}: {got} vs {}", want[i]);
        }
    }
}

#[test]
fn reconstruction_identity() {
    let l = 256;
    let k = CoefficientSpec::scalar(0.75, Sidedness::TwoSided, 1.0, l).unwrap();
    let spec = InnovationSpec::power_law(1.0, 5.0).unwrap();
    let mean = analytic_mean(&k, &k, &DMatrix::from_element(1, 1, 2.0), l).unwrap().scalar().unwrap();
    for seed in 0..4u64 {
        let pairs = InnovationStream::identical(spec, seed, 1024 + 2 * l, 1).unwrap().sample();
        for nu in [0.5, 1.0, 2.0] {
            let dec = decompose(&pairs, &k, &k, 10, nu, mean, ConvolutionStrategy::Auto).unwrap();
            assert_eq!(dec.checkpoints.len(), 11);
            let err = dec.max_reconstruction_error();
            assert!(err <= 1e-10, "seed {seed} nu {nu}: {err}");
        }
    }
}

#[test]
fn diagonal_piece_matches_centered_oracle() {
    let (n, l) = (256usize, 32usize);
    let k = CoefficientSpec::scalar(0.8, Sidedness::TwoSided, 1.0, l).unwrap();
    let spec = InnovationSpec::folded_t(4.0).unwrap();
    let e = spec.moment(2.0).unwrap();
    let mean = analytic_mean(&k, &k, &DMatrix::from_element(1, 1, e), l).unwrap().scalar().unwrap();
    let pairs = InnovationStream::identical(spec, 3, n + 2 * l, 1).unwrap().sample();
    let s = piece_series(&pairs, &k, &k, n, 4, mean, ConvolutionStrategy::Fft).unwrap();
    let xi = pairs.xi();
    let w = l as i64;
    for (i, got) in s.piece(Piece::Diagonal).iter().enumerate() {
        let kk = i as i64 + 1;
        let want: f64 = ((kk - w)..=(kk + w))
            .map(|j| {
                let c = k.envelope(kk - j);
                let x = xi[(j - 1 + w) as usize];
                c * c * (x * x - e)
            })
            .sum();
        assert!((got - want).abs() < 1e-10 * (1.0 + want.abs()));
    }
}

#[test]
fn delta_kernel_only_diagonal() {
    let delta = CoefficientSpec::delta(1.0).unwrap();
    let g = InnovationSpec::gaussian(1.0).unwrap();
    let pairs = InnovationStream::identical(g, 4, 1024, 1).unwrap().sample();
    let dec = decompose(&pairs, &delta, &delta, 10, 1.0, 1.0, ConvolutionStrategy::Auto).unwrap();
    for c in &dec.checkpoints {
        for p in &Piece::ALL[1..] {
            assert_eq!(c.total(*p), 0.0);
        }
        let want: f64 = pairs.xi()[..c.n].iter().map(|x| x * x - 1.0).sum();
        assert!((c.total(Piece::Diagonal) - want).abs() < 1e-10 * c.scale);
    }
}

#[test]
fn wide_window_empties_far_pieces() {
    let l = 16;
    let k = CoefficientSpec::scalar(0.7, Sidedness::TwoSided, 1.0, l).unwrap();
    let pairs = InnovationStream::identical(InnovationSpec::power_law(1.0, 4.0).unwrap(), 5, 256 + 2 * l, 1)
        .unwrap()
        .sample();
    let s = piece_series(&pairs, &k, &k, 256, l, 0.0, ConvolutionStrategy::Auto).unwrap();
    for p in [Piece::FarAbove, Piece::FarBelow, Piece::Cross] {
        assert!(s.piece(p).iter().all(|v| *v == 0.0));
    }
}

#[test]
fn decomposition_rejects_vector_process() {
    let k = CoefficientSpec::from_matrix(0.8, Sidedness::TwoSided, DMatrix::identity(2, 2), 2).unwrap();
    let pairs = InnovationPairs::from_values(2, vec![1.0; 2 * 20], None).unwrap();
    assert!(matches!(
        decompose(&pairs, &k, &k, 3, 1.0, 0.0, ConvolutionStrategy::Auto),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn theta_closed_form_and_quadrature_agree() {
    let spec = InnovationSpec::power_law(1.0, 5.0).unwrap();
    let (theta, _) = truncation_theta(&spec, 4.0).unwrap();
    assert!((theta - 1.75).abs() < 1e-15);
    for (spec, floor, u) in [(spec, 1.0, 4.0), (InnovationSpec::power_law(0.7, 4.6).unwrap(), 0.49, 30.0)] {
        let closed = truncation_theta(&spec, u).unwrap().0;
        // split at the kink of the survival function
        let q = quadrature::interval(|s| spec.square_survival(s), 0.0, floor, 1e-12).value
            + quadrature::interval(|s| spec.square_survival(s), floor, u, 1e-12).value;
        assert!((closed - q).abs() < 1e-10, "{closed} vs {q}");
    }
    // folded-t: theta(u) -> E[xi^2] as u grows
    let t = InnovationSpec::folded_t(6.0).unwrap();
    let (theta, err) = truncation_theta(&t, 1e6).unwrap();
    assert!(err.is_some());
    assert!((theta - t.moment(2.0).unwrap()).abs() < 1e-3);
}

#[test]
fn truncated_split_identities() {
    let spec = InnovationSpec::power_law(1.0, 4.6).unwrap();
    let xi = InnovationStream::identical(spec, 8, 100_000, 1).unwrap().sample();
    let v: Vec<f64> = xi.xi().iter().map(|x| x * x).collect();
    let split = truncated_split(&v, 9.0, &spec).unwrap();
    let e = spec.moment(2.0).unwrap();
    for ((b, r), x) in split.bounded.iter().zip(&split.remainder).zip(&v) {
        assert!((b + r - (x - e)).abs() < 1e-12 * (1.0 + x));
        assert!(b.abs() <= split.u + split.theta);
    }
    assert!(mean(&split.bounded).abs() < 4.0 * (variance(&split.bounded) / v.len() as f64).sqrt());

    // truncation inactive: remainder is the constant theta - E[v]
    let max = v.iter().fold(0.0f64, |a, b| a.max(*b));
    let split = truncated_split(&v, max, &spec).unwrap();
    let gap = split.theta - e;
    assert!(gap < 0.0);
    assert!(split.remainder.iter().all(|r| (r - gap).abs() < 1e-9));
    let wider = truncated_split(&v, 100.0 * max, &spec).unwrap();
    assert!((wider.theta - e).abs() < gap.abs());
}

// alpha = 1.5 for xi^2 with beta = 4; p = 1.2 gives u_r = n_r^{1/p}
#[test]
fn bounded_part_second_moment_scaling() {
    let spec = InnovationSpec::power_law(1.0, 4.0).unwrap();
    let (alpha, p) = (1.5, 1.2);
    let kappa = (2.0 - alpha) / p;
    let v: Vec<f64> = InnovationStream::identical(spec, 9, 1 << 20, 1)
        .unwrap()
        .sample()
        .xi()
        .iter()
        .map(|x| x * x)
        .collect();
    let mut points = vec![];
    for r in 10..=18u32 {
        let n_r = (1u64 << r) as f64;
        let u = n_r.powf(kappa / (2.0 - alpha));
        let split = truncated_split(&v, u, &spec).unwrap();
        let m2 = split.bounded.iter().map(|b| b * b).sum::<f64>() / v.len() as f64;
        points.push((r as f64, (m2 / n_r.powf(kappa)).log2()));
    }
    let ratios: Vec<f64> = points.iter().map(|p| p.1).collect();
    let c = ratios.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    // one constant covers every level and the ratio does not grow
    assert!(c < 4.0, "log2 c = {c}");
    let slope = mslln_core::stats::fit_line(&points).unwrap().slope;
    assert!(slope <= 0.05, "slope of log2(E/n^kappa) = {slope}");
}

#[test]
fn identical_pairs_reuse_path() {
    let k = CoefficientSpec::scalar(0.8, Sidedness::TwoSided, 1.0, 8).unwrap();
    let stream = InnovationStream::identical(InnovationSpec::gaussian(1.0).unwrap(), 1, 64 + 16, 1).unwrap();
    let p = generate_pair_paths(&PathConfig {
        coef: k.clone(),
        coef_bar: k,
        stream,
        n: 64,
        strategy: ConvolutionStrategy::Auto,
    })
    .unwrap();
    assert_eq!(p.x, p.x_bar);
}
