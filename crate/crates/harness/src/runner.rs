//! Grid execution. Grid points run in order; replications of a point run on
//! the rayon pool and are collected in replication order, so every table is
//! independent of the thread count.

use mslln_core::estimators::{
    appell2_sums, autocov_critical_p, autocov_pair, empirical_exponent_with, normalized_deviation,
    population_autocov, theoretical_exponent, FitRange, Regime, TheoreticalRate,
};
use mslln_core::innovations::{cross_moment, InnovationStream, TailIndex};
use mslln_core::linear_process::{ConvolutionStrategy, PathGenerator};
use mslln_core::partial_sums::{analytic_mean, centered_ledger, decompose, outer_series, Piece, PartialSumLedger};
use mslln_core::seed::mix;
use mslln_core::stats::median;
use mslln_core::stochastic_approx::{decay_exponent, sa_iterate, sa_theoretical_rate, SaConfig, SaTrace};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ResolvedPoint, Scenario};
use crate::error::HarnessError;
use crate::table::{Cell, Table};

pub const STATUS_OK: &str = "ok";
pub const STATUS_INSUFFICIENT: &str = "insufficient_replications";

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub grid: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub scenario: Scenario,
    pub tables: Vec<Table>,
    pub failures: Vec<PointFailure>,
}

impl Outcome {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

type PointResult<T> = Result<T, mslln_core::Error>;

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    n: usize,
}

impl Ctx<'_> {
    fn seed(&self, grid: usize, rep: usize) -> u64 {
        mix(self.config.base_seed, grid as u64, rep as u64)
    }

    fn replicate<T: Send>(&self, f: impl Fn(usize) -> PointResult<T> + Sync) -> PointResult<Vec<T>> {
        (0..self.config.replications).into_par_iter().map(&f).collect()
    }

    fn min_reps(&self) -> usize {
        self.config.tolerances.min_replications
    }

    fn status(&self) -> &'static str {
        if self.config.replications < self.min_reps() {
            STATUS_INSUFFICIENT
        } else {
            STATUS_OK
        }
    }
}

/// Validates the config, then runs every grid point on a pool of `jobs`
/// threads. Per-point failures are recorded, not raised.
pub fn execute(config: &ExperimentConfig, jobs: usize) -> Result<Outcome, HarnessError> {
    let points = config.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Run(format!("thread pool: {e}")))?;
    let ctx = Ctx {
        config,
        n: 1usize << config.levels,
    };
    Ok(pool.install(|| match config.scenario {
        Scenario::Rates => run_rates(&ctx, &points),
        Scenario::Decompose => run_decompose(&ctx, &points),
        Scenario::Sa => run_sa(&ctx, &points),
        Scenario::Autocov => run_autocov(&ctx, &points),
        Scenario::Appell => run_appell(&ctx, &points),
        Scenario::Simulate => run_simulate(&ctx, &points),
    }))
}

fn failed(message: impl std::fmt::Display) -> String {
    format!("failed: {message}")
}

fn alpha_cell(tail: TailIndex) -> Cell {
    Cell::Float(tail.alpha())
}

fn near_bifurcation(rate: &TheoreticalRate, tail: TailIndex, margin: f64, sigma: f64, sigma_bar: f64) -> bool {
    let lrd = 2.0 - sigma - sigma_bar;
    rate.regime == Regime::Bifurcation || (!tail.is_light() && lrd > 0.0 && (tail.alpha() - 1.0 / lrd).abs() < margin)
}

fn stream(ctx: &Ctx, p: &ResolvedPoint, rep: usize, length: usize) -> PointResult<InnovationStream> {
    InnovationStream::new(p.spec, p.spec_bar, p.coupling, ctx.seed(p.index, rep), length, p.dim())
}

fn ledger_table(grid: usize, ledgers: &[PartialSumLedger]) -> Table {
    let (rows, cols) = ledgers.first().map_or((1, 1), |l| (l.rows, l.cols));
    let mut columns = vec!["replication".to_string(), "r".into(), "n_r".into()];
    for i in 0..rows {
        for j in 0..cols {
            columns.push(format!("S_{i}_{j}"));
        }
    }
    columns.push("M_r".into());
    let mut t = Table::new(format!("ledgers_g{grid}"), &columns);
    for (rep, ledger) in ledgers.iter().enumerate() {
        for c in &ledger.checkpoints {
            let mut row: Vec<Cell> = vec![rep.into(), c.r.into(), c.n.into()];
            for i in 0..rows {
                for j in 0..cols {
                    row.push(c.sum[(i, j)].into());
                }
            }
            row.push(ledger.block_max(c.r).into());
            t.push(row);
        }
    }
    t
}

fn run_rates(ctx: &Ctx, points: &[ResolvedPoint]) -> Outcome {
    let cfg = ctx.config;
    let range = cfg.fit_range().expect("validated");
    let mut summary = Table::new(
        "rates",
        &[
            "grid", "sigma", "sigma_bar", "alpha", "alpha_conservative", "coupling", "regime", "e_star", "e_hat",
            "stderr", "r_lo", "r_hi", "reps", "n_max", "half_width", "base_seed", "near_bifurcation", "status",
        ],
    );
    let mut tables = Vec::new();
    let mut failures = Vec::new();
    for p in points {
        let rate = theoretical_exponent(p.sigma(), p.sigma_bar(), p.tail);
        let result = rate.and_then(|rate| {
            let ledgers = rate_ledgers(ctx, p)?;
            let estimate = empirical_exponent_with(&ledgers, range, 1)?;
            Ok((rate, ledgers, estimate))
        });
        let conservative = matches!(p.tail, TailIndex::Finite { conservative: true, .. });
        let mut row: Vec<Cell> = vec![
            p.index.into(),
            p.sigma().into(),
            p.sigma_bar().into(),
            alpha_cell(p.tail),
            conservative.into(),
            format!("{:?}", p.coupling).to_lowercase().into(),
        ];
        match result {
            Ok((rate, ledgers, est)) => {
                row.extend([
                    rate.regime.name().into(),
                    rate.exponent.into(),
                    est.slope.into(),
                    est.stderr.into(),
                    est.r_lo.into(),
                    est.r_hi.into(),
                    est.replications.into(),
                    ctx.n.into(),
                    p.half_width.into(),
                    cfg.base_seed.into(),
                    near_bifurcation(&rate, p.tail, cfg.tolerances.bifurcation_margin, p.sigma(), p.sigma_bar())
                        .into(),
                    ctx.status().into(),
                ]);
                tables.push(ledger_table(p.index, &ledgers));
            }
            Err(e) => {
                let rate = theoretical_exponent(p.sigma(), p.sigma_bar(), p.tail).ok();
                row.extend([
                    rate.map(|r| r.regime.name()).into(),
                    rate.map(|r| r.exponent).into(),
                    Cell::Empty,
                    Cell::Empty,
                    range.lo.into(),
                    range.hi.into(),
                    cfg.replications.into(),
                    ctx.n.into(),
                    p.half_width.into(),
                    cfg.base_seed.into(),
                    Cell::Empty,
                    failed(&e).into(),
                ]);
                failures.push(PointFailure {
                    grid: p.index,
                    message: e.to_string(),
                });
            }
        }
        summary.push(row);
    }
    tables.insert(0, summary);
    Outcome {
        scenario: Scenario::Rates,
        tables,
        failures,
    }
}

fn rate_ledgers(ctx: &Ctx, p: &ResolvedPoint) -> PointResult<Vec<PartialSumLedger>> {
    let generator = PathGenerator::new(p.coef.clone(), p.coef_bar.clone(), ctx.n, ConvolutionStrategy::Auto)?;
    let sigma_xi = cross_moment(p.spec, p.coupling, p.dim())?;
    let mean = analytic_mean(&p.coef, &p.coef_bar, &sigma_xi, p.half_width)?;
    ctx.replicate(|rep| {
        let xi = stream(ctx, p, rep, generator.required_length())?.sample();
        let paths = generator.generate(&xi)?;
        centered_ledger(&outer_series(&paths.x, &paths.x_bar)?, &mean, ctx.config.levels)
    })
}

fn run_decompose(ctx: &Ctx, points: &[ResolvedPoint]) -> Outcome {
    let cfg = ctx.config;
    let mut columns = vec!["grid", "replication", "r", "n_r", "window"];
    columns.extend(Piece::ALL.map(Piece::name));
    columns.extend(["direct", "rel_error"]);
    let mut pieces = Table::new("pieces", &columns);
    let mut summary = Table::new(
        "decompose_summary",
        &[
            "grid", "sigma", "sigma_bar", "alpha", "nu", "half_width", "mean", "reps", "n_max", "max_rel_error",
            "base_seed", "status",
        ],
    );
    let mut failures = Vec::new();
    for p in points {
        let result = (|| {
            let sigma_xi = cross_moment(p.spec, p.coupling, 1)?;
            let mean = analytic_mean(&p.coef, &p.coef_bar, &sigma_xi, p.half_width)?.matrix[(0, 0)];
            let length = ctx.n + 2 * p.half_width;
            let runs = ctx.replicate(|rep| {
                let xi = stream(ctx, p, rep, length)?.sample();
                decompose(&xi, &p.coef, &p.coef_bar, cfg.levels, p.nu, mean, ConvolutionStrategy::Auto)
            })?;
            Ok::<_, mslln_core::Error>((mean, runs))
        })();
        let head: Vec<Cell> = vec![
            p.index.into(),
            p.sigma().into(),
            p.sigma_bar().into(),
            alpha_cell(p.tail),
            p.nu.into(),
            p.half_width.into(),
        ];
        let mut row = head;
        match result {
            Ok((mean, runs)) => {
                let worst = runs.iter().map(|d| d.max_reconstruction_error()).fold(0.0, f64::max);
                for (rep, d) in runs.iter().enumerate() {
                    for c in &d.checkpoints {
                        let mut r: Vec<Cell> = vec![p.index.into(), rep.into(), c.r.into(), c.n.into(), c.window.into()];
                        r.extend(c.totals.iter().map(|v| Cell::Float(*v)));
                        r.extend([c.direct.into(), c.reconstruction_error().into()]);
                        pieces.push(r);
                    }
                }
                row.extend([
                    mean.into(),
                    cfg.replications.into(),
                    ctx.n.into(),
                    worst.into(),
                    cfg.base_seed.into(),
                    STATUS_OK.into(),
                ]);
            }
            Err(e) => {
                row.extend([
                    Cell::Empty,
                    cfg.replications.into(),
                    ctx.n.into(),
                    Cell::Empty,
                    cfg.base_seed.into(),
                    failed(&e).into(),
                ]);
                failures.push(PointFailure {
                    grid: p.index,
                    message: e.to_string(),
                });
            }
        }
        summary.push(row);
    }
    Outcome {
        scenario: Scenario::Decompose,
        tables: vec![summary, pieces],
        failures,
    }
}

fn run_sa(ctx: &Ctx, points: &[ResolvedPoint]) -> Outcome {
    let cfg = ctx.config;
    let range = cfg.fit_range().expect("validated");
    let mut summary = Table::new(
        "sa",
        &[
            "grid", "chi", "sigma", "alpha", "gamma0", "guaranteed", "gamma_hat", "stderr", "r_lo", "r_hi", "reps",
            "n_max", "aborted_count", "half_width", "base_seed", "status",
        ],
    );
    let mut traces_table = Table::new("sa_traces", &["grid", "replication", "r", "n_r", "error", "aborted_at"]);
    let mut failures = Vec::new();
    for p in points {
        let theory = sa_theoretical_rate(p.chi, p.sigma(), p.tail);
        let result = ctx
            .replicate(|rep| {
                let config = SaConfig {
                    chi: p.chi,
                    joint: p.coef.clone(),
                    innovations: p.spec,
                    seed: ctx.seed(p.index, rep),
                    h0: p.h0.clone(),
                    levels: cfg.levels,
                    strategy: ConvolutionStrategy::Auto,
                };
                Ok(sa_iterate(&config)?.1)
            })
            .map(|traces: Vec<SaTrace>| {
                let est = decay_exponent(&traces, range);
                (traces, est)
            });
        let mut row: Vec<Cell> = vec![
            p.index.into(),
            p.chi.into(),
            p.sigma().into(),
            alpha_cell(p.tail),
            theory.gamma0.into(),
            theory.guaranteed.into(),
        ];
        let mut fail = |row: &mut Vec<Cell>, e: &mslln_core::Error, aborted: Cell| {
            row.extend([
                Cell::Empty,
                Cell::Empty,
                range.lo.into(),
                range.hi.into(),
                cfg.replications.into(),
                ctx.n.into(),
                aborted,
                p.half_width.into(),
                cfg.base_seed.into(),
                failed(e).into(),
            ]);
            failures.push(PointFailure {
                grid: p.index,
                message: e.to_string(),
            });
        };
        match result {
            Ok((traces, est)) => {
                for (rep, t) in traces.iter().enumerate() {
                    for c in &t.checkpoints {
                        traces_table.push(vec![
                            p.index.into(),
                            rep.into(),
                            c.r.into(),
                            c.n.into(),
                            c.error.into(),
                            t.aborted_at.into(),
                        ]);
                    }
                }
                let aborted = traces.iter().filter(|t| t.is_aborted()).count();
                match est {
                    Ok(est) => {
                        let status = if est.replications < ctx.min_reps() {
                            STATUS_INSUFFICIENT
                        } else {
                            STATUS_OK
                        };
                        row.extend([
                            est.gamma_hat.into(),
                            est.stderr.into(),
                            est.r_lo.into(),
                            est.r_hi.into(),
                            est.replications.into(),
                            ctx.n.into(),
                            aborted.into(),
                            p.half_width.into(),
                            cfg.base_seed.into(),
                            status.into(),
                        ]);
                    }
                    Err(e) => fail(&mut row, &e, aborted.into()),
                }
            }
            Err(e) => fail(&mut row, &e, Cell::Empty),
        }
        summary.push(row);
    }
    Outcome {
        scenario: Scenario::Sa,
        tables: vec![summary, traces_table],
        failures,
    }
}

/// Checkpoint deviations `(n_r, gamma_hat - gamma)` of one replication.
type Deviations = Vec<(usize, f64)>;

fn run_autocov(ctx: &Ctx, points: &[ResolvedPoint]) -> Outcome {
    let cfg = ctx.config;
    let mut medians = Table::new(
        "autocov",
        &["grid", "lag", "r", "n_r", "gamma", "median_abs_normalized_dev", "reps"],
    );
    let mut summary = Table::new(
        "autocov_summary",
        &[
            "grid", "sigma", "alpha", "lag", "p", "critical_p", "admissible", "gamma", "decreasing_top4", "reps",
            "n_max", "half_width", "base_seed", "status",
        ],
    );
    let mut failures = Vec::new();
    for p in points {
        let critical_p = autocov_critical_p(p.sigma(), p.tail);
        let max_lag = *p.lags.iter().max().expect("validated");
        let result = (|| {
            let m2 = p.spec.moment(2.0)?;
            let gammas: Vec<f64> = p
                .lags
                .iter()
                .map(|&h| population_autocov(&p.coef, m2, h, p.half_width))
                .collect::<PointResult<_>>()?;
            let length = ctx.n + max_lag + 2 * p.half_width;
            let generator = PathGenerator::new(p.coef.clone(), p.coef.clone(), ctx.n + max_lag, ConvolutionStrategy::Auto)?;
            let per_rep: Vec<Vec<Deviations>> = ctx.replicate(|rep| {
                let xi = stream(ctx, p, rep, length)?.sample();
                let x = generator.generate(&xi)?.x.into_vec();
                p.lags
                    .iter()
                    .zip(&gammas)
                    .map(|(&h, &g)| Ok(autocov_pair(&x, ctx.n, h as i64, g, cfg.levels)?.deviations()))
                    .collect()
            })?;
            Ok::<_, mslln_core::Error>((gammas, per_rep))
        })();
        match result {
            Ok((gammas, per_rep)) => {
                for (li, (&h, &g)) in p.lags.iter().zip(&gammas).enumerate() {
                    let mut curve = Vec::new();
                    for r in 0..=cfg.levels {
                        let n_r = 1usize << r;
                        let values: Vec<f64> = per_rep
                            .iter()
                            .map(|devs| {
                                let (n, dev) = devs[li][r as usize];
                                debug_assert_eq!(n, n_r);
                                normalized_deviation(n, p.p, dev, 0.0, critical_p).value.abs()
                            })
                            .collect();
                        let m = median(&values).unwrap_or(f64::NAN);
                        curve.push(m);
                        medians.push(vec![
                            p.index.into(),
                            h.into(),
                            r.into(),
                            n_r.into(),
                            g.into(),
                            m.into(),
                            cfg.replications.into(),
                        ]);
                    }
                    let top = &curve[curve.len().saturating_sub(4)..];
                    let decreasing = top.len() == 4 && top.windows(2).all(|w| w[1] < w[0]);
                    summary.push(vec![
                        p.index.into(),
                        p.sigma().into(),
                        alpha_cell(p.tail),
                        h.into(),
                        p.p.into(),
                        critical_p.into(),
                        (p.p < critical_p).into(),
                        g.into(),
                        decreasing.into(),
                        cfg.replications.into(),
                        ctx.n.into(),
                        p.half_width.into(),
                        cfg.base_seed.into(),
                        ctx.status().into(),
                    ]);
                }
            }
            Err(e) => {
                for &h in &p.lags {
                    summary.push(vec![
                        p.index.into(),
                        p.sigma().into(),
                        alpha_cell(p.tail),
                        h.into(),
                        p.p.into(),
                        critical_p.into(),
                        (p.p < critical_p).into(),
                        Cell::Empty,
                        Cell::Empty,
                        cfg.replications.into(),
                        ctx.n.into(),
                        p.half_width.into(),
                        cfg.base_seed.into(),
                        failed(&e).into(),
                    ]);
                }
                failures.push(PointFailure {
                    grid: p.index,
                    message: e.to_string(),
                });
            }
        }
    }
    Outcome {
        scenario: Scenario::Autocov,
        tables: vec![summary, medians],
        failures,
    }
}

fn run_appell(ctx: &Ctx, points: &[ResolvedPoint]) -> Outcome {
    let cfg = ctx.config;
    let range: FitRange = cfg.fit_range().expect("validated");
    let mut summary = Table::new(
        "appell",
        &[
            "grid", "sigma", "alpha", "regime", "e_star", "e_hat", "stderr", "r_lo", "r_hi", "reps", "n_max",
            "identity_max_abs", "half_width", "base_seed", "status",
        ],
    );
    let mut tables = Vec::new();
    let mut failures = Vec::new();
    for p in points {
        let result = (|| {
            let rate = theoretical_exponent(p.sigma(), p.sigma(), p.tail)?;
            let sigma_xi = cross_moment(p.spec, p.coupling, 1)?;
            let mu2 = analytic_mean(&p.coef, &p.coef, &sigma_xi, p.half_width)?.matrix[(0, 0)];
            let generator = PathGenerator::new(p.coef.clone(), p.coef.clone(), ctx.n, ConvolutionStrategy::Auto)?;
            let runs = ctx.replicate(|rep| {
                let xi = stream(ctx, p, rep, generator.required_length())?.sample();
                let x = generator.generate(&xi)?.x.into_vec();
                let ledger = appell2_sums(&x, mu2, cfg.levels)?;
                let auto = autocov_pair(&x, ctx.n, 0, mu2, cfg.levels)?;
                let gap = auto
                    .deviations()
                    .iter()
                    .zip(ledger.scalar_sums())
                    .map(|((n, dev), s)| (dev * *n as f64 - s).abs())
                    .fold(0.0, f64::max);
                Ok((ledger, gap))
            })?;
            let (ledgers, gaps): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
            let est = empirical_exponent_with(&ledgers, range, 1)?;
            Ok::<_, mslln_core::Error>((rate, ledgers, gaps.into_iter().fold(0.0, f64::max), est))
        })();
        let mut row: Vec<Cell> = vec![p.index.into(), p.sigma().into(), alpha_cell(p.tail)];
        match result {
            Ok((rate, ledgers, gap, est)) => {
                row.extend([
                    rate.regime.name().into(),
                    rate.exponent.into(),
                    est.slope.into(),
                    est.stderr.into(),
                    est.r_lo.into(),
                    est.r_hi.into(),
                    est.replications.into(),
                    ctx.n.into(),
                    gap.into(),
                    p.half_width.into(),
                    cfg.base_seed.into(),
                    ctx.status().into(),
                ]);
                let mut t = ledger_table(p.index, &ledgers);
                t.name = format!("appell_ledgers_g{}", p.index);
                tables.push(t);
            }
            Err(e) => {
                row.extend([
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    range.lo.into(),
                    range.hi.into(),
                    cfg.replications.into(),
                    ctx.n.into(),
                    Cell::Empty,
                    p.half_width.into(),
                    cfg.base_seed.into(),
                    failed(&e).into(),
                ]);
                failures.push(PointFailure {
                    grid: p.index,
                    message: e.to_string(),
                });
            }
        }
        summary.push(row);
    }
    tables.insert(0, summary);
    Outcome {
        scenario: Scenario::Appell,
        tables,
        failures,
    }
}

fn run_simulate(ctx: &Ctx, points: &[ResolvedPoint]) -> Outcome {
    let cfg = ctx.config;
    let mut summary = Table::new(
        "simulate",
        &["grid", "sigma", "sigma_bar", "alpha", "dim", "half_width", "reps", "n", "base_seed", "status"],
    );
    let mut tables = Vec::new();
    let mut failures = Vec::new();
    for p in points {
        let result = (|| {
            let generator = PathGenerator::new(p.coef.clone(), p.coef_bar.clone(), ctx.n, ConvolutionStrategy::Auto)?;
            ctx.replicate(|rep| generator.generate(&stream(ctx, p, rep, generator.required_length())?.sample()))
        })();
        let d = p.coef.rows();
        let d_bar = p.coef_bar.rows();
        let status = match result {
            Ok(runs) => {
                let mut columns = vec!["replication".to_string(), "k".into()];
                columns.extend((0..d).map(|i| format!("x_{i}")));
                columns.extend((0..d_bar).map(|i| format!("xbar_{i}")));
                let mut t = Table::new(format!("paths_g{}", p.index), &columns);
                for (rep, paths) in runs.iter().enumerate() {
                    for k in 0..ctx.n {
                        let mut row: Vec<Cell> = vec![rep.into(), (k + 1).into()];
                        row.extend(paths.x.row(k).iter().map(|v| Cell::Float(*v)));
                        row.extend(paths.x_bar.row(k).iter().map(|v| Cell::Float(*v)));
                        t.push(row);
                    }
                }
                tables.push(t);
                STATUS_OK.to_string()
            }
            Err(e) => {
                failures.push(PointFailure {
                    grid: p.index,
                    message: e.to_string(),
                });
                failed(&e)
            }
        };
        summary.push(vec![
            p.index.into(),
            p.sigma().into(),
            p.sigma_bar().into(),
            alpha_cell(p.tail),
            d.into(),
            p.half_width.into(),
            cfg.replications.into(),
            ctx.n.into(),
            cfg.base_seed.into(),
            status.into(),
        ]);
    }
    tables.insert(0, summary);
    Outcome {
        scenario: Scenario::Simulate,
        tables,
        failures,
    }
}
