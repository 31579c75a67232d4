//! The numbered acceptance checks. Each returns a partial [`StatReport`]
//! plus whatever data the pipelines persist.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{model_params, LatticeRun, ToleranceTable};
use super::report::StatReport;
use super::stats::{self, bootstrap_ci, block_length_for, integrated_autocorrelation_time, ks_statistic};
use super::{Context, HarnessError};
use crate::birthdeath::{stirling_envelope, BirthDeathChain};
use crate::exact::{self, functionals, law_of_magnetization, ExactSolution, MagnetizationLaw};
use crate::field::{
    compare_with_prediction, empirical_field_statistics, projection_check, FieldStatistics, Interval, ModeComparison,
    ProjectionEstimate, TestFunction,
};
use crate::lattice::{run_replicas, total_events, SampleSeries, SimulationSchedule};
use crate::limitlaw::{invariance_test, QuarticLaw};
use crate::potentials::{eval_w, ModelParams};

fn schedule(run: &LatticeRun, seed: u64) -> SimulationSchedule {
    SimulationSchedule {
        burn_in_time: run.burn_in,
        sample_interval: run.sample_interval,
        sample_count: run.samples,
        seed,
        replica_id: 0,
    }
}

pub fn simulate_run(
    params: &ModelParams,
    modes: &[TestFunction],
    run: &LatticeRun,
    seed: u64,
    max_events: f64,
) -> Result<Vec<SampleSeries>, HarnessError> {
    run_replicas(params, modes, &schedule(run, seed), run.replicas, max_events)
        .context(format!("simulation at n = {}", params.n()))
}

/// Empirical pmf of `sum eta` recovered from the recorded magnetization.
pub fn empirical_level_pmf(series: &[SampleSeries]) -> Vec<f64> {
    let n = series[0].params.n();
    let scale = (n as f64).powf(0.75);
    let mut counts = vec![0.0; n + 1];
    let mut total = 0.0;
    for s in series {
        for r in &s.rows {
            let m = (r.magnetization * scale + 0.5 * n as f64).round() as usize;
            counts[m.min(n)] += 1.0;
            total += 1.0;
        }
    }
    counts.iter().map(|c| c / total).collect()
}

pub struct OracleOutcome {
    pub report: StatReport,
    pub series: Vec<SampleSeries>,
    pub solution: ExactSolution,
    pub empirical_pmf: Vec<f64>,
    pub exact_law: MagnetizationLaw,
}

/// Criterion 1: Monte Carlo magnetization law against the exact stationary law.
pub fn oracle_equivalence(
    params: &ModelParams,
    run: &LatticeRun,
    seed: u64,
    max_events: f64,
    tol: &ToleranceTable,
) -> Result<OracleOutcome, HarnessError> {
    let start = Instant::now();
    let series = simulate_run(params, &[], run, seed, max_events)?;
    let solution = exact::solve(params).context("exact solve")?;
    let exact_law = law_of_magnetization(&solution);
    let empirical_pmf = empirical_level_pmf(&series);
    let tv = stats::total_variation(&empirical_pmf, &exact_law.pmf);
    let elapsed = start.elapsed().as_secs_f64();
    let mut report = StatReport::new("oracle", "");
    let retained: usize = series.iter().map(|s| s.rows.len()).sum();
    report.estimate("oracle.retained_samples", retained as f64);
    report.estimate("oracle.events", total_events(&series).total() as f64);
    report.flag_below(1, format!("oracle.tv_n{}", params.n()), tv, tol.oracle_tv);
    report.flag(
        1,
        "oracle.runtime_secs",
        elapsed,
        format!("<= {}", tol.oracle_runtime_secs),
        elapsed <= tol.oracle_runtime_secs,
    );
    Ok(OracleOutcome {
        report,
        series,
        solution,
        empirical_pmf,
        exact_law,
    })
}

/// Criterion 2: at `gamma = 0` the stationary law is uniform.
pub fn degenerate_tilt(n: usize, a: f64, tol: &ToleranceTable) -> Result<(StatReport, ExactSolution), HarnessError> {
    let params = ModelParams::untilted(n, a).context("degenerate tilt")?;
    let solution = exact::solve(&params).context("exact solve")?;
    let mut report = StatReport::new("degenerate", "");
    degenerate_flags(&solution, tol, &mut report)?;
    Ok((report, solution))
}

pub fn degenerate_flags(solution: &ExactSolution, tol: &ToleranceTable, report: &mut StatReport) -> Result<(), HarnessError> {
    let states = solution.mu_ss.len();
    let uniform = vec![1.0 / states as f64; states];
    let tv = stats::total_variation(&solution.mu_ss, &uniform);
    let entropy = functionals(&solution.stationary_density(), solution)
        .context("entropy of the stationary density")?
        .entropy;
    let n = solution.n();
    report.flag_below(2, format!("degenerate.tv_uniform_n{n}"), tv, tol.degenerate_tv);
    report.flag_below(2, format!("degenerate.entropy_n{n}"), entropy.abs(), tol.degenerate_entropy);
    Ok(())
}

/// Criterion 3: detailed-balance residual of the birth-death chain.
pub fn detailed_balance(ns: &[usize], thetas: &[f64], tol: &ToleranceTable) -> Result<StatReport, HarnessError> {
    let mut report = StatReport::new("detailed_balance", "");
    for &n in ns {
        for &theta in thetas {
            let chain = BirthDeathChain::build(n, theta).context(format!("chain n = {n}"))?;
            report.flag_below(
                3,
                format!("bd.detailed_balance_n{n}_theta{theta}"),
                chain.detailed_balance_residual(),
                tol.detailed_balance,
            );
        }
    }
    Ok(report)
}

/// Criterion 4 at one `(n, theta)`.
pub fn w_properties(n: usize, theta: f64, grid_points: usize, tol: &ToleranceTable, report: &mut StatReport) -> Result<(), HarnessError> {
    let params = ModelParams::new(n, theta, 1.0).context("W parameters")?;
    let w = eval_w(0.5, &params).context("W at 1/2")?;
    let tag = format!("n{n}_theta{theta}");
    report.flag_below(4, format!("w.value_{tag}"), w.value.abs(), tol.w_derivatives);
    report.flag_below(4, format!("w.d1_{tag}"), w.d1.abs(), tol.w_derivatives);
    report.flag_below(4, format!("w.d3_{tag}"), w.d3.abs(), tol.w_derivatives);
    let d2_err = (w.d2 - 4.0 * theta / (n as f64).sqrt()).abs();
    report.flag_below(4, format!("w.d2_minus_4theta_over_sqrt_n_{tag}"), d2_err, tol.w_derivatives);
    let last = (grid_points - 1) as f64;
    let mut min_d4 = f64::INFINITY;
    for i in 0..grid_points {
        min_d4 = min_d4.min(eval_w(i as f64 / last, &params).context("W on grid")?.d4);
    }
    report.flag(
        4,
        format!("w.min_d4_{tag}"),
        min_d4,
        format!("> {}", tol.w_quartic_min),
        min_d4 > tol.w_quartic_min,
    );
    Ok(())
}

pub fn w_property_grid(ns: &[usize], thetas: &[f64], grid_points: usize, tol: &ToleranceTable) -> Result<StatReport, HarnessError> {
    let mut report = StatReport::new("w_properties", "");
    for &n in ns {
        for &theta in thetas {
            w_properties(n, theta, grid_points, tol, &mut report)?;
        }
    }
    Ok(report)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    stats::covariance(&lx, &ly) / stats::variance(&lx)
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Criterion 5: `C^±(m_n)` grows like `sqrt(n)`.
pub fn miclo_scaling(thetas: &[f64], log2_range: (u32, u32), tol: &ToleranceTable) -> Result<StatReport, HarnessError> {
    let start = Instant::now();
    let mut report = StatReport::new("miclo", "");
    let ns: Vec<usize> = (log2_range.0..=log2_range.1).map(|j| 1usize << j).collect();
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    for &theta in thetas {
        let constants: Vec<(f64, f64)> = ns
            .par_iter()
            .map(|&n| {
                let chain = BirthDeathChain::build(n, theta)?;
                Ok(chain.miclo_constants(chain.midpoint()))
            })
            .collect::<Result<_, crate::potentials::ModelError>>()
            .context("Miclo constants")?;
        for (side, values) in [
            ("minus", constants.iter().map(|c| c.0).collect::<Vec<_>>()),
            ("plus", constants.iter().map(|c| c.1).collect::<Vec<_>>()),
        ] {
            let slope = log_log_slope(&nf, &values);
            report.flag_within(
                5,
                format!("miclo.slope_{side}_theta{theta}"),
                slope,
                tol.miclo_slope_low,
                tol.miclo_slope_high,
            );
            let scaled: Vec<f64> = values.iter().zip(&nf).map(|(c, n)| c / n.sqrt()).collect();
            let s = spread(&scaled);
            report.flag_below(5, format!("miclo.spread_{side}_theta{theta}"), s, tol.miclo_spread);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report.flag(
        5,
        "miclo.runtime_secs",
        elapsed,
        format!("<= {}", tol.miclo_runtime_secs),
        elapsed <= tol.miclo_runtime_secs,
    );
    Ok(report)
}

/// Criterion 6: `gap * sqrt(n)` stays within a factor of its median, and
/// the gap respects the Miclo lower bound.
pub fn spectral_gap_order(theta: f64, log2_range: (u32, u32), tol: &ToleranceTable) -> Result<StatReport, HarnessError> {
    let mut report = StatReport::new("gap", "");
    let ns: Vec<usize> = (log2_range.0..=log2_range.1).map(|j| 1usize << j).collect();
    let rows: Vec<(usize, f64, f64)> = ns
        .par_iter()
        .map(|&n| {
            let chain = BirthDeathChain::build(n, theta).map_err(crate::birthdeath::BirthDeathError::from)?;
            let gap = chain.spectral_gap()?;
            Ok((n, gap, chain.miclo_minimum().0))
        })
        .collect::<Result<_, crate::birthdeath::BirthDeathError>>()
        .context("spectral gap")?;
    let scaled: Vec<f64> = rows.iter().map(|(n, g, _)| g * (*n as f64).sqrt()).collect();
    let mut sorted = scaled.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = stats::quantile(&sorted, 0.5);
    let worst = scaled.iter().map(|v| (v / median).max(median / v)).fold(1.0, f64::max);
    report.estimate(format!("gap.median_gap_sqrt_n_theta{theta}"), median);
    report.flag(
        6,
        format!("gap.max_factor_from_median_theta{theta}"),
        worst,
        format!("<= {}", tol.gap_spread),
        worst <= tol.gap_spread,
    );
    for (n, gap, c_n) in &rows {
        report.estimate(format!("gap.n{n}"), *gap);
        let margin = gap * tol.gap_miclo_factor * c_n;
        report.flag(
            6,
            format!("gap.times_{}_c_n_n{n}", tol.gap_miclo_factor),
            margin,
            ">= 1",
            margin >= 1.0,
        );
    }
    Ok(report)
}

/// Criterion 7: normalizer and second moment of the quartic law at `theta = 0`.
pub fn limit_numerics(tol: &ToleranceTable) -> Result<(StatReport, QuarticLaw), HarnessError> {
    let law = QuarticLaw::new(0.0).context("quartic law")?;
    let mut report = StatReport::new("limit", "");
    limit_flags(&law, tol, &mut report)?;
    Ok((report, law))
}

pub fn limit_flags(law: &QuarticLaw, tol: &ToleranceTable, report: &mut StatReport) -> Result<(), HarnessError> {
    use statrs::function::gamma::gamma;
    let z_ref = gamma(0.25) / 2.0;
    let m2_ref = gamma(0.75) / gamma(0.25);
    let m2 = law.moment(2).context("second moment")?;
    report.estimate("limit.z", law.z());
    report.estimate("limit.moment2", m2);
    report.flag_below(7, "limit.z_error", (law.z() - z_ref).abs(), tol.limit_z);
    report.flag_below(7, "limit.moment2_error", (m2 - m2_ref).abs(), tol.limit_moment);
    Ok(())
}

/// Criterion 8: variance of `m n^{-3/4}` under the birth-death law.
pub fn bd_variance_limit(n: usize, thetas: &[f64], tol: &ToleranceTable) -> Result<StatReport, HarnessError> {
    let mut report = StatReport::new("bd_variance", "");
    for &theta in thetas {
        let chain = BirthDeathChain::build(n, theta).context("birth-death chain")?;
        let var = chain.variance_of_test_function().variance;
        let m2 = QuarticLaw::new(theta).context("quartic law")?.moment(2).context("moment")?;
        report.estimate(format!("bd.variance_n{n}_theta{theta}"), var);
        report.flag_below(8, format!("bd.variance_gap_theta{theta}"), (var - m2).abs(), tol.bd_variance);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsEstimate {
    pub n: usize,
    pub ks: f64,
    pub ci: Interval,
    pub effective_samples: f64,
    pub autocorrelation_time: f64,
    pub samples: usize,
}

/// One-sample KS of pooled magnetization samples against `alpha*` with a
/// block-bootstrap interval.
pub fn ks_against_limit(series: &[SampleSeries], law: &QuarticLaw, resamples: usize, seed: u64) -> Result<KsEstimate, HarnessError> {
    let pooled: Vec<f64> = series.iter().flat_map(|s| s.magnetizations()).collect();
    let cdf = |y: f64| law.cdf(y);
    let ks = ks_statistic(&pooled, cdf).context("KS")?;
    let taus: Vec<f64> = series
        .iter()
        .map(|s| integrated_autocorrelation_time(&s.magnetizations()))
        .collect();
    let effective: f64 = series.iter().zip(&taus).map(|(s, t)| s.rows.len() as f64 / t).sum();
    let tau = stats::mean(&taus);
    let (low, high) = bootstrap_ci(
        &pooled,
        |s: &[f64]| ks_statistic(s, cdf).unwrap_or(f64::NAN),
        block_length_for(tau, pooled.len()),
        resamples,
        seed,
    )
    .context("KS bootstrap")?;
    Ok(KsEstimate {
        n: series[0].params.n(),
        ks,
        ci: Interval { low, high },
        effective_samples: effective,
        autocorrelation_time: tau,
        samples: pooled.len(),
    })
}

pub struct MainOutcome {
    pub report: StatReport,
    pub series: Vec<Vec<SampleSeries>>,
    pub ks: Vec<KsEstimate>,
}

/// Criterion 9: convergence of the magnetization law to `alpha*` at `theta = 0`.
pub fn main_theorem_trend(
    runs: &[LatticeRun],
    a: f64,
    seed: u64,
    resamples: usize,
    max_events: f64,
    tol: &ToleranceTable,
) -> Result<MainOutcome, HarnessError> {
    let start = Instant::now();
    let law = QuarticLaw::new(0.0).context("quartic law")?;
    let mut all = Vec::new();
    let mut ks = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let params = model_params(run.n, 0.0, a)?;
        let h = TestFunction::cosine(run.n, 1).context("test function")?;
        let series = simulate_run(&params, &[h], run, seed.wrapping_add(i as u64), max_events)?;
        ks.push(ks_against_limit(&series, &law, resamples, seed ^ run.n as u64)?);
        all.push(series);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let mut report = StatReport::new("main", "");
    for k in &ks {
        report.estimate_ci(format!("main.ks_n{}", k.n), k.ks, (k.ci.low, k.ci.high));
        report.estimate(format!("main.ess_n{}", k.n), k.effective_samples);
        report.estimate(format!("main.tau_n{}", k.n), k.autocorrelation_time);
    }
    let violations = ks
        .windows(2)
        .filter(|w| {
            let decreasing = w[1].ks < w[0].ks;
            let overlap = w[0].ci.low <= w[1].ci.high && w[1].ci.low <= w[0].ci.high;
            !(decreasing || overlap)
        })
        .count();
    report.flag(
        9,
        "main.trend_violations",
        violations as f64,
        "== 0 (decreasing or CI overlap)",
        violations == 0,
    );
    let last = ks.last().expect("at least one run");
    report.flag_below(9, format!("main.ks_n{}", last.n), last.ks, tol.main_ks);
    report.flag(
        9,
        format!("main.ess_n{}", last.n),
        last.effective_samples,
        format!(">= {}", tol.main_min_ess),
        last.effective_samples >= tol.main_min_ess,
    );
    report.flag(
        9,
        "main.runtime_secs",
        elapsed,
        format!("<= {}", tol.main_runtime_secs),
        elapsed <= tol.main_runtime_secs,
    );
    Ok(MainOutcome {
        report,
        series: all,
        ks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCovariance {
    pub first: String,
    pub second: String,
    pub covariance: f64,
    pub ci: Interval,
    /// `|cov| / half-width`.
    pub half_widths: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub n: usize,
    pub a: f64,
    pub modes: Vec<ModeComparison>,
    pub cross: Vec<CrossCovariance>,
    pub statistics: FieldStatistics,
}

/// Mode comparisons and cross-covariance checks on recorded series.
pub fn field_checks(
    series: &[SampleSeries],
    modes: &[TestFunction],
    a: f64,
    resamples: usize,
    seed: u64,
    tol: &ToleranceTable,
    report: &mut StatReport,
) -> Result<FieldSummary, HarnessError> {
    let indices: Vec<usize> = (0..modes.len()).collect();
    let statistics = empirical_field_statistics(series, &indices, resamples, seed).context("field statistics")?;
    let refs: Vec<&TestFunction> = modes.iter().collect();
    let comparisons = compare_with_prediction(&statistics, &refs, a).context("prediction")?;
    for c in &comparisons {
        report.estimate_ci(
            format!("field.var_{}", c.label),
            c.variance,
            (c.variance_ci.low, c.variance_ci.high),
        );
        report.estimate(format!("field.predicted_{}", c.label), c.predicted);
        report.flag_below(10, format!("field.rel_error_{}", c.label), c.relative_error, tol.field_variance_rel);
    }
    let mut cross = Vec::new();
    for i in 0..modes.len() {
        for j in i + 1..modes.len() {
            let ci = statistics.covariance_ci[i][j].clone();
            let cov = statistics.covariance[i][j];
            let hw = ci.half_width();
            let ratio = if hw > 0.0 { cov.abs() / hw } else { f64::INFINITY };
            report.flag(
                10,
                format!("field.cross_{}_{}", statistics.labels[i], statistics.labels[j]),
                ratio,
                format!("<= {} half-widths", tol.field_cross_half_widths),
                ratio <= tol.field_cross_half_widths,
            );
            cross.push(CrossCovariance {
                first: statistics.labels[i].clone(),
                second: statistics.labels[j].clone(),
                covariance: cov,
                ci,
                half_widths: ratio,
            });
        }
    }
    Ok(FieldSummary {
        n: series[0].params.n(),
        a,
        modes: comparisons,
        cross,
        statistics,
    })
}

pub struct FieldOutcome {
    pub report: StatReport,
    pub series: Vec<SampleSeries>,
    pub summary: FieldSummary,
}

/// Criterion 10: Gaussian covariance of the fast modes.
pub fn field_covariance(
    run: &LatticeRun,
    wavenumbers: &[u32],
    a: f64,
    seed: u64,
    resamples: usize,
    max_events: f64,
    tol: &ToleranceTable,
) -> Result<FieldOutcome, HarnessError> {
    let start = Instant::now();
    let params = model_params(run.n, 0.0, a)?;
    let mut modes = Vec::new();
    for &k in wavenumbers {
        modes.push(TestFunction::cosine(run.n, k).context("cosine mode")?);
        modes.push(TestFunction::sine(run.n, k).context("sine mode")?);
    }
    let series = simulate_run(&params, &modes, run, seed, max_events)?;
    let mut report = StatReport::new("field", "");
    // Only the cosine modes H_k enter the variance flags; sine modes feed the cross checks.
    let summary = field_checks(&series, &modes, a, resamples, seed, tol, &mut report)?;
    report
        .flags
        .retain(|f| !(f.name.starts_with("field.rel_error_sin")));
    let elapsed = start.elapsed().as_secs_f64();
    report.flag(
        10,
        "field.runtime_secs",
        elapsed,
        format!("<= {}", tol.field_runtime_secs),
        elapsed <= tol.field_runtime_secs,
    );
    Ok(FieldOutcome { report, series, summary })
}

/// Criterion 11: `E|Y^n(H_1)|` decays like `n^{-1/4}` between the smallest
/// and largest recorded lattices.
pub fn projection_scaling(
    runs: &[Vec<SampleSeries>],
    resamples: usize,
    seed: u64,
    tol: &ToleranceTable,
) -> Result<(StatReport, Vec<ProjectionEstimate>), HarnessError> {
    let mut report = StatReport::new("projection", "");
    let mut estimates = Vec::new();
    for series in runs {
        let n = series[0].params.n();
        let h = TestFunction::cosine(n, 1).context("test function")?;
        let e = projection_check(series, &h, resamples, seed ^ n as u64).context("projection")?;
        report.estimate_ci(format!("projection.mean_abs_n{n}"), e.mean_abs, (e.ci.low, e.ci.high));
        estimates.push(e);
    }
    let small = estimates.iter().min_by_key(|e| e.n).expect("runs");
    let large = estimates.iter().max_by_key(|e| e.n).expect("runs");
    let ratio = large.mean_abs / small.mean_abs;
    report.flag_within(
        11,
        format!("projection.ratio_n{}_over_n{}", large.n, small.n),
        ratio,
        tol.projection_ratio_low,
        tol.projection_ratio_high,
    );
    Ok((report, estimates))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeResult {
    pub theta: f64,
    pub ks: f64,
}

/// Criterion 12: `alpha*` is invariant for the Langevin diffusion.
pub fn sde_invariance(
    thetas: &[f64],
    a: f64,
    t: f64,
    dt: f64,
    paths: usize,
    seed: u64,
    tol: &ToleranceTable,
) -> Result<(StatReport, Vec<SdeResult>), HarnessError> {
    let mut report = StatReport::new("sde", "");
    let mut results = Vec::new();
    for (i, &theta) in thetas.iter().enumerate() {
        let ks = invariance_test(theta, a, t, paths, dt, seed.wrapping_add(i as u64)).context("SDE invariance")?;
        report.flag_below(12, format!("sde.ks_theta{theta}"), ks, tol.sde_ks);
        results.push(SdeResult { theta, ks });
    }
    Ok((report, results))
}

/// Criterion 13: the probed log-Sobolev ratio stays bounded across `n`.
pub fn lsi_probe_tracking(
    ns: &[usize],
    a: f64,
    densities: usize,
    seed: u64,
    tol: &ToleranceTable,
) -> Result<StatReport, HarnessError> {
    let mut report = StatReport::new("lsi", "");
    let mut maxima = Vec::new();
    for &n in ns {
        let params = ModelParams::new(n, 0.0, a).context("LSI parameters")?;
        let solution = exact::solve(&params).context("exact solve")?;
        let probe = exact::lsi_probe(densities, &solution, seed).context("LSI probe")?;
        report.flag(
            13,
            format!("lsi.max_ratio_n{n}"),
            probe.max_ratio,
            "finite",
            probe.max_ratio.is_finite(),
        );
        maxima.push(probe.max_ratio);
    }
    let s = spread(&maxima);
    report.flag(13, "lsi.max_over_min", s, format!("<= {}", tol.lsi_spread), s <= tol.lsi_spread);
    Ok(report)
}

/// Criterion 14: the Stirling envelope ratio on the central half.
pub fn stirling(n: usize, tol: &ToleranceTable) -> Result<StatReport, HarnessError> {
    let mut report = StatReport::new("stirling", "");
    let (lo, hi) = stirling_envelope(n).context("Stirling envelope")?;
    report.flag(14, format!("stirling.min_n{n}"), lo, format!(">= {}", tol.stirling_low), lo >= tol.stirling_low);
    report.flag(14, format!("stirling.max_n{n}"), hi, format!("<= {}", tol.stirling_high), hi <= tol.stirling_high);
    report.flag_below(14, format!("stirling.max_over_min_n{n}"), hi / lo, tol.stirling_spread);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = (1..10).map(|i| (1 << i) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(0.5)).collect();
        assert!((log_log_slope(&x, &y) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cheap_criteria_pass() {
        let tol = ToleranceTable::default();
        assert!(detailed_balance(&[16], &[-1.0, 0.0, 1.0], &tol).unwrap().all_passed());
        assert!(w_property_grid(&[16, 256], &[0.0, 1.0], 1000, &tol).unwrap().all_passed());
        assert!(limit_numerics(&tol).unwrap().0.all_passed());
        assert!(stirling(4096, &tol).unwrap().all_passed());
        assert!(degenerate_tilt(6, 0.1, &tol).unwrap().0.all_passed());
    }

    #[test]
    fn level_pmf_from_samples() {
        let params = ModelParams::new(6, 0.0, 0.1).unwrap();
        let run = LatticeRun {
            n: 6,
            replicas: 2,
            burn_in: 1.0,
            samples: 50,
            sample_interval: 0.5,
        };
        let series = simulate_run(&params, &[], &run, 3, 1e9).unwrap();
        let pmf = empirical_level_pmf(&series);
        assert_eq!(pmf.len(), 7);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
