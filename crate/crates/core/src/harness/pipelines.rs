//! Subcommand pipelines: run, write artifacts, return a report.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{model_params, require_even, ExperimentConfig, LatticeRun};
use super::criteria::{self, FieldSummary, KsEstimate, SdeResult};
use super::report::{merge_reports, write_file, StatReport, MERGED_REPORT, REPORT_SUFFIX};
use super::{criterion_seed, with_workers, Context, HarnessError};
use crate::birthdeath::{summarize, BirthDeathSummary, BD_CSV_HEADER};
use crate::exact::{self, functionals, law_of_magnetization, ExactSolution, MAX_SITES};
use crate::field::{ProjectionEstimate, TestFunction};
use crate::lattice::{total_events, SampleSeries};
use crate::limitlaw::QuarticLaw;
use crate::potentials::ModelParams;

/// Parse `cos<k>`, `sin<k>` or `const`.
pub fn parse_mode(n: usize, label: &str) -> Result<TestFunction, HarnessError> {
    if label == "const" {
        return Ok(TestFunction::constant(n));
    }
    let bad = || HarnessError::Invalid(format!("unknown test function {label:?} (expected cos<k>, sin<k> or const)"));
    let (kind, k) = label.split_at(label.len().min(3));
    let k: u32 = k.parse().map_err(|_| bad())?;
    match kind {
        "cos" => TestFunction::cosine(n, k).context(format!("mode {label}")),
        "sin" => TestFunction::sine(n, k).context(format!("mode {label}")),
        _ => Err(bad()),
    }
}

fn json_out<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    Ok(write_file(&dir.join(name), text.as_bytes())?)
}

fn finish(mut report: StatReport, cfg: &ExperimentConfig, start: Instant) -> Result<StatReport, HarnessError> {
    report.config_hash = cfg.hash();
    report.runtime_secs = start.elapsed().as_secs_f64();
    report.save(&cfg.out_dir.join(format!("{}{REPORT_SUFFIX}", report.command)))?;
    Ok(report)
}

fn save_series(dir: &Path, tag: &str, series: &[SampleSeries], hash: &str) -> Result<(), HarnessError> {
    for (r, s) in series.iter().enumerate() {
        s.save(dir, &format!("series_{tag}_r{r}"), Some(hash)).context("writing series")?;
    }
    Ok(())
}

fn run_from_settings(cfg: &ExperimentConfig, params: &ModelParams) -> LatticeRun {
    let s = params.sqrt_n();
    LatticeRun {
        n: params.n(),
        replicas: cfg.run.replicas,
        burn_in: cfg.run.burn_in.unwrap_or(10.0 * s),
        samples: cfg.run.samples,
        sample_interval: cfg.run.sample_interval.unwrap_or(0.5 * s),
    }
}

/// `simulate`: stationary replicas, with an exact-law check when the lattice is small enough.
pub fn simulate(cfg: &ExperimentConfig) -> Result<StatReport, HarnessError> {
    let start = Instant::now();
    cfg.validate()?;
    require_even(cfg.run.n)?;
    let params = cfg.run_params()?;
    let run = run_from_settings(cfg, &params);
    let modes = cfg
        .run
        .modes
        .iter()
        .map(|m| parse_mode(params.n(), m))
        .collect::<Result<Vec<_>, _>>()?;
    let hash = cfg.hash();
    let series = with_workers(cfg.workers, || {
        criteria::simulate_run(&params, &modes, &run, cfg.seed, cfg.run.max_events)
    })?;
    save_series(&cfg.out_dir, &format!("n{}", params.n()), &series, &hash)?;
    let mut report = StatReport::new("simulate", &hash);
    let events = total_events(&series);
    let wall: f64 = series.iter().map(|s| s.wall_time_secs).sum();
    report.estimate("simulate.events", events.total() as f64);
    report.estimate("simulate.events_per_sec", events.total() as f64 / wall.max(1e-9));
    let y: Vec<f64> = series.iter().flat_map(|s| s.magnetizations()).collect();
    report.estimate("simulate.mean_Y2", y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64);
    let ess: f64 = series
        .iter()
        .map(|s| s.rows.len() as f64 / super::stats::integrated_autocorrelation_time(&s.magnetizations()))
        .sum();
    report.estimate("simulate.ess_Y", ess);
    if params.n() <= MAX_SITES {
        let solution = exact::solve(&params).context("exact solve")?;
        let tv = super::stats::total_variation(&criteria::empirical_level_pmf(&series), &law_of_magnetization(&solution).pmf);
        report.flag_below(1, format!("oracle.tv_n{}", params.n()), tv, cfg.tolerances.oracle_tv);
    }
    finish(report, cfg, start)
}

#[derive(Serialize)]
struct ExactArtifact<'a> {
    config_hash: &'a str,
    n: usize,
    theta: f64,
    a: f64,
    gamma: f64,
    residual: f64,
    magnetization_support: &'a [f64],
    magnetization_pmf: &'a [f64],
    level_weights: &'a [f64],
    stationary_entropy: f64,
    stationary_dirichlet: f64,
    mu_ss: &'a [f64],
}

fn write_exact(dir: &Path, hash: &str, solution: &ExactSolution) -> Result<(), HarnessError> {
    let law = law_of_magnetization(solution);
    let fun = functionals(&solution.stationary_density(), solution).context("stationary functionals")?;
    let p = &solution.params;
    json_out(
        dir,
        "exact.json",
        &ExactArtifact {
            config_hash: hash,
            n: p.n(),
            theta: p.theta(),
            a: p.a(),
            gamma: p.gamma_glauber(),
            residual: solution.residual,
            magnetization_support: &law.support,
            magnetization_pmf: &law.pmf,
            level_weights: &solution.level_weights,
            stationary_entropy: fun.entropy,
            stationary_dirichlet: fun.dirichlet,
            mu_ss: &solution.mu_ss,
        },
    )
}

/// `exact`: stationary law on all `2^n` states; uniformity flags at `gamma = 0`.
pub fn exact_command(cfg: &ExperimentConfig) -> Result<StatReport, HarnessError> {
    let start = Instant::now();
    cfg.validate()?;
    let params = cfg.run_params()?;
    let solution = exact::solve(&params).context("exact solve")?;
    let hash = cfg.hash();
    write_exact(&cfg.out_dir, &hash, &solution)?;
    let mut report = StatReport::new("exact", &hash);
    report.estimate("exact.residual", solution.residual);
    if params.gamma_glauber() == 0.0 {
        criteria::degenerate_flags(&solution, &cfg.tolerances, &mut report)?;
    }
    finish(report, cfg, start)
}

#[derive(Serialize)]
struct CsvSidecar<'a, T: Serialize> {
    config_hash: &'a str,
    file: &'a str,
    #[serde(flatten)]
    content: T,
}

fn write_bd(dir: &Path, hash: &str, rows: &[BirthDeathSummary]) -> Result<(), HarnessError> {
    let mut csv = format!("{BD_CSV_HEADER}\r\n");
    for r in rows {
        csv.push_str(&r.csv_row());
        csv.push_str("\r\n");
    }
    write_file(&dir.join("bd.csv"), csv.as_bytes())?;
    #[derive(Serialize)]
    struct Rows<'a> {
        rows: &'a [BirthDeathSummary],
    }
    json_out(
        dir,
        "bd.json",
        &CsvSidecar {
            config_hash: hash,
            file: "bd.csv",
            content: Rows { rows },
        },
    )
}

/// `birthdeath`: constants of the reduced chain, detailed balance and `W` checks.
pub fn birthdeath_command(cfg: &ExperimentConfig) -> Result<StatReport, HarnessError> {
    let start = Instant::now();
    cfg.validate()?;
    let params = cfg.run_params()?;
    let (n, theta) = (params.n(), params.theta());
    let summary = summarize(n, theta).context("birth-death summary")?;
    let hash = cfg.hash();
    write_bd(&cfg.out_dir, &hash, &[summary])?;
    let mut report = StatReport::new("birthdeath", &hash);
    report.estimate("bd.C_n", summary.c_n);
    report.estimate("bd.gap", summary.gap);
    report.estimate("bd.var_fn", summary.var_fn);
    report.estimate("bd.znorm", summary.znorm);
    report.flag_below(
        3,
        format!("bd.detailed_balance_n{n}_theta{theta}"),
        summary.detailed_balance_residual,
        cfg.tolerances.detailed_balance,
    );
    if params.gamma_glauber() > 0.0 {
        criteria::w_properties(n, theta, cfg.suite.w_grid_points, &cfg.tolerances, &mut report)?;
    }
    finish(report, cfg, start)
}

#[derive(Serialize)]
struct LimitContent {
    theta: f64,
    log_z: f64,
    z: f64,
    moment2: f64,
    moment4: f64,
}

fn write_limit(dir: &Path, hash: &str, law: &QuarticLaw) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    law.write_csv(&mut buf).expect("in-memory write");
    write_file(&dir.join("limit.csv"), &buf)?;
    json_out(
        dir,
        "limit.json",
        &CsvSidecar {
            config_hash: hash,
            file: "limit.csv",
            content: LimitContent {
                theta: law.theta,
                log_z: law.log_z,
                z: law.z(),
                moment2: law.moment(2).context("moment")?,
                moment4: law.moment(4).context("moment")?,
            },
        },
    )
}

/// `limit`: tabulated quartic law; normalizer checks at `theta = 0`.
pub fn limit_command(cfg: &ExperimentConfig) -> Result<StatReport, HarnessError> {
    let start = Instant::now();
    cfg.validate()?;
    let law = QuarticLaw::new(cfg.run.theta).context("quartic law")?;
    let hash = cfg.hash();
    write_limit(&cfg.out_dir, &hash, &law)?;
    let mut report = StatReport::new("limit", &hash);
    if cfg.run.theta == 0.0 {
        criteria::limit_flags(&law, &cfg.tolerances, &mut report)?;
    } else {
        report.estimate("limit.z", law.z());
        report.estimate("limit.moment2", law.moment(2).context("moment")?);
    }
    finish(report, cfg, start)
}

#[derive(Serialize)]
struct SdeArtifact<'a> {
    config_hash: &'a str,
    a: f64,
    t: f64,
    dt: f64,
    paths: usize,
    results: &'a [SdeResult],
}

/// `sde`: invariance of `alpha*` under the Langevin diffusion.
pub fn sde_command(cfg: &ExperimentConfig) -> Result<StatReport, HarnessError> {
    let start = Instant::now();
    cfg.validate()?;
    let r = &cfg.run;
    let (part, results) = with_workers(cfg.workers, || {
        criteria::sde_invariance(&[r.theta], cfg.a, r.sde_time, r.sde_dt, r.sde_paths, cfg.seed, &cfg.tolerances)
    })?;
    let hash = cfg.hash();
    json_out(
        &cfg.out_dir,
        "sde.json",
        &SdeArtifact {
            config_hash: &hash,
            a: cfg.a,
            t: r.sde_time,
            dt: r.sde_dt,
            paths: r.sde_paths,
            results: &results,
        },
    )?;
    let mut report = StatReport::new("sde", &hash);
    report.extend(part);
    finish(report, cfg, start)
}

#[derive(Serialize)]
struct FieldArtifact<'a> {
    config_hash: &'a str,
    #[serde(flatten)]
    summary: &'a FieldSummary,
}

/// `field`: covariance of the recorded modes against the Gaussian prediction.
pub fn field_command(cfg: &ExperimentConfig) -> Result<StatReport, HarnessError> {
    let start = Instant::now();
    cfg.validate()?;
    require_even(cfg.run.n)?;
    let params = cfg.run_params()?;
    let run = run_from_settings(cfg, &params);
    let modes = cfg
        .run
        .modes
        .iter()
        .map(|m| parse_mode(params.n(), m))
        .collect::<Result<Vec<_>, _>>()?;
    if modes.iter().any(|m| m.mean.abs() > 1e-12) {
        return Err(HarnessError::Invalid("field modes must have zero mean".into()));
    }
    let hash = cfg.hash();
    let series = with_workers(cfg.workers, || {
        criteria::simulate_run(&params, &modes, &run, cfg.seed, cfg.run.max_events)
    })?;
    save_series(&cfg.out_dir, &format!("field_n{}", params.n()), &series, &hash)?;
    let mut report = StatReport::new("field", &hash);
    let summary = criteria::field_checks(&series, &modes, cfg.a, cfg.run.resamples, cfg.seed, &cfg.tolerances, &mut report)?;
    json_out(
        &cfg.out_dir,
        "field.json",
        &FieldArtifact {
            config_hash: &hash,
            summary: &summary,
        },
    )?;
    finish(report, cfg, start)
}

/// `report`: merge the per-command reports of `dir`.
pub fn report_command(dir: &Path, force: bool) -> Result<StatReport, HarnessError> {
    let merged = merge_reports(dir, force)?;
    merged.save(&dir.join(MERGED_REPORT))?;
    Ok(merged)
}

#[derive(Serialize)]
struct MainArtifact<'a> {
    config_hash: &'a str,
    ks: &'a [KsEstimate],
    projection: &'a [ProjectionEstimate],
}

/// Every acceptance criterion, in order of cost. `progress` sees each
/// criterion's partial report as soon as it is done.
pub fn run_suite(cfg: &ExperimentConfig, progress: &mut dyn FnMut(u8, &StatReport)) -> Result<StatReport, HarnessError> {
    cfg.validate()?;
    let start = Instant::now();
    let hash = cfg.hash();
    let dir = &cfg.out_dir;
    let tol = &cfg.tolerances;
    let s = &cfg.suite;
    cfg.save(&dir.join("config.json"))?;
    let mut report = StatReport::new("suite", &hash);
    let mut done = |c: u8, part: StatReport, report: &mut StatReport| {
        progress(c, &part);
        report.extend(part);
    };

    let (part, degenerate) = criteria::degenerate_tilt(s.degenerate_n, cfg.a, tol)?;
    write_exact(dir, &hash, &degenerate)?;
    done(2, part, &mut report);
    done(3, criteria::detailed_balance(&s.detailed_balance_n, &s.theta_grid, tol)?, &mut report);
    done(4, criteria::w_property_grid(&s.w_n, &s.theta_grid, s.w_grid_points, tol)?, &mut report);

    let (lo, hi) = s.miclo_log2_n;
    done(5, with_workers(cfg.workers, || criteria::miclo_scaling(&s.theta_grid, s.miclo_log2_n, tol))?, &mut report);
    done(6, with_workers(cfg.workers, || criteria::spectral_gap_order(0.0, s.gap_log2_n, tol))?, &mut report);
    let mut bd_rows = Vec::new();
    for &theta in &s.theta_grid {
        for j in lo..=hi {
            bd_rows.push(summarize(1 << j, theta).context("birth-death summary")?);
        }
    }
    write_bd(dir, &hash, &bd_rows)?;

    let (part, law) = criteria::limit_numerics(tol)?;
    write_limit(dir, &hash, &law)?;
    done(7, part, &mut report);
    done(8, criteria::bd_variance_limit(s.bd_variance_n, &s.theta_grid, tol)?, &mut report);
    done(13, criteria::lsi_probe_tracking(&s.lsi_n, cfg.a, s.lsi_densities, criterion_seed(cfg.seed, 13), tol)?, &mut report);
    done(14, criteria::stirling(s.stirling_n, tol)?, &mut report);

    let (part, sde) = with_workers(cfg.workers, || {
        criteria::sde_invariance(&s.theta_grid, cfg.a, s.sde_time, s.sde_dt, s.sde_paths, criterion_seed(cfg.seed, 12), tol)
    })?;
    json_out(
        dir,
        "sde.json",
        &SdeArtifact {
            config_hash: &hash,
            a: cfg.a,
            t: s.sde_time,
            dt: s.sde_dt,
            paths: s.sde_paths,
            results: &sde,
        },
    )?;
    done(12, part, &mut report);

    let oracle_params = model_params(s.oracle.n, 0.0, cfg.a)?;
    let oracle = with_workers(cfg.workers, || {
        criteria::oracle_equivalence(&oracle_params, &s.oracle, criterion_seed(cfg.seed, 1), s.max_events, tol)
    })?;
    save_series(dir, &format!("oracle_n{}", s.oracle.n), &oracle.series, &hash)?;
    done(1, oracle.report, &mut report);

    let field = with_workers(cfg.workers, || {
        criteria::field_covariance(
            &s.field_run,
            &s.field_wavenumbers,
            cfg.a,
            criterion_seed(cfg.seed, 10),
            s.resamples,
            s.max_events,
            tol,
        )
    })?;
    save_series(dir, &format!("field_n{}", s.field_run.n), &field.series, &hash)?;
    json_out(
        dir,
        "field.json",
        &FieldArtifact {
            config_hash: &hash,
            summary: &field.summary,
        },
    )?;
    done(10, field.report, &mut report);

    let main = with_workers(cfg.workers, || {
        criteria::main_theorem_trend(&s.main_runs, cfg.a, criterion_seed(cfg.seed, 9), s.resamples, s.max_events, tol)
    })?;
    for series in &main.series {
        save_series(dir, &format!("main_n{}", series[0].params.n()), series, &hash)?;
    }
    done(9, main.report, &mut report);
    let (part, projection) = criteria::projection_scaling(&main.series, s.resamples, criterion_seed(cfg.seed, 11), tol)?;
    json_out(
        dir,
        "main.json",
        &MainArtifact {
            config_hash: &hash,
            ks: &main.ks,
            projection: &projection,
        },
    )?;
    done(11, part, &mut report);

    report.runtime_secs = start.elapsed().as_secs_f64();
    report.save(&dir.join(MERGED_REPORT))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_labels_parse() {
        assert_eq!(parse_mode(16, "cos2").unwrap().label(), "cos2");
        assert_eq!(parse_mode(16, "sin1").unwrap().label(), "sin1");
        assert_eq!(parse_mode(16, "const").unwrap().label(), "const");
        assert!(parse_mode(16, "tan1").is_err());
        assert!(parse_mode(16, "cos").is_err());
        assert!(parse_mode(16, "cos9").is_err());
    }
}
