use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use critfluct::harness::pipelines;
use critfluct::harness::{ExperimentConfig, StatReport};

#[derive(Parser)]
#[command(name = "critfluct", version, about = "Critical fluctuation experiments for a reaction-diffusion particle system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary lattice replicas; series CSV + JSON sidecars.
    Simulate(Common),
    /// Exact stationary law for n <= 14; exact.json.
    Exact(Common),
    /// Reduced birth-death chain constants; bd.csv.
    Birthdeath(Common),
    /// Tabulated quartic limit law; limit.csv.
    Limit(Common),
    /// Langevin invariance test; sde.json.
    Sde(Common),
    /// Fast-mode covariance against the Gaussian prediction; field.json.
    Field(Common),
    /// Merge the per-command reports of --out.
    Report(ReportArgs),
    /// Every acceptance criterion.
    #[command(name = "run_suite", alias = "run-suite", alias = "suite")]
    RunSuite(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config to start from (defaults are used otherwise).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Burn-in in generator time.
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Sampling interval in generator time.
    #[arg(long)]
    sample_interval: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated test functions, e.g. cos1,sin1,cos2.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    /// SDE horizon.
    #[arg(long)]
    t: Option<f64>,
    /// SDE step.
    #[arg(long)]
    dt: Option<f64>,
    /// SDE paths.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    max_events: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Emit the report as JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Merge even when files carry different config hashes.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    json: bool,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        let r = &mut cfg.run;
        if let Some(v) = self.n {
            r.n = v;
        }
        if let Some(v) = self.theta {
            r.theta = v;
        }
        if let Some(v) = self.replicas {
            r.replicas = v;
        }
        if let Some(v) = self.burn_in {
            r.burn_in = Some(v);
        }
        if let Some(v) = self.samples {
            r.samples = v;
        }
        if let Some(v) = self.sample_interval {
            r.sample_interval = Some(v);
        }
        if let Some(v) = &self.modes {
            r.modes = v.clone();
        }
        if let Some(v) = self.t {
            r.sde_time = v;
        }
        if let Some(v) = self.dt {
            r.sde_dt = v;
        }
        if let Some(v) = self.paths {
            r.sde_paths = v;
        }
        if let Some(v) = self.max_events {
            r.max_events = v;
            cfg.suite.max_events = v;
        }
        if let Some(v) = self.a {
            cfg.a = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_report(report: &StatReport, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
        return;
    }
    println!("{} (config {})", report.command, &report.config_hash[..report.config_hash.len().min(12)]);
    for e in &report.estimates {
        match e.ci {
            Some((lo, hi)) => println!("  {:<44} {:>14.6e}  [{lo:.6e}, {hi:.6e}]", e.name, e.value),
            None => println!("  {:<44} {:>14.6e}", e.name, e.value),
        }
    }
    for f in &report.flags {
        let mark = if f.passed { "PASS" } else { "FAIL" };
        println!("  {mark} [{:>2}] {:<44} {:>14.6e}  {}", f.criterion, f.name, f.value, f.condition);
    }
}

fn run(cli: Cli) -> Result<(StatReport, bool)> {
    let (report, json) = match cli.command {
        Command::Simulate(c) => (pipelines::simulate(&c.resolve()?)?, c.json),
        Command::Exact(c) => (pipelines::exact_command(&c.resolve()?)?, c.json),
        Command::Birthdeath(c) => (pipelines::birthdeath_command(&c.resolve()?)?, c.json),
        Command::Limit(c) => (pipelines::limit_command(&c.resolve()?)?, c.json),
        Command::Sde(c) => (pipelines::sde_command(&c.resolve()?)?, c.json),
        Command::Field(c) => (pipelines::field_command(&c.resolve()?)?, c.json),
        Command::Report(r) => (pipelines::report_command(&r.out, r.force)?, r.json),
        Command::RunSuite(c) => {
            let cfg = c.resolve()?;
            let quiet = c.json;
            let report = pipelines::run_suite(&cfg, &mut |criterion, part| {
                if !quiet {
                    let ok = part.all_passed();
                    eprintln!("criterion {criterion:>2}: {}", if ok { "pass" } else { "FAIL" });
                }
            })?;
            (report, c.json)
        }
    };
    Ok((report, json))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok((report, json)) => {
            print_report(&report, json);
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
