use critfluct::harness::stats::integrated_autocorrelation_time;
use critfluct::lattice::{run_stationary, SimulationSchedule};
use critfluct::ModelParams;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(64, |s| s.parse().unwrap());
    let samples: usize = args.get(2).map_or(2000, |s| s.parse().unwrap());
    let interval: f64 = args.get(3).map_or(0.5 * (n as f64).sqrt(), |s| s.parse().unwrap());
    let p = ModelParams::new(n, 0.0, 0.1).unwrap();
    let mut s = SimulationSchedule::default_for(&p, samples, 1);
    s.sample_interval = interval;
    let series = run_stationary(&p, &[], &s, 1e15).unwrap();
    let y = series.magnetizations();
    let tau = integrated_autocorrelation_time(&y);
    let y2: f64 = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    println!(
        "n={n} events={:.3e} wall={:.2}s rate={:.3e}/s tau={tau:.1} samples (x{interval}) E[Y^2]={y2:.4}",
        series.events.total() as f64,
        series.wall_time_secs,
        series.events.total() as f64 / series.wall_time_secs,
    );
}
