use critfluct::exact::{self, build_generator, law_of_magnetization, solve_dense, solve_power_iteration};
use critfluct::harness::config::LatticeRun;
use critfluct::harness::criteria::{empirical_level_pmf, simulate_run};
use critfluct::harness::stats::total_variation;
use critfluct::lattice::{run_stationary_direct, SimulationSchedule};
use critfluct::ModelParams;

#[test]
fn poissonized_driver_matches_exact_law_at_n10() {
    let params = ModelParams::new(10, 0.0, 0.1).unwrap();
    let run = LatticeRun {
        n: 10,
        replicas: 2,
        burn_in: 50.0,
        samples: 40_000,
        sample_interval: 16.0,
    };
    let series = simulate_run(&params, &[], &run, 11, 1e12).unwrap();
    let exact_law = law_of_magnetization(&exact::solve(&params).unwrap());
    let tv = total_variation(&empirical_level_pmf(&series), &exact_law.pmf);
    assert!(tv < 0.015, "tv = {tv}");
}

#[test]
fn direct_driver_matches_exact_law_at_n6() {
    let params = ModelParams::new(6, 1.0, 0.5).unwrap();
    let schedule = SimulationSchedule {
        burn_in_time: 5.0,
        sample_interval: 2.0,
        sample_count: 20_000,
        seed: 5,
        replica_id: 0,
    };
    let series = run_stationary_direct(&params, &[], &schedule, 1e11).unwrap();
    let exact_law = law_of_magnetization(&exact::solve(&params).unwrap());
    let tv = total_variation(&empirical_level_pmf(&[series]), &exact_law.pmf);
    assert!(tv < 0.02, "tv = {tv}");
}

#[test]
fn power_iteration_agrees_with_dense_at_n8() {
    let params = ModelParams::new(8, 0.7, 1.0).unwrap();
    let q = build_generator(&params).unwrap();
    let dense = solve_dense(&q).unwrap();
    let (power, _) = solve_power_iteration(&q, 1e-13, 5_000_000).unwrap();
    let diff = dense.iter().zip(&power).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-9, "max diff {diff}");
}
