//! Exact continuous-time simulation of the exclusion + Glauber process
//! generated by `n^2 L_ex + a L_G` on the discrete torus.
//!
//! Two drivers share one [`Configuration`]:
//!
//! * [`kmc_step`] performs one event of the uniformized chain: exponential
//!   clock at rate `n^3 + a n (1 + gamma)^2`, then either a swap on a uniform
//!   bond or a thinned flip proposal at a uniform site.
//! * [`Simulator`] runs the same process in Poissonized form. Flip proposals
//!   arrive at rate `a n (1 + gamma)^2`; between consecutive proposals (and
//!   sample times) the number of swaps on the ring is Poisson with mean
//!   `n^3` times the elapsed time. This is the same law, with one Poisson
//!   draw replacing the per-event clocks of the swap channel.
//!
//! Random draws of the Poissonized driver are consumed in a fixed order:
//! proposal gap (exponential), swap count (Poisson) for each sub-interval,
//! swap bonds (two 32-bit halves of a word each), proposal site, acceptance
//! uniform.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::TestFunction;
use crate::potentials::ModelParams;
use crate::streams::{bounded_u32, stream_rng, StreamRng};

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("projected event count {projected:.3e} exceeds the budget {budget:.3e}")]
    BudgetExceeded { projected: f64, budget: f64 },
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("test function has {got} samples, lattice has {expected} sites")]
    LengthMismatch { expected: usize, got: usize },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Events between full recomputations of the mode coordinates.
pub const MODE_REFRESH_EVENTS: u64 = 100_000_000;
const SUM_CHECK_EVENTS: u64 = 1_000_000;

/// Occupancy on the torus with incrementally maintained observables.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    occupancy: Vec<u8>,
    sum_eta: i64,
    mode_samples: Vec<Vec<f64>>,
    mode_coords: Vec<f64>,
}

impl Configuration {
    pub fn from_occupancy(occupancy: Vec<u8>, modes: &[TestFunction]) -> Result<Self, LatticeError> {
        let n = occupancy.len();
        let mut mode_samples = Vec::with_capacity(modes.len());
        for m in modes {
            if m.samples.len() != n {
                return Err(LatticeError::LengthMismatch {
                    expected: n,
                    got: m.samples.len(),
                });
            }
            mode_samples.push(m.samples.clone());
        }
        assert!(occupancy.iter().all(|&v| v <= 1), "occupancy must be 0/1");
        let mut c = Self {
            sum_eta: occupancy.iter().map(|&v| v as i64).sum(),
            occupancy,
            mode_coords: vec![0.0; mode_samples.len()],
            mode_samples,
        };
        c.refresh();
        Ok(c)
    }

    /// Product Bernoulli(1/2) configuration.
    pub fn random<R: Rng + ?Sized>(n: usize, modes: &[TestFunction], rng: &mut R) -> Result<Self, LatticeError> {
        let mut occ = Vec::with_capacity(n);
        while occ.len() < n {
            let word = rng.next_u64();
            for b in 0..64 {
                if occ.len() == n {
                    break;
                }
                occ.push(((word >> b) & 1) as u8);
            }
        }
        Self::from_occupancy(occ, modes)
    }

    pub fn n(&self) -> usize {
        self.occupancy.len()
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }

    pub fn sum_eta(&self) -> i64 {
        self.sum_eta
    }

    /// `sum_x (eta(x) - 1/2)`.
    pub fn centered_sum(&self) -> f64 {
        self.sum_eta as f64 - 0.5 * self.n() as f64
    }

    /// Rescaled magnetization `n^{-3/4} sum_x (eta(x) - 1/2)`.
    pub fn magnetization(&self) -> f64 {
        self.centered_sum() / (self.n() as f64).powf(0.75)
    }

    /// Running `sum_x H_k(x/n)(eta(x) - 1/2)` for each registered mode.
    pub fn mode_coords(&self) -> &[f64] {
        &self.mode_coords
    }

    /// `y^n(H_k) = n^{-1/2} sum_x H_k(x/n)(eta(x) - 1/2)`.
    pub fn mode_fields(&self) -> Vec<f64> {
        let s = (self.n() as f64).sqrt();
        self.mode_coords.iter().map(|c| c / s).collect()
    }

    #[inline]
    pub fn spin(&self, x: usize) -> f64 {
        2.0 * self.occupancy[x] as f64 - 1.0
    }

    #[inline]
    fn left(&self, x: usize) -> usize {
        if x == 0 {
            self.n() - 1
        } else {
            x - 1
        }
    }

    #[inline]
    fn right(&self, x: usize) -> usize {
        if x + 1 == self.n() {
            0
        } else {
            x + 1
        }
    }

    /// Flip site `x`, updating all observables.
    pub fn flip(&mut self, x: usize) {
        let new = 1 - self.occupancy[x];
        self.occupancy[x] = new;
        let delta = if new == 1 { 1.0 } else { -1.0 };
        self.sum_eta += if new == 1 { 1 } else { -1 };
        for (c, h) in self.mode_coords.iter_mut().zip(&self.mode_samples) {
            *c += delta * h[x];
        }
    }

    /// Exchange the occupancies of bond `(x, x+1)`; returns whether the state changed.
    pub fn swap(&mut self, x: usize) -> bool {
        let y = self.right(x);
        let (ex, ey) = (self.occupancy[x], self.occupancy[y]);
        if ex == ey {
            return false;
        }
        self.occupancy[x] = ey;
        self.occupancy[y] = ex;
        let diff = ey as f64 - ex as f64;
        for (c, h) in self.mode_coords.iter_mut().zip(&self.mode_samples) {
            *c += (h[x] - h[y]) * diff;
        }
        true
    }

    /// `count` swaps on uniform bonds without touching the mode coordinates;
    /// callers must [`refresh`](Self::refresh) before reading them.
    fn stir<R: RngCore + ?Sized>(&mut self, mut count: u64, rng: &mut R) {
        let n = self.occupancy.len();
        let n32 = n as u32;
        let occ = self.occupancy.as_mut_slice();
        while count > 0 {
            let word = rng.next_u64();
            for bits in [word as u32, (word >> 32) as u32] {
                if count == 0 {
                    break;
                }
                if let Some(x) = bounded_u32(bits, n32) {
                    let x = x as usize;
                    let y = if x + 1 == n { 0 } else { x + 1 };
                    occ.swap(x, y);
                    count -= 1;
                }
            }
        }
    }

    /// Recompute sums and mode coordinates from the occupancy.
    pub fn refresh(&mut self) {
        self.sum_eta = self.occupancy.iter().map(|&v| v as i64).sum();
        self.mode_coords = self.recomputed_modes();
    }

    pub fn recomputed_sum(&self) -> i64 {
        self.occupancy.iter().map(|&v| v as i64).sum()
    }

    pub fn recomputed_modes(&self) -> Vec<f64> {
        self.mode_samples
            .iter()
            .map(|h| {
                h.iter()
                    .zip(&self.occupancy)
                    .map(|(hx, &e)| hx * (e as f64 - 0.5))
                    .sum()
            })
            .collect()
    }
}

/// Glauber flip rate `c_x = (1 - g s(x) s(x-1))(1 - g s(x) s(x+1))`.
pub fn glauber_rate(config: &Configuration, x: usize, gamma: f64) -> f64 {
    let s = config.spin(x);
    let sl = config.spin(config.left(x));
    let sr = config.spin(config.right(x));
    (1.0 - gamma * s * sl) * (1.0 - gamma * s * sr)
}

/// Channel rates of the uniformized chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRates {
    /// `n^3`: n bonds at rate `n^2`.
    pub exchange: f64,
    /// `a n (1 + gamma)^2`: bound on the total flip rate.
    pub flip_bound: f64,
}

impl EventRates {
    pub fn of(params: &ModelParams) -> Self {
        let n = params.n() as f64;
        let g = params.gamma_glauber();
        Self {
            exchange: n * n * n,
            flip_bound: params.a() * n * (1.0 + g) * (1.0 + g),
        }
    }

    pub fn total(&self) -> f64 {
        self.exchange + self.flip_bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Swap { bond: usize, changed: bool },
    Flip { site: usize },
    RejectedFlip { site: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub waiting_time: f64,
    pub event: Event,
}

fn uniform_index<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    loop {
        if let Some(x) = bounded_u32(rng.next_u32(), n as u32) {
            return x as usize;
        }
    }
}

/// One transition of the uniformized chain, applied in place.
///
/// Draw order: exponential clock, channel uniform, bond or site index,
/// acceptance uniform (flips only).
pub fn kmc_step<R: Rng + ?Sized>(config: &mut Configuration, params: &ModelParams, rng: &mut R) -> Step {
    let rates = EventRates::of(params);
    let total = rates.total();
    let waiting_time = -(1.0 - rng.random::<f64>()).ln() / total;
    let channel: f64 = rng.random();
    let n = config.n();
    let event = if channel * total < rates.exchange {
        let bond = uniform_index(rng, n);
        let changed = config.swap(bond);
        Event::Swap { bond, changed }
    } else {
        let site = uniform_index(rng, n);
        let g = params.gamma_glauber();
        let accept = glauber_rate(config, site, g) / ((1.0 + g) * (1.0 + g));
        if rng.random::<f64>() < accept {
            config.flip(site);
            Event::Flip { site }
        } else {
            Event::RejectedFlip { site }
        }
    };
    Step { waiting_time, event }
}

/// Burn-in, sampling grid and stream identity of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSchedule {
    pub burn_in_time: f64,
    pub sample_interval: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub replica_id: u64,
}

impl SimulationSchedule {
    /// Burn-in `10 sqrt(n)` and spacing `sqrt(n) / 2` in generator time.
    pub fn default_for(params: &ModelParams, sample_count: usize, seed: u64) -> Self {
        let s = params.sqrt_n();
        Self {
            burn_in_time: 10.0 * s,
            sample_interval: 0.5 * s,
            sample_count,
            seed,
            replica_id: 0,
        }
    }

    pub fn with_replica(mut self, replica_id: u64) -> Self {
        self.replica_id = replica_id;
        self
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if !(self.burn_in_time >= 0.0 && self.burn_in_time.is_finite()) {
            return Err(LatticeError::Schedule(format!("burn_in_time = {}", self.burn_in_time)));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(LatticeError::Schedule(format!("sample_interval = {}", self.sample_interval)));
        }
        if self.sample_count == 0 {
            return Err(LatticeError::Schedule("sample_count = 0".into()));
        }
        Ok(())
    }

    pub fn end_time(&self) -> f64 {
        self.burn_in_time + self.sample_interval * (self.sample_count - 1) as f64
    }

    pub fn sample_time(&self, i: usize) -> f64 {
        self.burn_in_time + self.sample_interval * i as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EventCounts {
    pub swaps: u64,
    pub flip_proposals: u64,
    pub flips: u64,
}

impl EventCounts {
    pub fn total(&self) -> u64 {
        self.swaps + self.flip_proposals
    }

    fn merge(&mut self, o: &EventCounts) {
        self.swaps += o.swaps;
        self.flip_proposals += o.flip_proposals;
        self.flips += o.flips;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub time: f64,
    /// Rescaled magnetization `n^{-3/4} sum (eta - 1/2)`.
    pub magnetization: f64,
    /// `y^n(H_k)` for each registered test function.
    pub modes: Vec<f64>,
}

/// Time-stamped observables of one stationary run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSeries {
    pub params: ModelParams,
    pub schedule: SimulationSchedule,
    pub mode_labels: Vec<String>,
    pub rows: Vec<SampleRow>,
    pub events: EventCounts,
    pub wall_time_secs: f64,
}

#[derive(Serialize)]
struct SeriesMetadata<'a> {
    params: &'a ModelParams,
    schedule: &'a SimulationSchedule,
    mode_labels: &'a [String],
    events: &'a EventCounts,
    wall_time_secs: f64,
    config_hash: Option<&'a str>,
}

impl SampleSeries {
    pub fn magnetizations(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.magnetization).collect()
    }

    pub fn mode_column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.modes[k]).collect()
    }

    /// RFC-4180 CSV with header `time,Y,mode_1,...,mode_K`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "time,Y")?;
        for k in 0..self.mode_labels.len() {
            write!(w, ",mode_{}", k + 1)?;
        }
        write!(w, "\r\n")?;
        for r in &self.rows {
            write!(w, "{},{}", r.time, r.magnetization)?;
            for v in &r.modes {
                write!(w, ",{v}")?;
            }
            write!(w, "\r\n")?;
        }
        Ok(())
    }

    /// Writes `<stem>.csv` and the `<stem>.json` metadata sidecar.
    pub fn save(&self, dir: &Path, stem: &str, config_hash: Option<&str>) -> Result<(), LatticeError> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.csv")))?);
        self.write_csv(&mut f)?;
        f.flush()?;
        let meta = SeriesMetadata {
            params: &self.params,
            schedule: &self.schedule,
            mode_labels: &self.mode_labels,
            events: &self.events,
            wall_time_secs: self.wall_time_secs,
            config_hash,
        };
        let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        Ok(())
    }
}

/// Poissonized exact driver.
pub struct Simulator {
    params: ModelParams,
    rates: EventRates,
    config: Configuration,
    time: f64,
    next_proposal: f64,
    rng: StreamRng,
    counts: EventCounts,
    since_check: u64,
}

impl Simulator {
    pub fn new(params: ModelParams, config: Configuration, mut rng: StreamRng) -> Self {
        let rates = EventRates::of(&params);
        let first = Exp::new(rates.flip_bound).expect("positive rate").sample(&mut rng);
        Self {
            params,
            rates,
            config,
            time: 0.0,
            next_proposal: first,
            rng,
            counts: EventCounts::default(),
            since_check: 0,
        }
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn counts(&self) -> EventCounts {
        self.counts
    }

    fn stir_for(&mut self, duration: f64) {
        let mean = self.rates.exchange * duration;
        if mean <= 0.0 {
            return;
        }
        let k = Poisson::new(mean).expect("finite positive mean").sample(&mut self.rng) as u64;
        self.config.stir(k, &mut self.rng);
        self.counts.swaps += k;
        self.since_check += k;
    }

    /// Advance the process to time `target`, processing every event before it.
    pub fn advance_to(&mut self, target: f64) {
        let g = self.params.gamma_glauber();
        let bound = (1.0 + g) * (1.0 + g);
        let gap = Exp::new(self.rates.flip_bound).expect("positive rate");
        let n = self.config.n();
        while self.next_proposal <= target {
            self.stir_for(self.next_proposal - self.time);
            self.time = self.next_proposal;
            let site = uniform_index(&mut self.rng, n);
            let accept = glauber_rate(&self.config, site, g) / bound;
            self.counts.flip_proposals += 1;
            if self.rng.random::<f64>() < accept {
                self.config.flip_tracked_sum(site);
                self.counts.flips += 1;
            }
            self.since_check += 1;
            if self.since_check >= SUM_CHECK_EVENTS {
                debug_assert_eq!(self.config.sum_eta, self.config.recomputed_sum());
                self.since_check = 0;
            }
            self.next_proposal = self.time + gap.sample(&mut self.rng);
        }
        self.stir_for(target - self.time);
        self.time = target;
    }

    /// Observables at the current time; mode coordinates are recomputed.
    pub fn observe(&mut self) -> SampleRow {
        self.config.mode_coords = self.config.recomputed_modes();
        SampleRow {
            time: self.time,
            magnetization: self.config.magnetization(),
            modes: self.config.mode_fields(),
        }
    }
}

impl Configuration {
    /// Flip that keeps `sum_eta` current but defers mode updates to the next refresh.
    fn flip_tracked_sum(&mut self, x: usize) {
        let new = 1 - self.occupancy[x];
        self.occupancy[x] = new;
        self.sum_eta += if new == 1 { 1 } else { -1 };
    }
}

fn projected_events(params: &ModelParams, schedule: &SimulationSchedule) -> f64 {
    EventRates::of(params).total() * schedule.end_time()
}

fn check_budget(params: &ModelParams, schedule: &SimulationSchedule, max_events: f64) -> Result<(), LatticeError> {
    let projected = projected_events(params, schedule);
    if projected > max_events {
        return Err(LatticeError::BudgetExceeded {
            projected,
            budget: max_events,
        });
    }
    Ok(())
}

/// Stationary run with the Poissonized driver, starting from product Bernoulli(1/2).
///
/// Deterministic in `(params, modes, schedule)`; the stream is
/// `(schedule.seed, schedule.replica_id)`.
pub fn run_stationary(
    params: &ModelParams,
    modes: &[TestFunction],
    schedule: &SimulationSchedule,
    max_events: f64,
) -> Result<SampleSeries, LatticeError> {
    schedule.validate()?;
    check_budget(params, schedule, max_events)?;
    let start = Instant::now();
    let mut rng = stream_rng(schedule.seed, schedule.replica_id);
    let config = Configuration::random(params.n(), modes, &mut rng)?;
    let mut sim = Simulator::new(*params, config, rng);
    let mut rows = Vec::with_capacity(schedule.sample_count);
    for i in 0..schedule.sample_count {
        sim.advance_to(schedule.sample_time(i));
        rows.push(sim.observe());
    }
    Ok(SampleSeries {
        params: *params,
        schedule: *schedule,
        mode_labels: modes.iter().map(|m| m.label()).collect(),
        rows,
        events: sim.counts(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Stationary run driven event-by-event through [`kmc_step`], with
/// incremental observables and periodic full refresh.
pub fn run_stationary_direct(
    params: &ModelParams,
    modes: &[TestFunction],
    schedule: &SimulationSchedule,
    max_events: f64,
) -> Result<SampleSeries, LatticeError> {
    schedule.validate()?;
    check_budget(params, schedule, max_events)?;
    let start = Instant::now();
    let mut rng = stream_rng(schedule.seed, schedule.replica_id);
    let mut config = Configuration::random(params.n(), modes, &mut rng)?;
    let mut counts = EventCounts::default();
    let mut time = 0.0;
    let mut rows = Vec::with_capacity(schedule.sample_count);
    let mut since_refresh = 0u64;
    let mut prev_sum;
    let mut prev_modes = vec![0.0; modes.len()];
    let n = params.n() as f64;
    let mut next = 0usize;
    while next < schedule.sample_count {
        prev_sum = config.centered_sum();
        prev_modes.copy_from_slice(config.mode_coords());
        let step = kmc_step(&mut config, params, &mut rng);
        let t_new = time + step.waiting_time;
        // Samples falling before the event see the pre-event state.
        while next < schedule.sample_count && schedule.sample_time(next) < t_new {
            rows.push(SampleRow {
                time: schedule.sample_time(next),
                magnetization: prev_sum / n.powf(0.75),
                modes: prev_modes.iter().map(|c| c / n.sqrt()).collect(),
            });
            next += 1;
        }
        time = t_new;
        match step.event {
            Event::Swap { .. } => counts.swaps += 1,
            Event::Flip { .. } => {
                counts.flip_proposals += 1;
                counts.flips += 1;
            }
            Event::RejectedFlip { .. } => counts.flip_proposals += 1,
        }
        since_refresh += 1;
        if since_refresh >= MODE_REFRESH_EVENTS {
            config.refresh();
            since_refresh = 0;
        }
        if counts.total() % SUM_CHECK_EVENTS == 0 {
            debug_assert_eq!(config.sum_eta(), config.recomputed_sum());
        }
    }
    Ok(SampleSeries {
        params: *params,
        schedule: *schedule,
        mode_labels: modes.iter().map(|m| m.label()).collect(),
        rows,
        events: counts,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Independent replicas `0..replicas` of the same schedule, run in parallel.
pub fn run_replicas(
    params: &ModelParams,
    modes: &[TestFunction],
    schedule: &SimulationSchedule,
    replicas: usize,
    max_events: f64,
) -> Result<Vec<SampleSeries>, LatticeError> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| run_stationary(params, modes, &schedule.with_replica(r), max_events))
        .collect()
}

/// Aggregate event counts over replicas.
pub fn total_events(series: &[SampleSeries]) -> EventCounts {
    let mut c = EventCounts::default();
    for s in series {
        c.merge(&s.events);
    }
    c
}

/// `(y, Y)` with `y = n^{-1/2} sum H(x/n)(eta(x) - 1/2)` and `Y = n^{-1/4} y`.
pub fn field_projection(config: &Configuration, h_samples: &[f64]) -> Result<(f64, f64), LatticeError> {
    let n = config.n();
    if h_samples.len() != n {
        return Err(LatticeError::LengthMismatch {
            expected: n,
            got: h_samples.len(),
        });
    }
    let s: f64 = h_samples
        .iter()
        .zip(config.occupancy())
        .map(|(h, &e)| h * (e as f64 - 0.5))
        .sum();
    let nf = n as f64;
    Ok((s / nf.sqrt(), s / nf.powf(0.75)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TestFunction;
    use rand::SeedableRng;

    fn cfg(bits: &[u8]) -> Configuration {
        Configuration::from_occupancy(bits.to_vec(), &[]).unwrap()
    }

    #[test]
    fn glauber_rate_examples() {
        let all_up = cfg(&[1, 1, 1, 1]);
        assert_eq!(glauber_rate(&all_up, 2, 0.5), 0.25);
        let c = cfg(&[0, 1, 0, 1, 1]);
        for x in 0..5 {
            assert_eq!(glauber_rate(&c, x, 0.0), 1.0);
        }
        let iso = cfg(&[0, 1, 0, 0]);
        assert_eq!(glauber_rate(&iso, 1, 0.5), 2.25);
    }

    #[test]
    fn glauber_factorized_matches_quadratic_form() {
        for pattern in 0..8u8 {
            let bits = [(pattern >> 2) & 1, (pattern >> 1) & 1, pattern & 1];
            let c = cfg(&[bits[0], bits[1], bits[2], 0, 1]);
            let (sl, s, sr) = (c.spin(0), c.spin(1), c.spin(2));
            for i in 0..=20 {
                let g = i as f64 / 20.0;
                let quad = 1.0 - g * s * (sl + sr) + g * g * sl * sr;
                assert!((glauber_rate(&c, 1, g) - quad).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn total_rate_example() {
        let p = ModelParams::new(4, 0.5, 0.1).unwrap();
        assert_eq!(p.gamma_glauber(), 0.375);
        let r = EventRates::of(&p);
        assert!((r.total() - 64.75625).abs() < 1e-12);
    }

    #[test]
    fn no_op_swap_leaves_everything() {
        let modes = vec![TestFunction::cosine(6, 1).unwrap()];
        let mut c = Configuration::from_occupancy(vec![1, 1, 0, 0, 1, 0], &modes).unwrap();
        let before = c.clone();
        assert!(!c.swap(0));
        assert_eq!(c, before);
        assert!(c.swap(1));
        assert_eq!(c.sum_eta(), before.sum_eta());
    }

    #[test]
    fn flips_always_accepted_at_zero_tilt() {
        let p = ModelParams::untilted(6, 1.0).unwrap();
        let mut rng = StreamRng::seed_from_u64(3);
        let mut c = Configuration::random(6, &[], &mut rng).unwrap();
        for _ in 0..20_000 {
            let s = kmc_step(&mut c, &p, &mut rng);
            assert!(!matches!(s.event, Event::RejectedFlip { .. }));
        }
    }

    #[test]
    fn incremental_observables_match_recomputation() {
        let n = 32;
        let p = ModelParams::new(n, 0.5, 0.5).unwrap();
        let modes: Vec<_> = (1..=3)
            .map(|k| TestFunction::cosine(n, k).unwrap())
            .chain([TestFunction::sine(n, 2).unwrap(), TestFunction::constant(n)])
            .collect();
        let mut rng = StreamRng::seed_from_u64(11);
        let mut c = Configuration::random(n, &modes, &mut rng).unwrap();
        for _ in 0..200_000 {
            let before = c.sum_eta();
            let s = kmc_step(&mut c, &p, &mut rng);
            match s.event {
                Event::Swap { .. } | Event::RejectedFlip { .. } => assert_eq!(c.sum_eta(), before),
                Event::Flip { .. } => assert_eq!((c.sum_eta() - before).abs(), 1),
            }
        }
        assert_eq!(c.sum_eta(), c.recomputed_sum());
        for (a, b) in c.mode_coords().iter().zip(c.recomputed_modes()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn field_projection_examples() {
        let c = cfg(&[1; 16]);
        let (y, big_y) = field_projection(&c, &[1.0; 16]).unwrap();
        assert!((y - 2.0).abs() < 1e-15);
        assert!((big_y / y - 16f64.powf(-0.25)).abs() < 1e-15);
        let h = TestFunction::cosine(16, 1).unwrap();
        let (y0, _) = field_projection(&c, &h.samples).unwrap();
        assert!(y0.abs() < 1e-12);
        assert!(field_projection(&c, &[1.0; 3]).is_err());
    }

    #[test]
    fn schedule_validation_and_budget() {
        let p = ModelParams::new(8, 0.0, 0.1).unwrap();
        let mut s = SimulationSchedule::default_for(&p, 10, 1);
        s.sample_interval = 0.0;
        assert!(run_stationary(&p, &[], &s, 1e12).is_err());
        let s = SimulationSchedule::default_for(&p, 10, 1);
        assert!(matches!(
            run_stationary(&p, &[], &s, 10.0),
            Err(LatticeError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn runs_are_deterministic_and_sized() {
        let p = ModelParams::new(16, 0.0, 0.1).unwrap();
        let modes = vec![TestFunction::cosine(16, 1).unwrap()];
        let s = SimulationSchedule::default_for(&p, 50, 99).with_replica(3);
        let a = run_stationary(&p, &modes, &s, 1e12).unwrap();
        let b = run_stationary(&p, &modes, &s, 1e12).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 50);
        assert!(a.rows.windows(2).all(|w| w[1].time > w[0].time));
        let c = run_stationary(&p, &modes, &s.with_replica(4), 1e12).unwrap();
        assert_ne!(a.rows, c.rows);
        let d = run_stationary_direct(&p, &modes, &SimulationSchedule { sample_count: 5, ..s }, 1e12).unwrap();
        assert_eq!(d.rows.len(), 5);
    }

    #[test]
    fn csv_header_and_rows() {
        let p = ModelParams::new(8, 0.0, 0.1).unwrap();
        let modes = vec![TestFunction::cosine(8, 1).unwrap(), TestFunction::sine(8, 1).unwrap()];
        let s = SimulationSchedule::default_for(&p, 3, 5);
        let series = run_stationary(&p, &modes, &s, 1e12).unwrap();
        let mut buf = Vec::new();
        series.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.split("\r\n").collect();
        assert_eq!(lines[0], "time,Y,mode_1,mode_2");
        assert_eq!(lines.len(), 5);
    }
}
