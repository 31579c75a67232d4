//! Exact stationary analysis on the full `2^n` state space for small `n`.
//!
//! States are bitmasks: bit `x` is the occupation of site `x`. The
//! reference measure `nu_U` weights a state by `exp(n U(mbar / n)) 2^{-n}`
//! with `mbar = sum (eta(x) - 1/2)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::birthdeath::BirthDeathChain;
use crate::numerics::log_sum_exp;
use crate::potentials::{eval_u, ModelError, ModelParams};
use crate::streams::stream_rng;

/// Largest lattice handled by the exact solver.
pub const MAX_SITES: usize = 14;
/// Above this many states the linear solve switches from dense LU to
/// iterative aggregation-disaggregation.
pub const DENSE_LIMIT: usize = 1024;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("n = {n} exceeds the exact-solver cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("stationary solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("singular linear system")]
    Singular,
    #[error("density is negative at state {0}")]
    NegativeDensity(usize),
    #[error("density integrates to {0}, expected 1")]
    NotNormalized(f64),
    #[error("vector has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[inline]
fn bit(state: u32, x: usize) -> u32 {
    (state >> x) & 1
}

#[inline]
fn spin(state: u32, x: usize) -> f64 {
    2.0 * bit(state, x) as f64 - 1.0
}

/// Glauber rate `c_x` of a bitmask state on `n` sites.
pub fn flip_rate(state: u32, x: usize, n: usize, gamma: f64) -> f64 {
    let s = spin(state, x);
    let l = spin(state, (x + n - 1) % n);
    let r = spin(state, (x + 1) % n);
    (1.0 - gamma * s * l) * (1.0 - gamma * s * r)
}

/// Generator `n^2 L_ex + a L_G` in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    pub n: usize,
    /// Row `i` occupies `offsets[i]..offsets[i + 1]` of `cols`/`rates`.
    pub offsets: Vec<usize>,
    pub cols: Vec<u32>,
    pub rates: Vec<f64>,
    /// Negative row sums.
    pub diag: Vec<f64>,
}

impl RateMatrix {
    pub fn states(&self) -> usize {
        self.diag.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().map(|&c| c as usize).zip(self.rates[r].iter().copied())
    }

    /// `(mu Q)_j` for every state `j`.
    pub fn left_apply(&self, mu: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = mu.iter().zip(&self.diag).map(|(m, d)| m * d).collect();
        for (i, &m) in mu.iter().enumerate() {
            for (j, r) in self.row(i) {
                out[j] += m * r;
            }
        }
        out
    }

    /// `max_j |(mu Q)_j|`.
    pub fn residual(&self, mu: &[f64]) -> f64 {
        self.left_apply(mu).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Incoming rates: row `j` of the transpose.
    fn transpose(&self) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
        let s = self.states();
        let mut counts = vec![0usize; s + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for i in 0..s {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0u32; self.cols.len()];
        let mut rates = vec![0.0; self.cols.len()];
        for i in 0..s {
            for (j, r) in self.row(i) {
                cols[fill[j]] = i as u32;
                rates[fill[j]] = r;
                fill[j] += 1;
            }
        }
        (counts, cols, rates)
    }
}

/// Rate matrix of the full process; duplicate transitions (only on two sites) are merged.
pub fn build_generator(params: &ModelParams) -> Result<RateMatrix, ExactError> {
    let n = params.n();
    if n > MAX_SITES {
        return Err(ExactError::TooLarge { n, cap: MAX_SITES });
    }
    let states = 1usize << n;
    let swap_rate = (n * n) as f64;
    let gamma = params.gamma_glauber();
    let a = params.a();
    let mut offsets = Vec::with_capacity(states + 1);
    let mut cols = Vec::with_capacity(states * 2 * n);
    let mut rates = Vec::with_capacity(states * 2 * n);
    let mut diag = Vec::with_capacity(states);
    offsets.push(0);
    let mut row: Vec<(u32, f64)> = Vec::with_capacity(2 * n);
    for s in 0..states as u32 {
        row.clear();
        let mut push = |t: u32, r: f64| match row.iter_mut().find(|e| e.0 == t) {
            Some(e) => e.1 += r,
            None => row.push((t, r)),
        };
        for x in 0..n {
            let y = (x + 1) % n;
            if bit(s, x) != bit(s, y) {
                push(s ^ ((1 << x) | (1 << y)), swap_rate);
            }
        }
        for x in 0..n {
            push(s ^ (1 << x), a * flip_rate(s, x, n, gamma));
        }
        let mut total = 0.0;
        for &(t, r) in row.iter() {
            if r > 0.0 {
                cols.push(t);
                rates.push(r);
                total += r;
            }
        }
        diag.push(-total);
        offsets.push(cols.len());
    }
    Ok(RateMatrix {
        n,
        offsets,
        cols,
        rates,
        diag,
    })
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Solve `mu Q = 0, sum mu = 1` by dense LU with the last balance equation
/// replaced by the normalization.
pub fn solve_dense(q: &RateMatrix) -> Result<Vec<f64>, ExactError> {
    let s = q.states();
    let mut a = DMatrix::<f64>::zeros(s, s);
    for i in 0..s {
        a[(i, i)] = q.diag[i];
        for (j, r) in q.row(i) {
            a[(j, i)] += r;
        }
    }
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(s);
    rhs[s - 1] = 1.0;
    let x = a.lu().solve(&rhs).ok_or(ExactError::Singular)?;
    let mut mu: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    normalize(&mut mu);
    Ok(mu)
}

/// Iterative aggregation-disaggregation over the magnetization levels.
///
/// Each cycle solves the aggregated birth-death chain on level masses
/// exactly, rescales within levels, then runs Gauss-Seidel sweeps on the
/// balance equations.
pub fn solve_aggregated(q: &RateMatrix, tol: f64, max_cycles: usize) -> Result<Vec<f64>, ExactError> {
    let n = q.n;
    let s = q.states();
    let level: Vec<usize> = (0..s as u32).map(|st| st.count_ones() as usize).collect();
    let (t_off, t_cols, t_rates) = q.transpose();
    let mut mu = vec![1.0 / s as f64; s];
    let mut residual = f64::INFINITY;
    for cycle in 0..max_cycles {
        let mut mass = vec![0.0; n + 1];
        let mut up = vec![0.0; n + 1];
        let mut down = vec![0.0; n + 1];
        for i in 0..s {
            mass[level[i]] += mu[i];
            for (j, r) in q.row(i) {
                if level[j] > level[i] {
                    up[level[i]] += mu[i] * r;
                } else if level[j] < level[i] {
                    down[level[i]] += mu[i] * r;
                }
            }
        }
        let mut log_p = vec![0.0; n + 1];
        for m in 0..n {
            log_p[m + 1] = log_p[m] + (up[m] / mass[m]).ln() - (down[m + 1] / mass[m + 1]).ln();
        }
        let z = log_sum_exp(&log_p);
        for i in 0..s {
            let m = level[i];
            mu[i] *= (log_p[m] - z).exp() / mass[m];
        }
        for _ in 0..4 {
            for j in 0..s {
                let inflow: f64 = (t_off[j]..t_off[j + 1])
                    .map(|k| mu[t_cols[k] as usize] * t_rates[k])
                    .sum();
                mu[j] = inflow / -q.diag[j];
            }
        }
        normalize(&mut mu);
        residual = q.residual(&mu);
        if residual < tol {
            return Ok(mu);
        }
        if cycle + 1 == max_cycles {
            break;
        }
    }
    Err(ExactError::NonConvergence {
        residual,
        iterations: max_cycles,
    })
}

/// Power iteration `mu <- mu (I + Q / L)` on the uniformized kernel.
pub fn solve_power_iteration(q: &RateMatrix, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize), ExactError> {
    let s = q.states();
    let lambda = 1.05 * q.diag.iter().fold(0.0f64, |m, d| m.max(-d));
    let mut mu = vec![1.0 / s as f64; s];
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let flow = q.left_apply(&mu);
        residual = flow.iter().fold(0.0, |m, v| m.max(v.abs()));
        if residual < tol {
            return Ok((mu, it));
        }
        for (m, f) in mu.iter_mut().zip(&flow) {
            *m += f / lambda;
        }
    }
    Err(ExactError::NonConvergence {
        residual,
        iterations: max_iter,
    })
}

/// Left null vector of `q`, normalized; dense for small state spaces.
pub fn stationary_distribution(q: &RateMatrix) -> Result<Vec<f64>, ExactError> {
    let mu = if q.states() <= DENSE_LIMIT {
        solve_dense(q)?
    } else {
        solve_aggregated(q, 1e-12, 20_000)?
    };
    let residual = q.residual(&mu);
    if residual > 1e-10 {
        return Err(ExactError::NonConvergence { residual, iterations: 0 });
    }
    Ok(mu)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactSolution {
    pub params: ModelParams,
    pub mu_ss: Vec<f64>,
    pub nu_u: Vec<f64>,
    /// `pi_n(m) = nu_U(level m)`.
    pub level_weights: Vec<f64>,
    pub residual: f64,
}

/// Reference measure `nu_U` over all states and its level weights.
pub fn reference_measure(params: &ModelParams) -> Result<(Vec<f64>, Vec<f64>), ExactError> {
    let n = params.n();
    if n > MAX_SITES {
        return Err(ExactError::TooLarge { n, cap: MAX_SITES });
    }
    let nf = n as f64;
    let gamma = params.gamma_glauber();
    let level_log: Vec<f64> = (0..=n)
        .map(|m| Ok(nf * eval_u((m as f64 - 0.5 * nf) / nf, gamma)?.value))
        .collect::<Result<_, ModelError>>()?;
    let logs: Vec<f64> = (0..1u32 << n).map(|s| level_log[s.count_ones() as usize]).collect();
    let z = log_sum_exp(&logs);
    let nu: Vec<f64> = logs.iter().map(|l| (l - z).exp()).collect();
    let mut levels = vec![0.0; n + 1];
    for (s, v) in nu.iter().enumerate() {
        levels[(s as u32).count_ones() as usize] += v;
    }
    Ok((nu, levels))
}

pub fn solve(params: &ModelParams) -> Result<ExactSolution, ExactError> {
    let q = build_generator(params)?;
    let mu_ss = stationary_distribution(&q)?;
    let (nu_u, level_weights) = reference_measure(params)?;
    Ok(ExactSolution {
        params: *params,
        residual: q.residual(&mu_ss),
        mu_ss,
        nu_u,
        level_weights,
    })
}

impl ExactSolution {
    pub fn n(&self) -> usize {
        self.params.n()
    }

    /// `f_ss = mu_ss / nu_U`.
    pub fn stationary_density(&self) -> Vec<f64> {
        self.mu_ss.iter().zip(&self.nu_u).map(|(m, v)| m / v).collect()
    }

    /// Level averages `<f>_m` under the uniform measure on each level.
    pub fn level_averages(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut sum = vec![0.0; n + 1];
        let mut count = vec![0.0; n + 1];
        for (s, v) in f.iter().enumerate() {
            let m = (s as u32).count_ones() as usize;
            sum[m] += v;
            count[m] += 1.0;
        }
        sum.iter().zip(&count).map(|(s, c)| s / c).collect()
    }

    fn check_density(&self, f: &[f64]) -> Result<(), ExactError> {
        if f.len() != self.nu_u.len() {
            return Err(ExactError::Length {
                expected: self.nu_u.len(),
                got: f.len(),
            });
        }
        if let Some(i) = f.iter().position(|&v| !(v >= 0.0)) {
            return Err(ExactError::NegativeDensity(i));
        }
        let total: f64 = f.iter().zip(&self.nu_u).map(|(a, b)| a * b).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(ExactError::NotNormalized(total));
        }
        Ok(())
    }
}

/// Exact law of `sum eta` under `mu_ss`, with the support of the rescaled
/// magnetization `(m - n/2) / n^{3/4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationLaw {
    pub pmf: Vec<f64>,
    pub support: Vec<f64>,
}

pub fn law_of_magnetization(solution: &ExactSolution) -> MagnetizationLaw {
    let n = solution.n();
    let mut pmf = vec![0.0; n + 1];
    for (s, p) in solution.mu_ss.iter().enumerate() {
        pmf[(s as u32).count_ones() as usize] += p;
    }
    let scale = (n as f64).powf(0.75);
    MagnetizationLaw {
        support: (0..=n).map(|m| (m as f64 - 0.5 * n as f64) / scale).collect(),
        pmf,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub entropy: f64,
    pub dirichlet_exchange: f64,
    pub dirichlet_glauber: f64,
    /// `n^2 D_ex + D_G`.
    pub dirichlet: f64,
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Relative entropy and Dirichlet forms of a density `f` with respect to `nu_U`.
pub fn functionals(f: &[f64], solution: &ExactSolution) -> Result<Functionals, ExactError> {
    solution.check_density(f)?;
    let n = solution.n();
    let gamma = solution.params.gamma_glauber();
    let nu = &solution.nu_u;
    let root: Vec<f64> = f.iter().map(|v| v.sqrt()).collect();
    let mut entropy = 0.0;
    let mut ex = 0.0;
    let mut gl = 0.0;
    for s in 0..f.len() {
        entropy += xlogx(f[s]) * nu[s];
        let st = s as u32;
        for x in 0..n {
            let y = (x + 1) % n;
            let t = (st ^ ((1 << x) | (1 << y))) as usize;
            let t = if bit(st, x) == bit(st, y) { s } else { t };
            ex += (root[t] - root[s]).powi(2) * nu[s];
            let t = (st ^ (1 << x)) as usize;
            gl += flip_rate(st, x, n, gamma) * (root[t] - root[s]).powi(2) * nu[s];
        }
    }
    let (ex, gl) = (0.5 * ex, 0.5 * gl);
    Ok(Functionals {
        entropy,
        dirichlet_exchange: ex,
        dirichlet_glauber: gl,
        dirichlet: (n * n) as f64 * ex + gl,
    })
}

/// Difference between the entropy and its decomposition over levels into
/// within-level entropies and the entropy of the level averages.
pub fn entropy_decomposition_check(f: &[f64], solution: &ExactSolution) -> Result<f64, ExactError> {
    let whole = functionals(f, solution)?.entropy;
    let n = solution.n();
    let avg = solution.level_averages(f);
    let mut within = vec![0.0; n + 1];
    let mut count = vec![0.0; n + 1];
    for (s, v) in f.iter().enumerate() {
        let m = (s as u32).count_ones() as usize;
        count[m] += 1.0;
        if avg[m] > 0.0 {
            within[m] += xlogx(v / avg[m]);
        }
    }
    let mut parts = 0.0;
    for m in 0..=n {
        let pi = solution.level_weights[m];
        parts += pi * avg[m] * within[m] / count[m];
        parts += xlogx(avg[m]) * pi;
    }
    Ok((whole - parts).abs())
}

/// Birth-death Dirichlet form of the level averages of `f` over `D_G(f)`.
///
/// `0/0` is reported as 0 and `x/0` as infinity.
pub fn dirichlet_comparison_check(f: &[f64], solution: &ExactSolution) -> Result<f64, ExactError> {
    let fun = functionals(f, solution)?;
    let n = solution.n();
    let chain = BirthDeathChain::build(n, solution.params.theta())?;
    let avg = solution.level_averages(f);
    let num: f64 = (0..n)
        .map(|m| {
            chain.log_b[m].exp()
                * (avg[m + 1].sqrt() - avg[m].sqrt()).powi(2)
                * solution.level_weights[m]
        })
        .sum();
    Ok(if fun.dirichlet_glauber > 0.0 {
        num / fun.dirichlet_glauber
    } else if num <= 1e-300 {
        0.0
    } else {
        f64::INFINITY
    })
}

/// Families of random densities used by the probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityFamily {
    Dirichlet { concentration_tenths: u32 },
    LevelIndicator { level: usize },
    Spike { state: usize },
}

/// Density `w / nu_U` for a random probability vector `w`.
pub fn sample_density<R: Rng + ?Sized>(family: DensityFamily, solution: &ExactSolution, rng: &mut R) -> Vec<f64> {
    let nu = &solution.nu_u;
    match family {
        DensityFamily::Dirichlet { concentration_tenths } => {
            let g = Gamma::new(concentration_tenths as f64 / 10.0, 1.0).expect("positive shape");
            let mut w: Vec<f64> = (0..nu.len()).map(|_| g.sample(rng)).collect();
            normalize(&mut w);
            w.iter().zip(nu).map(|(w, v)| w / v).collect()
        }
        DensityFamily::LevelIndicator { level } => {
            let pi = solution.level_weights[level];
            (0..nu.len() as u32)
                .map(|s| if s.count_ones() as usize == level { 1.0 / pi } else { 0.0 })
                .collect()
        }
        DensityFamily::Spike { state } => {
            let mut f = vec![0.0; nu.len()];
            f[state] = 1.0 / nu[state];
            f
        }
    }
}

/// Probe families: every level indicator first, then Dirichlet densities
/// with concentrations 0.1, 1, 10 and single-state spikes in rotation.
pub fn probe_families<R: Rng + ?Sized>(samples: usize, n: usize, rng: &mut R) -> Vec<DensityFamily> {
    let mut out: Vec<DensityFamily> = (0..=n)
        .take(samples)
        .map(|level| DensityFamily::LevelIndicator { level })
        .collect();
    let mut i = 0;
    while out.len() < samples {
        out.push(match i % 4 {
            0 => DensityFamily::Dirichlet { concentration_tenths: 1 },
            1 => DensityFamily::Dirichlet { concentration_tenths: 10 },
            2 => DensityFamily::Dirichlet { concentration_tenths: 100 },
            _ => DensityFamily::Spike {
                state: rng.random_range(0..1usize << n),
            },
        });
        i += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub samples: usize,
    pub max_ratio: f64,
    pub argmax: DensityFamily,
}

fn probe<F>(samples: usize, solution: &ExactSolution, seed: u64, ratio: F) -> Result<ProbeResult, ExactError>
where
    F: Fn(&[f64]) -> Result<f64, ExactError>,
{
    let mut rng = stream_rng(seed, 0);
    let families = probe_families(samples, solution.n(), &mut rng);
    let mut best = ProbeResult {
        samples,
        max_ratio: 0.0,
        argmax: families[0],
    };
    for fam in families {
        let f = sample_density(fam, solution, &mut rng);
        let r = ratio(&f)?;
        if r > best.max_ratio {
            best.max_ratio = r;
            best.argmax = fam;
        }
    }
    Ok(best)
}

/// Largest `H(f) / (sqrt(n) D(f))` over the probe densities.
pub fn lsi_probe(samples: usize, solution: &ExactSolution, seed: u64) -> Result<ProbeResult, ExactError> {
    let root_n = (solution.n() as f64).sqrt();
    probe(samples, solution, seed, |f| {
        let fun = functionals(f, solution)?;
        Ok(if fun.dirichlet > 0.0 {
            fun.entropy / (root_n * fun.dirichlet)
        } else {
            0.0
        })
    })
}

/// Largest Dirichlet comparison ratio over the probe densities.
pub fn dirichlet_comparison_probe(samples: usize, solution: &ExactSolution, seed: u64) -> Result<ProbeResult, ExactError> {
    probe(samples, solution, seed, |f| dirichlet_comparison_check(f, solution))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, theta: f64, a: f64) -> ModelParams {
        ModelParams::new(n, theta, a).unwrap()
    }

    #[test]
    fn generator_rows_sum_to_zero() {
        for n in [2usize, 3, 5, 8] {
            let q = build_generator(&params(n, 0.3, 0.7)).unwrap();
            for i in 0..q.states() {
                let s: f64 = q.row(i).map(|(_, r)| r).sum::<f64>() + q.diag[i];
                assert_eq!(s, 0.0);
            }
        }
    }

    #[test]
    fn generator_entries() {
        let q = build_generator(&ModelParams::untilted(4, 1.0).unwrap()).unwrap();
        for s in 0..16usize {
            for x in 0..4 {
                let t = s ^ (1 << x);
                let r = q.row(s).find(|&(j, _)| j == t).unwrap().1;
                assert_eq!(r, 1.0);
            }
        }
        // Sites 0,1,2 read left to right: "101" has bits 0 and 2 set.
        let q3 = build_generator(&params(3, 0.5, 1.0)).unwrap();
        let from = 0b101usize;
        let to = 0b110usize;
        let r = q3.row(from).find(|&(j, _)| j == to).unwrap().1;
        assert_eq!(r, 9.0);
        assert!(matches!(
            build_generator(&params(16, 0.0, 0.1)),
            Err(ExactError::TooLarge { .. })
        ));
    }

    #[test]
    fn degenerate_tilt_gives_uniform_law() {
        let sol = solve(&ModelParams::untilted(6, 0.1).unwrap()).unwrap();
        let u = 1.0 / 64.0;
        assert!(sol.mu_ss.iter().all(|m| (m - u).abs() < 1e-10));
        let pmf = law_of_magnetization(&solve(&ModelParams::untilted(4, 1.0).unwrap()).unwrap()).pmf;
        for (p, c) in pmf.iter().zip([1.0, 4.0, 6.0, 4.0, 1.0]) {
            assert!((p - c / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_small_for_three_sites() {
        for theta in [-1.7, -0.5, 0.0, 1.0, 3f64.sqrt()] {
            let sol = solve(&params(3, theta, 1.0)).unwrap();
            assert!(sol.residual < 1e-10);
            let total: f64 = sol.mu_ss.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetries_of_stationary_law() {
        let n = 6;
        let sol = solve(&params(n, 0.4, 0.1)).unwrap();
        let full = (1u32 << n) - 1;
        for s in 0..1u32 << n {
            let shifted = ((s << 1) | (s >> (n - 1))) & full;
            assert!((sol.mu_ss[s as usize] - sol.mu_ss[shifted as usize]).abs() < 1e-10);
            assert!((sol.mu_ss[s as usize] - sol.mu_ss[(s ^ full) as usize]).abs() < 1e-10);
        }
        let pmf = law_of_magnetization(&sol).pmf;
        for m in 0..=n {
            assert!((pmf[m] - pmf[n - m]).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregated_and_power_agree_with_dense() {
        let q = build_generator(&params(6, 0.0, 0.1)).unwrap();
        let dense = solve_dense(&q).unwrap();
        let agg = solve_aggregated(&q, 1e-13, 10_000).unwrap();
        let (pow, _) = solve_power_iteration(&q, 1e-13, 5_000_000).unwrap();
        for i in 0..q.states() {
            assert!((dense[i] - agg[i]).abs() < 1e-11);
            assert!((dense[i] - pow[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_density_functionals_vanish() {
        let sol = solve(&params(6, 0.0, 0.1)).unwrap();
        let one = vec![1.0; 64];
        let f = functionals(&one, &sol).unwrap();
        assert_eq!(f.dirichlet_exchange, 0.0);
        assert_eq!(f.dirichlet_glauber, 0.0);
        assert!(f.entropy.abs() < 1e-15);
        assert!(entropy_decomposition_check(&one, &sol).unwrap() < 1e-15);
        assert_eq!(dirichlet_comparison_check(&one, &sol).unwrap(), 0.0);
        assert!(matches!(functionals(&vec![2.0; 64], &sol), Err(ExactError::NotNormalized(_))));
        let mut neg = one.clone();
        neg[3] = -1.0;
        assert!(matches!(functionals(&neg, &sol), Err(ExactError::NegativeDensity(3))));
    }

    #[test]
    fn level_indicator_structure() {
        let sol = solve(&params(6, 0.0, 0.1)).unwrap();
        let mut rng = stream_rng(1, 0);
        let f = sample_density(DensityFamily::LevelIndicator { level: 2 }, &sol, &mut rng);
        let fun = functionals(&f, &sol).unwrap();
        assert!(fun.dirichlet_exchange.abs() < 1e-15);
        assert!(fun.dirichlet_glauber > 0.0);
        assert!(entropy_decomposition_check(&f, &sol).unwrap() < 1e-10);
    }

    #[test]
    fn stationary_density_decomposes() {
        let sol = solve(&params(8, 0.0, 0.1)).unwrap();
        let f = sol.stationary_density();
        assert!(entropy_decomposition_check(&f, &sol).unwrap() < 1e-10);
        let h = functionals(&f, &sol).unwrap().entropy;
        assert!(h > 0.0 && h.is_finite());
    }

    #[test]
    fn probes_are_finite() {
        let sol = solve(&params(6, 0.0, 0.1)).unwrap();
        let p = lsi_probe(40, &sol, 3).unwrap();
        assert!(p.max_ratio.is_finite() && p.max_ratio > 0.0);
        let d = dirichlet_comparison_probe(40, &sol, 3).unwrap();
        assert!(d.max_ratio.is_finite() && d.max_ratio > 0.0);
        let mut rng = stream_rng(2, 0);
        let spike = sample_density(DensityFamily::Spike { state: 5 }, &sol, &mut rng);
        let fun = functionals(&spike, &sol).unwrap();
        assert!((fun.entropy / (6f64.sqrt() * fun.dirichlet)).is_finite());
    }
}
