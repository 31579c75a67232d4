//! The quartic fluctuation law `alpha*(dy) = Z^{-1} exp(-2 V(y)) dy` and the
//! Langevin diffusion `dY = -a V'(Y) dt + sqrt(a) dW` that leaves it invariant.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::stats::two_sample_ks;
use crate::numerics::{gauss_kronrod_15, integrate};
use crate::potentials::{eval_v, eval_v_prime};
use crate::streams::{stream_rng, StreamRng};

/// Intervals of the CDF table.
pub const TABLE_INTERVALS: usize = 8192;
/// Mass left outside each end of the table.
const TABLE_TAIL: f64 = 1e-13;
/// Paths per RNG stream in parallel SDE ensembles.
const PATHS_PER_STREAM: usize = 1024;

#[derive(Debug, Error, PartialEq)]
pub enum LimitError {
    #[error("quadrature did not converge on [{lo}, {hi}]")]
    Quadrature { lo: f64, hi: f64 },
    #[error("moments of odd order vanish by symmetry; got k = {0}")]
    OddMoment(u32),
    #[error("invalid SDE parameters: {0}")]
    SdeParams(String),
    #[error("path left |y| <= 1e3 at step {step} (time step too large)")]
    Divergence { step: usize },
    #[error("count must be positive")]
    EmptyRequest,
}

/// Normalized law with a tabulated CDF.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuarticLaw {
    pub theta: f64,
    /// `log Z` with `Z = int exp(-2 V(y)) dy`.
    pub log_z: f64,
    /// Half-width of the quadrature window.
    pub y_max: f64,
    /// Table nodes, symmetric about 0.
    pub nodes: Vec<f64>,
    pub cdf_table: Vec<f64>,
    pub pdf_table: Vec<f64>,
}

/// Quadrature window `max(4, 3 sqrt|theta| + 4)`.
pub fn window(theta: f64) -> f64 {
    (3.0 * theta.abs().sqrt() + 4.0).max(4.0)
}

fn quad<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64, LimitError> {
    integrate(f, lo, hi, 1e-300, 1e-14, 100_000)
        .map(|r| r.value)
        .ok_or(LimitError::Quadrature { lo, hi })
}

impl QuarticLaw {
    pub fn new(theta: f64) -> Result<Self, LimitError> {
        let y_max = window(theta);
        // Shift by the minimum of V so the integrand stays O(1) in the double well.
        let v_min = if theta < 0.0 { -0.5 * theta * theta } else { 0.0 };
        let shifted = |y: f64| (-2.0 * (eval_v(y, theta) - v_min)).exp();
        let half = quad(shifted, 0.0, y_max)?;
        let log_z = (2.0 * half).ln() - 2.0 * v_min;
        let pdf = move |y: f64| (-2.0 * eval_v(y, theta) - log_z).exp();

        // Effective support: largest y whose upper tail still exceeds TABLE_TAIL.
        let tail_from = |y: f64| quad(pdf, y, y_max);
        let (mut lo, mut hi) = (0.0, y_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if tail_from(mid)? > TABLE_TAIL {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        let y_edge = lo;
        let beyond = tail_from(y_edge)?;

        let k = TABLE_INTERVALS;
        let h = 2.0 * y_edge / k as f64;
        let nodes: Vec<f64> = (0..=k).map(|i| -y_edge + h * i as f64).collect();
        let panels: Vec<f64> = nodes.windows(2).map(|w| gauss_kronrod_15(&pdf, w[0], w[1]).0).collect();
        // Accumulate from both ends toward the middle so small masses keep full precision.
        let mut cdf_table = vec![0.0; k + 1];
        let mid = k / 2;
        let mut acc = beyond;
        cdf_table[0] = acc;
        for i in 0..mid {
            acc += panels[i];
            cdf_table[i + 1] = acc;
        }
        let mut tail = beyond;
        cdf_table[k] = 1.0 - tail;
        for i in (mid..k).rev() {
            tail += panels[i];
            if i > mid {
                cdf_table[i] = 1.0 - tail;
            }
        }
        let pdf_table = nodes.iter().map(|&y| pdf(y)).collect();
        Ok(Self {
            theta,
            log_z,
            y_max,
            nodes,
            cdf_table,
            pdf_table,
        })
    }

    pub fn pdf(&self, y: f64) -> f64 {
        (-2.0 * eval_v(y, self.theta) - self.log_z).exp()
    }

    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    fn step(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    /// CDF from the nearest table node plus a local quadrature panel.
    pub fn cdf(&self, y: f64) -> f64 {
        let first = self.nodes[0];
        let last = *self.nodes.last().expect("non-empty table");
        if y <= first {
            return if y <= -self.y_max {
                0.0
            } else {
                quad(|t| self.pdf(t), -self.y_max, y).unwrap_or(0.0)
            };
        }
        if y >= last {
            return if y >= self.y_max {
                1.0
            } else {
                1.0 - quad(|t| self.pdf(t), y, self.y_max).unwrap_or(0.0)
            };
        }
        let j = (((y - first) / self.step()).round() as usize).min(self.nodes.len() - 1);
        let node = self.nodes[j];
        let pdf = |t: f64| self.pdf(t);
        let (lo, hi) = if y >= node { (node, y) } else { (y, node) };
        let piece = gauss_kronrod_15(&pdf, lo, hi).0;
        let sign = if y >= node { 1.0 } else { -1.0 };
        (self.cdf_table[j] + sign * piece).clamp(0.0, 1.0)
    }

    /// `int y^k alpha*(dy)` for even `k`.
    pub fn moment(&self, k: u32) -> Result<f64, LimitError> {
        if k % 2 == 1 {
            return Err(LimitError::OddMoment(k));
        }
        let theta = self.theta;
        let log_z = self.log_z;
        let f = move |y: f64| y.powi(k as i32) * (-2.0 * eval_v(y, theta) - log_z).exp();
        Ok(2.0 * quad(f, 0.0, self.y_max)?)
    }

    /// Inverse CDF by monotone cubic Hermite interpolation of `y(F)` on the table.
    pub fn quantile(&self, u: f64) -> f64 {
        let t = &self.cdf_table;
        let k = t.len() - 1;
        if u <= t[0] {
            return self.nodes[0];
        }
        if u >= t[k] {
            return self.nodes[k];
        }
        let j = match t.binary_search_by(|v| v.total_cmp(&u)) {
            Ok(i) => return self.nodes[i],
            Err(i) => i - 1,
        };
        let (f0, f1) = (t[j], t[j + 1]);
        let (y0, y1) = (self.nodes[j], self.nodes[j + 1]);
        let df = f1 - f0;
        let secant = (y1 - y0) / df;
        // Exact slopes dy/dF = 1/pdf, limited to keep the cubic monotone.
        let mut m0 = 1.0 / self.pdf_table[j];
        let mut m1 = 1.0 / self.pdf_table[j + 1];
        let (a, b) = (m0 / secant, m1 / secant);
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m0 = tau * a * secant;
            m1 = tau * b * secant;
        }
        let s = (u - f0) / df;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * y0 + h10 * df * m0 + h01 * y1 + h11 * df * m1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<f64>, LimitError> {
        if count == 0 {
            return Err(LimitError::EmptyRequest);
        }
        Ok((0..count).map(|_| self.quantile(rng.random::<f64>())).collect())
    }

    /// `(y, pdf, cdf)` rows of the table.
    pub fn table_rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(&self.pdf_table)
            .zip(&self.cdf_table)
            .map(|((y, p), c)| (*y, *p, *c))
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "y,pdf,cdf\r\n")?;
        for (y, p, c) in self.table_rows() {
            write!(w, "{y},{p},{c}\r\n")?;
        }
        Ok(())
    }
}

pub fn quartic_law(theta: f64) -> Result<QuarticLaw, LimitError> {
    QuarticLaw::new(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeParams {
    pub theta: f64,
    pub a: f64,
    pub dt: f64,
    pub t_end: f64,
}

/// Iterate divergence guard.
pub const DIVERGENCE_BOUND: f64 = 1e3;

impl SdeParams {
    pub fn new(theta: f64, a: f64, dt: f64, t_end: f64) -> Result<Self, LimitError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(LimitError::SdeParams(format!("dt = {dt}")));
        }
        if !(t_end >= dt && t_end.is_finite()) {
            return Err(LimitError::SdeParams(format!("T = {t_end} < dt = {dt}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(LimitError::SdeParams(format!("a = {a}")));
        }
        Ok(Self { theta, a, dt, t_end })
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Euler-Maruyama path driven by an arbitrary stream of standard normal draws.
///
/// Appends every iterate (including `y0`) to `path` when given.
pub fn integrate_sde_with<F: FnMut() -> f64>(
    p: &SdeParams,
    y0: f64,
    mut gaussian: F,
    mut path: Option<&mut Vec<f64>>,
) -> Result<f64, LimitError> {
    let mut y = y0;
    let noise = (p.a * p.dt).sqrt();
    if let Some(v) = path.as_deref_mut() {
        v.push(y);
    }
    for step in 0..p.steps() {
        y += -p.a * eval_v_prime(y, p.theta) * p.dt + noise * gaussian();
        if !(y.abs() <= DIVERGENCE_BOUND) {
            return Err(LimitError::Divergence { step });
        }
        if let Some(v) = path.as_deref_mut() {
            v.push(y);
        }
    }
    Ok(y)
}

pub fn integrate_sde<R: Rng + ?Sized>(p: &SdeParams, y0: f64, rng: &mut R) -> Result<f64, LimitError> {
    integrate_sde_with(p, y0, || rng.sample(StandardNormal), None)
}

/// Evolve each initial point to `p.t_end`; paths are split over independent streams.
pub fn evolve_ensemble(p: &SdeParams, initial: &[f64], seed: u64) -> Result<Vec<f64>, LimitError> {
    initial
        .par_chunks(PATHS_PER_STREAM)
        .enumerate()
        .map(|(c, chunk)| {
            let mut rng: StreamRng = stream_rng(seed, c as u64 + 1);
            chunk.iter().map(|&y0| integrate_sde(p, y0, &mut rng)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<Vec<f64>>, _>>()
        .map(|v| v.concat())
}

/// Two-sample KS distance between `alpha*` pushed forward by the diffusion
/// for time `t` and an independent `alpha*` sample of the same size.
pub fn invariance_test(theta: f64, a: f64, t: f64, paths: usize, dt: f64, seed: u64) -> Result<f64, LimitError> {
    if paths == 0 {
        return Err(LimitError::EmptyRequest);
    }
    let law = QuarticLaw::new(theta)?;
    let mut rng = stream_rng(seed, 0);
    let start = law.sample(&mut rng, paths)?;
    let fresh = law.sample(&mut rng, paths)?;
    let end = if t == 0.0 {
        start
    } else {
        let p = SdeParams::new(theta, a, dt, t)?;
        evolve_ensemble(&p, &start, seed)?
    };
    Ok(two_sample_ks(&end, &fresh).expect("non-empty samples"))
}

/// `E[Y_T^2]` at step sizes `h, h/2, ..., h/2^(levels-1)` on shared Brownian paths.
pub fn weak_convergence_study(
    theta: f64,
    a: f64,
    y0: f64,
    t_end: f64,
    h: f64,
    levels: u32,
    paths: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>, LimitError> {
    let fine = 1usize << (levels - 1);
    let coarse_steps = (t_end / h).round() as usize;
    let hf = h / fine as f64;
    let chunks: Vec<usize> = (0..paths).collect();
    let sums = chunks
        .par_chunks(PATHS_PER_STREAM)
        .enumerate()
        .map(|(c, chunk)| {
            let mut rng = stream_rng(seed, c as u64);
            let mut acc = vec![0.0; levels as usize];
            let mut inc = vec![0.0; fine];
            for _ in chunk {
                let mut ys = vec![y0; levels as usize];
                for _ in 0..coarse_steps {
                    for v in inc.iter_mut() {
                        *v = hf.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    }
                    for (l, y) in ys.iter_mut().enumerate() {
                        let per = fine >> l;
                        let dt = hf * per as f64;
                        for block in inc.chunks(per) {
                            let dw: f64 = block.iter().sum();
                            *y += -a * eval_v_prime(*y, theta) * dt + a.sqrt() * dw;
                        }
                        if !(y.abs() <= DIVERGENCE_BOUND) {
                            return Err(LimitError::Divergence { step: 0 });
                        }
                    }
                }
                for (s, y) in acc.iter_mut().zip(&ys) {
                    *s += y * y;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<Vec<f64>>, LimitError>>()?;
    let mut total = vec![0.0; levels as usize];
    for s in sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    Ok(total
        .iter()
        .enumerate()
        .map(|(l, s)| (h / (1u64 << l) as f64, s / paths as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::stats::ks_statistic;
    use rand::SeedableRng;
    use statrs::function::gamma::gamma;

    #[test]
    fn normalizer_and_second_moment_at_zero_theta() {
        let law = QuarticLaw::new(0.0).unwrap();
        let z_exact = gamma(0.25) / 2.0;
        assert!((law.z() - z_exact).abs() < 1e-6);
        assert!((law.z() - 1.812_805_0).abs() < 1e-6);
        let m2 = law.moment(2).unwrap();
        assert!((m2 - gamma(0.75) / gamma(0.25)).abs() < 1e-6);
        assert!((m2 - 0.337_989).abs() < 1e-6);
        assert!((law.moment(0).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(law.moment(3), Err(LimitError::OddMoment(3)));
    }

    #[test]
    fn density_integrates_to_one() {
        for theta in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let law = QuarticLaw::new(theta).unwrap();
            let total = quad(|y| law.pdf(y), -law.y_max, law.y_max).unwrap();
            assert!((total - 1.0).abs() < 1e-8, "theta={theta}");
            assert!((law.moment(0).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn table_shape() {
        for theta in [-2.0, 0.0, 1.5] {
            let law = QuarticLaw::new(theta).unwrap();
            assert!(law.nodes.len() > 4096);
            assert!(law.cdf_table.windows(2).all(|w| w[1] > w[0]), "theta={theta}");
            assert!(law.cdf_table[0] < 1e-12 && law.cdf_table[0] > 0.0);
            assert!(*law.cdf_table.last().unwrap() > 1.0 - 1e-12);
            assert!((law.cdf(0.0) - 0.5).abs() < 1e-10);
            for y in [0.1, 0.7, 1.3, 2.0] {
                assert!((law.pdf(y) - law.pdf(-y)).abs() < 1e-12);
                assert!((law.cdf(y) + law.cdf(-y) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn log_density_slope_is_twice_drift() {
        let law = QuarticLaw::new(-1.0).unwrap();
        let h = 1e-5;
        for y in [-1.5, -0.4, 0.3, 1.1, 1.9] {
            let fd = -((law.pdf(y + h)).ln() - (law.pdf(y - h)).ln()) / (2.0 * h);
            assert!((fd - 2.0 * eval_v_prime(y, -1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn cdf_agrees_with_direct_quadrature() {
        let law = QuarticLaw::new(0.5).unwrap();
        for y in [-1.7, -0.2, 0.0123, 0.9, 1.6] {
            let direct = quad(|t| law.pdf(t), -law.y_max, y).unwrap();
            assert!((law.cdf(y) - direct).abs() < 1e-12, "y={y}");
        }
    }

    #[test]
    fn sampler_matches_law() {
        let law = QuarticLaw::new(0.0).unwrap();
        let mut rng = StreamRng::seed_from_u64(17);
        let x = law.sample(&mut rng, 1_000_000).unwrap();
        let ks = ks_statistic(&x, |y| law.cdf(y)).unwrap();
        assert!(ks < 0.002, "{ks}");
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let m2 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let se = (m2 / x.len() as f64).sqrt();
        assert!(mean.abs() < 4.0 * se);
        assert!((m2 / 0.337_989 - 1.0).abs() < 0.01);
        let mut again = StreamRng::seed_from_u64(17);
        assert_eq!(law.sample(&mut again, 10).unwrap(), x[..10].to_vec());
        assert_eq!(law.sample(&mut again, 0), Err(LimitError::EmptyRequest));
    }

    #[test]
    fn quantile_inverts_cdf() {
        let law = QuarticLaw::new(-1.0).unwrap();
        for u in [1e-9, 0.001, 0.2, 0.5, 0.77, 0.999_999] {
            let y = law.quantile(u);
            assert!((law.cdf(y) - u).abs() < 1e-9 * u.max(1e-3), "u={u}");
        }
    }

    #[test]
    fn deterministic_euler_steps() {
        let p = SdeParams::new(1.0, 0.1, 0.01, 1.0).unwrap();
        assert_eq!(integrate_sde_with(&p, 0.0, || 0.0, None).unwrap(), 0.0);
        let one = SdeParams::new(1.0, 0.1, 0.01, 0.01).unwrap();
        let y = integrate_sde_with(&one, 1.0, || 0.0, None).unwrap();
        assert!((y - 0.996).abs() < 1e-15);
        let mut path = Vec::new();
        integrate_sde_with(&p, 0.5, || 0.0, Some(&mut path)).unwrap();
        assert_eq!(path.len(), 101);
        assert!(SdeParams::new(0.0, 0.1, 0.0, 1.0).is_err());
        assert!(SdeParams::new(0.0, 0.1, 0.1, 0.01).is_err());
        assert!(SdeParams::new(0.0, -1.0, 0.1, 1.0).is_err());
        let blow = SdeParams::new(0.0, 1.0, 1.0, 10.0).unwrap();
        assert!(matches!(integrate_sde_with(&blow, 5.0, || 0.0, None), Err(LimitError::Divergence { .. })));
    }

    #[test]
    fn euler_weak_error_halves_with_step() {
        let est = weak_convergence_study(1.0, 1.0, 1.0, 1.0, 0.1, 4, 200_000, 5).unwrap();
        let e: Vec<f64> = est.iter().map(|p| p.1).collect();
        let ratio1 = (e[0] - e[1]) / (e[1] - e[2]);
        let ratio2 = (e[1] - e[2]) / (e[2] - e[3]);
        assert!((ratio1 / 2.0 - 1.0).abs() < 0.3, "{ratio1}");
        assert!((ratio2 / 2.0 - 1.0).abs() < 0.3, "{ratio2}");
        // Richardson extrapolation: the error against it halves as well.
        let limit = 2.0 * e[3] - e[2];
        let r = (e[1] - limit) / (e[2] - limit);
        assert!((r / 2.0 - 1.0).abs() < 0.3, "{r}");
    }

    #[test]
    fn invariance_at_time_zero() {
        let paths = 20_000;
        let ks = invariance_test(0.0, 0.1, 0.0, paths, 1e-3, 9).unwrap();
        assert!(ks < 1.63 * (2.0 / paths as f64).sqrt());
    }

    #[test]
    fn ergodic_average_of_square() {
        let law = QuarticLaw::new(0.0).unwrap();
        let p = SdeParams::new(0.0, 1.0, 1e-3, 1e4).unwrap();
        let mut rng = StreamRng::seed_from_u64(23);
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut y = 0.0;
        let noise = (p.a * p.dt).sqrt();
        for _ in 0..p.steps() {
            y += -p.a * eval_v_prime(y, 0.0) * p.dt + noise * rng.sample::<f64, _>(StandardNormal);
            sum += y * y;
            count += 1;
        }
        let avg = sum / count as f64;
        assert!((avg / law.moment(2).unwrap() - 1.0).abs() < 0.02, "{avg}");
    }
}
