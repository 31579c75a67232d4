//! Birth-death chain of the magnetization levels under the reference
//! measure: stationary law, rates, Hardy-type log-Sobolev constants,
//! spectral gap and scaling diagnostics. Everything is held in log space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{ln_binomial_half, ln_choose, log1m_exp, log_add_exp, log_sum_exp};
use crate::potentials::{eval_e, eval_u0, gamma_of, ModelError};

/// `(4/3) (1 - sqrt(5) / (2 sqrt(2)))^{-2}`, the upper constant of the
/// two-sided log-Sobolev estimate.
pub fn lsi_upper_constant() -> f64 {
    let r = 1.0 - 5f64.sqrt() / (2.0 * 2f64.sqrt());
    4.0 / 3.0 / (r * r)
}

pub const LSI_LOWER_CONSTANT: f64 = 1.0 / 80.0;

#[derive(Debug, Error)]
pub enum BirthDeathError {
    #[error("spectral bisection did not converge (interval width {0:.3e})")]
    EigenNonConvergence(f64),
    #[error("smallest eigenvalue {value:.3e} is not zero relative to norm {norm:.3e}")]
    NonzeroGroundState { value: f64, norm: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BirthDeathChain {
    pub n: usize,
    pub theta: f64,
    pub gamma: f64,
    /// `log pi_n(m)`, normalized.
    pub log_pi: Vec<f64>,
    /// `log b_n(m)`; `-inf` at `m = n`.
    pub log_b: Vec<f64>,
    /// `log d_n(m)`; `-inf` at `m = 0`.
    pub log_d: Vec<f64>,
}

impl BirthDeathChain {
    pub fn build(n: usize, theta: f64) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::LatticeTooSmall(n));
        }
        let gamma = gamma_of(n, theta)?;
        let nf = n as f64;
        let nu0: Vec<f64> = (0..=n)
            .map(|m| Ok(nf * eval_u0(m as f64 / nf, gamma)?.value))
            .collect::<Result<_, ModelError>>()?;
        let unnorm: Vec<f64> = (0..=n).map(|m| nu0[m] + ln_binomial_half(m as u64, n as u64)).collect();
        let z = log_sum_exp(&unnorm);
        let log_pi = unnorm.iter().map(|v| v - z).collect();
        let log_b = (0..=n)
            .map(|m| {
                if m == n {
                    f64::NEG_INFINITY
                } else {
                    ((n - m) as f64).ln() + 0.5 * (nu0[m + 1] - nu0[m])
                }
            })
            .collect();
        let log_d = (0..=n)
            .map(|m| {
                if m == 0 {
                    f64::NEG_INFINITY
                } else {
                    (m as f64).ln() + 0.5 * (nu0[m - 1] - nu0[m])
                }
            })
            .collect();
        Ok(Self {
            n,
            theta,
            gamma,
            log_pi,
            log_b,
            log_d,
        })
    }

    /// `m_n = floor(n / 2)`.
    pub fn midpoint(&self) -> usize {
        self.n / 2
    }

    pub fn pi(&self) -> Vec<f64> {
        self.log_pi.iter().map(|v| v.exp()).collect()
    }

    /// Largest `|log pi(m) + log b(m) - log pi(m+1) - log d(m+1)|`.
    pub fn detailed_balance_residual(&self) -> f64 {
        (0..self.n)
            .map(|m| (self.log_pi[m] + self.log_b[m] - self.log_pi[m + 1] - self.log_d[m + 1]).abs())
            .fold(0.0, f64::max)
    }

    /// `log pi` rebuilt from `pi(m+1) = pi(m) b(m) / d(m+1)`, normalized.
    pub fn log_pi_by_recursion(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n + 1];
        for m in 0..self.n {
            v[m + 1] = v[m] + self.log_b[m] - self.log_d[m + 1];
        }
        let z = log_sum_exp(&v);
        v.iter().map(|x| x - z).collect()
    }

    /// `log pi` from log-Gamma binomial coefficients.
    pub fn log_pi_by_log_gamma(&self) -> Result<Vec<f64>, ModelError> {
        let nf = self.n as f64;
        let v: Vec<f64> = (0..=self.n)
            .map(|m| {
                Ok(nf * eval_u0(m as f64 / nf, self.gamma)?.value + ln_choose(self.n as u64, m as u64)
                    - nf * std::f64::consts::LN_2)
            })
            .collect::<Result<_, ModelError>>()?;
        let z = log_sum_exp(&v);
        Ok(v.iter().map(|x| x - z).collect())
    }

    /// `log Psi(pi([l, n]))` and `log Psi(pi([0, l]))` for every `l`, with
    /// `Psi(x) = -x log x`.
    fn log_psi_tails(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut prefix = vec![f64::NEG_INFINITY; n + 1];
        let mut acc = f64::NEG_INFINITY;
        for m in 0..=n {
            acc = log_add_exp(acc, self.log_pi[m]);
            prefix[m] = acc;
        }
        let mut suffix = vec![f64::NEG_INFINITY; n + 1];
        acc = f64::NEG_INFINITY;
        for m in (0..=n).rev() {
            acc = log_add_exp(acc, self.log_pi[m]);
            suffix[m] = acc;
        }
        // -log(mass), from the complement when the mass is close to 1.
        let neg_log = |mass: f64, complement: f64| -> f64 {
            if mass > -std::f64::consts::LN_2 {
                -log1m_exp(complement)
            } else {
                -mass
            }
        };
        let upper = (0..=n)
            .map(|l| {
                if l == 0 {
                    return f64::NEG_INFINITY;
                }
                suffix[l] + neg_log(suffix[l], prefix[l - 1]).ln()
            })
            .collect();
        let lower = (0..=n)
            .map(|l| {
                if l == n {
                    return f64::NEG_INFINITY;
                }
                prefix[l] + neg_log(prefix[l], suffix[l + 1]).ln()
            })
            .collect();
        (upper, lower)
    }

    /// `(log C^-(m), log C^+(m))` at pivot `m`; `-inf` encodes an empty supremum.
    pub fn miclo_log_constants(&self, m: usize) -> (f64, f64) {
        let (psi_up, psi_down) = self.log_psi_tails();
        self.miclo_log_with(m, &psi_up, &psi_down)
    }

    fn miclo_log_with(&self, m: usize, psi_up: &[f64], psi_down: &[f64]) -> (f64, f64) {
        let n = self.n;
        assert!(m <= n, "pivot {m} outside 0..={n}");
        let mut plus = f64::NEG_INFINITY;
        let mut acc = f64::NEG_INFINITY;
        for l in m + 1..=n {
            acc = log_add_exp(acc, -(self.log_pi[l] + self.log_d[l]));
            plus = plus.max(acc + psi_up[l]);
        }
        let mut minus = f64::NEG_INFINITY;
        acc = f64::NEG_INFINITY;
        for l in (0..m).rev() {
            acc = log_add_exp(acc, -(self.log_pi[l] + self.log_b[l]));
            minus = minus.max(acc + psi_down[l]);
        }
        (minus, plus)
    }

    /// `(C^-(m), C^+(m))`.
    pub fn miclo_constants(&self, m: usize) -> (f64, f64) {
        let (a, b) = self.miclo_log_constants(m);
        (a.exp(), b.exp())
    }

    /// `min_m max(C^-(m), C^+(m))` and a minimizing pivot.
    ///
    /// `C^+` is non-increasing and `C^-` non-decreasing in the pivot, so the
    /// minimum of the maximum sits where they cross.
    pub fn miclo_minimum(&self) -> (f64, usize) {
        let (psi_up, psi_down) = self.log_psi_tails();
        let eval = |m: usize| self.miclo_log_with(m, &psi_up, &psi_down);
        // First pivot with C^- >= C^+.
        let (mut lo, mut hi) = (0usize, self.n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let (minus, plus) = eval(mid);
            if minus >= plus {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let mut best = (f64::INFINITY, lo);
        for m in lo.saturating_sub(1)..=lo.min(self.n) {
            let (minus, plus) = eval(m);
            let v = minus.max(plus);
            if v < best.0 {
                best = (v, m);
            }
        }
        (best.0.exp(), best.1)
    }

    /// Two-sided bounds `(1/(80 C_n), 30.399/C_n)` on the log-Sobolev constant.
    pub fn lsi_bounds(&self) -> LsiBounds {
        let (c_n, argmin) = self.miclo_minimum();
        let (minus, plus) = self.miclo_constants(self.midpoint());
        LsiBounds {
            c_minus_mid: minus,
            c_plus_mid: plus,
            c_n,
            argmin,
            lower: LSI_LOWER_CONSTANT / c_n,
            upper: lsi_upper_constant() / c_n,
        }
    }

    /// Symmetrized generator: diagonal `b + d`, off-diagonal `-sqrt(b(m) d(m+1))`.
    pub fn symmetrized_tridiagonal(&self) -> (Vec<f64>, Vec<f64>) {
        let diag = (0..=self.n)
            .map(|m| self.log_b[m].exp() + self.log_d[m].exp())
            .collect();
        let off = (0..self.n)
            .map(|m| -(0.5 * (self.log_b[m] + self.log_d[m + 1])).exp())
            .collect();
        (diag, off)
    }

    /// Second-smallest eigenvalue of the symmetrized generator.
    pub fn spectral_gap(&self) -> Result<f64, BirthDeathError> {
        let (diag, off) = self.symmetrized_tridiagonal();
        let tri = SymmetricTridiagonal { diag, off };
        let norm = tri.gershgorin_bound();
        let ground = tri.eigenvalue(0)?;
        if ground.abs() > 1e-9 * norm {
            return Err(BirthDeathError::NonzeroGroundState { value: ground, norm });
        }
        tri.eigenvalue(1)
    }

    /// Dirichlet form and variance of `f(m) = n^{-3/4} m`.
    pub fn variance_of_test_function(&self) -> TestFunctionMoments {
        self.moments_of(|m| m as f64 * (self.n as f64).powf(-0.75))
    }

    /// `(1/2) sum b(m) (f(m+1) - f(m))^2 pi(m)` and `Var_pi(f)`.
    pub fn moments_of<F: Fn(usize) -> f64>(&self, f: F) -> TestFunctionMoments {
        let pi = self.pi();
        let vals: Vec<f64> = (0..=self.n).map(&f).collect();
        let mean: f64 = vals.iter().zip(&pi).map(|(v, p)| v * p).sum();
        let variance = vals.iter().zip(&pi).map(|(v, p)| (v - mean).powi(2) * p).sum();
        let dirichlet = 0.5
            * (0..self.n)
                .map(|m| (self.log_b[m] + self.log_pi[m]).exp() * (vals[m + 1] - vals[m]).powi(2))
                .sum::<f64>();
        TestFunctionMoments { dirichlet, variance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsiBounds {
    pub c_minus_mid: f64,
    pub c_plus_mid: f64,
    /// Minimum over all pivots of `max(C^-, C^+)`.
    pub c_n: f64,
    pub argmin: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionMoments {
    pub dirichlet: f64,
    pub variance: f64,
}

/// Real symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct SymmetricTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymmetricTridiagonal {
    pub fn gershgorin_bound(&self) -> f64 {
        let k = self.diag.len();
        (0..k)
            .map(|i| {
                let l = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let r = if i + 1 < k { self.off[i].abs() } else { 0.0 };
                self.diag[i].abs() + l + r
            })
            .fold(0.0, f64::max)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence via `LDL^T`).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        let tiny = f64::MIN_POSITIVE.sqrt() * self.gershgorin_bound().max(1.0);
        for i in 0..self.diag.len() {
            if i > 0 {
                let e = self.off[i - 1];
                q = self.diag[i] - x - e * e / q;
            }
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64, BirthDeathError> {
        let bound = self.gershgorin_bound();
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let width = hi - lo;
        if width > 4.0 * f64::EPSILON * bound.max(1.0) {
            return Err(BirthDeathError::EigenNonConvergence(width));
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Extremes over `k` in `[n/4, 3n/4]` of `C(n,k) 2^{-n} / (a_n(k) e^{-n E(k/n)})`
/// with `a_n(k) = sqrt(n / (k (n - k)))`.
pub fn stirling_envelope(n: usize) -> Result<(f64, f64), ModelError> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in n / 4..=(3 * n) / 4 {
        let r = stirling_ratio(n, k)?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// Single envelope ratio; `sqrt(k (n - k))` uses the convention `1` at `k in {0, n}`.
pub fn stirling_ratio(n: usize, k: usize) -> Result<f64, ModelError> {
    let nf = n as f64;
    let kk = if k == 0 || k == n { nf } else { (k * (n - k)) as f64 };
    let log_a = 0.5 * (nf / kk).ln();
    let log_ratio = ln_binomial_half(k as u64, n as u64) - log_a + nf * eval_e(k as f64 / nf)?.value;
    Ok(log_ratio.exp())
}

/// `Z_U^n / n^{1/4}` with `Z_U^n = sum_m C(n,m) 2^{-n} e^{n U0(m/n)}`.
pub fn znorm_scaling(n: usize, theta: f64) -> Result<f64, ModelError> {
    let gamma = gamma_of(n, theta)?;
    let nf = n as f64;
    let terms: Vec<f64> = (0..=n)
        .map(|m| Ok(nf * eval_u0(m as f64 / nf, gamma)?.value + ln_binomial_half(m as u64, n as u64)))
        .collect::<Result<_, ModelError>>()?;
    Ok((log_sum_exp(&terms) - 0.25 * nf.ln()).exp())
}

/// One row of `bd.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathSummary {
    pub n: usize,
    pub theta: f64,
    #[serde(rename = "C_minus")]
    pub c_minus: f64,
    #[serde(rename = "C_plus")]
    pub c_plus: f64,
    #[serde(rename = "C_n")]
    pub c_n: f64,
    pub lsi_lower: f64,
    pub lsi_upper: f64,
    pub gap: f64,
    pub gap_times_sqrt_n: f64,
    pub var_fn: f64,
    pub dirichlet_fn: f64,
    pub znorm: f64,
    pub detailed_balance_residual: f64,
}

pub fn summarize(n: usize, theta: f64) -> Result<BirthDeathSummary, BirthDeathError> {
    let chain = BirthDeathChain::build(n, theta)?;
    let bounds = chain.lsi_bounds();
    let gap = chain.spectral_gap()?;
    let moments = chain.variance_of_test_function();
    Ok(BirthDeathSummary {
        n,
        theta,
        c_minus: bounds.c_minus_mid,
        c_plus: bounds.c_plus_mid,
        c_n: bounds.c_n,
        lsi_lower: bounds.lower,
        lsi_upper: bounds.upper,
        gap,
        gap_times_sqrt_n: gap * (n as f64).sqrt(),
        var_fn: moments.variance,
        dirichlet_fn: moments.dirichlet,
        znorm: znorm_scaling(n, theta)?,
        detailed_balance_residual: chain.detailed_balance_residual(),
    })
}

pub const BD_CSV_HEADER: &str =
    "n,theta,C_minus,C_plus,C_n,lsi_lower,lsi_upper,gap,gap_times_sqrt_n,var_fn,dirichlet_fn,znorm";

impl BirthDeathSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.theta,
            self.c_minus,
            self.c_plus,
            self.c_n,
            self.lsi_lower,
            self.lsi_upper,
            self.gap,
            self.gap_times_sqrt_n,
            self.var_fn,
            self.dirichlet_fn,
            self.znorm
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn boundary_conventions_and_normalization() {
        let c = BirthDeathChain::build(64, 0.5).unwrap();
        assert_eq!(c.log_b[64], f64::NEG_INFINITY);
        assert_eq!(c.log_d[0], f64::NEG_INFINITY);
        assert!(log_sum_exp(&c.log_pi).abs() < 1e-12);
    }

    #[test]
    fn detailed_balance_holds() {
        for n in [16usize, 1024, 65536] {
            for theta in [-1.0, 0.0, 1.0] {
                let c = BirthDeathChain::build(n, theta).unwrap();
                assert!(c.detailed_balance_residual() < 1e-9, "n={n} theta={theta}");
            }
        }
    }

    #[test]
    fn three_routes_to_pi_agree() {
        for n in [16usize, 1024, 4096] {
            let c = BirthDeathChain::build(n, 1.0).unwrap();
            let rec = c.log_pi_by_recursion();
            let lg = c.log_pi_by_log_gamma().unwrap();
            for m in 0..=n {
                let p = c.log_pi[m].exp();
                assert!((rec[m].exp() - p).abs() <= 1e-8 * p.max(1e-300), "n={n} m={m}");
                assert!((lg[m].exp() - p).abs() <= 1e-8 * p.max(1e-300), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn symmetric_at_zero_theta() {
        let c = BirthDeathChain::build(1000, 0.0).unwrap();
        let pi = c.pi();
        for m in 0..=1000 {
            assert!((pi[m] - pi[1000 - m]).abs() < 1e-12);
        }
        let (minus, plus) = c.miclo_constants(500);
        assert!((minus - plus).abs() < 1e-9 * plus);
    }

    /// Direct O(n^2) evaluation of the Hardy constants in linear space.
    fn miclo_oracle(pi: &[f64], b: &[f64], d: &[f64], m: usize) -> (f64, f64) {
        let n = pi.len() - 1;
        let psi = |x: f64| if x > 0.0 && x < 1.0 { -x * x.ln() } else { 0.0 };
        let mut plus: f64 = 0.0;
        for l in m + 1..=n {
            let s: f64 = (m + 1..=l).map(|k| 1.0 / (pi[k] * d[k])).sum();
            let tail: f64 = pi[l..].iter().sum();
            plus = plus.max(s * psi(tail));
        }
        let mut minus: f64 = 0.0;
        for l in 0..m {
            let s: f64 = (l..m).map(|k| 1.0 / (pi[k] * b[k])).sum();
            let head: f64 = pi[..=l].iter().sum();
            minus = minus.max(s * psi(head));
        }
        (minus, plus)
    }

    #[test]
    fn miclo_matches_direct_sums() {
        for (n, theta) in [(20usize, 0.0), (31, 1.0), (40, -1.0)] {
            let c = BirthDeathChain::build(n, theta).unwrap();
            let pi = c.pi();
            let b: Vec<f64> = c.log_b.iter().map(|v| v.exp()).collect();
            let d: Vec<f64> = c.log_d.iter().map(|v| v.exp()).collect();
            let mut best = f64::INFINITY;
            for m in 0..=n {
                let (om, op) = miclo_oracle(&pi, &b, &d, m);
                let (cm, cp) = c.miclo_constants(m);
                assert!((cm - om).abs() <= 1e-9 * om.max(1e-300), "C- n={n} m={m}: {cm} vs {om}");
                assert!((cp - op).abs() <= 1e-9 * op.max(1e-300), "C+ n={n} m={m}: {cp} vs {op}");
                best = best.min(om.max(op));
            }
            let (c_n, _) = c.miclo_minimum();
            assert!((c_n - best).abs() <= 1e-9 * best);
        }
    }

    #[test]
    fn psi_factor_vanishes_for_full_mass() {
        // l = 0 on the lower side covers pi([0, 0]) only; l = n + 1 is outside the range.
        let c = BirthDeathChain::build(8, 0.0).unwrap();
        let (_, plus) = c.miclo_constants(8);
        let (minus, _) = c.miclo_constants(0);
        assert_eq!(plus, 0.0);
        assert_eq!(minus, 0.0);
    }

    #[test]
    fn lsi_constant_values() {
        assert!((lsi_upper_constant() - 30.399).abs() < 1e-3);
        let b = BirthDeathChain::build(256, 0.0).unwrap().lsi_bounds();
        assert!((b.upper / b.lower - 80.0 * lsi_upper_constant()).abs() < 1e-9);
        assert!((80.0 * lsi_upper_constant() - 2431.9).abs() < 0.1);
    }

    #[test]
    fn gap_matches_dense_eigensolver() {
        for (n, theta) in [(30usize, 0.0), (64, 1.0), (50, -1.0)] {
            let c = BirthDeathChain::build(n, theta).unwrap();
            let (diag, off) = c.symmetrized_tridiagonal();
            let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
            for i in 0..=n {
                a[(i, i)] = diag[i];
            }
            for i in 0..n {
                a[(i, i + 1)] = off[i];
                a[(i + 1, i)] = off[i];
            }
            let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(|x, y| x.total_cmp(y));
            let gap = c.spectral_gap().unwrap();
            assert!(ev[0].abs() < 1e-9 * diag.iter().cloned().fold(0.0, f64::max));
            assert!((gap - ev[1]).abs() < 1e-9 * ev[1], "{gap} vs {}", ev[1]);
        }
    }

    #[test]
    fn gap_dominates_lsi_lower_bound() {
        for n in [256usize, 1024, 4096] {
            let c = BirthDeathChain::build(n, 0.0).unwrap();
            let gap = c.spectral_gap().unwrap();
            assert!(gap >= 2.0 * c.lsi_bounds().lower);
        }
    }

    #[test]
    fn test_function_moments() {
        let c = BirthDeathChain::build(128, 0.0).unwrap();
        let zero = c.moments_of(|_| 3.0);
        assert!(zero.variance < 1e-25);
        assert_eq!(zero.dirichlet, 0.0);
        let mut prev = None;
        for n in [1024usize, 4096, 16384] {
            let m = BirthDeathChain::build(n, 0.0).unwrap().variance_of_test_function();
            let scaled = m.dirichlet * (n as f64).sqrt();
            if let Some(p) = prev {
                let r: f64 = scaled / p;
                assert!(r > 0.8 && r < 1.25);
            }
            prev = Some(scaled);
        }
    }

    #[test]
    fn stirling_ratio_matches_high_precision_values() {
        // mpmath at 50 digits: binomial(4096, k) / 2^4096 / (a_n(k) exp(-4096 E(k/4096))).
        let cases = [(1024usize, 0.398_907_110_446_451_42), (2048, 0.398_917_931_640_328_31)];
        for (k, expect) in cases {
            let r = stirling_ratio(4096, k).unwrap();
            assert!((r - expect).abs() < 1e-12, "k={k}: {r}");
        }
        for k in [1000usize, 1500, 2000] {
            let d = stirling_ratio(4096, k).unwrap() - stirling_ratio(4096, 4096 - k).unwrap();
            assert!(d.abs() < 1e-12);
        }
        let (lo, hi) = stirling_envelope(4096).unwrap();
        assert!(lo > 0.0 && hi.is_finite() && lo <= hi);
    }

    #[test]
    fn znorm_positive() {
        for n in [16usize, 256, 4096] {
            for theta in [-1.0, 0.0, 1.0] {
                assert!(znorm_scaling(n, theta).unwrap() > 0.0);
            }
        }
    }
}
