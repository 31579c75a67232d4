//! Trigonometric test functions and the Gaussian covariance of the fast
//! density-field modes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::stats::{
    self, block_length_for, bootstrap_ci, integrated_autocorrelation_time, StatsError,
};
use crate::lattice::SampleSeries;

/// Largest wavenumber in the test-function library.
pub const MAX_WAVENUMBER: u32 = 8;
/// Below this many effectively independent samples statistics are refused.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 100.0;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("wavenumber {k} outside 1..={MAX_WAVENUMBER} or aliased on {n} sites")]
    Wavenumber { n: usize, k: u32 },
    #[error("test function {0} does not have zero mean")]
    NonZeroMean(String),
    #[error("test functions live on different lattices")]
    LatticeMismatch,
    #[error("mode {0} is not recorded in the series")]
    MissingMode(String),
    #[error("effective sample size {ess:.1} is below {MIN_EFFECTIVE_SAMPLES}")]
    InsufficientSamples { ess: f64 },
    #[error("no samples")]
    Empty,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Cosine,
    Sine,
    Constant,
}

/// Coefficient of one orthonormal basis element: `sqrt(2) cos(2 pi k .)`,
/// `sqrt(2) sin(2 pi k .)` or `1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub kind: ModeKind,
    pub k: u32,
    pub coef: f64,
}

impl FourierTerm {
    fn value(&self, u: f64) -> f64 {
        let arg = 2.0 * PI * self.k as f64 * u;
        self.coef
            * match self.kind {
                ModeKind::Cosine => 2f64.sqrt() * arg.cos(),
                ModeKind::Sine => 2f64.sqrt() * arg.sin(),
                ModeKind::Constant => 1.0,
            }
    }

    fn same_basis(&self, o: &FourierTerm) -> bool {
        self.kind == o.kind && (self.kind == ModeKind::Constant || self.k == o.k)
    }
}

/// A finite trigonometric test function sampled on the grid `x/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    /// Kind of the leading term; combinations report the kind of their first term.
    pub kind: ModeKind,
    pub k: u32,
    pub terms: Vec<FourierTerm>,
    /// `H(x/n)` for `x = 0..n`.
    pub samples: Vec<f64>,
    /// Grid norm `sqrt(n^{-1} sum H(x/n)^2)`.
    pub l2_norm: f64,
    /// Grid mean `n^{-1} sum H(x/n)`.
    pub mean: f64,
}

impl TestFunction {
    fn from_terms(n: usize, terms: Vec<FourierTerm>) -> Self {
        let samples: Vec<f64> = (0..n)
            .map(|x| {
                let u = x as f64 / n as f64;
                terms.iter().map(|t| t.value(u)).sum()
            })
            .collect();
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let l2_norm = (samples.iter().map(|h| h * h).sum::<f64>() / nf).sqrt();
        Self {
            kind: terms[0].kind,
            k: terms[0].k,
            terms,
            samples,
            l2_norm,
            mean,
        }
    }

    fn trig(n: usize, k: u32, kind: ModeKind) -> Result<Self, FieldError> {
        if k == 0 || k > MAX_WAVENUMBER || 2 * k as usize >= n {
            return Err(FieldError::Wavenumber { n, k });
        }
        Ok(Self::from_terms(n, vec![FourierTerm { kind, k, coef: 1.0 }]))
    }

    /// `sqrt(2) cos(2 pi k u)`.
    pub fn cosine(n: usize, k: u32) -> Result<Self, FieldError> {
        Self::trig(n, k, ModeKind::Cosine)
    }

    /// `sqrt(2) sin(2 pi k u)`.
    pub fn sine(n: usize, k: u32) -> Result<Self, FieldError> {
        Self::trig(n, k, ModeKind::Sine)
    }

    pub fn constant(n: usize) -> Self {
        Self::from_terms(
            n,
            vec![FourierTerm {
                kind: ModeKind::Constant,
                k: 0,
                coef: 1.0,
            }],
        )
    }

    /// `sum c_i H_i` over functions on the same lattice.
    pub fn combination(parts: &[(f64, &TestFunction)]) -> Result<Self, FieldError> {
        let n = parts.first().ok_or(FieldError::Empty)?.1.n();
        if parts.iter().any(|(_, h)| h.n() != n) {
            return Err(FieldError::LatticeMismatch);
        }
        let mut terms: Vec<FourierTerm> = Vec::new();
        for (c, h) in parts {
            for t in &h.terms {
                match terms.iter_mut().find(|s| s.same_basis(t)) {
                    Some(s) => s.coef += c * t.coef,
                    None => terms.push(FourierTerm { coef: c * t.coef, ..*t }),
                }
            }
        }
        Ok(Self::from_terms(n, terms))
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    /// Continuum mean, read off the constant coefficient.
    pub fn continuum_mean(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.kind == ModeKind::Constant)
            .map(|t| t.coef)
            .sum()
    }

    pub fn label(&self) -> String {
        if self.terms.len() == 1 {
            match self.kind {
                ModeKind::Cosine => format!("cos{}", self.k),
                ModeKind::Sine => format!("sin{}", self.k),
                ModeKind::Constant => "const".to_string(),
            }
        } else {
            self.terms
                .iter()
                .map(|t| match t.kind {
                    ModeKind::Cosine => format!("{}*cos{}", t.coef, t.k),
                    ModeKind::Sine => format!("{}*sin{}", t.coef, t.k),
                    ModeKind::Constant => format!("{}*const", t.coef),
                })
                .collect::<Vec<_>>()
                .join("+")
        }
    }

    fn require_zero_mean(&self) -> Result<(), FieldError> {
        if self.continuum_mean() != 0.0 || self.mean.abs() > 1e-12 {
            return Err(FieldError::NonZeroMean(self.label()));
        }
        Ok(())
    }
}

/// Limiting covariance `<H,G>/4 + (a/2) <H, (-Laplacian)^{-1} G>` of the
/// density field on zero-mean test functions.
pub fn predicted_covariance(h: &TestFunction, g: &TestFunction, a: f64) -> Result<f64, FieldError> {
    h.require_zero_mean()?;
    g.require_zero_mean()?;
    let mut inner = 0.0;
    let mut inverse_laplacian = 0.0;
    for s in &h.terms {
        for t in g.terms.iter().filter(|t| t.same_basis(s)) {
            let prod = s.coef * t.coef;
            inner += prod;
            let w = 2.0 * PI * s.k as f64;
            inverse_laplacian += prod / (w * w);
        }
    }
    Ok(0.25 * inner + 0.5 * a * inverse_laplacian)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.high - self.low)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }
}

/// Sample moments of selected mode columns, pooled over replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldStatistics {
    pub labels: Vec<String>,
    pub means: Vec<f64>,
    pub mean_ci: Vec<Interval>,
    /// Row-major `K x K` sample covariance.
    pub covariance: Vec<Vec<f64>>,
    pub covariance_ci: Vec<Vec<Interval>>,
    pub autocorrelation_times: Vec<f64>,
    pub effective_samples: Vec<f64>,
    pub block_length: usize,
    pub sample_count: usize,
}

fn pooled_column(series: &[SampleSeries], k: usize) -> Vec<f64> {
    series.iter().flat_map(|s| s.rows.iter().map(move |r| r.modes[k])).collect()
}

fn mode_index(series: &SampleSeries, label: &str) -> Result<usize, FieldError> {
    series
        .mode_labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| FieldError::MissingMode(label.to_string()))
}

/// Autocorrelation time averaged over replicas, each estimated separately.
fn pooled_tau(series: &[SampleSeries], k: usize) -> f64 {
    let taus: Vec<f64> = series
        .iter()
        .map(|s| integrated_autocorrelation_time(&s.mode_column(k)))
        .collect();
    taus.iter().sum::<f64>() / taus.len() as f64
}

/// Means and covariance of `y^n(H_k)` with block-bootstrap 95% intervals.
pub fn empirical_field_statistics(
    series: &[SampleSeries],
    mode_indices: &[usize],
    resamples: usize,
    seed: u64,
) -> Result<FieldStatistics, FieldError> {
    let first = series.first().ok_or(FieldError::Empty)?;
    for &k in mode_indices {
        if k >= first.mode_labels.len() {
            return Err(FieldError::MissingMode(format!("index {k}")));
        }
    }
    let columns: Vec<Vec<f64>> = mode_indices.iter().map(|&k| pooled_column(series, k)).collect();
    let len = columns.first().map_or(0, Vec::len);
    if len < 2 {
        return Err(FieldError::Empty);
    }
    let taus: Vec<f64> = mode_indices.iter().map(|&k| pooled_tau(series, k)).collect();
    let effective: Vec<f64> = taus.iter().map(|t| len as f64 / t).collect();
    if let Some(&ess) = effective.iter().min_by(|a, b| a.total_cmp(b)) {
        if ess < MIN_EFFECTIVE_SAMPLES {
            return Err(FieldError::InsufficientSamples { ess });
        }
    }
    let tau_max = taus.iter().cloned().fold(1.0, f64::max);
    let block = block_length_for(tau_max, len);
    let kdim = columns.len();
    let rows: Vec<usize> = (0..len).collect();

    let mut means = Vec::with_capacity(kdim);
    let mut mean_ci = Vec::with_capacity(kdim);
    for (i, c) in columns.iter().enumerate() {
        means.push(stats::mean(c));
        let (low, high) = bootstrap_ci(
            &rows,
            |r: &[usize]| r.iter().map(|&t| columns[i][t]).sum::<f64>() / r.len() as f64,
            block,
            resamples,
            seed ^ (i as u64),
        )?;
        mean_ci.push(Interval { low, high });
    }
    let mut covariance = vec![vec![0.0; kdim]; kdim];
    let mut covariance_ci = vec![vec![Interval { low: 0.0, high: 0.0 }; kdim]; kdim];
    for i in 0..kdim {
        for j in i..kdim {
            let c = stats::covariance(&columns[i], &columns[j]);
            let (low, high) = bootstrap_ci(
                &rows,
                |r: &[usize]| {
                    let xi: Vec<f64> = r.iter().map(|&t| columns[i][t]).collect();
                    let xj: Vec<f64> = r.iter().map(|&t| columns[j][t]).collect();
                    stats::covariance(&xi, &xj)
                },
                block,
                resamples,
                seed.wrapping_add(((i * kdim + j) as u64) << 32),
            )?;
            covariance[i][j] = c;
            covariance[j][i] = c;
            covariance_ci[i][j] = Interval { low, high };
            covariance_ci[j][i] = Interval { low, high };
        }
    }
    Ok(FieldStatistics {
        labels: mode_indices.iter().map(|&k| first.mode_labels[k].clone()).collect(),
        means,
        mean_ci,
        covariance,
        covariance_ci,
        autocorrelation_times: taus,
        effective_samples: effective,
        block_length: block,
        sample_count: len,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionEstimate {
    pub n: usize,
    /// Estimate of `E|n^{-1/4} y^n(H)|`.
    pub mean_abs: f64,
    pub ci: Interval,
    pub effective_samples: f64,
}

/// `E|Y^n(H)|` for a zero-mean test function recorded in `series`.
pub fn projection_check(
    series: &[SampleSeries],
    h: &TestFunction,
    resamples: usize,
    seed: u64,
) -> Result<ProjectionEstimate, FieldError> {
    h.require_zero_mean()?;
    let first = series.first().ok_or(FieldError::Empty)?;
    let k = mode_index(first, &h.label())?;
    let n = first.params.n();
    let scale = (n as f64).powf(-0.25);
    let abs: Vec<f64> = pooled_column(series, k).iter().map(|y| scale * y.abs()).collect();
    if abs.is_empty() {
        return Err(FieldError::Empty);
    }
    let tau = series
        .iter()
        .map(|s| {
            let col: Vec<f64> = s.mode_column(k).iter().map(|y| y.abs()).collect();
            integrated_autocorrelation_time(&col)
        })
        .sum::<f64>()
        / series.len() as f64;
    let mean_abs = stats::mean(&abs);
    let (low, high) = bootstrap_ci(&abs, stats::mean, block_length_for(tau, abs.len()), resamples, seed)?;
    Ok(ProjectionEstimate {
        n,
        mean_abs,
        ci: Interval { low, high },
        effective_samples: abs.len() as f64 / tau,
    })
}

/// Per-mode comparison written to `field.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub label: String,
    pub mean: f64,
    pub variance: f64,
    pub variance_ci: Interval,
    pub predicted: f64,
    pub relative_error: f64,
    /// `(variance - predicted) / half-width`.
    pub z_score: f64,
}

pub fn compare_with_prediction(
    stats: &FieldStatistics,
    modes: &[&TestFunction],
    a: f64,
) -> Result<Vec<ModeComparison>, FieldError> {
    stats
        .labels
        .iter()
        .zip(modes)
        .enumerate()
        .map(|(i, (label, h))| {
            let predicted = predicted_covariance(h, h, a)?;
            let variance = stats.covariance[i][i];
            let ci = stats.covariance_ci[i][i].clone();
            let hw = ci.half_width();
            Ok(ModeComparison {
                label: label.clone(),
                mean: stats.means[i],
                variance,
                z_score: if hw > 0.0 { (variance - predicted) / hw } else { f64::INFINITY },
                relative_error: (variance - predicted).abs() / predicted,
                variance_ci: ci,
                predicted,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_invariants() {
        for n in [18usize, 64, 512] {
            for k in 1..=MAX_WAVENUMBER {
                if 2 * k as usize >= n {
                    continue;
                }
                for h in [TestFunction::cosine(n, k).unwrap(), TestFunction::sine(n, k).unwrap()] {
                    assert!(h.mean.abs() < 1e-12);
                    assert!((h.l2_norm - 1.0).abs() < 1e-12);
                }
            }
            let c = TestFunction::constant(n);
            assert_eq!(c.mean, 1.0);
        }
        assert!(TestFunction::cosine(64, 9).is_err());
        assert!(TestFunction::cosine(64, 0).is_err());
        assert!(TestFunction::sine(8, 4).is_err());
    }

    #[test]
    fn predicted_covariance_examples() {
        let h = TestFunction::cosine(64, 1).unwrap();
        let v = predicted_covariance(&h, &h, 0.1).unwrap();
        let oracle = 0.25 + 0.1 / (2.0 * (2.0 * PI).powi(2));
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.2512665).abs() < 1e-7);
        let g = TestFunction::cosine(64, 2).unwrap();
        assert_eq!(predicted_covariance(&h, &g, 0.1).unwrap(), 0.0);
        let s = TestFunction::sine(64, 1).unwrap();
        assert_eq!(predicted_covariance(&h, &s, 0.1).unwrap(), 0.0);
        assert_eq!(predicted_covariance(&h, &h, 0.0).unwrap(), 0.25);
        let c = TestFunction::constant(64);
        assert!(matches!(predicted_covariance(&c, &h, 0.1), Err(FieldError::NonZeroMean(_))));
    }

    #[test]
    fn predicted_covariance_is_bilinear_and_symmetric() {
        let n = 64;
        let basis: Vec<TestFunction> = (1..=3)
            .flat_map(|k| [TestFunction::cosine(n, k).unwrap(), TestFunction::sine(n, k).unwrap()])
            .collect();
        let h = TestFunction::combination(&[(0.7, &basis[0]), (-1.3, &basis[3]), (0.4, &basis[4])]).unwrap();
        let g = TestFunction::combination(&[(2.0, &basis[0]), (0.5, &basis[4]), (1.0, &basis[5])]).unwrap();
        let a = 0.3;
        let hg = predicted_covariance(&h, &g, a).unwrap();
        assert!((hg - predicted_covariance(&g, &h, a).unwrap()).abs() < 1e-15);
        // Direct expansion over the basis.
        let direct = 0.7 * 2.0 * predicted_covariance(&basis[0], &basis[0], a).unwrap()
            + 0.4 * 0.5 * predicted_covariance(&basis[4], &basis[4], a).unwrap();
        assert!((hg - direct).abs() < 1e-14);
        let two_h = TestFunction::combination(&[(2.0, &h)]).unwrap();
        assert!((predicted_covariance(&two_h, &g, a).unwrap() - 2.0 * hg).abs() < 1e-14);
        // Grid inner product matches the coefficient inner product.
        let grid: f64 = h.samples.iter().zip(&g.samples).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!((grid - (0.7 * 2.0 + 0.4 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn labels_are_stable() {
        assert_eq!(TestFunction::cosine(16, 2).unwrap().label(), "cos2");
        assert_eq!(TestFunction::sine(16, 1).unwrap().label(), "sin1");
        assert_eq!(TestFunction::constant(16).label(), "const");
    }
}
