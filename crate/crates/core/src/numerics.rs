//! Numerically stable special-function helpers shared by the analysis modules.

#![allow(clippy::excessive_precision)]

/// `log(sum(exp(xs)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(1 - exp(x))` for `x <= 0`, accurate on both ends.
#[inline]
pub fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Stirling-series error `log k! - [(k + 1/2) log k - k + log(2 pi)/2]`.
///
/// Exact table for small half-integers and the asymptotic series beyond,
/// as in Loader's saddle-point binomial algorithm.
pub fn stirling_error(k: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    // stirling_error(k/2) for k = 0..30
    const TABLE: [f64; 31] = [
        0.0,
        0.153_426_409_720_027_345_291_6,
        0.081_061_466_795_327_258_219_67,
        0.054_814_121_051_917_653_896_7,
        0.041_340_695_955_409_294_093_82,
        0.033_162_873_519_936_287_485_33,
        0.027_677_925_684_998_339_148_78,
        0.023_746_163_656_297_495_924_14,
        0.020_790_672_103_765_093_111_52,
        0.018_488_450_532_673_185_237_71,
        0.016_644_691_189_821_192_163_19,
        0.015_134_973_221_917_378_231_63,
        0.013_876_128_823_070_747_998_07,
        0.012_810_465_242_920_226_702_81,
        0.011_896_709_945_891_770_094_95,
        0.011_104_559_758_206_917_322_79,
        0.010_411_265_261_972_096_497_48,
        0.009_799_416_126_158_803_298_39,
        0.009_255_462_182_712_732_917_73,
        0.008_768_700_134_139_385_462_95,
        0.008_330_563_433_362_871_256_47,
        0.007_934_114_564_314_020_547_18,
        0.007_573_675_487_951_840_794_97,
        0.007_244_554_301_320_383_179_54,
        0.006_942_840_107_209_529_865_66,
        0.006_665_247_032_707_682_442_17,
        0.006_408_994_188_004_207_068_44,
        0.006_171_712_263_039_457_647_53,
        0.005_951_370_112_758_847_735_62,
        0.005_746_216_513_010_115_682_02,
        0.005_554_733_551_962_801_371_04,
    ];
    if k <= 15.0 {
        let nn = k + k;
        if nn == nn.floor() {
            return TABLE[nn as usize];
        }
        return statrs::function::gamma::ln_gamma(k + 1.0)
            - (k + 0.5) * k.ln()
            + k
            - 0.5 * (2.0 * std::f64::consts::PI).ln();
    }
    let nn = k * k;
    if k > 500.0 {
        return (S0 - S1 / nn) / k;
    }
    if k > 80.0 {
        return (S0 - (S1 - S2 / nn) / nn) / k;
    }
    if k > 35.0 {
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / k;
    }
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / k
}

/// Deviance term `x log(x/m) + m - x`, computed without cancellation.
pub fn binomial_deviance(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let s0 = (x - m) * v;
        let mut s = s0;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else if x == 0.0 {
        m
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `log[C(n, k) p^k (1-p)^(n-k)]` via the saddle-point expansion.
pub fn ln_binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    assert!(k <= n, "k = {k} exceeds n = {n}");
    let q = 1.0 - p;
    if k == 0 {
        return n as f64 * q.ln();
    }
    if k == n {
        return n as f64 * p.ln();
    }
    let (nf, kf) = (n as f64, k as f64);
    let lc = stirling_error(nf)
        - stirling_error(kf)
        - stirling_error(nf - kf)
        - binomial_deviance(kf, nf * p)
        - binomial_deviance(nf - kf, nf * q);
    let lf = (2.0 * std::f64::consts::PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `log[C(n, k) / 2^n]`.
pub fn ln_binomial_half(k: u64, n: u64) -> f64 {
    ln_binomial_pmf(k, n, 0.5)
}

/// `log C(n, k)` through the log-Gamma function.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// One Gauss-Kronrod 7/15 panel: (Kronrod estimate, |Kronrod - Gauss|).
pub fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut k = GK_WEIGHTS_K[7] * fc;
    let mut g = GK_WEIGHTS_G[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WEIGHTS_K[i] * s;
        if i % 2 == 1 {
            g += GK_WEIGHTS_G[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
}

/// Globally adaptive Gauss-Kronrod integration on `[lo, hi]`.
///
/// Bisects the panel with the largest error until the summed error is below
/// `abs_tol + rel_tol * |I|`; returns `None` if `max_panels` is exhausted.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Option<QuadratureResult> {
    let (v, e) = gauss_kronrod_15(&f, lo, hi);
    let mut panels = vec![(lo, hi, v, e)];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Some(QuadratureResult {
                value: total,
                error_estimate: err,
                panels: panels.len(),
            });
        }
        if panels.len() >= max_panels {
            return None;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("non-empty");
        let (a, b, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (a + b);
        let (v1, e1) = gauss_kronrod_15(&f, a, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, b);
        panels.push((a, mid, v1, e1));
        panels.push((mid, b, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lse_basics() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_relative_eq!(log_sum_exp(&[0.0, 0.0]), 2f64.ln());
        assert_relative_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln());
        assert_relative_eq!(log_add_exp(-1e4, 3.0), 3.0);
        assert_relative_eq!(log1m_exp(-1e-20), (1e-20f64).ln(), max_relative = 1e-12);
        assert_relative_eq!(log1m_exp(-50.0), -(-50f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn binomial_half_matches_exact_small_cases() {
        // C(10, 4) / 1024 = 210 / 1024
        assert_relative_eq!(
            ln_binomial_half(4, 10),
            (210.0f64 / 1024.0).ln(),
            max_relative = 1e-14
        );
        assert_relative_eq!(ln_binomial_half(0, 10), -10.0 * 2f64.ln(), max_relative = 1e-15);
        for n in [1u64, 5, 33, 100, 1000] {
            for k in 0..=n {
                let a = ln_binomial_half(k, n);
                let b = ln_choose(n, k) - n as f64 * 2f64.ln();
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "n={n} k={k} {a} {b}");
            }
        }
    }

    #[test]
    fn binomial_half_sums_to_one() {
        for n in [7u64, 64, 4096] {
            let v: Vec<f64> = (0..=n).map(|k| ln_binomial_half(k, n)).collect();
            assert!(log_sum_exp(&v).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn stirling_error_table_agrees_with_series() {
        for k in [15.5f64, 16.0, 40.0, 100.0, 1000.0] {
            let direct = statrs::function::gamma::ln_gamma(k + 1.0) - (k + 0.5) * k.ln() + k
                - 0.5 * (2.0 * std::f64::consts::PI).ln();
            assert!((stirling_error(k) - direct).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn quadrature_gaussian() {
        let r = integrate(|x: f64| (-x * x).exp(), -10.0, 10.0, 1e-14, 1e-13, 1000).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::PI.sqrt(), max_relative = 1e-13);
    }
}
