//! Scalar potentials and macroscopic rates of the critical reaction-diffusion
//! model, with closed-form derivatives.
//!
//! Notation follows the model: `U` is the Glauber effective potential on
//! `[-1/2, 1/2]`, `U0(rho) = U(rho - 1/2)`, `E` is the Bernoulli entropy
//! offset by `log 2`, `W = E - U0`, and `V` is the quartic limit potential.
//! All evaluators use the `0 log 0 = 0` convention at the boundary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("|theta| = {theta} exceeds sqrt(n) = {sqrt_n} (tilt would leave [0,1])")]
    ThetaOutOfRange { theta: f64, sqrt_n: f64 },
    #[error("lattice size must be at least 2, got {0}")]
    LatticeTooSmall(usize),
    #[error("Glauber strength must be positive and finite, got {0}")]
    NonPositiveStrength(f64),
    #[error("{what} = {value} outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },
}

/// Lattice size, criticality parameter, Glauber strength and the derived tilt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    n: usize,
    theta: f64,
    a: f64,
    gamma: f64,
}

impl ModelParams {
    pub fn new(n: usize, theta: f64, a: f64) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::LatticeTooSmall(n));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(ModelError::NonPositiveStrength(a));
        }
        let gamma = gamma_of(n, theta)?;
        Ok(Self { n, theta, a, gamma })
    }

    /// Parameters at the degenerate tilt `gamma = 0` (`theta = sqrt(n)`).
    pub fn untilted(n: usize, a: f64) -> Result<Self, ModelError> {
        let mut p = Self::new(n, (n as f64).sqrt(), a)?;
        p.gamma = 0.0;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Glauber tilt `gamma_n = (1 - theta / sqrt n) / 2`.
    pub fn gamma_glauber(&self) -> f64 {
        self.gamma
    }

    pub fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }
}

/// `(1 - theta / sqrt n) / 2`, the critical Glauber tilt.
pub fn gamma_of(n: usize, theta: f64) -> Result<f64, ModelError> {
    let sqrt_n = (n as f64).sqrt();
    if !theta.is_finite() || theta.abs() > sqrt_n * (1.0 + 4.0 * f64::EPSILON) {
        return Err(ModelError::ThetaOutOfRange { theta, sqrt_n });
    }
    Ok(((1.0 - theta / sqrt_n) / 2.0).clamp(0.0, 1.0))
}

/// Value and first four derivatives of a scalar function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

impl Jet {
    /// The `k`-th derivative, `k = 0..=4`.
    pub fn derivative(&self, k: usize) -> f64 {
        match k {
            0 => self.value,
            1 => self.d1,
            2 => self.d2,
            3 => self.d3,
            4 => self.d4,
            _ => panic!("jet holds derivatives up to order 4, asked for {k}"),
        }
    }
}

impl std::ops::Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        Jet {
            value: self.value - rhs.value,
            d1: self.d1 - rhs.d1,
            d2: self.d2 - rhs.d2,
            d3: self.d3 - rhs.d3,
            d4: self.d4 - rhs.d4,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<(), ModelError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(ModelError::Domain {
            what: "gamma",
            value: gamma,
            domain: "[0, 1]",
        });
    }
    Ok(())
}

/// `x log x` with `0 log 0 = 0`.
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

const TAYLOR_CUTOFF: f64 = 1e-4;

/// Glauber effective potential
/// `U(r) = [(1 + 2 g r) log(1 + 2 g r) + (1 - 2 g r) log(1 - 2 g r)] / g`
/// on `r` in `[-1/2, 1/2]`, with derivatives.
pub fn eval_u(rho: f64, gamma: f64) -> Result<Jet, ModelError> {
    if !(-0.5..=0.5).contains(&rho) {
        return Err(ModelError::Domain {
            what: "rho",
            value: rho,
            domain: "[-1/2, 1/2]",
        });
    }
    check_gamma(gamma)?;
    let u = 2.0 * gamma * rho;
    let u2 = u * u;
    let value = if u.abs() < TAYLOR_CUTOFF {
        // (1+u)log(1+u) + (1-u)log(1-u) = u^2 + u^4/6 + u^6/15 + ..., and u^2/g = 4 g r^2.
        4.0 * gamma * rho * rho * (1.0 + u2 / 6.0 + u2 * u2 / 15.0)
    } else {
        (xlogx(1.0 + u) + xlogx(1.0 - u)) / gamma
    };
    let one_m = 1.0 - u2;
    Ok(Jet {
        value,
        d1: 2.0 * ((1.0 + u).ln() - (1.0 - u).ln()),
        d2: 8.0 * gamma / one_m,
        d3: 32.0 * gamma * gamma * u / (one_m * one_m),
        d4: 64.0 * gamma.powi(3) * (1.0 + 3.0 * u2) / one_m.powi(3),
    })
}

/// `U0(rho) = U(rho - 1/2)` on `[0, 1]`.
pub fn eval_u0(rho: f64, gamma: f64) -> Result<Jet, ModelError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(ModelError::Domain {
            what: "rho",
            value: rho,
            domain: "[0, 1]",
        });
    }
    eval_u(rho - 0.5, gamma)
}

/// `E(rho) = rho log rho + (1 - rho) log(1 - rho) + log 2`.
pub fn eval_e(rho: f64) -> Result<Jet, ModelError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(ModelError::Domain {
            what: "rho",
            value: rho,
            domain: "[0, 1]",
        });
    }
    let q = 1.0 - rho;
    Ok(Jet {
        value: xlogx(rho) + xlogx(q) + std::f64::consts::LN_2,
        d1: rho.ln() - q.ln(),
        d2: 1.0 / (rho * q),
        d3: -1.0 / (rho * rho) + 1.0 / (q * q),
        d4: 2.0 / rho.powi(3) + 2.0 / q.powi(3),
    })
}

/// `W = E - U0` at the tilt of `params`.
pub fn eval_w(rho: f64, params: &ModelParams) -> Result<Jet, ModelError> {
    eval_w_at(rho, params.gamma_glauber())
}

/// `W = E - U0` at an explicit tilt.
pub fn eval_w_at(rho: f64, gamma: f64) -> Result<Jet, ModelError> {
    Ok(eval_e(rho)? - eval_u0(rho, gamma)?)
}

/// Macroscopic birth and death rates
/// `B(rho) = (1 - rho)[1 + g(2 rho - 1)]^2`, `D(rho) = rho[1 - g(2 rho - 1)]^2`.
pub fn macro_rates(rho: f64, gamma: f64) -> Result<(f64, f64), ModelError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(ModelError::Domain {
            what: "rho",
            value: rho,
            domain: "[0, 1]",
        });
    }
    check_gamma(gamma)?;
    let s = gamma * (2.0 * rho - 1.0);
    Ok(((1.0 - rho) * (1.0 + s).powi(2), rho * (1.0 - s).powi(2)))
}

/// Quartic limit potential `V(y) = theta y^2 + y^4 / 2`.
pub fn eval_v(y: f64, theta: f64) -> f64 {
    theta * y * y + 0.5 * y.powi(4)
}

pub fn eval_v_prime(y: f64, theta: f64) -> f64 {
    2.0 * theta * y + 2.0 * y.powi(3)
}
