//! RAPM model parameters, the log-moneyness change of variables and the
//! closed-form pieces of the problem.
//!
//! The price `V(S, t)` of a European call is nonlinear on `(0, t*)` and
//! follows the classical Black–Scholes equation on `(t*, T)`. Under
//!
//! ```text
//! x = ln(S/K),   τ = σ²(T − t)/2,   u = e^{−x} V / K
//! ```
//!
//! the nonlinear phase becomes
//!
//! ```text
//! u_τ = (u_xx + u_x) + C_R (u_xx + u_x)^{4/3} + D u_x,   D = 2r/σ²,
//! ```
//!
//! integrated forward in `τ` from `τ* = C/(2M)` to `τ_max = σ²T/2`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, ExistenceCondition, Result};

/// Standard normal cumulative distribution function.
///
/// Absolute accuracy is better than `1e-14` over the real line.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Market and model parameters of the RAPM model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RapmParams {
    rate: f64,
    sigma: f64,
    strike: f64,
    expiry: f64,
    risk_premium: f64,
    txn_cost: f64,
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

fn check_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and >= 0",
        })
    }
}

impl RapmParams {
    /// Validates the parameters, including both existence conditions.
    ///
    /// `risk_premium = 0` is the linear Black–Scholes limit and is accepted
    /// for any `txn_cost >= 0`.
    pub fn new(rate: f64, sigma: f64, strike: f64, expiry: f64, risk_premium: f64, txn_cost: f64) -> Result<Self> {
        check_positive("rate", rate)?;
        check_positive("sigma", sigma)?;
        check_positive("strike", strike)?;
        check_positive("expiry", expiry)?;
        check_nonnegative("risk_premium", risk_premium)?;
        check_nonnegative("txn_cost", txn_cost)?;

        if risk_premium > 0.0 {
            let bound_a = sigma * sigma * txn_cost * expiry;
            if risk_premium >= bound_a {
                return Err(Error::ExistenceViolation {
                    condition: ExistenceCondition::A,
                    lhs: risk_premium,
                    rhs: bound_a,
                });
            }
            let product = risk_premium * txn_cost;
            if product >= PI / 8.0 {
                return Err(Error::ExistenceViolation {
                    condition: ExistenceCondition::B,
                    lhs: product,
                    rhs: PI / 8.0,
                });
            }
        }

        Ok(Self {
            rate,
            sigma,
            strike,
            expiry,
            risk_premium,
            txn_cost,
        })
    }

    /// The parameter set used throughout the numerical experiments:
    /// `r = 0.1, σ = 0.2, K = 75, T = 1, C = 0.01, M = 2`.
    pub fn reference() -> Self {
        Self::new(0.1, 0.2, 75.0, 1.0, 0.01, 2.0).expect("reference parameters are valid")
    }

    /// Same market data with the risk premium set to zero (linear limit).
    pub fn linear_limit(&self) -> Self {
        Self {
            risk_premium: 0.0,
            ..*self
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn expiry(&self) -> f64 {
        self.expiry
    }

    pub fn risk_premium(&self) -> f64 {
        self.risk_premium
    }

    pub fn txn_cost(&self) -> f64 {
        self.txn_cost
    }

    pub fn derived(&self) -> DerivedConstants {
        derive_constants(self)
    }
}

/// Quantities derived from [`RapmParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Switching time `t* = T − C/(Mσ²)` in years.
    pub t_star: f64,
    /// `τ* = C/(2M)`.
    pub tau_star: f64,
    /// `τ_max = σ²T/2`, the transformed time of `t = 0`.
    pub tau_max: f64,
    /// Convection coefficient `D = 2r/σ²`.
    pub d_coeff: f64,
    /// Nonlinear coefficient `C_R = 3 (C²M / 2π)^{1/3}`.
    pub c_r: f64,
}

pub fn derive_constants(p: &RapmParams) -> DerivedConstants {
    let s2 = p.sigma * p.sigma;
    let (t_star, tau_star) = if p.risk_premium == 0.0 {
        (p.expiry, 0.0)
    } else {
        (
            p.expiry - p.risk_premium / (p.txn_cost * s2),
            p.risk_premium / (2.0 * p.txn_cost),
        )
    };
    DerivedConstants {
        t_star,
        tau_star,
        tau_max: 0.5 * s2 * p.expiry,
        d_coeff: 2.0 * p.rate / s2,
        c_r: 3.0 * (p.risk_premium * p.risk_premium * p.txn_cost / (2.0 * PI)).cbrt(),
    }
}

/// Truncated computational domain `[-R, R]` in log-moneyness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedDomain {
    radius: f64,
}

impl TruncatedDomain {
    pub const DEFAULT_RADIUS: f64 = 3.0;

    pub fn new(radius: f64) -> Result<Self> {
        check_positive("radius", radius)?;
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn left(&self) -> f64 {
        -self.radius
    }

    pub fn right(&self) -> f64 {
        self.radius
    }

    /// Open spot interval `(K e^{−R}, K e^{R})` covered by the domain.
    pub fn spot_range(&self, strike: f64) -> (f64, f64) {
        (strike * (-self.radius).exp(), strike * self.radius.exp())
    }
}

impl Default for TruncatedDomain {
    fn default() -> Self {
        Self {
            radius: Self::DEFAULT_RADIUS,
        }
    }
}

/// `(S, t, V) -> (x, τ, u)`.
pub fn to_transformed(s: f64, t: f64, v: f64, p: &RapmParams) -> Result<(f64, f64, f64)> {
    if !(s > 0.0) {
        return Err(Error::NonpositiveSpot(s));
    }
    let x = (s / p.strike).ln();
    let tau = 0.5 * p.sigma * p.sigma * (p.expiry - t);
    let u = v / s;
    Ok((x, tau, u))
}

/// `(x, τ, u) -> (S, t, V)`.
pub fn from_transformed(x: f64, tau: f64, u: f64, p: &RapmParams) -> (f64, f64, f64) {
    let s = p.strike * x.exp();
    let t = p.expiry - 2.0 * tau / (p.sigma * p.sigma);
    (s, t, s * u)
}

/// Transformed Black–Scholes call value at time-to-expiry `τ > 0`:
/// `Φ(d₁) − e^{−(Dτ + x)} Φ(d₂)`, with
/// `d₁ = (x + (D + 1)τ)/√(2τ)` and `d₂ = d₁ − √(2τ)`.
///
/// At `τ = 0` this is the transformed payoff `max(1 − e^{−x}, 0)`.
pub fn transformed_bs(x: f64, tau: f64, d_coeff: f64) -> f64 {
    if tau <= 0.0 {
        return transformed_payoff(x, 0.0, d_coeff);
    }
    let spread = (2.0 * tau).sqrt();
    let d1 = (x + (d_coeff + 1.0) * tau) / spread;
    let d2 = d1 - spread;
    if d1 < -TAIL_SWITCH {
        // Φ(d1) − e^{−Dτ−x} Φ(d2) = φ(d1) [R(−d1) − R(−d2)], since
        // e^{−Dτ−x} φ(d2) = φ(d1); this avoids cancelling two tiny terms.
        let density = (-0.5 * d1 * d1).exp() / (2.0 * PI).sqrt();
        return (density * (mills_ratio(-d1) - mills_ratio(-d2))).max(0.0);
    }
    std_normal_cdf(d1) - (-(d_coeff * tau + x)).exp() * std_normal_cdf(d2)
}

/// Below `d1 = −TAIL_SWITCH` the transformed price is evaluated through the
/// Mills ratio.
const TAIL_SWITCH: f64 = 5.0;

/// Mills ratio `R(z) = (1 − Φ(z)) / φ(z)` for `z ≥ TAIL_SWITCH`, by the
/// Laplace continued fraction evaluated bottom-up.
fn mills_ratio(z: f64) -> f64 {
    let mut tail = z;
    for k in (1..=60).rev() {
        tail = z + k as f64 / tail;
    }
    1.0 / tail
}

/// `max(e^x − e^{−Dτ}, 0) e^{−x}`, the payoff-shaped profile used when the
/// switching time coincides with expiry.
pub fn transformed_payoff(x: f64, tau: f64, d_coeff: f64) -> f64 {
    (1.0 - (-(d_coeff * tau + x)).exp()).max(0.0)
}

/// Transformed price at the switching time `τ*`.
pub fn switching_profile(x: f64, p: &RapmParams) -> Result<f64> {
    let dc = p.derived();
    if !(dc.tau_star > 0.0) {
        return Err(Error::DegenerateSwitch);
    }
    Ok(transformed_bs(x, dc.tau_star, dc.d_coeff))
}

/// Initial data for the nonlinear phase: the switching profile when `τ* > 0`,
/// the payoff otherwise.
pub fn initial_profile(x: f64, p: &RapmParams) -> f64 {
    let dc = p.derived();
    if dc.tau_star > 0.0 {
        transformed_bs(x, dc.tau_star, dc.d_coeff)
    } else {
        transformed_payoff(x, 0.0, dc.d_coeff)
    }
}

/// Classical Black–Scholes call price at spot `s` and calendar time `t`.
///
/// Returns the payoff `max(S − K, 0)` for `t >= T`.
pub fn bs_call_price(s: f64, t: f64, p: &RapmParams) -> f64 {
    if !(s > 0.0) {
        return 0.0;
    }
    let remaining = p.expiry - t;
    if remaining <= 0.0 {
        return (s - p.strike).max(0.0);
    }
    let vol_sqrt = p.sigma * remaining.sqrt();
    let d1 = ((s / p.strike).ln() + (p.rate + 0.5 * p.sigma * p.sigma) * remaining) / vol_sqrt;
    let d2 = d1 - vol_sqrt;
    s * std_normal_cdf(d1) - p.strike * (-p.rate * remaining).exp() * std_normal_cdf(d2)
}
