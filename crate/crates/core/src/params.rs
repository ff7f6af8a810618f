//! Derived exponents and constants of the problem.

use alloc::format;

use crate::fowler::System;
use crate::math::{fma, gamma_half, powf, PI};
use crate::{Error, Result};

/// All constants derived from `(n, p, μ₁, μ₂, β)`.
///
/// Construct with [`Params::new`] (or [`compute_params`]); the fields are plain data
/// and never change afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub n: u32,
    pub p: f64,
    /// `q = (p - 1)/2`, kept explicitly: `q < 1` for `n >= 4` and `q > 1` for `n = 3`.
    pub q: f64,
    /// `δ = 2/(p - 1)`, the decay rate of the homogeneous singular solution.
    pub delta: f64,
    /// Friction of the Fowler system, `4/(p-1) - n + 2`.
    pub tau: f64,
    /// Linear coefficient of the Fowler system, `δ(n - 2 - δ)`.
    pub sigma: f64,
    /// Amplitude of the explicit singular solution `C₀|x|^{-δ}`.
    pub c0: f64,
    /// Weight exponent of the Kelvin-transformed system, `p(n-2) - (n+2)`.
    pub alpha: f64,
    pub delta0: f64,
    pub tau0: f64,
    pub sigma0: f64,
    /// Area of the unit sphere `S^{n-1}`.
    pub sphere_area: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
    /// `p` equals the critical exponent `(n+2)/(n-2)` (τ = 0).
    pub is_critical: bool,
}

/// Residuals of the closed-form identities linking the derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    /// `|C₀^{p-1} - σ| / σ`
    pub c0_power: f64,
    /// `|δ + δ₀ - (n - 2)|`
    pub delta_sum: f64,
    /// `|τ₀ + τ|`
    pub tau_flip: f64,
    /// `|σ₀ - σ|`
    pub sigma_match: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.c0_power.max(self.delta_sum).max(self.tau_flip).max(self.sigma_match)
    }
}

/// Lower end `n/(n-2)` of the admitted exponent range (excluded).
pub fn lower_exponent(n: u32) -> f64 {
    f64::from(n) / f64::from(n - 2)
}

/// Critical Sobolev exponent `(n+2)/(n-2)` (admitted).
pub fn critical_exponent(n: u32) -> f64 {
    f64::from(n + 2) / f64::from(n - 2)
}

const CRITICAL_RTOL: f64 = 1e-14;

/// Validates the inputs and evaluates every derived constant.
pub fn compute_params(n: u32, p: f64, mu1: f64, mu2: f64, beta: f64) -> Result<Params> {
    if n < 3 {
        return Err(Error::Dimension { n });
    }
    let lower = lower_exponent(n);
    let upper = critical_exponent(n);
    if !(p > lower) {
        return Err(Error::Exponent {
            p,
            n,
            bound: "n/(n-2)",
            value: lower,
            fraction: format!("{}/{}", n, n - 2),
        });
    }
    let is_critical = (p - upper).abs() <= CRITICAL_RTOL * upper;
    if p > upper && !is_critical {
        return Err(Error::Exponent {
            p,
            n,
            bound: "(n+2)/(n-2)",
            value: upper,
            fraction: format!("{}/{}", n + 2, n - 2),
        });
    }
    for (name, value) in [("mu1", mu1), ("mu2", mu2)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::Coefficient { name, value });
        }
    }
    // β = 0 is the decoupled limit; the coupled problem needs β > 0.
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Coefficient { name: "beta", value: beta });
    }

    let nf = f64::from(n);
    let q = (p - 1.0) / 2.0;
    let delta = 2.0 / (p - 1.0);
    let mut tau = 4.0 / (p - 1.0) - nf + 2.0;
    // (n-2)p - n vanishes at the lower bound; a fused form keeps σ and C₀ accurate
    // relative to their size there, where δ(n-2-δ) would cancel.
    let excess = fma(nf - 2.0, p, -nf);
    let sigma = 2.0 * excess / ((p - 1.0) * (p - 1.0));
    let c0 = powf(
        2.0 * (nf - 2.0) / ((p - 1.0) * (p - 1.0)) * (excess / (nf - 2.0)),
        1.0 / (p - 1.0),
    );
    let alpha = fma(p, nf - 2.0, -(nf + 2.0));
    // 2 + α is the same excess; the brackets below are put over n - 2 before
    // subtracting so the cancellation happens in one rounding
    let delta0 = excess / (p - 1.0);
    let mut tau0 = fma(-p, nf - 2.0, nf + 2.0 + 2.0 * alpha) / (p - 1.0);
    let sigma0 = excess * (nf - 2.0) / ((p - 1.0) * (p - 1.0)) * ((excess - alpha) / (nf - 2.0));
    if is_critical {
        tau = 0.0;
        tau0 = 0.0;
    }
    let sphere_area = 2.0 * powf(PI, nf / 2.0) / gamma_half(n);

    Ok(Params {
        n,
        p,
        q,
        delta,
        tau,
        sigma,
        c0,
        alpha,
        delta0,
        tau0,
        sigma0,
        sphere_area,
        mu1,
        mu2,
        beta,
        is_critical,
    })
}

impl Params {
    pub fn new(n: u32, p: f64, mu1: f64, mu2: f64, beta: f64) -> Result<Self> {
        compute_params(n, p, mu1, mu2, beta)
    }

    /// Friction coefficient of the given Fowler system (τ or τ₀).
    pub fn friction(&self, system: System) -> f64 {
        match system {
            System::Standard => self.tau,
            System::Kelvin => self.tau0,
        }
    }

    /// Linear coefficient of the given Fowler system (σ or σ₀).
    pub fn linear(&self, system: System) -> f64 {
        match system {
            System::Standard => self.sigma,
            System::Kelvin => self.sigma0,
        }
    }

    pub fn identity_residuals(&self) -> IdentityResiduals {
        let nf = f64::from(self.n);
        IdentityResiduals {
            c0_power: (powf(self.c0, self.p - 1.0) - self.sigma).abs() / self.sigma,
            delta_sum: (self.delta + self.delta0 - (nf - 2.0)).abs(),
            tau_flip: (self.tau0 + self.tau).abs(),
            sigma_match: (self.sigma0 - self.sigma).abs(),
        }
    }
}
