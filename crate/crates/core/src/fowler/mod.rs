//! The autonomous Fowler system and its Kelvin twin.
//!
//! With `t = -ln r` and `wᵢ = r^δ uᵢ`, radial solutions satisfy
//!
//! ```text
//! w₁'' + τ w₁' - σ w₁ + μ₁ w₁^{2q+1} + β w₁^q w₂^{q+1} = 0
//! w₂'' + τ w₂' - σ w₂ + μ₂ w₂^{2q+1} + β w₂^q w₁^{q+1} = 0
//! ```
//!
//! The Kelvin-transformed problem gives the same system with `(τ₀, σ₀) = (-τ, σ)`.
//! Phase vectors are ordered `[w₁, w₁', w₂, w₂']`.

mod equilibria;
mod integrate;
mod shoot;

pub use equilibria::{equilibria, jacobian, linearize, EquilibriumInfo, EquilibriumKind};
pub use integrate::{integrate, IntegrateOptions};
pub use shoot::{corollary_violations, shoot, shoot_with, ShootOptions};

pub(crate) use integrate::hermite;

use alloc::vec::Vec;

use crate::math::{absorbing_product, abs, powf};
use crate::{Error, Params, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FowlerState {
    pub t: f64,
    pub w1: f64,
    pub dw1: f64,
    pub w2: f64,
    pub dw2: f64,
}

impl FowlerState {
    pub const fn new(t: f64, w1: f64, dw1: f64, w2: f64, dw2: f64) -> Self {
        FowlerState { t, w1, dw1, w2, dw2 }
    }

    pub fn from_vector(t: f64, y: [f64; 4]) -> Self {
        FowlerState { t, w1: y[0], dw1: y[1], w2: y[2], dw2: y[3] }
    }

    pub fn vector(&self) -> [f64; 4] {
        [self.w1, self.dw1, self.w2, self.dw2]
    }

    /// Closed positive cone `w₁, w₂ >= 0`.
    pub fn in_cone(&self) -> bool {
        self.w1 >= 0.0 && self.w2 >= 0.0
    }

    /// Same state with the components swapped.
    pub fn swapped(&self) -> Self {
        FowlerState { t: self.t, w1: self.w2, dw1: self.dw2, w2: self.w1, dw2: self.dw1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum System {
    /// Fowler variables of the original problem (friction τ > 0).
    Standard,
    /// Fowler variables of the Kelvin transform (friction τ₀ = -τ).
    Kelvin,
}

impl System {
    pub fn other(self) -> Self {
        match self {
            System::Standard => System::Kelvin,
            System::Kelvin => System::Standard,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            System::Standard => "standard",
            System::Kelvin => "kelvin",
        }
    }
}

/// Equilibria are addressed as the origin or by their index in a [`crate::RootSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquilibriumId {
    Origin,
    Root(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    ReachedTEnd,
    /// Velocity and right-hand side stayed below threshold over the detection window.
    /// `shoot` fills in which equilibrium was reached.
    ConvergedToEquilibrium(Option<EquilibriumId>),
    LeftPositiveCone,
    Unbounded,
    /// The step size collapsed (or the step budget ran out) at time `t`.
    StepFailure { t: f64, h: f64 },
}

impl Status {
    pub fn is_converged(&self) -> bool {
        matches!(self, Status::ConvergedToEquilibrium(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { abs: 1e-10, rel: 1e-10 }
    }
}

/// Localized crossing of `w_component = 0`: `w(t_lo) >= 0 > w(t_hi)` on the dense output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeExit {
    /// 1 or 2.
    pub component: u8,
    pub t_lo: f64,
    pub t_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Strictly increasing in `t`.
    pub samples: Vec<FowlerState>,
    pub status: Status,
    pub tolerances: Tolerances,
    pub system: System,
    pub cone_exit: Option<ConeExit>,
    /// Equilibrium the integration departed from, when launched on its unstable manifold.
    pub launched_from: Option<EquilibriumId>,
    /// Set by a Kelvin reversal: `status` then describes the first sample's end and
    /// `launched_from` the last sample's end.
    pub time_reversed: bool,
}

/// Value and time derivative of the dense output at some `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSample {
    pub state: FowlerState,
    pub derivative: [f64; 4],
}

impl Trajectory {
    pub fn first(&self) -> &FowlerState {
        &self.samples[0]
    }

    pub fn last(&self) -> &FowlerState {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn t_span(&self) -> (f64, f64) {
        (self.first().t, self.last().t)
    }

    /// Quintic Hermite interpolation between samples, using the vector field for
    /// first and second time derivatives at the nodes.
    pub fn dense(&self, params: &Params, t: f64) -> Option<DenseSample> {
        let (t0, t1) = self.t_span();
        if !(t >= t0 && t <= t1) {
            return None;
        }
        if self.samples.len() == 1 {
            let s = self.samples[0];
            return Some(DenseSample { state: s, derivative: field(&s.vector(), params, self.system) });
        }
        let idx = match self.samples.partition_point(|s| s.t <= t) {
            0 => 0,
            i if i >= self.samples.len() => self.samples.len() - 2,
            i => i - 1,
        };
        let a = &self.samples[idx];
        let b = &self.samples[idx + 1];
        let (y, dy) = hermite(a, b, params, self.system, t);
        Some(DenseSample { state: FowlerState::from_vector(t, y), derivative: dy })
    }

    /// Resamples onto `count` uniformly spaced times covering `[t_start, t_stop]`.
    pub fn resample_uniform(
        &self,
        params: &Params,
        t_start: f64,
        t_stop: f64,
        count: usize,
    ) -> Result<Trajectory> {
        if count < 2 {
            return Err(Error::TooFewPoints { got: count, need: 2 });
        }
        let (t0, t1) = self.t_span();
        if !(t_start >= t0 && t_stop <= t1 && t_stop > t_start) {
            return Err(Error::InvalidArgument("resampling window outside the trajectory span"));
        }
        let h = (t_stop - t_start) / (count - 1) as f64;
        let samples = (0..count)
            .map(|i| {
                let t = if i == count - 1 { t_stop } else { t_start + h * i as f64 };
                self.dense(params, t).expect("inside span").state
            })
            .collect();
        Ok(Trajectory { samples, ..self.clone() })
    }
}

/// Vector field of the first-order system, evaluated in the closed positive cone.
pub fn rhs(state: &FowlerState, params: &Params, system: System) -> Result<[f64; 4]> {
    if !state.in_cone() {
        return Err(Error::NegativeComponent { t: state.t, w1: state.w1, w2: state.w2 });
    }
    Ok(field(&state.vector(), params, system))
}

/// `sign(x) |x|^a`; the odd extension keeps trial stages defined across `w = 0`.
#[inline]
fn spow(x: f64, a: f64) -> f64 {
    if x < 0.0 {
        -powf(-x, a)
    } else {
        powf(x, a)
    }
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Vector field with the odd extension outside the cone. Agrees with [`rhs`] inside it.
pub(crate) fn field(y: &[f64; 4], pr: &Params, system: System) -> [f64; 4] {
    let tau = pr.friction(system);
    let sigma = pr.linear(system);
    let [w1, v1, w2, v2] = *y;
    let (q, p, b) = (pr.q, pr.p, pr.beta);
    let c1 = if b == 0.0 { 0.0 } else { b * spow(w1, q) * powf(abs(w2), q + 1.0) };
    let c2 = if b == 0.0 { 0.0 } else { b * spow(w2, q) * powf(abs(w1), q + 1.0) };
    [
        v1,
        -tau * v1 + sigma * w1 - pr.mu1 * spow(w1, p) - c1,
        v2,
        -tau * v2 + sigma * w2 - pr.mu2 * spow(w2, p) - c2,
    ]
}

/// Second time derivative of the phase vector along the flow, `J(y) f(y)`.
///
/// Returns `None` where it does not exist (a component crossing zero with q < 1).
pub(crate) fn second_derivative(
    y: &[f64; 4],
    f: &[f64; 4],
    pr: &Params,
    system: System,
) -> Option<[f64; 4]> {
    let tau = pr.friction(system);
    let sigma = pr.linear(system);
    let [w1, v1, w2, v2] = *y;
    let (a1, a2) = (f[1], f[3]);
    let (q, p, b) = (pr.q, pr.p, pr.beta);
    let jerk = |w: f64, v: f64, a: f64, mu: f64, wo: f64, vo: f64| -> f64 {
        let self_term = absorbing_product(&[mu * p, powf(abs(w), p - 1.0), v]);
        let coupling = if b == 0.0 {
            0.0
        } else {
            b * (absorbing_product(&[q, powf(abs(w), q - 1.0), v, powf(abs(wo), q + 1.0)])
                + absorbing_product(&[(q + 1.0), spow(w, q), sgn(wo), powf(abs(wo), q), vo]))
        };
        -tau * a + sigma * v - self_term - coupling
    };
    let j1 = jerk(w1, v1, a1, pr.mu1, w2, v2);
    let j2 = jerk(w2, v2, a2, pr.mu2, w1, v1);
    let g = [a1, j1, a2, j2];
    g.iter().all(|x| x.is_finite()).then_some(g)
}
