//! Shooting along the unstable eigenspace of the origin.
//!
//! At the origin the linearization has the double eigenvalue `δ₀ = n - 2 - δ` with
//! eigenvectors `(a₁, δ₀a₁, a₂, δ₀a₂)`. Launching there at `t = 0` follows the connecting
//! orbit that, in radial variables, decays like `λ r^{-(n-2)}` as `r → ∞`.

use alloc::vec::Vec;

use super::{equilibria, integrate, EquilibriumId, FowlerState, IntegrateOptions, Status, System, Trajectory};
use crate::math::{hypot4, sqrt};
use crate::{Error, Params, Result, RootSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    pub epsilon: f64,
    pub t_end: f64,
    pub integrate: IntegrateOptions,
    /// A converged run is attributed to an equilibrium within this phase-space distance.
    pub match_radius: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions { epsilon: 1e-6, t_end: 400.0, integrate: IntegrateOptions::default(), match_radius: 1e-8 }
    }
}

pub fn shoot(
    params: &Params,
    roots: &RootSet,
    direction: (f64, f64),
    epsilon: f64,
    t_end: f64,
) -> Result<Trajectory> {
    shoot_with(params, roots, direction, &ShootOptions { epsilon, t_end, ..Default::default() })
}

pub fn shoot_with(
    params: &Params,
    roots: &RootSet,
    direction: (f64, f64),
    opts: &ShootOptions,
) -> Result<Trajectory> {
    let (a1, a2) = direction;
    if !(a1 >= 0.0 && a2 >= 0.0 && a1.is_finite() && a2.is_finite()) || (a1 == 0.0 && a2 == 0.0) {
        return Err(Error::InvalidArgument("shooting direction must be nonnegative and nonzero"));
    }
    if !(opts.epsilon > 0.0 && opts.epsilon <= 1e-2) {
        return Err(Error::InvalidArgument("epsilon must lie in (0, 1e-2]"));
    }
    let norm = sqrt(a1 * a1 + a2 * a2);
    let (a1, a2) = (a1 / norm, a2 / norm);
    let eps = opts.epsilon;
    let d0 = params.delta0;
    let start = FowlerState::new(0.0, eps * a1, d0 * eps * a1, eps * a2, d0 * eps * a2);

    let mut traj = integrate(&start, opts.t_end, params, System::Standard, &opts.integrate)?;
    traj.launched_from = Some(EquilibriumId::Origin);
    if traj.status.is_converged() {
        let end = traj.last().vector();
        let matched = equilibria(params, roots)
            .into_iter()
            .map(|e| {
                let y = e.state.vector();
                let d: [f64; 4] = core::array::from_fn(|i| end[i] - y[i]);
                (e.id, hypot4(&d))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|(_, d)| *d <= opts.match_radius)
            .map(|(id, _)| id);
        traj.status = Status::ConvergedToEquilibrium(matched);
    }
    Ok(traj)
}

/// Samples where a positive component violates `wᵢ' > -δ wᵢ` (`δ₀` for the Kelvin system).
///
/// Components that vanish identically are skipped: the bound concerns positive solutions.
pub fn corollary_violations(traj: &Trajectory, params: &Params) -> Vec<(usize, u8)> {
    let rate = match traj.system {
        System::Standard => params.delta,
        System::Kelvin => params.delta0,
    };
    let mut out = Vec::new();
    for (i, s) in traj.samples.iter().enumerate() {
        if s.w1 > 0.0 && !(s.dw1 > -rate * s.w1) {
            out.push((i, 1));
        }
        if s.w2 > 0.0 && !(s.dw2 > -rate * s.w2) {
            out.push((i, 2));
        }
    }
    out
}
