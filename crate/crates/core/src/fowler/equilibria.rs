use alloc::vec::Vec;

use num_complex::Complex64;

use super::{field, EquilibriumId, FowlerState, System};
use crate::math::{absorbing_product, hypot4, powf};
use crate::{Branch, Error, KLRoot, Params, Result, RootSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquilibriumKind {
    Origin,
    /// Both amplitudes positive.
    Full,
    /// Exactly one amplitude vanishes.
    SemiTrivial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumInfo {
    pub id: EquilibriumId,
    pub state: FowlerState,
    pub kind: EquilibriumKind,
    /// Filled by [`linearize`] where the vector field is differentiable.
    pub eigenvalues: Option<[Complex64; 4]>,
    /// Set by [`linearize`] when a partial derivative blows up (q < 1 on an axis, β > 0).
    pub non_lipschitz: bool,
    pub root: Option<KLRoot>,
    pub rhs_norm: f64,
}

/// The origin followed by one constant state `(k C₀, 0, l C₀, 0)` per root, in root order.
pub fn equilibria(params: &Params, roots: &RootSet) -> Vec<EquilibriumInfo> {
    let mut out = Vec::with_capacity(roots.len() + 1);
    out.push(EquilibriumInfo {
        id: EquilibriumId::Origin,
        state: FowlerState::new(0.0, 0.0, 0.0, 0.0, 0.0),
        kind: EquilibriumKind::Origin,
        eigenvalues: None,
        non_lipschitz: false,
        root: None,
        rhs_norm: 0.0,
    });
    for (id, root) in roots.iter().enumerate() {
        let state = FowlerState::new(0.0, root.k * params.c0, 0.0, root.l * params.c0, 0.0);
        let kind = match root.branch {
            Branch::BothPositive => EquilibriumKind::Full,
            Branch::KAxis | Branch::LAxis => EquilibriumKind::SemiTrivial,
        };
        out.push(EquilibriumInfo {
            id: EquilibriumId::Root(id),
            state,
            kind,
            eigenvalues: None,
            non_lipschitz: false,
            root: Some(*root),
            rhs_norm: hypot4(&field(&state.vector(), params, System::Standard)),
        });
    }
    out
}

/// Jacobian `∂F/∂w` of the forcing `F = σw - μ w^p - β w^q (other)^{q+1}` at a cone state.
/// Entries are infinite where the derivative does not exist.
fn forcing_jacobian(w1: f64, w2: f64, pr: &Params, system: System) -> [[f64; 2]; 2] {
    let sigma = pr.linear(system);
    let (p, q, b) = (pr.p, pr.q, pr.beta);
    let diag = |w: f64, mu: f64, other: f64| {
        sigma
            - absorbing_product(&[mu * p, powf(w, p - 1.0)])
            - absorbing_product(&[b * q, powf(w, q - 1.0), powf(other, q + 1.0)])
    };
    let off = |w: f64, other: f64| -absorbing_product(&[b * (q + 1.0), powf(w, q), powf(other, q)]);
    [[diag(w1, pr.mu1, w2), off(w1, w2)], [off(w2, w1), diag(w2, pr.mu2, w1)]]
}

/// Analytic 4×4 Jacobian of the first-order system at a cone state, phase order
/// `[w₁, w₁', w₂, w₂']`.
pub fn jacobian(state: &FowlerState, params: &Params, system: System) -> Result<[[f64; 4]; 4]> {
    if !state.in_cone() {
        return Err(Error::NegativeComponent { t: state.t, w1: state.w1, w2: state.w2 });
    }
    let tau = params.friction(system);
    let b = forcing_jacobian(state.w1, state.w2, params, system);
    Ok([
        [0.0, 1.0, 0.0, 0.0],
        [b[0][0], -tau, b[0][1], 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [b[1][0], 0.0, b[1][1], -tau],
    ])
}

/// Fills in the spectrum of the linearization at `eq`.
///
/// The Jacobian has the block form `[[0, I], [B, -τI]]`, so its eigenvalues are the roots of
/// `λ² + τλ = ν` for each eigenvalue `ν` of the 2×2 forcing Jacobian `B`.
pub fn linearize(eq: &EquilibriumInfo, params: &Params, system: System) -> Result<EquilibriumInfo> {
    let s = eq.state;
    if !s.in_cone() {
        return Err(Error::NegativeComponent { t: s.t, w1: s.w1, w2: s.w2 });
    }
    let rhs_norm = hypot4(&field(&s.vector(), params, system));
    if !(rhs_norm <= 1e-10) {
        return Err(Error::NotEquilibrium { rhs_norm });
    }
    let jac = jacobian(&s, params, system)?;
    let mut out = *eq;
    out.rhs_norm = rhs_norm;
    if jac.iter().flatten().any(|x| !x.is_finite()) {
        out.non_lipschitz = true;
        out.eigenvalues = None;
        return Ok(out);
    }
    let tau = params.friction(system);
    let (b11, b12, b21, b22) = (jac[1][0], jac[1][2], jac[3][0], jac[3][2]);
    let half_tr = Complex64::new(0.5 * (b11 + b22), 0.0);
    let disc = Complex64::new(0.25 * (b11 - b22) * (b11 - b22) + b12 * b21, 0.0).sqrt();
    let mut eig = [Complex64::new(0.0, 0.0); 4];
    for (i, nu) in [half_tr + disc, half_tr - disc].into_iter().enumerate() {
        let root = (Complex64::new(0.25 * tau * tau, 0.0) + nu).sqrt();
        eig[2 * i] = Complex64::new(-0.5 * tau, 0.0) + root;
        eig[2 * i + 1] = Complex64::new(-0.5 * tau, 0.0) - root;
    }
    eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    out.non_lipschitz = false;
    out.eigenvalues = Some(eig);
    Ok(out)
}
