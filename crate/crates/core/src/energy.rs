//! The energy `Ψ` of the Fowler system and the radial monotonicity functional `E`.
//!
//! ```text
//! Ψ = ½(w₁'² + w₂'²) - (σ/2)(w₁² + w₂²) + (μ₁ w₁^{p+1} + 2β w₁^{q+1} w₂^{q+1} + μ₂ w₂^{p+1})/(p+1)
//! Ψ' = -τ (w₁'² + w₂'²)
//! ```
//!
//! `E(r) = |S^{n-1}| Ψ(-ln r)`, so `E` is nondecreasing in `r` exactly when `Ψ` is
//! nonincreasing in `t`. Constant states `(kC₀, 0, lC₀, 0)` sit at `Ψ = -A_{k,l}`.

use alloc::vec::Vec;

use crate::fowler::{EquilibriumId, FowlerState, Status, System, Trajectory};
use crate::math::{ln, powf};
use crate::{Error, KLRoot, Params, Result, RootSet};

/// `Ψ` for the standard system.
pub fn psi(state: &FowlerState, params: &Params) -> Result<f64> {
    psi_in(state, params, System::Standard)
}

/// `Ψ` (or `Ψ̄`, with σ₀ in place of σ, for the Kelvin system).
pub fn psi_in(state: &FowlerState, params: &Params, system: System) -> Result<f64> {
    if !state.in_cone() {
        return Err(Error::NegativeComponent { t: state.t, w1: state.w1, w2: state.w2 });
    }
    Ok(psi_unchecked(&state.vector(), params, params.linear(system)))
}

fn psi_unchecked(y: &[f64; 4], pr: &Params, sigma: f64) -> f64 {
    let [w1, v1, w2, v2] = *y;
    let (w1, w2) = (w1.max(0.0), w2.max(0.0));
    let p1 = pr.p + 1.0;
    0.5 * (v1 * v1 + v2 * v2) - 0.5 * sigma * (w1 * w1 + w2 * w2)
        + (pr.mu1 * powf(w1, p1) + 2.0 * pr.beta * powf(w1, pr.q + 1.0) * powf(w2, pr.q + 1.0) + pr.mu2 * powf(w2, p1)) / p1
}

/// `∂Ψ/∂(w₁, w₁', w₂, w₂')`.
fn psi_gradient(y: &[f64; 4], pr: &Params, sigma: f64) -> [f64; 4] {
    let [w1, v1, w2, v2] = *y;
    let (w1, w2) = (w1.max(0.0), w2.max(0.0));
    let (p, q, b) = (pr.p, pr.q, pr.beta);
    [
        -sigma * w1 + pr.mu1 * powf(w1, p) + b * powf(w1, q) * powf(w2, q + 1.0),
        v1,
        -sigma * w2 + pr.mu2 * powf(w2, p) + b * powf(w2, q) * powf(w1, q + 1.0),
        v2,
    ]
}

/// `A_{k,l} = (p-1)/(2(p+1)) (k² + l²) C₀^{p+1}`.
pub fn a_kl(root: &KLRoot, params: &Params) -> f64 {
    crate::roots::energy_level(root.k, root.l, params)
}

fn radial_to_fowler(r: f64, u: f64, du: f64, v: f64, dv: f64, pr: &Params) -> Result<FowlerState> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveRadius { r });
    }
    if !(u >= 0.0 && v >= 0.0) {
        return Err(Error::NegativeComponent { t: -ln(r), w1: u, w2: v });
    }
    let d = pr.delta;
    let rd = powf(r, d);
    Ok(FowlerState::new(
        -ln(r),
        rd * u,
        -(d * rd * u + rd * r * du),
        rd * v,
        -(d * rd * v + rd * r * dv),
    ))
}

/// `E(r; u, v)` for radial data, evaluated as `|S^{n-1}| Ψ(-ln r)`.
pub fn energy_e(r: f64, u: f64, du: f64, v: f64, dv: f64, params: &Params) -> Result<f64> {
    let s = radial_to_fowler(r, u, du, v, dv, params)?;
    Ok(params.sphere_area * psi(&s, params)?)
}

/// `E(r; u, v)` from its sphere-integral definition; for radial data every integrand is
/// constant on `∂B_r` and `∂u/∂ν = u'(r)`.
pub fn energy_surface(r: f64, u: f64, du: f64, v: f64, dv: f64, params: &Params) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveRadius { r });
    }
    if !(u >= 0.0 && v >= 0.0) {
        return Err(Error::NegativeComponent { t: -ln(r), w1: u, w2: v });
    }
    let pr = params;
    let (p, q, tau) = (pr.p, pr.q, pr.tau);
    let grad2 = du * du + dv * dv;
    let integrand = 2.0 / (p - 1.0) * (u * du + v * dv) - 0.5 * r * grad2
        + r * grad2
        + tau / (r * (p - 1.0)) * (u * u + v * v)
        + r / (p + 1.0)
            * (pr.mu1 * powf(u, p + 1.0) + pr.mu2 * powf(v, p + 1.0) + 2.0 * pr.beta * powf(u, q + 1.0) * powf(v, q + 1.0));
    let area = pr.sphere_area * powf(r, f64::from(pr.n) - 1.0);
    Ok(powf(r, tau) * area * integrand)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    Zero,
    /// `-A_{k,l}` of the root with this id.
    MinusAkl(usize),
    /// No level within tolerance (empty list) or an ambiguous match.
    Unresolved { candidates: Vec<EquilibriumId> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyAudit {
    pub system: System,
    pub psi_samples: Vec<(f64, f64)>,
    /// Max over samples of `|dΨ/dt + τ(w₁'² + w₂'²)|` from the dense output.
    pub identity_residual_max: f64,
    /// The same residual at step midpoints, where the interpolant is actually exercised.
    /// Near a cone exit with q < 1 this is limited by rounding in the interpolant
    /// derivative, not by the integration.
    pub identity_residual_interior_max: f64,
    /// Largest step of `Ψ` against the expected direction (up for standard, down for Kelvin).
    pub monotone_violation_max: f64,
    pub limit_neg_inf: Option<f64>,
    pub limit_pos_inf: Option<f64>,
    /// Classification of `limit_pos_inf`.
    pub classification: Classification,
    /// Classification of `limit_neg_inf`.
    pub classification_neg_inf: Classification,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    pub classify_tol: f64,
    pub limit_window: f64,
    /// Dense-output points used to average `Ψ` over the limit window.
    pub window_points: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { classify_tol: 1e-6, limit_window: 1.0, window_points: 65 }
    }
}

/// Audit of a standard-system trajectory: `Ψ` must be nonincreasing.
pub fn audit(traj: &Trajectory, params: &Params, roots: &RootSet) -> Result<EnergyAudit> {
    audit_with(traj, params, roots, &AuditOptions::default())
}

pub fn audit_with(traj: &Trajectory, params: &Params, roots: &RootSet, opts: &AuditOptions) -> Result<EnergyAudit> {
    if traj.system != System::Standard {
        return Err(Error::WrongSystem { expected: "standard (use audit_kelvin)" });
    }
    audit_impl(traj, params, roots, opts)
}

/// Audit of a Kelvin-system trajectory: `Ψ̄` must be nondecreasing.
pub fn audit_kelvin(traj: &Trajectory, params: &Params, roots: &RootSet) -> Result<EnergyAudit> {
    audit_kelvin_with(traj, params, roots, &AuditOptions::default())
}

pub fn audit_kelvin_with(traj: &Trajectory, params: &Params, roots: &RootSet, opts: &AuditOptions) -> Result<EnergyAudit> {
    if traj.system != System::Kelvin {
        return Err(Error::WrongSystem { expected: "kelvin (use audit)" });
    }
    audit_impl(traj, params, roots, opts)
}

#[derive(Clone, Copy, PartialEq)]
enum End {
    First,
    Last,
}

fn audit_impl(traj: &Trajectory, params: &Params, roots: &RootSet, opts: &AuditOptions) -> Result<EnergyAudit> {
    let system = traj.system;
    let sigma = params.linear(system);
    let tau = params.friction(system);

    let mut psi_samples = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        psi_samples.push((s.t, psi_in(s, params, system)?));
    }

    let sign = match system {
        System::Standard => 1.0,
        System::Kelvin => -1.0,
    };
    let monotone_violation_max = psi_samples
        .windows(2)
        .map(|w| (sign * (w[1].1 - w[0].1)).max(0.0))
        .fold(0.0, f64::max);

    let identity_at = |y: &[f64; 4], dy: &[f64; 4]| {
        let g = psi_gradient(y, params, sigma);
        let dpsi: f64 = (0..4).map(|i| g[i] * dy[i]).sum();
        (dpsi + tau * (y[1] * y[1] + y[3] * y[3])).abs()
    };
    let mut identity_residual_max: f64 = 0.0;
    for s in &traj.samples {
        let f = crate::fowler::field(&s.vector(), params, system);
        identity_residual_max = identity_residual_max.max(identity_at(&s.vector(), &f));
    }
    // The step closing on a cone exit ends where the field is only Hölder continuous
    // (for q < 1), so the interpolant there carries no information about the identity.
    let closing = usize::from(traj.cone_exit.is_some());
    let pairs = traj.samples.len().saturating_sub(1 + closing);
    let mut identity_residual_interior_max: f64 = 0.0;
    for w in traj.samples.windows(2).take(pairs) {
        let (y, dy) = crate::fowler::hermite(&w[0], &w[1], params, system, 0.5 * (w[0].t + w[1].t));
        identity_residual_interior_max = identity_residual_interior_max.max(identity_at(&y, &dy));
    }

    // which physical end of the sample range is the converged one, and which the launch
    let converged_end = traj.status.is_converged().then_some(if traj.time_reversed { End::First } else { End::Last });
    let launch_end = traj.launched_from.map(|id| (id, if traj.time_reversed { End::Last } else { End::First }));
    let converged_hint = match traj.status {
        Status::ConvergedToEquilibrium(id) => id,
        _ => None,
    };

    let limit_at = |end: End| -> Result<f64> {
        if launch_end.map(|(_, e)| e) == Some(end) {
            let s = if end == End::First { traj.first() } else { traj.last() };
            return psi_in(s, params, system);
        }
        window_average(traj, params, system, end, opts)
    };
    let mut limit_neg_inf = None;
    let mut limit_pos_inf = None;
    let mut hint_neg = None;
    let mut hint_pos = None;
    for (end, hint) in converged_end
        .map(|e| (e, converged_hint))
        .into_iter()
        .chain(launch_end.map(|(id, e)| (e, Some(id))))
    {
        let value = Some(limit_at(end)?);
        match end {
            End::First => {
                limit_neg_inf = value;
                hint_neg = hint;
            }
            End::Last => {
                limit_pos_inf = value;
                hint_pos = hint;
            }
        }
    }

    Ok(EnergyAudit {
        system,
        psi_samples,
        identity_residual_max,
        identity_residual_interior_max,
        monotone_violation_max,
        limit_neg_inf,
        limit_pos_inf,
        classification: classify(limit_pos_inf, hint_pos, params, roots, opts.classify_tol),
        classification_neg_inf: classify(limit_neg_inf, hint_neg, params, roots, opts.classify_tol),
    })
}

fn window_average(traj: &Trajectory, params: &Params, system: System, end: End, opts: &AuditOptions) -> Result<f64> {
    let (t0, t1) = traj.t_span();
    let width = opts.limit_window.min(t1 - t0);
    let (a, b) = match end {
        End::First => (t0, t0 + width),
        End::Last => (t1 - width, t1),
    };
    if width <= 0.0 {
        let s = if end == End::First { traj.first() } else { traj.last() };
        return psi_in(s, params, system);
    }
    let m = opts.window_points.max(2);
    let mut acc = 0.0;
    for i in 0..m {
        let t = a + (b - a) * i as f64 / (m - 1) as f64;
        let y = traj.dense(params, t).expect("inside span").state.vector();
        acc += psi_unchecked(&y, params, params.linear(system));
    }
    Ok(acc / m as f64)
}

/// Nearest-level classification of a limit against `{0} ∪ {-A_{k,l}}`.
///
/// `hint` names the equilibrium the trajectory is known to approach; it settles ties
/// between equal levels (e.g. the two axis roots when μ₁ = μ₂).
pub fn classify(
    limit: Option<f64>,
    hint: Option<EquilibriumId>,
    params: &Params,
    roots: &RootSet,
    tol: f64,
) -> Classification {
    let Some(value) = limit else {
        return Classification::Unresolved { candidates: Vec::new() };
    };
    let mut candidates = Vec::new();
    if value.abs() <= tol {
        candidates.push(EquilibriumId::Origin);
    }
    for (id, root) in roots.iter().enumerate() {
        if (value + a_kl(root, params)).abs() <= tol {
            candidates.push(EquilibriumId::Root(id));
        }
    }
    let pick = match hint {
        Some(h) if candidates.contains(&h) => Some(h),
        _ if candidates.len() == 1 => Some(candidates[0]),
        _ => None,
    };
    match pick {
        Some(EquilibriumId::Origin) => Classification::Zero,
        Some(EquilibriumId::Root(id)) => Classification::MinusAkl(id),
        None => Classification::Unresolved { candidates },
    }
}

/// `max |Ψ(t) - Ψ(t₀)|` along a trajectory at the critical exponent, where `Ψ` reduces to
/// the Pohozaev invariant.
pub fn pohozaev_check(traj: &Trajectory, params: &Params) -> Result<f64> {
    if !params.is_critical {
        return Err(Error::NotCritical { tau: params.tau });
    }
    let psi0 = psi_in(traj.first(), params, traj.system)?;
    let mut worst: f64 = 0.0;
    for s in &traj.samples {
        worst = worst.max((psi_in(s, params, traj.system)? - psi0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fowler::{equilibria, integrate, shoot, IntegrateOptions};
    use crate::roots::solve_kl;

    fn n5p2(beta: f64) -> Params {
        Params::new(5, 2.0, 1.0, 1.0, beta).unwrap()
    }

    #[test]
    fn psi_examples() {
        let pr = n5p2(1.0);
        assert_eq!(psi(&FowlerState::new(0.0, 0.0, 0.0, 0.0, 0.0), &pr).unwrap(), 0.0);
        let v = psi(&FowlerState::new(0.0, 1.0, 0.0, 1.0, 0.0), &pr).unwrap();
        assert!((v + 2.0 / 3.0).abs() < 1e-15);
        let v = psi(&FowlerState::new(0.0, 2.0, 0.0, 0.0, 0.0), &pr).unwrap();
        assert!((v + 4.0 / 3.0).abs() < 1e-15);
        assert!(psi(&FowlerState::new(0.0, -1.0, 0.0, 0.0, 0.0), &pr).is_err());
    }

    #[test]
    fn a_kl_examples() {
        let pr = n5p2(1.0);
        let half = KLRoot::new(0.5, 0.5, &pr).unwrap();
        assert!((a_kl(&half, &pr) - 2.0 / 3.0).abs() < 1e-15);
        let axis = KLRoot::new(1.0, 0.0, &pr).unwrap();
        assert!((a_kl(&axis, &pr) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(KLRoot::new(0.0, 0.0, &pr), Err(Error::TrivialScaling));
    }

    #[test]
    fn psi_at_equilibria_is_minus_a() {
        for (n, p, mu1, mu2, beta) in [(5, 2.0, 1.0, 1.0, 1.0), (3, 4.5, 0.6, 1.4, 0.3), (6, 1.9, 2.0, 1.0, 0.8)] {
            let pr = Params::new(n, p, mu1, mu2, beta).unwrap();
            let roots = solve_kl(&pr);
            for (e, root) in equilibria(&pr, &roots).iter().skip(1).zip(roots.iter()) {
                assert!((psi(&e.state, &pr).unwrap() + a_kl(root, &pr)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn energy_on_singular_solution_is_constant() {
        let pr = n5p2(1.0);
        let want = -pr.sphere_area * 4.0 / 3.0;
        for r in [1e-3f64, 0.1, 1.0, 7.0, 1e3] {
            let u = pr.c0 * r.powf(-pr.delta);
            let du = -pr.delta * u / r;
            let e = energy_e(r, u, du, 0.0, 0.0, &pr).unwrap();
            assert!((e - want).abs() < 1e-12 * want.abs(), "r={r}: {e} vs {want}");
            let direct = energy_surface(r, u, du, 0.0, 0.0, &pr).unwrap();
            assert!((direct - e).abs() < 1e-12 * want.abs());
        }
        assert_eq!(energy_e(1.0, 0.0, 0.0, 0.0, 0.0, &pr).unwrap(), 0.0);
        assert!(matches!(energy_e(0.0, 1.0, 0.0, 1.0, 0.0, &pr), Err(Error::NonPositiveRadius { .. })));
    }

    #[test]
    fn surface_integral_agrees_on_generic_data() {
        let pr = Params::new(4, 2.3, 1.2, 0.7, 0.9).unwrap();
        for (r, u, du, v, dv) in [(0.5, 1.3, -2.0, 0.4, -0.1), (3.0, 0.02, -0.01, 0.05, 0.003), (1.0, 0.7, 0.2, 0.0, 0.0)] {
            let a = energy_e(r, u, du, v, dv, &pr).unwrap();
            let b = energy_surface(r, u, du, v, dv, &pr).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn scaling_identity() {
        // E(r; u^λ) = E(λr; u) with u^λ(x) = λ^δ u(λx), on a generic smooth profile
        let pr = Params::new(3, 3.6, 1.0, 1.5, 0.5).unwrap();
        let u = |r: f64| 1.0 / (1.0 + r * r).powf(0.4);
        let du = |r: f64| -0.8 * r / (1.0 + r * r).powf(1.4);
        let v = |r: f64| 0.5 * (-r).exp() + 0.1;
        let dv = |r: f64| -0.5 * (-r).exp();
        for lambda in [0.3f64, 2.0, 11.0] {
            for r in [0.2, 1.0, 4.0] {
                let ld = lambda.powf(pr.delta);
                let lhs = energy_e(r, ld * u(lambda * r), ld * lambda * du(lambda * r), ld * v(lambda * r), ld * lambda * dv(lambda * r), &pr).unwrap();
                let rhs = energy_e(lambda * r, u(lambda * r), du(lambda * r), v(lambda * r), dv(lambda * r), &pr).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn equilibrium_trajectory_audit() {
        let pr = n5p2(1.0);
        let roots = solve_kl(&pr);
        let eq = equilibria(&pr, &roots)[2];
        let traj = integrate(&eq.state, 10.0, &pr, System::Standard, &IntegrateOptions::default()).unwrap();
        let a = audit(&traj, &pr, &roots).unwrap();
        assert!(a.identity_residual_max <= 1e-10);
        assert!(a.monotone_violation_max <= 1e-12);
        let want = -a_kl(&roots.roots[1], &pr);
        assert!((a.limit_pos_inf.unwrap() - want).abs() < 1e-12);
        assert_eq!(a.classification, Classification::MinusAkl(1));
    }

    #[test]
    fn scalar_shot_limits() {
        let pr = n5p2(0.0);
        let roots = solve_kl(&pr);
        let traj = shoot(&pr, &roots, (1.0, 0.0), 1e-6, 400.0).unwrap();
        let a = audit(&traj, &pr, &roots).unwrap();
        assert!(a.limit_neg_inf.unwrap().abs() < 1e-6);
        assert!((a.limit_pos_inf.unwrap() + 4.0 / 3.0).abs() < 1e-6);
        let id = roots.iter().position(|r| r.k == 1.0 && r.l == 0.0).unwrap();
        assert_eq!(a.classification, Classification::MinusAkl(id));
        assert_eq!(a.classification_neg_inf, Classification::Zero);
        assert!(a.monotone_violation_max <= 1e-9);
    }

    #[test]
    fn ties_without_hint_are_unresolved() {
        let pr = n5p2(0.0);
        let roots = solve_kl(&pr);
        match classify(Some(-4.0 / 3.0), None, &pr, &roots, 1e-6) {
            Classification::Unresolved { candidates } => assert_eq!(candidates.len(), 2),
            other => panic!("{other:?}"),
        }
        assert_eq!(classify(Some(0.5), None, &pr, &roots, 1e-6), Classification::Unresolved { candidates: Vec::new() });
    }

    #[test]
    fn random_state_is_monotone() {
        let pr = Params::new(4, 2.4, 1.0, 0.5, 1.5).unwrap();
        let roots = solve_kl(&pr);
        let s = FowlerState::new(0.0, 0.9, -0.2, 0.4, 0.3);
        let traj = integrate(&s, 20.0, &pr, System::Standard, &IntegrateOptions::default()).unwrap();
        let a = audit(&traj, &pr, &roots).unwrap();
        assert!(a.monotone_violation_max <= 1e-6);
        assert!(a.identity_residual_max <= 1e-10, "{}", a.identity_residual_max);
        assert!(a.identity_residual_interior_max <= 1e-6, "{}", a.identity_residual_interior_max);
        assert!(audit_kelvin(&traj, &pr, &roots).is_err());
    }

    #[test]
    fn pohozaev_constancy() {
        let pr = Params::new(4, 3.0, 1.0, 1.0, 1.0).unwrap();
        let roots = solve_kl(&pr);
        let eq = equilibria(&pr, &roots)[1];
        let traj = integrate(&eq.state, 5.0, &pr, System::Standard, &IntegrateOptions::default()).unwrap();
        assert!(pohozaev_check(&traj, &pr).unwrap() <= 1e-12);
        let mut opts = IntegrateOptions::default();
        opts.detect_convergence = false;
        let s = FowlerState::new(0.0, 0.8, 0.1, 0.6, -0.05);
        let traj = integrate(&s, 20.0, &pr, System::Standard, &opts).unwrap();
        assert!(pohozaev_check(&traj, &pr).unwrap() <= 1e-8);
        let other = n5p2(1.0);
        assert!(matches!(pohozaev_check(&traj, &other), Err(Error::NotCritical { .. })));
    }
}
