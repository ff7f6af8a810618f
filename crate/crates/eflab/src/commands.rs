//! One function per subcommand. Each returns a JSON summary for the manifest and
//! writes its artifacts through [`Outputs`].

use eflab_core::energy::{self, AuditOptions, Classification, EnergyAudit};
use eflab_core::fowler::{self, ShootOptions};
use eflab_core::params::{critical_exponent, lower_exponent};
use eflab_core::roots::{self, RootSolverOptions};
use eflab_core::transforms;
use eflab_core::{
    Branch, EquilibriumId, EquilibriumKind, FowlerState, IntegrateOptions, Params, RootSet, Status, System,
    Tolerances, Trajectory, WarningSource,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Command, Numerics, ScenarioConfig};
use crate::error::RunError;
use crate::output::{num, Outputs};
use crate::sweep;

/// Ratio spread above which a converged run counts as non-proportional.
const NON_PROPORTIONAL: f64 = 1e-6;

pub const RNG_NAME: &str = "ChaCha20Rng (rand_chacha 0.3), seeded from the run seed via seed_from_u64, stream = state index";

pub struct Report {
    pub summary: Value,
    pub warnings: Vec<String>,
}

pub fn execute(cfg: &ScenarioConfig, out: &mut Outputs) -> Result<Report, RunError> {
    match cfg.command() {
        Command::Params => run_params(cfg, out),
        Command::Roots => run_roots(cfg, out),
        Command::Simulate => run_simulate(cfg, out),
        Command::Shoot => run_shoot(cfg, out),
        Command::EnergyAudit => run_energy_audit(cfg, out),
        Command::KelvinCheck => run_kelvin_check(cfg, out),
        Command::Profile => run_profile(cfg, out),
        Command::Sweep => sweep::run(cfg, out),
        Command::CriticalCheck => run_critical_check(cfg, out),
    }
}

pub fn integrate_options(m: &Numerics) -> IntegrateOptions {
    IntegrateOptions {
        tol: Tolerances { abs: m.abs_tol, rel: m.rel_tol },
        h_init: m.h_init,
        h_max: m.h_max,
        h_min: m.h_min,
        max_steps: m.max_steps,
        cap: m.cap,
        detect_convergence: m.detect_convergence,
        converge_threshold: m.converge_threshold,
        converge_window: m.converge_window,
        event_tol: m.event_tol,
        boundary_fraction: m.boundary_fraction,
    }
}

pub fn root_options(m: &Numerics) -> RootSolverOptions {
    RootSolverOptions {
        grid: m.root_grid,
        max_iter: m.root_max_iter,
        dedup_radius: m.root_dedup_radius,
        floor: m.root_floor,
        accept_residual: m.root_accept_residual,
        warn_residual: m.root_warn_residual,
        ray_span: m.root_ray_span,
        ray_step: m.root_ray_step,
    }
}

pub fn shoot_options(m: &Numerics) -> ShootOptions {
    ShootOptions { epsilon: m.epsilon, t_end: m.t_end, integrate: integrate_options(m), match_radius: m.match_radius }
}

pub fn audit_options(m: &Numerics) -> AuditOptions {
    AuditOptions { classify_tol: m.classify_tol, limit_window: m.limit_window, ..AuditOptions::default() }
}

fn params_of(cfg: &ScenarioConfig) -> Result<Params, RunError> {
    let pr = cfg.problem()?;
    Ok(Params::new(pr.n, pr.p, pr.mu1, pr.mu2, pr.beta)?)
}

pub fn status_name(status: &Status) -> &'static str {
    match status {
        Status::ReachedTEnd => "reached_t_end",
        Status::ConvergedToEquilibrium(_) => "converged_to_equilibrium",
        Status::LeftPositiveCone => "left_positive_cone",
        Status::Unbounded => "unbounded",
        Status::StepFailure { .. } => "step_failure",
    }
}

fn equilibrium_label(id: EquilibriumId) -> String {
    match id {
        EquilibriumId::Origin => "origin".to_string(),
        EquilibriumId::Root(i) => format!("root#{i}"),
    }
}

pub fn classification_name(c: &Classification) -> String {
    match c {
        Classification::Zero => "zero".to_string(),
        Classification::MinusAkl(id) => format!("minus_a_kl#{id}"),
        Classification::Unresolved { .. } => "unresolved".to_string(),
    }
}

fn classification_json(c: &Classification) -> Value {
    match c {
        Classification::Zero => json!({ "kind": "zero" }),
        Classification::MinusAkl(id) => json!({ "kind": "minus_a_kl", "root": id }),
        Classification::Unresolved { candidates } => json!({
            "kind": "unresolved",
            "candidates": candidates.iter().map(|c| equilibrium_label(*c)).collect::<Vec<_>>(),
        }),
    }
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::BothPositive => "both_positive",
        Branch::KAxis => "k_axis",
        Branch::LAxis => "l_axis",
    }
}

fn state_json(s: &FowlerState) -> Value {
    json!({ "t": s.t, "w1": s.w1, "dw1": s.dw1, "w2": s.w2, "dw2": s.dw2 })
}

pub fn root_warnings(set: &RootSet) -> Vec<String> {
    set.warnings
        .iter()
        .map(|w| match w.source {
            WarningSource::Cell(i, j) => format!(
                "roots: Newton failed in seed cell ({i}, {j}) near (k, l) = ({}, {}) with residual down to {}",
                num(w.k),
                num(w.l),
                num(w.min_residual)
            ),
            WarningSource::Ray(x) => format!(
                "roots: ratio ln(l/k) = {} brackets a root at ({}, {}) whose residual {} misses the bound",
                num(x),
                num(w.k),
                num(w.l),
                num(w.min_residual)
            ),
            WarningSource::Cluster { members, width } => format!(
                "roots: {members} candidates within {} in ln(l/k) are indistinguishable at the residual bound; \
                 reported once as a multiple root at ({}, {})",
                num(width),
                num(w.k),
                num(w.l)
            ),
        })
        .collect()
}

/// Seeded random positive initial states: amplitudes in `C₀·[0.05, amplitude]`,
/// velocities in `C₀·[-0.5, 0.5]`. Each state has its own ChaCha stream.
pub fn random_states(seed: u64, count: usize, amplitude: f64, c0: f64) -> Vec<[f64; 4]> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            [
                c0 * rng.gen_range(0.05..amplitude),
                c0 * rng.gen_range(-0.5..0.5),
                c0 * rng.gen_range(0.05..amplitude),
                c0 * rng.gen_range(-0.5..0.5),
            ]
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Source {
    Shoot { index: usize, direction: [f64; 2] },
    State { index: usize, initial: [f64; 4] },
}

impl Source {
    fn id(&self) -> String {
        match self {
            Source::Shoot { index, .. } => format!("shoot_{index}"),
            Source::State { index, .. } => format!("state_{index}"),
        }
    }

    fn describe(&self, m: &Numerics) -> Value {
        match self {
            Source::Shoot { direction, .. } => json!({ "kind": "shoot", "direction": direction, "epsilon": m.epsilon }),
            Source::State { initial, .. } => json!({ "kind": "state", "initial": initial }),
        }
    }
}

fn shoot_sources(cfg: &ScenarioConfig) -> Vec<Source> {
    cfg.shoot.directions.iter().enumerate().map(|(index, d)| Source::Shoot { index, direction: *d }).collect()
}

fn state_sources(cfg: &ScenarioConfig, params: &Params) -> Vec<Source> {
    let sim = &cfg.simulate;
    let mut states = sim.initial.clone();
    states.extend(random_states(cfg.seed, sim.random, sim.amplitude, params.c0));
    states.into_iter().enumerate().map(|(index, initial)| Source::State { index, initial }).collect()
}

fn run_source(source: &Source, params: &Params, roots: &RootSet, cfg: &ScenarioConfig) -> eflab_core::Result<Trajectory> {
    let m = &cfg.numerics;
    match source {
        Source::Shoot { direction, .. } => {
            fowler::shoot_with(params, roots, (direction[0], direction[1]), &shoot_options(m))
        }
        Source::State { initial, .. } => {
            let s = FowlerState::new(0.0, initial[0], initial[1], initial[2], initial[3]);
            fowler::integrate(&s, cfg.simulate.t_end, params, System::Standard, &integrate_options(m))
        }
    }
}

pub fn trajectory_rows(traj: &Trajectory, params: &Params) -> Result<Vec<Vec<String>>, RunError> {
    traj.samples
        .iter()
        .map(|s| {
            let psi = energy::psi_in(s, params, traj.system)?;
            Ok(vec![num(s.t), num(s.w1), num(s.dw1), num(s.w2), num(s.dw2), num(psi)])
        })
        .collect()
}

fn trajectory_header() -> Vec<String> {
    ["t", "w1", "dw1", "w2", "dw2", "psi"].iter().map(|s| s.to_string()).collect()
}

/// Least-squares slope of `ln(w₁ + w₂)` against `t` over the first `window` units.
pub fn launch_log_slope(traj: &Trajectory, window: f64) -> Option<f64> {
    let t0 = traj.first().t;
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .take_while(|s| s.t <= t0 + window)
        .filter(|s| s.w1 + s.w2 > 0.0)
        .map(|s| (s.t, (s.w1 + s.w2).ln()))
        .collect();
    regression_slope(&pts)
}

pub fn regression_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx) * (p.0 - mx)));
    (sxx > 0.0).then(|| sxy / sxx)
}

fn audit_summary(a: &EnergyAudit) -> Value {
    json!({
        "samples": a.psi_samples.len(),
        "identity_residual_max": a.identity_residual_max,
        "identity_residual_interior_max": a.identity_residual_interior_max,
        "monotone_violation_max": a.monotone_violation_max,
        "limit_neg_inf": a.limit_neg_inf,
        "limit_pos_inf": a.limit_pos_inf,
        "classification": classification_json(&a.classification),
        "classification_neg_inf": classification_json(&a.classification_neg_inf),
    })
}

fn trajectory_json(traj: &Trajectory) -> Value {
    let matched = match traj.status {
        Status::ConvergedToEquilibrium(Some(id)) => Some(equilibrium_label(id)),
        _ => None,
    };
    let cone_exit = traj.cone_exit.map(|c| json!({ "component": c.component, "t_lo": c.t_lo, "t_hi": c.t_hi }));
    let failure = match traj.status {
        Status::StepFailure { t, h } => Some(json!({ "t": t, "h": h })),
        _ => None,
    };
    json!({
        "system": traj.system.name(),
        "status": status_name(&traj.status),
        "matched_equilibrium": matched,
        "cone_exit": cone_exit,
        "step_failure": failure,
        "samples": traj.samples.len(),
        "t_span": [traj.first().t, traj.last().t],
        "initial_state": state_json(traj.first()),
        "terminal_state": state_json(traj.last()),
    })
}

struct Outcome {
    id: String,
    source: Value,
    traj: Result<Trajectory, eflab_core::Error>,
}

fn run_all(sources: &[Source], params: &Params, roots: &RootSet, cfg: &ScenarioConfig) -> Vec<Outcome> {
    sources
        .par_iter()
        .map(|s| Outcome { id: s.id(), source: s.describe(&cfg.numerics), traj: run_source(s, params, roots, cfg) })
        .collect()
}

fn solve_roots(params: &Params, cfg: &ScenarioConfig, warnings: &mut Vec<String>) -> RootSet {
    let set = roots::solve_kl_with(params, &root_options(&cfg.numerics));
    warnings.extend(root_warnings(&set));
    set
}

fn run_params(cfg: &ScenarioConfig, out: &mut Outputs) -> Result<Report, RunError> {
    let pr = params_of(cfg)?;
    let ids = pr.identity_residuals();
    let doc = json!({
        "n": pr.n,
        "p": pr.p,
        "q": pr.q,
        "delta": pr.delta,
        "tau": pr.tau,
        "sigma": pr.sigma,
        "c0": pr.c0,
        "alpha": pr.alpha,
        "delta0": pr.delta0,
        "tau0": pr.tau0,
        "sigma0": pr.sigma0,
        "sphere_area": pr.sphere_area,
        "mu1": pr.mu1,
        "mu2": pr.mu2,
        "beta": pr.beta,
        "is_critical": pr.is_critical,
        "lower_exponent": lower_exponent(pr.n),
        "critical_exponent": critical_exponent(pr.n),
        "identity_residuals": {
            "c0_power": ids.c0_power,
            "delta_sum": ids.delta_sum,
            "tau_flip": ids.tau_flip,
            "sigma_match": ids.sigma_match,
        },
    });
    out.json("params.json", &doc)?;
    Ok(Report {
        summary: json!({ "is_critical": pr.is_critical, "identity_residual_max": ids.max() }),
        warnings: Vec::new(),
    })
}

fn run_roots(cfg: &ScenarioConfig, out: &mut Outputs) -> Result<Report, RunError> {
    let pr = params_of(cfg)?;
    let mut warnings = Vec::new();
    let set = solve_roots(&pr, cfg, &mut warnings);
    let eqs = fowler::equilibria(&pr, &set);
    let mut header: Vec<String> =
        ["id", "k", "l", "branch", "residual", "a_kl", "w1", "w2", "kind", "rhs_norm", "non_lipschitz"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    for i in 1..=4 {
        header.push(format!("eig{i}_re"));
        header.push(format!("eig{i}_im"));
    }
    let mut rows = Vec::new();
    let mut non_lipschitz = 0;
    for (id, (root, eq)) in set.iter().zip(eqs.iter().skip(1)).enumerate() {
        let lin = fowler::linearize(eq, &pr, System::Standard)?;
        let kind = match lin.kind {
            EquilibriumKind::Origin => "origin",
            EquilibriumKind::Full => "full",
            EquilibriumKind::SemiTrivial => "semi_trivial",
        };
        non_lipschitz += usize::from(lin.non_lipschitz);
        let mut row = vec![
            id.to_string(),
            num(root.k),
            num(root.l),
            branch_name(root.branch).to_string(),
            num(root.residual),
            num(root.a_kl),
            num(eq.state.w1),
            num(eq.state.w2),
            kind.to_string(),
            num(lin.rhs_norm),
            lin.non_lipschitz.to_string(),
        ];
        match lin.eigenvalues {
            Some(ev) => ev.iter().for_each(|z| {
                row.push(num(z.re));
                row.push(num(z.im));
            }),
            None => row.extend(std::iter::repeat(String::new()).take(8)),
        }
        rows.push(row);
    }
    out.csv("roots.csv", &header, &rows)?;
    Ok(Report {
        summary: json!({
            "root_count": set.len(),
            "interior_roots": set.interior().count(),
            "non_lipschitz_equilibria": non_lipschitz,
            "unresolved_cells": set.warnings.len(),
        }),
        warnings,
    })
}

/// Integrates the sources, writes trajectories and audits, returns the summary.
fn trajectories_with_audits(
    cfg: &ScenarioConfig,
    out: &mut Outputs,
    sources: &[Source],
    with_csv: bool,
    with_psi: bool,
) -> Result<Report, RunError> {
    let pr = params_of(cfg)?;
    let mut warnings = Vec::new();
    let set = solve_roots(&pr, cfg, &mut warnings);
    let opts = audit_options(&cfg.numerics);
    let outcomes = run_all(sources, &pr, &set, cfg);
    let mut max_violation: f64 = 0.0;
    let mut max_identity: f64 = 0.0;
    let mut statuses = std::collections::BTreeMap::<&str, usize>::new();
    let mut classifications = Vec::new();
    let mut corollary_total = 0;
    let mut non_proportional = Vec::new();
    for o in outcomes {
        let traj = match o.traj {
            Ok(t) => t,
            Err(e) => {
                warnings.push(format!("{}: {e}", o.id));
                out.json(&format!("audit_{}.json", o.id), &json!({ "id": o.id, "source": o.source, "error": e.to_string() }))?;
                continue;
            }
        };
        *statuses.entry(status_name(&traj.status)).or_default() += 1;
        let audit = energy::audit_with(&traj, &pr, &set, &opts)?;
        max_violation = max_violation.max(audit.monotone_violation_max);
        max_identity = max_identity.max(audit.identity_residual_max);
        let corollary = fowler::corollary_violations(&traj, &pr);
        corollary_total += corollary.len();
        let mut doc = json!({
            "id": o.id,
            "source": o.source,
            "trajectory": trajectory_json(&traj),
            "energy": audit_summary(&audit),
            "corollary_violations": corollary.len(),
            "first_corollary_violation": corollary.first().map(|(i, c)| json!({ "sample": i, "component": c })),
        });
        let spread = ratio_spread(&traj);
        doc["ratio_spread"] = json!(spread);
        if traj.status.is_converged() && spread.is_some_and(|x| x > NON_PROPORTIONAL) {
            non_proportional.push(o.id.clone());
        }
        if traj.launched_from.is_some() {
            doc["launch_log_slope"] = json!(launch_log_slope(&traj, 2.0));
            doc["delta0"] = json!(pr.delta0);
        }
        if with_psi {
            doc["psi_samples"] = json!(audit.psi_samples);
        }
        if traj.status.is_converged() {
            classifications.push(json!({ "id": o.id, "classification": classification_name(&audit.classification) }));
        }
        if with_csv {
            out.csv(&format!("trajectory_{}.csv", o.id), &trajectory_header(), &trajectory_rows(&traj, &pr)?)?;
        }
        out.json(&format!("audit_{}.json", o.id), &doc)?;
    }
    Ok(Report {
        summary: json!({
            "runs": sources.len(),
            "statuses": statuses,
            "converged_classifications": classifications,
            "max_monotone_violation": max_violation,
            "max_identity_residual": max_identity,
            "corollary_violations": corollary_total,
            "converged_non_proportional": non_proportional,
            "exploratory": "runs reaching an equilibrium indicate but do not prove a global positive solution; \
                            non-proportional ones are candidates, not counterexamples",
        }),
        warnings,
    })
}

/// Relative spread of `w1 / w2` over samples with both components positive.
/// Zero for the proportional solutions `(kW, lW)`.
pub fn ratio_spread(traj: &Trajectory) -> Option<f64> {
    let ratios = traj.samples.iter().filter(|s| s.w1 > 0.0 && s.w2 > 0.0).map(|s| s.w1 / s.w2);
    let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    (hi > 0.0).then(|| (hi - lo) / hi)
}

fn run_simulate(cfg: &ScenarioConfig, out: &mut Outputs) -> Result<Report, RunError> {
    let pr = params_of(cfg)?;
    let sources = state_sources(cfg, &pr);
    if sources.is_empty() {
        return Err(RunError::Config("simulate: no initial states (set simulate.initial or simulate.random)".into()));
    }
    trajectories_with_audits(cfg, out, &sources, true, false)
}

fn run_shoot(cfg: &ScenarioConfig, out: &mut Outputs) -> Result<Report, RunError> {
    trajectories_with_audits(cfg, out, &shoot_sources(cfg), true, false)
}

fn run_energy_audit(cfg: &ScenarioConfig, out: &mut Outputs) -> Result<Report, RunError> {
    let pr = params_of(cfg)?;
    let mut sources = shoot_sources(cfg);
    sources.extend(state_sources(cfg, &pr));
    trajectories_with_audits(cfg, out, &sources, false, true)
}

fn run_kelvin_check(cfg: &ScenarioConfig, out: &mut Outputs) -> Result<Report, RunError> {
    let pr = params_of(cfg)?;
    let mut warnings = Vec::new();
    let set = solve_roots(&pr, cfg, &mut warnings);
    let opts = audit_options(&cfg.numerics);
    let mut max_residual: f64 = 0.0;
    let mut max_involution: f64 = 0.0;
    let mut max_violation: f64 = 0.0;
    for o in run_all(&shoot_sources(cfg), &pr, &set, cfg) {
        let id = o.id.replace("shoot", "kelvin");
        let traj = match o.traj {
            Ok(t) => t,
            Err(e) => {
                warnings.push(format!("{id}: {e}"));
                out.json(&format!("audit_{id}.json"), &json!({ "id": id, "source": o.source, "error": e.to_string() }))?;
                continue;
            }
        };
        let reversed = transforms::kelvin_reverse(&traj);
        let residual = transforms::reversal_residual(&traj, &pr)?;
        let back = transforms::kelvin_reverse(&reversed);
        let involution = back
            .samples
            .iter()
            .zip(&traj.samples)
            .flat_map(|(a, b)| {
                let (x, y) = (a.vector(), b.vector());
                (0..4).map(move |i| (x[i] - y[i]).abs()).chain(std::iter::once((a.t - b.t).abs()))
            })
            .fold(0.0, f64::max);
        let audit = energy::audit_kelvin_with(&reversed, &pr, &set, &opts)?;
        max_residual = max_residual.max(residual);
        max_involution = max_involution.max(involution);
        max_violation = max_violation.max(audit.monotone_violation_max);
        out.csv(&format!("trajectory_{id}.csv"), &trajectory_header(), &trajectory_rows(&reversed, &pr)?)?;
        out.json(
            &format!("audit_{id}.json"),
            &json!({
                "id": id,
                "source": o.source,
                "standard_trajectory": trajectory_json(&traj),
                "kelvin_trajectory": trajectory_json(&reversed),
                "reversal_residual": residual,
                "double_reversal_error": involution,
                "energy": audit_summary(&audit),
            }),
        )?;
    }
    Ok(Report {
        summary: json!({
            "runs": cfg.shoot.directions.len(),
            "max_reversal_residual": max_residual,
            "max_double_reversal_error": max_involution,
            "max_monotone_violation": max_violation,
        }),
        warnings,
    })
}

/// Log-log slope of `u + v` against `r` over one decade at each end of a profile.
fn end_slopes(profile: &transforms::RadialProfile) -> (Option<f64>, Option<f64>) {
    let g = &profile.grid;
    let pts = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
        (0..g.len())
            .filter(|&j| g[j] >= lo && g[j] <= hi && profile.u[j] + profile.v[j] > 0.0)
            .map(|j| (g[j].ln(), (profile.u[j] + profile.v[j]).ln()))
            .collect()
    };
    let (r0, r1) = (g[0], g[g.len() - 1]);
    (regression_slope(&pts(r0, 10.0 * r0)), regression_slope(&pts(r1 / 10.0, r1)))
}

fn run_profile(cfg: &ScenarioConfig, out: &mut Outputs) -> Result<Report, RunError> {
    let pr = params_of(cfg)?;
    let m = &cfg.numerics;
    let mut warnings = Vec::new();
    let set = solve_roots(&pr, cfg, &mut warnings);
    let mut max_residual: f64 = 0.0;
    let mut profiles = 0;
    for o in run_all(&shoot_sources(cfg), &pr, &set, cfg) {
        let traj = match o.traj {
            Ok(t) => t,
            Err(e) => {
                warnings.push(format!("{}: {e}", o.id));
                out.json(&format!("audit_{}.json", o.id), &json!({ "id": o.id, "source": o.source, "error": e.to_string() }))?;
                continue;
            }
        };
        let full = match transforms::to_radial(&traj, &pr) {
            Ok(p) => p,
            Err(e) => {
                warnings.push(format!("{}: no profile, {e}", o.id));
                out.json(
                    &format!("audit_{}.json", o.id),
                    &json!({ "id": o.id, "source": o.source, "trajectory": trajectory_json(&traj), "error": e.to_string() }),
                )?;
                continue;
            }
        };
        let (ta, tb) = transforms::nonlinear_window(&traj, &pr, m.profile_decades * std::f64::consts::LN_10, m.profile_forcing_floor);
        let coarse = transforms::to_radial(&traj.resample_uniform(&pr, ta, tb, m.profile_points)?, &pr)?;
        let fine = transforms::to_radial(&traj.resample_uniform(&pr, ta, tb, 2 * m.profile_points - 1)?, &pr)?;
        let res = transforms::pde_residual(&coarse, &pr)?;
        let res_fine = transforms::pde_residual(&fine, &pr)?;
        max_residual = max_residual.max(res);
        let harnack = transforms::harnack_ratio(&coarse).unwrap_or_default();
        let harnack_max = harnack.iter().map(|h| h.1).fold(0.0, f64::max);
        let sign_violations = (0..coarse.len())
            .filter(|&j| (coarse.u[j] > 0.0 && coarse.du[j] >= 0.0) || (coarse.v[j] > 0.0 && coarse.dv[j] >= 0.0))
            .count();
        let (slope_small_r, slope_large_r) = end_slopes(&full);
        let rows: Vec<Vec<String>> = (0..coarse.len())
            .map(|j| vec![num(coarse.grid[j]), num(coarse.u[j]), num(coarse.du[j]), num(coarse.v[j]), num(coarse.dv[j])])
            .collect();
        let header: Vec<String> = ["r", "u", "du", "v", "dv"].iter().map(|s| s.to_string()).collect();
        out.csv(&format!("profile_{}.csv", o.id), &header, &rows)?;
        profiles += 1;
        out.json(
            &format!("audit_{}.json", o.id),
            &json!({
                "id": o.id,
                "source": o.source,
                "trajectory": trajectory_json(&traj),
                "window_t": [ta, tb],
                "window_r": [coarse.grid[0], coarse.grid[coarse.len() - 1]],
                "points": coarse.len(),
                "pde_residual": res,
                "pde_residual_refined": res_fine,
                "refined_points": fine.len(),
                "observed_order": (res / res_fine).log2(),
                "derivative_sign_violations": sign_violations,
                "decay_constant": full.decay_constant(),
                "slope_small_r": slope_small_r,
                "slope_large_r": slope_large_r,
                "expected_slope_small_r": -pr.delta,
                "expected_slope_large_r": -(f64::from(pr.n) - 2.0),
                "harnack": harnack.iter().map(|(r, q)| json!([r, q])).collect::<Vec<_>>(),
                "harnack_max": harnack_max,
            }),
        )?;
    }
    Ok(Report {
        summary: json!({ "runs": cfg.shoot.directions.len(), "profiles": profiles, "max_pde_residual": max_residual }),
        warnings,
    })
}

fn run_critical_check(cfg: &ScenarioConfig, out: &mut Outputs) -> Result<Report, RunError> {
    let pr = params_of(cfg)?;
    if !pr.is_critical {
        return Err(eflab_core::Error::NotCritical { tau: pr.tau }.into());
    }
    let sources = state_sources(cfg, &pr);
    if sources.is_empty() {
        return Err(RunError::Config("simulate: no initial states (set simulate.initial or simulate.random)".into()));
    }
    let mut warnings = Vec::new();
    let set = solve_roots(&pr, cfg, &mut warnings);
    let mut worst: f64 = 0.0;
    for o in run_all(&sources, &pr, &set, cfg) {
        let traj = match o.traj {
            Ok(t) => t,
            Err(e) => {
                warnings.push(format!("{}: {e}", o.id));
                out.json(&format!("audit_{}.json", o.id), &json!({ "id": o.id, "source": o.source, "error": e.to_string() }))?;
                continue;
            }
        };
        let dev = energy::pohozaev_check(&traj, &pr)?;
        worst = worst.max(dev);
        out.csv(&format!("trajectory_{}.csv", o.id), &trajectory_header(), &trajectory_rows(&traj, &pr)?)?;
        out.json(
            &format!("audit_{}.json", o.id),
            &json!({
                "id": o.id,
                "source": o.source,
                "trajectory": trajectory_json(&traj),
                "psi_initial": energy::psi(traj.first(), &pr)?,
                "pohozaev_max_deviation": dev,
            }),
        )?;
    }
    Ok(Report { summary: json!({ "runs": sources.len(), "max_pohozaev_deviation": worst }), warnings })
}
