//! Dormand–Prince 5(4) with a PI step controller, cone-exit events and
//! quintic Hermite dense output.

use alloc::vec;

use super::{field, second_derivative, ConeExit, FowlerState, Status, System, Tolerances, Trajectory};
use crate::math::{abs, hypot4, powf, sqrt};
use crate::{Error, Params, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub tol: Tolerances,
    pub h_init: f64,
    pub h_max: f64,
    /// Step sizes below this end the run with [`Status::StepFailure`].
    pub h_min: f64,
    pub max_steps: usize,
    /// Runs stop with [`Status::Unbounded`] once the phase-vector norm exceeds this.
    pub cap: f64,
    pub detect_convergence: bool,
    pub converge_threshold: f64,
    pub converge_window: f64,
    /// Width of the bisection bracket for cone-exit events.
    pub event_tol: f64,
    /// For q < 1, a component falling toward zero may shrink by at most this
    /// fraction per step. The field is only Hölder there and the dense output
    /// needs the local power law resolved. Zero disables the limit.
    pub boundary_fraction: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            tol: Tolerances::default(),
            h_init: 1e-3,
            h_max: 0.1,
            h_min: 1e-14,
            max_steps: 5_000_000,
            cap: 1e3,
            detect_convergence: true,
            converge_threshold: 1e-9,
            converge_window: 1.0,
            event_tol: 1e-12,
            boundary_fraction: 0.1,
        }
    }
}

impl IntegrateOptions {
    pub fn with_tol(abs: f64, rel: f64) -> Self {
        IntegrateOptions { tol: Tolerances { abs, rel }, ..Default::default() }
    }
}

// Stage nodes are not needed: the field is autonomous.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order weights are the last row of A (FSAL); E = b5 - b4.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BOUNDARY_H_FLOOR: f64 = 1e-8;
const PI_BETA: f64 = 0.04;
const PI_ALPHA: f64 = 0.2 - 0.75 * PI_BETA;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Integrates from `initial` to `t_end` (or an earlier terminating event).
pub fn integrate(
    initial: &FowlerState,
    t_end: f64,
    params: &Params,
    system: System,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !initial.in_cone() {
        return Err(Error::NegativeComponent { t: initial.t, w1: initial.w1, w2: initial.w2 });
    }
    if !(t_end > initial.t) {
        return Err(Error::InvalidArgument("t_end must exceed the initial time"));
    }
    if !(opts.tol.abs > 0.0 && opts.tol.rel >= 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive"));
    }

    let mut traj = Trajectory {
        samples: vec![*initial],
        status: Status::ReachedTEnd,
        tolerances: opts.tol,
        system,
        cone_exit: None,
        launched_from: None,
        time_reversed: false,
    };

    let mut t = initial.t;
    let mut y = initial.vector();
    let mut k1 = field(&y, params, system);
    let mut h = boundary_limit(&y, params, opts, opts.h_init.min(opts.h_max)).min(t_end - t);
    let mut err_prev: f64 = 1e-4;
    let mut rejected_last = false;
    let mut calm_since = calm(&y, &k1, opts).then_some(t);
    let mut steps = 0usize;

    loop {
        if t >= t_end {
            traj.status = Status::ReachedTEnd;
            break;
        }
        if h < opts.h_min || steps >= opts.max_steps {
            traj.status = Status::StepFailure { t, h };
            break;
        }
        steps += 1;
        let last_step = t + h >= t_end;
        if last_step {
            h = t_end - t;
        }

        let mut k = [[0.0; 4]; 7];
        k[0] = k1;
        let mut stage = y;
        for s in 1..7 {
            for i in 0..4 {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + h * acc;
            }
            k[s] = field(&stage, params, system);
        }
        let y_new = stage;

        let mut err_sq = 0.0;
        for i in 0..4 {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let scale = opts.tol.abs + opts.tol.rel * abs(y[i]).max(abs(y_new[i]));
            let r = h * e / scale;
            err_sq += r * r;
        }
        let err = sqrt(err_sq / 4.0);

        if !(err <= 1.0) {
            // rejected (or non-finite)
            let fac = if err.is_finite() { (SAFETY * powf(err, -0.2)).max(FAC_MIN) } else { FAC_MIN };
            h *= fac.min(1.0);
            rejected_last = true;
            continue;
        }

        let t_new = if last_step { t_end } else { t + h };
        let k_new = k[6];

        if y_new[0] < 0.0 || y_new[2] < 0.0 {
            let a = FowlerState::from_vector(t, y);
            let b = FowlerState::from_vector(t_new, y_new);
            let exit = locate_exit(&a, &b, params, system, opts.event_tol);
            if exit.t_lo > t {
                let (mut ys, _) = hermite(&a, &b, params, system, exit.t_lo);
                let c = if exit.component == 1 { 0 } else { 2 };
                ys[c] = ys[c].max(0.0);
                let other = 2 - c;
                ys[other] = ys[other].max(0.0);
                traj.samples.push(FowlerState::from_vector(exit.t_lo, ys));
            }
            traj.cone_exit = Some(exit);
            traj.status = Status::LeftPositiveCone;
            break;
        }

        t = t_new;
        y = y_new;
        k1 = k_new;
        traj.samples.push(FowlerState::from_vector(t, y));

        if !(hypot4(&y) <= opts.cap) {
            traj.status = Status::Unbounded;
            break;
        }
        if opts.detect_convergence {
            if calm(&y, &k1, opts) {
                let since = *calm_since.get_or_insert(t);
                if t - since >= opts.converge_window {
                    traj.status = Status::ConvergedToEquilibrium(None);
                    break;
                }
            } else {
                calm_since = None;
            }
        }

        let e = err.max(1e-10);
        let mut fac = SAFETY * powf(e, -PI_ALPHA) * powf(err_prev, PI_BETA);
        fac = fac.clamp(FAC_MIN, FAC_MAX);
        if rejected_last {
            fac = fac.min(1.0);
        }
        h = boundary_limit(&y, params, opts, (h * fac).min(opts.h_max));
        err_prev = e;
        rejected_last = false;
    }
    Ok(traj)
}

fn boundary_limit(y: &[f64; 4], params: &Params, opts: &IntegrateOptions, h: f64) -> f64 {
    if !(params.q < 1.0 && opts.boundary_fraction > 0.0) {
        return h;
    }
    // Below about 1e-8 the dense-output derivative is dominated by rounding
    // (it scales like eps / h), so the limit stops there and the last few
    // steps to the boundary close at that size.
    let floor = BOUNDARY_H_FLOOR.max(opts.h_min);
    let mut h = h;
    for (w, dw) in [(y[0], y[1]), (y[2], y[3])] {
        if w > 0.0 && dw < 0.0 {
            h = h.min((opts.boundary_fraction * w / -dw).max(floor));
        }
    }
    h
}

fn calm(y: &[f64; 4], f: &[f64; 4], opts: &IntegrateOptions) -> bool {
    let vel = sqrt(y[1] * y[1] + y[3] * y[3]);
    hypot4(f) < opts.converge_threshold && vel < opts.converge_threshold
}

/// Bisects the dense output of one accepted step for the first component to turn negative.
fn locate_exit(
    a: &FowlerState,
    b: &FowlerState,
    params: &Params,
    system: System,
    width: f64,
) -> ConeExit {
    let mut best: Option<ConeExit> = None;
    for (component, idx) in [(1u8, 0usize), (2, 2)] {
        let end = b.vector()[idx];
        if end >= 0.0 {
            continue;
        }
        let mut lo = a.t;
        let mut hi = b.t;
        while hi - lo > width {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (ym, _) = hermite(a, b, params, system, mid);
            if ym[idx] >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if best.map_or(true, |e| hi < e.t_hi) {
            best = Some(ConeExit { component, t_lo: lo, t_hi: hi });
        }
    }
    best.expect("at least one component ended negative")
}

/// Hermite interpolation on `[a.t, b.t]`: quintic when second derivatives exist at both
/// nodes, cubic otherwise. Returns the phase vector and its time derivative at `t`.
pub(crate) fn hermite(
    a: &FowlerState,
    b: &FowlerState,
    params: &Params,
    system: System,
    t: f64,
) -> ([f64; 4], [f64; 4]) {
    let ya = a.vector();
    let yb = b.vector();
    let fa = field(&ya, params, system);
    let fb = field(&yb, params, system);
    let h = b.t - a.t;
    if h == 0.0 {
        return (ya, fa);
    }
    let s = (t - a.t) / h;
    let (s2, s3) = (s * s, s * s * s);
    let (s4, s5) = (s3 * s, s3 * s2);
    let mut y = [0.0; 4];
    let mut dy = [0.0; 4];
    match (
        second_derivative(&ya, &fa, params, system),
        second_derivative(&yb, &fb, params, system),
    ) {
        (Some(ga), Some(gb)) => {
            let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
            let h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
            let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
            let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
            let h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
            let h3 = 0.5 * s3 - s4 + 0.5 * s5;
            let d0 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
            let d1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
            let d4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
            let d2 = s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4;
            let d3 = 1.5 * s2 - 4.0 * s3 + 2.5 * s4;
            for i in 0..4 {
                y[i] = h0 * ya[i] + h5 * yb[i] + h * (h1 * fa[i] + h4 * fb[i]) + h * h * (h2 * ga[i] + h3 * gb[i]);
                dy[i] = d0 * (ya[i] - yb[i]) / h + d1 * fa[i] + d4 * fb[i] + h * (d2 * ga[i] + d3 * gb[i]);
            }
        }
        _ => {
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            let d00 = 6.0 * s2 - 6.0 * s;
            let d10 = 3.0 * s2 - 4.0 * s + 1.0;
            let d11 = 3.0 * s2 - 2.0 * s;
            for i in 0..4 {
                y[i] = h00 * ya[i] + h01 * yb[i] + h * (h10 * fa[i] + h11 * fb[i]);
                dy[i] = d00 * (ya[i] - yb[i]) / h + d10 * fa[i] + d11 * fb[i];
            }
        }
    }
    (y, dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fowler::rhs;

    fn n5p2(beta: f64) -> Params {
        Params::new(5, 2.0, 1.0, 1.0, beta).unwrap()
    }

    /// Fixed-step classical RK4 on the scalar equation w'' = -τw' + σw - μ w^p.
    fn rk4_scalar(pr: &Params, w: f64, v: f64, t_end: f64, h: f64) -> (f64, f64) {
        let f = |w: f64, v: f64| (v, -pr.tau * v + pr.sigma * w - pr.mu1 * w.abs().powf(pr.p) * w.signum());
        let (mut w, mut v) = (w, v);
        let steps = (t_end / h).round() as usize;
        for _ in 0..steps {
            let (a1, b1) = f(w, v);
            let (a2, b2) = f(w + 0.5 * h * a1, v + 0.5 * h * b1);
            let (a3, b3) = f(w + 0.5 * h * a2, v + 0.5 * h * b2);
            let (a4, b4) = f(w + h * a3, v + h * b3);
            w += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        (w, v)
    }

    #[test]
    fn equilibrium_is_fixed() {
        let pr = n5p2(1.0);
        let s = FowlerState::new(0.0, 1.0, 0.0, 1.0, 0.0);
        let traj = integrate(&s, 50.0, &pr, System::Standard, &IntegrateOptions::default()).unwrap();
        let e = traj.last();
        assert!((e.w1 - 1.0).abs() < 1e-10 && (e.w2 - 1.0).abs() < 1e-10);
        assert!(traj.status.is_converged());
    }

    #[test]
    fn decoupled_matches_rk4_oracle() {
        let pr = n5p2(0.0);
        let s = FowlerState::new(0.0, 0.3, 0.25, 0.0, 0.0);
        let mut opts = IntegrateOptions::default();
        opts.detect_convergence = false;
        let traj = integrate(&s, 10.0, &pr, System::Standard, &opts).unwrap();
        assert_eq!(traj.status, Status::ReachedTEnd);
        let end = traj.last();
        assert_eq!(end.t, 10.0);
        assert!(traj.samples.iter().all(|s| s.w2 == 0.0 && s.dw2 == 0.0));
        let (w, v) = rk4_scalar(&pr, 0.3, 0.25, 10.0, 1e-5);
        assert!((end.w1 - w).abs() < 1e-7, "{} vs {}", end.w1, w);
        assert!((end.dw1 - v).abs() < 1e-7);
    }

    #[test]
    fn autonomous_time_translation() {
        let pr = Params::new(4, 2.6, 1.0, 1.5, 0.8).unwrap();
        let mut opts = IntegrateOptions::default();
        opts.detect_convergence = false;
        let a = integrate(&FowlerState::new(0.0, 0.5, 0.1, 0.8, -0.2), 8.0, &pr, System::Standard, &opts).unwrap();
        let b = integrate(&FowlerState::new(5.0, 0.5, 0.1, 0.8, -0.2), 13.0, &pr, System::Standard, &opts).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        assert_eq!(a.status, b.status);
        assert!((b.last().t - a.last().t - 5.0).abs() < 1e-12);
        for t in [1.0, 3.3, 6.6] {
            let x = a.dense(&pr, t).unwrap().state;
            let y = b.dense(&pr, t + 5.0).unwrap().state;
            assert!((x.w1 - y.w1).abs() < 1e-9 && (x.w2 - y.w2).abs() < 1e-9);
        }
    }

    #[test]
    fn cone_exit_is_bracketed() {
        let pr = n5p2(1.0);
        let s = FowlerState::new(0.0, 0.5, -3.0, 0.7, 0.0);
        let traj = integrate(&s, 20.0, &pr, System::Standard, &IntegrateOptions::default()).unwrap();
        assert_eq!(traj.status, Status::LeftPositiveCone);
        let exit = traj.cone_exit.unwrap();
        assert_eq!(exit.component, 1);
        assert!(exit.t_hi - exit.t_lo <= 1e-12);
        let lo = traj.samples.len() - 2;
        let a = traj.samples[lo];
        let last = *traj.last();
        assert_eq!(last.t, exit.t_lo);
        assert!(traj.samples.iter().all(|s| s.in_cone()));
        assert!(last.w1 >= 0.0 && last.w1 < 1e-10);
        // the crossing lies inside the final accepted step
        assert!(exit.t_lo > a.t);
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn approach_to_holder_boundary_is_resolved() {
        // q = 0.4: steps toward w1 = 0 shrink with w1 until the floor takes over
        let pr = Params::new(6, 1.8, 1.0, 1.0, 2.0).unwrap();
        let s = FowlerState::new(0.0, 6.73, -1.68, 7.28, -1.30);
        let opts = IntegrateOptions::with_tol(1e-10, 1e-10);
        let traj = integrate(&s, 20.0, &pr, System::Standard, &opts).unwrap();
        assert_eq!(traj.status, Status::LeftPositiveCone);
        let n = traj.samples.len();
        let mut limited = 0;
        for w in traj.samples[..n - 1].windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.t - a.t > 1.01 * BOUNDARY_H_FLOOR && a.w1 < 0.1 {
                limited += 1;
                assert!(a.w1 - b.w1 <= 0.15 * a.w1, "w1 {} -> {}", a.w1, b.w1);
            }
        }
        assert!(limited > 20, "{limited}");

        let free = IntegrateOptions { boundary_fraction: 0.0, ..opts };
        let coarse = integrate(&s, 20.0, &pr, System::Standard, &free).unwrap();
        assert!(coarse.samples.len() < n);
        let exit = |t: &Trajectory| t.cone_exit.unwrap().t_lo;
        assert!((exit(&traj) - exit(&coarse)).abs() < 1e-8);
    }

    #[test]
    fn unbounded_growth_stops() {
        // the Kelvin system is anti-damped; a fast start escapes the cap
        let pr = n5p2(1.0);
        let mut opts = IntegrateOptions::default();
        opts.cap = 5.0;
        let s = FowlerState::new(0.0, 1.0, 4.0, 1.0, 4.0);
        let traj = integrate(&s, 100.0, &pr, System::Kelvin, &opts).unwrap();
        assert_eq!(traj.status, Status::Unbounded);
    }

    #[test]
    fn tiny_step_floor_reports_failure() {
        let pr = n5p2(1.0);
        let mut opts = IntegrateOptions::default();
        opts.h_min = 1.0;
        opts.h_init = 0.5;
        let s = FowlerState::new(0.0, 0.5, 0.0, 0.5, 0.0);
        let traj = integrate(&s, 10.0, &pr, System::Standard, &opts).unwrap();
        assert!(matches!(traj.status, Status::StepFailure { .. }));
    }

    #[test]
    fn rejects_bad_input() {
        let pr = n5p2(1.0);
        let opts = IntegrateOptions::default();
        let s = FowlerState::new(0.0, -0.1, 0.0, 0.5, 0.0);
        assert!(integrate(&s, 1.0, &pr, System::Standard, &opts).is_err());
        let s = FowlerState::new(2.0, 0.1, 0.0, 0.5, 0.0);
        assert!(integrate(&s, 1.0, &pr, System::Standard, &opts).is_err());
    }

    #[test]
    fn hermite_reproduces_quintics() {
        // on a single step the dense output must agree with a much finer integration
        let pr = Params::new(3, 4.0, 1.0, 2.0, 0.5).unwrap();
        let mut opts = IntegrateOptions::default();
        opts.detect_convergence = false;
        opts.h_max = 0.4;
        let s = FowlerState::new(0.0, 0.3, 0.1, 0.5, 0.0);
        let coarse = integrate(&s, 6.0, &pr, System::Standard, &opts).unwrap();
        opts.h_max = 0.01;
        opts.tol = Tolerances { abs: 1e-13, rel: 1e-13 };
        let fine = integrate(&s, 6.0, &pr, System::Standard, &opts).unwrap();
        for i in 0..60 {
            let t = 0.05 + 0.0987 * i as f64;
            let a = coarse.dense(&pr, t).unwrap();
            let b = fine.dense(&pr, t).unwrap();
            let f = rhs(&b.state, &pr, System::Standard).unwrap();
            assert!((a.state.w1 - b.state.w1).abs() < 1e-8, "t={t}");
            assert!((a.derivative[1] - f[1]).abs() < 1e-7, "t={t}");
        }
    }
}
