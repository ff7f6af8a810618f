//! Maps between Fowler trajectories and radial profiles, the Kelvin time reversal, scaling,
//! and profile diagnostics.
//!
//! `r = e^{-t}`, `u(r) = r^{-δ} w₁(t)`, `u'(r) = -r^{-δ-1}(δ w₁ + w₁')`. Because
//! `δ + δ₀ = n - 2`, the Kelvin transform is exactly `t ↦ -t` in these coordinates.

use alloc::vec::Vec;

use crate::fowler::{field, ConeExit, FowlerState, Status, System, Trajectory};
use crate::math::{abs, exp, ln, powf};
use crate::{Error, Params, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    /// Strictly increasing, positive.
    pub grid: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    pub params: Params,
}

impl RadialProfile {
    pub fn new(grid: Vec<f64>, u: Vec<f64>, du: Vec<f64>, v: Vec<f64>, dv: Vec<f64>, params: Params) -> Result<Self> {
        let m = grid.len();
        if u.len() != m || du.len() != m || v.len() != m || dv.len() != m {
            return Err(Error::InvalidArgument("profile columns differ in length"));
        }
        if let Some(&r) = grid.iter().find(|r| !(**r > 0.0)) {
            return Err(Error::NonPositiveRadius { r });
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("profile grid must be strictly increasing"));
        }
        for j in 0..m {
            if !(u[j] >= 0.0 && v[j] >= 0.0) {
                return Err(Error::NegativeComponent { t: -ln(grid[j]), w1: u[j], w2: v[j] });
            }
        }
        Ok(RadialProfile { grid, u, du, v, dv, params })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Smallest `C` with `u, v ≤ C r^{-δ}` on the grid, i.e. `max(w₁, w₂)`.
    pub fn decay_constant(&self) -> f64 {
        let d = self.params.delta;
        (0..self.len())
            .map(|j| powf(self.grid[j], d) * self.u[j].max(self.v[j]))
            .fold(0.0, f64::max)
    }
}

/// Radial profile of a standard-system trajectory, on the grid `r_j = e^{-t_j}` sorted
/// increasingly.
pub fn to_radial(traj: &Trajectory, params: &Params) -> Result<RadialProfile> {
    if traj.system != System::Standard {
        return Err(Error::WrongSystem { expected: "standard" });
    }
    if traj.status == Status::LeftPositiveCone || traj.cone_exit.is_some() {
        return Err(Error::ConeExit);
    }
    let d = params.delta;
    let m = traj.samples.len();
    let (mut grid, mut u, mut du, mut v, mut dv) =
        (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
    for s in traj.samples.iter().rev() {
        if !s.in_cone() {
            return Err(Error::NegativeComponent { t: s.t, w1: s.w1, w2: s.w2 });
        }
        let r = exp(-s.t);
        let rmd = exp(d * s.t);
        grid.push(r);
        u.push(rmd * s.w1);
        du.push(-rmd / r * (d * s.w1 + s.dw1));
        v.push(rmd * s.w2);
        dv.push(-rmd / r * (d * s.w2 + s.dw2));
    }
    RadialProfile::new(grid, u, du, v, dv, *params)
}

/// Fowler states of a profile, ordered by increasing `t`.
pub fn from_radial(profile: &RadialProfile) -> Vec<FowlerState> {
    let d = profile.params.delta;
    (0..profile.len())
        .rev()
        .map(|j| {
            let r = profile.grid[j];
            let t = -ln(r);
            let rd = exp(-d * t);
            FowlerState::new(
                t,
                rd * profile.u[j],
                -rd * (d * profile.u[j] + r * profile.du[j]),
                rd * profile.v[j],
                -rd * (d * profile.v[j] + r * profile.dv[j]),
            )
        })
        .collect()
}

/// Max relative residual of `-Δu = μ₁u^p + βu^q v^{q+1}` and its `v` twin over interior
/// grid points.
///
/// Derivatives come from three-point central differences in `t = -ln r`, applied to
/// `z = r^γ u` and chain-ruled back:
/// `Δu = r^{-γ-2}(z_tt + (2γ-n+2) z_t + γ(γ-n+2) z)`.
/// At each point `γ = -r u'/u` is the local log-slope, so `z_t` vanishes there and pure
/// powers (the singular solutions, the harmonic tail, a regular core) are differentiated
/// exactly. `γ = δ` reduces to the Fowler variables.
pub fn pde_residual(profile: &RadialProfile, params: &Params) -> Result<f64> {
    let m = profile.len();
    if m < 3 {
        return Err(Error::TooFewPoints { got: m, need: 3 });
    }
    let pr = params;
    let (p, q) = (pr.p, pr.q);
    let nm2 = f64::from(pr.n) - 2.0;
    let t: Vec<f64> = profile.grid.iter().map(|r| -ln(*r)).collect();
    let mut worst: f64 = 0.0;
    for j in 1..m - 1 {
        let r = profile.grid[j];
        // t decreases with j; the weights below are symmetric under that
        let (h0, h1) = (t[j - 1] - t[j], t[j] - t[j + 1]);
        let (u, v) = (profile.u[j], profile.v[j]);
        let forcing = [
            pr.mu1 * powf(u, p) + pr.beta * powf(u, q) * powf(v, q + 1.0),
            pr.mu2 * powf(v, p) + pr.beta * powf(v, q) * powf(u, q + 1.0),
        ];
        let columns = [(&profile.u, &profile.du), (&profile.v, &profile.dv)];
        for (c, (f, df)) in columns.into_iter().enumerate() {
            let slope = -r * df[j] / f[j];
            let gamma = if f[j] > 0.0 && slope.is_finite() { slope } else { pr.delta };
            let z = |k: usize| powf(profile.grid[k] / r, gamma) * f[k];
            let zt = -(gamma * f[j] + r * df[j]);
            let ztt = 2.0 * (h1 * z(j - 1) - (h0 + h1) * f[j] + h0 * z(j + 1)) / (h0 * h1 * (h0 + h1));
            let laplacian = (ztt + (2.0 * gamma - nm2) * zt + gamma * (gamma - nm2) * f[j]) / (r * r);
            worst = worst.max(abs(laplacian + forcing[c]) / (forcing[c] + 1e-300));
        }
    }
    Ok(worst)
}

fn forcing_ratio(s: &FowlerState, params: &Params, sigma: f64) -> f64 {
    let pr = params;
    let (p, q) = (pr.p, pr.q);
    let (w1, w2) = (s.w1.max(0.0), s.w2.max(0.0));
    let r1 = if w1 > 0.0 { pr.mu1 * powf(w1, p - 1.0) + pr.beta * powf(w1, q - 1.0) * powf(w2, q + 1.0) } else { 0.0 };
    let r2 = if w2 > 0.0 { pr.mu2 * powf(w2, p - 1.0) + pr.beta * powf(w2, q - 1.0) * powf(w1, q + 1.0) } else { 0.0 };
    r1.max(r2) / sigma
}

/// Earliest time window of length `width` on which the ratio of nonlinear forcing to
/// the linear term `σ w_i` never drops below `floor`. If there is none, the window on
/// which the smallest ratio is largest. The whole span if it is shorter than `width`.
///
/// Where that ratio is small the profile is numerically harmonic (launch side) or a
/// regular core (`w → 0` again), and `Δu` cannot be recovered from Fowler samples
/// beyond the ratio times machine precision.
pub fn nonlinear_window(traj: &Trajectory, params: &Params, width: f64, floor: f64) -> (f64, f64) {
    let (t0, t1) = traj.t_span();
    if t1 - t0 <= width {
        return (t0, t1);
    }
    let sigma = params.linear(traj.system);
    let s = &traj.samples;
    let ratio: Vec<f64> = s.iter().map(|x| forcing_ratio(x, params, sigma)).collect();
    // sliding minimum over windows [t_a, t_a + width], plus the one flush with t1
    let mut best = (f64::NEG_INFINITY, t0);
    let mut deque = alloc::collections::VecDeque::new();
    let mut b = 0;
    for a in 0..s.len() {
        let start = s[a].t.min(t1 - width);
        while b < s.len() && s[b].t <= start + width {
            while deque.back().is_some_and(|&k: &usize| ratio[k] >= ratio[b]) {
                deque.pop_back();
            }
            deque.push_back(b);
            b += 1;
        }
        while deque.front().is_some_and(|&k| s[k].t < start) {
            deque.pop_front();
        }
        if let Some(&k) = deque.front() {
            if ratio[k] >= floor {
                return (start, start + width);
            }
            if ratio[k] > best.0 {
                best = (ratio[k], start);
            }
        }
        if start < s[a].t {
            break;
        }
    }
    (best.1, best.1 + width)
}

/// `w̄(t̄) = w(-t̄)`: samples reversed, times and derivatives negated, system flipped.
/// An involution.
pub fn kelvin_reverse(traj: &Trajectory) -> Trajectory {
    let samples = traj
        .samples
        .iter()
        .rev()
        .map(|s| FowlerState::new(-s.t, s.w1, -s.dw1, s.w2, -s.dw2))
        .collect();
    let status = match traj.status {
        Status::StepFailure { t, h } => Status::StepFailure { t: -t, h },
        other => other,
    };
    Trajectory {
        samples,
        status,
        tolerances: traj.tolerances,
        system: traj.system.other(),
        cone_exit: traj.cone_exit.map(|c| ConeExit { component: c.component, t_lo: -c.t_hi, t_hi: -c.t_lo }),
        launched_from: traj.launched_from,
        time_reversed: !traj.time_reversed,
    }
}

/// Max over samples of `|F_other(w̄) - dw̄/dt̄|`, where `dw̄/dt̄` is obtained from the
/// field of `traj`'s own system at `w(-t̄)`: the residual of the reversed trajectory
/// against the twin system.
pub fn reversal_residual(traj: &Trajectory, params: &Params) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in &traj.samples {
        if !s.in_cone() {
            return Err(Error::NegativeComponent { t: s.t, w1: s.w1, w2: s.w2 });
        }
        let f = field(&s.vector(), params, traj.system);
        let reversed = [s.w1, -s.dw1, s.w2, -s.dw2];
        let expected = [-s.dw1, f[1], -s.dw2, f[3]];
        let g = field(&reversed, params, traj.system.other());
        for i in 0..4 {
            worst = worst.max(abs(g[i] - expected[i]) / (1.0 + abs(expected[i])));
        }
    }
    Ok(worst)
}

/// Trajectory of the rescaled solution `u^λ(x) = λ^δ u(λx)`: `w^λ(t) = w(t - ln λ)`, so
/// every sample time moves by `+ln λ`.
pub fn scale_translate(traj: &Trajectory, lambda: f64) -> Result<Trajectory> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument("scaling factor must be positive and finite"));
    }
    let shift = ln(lambda);
    let mut out = traj.clone();
    if shift == 0.0 {
        return Ok(out);
    }
    for s in &mut out.samples {
        s.t += shift;
    }
    if let Status::StepFailure { t, h } = out.status {
        out.status = Status::StepFailure { t: t + shift, h };
    }
    if let Some(c) = &mut out.cone_exit {
        c.t_lo += shift;
        c.t_hi += shift;
    }
    Ok(out)
}

/// `sup(u+v)/inf(u+v)` over grid points of each dyadic annulus `[r₀2^k, r₀2^{k+1}]`,
/// starting at the smallest grid radius. Annuli with fewer than 4 points are skipped;
/// a vanishing infimum gives `+∞`.
pub fn harnack_ratio(profile: &RadialProfile) -> Result<Vec<(f64, f64)>> {
    let m = profile.len();
    if m < 2 {
        return Err(Error::TooFewPoints { got: m, need: 2 });
    }
    let (r_min, r_max) = (profile.grid[0], profile.grid[m - 1]);
    let slack = 1.0 + 1e-12;
    if r_max * slack < 4.0 * r_min {
        return Err(Error::InvalidArgument("profile spans fewer than two dyadic annuli"));
    }
    let mut out = Vec::new();
    let mut lo = r_min;
    let mut start = 0;
    while 2.0 * lo <= r_max * slack {
        let hi = 2.0 * lo;
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        let mut count = 0;
        let mut j = start;
        while j < m && profile.grid[j] <= hi * slack {
            if profile.grid[j] >= lo / slack {
                let s = profile.u[j] + profile.v[j];
                sup = sup.max(s);
                inf = inf.min(s);
                count += 1;
            }
            j += 1;
        }
        if count >= 4 {
            out.push((lo, if inf > 0.0 { sup / inf } else { f64::INFINITY }));
        }
        // the closing point of this annulus opens the next one
        start = j.saturating_sub(1);
        lo = hi;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fowler::{equilibria, integrate, shoot, IntegrateOptions};
    use crate::roots::solve_kl;

    fn n5p2() -> Params {
        Params::new(5, 2.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn log_grid(a: f64, b: f64, m: usize) -> Vec<f64> {
        (0..m).map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (m - 1) as f64).exp()).collect()
    }

    fn singular(pr: &Params, k: f64, l: f64, grid: Vec<f64>) -> RadialProfile {
        let u: Vec<f64> = grid.iter().map(|r| k * pr.c0 * r.powf(-pr.delta)).collect();
        let v: Vec<f64> = grid.iter().map(|r| l * pr.c0 * r.powf(-pr.delta)).collect();
        let du = grid.iter().zip(&u).map(|(r, u)| -pr.delta * u / r).collect();
        let dv = grid.iter().zip(&v).map(|(r, v)| -pr.delta * v / r).collect();
        RadialProfile::new(grid, u, du, v, dv, *pr).unwrap()
    }

    #[test]
    fn equilibrium_profile() {
        let pr = n5p2();
        let roots = solve_kl(&pr);
        let eq = equilibria(&pr, &roots)[3];
        let traj = integrate(&eq.state, 5.0, &pr, System::Standard, &IntegrateOptions::default()).unwrap();
        let prof = to_radial(&traj, &pr).unwrap();
        for j in 0..prof.len() {
            let want = pr.c0 * prof.grid[j].powf(-pr.delta) * eq.state.w1 / pr.c0;
            assert!((prof.u[j] - want).abs() <= 1e-13 * want);
        }
        assert!(prof.grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn exact_profile_residual() {
        let pr = n5p2();
        let prof = singular(&pr, 0.5, 0.5, log_grid(1e-3, 1e3, 200));
        assert!(pde_residual(&prof, &pr).unwrap() <= 1e-5);
        let prof = singular(&pr, 1.0, 0.0, log_grid(1e-3, 1e3, 200));
        assert!(pde_residual(&prof, &pr).unwrap() <= 1e-5);
    }

    #[test]
    fn zero_profile_and_short_grid() {
        let pr = n5p2();
        let prof = singular(&pr, 0.0, 0.0, log_grid(1e-2, 1e2, 40));
        assert_eq!(pde_residual(&prof, &pr).unwrap(), 0.0);
        let short = singular(&pr, 1.0, 0.0, log_grid(1.0, 2.0, 2));
        assert_eq!(pde_residual(&short, &pr), Err(Error::TooFewPoints { got: 2, need: 3 }));
    }

    #[test]
    fn smooth_profile_converges_at_second_order() {
        // u = v = the smooth decaying profile of the critical scalar problem
        let pr = Params::new(4, 3.0, 1.0, 1.0, 0.0).unwrap();
        let make = |m: usize| {
            let grid = log_grid(1e-2, 1e2, m);
            let u: Vec<f64> = grid.iter().map(|r| 8f64.sqrt() / (1.0 + r * r)).collect();
            let du = grid.iter().map(|r| -2.0 * 8f64.sqrt() * r / (1.0 + r * r).powi(2)).collect();
            let z = vec![0.0; m];
            RadialProfile::new(grid, u, du, z.clone(), z, pr).unwrap()
        };
        let e1 = pde_residual(&make(101), &pr).unwrap();
        let e2 = pde_residual(&make(201), &pr).unwrap();
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}, {e1} {e2}");
    }

    #[test]
    fn round_trip() {
        let pr = Params::new(3, 4.0, 1.0, 2.0, 0.5).unwrap();
        let roots = solve_kl(&pr);
        let traj = shoot(&pr, &roots, (1.0, 1.0), 1e-4, 30.0).unwrap();
        let prof = to_radial(&traj, &pr).unwrap();
        let back = from_radial(&prof);
        assert_eq!(back.len(), traj.samples.len());
        for (a, b) in back.iter().zip(&traj.samples) {
            for (x, y) in a.vector().iter().zip(b.vector()) {
                assert!((x - y).abs() <= 1e-13 * (1.0 + y.abs()), "{x} vs {y}");
            }
            assert!((a.t - b.t).abs() <= 1e-13 * (1.0 + b.t.abs()));
        }
    }

    #[test]
    fn kelvin_is_involution_and_time_reversal() {
        let pr = Params::new(4, 2.5, 1.0, 0.8, 1.2).unwrap();
        let roots = solve_kl(&pr);
        let traj = shoot(&pr, &roots, (1.0, 0.3), 1e-5, 40.0).unwrap();
        let rev = kelvin_reverse(&traj);
        assert_eq!(rev.system, System::Kelvin);
        assert!(rev.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(kelvin_reverse(&rev), traj);
        assert!(reversal_residual(&traj, &pr).unwrap() <= 1e-10);
        // the reversed samples solve the Kelvin system: integrate it between neighbours
        let opts = IntegrateOptions { detect_convergence: false, ..IntegrateOptions::with_tol(1e-12, 1e-12) };
        let (a, b) = (rev.samples[rev.samples.len() / 2], rev.samples[rev.samples.len() / 2 + 5]);
        let seg = integrate(&a, b.t, &pr, System::Kelvin, &opts).unwrap();
        let end = seg.last();
        for (x, y) in end.vector().iter().zip(b.vector()) {
            assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn scaling_is_translation() {
        let pr = n5p2();
        let roots = solve_kl(&pr);
        let traj = shoot(&pr, &roots, (1.0, 0.0), 1e-4, 20.0).unwrap();
        assert_eq!(scale_translate(&traj, 1.0).unwrap(), traj);
        let e = scale_translate(&traj, core::f64::consts::E).unwrap();
        for (a, b) in e.samples.iter().zip(&traj.samples) {
            assert!((a.t - b.t - 1.0).abs() < 1e-14 * (1.0 + b.t.abs()));
            assert_eq!(a.vector(), b.vector());
        }
        assert!(scale_translate(&traj, 0.0).is_err());
    }

    #[test]
    fn harnack_exact_power() {
        let pr = n5p2();
        // eight points per octave so annulus ends are grid points
        let grid: Vec<f64> = (0..=48).map(|i| 2f64.powf(i as f64 / 8.0) * 1e-2).collect();
        let prof = singular(&pr, 0.5, 0.5, grid);
        let ratios = harnack_ratio(&prof).unwrap();
        assert_eq!(ratios.len(), 6);
        for (_, q) in ratios {
            assert!((q - 2f64.powf(pr.delta)).abs() < 1e-12);
        }
        let z = vec![0.0; 49];
        let grid: Vec<f64> = (0..=48).map(|i| 2f64.powf(i as f64 / 8.0)).collect();
        let flat = RadialProfile::new(grid, vec![1.0; 49], z.clone(), z.clone(), z.clone(), pr).unwrap();
        assert!(harnack_ratio(&flat).unwrap().iter().all(|(_, q)| *q == 1.0));
        let grid: Vec<f64> = (0..=48).map(|i| 2f64.powf(i as f64 / 8.0)).collect();
        let dead = RadialProfile::new(grid, z.clone(), z.clone(), z.clone(), z, pr).unwrap();
        assert!(harnack_ratio(&dead).unwrap().iter().all(|(_, q)| q.is_infinite()));
    }

    #[test]
    fn window_sits_on_the_nonlinear_part() {
        // converging shot: w ≈ 1e-6 e^t early on, and w/σ crosses 1e-3 near w = 2e-3
        let pr = Params::new(5, 2.0, 1.0, 1.0, 0.0).unwrap();
        let traj = shoot(&pr, &solve_kl(&pr), (1.0, 0.0), 1e-6, 400.0).unwrap();
        let (t0, t1) = traj.t_span();
        let (a, b) = nonlinear_window(&traj, &pr, 10.0, 1e-3);
        assert!((a - (2e-3f64 / 1e-6).ln()).abs() < 0.1 && b == a + 10.0, "{a}");
        // an unreachable floor falls back to the best window, where the ratio only grows
        assert_eq!(nonlinear_window(&traj, &pr, 10.0, 1e3), (t1 - 10.0, t1));
        assert_eq!(nonlinear_window(&traj, &pr, 1e3, 1e-3), (t0, t1));

        // critical bubble: w = √2 sech(t - t*) never reaches the floor, so the best window is centred
        let pr = Params::new(4, 3.0, 1.0, 1.0, 0.0).unwrap();
        let traj = shoot(&pr, &solve_kl(&pr), (1.0, 0.0), 1e-6, 30.0).unwrap();
        let peak = traj.samples.iter().max_by(|a, b| a.w1.total_cmp(&b.w1)).unwrap().t;
        let (a, b) = nonlinear_window(&traj, &pr, 8.0, 10.0);
        assert!(((a + b) / 2.0 - peak).abs() < 0.1, "{a} {b} {peak}");
    }

    #[test]
    fn cone_exit_is_rejected() {
        let pr = n5p2();
        let s = FowlerState::new(0.0, 0.1, -3.0, 0.1, -3.0);
        let traj = integrate(&s, 10.0, &pr, System::Standard, &IntegrateOptions::default()).unwrap();
        assert_eq!(traj.status, Status::LeftPositiveCone);
        assert_eq!(to_radial(&traj, &pr), Err(Error::ConeExit));
        assert!(matches!(to_radial(&kelvin_reverse(&traj), &pr), Err(Error::WrongSystem { .. })));
    }
}
