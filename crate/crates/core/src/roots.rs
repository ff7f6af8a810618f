//! Nonnegative scalings `(k, l)` of the homogeneous singular solutions.
//!
//! A pair `(k, l)`, not both zero, gives the solution `(k C₀ |x|^{-δ}, l C₀ |x|^{-δ})`
//! whenever
//!
//! ```text
//! μ₁ k^{2q} + β k^{q-1} l^{q+1} = 1,    μ₂ l^{2q} + β l^{q-1} k^{q+1} = 1.
//! ```
//!
//! On an axis the system degenerates to the single surviving equation, e.g. `μ₂ l^{2q} = 1`
//! when `k = 0`. Axis roots are emitted in closed form. Interior roots are found by damped
//! Newton from a dense seed grid over the box `[0, μ₁^{-1/(2q)}] × [0, μ₂^{-1/(2q)}]`,
//! which contains every nonnegative root because each left-hand side dominates `μᵢ (·)^{2q}`,
//! and by a sweep over the ratio `l/k`, which finds roots too close to an axis for the grid.

use alloc::vec::Vec;

use crate::math::{abs, exp, ln, powf};
use crate::{Error, Params, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    BothPositive,
    /// `l = 0`
    KAxis,
    /// `k = 0`
    LAxis,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KLRoot {
    pub k: f64,
    pub l: f64,
    pub branch: Branch,
    /// Max-norm of the coupling residual (single-equation convention on axes).
    pub residual: f64,
    /// Energy level `A_{k,l} = (p-1)/(2(p+1)) (k² + l²) C₀^{p+1}`.
    pub a_kl: f64,
}

impl KLRoot {
    /// Builds a root record for `(k, l)`, classifying the branch and evaluating the residual.
    pub fn new(k: f64, l: f64, params: &Params) -> Result<Self> {
        let (r1, r2) = residual_kl(k, l, params)?;
        let branch = if l == 0.0 {
            Branch::KAxis
        } else if k == 0.0 {
            Branch::LAxis
        } else {
            Branch::BothPositive
        };
        Ok(KLRoot { k, l, branch, residual: abs(r1).max(abs(r2)), a_kl: energy_level(k, l, params) })
    }
}

/// Where a possible root was seen without being resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WarningSource {
    /// Seed-grid cell `(i, j)` whose Newton run failed near a low residual.
    Cell(usize, usize),
    /// Bracketed zero of the ray function at `ln(l/k)` whose root misses the residual bound.
    Ray(f64),
    /// Several candidates that cannot be told apart at the acceptance residual, merged
    /// into one (multiple) root. `width` is the extent of that stretch in `ln(l/k)`.
    Cluster { members: usize, width: f64 },
}

/// A possible root that was not resolved and has no reported root nearby.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootWarning {
    pub source: WarningSource,
    pub k: f64,
    pub l: f64,
    pub min_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RootSet {
    /// Sorted lexicographically by `(k, l)`; the index is the root id.
    pub roots: Vec<KLRoot>,
    pub warnings: Vec<RootWarning>,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, KLRoot> {
        self.roots.iter()
    }

    pub fn get(&self, id: usize) -> Option<&KLRoot> {
        self.roots.get(id)
    }

    pub fn interior(&self) -> impl Iterator<Item = &KLRoot> {
        self.roots.iter().filter(|r| r.branch == Branch::BothPositive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolverOptions {
    /// Seeds per axis; the box is split into `grid × grid` cells seeded at their centres.
    pub grid: usize,
    pub max_iter: usize,
    pub dedup_radius: f64,
    /// Newton iterates are clamped to at least this value in each coordinate.
    pub floor: f64,
    pub accept_residual: f64,
    /// Unconverged cells whose sampled residual falls below this are reported.
    pub warn_residual: f64,
    /// The ray sweep covers `|ln(l/k)| ≤ ray_span` in steps of `ray_step`.
    pub ray_span: f64,
    pub ray_step: f64,
}

impl Default for RootSolverOptions {
    fn default() -> Self {
        RootSolverOptions {
            grid: 200,
            max_iter: 50,
            dedup_radius: 1e-8,
            floor: 1e-14,
            accept_residual: 1e-12,
            warn_residual: 1e-6,
            ray_span: 690.0,
            ray_step: 0.01,
        }
    }
}

pub(crate) fn energy_level(k: f64, l: f64, params: &Params) -> f64 {
    let p = params.p;
    (p - 1.0) / (2.0 * (p + 1.0)) * (k * k + l * l) * powf(params.c0, p + 1.0)
}

/// Residual of the coupling system at `(k, l)`.
///
/// On an axis the degenerate component is reported as zero and the surviving one
/// as its single-equation residual.
pub fn residual_kl(k: f64, l: f64, params: &Params) -> Result<(f64, f64)> {
    if !(k >= 0.0 && l >= 0.0) {
        return Err(Error::InvalidArgument("k and l must be nonnegative"));
    }
    if k == 0.0 && l == 0.0 {
        return Err(Error::TrivialScaling);
    }
    if l == 0.0 {
        return Ok((params.mu1 * powf(k, 2.0 * params.q) - 1.0, 0.0));
    }
    if k == 0.0 {
        return Ok((0.0, params.mu2 * powf(l, 2.0 * params.q) - 1.0));
    }
    Ok(interior_residual(k, l, params))
}

#[inline]
fn interior_residual(k: f64, l: f64, pr: &Params) -> (f64, f64) {
    let q = pr.q;
    let kq = powf(k, q);
    let lq = powf(l, q);
    (
        pr.mu1 * kq * kq + pr.beta * (kq / k) * (lq * l) - 1.0,
        pr.mu2 * lq * lq + pr.beta * (lq / l) * (kq * k) - 1.0,
    )
}

#[inline]
fn interior_jacobian(k: f64, l: f64, pr: &Params) -> [[f64; 2]; 2] {
    let q = pr.q;
    let kq = powf(k, q);
    let lq = powf(l, q);
    let b = pr.beta;
    [
        [
            2.0 * q * pr.mu1 * kq * kq / k + b * (q - 1.0) * kq / (k * k) * lq * l,
            b * (q + 1.0) * kq / k * lq,
        ],
        [
            b * (q + 1.0) * lq / l * kq,
            2.0 * q * pr.mu2 * lq * lq / l + b * (q - 1.0) * lq / (l * l) * kq * k,
        ],
    ]
}

#[inline]
fn max_norm(r: (f64, f64)) -> f64 {
    abs(r.0).max(abs(r.1))
}

/// Damped Newton on the interior equations. Returns the converged point or `None`.
fn newton(seed: (f64, f64), pr: &Params, opts: &RootSolverOptions) -> Option<(f64, f64)> {
    let (mut k, mut l) = seed;
    let mut f = interior_residual(k, l, pr);
    let mut fnorm = max_norm(f);
    for _ in 0..opts.max_iter {
        if !fnorm.is_finite() {
            return None;
        }
        if fnorm <= 1e-15 {
            break;
        }
        let j = interior_jacobian(k, l, pr);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dk = -(j[1][1] * f.0 - j[0][1] * f.1) / det;
        let dl = -(-j[1][0] * f.0 + j[0][0] * f.1) / det;

        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-10 {
            let kn = (k + step * dk).max(opts.floor);
            let ln = (l + step * dl).max(opts.floor);
            let fnew = interior_residual(kn, ln, pr);
            let nn = max_norm(fnew);
            if nn < fnorm || (nn <= opts.accept_residual && nn <= fnorm) {
                let moved = abs(kn - k).max(abs(ln - l));
                k = kn;
                l = ln;
                f = fnew;
                fnorm = nn;
                accepted = true;
                if moved <= 1e-16 * (1.0 + k.max(l)) {
                    step = 0.0;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || step == 0.0 {
            break;
        }
    }
    (fnorm <= opts.accept_residual && k > opts.floor && l > opts.floor).then_some((k, l))
}

/// All nonnegative roots with default solver options.
pub fn solve_kl(params: &Params) -> RootSet {
    solve_kl_with(params, &RootSolverOptions::default())
}

pub fn solve_kl_with(params: &Params, opts: &RootSolverOptions) -> RootSet {
    let kmax = powf(params.mu1, -1.0 / (2.0 * params.q));
    let lmax = powf(params.mu2, -1.0 / (2.0 * params.q));
    let n = opts.grid.max(1);
    let hk = kmax / n as f64;
    let hl = lmax / n as f64;

    let mut candidates: Vec<(f64, f64, f64)> = Vec::new();
    let mut failed: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let seed = ((i as f64 + 0.5) * hk, (j as f64 + 0.5) * hl);
            match newton(seed, params, opts) {
                Some((k, l)) => {
                    let res = max_norm(interior_residual(k, l, params));
                    insert_dedup(&mut candidates, (k, l, res), opts.dedup_radius);
                }
                None => failed.push((i, j)),
            }
        }
    }

    let mut warnings = Vec::new();
    for (x, k, l) in ray_roots(params, opts) {
        let res = max_norm(interior_residual(k, l, params));
        if res <= opts.accept_residual {
            insert_dedup(&mut candidates, (k, l, res), opts.dedup_radius);
        } else if !candidates.iter().any(|c| abs(c.0 - k).max(abs(c.1 - l)) <= opts.dedup_radius) {
            warnings.push(RootWarning { source: WarningSource::Ray(x), k, l, min_residual: res });
        }
    }

    let candidates = merge_clusters(candidates, params, opts, &mut warnings);
    let mut roots: Vec<KLRoot> = Vec::with_capacity(candidates.len() + 2);
    roots.push(KLRoot::new(kmax, 0.0, params).expect("axis root is nontrivial"));
    roots.push(KLRoot::new(0.0, lmax, params).expect("axis root is nontrivial"));
    for (k, l, residual) in candidates {
        roots.push(KLRoot {
            k,
            l,
            branch: Branch::BothPositive,
            residual,
            a_kl: energy_level(k, l, params),
        });
    }
    roots.sort_by(|a, b| a.k.total_cmp(&b.k).then(a.l.total_cmp(&b.l)));

    for (i, j) in failed {
        let k0 = i as f64 * hk;
        let l0 = j as f64 * hl;
        let probes = [
            (k0 + 0.5 * hk, l0 + 0.5 * hl),
            (k0, l0),
            (k0 + hk, l0),
            (k0, l0 + hl),
            (k0 + hk, l0 + hl),
        ];
        let min_residual = probes
            .iter()
            .filter(|(k, l)| *k > 0.0 && *l > 0.0)
            .map(|&(k, l)| max_norm(interior_residual(k, l, params)))
            .fold(f64::INFINITY, f64::min);
        if min_residual >= opts.warn_residual {
            continue;
        }
        let explained = roots.iter().any(|r| {
            r.k >= k0 - hk && r.k <= k0 + 2.0 * hk && r.l >= l0 - hl && r.l <= l0 + 2.0 * hl
        });
        if !explained {
            warnings.push(RootWarning {
                source: WarningSource::Cell(i, j),
                k: k0 + 0.5 * hk,
                l: l0 + 0.5 * hl,
                min_residual,
            });
        }
    }

    RootSet { roots, warnings }
}

/// Sign of the ray function at `x = ln s`. With `l = s k` the interior system reduces to
/// `g(s) = μ₂ s^{2q} + β s^{q-1} - μ₁ - β s^{q+1} = 0` with `k^{2q}(μ₁ + β s^{q+1}) = 1`.
/// `g` is rescaled by `s^{1-q}` below `s = 1` and by `s^{-q-1}` above so that it stays
/// finite over the whole representable range.
fn ray_function(x: f64, pr: &Params) -> f64 {
    let q = pr.q;
    let s = exp(x);
    if x <= 0.0 {
        pr.mu2 * powf(s, 1.0 + q) + pr.beta - pr.mu1 * powf(s, 1.0 - q) - pr.beta * s * s
    } else {
        pr.mu2 * powf(s, q - 1.0) + pr.beta * exp(-2.0 * x) - pr.mu1 * powf(s, -q - 1.0) - pr.beta
    }
}

fn ray_point(x: f64, pr: &Params) -> (f64, f64) {
    let e = -1.0 / (2.0 * pr.q);
    if x <= 0.0 {
        let s = exp(x);
        let k = powf(pr.mu1 + pr.beta * powf(s, pr.q + 1.0), e);
        (k, s * k)
    } else {
        let rho = exp(-x);
        let l = powf(pr.mu2 + pr.beta * powf(rho, pr.q + 1.0), e);
        (rho * l, l)
    }
}

/// Interior roots from sign changes of the ray function in `ln(l/k)`, bisected to
/// machine precision. Catches roots hugging an axis far below the Newton floor, which
/// exist when `q` is close to 1.
fn ray_roots(pr: &Params, opts: &RootSolverOptions) -> Vec<(f64, f64, f64)> {
    let steps = libm::ceil(2.0 * opts.ray_span / opts.ray_step) as usize;
    let x_at = |i: usize| -opts.ray_span + 2.0 * opts.ray_span * i as f64 / steps as f64;
    let mut out = Vec::new();
    let mut a = x_at(0);
    let mut ga = ray_function(a, pr);
    for i in 1..=steps {
        let b = x_at(i);
        let gb = ray_function(b, pr);
        let zero = if gb == 0.0 {
            Some(b)
        } else if ga != 0.0 && (ga < 0.0) != (gb < 0.0) {
            let (mut lo, mut hi, glo) = (a, b, ga);
            loop {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let gm = ray_function(mid, pr);
                if gm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (gm < 0.0) == (glo < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = if abs(ray_function(lo, pr)) <= abs(ray_function(hi, pr)) { lo } else { hi };
            Some(x)
        } else {
            None
        };
        if let Some(x) = zero {
            let (k, l) = ray_point(x, pr);
            if k > 0.0 && l > 0.0 {
                out.push((x, k, l));
            }
        }
        a = b;
        ga = gb;
    }
    out
}

fn ray_residual(x: f64, pr: &Params) -> f64 {
    let (k, l) = ray_point(x, pr);
    max_norm(interior_residual(k, l, pr))
}

/// Merges candidates joined along the ray curve by residuals within the acceptance bound.
///
/// Near a multiple root (e.g. `β = qμ` with `μ₁ = μ₂`, where the diagonal root is triple)
/// the residual is flat over a stretch of width about `ε^{1/m}` and Newton stops anywhere
/// in it. Such a cluster is reported once, at the midpoint of the stretch.
fn merge_clusters(
    mut found: Vec<(f64, f64, f64)>,
    pr: &Params,
    opts: &RootSolverOptions,
    warnings: &mut Vec<RootWarning>,
) -> Vec<(f64, f64, f64)> {
    const PROBES: usize = 16;
    let ratio = |c: &(f64, f64, f64)| ln(c.1) - ln(c.0);
    found.sort_by(|a, b| ratio(a).total_cmp(&ratio(b)));
    let joined = |xa: f64, xb: f64| (1..PROBES).all(|i| ray_residual(xa + (xb - xa) * i as f64 / PROBES as f64, pr) <= opts.accept_residual);
    let mut out = Vec::with_capacity(found.len());
    let mut i = 0;
    while i < found.len() {
        let mut j = i + 1;
        while j < found.len() && joined(ratio(&found[j - 1]), ratio(&found[j])) {
            j += 1;
        }
        if j - i == 1 {
            out.push(found[i]);
        } else {
            let lo = flat_edge(ratio(&found[i]), -1.0, pr, opts);
            let hi = flat_edge(ratio(&found[j - 1]), 1.0, pr, opts);
            let (k, l) = ray_point(0.5 * (lo + hi), pr);
            let res = max_norm(interior_residual(k, l, pr));
            let best = found[i..j].iter().copied().min_by(|a, b| a.2.total_cmp(&b.2)).expect("nonempty");
            let rep = if res <= opts.accept_residual { (k, l, res) } else { best };
            warnings.push(RootWarning {
                source: WarningSource::Cluster { members: j - i, width: hi - lo },
                k: rep.0,
                l: rep.1,
                min_residual: rep.2,
            });
            out.push(rep);
        }
        i = j;
    }
    out
}

/// Edge of the stretch of acceptable residual around `x`, searched in direction `dir`.
fn flat_edge(x: f64, dir: f64, pr: &Params, opts: &RootSolverOptions) -> f64 {
    let mut inside = x;
    let mut step = 1e-12 * (1.0 + abs(x));
    let mut outside = x + dir * step;
    while ray_residual(outside, pr) <= opts.accept_residual {
        inside = outside;
        step *= 2.0;
        outside = x + dir * step;
        if step > 1.0 {
            return inside;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if ray_residual(mid, pr) <= opts.accept_residual {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

fn insert_dedup(found: &mut Vec<(f64, f64, f64)>, cand: (f64, f64, f64), radius: f64) {
    for existing in found.iter_mut() {
        if abs(existing.0 - cand.0).max(abs(existing.1 - cand.1)) <= radius {
            if cand.2 < existing.2 {
                *existing = cand;
            }
            return;
        }
    }
    found.push(cand);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr(n: u32, p: f64, mu1: f64, mu2: f64, beta: f64) -> Params {
        Params::new(n, p, mu1, mu2, beta).unwrap()
    }

    #[test]
    fn residual_examples() {
        let p = pr(5, 2.0, 1.0, 1.0, 1.0);
        assert_eq!(residual_kl(1.0, 0.0, &p).unwrap(), (0.0, 0.0));
        let (a, b) = residual_kl(0.5, 0.5, &p).unwrap();
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
        let (a, b) = residual_kl(1.0, 1.0, &p).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        assert_eq!(residual_kl(0.0, 0.0, &p), Err(Error::TrivialScaling));
        assert!(residual_kl(-1.0, 0.5, &p).is_err());
    }

    #[test]
    fn unit_coefficients_n5_p2() {
        let set = solve_kl(&pr(5, 2.0, 1.0, 1.0, 1.0));
        assert_eq!(set.len(), 3, "{:?}", set.roots);
        assert!(set.warnings.is_empty());
        let expected = [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)];
        for (r, (k, l)) in set.iter().zip(expected) {
            assert!((r.k - k).abs() < 1e-12 && (r.l - l).abs() < 1e-12, "{r:?}");
            assert!(r.residual <= 1e-12);
        }
        assert_eq!(set.roots[0].branch, Branch::LAxis);
        assert_eq!(set.roots[1].branch, Branch::BothPositive);
        assert_eq!(set.roots[2].branch, Branch::KAxis);
    }

    #[test]
    fn axis_root_with_unit_mu2() {
        let set = solve_kl(&pr(5, 2.0, 3.0, 1.0, 0.7));
        let axis = set.iter().find(|r| r.branch == Branch::LAxis).unwrap();
        assert_eq!((axis.k, axis.l), (0.0, 1.0));
    }

    #[test]
    fn decoupled_limit_has_corner_root() {
        let set = solve_kl(&pr(5, 2.0, 1.0, 1.0, 0.0));
        let ks: Vec<(f64, f64)> = set.iter().map(|r| (r.k, r.l)).collect();
        assert_eq!(set.len(), 3, "{ks:?}");
        let corner = set.interior().next().unwrap();
        assert!((corner.k - 1.0).abs() < 1e-12 && (corner.l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_root_for_equal_mu() {
        for &(n, p, mu, beta) in &[(5, 2.0, 1.0, 0.3), (4, 2.5, 2.0, 1.5), (3, 4.0, 0.5, 2.0), (6, 1.8, 1.0, 0.1)] {
            let params = pr(n, p, mu, mu, beta);
            let set = solve_kl(&params);
            let d = powf(mu + beta, -1.0 / (2.0 * params.q));
            assert!(
                set.iter().any(|r| (r.k - d).abs() < 1e-10 && (r.l - d).abs() < 1e-10),
                "n={n} p={p}: {:?}",
                set.roots
            );
            for r in set.iter() {
                assert!(
                    set.iter().any(|s| (s.k - r.l).abs() < 1e-10 && (s.l - r.k).abs() < 1e-10),
                    "swap image of {r:?} missing"
                );
                assert!(r.residual <= 1e-12);
            }
        }
    }

    #[test]
    fn triple_diagonal_root_is_reported_once() {
        // β = qμ: g(s) ≈ -(s - 1)³/8 and Newton lands anywhere in a flat stretch
        for &(n, p, mu) in &[(5, 2.0, 1.0), (4, 2.5, 2.0), (6, 1.8, 0.7)] {
            let q = (p - 1.0) / 2.0;
            let params = pr(n, p, mu, mu, q * mu);
            let set = solve_kl(&params);
            let d = powf(mu + q * mu, -1.0 / (2.0 * q));
            let interior: Vec<_> = set.interior().collect();
            assert_eq!(interior.len(), 1, "{:?}", set.roots);
            assert!((interior[0].k - d).abs() < 1e-8 && (interior[0].l - d).abs() < 1e-8, "{:?}", interior[0]);
            assert!(interior[0].residual <= 1e-12);
            assert!(matches!(set.warnings.as_slice(), [RootWarning { source: WarningSource::Cluster { .. }, .. }]));
        }
    }
}
