//! Independent root finders for the (k, l) coupling system, used only to check the
//! production solver.

#![allow(dead_code)]

pub struct Coupling {
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
    pub q: f64,
}

impl Coupling {
    pub fn kmax(&self) -> f64 {
        self.mu1.powf(-0.5 / self.q)
    }

    pub fn lmax(&self) -> f64 {
        self.mu2.powf(-0.5 / self.q)
    }

    pub fn residual(&self, k: f64, l: f64) -> [f64; 2] {
        let q = self.q;
        [
            self.mu1 * k.powf(2.0 * q) + self.beta * k.powf(q - 1.0) * l.powf(q + 1.0) - 1.0,
            self.mu2 * l.powf(2.0 * q) + self.beta * l.powf(q - 1.0) * k.powf(q + 1.0) - 1.0,
        ]
    }

    pub fn norm(&self, k: f64, l: f64) -> f64 {
        let [a, b] = self.residual(k, l);
        a.abs().max(b.abs())
    }
}

fn push_unique(out: &mut Vec<(f64, f64)>, x: (f64, f64), radius: f64) {
    if !out.iter().any(|y| (y.0 - x.0).abs().max((y.1 - x.1).abs()) <= radius) {
        out.push(x);
    }
}

/// Newton with a central-difference Jacobian, step halving to stay positive and decrease
/// the residual.
fn polish(c: &Coupling, mut x: (f64, f64)) -> Option<(f64, f64)> {
    for _ in 0..100 {
        let r = c.residual(x.0, x.1);
        let rn = r[0].abs().max(r[1].abs());
        if rn <= 1e-14 {
            return Some(x);
        }
        let hk = 1e-7 * x.0;
        let hl = 1e-7 * x.1;
        let rk = (c.residual(x.0 + hk, x.1), c.residual(x.0 - hk, x.1));
        let rl = (c.residual(x.0, x.1 + hl), c.residual(x.0, x.1 - hl));
        let j = [
            [(rk.0[0] - rk.1[0]) / (2.0 * hk), (rl.0[0] - rl.1[0]) / (2.0 * hl)],
            [(rk.0[1] - rk.1[1]) / (2.0 * hk), (rl.0[1] - rl.1[1]) / (2.0 * hl)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dk = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let dl = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
        let mut lambda = 1.0;
        loop {
            let y = (x.0 - lambda * dk, x.1 - lambda * dl);
            if y.0 > 0.0 && y.1 > 0.0 && c.norm(y.0, y.1) < rn {
                x = y;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return (rn <= 1e-12).then_some(x);
            }
        }
    }
    (c.norm(x.0, x.1) <= 1e-12).then_some(x)
}

/// Brute force: residual scan over an `m × m` grid of cell centres, local minima of the
/// max-norm residual, Newton polish. Interior roots only.
pub fn grid_scan(c: &Coupling, m: usize) -> Vec<(f64, f64)> {
    let (kx, lx) = (c.kmax(), c.lmax());
    let at = |i: usize, j: usize| ((i as f64 + 0.5) * kx / m as f64, (j as f64 + 0.5) * lx / m as f64);
    let grid: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| { let (k, l) = at(i, j); c.norm(k, l) }).collect()).collect();
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let v = grid[i][j];
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) != (0, 0) && a >= 0 && b >= 0 && (a as usize) < m && (b as usize) < m {
                        is_min &= v <= grid[a as usize][b as usize];
                    }
                }
            }
            if is_min {
                if let Some(x) = polish(c, at(i, j)) {
                    push_unique(&mut out, x, 1e-8);
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out
}

/// Ray reduction: with `l = s k` the system is equivalent to `g(s) = 0`,
/// `g(s) = μ₂ s^{2q} + β s^{q-1} - μ₁ - β s^{q+1}`, and `k = (μ₁ + β s^{q+1})^{-1/(2q)}`.
/// For `s > 1` the mirrored problem is solved at `1/s`. Sign changes on a grid in
/// `ln s ∈ [-span, span]` are refined by bisection.
pub fn ray_scan(c: &Coupling, span: f64, points: usize) -> Vec<(f64, f64)> {
    let mirror = Coupling { mu1: c.mu2, mu2: c.mu1, beta: c.beta, q: c.q };
    // g(s) s^{1-q} for s <= 1
    let scaled = |c: &Coupling, s: f64| {
        let q = c.q;
        c.mu2 * s.powf(1.0 + q) + c.beta - c.mu1 * s.powf(1.0 - q) - c.beta * s * s
    };
    let signed = |x: f64| if x <= 0.0 { scaled(c, x.exp()) } else { -scaled(&mirror, (-x).exp()) };
    let point = |x: f64| {
        let q = c.q;
        if x <= 0.0 {
            let s = x.exp();
            let k = (c.mu1 + c.beta * s.powf(q + 1.0)).powf(-0.5 / q);
            (k, s * k)
        } else {
            let r = (-x).exp();
            let l = (c.mu2 + c.beta * r.powf(q + 1.0)).powf(-0.5 / q);
            (r * l, l)
        }
    };
    let x_at = |i: usize| -span + 2.0 * span * i as f64 / (points - 1) as f64;
    let mut out = Vec::new();
    let mut prev = (x_at(0), signed(x_at(0)));
    for i in 1..points {
        let x = x_at(i);
        let gx = signed(x);
        let root = if gx == 0.0 {
            Some(x)
        } else if prev.1 * gx < 0.0 {
            let (mut a, mut b) = (prev.0, x);
            let ga = prev.1;
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if signed(mid) * ga > 0.0 { a = mid } else { b = mid }
            }
            Some(0.5 * (a + b))
        } else {
            None
        };
        if let Some(x) = root {
            let (k, l) = point(x);
            if k > 0.0 && l > 0.0 {
                push_unique(&mut out, (k, l), 1e-8);
            }
        }
        prev = (x, gx);
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out
}
