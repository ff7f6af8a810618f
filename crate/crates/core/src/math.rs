//! Thin wrappers over `libm` so the crate stays `no_std`.

pub(crate) use libm::{exp, fabs as abs, fma, log as ln, sqrt};

pub(crate) const PI: f64 = core::f64::consts::PI;

/// `x^a` for `x >= 0`, with `0^a = 0` for `a > 0` and `0^0 = 1`.
#[inline]
pub(crate) fn powf(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        if a > 0.0 {
            0.0
        } else if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        libm::pow(x, a)
    }
}

/// Product that treats an exact zero factor as absorbing, so `0 · ∞ = 0`.
///
/// Used where a singular power (`w^{q-1}`, q < 1) multiplies a factor that vanishes
/// identically on an invariant axis.
#[inline]
pub(crate) fn absorbing_product(factors: &[f64]) -> f64 {
    if factors.iter().any(|&x| x == 0.0) {
        0.0
    } else {
        factors.iter().product()
    }
}

/// Γ(n/2) for integer `n >= 1` via the recurrence from Γ(1) = 1 and Γ(1/2) = √π.
pub(crate) fn gamma_half(n: u32) -> f64 {
    let (mut x, mut g) = if n % 2 == 0 { (1.0, 1.0) } else { (0.5, sqrt(PI)) };
    let target = f64::from(n) / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    g
}

#[inline]
pub(crate) fn hypot4(v: &[f64; 4]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}
