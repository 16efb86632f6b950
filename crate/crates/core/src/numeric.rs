//! Small numeric helpers shared across modules.

const QUAD_TOL: f64 = 1e-12;

/// `int_a^b f(x) dx` by double-exponential quadrature.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    quadrature::integrate(f, a, b, QUAD_TOL).integral
}

/// `int_a^inf f(x) dx`, mapped onto `[0, 1)` via `x = a + s / (1 - s)`.
pub(crate) fn integrate_to_inf(f: impl Fn(f64) -> f64, a: f64) -> f64 {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - s;
        let v = f(a + s / one_minus) / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    quadrature::integrate(g, 0.0, 1.0, QUAD_TOL).integral
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending and non-empty.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
