//! Scalar numerics shared by the bound evaluators: the first-order Marcum Q
//! function and exact binomial coefficients.
//!
//! The Marcum complement `1 - Q1(a, b)` is the quantity the control-phase
//! analysis actually consumes (a NACK-miss probability), so it is computed
//! directly as a sum of positive terms instead of subtracting from 1. That
//! keeps full relative precision when the miss probability is small.

/// Binomial coefficient `C(n, k)` as `f64`, computed exactly in integer
/// arithmetic for the small orders used here (n up to ~70).
pub fn binomial(n: u64, k: u64) -> f64 {
    binomial_u128(n, k) as f64
}

/// Binomial coefficient in `u128`. Exact; panics on overflow (n beyond ~120).
pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        // stays integral at every step in this order
        acc = acc * (n - k + i) as u128 / i as u128;
    }
    acc
}

/// First-order Marcum Q function `Q1(a, b)`.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    1.0 - marcum_q1_complement(a, b)
}

/// `1 - Q1(a, b)`: the lower tail of a noncentral chi-square with two degrees
/// of freedom, noncentrality `a^2`, evaluated at `b^2`.
///
/// Uses the Poisson-mixture series
/// `sum_{m>=1} pois(y; m) * PoisCdf(x; m-1)` with `x = a^2/2`, `y = b^2/2`,
/// which is a sum of positive terms. Arguments large enough to underflow the
/// series anchors switch to a log-domain recurrence over a window around the
/// dominant terms.
pub fn marcum_q1_complement(a: f64, b: f64) -> f64 {
    assert!(a >= 0.0 && b >= 0.0, "marcum arguments must be nonnegative");
    let x = 0.5 * a * a;
    let y = 0.5 * b * b;
    if y == 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        // central case: 1 - e^{-y}
        return -(-y).exp_m1();
    }
    if x < 700.0 && y < 700.0 {
        complement_direct(x, y)
    } else {
        complement_log_domain(x, y)
    }
}

/// Direct recurrence; valid while `e^{-x}` and `e^{-y}` stay normal.
fn complement_direct(x: f64, y: f64) -> f64 {
    let mut pois_x = (-x).exp(); // Poisson(x) pmf at n = m - 1
    let mut cdf_x = pois_x; // Poisson(x) cdf up to m - 1
    let mut pois_y = (-y).exp(); // Poisson(y) pmf at m
    let mut sum = 0.0f64;
    let max_m = (y + 60.0 * y.sqrt() + 200.0) as usize;
    for m in 1..=max_m {
        pois_y *= y / m as f64;
        sum += pois_y * cdf_x;
        // advance the cdf to include n = m for the next iteration
        pois_x *= x / m as f64;
        cdf_x += pois_x;
        // past the Poisson(y) mode the terms decay at least geometrically
        let mf = m as f64;
        if mf > y {
            let r = y / (mf + 1.0);
            let tail = pois_y * r / (1.0 - r);
            if tail <= 1e-18 * sum + 1e-320 {
                break;
            }
        }
    }
    sum
}

/// Log-domain variant for large arguments: pmfs are tracked through their
/// logarithms so the recurrences never underflow, and only the (representable)
/// contributing terms are exponentiated.
fn complement_log_domain(x: f64, y: f64) -> f64 {
    let m_hi = (y + 60.0 * y.sqrt() + 200.0).ceil() as u64;
    // ln pmf anchors at m = 0 / n = 0 are -y and -x; the recurrences
    // ln p(k) = ln p(k-1) + ln(mean/k) are exact enough at these counts.
    let mut ln_pois_x = -x;
    let mut cdf_x = ln_pois_x.exp();
    let mut ln_pois_y = -y;
    let mut sum = 0.0f64;
    for m in 1..=m_hi {
        ln_pois_y += (y / m as f64).ln();
        sum += ln_pois_y.exp() * cdf_x;
        ln_pois_x += (x / m as f64).ln();
        cdf_x += ln_pois_x.exp();
        let mf = m as f64;
        if mf > y {
            let r = y / (mf + 1.0);
            let ln_tail = ln_pois_y + (r / (1.0 - r)).ln();
            if ln_tail < (1e-18 * sum + 1e-320).ln() {
                break;
            }
        }
    }
    sum.min(1.0)
}
