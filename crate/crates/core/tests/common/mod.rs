//! Independent oracles for the integration suites: Bessel-series values for
//! the flat disk and a fixed-step RK4 shooting solver for cap Dirichlet
//! ground states. Deliberately disjoint from the crate's own integrators.

#![allow(dead_code)]

/// Bessel function of the first kind by power series (small arguments).
pub fn bessel_j(k: usize, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(k as i32);
    for m in 1..=k {
        term /= m as f64;
    }
    let mut sum = term;
    let x2 = half * half;
    for m in 1..60 {
        term *= -x2 / (m as f64 * (m + k) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1.0) {
            break;
        }
    }
    sum
}

pub fn bessel_j_prime(k: usize, x: f64) -> f64 {
    if k == 0 {
        -bessel_j(1, x)
    } else {
        bessel_j(k - 1, x) - k as f64 / x * bessel_j(k, x)
    }
}

/// Steklov-with-frequency eigenvalue of the flat unit disk for angular mode
/// `k`: `sqrt(alpha) J_k'(sqrt alpha) / J_k(sqrt alpha)`.
pub fn flat_disk_sigma(k: usize, alpha: f64) -> f64 {
    let s = alpha.sqrt();
    s * bessel_j_prime(k, s) / bessel_j(k, s)
}

/// First zero of J_0 by bisection on the series.
pub fn bessel_j0_first_zero() -> f64 {
    let (mut lo, mut hi) = (2.0f64, 3.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if bessel_j(0, lo) * bessel_j(0, mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest Dirichlet eigenvalue of the cap of radius `r`: shooting on
/// `a'' + cot(t) a' + lambda a = 0` with regularity at zero, `a(r) = 0`,
/// fixed-step RK4.
pub fn cap_dirichlet_lambda0(r: f64) -> f64 {
    let shoot = |lambda: f64| -> f64 {
        let t0 = 1e-6;
        let steps = 20_000usize;
        let h = (r - t0) / steps as f64;
        let c1 = -lambda / 4.0;
        let mut a = 1.0 + c1 * t0 * t0;
        let mut ap = 2.0 * c1 * t0;
        let f = |t: f64, a: f64, ap: f64| -> (f64, f64) {
            (ap, -(t.cos() / t.sin()) * ap - lambda * a)
        };
        let mut t = t0;
        for _ in 0..steps {
            let (k1a, k1p) = f(t, a, ap);
            let (k2a, k2p) = f(t + h / 2.0, a + h / 2.0 * k1a, ap + h / 2.0 * k1p);
            let (k3a, k3p) = f(t + h / 2.0, a + h / 2.0 * k2a, ap + h / 2.0 * k2p);
            let (k4a, k4p) = f(t + h, a + h * k3a, ap + h * k3p);
            a += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            ap += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            t += h;
        }
        a
    };
    // the ground eigenvalue is the first sign change of a(r; lambda)
    let mut lo = 1e-3;
    let mut flo = shoot(lo);
    let mut hi = lo;
    loop {
        hi += 0.5;
        let fhi = shoot(hi);
        if flo * fhi <= 0.0 {
            break;
        }
        lo = hi;
        flo = fhi;
        assert!(hi < 500.0, "no dirichlet bracket below 500");
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if flo * shoot(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = shoot(lo);
        }
    }
    0.5 * (lo + hi)
}
