//! Upper-tail probabilities of the two-colour Wallenius noncentral
//! hypergeometric distribution.
//!
//! Each probability mass term is the integral representation
//! C(K,x) C(N-K,n-x) * Int_0^1 (1 - t^(w/D))^x (1 - t^(1/D))^(n-x) dt with
//! D = w(K-x) + (N-K-(n-x)). The integral is evaluated by adaptive Simpson
//! quadrature after the exact substitution t = exp(-s) and normalisation
//! by the peak of the log-integrand, so gene-scale populations neither
//! overflow the binomial coefficients nor underflow the integrand.

use crate::error::{AuditError, Result};
use crate::special::ln_choose;

/// Absolute quadrature tolerance per probability mass term.
const SIMPSON_TOL: f64 = 1e-9;
const MAX_DEPTH: u32 = 48;
/// The normalised integrand is truncated where it falls below e^-45.
const LOG_WINDOW: f64 = 45.0;

/// P(X >= k) under Wallenius' noncentral hypergeometric law with odds
/// `omega` favouring the `k_total` annotated genes.
pub fn wallenius_tail(
    k: u64,
    n_total: u64,
    k_total: u64,
    n_drawn: u64,
    omega: f64,
) -> Result<f64> {
    if omega.is_nan() || omega <= 0.0 {
        return Err(AuditError::NonpositiveOdds(omega));
    }
    let err = || AuditError::InvalidContingency {
        k,
        n_total,
        k_total,
        n_drawn,
    };
    if k_total > n_total || n_drawn > n_total {
        return Err(err());
    }
    let lower = (n_drawn + k_total).saturating_sub(n_total);
    let upper = k_total.min(n_drawn);
    if k < lower || k > upper {
        return Err(err());
    }
    if k == lower {
        return Ok(1.0);
    }
    if n_drawn == n_total {
        // the draw exhausts the urn, X = k_total with certainty
        return Ok(1.0);
    }
    let mut tail = 0.0;
    for x in k..=upper {
        tail += pmf(x, n_total, k_total, n_drawn, omega);
    }
    Ok(tail.clamp(0.0, 1.0))
}

/// ln(1 - exp(-y)) for y > 0.
fn ln_one_minus_exp_neg(y: f64) -> f64 {
    (-(-y).exp_m1()).ln()
}

fn pmf(x: u64, n_total: u64, k_total: u64, n_drawn: u64, omega: f64) -> f64 {
    let d = omega * (k_total - x) as f64 + (n_total - k_total - (n_drawn - x)) as f64;
    debug_assert!(d > 0.0);
    let ln_coef = ln_choose(k_total, x) + ln_choose(n_total - k_total, n_drawn - x);
    let a = omega / d;
    let b = 1.0 / d;
    let hits = x as f64;
    let misses = (n_drawn - x) as f64;

    // After t = exp(-s), the mass term is Int_0^inf exp(F(s)) ds with
    // F(s) = x ln(1 - e^(-a s)) + (n - x) ln(1 - e^(-b s)) - s.
    let log_f = |s: f64| -> f64 {
        let mut v = -s;
        if hits > 0.0 {
            v += hits * ln_one_minus_exp_neg(a * s);
        }
        if misses > 0.0 {
            v += misses * ln_one_minus_exp_neg(b * s);
        }
        v
    };
    // F'(s) = x a / (e^(a s) - 1) + (n - x) b / (e^(b s) - 1) - 1, strictly
    // decreasing from +inf to -1: bisect for the mode.
    let d_log_f = |s: f64| -> f64 {
        let mut v = -1.0;
        if hits > 0.0 {
            v += hits * a / (a * s).exp_m1();
        }
        if misses > 0.0 {
            v += misses * b / (b * s).exp_m1();
        }
        v
    };
    let n_f = hits + misses;
    let mut lo = 1e-12 * (1.0 + n_f);
    let mut hi = 2.0 * (n_f + 1.0);
    while d_log_f(hi) > 0.0 {
        hi *= 2.0;
    }
    // ~1e-12 relative precision on the mode is ample for a quadrature
    // that integrates the whole window anyway
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if d_log_f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s_star = 0.5 * (lo + hi);
    let f_star = log_f(s_star);

    // integration window where F - F* >= -LOG_WINDOW; the edges only
    // bound truncation (e^-45 per unit length), so coarse placement is fine
    let edge = |mut inside: f64, mut outside: f64| -> f64 {
        for _ in 0..30 {
            let mid = 0.5 * (inside + outside);
            if log_f(mid) - f_star >= -LOG_WINDOW {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        outside.max(f64::MIN_POSITIVE)
    };
    let s_min = {
        let probe = s_star * 1e-9;
        if log_f(probe) - f_star >= -LOG_WINDOW {
            probe
        } else {
            edge(s_star, probe)
        }
    };
    let s_max = {
        let mut probe = 2.0 * s_star + 1.0;
        let mut doublings = 0;
        while log_f(probe) - f_star >= -LOG_WINDOW && doublings < 200 {
            probe *= 2.0;
            doublings += 1;
        }
        edge(s_star, probe)
    };

    let h = |s: f64| (log_f(s) - f_star).exp();
    // SIMPSON_TOL bounds the absolute error of the mass term itself;
    // rescale it into the peak-normalised domain
    let tol = (SIMPSON_TOL.ln() - ln_coef - f_star).exp().clamp(1e-15, 1e6);
    let integral = adaptive_simpson(&h, s_min, s_star, 0.5 * tol)
        + adaptive_simpson(&h, s_star, s_max, 0.5 * tol);
    (ln_coef + f_star + integral.max(f64::MIN_POSITIVE).ln()).exp()
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
