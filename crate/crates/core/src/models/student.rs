//! Student-t distribution function through the regularized incomplete beta
//! function, evaluated with a modified-Lentz continued fraction.

use statrs::function::gamma::ln_gamma;

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 500;

/// Cumulative distribution function of the univariate Student-t law with
/// `nu` degrees of freedom. `nu` must be positive; NaN is returned otherwise.
pub fn student_cdf(t: f64, nu: f64) -> f64 {
    if !(nu > 0.0) || t.is_nan() {
        return f64::NAN;
    }
    if t == 0.0 {
        return 0.5;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let t2 = t * t;
    // P(|T| > |t|) = I_x(nu/2, 1/2) with x = nu / (nu + t^2); the complement
    // 1 - x = t^2 / (nu + t^2) is passed separately to avoid cancellation.
    let x = nu / (nu + t2);
    let x1m = t2 / (nu + t2);
    let tail = 0.5 * reg_inc_beta(0.5 * nu, 0.5, x, x1m);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Regularized incomplete beta I_x(a, b). `x1m` must equal `1 - x`; callers
/// that can form it without cancellation should do so.
pub(crate) fn reg_inc_beta(a: f64, b: f64, x: f64, x1m: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x1m <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * x1m.ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, x1m) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}
