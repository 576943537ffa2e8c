//! Second-order quantities: the index `rho`, the normalized second-order
//! function `M(x) / M(1/2, ..., 1/2)`, and the variance multipliers of the
//! two corrected estimators.

use crate::error::{Error, Result};
use crate::estimators::{bias_scale, delta, StdfSource, DEGENERATE_EPS};

/// Index reported when the bias proxy vanishes at the evaluation point.
pub const DEGENERATE_RHO: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderEstimate {
    pub rho_hat: f64,
    pub eval_point: Vec<f64>,
    pub k_rho: usize,
    pub a: f64,
    pub r: f64,
    /// Set when the upper cap at 0, the floor, or the degenerate fallback
    /// determined `rho_hat`.
    pub capped: bool,
    /// Set when `|Delta(x)|` was too small to form the ratio.
    pub degenerate: bool,
}

impl SecondOrderEstimate {
    /// `rho_hat,k_rho,a,r,x1,...,xd,capped`
    pub fn csv_header(&self) -> String {
        let xs: Vec<String> = (1..=self.eval_point.len()).map(|j| format!("x{j}")).collect();
        format!("rho_hat,k_rho,a,r,{},capped", xs.join(","))
    }
}

/// `1 - log|ratio| / log r`, before any capping.
pub fn rho_from_ratio(ratio: f64, r: f64) -> f64 {
    1.0 - ratio.abs().ln() / r.ln()
}

/// Estimates the second-order index from the ratio
/// `Delta_{k_rho,a}(r x) / Delta_{k_rho,a}(x)`, which tends to `r^{1 - rho}`.
/// The result is capped to `[rho_floor, 0]`.
pub fn rho_hat<S: StdfSource + ?Sized>(
    src: &S,
    k_rho: usize,
    a: f64,
    r: f64,
    x: &[f64],
    rho_floor: f64,
) -> Result<SecondOrderEstimate> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::arg(format!("a must lie in (0, 1), got {a}")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::arg(format!("r must lie in (0, 1), got {r}")));
    }
    if x.is_empty() || x.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::arg(format!("rho is estimated at a point with positive coordinates, got {x:?}")));
    }
    let mut est = SecondOrderEstimate {
        rho_hat: DEGENERATE_RHO,
        eval_point: x.to_vec(),
        k_rho,
        a,
        r,
        capped: true,
        degenerate: true,
    };
    let d_x = delta(src, k_rho, a, x)?;
    if d_x.abs() < DEGENERATE_EPS {
        return Ok(est);
    }
    let rx: Vec<f64> = x.iter().map(|v| r * v).collect();
    let d_rx = delta(src, k_rho, a, &rx)?;
    let raw = rho_from_ratio(d_rx / d_x, r);
    est.degenerate = false;
    est.capped = !(raw <= 0.0 && raw >= rho_floor);
    est.rho_hat = if raw.is_nan() { rho_floor } else { raw.min(0.0).max(rho_floor) };
    Ok(est)
}

/// Estimates `M(x) / M(1/2, ..., 1/2)` at each point by the ratio of bias
/// proxies `Delta_{k,a}(x) / Delta_{k,a}(1/2, ..., 1/2)`.
pub fn m_ratio_curve<S: StdfSource + ?Sized>(src: &S, k: usize, a: f64, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let half = vec![0.5; src.dimension()];
    let denom = delta(src, k, a, &half)?;
    if denom.abs() < DEGENERATE_EPS {
        return Err(Error::Degenerate(format!(
            "Delta_(k={k}, a={a}) vanishes at the half vector"
        )));
    }
    points.iter().map(|p| Ok(delta(src, k, a, p)? / denom)).collect()
}

/// Variance multiplier `(1 - b^{-1/2} + a^{-1/2})^2` of the ring estimator,
/// `b = (a^{-rho} + 1)^{-1/rho}`.
pub fn variance_factor_ring(a: f64, rho: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::arg(format!("a must lie in (0, 1], got {a}")));
    }
    if !(rho < 0.0 && rho.is_finite()) {
        return Err(Error::arg(format!("rho must be negative, got {rho}")));
    }
    let b = bias_scale(a, rho);
    Ok((1.0 - b.powf(-0.5) + a.powf(-0.5)).powi(2))
}

/// Variance multiplier `(a^{-rho} - 1)^{-2} (a^{-rho} - a^{-1/2})^2` of the
/// ratio-corrected estimator.
pub fn variance_factor_tilde(a: f64, rho: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::arg(format!("a must lie in (0, 1), got {a}")));
    }
    if !(rho < 0.0 && rho.is_finite()) {
        return Err(Error::arg(format!("rho must be negative, got {rho}")));
    }
    let ar = a.powf(-rho);
    Ok((ar - a.powf(-0.5)).powi(2) / (ar - 1.0).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::RankMatrix;
    use approx::assert_abs_diff_eq;

    /// `L(x) + c M(x)` with `L = max(x, y)` and `M = (x + y)^{1 - rho}`.
    struct Double {
        c: f64,
        rho: f64,
    }

    impl StdfSource for Double {
        fn sample_size(&self) -> usize {
            usize::MAX
        }
        fn dimension(&self) -> usize {
            2
        }
        fn base_stdf(&self, _k: usize, x: &[f64]) -> Result<f64> {
            Ok(x[0].max(x[1]) + self.c * (x[0] + x[1]).powf(1.0 - self.rho))
        }
    }

    #[test]
    fn ratio_arithmetic() {
        assert_abs_diff_eq!(rho_from_ratio(0.16, 0.4), -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rho_from_ratio(0.4, 0.4), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_on_double() {
        for rho in [-0.5, -1.5, -2.0] {
            let dbl = Double { c: 0.3, rho };
            let est = rho_hat(&dbl, 10, 0.4, 0.4, &[0.5, 0.5], -10.0).unwrap();
            assert_abs_diff_eq!(est.rho_hat, rho, epsilon = 1e-10);
            assert!(!est.capped);
        }
    }

    #[test]
    fn first_order_scaling_is_capped_at_zero() {
        // A ratio of exactly r maps to 0; slightly above r gives a positive
        // raw value, which is capped.
        let dbl = Double { c: 0.3, rho: 0.2 };
        let est = rho_hat(&dbl, 10, 0.4, 0.4, &[0.5, 0.5], -10.0).unwrap();
        assert_eq!(est.rho_hat, 0.0);
        assert!(est.capped);
    }

    #[test]
    fn floor_binds() {
        let dbl = Double { c: 0.3, rho: -12.0 };
        let est = rho_hat(&dbl, 10, 0.4, 0.4, &[0.5, 0.5], -10.0).unwrap();
        assert_eq!(est.rho_hat, -10.0);
        assert!(est.capped);
    }

    #[test]
    fn degenerate_delta_falls_back() {
        let r = RankMatrix::from_rows(&[0.1, 0.9, 0.5, 0.2, 0.8, 0.4], 2).unwrap();
        let est = rho_hat(&r, 1, 0.4, 0.4, &[0.5, 0.5], -10.0).unwrap();
        assert!(est.degenerate && est.capped);
        assert_eq!(est.rho_hat, DEGENERATE_RHO);
        assert!(m_ratio_curve(&r, 1, 0.4, &[vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn m_ratio_on_double() {
        let dbl = Double { c: -0.7, rho: -1.0 };
        let pts = vec![vec![0.5, 0.5], vec![0.7, 0.3], vec![0.2, 1.1]];
        let got = m_ratio_curve(&dbl, 4, 0.4, &pts).unwrap();
        assert_eq!(got[0], 1.0);
        assert_abs_diff_eq!(got[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(got[2], 1.3f64.powi(2), epsilon = 1e-12);
    }

    #[test]
    fn variance_factor_values() {
        let v1 = variance_factor_ring(1.0, -1.0).unwrap();
        assert_abs_diff_eq!(v1, (2.0 - 0.5f64.sqrt()).powi(2), epsilon = 1e-14);
        assert_abs_diff_eq!(v1, 1.6715729, epsilon = 1e-7);
        let v04 = variance_factor_ring(0.4, -1.0).unwrap();
        assert_abs_diff_eq!(v04, 3.0136, epsilon = 1e-4);
        assert!(v1 < v04);

        assert_abs_diff_eq!(variance_factor_tilde(0.4, -1.0).unwrap(), 3.8752, epsilon = 1e-4);
        assert!(variance_factor_tilde(0.5, -1.0).unwrap() < variance_factor_tilde(0.3, -1.0).unwrap());
        let expected = (0.25 - 2f64.sqrt()).powi(2) / 0.75f64.powi(2);
        assert_abs_diff_eq!(variance_factor_tilde(0.5, -2.0).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 2.4096, epsilon = 1e-4);

        assert!(variance_factor_ring(0.4, 0.0).is_err());
        assert!(variance_factor_tilde(1.0, -1.0).is_err());
        assert!(variance_factor_tilde(0.4, 0.1).is_err());
    }

    #[test]
    fn unit_ring_factor_matches_closed_form() {
        for i in 1..=20 {
            let rho = -0.1 * i as f64;
            let direct = (2.0 - 2f64.powf(1.0 / (2.0 * rho))).powi(2);
            assert_abs_diff_eq!(variance_factor_ring(1.0, rho).unwrap(), direct, epsilon = 1e-12);
        }
    }
}
