//! Rank-based estimators of the stable tail dependence function.
//!
//! The base estimator counts the rows exceeding, in at least one coordinate,
//! the `floor(k x_j)`-th largest value of its column:
//!
//! ```text
//! L_k(x) = (1/k) #{ i : exists j, rank_ij >= n - floor(k x_j) + 1 }
//! ```
//!
//! Everything else is built from `L_k` through the homogeneity of `L`:
//! the dilated estimator `L_{k,a}(x) = L_k(a x) / a`, the bias proxy
//! `Delta_{k,a} = L_{k,a} - L_k`, and the two bias-corrected families.
//! Corrected estimators are generic over [`StdfSource`], so any function
//! standing in for `L_k` can be plugged in.

mod config;
mod pickands;
mod ranks;

pub use config::{EstimatorConfig, EstimatorKind, StdfEstimator, RING_RHO_CEILING};
pub use pickands::{aggregate_median, clamp_pickands, clamp_stdf, convexify_pickands, pickands_curve, PickandsCurve};
pub use ranks::{ranks, RankMatrix};

use crate::error::{Error, Result};

/// Threshold below which the denominator of the ratio-corrected estimator
/// is treated as zero.
pub const DEGENERATE_EPS: f64 = 1e-12;

/// Anything that can produce the base estimate `L_k(x)`.
pub trait StdfSource: Sync {
    fn sample_size(&self) -> usize;

    fn dimension(&self) -> usize;

    fn base_stdf(&self, k: usize, x: &[f64]) -> Result<f64>;
}

impl StdfSource for RankMatrix {
    fn sample_size(&self) -> usize {
        self.n()
    }

    fn dimension(&self) -> usize {
        self.d()
    }

    fn base_stdf(&self, k: usize, x: &[f64]) -> Result<f64> {
        empirical_stdf(self, k, x)
    }
}

/// An estimate together with a flag marking a degenerate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub degenerate: bool,
}

impl Estimate {
    pub fn ok(value: f64) -> Self {
        Self {
            value,
            degenerate: false,
        }
    }

    pub fn degenerate(value: f64) -> Self {
        Self {
            value,
            degenerate: true,
        }
    }
}

/// Empirical estimator `L_k(x)` on a rank matrix.
pub fn empirical_stdf(ranks: &RankMatrix, k: usize, x: &[f64]) -> Result<f64> {
    let n = ranks.n();
    check_k(k, n, "k")?;
    if x.len() != ranks.d() {
        return Err(Error::arg(format!(
            "point has {} coordinates, sample has {}",
            x.len(),
            ranks.d()
        )));
    }
    let mut m = Vec::with_capacity(x.len());
    for &xj in x {
        if !(xj >= 0.0 && xj.is_finite()) {
            return Err(Error::arg(format!("point coordinates must be finite and >= 0, got {xj}")));
        }
        let mj = (k as f64 * xj).floor();
        if mj > n as f64 {
            return Err(Error::arg(format!(
                "floor(k * x_j) = {mj} exceeds the sample size {n} (k = {k}, x_j = {xj})"
            )));
        }
        m.push(mj as usize);
    }
    Ok(ranks.count_any_exceedance(&m) as f64 / k as f64)
}

/// Dilated estimator `L_{k,a}(x) = L_k(a x) / a`; any `a > 0` is accepted as
/// long as `a x` stays inside the domain of the base estimator.
pub fn scaled_stdf<S: StdfSource + ?Sized>(src: &S, k: usize, a: f64, x: &[f64]) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::arg(format!("scale a must be positive and finite, got {a}")));
    }
    let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
    Ok(src.base_stdf(k, &ax)? / a)
}

/// `Delta_{k,a}(x) = L_{k,a}(x) - L_k(x)`.
pub fn delta<S: StdfSource + ?Sized>(src: &S, k: usize, a: f64, x: &[f64]) -> Result<f64> {
    Ok(scaled_stdf(src, k, a, x)? - src.base_stdf(k, x)?)
}

/// Scale `b = (a^{-rho} + 1)^{-1/rho}` at which `Delta_{k,b}` estimates the
/// bias of `L_{k,a}`. Exceeds 1 whenever `a <= 1`.
pub fn bias_scale(a: f64, rho: f64) -> f64 {
    (-(a.powf(-rho) + 1.0).ln() / rho).exp()
}

/// Bias-corrected estimator `L_{k,a}(x) - Delta_{k,b}(x)` with
/// `b = (a^{-rho} + 1)^{-1/rho}`.
pub fn corrected_stdf_ring<S: StdfSource + ?Sized>(src: &S, k: usize, a: f64, rho: f64, x: &[f64]) -> Result<f64> {
    check_rho(rho)?;
    let b = bias_scale(a, rho);
    Ok(scaled_stdf(src, k, a, x)? - delta(src, k, b, x)?)
}

/// The `a = 1` member of the ring family written out directly:
/// `L_k(x) - Delta_{k, 2^{-1/rho}}(x)`.
pub fn corrected_stdf_unit<S: StdfSource + ?Sized>(src: &S, k: usize, rho: f64, x: &[f64]) -> Result<f64> {
    check_rho(rho)?;
    Ok(src.base_stdf(k, x)? - delta(src, k, bias_scale(1.0, rho), x)?)
}

/// Ratio-corrected estimator that needs no estimate of the second-order
/// index:
///
/// ```text
/// [L_k(x) D(a x) - L_k(a x) D(x)] / [D(a x) - a D(x)],   D = Delta_{k_rho, a}
/// ```
///
/// A vanishing denominator yields `L_k(x)` flagged as degenerate.
pub fn corrected_stdf_tilde<S: StdfSource + ?Sized>(
    src: &S,
    k: usize,
    k_rho: usize,
    a: f64,
    x: &[f64],
) -> Result<Estimate> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::arg(format!("a must lie in (0, 1), got {a}")));
    }
    let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
    let d_x = delta(src, k_rho, a, x)?;
    let d_ax = delta(src, k_rho, a, &ax)?;
    let l_x = src.base_stdf(k, x)?;
    let denom = d_ax - a * d_x;
    if denom.abs() < DEGENERATE_EPS {
        return Ok(Estimate::degenerate(l_x));
    }
    let l_ax = src.base_stdf(k, &ax)?;
    Ok(Estimate::ok((l_x * d_ax - l_ax * d_x) / denom))
}

fn check_rho(rho: f64) -> Result<()> {
    if rho < 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("second-order index must be negative, got {rho}")))
    }
}

pub(crate) fn check_k(k: usize, n: usize, name: &str) -> Result<()> {
    if k == 0 || k >= n {
        Err(Error::arg(format!("{name} = {k} must lie in 1..={}", n.saturating_sub(1))))
    } else {
        Ok(())
    }
}
