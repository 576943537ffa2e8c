//! Extrapolated failure probabilities `P(X_1 > z_1 or ... or X_d > z_d)`.

use crate::error::{Error, Result};
use crate::models::{Sample, TailModel};

/// Shapes with `|gamma| < GAMMA_ZERO` use the exponential limit.
pub const GAMMA_ZERO: f64 = 1e-8;

/// Relative margin by which a fitted finite end point exceeds the largest excess.
pub const SUPPORT_MARGIN: f64 = 1e-6;

/// Generalized Pareto fit of the excesses over a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct GpdFit {
    pub threshold: f64,
    pub sigma: f64,
    pub gamma: f64,
    /// Number of excesses used in the fit.
    pub exceedances: usize,
}

impl GpdFit {
    pub fn exceedance_fraction(&self, n: usize) -> f64 {
        self.exceedances as f64 / n as f64
    }

    /// Right end point of the fitted distribution, finite when `gamma < 0`.
    pub fn support_bound(&self) -> Option<f64> {
        (self.gamma < 0.0).then(|| self.threshold - self.sigma / self.gamma)
    }

    pub fn csv_header() -> &'static str {
        "u,sigma,gamma,m"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.threshold, self.sigma, self.gamma, self.exceedances)
    }
}

/// Fits a generalized Pareto distribution to positive excesses by
/// probability weighted moments of orders one and two,
/// `a_r = (1/m) sum_i (1 - p_i)^r e_(i)` with plotting positions
/// `p_i = (i - 0.5)/m`. For a GPD, `a_r = sigma / ((r + 1)(r + 1 - gamma))`,
/// which is finite for every `gamma < 2`.
///
/// The returned fit has threshold 0; see [`fit_margin`] for thresholded data.
pub fn gpd_fit_pwm(excesses: &[f64]) -> Result<GpdFit> {
    let m = excesses.len();
    if m < 2 {
        return Err(Error::arg(format!("at least two excesses are needed, got {m}")));
    }
    if let Some(e) = excesses.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::arg(format!("excesses must be positive and finite, got {e}")));
    }
    let mut sorted = excesses.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mf = m as f64;
    let (mut a1, mut a2) = (0.0, 0.0);
    for (i, e) in sorted.iter().enumerate() {
        let w = 1.0 - (i as f64 + 0.5) / mf;
        a1 += w * e;
        a2 += w * w * e;
    }
    a1 /= mf;
    a2 /= mf;
    let denom = 3.0 * a2 - 2.0 * a1;
    if !(denom < 0.0) || sorted[0] == sorted[m - 1] {
        return Err(Error::Fit(format!(
            "degenerate excess sample (m={m}, a1={a1}, a2={a2})"
        )));
    }
    let gamma = (9.0 * a2 - 4.0 * a1) / denom;
    let mut sigma = 2.0 * a1 * (2.0 - gamma);
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Fit(format!("nonpositive scale estimate {sigma}")));
    }
    if gamma < 0.0 {
        // Widen the scale so the fitted end point lies beyond the largest excess.
        sigma = sigma.max(-gamma * sorted[m - 1] * (1.0 + SUPPORT_MARGIN));
    }
    let fit = GpdFit {
        threshold: 0.0,
        sigma,
        gamma,
        exceedances: m,
    };
    Ok(fit)
}

/// Fits the tail of one margin: the threshold is the `(n - k_margin)`-th
/// ascending order statistic and the excesses are the strictly larger values.
pub fn fit_margin(values: &[f64], k_margin: usize) -> Result<GpdFit> {
    let n = values.len();
    if k_margin < 2 || k_margin >= n {
        return Err(Error::arg(format!(
            "k_margin must lie in 2..={}, got {k_margin}",
            n.saturating_sub(1)
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let u = sorted[n - k_margin - 1];
    let excesses: Vec<f64> = sorted[n - k_margin..].iter().filter(|v| **v > u).map(|v| v - u).collect();
    let fit = gpd_fit_pwm(&excesses)?;
    Ok(GpdFit { threshold: u, ..fit })
}

/// POT estimate of `P(X > z)` from a fit based on a sample of size `n`.
pub fn pot_tail_prob(fit: &GpdFit, n: usize, z: f64) -> Result<f64> {
    if n == 0 || fit.exceedances > n {
        return Err(Error::arg(format!(
            "sample size {n} is incompatible with {} exceedances",
            fit.exceedances
        )));
    }
    if !(z >= fit.threshold) {
        return Err(Error::arg(format!(
            "level {z} lies below the threshold {}",
            fit.threshold
        )));
    }
    let frac = fit.exceedance_fraction(n);
    let y = (z - fit.threshold) / fit.sigma;
    if fit.gamma.abs() < GAMMA_ZERO {
        return Ok(frac * (-y).exp());
    }
    let base = 1.0 + fit.gamma * y;
    if base <= 0.0 {
        return Ok(0.0);
    }
    Ok(frac * (-(fit.gamma * y).ln_1p() / fit.gamma).exp())
}

/// Marginal exceedance probabilities `p_j = P(X_j > z_j)`.
pub trait MarginTail {
    fn dimension(&self) -> usize;
    fn exceedance_prob(&self, j: usize, z: f64) -> Result<f64>;
}

impl MarginTail for TailModel {
    fn dimension(&self) -> usize {
        2
    }

    fn exceedance_prob(&self, j: usize, z: f64) -> Result<f64> {
        if j >= 2 {
            return Err(Error::arg(format!("margin index {j} out of range")));
        }
        Ok(self.marginal_survival(z))
    }
}

/// Per-margin POT fits of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PotMargins {
    fits: Vec<GpdFit>,
    n: usize,
}

impl PotMargins {
    pub fn fit(sample: &Sample, k_margin: usize) -> Result<Self> {
        let fits = (0..sample.d())
            .map(|j| {
                let col: Vec<f64> = sample.column(j).collect();
                fit_margin(&col, k_margin)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { fits, n: sample.n() })
    }

    pub fn fits(&self) -> &[GpdFit] {
        &self.fits
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }
}

impl MarginTail for PotMargins {
    fn dimension(&self) -> usize {
        self.fits.len()
    }

    fn exceedance_prob(&self, j: usize, z: f64) -> Result<f64> {
        let fit = self
            .fits
            .get(j)
            .ok_or_else(|| Error::arg(format!("margin index {j} out of range")))?;
        pot_tail_prob(fit, self.n, z)
    }
}

fn simplex_point(p: &[f64]) -> Result<(f64, Vec<f64>)> {
    if p.is_empty() || p.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
        return Err(Error::arg(format!(
            "marginal probabilities must lie in (0, 1), got {p:?}"
        )));
    }
    let total: f64 = p.iter().sum();
    if total >= 1.0 {
        return Err(Error::arg(format!(
            "marginal probabilities must sum below 1, got {total}"
        )));
    }
    Ok((total, p.iter().map(|v| v / total).collect()))
}

/// `(sum p) * L(p / sum p)`.
pub fn failure_prob_known_margins(p: &[f64], l: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let (total, w) = simplex_point(p)?;
    Ok(total * l(&w)?)
}

/// First-order estimate plus the second-order term
/// `(k/n)^rho (sum p)^(1 - rho) Delta(p / sum p)`, where `delta` evaluates
/// `Delta_{k, 2^(-1/rho)}`.
pub fn failure_prob_second_order(
    p: &[f64],
    l: impl Fn(&[f64]) -> Result<f64>,
    delta: impl Fn(&[f64]) -> Result<f64>,
    k: usize,
    n: usize,
    rho_hat: f64,
) -> Result<f64> {
    if !(rho_hat < 0.0) {
        return Err(Error::arg(format!("rho must be negative, got {rho_hat}")));
    }
    if k == 0 || k >= n {
        return Err(Error::arg(format!("k must lie in 1..{n}, got {k}")));
    }
    let (total, w) = simplex_point(p)?;
    let first = total * l(&w)?;
    let scale = (k as f64 / n as f64).powf(rho_hat) * total.powf(1.0 - rho_hat);
    Ok(first + scale * delta(&w)?)
}

/// Failure probability at levels `z` with the given marginal tails.
pub fn failure_prob_with_margins<M: MarginTail + ?Sized>(
    margins: &M,
    z: &[f64],
    l: impl Fn(&[f64]) -> Result<f64>,
) -> Result<f64> {
    if z.len() != margins.dimension() {
        return Err(Error::arg(format!(
            "expected {} levels, got {}",
            margins.dimension(),
            z.len()
        )));
    }
    failure_prob_known_margins(&marginal_probs(margins, z)?, l)
}

/// Exceedance probabilities of every margin at `z`; a level beyond a
/// finite fitted end point is a fit error.
pub fn marginal_probs<M: MarginTail + ?Sized>(margins: &M, z: &[f64]) -> Result<Vec<f64>> {
    z.iter()
        .enumerate()
        .map(|(j, &zj)| match margins.exceedance_prob(j, zj)? {
            p if p > 0.0 => Ok(p),
            _ => Err(Error::Fit(format!("level {zj} lies beyond the fitted support of margin {}", j + 1))),
        })
        .collect()
}

/// Failure probability with margins estimated by POT above the
/// `(n - k_margin)`-th order statistic of each column.
pub fn failure_prob_pot(
    sample: &Sample,
    k_margin: usize,
    z: &[f64],
    l: impl Fn(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let margins = PotMargins::fit(sample, k_margin)?;
    failure_prob_with_margins(&margins, z, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::rng_from_seed;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn gpd_draws(sigma: f64, gamma: f64, m: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..m)
            .map(|_| {
                let u: f64 = rng.random();
                let v = 1.0 - u;
                if gamma == 0.0 {
                    -sigma * v.ln()
                } else {
                    sigma * (v.powf(-gamma) - 1.0) / gamma
                }
            })
            .filter(|e| *e > 0.0)
            .collect()
    }

    #[test]
    fn exponential_excesses() {
        let fit = gpd_fit_pwm(&gpd_draws(1.0, 0.0, 100_000, 1)).unwrap();
        assert!(fit.gamma.abs() < 0.02, "{fit:?}");
        assert!((fit.sigma - 1.0).abs() < 0.02, "{fit:?}");
    }

    #[test]
    fn recovers_shape() {
        for (i, gamma) in [-0.3, 0.0, 0.5, 1.0].into_iter().enumerate() {
            for rep in 0..10 {
                let fit = gpd_fit_pwm(&gpd_draws(2.0, gamma, 100_000, 100 * i as u64 + rep)).unwrap();
                assert!((fit.gamma - gamma).abs() < 0.05, "gamma {gamma}: {fit:?}");
            }
        }
    }

    #[test]
    fn degenerate_excesses() {
        assert!(matches!(gpd_fit_pwm(&[1.0, 1.0]), Err(Error::Fit(_))));
        assert!(gpd_fit_pwm(&[1.0]).is_err());
        assert!(gpd_fit_pwm(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn tail_prob_reference_values() {
        let fit = GpdFit {
            threshold: 0.0,
            sigma: 1.0,
            gamma: 1.0,
            exceedances: 200,
        };
        assert_relative_eq!(pot_tail_prob(&fit, 1000, 9.0).unwrap(), 0.02, max_relative = 1e-14);
        assert_eq!(pot_tail_prob(&fit, 1000, 0.0).unwrap(), 0.2);
        assert!(pot_tail_prob(&fit, 1000, -1.0).is_err());

        let exp_fit = GpdFit { gamma: 0.0, sigma: 2.0, threshold: 1.0, ..fit.clone() };
        assert_relative_eq!(pot_tail_prob(&exp_fit, 1000, 3.0).unwrap(), 0.2 * (-1.0f64).exp(), max_relative = 1e-15);

        let near = GpdFit { gamma: 1e-9, ..exp_fit.clone() };
        assert!((pot_tail_prob(&near, 1000, 3.0).unwrap() - pot_tail_prob(&exp_fit, 1000, 3.0).unwrap()).abs() < 1e-12);

        let bounded = GpdFit { gamma: -0.5, sigma: 1.0, threshold: 0.0, ..fit };
        assert_eq!(bounded.support_bound(), Some(2.0));
        assert_eq!(pot_tail_prob(&bounded, 1000, 2.5).unwrap(), 0.0);
    }

    #[test]
    fn known_margins_examples() {
        let bpii = TailModel::bpii(3.0).unwrap();
        let v = failure_prob_known_margins(&[1e-4, 5e-5], |x| Ok(bpii.stdf([x[0], x[1]]))).unwrap();
        assert_relative_eq!(v, 1.5e-4 * 7.0 / 9.0, max_relative = 1e-12);

        let q = 0.01;
        let max = failure_prob_known_margins(&[q, q], |x| Ok(x[0].max(x[1]))).unwrap();
        assert_relative_eq!(max, q, max_relative = 1e-15);
        let ind = failure_prob_known_margins(&[0.01, 0.02], |x| Ok(x[0] + x[1])).unwrap();
        assert_relative_eq!(ind, 0.03, max_relative = 1e-15);

        assert!(failure_prob_known_margins(&[0.6, 0.5], |x| Ok(x[0] + x[1])).is_err());
        assert!(failure_prob_known_margins(&[0.0, 0.5], |x| Ok(x[0] + x[1])).is_err());
    }

    #[test]
    fn second_order_term() {
        let l = |x: &[f64]| Ok(x[0] + x[1] - 0.2);
        let p = [1e-4, 5e-5];
        let first = failure_prob_known_margins(&p, l).unwrap();
        let zero = failure_prob_second_order(&p, l, |_| Ok(0.0), 100, 1000, -1.0).unwrap();
        assert_eq!(zero, first);
        let delta = 0.3;
        let v = failure_prob_second_order(&p, l, |_| Ok(delta), 100, 1000, -1.0).unwrap();
        assert_relative_eq!(v, first + 10.0 * 1.5e-4f64.powi(2) * delta, max_relative = 1e-12);
        assert!(failure_prob_second_order(&p, l, |_| Ok(0.0), 100, 1000, 0.0).is_err());
    }

    #[test]
    fn oracle_margins_reduce_to_known_margins() {
        let bpii = TailModel::bpii(3.0).unwrap();
        let l = |x: &[f64]| Ok(bpii.stdf([x[0], x[1]]));
        let z = [1e4, 2e4];
        let p = [bpii.marginal_survival(z[0]), bpii.marginal_survival(z[1])];
        assert_eq!(
            failure_prob_with_margins(&bpii, &z, l).unwrap(),
            failure_prob_known_margins(&p, l).unwrap()
        );
    }

    #[test]
    fn margin_threshold_convention() {
        let values: Vec<f64> = (1..=10).map(f64::from).collect();
        let fit = fit_margin(&values, 4).unwrap();
        assert_eq!(fit.threshold, 6.0);
        assert_eq!(fit.exceedances, 4);
        assert!(fit.support_bound().unwrap() > 10.0);
        assert!(fit_margin(&values, 1).is_err());
        assert!(fit_margin(&values, 10).is_err());
    }
}
