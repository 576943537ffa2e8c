use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use super::pickands::{aggregate_median, clamp_stdf, convexify_pickands, PickandsCurve};
use super::{check_k, corrected_stdf_ring, corrected_stdf_tilde, Estimate, StdfSource};
use crate::error::{Error, Result};
use crate::second_order::{rho_hat, SecondOrderEstimate, DEGENERATE_RHO};

/// Estimates of the second-order index above this value are replaced by
/// [`DEGENERATE_RHO`] in the ring estimator: as `rho -> 0` the dilation
/// `b = (a^-rho + 1)^(-1/rho)` diverges.
pub const RING_RHO_CEILING: f64 = -0.25;

/// Tuning knobs of the corrected and aggregated estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Intermediate count for single-`k` uses (second-order failure
    /// probability, M-ratio curves).
    pub k: usize,
    /// Dilation of the corrected estimators.
    pub a: f64,
    /// Ratio of evaluation points in the second-order index estimator.
    pub r: f64,
    /// Intermediate count used by the second-order quantities.
    pub k_rho: usize,
    /// Aggregation ceiling: medians run over `k = 1..=kappa`.
    pub kappa: usize,
    /// Fixed second-order index, bypassing its estimation.
    pub rho_override: Option<f64>,
    /// Enforce `max(x) <= L(x) <= sum(x)` on every reported value.
    pub clamp: bool,
    pub rho_floor: f64,
    /// Evaluation point of the second-order index estimator; defaults to
    /// `(1/2, ..., 1/2)`.
    pub rho_point: Option<Vec<f64>>,
    /// Grid size used when a convexified curve must be evaluated off-grid.
    pub grid: usize,
}

impl EstimatorConfig {
    /// Defaults for a sample of size `n`: `a = r = 0.4`,
    /// `k_rho = ceil(0.99 n)`, `kappa = n - 1`, `k = ceil(n / 10)`.
    pub fn for_sample_size(n: usize) -> Self {
        let top = n.saturating_sub(1).max(1);
        Self {
            k: n.div_ceil(10).clamp(1, top),
            a: 0.4,
            r: 0.4,
            k_rho: ((0.99 * n as f64).ceil() as usize).clamp(1, top),
            kappa: top,
            rho_override: None,
            clamp: true,
            rho_floor: -10.0,
            rho_point: None,
            grid: 30,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        check_k(self.k, n, "k")?;
        check_k(self.k_rho, n, "k_rho")?;
        check_k(self.kappa, n, "kappa")?;
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::arg(format!("a must lie in (0, 1), got {}", self.a)));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::arg(format!("r must lie in (0, 1), got {}", self.r)));
        }
        if let Some(rho) = self.rho_override {
            if !(rho < 0.0 && rho.is_finite()) {
                return Err(Error::arg(format!("rho override must be negative, got {rho}")));
            }
        }
        if !(self.rho_floor < 0.0 && self.rho_floor.is_finite()) {
            return Err(Error::arg(format!("rho floor must be negative, got {}", self.rho_floor)));
        }
        if self.grid == 0 {
            return Err(Error::arg("grid size must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn rho_point_for(&self, d: usize) -> Result<Vec<f64>> {
        match &self.rho_point {
            Some(p) if p.len() == d => Ok(p.clone()),
            Some(p) => Err(Error::arg(format!(
                "rho evaluation point has {} coordinates, sample has {d}",
                p.len()
            ))),
            None => Ok(vec![0.5; d]),
        }
    }
}

/// Which estimator of `L` to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    /// `L_k` at a fixed `k`.
    Empirical { k: usize },
    /// Median over `k` of the rho-based bias-corrected estimator.
    RingAgg,
    /// Median over `k` of the ratio-corrected estimator.
    TildeAgg,
    /// Greatest convex minorant of the `RingAgg` Pickands curve.
    RingAggConvex,
}

impl EstimatorKind {
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empirical { k } => write!(f, "empirical:{k}"),
            Self::RingAgg => f.write_str("ring-agg"),
            Self::TildeAgg => f.write_str("tilde-agg"),
            Self::RingAggConvex => f.write_str("ring-agg-convex"),
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    /// Accepts `ring-agg`, `tilde-agg`, `ring-agg-convex` and `empirical:K`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ring-agg" => Ok(Self::RingAgg),
            "tilde-agg" => Ok(Self::TildeAgg),
            "ring-agg-convex" => Ok(Self::RingAggConvex),
            other => match other.strip_prefix("empirical:") {
                Some(k) => k
                    .parse()
                    .map(|k| Self::Empirical { k })
                    .map_err(|_| Error::arg(format!("invalid k in estimator tag {other:?}"))),
                None => Err(Error::arg(format!("unknown estimator {other:?}"))),
            },
        }
    }
}

/// An estimator family bound to one sample and one configuration.
///
/// The second-order index is estimated once at construction and shared by
/// every evaluation.
pub struct StdfEstimator<'a, S: StdfSource + ?Sized> {
    src: &'a S,
    config: &'a EstimatorConfig,
    rho: SecondOrderEstimate,
    rho_used: f64,
    convex_curve: OnceLock<Result<PickandsCurve, String>>,
}

impl<'a, S: StdfSource + ?Sized> StdfEstimator<'a, S> {
    pub fn new(src: &'a S, config: &'a EstimatorConfig) -> Result<Self> {
        config.validate(src.sample_size())?;
        let point = config.rho_point_for(src.dimension())?;
        let rho = rho_hat(src, config.k_rho, config.a, config.r, &point, config.rho_floor)?;
        let rho_used = match config.rho_override {
            Some(r) => r,
            None if rho.rho_hat > RING_RHO_CEILING => DEGENERATE_RHO,
            None => rho.rho_hat,
        };
        Ok(Self {
            src,
            config,
            rho,
            rho_used,
            convex_curve: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        self.config
    }

    /// The second-order estimate computed from the data, whether or not an
    /// override replaced it.
    pub fn rho_estimate(&self) -> &SecondOrderEstimate {
        &self.rho
    }

    /// The second-order index actually used by the ring estimator.
    pub fn rho_used(&self) -> f64 {
        self.rho_used
    }

    fn finish(&self, x: &[f64], v: f64) -> f64 {
        if self.config.clamp {
            clamp_stdf(x, v)
        } else {
            v
        }
    }

    /// Corrected estimate at a single `k`; evaluation failures (for example
    /// a dilated point leaving the estimator's domain) come back flagged as
    /// degenerate so that aggregation skips them.
    pub fn per_k(&self, kind: EstimatorKind, k: usize, x: &[f64]) -> Estimate {
        let raw = match kind {
            EstimatorKind::Empirical { .. } => self.src.base_stdf(k, x).map(Estimate::ok),
            EstimatorKind::RingAgg | EstimatorKind::RingAggConvex => {
                corrected_stdf_ring(self.src, k, self.config.a, self.rho_used, x).map(Estimate::ok)
            }
            EstimatorKind::TildeAgg => corrected_stdf_tilde(self.src, k, self.config.k_rho, self.config.a, x),
        };
        match raw {
            Ok(e) if e.value.is_finite() => Estimate {
                value: self.finish(x, e.value),
                degenerate: e.degenerate,
            },
            Ok(e) => Estimate::degenerate(e.value),
            Err(_) => Estimate::degenerate(f64::NAN),
        }
    }

    /// Value of the selected estimator at `x`.
    pub fn evaluate(&self, kind: EstimatorKind, x: &[f64]) -> Result<f64> {
        let v = match kind {
            EstimatorKind::Empirical { k } => self.src.base_stdf(k, x)?,
            EstimatorKind::RingAgg | EstimatorKind::TildeAgg => {
                let per_k: Vec<Estimate> = (1..=self.config.kappa).map(|k| self.per_k(kind, k, x)).collect();
                aggregate_median(&per_k)?
            }
            EstimatorKind::RingAggConvex => {
                if x.len() != 2 {
                    return Err(Error::arg("the convexified estimator is bivariate"));
                }
                let s = x[0] + x[1];
                if s == 0.0 {
                    return Ok(0.0);
                }
                let curve = self.convex_curve()?;
                s * curve.value_at(x[1] / s)?
            }
        };
        Ok(self.finish(x, v))
    }

    /// Pickands curve `t -> L(1 - t, t)` on the grid `t = 0/T, ..., T/T`.
    pub fn pickands_curve(&self, kind: EstimatorKind, grid: usize) -> Result<PickandsCurve> {
        if grid == 0 {
            return Err(Error::arg("grid size must be at least 1"));
        }
        if self.src.dimension() != 2 {
            return Err(Error::arg("Pickands curves are defined for bivariate samples"));
        }
        let base = match kind {
            EstimatorKind::RingAggConvex => EstimatorKind::RingAgg,
            other => other,
        };
        let values = (0..=grid)
            .map(|t| {
                let t = t as f64 / grid as f64;
                self.evaluate(base, &[1.0 - t, t])
            })
            .collect::<Result<Vec<_>>>()?;
        let curve = PickandsCurve::new(values)?;
        Ok(match kind {
            EstimatorKind::RingAggConvex => convexify_pickands(&curve),
            _ => curve,
        })
    }

    fn convex_curve(&self) -> Result<&PickandsCurve> {
        self.convex_curve
            .get_or_init(|| {
                self.pickands_curve(EstimatorKind::RingAggConvex, self.config.grid)
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Aggregation(e.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_sample_size() {
        let c = EstimatorConfig::for_sample_size(1000);
        assert_eq!((c.k_rho, c.kappa, c.k, c.grid), (990, 999, 100, 30));
        assert_eq!((c.a, c.r, c.clamp, c.rho_floor), (0.4, 0.4, true, -10.0));
        c.validate(1000).unwrap();
        let small = EstimatorConfig::for_sample_size(3);
        assert_eq!((small.k_rho, small.kappa), (2, 2));
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let mut c = EstimatorConfig::for_sample_size(100);
        c.kappa = 100;
        assert!(c.validate(100).is_err());
        let mut c = EstimatorConfig::for_sample_size(100);
        c.a = 1.0;
        assert!(c.validate(100).is_err());
        let mut c = EstimatorConfig::for_sample_size(100);
        c.rho_override = Some(0.0);
        assert!(c.validate(100).is_err());
    }

    #[test]
    fn kind_round_trips_through_text() {
        for kind in [
            EstimatorKind::Empirical { k: 42 },
            EstimatorKind::RingAgg,
            EstimatorKind::TildeAgg,
            EstimatorKind::RingAggConvex,
        ] {
            assert_eq!(kind.to_string().parse::<EstimatorKind>().unwrap(), kind);
        }
        assert!("empirical".parse::<EstimatorKind>().is_err());
        assert!("ring".parse::<EstimatorKind>().is_err());
    }
}
