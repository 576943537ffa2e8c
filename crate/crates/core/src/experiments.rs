//! Monte Carlo experiments: replicated estimation against a known model.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{ranks, EstimatorConfig, EstimatorKind, PickandsCurve, StdfEstimator};
use crate::models::{sample, stream_seed, TailModel};

/// `ABias = mean |e - truth|` and `MSE = mean (e - truth)^2`.
pub fn abias_mse(estimates: &[f64], truth: f64) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return Err(Error::arg("ABias and MSE need at least one estimate"));
    }
    let n = estimates.len() as f64;
    let abias = estimates.iter().map(|e| (e - truth).abs()).sum::<f64>() / n;
    let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / n;
    Ok((abias, mse))
}

fn check_grids(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::arg(format!("grid sizes differ: {a} and {b}")));
    }
    Ok(())
}

/// `(1/(T+1)) sum_{t=1..T} |est(t/T) - truth(t/T)|`; the node `t = 0` does
/// not enter the sum.
pub fn l1_error_curve(estimate: &PickandsCurve, truth: &PickandsCurve) -> Result<f64> {
    let grid = estimate.grid_size();
    check_grids(grid, truth.grid_size())?;
    let sum: f64 = estimate.values()[1..]
        .iter()
        .zip(&truth.values()[1..])
        .map(|(e, t)| (e - t).abs())
        .sum();
    Ok(sum / (grid as f64 + 1.0))
}

/// Radii `b(theta) = 1 / L(cos theta, sin theta)` at `theta_t = pi t / (2T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QCurve {
    radii: Vec<f64>,
}

impl QCurve {
    pub fn grid_size(&self) -> usize {
        self.radii.len() - 1
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn angle(&self, t: usize) -> f64 {
        FRAC_PI_2 * t as f64 / self.grid_size() as f64
    }

    /// `(theta, radius)` pairs.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.radii.iter().enumerate().map(|(t, &b)| (self.angle(t), b))
    }
}

/// Tabulates the Q-curve of the evaluator `l` on a grid of size `grid`.
pub fn qcurve(l: impl Fn(&[f64]) -> Result<f64>, grid: usize) -> Result<QCurve> {
    if grid == 0 {
        return Err(Error::arg("grid size must be at least 1"));
    }
    let radii = (0..=grid)
        .map(|t| {
            let theta = FRAC_PI_2 * t as f64 / grid as f64;
            let v = l(&[theta.cos(), theta.sin()])?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::arg(format!(
                    "L(cos {theta}, sin {theta}) = {v} is not positive"
                )));
            }
            Ok(1.0 / v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QCurve { radii })
}

/// `(pi/(2(T+1))) sum_{t=0..T} |b_est - b| (cos theta_t + sin theta_t)`.
pub fn l1_error_qcurve(estimate: &QCurve, truth: &QCurve) -> Result<f64> {
    let grid = estimate.grid_size();
    check_grids(grid, truth.grid_size())?;
    let sum: f64 = (0..=grid)
        .map(|t| {
            let theta = estimate.angle(t);
            (estimate.radii[t] - truth.radii[t]).abs() * (theta.cos() + theta.sin())
        })
        .sum();
    Ok(FRAC_PI_2 / (grid as f64 + 1.0) * sum)
}

/// An estimator requested in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorSpec {
    Single(EstimatorKind),
    /// `L_k` for every `k = 1..n-1`.
    EmpiricalAll,
}

impl EstimatorSpec {
    fn expand(&self, n: usize) -> Vec<EstimatorKind> {
        match *self {
            Self::Single(kind) => vec![kind],
            Self::EmpiricalAll => (1..n).map(|k| EstimatorKind::Empirical { k }).collect(),
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Single(kind) => kind.fmt(f),
            Self::EmpiricalAll => f.write_str("empirical:all"),
        }
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "empirical:all" => Ok(Self::EmpiricalAll),
            other => other.parse().map(Self::Single),
        }
    }
}

/// A per-replicate quantity.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    /// The estimate at a fixed point.
    Point(Vec<f64>),
    /// L1 error of the Pickands curve.
    L1,
    /// L1 error of the Q-curve.
    L1Q,
    /// The second-order index estimate.
    Rho,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Point(_) => "point",
            Self::L1 => "l1",
            Self::L1Q => "l1q",
            Self::Rho => "rho",
        }
    }
}

/// Label of the rows carrying the second-order index estimate.
pub const RHO_LABEL: &str = "rho-hat";

/// A Monte Carlo study: `replicates` samples of size `n` from `model`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub model: TailModel,
    pub n: usize,
    pub replicates: usize,
    pub grid: usize,
    pub estimators: Vec<EstimatorSpec>,
    pub config: EstimatorConfig,
    pub base_seed: u64,
    pub metrics: Vec<Metric>,
}

impl ExperimentSpec {
    /// Ring and tilde aggregates, L1 metric, `T = 30` and the default
    /// tuning for samples of size `n`.
    pub fn new(model: TailModel, n: usize, replicates: usize, base_seed: u64) -> Self {
        Self {
            model,
            n,
            replicates,
            grid: 30,
            estimators: vec![
                EstimatorSpec::Single(EstimatorKind::RingAgg),
                EstimatorSpec::Single(EstimatorKind::TildeAgg),
            ],
            config: EstimatorConfig::for_sample_size(n),
            base_seed,
            metrics: vec![Metric::L1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n < 2 {
            return Err(Error::arg(format!("sample size must be at least 2, got {}", self.n)));
        }
        if self.replicates == 0 {
            return Err(Error::arg("at least one replicate is needed"));
        }
        if self.grid == 0 {
            return Err(Error::arg("grid size must be at least 1"));
        }
        if self.metrics.is_empty() {
            return Err(Error::arg("no metric requested"));
        }
        let needs_estimators = self.metrics.iter().any(|m| *m != Metric::Rho);
        if needs_estimators && self.estimators.is_empty() {
            return Err(Error::arg("no estimator requested"));
        }
        for m in &self.metrics {
            if let Metric::Point(x) = m {
                if x.len() != 2 || x.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::arg(format!("invalid evaluation point {x:?}")));
                }
            }
        }
        self.config.validate(self.n)
    }

    /// Estimator labels in output order.
    pub fn estimator_kinds(&self) -> Vec<EstimatorKind> {
        self.estimators.iter().flat_map(|e| e.expand(self.n)).collect()
    }

    /// Seed of the sample of replicate `i`.
    pub fn replicate_seed(&self, i: usize) -> u64 {
        stream_seed(self.base_seed, i as u64)
    }
}

/// One `(replicate, estimator, metric, value)` record; failed evaluations
/// carry `NaN` and an error message.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub replicate: usize,
    pub estimator: String,
    pub metric: String,
    pub value: f64,
    pub error: Option<String>,
}

/// Five-number summary and mean of the successful rows of one
/// `(estimator, metric)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub estimator: String,
    pub metric: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    /// Rows that entered the statistics.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub rows: Vec<ResultRow>,
}

/// Linear-interpolation quantile of sorted data (Hyndman and Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl ExperimentResult {
    /// Successful values of one `(estimator, metric)` pair, by replicate.
    pub fn values(&self, estimator: &str, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.estimator == estimator && r.metric == metric && r.error.is_none())
            .map(|r| r.value)
            .collect()
    }

    pub fn errors(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    /// Summary rows in order of first appearance.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(&str, &str)> = Vec::new();
        for r in &self.rows {
            let key = (r.estimator.as_str(), r.metric.as_str());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.into_iter()
            .map(|(estimator, metric)| {
                let mut v = self.values(estimator, metric);
                v.sort_by(f64::total_cmp);
                let mean = if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                };
                SummaryRow {
                    estimator: estimator.to_string(),
                    metric: metric.to_string(),
                    min: v.first().copied().unwrap_or(f64::NAN),
                    q1: quantile_sorted(&v, 0.25),
                    median: quantile_sorted(&v, 0.5),
                    q3: quantile_sorted(&v, 0.75),
                    max: v.last().copied().unwrap_or(f64::NAN),
                    mean,
                    count: v.len(),
                }
            })
            .collect()
    }

    /// ABias and MSE of the point metric of one estimator.
    pub fn abias_mse(&self, estimator: &str) -> Result<(f64, f64)> {
        let x = self
            .spec
            .metrics
            .iter()
            .find_map(|m| match m {
                Metric::Point(x) => Some(x.clone()),
                _ => None,
            })
            .ok_or_else(|| Error::arg("the experiment has no point metric"))?;
        let truth = self.spec.model.stdf([x[0], x[1]]);
        abias_mse(&self.values(estimator, "point"), truth)
    }
}

struct Truth {
    curve: Option<PickandsCurve>,
    qcurve: Option<QCurve>,
}

fn replicate_rows(spec: &ExperimentSpec, kinds: &[EstimatorKind], truth: &Truth, i: usize) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    let mut push = |estimator: String, metric: &str, outcome: Result<f64>| {
        let (value, error) = match outcome {
            Ok(v) => (v, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        rows.push(ResultRow {
            replicate: i,
            estimator,
            metric: metric.to_string(),
            value,
            error,
        });
    };
    let prepared = sample(&spec.model, spec.n, spec.replicate_seed(i)).and_then(|s| ranks(&s));
    let ranked = match prepared {
        Ok(r) => r,
        Err(e) => {
            let msg = e.to_string();
            for m in &spec.metrics {
                if *m == Metric::Rho {
                    push(RHO_LABEL.to_string(), m.name(), Err(Error::Degenerate(msg.clone())));
                } else {
                    for kind in kinds {
                        push(kind.to_string(), m.name(), Err(Error::Degenerate(msg.clone())));
                    }
                }
            }
            return rows;
        }
    };
    let est = StdfEstimator::new(&ranked, &spec.config);
    for m in &spec.metrics {
        let est = match &est {
            Ok(e) => e,
            Err(e) => {
                let labels: Vec<String> = if *m == Metric::Rho {
                    vec![RHO_LABEL.to_string()]
                } else {
                    kinds.iter().map(|k| k.to_string()).collect()
                };
                for label in labels {
                    push(label, m.name(), Err(Error::Degenerate(e.to_string())));
                }
                continue;
            }
        };
        if *m == Metric::Rho {
            push(RHO_LABEL.to_string(), m.name(), Ok(est.rho_estimate().rho_hat));
            continue;
        }
        for &kind in kinds {
            let value = match m {
                Metric::Point(x) => est.evaluate(kind, x),
                Metric::L1 => est
                    .pickands_curve(kind, spec.grid)
                    .and_then(|c| l1_error_curve(&c, truth.curve.as_ref().expect("truth curve"))),
                Metric::L1Q => qcurve(|x| est.evaluate(kind, x), spec.grid)
                    .and_then(|q| l1_error_qcurve(&q, truth.qcurve.as_ref().expect("truth Q-curve"))),
                Metric::Rho => unreachable!(),
            };
            push(kind.to_string(), m.name(), value);
        }
    }
    rows
}

/// Runs every replicate (in parallel) and collects the rows in replicate
/// order. Failures are recorded as error rows.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let kinds = spec.estimator_kinds();
    let model = spec.model;
    let truth = Truth {
        curve: spec
            .metrics
            .contains(&Metric::L1)
            .then(|| PickandsCurve::from_fn(spec.grid, |t| model.stdf([1.0 - t, t])))
            .transpose()?,
        qcurve: spec
            .metrics
            .contains(&Metric::L1Q)
            .then(|| qcurve(|x| Ok(model.stdf([x[0], x[1]])), spec.grid))
            .transpose()?,
    };
    let rows = (0..spec.replicates)
        .into_par_iter()
        .map(|i| replicate_rows(spec, &kinds, &truth, i))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(ExperimentResult {
        spec: spec.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn abias_mse_examples() {
        assert_eq!(abias_mse(&[1.0, 3.0], 2.0).unwrap(), (1.0, 1.0));
        let (ab, mse) = abias_mse(&[0.6, 0.9, 0.7], 0.8).unwrap();
        assert_relative_eq!(ab, 0.4 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(mse, 0.02, max_relative = 1e-12);
        assert_eq!(abias_mse(&[0.25; 4], 1.0).unwrap(), (0.75, 0.5625));
        assert!(abias_mse(&[], 0.0).is_err());
    }

    #[test]
    fn l1_curve_examples() {
        let truth = PickandsCurve::from_fn(30, |t| t.max(1.0 - t)).unwrap();
        assert_eq!(l1_error_curve(&truth, &truth).unwrap(), 0.0);
        let shifted = PickandsCurve::from_fn(30, |t| t.max(1.0 - t) + 0.01).unwrap();
        assert_relative_eq!(l1_error_curve(&shifted, &truth).unwrap(), 30.0 / 31.0 * 0.01, max_relative = 1e-12);
        let mut first = truth.values().to_vec();
        first[0] += 0.5;
        let first = PickandsCurve::new(first).unwrap();
        assert_eq!(l1_error_curve(&first, &truth).unwrap(), 0.0);
        let coarse = PickandsCurve::from_fn(10, |t| t).unwrap();
        assert!(l1_error_curve(&coarse, &truth).is_err());
    }

    #[test]
    fn qcurve_examples() {
        let ind = qcurve(|x| Ok(x[0] + x[1]), 2).unwrap();
        assert_relative_eq!(ind.radii()[1], std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-15);
        let circle = qcurve(|x| Ok((x[0] * x[0] + x[1] * x[1]).sqrt()), 30).unwrap();
        assert!(circle.radii().iter().all(|b| (b - 1.0).abs() < 1e-15));
        let comonotone = qcurve(|x| Ok(x[0].max(x[1])), 30).unwrap();
        for (theta, b) in comonotone.nodes() {
            assert_relative_eq!(b, 1.0 / theta.cos().max(theta.sin()), max_relative = 1e-15);
        }
        assert!(qcurve(|_| Ok(0.0), 4).is_err());
    }

    #[test]
    fn l1_qcurve_examples() {
        let one = qcurve(|x| Ok(x[0] + x[1]), 1).unwrap();
        let delta = 0.1;
        let shifted = QCurve {
            radii: one.radii().iter().map(|b| b + delta).collect(),
        };
        assert_relative_eq!(l1_error_qcurve(&shifted, &one).unwrap(), std::f64::consts::PI * delta / 2.0, max_relative = 1e-12);

        let base = qcurve(|x| Ok(x[0] + x[1]), 30).unwrap();
        let mut radii = base.radii().to_vec();
        radii[0] += delta;
        let bumped = QCurve { radii };
        assert_relative_eq!(l1_error_qcurve(&bumped, &base).unwrap(), std::f64::consts::PI / 62.0 * delta, max_relative = 1e-12);
        assert_eq!(l1_error_qcurve(&base, &base).unwrap(), 0.0);
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!(quantile_sorted(&[], 0.5).is_nan());
    }

    #[test]
    fn estimator_spec_tags() {
        assert_eq!("empirical:all".parse::<EstimatorSpec>().unwrap(), EstimatorSpec::EmpiricalAll);
        let ring: EstimatorSpec = "ring-agg".parse().unwrap();
        assert_eq!(ring.to_string(), "ring-agg");
        assert_eq!(EstimatorSpec::EmpiricalAll.expand(4).len(), 3);
    }
}
