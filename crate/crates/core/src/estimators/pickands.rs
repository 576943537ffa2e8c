use super::config::{EstimatorConfig, EstimatorKind, StdfEstimator};
use super::{Estimate, StdfSource};
use crate::error::{Error, Result};

/// Values of `t -> L(1 - t, t)` at `t = 0/T, 1/T, ..., T/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PickandsCurve {
    values: Vec<f64>,
}

impl PickandsCurve {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::arg("a Pickands curve needs at least two nodes"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::arg(format!("Pickands curve value {v} is not finite")));
        }
        Ok(Self { values })
    }

    /// Tabulates `f` on the grid of size `grid`.
    pub fn from_fn(grid: usize, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        if grid == 0 {
            return Err(Error::arg("grid size must be at least 1"));
        }
        Self::new((0..=grid).map(|t| f(t as f64 / grid as f64)).collect())
    }

    pub fn grid_size(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(t, value)` pairs with `t = i / T`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let grid = self.grid_size() as f64;
        self.values.iter().enumerate().map(move |(i, &v)| (i as f64 / grid, v))
    }

    /// Piecewise-linear interpolation between grid nodes.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::arg(format!("Pickands argument must lie in [0, 1], got {t}")));
        }
        let grid = self.grid_size();
        let pos = t * grid as f64;
        let i = (pos.floor() as usize).min(grid - 1);
        let w = pos - i as f64;
        Ok((1.0 - w) * self.values[i] + w * self.values[i + 1])
    }
}

/// `min(1, max(value, max(t, 1 - t)))`.
pub fn clamp_pickands(t: f64, value: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&t));
    value.max(t.max(1.0 - t)).min(1.0)
}

/// The bounds `max_j x_j <= L(x) <= sum_j x_j`, which reduce to
/// [`clamp_pickands`] on the unit simplex.
pub fn clamp_stdf(x: &[f64], value: f64) -> f64 {
    let hi: f64 = x.iter().sum();
    let lo = x.iter().copied().fold(0.0, f64::max);
    value.max(lo).min(hi)
}

/// Median of the non-degenerate entries (mean of the two central values
/// for an even count).
pub fn aggregate_median(values: &[Estimate]) -> Result<f64> {
    let mut kept: Vec<f64> = values
        .iter()
        .filter(|e| !e.degenerate && e.value.is_finite())
        .map(|e| e.value)
        .collect();
    if kept.is_empty() {
        return Err(Error::Aggregation(format!(
            "all {} per-k values are degenerate",
            values.len()
        )));
    }
    kept.sort_by(f64::total_cmp);
    let m = kept.len();
    Ok(if m % 2 == 1 {
        kept[m / 2]
    } else {
        0.5 * (kept[m / 2 - 1] + kept[m / 2])
    })
}

/// Greatest convex minorant of the curve nodes after pinning both endpoints
/// to 1, computed as the lower convex hull (monotone chain) and read back
/// at the grid nodes.
pub fn convexify_pickands(curve: &PickandsCurve) -> PickandsCurve {
    let grid = curve.grid_size();
    let mut pts: Vec<(f64, f64)> = curve.nodes().collect();
    pts[0].1 = 1.0;
    pts[grid].1 = 1.0;

    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let mut seg = 0;
    let values = pts
        .iter()
        .enumerate()
        .map(|(i, &(t, v))| {
            if i == 0 || i == grid {
                return 1.0;
            }
            while seg + 1 < hull.len() - 1 && hull[seg + 1].0 <= t {
                seg += 1;
            }
            let (a, b) = (hull[seg], hull[seg + 1]);
            let w = (t - a.0) / (b.0 - a.0);
            // Hull vertices keep their original value exactly.
            if w == 0.0 {
                a.1
            } else {
                ((1.0 - w) * a.1 + w * b.1).min(v)
            }
        })
        .collect();
    PickandsCurve { values }
}

/// Evaluates the selected estimator on the Pickands grid of size `grid`.
pub fn pickands_curve<S: StdfSource + ?Sized>(
    src: &S,
    config: &EstimatorConfig,
    kind: EstimatorKind,
    grid: usize,
) -> Result<PickandsCurve> {
    StdfEstimator::new(src, config)?.pickands_curve(kind, grid)
}
