//! Monte Carlo behaviour of the second-order estimators against their
//! population counterparts at the same `n / k`.

use stdf::estimators::{ranks, StdfSource};
use stdf::models::stream_seed;
use stdf::second_order::{m_ratio_curve, rho_hat};
use stdf::{sample, Result, TailModel};

const SEED: u64 = 7_310;

/// `(n / k) (1 - C(1 - floor(k x_1) / n, 1 - floor(k x_2) / n))` for the
/// copula `C` of a model with a closed-form joint c.d.f.
struct Population {
    model: TailModel,
    n: usize,
}

impl Population {
    fn copula(&self, u: f64, v: f64) -> f64 {
        let q = |p: f64| match self.model {
            TailModel::SymLogistic { .. } => -(-p.ln()).ln(),
            _ => p,
        };
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        self.model.joint_cdf([q(u), q(v)]).unwrap()
    }
}

impl StdfSource for Population {
    fn sample_size(&self) -> usize {
        self.n
    }

    fn dimension(&self) -> usize {
        2
    }

    fn base_stdf(&self, k: usize, x: &[f64]) -> Result<f64> {
        let n = self.n as f64;
        let u = 1.0 - (k as f64 * x[0]).floor() / n;
        let v = 1.0 - (k as f64 * x[1]).floor() / n;
        Ok(n / k as f64 * (1.0 - self.copula(u, v)))
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[test]
fn population_source_reproduces_model_at_small_k() {
    let model = TailModel::archimax_logistic(0.5).unwrap();
    let pop = Population { model, n: 100_000_000 };
    let l = pop.base_stdf(100, &[0.3, 0.7]).unwrap();
    assert!((l - model.stdf([0.3, 0.7])).abs() < 1e-5);
}

#[test]
fn m_ratio_tracks_population_ratio_at_large_k() {
    let grid: Vec<Vec<f64>> = [0.1, 0.3, 0.7, 0.9].iter().map(|t| vec![1.0 - t, *t]).collect();
    let (n, k) = (10_000, 9_990);
    for model in [TailModel::sym_logistic(0.5).unwrap(), TailModel::archimax_logistic(0.5).unwrap()] {
        let truth = m_ratio_curve(&Population { model, n }, k, 0.4, &grid).unwrap();
        let mut per_point = vec![Vec::new(); grid.len()];
        for i in 0..30 {
            let r = ranks(&sample(&model, n, stream_seed(SEED, i)).unwrap()).unwrap();
            for (acc, v) in per_point.iter_mut().zip(m_ratio_curve(&r, k, 0.4, &grid).unwrap()) {
                acc.push(v);
            }
        }
        for ((x, t), est) in grid.iter().zip(&truth).zip(&mut per_point) {
            let m = median(est);
            assert!((m - t).abs() < 0.03, "{model} at {x:?}: median {m}, population {t}");
        }
    }
}

#[test]
fn rho_hat_approaches_population_value() {
    let model = TailModel::sym_logistic(1.0 / 3.0).unwrap();
    let n = 100_000;
    let k_rho = 99_000;
    let half = [0.5, 0.5];
    let truth = rho_hat(&Population { model, n }, k_rho, 0.4, 0.4, &half, -10.0).unwrap().rho_hat;
    assert!((-1.3..-1.0).contains(&truth), "population rho {truth}");
    let mut est: Vec<f64> = (0..9)
        .map(|i| {
            let r = ranks(&sample(&model, n, stream_seed(SEED, i)).unwrap()).unwrap();
            rho_hat(&r, k_rho, 0.4, 0.4, &half, -10.0).unwrap().rho_hat
        })
        .collect();
    let m = median(&mut est);
    assert!((m - truth).abs() < 0.3, "median {m}, population {truth}");
}
