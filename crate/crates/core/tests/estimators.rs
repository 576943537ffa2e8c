use proptest::prelude::*;
use stdf::estimators::{
    clamp_pickands, convexify_pickands, corrected_stdf_ring, corrected_stdf_unit, delta, empirical_stdf, ranks,
    scaled_stdf, EstimatorConfig, EstimatorKind, PickandsCurve, RankMatrix, StdfEstimator,
};
use stdf::second_order::{rho_from_ratio, rho_hat, variance_factor_ring};
use stdf::{sample, Sample, TailModel};

fn data(values: &[(f64, f64)]) -> Sample {
    Sample::from_rows(values.iter().flat_map(|&(x, y)| [x, y]).collect(), 2).unwrap()
}

fn rank_matrix(values: &[(f64, f64)]) -> RankMatrix {
    ranks(&data(values)).unwrap()
}

/// Distinct values, so no ties occur.
fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::btree_set(0u32..1_000_000, 20..80).prop_flat_map(|xs| {
        let xs: Vec<u32> = xs.into_iter().collect();
        let n = xs.len();
        (Just(xs), Just(n)).prop_flat_map(|(xs, n)| {
            Just(xs).prop_perturb(move |xs, mut rng| {
                let mut ys: Vec<u32> = (0..n as u32).collect();
                for i in (1..n).rev() {
                    ys.swap(i, rng.random_range(0..=i));
                }
                xs.iter().zip(ys).map(|(&x, y)| (x as f64 / 1e4 - 20.0, y as f64 * 0.37)).collect()
            })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn empirical_is_rank_invariant(pts in points(), x1 in 0.0f64..2.0, x2 in 0.0f64..2.0) {
        let s = data(&pts);
        let k = s.n() / 3;
        let t = s.map_column(0, |v| (v / 7.0).exp()).unwrap().map_column(1, |v| v.powi(3) - 5.0).unwrap();
        let a = empirical_stdf(&ranks(&s).unwrap(), k, &[x1, x2]).unwrap();
        let b = empirical_stdf(&ranks(&t).unwrap(), k, &[x1, x2]).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn empirical_is_monotone_and_bounded(pts in points(), x1 in 0.0f64..1.5, x2 in 0.0f64..1.5, h in 0.0f64..0.5) {
        let r = rank_matrix(&pts);
        let k = r.n() / 2;
        let base = empirical_stdf(&r, k, &[x1, x2]).unwrap();
        prop_assert!(empirical_stdf(&r, k, &[x1 + h, x2]).unwrap() >= base);
        prop_assert!(empirical_stdf(&r, k, &[x1, x2 + h]).unwrap() >= base);
        let count = (base * k as f64).round() as usize;
        let m = |v: f64| (k as f64 * v).floor() as usize;
        prop_assert!(count >= m(x1).max(m(x2)) && count <= m(x1) + m(x2));
    }

    #[test]
    fn empirical_on_axes(pts in points(), x in 0.0f64..1.9, k_frac in 0.05f64..0.5) {
        let r = rank_matrix(&pts);
        let k = ((r.n() as f64 * k_frac) as usize).max(1);
        let exact = (k as f64 * x).floor() / k as f64;
        prop_assert_eq!(empirical_stdf(&r, k, &[x, 0.0]).unwrap(), exact);
        prop_assert_eq!(empirical_stdf(&r, k, &[0.0, x]).unwrap(), exact);
    }

    #[test]
    fn definition_identities(pts in points(), x1 in 0.01f64..1.5, x2 in 0.01f64..1.5, a in 0.05f64..1.0, rho in -3.0f64..-0.5) {
        let r = rank_matrix(&pts);
        // Keeps the ring dilation 2^(-1/rho) x inside the domain.
        let k = r.n() / 10;
        let x = [x1, x2];
        let scaled = scaled_stdf(&r, k, a, &x).unwrap();
        prop_assert_eq!(scaled, empirical_stdf(&r, k, &[a * x1, a * x2]).unwrap() / a);
        prop_assert_eq!(delta(&r, k, 1.0, &x).unwrap(), 0.0);
        let ring = corrected_stdf_ring(&r, k, 1.0, rho, &x).unwrap();
        prop_assert_eq!(ring.to_bits(), corrected_stdf_unit(&r, k, rho, &x).unwrap().to_bits());
    }

    #[test]
    fn rho_hat_is_rank_invariant_and_capped(pts in points(), floor in -12.0f64..-0.5) {
        let s = data(&pts);
        let t = s.map_column(1, f64::atan).unwrap();
        let k = s.n() - 1;
        let a = rho_hat(&ranks(&s).unwrap(), k, 0.4, 0.4, &[0.5, 0.5], floor).unwrap();
        let b = rho_hat(&ranks(&t).unwrap(), k, 0.4, 0.4, &[0.5, 0.5], floor).unwrap();
        prop_assert_eq!(a.rho_hat.to_bits(), b.rho_hat.to_bits());
        prop_assert!(a.rho_hat <= 0.0 && a.rho_hat >= floor);
        if !a.degenerate {
            let r = ranks(&s).unwrap();
            let ratio = delta(&r, k, 0.4, &[0.2, 0.2]).unwrap() / delta(&r, k, 0.4, &[0.5, 0.5]).unwrap();
            let raw = rho_from_ratio(ratio, 0.4);
            prop_assert_eq!(a.capped, !(raw <= 0.0 && raw >= floor));
            if !a.capped {
                prop_assert_eq!(a.rho_hat, raw);
            }
        }
    }

    #[test]
    fn ring_variance_factor_at_unit_scale(rho in -5.0f64..-0.01) {
        let expected = (2.0 - 2f64.powf(1.0 / (2.0 * rho))).powi(2);
        prop_assert!((variance_factor_ring(1.0, rho).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn clamp_is_idempotent(t in 0.0f64..=1.0, v in -1.0f64..3.0) {
        let c = clamp_pickands(t, v);
        prop_assert!(c >= t.max(1.0 - t) && c <= 1.0);
        prop_assert_eq!(clamp_pickands(t, c), c);
    }

    #[test]
    fn convexified_curve_is_a_convex_minorant(raw in prop::collection::vec(0.0f64..1.2, 5..40)) {
        let t_max = raw.len() - 1;
        let vals: Vec<f64> = raw.iter().enumerate()
            .map(|(t, &v)| clamp_pickands(t as f64 / t_max as f64, v))
            .collect();
        let curve = PickandsCurve::new(vals.clone()).unwrap();
        let hull = convexify_pickands(&curve);
        for (t, (&h, &v)) in hull.values().iter().zip(&vals).enumerate() {
            let tt = t as f64 / t_max as f64;
            prop_assert!(h <= v + 1e-12 && h >= tt.max(1.0 - tt) - 1e-12);
        }
        for w in hull.values().windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12);
        }
    }
}

#[test]
fn hand_counted_example() {
    let r = rank_matrix(&[(0.1, 0.9), (0.5, 0.2), (0.8, 0.4)]);
    assert_eq!(empirical_stdf(&r, 1, &[1.0, 1.0]).unwrap(), 2.0);
    assert_eq!(empirical_stdf(&r, 1, &[1.0, 0.0]).unwrap(), 1.0);
    assert_eq!(empirical_stdf(&r, 1, &[0.0, 0.0]).unwrap(), 0.0);
    assert_eq!(scaled_stdf(&r, 1, 0.5, &[2.0, 2.0]).unwrap(), 4.0);
    assert_eq!(delta(&r, 1, 0.5, &[1.0, 1.0]).unwrap(), -2.0);
}

#[test]
fn empirical_is_consistent_for_logistic() {
    let model = TailModel::sym_logistic(0.5).unwrap();
    let r = ranks(&sample(&model, 100_000, 4).unwrap()).unwrap();
    let err: f64 = (0..10)
        .map(|i| {
            let t = (i as f64 + 0.5) / 10.0;
            (empirical_stdf(&r, 1000, &[1.0 - t, t]).unwrap() - model.stdf([1.0 - t, t])).abs()
        })
        .sum::<f64>()
        / 10.0;
    assert!(err < 0.02, "mean error {err}");
}

#[test]
fn student_pipeline_stays_in_bounds() {
    let s = sample(&TailModel::student(2.0, 0.0).unwrap(), 1000, 8).unwrap();
    let r = ranks(&s).unwrap();
    let config = EstimatorConfig::for_sample_size(1000);
    let est = StdfEstimator::new(&r, &config).unwrap();
    for kind in [EstimatorKind::RingAgg, EstimatorKind::TildeAgg, EstimatorKind::RingAggConvex] {
        let curve = est.pickands_curve(kind, 30).unwrap();
        assert_eq!(curve.values().len(), 31);
        assert_eq!(curve.values()[0], 1.0);
        assert_eq!(curve.values()[30], 1.0);
        assert!(curve.values().iter().all(|v| (0.5..=1.0).contains(v)), "{kind}");
    }
    let tilde = est.evaluate(EstimatorKind::TildeAgg, &[0.5, 0.5]).unwrap();
    assert!(tilde.is_finite() && (0.5..=1.0).contains(&tilde));
}

#[test]
fn rejects_points_outside_the_domain() {
    let r = rank_matrix(&[(0.1, 0.9), (0.5, 0.2), (0.8, 0.4)]);
    assert!(empirical_stdf(&r, 1, &[4.0, 0.0]).is_err());
    assert!(empirical_stdf(&r, 0, &[1.0, 1.0]).is_err());
    assert!(empirical_stdf(&r, 1, &[-1.0, 1.0]).is_err());
    assert!(empirical_stdf(&r, 1, &[1.0]).is_err());
}
