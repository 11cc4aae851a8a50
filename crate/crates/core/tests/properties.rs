use bosample::design::{draw, minmax_design, SampleDraw, SamplingDesign, SamplingScheme};
use bosample::estimators::{difference_total, ht_total, PopulationFrame};
use bosample::gp::{GpPosterior, KernelConfig};
use bosample::metrics::{build_histogram, equal_width_edges, kl_divergence};
use bosample::stats::{mann_whitney_u, Alternative};
use bosample::{Dataset, FeatureMatrix};
use proptest::prelude::*;

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1e3, 2..60)
}

proptest! {
    #[test]
    fn pi_is_monotone_and_bounded(s in scores(), eps in 1e-4f64..0.2) {
        let pi = minmax_design(&s, eps, SamplingScheme::Poisson, None).unwrap().pi().to_vec();
        for (i, j) in (0..s.len()).flat_map(|i| (0..s.len()).map(move |j| (i, j))) {
            if s[i] < s[j] {
                prop_assert!(pi[i] <= pi[j]);
            }
        }
        prop_assert!(pi.iter().all(|p| *p >= eps - 1e-15 && *p <= 1.0 - eps + 1e-15));
    }

    #[test]
    fn difference_with_zero_predictions_is_ht(
        y in prop::collection::vec(-50.0f64..50.0, 3..40),
        seed in any::<u64>(),
    ) {
        let n = y.len();
        let pi: Vec<f64> = (0..n).map(|k| 0.1 + 0.8 * (k as f64 / n as f64)).collect();
        let design = SamplingDesign::from_pi(pi, SamplingScheme::Poisson, None).unwrap();
        let sample = draw(&design, seed).unwrap();
        let frame = PopulationFrame::from_values(y.clone(), vec![0.0; n]).unwrap();
        let ys: Vec<f64> = sample.indices.iter().map(|&k| y[k]).collect();
        let de = difference_total(&sample, &frame, false).unwrap().value;
        let ht = ht_total(&sample, &ys).unwrap().value;
        prop_assert!((de - ht).abs() <= 1e-9 * (1.0 + ht.abs()));
    }

    #[test]
    fn difference_with_perfect_predictions_is_exact(
        y in prop::collection::vec(-50.0f64..50.0, 3..40),
        seed in any::<u64>(),
    ) {
        let n = y.len();
        let design = SamplingDesign::from_pi(vec![0.3; n], SamplingScheme::Poisson, None).unwrap();
        let sample = draw(&design, seed).unwrap();
        let frame = PopulationFrame::from_values(y.clone(), y.clone()).unwrap();
        let total: f64 = y.iter().sum();
        let de = difference_total(&sample, &frame, false).unwrap().value;
        prop_assert!((de - total).abs() <= 1e-9 * (1.0 + total.abs()));
    }

    #[test]
    fn gp_variance_never_below_noise(
        xs in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..15),
        q in prop::collection::vec(-5.0f64..5.0, 2),
        noise in 1e-3f64..1.0,
    ) {
        let y: Vec<f64> = xs.iter().map(|r| r[0].sin() + r[1]).collect();
        let data = Dataset::new(FeatureMatrix::from_rows(&xs).unwrap(), y).unwrap();
        let gp = GpPosterior::fit(&data, &KernelConfig::new(1.0, noise, 1e-10).unwrap()).unwrap();
        let p = gp.predict(&q).unwrap();
        prop_assert!(p.variance() >= noise - 1e-8);
        prop_assert!(p.variance() <= noise + 1.0 + 1e-8);
    }

    #[test]
    fn mwu_p_value_in_unit_interval(
        a in prop::collection::vec(-10i32..10, 1..20),
        b in prop::collection::vec(-10i32..10, 1..20),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let less = mann_whitney_u(&a, &b, Alternative::Less).unwrap();
        let greater = mann_whitney_u(&b, &a, Alternative::Greater).unwrap();
        prop_assert!(less.p_value > 0.0 && less.p_value <= 1.0);
        prop_assert!((less.p_value - greater.p_value).abs() <= 1e-12);
    }

    #[test]
    fn kl_is_nonnegative(
        p in prop::collection::vec(-5.0f64..5.0, 5..80),
        q in prop::collection::vec(-5.0f64..5.0, 5..80),
    ) {
        let edges = equal_width_edges(-5.0, 5.0, 20).unwrap();
        let hp = build_histogram(&p, &edges, 0.0).unwrap();
        let hq = build_histogram(&q, &edges, 0.5).unwrap();
        prop_assert!(kl_divergence(&hp, &hq).unwrap() >= 0.0);
    }

    #[test]
    fn draws_are_reproducible(seed in any::<u64>()) {
        let design = SamplingDesign::from_pi(vec![0.2, 0.5, 0.7, 0.9, 0.1], SamplingScheme::Poisson, None).unwrap();
        prop_assert_eq!(draw(&design, seed).unwrap().indices, draw(&design, seed).unwrap().indices);
    }
}

#[test]
fn sample_draw_rejects_out_of_range() {
    assert!(SampleDraw::new(vec![5], vec![0.5; 3]).is_err());
}
