use fwi_core::{
    expected_value, is_alpha_fair, simple_mix_distribution, tv_distance, Distribution, SolutionId, TabularValue,
};
use proptest::prelude::*;

fn dist(max_len: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec((0usize..12, 0.01f64..1.0), 1..max_len)
        .prop_map(|w| Distribution::from_weights(w.into_iter().map(|(i, p)| (SolutionId(i), p))).unwrap())
}

proptest! {
    #[test]
    fn tv_is_a_metric(p in dist(8), q in dist(8), r in dist(8)) {
        let (pq, qr, pr) = (tv_distance(&p, &q), tv_distance(&q, &r), tv_distance(&p, &r));
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert!((pq - tv_distance(&q, &p)).abs() < 1e-12);
        prop_assert!(tv_distance(&p, &p) == 0.0);
        prop_assert!(pr <= pq + qr + 1e-12);
    }

    #[test]
    fn expectation_is_linear_in_mixtures(p in dist(8), q in dist(8), t in 0.0f64..=1.0,
                                         values in prop::collection::vec(0.0f64..10.0, 12)) {
        let v = TabularValue::new(values).unwrap();
        let m = Distribution::mixture(t, &p, &q).unwrap();
        let direct = expected_value(&m, &v);
        let split = t * expected_value(&p, &v) + (1.0 - t) * expected_value(&q, &v);
        prop_assert!((direct - split).abs() < 1e-9);
        // Mixing with weight t moves at most t mass.
        prop_assert!(tv_distance(&m, &q) <= t + 1e-12);
    }

    #[test]
    fn simple_mix_law_is_alpha_fair(p in dist(10), a in 0usize..12, alpha in 0.0f64..=1.0) {
        let a = SolutionId(a);
        let ps = simple_mix_distribution(&p, &a, alpha).unwrap();
        let tv = tv_distance(&ps, &p);
        prop_assert!((tv - alpha * (1.0 - p.prob(&a))).abs() < 1e-12);
        prop_assert!(is_alpha_fair(&ps, &p, alpha).unwrap());
        prop_assert!((ps.total_mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn invalid_distributions_are_rejected() {
    assert!(Distribution::new([(SolutionId(0), 0.5), (SolutionId(1), 0.6)]).is_err());
    assert!(Distribution::new([(SolutionId(0), -0.1), (SolutionId(1), 1.1)]).is_err());
    assert!(Distribution::new([(SolutionId(0), f64::NAN)]).is_err());
    assert!(Distribution::<SolutionId>::from_weights([]).is_err());
    let p = Distribution::point_mass(SolutionId(0));
    assert!(is_alpha_fair(&p, &p, 1.5).is_err());
}
