use metaparadox::{
    fixed_effect_pool, heterogeneity, random_effects_pool, EffectMeasure, Probability, StudyEffect,
};
use proptest::collection::vec;
use proptest::prelude::*;

fn level() -> Probability {
    Probability::new(0.95).unwrap()
}

fn studies() -> impl Strategy<Value = Vec<StudyEffect>> {
    vec((-10.0f64..10.0, 1e-3f64..10.0), 2..12).prop_map(|pairs| {
        pairs
            .into_iter()
            .map(|(y, v)| StudyEffect::new("", y, v, EffectMeasure::MeanDifference).unwrap())
            .collect()
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn fixed_effect_variance_below_every_study(s in studies()) {
        let r = fixed_effect_pool(&s, level()).unwrap();
        let min_v = s.iter().map(|x| x.v).fold(f64::INFINITY, f64::min);
        prop_assert!(r.se * r.se < min_v);
    }

    #[test]
    fn estimates_are_bounded_weighted_means(s in studies()) {
        let lo = s.iter().map(|x| x.y).fold(f64::INFINITY, f64::min);
        let hi = s.iter().map(|x| x.y).fold(f64::NEG_INFINITY, f64::max);
        for r in [fixed_effect_pool(&s, level()).unwrap(), random_effects_pool(&s, level()).unwrap()] {
            prop_assert!(r.estimate >= lo - 1e-12 && r.estimate <= hi + 1e-12);
            let total: f64 = r.weights.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(r.weights.iter().all(|w| *w > 0.0));
            prop_assert!(r.ci.lo < r.estimate && r.estimate < r.ci.hi);
        }
    }

    #[test]
    fn random_effects_interval_is_no_narrower(s in studies()) {
        let fe = fixed_effect_pool(&s, level()).unwrap();
        let re = random_effects_pool(&s, level()).unwrap();
        prop_assert!(re.ci.width() >= fe.ci.width() * (1.0 - 1e-12));
    }

    #[test]
    fn heterogeneity_invariants(s in studies()) {
        let h = heterogeneity(&s).unwrap();
        prop_assert!(h.q >= 0.0 && h.tau2 >= 0.0);
        prop_assert!((0.0..=100.0).contains(&h.i2));
        prop_assert_eq!(h.df as usize, s.len() - 1);
        prop_assert_eq!(h.p_q, metaparadox::chisq_sf(h.q, h.df).unwrap());
        let truncated = h.q <= f64::from(h.df);
        prop_assert_eq!(h.tau2 == 0.0, truncated);
        if truncated {
            prop_assert_eq!(h.i2, 0.0);
            let fe = fixed_effect_pool(&s, level()).unwrap();
            let re = random_effects_pool(&s, level()).unwrap();
            prop_assert_eq!(fe.estimate, re.estimate);
            prop_assert_eq!(fe.se, re.se);
            prop_assert_eq!(fe.ci, re.ci);
        }
    }

    #[test]
    fn shift_equivariance(s in studies(), c in -50.0f64..50.0) {
        let shifted: Vec<_> = s
            .iter()
            .map(|x| StudyEffect::new("", x.y + c, x.v, x.measure).unwrap())
            .collect();
        let h0 = heterogeneity(&s).unwrap();
        let h1 = heterogeneity(&shifted).unwrap();
        prop_assert!(close(h0.q, h1.q, 1e-8));
        prop_assert!(close(h0.i2, h1.i2, 1e-8));
        for (a, b) in [
            (fixed_effect_pool(&s, level()).unwrap(), fixed_effect_pool(&shifted, level()).unwrap()),
            (random_effects_pool(&s, level()).unwrap(), random_effects_pool(&shifted, level()).unwrap()),
        ] {
            prop_assert!(close(a.estimate + c, b.estimate, 1e-9));
            prop_assert!(close(a.ci.lo + c, b.ci.lo, 1e-9));
            prop_assert!(close(a.ci.hi + c, b.ci.hi, 1e-9));
            for (wa, wb) in a.weights.iter().zip(&b.weights) {
                prop_assert!(close(*wa, *wb, 1e-8));
            }
        }
    }

    #[test]
    fn scale_equivariance(s in studies(), k in 0.05f64..20.0) {
        let scaled: Vec<_> = s
            .iter()
            .map(|x| StudyEffect::new("", x.y * k, x.v * k * k, x.measure).unwrap())
            .collect();
        let h0 = heterogeneity(&s).unwrap();
        let h1 = heterogeneity(&scaled).unwrap();
        prop_assert!(close(h0.q, h1.q, 1e-9));
        prop_assert!(close(h0.i2, h1.i2, 1e-9));
        prop_assert!(close(h0.tau2 * k * k, h1.tau2, 1e-9));
        for (a, b) in [
            (fixed_effect_pool(&s, level()).unwrap(), fixed_effect_pool(&scaled, level()).unwrap()),
            (random_effects_pool(&s, level()).unwrap(), random_effects_pool(&scaled, level()).unwrap()),
        ] {
            prop_assert!(close(a.estimate * k, b.estimate, 1e-9));
            prop_assert!(close(a.se * k, b.se, 1e-9));
            prop_assert!(close(a.ci.lo * k, b.ci.lo, 1e-9));
            prop_assert!(close(a.ci.hi * k, b.ci.hi, 1e-9));
            for (wa, wb) in a.weights.iter().zip(&b.weights) {
                prop_assert!(close(*wa, *wb, 1e-9));
            }
        }
    }
}
