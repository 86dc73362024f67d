mod support;

use crisis_cascade::randomize::{
    empirical_p, ensemble, gdn_with_rng, gsn_with_rng, sample_rng, EnsembleConfig, GsnConfig, NullModel, Tail,
};
use crisis_cascade::{CascadeParams, MacroNet};
use proptest::prelude::*;
use support::{gen, invariants};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gsn_keeps_degrees_and_weights(seed in any::<u64>(), tol in prop::sample::select(vec![0.01f64, 0.2, 10.0])) {
        let net: MacroNet<f64> = gen::network(&mut gen::rng(seed), 12, 0.3);
        prop_assume!(net.link_count() >= 2);
        let cfg = GsnConfig { weight_tolerance: tol, ..GsnConfig::default() };
        let out = gsn_with_rng(&net, &cfg, &mut sample_rng(seed, 0)).unwrap();
        prop_assert_eq!(invariants::gsn(&net, &out.net), Ok(()));
        prop_assert!(out.attempts <= 200 * net.link_count());
    }

    #[test]
    fn gdn_keeps_unit_totals(seed in any::<u64>()) {
        let net: MacroNet<f64> = gen::network(&mut gen::rng(seed), 12, 0.3);
        let out = gdn_with_rng(&net, &mut sample_rng(seed, 1)).unwrap();
        prop_assert_eq!(invariants::gdn(&net, &out.net), Ok(()));
    }

    #[test]
    fn empirical_p_is_a_fraction(obs in -5.0f64..15.0, xs in prop::collection::vec(0.0f64..10.0, 1..50)) {
        for tail in [Tail::Upper, Tail::Lower] {
            let p = empirical_p(obs, &xs, tail).unwrap();
            prop_assert!(p.p > 0.0 && p.p <= 1.0);
            prop_assert_eq!(p.below_resolution, p.exceedances == 0);
        }
    }
}

#[test]
fn ensembles_are_reproducible() {
    let net: MacroNet<f64> = gen::network(&mut gen::rng(5), 12, 0.4);
    let p = CascadeParams::new(0.7, 0.1).unwrap();
    for model in [NullModel::Gsn, NullModel::Gdn] {
        let a = ensemble(&net, &EnsembleConfig::new(model, 8, 42), &p).unwrap();
        let b = ensemble(&net, &EnsembleConfig::new(model, 8, 42), &p).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.completed, 8);
    }
}
