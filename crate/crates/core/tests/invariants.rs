use bblab_core::quantities::SUPPORT_TOL;
use bblab_core::restriction::moment;
use bblab_core::search::ExtremalRecord;
use bblab_core::{
    entropy_via_moments, forward_transform, influences, influences_spectral, inverse_transform,
    noise_stability, spectral_entropy, support_size, Bias, BooleanFunction, Chain, SubsetMask,
};
use proptest::prelude::*;

fn function(max_n: usize) -> impl Strategy<Value = BooleanFunction> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(any::<bool>(), 1 << n)
            .prop_map(move |bits| BooleanFunction::from_fn(n, |x| bits[x as usize]).unwrap())
    })
}

fn bias() -> impl Strategy<Value = Bias> {
    (0.01f64..0.99).prop_map(|p| Bias::new(p).unwrap())
}

fn chain(n: usize) -> impl Strategy<Value = Chain> {
    Just((1..=n).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|order| Chain::new(order).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_and_roundtrip(f in function(8), b in bias()) {
        let spec = forward_transform(&f, b);
        prop_assert!((spec.mass() - 1.0).abs() < 1e-10);
        for (x, y) in inverse_transform(&spec).iter().zip(f.values()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn lower_bound_holds(f in function(7), b in bias()) {
        let ent = spectral_entropy(&forward_transform(&f, b)).unwrap().value();
        let rhs = b.theorem_constant() * influences(&f, b).sum_squares();
        prop_assert!(ent - rhs >= -1e-9);
    }

    #[test]
    fn entropy_within_support_bounds(f in function(7), b in bias()) {
        let spec = forward_transform(&f, b);
        let ent = spectral_entropy(&spec).unwrap().value();
        prop_assert!(ent >= 0.0);
        prop_assert!(ent <= (support_size(&spec, SUPPORT_TOL) as f64).ln() + 1e-9);
    }

    #[test]
    fn noise_stability_endpoints(f in function(7), b in bias()) {
        let spec = forward_transform(&f, b);
        prop_assert!((noise_stability(&spec, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let top = spec.coeff(SubsetMask(0)).powi(2);
        prop_assert!((noise_stability(&spec, 1.0).unwrap() - top).abs() < 1e-12);
    }

    #[test]
    fn influence_routes_agree(f in function(7), b in bias()) {
        let spec = forward_transform(&f, b);
        let a = influences(&f, b);
        let s = influences_spectral(&spec);
        for (x, y) in a.as_slice().iter().zip(s.as_slice()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn moments_at_zero_are_one(f in function(6), b in bias(), alive in 0u32..64) {
        let alive = SubsetMask(alive & ((1 << f.n()) - 1));
        prop_assert!((moment(&f, b, alive, 0.0).unwrap().value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn entropy_via_any_chain(
        (f, c) in function(6).prop_flat_map(|f| { let n = f.n(); (Just(f), chain(n)) }),
        b in bias(),
    ) {
        let want = spectral_entropy(&forward_transform(&f, b)).unwrap().value();
        prop_assert!((entropy_via_moments(&f, b, &c).unwrap().value() - want).abs() < 1e-9);
    }

    #[test]
    fn negation_preserves_score(f in function(6), b in bias()) {
        let a = ExtremalRecord::score(&f, b);
        let c = ExtremalRecord::score(&f.negate(), b);
        match (a, c) {
            (None, None) => prop_assert!(f.is_constant()),
            (Some(a), Some(c)) => {
                prop_assert!((a.ratio - c.ratio).abs() < 1e-12);
                prop_assert!((a.entropy - c.entropy).abs() < 1e-12);
            }
            _ => prop_assert!(false, "negation changed constancy"),
        }
    }
}
