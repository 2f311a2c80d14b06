use std::sync::Arc;

use galelab::gale::{capital, mass_at, prefix_masses, validate_mass, MassTable};
use galelab::lang::{
    cmp_enumeration, identity_reduction, index_to_string, left_cut_selector, pair, restrict_oracle, string_to_index,
    theta_bits_oracle, unpair, LanguageSpec, OraclePolicy,
};
use galelab::pairs::{encode_pair, flatten, gamma_zero, union_language, PairEncoding};
use galelab::rational::{rat, Rational};
use galelab::selective::{build_tournament, certify_success, threshold_index, StrategyConfig};
use galelab::strategies::{bet_on, biased, constant_martingale, oracle_left_cut, predictor};
use galelab::transforms::{lift_to_pair_gale, mixture, to_beta_gale, GaleFamily};
use galelab::{martingale_to_sgale, sgale_to_martingale, Alphabet, AlphabetDistribution, DimensionExponent, GaleSpec};
use proptest::prelude::*;

fn binary_word(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, 0..=max)
}

fn proper_fraction() -> impl Strategy<Value = Rational> {
    (2i64..64).prop_flat_map(|d| (1..d).prop_map(move |n| rat(n, d)))
}

fn member(kind: u8, p: Rational) -> GaleSpec {
    match kind {
        0 => constant_martingale(),
        1 => bet_on(0).unwrap(),
        2 => bet_on(1).unwrap(),
        _ => biased(p).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_is_a_bijection(n in 0u64..(1 << 40)) {
        let x = index_to_string(n);
        prop_assert_eq!(string_to_index(&x).unwrap(), n);
        prop_assert_eq!(index_to_string(string_to_index(&x).unwrap()), x);
    }

    #[test]
    fn enumeration_order_matches_indices(a in 0u64..100_000, b in 0u64..100_000) {
        prop_assert_eq!(cmp_enumeration(&index_to_string(a), &index_to_string(b)), a.cmp(&b));
    }

    #[test]
    fn unpair_inverts_pair(a in binary_word(20), b in binary_word(20)) {
        let z = pair(&a, &b);
        prop_assert_eq!(unpair(&z).unwrap(), (a, b));
    }

    #[test]
    fn biased_masses_are_exact(p in proper_fraction()) {
        let g = biased(p).unwrap();
        prop_assert!(validate_mass(g.mass.as_ref(), 10).unwrap().ok);
    }

    #[test]
    fn mixture_is_exact_and_dominates(
        kinds in prop::collection::vec((0u8..4, proper_fraction()), 1..5),
        raw in prop::collection::vec(1i64..10, 5),
        w in binary_word(14),
    ) {
        let members: Vec<GaleSpec> = kinds.iter().map(|(k, p)| member(*k, p.clone())).collect();
        let total: i64 = raw[..members.len()].iter().sum();
        let weights: Vec<Rational> = raw[..members.len()].iter().map(|&r| rat(r, total)).collect();
        let family = GaleFamily::new(members.clone()).unwrap();
        let mix = mixture(&family, Some(weights.clone())).unwrap();
        prop_assert!(validate_mass(mix.mass.as_ref(), 8).unwrap().ok);
        let m = mass_at(mix.mass.as_ref(), &w).unwrap();
        let sum: Rational = members
            .iter()
            .zip(&weights)
            .map(|(g, c)| c * mass_at(g.mass.as_ref(), &w).unwrap())
            .sum();
        prop_assert_eq!(&m, &sum);
        for (g, c) in members.iter().zip(&weights) {
            prop_assert!(m >= c * mass_at(g.mass.as_ref(), &w).unwrap());
        }
    }

    #[test]
    fn beta_transform_is_exact(p in proper_fraction(), b0 in proper_fraction(), t in proper_fraction()) {
        let d = martingale_to_sgale(&biased(p).unwrap(), DimensionExponent::new(rat(1, 2)).unwrap()).unwrap();
        let beta = AlphabetDistribution::binary(b0.clone(), Rational::from_integer(1.into()) - b0).unwrap();
        let g = to_beta_gale(&d, &DimensionExponent::new(t).unwrap(), &beta).unwrap();
        prop_assert!(validate_mass(g.mass.as_ref(), 9).unwrap().ok);
    }

    #[test]
    fn sgale_round_trip_preserves_mass(p in proper_fraction(), s in proper_fraction(), w in binary_word(40)) {
        let m = biased(p).unwrap();
        let g = martingale_to_sgale(&m, DimensionExponent::new(s.clone()).unwrap()).unwrap();
        let back = sgale_to_martingale(&g).unwrap();
        prop_assert_eq!(prefix_masses(back.mass.as_ref(), &w).unwrap(), prefix_masses(m.mass.as_ref(), &w).unwrap());
        let lm = capital(&m, &w).unwrap();
        let lg = capital(&g, &w).unwrap();
        if !lm.is_zero() {
            let shift = (galelab::rational::to_f64(&s) - 1.0) * w.len() as f64;
            prop_assert!((lg.value() - lm.value() - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn flatten_is_idempotent(w in prop::collection::vec(0u8..3, 0..64)) {
        let f = flatten(&w);
        prop_assert_eq!(flatten(&f), f.clone());
        prop_assert!(f.iter().zip(&w).all(|(&x, &y)| (x == 0) == (y == 0)));
    }

    #[test]
    fn flattened_pair_is_the_union(pattern in prop::collection::vec(0u8..3, 1..12), n in 0usize..200) {
        let a: Vec<u8> = pattern.iter().map(|&v| u8::from(v == 1)).collect();
        let b: Vec<u8> = pattern.iter().map(|&v| u8::from(v == 2)).collect();
        let p = PairEncoding::new(
            "p",
            LanguageSpec::periodic("a", a).unwrap(),
            LanguageSpec::periodic("b", b).unwrap(),
        );
        let encoded = encode_pair(&p, n).unwrap();
        prop_assert_eq!(flatten(&encoded), union_language(&p).char_prefix(n).unwrap());
    }

    #[test]
    fn tournaments_are_deterministic_and_ordered(theta in proper_fraction(), q in 0u64..40) {
        let config = StrategyConfig::new(rat(1, 2), Some(6), left_cut_selector(&theta), identity_reduction()).unwrap();
        let t = build_tournament(q, &config).unwrap();
        prop_assert_eq!(&t, &build_tournament(q, &config).unwrap());
        let mut sorted = t.order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        for i in 0..6 {
            for j in 0..6 {
                if t.has_path(i, j) {
                    prop_assert!(t.precedes_eq(i, j));
                }
            }
        }
        let lang = LanguageSpec::left_cut("lc", theta).unwrap();
        let i = threshold_index(q, &config, &lang).unwrap();
        let members: Vec<bool> =
            (0..6).map(|j| lang.contains(&index_to_string(q * 6 + j as u64)).unwrap()).collect();
        prop_assert_eq!(t.prediction(i), members);
    }
}

fn assert_children_match_child(g: &GaleSpec, depth: usize) -> Result<(), TestCaseError> {
    let table = MassTable::materialize(g.mass.as_ref(), g.alphabet(), depth).unwrap();
    let arity = g.alphabet().arity() as u64;
    let mut stack = vec![Vec::new()];
    while let Some(w) = stack.pop() {
        prop_assert_eq!(table.get(&w), Some(&mass_at(g.mass.as_ref(), &w).unwrap()));
        if w.len() < depth {
            for a in 0..arity as u8 {
                let mut v = w.clone();
                v.push(a);
                stack.push(v);
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn whole_node_children_agree_with_single_children(p in proper_fraction(), theta in proper_fraction(), c in 2i64..=4) {
        let lang = LanguageSpec::left_cut("lc", theta.clone()).unwrap();
        let oracle = Arc::new(restrict_oracle(theta_bits_oracle(vec![theta]), OraclePolicy::new(4)));
        let members = vec![
            predictor(lang, rat(c, 4)).unwrap(),
            oracle_left_cut(oracle, 0),
            biased(p.clone()).unwrap(),
        ];
        for m in &members {
            assert_children_match_child(m, 8)?;
        }
        let mix = mixture(&GaleFamily::new(members).unwrap(), None).unwrap();
        assert_children_match_child(&mix, 8)?;
        let shifted = martingale_to_sgale(&mix, DimensionExponent::new(rat(1, 2)).unwrap()).unwrap();
        let beta = AlphabetDistribution::binary(rat(1, 4), rat(3, 4)).unwrap();
        let b = to_beta_gale(&shifted, &DimensionExponent::new(rat(3, 10)).unwrap(), &beta).unwrap();
        assert_children_match_child(&b, 8)?;
        let lifted = lift_to_pair_gale(&b, &gamma_zero(), &DimensionExponent::new(rat(4, 5)).unwrap()).unwrap();
        prop_assert_eq!(lifted.alphabet(), Alphabet::Ternary);
        assert_children_match_child(&lifted, 5)?;
    }

    #[test]
    fn selective_bound_holds_on_left_cuts(theta in proper_fraction()) {
        let lang = LanguageSpec::left_cut("lc", theta.clone()).unwrap();
        let config = StrategyConfig::new(rat(1, 2), Some(6), left_cut_selector(&theta), identity_reduction()).unwrap();
        let report = certify_success(config, &lang, 600).unwrap();
        prop_assert!(report.bound_satisfied);
        prop_assert!(report.clean());
    }
}

#[test]
fn mixture_members_share_one_distribution() {
    let shifted = martingale_to_sgale(&constant_martingale(), DimensionExponent::new(rat(1, 2)).unwrap()).unwrap();
    assert!(GaleFamily::new(vec![constant_martingale(), shifted]).is_err());
}
