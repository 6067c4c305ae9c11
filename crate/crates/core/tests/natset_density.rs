use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use distchaos::density::{estimate_profile, exact_profile, DensityConfig, DensityProfile};
use distchaos::natset::{parse_set, NatSetExpr};
use distchaos::sampling;

fn random_set(seed: u64) -> NatSetExpr {
    sampling::natset(&mut ChaCha8Rng::seed_from_u64(seed), 3)
}

fn one(a: Ratio<u64>, b: Ratio<u64>) -> bool {
    let (an, ad) = (*a.numer() as u128, *a.denom() as u128);
    let (bn, bd) = (*b.numer() as u128, *b.denom() as u128);
    an * bd + bn * ad == ad * bd
}

fn dual(a: &DensityProfile, c: &DensityProfile) -> bool {
    one(a.lower, c.upper) && one(a.lower_banach, c.upper_banach) && one(a.upper, c.lower) && one(a.upper_banach, c.lower_banach)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prefix_counts_partition(seed in any::<u64>(), n in 1u64..4000) {
        let a = random_set(seed);
        let c = NatSetExpr::complement(a.clone());
        prop_assert_eq!(a.count_prefix(n) + c.count_prefix(n), n);
    }

    #[test]
    fn member_matches_count_steps(seed in any::<u64>()) {
        let a = random_set(seed);
        for k in 1..=600 {
            prop_assert_eq!(a.member(k), a.count_prefix(k) - a.count_prefix(k - 1) == 1);
        }
    }

    #[test]
    fn window_counts_add(seed in any::<u64>(), n in 0u64..2000, s in 0u64..300, t in 0u64..300) {
        let a = random_set(seed);
        prop_assert_eq!(a.count_window(n, s + t), a.count_window(n, s) + a.count_window(n + s, t));
    }

    #[test]
    fn set_strings_round_trip(seed in any::<u64>()) {
        let a = random_set(seed);
        let back = parse_set(&a.to_string()).unwrap();
        prop_assert_eq!(&back, &a);
    }

    #[test]
    fn periodic_counts_are_exact(m in 1u64..60, mask in any::<u64>(), q in 1u64..200) {
        let r: Vec<u64> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let len = r.len() as u64;
        let a = NatSetExpr::periodic(m, r).unwrap();
        prop_assert_eq!(a.count_prefix(q * m), q * len);
    }

    #[test]
    fn estimator_duality_is_exact(seed in any::<u64>(), horizon in 200u64..20_000, w in 1u64..200) {
        let a = random_set(seed);
        let cfg = DensityConfig::new(horizon, w.min(horizon / 4).max(1), 0.5).unwrap();
        let pa = estimate_profile(&a, &cfg).unwrap();
        let pc = estimate_profile(&NatSetExpr::complement(a), &cfg).unwrap();
        prop_assert!(dual(&pa, &pc));
        prop_assert!(pa.chain_holds() && pc.chain_holds());
    }

    #[test]
    fn exact_profiles_are_ordered_and_dual(seed in any::<u64>()) {
        let a = random_set(seed);
        if let Ok(p) = exact_profile(&a) {
            prop_assert!(p.chain_holds());
            if let Ok(pc) = exact_profile(&NatSetExpr::complement(a)) {
                prop_assert!(dual(&p, &pc));
            }
            prop_assert!(dual(&p, &p.complement()));
        }
    }

    #[test]
    fn periodic_refinement_is_monotone(m in 1u64..40, mask in any::<u64>(), extra in any::<u64>()) {
        let mut r: Vec<u64> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        if r.is_empty() { r.push(0); }
        let mut s: Vec<u64> = (0..m).filter(|i| extra >> i & 1 == 1).collect();
        s.extend(&r);
        s.sort_unstable();
        s.dedup();
        let (a, b) = (NatSetExpr::periodic(m, r).unwrap(), NatSetExpr::periodic(m, s).unwrap());
        prop_assert_eq!(a.subset_of(&b), Some(true));
        let (pa, pb) = (exact_profile(&a).unwrap(), exact_profile(&b).unwrap());
        prop_assert!(pa.lower <= pb.lower && pa.upper <= pb.upper);
        prop_assert!(pa.lower_banach <= pb.lower_banach && pa.upper_banach <= pb.upper_banach);
    }
}

#[test]
fn finite_subsets_are_monotone() {
    let a = NatSetExpr::finite(vec![2, 5, 9]).unwrap();
    let b = NatSetExpr::finite(vec![1, 2, 5, 9, 40]).unwrap();
    assert_eq!(a.subset_of(&b), Some(true));
    let cfg = DensityConfig::new(1000, 10, 0.5).unwrap();
    let (pa, pb) = (estimate_profile(&a, &cfg).unwrap(), estimate_profile(&b, &cfg).unwrap());
    for (x, y) in pa.values().iter().zip(pb.values()) {
        assert!(*x <= y);
    }
}

#[test]
fn syndetic_matches_banach_on_closed_forms() {
    let cases = [
        ("periodic:3:{1}", true),
        ("periodic:7:{0,4}", true),
        ("blocks:pos=geom(2,2):len=const(3)", false),
        ("blocks:pos=geom(5,3):len=linear", false),
        ("finite:{1,2,3,100}", false),
    ];
    for (spec, want) in cases {
        let a = parse_set(spec).unwrap();
        let p = exact_profile(&a).unwrap();
        assert_eq!(a.is_syndetic(10_000).verdict, want, "{spec}");
        assert_eq!(p.lower_banach_f64() > 0.0, want, "{spec}");
    }
}
