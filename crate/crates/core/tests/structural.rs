mod common;

use common::*;
use proptest::prelude::*;
use shoplab_core::poa::{
    check_disjoint_ownership, check_revenue_lower_bound, check_smoothness, check_vcg_replacement_identity,
    construct_a_opt, ownership_holds, BoundStatus,
};
use shoplab_core::{allocate, enumerate_valid_allocations, Mechanism, Rational, TieRule};

/// `Wel(a)` written as the layered sum over prefixes.
fn layered_welfare(inst: &shoplab_core::AuctionInstance<Rational>, ranking: &[shoplab_core::ItemId]) -> Rational {
    let mut total = int(0);
    for layer in 1..=inst.num_slots() {
        let next = inst.ctrs().get(layer).cloned().unwrap_or_else(|| int(0));
        let weight = inst.ctrs()[layer - 1].clone() - next;
        let prefix = ranking[..layer.min(ranking.len())].iter().fold(int(0), |acc, it| acc + inst.value(*it).clone());
        total += weight * prefix;
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn layered_welfare_equals_direct(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, TINY, Mechanism::Gsp);
        for perm in permutations(&all_items(&inst)).into_iter().take(50) {
            prop_assert_eq!(layered_welfare(&inst, &perm), welfare(&inst, &perm));
        }
    }

    #[test]
    fn smoothness_on_every_valid_allocation(seed in any::<u64>(), coin: bool) {
        let mut r = rng(seed);
        let mech = if coin { Mechanism::Gsp } else { Mechanism::Vcg };
        let inst = random_instance(&mut r, Shape { max_total: 6, ..TINY }, mech);
        let alpha = random_alpha(&mut r, &inst);
        let bids = bids_of(&inst, &alpha);
        let opt = optimal_welfare(&inst);
        for a in enumerate_valid_allocations(&bids, usize::MAX).unwrap() {
            let lhs = welfare(&inst, a.ranking()) + revenue(&inst, &bids, a.ranking());
            prop_assert!(lhs >= opt, "Wel + Rev = {} < {}", lhs, opt);
            prop_assert!(check_smoothness(&inst, &bids, &a));
        }
    }

    #[test]
    fn welfare_covers_revenue_when_roi_holds(seed in any::<u64>(), coin: bool) {
        let mut r = rng(seed);
        let mech = if coin { Mechanism::Gsp } else { Mechanism::Vcg };
        let inst = random_instance(&mut r, TINY, mech);
        let alpha = random_alpha(&mut r, &inst);
        let bids = bids_of(&inst, &alpha);
        let a = allocate(&bids, TieRule::Random(seed));
        let v = values(&inst, a.ranking());
        let p = payments(&inst, &bids, a.ranking());
        if v.iter().zip(&p).all(|(v, p)| v >= p) {
            prop_assert!(welfare(&inst, a.ranking()) >= revenue(&inst, &bids, a.ranking()));
        }
    }

    #[test]
    fn ownership_is_disjoint_at_every_prefix(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, TINY, Mechanism::Gsp);
        let alpha = random_alpha(&mut r, &inst);
        let bids = bids_of(&inst, &alpha);
        for rule in [TieRule::FirstListed, TieRule::Random(seed)] {
            let a = allocate(&bids, rule);
            let a_opt = construct_a_opt(&inst, &a);
            prop_assert_eq!(welfare(&inst, a_opt.ranking()), optimal_welfare(&inst));
            for k in 1..=a.len() {
                prop_assert_eq!(check_disjoint_ownership(&inst, &a, &a_opt, k).unwrap(), None);
            }
            prop_assert!(ownership_holds(&inst, &a).unwrap());
        }
    }

    #[test]
    fn incremental_ownership_matches_per_prefix_check(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, Shape { max_total: 6, ..TINY }, Mechanism::Gsp);
        let perms = permutations(&all_items(&inst));
        let a = shoplab_core::Allocation::new(perms[pick.index(perms.len())].clone(), &inst).unwrap();
        let a_opt = construct_a_opt(&inst, &a);
        let per_prefix = (1..=a.len()).all(|k| check_disjoint_ownership(&inst, &a, &a_opt, k).unwrap().is_none());
        prop_assert_eq!(ownership_holds(&inst, &a).unwrap(), per_prefix);
    }

    #[test]
    fn revenue_lower_bound_holds(seed in any::<u64>(), coin: bool) {
        let mut r = rng(seed);
        let mech = if coin { Mechanism::Gsp } else { Mechanism::Vcg };
        let inst = random_instance(&mut r, TINY, mech);
        let alpha = random_alpha(&mut r, &inst);
        let bids = bids_of(&inst, &alpha);
        let a = allocate(&bids, TieRule::Random(seed));
        let check = check_revenue_lower_bound(&inst, &bids, &a).unwrap();
        prop_assert_eq!(check.status, BoundStatus::Holds);
        prop_assert!(check.revenue >= check.bound);
        if coin {
            prop_assert_eq!(check.per_layer_prices_ok, Some(true));
            let prices = gsp_prices(&inst, &bids, a.ranking());
            for layer in &check.layers {
                let cumulative = prices[..layer.k].iter().fold(int(0), |acc, p| acc + p.clone());
                prop_assert!(cumulative >= layer.displaced_value);
            }
        }
    }

    #[test]
    fn vcg_decomposition_is_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, TINY, Mechanism::Vcg);
        let alpha = random_alpha(&mut r, &inst);
        let bids = bids_of(&inst, &alpha);
        let a = allocate(&bids, TieRule::Random(seed));
        let ledger = check_vcg_replacement_identity(&inst, &bids, &a).unwrap();
        prop_assert!(ledger.decomposition_exact);
        prop_assert!(ledger.claim_holds);
        prop_assert_eq!(&ledger.decomposed_payment, &vcg(&inst, &bids, a.ranking()));
    }
}

#[test]
fn single_bidder_layers_are_trivial() {
    let inst = shoplab_core::AuctionInstance::new(
        vec![("solo".into(), vec![int(5), int(3), int(1)])],
        vec![int(1), frac(1, 2)],
        int(2),
        Mechanism::Vcg,
    )
    .unwrap();
    let bids = bids_of(&inst, &shoplab_core::MultiplierVector::ones(&inst));
    let a = allocate(&bids, TieRule::FirstListed);
    let ledger = check_vcg_replacement_identity(&inst, &bids, &a).unwrap();
    assert!(ledger.layers.iter().all(|l| l.replacements[0].is_empty()));
    assert_eq!(ledger.vcg_payment, vec![int(0)]);
    let bound = check_revenue_lower_bound(&inst, &bids, &a).unwrap();
    assert_eq!(bound.bound, int(0));
}
