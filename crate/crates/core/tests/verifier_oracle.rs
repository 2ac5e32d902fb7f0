mod common;

use common::*;
use proptest::prelude::*;
use shoplab_core::poa::{gen_tightness_instance, poa_report, Ratio};
use shoplab_core::verifier::{equilibrium_at, find_equilibria_bruteforce, verify, EquilibriumCandidate};
use shoplab_core::{allocate, Mechanism, MultiplierVector, Rational, TieBreakDistribution, TieRule};

fn support_of(c: &EquilibriumCandidate<Rational>) -> Vec<(Vec<shoplab_core::ItemId>, Rational)> {
    c.pi.support().iter().map(|(a, p)| (a.ranking().to_vec(), p.clone())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn verdict_matches_independent_conditions(seed in any::<u64>(), coin: bool) {
        let mut r = rng(seed);
        let mech = if coin { Mechanism::Gsp } else { Mechanism::Vcg };
        let inst = random_instance(&mut r, TINY, mech);
        let alpha = random_alpha(&mut r, &inst);
        let bids = bids_of(&inst, &alpha);
        let a = allocate(&bids, TieRule::Random(seed));
        let pi = TieBreakDistribution::point_mass(a.clone());
        let report = verify(&inst, &alpha, &pi, int(0)).unwrap();
        prop_assert_eq!(report.is_pass(), is_equilibrium(&inst, &alpha, &[(a.ranking().to_vec(), int(1))]));
    }

    #[test]
    fn invalid_support_always_fails(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, TINY, Mechanism::Gsp);
        let alpha = random_alpha(&mut r, &inst);
        let bids = bids_of(&inst, &alpha);
        let mut ranking = allocate(&bids, TieRule::FirstListed).ranking().to_vec();
        ranking.reverse();
        if !ranking.windows(2).all(|w| bids.bid(w[0]) >= bids.bid(w[1])) {
            let a = shoplab_core::Allocation::new(ranking, &inst).unwrap();
            let report = verify(&inst, &alpha, &TieBreakDistribution::point_mass(a), int(0)).unwrap();
            prop_assert!(!report.bid_consistent);
            prop_assert!(!report.is_pass());
        }
    }

    #[test]
    fn exact_search_candidates_are_equilibria(seed in any::<u64>(), coin: bool) {
        let mut r = rng(seed);
        let mech = if coin { Mechanism::Gsp } else { Mechanism::Vcg };
        let inst = random_instance(&mut r, Shape { max_bidders: 2, max_items: 3, max_total: 5, max_slots: 3 }, mech);
        let alpha = random_alpha(&mut r, &inst);
        if let Some(c) = equilibrium_at(&inst, alpha.as_slice().to_vec(), 10_000).unwrap() {
            prop_assert!(c.report.is_pass());
            prop_assert!(is_equilibrium(&inst, &c.alpha, &support_of(&c)));
        }
    }
}

#[test]
fn grid_search_results_verify_and_respect_the_bound() {
    let mut found = 0;
    for seed in 0..40 {
        let mut r = rng(seed);
        let mech = if seed % 2 == 0 { Mechanism::Gsp } else { Mechanism::Vcg };
        let inst = random_instance(&mut r, Shape { max_bidders: 2, max_items: 2, max_total: 4, max_slots: 3 }, mech);
        let result = find_equilibria_bruteforce(&inst, 4, 10_000).unwrap();
        for c in result.candidates.iter().take(3) {
            found += 1;
            assert!(is_equilibrium(&inst, &c.alpha, &support_of(c)), "seed {seed}");
            let report = poa_report(&inst, c, int(0)).unwrap();
            assert!(report.within_factor_two, "seed {seed}");
            assert!(report.welfare_covers_revenue, "seed {seed}");
        }
    }
    assert!(found > 20);
}

#[test]
fn tolerance_only_loosens() {
    let (inst, alpha, a) = gen_tightness_instance::<Rational>(4, q("0.01")).unwrap();
    let cap = inst.cap().clone();
    let off = MultiplierVector::new(vec![cap - q("0.5"), int(1)], &inst).unwrap();
    let off_pi = TieBreakDistribution::point_mass(allocate(&bids_of(&inst, &off), TieRule::FirstListed));
    let strict = verify(&inst, &off, &off_pi, int(0)).unwrap();
    let loose = verify(&inst, &off, &off_pi, int(1000)).unwrap();
    assert!(!strict.is_pass());
    assert!(loose.is_pass());
    let pi = TieBreakDistribution::point_mass(a);
    assert!(verify(&inst, &alpha, &pi, int(0)).unwrap().is_pass());
}

#[test]
fn tightness_ratio_matches_closed_form() {
    for (k, eps) in [(3usize, "0.01"), (10, "0.001"), (25, "0.001")] {
        if k <= 4 {
            let (inst, _, _) = gen_tightness_instance::<Rational>(k, q(eps)).unwrap();
            assert_eq!(optimal_welfare(&inst), int(2 * k as i64 - 1));
        }
        let eps = q(eps);
        let (inst, alpha, a) = gen_tightness_instance::<Rational>(k, eps.clone()).unwrap();
        let pi = TieBreakDistribution::point_mass(a.clone());
        assert!(is_equilibrium(&inst, &alpha, &[(a.ranking().to_vec(), int(1))]));
        let report = verify(&inst, &alpha, &pi, int(0)).unwrap();
        let c = EquilibriumCandidate { alpha, pi, report };
        let poa = poa_report(&inst, &c, int(0)).unwrap();
        let kk = int(k as i64);
        let expected = (int(2) * kk.clone() - int(1)) / (kk.clone() + (kk - int(1)) * eps);
        assert_eq!(poa.ratio, Ratio::Finite(expected));
        assert_eq!(poa.wel_opt, int(2 * k as i64 - 1));
    }
}
