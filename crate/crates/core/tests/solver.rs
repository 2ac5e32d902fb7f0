mod common;

use common::*;
use shoplab_core::scalar::rational_from_f64;
use shoplab_core::solver::{solve, SolverConfig};
use shoplab_core::verifier::verify;
use shoplab_core::Mechanism;

fn quick() -> SolverConfig {
    SolverConfig { samples_per_eval: 512, stages: 8, restarts: 1, ..SolverConfig::default() }
}

const SMALL: Shape = Shape { max_bidders: 3, max_items: 2, max_total: 5, max_slots: 3 };

#[test]
fn converged_candidates_are_honest() {
    let mut converged = 0;
    for seed in 0..24 {
        let mut r = rng(seed);
        let mech = if seed % 2 == 0 { Mechanism::Gsp } else { Mechanism::Vcg };
        let inst = random_instance(&mut r, SMALL, mech);
        let out = solve(&inst, &SolverConfig { seed, ..quick() }).unwrap();
        let alpha = out.candidate.alpha.as_slice();
        assert!(alpha.iter().all(|a| *a >= int(1) && a <= inst.cap()), "seed {seed}");
        let total = out.candidate.pi.support().iter().fold(int(0), |acc, (_, p)| acc + p.clone());
        assert_eq!(total, int(1), "seed {seed}");
        if out.status.is_converged() {
            converged += 1;
            let bids = bids_of(&inst, &out.candidate.alpha);
            for (a, _) in out.candidate.pi.support() {
                assert!(a.ranking().windows(2).all(|w| bids.bid(w[0]) >= bids.bid(w[1])), "seed {seed}");
            }
            let tol = rational_from_f64(out.verify_tolerance).unwrap();
            assert!(verify(&inst, &out.candidate.alpha, &out.candidate.pi, tol).unwrap().is_pass(), "seed {seed}");
        }
    }
    assert!(converged >= 17, "only {converged} of 24 converged");
}

#[test]
fn lone_bidder_paces_at_the_cap() {
    for mech in [Mechanism::Gsp, Mechanism::Vcg] {
        let inst = shoplab_core::AuctionInstance::new(
            vec![("solo".into(), vec![int(4), int(2)])],
            vec![int(1), frac(1, 2)],
            int(3),
            mech,
        )
        .unwrap();
        let out = solve(&inst, &quick()).unwrap();
        assert!(out.status.is_converged());
        assert_eq!(out.candidate.alpha.as_slice(), &[int(3)]);
        assert!(is_equilibrium(
            &inst,
            &out.candidate.alpha,
            &out.candidate.pi.support().iter().map(|(a, p)| (a.ranking().to_vec(), p.clone())).collect::<Vec<_>>()
        ));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut r = rng(7);
    let inst = random_instance(&mut r, SMALL, Mechanism::Gsp);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| solve(&inst, &quick()).unwrap())
    };
    let (one, many) = (run(1), run(6));
    assert_eq!(one.candidate, many.candidate);
    assert_eq!(one.trace, many.trace);
    assert_eq!(one.std_err, many.std_err);
}
