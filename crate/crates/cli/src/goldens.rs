//! Reference examples replayed in exact arithmetic.

use shoplab_core::fixtures::example_one;
use shoplab_core::mechanisms::{counterfactual_optimal_bid_welfare, gsp_payments, outcome, vcg_payments};
use shoplab_core::poa::{check_vcg_replacement_identity, gen_tightness_instance, optimal_welfare, poa_report, Ratio};
use shoplab_core::verifier::{find_equilibria_bruteforce, verify, EquilibriumCandidate};
use shoplab_core::{
    allocate, induce_bids, Mechanism, MultiplierVector, Rational, Result, Scalar, TieBreakDistribution, TieRule,
};

use crate::{Global, Status};

struct Check {
    name: &'static str,
    expected: String,
    actual: String,
}

fn q(s: &str) -> Rational {
    Rational::parse(s).expect("literal")
}

fn show(xs: &[Rational]) -> String {
    xs.iter().map(Scalar::render).collect::<Vec<_>>().join(", ")
}

fn check(name: &'static str, expected: impl Into<String>, actual: impl Into<String>) -> Check {
    Check { name, expected: expected.into(), actual: actual.into() }
}

pub fn golden_checks() -> Result<Vec<(String, bool, String)>> {
    let mut checks = Vec::new();

    let inst = example_one::<Rational>();
    let bids = induce_bids(&inst, &MultiplierVector::ones(&inst))?;
    checks.push(check("example 1 bids", "10, 8, 15, 6", show(&bids.bids().concat())));
    let a = allocate(&bids, TieRule::FirstListed);
    checks.push(check("example 1 allocation", "B1 A1 A2 B2", a.labels(&inst).join(" ")));
    checks.push(check(
        "example 1 top-2 set",
        "A1 B1",
        a.prefix_set(2)?.into_iter().map(|it| inst.item_label(it)).collect::<Vec<_>>().join(" "),
    ));
    let (w, _) = outcome(&inst, &bids, &a);
    checks.push(check("example 1 values", "11, 15", show(&w.per_bidder_value)));
    let gsp = gsp_payments(&inst, &bids, &a);
    let item_payments: Vec<Rational> =
        gsp.per_item_price.as_ref().expect("gsp prices").iter().map(|p| p.payment.clone()).collect();
    checks.push(check("example 1 GSP per-item payments", "10, 4.2, 3", show(&item_payments)));
    checks.push(check("example 1 GSP payments", "7.2, 10", show(&gsp.per_bidder_payment)));
    let vcg = vcg_payments(&inst.clone().with_mechanism(Mechanism::Vcg), &bids, &a);
    checks.push(check("example 1 VCG payments", "4.2, 4.6", show(&vcg.per_bidder_payment)));
    checks.push(check(
        "example 1 counterfactual welfare",
        "19.2, 15.6",
        show(&[counterfactual_optimal_bid_welfare(&inst, &bids, 0)?, counterfactual_optimal_bid_welfare(&inst, &bids, 1)?]),
    ));
    let sp = inst.clone().with_self_pricing(true);
    checks.push(check(
        "example 1 GSP with self-pricing, bidder A",
        "8.6",
        gsp_payments(&sp, &bids, &a).per_bidder_payment[0].render(),
    ));
    let ledger = check_vcg_replacement_identity(&inst.clone().with_mechanism(Mechanism::Vcg), &bids, &a)?;
    let layers_b: Vec<Rational> =
        ledger.layers.iter().map(|l| l.weight.clone() * l.delta[1].clone()).collect();
    checks.push(check("example 1 VCG layers, bidder B", "3, 1.6, 0", show(&layers_b)));
    checks.push(check("example 1 optimal welfare", "26", optimal_welfare(&inst).0.render()));
    let pi = TieBreakDistribution::point_mass(a.clone());
    let unit_cap = inst.clone().with_cap(q("2"))?;
    checks.push(check(
        "example 1 at unit multipliers, cap 2",
        "FAIL",
        if verify(&unit_cap, &MultiplierVector::ones(&unit_cap), &pi, q("0"))?.is_pass() { "PASS" } else { "FAIL" },
    ));

    let (t2, _, _) = gen_tightness_instance(2, q("0.001"))?;
    checks.push(check("tightness K=2 values", "2, 0.001; 1, 1", format!("{}; {}", show(&t2.values()[0]), show(&t2.values()[1]))));

    let (t3, alpha3, a3) = gen_tightness_instance(3, q("0.01"))?;
    let bids3 = induce_bids(&t3, &alpha3)?;
    checks.push(check("tightness K=3 bids", "300, 1, 1; 1, 1, 1", format!("{}; {}", show(&bids3.bids()[0]), show(&bids3.bids()[1]))));
    checks.push(check(
        "tightness favours bidder A",
        "A1 A2 A3",
        allocate(&bids3, TieRule::FavorBidder(0)).labels(&t3)[..3].join(" "),
    ));
    let pi3 = TieBreakDistribution::point_mass(a3);
    let report3 = verify(&t3, &alpha3, &pi3, q("0"))?;
    checks.push(check(
        "tightness K=3 slack",
        "PASS 0.02, 0",
        format!(
            "{} {}",
            if report3.is_pass() { "PASS" } else { "FAIL" },
            show(&report3.roi_feasible.iter().map(|r| r.slack.clone()).collect::<Vec<_>>())
        ),
    ));
    let cand3 = EquilibriumCandidate { alpha: alpha3, pi: pi3, report: report3 };
    let poa3 = poa_report(&t3, &cand3, q("0"))?;
    checks.push(check("tightness K=3 welfare", "5, 3.02", show(&[poa3.wel_opt, poa3.wel_eq])));
    let brute = find_equilibria_bruteforce(&t3, 4, 10_000)?;
    checks.push(check(
        "tightness K=3 grid search finds (1/eps, 1)",
        "true",
        brute.candidates.iter().any(|c| c.alpha.as_slice() == [q("100"), q("1")]).to_string(),
    ));

    let (t100, alpha100, a100) = gen_tightness_instance(100, q("0.001"))?;
    let pi100 = TieBreakDistribution::point_mass(a100);
    let report100 = verify(&t100, &alpha100, &pi100, q("0"))?;
    let pass100 = report100.is_pass();
    let cand100 = EquilibriumCandidate { alpha: alpha100, pi: pi100, report: report100 };
    let ratio = match poa_report(&t100, &cand100, q("0"))?.ratio {
        Ratio::Finite(r) => r.render(),
        Ratio::Infinite => "inf".into(),
    };
    let formula = q("199") / (q("100") + q("99") * q("0.001"));
    checks.push(check("tightness K=100 verifies", "true", pass100.to_string()));
    checks.push(check("tightness K=100 ratio", formula.render(), ratio));

    Ok(checks.into_iter().map(|c| (c.name.to_string(), c.expected == c.actual, format!("expected {} got {}", c.expected, c.actual))).collect())
}

pub fn cmd_goldens(_g: &Global) -> Result<Status> {
    let checks = golden_checks()?;
    let mut all = true;
    for (name, ok, detail) in &checks {
        println!("{} {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
        all &= ok;
    }
    Ok(if all { Status::Ok } else { Status::Fail })
}
