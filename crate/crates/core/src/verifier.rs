//! Equilibrium conditions for a candidate `(alpha, pi)`:
//!
//! * (a) every supported allocation is valid under the induced bids,
//! * (b) `V_i(pi) >= P_i(pi)` for every bidder,
//! * (c) a bidder with strictly positive slack bids at the cap.
//!
//! With a float tolerance `tol`, (b) becomes `V_i - P_i >= -tol` and (c)
//! triggers only when the slack exceeds `tol`; the cap is then matched within
//! `tol / max(1, max value)`. Rational mode uses `tol = 0`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lp::Feasibility;
use crate::mechanisms::outcome;
use crate::model::{
    enumerate_valid_allocations, induce_bids, is_valid, Allocation, AuctionInstance, MultiplierVector,
    TieBreakDistribution,
};
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Pass,
    Fail(Vec<String>),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoiCheck<T> {
    pub value: T,
    pub payment: T,
    /// `V_i(pi) - P_i(pi)`.
    pub slack: T,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport<T> {
    pub bid_consistent: bool,
    /// Labels of supported allocations that violate the bid order.
    pub offending_allocations: Vec<Vec<String>>,
    pub roi_feasible: Vec<RoiCheck<T>>,
    pub maximal_pacing: Vec<bool>,
    pub tolerance: T,
    pub verdict: Verdict,
}

impl<T: Scalar> VerificationReport<T> {
    pub fn is_pass(&self) -> bool {
        self.verdict.is_pass()
    }

    /// How far the candidate is from satisfying the conditions exactly:
    /// infinite for a bid-inconsistent support, otherwise the largest ROI
    /// deficit or unjustified slack.
    pub fn violation(&self, instance: &AuctionInstance<T>, alpha: &MultiplierVector<T>) -> f64 {
        if !self.bid_consistent {
            return f64::INFINITY;
        }
        let cap = instance.cap().to_f64();
        self.roi_feasible
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let slack = r.slack.to_f64();
                let deficit = (-slack).max(0.0);
                let unpaced = if alpha[i].to_f64() < cap { slack.max(0.0) } else { 0.0 };
                deficit.max(unpaced)
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self, instance: &AuctionInstance<T>) -> Value {
        let bidders: Vec<Value> = self
            .roi_feasible
            .iter()
            .zip(&self.maximal_pacing)
            .enumerate()
            .map(|(i, (r, pacing))| {
                json!({
                    "bidder": instance.bidder_ids()[i],
                    "value": r.value.render(),
                    "payment": r.payment.render(),
                    "slack": r.slack.render(),
                    "roi_feasible": r.pass,
                    "maximal_pacing": pacing,
                })
            })
            .collect();
        let (verdict, reasons) = match &self.verdict {
            Verdict::Pass => ("PASS", Vec::new()),
            Verdict::Fail(r) => ("FAIL", r.clone()),
        };
        json!({
            "verdict": verdict,
            "reasons": reasons,
            "tolerance": self.tolerance.render(),
            "bid_consistent": self.bid_consistent,
            "offending_allocations": self.offending_allocations,
            "bidders": bidders,
        })
    }
}

/// A multiplier vector with a tie-breaking distribution and its report.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumCandidate<T> {
    pub alpha: MultiplierVector<T>,
    pub pi: TieBreakDistribution<T>,
    pub report: VerificationReport<T>,
}

/// Tolerance on `|alpha_i - A|` that accompanies a value-unit tolerance.
pub fn alpha_tolerance<T: Scalar>(instance: &AuctionInstance<T>, tolerance: &T) -> T {
    let scale = T::max_of(T::one(), instance.max_value());
    tolerance.clone() / scale
}

pub fn verify<T: Scalar>(
    instance: &AuctionInstance<T>,
    alpha: &MultiplierVector<T>,
    pi: &TieBreakDistribution<T>,
    tolerance: T,
) -> Result<VerificationReport<T>> {
    if tolerance < T::zero() {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    if alpha.len() != instance.num_bidders() {
        return Err(Error::invalid("multiplier vector does not match the instance"));
    }
    for (a, _) in pi.support() {
        Allocation::new(a.ranking().to_vec(), instance)
            .map_err(|e| Error::invalid(format!("malformed tie-breaking distribution: {e}")))?;
    }
    let total = pi.support().iter().fold(T::zero(), |acc, (_, p)| acc + p.clone());
    if (total - T::one()).abs_value() > T::prob_tolerance() {
        return Err(Error::invalid("tie-breaking probabilities do not sum to 1"));
    }

    let bids = induce_bids(instance, alpha)?;
    let n = instance.num_bidders();
    let mut offending = Vec::new();
    let mut values = vec![T::zero(); n];
    let mut payments = vec![T::zero(); n];
    for (a, p) in pi.support() {
        if !is_valid(a, &bids) {
            offending.push(a.labels(instance));
        }
        let (w, pay) = outcome(instance, &bids, a);
        for i in 0..n {
            values[i] = values[i].clone() + p.clone() * w.per_bidder_value[i].clone();
            payments[i] = payments[i].clone() + p.clone() * pay.per_bidder_payment[i].clone();
        }
    }

    let alpha_tol = alpha_tolerance(instance, &tolerance);
    let mut reasons = Vec::new();
    if !offending.is_empty() {
        reasons.push(format!("{} supported allocation(s) violate the bid order", offending.len()));
    }
    let mut roi = Vec::with_capacity(n);
    let mut pacing = Vec::with_capacity(n);
    for i in 0..n {
        let slack = values[i].clone() - payments[i].clone();
        let roi_ok = slack >= -tolerance.clone();
        let at_cap = (instance.cap().clone() - alpha[i].clone()).abs_value() <= alpha_tol;
        let pacing_ok = slack <= tolerance || at_cap;
        let id = &instance.bidder_ids()[i];
        if !roi_ok {
            reasons.push(format!("bidder {id}: ROI violated, slack {}", slack.render()));
        }
        if !pacing_ok {
            reasons.push(format!(
                "bidder {id}: slack {} but multiplier {} below cap {}",
                slack.render(),
                alpha[i].render(),
                instance.cap().render()
            ));
        }
        roi.push(RoiCheck { value: values[i].clone(), payment: payments[i].clone(), slack, pass: roi_ok });
        pacing.push(pacing_ok);
    }
    let verdict = if reasons.is_empty() { Verdict::Pass } else { Verdict::Fail(reasons) };
    Ok(VerificationReport {
        bid_consistent: offending.is_empty(),
        offending_allocations: offending,
        roi_feasible: roi,
        maximal_pacing: pacing,
        tolerance,
        verdict,
    })
}

/// Result of the exhaustive equilibrium search.
#[derive(Clone, Debug)]
pub struct BruteForceResult {
    pub candidates: Vec<EquilibriumCandidate<Rational>>,
    pub grid_points: usize,
}

impl BruteForceResult {
    /// No equilibrium on the grid. This never refutes existence; the grid
    /// may simply miss it.
    pub fn inconclusive(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Per-bidder multiplier candidates: a uniform grid with both endpoints,
/// plus the ratios at which one bidder's item ties with another bidder's
/// item, plus (two bidders) the multiplier of the other bidder that makes a
/// bidder's ROI constraint tight without changing the ranking.
pub fn multiplier_grid(instance: &AuctionInstance<Rational>, resolution: usize) -> Vec<Vec<Rational>> {
    let one = Rational::from_integer(1.into());
    let cap = instance.cap().clone();
    let n = instance.num_bidders();
    let in_range = |x: &Rational| *x >= one && *x <= cap;

    let mut base: BTreeSet<Rational> = [one.clone(), cap.clone()].into_iter().collect();
    let steps = resolution.max(1);
    for t in 1..steps {
        let frac = Rational::new((t as i64).into(), (steps as i64).into());
        base.insert(one.clone() + (cap.clone() - one.clone()) * frac);
    }

    let mut grid: Vec<BTreeSet<Rational>> = vec![base.clone(); n];
    for i in 0..n {
        for other in (0..n).filter(|&o| o != i) {
            for a_other in &base {
                for v in instance.values()[i].iter().filter(|v| v.is_positive_value()) {
                    for w in &instance.values()[other] {
                        let ratio = a_other.clone() * w.clone() / v.clone();
                        if in_range(&ratio) {
                            grid[i].insert(ratio);
                        }
                    }
                }
            }
        }
    }

    if n == 2 {
        // P_i is homogeneous of degree one in the rival's multiplier while
        // the ranking stays fixed, so V_i = P_i pins the rival's multiplier.
        let snapshot = grid.clone();
        for a0 in &snapshot[0] {
            for a1 in &snapshot[1] {
                let alpha = MultiplierVector::new(vec![a0.clone(), a1.clone()], instance).expect("grid in range");
                let bids = induce_bids(instance, &alpha).expect("dimensions match");
                let a = crate::mechanisms::allocate(&bids, crate::mechanisms::TieRule::FirstListed);
                let (w, p) = outcome(instance, &bids, &a);
                for (i, rival, a_rival) in [(0, 1, a1), (1, 0, a0)] {
                    let pay = &p.per_bidder_payment[i];
                    if pay.is_positive_value() {
                        let target = a_rival.clone() * w.per_bidder_value[i].clone() / pay.clone();
                        if in_range(&target) {
                            grid[rival].insert(target);
                        }
                    }
                }
            }
        }
    }
    grid.into_iter().map(|s| s.into_iter().collect()).collect()
}

trait PositiveValue {
    fn is_positive_value(&self) -> bool;
}

impl PositiveValue for Rational {
    fn is_positive_value(&self) -> bool {
        num_traits::Signed::is_positive(self)
    }
}

/// Scans the multiplier grid; at each point, searches tie-breaking weights
/// over the valid allocations that satisfy (b) and (c) exactly.
pub fn find_equilibria_bruteforce(
    instance: &AuctionInstance<Rational>,
    alpha_grid_resolution: usize,
    limit: usize,
) -> Result<BruteForceResult> {
    let grid = multiplier_grid(instance, alpha_grid_resolution);
    let mut profiles: Vec<Vec<Rational>> = vec![Vec::new()];
    for options in &grid {
        profiles = profiles
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |x| {
                    let mut p = prefix.clone();
                    p.push(x.clone());
                    p
                })
            })
            .collect();
    }
    let grid_points = profiles.len();
    let found: Vec<Option<EquilibriumCandidate<Rational>>> = profiles
        .into_par_iter()
        .map(|alpha| equilibrium_at(instance, alpha, limit))
        .collect::<Result<_>>()?;
    Ok(BruteForceResult { candidates: found.into_iter().flatten().collect(), grid_points })
}

/// Exact search for a tie-breaking distribution at fixed multipliers.
pub fn equilibrium_at(
    instance: &AuctionInstance<Rational>,
    alpha: Vec<Rational>,
    limit: usize,
) -> Result<Option<EquilibriumCandidate<Rational>>> {
    let alpha = MultiplierVector::new(alpha, instance)?;
    let bids = induce_bids(instance, &alpha)?;
    let allocations = enumerate_valid_allocations(&bids, limit)?;
    let n = instance.num_bidders();

    // allocations with identical (V, P) vectors are interchangeable
    let mut classes: BTreeMap<Vec<Rational>, Allocation> = BTreeMap::new();
    for a in allocations {
        let (w, p) = outcome(instance, &bids, &a);
        let net: Vec<Rational> = (0..n)
            .map(|i| w.per_bidder_value[i].clone() - p.per_bidder_payment[i].clone())
            .collect();
        classes.entry(net).or_insert(a);
    }
    let nets: Vec<&Vec<Rational>> = classes.keys().collect();
    let zero = Rational::from_integer(0.into());
    let one = Rational::from_integer(1.into());

    let mut lp = Feasibility::new(nets.len());
    lp.equal(vec![one.clone(); nets.len()], one.clone());
    for i in 0..n {
        let row: Vec<Rational> = nets.iter().map(|net| net[i].clone()).collect();
        if alpha[i] < *instance.cap() {
            lp.equal(row, zero.clone());
        } else {
            lp.at_least(row, zero.clone());
        }
    }
    let Some(weights) = lp.solve() else {
        return Ok(None);
    };
    let support: Vec<(Allocation, Rational)> = classes
        .into_values()
        .zip(weights)
        .filter(|(_, w)| *w > zero)
        .collect();
    let pi = TieBreakDistribution::new(support)?;
    let report = verify(instance, &alpha, &pi, zero)?;
    if !report.is_pass() {
        return Err(Error::Contract(format!("feasible tie-break weights failed verification: {:?}", report.verdict)));
    }
    Ok(Some(EquilibriumCandidate { alpha, pi, report }))
}
