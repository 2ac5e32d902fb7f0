//! Price-of-anarchy quantities and the structural facts behind the factor-2
//! bound.
//!
//! Welfare is handled in its layered form
//! `Wel(a) = sum_k (c_k - c_{k+1}) * sum_{S_k(a)} v` with `c_{K+1} = 0`, where
//! `S_k(a)` is the top-`k` prefix. For an allocation `a` and the optimal
//! allocation `a_opt` built from it, `M_k = S_k(a) \ S_k(a_opt)` are the
//! items the mechanism promotes and `O_k = S_k(a_opt) \ S_k(a)` the optimal
//! items it displaces.
//!
//! Checks compare exactly in rational mode and within a relative `1e-12` in
//! float mode.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::{expected_outcome, gsp_payments, outcome, sum, vcg_payments};
use crate::model::{induce_bids, is_valid, Allocation, AuctionInstance, BidProfile, ItemId, Mechanism, MultiplierVector};
use crate::scalar::Scalar;
use crate::verifier::EquilibriumCandidate;

fn at_least<T: Scalar>(lhs: &T, rhs: &T) -> bool {
    let scale = T::max_of(T::one(), T::max_of(lhs.abs_value(), rhs.abs_value()));
    lhs.clone() >= rhs.clone() - T::prob_tolerance() * scale
}

fn value_sum<T: Scalar>(instance: &AuctionInstance<T>, items: &BTreeSet<ItemId>) -> T {
    sum(items.iter().map(|it| instance.value(*it).clone()))
}

fn bid_sum<T: Scalar>(bids: &BidProfile<T>, items: &BTreeSet<ItemId>) -> T {
    sum(items.iter().map(|it| bids.bid(*it).clone()))
}

/// Welfare of an allocation under true values.
pub fn welfare<T: Scalar>(instance: &AuctionInstance<T>, allocation: &Allocation) -> T {
    sum(allocation
        .ranking()
        .iter()
        .take(instance.num_slots())
        .enumerate()
        .map(|(r, it)| instance.ctr(r) * instance.value(*it).clone()))
}

/// `Wel^opt` and an allocation attaining it: all items sorted by true value.
pub fn optimal_welfare<T: Scalar>(instance: &AuctionInstance<T>) -> (T, Allocation) {
    let reference = Allocation::from_ranking_unchecked(instance.items().to_vec());
    let a = construct_a_opt(instance, &reference);
    (welfare(instance, &a), a)
}

/// Ranks items by true value, breaking value ties by their order in
/// `reference`.
pub fn construct_a_opt<T: Scalar>(instance: &AuctionInstance<T>, reference: &Allocation) -> Allocation {
    let mut ranking = reference.ranking().to_vec();
    ranking.sort_by(|x, y| {
        instance
            .value(*y)
            .partial_cmp(instance.value(*x))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Allocation::from_ranking_unchecked(ranking)
}

/// A bidder owning both a promoted and a displaced item in some layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OwnershipWitness {
    pub k: usize,
    pub bidder: usize,
    /// In `M_k`.
    pub promoted: ItemId,
    /// In `O_k`.
    pub displaced: ItemId,
}

/// Whether the owners of `M_k` and `O_k` are disjoint; on failure, a
/// witness. `k` is one-based.
pub fn check_disjoint_ownership<T: Scalar>(
    instance: &AuctionInstance<T>,
    a: &Allocation,
    a_opt: &Allocation,
    k: usize,
) -> Result<Option<OwnershipWitness>> {
    check_shapes(instance, a)?;
    check_shapes(instance, a_opt)?;
    let k_eff = k.min(a.len());
    let s = a.prefix_set(k_eff)?;
    let s_opt = a_opt.prefix_set(k_eff)?;
    let mut displaced_by_owner: BTreeMap<usize, ItemId> = BTreeMap::new();
    for d in s_opt.difference(&s) {
        displaced_by_owner.entry(d.bidder).or_insert(*d);
    }
    for promoted in s.difference(&s_opt) {
        if let Some(displaced) = displaced_by_owner.get(&promoted.bidder) {
            return Ok(Some(OwnershipWitness { k, bidder: promoted.bidder, promoted: *promoted, displaced: *displaced }));
        }
    }
    Ok(None)
}

fn check_shapes<T: Scalar>(instance: &AuctionInstance<T>, a: &Allocation) -> Result<()> {
    if a.len() != instance.total_items() {
        return Err(Error::invalid(format!(
            "allocation has {} items, instance has {}",
            a.len(),
            instance.total_items()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum BoundStatus {
    Holds,
    Violated,
    /// Some bid is below its value, so the bound does not apply.
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RevenueLayer<T> {
    /// One-based prefix length.
    pub k: usize,
    /// `c_k - c_{k+1}`.
    pub weight: T,
    pub displaced: Vec<ItemId>,
    /// `sum_{O_k} v`.
    pub displaced_value: T,
    /// GSP: `sum_{t <= k} tau_{a(t)}`.
    pub cumulative_price: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RevenueBoundCheck<T> {
    pub status: BoundStatus,
    pub revenue: T,
    /// `sum_k (c_k - c_{k+1}) * sum_{O_k} v`.
    pub bound: T,
    pub layers: Vec<RevenueLayer<T>>,
    /// GSP: the per-layer cumulative price bound holds at every `k`.
    pub per_layer_prices_ok: Option<bool>,
}

/// `Rev(a, b) >= sum_k (c_k - c_{k+1}) * sum_{O_k} v` for `a_opt` built from
/// `a`; under GSP also `sum_{t <= k} tau_{a(t)} >= sum_{O_k} v` for each `k`.
pub fn check_revenue_lower_bound<T: Scalar>(
    instance: &AuctionInstance<T>,
    bids: &BidProfile<T>,
    a: &Allocation,
) -> Result<RevenueBoundCheck<T>> {
    check_shapes(instance, a)?;
    if !is_valid(a, bids) {
        return Err(Error::invalid("allocation is not valid under the bids"));
    }
    let a_opt = construct_a_opt(instance, a);
    let (_, pay) = outcome(instance, bids, a);
    let gsp_prices = match instance.mechanism() {
        Mechanism::Gsp => gsp_payments(instance, bids, a).per_item_price,
        Mechanism::Vcg => None,
    };

    let mut layers = Vec::new();
    let mut bound = T::zero();
    let mut per_layer_ok = gsp_prices.as_ref().map(|_| true);
    let mut cumulative = T::zero();
    for k in 1..=instance.filled_slots() {
        let s = a.prefix_set(k)?;
        let displaced: BTreeSet<ItemId> = a_opt.prefix_set(k)?.difference(&s).copied().collect();
        let displaced_value = value_sum(instance, &displaced);
        let weight = instance.layer_weight(k - 1);
        bound = bound + weight.clone() * displaced_value.clone();
        let cumulative_price = gsp_prices.as_ref().map(|prices| {
            cumulative = cumulative.clone() + prices[k - 1].price.clone();
            cumulative.clone()
        });
        if let (Some(ok), Some(c)) = (per_layer_ok.as_mut(), cumulative_price.as_ref()) {
            *ok &= at_least(c, &displaced_value);
        }
        layers.push(RevenueLayer {
            k,
            weight,
            displaced: displaced.into_iter().collect(),
            displaced_value,
            cumulative_price,
        });
    }

    let underbid = instance.items().iter().find(|it| bids.bid(**it) < instance.value(**it));
    let status = match underbid {
        Some(it) => BoundStatus::Skipped(format!(
            "bid {} of {} is below its value {}",
            bids.bid(*it).render(),
            instance.item_label(*it),
            instance.value(*it).render()
        )),
        None if at_least(&pay.revenue, &bound) => BoundStatus::Holds,
        None => BoundStatus::Violated,
    };
    if matches!(status, BoundStatus::Skipped(_)) {
        per_layer_ok = None;
    }
    Ok(RevenueBoundCheck { status, revenue: pay.revenue, bound, layers, per_layer_prices_ok: per_layer_ok })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplacementLayer<T> {
    pub k: usize,
    pub weight: T,
    /// `R_k(i)` per bidder.
    pub replacements: Vec<Vec<ItemId>>,
    /// `Delta_k(i) = sum_{R_k(i)} b` per bidder.
    pub delta: Vec<T>,
    /// `sum_{O_k} b`.
    pub displaced_bid: T,
    /// `sum_i Delta_k(i) >= sum_{O_k} b`.
    pub claim_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplacementLedger<T> {
    pub layers: Vec<ReplacementLayer<T>>,
    /// `sum_k (c_k - c_{k+1}) * Delta_k(i)` per bidder.
    pub decomposed_payment: Vec<T>,
    pub vcg_payment: Vec<T>,
    pub decomposition_exact: bool,
    pub claim_holds: bool,
}

/// Rebuilds every VCG payment from replacement items
/// `R_k(i) = S_k(a_{-i}) \ S_k(a)`, where `a_{-i}` is `a` with bidder `i`'s
/// items removed, and checks the replacement-bid claim against `O_k`.
pub fn check_vcg_replacement_identity<T: Scalar>(
    instance: &AuctionInstance<T>,
    bids: &BidProfile<T>,
    a: &Allocation,
) -> Result<ReplacementLedger<T>> {
    check_shapes(instance, a)?;
    if !is_valid(a, bids) {
        return Err(Error::invalid("allocation is not valid under the bids"));
    }
    let n = instance.num_bidders();
    let a_opt = construct_a_opt(instance, a);
    let without: Vec<Vec<ItemId>> = (0..n)
        .map(|i| a.ranking().iter().copied().filter(|it| it.bidder != i).collect())
        .collect();

    let mut layers = Vec::new();
    let mut decomposed = vec![T::zero(); n];
    for k in 1..=instance.filled_slots() {
        let s = a.prefix_set(k)?;
        let weight = instance.layer_weight(k - 1);
        let mut replacements = Vec::with_capacity(n);
        let mut delta = Vec::with_capacity(n);
        for (i, rest) in without.iter().enumerate() {
            let r: BTreeSet<ItemId> = rest.iter().take(k).filter(|it| !s.contains(it)).copied().collect();
            let d = bid_sum(bids, &r);
            decomposed[i] = decomposed[i].clone() + weight.clone() * d.clone();
            replacements.push(r.into_iter().collect());
            delta.push(d);
        }
        let displaced: BTreeSet<ItemId> = a_opt.prefix_set(k)?.difference(&s).copied().collect();
        let displaced_bid = bid_sum(bids, &displaced);
        let claim_holds = at_least(&sum(delta.iter().cloned()), &displaced_bid);
        layers.push(ReplacementLayer { k, weight, replacements, delta, displaced_bid, claim_holds });
    }
    let vcg_payment = vcg_payments(instance, bids, a).per_bidder_payment;
    let decomposition_exact = if T::is_exact() {
        decomposed == vcg_payment
    } else {
        decomposed.iter().zip(&vcg_payment).all(|(x, y)| at_least(x, y) && at_least(y, x))
    };
    let claim_holds = layers.iter().all(|l| l.claim_holds);
    Ok(ReplacementLedger { layers, decomposed_payment: decomposed, vcg_payment, decomposition_exact, claim_holds })
}

/// `Wel(a) + Rev(a, b) >= Wel^opt`.
pub fn check_smoothness<T: Scalar>(instance: &AuctionInstance<T>, bids: &BidProfile<T>, a: &Allocation) -> bool {
    let (w, p) = outcome(instance, bids, a);
    let (opt, _) = optimal_welfare(instance);
    at_least(&(w.welfare + p.revenue), &opt)
}

/// Disjoint ownership at every prefix length of `a`.
pub fn ownership_holds<T: Scalar>(instance: &AuctionInstance<T>, a: &Allocation) -> Result<bool> {
    check_shapes(instance, a)?;
    let a_opt = construct_a_opt(instance, a);
    let n = instance.num_bidders();
    // M_k and O_k maintained incrementally, with per-bidder counts
    let mut promoted: BTreeSet<ItemId> = BTreeSet::new();
    let mut displaced: BTreeSet<ItemId> = BTreeSet::new();
    let mut in_m = vec![0usize; n];
    let mut in_o = vec![0usize; n];
    for (x, y) in a.ranking().iter().zip(a_opt.ranking()) {
        if displaced.remove(x) {
            in_o[x.bidder] -= 1;
        } else {
            promoted.insert(*x);
            in_m[x.bidder] += 1;
        }
        if promoted.remove(y) {
            in_m[y.bidder] -= 1;
        } else {
            displaced.insert(*y);
            in_o[y.bidder] += 1;
        }
        if (0..n).any(|b| in_m[b] > 0 && in_o[b] > 0) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ratio<T> {
    Finite(T),
    /// Equilibrium welfare is zero while the optimum is positive.
    Infinite,
}

impl<T: Scalar> Ratio<T> {
    pub fn render(&self) -> String {
        match self {
            Ratio::Finite(r) => r.render(),
            Ratio::Infinite => "inf".into(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Ratio::Finite(r) => r.to_f64(),
            Ratio::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoaReport<T> {
    pub wel_opt: T,
    pub wel_eq: T,
    pub rev_eq: T,
    /// `wel_opt / wel_eq`; one when both are zero.
    pub ratio: Ratio<T>,
    /// Per supported allocation, in support order.
    pub smoothness_ok: Vec<bool>,
    /// Disjoint ownership at every `k` for every supported allocation.
    pub ownership_ok: bool,
    /// `Wel(pi) >= Rev(pi) - tol`.
    pub welfare_covers_revenue: bool,
    /// `2 Wel(pi) >= Wel^opt - tol`.
    pub within_factor_two: bool,
}

/// PoA quantities of a verified equilibrium.
pub fn poa_report<T: Scalar>(
    instance: &AuctionInstance<T>,
    candidate: &EquilibriumCandidate<T>,
    tolerance: T,
) -> Result<PoaReport<T>> {
    if !candidate.report.is_pass() {
        return Err(Error::Unverified("PoA report requires a candidate that verified PASS".into()));
    }
    let bids = induce_bids(instance, &candidate.alpha)?;
    let (w, p) = expected_outcome(instance, &bids, &candidate.pi)?;
    let (wel_opt, _) = optimal_welfare(instance);
    let wel_eq = w.welfare;
    let rev_eq = p.revenue;
    let ratio = if wel_eq > T::zero() {
        Ratio::Finite(wel_opt.clone() / wel_eq.clone())
    } else if wel_opt > T::zero() {
        Ratio::Infinite
    } else {
        Ratio::Finite(T::one())
    };
    let mut smoothness_ok = Vec::with_capacity(candidate.pi.len());
    let mut ownership_ok = true;
    for (a, _) in candidate.pi.support() {
        smoothness_ok.push(check_smoothness(instance, &bids, a));
        ownership_ok &= ownership_holds(instance, a)?;
    }
    let two = T::one() + T::one();
    let welfare_covers_revenue = wel_eq >= rev_eq.clone() - tolerance.clone();
    let within_factor_two = two * wel_eq.clone() >= wel_opt.clone() - tolerance;
    Ok(PoaReport { wel_opt, wel_eq, rev_eq, ratio, smoothness_ok, ownership_ok, welfare_covers_revenue, within_factor_two })
}

/// The two-bidder instance on which the factor 2 is approached: `K` unit-CTR
/// slots, bidder `A` values `(K, e, ..., e)`, bidder `B` values
/// `(1, ..., 1)`, multipliers `(1/e, 1)`, cap `1/e`, and the ranking that
/// breaks every tie in favour of `A`.
pub fn gen_tightness_instance<T: Scalar>(
    k: usize,
    eps_prime: T,
) -> Result<(AuctionInstance<T>, MultiplierVector<T>, Allocation)> {
    if k < 2 {
        return Err(Error::invalid("tightness instance needs at least two slots"));
    }
    if !(eps_prime > T::zero() && eps_prime < T::one()) {
        return Err(Error::invalid("eps_prime must lie strictly between 0 and 1"));
    }
    let mut first = vec![eps_prime.clone(); k];
    first[0] = T::from_usize(k);
    let second = vec![T::one(); k];
    let cap = T::one() / eps_prime;
    let instance = AuctionInstance::new(
        vec![("A".into(), first), ("B".into(), second)],
        vec![T::one(); k],
        cap.clone(),
        Mechanism::Gsp,
    )?;
    let alpha = MultiplierVector::new(vec![cap, T::one()], &instance)?;
    let ranking = (0..2).flat_map(|b| (0..k).map(move |j| ItemId::new(b, j))).collect();
    let allocation = Allocation::new(ranking, &instance)?;
    Ok((instance, alpha, allocation))
}
