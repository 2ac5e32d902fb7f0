//! Brute-force oracles and random instances shared by integration tests.
//!
//! Everything here is written from the definitions, without calling the
//! library's allocation or payment code.

#![allow(dead_code)]

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shoplab_core::{AuctionInstance, BidProfile, ItemId, Mechanism, MultiplierVector, Rational, Scalar};

pub fn q(s: &str) -> Rational {
    Rational::parse(s).unwrap()
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Size limits for [`random_instance`].
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_bidders: usize,
    pub max_items: usize,
    pub max_total: usize,
    pub max_slots: usize,
}

pub const TINY: Shape = Shape { max_bidders: 4, max_items: 4, max_total: 8, max_slots: 4 };

/// Values on a coarse half-integer grid so that ties are common.
pub fn random_instance(rng: &mut ChaCha8Rng, shape: Shape, mechanism: Mechanism) -> AuctionInstance<Rational> {
    let n = rng.gen_range(1..=shape.max_bidders);
    let mut budget = shape.max_total;
    let mut bidders = Vec::new();
    for i in 0..n {
        let left = n - i - 1;
        let most = shape.max_items.min(budget - left).max(1);
        let m = rng.gen_range(1..=most);
        budget -= m;
        let mut vals: Vec<Rational> = (0..m).map(|_| frac(rng.gen_range(0..=12), 2)).collect();
        vals.sort_by(|a, b| b.cmp(a));
        bidders.push((format!("b{i}"), vals));
    }
    let k = rng.gen_range(1..=shape.max_slots);
    let mut ctrs: Vec<Rational> = (0..k).map(|_| frac(rng.gen_range(1..=10), 10)).collect();
    ctrs.sort_by(|a, b| b.cmp(a));
    let cap = [int(1), frac(3, 2), int(2), int(3), int(4)][rng.gen_range(0..5)].clone();
    let self_pricing = rng.gen_bool(0.2);
    AuctionInstance::new(bidders, ctrs, cap, mechanism).unwrap().with_self_pricing(self_pricing)
}

/// Multipliers in `[1, A]` on a grid, plus occasional crossing ratios so that
/// bids of different bidders tie.
pub fn random_alpha(rng: &mut ChaCha8Rng, instance: &AuctionInstance<Rational>) -> MultiplierVector<Rational> {
    let cap = instance.cap().clone();
    let n = instance.num_bidders();
    let mut alpha: Vec<Rational> = (0..n)
        .map(|_| int(1) + (cap.clone() - int(1)) * frac(rng.gen_range(0..=4), 4))
        .collect();
    if n >= 2 && rng.gen_bool(0.4) {
        let i = rng.gen_range(0..n);
        let o = (i + rng.gen_range(1..n)) % n;
        let vi = instance.values()[i].choose(rng).unwrap().clone();
        let vo = instance.values()[o].choose(rng).unwrap().clone();
        if !vi.is_zero() {
            let r = alpha[o].clone() * vo / vi;
            if r >= int(1) && r <= cap {
                alpha[i] = r;
            }
        }
    }
    MultiplierVector::new(alpha, instance).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `alpha_i * v_ij`, computed independently of `induce_bids`.
pub fn bids_of(instance: &AuctionInstance<Rational>, alpha: &MultiplierVector<Rational>) -> BidProfile<Rational> {
    let raw = instance
        .values()
        .iter()
        .enumerate()
        .map(|(i, vs)| vs.iter().map(|v| alpha[i].clone() * v.clone()).collect())
        .collect();
    BidProfile::from_raw(raw, instance).unwrap()
}

pub fn all_items(instance: &AuctionInstance<Rational>) -> Vec<ItemId> {
    let mut out = Vec::new();
    for (i, vs) in instance.values().iter().enumerate() {
        for j in 0..vs.len() {
            out.push(ItemId::new(i, j));
        }
    }
    out
}

pub fn permutations(items: &[ItemId]) -> Vec<Vec<ItemId>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (p, first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(p);
        for mut tail in permutations(&rest) {
            tail.insert(0, *first);
            out.push(tail);
        }
    }
    out
}

/// Every ranking whose bids never increase.
pub fn valid_rankings(instance: &AuctionInstance<Rational>, bids: &BidProfile<Rational>) -> Vec<Vec<ItemId>> {
    permutations(&all_items(instance))
        .into_iter()
        .filter(|r| r.windows(2).all(|w| bids.bid(w[0]) >= bids.bid(w[1])))
        .collect()
}

fn ctr(instance: &AuctionInstance<Rational>, r: usize) -> Rational {
    instance.ctrs().get(r).cloned().unwrap_or_else(Rational::zero)
}

/// Best CTR-weighted total over ordered choices of distinct allowed items
/// for the slots, by exhaustive search.
pub fn best_assignment(
    instance: &AuctionInstance<Rational>,
    weight: &dyn Fn(ItemId) -> Rational,
    allowed: &dyn Fn(ItemId) -> bool,
) -> Rational {
    let pool: Vec<ItemId> = all_items(instance).into_iter().filter(|it| allowed(*it)).collect();
    let depth = instance.num_slots().min(pool.len());
    fn go(
        instance: &AuctionInstance<Rational>,
        pool: &[ItemId],
        used: &mut Vec<bool>,
        r: usize,
        depth: usize,
        weight: &dyn Fn(ItemId) -> Rational,
    ) -> Rational {
        if r == depth {
            return Rational::zero();
        }
        let mut best: Option<Rational> = None;
        for p in 0..pool.len() {
            if used[p] {
                continue;
            }
            used[p] = true;
            let v = ctr(instance, r) * weight(pool[p]) + go(instance, pool, used, r + 1, depth, weight);
            used[p] = false;
            if best.as_ref().is_none_or(|b| v > *b) {
                best = Some(v);
            }
        }
        best.unwrap_or_else(Rational::zero)
    }
    let mut used = vec![false; pool.len()];
    go(instance, &pool, &mut used, 0, depth, weight)
}

pub fn optimal_welfare(instance: &AuctionInstance<Rational>) -> Rational {
    best_assignment(instance, &|it| instance.value(it).clone(), &|_| true)
}

pub fn welfare(instance: &AuctionInstance<Rational>, ranking: &[ItemId]) -> Rational {
    ranking
        .iter()
        .take(instance.num_slots())
        .enumerate()
        .fold(Rational::zero(), |acc, (r, it)| acc + ctr(instance, r) * instance.value(*it).clone())
}

pub fn values(instance: &AuctionInstance<Rational>, ranking: &[ItemId]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); instance.num_bidders()];
    for (r, it) in ranking.iter().take(instance.num_slots()).enumerate() {
        out[it.bidder] = out[it.bidder].clone() + ctr(instance, r) * instance.value(*it).clone();
    }
    out
}

/// Externality payments: others' best bid-welfare without `i` minus their
/// realised bid-welfare.
pub fn vcg(instance: &AuctionInstance<Rational>, bids: &BidProfile<Rational>, ranking: &[ItemId]) -> Vec<Rational> {
    (0..instance.num_bidders())
        .map(|i| {
            let best = best_assignment(instance, &|it| bids.bid(it).clone(), &|it| it.bidder != i);
            let realised = ranking
                .iter()
                .take(instance.num_slots())
                .enumerate()
                .filter(|(_, it)| it.bidder != i)
                .fold(Rational::zero(), |acc, (r, it)| acc + ctr(instance, r) * bids.bid(*it).clone());
            best - realised
        })
        .collect()
}

/// Per-click GSP prices of the filled ranks: the highest lower-ranked bid
/// from another bidder (any bidder with self-pricing), zero if none.
pub fn gsp_prices(instance: &AuctionInstance<Rational>, bids: &BidProfile<Rational>, ranking: &[ItemId]) -> Vec<Rational> {
    let filled = instance.num_slots().min(ranking.len());
    (0..filled)
        .map(|r| {
            let owner = ranking[r].bidder;
            ranking[r + 1..]
                .iter()
                .filter(|it| instance.self_pricing() || it.bidder != owner)
                .map(|it| bids.bid(*it).clone())
                .max()
                .unwrap_or_else(Rational::zero)
        })
        .collect()
}

pub fn gsp(instance: &AuctionInstance<Rational>, bids: &BidProfile<Rational>, ranking: &[ItemId]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); instance.num_bidders()];
    for (r, tau) in gsp_prices(instance, bids, ranking).into_iter().enumerate() {
        let i = ranking[r].bidder;
        out[i] = out[i].clone() + ctr(instance, r) * tau;
    }
    out
}

pub fn payments(instance: &AuctionInstance<Rational>, bids: &BidProfile<Rational>, ranking: &[ItemId]) -> Vec<Rational> {
    match instance.mechanism() {
        Mechanism::Gsp => gsp(instance, bids, ranking),
        Mechanism::Vcg => vcg(instance, bids, ranking),
    }
}

pub fn revenue(instance: &AuctionInstance<Rational>, bids: &BidProfile<Rational>, ranking: &[ItemId]) -> Rational {
    payments(instance, bids, ranking).into_iter().fold(Rational::zero(), |a, b| a + b)
}

/// Equilibrium conditions checked from scratch at tolerance zero.
pub fn is_equilibrium(
    instance: &AuctionInstance<Rational>,
    alpha: &MultiplierVector<Rational>,
    support: &[(Vec<ItemId>, Rational)],
) -> bool {
    let bids = bids_of(instance, alpha);
    let total = support.iter().fold(Rational::zero(), |a, (_, p)| a + p.clone());
    if total != Rational::one() || support.iter().any(|(_, p)| *p <= Rational::zero()) {
        return false;
    }
    let n = instance.num_bidders();
    let mut v = vec![Rational::zero(); n];
    let mut p = vec![Rational::zero(); n];
    for (ranking, prob) in support {
        if !ranking.windows(2).all(|w| bids.bid(w[0]) >= bids.bid(w[1])) {
            return false;
        }
        let vals = values(instance, ranking);
        let pays = payments(instance, &bids, ranking);
        for i in 0..n {
            v[i] = v[i].clone() + prob.clone() * vals[i].clone();
            p[i] = p[i].clone() + prob.clone() * pays[i].clone();
        }
    }
    (0..n).all(|i| v[i] >= p[i] && (v[i] == p[i] || alpha[i] == *instance.cap()))
}
