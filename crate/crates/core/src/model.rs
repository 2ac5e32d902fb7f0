//! Instances, multipliers, bids, allocations and tie-breaking distributions.
//!
//! Items are addressed by [`ItemId`] (`bidder`, `index`), both zero-based.
//! Ranks and slots are zero-based as well: rank `r` is slot `r + 1` in the
//! usual one-based notation, and only ranks `< K` are allocated.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemId {
    pub bidder: usize,
    pub index: usize,
}

impl ItemId {
    pub const fn new(bidder: usize, index: usize) -> Self {
        ItemId { bidder, index }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Gsp,
    Vcg,
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mechanism::Gsp => f.write_str("gsp"),
            Mechanism::Vcg => f.write_str("vcg"),
        }
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gsp" => Ok(Mechanism::Gsp),
            "vcg" => Ok(Mechanism::Vcg),
            other => Err(Error::invalid(format!("unknown mechanism {other:?}"))),
        }
    }
}

/// A position auction: bidders with sorted item values, slot CTRs, the
/// multiplier cap and the payment rule.
#[derive(Clone, Debug, PartialEq)]
pub struct AuctionInstance<T> {
    bidder_ids: Vec<String>,
    values: Vec<Vec<T>>,
    ctrs: Vec<T>,
    cap: T,
    mechanism: Mechanism,
    self_pricing: bool,
    items: Vec<ItemId>,
}

impl<T: Scalar> AuctionInstance<T> {
    pub fn new(
        bidders: Vec<(String, Vec<T>)>,
        ctrs: Vec<T>,
        cap: T,
        mechanism: Mechanism,
    ) -> Result<Self> {
        if bidders.is_empty() {
            return Err(Error::invalid("an instance needs at least one bidder"));
        }
        let zero = T::zero();
        let one = T::one();
        for (id, values) in &bidders {
            if values.is_empty() {
                return Err(Error::invalid(format!("bidder {id:?} has no items")));
            }
            if values.iter().any(|v| !v.is_finite_value() || *v < zero) {
                return Err(Error::invalid(format!("bidder {id:?} has a negative or non-finite value")));
            }
            if values.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::invalid(format!("values of bidder {id:?} are not non-increasing")));
            }
        }
        let mut seen = BTreeSet::new();
        for (id, _) in &bidders {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate bidder id {id:?}")));
            }
        }
        if ctrs.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("ctrs are not non-increasing"));
        }
        if let Some(first) = ctrs.first() {
            if *first > one {
                return Err(Error::invalid("c_1 must be at most 1"));
            }
        }
        if let Some(last) = ctrs.last() {
            if !last.is_finite_value() || *last <= zero {
                return Err(Error::invalid("every ctr must be positive"));
            }
        }
        if !cap.is_finite_value() || cap < one {
            return Err(Error::invalid("cap must be at least 1"));
        }

        let items = bidders
            .iter()
            .enumerate()
            .flat_map(|(b, (_, vals))| (0..vals.len()).map(move |j| ItemId::new(b, j)))
            .collect();
        let (bidder_ids, values) = bidders.into_iter().unzip();
        Ok(AuctionInstance { bidder_ids, values, ctrs, cap, mechanism, self_pricing: false, items })
    }

    pub fn with_self_pricing(mut self, self_pricing: bool) -> Self {
        self.self_pricing = self_pricing;
        self
    }

    pub fn with_mechanism(mut self, mechanism: Mechanism) -> Self {
        self.mechanism = mechanism;
        self
    }

    pub fn with_cap(mut self, cap: T) -> Result<Self> {
        if cap < T::one() {
            return Err(Error::invalid("cap must be at least 1"));
        }
        self.cap = cap;
        Ok(self)
    }

    pub fn num_bidders(&self) -> usize {
        self.values.len()
    }

    /// Number of slots `K`.
    pub fn num_slots(&self) -> usize {
        self.ctrs.len()
    }

    pub fn total_items(&self) -> usize {
        self.items.len()
    }

    /// Number of allocated ranks, `min(K, total items)`.
    pub fn filled_slots(&self) -> usize {
        self.ctrs.len().min(self.items.len())
    }

    pub fn items_of(&self, bidder: usize) -> usize {
        self.values[bidder].len()
    }

    /// All items in bidder-major input order.
    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn value(&self, item: ItemId) -> &T {
        &self.values[item.bidder][item.index]
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn ctrs(&self) -> &[T] {
        &self.ctrs
    }

    /// CTR of rank `r`, zero beyond the last slot.
    pub fn ctr(&self, rank: usize) -> T {
        self.ctrs.get(rank).cloned().unwrap_or_else(T::zero)
    }

    /// Layer weight `c_k - c_{k+1}` for zero-based rank `r` (`c_{K+1} = 0`).
    pub fn layer_weight(&self, rank: usize) -> T {
        self.ctr(rank) - self.ctr(rank + 1)
    }

    pub fn cap(&self) -> &T {
        &self.cap
    }

    pub fn mechanism(&self) -> Mechanism {
        self.mechanism
    }

    pub fn self_pricing(&self) -> bool {
        self.self_pricing
    }

    pub fn bidder_ids(&self) -> &[String] {
        &self.bidder_ids
    }

    pub fn bidder_index(&self, id: &str) -> Option<usize> {
        self.bidder_ids.iter().position(|b| b == id)
    }

    pub fn max_value(&self) -> T {
        self.values
            .iter()
            .filter_map(|v| v.first())
            .cloned()
            .fold(T::zero(), T::max_of)
    }

    /// Display label, bidder id followed by the one-based item index (`A1`).
    pub fn item_label(&self, item: ItemId) -> String {
        format!("{}{}", self.bidder_ids[item.bidder], item.index + 1)
    }

    pub fn item_by_label(&self, label: &str) -> Option<ItemId> {
        self.items.iter().copied().find(|it| self.item_label(*it) == label)
    }

    /// Converts every number through its exact rendering.
    pub fn convert<U: Scalar>(&self) -> Result<AuctionInstance<U>> {
        let conv = |v: &T| crate::scalar::convert::<T, U>(v);
        let bidders = self
            .bidder_ids
            .iter()
            .zip(&self.values)
            .map(|(id, vals)| Ok((id.clone(), vals.iter().map(conv).collect::<Result<Vec<_>>>()?)))
            .collect::<Result<Vec<_>>>()?;
        let ctrs = self.ctrs.iter().map(conv).collect::<Result<Vec<_>>>()?;
        Ok(AuctionInstance::new(bidders, ctrs, conv(&self.cap)?, self.mechanism)?
            .with_self_pricing(self.self_pricing))
    }
}

/// Uniform-bidding multipliers, one per bidder, each in `[1, A]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierVector<T>(Vec<T>);

impl<T: Scalar> MultiplierVector<T> {
    pub fn new(alpha: Vec<T>, instance: &AuctionInstance<T>) -> Result<Self> {
        if alpha.len() != instance.num_bidders() {
            return Err(Error::invalid(format!(
                "expected {} multipliers, got {}",
                instance.num_bidders(),
                alpha.len()
            )));
        }
        if let Some(i) = alpha.iter().position(|a| *a < T::one() || a > instance.cap()) {
            return Err(Error::invalid(format!("multiplier {} of bidder {i} is outside [1, A]", alpha[i].render())));
        }
        Ok(MultiplierVector(alpha))
    }

    pub fn ones(instance: &AuctionInstance<T>) -> Self {
        MultiplierVector(vec![T::one(); instance.num_bidders()])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<T> std::ops::Index<usize> for MultiplierVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// Per-item bids, laid out like the instance's values.
#[derive(Clone, Debug, PartialEq)]
pub struct BidProfile<T> {
    bids: Vec<Vec<T>>,
}

impl<T: Scalar> BidProfile<T> {
    /// Bids given directly; only shape and sign are checked.
    pub fn from_raw(bids: Vec<Vec<T>>, instance: &AuctionInstance<T>) -> Result<Self> {
        if bids.len() != instance.num_bidders()
            || bids.iter().zip(instance.values()).any(|(b, v)| b.len() != v.len())
        {
            return Err(Error::invalid("bid profile does not match the instance's items"));
        }
        if bids.iter().flatten().any(|b| *b < T::zero() || !b.is_finite_value()) {
            return Err(Error::invalid("bids must be finite and non-negative"));
        }
        Ok(BidProfile { bids })
    }

    pub(crate) fn from_raw_unchecked(bids: Vec<Vec<T>>) -> Self {
        BidProfile { bids }
    }

    pub fn bid(&self, item: ItemId) -> &T {
        &self.bids[item.bidder][item.index]
    }

    pub fn bids(&self) -> &[Vec<T>] {
        &self.bids
    }

    /// The same bids with every bid of `bidder` replaced by zero.
    pub fn without_bidder(&self, bidder: usize) -> Self {
        let mut bids = self.bids.clone();
        for b in &mut bids[bidder] {
            *b = T::zero();
        }
        BidProfile { bids }
    }
}

/// `b_ij = alpha_i * v_ij`.
pub fn induce_bids<T: Scalar>(instance: &AuctionInstance<T>, alpha: &MultiplierVector<T>) -> Result<BidProfile<T>> {
    if alpha.len() != instance.num_bidders() {
        return Err(Error::invalid(format!(
            "expected {} multipliers, got {}",
            instance.num_bidders(),
            alpha.len()
        )));
    }
    let bids = instance
        .values()
        .iter()
        .zip(alpha.as_slice())
        .map(|(vals, a)| vals.iter().map(|v| a.clone() * v.clone()).collect())
        .collect();
    Ok(BidProfile { bids })
}

/// A full ranking of all items; rank `r` holds `ranking[r]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    ranking: Vec<ItemId>,
}

impl Allocation {
    /// Checks that `ranking` is a permutation of the instance's items.
    pub fn new<T: Scalar>(ranking: Vec<ItemId>, instance: &AuctionInstance<T>) -> Result<Self> {
        if ranking.len() != instance.total_items() {
            return Err(Error::invalid(format!(
                "ranking has {} items, instance has {}",
                ranking.len(),
                instance.total_items()
            )));
        }
        let mut seen = vec![Vec::new(); instance.num_bidders()];
        for (b, vals) in instance.values().iter().enumerate() {
            seen[b] = vec![false; vals.len()];
        }
        for item in &ranking {
            let slot = seen
                .get_mut(item.bidder)
                .and_then(|s| s.get_mut(item.index))
                .ok_or_else(|| Error::invalid(format!("unknown item {item:?}")))?;
            if *slot {
                return Err(Error::invalid(format!("item {item:?} appears twice")));
            }
            *slot = true;
        }
        Ok(Allocation { ranking })
    }

    pub(crate) fn from_ranking_unchecked(ranking: Vec<ItemId>) -> Self {
        Allocation { ranking }
    }

    pub fn ranking(&self) -> &[ItemId] {
        &self.ranking
    }

    pub fn len(&self) -> usize {
        self.ranking.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranking.is_empty()
    }

    pub fn at(&self, rank: usize) -> ItemId {
        self.ranking[rank]
    }

    pub fn rank_of(&self, item: ItemId) -> Option<usize> {
        self.ranking.iter().position(|it| *it == item)
    }

    /// `S_k(a)`: the items in the first `k` ranks.
    pub fn prefix_set(&self, k: usize) -> Result<BTreeSet<ItemId>> {
        if k > self.ranking.len() {
            return Err(Error::invalid(format!("prefix length {k} exceeds {} items", self.ranking.len())));
        }
        Ok(self.ranking[..k].iter().copied().collect())
    }

    pub fn labels<T: Scalar>(&self, instance: &AuctionInstance<T>) -> Vec<String> {
        self.ranking.iter().map(|it| instance.item_label(*it)).collect()
    }
}

/// Whether the ranking lists bids in non-increasing order.
pub fn is_valid<T: Scalar>(allocation: &Allocation, bids: &BidProfile<T>) -> bool {
    allocation
        .ranking
        .windows(2)
        .all(|w| bids.bid(w[0]) >= bids.bid(w[1]))
}

/// Items sorted by bid (descending, stable on input order) and split into
/// groups of equal bid.
pub(crate) fn tie_groups<T: Scalar>(bids: &BidProfile<T>) -> Vec<Vec<ItemId>> {
    let mut items: Vec<ItemId> = bids
        .bids
        .iter()
        .enumerate()
        .flat_map(|(b, v)| (0..v.len()).map(move |j| ItemId::new(b, j)))
        .collect();
    items.sort_by(|x, y| bids.bid(*y).partial_cmp(bids.bid(*x)).unwrap_or(std::cmp::Ordering::Equal));
    let mut groups: Vec<Vec<ItemId>> = Vec::new();
    for item in items {
        match groups.last_mut() {
            Some(g) if bids.bid(g[0]) == bids.bid(item) => g.push(item),
            _ => groups.push(vec![item]),
        }
    }
    groups
}

/// Number of valid allocations: the product of tie-group factorials,
/// saturating at `u128::MAX`.
pub fn count_valid_allocations<T: Scalar>(bids: &BidProfile<T>) -> u128 {
    tie_groups(bids)
        .iter()
        .map(|g| (1..=g.len() as u128).fold(1u128, |acc, x| acc.saturating_mul(x)))
        .fold(1u128, |acc, x| acc.saturating_mul(x))
}

/// Every allocation valid under `bids`, or a blowup error carrying the count.
pub fn enumerate_valid_allocations<T: Scalar>(bids: &BidProfile<T>, limit: usize) -> Result<Vec<Allocation>> {
    let count = count_valid_allocations(bids);
    if count > limit as u128 {
        return Err(Error::Blowup { count, limit });
    }
    let groups = tie_groups(bids);
    let per_group: Vec<Vec<Vec<ItemId>>> = groups.iter().map(|g| permutations(g)).collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut cursor = vec![0usize; per_group.len()];
    loop {
        let ranking: Vec<ItemId> = cursor
            .iter()
            .zip(&per_group)
            .flat_map(|(&c, perms)| perms[c].iter().copied())
            .collect();
        out.push(Allocation { ranking });
        // odometer over the groups, last group fastest
        let mut pos = per_group.len();
        loop {
            if pos == 0 {
                debug_assert_eq!(out.len() as u128, count);
                return Ok(out);
            }
            pos -= 1;
            cursor[pos] += 1;
            if cursor[pos] < per_group[pos].len() {
                break;
            }
            cursor[pos] = 0;
        }
    }
}

/// All permutations of `items` in lexicographic order of positions.
fn permutations(items: &[ItemId]) -> Vec<Vec<ItemId>> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    let mut out = vec![items.to_vec()];
    loop {
        let Some(i) = (1..idx.len()).rev().find(|&i| idx[i - 1] < idx[i]) else {
            return out;
        };
        let j = (i..idx.len()).rev().find(|&j| idx[j] > idx[i - 1]).expect("successor exists");
        idx.swap(i - 1, j);
        idx[i..].reverse();
        out.push(idx.iter().map(|&k| items[k]).collect());
    }
}

/// `S_k(a)` as a free function.
pub fn prefix_set(allocation: &Allocation, k: usize) -> Result<BTreeSet<ItemId>> {
    allocation.prefix_set(k)
}

/// A finite distribution over allocations.
#[derive(Clone, Debug, PartialEq)]
pub struct TieBreakDistribution<T> {
    support: Vec<(Allocation, T)>,
}

impl<T: Scalar> TieBreakDistribution<T> {
    pub fn new(support: Vec<(Allocation, T)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("tie-breaking distribution has empty support"));
        }
        if support.iter().any(|(_, p)| *p <= T::zero()) {
            return Err(Error::invalid("tie-breaking probabilities must be positive"));
        }
        let total = support.iter().fold(T::zero(), |acc, (_, p)| acc + p.clone());
        if (total - T::one()).abs_value() > T::prob_tolerance() {
            return Err(Error::invalid("tie-breaking probabilities must sum to 1"));
        }
        Ok(TieBreakDistribution { support })
    }

    pub fn point_mass(allocation: Allocation) -> Self {
        TieBreakDistribution { support: vec![(allocation, T::one())] }
    }

    pub fn uniform(allocations: Vec<Allocation>) -> Result<Self> {
        let n = T::from_usize(allocations.len());
        let p = T::one() / n;
        Self::new(allocations.into_iter().map(|a| (a, p.clone())).collect())
    }

    pub fn support(&self) -> &[(Allocation, T)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}
