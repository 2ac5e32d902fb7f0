//! The shared bid-sorting allocation rule, GSP (no self-pricing) and VCG
//! payments, and welfare accounting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{is_valid, Allocation, AuctionInstance, BidProfile, ItemId, Mechanism, TieBreakDistribution};
use crate::scalar::Scalar;

/// How `allocate` orders items with equal bids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieRule {
    /// Input order (bidder-major).
    FirstListed,
    /// A seeded uniformly random order within each tie group.
    Random(u64),
    /// The given bidder's items first, then input order.
    FavorBidder(usize),
}

/// Sorts items by bid, highest first, resolving ties per `tie_rule`.
pub fn allocate<T: Scalar>(bids: &BidProfile<T>, tie_rule: TieRule) -> Allocation {
    let items: Vec<ItemId> = bids
        .bids()
        .iter()
        .enumerate()
        .flat_map(|(b, v)| (0..v.len()).map(move |j| ItemId::new(b, j)))
        .collect();
    let mut keyed: Vec<(usize, ItemId)> = match tie_rule {
        TieRule::FirstListed => items.into_iter().enumerate().collect(),
        TieRule::Random(seed) => {
            let mut order: Vec<usize> = (0..items.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            order.into_iter().zip(items).collect()
        }
        TieRule::FavorBidder(favored) => {
            let n = items.len();
            items
                .into_iter()
                .enumerate()
                .map(|(pos, it)| (if it.bidder == favored { pos } else { n + pos }, it))
                .collect()
        }
    };
    keyed.sort_by(|(ka, a), (kb, b)| {
        bids.bid(*b)
            .partial_cmp(bids.bid(*a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ka.cmp(kb))
    });
    Allocation::from_ranking_unchecked(keyed.into_iter().map(|(_, it)| it).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WelfareReport<T> {
    /// `V_i`: CTR-weighted true values of each bidder's allocated items.
    pub per_bidder_value: Vec<T>,
    pub welfare: T,
    /// `W(a, b)`: CTR-weighted bids of the allocated items.
    pub bid_welfare: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItemPrice<T> {
    pub item: ItemId,
    pub rank: usize,
    /// Per-click price `tau`.
    pub price: T,
    /// `c_k * tau`.
    pub payment: T,
    /// The lower-ranked item whose bid sets the price, if any.
    pub price_setter: Option<ItemId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PaymentBreakdown<T> {
    /// GSP only: one entry per allocated rank, in rank order.
    pub per_item_price: Option<Vec<ItemPrice<T>>>,
    pub per_bidder_payment: Vec<T>,
    pub revenue: T,
}

impl<T: Scalar> PaymentBreakdown<T> {
    fn from_payments(per_item_price: Option<Vec<ItemPrice<T>>>, per_bidder_payment: Vec<T>) -> Self {
        let revenue = sum(per_bidder_payment.iter().cloned());
        PaymentBreakdown { per_item_price, per_bidder_payment, revenue }
    }
}

pub(crate) fn sum<T: Scalar>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().fold(T::zero(), |acc, x| acc + x)
}

/// Values, welfare and bid-welfare of the top-`K` prefix of `allocation`.
pub fn bidder_value<T: Scalar>(
    instance: &AuctionInstance<T>,
    bids: &BidProfile<T>,
    allocation: &Allocation,
) -> WelfareReport<T> {
    let mut per_bidder_value = vec![T::zero(); instance.num_bidders()];
    let mut bid_welfare = T::zero();
    for (rank, item) in allocation.ranking().iter().take(instance.num_slots()).enumerate() {
        let c = instance.ctr(rank);
        per_bidder_value[item.bidder] =
            per_bidder_value[item.bidder].clone() + c.clone() * instance.value(*item).clone();
        bid_welfare = bid_welfare + c * bids.bid(*item).clone();
    }
    let welfare = sum(per_bidder_value.iter().cloned());
    WelfareReport { per_bidder_value, welfare, bid_welfare }
}

/// Highest bid below the current position, plus the highest bid below from
/// an owner other than the leader's.
struct SuffixLeaders<T> {
    top: Option<(T, ItemId)>,
    rival: Option<(T, ItemId)>,
}

impl<T: Scalar> SuffixLeaders<T> {
    fn new() -> Self {
        SuffixLeaders { top: None, rival: None }
    }

    fn insert(&mut self, bid: T, item: ItemId) {
        match &self.top {
            None => self.top = Some((bid, item)),
            Some((tb, ti)) if bid > *tb => {
                if ti.bidder != item.bidder {
                    self.rival = self.top.take();
                }
                self.top = Some((bid, item));
            }
            Some((_, ti)) => {
                if ti.bidder != item.bidder && self.rival.as_ref().is_none_or(|(rb, _)| bid > *rb) {
                    self.rival = Some((bid, item));
                }
            }
        }
    }

    /// Price-setter for an item of `owner`: the best lower bid from another
    /// bidder, or from anyone when self-pricing is allowed.
    fn price_for(&self, owner: usize, self_pricing: bool) -> Option<&(T, ItemId)> {
        match &self.top {
            Some(top) if self_pricing || top.1.bidder != owner => Some(top),
            Some(_) => self.rival.as_ref(),
            None => None,
        }
    }
}

/// GSP with no self-pricing: every allocated item pays, per click, the highest
/// bid among lower-ranked items of other bidders (any bidder when the
/// instance enables self-pricing).
pub fn gsp_payments<T: Scalar>(
    instance: &AuctionInstance<T>,
    bids: &BidProfile<T>,
    allocation: &Allocation,
) -> PaymentBreakdown<T> {
    let filled = instance.filled_slots();
    let ranking = allocation.ranking();
    let mut prices: Vec<Option<ItemPrice<T>>> = vec![None; filled];
    let mut leaders = SuffixLeaders::<T>::new();
    for rank in (0..ranking.len()).rev() {
        let item = ranking[rank];
        if rank < filled {
            let (price, price_setter) = match leaders.price_for(item.bidder, instance.self_pricing()) {
                Some((b, setter)) => (b.clone(), Some(*setter)),
                None => (T::zero(), None),
            };
            let payment = instance.ctr(rank) * price.clone();
            prices[rank] = Some(ItemPrice { item, rank, price, payment, price_setter });
        }
        leaders.insert(bids.bid(item).clone(), item);
    }
    let prices: Vec<ItemPrice<T>> = prices.into_iter().map(|p| p.expect("every allocated rank priced")).collect();
    let mut per_bidder = vec![T::zero(); instance.num_bidders()];
    for p in &prices {
        per_bidder[p.item.bidder] = per_bidder[p.item.bidder].clone() + p.payment.clone();
    }
    PaymentBreakdown::from_payments(Some(prices), per_bidder)
}

/// `W^opt_{-i}(b)`: the best bid-welfare of the other bidders, i.e. their bids
/// sorted into the slots.
pub fn counterfactual_optimal_bid_welfare<T: Scalar>(
    instance: &AuctionInstance<T>,
    bids: &BidProfile<T>,
    excluded_bidder: usize,
) -> Result<T> {
    if excluded_bidder >= instance.num_bidders() {
        return Err(Error::invalid(format!("bidder {excluded_bidder} out of range")));
    }
    let mut others: Vec<T> = instance
        .items()
        .iter()
        .filter(|it| it.bidder != excluded_bidder)
        .map(|it| bids.bid(*it).clone())
        .collect();
    others.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(sum(others.into_iter().enumerate().map(|(r, b)| instance.ctr(r) * b)))
}

/// VCG: each bidder pays `W^opt_{-i}(b) - W_{-i}(a, b)`.
pub fn vcg_payments<T: Scalar>(
    instance: &AuctionInstance<T>,
    bids: &BidProfile<T>,
    allocation: &Allocation,
) -> PaymentBreakdown<T> {
    let n = instance.num_bidders();
    let k = instance.num_slots();
    let ranking = allocation.ranking();
    let sorted = is_valid(allocation, bids);
    let mut realized_others = vec![T::zero(); n];
    let mut total = T::zero();
    let mut own = vec![T::zero(); n];
    for (rank, item) in ranking.iter().take(k).enumerate() {
        let w = instance.ctr(rank) * bids.bid(*item).clone();
        own[item.bidder] = own[item.bidder].clone() + w.clone();
        total = total + w;
    }
    for i in 0..n {
        realized_others[i] = total.clone() - own[i].clone();
    }
    let payments = (0..n)
        .map(|i| {
            let best = if sorted {
                // a valid ranking is already bid-sorted, so the greedy
                // counterfactual is its first K items not owned by i
                sum(ranking
                    .iter()
                    .filter(|it| it.bidder != i)
                    .take(k)
                    .enumerate()
                    .map(|(r, it)| instance.ctr(r) * bids.bid(*it).clone()))
            } else {
                counterfactual_optimal_bid_welfare(instance, bids, i).expect("bidder in range")
            };
            best - realized_others[i].clone()
        })
        .collect();
    PaymentBreakdown::from_payments(None, payments)
}

/// Payments under the instance's mechanism.
pub fn payments<T: Scalar>(
    instance: &AuctionInstance<T>,
    bids: &BidProfile<T>,
    allocation: &Allocation,
) -> PaymentBreakdown<T> {
    match instance.mechanism() {
        Mechanism::Gsp => gsp_payments(instance, bids, allocation),
        Mechanism::Vcg => vcg_payments(instance, bids, allocation),
    }
}

/// Welfare and payments of a single allocation.
pub fn outcome<T: Scalar>(
    instance: &AuctionInstance<T>,
    bids: &BidProfile<T>,
    allocation: &Allocation,
) -> (WelfareReport<T>, PaymentBreakdown<T>) {
    (bidder_value(instance, bids, allocation), payments(instance, bids, allocation))
}

/// Probability-weighted welfare and payments under a tie-breaking
/// distribution. Every supported allocation must be valid under `bids`.
pub fn expected_outcome<T: Scalar>(
    instance: &AuctionInstance<T>,
    bids: &BidProfile<T>,
    pi: &TieBreakDistribution<T>,
) -> Result<(WelfareReport<T>, PaymentBreakdown<T>)> {
    let n = instance.num_bidders();
    let mut values = vec![T::zero(); n];
    let mut pays = vec![T::zero(); n];
    let mut bid_welfare = T::zero();
    for (allocation, p) in pi.support() {
        if allocation.len() != instance.total_items() {
            return Err(Error::Contract("supported allocation does not cover the instance".into()));
        }
        if !is_valid(allocation, bids) {
            return Err(Error::Contract(format!(
                "supported allocation {:?} is not valid under the bids",
                allocation.labels(instance)
            )));
        }
        let (w, pay) = outcome(instance, bids, allocation);
        for i in 0..n {
            values[i] = values[i].clone() + p.clone() * w.per_bidder_value[i].clone();
            pays[i] = pays[i].clone() + p.clone() * pay.per_bidder_payment[i].clone();
        }
        bid_welfare = bid_welfare + p.clone() * w.bid_welfare;
    }
    let welfare = sum(values.iter().cloned());
    Ok((
        WelfareReport { per_bidder_value: values, welfare, bid_welfare },
        PaymentBreakdown::from_payments(None, pays),
    ))
}

/// One CSV row of a payment/welfare report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PaymentRow {
    pub bidder_id: String,
    pub value: String,
    pub payment: String,
    pub mechanism: String,
}

/// Column order of [`PaymentRow`] in CSV output.
pub const PAYMENT_CSV_HEADER: [&str; 4] = ["bidder_id", "value", "payment", "mechanism"];

pub fn payment_rows<T: Scalar>(
    instance: &AuctionInstance<T>,
    welfare: &WelfareReport<T>,
    payments: &PaymentBreakdown<T>,
) -> Vec<PaymentRow> {
    instance
        .bidder_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| PaymentRow {
            bidder_id: id.clone(),
            value: welfare.per_bidder_value[i].render(),
            payment: payments.per_bidder_payment[i].render(),
            mechanism: instance.mechanism().to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::example_one;
    use crate::model::{induce_bids, MultiplierVector};
    use crate::scalar::Rational;

    fn q(s: &str) -> Rational {
        Rational::parse(s).unwrap()
    }

    fn example() -> (AuctionInstance<Rational>, BidProfile<Rational>) {
        let inst = example_one::<Rational>();
        let bids = induce_bids(&inst, &MultiplierVector::ones(&inst)).unwrap();
        (inst, bids)
    }

    #[test]
    fn example_one_allocation() {
        let (inst, bids) = example();
        let a = allocate(&bids, TieRule::FirstListed);
        assert_eq!(a.labels(&inst), ["B1", "A1", "A2", "B2"]);
    }

    #[test]
    fn example_one_values() {
        let (inst, bids) = example();
        let a = allocate(&bids, TieRule::FirstListed);
        let w = bidder_value(&inst, &bids, &a);
        assert_eq!(w.per_bidder_value, vec![q("11"), q("15")]);
        assert_eq!(w.welfare, q("26"));
        assert_eq!(w.bid_welfare, q("26"));
    }

    #[test]
    fn example_one_gsp() {
        let (inst, bids) = example();
        let a = allocate(&bids, TieRule::FirstListed);
        let p = gsp_payments(&inst, &bids, &a);
        assert_eq!(p.per_bidder_payment, vec![q("7.2"), q("10")]);
        assert_eq!(p.revenue, q("17.2"));
        let prices: Vec<_> = p.per_item_price.unwrap().iter().map(|x| x.payment.clone()).collect();
        assert_eq!(prices, vec![q("10"), q("4.2"), q("3")]);
    }

    #[test]
    fn example_one_gsp_with_self_pricing() {
        let (inst, bids) = example();
        let inst = inst.with_self_pricing(true);
        let a = allocate(&bids, TieRule::FirstListed);
        let p = gsp_payments(&inst, &bids, &a);
        assert_eq!(p.per_bidder_payment[0], q("8.6"));
        assert_eq!(p.per_bidder_payment[1], q("10"));
    }

    #[test]
    fn example_one_vcg() {
        let (inst, bids) = example();
        let a = allocate(&bids, TieRule::FirstListed);
        let p = vcg_payments(&inst, &bids, &a);
        assert_eq!(p.per_bidder_payment, vec![q("4.2"), q("4.6")]);
        assert!(p.per_item_price.is_none());
    }

    #[test]
    fn example_one_counterfactuals() {
        let (inst, bids) = example();
        assert_eq!(counterfactual_optimal_bid_welfare(&inst, &bids, 1).unwrap(), q("15.6"));
        assert_eq!(counterfactual_optimal_bid_welfare(&inst, &bids, 0).unwrap(), q("19.2"));
        assert!(counterfactual_optimal_bid_welfare(&inst, &bids, 2).is_err());
    }

    fn single_bidder() -> (AuctionInstance<Rational>, BidProfile<Rational>) {
        let inst = AuctionInstance::new(
            vec![("A".into(), vec![q("3"), q("2"), q("1")])],
            vec![q("1"), q("0.5")],
            q("4"),
            Mechanism::Gsp,
        )
        .unwrap();
        let bids = induce_bids(&inst, &MultiplierVector::new(vec![q("2")], &inst).unwrap()).unwrap();
        (inst, bids)
    }

    #[test]
    fn single_bidder_pays_nothing() {
        let (inst, bids) = single_bidder();
        let a = allocate(&bids, TieRule::FirstListed);
        assert_eq!(gsp_payments(&inst, &bids, &a).revenue, q("0"));
        assert_eq!(vcg_payments(&inst, &bids, &a).revenue, q("0"));
        assert_eq!(counterfactual_optimal_bid_welfare(&inst, &bids, 0).unwrap(), q("0"));
    }

    #[test]
    fn zero_slots_zero_value() {
        let inst = AuctionInstance::new(
            vec![("A".into(), vec![q("3")]), ("B".into(), vec![q("2")])],
            vec![],
            q("1"),
            Mechanism::Vcg,
        )
        .unwrap();
        let bids = induce_bids(&inst, &MultiplierVector::ones(&inst)).unwrap();
        let a = allocate(&bids, TieRule::FirstListed);
        let (w, p) = outcome(&inst, &bids, &a);
        assert_eq!(w.welfare, q("0"));
        assert_eq!(p.revenue, q("0"));
        assert_eq!(gsp_payments(&inst, &bids, &a).revenue, q("0"));
    }

    #[test]
    fn tie_rules() {
        let inst = AuctionInstance::new(
            vec![("A".into(), vec![q("1"), q("1")]), ("B".into(), vec![q("1"), q("1")])],
            vec![q("1")],
            q("1"),
            Mechanism::Gsp,
        )
        .unwrap();
        let bids = induce_bids(&inst, &MultiplierVector::ones(&inst)).unwrap();
        assert_eq!(allocate(&bids, TieRule::FirstListed).labels(&inst), ["A1", "A2", "B1", "B2"]);
        assert_eq!(allocate(&bids, TieRule::FavorBidder(1)).labels(&inst), ["B1", "B2", "A1", "A2"]);
        let r1 = allocate(&bids, TieRule::Random(7));
        assert_eq!(r1, allocate(&bids, TieRule::Random(7)));
        assert!(is_valid(&r1, &bids));
        let distinct: std::collections::BTreeSet<_> =
            (0..1000).map(|s| allocate(&bids, TieRule::Random(s))).collect();
        assert_eq!(distinct.len(), 24);
    }

    #[test]
    fn expected_outcome_point_mass_and_tie_average() {
        let (inst, bids) = example();
        let a = allocate(&bids, TieRule::FirstListed);
        let (w, p) = expected_outcome(&inst, &bids, &TieBreakDistribution::point_mass(a.clone())).unwrap();
        let (w0, p0) = outcome(&inst, &bids, &a);
        assert_eq!(w.per_bidder_value, w0.per_bidder_value);
        assert_eq!(p.per_bidder_payment, p0.per_bidder_payment);

        // synthetic tie b_A1 = 15
        let tied = BidProfile::from_raw(vec![vec![q("15"), q("8")], vec![q("15"), q("6")]], &inst).unwrap();
        let orders = crate::model::enumerate_valid_allocations(&tied, 10).unwrap();
        assert_eq!(orders.len(), 2);
        let pi = TieBreakDistribution::uniform(orders.clone()).unwrap();
        let (w, p) = expected_outcome(&inst, &tied, &pi).unwrap();
        let half = q("1/2");
        for i in 0..2 {
            let (wa, pa) = outcome(&inst, &tied, &orders[0]);
            let (wb, pb) = outcome(&inst, &tied, &orders[1]);
            let mean_v = half.clone() * (wa.per_bidder_value[i].clone() + wb.per_bidder_value[i].clone());
            let mean_p = half.clone() * (pa.per_bidder_payment[i].clone() + pb.per_bidder_payment[i].clone());
            assert_eq!(w.per_bidder_value[i], mean_v);
            assert_eq!(p.per_bidder_payment[i], mean_p);
        }
        // values are true values: A1 first gives A 10 + 0.5*8, B1 first gives 0.7*10 + 0.5*8
        assert_eq!(w.per_bidder_value[0], q("12.5"));
    }

    #[test]
    fn expected_outcome_rejects_invalid_support() {
        let (inst, bids) = example();
        let bad = Allocation::new(inst.items().to_vec(), &inst).unwrap();
        let err = expected_outcome(&inst, &bids, &TieBreakDistribution::point_mass(bad)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn csv_rows() {
        let (inst, bids) = example();
        let a = allocate(&bids, TieRule::FirstListed);
        let (w, p) = outcome(&inst, &bids, &a);
        let rows = payment_rows(&inst, &w, &p);
        assert_eq!(rows[0], PaymentRow { bidder_id: "A".into(), value: "11".into(), payment: "7.2".into(), mechanism: "gsp".into() });
    }
}
