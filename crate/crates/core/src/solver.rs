//! Smoothed fixed-point search for autobidding equilibria.
//!
//! Every bid is perturbed by independent noise `xi ~ U[0, eps]`, which makes
//! the allocation unique almost surely and the expected values `V^eps_i(alpha)`
//! and payments `P^eps_i(alpha)` continuous. The search iterates
//! `alpha_i <- clamp(alpha_i + step_i * (V^eps_i - P^eps_i), 1, A)` on a fixed
//! panel of noise draws per stage while `eps` decays geometrically, then reads
//! the tie-breaking distribution off the allocation frequencies at the final
//! stage.
//!
//! The iteration runs in `f64`. The returned candidate is exact: multipliers
//! within noise range of a bid crossing are snapped onto it, sampled
//! allocations are re-sorted by the unperturbed bids, and the result is
//! verified in rational arithmetic at tolerance `3 * std_err + fp_tol`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{outcome, PaymentBreakdown, WelfareReport};
use crate::model::{
    induce_bids, Allocation, AuctionInstance, BidProfile, ItemId, Mechanism, MultiplierVector, TieBreakDistribution,
};
use crate::scalar::{rational_from_f64, Rational, Scalar};
use crate::verifier::{verify, EquilibriumCandidate};

/// Rounds per parallel work unit; fixed so the reduction order never depends
/// on the thread count.
const CHUNK: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Initial noise level; `0.1 * max value` when absent.
    pub eps0: Option<f64>,
    pub eps_decay: f64,
    pub stages: usize,
    pub samples_per_eval: usize,
    pub damping: f64,
    pub max_iters_per_stage: usize,
    /// Residual tolerance in value units; `1e-4 * max value` when absent.
    pub fp_tol: Option<f64>,
    /// Random starting points tried after the all-ones start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps0: None,
            eps_decay: 0.5,
            stages: 12,
            samples_per_eval: 2048,
            damping: 0.2,
            max_iters_per_stage: 500,
            fp_tol: None,
            restarts: 4,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: Option<f64>| x.is_none_or(|x| x > 0.0 && x.is_finite());
        if !positive(self.eps0) || !positive(self.fp_tol) {
            return Err(Error::invalid("eps0 and fp_tol must be positive"));
        }
        if !(self.eps_decay > 0.0 && self.eps_decay < 1.0) {
            return Err(Error::invalid("eps_decay must lie in (0, 1)"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping must lie in (0, 1]"));
        }
        if self.stages == 0 || self.samples_per_eval == 0 || self.max_iters_per_stage == 0 {
            return Err(Error::invalid("stages, samples_per_eval and max_iters_per_stage must be positive"));
        }
        Ok(())
    }

    fn scale(instance: &AuctionInstance<f64>) -> f64 {
        let m = instance.max_value();
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    pub fn eps0_for(&self, instance: &AuctionInstance<f64>) -> f64 {
        self.eps0.unwrap_or(0.1 * Self::scale(instance))
    }

    pub fn fp_tol_for(&self, instance: &AuctionInstance<f64>) -> f64 {
        self.fp_tol.unwrap_or(1e-4 * Self::scale(instance))
    }

    /// Noise level of each stage.
    pub fn schedule(&self, instance: &AuctionInstance<f64>) -> Vec<f64> {
        let eps0 = self.eps0_for(instance);
        (0..self.stages).map(|t| eps0 * self.eps_decay.powi(t as i32)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothedEstimate {
    pub value_est: Vec<f64>,
    pub payment_est: Vec<f64>,
    /// Standard error of the per-round `V_i - P_i`.
    pub std_err: Vec<f64>,
    pub draws: usize,
}

impl SmoothedEstimate {
    pub fn net(&self, bidder: usize) -> f64 {
        self.value_est[bidder] - self.payment_est[bidder]
    }
}

/// Perturbed bids `alpha_i * v_ij + eps * u_ij` for uniforms `u` laid out in
/// instance item order.
fn perturbed_bids(instance: &AuctionInstance<f64>, alpha: &[f64], eps: f64, uniforms: &[f64]) -> BidProfile<f64> {
    let mut k = 0;
    let bids = instance
        .values()
        .iter()
        .enumerate()
        .map(|(i, vs)| {
            vs.iter()
                .map(|v| {
                    let b = alpha[i] * v + eps * uniforms[k];
                    k += 1;
                    b
                })
                .collect()
        })
        .collect();
    BidProfile::from_raw_unchecked(bids)
}

/// One auction under freshly drawn noise. The flag reports a realised exact
/// tie, which the first-listed rule resolves.
pub fn sample_perturbed_round<R: Rng>(
    instance: &AuctionInstance<f64>,
    alpha: &MultiplierVector<f64>,
    eps: f64,
    rng: &mut R,
) -> Result<(Allocation, WelfareReport<f64>, PaymentBreakdown<f64>, bool)> {
    if !(eps > 0.0) {
        return Err(Error::invalid("noise level must be positive"));
    }
    if alpha.len() != instance.num_bidders() {
        return Err(Error::invalid("multiplier vector does not match the instance"));
    }
    let uniforms: Vec<f64> = (0..instance.total_items()).map(|_| rng.gen::<f64>()).collect();
    let bids = perturbed_bids(instance, alpha.as_slice(), eps, &uniforms);
    let a = crate::mechanisms::allocate(&bids, crate::mechanisms::TieRule::FirstListed);
    let tie = a.ranking().windows(2).any(|w| bids.bid(w[0]) == bids.bid(w[1]));
    let (w, p) = outcome(instance, &bids, &a);
    Ok((a, w, p, tie))
}

/// Flattened instance for the hot loop.
struct Layout {
    owner: Vec<usize>,
    value: Vec<f64>,
    items: Vec<ItemId>,
    ctr: Vec<f64>,
    n: usize,
    items_per_bidder: Vec<usize>,
    mechanism: Mechanism,
    self_pricing: bool,
}

impl Layout {
    fn new(instance: &AuctionInstance<f64>) -> Self {
        let items = instance.items().to_vec();
        Layout {
            owner: items.iter().map(|it| it.bidder).collect(),
            value: items.iter().map(|it| *instance.value(*it)).collect(),
            ctr: (0..instance.filled_slots()).map(|r| instance.ctr(r)).collect(),
            n: instance.num_bidders(),
            items_per_bidder: (0..instance.num_bidders()).map(|i| instance.items_of(i)).collect(),
            mechanism: instance.mechanism(),
            self_pricing: instance.self_pricing(),
            items,
        }
    }

    fn m(&self) -> usize {
        self.items.len()
    }
}

/// Per-chunk sums; merged in chunk order.
#[derive(Clone, Debug)]
struct Partial {
    value: Vec<f64>,
    payment: Vec<f64>,
    net_sq: Vec<f64>,
    ties: u64,
    relaxed_roi_violations: u64,
    counts: BTreeMap<Vec<u32>, u64>,
}

impl Partial {
    fn new(n: usize) -> Self {
        Partial {
            value: vec![0.0; n],
            payment: vec![0.0; n],
            net_sq: vec![0.0; n],
            ties: 0,
            relaxed_roi_violations: 0,
            counts: BTreeMap::new(),
        }
    }

    fn merge(&mut self, other: Partial) {
        for i in 0..self.value.len() {
            self.value[i] += other.value[i];
            self.payment[i] += other.payment[i];
            self.net_sq[i] += other.net_sq[i];
        }
        self.ties += other.ties;
        self.relaxed_roi_violations += other.relaxed_roi_violations;
        for (k, c) in other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
    }
}

struct Scratch {
    bid: Vec<f64>,
    order: Vec<u32>,
    value: Vec<f64>,
    payment: Vec<f64>,
}

/// Value and payment of every bidder for one row of uniforms, written into
/// `scratch`. Returns whether an exact tie occurred.
fn evaluate_round(layout: &Layout, alpha: &[f64], eps: f64, uniforms: &[f64], scratch: &mut Scratch) -> bool {
    let m = layout.m();
    for k in 0..m {
        scratch.bid[k] = alpha[layout.owner[k]] * layout.value[k] + eps * uniforms[k];
    }
    scratch.order.clear();
    scratch.order.extend(0..m as u32);
    let bid = &scratch.bid;
    scratch
        .order
        .sort_by(|&x, &y| bid[y as usize].partial_cmp(&bid[x as usize]).unwrap_or(std::cmp::Ordering::Equal));
    let tie = scratch.order.windows(2).any(|w| bid[w[0] as usize] == bid[w[1] as usize]);

    scratch.value.iter_mut().for_each(|x| *x = 0.0);
    scratch.payment.iter_mut().for_each(|x| *x = 0.0);
    let filled = layout.ctr.len();
    let mut welfare = 0.0;
    for r in 0..filled {
        let k = scratch.order[r] as usize;
        let c = layout.ctr[r];
        scratch.value[layout.owner[k]] += c * layout.value[k];
        welfare += c * bid[k];
    }
    match layout.mechanism {
        Mechanism::Gsp => {
            // (bid, owner) of the best lower-ranked item, and the best from a
            // different owner
            let mut top: Option<(f64, usize)> = None;
            let mut rival: Option<f64> = None;
            for r in (0..m).rev() {
                let k = scratch.order[r] as usize;
                let o = layout.owner[k];
                if r < filled {
                    let tau = match top {
                        None => 0.0,
                        Some((b, _)) if layout.self_pricing => b,
                        Some((b, to)) if to != o => b,
                        Some(_) => rival.unwrap_or(0.0),
                    };
                    scratch.payment[o] += layout.ctr[r] * tau;
                }
                let b = bid[k];
                match top {
                    None => top = Some((b, o)),
                    Some((tb, to)) if b > tb => {
                        if to != o {
                            rival = Some(tb);
                        }
                        top = Some((b, o));
                    }
                    Some((_, to)) => {
                        if to != o && rival.is_none_or(|rb| b > rb) {
                            rival = Some(b);
                        }
                    }
                }
            }
        }
        Mechanism::Vcg => {
            for i in 0..layout.n {
                let own: f64 = (0..filled)
                    .filter(|&r| layout.owner[scratch.order[r] as usize] == i)
                    .map(|r| layout.ctr[r] * bid[scratch.order[r] as usize])
                    .sum();
                let best: f64 = scratch
                    .order
                    .iter()
                    .map(|&k| k as usize)
                    .filter(|&k| layout.owner[k] != i)
                    .take(filled)
                    .enumerate()
                    .map(|(r, k)| layout.ctr[r] * bid[k])
                    .sum();
                scratch.payment[i] = best - (welfare - own);
            }
        }
    }
    tie
}

/// Monte-Carlo estimate on a fixed panel of uniforms (`rows x items`).
fn estimate_on_panel(
    layout: &Layout,
    alpha: &[f64],
    eps: f64,
    panel: &[f64],
    collect: bool,
) -> (SmoothedEstimate, Partial) {
    let m = layout.m();
    let n = layout.n;
    let rows = panel.len().checked_div(m).unwrap_or(0);
    let draws = if m == 0 { 1 } else { rows };
    let chunk_len = CHUNK * m.max(1);
    let partials: Vec<Partial> = if m == 0 {
        vec![Partial::new(n)]
    } else {
        panel
            .par_chunks(chunk_len)
            .map(|chunk| {
                let mut part = Partial::new(n);
                let mut scratch =
                    Scratch { bid: vec![0.0; m], order: Vec::with_capacity(m), value: vec![0.0; n], payment: vec![0.0; n] };
                for row in chunk.chunks(m) {
                    if evaluate_round(layout, alpha, eps, row, &mut scratch) {
                        part.ties += 1;
                    }
                    for i in 0..n {
                        let (v, p) = (scratch.value[i], scratch.payment[i]);
                        part.value[i] += v;
                        part.payment[i] += p;
                        part.net_sq[i] += (v - p) * (v - p);
                        if alpha[i] == 1.0 {
                            let slack = eps * layout.items_per_bidder[i] as f64;
                            if p > v + slack + 1e-9 * (1.0 + v.abs()) {
                                part.relaxed_roi_violations += 1;
                            }
                        }
                    }
                    if collect {
                        *part.counts.entry(scratch.order.clone()).or_insert(0) += 1;
                    }
                }
                part
            })
            .collect()
    };
    let mut total = Partial::new(n);
    for p in partials {
        total.merge(p);
    }
    let d = draws as f64;
    let value_est: Vec<f64> = total.value.iter().map(|x| x / d).collect();
    let payment_est: Vec<f64> = total.payment.iter().map(|x| x / d).collect();
    let std_err = (0..n)
        .map(|i| {
            if draws < 2 {
                return 0.0;
            }
            let mean = value_est[i] - payment_est[i];
            let var = ((total.net_sq[i] - d * mean * mean) / (d - 1.0)).max(0.0);
            (var / d).sqrt()
        })
        .collect();
    (SmoothedEstimate { value_est, payment_est, std_err, draws }, total)
}

fn draw_panel(rng: &mut ChaCha8Rng, rows: usize, items: usize) -> Vec<f64> {
    (0..rows * items).map(|_| rng.gen::<f64>()).collect()
}

/// Monte-Carlo estimate of the smoothed values and payments.
pub fn estimate_smoothed<R: Rng>(
    instance: &AuctionInstance<f64>,
    alpha: &MultiplierVector<f64>,
    eps: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<SmoothedEstimate> {
    if n_samples == 0 {
        return Err(Error::invalid("at least one sample is required"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("noise level must be positive"));
    }
    if alpha.len() != instance.num_bidders() {
        return Err(Error::invalid("multiplier vector does not match the instance"));
    }
    let layout = Layout::new(instance);
    let panel: Vec<f64> = (0..n_samples * layout.m()).map(|_| rng.gen::<f64>()).collect();
    Ok(estimate_on_panel(&layout, alpha.as_slice(), eps, &panel, false).0)
}

/// `clamp(alpha_i + damping * (V_i - P_i), 1, A)`.
pub fn fixed_point_step(
    instance: &AuctionInstance<f64>,
    alpha: &MultiplierVector<f64>,
    est: &SmoothedEstimate,
    damping: f64,
) -> MultiplierVector<f64> {
    let cap = *instance.cap();
    let next = (0..alpha.len())
        .map(|i| (alpha[i] + damping * est.net(i)).clamp(1.0, cap))
        .collect();
    MultiplierVector::new(next, instance).expect("clamped into range")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub restart: usize,
    pub stage: usize,
    pub iter: usize,
    pub eps: f64,
    pub residual: f64,
    pub alpha: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolverStatus {
    Converged,
    NonConverged { best_residual: f64 },
}

impl SolverStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, SolverStatus::Converged)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartSummary {
    pub index: usize,
    pub initial_alpha: Vec<f64>,
    pub final_alpha: Vec<f64>,
    pub residual: f64,
    /// Every coordinate met the residual or bracketing criterion.
    pub met_tolerance: bool,
    pub verified: bool,
    pub violation: f64,
}

#[derive(Clone, Debug)]
pub struct SolverOutcome {
    pub status: SolverStatus,
    pub candidate: EquilibriumCandidate<Rational>,
    /// Index of the restart that produced `candidate` (0 is the all-ones
    /// start).
    pub restart: usize,
    pub residual: f64,
    pub std_err: Vec<f64>,
    pub verify_tolerance: f64,
    pub restarts: Vec<RestartSummary>,
    pub trace: Vec<TraceRecord>,
    pub exact_ties: u64,
    pub relaxed_roi_violations: u64,
}

impl SolverOutcome {
    /// Diagnostics as line-delimited JSON records.
    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace serialises") + "\n")
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
enum StepMode {
    Proportional,
    /// Sign steps of size `h` once the net payoff changed sign.
    Bracketing { h: f64, h_max: f64 },
}

struct Attempt {
    alpha: Vec<f64>,
    residual: f64,
    met_tolerance: bool,
    estimate: SmoothedEstimate,
    stats: Partial,
}

fn residuals(alpha: &[f64], est: &SmoothedEstimate, cap: f64) -> Vec<f64> {
    alpha
        .iter()
        .enumerate()
        .map(|(i, a)| ((a + est.net(i)).clamp(1.0, cap) - a).abs())
        .collect()
}

fn stage_rng(seed: u64, restart: usize, stage: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((restart as u64) << 32) | stage as u64);
    rng
}

fn run_attempt(
    instance: &AuctionInstance<f64>,
    layout: &Layout,
    config: &SolverConfig,
    restart: usize,
    start: Vec<f64>,
    trace: &mut Vec<TraceRecord>,
) -> Attempt {
    let n = instance.num_bidders();
    let cap = *instance.cap();
    let fp_tol = config.fp_tol_for(instance);
    let scale = SolverConfig::scale(instance);
    let top_value: Vec<f64> = instance
        .values()
        .iter()
        .map(|v| v.first().copied().filter(|x| *x > 0.0).unwrap_or(scale))
        .collect();
    let schedule = config.schedule(instance);
    let mut alpha = start;
    let mut modes = vec![StepMode::Proportional; n];
    let mut last = None;

    for (stage, &eps) in schedule.iter().enumerate() {
        let mut rng = stage_rng(config.seed, restart, stage);
        let panel = draw_panel(&mut rng, config.samples_per_eval, layout.m());
        let alpha_tol = 0.01 * fp_tol.min(eps) / scale;
        for (i, mode) in modes.iter_mut().enumerate() {
            if let StepMode::Bracketing { h, .. } = mode {
                let widened = h.max(eps / top_value[i]);
                *mode = StepMode::Bracketing { h: widened, h_max: widened };
            }
        }
        let mut prev_net: Option<Vec<f64>> = None;
        for iter in 0..config.max_iters_per_stage {
            let (est, stats) = estimate_on_panel(layout, &alpha, eps, &panel, false);
            let res = residuals(&alpha, &est, cap);
            let residual = res.iter().copied().fold(0.0, f64::max);
            trace.push(TraceRecord { restart, stage, iter, eps, residual, alpha: alpha.clone() });
            let done: Vec<bool> = (0..n)
                .map(|i| res[i] < fp_tol || matches!(modes[i], StepMode::Bracketing { h, .. } if h < alpha_tol))
                .collect();
            let all_done = done.iter().all(|d| *d);
            let net: Vec<f64> = (0..n).map(|i| est.net(i)).collect();
            last = Some((residual, all_done, est, stats));
            if all_done {
                break;
            }
            for i in 0..n {
                if res[i] == 0.0 {
                    continue;
                }
                let flipped = prev_net.as_ref().is_some_and(|p| p[i] * net[i] < 0.0);
                let step = match (modes[i], flipped) {
                    (StepMode::Proportional, false) => config.damping * net[i],
                    (StepMode::Proportional, true) => {
                        let h = (config.damping * net[i].abs()).min(config.damping * prev_net.as_ref().unwrap()[i].abs()) / 2.0;
                        modes[i] = StepMode::Bracketing { h, h_max: h };
                        h * net[i].signum()
                    }
                    (StepMode::Bracketing { h, h_max }, flipped) => {
                        let h = if flipped { h / 2.0 } else { (h * 1.2).min(h_max) };
                        modes[i] = StepMode::Bracketing { h, h_max };
                        h * net[i].signum()
                    }
                };
                alpha[i] = (alpha[i] + step).clamp(1.0, cap);
            }
            prev_net = Some(net);
        }
    }

    let eps = *schedule.last().expect("at least one stage");
    let mut rng = stage_rng(config.seed, restart, schedule.len() - 1);
    let panel = draw_panel(&mut rng, config.samples_per_eval, layout.m());
    let (estimate, stats) = estimate_on_panel(layout, &alpha, eps, &panel, true);
    let (residual, met_tolerance, _, _) = last.expect("at least one iteration");
    Attempt { alpha, residual, met_tolerance, estimate, stats }
}

/// Snaps multipliers onto `1`, `A`, or bid crossings with already-fixed
/// bidders when within `delta` bid units.
fn snap_multipliers(exact: &AuctionInstance<Rational>, alpha: &[f64], delta: f64) -> Result<Vec<Rational>> {
    let n = exact.num_bidders();
    let one = Rational::from_integer(1.into());
    let cap = exact.cap().clone();
    let values_f: Vec<Vec<f64>> = exact.values().iter().map(|v| v.iter().map(|x| x.to_f64()).collect()).collect();
    let mut fixed: Vec<Option<Rational>> = vec![None; n];
    for i in 0..n {
        let top = values_f[i].first().copied().unwrap_or(0.0);
        if top == 0.0 || (alpha[i] - 1.0) * top <= delta {
            fixed[i] = Some(one.clone());
        } else if (cap.to_f64() - alpha[i]) * top <= delta {
            fixed[i] = Some(cap.clone());
        }
    }
    while fixed.iter().any(Option::is_none) {
        let mut best: Option<(f64, usize, Rational)> = None;
        for i in (0..n).filter(|&i| fixed[i].is_none()) {
            for (j, v) in exact.values()[i].iter().enumerate() {
                if values_f[i][j] == 0.0 {
                    continue;
                }
                for (o, a_o) in fixed.iter().enumerate().filter_map(|(o, a)| a.as_ref().map(|a| (o, a))) {
                    for w in &exact.values()[o] {
                        let beta = a_o.clone() * w.clone();
                        let target = beta.clone() / v.clone();
                        if target < one || target > cap {
                            continue;
                        }
                        let dist = (alpha[i] * values_f[i][j] - beta.to_f64()).abs();
                        if dist <= delta && best.as_ref().is_none_or(|(d, _, _)| dist < *d) {
                            best = Some((dist, i, target));
                        }
                    }
                }
            }
        }
        match best {
            Some((_, i, target)) => fixed[i] = Some(target),
            None => {
                let i = fixed.iter().position(Option::is_none).expect("some bidder unfixed");
                let own = rational_from_f64(alpha[i])?;
                fixed[i] = Some(if own < one { one.clone() } else if own > cap { cap.clone() } else { own });
            }
        }
    }
    Ok(fixed.into_iter().map(|a| a.expect("all fixed")).collect())
}

/// Re-sorts each sampled ranking by the unperturbed bids, keeping the
/// sampled order within ties, and turns counts into probabilities.
fn project_distribution(
    exact: &AuctionInstance<Rational>,
    bids: &BidProfile<Rational>,
    layout: &Layout,
    counts: &BTreeMap<Vec<u32>, u64>,
    draws: usize,
) -> Result<TieBreakDistribution<Rational>> {
    let mut merged: BTreeMap<Vec<ItemId>, u64> = BTreeMap::new();
    for (order, c) in counts {
        let mut ranking: Vec<ItemId> = order.iter().map(|&k| layout.items[k as usize]).collect();
        ranking.sort_by(|x, y| bids.bid(*y).cmp(bids.bid(*x)));
        *merged.entry(ranking).or_insert(0) += c;
    }
    if merged.is_empty() {
        merged.insert(Vec::new(), draws as u64);
    }
    let denom = Rational::from_integer((draws as u64).into());
    let support = merged
        .into_iter()
        .map(|(ranking, c)| {
            let a = Allocation::new(ranking, exact)?;
            Ok((a, Rational::from_integer(c.into()) / denom.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    TieBreakDistribution::new(support)
}

/// Searches for an equilibrium of `instance`, trying the all-ones start and
/// then random starts until one converges and verifies.
pub fn solve(instance: &AuctionInstance<Rational>, config: &SolverConfig) -> Result<SolverOutcome> {
    config.validate()?;
    let float = instance.convert::<f64>()?;
    let layout = Layout::new(&float);
    let n = float.num_bidders();
    let cap = *float.cap();
    let fp_tol = config.fp_tol_for(&float);
    let eps_final = *config.schedule(&float).last().expect("at least one stage");
    let delta = 2.0 * eps_final + fp_tol;

    let mut start_rng = ChaCha8Rng::seed_from_u64(config.seed);
    start_rng.set_stream(u64::MAX);
    let mut trace = Vec::new();
    let mut summaries = Vec::new();
    let mut best: Option<(bool, f64, usize, EquilibriumCandidate<Rational>, Attempt, f64)> = None;
    let mut exact_ties = 0;
    let mut roi_violations = 0;

    for restart in 0..=config.restarts {
        let start: Vec<f64> = if restart == 0 {
            vec![1.0; n]
        } else {
            (0..n).map(|_| 1.0 + (cap - 1.0) * start_rng.gen::<f64>()).collect()
        };
        let attempt = run_attempt(&float, &layout, config, restart, start.clone(), &mut trace);
        exact_ties += attempt.stats.ties;
        roi_violations += attempt.stats.relaxed_roi_violations;

        let alpha_exact = MultiplierVector::new(snap_multipliers(instance, &attempt.alpha, delta)?, instance)?;
        let bids = induce_bids(instance, &alpha_exact)?;
        let pi = project_distribution(instance, &bids, &layout, &attempt.stats.counts, attempt.estimate.draws)?;
        let max_se = attempt.estimate.std_err.iter().copied().fold(0.0, f64::max);
        let tol = 3.0 * max_se + fp_tol;
        let report = verify(instance, &alpha_exact, &pi, rational_from_f64(tol)?)?;
        let verified = report.is_pass();
        let violation = report.violation(instance, &alpha_exact);
        summaries.push(RestartSummary {
            index: restart,
            initial_alpha: start,
            final_alpha: attempt.alpha.clone(),
            residual: attempt.residual,
            met_tolerance: attempt.met_tolerance,
            verified,
            violation,
        });
        let converged = attempt.met_tolerance && verified;
        let candidate = EquilibriumCandidate { alpha: alpha_exact, pi, report };
        let better = match &best {
            None => true,
            Some((bc, bv, _, bcand, _, _)) => {
                (converged, verified, -violation) > (*bc, bcand.report.is_pass(), -*bv)
            }
        };
        if better {
            best = Some((converged, violation, restart, candidate, attempt, tol));
        }
        if converged {
            break;
        }
    }

    let (converged, _, restart, candidate, attempt, tol) = best.expect("at least one attempt");
    let best_residual = summaries.iter().map(|s| s.residual).fold(f64::INFINITY, f64::min);
    let status = if converged { SolverStatus::Converged } else { SolverStatus::NonConverged { best_residual } };
    Ok(SolverOutcome {
        status,
        candidate,
        restart,
        residual: attempt.residual,
        std_err: attempt.estimate.std_err,
        verify_tolerance: tol,
        restarts: summaries,
        trace,
        exact_ties,
        relaxed_roi_violations: roi_violations,
    })
}
