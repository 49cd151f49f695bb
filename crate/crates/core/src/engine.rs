//! Greedy agglomerative merging loop. Each level evaluates the criterion on
//! every live pair of word slots, merges the argmin pair (ties broken toward
//! the lexicographically smallest node-id pair within an absolute window of
//! 1e-12), records a [`MergeEvent`], and repeats until `min_size` words
//! remain.
//!
//! Two candidate cache policies produce identical trees: `full_rescan`
//! reevaluates every pair at every level; `lazy_heap` keeps a priority queue
//! of scored pairs and, for criteria whose scores of untouched pairs survive
//! a merge, only rescores pairs involving the merged slot. Criteria that
//! re-estimate global state each level invalidate the whole queue.
//!
//! Pair evaluations within a level run in parallel over an immutable
//! criterion snapshot; the argmin reduction is index-ordered, so the result
//! does not depend on the worker count.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, CriteriaConfig};
use crate::criteria::{make_criterion, Criterion, CriterionError, CriterionKind, StaleScope};
use crate::data::{DataError, HistogramDataset, WordMap};
use crate::tree::{MergeEvent, MergeTree};

/// Losses within this absolute window of the minimum count as tied.
pub const TIE_WINDOW: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    FullRescan,
    #[default]
    LazyHeap,
}

impl CachePolicy {
    pub fn name(self) -> &'static str {
        match self {
            CachePolicy::FullRescan => "full_rescan",
            CachePolicy::LazyHeap => "lazy_heap",
        }
    }
}

impl FromStr for CachePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full_rescan" => Ok(CachePolicy::FullRescan),
            "lazy_heap" => Ok(CachePolicy::LazyHeap),
            other => Err(format!(
                "unknown cache policy {other:?}, expected full_rescan or lazy_heap"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub criterion: CriterionKind,
    /// Stop when this many words remain. Must satisfy `1 <= min_size < t`.
    pub min_size: usize,
    /// Advisory: whether callers should emit the per-level loss CSV. The
    /// tree itself always records losses.
    pub record_losses: bool,
    pub cache_policy: CachePolicy,
    pub criteria: CriteriaConfig,
}

impl EngineConfig {
    pub fn new(criterion: CriterionKind) -> Self {
        Self {
            criterion,
            min_size: 1,
            record_losses: true,
            cache_policy: CachePolicy::default(),
            criteria: CriteriaConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("min_size {min_size} must be at least 1 and smaller than the {t} words")]
    BadMinSize { min_size: usize, t: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("criterion failed at level {level}: {source}")]
    Criterion {
        level: usize,
        #[source]
        source: CriterionError,
        /// Merges completed before the failure.
        partial: MergeTree,
    },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Book-keeping shared by both cache policies: which slots are live and
/// which node currently occupies each slot.
struct Slots {
    node_id: Vec<usize>,
    live: Vec<bool>,
}

impl Slots {
    fn new(t: usize) -> Self {
        Self {
            node_id: (0..t).collect(),
            live: vec![true; t],
        }
    }

    /// Live slots ordered by their current node id.
    fn ordered(&self) -> Vec<usize> {
        let mut slots: Vec<usize> = (0..self.live.len()).filter(|&s| self.live[s]).collect();
        slots.sort_by_key(|&s| self.node_id[s]);
        slots
    }

    /// All live pairs in lexicographic node-id order, as
    /// `(slot_a, slot_b)` with `node_id[slot_a] < node_id[slot_b]`.
    fn ordered_pairs(&self) -> Vec<(usize, usize)> {
        let slots = self.ordered();
        let mut pairs = Vec::with_capacity(slots.len() * (slots.len() - 1) / 2);
        for (i, &p) in slots.iter().enumerate() {
            for &q in &slots[i + 1..] {
                pairs.push((p, q));
            }
        }
        pairs
    }
}

/// Evaluates the criterion on each pair, in parallel, preserving order.
/// On failure returns the error of the first pair in candidate order.
fn evaluate_pairs(
    criterion: &dyn Criterion,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>, CriterionError> {
    let results: Vec<Result<f64, CriterionError>> = pairs
        .par_iter()
        .map(|&(p, q)| criterion.pair_loss(p, q))
        .collect();
    let mut losses = Vec::with_capacity(results.len());
    for result in results {
        losses.push(result?);
    }
    Ok(losses)
}

/// Index of the winning pair: minimal loss, ties within [`TIE_WINDOW`]
/// resolved toward the earliest pair in (already lexicographic) order.
fn select(losses: &[f64]) -> usize {
    let mut min = f64::INFINITY;
    for &loss in losses {
        if loss.total_cmp(&min) == Ordering::Less {
            min = loss;
        }
    }
    let cutoff = min + TIE_WINDOW;
    losses
        .iter()
        .position(|&loss| loss <= cutoff)
        .expect("at least one candidate pair")
}

/// A scored candidate pair in the lazy queue. Ordered ascending by
/// `(loss, a, b)`; generation counters detect entries whose slots changed
/// after scoring.
struct Entry {
    loss: f64,
    a: usize,
    b: usize,
    slot_a: usize,
    slot_b: usize,
    gen_a: u64,
    gen_b: u64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the smallest entry is on top
        other
            .loss
            .total_cmp(&self.loss)
            .then(other.a.cmp(&self.a))
            .then(other.b.cmp(&self.b))
    }
}

struct LazyQueue {
    heap: BinaryHeap<Entry>,
    gens: Vec<u64>,
}

impl LazyQueue {
    fn new(t: usize) -> Self {
        Self {
            heap: BinaryHeap::new(),
            gens: vec![0; t],
        }
    }

    fn valid(&self, entry: &Entry, slots: &Slots) -> bool {
        slots.live[entry.slot_a]
            && slots.live[entry.slot_b]
            && self.gens[entry.slot_a] == entry.gen_a
            && self.gens[entry.slot_b] == entry.gen_b
    }

    fn push_scored(&mut self, slots: &Slots, pairs: &[(usize, usize)], losses: &[f64]) {
        for (&(p, q), &loss) in pairs.iter().zip(losses) {
            self.heap.push(Entry {
                loss,
                a: slots.node_id[p],
                b: slots.node_id[q],
                slot_a: p,
                slot_b: q,
                gen_a: self.gens[p],
                gen_b: self.gens[q],
            });
        }
    }

    /// Pops the winning pair under the tie rule: take the valid minimum,
    /// widen to everything within [`TIE_WINDOW`], choose the smallest
    /// `(a, b)`, and restore the rest.
    fn pop_selected(&mut self, slots: &Slots) -> Option<Entry> {
        let first = loop {
            let entry = self.heap.pop()?;
            if self.valid(&entry, slots) {
                break entry;
            }
        };
        let cutoff = first.loss + TIE_WINDOW;
        let mut window = vec![first];
        while let Some(top) = self.heap.peek() {
            if !self.valid(top, slots) {
                self.heap.pop();
                continue;
            }
            if top.loss <= cutoff {
                window.push(self.heap.pop().expect("peeked entry"));
            } else {
                break;
            }
        }
        let mut best = 0;
        for (i, entry) in window.iter().enumerate().skip(1) {
            let w = &window[best];
            if (entry.a, entry.b) < (w.a, w.b) {
                best = i;
            }
        }
        let selected = window.swap_remove(best);
        for entry in window {
            self.heap.push(entry);
        }
        Some(selected)
    }
}

/// Builds the full merge hierarchy of `ds` under `cfg`.
pub fn build_merge_tree(
    ds: &HistogramDataset,
    cfg: &EngineConfig,
) -> Result<MergeTree, EngineError> {
    cfg.criteria.validate()?;
    let t0 = ds.t();
    if cfg.min_size < 1 || cfg.min_size >= t0 {
        return Err(EngineError::BadMinSize {
            min_size: cfg.min_size,
            t: t0,
        });
    }
    let fail = |level: usize, source: CriterionError, merges: &[MergeEvent]| {
        EngineError::Criterion {
            level,
            source,
            partial: MergeTree {
                initial_size: t0,
                merges: merges.to_vec(),
            },
        }
    };
    let mut criterion =
        make_criterion(cfg.criterion, ds, &cfg.criteria).map_err(|e| fail(t0, e, &[]))?;
    let mut slots = Slots::new(t0);
    let mut merges: Vec<MergeEvent> = Vec::with_capacity(t0 - cfg.min_size);
    let mut queue = match cfg.cache_policy {
        CachePolicy::LazyHeap => Some(LazyQueue::new(t0)),
        CachePolicy::FullRescan => None,
    };

    for k in 0..(t0 - cfg.min_size) {
        let level = t0 - k;
        let selected = match queue.as_mut() {
            None => {
                let pairs = slots.ordered_pairs();
                let losses = evaluate_pairs(criterion.as_ref(), &pairs)
                    .map_err(|e| fail(level, e, &merges))?;
                let idx = select(&losses);
                let (p, q) = pairs[idx];
                (p, q, losses[idx])
            }
            Some(queue) => {
                let rebuild = if k == 0 {
                    true
                } else {
                    criterion.stale_scope() == StaleScope::All
                };
                if rebuild {
                    queue.heap.clear();
                    let pairs = slots.ordered_pairs();
                    let losses = evaluate_pairs(criterion.as_ref(), &pairs)
                        .map_err(|e| fail(level, e, &merges))?;
                    queue.push_scored(&slots, &pairs, &losses);
                }
                let entry = queue.pop_selected(&slots).expect("live pairs remain");
                (entry.slot_a, entry.slot_b, entry.loss)
            }
        };
        let (slot_a, slot_b, loss) = selected;
        let new_id = t0 + k;
        merges.push(MergeEvent {
            level,
            a: slots.node_id[slot_a],
            b: slots.node_id[slot_b],
            new_id,
            loss,
        });
        criterion
            .apply_merge(slot_a, slot_b)
            .map_err(|e| fail(level, e, &merges))?;
        slots.node_id[slot_a] = new_id;
        slots.live[slot_b] = false;
        if let Some(queue) = queue.as_mut() {
            queue.gens[slot_a] += 1;
            queue.gens[slot_b] += 1;
            if criterion.stale_scope() == StaleScope::TouchedOnly && k + 1 < t0 - cfg.min_size {
                // rescore only the pairs that involve the merged slot
                let pairs: Vec<(usize, usize)> = slots
                    .ordered()
                    .into_iter()
                    .filter(|&q| q != slot_a)
                    .map(|q| (q, slot_a))
                    .collect();
                let losses = evaluate_pairs(criterion.as_ref(), &pairs)
                    .map_err(|e| fail(level - 1, e, &merges))?;
                queue.push_scored(&slots, &pairs, &losses);
            }
        }
    }
    let tree = MergeTree {
        initial_size: t0,
        merges,
    };
    debug_assert!(tree.validate().is_ok());
    Ok(tree)
}

/// Builds a hierarchy by merging uniformly random live pairs; the baseline
/// against which informed criteria are compared. Recorded losses are 0.
pub fn build_random_tree(
    initial_size: usize,
    min_size: usize,
    seed: u64,
) -> Result<MergeTree, EngineError> {
    if min_size < 1 || min_size >= initial_size {
        return Err(EngineError::BadMinSize {
            min_size,
            t: initial_size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<usize> = (0..initial_size).collect();
    let mut merges = Vec::with_capacity(initial_size - min_size);
    for k in 0..(initial_size - min_size) {
        let i = rng.random_range(0..nodes.len());
        let mut j = rng.random_range(0..nodes.len() - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = (nodes[i].min(nodes[j]), nodes[i].max(nodes[j]));
        let new_id = initial_size + k;
        merges.push(MergeEvent {
            level: initial_size - k,
            a,
            b,
            new_id,
            loss: 0.0,
        });
        nodes.retain(|&id| id != a && id != b);
        nodes.push(new_id);
    }
    Ok(MergeTree {
        initial_size,
        merges,
    })
}

/// Cuts `tree` at size `k`, yielding the word map of the first
/// `initial_size - k` merges.
pub fn cut_tree(tree: &MergeTree, k: usize) -> Result<WordMap, DataError> {
    tree.cut(k)
}

/// Per-level loss table as CSV (`level,a,b,new,loss`).
pub fn loss_csv(tree: &MergeTree) -> String {
    let mut out = String::from("level,a,b,new,loss\n");
    for ev in &tree.merges {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            ev.level, ev.a, ev.b, ev.new_id, ev.loss
        ));
    }
    out
}
