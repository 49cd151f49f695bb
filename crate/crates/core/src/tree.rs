//! Merge trees: the ordered record of pair merges produced by the engine.

use serde::{Deserialize, Serialize};

use crate::data::{DataError, WordMap};

/// One merge step. `level` is the codebook size before the merge; nodes `a`
/// and `b` (with `a < b`) are replaced by node `new_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub level: usize,
    pub a: usize,
    pub b: usize,
    #[serde(rename = "new")]
    pub new_id: usize,
    pub loss: f64,
}

/// A full merge history over an initial codebook of `initial_size` words.
///
/// Original words are nodes `0..initial_size`; the k-th merge (0-based)
/// happens at level `initial_size - k` and creates node `initial_size + k`.
/// Cutting the tree at size `k` replays the first `initial_size - k` merges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTree {
    pub initial_size: usize,
    pub merges: Vec<MergeEvent>,
}

impl MergeTree {
    /// Validates the structural invariants of the event list: levels count
    /// down from `initial_size`, each new id extends the node space by one,
    /// and every merged node was live at its merge level.
    pub fn validate(&self) -> Result<(), String> {
        let t0 = self.initial_size;
        let mut dead = vec![false; t0 + self.merges.len()];
        for (k, ev) in self.merges.iter().enumerate() {
            if ev.level != t0 - k {
                return Err(format!(
                    "merge {k}: level {} but expected {}",
                    ev.level,
                    t0 - k
                ));
            }
            if ev.new_id != t0 + k {
                return Err(format!(
                    "merge {k}: new id {} but expected {}",
                    ev.new_id,
                    t0 + k
                ));
            }
            if ev.a >= ev.b {
                return Err(format!("merge {k}: nodes not ordered ({}, {})", ev.a, ev.b));
            }
            if ev.b >= t0 + k {
                return Err(format!("merge {k}: node {} not yet created", ev.b));
            }
            for node in [ev.a, ev.b] {
                if dead[node] {
                    return Err(format!("merge {k}: node {node} already merged"));
                }
                dead[node] = true;
            }
        }
        Ok(())
    }

    /// Codebook size after all recorded merges.
    pub fn final_size(&self) -> usize {
        self.initial_size - self.merges.len()
    }

    /// Replays the first `initial_size - k` merges and returns the word map
    /// at codebook size `k`. Clusters are numbered `0..k` in order of the
    /// smallest original word they contain.
    pub fn cut(&self, k: usize) -> Result<WordMap, DataError> {
        let t0 = self.initial_size;
        if k < self.final_size() || k > t0 {
            return Err(DataError::Shape(format!(
                "cut size {k} outside recorded range {}..={}",
                self.final_size(),
                t0
            )));
        }
        let steps = t0 - k;
        let mut parent: Vec<usize> = (0..t0 + steps).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for ev in &self.merges[..steps] {
            let ra = find(&mut parent, ev.a);
            let rb = find(&mut parent, ev.b);
            parent[ra] = ev.new_id;
            parent[rb] = ev.new_id;
        }
        // order clusters by their smallest original word
        let mut cluster_of_root = std::collections::HashMap::new();
        let mut assign = vec![usize::MAX; t0];
        let mut next = 0usize;
        for word in 0..t0 {
            let root = find(&mut parent, word);
            let cluster = *cluster_of_root.entry(root).or_insert_with(|| {
                let c = next;
                next += 1;
                c
            });
            assign[word] = cluster;
        }
        debug_assert_eq!(next, k);
        WordMap::new(assign, k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("merge tree serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
