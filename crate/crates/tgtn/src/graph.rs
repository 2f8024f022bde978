//! The transaction graph: nodes are individual transactions, edges link
//! transactions that share a card or merchant within a bounded time gap.
//!
//! Two construction routes exist on purpose. [`build_graph`] is an
//! independent batch algorithm over a full sorted list, while
//! [`TxGraph::add_transaction`] grows a graph one arrival at a time and
//! [`TxGraph::evict_before`] shrinks it from the old end. The streaming
//! pipeline uses the incremental route and the test suite holds it equal to
//! the batch route edge-for-edge; neither path is implemented in terms of
//! the other.
//!
//! # Degree cap
//!
//! Each node ranks its rule-satisfying candidates by recency — larger
//! timestamp first, ties broken by smaller `tx_id` — and keeps the top
//! `degree_cap` as its *slot set* `K_i`. An edge `(i, j)` exists iff
//! `j ∈ K_i` **and** `i ∈ K_j`, i.e. the cap is applied symmetrically.
//! Because the ranking is by recency and eviction removes the oldest
//! nodes, evicting a time prefix removes a suffix of every ranking, so the
//! surviving slot sets are exactly `K_i ∩ survivors` — no node can re-enter
//! a cap it had been pushed out of. That is why in-place eviction equals a
//! batch rebuild over the survivors.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Matrix;
use crate::txgen::{Label, Transaction};

/// Fixed scale applied to `log1p(amount)`. At 1.0 the log keeps typical
/// consumer amounts near the one-hot magnitude while its increments stay
/// meaningful: halving or doubling an amount moves the feature by ln 2,
/// which is the same order as a one-hot flip, so amount differences are
/// not drowned by the categorical dims.
pub const AMOUNT_LOG_SCALE: f64 = 1.0;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("transactions not sorted by timestamp at position {index}")]
    Unsorted { index: usize },
    #[error("out-of-order transaction: timestamp {tx_ts} is older than newest node {max_ts}")]
    OutOfOrder { tx_ts: i64, max_ts: i64 },
    #[error("node index {index} out of range for graph of {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Feature encoder configuration. Categorical ids are hashed with FNV-1a
/// (64-bit) into fixed one-hot bucket blocks, so the encoding needs no
/// vocabulary and is identical across runs and platforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub card_buckets: usize,
    pub merchant_buckets: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { card_buckets: 64, merchant_buckets: 64 }
    }
}

impl EncoderConfig {
    /// Input feature width: card one-hot + merchant one-hot + amount +
    /// time-of-day sin/cos.
    pub fn d_in(&self) -> usize {
        self.card_buckets + self.merchant_buckets + 3
    }
}

/// FNV-1a 64-bit hash; fixed constants keep bucket assignment portable.
fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Encode one transaction as a dense feature vector of length
/// [`EncoderConfig::d_in`]: one-hot hashed card bucket, one-hot hashed
/// merchant bucket, scaled `log1p` of the amount, and the sin/cos of the
/// time-of-day angle `2π · seconds_into_day / 86400`.
pub fn encode_features(tx: &Transaction, enc: &EncoderConfig) -> Vec<f64> {
    let mut v = vec![0.0; enc.d_in()];
    let cb = (fnv1a(&tx.card_id) % enc.card_buckets as u64) as usize;
    let mb = (fnv1a(&tx.merchant_id) % enc.merchant_buckets as u64) as usize;
    v[cb] = 1.0;
    v[enc.card_buckets + mb] = 1.0;
    let base = enc.card_buckets + enc.merchant_buckets;
    v[base] = tx.amount.to_f64().ln_1p() * AMOUNT_LOG_SCALE;
    let secs_into_day = tx.timestamp.rem_euclid(86_400) as f64;
    let angle = 2.0 * std::f64::consts::PI * secs_into_day / 86_400.0;
    v[base + 1] = angle.sin();
    v[base + 2] = angle.cos();
    v
}

/// Edge construction rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRule {
    pub link_on_shared_card: bool,
    pub link_on_shared_merchant: bool,
    /// Two transactions may be linked only if their timestamps differ by at
    /// most this many seconds.
    pub max_gap_seconds: i64,
    /// Maximum neighbors retained per node, by recency.
    pub degree_cap: usize,
}

impl Default for EdgeRule {
    fn default() -> Self {
        EdgeRule {
            link_on_shared_card: true,
            link_on_shared_merchant: true,
            max_gap_seconds: 7 * 86_400,
            degree_cap: 32,
        }
    }
}

impl EdgeRule {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_gap_seconds <= 0 {
            return Err("max_gap_seconds must be positive".to_string());
        }
        if self.degree_cap == 0 {
            return Err("degree_cap must be at least 1".to_string());
        }
        Ok(())
    }
}

/// Recency ranking used for slot sets: larger timestamp first, then smaller
/// tx_id. Returns true when `a` outranks `b`.
fn outranks(a: (i64, u64), b: (i64, u64)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// The transaction graph. Node order is insertion order, which both
/// construction routes keep aligned with timestamp order (non-decreasing).
#[derive(Clone, Debug)]
pub struct TxGraph {
    node_ids: Vec<u64>,
    timestamps: Vec<i64>,
    labels: Vec<Label>,
    cards: Vec<String>,
    merchants: Vec<String>,
    x: Matrix,
    /// Sorted neighbor lists; symmetric, no self-loops.
    adj: Vec<Vec<usize>>,
    /// Slot set `K_i` per node, kept in ranking order (best first).
    slots: Vec<Vec<usize>>,
    card_index: HashMap<String, Vec<usize>>,
    merchant_index: HashMap<String, Vec<usize>>,
}

impl TxGraph {
    /// Empty graph whose feature matrix has `enc.d_in()` columns.
    pub fn empty(enc: &EncoderConfig) -> Self {
        TxGraph {
            node_ids: Vec::new(),
            timestamps: Vec::new(),
            labels: Vec::new(),
            cards: Vec::new(),
            merchants: Vec::new(),
            x: Matrix::zeros(0, enc.d_in()),
            adj: Vec::new(),
            slots: Vec::new(),
            card_index: HashMap::new(),
            merchant_index: HashMap::new(),
        }
    }

    /// Test/inference constructor from raw pieces. Neighbor lists are
    /// sorted and must describe a symmetric relation without self-loops.
    /// Graphs built this way support the read API and the model's forward
    /// pass, but not incremental mutation (slot sets are not derived).
    pub fn from_parts(
        node_ids: Vec<u64>,
        timestamps: Vec<i64>,
        labels: Vec<Label>,
        x: Matrix,
        mut adj: Vec<Vec<usize>>,
    ) -> Self {
        let n = node_ids.len();
        assert_eq!(timestamps.len(), n);
        assert_eq!(labels.len(), n);
        assert_eq!(x.rows(), n);
        assert_eq!(adj.len(), n);
        for (i, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            assert!(!list.contains(&i), "self-loop at node {i}");
        }
        for i in 0..n {
            for &j in &adj[i] {
                assert!(adj[j].binary_search(&i).is_ok(), "asymmetric edge ({i}, {j})");
            }
        }
        TxGraph {
            node_ids,
            timestamps,
            labels,
            cards: vec![String::new(); n],
            merchants: vec![String::new(); n],
            x,
            adj,
            slots: vec![Vec::new(); n],
            card_index: HashMap::new(),
            merchant_index: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn node_ids(&self) -> &[u64] {
        &self.node_ids
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn features(&self) -> &Matrix {
        &self.x
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Sorted adjacent node indices.
    pub fn neighbors(&self, i: usize) -> Result<&[usize], GraphError> {
        self.adj
            .get(i)
            .map(Vec::as_slice)
            .ok_or(GraphError::IndexOutOfRange { index: i, len: self.len() })
    }

    /// All edges as `(i, j)` with `i < j`, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (i, list) in self.adj.iter().enumerate() {
            for &j in list {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Candidate node indices for a would-be node with the given entities
    /// and timestamp: retained nodes sharing an enabled entity within the
    /// gap. Sorted ascending, deduplicated.
    fn candidates_for(&self, card: &str, merchant: &str, ts: i64, rule: &EdgeRule) -> Vec<usize> {
        let mut cand: Vec<usize> = Vec::new();
        let cutoff = ts - rule.max_gap_seconds;
        if rule.link_on_shared_card {
            if let Some(list) = self.card_index.get(card) {
                // Lists are ascending in insertion (time) order; scan the
                // recent tail only.
                for &j in list.iter().rev() {
                    if self.timestamps[j] < cutoff {
                        break;
                    }
                    cand.push(j);
                }
            }
        }
        if rule.link_on_shared_merchant {
            if let Some(list) = self.merchant_index.get(merchant) {
                for &j in list.iter().rev() {
                    if self.timestamps[j] < cutoff {
                        break;
                    }
                    cand.push(j);
                }
            }
        }
        cand.sort_unstable();
        cand.dedup();
        cand
    }

    fn rank_key(&self, i: usize) -> (i64, u64) {
        (self.timestamps[i], self.node_ids[i])
    }

    /// Insert `n` into node `j`'s slot set if it ranks within the cap.
    /// Returns the node evicted from the cap, if any.
    fn slot_insert(&mut self, j: usize, n: usize, cap: usize) -> Option<usize> {
        let key = self.rank_key(n);
        let pos = self.slots[j]
            .iter()
            .position(|&m| !outranks(self.rank_key(m), key))
            .unwrap_or(self.slots[j].len());
        if pos >= cap {
            return None;
        }
        self.slots[j].insert(pos, n);
        if self.slots[j].len() > cap {
            self.slots[j].pop()
        } else {
            None
        }
    }

    fn remove_edge(&mut self, a: usize, b: usize) {
        if let Ok(p) = self.adj[a].binary_search(&b) {
            self.adj[a].remove(p);
            let q = self.adj[b].binary_search(&a).expect("adjacency symmetric");
            self.adj[b].remove(q);
        }
    }

    /// Append one transaction in stream order. Its timestamp must be at
    /// least the newest node's; older arrivals are rejected with
    /// [`GraphError::OutOfOrder`] so the caller can apply a late-event
    /// policy. Returns the new node's index.
    pub fn add_transaction(
        &mut self,
        tx: &Transaction,
        rule: &EdgeRule,
        enc: &EncoderConfig,
    ) -> Result<usize, GraphError> {
        if let Some(&max_ts) = self.timestamps.last() {
            if tx.timestamp < max_ts {
                return Err(GraphError::OutOfOrder { tx_ts: tx.timestamp, max_ts });
            }
        }
        let n = self.len();
        let cand = self.candidates_for(&tx.card_id, &tx.merchant_id, tx.timestamp, rule);

        self.node_ids.push(tx.tx_id);
        self.timestamps.push(tx.timestamp);
        self.labels.push(tx.label);
        self.cards.push(tx.card_id.clone());
        self.merchants.push(tx.merchant_id.clone());
        self.x.push_row(&encode_features(tx, enc));
        self.adj.push(Vec::new());

        // K_n: the cap best-ranked candidates.
        let mut ranked = cand.clone();
        ranked.sort_by(|&a, &b| {
            if outranks(self.rank_key(a), self.rank_key(b)) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        });
        ranked.truncate(rule.degree_cap);
        self.slots.push(ranked.clone());

        // n becomes a candidate of every node in `cand`; update their slot
        // sets, dropping edges whose far end falls out of a cap.
        for &j in &cand {
            if let Some(w) = self.slot_insert(j, n, rule.degree_cap) {
                self.remove_edge(j, w);
            }
        }

        // Mutual-cap edges for the new node. Appending n (the largest
        // index) keeps the neighbor lists sorted.
        for &j in &ranked {
            if self.slots[j].contains(&n) {
                self.adj[j].push(n);
                self.adj[n].push(j);
            }
        }
        self.adj[n].sort_unstable();

        self.card_index.entry(tx.card_id.clone()).or_default().push(n);
        self.merchant_index.entry(tx.merchant_id.clone()).or_default().push(n);
        Ok(n)
    }

    /// Remove every node with `timestamp < cutoff_ts` (a prefix, since node
    /// order is non-decreasing in time) together with its incident edges.
    /// Surviving node order is preserved and, because cap rankings are by
    /// recency (see the module docs), the result equals a batch rebuild
    /// over the surviving transactions.
    pub fn evict_before(&mut self, cutoff_ts: i64) {
        let k = self.timestamps.partition_point(|&t| t < cutoff_ts);
        if k == 0 {
            return;
        }
        self.node_ids.drain(0..k);
        self.timestamps.drain(0..k);
        self.labels.drain(0..k);
        self.cards.drain(0..k);
        self.merchants.drain(0..k);
        self.x.drop_front_rows(k);
        self.adj.drain(0..k);
        self.slots.drain(0..k);
        let remap = |list: &mut Vec<usize>| {
            list.retain(|&j| j >= k);
            for j in list.iter_mut() {
                *j -= k;
            }
        };
        for list in &mut self.adj {
            remap(list);
        }
        for list in &mut self.slots {
            remap(list);
        }
        self.card_index.retain(|_, list| {
            remap(list);
            !list.is_empty()
        });
        self.merchant_index.retain(|_, list| {
            remap(list);
            !list.is_empty()
        });
    }

    /// Debug dump: one `i j` line per edge.
    pub fn edge_list_text(&self) -> String {
        let mut out = String::new();
        for (i, j) in self.edges() {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }

    /// Debug sidecar: node ids and timestamps as JSON.
    pub fn sidecar_json(&self) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            node_ids: &'a [u64],
            timestamps: &'a [i64],
        }
        serde_json::to_string_pretty(&Sidecar {
            node_ids: &self.node_ids,
            timestamps: &self.timestamps,
        })
        .expect("sidecar serializes")
    }
}

/// Batch construction over a timestamp-sorted transaction list. This is an
/// independent algorithm from [`TxGraph::add_transaction`]: it computes
/// every node's candidate set over the whole list (looking both directions
/// in time), caps by recency rank, and links mutually capped pairs.
pub fn build_graph(
    txs: &[Transaction],
    rule: &EdgeRule,
    enc: &EncoderConfig,
) -> Result<TxGraph, GraphError> {
    for i in 1..txs.len() {
        if txs[i].timestamp < txs[i - 1].timestamp {
            return Err(GraphError::Unsorted { index: i });
        }
    }
    let n = txs.len();
    let mut g = TxGraph::empty(enc);
    let mut x = Matrix::zeros(0, enc.d_in());
    for tx in txs {
        g.node_ids.push(tx.tx_id);
        g.timestamps.push(tx.timestamp);
        g.labels.push(tx.label);
        g.cards.push(tx.card_id.clone());
        g.merchants.push(tx.merchant_id.clone());
        x.push_row(&encode_features(tx, enc));
    }
    g.x = x;
    for i in 0..n {
        g.card_index.entry(txs[i].card_id.clone()).or_default().push(i);
        g.merchant_index.entry(txs[i].merchant_id.clone()).or_default().push(i);
    }

    // Candidate sets over the full list: for node i, every j != i sharing
    // an enabled entity with |ts_i - ts_j| <= max_gap.
    let mut slots: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut cand: Vec<usize> = Vec::new();
        let mut scan = |list: Option<&Vec<usize>>| {
            if let Some(list) = list {
                for &j in list {
                    if j != i && (g.timestamps[i] - g.timestamps[j]).abs() <= rule.max_gap_seconds {
                        cand.push(j);
                    }
                }
            }
        };
        if rule.link_on_shared_card {
            scan(g.card_index.get(&g.cards[i]));
        }
        if rule.link_on_shared_merchant {
            scan(g.merchant_index.get(&g.merchants[i]));
        }
        cand.sort_unstable();
        cand.dedup();
        cand.sort_by(|&a, &b| {
            if outranks(g.rank_key(a), g.rank_key(b)) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        });
        cand.truncate(rule.degree_cap);
        slots.push(cand);
    }
    g.slots = slots;

    // Edge (i, j) iff each is in the other's slot set.
    g.adj = vec![Vec::new(); n];
    for i in 0..n {
        for idx in 0..g.slots[i].len() {
            let j = g.slots[i][idx];
            if j > i && g.slots[j].contains(&i) {
                g.adj[i].push(j);
                g.adj[j].push(i);
            }
        }
    }
    for list in &mut g.adj {
        list.sort_unstable();
    }
    Ok(g)
}
