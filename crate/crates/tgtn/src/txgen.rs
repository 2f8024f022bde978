//! Synthetic transaction corpora with injected fraud rings, plus dataset
//! I/O, temporal splitting, and negative sampling.
//!
//! Generation is a pure function of [`GenConfig`] (including its seed):
//! legitimate traffic is drawn per card as a time-homogeneous arrival
//! process of short shopping sessions (a constant session rate with a
//! geometric number of purchases per session) with log-normal amounts,
//! and each fraud ring compromises a set of cards from the regular pool
//! that all transact at a small set of shared merchants inside a short
//! burst window. Ring cards carry ordinary history before and after the
//! burst, and legitimate sessions make rapid same-card activity routine,
//! so rings are detectable through the joint structure — several cards
//! converging on the same merchants at once — not through any
//! per-transaction or per-card velocity feature alone.
//!
//! The legitimate economy is deliberately adversarial to shortcut
//! features: sellers open and close on short lifetimes (new merchant ids
//! are routine), openings and comebacks draw hype crowds (sudden traffic
//! at a quiet merchant is routine), and loyal co-shopping circles
//! repeatedly converge on their own niche sellers (a ring-shaped joint
//! footprint, stretched over days instead of minutes, is routine). What
//! remains distinctive about a ring is the conjunction: shared cards and
//! shared merchants *and* minutes-scale compression.
//!
//! The on-disk format is JSONL, one object per line with fields exactly
//! `tx_id, ts, card, merchant, amount, label`; amounts are fixed-point
//! strings with two decimals so files round-trip bit-exactly.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SeededRng;

#[derive(Debug, Error)]
pub enum TxgenError {
    #[error("invalid config: field {field}: {message}")]
    InvalidConfig { field: &'static str, message: String },
    #[error("{path}: line {line}: {what}")]
    Parse { path: String, line: usize, what: String },
    #[error("cannot serialize transaction {tx_id}: label is unknown")]
    UnknownLabel { tx_id: u64 },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Currency amount held as integer cents, so arithmetic and serialization
/// are exact. Displays and parses as a two-decimal string (`"12.34"`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(u64);

impl Amount {
    pub fn from_cents(cents: u64) -> Self {
        Amount(cents)
    }

    /// Round a currency value in major units to the nearest cent.
    pub fn from_f64(units: f64) -> Self {
        assert!(units.is_finite() && units >= 0.0, "amount must be non-negative");
        Amount((units * 100.0).round() as u64)
    }

    pub fn cents(self) -> u64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl FromStr for Amount {
    type Err = String;

    /// Accepts exactly `<digits>.<2 digits>`; anything else (signs,
    /// exponents, missing decimals) is rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("amount {s:?} is not a non-negative 2-decimal string");
        let (int_part, frac_part) = s.split_once('.').ok_or_else(bad)?;
        if int_part.is_empty()
            || frac_part.len() != 2
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let units: u64 = int_part.parse().map_err(|_| bad())?;
        let cents: u64 = frac_part.parse().map_err(|_| bad())?;
        units
            .checked_mul(100)
            .and_then(|c| c.checked_add(cents))
            .map(Amount)
            .ok_or_else(bad)
    }
}

/// Transaction label. `Unknown` exists for data whose ground truth is
/// unavailable (e.g. live traffic); it cannot be serialized to the dataset
/// format, which admits only `"fraud"` and `"legit"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Fraud,
    Legit,
    Unknown,
}

impl Label {
    pub fn as_str(self) -> Option<&'static str> {
        match self {
            Label::Fraud => Some("fraud"),
            Label::Legit => Some("legit"),
            Label::Unknown => None,
        }
    }

    pub fn from_wire(s: &str) -> Option<Label> {
        match s {
            "fraud" => Some(Label::Fraud),
            "legit" => Some(Label::Legit),
            _ => None,
        }
    }

    /// Numeric target for the loss: fraud = 1, legit = 0.
    pub fn as_target(self) -> Option<f64> {
        match self {
            Label::Fraud => Some(1.0),
            Label::Legit => Some(0.0),
            Label::Unknown => None,
        }
    }
}

/// One card transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub tx_id: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub card_id: String,
    pub merchant_id: String,
    pub amount: Amount,
    pub label: Label,
}

impl Transaction {
    pub fn sort_key(&self) -> (i64, u64) {
        (self.timestamp, self.tx_id)
    }
}

/// Where a dataset came from; carried alongside the transactions and
/// written into run manifests.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Provenance {
    Generated(GenConfig),
    Note(String),
}

/// An ordered transaction list (ascending `(timestamp, tx_id)`) plus its
/// provenance trail.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub transactions: Vec<Transaction>,
    pub meta: Vec<Provenance>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn n_fraud(&self) -> usize {
        self.transactions.iter().filter(|t| t.label == Label::Fraud).count()
    }

    pub fn n_legit(&self) -> usize {
        self.transactions.iter().filter(|t| t.label == Label::Legit).count()
    }

    pub fn is_sorted(&self) -> bool {
        self.transactions.windows(2).all(|w| w[0].sort_key() <= w[1].sort_key())
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.meta.push(Provenance::Note(text.into()));
    }
}

/// Generator configuration. `legit_rate` is the expected number of
/// legitimate transactions per card over the whole `[start_ts, end_ts)`
/// period. `n_merchants` counts marketplace sellers over the whole
/// period: they open at staggered times, draw an opening hype crowd for a
/// few days, close after a short lifetime, and sometimes come back for a
/// second run after weeks of dormancy. Each ring compromises `ring_size`
/// distinct cards from the regular pool and has them transact at
/// `ring_merchants` fresh mule merchant accounts (ids beyond the
/// legitimate pool), all inside one burst of `ring_burst_seconds` — a
/// bust-out whose ties to the rest of the graph run through the
/// compromised cards' histories.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub n_cards: usize,
    pub n_merchants: usize,
    pub start_ts: i64,
    pub end_ts: i64,
    pub legit_rate: f64,
    pub n_rings: usize,
    pub ring_size: usize,
    pub ring_merchants: usize,
    pub ring_burst_seconds: i64,
    pub fraud_amount_scale: f64,
    /// Median of the log-normal legitimate amount distribution, in major
    /// currency units.
    #[serde(default = "default_amount_median")]
    pub amount_median: f64,
    /// Log-scale sigma of the legitimate amount distribution.
    #[serde(default = "default_amount_sigma")]
    pub amount_sigma: f64,
}

fn default_amount_median() -> f64 {
    40.0
}

fn default_amount_sigma() -> f64 {
    1.0
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 42,
            n_cards: 200,
            n_merchants: 50,
            // 2026-02-01T00:00:00Z .. 2026-10-01T00:00:00Z
            start_ts: 1_769_904_000,
            end_ts: 1_790_812_800,
            legit_rate: 30.0,
            n_rings: 10,
            ring_size: 4,
            ring_merchants: 3,
            ring_burst_seconds: 1800,
            fraud_amount_scale: 2.5,
            amount_median: default_amount_median(),
            amount_sigma: default_amount_sigma(),
        }
    }
}

impl GenConfig {
    pub fn span_seconds(&self) -> i64 {
        self.end_ts - self.start_ts
    }

    pub fn validate(&self) -> Result<(), TxgenError> {
        fn bad(field: &'static str, message: impl Into<String>) -> TxgenError {
            TxgenError::InvalidConfig { field, message: message.into() }
        }
        if self.end_ts <= self.start_ts {
            return Err(bad("end_ts", format!("must exceed start_ts ({} <= {})", self.end_ts, self.start_ts)));
        }
        if !(self.legit_rate >= 0.0 && self.legit_rate.is_finite()) {
            return Err(bad("legit_rate", "must be finite and non-negative"));
        }
        if self.n_cards > 0 && self.legit_rate > 0.0 && self.n_merchants == 0 {
            return Err(bad("n_merchants", "must be positive when legitimate traffic is generated"));
        }
        if !(self.amount_median > 0.0 && self.amount_median.is_finite()) {
            return Err(bad("amount_median", "must be finite and positive"));
        }
        if !(self.amount_sigma >= 0.0 && self.amount_sigma.is_finite()) {
            return Err(bad("amount_sigma", "must be finite and non-negative"));
        }
        if self.n_rings > 0 {
            if self.ring_size < 2 {
                return Err(bad("ring_size", "must be at least 2 when n_rings > 0"));
            }
            if self.ring_size > self.n_cards {
                return Err(bad(
                    "ring_size",
                    format!(
                        "each ring compromises distinct pool cards, so ring_size must not \
                         exceed n_cards ({} > {})",
                        self.ring_size, self.n_cards
                    ),
                ));
            }
            if self.ring_merchants == 0 {
                return Err(bad("ring_merchants", "must be positive when n_rings > 0"));
            }
            if self.ring_burst_seconds <= 0 {
                return Err(bad("ring_burst_seconds", "must be positive when n_rings > 0"));
            }
            if self.ring_burst_seconds >= self.span_seconds() {
                return Err(bad("ring_burst_seconds", "must be shorter than the generation period"));
            }
            if !(self.fraud_amount_scale > 0.0 && self.fraud_amount_scale.is_finite()) {
                return Err(bad("fraud_amount_scale", "must be finite and positive"));
            }
        }
        Ok(())
    }
}

fn legit_card_id(k: usize) -> String {
    format!("c{k:05}")
}

fn merchant_id(k: usize) -> String {
    format!("m{k:04}")
}

/// Expected number of purchases per legitimate shopping session (the
/// session length is geometric, so small sessions dominate but runs of
/// four or more purchases at one merchant are routine).
const MEAN_SESSION_SIZE: f64 = 2.6;

/// Mean gap between consecutive purchases inside one session, in seconds.
const SESSION_GAP_MEAN_SECONDS: f64 = 420.0;

/// Mean active lifetime of a merchant, in seconds (about twelve days).
/// Merchants are marketplace sellers that open at staggered times, trade
/// for a while, and disappear, so "new merchant id with hardly any
/// history" is a routine sight in legitimate traffic rather than a fraud
/// tell. `n_merchants` counts sellers over the whole period; roughly
/// `n_merchants * lifetime / (span + lifetime)` are active at once.
const MERCHANT_LIFETIME_SECONDS: f64 = 12.0 * 86_400.0;

/// Opening-hype strength and decay. A seller's chance of being picked is
/// proportional to `1 + HYPE_BOOST * exp(-age / HYPE_DECAY_SECONDS)`, so a
/// just-opened shop drags in roughly `1 + HYPE_BOOST` times the traffic of
/// an established one, fading over a few days. Hype makes many distinct
/// cards converge on the same young merchants inside the same few days —
/// the same card/merchant co-occurrence shape a fraud ring leaves, but
/// spread over days rather than minutes.
const HYPE_BOOST: f64 = 15.0;
const HYPE_DECAY_SECONDS: f64 = 1.5 * 86_400.0;

/// Chance that the next purchase in a session stays at the same shop
/// (another item at the till) rather than hopping to a fresh pick. Repeats
/// give legitimate merchants minutes-apart back-to-back transactions, so
/// tiny merchant-side recency is routine; hops give cards multi-merchant
/// activity within one evening, so cross-shop card velocity is routine too.
const SESSION_REPEAT_P: f64 = 0.45;

/// Chance a closed seller reopens for a second run (a restock or
/// clearance comeback). Revivals make "merchant quiet for weeks, then a
/// sudden crowd" a routine legitimate pattern rather than a fraud tell.
const REVIVE_P: f64 = 0.5;

/// Dormancy between a seller's first close and its comeback: a fixed
/// floor (safely past any feature or edge lookback window) plus an
/// exponential tail.
const DORMANCY_MIN_SECONDS: f64 = 10.0 * 86_400.0;
const DORMANCY_MEAN_EXTRA_SECONDS: f64 = 8.0 * 86_400.0;

/// Loyal co-shopping circles: one circle forms per `CARDS_PER_COHORT`
/// cardholders. A circle is a small friend group that keeps a few niche
/// hobby sellers alive — the sellers' only customers are the circle, and
/// the circle returns for group outings every week or two. Each outing
/// lays down the same joint footprint as a fraud ring (the same few cards
/// converging on the same few merchants with no outside traffic), but
/// stretched over days per outing and weeks between outings rather than
/// minutes, so joint card/merchant structure alone cannot separate a
/// burst from loyalty; the compressed timing has to carry the call.
const CARDS_PER_COHORT: usize = 50;
/// Members per circle and niche sellers per circle — sized to match the
/// default ring shape so the footprints are indistinguishable.
const COHORT_CARDS: usize = 4;
const COHORT_MERCHANTS: usize = 3;
/// Chance a circle returns for another outing (geometric count, mean 4).
const COHORT_CONTINUE_P: f64 = 0.75;
/// Mean gap between a circle's consecutive outings, in seconds (9 days).
const COHORT_GAP_MEAN_SECONDS: f64 = 9.0 * 86_400.0;
/// Window over which one outing's purchases spread, in seconds (2 days).
const COHORT_SPREAD_SECONDS: f64 = 2.0 * 86_400.0;
/// Chance a member joins a given outing / buys from a given favorite.
const COHORT_JOIN_P: f64 = 0.8;
const COHORT_BUY_P: f64 = 0.75;

/// Generate a synthetic dataset. Pure function of `config`; identical
/// configs produce bit-identical datasets.
pub fn generate(config: &GenConfig) -> Result<Dataset, TxgenError> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let span = config.span_seconds();
    // (timestamp, generation sequence) pairs keep the final sort stable.
    let mut raw: Vec<Transaction> = Vec::new();

    // Legitimate traffic: cardholders shop in short sessions. Session
    // starts arrive per card at a constant rate over the period
    // (time-homogeneous), each session holds a geometric number of
    // purchases a few minutes apart, and the expected transaction count
    // per card stays legit_rate. Sessions make short same-card recency
    // routine for legitimate traffic, so burst timing alone cannot
    // separate fraud.
    // Seller lifecycle: merchant m trades only inside its active
    // segments. Openings are spread uniformly (starting one mean
    // lifetime before the period so early traffic has sellers too),
    // lifetimes are exponential, and about half the sellers come back
    // for a second run after a weeks-long dormancy, drawing a fresh
    // opening crowd. Merchant 0 is a house account that is always
    // active, so a session can always find a seller.
    let segments: Vec<Vec<(f64, f64)>> = (0..config.n_merchants)
        .map(|m| {
            if m == 0 {
                return vec![(f64::MIN, f64::MAX)];
            }
            let open = rng.below((span as f64 + MERCHANT_LIFETIME_SECONDS) as u64) as f64
                - MERCHANT_LIFETIME_SECONDS;
            let life = rng.exponential(1.0 / MERCHANT_LIFETIME_SECONDS);
            let mut segs = vec![(open, open + life)];
            if rng.unit() < REVIVE_P {
                let gap = DORMANCY_MIN_SECONDS
                    + rng.exponential(1.0 / DORMANCY_MEAN_EXTRA_SECONDS);
                let reopen = open + life + gap;
                let second_life = rng.exponential(1.0 / MERCHANT_LIFETIME_SECONDS);
                if reopen < span as f64 {
                    segs.push((reopen, reopen + second_life));
                }
            }
            segs
        })
        .collect();
    if config.legit_rate > 0.0 && config.n_merchants > 0 {
        // A seller's pick weight rides on the age of its CURRENT run, so
        // revivals get the same hype crowd as first openings; the house
        // account's opening lies in the infinite past, so its boost term
        // is exactly zero.
        let current_open = |m: usize, t: f64| -> Option<f64> {
            segments[m].iter().find(|&&(o, c)| t >= o && t < c).map(|&(o, _)| o)
        };
        let pick_merchant = |rng: &mut SeededRng, t: f64| -> usize {
            let active: Vec<(usize, f64)> = (0..config.n_merchants)
                .filter_map(|m| current_open(m, t).map(|o| (m, o)))
                .collect();
            let weight = |open: f64| -> f64 {
                1.0 + HYPE_BOOST * (-(t - open) / HYPE_DECAY_SECONDS).exp()
            };
            let total: f64 = active.iter().map(|&(_, o)| weight(o)).sum();
            let mut x = rng.range_f64(0.0, total);
            for &(m, o) in &active {
                x -= weight(o);
                if x <= 0.0 {
                    return m;
                }
            }
            active.last().expect("house account is always active").0
        };
        let session_rate_per_sec = config.legit_rate / MEAN_SESSION_SIZE / span as f64;
        let continue_p = 1.0 - 1.0 / MEAN_SESSION_SIZE;
        for card in 0..config.n_cards {
            let card_id = legit_card_id(card);
            let mut t = 0.0f64;
            loop {
                t += rng.exponential(session_rate_per_sec);
                if t >= span as f64 {
                    break;
                }
                // Each purchase either stays at the previous shop or hops
                // to a fresh (crowd-weighted) pick, so a session mixes
                // same-shop repeats with multi-merchant hopping — both
                // tiny merchant recency and cross-shop card velocity stay
                // routine in legitimate traffic.
                let mut s = t;
                let mut prev: Option<usize> = None;
                loop {
                    let pick = match prev {
                        Some(m) if rng.unit() < SESSION_REPEAT_P => m,
                        _ => pick_merchant(&mut rng, s.min(span as f64)),
                    };
                    prev = Some(pick);
                    let merchant = merchant_id(pick);
                    let amount = Amount::from_f64(
                        rng.log_normal(config.amount_median, config.amount_sigma),
                    );
                    raw.push(Transaction {
                        tx_id: 0,
                        timestamp: config.start_ts + s as i64,
                        card_id: card_id.clone(),
                        merchant_id: merchant,
                        amount,
                        label: Label::Legit,
                    });
                    if rng.unit() >= continue_p {
                        break;
                    }
                    s += rng.exponential(1.0 / SESSION_GAP_MEAN_SECONDS);
                    if s >= span as f64 {
                        break;
                    }
                }
            }
        }
    }

    // Loyal co-shopping circles: benign ring lookalikes. Each circle's
    // niche sellers take ids past both the regular pool and the mule
    // range, so — exactly like mule accounts — they see no outside
    // traffic; only the outing timing (days, not minutes) and ordinary
    // amounts distinguish a circle's footprint from a ring's.
    let n_cohorts = config.n_cards / CARDS_PER_COHORT;
    for cohort in 0..n_cohorts {
        let members = rng.choose_indices(config.n_cards, COHORT_CARDS);
        let favorites: Vec<String> = (0..COHORT_MERCHANTS)
            .map(|j| {
                merchant_id(
                    config.n_merchants
                        + config.n_rings * config.ring_merchants
                        + cohort * COHORT_MERCHANTS
                        + j,
                )
            })
            .collect();
        let mut t = rng.range_f64(0.0, span as f64);
        loop {
            for &card in &members {
                if rng.unit() >= COHORT_JOIN_P {
                    continue;
                }
                let card_id = legit_card_id(card);
                for m in &favorites {
                    if rng.unit() >= COHORT_BUY_P {
                        continue;
                    }
                    let s = t + rng.range_f64(0.0, COHORT_SPREAD_SECONDS);
                    if s >= span as f64 {
                        continue;
                    }
                    let amount = Amount::from_f64(
                        rng.log_normal(config.amount_median, config.amount_sigma),
                    );
                    raw.push(Transaction {
                        tx_id: 0,
                        timestamp: config.start_ts + s as i64,
                        card_id: card_id.clone(),
                        merchant_id: m.clone(),
                        amount,
                        label: Label::Legit,
                    });
                }
            }
            if rng.unit() >= COHORT_CONTINUE_P {
                break;
            }
            t += rng.exponential(1.0 / COHORT_GAP_MEAN_SECONDS);
            if t >= span as f64 {
                break;
            }
        }
    }

    // Fraud rings: compromised cards from the regular pool are run through
    // fresh mule merchant accounts (ids past the legitimate pool), one
    // transaction per (card, merchant) pair inside the burst window — a
    // bust-out. The mule accounts never see legitimate traffic; the
    // burst's ties to the wider graph run through the compromised cards.
    for ring in 0..config.n_rings {
        // Stratified campaign times: one burst per equal slice of the usable
        // span, jittered within its slice. Rings land spread over the whole
        // period instead of clumping, so any sizeable time window holds a
        // representative share of fraud.
        let usable = (span - config.ring_burst_seconds) as u64 + 1;
        let lo = usable / config.n_rings as u64 * ring as u64;
        let hi = usable / config.n_rings as u64 * (ring as u64 + 1);
        let burst_start = config.start_ts + (lo + rng.below(hi - lo)) as i64;
        let merchants: Vec<String> = (0..config.ring_merchants)
            .map(|j| merchant_id(config.n_merchants + ring * config.ring_merchants + j))
            .collect();
        let cards = rng.choose_indices(config.n_cards, config.ring_size);
        for card in cards {
            let card_id = legit_card_id(card);
            for m in &merchants {
                let ts = burst_start + rng.below(config.ring_burst_seconds as u64 + 1) as i64;
                let amount = Amount::from_f64(
                    rng.log_normal(config.amount_median, config.amount_sigma)
                        * config.fraud_amount_scale,
                );
                raw.push(Transaction {
                    tx_id: 0,
                    timestamp: ts,
                    card_id: card_id.clone(),
                    merchant_id: m.clone(),
                    amount,
                    label: Label::Fraud,
                });
            }
        }
    }

    // Sort by timestamp (stable on generation order) and assign ids by
    // final position, so tx_id order equals time order.
    raw.sort_by_key(|t| t.timestamp);
    for (i, tx) in raw.iter_mut().enumerate() {
        tx.tx_id = i as u64;
    }
    Ok(Dataset { transactions: raw, meta: vec![Provenance::Generated(config.clone())] })
}

/// Split at `boundary_ts`: left gets timestamps strictly below the
/// boundary, right gets the rest. Provenance is carried to both sides.
pub fn temporal_split(ds: &Dataset, boundary_ts: i64) -> (Dataset, Dataset) {
    debug_assert!(ds.is_sorted(), "temporal_split expects a sorted dataset");
    let cut = ds.transactions.partition_point(|t| t.timestamp < boundary_ts);
    let mut left = Dataset { transactions: ds.transactions[..cut].to_vec(), meta: ds.meta.clone() };
    let mut right = Dataset { transactions: ds.transactions[cut..].to_vec(), meta: ds.meta.clone() };
    left.note(format!("temporal_split: kept timestamps < {boundary_ts}"));
    right.note(format!("temporal_split: kept timestamps >= {boundary_ts}"));
    (left, right)
}

/// Keep every fraud transaction and a uniform without-replacement sample of
/// `floor(keep_ratio * n_fraud)` legitimate ones (capped at the number
/// available). Deterministic per seed. A dataset with no fraud yields an
/// empty result with a warning note.
pub fn negative_sample(ds: &Dataset, keep_ratio: f64, seed: u64) -> Dataset {
    assert!(keep_ratio > 0.0, "keep_ratio must be positive");
    let n_fraud = ds.n_fraud();
    let mut out = Dataset { transactions: Vec::new(), meta: ds.meta.clone() };
    if n_fraud == 0 {
        out.note("negative_sample: dataset has no fraud; emitting empty dataset".to_string());
        return out;
    }
    let legit_idx: Vec<usize> = ds
        .transactions
        .iter()
        .enumerate()
        .filter(|(_, t)| t.label == Label::Legit)
        .map(|(i, _)| i)
        .collect();
    let want = ((keep_ratio * n_fraud as f64).floor() as usize).min(legit_idx.len());
    let mut rng = SeededRng::new(seed);
    let chosen = rng.choose_indices(legit_idx.len(), want);
    let mut keep: HashSet<usize> = chosen.into_iter().map(|i| legit_idx[i]).collect();
    for (i, t) in ds.transactions.iter().enumerate() {
        if t.label == Label::Fraud {
            keep.insert(i);
        }
    }
    // Filtering a sorted list in index order preserves the sort.
    out.transactions = ds
        .transactions
        .iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, t)| t.clone())
        .collect();
    out.note(format!(
        "negative_sample: kept {n_fraud} fraud + {want} of {} legit (ratio {keep_ratio}, seed {seed})",
        legit_idx.len()
    ));
    out
}

/// Wire form of one JSONL line. Field order here fixes the byte layout of
/// saved files.
#[derive(Serialize, Deserialize)]
struct TxRecord {
    tx_id: u64,
    ts: i64,
    card: String,
    merchant: String,
    amount: String,
    label: String,
}

fn io_err(path: &Path, source: std::io::Error) -> TxgenError {
    TxgenError::Io { path: path.display().to_string(), source }
}

/// Write the dataset as JSONL. Errors if any transaction carries an
/// `Unknown` label, since the format only admits `"fraud"` / `"legit"`.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), TxgenError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for tx in &ds.transactions {
        let label = tx
            .label
            .as_str()
            .ok_or(TxgenError::UnknownLabel { tx_id: tx.tx_id })?;
        let rec = TxRecord {
            tx_id: tx.tx_id,
            ts: tx.timestamp,
            card: tx.card_id.clone(),
            merchant: tx.merchant_id.clone(),
            amount: tx.amount.to_string(),
            label: label.to_string(),
        };
        let line = serde_json::to_string(&rec).expect("TxRecord serializes");
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Read transactions in file order, without sorting. This is the reader
/// the streaming path uses, so late events survive to be handled by its
/// late-event policy.
pub fn read_transactions(path: &Path) -> Result<Vec<Transaction>, TxgenError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut seen_ids: HashSet<u64> = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let parse_err = |what: String| TxgenError::Parse {
            path: path.display().to_string(),
            line: lineno,
            what,
        };
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TxRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let amount = Amount::from_str(&rec.amount).map_err(&parse_err)?;
        let label = Label::from_wire(&rec.label)
            .ok_or_else(|| parse_err(format!("label {:?} is not \"fraud\" or \"legit\"", rec.label)))?;
        if !seen_ids.insert(rec.tx_id) {
            return Err(parse_err(format!("duplicate tx_id {}", rec.tx_id)));
        }
        out.push(Transaction {
            tx_id: rec.tx_id,
            timestamp: rec.ts,
            card_id: rec.card,
            merchant_id: rec.merchant,
            amount,
            label,
        });
    }
    Ok(out)
}

/// Load a dataset, re-sorting (with a provenance warning) if the file is
/// out of order. Empty files load as empty datasets.
pub fn load_dataset(path: &Path) -> Result<Dataset, TxgenError> {
    let transactions = read_transactions(path)?;
    let mut ds = Dataset {
        transactions,
        meta: vec![Provenance::Note(format!("loaded from {}", path.display()))],
    };
    if !ds.is_sorted() {
        ds.transactions.sort_by_key(Transaction::sort_key);
        ds.note("warning: input was not sorted by (ts, tx_id); re-sorted on load");
    }
    Ok(ds)
}
