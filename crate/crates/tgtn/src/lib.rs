//! Transaction-graph fraud detection with a graph self-attention transformer.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! - [`txgen`] — seeded synthetic transaction corpora with injected fraud
//!   rings, JSONL dataset I/O, temporal splitting, negative sampling.
//! - [`graph`] — the transaction graph: transactions are nodes, edges link
//!   transactions that share a card or merchant within a time gap.
//!   Supports incremental insertion and window eviction for streaming.
//! - [`numerics`] — a small dense f64 tensor core (matmul, masked softmax,
//!   layer norm, weighted BCE, Adam) plus a finite-difference gradient
//!   oracle that every analytic backward pass is validated against.
//! - [`model`] — the TGTN network: temporal positional encoding, stacked
//!   masked graph self-attention encoder layers, and a fraud-probability
//!   head, with forward and hand-derived backward passes and ablation
//!   switches (no-PE, no-attention).
//! - [`train`] — full-graph training with early stopping, stratified k-fold
//!   cross-validation, and an RFM logistic-regression baseline.
//! - [`metrics`] — average precision, ROC AUC, confusion counts, and
//!   month-wise reports.
//! - [`stream`] — a streaming replay harness with rule-engine prescreening,
//!   a sliding-window graph, and a stream/batch consistency check.
//! - [`cli`] — the `tgtn` command-line entry point.
//!
//! The narrative guide lives in `book/`; its code snippets compile and run
//! as doc-tests of this crate (see `src/book.rs`).

pub mod cli;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod stream;
pub mod train;
pub mod txgen;

mod rng;

#[cfg(doctest)]
mod book;

pub use rng::SeededRng;
