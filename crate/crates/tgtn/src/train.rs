//! Training: full-graph gradient descent with early stopping, stratified
//! k-fold cross-validation for configuration selection, and the
//! RFM-feature logistic-regression baseline.
//!
//! Cross-validation is *transductive*: one graph is built over the whole
//! training dataset and folds are expressed as loss masks, never as
//! per-fold subgraphs. This matches the single-graph framing of the model
//! (attention sees the full neighborhood structure; only the loss is
//! restricted) and is a deliberate, documented choice — inductive CV with
//! per-fold graphs would measure something else.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_graph, EdgeRule, EncoderConfig, GraphError, TxGraph};
use crate::metrics::{average_precision, roc_auc, MetricsError};
use crate::model::{ModelError, Tgtn, TgtnConfig};
use crate::numerics::{adam_step, AdamConfig, Matrix};
use crate::txgen::{Dataset, Transaction};
use crate::SeededRng;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("{context} must contain both classes (fraud and legit)")]
    SingleClass { context: &'static str },
    #[error(
        "k-fold needs at least k labeled nodes of each class \
         (k = {k}, fraud = {fraud}, legit = {legit})"
    )]
    TooFewForFolds { k: usize, fraud: usize, legit: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Optimization settings. `pos_weight: None` means "use the legit/fraud
/// ratio of the training mask", the imbalance-correcting default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub pos_weight: Option<f64>,
    /// Epochs without validation-AP improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            pos_weight: None,
            patience: 20,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::BadConfig("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(TrainError::BadConfig("lr must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(TrainError::BadConfig("betas must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(TrainError::BadConfig("eps must be positive".into()));
        }
        if let Some(w) = self.pos_weight {
            if !(w > 0.0) || !w.is_finite() {
                return Err(TrainError::BadConfig("pos_weight must be positive".into()));
            }
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub val_ap: f64,
    pub val_auc: f64,
}

/// Render the training history as CSV (`epoch,loss,val_ap,val_auc`).
pub fn history_csv(history: &[EpochStat]) -> String {
    let mut out = String::from("epoch,loss,val_ap,val_auc\n");
    for row in history {
        out.push_str(&format!("{},{},{},{}\n", row.epoch, row.loss, row.val_ap, row.val_auc));
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The model holding the parameters of the best validation-AP epoch —
    /// not the last epoch.
    pub model: Tgtn,
    pub history: Vec<EpochStat>,
    /// 1-based epoch whose parameters are returned.
    pub best_epoch: usize,
    /// The positive-class weight actually used.
    pub pos_weight: f64,
    pub n_train: usize,
    pub n_val: usize,
}

/// 0/1 regression targets per node; unlabeled nodes get 0 but must be
/// masked out by every caller.
pub fn targets_from_graph(g: &TxGraph) -> Vec<f64> {
    g.labels().iter().map(|l| l.as_target().unwrap_or(0.0)).collect()
}

fn class_indices(g: &TxGraph, within: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut fraud = Vec::new();
    let mut legit = Vec::new();
    for (i, label) in g.labels().iter().enumerate() {
        if !within[i] {
            continue;
        }
        match label.as_target() {
            Some(t) if t == 1.0 => fraud.push(i),
            Some(_) => legit.push(i),
            None => {}
        }
    }
    (fraud, legit)
}

/// Deterministic per-epoch dropout seed derived from the run seed.
fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(epoch as u64 + 1)
}

/// Train with explicit masks: loss on `train_mask`, early stopping and the
/// returned best epoch driven by AP on `val_mask`. Fully deterministic per
/// seed. This is the primitive both [`train`] and [`kfold_cv`] build on.
pub fn train_masked(
    g: &TxGraph,
    model_config: &TgtnConfig,
    config: &TrainConfig,
    train_mask: &[bool],
    val_mask: &[bool],
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let targets = targets_from_graph(g);
    let (train_fraud, train_legit) = class_indices(g, train_mask);
    if train_fraud.is_empty() || train_legit.is_empty() {
        return Err(TrainError::SingleClass { context: "the training mask" });
    }
    let (val_fraud, val_legit) = class_indices(g, val_mask);
    if val_fraud.is_empty() || val_legit.is_empty() {
        return Err(TrainError::SingleClass { context: "the validation mask" });
    }
    let pos_weight = config
        .pos_weight
        .unwrap_or(train_legit.len() as f64 / train_fraud.len() as f64);

    let mut model = Tgtn::new(*model_config, g.features().cols(), config.seed)?;
    let adam = config.adam();
    let val_labels: Vec<bool> = val_mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| targets[i] == 1.0)
        .collect();

    let mut history: Vec<EpochStat> = Vec::new();
    let mut best_epoch_idx = 0usize;
    let mut best_ap = f64::NEG_INFINITY;
    let mut best_store = model.store.clone();
    for e in 0..config.epochs {
        model.store.zero_grads();
        let loss = model.backward(
            g,
            &targets,
            train_mask,
            pos_weight,
            true,
            epoch_seed(config.seed, e),
        )?;
        adam_step(&mut model.store, &adam, (e + 1) as u64);

        let scores = model.forward(g, false, 0)?;
        let val_scores: Vec<f64> = scores
            .iter()
            .zip(val_mask)
            .filter(|(_, &m)| m)
            .map(|(&s, _)| s)
            .collect();
        let val_ap = average_precision(&val_scores, &val_labels)?;
        let val_auc = roc_auc(&val_scores, &val_labels)?;
        history.push(EpochStat { epoch: e + 1, loss, val_ap, val_auc });

        // strictly-greater comparison: ties keep the earliest best epoch
        if val_ap > best_ap {
            best_ap = val_ap;
            best_epoch_idx = e;
            best_store = model.store.clone();
        } else if e - best_epoch_idx >= config.patience {
            break;
        }
    }
    model.store = best_store;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch: best_epoch_idx + 1,
        pos_weight,
        n_train: train_fraud.len() + train_legit.len(),
        n_val: val_fraud.len() + val_legit.len(),
    })
}

/// Train on all labeled nodes of `g`, holding out a seeded stratified 10%
/// of each class as the early-stopping validation split.
pub fn train(
    g: &TxGraph,
    model_config: &TgtnConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let all = vec![true; g.len()];
    let (fraud, legit) = class_indices(g, &all);
    if fraud.is_empty() || legit.is_empty() {
        return Err(TrainError::SingleClass { context: "the labeled dataset" });
    }
    let mut rng = SeededRng::new(config.seed);
    let mut val_mask = vec![false; g.len()];
    for class in [&fraud, &legit] {
        let n_val = ((class.len() as f64 * 0.1).round() as usize).max(1);
        if n_val >= class.len() {
            return Err(TrainError::SingleClass { context: "the training mask" });
        }
        for pos in rng.choose_indices(class.len(), n_val) {
            val_mask[class[pos]] = true;
        }
    }
    let mut train_mask = vec![false; g.len()];
    for &i in fraud.iter().chain(&legit) {
        train_mask[i] = !val_mask[i];
    }
    train_masked(g, model_config, config, &train_mask, &val_mask)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CVEntry {
    pub fold_ap: Vec<f64>,
    pub fold_auc: Vec<f64>,
    pub mean_ap: f64,
    pub std_ap: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub k: usize,
    pub entries: Vec<CVEntry>,
    /// Index into the grid of the configuration with the best mean AP
    /// (first wins on ties).
    pub selected: usize,
}

fn mean_and_sample_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Stratified, contiguous-in-time folds: each class's nodes (already in
/// timestamp order) are cut into k contiguous chunks, and fold f is the
/// union of chunk f of each class. Folds partition the labeled nodes.
pub(crate) fn stratified_folds(fraud: &[usize], legit: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    for class in [fraud, legit] {
        let m = class.len();
        for (f, fold) in folds.iter_mut().enumerate() {
            fold.extend_from_slice(&class[f * m / k..(f + 1) * m / k]);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    folds
}

/// Stratified k-fold cross-validation over a configuration grid.
///
/// One graph is built over the entire dataset; folds are masks on it
/// (transductive). Each fold run derives its seed from the grid entry's
/// seed plus the fold index, so folds differ but the whole report is
/// reproducible.
pub fn kfold_cv(
    ds: &Dataset,
    k: usize,
    grid: &[(TgtnConfig, TrainConfig)],
    rule: &EdgeRule,
    enc: &EncoderConfig,
) -> Result<CVReport, TrainError> {
    if k < 2 {
        return Err(TrainError::BadConfig("k must be at least 2".into()));
    }
    if grid.is_empty() {
        return Err(TrainError::BadConfig("the configuration grid is empty".into()));
    }
    let g = build_graph(&ds.transactions, rule, enc)?;
    let all = vec![true; g.len()];
    let (fraud, legit) = class_indices(&g, &all);
    if fraud.len() < k || legit.len() < k {
        return Err(TrainError::TooFewForFolds { k, fraud: fraud.len(), legit: legit.len() });
    }
    let folds = stratified_folds(&fraud, &legit, k);

    let mut labeled = vec![false; g.len()];
    for &i in fraud.iter().chain(&legit) {
        labeled[i] = true;
    }

    let mut entries = Vec::with_capacity(grid.len());
    for (model_config, train_config) in grid {
        let mut fold_ap = Vec::with_capacity(k);
        let mut fold_auc = Vec::with_capacity(k);
        for (f, fold) in folds.iter().enumerate() {
            let mut val_mask = vec![false; g.len()];
            for &i in fold {
                val_mask[i] = true;
            }
            let train_mask: Vec<bool> =
                labeled.iter().zip(&val_mask).map(|(&l, &v)| l && !v).collect();
            let fold_config =
                TrainConfig { seed: train_config.seed.wrapping_add(f as u64), ..*train_config };
            let outcome = train_masked(&g, model_config, &fold_config, &train_mask, &val_mask)?;
            let best = &outcome.history[outcome.best_epoch - 1];
            fold_ap.push(best.val_ap);
            fold_auc.push(best.val_auc);
        }
        let (mean_ap, std_ap) = mean_and_sample_std(&fold_ap);
        let (mean_auc, std_auc) = mean_and_sample_std(&fold_auc);
        entries.push(CVEntry { fold_ap, fold_auc, mean_ap, std_ap, mean_auc, std_auc });
    }
    let selected = entries
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.mean_ap.partial_cmp(&b.mean_ap).unwrap().then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .expect("grid is nonempty");
    Ok(CVReport { k, entries, selected })
}

/// Per-transaction RFM (recency / frequency / monetary) features over
/// sliding windows, computed per card and per merchant from *strictly
/// earlier* transactions only — transactions at the same timestamp do not
/// see each other, so there is no leakage by construction.
///
/// Column order: for each window w in the given order —
/// `[card_recency, card_frequency, card_monetary,
///   merchant_recency, merchant_frequency, merchant_monetary]`,
/// so two windows yield 12 features. Recency is seconds since the entity's
/// previous transaction, capped at w (and w exactly when there is none);
/// monetary sums amounts in currency units.
pub fn rfm_features(txs: &[Transaction], windows: &[i64]) -> Matrix {
    assert!(
        txs.windows(2).all(|p| p[0].timestamp <= p[1].timestamp),
        "rfm_features expects timestamp-sorted transactions"
    );
    assert!(windows.iter().all(|&w| w > 0), "windows must be positive");

    // Per-entity event lists in timestamp order, with amount prefix sums.
    struct History {
        ts: Vec<i64>,
        prefix: Vec<f64>, // prefix[i] = sum of amounts before event i
    }
    fn build_histories(
        txs: &[Transaction],
        key: impl Fn(&Transaction) -> &str,
    ) -> (HashMap<String, History>, Vec<usize>) {
        let mut map: HashMap<String, History> = HashMap::new();
        let mut event_pos = Vec::with_capacity(txs.len());
        for tx in txs {
            let h = map
                .entry(key(tx).to_string())
                .or_insert_with(|| History { ts: Vec::new(), prefix: vec![0.0] });
            event_pos.push(h.ts.len());
            h.ts.push(tx.timestamp);
            let last = *h.prefix.last().unwrap();
            h.prefix.push(last + tx.amount.to_f64());
        }
        (map, event_pos)
    }
    let (cards, card_pos) = build_histories(txs, |t| &t.card_id);
    let (merchants, merchant_pos) = build_histories(txs, |t| &t.merchant_id);

    let mut out = Matrix::zeros(txs.len(), 6 * windows.len());
    for (i, tx) in txs.iter().enumerate() {
        let row = out.row_mut(i);
        for (wi, &w) in windows.iter().enumerate() {
            for (ei, (hist, pos)) in [
                (&cards[&tx.card_id], card_pos[i]),
                (&merchants[&tx.merchant_id], merchant_pos[i]),
            ]
            .into_iter()
            .enumerate()
            {
                // events strictly earlier than this transaction
                let hi = hist.ts[..pos].partition_point(|&t| t < tx.timestamp);
                let lo = hist.ts[..hi].partition_point(|&t| t < tx.timestamp - w);
                let recency = if hi > 0 {
                    (tx.timestamp - hist.ts[hi - 1]).min(w) as f64
                } else {
                    w as f64
                };
                let base = 6 * wi + 3 * ei;
                row[base] = recency;
                row[base + 1] = (hi - lo) as f64;
                row[base + 2] = hist.prefix[hi] - hist.prefix[lo];
            }
        }
    }
    out
}

/// A fitted logistic-regression baseline, including the standardization
/// statistics needed to score new feature matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub warnings: Vec<String>,
}

fn standardize_value(x: f64, mean: f64, std: f64) -> f64 {
    if std > 1e-12 {
        (x - mean) / std
    } else {
        0.0
    }
}

impl LogisticModel {
    pub fn predict(&self, features: &Matrix) -> Vec<f64> {
        assert_eq!(features.cols(), self.weights.len(), "feature width mismatch");
        (0..features.rows())
            .map(|i| {
                let z: f64 = features
                    .row(i)
                    .iter()
                    .enumerate()
                    .map(|(c, &x)| {
                        standardize_value(x, self.means[c], self.stds[c]) * self.weights[c]
                    })
                    .sum::<f64>()
                    + self.bias;
                1.0 / (1.0 + (-z).exp())
            })
            .collect()
    }
}

/// Mean-BCE gradient of the logistic model on standardized features;
/// shared by the trainer and the finite-difference test.
pub(crate) fn logistic_grad(
    xs: &Matrix,
    y: &[f64],
    weights: &[f64],
    bias: f64,
) -> (Vec<f64>, f64) {
    let n = xs.rows();
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for i in 0..n {
        let z: f64 =
            xs.row(i).iter().zip(weights).map(|(&x, &w)| x * w).sum::<f64>() + bias;
        let p = 1.0 / (1.0 + (-z).exp());
        let err = (p - y[i]) / n as f64;
        grad_b += err;
        for (gw, &x) in grad_w.iter_mut().zip(xs.row(i)) {
            *gw += err * x;
        }
    }
    (grad_w, grad_b)
}

/// Logistic regression on standardized features, fit by full-batch
/// gradient descent on unweighted BCE. Zero-variance features standardize
/// to zero and are reported in `warnings`. Deterministic per seed.
pub fn train_logistic_baseline(
    features: &Matrix,
    labels: &[f64],
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<LogisticModel, TrainError> {
    assert_eq!(features.rows(), labels.len(), "feature/label length mismatch");
    if !(lr > 0.0) || epochs == 0 {
        return Err(TrainError::BadConfig("lr must be positive and epochs at least 1".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(TrainError::SingleClass { context: "the baseline labels" });
    }

    let n = features.rows() as f64;
    let d = features.cols();
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    let mut warnings = Vec::new();
    for c in 0..d {
        let mean = (0..features.rows()).map(|i| features.get(i, c)).sum::<f64>() / n;
        let var = (0..features.rows())
            .map(|i| {
                let dlt = features.get(i, c) - mean;
                dlt * dlt
            })
            .sum::<f64>()
            / n;
        means[c] = mean;
        stds[c] = var.sqrt();
        if stds[c] <= 1e-12 {
            warnings.push(format!("feature {c} has zero variance; standardized to zero"));
        }
    }
    let mut xs = Matrix::zeros(features.rows(), d);
    for i in 0..features.rows() {
        for c in 0..d {
            xs.set(i, c, standardize_value(features.get(i, c), means[c], stds[c]));
        }
    }

    let mut rng = SeededRng::new(seed);
    let mut weights: Vec<f64> = (0..d).map(|_| rng.range_f64(-0.01, 0.01)).collect();
    let mut bias = 0.0;
    for _ in 0..epochs {
        let (grad_w, grad_b) = logistic_grad(&xs, labels, &weights, bias);
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= lr * g;
        }
        bias -= lr * grad_b;
    }
    Ok(LogisticModel { weights, bias, means, stds, warnings })
}
