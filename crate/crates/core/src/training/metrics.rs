use serde::{Deserialize, Serialize};

use crate::engine::Real;
use crate::error::{Error, Result};
use crate::ingest::EncodedExample;
use crate::network::{bce_loss, Model};

/// Area under the ROC curve via the Mann-Whitney rank statistic; tied scores
/// share their average rank, so a tied positive/negative pair counts 1/2.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Data(format!(
            "auc: {} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data("AUC undefined: need both classes".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("auc scores".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the mean rank
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        let group_pos = order[i..=j].iter().filter(|&&o| labels[o] == 1).count();
        pos_rank_sum += mean_rank * group_pos as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// AUC (when both classes are present) and logloss of a model on a split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub auc: Option<f64>,
    pub logloss: f64,
}

/// Evaluates with dropout disabled. A single-class split reports logloss only.
pub fn evaluate<T: Real>(model: &Model<T>, examples: &[EncodedExample]) -> Result<Evaluation> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scores = model.predict_batch(examples)?;
    let labels: Vec<u8> = examples.iter().map(|e| e.label).collect();
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let logloss = bce_loss(&scores, &y)?;
    let auc = match auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(Error::Data(msg)) => {
            log::warn!("{msg}; reporting logloss only");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(Evaluation { auc, logloss })
}

/// One line of the metric log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub split: String,
    pub auc: Option<f64>,
    pub logloss: f64,
    /// Seconds since training started; omitted in deterministic mode so logs
    /// are byte-identical across runs.
    pub wall_time: Option<f64>,
}

impl MetricRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metric record serializes")
    }
}

pub fn log_to_jsonl(records: &[MetricRecord]) -> String {
    records.iter().map(|r| r.to_json_line() + "\n").collect()
}
