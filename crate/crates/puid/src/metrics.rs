//! Ranking metrics and evaluation reports: per-user AUC, NDCG@K, and a
//! bias report comparing estimated losses against a ground-truth loss when
//! true propensities are available.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::data::Dataset;
use crate::math::{mean, std_dev};
use crate::model::{ErrorType, FactorModel, PairFeatureSource};
use crate::{PuidError, Result};

/// A scored test triple: predicted score plus the held-out true rating.
#[derive(Debug, Clone, Copy)]
pub struct ScoredTriple {
    pub user: u32,
    pub item: u32,
    pub score: f64,
    pub rating: f64,
}

/// Binarize a rating: positive iff rating >= threshold (default 4.0 on a
/// 1..5 scale).
pub fn is_positive(rating: f64, threshold: f64) -> bool {
    rating >= threshold
}

fn by_user(triples: &[ScoredTriple]) -> BTreeMap<u32, Vec<&ScoredTriple>> {
    let mut map: BTreeMap<u32, Vec<&ScoredTriple>> = BTreeMap::new();
    for t in triples {
        map.entry(t.user).or_default().push(t);
    }
    map
}

/// Mean per-user AUC. Each user with at least one positive and one negative
/// contributes the probability that a random positive outranks a random
/// negative, with ties counting 1/2. Single-class users are skipped; errors
/// if no user is scoreable.
pub fn uauc(triples: &[ScoredTriple], threshold: f64) -> Result<f64> {
    let mut aucs = Vec::new();
    for (_, ts) in by_user(triples) {
        let pos: Vec<f64> = ts.iter().filter(|t| is_positive(t.rating, threshold)).map(|t| t.score).collect();
        let neg: Vec<f64> = ts.iter().filter(|t| !is_positive(t.rating, threshold)).map(|t| t.score).collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        let mut wins = 0.0;
        for p in &pos {
            for n in &neg {
                if p > n {
                    wins += 1.0;
                } else if p == n {
                    wins += 0.5;
                }
            }
        }
        aucs.push(wins / (pos.len() * neg.len()) as f64);
    }
    if aucs.is_empty() {
        return Err(PuidError::Data("no user has both positive and negative test items".into()));
    }
    Ok(mean(&aucs))
}

/// Mean per-user NDCG@K with binary gains and 1/log2(rank+1) discounts.
/// Ranking ties break by ascending item id for determinism. Users without
/// positives are skipped; errors if no user has a positive.
pub fn ndcg_at_k(triples: &[ScoredTriple], k: usize, threshold: f64) -> Result<f64> {
    if k == 0 {
        return Err(PuidError::Usage("ndcg cutoff must be >= 1".into()));
    }
    let mut vals = Vec::new();
    for (_, mut ts) in by_user(triples) {
        let num_pos = ts.iter().filter(|t| is_positive(t.rating, threshold)).count();
        if num_pos == 0 {
            continue;
        }
        ts.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then(a.item.cmp(&b.item)));
        let mut dcg = 0.0;
        for (rank, t) in ts.iter().take(k).enumerate() {
            if is_positive(t.rating, threshold) {
                dcg += 1.0 / ((rank + 2) as f64).log2();
            }
        }
        let idcg: f64 = (0..num_pos.min(k)).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();
        vals.push(dcg / idcg);
    }
    if vals.is_empty() {
        return Err(PuidError::Data("no user has a positive test item".into()));
    }
    Ok(mean(&vals))
}

/// Score every test triple with a trained model.
pub fn score_triples(model: &FactorModel, dataset: &Dataset, test: &Dataset) -> Vec<ScoredTriple> {
    let feats: &dyn PairFeatureSource = dataset;
    test.interactions
        .iter()
        .map(|t| ScoredTriple {
            user: t.user,
            item: t.item,
            score: model.predict(t.user, t.item, feats),
            rating: t.rating,
        })
        .collect()
}

/// True risk and estimator biases on a test set with known ideal ratings and
/// true propensities (synthetic data only).
#[derive(Debug, Clone, Serialize)]
pub struct BiasReport {
    /// Mean error of the model over the full pair grid against ideal ratings.
    pub true_risk: f64,
    /// Estimated losses keyed by estimator tag.
    pub estimates: BTreeMap<String, f64>,
    /// estimate - true_risk per estimator.
    pub bias: BTreeMap<String, f64>,
}

/// True (unconfounded) risk: mean error over the whole grid against the
/// ideal ratings from the generator.
pub fn true_risk(model: &FactorModel, dataset: &Dataset, ideal: &[f64], et: ErrorType) -> Result<f64> {
    if ideal.len() != dataset.num_pairs() {
        return Err(PuidError::Data("ideal ratings do not cover the pair grid".into()));
    }
    let feats: &dyn PairFeatureSource = dataset;
    let mut sum = 0.0;
    for u in 0..dataset.num_users as u32 {
        for i in 0..dataset.num_items as u32 {
            sum += model.error(u, i, ideal[dataset.pair_index(u, i)], et, feats);
        }
    }
    Ok(sum / dataset.num_pairs() as f64)
}

pub fn bias_report(
    model: &FactorModel,
    dataset: &Dataset,
    ideal: &[f64],
    et: ErrorType,
    estimates: BTreeMap<String, f64>,
) -> Result<BiasReport> {
    let tr = true_risk(model, dataset, ideal, et)?;
    let bias = estimates.iter().map(|(k, v)| (k.clone(), v - tr)).collect();
    Ok(BiasReport { true_risk: tr, estimates, bias })
}

/// Full evaluation of one trained model on one test set.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub estimator: String,
    pub uauc: f64,
    pub ndcg: BTreeMap<String, f64>,
    pub num_test: usize,
    pub num_users_scored: usize,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasReport>,
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| PuidError::Data(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub fn evaluate(
    estimator: &str,
    model: &FactorModel,
    dataset: &Dataset,
    test: &Dataset,
    ks: &[usize],
    threshold: f64,
) -> Result<EvalReport> {
    let scored = score_triples(model, dataset, test);
    let users_scored = by_user(&scored).len();
    let mut ndcg = BTreeMap::new();
    for &k in ks {
        ndcg.insert(format!("ndcg@{k}"), ndcg_at_k(&scored, k, threshold)?);
    }
    Ok(EvalReport {
        estimator: estimator.to_string(),
        uauc: uauc(&scored, threshold)?,
        ndcg,
        num_test: test.num_observed(),
        num_users_scored: users_scored,
        threshold,
        bias: None,
    })
}

/// Mean and sample standard deviation of a metric across repetitions.
pub fn summarize(values: &[f64]) -> (f64, f64) {
    (mean(values), std_dev(values))
}
