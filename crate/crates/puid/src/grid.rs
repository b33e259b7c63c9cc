//! Seeded experiment grids: (estimator x mask_ratio x seed) cells run
//! independently — mask, re-estimate propensities and sensitivities, train,
//! evaluate — and failures are recorded per row without stopping the grid.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{apply_mask, split, Dataset, MaskMode};
use crate::math::{fnv1a_hex, mean, std_dev};
use crate::metrics::{ndcg_at_k, score_triples, uauc};
use crate::train::{train, Estimator, TrainConfig};
use crate::{PuidError, Result};

pub const RESULTS_SCHEMA: &str = "grid_results_v1";

/// One grid of runs sharing a base configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub estimators: Vec<Estimator>,
    pub mask_ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub base: TrainConfig,
    pub mask_mode: MaskMode,
    /// NDCG truncation depth for the grid's ndcg column.
    pub ndcg_k: usize,
    /// (train, validation, test) fractions applied after masking.
    pub fractions: (f64, f64, f64),
    /// Optional fixed test set evaluated instead of the internal test split
    /// (e.g. a uniform-exposure set with ground-truth ratings on synthetic
    /// data). The internal split still reserves its test fraction so the
    /// training pool is identical either way.
    #[serde(skip)]
    pub external_test: Option<Dataset>,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() || self.seeds.is_empty() || self.mask_ratios.is_empty() {
            return Err(PuidError::Usage("grid needs at least one estimator, seed, and mask ratio".into()));
        }
        for &r in &self.mask_ratios {
            if !(0.0..1.0).contains(&r) {
                return Err(PuidError::Usage(format!("mask ratio {r} outside [0,1)")));
            }
        }
        if self.ndcg_k == 0 {
            return Err(PuidError::Usage("ndcg_k must be >= 1".into()));
        }
        Ok(())
    }

    /// Stable hash of everything that determines a cell's result besides
    /// (estimator, mask_ratio, seed).
    pub fn config_hash(&self) -> String {
        let blob = serde_json::to_string(&(
            RESULTS_SCHEMA,
            &self.base,
            &self.mask_mode,
            self.ndcg_k,
            self.fractions,
        ))
        .unwrap();
        fnv1a_hex(&blob)
    }
}

/// One result row; metric fields are None when the cell failed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridRow {
    pub estimator: String,
    pub mask_ratio: f64,
    pub seed: u64,
    pub uauc: Option<f64>,
    pub ndcg: Option<f64>,
    pub train_loss: Option<f64>,
    pub wall_time_s: f64,
    pub config_hash: String,
    pub error: Option<String>,
}

fn run_cell(
    dataset: &Dataset,
    mask_propensities: &[f64],
    grid: &ExperimentGrid,
    estimator: Estimator,
    mask_ratio: f64,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let masked = if mask_ratio > 0.0 {
        apply_mask(dataset, mask_ratio, mask_propensities, grid.mask_mode, seed ^ MASK_SALT)?
    } else {
        dataset.clone()
    };
    let spec = split(masked.num_observed(), grid.fractions, seed)?;
    let tr = masked.retain_interactions(&spec.train);
    let va = masked.retain_interactions(&spec.validation);
    let te = match &grid.external_test {
        Some(t) => t.clone(),
        None => masked.retain_interactions(&spec.test),
    };
    if te.num_observed() == 0 {
        return Err(PuidError::Data("empty test split".into()));
    }
    let mut cfg = grid.base.clone();
    cfg.estimator = estimator;
    cfg.seed = seed;
    let out = train(&tr, &va, &cfg)?;
    let scored = score_triples(&out.phi, &tr, &te);
    let u = uauc(&scored, cfg.threshold)?;
    let n = ndcg_at_k(&scored, grid.ndcg_k, cfg.threshold)?;
    Ok((u, n, out.final_train_loss))
}

const MASK_SALT: u64 = 0x6d61_736b;

/// Run every (estimator, mask_ratio, seed) cell. `mask_propensities` gives
/// the per-pair weights steering removal (length m*n); pass the true
/// propensities on synthetic data or a fitted field otherwise.
pub fn run_experiment_grid(
    dataset: &Dataset,
    mask_propensities: &[f64],
    grid: &ExperimentGrid,
) -> Result<Vec<GridRow>> {
    grid.validate()?;
    if mask_propensities.len() != dataset.num_pairs() {
        return Err(PuidError::Data("mask propensities do not cover the pair grid".into()));
    }
    let hash = grid.config_hash();
    let mut cells = Vec::new();
    for &r in &grid.mask_ratios {
        for &e in &grid.estimators {
            for &s in &grid.seeds {
                cells.push((e, r, s));
            }
        }
    }
    Ok(cells
        .par_iter()
        .map(|&(e, r, s)| {
            let start = Instant::now();
            let outcome = run_cell(dataset, mask_propensities, grid, e, r, s);
            let wall = start.elapsed().as_secs_f64();
            match outcome {
                Ok((u, n, l)) => GridRow {
                    estimator: e.name().to_string(),
                    mask_ratio: r,
                    seed: s,
                    uauc: Some(u),
                    ndcg: Some(n),
                    train_loss: Some(l),
                    wall_time_s: wall,
                    config_hash: hash.clone(),
                    error: None,
                },
                Err(err) => GridRow {
                    estimator: e.name().to_string(),
                    mask_ratio: r,
                    seed: s,
                    uauc: None,
                    ndcg: None,
                    train_loss: None,
                    wall_time_s: wall,
                    config_hash: hash.clone(),
                    error: Some(err.to_string().replace([',', '\n'], ";")),
                },
            }
        })
        .collect())
}

/// Serialize rows to the fixed, versioned results CSV.
pub fn rows_to_csv(rows: &[GridRow]) -> String {
    let mut out = format!("# {RESULTS_SCHEMA}\n");
    out.push_str("estimator,mask_ratio,seed,uauc,ndcg,train_loss,wall_time_s,config_hash,error\n");
    for r in rows {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.estimator,
            r.mask_ratio,
            r.seed,
            opt(r.uauc),
            opt(r.ndcg),
            opt(r.train_loss),
            r.wall_time_s,
            r.config_hash,
            r.error.as_deref().unwrap_or("")
        ));
    }
    out
}

/// Parse a results CSV produced by [`rows_to_csv`].
pub fn rows_from_csv(text: &str) -> Result<Vec<GridRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("estimator,") {
            continue;
        }
        let f: Vec<&str> = line.splitn(9, ',').collect();
        if f.len() != 9 {
            return Err(PuidError::Parse { line: lineno + 1, msg: "expected 9 fields".into() });
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|e| PuidError::Parse { line: lineno + 1, msg: format!("bad {what}: {e}") })
        };
        let opt = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() { Ok(None) } else { num(s, what).map(Some) }
        };
        rows.push(GridRow {
            estimator: f[0].to_string(),
            mask_ratio: num(f[1], "mask_ratio")?,
            seed: num(f[2], "seed")? as u64,
            uauc: opt(f[3], "uauc")?,
            ndcg: opt(f[4], "ndcg")?,
            train_loss: opt(f[5], "train_loss")?,
            wall_time_s: num(f[6], "wall_time_s")?,
            config_hash: f[7].to_string(),
            error: if f[8].is_empty() { None } else { Some(f[8].to_string()) },
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

/// Seed-aggregated summary of one (mask_ratio, estimator) group.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub mask_ratio: f64,
    pub estimator: String,
    pub uauc_mean: f64,
    pub uauc_sd: f64,
    pub ndcg_mean: f64,
    pub ndcg_sd: f64,
    pub seeds: usize,
    pub failures: usize,
    pub best_uauc: bool,
    pub best_ndcg: bool,
}

/// Aggregate rows per (mask_ratio, estimator), flagging the best mean per
/// metric within each mask-ratio block.
pub fn aggregate_rows(rows: &[GridRow]) -> Result<Vec<Aggregate>> {
    if rows.is_empty() {
        return Err(PuidError::Data("cannot report an empty results table".into()));
    }
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in rows {
        let k = (r.mask_ratio, r.estimator.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut aggs: Vec<Aggregate> = keys
        .iter()
        .map(|(ratio, est)| {
            let mine: Vec<&GridRow> = rows
                .iter()
                .filter(|r| r.mask_ratio == *ratio && &r.estimator == est)
                .collect();
            let us: Vec<f64> = mine.iter().filter_map(|r| r.uauc).collect();
            let ns: Vec<f64> = mine.iter().filter_map(|r| r.ndcg).collect();
            let failures = mine.iter().filter(|r| r.error.is_some()).count();
            Aggregate {
                mask_ratio: *ratio,
                estimator: est.clone(),
                uauc_mean: if us.is_empty() { f64::NAN } else { mean(&us) },
                uauc_sd: if us.is_empty() { f64::NAN } else { std_dev(&us) },
                ndcg_mean: if ns.is_empty() { f64::NAN } else { mean(&ns) },
                ndcg_sd: if ns.is_empty() { f64::NAN } else { std_dev(&ns) },
                seeds: mine.len(),
                failures,
                best_uauc: false,
                best_ndcg: false,
            }
        })
        .collect();

    let ratios: Vec<f64> = {
        let mut r: Vec<f64> = aggs.iter().map(|a| a.mask_ratio).collect();
        r.dedup();
        r
    };
    for ratio in ratios {
        let idxs: Vec<usize> = (0..aggs.len()).filter(|&i| aggs[i].mask_ratio == ratio).collect();
        let best_by = |aggs: &[Aggregate], field: fn(&Aggregate) -> f64| {
            idxs.iter()
                .copied()
                .filter(|&i| field(&aggs[i]).is_finite())
                .max_by(|&a, &b| field(&aggs[a]).partial_cmp(&field(&aggs[b])).unwrap())
        };
        if let Some(i) = best_by(&aggs, |a| a.uauc_mean) {
            aggs[i].best_uauc = true;
        }
        if let Some(i) = best_by(&aggs, |a| a.ndcg_mean) {
            aggs[i].best_ndcg = true;
        }
    }
    Ok(aggs)
}

/// Render the aggregated report. Deterministic: the same rows always yield
/// the same bytes.
pub fn emit_report(rows: &[GridRow], format: ReportFormat) -> Result<String> {
    let aggs = aggregate_rows(rows)?;
    let fmt_pair = |m: f64, s: f64| {
        if m.is_nan() {
            "-".to_string()
        } else {
            format!("{m:.4} ± {s:.4}")
        }
    };
    match format {
        ReportFormat::Csv => {
            let mut out = format!("# {RESULTS_SCHEMA} report\n");
            out.push_str("mask_ratio,estimator,uauc_mean,uauc_sd,ndcg_mean,ndcg_sd,seeds,failures,best_uauc,best_ndcg\n");
            for a in &aggs {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    a.mask_ratio,
                    a.estimator,
                    a.uauc_mean,
                    a.uauc_sd,
                    a.ndcg_mean,
                    a.ndcg_sd,
                    a.seeds,
                    a.failures,
                    a.best_uauc,
                    a.best_ndcg
                ));
            }
            Ok(out)
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            let mut ratios: Vec<f64> = aggs.iter().map(|a| a.mask_ratio).collect();
            ratios.dedup();
            for ratio in ratios {
                out.push_str(&format!("## mask ratio {ratio}\n\n"));
                out.push_str("| estimator | uauc | ndcg | seeds | failures |\n");
                out.push_str("|---|---|---|---|---|\n");
                for a in aggs.iter().filter(|a| a.mask_ratio == ratio) {
                    let u = fmt_pair(a.uauc_mean, a.uauc_sd);
                    let n = fmt_pair(a.ndcg_mean, a.ndcg_sd);
                    let u = if a.best_uauc { format!("**{u}**") } else { u };
                    let n = if a.best_ndcg { format!("**{n}**") } else { n };
                    out.push_str(&format!(
                        "| {} | {} | {} | {} | {} |\n",
                        a.estimator, u, n, a.seeds, a.failures
                    ));
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}
