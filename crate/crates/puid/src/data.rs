//! Dataset ingestion and manipulation: triple/matrix loaders, observation
//! masking, and train/validation/test splits.
//!
//! A [`Dataset`] addresses the full user-item grid; observed interactions
//! carry ratings, unobserved cells are still addressable (needed by the
//! DR-family objectives which sum over the whole grid).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{PuidError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub rating: f64,
}

/// Input file formats for [`load_triples`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    /// Whitespace/TSV lines "user item rating".
    TripleTsv,
    /// Coat-style space-separated rating matrix, one row per user, 0 = missing.
    CoatMatrix,
}

impl std::str::FromStr for FileFormat {
    type Err = PuidError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triple_tsv" | "tsv" => Ok(FileFormat::TripleTsv),
            "coat_matrix" | "coat" => Ok(FileFormat::CoatMatrix),
            other => Err(PuidError::Usage(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub num_users: usize,
    pub num_items: usize,
    /// Observed interactions, sorted by (user, item).
    pub interactions: Vec<Interaction>,
    /// Per-user feature vectors; empty until attached.
    pub user_features: Vec<Vec<f64>>,
    /// Per-item feature vectors; empty until attached.
    pub item_features: Vec<Vec<f64>>,
    pub rating_scale: (f64, f64),
    #[serde(skip)]
    index: HashMap<(u32, u32), usize>,
}

impl Dataset {
    pub fn new(
        num_users: usize,
        num_items: usize,
        mut interactions: Vec<Interaction>,
        rating_scale: (f64, f64),
    ) -> Self {
        interactions.sort_by_key(|t| (t.user, t.item));
        let mut ds = Dataset {
            num_users,
            num_items,
            interactions,
            user_features: Vec::new(),
            item_features: Vec::new(),
            rating_scale,
            index: HashMap::new(),
        };
        ds.rebuild_index();
        ds
    }

    pub fn rebuild_index(&mut self) {
        self.index = self
            .interactions
            .iter()
            .enumerate()
            .map(|(k, t)| ((t.user, t.item), k))
            .collect();
    }

    /// |D| = m * n.
    pub fn num_pairs(&self) -> usize {
        self.num_users * self.num_items
    }

    /// |O|.
    pub fn num_observed(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_observed(&self, user: u32, item: u32) -> bool {
        self.index.contains_key(&(user, item))
    }

    pub fn rating(&self, user: u32, item: u32) -> Option<f64> {
        self.index.get(&(user, item)).map(|&k| self.interactions[k].rating)
    }

    /// Flat grid index u*n + i.
    pub fn pair_index(&self, user: u32, item: u32) -> usize {
        user as usize * self.num_items + item as usize
    }

    pub fn has_features(&self) -> bool {
        !self.user_features.is_empty() && !self.item_features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        let du = self.user_features.first().map_or(0, |f| f.len());
        let di = self.item_features.first().map_or(0, |f| f.len());
        du + di
    }

    /// Fill `buf` with the pair feature vector [x_u || x_i].
    pub fn fill_pair_features(&self, user: u32, item: u32, buf: &mut [f64]) {
        let fu = &self.user_features[user as usize];
        let fi = &self.item_features[item as usize];
        buf[..fu.len()].copy_from_slice(fu);
        buf[fu.len()..fu.len() + fi.len()].copy_from_slice(fi);
    }

    pub fn attach_features(&mut self, user_features: Vec<Vec<f64>>, item_features: Vec<Vec<f64>>) -> Result<()> {
        if user_features.len() != self.num_users || item_features.len() != self.num_items {
            return Err(PuidError::Data(format!(
                "feature tables sized {}x{} do not match dataset {}x{}",
                user_features.len(),
                item_features.len(),
                self.num_users,
                self.num_items
            )));
        }
        self.user_features = user_features;
        self.item_features = item_features;
        Ok(())
    }

    /// Keep only the interactions present in `keep` (indices into
    /// `self.interactions`); used by masking and split materialization.
    pub fn retain_interactions(&self, keep: &[usize]) -> Dataset {
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let kept = sorted.iter().map(|&k| self.interactions[k]).collect();
        let mut ds = Dataset::new(self.num_users, self.num_items, kept, self.rating_scale);
        ds.user_features = self.user_features.clone();
        ds.item_features = self.item_features.clone();
        ds
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadStats {
    /// Number of duplicate (u,i) lines dropped (keep-last rule).
    pub duplicates: usize,
}

/// Load a dataset from a triple file or Coat-style matrix.
///
/// Raw user/item ids are reindexed densely (ascending raw id order).
/// Duplicate (u,i) entries keep the last occurrence; the count is reported
/// in [`LoadStats`] for the caller to warn about.
pub fn load_triples(path: &Path, format: FileFormat, rating_scale: (f64, f64)) -> Result<(Dataset, LoadStats)> {
    let text = fs::read_to_string(path)?;
    match format {
        FileFormat::TripleTsv => load_triple_text(&text, rating_scale),
        FileFormat::CoatMatrix => load_coat_text(&text, rating_scale),
    }
}

fn load_triple_text(text: &str, rating_scale: (f64, f64)) -> Result<(Dataset, LoadStats)> {
    let mut raw: Vec<(u64, u64, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        fn parse<'a>(tok: Option<&'a str>, what: &str, lineno: usize) -> Result<&'a str> {
            tok.ok_or_else(|| PuidError::Parse {
                line: lineno + 1,
                msg: format!("missing {what}"),
            })
        }
        let u: u64 = parse(parts.next(), "user id", lineno)?.parse().map_err(|e| PuidError::Parse {
            line: lineno + 1,
            msg: format!("bad user id: {e}"),
        })?;
        let i: u64 = parse(parts.next(), "item id", lineno)?.parse().map_err(|e| PuidError::Parse {
            line: lineno + 1,
            msg: format!("bad item id: {e}"),
        })?;
        let r: f64 = parse(parts.next(), "rating", lineno)?.parse().map_err(|e| PuidError::Parse {
            line: lineno + 1,
            msg: format!("bad rating: {e}"),
        })?;
        raw.push((u, i, r));
    }
    build_from_raw(raw, rating_scale)
}

fn load_coat_text(text: &str, rating_scale: (f64, f64)) -> Result<(Dataset, LoadStats)> {
    let mut raw: Vec<(u64, u64, f64)> = Vec::new();
    let mut width: Option<usize> = None;
    let mut row = 0u64;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|e| PuidError::Parse {
                    line: lineno + 1,
                    msg: format!("bad matrix value: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(w) = width {
            if vals.len() != w {
                return Err(PuidError::Parse {
                    line: lineno + 1,
                    msg: format!("ragged matrix row: {} values, expected {w}", vals.len()),
                });
            }
        } else {
            width = Some(vals.len());
        }
        for (col, &v) in vals.iter().enumerate() {
            if v != 0.0 {
                raw.push((row, col as u64, v));
            }
        }
        row += 1;
    }
    // matrix rows/columns define the full grid even where all-zero
    let m = row as usize;
    let n = width.unwrap_or(0);
    let (mut ds, stats) = build_from_raw(raw, rating_scale)?;
    ds.num_users = ds.num_users.max(m);
    ds.num_items = ds.num_items.max(n);
    Ok((ds, stats))
}

fn build_from_raw(raw: Vec<(u64, u64, f64)>, rating_scale: (f64, f64)) -> Result<(Dataset, LoadStats)> {
    let mut users: Vec<u64> = raw.iter().map(|t| t.0).collect();
    let mut items: Vec<u64> = raw.iter().map(|t| t.1).collect();
    users.sort_unstable();
    users.dedup();
    items.sort_unstable();
    items.dedup();
    let umap: HashMap<u64, u32> = users.iter().enumerate().map(|(k, &v)| (v, k as u32)).collect();
    let imap: HashMap<u64, u32> = items.iter().enumerate().map(|(k, &v)| (v, k as u32)).collect();

    let mut seen: HashMap<(u32, u32), f64> = HashMap::new();
    let mut duplicates = 0usize;
    for (u, i, r) in raw {
        let key = (umap[&u], imap[&i]);
        if seen.insert(key, r).is_some() {
            duplicates += 1;
        }
    }
    let interactions: Vec<Interaction> = seen
        .into_iter()
        .map(|((user, item), rating)| Interaction { user, item, rating })
        .collect();
    let ds = Dataset::new(users.len(), items.len(), interactions, rating_scale);
    Ok((ds, LoadStats { duplicates }))
}

/// Write interactions back as a triple file (inverse of [`load_triples`]).
pub fn write_triples(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for t in &dataset.interactions {
        writeln!(out, "{}\t{}\t{}", t.user, t.item, t.rating).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Load a feature CSV "id,f1,f2,..." into a dense table of `count` rows.
pub fn load_features_csv(path: &Path, count: usize) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut table: Vec<Option<Vec<f64>>> = vec![None; count];
    let mut dim: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("id,") {
            continue;
        }
        let mut parts = line.split(',');
        let id: usize = parts
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|e| PuidError::Parse { line: lineno + 1, msg: format!("bad id: {e}") })?;
        let feats: Vec<f64> = parts
            .map(|p| {
                p.trim().parse::<f64>().map_err(|e| PuidError::Parse {
                    line: lineno + 1,
                    msg: format!("bad feature: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(d) = dim {
            if feats.len() != d {
                return Err(PuidError::Parse { line: lineno + 1, msg: "ragged feature row".into() });
            }
        } else {
            dim = Some(feats.len());
        }
        if id >= count {
            return Err(PuidError::Parse { line: lineno + 1, msg: format!("id {id} out of range {count}") });
        }
        table[id] = Some(feats);
    }
    let d = dim.unwrap_or(0);
    Ok(table.into_iter().map(|row| row.unwrap_or_else(|| vec![0.0; d])).collect())
}

pub fn write_features_csv(table: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (id, row) in table.iter().enumerate() {
        write!(out, "{id}").unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// How masking weights observed entries for removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskMode {
    /// Remove with probability proportional to estimated propensity
    /// (drops "easy" exposures, intensifying residual confounding).
    ProportionalToPropensity,
    /// Remove with probability proportional to inverse propensity.
    InverseToPropensity,
}

/// Flip exactly floor(mask_ratio * |O|) observed entries to unobserved,
/// sampled without replacement with weight given by `mode` over the
/// per-pair `propensities` grid (length m*n). Deterministic given seed.
pub fn apply_mask(
    dataset: &Dataset,
    mask_ratio: f64,
    propensities: &[f64],
    mode: MaskMode,
    seed: u64,
) -> Result<Dataset> {
    if !(0.0..1.0).contains(&mask_ratio) {
        return Err(PuidError::Usage(format!("mask_ratio {mask_ratio} outside [0,1)")));
    }
    if dataset.num_observed() == 0 {
        return Err(PuidError::Data("apply_mask on empty observation set".into()));
    }
    if propensities.len() != dataset.num_pairs() {
        return Err(PuidError::Data("propensity grid does not cover the dataset".into()));
    }
    let remove = (mask_ratio * dataset.num_observed() as f64).floor() as usize;
    if remove == 0 {
        return Ok(dataset.clone());
    }
    // Efraimidis-Spirakis weighted sampling without replacement:
    // key = U^(1/w); the `remove` largest keys are the sampled entries.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, usize)> = dataset
        .interactions
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let p = propensities[dataset.pair_index(t.user, t.item)].max(1e-12);
            let w = match mode {
                MaskMode::ProportionalToPropensity => p,
                MaskMode::InverseToPropensity => 1.0 / p,
            };
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            (u.powf(1.0 / w), k)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let removed: std::collections::HashSet<usize> = keyed[..remove].iter().map(|&(_, k)| k).collect();
    let keep: Vec<usize> = (0..dataset.num_observed()).filter(|k| !removed.contains(k)).collect();
    Ok(dataset.retain_interactions(&keep))
}

/// Disjoint train/validation/test indices over an evaluation pool.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Split `pool_size` indices by `fractions` (train, val, test).
/// Test and validation sizes are floors of their fractions; train takes
/// the remainder, so the three sets cover the pool exactly.
pub fn split(pool_size: usize, fractions: (f64, f64, f64), seed: u64) -> Result<SplitSpec> {
    let (ft, fv, fe) = fractions;
    for f in [ft, fv, fe] {
        if !(0.0..=1.0).contains(&f) {
            return Err(PuidError::Usage(format!("fraction {f} outside [0,1]")));
        }
    }
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(PuidError::Usage("fractions must sum to 1".into()));
    }
    let mut idx: Vec<usize> = (0..pool_size).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_test = (fe * pool_size as f64).floor() as usize;
    let n_val = (fv * pool_size as f64).floor() as usize;
    let test = idx[..n_test].to_vec();
    let validation = idx[n_test..n_test + n_val].to_vec();
    let train = idx[n_test + n_val..].to_vec();
    Ok(SplitSpec { train, validation, test, seed })
}
