//! Discretized entropy estimation of the exposure indicator and conversion
//! of information gains into personalized sensitivity scores.
//!
//! Entropies are plug-in estimates over a hybrid feature partition:
//! scalar features get quantile bins, low-cardinality scalars get one group
//! per level, and multivariate features get k-means groups. Groups whose
//! marginal pair count falls below `min_cell_count` are merged with the
//! nearest group by centroid distance.
//!
//! All entropies are in bits (log base 2). Local entropy differences can be
//! negative in finite samples and are clamped at zero.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::math::{kmeans, quantile_sorted};
use crate::{PuidError, Result};

/// Entropy of a Bernoulli(p) variable in bits, with 0*log0 := 0.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// Plug-in marginal entropy of a binary sequence, in bits.
pub fn marginal_entropy(observed: &[bool]) -> Result<f64> {
    if observed.is_empty() {
        return Err(PuidError::Data("marginal_entropy of empty sequence".into()));
    }
    let ones = observed.iter().filter(|&&b| b).count();
    Ok(binary_entropy(ones as f64 / observed.len() as f64))
}

/// A two-sided grouping of users and items.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Partition {
    pub user_group: Vec<usize>,
    pub item_group: Vec<usize>,
    pub num_user_groups: usize,
    pub num_item_groups: usize,
    pub user_centroids: Vec<Vec<f64>>,
    pub item_centroids: Vec<Vec<f64>>,
    pub min_cell_count: usize,
    /// (side, absorbed group, target group) merge log.
    pub merges: Vec<(String, usize, usize)>,
}

impl Partition {
    /// Summary for the audit JSON: group sizes and merges performed.
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            num_user_groups: usize,
            num_item_groups: usize,
            user_group_sizes: Vec<usize>,
            item_group_sizes: Vec<usize>,
            min_cell_count: usize,
            merges: &'a [(String, usize, usize)],
        }
        let mut us = vec![0usize; self.num_user_groups];
        for &g in &self.user_group {
            us[g] += 1;
        }
        let mut is = vec![0usize; self.num_item_groups];
        for &g in &self.item_group {
            is[g] += 1;
        }
        serde_json::to_string_pretty(&Summary {
            num_user_groups: self.num_user_groups,
            num_item_groups: self.num_item_groups,
            user_group_sizes: us,
            item_group_sizes: is,
            min_cell_count: self.min_cell_count,
            merges: &self.merges,
        })
        .unwrap()
    }
}

fn centroid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Group one side's feature rows into at most `groups` groups.
fn group_side(
    features: &[Vec<f64>],
    groups: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<Vec<f64>>) {
    let dim = features.first().map_or(0, |f| f.len());
    if dim == 0 || groups <= 1 {
        return (vec![0; features.len()], vec![vec![0.0; dim.max(1)]]);
    }
    if dim == 1 {
        let mut vals: Vec<f64> = features.iter().map(|f| f[0]).collect();
        let mut distinct = vals.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        if distinct.len() <= groups {
            // categorical: one group per level
            let assign: Vec<usize> = vals
                .iter()
                .map(|v| distinct.iter().position(|d| d == v).unwrap())
                .collect();
            let cents = distinct.iter().map(|&d| vec![d]).collect();
            return (assign, cents);
        }
        // quantile bins
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut edges: Vec<f64> = (1..groups).map(|j| quantile_sorted(&vals, j as f64 / groups as f64)).collect();
        edges.dedup();
        let assign: Vec<usize> = features
            .iter()
            .map(|f| edges.iter().take_while(|&&e| f[0] > e).count())
            .collect();
        let k = edges.len() + 1;
        // centroid = mean value per bin
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (f, &g) in features.iter().zip(&assign) {
            sums[g] += f[0];
            counts[g] += 1;
        }
        let cents = (0..k)
            .map(|g| vec![if counts[g] > 0 { sums[g] / counts[g] as f64 } else { 0.0 }])
            .collect();
        return (assign, cents);
    }
    kmeans(features, groups, 100, rng)
}

/// Compact labels to 0..k-1 preserving first-use order and drop empty groups.
fn compact(assign: &mut [usize], centroids: &mut Vec<Vec<f64>>) -> usize {
    let mut map: Vec<Option<usize>> = vec![None; centroids.len()];
    let mut next = 0usize;
    for a in assign.iter_mut() {
        if map[*a].is_none() {
            map[*a] = Some(next);
            next += 1;
        }
        *a = map[*a].unwrap();
    }
    let mut new_cents = vec![Vec::new(); next];
    for (old, &m) in map.iter().enumerate() {
        if let Some(new) = m {
            new_cents[new] = centroids[old].clone();
        }
    }
    *centroids = new_cents;
    next
}

/// Merge groups whose marginal cell count (group size x other-side count)
/// falls below `min_cell_count` into the nearest group by centroid distance
/// (ties to the lower-id group).
fn merge_small(
    assign: &mut [usize],
    centroids: &mut Vec<Vec<f64>>,
    other_side: usize,
    min_cell_count: usize,
    side: &str,
    merges: &mut Vec<(String, usize, usize)>,
) {
    loop {
        let k = centroids.len();
        if k <= 1 {
            break;
        }
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let small = (0..k)
            .filter(|&g| sizes[g] * other_side < min_cell_count)
            .min_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(a.cmp(&b)));
        let Some(g) = small else { break };
        let target = (0..k)
            .filter(|&h| h != g)
            .min_by(|&a, &b| {
                centroid_dist(&centroids[g], &centroids[a])
                    .partial_cmp(&centroid_dist(&centroids[g], &centroids[b]))
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .unwrap();
        merges.push((side.to_string(), g, target));
        // weighted centroid update, then relabel
        let (sg, st) = (sizes[g] as f64, sizes[target] as f64);
        let tot = (sg + st).max(1.0);
        let merged: Vec<f64> = centroids[g]
            .iter()
            .zip(&centroids[target])
            .map(|(a, b)| (a * sg + b * st) / tot)
            .collect();
        centroids[target] = merged;
        for a in assign.iter_mut() {
            if *a == g {
                *a = target;
            }
        }
        compact(assign, centroids);
    }
}

/// Build a two-sided partition of the dataset's feature space.
pub fn partition_features(
    dataset: &Dataset,
    groups_user: usize,
    groups_item: usize,
    min_cell_count: usize,
    seed: u64,
) -> Result<Partition> {
    if groups_user < 1 || groups_item < 1 {
        return Err(PuidError::Usage("group counts must be >= 1".into()));
    }
    if !dataset.has_features() {
        return Err(PuidError::Data("partition_features requires attached features".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut merges = Vec::new();

    let (mut ug, mut uc) = group_side(&dataset.user_features, groups_user, &mut rng);
    compact(&mut ug, &mut uc);
    merge_small(&mut ug, &mut uc, dataset.num_items, min_cell_count, "user", &mut merges);

    let (mut ig, mut ic) = group_side(&dataset.item_features, groups_item, &mut rng);
    compact(&mut ig, &mut ic);
    merge_small(&mut ig, &mut ic, dataset.num_users, min_cell_count, "item", &mut merges);

    Ok(Partition {
        num_user_groups: uc.len(),
        num_item_groups: ic.len(),
        user_group: ug,
        item_group: ig,
        user_centroids: uc,
        item_centroids: ic,
        min_cell_count,
        merges,
    })
}

/// Plug-in conditional entropy of the exposure indicator given a cell id per
/// grid pair: sum_j P(cell_j) * H(o | cell_j), in bits.
pub fn conditional_entropy(dataset: &Dataset, cell_of: &dyn Fn(u32, u32) -> usize, num_cells: usize) -> f64 {
    let mut counts = vec![0usize; num_cells];
    let mut ones = vec![0usize; num_cells];
    for u in 0..dataset.num_users as u32 {
        for i in 0..dataset.num_items as u32 {
            let c = cell_of(u, i);
            counts[c] += 1;
            ones[c] += dataset.is_observed(u, i) as usize;
        }
    }
    let total = dataset.num_pairs() as f64;
    let mut h = 0.0;
    for c in 0..num_cells {
        if counts[c] == 0 {
            continue;
        }
        let mass = counts[c] as f64 / total;
        h += mass * binary_entropy(ones[c] as f64 / counts[c] as f64);
    }
    h
}

/// Per-pair local information gains.
#[derive(Debug, Clone)]
pub struct LocalGains {
    /// max(0, H(o) - H(o | user group)) per grid pair.
    pub term_user: Vec<f64>,
    /// max(0, H(o | user group) - H(o | user group, item group)) per grid pair.
    pub term_pair: Vec<f64>,
}

/// Evaluate the two entropy-gain terms locally at each pair's cells.
/// Joint cells below `min_cell_count` pairs fall back to the user-group
/// entropy (term_pair = 0 there).
pub fn local_information_gains(dataset: &Dataset, partition: &Partition) -> LocalGains {
    let m = dataset.num_users;
    let n = dataset.num_items;
    let gu = partition.num_user_groups;
    let gi = partition.num_item_groups;

    let mut user_group_size = vec![0usize; gu];
    for &g in &partition.user_group {
        user_group_size[g] += 1;
    }
    let mut item_group_size = vec![0usize; gi];
    for &g in &partition.item_group {
        item_group_size[g] += 1;
    }

    // observed counts per user group and per joint cell over the full grid
    let mut ones_user = vec![0usize; gu];
    let mut ones_joint = vec![0usize; gu * gi];
    for t in &dataset.interactions {
        let ug = partition.user_group[t.user as usize];
        let ig = partition.item_group[t.item as usize];
        ones_user[ug] += 1;
        ones_joint[ug * gi + ig] += 1;
    }

    let h_marginal = binary_entropy(dataset.num_observed() as f64 / dataset.num_pairs() as f64);
    let h_user: Vec<f64> = (0..gu)
        .map(|g| {
            let cells = user_group_size[g] * n;
            if cells == 0 {
                0.0
            } else {
                binary_entropy(ones_user[g] as f64 / cells as f64)
            }
        })
        .collect();
    let h_joint: Vec<Option<f64>> = (0..gu * gi)
        .map(|c| {
            let cells = user_group_size[c / gi] * item_group_size[c % gi];
            if cells < partition.min_cell_count.max(1) {
                None // sparse joint cell: fall back to the user-group entropy
            } else {
                Some(binary_entropy(ones_joint[c] as f64 / cells as f64))
            }
        })
        .collect();

    let mut term_user = vec![0.0; m * n];
    let mut term_pair = vec![0.0; m * n];
    for u in 0..m {
        let ug = partition.user_group[u];
        let tu = (h_marginal - h_user[ug]).max(0.0);
        for i in 0..n {
            let ig = partition.item_group[i];
            let idx = u * n + i;
            term_user[idx] = tu;
            term_pair[idx] = match h_joint[ug * gi + ig] {
                Some(hj) => (h_user[ug] - hj).max(0.0),
                None => 0.0,
            };
        }
    }
    LocalGains { term_user, term_pair }
}

/// Per-pair sensitivity scores and their normalization metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityField {
    pub raw_score: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_max: f64,
    pub term_user: Vec<f64>,
    pub term_pair: Vec<f64>,
}

impl SensitivityField {
    /// Uniform field Gamma == g over an m*n grid (the global-bound baselines).
    pub fn uniform(num_pairs: usize, g: f64) -> SensitivityField {
        SensitivityField {
            raw_score: vec![0.0; num_pairs],
            gamma: vec![g; num_pairs],
            alpha: 0.0,
            beta: 0.0,
            gamma_max: g,
            term_user: vec![0.0; num_pairs],
            term_pair: vec![0.0; num_pairs],
        }
    }

    /// CSV audit dump (u, i, term_user, term_pair, s, gamma).
    pub fn write_csv(&self, num_items: usize, path: &Path) -> Result<()> {
        let mut out = String::from("u,i,term_user,term_pair,s,gamma\n");
        for (idx, g) in self.gamma.iter().enumerate() {
            let u = idx / num_items;
            let i = idx % num_items;
            writeln!(
                out,
                "{u},{i},{},{},{},{g}",
                self.term_user[idx], self.term_pair[idx], self.raw_score[idx]
            )
            .unwrap();
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Combine gain terms into per-pair Gamma via affine min-max normalization
/// onto [1, gamma_max]. A degenerate score range maps every pair to
/// gamma_max (the global-bound baseline).
pub fn compute_gamma(gains: &LocalGains, alpha: f64, beta: f64, gamma_max: f64) -> Result<SensitivityField> {
    if alpha < 0.0 || beta < 0.0 {
        return Err(PuidError::Usage("alpha and beta must be non-negative".into()));
    }
    if gamma_max < 1.0 {
        return Err(PuidError::Usage("gamma_max must be >= 1".into()));
    }
    let raw: Vec<f64> = gains
        .term_user
        .iter()
        .zip(&gains.term_pair)
        .map(|(tu, tp)| alpha * tu + beta * tp)
        .collect();
    let s_min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let gamma: Vec<f64> = if s_max - s_min <= 0.0 {
        vec![gamma_max; raw.len()]
    } else {
        raw.iter()
            .map(|s| 1.0 + (gamma_max - 1.0) * (s - s_min) / (s_max - s_min))
            .collect()
    };
    Ok(SensitivityField {
        raw_score: raw,
        gamma,
        alpha,
        beta,
        gamma_max,
        term_user: gains.term_user.clone(),
        term_pair: gains.term_pair.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Interaction;
    use rand::Rng;

    fn grid_dataset(m: usize, n: usize, mut observed: impl FnMut(u32, u32) -> bool) -> Dataset {
        let mut inter = Vec::new();
        for u in 0..m as u32 {
            for i in 0..n as u32 {
                if observed(u, i) {
                    inter.push(Interaction { user: u, item: i, rating: 3.0 });
                }
            }
        }
        Dataset::new(m, n, inter, (1.0, 5.0))
    }

    #[test]
    fn marginal_entropy_basics() {
        assert_eq!(marginal_entropy(&[true, true, true]).unwrap(), 0.0);
        assert!((marginal_entropy(&[true, false]).unwrap() - 1.0).abs() < 1e-15);
        let h = marginal_entropy(&[true, false, false, false]).unwrap();
        let expect = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
        assert!((h - expect).abs() < 1e-12);
        assert!((expect - 0.8113).abs() < 1e-4);
        assert!(marginal_entropy(&[]).is_err());
    }

    #[test]
    fn conditional_single_cell_equals_marginal() {
        let ds = grid_dataset(10, 10, |u, i| (u + i) % 3 == 0);
        let h_cond = conditional_entropy(&ds, &|_, _| 0, 1);
        let h_marg = binary_entropy(ds.num_observed() as f64 / ds.num_pairs() as f64);
        assert!((h_cond - h_marg).abs() < 1e-15);
    }

    #[test]
    fn conditional_two_pure_cells_is_zero() {
        // cell 0: all observed; cell 1: none observed; marginal = 1 bit
        let ds = grid_dataset(10, 10, |u, _| u < 5);
        let h = conditional_entropy(&ds, &|u, _| (u >= 5) as usize, 2);
        assert!(h.abs() < 1e-15);
        let h_marg = binary_entropy(0.5);
        assert!((h_marg - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_independent_grouping_close_to_marginal() {
        // 10^4 pairs, exposure independent of the grouping
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = grid_dataset(100, 100, |_, _| rng.gen::<f64>() < 0.3);
        let h_cond = conditional_entropy(&ds, &|u, _| (u % 4) as usize, 4);
        let h_marg = binary_entropy(ds.num_observed() as f64 / ds.num_pairs() as f64);
        assert!(h_cond <= h_marg + 1e-12);
        assert!((h_marg - h_cond).abs() < 0.02);
    }

    #[test]
    fn refinement_never_increases_conditional_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ds = grid_dataset(40, 40, |u, _| rng.gen::<f64>() < 0.1 + 0.01 * u as f64);
        let coarse = conditional_entropy(&ds, &|u, _| (u / 20) as usize, 2);
        let fine = conditional_entropy(&ds, &|u, _| (u / 10) as usize, 4);
        assert!(fine <= coarse + 1e-12);
        let h_marg = binary_entropy(ds.num_observed() as f64 / ds.num_pairs() as f64);
        assert!(coarse <= h_marg + 1e-12);
    }

    #[test]
    fn quantile_partition_equal_bins() {
        let mut ds = grid_dataset(100, 4, |u, i| (u + i) % 2 == 0);
        let uf: Vec<Vec<f64>> = (0..100).map(|u| vec![u as f64]).collect();
        let itf: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        ds.attach_features(uf, itf).unwrap();
        let p = partition_features(&ds, 4, 1, 1, 0).unwrap();
        let mut sizes = vec![0usize; p.num_user_groups];
        for &g in &p.user_group {
            sizes[g] += 1;
        }
        assert_eq!(p.num_user_groups, 4);
        assert_eq!(sizes, vec![25, 25, 25, 25]);
    }

    #[test]
    fn identical_features_single_group() {
        let mut ds = grid_dataset(20, 5, |u, _| u % 2 == 0);
        ds.attach_features(vec![vec![1.0]; 20], vec![vec![2.0]; 5]).unwrap();
        let p = partition_features(&ds, 4, 4, 1, 0).unwrap();
        assert_eq!(p.num_user_groups, 1);
        assert_eq!(p.num_item_groups, 1);
        // one global group => both local gain terms are 0 everywhere
        let gains = local_information_gains(&ds, &p);
        assert!(gains.term_user.iter().all(|&t| t == 0.0));
        assert!(gains.term_pair.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn merge_respects_min_cell_count() {
        let mut ds = grid_dataset(10, 10, |_, _| true);
        let uf: Vec<Vec<f64>> = (0..10).map(|u| vec![u as f64]).collect();
        ds.attach_features(uf, vec![vec![0.0]; 10]).unwrap();
        // 10 distinct user levels, min_cell_count 25 pairs => groups of >= 3 users
        let p = partition_features(&ds, 10, 1, 25, 0).unwrap();
        let mut sizes = vec![0usize; p.num_user_groups];
        for &g in &p.user_group {
            sizes[g] += 1;
        }
        for s in sizes {
            assert!(s * 10 >= 25, "marginal cell below min_cell_count");
        }
        assert!(!p.merges.is_empty());
    }

    #[test]
    fn local_gains_match_hand_computed_2x2_table() {
        // planted 2x2 cell rates
        let rates = [[0.8, 0.2], [0.5, 0.5]];
        let m = 40;
        let n = 40;
        let mut inter = Vec::new();
        for u in 0..m as u32 {
            for i in 0..n as u32 {
                let gu = (u as usize) / 20;
                let gi = (i as usize) / 20;
                // deterministic pattern achieving the exact rate per cell
                let r = rates[gu][gi];
                let slot = (u % 20) * 20 + (i % 20);
                if (slot as f64) < r * 400.0 {
                    inter.push(Interaction { user: u, item: i, rating: 3.0 });
                }
            }
        }
        let mut ds = Dataset::new(m, n, inter, (1.0, 5.0));
        ds.attach_features(
            (0..m).map(|u| vec![(u / 20) as f64]).collect(),
            (0..n).map(|i| vec![(i / 20) as f64]).collect(),
        )
        .unwrap();
        let p = partition_features(&ds, 2, 2, 1, 0).unwrap();
        let gains = local_information_gains(&ds, &p);

        let h_marg = binary_entropy(ds.num_observed() as f64 / ds.num_pairs() as f64);
        for (gu, row) in rates.iter().enumerate() {
            let h_user = binary_entropy((row[0] + row[1]) / 2.0);
            for (gi, &r) in row.iter().enumerate() {
                let idx = (gu * 20) * n + gi * 20;
                assert!((gains.term_user[idx] - (h_marg - h_user).max(0.0)).abs() < 1e-12);
                assert!((gains.term_pair[idx] - (h_user - binary_entropy(r)).max(0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn permuted_exposure_drives_terms_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // exposure independent of features by construction (random permutation)
        let ds0 = grid_dataset(100, 100, |_, _| rng.gen::<f64>() < 0.25);
        let mut ds = ds0.clone();
        ds.attach_features(
            (0..100).map(|u| vec![(u % 8) as f64]).collect(),
            (0..100).map(|i| vec![(i % 8) as f64]).collect(),
        )
        .unwrap();
        let p = partition_features(&ds, 8, 8, 50, 0).unwrap();
        let gains = local_information_gains(&ds, &p);
        let mean_term =
            (gains.term_user.iter().sum::<f64>() + gains.term_pair.iter().sum::<f64>()) / gains.term_user.len() as f64;
        assert!(mean_term < 0.05, "mean term {mean_term}");
    }

    #[test]
    fn gamma_affine_map_and_degeneracies() {
        let gains = LocalGains {
            term_user: vec![0.0, 0.5, 1.0],
            term_pair: vec![0.0, 0.0, 0.0],
        };
        let f = compute_gamma(&gains, 1.0, 1.0, 3.0).unwrap();
        assert_eq!(f.gamma, vec![1.0, 2.0, 3.0]);

        // gamma_max = 1 => all 1
        let f1 = compute_gamma(&gains, 1.0, 1.0, 1.0).unwrap();
        assert!(f1.gamma.iter().all(|&g| g == 1.0));

        // uniform scores => gamma_max uniformly
        let flat = LocalGains { term_user: vec![0.3; 4], term_pair: vec![0.1; 4] };
        let ff = compute_gamma(&flat, 1.0, 1.0, 2.5).unwrap();
        assert!(ff.gamma.iter().all(|&g| g == 2.5));

        assert!(compute_gamma(&gains, -1.0, 0.0, 2.0).is_err());
        assert!(compute_gamma(&gains, 0.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn entropy_invariant_to_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ds = grid_dataset(30, 30, |_, _| rng.gen::<f64>() < 0.4);
        let h1 = conditional_entropy(&ds, &|u, _| (u % 3) as usize, 3);
        // relabel users u -> (u*7) % 30 (a permutation), relabel groups consistently
        let perm: Vec<u32> = (0..30u32).map(|u| (u * 7) % 30).collect();
        let mut inter = Vec::new();
        for t in &ds.interactions {
            inter.push(Interaction { user: perm[t.user as usize], item: t.item, rating: t.rating });
        }
        let ds2 = Dataset::new(30, 30, inter, (1.0, 5.0));
        let inv: Vec<u32> = {
            let mut v = vec![0u32; 30];
            for (a, &b) in perm.iter().enumerate() {
                v[b as usize] = a as u32;
            }
            v
        };
        let h2 = conditional_entropy(&ds2, &|u, _| (inv[u as usize] % 3) as usize, 3);
        assert!((h1 - h2).abs() < 1e-15);
    }
}
