//! Pseudo-feature construction for ID-only datasets: a plain factorization
//! fit on the observed ratings, concatenated with a one-hot cluster id from
//! k-means over the learned embeddings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::math::kmeans;
use crate::{PuidError, Result};

const FIT_EPOCHS: usize = 50;
const FIT_LR: f64 = 0.05;
const FIT_L2: f64 = 1e-4;

/// Fit user/item embeddings with plain SGD matrix factorization
/// (squared loss, global-mean offset). Deterministic given seed.
fn fit_embeddings(dataset: &Dataset, dim: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = dataset.num_users;
    let n = dataset.num_items;
    let mut p: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..dim).map(|_| rng.gen_range(-0.1..0.1)).collect())
        .collect();
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-0.1..0.1)).collect())
        .collect();
    let mu = dataset.interactions.iter().map(|t| t.rating).sum::<f64>() / dataset.num_observed().max(1) as f64;

    let mut order: Vec<usize> = (0..dataset.num_observed()).collect();
    for _ in 0..FIT_EPOCHS {
        order.shuffle(rng);
        for &k in &order {
            let t = dataset.interactions[k];
            let (u, i) = (t.user as usize, t.item as usize);
            let pred = mu + crate::math::dot(&p[u], &q[i]);
            let err = pred - t.rating;
            for d in 0..dim {
                let pu = p[u][d];
                let qi = q[i][d];
                p[u][d] -= FIT_LR * (err * qi + FIT_L2 * pu);
                q[i][d] -= FIT_LR * (err * pu + FIT_L2 * qi);
            }
        }
    }
    (p, q)
}

fn mean_vec(rows: &[Vec<f64>], mask: &[bool]) -> Vec<f64> {
    let dim = rows.first().map_or(0, |r| r.len());
    let mut acc = vec![0.0; dim];
    let mut count = 0usize;
    for (row, &keep) in rows.iter().zip(mask) {
        if keep {
            count += 1;
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
    }
    if count > 0 {
        for a in &mut acc {
            *a /= count as f64;
        }
    }
    acc
}

/// Attach pseudo-features to a dataset: per side, the learned embedding
/// concatenated with a one-hot k-means cluster id. Users/items with no
/// observations get the global mean embedding and the cluster of that mean.
pub fn build_pseudo_features(dataset: &Dataset, latent_dim: usize, clusters: usize, seed: u64) -> Result<Dataset> {
    if latent_dim < 1 {
        return Err(PuidError::Usage("latent_dim must be >= 1".into()));
    }
    if clusters < 2 {
        return Err(PuidError::Usage("clusters must be >= 2".into()));
    }
    if dataset.num_observed() == 0 {
        return Err(PuidError::Data("cannot build pseudo-features without observed ratings".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut p, mut q) = fit_embeddings(dataset, latent_dim, &mut rng);

    let mut user_seen = vec![false; dataset.num_users];
    let mut item_seen = vec![false; dataset.num_items];
    for t in &dataset.interactions {
        user_seen[t.user as usize] = true;
        item_seen[t.item as usize] = true;
    }
    let user_mean = mean_vec(&p, &user_seen);
    let item_mean = mean_vec(&q, &item_seen);
    for (row, &seen) in p.iter_mut().zip(&user_seen) {
        if !seen {
            *row = user_mean.clone();
        }
    }
    for (row, &seen) in q.iter_mut().zip(&item_seen) {
        if !seen {
            *row = item_mean.clone();
        }
    }

    let (user_assign, _) = kmeans(&p, clusters, 100, &mut rng);
    let (item_assign, _) = kmeans(&q, clusters, 100, &mut rng);

    let one_hot = |emb: &[f64], cluster: usize| -> Vec<f64> {
        let mut f = Vec::with_capacity(emb.len() + clusters);
        f.extend_from_slice(emb);
        for c in 0..clusters {
            f.push(if c == cluster { 1.0 } else { 0.0 });
        }
        f
    };
    let user_features: Vec<Vec<f64>> = p.iter().zip(&user_assign).map(|(e, &c)| one_hot(e, c)).collect();
    let item_features: Vec<Vec<f64>> = q.iter().zip(&item_assign).map(|(e, &c)| one_hot(e, c)).collect();

    let mut out = dataset.clone();
    out.attach_features(user_features, item_features)?;
    Ok(out)
}
