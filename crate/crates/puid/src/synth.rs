//! Synthetic confounded-data generator with known ground truth.
//!
//! Ratings come from a latent factor model plus a hidden-confounder
//! contribution; exposure is logistic in a score from observed features plus
//! `confounding_strength * (h_u + h_i)`. With zero confounding strength the
//! true propensity equals the nominal (feature-only) propensity exactly, and
//! the recorded gamma bound degenerates to 1.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Interaction};
use crate::math::sigmoid;
use crate::{PuidError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticGroundTruth {
    pub hidden_user: Vec<f64>,
    pub hidden_item: Vec<f64>,
    /// True exposure probability per grid cell (u*n + i).
    pub true_propensity: Vec<f64>,
    /// Feature-only exposure probability per grid cell.
    pub nominal_propensity: Vec<f64>,
    /// Odds-ratio bound Gamma* = exp(2 * confounding_strength * max|h|).
    pub true_gamma: f64,
    /// Noise-free-exposure rating for every grid cell.
    pub ideal_ratings: Vec<f64>,
    pub seed: u64,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generate an m x n confounded dataset. See module docs for the mechanism.
pub fn generate_synthetic(
    m: usize,
    n: usize,
    latent_dim: usize,
    confounding_strength: f64,
    base_exposure: f64,
    seed: u64,
) -> Result<(Dataset, SyntheticGroundTruth)> {
    if m == 0 || n == 0 || latent_dim == 0 {
        return Err(PuidError::Usage("m, n, latent_dim must be positive".into()));
    }
    if !(0.0..1.0).contains(&base_exposure) || base_exposure == 0.0 {
        return Err(PuidError::Usage("base_exposure must lie in (0,1)".into()));
    }
    if confounding_strength < 0.0 {
        return Err(PuidError::Usage("confounding_strength must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = latent_dim;
    let sd = (d as f64).sqrt();

    let user_latent: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| gauss(&mut rng)).collect()).collect();
    let item_latent: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| gauss(&mut rng)).collect()).collect();
    let hidden_user: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let hidden_item: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();

    // exposure score from observed features: linear in the latent vectors
    let w_user: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
    let w_item: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
    let su: Vec<f64> = user_latent.iter().map(|z| crate::math::dot(&w_user, z) / sd).collect();
    let si: Vec<f64> = item_latent.iter().map(|z| crate::math::dot(&w_item, z) / sd).collect();

    let shift_of = |u: usize, i: usize| -> f64 {
        confounding_strength * (hidden_user[u] + hidden_item[i])
    };

    // calibrate the intercept so the mean true propensity hits base_exposure
    let mean_exposure = |b0: f64| -> f64 {
        let mut acc = 0.0;
        for u in 0..m {
            for i in 0..n {
                let logit = b0 + 0.7 * (su[u] + si[i]) + shift_of(u, i);
                acc += sigmoid(logit);
            }
        }
        acc / (m * n) as f64
    };
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mean_exposure(mid) < base_exposure {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b0 = 0.5 * (lo + hi);

    let mut true_propensity = vec![0.0; m * n];
    let mut nominal_propensity = vec![0.0; m * n];
    let mut ideal_ratings = vec![0.0; m * n];
    let mut interactions = Vec::new();
    let scale = (1.0, 5.0);
    for u in 0..m {
        for i in 0..n {
            let idx = u * n + i;
            let nominal_logit = b0 + 0.7 * (su[u] + si[i]);
            let shift = shift_of(u, i);
            nominal_propensity[idx] = sigmoid(nominal_logit);
            true_propensity[idx] = if confounding_strength == 0.0 {
                nominal_propensity[idx]
            } else {
                sigmoid(nominal_logit + shift)
            };
            let raw = crate::math::dot(&user_latent[u], &item_latent[i]) / sd
                + shift_of(u, i)
                + 0.3 * gauss(&mut rng);
            let rating = (3.0 + 1.2 * raw).clamp(scale.0, scale.1);
            ideal_ratings[idx] = rating;
            if rng.gen::<f64>() < true_propensity[idx] {
                interactions.push(Interaction { user: u as u32, item: i as u32, rating });
            }
        }
    }

    let max_h = hidden_user
        .iter()
        .chain(hidden_item.iter())
        .fold(0.0f64, |a, &h| a.max(h.abs()));
    let true_gamma = (2.0 * confounding_strength * max_h).exp();

    let mut dataset = Dataset::new(m, n, interactions, scale);
    dataset.attach_features(user_latent, item_latent)?;
    let gt = SyntheticGroundTruth {
        hidden_user,
        hidden_item,
        true_propensity,
        nominal_propensity,
        true_gamma,
        ideal_ratings,
        seed,
    };
    Ok((dataset, gt))
}

/// Sample a uniformly-exposed (unbiased) test set: `per_user` items per user
/// drawn uniformly without replacement, excluding pairs observed in `exclude`.
/// Returns (user, item, ideal rating) triples.
pub fn uniform_test_set(
    gt: &SyntheticGroundTruth,
    num_users: usize,
    num_items: usize,
    per_user: usize,
    exclude: Option<&Dataset>,
    seed: u64,
) -> Vec<(u32, u32, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for u in 0..num_users as u32 {
        let mut candidates: Vec<u32> = (0..num_items as u32)
            .filter(|&i| exclude.map_or(true, |ds| !ds.is_observed(u, i)))
            .collect();
        candidates.shuffle(&mut rng);
        for &i in candidates.iter().take(per_user) {
            out.push((u, i, gt.ideal_ratings[u as usize * num_items + i as usize]));
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct GtHeader {
    true_gamma: f64,
    seed: u64,
    num_users: usize,
    num_items: usize,
}

/// Serialize ground truth as CSV (u,i,o,r,p_true,h_u,h_i) with a leading
/// `#`-prefixed JSON header carrying Gamma* and the seed.
pub fn write_ground_truth(gt: &SyntheticGroundTruth, dataset: &Dataset, path: &Path) -> Result<()> {
    let m = dataset.num_users;
    let n = dataset.num_items;
    let header = GtHeader { true_gamma: gt.true_gamma, seed: gt.seed, num_users: m, num_items: n };
    let mut out = String::new();
    writeln!(out, "#{}", serde_json::to_string(&header).unwrap()).unwrap();
    writeln!(out, "u,i,o,r,p_true,h_u,h_i").unwrap();
    for u in 0..m {
        for i in 0..n {
            let idx = u * n + i;
            let o = dataset.is_observed(u as u32, i as u32) as u8;
            writeln!(
                out,
                "{u},{i},{o},{},{},{},{}",
                gt.ideal_ratings[idx], gt.true_propensity[idx], gt.hidden_user[u], gt.hidden_item[i]
            )
            .unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}
