//! Small numeric utilities shared across modules: seeded k-means,
//! quantiles, the logistic function, and a stable config hash.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    // ln(1 + e^x), overflow-safe
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means with k-means++ initialization. Returns (assignment, centroids).
/// Empty clusters are re-seeded with the point farthest from its centroid,
/// keeping every cluster nonempty. Deterministic given the rng state.
pub fn kmeans(points: &[Vec<f64>], k: usize, iters: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<Vec<f64>>) {
    assert!(k >= 1 && !points.is_empty());
    let k = k.min(points.len());
    let dim = points[0].len();

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..points.len())
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (idx, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    pick = idx;
                    break;
                }
            }
            pick
        };
        centroids.push(points[next].clone());
        for (idx, p) in points.iter().enumerate() {
            let d = sq_dist(p, centroids.last().unwrap());
            if d < d2[idx] {
                d2[idx] = d;
            }
        }
    }

    let mut assign = vec![0usize; points.len()];
    for _ in 0..iters {
        let mut changed = false;
        for (idx, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, cen) in centroids.iter().enumerate() {
                let d = sq_dist(p, cen);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[idx] != best {
                assign[idx] = best;
                changed = true;
            }
        }
        // recompute centroids
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (idx, p) in points.iter().enumerate() {
            counts[assign[idx]] += 1;
            for (s, v) in sums[assign[idx]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed from the point farthest from its current centroid
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centroids[assign[a]])
                            .partial_cmp(&sq_dist(&points[b], &centroids[assign[b]]))
                            .unwrap()
                            .then(a.cmp(&b))
                    })
                    .unwrap();
                centroids[c] = points[far].clone();
                assign[far] = c;
                changed = true;
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centroids[c][j] = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (assign, centroids)
}

/// Empirical quantile of sorted data at fraction q in [0,1] (linear interpolation).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// FNV-1a hash of a string, hex-encoded. Stable across platforms; used to
/// tag artifact filenames with their configuration.
pub fn fnv1a_hex(s: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator); 0 for fewer than 2 values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn kmeans_recovers_planted_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pts = Vec::new();
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let mut labels = Vec::new();
        for (ci, c) in centers.iter().enumerate() {
            for _ in 0..100 {
                pts.push(vec![c[0] + rng.gen::<f64>() - 0.5, c[1] + rng.gen::<f64>() - 0.5]);
                labels.push(ci);
            }
        }
        let (assign, _) = kmeans(&pts, 3, 50, &mut rng);
        // match up to permutation: majority label per cluster
        let mut correct = 0;
        for c in 0..3 {
            let mut counts = [0usize; 3];
            for (i, &a) in assign.iter().enumerate() {
                if a == c {
                    counts[labels[i]] += 1;
                }
            }
            correct += counts.iter().max().unwrap();
        }
        assert!(correct as f64 / pts.len() as f64 >= 0.95);
    }

    #[test]
    fn quantiles_and_stats() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-12);
        assert!((mean(&[0.6, 0.8]) - 0.7).abs() < 1e-12);
        assert!((std_dev(&[0.6, 0.8]) - 0.1414).abs() < 1e-3);
    }

    #[test]
    fn sigmoid_softplus_sane() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((softplus(100.0) - 100.0).abs() < 1e-9);
    }
}
