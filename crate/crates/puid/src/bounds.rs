//! Nominal propensity estimation and per-pair inverse-propensity boxes.
//!
//! `personalized_box` evaluates, per pair,
//!   a = 1 + (1/p - 1)/Gamma,  b = 1 + (1/p - 1)*Gamma,
//! so Gamma = 1 collapses the box to the point 1/p. `global_box` is the
//! uniform-Gamma special case used by the RD/BRD baselines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::entropy::SensitivityField;
use crate::math::sigmoid;
use crate::{PuidError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropensityMode {
    /// Logistic model on the pair feature vector [x_u || x_i].
    Logistic,
    /// Laplace-smoothed per-item exposure rate (alpha = 1).
    Popularity,
}

impl std::str::FromStr for PropensityMode {
    type Err = PuidError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(PropensityMode::Logistic),
            "popularity" => Ok(PropensityMode::Popularity),
            other => Err(PuidError::Usage(format!("unknown propensity mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropensityConfig {
    pub mode: PropensityMode,
    pub clip_floor: f64,
    /// Full-batch optimizer iterations for the logistic model.
    pub iterations: usize,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        PropensityConfig { mode: PropensityMode::Logistic, clip_floor: 0.02, iterations: 300 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropensityField {
    /// Estimated propensity per grid cell (u*n + i), clipped to [clip_floor, 1].
    pub p_hat: Vec<f64>,
    pub clip_floor: f64,
    /// Fitted parameters (logistic weights incl. bias, or per-item rates).
    pub model_params: Vec<f64>,
    /// Set when the dataset was fully observed (p identically 1).
    pub saturated: bool,
}

/// Fit the exposure model over the full grid.
/// Falls back to the popularity rate when no features are attached.
pub fn fit_propensity(dataset: &Dataset, config: &PropensityConfig) -> Result<PropensityField> {
    if config.clip_floor <= 0.0 {
        return Err(PuidError::Usage("clip_floor must be > 0".into()));
    }
    if dataset.num_observed() == dataset.num_pairs() {
        return Ok(PropensityField {
            p_hat: vec![1.0; dataset.num_pairs()],
            clip_floor: config.clip_floor,
            model_params: Vec::new(),
            saturated: true,
        });
    }
    let use_logistic = config.mode == PropensityMode::Logistic && dataset.has_features();
    if use_logistic {
        fit_logistic(dataset, config)
    } else {
        fit_popularity(dataset, config)
    }
}

fn fit_popularity(dataset: &Dataset, config: &PropensityConfig) -> Result<PropensityField> {
    let m = dataset.num_users;
    let n = dataset.num_items;
    let mut counts = vec![0usize; n];
    for t in &dataset.interactions {
        counts[t.item as usize] += 1;
    }
    let rates: Vec<f64> = counts
        .iter()
        .map(|&c| ((c + 1) as f64 / (m + 2) as f64).clamp(config.clip_floor, 1.0))
        .collect();
    let mut p_hat = vec![0.0; m * n];
    for u in 0..m {
        for i in 0..n {
            p_hat[u * n + i] = rates[i];
        }
    }
    Ok(PropensityField { p_hat, clip_floor: config.clip_floor, model_params: rates, saturated: false })
}

/// Full-batch logistic regression on [x_u || x_i] with Adam.
/// The separable structure (user score + item score + bias) keeps each
/// iteration at O(m*n + m*du + n*di).
fn fit_logistic(dataset: &Dataset, config: &PropensityConfig) -> Result<PropensityField> {
    let m = dataset.num_users;
    let n = dataset.num_items;
    let du = dataset.user_features[0].len();
    let di = dataset.item_features[0].len();

    // standardize features per dimension
    let standardize = |rows: &[Vec<f64>]| -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let dim = rows[0].len();
        let mut mu = vec![0.0; dim];
        let mut sd = vec![0.0; dim];
        for r in rows {
            for (a, v) in mu.iter_mut().zip(r) {
                *a += v;
            }
        }
        for a in &mut mu {
            *a /= rows.len() as f64;
        }
        for r in rows {
            for ((s, v), u) in sd.iter_mut().zip(r).zip(&mu) {
                *s += (v - u) * (v - u);
            }
        }
        for s in &mut sd {
            *s = (*s / rows.len() as f64).sqrt().max(1e-9);
        }
        let out = rows
            .iter()
            .map(|r| r.iter().zip(&mu).zip(&sd).map(|((v, u), s)| (v - u) / s).collect())
            .collect();
        (out, mu, sd)
    };
    let (xu, _, _) = standardize(&dataset.user_features);
    let (xi, _, _) = standardize(&dataset.item_features);

    let mut wu = vec![0.0; du];
    let mut wi = vec![0.0; di];
    let mut bias = 0.0f64;
    let (mut mu_m, mut mu_v) = (vec![0.0; du + di + 1], vec![0.0; du + di + 1]);
    let (b1, b2, eps, lr) = (0.9, 0.999, 1e-8, 0.2);

    let observed: Vec<bool> = {
        let mut o = vec![false; m * n];
        for t in &dataset.interactions {
            o[dataset.pair_index(t.user, t.item)] = true;
        }
        o
    };

    for step in 1..=config.iterations {
        let su: Vec<f64> = xu.iter().map(|x| crate::math::dot(&wu, x)).collect();
        let si: Vec<f64> = xi.iter().map(|x| crate::math::dot(&wi, x)).collect();
        // residual row/col sums
        let mut gu = vec![0.0; m];
        let mut gi = vec![0.0; n];
        let mut gb = 0.0;
        for u in 0..m {
            for i in 0..n {
                let p = sigmoid(bias + su[u] + si[i]);
                let g = p - observed[u * n + i] as u8 as f64;
                gu[u] += g;
                gi[i] += g;
                gb += g;
            }
        }
        let total = (m * n) as f64;
        let mut grad = vec![0.0; du + di + 1];
        for d in 0..du {
            grad[d] = xu.iter().zip(&gu).map(|(x, g)| x[d] * g).sum::<f64>() / total;
        }
        for d in 0..di {
            grad[du + d] = xi.iter().zip(&gi).map(|(x, g)| x[d] * g).sum::<f64>() / total;
        }
        grad[du + di] = gb / total;

        let t = step as f64;
        for (k, g) in grad.iter().enumerate() {
            mu_m[k] = b1 * mu_m[k] + (1.0 - b1) * g;
            mu_v[k] = b2 * mu_v[k] + (1.0 - b2) * g * g;
            let mh = mu_m[k] / (1.0 - b1.powf(t));
            let vh = mu_v[k] / (1.0 - b2.powf(t));
            let upd = lr * mh / (vh.sqrt() + eps);
            if k < du {
                wu[k] -= upd;
            } else if k < du + di {
                wi[k - du] -= upd;
            } else {
                bias -= upd;
            }
        }
    }

    let su: Vec<f64> = xu.iter().map(|x| crate::math::dot(&wu, x)).collect();
    let si: Vec<f64> = xi.iter().map(|x| crate::math::dot(&wi, x)).collect();
    let mut p_hat = vec![0.0; m * n];
    for u in 0..m {
        for i in 0..n {
            p_hat[u * n + i] = sigmoid(bias + su[u] + si[i]).clamp(config.clip_floor, 1.0);
        }
    }
    let mut params = wu;
    params.extend(wi);
    params.push(bias);
    if p_hat.iter().any(|p| !p.is_finite()) {
        return Err(PuidError::Numeric("non-finite propensity after fit".into()));
    }
    Ok(PropensityField { p_hat, clip_floor: config.clip_floor, model_params: params, saturated: false })
}

/// Per-pair inverse-propensity bounds [a, b].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintyBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl UncertaintyBox {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// CSV audit dump (u, i, p_hat, gamma, a, b).
    pub fn write_csv(
        &self,
        pf: &PropensityField,
        sf: &SensitivityField,
        num_items: usize,
        path: &Path,
    ) -> Result<()> {
        let mut out = String::from("u,i,p_hat,gamma,a,b\n");
        for idx in 0..self.lower.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                idx / num_items,
                idx % num_items,
                pf.p_hat[idx],
                sf.gamma[idx],
                self.lower[idx],
                self.upper[idx]
            )
            .unwrap();
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Exact per-pair box from nominal propensities and sensitivity scores.
pub fn personalized_box(pf: &PropensityField, sf: &SensitivityField) -> Result<UncertaintyBox> {
    if pf.p_hat.len() != sf.gamma.len() {
        return Err(PuidError::Data("propensity and sensitivity fields cover different pair sets".into()));
    }
    let mut lower = Vec::with_capacity(pf.p_hat.len());
    let mut upper = Vec::with_capacity(pf.p_hat.len());
    for (&p, &g) in pf.p_hat.iter().zip(&sf.gamma) {
        if p <= 0.0 {
            return Err(PuidError::Numeric(format!("non-positive propensity {p}")));
        }
        let inv = 1.0 / p - 1.0;
        lower.push(1.0 + inv / g);
        upper.push(1.0 + inv * g);
    }
    Ok(UncertaintyBox { lower, upper })
}

/// The uniform-Gamma box of the RD/BRD global-bound baselines.
pub fn global_box(pf: &PropensityField, gamma_global: f64) -> Result<UncertaintyBox> {
    if gamma_global < 1.0 {
        return Err(PuidError::Usage("gamma_global must be >= 1".into()));
    }
    let sf = SensitivityField::uniform(pf.p_hat.len(), gamma_global);
    personalized_box(pf, &sf)
}
