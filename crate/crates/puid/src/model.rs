//! Rating and error-imputation predictors: biased matrix factorization with
//! an optional feature-fusion MLP, hand-rolled reverse-mode gradients, and
//! bit-exact JSON checkpointing.
//!
//! One parameter family serves both roles: rating models emit the raw score,
//! imputation models map it through softplus so imputed errors stay
//! non-negative.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::math::{sigmoid, softplus};
use crate::{PuidError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorType {
    Absolute,
    Squared,
}

impl std::str::FromStr for ErrorType {
    type Err = PuidError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" | "abs" => Ok(ErrorType::Absolute),
            "squared" | "sq" => Ok(ErrorType::Squared),
            other => Err(PuidError::Usage(format!("unknown error type '{other}'"))),
        }
    }
}

impl ErrorType {
    pub fn eval(&self, pred: f64, target: f64) -> f64 {
        match self {
            ErrorType::Absolute => (pred - target).abs(),
            ErrorType::Squared => (pred - target) * (pred - target),
        }
    }

    /// d error / d pred (sign convention: 0 at the kink of |.|).
    fn deriv(&self, pred: f64, target: f64) -> f64 {
        match self {
            ErrorType::Absolute => {
                if pred > target {
                    1.0
                } else if pred < target {
                    -1.0
                } else {
                    0.0
                }
            }
            ErrorType::Squared => 2.0 * (pred - target),
        }
    }
}

/// Source of pair feature vectors for the fusion network.
pub trait PairFeatureSource {
    fn feature_dim(&self) -> usize;
    fn fill(&self, user: u32, item: u32, buf: &mut [f64]);
}

impl PairFeatureSource for Dataset {
    fn feature_dim(&self) -> usize {
        Dataset::feature_dim(self)
    }
    fn fill(&self, user: u32, item: u32, buf: &mut [f64]) {
        self.fill_pair_features(user, item, buf)
    }
}

/// Feature source for fusion-off models.
pub struct NoFeatures;

impl PairFeatureSource for NoFeatures {
    fn feature_dim(&self) -> usize {
        0
    }
    fn fill(&self, _: u32, _: u32, _: &mut [f64]) {}
}

/// One-hidden-layer ReLU network producing a scalar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub in_dim: usize,
    pub hidden: usize,
    /// hidden x in_dim, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// 1 x hidden.
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    fn new(in_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Mlp {
        let scale = (2.0 / in_dim.max(1) as f64).sqrt() * 0.1;
        Mlp {
            in_dim,
            hidden,
            w1: (0..hidden * in_dim).map(|_| rng.gen_range(-scale..scale)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.gen_range(-scale..scale)).collect(),
            b2: 0.0,
        }
    }

    fn forward(&self, x: &[f64], pre: &mut Vec<f64>) -> f64 {
        pre.clear();
        let mut out = self.b2;
        for h in 0..self.hidden {
            let row = &self.w1[h * self.in_dim..(h + 1) * self.in_dim];
            let z = crate::math::dot(row, x) + self.b1[h];
            pre.push(z);
            if z > 0.0 {
                out += self.w2[h] * z;
            }
        }
        out
    }

    /// Backward pass: accumulates parameter grads into `g` and input grads
    /// into `dx` (both scaled by `upstream`).
    fn backward(&self, x: &[f64], pre: &[f64], upstream: f64, g: &mut MlpGrads, dx: &mut [f64]) {
        g.b2 += upstream;
        for h in 0..self.hidden {
            let z = pre[h];
            if z <= 0.0 {
                continue;
            }
            g.w2[h] += upstream * z;
            let dz = upstream * self.w2[h];
            g.b1[h] += dz;
            let row = &self.w1[h * self.in_dim..(h + 1) * self.in_dim];
            let grow = &mut g.w1[h * self.in_dim..(h + 1) * self.in_dim];
            for k in 0..self.in_dim {
                grow[k] += dz * x[k];
                dx[k] += dz * row[k];
            }
        }
    }
}

#[derive(Debug, Clone)]
struct MlpGrads {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

/// Shared predictor family for rating models (identity output) and
/// error-imputation models (softplus output).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorModel {
    pub num_users: usize,
    pub num_items: usize,
    pub dim: usize,
    pub user_emb: Vec<f64>,
    pub item_emb: Vec<f64>,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub global_bias: f64,
    pub fusion: Option<Mlp>,
    pub l2: f64,
    /// Softplus output map (imputation models).
    pub positive: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub l2: f64,
    /// Hidden width of the fusion network; None disables fusion.
    pub fusion_hidden: Option<usize>,
    /// Extra input width the fusion net sees beyond the two embeddings.
    pub feature_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { dim: 16, l2: 1e-5, fusion_hidden: None, feature_dim: 0 }
    }
}

impl FactorModel {
    pub fn new_rating(num_users: usize, num_items: usize, cfg: &ModelConfig, seed: u64) -> FactorModel {
        Self::new(num_users, num_items, cfg, seed, false)
    }

    pub fn new_imputation(num_users: usize, num_items: usize, cfg: &ModelConfig, seed: u64) -> FactorModel {
        Self::new(num_users, num_items, cfg, seed, true)
    }

    fn new(num_users: usize, num_items: usize, cfg: &ModelConfig, seed: u64, positive: bool) -> FactorModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = cfg.dim;
        let init = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> {
            (0..len).map(|_| rng.gen_range(-0.1..0.1)).collect()
        };
        let user_emb = init(&mut rng, num_users * d);
        let item_emb = init(&mut rng, num_items * d);
        let fusion = cfg
            .fusion_hidden
            .map(|h| Mlp::new(2 * d + cfg.feature_dim, h, &mut rng));
        FactorModel {
            num_users,
            num_items,
            dim: d,
            user_emb,
            item_emb,
            user_bias: vec![0.0; num_users],
            item_bias: vec![0.0; num_items],
            global_bias: 0.0,
            fusion,
            l2: cfg.l2,
            positive,
        }
    }

    fn raw_score(&self, user: u32, item: u32, feats: &[f64], pre: &mut Vec<f64>) -> f64 {
        let (u, i) = (user as usize, item as usize);
        let pu = &self.user_emb[u * self.dim..(u + 1) * self.dim];
        let qi = &self.item_emb[i * self.dim..(i + 1) * self.dim];
        let mut s = self.global_bias + self.user_bias[u] + self.item_bias[i] + crate::math::dot(pu, qi);
        if let Some(mlp) = &self.fusion {
            let mut x = Vec::with_capacity(mlp.in_dim);
            x.extend_from_slice(pu);
            x.extend_from_slice(qi);
            x.extend_from_slice(feats);
            debug_assert_eq!(x.len(), mlp.in_dim);
            s += mlp.forward(&x, pre);
        }
        s
    }

    /// Predicted output for the pair (rating, or imputed error if positive).
    pub fn predict(&self, user: u32, item: u32, feats: &dyn PairFeatureSource) -> f64 {
        let mut buf = vec![0.0; if self.fusion.is_some() { feats.feature_dim() } else { 0 }];
        if self.fusion.is_some() {
            feats.fill(user, item, &mut buf);
        }
        let mut pre = Vec::new();
        let raw = self.raw_score(user, item, &buf, &mut pre);
        if self.positive {
            softplus(raw)
        } else {
            raw
        }
    }

    /// Prediction error for an observed rating.
    pub fn error(&self, user: u32, item: u32, rating: f64, error_type: ErrorType, feats: &dyn PairFeatureSource) -> f64 {
        error_type.eval(self.predict(user, item, feats), rating)
    }

    /// Flattened parameter vector (fixed order; matches `set_param_vec`).
    pub fn param_vec(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(&self.user_emb);
        v.extend_from_slice(&self.item_emb);
        v.extend_from_slice(&self.user_bias);
        v.extend_from_slice(&self.item_bias);
        v.push(self.global_bias);
        if let Some(m) = &self.fusion {
            v.extend_from_slice(&m.w1);
            v.extend_from_slice(&m.b1);
            v.extend_from_slice(&m.w2);
            v.push(m.b2);
        }
        v
    }

    pub fn set_param_vec(&mut self, v: &[f64]) {
        let mut off = 0usize;
        let take = |dst: &mut [f64], off: &mut usize| {
            dst.copy_from_slice(&v[*off..*off + dst.len()]);
            *off += dst.len();
        };
        let mut ue = std::mem::take(&mut self.user_emb);
        take(&mut ue, &mut off);
        self.user_emb = ue;
        let mut ie = std::mem::take(&mut self.item_emb);
        take(&mut ie, &mut off);
        self.item_emb = ie;
        let mut ub = std::mem::take(&mut self.user_bias);
        take(&mut ub, &mut off);
        self.user_bias = ub;
        let mut ib = std::mem::take(&mut self.item_bias);
        take(&mut ib, &mut off);
        self.item_bias = ib;
        self.global_bias = v[off];
        off += 1;
        if let Some(m) = &mut self.fusion {
            let mut w1 = std::mem::take(&mut m.w1);
            take(&mut w1, &mut off);
            m.w1 = w1;
            let mut b1 = std::mem::take(&mut m.b1);
            take(&mut b1, &mut off);
            m.b1 = b1;
            let mut w2 = std::mem::take(&mut m.w2);
            take(&mut w2, &mut off);
            m.w2 = w2;
            m.b2 = v[off];
            off += 1;
        }
        assert_eq!(off, v.len());
    }

    /// L2 penalty (l2/2 * ||w||^2 over embeddings and fusion weights;
    /// biases are not regularized).
    pub fn l2_penalty(&self) -> f64 {
        let mut s: f64 = self.user_emb.iter().map(|w| w * w).sum::<f64>()
            + self.item_emb.iter().map(|w| w * w).sum::<f64>();
        if let Some(m) = &self.fusion {
            s += m.w1.iter().map(|w| w * w).sum::<f64>() + m.w2.iter().map(|w| w * w).sum::<f64>();
        }
        0.5 * self.l2 * s
    }

    /// Gradient of sum_k upstream_k * output(u_k, i_k) over the parameter
    /// vector (no L2 term). `upstream` is d loss / d output per term.
    pub fn grad_vec(&self, terms: &[(u32, u32, f64)], feats: &dyn PairFeatureSource) -> Result<Vec<f64>> {
        let d = self.dim;
        let mut g_user_emb = vec![0.0; self.user_emb.len()];
        let mut g_item_emb = vec![0.0; self.item_emb.len()];
        let mut g_user_bias = vec![0.0; self.user_bias.len()];
        let mut g_item_bias = vec![0.0; self.item_bias.len()];
        let mut g_global = 0.0f64;
        let mut g_mlp = self.fusion.as_ref().map(|m| MlpGrads {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: 0.0,
        });

        let fdim = if self.fusion.is_some() { feats.feature_dim() } else { 0 };
        let mut fbuf = vec![0.0; fdim];
        let mut pre = Vec::new();
        let mut xbuf: Vec<f64> = Vec::new();
        let mut dx: Vec<f64> = Vec::new();

        for &(user, item, upstream) in terms {
            if !upstream.is_finite() {
                return Err(PuidError::Numeric(format!("non-finite gradient at pair ({user},{item})")));
            }
            if upstream == 0.0 {
                continue;
            }
            let (u, i) = (user as usize, item as usize);
            if self.fusion.is_some() {
                feats.fill(user, item, &mut fbuf);
            }
            let raw = self.raw_score(user, item, &fbuf, &mut pre);
            let up = if self.positive { upstream * sigmoid(raw) } else { upstream };

            g_global += up;
            g_user_bias[u] += up;
            g_item_bias[i] += up;
            let (pu_s, pu_e) = (u * d, (u + 1) * d);
            let (qi_s, qi_e) = (i * d, (i + 1) * d);
            for k in 0..d {
                g_user_emb[pu_s + k] += up * self.item_emb[qi_s + k];
                g_item_emb[qi_s + k] += up * self.user_emb[pu_s + k];
            }
            if let (Some(mlp), Some(gm)) = (&self.fusion, g_mlp.as_mut()) {
                xbuf.clear();
                xbuf.extend_from_slice(&self.user_emb[pu_s..pu_e]);
                xbuf.extend_from_slice(&self.item_emb[qi_s..qi_e]);
                xbuf.extend_from_slice(&fbuf);
                dx.clear();
                dx.resize(mlp.in_dim, 0.0);
                mlp.backward(&xbuf, &pre, up, gm, &mut dx);
                // fusion input grads flow back into the embeddings
                for k in 0..d {
                    g_user_emb[pu_s + k] += dx[k];
                    g_item_emb[qi_s + k] += dx[d + k];
                }
            }
        }

        let mut v = Vec::new();
        v.extend_from_slice(&g_user_emb);
        v.extend_from_slice(&g_item_emb);
        v.extend_from_slice(&g_user_bias);
        v.extend_from_slice(&g_item_bias);
        v.push(g_global);
        if let Some(gm) = g_mlp {
            v.extend_from_slice(&gm.w1);
            v.extend_from_slice(&gm.b1);
            v.extend_from_slice(&gm.w2);
            v.push(gm.b2);
        }
        Ok(v)
    }

    /// Apply one SGD step: param -= lr * (grad + l2 * param) for regularized
    /// parameters, param -= lr * grad for biases.
    fn apply_grad_vec(&mut self, g: &[f64], lr: f64) {
        let reg_upto = self.user_emb.len() + self.item_emb.len();
        let bias_upto = reg_upto + self.user_bias.len() + self.item_bias.len() + 1;
        let mut v = self.param_vec();
        for (k, p) in v.iter_mut().enumerate() {
            let reg = if k < reg_upto {
                self.l2
            } else if k < bias_upto {
                0.0
            } else {
                // fusion block: w1 | b1 | w2 | b2, only weights regularized
                let m = self.fusion.as_ref().unwrap();
                let off = k - bias_upto;
                if off < m.w1.len() || (off >= m.w1.len() + m.b1.len() && off < m.w1.len() + m.b1.len() + m.w2.len())
                {
                    self.l2
                } else {
                    0.0
                }
            };
            *p -= lr * (g[k] + reg * *p);
        }
        self.set_param_vec(&v);
    }

    /// One stochastic-gradient step on the weighted rating-error sum
    /// sum_k w_k * e(u_k, i_k; target_k) plus the L2 penalty.
    pub fn gradient_step(
        &mut self,
        terms: &[WeightedTerm],
        error_type: ErrorType,
        learning_rate: f64,
        feats: &dyn PairFeatureSource,
    ) -> Result<()> {
        if learning_rate <= 0.0 {
            return Err(PuidError::Usage("learning_rate must be > 0".into()));
        }
        let ups: Vec<(u32, u32, f64)> = terms
            .iter()
            .map(|t| {
                let pred = self.predict(t.user, t.item, feats);
                (t.user, t.item, t.weight * error_type.deriv(pred, t.target))
            })
            .collect();
        let g = self.grad_vec(&ups, feats)?;
        self.apply_grad_vec(&g, learning_rate);
        Ok(())
    }

    /// One step on the weighted squared-discrepancy sum
    /// sum_k w_k * (output(u_k,i_k) - target_k)^2 plus L2 (imputation models).
    pub fn gradient_step_matching(
        &mut self,
        terms: &[WeightedTerm],
        learning_rate: f64,
        feats: &dyn PairFeatureSource,
    ) -> Result<()> {
        if learning_rate <= 0.0 {
            return Err(PuidError::Usage("learning_rate must be > 0".into()));
        }
        let ups: Vec<(u32, u32, f64)> = terms
            .iter()
            .map(|t| {
                let pred = self.predict(t.user, t.item, feats);
                (t.user, t.item, t.weight * 2.0 * (pred - t.target))
            })
            .collect();
        let g = self.grad_vec(&ups, feats)?;
        self.apply_grad_vec(&g, learning_rate);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let cp = Checkpoint { version: CHECKPOINT_VERSION, model: self.clone() };
        fs::write(path, serde_json::to_string(&cp).map_err(|e| PuidError::Data(e.to_string()))?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FactorModel> {
        let text = fs::read_to_string(path)?;
        let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| PuidError::Data(e.to_string()))?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(PuidError::Data(format!("unsupported checkpoint version {}", cp.version)));
        }
        Ok(cp.model)
    }
}

/// One weighted term of a gradient step: loss contribution
/// weight * f(output(user, item), target).
#[derive(Debug, Clone, Copy)]
pub struct WeightedTerm {
    pub user: u32,
    pub item: u32,
    pub weight: f64,
    pub target: f64,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model: FactorModel,
}

/// Frozen benchmark parameters and their cached per-pair errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkSnapshot {
    pub phi: FactorModel,
    pub theta: Option<FactorModel>,
    /// e(phi0) aligned with `dataset.interactions`.
    pub err_observed: Vec<f64>,
    /// e_hat(theta0) per grid cell, when theta is present.
    pub imp_grid: Option<Vec<f64>>,
    pub error_type: ErrorType,
}

/// Deep-copy and freeze benchmark models, caching e over O and e_hat over D.
pub fn snapshot(
    phi: &FactorModel,
    theta: Option<&FactorModel>,
    dataset: &Dataset,
    error_type: ErrorType,
) -> BenchmarkSnapshot {
    let feats: &dyn PairFeatureSource = dataset;
    let err_observed = dataset
        .interactions
        .iter()
        .map(|t| phi.error(t.user, t.item, t.rating, error_type, feats))
        .collect();
    let imp_grid = theta.map(|th| {
        let mut grid = vec![0.0; dataset.num_pairs()];
        for u in 0..dataset.num_users as u32 {
            for i in 0..dataset.num_items as u32 {
                grid[dataset.pair_index(u, i)] = th.predict(u, i, feats);
            }
        }
        grid
    });
    BenchmarkSnapshot {
        phi: phi.clone(),
        theta: theta.cloned(),
        err_observed,
        imp_grid,
        error_type,
    }
}

impl BenchmarkSnapshot {
    /// Recompute-and-compare consistency check of the caches.
    pub fn verify(&self, dataset: &Dataset, tol: f64) -> Result<()> {
        let fresh = snapshot(&self.phi, self.theta.as_ref(), dataset, self.error_type);
        if fresh.err_observed.len() != self.err_observed.len() {
            return Err(PuidError::Data("benchmark cache does not cover the observation set".into()));
        }
        for (a, b) in fresh.err_observed.iter().zip(&self.err_observed) {
            if (a - b).abs() > tol {
                return Err(PuidError::Data("stale benchmark error cache".into()));
            }
        }
        match (&fresh.imp_grid, &self.imp_grid) {
            (Some(f), Some(s)) => {
                for (a, b) in f.iter().zip(s) {
                    if (a - b).abs() > tol {
                        return Err(PuidError::Data("stale benchmark imputation cache".into()));
                    }
                }
            }
            (None, None) => {}
            _ => return Err(PuidError::Data("benchmark imputation cache mismatch".into())),
        }
        Ok(())
    }
}
