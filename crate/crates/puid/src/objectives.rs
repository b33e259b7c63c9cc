//! Loss functionals: naive, IPS, DR, the personalized robust PUID-IPS/DR
//! objectives, both imputation objectives, and the benchmark-guided BPUID
//! variants.
//!
//! Every adversarial loss maximizes a function linear in each weight over a
//! per-pair box, so the inner maximum is attained at an endpoint: upper bound
//! for positive coefficients, lower bound otherwise (ties at zero take the
//! lower bound for determinism). The closed form is exact; small instances
//! are cross-checked against corner enumeration in the tests.

use serde::Serialize;

use crate::bounds::{PropensityField, UncertaintyBox};
use crate::data::Dataset;
use crate::model::{BenchmarkSnapshot, ErrorType, FactorModel, PairFeatureSource};
use crate::{PuidError, Result};

/// Chosen adversarial weights per contributing pair.
#[derive(Debug, Clone)]
pub struct AdversarialWeights {
    pub pairs: Vec<(u32, u32)>,
    pub w: Vec<f64>,
}

/// Estimator tags for loss reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTag {
    Naive,
    Ips,
    Dr,
    PuidIps,
    PuidDr,
    ImpPuid,
    BpuidIps,
    BpuidDr,
    ImpBpuid,
}

/// One contributing pair of a loss: value = (constant + sum coeff*weight)/norm.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LossEntry {
    pub user: u32,
    pub item: u32,
    pub coeff: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LossReport {
    pub tag: LossTag,
    pub value: f64,
    /// Denominator (|D| or |O|).
    pub norm: f64,
    /// Weight-independent part of the numerator.
    pub constant: f64,
    pub entries: Vec<LossEntry>,
}

impl LossReport {
    /// Recompute the value from coefficients and weights (audit invariant).
    pub fn recompute(&self) -> f64 {
        let s: f64 = self.entries.iter().map(|e| e.coeff * e.weight).sum();
        (self.constant + s) / self.norm
    }

    /// Weight statistics (min, mean, max) for the JSON export.
    pub fn weight_stats(&self) -> (f64, f64, f64) {
        if self.entries.is_empty() {
            return (0.0, 0.0, 0.0);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for e in &self.entries {
            lo = lo.min(e.weight);
            hi = hi.max(e.weight);
            sum += e.weight;
        }
        (lo, sum / self.entries.len() as f64, hi)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Export<'a> {
            estimator: LossTag,
            value: f64,
            weight_min: f64,
            weight_mean: f64,
            weight_max: f64,
            num_entries: usize,
            #[serde(skip_serializing_if = "Option::is_none")]
            diagnostics: Option<&'a serde_json::Value>,
        }
        let (lo, mean, hi) = self.weight_stats();
        serde_json::to_string(&Export {
            estimator: self.tag,
            value: self.value,
            weight_min: lo,
            weight_mean: mean,
            weight_max: hi,
            num_entries: self.entries.len(),
            diagnostics: None,
        })
        .unwrap()
    }
}

/// Closed-form maximizer of sum_k c_k * w_k over a per-pair box:
/// w* = upper where c > 0, lower otherwise. Returns the chosen weights and
/// the exact maximum value.
pub fn inner_maximize(
    coefficients: &[(u32, u32, f64)],
    lower: &dyn Fn(u32, u32) -> f64,
    upper: &dyn Fn(u32, u32) -> f64,
) -> Result<(AdversarialWeights, f64)> {
    let mut pairs = Vec::with_capacity(coefficients.len());
    let mut w = Vec::with_capacity(coefficients.len());
    let mut value = 0.0;
    for &(u, i, c) in coefficients {
        if !c.is_finite() {
            return Err(PuidError::Numeric(format!("non-finite coefficient at pair ({u},{i})")));
        }
        let chosen = if c > 0.0 { upper(u, i) } else { lower(u, i) };
        pairs.push((u, i));
        w.push(chosen);
        value += c * chosen;
    }
    Ok((AdversarialWeights { pairs, w }, value))
}

fn box_weights(
    dataset: &Dataset,
    ubox: &UncertaintyBox,
    entries: &mut [LossEntry],
) -> Result<f64> {
    if ubox.len() != dataset.num_pairs() {
        return Err(PuidError::Data("uncertainty box does not cover the pair grid".into()));
    }
    let mut sum = 0.0;
    for e in entries.iter_mut() {
        if !e.coeff.is_finite() {
            return Err(PuidError::Numeric(format!(
                "non-finite coefficient at pair ({},{})",
                e.user, e.item
            )));
        }
        let idx = dataset.pair_index(e.user, e.item);
        e.weight = if e.coeff > 0.0 { ubox.upper[idx] } else { ubox.lower[idx] };
        sum += e.coeff * e.weight;
    }
    Ok(sum)
}

fn observed_errors(model: &FactorModel, dataset: &Dataset, et: ErrorType) -> Vec<f64> {
    let feats: &dyn PairFeatureSource = dataset;
    dataset
        .interactions
        .iter()
        .map(|t| model.error(t.user, t.item, t.rating, et, feats))
        .collect()
}

fn imputation_grid(imputation: &FactorModel, dataset: &Dataset) -> Vec<f64> {
    let feats: &dyn PairFeatureSource = dataset;
    let mut grid = vec![0.0; dataset.num_pairs()];
    for u in 0..dataset.num_users as u32 {
        for i in 0..dataset.num_items as u32 {
            grid[dataset.pair_index(u, i)] = imputation.predict(u, i, feats);
        }
    }
    grid
}

/// Mean error over the observed interactions.
pub fn loss_naive(model: &FactorModel, dataset: &Dataset, et: ErrorType) -> Result<LossReport> {
    if dataset.num_observed() == 0 {
        return Err(PuidError::Data("naive loss over empty observation set".into()));
    }
    let errs = observed_errors(model, dataset, et);
    let entries: Vec<LossEntry> = dataset
        .interactions
        .iter()
        .zip(&errs)
        .map(|(t, &e)| LossEntry { user: t.user, item: t.item, coeff: e, weight: 1.0 })
        .collect();
    let value = errs.iter().sum::<f64>() / dataset.num_observed() as f64;
    Ok(LossReport { tag: LossTag::Naive, value, norm: dataset.num_observed() as f64, constant: 0.0, entries })
}

/// |D|^-1 sum o * e / p_hat.
pub fn loss_ips(model: &FactorModel, dataset: &Dataset, pf: &PropensityField, et: ErrorType) -> Result<LossReport> {
    if pf.p_hat.len() != dataset.num_pairs() {
        return Err(PuidError::Data("propensity field does not cover the pair grid".into()));
    }
    let errs = observed_errors(model, dataset, et);
    let mut entries = Vec::with_capacity(errs.len());
    let mut sum = 0.0;
    for (t, &e) in dataset.interactions.iter().zip(&errs) {
        let p = pf.p_hat[dataset.pair_index(t.user, t.item)];
        if p <= 0.0 {
            return Err(PuidError::Numeric(format!("non-positive propensity at ({},{})", t.user, t.item)));
        }
        let w = 1.0 / p;
        entries.push(LossEntry { user: t.user, item: t.item, coeff: e, weight: w });
        sum += e * w;
    }
    Ok(LossReport {
        tag: LossTag::Ips,
        value: sum / dataset.num_pairs() as f64,
        norm: dataset.num_pairs() as f64,
        constant: 0.0,
        entries,
    })
}

/// |D|^-1 sum [e_hat + o * (e - e_hat) / p_hat].
pub fn loss_dr(
    model: &FactorModel,
    imputation: &FactorModel,
    dataset: &Dataset,
    pf: &PropensityField,
    et: ErrorType,
) -> Result<LossReport> {
    if pf.p_hat.len() != dataset.num_pairs() {
        return Err(PuidError::Data("propensity field does not cover the pair grid".into()));
    }
    let errs = observed_errors(model, dataset, et);
    let imp = imputation_grid(imputation, dataset);
    let constant: f64 = imp.iter().sum();
    let mut entries = Vec::with_capacity(errs.len());
    let mut sum = 0.0;
    for (t, &e) in dataset.interactions.iter().zip(&errs) {
        let idx = dataset.pair_index(t.user, t.item);
        let w = 1.0 / pf.p_hat[idx];
        let c = e - imp[idx];
        entries.push(LossEntry { user: t.user, item: t.item, coeff: c, weight: w });
        sum += c * w;
    }
    Ok(LossReport {
        tag: LossTag::Dr,
        value: (constant + sum) / dataset.num_pairs() as f64,
        norm: dataset.num_pairs() as f64,
        constant,
        entries,
    })
}

/// Personalized robust IPS: |D|^-1 max over the box of sum o * e * w.
pub fn loss_puid_ips(model: &FactorModel, dataset: &Dataset, ubox: &UncertaintyBox, et: ErrorType) -> Result<LossReport> {
    let errs = observed_errors(model, dataset, et);
    let mut entries: Vec<LossEntry> = dataset
        .interactions
        .iter()
        .zip(&errs)
        .map(|(t, &e)| LossEntry { user: t.user, item: t.item, coeff: e, weight: 0.0 })
        .collect();
    let sum = box_weights(dataset, ubox, &mut entries)?;
    Ok(LossReport {
        tag: LossTag::PuidIps,
        value: sum / dataset.num_pairs() as f64,
        norm: dataset.num_pairs() as f64,
        constant: 0.0,
        entries,
    })
}

/// Personalized robust DR: |D|^-1 [sum e_hat + max over the box of
/// sum o * (e - e_hat) * w].
pub fn loss_puid_dr(
    model: &FactorModel,
    imputation: &FactorModel,
    dataset: &Dataset,
    ubox: &UncertaintyBox,
    et: ErrorType,
) -> Result<LossReport> {
    let errs = observed_errors(model, dataset, et);
    let imp = imputation_grid(imputation, dataset);
    let constant: f64 = imp.iter().sum();
    let mut entries: Vec<LossEntry> = dataset
        .interactions
        .iter()
        .zip(&errs)
        .map(|(t, &e)| {
            let idx = dataset.pair_index(t.user, t.item);
            LossEntry { user: t.user, item: t.item, coeff: e - imp[idx], weight: 0.0 }
        })
        .collect();
    let sum = box_weights(dataset, ubox, &mut entries)?;
    Ok(LossReport {
        tag: LossTag::PuidDr,
        value: (constant + sum) / dataset.num_pairs() as f64,
        norm: dataset.num_pairs() as f64,
        constant,
        entries,
    })
}

/// Robust error-matching imputation objective:
/// |O|^-1 max over the box of sum_O (e_hat - e)^2 * w.
pub fn loss_imp_puid(
    imputation: &FactorModel,
    model: &FactorModel,
    dataset: &Dataset,
    ubox: &UncertaintyBox,
    et: ErrorType,
) -> Result<LossReport> {
    if dataset.num_observed() == 0 {
        return Err(PuidError::Data("imputation loss over empty observation set".into()));
    }
    let errs = observed_errors(model, dataset, et);
    let imp = imputation_grid(imputation, dataset);
    let mut entries: Vec<LossEntry> = dataset
        .interactions
        .iter()
        .zip(&errs)
        .map(|(t, &e)| {
            let idx = dataset.pair_index(t.user, t.item);
            let d = imp[idx] - e;
            LossEntry { user: t.user, item: t.item, coeff: d * d, weight: 0.0 }
        })
        .collect();
    let sum = box_weights(dataset, ubox, &mut entries)?;
    Ok(LossReport {
        tag: LossTag::ImpPuid,
        value: sum / dataset.num_observed() as f64,
        norm: dataset.num_observed() as f64,
        constant: 0.0,
        entries,
    })
}

fn check_benchmark(bench: &BenchmarkSnapshot, dataset: &Dataset, need_theta: bool) -> Result<()> {
    if bench.err_observed.len() != dataset.num_observed() {
        return Err(PuidError::Data("stale benchmark cache: observation set size mismatch".into()));
    }
    if need_theta {
        match &bench.imp_grid {
            Some(g) if g.len() == dataset.num_pairs() => {}
            _ => return Err(PuidError::Data("stale benchmark cache: missing imputation grid".into())),
        }
    }
    Ok(())
}

/// Benchmark-guided robust IPS:
/// |D|^-1 max over the box of sum o * [e(phi) - e(phi0)] * w.
pub fn loss_bpuid_ips(
    model: &FactorModel,
    dataset: &Dataset,
    ubox: &UncertaintyBox,
    bench: &BenchmarkSnapshot,
    et: ErrorType,
) -> Result<LossReport> {
    check_benchmark(bench, dataset, false)?;
    let errs = observed_errors(model, dataset, et);
    let mut entries: Vec<LossEntry> = dataset
        .interactions
        .iter()
        .enumerate()
        .map(|(k, t)| LossEntry {
            user: t.user,
            item: t.item,
            coeff: errs[k] - bench.err_observed[k],
            weight: 0.0,
        })
        .collect();
    let sum = box_weights(dataset, ubox, &mut entries)?;
    Ok(LossReport {
        tag: LossTag::BpuidIps,
        value: sum / dataset.num_pairs() as f64,
        norm: dataset.num_pairs() as f64,
        constant: 0.0,
        entries,
    })
}

/// Benchmark-guided robust DR: unweighted sum of [e_hat(theta) - e_hat(theta0)]
/// over the grid plus the box-maximized correction with coefficients
/// o * [(e - e_hat) - (e0 - e_hat0)].
pub fn loss_bpuid_dr(
    model: &FactorModel,
    imputation: &FactorModel,
    dataset: &Dataset,
    ubox: &UncertaintyBox,
    bench: &BenchmarkSnapshot,
    et: ErrorType,
) -> Result<LossReport> {
    check_benchmark(bench, dataset, true)?;
    let errs = observed_errors(model, dataset, et);
    let imp = imputation_grid(imputation, dataset);
    let imp0 = bench.imp_grid.as_ref().unwrap();
    let constant: f64 = imp.iter().zip(imp0).map(|(a, b)| a - b).sum();
    let mut entries: Vec<LossEntry> = dataset
        .interactions
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let idx = dataset.pair_index(t.user, t.item);
            let c = (errs[k] - imp[idx]) - (bench.err_observed[k] - imp0[idx]);
            LossEntry { user: t.user, item: t.item, coeff: c, weight: 0.0 }
        })
        .collect();
    let sum = box_weights(dataset, ubox, &mut entries)?;
    Ok(LossReport {
        tag: LossTag::BpuidDr,
        value: (constant + sum) / dataset.num_pairs() as f64,
        norm: dataset.num_pairs() as f64,
        constant,
        entries,
    })
}

/// Benchmark-guided imputation objective: |O|^-1 max over the box of
/// [(e_hat - e)^2 - (e_hat0 - e0)^2] * w over the observed pairs.
pub fn loss_imp_bpuid(
    imputation: &FactorModel,
    model: &FactorModel,
    dataset: &Dataset,
    ubox: &UncertaintyBox,
    bench: &BenchmarkSnapshot,
    et: ErrorType,
) -> Result<LossReport> {
    check_benchmark(bench, dataset, true)?;
    if dataset.num_observed() == 0 {
        return Err(PuidError::Data("imputation loss over empty observation set".into()));
    }
    let errs = observed_errors(model, dataset, et);
    let imp = imputation_grid(imputation, dataset);
    let imp0 = bench.imp_grid.as_ref().unwrap();
    let mut entries: Vec<LossEntry> = dataset
        .interactions
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let idx = dataset.pair_index(t.user, t.item);
            let d = imp[idx] - errs[k];
            let d0 = imp0[idx] - bench.err_observed[k];
            LossEntry { user: t.user, item: t.item, coeff: d * d - d0 * d0, weight: 0.0 }
        })
        .collect();
    let sum = box_weights(dataset, ubox, &mut entries)?;
    Ok(LossReport {
        tag: LossTag::ImpBpuid,
        value: sum / dataset.num_observed() as f64,
        norm: dataset.num_observed() as f64,
        constant: 0.0,
        entries,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bounds::{global_box, personalized_box, PropensityField};
    use crate::data::{Dataset, Interaction};
    use crate::entropy::SensitivityField;
    use crate::model::{FactorModel, ModelConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force corner oracle: max over all 2^k lower/upper assignments.
    pub fn corner_maximum(coeffs: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
        let k = coeffs.len();
        assert!(k <= 20);
        let mut best = f64::NEG_INFINITY;
        for mask in 0..(1usize << k) {
            let mut v = 0.0;
            for j in 0..k {
                let w = if mask & (1 << j) != 0 { upper[j] } else { lower[j] };
                v += coeffs[j] * w;
            }
            best = best.max(v);
        }
        best
    }

    pub fn random_instance(
        m: usize,
        n: usize,
        obs_prob: f64,
        seed: u64,
    ) -> (Dataset, FactorModel, FactorModel, PropensityField, crate::bounds::UncertaintyBox) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inter = Vec::new();
        for u in 0..m as u32 {
            for i in 0..n as u32 {
                if rng.gen::<f64>() < obs_prob {
                    inter.push(Interaction { user: u, item: i, rating: rng.gen_range(1.0..=5.0) });
                }
            }
        }
        if inter.is_empty() {
            inter.push(Interaction { user: 0, item: 0, rating: 3.0 });
        }
        let ds = Dataset::new(m, n, inter, (1.0, 5.0));
        let cfg = ModelConfig { dim: 3, l2: 0.0, ..Default::default() };
        let mut phi = FactorModel::new_rating(m, n, &cfg, seed);
        let mut v = phi.param_vec();
        for p in &mut v {
            *p = rng.gen_range(-1.0..1.0);
        }
        phi.set_param_vec(&v);
        let mut theta = FactorModel::new_imputation(m, n, &cfg, seed + 1);
        let mut v = theta.param_vec();
        for p in &mut v {
            *p = rng.gen_range(-1.0..1.0);
        }
        theta.set_param_vec(&v);
        let p_hat: Vec<f64> = (0..m * n).map(|_| rng.gen_range(0.05..0.95)).collect();
        let pf = PropensityField { p_hat, clip_floor: 0.02, model_params: vec![], saturated: false };
        let gamma: Vec<f64> = (0..m * n).map(|_| rng.gen_range(1.0..3.0)).collect();
        let sf = SensitivityField {
            raw_score: vec![0.0; m * n],
            gamma,
            alpha: 1.0,
            beta: 1.0,
            gamma_max: 3.0,
            term_user: vec![0.0; m * n],
            term_pair: vec![0.0; m * n],
        };
        let ubox = personalized_box(&pf, &sf).unwrap();
        (ds, phi, theta, pf, ubox)
    }

    fn report_corner_check(report: &LossReport, ds: &Dataset, ubox: &crate::bounds::UncertaintyBox) {
        let coeffs: Vec<f64> = report.entries.iter().map(|e| e.coeff).collect();
        let lower: Vec<f64> = report
            .entries
            .iter()
            .map(|e| ubox.lower[ds.pair_index(e.user, e.item)])
            .collect();
        let upper: Vec<f64> = report
            .entries
            .iter()
            .map(|e| ubox.upper[ds.pair_index(e.user, e.item)])
            .collect();
        let brute = corner_maximum(&coeffs, &lower, &upper);
        let closed = (report.value * report.norm) - report.constant;
        assert!(
            (brute - closed).abs() <= 1e-12 * (1.0 + brute.abs()),
            "corner {brute} vs closed {closed}"
        );
    }

    #[test]
    fn inner_maximize_matches_brute_force() {
        let coeffs = vec![(0u32, 0u32, 2.0), (0, 1, -1.0)];
        let (w, v) = inner_maximize(&coeffs, &|_, _| 1.0, &|_, _| 3.0).unwrap();
        assert_eq!(w.w, vec![3.0, 1.0]);
        assert!((v - 5.0).abs() < 1e-15);
        assert!((corner_maximum(&[2.0, -1.0], &[1.0, 1.0], &[3.0, 3.0]) - 5.0).abs() < 1e-15);

        // degenerate point box
        let (w, _) = inner_maximize(&[(0, 0, -4.0), (0, 1, 4.0)], &|_, _| 2.0, &|_, _| 2.0).unwrap();
        assert_eq!(w.w, vec![2.0, 2.0]);

        // zero coefficient takes the lower bound
        let (w, _) = inner_maximize(&[(0, 0, 0.0)], &|_, _| 1.5, &|_, _| 9.0).unwrap();
        assert_eq!(w.w, vec![1.5]);

        assert!(inner_maximize(&[(3, 4, f64::NAN)], &|_, _| 1.0, &|_, _| 2.0).is_err());
    }

    #[test]
    fn naive_loss_values() {
        let ds = Dataset::new(
            1,
            2,
            vec![
                Interaction { user: 0, item: 0, rating: 1.0 },
                Interaction { user: 0, item: 1, rating: 3.0 },
            ],
            (1.0, 5.0),
        );
        let cfg = ModelConfig { dim: 1, l2: 0.0, ..Default::default() };
        let mut m = FactorModel::new_rating(1, 2, &cfg, 0);
        let zeros = vec![0.0; m.param_vec().len()];
        m.set_param_vec(&zeros);
        // errors |0-1|=1, |0-3|=3, mean 2
        let r = loss_naive(&m, &ds, ErrorType::Absolute).unwrap();
        assert!((r.value - 2.0).abs() < 1e-15);
        assert!((r.recompute() - r.value).abs() < 1e-12);
    }

    #[test]
    fn ips_loss_arithmetic_and_uniform_identity() {
        // one pair, o=1, e=2, p=0.5, |D|=1 -> 4
        let ds = Dataset::new(1, 1, vec![Interaction { user: 0, item: 0, rating: 2.0 }], (1.0, 5.0));
        let cfg = ModelConfig { dim: 1, l2: 0.0, ..Default::default() };
        let mut m = FactorModel::new_rating(1, 1, &cfg, 0);
        let zeros = vec![0.0; m.param_vec().len()];
        m.set_param_vec(&zeros);
        let pf = PropensityField { p_hat: vec![0.5], clip_floor: 0.02, model_params: vec![], saturated: false };
        let r = loss_ips(&m, &ds, &pf, ErrorType::Absolute).unwrap();
        assert!((r.value - 4.0).abs() < 1e-15);

        // uniform p = |O|/|D| makes IPS equal the naive loss
        let (ds, phi, _, _, _) = random_instance(6, 7, 0.5, 3);
        let rate = ds.num_observed() as f64 / ds.num_pairs() as f64;
        let pf = PropensityField {
            p_hat: vec![rate; ds.num_pairs()],
            clip_floor: 0.001,
            model_params: vec![],
            saturated: false,
        };
        let ips = loss_ips(&phi, &ds, &pf, ErrorType::Squared).unwrap();
        let naive = loss_naive(&phi, &ds, ErrorType::Squared).unwrap();
        assert!((ips.value - naive.value).abs() < 1e-12);
    }

    #[test]
    fn dr_reductions() {
        let (ds, phi, theta, pf, _) = random_instance(6, 6, 0.5, 9);
        // e_hat == 0 -> DR reduces to IPS
        let mut zero_imp = theta.clone();
        let mut v = vec![0.0; zero_imp.param_vec().len()];
        let last = v.len() - 1;
        v[last] = -60.0; // raw score -60: softplus ~ 0 to double precision
        zero_imp.set_param_vec(&v);
        let dr = loss_dr(&phi, &zero_imp, &ds, &pf, ErrorType::Squared).unwrap();
        let ips = loss_ips(&phi, &ds, &pf, ErrorType::Squared).unwrap();
        assert!((dr.value - ips.value).abs() < 1e-12, "{} vs {}", dr.value, ips.value);
        assert!((dr.recompute() - dr.value).abs() < 1e-12);
    }

    #[test]
    fn puid_ips_degeneracy_and_dominance() {
        let (ds, phi, _, pf, ubox) = random_instance(5, 5, 0.6, 4);
        // Gamma == 1 collapses to IPS
        let point = global_box(&pf, 1.0).unwrap();
        let robust = loss_puid_ips(&phi, &ds, &point, ErrorType::Squared).unwrap();
        let ips = loss_ips(&phi, &ds, &pf, ErrorType::Squared).unwrap();
        assert!((robust.value - ips.value).abs() < 1e-12);
        // adversarial >= nominal
        let wide = loss_puid_ips(&phi, &ds, &ubox, ErrorType::Squared).unwrap();
        assert!(wide.value >= ips.value - 1e-12);
        report_corner_check(&wide, &ds, &ubox);
    }

    #[test]
    fn puid_ips_hand_value() {
        // single pair o=1, e=1, p=0.25, Gamma=2 -> b = 7
        let ds = Dataset::new(1, 1, vec![Interaction { user: 0, item: 0, rating: 1.0 }], (1.0, 5.0));
        let cfg = ModelConfig { dim: 1, l2: 0.0, ..Default::default() };
        let mut m = FactorModel::new_rating(1, 1, &cfg, 0);
        let zeros = vec![0.0; m.param_vec().len()];
        m.set_param_vec(&zeros);
        let pf = PropensityField { p_hat: vec![0.25], clip_floor: 0.02, model_params: vec![], saturated: false };
        let ubox = global_box(&pf, 2.0).unwrap();
        let r = loss_puid_ips(&m, &ds, &ubox, ErrorType::Absolute).unwrap();
        assert!((r.value - 7.0).abs() < 1e-12);
    }

    #[test]
    fn puid_dr_corner_oracle_and_degeneracy() {
        let (ds, phi, theta, pf, ubox) = random_instance(3, 4, 0.6, 12);
        let robust = loss_puid_dr(&phi, &theta, &ds, &ubox, ErrorType::Squared).unwrap();
        report_corner_check(&robust, &ds, &ubox);
        let point = global_box(&pf, 1.0).unwrap();
        let collapsed = loss_puid_dr(&phi, &theta, &ds, &point, ErrorType::Squared).unwrap();
        let dr = loss_dr(&phi, &theta, &ds, &pf, ErrorType::Squared).unwrap();
        assert!((collapsed.value - dr.value).abs() < 1e-12);
    }

    #[test]
    fn imp_puid_is_upper_weighted_mean_discrepancy() {
        let (ds, phi, theta, _, ubox) = random_instance(4, 4, 0.7, 21);
        let r = loss_imp_puid(&theta, &phi, &ds, &ubox, ErrorType::Squared).unwrap();
        // coefficients >= 0, so weights must all be the upper bound
        let mut expect = 0.0;
        for t in &ds.interactions {
            let e = phi.error(t.user, t.item, t.rating, ErrorType::Squared, &ds);
            let ehat = theta.predict(t.user, t.item, &ds);
            expect += (ehat - e) * (ehat - e) * ubox.upper[ds.pair_index(t.user, t.item)];
        }
        expect /= ds.num_observed() as f64;
        assert!((r.value - expect).abs() < 1e-12);
        report_corner_check(&r, &ds, &ubox);
        // perfect imputation -> 0: replicate via e_hat == e is not reachable
        // exactly with softplus, so check a tiny synthetic case instead
        let one = Dataset::new(1, 1, vec![Interaction { user: 0, item: 0, rating: 3.0 }], (1.0, 5.0));
        let cfg = ModelConfig { dim: 1, l2: 0.0, ..Default::default() };
        let mut m = FactorModel::new_rating(1, 1, &cfg, 0);
        let z = vec![0.0; m.param_vec().len()];
        m.set_param_vec(&z);
        // e = 9 (squared); imputation tuned to output exactly 9 via bias
        let mut imp = FactorModel::new_imputation(1, 1, &cfg, 0);
        let mut v = vec![0.0; imp.param_vec().len()];
        // softplus(gb) = 9 -> gb = ln(e^9 - 1)
        v[4] = (9f64.exp() - 1.0).ln();
        imp.set_param_vec(&v);
        let pfp = PropensityField { p_hat: vec![0.5], clip_floor: 0.02, model_params: vec![], saturated: false };
        let ub = global_box(&pfp, 3.0).unwrap();
        let rr = loss_imp_puid(&imp, &m, &one, &ub, ErrorType::Squared).unwrap();
        assert!(rr.value.abs() < 1e-12);
    }

    #[test]
    fn bpuid_losses_zero_at_benchmark_and_corner_exact() {
        let (ds, phi, theta, _, ubox) = random_instance(3, 3, 0.8, 33);
        let bench = crate::model::snapshot(&phi, Some(&theta), &ds, ErrorType::Squared);
        // at the benchmark parameters every BPUID loss is exactly 0
        let l1 = loss_bpuid_ips(&phi, &ds, &ubox, &bench, ErrorType::Squared).unwrap();
        assert_eq!(l1.value, 0.0);
        let l2 = loss_bpuid_dr(&phi, &theta, &ds, &ubox, &bench, ErrorType::Squared).unwrap();
        assert_eq!(l2.value, 0.0);
        let l3 = loss_imp_bpuid(&theta, &phi, &ds, &ubox, &bench, ErrorType::Squared).unwrap();
        assert_eq!(l3.value, 0.0);

        // perturbed models: corner-enumeration oracle
        let (_, phi2, theta2, _, _) = random_instance(3, 3, 0.8, 34);
        let r1 = loss_bpuid_ips(&phi2, &ds, &ubox, &bench, ErrorType::Squared).unwrap();
        report_corner_check(&r1, &ds, &ubox);
        let r2 = loss_bpuid_dr(&phi2, &theta2, &ds, &ubox, &bench, ErrorType::Squared).unwrap();
        report_corner_check(&r2, &ds, &ubox);
        let r3 = loss_imp_bpuid(&theta2, &phi2, &ds, &ubox, &bench, ErrorType::Squared).unwrap();
        report_corner_check(&r3, &ds, &ubox);
    }

    #[test]
    fn bpuid_ips_strictly_better_model_gets_negative_loss() {
        let ds = Dataset::new(
            1,
            2,
            vec![
                Interaction { user: 0, item: 0, rating: 3.0 },
                Interaction { user: 0, item: 1, rating: 4.0 },
            ],
            (1.0, 5.0),
        );
        let cfg = ModelConfig { dim: 1, l2: 0.0, ..Default::default() };
        let mut bad = FactorModel::new_rating(1, 2, &cfg, 0);
        let z = vec![0.0; bad.param_vec().len()];
        bad.set_param_vec(&z); // e0 = {9, 16} squared
        let bench = crate::model::snapshot(&bad, None, &ds, ErrorType::Squared);
        let mut good = FactorModel::new_rating(1, 2, &cfg, 0);
        let mut v = vec![0.0; good.param_vec().len()];
        let last = v.len() - 1;
        v[last] = 3.0; // global bias
        good.set_param_vec(&v); // e = {0, 1}: strictly better pairwise
        let pf = PropensityField { p_hat: vec![0.4, 0.4], clip_floor: 0.02, model_params: vec![], saturated: false };
        let ubox = global_box(&pf, 2.0).unwrap();
        let r = loss_bpuid_ips(&good, &ds, &ubox, &bench, ErrorType::Squared).unwrap();
        assert!(r.value < 0.0);
        // adversary must have chosen the lower bound everywhere
        for e in &r.entries {
            assert_eq!(e.weight, ubox.lower[ds.pair_index(e.user, e.item)]);
        }
    }

    #[test]
    fn bpuid_dr_gamma_one_equals_dr_difference() {
        let (ds, phi, theta, pf, _) = random_instance(4, 4, 0.6, 40);
        let (_, phi0, theta0, _, _) = random_instance(4, 4, 0.6, 41);
        let bench = crate::model::snapshot(&phi0, Some(&theta0), &ds, ErrorType::Squared);
        let point = global_box(&pf, 1.0).unwrap();
        let b = loss_bpuid_dr(&phi, &theta, &ds, &point, &bench, ErrorType::Squared).unwrap();
        let dr = loss_dr(&phi, &theta, &ds, &pf, ErrorType::Squared).unwrap();
        let dr0 = loss_dr(&phi0, &theta0, &ds, &pf, ErrorType::Squared).unwrap();
        assert!((b.value - (dr.value - dr0.value)).abs() < 1e-12);
    }

    #[test]
    fn puid_ips_monotone_in_gamma_max() {
        let (ds, phi, _, pf, _) = random_instance(5, 5, 0.5, 50);
        let mut prev = f64::NEG_INFINITY;
        for g in [1.0, 1.5, 2.0, 3.0, 5.0] {
            let ubox = global_box(&pf, g).unwrap();
            let v = loss_puid_ips(&phi, &ds, &ubox, ErrorType::Squared).unwrap().value;
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn dominance_over_fixed_feasible_weights() {
        let (ds, phi, theta, _, ubox) = random_instance(4, 4, 0.6, 60);
        let robust = loss_puid_dr(&phi, &theta, &ds, &ubox, ErrorType::Squared).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..20 {
            // arbitrary feasible weights
            let fixed: f64 = robust
                .entries
                .iter()
                .map(|e| {
                    let idx = ds.pair_index(e.user, e.item);
                    let w = rng.gen_range(ubox.lower[idx]..=ubox.upper[idx]);
                    e.coeff * w
                })
                .sum();
            let fixed_value = (robust.constant + fixed) / robust.norm;
            assert!(robust.value >= fixed_value - 1e-12);
        }
    }
}
