//! From-scratch binary classifiers — logistic regression, Gaussian naive
//! Bayes, K-nearest neighbors — combined by weighted soft voting. The same
//! ensemble serves every feature channel, including the lagged-RV benchmark,
//! so paired significance tests compare like with like.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Standardizer;

pub const N_CLASSES: usize = 2;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn check_two_classes(y: &[u8]) -> Result<()> {
    let ones = y.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::DegenerateTraining(
            "training labels contain a single class".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

/// L2-penalized logistic regression fitted by gradient ascent with a
/// backtracking line search. The bias is unpenalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2_lambda: f64,
    pub converged: bool,
    /// Penalized log-likelihood after each accepted step; non-decreasing.
    pub objective_trace: Vec<f64>,
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let z: f64 = self
            .weights
            .iter()
            .zip(x)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.bias;
        let p1 = sigmoid(z);
        vec![1.0 - p1, p1]
    }
}

/// Penalized log-likelihood and its gradient (weights gradient, bias
/// gradient) at the given parameters.
pub fn logistic_objective_grad(
    x: &[Vec<f64>],
    y: &[u8],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let mut objective = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z: f64 = weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + bias;
        let yf = f64::from(label);
        // y ln p + (1-y) ln(1-p) = y z - softplus(z)
        objective += yf * z - softplus(z);
        let residual = yf - sigmoid(z);
        for (g, v) in grad_w.iter_mut().zip(row) {
            *g += residual * v;
        }
        grad_b += residual;
    }
    for (g, w) in grad_w.iter_mut().zip(weights) {
        objective -= 0.5 * l2_lambda * w * w;
        *g -= l2_lambda * w;
    }
    (objective, grad_w, grad_b)
}

/// Objective only; the line search probes candidates with this cheaper pass.
fn logistic_objective(
    x: &[Vec<f64>],
    y: &[u8],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> f64 {
    let mut objective = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z: f64 = weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + bias;
        objective += f64::from(label) * z - softplus(z);
    }
    objective - 0.5 * l2_lambda * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Fits by gradient ascent; converged when the gradient max-norm drops
/// below `tol` (the penalty keeps weights finite even on separable data).
pub fn fit_logistic(
    x: &[Vec<f64>],
    y: &[u8],
    l2_lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LogisticModel> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(
            "logistic regression needs at least 2 rows".into(),
        ));
    }
    check_two_classes(y)?;
    let dim = x[0].len();
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut converged = false;
    let mut trace = Vec::new();

    let (mut objective, mut grad_w, mut grad_b) =
        logistic_objective_grad(x, y, &weights, bias, l2_lambda);
    trace.push(objective);
    // Candidates are probed with the objective alone; the gradient is
    // recomputed only at accepted points. The accepted step seeds the next
    // search, so well-scaled problems take one probe per iteration.
    let mut step = 1.0f64;
    'outer: for _ in 0..max_iter {
        let grad_norm = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm < tol {
            converged = true;
            break;
        }
        let grad_sq: f64 =
            grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b;
        step = (step * 2.0).min(1.0);
        loop {
            let cand_w: Vec<f64> = weights
                .iter()
                .zip(&grad_w)
                .map(|(w, g)| w + step * g)
                .collect();
            let cand_b = bias + step * grad_b;
            let cand_obj = logistic_objective(x, y, &cand_w, cand_b, l2_lambda);
            if cand_obj >= objective + 1e-4 * step * grad_sq {
                weights = cand_w;
                bias = cand_b;
                objective = cand_obj;
                let (_, gw, gb) = logistic_objective_grad(x, y, &weights, bias, l2_lambda);
                grad_w = gw;
                grad_b = gb;
                trace.push(objective);
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                // no ascent step left at working precision
                break 'outer;
            }
        }
    }

    Ok(LogisticModel {
        weights,
        bias,
        l2_lambda,
        converged,
        objective_trace: trace,
    })
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes
// ---------------------------------------------------------------------------

/// Per-class priors and feature-wise Gaussian parameters; variances are
/// floored so degenerate features cannot zero out a likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    pub priors: [f64; N_CLASSES],
    pub means: [Vec<f64>; N_CLASSES],
    pub variances: [Vec<f64>; N_CLASSES],
    pub var_floor: f64,
}

pub fn fit_gaussian_nb(x: &[Vec<f64>], y: &[u8], var_floor: f64) -> Result<GaussianNbModel> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    check_two_classes(y)?;
    if var_floor <= 0.0 {
        return Err(Error::Config("var_floor must be positive".into()));
    }
    let dim = x[0].len();
    let mut counts = [0usize; N_CLASSES];
    let mut means = [vec![0.0; dim], vec![0.0; dim]];
    for (row, &label) in x.iter().zip(y) {
        let c = label as usize;
        counts[c] += 1;
        for (m, v) in means[c].iter_mut().zip(row) {
            *m += v;
        }
    }
    for c in 0..N_CLASSES {
        for m in &mut means[c] {
            *m /= counts[c] as f64;
        }
    }
    let mut variances = [vec![0.0; dim], vec![0.0; dim]];
    for (row, &label) in x.iter().zip(y) {
        let c = label as usize;
        for ((s, v), m) in variances[c].iter_mut().zip(row).zip(&means[c]) {
            *s += (v - m) * (v - m);
        }
    }
    for c in 0..N_CLASSES {
        for s in &mut variances[c] {
            *s = (*s / counts[c] as f64).max(var_floor);
        }
    }
    let n = x.len() as f64;
    Ok(GaussianNbModel {
        priors: [counts[0] as f64 / n, counts[1] as f64 / n],
        means,
        variances,
        var_floor,
    })
}

/// Class probabilities for `x`: per-feature Gaussian log-likelihoods plus
/// log priors, normalized in log space so far-out points stay finite.
pub fn nb_predict_proba(model: &GaussianNbModel, x: &[f64]) -> Vec<f64> {
    let mut log_joint = [0.0f64; N_CLASSES];
    for c in 0..N_CLASSES {
        let mut acc = model.priors[c].ln();
        for ((v, m), var) in x.iter().zip(&model.means[c]).zip(&model.variances[c]) {
            acc += -0.5 * (2.0 * std::f64::consts::PI * var).ln()
                - (v - m) * (v - m) / (2.0 * var);
        }
        log_joint[c] = acc;
    }
    let max = log_joint[0].max(log_joint[1]);
    let exp: Vec<f64> = log_joint.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

// ---------------------------------------------------------------------------
// K-nearest neighbors
// ---------------------------------------------------------------------------

/// Stored training set with Euclidean metric; `k` must be odd and at most
/// the number of rows. Distance ties break toward the lower training index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
    pub k: usize,
}

pub fn fit_knn(x: Vec<Vec<f64>>, y: Vec<u8>, k: usize) -> Result<KnnModel> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    if k == 0 || k % 2 == 0 {
        return Err(Error::Config(format!("k must be a positive odd integer, got {k}")));
    }
    if k > x.len() {
        return Err(Error::DegenerateTraining(format!(
            "k = {k} exceeds {} training rows",
            x.len()
        )));
    }
    Ok(KnnModel { x, y, k })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(PartialEq)]
struct Neighbor {
    dist: f64,
    idx: usize,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        // total order: distance first, then index; NaN never occurs for
        // finite inputs
        self.dist
            .partial_cmp(&other.dist)
            .unwrap_or(Ordering::Equal)
            .then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Class frequencies among the k nearest training rows, selected with a
/// bounded max-heap rather than a full sort.
pub fn knn_predict_proba(model: &KnnModel, x: &[f64]) -> Vec<f64> {
    let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(model.k + 1);
    for (idx, row) in model.x.iter().enumerate() {
        heap.push(Neighbor {
            dist: squared_distance(row, x),
            idx,
        });
        if heap.len() > model.k {
            heap.pop();
        }
    }
    let mut counts = [0usize; N_CLASSES];
    for n in heap {
        counts[model.y[n.idx] as usize] += 1;
    }
    counts
        .iter()
        .map(|&c| c as f64 / model.k as f64)
        .collect()
}

// ---------------------------------------------------------------------------
// Soft voting
// ---------------------------------------------------------------------------

/// Weighted average of member probability vectors; the label is the argmax
/// with exact ties resolved to class 0.
pub fn soft_vote(member_probas: &[Vec<f64>], weights: &[f64]) -> Result<(usize, Vec<f64>)> {
    if member_probas.is_empty() {
        return Err(Error::Contract("soft vote needs at least one member".into()));
    }
    if member_probas.len() != weights.len() {
        return Err(Error::Contract(format!(
            "{} members but {} weights",
            member_probas.len(),
            weights.len()
        )));
    }
    let len = member_probas[0].len();
    if member_probas.iter().any(|p| p.len() != len) {
        return Err(Error::Contract(
            "member probability vectors have mismatched lengths".into(),
        ));
    }
    let mut aggregated = vec![0.0; len];
    for (proba, &w) in member_probas.iter().zip(weights) {
        for (acc, p) in aggregated.iter_mut().zip(proba) {
            *acc += w * p;
        }
    }
    let mut label = 0usize;
    for (i, v) in aggregated.iter().enumerate() {
        if *v > aggregated[label] {
            label = i;
        }
    }
    Ok((label, aggregated))
}

// ---------------------------------------------------------------------------
// Ensemble
// ---------------------------------------------------------------------------

/// Hyperparameters for one ensemble fit. The defaults mirror common library
/// defaults since the reference setup leaves them unstated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSpec {
    pub k: usize,
    pub l2_lambda: f64,
    pub var_floor: f64,
    /// Voting weights for (logistic, naive Bayes, KNN); `None` = uniform.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub voting_weights: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            k: 5,
            l2_lambda: 1.0,
            var_floor: 1e-9,
            voting_weights: None,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

impl EnsembleSpec {
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        let weights = match &self.voting_weights {
            None => vec![1.0; 3],
            Some(w) => w.clone(),
        };
        if weights.len() != 3 {
            return Err(Error::Config(format!(
                "expected 3 voting weights, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(
                "voting weights must be nonnegative with positive sum".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        Ok(weights.into_iter().map(|w| w / total).collect())
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

fn default_format_version() -> u32 {
    MODEL_FORMAT_VERSION
}

/// The three fitted members, normalized voting weights, and the standardizer
/// fitted on the same training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEnsemble {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub logistic: LogisticModel,
    pub naive_bayes: GaussianNbModel,
    pub knn: KnnModel,
    pub weights: Vec<f64>,
    pub standardizer: Standardizer,
}

/// Fits the standardizer and all three members on the raw training window.
pub fn fit_ensemble(x_raw: &[Vec<f64>], y: &[u8], spec: &EnsembleSpec) -> Result<FittedEnsemble> {
    let weights = spec.normalized_weights()?;
    let standardizer = Standardizer::fit(x_raw)?;
    let x = standardizer.apply(x_raw);
    let logistic = fit_logistic(&x, y, spec.l2_lambda, spec.tol, spec.max_iter)?;
    let naive_bayes = fit_gaussian_nb(&x, y, spec.var_floor)?;
    let knn = fit_knn(x, y.to_vec(), spec.k)?;
    Ok(FittedEnsemble {
        format_version: MODEL_FORMAT_VERSION,
        logistic,
        naive_bayes,
        knn,
        weights,
        standardizer,
    })
}

impl FittedEnsemble {
    /// Soft-voted prediction for one raw (unstandardized) feature row.
    pub fn predict(&self, x_raw: &[f64]) -> Result<(usize, Vec<f64>)> {
        let x = self.standardizer.apply_row(x_raw);
        let members = vec![
            self.logistic.predict_proba(&x),
            nb_predict_proba(&self.naive_bayes, &x),
            knn_predict_proba(&self.knn, &x),
        ];
        soft_vote(&members, &self.weights)
    }

    /// Aggregated probability of class 1; the prediction function explained
    /// by the attribution module.
    pub fn predict_proba1(&self, x_raw: &[f64]) -> f64 {
        self.predict(x_raw).map(|(_, p)| p[1]).unwrap_or(0.5)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("serialize ensemble: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("deserialize ensemble: {e}")))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn zero_weight_logistic_predicts_half() {
        let model = LogisticModel {
            weights: vec![0.0, 0.0],
            bias: 0.0,
            l2_lambda: 1.0,
            converged: true,
            objective_trace: vec![],
        };
        assert_eq!(model.predict_proba(&[3.0, -7.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn separable_data_keeps_finite_weights() {
        let x = vec![vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]];
        let y = vec![0, 0, 1, 1];
        let model = fit_logistic(&x, &y, 0.5, 1e-6, 2000).unwrap();
        assert!(model.weights[0].is_finite());
        assert!(model.weights[0] > 0.0);
        assert!(model.converged);
    }

    #[test]
    fn symmetric_one_dim_fit_matches_numeric_oracle() {
        let x = vec![vec![-1.0], vec![1.0]];
        let y = vec![0, 1];
        let model = fit_logistic(&x, &y, 0.1, 1e-9, 5000).unwrap();
        assert!(model.weights[0] > 0.0);
        assert!(model.bias.abs() < 1e-4, "bias {}", model.bias);

        // Independent oracle: bisection on d/dw [2 ln sigmoid(w) - 0.05 w^2]
        // = 2 (1 - sigmoid(w)) - 0.1 w, which is strictly decreasing.
        let derivative = |w: f64| 2.0 * (1.0 - sigmoid(w)) - 0.1 * w;
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if derivative(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!(
            (model.weights[0] - oracle).abs() < 1e-4,
            "fit {} vs oracle {}",
            model.weights[0],
            oracle
        );
    }

    #[test]
    fn logistic_objective_trace_is_nondecreasing() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<u8> = x.iter().map(|r| u8::from(r[0] + r[1] > 0.1)).collect();
        if y.iter().all(|&v| v == y[0]) {
            return;
        }
        let model = fit_logistic(&x, &y, 1.0, 1e-6, 500).unwrap();
        for pair in model.objective_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12);
        }
    }

    #[test]
    fn single_class_training_is_degenerate() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            fit_logistic(&x, &[1, 1], 1.0, 1e-6, 10).unwrap_err(),
            Error::DegenerateTraining(_)
        ));
        assert!(matches!(
            fit_gaussian_nb(&x, &[0, 0], 1e-9).unwrap_err(),
            Error::DegenerateTraining(_)
        ));
    }

    #[test]
    fn nb_symmetric_point_is_even_odds() {
        let model = GaussianNbModel {
            priors: [0.5, 0.5],
            means: [vec![0.0], vec![2.0]],
            variances: [vec![1.0], vec![1.0]],
            var_floor: 1e-9,
        };
        let p = nb_predict_proba(&model, &[1.0]);
        approx::assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn nb_six_sigma_point_is_decisive() {
        let model = GaussianNbModel {
            priors: [0.5, 0.5],
            means: [vec![0.0], vec![6.0]],
            variances: [vec![1.0], vec![1.0]],
            var_floor: 1e-9,
        };
        // density ratio exp(18) makes P(class 0) = 1/(1+e^-18) > 0.99
        let p = nb_predict_proba(&model, &[0.0]);
        assert!(p[0] > 0.99, "{p:?}");
    }

    #[test]
    fn nb_priors_dominate_when_likelihoods_cancel() {
        let model = GaussianNbModel {
            priors: [0.9, 0.1],
            means: [vec![1.0], vec![1.0]],
            variances: [vec![2.0], vec![2.0]],
            var_floor: 1e-9,
        };
        let p = nb_predict_proba(&model, &[0.3]);
        approx::assert_abs_diff_eq!(p[0], 0.9, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(p[1], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn nb_fifty_sigma_outlier_stays_normalized() {
        let model = GaussianNbModel {
            priors: [0.5, 0.5],
            means: [vec![0.0], vec![1.0]],
            variances: [vec![1.0], vec![1.0]],
            var_floor: 1e-9,
        };
        let p = nb_predict_proba(&model, &[50.0]);
        assert!(p.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        approx::assert_abs_diff_eq!(p[0] + p[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn knn_counts_neighbors() {
        let model = fit_knn(
            vec![vec![0.0], vec![1.0], vec![10.0]],
            vec![0, 0, 1],
            3,
        )
        .unwrap();
        let p = knn_predict_proba(&model, &[0.5]);
        approx::assert_abs_diff_eq!(p[0], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn knn_k1_returns_exact_match_label() {
        let model = fit_knn(vec![vec![0.0], vec![5.0]], vec![1, 0], 1).unwrap();
        assert_eq!(knn_predict_proba(&model, &[0.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn knn_distance_ties_break_to_lower_index() {
        // rows 0 and 2 are equidistant from the query; k = 1 must pick row 0
        let model = fit_knn(vec![vec![-1.0], vec![9.0], vec![1.0]], vec![1, 0, 0], 1).unwrap();
        assert_eq!(knn_predict_proba(&model, &[0.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn knn_rejects_even_or_oversized_k() {
        assert!(fit_knn(vec![vec![0.0]; 4], vec![0, 0, 1, 1], 4).is_err());
        assert!(matches!(
            fit_knn(vec![vec![0.0]; 3], vec![0, 1, 0], 5).unwrap_err(),
            Error::DegenerateTraining(_)
        ));
    }

    #[test]
    fn soft_vote_tie_goes_to_class_zero() {
        let members = vec![vec![0.6, 0.4], vec![0.2, 0.8], vec![0.7, 0.3]];
        let (label, agg) = soft_vote(&members, &[1.0 / 3.0; 3]).unwrap();
        approx::assert_abs_diff_eq!(agg[0], 0.5, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(agg[1], 0.5, epsilon = 1e-12);
        assert_eq!(label, 0);
    }

    #[test]
    fn soft_vote_single_member_identity() {
        let (label, agg) = soft_vote(&[vec![0.3, 0.7]], &[1.0]).unwrap();
        assert_eq!(label, 1);
        assert_eq!(agg, vec![0.3, 0.7]);
    }

    #[test]
    fn soft_vote_degenerate_weights_follow_first_member() {
        let members = vec![vec![0.9, 0.1], vec![0.1, 0.9], vec![0.2, 0.8]];
        let (label, _) = soft_vote(&members, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(label, 0);
    }

    #[test]
    fn soft_vote_rejects_mismatched_lengths() {
        let err = soft_vote(&[vec![0.5, 0.5], vec![1.0]], &[0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    fn random_training(
        rng: &mut impl Rng,
        rows: usize,
        dim: usize,
    ) -> (Vec<Vec<f64>>, Vec<u8>) {
        let x: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let mut y: Vec<u8> = (0..rows).map(|_| rng.gen_range(0..2) as u8).collect();
        y[0] = 0;
        y[rows - 1] = 1;
        (x, y)
    }

    #[test]
    fn ensemble_fit_predict_and_json_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (x, y) = random_training(&mut rng, 30, 4);
        let model = fit_ensemble(&x, &y, &EnsembleSpec::default()).unwrap();
        let (label, proba) = model.predict(&x[0]).unwrap();
        assert!(label < 2);
        approx::assert_abs_diff_eq!(proba.iter().sum::<f64>(), 1.0, epsilon = 1e-9);

        let json = model.to_json().unwrap();
        let back = FittedEnsemble::from_json(&json).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (x, y) = random_training(&mut rng, 25, 3);
        for _ in 0..10 {
            let weights: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let bias: f64 = rng.gen_range(-1.0..1.0);
            let (_, grad_w, grad_b) = logistic_objective_grad(&x, &y, &weights, bias, 0.7);
            let h = 1e-5;
            for j in 0..=3 {
                let mut plus_w = weights.clone();
                let mut minus_w = weights.clone();
                let (mut plus_b, mut minus_b) = (bias, bias);
                if j < 3 {
                    plus_w[j] += h;
                    minus_w[j] -= h;
                } else {
                    plus_b += h;
                    minus_b -= h;
                }
                let (f_plus, _, _) = logistic_objective_grad(&x, &y, &plus_w, plus_b, 0.7);
                let (f_minus, _, _) = logistic_objective_grad(&x, &y, &minus_w, minus_b, 0.7);
                let numeric = (f_plus - f_minus) / (2.0 * h);
                let analytic = if j < 3 { grad_w[j] } else { grad_b };
                let denom = analytic.abs().max(1.0);
                assert!(
                    ((numeric - analytic) / denom).abs() < 1e-5,
                    "component {j}: analytic {analytic} vs numeric {numeric}"
                );
            }
        }
    }

    proptest! {
        // predict_proba outputs are probability vectors.
        #[test]
        fn probability_normalization(seed in 0u64..200, qx in -5.0f64..5.0, qy in -5.0f64..5.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (x, y) = random_training(&mut rng, 20, 2);
            let model = fit_ensemble(&x, &y, &EnsembleSpec::default()).unwrap();
            let (_, agg) = model.predict(&[qx, qy]).unwrap();
            prop_assert!((agg.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(agg.iter().all(|p| (0.0..=1.0).contains(p)));
        }

        // Scaling raw weights by a positive constant leaves the argmax alone.
        #[test]
        fn soft_vote_scale_invariance(
            probas in proptest::collection::vec(0.0f64..1.0, 3),
            raw_weights in proptest::collection::vec(0.01f64..5.0, 3),
            scale in 0.1f64..50.0,
        ) {
            let members: Vec<Vec<f64>> =
                probas.iter().map(|&p| vec![1.0 - p, p]).collect();
            let normalize = |w: &[f64]| {
                let total: f64 = w.iter().sum();
                w.iter().map(|v| v / total).collect::<Vec<f64>>()
            };
            let scaled: Vec<f64> = raw_weights.iter().map(|w| w * scale).collect();
            let (label_a, _) = soft_vote(&members, &normalize(&raw_weights)).unwrap();
            let (label_b, _) = soft_vote(&members, &normalize(&scaled)).unwrap();
            prop_assert_eq!(label_a, label_b);
        }

        // Heap-based neighbor selection agrees with an exhaustive sort.
        #[test]
        fn knn_matches_exhaustive_sort(seed in 0u64..100, k_idx in 0usize..3, qx in -4.0f64..4.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows = rng.gen_range(5..50);
            let (x, y) = random_training(&mut rng, rows, 2);
            let k = [1usize, 3, 5][k_idx].min(if rows % 2 == 0 { rows - 1 } else { rows });
            let model = fit_knn(x.clone(), y.clone(), k).unwrap();
            let query = [qx, 0.5];
            let fast = knn_predict_proba(&model, &query);

            let mut order: Vec<usize> = (0..rows).collect();
            order.sort_by(|&a, &b| {
                squared_distance(&x[a], &query)
                    .partial_cmp(&squared_distance(&x[b], &query))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut counts = [0usize; 2];
            for &i in order.iter().take(k) {
                counts[y[i] as usize] += 1;
            }
            let slow: Vec<f64> = counts.iter().map(|&c| c as f64 / k as f64).collect();
            prop_assert_eq!(fast, slow);
        }
    }
}
