//! Soft-margin SVM on a precomputed kernel.
//!
//! The dual `max Σα - ½ ΣΣ α_i α_j y_i y_j K_ij` subject to `0 ≤ α ≤ C`,
//! `Σ α_i y_i = 0` is solved by SMO with maximal-violating-pair selection
//! (ties go to the lowest index) and no shrinking. Multiclass problems use
//! one-vs-rest with an argmax over decision values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::GramMatrix;

const TAU: f64 = 1e-12;

/// Floor on the default update budget; `10 n` passes of `n` updates is only
/// 90 updates for three points.
pub const MIN_DEFAULT_ITERATIONS: usize = 100_000;

/// Dense row-major kernel block: `rows` query items against `cols` training
/// items.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelBlock {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl KernelBlock {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::GramDimension(format!(
                "{} values for a {rows}x{cols} block",
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn square(n: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(n, n, values)
    }

    pub fn from_gram(gram: &GramMatrix, rows: &[usize], cols: &[usize]) -> Self {
        Self {
            rows: rows.len(),
            cols: cols.len(),
            values: gram.block(rows, cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|x| x * c).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    /// Stop when the maximal KKT violation drops below this. The default
    /// 1e-4 keeps the dual objective within about 1e-4 of its optimum on
    /// small problems, which 1e-3 does not.
    pub tol: f64,
    /// Iteration budget in units of `n` pair updates. `None` means `10 n`
    /// passes, but never fewer than [`MIN_DEFAULT_ITERATIONS`] updates.
    pub max_passes: Option<usize>,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_passes: None,
        }
    }
}

impl SmoParams {
    pub fn with_c(c: f64) -> Self {
        Self { c, ..Self::default() }
    }
}

/// One trained binary machine. The decision value of a query is
/// `Σ dual_coeffs[k] * K(support[k], query) + bias`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub support: Vec<usize>,
    /// `α_i y_i` for each support index.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub objective: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out first.
    pub converged: bool,
}

impl BinaryModel {
    pub fn decision_value(&self, row: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (&i, &coef) in self.support.iter().zip(&self.dual_coeffs) {
            sum += coef * row[i];
        }
        sum + self.bias
    }
}

/// Full solver state, for inspecting a solve.
#[derive(Clone, Debug)]
pub struct SmoOutcome {
    pub model: BinaryModel,
    pub alphas: Vec<f64>,
    /// Dual objective after every pair update, starting from 0.
    pub objective_trace: Vec<f64>,
}

fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>()
}

pub fn train_binary(kernel: &KernelBlock, y: &[f64], params: &SmoParams) -> Result<BinaryModel> {
    solve(kernel, y, params, false).map(|o| o.model)
}

pub fn train_binary_traced(kernel: &KernelBlock, y: &[f64], params: &SmoParams) -> Result<SmoOutcome> {
    solve(kernel, y, params, true)
}

/// Index of the largest `score + up_mask` and of the largest
/// `-score + low_mask`, ties to the lowest index. Masks are `0` for eligible
/// entries and `-inf` otherwise, which keeps the scan free of data-dependent
/// branches; four lanes keep it from serializing on one running maximum.
fn select_pair(score: &[f64], up_mask: &[f64], low_mask: &[f64]) -> ((f64, usize), (f64, usize)) {
    const LANES: usize = 4;
    let mut up_val = [f64::NEG_INFINITY; LANES];
    let mut up_idx = [usize::MAX; LANES];
    let mut low_val = [f64::NEG_INFINITY; LANES];
    let mut low_idx = [usize::MAX; LANES];
    let chunks = score
        .chunks_exact(LANES)
        .zip(up_mask.chunks_exact(LANES))
        .zip(low_mask.chunks_exact(LANES));
    for (c, ((s, um), lm)) in chunks.enumerate() {
        for l in 0..LANES {
            let (u, v) = (s[l] + um[l], -s[l] + lm[l]);
            if u > up_val[l] {
                up_val[l] = u;
                up_idx[l] = c * LANES + l;
            }
            if v > low_val[l] {
                low_val[l] = v;
                low_idx[l] = c * LANES + l;
            }
        }
    }
    let mut up = (f64::NEG_INFINITY, usize::MAX);
    let mut low = (f64::NEG_INFINITY, usize::MAX);
    for t in score.len() - score.len() % LANES..score.len() {
        let (u, v) = (score[t] + up_mask[t], -score[t] + low_mask[t]);
        if u > up.0 {
            up = (u, t);
        }
        if v > low.0 {
            low = (v, t);
        }
    }
    let merge = |mut b: (f64, usize), vals: [f64; LANES], idx: [usize; LANES]| {
        for l in 0..LANES {
            if vals[l] > b.0 || (vals[l] == b.0 && idx[l] < b.1) {
                b = (vals[l], idx[l]);
            }
        }
        b
    };
    (merge(up, up_val, up_idx), merge(low, low_val, low_idx))
}

fn solve(kernel: &KernelBlock, y: &[f64], params: &SmoParams, trace: bool) -> Result<SmoOutcome> {
    let n = y.len();
    if kernel.rows != n || kernel.cols != n {
        return Err(Error::Alignment {
            expected: n,
            found: kernel.rows,
        });
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::Config(format!("C must be positive, got {}", params.c)));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::Config(format!("labels must be +1 or -1, got {bad}")));
    }
    let c = params.c;
    let max_iter = match params.max_passes {
        Some(passes) => passes.saturating_mul(n).max(1),
        None => (10 * n).saturating_mul(n).max(MIN_DEFAULT_ITERATIONS),
    };

    let mut alpha = vec![0.0; n];
    // Gradient of ½ αᵀQα - Σα, with Q_ij = y_i y_j K_ij.
    let grad_of = |score: &[f64]| -> Vec<f64> { (0..n).map(|t| -y[t] * score[t]).collect() };
    let mut objective_trace = if trace { vec![0.0] } else { Vec::new() };
    let mut iterations = 0;
    let mut converged = false;

    // score[t] = -y_t G_t. Flipping a sign is exact, so the gradient can be
    // recovered from it bit for bit.
    let mut score: Vec<f64> = y.to_vec();
    // Whether α_t may move in the +y_t (up) or -y_t (low) direction.
    let mask = |ok: bool| if ok { 0.0 } else { f64::NEG_INFINITY };
    let movable = |t: usize, a: f64| {
        let (up, low) = if y[t] > 0.0 { (a < c, a > 0.0) } else { (a > 0.0, a < c) };
        (mask(up), mask(low))
    };
    let (mut up_mask, mut low_mask): (Vec<f64>, Vec<f64>) = (0..n).map(|t| movable(t, 0.0)).unzip();
    while iterations < max_iter {
        let (up, low) = select_pair(&score, &up_mask, &low_mask);
        if up.1 == usize::MAX || low.1 == usize::MAX || up.0 + low.0 < params.tol {
            converged = true;
            break;
        }
        let (i, j) = (up.1, low.1);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (kii, kjj, kij) = (kernel.get(i, i), kernel.get(j, j), kernel.get(i, j));

        if y[i] != y[j] {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let (gi, gj) = (-y[i] * score[i], -y[j] * score[j]);
            let delta = (-gi - gj) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let (gi, gj) = (-y[i] * score[i], -y[j] * score[j]);
            let delta = (gi - gj) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        // The training block is symmetric, so rows double as columns.
        let (di, dj) = (y[i] * (alpha[i] - old_i), y[j] * (alpha[j] - old_j));
        let (row_i, row_j) = (kernel.row(i), kernel.row(j));
        for ((s, &ki), &kj) in score.iter_mut().zip(row_i).zip(row_j) {
            *s -= ki * di + kj * dj;
        }
        for t in [i, j] {
            (up_mask[t], low_mask[t]) = movable(t, alpha[t]);
        }
        iterations += 1;
        if trace {
            objective_trace.push(dual_objective(&alpha, &grad_of(&score)));
        }
    }
    if !converged {
        log::debug!("SMO stopped after {iterations} iterations without reaching tol {}", params.tol);
    }

    let grad = grad_of(&score);
    // Bias from free vectors, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else if ub.is_infinite() {
        lb
    } else if lb.is_infinite() {
        ub
    } else {
        (ub + lb) / 2.0
    };

    let (support, dual_coeffs) = (0..n)
        .filter(|&t| alpha[t] > 0.0)
        .map(|t| (t, alpha[t] * y[t]))
        .unzip();
    Ok(SmoOutcome {
        model: BinaryModel {
            support,
            dual_coeffs,
            bias: -rho,
            c,
            objective: dual_objective(&alpha, &grad),
            iterations,
            converged,
        },
        alphas: alpha,
        objective_trace,
    })
}

/// Multiclass model. With two classes a single machine separates
/// `classes[0]` (positive side) from `classes[1]`; otherwise there is one
/// class-vs-rest machine per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub classes: Vec<usize>,
    pub machines: Vec<BinaryModel>,
    pub train_size: usize,
    pub c: f64,
    #[serde(default)]
    pub gram_digest: String,
}

impl SvmModel {
    pub fn decision_values(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.train_size {
            return Err(Error::Alignment {
                expected: self.train_size,
                found: row.len(),
            });
        }
        Ok(self.machines.iter().map(|m| m.decision_value(row)).collect())
    }
}

/// Trains one machine per class of `classes` (one machine total for two
/// classes). Every class must occur in `labels`.
pub fn train_ovr(
    kernel: &KernelBlock,
    labels: &[usize],
    classes: &[usize],
    params: &SmoParams,
) -> Result<SvmModel> {
    if classes.len() < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {}", classes.len())));
    }
    if let Some(&missing) = classes.iter().find(|c| !labels.contains(c)) {
        return Err(Error::DegenerateClass(missing));
    }
    let targets: Vec<usize> = if classes.len() == 2 {
        vec![classes[0]]
    } else {
        classes.to_vec()
    };
    let machines = targets
        .par_iter()
        .map(|&positive| {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == positive { 1.0 } else { -1.0 })
                .collect();
            train_binary(kernel, &y, params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SvmModel {
        classes: classes.to_vec(),
        machines,
        train_size: labels.len(),
        c: params.c,
        gram_digest: String::new(),
    })
}

/// Class of one query given its kernel values against the training set.
pub fn predict(model: &SvmModel, row: &[f64]) -> Result<usize> {
    let values = model.decision_values(row)?;
    if model.classes.len() == 2 {
        return Ok(if values[0] >= 0.0 {
            model.classes[0]
        } else {
            model.classes[1]
        });
    }
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    Ok(model.classes[best])
}

pub fn predict_block(model: &SvmModel, block: &KernelBlock) -> Result<Vec<usize>> {
    (0..block.rows()).map(|i| predict(model, block.row(i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> KernelBlock {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        KernelBlock::square(n, v).unwrap()
    }

    #[test]
    fn separable_pair() {
        let k = identity(2);
        let m = train_binary(&k, &[1.0, -1.0], &SmoParams::default()).unwrap();
        assert_eq!(m.support, vec![0, 1]);
        assert!(m.dual_coeffs[0] > 0.0 && m.dual_coeffs[1] < 0.0);
        assert!(m.decision_value(k.row(0)) > 0.0);
        assert!(m.decision_value(k.row(1)) < 0.0);
        assert!(m.converged);
    }

    #[test]
    fn conflicting_duplicate_hits_the_box() {
        let k = KernelBlock::square(2, vec![1.0; 4]).unwrap();
        let c = 0.7;
        let out = train_binary_traced(&k, &[1.0, -1.0], &SmoParams::with_c(c)).unwrap();
        assert_eq!(out.alphas, vec![c, c]);
        let m = out.model;
        let correct = [1.0, -1.0]
            .iter()
            .enumerate()
            .filter(|(i, &y)| (m.decision_value(k.row(*i)) >= 0.0) == (y > 0.0))
            .count();
        assert_eq!(correct, 1);
    }

    #[test]
    fn objective_never_decreases() {
        // Gram of points on a line under a Gaussian kernel.
        let xs: [f64; 8] = [0.0, 0.4, 1.1, 1.5, 2.3, 2.9, 3.3, 4.0];
        let ys = [1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
        let n = xs.len();
        let values = (0..n)
            .flat_map(|i| (0..n).map(move |j| (-(xs[i] - xs[j]) * (xs[i] - xs[j])).exp()))
            .collect();
        let k = KernelBlock::square(n, values).unwrap();
        let out = train_binary_traced(&k, &ys, &SmoParams::with_c(10.0)).unwrap();
        for w in out.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "{w:?}");
        }
        let eq: f64 = out.alphas.iter().zip(&ys).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-9);
        assert!(out.alphas.iter().all(|&a| (0.0..=10.0).contains(&a)));
    }

    #[test]
    fn prediction_edge_cases() {
        let k = identity(2);
        let model = train_ovr(&k, &[0, 1], &[0, 1], &SmoParams::default()).unwrap();
        assert_eq!(predict(&model, &[1.0, 0.0]).unwrap(), 0);
        assert_eq!(predict(&model, &[0.0, 1.0]).unwrap(), 1);
        let zero = predict(&model, &[0.0, 0.0]).unwrap();
        let expected = if model.machines[0].bias >= 0.0 { 0 } else { 1 };
        assert_eq!(zero, expected);
        assert!(matches!(predict(&model, &[1.0]), Err(Error::Alignment { expected: 2, found: 1 })));
    }

    #[test]
    fn two_class_ovr_is_one_machine() {
        let k = identity(4);
        let labels = [0, 1, 0, 1];
        let model = train_ovr(&k, &labels, &[0, 1], &SmoParams::default()).unwrap();
        assert_eq!(model.machines.len(), 1);
        let y: Vec<f64> = labels.iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
        let single = train_binary(&k, &y, &SmoParams::default()).unwrap();
        for i in 0..4 {
            let by_single = if single.decision_value(k.row(i)) >= 0.0 { 0 } else { 1 };
            assert_eq!(predict(&model, k.row(i)).unwrap(), by_single);
        }
    }

    #[test]
    fn three_class_separable() {
        // Block-diagonal kernel: perfectly separated clusters.
        let labels = [0, 0, 1, 1, 2, 2];
        let n = labels.len();
        let values = (0..n)
            .flat_map(|i| (0..n).map(move |j| if labels[i] == labels[j] { 1.0 } else { 0.0 }))
            .map(|v| v + 0.1)
            .collect();
        let k = KernelBlock::square(n, values).unwrap();
        let model = train_ovr(&k, &labels, &[0, 1, 2], &SmoParams::with_c(10.0)).unwrap();
        assert_eq!(model.machines.len(), 3);
        assert_eq!(predict_block(&model, &k).unwrap(), labels.to_vec());
    }

    #[test]
    fn degenerate_inputs() {
        let k = identity(3);
        assert!(matches!(
            train_ovr(&k, &[0, 0, 2], &[0, 1, 2], &SmoParams::default()),
            Err(Error::DegenerateClass(1))
        ));
        assert!(train_ovr(&k, &[0, 0, 0], &[0], &SmoParams::default()).is_err());
        assert!(train_binary(&k, &[1.0, 0.0, -1.0], &SmoParams::default()).is_err());
        assert!(train_binary(&k, &[1.0, -1.0, 1.0], &SmoParams::with_c(0.0)).is_err());
    }

    #[test]
    fn model_serializes() {
        let k = identity(2);
        let model = train_ovr(&k, &[0, 1], &[0, 1], &SmoParams::default()).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        assert!(json.contains("\"dual_coeffs\""));
        let back: SvmModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }
}
