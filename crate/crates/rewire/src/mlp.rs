//! Feed-forward rectifier network with a softmax cross-entropy head.
//!
//! Forward and backward run against any [`ParamSource`]: the dense
//! materialization is used for the layer products, while gradient extraction
//! is restricted to the active connections of a sparse store (dormant
//! connections receive no gradient by construction).

use crate::error::{Error, Result};
use crate::math::{matmul, Matrix};
use crate::num::Scalar;
use crate::store::{ConnectionStore, ParamSource, SoftStore};

/// Probabilities are clamped to this floor before taking logs.
pub const PROB_EPS: f64 = 1e-12;

/// Architecture description: layer sizes from input to output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    layer_sizes: Vec<usize>,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::Config(
                "network needs at least one hidden layer".into(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        Ok(NetworkSpec { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

/// Per-layer intermediate state of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<F> {
    /// `activations[0]` is the input batch; `activations[l]` the rectified
    /// output of layer `l` for hidden layers.
    pub activations: Vec<Matrix<F>>,
    /// Pre-activations per layer, same indexing as the weight matrices.
    pub pre_activations: Vec<Matrix<F>>,
    /// Softmax class probabilities, one row per sample.
    pub probabilities: Matrix<F>,
}

impl<F: Scalar> ForwardTrace<F> {
    pub fn batch_size(&self) -> usize {
        self.probabilities.rows()
    }
}

/// Gradients restricted to the active set of a hard-budget store.
#[derive(Clone, Debug)]
pub struct GradientSet<F> {
    /// dE/dtheta_k, aligned with the store's active list.
    pub theta: Vec<F>,
    /// Dense per-layer bias gradients.
    pub bias: Vec<Vec<F>>,
}

impl<F: Scalar> GradientSet<F> {
    pub fn all_finite(&self) -> bool {
        self.theta.iter().all(|g| g.is_finite())
            && self.bias.iter().flatten().all(|g| g.is_finite())
    }
}

/// Gradients for a soft store, indexed by flat connection id. Dormant entries
/// are exactly zero.
#[derive(Clone, Debug)]
pub struct SoftGradientSet<F> {
    pub theta: Vec<F>,
    pub bias: Vec<Vec<F>>,
}

/// Dense gradients for the unconstrained baselines.
#[derive(Clone, Debug)]
pub struct DenseGradientSet<F> {
    pub weights: Vec<Matrix<F>>,
    pub bias: Vec<Vec<F>>,
}

/// Forward pass over the materialized weights.
pub fn forward<F: Scalar, P: ParamSource<F>>(
    source: &P,
    batch: &Matrix<F>,
) -> Result<ForwardTrace<F>> {
    let weights = source.weight_matrices();
    let biases = source.bias_vectors();
    if batch.cols() != weights[0].rows() {
        return Err(Error::Contract(format!(
            "batch has {} features, input layer expects {}",
            batch.cols(),
            weights[0].rows()
        )));
    }
    if !batch.all_finite() {
        return Err(Error::Contract("non-finite input batch".into()));
    }
    let num_layers = weights.len();
    let mut activations = Vec::with_capacity(num_layers + 1);
    let mut pre_activations = Vec::with_capacity(num_layers);
    activations.push(batch.clone());
    for l in 0..num_layers {
        let mut z = matmul(&activations[l], &weights[l])?;
        for r in 0..z.rows() {
            let row = z.row_mut(r);
            for (v, &b) in row.iter_mut().zip(&biases[l]) {
                *v = *v + b;
            }
        }
        if l + 1 < num_layers {
            let mut a = z.clone();
            for v in a.data_mut() {
                if *v < F::zero() {
                    *v = F::zero();
                }
            }
            pre_activations.push(z);
            activations.push(a);
        } else {
            let probs = softmax(&z);
            pre_activations.push(z);
            return Ok(ForwardTrace {
                activations,
                pre_activations,
                probabilities: probs,
            });
        }
    }
    unreachable!()
}

fn softmax<F: Scalar>(z: &Matrix<F>) -> Matrix<F> {
    let mut out = Matrix::zeros(z.rows(), z.cols());
    for r in 0..z.rows() {
        let row = z.row(r);
        let mut max = row[0];
        for &v in row {
            if v > max {
                max = v;
            }
        }
        let mut sum = F::zero();
        let out_row = out.row_mut(r);
        for (o, &v) in out_row.iter_mut().zip(row) {
            let e = (v - max).exp();
            *o = e;
            sum = sum + e;
        }
        for o in out_row.iter_mut() {
            *o = *o / sum;
        }
    }
    out
}

/// Mean negative log-probability of the true labels.
pub fn cross_entropy<F: Scalar>(trace: &ForwardTrace<F>, labels: &[usize]) -> F {
    assert_eq!(trace.batch_size(), labels.len());
    let eps = F::from_f64_lossy(PROB_EPS);
    let mut total = F::zero();
    for (r, &label) in labels.iter().enumerate() {
        let p = trace.probabilities.get(r, label).max(eps);
        total = total - p.ln();
    }
    total / F::from_f64_lossy(labels.len() as f64)
}

/// Fraction of argmax predictions equal to the labels; ties break toward the
/// lowest class index.
pub fn accuracy<F: Scalar>(trace: &ForwardTrace<F>, labels: &[usize]) -> f64 {
    assert_eq!(trace.batch_size(), labels.len());
    let mut correct = 0;
    for (r, &label) in labels.iter().enumerate() {
        let row = trace.probabilities.row(r);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    correct as f64 / labels.len() as f64
}

/// Per-layer errors dE/dz with mean batch reduction, plus bias gradients.
fn deltas<F: Scalar, P: ParamSource<F>>(
    source: &P,
    trace: &ForwardTrace<F>,
    labels: &[usize],
) -> (Vec<Matrix<F>>, Vec<Vec<F>>) {
    let weights = source.weight_matrices();
    let num_layers = weights.len();
    let batch = trace.batch_size();
    let inv_batch = F::from_f64_lossy(1.0 / batch as f64);

    let mut all = vec![Matrix::zeros(0, 0); num_layers];
    let mut out_delta = trace.probabilities.clone();
    for (r, &label) in labels.iter().enumerate() {
        let v = out_delta.get(r, label) - F::one();
        out_delta.set(r, label, v);
    }
    for v in out_delta.data_mut() {
        *v = *v * inv_batch;
    }
    all[num_layers - 1] = out_delta;

    for l in (0..num_layers - 1).rev() {
        // delta_l = (delta_{l+1} W_{l+1}^T) ⊙ relu'(z_l)
        let next = &all[l + 1];
        let w = &weights[l + 1];
        let mut d = Matrix::zeros(batch, w.rows());
        for b in 0..batch {
            let next_row = next.row(b);
            let d_row = d.row_mut(b);
            for i in 0..w.rows() {
                let w_row = w.row(i);
                let mut acc = F::zero();
                for (&nv, &wv) in next_row.iter().zip(w_row) {
                    acc = acc + nv * wv;
                }
                d_row[i] = acc;
            }
        }
        // rectifier derivative: 0 at and below zero
        for (dv, &z) in d.data_mut().iter_mut().zip(trace.pre_activations[l].data()) {
            if z <= F::zero() {
                *dv = F::zero();
            }
        }
        all[l] = d;
    }

    let bias = all
        .iter()
        .map(|d| {
            let mut g = vec![F::zero(); d.cols()];
            for r in 0..d.rows() {
                for (gv, &dv) in g.iter_mut().zip(d.row(r)) {
                    *gv = *gv + dv;
                }
            }
            g
        })
        .collect();
    (all, bias)
}

/// Exact gradients of the cross-entropy with respect to the active thetas
/// (including the sign factor from `w = s * theta`) and the biases.
pub fn backward<F: Scalar>(
    store: &ConnectionStore<F>,
    trace: &ForwardTrace<F>,
    labels: &[usize],
) -> GradientSet<F> {
    let (delta, bias) = deltas(store, trace, labels);
    let batch = trace.batch_size();
    let theta = store
        .active()
        .iter()
        .map(|&k| {
            let l = store.layer_of(k);
            let (i, j) = store.layers()[l].coords(k);
            let act = &trace.activations[l];
            let d = &delta[l];
            let mut acc = F::zero();
            for b in 0..batch {
                acc = acc + act.get(b, i) * d.get(b, j);
            }
            F::from_f64_lossy(store.sign(k) as f64) * acc
        })
        .collect();
    GradientSet { theta, bias }
}

/// Gradients for a soft store: defined where `theta >= 0`, exactly zero for
/// dormant connections.
pub fn backward_soft<F: Scalar>(
    store: &SoftStore<F>,
    trace: &ForwardTrace<F>,
    labels: &[usize],
) -> SoftGradientSet<F> {
    let (delta, bias) = deltas(store, trace, labels);
    let batch = trace.batch_size();
    let mut theta = vec![F::zero(); store.m()];
    for layer in store.layers() {
        let act = &trace.activations[layer.index];
        let d = &delta[layer.index];
        for k in layer.offset..layer.offset + layer.len() {
            if !store.is_active(k) {
                continue;
            }
            let (i, j) = layer.coords(k);
            let mut acc = F::zero();
            for b in 0..batch {
                acc = acc + act.get(b, i) * d.get(b, j);
            }
            theta[k] = F::from_f64_lossy(store.sign(k) as f64) * acc;
        }
    }
    SoftGradientSet { theta, bias }
}

/// Dense weight and bias gradients for the unconstrained baselines.
pub fn backward_dense<F: Scalar, P: ParamSource<F>>(
    source: &P,
    trace: &ForwardTrace<F>,
    labels: &[usize],
) -> DenseGradientSet<F> {
    let (delta, bias) = deltas(source, trace, labels);
    let weights = source.weight_matrices();
    let batch = trace.batch_size();
    let mut dw = Vec::with_capacity(weights.len());
    for (l, w) in weights.iter().enumerate() {
        let act = &trace.activations[l];
        let d = &delta[l];
        let mut g = Matrix::zeros(w.rows(), w.cols());
        for b in 0..batch {
            let a_row = act.row(b);
            let d_row = d.row(b);
            for (i, &av) in a_row.iter().enumerate() {
                if av == F::zero() {
                    continue;
                }
                let g_row = g.row_mut(i);
                for (gv, &dv) in g_row.iter_mut().zip(d_row) {
                    *gv = *gv + av * dv;
                }
            }
        }
        dw.push(g);
    }
    DenseGradientSet { weights: dw, bias }
}

/// Smooth surrogate for the rectified weight mapping, used by the theory
/// bench to validate the large-gamma limit. Returns `(w, dw/dtheta)`.
pub fn smooth_weight_map(theta: f64, sign: i8, gamma: f64) -> (f64, f64) {
    assert!(gamma > 0.0 && gamma.is_finite());
    let s = sign as f64;
    let x = gamma * theta;
    // softplus(x) = max(x, 0) + ln(1 + exp(-|x|)), overflow-safe
    let softplus = x.max(0.0) + (-x.abs()).exp().ln_1p();
    let w = s * softplus / gamma;
    let dw = s * sigmoid(x);
    (w, dw)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The hard rectified mapping: `s * theta` when active, zero when dormant.
pub fn rectified_weight_map(theta: f64, sign: i8) -> f64 {
    if theta < 0.0 {
        0.0
    } else {
        sign as f64 * theta
    }
}
