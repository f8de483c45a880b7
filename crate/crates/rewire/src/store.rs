//! Connection-centric parameter stores.
//!
//! A network is a flat list of M potential connections. Each connection `k`
//! carries an amplitude `theta[k]` and a fixed sign `sign[k]`; the network
//! weight is `sign[k] * theta[k]` while the connection is active and exactly
//! zero while it is dormant. [`ConnectionStore`] enforces a hard budget of
//! exactly K active connections; [`SoftStore`] lets dormant parameters keep
//! diffusing below zero instead.

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::num::Scalar;
use crate::rng::RngStream;

const DORMANT: u32 = u32::MAX;

/// Shape bookkeeping for one weight matrix in the flat connection index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub index: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    /// Flat id of this layer's first connection.
    pub offset: usize,
}

impl LayerShape {
    pub fn len(&self) -> usize {
        self.fan_in * self.fan_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Map a flat id inside this layer to (input unit, output unit).
    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        let local = k - self.offset;
        (local / self.fan_out, local % self.fan_out)
    }
}

/// Contiguous layer shapes for a feed-forward net given its layer sizes.
pub fn layer_shapes(layer_sizes: &[usize]) -> Vec<LayerShape> {
    let mut shapes = Vec::new();
    let mut offset = 0;
    for (index, pair) in layer_sizes.windows(2).enumerate() {
        let shape = LayerShape {
            index,
            fan_in: pair[0],
            fan_out: pair[1],
            offset,
        };
        offset += shape.len();
        shapes.push(shape);
    }
    shapes
}

/// Per-layer connectivity fractions from a global target `p0`.
///
/// Multipliers let large hidden matrices stay sparser than small output
/// matrices; each product is clipped to 1.
pub fn allocate_fractions(p0: f64, multipliers: &[f64]) -> Result<Vec<f64>> {
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(Error::Config(format!("p0 must be in (0, 1], got {p0}")));
    }
    Ok(multipliers.iter().map(|m| (m * p0).min(1.0)).collect())
}

/// Default multipliers for the three-layer MNIST MLP.
pub const MNIST_MULTIPLIERS: [f64; 3] = [0.75, 2.3, 22.8];

/// Access to materialized per-layer parameters, shared by sparse stores and
/// dense baselines.
pub trait ParamSource<F: Scalar> {
    fn weight_matrices(&self) -> &[Matrix<F>];
    fn bias_vectors(&self) -> &[Vec<F>];
    fn layer_sizes(&self) -> Vec<usize> {
        let w = self.weight_matrices();
        let mut sizes = vec![w[0].rows()];
        sizes.extend(w.iter().map(|m| m.cols()));
        sizes
    }
}

/// Hard-budget store: exactly K of M connections are active between
/// iterations.
#[derive(Clone, Debug)]
pub struct ConnectionStore<F> {
    layers: Vec<LayerShape>,
    m: usize,
    k: usize,
    theta: Vec<F>,
    sign: Vec<i8>,
    /// Compact list of active flat ids, arbitrary order.
    active_list: Vec<usize>,
    /// Position of k in `active_list`, or DORMANT. Doubles as membership set.
    active_pos: Vec<u32>,
    active_per_layer: Vec<usize>,
    weights: Vec<Matrix<F>>,
    biases: Vec<Vec<F>>,
}

impl<F: Scalar> ConnectionStore<F> {
    /// Initialize with exactly `round(fraction_l * M_l)` uniformly chosen
    /// active connections per layer (half-to-even rounding). Active
    /// amplitudes are drawn as `|N(0,1)| / sqrt(fan_in)` with a uniform sign,
    /// which keeps the materialized weight distribution `N(0,1)/sqrt(fan_in)`.
    pub fn init_connectivity(
        layer_sizes: &[usize],
        fractions: &[f64],
        rng: &mut RngStream,
    ) -> Result<Self> {
        let layers = layer_shapes(layer_sizes);
        if fractions.len() != layers.len() {
            return Err(Error::Config(format!(
                "{} fractions for {} layers",
                fractions.len(),
                layers.len()
            )));
        }
        for &f in fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("fraction {f} outside [0, 1]")));
            }
        }
        let m: usize = layers.iter().map(|l| l.len()).sum();
        let mut store = ConnectionStore {
            layers: layers.clone(),
            m,
            k: 0,
            theta: vec![F::zero(); m],
            sign: vec![1i8; m],
            active_list: Vec::new(),
            active_pos: vec![DORMANT; m],
            active_per_layer: vec![0; layers.len()],
            weights: layers
                .iter()
                .map(|l| Matrix::zeros(l.fan_in, l.fan_out))
                .collect(),
            biases: layers.iter().map(|l| vec![F::zero(); l.fan_out]).collect(),
        };
        for (layer, &fraction) in layers.iter().zip(fractions) {
            let count = round_half_even(fraction * layer.len() as f64);
            let picks = sample_without_replacement(layer.len(), count, rng);
            let scale = 1.0 / (layer.fan_in as f64).sqrt();
            for local in picks {
                let k = layer.offset + local;
                let sign = rng.sign();
                let theta = F::from_f64_lossy(rng.gauss_one::<f64>().abs() * scale);
                store.sign[k] = sign;
                store.activate_with_theta(k, theta);
            }
        }
        store.k = store.active_list.len();
        Ok(store)
    }

    /// Fully connected store (K == M), used for reduction tests.
    pub fn fully_connected(layer_sizes: &[usize], rng: &mut RngStream) -> Result<Self> {
        let layers = layer_shapes(layer_sizes);
        let fractions = vec![1.0; layers.len()];
        Self::init_connectivity(layer_sizes, &fractions, rng)
    }

    fn activate_with_theta(&mut self, k: usize, theta: F) {
        debug_assert_eq!(self.active_pos[k], DORMANT);
        self.active_pos[k] = self.active_list.len() as u32;
        self.active_list.push(k);
        self.theta[k] = theta;
        let l = self.layer_of(k);
        self.active_per_layer[l] += 1;
        self.write_weight(k);
    }

    /// Index of the layer owning flat id `k`.
    pub fn layer_of(&self, k: usize) -> usize {
        debug_assert!(k < self.m);
        // Few layers; linear scan beats binary search at this scale.
        for l in self.layers.iter().rev() {
            if k >= l.offset {
                return l.index;
            }
        }
        unreachable!()
    }

    fn write_weight(&mut self, k: usize) {
        let l = self.layer_of(k);
        let (i, j) = self.layers[l].coords(k);
        let w = if self.active_pos[k] == DORMANT || self.theta[k] < F::zero() {
            F::zero()
        } else {
            let s = F::from_f64_lossy(self.sign[k] as f64);
            s * self.theta[k]
        };
        self.weights[l].set(i, j, w);
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn budget(&self) -> usize {
        self.k
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn active(&self) -> &[usize] {
        &self.active_list
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.active_pos[k] != DORMANT
    }

    pub fn theta(&self, k: usize) -> F {
        self.theta[k]
    }

    pub fn sign(&self, k: usize) -> i8 {
        self.sign[k]
    }

    pub fn active_per_layer(&self) -> &[usize] {
        &self.active_per_layer
    }

    /// Update the amplitude of an active connection, keeping the dense
    /// materialization in sync.
    pub fn set_theta(&mut self, k: usize, theta: F) {
        debug_assert!(self.is_active(k));
        self.theta[k] = theta;
        self.write_weight(k);
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Vec<F> {
        &mut self.biases[layer]
    }

    /// Dense materialization of one layer: `w = s * theta` for active
    /// connections, exactly zero otherwise.
    pub fn materialize_weights(&self, layer: usize) -> Matrix<F> {
        self.weights[layer].clone()
    }

    /// Remove `k` from the active set; its weight becomes exactly zero.
    pub fn set_dormant(&mut self, k: usize) -> Result<()> {
        if self.active_pos[k] == DORMANT {
            return Err(Error::Contract(format!("connection {k} already dormant")));
        }
        let pos = self.active_pos[k] as usize;
        let last = *self.active_list.last().unwrap();
        self.active_list.swap_remove(pos);
        if last != k {
            self.active_pos[last] = pos as u32;
        }
        self.active_pos[k] = DORMANT;
        let l = self.layer_of(k);
        self.active_per_layer[l] -= 1;
        self.write_weight(k);
        Ok(())
    }

    /// Force connection `k` active with an explicit sign and amplitude,
    /// deactivating it first if needed. Used by the theory bench to pin
    /// specific architectures.
    pub fn reactivate_with_sign(&mut self, k: usize, sign: i8, theta: F) -> Result<()> {
        if self.is_active(k) {
            self.set_dormant(k)?;
        }
        self.sign[k] = sign;
        self.activate_with_theta(k, theta);
        Ok(())
    }

    /// Uniformly activate dormant connections until exactly K are active.
    /// New connections start at `theta = 0` with a freshly drawn sign.
    /// Returns the number of activations.
    pub fn replenish(&mut self, rng: &mut RngStream) -> Result<usize> {
        Ok(self.replenish_per_layer(rng)?.iter().sum())
    }

    /// As [`replenish`](Self::replenish), reporting activations per layer.
    pub fn replenish_per_layer(&mut self, rng: &mut RngStream) -> Result<Vec<usize>> {
        let mut activated = vec![0usize; self.layers.len()];
        while self.active_list.len() < self.k {
            // Rejection against the membership set; cheap at target sparsity.
            let k = loop {
                let cand = rng.uniform_index(self.m)?;
                if self.active_pos[cand] == DORMANT {
                    break cand;
                }
            };
            self.sign[k] = rng.sign();
            self.activate_with_theta(k, F::zero());
            activated[self.layer_of(k)] += 1;
        }
        Ok(activated)
    }

    pub fn connectivity_fraction(&self) -> f64 {
        self.active_list.len() as f64 / self.m as f64
    }

    pub fn layer_connectivity(&self, layer: usize) -> f64 {
        self.active_per_layer[layer] as f64 / self.layers[layer].len() as f64
    }

    /// True iff the exact-K budget currently holds.
    pub fn exact_k_holds(&self) -> bool {
        self.active_list.len() == self.k
    }

    /// Rebuild a store from checkpointed state. `active` preserves the
    /// in-memory active-list order so a resumed run replays identically.
    pub fn from_raw(
        layer_sizes: &[usize],
        budget: usize,
        theta: Vec<F>,
        sign: Vec<i8>,
        active: &[usize],
        biases: Vec<Vec<F>>,
    ) -> Result<Self> {
        let layers = layer_shapes(layer_sizes);
        let m: usize = layers.iter().map(|l| l.len()).sum();
        if theta.len() != m || sign.len() != m {
            return Err(Error::Contract(format!(
                "raw state sized for {} connections, store has {m}",
                theta.len()
            )));
        }
        if active.len() != budget {
            return Err(Error::Contract(format!(
                "{} active connections for budget {budget}",
                active.len()
            )));
        }
        if biases.len() != layers.len()
            || biases.iter().zip(&layers).any(|(b, l)| b.len() != l.fan_out)
        {
            return Err(Error::Contract("bias shape mismatch".into()));
        }
        let mut store = ConnectionStore {
            layers: layers.clone(),
            m,
            k: budget,
            theta: vec![F::zero(); m],
            sign,
            active_list: Vec::new(),
            active_pos: vec![DORMANT; m],
            active_per_layer: vec![0; layers.len()],
            weights: layers
                .iter()
                .map(|l| Matrix::zeros(l.fan_in, l.fan_out))
                .collect(),
            biases,
        };
        for &k in active {
            if k >= m {
                return Err(Error::Contract(format!("active id {k} out of range")));
            }
            if store.is_active(k) {
                return Err(Error::Contract(format!("duplicate active id {k}")));
            }
            store.activate_with_theta(k, theta[k]);
        }
        store.theta = theta;
        for k in 0..m {
            store.write_weight(k);
        }
        Ok(store)
    }
}

impl<F: Scalar> ParamSource<F> for ConnectionStore<F> {
    fn weight_matrices(&self) -> &[Matrix<F>] {
        &self.weights
    }

    fn bias_vectors(&self) -> &[Vec<F>] {
        &self.biases
    }
}

/// Soft-budget store: theta is defined for all M connections; a connection is
/// active iff `theta >= 0`, and dormant parameters are clipped at `theta_min`.
#[derive(Clone, Debug)]
pub struct SoftStore<F> {
    layers: Vec<LayerShape>,
    m: usize,
    theta: Vec<F>,
    sign: Vec<i8>,
    theta_min: F,
    active_count: usize,
    weights: Vec<Matrix<F>>,
    biases: Vec<Vec<F>>,
}

impl<F: Scalar> SoftStore<F> {
    /// Same per-layer active initialization as [`ConnectionStore`]; dormant
    /// amplitudes start uniformly in `[theta_min, 0)` so one noisy iteration
    /// does not immediately reactivate half of them.
    pub fn init_connectivity(
        layer_sizes: &[usize],
        fractions: &[f64],
        theta_min: F,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if theta_min >= F::zero() {
            return Err(Error::Config(format!("theta_min must be < 0, got {theta_min}")));
        }
        let hard = ConnectionStore::<F>::init_connectivity(layer_sizes, fractions, rng)?;
        let m = hard.m;
        let mut theta = vec![F::zero(); m];
        let mut active_count = 0;
        for k in 0..m {
            if hard.is_active(k) {
                theta[k] = hard.theta[k];
                active_count += 1;
            } else {
                theta[k] = theta_min * rng.uniform::<F>();
            }
        }
        Ok(SoftStore {
            layers: hard.layers,
            m,
            theta,
            sign: hard.sign,
            theta_min,
            active_count,
            weights: hard.weights,
            biases: hard.biases,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn theta_min(&self) -> F {
        self.theta_min
    }

    pub fn theta(&self, k: usize) -> F {
        self.theta[k]
    }

    pub fn sign(&self, k: usize) -> i8 {
        self.sign[k]
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.theta[k] >= F::zero()
    }

    pub fn active_count(&self) -> usize {
        self.active_count
    }

    pub fn connectivity_fraction(&self) -> f64 {
        self.active_count as f64 / self.m as f64
    }

    pub fn layer_connectivity(&self, layer: usize) -> f64 {
        let l = &self.layers[layer];
        let active = (l.offset..l.offset + l.len())
            .filter(|&k| self.is_active(k))
            .count();
        active as f64 / l.len() as f64
    }

    pub fn layer_of(&self, k: usize) -> usize {
        for l in self.layers.iter().rev() {
            if k >= l.offset {
                return l.index;
            }
        }
        unreachable!()
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Vec<F> {
        &mut self.biases[layer]
    }

    /// Update one amplitude, clipping at `theta_min` and tracking
    /// active/dormant transitions. Returns true if the connection is active
    /// after the update.
    pub fn set_theta(&mut self, k: usize, theta: F) -> bool {
        let clipped = if theta < self.theta_min {
            self.theta_min
        } else {
            theta
        };
        let was_active = self.theta[k] >= F::zero();
        self.theta[k] = clipped;
        let is_active = clipped >= F::zero();
        match (was_active, is_active) {
            (false, true) => self.active_count += 1,
            (true, false) => self.active_count -= 1,
            _ => {}
        }
        let l = self.layer_of(k);
        let (i, j) = self.layers[l].coords(k);
        let w = if is_active {
            F::from_f64_lossy(self.sign[k] as f64) * clipped
        } else {
            F::zero()
        };
        self.weights[l].set(i, j, w);
        is_active
    }

    pub fn materialize_weights(&self, layer: usize) -> Matrix<F> {
        self.weights[layer].clone()
    }

    /// Rebuild a soft store from checkpointed state.
    pub fn from_raw(
        layer_sizes: &[usize],
        theta_min: F,
        theta: Vec<F>,
        sign: Vec<i8>,
        biases: Vec<Vec<F>>,
    ) -> Result<Self> {
        if theta_min >= F::zero() {
            return Err(Error::Contract("theta_min must be < 0".into()));
        }
        let layers = layer_shapes(layer_sizes);
        let m: usize = layers.iter().map(|l| l.len()).sum();
        if theta.len() != m || sign.len() != m {
            return Err(Error::Contract(format!(
                "raw state sized for {} connections, store has {m}",
                theta.len()
            )));
        }
        let mut store = SoftStore {
            layers: layers.clone(),
            m,
            theta,
            sign,
            theta_min,
            active_count: 0,
            weights: layers
                .iter()
                .map(|l| Matrix::zeros(l.fan_in, l.fan_out))
                .collect(),
            biases,
        };
        for k in 0..m {
            if store.theta[k] >= F::zero() {
                store.active_count += 1;
                let l = store.layer_of(k);
                let (i, j) = store.layers[l].coords(k);
                let w = F::from_f64_lossy(store.sign[k] as f64) * store.theta[k];
                store.weights[l].set(i, j, w);
            }
        }
        Ok(store)
    }
}

impl<F: Scalar> ParamSource<F> for SoftStore<F> {
    fn weight_matrices(&self) -> &[Matrix<F>] {
        &self.weights
    }

    fn bias_vectors(&self) -> &[Vec<F>] {
        &self.biases
    }
}

/// Unconstrained dense parameters for the SGD, shrinkage and pruning
/// baselines.
#[derive(Clone, Debug)]
pub struct DenseNet<F> {
    layers: Vec<LayerShape>,
    weights: Vec<Matrix<F>>,
    biases: Vec<Vec<F>>,
}

impl<F: Scalar> DenseNet<F> {
    /// Weights drawn as `N(0,1) / sqrt(fan_in)`, biases zero.
    pub fn init(layer_sizes: &[usize], rng: &mut RngStream) -> Self {
        let layers = layer_shapes(layer_sizes);
        let weights = layers
            .iter()
            .map(|l| {
                let scale = F::from_f64_lossy(1.0 / (l.fan_in as f64).sqrt());
                let data = rng
                    .gauss::<F>(l.len())
                    .into_iter()
                    .map(|g| g * scale)
                    .collect();
                Matrix::from_vec(l.fan_in, l.fan_out, data).unwrap()
            })
            .collect();
        let biases = layers.iter().map(|l| vec![F::zero(); l.fan_out]).collect();
        DenseNet {
            layers,
            weights,
            biases,
        }
    }

    /// Dense copy of a hard store's materialized weights and biases.
    pub fn from_store(store: &ConnectionStore<F>) -> Self {
        DenseNet {
            layers: store.layers().to_vec(),
            weights: store.weight_matrices().to_vec(),
            biases: store.bias_vectors().to_vec(),
        }
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix<F>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<F>] {
        &mut self.biases
    }

    /// Fraction of exactly nonzero weights.
    pub fn connectivity_fraction(&self) -> f64 {
        let total: usize = self.layers.iter().map(|l| l.len()).sum();
        let nonzero: usize = self
            .weights
            .iter()
            .map(|w| w.iter().filter(|&&v| v != F::zero()).count())
            .sum();
        nonzero as f64 / total as f64
    }

    pub fn layer_connectivity(&self, layer: usize) -> f64 {
        let w = &self.weights[layer];
        let nonzero = w.iter().filter(|&&v| v != F::zero()).count();
        nonzero as f64 / self.layers[layer].len() as f64
    }

    /// Rebuild a dense net from checkpointed state.
    pub fn from_raw(
        layer_sizes: &[usize],
        weights: Vec<Matrix<F>>,
        biases: Vec<Vec<F>>,
    ) -> Result<Self> {
        let layers = layer_shapes(layer_sizes);
        if weights.len() != layers.len()
            || weights
                .iter()
                .zip(&layers)
                .any(|(w, l)| w.rows() != l.fan_in || w.cols() != l.fan_out)
        {
            return Err(Error::Contract("weight shape mismatch".into()));
        }
        if biases.len() != layers.len()
            || biases.iter().zip(&layers).any(|(b, l)| b.len() != l.fan_out)
        {
            return Err(Error::Contract("bias shape mismatch".into()));
        }
        Ok(DenseNet {
            layers,
            weights,
            biases,
        })
    }
}

impl<F: Scalar> ParamSource<F> for DenseNet<F> {
    fn weight_matrices(&self) -> &[Matrix<F>] {
        &self.weights
    }

    fn bias_vectors(&self) -> &[Vec<F>] {
        &self.biases
    }
}

fn round_half_even(x: f64) -> usize {
    let floor = x.floor();
    let frac = x - floor;
    let base = floor as usize;
    if frac > 0.5 {
        base + 1
    } else if frac < 0.5 {
        base
    } else if base % 2 == 0 {
        base
    } else {
        base + 1
    }
}

/// `count` distinct indices uniformly from `[0, n)` via partial Fisher-Yates.
fn sample_without_replacement(n: usize, count: usize, rng: &mut RngStream) -> Vec<usize> {
    assert!(count <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = i + rng.uniform_index(n - i).unwrap();
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}
