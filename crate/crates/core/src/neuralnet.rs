//! Fully connected Q-value network trained with MSE and Adam.
//!
//! Hidden layers use the rectifier, the output layer is linear with a single
//! unit. Weights are stored input-major (`w[k * outputs + o]`) so that a
//! forward pass can skip zero inputs, which dominate the sparse query
//! features.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden layer widths of the Q-network.
pub const HIDDEN_UNITS: [usize; 2] = [128, 128];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// Input-major weights: entry `k * outputs + o` connects input `k` to unit `o`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// Adds `x * W` onto `acc`, input by input, skipping zero inputs.
    fn accumulate(&self, x: &[f64], offset: usize, acc: &mut [f64]) {
        for (k, &xk) in x.iter().enumerate() {
            if xk == 0.0 {
                continue;
            }
            let row = &self.weights[(offset + k) * self.outputs..(offset + k + 1) * self.outputs];
            for (a, &w) in acc.iter_mut().zip(row) {
                *a += xk * w;
            }
        }
    }

    fn apply(&self, x: &[f64], rectify: bool) -> Vec<f64> {
        let mut out = self.biases.clone();
        self.accumulate(x, 0, &mut out);
        if rectify {
            relu_in_place(&mut out);
        }
        out
    }
}

fn relu_in_place(values: &mut [f64]) {
    for v in values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Per-layer tensors with the same layout as the network parameters; used
/// for gradients and for Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensors {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl ParamTensors {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    /// Network with the given layer sizes (`dims[0]` inputs, one output).
    /// Weights are uniform in `±sqrt(6 / fan_in)`, biases are zero.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.layers {
            let bound = init_bound(layer.inputs);
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::validation(format!("invalid layer sizes {dims:?}")));
        }
        if dims.last() != Some(&1) {
            return Err(Error::validation("the Q-network has exactly one output"));
        }
        Ok(Self {
            layers: dims.windows(2).map(|d| Dense::zeros(d[0], d[1])).collect(),
        })
    }

    /// `input_dim -> 128 -> 128 -> 1`.
    pub fn q_network(input_dim: usize, seed: u64) -> Result<Self> {
        Self::new(&[input_dim, HIDDEN_UNITS[0], HIDDEN_UNITS[1], 1], seed)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::shape(format!("input of length {}", self.input_dim()), len));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x.len())?;
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            a = layer.apply(&a, i != last);
        }
        Ok(a[0])
    }

    /// Scores `prefix ++ suffix` for every suffix. Equal to calling
    /// [`Mlp::forward`] on each concatenation, bit for bit, but the prefix
    /// contribution to the first layer is computed once.
    pub fn score_candidates(&self, prefix: &[f64], suffixes: &[&[f64]]) -> Result<Vec<f64>> {
        let first = &self.layers[0];
        let mut partial = first.biases.clone();
        first.accumulate(prefix, 0, &mut partial);
        let last = self.layers.len() - 1;
        let mut scores = Vec::with_capacity(suffixes.len());
        for suffix in suffixes {
            self.check_input(prefix.len() + suffix.len())?;
            let mut a = partial.clone();
            first.accumulate(suffix, prefix.len(), &mut a);
            if last > 0 {
                relu_in_place(&mut a);
            }
            for (i, layer) in self.layers.iter().enumerate().skip(1) {
                a = layer.apply(&a, i != last);
            }
            scores.push(a[0]);
        }
        Ok(scores)
    }

    /// Post-activation values of every layer, input first.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.apply(&acts[i], i != last);
            acts.push(next);
        }
        acts
    }

    fn check_batch(&self, batch: &[(Vec<f64>, f64)]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::validation("empty training batch"));
        }
        for (x, target) in batch {
            self.check_input(x.len())?;
            if !target.is_finite() {
                return Err(Error::validation(format!("non-finite target {target}")));
            }
        }
        Ok(())
    }

    /// Mean squared error over the batch.
    pub fn loss(&self, batch: &[(Vec<f64>, f64)]) -> Result<f64> {
        self.check_batch(batch)?;
        let mut total = 0.0;
        for (x, target) in batch {
            let err = self.forward(x)? - target;
            total += err * err;
        }
        Ok(total / batch.len() as f64)
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, batch: &[(Vec<f64>, f64)]) -> Result<(f64, ParamTensors)> {
        self.check_batch(batch)?;
        let n = batch.len() as f64;
        let mut grads = ParamTensors::zeros_like(self);
        let mut loss = 0.0;
        for (x, target) in batch {
            let acts = self.trace(x);
            let err = acts[self.layers.len()][0] - target;
            loss += err * err;
            let mut delta = vec![2.0 * err / n];
            for (l, layer) in self.layers.iter().enumerate().rev() {
                let input = &acts[l];
                for (g, d) in grads.biases[l].iter_mut().zip(&delta) {
                    *g += d;
                }
                let gw = &mut grads.weights[l];
                for (k, &xk) in input.iter().enumerate() {
                    if xk == 0.0 {
                        continue;
                    }
                    let row = &mut gw[k * layer.outputs..(k + 1) * layer.outputs];
                    for (g, d) in row.iter_mut().zip(&delta) {
                        *g += xk * d;
                    }
                }
                if l == 0 {
                    break;
                }
                // input of layer l is the rectified output of layer l-1
                delta = (0..layer.inputs)
                    .map(|k| {
                        if input[k] <= 0.0 {
                            return 0.0;
                        }
                        let row = &layer.weights[k * layer.outputs..(k + 1) * layer.outputs];
                        row.iter().zip(&delta).map(|(w, d)| w * d).sum()
                    })
                    .collect();
            }
        }
        Ok((loss / n, grads))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

fn init_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}

/// Largest magnitude an initial weight of a layer with `fan_in` inputs can take.
pub fn init_weight_bound(fan_in: usize) -> f64 {
    init_bound(fan_in)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    first_moment: ParamTensors,
    second_moment: ParamTensors,
}

impl Adam {
    pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;

    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            first_moment: ParamTensors::zeros_like(net),
            second_moment: ParamTensors::zeros_like(net),
        }
    }

    /// Number of steps taken.
    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &ParamTensors) {
        self.t += 1;
        let t = self.t as i32;
        let correct1 = 1.0 - self.beta1.powi(t);
        let correct2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        let update = |params: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..params.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / correct1;
                let v_hat = v[i] / correct2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        for (l, layer) in net.layers.iter_mut().enumerate() {
            update(
                &mut layer.weights,
                &grads.weights[l],
                &mut self.first_moment.weights[l],
                &mut self.second_moment.weights[l],
            );
            update(
                &mut layer.biases,
                &grads.biases[l],
                &mut self.first_moment.biases[l],
                &mut self.second_moment.biases[l],
            );
        }
    }
}

/// One Adam step on the batch MSE. Returns the loss before the step.
pub fn train_batch(net: &mut Mlp, adam: &mut Adam, batch: &[(Vec<f64>, f64)]) -> Result<f64> {
    let (loss, grads) = net.loss_and_gradient(batch)?;
    adam.step(net, &grads);
    Ok(loss)
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Network plus optimizer state, stored as JSON with shortest round-trip
/// float formatting so a reload is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub version: u32,
    pub dims: Vec<usize>,
    pub net: Mlp,
    pub adam: Adam,
}

impl NetworkCheckpoint {
    pub fn new(net: &Mlp, adam: &Adam) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            dims: net.dims(),
            net: net.clone(),
            adam: adam.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let checkpoint: Self = read_json(path)?;
        checkpoint.check()?;
        Ok(checkpoint)
    }

    fn check(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: self.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if self.dims != self.net.dims() {
            return Err(Error::shape(
                format!("{:?}", self.dims),
                format!("{:?}", self.net.dims()),
            ));
        }
        Ok(())
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_chain() -> Mlp {
        let mut net = Mlp::zeros(&[1, 1, 1, 1]).unwrap();
        for layer in net.layers_mut() {
            layer.weights_mut().fill(1.0);
        }
        net
    }

    #[test]
    fn single_path_forward() {
        assert_eq!(ones_chain().forward(&[2.0]).unwrap(), 2.0);
    }

    #[test]
    fn rectifier_clamps_negative_preactivation() {
        assert_eq!(ones_chain().forward(&[-3.0]).unwrap(), 0.0);
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut net = Mlp::zeros(&[3, 4, 1]).unwrap();
        net.layers_mut()[1].biases_mut()[0] = 0.25;
        assert_eq!(net.forward(&[5.0, -1.0, 2.0]).unwrap(), 0.25);
        assert_eq!(net.forward(&[0.0, 0.0, 0.0]).unwrap(), 0.25);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Mlp::q_network(20, 7).unwrap();
        let b = Mlp::q_network(20, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Mlp::q_network(20, 8).unwrap());
        for layer in a.layers() {
            assert!(layer.biases().iter().all(|&b| b == 0.0));
            let bound = init_weight_bound(layer.inputs());
            assert!(layer.weights().iter().all(|w| w.abs() <= bound));
        }
        assert_eq!(a.dims(), vec![20, 128, 128, 1]);
    }

    #[test]
    fn rejects_bad_shapes() {
        let net = Mlp::q_network(4, 0).unwrap();
        assert!(matches!(net.forward(&[1.0; 3]), Err(Error::Shape { .. })));
        assert!(Mlp::zeros(&[4, 2]).is_err());
        assert!(Mlp::zeros(&[4]).is_err());
        let mut adam = Adam::new(&net, 1e-3);
        let mut net2 = net.clone();
        assert!(train_batch(&mut net2, &mut adam, &[]).is_err());
        assert!(train_batch(&mut net2, &mut adam, &[(vec![0.0; 4], f64::NAN)]).is_err());
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn split_scoring_matches_forward() {
        let net = Mlp::new(&[6, 5, 4, 1], 3).unwrap();
        let prefix = [0.2, 0.0, 1.0];
        let suffixes: [&[f64]; 2] = [&[0.0, 0.5, 0.0], &[1.0, 1.0, 0.25]];
        let scores = net.score_candidates(&prefix, &suffixes).unwrap();
        for (s, suffix) in scores.iter().zip(suffixes) {
            let x: Vec<f64> = prefix.iter().chain(suffix).copied().collect();
            assert_eq!(s.to_bits(), net.forward(&x).unwrap().to_bits());
        }
    }

    #[test]
    fn step_counter_and_descent() {
        let mut net = Mlp::new(&[3, 8, 8, 1], 11).unwrap();
        let mut adam = Adam::new(&net, 1e-3);
        let batch = vec![(vec![0.3, -0.2, 0.9], 1.5)];
        let mut losses = Vec::new();
        for step in 1..=100 {
            losses.push(train_batch(&mut net, &mut adam, &batch).unwrap());
            assert_eq!(adam.step_count(), step);
        }
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut net = Mlp::new(&[5, 7, 1], 5).unwrap();
        let mut adam = Adam::new(&net, 1e-3);
        train_batch(&mut net, &mut adam, &[(vec![0.1, 0.2, 0.3, 0.4, 0.5], 0.7)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        NetworkCheckpoint::new(&net, &adam).save(&path).unwrap();
        let back = NetworkCheckpoint::load(&path).unwrap();
        assert_eq!(back.net, net);
        assert_eq!(back.adam, adam);
        for (a, b) in back.net.layers().iter().zip(net.layers()) {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a.weights()), bits(b.weights()));
        }
    }
}
