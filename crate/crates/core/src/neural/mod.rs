//! Dense ReLU network with analytic gradients.
//!
//! Default shape is 240 -> 64 -> 64 -> 61: two rectified-linear hidden layers
//! and a linear head that emits one value per action. All arithmetic is f64.
//!
//! Parameter layout, used for flat indexing and for checkpoints: for each
//! layer in order, the weight matrix stored input-major
//! (`weights[i * outputs + j]` connects input `i` to output `j`), then the
//! bias vector.

mod adam;
mod checkpoint;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, FORMAT_VERSION};

use rand::Rng;

use crate::encoding::{ActionId, EncodedState};
use crate::error::NetworkError;
use crate::rng::rng_from_seed;

/// 240 inputs, two hidden layers of 64, 61 outputs.
pub const DEFAULT_LAYERS: [usize; 4] = [240, 64, 64, 61];

/// Weights and biases of one fully connected layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Dense {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn param_mut(&mut self, idx: usize) -> &mut f64 {
        if idx < self.weights.len() {
            &mut self.weights[idx]
        } else {
            &mut self.biases[idx - self.weights.len()]
        }
    }
}

/// The network parameters. Also used as the gradient container, since a
/// gradient has exactly the parameters' shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Dense>,
}

pub type Gradients = Network;

/// Half-width of the uniform initialization range for a layer with `fan_in`
/// inputs: `1 / sqrt(fan_in)`.
pub fn init_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

/// Binary network inputs, dense or sparse.
pub trait Input {
    fn dense(&self) -> Vec<f64>;
}

impl Input for EncodedState {
    fn dense(&self) -> Vec<f64> {
        self.to_input().to_vec()
    }
}

impl Input for Vec<f64> {
    fn dense(&self) -> Vec<f64> {
        self.clone()
    }
}

impl Input for [f64] {
    fn dense(&self) -> Vec<f64> {
        self.to_vec()
    }
}

impl Network {
    /// All-zero parameters.
    pub fn zeros(sizes: &[usize]) -> Network {
        assert!(sizes.len() >= 2, "need at least an input and an output size");
        Network {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init(sizes: &[usize], seed: u64) -> Network {
        let mut net = Network::zeros(sizes);
        let mut rng = rng_from_seed(seed);
        for layer in &mut net.layers {
            let bound = init_bound(layer.inputs);
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    /// Parameter `idx` in the documented flat order.
    pub fn param(&self, idx: usize) -> f64 {
        let mut idx = idx;
        for layer in &self.layers {
            if idx < layer.num_params() {
                return if idx < layer.weights.len() {
                    layer.weights[idx]
                } else {
                    layer.biases[idx - layer.weights.len()]
                };
            }
            idx -= layer.num_params();
        }
        panic!("parameter index out of range");
    }

    pub fn param_mut(&mut self, idx: usize) -> &mut f64 {
        let mut idx = idx;
        for layer in &mut self.layers {
            if idx < layer.num_params() {
                return layer.param_mut(idx);
            }
            idx -= layer.num_params();
        }
        panic!("parameter index out of range");
    }

    /// Iterates parameters in flat order.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(f64::is_finite)
    }

    pub fn same_shape(&self, other: &Network) -> bool {
        self.layer_sizes() == other.layer_sizes()
    }

    /// Forward pass for one input, returning every layer's activation
    /// (index 0 is the input itself; the last entry is the linear output).
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let prev = &acts[k];
            let mut z = layer.biases.clone();
            for (i, &x) in prev.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                for (zj, &w) in z.iter_mut().zip(row) {
                    *zj += x * w;
                }
            }
            if k + 1 < self.layers.len() {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            acts.push(z);
        }
        acts
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NetworkError> {
        if input.len() != self.input_dim() {
            return Err(NetworkError::Shape(format!(
                "input length {} != {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Output values for one dense input.
    pub fn forward_one(&self, input: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_input(input)?;
        Ok(self.activations(input).pop().expect("output layer"))
    }

    /// Output values for an encoded observation.
    pub fn predict(&self, state: &EncodedState) -> Vec<f64> {
        assert_eq!(
            self.input_dim(),
            crate::encoding::STATE_SIZE,
            "network expects encoded states"
        );
        self.activations(&state.to_input()).pop().expect("output layer")
    }

    /// Batched forward: one output row per input.
    pub fn forward<I: Input>(&self, inputs: &[I]) -> Result<Vec<Vec<f64>>, NetworkError> {
        inputs.iter().map(|x| self.forward_one(&x.dense())).collect()
    }

    /// Backpropagates per-sample output gradients `d_outputs[b]` (dL/d output)
    /// and returns the summed parameter gradients.
    pub fn backward(&self, inputs: &[Vec<f64>], d_outputs: &[Vec<f64>]) -> Result<Gradients, NetworkError> {
        if inputs.len() != d_outputs.len() {
            return Err(NetworkError::Shape(format!(
                "{} inputs but {} output gradients",
                inputs.len(),
                d_outputs.len()
            )));
        }
        let mut grads = Network::zeros(&self.layer_sizes());
        for (input, d_out) in inputs.iter().zip(d_outputs) {
            self.check_input(input)?;
            if d_out.len() != self.output_dim() {
                return Err(NetworkError::Shape("output gradient length".into()));
            }
            let acts = self.activations(input);
            self.accumulate(&acts, d_out.clone(), &mut grads);
        }
        Ok(grads)
    }

    fn accumulate(&self, acts: &[Vec<f64>], mut delta: Vec<f64>, grads: &mut Gradients) {
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let g = &mut grads.layers[k];
            let prev = &acts[k];
            for (gb, d) in g.biases.iter_mut().zip(&delta) {
                *gb += d;
            }
            for (i, &x) in prev.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let grow = &mut g.weights[i * layer.outputs..(i + 1) * layer.outputs];
                for (gw, d) in grow.iter_mut().zip(&delta) {
                    *gw += x * d;
                }
            }
            if k == 0 {
                break;
            }
            // Propagate into the previous (ReLU) layer.
            let mut next = vec![0.0; layer.inputs];
            for (i, n) in next.iter_mut().enumerate() {
                if prev[i] <= 0.0 {
                    continue;
                }
                let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                *n = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
            }
            delta = next;
        }
    }

    fn check_batch(&self, states: usize, actions: usize, targets: Option<usize>) -> Result<(), NetworkError> {
        if states == 0 {
            return Err(NetworkError::Shape("empty batch".into()));
        }
        if states != actions || targets.is_some_and(|t| t != states) {
            return Err(NetworkError::Shape(format!(
                "batch sizes differ: {states} states, {actions} actions, {targets:?} targets"
            )));
        }
        Ok(())
    }

    /// Mean squared error `mean_b (target_b - Q(s_b, a_b))^2` and its gradient.
    pub fn grad_mse<I: Input>(
        &self,
        states: &[I],
        actions: &[ActionId],
        targets: &[f64],
    ) -> Result<(f64, Gradients), NetworkError> {
        self.check_batch(states.len(), actions.len(), Some(targets.len()))?;
        let n = states.len() as f64;
        let mut grads = Network::zeros(&self.layer_sizes());
        let mut loss = 0.0;
        for ((s, a), t) in states.iter().zip(actions).zip(targets) {
            let input = s.dense();
            self.check_input(&input)?;
            let acts = self.activations(&input);
            let q = acts.last().expect("output")[a.index()];
            let err = t - q;
            loss += err * err;
            let mut d = vec![0.0; self.output_dim()];
            d[a.index()] = -2.0 * err / n;
            self.accumulate(&acts, d, &mut grads);
        }
        Ok((loss / n, grads))
    }

    /// Mean negative log-likelihood of `actions` under the softmax of the
    /// outputs, and its gradient.
    pub fn grad_nll<I: Input>(&self, states: &[I], actions: &[ActionId]) -> Result<(f64, Gradients), NetworkError> {
        self.check_batch(states.len(), actions.len(), None)?;
        let n = states.len() as f64;
        let mut grads = Network::zeros(&self.layer_sizes());
        let mut loss = 0.0;
        for (s, a) in states.iter().zip(actions) {
            let input = s.dense();
            self.check_input(&input)?;
            let acts = self.activations(&input);
            let probs = softmax(acts.last().expect("output"));
            loss -= probs[a.index()].ln();
            let mut d: Vec<f64> = probs.iter().map(|p| p / n).collect();
            d[a.index()] -= 1.0 / n;
            self.accumulate(&acts, d, &mut grads);
        }
        Ok((loss / n, grads))
    }

    /// In-place `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Network, scale: f64) {
        for (p, g) in self.params_mut().zip(other.params()) {
            *p += scale * g;
        }
    }
}

/// Copy of the estimator's parameters for use as the target network.
pub fn sync_target(estimator: &Network) -> Network {
    estimator.clone()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
