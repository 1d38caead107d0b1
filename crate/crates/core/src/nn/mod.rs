//! Self-contained feed-forward networks with softmax heads: forward pass,
//! exact backpropagation of the cross-entropy loss, and an Adam optimizer.
//! Hidden layers use the rectifier activation. Everything is plain `f64`
//! arithmetic in fixed order, so training runs are bit-reproducible for a
//! fixed seed.

pub mod checkpoint;

use rand::Rng;

use crate::error::{Error, Result};

/// Probability floor inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// One dense layer; `weights` is out_dim × in_dim, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Multi-layer perceptron; all layers but the last are followed by the
/// rectifier, the last feeds a softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Per-layer gradients, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| Layer {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in self.layers.iter_mut() {
            for x in l.weights.iter_mut() {
                *x *= factor;
            }
            for x in l.biases.iter_mut() {
                *x *= factor;
            }
        }
    }
}

impl Mlp {
    /// Scaled uniform initialization: weights from [−a, a] with
    /// a = √(6/(fan_in+fan_out)), biases zero. `widths` runs input → output.
    pub fn init<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        Self::build(widths, |fan_in, fan_out, rng_opt| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            rng_opt.map(|r: &mut R| r.gen_range(-a..=a)).unwrap_or(0.0)
        }, Some(rng))
    }

    /// All-zero parameters; the output is then uniform for any input.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        Self::build::<rand_chacha::ChaCha8Rng>(widths, |_, _, _| 0.0, None)
    }

    fn build<R: Rng + ?Sized>(
        widths: &[usize],
        mut weight: impl FnMut(usize, usize, Option<&mut R>) -> f64,
        mut rng: Option<&mut R>,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::ShapeMismatch(
                "network needs at least input and output widths".into(),
            ));
        }
        if widths.contains(&0) {
            return Err(Error::ShapeMismatch("zero-width layer".into()));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            let weights = (0..in_dim * out_dim)
                .map(|_| weight(in_dim, out_dim, rng.as_deref_mut()))
                .collect();
            layers.push(Layer {
                in_dim,
                out_dim,
                weights,
                biases: vec![0.0; out_dim],
            });
        }
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch("network has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer output {} feeds layer input {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        for l in &layers {
            if l.weights.len() != l.in_dim * l.out_dim || l.biases.len() != l.out_dim {
                return Err(Error::ShapeMismatch("layer buffer sizes".into()));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} vs network input {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Softmax output probabilities for one input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(softmax(&self.run_to_logits(input)))
    }

    /// Raw output-layer logits.
    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.run_to_logits(input))
    }

    fn run_to_logits(&self, input: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut act = input.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = layer.biases.clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                *zo += dot(row, &act);
            }
            if idx < last {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            act = z;
        }
        act
    }

    /// Exact gradients of cross_entropy(forward(input), label) with respect
    /// to every weight and bias.
    pub fn backward(&self, input: &[f64], label: usize) -> Result<(f64, Gradients)> {
        self.backward_weighted(input, &[(label, 1.0)])
    }

    /// Gradient of Σ w·cross_entropy(forward(input), label) over several
    /// weighted labels sharing one input — one forward/backward pass total.
    /// Returns the summed loss alongside the gradients.
    pub fn backward_weighted(
        &self,
        input: &[f64],
        targets: &[(usize, f64)],
    ) -> Result<(f64, Gradients)> {
        self.check_input(input)?;
        let classes = self.output_dim();
        for &(label, _) in targets {
            if label >= classes {
                return Err(Error::LabelOutOfRange { label, classes });
            }
        }
        let last = self.layers.len() - 1;

        // Forward, caching post-activation values per layer.
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (idx, layer) in self.layers.iter().enumerate() {
            let prev = &activations[idx];
            let mut z = layer.biases.clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                *zo += dot(row, prev);
            }
            if idx < last {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            activations.push(z);
        }
        let probs = softmax(&activations[last + 1]);

        let total_weight: f64 = targets.iter().map(|&(_, w)| w).sum();
        let mut loss = 0.0;
        let mut delta: Vec<f64> = probs.iter().map(|&p| p * total_weight).collect();
        for &(label, w) in targets {
            loss += -w * (probs[label] + LOG_FLOOR).ln();
            delta[label] -= w;
        }

        let mut grads = Gradients::zeros_like(self);
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let prev = &activations[idx];
            let g = &mut grads.layers[idx];
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] = d;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (wslot, &a) in row.iter_mut().zip(prev) {
                    *wslot = d * a;
                }
            }
            if idx > 0 {
                let mut next = vec![0.0; layer.in_dim];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (slot, &w) in next.iter_mut().zip(row) {
                        *slot += d * w;
                    }
                }
                // Rectifier derivative: active where the cached output is
                // positive.
                for (slot, &a) in next.iter_mut().zip(prev) {
                    if a <= 0.0 {
                        *slot = 0.0;
                    }
                }
                delta = next;
            }
        }
        Ok((loss, grads))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax (max logit subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Argmax decision with ties broken toward the smallest index.
pub fn decide(probs: &[f64]) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    Ok(best)
}

/// −log(probs\[label\] + floor); the floor keeps exact zeros finite.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    Ok(-(probs[label] + LOG_FLOOR).ln())
}

/// One-hot pair encoding of a joint outcome (s1, s2): width 2d.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedOutcome {
    pub d: usize,
    pub s1: usize,
    pub s2: usize,
}

impl EncodedOutcome {
    pub fn new(d: usize, s1: usize, s2: usize) -> Result<Self> {
        if s1 >= d || s2 >= d {
            return Err(Error::InvalidConfig(format!(
                "outcome ({s1},{s2}) outside dimension {d}"
            )));
        }
        Ok(Self { d, s1, s2 })
    }

    pub fn feature_dim(d: usize) -> usize {
        2 * d
    }

    pub fn features(&self) -> Vec<f64> {
        let mut f = vec![0.0; 2 * self.d];
        f[self.s1] = 1.0;
        f[self.d + self.s2] = 1.0;
        f
    }
}

/// Adam optimizer state shaped like one network's parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    first_moment: Vec<Layer>,
    second_moment: Vec<Layer>,
}

impl AdamState {
    pub fn new(mlp: &Mlp, lr: f64) -> Self {
        let zero = Gradients::zeros_like(mlp);
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: zero.layers.clone(),
            second_moment: zero.layers,
        }
    }

    /// Standard bias-corrected Adam update, in place.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != mlp.layers.len() {
            return Err(Error::ShapeMismatch("gradient layer count".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (li, layer) in mlp.layers.iter_mut().enumerate() {
            let g = &grads.layers[li];
            if g.weights.len() != layer.weights.len() || g.biases.len() != layer.biases.len() {
                return Err(Error::ShapeMismatch(format!("gradient shape at layer {li}")));
            }
            let m = &mut self.first_moment[li];
            let v = &mut self.second_moment[li];
            update_slice(
                &mut layer.weights,
                &g.weights,
                &mut m.weights,
                &mut v.weights,
                self.lr,
                self.beta1,
                self.beta2,
                self.epsilon,
                bc1,
                bc2,
            );
            update_slice(
                &mut layer.biases,
                &g.biases,
                &mut m.biases,
                &mut v.biases,
                self.lr,
                self.beta1,
                self.beta2,
                self.epsilon,
                bc1,
                bc2,
            );
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
}
