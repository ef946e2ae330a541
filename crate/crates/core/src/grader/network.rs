//! Fully connected ReLU trunk with two softmax heads, plus exact backprop.

use rand::{Rng, RngCore};

use super::{GradePair, DME_GRADES, DR_GRADES};

/// Probabilities below this are clamped before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Affine map `y = W x + b` with `W` stored row-major, one row per output.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    /// Weights uniform in `±sqrt(6 / inputs)`, zero bias.
    pub fn init_uniform(inputs: usize, outputs: usize, rng: &mut dyn RngCore) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.random_range(-limit..=limit)).collect();
        Self { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    /// Builds a layer from weight rows (one per output) and a bias.
    pub fn from_rows(rows: &[Vec<f64>], bias: Vec<f64>) -> Result<Self, String> {
        let outputs = rows.len();
        let inputs = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != inputs) {
            return Err(format!("weight row {r} has {} entries, row 0 has {inputs}", rows[r].len()));
        }
        if bias.len() != outputs {
            return Err(format!("bias has {} entries for {outputs} outputs", bias.len()));
        }
        Ok(Self { inputs, outputs, weights: rows.concat(), bias })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weight(&self, output: usize, input: usize) -> f64 {
        self.weights[output * self.inputs + input]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks(self.inputs.max(1)).take(self.outputs)
    }

    /// Weights then bias.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(&mut self.bias)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.bias
            .iter()
            .zip(self.weights.chunks(self.inputs.max(1)))
            .map(|(b, row)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Accumulates `dW += dy ⊗ x`, `db += dy` and returns `Wᵀ dy`.
    fn backprop(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
        dx
    }
}

/// Trunk layers followed by the DR (5-way) and DME (3-way) heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    trunk: Vec<Dense>,
    dr_head: Dense,
    dme_head: Dense,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input followed by each trunk layer's output after ReLU and dropout.
    activations: Vec<Vec<f64>>,
    /// Trunk pre-activations.
    pre_activations: Vec<Vec<f64>>,
    /// Per-unit dropout multipliers (0 or 1/(1-p)); empty when not dropping.
    dropout: Vec<Vec<f64>>,
    pub dr_logits: Vec<f64>,
    pub dme_logits: Vec<f64>,
    pub dr_probs: Vec<f64>,
    pub dme_probs: Vec<f64>,
}

impl Trace {
    pub fn trunk_output(&self) -> &[f64] {
        self.activations.last().expect("input is always recorded")
    }

    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre_activations
    }
}

impl Network {
    /// `dims` lists the trunk widths, input first. Heads read the last width.
    pub fn init(dims: &[usize], rng: &mut dyn RngCore) -> Self {
        let trunk = dims.windows(2).map(|w| Dense::init_uniform(w[0], w[1], rng)).collect();
        let last = *dims.last().expect("nonempty dims");
        let dr_head = Dense::init_uniform(last, DR_GRADES, rng);
        let dme_head = Dense::init_uniform(last, DME_GRADES, rng);
        Self { trunk, dr_head, dme_head }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let last = *dims.last().expect("nonempty dims");
        Self {
            trunk: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            dr_head: Dense::zeros(last, DR_GRADES),
            dme_head: Dense::zeros(last, DME_GRADES),
        }
    }

    /// Assembles a network, checking that shapes chain.
    pub fn from_layers(trunk: Vec<Dense>, dr_head: Dense, dme_head: Dense) -> Result<Self, String> {
        for (i, pair) in trunk.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(format!(
                    "trunk layer {} has {} outputs but trunk layer {} takes {} inputs",
                    i,
                    pair[0].outputs,
                    i + 1,
                    pair[1].inputs
                ));
            }
        }
        let last = trunk.last().map(|l| l.outputs);
        for (name, head, classes) in [("dr_head", &dr_head, DR_GRADES), ("dme_head", &dme_head, DME_GRADES)] {
            if head.outputs != classes {
                return Err(format!("{name} has {} outputs, expected {classes}", head.outputs));
            }
            if last.is_some_and(|w| w != head.inputs) {
                return Err(format!("{name} takes {} inputs, trunk emits {}", head.inputs, last.unwrap()));
            }
        }
        if dr_head.inputs != dme_head.inputs {
            return Err("heads disagree on their input width".into());
        }
        Ok(Self { trunk, dr_head, dme_head })
    }

    /// Trunk widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        match self.trunk.first() {
            Some(first) => std::iter::once(first.inputs).chain(self.trunk.iter().map(|l| l.outputs)).collect(),
            None => vec![self.dr_head.inputs],
        }
    }

    pub fn input_width(&self) -> usize {
        self.dims()[0]
    }

    pub fn trunk(&self) -> &[Dense] {
        &self.trunk
    }

    pub fn dr_head(&self) -> &Dense {
        &self.dr_head
    }

    pub fn dme_head(&self) -> &Dense {
        &self.dme_head
    }

    /// Trunk layers, then the DR head, then the DME head.
    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.trunk.iter().chain([&self.dr_head, &self.dme_head])
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.trunk.iter_mut().chain([&mut self.dr_head, &mut self.dme_head])
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters in [`Network::layers`] order, weights before bias.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers().flat_map(Dense::params).copied().collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.parameter_count());
        for (p, v) in self.layers_mut().flat_map(Dense::params_mut).zip(values) {
            *p = *v;
        }
    }

    /// Forward pass. With `dropout = Some((p, rng))` each trunk unit is
    /// zeroed with probability `p` and survivors are scaled by `1/(1-p)`.
    pub fn forward(&self, input: &[f64], dropout: Option<(f64, &mut dyn RngCore)>) -> Trace {
        assert_eq!(input.len(), self.input_width(), "input width");
        let mut dropout = dropout.filter(|(p, _)| *p > 0.0);
        let mut activations = Vec::with_capacity(self.trunk.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.trunk.len());
        let mut masks = Vec::new();
        activations.push(input.to_vec());
        for layer in &self.trunk {
            let z = layer.apply(activations.last().unwrap());
            let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            if let Some((p, rng)) = dropout.as_mut() {
                let keep_scale = 1.0 / (1.0 - *p);
                let mask: Vec<f64> =
                    (0..a.len()).map(|_| if rng.random::<f64>() < *p { 0.0 } else { keep_scale }).collect();
                a.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                masks.push(mask);
            }
            pre_activations.push(z);
            activations.push(a);
        }
        let top = activations.last().unwrap();
        let dr_logits = self.dr_head.apply(top);
        let dme_logits = self.dme_head.apply(top);
        Trace {
            dr_probs: softmax(&dr_logits),
            dme_probs: softmax(&dme_logits),
            dr_logits,
            dme_logits,
            activations,
            pre_activations,
            dropout: masks,
        }
    }

    /// Backpropagates the loss of `trace` against `label`, adding parameter
    /// gradients into `grad` (same shape as `self`). Returns the loss.
    pub fn backward(&self, trace: &Trace, label: GradePair, grad: &mut Network) -> f64 {
        let dr_delta = softmax_ce_delta(&trace.dr_probs, label.dr() as usize);
        let dme_delta = softmax_ce_delta(&trace.dme_probs, label.dme() as usize);

        let top = trace.trunk_output();
        let mut da = self.dr_head.backprop(top, &dr_delta, &mut grad.dr_head);
        let from_dme = self.dme_head.backprop(top, &dme_delta, &mut grad.dme_head);
        da.iter_mut().zip(from_dme).for_each(|(a, b)| *a += b);

        for l in (0..self.trunk.len()).rev() {
            let mut dz = da;
            if let Some(mask) = trace.dropout.get(l) {
                dz.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
            }
            dz.iter_mut().zip(&trace.pre_activations[l]).for_each(|(d, &z)| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
            da = self.trunk[l].backprop(&trace.activations[l], &dz, &mut grad.trunk[l]);
        }
        loss(&trace.dr_probs, &trace.dme_probs, label)
    }

    /// Loss and full gradient for one sample, without dropout.
    pub fn loss_and_gradient(&self, input: &[f64], label: GradePair) -> (f64, Network) {
        let mut grad = Network::zeros(&self.dims());
        let trace = self.forward(input, None);
        let loss = self.backward(&trace, label, &mut grad);
        (loss, grad)
    }

    pub(crate) fn scale_parameters(&mut self, factor: f64) {
        self.layers_mut().flat_map(Dense::params_mut).for_each(|p| *p *= factor);
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// d(-ln max(p_y, floor)) / d logits.
fn softmax_ce_delta(probs: &[f64], target: usize) -> Vec<f64> {
    if probs[target] < PROB_FLOOR {
        return vec![0.0; probs.len()];
    }
    let mut delta = probs.to_vec();
    delta[target] -= 1.0;
    delta
}

/// Summed cross-entropy of both heads, natural log, probabilities clamped at
/// [`PROB_FLOOR`].
pub fn loss(dr_probs: &[f64], dme_probs: &[f64], label: GradePair) -> f64 {
    -dr_probs[label.dr() as usize].max(PROB_FLOOR).ln() - dme_probs[label.dme() as usize].max(PROB_FLOOR).ln()
}
