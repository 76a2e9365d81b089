//! Small dense-network engine: layers, forward pass, reverse-mode gradients,
//! Adam, and JSON checkpoints.
//!
//! Everything is `f64` and single-threaded so that a fixed seed reproduces
//! training bit for bit.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "id")]
    Identity,
    #[serde(rename = "lrelu")]
    LeakyRelu,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
        }
    }

    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::LeakyRelu => {
                if pre > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
        }
    }
}

/// Fully connected layer. Weights are stored row-major, `[out × in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Option<Vec<f64>>,
    activation: Activation,
}

impl DenseLayer {
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        bias: Option<Vec<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        let out_dim = rows.len();
        if out_dim == 0 {
            return Err(Error::config("layer has no output units"));
        }
        let in_dim = rows[0].len();
        if in_dim == 0 {
            return Err(Error::config("layer has no inputs"));
        }
        let mut weights = Vec::with_capacity(out_dim * in_dim);
        for row in rows {
            ensure_len(in_dim, row.len())?;
            weights.extend(row);
        }
        if let Some(b) = &bias {
            ensure_len(out_dim, b.len())?;
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    /// Uniform Glorot initialization; biases start at zero.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        biased: bool,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias: biased.then(|| vec![0.0; out_dim]),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn has_bias(&self) -> bool {
        self.bias.is_some()
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.in_dim..(r + 1) * self.in_dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.in_dim)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    /// New layer keeping only the listed output rows.
    pub fn select_rows(&self, rows: &[usize]) -> DenseLayer {
        let mut weights = Vec::with_capacity(rows.len() * self.in_dim);
        for &r in rows {
            weights.extend_from_slice(self.row(r));
        }
        DenseLayer {
            in_dim: self.in_dim,
            out_dim: rows.len(),
            weights,
            bias: self
                .bias
                .as_ref()
                .map(|b| rows.iter().map(|&r| b[r]).collect()),
            activation: self.activation,
        }
    }

    /// Affine part only: `W x + b`.
    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (r, row) in self.weights.chunks_exact(self.in_dim).enumerate() {
            let mut s = dot(row, x);
            if let Some(b) = &self.bias {
                s += b[r];
            }
            out.push(s);
        }
    }

    /// `Wᵀ g`, the gradient with respect to the layer input of a bias-free
    /// identity layer.
    pub fn transpose_mul(&self, g: &[f64], out: &mut [f64]) {
        for (row, &gi) in self.weights.chunks_exact(self.in_dim).zip(g) {
            axpy(gi, row, out);
        }
    }

    fn params_mut(&mut self) -> (&mut [f64], Option<&mut [f64]>) {
        (&mut self.weights, self.bias.as_deref_mut())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Mean squared error over components.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    ensure_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::Shape {
            expected: 1,
            got: 0,
        });
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / a.len() as f64)
}

/// Gradient of `scale · mse(pred, target)` with respect to `pred`, added
/// into `out`.
pub(crate) fn mse_grad_into(pred: &[f64], target: &[f64], scale: f64, out: &mut [f64]) {
    let k = 2.0 * scale / pred.len() as f64;
    for ((o, p), t) in out.iter_mut().zip(pred).zip(target) {
        *o += k * (p - t);
    }
}

/// Stack of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Intermediate values of one recorded forward pass.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn clear(&mut self) {
        self.inputs.clear();
        self.pre.clear();
        self.masks.clear();
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network has no layers"));
        }
        for pair in layers.windows(2) {
            ensure_len(pair[0].out_dim, pair[1].in_dim)?;
        }
        Ok(Mlp { layers })
    }

    /// `dims = [in, h1, ..., out]`; hidden layers use `hidden`, the last
    /// layer uses `output`.
    pub fn glorot<R: Rng + ?Sized>(
        dims: &[usize],
        biased: bool,
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {dims:?}")));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                DenseLayer::glorot(dims[i], dims[i + 1], biased, act, rng)
            })
            .collect();
        Mlp::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.in_dim(), input.len())?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.affine(&cur, &mut next);
            for v in next.iter_mut() {
                *v = layer.activation.apply(*v);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass that records what [`Mlp::backward`] needs.
    pub fn forward_recorded(&self, input: &[f64], tape: &mut Tape) -> Result<Vec<f64>> {
        self.forward_impl(input, tape, None)
    }

    /// Training forward pass with inverted dropout on hidden-layer outputs.
    pub fn forward_train<R: RngCore>(
        &self,
        input: &[f64],
        dropout: f64,
        rng: &mut R,
        tape: &mut Tape,
    ) -> Result<Vec<f64>> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::config(format!("dropout rate {dropout} not in [0, 1)")));
        }
        if dropout > 0.0 {
            self.forward_impl(input, tape, Some((rng, dropout)))
        } else {
            self.forward_impl(input, tape, None)
        }
    }

    fn forward_impl(
        &self,
        input: &[f64],
        tape: &mut Tape,
        mut dropout: Option<(&mut dyn RngCore, f64)>,
    ) -> Result<Vec<f64>> {
        ensure_len(self.in_dim(), input.len())?;
        tape.clear();
        let last = self.layers.len() - 1;
        let mut cur = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut pre = Vec::with_capacity(layer.out_dim);
            layer.affine(&cur, &mut pre);
            let mut out: Vec<f64> = pre.iter().map(|&v| layer.activation.apply(v)).collect();
            let mask = match (&mut dropout, l < last) {
                (Some((rng, p)), true) => {
                    let keep = 1.0 / (1.0 - *p);
                    let mask: Vec<f64> = (0..out.len())
                        .map(|_| if rng.gen::<f64>() < *p { 0.0 } else { keep })
                        .collect();
                    for (o, m) in out.iter_mut().zip(&mask) {
                        *o *= m;
                    }
                    Some(mask)
                }
                _ => None,
            };
            tape.inputs.push(std::mem::replace(&mut cur, out));
            tape.pre.push(pre);
            tape.masks.push(mask);
        }
        Ok(cur)
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrads {
                    w: vec![0.0; l.weights.len()],
                    b: l.bias.as_ref().map(|b| vec![0.0; b.len()]),
                })
                .collect(),
        }
    }

    /// Reverse pass for the forward pass recorded in `tape`.
    ///
    /// `upstream` is dL/d(output). Parameter gradients are accumulated into
    /// `grads`; the gradient with respect to the network input is returned.
    pub fn backward(&self, tape: &Tape, upstream: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        if tape.is_empty() {
            return Err(Error::State("backward called before a recorded forward pass".into()));
        }
        if tape.inputs.len() != self.layers.len()
            || tape.inputs[0].len() != self.in_dim()
            || grads.layers.len() != self.layers.len()
        {
            return Err(Error::State("tape or gradients do not belong to this network".into()));
        }
        ensure_len(self.out_dim(), upstream.len())?;
        let mut delta = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            if let Some(mask) = &tape.masks[l] {
                for (d, m) in delta.iter_mut().zip(mask) {
                    *d *= m;
                }
            }
            for (d, &p) in delta.iter_mut().zip(&tape.pre[l]) {
                *d *= layer.activation.derivative(p);
            }
            let input = &tape.inputs[l];
            let g = &mut grads.layers[l];
            for (r, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, input, &mut g.w[r * layer.in_dim..(r + 1) * layer.in_dim]);
                }
            }
            if let Some(gb) = &mut g.b {
                for (b, &d) in gb.iter_mut().zip(&delta) {
                    *b += d;
                }
            }
            let mut down = vec![0.0; layer.in_dim];
            layer.transpose_mul(&delta, &mut down);
            delta = down;
        }
        Ok(delta)
    }

    fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub w: Vec<f64>,
    pub b: Option<Vec<f64>>,
}

/// Per-parameter gradients, shaped like the network they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|v| *v *= k);
            if let Some(b) = &mut l.b {
                b.iter_mut().for_each(|v| *v *= k);
            }
        }
    }

    pub fn fill_zero(&mut self) {
        self.scale(0.0);
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter().flatten()).copied())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Adam moments for one network.
#[derive(Clone, Debug)]
pub struct AdamState {
    step_count: u64,
    first: Gradients,
    second: Gradients,
    hyper: AdamConfig,
}

impl AdamState {
    pub fn new(net: &Mlp, hyper: AdamConfig) -> Self {
        AdamState {
            step_count: 0,
            first: net.zero_grads(),
            second: net.zero_grads(),
            hyper,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One Adam update with bias correction.
///
/// Gradients are checked for finiteness before anything is modified.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.layers.len() != net.layers.len() || state.first.layers.len() != net.layers.len() {
        return Err(Error::Shape {
            expected: net.layers.len(),
            got: grads.layers.len(),
        });
    }
    for (l, (layer, g)) in net.layers.iter().zip(&grads.layers).enumerate() {
        ensure_len(layer.weights.len(), g.w.len())?;
        ensure_len(layer.bias.as_ref().map_or(0, Vec::len), g.b.as_ref().map_or(0, Vec::len))?;
        if !g.w.iter().chain(g.b.iter().flatten()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of layer {l}")));
        }
    }
    state.step_count += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.hyper;
    let t = state.step_count as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    };
    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers[l];
        let m = &mut state.first.layers[l];
        let v = &mut state.second.layers[l];
        let (w, b) = layer.params_mut();
        update(w, &g.w, &mut m.w, &mut v.w);
        if let (Some(b), Some(gb), Some(mb), Some(vb)) = (b, &g.b, &mut m.b, &mut v.b) {
            update(b, gb, mb, vb);
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Encoder,
    Head,
    Base,
    Baseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub w: Vec<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub act: Activation,
}

/// Serialized network: `{"version": 1, "role": ..., "format": ..., "dim": ..., "layers": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub role: Role,
    pub format: Option<String>,
    pub dim: usize,
    pub layers: Vec<LayerRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn new(role: Role, format: Option<String>, dim: usize, net: &Mlp) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| LayerRecord {
                w: l.rows().map(<[f64]>::to_vec).collect(),
                b: l.bias.clone(),
                act: l.activation,
            })
            .collect();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            role,
            format,
            dim,
            layers,
            meta: BTreeMap::new(),
        }
    }

    pub fn to_mlp(&self) -> Result<Mlp> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let layers = self
            .layers
            .iter()
            .map(|r| DenseLayer::from_rows(r.w.clone(), r.b.clone(), r.act))
            .collect::<Result<Vec<_>>>()?;
        Mlp::new(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identity_layer_forward() {
        let l = DenseLayer::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]], None, Activation::Identity)
            .unwrap();
        let net = Mlp::new(vec![l]).unwrap();
        assert_eq!(net.forward(&[0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
    }

    #[test]
    fn row_sum_forward() {
        let l = DenseLayer::from_rows(vec![vec![1.0, 1.0]], None, Activation::Identity).unwrap();
        let net = Mlp::new(vec![l]).unwrap();
        assert_eq!(net.forward(&[0.5, 0.25]).unwrap(), vec![0.75]);
    }

    #[test]
    fn bias_free_net_maps_zero_to_zero() {
        let net = Mlp::glorot(&[4, 8, 8, 3], false, Activation::LeakyRelu, Activation::Identity, &mut rng(1))
            .unwrap();
        assert_eq!(net.forward(&[0.0; 4]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let net = Mlp::glorot(&[3, 2], true, Activation::LeakyRelu, Activation::Identity, &mut rng(1)).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::Shape { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn mismatched_layers_rejected() {
        let a = DenseLayer::glorot(3, 4, true, Activation::LeakyRelu, &mut rng(0));
        let b = DenseLayer::glorot(5, 2, true, Activation::Identity, &mut rng(0));
        assert!(Mlp::new(vec![a, b]).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[0.2, 0.4], &[0.2, 0.4]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn scalar_linear_gradient() {
        let l = DenseLayer::from_rows(vec![vec![0.7]], None, Activation::Identity).unwrap();
        let net = Mlp::new(vec![l]).unwrap();
        let mut tape = Tape::new();
        net.forward_recorded(&[3.0], &mut tape).unwrap();
        let mut g = net.zero_grads();
        let dx = net.backward(&tape, &[1.0], &mut g).unwrap();
        assert_eq!(g.layers[0].w, vec![3.0]);
        assert_eq!(dx, vec![0.7]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::glorot(&[3, 5, 2], true, Activation::LeakyRelu, Activation::Identity, &mut rng(3)).unwrap();
        let mut tape = Tape::new();
        net.forward_recorded(&[0.1, -0.4, 0.9], &mut tape).unwrap();
        let mut g = net.zero_grads();
        net.backward(&tape, &[0.0, 0.0], &mut g).unwrap();
        assert!(g.iter().all(|v| v == 0.0));
    }

    #[test]
    fn backward_before_forward_is_state_error() {
        let net = Mlp::glorot(&[2, 2], true, Activation::Identity, Activation::Identity, &mut rng(3)).unwrap();
        let mut g = net.zero_grads();
        assert!(matches!(
            net.backward(&Tape::new(), &[1.0, 1.0], &mut g),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters() {
        let mut net = Mlp::glorot(&[3, 4, 2], true, Activation::LeakyRelu, Activation::Identity, &mut rng(5)).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(&net, AdamConfig::default());
        let g = net.zero_grads();
        adam_step(&mut net, &g, &mut state).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let l = DenseLayer::from_rows(vec![vec![1.0]], None, Activation::Identity).unwrap();
        let mut net = Mlp::new(vec![l]).unwrap();
        let mut state = AdamState::new(&net, AdamConfig::with_lr(1e-3));
        let mut g = net.zero_grads();
        g.layers[0].w[0] = 0.5;
        adam_step(&mut net, &g, &mut state).unwrap();
        let delta = net.layers()[0].weights()[0] - 1.0;
        // m̂ = 0.5, v̂ = 0.25 after bias correction.
        let expected = -1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((delta - expected).abs() < 1e-15, "{delta}");
        assert!((delta - -9.99998e-4).abs() < 1e-8);
    }

    #[test]
    fn adam_matches_scripted_update_and_damps_on_reversal() {
        // Written-out Adam recursion, independent of adam_step.
        let grads = [0.5, 0.5, -0.5, -0.5, -0.5];
        let (b1, b2, lr, eps) = (0.9f64, 0.999f64, 1e-3, 1e-8);
        let (mut m, mut v, mut p) = (0.0f64, 0.0f64, 1.0f64);
        let mut expected = Vec::new();
        for (t, g) in grads.iter().enumerate() {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let step = lr * (m / (1.0 - b1.powi(t as i32 + 1))) / ((v / (1.0 - b2.powi(t as i32 + 1))).sqrt() + eps);
            p -= step;
            expected.push(p);
        }

        let l = DenseLayer::from_rows(vec![vec![1.0]], None, Activation::Identity).unwrap();
        let mut net = Mlp::new(vec![l]).unwrap();
        let mut state = AdamState::new(&net, AdamConfig::with_lr(lr));
        let mut deltas = Vec::new();
        let mut prev = 1.0;
        for (g, want) in grads.iter().zip(&expected) {
            let mut gr = net.zero_grads();
            gr.layers[0].w[0] = *g;
            adam_step(&mut net, &gr, &mut state).unwrap();
            let now = net.layers()[0].weights()[0];
            assert!((now - want).abs() < 1e-15);
            deltas.push(now - prev);
            prev = now;
        }
        // Constant direction: full-size steps. After the gradient flips,
        // momentum keeps pushing the old way with shrinking magnitude until
        // the direction turns, then steps grow again.
        assert!((deltas[0].abs() - deltas[1].abs()).abs() < 1e-9);
        assert!(deltas[2] < 0.0 && deltas[2].abs() < deltas[1].abs());
        assert!(deltas[3] > 0.0 && deltas[4] > deltas[3]);
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut net = Mlp::glorot(&[2, 3, 1], true, Activation::LeakyRelu, Activation::Identity, &mut rng(5)).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(&net, AdamConfig::default());
        let mut g = net.zero_grads();
        g.layers[1].w[0] = f64::NAN;
        let err = adam_step(&mut net, &g, &mut state).unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");
        assert_eq!(net, before);
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = Mlp::glorot(&[3, 4, 2], true, Activation::LeakyRelu, Activation::Identity, &mut rng(9)).unwrap();
        let ck = Checkpoint::new(Role::Encoder, Some("vad".into()), 2, &net);
        let text = serde_json::to_string(&ck).unwrap();
        assert!(text.starts_with(r#"{"version":1,"role":"encoder","format":"vad","dim":2,"layers":[{"w":[["#));
        assert!(text.contains(r#""act":"lrelu""#));
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_mlp().unwrap(), net);
    }

    #[test]
    fn dropout_masks_are_recorded_and_inverted() {
        let net = Mlp::glorot(&[4, 64, 2], true, Activation::LeakyRelu, Activation::Identity, &mut rng(2)).unwrap();
        let mut tape = Tape::new();
        net.forward_train(&[0.5; 4], 0.2, &mut rng(7), &mut tape).unwrap();
        let mask = tape.masks[0].as_ref().unwrap();
        assert!(mask.iter().all(|&m| m == 0.0 || (m - 1.25).abs() < 1e-12));
        assert!(mask.contains(&0.0));
        assert!(tape.masks[1].is_none());
    }
}
