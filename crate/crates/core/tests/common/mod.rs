#![allow(dead_code)]

use emospace::nn::{DenseLayer, Gradients, Mlp};

/// Copy of `net` with one parameter shifted. Parameters of a layer are
/// numbered weights first (row-major), then biases.
pub fn perturbed(net: &Mlp, layer: usize, param: usize, delta: f64) -> Mlp {
    let layers = net
        .layers()
        .iter()
        .enumerate()
        .map(|(l, d)| {
            let mut rows: Vec<Vec<f64>> = d.rows().map(<[f64]>::to_vec).collect();
            let mut bias = d.bias().map(<[f64]>::to_vec);
            if l == layer {
                let n_w = d.in_dim() * d.out_dim();
                if param < n_w {
                    rows[param / d.in_dim()][param % d.in_dim()] += delta;
                } else {
                    bias.as_mut().expect("bias index on a bias-free layer")[param - n_w] += delta;
                }
            }
            DenseLayer::from_rows(rows, bias, d.activation()).unwrap()
        })
        .collect();
    Mlp::new(layers).unwrap()
}

/// `(layer, param, analytic)` for every parameter.
pub fn flatten(grads: &Gradients) -> Vec<(usize, usize, f64)> {
    grads
        .layers
        .iter()
        .enumerate()
        .flat_map(|(l, g)| {
            g.w.iter()
                .chain(g.b.iter().flatten())
                .enumerate()
                .map(move |(p, v)| (l, p, *v))
        })
        .collect()
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Allowed looser error for the few parameters sitting near a rectifier
/// kink.
pub const FD_KINK_TOL: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

#[derive(Debug, Default)]
pub struct FdSummary {
    pub checked: usize,
    pub within_tol: usize,
    pub worst: f64,
}

impl FdSummary {
    pub fn add(&mut self, analytic: f64, numeric: f64) {
        let e = relative_error(analytic, numeric);
        self.checked += 1;
        if e <= FD_REL_TOL {
            self.within_tol += 1;
        }
        self.worst = self.worst.max(e);
    }

    /// At least 99% within the tight tolerance, the rest within the loose one.
    pub fn passes(&self) -> bool {
        self.checked > 0 && self.within_tol as f64 >= 0.99 * self.checked as f64 && self.worst <= FD_KINK_TOL
    }
}

/// Central difference of `loss` around one parameter of `net`.
pub fn central_difference(net: &Mlp, layer: usize, param: usize, loss: impl Fn(&Mlp) -> f64) -> f64 {
    let plus = loss(&perturbed(net, layer, param, FD_STEP));
    let minus = loss(&perturbed(net, layer, param, -FD_STEP));
    (plus - minus) / (2.0 * FD_STEP)
}

pub mod checks {
    use std::sync::Arc;

    use emospace::basemodel::{pph_loss_gradients, BaseModel, BaselineModel};
    use emospace::label::{LabelFormat, LabelVector};
    use emospace::mapping::{total_loss, total_loss_gradients, LabelEncoder, MultiwayMapper, PredictionHead};
    use emospace::nn::{mse, Activation, Mlp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::{central_difference, flatten, FdSummary};

    fn random_label<R: Rng>(format: &Arc<LabelFormat>, rng: &mut R) -> LabelVector {
        let (lo, hi) = format.target().bounds();
        let values = (0..format.len()).map(|_| rng.gen_range(lo..hi)).collect();
        LabelVector::normalized(Arc::clone(format), values).unwrap()
    }

    fn rebuild(mapper: &MultiwayMapper, encoder: Option<(usize, Mlp)>, head: Option<(usize, Mlp)>) -> MultiwayMapper {
        let encoders = mapper
            .encoders()
            .iter()
            .enumerate()
            .map(|(i, e)| match &encoder {
                Some((j, net)) if *j == i => LabelEncoder::new(Arc::clone(e.format()), net.clone()).unwrap(),
                _ => e.clone(),
            })
            .collect();
        let heads = mapper
            .heads()
            .iter()
            .enumerate()
            .map(|(i, h)| match &head {
                Some((j, net)) if *j == i => PredictionHead::new(Arc::clone(h.format()), net.layers()[0].clone()).unwrap(),
                _ => h.clone(),
            })
            .collect();
        MultiwayMapper::from_parts(encoders, heads).unwrap()
    }

    /// Encoders and heads under L_total for one random VAD/BE5 pair.
    /// Checks every parameter when `sample` is `None`, otherwise that many
    /// random ones per network.
    pub fn mapper_gradients(dim: usize, hidden: usize, sample: Option<usize>, seed: u64) -> (FdSummary, FdSummary) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let formats = [Arc::new(LabelFormat::vad()), Arc::new(LabelFormat::be5())];
        let mapper = MultiwayMapper::random(&formats, dim, hidden, &mut rng).unwrap();
        let y1 = random_label(&formats[0], &mut rng);
        let y2 = random_label(&formats[1], &mut rng);
        let (_, grads) = total_loss_gradients(&mapper, &y1, &y2).unwrap();
        let loss = |m: &MultiwayMapper| total_loss(m, &y1, &y2).unwrap().total;

        let mut enc = FdSummary::default();
        let mut head = FdSummary::default();
        for i in 0..formats.len() {
            let net = mapper.encoders()[i].net().clone();
            for (l, p, a) in pick(flatten(&grads.encoders[i]), sample, &mut rng) {
                let n = central_difference(&net, l, p, |m| loss(&rebuild(&mapper, Some((i, m.clone())), None)));
                enc.add(a, n);
            }
            let hnet = Mlp::new(vec![mapper.heads()[i].layer().clone()]).unwrap();
            for (l, p, a) in pick(flatten(&grads.heads[i]), sample, &mut rng) {
                let n = central_difference(&hnet, l, p, |m| loss(&rebuild(&mapper, None, Some((i, m.clone())))));
                head.add(a, n);
            }
        }
        (enc, head)
    }

    fn pick<R: Rng>(all: Vec<(usize, usize, f64)>, sample: Option<usize>, rng: &mut R) -> Vec<(usize, usize, f64)> {
        match sample {
            Some(k) if k < all.len() => rand::seq::index::sample(rng, all.len(), k)
                .into_iter()
                .map(|i| all[i])
                .collect(),
            _ => all,
        }
    }

    /// Base model under a frozen head: `mse(y, h(f(x)))`.
    pub fn base_gradients(input: usize, hidden: &[usize], dim: usize, sample: Option<usize>, seed: u64) -> FdSummary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let be5 = Arc::new(LabelFormat::be5());
        let base = BaseModel::random(input, hidden, dim, "en", seed).unwrap();
        let head = PredictionHead::random(Arc::clone(&be5), dim, &mut rng);
        let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (_, grads) = pph_loss_gradients(&base, &head, &x, &y).unwrap();
        let net = base.net().clone();
        let mut s = FdSummary::default();
        for (l, p, a) in pick(flatten(&grads), sample, &mut rng) {
            let n = central_difference(&net, l, p, |m| mse(&head.apply_raw(&m.forward(&x).unwrap()).unwrap(), &y).unwrap());
            s.add(a, n);
        }
        s
    }

    /// Head-free baseline: `mse(y, f(x))`.
    pub fn baseline_gradients(input: usize, hidden: &[usize], seed: u64) -> FdSummary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = BaselineModel::random(input, hidden, Arc::new(LabelFormat::vad()), seed).unwrap();
        let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let net = model.net().clone();
        let mut tape = emospace::nn::Tape::new();
        let out = net.forward_recorded(&x, &mut tape).unwrap();
        let d_out: Vec<f64> = out.iter().zip(&y).map(|(o, t)| 2.0 * (o - t) / y.len() as f64).collect();
        let mut grads = net.zero_grads();
        net.backward(&tape, &d_out, &mut grads).unwrap();
        let mut s = FdSummary::default();
        for (l, p, a) in flatten(&grads) {
            s.add(a, central_difference(&net, l, p, |m| mse(&m.forward(&x).unwrap(), &y).unwrap()));
        }
        assert_eq!(net.layers().last().unwrap().activation(), Activation::Identity);
        s
    }
}

/// Textbook two-pass Pearson r; `None` when either side has no spread.
pub fn oracle_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Per-column r between two row-major tables.
pub fn column_r(pred: &[Vec<f64>], gold: &[Vec<f64>]) -> Vec<Option<f64>> {
    let cols = gold[0].len();
    (0..cols)
        .map(|c| {
            let p: Vec<f64> = pred.iter().map(|r| r[c]).collect();
            let g: Vec<f64> = gold.iter().map(|r| r[c]).collect();
            oracle_pearson(&p, &g)
        })
        .collect()
}

/// SHA-256 over the little-endian bytes of every head weight.
pub fn head_digest(mapper: &emospace::mapping::MultiwayMapper) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for head in mapper.heads() {
        h.update(head.format().name().as_bytes());
        for w in head.layer().weights() {
            h.update(w.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}
