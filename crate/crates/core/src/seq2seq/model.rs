//! The three encoder-decoder configurations.
//!
//! * `M1`: two stacked encoder LSTMs; the top layer's final `(h, c)` starts a
//!   decoder LSTM fed the previous target token.
//! * `M2`: two LSTMs over the source, then a 24-wide tanh layer and the
//!   vocabulary softmax at every position.
//! * `M3`: one encoder LSTM whose final hidden state is repeated at every
//!   decoder step alongside the previous target token.
//!
//! `M1` and `M3` train with teacher forcing; the first decoder input is `PAD`.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{softmax_xent, Dense, Embedding, Lstm, LstmCache, ParamStore};
use crate::encode::PAD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    M1,
    M2,
    M3,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "M1" => Ok(Self::M1),
            "M2" => Ok(Self::M2),
            "M3" => Ok(Self::M3),
            other => Err(format!("unknown model {other:?} (M1, M2, M3)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub vocab_size: usize,
    pub seq_len: usize,
    pub emb_dim: usize,
    pub units: usize,
    /// Width of the tanh layer in `M2`; unused otherwise.
    pub dense_dim: usize,
}

impl ModelConfig {
    pub fn new(variant: Variant, vocab_size: usize, seq_len: usize) -> Self {
        let units = if variant == Variant::M2 { 100 } else { 32 };
        Self {
            variant,
            vocab_size,
            seq_len,
            emb_dim: 32,
            units,
            dense_dim: 24,
        }
    }
}

/// A source/target token pair, unpadded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub src: Vec<u32>,
    pub tgt: Vec<u32>,
}

/// Time-major padded batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    pub steps: usize,
    pub src: Vec<u32>,
    pub tgt: Vec<u32>,
    /// Decoder inputs: `PAD` then the target shifted right.
    pub prev: Vec<u32>,
    pub src_len: Vec<usize>,
    /// 1 on target tokens and on the first `PAD` after them.
    pub weights: Vec<f64>,
}

impl Batch {
    /// Pads to the longest source or target (plus its closing `PAD`), at
    /// most `max_steps`.
    pub fn new(examples: &[&Example], max_steps: usize) -> Self {
        let size = examples.len();
        let steps = examples
            .iter()
            .map(|e| e.src.len().max(e.tgt.len() + 1))
            .max()
            .unwrap_or(1)
            .min(max_steps);
        let n = size * steps;
        let (mut src, mut tgt, mut prev, mut weights) = (vec![PAD; n], vec![PAD; n], vec![PAD; n], vec![0.0; n]);
        for (b, e) in examples.iter().enumerate() {
            for t in 0..steps {
                let r = t * size + b;
                src[r] = e.src.get(t).copied().unwrap_or(PAD);
                tgt[r] = e.tgt.get(t).copied().unwrap_or(PAD);
                prev[r] = if t == 0 { PAD } else { e.tgt.get(t - 1).copied().unwrap_or(PAD) };
                weights[r] = if t <= e.tgt.len() { 1.0 } else { 0.0 };
            }
        }
        Self {
            size,
            steps,
            src,
            tgt,
            prev,
            src_len: examples.iter().map(|e| e.src.len().clamp(1, steps)).collect(),
            weights,
        }
    }

    /// Rows of each sample's last source step.
    fn last_rows(&self) -> Vec<usize> {
        self.src_len.iter().enumerate().map(|(b, &l)| (l - 1) * self.size + b).collect()
    }
}

pub struct Output {
    pub loss: f64,
    pub argmax: Vec<u32>,
    pub grads: Option<Vec<Array2<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub cfg: ModelConfig,
    pub params: ParamStore,
    emb: Embedding,
    enc: Vec<Lstm>,
    dec: Option<Lstm>,
    dense: Vec<Dense>,
}

fn zeros(b: usize, n: usize) -> Array2<f64> {
    Array2::zeros((b, n))
}

fn scatter(rows: &[usize], total: usize, values: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((total, values.ncols()));
    for (b, &r) in rows.iter().enumerate() {
        out.row_mut(r).assign(&values.row(b));
    }
    out
}

/// Decoder state for step-by-step inference on one sample.
pub struct DecodeState {
    h: Array2<f64>,
    c: Array2<f64>,
    ctx: Option<Array2<f64>>,
}

impl Model {
    pub fn build(cfg: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::default();
        let (v, d, h) = (cfg.vocab_size, cfg.emb_dim, cfg.units);
        let emb = Embedding::new(&mut store, "embedding", v, d, &mut rng);
        let (enc, dec, dense) = match cfg.variant {
            Variant::M1 => (
                vec![
                    Lstm::new(&mut store, "encoder0", d, h, &mut rng),
                    Lstm::new(&mut store, "encoder1", h, h, &mut rng),
                ],
                Some(Lstm::new(&mut store, "decoder", d, h, &mut rng)),
                vec![Dense::new(&mut store, "output", h, v, &mut rng)],
            ),
            Variant::M2 => (
                vec![
                    Lstm::new(&mut store, "lstm0", d, h, &mut rng),
                    Lstm::new(&mut store, "lstm1", h, h, &mut rng),
                ],
                None,
                vec![
                    Dense::new(&mut store, "frame", h, cfg.dense_dim, &mut rng),
                    Dense::new(&mut store, "output", cfg.dense_dim, v, &mut rng),
                ],
            ),
            Variant::M3 => (
                vec![Lstm::new(&mut store, "encoder", d, h, &mut rng)],
                Some(Lstm::new(&mut store, "decoder", h + d, h, &mut rng)),
                vec![Dense::new(&mut store, "output", h, v, &mut rng)],
            ),
        };
        Self {
            cfg,
            params: store,
            emb,
            enc,
            dec,
            dense,
        }
    }

    /// Rebuilds the layer layout for `cfg` and installs saved tensors.
    pub fn from_parts(cfg: ModelConfig, names: Vec<String>, values: Vec<Array2<f64>>) -> Result<Self, String> {
        let mut m = Self::build(cfg, 0);
        if names != m.params.names {
            return Err("parameter names do not match the configuration".into());
        }
        for (have, want) in values.iter().zip(&m.params.values) {
            if have.dim() != want.dim() {
                return Err(format!("tensor shape {:?} where {:?} expected", have.dim(), want.dim()));
            }
        }
        m.params.values = values;
        Ok(m)
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    /// Teacher-forced loss over `batch`, with gradients when `grad` is set.
    pub fn run(&self, batch: &Batch, grad: bool) -> Output {
        let p = &self.params.values;
        let (bsz, steps, h) = (batch.size, batch.steps, self.cfg.units);
        let mut g = if grad { self.params.zeros_like() } else { Vec::new() };
        let x = self.emb.forward(p, &batch.src);
        let lstm0 = |l: &Lstm, x: Array2<f64>| l.forward(p, x, bsz, zeros(bsz, l.units), zeros(bsz, l.units));
        match self.cfg.variant {
            Variant::M3 => {
                let enc = lstm0(&self.enc[0], x);
                let last = batch.last_rows();
                let ctx = enc.h.select(Axis(0), &last);
                let tiled = concatenate(Axis(0), &vec![ctx.view(); steps]).expect("equal widths");
                let dec_in = concatenate![Axis(1), tiled, self.emb.forward(p, &batch.prev)];
                let dec_l = self.dec.expect("M3 has a decoder");
                let dec = lstm0(&dec_l, dec_in);
                let logits = self.dense[0].forward(p, dec.h.view());
                let (loss, dlogits, argmax) = softmax_xent(&logits, &batch.tgt, &batch.weights);
                if grad {
                    let dh = self.dense[0].backward(p, &mut g, dec.h.view(), dlogits.view());
                    let gd = dec_l.backward(p, &mut g, &dec, dh.view(), None);
                    self.emb.backward(&mut g, &batch.prev, gd.dx.slice(s![.., h..]));
                    let mut dctx = zeros(bsz, h);
                    for t in 0..steps {
                        dctx += &gd.dx.slice(s![t * bsz..(t + 1) * bsz, ..h]);
                    }
                    let dh_enc = scatter(&last, steps * bsz, dctx.view());
                    let ge = self.enc[0].backward(p, &mut g, &enc, dh_enc.view(), None);
                    self.emb.backward(&mut g, &batch.src, ge.dx.view());
                }
                Output {
                    loss,
                    argmax,
                    grads: grad.then_some(g),
                }
            }
            Variant::M1 => {
                let e0 = lstm0(&self.enc[0], x);
                let e1 = lstm0(&self.enc[1], e0.h.clone());
                let last = batch.last_rows();
                let dec_l = self.dec.expect("M1 has a decoder");
                let dec = dec_l.forward(
                    p,
                    self.emb.forward(p, &batch.prev),
                    bsz,
                    e1.h.select(Axis(0), &last),
                    e1.c.select(Axis(0), &last),
                );
                let logits = self.dense[0].forward(p, dec.h.view());
                let (loss, dlogits, argmax) = softmax_xent(&logits, &batch.tgt, &batch.weights);
                if grad {
                    let dh = self.dense[0].backward(p, &mut g, dec.h.view(), dlogits.view());
                    let gd = dec_l.backward(p, &mut g, &dec, dh.view(), None);
                    self.emb.backward(&mut g, &batch.prev, gd.dx.view());
                    let dh1 = scatter(&last, steps * bsz, gd.dh0.view());
                    let dc1 = scatter(&last, steps * bsz, gd.dc0.view());
                    let g1 = self.enc[1].backward(p, &mut g, &e1, dh1.view(), Some(dc1.view()));
                    let g0 = self.enc[0].backward(p, &mut g, &e0, g1.dx.view(), None);
                    self.emb.backward(&mut g, &batch.src, g0.dx.view());
                }
                Output {
                    loss,
                    argmax,
                    grads: grad.then_some(g),
                }
            }
            Variant::M2 => {
                let e0 = lstm0(&self.enc[0], x);
                let e1 = lstm0(&self.enc[1], e0.h.clone());
                let a = self.dense[0].forward(p, e1.h.view()).mapv(f64::tanh);
                let logits = self.dense[1].forward(p, a.view());
                let (loss, dlogits, argmax) = softmax_xent(&logits, &batch.tgt, &batch.weights);
                if grad {
                    let da = self.dense[1].backward(p, &mut g, a.view(), dlogits.view());
                    let dpre = da * a.mapv(|v| 1.0 - v * v);
                    let dh1 = self.dense[0].backward(p, &mut g, e1.h.view(), dpre.view());
                    let g1 = self.enc[1].backward(p, &mut g, &e1, dh1.view(), None);
                    let g0 = self.enc[0].backward(p, &mut g, &e0, g1.dx.view(), None);
                    self.emb.backward(&mut g, &batch.src, g0.dx.view());
                }
                Output {
                    loss,
                    argmax,
                    grads: grad.then_some(g),
                }
            }
        }
    }

    fn encode_one(&self, src: &[u32]) -> Vec<LstmCache> {
        let p = &self.params.values;
        let src = if src.is_empty() { &[PAD][..] } else { src };
        let mut caches = Vec::new();
        let mut x = self.emb.forward(p, src);
        for l in &self.enc {
            let cache = l.forward(p, x, 1, zeros(1, l.units), zeros(1, l.units));
            x = cache.h.clone();
            caches.push(cache);
        }
        caches
    }

    /// Runs the encoder on one source sequence (`M1`, `M3`).
    pub fn start(&self, src: &[u32]) -> DecodeState {
        let caches = self.encode_one(src);
        let top = caches.last().expect("at least one encoder layer");
        let last = top.steps - 1;
        let h = self.cfg.units;
        match self.cfg.variant {
            Variant::M1 => DecodeState {
                h: top.h_at(last).to_owned(),
                c: top.c_at(last).to_owned(),
                ctx: None,
            },
            _ => DecodeState {
                h: zeros(1, h),
                c: zeros(1, h),
                ctx: Some(top.h_at(last).to_owned()),
            },
        }
    }

    /// Logits for the next target token given the previous one.
    pub fn step(&self, state: &mut DecodeState, prev: u32) -> Vec<f64> {
        let p = &self.params.values;
        let e = self.emb.forward(p, &[prev]);
        let x = match &state.ctx {
            Some(ctx) => concatenate![Axis(1), ctx.view(), e],
            None => e,
        };
        let dec = self.dec.expect("step needs a decoder");
        dec.step(p, x.view(), &mut state.h, &mut state.c);
        self.dense[0].forward(p, state.h.view()).into_raw_vec_and_offset().0
    }

    /// Logits at every position of a padded source (`M2`).
    pub fn positional_logits(&self, src: &[u32]) -> Array2<f64> {
        let mut padded = src.to_vec();
        padded.resize(self.cfg.seq_len.max(src.len()), PAD);
        let caches = self.encode_one(&padded);
        let p = &self.params.values;
        let top = caches.last().expect("two layers");
        let a = self.dense[0].forward(p, top.h.view()).mapv(f64::tanh);
        self.dense[1].forward(p, a.view())
    }

    pub fn is_autoregressive(&self) -> bool {
        self.cfg.variant != Variant::M2
    }
}
