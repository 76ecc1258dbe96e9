//! Embedding, LSTM and dense layers with hand-written backward passes.
//!
//! Sequences are time-major matrices: row `t * batch + b` holds step `t` of
//! sample `b`. Layers refer to their tensors by index into a shared parameter
//! list so an optimizer can walk every tensor uniformly.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;

/// Named parameter tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    pub names: Vec<String>,
    pub values: Vec<Array2<f64>>,
}

impl ParamStore {
    /// Adds a `rows × cols` tensor drawn from U(−1/√rows, 1/√rows).
    pub fn uniform(&mut self, name: String, rows: usize, cols: usize, rng: &mut impl Rng) -> usize {
        let s = 1.0 / (rows as f64).sqrt();
        self.push(name, Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-s..s)))
    }

    pub fn push(&mut self, name: String, value: Array2<f64>) -> usize {
        self.names.push(name);
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn zeros_like(&self) -> Vec<Array2<f64>> {
        self.values.iter().map(|v| Array2::zeros(v.raw_dim())).collect()
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Embedding {
    pub w: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, vocab: usize, dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            w: store.uniform(format!("{name}.w"), vocab, dim, rng),
        }
    }

    pub fn forward(&self, p: &[Array2<f64>], ids: &[u32]) -> Array2<f64> {
        p[self.w].select(Axis(0), &ids.iter().map(|&i| i as usize).collect::<Vec<_>>())
    }

    pub fn backward(&self, g: &mut [Array2<f64>], ids: &[u32], dy: ArrayView2<f64>) {
        let gw = &mut g[self.w];
        for (row, &id) in dy.rows().into_iter().zip(ids) {
            let mut target = gw.row_mut(id as usize);
            target += &row;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: usize,
    pub b: usize,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Self {
            w: store.uniform(format!("{name}.w"), input, output, rng),
            b: store.push(format!("{name}.b"), Array2::zeros((1, output))),
        }
    }

    pub fn forward(&self, p: &[Array2<f64>], x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&p[self.w]) + &p[self.b]
    }

    /// Accumulates weight gradients and returns `dx`.
    pub fn backward(&self, p: &[Array2<f64>], g: &mut [Array2<f64>], x: ArrayView2<f64>, dy: ArrayView2<f64>) -> Array2<f64> {
        general_mat_mul(1.0, &x.t(), &dy, 1.0, &mut g[self.w]);
        g[self.b] += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&p[self.w].t())
    }
}

/// LSTM with gate blocks ordered input, forget, cell, output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub wx: usize,
    pub wh: usize,
    pub b: usize,
    pub input: usize,
    pub units: usize,
}

/// Everything the backward pass needs from a forward run.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub batch: usize,
    pub steps: usize,
    /// Inputs, `(steps·batch) × input`.
    pub x: Array2<f64>,
    /// Activated gates, `(steps·batch) × 4·units`.
    pub gates: Array2<f64>,
    /// Cell states, `(steps·batch) × units`.
    pub c: Array2<f64>,
    /// Hidden states, `(steps·batch) × units`.
    pub h: Array2<f64>,
    pub h0: Array2<f64>,
    pub c0: Array2<f64>,
}

impl LstmCache {
    pub fn h_at(&self, t: usize) -> ArrayView2<'_, f64> {
        self.h.slice(s![t * self.batch..(t + 1) * self.batch, ..])
    }

    pub fn c_at(&self, t: usize) -> ArrayView2<'_, f64> {
        self.c.slice(s![t * self.batch..(t + 1) * self.batch, ..])
    }
}

pub struct LstmGrads {
    pub dx: Array2<f64>,
    pub dh0: Array2<f64>,
    pub dc0: Array2<f64>,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, units: usize, rng: &mut impl Rng) -> Self {
        let wx = store.uniform(format!("{name}.wx"), input, 4 * units, rng);
        let wh = store.uniform(format!("{name}.wh"), units, 4 * units, rng);
        let mut bias = Array2::zeros((1, 4 * units));
        bias.slice_mut(s![.., units..2 * units]).fill(1.0);
        let b = store.push(format!("{name}.b"), bias);
        Self {
            wx,
            wh,
            b,
            input,
            units,
        }
    }

    /// Applies activations to the pre-activations `z` in place and advances
    /// `(h, c)`.
    fn cell(&self, mut z: ArrayViewMut2<f64>, h: &mut Array2<f64>, c: &mut Array2<f64>) {
        let n = self.units;
        for ((mut zr, mut hr), mut cr) in z.rows_mut().into_iter().zip(h.rows_mut()).zip(c.rows_mut()) {
            let zr = zr.as_slice_mut().expect("row is contiguous");
            let hr = hr.as_slice_mut().expect("row is contiguous");
            let cr = cr.as_slice_mut().expect("row is contiguous");
            let (zi, rest) = zr.split_at_mut(n);
            let (zf, rest) = rest.split_at_mut(n);
            let (zg, zo) = rest.split_at_mut(n);
            for j in 0..n {
                let i = sigmoid(zi[j]);
                let f = sigmoid(zf[j]);
                let g = zg[j].tanh();
                let o = sigmoid(zo[j]);
                zi[j] = i;
                zf[j] = f;
                zg[j] = g;
                zo[j] = o;
                cr[j] = f * cr[j] + i * g;
                hr[j] = o * cr[j].tanh();
            }
        }
    }

    /// One step for a `batch × input` input.
    pub fn step(&self, p: &[Array2<f64>], x: ArrayView2<f64>, h: &mut Array2<f64>, c: &mut Array2<f64>) {
        let mut z = x.dot(&p[self.wx]) + &p[self.b];
        general_mat_mul(1.0, &*h, &p[self.wh], 1.0, &mut z);
        self.cell(z.view_mut(), h, c);
    }

    pub fn forward(&self, p: &[Array2<f64>], x: Array2<f64>, batch: usize, h0: Array2<f64>, c0: Array2<f64>) -> LstmCache {
        let steps = x.nrows() / batch;
        let mut gates = x.dot(&p[self.wx]) + &p[self.b];
        let mut hs = Array2::zeros((steps * batch, self.units));
        let mut cs = Array2::zeros((steps * batch, self.units));
        let mut h = h0.clone();
        let mut c = c0.clone();
        for t in 0..steps {
            let rows = s![t * batch..(t + 1) * batch, ..];
            let mut z = gates.slice_mut(rows);
            general_mat_mul(1.0, &h, &p[self.wh], 1.0, &mut z);
            self.cell(z, &mut h, &mut c);
            hs.slice_mut(rows).assign(&h);
            cs.slice_mut(rows).assign(&c);
        }
        LstmCache {
            batch,
            steps,
            x,
            gates,
            c: cs,
            h: hs,
            h0,
            c0,
        }
    }

    /// Backpropagation through time. `dh` is the loss gradient on every
    /// hidden output; `dc` optionally adds gradient on cell states.
    pub fn backward(
        &self,
        p: &[Array2<f64>],
        g: &mut [Array2<f64>],
        cache: &LstmCache,
        dh: ArrayView2<f64>,
        dc: Option<ArrayView2<f64>>,
    ) -> LstmGrads {
        let (batch, n) = (cache.batch, self.units);
        let mut dz = Array2::<f64>::zeros(cache.gates.raw_dim());
        let mut dh_next = Array2::<f64>::zeros((batch, n));
        let mut dc_next = Array2::<f64>::zeros((batch, n));
        for t in (0..cache.steps).rev() {
            for b in 0..batch {
                let r = t * batch + b;
                let gate = cache.gates.row(r);
                let gate = gate.as_slice().expect("row is contiguous");
                let c_row = cache.c.row(r);
                let c_row = c_row.as_slice().expect("row is contiguous");
                let c_prev = if t > 0 { cache.c.row(r - batch) } else { cache.c0.row(b) };
                let c_prev = c_prev.as_slice().expect("row is contiguous");
                let dh_row = dh.row(r);
                let dh_row = dh_row.as_slice().expect("row is contiguous");
                let dc_row = dc.as_ref().map(|d| d.row(r));
                let mut dh_n = dh_next.row_mut(b);
                let dh_n = dh_n.as_slice_mut().expect("row is contiguous");
                let mut dc_n = dc_next.row_mut(b);
                let dc_n = dc_n.as_slice_mut().expect("row is contiguous");
                let mut dzr = dz.row_mut(r);
                let dzr = dzr.as_slice_mut().expect("row is contiguous");
                for j in 0..n {
                    let (i, f, gg, o) = (gate[j], gate[n + j], gate[2 * n + j], gate[3 * n + j]);
                    let tc = c_row[j].tanh();
                    let dhv = dh_row[j] + dh_n[j];
                    let mut dcv = dc_n[j] + dhv * o * (1.0 - tc * tc);
                    if let Some(extra) = &dc_row {
                        dcv += extra[j];
                    }
                    dzr[j] = dcv * gg * i * (1.0 - i);
                    dzr[n + j] = dcv * c_prev[j] * f * (1.0 - f);
                    dzr[2 * n + j] = dcv * i * (1.0 - gg * gg);
                    dzr[3 * n + j] = dhv * tc * o * (1.0 - o);
                    dc_n[j] = dcv * f;
                }
            }
            let dz_t = dz.slice(s![t * batch..(t + 1) * batch, ..]);
            general_mat_mul(1.0, &dz_t, &p[self.wh].t(), 0.0, &mut dh_next);
        }
        // previous hidden states for every step: [h0; h_0 .. h_{T-2}]
        let mut h_prev = Array2::zeros(cache.h.raw_dim());
        h_prev.slice_mut(s![..batch, ..]).assign(&cache.h0);
        if cache.steps > 1 {
            h_prev
                .slice_mut(s![batch.., ..])
                .assign(&cache.h.slice(s![..(cache.steps - 1) * batch, ..]));
        }
        general_mat_mul(1.0, &h_prev.t(), &dz, 1.0, &mut g[self.wh]);
        general_mat_mul(1.0, &cache.x.t(), &dz, 1.0, &mut g[self.wx]);
        g[self.b] += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
        LstmGrads {
            dx: dz.dot(&p[self.wx].t()),
            dh0: dh_next,
            dc0: dc_next,
        }
    }
}

/// Weighted mean cross-entropy of softmax(`logits`) against `targets`.
///
/// Returns the loss, the gradient with respect to the logits, and the argmax
/// of every row. Rows with weight 0 contribute nothing.
pub fn softmax_xent(logits: &Array2<f64>, targets: &[u32], weights: &[f64]) -> (f64, Array2<f64>, Vec<u32>) {
    let total: f64 = weights.iter().sum();
    let norm = if total > 0.0 { total } else { 1.0 };
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    let mut argmax = Vec::with_capacity(logits.nrows());
    for (r, (row, mut gr)) in logits.rows().into_iter().zip(grad.rows_mut()).enumerate() {
        let (best, max) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        argmax.push(best as u32);
        let w = weights[r];
        if w == 0.0 {
            continue;
        }
        let mut sum = 0.0;
        for (gv, &v) in gr.iter_mut().zip(row.iter()) {
            *gv = (v - max).exp();
            sum += *gv;
        }
        let target = targets[r] as usize;
        loss += w * (sum.ln() + max - row[target]);
        let scale = w / norm;
        gr *= scale / sum;
        gr[target] -= scale;
    }
    (loss / norm, grad, argmax)
}

/// Row-wise softmax.
pub fn softmax(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}
