//! Stacked LSTM regression network with a linear dense head.
//!
//! All parameters live in one flat vector; per-layer blocks are views into it.
//! Gate columns are stacked in the order [i, f, o, g], so a layer holds
//! `W_x` (in × 4h), `W_h` (h × 4h) and `b` (4h).

use std::path::Path;

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, Zip};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleSet;
use crate::error::{Error, Result};

pub const GATES: [&str; 4] = ["i", "f", "o", "g"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    /// Hidden widths, bottom layer first.
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    /// Window length L in steps.
    pub window_length: usize,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.window_length == 0 {
            return Err(Error::Config("input, output and window sizes must be >= 1".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(format!("invalid hidden widths {:?}", self.hidden)));
        }
        Ok(())
    }

    fn layer_input(&self, k: usize) -> usize {
        if k == 0 {
            self.input_dim
        } else {
            self.hidden[k - 1]
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout().total
    }

    fn layout(&self) -> Layout {
        let mut off = 0;
        let mut layers = Vec::with_capacity(self.hidden.len());
        for (k, &h) in self.hidden.iter().enumerate() {
            let n_in = self.layer_input(k);
            let wx = off;
            let wh = wx + n_in * 4 * h;
            let b = wh + h * 4 * h;
            off = b + 4 * h;
            layers.push(LayerOffsets { n_in, h, wx, wh, b });
        }
        let h_last = *self.hidden.last().expect("validated");
        let dense_w = off;
        let dense_b = dense_w + h_last * self.output_dim;
        Layout {
            layers,
            dense_w,
            dense_b,
            total: dense_b + self.output_dim,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerOffsets {
    n_in: usize,
    h: usize,
    wx: usize,
    wh: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    layers: Vec<LayerOffsets>,
    dense_w: usize,
    dense_b: usize,
    total: usize,
}

fn view2(p: &[f64], off: usize, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((rows, cols), &p[off..off + rows * cols]).expect("parameter block")
}

fn view2_mut(p: &mut [f64], off: usize, rows: usize, cols: usize) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape((rows, cols), &mut p[off..off + rows * cols]).expect("parameter block")
}

fn view1(p: &[f64], off: usize, n: usize) -> ArrayView1<'_, f64> {
    ArrayView1::from(&p[off..off + n])
}

fn view1_mut(p: &mut [f64], off: usize, n: usize) -> ArrayViewMut1<'_, f64> {
    ArrayViewMut1::from(&mut p[off..off + n])
}

/// Fixed set of disabled units on the last LSTM layer. Survivors are scaled
/// by 1/(1 − rate), in training and prediction alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutMask {
    pub rate: f64,
    pub keep: Vec<bool>,
}

impl DropoutMask {
    /// Disable exactly round(rate · width) units chosen uniformly.
    pub fn random<R: Rng>(width: usize, rate: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate must lie in [0, 1), got {rate}")));
        }
        let n_off = (rate * width as f64).round() as usize;
        let mut keep = vec![true; width];
        for i in sample(rng, width, n_off) {
            keep[i] = false;
        }
        Ok(Self { rate, keep })
    }

    pub fn active(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    fn scale(&self) -> Array1<f64> {
        let s = 1.0 / (1.0 - self.rate);
        self.keep.iter().map(|&k| if k { s } else { 0.0 }).collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetwork {
    arch: Architecture,
    params: Vec<f64>,
    mask: Option<DropoutMask>,
}

struct LayerCache {
    /// Layer input per step, (B, n_in).
    xs: Vec<Array2<f64>>,
    /// Post-activation gates per step, (B, 4h).
    gates: Vec<Array2<f64>>,
    /// c_0 … c_L.
    cs: Vec<Array2<f64>>,
    tanh_c: Vec<Array2<f64>>,
    /// Layer outputs h̃_0 … h̃_L (masked on the last layer).
    hs: Vec<Array2<f64>>,
}

impl LstmNetwork {
    /// Uniform ±1/√fan_in weights per block, zero biases except the forget
    /// gate at +1, and no mask.
    pub fn new<R: Rng>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        let mut params = vec![0.0; layout.total];
        for lo in &layout.layers {
            let bx = 1.0 / (lo.n_in as f64).sqrt();
            for p in &mut params[lo.wx..lo.wh] {
                *p = rng.random_range(-bx..=bx);
            }
            let bh = 1.0 / (lo.h as f64).sqrt();
            for p in &mut params[lo.wh..lo.b] {
                *p = rng.random_range(-bh..=bh);
            }
            for p in &mut params[lo.b + lo.h..lo.b + 2 * lo.h] {
                *p = 1.0;
            }
        }
        let h_last = *arch.hidden.last().expect("validated");
        let bd = 1.0 / (h_last as f64).sqrt();
        for p in &mut params[layout.dense_w..layout.dense_b] {
            *p = rng.random_range(-bd..=bd);
        }
        Ok(Self { arch, params, mask: None })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>, mask: Option<DropoutMask>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.n_params() {
            return Err(Error::Shape(format!(
                "{} parameters given, architecture needs {}",
                params.len(),
                arch.n_params()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite network parameter".into()));
        }
        let mut net = Self { arch, params, mask: None };
        net.set_mask(mask)?;
        Ok(net)
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        let n = arch.n_params();
        Self::from_params(arch, vec![0.0; n], None)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn window_length(&self) -> usize {
        self.arch.window_length
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn mask(&self) -> Option<&DropoutMask> {
        self.mask.as_ref()
    }

    pub fn set_mask(&mut self, mask: Option<DropoutMask>) -> Result<()> {
        if let Some(m) = &mask {
            let width = *self.arch.hidden.last().expect("validated");
            if m.keep.len() != width {
                return Err(Error::Shape(format!("mask covers {} units, last layer has {width}", m.keep.len())));
            }
        }
        self.mask = mask;
        Ok(())
    }

    pub fn dense_bias(&self) -> ArrayView1<'_, f64> {
        let layout = self.arch.layout();
        view1(&self.params, layout.dense_b, self.arch.output_dim)
    }

    /// One LSTM step of layer `k` for a batch: returns (h_t, c_t).
    pub fn cell_forward(
        &self,
        k: usize,
        x: ArrayView2<'_, f64>,
        h_prev: ArrayView2<'_, f64>,
        c_prev: ArrayView2<'_, f64>,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        let lo = *self
            .arch
            .layout()
            .layers
            .get(k)
            .ok_or_else(|| Error::Shape(format!("no layer {k}")))?;
        if x.ncols() != lo.n_in || h_prev.ncols() != lo.h || c_prev.ncols() != lo.h {
            return Err(Error::Shape("cell input widths do not match the layer".into()));
        }
        let mut a = x.dot(&view2(&self.params, lo.wx, lo.n_in, 4 * lo.h)) + &view1(&self.params, lo.b, 4 * lo.h);
        a += &h_prev.dot(&view2(&self.params, lo.wh, lo.h, 4 * lo.h));
        activate(&mut a, lo.h);
        let (c, tc) = cell_state(&a, &c_prev.to_owned(), lo.h);
        Ok((&a.slice(s![.., 2 * lo.h..3 * lo.h]) * &tc, c))
    }

    fn forward_cached(&self, inputs: &Array3<f64>) -> (Vec<LayerCache>, Array2<f64>) {
        let layout = self.arch.layout();
        let (b, l, _) = inputs.dim();
        let mut xs: Vec<Array2<f64>> = (0..l).map(|t| inputs.slice(s![.., t, ..]).to_owned()).collect();
        let mut caches = Vec::with_capacity(layout.layers.len());
        let n_layers = layout.layers.len();
        for (k, lo) in layout.layers.iter().enumerate() {
            let wx = view2(&self.params, lo.wx, lo.n_in, 4 * lo.h);
            let wh = view2(&self.params, lo.wh, lo.h, 4 * lo.h);
            let bias = view1(&self.params, lo.b, 4 * lo.h);
            let scale = (k + 1 == n_layers).then(|| self.mask.as_ref().map(DropoutMask::scale)).flatten();
            let mut cache = LayerCache {
                xs: Vec::new(),
                gates: Vec::with_capacity(l),
                cs: vec![Array2::zeros((b, lo.h))],
                tanh_c: Vec::with_capacity(l),
                hs: vec![Array2::zeros((b, lo.h))],
            };
            for x in &xs {
                let mut a = x.dot(&wx) + &bias;
                a += &cache.hs.last().expect("h_0").dot(&wh);
                activate(&mut a, lo.h);
                let (c, tc) = cell_state(&a, cache.cs.last().expect("c_0"), lo.h);
                let mut h = &a.slice(s![.., 2 * lo.h..3 * lo.h]) * &tc;
                if let Some(sc) = &scale {
                    h *= sc;
                }
                cache.gates.push(a);
                cache.cs.push(c);
                cache.tanh_c.push(tc);
                cache.hs.push(h);
            }
            cache.xs = std::mem::replace(&mut xs, cache.hs[1..].to_vec());
            caches.push(cache);
        }
        let h_top = caches.last().expect("layers").hs.last().expect("h_L");
        let h_last = *self.arch.hidden.last().expect("validated");
        let y = h_top.dot(&view2(&self.params, layout.dense_w, h_last, self.arch.output_dim))
            + &view1(&self.params, layout.dense_b, self.arch.output_dim);
        (caches, y)
    }

    /// Outputs for a batch of windows (B, L, d_in) → (B, d_out).
    pub fn forward(&self, inputs: &Array3<f64>) -> Result<Array2<f64>> {
        if inputs.shape()[2] != self.arch.input_dim || inputs.shape()[1] == 0 {
            return Err(Error::Shape(format!(
                "input batch {:?} does not match input width {}",
                inputs.shape(),
                self.arch.input_dim
            )));
        }
        Ok(self.forward_cached(inputs).1)
    }

    /// Output for one (L, d_in) window.
    pub fn forward_window(&self, window: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let batch = window.to_owned().insert_axis(Axis(0));
        Ok(self.forward(&batch)?.row(0).to_owned())
    }

    pub fn loss(&self, data: &SampleSet) -> Result<f64> {
        let y = self.forward(&data.inputs)?;
        Ok(mse(&y, &data.targets))
    }

    /// Batch-mean MSE and its exact gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, data: &SampleSet) -> Result<(f64, Vec<f64>)> {
        if data.is_empty() {
            return Err(Error::InsufficientData("empty batch".into()));
        }
        if data.dim() != self.arch.output_dim || data.inputs.shape()[2] != self.arch.input_dim {
            return Err(Error::Shape("batch feature width does not match the network".into()));
        }
        let layout = self.arch.layout();
        let (caches, y) = self.forward_cached(&data.inputs);
        let loss = mse(&y, &data.targets);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss {loss}")));
        }
        let mut grad = vec![0.0; layout.total];
        let n = y.len() as f64;
        let dy = (&y - &data.targets) * (2.0 / n);
        let h_last = *self.arch.hidden.last().expect("validated");
        let h_top = caches.last().expect("layers").hs.last().expect("h_L");
        view2_mut(&mut grad, layout.dense_w, h_last, self.arch.output_dim).assign(&h_top.t().dot(&dy));
        view1_mut(&mut grad, layout.dense_b, self.arch.output_dim).assign(&dy.sum_axis(Axis(0)));

        let l = data.window_length();
        // gradient flowing into each layer's output sequence
        let mut d_out: Vec<Array2<f64>> = vec![Array2::zeros((data.len(), h_last)); l];
        d_out[l - 1] = dy.dot(&view2(&self.params, layout.dense_w, h_last, self.arch.output_dim).t());
        let n_layers = layout.layers.len();
        for (k, lo) in layout.layers.iter().enumerate().rev() {
            let cache = &caches[k];
            let h = lo.h;
            let wx = view2(&self.params, lo.wx, lo.n_in, 4 * h);
            let wh = view2(&self.params, lo.wh, h, 4 * h);
            let scale = (k + 1 == n_layers).then(|| self.mask.as_ref().map(DropoutMask::scale)).flatten();
            let mut dwx = Array2::<f64>::zeros((lo.n_in, 4 * h));
            let mut dwh = Array2::<f64>::zeros((h, 4 * h));
            let mut db = Array1::<f64>::zeros(4 * h);
            let mut dh_next = Array2::<f64>::zeros((data.len(), h));
            let mut dc_next = Array2::<f64>::zeros((data.len(), h));
            let mut d_in: Vec<Array2<f64>> = Vec::with_capacity(l);
            for t in (0..l).rev() {
                let mut dh = &d_out[t] + &dh_next;
                if let Some(sc) = &scale {
                    dh *= sc;
                }
                let g = &cache.gates[t];
                let tc = &cache.tanh_c[t];
                let c_prev = &cache.cs[t];
                let mut da = Array2::<f64>::zeros((data.len(), 4 * h));
                Zip::from(da.rows_mut())
                    .and(g.rows())
                    .and(dh.rows())
                    .and(tc.rows())
                    .and(c_prev.rows())
                    .and(dc_next.rows_mut())
                    .for_each(|mut da, g, dh, tc, cp, mut dcn| {
                        for j in 0..h {
                            let (gi, gf, go, gg) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                            let d_o = dh[j] * tc[j];
                            let dc = dcn[j] + dh[j] * go * (1.0 - tc[j] * tc[j]);
                            da[j] = dc * gg * gi * (1.0 - gi);
                            da[h + j] = dc * cp[j] * gf * (1.0 - gf);
                            da[2 * h + j] = d_o * go * (1.0 - go);
                            da[3 * h + j] = dc * gi * (1.0 - gg * gg);
                            dcn[j] = dc * gf;
                        }
                    });
                dwx += &cache.xs[t].t().dot(&da);
                dwh += &cache.hs[t].t().dot(&da);
                db += &da.sum_axis(Axis(0));
                dh_next = da.dot(&wh.t());
                if k > 0 {
                    d_in.push(da.dot(&wx.t()));
                }
            }
            view2_mut(&mut grad, lo.wx, lo.n_in, 4 * h).assign(&dwx);
            view2_mut(&mut grad, lo.wh, h, 4 * h).assign(&dwh);
            view1_mut(&mut grad, lo.b, 4 * h).assign(&db);
            if k > 0 {
                d_in.reverse();
                d_out = d_in;
            }
        }
        Ok((loss, grad))
    }

    /// Roll forward `n_steps` from `seed_window` (L × d), feeding each
    /// prediction back in as the newest row.
    pub fn predict_autoregressive(&self, seed_window: ArrayView2<'_, f64>, n_steps: usize) -> Result<Array2<f64>> {
        let (l, d) = seed_window.dim();
        if l != self.arch.window_length {
            return Err(Error::Shape(format!(
                "seed window has {l} rows, network expects {}",
                self.arch.window_length
            )));
        }
        if d != self.arch.input_dim || d != self.arch.output_dim {
            return Err(Error::Shape("autoregressive rollout needs input width = output width".into()));
        }
        let mut out = Array2::<f64>::zeros((n_steps, d));
        // rolling buffer: rows [start, start + l) of `hist` form the current window
        let mut hist = Array2::<f64>::zeros((l + n_steps, d));
        hist.slice_mut(s![..l, ..]).assign(&seed_window);
        for step in 0..n_steps {
            let y = self.forward_window(hist.slice(s![step..step + l, ..]))?;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite prediction at step {step}")));
            }
            hist.row_mut(l + step).assign(&y);
            out.row_mut(step).assign(&y);
        }
        Ok(out)
    }

    pub fn to_checkpoint(&self, train_meta: serde_json::Value) -> Checkpoint {
        let layout = self.arch.layout();
        let mut weights = Vec::new();
        for (k, lo) in layout.layers.iter().enumerate() {
            let wx = view2(&self.params, lo.wx, lo.n_in, 4 * lo.h);
            let wh = view2(&self.params, lo.wh, lo.h, 4 * lo.h);
            let b = view1(&self.params, lo.b, 4 * lo.h);
            for (q, gate) in GATES.iter().enumerate() {
                let cols = s![.., q * lo.h..(q + 1) * lo.h];
                weights.push(WeightBlock::new(format!("lstm{k}.W_x{gate}"), wx.slice(cols)));
                weights.push(WeightBlock::new(format!("lstm{k}.W_h{gate}"), wh.slice(cols)));
            }
            for (q, gate) in GATES.iter().enumerate() {
                let part = b.slice(s![q * lo.h..(q + 1) * lo.h]);
                weights.push(WeightBlock {
                    name: format!("lstm{k}.b_{gate}"),
                    shape: vec![lo.h],
                    values: part.to_vec(),
                });
            }
        }
        let h_last = *self.arch.hidden.last().expect("validated");
        weights.push(WeightBlock::new(
            "dense.W".into(),
            view2(&self.params, layout.dense_w, h_last, self.arch.output_dim),
        ));
        weights.push(WeightBlock {
            name: "dense.b".into(),
            shape: vec![self.arch.output_dim],
            values: view1(&self.params, layout.dense_b, self.arch.output_dim).to_vec(),
        });
        Checkpoint {
            arch: self.arch.hidden.clone(),
            input_dim: self.arch.input_dim,
            output_dim: self.arch.output_dim,
            window_length: self.arch.window_length,
            dropout: self.mask.clone(),
            weights,
            train_meta,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let arch = Architecture {
            input_dim: ck.input_dim,
            hidden: ck.arch.clone(),
            output_dim: ck.output_dim,
            window_length: ck.window_length,
        };
        arch.validate()?;
        let layout = arch.layout();
        let mut params = vec![0.0; layout.total];
        let mut blocks = ck.weights.iter();
        let mut next = |name: String, shape: &[usize]| -> Result<&WeightBlock> {
            let blk = blocks
                .next()
                .ok_or_else(|| Error::Parse(format!("checkpoint is missing block {name}")))?;
            if blk.name != name || blk.shape != shape || blk.values.len() != shape.iter().product::<usize>() {
                return Err(Error::Parse(format!(
                    "checkpoint block {} {:?} where {name} {shape:?} was expected",
                    blk.name, blk.shape
                )));
            }
            Ok(blk)
        };
        for (k, lo) in layout.layers.iter().enumerate() {
            for (q, gate) in GATES.iter().enumerate() {
                let cols = s![.., q * lo.h..(q + 1) * lo.h];
                let bx = next(format!("lstm{k}.W_x{gate}"), &[lo.n_in, lo.h])?;
                view2_mut(&mut params, lo.wx, lo.n_in, 4 * lo.h)
                    .slice_mut(cols)
                    .assign(&bx.view2()?);
                let bh = next(format!("lstm{k}.W_h{gate}"), &[lo.h, lo.h])?;
                view2_mut(&mut params, lo.wh, lo.h, 4 * lo.h)
                    .slice_mut(cols)
                    .assign(&bh.view2()?);
            }
            for (q, gate) in GATES.iter().enumerate() {
                let bb = next(format!("lstm{k}.b_{gate}"), &[lo.h])?;
                params[lo.b + q * lo.h..lo.b + (q + 1) * lo.h].copy_from_slice(&bb.values);
            }
        }
        let h_last = *arch.hidden.last().expect("validated");
        let dw = next("dense.W".into(), &[h_last, arch.output_dim])?;
        params[layout.dense_w..layout.dense_b].copy_from_slice(&dw.values);
        let dbias = next("dense.b".into(), &[arch.output_dim])?;
        params[layout.dense_b..layout.total].copy_from_slice(&dbias.values);
        if blocks.next().is_some() {
            return Err(Error::Parse("checkpoint has extra weight blocks".into()));
        }
        Self::from_params(arch, params, ck.dropout.clone())
    }
}

fn activate(a: &mut Array2<f64>, h: usize) {
    a.slice_mut(s![.., ..3 * h]).mapv_inplace(sigmoid);
    a.slice_mut(s![.., 3 * h..]).mapv_inplace(f64::tanh);
}

/// c_t = f ⊙ c_prev + i ⊙ g, and tanh(c_t).
fn cell_state(gates: &Array2<f64>, c_prev: &Array2<f64>, h: usize) -> (Array2<f64>, Array2<f64>) {
    let c = &gates.slice(s![.., h..2 * h]) * c_prev + &gates.slice(s![.., ..h]) * &gates.slice(s![.., 3 * h..]);
    let tc = c.mapv(f64::tanh);
    (c, tc)
}

pub fn mse(y: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let n = y.len() as f64;
    Zip::from(y).and(target).fold(0.0, |acc, a, b| acc + (a - b) * (a - b)) / n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl WeightBlock {
    fn new(name: String, m: ArrayView2<'_, f64>) -> Self {
        Self {
            name,
            shape: vec![m.nrows(), m.ncols()],
            values: m.iter().copied().collect(),
        }
    }

    fn view2(&self) -> Result<ArrayView2<'_, f64>> {
        ArrayView2::from_shape((self.shape[0], self.shape[1]), &self.values)
            .map_err(|e| Error::Parse(format!("block {}: {e}", self.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Hidden widths.
    pub arch: Vec<usize>,
    pub input_dim: usize,
    pub output_dim: usize,
    #[serde(rename = "L")]
    pub window_length: usize,
    pub dropout: Option<DropoutMask>,
    pub weights: Vec<WeightBlock>,
    pub train_meta: serde_json::Value,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub patience: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 50,
            max_epochs: 300,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size, patience and max_epochs must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("invalid Adam constants".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Sample-weighted mean of the minibatch losses seen in each epoch.
    pub train_loss: Vec<f64>,
    /// A2 loss after each epoch.
    pub validation_loss: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn best_validation_loss(&self) -> f64 {
        self.validation_loss[self.best_epoch]
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// Mini-batch Adam on `train` with early stopping on `validation`; the
/// network ends up holding the parameters of the best validation epoch.
pub fn train(net: &mut LstmNetwork, train: &SampleSet, validation: &SampleSet, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::InsufficientData("training needs non-empty train and validation sets".into()));
    }
    let mut rng = crate::seed::rng(cfg.seed);
    let mut adam = Adam::new(net.params.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport {
        train_loss: Vec::new(),
        validation_loss: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best = (f64::INFINITY, net.params.clone());
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train.select(chunk);
            let (loss, grad) = net.loss_and_gradient(&batch).map_err(|e| match e {
                Error::Numerical(_) => Error::Divergence { epoch, loss: f64::NAN },
                other => other,
            })?;
            total += loss * chunk.len() as f64;
            adam.step(&mut net.params, &grad, cfg);
        }
        let train_loss = total / train.len() as f64;
        let val_loss = net.loss(validation)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: if train_loss.is_finite() { val_loss } else { train_loss },
            });
        }
        report.train_loss.push(train_loss);
        report.validation_loss.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, net.params.clone());
            report.best_epoch = epoch;
        } else if epoch - report.best_epoch >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }
    net.params = best.1;
    Ok(report)
}

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub probed: usize,
    pub max_relative_error: f64,
    /// (parameter index, analytic, numeric) of the worst probe.
    pub worst: (usize, f64, f64),
}

/// Probe `n_probes` distinct parameters drawn with `rng` by central
/// differences of step `h`. The relative error of a probe is
/// |a − n| / max(|a|, |n|, `floor`).
pub fn finite_difference_check<R: Rng>(
    net: &LstmNetwork,
    data: &SampleSet,
    n_probes: usize,
    h: f64,
    floor: f64,
    rng: &mut R,
) -> Result<GradientCheck> {
    let (_, grad) = net.loss_and_gradient(data)?;
    let n = grad.len();
    let mut probe = net.clone();
    let mut out = GradientCheck {
        probed: 0,
        max_relative_error: 0.0,
        worst: (0, 0.0, 0.0),
    };
    for idx in sample(rng, n, n_probes.min(n)) {
        let orig = probe.params[idx];
        probe.params[idx] = orig + h;
        let plus = probe.loss(data)?;
        probe.params[idx] = orig - h;
        let minus = probe.loss(data)?;
        probe.params[idx] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let rel = (grad[idx] - numeric).abs() / grad[idx].abs().max(numeric.abs()).max(floor);
        out.probed += 1;
        if rel > out.max_relative_error {
            out.max_relative_error = rel;
            out.worst = (idx, grad[idx], numeric);
        }
    }
    Ok(out)
}
