//! Stacked LSTM forward pass and backpropagation through time.
//!
//! Parameters live in one flat vector described by [`Layout`]. Layer `l`
//! owns a row-major weight matrix of shape `4H x (I_l + H)` acting on the
//! concatenation `[x_t; h_{t-1}]`, and a bias of length `4H`; gate blocks
//! are ordered input, forget, candidate, output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GATES: [&str; 4] = ["input", "forget", "candidate", "output"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerLayout {
    pub input: usize,
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_inputs: usize,
    pub hidden: usize,
    pub layers: Vec<LayerLayout>,
    pub head_w: usize,
    pub head_b: usize,
    pub total: usize,
}

/// A named contiguous parameter range with its logical shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub range: std::ops::Range<usize>,
}

impl Layout {
    pub fn new(n_inputs: usize, hidden: usize, n_layers: usize) -> Self {
        let mut off = 0;
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let input = if l == 0 { n_inputs } else { hidden };
            let w = off;
            off += 4 * hidden * (input + hidden);
            let b = off;
            off += 4 * hidden;
            layers.push(LayerLayout { input, w, b });
        }
        let head_w = off;
        let head_b = off + hidden;
        Layout {
            n_inputs,
            hidden,
            layers,
            head_w,
            head_b,
            total: head_b + 1,
        }
    }

    /// Per-gate weight and bias blocks of every layer, then the dense head.
    pub fn blocks(&self) -> Vec<ParamBlock> {
        let h = self.hidden;
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let width = layer.input + h;
            for (k, gate) in GATES.iter().enumerate() {
                let start = layer.w + k * h * width;
                out.push(ParamBlock {
                    name: format!("layer{l}.w_{gate}"),
                    shape: vec![h, width],
                    range: start..start + h * width,
                });
            }
            for (k, gate) in GATES.iter().enumerate() {
                let start = layer.b + k * h;
                out.push(ParamBlock {
                    name: format!("layer{l}.b_{gate}"),
                    shape: vec![h],
                    range: start..start + h,
                });
            }
        }
        out.push(ParamBlock {
            name: "head.w".into(),
            shape: vec![h],
            range: self.head_w..self.head_w + h,
        });
        out.push(ParamBlock {
            name: "head.b".into(),
            shape: vec![1],
            range: self.head_b..self.head_b + 1,
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Activations of one layer over a window, flat per step.
#[derive(Debug, Clone, Default)]
struct LayerTrace {
    /// `[W x I]` layer inputs (after dropout from the layer below).
    inputs: Vec<f64>,
    /// `[(W+1) x H]`, row 0 is the zero initial state.
    h: Vec<f64>,
    c: Vec<f64>,
    /// `[W x 4H]` activated gates.
    gates: Vec<f64>,
    /// `[W x H]`.
    tanh_c: Vec<f64>,
}

/// Cached activations of one forward pass, reusable across calls.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    layers: Vec<LayerTrace>,
    /// Inverted-dropout masks on each non-top layer's outputs, `[W x H]`.
    masks: Vec<Option<Vec<f64>>>,
    head_mask: Option<Vec<f64>>,
    head_input: Vec<f64>,
    steps: usize,
    pub prediction: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dropout_mask<R: Rng>(rng: &mut R, len: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

/// Runs the network over one `W x F` window and returns the prediction.
///
/// In train mode with a positive `dropout`, inverted dropout is applied to
/// each layer's hidden outputs feeding the next layer and to the final
/// hidden state feeding the dense head.
pub fn forward<R: Rng>(
    layout: &Layout,
    params: &[f64],
    sample: &[f64],
    mode: Mode,
    dropout: f64,
    rng: Option<&mut R>,
    cache: &mut ForwardCache,
) -> Result<f64> {
    let h = layout.hidden;
    let f = layout.n_inputs;
    if f == 0 || sample.len() % f != 0 {
        return Err(Error::SchemaMismatch(format!(
            "window of {} values is not a multiple of {f} inputs",
            sample.len()
        )));
    }
    let steps = sample.len() / f;
    let use_dropout = mode == Mode::Train && dropout > 0.0;
    let mut rng = rng;
    if use_dropout && rng.is_none() {
        return Err(Error::InvalidConfig("train-mode dropout needs an rng".into()));
    }
    let n_layers = layout.layers.len();
    cache.layers.resize_with(n_layers, LayerTrace::default);
    cache.masks.resize(n_layers, None);
    cache.steps = steps;

    for (l, layer) in layout.layers.iter().enumerate() {
        let (below, rest) = cache.layers.split_at_mut(l);
        let trace = &mut rest[0];
        let i_size = layer.input;
        trace.inputs.clear();
        if l == 0 {
            trace.inputs.extend_from_slice(sample);
        } else {
            let prev = &below[l - 1];
            match &cache.masks[l - 1] {
                Some(mask) => trace.inputs.extend(
                    prev.h[h..].iter().zip(mask).map(|(v, m)| v * m),
                ),
                None => trace.inputs.extend_from_slice(&prev.h[h..]),
            }
        }
        trace.h.clear();
        trace.h.resize((steps + 1) * h, 0.0);
        trace.c.clear();
        trace.c.resize((steps + 1) * h, 0.0);
        trace.gates.clear();
        trace.gates.resize(steps * 4 * h, 0.0);
        trace.tanh_c.clear();
        trace.tanh_c.resize(steps * h, 0.0);

        let w = &params[layer.w..layer.b];
        let b = &params[layer.b..layer.b + 4 * h];
        let width = i_size + h;
        for t in 0..steps {
            let x = &trace.inputs[t * i_size..(t + 1) * i_size];
            let h_prev = &trace.h[t * h..(t + 1) * h];
            let z = &mut trace.gates[t * 4 * h..(t + 1) * 4 * h];
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &w[r * width..(r + 1) * width];
                let mut acc = b[r];
                for (wj, xj) in row[..i_size].iter().zip(x) {
                    acc += wj * xj;
                }
                for (wk, hk) in row[i_size..].iter().zip(h_prev) {
                    acc += wk * hk;
                }
                *zr = acc;
            }
            for k in 0..h {
                z[k] = sigmoid(z[k]);
                z[h + k] = sigmoid(z[h + k]);
                z[2 * h + k] = z[2 * h + k].tanh();
                z[3 * h + k] = sigmoid(z[3 * h + k]);
            }
            for k in 0..h {
                let c_prev = trace.c[t * h + k];
                let c = z[h + k] * c_prev + z[k] * z[2 * h + k];
                let tc = c.tanh();
                let hv = z[3 * h + k] * tc;
                if !hv.is_finite() || !c.is_finite() {
                    return Err(Error::NonFinite { epoch: 0, step: t });
                }
                trace.c[(t + 1) * h + k] = c;
                trace.tanh_c[t * h + k] = tc;
                trace.h[(t + 1) * h + k] = hv;
            }
        }
        cache.masks[l] = if use_dropout && l + 1 < n_layers {
            Some(dropout_mask(rng.as_mut().unwrap(), steps * h, dropout))
        } else {
            None
        };
    }

    let top = &cache.layers[n_layers - 1];
    let last = &top.h[steps * h..(steps + 1) * h];
    cache.head_mask = use_dropout.then(|| dropout_mask(rng.as_mut().unwrap(), h, dropout));
    cache.head_input.clear();
    match &cache.head_mask {
        Some(mask) => cache.head_input.extend(last.iter().zip(mask).map(|(v, m)| v * m)),
        None => cache.head_input.extend_from_slice(last),
    }
    let head_w = &params[layout.head_w..layout.head_w + h];
    let pred = params[layout.head_b]
        + head_w
            .iter()
            .zip(&cache.head_input)
            .map(|(w, x)| w * x)
            .sum::<f64>();
    if !pred.is_finite() {
        return Err(Error::NonFinite {
            epoch: 0,
            step: steps,
        });
    }
    cache.prediction = pred;
    Ok(pred)
}

/// Accumulates `d_pred * d(prediction)/d(params)` into `grads`.
pub fn backward(layout: &Layout, params: &[f64], cache: &ForwardCache, d_pred: f64, grads: &mut [f64]) {
    let h = layout.hidden;
    let steps = cache.steps;
    let n_layers = layout.layers.len();

    for k in 0..h {
        grads[layout.head_w + k] += d_pred * cache.head_input[k];
    }
    grads[layout.head_b] += d_pred;

    // Gradient w.r.t. each layer's output sequence, `[W x H]`.
    let mut d_out = vec![0.0; steps * h];
    for k in 0..h {
        let mut d = d_pred * params[layout.head_w + k];
        if let Some(mask) = &cache.head_mask {
            d *= mask[k];
        }
        d_out[(steps - 1) * h + k] = d;
    }

    let mut dz = vec![0.0; 4 * h];
    let mut dh_rec = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    for l in (0..n_layers).rev() {
        let layer = layout.layers[l];
        let trace = &cache.layers[l];
        let i_size = layer.input;
        let width = i_size + h;
        let w = &params[layer.w..layer.b];
        let mut d_in = vec![0.0; steps * i_size];
        dh_rec.iter_mut().for_each(|v| *v = 0.0);
        dc_next.iter_mut().for_each(|v| *v = 0.0);

        for t in (0..steps).rev() {
            let gates = &trace.gates[t * 4 * h..(t + 1) * 4 * h];
            for k in 0..h {
                let (ig, fg, gg, og) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                let tc = trace.tanh_c[t * h + k];
                let c_prev = trace.c[t * h + k];
                let dh = d_out[t * h + k] + dh_rec[k];
                let d_o = dh * tc;
                let dc = dc_next[k] + dh * og * (1.0 - tc * tc);
                dz[k] = dc * gg * ig * (1.0 - ig);
                dz[h + k] = dc * c_prev * fg * (1.0 - fg);
                dz[2 * h + k] = dc * ig * (1.0 - gg * gg);
                dz[3 * h + k] = d_o * og * (1.0 - og);
                dc_next[k] = dc * fg;
            }
            let x = &trace.inputs[t * i_size..(t + 1) * i_size];
            let h_prev = &trace.h[t * h..(t + 1) * h];
            dh_rec.iter_mut().for_each(|v| *v = 0.0);
            let dx = &mut d_in[t * i_size..(t + 1) * i_size];
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr == 0.0 {
                    continue;
                }
                let row = &w[r * width..(r + 1) * width];
                let g_row = &mut grads[layer.w + r * width..layer.w + (r + 1) * width];
                for j in 0..i_size {
                    g_row[j] += dzr * x[j];
                    dx[j] += dzr * row[j];
                }
                for k in 0..h {
                    g_row[i_size + k] += dzr * h_prev[k];
                    dh_rec[k] += dzr * row[i_size + k];
                }
                grads[layer.b + r] += dzr;
            }
        }

        if l > 0 {
            // Map back through the dropout applied to the layer below.
            d_out = match &cache.masks[l - 1] {
                Some(mask) => d_in.iter().zip(mask).map(|(d, m)| d * m).collect(),
                None => d_in,
            };
        }
    }
}
