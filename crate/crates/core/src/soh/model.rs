//! Stacked LSTM (SELU after each layer) followed by a linear fully-connected
//! stack, evaluated per time step. Parameters live in one flat vector so the
//! optimizer and checkpoints can treat them uniformly.
//!
//! Per LSTM layer with input width `d` and hidden width `H` the layout is
//! `W [4H×d]`, `U [4H×H]`, `b [4H]`, gate blocks ordered input, forget,
//! candidate, output. Each FC layer is `W [out×in]`, `b [out]`. All matrices
//! are row-major.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;
pub const SELU_SCALE: f64 = 1.050_700_987_355_480_5;

pub fn selu(x: f64) -> f64 {
    selu_with(x, SELU_ALPHA, SELU_SCALE)
}

#[inline]
fn selu_with(x: f64, alpha: f64, scale: f64) -> f64 {
    if x > 0.0 {
        scale * x
    } else {
        scale * alpha * (x.exp() - 1.0)
    }
}

#[inline]
fn selu_grad(x: f64, alpha: f64, scale: f64) -> f64 {
    if x > 0.0 {
        scale
    } else {
        scale * alpha * x.exp()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub lstm_hidden: Vec<usize>,
    /// Output widths of the FC layers; the last must be 1.
    pub fc_dims: Vec<usize>,
    pub selu_alpha: f64,
    pub selu_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: crate::eis::DEFAULT_N_TAU,
            lstm_hidden: vec![128, 96, 64],
            fc_dims: vec![64, 32, 1],
            selu_alpha: SELU_ALPHA,
            selu_scale: SELU_SCALE,
        }
    }
}

impl ModelConfig {
    pub fn tiny() -> Self {
        ModelConfig {
            input_dim: 3,
            lstm_hidden: vec![4, 4, 4],
            fc_dims: vec![4, 2, 1],
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lstm_hidden.is_empty() || self.fc_dims.is_empty() {
            return Err(Error::Config("model needs at least one LSTM and one FC layer".into()));
        }
        if self.input_dim == 0 || self.lstm_hidden.contains(&0) || self.fc_dims.contains(&0) {
            return Err(Error::Config("all layer widths must be >= 1".into()));
        }
        if self.fc_dims.last() != Some(&1) {
            return Err(Error::Config("last FC layer must have width 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct LstmSlots {
    input: usize,
    hidden: usize,
    w: usize,
    u: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct FcSlots {
    input: usize,
    output: usize,
    w: usize,
    b: usize,
}

fn build_layout(config: &ModelConfig) -> (Vec<TensorInfo>, Vec<LstmSlots>, Vec<FcSlots>) {
    let mut tensors = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, rows: usize, cols: usize| {
        let at = offset;
        tensors.push(TensorInfo {
            name,
            offset: at,
            rows,
            cols,
        });
        offset += rows * cols;
        at
    };
    let mut lstm = Vec::new();
    let mut d = config.input_dim;
    for (l, &h) in config.lstm_hidden.iter().enumerate() {
        let w = push(format!("lstm{l}.w"), 4 * h, d);
        let u = push(format!("lstm{l}.u"), 4 * h, h);
        let b = push(format!("lstm{l}.b"), 4 * h, 1);
        lstm.push(LstmSlots {
            input: d,
            hidden: h,
            w,
            u,
            b,
        });
        d = h;
    }
    let mut fc = Vec::new();
    for (k, &o) in config.fc_dims.iter().enumerate() {
        let w = push(format!("fc{k}.w"), o, d);
        let b = push(format!("fc{k}.b"), o, 1);
        fc.push(FcSlots {
            input: d,
            output: o,
            w,
            b,
        });
        d = o;
    }
    (tensors, lstm, fc)
}

#[derive(Debug, Clone)]
pub struct SohModel {
    config: ModelConfig,
    params: Vec<f64>,
    tensors: Vec<TensorInfo>,
    lstm: Vec<LstmSlots>,
    fc: Vec<FcSlots>,
}

impl SohModel {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (tensors, lstm, fc) = build_layout(&config);
        let n = tensors.last().map(|t| t.offset + t.len()).unwrap_or(0);
        Ok(SohModel {
            config,
            params: vec![0.0; n],
            tensors,
            lstm,
            fc,
        })
    }

    /// Uniform initialization in ±1/√fan_in, where fan_in is the width of
    /// the vector each weight row multiplies (`d + H` for LSTM gates).
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut model = SohModel::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |params: &mut [f64], bound: f64| {
            for p in params {
                *p = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
        };
        for s in model.lstm.clone() {
            let bound = 1.0 / ((s.input + s.hidden) as f64).sqrt();
            let end = s.b + 4 * s.hidden;
            fill(&mut model.params[s.w..end], bound);
        }
        for s in model.fc.clone() {
            let bound = 1.0 / (s.input as f64).sqrt();
            let end = s.b + s.output;
            fill(&mut model.params[s.w..end], bound);
        }
        Ok(model)
    }

    pub fn from_params(config: ModelConfig, params: Vec<f64>) -> Result<Self> {
        let mut model = SohModel::zeros(config)?;
        if params.len() != model.params.len() {
            return Err(Error::Data(format!(
                "checkpoint has {} parameters, config expects {}",
                params.len(),
                model.params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Data("non-finite parameter".into()));
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.tensors
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// SOH estimate per time step.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.forward(inputs)?.0)
    }

    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<(Vec<f64>, ForwardCache)> {
        if inputs.is_empty() {
            return Err(Error::arg("empty input sequence"));
        }
        if let Some(bad) = inputs.iter().find(|x| x.len() != self.config.input_dim) {
            return Err(Error::arg(format!(
                "input width {} does not match model input_dim {}",
                bad.len(),
                self.config.input_dim
            )));
        }
        let p = &self.params;
        let (alpha, scale) = (self.config.selu_alpha, self.config.selu_scale);
        let steps = inputs.len();

        let mut layers = Vec::with_capacity(self.lstm.len());
        let mut seq: Vec<Vec<f64>> = inputs.to_vec();
        for s in &self.lstm {
            let h_dim = s.hidden;
            let w = &p[s.w..s.w + 4 * h_dim * s.input];
            let u = &p[s.u..s.u + 4 * h_dim * h_dim];
            let b = &p[s.b..s.b + 4 * h_dim];
            let mut cache = LstmCache {
                inputs: seq,
                gates: Vec::with_capacity(steps),
                cells: Vec::with_capacity(steps),
                hidden: Vec::with_capacity(steps),
            };
            let mut h_prev = vec![0.0; h_dim];
            let mut c_prev = vec![0.0; h_dim];
            let mut out = Vec::with_capacity(steps);
            for x in &cache.inputs {
                let mut a = b.to_vec();
                for (r, ar) in a.iter_mut().enumerate() {
                    let wr = &w[r * s.input..(r + 1) * s.input];
                    let ur = &u[r * h_dim..(r + 1) * h_dim];
                    *ar += dot(wr, x) + dot(ur, &h_prev);
                }
                let mut gates = vec![0.0; 4 * h_dim];
                let mut c = vec![0.0; h_dim];
                let mut h = vec![0.0; h_dim];
                for k in 0..h_dim {
                    let i = sigmoid(a[k]);
                    let f = sigmoid(a[h_dim + k]);
                    let g = a[2 * h_dim + k].tanh();
                    let o = sigmoid(a[3 * h_dim + k]);
                    gates[k] = i;
                    gates[h_dim + k] = f;
                    gates[2 * h_dim + k] = g;
                    gates[3 * h_dim + k] = o;
                    c[k] = f * c_prev[k] + i * g;
                    h[k] = o * c[k].tanh();
                }
                out.push(h.iter().map(|&v| selu_with(v, alpha, scale)).collect::<Vec<f64>>());
                cache.gates.push(gates);
                cache.cells.push(c.clone());
                cache.hidden.push(h.clone());
                h_prev = h;
                c_prev = c;
            }
            layers.push(cache);
            seq = out;
        }

        // FC stack, linear activations.
        let mut fc_inputs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.fc.len());
        for s in &self.fc {
            let w = &p[s.w..s.w + s.output * s.input];
            let b = &p[s.b..s.b + s.output];
            let next: Vec<Vec<f64>> = seq
                .iter()
                .map(|x| {
                    (0..s.output)
                        .map(|r| b[r] + dot(&w[r * s.input..(r + 1) * s.input], x))
                        .collect()
                })
                .collect();
            fc_inputs.push(seq);
            seq = next;
        }
        let outputs: Vec<f64> = seq.iter().map(|v| v[0]).collect();
        Ok((
            outputs,
            ForwardCache {
                steps,
                lstm: layers,
                fc_inputs,
            },
        ))
    }

    /// Gradient of the per-sequence MSE `mean_t (ŷ_t − y_t)²`.
    pub fn backward(&self, cache: &ForwardCache, outputs: &[f64], targets: &[f64]) -> Result<Vec<f64>> {
        if outputs.len() != cache.steps || targets.len() != cache.steps {
            return Err(Error::arg("targets do not match the cached sequence length"));
        }
        let n = cache.steps as f64;
        let dy: Vec<f64> = outputs
            .iter()
            .zip(targets)
            .map(|(o, t)| 2.0 * (o - t) / n)
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        self.backward_accumulate(cache, &dy, &mut grad);
        Ok(grad)
    }

    /// Backpropagate `dL/dŷ_t` through time, adding into `grad`.
    pub fn backward_accumulate(&self, cache: &ForwardCache, dout: &[f64], grad: &mut [f64]) {
        assert_eq!(dout.len(), cache.steps);
        assert_eq!(grad.len(), self.params.len());
        let p = &self.params;
        let (alpha, scale) = (self.config.selu_alpha, self.config.selu_scale);

        let mut d_seq: Vec<Vec<f64>> = dout.iter().map(|&d| vec![d]).collect();
        for (s, inputs) in self.fc.iter().zip(&cache.fc_inputs).rev() {
            let w = &p[s.w..s.w + s.output * s.input];
            let mut d_in = Vec::with_capacity(cache.steps);
            for (x, dz) in inputs.iter().zip(&d_seq) {
                let mut dx = vec![0.0; s.input];
                for r in 0..s.output {
                    let g = dz[r];
                    if g == 0.0 {
                        continue;
                    }
                    grad[s.b + r] += g;
                    let gw = &mut grad[s.w + r * s.input..s.w + (r + 1) * s.input];
                    let wr = &w[r * s.input..(r + 1) * s.input];
                    for k in 0..s.input {
                        gw[k] += g * x[k];
                        dx[k] += g * wr[k];
                    }
                }
                d_in.push(dx);
            }
            d_seq = d_in;
        }

        for (s, lc) in self.lstm.iter().zip(&cache.lstm).rev() {
            let h_dim = s.hidden;
            let w = &p[s.w..s.w + 4 * h_dim * s.input];
            let u = &p[s.u..s.u + 4 * h_dim * h_dim];
            let mut dh_next = vec![0.0; h_dim];
            let mut dc_next = vec![0.0; h_dim];
            let mut d_in = vec![vec![0.0; s.input]; cache.steps];
            let mut da = vec![0.0; 4 * h_dim];
            for t in (0..cache.steps).rev() {
                let gates = &lc.gates[t];
                let c = &lc.cells[t];
                let h = &lc.hidden[t];
                for k in 0..h_dim {
                    let dh = d_seq[t][k] * selu_grad(h[k], alpha, scale) + dh_next[k];
                    let (i, f, g, o) = (
                        gates[k],
                        gates[h_dim + k],
                        gates[2 * h_dim + k],
                        gates[3 * h_dim + k],
                    );
                    let tc = c[k].tanh();
                    let c_prev = if t > 0 { lc.cells[t - 1][k] } else { 0.0 };
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                    da[k] = dc * g * i * (1.0 - i);
                    da[h_dim + k] = dc * c_prev * f * (1.0 - f);
                    da[2 * h_dim + k] = dc * i * (1.0 - g * g);
                    da[3 * h_dim + k] = dh * tc * o * (1.0 - o);
                    dc_next[k] = dc * f;
                }
                let x = &lc.inputs[t];
                let dx = &mut d_in[t];
                dh_next.iter_mut().for_each(|v| *v = 0.0);
                for (r, &g) in da.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    grad[s.b + r] += g;
                    let gw = &mut grad[s.w + r * s.input..s.w + (r + 1) * s.input];
                    let wr = &w[r * s.input..(r + 1) * s.input];
                    for k in 0..s.input {
                        gw[k] += g * x[k];
                        dx[k] += g * wr[k];
                    }
                    let ur = &u[r * h_dim..(r + 1) * h_dim];
                    if t > 0 {
                        let h_prev = &lc.hidden[t - 1];
                        let gu = &mut grad[s.u + r * h_dim..s.u + (r + 1) * h_dim];
                        for k in 0..h_dim {
                            gu[k] += g * h_prev[k];
                        }
                    }
                    for k in 0..h_dim {
                        dh_next[k] += g * ur[k];
                    }
                }
            }
            d_seq = d_in;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
struct LstmCache {
    inputs: Vec<Vec<f64>>,
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
}

/// Activations saved by `forward` for `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    steps: usize,
    lstm: Vec<LstmCache>,
    fc_inputs: Vec<Vec<Vec<f64>>>,
}
