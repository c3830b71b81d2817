//! A small fully connected network with leaky-ReLU hidden activations and a
//! linear output layer, exact reverse-mode gradients for both parameters and
//! inputs, and a bias-corrected Adam optimizer.
//!
//! Parameters live in one flat buffer, layer by layer: the `out x in`
//! row-major weight matrix followed by the bias vector. Gradients and Adam
//! moments share that layout.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const CHECKPOINT_MAGIC: &str = "eieg-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    slope: f64,
    params: Vec<f64>,
    // (weight offset, bias offset) per layer
    offsets: Vec<(usize, usize)>,
}

/// Activations recorded by [`Mlp::forward_cached`] for a later backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    rows: usize,
    // activations[0] is the input; activations[l + 1] is the output of layer l
    activations: Vec<Vec<f64>>,
    // pre-activations of every hidden layer
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self, dim: usize) -> SampleBatch {
        SampleBatch::from_vec_unchecked(self.rows, dim, self.activations.last().unwrap().clone())
    }
}

#[inline]
fn leaky(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        slope * z
    }
}

// Derivative at exactly zero is taken from the positive side.
#[inline]
fn leaky_prime(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        slope
    }
}

pub fn leaky_relu(z: f64, slope: f64) -> f64 {
    leaky(z, slope)
}

fn layout(dims: &[usize]) -> (Vec<(usize, usize)>, usize) {
    let mut offsets = Vec::with_capacity(dims.len() - 1);
    let mut at = 0;
    for w in dims.windows(2) {
        let w_off = at;
        at += w[0] * w[1];
        offsets.push((w_off, at));
        at += w[1];
    }
    (offsets, at)
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "an MLP needs at least 2 layer dims, got {}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidConfig("layer dims must be positive".into()));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(seed: u64, dims: &[usize], slope: f64) -> Result<Self> {
        Self::init_with(&mut SeededRng::new(seed), dims, slope)
    }

    pub fn init_with(rng: &mut SeededRng, dims: &[usize], slope: f64) -> Result<Self> {
        check_dims(dims)?;
        let (offsets, count) = layout(dims);
        let mut params = vec![0.0; count];
        for (l, w) in dims.windows(2).enumerate() {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            let (w_off, b_off) = offsets[l];
            for p in &mut params[w_off..b_off] {
                *p = rng.uniform_range(-limit, limit);
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            slope,
            params,
            offsets,
        })
    }

    pub fn from_parts(dims: &[usize], slope: f64, params: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let (offsets, count) = layout(dims);
        if params.len() != count {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {count} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                what: "MLP parameters".into(),
                step: 0,
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            slope,
            params,
            offsets,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let (w, b) = self.offsets[layer];
        &self.params[w..b]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let (_, b) = self.offsets[layer];
        &self.params[b..b + self.dims[layer + 1]]
    }

    pub fn forward(&self, inputs: &SampleBatch) -> Result<SampleBatch> {
        Ok(self.forward_cached(inputs)?.output(self.output_dim()))
    }

    pub fn forward_cached(&self, inputs: &SampleBatch) -> Result<ForwardCache> {
        if inputs.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: inputs.dim(),
            });
        }
        let rows = inputs.rows();
        let layers = self.num_layers();
        let mut activations = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers.saturating_sub(1));
        activations.push(inputs.as_slice().to_vec());
        for l in 0..layers {
            let (d_in, d_out) = (self.dims[l], self.dims[l + 1]);
            let w = self.weights(l);
            let b = self.bias(l);
            let a = &activations[l];
            let mut z = vec![0.0; rows * d_out];
            for z_n in z.chunks_exact_mut(d_out) {
                z_n.copy_from_slice(b);
            }
            // z (rows x d_out) += a (rows x d_in) * w^T
            gemm(rows, d_in, d_out, a, (d_in, 1), w, (1, d_in), &mut z, (d_out, 1));
            if l + 1 < layers {
                let act = z.iter().map(|&v| leaky(v, self.slope)).collect();
                pre.push(z);
                activations.push(act);
            } else {
                activations.push(z);
            }
        }
        Ok(ForwardCache {
            rows,
            activations,
            pre,
        })
    }

    /// Reverse-mode gradients of `sum(upstream .* output)`.
    ///
    /// Returns the parameter gradient in the flat parameter layout and the
    /// gradient with respect to the inputs.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &SampleBatch,
    ) -> Result<(Vec<f64>, SampleBatch)> {
        let mut grads = vec![0.0; self.params.len()];
        let input_grad = self.backward_into(cache, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Like [`Mlp::backward`] but accumulates parameter gradients into `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        upstream: &SampleBatch,
        grads: &mut [f64],
    ) -> Result<SampleBatch> {
        if upstream.rows() != cache.rows || upstream.dim() != self.output_dim() {
            return Err(Error::Shape(format!(
                "upstream gradient is {}x{}, forward output was {}x{}",
                upstream.rows(),
                upstream.dim(),
                cache.rows,
                self.output_dim()
            )));
        }
        if grads.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "gradient buffer has {} entries, model has {}",
                grads.len(),
                self.params.len()
            )));
        }
        let rows = cache.rows;
        let mut delta = upstream.as_slice().to_vec();
        for l in (0..self.num_layers()).rev() {
            let (d_in, d_out) = (self.dims[l], self.dims[l + 1]);
            let (w_off, b_off) = self.offsets[l];
            let w = self.weights(l);
            let a = &cache.activations[l];
            let mut prev = vec![0.0; rows * d_in];
            for delta_n in delta.chunks_exact(d_out) {
                for (g, &d) in grads[b_off..b_off + d_out].iter_mut().zip(delta_n) {
                    *g += d;
                }
            }
            // dW (d_out x d_in) += delta^T * a
            gemm(
                d_out,
                rows,
                d_in,
                &delta,
                (1, d_out),
                a,
                (d_in, 1),
                &mut grads[w_off..w_off + d_out * d_in],
                (d_in, 1),
            );
            // prev (rows x d_in) = delta * w
            gemm(rows, d_out, d_in, &delta, (d_out, 1), w, (d_in, 1), &mut prev, (d_in, 1));
            if l > 0 {
                let z = &cache.pre[l - 1];
                for (p, &zv) in prev.iter_mut().zip(z) {
                    *p *= leaky_prime(zv, self.slope);
                }
            }
            delta = prev;
        }
        Ok(SampleBatch::from_vec_unchecked(rows, self.dims[0], delta))
    }

    /// Text checkpoint: a header line, the slope, the layer dims, then every
    /// parameter on its own line in flat layout. Values use the shortest
    /// representation that parses back to the same bits.
    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
        let _ = writeln!(s, "slope {:?}", self.slope);
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "dims {}", dims.join(" "));
        let _ = writeln!(s, "params {}", self.params.len());
        for p in &self.params {
            let _ = writeln!(s, "{p:?}");
        }
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty checkpoint"))?;
        let mut h = header.split_whitespace();
        if h.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad("missing magic"));
        }
        let version: u32 = h
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing version"))?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let slope = lines
            .next()
            .and_then(|l| l.strip_prefix("slope "))
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| bad("missing slope"))?;
        let dims = lines
            .next()
            .and_then(|l| l.strip_prefix("dims "))
            .ok_or_else(|| bad("missing dims"))?
            .split_whitespace()
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Checkpoint(format!("bad dims: {e}")))?;
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("params "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad("missing parameter count"))?;
        let params = lines
            .take(count)
            .map(|l| l.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Checkpoint(format!("bad parameter: {e}")))?;
        if params.len() != count {
            return Err(bad("truncated parameter list"));
        }
        Self::from_parts(&dims, slope, params).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

/// `c += a * b` for row/column-strided dense matrices, `a` is m x k and `b`
/// is k x n. Strides are `(row, col)` in elements.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() > (m - 1) * rsc + (n - 1) * csc);
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(config: AdamConfig, param_count: usize) -> Result<Self> {
        let c = &config;
        if !(c.lr > 0.0) || !(0.0..1.0).contains(&c.beta1) || !(0.0..1.0).contains(&c.beta2) {
            return Err(Error::InvalidConfig(format!("invalid Adam settings {c:?}")));
        }
        Ok(Self {
            config,
            step_count: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
        })
    }

    /// One bias-corrected Adam update. `ascend` moves along `+grad`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], ascend: bool) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::Shape(format!(
                "Adam: {} params, {} grads, {} moments",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let sign = if ascend { 1.0 } else { -1.0 };
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p += sign * lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

pub fn adam_step(model: &mut Mlp, grads: &[f64], state: &mut AdamState, ascend: bool) -> Result<()> {
    state.step(model.params_mut(), grads, ascend)
}
