//! Two-sample elastic-interaction energy and the losses built from it.
//!
//! All double sums are V-statistics: diagonal pairs are included. Sums run
//! row-major (outer index over the first batch) so results are reproducible
//! bit for bit.

use crate::batch::SampleBatch;
use crate::error::Result;
use crate::kernels::{CombinedKernel, KernelConfig, RadialKernel, StabilizerConfig};

/// `(1 / (N M)) sum_i sum_j k(a_i, b_j)`.
pub fn pair_mean<K: RadialKernel + ?Sized>(a: &SampleBatch, b: &SampleBatch, kernel: &K) -> f64 {
    let mut total = 0.0;
    for ai in a.iter_rows() {
        let mut row = 0.0;
        for bj in b.iter_rows() {
            row += kernel.eval(ai, bj);
        }
        total += row;
    }
    total / (a.rows() * b.rows()) as f64
}

/// The sample estimate `E[k(x,x')] + E[k(y,y')] - 2 E[k(x,y)]`.
pub fn eieg_estimate<K: RadialKernel + ?Sized>(
    x: &SampleBatch,
    y: &SampleBatch,
    kernel: &K,
) -> Result<f64> {
    x.ensure_dim(y.dim())?;
    let xx = pair_mean(x, x, kernel);
    let yy = pair_mean(y, y, kernel);
    let xy = pair_mean(x, y, kernel);
    Ok(xx + yy - 2.0 * xy)
}

/// Adds `scale * sum_j grad_1 k(a_k, b_j)` into row `k` of `out` for every `k`.
fn accumulate_pair_grads<K: RadialKernel + ?Sized>(
    a: &SampleBatch,
    b: &SampleBatch,
    kernel: &K,
    scale: f64,
    out: &mut SampleBatch,
) {
    for k in 0..a.rows() {
        let ak = a.row(k);
        let dst = out.row_mut(k);
        for bj in b.iter_rows() {
            kernel.accumulate_grad(ak, bj, scale, dst);
        }
    }
}

/// Gradient of [`eieg_estimate`]`(x, y)` with respect to the rows of `y`.
///
/// The negative of this is the force on each generated point: attraction
/// towards `x`, repulsion from the other rows of `y`.
pub fn eieg_grad_wrt<K: RadialKernel + ?Sized>(
    y: &SampleBatch,
    x: &SampleBatch,
    kernel: &K,
) -> Result<SampleBatch> {
    generator_loss_grad(x, y, kernel, true)
}

/// Generator loss: the estimate with the data-data term dropped.
///
/// With `self_interaction` off only the cross term `-2 E[k(x, g)]` remains.
pub fn generator_loss<K: RadialKernel + ?Sized>(
    x: &SampleBatch,
    g: &SampleBatch,
    kernel: &K,
    self_interaction: bool,
) -> Result<f64> {
    x.ensure_dim(g.dim())?;
    let cross = -2.0 * pair_mean(x, g, kernel);
    if self_interaction {
        Ok(pair_mean(g, g, kernel) + cross)
    } else {
        Ok(cross)
    }
}

/// Gradient of [`generator_loss`] with respect to the rows of `g`.
pub fn generator_loss_grad<K: RadialKernel + ?Sized>(
    x: &SampleBatch,
    g: &SampleBatch,
    kernel: &K,
    self_interaction: bool,
) -> Result<SampleBatch> {
    x.ensure_dim(g.dim())?;
    let n = x.rows() as f64;
    let m = g.rows() as f64;
    let mut out = SampleBatch::zeros(g.rows(), g.dim());
    if self_interaction {
        accumulate_pair_grads(g, g, kernel, 2.0 / (m * m), &mut out);
    }
    accumulate_pair_grads(g, x, kernel, -2.0 / (n * m), &mut out);
    Ok(out)
}

/// The elastic discriminator objective: the full estimate under
/// `e - eps * e_s` on feature points. Training ascends this value.
pub fn discriminator_objective(
    x_feat: &SampleBatch,
    g_feat: &SampleBatch,
    kernel: &KernelConfig,
    stabilizer: &StabilizerConfig,
) -> Result<f64> {
    let k = CombinedKernel::new(*kernel, *stabilizer)?;
    eieg_estimate(x_feat, g_feat, &k)
}

/// Gradients of [`eieg_estimate`] with respect to both batches.
pub fn eieg_grads_both<K: RadialKernel + ?Sized>(
    x: &SampleBatch,
    y: &SampleBatch,
    kernel: &K,
) -> Result<(SampleBatch, SampleBatch)> {
    Ok((eieg_grad_wrt(x, y, kernel)?, eieg_grad_wrt(y, x, kernel)?))
}

// One pass over the pairs of `a` with itself: returns the pair sum and adds
// `scale * sum_j grad_1 k(a_i, a_j)` into row `i` of `out`.
fn self_pass<K: RadialKernel + ?Sized>(
    a: &SampleBatch,
    kernel: &K,
    scale: f64,
    out: &mut SampleBatch,
) -> f64 {
    let n = a.rows();
    let dim = a.dim();
    let mut total = n as f64 * kernel.value(0.0);
    let mut diff = vec![0.0; dim];
    for i in 0..n {
        let ai = a.row(i);
        let mut row = 0.0;
        for j in i + 1..n {
            let aj = a.row(j);
            let mut r2 = 0.0;
            for ((d, p), q) in diff.iter_mut().zip(ai).zip(aj) {
                *d = p - q;
                r2 += *d * *d;
            }
            let r = r2.sqrt();
            row += kernel.value(r);
            if r > 0.0 {
                let c = scale * kernel.grad_factor(r);
                let slice = out.as_mut_slice();
                for (k, d) in diff.iter().enumerate() {
                    slice[i * dim + k] += c * d;
                    slice[j * dim + k] -= c * d;
                }
            }
        }
        total += 2.0 * row;
    }
    total
}

// One pass over the cross pairs: returns the pair sum and adds
// `scale * grad` of it into `out_a` and `out_b`.
fn cross_pass<K: RadialKernel + ?Sized>(
    a: &SampleBatch,
    b: &SampleBatch,
    kernel: &K,
    scale: f64,
    out_a: &mut SampleBatch,
    mut out_b: Option<&mut SampleBatch>,
) -> f64 {
    let dim = a.dim();
    let mut total = 0.0;
    let mut diff = vec![0.0; dim];
    for i in 0..a.rows() {
        let ai = a.row(i);
        let mut row = 0.0;
        for j in 0..b.rows() {
            let bj = b.row(j);
            let mut r2 = 0.0;
            for ((d, p), q) in diff.iter_mut().zip(ai).zip(bj) {
                *d = p - q;
                r2 += *d * *d;
            }
            let r = r2.sqrt();
            row += kernel.value(r);
            if r > 0.0 {
                let c = scale * kernel.grad_factor(r);
                for (o, d) in out_a.row_mut(i).iter_mut().zip(&diff) {
                    *o += c * d;
                }
                if let Some(ob) = out_b.as_deref_mut() {
                    for (o, d) in ob.row_mut(j).iter_mut().zip(&diff) {
                        *o -= c * d;
                    }
                }
            }
        }
        total += row;
    }
    total
}

/// [`eieg_estimate`] together with its gradients with respect to both
/// batches, sharing one distance computation per pair.
pub fn eieg_value_and_grads<K: RadialKernel + ?Sized>(
    x: &SampleBatch,
    y: &SampleBatch,
    kernel: &K,
) -> Result<(f64, SampleBatch, SampleBatch)> {
    x.ensure_dim(y.dim())?;
    let n = x.rows() as f64;
    let m = y.rows() as f64;
    let mut gx = SampleBatch::zeros(x.rows(), x.dim());
    let mut gy = SampleBatch::zeros(y.rows(), y.dim());
    let xx = self_pass(x, kernel, 2.0 / (n * n), &mut gx);
    let yy = self_pass(y, kernel, 2.0 / (m * m), &mut gy);
    let xy = cross_pass(x, y, kernel, -2.0 / (n * m), &mut gx, Some(&mut gy));
    Ok((xx / (n * n) + yy / (m * m) - 2.0 * xy / (n * m), gx, gy))
}

/// [`generator_loss`] and [`generator_loss_grad`] in one pass.
pub fn generator_loss_and_grad<K: RadialKernel + ?Sized>(
    x: &SampleBatch,
    g: &SampleBatch,
    kernel: &K,
    self_interaction: bool,
) -> Result<(f64, SampleBatch)> {
    x.ensure_dim(g.dim())?;
    let n = x.rows() as f64;
    let m = g.rows() as f64;
    let mut out = SampleBatch::zeros(g.rows(), g.dim());
    let gg = if self_interaction {
        self_pass(g, kernel, 2.0 / (m * m), &mut out) / (m * m)
    } else {
        0.0
    };
    let xg = cross_pass(g, x, kernel, -2.0 / (n * m), &mut out, None);
    Ok((gg - 2.0 * xg / (n * m), out))
}

/// `exp(-r^2 / bandwidth)`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianKernel {
    pub bandwidth: f64,
}

impl RadialKernel for GaussianKernel {
    fn value(&self, r: f64) -> f64 {
        (-r * r / self.bandwidth).exp()
    }
    fn derivative(&self, r: f64) -> f64 {
        -2.0 * r / self.bandwidth * self.value(r)
    }
    fn grad_factor(&self, r: f64) -> f64 {
        -2.0 / self.bandwidth * self.value(r)
    }
}

/// Biased (V-statistic) squared MMD under a Gaussian kernel.
pub fn mmd_gaussian(x: &SampleBatch, y: &SampleBatch, bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(crate::Error::InvalidConfig(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    eieg_estimate(x, y, &GaussianKernel { bandwidth })
}
