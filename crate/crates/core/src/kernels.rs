//! Cutoff elastic-interaction kernels.
//!
//! The elastic kernel of exponent dimension `n` is `1/r^(n-1)` outside the
//! cutoff `R` and the polynomial cap `((n+1)/n R^n - r^n/n) / R^(2n-1)`
//! inside it. The cap matches the outer branch at `r = R`, is finite at the
//! origin and has a gradient that vanishes as `r -> 0`. The stabilizer uses the
//! same construction with a steeper order `m > n`.
//!
//! The radius is always the Euclidean distance between the two points; the
//! exponent dimension is configuration and is not inferred from the points.

use serde::{Deserialize, Serialize};

use crate::batch::euclidean;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// Exponent dimension `n` in `1/r^(n-1)`.
    pub dim_n: u32,
    /// Cutoff radius `R`.
    pub cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizerConfig {
    /// Stabilizer order `m`; must exceed the paired kernel's `dim_n`.
    pub order_m: u32,
    pub cutoff: f64,
    /// Weight `eps`; zero disables the stabilizer.
    pub weight: f64,
}

impl KernelConfig {
    pub fn new(dim_n: u32, cutoff: f64) -> Result<Self> {
        let cfg = Self { dim_n, cutoff };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim_n < 2 {
            return Err(Error::InvalidConfig(format!(
                "kernel dim_n must be >= 2, got {}",
                self.dim_n
            )));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kernel cutoff must be positive, got {}",
                self.cutoff
            )));
        }
        Ok(())
    }
}

impl StabilizerConfig {
    pub fn new(order_m: u32, cutoff: f64, weight: f64) -> Result<Self> {
        let cfg = Self {
            order_m,
            cutoff,
            weight,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order_m < 2 {
            return Err(Error::InvalidConfig(format!(
                "stabilizer order_m must be >= 2, got {}",
                self.order_m
            )));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "stabilizer cutoff must be positive, got {}",
                self.cutoff
            )));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "stabilizer weight must be >= 0, got {}",
                self.weight
            )));
        }
        Ok(())
    }

    pub fn validate_against(&self, kernel: &KernelConfig) -> Result<()> {
        self.validate()?;
        if self.order_m <= kernel.dim_n {
            return Err(Error::InvalidConfig(format!(
                "stabilizer order_m ({}) must exceed kernel dim_n ({})",
                self.order_m, kernel.dim_n
            )));
        }
        Ok(())
    }
}

/// A radially symmetric pair kernel `k(x, y) = f(|x - y|)`.
pub trait RadialKernel: Sync {
    fn value(&self, r: f64) -> f64;

    /// `f'(r)`.
    fn derivative(&self, r: f64) -> f64;

    /// `f'(r) / r`, extended continuously to `r = 0`. Multiplying by `x - y`
    /// gives the gradient with respect to `x`.
    fn grad_factor(&self, r: f64) -> f64;

    #[inline]
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.value(euclidean(x, y))
    }

    /// Adds `scale * grad_x k(x, y)` into `out`.
    #[inline]
    fn accumulate_grad(&self, x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
        let r = euclidean(x, y);
        if r == 0.0 {
            return;
        }
        let c = scale * self.grad_factor(r);
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o += c * (a - b);
        }
    }

    fn grad(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.accumulate_grad(x, y, 1.0, &mut out);
        out
    }
}

/// Shared evaluation of the capped power law of order `p` and cutoff `c`.
#[derive(Debug, Clone, Copy)]
struct CappedPower {
    p: i32,
    cutoff: f64,
    // R^(2p-1), R^p
    denom: f64,
    cutoff_p: f64,
}

impl CappedPower {
    fn new(p: u32, cutoff: f64) -> Self {
        let p = p as i32;
        Self {
            p,
            cutoff,
            denom: cutoff.powi(2 * p - 1),
            cutoff_p: cutoff.powi(p),
        }
    }

    #[inline]
    fn value(&self, r: f64) -> f64 {
        let p = self.p as f64;
        if r > self.cutoff {
            1.0 / upow(r, self.p - 1)
        } else {
            ((p + 1.0) / p * self.cutoff_p - upow(r, self.p) / p) / self.denom
        }
    }

    #[inline]
    fn derivative(&self, r: f64) -> f64 {
        if r > self.cutoff {
            -((self.p - 1) as f64) / upow(r, self.p)
        } else {
            -upow(r, self.p - 1) / self.denom
        }
    }

    #[inline]
    fn grad_factor(&self, r: f64) -> f64 {
        if r > self.cutoff {
            -((self.p - 1) as f64) / upow(r, self.p + 1)
        } else {
            -upow(r, self.p - 2) / self.denom
        }
    }
}

// `r^k` for small nonnegative `k`; the generic `powi` goes through a libcall
// that dominates the pairwise loops.
#[inline(always)]
fn upow(r: f64, k: i32) -> f64 {
    match k {
        0 => 1.0,
        1 => r,
        2 => r * r,
        3 => r * r * r,
        4 => {
            let q = r * r;
            q * q
        }
        _ => r.powi(k),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ElasticKernel {
    cfg: KernelConfig,
    power: CappedPower,
}

impl ElasticKernel {
    pub fn new(cfg: KernelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            power: CappedPower::new(cfg.dim_n, cfg.cutoff),
        })
    }

    pub fn config(&self) -> KernelConfig {
        self.cfg
    }
}

impl RadialKernel for ElasticKernel {
    #[inline]
    fn value(&self, r: f64) -> f64 {
        self.power.value(r)
    }
    #[inline]
    fn derivative(&self, r: f64) -> f64 {
        self.power.derivative(r)
    }
    #[inline]
    fn grad_factor(&self, r: f64) -> f64 {
        self.power.grad_factor(r)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StabilizerKernel {
    cfg: StabilizerConfig,
    power: CappedPower,
}

impl StabilizerKernel {
    pub fn new(cfg: StabilizerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            power: CappedPower::new(cfg.order_m, cfg.cutoff),
        })
    }

    pub fn config(&self) -> StabilizerConfig {
        self.cfg
    }
}

impl RadialKernel for StabilizerKernel {
    #[inline]
    fn value(&self, r: f64) -> f64 {
        self.power.value(r)
    }
    #[inline]
    fn derivative(&self, r: f64) -> f64 {
        self.power.derivative(r)
    }
    #[inline]
    fn grad_factor(&self, r: f64) -> f64 {
        self.power.grad_factor(r)
    }
}

/// `e(r) - eps * e_s(r)`, the discriminator's kernel.
#[derive(Debug, Clone, Copy)]
pub struct CombinedKernel {
    elastic: ElasticKernel,
    stabilizer: StabilizerKernel,
    weight: f64,
}

impl CombinedKernel {
    pub fn new(kernel: KernelConfig, stabilizer: StabilizerConfig) -> Result<Self> {
        stabilizer.validate_against(&kernel)?;
        Ok(Self {
            elastic: ElasticKernel::new(kernel)?,
            stabilizer: StabilizerKernel::new(stabilizer)?,
            weight: stabilizer.weight,
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl RadialKernel for CombinedKernel {
    #[inline]
    fn value(&self, r: f64) -> f64 {
        let e = self.elastic.value(r);
        if self.weight == 0.0 {
            return e;
        }
        e - self.weight * self.stabilizer.value(r)
    }
    #[inline]
    fn derivative(&self, r: f64) -> f64 {
        let d = self.elastic.derivative(r);
        if self.weight == 0.0 {
            return d;
        }
        d - self.weight * self.stabilizer.derivative(r)
    }
    #[inline]
    fn grad_factor(&self, r: f64) -> f64 {
        let g = self.elastic.grad_factor(r);
        if self.weight == 0.0 {
            return g;
        }
        g - self.weight * self.stabilizer.grad_factor(r)
    }
}

pub fn elastic_kernel(cfg: &KernelConfig, r: f64) -> f64 {
    CappedPower::new(cfg.dim_n, cfg.cutoff).value(r)
}

/// Gradient of `e(|x - y|)` with respect to `x`; zero at `x = y`.
pub fn elastic_kernel_grad(cfg: &KernelConfig, x: &[f64], y: &[f64]) -> Vec<f64> {
    let k = ElasticKernel {
        cfg: *cfg,
        power: CappedPower::new(cfg.dim_n, cfg.cutoff),
    };
    k.grad(x, y)
}

pub fn stabilizer_kernel(cfg: &StabilizerConfig, r: f64) -> f64 {
    CappedPower::new(cfg.order_m, cfg.cutoff).value(r)
}

pub fn combined_kernel(kernel: &KernelConfig, stabilizer: &StabilizerConfig, r: f64) -> f64 {
    elastic_kernel(kernel, r) - stabilizer.weight * stabilizer_kernel(stabilizer, r)
}

pub fn combined_kernel_grad(
    kernel: &KernelConfig,
    stabilizer: &StabilizerConfig,
    x: &[f64],
    y: &[f64],
) -> Vec<f64> {
    let e = CappedPower::new(kernel.dim_n, kernel.cutoff);
    let s = CappedPower::new(stabilizer.order_m, stabilizer.cutoff);
    let r = euclidean(x, y);
    if r == 0.0 {
        return vec![0.0; x.len()];
    }
    let c = e.grad_factor(r) - stabilizer.weight * s.grad_factor(r);
    x.iter().zip(y).map(|(a, b)| c * (a - b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k(n: u32, r: f64) -> KernelConfig {
        KernelConfig::new(n, r).unwrap()
    }

    fn s(m: u32, r: f64, w: f64) -> StabilizerConfig {
        StabilizerConfig::new(m, r, w).unwrap()
    }

    #[test]
    fn elastic_examples() {
        assert_relative_eq!(elastic_kernel(&k(2, 0.1), 0.5), 2.0, max_relative = 1e-15);
        assert_relative_eq!(elastic_kernel(&k(2, 0.1), 0.0), 15.0, max_relative = 1e-14);
        assert_relative_eq!(elastic_kernel(&k(2, 0.1), 0.1), 10.0, max_relative = 1e-14);
        assert!((elastic_kernel(&k(3, 0.5), 0.25) - 5.1666667).abs() < 1e-6);
    }

    #[test]
    fn cutoff_continuity() {
        for n in 2..=8 {
            for &r in &[0.05, 0.1, 0.5, 0.8, 1.0, 2.0] {
                let p = CappedPower::new(n, r);
                let outer = r.powi(-(n as i32 - 1));
                assert!((p.value(r) - outer).abs() < 1e-12 * outer.max(1.0));
            }
        }
    }

    #[test]
    fn c1_at_cutoff_for_n2() {
        let p = CappedPower::new(2, 0.3);
        let inner = p.derivative(0.3);
        let outer = -1.0 / (0.3 * 0.3);
        assert!((inner - outer).abs() < 1e-12);
    }

    #[test]
    fn stabilizer_examples() {
        let cfg = s(3, 0.8, 1.0);
        assert_relative_eq!(stabilizer_kernel(&cfg, 1.0), 1.0, max_relative = 1e-15);
        assert!((stabilizer_kernel(&cfg, 0.0) - 2.0833333).abs() < 1e-6);
        assert_relative_eq!(stabilizer_kernel(&cfg, 0.8), 1.5625, max_relative = 1e-14);
    }

    #[test]
    fn combined_examples() {
        let kc = k(2, 0.1);
        let sc = s(3, 0.8, 1.0);
        assert_eq!(combined_kernel(&kc, &sc, 1.0), 0.0);
        assert!((combined_kernel(&kc, &sc, 0.0) - 12.9166667).abs() < 1e-6);
        let off = s(3, 0.8, 0.0);
        for &r in &[0.0, 0.05, 0.1, 0.7, 3.0] {
            assert_eq!(combined_kernel(&kc, &off, r), elastic_kernel(&kc, r));
        }
    }

    #[test]
    fn grad_examples() {
        let kc = k(2, 0.1);
        assert_eq!(elastic_kernel_grad(&kc, &[0.0, 0.0], &[1.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(elastic_kernel_grad(&kc, &[0.3, 0.2], &[0.3, 0.2]), vec![0.0, 0.0]);
        let sc = s(3, 0.8, 1.0);
        assert_eq!(combined_kernel_grad(&kc, &sc, &[1.0, 2.0], &[1.0, 2.0]), vec![0.0, 0.0]);
        let off = s(3, 0.8, 0.0);
        let x = [0.03, -0.01];
        let y = [0.0, 0.02];
        assert_eq!(combined_kernel_grad(&kc, &off, &x, &y), elastic_kernel_grad(&kc, &x, &y));
    }

    #[test]
    fn grad_vanishes_near_origin() {
        for n in 2..=5 {
            let kc = k(n, 0.5);
            let g = elastic_kernel_grad(&kc, &[1e-9, 0.0], &[0.0, 0.0]);
            assert!(g[0].abs() < 1e-8);
        }
    }

    #[test]
    fn pairing_rule() {
        assert!(KernelConfig::new(1, 0.1).is_err());
        assert!(KernelConfig::new(2, 0.0).is_err());
        assert!(StabilizerConfig::new(3, 0.8, -1.0).is_err());
        assert!(CombinedKernel::new(k(3, 0.1), s(3, 0.8, 1.0)).is_err());
        assert!(CombinedKernel::new(k(2, 0.1), s(3, 0.8, 1.0)).is_ok());
    }

    #[test]
    fn can_go_negative_for_large_eps() {
        let kc = k(2, 0.1);
        let sc = s(3, 0.8, 10.0);
        assert!(combined_kernel(&kc, &sc, 0.5) < 0.0);
    }
}
