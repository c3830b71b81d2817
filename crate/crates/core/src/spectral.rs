//! Pseudo-spectral stability lab on the periodic square `[-1, 1]^2`.
//!
//! Transform convention, used everywhere in this module: for an `nx x ny`
//! grid with nodes `x_i = -1 + 2 i / nx`, the coefficient of integer mode
//! `k = (kx, ky)` is `c_k = (1 / (nx ny)) sum_j v_j exp(-2 pi i (kx i/nx + ky j/ny))`,
//! i.e. the unnormalised forward DFT divided by the number of nodes. The
//! physical frequency of mode `k` is `xi = pi k`, so the smallest nonzero
//! `|xi|` is `pi`. Indices `k >= n/2` stand for `k - n`. With this
//! convention `a cos(pi x)` has `c_(+-1,0) = a/2`, and the reported
//! amplitude of a nonzero mode is `2 |c_k|`.
//!
//! Density evolution is `dP/dt = s div(P grad psi)` with
//! `psi = K (P - C)` for a Fourier multiplier `K(|xi|)`: `1/|xi|` for the
//! plain elastic kernel and `1/|xi| - eps |xi|` with the stabilizer. The sign
//! `s` is `+1` for the generator (energy descent) and `-1` for the
//! discriminator (ascent). Linearised about the constant `C`, mode `xi` then
//! grows at `-s C |xi|^2 K(|xi|)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowKind {
    Generator,
    DiscriminatorRaw,
    DiscriminatorStabilized { epsilon: f64 },
}

impl FlowKind {
    pub fn name(&self) -> &'static str {
        match self {
            FlowKind::Generator => "generator",
            FlowKind::DiscriminatorRaw => "discriminator_raw",
            FlowKind::DiscriminatorStabilized { .. } => "discriminator_stabilized",
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            FlowKind::DiscriminatorStabilized { epsilon } => *epsilon,
            _ => 0.0,
        }
    }

    /// `K(|xi|)`; zero at the origin.
    pub fn multiplier(&self, xi: f64) -> f64 {
        if xi == 0.0 {
            return 0.0;
        }
        match self {
            FlowKind::Generator | FlowKind::DiscriminatorRaw => 1.0 / xi,
            FlowKind::DiscriminatorStabilized { epsilon } => 1.0 / xi - epsilon * xi,
        }
    }

    fn sign(&self) -> f64 {
        match self {
            FlowKind::Generator => 1.0,
            _ => -1.0,
        }
    }
}

/// Linear growth rate of mode `|xi|` about the constant density `c`.
pub fn predicted_rate(kind: FlowKind, c: f64, xi: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    match kind {
        FlowKind::Generator => -c * xi,
        FlowKind::DiscriminatorRaw => c * xi,
        FlowKind::DiscriminatorStabilized { epsilon } => c * (1.0 - epsilon * xi * xi) * xi,
    }
}

/// Smallest stabilizer weight for which every nonzero mode of the unit
/// periodic square decays: `1 / pi^2`.
pub fn critical_epsilon() -> f64 {
    1.0 / (PI * PI)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    nx: usize,
    ny: usize,
    /// Row-major, `values[j * nx + i]` at `(x_i, y_j)`.
    values: Vec<f64>,
    mean_level: f64,
}

impl GridField {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if !nx.is_power_of_two() || !ny.is_power_of_two() || nx < 2 || ny < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid resolution must be powers of two >= 2, got {nx}x{ny}"
            )));
        }
        if values.len() != nx * ny {
            return Err(Error::Shape(format!(
                "{} values for a {nx}x{ny} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "grid field".into(),
                step: 0,
            });
        }
        let mean_level = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self {
            nx,
            ny,
            values,
            mean_level,
        })
    }

    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(node(i, nx), node(j, ny)));
            }
        }
        Self::new(nx, ny, values)
    }

    pub fn constant(nx: usize, ny: usize, c: f64) -> Result<Self> {
        Self::from_fn(nx, ny, |_, _| c)
    }

    /// `c + a cos(pi (kx x + ky y))`.
    pub fn perturbed(nx: usize, ny: usize, c: f64, a: f64, mode: (i32, i32)) -> Result<Self> {
        let (kx, ky) = (mode.0 as f64, mode.1 as f64);
        Self::from_fn(nx, ny, |x, y| c + a * (PI * (kx * x + ky * y)).cos())
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Mean recorded at construction; evolution preserves it.
    pub fn mean_level(&self) -> f64 {
        self.mean_level
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

#[inline]
fn node(i: usize, n: usize) -> f64 {
    -1.0 + 2.0 * i as f64 / n as f64
}

/// Signed integer wavenumber of DFT index `i`.
#[inline]
fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Planned 2D transforms for one resolution.
pub struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    column: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
            column: vec![Complex64::new(0.0, 0.0); ny],
        }
    }

    fn columns(&mut self, data: &mut [Complex64], inverse: bool) {
        let (nx, ny) = (self.nx, self.ny);
        let plan = if inverse { &self.inv_y } else { &self.fwd_y };
        for i in 0..nx {
            for j in 0..ny {
                self.column[j] = data[j * nx + i];
            }
            plan.process(&mut self.column);
            for j in 0..ny {
                data[j * nx + i] = self.column[j];
            }
        }
    }

    /// Normalised coefficients `c_k` of a real field.
    pub fn forward(&mut self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut data);
        data
    }

    pub fn forward_in_place(&mut self, data: &mut [Complex64]) {
        for row in data.chunks_exact_mut(self.nx) {
            self.fwd_x.process(row);
        }
        self.columns(data, false);
        let scale = 1.0 / (self.nx * self.ny) as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    /// Real part of the synthesis `sum_k c_k exp(...)`.
    pub fn inverse(&mut self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        for row in data.chunks_exact_mut(self.nx) {
            self.inv_x.process(row);
        }
        self.columns(&mut data, true);
        data.iter().map(|c| c.re).collect()
    }

    /// `(xi_x, xi_y)` of coefficient index `idx`.
    #[inline]
    pub fn frequency(&self, idx: usize) -> (f64, f64) {
        let (i, j) = (idx % self.nx, idx / self.nx);
        (
            PI * wavenumber(i, self.nx) as f64,
            PI * wavenumber(j, self.ny) as f64,
        )
    }

    #[inline]
    fn modes(&self, idx: usize) -> (i64, i64) {
        (wavenumber(idx % self.nx, self.nx), wavenumber(idx / self.nx, self.ny))
    }

    fn index_of(&self, kx: i64, ky: i64) -> usize {
        let i = kx.rem_euclid(self.nx as i64) as usize;
        let j = ky.rem_euclid(self.ny as i64) as usize;
        j * self.nx + i
    }
}

/// Applies the radial multiplier `m(|xi|)` to a field; the mean mode is
/// always dropped.
pub fn apply_multiplier(field: &GridField, m: impl Fn(f64) -> f64) -> Result<GridField> {
    let (nx, ny) = field.resolution();
    let mut fft = Fft2::new(nx, ny);
    let mut c = fft.forward(field.values());
    for (idx, v) in c.iter_mut().enumerate() {
        let (fx, fy) = fft.frequency(idx);
        let xi = fx.hypot(fy);
        *v = if xi == 0.0 { Complex64::new(0.0, 0.0) } else { *v * m(xi) };
    }
    GridField::new(nx, ny, fft.inverse(&c))
}

/// Potential of the `1/|xi|` multiplier with the mean removed.
pub fn riesz_potential(field: &GridField) -> Result<GridField> {
    apply_multiplier(field, |xi| 1.0 / xi)
}

/// `sum_{xi != 0} |c_k|^2 / |xi|` under the module's transform convention.
/// For `a cos(pi x)` this is `a^2 / (2 pi)`.
pub fn semi_h_minus_half_norm_sq(field: &GridField) -> f64 {
    let (nx, ny) = field.resolution();
    let mut fft = Fft2::new(nx, ny);
    let c = fft.forward(field.values());
    c.iter()
        .enumerate()
        .map(|(idx, v)| {
            let (fx, fy) = fft.frequency(idx);
            let xi = fx.hypot(fy);
            if xi == 0.0 {
                0.0
            } else {
                v.norm_sqr() / xi
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSample {
    pub step: usize,
    pub time: f64,
    pub kx: i32,
    pub ky: i32,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub dt: f64,
    pub steps: usize,
    /// Modes with `|kx| > max_mode` or `|ky| > max_mode` are zeroed after
    /// every step (Galerkin truncation); this keeps explicit Euler usable for
    /// the stiff stabilized flow.
    pub max_mode: usize,
    pub record_every: usize,
    pub tracked_modes: Vec<(i32, i32)>,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub field: GridField,
    pub history: Vec<AmplitudeSample>,
    /// Normalised mean coefficient at the start and end.
    pub mean_start: f64,
    pub mean_end: f64,
    /// Whether the density dipped below zero at some recorded step.
    pub went_negative: bool,
}

impl Evolution {
    /// Columns `step,time,k_x,k_y,amplitude`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("step,time,k_x,k_y,amplitude\n");
        for a in &self.history {
            s.push_str(&format!(
                "{},{:?},{},{},{:?}\n",
                a.step, a.time, a.kx, a.ky, a.amplitude
            ));
        }
        s
    }

    pub fn mode_series(&self, mode: (i32, i32)) -> Vec<(f64, f64)> {
        self.history
            .iter()
            .filter(|a| (a.kx, a.ky) == mode)
            .map(|a| (a.time, a.amplitude))
            .collect()
    }
}

/// Largest `|rate|` over the modes kept by truncation at `max_mode`.
pub fn max_retained_rate(kind: FlowKind, c: f64, max_mode: usize) -> f64 {
    let m = max_mode as i64;
    let mut best = 0.0_f64;
    for kx in -m..=m {
        for ky in -m..=m {
            let xi = PI * ((kx * kx + ky * ky) as f64).sqrt();
            best = best.max(predicted_rate(kind, c, xi).abs());
        }
    }
    best
}

/// Step size keeping `|rate| dt` at `0.05` for the fastest retained mode.
pub fn default_dt(kind: FlowKind, c: f64, max_mode: usize) -> f64 {
    0.5 * (0.1 / max_retained_rate(kind, c, max_mode))
}

/// Explicit Euler evolution of `field` under `kind`.
///
/// The state is advanced in coefficient space, and the divergence has no
/// mean component, so the mean mode is carried through untouched.
pub fn evolve(field: &GridField, kind: FlowKind, cfg: &EvolveConfig) -> Result<Evolution> {
    if !(cfg.dt > 0.0) || cfg.record_every == 0 {
        return Err(Error::InvalidConfig(
            "evolve needs dt > 0 and record_every > 0".into(),
        ));
    }
    let (nx, ny) = field.resolution();
    if cfg.max_mode >= nx.min(ny) / 2 {
        return Err(Error::InvalidConfig(format!(
            "max_mode {} must be below the Nyquist index {}",
            cfg.max_mode,
            nx.min(ny) / 2
        )));
    }
    let mut fft = Fft2::new(nx, ny);
    let n = nx * ny;
    let keep: Vec<bool> = (0..n)
        .map(|idx| {
            let (kx, ky) = fft.modes(idx);
            kx.unsigned_abs() as usize <= cfg.max_mode && ky.unsigned_abs() as usize <= cfg.max_mode
        })
        .collect();
    let freq: Vec<(f64, f64)> = (0..n).map(|idx| fft.frequency(idx)).collect();
    let mult: Vec<f64> = freq
        .iter()
        .map(|&(fx, fy)| kind.multiplier(fx.hypot(fy)))
        .collect();
    let tracked: Vec<(i32, i32, usize)> = cfg
        .tracked_modes
        .iter()
        .map(|&(kx, ky)| (kx, ky, fft.index_of(kx as i64, ky as i64)))
        .collect();

    let mut coeffs = fft.forward(field.values());
    for (c, &k) in coeffs.iter_mut().zip(&keep) {
        if !k {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    let mean_start = coeffs[0].re;
    let sign = kind.sign();
    let zero = Complex64::new(0.0, 0.0);
    let i_unit = Complex64::new(0.0, 1.0);

    let mut history = Vec::new();
    let mut went_negative = false;
    let record = |step: usize, coeffs: &[Complex64], history: &mut Vec<AmplitudeSample>| {
        for &(kx, ky, idx) in &tracked {
            let scale = if idx == 0 { 1.0 } else { 2.0 };
            history.push(AmplitudeSample {
                step,
                time: step as f64 * cfg.dt,
                kx,
                ky,
                amplitude: scale * coeffs[idx].norm(),
            });
        }
    };
    record(0, &coeffs, &mut history);

    let mut gx = vec![zero; n];
    let mut gy = vec![zero; n];
    for step in 1..=cfg.steps {
        let density = fft.inverse(&coeffs);
        for idx in 0..n {
            let (fx, fy) = freq[idx];
            let psi = coeffs[idx] * mult[idx];
            gx[idx] = i_unit * fx * psi;
            gy[idx] = i_unit * fy * psi;
        }
        let psi_x = fft.inverse(&gx);
        let psi_y = fft.inverse(&gy);
        for idx in 0..n {
            gx[idx] = Complex64::new(density[idx] * psi_x[idx], 0.0);
            gy[idx] = Complex64::new(density[idx] * psi_y[idx], 0.0);
        }
        fft.forward_in_place(&mut gx);
        fft.forward_in_place(&mut gy);
        for idx in 1..n {
            if !keep[idx] {
                continue;
            }
            let (fx, fy) = freq[idx];
            let div = i_unit * (gx[idx] * fx + gy[idx] * fy);
            coeffs[idx] += div * (sign * cfg.dt);
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite {
                what: "spectral density".into(),
                step,
            });
        }
        if step % cfg.record_every == 0 || step == cfg.steps {
            record(step, &coeffs, &mut history);
            if density.iter().any(|&v| v < 0.0) {
                if !went_negative {
                    log::warn!("density went negative at step {step}; outside the linear regime");
                }
                went_negative = true;
            }
        }
    }
    let mean_end = coeffs[0].re;
    let field = GridField::new(nx, ny, fft.inverse(&coeffs))?;
    Ok(Evolution {
        field,
        history,
        mean_start,
        mean_end,
        went_negative,
    })
}

/// Which part of an amplitude history enters the growth-rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_min: f64,
    pub t_max: f64,
    /// Samples at or above this amplitude are excluded (linear regime).
    pub max_amplitude: f64,
    /// Samples at or below this amplitude are excluded (underflow).
    pub min_amplitude: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self {
            t_min: 0.0,
            t_max: f64::INFINITY,
            max_amplitude: f64::INFINITY,
            min_amplitude: 1e-250,
        }
    }
}

/// Least-squares slope of `ln(amplitude)` against time inside `window`.
pub fn measure_growth_rate(history: &[(f64, f64)], window: FitWindow) -> Result<f64> {
    let pts: Vec<(f64, f64)> = history
        .iter()
        .filter(|(t, a)| {
            *t >= window.t_min
                && *t <= window.t_max
                && *a > window.min_amplitude
                && *a < window.max_amplitude
                && a.is_finite()
        })
        .map(|&(t, a)| (t, a.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "growth-rate fit needs at least 2 samples in the window, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("fit window spans zero time".into()));
    }
    Ok(sxy / sxx)
}

/// One growth-rate measurement: evolve a single-mode perturbation of the
/// constant `c` and compare the fitted rate with [`predicted_rate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateProbe {
    pub resolution: usize,
    pub mean_level: f64,
    pub amplitude: f64,
    pub mode: (i32, i32),
    pub max_mode: usize,
    /// Growing modes are fitted only below this amplitude.
    pub linear_ceiling: f64,
    /// Decaying modes are followed for this many e-foldings.
    pub e_foldings: f64,
    pub samples: usize,
    /// Near-marginal modes would otherwise need an unbounded horizon.
    pub max_steps: usize,
}

impl Default for RateProbe {
    fn default() -> Self {
        Self {
            resolution: 64,
            mean_level: 1.0,
            amplitude: 1e-3,
            mode: (1, 0),
            max_mode: 4,
            linear_ceiling: 1e-2,
            e_foldings: 3.0,
            samples: 200,
            max_steps: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub flow_kind: String,
    pub epsilon: f64,
    pub k_x: i32,
    pub k_y: i32,
    pub xi: f64,
    pub measured_rate: f64,
    pub predicted_rate: f64,
    pub measured_rate_over_c: f64,
    pub predicted_rate_over_c: f64,
    pub rel_err: f64,
    pub mean_drift: f64,
    pub dt: f64,
    pub steps: usize,
}

impl RateProbe {
    pub fn xi(&self) -> f64 {
        PI * ((self.mode.0 * self.mode.0 + self.mode.1 * self.mode.1) as f64).sqrt()
    }

    pub fn run(&self, kind: FlowKind) -> Result<(RateReport, Evolution)> {
        let c = self.mean_level;
        let xi = self.xi();
        let predicted = predicted_rate(kind, c, xi);
        let dt = default_dt(kind, c, self.max_mode);
        let horizon = if predicted > 0.0 {
            (self.linear_ceiling / self.amplitude).ln() / predicted
        } else if predicted < 0.0 {
            self.e_foldings / predicted.abs()
        } else {
            1.0
        };
        let steps = ((horizon / dt).ceil() as usize)
            .min(self.max_steps)
            .max(self.samples);
        let cfg = EvolveConfig {
            dt,
            steps,
            max_mode: self.max_mode,
            record_every: (steps / self.samples).max(1),
            tracked_modes: vec![self.mode],
        };
        let field = GridField::perturbed(
            self.resolution,
            self.resolution,
            c,
            self.amplitude,
            self.mode,
        )?;
        let evo = evolve(&field, kind, &cfg)?;
        let window = FitWindow {
            max_amplitude: self.linear_ceiling,
            ..FitWindow::default()
        };
        let measured = measure_growth_rate(&evo.mode_series(self.mode), window)?;
        let rel_err = if predicted == 0.0 {
            measured.abs()
        } else {
            ((measured - predicted) / predicted).abs()
        };
        let report = RateReport {
            flow_kind: kind.name().to_string(),
            epsilon: kind.epsilon(),
            k_x: self.mode.0,
            k_y: self.mode.1,
            xi,
            measured_rate: measured,
            predicted_rate: predicted,
            measured_rate_over_c: measured / c,
            predicted_rate_over_c: predicted / c,
            rel_err,
            mean_drift: (evo.mean_end - evo.mean_start).abs(),
            dt,
            steps,
        };
        Ok((report, evo))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicted_rate_examples() {
        let stab = FlowKind::DiscriminatorStabilized { epsilon: 1.0 };
        assert!((predicted_rate(stab, 1.0, PI) - (1.0 - PI * PI) * PI).abs() < 1e-12);
        assert!((predicted_rate(stab, 1.0, PI) + 27.8646).abs() < 1e-4);
        assert!((predicted_rate(FlowKind::Generator, 1.0, PI) + PI).abs() < 1e-15);
        assert_eq!(predicted_rate(FlowKind::DiscriminatorRaw, 1.0, 0.0), 0.0);
        let xi = 2.0 * PI;
        let marginal = FlowKind::DiscriminatorStabilized {
            epsilon: 1.0 / (xi * xi),
        };
        assert!(predicted_rate(marginal, 1.0, xi).abs() < 1e-12);
    }

    #[test]
    fn critical_epsilon_brackets() {
        assert!((critical_epsilon() - 0.101321).abs() < 1e-6);
        let above = FlowKind::DiscriminatorStabilized { epsilon: 0.2 };
        for kx in 0..8i32 {
            for ky in 0..8i32 {
                if kx == 0 && ky == 0 {
                    continue;
                }
                let xi = PI * ((kx * kx + ky * ky) as f64).sqrt();
                assert!(predicted_rate(above, 1.0, xi) < 0.0);
            }
        }
        let below = FlowKind::DiscriminatorStabilized { epsilon: 0.05 };
        assert!(predicted_rate(below, 1.0, PI) > 0.0);
    }

    #[test]
    fn constant_field_has_zero_potential() {
        let f = GridField::constant(16, 16, 2.5).unwrap();
        let p = riesz_potential(&f).unwrap();
        assert!(p.values().iter().all(|v| v.abs() < 1e-14));
        assert_eq!(semi_h_minus_half_norm_sq(&f), 0.0);
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        let f = GridField::perturbed(32, 32, 0.0, 1.0, (1, 0)).unwrap();
        let p = riesz_potential(&f).unwrap();
        for (a, b) in p.values().iter().zip(f.values()) {
            assert!((a - b / PI).abs() < 1e-14);
        }
    }

    #[test]
    fn cosine_norm_matches_convention() {
        let a = 0.7;
        let f = GridField::perturbed(32, 16, 3.0, a, (1, 0)).unwrap();
        let v = semi_h_minus_half_norm_sq(&f);
        assert!((v - a * a / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn resolution_must_be_power_of_two() {
        assert!(GridField::constant(12, 16, 1.0).is_err());
    }

    #[test]
    fn constant_field_is_an_equilibrium() {
        let f = GridField::constant(16, 16, 1.0).unwrap();
        let cfg = EvolveConfig {
            dt: 1e-3,
            steps: 50,
            max_mode: 4,
            record_every: 10,
            tracked_modes: vec![(1, 0)],
        };
        for kind in [
            FlowKind::Generator,
            FlowKind::DiscriminatorRaw,
            FlowKind::DiscriminatorStabilized { epsilon: 1.0 },
        ] {
            let e = evolve(&f, kind, &cfg).unwrap();
            for (a, b) in e.field.values().iter().zip(f.values()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fit_examples() {
        let lambda = -2.75;
        let h: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.01;
                (t, 3.0 * (lambda * t).exp())
            })
            .collect();
        assert!((measure_growth_rate(&h, FitWindow::default()).unwrap() - lambda).abs() < 1e-6);
        let flat: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.5)).collect();
        assert_eq!(measure_growth_rate(&flat, FitWindow::default()).unwrap(), 0.0);
        let underflow = vec![(0.0, 1.0), (1.0, 0.0), (2.0, 0.0)];
        assert!(measure_growth_rate(&underflow, FitWindow::default()).is_err());
    }
}
