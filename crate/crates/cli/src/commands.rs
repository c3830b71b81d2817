use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use eieg_core::datasets::{sample, MixtureSpec};
use eieg_core::evalmetrics::{kde_grid, mode_coverage, silverman_bandwidth, GridExtent, KdeGrid};
use eieg_core::flow::{initial_particles, run_flow};
use eieg_core::kernels::{CombinedKernel, ElasticKernel, RadialKernel, StabilizerKernel};
use eieg_core::rng::Stream;
use eieg_core::spectral::RateReport;
use eieg_core::trainer::{generate, train_gan, TrainHistory};
use eieg_core::{SampleBatch, SeededRng};
use log::info;
use serde::Serialize;

use crate::config::{self, EvalFile, FlowFile, KernelProbeFile, Preset, SpectralFile, TrainFile};
use crate::svg::{self, Series};
use crate::Failure;

/// Points drawn from the target for plots.
const PLOT_DATA_POINTS: usize = 1000;

pub struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        info!("wrote {}", path.display());
        Ok(())
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }
}

#[derive(Serialize)]
struct Echo<'a, T> {
    command: &'a str,
    config: &'a T,
}

fn echo<T: Serialize>(out: &Outputs, command: &str, config: &T) -> Result<(), Failure> {
    out.json("config.json", &Echo { command, config })
}

/// Header `x0..x{d-1}`, one row per sample.
pub fn batch_csv(batch: &SampleBatch) -> String {
    let mut s = (0..batch.dim()).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for row in batch.iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Inverse of [`batch_csv`]; the header line is skipped.
pub fn read_batch_csv(path: &Path) -> Result<SampleBatch, Failure> {
    let bad = |m: String| Failure::Config(format!("{}: {m}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(bad("no samples".into()));
    }
    Ok(SampleBatch::from_rows(&rows)?)
}

fn data_for_plot(spec: &MixtureSpec, seed: u64) -> Result<SampleBatch, Failure> {
    Ok(sample(spec, PLOT_DATA_POINTS, &mut SeededRng::stream(seed, Stream::Eval))?)
}

fn history_files(out: &Outputs, history: &TrainHistory) -> Result<(), Failure> {
    out.write("history.csv", &history.to_csv())?;
    if !history.snapshots.is_empty() {
        let mut s = String::from("step");
        let dim = history.snapshots[0].samples.dim();
        for k in 0..dim {
            let _ = write!(s, ",x{k}");
        }
        s.push('\n');
        for snap in &history.snapshots {
            for row in snap.samples.iter_rows() {
                let _ = write!(s, "{}", snap.step);
                for v in row {
                    let _ = write!(s, ",{v:?}");
                }
                s.push('\n');
            }
        }
        out.write("snapshots.csv", &s)?;
    }
    Ok(())
}

/// Shared body of `gan-train` and `eieg-train`.
pub fn train(command: &str, mut file: TrainFile, seed: Option<u64>, dir: &Path) -> Result<(), Failure> {
    let generator_only = command == "eieg-train";
    if generator_only {
        file.train.use_discriminator = false;
    }
    if let Some(s) = seed {
        file.train.seed = s;
    }
    let spec = file
        .dataset
        .resolve(if generator_only { Preset::TwoMode } else { Preset::Grid25 })?;
    file.train.validate(spec.dim())?;
    if file.eval.samples == 0 {
        return Err(Failure::Config("eval.samples must be positive".into()));
    }
    let out = Outputs::create(dir)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        dataset: &'a MixtureSpec,
        #[serde(flatten)]
        file: &'a TrainFile,
    }
    echo(&out, command, &Resolved { dataset: &spec, file: &file })?;

    info!(
        "{command}: {} generator steps, seed {}",
        file.train.generator_steps, file.train.seed
    );
    let outcome = match train_gan(&file.train, &spec) {
        Ok(o) => o,
        Err(abort) => {
            history_files(&out, &abort.history)?;
            return Err(Failure::Numerical(abort.to_string()));
        }
    };
    history_files(&out, &outcome.history)?;
    out.write("generator.ckpt", &outcome.generator.to_checkpoint())?;
    if let Some(d) = &outcome.discriminator {
        out.write("discriminator.ckpt", &d.to_checkpoint())?;
    }

    let samples = generate(&outcome.generator, file.eval.samples, file.train.seed)?;
    if !samples.is_finite() {
        return Err(Failure::Numerical("generated samples are not finite".into()));
    }
    out.write("samples.csv", &batch_csv(&samples))?;
    let coverage = mode_coverage(&samples, &spec, file.eval.threshold_sigmas)?;
    out.json("coverage.json", &coverage)?;
    println!(
        "modes hit {}/{}, high-quality fraction {:.3}",
        coverage.modes_hit, coverage.modes_total, coverage.high_quality_fraction
    );
    if file.eval.scatter && spec.dim() >= 2 {
        let data = data_for_plot(&spec, file.train.seed)?;
        let plot = svg::scatter(
            &format!("{command}: {}/{} modes", coverage.modes_hit, coverage.modes_total),
            &[
                Series { points: &data, color: "#1f77b4", label: "data" },
                Series { points: &samples, color: "#d62728", label: "generated" },
            ],
        );
        out.write("scatter.svg", &plot)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FlowSummary {
    initial_energy: f64,
    final_energy: f64,
    energy_ratio: f64,
    max_displacement: f64,
    steps: usize,
}

pub fn flow(mut file: FlowFile, seed: Option<u64>, dir: &Path) -> Result<(), Failure> {
    if let Some(s) = seed {
        file.flow.seed = s;
    }
    let spec = file.dataset.resolve(Preset::TwoMode)?;
    file.flow.validate()?;
    let out = Outputs::create(dir)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        dataset: &'a MixtureSpec,
        #[serde(flatten)]
        file: &'a FlowFile,
    }
    echo(&out, "flow", &Resolved { dataset: &spec, file: &file })?;

    let run = run_flow(&file.flow, initial_particles(&file.flow, spec.dim()), &spec)?;
    out.write("trajectory.csv", &run.trajectory_csv())?;
    out.write("energy.csv", &run.energy_csv())?;
    let e0 = run.energy.first().map(|e| e.1).unwrap_or(0.0);
    let e1 = run.energy.last().map(|e| e.1).unwrap_or(0.0);
    let summary = FlowSummary {
        initial_energy: e0,
        final_energy: e1,
        energy_ratio: if e0 != 0.0 { e1 / e0 } else { 0.0 },
        max_displacement: run.max_displacement,
        steps: file.flow.total_steps,
    };
    println!("energy {e0:.6} -> {e1:.6} (ratio {:.4})", summary.energy_ratio);
    out.json("summary.json", &summary)?;
    if file.scatter && spec.dim() >= 2 {
        let data = data_for_plot(&spec, file.flow.seed)?;
        let plot = svg::scatter(
            "particle flow",
            &[
                Series { points: &data, color: "#1f77b4", label: "data" },
                Series { points: &run.initial, color: "#aaaaaa", label: "initial" },
                Series { points: &run.particles, color: "#d62728", label: "final" },
            ],
        );
        out.write("scatter.svg", &plot)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectralSummary {
    reports: Vec<RateReport>,
    max_rel_err: f64,
    max_mean_drift: f64,
}

pub fn spectral(file: SpectralFile, dir: &Path) -> Result<(), Failure> {
    if file.kinds.is_empty() || file.modes.is_empty() {
        return Err(Failure::Config("spectral: `kinds` and `modes` must be non-empty".into()));
    }
    let out = Outputs::create(dir)?;
    echo(&out, "spectral", &file)?;

    let mut rates = String::from("flow_kind,epsilon,k_x,k_y,xi,measured,predicted,rel_err\n");
    let mut modes = String::from("flow_kind,epsilon,step,time,k_x,k_y,amplitude\n");
    let mut reports = Vec::new();
    for kind in &file.kinds {
        for &mode in &file.modes {
            let probe = eieg_core::spectral::RateProbe { mode, ..file.probe.clone() };
            let (r, evo) = probe.run(*kind)?;
            let _ = writeln!(
                rates,
                "{},{:?},{},{},{:?},{:?},{:?},{:?}",
                r.flow_kind, r.epsilon, r.k_x, r.k_y, r.xi, r.measured_rate, r.predicted_rate, r.rel_err
            );
            for a in &evo.history {
                let _ = writeln!(
                    modes,
                    "{},{:?},{},{:?},{},{},{:?}",
                    r.flow_kind, r.epsilon, a.step, a.time, a.kx, a.ky, a.amplitude
                );
            }
            println!(
                "{:<26} eps {:<5} mode ({},{}): measured {:>10.4} predicted {:>10.4} rel_err {:.2e}",
                r.flow_kind, r.epsilon, r.k_x, r.k_y, r.measured_rate, r.predicted_rate, r.rel_err
            );
            reports.push(r);
        }
    }
    out.write("rates.csv", &rates)?;
    out.write("modes.csv", &modes)?;
    let summary = SpectralSummary {
        max_rel_err: reports.iter().map(|r| r.rel_err).fold(0.0, f64::max),
        max_mean_drift: reports.iter().map(|r| r.mean_drift).fold(0.0, f64::max),
        reports,
    };
    out.json("summary.json", &summary)
}

fn kde_csv(grid: &KdeGrid) -> String {
    let mut s = String::from("i,j,x,y,density\n");
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let _ = writeln!(s, "{i},{j},{:?},{:?},{:?}", grid.x_center(i), grid.y_center(j), grid.at(i, j));
        }
    }
    s
}

pub fn eval(mut file: EvalFile, samples: Option<PathBuf>, dir: &Path) -> Result<(), Failure> {
    if samples.is_some() {
        file.samples = samples;
    }
    let path = file
        .samples
        .clone()
        .ok_or_else(|| Failure::Config("eval: no samples file (use --samples or `samples = ...`)".into()))?;
    let spec = file.dataset.resolve(Preset::Grid25)?;
    let batch = read_batch_csv(&path)?;
    let coverage = mode_coverage(&batch, &spec, file.threshold_sigmas)?;

    let bandwidth = file.kde.bandwidth.unwrap_or_else(|| silverman_bandwidth(&batch));
    let half_width = file.kde.half_width.unwrap_or_else(|| {
        let reach = spec.centers.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        1.25 * reach + 4.0 * spec.std
    });
    let grid = kde_grid(&batch, bandwidth, GridExtent::square(half_width), file.kde.resolution)?;

    let out = Outputs::create(dir)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        dataset: &'a MixtureSpec,
        bandwidth: f64,
        half_width: f64,
        #[serde(flatten)]
        file: &'a EvalFile,
    }
    echo(&out, "eval", &Resolved { dataset: &spec, bandwidth, half_width, file: &file })?;
    out.json("coverage.json", &coverage)?;
    out.write("kde.csv", &kde_csv(&grid))?;
    out.write("kde.svg", &svg::heatmap(&format!("KDE, bandwidth {bandwidth:.4}"), &grid))?;
    println!(
        "modes hit {}/{}, high-quality fraction {:.3}",
        coverage.modes_hit, coverage.modes_total, coverage.high_quality_fraction
    );
    Ok(())
}

/// Value and radial derivative of the three kernels at each radius.
pub fn kernel_probe_table(file: &KernelProbeFile) -> Result<String, Failure> {
    let elastic = ElasticKernel::new(file.kernel)?;
    let stabilizer = StabilizerKernel::new(file.stabilizer)?;
    let combined = CombinedKernel::new(file.kernel, file.stabilizer)?;
    let mut s = String::from("r,elastic,elastic_dr,stabilizer,stabilizer_dr,combined,combined_dr\n");
    for &r in &file.r {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Failure::Config(format!("kernel-probe: radius must be finite and nonnegative, got {r}")));
        }
        let _ = writeln!(
            s,
            "{r:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            elastic.value(r),
            elastic.derivative(r),
            stabilizer.value(r),
            stabilizer.derivative(r),
            combined.value(r),
            combined.derivative(r)
        );
    }
    Ok(s)
}

pub fn kernel_probe(file: KernelProbeFile, dir: Option<&Path>) -> Result<(), Failure> {
    let table = kernel_probe_table(&file)?;
    print!("{table}");
    if let Some(dir) = dir {
        let out = Outputs::create(dir)?;
        echo(&out, "kernel-probe", &file)?;
        out.write("kernel_probe.csv", &table)?;
    }
    Ok(())
}

pub fn load<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    config::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_csv_round_trips_bits() {
        let b = SampleBatch::from_rows(&[[0.1, -2.5e-300], [1.0 / 3.0, 7.0]]).unwrap();
        let dir = std::env::temp_dir().join(format!("eieg-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("b.csv");
        std::fs::write(&path, batch_csv(&b)).unwrap();
        assert_eq!(read_batch_csv(&path).unwrap(), b);
        std::fs::write(&path, "x0,x1\n1.0,abc\n").unwrap();
        assert!(matches!(read_batch_csv(&path), Err(Failure::Config(_))));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn probe_row_for_the_textbook_case() {
        let file = KernelProbeFile { r: vec![0.5], ..KernelProbeFile::default() };
        let table = kernel_probe_table(&file).unwrap();
        let row = table.lines().nth(1).unwrap();
        assert!(row.starts_with("0.5,2.0,-4.0,"), "{row}");
    }
}
