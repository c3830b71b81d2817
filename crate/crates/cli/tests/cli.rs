use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn eieg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eieg")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("eieg-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn files(dir: &Path) -> BTreeSet<String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SHORT_GAN: &str = "[train]\ngenerator_steps = 40\nbatch_size = 32\nhidden = [16, 16]\n[eval]\nsamples = 200\n";

#[test]
fn kernel_probe_prints_the_reference_row() {
    let out = eieg(&["kernel-probe", "--n", "2", "--cutoff", "0.1", "--r", "0.5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.split(',').any(|c| c == "2.0"), "{row}");
}

#[test]
fn exit_codes_separate_config_and_numerical_failures() {
    let dir = scratch("codes");
    let cfg = write_config(&dir, "[train]\nlr_gen = 1.0\n");
    assert_eq!(eieg(&["gan-train", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(eieg(&["gan-train", "--config", "/nonexistent/cfg.toml"]).status.code(), Some(2));
    assert_eq!(eieg(&["kernel-probe", "--n", "5"]).status.code(), Some(2));

    let cfg = write_config(&dir, "[flow]\ntotal_steps = 20\nmobility_m1 = 1e9\nmobility_m2 = 0.0\ndt = 1.0\n");
    let out = dir.join("flow");
    let status = eieg(&["flow", "--config", &cfg, "--out", out.to_str().unwrap()]).status;
    assert_eq!(status.code(), Some(3));
}

#[test]
fn gan_train_writes_the_declared_files_and_repeats_exactly() {
    let dir = scratch("gan");
    let cfg = write_config(&dir, SHORT_GAN);
    let (a, b, c) = (dir.join("a"), dir.join("b"), dir.join("c"));
    for (out, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let o = eieg(&["gan-train", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let expected: BTreeSet<String> = [
        "config.json",
        "coverage.json",
        "discriminator.ckpt",
        "generator.ckpt",
        "history.csv",
        "samples.csv",
        "scatter.svg",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    assert_eq!(files(&a), expected);
    for f in &expected {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        assert!(x == y, "{f} differs between identical runs");
    }
    assert_ne!(std::fs::read(a.join("samples.csv")).unwrap(), std::fs::read(c.join("samples.csv")).unwrap());
    assert_eq!(json(a.join("config.json"))["config"]["train"]["seed"], 5);
    assert_eq!(json(a.join("coverage.json"))["modes_total"], 25);
}

#[test]
fn ablation_flag_shows_in_the_config_echo() {
    let dir = scratch("ablation");
    for (name, flag) in [("on", true), ("off", false)] {
        let cfg = write_config(
            &dir,
            &format!("[dataset]\npreset = \"two_mode\"\n[train]\ngenerator_steps = 5\nself_interaction = {flag}\n"),
        );
        let out = dir.join(name);
        assert!(eieg(&["eieg-train", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
        let echo = json(out.join("config.json"));
        assert_eq!(echo["command"], "eieg-train");
        assert_eq!(echo["config"]["train"]["self_interaction"], flag);
        assert_eq!(echo["config"]["train"]["use_discriminator"], false);
        assert!(!out.join("discriminator.ckpt").exists());
    }
}

#[test]
fn eval_of_samples_at_every_center_hits_every_mode() {
    let dir = scratch("eval");
    let mut csv = String::from("x0,x1\n");
    for x in [-4.0, -2.0, 0.0, 2.0, 4.0] {
        for y in [-4.0, -2.0, 0.0, 2.0, 4.0] {
            csv.push_str(&format!("{x:?},{y:?}\n"));
        }
    }
    let samples = dir.join("centers.csv");
    std::fs::write(&samples, csv).unwrap();
    let out = dir.join("out");
    let o = eieg(&["eval", "--samples", samples.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(out.join("coverage.json"))["modes_hit"], 25);
    let kde = std::fs::read_to_string(out.join("kde.csv")).unwrap();
    assert_eq!(kde.lines().count(), 1 + 100 * 100);
    assert!(out.join("kde.svg").exists());
}

#[test]
fn stabilized_spectral_run_reports_decay_everywhere() {
    let dir = scratch("spectral");
    let cfg = write_config(
        &dir,
        "kinds = [{ kind = \"discriminator_stabilized\", epsilon = 1.0 }]\nmodes = [[1, 0], [2, 0], [1, 1]]\n[probe]\nresolution = 32\n",
    );
    let out = dir.join("out");
    assert!(eieg(&["spectral", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let rates = std::fs::read_to_string(out.join("rates.csv")).unwrap();
    let mut lines = rates.lines();
    assert_eq!(lines.next().unwrap(), "flow_kind,epsilon,k_x,k_y,xi,measured,predicted,rel_err");
    let mut n = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let measured: f64 = cols[5].parse().unwrap();
        assert!(measured < 0.0, "{line}");
        n += 1;
    }
    assert_eq!(n, 3);
    for f in ["modes.csv", "summary.json", "config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn flow_writes_trajectory_and_energy() {
    let dir = scratch("flow");
    let cfg = write_config(
        &dir,
        "[flow]\ntotal_steps = 30\nmobility_m1 = 10.0\nmobility_m2 = 10.0\ndt = 0.05\nn2 = 32\nrecord_every = 10\nsnapshot_every = 10\n",
    );
    let out = dir.join("out");
    assert!(eieg(&["flow", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let energy = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    assert_eq!(energy.lines().count(), 1 + 4);
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("step,particle_id,x0,x1\n"));
    assert_eq!(traj.lines().count(), 1 + 4 * 32);
}
