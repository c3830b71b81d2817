use eieg_core::datasets::{standard_normal, MixtureSpec};
use eieg_core::flow::*;
use eieg_core::{SampleBatch, SeededRng};

fn calibrated(seed: u64, steps: usize) -> FlowConfig {
    FlowConfig {
        mobility_m1: 10.0,
        mobility_m2: 10.0,
        dt: 0.05,
        n2: 256,
        total_steps: steps,
        record_every: 10,
        seed,
        ..FlowConfig::default()
    }
}

#[test]
fn centroid_is_invariant_without_attraction() {
    let cfg = FlowConfig {
        mobility_m1: 0.0,
        mobility_m2: 50.0,
        dt: 0.01,
        ..FlowConfig::default()
    };
    let mut p = standard_normal(64, 2, &mut SeededRng::new(71));
    let c0 = p.centroid();
    let data = SampleBatch::from_rows(&[[3.0, 3.0]]).unwrap();
    for _ in 0..500 {
        p = flow_step(&cfg, &p, &data).unwrap();
    }
    let c1 = p.centroid();
    for (a, b) in c0.iter().zip(&c1) {
        assert!((a - b).abs() < 1e-12, "{c0:?} -> {c1:?}");
    }
}

#[test]
fn symmetric_pair_about_a_lone_data_point_keeps_its_center() {
    let cfg = FlowConfig {
        mobility_m1: 0.0,
        ..FlowConfig::default()
    };
    let p = SampleBatch::from_rows(&[[-0.4, 0.0], [0.4, 0.0]]).unwrap();
    let data = SampleBatch::from_rows(&[[0.0, 0.0]]).unwrap();
    let next = flow_step(&cfg, &p, &data).unwrap();
    assert_eq!(next.centroid(), vec![0.0, 0.0]);
}

#[test]
fn single_pair_step_with_table_values() {
    let cfg = FlowConfig::default();
    let p = SampleBatch::from_rows(&[[1.0, 0.0]]).unwrap();
    let data = SampleBatch::from_rows(&[[0.0, 0.0]]).unwrap();
    let next = flow_step(&cfg, &p, &data).unwrap();
    assert_eq!(next.as_slice(), &[-9.0, 0.0]);
}

#[test]
fn force_branches_meet_at_the_cutoff() {
    let mut rng = SeededRng::new(72);
    for _ in 0..200 {
        let cutoff = rng.uniform_range(0.1, 3.0);
        let dim_n = 2 + (rng.next_u64() % 4) as u32;
        let cfg = FlowConfig { cutoff, dim_n, ..FlowConfig::default() };
        let theta = rng.uniform_range(0.0, std::f64::consts::TAU);
        let y = [cutoff * theta.cos(), cutoff * theta.sin()];
        let at = pair_force(&cfg, &[0.0, 0.0], &y);
        let inner: Vec<f64> = y.iter().map(|v| v / cutoff.powi(dim_n as i32 + 1)).collect();
        for (a, b) in at.iter().zip(&inner) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }
}

#[test]
fn energy_falls_on_the_two_mode_target() {
    let spec = MixtureSpec::two_mode();
    for seed in 0..3 {
        let cfg = calibrated(seed, 600);
        let run = run_flow(&cfg, initial_particles(&cfg, 2), &spec).unwrap();
        // dt keeps every single step well under a tenth of the ~14 unit domain
        assert!(run.max_displacement < 1.4);
        let windows = run.energy.len() - 1;
        let down = run.energy.windows(2).filter(|w| w[1].1 < w[0].1).count();
        assert!(down * 10 >= windows * 9, "seed {seed}: {down}/{windows} windows decreased");
        let (e0, e1) = (run.energy[0].1, run.energy.last().unwrap().1);
        assert!(e1 < 0.1 * e0, "seed {seed}: {e0} -> {e1}");
    }
}

#[test]
fn runs_are_deterministic_and_zero_steps_is_identity() {
    let spec = MixtureSpec::two_mode();
    let cfg = calibrated(4, 50);
    let a = run_flow(&cfg, initial_particles(&cfg, 2), &spec).unwrap();
    let b = run_flow(&cfg, initial_particles(&cfg, 2), &spec).unwrap();
    assert_eq!(a.energy_csv(), b.energy_csv());
    assert_eq!(a.trajectory_csv(), b.trajectory_csv());

    let zero = FlowConfig { total_steps: 0, ..cfg };
    let init = initial_particles(&zero, 2);
    let run = run_flow(&zero, init.clone(), &spec).unwrap();
    assert_eq!(run.particles, init);
}

#[test]
fn runaway_mobility_reports_divergence() {
    let cfg = FlowConfig {
        mobility_m1: 1e9,
        mobility_m2: 0.0,
        dt: 1.0,
        total_steps: 20,
        ..FlowConfig::default()
    };
    let err = run_flow(&cfg, initial_particles(&cfg, 2), &MixtureSpec::two_mode()).unwrap_err();
    assert!(matches!(err, eieg_core::Error::Divergence { .. }), "{err:?}");
}
