use eieg_core::datasets::{sample, MixtureSpec};
use eieg_core::evalmetrics::*;
use eieg_core::kernels::{ElasticKernel, KernelConfig};
use eieg_core::trainer::Snapshot;
use eieg_core::{SampleBatch, SeededRng};
use proptest::prelude::*;
use std::f64::consts::PI;

// Independent recount: squared distances, explicit argmin.
fn brute_force(samples: &SampleBatch, spec: &MixtureSpec, t: f64) -> (usize, Vec<usize>, usize) {
    let mut counts = vec![0; spec.num_components()];
    let mut good = vec![0; spec.num_components()];
    for s in samples.iter_rows() {
        let d2: Vec<f64> = spec
            .centers
            .iter()
            .map(|c| (s[0] - c[0]).powi(2) + (s[1] - c[1]).powi(2))
            .collect();
        let mut best = 0;
        for k in 1..d2.len() {
            if d2[k] < d2[best] {
                best = k;
            }
        }
        counts[best] += 1;
        if d2[best] <= (t * spec.std).powi(2) {
            good[best] += 1;
        }
    }
    let hit = good.iter().filter(|&&g| g > 0).count();
    (hit, counts, good.iter().sum())
}

#[test]
fn coverage_matches_brute_force_recount() {
    let spec = MixtureSpec::grid25();
    let mut rng = SeededRng::new(61);
    for trial in 0..20 {
        // mixture of sharp and blurry samples so both outcomes occur
        let wide = MixtureSpec::new(spec.centers.clone(), 0.05 * (1.0 + trial as f64), spec.weights.clone()).unwrap();
        let s = sample(&wide, 300, &mut rng).unwrap();
        let r = mode_coverage(&s, &spec, DEFAULT_THRESHOLD_SIGMAS).unwrap();
        let (hit, counts, good) = brute_force(&s, &spec, 4.0);
        assert_eq!(r.modes_hit, hit);
        assert_eq!(r.per_mode_counts, counts);
        assert!((r.high_quality_fraction - good as f64 / 300.0).abs() < 1e-15);
        assert!(r.modes_hit <= r.modes_total);
        assert_eq!(r.per_mode_counts.iter().sum::<usize>(), 300);
    }
}

proptest! {
    #[test]
    fn coverage_is_permutation_invariant(seed in 0u64..1000, shift in 0usize..25) {
        let spec = MixtureSpec::grid25();
        let blurry = MixtureSpec::new(spec.centers.clone(), 0.3, spec.weights.clone()).unwrap();
        let s = sample(&blurry, 200, &mut SeededRng::new(seed)).unwrap();
        let base = mode_coverage(&s, &spec, 4.0).unwrap();

        let mut rows: Vec<Vec<f64>> = s.iter_rows().map(|r| r.to_vec()).collect();
        rows.reverse();
        rows.rotate_left(seed as usize % 200);
        let perm = mode_coverage(&SampleBatch::from_rows(&rows).unwrap(), &spec, 4.0).unwrap();
        prop_assert_eq!(&base, &perm);

        let mut centers = spec.centers.clone();
        centers.rotate_left(shift);
        let rotated = MixtureSpec::new(centers, spec.std, spec.weights.clone()).unwrap();
        let r = mode_coverage(&s, &rotated, 4.0).unwrap();
        prop_assert_eq!(r.modes_hit, base.modes_hit);
        prop_assert_eq!(r.high_quality_fraction, base.high_quality_fraction);
        let mut counts = base.per_mode_counts.clone();
        counts.rotate_left(shift);
        prop_assert_eq!(r.per_mode_counts, counts);
    }
}

#[test]
fn kde_two_point_hand_values() {
    let s = SampleBatch::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
    let h = 0.5;
    // a 4x2 grid on [-1,3]x[-1,1] has centres x in {-0.5,0.5,1.5,2.5}, y in {-0.5,0.5}
    let extent = GridExtent { x_min: -1.0, x_max: 3.0, y_min: -1.0, y_max: 1.0 };
    let g = kde_grid(&s, h, extent, (4, 2)).unwrap();
    let phi = |dx: f64, dy: f64| (-(dx * dx + dy * dy) / (2.0 * h * h)).exp() / (2.0 * PI * h * h);
    for (i, j) in [(0, 0), (1, 1), (3, 0)] {
        let (x, y) = (g.x_center(i), g.y_center(j));
        let hand = 0.5 * (phi(x, y) + phi(x - 1.0, y));
        assert!((g.at(i, j) - hand).abs() < 1e-15, "({i},{j})");
    }
}

#[test]
fn kde_integrates_to_one_and_peaks_at_a_lone_sample() {
    let spec = MixtureSpec::grid25();
    let s = sample(&spec, 500, &mut SeededRng::new(62)).unwrap();
    let bw = silverman_bandwidth(&s);
    let g = kde_grid(&s, bw, GridExtent::square(7.0), (140, 140)).unwrap();
    assert!((g.mass() - 1.0).abs() < 0.02, "mass {}", g.mass());

    let one = SampleBatch::from_rows(&[[0.3, -0.7]]).unwrap();
    let g = kde_grid(&one, 0.2, GridExtent::square(2.0), (40, 40)).unwrap();
    let (i, j) = g.argmax();
    // within half a cell
    assert!((g.x_center(i) - 0.3).abs() <= 0.05 + 1e-12 && (g.y_center(j) + 0.7).abs() <= 0.05 + 1e-12);
}

#[test]
fn kde_is_translation_equivariant() {
    let s = sample(&MixtureSpec::ring8(), 64, &mut SeededRng::new(63)).unwrap();
    let extent = GridExtent::square(3.0);
    let a = kde_grid(&s, 0.3, extent, (30, 30)).unwrap();
    let shifted = s.translated(&[1.25, -0.5]).unwrap();
    let b = kde_grid(&shifted, 0.3, extent.shifted(1.25, -0.5), (30, 30)).unwrap();
    for (p, q) in a.values.iter().zip(&b.values) {
        assert!((p - q).abs() < 1e-12 * p.abs().max(1e-3));
    }
}

#[test]
fn energy_trace_of_perfect_and_recorded_histories() {
    let kernel = ElasticKernel::new(KernelConfig::new(2, 0.1).unwrap()).unwrap();
    let data = sample(&MixtureSpec::two_mode(), 50, &mut SeededRng::new(64)).unwrap();
    let perfect: Vec<Snapshot> = (0..3).map(|i| Snapshot { step: 10 * i, samples: data.clone() }).collect();
    let trace = energy_trace(&perfect, &data, &kernel).unwrap();
    assert_eq!(trace.iter().map(|t| t.0).collect::<Vec<_>>(), vec![0, 10, 20]);
    assert!(trace.iter().all(|t| t.1.abs() < 1e-12));

    // points sliding toward the data give a strictly shrinking trace, verbatim on recompute
    let snaps: Vec<Snapshot> = (0..5)
        .map(|i| Snapshot {
            step: i,
            samples: data.translated(&[4.0 / (1.0 + i as f64), 0.0]).unwrap(),
        })
        .collect();
    let t1 = energy_trace(&snaps, &data, &kernel).unwrap();
    let t2 = energy_trace(&snaps, &data, &kernel).unwrap();
    assert_eq!(t1, t2);
    assert!(t1.windows(2).all(|w| w[1].1 < w[0].1));
}
