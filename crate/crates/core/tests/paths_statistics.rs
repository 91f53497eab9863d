mod common;

use harnack_lab::estimate::{mc_semigroup, sample_terminals, TestFunction};
use harnack_lab::model::{DiffusionSpec, DriftFamily, DriftSpec, SigmaSource};
use harnack_lab::paths::{brownian_increment_at, brownian_increments, simulate_path, TimeGrid};
use harnack_lab::Error;
use proptest::prelude::*;

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn increments_have_covariance_h() {
    let grid = TimeGrid::new(2.0, 4096).unwrap();
    let h = grid.step();
    let mut all = Vec::new();
    for stream in 0..10 {
        all.extend(brownian_increments(stream, &grid, 2, 99));
    }
    let n = all.len() as f64;
    let (m, v) = mean_var(&all);
    // mean has sd sqrt(h/n); variance has relative sd sqrt(2/n)
    assert!(m.abs() < 4.0 * (h / n).sqrt(), "mean {m}");
    assert!((v / h - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "var ratio {}", v / h);
    // the two noise coordinates are uncorrelated
    let cov: f64 = all.chunks_exact(2).map(|c| c[0] * c[1]).sum::<f64>() / (n / 2.0);
    assert!(cov.abs() < 4.0 * h / (n / 2.0).sqrt());
}

#[test]
fn increments_are_reproducible_and_seekable() {
    let grid = TimeGrid::new(1.0, 257).unwrap();
    let a = brownian_increments(7, &grid, 3, 1234);
    assert_eq!(a, brownian_increments(7, &grid, 3, 1234));
    assert_ne!(a, brownian_increments(8, &grid, 3, 1234));
    assert_ne!(a, brownian_increments(7, &grid, 3, 1235));
    for k in [0, 1, 100, 256] {
        assert_eq!(
            brownian_increment_at(7, &grid, 3, 1234, k),
            a[3 * k..3 * k + 3].to_vec()
        );
    }
}

#[test]
fn zero_drift_path_is_running_sum() {
    let drift = common::zero_drift(2);
    let diff = DiffusionSpec::identity(2, 1.01).unwrap();
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let path = simulate_path(&drift, &diff, &[0.5, -1.0], &grid, 3, 5).unwrap();
    let mut acc = [0.5, -1.0];
    for k in 0..64 {
        assert_eq!(path.state(k), &acc);
        let dw = path.increment(k);
        acc[0] += dw[0];
        acc[1] += dw[1];
    }
    assert_eq!(path.terminal(), &acc);
}

#[test]
fn wide_noise_matrix_has_unit_variance() {
    // sigma = (0.6, 0.8): d = 1, m = 2, sigma sigma^* = 1
    let diff = DiffusionSpec::new(SigmaSource::Constant(vec![vec![0.6, 0.8]]), 1.01).unwrap();
    let s =
        harnack_lab::estimate::Scenario::new(common::zero_drift(1), diff, TimeGrid::new(1.0, 8).unwrap(), 100_000, 11);
    let e = mc_semigroup(&TestFunction::Square { index: 0 }, &s, &[0.0]).unwrap();
    assert!(e.within(1.0, 3.0), "{e:?}");
}

#[test]
fn refinement_preserves_terminal_law() {
    let coarse = common::scenario(common::zero_drift(1), 16, 100_000, 21);
    let fine = common::scenario(common::zero_drift(1), 32, 100_000, 21);
    let f = TestFunction::Square { index: 0 };
    let a = mc_semigroup(&f, &coarse, &[0.3]).unwrap();
    let b = mc_semigroup(&f, &fine, &[0.3]).unwrap();
    assert!((a.mean - b.mean).abs() <= 3.0 * a.stderr.hypot(b.stderr));
    assert!(a.within(0.09 + 1.0, 3.0) && b.within(0.09 + 1.0, 3.0));
}

#[test]
fn batches_do_not_depend_on_worker_count() {
    let s = common::scenario(common::mollified(), 64, 3000, 8);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_terminals(&s, &[0.5]).unwrap().points)
    };
    assert_eq!(run(1), run(5));
}

#[test]
fn excessive_divergence_is_an_error() {
    let family = DriftFamily::Lipschitz {
        matrix: vec![vec![1e300]],
        offset: vec![0.0],
    };
    let s = common::scenario(DriftSpec::new(family, 4.0, 4.0).unwrap(), 8, 100, 1);
    let r = mc_semigroup(&TestFunction::constant(1.0), &s, &[1.0]);
    assert!(
        matches!(
            r,
            Err(Error::TooManyDiverged {
                diverged: 100,
                total: 100
            })
        ),
        "{r:?}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn paths_are_pure_functions_of_seed_and_stream(seed in any::<u64>(), stream in any::<u64>(), n in 1usize..64) {
        let drift = common::mollified();
        let diff = DiffusionSpec::identity(1, 1.01).unwrap();
        let grid = TimeGrid::new(0.7, n).unwrap();
        let a = simulate_path(&drift, &diff, &[0.2], &grid, stream, seed).unwrap();
        let b = simulate_path(&drift, &diff, &[0.2], &grid, stream, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.states.iter().all(|v| v.is_finite()));
        prop_assert_eq!(a.increments, brownian_increments(stream, &grid, 1, seed));
    }
}
