use approx::assert_abs_diff_eq;
use ckmeans::fcm::{fcm_fit_from, random_memberships};
use ckmeans::{fcm_fit, DataMatrix, FcmConfig, MembershipMatrix};
use ndarray::Array2;
use proptest::prelude::*;

fn points(max_n: usize, max_f: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (6..=max_n, 1..=max_f)
        .prop_flat_map(|(n, f)| prop::collection::vec(prop::collection::vec(-20.0..20.0f64, f), n))
}

/// Fixed iteration count so that two runs cannot stop at different steps.
fn fixed_steps(c: usize) -> FcmConfig {
    FcmConfig {
        max_iter: 25,
        tol: 0.0,
        ..FcmConfig::new(c, 0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn memberships_are_row_stochastic_and_objective_never_rises(rows in points(80, 4), c in 2usize..5, seed in 0u64..1000) {
        let data = DataMatrix::from_rows(&rows).unwrap();
        let fit = fcm_fit(&data, &FcmConfig::new(c, seed)).unwrap();
        for i in 0..data.rows() {
            let row = fit.memberships.row(i);
            prop_assert!(row.iter().all(|&u| (0.0..=1.0).contains(&u)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for w in fit.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "objective rose from {} to {}", w[0], w[1]);
        }
        prop_assert_eq!(fit.objective, *fit.objective_history.last().unwrap());
    }

    #[test]
    fn permuting_points_permutes_memberships(rows in points(60, 3), c in 2usize..4, seed in 0u64..1000, shift in 1usize..50) {
        let n = rows.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        let moved = DataMatrix::from_rows(&perm.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()).unwrap();
        let init = random_memberships(n, c, seed);
        let moved_init = init.select_rows(&perm);

        let a = fcm_fit_from(&data, init, &fixed_steps(c)).unwrap();
        let b = fcm_fit_from(&moved, moved_init, &fixed_steps(c)).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            for (x, y) in b.memberships.row(new).iter().zip(a.memberships.row(old)) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
        for (x, y) in a.centroids.as_slice().iter().zip(b.centroids.as_slice()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn translating_points_translates_centroids(rows in points(60, 3), c in 2usize..4, seed in 0u64..1000, t in -50.0..50.0f64) {
        let data = DataMatrix::from_rows(&rows).unwrap();
        let shifted = DataMatrix::from_rows(&rows.iter().map(|r| r.iter().map(|x| x + t).collect()).collect::<Vec<_>>()).unwrap();
        let init = random_memberships(rows.len(), c, seed);
        let a = fcm_fit_from(&data, init.clone(), &fixed_steps(c)).unwrap();
        let b = fcm_fit_from(&shifted, init, &fixed_steps(c)).unwrap();
        for (x, y) in a.memberships.as_slice().iter().zip(b.memberships.as_slice()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in a.centroids.as_slice().iter().zip(b.centroids.as_slice()) {
            prop_assert!((x + t - y).abs() < 1e-8);
        }
    }
}

#[test]
fn two_separated_groups_split_cleanly() {
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| vec![if i < 20 { 0.0 } else { 100.0 } + (i % 5) as f64 * 0.1])
        .collect();
    let data = DataMatrix::from_rows(&rows).unwrap();
    let fit = fcm_fit(&data, &FcmConfig::new(2, 3)).unwrap();
    assert!(fit.converged);
    let side = |i: usize| fit.memberships.row(i)[0] > 0.5;
    for i in 0..40 {
        assert_eq!(side(i), side(0) == (i < 20));
        assert!(fit.memberships.row(i).iter().any(|&u| u > 0.99));
    }
}

#[test]
fn explicit_initialization_must_match_shape() {
    let data = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
    let wrong = MembershipMatrix::new(Array2::from_elem((2, 2), 0.5)).unwrap();
    assert!(fcm_fit_from(&data, wrong, &FcmConfig::new(2, 0)).is_err());
    let fit = fcm_fit_from(&data, random_memberships(3, 2, 1), &FcmConfig::new(2, 0)).unwrap();
    assert_abs_diff_eq!(
        fit.memberships.row(1).iter().sum::<f64>(),
        1.0,
        epsilon = 1e-12
    );
}
