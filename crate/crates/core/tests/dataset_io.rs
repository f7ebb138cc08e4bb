use ckmeans::{generate_blobs, minmax_normalize, read_csv, write_csv, BlobSpec, DataMatrix, Error};
use ndarray::Array2;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -1e6..1e6f64,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_exact(n in 1usize..30, f in 1usize..6, cells in prop::collection::vec(finite(), 180)) {
        let values = Array2::from_shape_vec((n, f), cells[..n * f].to_vec()).unwrap();
        let names: Vec<String> = (0..f).map(|j| format!("col {j}")).collect();
        let data = DataMatrix::with_names(values, names).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_csv(&data, &path).unwrap();
        let back = read_csv(&path, true).unwrap();
        prop_assert_eq!(back.feature_names(), data.feature_names());
        prop_assert_eq!(back.as_slice(), data.as_slice());
    }

    #[test]
    fn normalization_is_idempotent(n in 1usize..40, f in 1usize..5, cells in prop::collection::vec(-1e3..1e3f64, 160)) {
        let data = DataMatrix::new(Array2::from_shape_vec((n, f), cells[..n * f].to_vec()).unwrap()).unwrap();
        let once = minmax_normalize(&data);
        let twice = minmax_normalize(&once);
        prop_assert!(once.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn blobs_follow_their_spec(extra in 0usize..300, f in 1usize..6, k in 1usize..6, std in 0.01..4.0f64, seed in any::<u64>()) {
        let n = k + extra;
        let spec = BlobSpec { n_samples: n, n_features: f, n_centroids: k, cluster_std: std, seed };
        let a = generate_blobs(&spec).unwrap();
        prop_assert_eq!((a.rows(), a.features()), (n, f));
        prop_assert_eq!(&a, &generate_blobs(&spec).unwrap());
        let labels = a.labels().unwrap();
        for c in 0..k {
            prop_assert_eq!(labels.iter().filter(|&&l| l == c).count(), n / k + usize::from(c < n % k));
        }
    }
}

#[test]
fn blobs_need_a_sample_per_centroid() {
    let spec = BlobSpec {
        n_samples: 2,
        n_features: 2,
        n_centroids: 3,
        cluster_std: 1.0,
        seed: 0,
    };
    assert!(matches!(
        generate_blobs(&spec),
        Err(Error::Config {
            field: "n_samples",
            ..
        })
    ));
}

#[test]
fn headerless_files_get_generated_names() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plain.csv");
    std::fs::write(&path, "1,2\n3,4.5\n").unwrap();
    let data = read_csv(&path, false).unwrap();
    assert_eq!(data.feature_names(), ["F.1", "F.2"]);
    assert_eq!(data.as_slice(), [1.0, 2.0, 3.0, 4.5]);
}

#[test]
fn bad_cells_report_their_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "a,b\n1,2\n3,oops\n").unwrap();
    match read_csv(&path, true) {
        Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
        other => panic!("unexpected {other:?}"),
    }
}
