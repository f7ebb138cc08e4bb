//! Feature matrices: seeded Gaussian-blob generation, CSV I/O and MinMax
//! normalization.

use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Half-width of the box `[-CENTER_BOX, CENTER_BOX]^f` blob centers are drawn from.
pub const CENTER_BOX: f64 = 10.0;

/// An `n × f` matrix of finite reals with named columns and optional
/// ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    feature_names: Vec<String>,
    labels: Option<Vec<usize>>,
}

impl DataMatrix {
    /// Builds a matrix with feature names `F.1 .. F.f`.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let names = default_names("F", values.ncols());
        Self::with_names(values, names)
    }

    pub fn with_names(values: Array2<f64>, feature_names: Vec<String>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Input(format!(
                "data matrix must have at least one row and one column, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        Self::checked(values, feature_names, None)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::Input(format!(
                "row {i} has {} values, expected {width}",
                rows[i].len()
            )));
        }
        let flat = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), width), flat)
            .map_err(|e| Error::Input(e.to_string()))?;
        Self::new(values)
    }

    /// Validates everything except the non-empty requirement; used for row
    /// subsets, which may legitimately be empty.
    fn checked(
        values: Array2<f64>,
        feature_names: Vec<String>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if feature_names.len() != values.ncols() {
            return Err(Error::Input(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                values.ncols()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Input(format!("duplicate feature name {dup:?}")));
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value {v} at row {}, column {}",
                r + 1,
                c + 1
            )));
        }
        if let Some(l) = &labels {
            if l.len() != values.nrows() {
                return Err(Error::Input(format!(
                    "{} labels for {} rows",
                    l.len(),
                    values.nrows()
                )));
            }
        }
        let values = values.as_standard_layout().into_owned();
        Ok(Self {
            values,
            feature_names,
            labels,
        })
    }

    pub fn with_labels(self, labels: Vec<usize>) -> Result<Self> {
        Self::checked(self.values, self.feature_names, Some(labels))
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn features(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    /// Row-major contiguous storage.
    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let f = self.features();
        &self.as_slice()[i * f..(i + 1) * f]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// The listed rows, in the given order. The result may have zero rows.
    pub fn select_rows(&self, indices: &[usize]) -> DataMatrix {
        let values = self.values.select(Axis(0), indices);
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        DataMatrix {
            values,
            feature_names: self.feature_names.clone(),
            labels,
        }
    }
}

pub(crate) fn default_names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}.{i}")).collect()
}

/// Parameters of a synthetic blob dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_centroids: usize,
    pub cluster_std: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_centroids < 1 {
            return Err(Error::config("n_centroids", "must be at least 1"));
        }
        if self.n_features < 1 {
            return Err(Error::config("n_features", "must be at least 1"));
        }
        if self.n_samples < self.n_centroids {
            return Err(Error::config(
                "n_samples",
                format!(
                    "{} samples cannot cover {} centroids",
                    self.n_samples, self.n_centroids
                ),
            ));
        }
        if !(self.cluster_std > 0.0 && self.cluster_std.is_finite()) {
            return Err(Error::config(
                "cluster_std",
                format!("must be a positive real, got {}", self.cluster_std),
            ));
        }
        Ok(())
    }
}

/// A generated dataset together with the centers it was drawn around.
#[derive(Debug, Clone)]
pub struct Blobs {
    /// Samples, labeled with the index of their generating center.
    pub data: DataMatrix,
    /// `n_centroids × n_features` generating centers.
    pub centers: Array2<f64>,
}

/// Isotropic Gaussian blobs. Centers are uniform in `[-10, 10]^f`, samples
/// are dealt to centers round-robin and then shuffled. The output is a pure
/// function of `spec`.
pub fn generate_blobs(spec: &BlobSpec) -> Result<DataMatrix> {
    generate_blobs_with_centers(spec).map(|b| b.data)
}

pub fn generate_blobs_with_centers(spec: &BlobSpec) -> Result<Blobs> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let (n, f, k) = (spec.n_samples, spec.n_features, spec.n_centroids);

    let box_dist = Uniform::new_inclusive(-CENTER_BOX, CENTER_BOX).expect("finite bounds");
    let centers = Array2::from_shape_fn((k, f), |_| box_dist.sample(&mut rng));

    let mut values = Array2::zeros((n, f));
    let mut labels = Vec::with_capacity(n);
    for (i, mut row) in values.rows_mut().into_iter().enumerate() {
        let c = i % k;
        for (x, &mu) in row.iter_mut().zip(centers.row(c)) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x = mu + spec.cluster_std * z;
        }
        labels.push(c);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let values = values.select(Axis(0), &order);
    let labels = order.iter().map(|&i| labels[i]).collect();

    let data = DataMatrix::new(values)?.with_labels(labels)?;
    Ok(Blobs { data, centers })
}

/// Reads a numeric CSV file. With `has_header`, the first line supplies the
/// feature names; otherwise they default to `F.1 .. F.f`.
pub fn read_csv(path: impl AsRef<Path>, has_header: bool) -> Result<DataMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let names = if has_header {
        let header = reader.headers().map_err(|e| csv_error(path, e))?;
        Some(
            header
                .iter()
                .map(|h| h.trim().to_string())
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };

    let mut flat = Vec::new();
    let mut rows = 0usize;
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(rows as u64 + 1, |p| p.line());
        width.get_or_insert(record.len());
        for (col, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_owned(),
                row: line,
                column: col + 1,
                reason: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    row: line,
                    column: col + 1,
                    reason: format!("{cell:?} is not finite"),
                });
            }
            flat.push(v);
        }
        rows += 1;
    }

    let width = match width {
        Some(w) => w,
        None => {
            return Err(Error::Format {
                path: path.to_owned(),
                reason: "no data rows".into(),
            })
        }
    };
    let values = Array2::from_shape_vec((rows, width), flat).map_err(|e| Error::Format {
        path: path.to_owned(),
        reason: e.to_string(),
    })?;
    match names {
        Some(names) => DataMatrix::with_names(values, names),
        None => DataMatrix::new(values),
    }
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    match err.kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => Error::Format {
            path: path.to_owned(),
            reason: format!(
                "line {} has {len} fields, expected {expected_len}",
                pos.as_ref().map_or(0, |p| p.line())
            ),
        },
        csv::ErrorKind::Utf8 { .. } => Error::Format {
            path: path.to_owned(),
            reason: err.to_string(),
        },
        _ => Error::io(path, err.into()),
    }
}

/// Writes a header of feature names and one line per row. Reals use the
/// shortest representation that parses back to the same value.
pub fn write_csv(data: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))?;
    writer
        .write_record(data.feature_names())
        .map_err(|e| Error::io(path, e.into()))?;
    let mut buf = Vec::with_capacity(data.features());
    for row in data.values().rows() {
        buf.clear();
        buf.extend(row.iter().map(|v| v.to_string()));
        writer
            .write_record(&buf)
            .map_err(|e| Error::io(path, e.into()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Maps every column affinely onto `[0, 1]`. Constant columns map to 0.5.
pub fn minmax_normalize(data: &DataMatrix) -> DataMatrix {
    let mut values = data.values.clone();
    for mut col in values.columns_mut() {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if hi > lo {
            let span = hi - lo;
            col.mapv_inplace(|v| (v - lo) / span);
        } else {
            col.fill(0.5);
        }
    }
    DataMatrix {
        values,
        feature_names: data.feature_names.clone(),
        labels: data.labels.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::fs;

    fn spec(n: usize, f: usize, k: usize, std: f64, seed: u64) -> BlobSpec {
        BlobSpec {
            n_samples: n,
            n_features: f,
            n_centroids: k,
            cluster_std: std,
            seed,
        }
    }

    #[test]
    fn case_one_shape() {
        let d = generate_blobs(&spec(500, 2, 2, 5.0, 15)).unwrap();
        assert_eq!((d.rows(), d.features()), (500, 2));
        assert_eq!(d.feature_names(), ["F.1", "F.2"]);
        let labels = d.labels().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 250);
    }

    #[test]
    fn vanishing_variance_sits_on_centers() {
        let b = generate_blobs_with_centers(&spec(3, 1, 3, 1e-9, 0)).unwrap();
        let labels = b.data.labels().unwrap();
        let mut seen = labels.to_vec();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
        for (i, &l) in labels.iter().enumerate() {
            let c = b.centers.row(l);
            assert!((b.data.row(i)[0] - c[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(100, 2, 4, 0.1, 7);
        let a = generate_blobs(&s).unwrap();
        let b = generate_blobs(&s).unwrap();
        assert!(a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.labels(), b.labels());
        let other = generate_blobs(&BlobSpec { seed: 8, ..s }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn tight_blobs_are_nearest_to_their_center() {
        let b = generate_blobs_with_centers(&spec(200, 3, 5, 1e-6, 3)).unwrap();
        let centers = b.centers.as_slice().unwrap();
        for (i, &l) in b.data.labels().unwrap().iter().enumerate() {
            let (nearest, _) = crate::distance::nearest(b.data.row(i), centers, 3);
            assert_eq!(nearest, l);
        }
        for c in b.centers.iter() {
            assert!(c.abs() <= CENTER_BOX);
        }
    }

    #[test]
    fn invalid_specs_name_the_field() {
        let bad = [
            (spec(10, 2, 0, 1.0, 0), "n_centroids"),
            (spec(2, 2, 3, 1.0, 0), "n_samples"),
            (spec(10, 2, 2, 0.0, 0), "cluster_std"),
            (spec(10, 2, 2, f64::NAN, 0), "cluster_std"),
            (spec(10, 0, 2, 1.0, 0), "n_features"),
        ];
        for (s, field) in bad {
            match generate_blobs(&s) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected config error for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn blob_spec_json_field_names() {
        let s: BlobSpec = serde_json::from_str(
            r#"{"n_samples":500,"n_features":2,"n_centroids":2,"cluster_std":5.0,"seed":15}"#,
        )
        .unwrap();
        assert_eq!(s, spec(500, 2, 2, 5.0, 15));
    }

    #[test]
    fn read_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "a,b\n1.0,2.0\n3.0,4.0").unwrap();
        let d = read_csv(&p, true).unwrap();
        assert_eq!(d.values(), array![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(d.feature_names(), ["a", "b"]);
    }

    #[test]
    fn parse_error_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "1.0,x").unwrap();
        match read_csv(&p, false) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (1, 2)),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "1.0,nan\n").unwrap();
        assert!(matches!(
            read_csv(&p, false),
            Err(Error::Parse {
                row: 1,
                column: 2,
                ..
            })
        ));
    }

    #[test]
    fn ragged_rows_are_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ragged.csv");
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(matches!(read_csv(&p, false), Err(Error::Format { .. })));
        fs::write(&p, "a,b\n").unwrap();
        assert!(matches!(read_csv(&p, true), Err(Error::Format { .. })));
        assert!(matches!(
            read_csv(dir.path().join("missing.csv"), true),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn smallest_write() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.csv");
        write_csv(&DataMatrix::from_rows(&[vec![42.0]]).unwrap(), &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "F.1\n42\n");
    }

    #[test]
    fn case_one_file_has_n_plus_one_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("case1.csv");
        write_csv(&generate_blobs(&spec(500, 2, 2, 5.0, 15)).unwrap(), &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 501);
    }

    #[test]
    fn identity_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("id.csv");
        let d = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        write_csv(&d, &p).unwrap();
        assert_eq!(read_csv(&p, true).unwrap(), d);
    }

    #[test]
    fn normalize_examples() {
        let d = DataMatrix::from_rows(&[vec![0.0, 7.0], vec![5.0, 7.0], vec![10.0, 7.0]]).unwrap();
        let n = minmax_normalize(&d);
        assert_eq!(n.values(), array![[0.0, 0.5], [0.5, 0.5], [1.0, 0.5]]);
    }

    #[test]
    fn case_five_columns_span_unit_interval() {
        let d = generate_blobs(&spec(500, 6, 5, 1.5, 1)).unwrap();
        let n = minmax_normalize(&d);
        for col in n.values().columns() {
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(DataMatrix::from_rows(&[vec![1.0, f64::INFINITY]]).is_err());
        assert!(DataMatrix::from_rows(&[]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let dup = DataMatrix::with_names(array![[1.0, 2.0]], vec!["a".into(), "a".into()]);
        assert!(dup.is_err());
    }
}
