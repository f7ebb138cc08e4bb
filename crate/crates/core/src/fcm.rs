//! Fuzzy c-means.
//!
//! Memberships follow `μ_ij = 1 / Σ_k (d_ij / d_ik)^(2/(m-1))`, centroids are
//! the `μ^m`-weighted means of the data, and the fit alternates the two
//! updates, which never increases `J = Σ_i Σ_j μ_ij^m ‖x_i − v_j‖²`.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{default_names, DataMatrix};
use crate::distance::sq_euclidean;
use crate::error::{Error, Result};
use crate::{par, seed};

/// Total membership weight below which a fuzzy cluster counts as empty.
pub const DEGENERATE_WEIGHT: f64 = 1e-12;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Row-stochastic `n × c` membership matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MembershipMatrix {
    #[serde(with = "crate::matrix_serde")]
    values: Array2<f64>,
}

impl MembershipMatrix {
    /// Checks that entries lie in `[0, 1]` and rows sum to 1 within 1e-9.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        for (i, row) in values.rows().into_iter().enumerate() {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Input(format!(
                    "membership {v} of row {i} outside [0, 1]"
                )));
            }
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Input(format!("membership row {i} sums to {sum}")));
            }
        }
        Ok(Self::from_raw(values))
    }

    pub(crate) fn from_raw(values: Array2<f64>) -> Self {
        Self {
            values: values.as_standard_layout().into_owned(),
        }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn clusters(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.clusters();
        &self.as_slice()[i * c..(i + 1) * c]
    }

    pub fn select_rows(&self, indices: &[usize]) -> MembershipMatrix {
        Self::from_raw(self.values.select(ndarray::Axis(0), indices))
    }

    /// The membership vectors as a feature matrix with columns `C.1 .. C.c`.
    pub fn to_data(&self) -> Result<DataMatrix> {
        DataMatrix::with_names(self.values.clone(), default_names("C", self.clusters()))
    }
}

/// `c × f` cluster centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CentroidSet {
    #[serde(with = "crate::matrix_serde")]
    values: Array2<f64>,
}

impl CentroidSet {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("centroids must be finite".into()));
        }
        if values.nrows() == 0 {
            return Err(Error::Input("centroid set is empty".into()));
        }
        Ok(Self::from_raw(values))
    }

    pub(crate) fn from_raw(values: Array2<f64>) -> Self {
        Self {
            values: values.as_standard_layout().into_owned(),
        }
    }

    pub fn count(&self) -> usize {
        self.values.nrows()
    }

    pub fn features(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let f = self.features();
        &self.as_slice()[j * f..(j + 1) * f]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcmConfig {
    /// Number of fuzzy clusters, at least 2.
    pub c: usize,
    /// Fuzziness index, strictly greater than 1.
    pub m: f64,
    pub max_iter: usize,
    /// Convergence threshold on the largest membership change.
    pub tol: f64,
    pub seed: u64,
}

impl FcmConfig {
    pub fn new(c: usize, seed: u64) -> Self {
        Self {
            c,
            m: 2.0,
            max_iter: 300,
            tol: 1e-6,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c < 2 {
            return Err(Error::config(
                "c",
                format!("need at least 2 clusters, got {}", self.c),
            ));
        }
        if !(self.m > 1.0 && self.m.is_finite()) {
            return Err(Error::config(
                "m",
                format!("fuzziness must be a finite real > 1, got {}", self.m),
            ));
        }
        if self.max_iter < 1 {
            return Err(Error::config("max_iter", "must be at least 1"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::config(
                "tol",
                format!("must be non-negative, got {}", self.tol),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcmResult {
    pub centroids: CentroidSet,
    pub memberships: MembershipMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration.
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

/// Memberships of every row of `data` to `centroids`.
///
/// A point at zero distance from one or more centroids is split uniformly
/// among those centroids.
///
/// # Panics
///
/// If `m <= 1` or the feature counts differ.
pub fn fcm_membership(data: &DataMatrix, centroids: &CentroidSet, m: f64) -> MembershipMatrix {
    assert!(m > 1.0, "fuzziness index must exceed 1, got {m}");
    assert_eq!(
        data.features(),
        centroids.features(),
        "feature count mismatch"
    );
    let c = centroids.count();
    let exponent = 1.0 / (m - 1.0);
    let mut out = vec![0.0; data.rows() * c];
    par::for_each_row_mut(&mut out, c, |i, row| {
        membership_row(data.row(i), centroids, exponent, row);
    });
    MembershipMatrix::from_raw(Array2::from_shape_vec((data.rows(), c), out).expect("shape"))
}

/// Writes one membership row. `exponent` is `1/(m-1)`, applied to squared
/// distances. Weights are taken relative to the nearest centroid so that
/// they stay in `(0, 1]`.
fn membership_row(x: &[f64], centroids: &CentroidSet, exponent: f64, out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = sq_euclidean(x, centroids.row(j));
    }
    let nearest = out.iter().cloned().fold(f64::INFINITY, f64::min);
    if nearest == 0.0 {
        let zeros = out.iter().filter(|&&d| d == 0.0).count() as f64;
        for o in out.iter_mut() {
            *o = if *o == 0.0 { 1.0 / zeros } else { 0.0 };
        }
        return;
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        let ratio = nearest / *o;
        *o = if exponent == 1.0 {
            ratio
        } else {
            ratio.powf(exponent)
        };
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// `μ^m`-weighted means of the data, one per membership column.
///
/// Fails with [`Error::DegenerateCluster`] when a column's total weight is
/// below [`DEGENERATE_WEIGHT`].
pub fn fcm_centroids(
    data: &DataMatrix,
    memberships: &MembershipMatrix,
    m: f64,
) -> Result<CentroidSet> {
    check_rows(data, memberships)?;
    let (centroids, degenerate) = weighted_means(data, memberships, m);
    match degenerate.first() {
        Some(&cluster) => Err(Error::DegenerateCluster { cluster }),
        None => Ok(CentroidSet::from_raw(centroids)),
    }
}

/// Weighted means plus the indices of degenerate columns, whose rows are
/// left at zero.
fn weighted_means(
    data: &DataMatrix,
    memberships: &MembershipMatrix,
    m: f64,
) -> (Array2<f64>, Vec<usize>) {
    let (f, c) = (data.features(), memberships.clusters());
    let partials = par::map_chunks(data.rows(), par::REDUCE_CHUNK, |range| {
        let mut sums = vec![0.0; c * f];
        let mut weights = vec![0.0; c];
        for i in range {
            let x = data.row(i);
            for (j, &u) in memberships.row(i).iter().enumerate() {
                let w = u.powf(m);
                weights[j] += w;
                for (s, &xv) in sums[j * f..(j + 1) * f].iter_mut().zip(x) {
                    *s += w * xv;
                }
            }
        }
        (sums, weights)
    });
    let mut sums = vec![0.0; c * f];
    let mut weights = vec![0.0; c];
    for (ps, pw) in partials {
        sums.iter_mut().zip(ps).for_each(|(a, b)| *a += b);
        weights.iter_mut().zip(pw).for_each(|(a, b)| *a += b);
    }
    let mut degenerate = Vec::new();
    for j in 0..c {
        let row = &mut sums[j * f..(j + 1) * f];
        if weights[j] < DEGENERATE_WEIGHT {
            degenerate.push(j);
            row.fill(0.0);
        } else {
            row.iter_mut().for_each(|s| *s /= weights[j]);
        }
    }
    (
        Array2::from_shape_vec((c, f), sums).expect("shape"),
        degenerate,
    )
}

/// `Σ_i Σ_j μ_ij^m ‖x_i − v_j‖²`.
pub fn fcm_objective(
    data: &DataMatrix,
    memberships: &MembershipMatrix,
    centroids: &CentroidSet,
    m: f64,
) -> f64 {
    let contributions = point_contributions(data, memberships, centroids, m);
    contributions.iter().sum()
}

fn point_contributions(
    data: &DataMatrix,
    memberships: &MembershipMatrix,
    centroids: &CentroidSet,
    m: f64,
) -> Vec<f64> {
    par::map_indices(data.rows(), |i| {
        let x = data.row(i);
        memberships
            .row(i)
            .iter()
            .enumerate()
            .map(|(j, &u)| u.powf(m) * sq_euclidean(x, centroids.row(j)))
            .sum()
    })
}

fn check_rows(data: &DataMatrix, memberships: &MembershipMatrix) -> Result<()> {
    if data.rows() != memberships.rows() {
        return Err(Error::Input(format!(
            "{} data rows but {} membership rows",
            data.rows(),
            memberships.rows()
        )));
    }
    Ok(())
}

/// Random row-stochastic matrix: uniform draws normalized per row.
pub fn random_memberships(n: usize, c: usize, seed: u64) -> MembershipMatrix {
    let mut rng = seed::rng(seed);
    let mut values = Array2::zeros((n, c));
    for mut row in values.rows_mut() {
        row.iter_mut()
            .for_each(|v| *v = rng.random::<f64>() + f64::EPSILON);
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
    MembershipMatrix::from_raw(values)
}

/// Fits fuzzy c-means from a seeded random initialization.
pub fn fcm_fit(data: &DataMatrix, config: &FcmConfig) -> Result<FcmResult> {
    config.validate()?;
    check_fit_input(data, config)?;
    let init = random_memberships(data.rows(), config.c, config.seed);
    fit_from(data, init, config)
}

/// Fits fuzzy c-means from an explicit initial membership matrix.
pub fn fcm_fit_from(
    data: &DataMatrix,
    init: MembershipMatrix,
    config: &FcmConfig,
) -> Result<FcmResult> {
    config.validate()?;
    check_fit_input(data, config)?;
    check_rows(data, &init)?;
    if init.clusters() != config.c {
        return Err(Error::Input(format!(
            "initial memberships have {} columns, config asks for {}",
            init.clusters(),
            config.c
        )));
    }
    fit_from(data, init, config)
}

fn check_fit_input(data: &DataMatrix, config: &FcmConfig) -> Result<()> {
    if data.rows() < config.c {
        return Err(Error::config(
            "c",
            format!("{} clusters for {} points", config.c, data.rows()),
        ));
    }
    if data.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("data contains non-finite values".into()));
    }
    Ok(())
}

fn fit_from(data: &DataMatrix, init: MembershipMatrix, config: &FcmConfig) -> Result<FcmResult> {
    let m = config.m;
    let mut memberships = init;
    let mut centroids: Option<CentroidSet> = None;
    let mut history = Vec::with_capacity(config.max_iter.min(64));
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        let (mut values, degenerate) = weighted_means(data, &memberships, m);
        if !degenerate.is_empty() {
            reseed_degenerate(
                data,
                &memberships,
                centroids.as_ref(),
                m,
                &degenerate,
                &mut values,
            );
        }
        let next_centroids = CentroidSet::from_raw(values);
        let next = fcm_membership(data, &next_centroids, m);
        let change = memberships
            .as_slice()
            .iter()
            .zip(next.as_slice())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        memberships = next;
        history.push(fcm_objective(data, &memberships, &next_centroids, m));
        centroids = Some(next_centroids);
        if change < config.tol {
            converged = true;
            break;
        }
    }

    let centroids = centroids.expect("max_iter >= 1");
    Ok(FcmResult {
        objective: *history.last().expect("at least one iteration"),
        centroids,
        memberships,
        iterations,
        converged,
        objective_history: history,
    })
}

/// Moves each degenerate centroid onto the point with the largest objective
/// contribution under the previous centroids, never reusing a point.
fn reseed_degenerate(
    data: &DataMatrix,
    memberships: &MembershipMatrix,
    previous: Option<&CentroidSet>,
    m: f64,
    degenerate: &[usize],
    values: &mut Array2<f64>,
) {
    let contributions = match previous {
        Some(prev) => point_contributions(data, memberships, prev, m),
        None => {
            let mean = data
                .values()
                .mean_axis(ndarray::Axis(0))
                .expect("non-empty");
            let mean = mean.as_slice().expect("contiguous");
            (0..data.rows())
                .map(|i| sq_euclidean(data.row(i), mean))
                .collect()
        }
    };
    let mut order: Vec<usize> = (0..data.rows()).collect();
    order.sort_by(|&a, &b| {
        contributions[b]
            .total_cmp(&contributions[a])
            .then(a.cmp(&b))
    });
    for (&cluster, &point) in degenerate.iter().zip(&order) {
        values
            .row_mut(cluster)
            .assign(&ndarray::ArrayView1::from(data.row(point)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn data(rows: &[Vec<f64>]) -> DataMatrix {
        DataMatrix::from_rows(rows).unwrap()
    }

    fn centroids(rows: Array2<f64>) -> CentroidSet {
        CentroidSet::new(rows).unwrap()
    }

    #[test]
    fn two_point_fixed_point() {
        let d = data(&[vec![0.0], vec![10.0]]);
        let r = fcm_fit(&d, &FcmConfig::new(2, 3)).unwrap();
        let mut v: Vec<f64> = r.centroids.values().iter().cloned().collect();
        v.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(v[1], 10.0, epsilon = 1e-6);
        for i in 0..2 {
            let row = r.memberships.row(i);
            let top = row.iter().cloned().fold(0.0, f64::max);
            assert_abs_diff_eq!(top, 1.0, epsilon = 1e-6);
        }
        assert!(r.converged);
    }

    #[test]
    fn membership_direct_value() {
        // d = (2, 8): 1 / (1 + (2/8)^2)
        let u = fcm_membership(&data(&[vec![2.0]]), &centroids(array![[0.0], [10.0]]), 2.0);
        assert_abs_diff_eq!(u.row(0)[0], 1.0 / (1.0 + 0.0625), epsilon = 1e-12);
        assert_abs_diff_eq!(u.row(0)[0], 0.9412, epsilon = 1e-4);
        assert_abs_diff_eq!(u.row(0)[1], 0.0588, epsilon = 1e-4);
    }

    #[test]
    fn coincident_and_equidistant_points() {
        let c = centroids(array![[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]]);
        let u = fcm_membership(&data(&[vec![4.0, 0.0]]), &c, 2.5);
        assert_eq!(u.row(0), [0.0, 1.0, 0.0]);

        let sym = centroids(array![[1.0, 0.0], [-1.0, 0.0]]);
        let u = fcm_membership(&data(&[vec![0.0, 3.0]]), &sym, 2.0);
        assert_eq!(u.row(0), [0.5, 0.5]);

        let tri = centroids(array![[2.0, 0.0], [-2.0, 0.0], [0.0, 2.0], [0.0, -2.0]]);
        let u = fcm_membership(&data(&[vec![0.0, 0.0]]), &tri, 1.7);
        for &v in u.row(0) {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn duplicate_centroids_split_a_coincident_point() {
        let c = centroids(array![[1.0], [1.0], [5.0]]);
        let u = fcm_membership(&data(&[vec![1.0]]), &c, 2.0);
        assert_eq!(u.row(0), [0.5, 0.5, 0.0]);
    }

    #[test]
    fn centroid_examples() {
        let d = data(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![10.0, 10.0]]);
        let crisp = MembershipMatrix::new(array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        for m in [1.5, 2.0, 3.0] {
            let v = fcm_centroids(&d, &crisp, m).unwrap();
            assert_eq!(v.values(), array![[1.0, 2.0], [10.0, 10.0]]);
        }
        let uniform = MembershipMatrix::new(Array2::from_elem((3, 2), 0.5)).unwrap();
        let v = fcm_centroids(&d, &uniform, 2.0).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(v.row(j)[0], 4.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v.row(j)[1], 14.0 / 3.0, epsilon = 1e-12);
        }

        let d = data(&[vec![0.0], vec![10.0]]);
        let u = MembershipMatrix::new(array![[0.9, 0.1], [0.1, 0.9]]).unwrap();
        let v = fcm_centroids(&d, &u, 2.0).unwrap();
        assert_abs_diff_eq!(v.row(0)[0], 0.1 / 0.82, epsilon = 1e-12);
        assert_abs_diff_eq!(v.row(0)[0], 0.1220, epsilon = 1e-4);
    }

    #[test]
    fn zero_weight_column_is_degenerate() {
        let d = data(&[vec![0.0], vec![1.0]]);
        let u = MembershipMatrix::new(array![[1.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(
            fcm_centroids(&d, &u, 2.0),
            Err(Error::DegenerateCluster { cluster: 1 })
        ));
    }

    #[test]
    fn fit_recovers_from_degenerate_initialization() {
        let d = data(&[vec![0.0], vec![0.5], vec![9.0], vec![10.0]]);
        let init =
            MembershipMatrix::new(array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]).unwrap();
        let r = fcm_fit_from(&d, init, &FcmConfig::new(2, 0)).unwrap();
        let mut v: Vec<f64> = r.centroids.values().iter().cloned().collect();
        v.sort_by(f64::total_cmp);
        assert!(v[0] < 1.0 && v[1] > 8.0, "{v:?}");
    }

    #[test]
    fn objective_examples() {
        let d = data(&[vec![1.0, 1.0], vec![3.0, 3.0]]);
        let u = MembershipMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let v = centroids(array![[1.0, 1.0], [3.0, 3.0]]);
        assert_eq!(fcm_objective(&d, &u, &v, 2.0), 0.0);

        let d = data(&[vec![1.0]]);
        let u = MembershipMatrix::new(array![[1.0]]).unwrap();
        assert_eq!(fcm_objective(&d, &u, &centroids(array![[0.0]]), 2.0), 1.0);
    }

    #[test]
    fn config_errors() {
        let d = data(&[vec![0.0], vec![1.0]]);
        let mut cfg = FcmConfig::new(3, 0);
        assert!(matches!(
            fcm_fit(&d, &cfg),
            Err(Error::Config { field: "c", .. })
        ));
        cfg.c = 2;
        cfg.m = 1.0;
        assert!(matches!(
            fcm_fit(&d, &cfg),
            Err(Error::Config { field: "m", .. })
        ));
        cfg.m = 2.0;
        cfg.max_iter = 0;
        assert!(matches!(
            fcm_fit(&d, &cfg),
            Err(Error::Config {
                field: "max_iter",
                ..
            })
        ));
    }

    #[test]
    fn max_iter_is_respected() {
        let d = data(&[vec![0.0], vec![1.0], vec![5.0], vec![6.0], vec![2.5]]);
        let mut cfg = FcmConfig::new(2, 9);
        cfg.max_iter = 2;
        cfg.tol = 0.0;
        let r = fcm_fit(&d, &cfg).unwrap();
        assert_eq!(r.iterations, 2);
        assert!(!r.converged);
        assert_eq!(r.objective_history.len(), 2);
    }

    #[test]
    fn random_init_is_row_stochastic() {
        let u = random_memberships(50, 4, 11);
        for i in 0..50 {
            assert_abs_diff_eq!(u.row(i).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        assert_eq!(u, random_memberships(50, 4, 11));
    }

    #[test]
    fn result_json_fields() {
        let d = data(&[vec![0.0], vec![10.0]]);
        let r = fcm_fit(&d, &FcmConfig::new(2, 3)).unwrap();
        let json: serde_json::Value = serde_json::to_value(&r).unwrap();
        let obj = json.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "centroids",
                "converged",
                "iterations",
                "memberships",
                "objective"
            ]
        );
        assert_eq!(obj["memberships"].as_array().unwrap().len(), 2);
        let back: FcmResult = serde_json::from_value(json).unwrap();
        assert_eq!(back.memberships, r.memberships);
    }
}
