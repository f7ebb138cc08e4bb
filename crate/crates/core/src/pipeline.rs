//! The ck-means pipeline: silhouette scan of crisp k-means on the raw data,
//! fuzzy c-means with the selected cluster count, intersection filter, and a
//! second silhouette-scanned k-means over the kept membership vectors.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::fcm::{fcm_fit, CentroidSet, FcmConfig, FcmResult};
use crate::filter::{apply_filter, make_range, FilterRange, FilteredSelection};
use crate::kmeans::{kmeans_fit, CrispAssignment, KmeansConfig};
use crate::metrics::{silhouette_many, SilhouetteReport};
use crate::seed::derive_seed;
use crate::{kmeans, par};

pub const NO_INTERSECTION_MESSAGE: &str =
    "No data are found in the intersection corresponding to the μ parameter.";

const SCAN_STAGE: u64 = 1;
const FCM_STAGE: u64 = 2;
const FINAL_STAGE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Width of the kept membership band around 0.5.
    pub mu: f64,
    /// FCM fuzziness index.
    pub m: f64,
    pub k_min: usize,
    pub k_max: usize,
    /// Forces the FCM cluster count instead of the scanned one.
    pub c: Option<usize>,
    pub seed: u64,
    pub fcm_max_iter: usize,
    pub kmeans_max_iter: usize,
    pub n_init: usize,
    pub tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mu: 0.4,
            m: 2.0,
            k_min: 2,
            k_max: 10,
            c: None,
            seed: 0,
            fcm_max_iter: 300,
            kmeans_max_iter: 300,
            n_init: 10,
            tol: 1e-6,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        make_range(self.mu)?;
        if self.k_min < 2 {
            return Err(Error::config(
                "k_min",
                format!("must be at least 2, got {}", self.k_min),
            ));
        }
        if self.k_max < self.k_min {
            return Err(Error::config(
                "k_max",
                format!("{} is below k_min {}", self.k_max, self.k_min),
            ));
        }
        if let Some(c) = self.c {
            if c < 2 {
                return Err(Error::config("c", format!("must be at least 2, got {c}")));
            }
        }
        FcmConfig {
            c: 2,
            m: self.m,
            max_iter: self.fcm_max_iter,
            tol: self.tol,
            seed: 0,
        }
        .validate()?;
        self.kmeans_template(0).validate()
    }

    fn kmeans_template(&self, seed: u64) -> KmeansConfig {
        KmeansConfig {
            k: 2,
            max_iter: self.kmeans_max_iter,
            n_init: self.n_init,
            tol: self.tol,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub mean_si: f64,
}

/// Outcome of a silhouette scan over cluster counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSelection {
    pub k: usize,
    /// Mean silhouette of the selected partition.
    pub score: f64,
    pub scores: Vec<KScore>,
    pub assignment: CrispAssignment,
    #[serde(skip)]
    pub report: SilhouetteReport,
}

/// Picks the cluster count in `k_min..=k_max` whose k-means partition has
/// the highest mean silhouette; ties go to the smaller count.
pub fn select_k(data: &DataMatrix, k_min: usize, k_max: usize, seed: u64) -> Result<KSelection> {
    select_k_with(data, k_min, k_max, &KmeansConfig::new(2, seed))
}

/// As [`select_k`], taking iteration limits, restarts and seed from
/// `template`. Candidate `k` is fitted with seed `derive_seed(seed, k)`.
pub fn select_k_with(
    data: &DataMatrix,
    k_min: usize,
    k_max: usize,
    template: &KmeansConfig,
) -> Result<KSelection> {
    if k_min < 2 {
        return Err(Error::config(
            "k_min",
            format!("must be at least 2, got {k_min}"),
        ));
    }
    if k_max < k_min {
        return Err(Error::config(
            "k_max",
            format!("{k_max} is below k_min {k_min}"),
        ));
    }
    if data.rows() <= k_max {
        return Err(Error::config(
            "k_max",
            format!(
                "{} points cannot be scanned up to {k_max} clusters",
                data.rows()
            ),
        ));
    }
    let candidates: Vec<usize> = (k_min..=k_max).collect();
    let fits = par::map_indices(candidates.len(), |idx| {
        let k = candidates[idx];
        let config = KmeansConfig {
            k,
            seed: derive_seed(template.seed, k as u64),
            ..template.clone()
        };
        kmeans_fit(data, &config)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let labelings: Vec<&[usize]> = fits.iter().map(|a| a.labels.as_slice()).collect();
    let reports = silhouette_many(data, &labelings)?;

    let scores: Vec<KScore> = candidates
        .iter()
        .zip(&reports)
        .map(|(&k, r)| KScore {
            k,
            mean_si: r.mean_si,
        })
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.mean_si > scores[best].mean_si {
            best = i;
        }
    }
    let (assignment, report) = fits
        .into_iter()
        .zip(reports)
        .nth(best)
        .expect("best index in range");
    Ok(KSelection {
        k: candidates[best],
        score: scores[best].mean_si,
        scores,
        assignment,
        report,
    })
}

/// One source row across every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    pub index: usize,
    pub features: Vec<f64>,
    pub memberships: Vec<f64>,
    /// Crisp k-means label on the raw data.
    pub kmeans: usize,
    /// Final-stage label, absent for rows dropped by the filter.
    pub ckmeans: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CkmeansResult {
    pub config: PipelineConfig,
    pub initial_k: usize,
    pub initial_scores: Vec<KScore>,
    pub initial_assignment: CrispAssignment,
    pub fcm: FcmResult,
    pub range: FilterRange,
    #[serde(serialize_with = "indices_only")]
    pub selection: FilteredSelection,
    pub final_k: usize,
    pub final_scores: Vec<KScore>,
    pub final_assignment: CrispAssignment,
    /// `None` when fewer than 3 rows survive the filter.
    pub final_silhouette: Option<SilhouetteReport>,
    pub row_table: Vec<RowRecord>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl CkmeansResult {
    pub fn final_mean_si(&self) -> Option<f64> {
        self.final_silhouette.as_ref().map(|r| r.mean_si)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoIntersection {
    pub config: PipelineConfig,
    pub message: String,
    pub initial_k: usize,
    pub initial_scores: Vec<KScore>,
    pub initial_assignment: CrispAssignment,
    pub fcm: FcmResult,
    pub range: FilterRange,
    pub row_table: Vec<RowRecord>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome")]
pub enum CkmeansOutcome {
    #[serde(rename = "OK")]
    Clustered(Box<CkmeansResult>),
    #[serde(rename = "NO_INTERSECTION")]
    NoIntersection(Box<NoIntersection>),
}

impl CkmeansOutcome {
    pub fn row_table(&self) -> &[RowRecord] {
        match self {
            CkmeansOutcome::Clustered(r) => &r.row_table,
            CkmeansOutcome::NoIntersection(r) => &r.row_table,
        }
    }

    pub fn fcm(&self) -> &FcmResult {
        match self {
            CkmeansOutcome::Clustered(r) => &r.fcm,
            CkmeansOutcome::NoIntersection(r) => &r.fcm,
        }
    }

    pub fn timings(&self) -> &[(String, f64)] {
        match self {
            CkmeansOutcome::Clustered(r) => &r.timings,
            CkmeansOutcome::NoIntersection(r) => &r.timings,
        }
    }

    pub fn clustered(&self) -> Option<&CkmeansResult> {
        match self {
            CkmeansOutcome::Clustered(r) => Some(r),
            CkmeansOutcome::NoIntersection(_) => None,
        }
    }
}

fn indices_only<S: serde::Serializer>(
    sel: &FilteredSelection,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Indices<'a> {
        kept_indices: &'a [usize],
    }
    Indices {
        kept_indices: &sel.kept_indices,
    }
    .serialize(s)
}

struct Stopwatch {
    last: Instant,
    laps: Vec<(String, f64)>,
}

impl Stopwatch {
    fn new() -> Self {
        Self {
            last: Instant::now(),
            laps: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.laps
            .push((stage.to_string(), (now - self.last).as_secs_f64()));
        self.last = now;
    }
}

pub fn run_ckmeans(data: &DataMatrix, config: &PipelineConfig) -> Result<CkmeansOutcome> {
    config.validate()?;
    let mut clock = Stopwatch::new();

    let scan_max = config.k_max.min(data.rows().saturating_sub(1));
    if scan_max < config.k_min {
        return Err(Error::config(
            "k_min",
            format!(
                "{} points are too few for {} clusters",
                data.rows(),
                config.k_min
            ),
        ));
    }
    let initial = select_k_with(
        data,
        config.k_min,
        scan_max,
        &config.kmeans_template(derive_seed(config.seed, SCAN_STAGE)),
    )?;
    clock.lap("initial_scan");

    let fcm_config = FcmConfig {
        c: config.c.unwrap_or(initial.k),
        m: config.m,
        max_iter: config.fcm_max_iter,
        tol: config.tol,
        seed: derive_seed(config.seed, FCM_STAGE),
    };
    let fcm = fcm_fit(data, &fcm_config)?;
    clock.lap("fcm");

    let range = make_range(config.mu)?;
    let selection = apply_filter(&fcm.memberships, data, &range)?;
    clock.lap("filter");

    if selection.is_empty() {
        let row_table = build_rows(data, &fcm, &initial.assignment, None);
        clock.lap("report");
        return Ok(CkmeansOutcome::NoIntersection(Box::new(NoIntersection {
            config: config.clone(),
            message: NO_INTERSECTION_MESSAGE.to_string(),
            initial_k: initial.k,
            initial_scores: initial.scores,
            initial_assignment: initial.assignment,
            fcm,
            range,
            row_table,
            timings: clock.laps,
        })));
    }

    let kept = selection.kept_memberships.to_data()?;
    let final_template = config.kmeans_template(derive_seed(config.seed, FINAL_STAGE));
    let (final_k, final_scores, final_assignment, final_silhouette) = if kept.rows() < 3 {
        (1, Vec::new(), single_cluster(&kept), None)
    } else {
        let hi = config.k_max.min(kept.rows() - 1);
        let lo = config.k_min.min(hi);
        let sel = select_k_with(&kept, lo, hi, &final_template)?;
        (sel.k, sel.scores, sel.assignment, Some(sel.report))
    };
    clock.lap("final_scan");

    let row_table = build_rows(
        data,
        &fcm,
        &initial.assignment,
        Some((&selection.kept_indices, &final_assignment.labels)),
    );
    clock.lap("report");

    Ok(CkmeansOutcome::Clustered(Box::new(CkmeansResult {
        config: config.clone(),
        initial_k: initial.k,
        initial_scores: initial.scores,
        initial_assignment: initial.assignment,
        fcm,
        range,
        selection,
        final_k,
        final_scores,
        final_assignment,
        final_silhouette,
        row_table,
        timings: clock.laps,
    })))
}

/// Every row in one cluster centered on the mean.
fn single_cluster(data: &DataMatrix) -> CrispAssignment {
    let mean = data
        .values()
        .mean_axis(ndarray::Axis(0))
        .expect("non-empty");
    let centroids = CentroidSet::from_raw(
        Array2::from_shape_vec((1, data.features()), mean.to_vec()).expect("shape"),
    );
    let labels = vec![0; data.rows()];
    let inertia = kmeans::inertia(data, &labels, &centroids);
    CrispAssignment {
        labels,
        centroids,
        inertia,
    }
}

fn build_rows(
    data: &DataMatrix,
    fcm: &FcmResult,
    crisp: &CrispAssignment,
    final_labels: Option<(&[usize], &[usize])>,
) -> Vec<RowRecord> {
    let mut ck = vec![None; data.rows()];
    if let Some((indices, labels)) = final_labels {
        for (&i, &l) in indices.iter().zip(labels) {
            ck[i] = Some(l);
        }
    }
    (0..data.rows())
        .map(|i| RowRecord {
            index: i,
            features: data.row(i).to_vec(),
            memberships: fcm.memberships.row(i).to_vec(),
            kmeans: crisp.labels[i],
            ckmeans: ck[i],
        })
        .collect()
}

/// Side-by-side k-means, FCM and ck-means results, one line per source row,
/// values truncated to two decimals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub const ABSENT_LABEL: &str = "N.A.";

impl ComparisonTable {
    pub fn from_outcome(feature_names: &[String], outcome: &CkmeansOutcome) -> Self {
        let c = outcome.fcm().memberships.clusters();
        let mut header: Vec<String> = feature_names.to_vec();
        header.extend((1..=c).map(|j| format!("C.{j}")));
        header.push("KMEANS".into());
        header.push("CKMEANS".into());
        let rows = outcome
            .row_table()
            .iter()
            .map(|r| {
                let mut line: Vec<String> = r.features.iter().map(|&v| truncate2(v)).collect();
                line.extend(r.memberships.iter().map(|&v| truncate2(v)));
                line.push(r.kmeans.to_string());
                line.push(
                    r.ckmeans
                        .map_or_else(|| ABSENT_LABEL.to_string(), |l| l.to_string()),
                );
                line
            })
            .collect();
        Self { header, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

/// Truncates toward zero at two decimals: `-6.849 -> "-6.84"`.
pub fn truncate2(v: f64) -> String {
    // Go through a wide decimal expansion so that 0.29 stays 0.29.
    let wide = format!("{v:.12}");
    let cut = match wide.find('.') {
        Some(dot) => &wide[..dot + 3],
        None => &wide,
    };
    if cut
        .trim_start_matches('-')
        .chars()
        .all(|ch| ch == '0' || ch == '.')
    {
        cut.trim_start_matches('-').to_string()
    } else {
        cut.to_string()
    }
}

/// Runs the pipeline and tabulates it. A run that keeps no rows is reported
/// as [`Error::NoIntersection`].
pub fn compare_methods(data: &DataMatrix, config: &PipelineConfig) -> Result<ComparisonTable> {
    match run_ckmeans(data, config)? {
        CkmeansOutcome::NoIntersection(_) => Err(Error::NoIntersection),
        outcome => Ok(ComparisonTable::from_outcome(
            data.feature_names(),
            &outcome,
        )),
    }
}
