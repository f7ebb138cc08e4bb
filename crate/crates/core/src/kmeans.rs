//! Crisp k-means: k-means++ seeding, Lloyd iterations, best of `n_init`
//! restarts by inertia.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::distance::{nearest, nearest_two, sq_euclidean};
use crate::error::{Error, Result};
use crate::fcm::CentroidSet;
use crate::{par, seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Number of independently seeded restarts.
    pub n_init: usize,
    /// Stop when no centroid moves further than this.
    pub tol: f64,
    pub seed: u64,
}

impl KmeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iter: 300,
            n_init: 10,
            tol: 1e-6,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::config(
                "k",
                format!("need at least 2 clusters, got {}", self.k),
            ));
        }
        if self.n_init < 1 {
            return Err(Error::config("n_init", "must be at least 1"));
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

/// A crisp partition with its centers and inertia.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrispAssignment {
    pub labels: Vec<usize>,
    pub centroids: CentroidSet,
    pub inertia: f64,
}

impl CrispAssignment {
    pub fn k(&self) -> usize {
        self.centroids.count()
    }
}

/// One restart's outcome, with the inertia measured after every
/// assignment step.
#[derive(Debug, Clone)]
pub struct RestartTrace {
    pub assignment: CrispAssignment,
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

pub fn kmeans_fit(data: &DataMatrix, config: &KmeansConfig) -> Result<CrispAssignment> {
    let traces = kmeans_restarts(data, config)?;
    let mut best: Option<RestartTrace> = None;
    for t in traces {
        if best
            .as_ref()
            .is_none_or(|b| t.assignment.inertia < b.assignment.inertia)
        {
            best = Some(t);
        }
    }
    Ok(best.expect("n_init >= 1").assignment)
}

/// Runs every restart and returns them in restart order. Restart `r` draws
/// from ChaCha8 stream `r` of `config.seed`, so the first `n` restarts are
/// the same for any `n_init >= n`.
pub fn kmeans_restarts(data: &DataMatrix, config: &KmeansConfig) -> Result<Vec<RestartTrace>> {
    config.validate()?;
    if data.rows() < config.k {
        return Err(Error::config(
            "k",
            format!("{} clusters for {} points", config.k, data.rows()),
        ));
    }
    Ok(par::map_indices(config.n_init, |r| {
        let mut rng = seed::rng(config.seed);
        rng.set_stream(r as u64);
        lloyd(data, config, &mut rng)
    }))
}

fn lloyd(data: &DataMatrix, config: &KmeansConfig, rng: &mut ChaCha8Rng) -> RestartTrace {
    let (k, f) = (config.k, data.features());
    let mut centers = plus_plus(data, k, rng);
    let mut labels: Vec<usize> = Vec::new();
    // Lower bound on each point's distance to its second-nearest center;
    // zero forces a full scan.
    let mut lower = vec![0.0; data.rows()];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        let (mut next, mut dists) = assign_bounded(data, &centers, f, &labels, &mut lower);
        if repair_empty(data, k, &mut next, &mut dists, &mut centers) {
            lower.fill(0.0);
        }
        history.push(dists.iter().sum());
        let unchanged = next == labels;
        labels = next;
        if unchanged {
            break;
        }
        let means = cluster_means(data, &labels, k);
        let moves: Vec<f64> = centers
            .chunks_exact(f)
            .zip(means.chunks_exact(f))
            .map(|(a, b)| sq_euclidean(a, b).sqrt())
            .collect();
        let shift = moves.iter().copied().fold(0.0, f64::max);
        centers = means;
        if shift < config.tol {
            break;
        }
        loosen(&mut lower, &labels, &moves);
    }

    // Final labels are the nearest-center assignment of the returned centers.
    let (mut labels, mut dists) = assign(data, &centers, f);
    repair_empty(data, k, &mut labels, &mut dists, &mut centers);
    let inertia = dists.iter().sum();
    RestartTrace {
        assignment: CrispAssignment {
            labels,
            centroids: CentroidSet::from_raw(
                Array2::from_shape_vec((k, f), centers).expect("shape"),
            ),
            inertia,
        },
        inertia_history: history,
        iterations,
    }
}

/// Relative margin on bound comparisons. Far larger than the rounding in
/// the distances, so a skipped point is one a full scan would also keep.
const SLACK: f64 = 1e-12;

/// Nearest-center assignment that skips the full scan for points whose
/// current center is provably still nearest. Produces the same labels and
/// squared distances as [`assign`].
fn assign_bounded(
    data: &DataMatrix,
    centers: &[f64],
    f: usize,
    prev: &[usize],
    lower: &mut [f64],
) -> (Vec<usize>, Vec<f64>) {
    if prev.is_empty() {
        let scanned = par::map_indices(data.rows(), |i| nearest_two(data.row(i), centers, f));
        let mut labels = Vec::with_capacity(scanned.len());
        let mut dists = Vec::with_capacity(scanned.len());
        for (i, (l, d2, second)) in scanned.into_iter().enumerate() {
            labels.push(l);
            dists.push(d2);
            lower[i] = second.sqrt() * (1.0 - SLACK);
        }
        return (labels, dists);
    }
    // Half the distance from each center to its nearest other center.
    let half_gap: Vec<f64> = centers
        .chunks_exact(f)
        .enumerate()
        .map(|(j, c)| {
            let closest = centers
                .chunks_exact(f)
                .enumerate()
                .filter(|&(o, _)| o != j)
                .map(|(_, other)| sq_euclidean(c, other))
                .fold(f64::INFINITY, f64::min);
            0.5 * closest.sqrt() * (1.0 - SLACK)
        })
        .collect();
    let bounds: &[f64] = lower;
    let results = par::map_indices(data.rows(), |i| {
        let x = data.row(i);
        let a = prev[i];
        let d2 = sq_euclidean(x, &centers[a * f..(a + 1) * f]);
        if d2.sqrt() * (1.0 + SLACK) < half_gap[a].max(bounds[i]) {
            return (a, d2, bounds[i]);
        }
        let (l, d2, second) = nearest_two(x, centers, f);
        (l, d2, second.sqrt() * (1.0 - SLACK))
    });
    let mut labels = Vec::with_capacity(results.len());
    let mut dists = Vec::with_capacity(results.len());
    for (i, (l, d2, lb)) in results.into_iter().enumerate() {
        labels.push(l);
        dists.push(d2);
        lower[i] = lb;
    }
    (labels, dists)
}

/// Shrinks each lower bound by the largest move among the centers other
/// than the point's own.
fn loosen(lower: &mut [f64], labels: &[usize], moves: &[f64]) {
    let (mut top, mut top_at, mut runner_up) = (0.0, usize::MAX, 0.0);
    for (j, &m) in moves.iter().enumerate() {
        if m > top {
            runner_up = top;
            top = m;
            top_at = j;
        } else if m > runner_up {
            runner_up = m;
        }
    }
    for (lb, &l) in lower.iter_mut().zip(labels) {
        let m = if l == top_at { runner_up } else { top };
        *lb = ((*lb - m * (1.0 + SLACK)) * (1.0 - SLACK)).max(0.0);
    }
}

/// k-means++ seeding: first center uniform, each further center sampled with
/// probability proportional to its squared distance from the chosen set.
fn plus_plus(data: &DataMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = par::map_indices(n, |i| sq_euclidean(data.row(i), data.row(chosen[0])));
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            // Fewer distinct points than clusters: any unused index.
            let unused: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen.push(pick);
        let new_row = data.row(pick);
        let updated = par::map_indices(n, |i| d2[i].min(sq_euclidean(data.row(i), new_row)));
        d2 = updated;
    }
    chosen
        .iter()
        .flat_map(|&i| data.row(i).iter().copied())
        .collect()
}

fn assign(data: &DataMatrix, centers: &[f64], f: usize) -> (Vec<usize>, Vec<f64>) {
    par::map_indices(data.rows(), |i| nearest(data.row(i), centers, f))
        .into_iter()
        .unzip()
}

/// Gives every empty cluster the point farthest from its own center, taken
/// from a cluster that keeps at least one member. Returns whether anything
/// changed.
fn repair_empty(
    data: &DataMatrix,
    k: usize,
    labels: &mut [usize],
    dists: &mut [f64],
    centers: &mut [f64],
) -> bool {
    let f = data.features();
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    let mut repaired = false;
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
            .expect("n >= k guarantees a cluster with two members");
        sizes[labels[donor]] -= 1;
        sizes[empty] = 1;
        labels[donor] = empty;
        dists[donor] = 0.0;
        centers[empty * f..(empty + 1) * f].copy_from_slice(data.row(donor));
        repaired = true;
    }
    repaired
}

fn cluster_means(data: &DataMatrix, labels: &[usize], k: usize) -> Vec<f64> {
    let f = data.features();
    let partials = par::map_chunks(data.rows(), par::REDUCE_CHUNK, |range| {
        let mut sums = vec![0.0; k * f];
        let mut counts = vec![0usize; k];
        for i in range {
            let l = labels[i];
            counts[l] += 1;
            for (s, &x) in sums[l * f..(l + 1) * f].iter_mut().zip(data.row(i)) {
                *s += x;
            }
        }
        (sums, counts)
    });
    let mut sums = vec![0.0; k * f];
    let mut counts = vec![0usize; k];
    for (ps, pc) in partials {
        sums.iter_mut().zip(ps).for_each(|(a, b)| *a += b);
        counts.iter_mut().zip(pc).for_each(|(a, b)| *a += b);
    }
    for (j, &c) in counts.iter().enumerate() {
        sums[j * f..(j + 1) * f]
            .iter_mut()
            .for_each(|s| *s /= c as f64);
    }
    sums
}

/// Nearest-centroid labels; ties go to the lowest index.
pub fn kmeans_predict(assignment: &CrispAssignment, data: &DataMatrix) -> Result<Vec<usize>> {
    let f = assignment.centroids.features();
    if data.features() != f {
        return Err(Error::Input(format!(
            "data has {} features, centroids have {f}",
            data.features()
        )));
    }
    Ok(assign(data, assignment.centroids.as_slice(), f).0)
}

/// Sum of squared distances from each point to its labeled centroid.
pub fn inertia(data: &DataMatrix, labels: &[usize], centroids: &CentroidSet) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_euclidean(data.row(i), centroids.row(l)))
        .sum()
}
