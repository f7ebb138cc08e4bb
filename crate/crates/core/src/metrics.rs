//! Silhouette index.
//!
//! For point `i` in cluster `C`: `a(i)` is the mean distance to the other
//! members of `C`, `b(i)` the smallest mean distance to the members of any
//! other cluster, and `s(i) = (b − a) / max(a, b)`. Points alone in their
//! cluster score 0. Distances are Euclidean.
//!
//! The exact computation is `O(n²·f)`. It streams per-cluster distance sums
//! through cache-sized tiles instead of materializing the distance matrix,
//! evaluates each unordered pair of tiles once, and [`silhouette_many`]
//! scores several labelings of the same points in a single pass.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::par;

/// Rows per tile on either side of the distance computation.
const TILE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub s: Vec<f64>,
    pub mean_si: f64,
    /// Mean of `s` over each cluster's members, indexed by label.
    pub per_cluster_mean: Vec<f64>,
}

impl SilhouetteReport {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

pub fn silhouette(data: &DataMatrix, labels: &[usize]) -> Result<SilhouetteReport> {
    let mut reports = silhouette_many(data, &[labels])?;
    Ok(reports.pop().expect("one labeling"))
}

/// Mean silhouette value of a report.
pub fn mean_si(report: &SilhouetteReport) -> f64 {
    report.s.iter().sum::<f64>() / report.s.len() as f64
}

/// Silhouette reports for several labelings of the same data. Each report
/// is identical to what [`silhouette`] returns for that labeling alone.
pub fn silhouette_many(data: &DataMatrix, labelings: &[&[usize]]) -> Result<Vec<SilhouetteReport>> {
    let n = data.rows();
    if n < 3 {
        return Err(Error::Input(format!(
            "silhouette needs at least 3 points, got {n}"
        )));
    }
    let mut ks = Vec::with_capacity(labelings.len());
    let mut sizes = Vec::with_capacity(labelings.len());
    for labels in labelings {
        let (k, size) = cluster_sizes(labels, n)?;
        ks.push(k);
        sizes.push(size);
    }
    if labelings.is_empty() {
        return Ok(Vec::new());
    }

    // Column offset of each labeling inside a point's row of sums.
    let mut offsets = Vec::with_capacity(ks.len());
    let mut width = 0;
    for &k in &ks {
        offsets.push(width);
        width += k;
    }
    // Per point, the absolute sum slot it feeds for each labeling.
    let slots: Vec<u32> = (0..n)
        .flat_map(|j| {
            labelings
                .iter()
                .zip(&offsets)
                .map(move |(l, &off)| (off + l[j]) as u32)
        })
        .collect();
    let sets = labelings.len();

    let sums = distance_sums(data, &slots, sets, width);

    let mut reports: Vec<SilhouetteReport> = ks
        .iter()
        .map(|_| SilhouetteReport {
            a: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            s: Vec::with_capacity(n),
            mean_si: 0.0,
            per_cluster_mean: Vec::new(),
        })
        .collect();
    for (i, row) in sums.chunks_exact(width).enumerate() {
        for (set, report) in reports.iter_mut().enumerate() {
            let own = labelings[set][i];
            let local = &row[offsets[set]..offsets[set] + ks[set]];
            let (a, b, s) = point_score(local, &sizes[set], own);
            report.a.push(a);
            report.b.push(b);
            report.s.push(s);
        }
    }
    for (set, report) in reports.iter_mut().enumerate() {
        report.mean_si = mean_si(report);
        let mut totals = vec![0.0; ks[set]];
        for (&l, &s) in labelings[set].iter().zip(&report.s) {
            totals[l] += s;
        }
        report.per_cluster_mean = totals
            .iter()
            .zip(&sizes[set])
            .map(|(t, &c)| t / c as f64)
            .collect();
    }
    Ok(reports)
}

/// Number of clusters (largest label + 1) and member counts. Every label
/// below the largest must be used, and at least two clusters must exist.
fn cluster_sizes(labels: &[usize], n: usize) -> Result<(usize, Vec<usize>)> {
    if labels.len() != n {
        return Err(Error::Input(format!(
            "{} labels for {n} points",
            labels.len()
        )));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Input(format!("cluster {empty} has no members")));
    }
    if k < 2 {
        return Err(Error::UndefinedMetric(format!(
            "need at least 2 clusters, got {k}"
        )));
    }
    Ok((k, sizes))
}

/// Distance sums from every point to every cluster of every labeling, as
/// an `n × width` row-major buffer. Tile pairs are visited in a fixed
/// round-robin schedule whose rounds touch disjoint tiles, so the order in
/// which each sum accumulates never depends on the thread count.
fn distance_sums(data: &DataMatrix, slots: &[u32], sets: usize, width: usize) -> Vec<f64> {
    let n = data.rows();
    let stride = TILE * width;
    let mut sums = vec![0.0; n * width];

    let diagonal: Vec<(usize, &mut [f64])> = sums.chunks_mut(stride).enumerate().collect();
    par::for_each_owned(diagonal, |(b, out)| {
        let rows = tile_rows(b, n);
        tile_pair(data, rows.clone(), rows, slots, sets, width, out, None);
    });

    for round in round_robin(n.div_ceil(TILE)) {
        let mut tiles: Vec<Option<&mut [f64]>> = sums.chunks_mut(stride).map(Some).collect();
        let work: Vec<_> = round
            .into_iter()
            .map(|(p, q)| {
                let left = tiles[p].take().expect("tiles in a round are disjoint");
                let right = tiles[q].take().expect("tiles in a round are disjoint");
                (p, q, left, right)
            })
            .collect();
        par::for_each_owned(work, |(p, q, left, right)| {
            tile_pair(
                data,
                tile_rows(p, n),
                tile_rows(q, n),
                slots,
                sets,
                width,
                left,
                Some(right),
            );
        });
    }
    sums
}

fn tile_rows(tile: usize, n: usize) -> Range<usize> {
    tile * TILE..((tile + 1) * TILE).min(n)
}

/// Circle-method schedule: every unordered pair of distinct tiles appears
/// exactly once, and no tile appears twice within a round.
fn round_robin(tiles: usize) -> Vec<Vec<(usize, usize)>> {
    if tiles < 2 {
        return Vec::new();
    }
    let m = tiles + tiles % 2;
    let ring = m - 1;
    (0..ring)
        .map(|r| {
            std::iter::once((r, m - 1))
                .chain((1..m / 2).map(|k| ((r + k) % ring, (r + ring - k) % ring)))
                .filter(|&(p, q)| p < tiles && q < tiles)
                .map(|(p, q)| (p.min(q), p.max(q)))
                .collect()
        })
        .collect()
}

/// Adds the distances between the `rows` tile and the `cols` tile into the
/// sums of `rows` (`left`) and, when given, of `cols` (`right`).
#[allow(clippy::too_many_arguments)]
fn tile_pair(
    data: &DataMatrix,
    rows: Range<usize>,
    cols: Range<usize>,
    slots: &[u32],
    sets: usize,
    width: usize,
    left: &mut [f64],
    right: Option<&mut [f64]>,
) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: AVX2 support was just checked.
        return unsafe { tile_pair_avx2(data, rows, cols, slots, sets, width, left, right) };
    }
    tile_pair_body(data, rows, cols, slots, sets, width, left, right)
}

// Same operations in the same order as the portable path, so both produce
// identical bits.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
#[allow(clippy::too_many_arguments)]
fn tile_pair_avx2(
    data: &DataMatrix,
    rows: Range<usize>,
    cols: Range<usize>,
    slots: &[u32],
    sets: usize,
    width: usize,
    left: &mut [f64],
    right: Option<&mut [f64]>,
) {
    tile_pair_body(data, rows, cols, slots, sets, width, left, right)
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn tile_pair_body(
    data: &DataMatrix,
    rows: Range<usize>,
    cols: Range<usize>,
    slots: &[u32],
    sets: usize,
    width: usize,
    left: &mut [f64],
    right: Option<&mut [f64]>,
) {
    let f = data.features();
    let x = data.as_slice();
    // Both tiles transposed to feature-major, zero padded to TILE points.
    let transpose = |range: &Range<usize>| {
        let mut t = vec![0.0; f * TILE];
        for (c, j) in range.clone().enumerate() {
            for (p, &v) in x[j * f..(j + 1) * f].iter().enumerate() {
                t[p * TILE + c] = v;
            }
        }
        t
    };
    let col_t = transpose(&cols);

    // dist[r][c] = d(rows[r], cols[c]); padded columns hold garbage and are
    // never read.
    let mut dist = vec![0.0; TILE * TILE];
    for (xi, out) in x[rows.start * f..rows.end * f]
        .chunks_exact(f)
        .zip(dist.chunks_exact_mut(TILE))
    {
        let mut acc = [0.0f64; TILE];
        for (&v, col) in xi.iter().zip(col_t.chunks_exact(TILE)) {
            for (a, &y) in acc.iter_mut().zip(col) {
                let d = v - y;
                *a += d * d;
            }
        }
        for (o, a) in out.iter_mut().zip(acc) {
            *o = a.sqrt();
        }
    }

    // Slot-major partial sums so every inner loop runs over contiguous points.
    let mut by_slot = vec![0.0; width * TILE];
    let mut add_side = |out: &mut [f64],
                        points: &Range<usize>,
                        others: &Range<usize>,
                        d_of: &dyn Fn(usize) -> [f64; TILE]| {
        by_slot.iter_mut().for_each(|v| *v = 0.0);
        for (o, j) in others.clone().enumerate() {
            let d = d_of(o);
            for &slot in &slots[j * sets..(j + 1) * sets] {
                let acc = &mut by_slot[slot as usize * TILE..(slot as usize + 1) * TILE];
                for (a, v) in acc.iter_mut().zip(d) {
                    *a += v;
                }
            }
        }
        for r in 0..points.len() {
            for (slot, o) in out[r * width..(r + 1) * width].iter_mut().enumerate() {
                *o += by_slot[slot * TILE + r];
            }
        }
    };

    // Row side: for column point c, the distances to every row point.
    add_side(left, &rows, &cols, &|c| {
        std::array::from_fn(|r| dist[r * TILE + c])
    });
    if let Some(right) = right {
        add_side(right, &cols, &rows, &|r| {
            dist[r * TILE..(r + 1) * TILE].try_into().expect("tile row")
        });
    }
}

fn point_score(sums: &[f64], sizes: &[usize], own: usize) -> (f64, f64, f64) {
    let b = sums
        .iter()
        .zip(sizes)
        .enumerate()
        .filter(|&(c, _)| c != own)
        .map(|(_, (s, &size))| s / size as f64)
        .fold(f64::INFINITY, f64::min);
    if sizes[own] <= 1 {
        return (0.0, b, 0.0);
    }
    let a = sums[own] / (sizes[own] - 1) as f64;
    let denom = a.max(b);
    let s = if denom > 0.0 {
        ((b - a) / denom).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    (a, b, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::euclidean;
    use approx::assert_abs_diff_eq;

    fn data(rows: &[Vec<f64>]) -> DataMatrix {
        DataMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn hand_value() {
        let d = data(&[vec![0.0], vec![1.0], vec![10.0], vec![11.0]]);
        let r = silhouette(&d, &[0, 0, 1, 1]).unwrap();
        // a = 1, b = (10 + 11) / 2
        assert_eq!(r.a[0], 1.0);
        assert_eq!(r.b[0], 10.5);
        assert_abs_diff_eq!(r.s[0], 9.5 / 10.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.s[0], 0.9048, epsilon = 1e-4);
    }

    #[test]
    fn perfect_cohesion() {
        let d = data(&[
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![50.0, 1.0],
            vec![50.0, 1.0],
        ]);
        let r = silhouette(&d, &[0, 0, 1, 1]).unwrap();
        assert!(r.a.iter().all(|&a| a == 0.0));
        assert!(r.s.iter().all(|&s| s == 1.0));
        assert_eq!(r.mean_si, 1.0);
        assert_eq!(r.per_cluster_mean, vec![1.0, 1.0]);
    }

    #[test]
    fn misplaced_point_scores_negative() {
        // Cluster 1 is centered on (10, 0); point 5 sits there but is labeled 0.
        let d = data(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![9.0, 0.0],
            vec![11.0, 0.0],
            vec![10.0, 1.0],
            vec![10.0, -1.0],
        ]);
        let labels = [0, 0, 1, 1, 1, 0];
        let r = silhouette(&d, &labels).unwrap();
        // Brute force for point 5.
        let own = (d.row(0), d.row(1));
        let a5 = (euclidean(d.row(5), own.0) + euclidean(d.row(5), own.1)) / 2.0;
        let b5 = (2..5).map(|j| euclidean(d.row(5), d.row(j))).sum::<f64>() / 3.0;
        assert_abs_diff_eq!(r.s[5], (b5 - a5) / a5.max(b5), epsilon = 1e-12);
        assert!(r.s[5] < 0.0);
    }

    #[test]
    fn singleton_scores_zero() {
        let d = data(&[vec![0.0], vec![1.0], vec![5.0]]);
        let r = silhouette(&d, &[0, 0, 1]).unwrap();
        assert_eq!(r.s[2], 0.0);
        assert_eq!(r.per_cluster_mean[1], 0.0);
    }

    #[test]
    fn mean_examples() {
        let mut r = silhouette(&data(&[vec![0.0], vec![1.0], vec![5.0]]), &[0, 0, 1]).unwrap();
        r.s = vec![1.0, 1.0, 1.0];
        assert_eq!(mean_si(&r), 1.0);
        r.s = vec![1.0, 0.0, -1.0];
        assert_eq!(mean_si(&r), 0.0);
    }

    #[test]
    fn errors() {
        let d = data(&[vec![0.0], vec![1.0], vec![5.0]]);
        assert!(matches!(
            silhouette(&d, &[0, 0, 0]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(silhouette(&d, &[0, 2, 2]), Err(Error::Input(_))));
        assert!(matches!(silhouette(&d, &[0, 1]), Err(Error::Input(_))));
        let two = data(&[vec![0.0], vec![1.0]]);
        assert!(matches!(silhouette(&two, &[0, 1]), Err(Error::Input(_))));
    }

    #[test]
    fn schedule_covers_each_pair_once() {
        for tiles in 0..12 {
            let mut seen = std::collections::BTreeSet::new();
            for round in round_robin(tiles) {
                let mut used = std::collections::BTreeSet::new();
                for (p, q) in round {
                    assert!(p < q && q < tiles);
                    assert!(used.insert(p) && used.insert(q));
                    assert!(seen.insert((p, q)));
                }
            }
            assert_eq!(seen.len(), tiles * tiles.saturating_sub(1) / 2);
        }
    }

    #[test]
    fn spans_several_tiles() {
        // 200 points cover four tiles, the last one partial.
        let d = crate::dataset::generate_blobs(&crate::BlobSpec {
            n_samples: 200,
            n_features: 5,
            n_centroids: 3,
            cluster_std: 2.0,
            seed: 9,
        })
        .unwrap();
        let labels = d.labels().unwrap().to_vec();
        let r = silhouette(&d, &labels).unwrap();
        for i in [0, 63, 64, 150, 199] {
            let mean_to = |c: usize, skip: bool| {
                let members: Vec<usize> = (0..200)
                    .filter(|&j| labels[j] == c && !(skip && j == i))
                    .collect();
                members
                    .iter()
                    .map(|&j| euclidean(d.row(i), d.row(j)))
                    .sum::<f64>()
                    / members.len() as f64
            };
            let a = mean_to(labels[i], true);
            let b = (0..3)
                .filter(|&c| c != labels[i])
                .map(|c| mean_to(c, false))
                .fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(r.a[i], a, epsilon = 1e-12);
            assert_abs_diff_eq!(r.b[i], b, epsilon = 1e-12);
        }
    }

    #[test]
    fn batched_reports_match_single() {
        let d = crate::dataset::generate_blobs(&crate::BlobSpec {
            n_samples: 150,
            n_features: 3,
            n_centroids: 3,
            cluster_std: 3.0,
            seed: 5,
        })
        .unwrap();
        let l2: Vec<usize> = (0..150).map(|i| i % 2).collect();
        let l4: Vec<usize> = (0..150).map(|i| (i * 7) % 4).collect();
        let truth = d.labels().unwrap().to_vec();
        let many = silhouette_many(&d, &[&l2, &l4, &truth]).unwrap();
        assert_eq!(many[0], silhouette(&d, &l2).unwrap());
        assert_eq!(many[1], silhouette(&d, &l4).unwrap());
        assert_eq!(many[2], silhouette(&d, &truth).unwrap());
    }
}
