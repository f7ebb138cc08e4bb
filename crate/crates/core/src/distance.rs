//! Euclidean distance kernels on row slices.

/// Squared Euclidean distance. Uses four independent accumulators so the
/// loop vectorizes; the summation order is fixed.
#[inline]
pub fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sq_euclidean(a, b).sqrt()
}

/// Index and squared distance of the nearest row of `centers` (row-major,
/// `width` columns). Ties go to the lowest index.
#[inline]
pub fn nearest(point: &[f64], centers: &[f64], width: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.chunks_exact(width).enumerate() {
        let d = sq_euclidean(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Like [`nearest`], also returning the second-smallest squared distance.
#[inline]
pub fn nearest_two(point: &[f64], centers: &[f64], width: usize) -> (usize, f64, f64) {
    let (mut best, mut d_best, mut d_second) = (0, f64::INFINITY, f64::INFINITY);
    for (j, c) in centers.chunks_exact(width).enumerate() {
        let d = sq_euclidean(point, c);
        if d < d_best {
            d_second = d_best;
            best = j;
            d_best = d;
        } else if d < d_second {
            d_second = d;
        }
    }
    (best, d_best, d_second)
}
