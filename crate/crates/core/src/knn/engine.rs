//! Exact leave-one-out nearest-neighbor search.
//!
//! Query rows are processed in strips. For each strip the Gram products
//! against every point are formed with a blocked f64 GEMM and turned into
//! approximate squared distances `|q|² + |p|² - 2 q·p`. The expansion is only
//! a screen: every point whose approximate distance lies within a margin of
//! the strip row's best is re-scored with [`squared_distance_unchecked`], and
//! the winner is chosen on those reference values with ties going to the
//! lowest index. The margin bounds the expansion's rounding error, so the
//! chosen neighbor is exactly the one a brute-force scan would choose.

use rayon::prelude::*;

use super::distance::squared_distance_unchecked;
use crate::tensor_io::LabeledPointSet;

/// Re-score candidates within this relative margin of the screened best.
const RELATIVE_MARGIN: f64 = 1e-6;
/// Absolute slack, relative to the operand norms, covering cancellation
/// in the Gram expansion when the best distance is near zero.
const NORM_MARGIN: f64 = 1e-9;
/// Approximate-distance entries held per strip.
const STRIP_ENTRIES: usize = 1 << 21;

/// For every point, the index of its nearest other point.
///
/// Requires at least two points. Results do not depend on the rayon pool size.
pub(crate) fn nearest_other_indices(set: &LabeledPointSet) -> Vec<usize> {
    let n = set.len();
    let d = set.dim();
    debug_assert!(n >= 2);
    if d == 0 {
        // every distance is zero; the lowest other index wins
        return (0..n).map(|i| usize::from(i == 0)).collect();
    }

    let rows: Vec<f64> = set.points().iter().map(|&v| v as f64).collect();
    let norms: Vec<f64> = rows.chunks_exact(d).map(|r| r.iter().map(|v| v * v).sum()).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);

    let strip = (STRIP_ENTRIES / n).clamp(8, 256);
    let starts: Vec<usize> = (0..n).step_by(strip).collect();

    starts
        .par_iter()
        .flat_map_iter(|&start| {
            let rows_here = strip.min(n - start);
            let mut gram = vec![0.0f64; rows_here * n];
            // gram[q, j] = row[start + q] · row[j]
            unsafe {
                matrixmultiply::dgemm(
                    rows_here,
                    d,
                    n,
                    1.0,
                    rows[start * d..].as_ptr(),
                    d as isize,
                    1,
                    rows.as_ptr(),
                    1,
                    d as isize,
                    0.0,
                    gram.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
            let mut candidates = Vec::new();
            (0..rows_here)
                .map(|q| {
                    let i = start + q;
                    let g = &gram[q * n..(q + 1) * n];
                    let approx = |j: usize| norms[i] + norms[j] - 2.0 * g[j];
                    let best = (0..n).filter(|&j| j != i).map(approx).fold(f64::INFINITY, f64::min);
                    let tol = RELATIVE_MARGIN * best.abs() + NORM_MARGIN * (norms[i] + max_norm);
                    candidates.clear();
                    candidates.extend((0..n).filter(|&j| j != i && approx(j) <= best + tol));
                    resolve(set, i, &candidates)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Picks the reference-nearest among ascending `candidates`, lowest index on ties.
fn resolve(set: &LabeledPointSet, i: usize, candidates: &[usize]) -> usize {
    let query = set.point(i);
    let mut best = (f64::INFINITY, usize::MAX);
    for &j in candidates {
        let dist = squared_distance_unchecked(query, set.point(j));
        if dist < best.0 {
            best = (dist, j);
            if dist == 0.0 {
                // nothing can beat zero, and later candidates have larger indices
                break;
            }
        }
    }
    best.1
}
