use crate::error::{Error, Result};

/// Squared Euclidean distance, accumulated left to right in f64.
///
/// This is the reference path: every nearest-neighbor decision is settled
/// with it, whatever screening computed the candidates.
#[inline]
pub fn squared_distance_unchecked(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    acc
}

pub fn squared_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "point lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(squared_distance_unchecked(a, b))
}
