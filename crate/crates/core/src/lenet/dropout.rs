//! Inverted dropout with reproducible masks.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor_io::Tensor;

pub const DROPOUT_P: f64 = 0.2;

fn check_p(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Parameter(format!(
            "dropout probability must be in [0, 1), got {p}"
        )));
    }
    Ok(())
}

/// Draws a keep-mask: one entry per unit, `false` meaning dropped.
///
/// A unit is dropped when a uniform f64 draw in `[0, 1)` is below `p`.
pub fn draw_mask<R: Rng + ?Sized>(units: usize, p: f64, rng: &mut R) -> Vec<bool> {
    (0..units).map(|_| rng.random::<f64>() >= p).collect()
}

/// Zeroes dropped units and scales survivors by `1 / (1 - p)`.
///
/// With `channelwise`, `keep` has one entry per leading-axis channel and the
/// whole channel shares it; otherwise one entry per element.
pub(crate) fn apply_mask_in_place(v: &mut [f32], keep: &[bool], p: f64) {
    let scale = 1.0 / (1.0 - p);
    let per_unit = v.len() / keep.len().max(1);
    for (chunk, &k) in v.chunks_mut(per_unit.max(1)).zip(keep) {
        for x in chunk {
            *x = if k { (*x as f64 * scale) as f32 } else { 0.0 };
        }
    }
}

fn units_of(t: &Tensor, channelwise: bool) -> usize {
    match (channelwise, t.dims().first()) {
        (true, Some(&c)) => c,
        _ => t.numel(),
    }
}

/// Applies dropout with an explicit keep-mask.
pub fn dropout_with_mask(t: &Tensor, p: f64, keep: &[bool], channelwise: bool) -> Result<Tensor> {
    check_p(p)?;
    let units = units_of(t, channelwise);
    if keep.len() != units {
        return Err(Error::Dimension(format!(
            "mask has {} entries, expected {units}",
            keep.len()
        )));
    }
    let mut v = t.to_f32_vec();
    apply_mask_in_place(&mut v, keep, p);
    Tensor::from_f32(t.dims().to_vec(), v)
}

/// Draws a mask from `rng` and applies it.
pub fn dropout_apply<R: Rng + ?Sized>(t: &Tensor, p: f64, rng: &mut R, channelwise: bool) -> Result<Tensor> {
    check_p(p)?;
    let keep = draw_mask(units_of(t, channelwise), p, rng);
    dropout_with_mask(t, p, &keep, channelwise)
}
