//! Naive reference implementations shared by the integration tests.
//!
//! Everything here is written from the definitions, without reusing library
//! internals, so agreement with the library is evidence rather than tautology.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repcx::LabeledPointSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nearest other point by brute force: strict `<` keeps the lowest index on ties.
pub fn brute_neighbors(points: &[f32], dim: usize) -> Vec<usize> {
    let n = points.len() / dim;
    (0..n)
        .map(|i| {
            let mut best = (f64::INFINITY, usize::MAX);
            for j in (0..n).filter(|&j| j != i) {
                let mut d = 0.0f64;
                for k in 0..dim {
                    let diff = points[i * dim + k] as f64 - points[j * dim + k] as f64;
                    d += diff * diff;
                }
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect()
}

pub fn brute_error(points: &[f32], dim: usize, labels: &[u32]) -> f64 {
    let nb = brute_neighbors(points, dim);
    let wrong = nb.iter().enumerate().filter(|&(i, &j)| labels[i] != labels[j]).count();
    wrong as f64 / labels.len() as f64
}

/// Contiguous-block subset mean, tail dropped; the whole set when `n <= m`.
pub fn brute_subset_mean(points: &[f32], dim: usize, labels: &[u32], m: usize) -> (f64, Vec<f64>) {
    let n = labels.len();
    if n <= m {
        let e = brute_error(points, dim, labels);
        return (e, vec![e]);
    }
    let per: Vec<f64> = (0..n / m)
        .map(|k| {
            brute_error(
                &points[k * m * dim..(k + 1) * m * dim],
                dim,
                &labels[k * m..(k + 1) * m],
            )
        })
        .collect();
    (per.iter().sum::<f64>() / per.len() as f64, per)
}

/// Gaussian-ish clusters, one centre per class, so errors are neither 0 nor chance.
pub fn clustered_set(r: &mut impl Rng, n: usize, dim: usize, classes: u32, spread: f32) -> LabeledPointSet {
    let centres: Vec<f32> = (0..classes as usize * dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut points = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = r.random_range(0..classes);
        labels.push(c);
        for k in 0..dim {
            let noise: f32 = (0..3).map(|_| r.random_range(-1.0f32..1.0)).sum();
            points.push(centres[c as usize * dim + k] + spread * noise);
        }
    }
    LabeledPointSet::new(points, dim, labels, classes).unwrap()
}

/// Points on a coarse integer grid: exact duplicates and equidistant ties are common.
pub fn grid_set(r: &mut impl Rng, n: usize, dim: usize, classes: u32, levels: i32) -> LabeledPointSet {
    let points = (0..n * dim).map(|_| r.random_range(0..levels) as f32).collect();
    let labels = (0..n).map(|_| r.random_range(0..classes)).collect();
    LabeledPointSet::new(points, dim, labels, classes).unwrap()
}

/// Cross-correlation, f64 accumulation starting from the bias, stored as f32.
pub fn naive_conv(
    input: &[f32],
    (c, h, w): (usize, usize, usize),
    kernel: &[f32],
    (o, k): (usize, usize),
    bias: &[f32],
    stride: usize,
) -> Vec<f32> {
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let mut out = vec![0.0f32; o * oh * ow];
    for oc in 0..o {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias[oc] as f64;
                for ic in 0..c {
                    for i in 0..k {
                        for j in 0..k {
                            let xv = input[ic * h * w + (y * stride + i) * w + x * stride + j] as f64;
                            let wv = kernel[((oc * c + ic) * k + i) * k + j] as f64;
                            acc += xv * wv;
                        }
                    }
                }
                out[(oc * oh + y) * ow + x] = acc as f32;
            }
        }
    }
    out
}

pub fn naive_pool(input: &[f32], (c, h, w): (usize, usize, usize)) -> Vec<f32> {
    let mut out = Vec::with_capacity(c * (h / 2) * (w / 2));
    for ch in 0..c {
        for y in 0..h / 2 {
            for x in 0..w / 2 {
                let at = |dy: usize, dx: usize| input[ch * h * w + (2 * y + dy) * w + 2 * x + dx] as f64;
                out.push(((at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1)) / 4.0) as f32);
            }
        }
    }
    out
}

pub fn naive_linear(v: &[f32], weight: &[f32], bias: &[f32]) -> Vec<f32> {
    let d = v.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| {
            let mut acc = b as f64;
            for k in 0..d {
                acc += weight[o * d + k] as f64 * v[k] as f64;
            }
            acc as f32
        })
        .collect()
}

/// tanh to 25 significant digits at exactly representable f64 arguments,
/// computed once with 50-digit arithmetic.
#[allow(clippy::excessive_precision)]
pub const TANH_TABLE: &[(f64, f64)] = &[
    (0.0, 0.0),
    (1e-300, 1.000000000000000025059092e-300),
    (1e-12, 9.999999999999999798866473e-13),
    (1e-08, 9.999999999999999875892275e-9),
    (-3e-05, -0.00002999999999100000076326572),
    (0.001, 0.0009999996666668000207626927),
    (-0.1, -0.09966799462495582261427704),
    (0.25, 0.2449186624037091292778011),
    (0.5, 0.4621171572600097585023185),
    (-0.75, -0.6351489523872873192144344),
    (1.0, 0.7615941559557648881194583),
    (1.5, 0.9051482536448664382423037),
    (-2.0, -0.9640275800758168839464137),
    (2.5, 0.986614298151430288881276),
    (3.0, 0.9950547536867304513318802),
    (-5.0, -0.9999092042625951312109904),
    (7.5, 0.9999993881955461487505497),
    (10.0, 0.9999999958776927636195928),
    (-18.0, -0.999999999999999536095434),
    (19.0, 0.9999999999999999372173442),
    (20.0, 0.9999999999999999915032915),
    (-25.0, -0.9999999999999999999996143),
    (40.0, 1.0),
    (100.0, 1.0),
    (std::f64::consts::FRAC_1_SQRT_2, 0.6088593650139138408036135),
    (-1.2345678901234567, -0.8438991991116104914894662),
];
