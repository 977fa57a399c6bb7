mod common;

use std::path::PathBuf;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use repcx::lenet::{classify, forward, forward_batch, tanh_map, CaptureMode};
use repcx::tensor_io::{load_tensor, load_weights, LeNetWeights, Variant};
use repcx::Tensor;

fn torch_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/torch_lenet")
}

#[test]
fn eval_logits_match_pytorch() {
    let images = load_tensor(torch_dir().join("images.npy")).unwrap();
    let n = images.dims()[0];
    for variant in ["basic", "dropout"] {
        let w = load_weights(torch_dir().join(variant)).unwrap();
        let want = load_tensor(torch_dir().join(format!("logits_{variant}.npy"))).unwrap();
        let want: Vec<f64> = match want.data() {
            repcx::tensor_io::TensorData::F64(v) => v.clone(),
            _ => panic!("reference logits are f64"),
        };
        let batch = forward_batch(&w, &images.to_f32_vec(), CaptureMode::Eval, None, &[]).unwrap();
        for s in 0..n {
            let ours = &batch.logits[s * 10..(s + 1) * 10];
            let theirs = &want[s * 10..(s + 1) * 10];
            let scale = theirs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in ours.iter().zip(theirs) {
                assert!(
                    (*a as f64 - b).abs() <= 1e-4 * scale,
                    "{variant} sample {s}: {a} vs {b}"
                );
            }
        }
    }
}

fn tanh_f32(v: &[f32]) -> Vec<f32> {
    let below_one = 1.0 - f32::EPSILON / 2.0;
    v.iter()
        .map(|&x| ((x as f64).tanh() as f32).clamp(-below_one, below_one))
        .collect()
}

/// Basic LeNet-5 assembled from the naive kernels.
fn naive_lenet(w: &LeNetWeights, image: &[f32]) -> Vec<f32> {
    let a = tanh_f32(&naive_conv(
        image,
        (1, 32, 32),
        w.get("conv1.w"),
        (6, 5),
        w.get("conv1.b"),
        1,
    ));
    let a = naive_pool(&a, (6, 28, 28));
    let a = tanh_f32(&naive_conv(
        &a,
        (6, 14, 14),
        w.get("conv2.w"),
        (16, 5),
        w.get("conv2.b"),
        1,
    ));
    let a = naive_pool(&a, (16, 10, 10));
    let a = tanh_f32(&naive_conv(
        &a,
        (16, 5, 5),
        w.get("conv3.w"),
        (120, 5),
        w.get("conv3.b"),
        1,
    ));
    let a = tanh_f32(&naive_linear(&a, w.get("linr1.w"), w.get("linr1.b")));
    naive_linear(&a, w.get("linr2.w"), w.get("linr2.b"))
}

#[test]
fn forward_equals_composed_naive_kernels() {
    let mut r = rng(8);
    for variant in [Variant::Basic, Variant::Dropout] {
        let w = LeNetWeights::seeded_random(variant, 21);
        for _ in 0..5 {
            let image: Vec<f32> = (0..1024).map(|_| r.random_range(0.0..1.0)).collect();
            let t = Tensor::from_f32(vec![1, 32, 32], image.clone()).unwrap();
            let (_, logits) = forward(&w, &t, CaptureMode::Eval, None).unwrap();
            assert_eq!(logits, naive_lenet(&w, &image));
        }
    }
}

#[test]
fn train_dropout_batches_reproduce_per_seed() {
    let mut r = rng(3);
    let w = LeNetWeights::seeded_random(Variant::Dropout, 4);
    let images: Vec<f32> = (0..6 * 1024).map(|_| r.random_range(0.0..1.0)).collect();
    let run = |seed| forward_batch(&w, &images, CaptureMode::TrainDropout, Some(seed), &[13]).unwrap();
    let (a, b, c) = (run(7), run(7), run(8));
    assert_eq!(a.captured[0].1, b.captured[0].1);
    assert_eq!(a.logits, b.logits);
    assert_ne!(a.logits, c.logits);
    let (trace, logits) = forward(
        &w,
        &Tensor::from_f32(vec![1, 32, 32], images[..1024].to_vec()).unwrap(),
        CaptureMode::TrainDropout,
        Some(7),
    )
    .unwrap();
    assert_eq!(&logits[..], &a.logits[..10]);
    assert_eq!(trace.tensors.len(), 16);
}

/// Argmax of softmax probabilities computed in f64; first maximum wins.
fn softmax_argmax(logits: &[f32]) -> usize {
    let m = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let exp: Vec<f64> = logits.iter().map(|&v| (v as f64 - m).exp()).collect();
    let total: f64 = exp.iter().sum();
    let probs: Vec<f64> = exp.iter().map(|e| e / total).collect();
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

proptest! {
    #[test]
    fn classify_is_softmax_argmax(logits in prop::collection::vec(-20i32..20, 10)) {
        // quarter steps keep differences large enough that softmax never merges them
        let logits: Vec<f32> = logits.into_iter().map(|v| v as f32 / 4.0).collect();
        prop_assert_eq!(classify(&logits), softmax_argmax(&logits));
    }

    #[test]
    fn tanh_is_odd_and_strictly_bounded(v in prop::collection::vec(prop::num::f32::NORMAL | prop::num::f32::ZERO, 1..64)) {
        let out = tanh_map(&Tensor::from_f32(vec![v.len()], v.clone()).unwrap()).to_f32_vec();
        let neg = tanh_map(&Tensor::from_f32(vec![v.len()], v.iter().map(|x| -x).collect()).unwrap()).to_f32_vec();
        for ((&y, &z), &x) in out.iter().zip(&neg).zip(&v) {
            prop_assert!(y > -1.0 && y < 1.0);
            prop_assert_eq!(y, -z);
            prop_assert!((y as f64 - (x as f64).tanh()).abs() <= f32::EPSILON as f64);
        }
    }
}
