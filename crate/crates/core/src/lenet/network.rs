use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dropout::{apply_mask_in_place, draw_mask, DROPOUT_P};
use super::kernels::{avgpool2_into, classify, conv2d_into, linear_into, tanh_in_place, ConvShape};
use crate::error::{Error, Result};
use crate::tensor_io::{LabeledPointSet, LeNetWeights, Tensor, Variant};

pub const INPUT_DIMS: [usize; 3] = [1, 32, 32];
const INPUT_LEN: usize = 32 * 32;
const NUM_CLASSES: usize = 10;
/// Samples forwarded per parallel chunk when capturing a batch.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerKind {
    Conv {
        weight: &'static str,
        bias: &'static str,
        shape: ConvShape,
    },
    Tanh,
    AvgPool {
        channels: usize,
        height: usize,
        width: usize,
    },
    /// Dropout with p=0.2; `channelwise` drops whole feature maps.
    Dropout {
        channelwise: bool,
    },
    Linear {
        weight: &'static str,
        bias: &'static str,
        inputs: usize,
        outputs: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: &'static str,
    pub kind: LayerKind,
    /// Dims of this layer's output for one sample.
    pub out_dims: Vec<usize>,
}

fn conv(weight: &'static str, bias: &'static str, c: usize, hw: usize, o: usize) -> LayerKind {
    LayerKind::Conv {
        weight,
        bias,
        shape: ConvShape {
            in_channels: c,
            height: hw,
            width: hw,
            out_channels: o,
            kernel: 5,
            stride: 1,
        },
    }
}

/// The layer sequence of a variant, in forward order.
pub fn layers(variant: Variant) -> Vec<Layer> {
    let with_drop = variant == Variant::Dropout;
    let mut out = Vec::new();
    let mut push = |name, kind, dims: &[usize]| {
        out.push(Layer {
            name,
            kind,
            out_dims: dims.to_vec(),
        })
    };

    push("conv1", conv("conv1.w", "conv1.b", 1, 32, 6), &[6, 28, 28]);
    if with_drop {
        push("drop1", LayerKind::Dropout { channelwise: true }, &[6, 28, 28]);
    }
    push("tanh1", LayerKind::Tanh, &[6, 28, 28]);
    push(
        "pool1",
        LayerKind::AvgPool {
            channels: 6,
            height: 28,
            width: 28,
        },
        &[6, 14, 14],
    );
    push("conv2", conv("conv2.w", "conv2.b", 6, 14, 16), &[16, 10, 10]);
    if with_drop {
        push("drop2", LayerKind::Dropout { channelwise: true }, &[16, 10, 10]);
    }
    push("tanh2", LayerKind::Tanh, &[16, 10, 10]);
    push(
        "pool2",
        LayerKind::AvgPool {
            channels: 16,
            height: 10,
            width: 10,
        },
        &[16, 5, 5],
    );
    push("conv3", conv("conv3.w", "conv3.b", 16, 5, 120), &[120, 1, 1]);
    if with_drop {
        push("drop3", LayerKind::Dropout { channelwise: true }, &[120, 1, 1]);
    }
    // the classifier sees the flattened feature vector
    push("tanh3", LayerKind::Tanh, &[120]);
    let linr1 = LayerKind::Linear {
        weight: "linr1.w",
        bias: "linr1.b",
        inputs: 120,
        outputs: 84,
    };
    push("linr1", linr1, &[84]);
    if with_drop {
        push("drop4", LayerKind::Dropout { channelwise: false }, &[84]);
    }
    push("tanh4", LayerKind::Tanh, &[84]);
    let linr2 = LayerKind::Linear {
        weight: "linr2.w",
        bias: "linr2.b",
        inputs: 84,
        outputs: 10,
    };
    push("linr2", linr2, &[10]);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Entry,
    Exit,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Entry => "entry",
            Side::Exit => "exit",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entry" => Ok(Side::Entry),
            "exit" => Ok(Side::Exit),
            other => Err(Error::Parameter(format!("unknown side '{other}'"))),
        }
    }
}

/// A distinct tensor along the forward pass.
///
/// Boundary 0 is the input (entry of the first layer); boundary k ≥ 1 is the
/// exit of layer k, which is also the entry of layer k+1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundaryId {
    pub index: usize,
    pub layer: String,
    pub side: Side,
}

impl BoundaryId {
    /// `<index>_<layer>_<side>`, the trace file stem.
    pub fn file_stem(&self) -> String {
        format!("{:02}_{}_{}", self.index, self.layer, self.side.as_str())
    }
}

impl std::fmt::Display for BoundaryId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.file_stem())
    }
}

/// Boundaries of a variant in network order: 12 for basic, 16 for dropout.
pub fn boundaries(variant: Variant) -> Vec<BoundaryId> {
    let layers = layers(variant);
    std::iter::once(BoundaryId {
        index: 0,
        layer: layers[0].name.into(),
        side: Side::Entry,
    })
    .chain(layers.iter().enumerate().map(|(k, l)| BoundaryId {
        index: k + 1,
        layer: l.name.into(),
        side: Side::Exit,
    }))
    .collect()
}

fn boundary_dims(variant: Variant) -> Vec<Vec<usize>> {
    std::iter::once(INPUT_DIMS.to_vec())
        .chain(layers(variant).into_iter().map(|l| l.out_dims))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaptureMode {
    /// Dropout layers are the identity.
    Eval,
    /// Dropout masks are applied during the capture pass.
    TrainDropout,
}

impl std::str::FromStr for CaptureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eval" => Ok(CaptureMode::Eval),
            "train-dropout" => Ok(CaptureMode::TrainDropout),
            other => Err(Error::Parameter(format!("unknown capture mode '{other}'"))),
        }
    }
}

/// Per-sample mask generator: ChaCha8 seeded with `seed`, stream = sample index.
fn sample_rng(seed: u64, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample as u64);
    rng
}

fn check_mode(variant: Variant, mode: CaptureMode, seed: Option<u64>) -> Result<Option<u64>> {
    match mode {
        CaptureMode::Eval => Ok(None),
        CaptureMode::TrainDropout if variant != Variant::Dropout => Err(Error::Parameter(
            "train-dropout capture requires the dropout variant".into(),
        )),
        CaptureMode::TrainDropout => seed
            .map(Some)
            .ok_or_else(|| Error::Parameter("train-dropout capture requires a dropout seed".into())),
    }
}

/// Runs one sample, calling `visit(boundary_index, values)` at every boundary.
fn run_sample(
    w: &LeNetWeights,
    layers: &[Layer],
    image: &[f32],
    mut rng: Option<ChaCha8Rng>,
    mut visit: impl FnMut(usize, &[f32]),
) -> [f32; NUM_CLASSES] {
    let mut cur = image.to_vec();
    visit(0, &cur);
    let mut next = Vec::new();
    for (k, layer) in layers.iter().enumerate() {
        match layer.kind {
            LayerKind::Conv { weight, bias, shape } => {
                next.resize(shape.out_channels * shape.out_height() * shape.out_width(), 0.0);
                conv2d_into(&cur, w.get(weight), w.get(bias), shape, &mut next);
                std::mem::swap(&mut cur, &mut next);
            }
            LayerKind::Tanh => tanh_in_place(&mut cur),
            LayerKind::AvgPool {
                channels,
                height,
                width,
            } => {
                next.resize(channels * (height / 2) * (width / 2), 0.0);
                avgpool2_into(&cur, channels, height, width, &mut next);
                std::mem::swap(&mut cur, &mut next);
            }
            LayerKind::Dropout { channelwise } => {
                if let Some(rng) = rng.as_mut() {
                    let units = if channelwise { layer.out_dims[0] } else { cur.len() };
                    let keep = draw_mask(units, DROPOUT_P, rng);
                    apply_mask_in_place(&mut cur, &keep, DROPOUT_P);
                }
            }
            LayerKind::Linear {
                weight, bias, outputs, ..
            } => {
                next.resize(outputs, 0.0);
                linear_into(&cur, w.get(weight), w.get(bias), &mut next);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        visit(k + 1, &cur);
    }
    cur.try_into().expect("network ends in 10 logits")
}

/// Tensors at every boundary for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub variant: Variant,
    pub mode: CaptureMode,
    pub dropout_seed: Option<u64>,
    pub tensors: Vec<(BoundaryId, Tensor)>,
}

impl ActivationTrace {
    pub fn entry(&self, layer: &str) -> Option<&Tensor> {
        let k = self
            .tensors
            .iter()
            .position(|(b, _)| b.layer == layer && b.side == Side::Exit)?;
        Some(&self.tensors[k - 1].1)
    }

    pub fn exit(&self, layer: &str) -> Option<&Tensor> {
        self.tensors
            .iter()
            .find(|(b, _)| b.layer == layer && b.side == Side::Exit)
            .map(|(_, t)| t)
    }
}

/// Forward pass of one 1×32×32 image. Returns the trace and the logits.
///
/// In train-dropout mode the masks come from stream 0 of the seed, i.e. the
/// image is treated as sample 0 of a batch.
pub fn forward(
    w: &LeNetWeights,
    image: &Tensor,
    mode: CaptureMode,
    dropout_seed: Option<u64>,
) -> Result<(ActivationTrace, Vec<f32>)> {
    if image.dims() != INPUT_DIMS {
        return Err(Error::Dimension(format!(
            "input must be 1×32×32, got {:?}",
            image.dims()
        )));
    }
    let seed = check_mode(w.variant, mode, dropout_seed)?;
    let layers = layers(w.variant);
    let dims = boundary_dims(w.variant);
    let ids = boundaries(w.variant);
    let mut tensors = Vec::with_capacity(ids.len());
    let logits = run_sample(
        w,
        &layers,
        &image.to_f32_vec(),
        seed.map(|s| sample_rng(s, 0)),
        |k, v| {
            let t = Tensor::from_f32(dims[k].clone(), v.to_vec()).expect("shape chain is consistent");
            tensors.push((ids[k].clone(), t));
        },
    );
    let trace = ActivationTrace {
        variant: w.variant,
        mode,
        dropout_seed: seed,
        tensors,
    };
    Ok((trace, logits.to_vec()))
}

/// Selected boundaries for a whole batch, each as an `[N, ...]` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchCapture {
    pub captured: Vec<(BoundaryId, Tensor)>,
    /// Row-major `N × 10`.
    pub logits: Vec<f32>,
}

impl BatchCapture {
    pub fn predictions(&self) -> Vec<u32> {
        self.logits
            .chunks_exact(NUM_CLASSES)
            .map(|l| classify(l) as u32)
            .collect()
    }
}

/// Forwards every image of `images` (row-major N × 1024) and captures the
/// requested boundary indices. Sample `i` uses mask stream `i`, so results
/// do not depend on scheduling.
pub fn forward_batch(
    w: &LeNetWeights,
    images: &[f32],
    mode: CaptureMode,
    dropout_seed: Option<u64>,
    capture: &[usize],
) -> Result<BatchCapture> {
    if !images.len().is_multiple_of(INPUT_LEN) {
        return Err(Error::Dimension(format!(
            "image buffer of {} values is not a whole number of 1×32×32 images",
            images.len()
        )));
    }
    let seed = check_mode(w.variant, mode, dropout_seed)?;
    let layers = layers(w.variant);
    let dims = boundary_dims(w.variant);
    let ids = boundaries(w.variant);
    if let Some(&bad) = capture.iter().find(|&&k| k >= ids.len()) {
        return Err(Error::Parameter(format!(
            "boundary {bad} does not exist in {:?}",
            w.variant
        )));
    }
    let n = images.len() / INPUT_LEN;
    let sizes: Vec<usize> = capture.iter().map(|&k| dims[k].iter().product()).collect();
    let mut buffers: Vec<Vec<f32>> = sizes.iter().map(|s| Vec::with_capacity(s * n)).collect();
    let mut logits = Vec::with_capacity(n * NUM_CLASSES);

    for chunk_start in (0..n).step_by(CHUNK) {
        let chunk_end = (chunk_start + CHUNK).min(n);
        let results: Vec<(Vec<Vec<f32>>, [f32; NUM_CLASSES])> = (chunk_start..chunk_end)
            .into_par_iter()
            .map(|i| {
                let mut grabbed: Vec<Vec<f32>> = vec![Vec::new(); capture.len()];
                let image = &images[i * INPUT_LEN..(i + 1) * INPUT_LEN];
                let out = run_sample(w, &layers, image, seed.map(|s| sample_rng(s, i)), |k, v| {
                    for (slot, _) in capture.iter().enumerate().filter(|(_, &c)| c == k) {
                        grabbed[slot] = v.to_vec();
                    }
                });
                (grabbed, out)
            })
            .collect();
        for (grabbed, out) in results {
            for (buf, g) in buffers.iter_mut().zip(grabbed) {
                buf.extend_from_slice(&g);
            }
            logits.extend_from_slice(&out);
        }
    }

    let captured = capture
        .iter()
        .zip(buffers)
        .map(|(&k, buf)| {
            let mut d = vec![n];
            d.extend_from_slice(&dims[k]);
            (
                ids[k].clone(),
                Tensor::from_f32(d, buf).expect("captured batch is consistent"),
            )
        })
        .collect();
    Ok(BatchCapture { captured, logits })
}

/// Eval-mode classification error over a set of 1×32×32 images.
pub fn end_to_end_error(w: &LeNetWeights, data: &LabeledPointSet) -> Result<f64> {
    if data.dim() != INPUT_LEN {
        return Err(Error::Dimension(format!(
            "images must flatten to 1024 values, got {}",
            data.dim()
        )));
    }
    if data.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let batch = forward_batch(w, data.points(), CaptureMode::Eval, None, &[])?;
    let wrong = batch
        .predictions()
        .iter()
        .zip(data.labels())
        .filter(|(p, l)| p != l)
        .count();
    Ok(wrong as f64 / data.len() as f64)
}
