//! Layer kernels. All accumulate in f64 and store f32.
//!
//! The slice-level functions (`*_into`) are what the forward pass runs; the
//! tensor-level wrappers validate shapes for callers outside the network.

use crate::error::{Error, Result};
use crate::tensor_io::Tensor;

/// Largest f32 strictly below 1.
const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvShape {
    pub fn out_height(&self) -> usize {
        (self.height - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width - self.kernel) / self.stride + 1
    }
}

/// Valid cross-correlation (no kernel flip, no padding).
///
/// `out[o,y,x] = bias[o] + Σ_{c,i,j} input[c, y·s+i, x·s+j] · kernel[o,c,i,j]`,
/// summed in that order.
pub(crate) fn conv2d_into(input: &[f32], kernel: &[f32], bias: &[f32], s: ConvShape, out: &mut [f32]) {
    let (oh, ow) = (s.out_height(), s.out_width());
    let k = s.kernel;
    let mut acc = vec![0f64; oh * ow];
    for o in 0..s.out_channels {
        acc.fill(bias[o] as f64);
        for c in 0..s.in_channels {
            let plane = &input[c * s.height * s.width..(c + 1) * s.height * s.width];
            let kc = &kernel[(o * s.in_channels + c) * k * k..(o * s.in_channels + c + 1) * k * k];
            for i in 0..k {
                for j in 0..k {
                    let kv = kc[i * k + j] as f64;
                    for y in 0..oh {
                        let row = &plane[(y * s.stride + i) * s.width..];
                        let arow = &mut acc[y * ow..(y + 1) * ow];
                        for (x, a) in arow.iter_mut().enumerate() {
                            *a += row[x * s.stride + j] as f64 * kv;
                        }
                    }
                }
            }
        }
        for (dst, a) in out[o * oh * ow..(o + 1) * oh * ow].iter_mut().zip(&acc) {
            *dst = *a as f32;
        }
    }
}

pub fn conv2d_valid(input: &Tensor, kernel: &Tensor, bias: &Tensor, stride: usize) -> Result<Tensor> {
    let (&[c, h, w], &[o, kc, kh, kw], &[ob]) = (input.dims(), kernel.dims(), bias.dims()) else {
        return Err(Error::Dimension(format!(
            "conv2d expects C×H×W input, O×C×k×k kernel, O bias; got {:?}, {:?}, {:?}",
            input.dims(),
            kernel.dims(),
            bias.dims()
        )));
    };
    if kc != c || kh != kw || ob != o || h < kh || w < kw || stride == 0 {
        return Err(Error::Dimension(format!(
            "conv2d shapes incompatible: input {:?}, kernel {:?}, bias {:?}, stride {stride}",
            input.dims(),
            kernel.dims(),
            bias.dims()
        )));
    }
    let shape = ConvShape {
        in_channels: c,
        height: h,
        width: w,
        out_channels: o,
        kernel: kh,
        stride,
    };
    let mut out = vec![0f32; o * shape.out_height() * shape.out_width()];
    conv2d_into(
        &input.to_f32_vec(),
        &kernel.to_f32_vec(),
        &bias.to_f32_vec(),
        shape,
        &mut out,
    );
    Tensor::from_f32(vec![o, shape.out_height(), shape.out_width()], out)
}

/// Hyperbolic tangent of one value, evaluated in f64.
#[inline]
pub fn tanh_scalar(x: f64) -> f64 {
    x.tanh()
}

/// Elementwise tanh stored as f32, kept strictly inside (-1, 1).
pub(crate) fn tanh_in_place(v: &mut [f32]) {
    for x in v {
        *x = (tanh_scalar(*x as f64) as f32).clamp(-BELOW_ONE, BELOW_ONE);
    }
}

pub fn tanh_map(t: &Tensor) -> Tensor {
    let mut v = t.to_f32_vec();
    tanh_in_place(&mut v);
    Tensor::from_f32(t.dims().to_vec(), v).expect("tanh preserves shape and finiteness")
}

/// 2×2 mean pooling with stride 2 over each of `channels` planes.
pub(crate) fn avgpool2_into(input: &[f32], channels: usize, h: usize, w: usize, out: &mut [f32]) {
    let (oh, ow) = (h / 2, w / 2);
    for c in 0..channels {
        let plane = &input[c * h * w..];
        for y in 0..oh {
            for x in 0..ow {
                let top = 2 * y * w + 2 * x;
                let sum = plane[top] as f64 + plane[top + 1] as f64 + plane[top + w] as f64 + plane[top + w + 1] as f64;
                out[c * oh * ow + y * ow + x] = (sum / 4.0) as f32;
            }
        }
    }
}

pub fn avgpool2(t: &Tensor) -> Result<Tensor> {
    let &[c, h, w] = t.dims() else {
        return Err(Error::Dimension(format!("avgpool2 expects C×H×W, got {:?}", t.dims())));
    };
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Dimension(format!("avgpool2 needs even H and W, got {h}×{w}")));
    }
    let mut out = vec![0f32; c * (h / 2) * (w / 2)];
    avgpool2_into(&t.to_f32_vec(), c, h, w, &mut out);
    Tensor::from_f32(vec![c, h / 2, w / 2], out)
}

/// `out[o] = b[o] + Σ_d W[o,d]·v[d]`.
pub(crate) fn linear_into(v: &[f32], weight: &[f32], bias: &[f32], out: &mut [f32]) {
    let d = v.len();
    for (o, dst) in out.iter_mut().enumerate() {
        let row = &weight[o * d..(o + 1) * d];
        let mut acc = bias[o] as f64;
        for (&wv, &x) in row.iter().zip(v) {
            acc += wv as f64 * x as f64;
        }
        *dst = acc as f32;
    }
}

pub fn linear(v: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (&[d], &[o, wd], &[ob]) = (v.dims(), weight.dims(), bias.dims()) else {
        return Err(Error::Dimension(format!(
            "linear expects D vector, O×D matrix, O bias; got {:?}, {:?}, {:?}",
            v.dims(),
            weight.dims(),
            bias.dims()
        )));
    };
    if wd != d || ob != o {
        return Err(Error::Dimension(format!(
            "linear shapes incompatible: v {:?}, W {:?}, b {:?}",
            v.dims(),
            weight.dims(),
            bias.dims()
        )));
    }
    let mut out = vec![0f32; o];
    linear_into(&v.to_f32_vec(), &weight.to_f32_vec(), &bias.to_f32_vec(), &mut out);
    Tensor::from_f32(vec![o], out)
}

/// Argmax of the logits, lowest class on ties.
pub fn classify(logits: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}
