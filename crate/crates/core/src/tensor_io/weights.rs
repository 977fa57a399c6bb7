//! LeNet-5 parameters and the LNW1 weight-bundle format.
//!
//! A bundle is a directory holding `manifest.json` and `weights.bin`:
//!
//! ```json
//! {"format": "LNW1", "variant": "basic",
//!  "params": [{"name": "conv1.w", "shape": [6, 1, 5, 5], "offset_bytes": 0}, ...]}
//! ```
//!
//! `weights.bin` holds the ten f32 little-endian row-major payloads
//! concatenated in [`PARAM_SPECS`] order at the stated offsets.
//! Unknown manifest keys are ignored, so exporters may add metadata.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DType, Tensor};
use crate::error::{Error, Result};

pub const BUNDLE_FORMAT: &str = "LNW1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";

/// Parameter names and shapes, in bundle order.
pub const PARAM_SPECS: [(&str, &[usize]); 10] = [
    ("conv1.w", &[6, 1, 5, 5]),
    ("conv1.b", &[6]),
    ("conv2.w", &[16, 6, 5, 5]),
    ("conv2.b", &[16]),
    ("conv3.w", &[120, 16, 5, 5]),
    ("conv3.b", &[120]),
    ("linr1.w", &[84, 120]),
    ("linr1.b", &[84]),
    ("linr2.w", &[10, 84]),
    ("linr2.b", &[10]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Plain LeNet-5.
    Basic,
    /// LeNet-5 with four p=0.2 dropout layers after conv1, conv2, conv3 and linr1.
    Dropout,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::Dropout => "dropout",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(Variant::Basic),
            "dropout" => Ok(Variant::Dropout),
            other => Err(Error::Parameter(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeNetWeights {
    pub variant: Variant,
    params: Vec<Tensor>,
}

impl LeNetWeights {
    /// Builds weights from `(name, tensor)` pairs in any order.
    pub fn from_named(variant: Variant, named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut slots: Vec<Option<Tensor>> = vec![None; PARAM_SPECS.len()];
        for (name, t) in named {
            let idx = PARAM_SPECS
                .iter()
                .position(|(n, _)| *n == name)
                .ok_or_else(|| Error::Validation(format!("unknown parameter '{name}'")))?;
            if slots[idx].is_some() {
                return Err(Error::Validation(format!("duplicate parameter '{name}'")));
            }
            slots[idx] = Some(t);
        }
        let mut params = Vec::with_capacity(PARAM_SPECS.len());
        for ((name, shape), slot) in PARAM_SPECS.iter().zip(slots) {
            let t = slot.ok_or_else(|| Error::Validation(format!("missing parameter '{name}'")))?;
            check_param(name, shape, t.dims())?;
            if t.dtype() != DType::F32 {
                return Err(Error::Validation(format!(
                    "parameter '{name}' must be f32, got {:?}",
                    t.dtype()
                )));
            }
            params.push(t);
        }
        Ok(LeNetWeights { variant, params })
    }

    /// Flat f32 data of a parameter by bundle name, e.g. `"conv2.w"`.
    pub fn get(&self, name: &str) -> &[f32] {
        let idx = PARAM_SPECS
            .iter()
            .position(|(n, _)| *n == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"));
        self.params[idx].as_f32().expect("parameters are validated as f32")
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        PARAM_SPECS.iter().map(|(n, _)| *n).zip(self.params.iter())
    }

    /// Every parameter drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual
    /// framework default, using ChaCha8 seeded by `seed`.
    pub fn seeded_random(variant: Variant, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fan_in = |name: &str| -> usize {
            let (_, w_shape) = PARAM_SPECS
                .iter()
                .find(|(n, _)| n[..5] == name[..5] && n.ends_with(".w"))
                .unwrap();
            w_shape[1..].iter().product()
        };
        let named = PARAM_SPECS
            .iter()
            .map(|(name, shape)| {
                let bound = 1.0 / (fan_in(name) as f32).sqrt();
                let n = shape.iter().product();
                let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
                (name.to_string(), Tensor::from_f32(shape.to_vec(), data).unwrap())
            })
            .collect();
        Self::from_named(variant, named).unwrap()
    }

    /// Every parameter set to `value`.
    pub fn constant(variant: Variant, value: f32) -> Self {
        let named = PARAM_SPECS
            .iter()
            .map(|(name, shape)| {
                let n = shape.iter().product();
                (
                    name.to_string(),
                    Tensor::from_f32(shape.to_vec(), vec![value; n]).unwrap(),
                )
            })
            .collect();
        Self::from_named(variant, named).unwrap()
    }
}

fn check_param(name: &str, expected: &[usize], got: &[usize]) -> Result<()> {
    if expected != got {
        return Err(Error::Validation(format!(
            "parameter '{name}' has shape {got:?}, expected {expected:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    variant: Variant,
    params: Vec<ParamEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    offset_bytes: u64,
}

pub fn save_weights(w: &LeNetWeights, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = Vec::new();
    let mut params = Vec::new();
    for (name, t) in w.named() {
        params.push(ParamEntry {
            name: name.to_string(),
            shape: t.dims().to_vec(),
            offset_bytes: blob.len() as u64,
        });
        for v in t.as_f32().unwrap() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: BUNDLE_FORMAT.into(),
        variant: w.variant,
        params,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, json).map_err(|e| Error::io(mpath, e))?;
    let wpath = dir.join(WEIGHTS_FILE);
    fs::write(&wpath, blob).map_err(|e| Error::io(wpath, e))
}

pub fn load_weights(dir: impl AsRef<Path>) -> Result<LeNetWeights> {
    let dir = dir.as_ref();
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", mpath.display())))?;
    if manifest.format != BUNDLE_FORMAT {
        return Err(Error::Format(format!(
            "bundle format '{}', expected '{BUNDLE_FORMAT}'",
            manifest.format
        )));
    }
    let wpath = dir.join(WEIGHTS_FILE);
    let blob = fs::read(&wpath).map_err(|e| Error::io(&wpath, e))?;

    let mut named = Vec::with_capacity(manifest.params.len());
    for (name, shape) in PARAM_SPECS {
        let entry = manifest
            .params
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Validation(format!("bundle is missing parameter '{name}'")))?;
        check_param(name, shape, &entry.shape)?;
        let n: usize = shape.iter().product();
        let start = usize::try_from(entry.offset_bytes).unwrap_or(usize::MAX);
        let bytes = start
            .checked_add(4 * n)
            .and_then(|end| blob.get(start..end))
            .ok_or_else(|| {
                Error::Validation(format!(
                    "parameter '{name}' at offset {} overruns {} ({} bytes)",
                    entry.offset_bytes,
                    WEIGHTS_FILE,
                    blob.len()
                ))
            })?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::from_f32(shape.to_vec(), data)
            .map_err(|e| Error::Validation(format!("parameter '{name}': {e}")))?;
        named.push((name.to_string(), t));
    }
    LeNetWeights::from_named(manifest.variant, named)
}
