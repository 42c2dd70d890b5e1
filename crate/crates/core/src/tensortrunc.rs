//! Fraction-bit truncation of float32 tensors (DNN weights and biases) with
//! error statistics and power/error sweep tables.
//!
//! `n` counts contiguous LSBs of the 23-bit fraction; every element goes
//! through the float truncation rule, so sign and exponent are untouched and
//! the worst-case relative error on finite normalized values is `2^(n-24)`.
//! Inf/NaN elements are preserved by default and counted in the report.
//! Running a model on the truncated tensors is the consumer's job; this
//! module produces the tensors and the error/power tables.
//!
//! Two file formats are supported: the `TRNT` container (magic `54 52 4E 54`,
//! version byte `01`, dtype byte `01` for float32, a rank byte, rank
//! little-endian u32 dims, then the raw little-endian payload) and headerless
//! raw little-endian float32 with an externally supplied shape.

use crate::bitcore::{
    apply_truncation_float_with, contiguous_relative_error_bound, optimal_dummy, FloatBits,
    NonFinitePolicy, TruncationIndexSet, TruncationSpec,
};
use crate::powermodel::SavingsModel;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;
use thiserror::Error;

pub const TRNT_MAGIC: [u8; 4] = *b"TRNT";
pub const TRNT_VERSION: u8 = 0x01;
pub const TRNT_DTYPE_F32: u8 = 0x01;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("truncation count {0} out of fraction range 0..=23")]
    LevelRange(u32),
    #[error("shape {shape:?} implies {expected} elements, payload holds {actual}")]
    ShapeMismatch { shape: Vec<u32>, expected: u64, actual: usize },
    #[error("tensor shapes differ: {0:?} vs {1:?}")]
    ShapeDiffer(Vec<u32>, Vec<u32>),
    #[error("shape dims must all be at least 1")]
    ZeroDim,
    #[error("bad magic {0:02X?}, expected \"TRNT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0:#04x}")]
    BadVersion(u8),
    #[error("unsupported dtype {0:#04x}, only float32 is defined")]
    BadDtype(u8),
    #[error("container truncated: {0}")]
    Truncated(&'static str),
    #[error("raw payload of {0} bytes is not a multiple of 4")]
    RaggedPayload(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shaped, contiguous float32 payload.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBuffer {
    shape: Vec<u32>,
    data: Vec<f32>,
    name: Option<String>,
}

impl TensorBuffer {
    pub fn new(
        shape: Vec<u32>,
        data: Vec<f32>,
        name: Option<String>,
    ) -> Result<Self, TensorError> {
        if shape.contains(&0) {
            return Err(TensorError::ZeroDim);
        }
        let expected = shape.iter().map(|&d| d as u64).product::<u64>();
        if expected != data.len() as u64 {
            return Err(TensorError::ShapeMismatch { shape, expected, actual: data.len() });
        }
        Ok(Self { shape, data, name })
    }

    pub fn scalar(value: f32) -> Self {
        Self { shape: vec![1], data: vec![value], name: None }
    }

    pub fn shape(&self) -> &[u32] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }
}

/// Truncates the `n` lowest fraction bits of every element with the default
/// Inf/NaN policy. Shape is preserved and the operation is idempotent.
pub fn truncate_tensor(t: &TensorBuffer, n: u32) -> Result<TensorBuffer, TensorError> {
    truncate_tensor_with(t, n, NonFinitePolicy::Preserve)
}

pub fn truncate_tensor_with(
    t: &TensorBuffer,
    n: u32,
    policy: NonFinitePolicy,
) -> Result<TensorBuffer, TensorError> {
    if n > 23 {
        return Err(TensorError::LevelRange(n));
    }
    let set = TruncationIndexSet::contiguous(n).expect("n <= 23");
    let dummy = optimal_dummy(&set);
    let data: Vec<f32> = t
        .data
        .par_iter()
        .map(|&x| {
            apply_truncation_float_with(FloatBits::from_f32(x), &set, policy)
                .expect("fraction-only set")
                .to_f32()
        })
        .collect();
    // The mask route and the element route agree by construction; keep the
    // cheap witness in debug builds.
    debug_assert!(policy == NonFinitePolicy::HardwareFaithful || n == 0 || {
        t.data.iter().zip(&data).all(|(&a, &b)| {
            !a.is_finite() || b.to_bits() == dummy.apply(a.to_bits())
        })
    });
    Ok(TensorBuffer { shape: t.shape.clone(), data, name: t.name.clone() })
}

/// Error statistics of one truncation level, paired with the word-mode power
/// savings the level earns.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    /// Fraction bits truncated.
    pub n: u32,
    pub elements: usize,
    pub max_abs_err: f64,
    /// Largest |error/original| over finite nonzero originals.
    pub max_rel_err: f64,
    pub mse: f64,
    /// Analytic worst-case relative error for normalized inputs, `2^(n-24)`.
    pub rel_bound: f64,
    /// Word-mode savings at `k = n` under the chosen model.
    pub savings_pct: f64,
    pub power_model: String,
    /// Inf/NaN elements, excluded from the error fields.
    pub nonfinite_count: usize,
    pub nonfinite_policy: String,
}

fn policy_label(policy: NonFinitePolicy) -> &'static str {
    match policy {
        NonFinitePolicy::Preserve => "preserve",
        NonFinitePolicy::HardwareFaithful => "hardware-faithful",
    }
}

/// Compares a truncated tensor against its original element by element.
/// Relative error skips exact-zero originals (their error is reported as
/// absolute only) and Inf/NaN elements are counted separately.
pub fn error_stats(
    orig: &TensorBuffer,
    truncated: &TensorBuffer,
    n: u32,
    model: &SavingsModel,
    policy: NonFinitePolicy,
) -> Result<TruncationReport, TensorError> {
    if orig.shape != truncated.shape {
        return Err(TensorError::ShapeDiffer(orig.shape.clone(), truncated.shape.clone()));
    }
    if n > 23 {
        return Err(TensorError::LevelRange(n));
    }
    let mut max_abs_err = 0.0f64;
    let mut max_rel_err = 0.0f64;
    let mut sq_sum = 0.0f64;
    let mut finite = 0usize;
    let mut nonfinite_count = 0usize;
    for (&o, &t) in orig.data.iter().zip(&truncated.data) {
        if !o.is_finite() {
            nonfinite_count += 1;
            continue;
        }
        let (o, t) = (o as f64, t as f64);
        let err = (t - o).abs();
        max_abs_err = max_abs_err.max(err);
        sq_sum += err * err;
        finite += 1;
        if o != 0.0 {
            max_rel_err = max_rel_err.max(err / o.abs());
        }
    }
    let spec = TruncationSpec::word(n).expect("n <= 23 < 32");
    Ok(TruncationReport {
        n,
        elements: orig.len(),
        max_abs_err,
        max_rel_err,
        mse: if finite == 0 { 0.0 } else { sq_sum / finite as f64 },
        rel_bound: contiguous_relative_error_bound(n),
        savings_pct: model.savings_pct(spec),
        power_model: model.kind.to_string(),
        nonfinite_count,
        nonfinite_policy: policy_label(policy).to_string(),
    })
}

/// Truncates at every requested level and reports error statistics plus
/// savings per level, suitable for accuracy/power trade-off plots.
pub fn sweep(
    t: &TensorBuffer,
    n_list: &[u32],
    model: &SavingsModel,
) -> Result<Vec<TruncationReport>, TensorError> {
    n_list
        .iter()
        .map(|&n| {
            let truncated = truncate_tensor(t, n)?;
            error_stats(t, &truncated, n, model, NonFinitePolicy::Preserve)
        })
        .collect()
}

pub fn sweep_to_csv(reports: &[TruncationReport]) -> String {
    let mut out = String::from("n,max_abs_err,max_rel_err,mse,bound,savings_pct\n");
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n, r.max_abs_err, r.max_rel_err, r.mse, r.rel_bound, r.savings_pct
        )
        .expect("string write");
    }
    out
}

pub fn sweep_to_json(reports: &[TruncationReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

/// Encodes the TRNT container (name is in-memory metadata and not stored).
pub fn tensor_to_bytes(t: &TensorBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(7 + 4 * t.shape.len() + 4 * t.data.len());
    out.extend_from_slice(&TRNT_MAGIC);
    out.push(TRNT_VERSION);
    out.push(TRNT_DTYPE_F32);
    out.push(t.shape.len() as u8);
    for &d in &t.shape {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &x in &t.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn tensor_from_bytes(bytes: &[u8]) -> Result<TensorBuffer, TensorError> {
    let mut cursor = bytes;
    let mut take = |n: usize, what: &'static str| -> Result<&[u8], TensorError> {
        if cursor.len() < n {
            return Err(TensorError::Truncated(what));
        }
        let (head, tail) = cursor.split_at(n);
        cursor = tail;
        Ok(head)
    };
    let magic: [u8; 4] = take(4, "magic")?.try_into().expect("4 bytes");
    if magic != TRNT_MAGIC {
        return Err(TensorError::BadMagic(magic));
    }
    let version = take(1, "version byte")?[0];
    if version != TRNT_VERSION {
        return Err(TensorError::BadVersion(version));
    }
    let dtype = take(1, "dtype byte")?[0];
    if dtype != TRNT_DTYPE_F32 {
        return Err(TensorError::BadDtype(dtype));
    }
    let rank = take(1, "rank byte")?[0] as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        let dim = take(4, "dimension")?;
        shape.push(u32::from_le_bytes(dim.try_into().expect("4 bytes")));
    }
    let expected = shape.iter().map(|&d| d as u64).product::<u64>();
    let payload = cursor;
    if !payload.len().is_multiple_of(4) {
        return Err(TensorError::RaggedPayload(payload.len()));
    }
    let actual = payload.len() / 4;
    if expected != actual as u64 || shape.contains(&0) {
        return Err(TensorError::ShapeMismatch { shape, expected, actual });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(TensorBuffer { shape, data, name: None })
}

pub fn save_tensor(t: &TensorBuffer, path: impl AsRef<Path>) -> Result<(), TensorError> {
    std::fs::write(path, tensor_to_bytes(t))?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<TensorBuffer, TensorError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    tensor_from_bytes(&bytes)
}

/// Headerless raw little-endian float32 with an externally supplied shape.
pub fn load_raw(path: impl AsRef<Path>, shape: Vec<u32>) -> Result<TensorBuffer, TensorError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(TensorError::RaggedPayload(bytes.len()));
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    TensorBuffer::new(shape, data, None)
}

pub fn save_raw(t: &TensorBuffer, path: impl AsRef<Path>) -> Result<(), TensorError> {
    let mut out = Vec::with_capacity(4 * t.data.len());
    for &x in &t.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}
