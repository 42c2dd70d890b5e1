//! Calibrated read-power and savings estimation for truncation configurations.
//!
//! Two models ship side by side:
//!
//! - a **linear** model built from the measured per-bit averages (11.90% or
//!   296 µW per bit truncated per byte; 2.87% or 71 µW per bit in word mode),
//! - an **anchored** model that interpolates measured operating points
//!   piecewise-linearly, reproducing them exactly and extrapolating beyond
//!   the last anchor with the final segment slope.
//!
//! The base read power is not a direct measurement; it is derived as
//! 296 / 0.1190 µW and cross-checked against 71 / 0.0287 (both imply about
//! 2.48 mW, consistent within 1%). Write power is modeled as a constant
//! 2.35 mW independent of truncation. All figures are technology-specific;
//! anchor tables can be loaded from a file for other technologies.

use crate::bitcore::{TruncationMode, TruncationSpec};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("power parameter `{0}` must be non-negative")]
    NegativeParam(&'static str),
    #[error("per-bit power and percentage imply inconsistent base powers ({0:.1} vs {1:.1} uW)")]
    InconsistentBase(f64, f64),
    #[error("calibration table has no anchors for {0} mode")]
    EmptyTable(TruncationMode),
    #[error("calibration anchors must strictly increase, got ({0}, {1}) after ({2}, {3})")]
    NonMonotonicAnchor(u32, f64, u32, f64),
    #[error("anchor bit count {0} exceeds the {1} mode range")]
    AnchorRange(u32, TruncationMode),
    #[error("aggregate savings over an empty truncation map")]
    EmptyAggregate,
    #[error("per-byte truncation count {0} out of range 0..=8")]
    AggregateCount(u32),
    #[error("failed to read calibration file: {0}")]
    Io(#[from] std::io::Error),
    #[error("calibration file: {0}")]
    Format(String),
}

/// Measured power deltas, in the units the measurements were reported in.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerParams {
    /// Derived no-truncation read power, µW.
    pub base_read_power_uw: f64,
    /// Write power, mW; constant across truncation levels.
    pub write_power_mw: f64,
    /// Read-power reduction per bit truncated per byte (byte mode), µW / %.
    pub byte_per_bit_uw: f64,
    pub byte_per_bit_pct: f64,
    /// Read-power reduction per bit truncated (word mode), µW / %.
    pub word_per_bit_uw: f64,
    pub word_per_bit_pct: f64,
    /// Word-mode per-bit savings on bytes holding 0x00 / 0xFF, µW / %.
    pub data_dep_zero_byte_uw: f64,
    pub data_dep_zero_byte_pct: f64,
    pub data_dep_ff_byte_uw: f64,
    pub data_dep_ff_byte_pct: f64,
    /// Added power of the manager circuitry over a basic array, µW / %.
    pub manager_overhead_uw: f64,
    pub manager_overhead_pct: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            base_read_power_uw: 296.0 / 0.1190,
            write_power_mw: 2.35,
            byte_per_bit_uw: 296.0,
            byte_per_bit_pct: 11.90,
            word_per_bit_uw: 71.0,
            word_per_bit_pct: 2.87,
            data_dep_zero_byte_uw: 90.0,
            data_dep_zero_byte_pct: 3.6,
            data_dep_ff_byte_uw: 60.0,
            data_dep_ff_byte_pct: 2.2,
            manager_overhead_uw: 1.1,
            manager_overhead_pct: 0.47,
        }
    }
}

impl PowerParams {
    /// Checks sign constraints and that the per-bit (µW, %) pairs imply the
    /// same base power within 1%.
    pub fn validate(&self) -> Result<(), PowerError> {
        let fields = [
            ("base_read_power_uw", self.base_read_power_uw),
            ("write_power_mw", self.write_power_mw),
            ("byte_per_bit_uw", self.byte_per_bit_uw),
            ("byte_per_bit_pct", self.byte_per_bit_pct),
            ("word_per_bit_uw", self.word_per_bit_uw),
            ("word_per_bit_pct", self.word_per_bit_pct),
            ("data_dep_zero_byte_uw", self.data_dep_zero_byte_uw),
            ("data_dep_ff_byte_uw", self.data_dep_ff_byte_uw),
            ("manager_overhead_uw", self.manager_overhead_uw),
        ];
        for (name, v) in fields {
            if v < 0.0 {
                return Err(PowerError::NegativeParam(name));
            }
        }
        let base_from_byte = self.byte_per_bit_uw / (self.byte_per_bit_pct / 100.0);
        let base_from_word = self.word_per_bit_uw / (self.word_per_bit_pct / 100.0);
        for implied in [base_from_byte, base_from_word] {
            if (implied - self.base_read_power_uw).abs() > 0.01 * self.base_read_power_uw {
                return Err(PowerError::InconsistentBase(implied, self.base_read_power_uw));
            }
        }
        Ok(())
    }
}

/// Byte-content class for the word-mode data dependence: truncating a bit of
/// an all-zero byte saves more than average, an all-ones byte less.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteClass {
    AllZero,
    AllOnes,
    Mixed,
}

impl ByteClass {
    pub fn of(byte: u8) -> Self {
        match byte {
            0x00 => ByteClass::AllZero,
            0xFF => ByteClass::AllOnes,
            _ => ByteClass::Mixed,
        }
    }

    pub fn classify_word(w: u32) -> [ByteClass; 4] {
        [
            ByteClass::of((w & 0xFF) as u8),
            ByteClass::of(((w >> 8) & 0xFF) as u8),
            ByteClass::of(((w >> 16) & 0xFF) as u8),
            ByteClass::of(((w >> 24) & 0xFF) as u8),
        ]
    }
}

/// Measured (bits truncated, savings %) operating points per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    byte: Vec<(u32, f64)>,
    word: Vec<(u32, f64)>,
}

impl Default for CalibrationTable {
    fn default() -> Self {
        Self {
            byte: vec![(0, 0.0), (3, 34.93), (4, 47.02)],
            word: vec![(0, 0.0), (17, 51.69), (21, 66.08)],
        }
    }
}

impl CalibrationTable {
    pub fn new(
        byte: Vec<(u32, f64)>,
        word: Vec<(u32, f64)>,
    ) -> Result<Self, PowerError> {
        let table = Self { byte, word };
        table.validate()?;
        Ok(table)
    }

    pub fn anchors(&self, mode: TruncationMode) -> &[(u32, f64)] {
        match mode {
            TruncationMode::Byte => &self.byte,
            TruncationMode::Word => &self.word,
        }
    }

    fn validate(&self) -> Result<(), PowerError> {
        for (mode, anchors) in [
            (TruncationMode::Byte, &self.byte),
            (TruncationMode::Word, &self.word),
        ] {
            if anchors.is_empty() {
                return Err(PowerError::EmptyTable(mode));
            }
            let max_k = match mode {
                TruncationMode::Byte => 8,
                TruncationMode::Word => 32,
            };
            if let Some(&(k, _)) = anchors.iter().find(|(k, _)| *k > max_k) {
                return Err(PowerError::AnchorRange(k, mode));
            }
            for pair in anchors.windows(2) {
                let ((k0, s0), (k1, s1)) = (pair[0], pair[1]);
                if k1 <= k0 || s1 <= s0 {
                    return Err(PowerError::NonMonotonicAnchor(k1, s1, k0, s0));
                }
            }
        }
        Ok(())
    }

    /// Parses the key/value calibration format:
    ///
    /// ```text
    /// [byte]
    /// anchors = [[0, 0.0], [3, 34.93], [4, 47.02]]
    /// [word]
    /// anchors = [[0, 0.0], [17, 51.69], [21, 66.08]]
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self, PowerError> {
        let value: toml::Value = text
            .parse()
            .map_err(|e: toml::de::Error| PowerError::Format(e.to_string()))?;
        let parse_mode = |key: &str| -> Result<Vec<(u32, f64)>, PowerError> {
            let anchors = value
                .get(key)
                .and_then(|section| section.get("anchors"))
                .and_then(|a| a.as_array())
                .ok_or_else(|| {
                    PowerError::Format(format!("missing `[{key}] anchors` array"))
                })?;
            anchors
                .iter()
                .map(|pair| {
                    let items = pair.as_array().filter(|v| v.len() == 2).ok_or_else(|| {
                        PowerError::Format("each anchor must be a [bits, percent] pair".into())
                    })?;
                    let k = items[0].as_integer().filter(|k| *k >= 0).ok_or_else(|| {
                        PowerError::Format("anchor bit count must be a non-negative integer".into())
                    })? as u32;
                    let pct = items[1]
                        .as_float()
                        .or_else(|| items[1].as_integer().map(|i| i as f64))
                        .ok_or_else(|| {
                            PowerError::Format("anchor percentage must be numeric".into())
                        })?;
                    Ok((k, pct))
                })
                .collect()
        };
        Self::new(parse_mode("byte")?, parse_mode("word")?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PowerError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

fn clamp_pct(pct: f64) -> f64 {
    pct.clamp(0.0, 100.0)
}

/// Savings from the per-bit averages: `k x 11.90%` in byte mode,
/// `k x 2.87%` in word mode, clamped to [0, 100].
pub fn savings_linear(spec: TruncationSpec, params: &PowerParams) -> f64 {
    let per_bit = match spec.mode() {
        TruncationMode::Byte => params.byte_per_bit_pct,
        TruncationMode::Word => params.word_per_bit_pct,
    };
    clamp_pct(spec.count() as f64 * per_bit)
}

/// Savings from the anchored model: exact at anchors, piecewise-linear
/// between them, extrapolated beyond the outermost anchors with the nearest
/// segment slope, clamped to [0, 100]. A single-anchor mode is constant.
pub fn savings_anchored(spec: TruncationSpec, table: &CalibrationTable) -> f64 {
    let anchors = table.anchors(spec.mode());
    let k = spec.count() as f64;
    let pct = match anchors {
        [] => unreachable!("tables are validated non-empty"),
        [(k0, s0)] => {
            let _ = (k0, s0);
            anchors[0].1
        }
        _ => {
            // Segment the query falls in, or the outermost segment for
            // extrapolation.
            let last = anchors.len() - 1;
            let hi = anchors
                .iter()
                .position(|(ka, _)| (*ka as f64) >= k)
                .unwrap_or(last)
                .max(1);
            let (k0, s0) = anchors[hi - 1];
            let (k1, s1) = anchors[hi];
            let slope = (s1 - s0) / (k1 as f64 - k0 as f64);
            s0 + slope * (k - k0 as f64)
        }
    };
    clamp_pct(pct)
}

/// Model selector shared by the video and tensor reporting paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerModelKind {
    Linear,
    Anchored,
}

impl std::fmt::Display for PowerModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PowerModelKind::Linear => write!(f, "linear"),
            PowerModelKind::Anchored => write!(f, "anchored"),
        }
    }
}

/// A concrete savings model: kind plus the parameters it draws from.
#[derive(Debug, Clone)]
pub struct SavingsModel {
    pub kind: PowerModelKind,
    pub params: PowerParams,
    pub table: CalibrationTable,
}

impl Default for SavingsModel {
    fn default() -> Self {
        Self::anchored(CalibrationTable::default())
    }
}

impl SavingsModel {
    pub fn linear(params: PowerParams) -> Self {
        Self { kind: PowerModelKind::Linear, params, table: CalibrationTable::default() }
    }

    pub fn anchored(table: CalibrationTable) -> Self {
        Self { kind: PowerModelKind::Anchored, params: PowerParams::default(), table }
    }

    pub fn savings_pct(&self, spec: TruncationSpec) -> f64 {
        match self.kind {
            PowerModelKind::Linear => savings_linear(spec, &self.params),
            PowerModelKind::Anchored => savings_anchored(spec, &self.table),
        }
    }
}

/// Mean savings over a per-byte truncation map (byte-mode counts 0..=8).
/// This is the accounting used for region- and content-dependent policies,
/// where different bytes of a dataset sit at different truncation levels.
pub fn aggregate_savings(
    per_byte_k: impl IntoIterator<Item = u32>,
    model: &SavingsModel,
) -> Result<f64, PowerError> {
    let mut counts = [0u64; 9];
    for k in per_byte_k {
        if k > 8 {
            return Err(PowerError::AggregateCount(k));
        }
        counts[k as usize] += 1;
    }
    aggregate_savings_counts(&counts, model)
}

/// [`aggregate_savings`] over a pre-binned histogram of per-byte counts,
/// indexed by truncation level 0..=8.
pub fn aggregate_savings_counts(
    counts: &[u64; 9],
    model: &SavingsModel,
) -> Result<f64, PowerError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(PowerError::EmptyAggregate);
    }
    let mut acc = 0.0;
    for (k, &count) in counts.iter().enumerate() {
        if count > 0 {
            let spec = TruncationSpec::byte(k as u32).expect("k <= 8");
            acc += model.savings_pct(spec) * count as f64;
        }
    }
    Ok(acc / total as f64)
}

/// Estimated read power in µW: base minus the per-bit deltas. When a word
/// data pattern is supplied in word mode, truncated bits of 0x00 bytes save
/// `data_dep_zero_byte_uw`, bits of 0xFF bytes `data_dep_ff_byte_uw`, and
/// mixed bytes the average per-bit figure. Byte mode always uses the
/// per-byte average (the data dependence was measured in word mode).
pub fn read_power_estimate(
    spec: TruncationSpec,
    data_pattern: Option<[ByteClass; 4]>,
    params: &PowerParams,
) -> f64 {
    let k = spec.count();
    let saved = match (spec.mode(), data_pattern) {
        (TruncationMode::Byte, _) => k as f64 * params.byte_per_bit_uw,
        (TruncationMode::Word, None) => k as f64 * params.word_per_bit_uw,
        (TruncationMode::Word, Some(classes)) => (0..k)
            .map(|bit| match classes[(bit / 8) as usize] {
                ByteClass::AllZero => params.data_dep_zero_byte_uw,
                ByteClass::AllOnes => params.data_dep_ff_byte_uw,
                ByteClass::Mixed => params.word_per_bit_uw,
            })
            .sum(),
    };
    (params.base_read_power_uw - saved).max(0.0)
}
