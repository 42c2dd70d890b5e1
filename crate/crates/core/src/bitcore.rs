//! Pure bit-truncation semantics for bytes, 32-bit words, and IEEE-754
//! single-precision floats.
//!
//! Truncating a set of bit positions replaces their stored values with a
//! fixed dummy pattern: the most significant truncated bit is forced to 1
//! and every other truncated bit to 0. Under the assumption that the true
//! bits are evenly distributed, this pattern minimizes the expected mean
//! squared error of the read-back value. [`brute_force_best_fill`] checks
//! that claim exhaustively with exact integer arithmetic; the minimizer is
//! never unique — the complement pattern (all truncated bits set except the
//! most significant) always ties.

use num_rational::Ratio;
use thiserror::Error;

/// Width of the fraction field of an IEEE-754 single-precision value.
pub const FRACTION_BITS: u32 = 23;

/// Largest index-set cardinality the exhaustive oracle accepts by default.
/// Enumeration cost is `4^|T|` cells, so 12 keeps a full run under a minute.
pub const ORACLE_CARDINALITY_CAP: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitError {
    #[error("byte truncation count {0} out of range 0..=8")]
    ByteCount(u32),
    #[error("word truncation count {0} out of range 0..=32")]
    WordCount(u32),
    #[error("bit index {0} out of range 0..=31")]
    IndexRange(u32),
    #[error("duplicate bit index {0}")]
    DuplicateIndex(u32),
    #[error("bit index {0} outside the fraction field 0..=22")]
    NotAFractionIndex(u32),
    #[error("index set cardinality {0} exceeds oracle cap {1}")]
    CardinalityCap(usize, usize),
}

/// Raw view of an IEEE-754 single-precision pattern: sign at bit 31,
/// exponent at bits 30..23, fraction at bits 22..0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FloatBits(u32);

impl FloatBits {
    pub const fn from_bits(raw: u32) -> Self {
        Self(raw)
    }

    pub fn from_f32(x: f32) -> Self {
        Self(x.to_bits())
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn to_f32(self) -> f32 {
        f32::from_bits(self.0)
    }

    pub const fn sign(self) -> u32 {
        self.0 >> 31
    }

    pub const fn exponent(self) -> u32 {
        (self.0 >> 23) & 0xFF
    }

    pub const fn fraction(self) -> u32 {
        self.0 & 0x007F_FFFF
    }

    /// Reassembles a pattern from its three fields. `fraction` must fit in
    /// 23 bits and `sign` in 1.
    pub fn from_fields(sign: u32, exponent: u32, fraction: u32) -> Self {
        debug_assert!(sign <= 1 && exponent <= 0xFF && fraction < (1 << FRACTION_BITS));
        Self((sign << 31) | (exponent << 23) | (fraction & 0x007F_FFFF))
    }

    /// Scale contributed by the sign and exponent fields of a normalized
    /// value: `(-1)^sign * 2^(exponent - 127)`.
    pub fn scale_constant(self) -> f64 {
        let mag = (self.exponent() as f64 - 127.0).exp2();
        if self.sign() == 1 {
            -mag
        } else {
            mag
        }
    }
}

/// Sorted set of distinct bit positions selected for truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncationIndexSet {
    indices: Vec<u32>,
}

impl TruncationIndexSet {
    /// Builds a set from arbitrary positions. Indices are sorted; duplicates
    /// and positions above 31 are rejected.
    pub fn new(indices: impl IntoIterator<Item = u32>) -> Result<Self, BitError> {
        let mut v: Vec<u32> = indices.into_iter().collect();
        v.sort_unstable();
        for pair in v.windows(2) {
            if pair[0] == pair[1] {
                return Err(BitError::DuplicateIndex(pair[0]));
            }
        }
        if let Some(&last) = v.last() {
            if last > 31 {
                return Err(BitError::IndexRange(last));
            }
        }
        Ok(Self { indices: v })
    }

    pub fn empty() -> Self {
        Self { indices: Vec::new() }
    }

    /// The contiguous set `{0, .., count-1}` of least significant bits.
    pub fn contiguous(count: u32) -> Result<Self, BitError> {
        if count > 32 {
            return Err(BitError::WordCount(count));
        }
        Ok(Self { indices: (0..count).collect() })
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn cardinality(&self) -> usize {
        self.indices.len()
    }

    /// Number of combinations of the truncated bits, `m = 2^|T|`.
    pub fn combinations(&self) -> u64 {
        1u64 << self.indices.len()
    }

    /// Maximum element, `None` for the empty set.
    pub fn t_max(&self) -> Option<u32> {
        self.indices.last().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Bit mask with every member position set.
    pub fn mask(&self) -> u32 {
        self.indices.iter().fold(0u32, |m, &i| m | (1 << i))
    }

    pub fn is_fraction_only(&self) -> bool {
        self.t_max().is_none_or(|t| t < FRACTION_BITS)
    }

    fn require_fraction_only(&self) -> Result<(), BitError> {
        match self.t_max() {
            Some(t) if t >= FRACTION_BITS => Err(BitError::NotAFractionIndex(t)),
            _ => Ok(()),
        }
    }
}

/// Truncation scope: per 8-bit byte (pixel data) or per 32-bit word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncationMode {
    Byte,
    Word,
}

impl std::fmt::Display for TruncationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TruncationMode::Byte => write!(f, "byte"),
            TruncationMode::Word => write!(f, "word"),
        }
    }
}

/// Run-time truncation knob: mode plus the number of contiguous least
/// significant bits truncated (per byte in byte mode, per word in word mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TruncationSpec {
    mode: TruncationMode,
    count: u32,
}

impl TruncationSpec {
    pub fn new(mode: TruncationMode, count: u32) -> Result<Self, BitError> {
        match mode {
            TruncationMode::Byte if count > 8 => Err(BitError::ByteCount(count)),
            TruncationMode::Word if count > 32 => Err(BitError::WordCount(count)),
            _ => Ok(Self { mode, count }),
        }
    }

    pub fn byte(count: u32) -> Result<Self, BitError> {
        Self::new(TruncationMode::Byte, count)
    }

    pub fn word(count: u32) -> Result<Self, BitError> {
        Self::new(TruncationMode::Word, count)
    }

    pub const fn mode(self) -> TruncationMode {
        self.mode
    }

    pub const fn count(self) -> u32 {
        self.count
    }
}

/// Fixed fill placed on truncated bits: one forced 1 at the most significant
/// truncated position, forced 0 everywhere else in the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DummyPattern {
    pub force_one_mask: u32,
    pub force_zero_mask: u32,
}

impl DummyPattern {
    pub fn apply(self, w: u32) -> u32 {
        (w | self.force_one_mask) & !self.force_zero_mask
    }
}

/// The error-minimizing dummy fill for an index set: bit `t_max` forced to 1,
/// all other members forced to 0. The empty set yields two empty masks.
pub fn optimal_dummy(t: &TruncationIndexSet) -> DummyPattern {
    match t.t_max() {
        None => DummyPattern::default(),
        Some(t_max) => DummyPattern {
            force_one_mask: 1 << t_max,
            force_zero_mask: t.mask() & !(1 << t_max),
        },
    }
}

pub(crate) fn truncate_byte_unchecked(v: u8, k: u32) -> u8 {
    if k == 0 {
        return v;
    }
    let keep = !((1u32 << k) - 1);
    ((v as u32 & keep) | (1 << (k - 1))) as u8
}

/// Replaces the `k` least significant bits of a byte with the dummy pattern
/// `1 0..0`. `k = 0` is the identity; `k > 8` is rejected.
pub fn apply_truncation_byte(v: u8, k: u32) -> Result<u8, BitError> {
    if k > 8 {
        return Err(BitError::ByteCount(k));
    }
    Ok(truncate_byte_unchecked(v, k))
}

/// Applies a truncation spec to a 32-bit word: word mode replaces the `k`
/// contiguous LSBs of the whole word, byte mode truncates each of the four
/// bytes independently.
pub fn apply_truncation_word(w: u32, spec: TruncationSpec) -> u32 {
    match spec.mode() {
        TruncationMode::Word => {
            let k = spec.count();
            if k == 0 {
                return w;
            }
            let keep = if k == 32 { 0 } else { !((1u32 << k) - 1) };
            (w & keep) | (1 << (k - 1))
        }
        TruncationMode::Byte => {
            let k = spec.count();
            let mut out = 0u32;
            for byte in 0..4 {
                let b = ((w >> (byte * 8)) & 0xFF) as u8;
                out |= (truncate_byte_unchecked(b, k) as u32) << (byte * 8);
            }
            out
        }
    }
}

/// Handling of Inf/NaN inputs in the float truncation path.
///
/// The raw bit rule can convert an infinity into a NaN by injecting a
/// fraction bit, which is what the silicon does but rarely what a numeric
/// consumer wants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NonFinitePolicy {
    /// Inf and NaN pass through unchanged (default).
    #[default]
    Preserve,
    /// The raw bit rule is applied regardless of classification.
    HardwareFaithful,
}

/// Truncates fraction bits of a float pattern with the default Inf/NaN
/// policy ([`NonFinitePolicy::Preserve`]). Sign and exponent are untouched;
/// indices at or above 23 are rejected. Idempotent.
pub fn apply_truncation_float(
    x: FloatBits,
    t: &TruncationIndexSet,
) -> Result<FloatBits, BitError> {
    apply_truncation_float_with(x, t, NonFinitePolicy::Preserve)
}

pub fn apply_truncation_float_with(
    x: FloatBits,
    t: &TruncationIndexSet,
    policy: NonFinitePolicy,
) -> Result<FloatBits, BitError> {
    t.require_fraction_only()?;
    if policy == NonFinitePolicy::Preserve && !x.to_f32().is_finite() {
        return Ok(x);
    }
    Ok(FloatBits::from_bits(optimal_dummy(t).apply(x.bits())))
}

/// Per-fill exact error sum from the exhaustive enumeration.
/// `fill_mask` is the pattern placed on the truncated positions of the word;
/// `sse_lsb2` is the sum of squared errors over all true-value combinations,
/// in squared fraction-LSB units (one LSB = `2^-23` of the scale constant).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FillSse {
    pub fill_mask: u32,
    pub sse_lsb2: u128,
}

/// Ensemble statistics of the truncated-bit combinations around a fixed
/// sign/exponent/untruncated-fraction context.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    /// Combination count `m = 2^|T|`.
    pub combinations: u64,
    /// Decimal value of the number under each fill, indexed like `fill_sse`.
    pub values: Vec<f64>,
    /// Ensemble mean of `values`; the unconstrained optimum of the
    /// squared-error objective.
    pub mean: f64,
    /// Ensemble mean of the truncated-bit contribution in LSB units, exact.
    pub mean_lsb: Ratio<i128>,
    /// Exact sum of squared errors for every candidate fill.
    pub fill_sse: Vec<FillSse>,
    /// Sign/exponent scale constant of the context.
    pub c1: f64,
    /// Untruncated-fraction constant of the context.
    pub c2: f64,
}

/// Outcome of the exhaustive fill search.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub stats: EnsembleStats,
    /// Fill masks attaining the minimal SSE, ascending.
    pub argmin_fills: Vec<u32>,
    pub min_sse_lsb2: u128,
    /// The dummy fill mask (most significant member set, rest clear).
    pub dummy_fill: u32,
    /// The complement fill mask (all members set except the most significant).
    pub complement_fill: u32,
}

impl BruteForceResult {
    pub fn dummy_is_minimizer(&self) -> bool {
        self.argmin_fills.binary_search(&self.dummy_fill).is_ok()
    }

    pub fn sse_of(&self, fill_mask: u32) -> Option<u128> {
        self.stats
            .fill_sse
            .iter()
            .find(|f| f.fill_mask == fill_mask)
            .map(|f| f.sse_lsb2)
    }

    pub fn dummy_sse(&self) -> u128 {
        self.sse_of(self.dummy_fill).expect("dummy fill enumerated")
    }

    pub fn complement_sse(&self) -> u128 {
        self.sse_of(self.complement_fill).expect("complement fill enumerated")
    }
}

/// Exhaustively enumerates every true-value combination and every candidate
/// fill of the truncated bits, scoring each fill by its exact integer sum of
/// squared errors. Cost is `4^|T|`; cardinality above
/// [`ORACLE_CARDINALITY_CAP`] is rejected.
///
/// This is the independent check of the dummy-fill rule: the dummy fill is
/// always a member of the returned argmin set, tied with the complement fill.
pub fn brute_force_best_fill(
    t: &TruncationIndexSet,
    context: FloatBits,
) -> Result<BruteForceResult, BitError> {
    brute_force_best_fill_capped(t, context, ORACLE_CARDINALITY_CAP)
}

pub fn brute_force_best_fill_capped(
    t: &TruncationIndexSet,
    context: FloatBits,
    cap: usize,
) -> Result<BruteForceResult, BitError> {
    t.require_fraction_only()?;
    let n = t.cardinality();
    if n > cap {
        return Err(BitError::CardinalityCap(n, cap));
    }
    let m = 1usize << n;

    // Subset sums in integer LSB units and the matching word-domain masks.
    let mut sums = vec![0i128; m];
    let mut masks = vec![0u32; m];
    for j in 0..m {
        for (bit, &idx) in t.indices().iter().enumerate() {
            if (j >> bit) & 1 == 1 {
                sums[j] += 1i128 << idx;
                masks[j] |= 1 << idx;
            }
        }
    }

    let mut fill_sse = Vec::with_capacity(m);
    let mut min_sse = u128::MAX;
    for f in 0..m {
        let mut sse: u128 = 0;
        for s in &sums {
            let d = s - sums[f];
            sse += (d * d) as u128;
        }
        min_sse = min_sse.min(sse);
        fill_sse.push(FillSse { fill_mask: masks[f], sse_lsb2: sse });
    }
    let mut argmin_fills: Vec<u32> = fill_sse
        .iter()
        .filter(|f| f.sse_lsb2 == min_sse)
        .map(|f| f.fill_mask)
        .collect();
    argmin_fills.sort_unstable();

    let c1 = context.scale_constant();
    let c2 = (context.fraction() & !t.mask()) as f64 * (-(FRACTION_BITS as f64)).exp2();
    let lsb = (-(FRACTION_BITS as f64)).exp2();
    let values: Vec<f64> = sums
        .iter()
        .map(|&s| c1 * (1.0 + c2 + s as f64 * lsb))
        .collect();
    let total: i128 = sums.iter().sum();
    let mean_lsb = Ratio::new(total, m as i128);
    let mean = c1 * (1.0 + c2 + (*mean_lsb.numer() as f64 / *mean_lsb.denom() as f64) * lsb);

    let dummy = optimal_dummy(t);
    let dummy_fill = dummy.force_one_mask;
    let complement_fill = t.mask() & !dummy_fill;

    Ok(BruteForceResult {
        stats: EnsembleStats {
            combinations: m as u64,
            values,
            mean,
            mean_lsb,
            fill_sse,
            c1,
            c2,
        },
        argmin_fills,
        min_sse_lsb2: min_sse,
        dummy_fill,
        complement_fill,
    })
}

/// Expected mean squared error of the dummy fill for contiguous truncation
/// of `n` LSBs of a uniform integer, in exact LSB² units:
/// `(4^n + 2) / 12` for `n >= 1`, zero for `n = 0`.
///
/// Equals the exhaustive dummy-fill SSE divided by `2^n`.
pub fn expected_mse_uniform(n: u32) -> Ratio<i128> {
    if n == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new((1i128 << (2 * n)) + 2, 12)
    }
}

/// Analytic expected squared error of the dummy fill for a float truncation
/// set under uniformly distributed true bits:
/// `c1^2 * [ sum 2^(2(k-23))/4 + (2^(t_max-23) - sum 2^(k-23)/2)^2 ]`.
///
/// Matches the exhaustive oracle's dummy-fill mean SSE to relative 1e-12.
pub fn expected_mse_float(t: &TruncationIndexSet, context: FloatBits) -> Result<f64, BitError> {
    t.require_fraction_only()?;
    let Some(t_max) = t.t_max() else {
        return Ok(0.0);
    };
    let c1 = context.scale_constant();
    let mut sum_w = 0.0f64;
    let mut sum_w2 = 0.0f64;
    for &k in t.indices() {
        let w = (k as f64 - FRACTION_BITS as f64).exp2();
        sum_w += w;
        sum_w2 += w * w;
    }
    let w_max = (t_max as f64 - FRACTION_BITS as f64).exp2();
    Ok(c1 * c1 * (sum_w2 / 4.0 + (w_max - sum_w / 2.0).powi(2)))
}

/// Worst-case relative error of contiguous `n`-bit fraction truncation on
/// finite normalized inputs: `2^(n-24)`.
pub fn contiguous_relative_error_bound(n: u32) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n as f64 - 24.0).exp2()
    }
}
