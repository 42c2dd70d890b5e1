//! Raw 4:2:0 video ingestion, viewer-aware truncation policies, and
//! PSNR/SSIM quality reporting.
//!
//! Input is headerless planar I420: per frame, a full-resolution Y plane
//! followed by quarter-resolution U and V planes; dimensions come from the
//! caller. Three policies pick per-byte truncation levels:
//!
//! - **luminance**: a clip-wide level from the ambient lighting condition
//!   (normal 0, overcast 3, sunlight 4 LSBs per byte);
//! - **content**: a clip-wide level from the plain-macroblock percentage,
//!   through a configurable monotone breakpoint table onto 0..=4 bits;
//! - **ROI**: per-pixel, lossless inside region-of-interest rectangles and
//!   3 LSBs truncated outside.
//!
//! Policies produce a [`PolicyDecision`]; [`apply_policy`] pushes every byte
//! through the byte truncation rule, and [`quality_report`] pairs PSNR/SSIM
//! against the original with aggregate power savings. Frames are independent
//! work units and are processed in parallel.

use crate::bitcore::truncate_byte_unchecked;
use crate::powermodel::{aggregate_savings_counts, PowerError, SavingsModel};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VideoError {
    #[error("frame dimensions must be even, got {width}x{height}")]
    OddDimensions { width: usize, height: usize },
    #[error("{plane} plane holds {actual} bytes, expected {expected}")]
    PlaneSize { plane: &'static str, expected: usize, actual: usize },
    #[error("stream of {len} bytes is not a multiple of the {frame_bytes}-byte frame size")]
    StreamSize { len: usize, frame_bytes: usize },
    #[error("clips have different dimensions or frame counts")]
    ShapeMismatch,
    #[error("decision shape does not match the clip")]
    DecisionMismatch,
    #[error("per-byte truncation level {0} out of byte range 0..=8")]
    LevelRange(u8),
    #[error("content mapping must start at 0% and be monotone; {0}")]
    BadMapping(String),
    #[error("ROI file line {line}: {msg}")]
    RoiParse { line: usize, msg: String },
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One planar 4:2:0 frame: full-resolution luma, quarter-resolution chroma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlanar420 {
    width: usize,
    height: usize,
    y: Vec<u8>,
    u: Vec<u8>,
    v: Vec<u8>,
}

impl FramePlanar420 {
    pub fn new(
        width: usize,
        height: usize,
        y: Vec<u8>,
        u: Vec<u8>,
        v: Vec<u8>,
    ) -> Result<Self, VideoError> {
        if width == 0 || height == 0 || !width.is_multiple_of(2) || !height.is_multiple_of(2) {
            return Err(VideoError::OddDimensions { width, height });
        }
        let chroma = (width / 2) * (height / 2);
        for (plane, len, expected) in
            [("Y", y.len(), width * height), ("U", u.len(), chroma), ("V", v.len(), chroma)]
        {
            if len != expected {
                return Err(VideoError::PlaneSize { plane, expected, actual: len });
            }
        }
        Ok(Self { width, height, y, u, v })
    }

    /// A frame with every sample of each plane set to a constant.
    pub fn filled(width: usize, height: usize, y: u8, u: u8, v: u8) -> Result<Self, VideoError> {
        let chroma = (width / 2) * (height / 2);
        Self::new(width, height, vec![y; width * height], vec![u; chroma], vec![v; chroma])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn u(&self) -> &[u8] {
        &self.u
    }

    pub fn v(&self) -> &[u8] {
        &self.v
    }

    /// Bytes of one I420 frame at the given dimensions.
    pub fn frame_bytes(width: usize, height: usize) -> usize {
        width * height * 3 / 2
    }
}

/// A sequence of equally sized frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoClip {
    width: usize,
    height: usize,
    frames: Vec<FramePlanar420>,
}

impl VideoClip {
    pub fn new(frames: Vec<FramePlanar420>) -> Result<Self, VideoError> {
        let Some(first) = frames.first() else {
            return Err(VideoError::StreamSize { len: 0, frame_bytes: 0 });
        };
        let (width, height) = (first.width, first.height);
        if frames.iter().any(|f| f.width != width || f.height != height) {
            return Err(VideoError::ShapeMismatch);
        }
        Ok(Self { width, height, frames })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> &[FramePlanar420] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Decodes a frame-sequential I420 byte stream.
    pub fn from_i420_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self, VideoError> {
        if width == 0 || height == 0 || !width.is_multiple_of(2) || !height.is_multiple_of(2) {
            return Err(VideoError::OddDimensions { width, height });
        }
        let frame_bytes = FramePlanar420::frame_bytes(width, height);
        if bytes.is_empty() || !bytes.len().is_multiple_of(frame_bytes) {
            return Err(VideoError::StreamSize { len: bytes.len(), frame_bytes });
        }
        let luma = width * height;
        let chroma = luma / 4;
        let frames = bytes
            .chunks_exact(frame_bytes)
            .map(|chunk| {
                FramePlanar420::new(
                    width,
                    height,
                    chunk[..luma].to_vec(),
                    chunk[luma..luma + chroma].to_vec(),
                    chunk[luma + chroma..].to_vec(),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { width, height, frames })
    }

    pub fn to_i420_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(self.frames.len() * FramePlanar420::frame_bytes(self.width, self.height));
        for f in &self.frames {
            out.extend_from_slice(&f.y);
            out.extend_from_slice(&f.u);
            out.extend_from_slice(&f.v);
        }
        out
    }
}

/// Reads a raw I420 file; the byte length must be an exact multiple of the
/// frame size `w*h*3/2`.
pub fn load_yuv(path: impl AsRef<Path>, width: usize, height: usize) -> Result<VideoClip, VideoError> {
    let bytes = std::fs::read(path)?;
    VideoClip::from_i420_bytes(width, height, &bytes)
}

/// Writes a clip back out as raw I420; `save` then `load` is byte-identical.
pub fn save_yuv(clip: &VideoClip, path: impl AsRef<Path>) -> Result<(), VideoError> {
    std::fs::write(path, clip.to_i420_bytes())?;
    Ok(())
}

pub const MACROBLOCK_SIZE: usize = 16;

/// Default plain-macroblock variance threshold, in squared luma units.
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 100.0;

/// 16x16 luma partition of a frame with per-block variance and plain flags.
#[derive(Debug, Clone)]
pub struct MacroblockGrid {
    pub cols: usize,
    pub rows: usize,
    /// Population variance of each block's luma, row-major.
    pub variances: Vec<f64>,
    pub plain: Vec<bool>,
    /// Percentage of blocks whose variance is below the threshold.
    pub plain_pct: f64,
    pub threshold: f64,
}

/// Computes the macroblock grid of a frame; edge blocks cover the remaining
/// pixels. A block is plain when its variance falls below the threshold.
pub fn analyze_macroblocks(frame: &FramePlanar420, variance_threshold: f64) -> MacroblockGrid {
    let cols = frame.width.div_ceil(MACROBLOCK_SIZE);
    let rows = frame.height.div_ceil(MACROBLOCK_SIZE);
    let mut variances = Vec::with_capacity(cols * rows);
    let mut plain = Vec::with_capacity(cols * rows);
    let mut plain_count = 0usize;
    for by in 0..rows {
        for bx in 0..cols {
            let x0 = bx * MACROBLOCK_SIZE;
            let y0 = by * MACROBLOCK_SIZE;
            let x1 = (x0 + MACROBLOCK_SIZE).min(frame.width);
            let y1 = (y0 + MACROBLOCK_SIZE).min(frame.height);
            let mut sum = 0u64;
            let mut sum_sq = 0u64;
            for y in y0..y1 {
                for x in x0..x1 {
                    let s = frame.y[y * frame.width + x] as u64;
                    sum += s;
                    sum_sq += s * s;
                }
            }
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            let mean = sum as f64 / n;
            let var = (sum_sq as f64 / n - mean * mean).max(0.0);
            let is_plain = var < variance_threshold;
            plain_count += usize::from(is_plain);
            variances.push(var);
            plain.push(is_plain);
        }
    }
    let total = (cols * rows) as f64;
    MacroblockGrid {
        cols,
        rows,
        variances,
        plain,
        plain_pct: 100.0 * plain_count as f64 / total,
        threshold: variance_threshold,
    }
}

/// Mean plain-macroblock percentage over all frames of a clip.
pub fn clip_plain_pct(clip: &VideoClip, variance_threshold: f64) -> f64 {
    let total: f64 = clip
        .frames
        .par_iter()
        .map(|f| analyze_macroblocks(f, variance_threshold).plain_pct)
        .sum();
    total / clip.frames.len() as f64
}

/// Clip-level content classification by plain-macroblock percentage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceClass {
    Low,
    Medium,
    High,
}

/// Plain-percentage breakpoints for [`VarianceClass`]: mostly-plain clips
/// are low variance.
#[derive(Debug, Clone, Copy)]
pub struct ClassBreakpoints {
    pub low_min_plain_pct: f64,
    pub medium_min_plain_pct: f64,
}

impl Default for ClassBreakpoints {
    fn default() -> Self {
        Self { low_min_plain_pct: 60.0, medium_min_plain_pct: 30.0 }
    }
}

pub fn classify_variance(plain_pct: f64, breakpoints: &ClassBreakpoints) -> VarianceClass {
    if plain_pct >= breakpoints.low_min_plain_pct {
        VarianceClass::Low
    } else if plain_pct >= breakpoints.medium_min_plain_pct {
        VarianceClass::Medium
    } else {
        VarianceClass::High
    }
}

/// Ambient lighting condition of the luminance-aware policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LuminanceCondition {
    Normal,
    Overcast,
    Sunlight,
}

/// Clip-wide truncation level for a lighting condition: normal keeps every
/// bit, overcast truncates 3 LSBs per byte, sunlight 4.
pub fn policy_luminance(condition: LuminanceCondition) -> u8 {
    match condition {
        LuminanceCondition::Normal => 0,
        LuminanceCondition::Overcast => 3,
        LuminanceCondition::Sunlight => 4,
    }
}

/// Monotone breakpoint table from plain-macroblock percentage onto a
/// truncation level. Each entry maps `plain_pct >= min_plain_pct` to `k`;
/// the highest matching entry wins and outputs are clamped to 0..=4.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentMapping {
    entries: Vec<(f64, u8)>,
}

impl Default for ContentMapping {
    fn default() -> Self {
        Self {
            entries: vec![(0.0, 0), (20.0, 1), (40.0, 2), (60.0, 3), (80.0, 4)],
        }
    }
}

impl ContentMapping {
    /// Validates that breakpoints start at 0, strictly increase, and never
    /// map more-plain content to fewer truncated bits.
    pub fn new(entries: Vec<(f64, u8)>) -> Result<Self, VideoError> {
        let Some(first) = entries.first() else {
            return Err(VideoError::BadMapping("mapping is empty".into()));
        };
        if first.0 != 0.0 {
            return Err(VideoError::BadMapping(format!(
                "first breakpoint must be 0%, got {}%",
                first.0
            )));
        }
        for pair in entries.windows(2) {
            let ((p0, k0), (p1, k1)) = (pair[0], pair[1]);
            if p1 <= p0 {
                return Err(VideoError::BadMapping(format!(
                    "breakpoints must strictly increase ({p0}% then {p1}%)"
                )));
            }
            if k1 < k0 {
                return Err(VideoError::BadMapping(format!(
                    "level decreases from {k0} to {k1} at {p1}%"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, u8)] {
        &self.entries
    }
}

/// Content-aware level: table lookup of the plain-macroblock percentage,
/// clamped to the 0..=4 range the policy is defined over.
pub fn policy_content(plain_pct: f64, mapping: &ContentMapping) -> u8 {
    let mut k = 0;
    for &(min_pct, level) in &mapping.entries {
        if plain_pct >= min_pct {
            k = level;
        }
    }
    k.min(4)
}

/// Axis-aligned region of interest in luma pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

/// Per-frame ROI rectangles, typically parsed from a sidecar file with
/// `frame_index x y w h` lines and `#` comments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoiSpec {
    rects: BTreeMap<usize, Vec<Rect>>,
}

impl RoiSpec {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, VideoError> {
        let mut rects: BTreeMap<usize, Vec<Rect>> = BTreeMap::new();
        let mut last_frame = 0usize;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("");
            if body.trim().is_empty() {
                continue;
            }
            let fields: Vec<usize> = body
                .split_whitespace()
                .map(|t| {
                    t.parse().map_err(|_| VideoError::RoiParse {
                        line,
                        msg: format!("`{t}` is not a non-negative integer"),
                    })
                })
                .collect::<Result<_, _>>()?;
            let [frame, x, y, w, h] = fields[..] else {
                return Err(VideoError::RoiParse {
                    line,
                    msg: format!("expected 5 fields `frame x y w h`, got {}", fields.len()),
                });
            };
            if frame < last_frame {
                return Err(VideoError::RoiParse {
                    line,
                    msg: format!("frame indices must be monotone ({last_frame} then {frame})"),
                });
            }
            last_frame = frame;
            rects.entry(frame).or_default().push(Rect { x, y, w, h });
        }
        Ok(Self { rects })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VideoError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn rects_for(&self, frame: usize) -> &[Rect] {
        self.rects.get(&frame).map_or(&[], Vec::as_slice)
    }
}

/// Per-pixel truncation levels for the three planes of one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneKMaps {
    pub y: Vec<u8>,
    pub u: Vec<u8>,
    pub v: Vec<u8>,
}

/// Truncation level assignment for one frame: one level for every byte, or
/// explicit per-pixel maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KMap {
    Uniform(u8),
    PerPixel(Box<PlaneKMaps>),
}

/// Which planes the policy actually truncates. Memory stores all pixel
/// bytes, so the default truncates all three; a luma-only mode exists for
/// comparison against systems that leave chroma untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneSelection {
    All,
    LumaOnly,
}

/// A policy's resolved output for a clip: per-frame level maps plus the
/// metadata needed to reproduce the run.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub policy: String,
    pub params: serde_json::Value,
    pub width: usize,
    pub height: usize,
    pub planes: PlaneSelection,
    pub frames: Vec<KMap>,
}

impl PolicyDecision {
    fn uniform(
        policy: &str,
        params: serde_json::Value,
        clip: &VideoClip,
        k: u8,
        planes: PlaneSelection,
    ) -> Self {
        Self {
            policy: policy.to_string(),
            params,
            width: clip.width,
            height: clip.height,
            planes,
            frames: vec![KMap::Uniform(k); clip.frames.len()],
        }
    }

    fn validate_for(&self, clip: &VideoClip) -> Result<(), VideoError> {
        if self.width != clip.width
            || self.height != clip.height
            || self.frames.len() != clip.frames.len()
        {
            return Err(VideoError::DecisionMismatch);
        }
        let luma = self.width * self.height;
        let chroma = luma / 4;
        for frame in &self.frames {
            match frame {
                KMap::Uniform(k) => {
                    if *k > 8 {
                        return Err(VideoError::LevelRange(*k));
                    }
                }
                KMap::PerPixel(maps) => {
                    if maps.y.len() != luma || maps.u.len() != chroma || maps.v.len() != chroma {
                        return Err(VideoError::DecisionMismatch);
                    }
                    if let Some(&k) = maps.y.iter().chain(&maps.u).chain(&maps.v).find(|&&k| k > 8)
                    {
                        return Err(VideoError::LevelRange(k));
                    }
                }
            }
        }
        Ok(())
    }

    /// Histogram of effective per-byte truncation levels over the whole
    /// clip, honoring the plane selection (unselected planes count as 0).
    pub fn k_histogram(&self) -> [u64; 9] {
        let luma = (self.width * self.height) as u64;
        let chroma = luma / 4;
        let mut counts = [0u64; 9];
        for frame in &self.frames {
            match frame {
                KMap::Uniform(k) => {
                    counts[*k as usize] += luma;
                    match self.planes {
                        PlaneSelection::All => counts[*k as usize] += 2 * chroma,
                        PlaneSelection::LumaOnly => counts[0] += 2 * chroma,
                    }
                }
                KMap::PerPixel(maps) => {
                    for &k in &maps.y {
                        counts[k as usize] += 1;
                    }
                    match self.planes {
                        PlaneSelection::All => {
                            for &k in maps.u.iter().chain(&maps.v) {
                                counts[k as usize] += 1;
                            }
                        }
                        PlaneSelection::LumaOnly => counts[0] += 2 * chroma,
                    }
                }
            }
        }
        counts
    }
}

/// Decision for the luminance-aware policy: one clip-wide level.
pub fn decide_luminance(clip: &VideoClip, condition: LuminanceCondition) -> PolicyDecision {
    let k = policy_luminance(condition);
    PolicyDecision::uniform(
        "luminance",
        serde_json::json!({ "condition": condition, "k": k }),
        clip,
        k,
        PlaneSelection::All,
    )
}

/// Decision for the content-aware policy: the clip's mean plain-macroblock
/// percentage drives the breakpoint table.
pub fn decide_content(
    clip: &VideoClip,
    mapping: &ContentMapping,
    variance_threshold: f64,
) -> PolicyDecision {
    let plain_pct = clip_plain_pct(clip, variance_threshold);
    let k = policy_content(plain_pct, mapping);
    PolicyDecision::uniform(
        "content",
        serde_json::json!({
            "plain_pct": plain_pct,
            "variance_threshold": variance_threshold,
            "k": k,
        }),
        clip,
        k,
        PlaneSelection::All,
    )
}

/// Per-pixel level maps for the ROI policy on one frame: 0 inside any
/// rectangle, 3 outside; chroma maps are derived at half resolution, a
/// chroma pixel counting as ROI when its 2x2 luma block touches one.
pub fn policy_roi(rects: &[Rect], width: usize, height: usize) -> PlaneKMaps {
    const NON_ROI_K: u8 = 3;
    let (cw, ch) = (width / 2, height / 2);
    let mut maps = PlaneKMaps {
        y: vec![NON_ROI_K; width * height],
        u: vec![NON_ROI_K; cw * ch],
        v: vec![NON_ROI_K; cw * ch],
    };
    for r in rects {
        // Clip to frame bounds.
        let x0 = r.x.min(width);
        let y0 = r.y.min(height);
        let x1 = (r.x + r.w).min(width);
        let y1 = (r.y + r.h).min(height);
        for y in y0..y1 {
            maps.y[y * width + x0..y * width + x1].fill(0);
        }
        let (cx0, cy0) = (x0 / 2, y0 / 2);
        let (cx1, cy1) = (x1.div_ceil(2).min(cw), y1.div_ceil(2).min(ch));
        for cy in cy0..cy1 {
            maps.u[cy * cw + cx0..cy * cw + cx1].fill(0);
            maps.v[cy * cw + cx0..cy * cw + cx1].fill(0);
        }
    }
    maps
}

/// Decision for the ROI-aware policy from a sidecar spec.
pub fn decide_roi(clip: &VideoClip, roi: &RoiSpec) -> PolicyDecision {
    let frames = (0..clip.frames.len())
        .into_par_iter()
        .map(|i| {
            KMap::PerPixel(Box::new(policy_roi(roi.rects_for(i), clip.width, clip.height)))
        })
        .collect();
    PolicyDecision {
        policy: "roi".to_string(),
        params: serde_json::json!({ "non_roi_k": 3 }),
        width: clip.width,
        height: clip.height,
        planes: PlaneSelection::All,
        frames,
    }
}

fn truncate_plane_uniform(plane: &[u8], k: u8) -> Vec<u8> {
    plane.iter().map(|&b| truncate_byte_unchecked(b, k as u32)).collect()
}

fn truncate_plane_mapped(plane: &[u8], kmap: &[u8]) -> Vec<u8> {
    plane
        .iter()
        .zip(kmap)
        .map(|(&b, &k)| truncate_byte_unchecked(b, k as u32))
        .collect()
}

/// Applies a decision to a clip, pushing every selected byte through the
/// byte truncation rule. Deterministic: the same clip and decision always
/// produce the same output.
pub fn apply_policy(clip: &VideoClip, decision: &PolicyDecision) -> Result<VideoClip, VideoError> {
    decision.validate_for(clip)?;
    let frames: Vec<FramePlanar420> = clip
        .frames
        .par_iter()
        .zip(&decision.frames)
        .map(|(frame, kmap)| {
            let (y, u, v) = match kmap {
                KMap::Uniform(k) => {
                    let y = truncate_plane_uniform(&frame.y, *k);
                    match decision.planes {
                        PlaneSelection::All => (
                            y,
                            truncate_plane_uniform(&frame.u, *k),
                            truncate_plane_uniform(&frame.v, *k),
                        ),
                        PlaneSelection::LumaOnly => (y, frame.u.clone(), frame.v.clone()),
                    }
                }
                KMap::PerPixel(maps) => {
                    let y = truncate_plane_mapped(&frame.y, &maps.y);
                    match decision.planes {
                        PlaneSelection::All => (
                            y,
                            truncate_plane_mapped(&frame.u, &maps.u),
                            truncate_plane_mapped(&frame.v, &maps.v),
                        ),
                        PlaneSelection::LumaOnly => (y, frame.u.clone(), frame.v.clone()),
                    }
                }
            };
            FramePlanar420 { width: frame.width, height: frame.height, y, u, v }
        })
        .collect();
    Ok(VideoClip { width: clip.width, height: clip.height, frames })
}

/// Which planes metrics are computed over. Luma dominates perception, so Y
/// only is the default; the all-planes mode averages per-plane results
/// weighted by sample count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricPlanes {
    YOnly,
    All,
}

#[derive(Debug, Clone, Copy)]
pub struct MetricConfig {
    pub planes: MetricPlanes,
    /// PSNR reported for identical inputs, keeping report files finite.
    pub psnr_cap_db: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { planes: MetricPlanes::YOnly, psnr_cap_db: 99.0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PsnrResult {
    pub db: f64,
    pub mse: f64,
    /// True when the compared samples were identical and the cap applied.
    pub identical: bool,
}

fn plane_mse(a: &[u8], b: &[u8]) -> f64 {
    let sum: u64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    sum as f64 / a.len() as f64
}

fn psnr_from_mse(mse: f64, cap_db: f64) -> f64 {
    if mse == 0.0 {
        cap_db
    } else {
        (10.0 * (255.0f64 * 255.0 / mse).log10()).min(cap_db)
    }
}

fn check_shape(a: &FramePlanar420, b: &FramePlanar420) -> Result<(), VideoError> {
    if a.width != b.width || a.height != b.height {
        return Err(VideoError::ShapeMismatch);
    }
    Ok(())
}

/// Peak signal-to-noise ratio between two frames, `10*log10(255^2 / MSE)`.
/// Identical inputs report the cap with the `identical` flag set.
pub fn psnr(a: &FramePlanar420, b: &FramePlanar420, cfg: &MetricConfig) -> Result<PsnrResult, VideoError> {
    check_shape(a, b)?;
    match cfg.planes {
        MetricPlanes::YOnly => {
            let mse = plane_mse(&a.y, &b.y);
            Ok(PsnrResult { db: psnr_from_mse(mse, cfg.psnr_cap_db), mse, identical: mse == 0.0 })
        }
        MetricPlanes::All => {
            let mut db_weighted = 0.0;
            let mut mse_weighted = 0.0;
            let mut samples = 0usize;
            for (pa, pb) in [(&a.y, &b.y), (&a.u, &b.u), (&a.v, &b.v)] {
                let mse = plane_mse(pa, pb);
                db_weighted += psnr_from_mse(mse, cfg.psnr_cap_db) * pa.len() as f64;
                mse_weighted += mse * pa.len() as f64;
                samples += pa.len();
            }
            let mse = mse_weighted / samples as f64;
            Ok(PsnrResult {
                db: db_weighted / samples as f64,
                mse,
                identical: mse == 0.0,
            })
        }
    }
}

/// Structural similarity over a sliding window, mean-pooled.
///
/// Standard constants K1 = 0.01, K2 = 0.03, L = 255 with a uniform 8x8
/// window; planes smaller than the window fall back to one full-plane
/// window.
pub fn ssim(a: &FramePlanar420, b: &FramePlanar420, cfg: &MetricConfig) -> Result<f64, VideoError> {
    check_shape(a, b)?;
    let (cw, chh) = (a.width / 2, a.height / 2);
    match cfg.planes {
        MetricPlanes::YOnly => Ok(ssim_plane(&a.y, &b.y, a.width, a.height)),
        MetricPlanes::All => {
            let planes = [
                (ssim_plane(&a.y, &b.y, a.width, a.height), a.y.len()),
                (ssim_plane(&a.u, &b.u, cw, chh), a.u.len()),
                (ssim_plane(&a.v, &b.v, cw, chh), a.v.len()),
            ];
            let samples: usize = planes.iter().map(|(_, n)| n).sum();
            Ok(planes.iter().map(|(s, n)| s * *n as f64).sum::<f64>() / samples as f64)
        }
    }
}

const SSIM_WINDOW: usize = 8;

fn ssim_plane(a: &[u8], b: &[u8], width: usize, height: usize) -> f64 {
    const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
    const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

    let win_w = SSIM_WINDOW.min(width);
    let win_h = SSIM_WINDOW.min(height);

    // Summed-area tables over a, b, a^2, b^2 and ab, one guard row/column.
    let stride = width + 1;
    let mut sa = vec![0u64; stride * (height + 1)];
    let mut sb = vec![0u64; stride * (height + 1)];
    let mut saa = vec![0u64; stride * (height + 1)];
    let mut sbb = vec![0u64; stride * (height + 1)];
    let mut sab = vec![0u64; stride * (height + 1)];
    for y in 0..height {
        for x in 0..width {
            let va = a[y * width + x] as u64;
            let vb = b[y * width + x] as u64;
            let i = (y + 1) * stride + (x + 1);
            let up = i - stride;
            sa[i] = va + sa[i - 1] + sa[up] - sa[up - 1];
            sb[i] = vb + sb[i - 1] + sb[up] - sb[up - 1];
            saa[i] = va * va + saa[i - 1] + saa[up] - saa[up - 1];
            sbb[i] = vb * vb + sbb[i - 1] + sbb[up] - sbb[up - 1];
            sab[i] = va * vb + sab[i - 1] + sab[up] - sab[up - 1];
        }
    }
    let window_sum = |table: &[u64], x0: usize, y0: usize| -> f64 {
        let (x1, y1) = (x0 + win_w, y0 + win_h);
        (table[y1 * stride + x1] + table[y0 * stride + x0]
            - table[y0 * stride + x1]
            - table[y1 * stride + x0]) as f64
    };

    let n = (win_w * win_h) as f64;
    let mut total = 0.0;
    let mut windows = 0u64;
    for y0 in 0..=(height - win_h) {
        for x0 in 0..=(width - win_w) {
            let mu_a = window_sum(&sa, x0, y0) / n;
            let mu_b = window_sum(&sb, x0, y0) / n;
            let var_a = window_sum(&saa, x0, y0) / n - mu_a * mu_a;
            let var_b = window_sum(&sbb, x0, y0) / n - mu_b * mu_b;
            let cov = window_sum(&sab, x0, y0) / n - mu_a * mu_b;
            let s = ((2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2))
                / ((mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2));
            total += s;
            windows += 1;
        }
    }
    total / windows as f64
}

/// Quality of one frame of a policy run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrameQuality {
    pub frame: usize,
    pub psnr_db: f64,
    pub mse: f64,
    pub identical: bool,
    pub ssim: f64,
}

/// Per-frame and aggregate quality of a policy run, paired with the power
/// savings the truncation map earns under the chosen model.
#[derive(Debug, Clone, Serialize)]
pub struct QualityReport {
    pub policy: String,
    pub params: serde_json::Value,
    pub power_model: String,
    pub power_savings_pct: f64,
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    pub psnr_cap_db: f64,
    pub frames: Vec<FrameQuality>,
}

impl QualityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat rendering: one row per frame plus a `mean` row; the clip-level
    /// savings column carries the same value on every row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,psnr_db,ssim,power_savings_pct\n");
        for f in &self.frames {
            writeln!(out, "{},{},{},{}", f.frame, f.psnr_db, f.ssim, self.power_savings_pct)
                .expect("string write");
        }
        writeln!(
            out,
            "mean,{},{},{}",
            self.mean_psnr_db, self.mean_ssim, self.power_savings_pct
        )
        .expect("string write");
        out
    }
}

/// Compares a policy run against the original clip and reports quality plus
/// aggregate power savings.
pub fn quality_report(
    orig: &VideoClip,
    truncated: &VideoClip,
    decision: &PolicyDecision,
    model: &SavingsModel,
    cfg: &MetricConfig,
) -> Result<QualityReport, VideoError> {
    if orig.width != truncated.width
        || orig.height != truncated.height
        || orig.frames.len() != truncated.frames.len()
    {
        return Err(VideoError::ShapeMismatch);
    }
    let frames: Vec<FrameQuality> = orig
        .frames
        .par_iter()
        .zip(&truncated.frames)
        .enumerate()
        .map(|(i, (a, b))| -> Result<FrameQuality, VideoError> {
            let p = psnr(a, b, cfg)?;
            let s = ssim(a, b, cfg)?;
            Ok(FrameQuality { frame: i, psnr_db: p.db, mse: p.mse, identical: p.identical, ssim: s })
        })
        .collect::<Result<_, _>>()?;
    let n = frames.len() as f64;
    let mean_psnr_db = frames.iter().map(|f| f.psnr_db).sum::<f64>() / n;
    let mean_ssim = frames.iter().map(|f| f.ssim).sum::<f64>() / n;
    let power_savings_pct = aggregate_savings_counts(&decision.k_histogram(), model)?;
    Ok(QualityReport {
        policy: decision.policy.clone(),
        params: decision.params.clone(),
        power_model: model.kind.to_string(),
        power_savings_pct,
        mean_psnr_db,
        mean_ssim,
        psnr_cap_db: cfg.psnr_cap_db,
        frames,
    })
}
