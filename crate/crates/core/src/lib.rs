//! Toolkit for flexible bit-truncation approximate memory.
//!
//! Bit truncation disables storage of selected bits and substitutes a fixed
//! dummy pattern on read, trading output quality for memory power. This crate
//! provides:
//!
//! - [`bitcore`] — the pure truncation rules for bytes, 32-bit words, and
//!   IEEE-754 single-precision floats, plus an exhaustive mean-squared-error
//!   oracle that verifies the dummy pattern is optimal.
//! - [`memsim`] — a cycle-level behavioral simulator of the truncation-managed
//!   SRAM array: per-column manager chain, power-gated retention loss, and
//!   script-driven timing traces.
//! - [`powermodel`] — calibrated read-power and savings estimation (linear
//!   per-bit model and an anchored piecewise-linear model).
//! - [`videopipe`] — raw 4:2:0 video ingestion, the luminance-, content-, and
//!   ROI-aware truncation policies, and PSNR/SSIM quality reports.
//! - [`tensortrunc`] — fraction-bit truncation of float32 tensors with error
//!   statistics and power/error sweep tables.

pub mod bitcore;
pub mod memsim;
pub mod powermodel;
pub mod tensortrunc;
pub mod videopipe;

pub use bitcore::{TruncationMode, TruncationSpec};
