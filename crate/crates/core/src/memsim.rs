//! Cycle-level behavioral simulator of the truncation-managed SRAM array.
//!
//! The array is N words by 32 columns. Each column has a truncation manager
//! with three operating states driven by a Head/Tail chain:
//!
//! - `Normal` (head 0, tail-in 0): rails connected, reads come from the cell.
//! - `MsbTrunc` (head 1): rails in high impedance, the manager drives 1 on
//!   the output and raises Tail toward less significant columns.
//! - `LesserTrunc` (head 0, tail-in 1): rails in high impedance, the manager
//!   drives 0.
//!
//! Tail flows from column 31 downward; the tail into column 31 is tied to
//! ground, and in byte mode the tail is reset to 0 entering each byte's MSB
//! (columns 23, 15, 7). A column whose rails disconnect loses its stored
//! cells within that cycle (the gating delay is shorter than the clock
//! period), so re-powered columns read as `X` until rewritten. Writes aimed
//! at gated columns are silently discarded, as the silicon gives no error
//! signal; [`MemoryArray::discarded_write_bits`] counts them for linting.
//!
//! A read never folds `X` into a guessed bit: consumers that need a numeric
//! value must go through [`TritWord::to_u32`], which fails loudly on any
//! undefined column.

use crate::bitcore::{TruncationMode, TruncationSpec};
use std::fmt;
use thiserror::Error;

pub const WORD_COLUMNS: usize = 32;
pub const DEFAULT_WORDS: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemError {
    #[error("address {addr:#x} out of range (memory has {words} words)")]
    AddressRange { addr: u32, words: u32 },
    #[error("truncation code {0} out of range 0..=31")]
    CodeRange(u8),
    #[error("byte-mode truncation code {0} implies more than 8 bits per byte; codes 0..=7 are valid")]
    ByteCodeRange(u8),
    #[error("gating delay {gating_ns} ns must be shorter than the clock period {period_ns} ns")]
    TimingConfig { gating_ns: u32, period_ns: u32 },
}

/// Error from a script line that parsed but failed during execution.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {source}")]
pub struct ScriptRunError {
    pub line: usize,
    pub source: MemError,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScriptError {
    #[error("line {line}: unknown opcode `{opcode}`")]
    UnknownOpcode { line: usize, opcode: String },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

/// Stored state of one SRAM cell. `Unknown` models retention loss after the
/// rails were disconnected; it is never silently coerced to 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellState {
    Zero,
    One,
    #[default]
    Unknown,
}

impl CellState {
    pub fn symbol(self) -> char {
        match self {
            CellState::Zero => '0',
            CellState::One => '1',
            CellState::Unknown => 'X',
        }
    }
}

/// Resolved operating state of a column's truncation manager.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnState {
    #[default]
    Normal,
    MsbTrunc,
    LesserTrunc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RailState {
    #[default]
    Connected,
    HighZ,
}

/// Per-column manager signals and resolved state for one control setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ManagerState {
    pub head: bool,
    pub tail_in: bool,
    pub tail_out: bool,
    pub state: ColumnState,
    pub rails: RailState,
}

/// Clock contract of the simulation. The default 44 ns gating delay fits
/// inside the 100 ns clock period, which is what lets retention loss be
/// modeled as immediate within the gating cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimingConfig {
    pub clock_period_ns: u32,
    pub gating_delay_ns: u32,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { clock_period_ns: 100, gating_delay_ns: 44 }
    }
}

impl TimingConfig {
    pub fn validate(self) -> Result<Self, MemError> {
        if self.gating_delay_ns >= self.clock_period_ns {
            return Err(MemError::TimingConfig {
                gating_ns: self.gating_delay_ns,
                period_ns: self.clock_period_ns,
            });
        }
        Ok(self)
    }
}

/// A 32-column read value over the symbols {0, 1, X}, column 31 first when
/// rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TritWord {
    bits: [CellState; WORD_COLUMNS],
}

impl TritWord {
    pub fn all_unknown() -> Self {
        Self { bits: [CellState::Unknown; WORD_COLUMNS] }
    }

    pub fn from_u32(w: u32) -> Self {
        let mut bits = [CellState::Zero; WORD_COLUMNS];
        for (col, b) in bits.iter_mut().enumerate() {
            if (w >> col) & 1 == 1 {
                *b = CellState::One;
            }
        }
        Self { bits }
    }

    pub fn bit(&self, col: usize) -> CellState {
        self.bits[col]
    }

    pub fn is_fully_defined(&self) -> bool {
        self.bits.iter().all(|b| *b != CellState::Unknown)
    }

    /// Mask of columns holding a defined 0/1.
    pub fn defined_mask(&self) -> u32 {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != CellState::Unknown)
            .fold(0, |m, (col, _)| m | (1 << col))
    }

    /// Mask of columns holding a defined 1.
    pub fn ones_mask(&self) -> u32 {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b == CellState::One)
            .fold(0, |m, (col, _)| m | (1 << col))
    }

    /// Numeric value, or `None` if any column is undefined.
    pub fn to_u32(&self) -> Option<u32> {
        if self.is_fully_defined() {
            Some(self.ones_mask())
        } else {
            None
        }
    }
}

impl fmt::Display for TritWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for col in (0..WORD_COLUMNS).rev() {
            write!(f, "{}", self.bits[col].symbol())?;
        }
        Ok(())
    }
}

/// Decodes the external control signals into the 32-bit Head vector.
///
/// `trunc_code` encodes `k - 1` for k-bit truncation. With truncation
/// disabled the head vector is all zeros regardless of the other signals.
/// In word mode (`byte_mode_enb` high) the head bit lands at index
/// `trunc_code`; in byte mode (`byte_mode_enb` low) heads land at
/// `{k-1, k+7, k+15, k+23}`, and codes implying more than 8 bits per byte
/// are rejected.
pub fn decode_truncation(
    trunc_enable: bool,
    byte_mode_enb: bool,
    trunc_code: u8,
) -> Result<u32, MemError> {
    if trunc_code > 31 {
        return Err(MemError::CodeRange(trunc_code));
    }
    if !trunc_enable {
        return Ok(0);
    }
    if byte_mode_enb {
        Ok(1u32 << trunc_code)
    } else {
        if trunc_code > 7 {
            return Err(MemError::ByteCodeRange(trunc_code));
        }
        let k = trunc_code as u32 + 1;
        Ok((1 << (k - 1)) | (1 << (k + 7)) | (1 << (k + 15)) | (1 << (k + 23)))
    }
}

/// Runs the Head/Tail chain from column 31 downward and resolves every
/// column's manager state. The tail into column 31 is grounded; in byte
/// mode the tail is reset entering columns 23, 15 and 7.
pub fn propagate_chain(head_mask: u32, byte_mode: bool) -> [ManagerState; WORD_COLUMNS] {
    let mut out = [ManagerState::default(); WORD_COLUMNS];
    let mut tail = false;
    for col in (0..WORD_COLUMNS).rev() {
        if byte_mode && col != 31 && (col + 1) % 8 == 0 {
            tail = false;
        }
        let head = (head_mask >> col) & 1 == 1;
        let (state, tail_out, rails) = if head {
            (ColumnState::MsbTrunc, true, RailState::HighZ)
        } else if tail {
            (ColumnState::LesserTrunc, true, RailState::HighZ)
        } else {
            (ColumnState::Normal, false, RailState::Connected)
        };
        out[col] = ManagerState { head, tail_in: tail, tail_out, state, rails };
        tail = tail_out;
    }
    out
}

/// One script command; each command occupies one clock cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Write { addr: u32, data: u32 },
    Read { addr: u32 },
    Trunc { spec: TruncationSpec },
    Nop,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Write { addr, data } => write!(f, "WRITE {addr:X} {data:08X}"),
            Command::Read { addr } => write!(f, "READ {addr:X}"),
            Command::Trunc { spec } => write!(
                f,
                "TRUNC {} {}",
                match spec.mode() {
                    TruncationMode::Byte => "BYTE",
                    TruncationMode::Word => "WORD",
                },
                spec.count()
            ),
            Command::Nop => write!(f, "NOP"),
        }
    }
}

/// Parsed `.tmscript` program: line-oriented, `#` comments, one command per
/// clock cycle.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    commands: Vec<(usize, Command)>,
}

fn parse_hex(token: &str) -> Option<u32> {
    let digits = token
        .strip_prefix("0x")
        .or_else(|| token.strip_prefix("0X"))
        .unwrap_or(token);
    u32::from_str_radix(digits, 16).ok()
}

impl Script {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut commands = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("");
            let mut tokens = body.split_whitespace();
            let Some(op) = tokens.next() else { continue };
            let malformed = |msg: String| ScriptError::Malformed { line, msg };
            let cmd = match op.to_ascii_uppercase().as_str() {
                "WRITE" => {
                    let addr = tokens
                        .next()
                        .and_then(parse_hex)
                        .ok_or_else(|| malformed("WRITE needs a hex address".into()))?;
                    let data = tokens
                        .next()
                        .and_then(parse_hex)
                        .ok_or_else(|| malformed("WRITE needs hex data".into()))?;
                    Command::Write { addr, data }
                }
                "READ" => {
                    let addr = tokens
                        .next()
                        .and_then(parse_hex)
                        .ok_or_else(|| malformed("READ needs a hex address".into()))?;
                    Command::Read { addr }
                }
                "TRUNC" => {
                    let mode = match tokens.next().map(str::to_ascii_uppercase).as_deref() {
                        Some("BYTE") => TruncationMode::Byte,
                        Some("WORD") => TruncationMode::Word,
                        other => {
                            return Err(malformed(format!(
                                "TRUNC mode must be BYTE or WORD, got `{}`",
                                other.unwrap_or_default()
                            )))
                        }
                    };
                    let k: u32 = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| malformed("TRUNC needs a decimal bit count".into()))?;
                    let spec = TruncationSpec::new(mode, k)
                        .map_err(|e| malformed(e.to_string()))?;
                    Command::Trunc { spec }
                }
                "NOP" => Command::Nop,
                _ => {
                    return Err(ScriptError::UnknownOpcode { line, opcode: op.to_string() });
                }
            };
            if tokens.next().is_some() {
                return Err(malformed(format!("trailing tokens after {op}")));
            }
            commands.push((line, cmd));
        }
        Ok(Self { commands })
    }

    pub fn commands(&self) -> impl Iterator<Item = (usize, Command)> + '_ {
        self.commands.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }
}

/// One trace row: the full external signal set for a cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleRecord {
    pub cycle: u64,
    pub time_ns: u64,
    pub command: String,
    pub word_enable: bool,
    pub readen: bool,
    pub writeen: bool,
    pub trunc_enable: bool,
    pub byte_mode_enb: bool,
    pub trunc_code: u8,
    pub trunc_mode: Option<TruncationMode>,
    pub k: u32,
    pub data_in: Option<u32>,
    pub data_out: TritWord,
}

/// Append-only, deterministic record of a script run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CycleTrace {
    pub records: Vec<CycleRecord>,
}

impl CycleTrace {
    /// The data_out value of every READ cycle, in order.
    pub fn read_values(&self) -> Vec<TritWord> {
        self.records
            .iter()
            .filter(|r| r.readen)
            .map(|r| r.data_out)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cycle,command,trunc_mode,k,data_out\n");
        for r in &self.records {
            let mode = r.trunc_mode.map_or("none".to_string(), |m| m.to_string());
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.cycle, r.command, mode, r.k, r.data_out
            ));
        }
        out
    }

    /// Human-readable aligned rendering of the full signal set.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>5} {:>8}  {:<20} {:>2} {:>2} {:>2} {:>2} {:>3} {:>5} {:<5} {:>2}  {}\n",
            "cycle", "t_ns", "command", "we", "re", "wr", "te", "bme", "code", "mode", "k", "data_out<31:0>"
        ));
        for r in &self.records {
            let mode = r.trunc_mode.map_or("none".to_string(), |m| m.to_string());
            out.push_str(&format!(
                "{:>5} {:>8}  {:<20} {:>2} {:>2} {:>2} {:>2} {:>3} {:>5} {:<5} {:>2}  {}\n",
                r.cycle,
                r.time_ns,
                r.command,
                u8::from(r.word_enable),
                u8::from(r.readen),
                u8::from(r.writeen),
                u8::from(r.trunc_enable),
                u8::from(r.byte_mode_enb),
                format!("{:05b}", r.trunc_code),
                mode,
                r.k,
                r.data_out
            ));
        }
        out
    }
}

/// The simulated memory: N words by 32 columns of three-valued cells plus
/// the per-column manager chain. Each mutating operation models one clock
/// cycle. A `MemoryArray` has a single logical owner; distinct instances are
/// independent.
#[derive(Debug, Clone)]
pub struct MemoryArray {
    words: Vec<[CellState; WORD_COLUMNS]>,
    managers: [ManagerState; WORD_COLUMNS],
    trunc_enable: bool,
    byte_mode_enb: bool,
    trunc_code: u8,
    cycle: u64,
    timing: TimingConfig,
    discarded_write_bits: u64,
}

impl Default for MemoryArray {
    fn default() -> Self {
        Self::new(DEFAULT_WORDS)
    }
}

impl MemoryArray {
    pub fn new(n_words: usize) -> Self {
        Self::with_timing(n_words, TimingConfig::default()).expect("default timing is valid")
    }

    pub fn with_timing(n_words: usize, timing: TimingConfig) -> Result<Self, MemError> {
        Ok(Self {
            words: vec![[CellState::Unknown; WORD_COLUMNS]; n_words],
            managers: propagate_chain(0, false),
            trunc_enable: false,
            byte_mode_enb: true,
            trunc_code: 0,
            cycle: 0,
            timing: timing.validate()?,
            discarded_write_bits: 0,
        })
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn timing(&self) -> TimingConfig {
        self.timing
    }

    pub fn managers(&self) -> &[ManagerState; WORD_COLUMNS] {
        &self.managers
    }

    /// Total write bits silently dropped on gated columns so far.
    pub fn discarded_write_bits(&self) -> u64 {
        self.discarded_write_bits
    }

    /// Currently effective truncation (mode and bit count); `k` is zero when
    /// truncation is disabled.
    pub fn current_truncation(&self) -> (Option<TruncationMode>, u32) {
        if self.trunc_enable {
            let mode = if self.byte_mode_enb { TruncationMode::Word } else { TruncationMode::Byte };
            (Some(mode), self.trunc_code as u32 + 1)
        } else {
            (None, 0)
        }
    }

    fn check_addr(&self, addr: u32) -> Result<usize, MemError> {
        let idx = addr as usize;
        if idx >= self.words.len() {
            return Err(MemError::AddressRange { addr, words: self.words.len() as u32 });
        }
        Ok(idx)
    }

    fn apply_managers(&mut self, new: [ManagerState; WORD_COLUMNS]) {
        for col in 0..WORD_COLUMNS {
            let was_connected = self.managers[col].rails == RailState::Connected;
            if was_connected && new[col].rails == RailState::HighZ {
                // Rails disconnected: every cell in the column decays within
                // the cycle (gating delay < clock period).
                for word in &mut self.words {
                    word[col] = CellState::Unknown;
                }
            }
        }
        self.managers = new;
    }

    /// Drives the raw control signals for one cycle. Invalid combinations
    /// are rejected before any state changes.
    pub fn set_controls(
        &mut self,
        trunc_enable: bool,
        byte_mode_enb: bool,
        trunc_code: u8,
    ) -> Result<(), MemError> {
        let head = decode_truncation(trunc_enable, byte_mode_enb, trunc_code)?;
        self.trunc_enable = trunc_enable;
        self.byte_mode_enb = byte_mode_enb;
        self.trunc_code = trunc_code;
        self.apply_managers(propagate_chain(head, !byte_mode_enb));
        self.cycle += 1;
        Ok(())
    }

    /// Applies a validated truncation spec for one cycle. `k = 0` is
    /// expressed by deasserting the truncation enable, since the code
    /// encodes `k - 1` and has no zero-truncation codepoint.
    pub fn set_truncation(&mut self, spec: TruncationSpec) {
        let byte_mode_enb = spec.mode() == TruncationMode::Word;
        let (enable, code) = match spec.count() {
            0 => (false, 0u8),
            k => (true, (k - 1) as u8),
        };
        self.set_controls(enable, byte_mode_enb, code)
            .expect("validated spec maps to valid controls");
    }

    /// Writes one word in one cycle. Bits aimed at gated columns are
    /// discarded; their cells stay undefined.
    pub fn write_word(&mut self, addr: u32, value: u32) -> Result<(), MemError> {
        let idx = self.check_addr(addr)?;
        for col in 0..WORD_COLUMNS {
            if self.managers[col].rails == RailState::Connected {
                self.words[idx][col] = if (value >> col) & 1 == 1 {
                    CellState::One
                } else {
                    CellState::Zero
                };
            } else {
                self.discarded_write_bits += 1;
            }
        }
        self.cycle += 1;
        Ok(())
    }

    fn resolve_read(&self, idx: usize) -> TritWord {
        let mut out = TritWord::all_unknown();
        for col in 0..WORD_COLUMNS {
            out.bits[col] = match self.managers[col].state {
                ColumnState::MsbTrunc => CellState::One,
                ColumnState::LesserTrunc => CellState::Zero,
                ColumnState::Normal => self.words[idx][col],
            };
        }
        out
    }

    /// Reads one word in one cycle. Truncated columns come from the
    /// managers (head 1, lesser 0); normal columns surface the cell state,
    /// including `X` for cells lost to gating.
    pub fn read_word(&mut self, addr: u32) -> Result<TritWord, MemError> {
        let idx = self.check_addr(addr)?;
        let out = self.resolve_read(idx);
        self.cycle += 1;
        Ok(out)
    }

    pub fn nop(&mut self) {
        self.cycle += 1;
    }

    /// Output bus view on cycles without a read: manager-driven columns show
    /// their forced bit, idle normal columns are undefined.
    fn idle_bus(&self) -> TritWord {
        let mut out = TritWord::all_unknown();
        for col in 0..WORD_COLUMNS {
            out.bits[col] = match self.managers[col].state {
                ColumnState::MsbTrunc => CellState::One,
                ColumnState::LesserTrunc => CellState::Zero,
                ColumnState::Normal => CellState::Unknown,
            };
        }
        out
    }

    /// Executes a parsed script, one command per cycle, and returns the
    /// per-cycle trace. Identical scripts on identical arrays produce
    /// identical traces.
    pub fn run_script(&mut self, script: &Script) -> Result<CycleTrace, ScriptRunError> {
        let mut trace = CycleTrace::default();
        for (line, cmd) in script.commands() {
            let at = |source: MemError| ScriptRunError { line, source };
            let cycle = self.cycle;
            let (data_in, data_out) = match cmd {
                Command::Write { addr, data } => {
                    self.write_word(addr, data).map_err(at)?;
                    (Some(data), self.idle_bus())
                }
                Command::Read { addr } => {
                    let v = self.read_word(addr).map_err(at)?;
                    (None, v)
                }
                Command::Trunc { spec } => {
                    self.set_truncation(spec);
                    (None, self.idle_bus())
                }
                Command::Nop => {
                    self.nop();
                    (None, self.idle_bus())
                }
            };
            let (trunc_mode, k) = self.current_truncation();
            trace.records.push(CycleRecord {
                cycle,
                time_ns: cycle * self.timing.clock_period_ns as u64,
                command: cmd.to_string(),
                word_enable: matches!(cmd, Command::Write { .. } | Command::Read { .. }),
                readen: matches!(cmd, Command::Read { .. }),
                writeen: matches!(cmd, Command::Write { .. }),
                trunc_enable: self.trunc_enable,
                byte_mode_enb: self.byte_mode_enb,
                trunc_code: self.trunc_code,
                trunc_mode,
                k,
                data_in,
                data_out,
            });
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitcore::apply_truncation_word;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn decode_disabled_is_all_zero() {
        assert_eq!(decode_truncation(false, true, 0b10110).unwrap(), 0);
        assert_eq!(decode_truncation(false, false, 31).unwrap(), 0);
    }

    #[test]
    fn decode_word_mode() {
        // 1-bit truncation: code 00000 puts the head at bit 0.
        assert_eq!(decode_truncation(true, true, 0).unwrap(), 1 << 0);
        // 17-bit truncation: code 10000 = 16 puts the head at bit 16.
        assert_eq!(decode_truncation(true, true, 16).unwrap(), 1 << 16);
        assert_eq!(decode_truncation(true, true, 31).unwrap(), 1 << 31);
    }

    #[test]
    fn decode_byte_mode() {
        // k = 3 -> code 2 -> one head per byte.
        let head = decode_truncation(true, false, 2).unwrap();
        assert_eq!(head, (1 << 2) | (1 << 10) | (1 << 18) | (1 << 26));
        assert_eq!(
            decode_truncation(true, false, 8),
            Err(MemError::ByteCodeRange(8))
        );
        assert_eq!(decode_truncation(true, true, 32), Err(MemError::CodeRange(32)));
    }

    #[test]
    fn chain_all_normal_without_heads() {
        for m in propagate_chain(0, false) {
            assert_eq!(m.state, ColumnState::Normal);
            assert_eq!(m.rails, RailState::Connected);
            assert!(!m.tail_out);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)] // col indexes parallel mask/state views
    fn chain_word_mode_head_at_three() {
        let states = propagate_chain(1 << 3, false);
        assert_eq!(states[3].state, ColumnState::MsbTrunc);
        for col in 0..3 {
            assert_eq!(states[col].state, ColumnState::LesserTrunc, "col {col}");
            assert_eq!(states[col].rails, RailState::HighZ);
        }
        for col in 4..32 {
            assert_eq!(states[col].state, ColumnState::Normal, "col {col}");
        }
    }

    #[test]
    fn chain_byte_mode_resets_tail_per_byte() {
        let head = decode_truncation(true, false, 2).unwrap(); // k = 3
        let states = propagate_chain(head, true);
        for byte in 0..4 {
            let base = byte * 8;
            assert_eq!(states[base + 2].state, ColumnState::MsbTrunc);
            assert_eq!(states[base + 1].state, ColumnState::LesserTrunc);
            assert_eq!(states[base].state, ColumnState::LesserTrunc);
            for local in 3..8 {
                assert_eq!(states[base + local].state, ColumnState::Normal);
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn chain_without_byte_reset_crosses_byte_boundary() {
        // Same head pattern but in word mode: tails run through byte MSBs.
        let head = (1 << 2) | (1 << 10) | (1 << 18) | (1 << 26);
        let states = propagate_chain(head, false);
        // Everything at or below bit 26 is truncated.
        for col in 0..=26 {
            assert_ne!(states[col].state, ColumnState::Normal, "col {col}");
        }
        for col in 27..32 {
            assert_eq!(states[col].state, ColumnState::Normal, "col {col}");
        }
    }

    #[test]
    fn tail_monotonicity_within_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let head: u32 = rng.gen();
            let byte_mode = rng.gen_bool(0.5);
            let states = propagate_chain(head, byte_mode);
            let seg = if byte_mode { 8 } else { 32 };
            for start in (0..32).step_by(seg) {
                // Below the highest truncated column of a segment, everything
                // down to the segment's bit 0 is truncated.
                let mut seen_trunc = false;
                for col in (start..start + seg).rev() {
                    let truncated = states[col].state != ColumnState::Normal;
                    if seen_trunc {
                        assert!(truncated, "head {head:#034b} col {col}");
                    }
                    seen_trunc |= truncated;
                }
            }
        }
    }

    #[test]
    fn write_read_without_truncation() {
        let mut mem = MemoryArray::new(16);
        mem.write_word(3, 0x5555_5555).unwrap();
        let v = mem.read_word(3).unwrap();
        assert_eq!(v.to_u32(), Some(0x5555_5555));
    }

    #[test]
    fn address_bounds() {
        let mut mem = MemoryArray::new(16);
        assert_eq!(
            mem.write_word(16, 0),
            Err(MemError::AddressRange { addr: 16, words: 16 })
        );
        assert_eq!(
            mem.read_word(99).unwrap_err(),
            MemError::AddressRange { addr: 99, words: 16 }
        );
    }

    #[test]
    fn fresh_memory_reads_unknown() {
        let mut mem = MemoryArray::new(4);
        let v = mem.read_word(0).unwrap();
        assert!(!v.is_fully_defined());
        assert_eq!(v.defined_mask(), 0);
    }

    #[test]
    fn truncated_read_matches_dummy_rule() {
        let mut mem = MemoryArray::new(8);
        mem.write_word(1, 0x5555_5555).unwrap();
        for (k, expect) in [(2u32, 0x5656_5656u32), (3, 0x5454_5454), (4, 0x5858_5858)] {
            mem.set_truncation(TruncationSpec::byte(0).unwrap());
            mem.write_word(1, 0x5555_5555).unwrap();
            mem.set_truncation(TruncationSpec::byte(k).unwrap());
            assert_eq!(mem.read_word(1).unwrap().to_u32(), Some(expect), "k = {k}");
        }
        mem.set_truncation(TruncationSpec::word(0).unwrap());
        mem.write_word(1, 0x5555_5555).unwrap();
        mem.set_truncation(TruncationSpec::word(16).unwrap());
        assert_eq!(mem.read_word(1).unwrap().to_u32(), Some(0x5555_8000));
    }

    #[test]
    fn gated_write_is_discarded() {
        let mut mem = MemoryArray::new(8);
        mem.set_truncation(TruncationSpec::word(16).unwrap());
        mem.write_word(0, 0xFF00_FF00).unwrap();
        assert_eq!(mem.discarded_write_bits(), 16);
        let v = mem.read_word(0).unwrap();
        // Upper half defined from cells, lower half driven by managers.
        assert_eq!(v.to_u32(), Some(0xFF00_8000));
        // Un-truncating exposes the lost cells.
        mem.set_truncation(TruncationSpec::word(0).unwrap());
        let v = mem.read_word(0).unwrap();
        assert_eq!(v.defined_mask(), 0xFFFF_0000);
        assert_eq!(v.to_u32(), None);
    }

    #[test]
    fn set_truncation_fixpoint_keeps_cells() {
        let mut mem = MemoryArray::new(4);
        mem.write_word(0, 0xA5A5_A5A5).unwrap();
        mem.set_truncation(TruncationSpec::byte(4).unwrap());
        let first = mem.read_word(0).unwrap();
        mem.set_truncation(TruncationSpec::byte(4).unwrap());
        let second = mem.read_word(0).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn retention_loss_on_lowering_truncation() {
        let mut mem = MemoryArray::new(4);
        mem.write_word(0, 0x5555_5555).unwrap();
        mem.set_truncation(TruncationSpec::byte(4).unwrap());
        mem.set_truncation(TruncationSpec::byte(2).unwrap());
        let v = mem.read_word(0).unwrap();
        for byte in 0..4 {
            let base = byte * 8;
            // Bits 3..2 per byte were re-powered but not rewritten.
            assert_eq!(v.bit(base + 3), CellState::Unknown);
            assert_eq!(v.bit(base + 2), CellState::Unknown);
            // Bits 1..0 still truncated: dummy 10.
            assert_eq!(v.bit(base + 1), CellState::One);
            assert_eq!(v.bit(base), CellState::Zero);
            // Upper nibble kept its data.
            for local in 4..8 {
                assert_ne!(v.bit(base + local), CellState::Unknown);
            }
        }
        // Rewrite makes the read fully defined again.
        mem.write_word(0, 0x5555_5555).unwrap();
        let v = mem.read_word(0).unwrap();
        assert_eq!(v.to_u32(), Some(0x5656_5656));
    }

    #[test]
    fn agreement_with_word_truncation_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut mem = MemoryArray::new(4);
        for _ in 0..50 {
            let value: u32 = rng.gen();
            let spec = if rng.gen_bool(0.5) {
                TruncationSpec::byte(rng.gen_range(0..=8)).unwrap()
            } else {
                TruncationSpec::word(rng.gen_range(0..=32)).unwrap()
            };
            mem.set_truncation(TruncationSpec::word(0).unwrap());
            mem.write_word(0, value).unwrap();
            mem.set_truncation(spec);
            let got = mem.read_word(0).unwrap().to_u32().unwrap();
            assert_eq!(got, apply_truncation_word(value, spec), "{spec:?}");
        }
    }

    #[test]
    fn script_parse_and_errors() {
        let script = Script::parse("# comment only\n\nNOP\nWRITE 3 DEADBEEF\nREAD 0x3\n").unwrap();
        assert_eq!(script.len(), 3);

        let err = Script::parse("NOP\nNOP\nNOP\nNOP\nFROB 1\n").unwrap_err();
        assert_eq!(
            err,
            ScriptError::UnknownOpcode { line: 5, opcode: "FROB".into() }
        );

        let err = Script::parse("TRUNC BYTE 9\n").unwrap_err();
        assert!(matches!(err, ScriptError::Malformed { line: 1, .. }));

        let err = Script::parse("WRITE 0\n").unwrap_err();
        assert!(matches!(err, ScriptError::Malformed { line: 1, .. }));
    }

    #[test]
    fn empty_script_empty_trace() {
        let mut mem = MemoryArray::new(4);
        let trace = mem.run_script(&Script::parse("# nothing\n").unwrap()).unwrap();
        assert!(trace.records.is_empty());
    }

    #[test]
    fn script_runtime_error_carries_line() {
        let mut mem = MemoryArray::new(4);
        let script = Script::parse("NOP\nREAD FF\n").unwrap();
        let err = mem.run_script(&script).unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.source, MemError::AddressRange { addr: 0xFF, words: 4 });
    }

    #[test]
    fn trace_determinism() {
        let text = "WRITE 0 55555555\nREAD 0\nTRUNC BYTE 3\nREAD 0\nTRUNC WORD 16\nREAD 0\n";
        let script = Script::parse(text).unwrap();
        let run = |_: ()| {
            let mut mem = MemoryArray::new(8);
            mem.run_script(&script).unwrap()
        };
        assert_eq!(run(()), run(()));
    }

    #[test]
    fn timing_validation() {
        let bad = TimingConfig { clock_period_ns: 40, gating_delay_ns: 44 };
        assert_eq!(
            bad.validate(),
            Err(MemError::TimingConfig { gating_ns: 44, period_ns: 40 })
        );
        assert!(MemoryArray::with_timing(4, bad).is_err());
    }

    /// Independent shadow model: per column, track whether the cell was
    /// written since it was last gated; expected reads come straight from
    /// the mode/k arithmetic, not from the chain logic under test.
    #[test]
    #[allow(clippy::needless_range_loop)] // col indexes masks and the shadow together
    fn random_commands_against_shadow_model() {
        #[derive(Clone, Copy)]
        struct Shadow {
            defined: bool,
            value: bool,
        }
        fn truncated_cols(spec: TruncationSpec) -> (u32, u32) {
            // (all truncated columns, head columns)
            let k = spec.count();
            if k == 0 {
                return (0, 0);
            }
            match spec.mode() {
                TruncationMode::Word => {
                    let mask = if k == 32 { u32::MAX } else { (1 << k) - 1 };
                    (mask, 1 << (k - 1))
                }
                TruncationMode::Byte => {
                    let per = (1u32 << k) - 1;
                    let head = 1u32 << (k - 1);
                    (
                        per | per << 8 | per << 16 | per << 24,
                        head | head << 8 | head << 16 | head << 24,
                    )
                }
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..20 {
            let mut mem = MemoryArray::new(1);
            let mut shadow = [Shadow { defined: false, value: false }; 32];
            let mut spec = TruncationSpec::word(0).unwrap();
            for _ in 0..200 {
                match rng.gen_range(0..3) {
                    0 => {
                        spec = if rng.gen_bool(0.5) {
                            TruncationSpec::byte(rng.gen_range(0..=8)).unwrap()
                        } else {
                            TruncationSpec::word(rng.gen_range(0..=32)).unwrap()
                        };
                        mem.set_truncation(spec);
                        let (gated, _) = truncated_cols(spec);
                        for col in 0..32 {
                            if (gated >> col) & 1 == 1 {
                                shadow[col].defined = false;
                            }
                        }
                    }
                    1 => {
                        let value: u32 = rng.gen();
                        mem.write_word(0, value).unwrap();
                        let (gated, _) = truncated_cols(spec);
                        for col in 0..32 {
                            if (gated >> col) & 1 == 0 {
                                shadow[col].defined = true;
                                shadow[col].value = (value >> col) & 1 == 1;
                            }
                        }
                    }
                    _ => {
                        let got = mem.read_word(0).unwrap();
                        let (gated, heads) = truncated_cols(spec);
                        for col in 0..32 {
                            let expect = if (heads >> col) & 1 == 1 {
                                CellState::One
                            } else if (gated >> col) & 1 == 1 {
                                CellState::Zero
                            } else if shadow[col].defined {
                                if shadow[col].value { CellState::One } else { CellState::Zero }
                            } else {
                                CellState::Unknown
                            };
                            assert_eq!(got.bit(col), expect, "col {col} under {spec:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn trace_csv_shape() {
        let mut mem = MemoryArray::new(8);
        let script = Script::parse("WRITE 0 55555555\nTRUNC BYTE 2\nREAD 0\n").unwrap();
        let trace = mem.run_script(&script).unwrap();
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "cycle,command,trunc_mode,k,data_out");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("2,READ 0,byte,2,"));
        assert!(lines[3].ends_with("01010110010101100101011001010110"));
    }
}
