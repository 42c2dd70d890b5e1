//! `sim`: run a `.tmscript` program and emit cycle traces.

use crate::Failure;
use bittrunc::memsim::{MemoryArray, Script};
use std::path::Path;

pub fn run(
    script_path: &Path,
    trace_csv: Option<&Path>,
    trace_text: Option<&Path>,
    words: usize,
    strict: bool,
) -> Result<(), Failure> {
    let text = std::fs::read_to_string(script_path)?;
    let script = Script::parse(&text).map_err(|e| Failure::format(e.to_string()))?;

    let mut mem = MemoryArray::new(words);
    let trace = mem.run_script(&script).map_err(|e| Failure::format(e.to_string()))?;

    if let Some(path) = trace_csv {
        std::fs::write(path, trace.to_csv())?;
    }
    if let Some(path) = trace_text {
        std::fs::write(path, trace.render_text())?;
    }
    if trace_csv.is_none() && trace_text.is_none() {
        print!("{}", trace.render_text());
    }

    if mem.discarded_write_bits() > 0 {
        eprintln!(
            "warning: {} write bits were aimed at gated columns and discarded",
            mem.discarded_write_bits()
        );
    }

    let undefined_reads: Vec<u64> = trace
        .records
        .iter()
        .filter(|r| r.readen && !r.data_out.is_fully_defined())
        .map(|r| r.cycle)
        .collect();
    if !undefined_reads.is_empty() {
        eprintln!(
            "note: reads with undefined bits at cycles {:?} (cells lost to gating and not rewritten)",
            undefined_reads
        );
        if strict {
            return Err(Failure::verification(format!(
                "{} reads returned undefined bits in strict mode",
                undefined_reads.len()
            )));
        }
    }
    eprintln!("{} cycles simulated on a {}-word array", trace.records.len(), words);
    Ok(())
}
