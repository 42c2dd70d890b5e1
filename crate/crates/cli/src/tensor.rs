//! `tensor`: truncate float32 tensors and sweep truncation levels.

use crate::{Failure, ReportFormat};
use bittrunc::powermodel::SavingsModel;
use bittrunc::tensortrunc::{
    load_raw, load_tensor, save_raw, save_tensor, sweep as run_sweep, sweep_to_csv,
    sweep_to_json, truncate_tensor, TensorBuffer,
};
use std::path::Path;

fn parse_shape(text: &str) -> Result<Vec<u32>, Failure> {
    text.split(['x', 'X', ','])
        .map(|d| {
            d.trim()
                .parse::<u32>()
                .map_err(|_| Failure::usage(format!("`{d}` is not a dimension")))
        })
        .collect()
}

/// `0..23` (inclusive) or a comma list `1,8,17`.
fn parse_n_list(text: &str) -> Result<Vec<u32>, Failure> {
    let bad = || Failure::usage(format!("`{text}` is not a level range `a..b` or list `a,b,c`"));
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi || hi > 23 {
            return Err(bad());
        }
        Ok((lo..=hi).collect())
    } else {
        let list = text
            .split(',')
            .map(|n| n.trim().parse::<u32>().map_err(|_| bad()))
            .collect::<Result<Vec<u32>, Failure>>()?;
        if list.iter().any(|&n| n > 23) {
            return Err(bad());
        }
        Ok(list)
    }
}

fn load(input: &Path, raw_shape: Option<&str>) -> Result<(TensorBuffer, bool), Failure> {
    match raw_shape {
        Some(shape) => {
            let t = load_raw(input, parse_shape(shape)?)
                .map_err(|e| Failure::format(e.to_string()))?;
            Ok((t, true))
        }
        None => {
            let t = load_tensor(input).map_err(|e| Failure::format(e.to_string()))?;
            Ok((t, false))
        }
    }
}

pub fn truncate(
    input: &Path,
    n: u32,
    output: &Path,
    raw_shape: Option<&str>,
) -> Result<(), Failure> {
    let (tensor, is_raw) = load(input, raw_shape)?;
    let truncated = truncate_tensor(&tensor, n).map_err(|e| Failure::usage(e.to_string()))?;
    if is_raw {
        save_raw(&truncated, output).map_err(|e| Failure::format(e.to_string()))?;
    } else {
        save_tensor(&truncated, output).map_err(|e| Failure::format(e.to_string()))?;
    }
    eprintln!("truncated {} elements at n = {n}", truncated.len());
    Ok(())
}

pub fn sweep(
    input: &Path,
    n_list: &str,
    output: Option<&Path>,
    raw_shape: Option<&str>,
    model: &SavingsModel,
    format: ReportFormat,
) -> Result<(), Failure> {
    let (tensor, _) = load(input, raw_shape)?;
    let levels = parse_n_list(n_list)?;
    let reports =
        run_sweep(&tensor, &levels, model).map_err(|e| Failure::format(e.to_string()))?;
    let text = match format {
        ReportFormat::Json => sweep_to_json(&reports),
        ReportFormat::Csv => sweep_to_csv(&reports),
    };
    crate::report::emit(&text, output)?;
    eprintln!("swept {} levels over {} elements", reports.len(), tensor.len());
    Ok(())
}
