//! `power`: savings and read/write power for one truncation setting.

use crate::{Failure, ReportFormat};
use bittrunc::powermodel::{
    read_power_estimate, savings_anchored, savings_linear, ByteClass, SavingsModel,
};
use bittrunc::{TruncationMode, TruncationSpec};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct PowerReport {
    mode: TruncationMode,
    k: u32,
    model: String,
    savings_pct: f64,
    savings_linear_pct: f64,
    savings_anchored_pct: f64,
    base_read_power_uw: f64,
    read_power_uw: f64,
    write_power_mw: f64,
    manager_overhead_uw: f64,
    pattern: Option<String>,
}

pub fn run(
    mode: TruncationMode,
    k: u32,
    pattern: Option<&str>,
    output: Option<&Path>,
    model: &SavingsModel,
    format: ReportFormat,
) -> Result<(), Failure> {
    let spec = TruncationSpec::new(mode, k).map_err(|e| Failure::usage(e.to_string()))?;
    let classes = pattern
        .map(|p| {
            let digits = p.strip_prefix("0x").or_else(|| p.strip_prefix("0X")).unwrap_or(p);
            u32::from_str_radix(digits, 16)
                .map(ByteClass::classify_word)
                .map_err(|_| Failure::usage(format!("--pattern `{p}` is not a 32-bit hex word")))
        })
        .transpose()?;

    let report = PowerReport {
        mode,
        k,
        model: model.kind.to_string(),
        savings_pct: model.savings_pct(spec),
        savings_linear_pct: savings_linear(spec, &model.params),
        savings_anchored_pct: savings_anchored(spec, &model.table),
        base_read_power_uw: model.params.base_read_power_uw,
        read_power_uw: read_power_estimate(spec, classes, &model.params),
        write_power_mw: model.params.write_power_mw,
        manager_overhead_uw: model.params.manager_overhead_uw,
        pattern: pattern.map(str::to_string),
    };

    let text = match format {
        ReportFormat::Json => serde_json::to_string_pretty(&report).expect("report serializes"),
        ReportFormat::Csv => format!(
            "mode,k,model,savings_pct,savings_linear_pct,savings_anchored_pct,\
             base_read_power_uw,read_power_uw,write_power_mw,manager_overhead_uw,pattern\n\
             {},{},{},{},{},{},{},{},{},{},{}\n",
            report.mode,
            report.k,
            report.model,
            report.savings_pct,
            report.savings_linear_pct,
            report.savings_anchored_pct,
            report.base_read_power_uw,
            report.read_power_uw,
            report.write_power_mw,
            report.manager_overhead_uw,
            report.pattern.as_deref().unwrap_or("")
        ),
    };
    crate::report::emit(&text, output)
}
