//! `video`: run a viewer-aware truncation policy over a raw I420 clip and
//! report quality plus power savings.

use crate::{ConditionArg, Failure, PlanesArg, PolicyArg, ReportFormat};
use bittrunc::powermodel::SavingsModel;
use bittrunc::videopipe::{
    apply_policy, decide_content, decide_luminance, decide_roi, load_yuv, quality_report,
    save_yuv, ContentMapping, LuminanceCondition, MetricConfig, PlaneSelection, RoiSpec,
};
use std::path::Path;

pub struct Args<'a> {
    pub policy: PolicyArg,
    pub input: &'a Path,
    pub width: usize,
    pub height: usize,
    pub output: Option<&'a Path>,
    pub report_out: Option<&'a Path>,
    pub condition: ConditionArg,
    pub roi: Option<&'a Path>,
    pub variance_threshold: f64,
    pub content_map: Option<&'a str>,
    pub planes: PlanesArg,
    pub model: &'a SavingsModel,
    pub format: ReportFormat,
}

fn parse_content_map(text: &str) -> Result<ContentMapping, Failure> {
    let entries = text
        .split(',')
        .map(|pair| {
            let (pct, k) = pair
                .split_once(':')
                .ok_or_else(|| Failure::usage(format!("breakpoint `{pair}` is not `pct:k`")))?;
            Ok((
                pct.trim()
                    .parse::<f64>()
                    .map_err(|_| Failure::usage(format!("`{pct}` is not a percentage")))?,
                k.trim()
                    .parse::<u8>()
                    .map_err(|_| Failure::usage(format!("`{k}` is not a level")))?,
            ))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    ContentMapping::new(entries).map_err(|e| Failure::usage(e.to_string()))
}

pub fn run(args: Args<'_>) -> Result<(), Failure> {
    let clip = load_yuv(args.input, args.width, args.height)
        .map_err(|e| Failure::format(e.to_string()))?;

    let mut decision = match args.policy {
        PolicyArg::Luminance => {
            let condition = match args.condition {
                ConditionArg::Normal => LuminanceCondition::Normal,
                ConditionArg::Overcast => LuminanceCondition::Overcast,
                ConditionArg::Sunlight => LuminanceCondition::Sunlight,
            };
            decide_luminance(&clip, condition)
        }
        PolicyArg::Content => {
            let mapping = match args.content_map {
                Some(text) => parse_content_map(text)?,
                None => ContentMapping::default(),
            };
            decide_content(&clip, &mapping, args.variance_threshold)
        }
        PolicyArg::Roi => {
            let roi_path = args
                .roi
                .ok_or_else(|| Failure::usage("--policy roi needs --roi <sidecar-file>"))?;
            let roi = RoiSpec::load(roi_path).map_err(|e| Failure::format(e.to_string()))?;
            decide_roi(&clip, &roi)
        }
    };
    if args.planes == PlanesArg::Luma {
        decision.planes = PlaneSelection::LumaOnly;
    }

    let truncated = apply_policy(&clip, &decision).map_err(|e| Failure::format(e.to_string()))?;
    if let Some(path) = args.output {
        save_yuv(&truncated, path).map_err(|e| Failure::format(e.to_string()))?;
    }

    let report = quality_report(&clip, &truncated, &decision, args.model, &MetricConfig::default())
        .map_err(|e| Failure::format(e.to_string()))?;
    let text = match args.format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report.to_csv(),
    };
    crate::report::emit(&text, args.report_out)?;
    eprintln!(
        "policy {} over {} frames: mean PSNR {:.2} dB, mean SSIM {:.4}, savings {:.2}%",
        report.policy,
        report.frames.len(),
        report.mean_psnr_db,
        report.mean_ssim,
        report.power_savings_pct
    );
    Ok(())
}
