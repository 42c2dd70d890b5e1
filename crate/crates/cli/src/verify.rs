//! `verify-prop1`: exhaustive confirmation that the dummy fill minimizes the
//! expected mean squared error, over all contiguous LSB sets of 1..=8 bits
//! plus seeded random fraction index sets.

use crate::{Failure, ReportFormat};
use bittrunc::bitcore::{
    brute_force_best_fill, FloatBits, TruncationIndexSet, ORACLE_CARDINALITY_CAP,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Serialize)]
struct CaseReport {
    kind: &'static str,
    indices: Vec<u32>,
    combinations: u64,
    dummy_fill: u32,
    dummy_sse: u128,
    min_sse: u128,
    dummy_is_minimizer: bool,
    /// All fills attaining the minimum; more than one entry marks a tie.
    argmin_fills: Vec<u32>,
    ties_with_complement: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    max_cardinality: usize,
    sample_count: usize,
    total_cases: usize,
    violations: usize,
    tie_count: usize,
    cases: Vec<CaseReport>,
}

fn check(t: &TruncationIndexSet, kind: &'static str) -> Result<CaseReport, Failure> {
    let r = brute_force_best_fill(t, FloatBits::from_f32(1.0))
        .map_err(|e| Failure::usage(e.to_string()))?;
    Ok(CaseReport {
        kind,
        indices: t.indices().to_vec(),
        combinations: r.stats.combinations,
        dummy_fill: r.dummy_fill,
        dummy_sse: r.dummy_sse(),
        min_sse: r.min_sse_lsb2,
        dummy_is_minimizer: r.dummy_is_minimizer(),
        argmin_fills: r.argmin_fills.clone(),
        ties_with_complement: r.dummy_sse() == r.complement_sse(),
    })
}

pub fn run(
    max_cardinality: usize,
    sample_count: usize,
    seed: u64,
    format: ReportFormat,
) -> Result<(), Failure> {
    if max_cardinality > ORACLE_CARDINALITY_CAP {
        return Err(Failure::usage(format!(
            "--max-cardinality {max_cardinality} exceeds the oracle cap {ORACLE_CARDINALITY_CAP}"
        )));
    }
    if max_cardinality == 0 {
        return Err(Failure::usage("--max-cardinality must be at least 1"));
    }

    let mut cases = Vec::new();
    for n in 1..=8u32 {
        let t = TruncationIndexSet::contiguous(n).expect("n <= 32");
        cases.push(check(&t, "contiguous")?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sample_count {
        let cardinality = rng.gen_range(1..=max_cardinality);
        let mut indices = Vec::with_capacity(cardinality);
        while indices.len() < cardinality {
            let i = rng.gen_range(0..23u32);
            if !indices.contains(&i) {
                indices.push(i);
            }
        }
        let t = TruncationIndexSet::new(indices).expect("distinct fraction indices");
        cases.push(check(&t, "sampled")?);
    }

    let violations = cases.iter().filter(|c| !c.dummy_is_minimizer).count();
    let tie_count = cases.iter().filter(|c| c.argmin_fills.len() > 1).count();
    let report = VerifyReport {
        seed,
        max_cardinality,
        sample_count,
        total_cases: cases.len(),
        violations,
        tie_count,
        cases,
    };

    match format {
        ReportFormat::Json => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        ReportFormat::Csv => {
            let mut out = String::from(
                "kind,indices,combinations,dummy_fill,dummy_sse,min_sse,dummy_is_minimizer,tie\n",
            );
            for c in &report.cases {
                let indices = c
                    .indices
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    c.kind,
                    indices,
                    c.combinations,
                    c.dummy_fill,
                    c.dummy_sse,
                    c.min_sse,
                    c.dummy_is_minimizer,
                    c.argmin_fills.len() > 1
                )
                .expect("string write");
            }
            print!("{out}");
        }
    }

    if violations > 0 {
        return Err(Failure::verification(format!(
            "{violations} of {} cases found a fill strictly better than the dummy value",
            report.total_cases
        )));
    }
    eprintln!(
        "verified {} cases ({} contiguous, {} sampled): dummy fill minimal in all, {} ties",
        report.total_cases, 8, sample_count, report.tie_count
    );
    Ok(())
}
