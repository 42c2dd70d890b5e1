//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`) and pinning its tolerance in code.

use bittrunc::bitcore::{
    apply_truncation_word, brute_force_best_fill, expected_mse_uniform, FloatBits,
    TruncationIndexSet, TruncationSpec,
};
use bittrunc::memsim::{CellState, MemoryArray, Script};
use bittrunc::powermodel::{
    savings_anchored, savings_linear, CalibrationTable, PowerParams, SavingsModel,
};
use bittrunc::tensortrunc::{
    error_stats, sweep, sweep_to_csv, truncate_tensor, TensorBuffer,
};
use bittrunc::videopipe::{
    apply_policy, decide_roi, psnr, FramePlanar420, KMap, MetricConfig, PlaneSelection,
    PolicyDecision, RoiSpec, VideoClip,
};
use bittrunc::TruncationMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

/// Criterion-1/2 case list: every contiguous LSB set of 1..=8 bits plus 200
/// seeded random fraction index sets with cardinality at most 6.
fn oracle_cases() -> Vec<TruncationIndexSet> {
    let mut cases: Vec<TruncationIndexSet> = (1..=8u32)
        .map(|n| TruncationIndexSet::contiguous(n).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let cardinality = rng.gen_range(1..=6);
        let mut indices = Vec::with_capacity(cardinality);
        while indices.len() < cardinality {
            let i = rng.gen_range(0..23u32);
            if !indices.contains(&i) {
                indices.push(i);
            }
        }
        cases.push(TruncationIndexSet::new(indices).unwrap());
    }
    cases
}

#[test]
fn criterion_1_dummy_fill_attains_global_minimum() {
    let start = Instant::now();
    let cases = oracle_cases();
    let context = FloatBits::from_f32(1.0);
    for t in &cases {
        let r = brute_force_best_fill(t, context).unwrap();
        assert!(
            r.dummy_is_minimizer(),
            "T = {:?}: dummy SSE {} > min {}",
            t.indices(),
            r.dummy_sse(),
            r.min_sse_lsb2
        );
        assert_eq!(r.dummy_sse(), r.min_sse_lsb2, "T = {:?}", t.indices());
    }
    assert!(start.elapsed().as_secs() < 60, "oracle run exceeded 60 s");
    println!(
        "[acceptance] criterion 1 PASS: dummy fill attains the exact global minimum SSE in all {} cases",
        cases.len()
    );
}

#[test]
fn criterion_2_dummy_ties_complement_exactly() {
    let context = FloatBits::from_f32(1.0);
    let cases = oracle_cases();
    for t in &cases {
        let r = brute_force_best_fill(t, context).unwrap();
        assert_eq!(
            r.dummy_sse(),
            r.complement_sse(),
            "T = {:?}: dummy and complement SSE differ",
            t.indices()
        );
    }
    println!(
        "[acceptance] criterion 2 PASS: dummy and complement fills tie exactly in all {} cases",
        cases.len()
    );
}

#[test]
fn criterion_3_timing_trace_reproduction() {
    let start = Instant::now();
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scripts/fig4.tmscript");
    let script = Script::parse(&std::fs::read_to_string(path).unwrap()).unwrap();
    let mut mem = MemoryArray::default();
    let trace = mem.run_script(&script).unwrap();
    let reads: Vec<Option<u32>> =
        trace.read_values().iter().map(|v| v.to_u32()).collect();
    let expected = [
        // Byte-mode phase.
        0x5555_5555u32,
        0x5656_5656,
        0x5454_5454,
        0x5858_5858,
        // Word-mode phase.
        0x5555_5555,
        0x5555_5556,
        0x5555_5554,
        0x5555_8000,
    ];
    assert_eq!(reads.len(), expected.len());
    for (i, (got, want)) in reads.iter().zip(expected).enumerate() {
        assert_eq!(*got, Some(want), "read #{i}");
    }
    assert!(start.elapsed().as_secs() < 1);
    println!("[acceptance] criterion 3 PASS: script trace reads match the dummy rule exactly");
}

#[test]
fn criterion_4_retention_rule() {
    let mut mem = MemoryArray::new(16);
    mem.write_word(2, 0xA5A5_A5A5).unwrap();
    mem.set_truncation(TruncationSpec::byte(4).unwrap());
    mem.set_truncation(TruncationSpec::byte(2).unwrap());

    // Without a rewrite, the re-powered positions (bits 3..2 per byte) read X.
    let v = mem.read_word(2).unwrap();
    for byte in 0..4 {
        let base = byte * 8;
        assert_eq!(v.bit(base + 3), CellState::Unknown, "byte {byte} bit 3");
        assert_eq!(v.bit(base + 2), CellState::Unknown, "byte {byte} bit 2");
        assert_eq!(v.bit(base + 1), CellState::One);
        assert_eq!(v.bit(base), CellState::Zero);
        for local in 4..8 {
            assert_ne!(v.bit(base + local), CellState::Unknown);
        }
    }

    // After a rewrite every read is fully defined.
    mem.write_word(2, 0xA5A5_A5A5).unwrap();
    let v = mem.read_word(2).unwrap();
    assert_eq!(
        v.to_u32(),
        Some(apply_truncation_word(0xA5A5_A5A5, TruncationSpec::byte(2).unwrap()))
    );
    println!("[acceptance] criterion 4 PASS: lowering truncation exposes X until rewritten");
}

#[test]
fn criterion_5_analytic_psnr_on_uniform_luma() {
    let start = Instant::now();
    let (w, h) = (256usize, 256usize);
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_507);
    let chroma = (w / 2) * (h / 2);
    let frame = FramePlanar420::new(
        w,
        h,
        (0..w * h).map(|_| rng.gen()).collect(),
        vec![128; chroma],
        vec![128; chroma],
    )
    .unwrap();
    let clip = VideoClip::new(vec![frame]).unwrap();
    let cfg = MetricConfig::default();

    // Measured MSE converges to (4^k + 2)/12 within 1% for k = 1..4; PSNR
    // lands on the analytic anchors at k = 3 and 4.
    for (k, expect_psnr) in [(1u8, None), (2, None), (3, Some(40.73f64)), (4, Some(34.81))] {
        let decision = PolicyDecision {
            policy: "uniform".into(),
            params: serde_json::json!({ "k": k }),
            width: w,
            height: h,
            planes: PlaneSelection::All,
            frames: vec![KMap::Uniform(k)],
        };
        let out = apply_policy(&clip, &decision).unwrap();
        let p = psnr(&clip.frames()[0], &out.frames()[0], &cfg).unwrap();
        let expect_mse = expected_mse_uniform(k as u32);
        let expect_mse = *expect_mse.numer() as f64 / *expect_mse.denom() as f64;
        assert!(
            (p.mse - expect_mse).abs() <= 0.01 * expect_mse,
            "k = {k}: measured MSE {} not within 1% of {expect_mse}",
            p.mse
        );
        if let Some(expect_psnr) = expect_psnr {
            assert!(
                (p.db - expect_psnr).abs() <= 0.10,
                "k = {k}: PSNR {} dB not within 0.10 of {expect_psnr}",
                p.db
            );
        }
    }
    assert!(start.elapsed().as_secs() < 5);
    println!(
        "[acceptance] criterion 5 PASS: uniform-luma PSNR 40.73/34.81 dB and MSE 5.5/21.5 within tolerance"
    );
}

#[test]
fn criterion_6_power_anchors_and_model_divergence() {
    let start = Instant::now();
    let table = CalibrationTable::default();
    let params = PowerParams::default();

    let anchors = [
        (TruncationMode::Byte, 3u32, 34.93f64, 1.0f64),
        (TruncationMode::Byte, 4, 47.02, 1.0),
        (TruncationMode::Word, 17, 51.69, 3.0),
        (TruncationMode::Word, 21, 66.08, 6.0),
    ];
    for (mode, k, pct, linear_bound_pp) in anchors {
        let spec = TruncationSpec::new(mode, k).unwrap();
        let anchored = savings_anchored(spec, &table);
        assert!(
            (anchored - pct).abs() <= 1e-9,
            "{mode} k={k}: anchored {anchored} != {pct}"
        );
        let linear = savings_linear(spec, &params);
        assert!(
            (linear - anchored).abs() <= linear_bound_pp,
            "{mode} k={k}: |linear {linear} - anchored {anchored}| > {linear_bound_pp} pp"
        );
    }
    assert!(start.elapsed().as_secs() < 1);
    println!(
        "[acceptance] criterion 6 PASS: anchors exact to 1e-9; linear model within documented divergence"
    );
}

#[test]
fn criterion_7_tensor_relative_error_bound() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1_000_003);
    let data: Vec<f32> = (0..1_000_000).map(|_| rng.sample(StandardNormal)).collect();
    let tensor = TensorBuffer::new(vec![1_000_000], data, None).unwrap();
    let model = SavingsModel::default();

    for n in [1u32, 8, 16, 17, 20, 23] {
        let truncated = truncate_tensor(&tensor, n).unwrap();
        let bound = (n as f64 - 24.0).exp2();
        let violations = tensor
            .data()
            .iter()
            .zip(truncated.data())
            .filter(|(&o, &t)| {
                o.is_finite() && o != 0.0 && ((t as f64 - o as f64) / o as f64).abs() > bound
            })
            .count();
        assert_eq!(violations, 0, "n = {n}: {violations} elements exceed 2^({n}-24)");
        let report = error_stats(
            &tensor,
            &truncated,
            n,
            &model,
            bittrunc::bitcore::NonFinitePolicy::Preserve,
        )
        .unwrap();
        assert!(report.max_rel_err <= bound, "n = {n}");
        if n == 17 {
            assert_eq!(bound, (-7.0f64).exp2());
        }
    }
    assert!(start.elapsed().as_secs() < 30, "tensor bound check exceeded 30 s");
    println!(
        "[acceptance] criterion 7 PASS: zero bound violations over 10^6 elements at n in {{1,8,16,17,20,23}}"
    );
}

#[test]
fn criterion_8_memsim_matches_bitcore() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut mem = MemoryArray::new(1);
    let mut specs = Vec::new();
    for k in 0..=8 {
        specs.push(TruncationSpec::byte(k).unwrap());
    }
    for k in 0..=32 {
        specs.push(TruncationSpec::word(k).unwrap());
    }
    let off = TruncationSpec::word(0).unwrap();
    for _ in 0..10_000 {
        let value: u32 = rng.gen();
        for &spec in &specs {
            mem.set_truncation(off);
            mem.write_word(0, value).unwrap();
            mem.set_truncation(spec);
            let got = mem.read_word(0).unwrap();
            let expect = apply_truncation_word(value, spec);
            assert_eq!(
                got.to_u32(),
                Some(expect),
                "value {value:#010x} under {spec:?}"
            );
        }
    }
    assert!(start.elapsed().as_secs() < 30, "equivalence sweep exceeded 30 s");
    println!(
        "[acceptance] criterion 8 PASS: simulated reads equal the word truncation rule for 10^4 words x 42 specs"
    );
}

/// Criterion 9 substitutes desk-unreproducible corpus statistics with the
/// property suites named by the release gate: ROI containment, policy
/// determinism, PSNR monotonicity, and a sweep CSV whose savings column
/// carries the criterion-6 anchors.
#[test]
fn criterion_9_substitute_property_suite() {
    // ROI containment + determinism on a seeded clip.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (w, h) = (96usize, 64usize);
    let chroma = (w / 2) * (h / 2);
    let frames: Vec<FramePlanar420> = (0..3)
        .map(|_| {
            FramePlanar420::new(
                w,
                h,
                (0..w * h).map(|_| rng.gen()).collect(),
                (0..chroma).map(|_| rng.gen()).collect(),
                (0..chroma).map(|_| rng.gen()).collect(),
            )
            .unwrap()
        })
        .collect();
    let clip = VideoClip::new(frames).unwrap();
    let roi = RoiSpec::parse("0 16 16 32 24\n1 0 0 48 64\n2 10 10 4 4\n").unwrap();
    let d1 = decide_roi(&clip, &roi);
    let d2 = decide_roi(&clip, &roi);
    assert_eq!(d1, d2, "policy decisions must be deterministic");
    let out1 = apply_policy(&clip, &d1).unwrap();
    let out2 = apply_policy(&clip, &d2).unwrap();
    assert_eq!(out1, out2, "policy application must be deterministic");
    for (idx, (orig, trunc)) in clip.frames().iter().zip(out1.frames()).enumerate() {
        for r in roi.rects_for(idx) {
            for y in r.y..(r.y + r.h).min(h) {
                for x in r.x..(r.x + r.w).min(w) {
                    assert_eq!(
                        orig.y()[y * w + x],
                        trunc.y()[y * w + x],
                        "frame {idx} ROI byte changed at ({x},{y})"
                    );
                }
            }
        }
    }

    // PSNR strictly decreases as uniform truncation deepens.
    let cfg = MetricConfig::default();
    let mut last = f64::INFINITY;
    for k in 1..=8u8 {
        let decision = PolicyDecision {
            policy: "uniform".into(),
            params: serde_json::json!({ "k": k }),
            width: w,
            height: h,
            planes: PlaneSelection::All,
            frames: vec![KMap::Uniform(k); clip.frame_count()],
        };
        let out = apply_policy(&clip, &decision).unwrap();
        let p = psnr(&clip.frames()[0], &out.frames()[0], &cfg).unwrap();
        assert!(p.db < last, "PSNR must strictly decrease in k (k = {k})");
        last = p.db;
    }

    // Sweep CSV savings column reproduces the word-mode anchors.
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let data: Vec<f32> = (0..4096).map(|_| rng.sample(StandardNormal)).collect();
    let tensor = TensorBuffer::new(vec![4096], data, None).unwrap();
    let rows = sweep(&tensor, &(0..=23).collect::<Vec<_>>(), &SavingsModel::default()).unwrap();
    let csv = sweep_to_csv(&rows);
    for (n, pct) in [(17usize, 51.69f64), (21, 66.08)] {
        let line = csv.lines().nth(n + 1).unwrap();
        let savings: f64 = line.split(',').next_back().unwrap().parse().unwrap();
        assert!((savings - pct).abs() <= 1e-9, "sweep row n={n}: {savings} != {pct}");
    }

    println!(
        "[acceptance] criterion 9 PASS: ROI containment, determinism, PSNR monotonicity, and anchored sweep column verified"
    );
}
