//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line with the measured quantity and its threshold.
//!
//! Run with `cargo test -p dyadic-sharp-cli --test acceptance` (add
//! `-- --nocapture` to see the per-criterion lines).

use std::sync::OnceLock;
use std::time::Instant;

use dyadic_sharp::grid::pairwise_sum;
use dyadic_sharp::haar::{
    apply_shift, dyadic_hilbert_spec, haar_function, random_admissible_spec, TruncationPolicy,
};
use dyadic_sharp::lerner::{decompose, shift_domination, verify_decomposition};
use dyadic_sharp::rearrangement::{
    local_mean_oscillation, median_interval, rearrangement_at,
};
use dyadic_sharp::weighted::{
    weighted_dyadic_maximal, weighted_l2_norm, weighted_operator_norm, NormMethod,
};
use dyadic_sharp::{DyadicInterval, StepFunction};
use dyadic_sharp_cli::compare::{hilbert_compare, CompareConfig, CompareReport};
use dyadic_sharp_cli::sweep::{run_sweep, SweepConfig, SweepResult, DEFAULT_ALPHAS};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;

fn random_step(rng: &mut ChaCha8Rng, depth: u32) -> StepFunction {
    let n = 1usize << depth;
    let style: u8 = rng.random_range(0..3);
    StepFunction::new(
        depth,
        (0..n)
            .map(|_| {
                let v: f64 = rng.random_range(-1.0..1.0);
                match style {
                    0 => v,
                    1 => v * rng.random_range(1.0..20.0),
                    _ => {
                        if rng.random_bool(0.2) {
                            v * rng.random_range(10.0..100.0)
                        } else {
                            v
                        }
                    }
                }
            })
            .collect(),
    )
    .unwrap()
}

fn random_weight(rng: &mut ChaCha8Rng, depth: u32) -> StepFunction {
    let n = 1usize << depth;
    StepFunction::new(
        depth,
        (0..n).map(|_| rng.random_range(-2.5f64..2.5).exp()).collect(),
    )
    .unwrap()
}

fn all_intervals(max_level: u32) -> Vec<DyadicInterval> {
    let mut out = Vec::new();
    for level in 0..=max_level {
        for index in 0..(1u64 << level) {
            out.push(DyadicInterval::new(level, index).unwrap());
        }
    }
    out
}

fn status(criterion: &str, passed: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} ({detail})",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_01_haar_orthonormality_depth_10() {
    let start = Instant::now();
    let depth = 10u32;
    let n = 1usize << depth;
    // columns: constant plus every Haar function
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for level in 0..depth {
        for index in 0..(1u64 << level) {
            columns.push(
                haar_function(&DyadicInterval::new(level, index).unwrap(), depth)
                    .unwrap()
                    .cells()
                    .to_vec(),
            );
        }
    }
    let k = columns.len();
    let w = (n as f64).recip();
    let mut worst = 0.0f64;
    for r in 0..k {
        for c in r..k {
            let parts: Vec<f64> = columns[r]
                .iter()
                .zip(&columns[c])
                .map(|(a, b)| a * b)
                .collect();
            let ip = pairwise_sum(&parts) * w;
            let want = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((ip - want).abs());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    status(
        "01 haar-orthonormality",
        worst <= 1e-10 && elapsed < 10.0,
        &format!("max |gram - id| = {worst:.3e} <= 1e-10, {elapsed:.1}s < 10s"),
    );
}

#[test]
fn criterion_02_unweighted_norm_oracle() {
    let mut detail = String::new();
    let mut ok = true;
    for depth in 4..=10u32 {
        let spec = dyadic_hilbert_spec(depth).unwrap();
        let w = StepFunction::constant(depth, 1.0);
        let dense = weighted_operator_norm(&spec, &w, depth, NormMethod::Dense)
            .unwrap()
            .value;
        let power = weighted_operator_norm(&spec, &w, depth, NormMethod::PowerIteration)
            .unwrap()
            .value;
        let target = std::f64::consts::SQRT_2;
        ok &= (dense - target).abs() <= 1e-8;
        ok &= (power - target).abs() <= 1e-8;
        ok &= (dense - power).abs() <= 1e-6 * dense;
        if depth == 10 {
            detail = format!(
                "depth 10: dense {dense:.12}, power {power:.12}, target {target:.12}"
            );
        }
    }
    status("02 unweighted-norm-oracle", ok, &detail);
}

#[test]
fn criterion_03_rearrangement_inequality_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);
    let mut checked = 0u64;
    for _ in 0..200 {
        let depth = rng.random_range(1..=6u32);
        let f = random_step(&mut rng, depth);
        for q in all_intervals(depth) {
            let vals = f.cells_in(&q).unwrap();
            let m_cells = vals.len() as f64;
            let mi = median_interval(&f, &q).unwrap();
            let half = rearrangement_at(&f, &q, q.length() / 2.0).unwrap();
            for m in [mi.low, mi.high] {
                assert!(
                    m.abs() <= half + TOL,
                    "median bound: |{m}| > {half} on {q:?}"
                );
            }
            let mut abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
            abs.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for lambda in [0.125, 0.25, 0.5] {
                let omega = local_mean_oscillation(&f, &q, lambda).unwrap();
                for m in [mi.low, mi.high] {
                    let shifted = f.map(|v| v - m);
                    let r = rearrangement_at(&shifted, &q, lambda * q.length()).unwrap();
                    assert!(omega <= r + TOL, "sandwich lower");
                    assert!(r <= 2.0 * omega + TOL, "sandwich upper");
                }
                let r = rearrangement_at(&f, &q, lambda * q.length()).unwrap();
                for p in [1.0f64, 2.0] {
                    let weak = abs
                        .iter()
                        .enumerate()
                        .map(|(j, a)| a * ((j + 1) as f64 / m_cells).powf(1.0 / p))
                        .fold(0.0f64, f64::max);
                    assert!(
                        r <= lambda.powf(-1.0 / p) * weak + TOL,
                        "weak-type transfer p = {p}"
                    );
                    let strong_parts: Vec<f64> =
                        vals.iter().map(|v| v.abs().powf(p)).collect();
                    let strong = (pairwise_sum(&strong_parts) * f.cell_width()
                        / (lambda * q.length()))
                    .powf(1.0 / p);
                    assert!(r <= strong + TOL, "strong-type transfer p = {p}");
                }
                checked += 1;
            }
        }
    }
    status(
        "03 rearrangement-inequalities",
        true,
        &format!("{checked} cube/lambda cases, zero violations"),
    );
}

#[test]
fn criterion_04_decomposition_end_to_end() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC4);
    let depth = 8u32;
    let mut cases = Vec::with_capacity(101);
    let mut spike = vec![0.0; 1 << depth];
    spike[0] = 16.0;
    cases.push(StepFunction::new(depth, spike).unwrap());
    for _ in 0..100 {
        cases.push(random_step(&mut rng, depth));
    }
    for (i, f) in cases.iter().enumerate() {
        let dec = decompose(f, &DyadicInterval::root()).unwrap();
        let report = verify_decomposition(f, &dec);
        assert!(
            report.passed(),
            "case {i}: {:?}",
            report.first_failure()
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    status(
        "04 decomposition-end-to-end",
        elapsed < 60.0,
        &format!("101 instances x 256 cells, zero violations, {elapsed:.1}s < 60s"),
    );
}

#[test]
fn criterion_05_shift_constancy_outside_ancestor() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC5);
    let depth = 8u32;
    let q0s = all_intervals(6);
    let mut worst = 0.0f64;
    for tau in 0..3u32 {
        for _ in 0..50 {
            let spec = random_admissible_spec(depth, tau, 0.3, &mut rng).unwrap();
            let f = random_step(&mut rng, depth);
            for q0 in &q0s {
                let ancestor = q0.ancestor_padded(tau, 30).unwrap();
                let masked = if ancestor.level() < 0 {
                    StepFunction::zeros(depth)
                } else {
                    let range = f.cell_range(&ancestor).unwrap();
                    StepFunction::new(
                        depth,
                        f.cells()
                            .iter()
                            .enumerate()
                            .map(|(i, &v)| if range.contains(&i) { 0.0 } else { v })
                            .collect(),
                    )
                    .unwrap()
                };
                let g = apply_shift(&spec, &masked, &TruncationPolicy { depth }).unwrap();
                let vals = g.cells_in(q0).unwrap();
                let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - vals.iter().cloned().fold(f64::INFINITY, f64::min);
                worst = worst.max(spread);
                assert!(
                    spread <= TOL,
                    "tau {tau}, q0 {q0:?}: spread {spread}"
                );
            }
        }
    }
    status(
        "05 shift-constancy",
        true,
        &format!("3 tau x 50 pairs x 127 cubes, max spread {worst:.3e} <= 1e-12"),
    );
}

/// Largest oscillation-to-ancestor-average ratio over a seeded suite.
fn oscillation_constant(tau: u32, depth: u32, pairs: u32, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let policy = TruncationPolicy { depth };
    let mut c_emp = 0.0f64;
    for _ in 0..pairs {
        let spec = random_admissible_spec(depth, tau, 0.3, &mut rng).unwrap();
        let f = random_step(&mut rng, depth);
        let abs_f = f.abs();
        let g = apply_shift(&spec, &f, &policy).unwrap();
        for q0 in all_intervals(depth.min(6)) {
            let omega = local_mean_oscillation(&g, &q0, 0.125).unwrap();
            let ancestor = q0.ancestor_padded(tau, 30).unwrap();
            let avg = abs_f.average_zero_extended(&ancestor).unwrap();
            if avg > 0.0 {
                c_emp = c_emp.max(omega / avg);
            } else {
                assert!(omega <= TOL, "oscillation without mass");
            }
        }
    }
    c_emp
}

#[test]
fn criterion_06_oscillation_bound_stability() {
    let mut detail = String::new();
    let mut ok = true;
    for tau in 0..3u32 {
        let shallow = oscillation_constant(tau, 6, 12, 0xACC6 + tau as u64);
        let deep = oscillation_constant(tau, 10, 12, 0xACC6 + tau as u64);
        let ratio = deep / shallow;
        ok &= shallow.is_finite() && deep.is_finite();
        ok &= ratio <= 2.0 && ratio >= 0.5;
        detail.push_str(&format!(
            "tau {tau}: C(6) = {shallow:.3}, C(10) = {deep:.3}, ratio {ratio:.2}; "
        ));
    }
    status("06 oscillation-bound-stability", ok, detail.trim_end());
}

/// Suite-level least domination constant at one depth.
fn domination_constant(depth: u32, functions: u32, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = dyadic_hilbert_spec(depth).unwrap();
    let mut c_emp = 0.0f64;
    for _ in 0..functions {
        let f = random_step(&mut rng, depth);
        let bound = shift_domination(&f, &spec, &DyadicInterval::root()).unwrap();
        c_emp = c_emp.max(bound.empirical_constant);
    }
    c_emp
}

#[test]
fn criterion_07_domination_stability() {
    let shallow = domination_constant(6, 50, 0xACC7);
    let deep = domination_constant(10, 50, 0xACC7);
    let ratio = deep / shallow;
    status(
        "07 domination-stability",
        shallow.is_finite() && deep.is_finite() && (0.5..=2.0).contains(&ratio),
        &format!("C(6) = {shallow:.3}, C(10) = {deep:.3}, ratio {ratio:.2} within x2, no degenerate rows"),
    );
}

#[test]
fn criterion_08_weighted_maximal_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC8);
    let depth = 8u32;
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let sigma = random_weight(&mut rng, depth);
        let f = random_step(&mut rng, depth);
        let m = weighted_dyadic_maximal(&f, &sigma).unwrap();
        let num = weighted_l2_norm(&m, &sigma);
        let den = weighted_l2_norm(&f, &sigma);
        if den > 0.0 {
            worst = worst.max(num / den);
        }
    }
    status(
        "08 weighted-maximal-contraction",
        worst <= 2.0 + 1e-9,
        &format!("max L2(sigma) ratio {worst:.6} <= 2 + 1e-9 over 500 pairs"),
    );
}

fn default_sweep() -> &'static (SweepResult, f64) {
    static SWEEP: OnceLock<(SweepResult, f64)> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let cfg = SweepConfig {
            alphas: DEFAULT_ALPHAS.to_vec(),
            depth: 12,
            seed: 0,
            ..SweepConfig::default()
        };
        let result = run_sweep(&cfg).expect("default sweep");
        (result, start.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_09_weighted_norm_sweep() {
    let (sweep, elapsed) = default_sweep();
    let mut ok = *elapsed < 300.0;
    let mut max_ratio = 0.0f64;
    for row in &sweep.rows {
        assert!(row.error.is_none(), "row {} failed: {:?}", row.alpha, row.error);
        max_ratio = max_ratio.max(row.ratio.unwrap());
    }
    ok &= max_ratio <= 8.0;
    let slope = sweep.log_slope.expect("slope over rows with a2 >= 2");
    ok &= (0.5..=1.05).contains(&slope);
    status(
        "09 weighted-norm-sweep",
        ok,
        &format!(
            "depth 12: max norm/a2 ratio {max_ratio:.3} <= 8, log-log slope {slope:.3} in [0.5, 1.05], {elapsed:.0}s < 300s"
        ),
    );
}

#[test]
fn criterion_10_buckley_consistency() {
    let (sweep, _) = default_sweep();
    let mut worst = 0.0f64;
    for row in &sweep.rows {
        let ratio = row.maximal_lb.unwrap() / row.a2_constant.unwrap();
        worst = worst.max(ratio);
    }
    status(
        "10 buckley-consistency",
        worst <= 10.0,
        &format!("max maximal_lb / a2 = {worst:.3} <= 10 across the sweep"),
    );
}

#[test]
fn criterion_11_grid_averaging() {
    let depth = 9u32;
    let intervals = [(0.0, 0.5), (0.25, 0.75), (0.125, 0.625)];
    let mut scales = Vec::new();
    let mut ok = true;
    let mut detail = String::new();
    for &(a, b) in &intervals {
        let coarse = hilbert_compare(&CompareConfig {
            a,
            b,
            shifts: 4,
            dilations: 1,
            depth,
            seed: 0xACCB,
        })
        .unwrap();
        let fine: CompareReport = hilbert_compare(&CompareConfig {
            a,
            b,
            shifts: 256,
            dilations: 8,
            depth,
            seed: 0xACCB,
        })
        .unwrap();
        ok &= fine.relative_l2_error < coarse.relative_l2_error;
        scales.push(fine.fitted_scale);
        detail.push_str(&format!(
            "[{a},{b}]: err {:.3} -> {:.3}, scale {:.4}; ",
            coarse.relative_l2_error, fine.relative_l2_error, fine.fitted_scale
        ));
    }
    let max = scales.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = (max - min).abs() / min.abs().min(max.abs());
    ok &= spread <= 0.05;
    detail.push_str(&format!("scale spread {:.2}% <= 5%", 100.0 * spread));
    status("11 grid-averaging", ok, &detail);
}

#[test]
fn criterion_12_csv_determinism_across_threads() {
    let exe = env!("CARGO_BIN_EXE_dyadic-sharp");
    let run = |threads: &str| -> String {
        let out = std::process::Command::new(exe)
            .args([
                "--seed",
                "7",
                "--depth",
                "7",
                "--format",
                "csv",
                "sweep",
                "--alphas",
                "0,0.5,0.75,0.875",
            ])
            .env("DYADIC_SHARP_THREADS", threads)
            .output()
            .expect("run sweep");
        assert!(out.status.success(), "sweep exited with {:?}", out.status);
        String::from_utf8(out.stdout).unwrap()
    };
    let single = run("1");
    let multi = run("4");
    let again = run("4");
    status(
        "12 csv-determinism",
        single == multi && multi == again,
        &format!(
            "{} bytes identical across thread counts 1 and 4",
            single.len()
        ),
    );
}
