//! Built-in verification suite: one item per module invariant family,
//! sized to finish in well under a minute.

use dyadic_sharp::grid::pairwise_sum;
use dyadic_sharp::haar::{
    apply_shift, dyadic_hilbert_spec, haar_expand, haar_function, inner_product,
    random_admissible_spec, TruncationPolicy,
};
use dyadic_sharp::lerner::{decompose, shift_domination, verify_decomposition};
use dyadic_sharp::petermichl::petermichl_average;
use dyadic_sharp::rearrangement::{
    local_mean_oscillation, median_interval, rearrangement_at,
};
use dyadic_sharp::weighted::{
    ap_constant, dyadic_maximal, maximal_weighted_norm_lb, power_weight, weighted_dyadic_maximal,
    weighted_l2_norm, weighted_operator_norm, NormMethod,
};
use dyadic_sharp::{DyadicInterval, StepFunction};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SelftestItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestOutcome {
    pub items: Vec<SelftestItem>,
}

impl SelftestOutcome {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }
}

pub struct SelftestOptions {
    pub seed: u64,
    /// Deliberately break a decomposition before verification; the suite
    /// must then fail and name the violated property.
    pub inject_tamper: bool,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions {
            seed: 0,
            inject_tamper: false,
        }
    }
}

fn random_step(rng: &mut ChaCha8Rng, depth: u32) -> StepFunction {
    let n = 1usize << depth;
    let spiky = rng.random_bool(0.25);
    StepFunction::new(
        depth,
        (0..n)
            .map(|_| {
                let v: f64 = rng.random_range(-1.0..1.0);
                if spiky && rng.random_bool(0.2) {
                    v * rng.random_range(5.0..50.0)
                } else {
                    v
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
        (0..n).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect(),
    )
    .unwrap()
}

pub fn run_selftest(opts: &SelftestOptions) -> SelftestOutcome {
    let mut items = Vec::new();
    let mut run = |name: &str, body: &mut dyn FnMut() -> Result<(), String>| {
        let (passed, detail) = match body() {
            Ok(()) => (true, String::from("ok")),
            Err(d) => (false, d),
        };
        items.push(SelftestItem {
            name: name.to_string(),
            passed,
            detail,
        });
    };
    let seed = opts.seed;

    run("grid-invariants", &mut || {
        // nestedness trichotomy, parent containment, average splitting and
        // exact refine invariance
        let mut all = Vec::new();
        for level in 0..=5u32 {
            for index in 0..(1u64 << level) {
                all.push(DyadicInterval::new(level, index).unwrap());
            }
        }
        for a in &all {
            for b in &all {
                let nested = a.contains(b) || b.contains(a);
                if nested == a.is_disjoint(b) {
                    return Err(format!("trichotomy broken for {a:?}, {b:?}"));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10);
        for _ in 0..20 {
            let depth = rng.random_range(1..7u32);
            let f = random_step(&mut rng, depth);
            let g = f.refine(depth + 1).unwrap();
            for level in 0..depth {
                for index in 0..(1u64 << level) {
                    let i = DyadicInterval::new(level, index).unwrap();
                    if f.integral(&i).unwrap() != g.integral(&i).unwrap() {
                        return Err("refine changed an integral".into());
                    }
                    let (l, r) = i.children();
                    let split =
                        0.5 * (f.average(&l).unwrap() + f.average(&r).unwrap());
                    if (f.average(&i).unwrap() - split).abs() > 1e-12 {
                        return Err("average does not split over children".into());
                    }
                }
            }
        }
        Ok(())
    });

    run("haar-orthonormality", &mut || {
        let depth = 8u32;
        let mut basis = vec![StepFunction::constant(depth, 1.0)];
        for level in 0..depth {
            for index in 0..(1u64 << level) {
                basis.push(
                    haar_function(&DyadicInterval::new(level, index).unwrap(), depth).unwrap(),
                );
            }
        }
        for (i, f) in basis.iter().enumerate() {
            for (j, g) in basis.iter().enumerate() {
                let ip = inner_product(f, g).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                if (ip - want).abs() > 1e-10 {
                    return Err(format!("gram({i},{j}) = {ip}"));
                }
            }
        }
        Ok(())
    });

    run("parseval-and-reconstruction", &mut || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x01);
        for _ in 0..50 {
            let depth = rng.random_range(1..8u32);
            let f = random_step(&mut rng, depth);
            let e = haar_expand(&f).unwrap();
            let g = e.reconstruct(depth).unwrap();
            for (a, b) in f.cells().iter().zip(g.cells()) {
                if (a - b).abs() > 1e-12 {
                    return Err(format!("reconstruction off by {}", (a - b).abs()));
                }
            }
            let energy: f64 =
                e.coefficients.values().map(|c| c * c).sum::<f64>() + e.mean * e.mean;
            let l2 = f.norm_l2();
            if (energy - l2 * l2).abs() > 1e-12 * (1.0 + l2 * l2) {
                return Err(format!("energy {energy} vs {}", l2 * l2));
            }
        }
        Ok(())
    });

    run("shift-linearity-and-adjoint", &mut || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x02);
        for _ in 0..20 {
            let depth = rng.random_range(2..7u32);
            let tau = rng.random_range(0..2u32.min(depth - 1));
            let spec = random_admissible_spec(depth, tau, 0.4, &mut rng).unwrap();
            let policy = TruncationPolicy { depth };
            let f = random_step(&mut rng, depth);
            let g = random_step(&mut rng, depth);
            let comb = f.zip(&g, |a, b| 1.5 * a - 2.0 * b).unwrap();
            let lhs = apply_shift(&spec, &comb, &policy).unwrap();
            let hf = apply_shift(&spec, &f, &policy).unwrap();
            let hg = apply_shift(&spec, &g, &policy).unwrap();
            for i in 0..lhs.n_cells() {
                let rhs = 1.5 * hf.cells()[i] - 2.0 * hg.cells()[i];
                if (lhs.cells()[i] - rhs).abs() > 1e-12 {
                    return Err("linearity violated".into());
                }
            }
            let ha = apply_shift(&spec.adjoint(), &g, &policy).unwrap();
            let b1 = inner_product(&hf, &g).unwrap();
            let b2 = inner_product(&f, &ha).unwrap();
            if (b1 - b2).abs() > 1e-12 * (1.0 + b1.abs()) {
                return Err(format!("adjoint identity {b1} vs {b2}"));
            }
        }
        Ok(())
    });

    run("truncation-consistency", &mut || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
        for _ in 0..10 {
            let depth = rng.random_range(3..6u32);
            let tau = rng.random_range(0..2u32);
            let spec = random_admissible_spec(depth, tau, 0.5, &mut rng).unwrap();
            let f = random_step(&mut rng, depth);
            let g1 = apply_shift(&spec, &f, &TruncationPolicy { depth }).unwrap();
            let g2 = apply_shift(
                &spec,
                &f.refine(depth + 1).unwrap(),
                &TruncationPolicy { depth: depth + 1 },
            )
            .unwrap();
            let g1r = g1.refine(depth + 1).unwrap();
            if g1r.cells() != g2.cells() {
                return Err("depth-D terms changed under refinement".into());
            }
        }
        Ok(())
    });

    run("shift-domination", &mut || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x12);
        let depth = 6u32;
        let spec = dyadic_hilbert_spec(depth).unwrap();
        for _ in 0..5 {
            let f = random_step(&mut rng, depth);
            let bound = shift_domination(&f, &spec, &DyadicInterval::root())
                .map_err(|e| e.to_string())?;
            if !bound.empirical_constant.is_finite() {
                return Err("domination constant not finite".into());
            }
        }
        Ok(())
    });

    run("shift-constancy-outside-ancestor", &mut || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x03);
        for tau in 0..3u32 {
            for _ in 0..6 {
                let depth = 6u32;
                let spec = random_admissible_spec(depth, tau, 0.5, &mut rng).unwrap();
                let f = random_step(&mut rng, depth);
                for level in 0..=4u32 {
                    for index in 0..(1u64 << level) {
                        let q0 = DyadicInterval::new(level, index).unwrap();
                        let ancestor = q0.ancestor_padded(tau, 30).unwrap();
                        let masked = mask_outside(&f, &ancestor);
                        let g =
                            apply_shift(&spec, &masked, &TruncationPolicy { depth }).unwrap();
                        let vals = g.cells_in(&q0).unwrap();
                        let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                            - vals.iter().cloned().fold(f64::INFINITY, f64::min);
                        if spread > 1e-12 {
                            return Err(format!("tau {tau}: spread {spread}"));
                        }
                    }
                }
            }
        }
        Ok(())
    });

    run("rearrangement-inequalities", &mut || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x04);
        for _ in 0..50 {
            let depth = rng.random_range(1..6u32);
            let f = random_step(&mut rng, depth);
            for level in 0..=depth {
                for index in 0..(1u64 << level) {
                    let q = DyadicInterval::new(level, index).unwrap();
                    section2_checks(&f, &q)?;
                }
            }
        }
        Ok(())
    });

    run("decomposition-bound", &mut || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05);
        for case in 0..20 {
            let depth = 6u32;
            let f = if case == 0 {
                let mut cells = vec![0.0; 64];
                cells[0] = 16.0;
                StepFunction::new(depth, cells).unwrap()
            } else {
                random_step(&mut rng, depth)
            };
            let dec = decompose(&f, &DyadicInterval::root()).unwrap();
            let report = verify_decomposition(&f, &dec);
            if !report.passed() {
                let failure = report.first_failure().unwrap();
                return Err(format!(
                    "property '{}' violated: {}",
                    failure.name,
                    failure.detail.clone().unwrap_or_default()
                ));
            }
        }
        Ok(())
    });

    if opts.inject_tamper {
        // the staircase fixture chains two generations, so the tampered
        // copy must orphan a descendant and trip the verifier
        run("decomposition-tamper-fixture", &mut || {
            let depth = 6u32;
            let n = 1usize << depth;
            let cells: Vec<f64> = (0..n)
                .map(|i| {
                    if i == 0 {
                        4f64.powi(depth as i32)
                    } else {
                        4f64.powi(depth as i32 - (64 - (i as u64).leading_zeros()) as i32)
                    }
                })
                .collect();
            let f = StepFunction::new(depth, cells).unwrap();
            let dec = decompose(&f, &DyadicInterval::root()).unwrap();
            let bad = dec.tampered(0, 0);
            let report = verify_decomposition(&f, &bad);
            if report.passed() {
                return Err("tampered decomposition not detected".into());
            }
            let failure = report.first_failure().unwrap();
            Err(format!("property '{}' violated (injected)", failure.name))
        });
    }

    run("weighted-maximal-contraction", &mut || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x06);
        for _ in 0..100 {
            let depth = rng.random_range(1..7u32);
            let sigma = random_weight(&mut rng, depth);
            let f = random_step(&mut rng, depth);
            let m = weighted_dyadic_maximal(&f, &sigma).unwrap();
            let lhs = weighted_l2_norm(&m, &sigma);
            let rhs = weighted_l2_norm(&f, &sigma);
            if lhs > 2.0 * rhs + 1e-9 {
                return Err(format!("ratio {}", lhs / rhs));
            }
        }
        Ok(())
    });

    run("a2-constant-basics", &mut || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x07);
        let ones = StepFunction::constant(6, 1.0);
        let r = ap_constant(&ones, 2.0).map_err(|e| e.to_string())?;
        if (r.constant - 1.0).abs() > 1e-12 {
            return Err(format!("identity weight gave {}", r.constant));
        }
        for _ in 0..40 {
            let depth = rng.random_range(1..7u32);
            let w = random_weight(&mut rng, depth);
            let r = ap_constant(&w, 2.0).map_err(|e| e.to_string())?;
            if r.constant < 1.0 - 1e-12 {
                return Err(format!("A2 below one: {}", r.constant));
            }
            let avg_w = w.average(&r.witness).unwrap();
            let avg_s = w.map(|v| 1.0 / v).average(&r.witness).unwrap();
            if (avg_w * avg_s - r.constant).abs() > 1e-9 * r.constant {
                return Err("witness does not reproduce the constant".into());
            }
        }
        Ok(())
    });

    run("operator-norm-oracle", &mut || {
        let depth = 6u32;
        let spec = dyadic_hilbert_spec(depth).unwrap();
        let w = StepFunction::constant(depth, 1.0);
        let dense = weighted_operator_norm(&spec, &w, depth, NormMethod::Dense)
            .map_err(|e| e.to_string())?;
        let power = weighted_operator_norm(&spec, &w, depth, NormMethod::PowerIteration)
            .map_err(|e| e.to_string())?;
        for r in [&dense, &power] {
            if (r.value - std::f64::consts::SQRT_2).abs() > 1e-8 {
                return Err(format!("norm {}", r.value));
            }
        }
        if (dense.value - power.value).abs() > 1e-6 * dense.value {
            return Err("methods disagree".into());
        }
        Ok(())
    });

    run("maximal-lower-bound", &mut || {
        let w = power_weight(0.75, 8).map_err(|e| e.to_string())?;
        let lb = maximal_weighted_norm_lb(&w, 6, seed ^ 0x08).map_err(|e| e.to_string())?;
        if lb < 1.0 {
            return Err(format!("lower bound {lb} below one"));
        }
        let a2 = ap_constant(&w, 2.0).unwrap().constant;
        if lb / a2 > 10.0 {
            return Err(format!("lb/a2 = {}", lb / a2));
        }
        Ok(())
    });

    run("maximal-dominates-identity", &mut || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x09);
        for _ in 0..30 {
            let depth = rng.random_range(1..7u32);
            let f = random_step(&mut rng, depth);
            let m = dyadic_maximal(&f);
            for (v, mv) in f.cells().iter().zip(m.cells()) {
                if *mv < v.abs() - 1e-14 {
                    return Err("maximal below |f|".into());
                }
            }
        }
        Ok(())
    });

    run("grid-average-identity", &mut || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0A);
        let depth = 6u32;
        let f = random_step(&mut rng, depth);
        let direct = apply_shift(
            &dyadic_hilbert_spec(depth).unwrap(),
            &f,
            &TruncationPolicy { depth },
        )
        .unwrap();
        let averaged = petermichl_average(&f, 1, 1, seed).unwrap();
        for (a, b) in averaged.cells().iter().zip(direct.cells()) {
            if (a - b).abs() > 1e-12 {
                return Err("identity grid mismatch".into());
            }
        }
        Ok(())
    });

    run("csv-determinism", &mut || {
        let cfg = crate::sweep::SweepConfig {
            alphas: vec![0.0, 0.5],
            depth: 5,
            seed,
            lp_probe_p: None,
            timing: false,
            maximal_trials: 3,
        };
        let a = crate::sweep::to_csv(&crate::sweep::run_sweep(&cfg).map_err(|e| e.to_string())?);
        let b = crate::sweep::to_csv(&crate::sweep::run_sweep(&cfg).map_err(|e| e.to_string())?);
        if a != b {
            return Err("CSV bytes differ between runs".into());
        }
        Ok(())
    });

    SelftestOutcome { items }
}

/// Restrict `f` to the complement of `region`: zero inside it.  A region
/// reaching above the root covers the whole domain, leaving nothing.
fn mask_outside(f: &StepFunction, region: &DyadicInterval) -> StepFunction {
    if region.level() < 0 {
        return StepFunction::zeros(f.depth());
    }
    let range = f.cell_range(region).unwrap();
    let cells = f
        .cells()
        .iter()
        .enumerate()
        .map(|(i, &v)| if range.contains(&i) { 0.0 } else { v })
        .collect();
    StepFunction::new(f.depth(), cells).unwrap()
}

/// The rearrangement transfer and median inequalities on one cube.
fn section2_checks(f: &StepFunction, q: &DyadicInterval) -> Result<(), String> {
    let tol = 1e-12;
    let mi = median_interval(f, q).map_err(|e| e.to_string())?;
    let half = rearrangement_at(f, q, q.length() / 2.0).map_err(|e| e.to_string())?;
    for m in [mi.low, mi.high] {
        if m.abs() > half + tol {
            return Err(format!("median bound: |{m}| > {half}"));
        }
    }
    let vals = f.cells_in(q).map_err(|e| e.to_string())?;
    let m_cells = vals.len() as f64;
    for lambda in [0.125, 0.25, 0.5] {
        let omega = local_mean_oscillation(f, q, lambda).map_err(|e| e.to_string())?;
        for m in [mi.low, mi.high] {
            let shifted = f.map(|v| v - m);
            let r = rearrangement_at(&shifted, q, lambda * q.length()).map_err(|e| e.to_string())?;
            if omega > r + tol || r > 2.0 * omega + tol {
                return Err(format!("sandwich: omega {omega}, r {r}"));
            }
        }
        let r = rearrangement_at(f, q, lambda * q.length()).map_err(|e| e.to_string())?;
        for p in [1.0, 2.0] {
            // weak-type transfer against the normalized Lorentz quasinorm
            let mut abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
            abs.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let weak = abs
                .iter()
                .enumerate()
                .map(|(j, a)| a * ((j + 1) as f64 / m_cells).powf(1.0 / p))
                .fold(0.0f64, f64::max);
            if r > lambda.powf(-1.0 / p) * weak + tol {
                return Err(format!("weak transfer p={p}"));
            }
            let strong_parts: Vec<f64> = vals.iter().map(|v| v.abs().powf(p)).collect();
            let strong = (pairwise_sum(&strong_parts) * f.cell_width()
                / (lambda * q.length()))
            .powf(1.0 / p);
            if r > strong + tol {
                return Err(format!("strong transfer p={p}"));
            }
        }
    }
    Ok(())
}
