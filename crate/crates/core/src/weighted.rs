//! Muckenhoupt constants on the dyadic grid, dyadic maximal operators, and
//! weighted operator norms.

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, DyadicInterval, StepFunction};
use crate::haar::{apply_shift, assemble_matrix, HaarShiftSpec, TruncationPolicy, MAX_DENSE_CELLS};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fixed seed for the power-iteration start vector; results must be
/// reproducible without threading a seed through every caller.
const POWER_ITERATION_SEED: u64 = 0x5EED_0F_D1AD1C;
/// Relative residual tolerance for power iteration.
const POWER_ITERATION_TOL: f64 = 1e-8;
/// Iteration cap for power iteration.
const POWER_ITERATION_CAP: u32 = 10_000;

/// The dyadic A_p constant of a weight, with the interval attaining the
/// supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub p: f64,
    pub constant: f64,
    pub witness: DyadicInterval,
    pub depth: u32,
}

/// `[w]_{A_p} = sup_Q (avg_Q w) (avg_Q w^{1-p'})^{p-1}` over every dyadic
/// interval of level `0..=depth`.  Computed bottom-up with aggregate sums
/// of `w` and `w^{1-p'}`.
pub fn ap_constant(w: &StepFunction, p: f64) -> Result<ApReport> {
    w.validate_weight()?;
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::BadExponent(p));
    }
    let dual_exp = -1.0 / (p - 1.0); // 1 - p' with p' = p/(p-1)
    let depth = w.depth();
    // aggregate sums of w and w^(1-p') per level, built bottom-up
    let dual_cells: Vec<f64> = w.cells().iter().map(|v| v.powf(dual_exp)).collect();
    let mut sums = vec![(w.cells().to_vec(), dual_cells)];
    for _ in 0..depth {
        let (sw, ss) = sums.last().unwrap();
        let up_w: Vec<f64> = (0..sw.len() / 2).map(|i| sw[2 * i] + sw[2 * i + 1]).collect();
        let up_s: Vec<f64> = (0..ss.len() / 2).map(|i| ss[2 * i] + ss[2 * i + 1]).collect();
        sums.push((up_w, up_s));
    }
    // scan coarse to fine so the coarsest witness wins ties
    let mut best = f64::NEG_INFINITY;
    let mut witness = DyadicInterval::root();
    for level in 0..=depth {
        let (sw, ss) = &sums[(depth - level) as usize];
        let cells_per = (1u64 << (depth - level)) as f64;
        for index in 0..sw.len() {
            let value = (sw[index] / cells_per) * (ss[index] / cells_per).powf(p - 1.0);
            if value > best {
                best = value;
                witness = DyadicInterval::new(level, index as u64)?;
            }
        }
    }
    Ok(ApReport {
        p,
        constant: best,
        witness,
        depth,
    })
}

/// Unweighted dyadic maximal function: at each cell, the maximum of the
/// averages of `|f|` over the dyadic chain through that cell.
pub fn dyadic_maximal(f: &StepFunction) -> StepFunction {
    weighted_chain_max(f, None)
}

/// `sigma`-weighted dyadic maximal function:
/// `sup_{Q ∋ x} (1/sigma(Q)) ∫_Q |f| sigma`.
pub fn weighted_dyadic_maximal(f: &StepFunction, sigma: &StepFunction) -> Result<StepFunction> {
    sigma.validate_weight()?;
    if sigma.depth() != f.depth() || sigma.super_levels() != f.super_levels() {
        return Err(Error::DepthMismatch {
            expected: f.depth(),
            got: sigma.depth(),
        });
    }
    Ok(weighted_chain_max(f, Some(sigma)))
}

fn weighted_chain_max(f: &StepFunction, sigma: Option<&StepFunction>) -> StepFunction {
    let depth = f.depth() as usize;
    let n = f.n_cells();
    let mut num: Vec<f64> = match sigma {
        Some(s) => f
            .cells()
            .iter()
            .zip(s.cells())
            .map(|(v, s)| v.abs() * s)
            .collect(),
        None => f.cells().iter().map(|v| v.abs()).collect(),
    };
    let mut den: Vec<f64> = match sigma {
        Some(s) => s.cells().to_vec(),
        None => vec![1.0; n],
    };
    let mut out = vec![0.0f64; n];
    for level in (0..=depth).rev() {
        let span = 1usize << (depth - level);
        for (node, chunk) in out.chunks_mut(span).enumerate() {
            let avg = num[node] / den[node];
            for v in chunk.iter_mut() {
                if avg > *v {
                    *v = avg;
                }
            }
        }
        if level > 0 {
            num = (0..num.len() / 2).map(|i| num[2 * i] + num[2 * i + 1]).collect();
            den = (0..den.len() / 2).map(|i| den[2 * i] + den[2 * i + 1]).collect();
        }
    }
    StepFunction::new(f.depth(), out).expect("maximal function cells")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormMethod {
    #[serde(rename = "dense-singular-value")]
    Dense,
    #[serde(rename = "power-iteration")]
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    pub method: NormMethod,
    pub iterations: u32,
    pub residual: f64,
    pub depth: u32,
}

/// Finite-depth operator norm on `L^2(w)`: the largest singular value of
/// `W^{1/2} H W^{-1/2}` with `W` the diagonal of cell weights.
pub fn weighted_operator_norm(
    spec: &HaarShiftSpec,
    w: &StepFunction,
    depth: u32,
    method: NormMethod,
) -> Result<NormReport> {
    w.validate_weight()?;
    if w.depth() != depth || w.super_levels() != 0 {
        return Err(Error::DepthMismatch {
            expected: depth,
            got: w.depth(),
        });
    }
    match method {
        NormMethod::Dense => {
            if (1usize << depth) > MAX_DENSE_CELLS {
                return Err(Error::DepthTooLarge { depth, max: 12 });
            }
            let h = assemble_matrix(spec, depth)?;
            let sqrt_w: Vec<f64> = w.cells().iter().map(|v| v.sqrt()).collect();
            let n = h.nrows();
            let mut b = h;
            for r in 0..n {
                for c in 0..n {
                    b[(r, c)] *= sqrt_w[r] / sqrt_w[c];
                }
            }
            let value = b
                .singular_values()
                .iter()
                .fold(0.0f64, |m, &s| m.max(s));
            Ok(NormReport {
                value,
                method,
                iterations: 0,
                residual: 0.0,
                depth,
            })
        }
        NormMethod::PowerIteration => {
            let adjoint = spec.adjoint();
            let policy = TruncationPolicy { depth };
            let sqrt_w: Vec<f64> = w.cells().iter().map(|v| v.sqrt()).collect();
            let n = 1usize << depth;
            let apply_b = |x: &[f64]| -> Result<Vec<f64>> {
                let scaled: Vec<f64> = x.iter().zip(&sqrt_w).map(|(v, s)| v / s).collect();
                let hf = apply_shift(spec, &StepFunction::new(depth, scaled)?, &policy)?;
                Ok(hf.cells().iter().zip(&sqrt_w).map(|(v, s)| v * s).collect())
            };
            let apply_bt = |x: &[f64]| -> Result<Vec<f64>> {
                let scaled: Vec<f64> = x.iter().zip(&sqrt_w).map(|(v, s)| v * s).collect();
                let hf = apply_shift(&adjoint, &StepFunction::new(depth, scaled)?, &policy)?;
                Ok(hf.cells().iter().zip(&sqrt_w).map(|(v, s)| v / s).collect())
            };
            let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize(&mut v);
            let mut residual = f64::INFINITY;
            for it in 1..=POWER_ITERATION_CAP {
                let bv = apply_b(&v)?;
                let lambda = pairwise_sum(&bv.iter().map(|x| x * x).collect::<Vec<_>>());
                let btbv = apply_bt(&bv)?;
                if lambda == 0.0 {
                    // operator annihilates the current vector and, with a
                    // random start, the whole space up to rounding
                    return Ok(NormReport {
                        value: 0.0,
                        method,
                        iterations: it,
                        residual: 0.0,
                        depth,
                    });
                }
                let res_vec: Vec<f64> = btbv
                    .iter()
                    .zip(&v)
                    .map(|(u, x)| u - lambda * x)
                    .collect();
                residual =
                    pairwise_sum(&res_vec.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt() / lambda;
                v = btbv;
                normalize(&mut v);
                if residual <= POWER_ITERATION_TOL {
                    return Ok(NormReport {
                        value: lambda.sqrt(),
                        method,
                        iterations: it,
                        residual,
                        depth,
                    });
                }
            }
            Err(Error::NoConvergence {
                iterations: POWER_ITERATION_CAP,
                residual,
            })
        }
    }
}

fn normalize(v: &mut [f64]) {
    let norm = pairwise_sum(&v.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Weighted `L^p` norm `(Σ |f_i|^p w_i 2^-D)^{1/p}`.
pub fn weighted_lp_norm(f: &StepFunction, w: &StepFunction, p: f64) -> f64 {
    let parts: Vec<f64> = f
        .cells()
        .iter()
        .zip(w.cells())
        .map(|(v, wi)| v.abs().powf(p) * wi)
        .collect();
    (pairwise_sum(&parts) * f.cell_width()).powf(1.0 / p)
}

pub fn weighted_l2_norm(f: &StepFunction, w: &StepFunction) -> f64 {
    let parts: Vec<f64> = f
        .cells()
        .iter()
        .zip(w.cells())
        .map(|(v, wi)| v * v * wi)
        .collect();
    (pairwise_sum(&parts) * f.cell_width()).sqrt()
}

/// Lower estimate of the `L^2(w)` norm of the dyadic maximal operator:
/// the best ratio over random nonnegative test functions followed by one
/// greedy coordinate-ascent pass.  Deterministic per seed.
pub fn maximal_weighted_norm_lb(w: &StepFunction, trials: u32, seed: u64) -> Result<f64> {
    w.validate_weight()?;
    if trials < 1 {
        return Err(Error::BadExponent(trials as f64));
    }
    let depth = w.depth();
    let n = w.n_cells();
    let ratio = |f: &StepFunction| -> f64 {
        let den = weighted_l2_norm(f, w);
        if den == 0.0 {
            return 0.0;
        }
        weighted_l2_norm(&dyadic_maximal(f), w) / den
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_f = StepFunction::constant(depth, 1.0);
    let mut best = ratio(&best_f); // M(1) = 1, so best >= 1 from the start
    for t in 0..trials {
        let f = match t % 3 {
            0 => StepFunction::new(
                depth,
                (0..n).map(|_| rng.random_range(-3.0f64..3.0).exp()).collect(),
            )?,
            1 => {
                // mass concentrated where the weight is small
                let k = rng.random_range(0..=depth);
                let span = 1usize << (depth - k);
                let mut cells = vec![1e-6; n];
                for i in 0..span {
                    cells[i] = 1.0 / w.cells()[i];
                }
                StepFunction::new(depth, cells)?
            }
            _ => StepFunction::new(depth, (0..n).map(|_| rng.random_range(0.0..1.0)).collect())?,
        };
        let r = ratio(&f);
        if r > best {
            best = r;
            best_f = f;
        }
    }
    // greedy coordinate ascent from the best candidate
    let mut cells = best_f.cells().to_vec();
    for i in 0..n {
        for factor in [0.25, 4.0] {
            let old = cells[i];
            cells[i] = old * factor;
            let cand = StepFunction::new(depth, cells.clone())?;
            let r = ratio(&cand);
            if r > best {
                best = r;
            } else {
                cells[i] = old;
            }
        }
    }
    Ok(best)
}

/// Discretization of `x^alpha` on `[0, 1)`: cell `i` receives the exact
/// average `(b^{alpha+1} - a^{alpha+1}) / ((alpha+1)(b-a))`.
pub fn power_weight(alpha: f64, depth: u32) -> Result<StepFunction> {
    if !(alpha > -1.0 && alpha < 1.0) || !alpha.is_finite() {
        return Err(Error::BadExponent(alpha));
    }
    if alpha == 0.0 {
        return Ok(StepFunction::constant(depth, 1.0));
    }
    let n = 1usize << depth;
    let h = (n as f64).recip();
    let cells = (0..n)
        .map(|i| {
            let a = i as f64 * h;
            let b = (i + 1) as f64 * h;
            (b.powf(alpha + 1.0) - a.powf(alpha + 1.0)) / ((alpha + 1.0) * (b - a))
        })
        .collect();
    StepFunction::new(depth, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::dyadic_hilbert_spec;

    #[test]
    fn ap_of_identity_weight() {
        let w = StepFunction::constant(6, 1.0);
        for p in [1.5, 2.0, 3.0] {
            let r = ap_constant(&w, p).unwrap();
            assert!((r.constant - 1.0).abs() <= 1e-12);
            assert_eq!(r.witness, DyadicInterval::root());
        }
    }

    #[test]
    fn ap_two_cell_example() {
        let w = StepFunction::new(1, vec![1.0, 4.0]).unwrap();
        let r = ap_constant(&w, 2.0).unwrap();
        assert!((r.constant - 1.5625).abs() <= 1e-12);
        assert_eq!(r.witness, DyadicInterval::root());
    }

    #[test]
    fn ap_invariant_under_refinement() {
        let w = StepFunction::new(2, vec![0.5, 2.0, 1.0, 3.0]).unwrap();
        let a = ap_constant(&w, 2.0).unwrap().constant;
        let b = ap_constant(&w.refine(4).unwrap(), 2.0).unwrap().constant;
        assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn ap_at_least_one_and_rejections() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let depth = rng.random_range(1..7u32);
            let w = StepFunction::new(
                depth,
                (0..1usize << depth)
                    .map(|_| rng.random_range(-2.0f64..2.0).exp())
                    .collect(),
            )
            .unwrap();
            let r = ap_constant(&w, 2.0).unwrap();
            assert!(r.constant >= 1.0 - 1e-12);
            // witness reproduces the reported value
            let avg_w = w.average(&r.witness).unwrap();
            let avg_s = w.map(|v| 1.0 / v).average(&r.witness).unwrap();
            assert!((avg_w * avg_s - r.constant).abs() <= 1e-9 * r.constant);
        }
        let bad = StepFunction::new(1, vec![1.0, -1.0]).unwrap();
        assert!(matches!(
            ap_constant(&bad, 2.0),
            Err(Error::NonpositiveWeight { .. })
        ));
        let w = StepFunction::constant(2, 1.0);
        assert!(matches!(ap_constant(&w, 1.0), Err(Error::BadExponent(_))));
    }

    #[test]
    fn ap_equals_one_only_for_constants() {
        let w = StepFunction::new(3, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.001]).unwrap();
        assert!(ap_constant(&w, 2.0).unwrap().constant > 1.0);
    }

    #[test]
    fn maximal_examples() {
        let f = StepFunction::new(2, vec![4.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(dyadic_maximal(&f).cells(), &[4.0, 2.0, 1.0, 1.0]);

        let c = StepFunction::constant(4, -3.0);
        assert!(dyadic_maximal(&c).cells().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn maximal_dominates_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let depth = rng.random_range(1..8u32);
            let f = StepFunction::new(
                depth,
                (0..1usize << depth)
                    .map(|_| rng.random_range(-5.0..5.0))
                    .collect(),
            )
            .unwrap();
            let m = dyadic_maximal(&f);
            for (v, mv) in f.cells().iter().zip(m.cells()) {
                assert!(*mv >= v.abs() - 1e-14);
            }
        }
    }

    #[test]
    fn weighted_maximal_examples() {
        let f = StepFunction::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let sigma = StepFunction::new(2, vec![3.0, 1.0, 1.0, 1.0]).unwrap();
        let m = weighted_dyadic_maximal(&f, &sigma).unwrap();
        assert_eq!(m.cells(), &[1.0, 0.75, 0.5, 0.5]);

        let ones = StepFunction::constant(2, 1.0);
        let mu = weighted_dyadic_maximal(&f, &ones).unwrap();
        assert_eq!(mu.cells(), dyadic_maximal(&f).cells());
    }

    #[test]
    fn weighted_maximal_l2_contraction_spot() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let depth = rng.random_range(1..7u32);
            let n = 1usize << depth;
            let sigma = StepFunction::new(
                depth,
                (0..n).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect(),
            )
            .unwrap();
            let f = StepFunction::new(depth, (0..n).map(|_| rng.random_range(-4.0..4.0)).collect())
                .unwrap();
            let m = weighted_dyadic_maximal(&f, &sigma).unwrap();
            let lhs = weighted_l2_norm(&m, &sigma);
            let rhs = weighted_l2_norm(&f, &sigma);
            assert!(lhs <= 2.0 * rhs + 1e-9, "ratio {}", lhs / rhs);
        }
    }

    #[test]
    fn unweighted_norm_is_sqrt_two() {
        for depth in 4..=8u32 {
            let spec = dyadic_hilbert_spec(depth).unwrap();
            let w = StepFunction::constant(depth, 1.0);
            let power =
                weighted_operator_norm(&spec, &w, depth, NormMethod::PowerIteration).unwrap();
            assert!((power.value - std::f64::consts::SQRT_2).abs() <= 1e-8);
            if depth <= 6 {
                let dense = weighted_operator_norm(&spec, &w, depth, NormMethod::Dense).unwrap();
                assert!((dense.value - std::f64::consts::SQRT_2).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn norm_scale_invariant_in_weight() {
        let depth = 6;
        let spec = dyadic_hilbert_spec(depth).unwrap();
        let w = power_weight(0.5, depth).unwrap();
        let a = weighted_operator_norm(&spec, &w, depth, NormMethod::PowerIteration).unwrap();
        let b =
            weighted_operator_norm(&spec, &w.scaled(7.25), depth, NormMethod::PowerIteration)
                .unwrap();
        assert!((a.value - b.value).abs() <= 1e-10 * a.value);
    }

    #[test]
    fn dense_and_power_agree_on_power_weight() {
        let depth = 8;
        let spec = dyadic_hilbert_spec(depth).unwrap();
        let w = power_weight(0.5, depth).unwrap();
        let dense = weighted_operator_norm(&spec, &w, depth, NormMethod::Dense).unwrap();
        let power = weighted_operator_norm(&spec, &w, depth, NormMethod::PowerIteration).unwrap();
        assert!(
            (dense.value - power.value).abs() <= 1e-6 * dense.value,
            "dense {} vs power {}",
            dense.value,
            power.value
        );
    }

    #[test]
    fn maximal_lb_at_least_one() {
        let w = power_weight(0.5, 6).unwrap();
        let lb = maximal_weighted_norm_lb(&w, 8, 2024).unwrap();
        assert!(lb >= 1.0);
        let ones = StepFunction::constant(8, 1.0);
        let lb1 = maximal_weighted_norm_lb(&ones, 8, 2024).unwrap();
        assert!(lb1 >= 1.0 && lb1 <= 10.0);
    }

    #[test]
    fn power_weight_values() {
        let w = power_weight(0.0, 5).unwrap();
        assert!(w.cells().iter().all(|&v| v == 1.0));

        let w = power_weight(0.5, 1).unwrap();
        let first = (0.5f64.powf(1.5)) / 1.5 / 0.5;
        assert!((w.cells()[0] - first).abs() <= 1e-15);
        assert!((w.cells()[0] - 0.4714045207910317).abs() <= 1e-12);

        assert!(power_weight(1.0, 3).is_err());
        assert!(power_weight(-1.0, 3).is_err());
    }

    #[test]
    fn power_weight_a2_grows_with_depth_and_alpha() {
        let mut last = 0.0;
        for alpha in [0.0, 0.5, 0.75, 0.875] {
            let a = ap_constant(&power_weight(alpha, 8).unwrap(), 2.0).unwrap().constant;
            assert!(a >= last);
            last = a;
        }
        for alpha in [0.5, 0.875] {
            let mut prev = 0.0;
            for depth in 2..=10u32 {
                let a = ap_constant(&power_weight(alpha, depth).unwrap(), 2.0)
                    .unwrap()
                    .constant;
                assert!(a + 1e-12 >= prev, "A2 must be nondecreasing in depth");
                prev = a;
            }
        }
    }
}
