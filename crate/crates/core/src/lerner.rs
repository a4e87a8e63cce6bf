//! Median stopping-time decomposition of a step function over a dyadic
//! interval, its verification suite, and the domination bound for shift
//! operators.
//!
//! Construction, for a parent cube `P` with lower median `m`: let
//! `A = ((f - m) chi_P)*(|P|/4)` and `E = { x in P : |f - m| > A }`, so
//! `|E| < |P|/4`; the next-generation cubes inside `P` are the maximal
//! dyadic `Q ⊆ P` with `|Q ∩ E| > |Q|/2`.  Cells of `E` are themselves
//! dyadic, so the stopping cubes cover `E` exactly and
//! `Σ|Q| <= 2|E| < |P|/2`.  The quarter quantile is forced by the shape of
//! the verified bound: for any cube `Q` with dyadic parent `Q̂`,
//! `((f - m_Q) chi_Q)*(|Q|/4) <= 2 omega_{1/8}(f, Q̂)`, which is exactly
//! the coupling between the `1/4` sharp-maximal term and the `1/8`
//! parent-oscillation sum.

use crate::error::{Error, Result};
use crate::grid::{DyadicInterval, StepFunction, MAX_DEPTH};
use crate::haar::{apply_shift, HaarShiftSpec, TruncationPolicy};
use crate::rearrangement::{
    local_mean_oscillation, local_sharp_maximal_dyadic, median, median_interval, LAMBDA_OSC,
    LAMBDA_SHARP,
};
use crate::weighted::dyadic_maximal;
use serde::Serialize;

/// Quantile of the exceptional set in the stopping recipe.
pub const EXCEPTIONAL_QUANTILE: f64 = 0.25;
/// Constant on both terms of the verified pointwise bound.
pub const DOMINATION_CONSTANT: f64 = 4.0;
/// Comparison slack for the pointwise checks.
const POINTWISE_SLACK: f64 = 1e-12;

/// One stopping cube with the data the construction derives for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingCube {
    pub interval: DyadicInterval,
    /// Lower median of `f` on the cube.
    pub median: f64,
    /// `omega_{1/8}(f, parent)` for the cube's dyadic parent.
    pub parent_oscillation: f64,
}

/// Generations of pairwise disjoint stopping cubes over a root interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LernerDecomposition {
    root: DyadicInterval,
    generations: Vec<Vec<StoppingCube>>,
}

impl LernerDecomposition {
    pub fn root(&self) -> &DyadicInterval {
        &self.root
    }

    /// Generations indexed from k = 1; entry `k - 1` holds generation `k`.
    pub fn generations(&self) -> &[Vec<StoppingCube>] {
        &self.generations
    }

    pub fn total_cubes(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }

    /// Audit form: `{"root": [l, i], "generations": [[[l, i], ...], ...]}`.
    pub fn to_audit_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Audit<'a> {
            root: &'a DyadicInterval,
            generations: Vec<Vec<DyadicInterval>>,
        }
        serde_json::to_value(Audit {
            root: &self.root,
            generations: self
                .generations
                .iter()
                .map(|g| g.iter().map(|c| c.interval).collect())
                .collect(),
        })
        .expect("audit serialization")
    }

    /// Rebuild from the audit form, recomputing per-cube data from `f`.
    pub fn from_audit_json(f: &StepFunction, value: &serde_json::Value) -> Result<Self> {
        let root: DyadicInterval = serde_json::from_value(value["root"].clone())
            .map_err(|e| Error::InvalidStepFunction(e.to_string()))?;
        let raw: Vec<Vec<DyadicInterval>> =
            serde_json::from_value(value["generations"].clone())
                .map_err(|e| Error::InvalidStepFunction(e.to_string()))?;
        let mut generations = Vec::with_capacity(raw.len());
        for gen in raw {
            let mut cubes = Vec::with_capacity(gen.len());
            for interval in gen {
                cubes.push(StoppingCube {
                    interval,
                    median: median(f, &interval)?,
                    parent_oscillation: local_mean_oscillation(f, &interval.parent()?, LAMBDA_OSC)?,
                });
            }
            generations.push(cubes);
        }
        Ok(LernerDecomposition { root, generations })
    }

    /// Drop one cube from a generation. Test harness hook for verifying
    /// that the checks actually detect broken decompositions.
    pub fn tampered(&self, generation: usize, cube: usize) -> Self {
        let mut out = self.clone();
        if let Some(gen) = out.generations.get_mut(generation) {
            if cube < gen.len() {
                gen.remove(cube);
            }
        }
        out
    }
}

/// Build the stopping-time decomposition of `f` over `q0`.
pub fn decompose(f: &StepFunction, q0: &DyadicInterval) -> Result<LernerDecomposition> {
    f.cell_range(q0)?;
    let mut generations = Vec::new();
    let mut current = vec![*q0];
    while !current.is_empty() {
        let mut next = Vec::new();
        for parent in &current {
            stopping_cubes(f, parent, &mut next)?;
        }
        if next.is_empty() {
            break;
        }
        let mut cubes = Vec::with_capacity(next.len());
        for interval in &next {
            cubes.push(StoppingCube {
                interval: *interval,
                median: median(f, interval)?,
                parent_oscillation: local_mean_oscillation(f, &interval.parent()?, LAMBDA_OSC)?,
            });
        }
        generations.push(cubes);
        current = next;
    }
    Ok(LernerDecomposition {
        root: *q0,
        generations,
    })
}

/// Maximal dyadic `Q ⊆ parent` with `|Q ∩ E| > |Q|/2`, where `E` is the
/// exceptional set `{ |f - m| > ((f - m) chi_P)*(|P|/4) }`.
fn stopping_cubes(
    f: &StepFunction,
    parent: &DyadicInterval,
    out: &mut Vec<DyadicInterval>,
) -> Result<()> {
    let range = f.cell_range(parent)?;
    let vals = &f.cells()[range.clone()];
    let m_cells = vals.len();
    if m_cells == 1 {
        return Ok(()); // single cell: constant, empty exceptional set
    }
    let med = median_interval(f, parent)?.low;
    let shifted = vals.iter().map(|v| (v - med).abs()).collect::<Vec<_>>();
    let threshold = {
        // ((f - m) chi_P)*(|P|/4) under the strict convention:
        // discard ceil(m/4) - 1 cells
        let q = m_cells as f64 / 4.0;
        let k = if q.ceil() == q {
            q as usize - 1
        } else {
            q.ceil() as usize - 1
        };
        let mut sorted = shifted.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sorted[k]
    };
    // prefix counts of exceptional cells for O(1) density queries
    let mut prefix = vec![0usize; m_cells + 1];
    for (i, &d) in shifted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + usize::from(d > threshold);
    }
    if prefix[m_cells] == 0 {
        return Ok(());
    }

    // density > 1/2 never holds at the parent itself (|E| < |P|/4), so
    // recurse from the children
    let cell_level = f.cell_level();
    let base = range.start;
    let mut stack = {
        let (l, r) = parent.children();
        vec![l, r]
    };
    while let Some(q) = stack.pop() {
        let shift = (cell_level - q.level()) as u32;
        let start = (q.index() << shift) as usize - base;
        let size = 1usize << shift;
        let count = prefix[start + size] - prefix[start];
        if count == 0 {
            continue;
        }
        if 2 * count > size {
            out.push(q);
        } else if q.level() < cell_level {
            let (l, r) = q.children();
            stack.push(r);
            stack.push(l);
        }
    }
    Ok(())
}

/// `4 M^{#,d}_{lambda_sharp, root} f + 4 Σ omega_{lambda_osc}(f, parent(Q))
/// chi_Q` over the stopping cubes, as a step function on the grid of `f`.
pub fn oscillation_rhs(
    f: &StepFunction,
    dec: &LernerDecomposition,
    lambda_sharp: f64,
    lambda_osc: f64,
) -> Result<StepFunction> {
    let sharp = local_sharp_maximal_dyadic(f, &dec.root, lambda_sharp)?;
    let mut cells: Vec<f64> = sharp.cells().iter().map(|v| DOMINATION_CONSTANT * v).collect();
    for gen in &dec.generations {
        for cube in gen {
            let osc = local_mean_oscillation(f, &cube.interval.parent()?, lambda_osc)?;
            for i in f.cell_range(&cube.interval)? {
                cells[i] += DOMINATION_CONSTANT * osc;
            }
        }
    }
    StepFunction::new(f.depth(), cells)
}

/// Outcome of one verified property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    /// First counterexample, if any.
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<PropertyCheck>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Check every structural property of the decomposition and the pointwise
/// bound, exactly at the cell level.  Never fails; it reports.
pub fn verify_decomposition(f: &StepFunction, dec: &LernerDecomposition) -> VerificationReport {
    let mut checks = Vec::new();
    fn push(checks: &mut Vec<PropertyCheck>, name: &str, detail: Option<String>) {
        checks.push(PropertyCheck {
            name: name.to_string(),
            passed: detail.is_none(),
            detail,
        });
    }

    // structure: root and every cube on the grid of f, cubes inside root
    let root_range = match f.cell_range(&dec.root) {
        Ok(r) => r,
        Err(e) => {
            push(&mut checks, "structure", Some(format!("root: {e}")));
            return VerificationReport { checks };
        }
    };
    let mut structural = None;
    'outer: for (k, gen) in dec.generations.iter().enumerate() {
        for cube in gen {
            if !dec.root.contains(&cube.interval) || f.cell_range(&cube.interval).is_err() {
                structural = Some(format!(
                    "generation {} cube (level {}, index {}) outside the grid",
                    k + 1,
                    cube.interval.level(),
                    cube.interval.index()
                ));
                break 'outer;
            }
        }
    }
    let structure_ok = structural.is_none();
    push(&mut checks, "structure", structural);
    if !structure_ok {
        return VerificationReport { checks };
    }

    let n = f.n_cells();
    // cell masks per generation
    let masks: Vec<Vec<bool>> = dec
        .generations
        .iter()
        .map(|gen| {
            let mut mask = vec![false; n];
            for cube in gen {
                for i in f.cell_range(&cube.interval).unwrap() {
                    mask[i] = true;
                }
            }
            mask
        })
        .collect();

    // per-generation pairwise disjointness: marked cells == sum of sizes
    let mut disjoint = None;
    for (k, gen) in dec.generations.iter().enumerate() {
        let marked = masks[k].iter().filter(|&&b| b).count();
        let total: usize = gen
            .iter()
            .map(|c| f.cell_range(&c.interval).unwrap().len())
            .sum();
        if marked != total {
            disjoint = Some(format!("generation {} cubes overlap", k + 1));
            break;
        }
    }
    push(&mut checks, "generation-disjointness", disjoint);

    // nesting: Omega_{k+1} ⊆ Omega_k
    let mut nesting = None;
    for k in 1..masks.len() {
        if let Some(i) = (0..n).find(|&i| masks[k][i] && !masks[k - 1][i]) {
            nesting = Some(format!("cell {i} in generation {} but not {}", k + 1, k));
            break;
        }
    }
    push(&mut checks, "omega-nesting", nesting);

    // half-measure: |Omega_{k+1} ∩ Q_j^k| <= |Q_j^k| / 2
    let mut half = None;
    'half: for (k, gen) in dec.generations.iter().enumerate() {
        let Some(next_mask) = masks.get(k + 1) else {
            break;
        };
        for cube in gen {
            let range = f.cell_range(&cube.interval).unwrap();
            let size = range.len();
            let overlap = range.filter(|&i| next_mask[i]).count();
            if 2 * overlap > size {
                half = Some(format!(
                    "generation {} cube (level {}, index {}) more than half covered",
                    k + 1,
                    cube.interval.level(),
                    cube.interval.index()
                ));
                break 'half;
            }
        }
    }
    push(&mut checks, "half-measure", half);

    // E_j^k = Q_j^k \ Omega_{k+1}: pairwise disjoint, |E| >= |Q|/2
    let mut exceptional = None;
    let mut claimed = vec![false; n];
    'exc: for (k, gen) in dec.generations.iter().enumerate() {
        for cube in gen {
            let range = f.cell_range(&cube.interval).unwrap();
            let size = range.len();
            let mut e_cells = 0usize;
            for i in range {
                let in_next = masks.get(k + 1).map_or(false, |m| m[i]);
                if !in_next {
                    e_cells += 1;
                    if claimed[i] {
                        exceptional =
                            Some(format!("cell {i} claimed by two retained sets"));
                        break 'exc;
                    }
                    claimed[i] = true;
                }
            }
            if 2 * e_cells < size {
                exceptional = Some(format!(
                    "generation {} cube (level {}, index {}) retains less than half",
                    k + 1,
                    cube.interval.level(),
                    cube.interval.index()
                ));
                break 'exc;
            }
        }
    }
    push(&mut checks, "retained-sets", exceptional);

    // pointwise bound with constants (4, 4), lambdas (1/4, 1/8)
    let pointwise = match (
        median(f, &dec.root),
        oscillation_rhs(f, dec, LAMBDA_SHARP, LAMBDA_OSC),
    ) {
        (Ok(m0), Ok(rhs)) => {
            let mut fail = None;
            for i in root_range {
                let lhs = (f.cells()[i] - m0).abs();
                let bound = rhs.cells()[i];
                if lhs > bound + POINTWISE_SLACK * (1.0 + bound.abs()) {
                    fail = Some(format!(
                        "cell {i}: |f - median| = {lhs} exceeds bound {bound}"
                    ));
                    break;
                }
            }
            fail
        }
        (Err(e), _) | (_, Err(e)) => Some(format!("bound evaluation failed: {e}")),
    };
    push(&mut checks, "pointwise-domination", pointwise);

    VerificationReport { checks }
}

/// The two-part domination of a shift operator's oscillation around its
/// median: pointwise `|Hf - m_{Hf}(Q0)| <= C (Mf + F)` with `F` the sum of
/// ancestor averages over the stopping cubes of `Hf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DominationBound {
    /// Dyadic maximal function of `f` (the `Mf` part).
    pub maximal_part: StepFunction,
    /// `Σ (avg_{P_j^k} |f|) chi_{Q_j^k}` with `P_j^k` the `tau`-ancestor of
    /// the stopping cube's parent, averaged over the zero-padded domain.
    pub oscillation_part: StepFunction,
    /// Least `C` making the bound hold at every cell of `Q0`.
    pub empirical_constant: f64,
}

pub fn shift_domination(
    f: &StepFunction,
    spec: &HaarShiftSpec,
    q0: &DyadicInterval,
) -> Result<DominationBound> {
    let policy = TruncationPolicy { depth: f.depth() };
    let g = apply_shift(spec, f, &policy)?;
    let dec = decompose(&g, q0)?;
    let maximal = dyadic_maximal(f);
    let abs_f = f.abs();

    let mut osc_cells = vec![0.0; f.n_cells()];
    for gen in dec.generations() {
        for cube in gen {
            let ancestor = cube
                .interval
                .parent()?
                .ancestor_padded(spec.tau(), MAX_DEPTH - f.depth())?;
            let avg = abs_f.average_zero_extended(&ancestor)?;
            for i in f.cell_range(&cube.interval)? {
                osc_cells[i] += avg;
            }
        }
    }
    let oscillation_part = StepFunction::new(f.depth(), osc_cells)?;

    let m0 = median(&g, q0)?;
    let mut constant = 0.0f64;
    for i in f.cell_range(q0)? {
        let lhs = (g.cells()[i] - m0).abs();
        let den = maximal.cells()[i] + oscillation_part.cells()[i];
        if den == 0.0 {
            if lhs > 0.0 {
                return Err(Error::DegenerateDomination { cell: i });
            }
            continue;
        }
        constant = constant.max(lhs / den);
    }
    Ok(DominationBound {
        maximal_part: maximal,
        oscillation_part,
        empirical_constant: constant,
    })
}
