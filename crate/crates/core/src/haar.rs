//! The canonical Haar basis and Haar shift operators of index `tau`.
//!
//! A shift operator is a finite coefficient assignment
//! `a(Q, Q', Q'')` over triples of dyadic intervals with
//! `Q', Q'' ⊆ Q` at most `tau` generations finer, acting by
//! `f ↦ Σ a(Q',Q'') <f, h_Q'> h_Q''`.  Coefficients obey the size bound
//! `|a| <= C sqrt(|Q'| |Q''|) / |Q|`.  In one dimension any function
//! satisfying the Haar conditions on an interval is a scalar multiple of
//! the canonical `h_I`, so the canonical basis loses no generality and the
//! scalar is absorbed into the coefficient.
//!
//! Truncation: an operator realized at depth `D` sums only cubes `Q` with
//! `level(Q) <= D - 1 - tau`, so every Haar function in the sum is exactly
//! resolved on the grid and all identities are machine-checkable.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, DyadicInterval, StepFunction, MAX_DEPTH};
use nalgebra::DMatrix;
use rand::prelude::*;
use serde::{Deserialize, Serialize};

/// Slack for admissibility comparisons; the bound itself is often attained
/// exactly (e.g. `|a| = 1` against `sqrt(2) * 2^{-1/2}`).
const ADMISSIBILITY_SLACK: f64 = 1e-12;

/// Largest dense-matrix side: `2^depth <= 4096`.
pub const MAX_DENSE_CELLS: usize = 4096;

/// One coefficient of a Haar shift operator: the cube `Q` the term is
/// attached to, the analysis interval `Q'`, the synthesis interval `Q''`
/// and the value `a(Q', Q'')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftEntry {
    #[serde(rename = "q")]
    pub cube: DyadicInterval,
    #[serde(rename = "qp")]
    pub source: DyadicInterval,
    #[serde(rename = "qpp")]
    pub target: DyadicInterval,
    #[serde(rename = "a")]
    pub coeff: f64,
}

/// A Haar shift operator of index `tau` with admissible sparse
/// coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HaarShiftSpec {
    tau: u32,
    bound_constant: f64,
    entries: Vec<ShiftEntry>,
}

impl HaarShiftSpec {
    pub fn new(tau: u32, bound_constant: f64, entries: Vec<ShiftEntry>) -> Result<Self> {
        let spec = HaarShiftSpec {
            tau,
            bound_constant,
            entries,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tau(&self) -> u32 {
        self.tau
    }

    pub fn bound_constant(&self) -> f64 {
        self.bound_constant
    }

    pub fn entries(&self) -> &[ShiftEntry] {
        &self.entries
    }

    /// Check the structural and size conditions on every entry.
    pub fn validate(&self) -> Result<()> {
        if !(self.bound_constant > 0.0) {
            return Err(Error::AdmissibilityViolation(format!(
                "bound constant {} must be positive",
                self.bound_constant
            )));
        }
        for e in &self.entries {
            for (name, sub) in [("qp", &e.source), ("qpp", &e.target)] {
                if !e.cube.contains(sub) {
                    return Err(Error::AdmissibilityViolation(format!(
                        "{name} (level {}, index {}) not contained in q (level {}, index {})",
                        sub.level(),
                        sub.index(),
                        e.cube.level(),
                        e.cube.index()
                    )));
                }
                if sub.level() - e.cube.level() > self.tau as i32 {
                    return Err(Error::AdmissibilityViolation(format!(
                        "{name} is {} generations below q, tau = {}",
                        sub.level() - e.cube.level(),
                        self.tau
                    )));
                }
            }
            let bound = self.bound_constant * (e.source.length() * e.target.length()).sqrt()
                / e.cube.length();
            if e.coeff.abs() > bound * (1.0 + ADMISSIBILITY_SLACK) {
                return Err(Error::AdmissibilityViolation(format!(
                    "|a| = {} exceeds bound {} on cube level {}",
                    e.coeff.abs(),
                    bound,
                    e.cube.level()
                )));
            }
        }
        Ok(())
    }

    /// Adjoint: swap analysis and synthesis intervals in every entry.
    /// An involution; same index and bound constant.
    pub fn adjoint(&self) -> HaarShiftSpec {
        HaarShiftSpec {
            tau: self.tau,
            bound_constant: self.bound_constant,
            entries: self
                .entries
                .iter()
                .map(|e| ShiftEntry {
                    cube: e.cube,
                    source: e.target,
                    target: e.source,
                    coeff: e.coeff,
                })
                .collect(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            tau: u32,
            bound_constant: f64,
            entries: Vec<ShiftEntry>,
        }
        let raw: Raw =
            serde_json::from_str(s).map_err(|e| Error::AdmissibilityViolation(e.to_string()))?;
        HaarShiftSpec::new(raw.tau, raw.bound_constant, raw.entries)
    }
}

/// Finite-depth truncation: the operator at depth `D` sums cubes `Q` with
/// `level(Q) <= D - 1 - tau`, the coarsest restriction under which every
/// `h_{Q'}`, `h_{Q''}` is constant on grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationPolicy {
    pub depth: u32,
}

impl TruncationPolicy {
    pub fn includes(&self, cube: &DyadicInterval, tau: u32) -> bool {
        cube.level() >= 0 && cube.level() + tau as i32 + 1 <= self.depth as i32
    }
}

/// `|I|^{-1/2} = 2^{level/2}` for a root-relative interval.
fn haar_amplitude(interval: &DyadicInterval) -> f64 {
    (interval.level() as f64 / 2.0).exp2()
}

/// The canonical Haar function `h_I = |I|^{-1/2} (chi_{I_left} - chi_{I_right})`
/// realized on the depth-`D` grid.  Mean zero, unit `L^2` norm.
pub fn haar_function(interval: &DyadicInterval, depth: u32) -> Result<StepFunction> {
    if interval.level() < 0 || interval.level() + 1 > depth as i32 {
        return Err(Error::IntervalTooFine {
            level: interval.level() + 1,
            cell_level: depth as i32,
        });
    }
    let amp = haar_amplitude(interval);
    let probe = StepFunction::zeros(depth);
    let (left, right) = interval.children();
    let mut cells = vec![0.0; probe.n_cells()];
    for v in &mut cells[probe.cell_range(&left)?] {
        *v = amp;
    }
    for v in &mut cells[probe.cell_range(&right)?] {
        *v = -amp;
    }
    StepFunction::new(depth, cells)
}

/// `<f, h_I>`, computed from exact integrals over the two halves.
pub fn haar_coefficient(f: &StepFunction, interval: &DyadicInterval) -> Result<f64> {
    let (left, right) = interval.children();
    Ok(haar_amplitude(interval) * (f.integral(&left)? - f.integral(&right)?))
}

/// Full Haar expansion of a root function: `<f, h_I>` for every `I` with
/// `level <= depth - 1`, plus the global mean.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarExpansion {
    pub mean: f64,
    pub coefficients: BTreeMap<DyadicInterval, f64>,
}

impl HaarExpansion {
    /// `mean + Σ <f, h_I> h_I`, exact on the original grid.
    pub fn reconstruct(&self, depth: u32) -> Result<StepFunction> {
        let mut out = StepFunction::constant(depth, self.mean);
        let mut cells = out.cells().to_vec();
        for (interval, &coeff) in &self.coefficients {
            let amp = haar_amplitude(interval);
            let (l, r) = interval.children();
            for i in out.cell_range(&l)? {
                cells[i] += coeff * amp;
            }
            for i in out.cell_range(&r)? {
                cells[i] -= coeff * amp;
            }
        }
        out = StepFunction::new(depth, cells)?;
        Ok(out)
    }
}

pub fn haar_expand(f: &StepFunction) -> Result<HaarExpansion> {
    if f.super_levels() != 0 {
        return Err(Error::InvalidStepFunction(
            "haar_expand expects a function on the unit root".into(),
        ));
    }
    let integrals = node_integrals(f);
    let mut coefficients = BTreeMap::new();
    for level in 0..f.depth() {
        let amp = (level as f64 / 2.0).exp2();
        for index in 0..(1u64 << level) {
            let i = DyadicInterval::new(level, index).unwrap();
            let li = integrals[(level + 1) as usize][(2 * index) as usize];
            let ri = integrals[(level + 1) as usize][(2 * index + 1) as usize];
            coefficients.insert(i, amp * (li - ri));
        }
    }
    Ok(HaarExpansion {
        mean: f.total_integral(),
        coefficients,
    })
}

/// Integrals of `f` over every node of the tree, level by level, built
/// bottom-up so each value is a pairwise sum of cell contributions.
fn node_integrals(f: &StepFunction) -> Vec<Vec<f64>> {
    let depth = f.depth() as usize;
    let w = f.cell_width();
    let mut levels = vec![Vec::new(); depth + 1];
    levels[depth] = f.cells().iter().map(|&v| v * w).collect();
    for level in (0..depth).rev() {
        let below = &levels[level + 1];
        levels[level] = (0..below.len() / 2)
            .map(|i| below[2 * i] + below[2 * i + 1])
            .collect();
    }
    levels
}

/// Apply the truncated shift operator to `f`.  Linear in `f`; exact on
/// the depth-`D` grid.
pub fn apply_shift(
    spec: &HaarShiftSpec,
    f: &StepFunction,
    policy: &TruncationPolicy,
) -> Result<StepFunction> {
    if f.super_levels() != 0 {
        return Err(Error::InvalidStepFunction(
            "apply_shift expects a function on the unit root".into(),
        ));
    }
    if policy.depth != f.depth() {
        return Err(Error::DepthMismatch {
            expected: f.depth(),
            got: policy.depth,
        });
    }
    spec.validate()?;
    let integrals = node_integrals(f);
    let mut out = vec![0.0; f.n_cells()];
    let depth = f.depth();
    for e in &spec.entries {
        if !policy.includes(&e.cube, spec.tau) {
            continue;
        }
        let src_amp = haar_amplitude(&e.source);
        let (sl, sr) = e.source.children();
        let coeff = src_amp
            * (integrals[sl.level() as usize][sl.index() as usize]
                - integrals[sr.level() as usize][sr.index() as usize]);
        let weight = e.coeff * coeff;
        if weight == 0.0 {
            continue;
        }
        let tgt_amp = haar_amplitude(&e.target);
        let (tl, tr) = e.target.children();
        let shift = depth as i32 - tl.level();
        debug_assert!(shift >= 0);
        let start_l = (tl.index() << shift) as usize;
        let start_r = (tr.index() << shift) as usize;
        let len = 1usize << shift;
        for v in &mut out[start_l..start_l + len] {
            *v += weight * tgt_amp;
        }
        for v in &mut out[start_r..start_r + len] {
            *v -= weight * tgt_amp;
        }
    }
    StepFunction::new(depth, out)
}

/// The standard dyadic model of the Hilbert transform:
/// `f ↦ Σ_I <f, h_I> (h_{I_left} - h_{I_right})`, a shift of index 1 with
/// coefficients ±1 and minimal admissible constant `sqrt(2)`.
pub fn dyadic_hilbert_spec(depth: u32) -> Result<HaarShiftSpec> {
    if depth < 2 {
        return Err(Error::DepthTooSmall { depth, min: 2 });
    }
    if depth > MAX_DEPTH {
        return Err(Error::DepthTooLarge {
            depth,
            max: MAX_DEPTH,
        });
    }
    let mut entries = Vec::new();
    for level in 0..=depth - 2 {
        for index in 0..(1u64 << level) {
            let cube = DyadicInterval::new(level, index)?;
            let (left, right) = cube.children();
            entries.push(ShiftEntry {
                cube,
                source: cube,
                target: left,
                coeff: 1.0,
            });
            entries.push(ShiftEntry {
                cube,
                source: cube,
                target: right,
                coeff: -1.0,
            });
        }
    }
    HaarShiftSpec::new(1, std::f64::consts::SQRT_2, entries)
}

/// Dense matrix of the truncated operator: column `j` is the image of the
/// unit-value indicator of cell `j`.
pub fn assemble_matrix(spec: &HaarShiftSpec, depth: u32) -> Result<DMatrix<f64>> {
    let n = 1usize
        .checked_shl(depth)
        .filter(|&n| n <= MAX_DENSE_CELLS)
        .ok_or(Error::DepthTooLarge { depth, max: 12 })?;
    spec.validate()?;
    let policy = TruncationPolicy { depth };
    let w = (-(depth as f64)).exp2();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for e in &spec.entries {
        if !policy.includes(&e.cube, spec.tau) {
            continue;
        }
        let src_amp = haar_amplitude(&e.source);
        let tgt_amp = haar_amplitude(&e.target);
        let (sl, sr) = e.source.children();
        let (tl, tr) = e.target.children();
        let span = |i: &DyadicInterval| -> std::ops::Range<usize> {
            let shift = (depth as i32 - i.level()) as u32;
            let start = (i.index() << shift) as usize;
            start..start + (1usize << shift)
        };
        for (rows, rsign) in [(span(&tl), 1.0), (span(&tr), -1.0)] {
            for (cols, csign) in [(span(&sl), 1.0), (span(&sr), -1.0)] {
                let v = e.coeff * tgt_amp * rsign * src_amp * csign * w;
                for r in rows.clone() {
                    for c in cols.clone() {
                        m[(r, c)] += v;
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Largest empirical weak (1,1) ratio `sup_t t |{|Hf| > t}| / ||f||_1`
/// over the given test functions.  The supremum over `t` is exact: it is
/// attained in the limit at the distinct values of `|Hf|`.
pub fn weak11_constant(spec: &HaarShiftSpec, fs: &[StepFunction]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for f in fs {
        let l1 = f.norm_l1();
        if l1 == 0.0 {
            return Err(Error::ZeroFunction);
        }
        let policy = TruncationPolicy { depth: f.depth() };
        let g = apply_shift(spec, f, &policy)?;
        let w = g.cell_width();
        let mut abs: Vec<f64> = g.cells().iter().map(|v| v.abs()).collect();
        abs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (j, &a) in abs.iter().enumerate() {
            best = best.max(a * (j + 1) as f64 * w / l1);
        }
    }
    Ok(best)
}

/// Random admissible shift spec: every cube of level `<= depth - 1 - tau`
/// contributes each admissible `(Q', Q'')` pair with probability
/// `density`, with the coefficient uniform in the admissible interval
/// (`bound_constant = 1`).
pub fn random_admissible_spec<R: Rng>(
    depth: u32,
    tau: u32,
    density: f64,
    rng: &mut R,
) -> Result<HaarShiftSpec> {
    if depth < tau + 1 {
        return Err(Error::DepthTooSmall {
            depth,
            min: tau + 1,
        });
    }
    let mut entries = Vec::new();
    for level in 0..=(depth - 1 - tau) {
        for index in 0..(1u64 << level) {
            let cube = DyadicInterval::new(level, index)?;
            let subs = descendants_within(&cube, tau, depth);
            for &source in &subs {
                for &target in &subs {
                    if !rng.random_bool(density) {
                        continue;
                    }
                    let bound =
                        (source.length() * target.length()).sqrt() / cube.length();
                    entries.push(ShiftEntry {
                        cube,
                        source,
                        target,
                        coeff: rng.random_range(-bound..=bound),
                    });
                }
            }
        }
    }
    HaarShiftSpec::new(tau, 1.0, entries)
}

/// All dyadic subintervals of `cube` at most `tau` generations finer whose
/// Haar functions resolve at `depth`.
fn descendants_within(cube: &DyadicInterval, tau: u32, depth: u32) -> Vec<DyadicInterval> {
    let mut out = vec![*cube];
    let mut frontier = vec![*cube];
    for _ in 0..tau {
        let mut next = Vec::new();
        for i in &frontier {
            if i.level() + 1 < depth as i32 {
                let (l, r) = i.children();
                next.push(l);
                next.push(r);
            }
        }
        out.extend(&next);
        frontier = next;
    }
    out
}

/// `L^2` inner product on the unit root.
pub fn inner_product(f: &StepFunction, g: &StepFunction) -> Result<f64> {
    let prod = f.zip(g, |a, b| a * b)?;
    Ok(pairwise_sum(prod.cells()) * prod.cell_width())
}
