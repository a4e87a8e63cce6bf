//! The dyadic tree over the unit root interval and piecewise-constant
//! functions on uniform dyadic grids.
//!
//! A [`DyadicInterval`] `(level, index)` denotes
//! `[index * 2^-level, (index + 1) * 2^-level)`.  Level 0 index 0 is the
//! root `[0, 1)`; negative levels are super-root ancestors `[0, 2^k)`
//! obtained by zero-padding headroom.  Two dyadic intervals are always
//! nested or disjoint, and that is decidable from `(level, index)`
//! arithmetic alone.
//!
//! A [`StepFunction`] stores `2^depth` cell values.  With `super_levels = J`
//! the domain is `[0, 2^J)` and the cells sit at absolute level
//! `depth - J`, so zero-padding a function preserves cell widths and
//! integrals exactly.  All sums run through pairwise (tree) summation,
//! which keeps integrals invariant under `refine` bit for bit.

use crate::error::{Error, Result};
use serde::de::Error as _;
use serde::ser::{Error as _, SerializeStruct};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Maximum total depth: index arithmetic stays exact in 64-bit and cell
/// widths stay exact in f64.
pub const MAX_DEPTH: u32 = 30;

/// Pairwise (tree) summation with single-element leaves.  On power-of-two
/// lengths the tree aligns with the dyadic tree, which makes integrals
/// exactly invariant under cell duplication (`refine`): duplicating leaves
/// scales every partial sum by exactly 2.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// How two dyadic intervals relate. Exactly one case holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalRelation {
    Equal,
    /// `self` strictly contains the other interval.
    Contains,
    /// `self` is strictly contained in the other interval.
    ContainedIn,
    Disjoint,
}

/// A node of the dyadic tree: `[index * 2^-level, (index + 1) * 2^-level)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicInterval {
    level: i32,
    index: u64,
}

impl DyadicInterval {
    /// Interval inside the root `[0, 1)`; requires `index < 2^level`.
    pub fn new(level: u32, index: u64) -> Result<Self> {
        if level > MAX_DEPTH || index >= 1u64 << level {
            return Err(Error::InvalidInterval {
                level: level as i64,
                index,
            });
        }
        Ok(DyadicInterval {
            level: level as i32,
            index,
        })
    }

    /// The root interval `[0, 1)`.
    pub fn root() -> Self {
        DyadicInterval { level: 0, index: 0 }
    }

    /// Interval from a possibly negative level. Negative levels denote the
    /// super-root ancestors `[0, 2^-level)` and require `index == 0`.
    pub fn from_raw(level: i32, index: u64) -> Result<Self> {
        if level >= 0 {
            return Self::new(level as u32, index);
        }
        if level < -(MAX_DEPTH as i32) || index != 0 {
            return Err(Error::InvalidInterval {
                level: level as i64,
                index,
            });
        }
        Ok(DyadicInterval { level, index })
    }

    pub fn level(&self) -> i32 {
        self.level
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// `|I| = 2^-level`. Exact in f64 for |level| <= 30.
    pub fn length(&self) -> f64 {
        (-self.level as f64).exp2()
    }

    pub fn start(&self) -> f64 {
        self.index as f64 * self.length()
    }

    pub fn end(&self) -> f64 {
        (self.index + 1) as f64 * self.length()
    }

    /// Dyadic parent: level - 1, index / 2.  Requires level >= 1.
    pub fn parent(&self) -> Result<Self> {
        self.parent_padded(0)
    }

    /// Dyadic parent with `super_levels` of zero-padding headroom above the
    /// root.
    pub fn parent_padded(&self, super_levels: u32) -> Result<Self> {
        self.ancestor_padded(1, super_levels)
    }

    /// Left and right halves. Only meaningful for root-relative intervals.
    pub fn children(&self) -> (Self, Self) {
        debug_assert!(self.level >= 0 && self.level < MAX_DEPTH as i32);
        let l = self.level + 1;
        (
            DyadicInterval {
                level: l,
                index: 2 * self.index,
            },
            DyadicInterval {
                level: l,
                index: 2 * self.index + 1,
            },
        )
    }

    /// `tau`-generation ancestor: level - tau, index >> tau.
    /// `ancestor(0)` is the identity.  Requires level >= tau.
    pub fn ancestor(&self, tau: u32) -> Result<Self> {
        self.ancestor_padded(tau, 0)
    }

    /// `tau`-generation ancestor allowed to climb `super_levels` above the
    /// root.  Ancestors above the root are the padded intervals `[0, 2^k)`.
    pub fn ancestor_padded(&self, tau: u32, super_levels: u32) -> Result<Self> {
        let target = self.level - tau as i32;
        if target < -(super_levels as i32) {
            return Err(Error::AncestorAboveRoot {
                level: self.level,
                tau,
                headroom: super_levels,
            });
        }
        let index = if tau >= 64 { 0 } else { self.index >> tau };
        Ok(DyadicInterval {
            level: target,
            index,
        })
    }

    /// Containment (non-strict): is `other` a subinterval of `self`?
    pub fn contains(&self, other: &Self) -> bool {
        if other.level < self.level {
            return false;
        }
        let shift = (other.level - self.level) as u32;
        let anc = if shift >= 64 { 0 } else { other.index >> shift };
        anc == self.index
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        !self.contains(other) && !other.contains(self)
    }

    /// Nestedness trichotomy: equal, strictly nested one way or the other,
    /// or disjoint.
    pub fn relation(&self, other: &Self) -> IntervalRelation {
        if self == other {
            IntervalRelation::Equal
        } else if self.contains(other) {
            IntervalRelation::Contains
        } else if other.contains(self) {
            IntervalRelation::ContainedIn
        } else {
            IntervalRelation::Disjoint
        }
    }
}

impl Serialize for DyadicInterval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.level, self.index).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DyadicInterval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (level, index) = <(i64, u64)>::deserialize(d)?;
        if !(0..=MAX_DEPTH as i64).contains(&level) {
            return Err(D::Error::custom(format!("interval level {level} out of range")));
        }
        DyadicInterval::new(level as u32, index)
            .map_err(|e| D::Error::custom(format!("invalid interval: {e}")))
    }
}

/// Grid parameters: cell depth plus zero-padding headroom for ancestor
/// computations.  `depth + super_root_levels <= 30` keeps all index
/// arithmetic exact in 64 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub depth: u32,
    pub super_root_levels: u32,
}

impl GridConfig {
    pub fn new(depth: u32, super_root_levels: u32) -> Result<Self> {
        if depth < 1 {
            return Err(Error::DepthTooSmall { depth, min: 1 });
        }
        if depth + super_root_levels > MAX_DEPTH {
            return Err(Error::DepthTooLarge {
                depth: depth + super_root_levels,
                max: MAX_DEPTH,
            });
        }
        Ok(GridConfig {
            depth,
            super_root_levels,
        })
    }
}

/// A function constant on the `2^depth` cells of a uniform dyadic grid.
///
/// With `super_levels = 0` (the usual case) the domain is the unit root
/// `[0, 1)` and cell `i` covers `[i * 2^-depth, (i+1) * 2^-depth)`.  The
/// padded form produced by [`StepFunction::zero_pad_embed`] lives on
/// `[0, 2^super_levels)` with unchanged cell widths.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    depth: u32,
    super_levels: u32,
    cells: Vec<f64>,
}

impl StepFunction {
    /// Function on the unit root with the given cell values.
    pub fn new(depth: u32, cells: Vec<f64>) -> Result<Self> {
        Self::with_super_levels(depth, 0, cells)
    }

    fn with_super_levels(depth: u32, super_levels: u32, cells: Vec<f64>) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::DepthTooLarge {
                depth,
                max: MAX_DEPTH,
            });
        }
        if super_levels > depth {
            return Err(Error::InvalidStepFunction(format!(
                "super_levels {super_levels} exceeds depth {depth}"
            )));
        }
        if cells.len() != 1usize << depth {
            return Err(Error::InvalidStepFunction(format!(
                "expected {} cells at depth {depth}, got {}",
                1usize << depth,
                cells.len()
            )));
        }
        if let Some(i) = cells.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidStepFunction(format!(
                "cell {i} is not finite ({})",
                cells[i]
            )));
        }
        Ok(StepFunction {
            depth,
            super_levels,
            cells,
        })
    }

    pub fn constant(depth: u32, value: f64) -> Self {
        Self::new(depth, vec![value; 1usize << depth]).expect("constant step function")
    }

    pub fn zeros(depth: u32) -> Self {
        Self::constant(depth, 0.0)
    }

    /// Indicator of a root-relative dyadic interval, realized at `depth`.
    pub fn indicator(interval: &DyadicInterval, depth: u32) -> Result<Self> {
        let mut f = Self::zeros(depth);
        let range = f.cell_range(interval)?;
        for v in &mut f.cells[range] {
            *v = 1.0;
        }
        Ok(f)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn super_levels(&self) -> u32 {
        self.super_levels
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Absolute level of the grid cells (`depth - super_levels`).
    pub fn cell_level(&self) -> i32 {
        self.depth as i32 - self.super_levels as i32
    }

    pub fn cell_width(&self) -> f64 {
        (-self.cell_level() as f64).exp2()
    }

    /// The whole domain as a dyadic interval (`[0, 2^super_levels)`).
    pub fn domain(&self) -> DyadicInterval {
        DyadicInterval::from_raw(-(self.super_levels as i32), 0).expect("domain interval")
    }

    /// Half-open range of cell indices covered by `interval`.
    pub fn cell_range(&self, interval: &DyadicInterval) -> Result<std::ops::Range<usize>> {
        if interval.level() > self.cell_level() {
            return Err(Error::IntervalTooFine {
                level: interval.level(),
                cell_level: self.cell_level(),
            });
        }
        if !self.domain().contains(interval) {
            return Err(Error::OutsideDomain {
                level: interval.level(),
                index: interval.index(),
            });
        }
        let shift = (self.cell_level() - interval.level()) as u32;
        let start = (interval.index() << shift) as usize;
        Ok(start..start + (1usize << shift))
    }

    /// Cell values covered by `interval`.
    pub fn cells_in(&self, interval: &DyadicInterval) -> Result<&[f64]> {
        Ok(&self.cells[self.cell_range(interval)?])
    }

    /// Exact integral over a dyadic interval of the grid.
    pub fn integral(&self, interval: &DyadicInterval) -> Result<f64> {
        Ok(pairwise_sum(self.cells_in(interval)?) * self.cell_width())
    }

    /// Mean value over a dyadic interval, computed exactly as the mean of
    /// the covered cells.
    pub fn average(&self, interval: &DyadicInterval) -> Result<f64> {
        let vals = self.cells_in(interval)?;
        Ok(pairwise_sum(vals) / vals.len() as f64)
    }

    pub fn total_integral(&self) -> f64 {
        pairwise_sum(&self.cells) * self.cell_width()
    }

    /// Average over an interval that may climb above the domain, with the
    /// function extended by zero there.  `(1/|I|) * integral(I ∩ domain)`.
    pub fn average_zero_extended(&self, interval: &DyadicInterval) -> Result<f64> {
        if interval.level() < -(self.super_levels as i32) {
            // interval strictly contains the domain
            Ok(self.total_integral() / interval.length())
        } else {
            Ok(self.integral(interval)? / interval.length())
        }
    }

    /// Exact integral over an arbitrary real range, clipped to the domain.
    /// Edge cells contribute fractionally.
    pub fn integral_over_range(&self, lo: f64, hi: f64) -> f64 {
        let w = self.cell_width();
        let lo = lo.max(0.0);
        let hi = hi.min(self.domain().length());
        if hi <= lo {
            return 0.0;
        }
        let i0 = (lo / w).floor() as usize;
        let i1 = (((hi / w).ceil()) as usize).min(self.cells.len());
        let mut parts = Vec::with_capacity(i1 - i0);
        for i in i0..i1 {
            let a = (i as f64 * w).max(lo);
            let b = ((i + 1) as f64 * w).min(hi);
            if b > a {
                parts.push(self.cells[i] * (b - a));
            }
        }
        pairwise_sum(&parts)
    }

    /// Replicate cells onto a finer grid. Integrals over every dyadic
    /// interval of the original grid are preserved exactly.
    pub fn refine(&self, new_depth: u32) -> Result<Self> {
        if new_depth < self.depth {
            return Err(Error::DepthTooSmall {
                depth: new_depth,
                min: self.depth,
            });
        }
        if new_depth > MAX_DEPTH {
            return Err(Error::DepthTooLarge {
                depth: new_depth,
                max: MAX_DEPTH,
            });
        }
        let rep = 1usize << (new_depth - self.depth);
        let mut cells = Vec::with_capacity(self.cells.len() * rep);
        for &v in &self.cells {
            cells.extend(std::iter::repeat(v).take(rep));
        }
        Self::with_super_levels(new_depth, self.super_levels, cells)
    }

    /// Embed into a domain `extra` levels larger, extending by zero.
    /// Cell widths and the total integral are preserved.
    pub fn zero_pad_embed(&self, extra: u32) -> Result<Self> {
        if extra == 0 {
            return Ok(self.clone());
        }
        let new_depth = self.depth + extra;
        if new_depth > MAX_DEPTH {
            return Err(Error::DepthTooLarge {
                depth: new_depth,
                max: MAX_DEPTH,
            });
        }
        let mut cells = self.cells.clone();
        cells.resize(1usize << new_depth, 0.0);
        Self::with_super_levels(new_depth, self.super_levels + extra, cells)
    }

    /// Restriction to the unit root `[0, 1)`, dropping the padding.
    pub fn restrict_to_unit(&self) -> Self {
        let d = self.depth - self.super_levels;
        let cells = self.cells[..1usize << d].to_vec();
        StepFunction {
            depth: d,
            super_levels: 0,
            cells,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        StepFunction {
            depth: self.depth,
            super_levels: self.super_levels,
            cells: self.cells.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Cellwise combination of two functions on the same grid.
    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.depth != other.depth || self.super_levels != other.super_levels {
            return Err(Error::DepthMismatch {
                expected: self.depth,
                got: other.depth,
            });
        }
        Ok(StepFunction {
            depth: self.depth,
            super_levels: self.super_levels,
            cells: self
                .cells
                .iter()
                .zip(&other.cells)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    /// `L^1` norm with respect to Lebesgue measure on the domain.
    pub fn norm_l1(&self) -> f64 {
        let parts: Vec<f64> = self.cells.iter().map(|v| v.abs()).collect();
        pairwise_sum(&parts) * self.cell_width()
    }

    /// `L^2` norm with respect to Lebesgue measure on the domain.
    pub fn norm_l2(&self) -> f64 {
        let parts: Vec<f64> = self.cells.iter().map(|v| v * v).collect();
        (pairwise_sum(&parts) * self.cell_width()).sqrt()
    }

    pub fn norm_lp(&self, p: f64) -> f64 {
        let parts: Vec<f64> = self.cells.iter().map(|v| v.abs().powf(p)).collect();
        (pairwise_sum(&parts) * self.cell_width()).powf(1.0 / p)
    }

    /// Validate for use as a weight: every cell strictly positive.
    pub fn validate_weight(&self) -> Result<()> {
        for (i, &v) in self.cells.iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::NonpositiveWeight { index: i, value: v });
            }
        }
        Ok(())
    }
}

// External wire format: {"depth": D, "cells": [...]}.  Only root functions
// are serializable; padded functions are internal scratch objects.
impl Serialize for StepFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.super_levels != 0 {
            return Err(S::Error::custom(
                "padded step functions have no external representation",
            ));
        }
        let mut st = s.serialize_struct("StepFunction", 2)?;
        st.serialize_field("depth", &self.depth)?;
        st.serialize_field("cells", &self.cells)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for StepFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            depth: u32,
            cells: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        StepFunction::new(raw.depth, raw.cells).map_err(|e| D::Error::custom(e.to_string()))
    }
}
