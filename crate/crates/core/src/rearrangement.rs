//! Nonincreasing rearrangements, medians, local mean oscillation, and the
//! dyadic local sharp maximal function.
//!
//! Rearrangement convention: `f*(s) = inf { t >= 0 : |{ |f| > t }| < s }`.
//! On a grid of `m` equal cells of width `w` this is the `(k+1)`-th largest
//! |cell value| with `k = ceil(s/w) - 1` cells discarded.  The strict
//! inequality in the distribution condition is what makes the median bound
//! `|m_f(Q)| <= (f chi_Q)*(|Q|/2)` and the two-sided sandwich
//! `omega_lambda <= ((f - m) chi_Q)*(lambda |Q|) <= 2 omega_lambda`
//! hold with exact comparisons for *every* admissible median; with the
//! right-continuous form both fail on boundary ties, which equal-measure
//! cells produce constantly.

use crate::error::{Error, Result};
use crate::grid::{DyadicInterval, StepFunction};

/// Quantile parameter for local mean oscillation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationParams {
    pub lambda: f64,
}

impl OscillationParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::BadQuantile {
                s: lambda,
                measure: 1.0,
            });
        }
        Ok(OscillationParams { lambda })
    }
}

/// Quantile used by the sharp maximal term of the pointwise domination
/// bound.
pub const LAMBDA_SHARP: f64 = 0.25;
/// Quantile used by the parent-oscillation sum (the 1-D value of the
/// dimensional constant `2^-(n+2)`).
pub const LAMBDA_OSC: f64 = 0.125;

/// Number of cells the rearrangement at level `s` may discard:
/// `ceil(s/w) - 1`.
fn discard_count(s: f64, cell_width: f64) -> usize {
    let q = s / cell_width;
    let k = q.ceil();
    debug_assert!(k >= 1.0);
    if k == q {
        (q as usize).saturating_sub(1)
    } else {
        (k as usize).saturating_sub(1)
    }
}

fn check_quantile(s: f64, measure: f64) -> Result<()> {
    if !(s > 0.0 && s <= measure) {
        return Err(Error::BadQuantile { s, measure });
    }
    Ok(())
}

/// `(f chi_Q)*(s)`: the nonincreasing rearrangement of `|f|` on `Q`
/// evaluated at `s in (0, |Q|]`.
pub fn rearrangement_at(f: &StepFunction, q: &DyadicInterval, s: f64) -> Result<f64> {
    let vals = f.cells_in(q)?;
    check_quantile(s, q.length())?;
    let k = discard_count(s, f.cell_width());
    if k >= vals.len() {
        return Ok(0.0);
    }
    let mut abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(abs[k])
}

/// The full admissible median interval of `f` on `Q`: every `m` with
/// `|{f > m}| <= |Q|/2` and `|{f < m}| <= |Q|/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianInterval {
    pub low: f64,
    pub high: f64,
}

pub fn median_interval(f: &StepFunction, q: &DyadicInterval) -> Result<MedianInterval> {
    let mut vals = f.cells_in(q)?.to_vec();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = vals.len();
    Ok(MedianInterval {
        low: vals[(m - 1) / 2],
        high: vals[m / 2],
    })
}

/// The lower median: the least admissible median value.
pub fn median(f: &StepFunction, q: &DyadicInterval) -> Result<f64> {
    Ok(median_interval(f, q)?.low)
}

/// Local mean oscillation `omega_lambda(f, Q) = inf_c ((f - c) chi_Q)*(lambda |Q|)`.
///
/// With `k` discardable cells the infimum over the continuum of centers `c`
/// reduces to a sliding window: sort the covered values, take the minimum
/// over windows of `m - k` consecutive values of half the window spread,
/// attained at the window midpoint.
pub fn local_mean_oscillation(f: &StepFunction, q: &DyadicInterval, lambda: f64) -> Result<f64> {
    OscillationParams::new(lambda)?;
    let mut vals = f.cells_in(q)?.to_vec();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = vals.len();
    let k = discard_count(lambda * q.length(), f.cell_width()).min(m - 1);
    let size = m - k;
    let mut best = f64::INFINITY;
    for j in 0..=k {
        let spread = vals[j + size - 1] - vals[j];
        if spread < best {
            best = spread;
        }
    }
    Ok(best / 2.0)
}

/// Dyadic local sharp maximal function relative to `q0`: at each grid cell
/// inside `q0`, the maximum of `omega_lambda(f, Q')` over the dyadic chain
/// from the cell up to `q0`.  Zero outside `q0`.
pub fn local_sharp_maximal_dyadic(
    f: &StepFunction,
    q0: &DyadicInterval,
    lambda: f64,
) -> Result<StepFunction> {
    OscillationParams::new(lambda)?;
    f.cell_range(q0)?;
    let mut out = vec![0.0; f.n_cells()];
    let cell_level = f.cell_level();

    fn descend(
        f: &StepFunction,
        interval: &DyadicInterval,
        lambda: f64,
        running: f64,
        cell_level: i32,
        out: &mut [f64],
    ) -> Result<()> {
        let osc = local_mean_oscillation(f, interval, lambda)?;
        let running = running.max(osc);
        if interval.level() == cell_level {
            let range = f.cell_range(interval)?;
            out[range.start] = running;
            return Ok(());
        }
        let (l, r) = interval.children();
        descend(f, &l, lambda, running, cell_level, out)?;
        descend(f, &r, lambda, running, cell_level, out)?;
        Ok(())
    }

    descend(f, q0, lambda, 0.0, cell_level, &mut out)?;
    StepFunction::new(f.depth(), out)
}
