//! Lower-bound probe for the weighted L^p operator norm, using the
//! extremal-style test function `w^{1-p'} chi_{[0, delta)}` with `delta`
//! the smallest dyadic scale `>= 2^{-depth+2}` (four grid cells).

use dyadic_sharp::haar::{apply_shift, dyadic_hilbert_spec, TruncationPolicy};
use dyadic_sharp::weighted::{ap_constant, power_weight, weighted_lp_norm};
use dyadic_sharp::{Error, Result, StepFunction};
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LpProbeReport {
    pub alpha: f64,
    pub p: f64,
    pub depth: u32,
    /// `||H f||_{L^p(w)} / ||f||_{L^p(w)}`: a lower bound on the operator
    /// norm.
    pub ratio: f64,
    /// `[w]_{A_p}` of the same weight, for side-by-side reporting.
    pub ap_constant: f64,
}

pub fn lp_lower_probe(alpha: f64, p: f64, depth: u32) -> Result<LpProbeReport> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::BadExponent(p));
    }
    if depth < 3 {
        return Err(Error::DepthTooSmall { depth, min: 3 });
    }
    let w = power_weight(alpha, depth)?;
    let ap = ap_constant(&w, p)?.constant;

    let dual = 1.0 - p / (p - 1.0); // 1 - p'
    let span = 4usize; // delta = 2^-(depth-2)
    let n = 1usize << depth;
    let cells: Vec<f64> = (0..n)
        .map(|i| if i < span { w.cells()[i].powf(dual) } else { 0.0 })
        .collect();
    let f = StepFunction::new(depth, cells)?;

    let spec = dyadic_hilbert_spec(depth)?;
    let g = apply_shift(&spec, &f, &TruncationPolicy { depth })?;
    let num = weighted_lp_norm(&g, &w, p);
    let den = weighted_lp_norm(&f, &w, p);
    if den == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(LpProbeReport {
        alpha,
        p,
        depth,
        ratio: num / den,
        ap_constant: ap,
    })
}
