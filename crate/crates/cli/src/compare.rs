//! Comparison of the grid-averaged model operator against the closed-form
//! Hilbert transform of an interval indicator.

use dyadic_sharp::grid::pairwise_sum;
use dyadic_sharp::petermichl::{hilbert_transform_indicator, petermichl_average};
use dyadic_sharp::{Error, Result, StepFunction};
use serde::Serialize;

#[derive(Debug, Clone, Copy)]
pub struct CompareConfig {
    pub a: f64,
    pub b: f64,
    pub shifts: u32,
    pub dilations: u32,
    pub depth: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompareReport {
    pub a: f64,
    pub b: f64,
    pub shifts: u32,
    pub dilations: u32,
    pub depth: u32,
    pub seed: u64,
    /// Least-squares scalar fitting the averaged output to the closed form.
    pub fitted_scale: f64,
    /// Relative L^2 distance of the scaled output from the closed form over
    /// the compared cells.
    pub relative_l2_error: f64,
    pub cells_compared: usize,
}

/// Apply the averaged operator to the (exactly discretized) indicator of
/// `[a, b]` and fit one scalar against `(1/pi) ln |(x-a)/(x-b)|` on cells
/// at distance at least `4 * 2^-depth` from the jump points.
pub fn hilbert_compare(cfg: &CompareConfig) -> Result<CompareReport> {
    if !(0.0 <= cfg.a && cfg.a < cfg.b && cfg.b <= 1.0) {
        return Err(Error::BadExponent(cfg.a));
    }
    if cfg.shifts < 1 || cfg.dilations < 1 {
        return Err(Error::BadExponent(0.0));
    }
    let n = 1usize << cfg.depth;
    let w = (n as f64).recip();
    // exact cell averages of the indicator, fractional on edge cells
    let cells: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i as f64 * w;
            let hi = lo + w;
            ((hi.min(cfg.b) - lo.max(cfg.a)).max(0.0)) / w
        })
        .collect();
    let f = StepFunction::new(cfg.depth, cells)?;
    let out = petermichl_average(&f, cfg.shifts, cfg.dilations, cfg.seed)?;

    let margin = 4.0 * w;
    let mut cross = Vec::new();
    let mut out2 = Vec::new();
    let mut tgt2 = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..n {
        let x = (i as f64 + 0.5) * w;
        if (x - cfg.a).abs() < margin || (x - cfg.b).abs() < margin {
            continue;
        }
        let o = out.cells()[i];
        let g = hilbert_transform_indicator(cfg.a, cfg.b, x);
        cross.push(o * g);
        out2.push(o * o);
        tgt2.push(g * g);
        pairs.push((o, g));
    }
    let den = pairwise_sum(&out2);
    if den == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let kappa = pairwise_sum(&cross) / den;
    let residuals: Vec<f64> = pairs.iter().map(|(o, g)| (kappa * o - g).powi(2)).collect();
    let err = (pairwise_sum(&residuals) / pairwise_sum(&tgt2)).sqrt();
    Ok(CompareReport {
        a: cfg.a,
        b: cfg.b,
        shifts: cfg.shifts,
        dilations: cfg.dilations,
        depth: cfg.depth,
        seed: cfg.seed,
        fitted_scale: kappa,
        relative_l2_error: err,
        cells_compared: pairs.len(),
    })
}
