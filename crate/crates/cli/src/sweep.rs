//! Power-weight sweep: A2 constant, weighted operator norm, maximal-operator
//! lower bound, and optional L^p probe per exponent, with a log-log slope
//! summary and a byte-stable CSV form.

use crate::probe::lp_lower_probe;
use dyadic_sharp::haar::dyadic_hilbert_spec;
use dyadic_sharp::weighted::{
    ap_constant, maximal_weighted_norm_lb, power_weight, weighted_operator_norm, NormMethod,
};
use dyadic_sharp::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

pub const DEFAULT_ALPHAS: [f64; 6] = [0.0, 0.5, 0.75, 0.875, 0.9375, 0.96875];
pub const DEFAULT_DEPTH: u32 = 12;
/// Depth cap for matrix-free sweeps.
pub const MAX_SWEEP_DEPTH: u32 = 14;
/// Rows enter the slope fit once the A2 constant reaches this value.
pub const SLOPE_A2_THRESHOLD: f64 = 2.0;

/// Environment variable capping the sweep worker count.
pub const THREADS_ENV: &str = "DYADIC_SHARP_THREADS";

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub depth: u32,
    pub seed: u64,
    /// Run the lower-bound probe at this exponent on every row.
    pub lp_probe_p: Option<f64>,
    /// Record wall-clock times.  Off by default so that output bytes are a
    /// pure function of (alphas, depth, seed).
    pub timing: bool,
    pub maximal_trials: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            alphas: DEFAULT_ALPHAS.to_vec(),
            depth: DEFAULT_DEPTH,
            seed: 0,
            lp_probe_p: None,
            timing: false,
            maximal_trials: 12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub depth: u32,
    pub a2_constant: Option<f64>,
    pub op_norm: Option<f64>,
    pub ratio: Option<f64>,
    pub maximal_lb: Option<f64>,
    pub lp_p: Option<f64>,
    pub lp_lower_ratio: Option<f64>,
    pub runtime_ms: Option<u64>,
    /// Module error name when the row failed; metric fields stay empty.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of log(op_norm) against log(a2_constant) over
    /// rows with a2_constant >= 2.
    pub log_slope: Option<f64>,
    /// How far the A2 constant still moves with depth: per exponent, the
    /// constant two levels shallower and the delta to the sweep depth.
    /// Reported for inspection; no threshold is attached.
    pub depth_convergence: Vec<DepthDelta>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DepthDelta {
    pub alpha: f64,
    pub a2_shallower: f64,
    pub a2_at_depth: f64,
    pub delta: f64,
}

fn derived_seed(seed: u64, row: usize) -> u64 {
    seed ^ (row as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Build a rayon pool honoring `DYADIC_SHARP_THREADS` and run the sweep in
/// it.  Row order in the output always matches input order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    for &alpha in &cfg.alphas {
        if !(alpha > -1.0 && alpha < 1.0) {
            return Err(Error::BadExponent(alpha));
        }
    }
    if cfg.depth < 2 {
        return Err(Error::DepthTooSmall {
            depth: cfg.depth,
            min: 2,
        });
    }
    if cfg.depth > MAX_SWEEP_DEPTH {
        return Err(Error::DepthTooLarge {
            depth: cfg.depth,
            max: MAX_SWEEP_DEPTH,
        });
    }
    if let Some(p) = cfg.lp_probe_p {
        if !(p > 1.0) {
            return Err(Error::BadExponent(p));
        }
    }

    let pool = thread_pool()?;
    let rows: Vec<SweepRow> = pool.install(|| {
        cfg.alphas
            .par_iter()
            .enumerate()
            .map(|(i, &alpha)| run_row(cfg, i, alpha))
            .collect()
    });

    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| match (r.a2_constant, r.op_norm) {
            (Some(a2), Some(norm)) if a2 >= SLOPE_A2_THRESHOLD => Some((a2.ln(), norm.ln())),
            _ => None,
        })
        .collect();
    let log_slope = least_squares_slope(&fit);

    let shallower = cfg.depth.saturating_sub(2).max(1);
    let mut depth_convergence = Vec::new();
    for row in &rows {
        let Some(a2) = row.a2_constant else { continue };
        if let Ok(w) = power_weight(row.alpha, shallower) {
            if let Ok(report) = ap_constant(&w, 2.0) {
                depth_convergence.push(DepthDelta {
                    alpha: row.alpha,
                    a2_shallower: report.constant,
                    a2_at_depth: a2,
                    delta: a2 - report.constant,
                });
            }
        }
    }

    Ok(SweepResult {
        rows,
        log_slope,
        depth_convergence,
    })
}

fn run_row(cfg: &SweepConfig, row_index: usize, alpha: f64) -> SweepRow {
    let start = Instant::now();
    let mut row = SweepRow {
        alpha,
        depth: cfg.depth,
        a2_constant: None,
        op_norm: None,
        ratio: None,
        maximal_lb: None,
        lp_p: cfg.lp_probe_p,
        lp_lower_ratio: None,
        runtime_ms: None,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let w = power_weight(alpha, cfg.depth)?;
        let a2 = ap_constant(&w, 2.0)?.constant;
        row.a2_constant = Some(a2);
        let spec = dyadic_hilbert_spec(cfg.depth)?;
        let norm = weighted_operator_norm(&spec, &w, cfg.depth, NormMethod::PowerIteration)?.value;
        row.op_norm = Some(norm);
        row.ratio = Some(norm / a2);
        row.maximal_lb = Some(maximal_weighted_norm_lb(
            &w,
            cfg.maximal_trials,
            derived_seed(cfg.seed, row_index),
        )?);
        if let Some(p) = cfg.lp_probe_p {
            row.lp_lower_ratio = Some(lp_lower_probe(alpha, p, cfg.depth)?.ratio);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        row.error = Some(e.name().to_string());
    }
    if cfg.timing {
        row.runtime_ms = Some(start.elapsed().as_millis() as u64);
    }
    row
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// CSV form with the fixed column set.  Empty optional fields serialize as
/// empty strings; floats use the shortest round-trip representation, so
/// for fixed inputs the bytes are identical run to run and thread count
/// never leaks into the output.
pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::from(
        "alpha,depth,a2_constant,op_norm,ratio,maximal_lb,lp_p,lp_lower_ratio,runtime_ms\n",
    );
    for r in &result.rows {
        let field = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.alpha,
            r.depth,
            field(r.a2_constant),
            field(r.op_norm),
            field(r.ratio),
            field(r.maximal_lb),
            field(r.lp_p),
            field(r.lp_lower_ratio),
            r.runtime_ms.map(|x| x.to_string()).unwrap_or_default(),
        ));
    }
    out
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::InvalidStepFunction(format!("bad {THREADS_ENV}: {v}")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidStepFunction(e.to_string()))
}
