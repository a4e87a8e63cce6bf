//! Averages of the dyadic model operator over translated and dilated
//! grids.
//!
//! On a single grid `{ t (I + s) : I dyadic }` the operator
//! `f ↦ Σ_J <f, h_J> (h_{J_left} - h_{J_right})` is evaluated exactly:
//! step functions integrate in closed form over arbitrary real intervals,
//! and the output is projected back onto the depth-`D` cells of `[0, 1)`
//! by exact cell averages.  Included scales are `|J| in [t 2^{-(D-2)}, t]`,
//! which on the identity grid reproduces the truncated operator on the
//! root exactly.

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, StepFunction};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Closed-form Hilbert transform of the indicator of `[a, b]`:
/// `(1/pi) ln |(x - a) / (x - b)|`.
pub fn hilbert_transform_indicator(a: f64, b: f64, x: f64) -> f64 {
    ((x - a) / (x - b)).abs().ln() / std::f64::consts::PI
}

/// One translated/dilated grid placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPlacement {
    pub shift: f64,
    pub dilation: f64,
}

/// The model operator on a single placed grid, projected onto the cells
/// of `f`'s grid restricted to `[0, 1)`.
pub fn shifted_dilated_hilbert(f: &StepFunction, placement: GridPlacement) -> Result<StepFunction> {
    require_root(f)?;
    let depth = f.depth();
    let n = f.n_cells();
    let w = f.cell_width();
    let mut out = vec![0.0; n];
    accumulate_grid(f, placement, w, &mut out);
    let scale = 1.0 / w;
    StepFunction::new(depth, out.iter().map(|v| v * scale).collect())
}

/// Average of the model operator over `shifts` pseudo-random translations
/// and `dilations` log-uniform dilations; deterministic for a fixed seed.
/// With `shifts = dilations = 1` the placement is the identity grid.
pub fn petermichl_average(
    f: &StepFunction,
    shifts: u32,
    dilations: u32,
    seed: u64,
) -> Result<StepFunction> {
    require_root(f)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift_vals: Vec<f64> = if shifts <= 1 {
        vec![0.0]
    } else {
        (0..shifts).map(|_| rng.random_range(0.0..1.0)).collect()
    };
    let dilation_vals: Vec<f64> = if dilations <= 1 {
        vec![1.0]
    } else {
        (0..dilations)
            .map(|_| rng.random_range(0.0f64..1.0).exp2())
            .collect()
    };

    let depth = f.depth();
    let n = f.n_cells();
    let w = f.cell_width();
    let mut total = vec![0.0; n];
    for &s in &shift_vals {
        for &t in &dilation_vals {
            accumulate_grid(f, GridPlacement { shift: s, dilation: t }, w, &mut total);
        }
    }
    let scale = 1.0 / (w * (shift_vals.len() * dilation_vals.len()) as f64);
    StepFunction::new(depth, total.iter().map(|v| v * scale).collect())
}

fn require_root(f: &StepFunction) -> Result<()> {
    if f.super_levels() != 0 {
        return Err(Error::InvalidStepFunction(
            "grid averaging expects a function supported in the unit root".into(),
        ));
    }
    Ok(())
}

/// Add `∫_cell H^d_{s,t} f` for every cell of `[0, 1)` into `acc`.
fn accumulate_grid(f: &StepFunction, placement: GridPlacement, w: f64, acc: &mut [f64]) {
    let depth = f.depth();
    let s = placement.shift;
    let t = placement.dilation;
    let n = acc.len();
    // grid levels 0 ..= depth-2: |J| from t down to t 2^{-(D-2)}
    for level in 0..=depth.saturating_sub(2) {
        let step = (-(level as f64)).exp2();
        let len = t * step;
        // J = [t (k step + s), t ((k+1) step + s)) must meet [0, 1)
        let kmin = ((-s) / step).floor() as i64 - 1;
        let kmax = ((1.0 / t - s) / step).ceil() as i64 + 1;
        for k in kmin..=kmax {
            let j0 = t * (k as f64 * step + s);
            let j1 = j0 + len;
            if j1 <= 0.0 || j0 >= 1.0 {
                continue;
            }
            let mid = 0.5 * (j0 + j1);
            let amp = len.sqrt().recip();
            let coeff = amp * (f.integral_over_range(j0, mid) - f.integral_over_range(mid, j1));
            if coeff == 0.0 {
                continue;
            }
            // output term: coeff * (h_{J_left} - h_{J_right}), a four-step
            // profile of amplitude (len/2)^{-1/2} over the quarters of J
            let amp2 = (len / 2.0).sqrt().recip();
            let q = len / 4.0;
            for (seg, sign) in [
                (0.0, 1.0f64),
                (1.0, -1.0),
                (2.0, -1.0),
                (3.0, 1.0),
            ] {
                let a = (j0 + seg * q).max(0.0);
                let b = (j0 + (seg + 1.0) * q).min(1.0);
                if b <= a {
                    continue;
                }
                let i0 = (a / w).floor() as usize;
                let i1 = ((b / w).ceil() as usize).min(n);
                for i in i0..i1 {
                    let lo = (i as f64 * w).max(a);
                    let hi = ((i + 1) as f64 * w).min(b);
                    if hi > lo {
                        acc[i] += coeff * sign * amp2 * (hi - lo);
                    }
                }
            }
        }
    }
}

/// Numerical principal-value quadrature of the Hilbert transform of a step
/// function at `x`, used as an independent oracle for the closed form.
pub fn hilbert_quadrature(f: &StepFunction, x: f64, panels: u32) -> f64 {
    // composite Simpson per cell; a cell containing x is split with a
    // symmetric exclusion around the singularity, whose principal value
    // vanishes because f is constant there
    let eps = 1e-6;
    let mut total = Vec::new();
    let n = f.n_cells();
    let w = f.cell_width();
    for i in 0..n {
        let v = f.cells()[i];
        if v == 0.0 {
            continue;
        }
        let (a, b) = (i as f64 * w, (i + 1) as f64 * w);
        if x <= a || x >= b {
            total.push(v * simpson(|u| 1.0 / (x - u), a, b, panels));
        } else {
            let left = simpson(|u| 1.0 / (x - u), a, x - eps, panels);
            let right = simpson(|u| 1.0 / (x - u), x + eps, b, panels);
            total.push(v * (left + right));
        }
    }
    pairwise_sum(&total) / std::f64::consts::PI
}

fn simpson(g: impl Fn(f64) -> f64, a: f64, b: f64, panels: u32) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = (2 * panels) as usize;
    let h = (b - a) / n as f64;
    let mut acc = g(a) + g(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        acc += g(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}
