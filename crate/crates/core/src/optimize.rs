// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Scalar maximisation: uniform grid scan plus golden-section refinement.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of `f` on `[lo, hi]`, stopping when
/// the bracket is narrower than `rel_tol · |x|`. Returns `(x, f(x))`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= rel_tol * x1.abs().max(x2.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        // Ties go left so equal plateaus resolve toward smaller x.
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Uniform grid `x_k = k · max / points`, k = 1..=points.
pub fn uniform_grid(max: f64, points: usize) -> Vec<f64> {
    (1..=points).map(|k| max * k as f64 / points as f64).collect()
}

/// Scan `grid` and refine each local maximum whose value is within
/// `rel_slack` of the best grid value. The largest refined value wins;
/// near-ties (within 1e-9 relative) resolve to the smallest x.
///
/// Returns `None` when every grid value is NaN.
pub fn grid_then_golden<F: FnMut(f64) -> f64>(
    mut f: F,
    grid: &[f64],
    rel_tol: f64,
    rel_slack: f64,
) -> Option<(f64, f64)> {
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let best = values.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY && values.iter().all(|v| v.is_nan()) {
        return None;
    }
    let threshold = best - rel_slack * best.abs();
    let mut winner: Option<(f64, f64)> = None;
    for k in 0..grid.len() {
        let v = values[k];
        if v.is_nan() || v < threshold {
            continue;
        }
        let left_ok = k == 0 || !(values[k - 1] > v);
        let right_ok = k + 1 == grid.len() || !(values[k + 1] > v);
        if !(left_ok && right_ok) {
            continue;
        }
        let lo = if k == 0 { grid[0] * 1e-3 } else { grid[k - 1] };
        let hi = if k + 1 == grid.len() { grid[k] } else { grid[k + 1] };
        let (x, fx) = golden_section_max(&mut f, lo, hi, rel_tol);
        let (x, fx) = if fx >= v { (x, fx) } else { (grid[k], v) };
        winner = match winner {
            Some((wx, wf)) if wf >= fx - 1e-9 * fx.abs().max(1e-300) => Some((wx, wf)),
            _ => Some((x, fx)),
        };
    }
    winner
}
