// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Adaptive Dormand–Prince 5(4) integrator for complex matrix ODEs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    /// First trial step; `None` picks one from the initial derivative.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { atol: 1e-9, rtol: 1e-7, initial_step: None, max_steps: 1_000_000 }
    }
}

impl OdeOptions {
    pub fn with_tolerances(atol: f64, rtol: f64) -> Self {
        OdeOptions { atol, rtol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0 && self.rtol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "integrator tolerances must be positive (atol {}, rtol {})",
                self.atol, self.rtol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn add_scaled(y: &mut DMatrix<Complex64>, a: f64, k: &DMatrix<Complex64>) {
    for (y, k) in y.iter_mut().zip(k.iter()) {
        *y += k * a;
    }
}

fn error_norm(err: &DMatrix<Complex64>, y0: &DMatrix<Complex64>, y1: &DMatrix<Complex64>, opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for ((e, a), b) in err.iter().zip(y0.iter()).zip(y1.iter()) {
        let scale = opts.atol + opts.rtol * a.norm().max(b.norm());
        acc += (e.norm() / scale).powi(2);
    }
    (acc / err.len().max(1) as f64).sqrt()
}

/// Starting step from the size of y and of its first two derivatives.
fn initial_step<F>(f: &mut F, y: &DMatrix<Complex64>, k0: &DMatrix<Complex64>, t0: f64, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &DMatrix<Complex64>) -> DMatrix<Complex64>,
{
    let d0 = error_norm(y, y, y, opts);
    let d1 = error_norm(k0, y, y, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let mut y1 = y.clone();
    add_scaled(&mut y1, h0, k0);
    let k1 = f(t0 + h0, &y1);
    let d2 = error_norm(&(k1 - k0), y, y, opts) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

/// Integrates dy/dt = f(t, y) from `t0` to `t1` (t1 ≥ t0).
pub fn dopri5<F>(
    mut f: F,
    y0: &DMatrix<Complex64>,
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
) -> Result<(DMatrix<Complex64>, OdeStats)>
where
    F: FnMut(f64, &DMatrix<Complex64>) -> DMatrix<Complex64>,
{
    opts.validate()?;
    if !(t1 >= t0) {
        return Err(Error::InvalidParameter(format!("integration interval [{t0}, {t1}] is reversed")));
    }
    let mut stats = OdeStats::default();
    let mut y = y0.clone();
    if t1 == t0 {
        return Ok((y, stats));
    }
    let span = t1 - t0;
    let mut t = t0;
    let mut k0 = f(t, &y);
    stats.evaluations += 1;
    let mut h = match opts.initial_step {
        Some(h) => h,
        None => {
            let h = initial_step(&mut f, &y, &k0, t0, opts);
            stats.evaluations += 1;
            h.min(span)
        }
    };
    let mut stages: Vec<DMatrix<Complex64>> = Vec::with_capacity(7);

    while t < t1 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        if h <= 1e-14 * t.abs().max(span) {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        stages.clear();
        stages.push(k0.clone());
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, k) in stages.iter().enumerate() {
                let a = A[s][j];
                if a != 0.0 {
                    add_scaled(&mut ys, h * a, k);
                }
            }
            if s == 6 {
                // Row 6 of A is the fifth-order solution (FSAL).
                let k = f(t + C[s] * h, &ys);
                stats.evaluations += 1;
                stages.push(k);
                let mut err = DMatrix::zeros(y.nrows(), y.ncols());
                for (j, k) in stages.iter().enumerate() {
                    if E[j] != 0.0 {
                        add_scaled(&mut err, h * E[j], k);
                    }
                }
                let norm = error_norm(&err, &y, &ys, opts);
                let norm = if norm.is_nan() { f64::INFINITY } else { norm };
                if norm <= 1.0 {
                    stats.accepted += 1;
                    t = if last { t1 } else { t + h };
                    y = ys;
                    k0 = stages.pop().expect("seven stages");
                    let grow = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                    h *= grow;
                } else {
                    stats.rejected += 1;
                    h *= (0.9 * norm.powf(-0.2)).clamp(0.1, 1.0);
                }
                break;
            }
            let k = f(t + C[s] * h, &ys);
            stats.evaluations += 1;
            stages.push(k);
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(z: Complex64) -> DMatrix<Complex64> {
        DMatrix::from_element(1, 1, z)
    }

    #[test]
    fn exponential_growth_and_rotation() {
        let lambda = Complex64::new(-0.3, 2.0);
        let (y, stats) = dopri5(|_, y| y * lambda, &scalar(Complex64::new(1.0, 0.0)), 0.0, 5.0, &OdeOptions::with_tolerances(1e-12, 1e-10)).unwrap();
        let exact = (lambda * 5.0).exp();
        assert!((y[(0, 0)] - exact).norm() < 1e-9);
        assert!(stats.accepted > 10);
        assert!(stats.evaluations <= 6 * (stats.accepted + stats.rejected) + 2);
    }

    #[test]
    fn time_dependent_rhs() {
        // y' = cos t, y(0) = 0.
        let (y, _) = dopri5(|t, _| scalar(Complex64::new(t.cos(), 0.0)), &scalar(Complex64::new(0.0, 0.0)), 0.0, 3.0, &OdeOptions::default()).unwrap();
        assert!((y[(0, 0)].re - 3f64.sin()).abs() < 1e-7);
    }

    #[test]
    fn zero_interval_is_identity() {
        let y0 = scalar(Complex64::new(0.3, -0.1));
        let (y, stats) = dopri5(|_, y| y.clone(), &y0, 2.0, 2.0, &OdeOptions::default()).unwrap();
        assert_eq!(y, y0);
        assert_eq!(stats.evaluations, 0);
    }

    #[test]
    fn bad_options_and_blow_up() {
        let y0 = scalar(Complex64::new(1.0, 0.0));
        assert!(dopri5(|_, y| y.clone(), &y0, 0.0, 1.0, &OdeOptions::with_tolerances(0.0, 1e-6)).is_err());
        assert!(dopri5(|_, y| y.clone(), &y0, 1.0, 0.0, &OdeOptions::default()).is_err());
        // y' = y², y(0) = 1 blows up at t = 1.
        let r = dopri5(|_, y| y.component_mul(y), &y0, 0.0, 2.0, &OdeOptions::default());
        assert!(matches!(r, Err(Error::StepSizeUnderflow { .. })));
    }
}
