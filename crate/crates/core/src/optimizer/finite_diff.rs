//! Central finite differences used as the reference for every analytic
//! derivative.

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, RMat};

pub const MIN_STEP: f64 = 1e-7;
pub const MAX_STEP: f64 = 1e-4;

fn check_step(step: f64) -> Result<()> {
    if !(MIN_STEP..=MAX_STEP).contains(&step) {
        return Err(Error::Validation(format!(
            "finite-difference step {step} outside [{MIN_STEP}, {MAX_STEP}]"
        )));
    }
    Ok(())
}

fn eval<F: Fn(&CMat) -> f64>(f: &F, x: &CMat) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Oracle(format!("objective returned {v}")))
    }
}

/// `∂f/∂X* = (∂f/∂Re X + j ∂f/∂Im X)/2`, entrywise by central differences.
pub fn finite_diff_gradient<F: Fn(&CMat) -> f64>(f: F, point: &CMat, step: f64) -> Result<CMat> {
    check_step(step)?;
    let mut grad = CMat::zeros(point.nrows(), point.ncols());
    let mut x = point.clone();
    for j in 0..point.ncols() {
        for i in 0..point.nrows() {
            let orig = x[(i, j)];
            let mut partial = [0.0; 2];
            for (k, dir) in [c(step, 0.0), c(0.0, step)].into_iter().enumerate() {
                x[(i, j)] = orig + dir;
                let up = eval(&f, &x)?;
                x[(i, j)] = orig - dir;
                let down = eval(&f, &x)?;
                partial[k] = (up - down) / (2.0 * step);
            }
            x[(i, j)] = orig;
            grad[(i, j)] = c(partial[0], partial[1]) * 0.5;
        }
    }
    Ok(grad)
}

/// `∂²f/∂(Re X_ij)²` by the three-point second difference.
pub fn finite_diff_hessian_diag<F: Fn(&CMat) -> f64>(
    f: F,
    point: &CMat,
    step: f64,
) -> Result<RMat> {
    check_step(step)?;
    let center = eval(&f, point)?;
    let mut out = RMat::zeros(point.nrows(), point.ncols());
    let mut x = point.clone();
    for j in 0..point.ncols() {
        for i in 0..point.nrows() {
            let orig = x[(i, j)];
            x[(i, j)] = orig + c(step, 0.0);
            let up = eval(&f, &x)?;
            x[(i, j)] = orig - c(step, 0.0);
            let down = eval(&f, &x)?;
            x[(i, j)] = orig;
            out[(i, j)] = (up - 2.0 * center + down) / (step * step);
        }
    }
    Ok(out)
}

/// `‖a − b‖_F / max(‖b‖_F, floor)`.
pub fn relative_error(a: &CMat, b: &CMat, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}
