//! Analytic gradients and Hessian diagonals against finite differences on
//! random instances.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{
    c, random_complex_matrix, random_psd, standard_complex_normal, CMat, CVec, RMat,
};
use crate::optimizer::{
    data_mse_objective, finite_diff_gradient, finite_diff_hessian_diag, grad_data,
    grad_data_general, grad_data_siso, grad_training, grad_training_general, grad_training_siso,
    hess_diag_data, hess_diag_training, relative_error, training_mse_objective,
};
use crate::statistics::{derive_scenario, CorrelationMatrix, Powers, ScenarioStatistics};

pub const GRADIENT_TOL: f64 = 1e-6;
pub const HESSIAN_TOL: f64 = 1e-5;
pub const FORM_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-5;
const FD_HESS_STEP: f64 = 1e-4;
const REL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckOptions {
    pub instances: usize,
    pub seed: u64,
    /// Added to every analytic gradient entry (negative control).
    pub perturbation: f64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            instances: 50,
            seed: 7,
            perturbation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub max_error: f64,
    pub tolerance: f64,
    pub instances: usize,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub checks: Vec<CheckOutcome>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ch in &self.checks {
            writeln!(
                f,
                "{} {:<28} max_err={:.3e} tol={:.0e} instances={}",
                if ch.passed() { "PASS" } else { "FAIL" },
                ch.name,
                ch.max_error,
                ch.tolerance,
                ch.instances
            )?;
        }
        Ok(())
    }
}

fn random_scenario(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Result<ScenarioStatistics> {
    let mut mk = |d| CorrelationMatrix::new(random_psd(rng, d, d));
    let (rh, rg, rgp, re) = (mk(m)?, mk(m)?, mk(n)?, mk(m)?);
    let snr = rng.random_range(-5.0..20.0);
    let sir = rng.random_range(-5.0..10.0);
    derive_scenario(rh, rg, rgp, re, Powers::from_db(snr, sir))
}

fn row(v: &CVec) -> CMat {
    CMat::from_row_slice(1, v.len(), v.as_slice())
}

fn col(m: &CMat) -> CVec {
    CVec::from_iterator(m.len(), m.iter().cloned())
}

fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn hess_rel(analytic: &RMat, fd: &RMat) -> f64 {
    let scale = analytic.norm().max(REL_FLOOR);
    (analytic - fd).norm() / scale
}

#[derive(Default)]
struct Acc {
    grad_siso_tr: f64,
    grad_miso_tr: f64,
    grad_siso_data: f64,
    grad_miso_data: f64,
    hess_tr: f64,
    hess_data: f64,
    form_tr: f64,
    form_data: f64,
    siso: usize,
    miso: usize,
}

/// Runs every check on `instances` random SISO and MISO instances.
pub fn run_gradcheck(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shift = c(opts.perturbation, 0.0);
    let mut acc = Acc::default();
    for k in 0..opts.instances.max(1) {
        let n = if k % 2 == 0 { 1 } else { 2 + k % 3 };
        let m = rng.random_range(2..=6);
        let tau = rng.random_range(1..=4);
        let s = random_scenario(&mut rng, m, n)?;

        let lambda = random_complex_matrix(&mut rng, m * n, n * tau);
        let psi = random_complex_matrix(&mut rng, tau, m);
        let g = grad_training(&lambda, &psi, &s)?.add_scalar(shift);
        let fd = finite_diff_gradient(
            |p: &CMat| training_mse_objective(&lambda, p, &s).unwrap_or(f64::NAN),
            &psi,
            FD_STEP,
        )?;
        let e_tr = relative_error(&g, &(fd * c(2.0, 0.0)), REL_FLOOR);
        let h = hess_diag_training(&lambda, &psi, &s)?;
        let fdh = finite_diff_hessian_diag(
            |p: &CMat| training_mse_objective(&lambda, p, &s).unwrap_or(f64::NAN),
            &psi,
            FD_HESS_STEP,
        )?;
        acc.hess_tr = acc.hess_tr.max(hess_rel(&h, &fdh));

        let v = standard_complex_normal(&mut rng, n);
        let phi = standard_complex_normal(&mut rng, m);
        let xhat = standard_complex_normal(&mut rng, m * n);
        let err = random_psd(&mut rng, m * n, m * n) * c(0.2, 0.0);
        let gd = row(&grad_data(&v, &phi, &xhat, &err, &s)?).add_scalar(shift);
        let obj = |p: &CMat| data_mse_objective(&v, &col(p), &xhat, &err, &s).unwrap_or(f64::NAN);
        let fdd = finite_diff_gradient(obj, &row(&phi), FD_STEP)?;
        let e_data = relative_error(&gd, &(fdd * c(2.0, 0.0)), REL_FLOOR);
        let hd = hess_diag_data(&v, &phi, &xhat, &err, &s)?;
        let hd = RMat::from_row_slice(1, hd.len(), hd.as_slice());
        let fdhd = finite_diff_hessian_diag(obj, &row(&phi), FD_HESS_STEP)?;
        acc.hess_data = acc.hess_data.max(hess_rel(&hd, &fdhd));

        if n == 1 {
            acc.siso += 1;
            acc.grad_siso_tr = acc.grad_siso_tr.max(e_tr);
            acc.grad_siso_data = acc.grad_siso_data.max(e_data);
            let a = grad_training_siso(&lambda, &psi, &s)?;
            let b = grad_training_general(&lambda, &psi, &s)?;
            acc.form_tr = acc.form_tr.max(max_abs_diff(&a, &b) / b.norm().max(1.0));
            let a = row(&grad_data_siso(&v, &phi, &xhat, &err, &s)?);
            let b = row(&grad_data_general(&v, &phi, &xhat, &err, &s)?);
            acc.form_data = acc.form_data.max(max_abs_diff(&a, &b) / b.norm().max(1.0));
        } else {
            acc.miso += 1;
            acc.grad_miso_tr = acc.grad_miso_tr.max(e_tr);
            acc.grad_miso_data = acc.grad_miso_data.max(e_data);
        }
    }
    let total = acc.siso + acc.miso;
    let check = |name, max_error, tolerance, instances| CheckOutcome {
        name,
        max_error,
        tolerance,
        instances,
    };
    Ok(GradcheckReport {
        checks: vec![
            check(
                "training_gradient_siso",
                acc.grad_siso_tr,
                GRADIENT_TOL,
                acc.siso,
            ),
            check(
                "training_gradient_miso",
                acc.grad_miso_tr,
                GRADIENT_TOL,
                acc.miso,
            ),
            check(
                "data_gradient_siso",
                acc.grad_siso_data,
                GRADIENT_TOL,
                acc.siso,
            ),
            check(
                "data_gradient_miso",
                acc.grad_miso_data,
                GRADIENT_TOL,
                acc.miso,
            ),
            check("training_hessian_diag", acc.hess_tr, HESSIAN_TOL, total),
            check("data_hessian_diag", acc.hess_data, HESSIAN_TOL, total),
            check("training_siso_vs_general", acc.form_tr, FORM_TOL, acc.siso),
            check("data_siso_vs_general", acc.form_data, FORM_TOL, acc.siso),
        ],
    })
}
