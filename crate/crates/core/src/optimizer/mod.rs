//! Alternating optimization of the RIS phases for minimum channel-estimation
//! MSE (training phase) and minimum symbol MSE (data phase).

pub mod finite_diff;
pub mod gradients;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::combining::{mmse_combiner, CombinerResult};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, RMat};
use crate::statistics::{PhaseConfiguration, ScenarioStatistics};

pub use finite_diff::{finite_diff_gradient, finite_diff_hessian_diag, relative_error};
pub use gradients::{
    data_mse_objective, grad_data, grad_data_general, grad_data_siso, grad_training,
    grad_training_general, grad_training_siso, hess_diag_data, hess_diag_training, lambda_update,
    training_mse_objective,
};

/// Hessian entries at or below this use a plain gradient step instead.
pub const HESS_FLOOR: f64 = 1e-14;
/// Tolerated objective increase between outer iterations.
pub const MONOTONE_SLACK: f64 = 1e-9;
const MAX_BACKTRACK: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub alpha: f64,
    pub eps_outer: f64,
    pub eps_inner: f64,
    pub inner_iters: usize,
    pub max_outer: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            eps_outer: 1e-5,
            eps_inner: 1e-5,
            inner_iters: 1,
            max_outer: 500,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Validation(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.eps_outer > 0.0) || !(self.eps_inner > 0.0) {
            return Err(Error::Validation(
                "optimizer tolerances must be positive".into(),
            ));
        }
        if self.inner_iters == 0 || self.max_outer == 0 {
            return Err(Error::Validation(
                "inner_iters and max_outer must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AoTrace {
    /// Objective at the initializer followed by one value per outer iteration.
    pub objective: Vec<f64>,
    pub phase: PhaseConfiguration,
    pub iterations: usize,
    pub converged: bool,
    /// Final combiner (data phase only).
    pub combiner: Option<CombinerResult>,
}

impl AoTrace {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective
            .last()
            .expect("trace holds the initial objective")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "outer_iter,objective")?;
        for (k, e) in self.objective.iter().enumerate() {
            writeln!(w, "{k},{e:.12e}")?;
        }
        Ok(())
    }
}

/// Training-phase initializer (DFT rows/columns).
pub fn initial_training_phase(tau: usize, m: usize) -> Result<PhaseConfiguration> {
    PhaseConfiguration::dft(tau, m)
}

/// Data-phase initializer: the first row of the training configuration.
pub fn initial_data_phase(training: &PhaseConfiguration) -> PhaseConfiguration {
    training.row(0)
}

/// `Ψ − α G ⊘ H` entrywise; coordinates with `H ≤ HESS_FLOOR` take `Ψ − α G`.
pub fn scaled_descent_step(psi: &CMat, grad: &CMat, hess: &RMat, alpha: f64) -> CMat {
    CMat::from_fn(psi.nrows(), psi.ncols(), |i, j| {
        let h = hess[(i, j)];
        let scale = if h > HESS_FLOOR { alpha / h } else { alpha };
        psi[(i, j)] - grad[(i, j)] * scale
    })
}

/// `inner_iters` scaled steps from `start`, then `e^{j∠Ψ}`.
fn projected_newton<F>(
    start: &CMat,
    alpha: f64,
    cfg: &OptimizerConfig,
    grad_hess: &F,
) -> Result<PhaseConfiguration>
where
    F: Fn(&CMat) -> Result<(CMat, RMat)>,
{
    let mut psi = start.clone();
    for _ in 0..cfg.inner_iters {
        let (g, h) = grad_hess(&psi)?;
        if g.norm() < cfg.eps_inner {
            break;
        }
        psi = scaled_descent_step(&psi, &g, &h, alpha);
    }
    Ok(PhaseConfiguration::project(&psi))
}

/// Projected step with step-halving: the step is accepted only if it does
/// not increase `objective`; after repeated failures the start is kept.
fn safeguarded_step<F, O>(
    start: &PhaseConfiguration,
    cfg: &OptimizerConfig,
    grad_hess: &F,
    objective: &O,
) -> Result<PhaseConfiguration>
where
    F: Fn(&CMat) -> Result<(CMat, RMat)>,
    O: Fn(&CMat) -> Result<f64>,
{
    let base = objective(start.matrix())?;
    let mut alpha = cfg.alpha;
    for _ in 0..MAX_BACKTRACK {
        let cand = projected_newton(start.matrix(), alpha, cfg, grad_hess)?;
        if objective(cand.matrix())? <= base {
            return Ok(cand);
        }
        alpha *= 0.5;
    }
    Ok(start.clone())
}

/// One projected inner pass of the training phase for fixed `Λ`.
pub fn pg_inner_training(
    start: &PhaseConfiguration,
    lambda: &CMat,
    stats: &ScenarioStatistics,
    cfg: &OptimizerConfig,
) -> Result<PhaseConfiguration> {
    cfg.validate()?;
    projected_newton(start.matrix(), cfg.alpha, cfg, &|psi: &CMat| {
        training_grad_hess(lambda, psi, stats)
    })
}

fn training_grad_hess(
    lambda: &CMat,
    psi: &CMat,
    stats: &ScenarioStatistics,
) -> Result<(CMat, RMat)> {
    Ok((
        grad_training(lambda, psi, stats)?,
        hess_diag_training(lambda, psi, stats)?,
    ))
}

fn relative_change(prev: f64, cur: f64) -> f64 {
    if prev == 0.0 {
        if cur == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (prev - cur).abs() / prev.abs()
    }
}

fn check_monotone(iteration: usize, previous: f64, current: f64) -> Result<()> {
    if current > previous + MONOTONE_SLACK {
        return Err(Error::NonMonotone {
            iteration,
            previous,
            current,
        });
    }
    Ok(())
}

/// Alternates the LMMSE filter update and a safeguarded projected Newton
/// step on `Φ_τ`. The trace holds the channel-estimation MSE at the
/// initializer and after every outer iteration.
pub fn ao_training(
    phi0: &PhaseConfiguration,
    stats: &ScenarioStatistics,
    cfg: &OptimizerConfig,
) -> Result<AoTrace> {
    cfg.validate()?;
    if phi0.m() != stats.m() {
        return Err(Error::Shape(format!(
            "initializer has {} columns, scenario has M = {}",
            phi0.m(),
            stats.m()
        )));
    }
    let mut phi = phi0.clone();
    let mut lambda = lambda_update(phi.matrix(), stats)?;
    let mut prev = training_mse_objective(&lambda, phi.matrix(), stats)?;
    let mut objective = vec![prev];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_outer {
        iterations += 1;
        let next = safeguarded_step(
            &phi,
            cfg,
            &|psi: &CMat| training_grad_hess(&lambda, psi, stats),
            &|psi: &CMat| training_mse_objective(&lambda, psi, stats),
        )?;
        let next_lambda = lambda_update(next.matrix(), stats)?;
        let cur = training_mse_objective(&next_lambda, next.matrix(), stats)?;
        check_monotone(iterations, prev, cur)?;
        objective.push(cur);
        phi = next;
        lambda = next_lambda;
        if relative_change(prev, cur) <= cfg.eps_outer {
            converged = true;
            break;
        }
        prev = cur;
    }
    Ok(AoTrace {
        objective,
        phase: phi,
        iterations,
        converged,
        combiner: None,
    })
}

fn row_to_vec(m: &CMat) -> CVec {
    CVec::from_iterator(m.ncols(), m.row(0).iter().cloned())
}

fn vec_to_row(v: &CVec) -> CMat {
    CMat::from_row_slice(1, v.len(), v.as_slice())
}

/// The combiner for fixed `φ` ([`mmse_combiner`]).
pub fn combiner_update(
    phi: &PhaseConfiguration,
    xhat: &CVec,
    err_cov: &CMat,
    stats: &ScenarioStatistics,
) -> Result<CombinerResult> {
    mmse_combiner(phi, xhat, err_cov, stats)
}

/// Alternates the MMSE combiner and a safeguarded projected Newton step on
/// the data-phase `φ`. The trace holds `e_s` at the initializer and after
/// every outer iteration.
pub fn ao_data(
    phi0: &PhaseConfiguration,
    xhat: &CVec,
    err_cov: &CMat,
    stats: &ScenarioStatistics,
    cfg: &OptimizerConfig,
) -> Result<AoTrace> {
    cfg.validate()?;
    let mut phi = PhaseConfiguration::project(phi0.matrix());
    let mut comb = combiner_update(&phi, xhat, err_cov, stats)?;
    let mut prev = comb.e_s;
    let mut objective = vec![prev];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_outer {
        iterations += 1;
        let v = comb.v.clone();
        let grad_hess = |psi: &CMat| -> Result<(CMat, RMat)> {
            let p = row_to_vec(psi);
            let g = grad_data(&v, &p, xhat, err_cov, stats)?;
            let h = hess_diag_data(&v, &p, xhat, err_cov, stats)?;
            Ok((
                vec_to_row(&g),
                RMat::from_row_slice(1, h.len(), h.as_slice()),
            ))
        };
        let obj = |psi: &CMat| data_mse_objective(&v, &row_to_vec(psi), xhat, err_cov, stats);
        let next = safeguarded_step(&phi, cfg, &grad_hess, &obj)?;
        let next_comb = combiner_update(&next, xhat, err_cov, stats)?;
        let cur = next_comb.e_s;
        check_monotone(iterations, prev, cur)?;
        objective.push(cur);
        phi = next;
        comb = next_comb;
        if relative_change(prev, cur) <= cfg.eps_outer {
            converged = true;
            break;
        }
        prev = cur;
    }
    Ok(AoTrace {
        objective,
        phase: phi,
        iterations,
        converged,
        combiner: Some(comb),
    })
}
