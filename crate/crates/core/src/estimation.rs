//! Linear estimators of the cascaded channel from the training signal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitize, identity, kron_identity, real_trace, CMat, CVec, HermitianFactor,
};
use crate::statistics::{
    signal_subspace, training_emi_covariance, training_emi_covariance_matrix, PhaseConfiguration,
    ScenarioStatistics, SUBSPACE_TOL,
};

/// Reported in place of `−∞` when every trial is estimated exactly.
pub const RMSE_FLOOR_DB: f64 = -200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Lmmse,
    Ls,
    Rsls,
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub xhat: CVec,
    pub analytic_mse: Option<f64>,
    pub method: EstimatorKind,
}

/// Normalized training covariance
/// `Φ_{Nτ} R_x Φ_{Nτ}ᴴ + (σ_e²/ρᵗʳ) R_wᵗʳ + (σ²/ρᵗʳ) I`.
pub fn training_covariance(phi: &PhaseConfiguration, stats: &ScenarioStatistics) -> Result<CMat> {
    if phi.m() != stats.m() {
        return Err(Error::Shape(format!(
            "phase configuration has {} columns, scenario has M = {}",
            phi.m(),
            stats.m()
        )));
    }
    Ok(training_covariance_matrix(phi.matrix(), stats))
}

/// As [`training_covariance`] for an arbitrary `τ × M` matrix.
pub fn training_covariance_matrix(psi: &CMat, stats: &ScenarioStatistics) -> CMat {
    let p = &stats.powers;
    let pn = kron_identity(stats.n(), psi);
    let rw = training_emi_covariance_matrix(psi, stats);
    let dim = pn.nrows();
    hermitize(
        &(&pn * stats.r_x.matrix() * pn.adjoint()
            + rw * c(p.sigma_e2 / p.rho_tr, 0.0)
            + identity(dim) * c(p.sigma2 / p.rho_tr, 0.0)),
    )
}

/// `Qᵗʳ = Φ_{Nτ}ᴴ (R_yᵗʳ)⁻¹ Φ_{Nτ}`.
pub fn training_q(phi: &PhaseConfiguration, stats: &ScenarioStatistics) -> Result<CMat> {
    let pn = phi.stacked(stats.n());
    let fac = HermitianFactor::new(&training_covariance(phi, stats)?)?;
    Ok(hermitize(&(pn.adjoint() * fac.solve(&pn))))
}

/// `(R_x̃, tr R_x̃)` with `R_x̃ = R_x − R_x Qᵗʳ R_x`.
pub fn lmmse_error_stats(
    phi: &PhaseConfiguration,
    stats: &ScenarioStatistics,
) -> Result<(CMat, f64)> {
    let rx = stats.r_x.matrix();
    let q = training_q(phi, stats)?;
    let err = hermitize(&(rx - rx * q * rx));
    let mse = real_trace(&err);
    Ok((err, mse))
}

/// Linear map `x̂ = (1/√ρᵗʳ) A yᵗʳ` for a fixed training configuration.
/// Building it once lets Monte-Carlo trials share the factorizations.
#[derive(Debug, Clone)]
pub struct LinearEstimator {
    kind: EstimatorKind,
    a: CMat,
    scale: f64,
    analytic_mse: f64,
    error_covariance: Option<CMat>,
}

impl LinearEstimator {
    pub fn new(
        kind: EstimatorKind,
        phi: &PhaseConfiguration,
        stats: &ScenarioStatistics,
    ) -> Result<Self> {
        match kind {
            EstimatorKind::Lmmse => Self::lmmse(phi, stats),
            EstimatorKind::Ls => Self::ls(phi, stats),
            EstimatorKind::Rsls => {
                let (u, _) = signal_subspace(&stats.r_x, SUBSPACE_TOL)?;
                Self::rsls(phi, stats, &u)
            }
        }
    }

    pub fn lmmse(phi: &PhaseConfiguration, stats: &ScenarioStatistics) -> Result<Self> {
        let pn = phi.stacked(stats.n());
        let rx = stats.r_x.matrix();
        let fac = HermitianFactor::new(&training_covariance(phi, stats)?)?;
        // R_x Φᴴ R_y⁻¹ = (R_y⁻¹ Φ R_x)ᴴ
        let a = fac.solve(&(&pn * rx)).adjoint();
        let q = hermitize(&(pn.adjoint() * fac.solve(&pn)));
        let err = hermitize(&(rx - rx * q * rx));
        Ok(Self {
            kind: EstimatorKind::Lmmse,
            a,
            scale: 1.0 / stats.powers.rho_tr.sqrt(),
            analytic_mse: real_trace(&err).max(0.0),
            error_covariance: Some(err),
        })
    }

    pub fn ls(phi: &PhaseConfiguration, stats: &ScenarioStatistics) -> Result<Self> {
        if phi.tau() < phi.m() {
            return Err(Error::InsufficientPilots(format!(
                "LS needs tau >= M, got tau = {} and M = {}",
                phi.tau(),
                phi.m()
            )));
        }
        let pn = phi.stacked(stats.n());
        let gram = Self::gram_factor(&(pn.adjoint() * &pn))?;
        let a = gram.solve(&pn.adjoint());
        Self::unbiased(EstimatorKind::Ls, a, phi, stats)
    }

    /// Reduced-subspace LS on the columns of `u_s` (orthonormal basis of the
    /// signal subspace of `R_x`).
    pub fn rsls(phi: &PhaseConfiguration, stats: &ScenarioStatistics, u_s: &CMat) -> Result<Self> {
        let pn = phi.stacked(stats.n());
        if u_s.nrows() != pn.ncols() || u_s.ncols() == 0 {
            return Err(Error::Shape(format!(
                "subspace basis is {:?}, expected {} rows",
                u_s.shape(),
                pn.ncols()
            )));
        }
        let r = u_s.ncols();
        if r > pn.nrows() {
            return Err(Error::InsufficientPilots(format!(
                "RS-LS needs tau*N >= r, got tau*N = {} and r = {r}",
                pn.nrows()
            )));
        }
        let pu = &pn * u_s;
        let gram = Self::gram_factor(&(pu.adjoint() * &pu))?;
        let a = u_s * gram.solve(&pu.adjoint());
        Self::unbiased(EstimatorKind::Rsls, a, phi, stats)
    }

    fn gram_factor(gram: &CMat) -> Result<HermitianFactor> {
        HermitianFactor::new(gram).map_err(|e| match e {
            Error::Numerical(msg) => {
                Error::InsufficientPilots(format!("singular pilot Gram matrix: {msg}"))
            }
            other => other,
        })
    }

    /// MSE `tr{(σ_e²/ρᵗʳ) A R_w Aᴴ + (σ²/ρᵗʳ) A Aᴴ}` of an estimator with
    /// `A Φ x = x` on the signal subspace.
    fn unbiased(
        kind: EstimatorKind,
        a: CMat,
        phi: &PhaseConfiguration,
        stats: &ScenarioStatistics,
    ) -> Result<Self> {
        let p = &stats.powers;
        let rw = training_emi_covariance(phi, stats)?;
        let emi = real_trace(&(&a * rw * a.adjoint()));
        let noise = a.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let mse = (p.sigma_e2 * emi + p.sigma2 * noise) / p.rho_tr;
        Ok(Self {
            kind,
            a,
            scale: 1.0 / p.rho_tr.sqrt(),
            analytic_mse: mse.max(0.0),
            error_covariance: None,
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn analytic_mse(&self) -> f64 {
        self.analytic_mse
    }

    /// `R_x̃` (LMMSE only).
    pub fn error_covariance(&self) -> Option<&CMat> {
        self.error_covariance.as_ref()
    }

    /// Filter matrix `A` (without the `1/√ρᵗʳ` factor).
    pub fn filter(&self) -> &CMat {
        &self.a
    }

    pub fn apply(&self, y: &CVec) -> Result<CVec> {
        if y.len() != self.a.ncols() {
            return Err(Error::Shape(format!(
                "observation has {} entries, expected {}",
                y.len(),
                self.a.ncols()
            )));
        }
        Ok(&self.a * y * c(self.scale, 0.0))
    }

    pub fn estimate(&self, y: &CVec) -> Result<EstimationResult> {
        Ok(EstimationResult {
            xhat: self.apply(y)?,
            analytic_mse: Some(self.analytic_mse),
            method: self.kind,
        })
    }
}

pub fn lmmse_estimate(
    y: &CVec,
    phi: &PhaseConfiguration,
    stats: &ScenarioStatistics,
) -> Result<EstimationResult> {
    LinearEstimator::lmmse(phi, stats)?.estimate(y)
}

pub fn ls_estimate(
    y: &CVec,
    phi: &PhaseConfiguration,
    stats: &ScenarioStatistics,
) -> Result<EstimationResult> {
    LinearEstimator::ls(phi, stats)?.estimate(y)
}

pub fn rsls_estimate(
    y: &CVec,
    phi: &PhaseConfiguration,
    stats: &ScenarioStatistics,
    u_s: &CMat,
) -> Result<EstimationResult> {
    LinearEstimator::rsls(phi, stats, u_s)?.estimate(y)
}

/// `10 log₁₀` of the mean of `‖x − x̂‖²/M` over trials, floored at
/// [`RMSE_FLOOR_DB`].
pub fn empirical_rmse(squared_errors: &[f64], m: usize) -> Result<f64> {
    if squared_errors.is_empty() {
        return Err(Error::Validation(
            "empirical RMSE needs at least one trial".into(),
        ));
    }
    if m == 0 {
        return Err(Error::Validation("RIS size must be positive".into()));
    }
    let mean = squared_errors.iter().sum::<f64>() / squared_errors.len() as f64 / m as f64;
    Ok(to_db(mean))
}

/// `10 log₁₀ x` with the RMSE floor for non-positive input.
pub fn to_db(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(RMSE_FLOOR_DB)
    } else {
        RMSE_FLOOR_DB
    }
}
