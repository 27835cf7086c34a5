//! MMSE receive combining and spectral-efficiency evaluation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitize, identity, quad_form, CMat, CVec, HermitianFactor};
use crate::statistics::{data_emi_covariance, PhaseConfiguration, ScenarioStatistics};

#[derive(Debug, Clone)]
pub struct CombinerResult {
    pub v: CVec,
    /// MSE of `vᴴy` as an estimate of the symbol.
    pub e_s: f64,
    /// Effective SINR `1/e_s − 1`.
    pub sinr: f64,
}

/// `Φ_N` as an `N × NM` matrix for a single-row configuration.
pub fn data_phase_matrix(phi: &PhaseConfiguration, n: usize) -> CMat {
    phi.stacked(n)
}

fn check_data_phase(phi: &PhaseConfiguration, stats: &ScenarioStatistics) -> Result<()> {
    if phi.tau() != 1 || phi.m() != stats.m() {
        return Err(Error::Shape(format!(
            "data phase must be 1 x {}, got {} x {}",
            stats.m(),
            phi.tau(),
            phi.m()
        )));
    }
    Ok(())
}

/// Normalized noise-plus-EMI covariance `(σ_e²/ρ) R_w + (σ²/ρ) I` (N × N).
pub fn disturbance_covariance(
    phi: &PhaseConfiguration,
    stats: &ScenarioStatistics,
) -> Result<CMat> {
    let p = &stats.powers;
    let rw = data_emi_covariance(phi, stats)?;
    Ok(rw * c(p.sigma_e2 / p.rho, 0.0) + identity(stats.n()) * c(p.sigma2 / p.rho, 0.0))
}

/// `R_y = Φ_N (x̂x̂ᴴ + R_x̃) Φ_Nᴴ + (σ_e²/ρ) R_w + (σ²/ρ) I`.
pub fn data_covariance(
    phi: &PhaseConfiguration,
    xhat: &CVec,
    err_cov: &CMat,
    stats: &ScenarioStatistics,
) -> Result<CMat> {
    check_data_phase(phi, stats)?;
    let mn = stats.m() * stats.n();
    if xhat.len() != mn || err_cov.shape() != (mn, mn) {
        return Err(Error::Shape(format!(
            "estimate must have {mn} entries and error covariance {mn}x{mn}"
        )));
    }
    let pn = data_phase_matrix(phi, stats.n());
    let b = &pn * xhat;
    Ok(hermitize(
        &(&b * b.adjoint() + &pn * err_cov * pn.adjoint() + disturbance_covariance(phi, stats)?),
    ))
}

/// `v = (1/√ρ) R_y⁻¹ Φ_N x̂` and `e_s = 1 − x̂ᴴ Q(φ) x̂`. Perfect CSI is
/// `xhat = x` with a zero error covariance.
pub fn mmse_combiner(
    phi: &PhaseConfiguration,
    xhat: &CVec,
    err_cov: &CMat,
    stats: &ScenarioStatistics,
) -> Result<CombinerResult> {
    let ry = data_covariance(phi, xhat, err_cov, stats)?;
    let fac = HermitianFactor::new(&ry)?;
    let b = phi.apply_stacked(xhat);
    let r_inv_b = fac.solve_vec(&b);
    let v = &r_inv_b * c(1.0 / stats.powers.rho.sqrt(), 0.0);
    // x̂ᴴ Φ_Nᴴ R_y⁻¹ Φ_N x̂ lies in [0, 1) since R_y ⪰ bbᴴ + (σ²/ρ)I.
    let captured = b.dotc(&r_inv_b).re.clamp(0.0, 1.0);
    let e_s = (1.0 - captured).max(f64::MIN_POSITIVE);
    Ok(CombinerResult {
        v,
        e_s,
        sinr: 1.0 / e_s - 1.0,
    })
}

/// `Q(φ) = Φ_Nᴴ R_y⁻¹ Φ_N`.
pub fn combining_q(
    phi: &PhaseConfiguration,
    xhat: &CVec,
    err_cov: &CMat,
    stats: &ScenarioStatistics,
) -> Result<CMat> {
    let ry = data_covariance(phi, xhat, err_cov, stats)?;
    let pn = data_phase_matrix(phi, stats.n());
    Ok(hermitize(
        &(pn.adjoint() * HermitianFactor::new(&ry)?.solve(&pn)),
    ))
}

/// `xᴴ Φ_Nᴴ ((σ_e²/ρ) R_w + (σ²/ρ) I)⁻¹ Φ_N x`.
pub fn sinr_perfect(phi: &PhaseConfiguration, x: &CVec, stats: &ScenarioStatistics) -> Result<f64> {
    check_data_phase(phi, stats)?;
    let b = phi.apply_stacked(x);
    if b.iter().all(|z| *z == c(0.0, 0.0)) {
        return Ok(0.0);
    }
    let fac = HermitianFactor::new(&disturbance_covariance(phi, stats)?)?;
    Ok(b.dotc(&fac.solve_vec(&b)).re.max(0.0))
}

/// Per-draw terms of the hardening bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardeningSample {
    /// `vᴴ Φ_N x`.
    pub gain: Complex64,
    /// `vᴴ R_w v`.
    pub emi: f64,
    /// `‖v‖²`.
    pub noise: f64,
}

impl HardeningSample {
    pub fn new(
        phi: &PhaseConfiguration,
        v: &CVec,
        x: &CVec,
        stats: &ScenarioStatistics,
    ) -> Result<Self> {
        let rw = data_emi_covariance(phi, stats)?;
        let b = phi.apply_stacked(x);
        Ok(Self {
            gain: v.dotc(&b),
            emi: quad_form(v, &rw),
            noise: v.norm_squared(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeEstimate {
    pub value: f64,
    pub stderr: f64,
}

const BATCHES: usize = 10;

pub fn prelog(tau: usize, tau_c: usize) -> Result<f64> {
    if tau >= tau_c {
        return Err(Error::Validation(format!(
            "pilot length {tau} must be below coherence length {tau_c}"
        )));
    }
    Ok((tau_c - tau) as f64 / tau_c as f64)
}

/// `log₂(1 + |E g|² / (Var g + (σ_e²/ρ) E vᴴR_w v + (σ²/ρ) E‖v‖²))` without
/// the pre-log.
pub fn hardening_rate(samples: &[HardeningSample], stats: &ScenarioStatistics) -> f64 {
    let n = samples.len() as f64;
    let p = &stats.powers;
    let mean_g = samples.iter().map(|s| s.gain).sum::<Complex64>() / n;
    let mean_g2 = samples.iter().map(|s| s.gain.norm_sqr()).sum::<f64>() / n;
    let emi = samples.iter().map(|s| s.emi).sum::<f64>() / n;
    let noise = samples.iter().map(|s| s.noise).sum::<f64>() / n;
    let signal = mean_g.norm_sqr();
    let denom = (mean_g2 - signal).max(0.0) + p.sigma_e2 / p.rho * emi + p.sigma2 / p.rho * noise;
    if signal == 0.0 {
        return 0.0;
    }
    (1.0 + signal / denom).log2()
}

/// Hardening bound with a batch-means standard error over 10 batches.
pub fn se_hardening(
    samples: &[HardeningSample],
    stats: &ScenarioStatistics,
    tau: usize,
    tau_c: usize,
) -> Result<SeEstimate> {
    let pre = prelog(tau, tau_c)?;
    if samples.is_empty() {
        return Err(Error::Validation(
            "spectral efficiency needs at least one trial".into(),
        ));
    }
    let value = pre * hardening_rate(samples, stats);
    let batches = BATCHES.min(samples.len());
    let stderr = if batches < 2 {
        0.0
    } else {
        let size = samples.len() / batches;
        let vals: Vec<f64> = (0..batches)
            .map(|b| {
                let end = if b + 1 == batches {
                    samples.len()
                } else {
                    (b + 1) * size
                };
                pre * hardening_rate(&samples[b * size..end], stats)
            })
            .collect();
        // Noise-free batches can have unbounded rates.
        let se = std_error(&vals);
        if se.is_nan() {
            f64::INFINITY
        } else {
            se
        }
    };
    Ok(SeEstimate { value, stderr })
}

/// Prelog-scaled mean of `log₂(1 + SINR)` over perfect-CSI draws.
pub fn se_perfect(sinrs: &[f64], tau: usize, tau_c: usize) -> Result<SeEstimate> {
    let pre = prelog(tau, tau_c)?;
    if sinrs.is_empty() {
        return Err(Error::Validation(
            "spectral efficiency needs at least one trial".into(),
        ));
    }
    let rates: Vec<f64> = sinrs
        .iter()
        .map(|s| pre * (1.0 + s.max(0.0)).log2())
        .collect();
    let value = rates.iter().sum::<f64>() / rates.len() as f64;
    Ok(SeEstimate {
        value,
        stderr: if rates.len() < 2 {
            0.0
        } else {
            std_error(&rates)
        },
    })
}

fn std_error(vals: &[f64]) -> f64 {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}
