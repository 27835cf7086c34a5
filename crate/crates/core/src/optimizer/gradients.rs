//! Objectives, gradients and Hessian diagonals for both AO phases.
//!
//! Gradients follow the `∂/∂Re + j∂/∂Im` convention (twice the Wirtinger
//! derivative `∂f/∂X*`), and Hessian diagonals are `∂²f/∂Re²` of each
//! entry. With these conventions `X − G/H` is the exact coordinate-wise
//! Newton step on the quadratic objectives below.
//!
//! Matrices are indexed `τ × M`; flattening column-major gives the
//! coordinate `z = m·τ + i`.

use crate::error::{Error, Result};
use crate::estimation::training_covariance_matrix;
use crate::linalg::{
    c, hermitize, identity, kron_identity, real_trace, CMat, CVec, HermitianFactor, RMat,
};
use crate::statistics::ScenarioStatistics;

fn check_training(lambda: &CMat, psi: &CMat, stats: &ScenarioStatistics) -> Result<()> {
    let (m, n) = (stats.m(), stats.n());
    if psi.ncols() != m || lambda.shape() != (m * n, n * psi.nrows()) {
        return Err(Error::Shape(format!(
            "Λ is {:?} and Φ is {:?}, expected Λ {}x{} and Φ τx{m}",
            lambda.shape(),
            psi.shape(),
            m * n,
            n * psi.nrows()
        )));
    }
    Ok(())
}

/// `Λ = R_x Φ_{Nτ}ᴴ (R_yᵗʳ)⁻¹`, the LMMSE filter for fixed `Φ`.
pub fn lambda_update(psi: &CMat, stats: &ScenarioStatistics) -> Result<CMat> {
    if psi.ncols() != stats.m() {
        return Err(Error::Shape(format!(
            "Φ has {} columns, scenario has M = {}",
            psi.ncols(),
            stats.m()
        )));
    }
    let pn = kron_identity(stats.n(), psi);
    let fac = HermitianFactor::new(&training_covariance_matrix(psi, stats))?;
    Ok(fac.solve(&(&pn * stats.r_x.matrix())).adjoint())
}

/// `tr{Λ R_yᵗʳ Λᴴ − Λ Φ_{Nτ} R_x − R_x Φ_{Nτ}ᴴ Λᴴ + R_x}`, evaluated with
/// the full matrices.
pub fn training_mse_objective(
    lambda: &CMat,
    psi: &CMat,
    stats: &ScenarioStatistics,
) -> Result<f64> {
    check_training(lambda, psi, stats)?;
    let rx = stats.r_x.matrix();
    let pn = kron_identity(stats.n(), psi);
    let ry = training_covariance_matrix(psi, stats);
    let cross = lambda * &pn * rx;
    let total = lambda * ry * lambda.adjoint() - &cross - cross.adjoint() + rx;
    Ok(real_trace(&total))
}

/// Block sums `S = Σ_{a,b} [R_g']_{ab} P_{ba}` with `P = ΛᴴΛ`, and
/// `T = Σ_{a,b} [R_g']_{ab} Λ_{ab}ᴴ`, where `Λ_{ab}` is the `M × τ` block.
fn training_blocks(lambda: &CMat, tau: usize, stats: &ScenarioStatistics) -> (CMat, CMat) {
    let (m, n) = (stats.m(), stats.n());
    let rgp = stats.r_gp.matrix();
    let p = lambda.adjoint() * lambda;
    let mut s = CMat::zeros(tau, tau);
    let mut t = CMat::zeros(tau, m);
    for a in 0..n {
        for b in 0..n {
            let w = rgp[(a, b)];
            s += p.view((b * tau, a * tau), (tau, tau)) * w;
            t += lambda.view((a * m, b * tau), (m, tau)).adjoint() * w;
        }
    }
    (hermitize(&s), t)
}

/// Gradient of the training objective for any `N`, via the Kronecker
/// block structure: `2(SΦR_c + (σ_e²/ρᵗʳ)(S⊙I)ΦR_q − T R_c)`.
pub fn grad_training_general(
    lambda: &CMat,
    psi: &CMat,
    stats: &ScenarioStatistics,
) -> Result<CMat> {
    check_training(lambda, psi, stats)?;
    let tau = psi.nrows();
    let se = stats.powers.sigma_e2 / stats.powers.rho_tr;
    let (s, t) = training_blocks(lambda, tau, stats);
    let s_diag = CMat::from_diagonal(&s.diagonal());
    let (rc, rq) = (stats.r_c.matrix(), stats.r_q.matrix());
    Ok((&s * psi * rc + s_diag * psi * rq * c(se, 0.0) - t * rc) * c(2.0, 0.0))
}

/// Single-antenna closed form
/// `2β ΛᴴΛΦR_c + 2β(σ_e²/ρᵗʳ)((ΛᴴΛ)⊙I)ΦR_q − 2β ΛᴴR_c`, where `β` is the
/// scalar BS-side correlation (1 for unit gain).
pub fn grad_training_siso(lambda: &CMat, psi: &CMat, stats: &ScenarioStatistics) -> Result<CMat> {
    check_training(lambda, psi, stats)?;
    if stats.n() != 1 {
        return Err(Error::Shape(format!(
            "SISO gradient needs N = 1, got {}",
            stats.n()
        )));
    }
    let beta = stats.r_gp.matrix()[(0, 0)];
    let se = stats.powers.sigma_e2 / stats.powers.rho_tr;
    let ll = lambda.adjoint() * lambda;
    let ll_diag = CMat::from_diagonal(&ll.diagonal());
    let (rc, rq) = (stats.r_c.matrix(), stats.r_q.matrix());
    let g = &ll * psi * rc * c(2.0, 0.0) + ll_diag * psi * rq * c(2.0 * se, 0.0)
        - lambda.adjoint() * rc * c(2.0, 0.0);
    Ok(g * beta)
}

pub fn grad_training(lambda: &CMat, psi: &CMat, stats: &ScenarioStatistics) -> Result<CMat> {
    if stats.n() == 1 {
        grad_training_siso(lambda, psi, stats)
    } else {
        grad_training_general(lambda, psi, stats)
    }
}

/// `H_{i,m} = 2 S_ii ([R_c]_mm + (σ_e²/ρᵗʳ)[R_q]_mm)`.
pub fn hess_diag_training(lambda: &CMat, psi: &CMat, stats: &ScenarioStatistics) -> Result<RMat> {
    check_training(lambda, psi, stats)?;
    let tau = psi.nrows();
    let se = stats.powers.sigma_e2 / stats.powers.rho_tr;
    let (s, _) = training_blocks(lambda, tau, stats);
    let (rc, rq) = (stats.r_c.matrix(), stats.r_q.matrix());
    Ok(RMat::from_fn(tau, stats.m(), |i, m| {
        2.0 * s[(i, i)].re * (rc[(m, m)].re + se * rq[(m, m)].re)
    }))
}

fn check_data(
    v: &CVec,
    phi: &CVec,
    xhat: &CVec,
    err_cov: &CMat,
    stats: &ScenarioStatistics,
) -> Result<()> {
    let (m, n) = (stats.m(), stats.n());
    if v.len() != n || phi.len() != m || xhat.len() != m * n || err_cov.shape() != (m * n, m * n) {
        return Err(Error::Shape(format!(
            "data-phase shapes: v {}, φ {}, x̂ {}, R_x̃ {:?} for N={n} M={m}",
            v.len(),
            phi.len(),
            xhat.len(),
            err_cov.shape()
        )));
    }
    Ok(())
}

/// `E_s = 1 + ρ vᴴ R_y v − 2√ρ Re(vᴴ Φ_N x̂)`, evaluated with the full
/// `R_y = Φ_N (x̂x̂ᴴ + R_x̃ + (σ_e²/ρ)(R_g' ⊗ R_q)) Φ_Nᴴ + (σ²/ρ) I`.
pub fn data_mse_objective(
    v: &CVec,
    phi: &CVec,
    xhat: &CVec,
    err_cov: &CMat,
    stats: &ScenarioStatistics,
) -> Result<f64> {
    check_data(v, phi, xhat, err_cov, stats)?;
    let p = &stats.powers;
    let n = stats.n();
    let pn = kron_identity(n, &CMat::from_row_slice(1, phi.len(), phi.as_slice()));
    let cmat = xhat * xhat.adjoint()
        + err_cov
        + stats.r_gp.matrix().kronecker(stats.r_q.matrix()) * c(p.sigma_e2 / p.rho, 0.0);
    let ry = &pn * cmat * pn.adjoint() + identity(n) * c(p.sigma2 / p.rho, 0.0);
    let quad = v.dotc(&(ry * v)).re;
    let lin = v.dotc(&(&pn * xhat)).re;
    Ok(1.0 + p.rho * quad - 2.0 * p.rho.sqrt() * lin)
}

/// `K = Σ_{a,b} v_a* v_b C_{ab}` and `b = Σ_a v_a* x̂_a`, the reductions of
/// the data objective to `ρ φᵀKφ* − 2√ρ Re(φᵀb) + const`.
fn data_blocks(v: &CVec, xhat: &CVec, err_cov: &CMat, stats: &ScenarioStatistics) -> (CMat, CVec) {
    let (m, n) = (stats.m(), stats.n());
    let p = &stats.powers;
    let mut b = CVec::zeros(m);
    for a in 0..n {
        b += xhat.rows(a * m, m) * v[a].conj();
    }
    let mut k = &b * b.adjoint();
    for a in 0..n {
        for bb in 0..n {
            k += err_cov.view((a * m, bb * m), (m, m)) * (v[a].conj() * v[bb]);
        }
    }
    let vrv = v.dotc(&(stats.r_gp.matrix() * v)).re;
    k += stats.r_q.matrix() * c(p.sigma_e2 / p.rho * vrv, 0.0);
    (hermitize(&k), b)
}

/// `2ρ Kᵀφ − 2√ρ b*` for any `N`.
pub fn grad_data_general(
    v: &CVec,
    phi: &CVec,
    xhat: &CVec,
    err_cov: &CMat,
    stats: &ScenarioStatistics,
) -> Result<CVec> {
    check_data(v, phi, xhat, err_cov, stats)?;
    let rho = stats.powers.rho;
    let (k, b) = data_blocks(v, xhat, err_cov, stats);
    Ok(k.transpose() * phi * c(2.0 * rho, 0.0) - b.conjugate() * c(2.0 * rho.sqrt(), 0.0))
}

/// Single-antenna form `2ρ|v|² Cᵀφ − 2√ρ v x̂*` with
/// `C = x̂x̂ᴴ + R_x̃ + β(σ_e²/ρ)R_q`.
pub fn grad_data_siso(
    v: &CVec,
    phi: &CVec,
    xhat: &CVec,
    err_cov: &CMat,
    stats: &ScenarioStatistics,
) -> Result<CVec> {
    check_data(v, phi, xhat, err_cov, stats)?;
    if stats.n() != 1 {
        return Err(Error::Shape(format!(
            "SISO gradient needs N = 1, got {}",
            stats.n()
        )));
    }
    let p = &stats.powers;
    let beta = stats.r_gp.matrix()[(0, 0)].re;
    let cm =
        xhat * xhat.adjoint() + err_cov + stats.r_q.matrix() * c(beta * p.sigma_e2 / p.rho, 0.0);
    let v0 = v[0];
    Ok(cm.transpose() * phi * c(2.0 * p.rho * v0.norm_sqr(), 0.0)
        - xhat.conjugate() * (v0 * 2.0 * p.rho.sqrt()))
}

pub fn grad_data(
    v: &CVec,
    phi: &CVec,
    xhat: &CVec,
    err_cov: &CMat,
    stats: &ScenarioStatistics,
) -> Result<CVec> {
    if stats.n() == 1 {
        grad_data_siso(v, phi, xhat, err_cov, stats)
    } else {
        grad_data_general(v, phi, xhat, err_cov, stats)
    }
}

/// `H_m = 2ρ K_mm`.
pub fn hess_diag_data(
    v: &CVec,
    phi: &CVec,
    xhat: &CVec,
    err_cov: &CMat,
    stats: &ScenarioStatistics,
) -> Result<nalgebra::DVector<f64>> {
    check_data(v, phi, xhat, err_cov, stats)?;
    let (k, _) = data_blocks(v, xhat, err_cov, stats);
    Ok(nalgebra::DVector::from_fn(stats.m(), |m, _| {
        2.0 * stats.powers.rho * k[(m, m)].re
    }))
}
