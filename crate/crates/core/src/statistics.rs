//! Spatial correlation matrices and the composite second-order statistics
//! of the cascaded channel, the EMI and the noise.

use std::f64::consts::{FRAC_PI_2, PI};
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wave_vector, AngleCoordinate, ArrayGeometry};
use crate::linalg::{
    c, hermitian_defect, hermitian_eigen, hermitize, kron_identity, real_trace, CMat, CVec,
};

/// Entry change tolerated between successive node doublings.
pub const QUADRATURE_TOL: f64 = 1e-8;
const MAX_NODES: usize = 1024;
/// Relative eigenvalue threshold separating signal from quadrature noise.
pub const SUBSPACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScatteringKind {
    /// Independent Gaussians in azimuth and elevation with standard deviation
    /// `spread/2`, truncated to the `±spread` box around the center.
    #[serde(alias = "gaussian")]
    TruncatedGaussian,
    /// `cos(ϑ)/(2π)` over the front half-space.
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringSpec {
    pub kind: ScatteringKind,
    pub center: AngleCoordinate,
    /// Angular half-width of the support in radians.
    pub spread: f64,
    pub gain: f64,
}

impl ScatteringSpec {
    pub fn gaussian(center: AngleCoordinate, spread: f64, gain: f64) -> Result<Self> {
        let spec = Self {
            kind: ScatteringKind::TruncatedGaussian,
            center,
            spread,
            gain,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn isotropic(gain: f64) -> Result<Self> {
        let spec = Self {
            kind: ScatteringKind::Isotropic,
            center: AngleCoordinate::new(0.0, 0.0)?,
            spread: PI,
            gain,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::Validation(format!(
                "scattering gain must be positive, got {}",
                self.gain
            )));
        }
        if self.kind == ScatteringKind::TruncatedGaussian
            && !(self.spread > 0.0 && self.spread.is_finite())
        {
            return Err(Error::Validation(format!(
                "angular spread must be positive, got {}",
                self.spread
            )));
        }
        Ok(())
    }

    fn support(&self) -> ((f64, f64), (f64, f64)) {
        match self.kind {
            ScatteringKind::Isotropic => ((-FRAC_PI_2, FRAC_PI_2), (-FRAC_PI_2, FRAC_PI_2)),
            ScatteringKind::TruncatedGaussian => {
                let clip = |x0: f64| {
                    (
                        (x0 - self.spread).max(-FRAC_PI_2),
                        (x0 + self.spread).min(FRAC_PI_2),
                    )
                };
                (clip(self.center.azimuth()), clip(self.center.elevation()))
            }
        }
    }

    /// Unnormalized density; normalization is done numerically.
    pub fn density(&self, azimuth: f64, elevation: f64) -> f64 {
        match self.kind {
            ScatteringKind::Isotropic => elevation.cos() / (2.0 * PI),
            ScatteringKind::TruncatedGaussian => {
                let ((a0, a1), (e0, e1)) = self.support();
                if azimuth < a0 || azimuth > a1 || elevation < e0 || elevation > e1 {
                    return 0.0;
                }
                let s = 0.5 * self.spread;
                let da = azimuth - self.center.azimuth();
                let de = elevation - self.center.elevation();
                (-(da * da + de * de) / (2.0 * s * s)).exp()
            }
        }
    }

    fn default_nodes(&self) -> usize {
        match self.kind {
            ScatteringKind::Isotropic => 128,
            ScatteringKind::TruncatedGaussian => 64,
        }
    }
}

/// Hermitian PSD spatial correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    matrix: CMat,
}

impl CorrelationMatrix {
    /// Validates Hermitian symmetry (1e-12 relative) and positive
    /// semidefiniteness (`λ_min ≥ −1e−10 · tr`).
    pub fn new(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Shape(format!(
                "correlation matrix must be square, got {:?}",
                matrix.shape()
            )));
        }
        if hermitian_defect(&matrix) > 1e-12 {
            return Err(Error::Validation(
                "correlation matrix is not Hermitian".into(),
            ));
        }
        let matrix = hermitize(&matrix);
        let tr = real_trace(&matrix);
        let min_eig = hermitian_eigen(&matrix).0[0];
        if min_eig < -1e-10 * tr.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::Validation(format!(
                "correlation matrix is not PSD (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMat::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMat::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Average diagonal power `tr/dim`.
    pub fn gain(&self) -> f64 {
        real_trace(&self.matrix) / self.dim() as f64
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Shape(format!(
                "Hadamard of {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Self {
            matrix: hermitize(&self.matrix.component_mul(&other.matrix)),
        })
    }

    pub fn kronecker(&self, other: &Self) -> Self {
        Self {
            matrix: hermitize(&self.matrix.kronecker(&other.matrix)),
        }
    }
}

/// `β ∬ f(φ,ϑ) a aᴴ dϑ dφ` by tensor Gauss–Legendre quadrature, doubling
/// the node count until successive estimates agree entrywise within
/// [`QUADRATURE_TOL`].
pub fn build_correlation(geom: &ArrayGeometry, spec: &ScatteringSpec) -> Result<CorrelationMatrix> {
    spec.validate()?;
    let mut nodes = spec.default_nodes();
    let mut coarse = integrate(geom, spec, nodes);
    loop {
        let fine_nodes = nodes * 2;
        if fine_nodes > MAX_NODES {
            return Err(Error::Numerical(format!(
                "correlation quadrature did not converge with {MAX_NODES} nodes per axis"
            )));
        }
        let fine = integrate(geom, spec, fine_nodes);
        let change = (&fine - &coarse)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if change <= QUADRATURE_TOL * spec.gain {
            return CorrelationMatrix::new(fine);
        }
        coarse = fine;
        nodes = fine_nodes;
    }
}

fn integrate(geom: &ArrayGeometry, spec: &ScatteringSpec, nodes: usize) -> CMat {
    let rule = GaussLegendre::new(NonZeroUsize::new(nodes).expect("nonzero node count"));
    let pairs = rule.as_node_weight_pairs();
    let ((a0, a1), (e0, e1)) = spec.support();
    let map = |x: f64, lo: f64, hi: f64| 0.5 * (hi - lo) * x + 0.5 * (hi + lo);
    let (sa, se) = (0.5 * (a1 - a0), 0.5 * (e1 - e0));

    let m = geom.len();
    let mut acc = CMat::zeros(m, m);
    let mut total = 0.0;
    let mut block = CMat::zeros(m, pairs.len());
    for &(xa, wa) in pairs {
        let az = map(xa, a0, a1);
        let mut used = 0;
        for &(xe, we) in pairs {
            let el = map(xe, e0, e1);
            let w = wa * sa * we * se * spec.density(az, el);
            if w <= 0.0 {
                continue;
            }
            total += w;
            let a = geom.response_for_wave_vector(wave_vector(az, el)) * c(w.sqrt(), 0.0);
            block.set_column(used, &a);
            used += 1;
        }
        if used > 0 {
            let cols = block.columns(0, used);
            acc += cols * cols.adjoint();
        }
    }
    hermitize(&(acc * c(spec.gain / total, 0.0)))
}

/// Transmit, noise and EMI powers (linear).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Powers {
    pub rho_tr: f64,
    pub rho: f64,
    pub sigma2: f64,
    pub sigma_e2: f64,
}

impl Powers {
    /// Unit transmit powers, `σ² = 10^(−SNR/10)` and `σ_e² = 10^(−SIR/10)`.
    /// An infinite SIR disables the EMI.
    pub fn from_db(snr_db: f64, sir_db: f64) -> Self {
        let lin = |db: f64| {
            if db.is_infinite() && db > 0.0 {
                0.0
            } else {
                10f64.powf(-db / 10.0)
            }
        };
        Self {
            rho_tr: 1.0,
            rho: 1.0,
            sigma2: lin(snr_db),
            sigma_e2: lin(sir_db),
        }
    }

    pub fn without_emi(self) -> Self {
        Self {
            sigma_e2: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        if !pos(self.rho_tr) || !pos(self.rho) || !nonneg(self.sigma2) || !nonneg(self.sigma_e2) {
            return Err(Error::Validation(format!("invalid powers {self:?}")));
        }
        Ok(())
    }
}

/// All correlation matrices and power levels defining one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioStatistics {
    pub r_h: CorrelationMatrix,
    pub r_g: CorrelationMatrix,
    pub r_gp: CorrelationMatrix,
    pub r_e: CorrelationMatrix,
    pub r_c: CorrelationMatrix,
    pub r_q: CorrelationMatrix,
    pub r_x: CorrelationMatrix,
    pub powers: Powers,
}

/// Populates `R_c = R_g ⊙ R_h`, `R_q = R_g ⊙ R_e` and `R_x = R_g' ⊗ R_c`.
pub fn derive_scenario(
    r_h: CorrelationMatrix,
    r_g: CorrelationMatrix,
    r_gp: CorrelationMatrix,
    r_e: CorrelationMatrix,
    powers: Powers,
) -> Result<ScenarioStatistics> {
    powers.validate()?;
    let m = r_h.dim();
    if r_g.dim() != m || r_e.dim() != m {
        return Err(Error::Shape(format!(
            "RIS-side correlations must share dimension {m}, got R_g {} and R_e {}",
            r_g.dim(),
            r_e.dim()
        )));
    }
    let r_c = r_g.hadamard(&r_h)?;
    let r_q = r_g.hadamard(&r_e)?;
    let r_x = r_gp.kronecker(&r_c);
    Ok(ScenarioStatistics {
        r_h,
        r_g,
        r_gp,
        r_e,
        r_c,
        r_q,
        r_x,
        powers,
    })
}

impl ScenarioStatistics {
    /// Number of RIS elements.
    pub fn m(&self) -> usize {
        self.r_c.dim()
    }

    /// Number of BS antennas.
    pub fn n(&self) -> usize {
        self.r_gp.dim()
    }

    pub fn with_powers(&self, powers: Powers) -> Result<Self> {
        powers.validate()?;
        Ok(Self {
            powers,
            ..self.clone()
        })
    }
}

/// Unit-modulus RIS configuration: `τ × M` during training, `1 × M` for data.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfiguration {
    entries: CMat,
}

impl PhaseConfiguration {
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Shape("phase configuration must be non-empty".into()));
        }
        if let Some(z) = entries.iter().find(|z| (z.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::Validation(format!(
                "phase entry {z} is not unit modulus"
            )));
        }
        Ok(Self { entries })
    }

    /// `e^{j∠Ψ}` entrywise; zero entries map to phase 0.
    pub fn project(psi: &CMat) -> Self {
        Self {
            entries: psi.map(unit_phase),
        }
    }

    pub fn from_phases(phases: &nalgebra::DMatrix<f64>) -> Self {
        Self {
            entries: phases.map(|p| c(p.cos(), p.sin())),
        }
    }

    /// `[Φ]_{i,m} = exp(−j2π·i·m/max(τ, M))`: the first `τ` rows of the
    /// `M`-point DFT when `τ ≤ M`, else the first `M` columns of the
    /// `τ`-point DFT. Columns are orthogonal whenever `τ ≥ M`.
    pub fn dft(tau: usize, m: usize) -> Result<Self> {
        if tau == 0 || m == 0 {
            return Err(Error::Validation(
                "pilot length and RIS size must be positive".into(),
            ));
        }
        let period = tau.max(m) as f64;
        Ok(Self::from_phases(&nalgebra::DMatrix::from_fn(
            tau,
            m,
            |i, k| -2.0 * PI * ((i * k) % tau.max(m)) as f64 / period,
        )))
    }

    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, tau: usize, m: usize) -> Self {
        Self::from_phases(&nalgebra::DMatrix::from_fn(tau, m, |_, _| {
            rng.random_range(0.0..2.0 * PI)
        }))
    }

    pub fn tau(&self) -> usize {
        self.entries.nrows()
    }

    pub fn m(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    /// Row `i` as a data-phase configuration.
    pub fn row(&self, i: usize) -> Self {
        Self {
            entries: self.entries.rows(i, 1).into_owned(),
        }
    }

    /// The data-phase vector `φ` (requires `τ = 1`).
    pub fn vector(&self) -> CVec {
        debug_assert_eq!(self.tau(), 1);
        CVec::from_iterator(self.m(), self.entries.row(0).iter().cloned())
    }

    pub fn from_vector(phi: &CVec) -> Result<Self> {
        Self::new(CMat::from_row_slice(1, phi.len(), phi.as_slice()))
    }

    /// `I_N ⊗ Φ`.
    pub fn stacked(&self, n: usize) -> CMat {
        kron_identity(n, &self.entries)
    }

    /// `(I_N ⊗ Φ) x` without forming the Kronecker product; `x` has `N·M`
    /// entries and the result `N·τ`.
    pub fn apply_stacked(&self, x: &CVec) -> CVec {
        let (tau, m) = (self.tau(), self.m());
        let n = x.len() / m;
        let mut out = CVec::zeros(n * tau);
        for b in 0..n {
            let block = &self.entries * x.rows(b * m, m);
            out.rows_mut(b * tau, tau).copy_from(&block);
        }
        out
    }

    /// Multiplies every entry by `e^{jθ}`.
    pub fn rotated(&self, theta: f64) -> Self {
        Self {
            entries: &self.entries * c(theta.cos(), theta.sin()),
        }
    }
}

/// `z/|z|`. Entries already within a few ulp of unit modulus are kept as
/// they are, which makes the projection exactly idempotent.
fn unit_phase(z: num_complex::Complex64) -> num_complex::Complex64 {
    let r = z.norm();
    if r == 0.0 || !r.is_finite() {
        c(1.0, 0.0)
    } else if (r - 1.0).abs() <= 4.0 * f64::EPSILON {
        z
    } else {
        z / r
    }
}

fn check_phase(phi: &PhaseConfiguration, stats: &ScenarioStatistics) -> Result<()> {
    if phi.m() != stats.m() {
        return Err(Error::Shape(format!(
            "phase configuration has {} columns, scenario has M = {}",
            phi.m(),
            stats.m()
        )));
    }
    Ok(())
}

/// Normalized training EMI covariance `R_g' ⊗ ((Φ R_q Φᴴ) ⊙ I_τ)` of
/// dimension `Nτ` (σ_e² factored out).
pub fn training_emi_covariance(
    phi: &PhaseConfiguration,
    stats: &ScenarioStatistics,
) -> Result<CMat> {
    check_phase(phi, stats)?;
    Ok(training_emi_covariance_matrix(phi.matrix(), stats))
}

/// As [`training_emi_covariance`] for an arbitrary (not necessarily unit
/// modulus) `τ × M` matrix.
pub fn training_emi_covariance_matrix(psi: &CMat, stats: &ScenarioStatistics) -> CMat {
    let inner = psi * stats.r_q.matrix() * psi.adjoint();
    let diag = CMat::from_diagonal(&CVec::from_fn(psi.nrows(), |i, _| c(inner[(i, i)].re, 0.0)));
    stats.r_gp.matrix().kronecker(&diag)
}

/// Normalized data EMI covariance `Φ_N (R_g' ⊗ R_q) Φ_Nᴴ` (N × N).
pub fn data_emi_covariance(phi: &PhaseConfiguration, stats: &ScenarioStatistics) -> Result<CMat> {
    check_phase(phi, stats)?;
    if phi.tau() != 1 {
        return Err(Error::Shape(format!(
            "data phase must be a single row, got {}",
            phi.tau()
        )));
    }
    let v = phi.vector();
    // φᵀ R_q φ*
    let scalar = v.transpose() * stats.r_q.matrix() * v.conjugate();
    Ok(stats.r_gp.matrix() * c(scalar[(0, 0)].re, 0.0))
}

/// Orthonormal eigenvectors of `R` whose eigenvalues exceed
/// `tol · λ_max`, ordered by decreasing eigenvalue.
pub fn signal_subspace(r: &CorrelationMatrix, tol: f64) -> Result<(CMat, usize)> {
    let (values, vectors) = hermitian_eigen(r.matrix());
    let n = values.len();
    let max = values[n - 1];
    if !(max > 0.0) {
        return Err(Error::EmptySubspace);
    }
    let keep: Vec<usize> = (0..n).rev().filter(|&k| values[k] > tol * max).collect();
    let mut u = CMat::zeros(n, keep.len());
    for (j, &k) in keep.iter().enumerate() {
        u.set_column(j, &vectors.column(k));
    }
    Ok((u, keep.len()))
}

/// Factor `L` with `L Lᴴ = R` from the eigendecomposition, clamping
/// negative eigenvalues to zero.
pub fn psd_factor(r: &CMat) -> Result<CMat> {
    if r.nrows() != r.ncols() {
        return Err(Error::Shape(format!(
            "expected square matrix, got {:?}",
            r.shape()
        )));
    }
    if hermitian_defect(r) > 1e-10 {
        return Err(Error::Validation(
            "cannot factor a non-Hermitian matrix".into(),
        ));
    }
    let (values, vectors) = hermitian_eigen(r);
    let roots = values.map(|v| c(v.max(0.0).sqrt(), 0.0));
    let mut l = vectors;
    for (j, s) in roots.iter().enumerate() {
        let mut col = l.column_mut(j);
        col *= *s;
    }
    Ok(l)
}
