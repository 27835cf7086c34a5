//! Dense complex linear-algebra helpers shared by the estimation, combining
//! and optimization modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

/// Condition-number ceiling for Hermitian inversions.
pub const MAX_CONDITION: f64 = 1e14;

pub const JITTER: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `I_n ⊗ a`.
pub fn kron_identity(n: usize, a: &CMat) -> CMat {
    identity(n).kronecker(a)
}

pub fn real_trace(a: &CMat) -> f64 {
    a.trace().re
}

/// Relative Hermitian defect `‖A − Aᴴ‖_F / ‖A‖_F` (0 for the zero matrix).
pub fn hermitian_defect(a: &CMat) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.adjoint()).norm() / norm
}

/// Returns `(A + Aᴴ)/2`.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5, 0.0)
}

/// Eigenvalues of a Hermitian matrix in ascending order, with eigenvectors
/// as matching columns.
pub fn hermitian_eigen(a: &CMat) -> (DVector<f64>, CMat) {
    let eig = hermitize(a).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    let (values, _) = hermitian_eigen(a);
    values.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Cholesky factorization of a Hermitian positive-definite matrix with a
/// Tikhonov fallback. The jitter `1e-12 · tr/dim` is only added when the
/// plain factorization fails.
pub struct HermitianFactor {
    chol: nalgebra::Cholesky<Complex64, nalgebra::Dyn>,
    pub jittered: bool,
}

impl HermitianFactor {
    pub fn new(a: &CMat) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Shape(format!(
                "expected square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        if n == 0 {
            return Err(Error::Shape("empty matrix".into()));
        }
        let h = hermitize(a);
        let (chol, jittered) = match h.clone().cholesky() {
            Some(ch) => (ch, false),
            None => {
                let scale = (real_trace(&h) / n as f64).abs().max(f64::MIN_POSITIVE);
                let mut reg = h;
                for i in 0..n {
                    reg[(i, i)] += c(JITTER * scale, 0.0);
                }
                match reg.cholesky() {
                    Some(ch) => (ch, true),
                    None => {
                        return Err(Error::Numerical(
                            "Hermitian factorization failed after regularization".into(),
                        ))
                    }
                }
            }
        };
        let factor = Self { chol, jittered };
        let cond = factor.condition_estimate();
        if !(cond <= MAX_CONDITION) {
            return Err(Error::Numerical(format!(
                "condition estimate {cond:.3e} exceeds {MAX_CONDITION:.0e}"
            )));
        }
        Ok(factor)
    }

    /// `(max Lᵢᵢ / min Lᵢᵢ)²`, a cheap lower bound on the 2-norm condition.
    pub fn condition_estimate(&self) -> f64 {
        let l = self.chol.l_dirty();
        let n = l.nrows();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let d = l[(i, i)].re.abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if lo == 0.0 {
            f64::INFINITY
        } else {
            (hi / lo).powi(2)
        }
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &CVec) -> CVec {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> CMat {
        hermitize(&self.chol.inverse())
    }
}

pub fn hermitian_inverse(a: &CMat) -> Result<CMat> {
    Ok(HermitianFactor::new(a)?.inverse())
}

/// Quadratic form `xᴴ A x` (real part).
pub fn quad_form(x: &CVec, a: &CMat) -> f64 {
    x.dotc(&(a * x)).re
}

/// Draws a vector of i.i.d. `CN(0, 1)` entries.
pub fn standard_complex_normal<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    use rand_distr::StandardNormal;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * s, im * s)
    })
}

/// Random Hermitian PSD matrix `B Bᴴ` scaled to unit average diagonal.
/// `rank` limits the number of columns of `B`.
pub fn random_psd<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> CMat {
    let mut b = CMat::zeros(n, rank.max(1));
    for j in 0..b.ncols() {
        b.set_column(j, &standard_complex_normal(rng, n));
    }
    let r = &b * b.adjoint();
    let tr = real_trace(&r);
    hermitize(&(r * c(n as f64 / tr, 0.0)))
}

pub fn random_complex_matrix<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let v = standard_complex_normal(rng, rows * cols);
    CMat::from_column_slice(rows, cols, v.as_slice())
}
