//! Uniform planar array layout and plane-wave array response.
//!
//! Positions are in wavelengths (λ = 1). Element `m` (1-based, labeled
//! row by row) sits at `[0, mod(m−1, rows_h)·d, ⌊(m−1)/rows_h⌋·d]`, so the
//! array lies in the y–z plane and broadside is the x axis.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CVec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    rows_h: usize,
    cols_v: usize,
    spacing: f64,
}

impl ArrayGeometry {
    pub fn new(rows_h: usize, cols_v: usize, spacing: f64) -> Result<Self> {
        if rows_h == 0 || cols_v == 0 {
            return Err(Error::Validation(format!(
                "array must have at least one element, got {rows_h}x{cols_v}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Validation(format!(
                "element spacing must be positive, got {spacing}"
            )));
        }
        Ok(Self {
            rows_h,
            cols_v,
            spacing,
        })
    }

    /// Square `side × side` array with half-wavelength spacing.
    pub fn square_half_wavelength(side: usize) -> Result<Self> {
        Self::new(side, side, 0.5)
    }

    pub fn rows_h(&self) -> usize {
        self.rows_h
    }

    pub fn cols_v(&self) -> usize {
        self.cols_v
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.rows_h * self.cols_v
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of element `m` (1-based) in wavelengths.
    pub fn element_position(&self, m: usize) -> Result<[f64; 3]> {
        if m == 0 || m > self.len() {
            return Err(Error::Index {
                index: m,
                len: self.len(),
            });
        }
        Ok(self.position0(m - 1))
    }

    fn position0(&self, idx: usize) -> [f64; 3] {
        [
            0.0,
            (idx % self.rows_h) as f64 * self.spacing,
            (idx / self.rows_h) as f64 * self.spacing,
        ]
    }

    /// `a(φ, ϑ)` with entries `exp(j kᵀ u_m)`.
    pub fn array_response(&self, angle: AngleCoordinate) -> CVec {
        self.response_for_wave_vector(angle.wave_vector())
    }

    pub fn response_for_wave_vector(&self, k: [f64; 3]) -> CVec {
        CVec::from_fn(self.len(), |idx, _| {
            let u = self.position0(idx);
            let phase = k[0] * u[0] + k[1] * u[1] + k[2] * u[2];
            c(phase.cos(), phase.sin())
        })
    }
}

/// Azimuth/elevation pair in radians, both within `[−π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleCoordinate {
    azimuth: f64,
    elevation: f64,
}

impl AngleCoordinate {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && (-FRAC_PI_2..=FRAC_PI_2).contains(&x);
        if !ok(azimuth) || !ok(elevation) {
            return Err(Error::Validation(format!(
                "angles must lie in [-pi/2, pi/2], got ({azimuth}, {elevation})"
            )));
        }
        Ok(Self { azimuth, elevation })
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    /// `k(φ, ϑ) = 2π [cosϑ cosφ, cosϑ sinφ, sinϑ]` for unit wavelength.
    pub fn wave_vector(&self) -> [f64; 3] {
        wave_vector(self.azimuth, self.elevation)
    }
}

pub(crate) fn wave_vector(azimuth: f64, elevation: f64) -> [f64; 3] {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    [2.0 * PI * ce * ca, 2.0 * PI * ce * sa, 2.0 * PI * se]
}
