//! Uniform linear array responses, field boundaries, the Fresnel gain-loss
//! approximation and the bistatic transmit/receive coordinate maps.
//!
//! Arrays are centered at the origin with element `n` at offset `δ_n·d`,
//! `δ_n = (2n − N + 1)/2`. Angles are measured from broadside, in radians.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{inner, CMatrix};

/// Propagation speed used for every wavelength conversion.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_elements: usize,
    pub spacing: f64,
    pub wavelength: f64,
}

impl ArrayConfig {
    pub fn new(n_elements: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if n_elements < 2 {
            return Err(Error::arg("n_elements", "need at least 2 elements"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::arg("spacing", "must be positive"));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::arg("wavelength", "must be positive"));
        }
        Ok(Self {
            n_elements,
            spacing,
            wavelength,
        })
    }

    /// Array with `d = λ/2`.
    pub fn half_wavelength(n_elements: usize, wavelength: f64) -> Result<Self> {
        Self::new(n_elements, wavelength / 2.0, wavelength)
    }

    /// Normalized element offset δ_n for 0-based `n`.
    #[inline]
    pub fn delta(&self, n: usize) -> f64 {
        (2.0 * n as f64 - self.n_elements as f64 + 1.0) / 2.0
    }

    /// Physical aperture `N·d`.
    pub fn aperture(&self) -> f64 {
        self.n_elements as f64 * self.spacing
    }

    pub fn fraunhofer_distance(&self) -> f64 {
        2.0 * self.aperture().powi(2) / self.wavelength
    }

    pub fn fresnel_lower_boundary(&self) -> f64 {
        fresnel_lower_boundary(self.aperture(), self.wavelength)
    }

    pub fn is_half_wavelength(&self) -> bool {
        (self.spacing - self.wavelength / 2.0).abs() <= 1e-12 * self.wavelength
    }
}

/// Location relative to an array center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarCoord {
    pub range: f64,
    pub angle: f64,
}

impl PolarCoord {
    pub fn new(range: f64, angle: f64) -> Result<Self> {
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::arg("range", format!("must be positive, got {range}")));
        }
        if !(angle.abs() < FRAC_PI_2) {
            return Err(Error::arg(
                "angle",
                format!("must lie strictly inside (-pi/2, pi/2), got {angle}"),
            ));
        }
        Ok(Self { range, angle })
    }

    pub fn from_degrees(range: f64, angle_deg: f64) -> Result<Self> {
        Self::new(range, angle_deg.to_radians())
    }
}

pub fn wavelength_from_carrier(f_carrier: f64) -> Result<f64> {
    if !(f_carrier > 0.0 && f_carrier.is_finite()) {
        return Err(Error::arg("f_carrier", "must be positive"));
    }
    Ok(SPEED_OF_LIGHT / f_carrier)
}

pub fn fraunhofer_distance(aperture: f64, wavelength: f64) -> Result<f64> {
    if !(aperture > 0.0) || !(wavelength > 0.0) {
        return Err(Error::arg("aperture/wavelength", "must be positive"));
    }
    Ok(2.0 * aperture * aperture / wavelength)
}

/// Inner edge of the radiating near field, `0.62·sqrt(D³/λ)`.
pub fn fresnel_lower_boundary(aperture: f64, wavelength: f64) -> f64 {
    0.62 * (aperture.powi(3) / wavelength).sqrt()
}

/// Far-field steering vector `a(θ)`.
pub fn far_steering(cfg: &ArrayConfig, theta: f64) -> CMatrix {
    let k = 2.0 * PI * cfg.spacing * theta.sin() / cfg.wavelength;
    CMatrix::from_fn(cfg.n_elements, 1, |n, _| {
        Complex64::from_polar(1.0, k * cfg.delta(n))
    })
}

/// Distance from element `n` to the point `p`.
#[inline]
pub fn element_distance(cfg: &ArrayConfig, p: &PolarCoord, n: usize) -> f64 {
    let x = cfg.delta(n) * cfg.spacing;
    (p.range * p.range + x * x - 2.0 * p.range * x * p.angle.sin()).sqrt()
}

/// Near-field focusing vector `a(r, θ)` with exact element distances.
pub fn near_focusing(cfg: &ArrayConfig, p: &PolarCoord) -> CMatrix {
    let k = -2.0 * PI / cfg.wavelength;
    CMatrix::from_fn(cfg.n_elements, 1, |n, _| {
        Complex64::from_polar(1.0, k * (element_distance(cfg, p, n) - p.range))
    })
}

/// Second-order (Fresnel) approximation of [`near_focusing`].
pub fn fresnel_focusing(cfg: &ArrayConfig, p: &PolarCoord) -> CMatrix {
    let (s, c) = p.angle.sin_cos();
    let (d, lam, r) = (cfg.spacing, cfg.wavelength, p.range);
    CMatrix::from_fn(cfg.n_elements, 1, |n, _| {
        let dn = cfg.delta(n);
        let phase = dn * dn * d * d * c * c / (r * lam) - dn * (2.0 * d / lam) * s;
        Complex64::from_polar(1.0, -PI * phase)
    })
}

/// The integer upper-triangular matrix of the closed-form gain loss.
#[derive(Clone, Debug, PartialEq)]
pub struct FresnelW {
    entries: DMatrix<i64>,
}

impl FresnelW {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Entry at 1-based `(i, j)`; zero below the diagonal.
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[(i - 1, j - 1)]
    }

    /// Entries on the upper-triangular support, row-major.
    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        let m = self.dim();
        (0..m).flat_map(move |i| (i..m).map(move |j| self.entries[(i, j)]))
    }
}

pub fn fresnel_w_matrix(n_elements: usize) -> Result<FresnelW> {
    if !n_elements.is_multiple_of(2) {
        return Err(Error::Unsupported(format!(
            "gain-loss approximation needs an even element count, got {n_elements}"
        )));
    }
    if n_elements < 4 {
        return Err(Error::arg("n_elements", "need at least 4 elements"));
    }
    let n = n_elements as i64;
    let m = n_elements / 2 - 1;
    let entries = DMatrix::from_fn(m, m, |r, c| {
        let (i, j) = (r as i64 + 1, c as i64 + 1);
        if i <= j {
            (i - 1) * (i - 1) - j * j + (n - 1) * (j + 1 - i)
        } else {
            0
        }
    });
    Ok(FresnelW { entries })
}

/// Normalized gain loss of a far-field beam at a near-field point.
pub fn gain_loss_exact(cfg: &ArrayConfig, p: &PolarCoord) -> f64 {
    let a_far = far_steering(cfg, p.angle);
    let a_near = near_focusing(cfg, p);
    (1.0 - inner(&a_far, &a_near).norm() / cfg.n_elements as f64).clamp(0.0, 1.0)
}

/// Closed-form Fresnel approximation of [`gain_loss_exact`] for even `N`
/// and half-wavelength spacing.
pub fn gain_loss_approx(cfg: &ArrayConfig, p: &PolarCoord) -> Result<f64> {
    let w = fresnel_w_matrix(cfg.n_elements)?;
    if !cfg.is_half_wavelength() {
        return Err(Error::Unsupported(
            "gain-loss approximation is defined for half-wavelength spacing only".into(),
        ));
    }
    let n = cfg.n_elements as f64;
    let c = p.angle.cos();
    let k = cfg.wavelength * PI / (4.0 * p.range) * c * c;
    let sum: f64 = w.support().map(|wij| (k * wij as f64).cos()).sum();
    Ok(1.0 - (2.0 * n + 8.0 * sum).max(0.0).sqrt() / n)
}

/// Distance between the transmit and receive array centers.
pub fn center_offset(cfg_tx: &ArrayConfig, cfg_rx: &ArrayConfig) -> f64 {
    0.5 * (cfg_tx.aperture() + cfg_rx.aperture())
}

/// Law-of-cosines map between the two array frames. The map is its own
/// inverse once the roles of the array centers are exchanged.
pub(crate) fn bistatic_map(p: &PolarCoord, offset: f64) -> Result<PolarCoord> {
    let (r, s) = (p.range, p.angle.sin());
    let r2 = r * r + offset * offset - 2.0 * r * offset * s;
    if !(r2 > 0.0) {
        return Err(Error::Geometry(format!(
            "point ({r} m, {} rad) coincides with the other array center",
            p.angle
        )));
    }
    let r_other = r2.sqrt();
    let s_other = (offset - r * s) / r_other;
    if s_other.abs() > 1.0 {
        return Err(Error::Geometry(format!("|sin(theta)| = {} exceeds 1", s_other.abs())));
    }
    let angle = s_other.asin();
    if !(angle.abs() < FRAC_PI_2) {
        return Err(Error::Geometry("point lies on the array axis".into()));
    }
    Ok(PolarCoord {
        range: r_other,
        angle,
    })
}

/// Receive-frame coordinates of a point given in the transmit frame.
pub fn rx_geometry(tx: &PolarCoord, cfg_tx: &ArrayConfig, cfg_rx: &ArrayConfig) -> Result<PolarCoord> {
    bistatic_map(tx, center_offset(cfg_tx, cfg_rx))
}

/// Transmit-frame coordinates of a point given in the receive frame.
pub fn tx_geometry(rx: &PolarCoord, cfg_tx: &ArrayConfig, cfg_rx: &ArrayConfig) -> Result<PolarCoord> {
    bistatic_map(rx, center_offset(cfg_tx, cfg_rx))
}
