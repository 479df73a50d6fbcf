//! Excess path lengths, characteristic vectors and channel synthesis for the
//! plane (PWM), parabolic (ParWM) and spherical (SWM) wavefront models.
//!
//! For a path leaving the transmit centroid in direction `u` and reaching a
//! receiver at distance `D`, antenna `a` sees the excess length `Δ` over the
//! centroid-to-centroid distance:
//!
//! | model | `Δ(a)` |
//! |-------|--------|
//! | PWM   | `−a·u` |
//! | ParWM | `−a·u + (‖a‖² − (a·u)²) / 2D` |
//! | SWM   | `√(D² − 2D a·u + ‖a‖²) − D` |
//!
//! ParWM and PWM are the second and first order expansions of SWM in `1/D`.
//! Its characteristic vector has entries `exp(−j·2π/λ·Δ(a_j)) / √N`.
//!
//! Lengths stay in meters until the final phase is formed, and the SWM
//! difference is evaluated in a rationalised form so that `D ≫ ‖a‖` does not
//! cancel digits.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{rotation_from_directions, AntennaArray, Rotation, Vec3};
use crate::linalg::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveModel {
    Pwm,
    ParWm,
    Swm,
}

impl WaveModel {
    pub const ALL: [WaveModel; 3] = [WaveModel::Pwm, WaveModel::ParWm, WaveModel::Swm];

    /// Whether the model depends on the distance.
    pub fn is_curved(self) -> bool {
        !matches!(self, WaveModel::Pwm)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WaveModel::Pwm => "pwm",
            WaveModel::ParWm => "parwm",
            WaveModel::Swm => "swm",
        }
    }
}

impl fmt::Display for WaveModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WaveModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pwm" | "plane" => Ok(WaveModel::Pwm),
            "parwm" | "parabolic" => Ok(WaveModel::ParWm),
            "swm" | "spherical" => Ok(WaveModel::Swm),
            other => invalid(format!("unknown wave model `{other}`")),
        }
    }
}

/// One propagation path.
///
/// `u_r` and `delta` only matter for multi-antenna receivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Linear amplitude.
    pub rho: f64,
    /// Phase in `[0, 2π)`.
    pub phi: f64,
    /// Direction of departure, unit vector in the transmit frame.
    pub u_t: Vec3,
    /// Effective path length in meters.
    pub distance: f64,
    /// Direction of arrival in the receiver frame.
    pub u_r: Option<Vec3>,
    /// Rotation of the receiver frame about the link axis, radians.
    pub delta: f64,
}

impl Path {
    pub fn miso(rho: f64, phi: f64, u_t: Vec3, distance: f64) -> Result<Self> {
        let path = Self {
            rho,
            phi: phi.rem_euclid(2.0 * PI),
            u_t,
            distance,
            u_r: None,
            delta: 0.0,
        };
        path.validate()?;
        Ok(path)
    }

    pub fn mimo(
        rho: f64,
        phi: f64,
        u_t: Vec3,
        distance: f64,
        u_r: Vec3,
        delta: f64,
    ) -> Result<Self> {
        let path = Self {
            u_r: Some(u_r),
            delta,
            ..Self::miso(rho, phi, u_t, distance)?
        };
        path.validate()?;
        Ok(path)
    }

    /// `ρ·e^{jφ}`.
    pub fn gain(&self) -> Complex64 {
        Complex64::from_polar(self.rho, self.phi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return invalid(format!(
                "path amplitude must be finite and >= 0, got {}",
                self.rho
            ));
        }
        if !self.phi.is_finite() || !self.delta.is_finite() {
            return invalid("path angles must be finite");
        }
        check_distance(self.distance)?;
        check_unit(self.u_t, "departure direction")?;
        if let Some(u_r) = self.u_r {
            check_unit(u_r, "arrival direction")?;
        }
        Ok(())
    }
}

fn check_distance(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        invalid(format!("distance must be positive and finite, got {d}"))
    }
}

fn check_unit(u: Vec3, what: &str) -> Result<()> {
    if u.is_unit() {
        Ok(())
    } else {
        invalid(format!("{what} must be a unit vector (norm {})", u.norm()))
    }
}

fn check_wavelength(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        invalid(format!(
            "wavelength must be positive and finite, got {lambda}"
        ))
    }
}

/// Complex MISO channel (one entry per transmit antenna) and the wavelength it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelVector {
    pub entries: Vec<Complex64>,
    pub wavelength: f64,
}

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.entries)
    }
}

/// Unit-norm array response for one `(model, direction, distance)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicVector {
    pub entries: Vec<Complex64>,
    pub model: WaveModel,
    pub u_t: Vec3,
    pub distance: f64,
}

/// Excess length from antenna offset `a` without argument checks.
///
/// `a_dot_u` and `a_norm_sqr` are passed in so that callers scanning many
/// directions can reuse them.
#[inline]
pub(crate) fn excess_length(model: WaveModel, a_dot_u: f64, a_norm_sqr: f64, distance: f64) -> f64 {
    match model {
        WaveModel::Pwm => -a_dot_u,
        WaveModel::ParWm => -a_dot_u + (a_norm_sqr - a_dot_u * a_dot_u) / (2.0 * distance),
        WaveModel::Swm => {
            let numerator = a_norm_sqr - 2.0 * distance * a_dot_u;
            let root = (distance * distance - 2.0 * distance * a_dot_u + a_norm_sqr)
                .max(0.0)
                .sqrt();
            numerator / (root + distance)
        }
    }
}

/// Excess length `Δ` (meters) of antenna `a_t` for a single-antenna receiver.
///
/// `distance` is ignored for [`WaveModel::Pwm`] but must still be positive.
pub fn delta_miso(model: WaveModel, a_t: Vec3, u_t: Vec3, distance: f64) -> Result<f64> {
    check_unit(u_t, "departure direction")?;
    check_distance(distance)?;
    if !a_t.is_finite() {
        return invalid("antenna offset must be finite");
    }
    Ok(excess_length(model, a_t.dot(u_t), a_t.norm_sqr(), distance))
}

/// Spherical-wave excess length between transmit antenna `a_t` and receive
/// antenna `a_r`: `‖−a_t + D·u_t + R·a_r‖ − D`.
pub fn delta_swm_mimo(
    a_t: Vec3,
    a_r: Vec3,
    u_t: Vec3,
    distance: f64,
    rotation: &Rotation,
) -> Result<f64> {
    check_unit(u_t, "departure direction")?;
    check_distance(distance)?;
    if !a_t.is_finite() || !a_r.is_finite() {
        return invalid("antenna offsets must be finite");
    }
    let v = rotation.apply(a_r) - a_t;
    let far = (v + u_t * distance).norm();
    Ok((2.0 * distance * v.dot(u_t) + v.norm_sqr()) / (far + distance))
}

/// Fills `out` with the characteristic vector entries. No argument checks.
pub(crate) fn fill_characteristic(
    model: WaveModel,
    positions: &[Vec3],
    norms_sqr: &[f64],
    u_t: Vec3,
    distance: f64,
    wavenumber: f64,
    out: &mut [Complex64],
) {
    let amplitude = 1.0 / (positions.len() as f64).sqrt();
    for ((slot, a), n2) in out.iter_mut().zip(positions).zip(norms_sqr) {
        let delta = excess_length(model, a.dot(u_t), *n2, distance);
        let (s, c) = (wavenumber * delta).sin_cos();
        *slot = Complex64::new(amplitude * c, -amplitude * s);
    }
}

pub(crate) fn norms_sqr(array: &AntennaArray) -> Vec<f64> {
    array.positions().iter().map(|a| a.norm_sqr()).collect()
}

pub fn wavenumber(lambda: f64) -> f64 {
    2.0 * PI / lambda
}

/// `e_M(u_t, D)`: entry `j` is `exp(−j·2π/λ·Δ_M(a_j)) / √N`.
pub fn characteristic_vector(
    model: WaveModel,
    array: &AntennaArray,
    u_t: Vec3,
    distance: f64,
    lambda: f64,
) -> Result<CharacteristicVector> {
    check_wavelength(lambda)?;
    check_unit(u_t, "departure direction")?;
    check_distance(distance)?;
    if array.is_empty() {
        return invalid("empty array");
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); array.len()];
    fill_characteristic(
        model,
        array.positions(),
        &norms_sqr(array),
        u_t,
        distance,
        wavenumber(lambda),
        &mut entries,
    );
    Ok(CharacteristicVector {
        entries,
        model,
        u_t,
        distance,
    })
}

/// Multipath MISO channel `h = √N Σ_k ρ_k e^{jφ_k} e_M(u_k, D_k)`.
pub fn synth_miso(
    array: &AntennaArray,
    paths: &[Path],
    model: WaveModel,
    lambda: f64,
) -> Result<ChannelVector> {
    check_wavelength(lambda)?;
    if paths.is_empty() {
        return invalid("at least one path is required");
    }
    if array.is_empty() {
        return invalid("empty array");
    }
    let n = array.len();
    let scale = (n as f64).sqrt();
    let norms = norms_sqr(array);
    let k = wavenumber(lambda);
    let mut entries = vec![Complex64::new(0.0, 0.0); n];
    let mut atom = vec![Complex64::new(0.0, 0.0); n];
    for path in paths {
        path.validate()?;
        fill_characteristic(
            model,
            array.positions(),
            &norms,
            path.u_t,
            path.distance,
            k,
            &mut atom,
        );
        let g = path.gain() * scale;
        for (h, e) in entries.iter_mut().zip(&atom) {
            *h += g * e;
        }
    }
    Ok(ChannelVector {
        entries,
        wavelength: lambda,
    })
}

/// Single-path spherical-wave channel between two arrays, `N_r × N_t`, with
/// entries `ρ e^{jφ} e^{−j·2π/λ·Δ_ij}`.
pub fn synth_mimo_swm(
    tx: &AntennaArray,
    rx: &AntennaArray,
    path: &Path,
    lambda: f64,
) -> Result<CMatrix> {
    check_wavelength(lambda)?;
    path.validate()?;
    let Some(u_r) = path.u_r else {
        return invalid("a MIMO path needs an arrival direction");
    };
    let rotation = rotation_from_directions(path.u_t, u_r, path.delta)?;
    let k = wavenumber(lambda);
    let gain = path.gain();
    let rx_rotated: Vec<Vec3> = rx.positions().iter().map(|a| rotation.apply(*a)).collect();
    Ok(CMatrix::from_fn(rx.len(), tx.len(), |i, j| {
        let v = rx_rotated[i] - tx.positions()[j];
        let far = (v + path.u_t * path.distance).norm();
        let delta = (2.0 * path.distance * v.dot(path.u_t) + v.norm_sqr()) / (far + path.distance);
        gain * Complex64::from_polar(1.0, -k * delta)
    }))
}
