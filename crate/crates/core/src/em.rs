//! Shared electromagnetic vocabulary: frequency, directions, incident plane
//! waves and far-field samples.
//!
//! Coordinates follow the window-local frame: the skin lies in the `z = 0`
//! plane, the outdoor side is `z > 0` and the transmitted (indoor) half-space
//! is `z < 0`, i.e. `theta` in `(90, 180]` degrees. Straight-through
//! transmission is `theta = 180`.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space wave impedance (ohm).
pub const FREE_SPACE_IMPEDANCE: f64 = 376.730_313_668;

/// Complex Cartesian 3-vector used for fields and surface currents.
pub type CVec3 = Vector3<Complex64>;

pub(crate) fn complexify(v: &Vector3<f64>) -> CVec3 {
    v.map(|c| Complex64::new(c, 0.0))
}

pub(crate) fn cvec_zero() -> CVec3 {
    Vector3::from_element(Complex64::new(0.0, 0.0))
}

/// Operating frequency.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Frequency(f64);

impl Frequency {
    pub fn new(hertz: f64) -> Result<Self> {
        if !(hertz.is_finite() && hertz > 0.0) {
            return Err(invalid(format!("frequency must be positive, got {hertz} Hz")));
        }
        Ok(Self(hertz))
    }

    pub fn from_ghz(ghz: f64) -> Result<Self> {
        Self::new(ghz * 1e9)
    }

    pub fn hertz(self) -> f64 {
        self.0
    }

    /// Free-space wavelength `c / f` in meters.
    pub fn wavelength(self) -> f64 {
        wavelength(self)
    }

    /// Free-space wavenumber `2 pi / lambda` in rad/m.
    pub fn wavenumber(self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength()
    }
}

impl TryFrom<f64> for Frequency {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Frequency> for f64 {
    fn from(f: Frequency) -> f64 {
        f.0
    }
}

pub fn wavelength(f: Frequency) -> f64 {
    SPEED_OF_LIGHT / f.0
}

/// A direction on the unit sphere, stored in degrees.
///
/// `phi` is wrapped into `[0, 360)` and forced to zero at the poles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    theta_deg: f64,
    phi_deg: f64,
}

impl Direction {
    pub fn new(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        if !theta_deg.is_finite() || !phi_deg.is_finite() {
            return Err(Error::NonFinite("direction angle".into()));
        }
        if !(0.0..=180.0).contains(&theta_deg) {
            return Err(Error::OutOfRange {
                what: "theta (deg)",
                value: theta_deg,
                lo: 0.0,
                hi: 180.0,
            });
        }
        let mut phi = phi_deg.rem_euclid(360.0);
        if phi >= 360.0 {
            phi = 0.0;
        }
        if theta_deg == 0.0 || theta_deg == 180.0 {
            phi = 0.0;
        }
        Ok(Self {
            theta_deg,
            phi_deg: phi,
        })
    }

    /// Straight-through transmission direction (`theta = 180`).
    pub fn broadside_transmitted() -> Self {
        Self {
            theta_deg: 180.0,
            phi_deg: 0.0,
        }
    }

    /// Maps a planar-cut angle to a direction.
    ///
    /// Cut angles above 180 deg continue past the `-z` axis into the
    /// half-plane `phi0 + 180`, the convention used for transmitted-pattern
    /// cuts spanning `[90, 270]`.
    pub fn from_cut_angle(cut_deg: f64, phi0_deg: f64) -> Result<Self> {
        let c = cut_deg.rem_euclid(360.0);
        if c <= 180.0 {
            Self::new(c, phi0_deg)
        } else {
            Self::new(360.0 - c, phi0_deg + 180.0)
        }
    }

    pub fn from_unit_vector(r: &Vector3<f64>) -> Result<Self> {
        let n = r.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(invalid("direction vector must be non-zero"));
        }
        let z = (r.z / n).clamp(-1.0, 1.0);
        let theta = z.acos().to_degrees();
        let phi = r.y.atan2(r.x).to_degrees();
        Self::new(theta, phi)
    }

    /// Builds a direction in the transmitted half-space from direction
    /// cosines. Returns `None` outside the visible region `u^2 + v^2 <= 1`.
    pub fn from_cosines_transmitted(u: f64, v: f64) -> Option<Self> {
        let s2 = u * u + v * v;
        if s2 > 1.0 {
            return None;
        }
        let w = -(1.0 - s2).sqrt();
        Self::from_unit_vector(&Vector3::new(u, v, w)).ok()
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta_deg
    }

    pub fn phi_deg(&self) -> f64 {
        self.phi_deg
    }

    pub fn theta_rad(&self) -> f64 {
        self.theta_deg.to_radians()
    }

    pub fn phi_rad(&self) -> f64 {
        self.phi_deg.to_radians()
    }

    pub fn unit_vector(&self) -> Vector3<f64> {
        direction_to_unit_vector(*self)
    }

    /// `(sin, cos)` of theta, exact on the poles.
    fn theta_sin_cos(&self) -> (f64, f64) {
        if self.theta_deg == 0.0 {
            (0.0, 1.0)
        } else if self.theta_deg == 180.0 {
            (0.0, -1.0)
        } else {
            self.theta_rad().sin_cos()
        }
    }

    /// Direction cosine `sin(theta) cos(phi)`.
    pub fn u(&self) -> f64 {
        self.theta_sin_cos().0 * self.phi_rad().cos()
    }

    /// Direction cosine `sin(theta) sin(phi)`.
    pub fn v(&self) -> f64 {
        self.theta_sin_cos().0 * self.phi_rad().sin()
    }

    pub fn theta_hat(&self) -> Vector3<f64> {
        let (st, ct) = self.theta_sin_cos();
        let (sp, cp) = self.phi_rad().sin_cos();
        Vector3::new(ct * cp, ct * sp, -st)
    }

    pub fn phi_hat(&self) -> Vector3<f64> {
        let (sp, cp) = self.phi_rad().sin_cos();
        Vector3::new(-sp, cp, 0.0)
    }

    /// True for directions on the indoor side of the aperture.
    pub fn is_transmitted(&self) -> bool {
        self.theta_deg > 90.0
    }
}

pub fn direction_to_unit_vector(d: Direction) -> Vector3<f64> {
    let (st, ct) = d.theta_sin_cos();
    let (sp, cp) = d.phi_rad().sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    /// Electric field along `theta-hat` of the arrival direction (TM).
    Theta,
    /// Electric field along `phi-hat` of the arrival direction (TE).
    Phi,
}

/// Locally plane incident wave.
///
/// `direction` points from the aperture towards the source, so the wave
/// travels along `-direction`. Its phase is zero at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    pub direction: Direction,
    pub polarization: Polarization,
    /// Field magnitude in V/m.
    pub magnitude: f64,
    pub frequency: Frequency,
}

impl PlaneWave {
    pub fn new(
        direction: Direction,
        polarization: Polarization,
        magnitude: f64,
        frequency: Frequency,
    ) -> Result<Self> {
        if direction.theta_deg() >= 90.0 {
            return Err(Error::OutOfRange {
                what: "incidence theta (deg)",
                value: direction.theta_deg(),
                lo: 0.0,
                hi: 90.0,
            });
        }
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(invalid(format!("incident magnitude must be >= 0, got {magnitude}")));
        }
        Ok(Self {
            direction,
            polarization,
            magnitude,
            frequency,
        })
    }

    /// Unit propagation vector `k^inc / k0`.
    pub fn propagation_unit(&self) -> Vector3<f64> {
        -self.direction.unit_vector()
    }

    /// Wavevector in rad/m.
    pub fn wavevector(&self) -> Vector3<f64> {
        self.propagation_unit() * self.frequency.wavenumber()
    }

    /// TE basis vector (normal to the plane of incidence).
    pub fn te_unit(&self) -> Vector3<f64> {
        self.direction.phi_hat()
    }

    /// TM basis vector (in the plane of incidence).
    pub fn tm_unit(&self) -> Vector3<f64> {
        self.direction.theta_hat()
    }

    pub fn polarization_unit(&self) -> Vector3<f64> {
        match self.polarization {
            Polarization::Phi => self.te_unit(),
            Polarization::Theta => self.tm_unit(),
        }
    }

    /// `(TE, TM)` complex amplitudes of the incident field at `r`.
    pub fn te_tm_amplitudes_at(&self, r: &Vector3<f64>) -> (Complex64, Complex64) {
        let a = Complex64::from_polar(self.magnitude, -self.wavevector().dot(r));
        match self.polarization {
            Polarization::Phi => (a, Complex64::new(0.0, 0.0)),
            Polarization::Theta => (Complex64::new(0.0, 0.0), a),
        }
    }

    pub fn field_at(&self, r: &Vector3<f64>) -> CVec3 {
        let phase = Complex64::from_polar(self.magnitude, -self.wavevector().dot(r));
        complexify(&self.polarization_unit()) * phase
    }
}

/// Far-field sample in the spherical basis of `at`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexFieldSample {
    pub e_theta: Complex64,
    pub e_phi: Complex64,
    pub at: Direction,
    /// Set when `at` lies in the incident half-space, where the equivalent
    /// currents do not model the physical field.
    pub back_lobe: bool,
}

impl ComplexFieldSample {
    pub fn power(&self) -> f64 {
        self.e_theta.norm_sqr() + self.e_phi.norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn poles_and_receiver_direction() {
        let z = direction_to_unit_vector(Direction::new(0.0, 0.0).unwrap());
        assert_abs_diff_eq!(z, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
        let nz = direction_to_unit_vector(Direction::new(180.0, 0.0).unwrap());
        assert_abs_diff_eq!(nz, Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-15);

        let d = Direction::new(140.0, 30.0).unwrap();
        let r = d.unit_vector();
        assert!((r.x - 0.5567).abs() < 5e-4);
        assert!((r.y - 0.3214).abs() < 5e-4);
        assert!((r.z + 0.766).abs() < 5e-4);
        // printed cosines
        assert!((d.u() - 0.556).abs() < 1e-3);
        assert!((d.v() - 0.321).abs() < 1e-3);
    }

    #[test]
    fn wavelength_and_electrical_sizes() {
        let f = Frequency::from_ghz(26.0).unwrap();
        assert!((f.wavelength() - 11.5305e-3).abs() < 1e-7);
        assert!((3.7e-3 / f.wavelength() - 0.3209).abs() < 1e-4);
        assert!((18e-3 / f.wavelength() - 1.561).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Frequency::new(0.0).is_err());
        assert!(Frequency::new(-1.0).is_err());
        assert!(Direction::new(181.0, 0.0).is_err());
        assert!(Direction::new(f64::NAN, 0.0).is_err());
        let f = Frequency::from_ghz(26.0).unwrap();
        let grazing = Direction::new(90.0, 0.0).unwrap();
        assert!(PlaneWave::new(grazing, Polarization::Phi, 1.0, f).is_err());
    }

    #[test]
    fn pole_phi_is_canonical() {
        let d = Direction::new(180.0, 123.0).unwrap();
        assert_eq!(d.phi_deg(), 0.0);
        let w = Direction::new(30.0, -30.0).unwrap();
        assert!((w.phi_deg() - 330.0).abs() < 1e-12);
    }

    #[test]
    fn cut_angles_past_broadside_fold_over() {
        let d = Direction::from_cut_angle(200.0, 0.0).unwrap();
        assert!((d.theta_deg() - 160.0).abs() < 1e-12);
        assert!((d.phi_deg() - 180.0).abs() < 1e-12);
        assert!(d.u() < 0.0);
    }

    #[test]
    fn normal_incidence_phi_pol_is_y() {
        let f = Frequency::from_ghz(26.0).unwrap();
        let w = PlaneWave::new(Direction::new(0.0, 0.0).unwrap(), Polarization::Phi, 1.0, f).unwrap();
        assert_abs_diff_eq!(w.polarization_unit(), Vector3::y(), epsilon = 1e-15);
        assert!((w.wavevector().norm() - f.wavenumber()).abs() < 1e-9 * f.wavenumber());
    }

    proptest! {
        #[test]
        fn unit_vector_round_trip(theta in 1e-3f64..179.999, phi in 0.0f64..360.0) {
            let d = Direction::new(theta, phi).unwrap();
            let r = d.unit_vector();
            prop_assert!((r.norm() - 1.0).abs() < 1e-12);
            let back = Direction::from_unit_vector(&r).unwrap();
            prop_assert!((back.unit_vector() - r).norm() < 1e-9);
            let cos2 = d.theta_rad().cos().powi(2);
            prop_assert!((d.u().powi(2) + d.v().powi(2) + cos2 - 1.0).abs() < 1e-12);
        }

        #[test]
        fn polarization_is_transverse(theta in 0.0f64..89.9, phi in 0.0f64..360.0, theta_pol in any::<bool>()) {
            let f = Frequency::from_ghz(26.0).unwrap();
            let pol = if theta_pol { Polarization::Theta } else { Polarization::Phi };
            let w = PlaneWave::new(Direction::new(theta, phi).unwrap(), pol, 1.0, f).unwrap();
            prop_assert!(w.polarization_unit().dot(&w.propagation_unit()).abs() < 1e-12);
            prop_assert!((w.wavevector().norm() / f.wavenumber() - 1.0).abs() < 1e-9);
        }
    }
}
