//! Plane-wave transmission through a planar dielectric stack (characteristic
//! matrix cascade). Supplies the bare-window baseline.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::em::{Direction, Frequency};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub thickness_m: f64,
    pub permittivity: f64,
    #[serde(default)]
    pub loss_tangent: f64,
}

impl Layer {
    pub fn new(thickness_m: f64, permittivity: f64, loss_tangent: f64) -> Result<Self> {
        let layer = Self {
            thickness_m,
            permittivity,
            loss_tangent,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn lossless(thickness_m: f64, permittivity: f64) -> Result<Self> {
        Self::new(thickness_m, permittivity, 0.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.thickness_m.is_finite() && self.thickness_m > 0.0) {
            return Err(invalid(format!("layer thickness must be > 0, got {}", self.thickness_m)));
        }
        if !(self.permittivity.is_finite() && self.permittivity >= 1.0) {
            return Err(invalid(format!(
                "relative permittivity must be >= 1, got {}",
                self.permittivity
            )));
        }
        if !(self.loss_tangent.is_finite() && self.loss_tangent >= 0.0) {
            return Err(invalid(format!("loss tangent must be >= 0, got {}", self.loss_tangent)));
        }
        Ok(())
    }

    fn complex_permittivity(&self) -> Complex64 {
        Complex64::new(self.permittivity, -self.permittivity * self.loss_tangent)
    }
}

/// Layers ordered from the illuminated side, embedded in free space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let stack = Self { layers };
        stack.validate()?;
        Ok(stack)
    }

    /// 4-10-4 insulating glass: two 4 mm panes (eps_r = 5.5) around 10 mm of air.
    pub fn insulating_glass_4_10_4() -> Self {
        let glass = Layer {
            thickness_m: 4e-3,
            permittivity: 5.5,
            loss_tangent: 0.0,
        };
        let air = Layer {
            thickness_m: 10e-3,
            permittivity: 1.0,
            loss_tangent: 0.0,
        };
        Self {
            layers: vec![glass, air, glass],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layers.iter().try_for_each(Layer::validate)
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_m).sum()
    }

    pub fn reversed(&self) -> Self {
        Self {
            layers: self.layers.iter().rev().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StackPolarization {
    Te,
    Tm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackResponse {
    /// Tangential-field transmission, referenced from the entry face to the exit face.
    pub transmission: Complex64,
    pub reflection: Complex64,
}

type Mat2 = [[Complex64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn stack_response(
    stack: &LayerStack,
    f: Frequency,
    incidence: Direction,
    pol: StackPolarization,
) -> Result<StackResponse> {
    stack.validate()?;
    let theta = incidence.theta_rad();
    if incidence.theta_deg() >= 90.0 {
        return Err(Error::OutOfRange {
            what: "incidence theta (deg)",
            value: incidence.theta_deg(),
            lo: 0.0,
            hi: 90.0,
        });
    }
    let k0 = f.wavenumber();
    let sin2 = theta.sin().powi(2);
    let cos0 = Complex64::new(theta.cos(), 0.0);
    let one = Complex64::new(1.0, 0.0);
    let j = Complex64::new(0.0, 1.0);

    // normalized admittance of the bounding free space
    let y0 = match pol {
        StackPolarization::Te => cos0,
        StackPolarization::Tm => one / cos0,
    };

    let mut m: Mat2 = [[one, Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), one]];
    for layer in &stack.layers {
        let eps = layer.complex_permittivity();
        let kz_rel = (eps - sin2).sqrt();
        let y = match pol {
            StackPolarization::Te => kz_rel,
            StackPolarization::Tm => eps / kz_rel,
        };
        let delta = kz_rel * k0 * layer.thickness_m;
        let (c, s) = (delta.cos(), delta.sin());
        let lm: Mat2 = [[c, j * s / y], [j * y * s, c]];
        m = mat_mul(&m, &lm);
    }

    let num_common = y0 * m[0][0] + y0 * y0 * m[0][1];
    let tail = m[1][0] + y0 * m[1][1];
    let denom = num_common + tail;
    Ok(StackResponse {
        transmission: 2.0 * y0 / denom,
        reflection: (num_common - tail) / denom,
    })
}

pub fn stack_transmission(
    stack: &LayerStack,
    f: Frequency,
    incidence: Direction,
    pol: StackPolarization,
) -> Result<Complex64> {
    stack_response(stack, f, incidence, pol).map(|r| r.transmission)
}
