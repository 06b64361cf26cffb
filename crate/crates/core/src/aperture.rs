//! Equivalent surface currents on the skin aperture and the far field they
//! radiate into the transmitted half-space.
//!
//! Each cell is homogenized: the locally transmitted fields are the incident
//! field filtered by the cell's transmission tensor, and the Love currents
//! `J^e = z x H+`, `J^m = E+ x z` are constant over the square pixel. The far
//! field is the pixel-integrated radiation sum evaluated in closed form.

use std::io::Write;

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::{ResponseTable, TransmissionTensor};
use crate::em::{complexify, cvec_zero, CVec3, ComplexFieldSample, Direction, Frequency, PlaneWave, FREE_SPACE_IMPEDANCE};
use crate::error::{invalid, Error, Result};

/// Reference far-field radius used when none is given (m).
pub const DEFAULT_RADIUS_M: f64 = 100.0;

/// P x Q grid of ring radii on a square lattice centred on the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmsLayout {
    p_count: usize,
    q_count: usize,
    pitch_m: f64,
    /// Row-major: `d1[p * q_count + q]`.
    d1_m: Vec<f64>,
    table_id: String,
}

impl EmsLayout {
    pub fn new(p_count: usize, q_count: usize, pitch_m: f64, d1_m: Vec<f64>, table_id: impl Into<String>) -> Result<Self> {
        if p_count == 0 || q_count == 0 {
            return Err(invalid("layout needs P, Q >= 1"));
        }
        if !(pitch_m.is_finite() && pitch_m > 0.0) {
            return Err(invalid(format!("lattice pitch must be > 0, got {pitch_m}")));
        }
        if d1_m.len() != p_count * q_count {
            return Err(Error::ShapeMismatch {
                expected: format!("{} cells", p_count * q_count),
                found: format!("{} cells", d1_m.len()),
            });
        }
        if d1_m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layout ring radius".into()));
        }
        Ok(Self {
            p_count,
            q_count,
            pitch_m,
            d1_m,
            table_id: table_id.into(),
        })
    }

    pub fn uniform(p_count: usize, q_count: usize, pitch_m: f64, d1: f64, table_id: impl Into<String>) -> Result<Self> {
        Self::new(p_count, q_count, pitch_m, vec![d1; p_count * q_count], table_id)
    }

    pub fn p_count(&self) -> usize {
        self.p_count
    }

    pub fn q_count(&self) -> usize {
        self.q_count
    }

    pub fn pitch_m(&self) -> f64 {
        self.pitch_m
    }

    pub fn table_id(&self) -> &str {
        &self.table_id
    }

    pub fn cells(&self) -> &[f64] {
        &self.d1_m
    }

    pub fn d1_at(&self, p: usize, q: usize) -> f64 {
        self.d1_m[p * self.q_count + q]
    }

    pub fn aperture_m(&self) -> (f64, f64) {
        aperture_of(self.p_count, self.q_count, self.pitch_m)
    }

    pub fn barycenter(&self, p: usize, q: usize) -> Vector3<f64> {
        barycenter(self.p_count, self.q_count, self.pitch_m, p, q)
    }

    /// Rows of the grid, `P` rows of `Q` ring radii.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.d1_m.chunks(self.q_count).map(|c| c.to_vec()).collect()
    }

    pub fn is_uniform(&self) -> bool {
        self.d1_m.iter().all(|v| *v == self.d1_m[0])
    }

    /// Checks pitch agreement and that every cell is inside the table range.
    pub fn check_table(&self, table: &ResponseTable) -> Result<()> {
        if (self.pitch_m - table.pitch_m()).abs() > 1e-9 * table.pitch_m() {
            return Err(invalid(format!(
                "layout pitch {} m differs from table pitch {} m",
                self.pitch_m,
                table.pitch_m()
            )));
        }
        let (lo, hi) = table.d1_range();
        for p in 0..self.p_count {
            for q in 0..self.q_count {
                let d1 = self.d1_at(p, q);
                if !(d1 >= lo && d1 <= hi) {
                    return Err(Error::CellOutOfRange { p, q, d1, lo, hi });
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn aperture_of(p_count: usize, q_count: usize, pitch_m: f64) -> (f64, f64) {
    (p_count as f64 * pitch_m, q_count as f64 * pitch_m)
}

pub(crate) fn barycenter(p_count: usize, q_count: usize, pitch_m: f64, p: usize, q: usize) -> Vector3<f64> {
    Vector3::new(
        (p as f64 - (p_count as f64 - 1.0) / 2.0) * pitch_m,
        (q as f64 - (q_count as f64 - 1.0) / 2.0) * pitch_m,
        0.0,
    )
}

/// Per-cell electric (A/m) and magnetic (V/m) surface-current coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentSheet {
    p_count: usize,
    q_count: usize,
    pitch_m: f64,
    frequency: Frequency,
    pub electric: Vec<CVec3>,
    pub magnetic: Vec<CVec3>,
}

impl CurrentSheet {
    pub fn new(
        p_count: usize,
        q_count: usize,
        pitch_m: f64,
        frequency: Frequency,
        electric: Vec<CVec3>,
        magnetic: Vec<CVec3>,
    ) -> Result<Self> {
        let n = p_count * q_count;
        if n == 0 {
            return Err(invalid("current sheet needs P, Q >= 1"));
        }
        if electric.len() != n || magnetic.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} cells"),
                found: format!("{} electric / {} magnetic", electric.len(), magnetic.len()),
            });
        }
        Ok(Self {
            p_count,
            q_count,
            pitch_m,
            frequency,
            electric,
            magnetic,
        })
    }

    pub fn zeros(p_count: usize, q_count: usize, pitch_m: f64, frequency: Frequency) -> Result<Self> {
        let n = p_count * q_count;
        Self::new(p_count, q_count, pitch_m, frequency, vec![cvec_zero(); n], vec![cvec_zero(); n])
    }

    pub fn p_count(&self) -> usize {
        self.p_count
    }

    pub fn q_count(&self) -> usize {
        self.q_count
    }

    pub fn pitch_m(&self) -> f64 {
        self.pitch_m
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn len(&self) -> usize {
        self.electric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electric.is_empty()
    }

    pub fn aperture_m(&self) -> (f64, f64) {
        aperture_of(self.p_count, self.q_count, self.pitch_m)
    }

    pub fn barycenter(&self, p: usize, q: usize) -> Vector3<f64> {
        barycenter(self.p_count, self.q_count, self.pitch_m, p, q)
    }

    pub fn same_shape(&self, other: &CurrentSheet) -> bool {
        self.p_count == other.p_count && self.q_count == other.q_count
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        let mut out = self.clone();
        out.electric.iter_mut().for_each(|j| *j *= alpha);
        out.magnetic.iter_mut().for_each(|j| *j *= alpha);
        out
    }
}

/// Locally transmitted `(E+, H+)` at `at` for one cell tensor.
pub fn local_transmitted_fields(tensor: &TransmissionTensor, incident: &PlaneWave, at: &Vector3<f64>) -> (CVec3, CVec3) {
    let (a_te, a_tm) = incident.te_tm_amplitudes_at(at);
    let (o_te, o_tm) = tensor.apply(a_te, a_tm);
    let e = complexify(&incident.te_unit()) * o_te + complexify(&incident.tm_unit()) * o_tm;
    let k_hat = complexify(&incident.propagation_unit());
    let h = k_hat.cross(&e) / Complex64::new(FREE_SPACE_IMPEDANCE, 0.0);
    (e, h)
}

/// Love currents `(J^e, J^m)` from the locally transmitted fields.
pub fn love_currents(e: &CVec3, h: &CVec3) -> (CVec3, CVec3) {
    let z = complexify(&Vector3::z());
    (z.cross(h), e.cross(&z))
}

fn check_frequency(a: Frequency, b: Frequency) -> Result<()> {
    if (a.hertz() - b.hertz()).abs() > 1e-9 * a.hertz() {
        return Err(invalid(format!(
            "frequency mismatch: incident {} Hz vs table {} Hz",
            a.hertz(),
            b.hertz()
        )));
    }
    Ok(())
}

/// Currents for arbitrary per-cell tensors (row-major, one per cell).
pub fn currents_from_tensors(
    p_count: usize,
    q_count: usize,
    pitch_m: f64,
    tensors: &[TransmissionTensor],
    incident: &PlaneWave,
) -> Result<CurrentSheet> {
    if tensors.len() != p_count * q_count {
        return Err(Error::ShapeMismatch {
            expected: format!("{} tensors", p_count * q_count),
            found: format!("{}", tensors.len()),
        });
    }
    let mut electric = Vec::with_capacity(tensors.len());
    let mut magnetic = Vec::with_capacity(tensors.len());
    for p in 0..p_count {
        for q in 0..q_count {
            let r = barycenter(p_count, q_count, pitch_m, p, q);
            let (e, h) = local_transmitted_fields(&tensors[p * q_count + q], incident, &r);
            let (je, jm) = love_currents(&e, &h);
            electric.push(je);
            magnetic.push(jm);
        }
    }
    CurrentSheet::new(p_count, q_count, pitch_m, incident.frequency, electric, magnetic)
}

/// Currents of a uniform aperture (every cell shares one tensor); used for
/// the bare-glass and hollow-window baselines.
pub fn uniform_currents(
    p_count: usize,
    q_count: usize,
    pitch_m: f64,
    tensor: TransmissionTensor,
    incident: &PlaneWave,
) -> Result<CurrentSheet> {
    currents_from_tensors(p_count, q_count, pitch_m, &vec![tensor; p_count * q_count], incident)
}

pub fn equivalent_currents(layout: &EmsLayout, table: &ResponseTable, incident: &PlaneWave) -> Result<CurrentSheet> {
    layout.check_table(table)?;
    check_frequency(incident.frequency, table.frequency())?;
    let tensors = layout
        .cells()
        .iter()
        .map(|d1| table.lookup_tensor(*d1))
        .collect::<Result<Vec<_>>>()?;
    currents_from_tensors(layout.p_count(), layout.q_count(), layout.pitch_m(), &tensors, incident)
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Closed-form `\int_{pixel} exp(j k0 r_hat . r') dr'` over the square pixel of
/// side `pitch_m` centred on `barycenter` (in the `z = 0` plane).
pub fn pixel_integral(direction: Direction, pitch_m: f64, barycenter: &Vector3<f64>, frequency: Frequency) -> Complex64 {
    let k0 = frequency.wavenumber();
    let (u, v) = (direction.u(), direction.v());
    let envelope = pitch_m * pitch_m * sinc(k0 * u * pitch_m / 2.0) * sinc(k0 * v * pitch_m / 2.0);
    Complex64::from_polar(1.0, k0 * (u * barycenter.x + v * barycenter.y)) * envelope
}

/// Minimum far-field radius `2 L^2 / lambda` for the sheet's larger side.
pub fn far_field_distance(currents: &CurrentSheet) -> f64 {
    let (lx, ly) = currents.aperture_m();
    2.0 * lx.max(ly).powi(2) / currents.frequency().wavelength()
}

fn check_radius(currents: &CurrentSheet, radius_m: f64) -> Result<()> {
    if !(radius_m.is_finite() && radius_m > 0.0) {
        return Err(invalid(format!("observation radius must be > 0, got {radius_m}")));
    }
    let ff = far_field_distance(currents);
    if radius_m < ff {
        log::warn!("radius {radius_m} m is inside the far-field distance {ff:.3} m");
    }
    Ok(())
}

/// Full Cartesian far field, radial part included (numerically zero).
pub fn transmitted_field_vector(currents: &CurrentSheet, at: Direction, radius_m: f64) -> CVec3 {
    let k0 = currents.frequency().wavenumber();
    let delta = currents.pitch_m();
    let (u, v) = (at.u(), at.v());
    let (pc, qc) = (currents.p_count(), currents.q_count());

    let ex: Vec<Complex64> = (0..pc)
        .map(|p| Complex64::from_polar(1.0, k0 * u * barycenter(pc, qc, delta, p, 0).x))
        .collect();
    let ey: Vec<Complex64> = (0..qc)
        .map(|q| Complex64::from_polar(1.0, k0 * v * barycenter(pc, qc, delta, 0, q).y))
        .collect();

    // only tangential components are non-zero
    let mut se = [Complex64::new(0.0, 0.0); 2];
    let mut sm = [Complex64::new(0.0, 0.0); 2];
    for (p, exp_x) in ex.iter().enumerate() {
        let mut row_e = [Complex64::new(0.0, 0.0); 2];
        let mut row_m = [Complex64::new(0.0, 0.0); 2];
        let base = p * qc;
        for (q, exp_y) in ey.iter().enumerate() {
            let je = &currents.electric[base + q];
            let jm = &currents.magnetic[base + q];
            row_e[0] += je.x * exp_y;
            row_e[1] += je.y * exp_y;
            row_m[0] += jm.x * exp_y;
            row_m[1] += jm.y * exp_y;
        }
        for i in 0..2 {
            se[i] += row_e[i] * exp_x;
            sm[i] += row_m[i] * exp_x;
        }
    }
    let envelope = delta * delta * sinc(k0 * u * delta / 2.0) * sinc(k0 * v * delta / 2.0);
    let zero = Complex64::new(0.0, 0.0);
    let se = CVec3::new(se[0], se[1], zero) * Complex64::new(envelope, 0.0);
    let sm = CVec3::new(sm[0], sm[1], zero) * Complex64::new(envelope, 0.0);

    let r_hat = complexify(&at.unit_vector());
    let radiated = r_hat.cross(&r_hat.cross(&se)) * Complex64::new(FREE_SPACE_IMPEDANCE, 0.0) + r_hat.cross(&sm);
    let prefactor = Complex64::new(0.0, k0 / (4.0 * std::f64::consts::PI))
        * Complex64::from_polar(1.0 / radius_m, -k0 * radius_m);
    radiated * prefactor
}

/// Far field radiated by the sheet towards `at` at distance `radius_m`.
pub fn transmitted_field(currents: &CurrentSheet, at: Direction, radius_m: f64) -> Result<ComplexFieldSample> {
    check_radius(currents, radius_m)?;
    Ok(project(currents, at, radius_m))
}

fn project(currents: &CurrentSheet, at: Direction, radius_m: f64) -> ComplexFieldSample {
    let e = transmitted_field_vector(currents, at, radius_m);
    let th = complexify(&at.theta_hat());
    let ph = complexify(&at.phi_hat());
    ComplexFieldSample {
        e_theta: th.dot(&e),
        e_phi: ph.dot(&e),
        at,
        back_lobe: !at.is_transmitted(),
    }
}

/// Direction set of a pattern evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatternCut {
    /// Planar cut at fixed `phi`, cut angle swept from `start_deg` to `stop_deg`
    /// (angles past 180 continue into the `phi + 180` half-plane).
    Theta {
        phi_deg: f64,
        start_deg: f64,
        stop_deg: f64,
        samples: usize,
    },
    /// Regular `u-v` grid over `[-1, 1]^2`, visible region only, transmitted side.
    Uv { samples_u: usize, samples_v: usize },
}

impl PatternCut {
    /// `[90, 270]` deg in 0.25 deg steps.
    pub fn theta_cut(phi_deg: f64) -> Self {
        Self::Theta {
            phi_deg,
            start_deg: 90.0,
            stop_deg: 270.0,
            samples: 721,
        }
    }

    pub fn uv_grid(samples: usize) -> Self {
        Self::Uv {
            samples_u: samples,
            samples_v: samples,
        }
    }

    fn points(&self) -> Result<Vec<(Option<f64>, Direction)>> {
        match *self {
            PatternCut::Theta {
                phi_deg,
                start_deg,
                stop_deg,
                samples,
            } => {
                if samples < 2 {
                    return Err(invalid("theta cut needs at least 2 samples"));
                }
                (0..samples)
                    .map(|i| {
                        let c = start_deg + (stop_deg - start_deg) * i as f64 / (samples - 1) as f64;
                        Direction::from_cut_angle(c, phi_deg).map(|d| (Some(c), d))
                    })
                    .collect()
            }
            PatternCut::Uv { samples_u, samples_v } => {
                if samples_u < 2 || samples_v < 2 {
                    return Err(invalid("u-v grid needs at least 2 samples per axis"));
                }
                let axis = |i: usize, n: usize| -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                let mut pts = Vec::new();
                for iv in 0..samples_v {
                    for iu in 0..samples_u {
                        let (u, v) = (axis(iu, samples_u), axis(iv, samples_v));
                        if let Some(d) = Direction::from_cosines_transmitted(u, v) {
                            pts.push((None, d));
                        }
                    }
                }
                Ok(pts)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSample {
    /// Cut angle for planar cuts; `None` on u-v grids.
    pub cut_deg: Option<f64>,
    pub direction: Direction,
    pub e_phi: Complex64,
    pub e_theta: Complex64,
}

impl PatternSample {
    pub fn power(&self) -> f64 {
        self.e_phi.norm_sqr() + self.e_theta.norm_sqr()
    }

    pub fn power_phi(&self) -> f64 {
        self.e_phi.norm_sqr()
    }

    pub fn u(&self) -> f64 {
        self.direction.u()
    }

    pub fn v(&self) -> f64 {
        self.direction.v()
    }

    /// Abscissa for plotting: cut angle or canonical theta.
    pub fn theta_label(&self) -> f64 {
        self.cut_deg.unwrap_or(self.direction.theta_deg())
    }

    pub fn phi_label(&self, cut: &PatternCut) -> f64 {
        match cut {
            PatternCut::Theta { phi_deg, .. } => *phi_deg,
            PatternCut::Uv { .. } => self.direction.phi_deg(),
        }
    }
}

pub const PATTERN_CSV_HEADER: [&str; 9] = [
    "theta_deg",
    "phi_deg",
    "u",
    "v",
    "e_phi_re",
    "e_phi_im",
    "e_theta_re",
    "e_theta_im",
    "power_db",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PatternTable {
    pub cut: PatternCut,
    pub radius_m: f64,
    /// Fields are absolute; when set, `power_db` in CSV output is relative to the table peak.
    pub normalized: bool,
    pub samples: Vec<PatternSample>,
}

impl PatternTable {
    pub fn peak_power(&self) -> f64 {
        self.samples.iter().map(|s| s.power()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let reference = if self.normalized { self.peak_power() } else { 1.0 };
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(PATTERN_CSV_HEADER)?;
        for s in &self.samples {
            let power_db = 10.0 * (s.power() / reference).log10();
            w.write_record([
                s.theta_label().to_string(),
                s.phi_label(&self.cut).to_string(),
                s.u().to_string(),
                s.v().to_string(),
                s.e_phi.re.to_string(),
                s.e_phi.im.to_string(),
                s.e_theta.re.to_string(),
                s.e_theta.im.to_string(),
                power_db.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates the far field over a cut; directions are processed in parallel
/// and returned in sampling order.
pub fn pattern_cut(currents: &CurrentSheet, cut: PatternCut, radius_m: f64) -> Result<PatternTable> {
    check_radius(currents, radius_m)?;
    let points = cut.points()?;
    if points.is_empty() {
        return Err(invalid("pattern cut has no visible directions"));
    }
    let samples = points
        .par_iter()
        .map(|(c, d)| {
            let s = project(currents, *d, radius_m);
            PatternSample {
                cut_deg: *c,
                direction: *d,
                e_phi: s.e_phi,
                e_theta: s.e_theta,
            }
        })
        .collect();
    Ok(PatternTable {
        cut,
        radius_m,
        normalized: false,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::Polarization;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const PITCH: f64 = 3.7e-3;

    fn f26() -> Frequency {
        Frequency::from_ghz(26.0).unwrap()
    }

    fn normal_wave() -> PlaneWave {
        PlaneWave::new(Direction::new(0.0, 0.0).unwrap(), Polarization::Phi, 1.0, f26()).unwrap()
    }

    #[test]
    fn identity_tensor_passes_field_through() {
        let w = normal_wave();
        let (e, h) = local_transmitted_fields(&TransmissionTensor::identity(), &w, &Vector3::zeros());
        assert!((e - w.field_at(&Vector3::zeros())).norm() < 1e-15);
        assert!((h.norm() - 1.0 / FREE_SPACE_IMPEDANCE).abs() < 1e-15);
        assert!((h.norm() - 2.6544e-3).abs() < 1e-7);

        let (e0, h0) = local_transmitted_fields(&TransmissionTensor::zero(), &w, &Vector3::zeros());
        assert_eq!(e0.norm(), 0.0);
        assert_eq!(h0.norm(), 0.0);

        let t = Complex64::from_polar(0.5, -std::f64::consts::FRAC_PI_2);
        let (e, _) = local_transmitted_fields(&TransmissionTensor::uniform(t), &w, &Vector3::zeros());
        assert!((e.norm() - 0.5).abs() < 1e-15);
        assert!((e.y.arg() + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn uniform_identity_currents() {
        let sheet = uniform_currents(3, 4, PITCH, TransmissionTensor::identity(), &normal_wave()).unwrap();
        for (je, jm) in sheet.electric.iter().zip(&sheet.magnetic) {
            assert!((jm.norm() - 1.0).abs() < 1e-15);
            assert!((je.norm() - 1.0 / FREE_SPACE_IMPEDANCE).abs() < 1e-15);
            assert_eq!(je.z.norm(), 0.0);
            assert_eq!(jm.z.norm(), 0.0);
            assert_eq!(*je, sheet.electric[0]);
        }
    }

    #[test]
    fn current_phase_follows_tensor_gradient() {
        let (pc, qc) = (6, 2);
        let step = 0.4;
        let tensors: Vec<_> = (0..pc * qc)
            .map(|i| TransmissionTensor::uniform(Complex64::from_polar(0.9, -step * (i / qc) as f64)))
            .collect();
        let sheet = currents_from_tensors(pc, qc, PITCH, &tensors, &normal_wave()).unwrap();
        for p in 1..pc {
            let a = sheet.magnetic[p * qc].x;
            let b = sheet.magnetic[(p - 1) * qc].x;
            let dphi = (a / b).arg();
            assert!((dphi + step).abs() < 1e-12);
            let ae = sheet.electric[p * qc].y;
            let be = sheet.electric[(p - 1) * qc].y;
            assert!(((ae / be).arg() + step).abs() < 1e-12);
        }
    }

    #[test]
    fn pixel_integral_special_cases() {
        let bs = Direction::broadside_transmitted();
        let i = pixel_integral(bs, PITCH, &Vector3::new(PITCH, -2.0 * PITCH, 0.0), f26());
        assert_relative_eq!(i.re, PITCH * PITCH, max_relative = 1e-15);
        assert!(i.im.abs() < 1e-20);
        let d = Direction::new(130.0, 40.0).unwrap();
        let c = pixel_integral(d, PITCH, &Vector3::zeros(), f26());
        assert!(c.re > 0.0 && c.im == 0.0);
    }

    #[test]
    fn single_cell_broadside_closed_form() {
        let w = normal_wave();
        let sheet = uniform_currents(1, 1, PITCH, TransmissionTensor::identity(), &w).unwrap();
        let r = 7.5;
        let s = transmitted_field(&sheet, Direction::broadside_transmitted(), r).unwrap();
        let k0 = f26().wavenumber();
        // Huygens element: E_phi = -j k0 D^2 E0 exp(-j k0 r) / (2 pi r)
        let expected = Complex64::new(0.0, -k0 * PITCH * PITCH / (2.0 * std::f64::consts::PI * r))
            * Complex64::from_polar(1.0, -k0 * r);
        assert!((s.e_phi - expected).norm() < 1e-12 * expected.norm());
        assert!(s.e_theta.norm() < 1e-12 * expected.norm());
        assert!(!s.back_lobe);
    }

    #[test]
    fn rejects_non_positive_radius() {
        let sheet = uniform_currents(2, 2, PITCH, TransmissionTensor::identity(), &normal_wave()).unwrap();
        assert!(transmitted_field(&sheet, Direction::broadside_transmitted(), 0.0).is_err());
        let back = transmitted_field(&sheet, Direction::new(10.0, 0.0).unwrap(), 10.0).unwrap();
        assert!(back.back_lobe);
    }

    #[test]
    fn out_of_range_cell_is_named() {
        let table = crate::atom::default_surrogate_table(&crate::atom::FeasibilitySet::benchmark(), 11, PITCH, f26()).unwrap();
        let mut d1 = vec![1.0e-3; 6];
        d1[4] = 2.0e-3;
        let layout = EmsLayout::new(2, 3, PITCH, d1, "surrogate").unwrap();
        match equivalent_currents(&layout, &table, &normal_wave()) {
            Err(Error::CellOutOfRange { p, q, .. }) => assert_eq!((p, q), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pattern_cut_ordering_and_errors() {
        let sheet = uniform_currents(4, 4, PITCH, TransmissionTensor::identity(), &normal_wave()).unwrap();
        let cut = PatternCut::Theta {
            phi_deg: 0.0,
            start_deg: 90.0,
            stop_deg: 270.0,
            samples: 1,
        };
        assert!(pattern_cut(&sheet, cut, 100.0).is_err());
        let t = pattern_cut(&sheet, PatternCut::theta_cut(0.0), 100.0).unwrap();
        assert_eq!(t.samples.len(), 721);
        assert!(t.samples.windows(2).all(|w| w[0].cut_deg < w[1].cut_deg));
        let peak = t
            .samples
            .iter()
            .max_by(|a, b| a.power_phi().total_cmp(&b.power_phi()))
            .unwrap();
        assert!((peak.cut_deg.unwrap() - 180.0).abs() < 1e-9);

        let uv = pattern_cut(&sheet, PatternCut::uv_grid(21), 100.0).unwrap();
        assert!(uv.samples.iter().all(|s| s.u().powi(2) + s.v().powi(2) <= 1.0 + 1e-12));

        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta_deg,phi_deg,u,v,e_phi_re,e_phi_im,e_theta_re,e_theta_im,power_db\n"));
        assert_eq!(text.lines().count(), 722);
    }

    fn random_sheet(seed: u64, pc: usize, qc: usize) -> CurrentSheet {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = pc * qc;
        let z = Complex64::new(0.0, 0.0);
        let electric = (0..n).map(|_| CVec3::new(c() / 377.0, c() / 377.0, z)).collect();
        let magnetic = (0..n).map(|_| CVec3::new(c(), c(), z)).collect();
        CurrentSheet::new(pc, qc, PITCH, f26(), electric, magnetic).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn field_is_linear_in_currents(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0, th in 90.5f64..180.0, ph in 0.0f64..360.0) {
            let sheet = random_sheet(seed, 5, 4);
            let alpha = Complex64::new(re, im);
            let d = Direction::new(th, ph).unwrap();
            let a = transmitted_field_vector(&sheet, d, 50.0) * alpha;
            let b = transmitted_field_vector(&sheet.scaled(alpha), d, 50.0);
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
        }

        #[test]
        fn field_is_transverse_and_decays_as_one_over_r(seed in any::<u64>(), th in 90.5f64..180.0, ph in 0.0f64..360.0) {
            let sheet = random_sheet(seed, 4, 6);
            let d = Direction::new(th, ph).unwrap();
            let e = transmitted_field_vector(&sheet, d, 50.0);
            let radial = complexify(&d.unit_vector()).dot(&e).norm();
            prop_assert!(radial < 1e-9 * e.norm());
            let near = transmitted_field(&sheet, d, 40.0).unwrap();
            let far = transmitted_field(&sheet, d, 400.0).unwrap();
            let a = near.power().sqrt() * 40.0;
            let b = far.power().sqrt() * 400.0;
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }

        #[test]
        fn uniform_sheet_factorizes_into_array_factor(th in 90.0f64..180.0, ph in 0.0f64..360.0) {
            let (pc, qc) = (7, 5);
            let w = normal_wave();
            let sheet = uniform_currents(pc, qc, PITCH, TransmissionTensor::identity(), &w).unwrap();
            let single = uniform_currents(1, 1, PITCH, TransmissionTensor::identity(), &w).unwrap();
            let d = Direction::new(th, ph).unwrap();
            let k0 = f26().wavenumber();
            let mut af = Complex64::new(0.0, 0.0);
            for p in 0..pc {
                for q in 0..qc {
                    let r = sheet.barycenter(p, q);
                    af += Complex64::from_polar(1.0, k0 * (d.u() * r.x + d.v() * r.y));
                }
            }
            let full = transmitted_field_vector(&sheet, d, 100.0);
            let element = transmitted_field_vector(&single, d, 100.0) * af;
            prop_assert!((full - element).norm() <= 1e-10 * full.norm().max(element.norm()).max(1e-30));
        }
    }

    #[test]
    fn mirror_symmetric_layout_gives_symmetric_cut() {
        let (pc, qc) = (8, 3);
        let tensors: Vec<_> = (0..pc * qc)
            .map(|i| {
                let p = i / qc;
                let mirrored = p.min(pc - 1 - p) as f64;
                TransmissionTensor::uniform(Complex64::from_polar(0.6 + 0.05 * mirrored, -0.7 * mirrored))
            })
            .collect();
        let sheet = currents_from_tensors(pc, qc, PITCH, &tensors, &normal_wave()).unwrap();
        for delta in [1.0, 7.5, 23.0, 61.0, 89.0] {
            let a = transmitted_field(&sheet, Direction::new(180.0 - delta, 0.0).unwrap(), 100.0).unwrap();
            let b = transmitted_field(&sheet, Direction::new(180.0 - delta, 180.0).unwrap(), 100.0).unwrap();
            assert!((a.power().sqrt() - b.power().sqrt()).abs() <= 1e-9 * a.power().sqrt());
        }
    }

    #[test]
    fn aperture_doubling_adds_twelve_db() {
        let w = normal_wave();
        let bs = Direction::broadside_transmitted();
        let small = uniform_currents(30, 30, PITCH, TransmissionTensor::identity(), &w).unwrap();
        let large = uniform_currents(60, 60, PITCH, TransmissionTensor::identity(), &w).unwrap();
        let a = transmitted_field(&small, bs, 100.0).unwrap().power();
        let b = transmitted_field(&large, bs, 100.0).unwrap().power();
        assert!((10.0 * (b / a).log10() - 12.0412).abs() < 1e-3);
        assert!((b / a - 16.0).abs() < 1e-9);
    }
}
