//! Layout synthesis: ideal currents by phase conjugation towards the
//! receiver, then ring-radius selection by current matching.
//!
//! The matching target carries unit amplitude (the incident magnitude) and a
//! global phase reference chosen to maximize the field received along the
//! steering direction. Both synthesizers match against the same target.

pub mod pso;

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aperture::{barycenter, equivalent_currents, love_currents, local_transmitted_fields, pixel_integral, CurrentSheet, EmsLayout};
use crate::atom::{ResponseTable, TransmissionTensor};
use crate::em::{CVec3, Direction, Frequency, PlaneWave, Polarization, FREE_SPACE_IMPEDANCE};
use crate::error::{invalid, Error, Result};

pub use pso::{minimize, Boundary, OptimizerConfig, SwarmOutcome};

/// Default number of ring radii examined by the per-cell search.
pub const DEFAULT_SEARCH_POINTS: usize = 701;

/// Resolution of the phase-reference scan (bins over one turn).
const REFERENCE_BINS: usize = 1440;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisSpec {
    pub receiver: Direction,
    pub incident: PlaneWave,
    pub p_count: usize,
    pub q_count: usize,
    pub pitch_m: f64,
    pub table_id: String,
    pub optimizer: OptimizerConfig,
    /// Ring radii tried per cell by the exhaustive search.
    pub search_points: usize,
}

impl SynthesisSpec {
    pub fn new(
        receiver: Direction,
        incident: PlaneWave,
        p_count: usize,
        q_count: usize,
        pitch_m: f64,
        table_id: impl Into<String>,
    ) -> Result<Self> {
        let spec = Self {
            receiver,
            incident,
            p_count,
            q_count,
            pitch_m,
            table_id: table_id.into(),
            optimizer: OptimizerConfig::default(),
            search_points: DEFAULT_SEARCH_POINTS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn frequency(&self) -> Frequency {
        self.incident.frequency
    }

    pub fn validate(&self) -> Result<()> {
        if !self.receiver.is_transmitted() {
            return Err(Error::OutOfRange {
                what: "receiver theta (deg)",
                value: self.receiver.theta_deg(),
                lo: 90.0,
                hi: 180.0,
            });
        }
        if self.p_count == 0 || self.q_count == 0 {
            return Err(invalid("synthesis needs P, Q >= 1"));
        }
        if !(self.pitch_m.is_finite() && self.pitch_m > 0.0) {
            return Err(invalid(format!("lattice pitch must be > 0, got {}", self.pitch_m)));
        }
        if self.search_points < 2 {
            return Err(invalid("per-cell search needs at least 2 points"));
        }
        self.optimizer.validate()
    }

    fn check_table(&self, table: &ResponseTable) -> Result<()> {
        self.validate()?;
        if table.id() != self.table_id {
            return Err(invalid(format!(
                "spec refers to table '{}' but '{}' was supplied",
                self.table_id,
                table.id()
            )));
        }
        if (table.pitch_m() - self.pitch_m).abs() > 1e-9 * self.pitch_m {
            return Err(invalid(format!(
                "spec pitch {} m differs from table pitch {} m",
                self.pitch_m,
                table.pitch_m()
            )));
        }
        let (fs, ft) = (self.frequency().hertz(), table.frequency().hertz());
        if (fs - ft).abs() > 1e-9 * fs {
            return Err(invalid(format!("spec frequency {fs} Hz differs from table frequency {ft} Hz")));
        }
        Ok(())
    }

    fn cell_count(&self) -> usize {
        self.p_count * self.q_count
    }
}

/// Conjugate phases `-arg(pixel integral towards the receiver)`, row-major.
pub fn ideal_current_phases(spec: &SynthesisSpec) -> Vec<f64> {
    let k0 = spec.frequency().wavenumber();
    let (u, v) = (spec.receiver.u(), spec.receiver.v());
    let mut out = Vec::with_capacity(spec.cell_count());
    for p in 0..spec.p_count {
        for q in 0..spec.q_count {
            let r = barycenter(spec.p_count, spec.q_count, spec.pitch_m, p, q);
            let mut psi = -k0 * (u * r.x + v * r.y);
            let integral = pixel_integral(spec.receiver, spec.pitch_m, &r, spec.frequency());
            // a negative sinc envelope flips the sign of the element
            let expected = Complex64::from_polar(1.0, -psi);
            if (integral * expected.conj()).re < 0.0 {
                psi += std::f64::consts::PI;
            }
            out.push(psi);
        }
    }
    out
}

/// Currents an unloaded cell at the origin would carry: the orientation and
/// amplitude shared by every ideal current.
fn reference_currents(incident: &PlaneWave) -> (CVec3, CVec3) {
    let origin = nalgebra::Vector3::zeros();
    let (e, h) = local_transmitted_fields(&TransmissionTensor::identity(), incident, &origin);
    love_currents(&e, &h)
}

/// Ideal sheet: uniform amplitude, conjugate phases, Huygens-pair orientation.
pub fn ideal_currents(spec: &SynthesisSpec) -> Result<CurrentSheet> {
    spec.validate()?;
    let (je, jm) = reference_currents(&spec.incident);
    let phases = ideal_current_phases(spec);
    let electric = phases.iter().map(|psi| je * Complex64::from_polar(1.0, *psi)).collect();
    let magnetic = phases.iter().map(|psi| jm * Complex64::from_polar(1.0, *psi)).collect();
    CurrentSheet::new(spec.p_count, spec.q_count, spec.pitch_m, spec.frequency(), electric, magnetic)
}

type CellVec = [Complex64; 4];

fn weighted(je: &CVec3, jm: &CVec3) -> CellVec {
    let eta = FREE_SPACE_IMPEDANCE;
    [je.x * eta, je.y * eta, jm.x, jm.y]
}

fn distance_sqr(a: &CellVec, b: &CellVec) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

fn inner(a: &CellVec, b: &CellVec) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn scale(a: &CellVec, s: Complex64) -> CellVec {
    [a[0] * s, a[1] * s, a[2] * s, a[3] * s]
}

/// Mismatch of one cell between two sheets.
pub fn cell_mismatch(realized: &CurrentSheet, ideal: &CurrentSheet, index: usize) -> f64 {
    let a = weighted(&realized.electric[index], &realized.magnetic[index]);
    let b = weighted(&ideal.electric[index], &ideal.magnetic[index]);
    distance_sqr(&a, &b)
}

/// Squared norm of the difference of two sheets, electric terms scaled by the
/// free-space impedance.
pub fn sheet_mismatch(realized: &CurrentSheet, ideal: &CurrentSheet) -> Result<f64> {
    if !realized.same_shape(ideal) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {}", ideal.p_count(), ideal.q_count()),
            found: format!("{} x {}", realized.p_count(), realized.q_count()),
        });
    }
    Ok((0..realized.len()).map(|i| cell_mismatch(realized, ideal, i)).sum())
}

pub fn current_mismatch(layout: &EmsLayout, table: &ResponseTable, incident: &PlaneWave, ideal: &CurrentSheet) -> Result<f64> {
    if layout.p_count() != ideal.p_count() || layout.q_count() != ideal.q_count() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {}", ideal.p_count(), ideal.q_count()),
            found: format!("{} x {}", layout.p_count(), layout.q_count()),
        });
    }
    let realized = equivalent_currents(layout, table, incident)?;
    sheet_mismatch(&realized, ideal)
}

/// Candidate ring radii and their cell currents referenced to zero incident phase.
struct Candidates {
    d1: Vec<f64>,
    currents: Vec<CellVec>,
}

impl Candidates {
    fn new(table: &ResponseTable, incident: &PlaneWave, points: usize) -> Result<Self> {
        let d1 = table.dense_grid(points);
        let origin = nalgebra::Vector3::zeros();
        let currents = d1
            .iter()
            .map(|d| {
                let tensor = table.lookup_tensor(*d)?;
                let (e, h) = local_transmitted_fields(&tensor, incident, &origin);
                let (je, jm) = love_currents(&e, &h);
                Ok(weighted(&je, &jm))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { d1, currents })
    }

    /// Index of the candidate closest to `target`; ties keep the smaller radius.
    fn best(&self, target: &CellVec) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, c) in self.currents.iter().enumerate() {
            let cost = distance_sqr(c, target);
            if cost < best.1 {
                best = (k, cost);
            }
        }
        best
    }
}

/// Phase of the incident wave at each cell, row-major.
fn incident_phases(spec: &SynthesisSpec) -> Vec<f64> {
    let k = spec.incident.wavevector();
    let mut out = Vec::with_capacity(spec.cell_count());
    for p in 0..spec.p_count {
        for q in 0..spec.q_count {
            out.push(-k.dot(&barycenter(spec.p_count, spec.q_count, spec.pitch_m, p, q)));
        }
    }
    out
}

fn wrap_bin(angle: f64, bins: usize) -> usize {
    let turn = std::f64::consts::TAU;
    let x = angle.rem_euclid(turn) / turn * bins as f64;
    (x.round() as usize) % bins
}

/// Global phase applied to the ideal sheet before matching.
///
/// Every candidate reference is tried on a uniform grid; for each, cells are
/// assigned their best candidate on a binned target phase, and the reference
/// whose layout gives the largest projection onto the ideal sheet wins.
fn scan_reference(spec: &SynthesisSpec, candidates: &Candidates) -> f64 {
    let (je, jm) = reference_currents(&spec.incident);
    let unit = weighted(&je, &jm);
    let bins = REFERENCE_BINS;
    let step = std::f64::consts::TAU / bins as f64;

    // best candidate for a target of phase chi = b * step
    let best_per_bin: Vec<usize> = (0..bins)
        .into_par_iter()
        .map(|b| candidates.best(&scale(&unit, Complex64::from_polar(1.0, b as f64 * step))).0)
        .collect();
    let projection: Vec<Complex64> = candidates.currents.iter().map(|c| inner(&unit, c)).collect();

    // cells grouped by the bin of their own target phase
    let mut weights = vec![Complex64::new(0.0, 0.0); bins];
    for (psi, inc) in ideal_current_phases(spec).iter().zip(incident_phases(spec)) {
        let theta = psi - inc;
        weights[wrap_bin(theta, bins)] += Complex64::from_polar(1.0, -theta);
    }
    let occupied: Vec<(usize, Complex64)> = weights
        .into_iter()
        .enumerate()
        .filter(|(_, w)| w.norm_sqr() > 0.0)
        .collect();

    let received: Vec<f64> = (0..bins)
        .into_par_iter()
        .map(|s| {
            occupied
                .iter()
                .map(|(k, w)| w * projection[best_per_bin[(k + s) % bins]])
                .sum::<Complex64>()
                .norm()
        })
        .collect();
    let mut best = 0;
    for (s, r) in received.iter().enumerate() {
        if *r > received[best] * (1.0 + 1e-12) {
            best = s;
        }
    }
    best as f64 * step
}

/// Ideal sheet rotated by the reference phase, plus that phase.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingTarget {
    pub currents: CurrentSheet,
    pub reference_phase_rad: f64,
}

pub fn matching_target(spec: &SynthesisSpec, table: &ResponseTable) -> Result<MatchingTarget> {
    spec.check_table(table)?;
    let candidates = Candidates::new(table, &spec.incident, spec.search_points)?;
    target_with(spec, &candidates)
}

fn target_with(spec: &SynthesisSpec, candidates: &Candidates) -> Result<MatchingTarget> {
    let beta = scan_reference(spec, candidates);
    Ok(MatchingTarget {
        currents: ideal_currents(spec)?.scaled(Complex64::from_polar(1.0, beta)),
        reference_phase_rad: beta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub layout: EmsLayout,
    pub upsilon: f64,
    pub reference_phase_rad: f64,
    /// Best mismatch per iteration (PSO only).
    pub trace: Vec<f64>,
}

/// Exhaustive search of each cell over the dense ring-radius grid.
pub fn synthesize_per_cell(spec: &SynthesisSpec, table: &ResponseTable) -> Result<Synthesis> {
    spec.check_table(table)?;
    let candidates = Candidates::new(table, &spec.incident, spec.search_points)?;
    let target = target_with(spec, &candidates)?;
    let inc = incident_phases(spec);
    let ideal = &target.currents;
    let d1: Vec<f64> = (0..spec.cell_count())
        .into_par_iter()
        .map(|i| {
            let t = weighted(&ideal.electric[i], &ideal.magnetic[i]);
            // realized currents are the candidate currents times the incident phase
            let local = scale(&t, Complex64::from_polar(1.0, -inc[i]));
            candidates.d1[candidates.best(&local).0]
        })
        .collect();
    let layout = EmsLayout::new(spec.p_count, spec.q_count, spec.pitch_m, d1, table.id())?;
    let upsilon = current_mismatch(&layout, table, &spec.incident, ideal)?;
    Ok(Synthesis {
        layout,
        upsilon,
        reference_phase_rad: target.reference_phase_rad,
        trace: Vec::new(),
    })
}

/// Global-best particle swarm over the continuous ring-radius vector.
pub fn synthesize_pso(spec: &SynthesisSpec, table: &ResponseTable) -> Result<Synthesis> {
    let target = matching_target(spec, table)?;
    let bounds = vec![table.d1_range(); spec.cell_count()];
    let fitness = |x: &[f64]| {
        let layout = EmsLayout::new(spec.p_count, spec.q_count, spec.pitch_m, x.to_vec(), table.id())?;
        current_mismatch(&layout, table, &spec.incident, &target.currents)
    };
    let outcome = pso::minimize(&bounds, &spec.optimizer, fitness)?;
    let layout = EmsLayout::new(spec.p_count, spec.q_count, spec.pitch_m, outcome.best_position, table.id())?;
    Ok(Synthesis {
        layout,
        upsilon: outcome.best_value,
        reference_phase_rad: target.reference_phase_rad,
        trace: outcome.trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Percell,
    Pso,
}

pub fn synthesize(spec: &SynthesisSpec, table: &ResponseTable, method: Method) -> Result<Synthesis> {
    match method {
        Method::Percell => synthesize_per_cell(spec, table),
        Method::Pso => synthesize_pso(spec, table),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecRecord {
    pub method: Method,
    pub receiver_theta_deg: f64,
    pub receiver_phi_deg: f64,
    pub incidence_theta_deg: f64,
    pub incidence_phi_deg: f64,
    pub polarization: Polarization,
    pub incident_magnitude: f64,
    pub frequency_hz: f64,
    pub reference_phase_rad: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_points: Option<usize>,
}

/// On-disk layout: `P` rows of `Q` ring radii plus the spec that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutDocument {
    pub p: usize,
    pub q: usize,
    pub pitch_m: f64,
    pub table_id: String,
    pub d1_m: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SpecRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LayoutDocument {
    pub fn from_synthesis(spec: &SynthesisSpec, method: Method, result: &Synthesis) -> Self {
        let layout = &result.layout;
        let pso = method == Method::Pso;
        Self {
            p: layout.p_count(),
            q: layout.q_count(),
            pitch_m: layout.pitch_m(),
            table_id: layout.table_id().to_string(),
            d1_m: layout.rows(),
            spec: Some(SpecRecord {
                method,
                receiver_theta_deg: spec.receiver.theta_deg(),
                receiver_phi_deg: spec.receiver.phi_deg(),
                incidence_theta_deg: spec.incident.direction.theta_deg(),
                incidence_phi_deg: spec.incident.direction.phi_deg(),
                polarization: spec.incident.polarization,
                incident_magnitude: spec.incident.magnitude,
                frequency_hz: spec.frequency().hertz(),
                reference_phase_rad: result.reference_phase_rad,
                optimizer: pso.then_some(spec.optimizer),
                search_points: (!pso).then_some(spec.search_points),
            }),
            upsilon: Some(result.upsilon),
            seed: pso.then_some(spec.optimizer.seed),
        }
    }

    pub fn layout(&self) -> Result<EmsLayout> {
        if self.d1_m.len() != self.p || self.d1_m.iter().any(|row| row.len() != self.q) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows of {}", self.p, self.q),
                found: format!("{} rows", self.d1_m.len()),
            });
        }
        EmsLayout::new(self.p, self.q, self.pitch_m, self.d1_m.concat(), self.table_id.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `iteration,best_upsilon` rows of a swarm trace.
pub fn write_convergence_csv<W: Write>(writer: W, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "best_upsilon"])?;
    for (i, v) in trace.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}
