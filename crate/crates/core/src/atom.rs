//! Meta-atom model: meshed-ring geometry, optical transparency, the atom
//! figure of merit, and the sampled transmission response `T(d1)`.
//!
//! The response table replaces a full-wave unit-cell solver. Rows carry the
//! magnitude and *unwrapped* phase of the TE and TM co-polar coefficients;
//! cross-polar terms are taken as zero.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::em::Frequency;
use crate::error::{invalid, Error, Result};

/// Number of geometric descriptors per meta-atom.
pub const DESCRIPTOR_COUNT: usize = 5;

/// Header of the response-table CSV format.
pub const TABLE_CSV_HEADER: [&str; 5] = ["d1_m", "mag_te", "phase_te_deg", "mag_tm", "phase_tm_deg"];

/// Geometry of the dual-layer meshed circular ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomDescriptors {
    /// Outer ring radius (m).
    pub ring_radius: f64,
    /// Ring width (m).
    pub ring_width: f64,
    /// Mesh wire radius (m).
    pub wire_radius: f64,
    /// Mesh radial gap (m).
    pub radial_gap: f64,
    /// Mesh angular gap (deg).
    pub angular_gap_deg: f64,
}

impl AtomDescriptors {
    pub fn new(
        ring_radius: f64,
        ring_width: f64,
        wire_radius: f64,
        radial_gap: f64,
        angular_gap_deg: f64,
    ) -> Result<Self> {
        let d = Self {
            ring_radius,
            ring_width,
            wire_radius,
            radial_gap,
            angular_gap_deg,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn as_array(&self) -> [f64; DESCRIPTOR_COUNT] {
        [
            self.ring_radius,
            self.ring_width,
            self.wire_radius,
            self.radial_gap,
            self.angular_gap_deg,
        ]
    }

    pub fn from_array(a: [f64; DESCRIPTOR_COUNT]) -> Self {
        Self {
            ring_radius: a[0],
            ring_width: a[1],
            wire_radius: a[2],
            radial_gap: a[3],
            angular_gap_deg: a[4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid(format!("atom descriptors must all be > 0: {self:?}")));
        }
        if self.ring_width >= self.ring_radius {
            return Err(invalid(format!(
                "ring width {} must be smaller than ring radius {}",
                self.ring_width, self.ring_radius
            )));
        }
        Ok(())
    }

    pub fn validate_in_cell(&self, pitch_m: f64) -> Result<()> {
        self.validate()?;
        check_ring_fits(self.ring_radius, pitch_m)
    }
}

fn check_ring_fits(ring_radius: f64, pitch_m: f64) -> Result<()> {
    if 2.0 * ring_radius > pitch_m {
        return Err(invalid(format!(
            "ring diameter {} m exceeds lattice pitch {} m",
            2.0 * ring_radius,
            pitch_m
        )));
    }
    Ok(())
}

/// Fraction of a meshed-conductor area occupied by copper, `d3 / (d3 + d4)`.
pub fn mesh_fill_factor(d: &AtomDescriptors) -> f64 {
    let sum = d.wire_radius + d.radial_gap;
    if sum <= 0.0 {
        return 0.0;
    }
    d.wire_radius / sum
}

/// Conductor fill factor of one patterned layer of the cell.
pub fn atom_fill_factor(d: &AtomDescriptors, pitch_m: f64) -> Result<f64> {
    if !(pitch_m.is_finite() && pitch_m > 0.0) {
        return Err(invalid(format!("lattice pitch must be > 0, got {pitch_m}")));
    }
    check_ring_fits(d.ring_radius, pitch_m)?;
    let ring_area = std::f64::consts::PI * d.ring_width * (2.0 * d.ring_radius - d.ring_width);
    Ok(ring_area / (pitch_m * pitch_m) * mesh_fill_factor(d))
}

/// Optical transmittance of the whole atom, `(1 - F_atom)^4`, glass assumed lossless.
pub fn atom_optical_transmittance(d: &AtomDescriptors, pitch_m: f64) -> Result<f64> {
    Ok((1.0 - atom_fill_factor(d, pitch_m)?).powi(4))
}

/// Transmittance of a single meshed layer, `(1 - F_mesh)^2`.
pub fn mesh_optical_transmittance(d: &AtomDescriptors) -> f64 {
    (1.0 - mesh_fill_factor(d)).powi(2)
}

/// Fill factor of a solid square patch of side `patch_side_m`.
pub fn patch_fill_factor(patch_side_m: f64, pitch_m: f64) -> f64 {
    (patch_side_m / pitch_m).powi(2)
}

/// Box bounds on the descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilitySet {
    pub lower: [f64; DESCRIPTOR_COUNT],
    pub upper: [f64; DESCRIPTOR_COUNT],
}

impl FeasibilitySet {
    pub fn new(lower: [f64; DESCRIPTOR_COUNT], upper: [f64; DESCRIPTOR_COUNT]) -> Result<Self> {
        let set = Self { lower, upper };
        set.validate()?;
        Ok(set)
    }

    /// Ring radius in [0.9, 1.6] mm; width 795 um, wire radius 30 um,
    /// radial gap 225 um and angular gap 20 deg held fixed.
    pub fn benchmark() -> Self {
        let fixed = [795e-6, 30e-6, 225e-6, 20.0];
        Self {
            lower: [0.9e-3, fixed[0], fixed[1], fixed[2], fixed[3]],
            upper: [1.6e-3, fixed[0], fixed[1], fixed[2], fixed[3]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for l in 0..DESCRIPTOR_COUNT {
            let (lo, hi) = (self.lower[l], self.upper[l]);
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(invalid(format!("descriptor {} bounds [{lo}, {hi}] are invalid", l + 1)));
            }
        }
        Ok(())
    }

    pub fn ring_radius_range(&self) -> (f64, f64) {
        (self.lower[0], self.upper[0])
    }

    pub fn contains(&self, d: &AtomDescriptors) -> bool {
        d.as_array()
            .iter()
            .enumerate()
            .all(|(l, v)| *v >= self.lower[l] && *v <= self.upper[l])
    }

    /// Descriptors with the given ring radius and the remaining entries at
    /// their lower bounds (the fixed values of the benchmark set).
    pub fn descriptors_at(&self, ring_radius: f64) -> AtomDescriptors {
        let mut a = self.lower;
        a[0] = ring_radius;
        AtomDescriptors::from_array(a)
    }

    /// Corner of the box with the largest conductor fill factor.
    pub fn least_transparent_corner(&self) -> AtomDescriptors {
        let ring_radius = self.upper[0];
        AtomDescriptors {
            ring_radius,
            ring_width: self.upper[1].min(ring_radius),
            wire_radius: self.upper[2],
            radial_gap: self.lower[3],
            angular_gap_deg: self.lower[4],
        }
    }
}

/// 2x2 complex transmission tensor in the local (TE, TM) basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionTensor {
    pub te: Complex64,
    pub tm: Complex64,
    /// TM input coupled into TE output.
    pub te_tm: Complex64,
    /// TE input coupled into TM output.
    pub tm_te: Complex64,
}

impl TransmissionTensor {
    pub fn diagonal(te: Complex64, tm: Complex64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            te,
            tm,
            te_tm: zero,
            tm_te: zero,
        }
    }

    pub fn uniform(t: Complex64) -> Self {
        Self::diagonal(t, t)
    }

    pub fn identity() -> Self {
        Self::uniform(Complex64::new(1.0, 0.0))
    }

    pub fn zero() -> Self {
        Self::uniform(Complex64::new(0.0, 0.0))
    }

    /// Applies the tensor to incident `(TE, TM)` amplitudes.
    pub fn apply(&self, te_in: Complex64, tm_in: Complex64) -> (Complex64, Complex64) {
        (
            self.te * te_in + self.te_tm * tm_in,
            self.tm_te * te_in + self.tm * tm_in,
        )
    }

    pub fn max_magnitude(&self) -> f64 {
        [self.te, self.tm, self.te_tm, self.tm_te]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Magnitude and unwrapped phase of one tensor entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarSample {
    pub magnitude: f64,
    pub phase_deg: f64,
}

impl PolarSample {
    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase_deg.to_radians())
    }

    fn lerp(a: Self, b: Self, t: f64) -> Self {
        Self {
            magnitude: a.magnitude + t * (b.magnitude - a.magnitude),
            phase_deg: a.phase_deg + t * (b.phase_deg - a.phase_deg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub d1_m: f64,
    pub te: PolarSample,
    pub tm: PolarSample,
}

impl TableRow {
    pub fn tensor(&self) -> TransmissionTensor {
        TransmissionTensor::diagonal(self.te.to_complex(), self.tm.to_complex())
    }
}

/// Sampled single-frequency response of the meta-atom versus ring radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    id: String,
    pitch_m: f64,
    frequency: Frequency,
    rows: Vec<TableRow>,
}

impl ResponseTable {
    pub fn new(id: impl Into<String>, pitch_m: f64, frequency: Frequency, rows: Vec<TableRow>) -> Result<Self> {
        if !(pitch_m.is_finite() && pitch_m > 0.0) {
            return Err(invalid(format!("lattice pitch must be > 0, got {pitch_m}")));
        }
        if rows.len() < 2 {
            return Err(invalid(format!("response table needs at least 2 rows, got {}", rows.len())));
        }
        for (i, row) in rows.iter().enumerate() {
            let vals = [
                row.d1_m,
                row.te.magnitude,
                row.te.phase_deg,
                row.tm.magnitude,
                row.tm.phase_deg,
            ];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("table row {i}")));
            }
            for m in [row.te.magnitude, row.tm.magnitude] {
                if !(0.0..=1.0 + 1e-6).contains(&m) {
                    return Err(invalid(format!("table row {i}: magnitude {m} outside [0, 1]")));
                }
            }
            if i > 0 && row.d1_m <= rows[i - 1].d1_m {
                return Err(invalid(format!("table d1 values must increase strictly (row {i})")));
            }
        }
        Ok(Self {
            id: id.into(),
            pitch_m,
            frequency,
            rows,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pitch_m(&self) -> f64 {
        self.pitch_m
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn d1_range(&self) -> (f64, f64) {
        (self.rows[0].d1_m, self.rows[self.rows.len() - 1].d1_m)
    }

    pub fn contains(&self, d1: f64) -> bool {
        let (lo, hi) = self.d1_range();
        d1 >= lo && d1 <= hi
    }

    /// Checks that every knot lies inside the ring-radius bounds.
    pub fn validate_against(&self, feasibility: &FeasibilitySet) -> Result<()> {
        let (lo, hi) = feasibility.ring_radius_range();
        let tol = 1e-12;
        for row in &self.rows {
            if row.d1_m < lo - tol || row.d1_m > hi + tol {
                return Err(Error::OutOfRange {
                    what: "table d1 (m)",
                    value: row.d1_m,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Interpolated row at `d1`: linear in magnitude and in unwrapped phase.
    pub fn sample(&self, d1: f64) -> Result<TableRow> {
        let (lo, hi) = self.d1_range();
        if !(d1 >= lo && d1 <= hi) {
            return Err(Error::OutOfRange {
                what: "d1 (m)",
                value: d1,
                lo,
                hi,
            });
        }
        let idx = self.rows.partition_point(|r| r.d1_m < d1);
        if idx < self.rows.len() && self.rows[idx].d1_m == d1 {
            return Ok(self.rows[idx]);
        }
        let (a, b) = (&self.rows[idx - 1], &self.rows[idx]);
        let t = (d1 - a.d1_m) / (b.d1_m - a.d1_m);
        Ok(TableRow {
            d1_m: d1,
            te: PolarSample::lerp(a.te, b.te, t),
            tm: PolarSample::lerp(a.tm, b.tm, t),
        })
    }

    pub fn lookup_tensor(&self, d1: f64) -> Result<TransmissionTensor> {
        self.sample(d1).map(|r| r.tensor())
    }

    /// `n` equally spaced ring radii spanning the table (both ends included).
    pub fn dense_grid(&self, n: usize) -> Vec<f64> {
        let (lo, hi) = self.d1_range();
        let n = n.max(2);
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    pub fn read_csv<R: Read>(
        reader: R,
        id: impl Into<String>,
        pitch_m: f64,
        frequency: Frequency,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(TABLE_CSV_HEADER.iter().copied()) {
            return Err(Error::MalformedTable {
                line: 1,
                msg: format!("expected header `{}`", TABLE_CSV_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::MalformedTable {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                msg: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let mut vals = [0.0; 5];
            for (i, field) in record.iter().enumerate() {
                vals[i] = field.trim().parse::<f64>().map_err(|e| Error::MalformedTable {
                    line,
                    msg: format!("column `{}`: {e}", TABLE_CSV_HEADER[i]),
                })?;
            }
            if let Some(prev) = rows.last().map(|r: &TableRow| r.d1_m) {
                if vals[0] <= prev {
                    return Err(Error::MalformedTable {
                        line,
                        msg: "rows must be sorted by strictly increasing d1_m".into(),
                    });
                }
            }
            rows.push(TableRow {
                d1_m: vals[0],
                te: PolarSample {
                    magnitude: vals[1],
                    phase_deg: vals[2],
                },
                tm: PolarSample {
                    magnitude: vals[3],
                    phase_deg: vals[4],
                },
            });
        }
        Self::new(id, pitch_m, frequency, rows).map_err(|e| match e {
            Error::MalformedTable { .. } => e,
            other => Error::MalformedTable {
                line: 0,
                msg: other.to_string(),
            },
        })
    }

    pub fn load_csv(path: &Path, pitch_m: f64, frequency: Frequency) -> Result<Self> {
        let id = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "table".into());
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), id, pitch_m, frequency)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_rows_csv(writer, &self.rows)
    }
}

/// Writes rows in the response-table CSV format.
pub fn write_rows_csv<W: Write>(writer: W, rows: &[TableRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TABLE_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.d1_m.to_string(),
            r.te.magnitude.to_string(),
            r.te.phase_deg.to_string(),
            r.tm.magnitude.to_string(),
            r.tm.phase_deg.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn lookup_tensor(table: &ResponseTable, d1: f64) -> Result<TransmissionTensor> {
    table.lookup_tensor(d1)
}

/// Weights of the atom figure of merit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomWeights {
    pub phase_coverage_te: f64,
    pub phase_coverage_tm: f64,
    pub magnitude_te: f64,
    pub magnitude_tm: f64,
    pub optical: f64,
}

impl Default for AtomWeights {
    fn default() -> Self {
        Self {
            phase_coverage_te: 1.0,
            phase_coverage_tm: 1.0,
            magnitude_te: 1.0,
            magnitude_tm: 1.0,
            optical: 1.0,
        }
    }
}

/// Atom figure of merit and its sub-metrics.
///
/// `cost` combines phase coverage in radians, worst-case linear magnitude and
/// worst-case optical transmittance; smaller is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomCost {
    pub phase_coverage_te_deg: f64,
    pub phase_coverage_tm_deg: f64,
    pub min_magnitude_te: f64,
    pub min_magnitude_tm: f64,
    pub min_optical_transmittance: f64,
    pub cost: f64,
}

impl AtomCost {
    pub fn from_rows(
        rows: &[TableRow],
        pitch_m: f64,
        feasibility: &FeasibilitySet,
        weights: &AtomWeights,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("atom cost needs a non-empty table"));
        }
        let w = [
            weights.phase_coverage_te,
            weights.phase_coverage_tm,
            weights.magnitude_te,
            weights.magnitude_tm,
            weights.optical,
        ];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("atom weights must be >= 0"));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(invalid("atom weights must not all be zero"));
        }
        let span = |sel: fn(&TableRow) -> f64| {
            let (lo, hi) = rows
                .iter()
                .map(sel)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        };
        let min_of = |sel: fn(&TableRow) -> f64| rows.iter().map(sel).fold(f64::INFINITY, f64::min);

        let pc_te = span(|r| r.te.phase_deg);
        let pc_tm = span(|r| r.tm.phase_deg);
        let mag_te = min_of(|r| r.te.magnitude);
        let mag_tm = min_of(|r| r.tm.magnitude);
        let optical = atom_optical_transmittance(&feasibility.least_transparent_corner(), pitch_m)?;

        let merit = w[0] * pc_te.to_radians()
            + w[1] * pc_tm.to_radians()
            + w[2] * mag_te
            + w[3] * mag_tm
            + w[4] * optical;
        if merit <= 0.0 {
            return Err(invalid("atom figure of merit is zero; cost undefined"));
        }
        Ok(Self {
            phase_coverage_te_deg: pc_te,
            phase_coverage_tm_deg: pc_tm,
            min_magnitude_te: mag_te,
            min_magnitude_tm: mag_tm,
            min_optical_transmittance: optical,
            cost: 1.0 / merit,
        })
    }

    pub fn min_magnitude_te_db(&self) -> f64 {
        20.0 * self.min_magnitude_te.log10()
    }

    pub fn min_magnitude_tm_db(&self) -> f64 {
        20.0 * self.min_magnitude_tm.log10()
    }
}

pub fn atom_cost(table: &ResponseTable, feasibility: &FeasibilitySet, weights: &AtomWeights) -> Result<AtomCost> {
    AtomCost::from_rows(table.rows(), table.pitch_m(), feasibility, weights)
}

/// Rejects a table whose atom cost exceeds the acceptance threshold.
pub fn validate_table_cost(
    table: &ResponseTable,
    feasibility: &FeasibilitySet,
    weights: &AtomWeights,
    threshold: f64,
) -> Result<AtomCost> {
    let cost = atom_cost(table, feasibility, weights)?;
    if cost.cost > threshold {
        return Err(invalid(format!(
            "table `{}` atom cost {:.4} exceeds threshold {threshold}",
            table.id(),
            cost.cost
        )));
    }
    Ok(cost)
}

/// Shape parameters of the analytic single-resonance response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateShape {
    /// Total phase excursion across the ring-radius range (deg).
    pub phase_span_deg: f64,
    /// Magnitude floor at the resonance (dB).
    pub min_magnitude_db: f64,
    /// Phase at the smallest ring radius (deg).
    pub start_phase_deg: f64,
    /// Resonance half-width as a fraction of the radius range.
    pub width: f64,
    /// Linear magnitude tilt across the range, off resonance.
    pub tilt: f64,
}

impl Default for SurrogateShape {
    fn default() -> Self {
        Self {
            phase_span_deg: 220.0,
            min_magnitude_db: -7.7,
            start_phase_deg: 0.0,
            width: 0.09,
            tilt: 0.03,
        }
    }
}

pub const SURROGATE_TABLE_ID: &str = "surrogate";

/// Smooth resonance-like stand-in for a full-wave unit-cell sweep.
///
/// The phase falls monotonically by the full span while the magnitude dips to
/// its floor where the phase slope is steepest; TM mirrors TE.
pub fn default_surrogate_table(
    feasibility: &FeasibilitySet,
    n_rows: usize,
    pitch_m: f64,
    frequency: Frequency,
) -> Result<ResponseTable> {
    surrogate_table(feasibility, n_rows, pitch_m, frequency, &SurrogateShape::default())
}

pub fn surrogate_table(
    feasibility: &FeasibilitySet,
    n_rows: usize,
    pitch_m: f64,
    frequency: Frequency,
    shape: &SurrogateShape,
) -> Result<ResponseTable> {
    if n_rows < 8 {
        return Err(invalid(format!("surrogate table needs at least 8 rows, got {n_rows}")));
    }
    if !(shape.width > 0.0 && (0.0..1.0).contains(&shape.tilt)) {
        return Err(invalid("surrogate width must be > 0 and tilt in [0, 1)"));
    }
    let (lo, hi) = feasibility.ring_radius_range();
    if hi <= lo {
        return Err(invalid("surrogate needs a non-degenerate ring-radius range"));
    }
    // resonance centred on the knot nearest the middle so the floor is sampled
    let centre = ((n_rows - 1) / 2) as f64 / (n_rows - 1) as f64;
    let w = shape.width;
    let floor = 10f64.powf(shape.min_magnitude_db / 20.0);
    let baseline = |x: f64| 1.0 - shape.tilt * x;
    let depth = 1.0 - floor / baseline(centre);
    let a0 = (-centre / w).atan();
    let a1 = ((1.0 - centre) / w).atan();

    let rows = (0..n_rows)
        .map(|i| {
            let x = i as f64 / (n_rows - 1) as f64;
            let lorentz = 1.0 / (1.0 + ((x - centre) / w).powi(2));
            let magnitude = baseline(x) * (1.0 - depth * lorentz);
            let s = (((x - centre) / w).atan() - a0) / (a1 - a0);
            let phase_deg = shape.start_phase_deg - shape.phase_span_deg * s;
            let d1_m = if i == n_rows - 1 { hi } else { lo + (hi - lo) * x };
            let sample = PolarSample { magnitude, phase_deg };
            TableRow {
                d1_m,
                te: sample,
                tm: sample,
            }
        })
        .collect();
    ResponseTable::new(SURROGATE_TABLE_ID, pitch_m, frequency, rows)
}
