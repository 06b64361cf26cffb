//! Pattern metrics (peak power, scan loss, beamwidth, sidelobes), optical
//! transparency maps, and the aperture-size and steering-angle sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::aperture::{equivalent_currents, pattern_cut, uniform_currents, EmsLayout, PatternCut, PatternSample, PatternTable};
use crate::atom::{atom_optical_transmittance, FeasibilitySet, ResponseTable, TransmissionTensor};
use crate::em::Direction;
use crate::error::{invalid, Result};
use crate::multilayer::{stack_transmission, LayerStack, StackPolarization};
use crate::synthesis::{synthesize, Method, SynthesisSpec};

/// Field component whose power the metrics track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerComponent {
    /// `|E_phi|^2`, the co-polar component for phi-polarized illumination.
    #[default]
    Phi,
    Theta,
    Total,
}

impl PowerComponent {
    pub fn of(self, s: &PatternSample) -> f64 {
        match self {
            PowerComponent::Phi => s.e_phi.norm_sqr(),
            PowerComponent::Theta => s.e_theta.norm_sqr(),
            PowerComponent::Total => s.power(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsOptions {
    pub component: PowerComponent,
    /// Cut angle at which scan loss is read; the interpolated peak when unset.
    pub steer_deg: Option<f64>,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            component: PowerComponent::Phi,
            steer_deg: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sidelobe {
    pub direction: Direction,
    pub cut_deg: f64,
    /// Level relative to the main peak (dB, <= 0).
    pub level_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternMetrics {
    /// Peak power in (V/m)^2.
    pub peak_power: f64,
    pub peak_power_db: f64,
    pub peak_direction: Direction,
    pub peak_cut_deg: f64,
    pub scan_loss_db: f64,
    /// Ordered by decreasing level.
    pub sidelobes: Vec<Sidelobe>,
    pub beamwidth_deg: f64,
}

impl PatternMetrics {
    pub fn max_sidelobe(&self) -> Option<&Sidelobe> {
        self.sidelobes.first()
    }
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

struct Cut {
    angles: Vec<f64>,
    power: Vec<f64>,
    phi_deg: f64,
}

impl Cut {
    fn new(table: &PatternTable, component: PowerComponent) -> Result<Self> {
        let phi_deg = match table.cut {
            PatternCut::Theta { phi_deg, .. } => phi_deg,
            PatternCut::Uv { .. } => return Err(invalid("cut metrics need a planar theta cut")),
        };
        if table.samples.is_empty() {
            return Err(invalid("pattern cut is empty"));
        }
        let angles = table.samples.iter().map(|s| s.cut_deg.unwrap_or(s.direction.theta_deg())).collect();
        let power = table.samples.iter().map(|s| component.of(s)).collect();
        Ok(Self { angles, power, phi_deg })
    }

    fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.power.iter().enumerate() {
            if *p > self.power[best] {
                best = i;
            }
        }
        best
    }

    /// Parabolic refinement in dB around sample `i`: `(angle, power)`.
    fn refine(&self, i: usize) -> (f64, f64) {
        let n = self.power.len();
        if i == 0 || i + 1 >= n || self.power[i - 1] <= 0.0 || self.power[i + 1] <= 0.0 {
            return (self.angles[i], self.power[i]);
        }
        let (y0, y1, y2) = (db(self.power[i - 1]), db(self.power[i]), db(self.power[i + 1]));
        let curvature = y0 - 2.0 * y1 + y2;
        if curvature >= 0.0 {
            return (self.angles[i], self.power[i]);
        }
        let delta = (0.5 * (y0 - y2) / curvature).clamp(-0.5, 0.5);
        let step = self.angles[i + 1] - self.angles[i];
        let peak_db = y1 - 0.25 * (y0 - y2) * delta;
        (self.angles[i] + delta * step, 10f64.powf(peak_db / 10.0))
    }

    /// Power at `angle`, linear in dB between neighbouring samples.
    fn at(&self, angle: f64) -> Result<f64> {
        let n = self.angles.len();
        let (lo, hi) = (self.angles[0].min(self.angles[n - 1]), self.angles[0].max(self.angles[n - 1]));
        if !(angle >= lo - 1e-9 && angle <= hi + 1e-9) {
            return Err(invalid(format!("angle {angle} deg outside the cut [{lo}, {hi}]")));
        }
        let i = self.angles.partition_point(|a| *a < angle).min(n - 1);
        if (self.angles[i] - angle).abs() < 1e-9 || i == 0 {
            return Ok(self.power[i]);
        }
        let (a0, a1) = (self.angles[i - 1], self.angles[i]);
        let t = (angle - a0) / (a1 - a0);
        let (p0, p1) = (self.power[i - 1].max(f64::MIN_POSITIVE), self.power[i].max(f64::MIN_POSITIVE));
        Ok(10f64.powf((db(p0) + t * (db(p1) - db(p0))) / 10.0))
    }

    fn crossing(&self, from: usize, level_db: f64, forward: bool) -> f64 {
        let n = self.power.len();
        let mut i = from;
        loop {
            let next = if forward {
                if i + 1 >= n {
                    return self.angles[n - 1];
                }
                i + 1
            } else {
                if i == 0 {
                    return self.angles[0];
                }
                i - 1
            };
            let (a, b) = (db(self.power[i]), db(self.power[next]));
            if b < level_db {
                let t = (a - level_db) / (a - b);
                return self.angles[i] + t * (self.angles[next] - self.angles[i]);
            }
            i = next;
        }
    }
}

pub fn compute_metrics(cut: &PatternTable, reference_broadside: Option<&PatternTable>) -> Result<PatternMetrics> {
    compute_metrics_with(cut, reference_broadside, &MetricsOptions::default())
}

/// Metrics of a planar cut. Scan loss compares the cut at the steering angle
/// with the reference cut at broadside; without a reference the cut is its
/// own reference.
pub fn compute_metrics_with(
    table: &PatternTable,
    reference_broadside: Option<&PatternTable>,
    opts: &MetricsOptions,
) -> Result<PatternMetrics> {
    let cut = Cut::new(table, opts.component)?;
    let imax = cut.argmax();
    let (peak_angle, peak_power) = cut.refine(imax);
    if !(peak_power > 0.0) {
        return Err(invalid("pattern cut carries no power"));
    }
    let peak_db = db(peak_power);

    let left = cut.crossing(imax, peak_db - 3.0, false);
    let right = cut.crossing(imax, peak_db - 3.0, true);
    let beamwidth = right - left;

    let mut candidates: Vec<(usize, f64)> = (1..cut.power.len() - 1)
        .filter(|&i| i != imax && cut.power[i] > cut.power[i - 1] && cut.power[i] >= cut.power[i + 1])
        .map(|i| (i, cut.power[i]))
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut accepted: Vec<f64> = vec![peak_angle];
    let mut sidelobes = Vec::new();
    for (i, _) in candidates {
        let (angle, power) = cut.refine(i);
        if accepted.iter().any(|a| (a - angle).abs() < beamwidth) {
            continue;
        }
        accepted.push(angle);
        sidelobes.push(Sidelobe {
            direction: Direction::from_cut_angle(angle, cut.phi_deg)?,
            cut_deg: angle,
            level_db: db(power) - peak_db,
        });
    }

    let steered = match opts.steer_deg {
        Some(a) => cut.at(a)?,
        None => peak_power,
    };
    let broadside = match reference_broadside {
        Some(r) => Cut::new(r, opts.component)?.at(180.0)?,
        None => cut.at(180.0)?,
    };

    Ok(PatternMetrics {
        peak_power,
        peak_power_db: peak_db,
        peak_direction: Direction::from_cut_angle(peak_angle, cut.phi_deg)?,
        peak_cut_deg: peak_angle,
        scan_loss_db: db(steered) - db(broadside),
        sidelobes,
        beamwidth_deg: beamwidth,
    })
}

/// Sample of a u-v grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UvPoint {
    pub u: f64,
    pub v: f64,
    pub power: f64,
}

fn uv_grid_index(table: &PatternTable) -> Result<(usize, usize, Vec<Option<usize>>)> {
    let PatternCut::Uv { samples_u, samples_v } = table.cut else {
        return Err(invalid("u-v metrics need a u-v grid"));
    };
    let mut index = vec![None; samples_u * samples_v];
    let to_idx = |x: f64, n: usize| ((x + 1.0) / 2.0 * (n - 1) as f64).round() as usize;
    for (k, s) in table.samples.iter().enumerate() {
        index[to_idx(s.v(), samples_v) * samples_u + to_idx(s.u(), samples_u)] = Some(k);
    }
    Ok((samples_u, samples_v, index))
}

/// Strict local maxima of a u-v grid (8-neighbourhood), strongest first.
pub fn uv_local_maxima(table: &PatternTable, component: PowerComponent) -> Result<Vec<UvPoint>> {
    let (nu, nv, index) = uv_grid_index(table)?;
    let power = |k: usize| component.of(&table.samples[k]);
    let mut out = Vec::new();
    for iv in 0..nv {
        for iu in 0..nu {
            let Some(k) = index[iv * nu + iu] else { continue };
            let p = power(k);
            let mut is_max = p > 0.0;
            for dv in -1i64..=1 {
                for du in -1i64..=1 {
                    if du == 0 && dv == 0 {
                        continue;
                    }
                    let (ju, jv) = (iu as i64 + du, iv as i64 + dv);
                    if ju < 0 || jv < 0 || ju >= nu as i64 || jv >= nv as i64 {
                        continue;
                    }
                    if let Some(n) = index[jv as usize * nu + ju as usize] {
                        if power(n) >= p {
                            is_max = false;
                        }
                    }
                }
            }
            if is_max {
                let s = &table.samples[k];
                out.push(UvPoint { u: s.u(), v: s.v(), power: p });
            }
        }
    }
    out.sort_by(|a, b| b.power.total_cmp(&a.power));
    Ok(out)
}

pub fn uv_peak(table: &PatternTable, component: PowerComponent) -> Result<UvPoint> {
    table
        .samples
        .iter()
        .map(|s| UvPoint {
            u: s.u(),
            v: s.v(),
            power: component.of(s),
        })
        .fold(None, |best: Option<UvPoint>, p| match best {
            Some(b) if b.power >= p.power => Some(b),
            _ => Some(p),
        })
        .ok_or_else(|| invalid("u-v grid is empty"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransparencyMap {
    pub p_count: usize,
    pub q_count: usize,
    /// Row-major per-cell optical transmittance.
    pub values: Vec<f64>,
    pub min: f64,
    pub mean: f64,
}

/// Optical transmittance of every cell, other descriptors held at the
/// feasibility set's least transparent corner.
pub fn transparency_map(layout: &EmsLayout, feasibility: &FeasibilitySet) -> Result<TransparencyMap> {
    let values = layout
        .cells()
        .iter()
        .map(|d1| atom_optical_transmittance(&feasibility.descriptors_at(*d1), layout.pitch_m()))
        .collect::<Result<Vec<f64>>>()?;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(TransparencyMap {
        p_count: layout.p_count(),
        q_count: layout.q_count(),
        values,
        min,
        mean,
    })
}

/// Shared settings of the sweeps; `spec.p_count`, `spec.q_count` and
/// `spec.receiver` are overridden per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTemplate {
    pub spec: SynthesisSpec,
    pub method: Method,
    pub stack: LayerStack,
    pub radius_m: f64,
    pub cut_samples: usize,
}

impl SweepTemplate {
    pub fn new(spec: SynthesisSpec, method: Method, stack: LayerStack) -> Self {
        Self {
            spec,
            method,
            stack,
            radius_m: crate::aperture::DEFAULT_RADIUS_M,
            cut_samples: 721,
        }
    }

    fn cut(&self) -> PatternCut {
        PatternCut::Theta {
            phi_deg: self.spec.receiver.phi_deg(),
            start_deg: 90.0,
            stop_deg: 270.0,
            samples: self.cut_samples,
        }
    }

    /// Co-polar cut through the receiver of the synthesized layout.
    pub fn layout_cut(&self, spec: &SynthesisSpec, table: &ResponseTable) -> Result<(EmsLayout, PatternTable)> {
        let layout = synthesize(spec, table, self.method)?.layout;
        let currents = equivalent_currents(&layout, table, &spec.incident)?;
        let cut = pattern_cut(&currents, self.cut(), self.radius_m)?;
        Ok((layout, cut))
    }

    pub fn glass_tensor(&self) -> Result<TransmissionTensor> {
        let f = self.spec.frequency();
        let inc = self.spec.incident.direction;
        Ok(TransmissionTensor::diagonal(
            stack_transmission(&self.stack, f, inc, StackPolarization::Te)?,
            stack_transmission(&self.stack, f, inc, StackPolarization::Tm)?,
        ))
    }

    /// Cut of a uniform aperture with the given tensor.
    pub fn baseline_cut(&self, p: usize, q: usize, tensor: TransmissionTensor) -> Result<PatternTable> {
        let currents = uniform_currents(p, q, self.spec.pitch_m, tensor, &self.spec.incident)?;
        pattern_cut(&currents, self.cut(), self.radius_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApertureRow {
    pub p: usize,
    pub xi: f64,
    pub xi_glass: f64,
    pub xi_empty: f64,
}

fn peak_of(table: &PatternTable) -> Result<f64> {
    Ok(compute_metrics(table, None)?.peak_power)
}

/// Peak co-polar power versus square aperture size, with the bare-glass and
/// empty-frame baselines.
pub fn aperture_sweep(template: &SweepTemplate, table: &ResponseTable, sizes: &[usize]) -> Result<Vec<ApertureRow>> {
    if sizes.is_empty() {
        return Err(invalid("aperture sweep needs at least one size"));
    }
    let glass = template.glass_tensor()?;
    sizes
        .par_iter()
        .map(|&p| {
            let mut spec = template.spec.clone();
            spec.p_count = p;
            spec.q_count = p;
            let (_, cut) = template.layout_cut(&spec, table)?;
            Ok(ApertureRow {
                p,
                xi: peak_of(&cut)?,
                xi_glass: peak_of(&template.baseline_cut(p, p, glass)?)?,
                xi_empty: peak_of(&template.baseline_cut(p, p, TransmissionTensor::identity())?)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleRow {
    pub theta_rx_deg: f64,
    pub metrics: PatternMetrics,
}

/// Metrics versus receiver elevation; scan loss is referenced to the layout
/// synthesized for broadside.
pub fn angle_sweep(template: &SweepTemplate, table: &ResponseTable, receivers: &[f64]) -> Result<Vec<AngleRow>> {
    if receivers.is_empty() {
        return Err(invalid("angle sweep needs at least one receiver angle"));
    }
    let phi = template.spec.receiver.phi_deg();
    let mut broadside_spec = template.spec.clone();
    broadside_spec.receiver = Direction::broadside_transmitted();
    let (_, reference) = template.layout_cut(&broadside_spec, table)?;
    receivers
        .par_iter()
        .map(|&theta| {
            let mut spec = template.spec.clone();
            spec.receiver = Direction::new(theta, phi)?;
            spec.validate()?;
            let (_, cut) = template.layout_cut(&spec, table)?;
            let opts = MetricsOptions {
                steer_deg: Some(theta),
                ..Default::default()
            };
            Ok(AngleRow {
                theta_rx_deg: theta,
                metrics: compute_metrics_with(&cut, Some(&reference), &opts)?,
            })
        })
        .collect()
}

pub fn write_aperture_csv<W: Write>(writer: W, rows: &[ApertureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["p", "xi_db", "xi_glass_db", "xi_empty_db"])?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            db(r.xi).to_string(),
            db(r.xi_glass).to_string(),
            db(r.xi_empty).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_angle_csv<W: Write>(writer: W, rows: &[AngleRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "theta_rx_deg",
        "xi_db",
        "scan_loss_db",
        "peak_theta_deg",
        "max_sidelobe_db",
        "max_sidelobe_theta_deg",
    ])?;
    for r in rows {
        let m = &r.metrics;
        let (sl, sl_theta) = match m.max_sidelobe() {
            Some(s) => (s.level_db.to_string(), s.cut_deg.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            r.theta_rx_deg.to_string(),
            m.peak_power_db.to_string(),
            m.scan_loss_db.to_string(),
            m.peak_cut_deg.to_string(),
            sl,
            sl_theta,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{default_surrogate_table, SURROGATE_TABLE_ID};
    use crate::em::{Frequency, PlaneWave, Polarization};

    const PITCH: f64 = 3.7e-3;

    fn f26() -> Frequency {
        Frequency::from_ghz(26.0).unwrap()
    }

    fn table() -> ResponseTable {
        default_surrogate_table(&FeasibilitySet::benchmark(), 71, PITCH, f26()).unwrap()
    }

    fn template(theta: f64, n: usize) -> SweepTemplate {
        let wave = PlaneWave::new(Direction::new(0.0, 0.0).unwrap(), Polarization::Phi, 1.0, f26()).unwrap();
        let spec = SynthesisSpec::new(Direction::new(theta, 0.0).unwrap(), wave, n, n, PITCH, SURROGATE_TABLE_ID).unwrap();
        SweepTemplate::new(spec, Method::Percell, LayerStack::insulating_glass_4_10_4())
    }

    #[test]
    fn broadside_metrics() {
        let t = template(180.0, 20);
        let (_, cut) = t.layout_cut(&t.spec, &table()).unwrap();
        let m = compute_metrics(&cut, None).unwrap();
        assert!((m.peak_cut_deg - 180.0).abs() <= 0.25);
        assert!(m.scan_loss_db.abs() < 1e-9);
        assert!(m.sidelobes.iter().all(|s| s.level_db <= 0.0));
        // uniform aperture of 20 cells: first sidelobe of the sinc pattern
        assert!((m.sidelobes[0].level_db + 13.26).abs() < 0.3, "{}", m.sidelobes[0].level_db);
        let expected_bw = 0.886 * f26().wavelength() / (20.0 * PITCH);
        assert!((m.beamwidth_deg.to_radians() - expected_bw).abs() < 0.05 * expected_bw);
    }

    #[test]
    fn interpolated_peak_matches_an_oversampled_cut() {
        let t = template(150.0, 16);
        let tab = table();
        let layout = synthesize(&t.spec, &tab, Method::Percell).unwrap().layout;
        let currents = equivalent_currents(&layout, &tab, &t.spec.incident).unwrap();
        let coarse = pattern_cut(&currents, PatternCut::theta_cut(0.0), 100.0).unwrap();
        let m = compute_metrics(&coarse, None).unwrap();
        let fine_cut = PatternCut::Theta {
            phi_deg: 0.0,
            start_deg: m.peak_cut_deg - 2.0,
            stop_deg: m.peak_cut_deg + 2.0,
            samples: 161,
        };
        let fine = pattern_cut(&currents, fine_cut, 100.0).unwrap();
        let fine_peak = fine.samples.iter().map(|s| s.e_phi.norm_sqr()).fold(0.0, f64::max);
        assert!((db(m.peak_power) - db(fine_peak)).abs() < 0.05);
    }

    #[test]
    fn empty_aperture_grows_as_p_to_the_fourth() {
        let t = template(180.0, 10);
        let rows = aperture_sweep(&t, &table(), &[10, 20, 40]).unwrap();
        assert_eq!(rows.iter().map(|r| r.p).collect::<Vec<_>>(), vec![10, 20, 40]);
        for w in rows.windows(2) {
            let slope = (w[1].xi_empty / w[0].xi_empty).log10() / 2f64.log10();
            assert!((slope - 4.0).abs() < 0.01, "{slope}");
        }
        let glass = t.glass_tensor().unwrap().te.norm();
        for r in &rows {
            assert!((db(r.xi_glass) - db(r.xi_empty) - 20.0 * glass.log10()).abs() < 1e-9);
            assert!(r.xi < r.xi_empty);
        }
    }

    #[test]
    fn steering_loses_power() {
        let t = template(160.0, 20);
        let rows = angle_sweep(&t, &table(), &[180.0, 160.0]).unwrap();
        assert!(rows[0].metrics.scan_loss_db.abs() < 1e-9);
        assert!(rows[1].metrics.scan_loss_db < 0.0);
        let mut out = Vec::new();
        write_angle_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("theta_rx_deg,xi_db,scan_loss_db"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn transparency_of_a_broadside_layout() {
        let t = template(180.0, 8);
        let (layout, _) = t.layout_cut(&t.spec, &table()).unwrap();
        let map = transparency_map(&layout, &FeasibilitySet::benchmark()).unwrap();
        assert!(map.values.iter().all(|v| *v == map.values[0]));
        assert!(map.min > 0.80);
        assert!((map.min - map.mean).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_and_wrong_cuts() {
        let t = template(180.0, 4);
        let mut cut = t.baseline_cut(4, 4, TransmissionTensor::identity()).unwrap();
        cut.samples.clear();
        assert!(compute_metrics(&cut, None).is_err());
        let currents = uniform_currents(4, 4, PITCH, TransmissionTensor::identity(), &t.spec.incident).unwrap();
        let uv = pattern_cut(&currents, PatternCut::uv_grid(21), 100.0).unwrap();
        assert!(compute_metrics(&uv, None).is_err());
        let peak = uv_peak(&uv, PowerComponent::Total).unwrap();
        assert!(peak.u.abs() < 1e-12 && peak.v.abs() < 1e-12);
        assert!(aperture_sweep(&t, &table(), &[]).is_err());
    }
}
