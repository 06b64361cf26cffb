use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use skinforge::analysis::{
    aperture_sweep, angle_sweep, compute_metrics, transparency_map, uv_local_maxima, uv_peak, write_angle_csv,
    write_aperture_csv, PatternMetrics, PowerComponent, SweepTemplate, UvPoint,
};
use skinforge::atom::{atom_fill_factor, mesh_fill_factor, mesh_optical_transmittance, write_rows_csv};
use skinforge::synthesis::write_convergence_csv;
use skinforge::{
    atom_cost, atom_optical_transmittance, equivalent_currents, pattern_cut, synthesize, uniform_currents,
    AtomWeights, CurrentSheet, LayoutDocument, Method, PatternCut, ResponseTable, TransmissionTensor,
};

use crate::config::RunConfig;
use crate::error::{numerical, output, CliError};
use crate::gnuplot;

/// Uniform comparison apertures for `pattern --baseline`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// The bare window stack.
    Glass,
    /// An ideal hollow aperture (identity tensor).
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    Aperture,
    Angle,
}

pub struct Context {
    pub config: RunConfig,
    pub gnuplot: bool,
}

impl Context {
    fn out_dir(&self) -> Result<&Path, CliError> {
        let dir = self.config.out.as_path();
        std::fs::create_dir_all(dir).map_err(|e| output(dir, e))?;
        Ok(dir)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_dir()?.join(name);
        std::fs::write(&path, bytes).map_err(|e| output(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write_csv(
        &self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> skinforge::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(numerical)?;
        self.write(name, &buf)
    }

    fn script(&self, name: &str, text: String) -> Result<(), CliError> {
        if self.gnuplot {
            self.write(name, text.as_bytes())?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct AtomMetrics {
    table_id: String,
    table_rows: usize,
    f_mesh: f64,
    t_mesh: f64,
    f_atom_max: f64,
    phase_coverage_te_deg: f64,
    phase_coverage_tm_deg: f64,
    min_magnitude_te_db: f64,
    min_magnitude_tm_db: f64,
    min_optical_transmittance: f64,
    cost: f64,
    weights: AtomWeights,
}

pub fn atom(ctx: &Context, table: &ResponseTable) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let set = cfg.feasibility()?;
    let pitch = cfg.pitch_m();

    let grid = table.dense_grid(cfg.search_points);
    let rows = grid
        .iter()
        .map(|d1| table.sample(*d1))
        .collect::<skinforge::Result<Vec<_>>>()
        .map_err(numerical)?;
    ctx.write_csv("atom_response.csv", |w| write_rows_csv(w, &rows))?;

    let cost = atom_cost(table, &set, &cfg.weights).map_err(numerical)?;
    let corner = set.least_transparent_corner();
    let metrics = AtomMetrics {
        table_id: table.id().to_string(),
        table_rows: table.rows().len(),
        f_mesh: mesh_fill_factor(&corner),
        t_mesh: mesh_optical_transmittance(&corner),
        f_atom_max: atom_fill_factor(&corner, pitch).map_err(numerical)?,
        phase_coverage_te_deg: cost.phase_coverage_te_deg,
        phase_coverage_tm_deg: cost.phase_coverage_tm_deg,
        min_magnitude_te_db: cost.min_magnitude_te_db(),
        min_magnitude_tm_db: cost.min_magnitude_tm_db(),
        min_optical_transmittance: cost.min_optical_transmittance,
        cost: cost.cost,
        weights: cfg.weights,
    };
    ctx.write_json("atom_metrics.json", &metrics)?;

    let (lo, hi) = set.ring_radius_range();
    let n = 141;
    let mut text = String::from("d1_mm,f_atom,t_atom\n");
    let mut t_min = f64::INFINITY;
    for i in 0..n {
        let d1 = if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
        let d = set.descriptors_at(d1);
        let f = atom_fill_factor(&d, pitch).map_err(numerical)?;
        let t = atom_optical_transmittance(&d, pitch).map_err(numerical)?;
        t_min = t_min.min(t);
        text.push_str(&format!("{},{f},{t}\n", d1 * 1e3));
    }
    ctx.write("transparency_vs_d1.csv", text.as_bytes())?;
    ctx.script("atom.gp", gnuplot::atom())?;

    println!(
        "table `{}`: phase coverage TE {:.2} deg, TM {:.2} deg; magnitude floor {:.2} dB",
        table.id(),
        cost.phase_coverage_te_deg,
        cost.phase_coverage_tm_deg,
        cost.min_magnitude_te_db()
    );
    println!(
        "F_mesh {:.4}, T_mesh {:.4}, min T_atom {t_min:.4}, atom cost {:.5}",
        metrics.f_mesh, metrics.t_mesh, cost.cost
    );
    Ok(())
}

pub fn synthesize_layout(ctx: &Context, table: &ResponseTable) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let spec = cfg.synthesis_spec(table.id())?;
    let start = Instant::now();
    let result = synthesize(&spec, table, cfg.method).map_err(numerical)?;
    let elapsed = start.elapsed().as_secs_f64();

    let doc = LayoutDocument::from_synthesis(&spec, cfg.method, &result);
    let mut text = doc.to_json().map_err(numerical)?;
    text.push('\n');
    ctx.write("layout.json", text.as_bytes())?;
    if cfg.method == Method::Pso {
        ctx.write_csv("convergence.csv", |w| write_convergence_csv(w, &result.trace))?;
        ctx.script("convergence.gp", gnuplot::convergence())?;
    }

    let map = transparency_map(&result.layout, &cfg.feasibility()?).map_err(numerical)?;
    let mut csv = String::from("p,q,d1_mm,t_atom\n");
    for p in 0..map.p_count {
        for q in 0..map.q_count {
            let idx = p * map.q_count + q;
            csv.push_str(&format!("{p},{q},{},{}\n", result.layout.cells()[idx] * 1e3, map.values[idx]));
        }
    }
    ctx.write("transparency_map.csv", csv.as_bytes())?;
    ctx.script("layout.gp", gnuplot::layout())?;

    let method = match cfg.method {
        Method::Percell => "per-cell",
        Method::Pso => "pso",
    };
    println!(
        "{method} synthesis, {} x {} cells, receiver ({}, {}) deg",
        cfg.p, cfg.q, cfg.receiver.theta_deg, cfg.receiver.phi_deg
    );
    println!("upsilon = {:.6e}", result.upsilon);
    println!("min T_atom = {:.4}, mean T_atom = {:.4}", map.min, map.mean);
    println!("wall time = {elapsed:.3} s");
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "lowercase")]
enum PatternSource {
    Layout(PathBuf),
    Baseline(Baseline),
}

#[derive(Serialize)]
struct PatternSidecar {
    source: PatternSource,
    cut: PatternCut,
    radius_m: f64,
    normalized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<PatternMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uv_peak: Option<UvPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    uv_local_maxima: Vec<UvPoint>,
}

fn layout_currents(ctx: &Context, path: &Path, table: &ResponseTable) -> Result<CurrentSheet, CliError> {
    let cfg = &ctx.config;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read layout {}: {e}", path.display())))?;
    let doc = LayoutDocument::from_json(&text).map_err(|e| CliError::Input(format!("layout {}: {e}", path.display())))?;
    let layout = doc
        .layout()
        .map_err(|e| CliError::Input(format!("layout {}: {e}", path.display())))?;
    layout
        .check_table(table)
        .map_err(|e| CliError::Input(format!("layout {} does not match the table: {e}", path.display())))?;
    let incident = cfg.incident()?;
    if let Some(s) = &doc.spec {
        let same = s.incidence_theta_deg == cfg.incidence.theta_deg
            && s.incidence_phi_deg == cfg.incidence.phi_deg
            && s.polarization == cfg.incidence.polarization
            && s.frequency_hz == incident.frequency.hertz();
        if !same {
            log::warn!("layout was synthesized for a different incident wave; using the configured one");
        }
    }
    equivalent_currents(&layout, table, &incident).map_err(numerical)
}

pub fn pattern(
    ctx: &Context,
    table: &ResponseTable,
    layout: Option<&Path>,
    baseline: Option<Baseline>,
    uv: bool,
) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let (currents, source) = match (layout, baseline) {
        (Some(path), None) => (layout_currents(ctx, path, table)?, PatternSource::Layout(path.to_path_buf())),
        (None, Some(kind)) => {
            let tensor = match kind {
                Baseline::Empty => TransmissionTensor::identity(),
                Baseline::Glass => {
                    let spec = cfg.synthesis_spec(table.id())?;
                    SweepTemplate::new(spec, cfg.method, cfg.stack()?).glass_tensor().map_err(numerical)?
                }
            };
            let currents = uniform_currents(cfg.p, cfg.q, cfg.pitch_m(), tensor, &cfg.incident()?).map_err(numerical)?;
            (currents, PatternSource::Baseline(kind))
        }
        _ => return Err(CliError::Config("pattern needs exactly one of --layout or --baseline".into())),
    };

    let cut = if uv {
        PatternCut::uv_grid(cfg.pattern.uv_samples)
    } else {
        PatternCut::Theta {
            phi_deg: cfg.pattern.phi_deg.unwrap_or(cfg.receiver.phi_deg),
            start_deg: 90.0,
            stop_deg: 270.0,
            samples: cfg.pattern.samples,
        }
    };
    let table_out = pattern_cut(&currents, cut, cfg.radius_m).map_err(numerical)?;
    let stem = if uv { "pattern_uv" } else { "pattern" };
    ctx.write_csv(&format!("{stem}.csv"), |w| table_out.write_csv(w))?;

    let mut sidecar = PatternSidecar {
        source,
        cut,
        radius_m: cfg.radius_m,
        normalized: table_out.normalized,
        metrics: None,
        uv_peak: None,
        uv_local_maxima: Vec::new(),
    };
    if uv {
        let peak = uv_peak(&table_out, PowerComponent::Total).map_err(numerical)?;
        let mut maxima = uv_local_maxima(&table_out, PowerComponent::Total).map_err(numerical)?;
        maxima.truncate(8);
        println!(
            "u-v peak at ({:.3}, {:.3}), {:.2} dB",
            peak.u,
            peak.v,
            10.0 * peak.power.log10()
        );
        sidecar.uv_peak = Some(peak);
        sidecar.uv_local_maxima = maxima;
        ctx.script(&format!("{stem}.gp"), gnuplot::pattern_uv(cfg.pattern.uv_samples))?;
    } else {
        let m = compute_metrics(&table_out, None).map_err(numerical)?;
        println!(
            "peak {:.2} dB at cut angle {:.2} deg, beamwidth {:.2} deg",
            m.peak_power_db, m.peak_cut_deg, m.beamwidth_deg
        );
        if let Some(s) = m.max_sidelobe() {
            println!("largest sidelobe {:.2} dB at {:.2} deg", s.level_db, s.cut_deg);
        }
        sidecar.metrics = Some(m);
        ctx.script(&format!("{stem}.gp"), gnuplot::pattern_cut())?;
    }
    ctx.write_json(&format!("{stem}.json"), &sidecar)?;
    Ok(())
}

pub fn sweep(
    ctx: &Context,
    table: &ResponseTable,
    kind: SweepKind,
    sizes: Option<Vec<usize>>,
    receivers: Option<Vec<f64>>,
) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let mut template = SweepTemplate::new(cfg.synthesis_spec(table.id())?, cfg.method, cfg.stack()?);
    template.radius_m = cfg.radius_m;
    template.cut_samples = cfg.pattern.samples;
    let start = Instant::now();
    match kind {
        SweepKind::Aperture => {
            let sizes = sizes.unwrap_or_else(|| cfg.sweep.aperture_sizes.clone());
            if sizes.is_empty() || sizes.contains(&0) {
                return Err(CliError::Config("aperture sizes must be a non-empty list of positive integers".into()));
            }
            let rows = aperture_sweep(&template, table, &sizes).map_err(numerical)?;
            ctx.write_csv("aperture_sweep.csv", |w| write_aperture_csv(w, &rows))?;
            ctx.script("aperture_sweep.gp", gnuplot::aperture_sweep())?;
            if let (Some(a), Some(b)) = (rows.first(), rows.last()) {
                println!(
                    "Xi(P={}) / Xi(P={}) = {:.2} dB",
                    b.p,
                    a.p,
                    10.0 * (b.xi / a.xi).log10()
                );
            }
        }
        SweepKind::Angle => {
            let receivers = receivers.unwrap_or_else(|| cfg.sweep.receivers_deg.clone());
            if receivers.is_empty() || receivers.iter().any(|t| !(*t > 90.0 && *t <= 180.0)) {
                return Err(CliError::Config("receiver angles must lie in (90, 180] deg".into()));
            }
            let rows = angle_sweep(&template, table, &receivers).map_err(numerical)?;
            ctx.write_csv("angle_sweep.csv", |w| write_angle_csv(w, &rows))?;
            ctx.script("angle_sweep.gp", gnuplot::angle_sweep())?;
            for r in &rows {
                println!(
                    "theta_rx {:>6.1}: peak {:.2} deg, Xi {:.2} dB, scan loss {:.2} dB",
                    r.theta_rx_deg, r.metrics.peak_cut_deg, r.metrics.peak_power_db, r.metrics.scan_loss_db
                );
            }
        }
    }
    println!("wall time = {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}
