//! Run configuration: a JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skinforge::synthesis::Boundary;
use skinforge::{
    default_surrogate_table, AtomDescriptors, AtomWeights, Direction, FeasibilitySet, Frequency, Layer, LayerStack,
    Method, OptimizerConfig, PlaneWave, Polarization, ResponseTable, SynthesisSpec,
};

use crate::error::CliError;

/// Where the meta-atom response comes from: the keyword `surrogate` or a CSV path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum TableSource {
    Surrogate,
    Path(PathBuf),
}

impl From<String> for TableSource {
    fn from(s: String) -> Self {
        if s == "surrogate" {
            TableSource::Surrogate
        } else {
            TableSource::Path(PathBuf::from(s))
        }
    }
}

impl From<TableSource> for String {
    fn from(t: TableSource) -> Self {
        match t {
            TableSource::Surrogate => "surrogate".into(),
            TableSource::Path(p) => p.to_string_lossy().into_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub thickness_mm: f64,
    pub permittivity: f64,
    #[serde(default)]
    pub loss_tangent: f64,
}

/// Meta-atom geometry; only the ring radius is free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub ring_radius_mm: [f64; 2],
    pub ring_width_um: f64,
    pub wire_radius_um: f64,
    pub radial_gap_um: f64,
    pub angular_gap_deg: f64,
}

impl Default for AtomConfig {
    fn default() -> Self {
        Self {
            ring_radius_mm: [0.9, 1.6],
            ring_width_um: 795.0,
            wire_radius_um: 30.0,
            radial_gap_um: 225.0,
            angular_gap_deg: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidenceConfig {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub polarization: Polarization,
    pub magnitude: f64,
}

impl Default for IncidenceConfig {
    fn default() -> Self {
        Self {
            theta_deg: 0.0,
            phi_deg: 0.0,
            polarization: Polarization::Phi,
            magnitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            theta_deg: 180.0,
            phi_deg: 0.0,
        }
    }
}

/// Swarm settings; the seed lives at the top level of the config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub stagnation: usize,
    pub boundary: Boundary,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            swarm_size: d.swarm_size,
            iterations: d.iterations,
            inertia: d.inertia,
            cognitive: d.cognitive,
            social: d.social,
            stagnation: d.stagnation,
            boundary: d.boundary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternConfig {
    /// Cut plane; the receiver azimuth when absent.
    pub phi_deg: Option<f64>,
    pub samples: usize,
    pub uv_samples: usize,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            phi_deg: None,
            samples: 721,
            uv_samples: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub aperture_sizes: Vec<usize>,
    pub receivers_deg: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            aperture_sizes: vec![20, 40, 60, 80, 100, 120, 140, 160, 180, 200],
            receivers_deg: vec![180.0, 170.0, 160.0, 150.0, 140.0, 130.0, 120.0, 110.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub frequency_ghz: f64,
    pub pitch_mm: f64,
    pub stack: Vec<LayerConfig>,
    pub table: TableSource,
    pub surrogate_rows: usize,
    pub atom: AtomConfig,
    pub weights: AtomWeights,
    pub incidence: IncidenceConfig,
    pub receiver: ReceiverConfig,
    pub p: usize,
    pub q: usize,
    pub method: Method,
    pub search_points: usize,
    pub optimizer: OptimizerSettings,
    pub seed: u64,
    pub radius_m: f64,
    pub pattern: PatternConfig,
    pub sweep: SweepConfig,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            frequency_ghz: 26.0,
            pitch_mm: 3.7,
            stack: vec![
                LayerConfig { thickness_mm: 4.0, permittivity: 5.5, loss_tangent: 0.0 },
                LayerConfig { thickness_mm: 10.0, permittivity: 1.0, loss_tangent: 0.0 },
                LayerConfig { thickness_mm: 4.0, permittivity: 5.5, loss_tangent: 0.0 },
            ],
            table: TableSource::Surrogate,
            surrogate_rows: 71,
            atom: AtomConfig::default(),
            weights: AtomWeights::default(),
            incidence: IncidenceConfig::default(),
            receiver: ReceiverConfig::default(),
            p: 30,
            q: 30,
            method: Method::Percell,
            search_points: skinforge::synthesis::DEFAULT_SEARCH_POINTS,
            optimizer: OptimizerSettings::default(),
            seed: 0,
            radius_m: skinforge::DEFAULT_RADIUS_M,
            pattern: PatternConfig::default(),
            sweep: SweepConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// Flag values that replace config entries when given.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub freq_ghz: Option<f64>,
    pub pitch_mm: Option<f64>,
    pub rx_theta_deg: Option<f64>,
    pub rx_phi_deg: Option<f64>,
    pub p: Option<usize>,
    pub q: Option<usize>,
    pub table: Option<String>,
    pub method: Option<Method>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    /// Reads a config file; relative table paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        if let TableSource::Path(p) = &cfg.table {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.table = TableSource::Path(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.freq_ghz {
            self.frequency_ghz = v;
        }
        if let Some(v) = o.pitch_mm {
            self.pitch_mm = v;
        }
        if let Some(v) = o.rx_theta_deg {
            self.receiver.theta_deg = v;
        }
        if let Some(v) = o.rx_phi_deg {
            self.receiver.phi_deg = v;
        }
        if let Some(v) = o.p {
            self.p = v;
        }
        if let Some(v) = o.q {
            self.q = v;
        }
        if let Some(v) = &o.table {
            self.table = TableSource::from(v.clone());
        }
        if let Some(v) = o.method {
            self.method = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
    }

    /// Rejects physically inconsistent settings before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("frequency_ghz", self.frequency_ghz),
            ("pitch_mm", self.pitch_mm),
            ("radius_m", self.radius_m),
            ("incidence.magnitude", self.incidence.magnitude),
            ("atom.ring_width_um", self.atom.ring_width_um),
            ("atom.wire_radius_um", self.atom.wire_radius_um),
            ("atom.radial_gap_um", self.atom.radial_gap_um),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_error(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.p == 0 || self.q == 0 {
            return Err(config_error(format!("p and q must be >= 1, got {} x {}", self.p, self.q)));
        }
        let rx = self.receiver.theta_deg;
        if !(rx > 90.0 && rx <= 180.0) {
            return Err(config_error(format!(
                "receiver theta must lie in (90, 180] deg (transmitted side), got {rx}"
            )));
        }
        let inc = self.incidence.theta_deg;
        if !(0.0..90.0).contains(&inc) {
            return Err(config_error(format!("incidence theta must lie in [0, 90) deg, got {inc}")));
        }
        let [lo, hi] = self.atom.ring_radius_mm;
        if !(lo > 0.0 && lo <= hi) {
            return Err(config_error(format!("atom.ring_radius_mm [{lo}, {hi}] is not a valid range")));
        }
        if 2.0 * hi > self.pitch_mm {
            return Err(config_error(format!(
                "ring diameter 2 x {hi} mm exceeds the {} mm pitch",
                self.pitch_mm
            )));
        }
        if self.stack.is_empty() {
            return Err(config_error("stack needs at least one layer"));
        }
        for (i, l) in self.stack.iter().enumerate() {
            if !(l.thickness_mm > 0.0 && l.permittivity >= 1.0 && l.loss_tangent >= 0.0) {
                return Err(config_error(format!("stack layer {i} is not physical: {l:?}")));
            }
        }
        if self.search_points < 2 {
            return Err(config_error("search_points must be >= 2"));
        }
        if self.pattern.samples < 2 || self.pattern.uv_samples < 2 {
            return Err(config_error("pattern sampling needs at least 2 points"));
        }
        self.feasibility()?;
        self.optimizer_config().validate().map_err(|e| config_error(e.to_string()))?;
        self.synthesis_spec(skinforge::SURROGATE_TABLE_ID)?;
        Ok(())
    }

    pub fn frequency(&self) -> Result<Frequency, CliError> {
        Frequency::from_ghz(self.frequency_ghz).map_err(|e| config_error(e.to_string()))
    }

    pub fn pitch_m(&self) -> f64 {
        self.pitch_mm * 1e-3
    }

    pub fn feasibility(&self) -> Result<FeasibilitySet, CliError> {
        let a = &self.atom;
        let fixed = [a.ring_width_um * 1e-6, a.wire_radius_um * 1e-6, a.radial_gap_um * 1e-6, a.angular_gap_deg];
        let set = FeasibilitySet::new(
            [a.ring_radius_mm[0] * 1e-3, fixed[0], fixed[1], fixed[2], fixed[3]],
            [a.ring_radius_mm[1] * 1e-3, fixed[0], fixed[1], fixed[2], fixed[3]],
        )
        .map_err(|e| config_error(e.to_string()))?;
        AtomDescriptors::new(set.upper[0], fixed[0], fixed[1], fixed[2], fixed[3])
            .map_err(|e| config_error(e.to_string()))?;
        Ok(set)
    }

    pub fn stack(&self) -> Result<LayerStack, CliError> {
        let layers = self
            .stack
            .iter()
            .map(|l| Layer::new(l.thickness_mm * 1e-3, l.permittivity, l.loss_tangent))
            .collect::<skinforge::Result<Vec<_>>>()
            .map_err(|e| config_error(e.to_string()))?;
        LayerStack::new(layers).map_err(|e| config_error(e.to_string()))
    }

    pub fn incident(&self) -> Result<PlaneWave, CliError> {
        let i = &self.incidence;
        let dir = Direction::new(i.theta_deg, i.phi_deg).map_err(|e| config_error(e.to_string()))?;
        PlaneWave::new(dir, i.polarization, i.magnitude, self.frequency()?).map_err(|e| config_error(e.to_string()))
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            swarm_size: o.swarm_size,
            iterations: o.iterations,
            inertia: o.inertia,
            cognitive: o.cognitive,
            social: o.social,
            stagnation: o.stagnation,
            seed: self.seed,
            boundary: o.boundary,
        }
    }

    pub fn synthesis_spec(&self, table_id: &str) -> Result<SynthesisSpec, CliError> {
        let rx = Direction::new(self.receiver.theta_deg, self.receiver.phi_deg).map_err(|e| config_error(e.to_string()))?;
        let mut spec = SynthesisSpec::new(rx, self.incident()?, self.p, self.q, self.pitch_m(), table_id)
            .map_err(|e| config_error(e.to_string()))?;
        spec.optimizer = self.optimizer_config();
        spec.search_points = self.search_points;
        spec.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(spec)
    }

    /// Builds the surrogate or reads the table file.
    pub fn table(&self) -> Result<ResponseTable, CliError> {
        let f = self.frequency()?;
        let feasibility = self.feasibility()?;
        match &self.table {
            TableSource::Surrogate => default_surrogate_table(&feasibility, self.surrogate_rows, self.pitch_m(), f)
                .map_err(|e| config_error(e.to_string())),
            TableSource::Path(path) => {
                let table = ResponseTable::load_csv(path, self.pitch_m(), f)
                    .map_err(|e| CliError::Input(format!("table {}: {e}", path.display())))?;
                table
                    .validate_against(&feasibility)
                    .map_err(|e| CliError::Input(format!("table {}: {e}", path.display())))?;
                Ok(table)
            }
        }
    }
}
