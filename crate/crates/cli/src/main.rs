//! `skinforge`: synthesize and evaluate transparent transmitting skins.

mod commands;
mod config;
mod error;
mod gnuplot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use skinforge::Method;

use commands::{Baseline, Context, SweepKind};
use config::{Overrides, RunConfig};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "skinforge", version, about = "Optically-transparent electromagnetic skin design")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Percell,
    Pso,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Percell => Method::Percell,
            MethodArg::Pso => Method::Pso,
        }
    }
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; built-in benchmark values when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    freq_ghz: Option<f64>,
    #[arg(long, global = true)]
    pitch_mm: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    rx_theta_deg: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    rx_phi_deg: Option<f64>,
    #[arg(long, global = true)]
    p: Option<usize>,
    #[arg(long, global = true)]
    q: Option<usize>,
    /// `surrogate` or a response-table CSV.
    #[arg(long, global = true)]
    table: Option<String>,
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write gnuplot scripts next to the data files.
    #[arg(long, global = true)]
    gnuplot: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Meta-atom response, figure of merit and transparency.
    Atom,
    /// Synthesize a layout for the configured receiver.
    Synthesize,
    /// Far-field pattern of a layout or of a baseline aperture.
    Pattern {
        #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
        layout: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// Evaluate a u-v grid instead of a theta cut.
        #[arg(long)]
        uv: bool,
    },
    /// Peak power versus aperture size or receiver angle.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        /// Aperture sizes P (=Q), comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Receiver angles in deg, comma separated.
        #[arg(long, value_delimiter = ',')]
        receivers: Option<Vec<f64>>,
    },
}

fn load_config(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        freq_ghz: c.freq_ghz,
        pitch_mm: c.pitch_mm,
        rx_theta_deg: c.rx_theta_deg,
        rx_phi_deg: c.rx_phi_deg,
        p: c.p,
        q: c.q,
        table: c.table.clone(),
        method: c.method.map(Method::from),
        seed: c.seed,
        out: c.out.clone(),
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))?;
    }
    let config = load_config(&cli.common)?;
    let table = config.table()?;
    let ctx = Context {
        config,
        gnuplot: cli.common.gnuplot,
    };
    match cli.command {
        Command::Atom => commands::atom(&ctx, &table),
        Command::Synthesize => commands::synthesize_layout(&ctx, &table),
        Command::Pattern { layout, baseline, uv } => {
            commands::pattern(&ctx, &table, layout.as_deref(), baseline, uv)
        }
        Command::Sweep { kind, sizes, receivers } => commands::sweep(&ctx, &table, kind, sizes, receivers),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("skinforge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
