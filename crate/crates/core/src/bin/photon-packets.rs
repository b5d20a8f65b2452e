use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use photon_packets::{
    analysis::Window,
    io::{
        commands::{
            cmd_classify, cmd_classify_grid, cmd_protocol_synth, cmd_protocol_validate, cmd_reduced, cmd_simulate,
            cmd_spectrum, linspace, SpectrumArgs,
        },
        Overrides, RunConfig,
    },
    model::{InitialKind, SystemParams},
    Error, Result,
};

/// Photon-number wave packets in a driven Jaynes-Cummings cavity.
#[derive(Parser, Debug)]
#[command(name = "photon-packets", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Integration step, overriding the configuration.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Fock truncation, overriding the configuration.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// Initial state: ground, lds_plus or lds_minus.
    #[arg(long, global = true)]
    seed_state: Option<InitialKind>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the full model and write observables and analyses.
    Simulate,
    /// Integrate the adiabatic variational model at constant drive.
    Reduced,
    /// Classify a constant drive, or a grid of drives.
    Classify(ClassifyArgs),
    /// Synthesize or validate step protocols.
    #[command(subcommand)]
    Protocol(ProtocolCommand),
    /// Spectrum of a time series column in CSV files.
    Spectrum(SpectrumCli),
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    /// Driving strength.
    #[arg(long, required_unless_present = "grid")]
    f: Option<f64>,
    /// Detuning.
    #[arg(long, required_unless_present = "grid")]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    g: f64,
    /// Print the full record as JSON instead of the bare label.
    #[arg(long)]
    json: bool,
    /// Write classify.csv over `F_MIN:F_MAX:NF DELTA_MIN:DELTA_MAX:ND`.
    #[arg(long, num_args = 2, value_names = ["F_RANGE", "DELTA_RANGE"])]
    grid: Option<Vec<String>>,
}

#[derive(Subcommand, Debug)]
enum ProtocolCommand {
    /// Solve for step times from the [synth] table.
    Synth,
    /// Replay a protocol in the reduced (and optionally full) model.
    Validate {
        /// Protocol file; defaults to the configured drive.
        #[arg(long)]
        protocol: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SpectrumCli {
    /// CSV files with a `t` column.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, default_value = "mean_n")]
    column: String,
    #[arg(long, default_value = "rect")]
    window: Window,
    /// Frequencies to match against spectral peaks.
    #[arg(long, value_delimiter = ',')]
    expected: Vec<f64>,
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("range must be LO:HI:N, got {s:?}"));
    let [lo, hi, n] = parts[..] else { return Err(bad()) };
    Ok(linspace(lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let path = path.ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    RunConfig::load(path)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let c = &cli.common;
    let ov = Overrides { dt: c.dt, n_max: c.nmax, seed_state: c.seed_state };
    if let Some(dt) = c.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("--dt must be > 0, got {dt}")));
        }
    }
    match cli.command {
        Command::Simulate => cmd_simulate(&load_config(c.config.as_deref())?, &ov, &c.out),
        Command::Reduced => cmd_reduced(&load_config(c.config.as_deref())?, &ov, &c.out),
        Command::Classify(a) => {
            if let Some(grid) = a.grid {
                return cmd_classify_grid(&parse_range(&grid[0])?, &parse_range(&grid[1])?, a.g, &c.out);
            }
            let (f, delta) = (a.f.unwrap(), a.delta.unwrap());
            let rec = cmd_classify(f, &SystemParams::new(a.g, delta)?)?;
            if a.json {
                println!("{}", serde_json::to_string(&rec).expect("record serializes"));
            } else {
                println!("{}", rec.class);
            }
            Ok(Vec::new())
        }
        Command::Protocol(ProtocolCommand::Synth) => cmd_protocol_synth(&load_config(c.config.as_deref())?, &c.out),
        Command::Protocol(ProtocolCommand::Validate { protocol }) => {
            cmd_protocol_validate(&load_config(c.config.as_deref())?, &ov, protocol.as_deref(), &c.out)
        }
        Command::Spectrum(s) => {
            let args = SpectrumArgs { column: s.column, window: s.window, expected: s.expected };
            cmd_spectrum(&s.files, &args, &c.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let record = serde_json::json!({ "error": err.kind(), "message": err.to_string(), "exit_code": err.exit_code() });
            eprintln!("{record}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
