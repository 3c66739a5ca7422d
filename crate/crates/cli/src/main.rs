//! `exotherm`: plot-ready datasets for the exothermic flow-reactor model.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration,
//! 3 convergence failure, 4 runaway detected (`simulate --fail-on-runaway`).

mod commands;
mod config;
mod manifest;

use std::env;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use exotherm_core::Error;

use config::{parse_grid, parse_kelvin_spec, parse_range, KelvinSpec, Overrides, RunConfig};
use manifest::{Output, RunManifest, Status, SCHEMA_VERSION};

/// Overrides the output directory of the configuration file.
pub const OUTPUT_DIR_ENV: &str = "EXOTHERM_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "exotherm-out";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Convergence(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Convergence(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Convergence(m) => write!(f, "analysis failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::InvalidInput(_)
            | Error::Domain(_)
            | Error::UnknownPreset { .. }
            | Error::OutsideWindow { .. } => CliError::Config(e.to_string()),
            _ => CliError::Convergence(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "exotherm", version, about = "Stability analysis of an exothermic reaction in a cooled flow reactor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Temperatures are in kelvin.
#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Named parameter set (mic-tank610, cumene-hydroperoxide)
    #[arg(long)]
    preset: Option<String>,
    /// JSON configuration file (a run manifest also works)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent slices
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Ambient temperature, or a range lo:hi for the continuation commands
    #[arg(long = "Ta", value_parser = parse_kelvin_spec)]
    ta: Option<KelvinSpec>,
    /// Scaled inverse residence time
    #[arg(long)]
    f: Option<f64>,
    /// Scaled heat-loss coefficient
    #[arg(long)]
    ell: Option<f64>,
    /// Scaled heat capacity
    #[arg(long)]
    eps: Option<f64>,
    /// Natural log of the scaled rate prefactor
    #[arg(long = "log-sigma", allow_hyphen_values = true)]
    log_sigma: Option<f64>,
    /// Scaled rate prefactor
    #[arg(long)]
    sigma: Option<f64>,
    /// Runaway threshold temperature
    #[arg(long)]
    boiling: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Heat generation and loss rates over a temperature window
    Rates {
        #[command(flatten)]
        common: Common,
        /// Temperature window lo:hi
        #[arg(long, value_parser = parse_range)]
        window: Option<[f64; 2]>,
        /// Number of samples
        #[arg(long)]
        n: Option<usize>,
    },
    /// Steady states against ambient temperature
    SteadyBranch {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ds: Option<f64>,
        #[arg(long)]
        max_points: Option<usize>,
    },
    /// Periodic orbits from a Hopf point
    CycleBranch {
        #[command(flatten)]
        common: Common,
        /// Hopf point to start from, counted from the coldest
        #[arg(long)]
        hopf: Option<usize>,
        /// Shooting segments
        #[arg(long)]
        segments: Option<usize>,
        #[arg(long)]
        max_orbits: Option<usize>,
    },
    /// Hopf and fold loci with a regime map
    Loci {
        #[command(flatten)]
        common: Common,
        /// Flow window lo:hi
        #[arg(long, value_parser = parse_range)]
        flow: Option<[f64; 2]>,
        /// Region map cells NxM (ambient x flow)
        #[arg(long, value_parser = parse_grid)]
        grid: Option<[usize; 2]>,
        /// Flow slices searched for seeds
        #[arg(long)]
        slices: Option<usize>,
    },
    /// Time integration with runaway detection
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tau_end: Option<f64>,
        /// Initial conversion variable
        #[arg(long)]
        x0: Option<f64>,
        /// Initial temperature
        #[arg(long = "T0")]
        t0: Option<f64>,
        /// Evenly spaced output samples instead of every step
        #[arg(long)]
        samples: Option<usize>,
        /// Exit with code 4 when the threshold is crossed
        #[arg(long)]
        fail_on_runaway: bool,
    },
    /// Fit the rate prefactor to a steady temperature and a Hopf point
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Steady temperature at the configured ambient temperature
        #[arg(long)]
        steady_target: Option<f64>,
        /// Ambient temperature of the Hopf point
        #[arg(long)]
        hopf_target: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Rates { .. } => "rates",
            Command::SteadyBranch { .. } => "steady-branch",
            Command::CycleBranch { .. } => "cycle-branch",
            Command::Loci { .. } => "loci",
            Command::Simulate { .. } => "simulate",
            Command::Calibrate { .. } => "calibrate",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Rates { common, .. }
            | Command::SteadyBranch { common, .. }
            | Command::CycleBranch { common, .. }
            | Command::Loci { common, .. }
            | Command::Simulate { common, .. }
            | Command::Calibrate { common, .. } => common,
        }
    }

    /// Copies subcommand flags into the configuration.
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        fn set<T: Copy>(slot: &mut Option<T>, v: Option<T>) {
            if v.is_some() {
                *slot = v;
            }
        }
        let range = match self.common().ta {
            Some(KelvinSpec::Range(r)) => Some(r),
            _ => None,
        };
        let accepts_range = matches!(self, Command::SteadyBranch { .. } | Command::CycleBranch { .. } | Command::Loci { .. });
        if range.is_some() && !accepts_range {
            return Err(CliError::Config(format!("{} takes a single --Ta value", self.name())));
        }
        match self {
            Command::Rates { window, n, .. } => {
                set(&mut cfg.rates.t_range, *window);
                set(&mut cfg.rates.points, *n);
            }
            Command::SteadyBranch { ds, max_points, .. } => {
                set(&mut cfg.steady_branch.t_range, range);
                set(&mut cfg.steady_branch.ds, *ds);
                set(&mut cfg.steady_branch.max_points, *max_points);
            }
            Command::CycleBranch { hopf, segments, max_orbits, .. } => {
                set(&mut cfg.cycle_branch.t_range, range);
                set(&mut cfg.cycle_branch.hopf_index, *hopf);
                set(&mut cfg.cycle_branch.segments, *segments);
                set(&mut cfg.cycle_branch.max_orbits, *max_orbits);
            }
            Command::Loci { flow, grid, slices, .. } => {
                set(&mut cfg.loci.t_range, range);
                set(&mut cfg.loci.f_range, *flow);
                set(&mut cfg.loci.grid, *grid);
                set(&mut cfg.loci.slices, *slices);
            }
            Command::Simulate { tau_end, x0, t0, samples, .. } => {
                set(&mut cfg.simulate.tau_end, *tau_end);
                set(&mut cfg.simulate.x0, *x0);
                set(&mut cfg.simulate.t0_kelvin, *t0);
                set(&mut cfg.simulate.samples, *samples);
            }
            Command::Calibrate { steady_target, hopf_target, .. } => {
                set(&mut cfg.calibrate.steady_kelvin, *steady_target);
                set(&mut cfg.calibrate.hopf_kelvin, *hopf_target);
            }
        }
        Ok(())
    }
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            f: self.f,
            ell: self.ell,
            eps: self.eps,
            log_rate_prefactor: self.log_sigma,
            rate_prefactor: self.sigma,
            ambient_kelvin: match self.ta {
                Some(KelvinSpec::Single(t)) => Some(t),
                _ => None,
            },
            boiling_kelvin: self.boiling,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(run(&cli.command))
}

fn run(cmd: &Command) -> u8 {
    let started = Instant::now();
    let common = cmd.common();
    let mut cfg = match common.config.as_deref().map(config::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => return fail(&e),
    };
    if let Err(e) = cmd.apply(&mut cfg) {
        return fail(&e);
    }
    if common.jobs == 0 {
        return fail(&CliError::Config("--jobs must be at least 1".into()));
    }
    let resolved = match config::resolve(&cfg, common.preset.as_deref(), &common.overrides()) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let dir = common
        .out
        .clone()
        .or_else(|| env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let mut out = match Output::create(&dir) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };

    let result = match cmd {
        Command::Rates { .. } => commands::rates(&mut cfg.rates, &resolved, &mut out),
        Command::SteadyBranch { .. } => commands::steady_branch(&mut cfg.steady_branch, &resolved, &mut out),
        Command::CycleBranch { .. } => commands::cycle_branch(&mut cfg.cycle_branch, &resolved, &mut out),
        Command::Loci { .. } => commands::loci(&mut cfg.loci, &resolved, common.jobs, &mut out),
        Command::Simulate { .. } => commands::simulate(&mut cfg.simulate, &resolved, &mut out),
        Command::Calibrate { .. } => commands::calibrate(&mut cfg.calibrate, &resolved, &mut out),
    };
    let fail_on_runaway = matches!(cmd, Command::Simulate { fail_on_runaway: true, .. });
    let (status, code, error, outcome) = match result {
        Ok(o) if o.runaway => (Status::Runaway, if fail_on_runaway { 4 } else { 0 }, None, o),
        Ok(o) => (Status::Ok, 0, None, o),
        Err(e) => (Status::Failed, e.exit_code(), Some(e.to_string()), Default::default()),
    };
    let resolved_cfg = RunConfig {
        parameters: Some(resolved.block()),
        rates: cfg.rates.clone(),
        steady_branch: cfg.steady_branch.clone(),
        cycle_branch: cfg.cycle_branch.clone(),
        loci: cfg.loci.clone(),
        simulate: cfg.simulate.clone(),
        calibrate: cfg.calibrate.clone(),
        ..Default::default()
    };
    let m = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: "exotherm",
        tool_version: env!("CARGO_PKG_VERSION"),
        command: cmd.name().to_string(),
        arguments: env::args().skip(1).collect(),
        status,
        exit_code: code,
        partial: error.is_some() && !out.files.is_empty(),
        error: error.clone(),
        source: resolved.source.clone(),
        resolved: resolved_cfg,
        tolerances: outcome.tolerances,
        outputs: out.files.clone(),
        summary: outcome.summary,
        diagnostics: outcome.diagnostics,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    match out.write_manifest(&m) {
        Ok(path) => {
            if let Some(e) = &error {
                eprintln!("exotherm {}: {e}", cmd.name());
            }
            for f in &m.outputs {
                println!("{} ({} rows)", out.dir().join(&f.path).display(), f.rows);
            }
            println!("{}", path.display());
            if status == Status::Runaway {
                println!("runaway: temperature crossed {} K", resolved.boiling_kelvin);
            }
            code
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> u8 {
    eprintln!("exotherm: {e}");
    e.exit_code()
}
