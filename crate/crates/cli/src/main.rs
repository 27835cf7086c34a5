use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ris_core::experiment::gradcheck::{run_gradcheck, GradcheckOptions};
use ris_core::experiment::{run_rmse_sweep_traced, run_se_sweep_traced, ExperimentConfig, Preset};
use ris_core::{AoTrace, Error};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_GRADCHECK: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ris-sim",
    version,
    about = "MMSE RIS phase-shift design: Monte-Carlo sweeps and gradient checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Channel-estimation RMSE sweep.
    RmseSweep(SweepArgs),
    /// Spectral-efficiency sweep.
    SeSweep(SweepArgs),
    /// Analytic gradients and Hessian diagonals against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// TOML file merged over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (default: `output` from the config, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum, default_value = "desk")]
    preset: PresetArg,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Worker threads (0: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Writes the training-phase AO trace of the first sweep value.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Added to every analytic gradient entry (negative control).
    #[arg(long, hide = true, default_value_t = 0.0)]
    perturb: f64,
}

enum Failure {
    Lib(Error),
    Gradcheck,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_)
        | Error::InsufficientPilots(_)
        | Error::EmptySubspace
        | Error::Oracle(_)
        | Error::NonMonotone { .. } => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let preset = args.preset.into();
    match &args.config {
        Some(path) => ExperimentConfig::load(path, preset),
        None => Ok(ExperimentConfig::preset(preset)),
    }
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_trace(path: &Path, traces: &[(f64, AoTrace)]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if let Some((_, t)) = traces.first() {
        t.write_csv(&mut w)?;
    }
    w.flush()
}

fn sweep(args: &SweepArgs, se: bool) -> Result<(), Failure> {
    let mut cfg = load_config(&args.common)?;
    if let Some(seed) = args.common.seed {
        cfg.mc.seed = seed;
    }
    if let Some(n) = args.common.trials {
        if se {
            cfg.mc.se_trials = n;
        } else {
            cfg.mc.rmse_trials = n;
        }
    }
    if let Some(w) = args.workers {
        cfg.mc.workers = w;
    }
    cfg.validate()?;
    let (result, traces) = if se {
        let out = run_se_sweep_traced(&cfg)?;
        (out.result, out.traces)
    } else {
        let out = run_rmse_sweep_traced(&cfg)?;
        (out.result, out.traces)
    };
    let out_path = args
        .common
        .out
        .clone()
        .or_else(|| cfg.output.clone().map(PathBuf::from));
    let mut w = open_output(out_path.as_deref())?;
    result.write_csv(&mut w)?;
    w.flush()?;
    if let Some(p) = &args.trace_out {
        write_trace(p, &traces)?;
    }
    Ok(())
}

fn gradcheck(args: &GradcheckArgs) -> Result<(), Failure> {
    // The config is only checked; gradcheck draws its own random instances.
    load_config(&args.common)?;
    let mut opts = GradcheckOptions {
        perturbation: args.perturb,
        ..Default::default()
    };
    if let Some(seed) = args.common.seed {
        opts.seed = seed;
    }
    if let Some(n) = args.common.trials {
        if n == 0 {
            return Err(Error::Validation("gradcheck needs at least one instance".into()).into());
        }
        opts.instances = n;
    }
    let report = run_gradcheck(&opts)?;
    let mut w = open_output(args.common.out.as_deref())?;
    write!(w, "{report}")?;
    w.flush()?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Gradcheck)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::RmseSweep(a) => sweep(a, false),
        Command::SeSweep(a) => sweep(a, true),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Gradcheck) => {
            eprintln!("error: gradient check failed");
            ExitCode::from(EXIT_GRADCHECK)
        }
    }
}
