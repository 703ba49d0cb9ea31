//! Command-line interface: `run` and `sweep` produce success-rate CSVs,
//! `overhead` prints the closed-form training-cost table, and `pattern`
//! dumps beam patterns of a (possibly index-removed) codebook state.
//!
//! Exit codes: 0 success, 2 usage, 3 bad config, 4 I/O failure.

use crate::array::{pattern_samples, write_pattern};
use crate::channel::{draw_channel, snr_to_noise, MeasurementModel};
use crate::codebook::CodebookState;
use crate::experiment::{
    self, run_monte_carlo, trial_seed, write_csv, ExperimentConfig, Method, OverheadMethod,
};
use crate::training::{train_dynamic, write_trace};
use crate::{Error, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Parser)]
#[command(
    name = "beamtrain",
    version,
    about = "Beam training simulator with dynamically nulled hierarchical codebooks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one Monte Carlo configuration and write its curve as CSV.
    Run(RunArgs),
    /// Run several methods on one configuration and write a combined CSV.
    Sweep(SweepArgs),
    /// Print the closed-form training overhead table.
    Overhead(OverheadArgs),
    /// Dump the beam pattern of one codebook slot.
    Pattern(PatternArgs),
}

/// Config file plus flag overrides; flags win over file keys, file keys
/// win over defaults.
#[derive(Args)]
struct ConfigArgs {
    /// Config file with line-oriented `key = value` entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Transmit array size (power of two).
    #[arg(long = "Nt")]
    nt: Option<usize>,
    /// Receive array size (power of two).
    #[arg(long = "Nr")]
    nr: Option<usize>,
    /// True path count per channel draw.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Paths to detect per trial.
    #[arg(long = "Ld")]
    l_d: Option<usize>,
    /// Start layer of the hierarchical search.
    #[arg(long = "S0")]
    s0: Option<u32>,
    /// Transmit power (linear).
    #[arg(long = "P")]
    power: Option<f64>,
    /// SNR points in dB: `lo..hi step d` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Trials per SNR point.
    #[arg(long)]
    trials: Option<u64>,
    /// Experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Angle distribution: continuous or on_grid.
    #[arg(long = "angle-mode")]
    angle_mode: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Training method: dynamic, baseline_subtraction, or exhaustive.
    #[arg(long)]
    method: Option<String>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also run one instrumented trial and write its measurement trace here.
    #[arg(long = "dump-trace")]
    dump_trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated methods to compare.
    #[arg(long, default_value = "dynamic,baseline_subtraction")]
    methods: String,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OverheadArgs {
    #[arg(long = "Nt", default_value_t = 32)]
    nt: usize,
    #[arg(long = "Ld", default_value_t = 3)]
    l_d: usize,
    #[arg(long = "S0", default_value_t = 2)]
    s0: u32,
    /// Codewords per stage assumed for the acs formula.
    #[arg(long = "K", default_value_t = 2)]
    k: usize,
}

#[derive(Args)]
struct PatternArgs {
    /// Array size (power of two); required unless --state is given.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Start layer of the codebook state.
    #[arg(long = "S0")]
    s0: Option<u32>,
    /// Codebook descriptor file (`N S0 removed=<comma list>`).
    #[arg(long)]
    state: Option<PathBuf>,
    /// Layer of the codeword to dump.
    #[arg(long)]
    layer: u32,
    /// Position of the codeword within the layer.
    #[arg(long)]
    pos: usize,
    /// Bottom-layer indices to remove before synthesis.
    #[arg(long, value_delimiter = ',')]
    remove: Vec<usize>,
    /// Grid points across [-1, 1].
    #[arg(long, default_value_t = 1024)]
    grid: usize,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` and runs the selected subcommand, returning the process
/// exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Overhead(args) => cmd_overhead(args),
        Command::Pattern(args) => cmd_pattern(args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => EXIT_IO,
                _ => EXIT_CONFIG,
            }
        }
    }
}

fn effective_config(args: &ConfigArgs, method: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => experiment::parse_config_unchecked(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(nt) = args.nt {
        cfg.nt = nt;
    }
    if let Some(nr) = args.nr {
        cfg.nr = nr;
    }
    if let Some(l) = args.l {
        cfg.l = l;
    }
    if let Some(l_d) = args.l_d {
        cfg.l_d = l_d;
    }
    if let Some(s0) = args.s0 {
        cfg.s0 = s0;
    }
    if let Some(power) = args.power {
        cfg.power = power;
    }
    if let Some(snr) = &args.snr {
        cfg.snr_db_list = experiment::parse_snr_list(snr).map_err(Error::InvalidArgument)?;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = &args.angle_mode {
        cfg.angle_mode = mode.parse()?;
    }
    if let Some(method) = method {
        cfg.method = method.parse()?;
    }
    cfg.validate()?;
    if cfg.nt != cfg.nr {
        eprintln!(
            "note: unequal arrays (Nt={}, Nr={}); the joint descent continues alone on the deeper side",
            cfg.nt, cfg.nr
        );
    }
    Ok(cfg)
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(path) => fs::write(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = effective_config(&args.config, args.method.as_deref())?;
    if let Some(trace_path) = &args.dump_trace {
        dump_one_trace(&cfg, trace_path)?;
    }
    eprintln!(
        "running {}: {} SNR points x {} trials",
        cfg.method,
        cfg.snr_db_list.len(),
        cfg.trials
    );
    let points = run_monte_carlo(&cfg)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &[(cfg.method, points)])?;
    write_output(args.out.as_deref(), &buf)
}

/// One instrumented trial (first SNR point, trial 0) for debugging.
fn dump_one_trace(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, 0, 0));
    let ch = draw_channel(cfg.nt, cfg.nr, cfg.l, cfg.angle_mode, &mut rng)?;
    let noise_var = snr_to_noise(cfg.snr_db_list[0], cfg.power);
    let mut mm = MeasurementModel::new(cfg.power, noise_var, rng)?;
    let outcome = train_dynamic(cfg.nt, cfg.nr, cfg.l_d, cfg.s0, &ch, &mut mm)?;
    let mut buf = Vec::new();
    write_trace(&mut buf, &outcome)?;
    fs::write(path, buf)?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let methods: Vec<Method> = args
        .methods
        .split(',')
        .map(|m| m.trim().parse())
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods to sweep".into()));
    }
    let mut series = Vec::with_capacity(methods.len());
    for method in methods {
        let cfg = effective_config(&args.config, Some(method.name()))?;
        eprintln!(
            "sweeping {}: {} SNR points x {} trials",
            method,
            cfg.snr_db_list.len(),
            cfg.trials
        );
        series.push((method, run_monte_carlo(&cfg)?));
    }
    let mut buf = Vec::new();
    write_csv(&mut buf, &series)?;
    write_output(args.out.as_deref(), &buf)
}

fn cmd_overhead(args: OverheadArgs) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(
        buf,
        "# Nt={} Ld={} S0={} K={}",
        args.nt, args.l_d, args.s0, args.k
    )?;
    writeln!(buf, "method measurements")?;
    for method in [
        OverheadMethod::Dynamic,
        OverheadMethod::Hs,
        OverheadMethod::Mdr,
        OverheadMethod::Acs,
    ] {
        let total = experiment::overhead(method, args.nt, args.l_d, args.s0, args.k)?;
        writeln!(buf, "{} {}", method.name(), total)?;
    }
    write_output(None, &buf)
}

fn cmd_pattern(args: PatternArgs) -> Result<()> {
    let mut state = match (&args.state, args.n, args.s0) {
        (Some(path), None, None) => CodebookState::from_descriptor(&fs::read_to_string(path)?)?,
        (None, Some(n), Some(s0)) => CodebookState::new(n, s0)?,
        _ => {
            return Err(Error::InvalidArgument(
                "give either --state, or both --N and --S0".into(),
            ))
        }
    };
    for &p in &args.remove {
        state.remove_index(p)?;
    }
    let codeword = state.codeword_at(args.layer, args.pos)?;
    let samples = pattern_samples(codeword.weights(), args.grid)?;
    let header = vec![
        format!("codebook {}", state.descriptor()),
        format!(
            "layer={} pos={} set={}",
            args.layer,
            args.pos,
            codeword.source_set()
        ),
        "omega |gain|".to_string(),
    ];
    let mut buf = Vec::new();
    write_pattern(&mut buf, &header, &samples)?;
    write_output(args.out.as_deref(), &buf)
}
