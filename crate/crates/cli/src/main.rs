//! `cmoe` — build channel kernels, verify output-entropy bounds, run
//! constrained minimizations, and compute Wehrl entropies.
//!
//! Exit codes: 0 ok, 2 bound violation, 3 numeric flag (truncation or
//! non-convergence), 64 usage error.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cmoe::bounds::{
    lifted_bound, margin_tolerance, reports_to_csv, single_copy_bound, sweep, verify_wehrl,
    BoundFamily, BoundSpec, InputKind, SweepConfig, WehrlState,
};
use cmoe::dist::TruncatedDist;
use cmoe::kernels::{build_channel, ChannelFamily, ChannelSpec};
use cmoe::optimizer::{minimize_output_entropy, OptimizationProblem};
use cmoe::specfun::{EntropyNats, MeanPhotonNumber};
use cmoe::wehrl::DensityMatrix;

use config::{merge, FileConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "cmoe", version, about, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify bound margins on a batch of inputs; writes CSV and JSON reports.
    Verify(CommonArgs),
    /// Minimize output entropy at fixed input entropy; writes a JSON result.
    Optimize(CommonArgs),
    /// Tabulate bound functions f(s) and n·f(s/n) over an entropy grid (CSV).
    Tables(CommonArgs),
    /// Export a channel kernel as dense CSV (matrix + leak column).
    KernelDump(CommonArgs),
    /// Compute the Wehrl entropy of a thermal state or a density-matrix JSON file.
    Wehrl(CommonArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct CommonArgs {
    /// Channel family: thinning|attenuator|amplifier|additive-noise|contravariant|wehrl
    #[arg(long)]
    family: Option<String>,
    /// Transmissivity λ in [0, 1]
    #[arg(long)]
    lambda: Option<f64>,
    /// Gain κ >= 1
    #[arg(long)]
    kappa: Option<f64>,
    /// Environment thermal energy E >= 0
    #[arg(long)]
    env_energy: Option<f64>,
    /// Number of modes
    #[arg(long)]
    modes: Option<usize>,
    /// Per-mode occupation cutoff
    #[arg(long)]
    cutoff: Option<usize>,
    /// Input-entropy target in nats (optimize) or grid point (tables)
    #[arg(long)]
    entropy: Option<f64>,
    /// Entropy grid "start:step:count" (tables)
    #[arg(long)]
    grid: Option<String>,
    /// Base seed; all randomness derives from it
    #[arg(long)]
    seeds: Option<u64>,
    /// Number of random instances (verify)
    #[arg(long)]
    instances: Option<usize>,
    /// Output path prefix
    #[arg(long)]
    out: Option<PathBuf>,
    /// Margin tolerance override
    #[arg(long)]
    tol: Option<f64>,
    /// Input kind: random|geometric (verify, wehrl)
    #[arg(long)]
    input: Option<String>,
    /// Mean energy of geometric/thermal inputs
    #[arg(long)]
    input_energy: Option<f64>,
    /// JSON config file; explicit flags win over file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Density-matrix JSON file (wehrl)
    state_file: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Let clap print help/version normally; everything else is a
            // usage error.
            use clap::error::ErrorKind;
            let kind = err.kind();
            let _ = err.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::from(EXIT_OK)
            } else {
                ExitCode::from(EXIT_USAGE)
            };
        }
    };
    let run = match cli.command {
        Command::Verify(args) => with_config(args).and_then(cmd_verify),
        Command::Optimize(args) => with_config(args).and_then(cmd_optimize),
        Command::Tables(args) => with_config(args).and_then(cmd_tables),
        Command::KernelDump(args) => with_config(args).and_then(cmd_kernel_dump),
        Command::Wehrl(args) => with_config(args).and_then(cmd_wehrl),
    };
    match run {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numeric flag: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl From<cmoe::Error> for CliError {
    fn from(err: cmoe::Error) -> Self {
        match err {
            cmoe::Error::Numeric(m) => CliError::Numeric(m),
            cmoe::Error::Truncation { tail, threshold } => CliError::Numeric(format!(
                "tail mass {tail:.3e} exceeds threshold {threshold:.1e}"
            )),
            cmoe::Error::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

fn with_config(args: CommonArgs) -> Result<CommonArgs, CliError> {
    match &args.config {
        None => Ok(args),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {path:?}: {e}")))?;
            let file: FileConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("invalid config {path:?}: {e}")))?;
            Ok(merge(args, file))
        }
    }
}

fn family_of(args: &CommonArgs) -> Result<ChannelFamily, CliError> {
    let name = args
        .family
        .as_deref()
        .ok_or_else(|| CliError::Usage("--family is required".into()))?;
    let env = args.env_energy.unwrap_or(0.0);
    let family = match name {
        "thinning" => ChannelFamily::Thinning {
            lambda: args
                .lambda
                .ok_or_else(|| CliError::Usage("thinning requires --lambda".into()))?,
        },
        "attenuator" => ChannelFamily::Attenuator {
            lambda: args
                .lambda
                .ok_or_else(|| CliError::Usage("attenuator requires --lambda".into()))?,
            env_energy: env,
        },
        "amplifier" => ChannelFamily::Amplifier {
            kappa: args
                .kappa
                .ok_or_else(|| CliError::Usage("amplifier requires --kappa".into()))?,
            env_energy: env,
        },
        "additive-noise" => ChannelFamily::AdditiveNoise { env_energy: env },
        "contravariant" => ChannelFamily::Contravariant {
            kappa: args
                .kappa
                .ok_or_else(|| CliError::Usage("contravariant requires --kappa".into()))?,
            env_energy: env,
        },
        other => {
            return Err(CliError::Usage(format!(
                "unknown channel family '{other}' (expected thinning|attenuator|amplifier|additive-noise|contravariant)"
            )))
        }
    };
    family.validate()?;
    Ok(family)
}

fn reject_positional(args: &CommonArgs) -> Result<(), CliError> {
    match &args.state_file {
        Some(path) => Err(CliError::Usage(format!(
            "unexpected positional argument {path:?}"
        ))),
        None => Ok(()),
    }
}

fn bound_family_of(args: &CommonArgs) -> Result<BoundFamily, CliError> {
    if args.family.as_deref() == Some("wehrl") {
        Ok(BoundFamily::Wehrl)
    } else {
        Ok(BoundFamily::Channel(family_of(args)?))
    }
}

/// Serialize `payload` next to a timestamp that is excluded from any
/// determinism comparison.
#[derive(Serialize)]
struct Stamped<T: Serialize> {
    payload: T,
    timestamp_unix: u64,
}

fn stamped<T: Serialize>(payload: T) -> Stamped<T> {
    let timestamp_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Stamped {
        payload,
        timestamp_unix,
    }
}

/// Atomic write: temp file in the target directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("cannot persist {path:?}: {e}")))?;
    Ok(())
}

fn cmd_verify(args: CommonArgs) -> Result<u8, CliError> {
    reject_positional(&args)?;
    let bound_family = bound_family_of(&args)?;
    let n_modes = args.modes.unwrap_or(1);
    let is_wehrl = matches!(bound_family, BoundFamily::Wehrl);
    let cutoff = args.cutoff.unwrap_or(if is_wehrl { 10 } else { 40 });
    let instances = args.instances.unwrap_or(100);
    let base_seed = args.seeds.unwrap_or(0);
    let bound = BoundSpec::new(bound_family, n_modes)?;
    let input = match args.input.as_deref().unwrap_or("random") {
        "geometric" => InputKind::Geometric {
            energy: args
                .input_energy
                .ok_or_else(|| CliError::Usage("geometric input requires --input-energy".into()))?,
        },
        "random" => match (is_wehrl, n_modes) {
            (true, 1) => InputKind::RandomDensity,
            _ => InputKind::RandomDiagonal { concentration: 0.8 },
        },
        other => {
            return Err(CliError::Usage(format!(
                "unknown input kind '{other}' (expected random|geometric)"
            )))
        }
    };
    let cutoff = match &input {
        InputKind::Geometric { energy } => {
            TruncatedDist::geometric_cutoff(*energy, 1e-12).max(cutoff)
        }
        _ => cutoff,
    };
    let config = SweepConfig {
        bound,
        input,
        cutoff,
        instances,
        base_seed,
    };
    let outcome = sweep(std::slice::from_ref(&config))?;
    let tol = args.tol.unwrap_or(margin_tolerance(&bound.family));
    let violations = outcome
        .reports
        .iter()
        .filter(|r| !r.passes(tol))
        .collect::<Vec<_>>();

    let prefix = args.out.unwrap_or_else(|| PathBuf::from("reports"));
    let csv_path = prefix.with_extension("csv");
    let json_path = prefix.with_extension("json");
    let mut csv = Vec::new();
    reports_to_csv(&outcome.reports, &mut csv)?;
    write_atomic(&csv_path, &csv)?;
    let text = serde_json::to_string_pretty(&stamped(&outcome))
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&json_path, text.as_bytes())?;

    println!(
        "verified {} instance(s): {} valid, {} flagged, min margin {:.3e} (tol {:.1e})",
        outcome.summary.total,
        outcome.summary.valid,
        outcome.summary.flagged,
        outcome.summary.min_margin,
        tol
    );
    for v in &violations {
        println!("violation: {} margin {:.3e}", v.instance, v.margin);
    }
    if !violations.is_empty() {
        Ok(EXIT_VIOLATION)
    } else if outcome.summary.flagged > 0 {
        Ok(EXIT_NUMERIC)
    } else {
        Ok(EXIT_OK)
    }
}

fn cmd_optimize(args: CommonArgs) -> Result<u8, CliError> {
    reject_positional(&args)?;
    let family = family_of(&args)?;
    let n_modes = args.modes.unwrap_or(1);
    let cutoff = args.cutoff.unwrap_or(40);
    let target = args
        .entropy
        .ok_or_else(|| CliError::Usage("optimize requires --entropy".into()))?;
    let channel = ChannelSpec::new(family, n_modes)?;
    let mut problem = OptimizationProblem::new(channel, target, cutoff);
    problem.seed = args.seeds.unwrap_or(0);
    problem.validate()?;
    let result = minimize_output_entropy(&problem)?;

    let prefix = args.out.unwrap_or_else(|| PathBuf::from("optimize"));
    let json_path = prefix.with_extension("json");
    let text = serde_json::to_string_pretty(&stamped(&result))
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&json_path, text.as_bytes())?;

    let tol = args.tol.unwrap_or(1e-6);
    println!(
        "minimum output entropy {:.9} at input entropy {:.9}; gap {:.3e}, tv-to-geometric {:.3e}",
        result.output_entropy, result.input_entropy, result.gap, result.tv_to_geometric
    );
    if !result.converged {
        Ok(EXIT_NUMERIC)
    } else if result.gap < -tol {
        Ok(EXIT_VIOLATION)
    } else {
        Ok(EXIT_OK)
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "grid must be start:step:count, got '{spec}'"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Usage(format!("bad grid start '{}'", parts[0])))?;
    let step: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Usage(format!("bad grid step '{}'", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Usage(format!("bad grid count '{}'", parts[2])))?;
    if count == 0 || start < 0.0 || step < 0.0 {
        return Err(CliError::Usage("grid must be nonnegative and nonempty".into()));
    }
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

fn cmd_tables(args: CommonArgs) -> Result<u8, CliError> {
    reject_positional(&args)?;
    let family = bound_family_of(&args)?;
    let n_modes = args.modes.unwrap_or(1);
    let grid = match (&args.grid, args.entropy) {
        (Some(spec), _) => parse_grid(spec)?,
        (None, Some(s)) => vec![s],
        (None, None) => return Err(CliError::Usage("tables requires --grid or --entropy".into())),
    };
    let one = BoundSpec::new(family, 1)?;
    let lifted = BoundSpec::new(family, n_modes)?;
    let mut csv = Vec::new();
    writeln!(csv, "# cmoe.tables.v1")?;
    writeln!(csv, "family,params,s,f_s,n,lifted")?;
    let params = match family {
        BoundFamily::Wehrl => String::new(),
        BoundFamily::Channel(f) => format!("{f:?}").replace(',', ";"),
    };
    let name = args.family.clone().unwrap_or_default();
    for &s in &grid {
        let f_s = single_copy_bound(&one, EntropyNats(s))?.0;
        let n_f = lifted_bound(&lifted, EntropyNats(s))?.0;
        writeln!(csv, "{name},{params},{s:e},{f_s:e},{n_modes},{n_f:e}")?;
    }
    let prefix = args.out.unwrap_or_else(|| PathBuf::from("tables"));
    let path = prefix.with_extension("csv");
    write_atomic(&path, &csv)?;
    println!("wrote {} grid point(s) to {}", grid.len(), path.display());
    Ok(EXIT_OK)
}

fn cmd_kernel_dump(args: CommonArgs) -> Result<u8, CliError> {
    reject_positional(&args)?;
    let family = family_of(&args)?;
    let cutoff = args.cutoff.unwrap_or(20);
    let n_out = family.default_output_cutoff(cutoff);
    let kernel = build_channel(&family, cutoff, n_out)?;
    let mut csv = Vec::new();
    kernel.to_csv(&mut csv)?;
    let prefix = args.out.unwrap_or_else(|| PathBuf::from("kernel"));
    let path = prefix.with_extension("csv");
    write_atomic(&path, &csv)?;
    println!(
        "wrote {}x{} kernel (max leak {:.3e}) to {}",
        cutoff + 1,
        n_out + 1,
        kernel.max_leak(),
        path.display()
    );
    Ok(EXIT_OK)
}

fn cmd_wehrl(args: CommonArgs) -> Result<u8, CliError> {
    let report = match (&args.state_file, args.input.as_deref()) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read state {path:?}: {e}")))?;
            let rho = DensityMatrix::from_json(&text)?;
            verify_wehrl(&WehrlState::Density(rho))?
        }
        (None, _) => {
            let energy = args
                .input_energy
                .ok_or_else(|| CliError::Usage("wehrl requires a state file or --input-energy".into()))?;
            let n_modes = args.modes.unwrap_or(1);
            let cutoff = args
                .cutoff
                .unwrap_or_else(|| TruncatedDist::geometric_cutoff(energy, 1e-12));
            let one = TruncatedDist::geometric(MeanPhotonNumber::new(energy)?, cutoff)?;
            let mut d = one.clone();
            for _ in 1..n_modes {
                d = d.tensor(&one)?;
            }
            verify_wehrl(&WehrlState::Diagonal(d))?
        }
    };
    let text = serde_json::to_string_pretty(&stamped(&report))
        .map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(prefix) = &args.out {
        write_atomic(&prefix.with_extension("json"), text.as_bytes())?;
    }
    println!(
        "W = {:.9}, S = {:.9}, bound = {:.9}, margin = {:.3e}",
        report.output_entropy, report.input_entropy, report.bound, report.margin
    );
    if !report.valid {
        Ok(EXIT_NUMERIC)
    } else if report.margin < -args.tol.unwrap_or(1e-6) {
        Ok(EXIT_VIOLATION)
    } else {
        Ok(EXIT_OK)
    }
}
