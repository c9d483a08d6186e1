use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use spinbus_core::sweep::{self, analytics_report, emit_results, OutputFormat, RunOptions, SweepConfig, SweepKind};
use spinbus_core::{InitKind, PhaseConvention};

/// Parameter sweeps for spin-orbit state transfer along a spin chain.
///
/// Every sweep writes a result table plus `<stem>.meta.json` (resolved
/// config, hash, seed, version) and `<stem>.timing.json` (wall times).
#[derive(Parser, Debug)]
#[command(name = "spinbus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file; missing keys take defaults
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Result table path [default: config `output`, else `<kind>.<ext>`]
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Table format [default: from the output extension, else csv]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads for sweep points [default: all cores]
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// RNG seed; overrides SPINBUS_SEED, which overrides the config file
    #[arg(long, global = true, env = "SPINBUS_SEED")]
    seed: Option<u64>,

    /// Use phase E·t instead of 2π·E·t
    #[arg(long, global = true)]
    no_two_pi: bool,

    #[command(flatten)]
    base: BaseOverrides,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// f_max over θ for each axis
    Theta,
    /// f_max over the (n_x, n_z) axis grid
    Axis,
    /// f_max over chain length, isotropic and anisotropic branches
    Size,
    /// θ sweeps repeated per magnetic field, with per-field peaks
    Field,
    /// F(t) traces on a shared time grid
    Trace,
    /// disorder-averaged fidelity under quasi-static exchange noise
    Noise,
    /// print detuning, two-spin and effective-coupling quantities for one chain
    Analytics,
}

impl Command {
    fn kind(self) -> Option<SweepKind> {
        Some(match self {
            Command::Theta => SweepKind::Theta,
            Command::Axis => SweepKind::AxisGrid,
            Command::Size => SweepKind::Size,
            Command::Field => SweepKind::Field,
            Command::Trace => SweepKind::TimeTrace,
            Command::Noise => SweepKind::Noise,
            Command::Analytics => return None,
        })
    }
}

#[derive(Args, Debug, Default)]
struct BaseOverrides {
    /// Chain length
    #[arg(long, global = true)]
    sites: Option<usize>,
    /// Spin-orbit angle in units of π
    #[arg(long, global = true, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Spin-orbit axis `x,y,z`, normalized on load
    #[arg(long, global = true, value_parser = parse_vec3, allow_hyphen_values = true)]
    axis: Option<[f64; 3]>,
    /// Magnetic field `Bx,By,Bz` in MHz
    #[arg(long, global = true, value_parser = parse_vec3, allow_hyphen_values = true)]
    field: Option<[f64; 3]>,
    /// Interior coupling in MHz
    #[arg(long, global = true)]
    j_channel: Option<f64>,
    /// End-bond coupling in MHz
    #[arg(long, global = true)]
    j_end: Option<f64>,
    /// Pairwise-singlet channel instead of the channel ground state
    #[arg(long, global = true)]
    singlet: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Csv,
    JsonLines,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::JsonLines => OutputFormat::JsonLines,
        }
    }
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok(v)
}

fn load_config(cli: &Cli) -> anyhow::Result<SweepConfig> {
    let mut cfg = match &cli.config {
        Some(p) => SweepConfig::from_path(p).with_context(|| format!("reading {}", p.display()))?,
        None => SweepConfig::default(),
    };
    if let Some(kind) = cli.command.kind() {
        match cfg.kind {
            Some(k) if k != kind => {
                bail!(spinbus_core::Error::InvalidConfig(format!(
                    "config is for a {} sweep, subcommand asks for {}",
                    k.as_str(),
                    kind.as_str()
                )))
            }
            _ => cfg.kind = Some(kind),
        }
    }
    let b = &cli.base;
    let base = &mut cfg.base;
    if let Some(v) = b.sites {
        base.sites = v;
    }
    if let Some(v) = b.theta {
        base.theta_over_pi = v;
    }
    if let Some(v) = b.axis {
        base.axis = v;
    }
    if let Some(v) = b.field {
        base.field_mhz = v;
    }
    if let Some(v) = b.j_channel {
        base.j_channel_mhz = v;
    }
    if let Some(v) = b.j_end {
        base.j_end_mhz = v;
    }
    if b.singlet {
        base.init = InitKind::PairwiseSinglet;
    }
    if cli.no_two_pi {
        base.phase = PhaseConvention::Angular;
    }
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    Ok(cfg)
}

fn output_target(cli: &Cli, cfg: &SweepConfig, kind: SweepKind) -> (PathBuf, OutputFormat) {
    let path = cli.output.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from));
    let format = cli.format.map(OutputFormat::from).unwrap_or_else(|| match path.as_deref().and_then(Path::extension) {
        Some(e) if e == "jsonl" || e == "json" => OutputFormat::JsonLines,
        _ => OutputFormat::Csv,
    });
    let path = path.unwrap_or_else(|| PathBuf::from(format!("{}.{}", kind.as_str(), format.extension())));
    (path, format)
}

fn run(cli: &Cli) -> anyhow::Result<serde_json::Value> {
    let cfg = load_config(cli)?;
    let Some(kind) = cli.command.kind() else {
        let report = analytics_report(&cfg.base.to_spec()?)?;
        if let Some(p) = &cli.output {
            std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")
                .with_context(|| format!("writing {}", p.display()))?;
        }
        return Ok(report);
    };
    if cli.workers == Some(0) {
        bail!(spinbus_core::Error::InvalidConfig("--workers must be at least 1".into()));
    }
    let resolved = cfg.resolve()?;
    let out = sweep::run(&resolved, RunOptions { workers: cli.workers })?;
    let (path, format) = output_target(cli, &cfg, kind);
    emit_results(&out, format, &path)?;
    let failed = out.table.column("error").map_or(0, |c| c.iter().filter(|v| !v.render().is_empty()).count());
    Ok(json!({
        "kind": kind.as_str(),
        "output": path.display().to_string(),
        "rows": out.table.len(),
        "failed_rows": failed,
        "config_hash": resolved.short_hash(),
        "seed": resolved.seed,
    }))
}

fn error_record(e: &anyhow::Error) -> serde_json::Value {
    let code = e.chain().find_map(|c| c.downcast_ref::<spinbus_core::Error>()).map_or("error", |c| c.code());
    let chain: Vec<String> = e.chain().map(ToString::to_string).collect();
    json!({ "error": { "code": code, "message": chain.join(": ") } })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("json serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::FAILURE
        }
    }
}
