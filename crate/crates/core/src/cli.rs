//! Command-line front end.
//!
//! Options may also come from a flat `key=value` config file (`--config
//! PATH`, `#` starts a comment) using the long flag names as keys. Flags on
//! the command line override file values. Relative output paths are resolved
//! against `$RELAYCOOP_OUTPUT_DIR` when it is set.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::analytic::{boundary_trace, optimal_pa, RegionSelector};
use crate::harness::{compare_three_schemes, fixed, grid_points, sweep, GridAxis, SweepSpec};
use crate::model::{validate_params, CooperationPolicy, RatePoint, SystemParams, Warning};
use crate::sim::{run, run_traced, SimConfig, SimMode};

pub const OUTPUT_DIR_ENV: &str = "RELAYCOOP_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation; exit status 2.
    #[error("{0}")]
    Usage(String),
    /// Valid invocation that the model cannot satisfy; exit status 1.
    #[error(transparent)]
    Domain(#[from] crate::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 1,
        }
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is not a probability in [0, 1]"))
    }
}

/// Comma-separated seeds.
#[derive(Debug, Clone)]
struct SeedList(Vec<u64>);

fn seed_list(s: &str) -> Result<SeedList, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|e| format!("seed '{t}': {e}"))
        })
        .collect::<Result<_, _>>()
        .map(SeedList)
}

#[derive(Debug, Parser)]
#[command(
    name = "relaycoop",
    version,
    about = "Stable-throughput regions of a relay network with partial cooperation"
)]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace the boundary of a fixed-pa region or of the closure.
    Region(RegionArgs),
    /// Optimal acceptance probability for a source rate.
    OptimalPa(OptimalPaArgs),
    /// Run one simulation and print its statistics.
    Simulate(SimulateArgs),
    /// Sweep a grid and compare analytic membership with simulated stability.
    Validate(ValidateArgs),
    /// Analytic membership of no, full and partial cooperation over a grid.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct ParamArgs {
    #[arg(long, value_parser = probability)]
    p13: f64,
    #[arg(long, value_parser = probability)]
    p12: f64,
    #[arg(long, value_parser = probability)]
    p23: f64,
    #[arg(long, value_parser = probability)]
    q1: f64,
    #[arg(long, value_parser = probability)]
    q2: f64,
}

impl ParamArgs {
    fn params(&self) -> SystemParams {
        SystemParams::new(self.p13, self.p12, self.p23, self.q1, self.q2)
    }
}

#[derive(Debug, Args)]
struct SelectorArgs {
    /// Fixed acceptance probability.
    #[arg(long, value_parser = probability)]
    pa: Option<f64>,
    /// Use the closure over all acceptance probabilities.
    #[arg(long)]
    closure: bool,
}

impl SelectorArgs {
    fn selector(&self) -> Result<RegionSelector, CliError> {
        match (self.closure, self.pa) {
            (true, _) => Ok(RegionSelector::Closure),
            (false, Some(pa)) => Ok(RegionSelector::FixedPa(CooperationPolicy::new(pa))),
            (false, None) => Err(CliError::Usage(
                "missing required option: one of --pa or --closure".into(),
            )),
        }
    }
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, default_value_t = 0.0)]
    lambda1_min: f64,
    #[arg(long, default_value_t = 0.2)]
    lambda1_max: f64,
    #[arg(long, default_value_t = 20)]
    lambda1_count: usize,
    #[arg(long, default_value_t = 0.0)]
    lambda2_min: f64,
    #[arg(long, default_value_t = 0.2)]
    lambda2_max: f64,
    #[arg(long, default_value_t = 20)]
    lambda2_count: usize,
}

impl GridArgs {
    fn axes(&self) -> (GridAxis, GridAxis) {
        (
            GridAxis::new(self.lambda1_min, self.lambda1_max, self.lambda1_count),
            GridAxis::new(self.lambda2_min, self.lambda2_max, self.lambda2_count),
        )
    }
}

#[derive(Debug, Args)]
struct RegionArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    selector: SelectorArgs,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(2..))]
    resolution: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptimalPaArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_parser = probability)]
    lambda1: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Original,
    DominantSourceDummy,
    DominantRelayDummy,
    SourceSaturated,
}

impl From<ModeArg> for SimMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Original => SimMode::Original,
            ModeArg::DominantSourceDummy => SimMode::DominantSourceDummy,
            ModeArg::DominantRelayDummy => SimMode::DominantRelayDummy,
            ModeArg::SourceSaturated => SimMode::SourceSaturated,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_parser = probability)]
    pa: f64,
    #[arg(long, value_parser = probability)]
    lambda1: f64,
    #[arg(long, value_parser = probability)]
    lambda2: f64,
    #[arg(long, value_enum, default_value = "original")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    slots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
    /// Write a per-slot CSV trace to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    selector: SelectorArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(10..))]
    slots: u64,
    #[arg(long, default_value = "1,2,3", value_parser = seed_list)]
    seeds: SeedList,
    #[arg(long, default_value_t = crate::harness::DEFAULT_EXCLUSION_BAND)]
    exclusion_band: f64,
    #[arg(long, default_value_t = crate::harness::DEFAULT_WINDOW_COUNT)]
    windows: usize,
    #[arg(long, default_value_t = crate::harness::DEFAULT_DRIFT_THRESHOLD)]
    drift_threshold: f64,
    #[arg(long, default_value_t = crate::harness::DEFAULT_SAMPLE_STRIDE, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Output files are `<prefix>_no_coop.csv`, `<prefix>_full_coop.csv`
    /// and `<prefix>_partial.csv`.
    #[arg(long, default_value = "compare")]
    output_prefix: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliCommand {
    Region {
        params: SystemParams,
        selector: RegionSelector,
        resolution: usize,
        output: Option<PathBuf>,
    },
    OptimalPa {
        params: SystemParams,
        lambda1: f64,
    },
    Simulate {
        config: SimConfig,
        trace: Option<PathBuf>,
    },
    Validate {
        spec: SweepSpec,
        output: Option<PathBuf>,
    },
    Compare {
        params: SystemParams,
        lambda1: GridAxis,
        lambda2: GridAxis,
        output_prefix: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub command: CliCommand,
    pub warnings: Vec<Warning>,
}

/// Options that exclude each other; a command-line occurrence of any of them
/// discards all of them from the config file.
const OPTION_GROUPS: &[&[&str]] = &[&["pa", "closure"]];

struct FileOption {
    key: String,
    value: String,
    line: usize,
}

fn parse_config_text(text: &str) -> Result<Vec<FileOption>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "config line {}: expected key=value, got '{line}'",
                i + 1
            ))
        })?;
        out.push(FileOption {
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

fn flag_key(arg: &str) -> Option<&str> {
    let rest = arg.strip_prefix("--")?;
    Some(rest.split('=').next().unwrap_or(rest))
}

/// Parses `argv` (program name first) with optional config-file text.
pub fn parse_config(argv: &[String], config_text: Option<&str>) -> Result<CliConfig, CliError> {
    let file = config_text
        .map(parse_config_text)
        .transpose()?
        .unwrap_or_default();
    let sub_idx = argv
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|i| i + 1);

    let mut full: Vec<String> = Vec::with_capacity(argv.len() + 2 * file.len());
    let mut file_origin: Vec<(String, usize)> = Vec::new();
    match sub_idx {
        Some(idx) if !file.is_empty() => {
            let sub = argv[idx].as_str();
            let cmd = Cli::command();
            let sub_cmd = cmd
                .find_subcommand(sub)
                .ok_or_else(|| CliError::Usage(format!("unrecognized subcommand '{sub}'")))?;
            let mut given: HashSet<&str> =
                argv[idx + 1..].iter().filter_map(|a| flag_key(a)).collect();
            for group in OPTION_GROUPS {
                if group.iter().any(|k| given.contains(k)) {
                    given.extend(group.iter().copied());
                }
            }
            full.extend_from_slice(&argv[..=idx]);
            for opt in &file {
                let arg = sub_cmd
                    .get_arguments()
                    .find(|a| a.get_long() == Some(opt.key.as_str()))
                    .ok_or_else(|| {
                        CliError::Usage(format!(
                            "config line {}: unknown key '{}' for '{sub}'",
                            opt.line, opt.key
                        ))
                    })?;
                if given.contains(opt.key.as_str()) {
                    continue;
                }
                if arg.get_action().takes_values() {
                    full.push(format!("--{}", opt.key));
                    full.push(opt.value.clone());
                    file_origin.push((opt.key.clone(), opt.line));
                } else {
                    match opt.value.as_str() {
                        "true" | "1" | "yes" => full.push(format!("--{}", opt.key)),
                        "false" | "0" | "no" => {}
                        v => {
                            return Err(CliError::Usage(format!(
                                "config line {}: '{}' expects true or false, got '{v}'",
                                opt.line, opt.key
                            )))
                        }
                    }
                }
            }
            full.extend_from_slice(&argv[idx + 1..]);
        }
        _ => full.extend_from_slice(argv),
    }

    let matches = Cli::command()
        .try_get_matches_from(&full)
        .map_err(|e| usage_from_clap(e, argv, &file_origin))?;
    let cli =
        Cli::from_arg_matches(&matches).map_err(|e| usage_from_clap(e, argv, &file_origin))?;
    build(cli)
}

/// Reads `--config PATH` (if present) and parses the remaining arguments.
pub fn parse_args(argv: &[String]) -> Result<CliConfig, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config_path = None;
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config_path = Some(
                it.next()
                    .ok_or_else(|| CliError::Usage("--config requires a path".into()))?
                    .clone(),
            );
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        } else {
            rest.push(a.clone());
        }
    }
    let text = config_path
        .map(|p| {
            fs::read_to_string(&p)
                .map_err(|e| CliError::Usage(format!("cannot read config {p}: {e}")))
        })
        .transpose()?;
    parse_config(&rest, text.as_deref())
}

fn usage_from_clap(e: clap::Error, argv: &[String], file_origin: &[(String, usize)]) -> CliError {
    if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
        return CliError::Usage(e.to_string());
    }
    let mut msg = e.render().to_string();
    if matches!(
        e.kind(),
        ErrorKind::ValueValidation | ErrorKind::InvalidValue
    ) {
        let arg = match e.get(ContextKind::InvalidArg) {
            Some(ContextValue::String(s)) => s.clone(),
            _ => String::new(),
        };
        let key = arg
            .trim_start_matches("--")
            .split([' ', '='])
            .next()
            .unwrap_or("")
            .to_string();
        let from_cli = argv.iter().position(|a| flag_key(a) == Some(key.as_str()));
        if let Some(pos) = from_cli {
            msg.push_str(&format!("(argument {pos})\n"));
        } else if let Some((_, line)) = file_origin.iter().rev().find(|(k, _)| *k == key) {
            msg.push_str(&format!("(config line {line})\n"));
        }
    }
    CliError::Usage(msg)
}

fn build(cli: Cli) -> Result<CliConfig, CliError> {
    let params_of = |p: &ParamArgs| {
        let params = p.params();
        let warnings = validate_params(&params).into_result()?;
        Ok::<_, CliError>((params, warnings))
    };
    let (command, warnings) = match cli.command {
        Command::Region(a) => {
            let (params, w) = params_of(&a.params)?;
            (
                CliCommand::Region {
                    params,
                    selector: a.selector.selector()?,
                    resolution: a.resolution as usize,
                    output: a.output,
                },
                w,
            )
        }
        Command::OptimalPa(a) => {
            let (params, w) = params_of(&a.params)?;
            (
                CliCommand::OptimalPa {
                    params,
                    lambda1: a.lambda1,
                },
                w,
            )
        }
        Command::Simulate(a) => {
            let (params, w) = params_of(&a.params)?;
            let config = SimConfig::new(
                params,
                CooperationPolicy::new(a.pa),
                RatePoint::new(a.lambda1, a.lambda2),
            )
            .with_mode(a.mode.into())
            .with_slots(a.slots)
            .with_seed(a.seed)
            .with_stride(a.stride);
            (
                CliCommand::Simulate {
                    config,
                    trace: a.trace,
                },
                w,
            )
        }
        Command::Validate(a) => {
            let (params, w) = params_of(&a.params)?;
            if a.seeds.0.is_empty() {
                return Err(CliError::Usage(
                    "--seeds must list at least one seed".into(),
                ));
            }
            let (l1, l2) = a.grid.axes();
            let mut spec = SweepSpec::new(params, a.selector.selector()?, l1, l2);
            spec.n_slots = a.slots;
            spec.seeds = a.seeds.0;
            spec.exclusion_band = a.exclusion_band;
            spec.window_count = a.windows;
            spec.drift_threshold = a.drift_threshold;
            spec.sample_stride = a.stride;
            (
                CliCommand::Validate {
                    spec,
                    output: a.output,
                },
                w,
            )
        }
        Command::Compare(a) => {
            let (params, w) = params_of(&a.params)?;
            let (lambda1, lambda2) = a.grid.axes();
            (
                CliCommand::Compare {
                    params,
                    lambda1,
                    lambda2,
                    output_prefix: a.output_prefix,
                },
                w,
            )
        }
    };
    Ok(CliConfig { command, warnings })
}

fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
fn write_atomic<F>(path: &Path, fill: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let path = resolve_output(path);
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    {
        let mut w = io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(&path).map_err(|e| CliError::Io(e.error))?;
    Ok(path)
}

fn emit<F>(output: Option<&Path>, stdout: &mut dyn Write, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match output {
        Some(p) => {
            write_atomic(p, fill)?;
        }
        None => fill(stdout)?,
    }
    Ok(())
}

/// Runs a parsed command, writing reports to files or `stdout`.
pub fn execute(config: &CliConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &config.command {
        CliCommand::Region {
            params,
            selector,
            resolution,
            output,
        } => {
            let trace = boundary_trace(params, *selector, *resolution);
            emit(output.as_deref(), stdout, |w| {
                let mut csv = crate::harness::csv_writer(w);
                csv.write_record(["lambda1", "lambda2_boundary", "segment", "pa_star"])?;
                for b in &trace.points {
                    csv.write_record([
                        fixed(b.point.lambda1),
                        fixed(b.point.lambda2),
                        b.segment.to_string(),
                        b.pa_star.map(fixed).unwrap_or_default(),
                    ])?;
                }
                csv.flush()
            })
        }
        CliCommand::OptimalPa { params, lambda1 } => {
            let pa = optimal_pa(params, *lambda1)?;
            writeln!(stdout, "pa_star={}", fixed(pa))?;
            Ok(())
        }
        CliCommand::Simulate { config, trace } => {
            config.validate()?;
            let stats = match trace {
                Some(path) => {
                    let mut stats = None;
                    write_atomic(path, |w| {
                        stats = Some(run_traced(config, w)?);
                        Ok(())
                    })?;
                    stats.expect("trace writer ran")
                }
                None => run(config),
            };
            let lines = [
                ("mode", config.mode.as_str().to_string()),
                ("slots", stats.elapsed_slots.to_string()),
                ("seed", config.seed.to_string()),
                ("source_arrivals", stats.source_arrivals.to_string()),
                ("relay_arrivals", stats.relay_arrivals.to_string()),
                (
                    "source_direct_deliveries",
                    stats.source_direct_deliveries.to_string(),
                ),
                ("relay_admissions", stats.relay_admissions.to_string()),
                ("relayed_deliveries", stats.relayed_deliveries.to_string()),
                (
                    "relay_own_deliveries",
                    stats.relay_own_deliveries.to_string(),
                ),
                ("source_dummy_tx", stats.source_dummy_tx.to_string()),
                ("relay_dummy_tx", stats.relay_dummy_tx.to_string()),
                ("collisions", stats.collisions.to_string()),
                ("final_q1_len", stats.final_q1_len.to_string()),
                ("final_q2_len", stats.final_q2_len.to_string()),
                (
                    "source_departure_rate",
                    fixed(stats.source_departure_rate()),
                ),
                ("source_delivery_rate", fixed(stats.source_delivery_rate())),
                ("relay_delivery_rate", fixed(stats.relay_delivery_rate())),
                ("q1_busy_fraction", fixed(stats.q1_busy_fraction())),
                ("q2_busy_fraction", fixed(stats.q2_busy_fraction())),
            ];
            for (k, v) in lines {
                writeln!(stdout, "{k}={v}")?;
            }
            Ok(())
        }
        CliCommand::Validate { spec, output } => {
            let report = sweep(spec);
            emit(output.as_deref(), stdout, |w| report.write_csv(w))?;
            writeln!(
                stdout,
                "agreement={} disagreements={}",
                fixed(report.summary.agreement_rate),
                report.summary.disagreements.len()
            )?;
            Ok(())
        }
        CliCommand::Compare {
            params,
            lambda1,
            lambda2,
            output_prefix,
        } => {
            let points = grid_points(lambda1, lambda2);
            let cmp = compare_three_schemes(params, &points);
            let prefix = output_prefix.to_string_lossy();
            for (suffix, report) in [
                ("no_coop", &cmp.no_cooperation),
                ("full_coop", &cmp.full_cooperation),
                ("partial", &cmp.partial_cooperation),
            ] {
                let path = PathBuf::from(format!("{prefix}_{suffix}.csv"));
                write_atomic(&path, |w| report.write_csv(w))?;
            }
            writeln!(
                stdout,
                "containment={} violations={} inside_no_coop={} inside_full_coop={} inside_partial={}",
                if cmp.containment_holds() { "ok" } else { "violated" },
                cmp.containment_violations.len(),
                cmp.no_cooperation.inside_count(),
                cmp.full_cooperation.inside_count(),
                cmp.partial_cooperation.inside_count(),
            )?;
            Ok(())
        }
    }
}
