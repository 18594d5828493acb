//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 model inconsistency
//! (including a failed Weingarten verification).

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{round_sig9, AnalysisReport};
use crate::error::Error;
use crate::haar::{fourth_moment_analytic, fourth_moments_mc, index_class_patterns, rational_to_f64, RngSeed};
use crate::matcore::{spectral_decompose, DensityMatrix, HermitianEstimate, UnitaryMatrix, C64};
use crate::mesh::{compose_mesh, decompose_unitary, MeshConfig, SubspaceEmbedding};
use crate::noise::sample_coherent_distortion;
use crate::shadow::{
    log_spaced_grid, read_snapshot_file, read_unitary_list, read_voltage_csv, reconstruct, run_protocol,
    snapshots_from_voltages, write_snapshot_file, EstimatorKind, ProtocolKind, ProtocolSpec, ReconstructionResult,
    ScalingSeries, SimulationPlan, SnapshotFile,
};

/// Default directory for `simulate` artifacts when `--out-dir` is not given.
pub const OUT_DIR_ENV: &str = "PHOTON_SHADOW_OUT_DIR";

/// Largest `|z|` accepted by `verify-weingarten`.
pub const Z_LIMIT: f64 = 5.0;

#[derive(Debug, Parser)]
#[command(name = "photon-shadow", version, about = "Classical-shadow tomography on a simulated MZI mesh")]
pub struct Cli {
    /// Worker threads for parallel replications (output does not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Flat `key = value` file supplying defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a protocol and write the scaling series and final reconstruction.
    Simulate(SimulateArgs),
    /// Reconstruct a density matrix from a snapshot file.
    Reconstruct(ReconstructArgs),
    /// Turn voltage records plus reported unitaries into a snapshot file.
    Ingest(IngestArgs),
    /// Extract p, epsilon, floor and horizon from a series or slope.
    Analyze(AnalyzeArgs),
    /// Compare Monte-Carlo fourth moments with the Weingarten formula.
    VerifyWeingarten(VerifyArgs),
    /// Decompose a unitary into a mesh or compose a mesh into a unitary.
    #[command(subcommand)]
    Mesh(MeshCommand),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    protocol: Option<String>,
    /// Reconstruction dimension (8 for I/II, 4 for III/IV by default).
    #[arg(long)]
    d: Option<usize>,
    /// Channel count of the processor (III/IV only).
    #[arg(long = "d-full")]
    d_full: Option<usize>,
    /// Number of random unitaries per replication.
    #[arg(long = "M", alias = "m")]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seed of the hidden randomizer (II/IV); defaults to --seed.
    #[arg(long = "randomizer-seed")]
    randomizer_seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Explicit comma-separated M grid.
    #[arg(long)]
    grid: Option<String>,
    /// Number of log-spaced grid points when --grid is absent.
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    /// Depolarization strength.
    #[arg(long)]
    p: Option<f64>,
    /// Coherent distortion magnitude.
    #[arg(long)]
    epsilon: Option<f64>,
    /// intensity or click
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long)]
    snapshots: PathBuf,
    /// Density-matrix JSON to score the estimate against.
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    voltages: PathBuf,
    #[arg(long)]
    unitaries: PathBuf,
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Scaling-series CSV; its fitted slope feeds epsilon.
    #[arg(long)]
    series: Option<PathBuf>,
    /// Scaled-error slope, used instead of fitting a series.
    #[arg(long)]
    slope: Option<f64>,
    /// Reconstruction JSON whose leading eigenvalue is D1.
    #[arg(long)]
    recon: Option<PathBuf>,
    /// Comma-separated spectrum of the reconstruction.
    #[arg(long, allow_hyphen_values = true)]
    eigenvalues: Option<String>,
    /// Leading eigenvalue of the reconstruction.
    #[arg(long)]
    d1: Option<f64>,
    /// Leading eigenvalue of the ideal state.
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `M,observed_mse,predicted_mse`.
    #[arg(long = "curve-csv")]
    curve_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum MeshCommand {
    /// Unitary JSON in, mesh JSON out.
    Decompose(MeshIo),
    /// Mesh JSON in, unitary JSON out.
    Compose(MeshIo),
}

#[derive(Debug, Args)]
struct MeshIo {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
    /// Verification ran but disagreed with theory.
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(Error::ModelInconsistency(_)) | CliError::Failed(_) => 3,
            CliError::Lib(_) => 2,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Failed(m) => write!(f, "verification failed: {m}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Every key a config file may set.
const CONFIG_KEYS: &[&str] = &[
    "workers",
    "protocol",
    "d",
    "d-full",
    "M",
    "seed",
    "randomizer-seed",
    "replications",
    "grid",
    "grid-points",
    "p",
    "epsilon",
    "estimator",
    "out-dir",
    "lambda1",
    "samples",
];

/// Values from a config file, keyed by long flag name.
#[derive(Debug, Default)]
struct Config {
    values: HashMap<String, String>,
}

impl Config {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn parse(text: &str) -> CliResult<Self> {
        let mut values = HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key = value", n + 1)))?;
            let key = key.trim().replace('_', "-");
            let key = if key == "m" { "M".to_owned() } else { key };
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(usage(format!("config line {}: unknown key {key:?}", n + 1)));
            }
            values.insert(key, value.trim().trim_matches('"').to_owned());
        }
        Ok(Self { values })
    }

    /// The flag if given, else the config value.
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| usage(format!("config key {key}: cannot parse {v:?}: {e}")))
            })
            .transpose()
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("photon-shadow: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    if let Some(n) = cfg.pick(cli.workers, "workers")? {
        if n == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        // A pool may already exist when embedded in a larger process; that is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Simulate(a) => simulate(a, &cfg),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Ingest(a) => ingest(a, &cfg),
        Command::Analyze(a) => analyze(a, &cfg),
        Command::VerifyWeingarten(a) => verify_weingarten(a, &cfg),
        Command::Mesh(MeshCommand::Decompose(io)) => {
            let u: UnitaryMatrix = read_json(&io.input)?;
            write_json(io.out.as_deref(), &decompose_unitary(&u)?)
        }
        Command::Mesh(MeshCommand::Compose(io)) => {
            let mesh: MeshConfig = read_json(&io.input)?;
            write_json(io.out.as_deref(), &compose_mesh(&mesh)?)
        }
    }
}

fn parse_protocol(s: Option<String>) -> CliResult<ProtocolKind> {
    s.map_or(Ok(ProtocolKind::I), |s| s.parse().map_err(|e: Error| usage(e.to_string())))
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> CliResult<Vec<T>>
where
    T::Err: Display,
{
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|e| usage(format!("{what}: cannot parse {x:?}: {e}")))
        })
        .collect()
}

fn simulate(a: SimulateArgs, cfg: &Config) -> CliResult<()> {
    let kind = parse_protocol(cfg.pick(a.protocol, "protocol")?)?;
    let d = cfg.pick(a.d, "d")?.unwrap_or(kind.default_sub_dim());
    let d_full = if kind.is_subspace() {
        cfg.pick(a.d_full, "d-full")?.unwrap_or(8)
    } else {
        d
    };
    let m = cfg.pick(a.m, "M")?.unwrap_or(100_000);
    let seed = cfg.pick(a.seed, "seed")?.unwrap_or(0);
    let randomizer_seed = cfg.pick(a.randomizer_seed, "randomizer-seed")?.unwrap_or(seed);
    let replications = cfg
        .pick(a.replications, "replications")?
        .unwrap_or(SimulationPlan::DEFAULT_REPLICATIONS);
    let m_grid = match cfg.pick(a.grid, "grid")? {
        Some(g) => parse_list::<usize>(&g, "grid")?,
        None => {
            let n = cfg
                .pick(a.grid_points, "grid-points")?
                .unwrap_or(SimulationPlan::DEFAULT_POINTS);
            log_spaced_grid(10.min(m), m, n)
        }
    };
    let estimator = match cfg.pick(a.estimator, "estimator")? {
        Some(s) => s.parse::<EstimatorKind>().map_err(|e| usage(e.to_string()))?,
        None => EstimatorKind::Intensity,
    };
    let p = cfg.pick(a.p, "p")?;
    let epsilon = cfg.pick(a.epsilon, "epsilon")?;

    let spec = ProtocolSpec::with_dims(kind, d_full, d, RngSeed::new(seed, 0), RngSeed::new(randomizer_seed, 0))
        .map_err(|e| usage(e.to_string()))?;
    let noise = if p.is_some() || epsilon.is_some() {
        let p = p.unwrap_or(0.0);
        if !(0.0..=1.0).contains(&p) {
            return Err(usage(format!("--p must lie in [0, 1], got {p}")));
        }
        let model = sample_coherent_distortion(d, epsilon.unwrap_or(0.0), RngSeed::new(seed, 0))
            .map_err(|e| usage(e.to_string()))?;
        Some(model.with_p(p)?)
    } else {
        None
    };
    let plan = SimulationPlan {
        m_grid,
        replications,
        estimator,
    };
    let outcome = run_protocol(&spec, m, noise.as_ref(), &plan).map_err(|e| match e {
        Error::InvalidParameter(m) => usage(m),
        e => CliError::Lib(e),
    })?;

    let out_dir = match cfg.pick(a.out_dir, "out-dir")? {
        Some(p) => p,
        None => std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from),
    };
    fs::create_dir_all(&out_dir)?;
    let series_path = out_dir.join("series.csv");
    outcome.series.write_csv(BufWriter::new(File::create(&series_path)?))?;
    write_json(Some(&out_dir.join("reconstruction.json")), &outcome.result)?;
    if let Some(n) = &noise {
        write_json(Some(&out_dir.join("noise.json")), n)?;
    }
    let last = outcome.series.points.last().expect("non-empty series");
    println!(
        "protocol {kind}, d = {d}: M = {}, mse_mean = {:.8e} ± {:.8e} ({} replications) -> {}",
        last.m,
        last.mse_mean,
        last.mse_stderr,
        last.replications,
        out_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ReconstructionSummary {
    #[serde(rename = "M")]
    m: usize,
    eigenvalues: Vec<f64>,
    estimate: HermitianEstimate,
}

fn reconstruct_cmd(a: ReconstructArgs) -> CliResult<()> {
    let file = read_snapshot_file(BufReader::new(File::open(&a.snapshots)?))?;
    let estimate = reconstruct(&file.snapshots, file.d)?;
    let m = file.snapshots.len();
    match a.target {
        Some(t) => {
            let target: DensityMatrix = read_json(&t)?;
            write_json(a.out.as_deref(), &ReconstructionResult::new(estimate, m, target)?)
        }
        None => {
            let eigenvalues = spectral_decompose(&estimate)?
                .eigenvalues
                .into_iter()
                .map(round_sig9)
                .collect();
            write_json(
                a.out.as_deref(),
                &ReconstructionSummary {
                    m,
                    eigenvalues,
                    estimate,
                },
            )
        }
    }
}

fn ingest(a: IngestArgs, cfg: &Config) -> CliResult<()> {
    let kind = parse_protocol(cfg.pick(a.protocol, "protocol")?)?;
    let records = read_voltage_csv(BufReader::new(File::open(&a.voltages)?))?;
    if records.is_empty() {
        return Err(Error::Format(format!("{} has no voltage rows", a.voltages.display())).into());
    }
    let unitaries = read_unitary_list(BufReader::new(File::open(&a.unitaries)?))?;
    let emb = kind
        .is_subspace()
        .then(|| SubspaceEmbedding::new(kind.default_sub_dim(), 8, 0))
        .transpose()?;
    let snapshots = snapshots_from_voltages(&records, &unitaries, emb.as_ref())?;
    let file = SnapshotFile {
        d: snapshots[0].dim(),
        snapshots,
    };
    match a.out {
        Some(p) => write_snapshot_file(BufWriter::new(File::create(p)?), &file)?,
        None => {
            write_snapshot_file(io::stdout().lock(), &file)?;
            println!();
        }
    }
    Ok(())
}

/// Leading eigenvalue and dimension of a reconstruction JSON (any object with an `estimate`).
fn leading_from_recon(path: &Path) -> CliResult<(f64, usize)> {
    let value: serde_json::Value = read_json(path)?;
    let est = value
        .get("estimate")
        .ok_or_else(|| Error::Format(format!("{}: missing field \"estimate\"", path.display())))?;
    let est: HermitianEstimate = serde_json::from_value(est.clone())
        .map_err(|e| Error::Format(format!("{}: field \"estimate\": {e}", path.display())))?;
    Ok((spectral_decompose(&est)?.leading(), est.dim()))
}

fn analyze(a: AnalyzeArgs, cfg: &Config) -> CliResult<()> {
    let (d1, inferred_d) = match (&a.recon, &a.eigenvalues, a.d1) {
        (Some(p), None, None) => {
            let (d1, d) = leading_from_recon(p)?;
            (d1, Some(d))
        }
        (None, Some(list), None) => {
            let ev = parse_list::<f64>(list, "eigenvalues")?;
            let d1 = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (d1, Some(ev.len()))
        }
        (None, None, Some(d1)) => (d1, None),
        _ => return Err(usage("give exactly one of --recon, --eigenvalues, --d1")),
    };
    let d = cfg
        .pick(a.d, "d")?
        .or(inferred_d)
        .ok_or_else(|| usage("--d is required with --d1"))?;
    if let Some(n) = inferred_d {
        if n != d {
            return Err(usage(format!("--d {d} disagrees with the {n}-dimensional spectrum")));
        }
    }
    let lambda1 = cfg.pick(a.lambda1, "lambda1")?.unwrap_or(1.0);
    let report = match (&a.series, a.slope) {
        (Some(path), None) => {
            let series = ScalingSeries::read_csv(BufReader::new(File::open(path)?), d)?;
            AnalysisReport::from_series(&series, d1, lambda1)?
        }
        (None, Some(slope)) => {
            AnalysisReport::from_slope(d, d1, lambda1, slope, &log_spaced_grid(10, 100_000, 20))?
        }
        _ => return Err(usage("give exactly one of --series, --slope")),
    };
    if let Some(path) = &a.curve_csv {
        report.write_curve_csv(BufWriter::new(File::create(path)?))?;
    }
    write_json(a.out.as_deref(), &report)
}

#[derive(Serialize)]
struct WeingartenRow {
    pattern: String,
    d: usize,
    analytic: String,
    mc_mean: String,
    mc_stderr: String,
    z_score: String,
}

fn verify_weingarten(a: VerifyArgs, cfg: &Config) -> CliResult<()> {
    let d = cfg.pick(a.d, "d")?.ok_or_else(|| usage("--d is required"))?;
    if d < 2 {
        return Err(usage(format!("the Weingarten formula needs d >= 2, got {d}")));
    }
    let samples = cfg.pick(a.samples, "samples")?.unwrap_or(1_000_000);
    if samples < 10_000 {
        return Err(usage(format!("--samples must be at least 10000, got {samples}")));
    }
    let seed = cfg.pick(a.seed, "seed")?.unwrap_or(0);
    let patterns = index_class_patterns(d);
    let estimates = fourth_moments_mc(&patterns, d, samples, RngSeed::new(seed, 0))?;

    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(&mut out);
    let mut worst: (f64, String) = (0.0, String::new());
    for (idx, est) in patterns.iter().zip(&estimates) {
        let analytic = rational_to_f64(fourth_moment_analytic(idx, d)?);
        let z = est.z_score(C64::new(analytic, 0.0));
        if !(z <= worst.0) {
            worst = (z, idx.label());
        }
        w.serialize(WeingartenRow {
            pattern: idx.label(),
            d,
            analytic: format!("{analytic:.8e}"),
            mc_mean: format!("{:.8e}", est.mean.re),
            mc_stderr: format!("{:.8e}", est.stderr),
            z_score: format!("{z:.8e}"),
        })
        .map_err(Error::from)?;
    }
    w.flush()?;
    drop(w);
    out.flush()?;
    eprintln!(
        "d = {d}, {} patterns, {samples} samples: max |z| = {:.3} ({})",
        patterns.len(),
        worst.0,
        worst.1
    );
    if !(worst.0 <= Z_LIMIT) {
        return Err(CliError::Failed(format!("pattern {} has |z| = {:.3} > {Z_LIMIT}", worst.1, worst.0)));
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| Error::Format(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())).into())
}

/// Pretty JSON to `path`, or to stdout.
fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
            writeln!(w)?;
        }
    }
    Ok(())
}
