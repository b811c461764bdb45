//! Command-line front end: `gen`, `sample`, `estimate` and `compare`.
//!
//! Exit codes: 0 success, 1 comparison mismatch, 2 usage or format error,
//! 3 statistically impossible estimate.

mod compare;

pub use compare::{compare, CompareReport, CompareRow};

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::aggregated::{
    mc_total_attenuation, pij_matrix_with, McConfig, DEFAULT_BOOTSTRAP_RESAMPLES,
};
use crate::dem::{parse_dem, write_dem_annotated, Dem};
use crate::error::{Error, Result};
use crate::estimated::{EstimatedDem, EventEstimate};
use crate::exact::{estimate_dem_exact, ExactConfig};
use crate::mask::EventMask;
use crate::parity::ShotData;
use crate::sampling::{
    make_random_sparse_dem, make_uniform_depolarizing_dem, read_shots, sample_histories,
    write_shots_binary, write_shots_text, DetectorHistories, RandomDemSpec, DEFAULT_DENSE_CAP,
};
use crate::sparse::{
    extract_events, low_weight_attenuations, prune_lattice, LatticeConfig, LowWeightMode,
};
use crate::stats::{is_significant, ErrorModel, DEFAULT_Z_THRESHOLD};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IMPOSSIBLE: i32 = 3;

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "DEMKIT_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "demkit",
    version,
    about = "Estimate detector error models from detector histories"
)]
pub struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a random sparse or uniformly depolarizing DEM.
    Gen(GenArgs),
    /// Sample detector histories from a DEM.
    Sample(SampleArgs),
    /// Estimate a DEM (or p_ij matrix, or total attenuation) from shots.
    Estimate(EstimateArgs),
    /// Compare an estimated DEM against the true one.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Number of detectors.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub events: usize,
    /// Largest event weight; defaults to min(4, n).
    #[arg(long)]
    pub max_weight: Option<usize>,
    #[arg(long, default_value_t = 0.001)]
    pub p_min: f64,
    #[arg(long, default_value_t = 0.02)]
    pub p_max: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Every nonzero event with probability eps / 2^n instead of a sparse DEM.
    #[arg(long, conflicts_with_all = ["events", "max_weight", "p_min", "p_max"])]
    pub uniform_eps: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ShotFormat {
    Txt,
    Bin,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub dem: PathBuf,
    #[arg(long)]
    pub shots: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ShotFormat::Txt)]
    pub format: ShotFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exact,
    Pij,
    Lowweight,
    Lattice,
    TotalAttenuation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ErrorArg {
    Bootstrap,
    Delta,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Shot file, text or binary.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Largest event weight for `lowweight` and `lattice`.
    #[arg(long, default_value_t = 4)]
    pub wmax: usize,
    /// Significance threshold in standard errors.
    #[arg(long, default_value_t = DEFAULT_Z_THRESHOLD)]
    pub significance: f64,
    /// Random parities for `total-attenuation`; 0 enumerates all 2^N.
    #[arg(long, default_value_t = 256)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Error model; the default is bootstrap for `exact`, delta otherwise.
    #[arg(long, value_enum)]
    pub error: Option<ErrorArg>,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_RESAMPLES)]
    pub resamples: usize,
    /// Set negative p_ij values to zero.
    #[arg(long)]
    pub clamp: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long = "true")]
    pub truth: PathBuf,
    #[arg(long)]
    pub est: PathBuf,
    /// Threshold for the per-row significance flag.
    #[arg(long, default_value_t = DEFAULT_Z_THRESHOLD)]
    pub significance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("demkit: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("demkit: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::EstimationImpossible { .. } => EXIT_IMPOSSIBLE,
        _ => EXIT_USAGE,
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Gen(a) => cmd_gen(&a).map(|()| EXIT_OK),
        Command::Sample(a) => cmd_sample(&a).map(|()| EXIT_OK),
        Command::Estimate(a) => cmd_estimate(&a).map(|()| EXIT_OK),
        Command::Compare(a) => cmd_compare(&a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Argument(format!("cannot open {}: {e}", path.display())))
}

pub fn read_dem_file(path: &Path) -> Result<Dem> {
    parse_dem(open(path)?)
}

pub fn read_shots_file(path: &Path) -> Result<DetectorHistories> {
    read_shots(open(path)?)
}

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    let (dem, header) = match args.uniform_eps {
        Some(eps) => (
            make_uniform_depolarizing_dem(args.n, eps)?,
            format!("gen n={} uniform_eps={eps}", args.n),
        ),
        None => {
            let max_weight = args.max_weight.unwrap_or(args.n.min(4));
            let spec = RandomDemSpec {
                n_detectors: args.n,
                n_events: args.events,
                max_weight,
                p_min: args.p_min,
                p_max: args.p_max,
                seed: args.seed,
            };
            let header = format!(
                "gen n={} events={} max_weight={max_weight} p_min={} p_max={} seed={}",
                args.n, args.events, args.p_min, args.p_max, args.seed
            );
            (make_random_sparse_dem(&spec)?, header)
        }
    };
    let mut w = output(args.out.as_deref())?;
    write_dem_annotated(&dem, &[header], |_| None, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let dem = read_dem_file(&args.dem)?;
    let shots = sample_histories(&dem, args.shots, args.seed);
    let mut w = output(args.out.as_deref())?;
    match args.format {
        ShotFormat::Txt => write_shots_text(&shots, &mut w)?,
        ShotFormat::Bin => write_shots_binary(&shots, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn error_model(args: &EstimateArgs, default: ErrorArg) -> ErrorModel {
    match args.error.unwrap_or(default) {
        ErrorArg::Bootstrap => ErrorModel::Bootstrap {
            resamples: args.resamples,
            seed: args.seed,
        },
        ErrorArg::Delta => ErrorModel::Delta,
    }
}

fn describe(model: ErrorModel) -> String {
    match model {
        ErrorModel::Bootstrap { resamples, seed } => {
            format!("bootstrap resamples={resamples} seed={seed}")
        }
        ErrorModel::Delta => "delta".into(),
    }
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let shots = read_shots_file(&args.data)?;
    let n = shots.n_detectors();
    let k = shots.n_shots();
    if k == 0 {
        return Err(Error::EmptyData);
    }
    let method = args
        .method
        .to_possible_value()
        .map(|v| v.get_name().to_owned())
        .unwrap_or_default();
    let mut header = vec![format!(
        "demkit estimate method={method} detectors={n} shots={k}"
    )];
    let mut w = output(args.out.as_deref())?;
    match args.method {
        Method::Exact => {
            if n > DEFAULT_DENSE_CAP {
                return Err(Error::Argument(format!(
                    "the exact method needs 2^N memory and is capped at N = {DEFAULT_DENSE_CAP}, got N = {n}; \
                     use --method lattice"
                )));
            }
            let cfg = ExactConfig {
                z_threshold: args.significance,
                error: error_model(args, ErrorArg::Bootstrap),
                ..ExactConfig::default()
            };
            header.push(format!(
                "significance={} error={}",
                cfg.z_threshold,
                describe(cfg.error)
            ));
            let est = estimate_dem_exact(&shots, &cfg)?;
            write_estimate(&est, header, &mut w)?;
        }
        Method::Pij => {
            let error = error_model(args, ErrorArg::Delta);
            let mut m = pij_matrix_with(&ShotData::new(&shots)?, error)?;
            if m.singles
                .iter()
                .chain(m.pairs.iter().map(|(_, _, e)| e))
                .all(|e| e.divergent)
            {
                return Err(all_divergent(n));
            }
            if args.clamp {
                m.clamp();
            }
            header.push(format!("error={} clamp={}", describe(error), args.clamp));
            for line in &header {
                writeln!(w, "# {line}")?;
            }
            for (i, e) in m.singles.iter().enumerate() {
                writeln!(
                    w,
                    "p i={i} value={} stderr={} divergent={}",
                    e.value, e.std_error, e.divergent
                )?;
            }
            for (i, j, e) in &m.pairs {
                writeln!(
                    w,
                    "pij i={i} j={j} value={} stderr={} divergent={}",
                    e.value, e.std_error, e.divergent
                )?;
            }
        }
        Method::Lowweight => {
            let source = ShotData::new(&shots)?;
            header.push(format!(
                "wmax={} significance={} error=delta",
                args.wmax, args.significance
            ));
            let all = low_weight_attenuations(&source, args.wmax, LowWeightMode::Cached)?;
            if all.values().all(|e| e.divergent) {
                return Err(all_divergent(n));
            }
            let mut est = EstimatedDem::new(n);
            for (set, a) in all {
                if a.divergent {
                    est.push_note(format!("set {set:?} is divergent"));
                } else if is_significant(&a, args.significance) {
                    est.push(EventEstimate::new(EventMask::from_indices(n, &set)?, a));
                }
            }
            write_estimate(&est, header, &mut w)?;
        }
        Method::Lattice => {
            let source = ShotData::new(&shots)?;
            let cfg = LatticeConfig {
                w_max: args.wmax,
                z_threshold: args.significance,
                error: error_model(args, ErrorArg::Delta),
            };
            header.push(format!(
                "wmax={} significance={} error={}",
                cfg.w_max,
                cfg.z_threshold,
                describe(cfg.error)
            ));
            let lattice = prune_lattice(&source, &cfg)?;
            if lattice.is_empty()
                && !lattice.pruned().is_empty()
                && lattice
                    .pruned()
                    .values()
                    .all(|r| *r == crate::sparse::PruneReason::Divergent)
            {
                return Err(all_divergent(n));
            }
            header.push(format!(
                "lattice stored={} evaluated={}",
                lattice.len(),
                lattice.n_evaluated()
            ));
            let est = extract_events(&lattice, &source)?;
            write_estimate(&est, header, &mut w)?;
        }
        Method::TotalAttenuation => {
            let cfg = if args.mc_samples == 0 {
                McConfig {
                    resamples: args.resamples,
                    ..McConfig::exhaustive()
                }
            } else {
                McConfig {
                    resamples: args.resamples,
                    ..McConfig::new(args.mc_samples, args.seed)
                }
            };
            header.push(format!(
                "mc_samples={} exhaustive={} seed={} resamples={}",
                cfg.n_samples, cfg.exhaustive, cfg.seed, cfg.resamples
            ));
            let r = mc_total_attenuation(&ShotData::new(&shots)?, &cfg)?;
            for line in &header {
                writeln!(w, "# {line}")?;
            }
            let e = r.estimate;
            writeln!(w, "a0={}", e.value)?;
            writeln!(w, "stderr={}", e.std_error)?;
            writeln!(w, "p_no_event={}", (-e.value).exp())?;
            writeln!(w, "draws={}", r.n_draws)?;
            writeln!(w, "divergent_fraction={}", r.divergent_fraction)?;
            writeln!(w, "divergent={}", e.divergent)?;
            w.flush()?;
            if e.divergent {
                return Err(Error::EstimationImpossible {
                    parities: vec![format!(
                        "{:.1}% of sampled parities",
                        100.0 * r.divergent_fraction
                    )],
                });
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn all_divergent(n: usize) -> Error {
    Error::EstimationImpossible {
        parities: vec![format!("every estimate over the {n} detectors")],
    }
}

fn write_estimate(est: &EstimatedDem, mut header: Vec<String>, w: &mut impl Write) -> Result<()> {
    header.extend(est.notes().iter().map(|n| format!("note: {n}")));
    est.write(&header, w)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    let truth = read_dem_file(&args.truth)?;
    let est = EstimatedDem::read(open(&args.est)?)?;
    let report = compare(&truth, &est, args.significance)?;
    let mut w = output(args.out.as_deref())?;
    report.write(&mut w)?;
    w.flush()?;
    Ok(if report.is_match() {
        EXIT_OK
    } else {
        EXIT_MISMATCH
    })
}
