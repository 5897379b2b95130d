//! Command-line front end. [`run`] parses arguments, executes one command and
//! returns the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | regime or other precondition violated |
//! | 3 | I/O failure |
//! | 4 | malformed input or arguments |
//!
//! `CZIC_THREADS` caps the worker threads of the parallel sweeps.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{bound_frontier, BoundKind, GridSpec, Lemma1Mode};
use crate::dm::{
    check_more_capable, check_strong_interference, inner_region_search, outer_region_search, DMChannel, SearchConfig,
    Verdict,
};
use crate::error::{CzicError, Result};
use crate::mc::{
    closed_form_rates, estimate_rates, run_trials, CodebookMode, Decoder, RateEstimates, SimConfig, TrialSummary,
};
use crate::model::{classify_regime, is_strong_interference, more_capable_sufficient, ChannelParams};
use crate::regions::{frontier_within, gap_report, upper_concave_envelope, write_csv, Frontier, FrontierSidecar};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_MALFORMED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "czic",
    version,
    about = "Rate regions of the Gaussian cognitive Z-interference channel"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Args)]
struct ChannelArgs {
    /// Cross gain from the cognitive transmitter to the primary receiver.
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
    p1: f64,
    #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
    p2: f64,
}

impl ChannelArgs {
    fn params(&self) -> Result<ChannelParams> {
        ChannelParams::new(self.a, self.p1, self.p2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Lemma1Arg {
    Full,
    Boundary,
}

#[derive(Debug, Clone, Copy, Args)]
struct GridArgs {
    /// Points on [0, 1] for power splits.
    #[arg(long, default_value_t = 201)]
    alpha_grid: usize,
    /// Points on [-1, 1] per correlation coefficient.
    #[arg(long, default_value_t = 101)]
    rho_grid: usize,
    /// R2 levels of each frontier.
    #[arg(long, default_value_t = 401)]
    r2_grid: usize,
    #[arg(long, value_enum, default_value_t = Lemma1Arg::Full)]
    lemma1_mode: Lemma1Arg,
    /// Replace each frontier by its upper concave envelope.
    #[arg(long)]
    convexify: bool,
}

impl GridArgs {
    fn spec(&self) -> GridSpec {
        GridSpec {
            alpha: self.alpha_grid,
            rho: self.rho_grid,
            r2: self.r2_grid,
            lemma1_mode: match self.lemma1_mode {
                Lemma1Arg::Full => Lemma1Mode::Full,
                Lemma1Arg::Boundary => Lemma1Mode::Boundary,
            },
        }
    }

    fn sizes(&self) -> BTreeMap<String, usize> {
        BTreeMap::from([
            ("alpha".to_string(), self.alpha_grid),
            ("rho".to_string(), self.rho_grid),
            ("r2".to_string(), self.r2_grid),
        ])
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Frontier of one bound as CSV (stdout, or --out with a JSON sidecar).
    Region {
        /// inner, lemma1, cor1, cor2, cor3, thm3, cor4, weak or strongcap.
        bound: BoundKind,
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise gaps and containment verdicts between bounds.
    Compare {
        /// Comma-separated bound ids, at least two.
        bounds: String,
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// lemma1, cor1 and inner frontiers at the reference channel plus their comparison.
    Figure4 {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Output directory.
        #[arg(long, default_value = "figure4")]
        out: PathBuf,
    },
    /// Interference regime and its thresholds.
    Classify {
        #[command(flatten)]
        channel: ChannelArgs,
    },
    /// Strong interference and the sufficient more-capable test.
    Conditions {
        #[command(flatten)]
        channel: ChannelArgs,
    },
    /// Randomized inner and outer regions of a discrete channel.
    DmOracle {
        /// Channel JSON file.
        channel: PathBuf,
        /// Random restarts per R2 level.
        #[arg(long, default_value_t = 6)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        u_size: Option<usize>,
        #[arg(long, default_value_t = 21)]
        r2_grid: usize,
        /// Containment tolerance in bits.
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
        /// Directory for inner.csv, outer.csv and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite blocklength random-coding trials.
    Simulate {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        r1: f64,
        #[arg(long, default_value_t = 0.25)]
        r2: f64,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// joint_ml or successive.
        #[arg(long, default_value = "joint_ml")]
        decoder: Decoder,
        /// explicit or implicit.
        #[arg(long, default_value = "explicit")]
        codebook: CodebookMode,
        /// Samples for the accompanying rate estimate.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Provenance record embedded in or written next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: Value,
    pub grids: BTreeMap<String, usize>,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    fn new(command: &str, params: Value, grids: BTreeMap<String, usize>, seed: Option<u64>, start: Instant) -> Self {
        RunManifest {
            command: command.to_string(),
            params,
            grids,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_clock_secs: start.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Debug, Serialize)]
struct DirectedGap {
    from: BoundKind,
    to: BoundKind,
    /// `max over R2 of R1_from - R1_to`.
    gap: f64,
    r2_at_max: f64,
    /// `from` lies inside `to` up to the tolerance.
    contained: bool,
}

#[derive(Debug, Serialize)]
struct PairGap {
    a: BoundKind,
    b: BoundKind,
    sup_gap: f64,
}

#[derive(Debug, Serialize)]
struct CompareReport {
    manifest: RunManifest,
    tolerance: f64,
    convexified: bool,
    directed: Vec<DirectedGap>,
    pairs: Vec<PairGap>,
}

#[derive(Debug, Serialize)]
struct Conditions {
    strong_interference: bool,
    more_capable_sufficient: bool,
}

#[derive(Debug, Serialize)]
struct SidecarFile<'a> {
    manifest: &'a RunManifest,
    frontier: FrontierSidecar,
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    #[serde(flatten)]
    summary: TrialSummary,
    rate_estimates: Option<RateEstimates>,
    closed_form_rates: [f64; 3],
    manifest: RunManifest,
}

#[derive(Debug, Serialize)]
struct DmReport {
    manifest: RunManifest,
    sizes: [usize; 5],
    strong_interference: Verdict,
    more_capable: Verdict,
    /// Plain directed gap; a slightly higher inner top R2 shows up in full here.
    gap_inner_to_outer: f64,
    /// Containment with the tolerance applied on both axes.
    inner_within_outer: bool,
    inner: Vec<[f64; 2]>,
    outer: Vec<[f64; 2]>,
}

/// Exit code for an error.
pub fn exit_code(err: &CzicError) -> i32 {
    match err {
        CzicError::Io(_) => EXIT_IO,
        CzicError::Malformed(_) => EXIT_MALFORMED,
        CzicError::Domain(_)
        | CzicError::Regime { .. }
        | CzicError::InvalidCorrelation { .. }
        | CzicError::Degenerate(_)
        | CzicError::CodebookCap(_) => EXIT_PRECONDITION,
    }
}

/// Parses `args` (program name first), runs the command with results on
/// `out` and diagnostics on `err`, and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_MALFORMED } else { EXIT_OK };
        }
    };
    let mut buf = Vec::new();
    let result = thread_pool().and_then(|pool| match pool {
        Some(pool) => pool.install(|| dispatch(cli.command, &mut buf)),
        None => dispatch(cli.command, &mut buf),
    });
    let result = result.and_then(|()| out.write_all(&buf).map_err(CzicError::from));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    let Ok(value) = std::env::var("CZIC_THREADS") else {
        return Ok(None);
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CzicError::malformed(format!("CZIC_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| CzicError::Io(e.to_string()))
}

fn params_json(p: &ChannelParams) -> Value {
    json!({ "a": p.a(), "p1": p.p1(), "p2": p.p2() })
}

fn finish(frontier: Frontier, convexify: bool) -> Frontier {
    if convexify {
        upper_concave_envelope(&frontier)
    } else {
        frontier
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CzicError::Io(e.to_string()))?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T, pretty: bool) -> Result<()> {
    let text = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    }
    .map_err(|e| CzicError::Io(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

/// Writes `frontier` as CSV at `path` and its sidecar at `path` with a
/// `.json` extension.
fn write_frontier(path: &Path, frontier: &Frontier, bound: &str, manifest: &RunManifest) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_csv(frontier, &mut f)?;
    f.flush()?;
    let sidecar = SidecarFile {
        manifest,
        frontier: FrontierSidecar {
            bound: bound.to_string(),
            params: manifest.params.clone(),
            grids: manifest.grids.clone(),
            convexified: frontier.convexified(),
            points: frontier.len(),
        },
    };
    write_json(&path.with_extension("json"), &sidecar)
}

fn parse_bounds(list: &str) -> Result<Vec<BoundKind>> {
    let kinds = list
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<BoundKind>>>()?;
    if kinds.len() < 2 {
        return Err(CzicError::malformed("compare needs at least two bound ids"));
    }
    Ok(kinds)
}

fn compare_frontiers(
    kinds: &[BoundKind],
    frontiers: &[Frontier],
    tol: f64,
    convexified: bool,
    manifest: RunManifest,
) -> Result<CompareReport> {
    let mut directed = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..kinds.len() {
        for j in 0..kinds.len() {
            if i == j {
                continue;
            }
            let g = gap_report(&frontiers[i], &frontiers[j])?;
            directed.push(DirectedGap {
                from: kinds[i],
                to: kinds[j],
                gap: g.gap,
                r2_at_max: g.r2_at_max,
                contained: g.gap <= tol,
            });
        }
    }
    for i in 0..kinds.len() {
        for j in i + 1..kinds.len() {
            let ab = gap_report(&frontiers[i], &frontiers[j])?.gap;
            let ba = gap_report(&frontiers[j], &frontiers[i])?.gap;
            pairs.push(PairGap {
                a: kinds[i],
                b: kinds[j],
                sup_gap: ab.max(ba),
            });
        }
    }
    Ok(CompareReport {
        manifest,
        tolerance: tol,
        convexified,
        directed,
        pairs,
    })
}

fn frontiers_for(kinds: &[BoundKind], params: &ChannelParams, grid: &GridArgs) -> Result<Vec<Frontier>> {
    let spec = grid.spec();
    kinds
        .iter()
        .map(|&k| bound_frontier(k, params, &spec).map(|f| finish(f, grid.convexify)))
        .collect()
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol >= 0.0 {
        Ok(())
    } else {
        Err(CzicError::domain(format!(
            "tolerance {tol} must be finite and non-negative"
        )))
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn dispatch(command: Command, out: &mut Vec<u8>) -> Result<()> {
    let start = Instant::now();
    match command {
        Command::Region {
            bound,
            channel,
            grid,
            out: path,
        } => {
            let params = channel.params()?;
            let frontier = finish(bound_frontier(bound, &params, &grid.spec())?, grid.convexify);
            match path {
                Some(path) => {
                    let manifest = RunManifest::new(
                        &format!("region {bound}"),
                        params_json(&params),
                        grid.sizes(),
                        None,
                        start,
                    );
                    write_frontier(&path, &frontier, bound.as_str(), &manifest)
                }
                None => write_csv(&frontier, out),
            }
        }
        Command::Compare {
            bounds,
            channel,
            grid,
            tol,
            out: path,
        } => {
            check_tol(tol)?;
            let kinds = parse_bounds(&bounds)?;
            let params = channel.params()?;
            let frontiers = frontiers_for(&kinds, &params, &grid)?;
            let manifest = RunManifest::new(
                &format!("compare {bounds}"),
                params_json(&params),
                grid.sizes(),
                None,
                start,
            );
            let report = compare_frontiers(&kinds, &frontiers, tol, grid.convexify, manifest)?;
            if let Some(path) = path {
                write_json(&path, &report)?;
            }
            print_json(out, &report, true)
        }
        Command::Figure4 {
            channel,
            grid,
            tol,
            out: dir,
        } => {
            check_tol(tol)?;
            let params = channel.params()?;
            let kinds = [BoundKind::Lemma1, BoundKind::Cor1, BoundKind::Inner];
            let frontiers = frontiers_for(&kinds, &params, &grid)?;
            fs::create_dir_all(&dir)?;
            let manifest = RunManifest::new("figure4", params_json(&params), grid.sizes(), None, start);
            for (kind, frontier) in kinds.iter().zip(&frontiers) {
                write_frontier(&dir.join(format!("{kind}.csv")), frontier, kind.as_str(), &manifest)?;
            }
            let report = compare_frontiers(&kinds, &frontiers, tol, grid.convexify, manifest)?;
            write_json(&dir.join("report.json"), &report)?;
            print_json(out, &report, true)
        }
        Command::Classify { channel } => {
            let regime = classify_regime(&channel.params()?);
            let thresholds = regime.thresholds.as_array().map(round4);
            print_json(out, &json!({ "regime": regime.tag, "thresholds": thresholds }), false)
        }
        Command::Conditions { channel } => {
            let params = channel.params()?;
            let report = Conditions {
                strong_interference: is_strong_interference(&params),
                more_capable_sufficient: more_capable_sufficient(&params)?,
            };
            print_json(out, &report, false)
        }
        Command::DmOracle {
            channel: path,
            budget,
            seed,
            u_size,
            r2_grid,
            tol,
            out: dir,
        } => {
            check_tol(tol)?;
            let text = fs::read_to_string(&path)?;
            let mut ch = DMChannel::from_json(&text)?;
            if let Some(u) = u_size {
                ch = ch.with_u_size(u)?;
            }
            let cfg = SearchConfig {
                restarts: budget,
                levels: r2_grid,
                seed,
                ..SearchConfig::default()
            };
            let strong_interference = check_strong_interference(&ch, &cfg)?;
            let more_capable = check_more_capable(&ch, &cfg)?;
            let inner = inner_region_search(&ch, &cfg)?;
            let outer = outer_region_search(&ch, &cfg)?;
            let gap = gap_report(&inner, &outer)?.gap;
            let grids = BTreeMap::from([
                ("r2".to_string(), r2_grid),
                ("restarts".to_string(), budget),
                ("u_size".to_string(), ch.u_size),
            ]);
            let manifest = RunManifest::new(
                "dm-oracle",
                json!({ "channel": path.display().to_string(), "search": cfg }),
                grids,
                Some(seed),
                start,
            );
            let pts = |f: &Frontier| f.points().iter().map(|p| [p.r2, p.r1]).collect::<Vec<_>>();
            let report = DmReport {
                sizes: [ch.x1_size, ch.x2_size, ch.y1_size, ch.y2_size, ch.u_size],
                strong_interference,
                more_capable,
                gap_inner_to_outer: gap,
                inner_within_outer: frontier_within(&inner, &outer, tol),
                inner: pts(&inner),
                outer: pts(&outer),
                manifest,
            };
            if let Some(dir) = dir {
                fs::create_dir_all(&dir)?;
                write_frontier(&dir.join("inner.csv"), &inner, "dm_inner", &report.manifest)?;
                write_frontier(&dir.join("outer.csv"), &outer, "dm_outer", &report.manifest)?;
                write_json(&dir.join("report.json"), &report)?;
            }
            print_json(out, &report, true)
        }
        Command::Simulate {
            channel,
            alpha,
            n,
            r1,
            r2,
            trials,
            seed,
            decoder,
            codebook,
            samples,
            out: path,
        } => {
            let params = channel.params()?;
            let config = SimConfig {
                params,
                alpha,
                n,
                r1,
                r2,
                trials,
                seed,
                decoder1: decoder,
                codebook,
                samples,
            };
            let summary = run_trials(&config)?;
            let rate_estimates = if samples > 0 {
                Some(estimate_rates(&params, alpha, samples, seed)?)
            } else {
                None
            };
            let grids = BTreeMap::from([("n".to_string(), n), ("trials".to_string(), trials)]);
            let report = SimulateReport {
                summary,
                rate_estimates,
                closed_form_rates: closed_form_rates(&params, alpha)?,
                manifest: RunManifest::new("simulate", params_json(&params), grids, Some(seed), start),
            };
            if let Some(path) = path {
                write_json(&path, &report)?;
            }
            print_json(out, &report, true)
        }
    }
}
