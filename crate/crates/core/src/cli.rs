//! Batch experiment runner behind the `bilcount` binary.
//!
//! Every subcommand reads one polygon file, runs one computation and writes one artifact (JSON by
//! default, CSV with `--format csv`) wrapped in an [`Envelope`] carrying the tool version, the seed,
//! the SHA-256 of the polygon file, the budget and a completeness flag. Column orders and field
//! names are listed in `docs/formats.md`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error as ThisError;

use crate::complexity::{
    bridge_constants, direction_complexity_map_full, position_complexity_flow_full, Bridge, ComplexitySeries,
};
use crate::counting::{direction_counting_map, position_counting_flow, position_counting_map, CountingSeries};
use crate::error::Error;
use crate::geom::Point;
use crate::polygon::{validate_polygon, Polygon, PolygonSpec};
use crate::stats::{
    ae_tail_check, closed_form_average, direction_tail_family, mc_average, mc_average_position_map,
    position_tail_family, AverageKind, ClosedFormAverage, MCEstimate, PositionMapAverage, TailReport,
};
use crate::unfold::{SplitOptions, DEFAULT_MAX_TILES};
use crate::verify::{run_criterion, Outcome, VerifyConfig, CRITERIA};

pub const TOOL: &str = "bilcount";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "BILCOUNT_WORKERS";

pub mod exit {
    pub const OK: u8 = 0;
    pub const INTERNAL: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const SCHEMA: u8 = 4;
    pub const VALIDATION: u8 = 5;
    pub const BUDGET: u8 = 6;
    pub const EXCEPTIONAL: u8 = 7;
    pub const VERIFY_FAILED: u8 = 8;
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Context { context: String, source: Error },
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Context { source, .. } | CliError::Core(source) => error_code(source),
        }
    }
}

/// Exit code for a library error.
pub fn error_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => exit::IO,
        Error::Json(_) | Error::Schema(_) => exit::SCHEMA,
        Error::BudgetExceeded { .. } => exit::BUDGET,
        Error::ExceptionalBasepoint { .. } | Error::ExceptionalDirection { .. } => exit::EXCEPTIONAL,
        Error::Integrity(_) | Error::UnfoldingIntegrity { .. } => exit::INTERNAL,
        Error::InvalidGeodesic(_)
        | Error::ModelMismatch { .. }
        | Error::BasePointMismatch
        | Error::InvalidPoint(_)
        | Error::Domain(_)
        | Error::Validation(_)
        | Error::InconsistentPolygon { .. }
        | Error::InvalidBase(_)
        | Error::DegenerateView
        | Error::InsufficientData(_)
        | Error::NonMonotone { .. } => exit::VALIDATION,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "bilcount", version, about = "Singular-orbit counting and complexity experiments on polygonal billiards")]
pub struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Cap on the number of beams processed by one computation.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_TILES)]
    pub max_tiles: usize,
    /// Output file; standard output when omitted.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flow counting function gc_z(l) at an interior point.
    CountPosition(FlowArgs),
    /// Map counting function gd_θ(n) for a direction (planar polygons).
    CountDirection(DirectionArgs),
    /// Boundary counting functions gd_s(n) and god_s(n) (planar polygons).
    CountBoundary(BoundaryArgs),
    /// Position complexity h_z(l) at an interior point.
    ComplexityPosition(FlowArgs),
    /// Direction complexity fd_θ(n) (planar polygons).
    ComplexityDirection(DirectionArgs),
    /// Constants h₀, l₀ with complexity = h₀ + counting beyond l₀.
    Bridge(BridgeArgs),
    /// Monte Carlo average of a counting function against its closed form.
    Average(AverageArgs),
    /// Fraction of sampled complexities exceeding the almost-everywhere tail bound.
    TailCheck(TailArgs),
    /// Runs the built-in acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// Length budget.
    #[arg(long = "l")]
    pub length: f64,
    /// Base point in polygon-file coordinates, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub z: Vec<f64>,
    pub polygon: PathBuf,
}

#[derive(Debug, Args)]
pub struct DirectionArgs {
    /// Direction angle in radians.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: f64,
    /// Step budget.
    #[arg(long)]
    pub n: usize,
    pub polygon: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    /// Side index of the base point.
    #[arg(long, requires = "at", conflicts_with = "global")]
    pub side: Option<usize>,
    /// Arclength of the base point from the start corner of `--side`.
    #[arg(long, requires = "side")]
    pub at: Option<f64>,
    /// Arclength of the base point along the whole boundary.
    #[arg(long)]
    pub global: Option<f64>,
    /// Step budget.
    #[arg(long)]
    pub n: usize,
    pub polygon: PathBuf,
}

#[derive(Debug, Args)]
pub struct BridgeArgs {
    /// Length budget for a position bridge (with `--z`).
    #[arg(long = "l", requires = "z", conflicts_with_all = ["theta", "n"])]
    pub length: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub z: Option<Vec<f64>>,
    /// Direction for a direction bridge (with `--n`).
    #[arg(long, allow_negative_numbers = true, requires = "n")]
    pub theta: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    pub polygon: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AverageTarget {
    /// gd_θ(n) averaged over θ.
    Direction,
    /// gc_z(l) averaged over the table.
    Position,
    /// gd_s(n; v) averaged over the boundary, against the boundary curve lengths.
    PositionMap,
}

#[derive(Debug, Args)]
pub struct AverageArgs {
    #[arg(value_enum)]
    pub target: AverageTarget,
    /// Length budget (position).
    #[arg(long = "l")]
    pub length: Option<f64>,
    /// Step budget (direction, position-map).
    #[arg(long)]
    pub n: Option<usize>,
    /// Target corner (position-map).
    #[arg(long)]
    pub corner: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    pub polygon: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TailTarget {
    /// fd_θ(n) over sampled directions.
    Direction,
    /// h_z(l) over sampled points.
    Position,
}

#[derive(Debug, Args)]
pub struct TailArgs {
    #[arg(value_enum)]
    pub target: TailTarget,
    /// Length budget (position).
    #[arg(long = "l")]
    pub length: Option<f64>,
    /// Grid spacing in length (position).
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    /// Step budget (direction).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Abscissa beyond which the bound is checked.
    #[arg(long)]
    pub threshold: f64,
    /// Also report the fraction of samples dipping below this multiple of the mean.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    pub polygon: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Comma separated check ids; all checks when omitted.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
    #[arg(long, default_value_t = VerifyConfig::default().seed)]
    pub seed: u64,
    /// Polygon file recorded in the report.
    pub polygon: Option<PathBuf>,
}

/// Budget of a run as recorded in the output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetInfo {
    pub length: Option<f64>,
    pub steps: Option<usize>,
    pub samples: Option<usize>,
    pub max_tiles: usize,
}

/// Wrapper around every result written by the tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub polygon_sha256: Option<String>,
    pub budget: BudgetInfo,
    /// False when the tile cap stopped a computation; the result is then partial or absent.
    pub complete: bool,
    pub result: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCounts {
    pub side: usize,
    pub s: f64,
    pub global: f64,
    pub pure: CountingSeries,
    /// Same records weighted by the sine of the angle to the side.
    pub optical: CountingSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub complexity: ComplexitySeries,
    pub counting: CountingSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    /// `h₀`.
    pub offset: i64,
    /// `l₀` (or `n₀`).
    pub threshold: f64,
    pub stabilized: bool,
    pub complexity: ComplexitySeries,
    pub counting: CountingSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageReport {
    pub closed_form: ClosedFormAverage,
    pub z_score: f64,
    /// Hyperbolic only: z-score against the `cosh l` form.
    pub printed_z_score: Option<f64>,
    pub estimate: MCEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionMapReport {
    pub pure_z_score: f64,
    pub optical_z_score: f64,
    pub average: PositionMapAverage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCheckReport {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub report: TailReport,
    pub parameters: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub outcomes: Vec<Outcome>,
}

/// Outcome of a successful run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The tile cap was hit; a partial artifact was written.
    Partial,
    VerifyFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => exit::OK,
            Status::Partial => exit::BUDGET,
            Status::VerifyFailed => exit::VERIFY_FAILED,
        }
    }
}

/// Reads and validates a polygon file, returning the polygon and the hex SHA-256 of its bytes.
pub fn parse_polygon_file(path: &Path) -> Result<(Polygon, String), CliError> {
    let context = |source: Error| CliError::Context { context: path.display().to_string(), source };
    let bytes = fs::read(path).map_err(|e| context(e.into()))?;
    let hash = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect::<String>();
    let spec: PolygonSpec = serde_json::from_slice(&bytes).map_err(|e| context(e.into()))?;
    let polygon = validate_polygon(&spec).map_err(context)?;
    polygon.angle_area_identity().map_err(context)?;
    Ok((polygon, hash))
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Status, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Core(Error::Integrity(e.to_string())))?;
    pool.install(|| dispatch(cli))
}

struct Ctx<'a> {
    cli: &'a Cli,
    command: &'static str,
    options: SplitOptions,
}

impl Ctx<'_> {
    fn envelope<T>(&self, seed: Option<u64>, hash: Option<String>, budget: BudgetInfo, complete: bool, result: Option<T>) -> Envelope<T> {
        Envelope {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: self.command.into(),
            seed,
            polygon_sha256: hash,
            budget: BudgetInfo { max_tiles: self.options.max_tiles, ..budget },
            complete,
            result,
        }
    }

    fn emit<T: Serialize>(
        &self,
        env: &Envelope<T>,
        csv: impl FnOnce(&mut Vec<u8>) -> crate::error::Result<()>,
    ) -> Result<Status, CliError> {
        let mut buf = Vec::new();
        match self.cli.format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut buf, env).map_err(Error::from)?;
                buf.push(b'\n');
            }
            Format::Csv => {
                write_csv_header(&mut buf, env)?;
                if env.result.is_some() {
                    csv(&mut buf)?;
                }
            }
        }
        match &self.cli.out {
            Some(path) => fs::write(path, &buf).map_err(|e| CliError::Context {
                context: path.display().to_string(),
                source: e.into(),
            })?,
            None => std::io::stdout().write_all(&buf).map_err(Error::from)?,
        }
        Ok(if env.complete { Status::Ok } else { Status::Partial })
    }
}

fn write_csv_header<T>(w: &mut Vec<u8>, env: &Envelope<T>) -> crate::error::Result<()> {
    let opt = |x: Option<String>| x.unwrap_or_default();
    writeln!(w, "# tool={}", env.tool)?;
    writeln!(w, "# version={}", env.version)?;
    writeln!(w, "# command={}", env.command)?;
    writeln!(w, "# seed={}", opt(env.seed.map(|s| s.to_string())))?;
    writeln!(w, "# polygon_sha256={}", opt(env.polygon_sha256.clone()))?;
    writeln!(w, "# budget_length={}", opt(env.budget.length.map(|x| x.to_string())))?;
    writeln!(w, "# budget_steps={}", opt(env.budget.steps.map(|x| x.to_string())))?;
    writeln!(w, "# budget_samples={}", opt(env.budget.samples.map(|x| x.to_string())))?;
    writeln!(w, "# max_tiles={}", env.budget.max_tiles)?;
    writeln!(w, "# complete={}", env.complete)?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn point(p: &Polygon, coords: &[f64]) -> Result<Point, CliError> {
    let z = Point::new(p.model(), coords)?;
    if !p.contains(&z) {
        return Err(Error::InvalidBase(format!("{coords:?} is not in the interior of the table")).into());
    }
    Ok(z)
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {x}")))
    }
}

fn required<T>(name: &str, x: Option<T>) -> Result<T, CliError> {
    x.ok_or_else(|| CliError::Usage(format!("{name} is required here")))
}

/// Runs `f`, turning a tile-cap overflow into an absent, incomplete result.
fn allow_partial<T>(f: impl FnOnce() -> crate::error::Result<T>) -> Result<Option<T>, CliError> {
    match f() {
        Ok(x) => Ok(Some(x)),
        Err(Error::BudgetExceeded { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn dispatch(cli: &Cli) -> Result<Status, CliError> {
    if cli.max_tiles == 0 {
        return Err(CliError::Usage("--max-tiles must be positive".into()));
    }
    let options = SplitOptions { max_tiles: cli.max_tiles, keep_history: false };
    let ctx = |command| Ctx { cli, command, options };
    match &cli.command {
        Command::CountPosition(a) => {
            let ctx = ctx("count-position");
            let (p, hash) = parse_polygon_file(&a.polygon)?;
            let l = positive("--l", a.length)?;
            let z = point(&p, &a.z)?;
            let g = position_counting_flow(&p, &z, l, options)?;
            let budget = BudgetInfo { length: Some(l), ..Default::default() };
            ctx.emit(&ctx.envelope(None, Some(hash), budget, g.complete, Some(g.clone())), |w| g.write_csv(w))
        }
        Command::CountDirection(a) => {
            let ctx = ctx("count-direction");
            let (p, hash) = parse_polygon_file(&a.polygon)?;
            let g = direction_counting_map(&p, a.theta, a.n, options)?;
            let budget = BudgetInfo { steps: Some(a.n), ..Default::default() };
            ctx.emit(&ctx.envelope(None, Some(hash), budget, g.complete, Some(g.clone())), |w| g.write_csv(w))
        }
        Command::CountBoundary(a) => {
            let ctx = ctx("count-boundary");
            let (p, hash) = parse_polygon_file(&a.polygon)?;
            let s = match (a.side, a.at, a.global) {
                (Some(side), Some(at), None) => p.boundary_point_on_side(side, at)?,
                (None, None, Some(g)) => p.boundary_point(g),
                _ => return Err(CliError::Usage("give either --side with --at, or --global".into())),
            };
            let (pure, optical) = position_counting_map(&p, &s, a.n, options)?;
            let complete = pure.complete;
            let budget = BudgetInfo { steps: Some(a.n), ..Default::default() };
            let r = BoundaryCounts { side: s.side, s: s.s, global: s.global, pure, optical };
            ctx.emit(&ctx.envelope(None, Some(hash), budget, complete, Some(r.clone())), |w| r.optical.write_csv(w))
        }
        Command::ComplexityPosition(a) => {
            let ctx = ctx("complexity-position");
            let (p, hash) = parse_polygon_file(&a.polygon)?;
            let l = positive("--l", a.length)?;
            let z = point(&p, &a.z)?;
            let (h, g, _) = position_complexity_flow_full(&p, &z, l, options)?;
            let budget = BudgetInfo { length: Some(l), ..Default::default() };
            let r = ComplexityReport { complexity: h, counting: g };
            let complete = r.complexity.complete;
            ctx.emit(&ctx.envelope(None, Some(hash), budget, complete, Some(r.clone())), |w| r.complexity.write_csv(w))
        }
        Command::ComplexityDirection(a) => {
            let ctx = ctx("complexity-direction");
            let (p, hash) = parse_polygon_file(&a.polygon)?;
            let (f, g, _) = direction_complexity_map_full(&p, a.theta, a.n, options)?;
            let budget = BudgetInfo { steps: Some(a.n), ..Default::default() };
            let r = ComplexityReport { complexity: f, counting: g };
            let complete = r.complexity.complete;
            ctx.emit(&ctx.envelope(None, Some(hash), budget, complete, Some(r.clone())), |w| r.complexity.write_csv(w))
        }
        Command::Bridge(a) => {
            let ctx = ctx("bridge");
            let (p, hash) = parse_polygon_file(&a.polygon)?;
            let (h, g, budget) = match (a.length, &a.z, a.theta, a.n) {
                (Some(l), Some(z), None, None) => {
                    let l = positive("--l", l)?;
                    let z = point(&p, z)?;
                    let (h, g, _) = position_complexity_flow_full(&p, &z, l, options)?;
                    (h, g, BudgetInfo { length: Some(l), ..Default::default() })
                }
                (None, None, Some(theta), Some(n)) => {
                    let (f, g, _) = direction_complexity_map_full(&p, theta, n, options)?;
                    (f, g, BudgetInfo { steps: Some(n), ..Default::default() })
                }
                _ => return Err(CliError::Usage("give either --l with --z, or --theta with --n".into())),
            };
            let Bridge { threshold, offset, stabilized } = bridge_constants(&h, &g)?;
            let complete = h.complete;
            let r = BridgeReport { offset, threshold, stabilized, complexity: h, counting: g };
            ctx.emit(&ctx.envelope(None, Some(hash), budget, complete, Some(r.clone())), |w| {
                writeln!(w, "offset,threshold,stabilized")?;
                writeln!(w, "{},{},{}", r.offset, r.threshold, r.stabilized)?;
                Ok(())
            })
        }
        Command::Average(a) => average(&ctx("average"), a),
        Command::TailCheck(a) => tail_check(&ctx("tail-check"), a),
        Command::Verify(a) => verify(&ctx("verify"), a),
    }
}

fn average(ctx: &Ctx, a: &AverageArgs) -> Result<Status, CliError> {
    let (p, hash) = parse_polygon_file(&a.polygon)?;
    let options = ctx.options;
    if a.samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()));
    }
    if a.target == AverageTarget::PositionMap {
        let n = required("--n", a.n)?;
        let v = required("--corner", a.corner)?;
        let budget = BudgetInfo { steps: Some(n), samples: Some(a.samples), ..Default::default() };
        let r = allow_partial(|| mc_average_position_map(&p, v, n, a.samples, a.seed, options))?.map(|avg| {
            let z = |lhs: f64, se: f64, rhs: f64| if lhs == rhs { 0.0 } else { (lhs - rhs) / se };
            PositionMapReport {
                pure_z_score: z(avg.lhs_pure, avg.lhs_pure_se, avg.rhs_pure),
                optical_z_score: z(avg.lhs_optical, avg.lhs_optical_se, avg.rhs_optical),
                average: avg,
            }
        });
        let env = ctx.envelope(Some(a.seed), Some(hash), budget, r.is_some(), r);
        let r = env.result.clone();
        return ctx.emit(&env, |w| {
            let r = r.expect("csv is only written for present results");
            writeln!(w, "index,parameter,pure,optical")?;
            for (i, ((x, y), s)) in r.average.pure.values.iter().zip(&r.average.optical.values).zip(&r.average.pure.parameters).enumerate() {
                writeln!(w, "{i},{},{x},{y}", s[0])?;
            }
            Ok(())
        });
    }
    let (kind, arg, budget) = match a.target {
        AverageTarget::Direction => {
            let n = required("--n", a.n)?;
            (AverageKind::DirectionMap, n as f64, BudgetInfo { steps: Some(n), ..Default::default() })
        }
        _ => {
            let l = positive("--l", required("--l", a.length)?)?;
            (AverageKind::PositionFlow, l, BudgetInfo { length: Some(l), ..Default::default() })
        }
    };
    let budget = BudgetInfo { samples: Some(a.samples), ..budget };
    let closed_form = closed_form_average(&p, kind, arg)?;
    let r = allow_partial(|| mc_average(&p, kind, arg, a.samples, a.seed, options))?.map(|estimate| AverageReport {
        z_score: estimate.z_score(closed_form.normalized),
        printed_z_score: closed_form.printed_normalized.map(|t| estimate.z_score(t)),
        closed_form,
        estimate,
    });
    let env = ctx.envelope(Some(a.seed), Some(hash), budget, r.is_some(), r);
    let r = env.result.clone();
    ctx.emit(&env, |w| r.expect("csv is only written for present results").estimate.write_csv(w))
}

fn tail_check(ctx: &Ctx, a: &TailArgs) -> Result<Status, CliError> {
    let (p, hash) = parse_polygon_file(&a.polygon)?;
    let options = ctx.options;
    if a.samples < 1 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let (family, budget) = match a.target {
        TailTarget::Direction => {
            let n = required("--n", a.n)?;
            let budget = BudgetInfo { steps: Some(n), samples: Some(a.samples), ..Default::default() };
            let fam = allow_partial(|| direction_tail_family(&p, n, a.samples, a.seed, options))?;
            (fam.map(|(f, t)| (f, t.into_iter().map(|x| vec![x]).collect())), budget)
        }
        TailTarget::Position => {
            let l = positive("--l", required("--l", a.length)?)?;
            let budget = BudgetInfo { length: Some(l), samples: Some(a.samples), ..Default::default() };
            (allow_partial(|| position_tail_family(&p, l, a.step, a.samples, a.seed, options))?, budget)
        }
    };
    let r = match family {
        Some((family, parameters)) => {
            let mean = family.mean();
            let report = ae_tail_check(&family, &mean, a.epsilon, a.threshold, a.c)?;
            Some(TailCheckReport { grid: family.grid, mean, report, parameters })
        }
        None => None,
    };
    let env = ctx.envelope(Some(a.seed), Some(hash), budget, r.is_some(), r);
    let r = env.result.clone();
    ctx.emit(&env, |w| {
        let r = r.expect("csv is only written for present results");
        writeln!(w, "abscissa,mean")?;
        for (t, m) in r.grid.iter().zip(&r.mean) {
            writeln!(w, "{t},{m}")?;
        }
        Ok(())
    })
}

fn verify(ctx: &Ctx, a: &VerifyArgs) -> Result<Status, CliError> {
    let hash = match &a.polygon {
        Some(path) => Some(parse_polygon_file(path)?.1),
        None => None,
    };
    let ids: Vec<String> = match &a.only {
        Some(ids) => ids.iter().map(|s| s.trim().to_uppercase()).collect(),
        None => CRITERIA.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.contains(&id.as_str())) {
        return Err(CliError::Usage(format!("unknown check {bad}")));
    }
    let cfg = VerifyConfig { seed: a.seed, options: ctx.options };
    let mut outcomes = Vec::new();
    for id in &ids {
        let o = run_criterion(id, &cfg)?;
        eprintln!("{}", o.line());
        outcomes.push(o);
    }
    let passed = outcomes.iter().all(|o| o.passed);
    let r = VerifyReport { passed, outcomes };
    let env = ctx.envelope(Some(a.seed), hash, BudgetInfo::default(), true, Some(r.clone()));
    ctx.emit(&env, |w| {
        writeln!(w, "id,passed,seconds,detail")?;
        for o in &r.outcomes {
            writeln!(w, "{},{},{},{}", o.id, o.passed, o.seconds, csv_field(&o.detail))?;
        }
        Ok(())
    })?;
    Ok(if passed { Status::Ok } else { Status::VerifyFailed })
}
