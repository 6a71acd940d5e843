use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use knperc::bounds::{self, ConnectiveConstantBound};
use knperc::coupling;
use knperc::dual::{self, DualGeometry};
use knperc::explorer::{self, BoxRegion, Explore};
use knperc::rational::to_fraction_string;
use knperc::saw;
use knperc::walk_enum::{self, TauMethod};
use knperc::{Execution, ModelSpec, Rational, Variant, Vertex};
use serde::Serialize;

use crate::args::{self, List};
use crate::output::{self, EstimateRow, Format};

/// Input the library does not check itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "knperc", version, about = "Percolation of lattice k-neighbor graphs")]
pub struct Cli {
    /// Worker threads for trial-parallel work (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Output file (default: standard output).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Explore one cluster and list its vertices.
    Sample(SampleArgs),
    /// Boundary-reach probability of the origin's cluster.
    Estimate(EstimateArgs),
    /// Mean fraction of the box covered by the origin's cluster.
    Proportion(EstimateArgs),
    /// Exact law of the coincidence time of two monotone walks.
    Tau(TauArgs),
    /// Closed-form percolation criteria.
    Bounds(BoundsArgs),
    /// Self-avoiding walk and dual circuit counts.
    Saw(SawArgs),
    /// Peierls sum over dual circuits around the origin.
    Peierls(PeierlsArgs),
    /// Exact joint laws of closed dual edges.
    Dual(DualArgs),
    /// Dimension-lowering coupling of the directed model.
    Couple(CoupleArgs),
    /// Out- versus in-component sizes on the torus.
    MassTransport(MassTransportArgs),
    /// Generation maxima of the directed graph with k >= d + 1.
    Growth(GrowthArgs),
}

#[derive(Args, Debug, Serialize)]
struct ModelArgs {
    /// dng, ung, bng or xng.
    #[arg(long, default_value = "dng")]
    variant: Variant,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec> {
        Ok(ModelSpec::new(self.d, self.k, self.variant, self.seed)?)
    }
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Box half-side.
    #[arg(long)]
    n: u32,
    /// Trial index under the master seed.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Box half-sides, e.g. `5,15,25` or `5..10`.
    #[arg(long, value_parser = args::u32s)]
    n: List<u32>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug, Serialize)]
struct TauArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    cutoff: usize,
    /// Key states by sorted difference vectors (default) or not.
    #[arg(long)]
    naive: bool,
    /// Also report E[N_n] and E[N_n^2] for this k (needs --len).
    #[arg(long, requires = "len")]
    k: Option<usize>,
    /// Path length n for the moments.
    #[arg(long, requires = "k")]
    len: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct BoundsArgs {
    /// Dimensions, e.g. `4..7`.
    #[arg(long, value_parser = args::usizes)]
    d: Option<List<usize>>,
    /// Number of choices; adds the criterion verdict per dimension.
    #[arg(long)]
    k: Option<usize>,
    /// Refine with exact P(tau_d = l) for l up to this cutoff.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Check the induction extending R(3, d) < 0 up to this dimension.
    #[arg(long)]
    largedmon: Option<usize>,
    /// Bidirectional criteria for --k and each --d.
    #[arg(long)]
    bng: bool,
    /// Upper bound on the connective constant, used by --bng.
    #[arg(long)]
    c_upper: Option<f64>,
    /// 1-dependent criterion for the floor(alpha d)-BnG.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct SawArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    n_max: usize,
    /// Also count dual circuits around the origin for these even lengths.
    #[arg(long, value_parser = args::usizes)]
    circuits: Option<List<usize>>,
}

#[derive(Args, Debug, Serialize)]
struct PeierlsArgs {
    /// Probability that a dual edge is closed, as a fraction.
    #[arg(long, value_parser = args::fraction, default_value = "1/4")]
    #[serde(serialize_with = "knperc::rational::serialize_fraction")]
    closed_prob: Rational,
    #[arg(long, default_value_t = 3.0)]
    growth: f64,
    #[arg(long, default_value_t = 4)]
    n_start: usize,
    /// Exact circuit counts up to this length, geometric tail beyond.
    #[arg(long, default_value_t = 12)]
    n_exact: usize,
}

#[derive(Args, Debug, Serialize)]
struct DualArgs {
    #[arg(long, default_value = "ung")]
    variant: Variant,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// orthogonal, straight, parallel or disjoint (default: all).
    #[arg(long)]
    geometry: Option<DualGeometry>,
    /// Check every dual path of this length instead.
    #[arg(long)]
    path_length: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct CoupleArgs {
    /// Choices in the derived model; the source uses k + 1.
    #[arg(long)]
    k: usize,
    /// Dimension of the derived model; the source lives in d + 1.
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct MassTransportArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    /// Torus side length.
    #[arg(long, default_value_t = 11)]
    side: u32,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct GrowthArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 50)]
    generations: usize,
    /// Seeds to run, e.g. `0..99`.
    #[arg(long, value_parser = args::u32s, default_value = "0")]
    seeds: List<u32>,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("cannot start worker pool")?;
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    // Validate before creating the output file.
    let job = prepare(&cli.command, exec)?;
    let mut out = output::open(cli.out.as_deref())?;
    job(&mut *out, &cli.command)
}

type Job = Box<dyn FnOnce(&mut dyn std::io::Write, &Command) -> Result<()>>;

fn prepare(command: &Command, exec: Execution) -> Result<Job> {
    Ok(match command {
        Command::Sample(a) => {
            let spec = a.model.spec()?;
            let region = BoxRegion::new(a.n)?;
            let seed = explorer::trial_seed(spec.master_seed(), a.trial);
            let r = explorer::explore(&spec, seed, region, Explore::exhaust(spec.variant()).recorded())?;
            let format = a.format;
            Box::new(move |out, cfg| match format {
                Format::Json => output::write_json(out, cfg, &r),
                Format::Csv => write_vertices(out, cfg, r.visited_sample.as_deref().unwrap_or_default()),
            })
        }
        Command::Estimate(a) | Command::Proportion(a) => {
            let spec = a.model.spec()?;
            let proportion = matches!(command, Command::Proportion(_));
            let mut rows = Vec::new();
            for &n in a.n.iter() {
                let e = if proportion {
                    explorer::estimate_proportion(&spec, n, a.trials, exec)?
                } else {
                    explorer::estimate_boundary_reach(&spec, n, a.trials, exec)?
                };
                rows.push(EstimateRow::new(spec.variant(), spec.d(), spec.k(), n, e));
            }
            let format = a.format;
            Box::new(move |out, cfg| output::write_estimates(out, format, cfg, &rows))
        }
        Command::Tau(a) => {
            let method = if a.naive { TauMethod::Naive } else { TauMethod::Symmetric };
            let tau = walk_enum::enumerate_tau_with(a.d, a.cutoff, method, knperc::budget_from_env(), exec)?;
            let moments = match (a.k, a.len) {
                (Some(k), Some(n)) => Some(Moments {
                    k,
                    n,
                    first: to_fraction_string(&walk_enum::expected_open_paths(k, a.d, n)?),
                    second: to_fraction_string(&walk_enum::second_moment_exact(k, a.d, n)?),
                }),
                _ => None,
            };
            let report = TauReport {
                d: a.d,
                cutoff: a.cutoff,
                partial_sum: to_fraction_string(&tau.partial_sum()),
                values: tau.values.iter().map(to_fraction_string).collect(),
                moments,
            };
            json(report)
        }
        Command::Bounds(a) => json(bounds_report(a)?),
        Command::Saw(a) => {
            let counts = saw::count_saw_with(a.d, a.n_max, knperc::budget_from_env(), exec)?;
            let circuits = match &a.circuits {
                Some(ns) => Some(
                    ns.iter()
                        .map(|&n| saw::count_circuits_with(n, knperc::budget_from_env(), exec))
                        .collect::<knperc::Result<Vec<_>>>()?,
                ),
                None => None,
            };
            let report = SawReport {
                upper_bound: ConnectiveConstantBound::from_saw_counts(&counts),
                roots: counts.roots(),
                counts,
                circuits,
            };
            json(report)
        }
        Command::Peierls(a) => {
            let counts = saw::count_saw_with(2, a.n_exact.max(4) - 1, knperc::budget_from_env(), exec)?;
            json(saw::peierls_bound(&a.closed_prob, &counts, a.n_start, a.n_exact, a.growth)?)
        }
        Command::Dual(a) => {
            let spec = ModelSpec::new(a.d, a.k, a.variant, 0)?;
            match a.path_length {
                Some(len) => json(dual::path_closed_bound(&spec, len, exec)?),
                None => {
                    let geometries = match a.geometry {
                        Some(g) => vec![g],
                        None => DualGeometry::ALL.to_vec(),
                    };
                    let reports = geometries
                        .into_iter()
                        .map(|g| dual::joint_dual_closed(&spec, g))
                        .collect::<knperc::Result<Vec<_>>>()?;
                    json(reports)
                }
            }
        }
        Command::Couple(a) => json(coupling::estimate_coupled(a.k, a.d, a.n, a.trials, a.seed, exec)?),
        Command::MassTransport(a) => {
            let spec = ModelSpec::new(a.d, a.k, Variant::Directed, a.seed)?;
            json(explorer::mass_transport_check(&spec, a.side, a.trials, exec)?)
        }
        Command::Growth(a) => {
            let spec = ModelSpec::new(a.d, a.k, Variant::Directed, 0)?;
            let runs = a
                .seeds
                .iter()
                .map(|&s| {
                    explorer::growth_trace(&spec, a.generations, s as u64).map(|trace| GrowthRun {
                        seed: s as u64,
                        strictly_increasing: trace.strictly_increasing(),
                        trace,
                    })
                })
                .collect::<knperc::Result<Vec<_>>>()?;
            let violations = runs.iter().filter(|r| !r.strictly_increasing).count();
            json(GrowthReport { violations, runs })
        }
    })
}

fn json<R: Serialize + 'static>(report: R) -> Job {
    Box::new(move |out, cfg| output::write_json(out, cfg, &report))
}

fn write_vertices<C: Serialize>(out: &mut dyn std::io::Write, cfg: &C, vertices: &[Vertex]) -> Result<()> {
    writeln!(out, "# knperc {} config={}", output::VERSION, serde_json::to_string(cfg)?)?;
    let d = vertices.first().map_or(0, Vertex::dim);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record((0..d).map(|i| format!("x{i}")))?;
    for v in vertices {
        w.write_record(v.coords().iter().map(i32::to_string))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Moments {
    k: usize,
    n: usize,
    first: String,
    second: String,
}

#[derive(Serialize)]
struct TauReport {
    d: usize,
    cutoff: usize,
    values: Vec<String>,
    partial_sum: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    moments: Option<Moments>,
}

#[derive(Serialize)]
struct SawReport {
    counts: saw::SawCounts,
    roots: Vec<f64>,
    upper_bound: ConnectiveConstantBound,
    #[serde(skip_serializing_if = "Option::is_none")]
    circuits: Option<Vec<saw::CircuitCount>>,
}

#[derive(Serialize)]
struct GrowthRun {
    seed: u64,
    strictly_increasing: bool,
    trace: explorer::GenerationTrace,
}

#[derive(Serialize)]
struct GrowthReport {
    violations: usize,
    runs: Vec<GrowthRun>,
}

#[derive(Serialize)]
struct DimensionRow {
    d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    cdub: Option<f64>,
    smallest_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<bounds::BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bng: Option<[bounds::CriterionReport; 2]>,
}

#[derive(Serialize, Default)]
struct BoundsOutput {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    dimensions: Vec<DimensionRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    induction: Option<bounds::InductionTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    one_dependent: Option<bounds::OneDependentReport>,
}

fn bounds_report(a: &BoundsArgs) -> Result<BoundsOutput> {
    let mut outp = BoundsOutput::default();
    if a.d.is_none() && a.largedmon.is_none() && a.alpha.is_none() {
        return Err(usage("bounds needs --d, --largedmon or --alpha"));
    }
    if (a.bng || a.cutoff.is_some()) && a.k.is_none() {
        return Err(usage("--bng and --cutoff need --k"));
    }
    for &d in a.d.as_deref().unwrap_or_default() {
        let bng = if a.bng {
            let k = a.k.unwrap();
            let c = match a.c_upper {
                Some(u) => ConnectiveConstantBound::new(d, d as f64, u, "user supplied")?,
                None => ConnectiveConstantBound::default_for(d),
            };
            Some([bounds::bng_subcritical(k, d, &c)?, bounds::bng_supercritical(k, d)])
        } else {
            None
        };
        // The second-moment criterion only exists from d = 4 on; without
        // --bng a smaller d is an error, reported by cdub itself.
        let (cdub, smallest_k, report) = if d >= 4 || !a.bng {
            let cdub = bounds::cdub(d)?;
            let report = match (a.k, a.cutoff) {
                (Some(k), Some(cutoff)) => {
                    let tau = walk_enum::enumerate_tau(d, cutoff)?;
                    Some(bounds::bound_report(k, d, Some((&tau, cutoff)))?)
                }
                (Some(k), None) if !a.bng => Some(bounds::bound_report(k, d, None)?),
                _ => None,
            };
            (Some(cdub), bounds::smallest_k(d)?, report)
        } else {
            (None, None, None)
        };
        outp.dimensions.push(DimensionRow {
            d,
            cdub,
            smallest_k,
            report,
            bng,
        });
    }
    if let Some(dm) = a.largedmon {
        outp.induction = Some(bounds::largedmon_check(dm)?);
    }
    if let Some(alpha) = a.alpha {
        outp.one_dependent = Some(bounds::one_dependent_criterion(alpha)?);
    }
    Ok(outp)
}
