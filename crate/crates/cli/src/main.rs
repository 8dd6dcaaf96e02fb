use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cpca_core::chebfit::{adaptive_fit, FitOptions, Transform};
use cpca_core::consensus::{run_with_options, write_trace_csv, ConsensusOptions};
use cpca_core::harness::{
    average_objective, brute_force_min, build_graph, run_sweep, sample_objective, write_metrics_csv, ExperimentSpec,
    Family, UPolicy,
};
use cpca_core::polyalg::minimize_by_stationary_points;
use cpca_core::sdp::minimize_by_sdp;
use cpca_core::{run_cpca, Backend, ChebProxy, CpcaConfig, Graph, Interval};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cpca", version, about = "Distributed global optimization of univariate objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a Chebyshev proxy to one sampled objective and report it as JSON.
    Fit(FitArgs),
    /// Minimize a Chebyshev series read from a file with both backends.
    OptimizePoly(OptimizePolyArgs),
    /// Run coefficient consensus on a graph and write the per-round trace CSV.
    ConsensusDemo(ConsensusArgs),
    /// Run one distributed instance and report the result as JSON.
    Run(RunArgs),
    /// Run an experiment spec (JSON) and write the metrics CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Expsum,
    Logisticlog,
}

impl From<ObjectiveArg> for Family {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Expsum => Family::ExpSum,
            ObjectiveArg::Logisticlog => Family::LogisticLog,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Sdp,
    Stationary,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Sdp => Backend::Sdp,
            BackendArg::Stationary => Backend::StationaryPoints,
        }
    }
}

#[derive(Args)]
struct Domain {
    /// Lower end of the interval.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    lo: f64,
    /// Upper end of the interval.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    hi: f64,
}

impl Domain {
    fn interval(&self) -> cpca_core::Result<Interval> {
        Interval::new(self.lo, self.hi)
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum, default_value = "expsum")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Agent whose objective is fitted.
    #[arg(long, default_value_t = 0)]
    agent: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[command(flatten)]
    domain: Domain,
    /// Use the FFT coefficient transform.
    #[arg(long)]
    fast: bool,
    /// Also check the fit on a uniform grid before accepting it.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizePolyArgs {
    /// File of Chebyshev coefficients separated by whitespace or commas.
    coeffs: PathBuf,
    /// Accuracy of the SDP backend.
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[command(flatten)]
    domain: Domain,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConsensusArgs {
    /// Edge list (`n=<count>` header, then `u v` lines); a random graph is drawn if omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// One coefficient vector per line; random vectors are drawn if omitted.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    agents: usize,
    #[arg(long, default_value_t = 0.4)]
    edge_prob: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Consensus accuracy; the stopping threshold is eps divided by the vector length.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Diameter bound; defaults to the exact diameter.
    #[arg(long = "upper-bound-U")]
    upper_bound_u: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "expsum")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 30)]
    agents: usize,
    #[arg(long, default_value_t = 0.4)]
    edge_prob: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, value_enum, default_value = "sdp")]
    backend: BackendArg,
    /// Diameter bound; defaults to the exact diameter.
    #[arg(long = "upper-bound-U")]
    upper_bound_u: Option<usize>,
    #[command(flatten)]
    domain: Domain,
    /// Also compute the brute-force optimum and report the error.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment spec as JSON.
    spec: PathBuf,
    /// Overrides the spec's seeds with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the spec's accuracy list with a single value.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long = "upper-bound-U")]
    upper_bound_u: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match output {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn emit_json(output: Option<&Path>, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(output, text.as_bytes())
}

fn parse_numbers(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("bad number {t:?}")))
        .collect()
}

fn diameter_bound(g: &Graph, requested: Option<usize>) -> cpca_core::Result<usize> {
    requested.map_or(UPolicy::ExactDiameter, UPolicy::Fixed).resolve(g)
}

fn fit(a: FitArgs) -> anyhow::Result<()> {
    let f = sample_objective(a.objective.into(), a.seed, a.agent)?;
    let opts = FitOptions {
        transform: if a.fast { Transform::Fast } else { Transform::Direct },
        strict: a.strict,
        ..FitOptions::default()
    };
    let (proxy, report) = adaptive_fit(|x| f.eval(x), a.domain.interval()?, a.eps, &opts)?;
    emit_json(
        a.output.as_deref(),
        &json!({ "objective": format!("{f:?}"), "report": report, "proxy": proxy }),
    )
}

fn optimize_poly(a: OptimizePolyArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&a.coeffs).with_context(|| format!("reading {}", a.coeffs.display()))?;
    let coeffs = parse_numbers(&text)?;
    if coeffs.is_empty() {
        bail!(cpca_core::Error::InvalidInput("no coefficients".into()));
    }
    let p = ChebProxy::new(a.domain.interval()?, coeffs)?;
    let (f_sp, xs) = minimize_by_stationary_points(&p);
    let f_sdp = minimize_by_sdp(&p, a.eps)?;
    emit_json(
        a.output.as_deref(),
        &json!({
            "degree": p.degree(),
            "sdp_min": f_sdp,
            "stationary_min": f_sp,
            "minimizers": xs,
        }),
    )
}

fn consensus_demo(a: ConsensusArgs) -> anyhow::Result<()> {
    let g = match &a.graph {
        Some(p) => Graph::parse_edge_list(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => build_graph(a.agents, a.edge_prob, a.seed)?,
    };
    let vectors: Vec<Vec<f64>> = match &a.vectors {
        Some(p) => fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(parse_numbers)
            .collect::<anyhow::Result<_>>()?,
        None => (0..g.n())
            .map(|i| {
                let f = sample_objective(Family::ExpSum, a.seed, i)?;
                Ok(adaptive_fit(|x| f.eval(x), Interval::unit(), a.eps, &FitOptions::default())?.0.into_coeffs())
            })
            .collect::<cpca_core::Result<_>>()?,
    };
    if vectors.len() != g.n() {
        bail!(cpca_core::Error::InvalidInput(format!("{} vectors for {} agents", vectors.len(), g.n())));
    }
    let u = diameter_bound(&g, a.upper_bound_u)?;
    let out = run_with_options(&g, &vectors, a.eps, u, &ConsensusOptions { trace: true, ..Default::default() })?;
    let mut buf = Vec::new();
    write_trace_csv(&out.trace, &mut buf)?;
    emit(a.output.as_deref(), &buf)?;
    eprintln!("stopped after {} rounds (U = {u}, delta = {:e})", out.rounds, out.delta_used);
    Ok(())
}

fn run(a: RunArgs) -> anyhow::Result<()> {
    let g = build_graph(a.agents, a.edge_prob, a.seed)?;
    let objs = (0..a.agents)
        .map(|i| sample_objective(a.objective.into(), a.seed, i))
        .collect::<cpca_core::Result<Vec<_>>>()?;
    let iv = a.domain.interval()?;
    let u = diameter_bound(&g, a.upper_bound_u)?;
    let cfg = CpcaConfig::new(a.eps, u).with_backend(a.backend.into());
    let r = run_cpca(&objs, &vec![iv; a.agents], &g, &cfg)?;
    let mut report = json!({
        "agents": a.agents,
        "diameter_bound": u,
        "interval": r.interval,
        "f_e_star_min": r.f_e_star.iter().copied().fold(f64::INFINITY, f64::min),
        "f_e_star_max": r.f_e_star.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "minimizers": r.minimizer_sets[0],
        "delta": r.delta,
        "metrics": r.metrics,
    });
    if a.oracle {
        let (f_star, x_star) = brute_force_min(average_objective(&objs), iv);
        let err = r.f_e_star.iter().map(|f| (f - f_star).abs()).fold(0.0, f64::max);
        report["oracle"] = json!({ "f_star": f_star, "x_star": x_star, "abs_error": err });
    }
    emit_json(a.output.as_deref(), &report)
}

fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let mut spec: ExperimentSpec =
        serde_json::from_str(&text).map_err(|e| cpca_core::Error::InvalidInput(format!("bad spec: {e}")))?;
    if let Some(s) = a.seed {
        spec.seeds = vec![s];
    }
    if let Some(e) = a.eps {
        spec.eps_list = vec![e];
    }
    if let Some(n) = a.agents {
        spec.n_agents = n;
    }
    if let Some(p) = a.edge_prob {
        spec.edge_prob = p;
    }
    if let Some(o) = a.objective {
        spec.family = o.into();
    }
    if let Some(b) = a.backend {
        spec.backend = b.into();
    }
    if let Some(u) = a.upper_bound_u {
        spec.u_policy = UPolicy::Fixed(u);
    }
    let records = run_sweep(&spec)?;
    let mut buf = Vec::new();
    write_metrics_csv(&records, &mut buf)?;
    emit(a.output.as_deref(), &buf)?;
    let failed = records.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", records.len());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<cpca_core::Error>() {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::OptimizePoly(a) => optimize_poly(a),
        Command::ConsensusDemo(a) => consensus_demo(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Core errors already carry their stage and cause in Display.
            match e.downcast_ref::<cpca_core::Error>() {
                Some(core) => eprintln!("error: {core}"),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
