//! `hyperjsq`: command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 runtime limit.
//! Results go to standard output (or `--output`), diagnostics to standard
//! error. Any FILE argument may be `-` for standard input.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use hyperjsq::allocation::{
    critical_density, optimize_allocation, AllocationError, StaticAllocation,
};
use hyperjsq::hypergraph::{
    self, from_neighborhood_graph, gen_clique_with_leaves, gen_complete_d_hypergraph,
    gen_complete_graph, gen_cycle, GraphError, Hypergraph, VertexId,
};
use hyperjsq::lyapunov::{drift_report, DriftError, QueueState};
use hyperjsq::simulator::{
    classify_metrics, estimate_threshold, simulate, ClassifierRule, Policy, SimConfig, SimError,
    TieBreak,
};

#[derive(Parser)]
#[command(
    name = "hyperjsq",
    version,
    about = "Stability of join-the-shortest-queue routing on hypergraphs of queues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a hypergraph document; exits 0 iff it is valid.
    Validate { file: String },
    /// Generate a hypergraph document.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
        #[arg(short, long, default_value = "-", global = true)]
        output: String,
    },
    /// Optimal static allocation minimizing the largest vertex load.
    Optimize {
        file: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Also report the exhaustive densest-subset value (at most 20 edges).
        #[arg(long)]
        oracle: bool,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Lyapunov drift of a state under a static allocation.
    Drift {
        file: String,
        #[arg(long)]
        alloc: String,
        /// Queue lengths, e.g. `2,5,0`.
        #[arg(long)]
        state: String,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Run one simulation.
    Simulate {
        file: String,
        #[command(flatten)]
        sim: SimArgs,
        /// Starting queue lengths, e.g. `2,5,0`; empty by default.
        #[arg(long)]
        initial: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Bisection estimate of the critical per-edge arrival rate.
    Threshold {
        file: String,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long, default_value_t = 6)]
        iters: usize,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Classify stability over a list of per-edge arrival rates.
    Sweep {
        file: String,
        /// Comma-separated per-edge arrival rates.
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// Cycle on n vertices.
    Cycle {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        rates: Rates,
    },
    /// Complete graph on n vertices.
    Complete {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        rates: Rates,
    },
    /// All d-subsets of n vertices.
    CompleteD {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[command(flatten)]
        rates: Rates,
    },
    /// k-clique with one leaf attached to every clique vertex.
    CliqueLeaves {
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        rates: Rates,
    },
    /// Neighborhood hypergraph of an undirected graph given as a JSON
    /// adjacency list, e.g. `[[1],[0,2],[1]]`.
    Neighborhood {
        #[arg(long)]
        adjacency: String,
        #[command(flatten)]
        rates: Rates,
    },
}

#[derive(Args)]
struct Rates {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, value_enum, default_value_t = PolicyKind::Jsq)]
    policy: PolicyKind,
    /// Allocation document for the static policy; the optimal allocation is
    /// used when omitted.
    #[arg(long)]
    alloc: Option<String>,
    #[arg(long, value_enum, default_value_t = TieBreakArg::Uniform)]
    tiebreak: TieBreakArg,
    #[arg(long, default_value_t = 1e5)]
    horizon: f64,
    /// Defaults to 10% of the horizon.
    #[arg(long)]
    warmup: Option<f64>,
    /// Chosen at random and reported on standard error when omitted.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, default_value_t = 1.0)]
    sample_interval: f64,
    #[arg(long, default_value_t = 32)]
    batches: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Jsq,
    Static,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieBreakArg {
    Uniform,
    Lowest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    SummaryCsv,
    SeriesCsv,
}

enum CliError {
    Usage(String),
    Input(String),
    Limit(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Limit(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Limit(m) => f.write_str(m),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<AllocationError> for CliError {
    fn from(e: AllocationError) -> Self {
        match e {
            AllocationError::OracleLimit { .. } => CliError::Limit(e.to_string()),
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<DriftError> for CliError {
    fn from(e: DriftError) -> Self {
        match e {
            DriftError::Allocation(a) => a.into(),
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::BracketInvalid(_) | SimError::TooManySamples { .. } => {
                CliError::Limit(e.to_string())
            }
            SimError::Allocation(a) => a.into(),
            e => CliError::Input(e.to_string()),
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

fn read_input(path: &str) -> Result<String> {
    let mut text = String::new();
    let res = if path == "-" {
        io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        fs::read_to_string(path).map(|t| text = t)
    };
    res.map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
    Ok(text)
}

fn write_output(path: &str, text: &str) -> Result<()> {
    let mut text = text.to_owned();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    let res = if path == "-" {
        io::stdout().lock().write_all(text.as_bytes())
    } else {
        fs::write(path, text)
    };
    res.map_err(|e| CliError::Input(format!("cannot write {path}: {e}")))
}

fn load_graph(path: &str) -> Result<Hypergraph> {
    Ok(hypergraph::parse(&read_input(path)?)?)
}

fn check_single_stdin(paths: &[&str]) -> Result<()> {
    if paths.iter().filter(|p| **p == "-").count() > 1 {
        return Err(CliError::Usage(
            "standard input can be used for at most one file argument".into(),
        ));
    }
    Ok(())
}

fn parse_state(text: &str) -> Result<QueueState> {
    text.parse()
        .map_err(|e: hyperjsq::lyapunov::ParseStateError| CliError::Input(e.to_string()))
}

impl SimArgs {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or_else(|| {
            let seed = rand::random();
            eprintln!("seed: {seed}");
            seed
        })
    }

    fn policy(&self, h: &Hypergraph, file: &str) -> Result<Policy> {
        if self.alloc.is_some() && matches!(self.policy, PolicyKind::Jsq) {
            return Err(CliError::Usage(
                "--alloc only applies to --policy static".into(),
            ));
        }
        Ok(match self.policy {
            PolicyKind::Jsq => Policy::Jsq(match self.tiebreak {
                TieBreakArg::Uniform => TieBreak::UniformRandom,
                TieBreakArg::Lowest => TieBreak::LowestIndex,
            }),
            PolicyKind::Static => {
                let p = match &self.alloc {
                    Some(path) => {
                        check_single_stdin(&[file, path])?;
                        StaticAllocation::parse(h, &read_input(path)?)?
                    }
                    None => optimize_allocation(h, 1e-9)?.allocation,
                };
                Policy::Static(p)
            }
        })
    }

    fn config(&self, h: &Hypergraph, file: &str) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(self.policy(h, file)?, self.seed()).with_horizon(self.horizon);
        if let Some(w) = self.warmup {
            cfg.warmup = w;
        }
        cfg.stream = self.stream;
        cfg.sample_interval = self.sample_interval;
        cfg.batches = self.batches;
        cfg.validate(h)?;
        Ok(cfg)
    }
}

fn gen(kind: &GenKind) -> Result<Hypergraph> {
    Ok(match kind {
        GenKind::Cycle { n, rates } => gen_cycle(*n, rates.lambda, rates.mu)?,
        GenKind::Complete { n, rates } => gen_complete_graph(*n, rates.lambda, rates.mu)?,
        GenKind::CompleteD { n, d, rates } => {
            gen_complete_d_hypergraph(*n, *d, rates.lambda, rates.mu)?
        }
        GenKind::CliqueLeaves { k, rates } => gen_clique_with_leaves(*k, rates.lambda, rates.mu)?,
        GenKind::Neighborhood { adjacency, rates } => {
            let adj: Vec<Vec<VertexId>> = serde_json::from_str(&read_input(adjacency)?)
                .map_err(|e| CliError::Input(format!("malformed adjacency list: {e}")))?;
            let n = adj.len();
            from_neighborhood_graph(&adj, &vec![rates.lambda; n], &vec![rates.mu; n])?
        }
    })
}

fn optimize(file: &str, tol: f64, oracle: bool) -> Result<String> {
    let h = load_graph(file)?;
    let result = optimize_allocation(&h, tol)?;
    if !oracle {
        return Ok(result.to_json());
    }
    let density = critical_density(&h)?;
    let mut doc: serde_json::Value =
        serde_json::from_str(&result.to_json()).expect("result documents are valid JSON");
    doc["critical_density"] = serde_json::to_value(&density).expect("certificates serialize");
    Ok(doc.to_string())
}

fn drift(file: &str, alloc: &str, state: &str, delta: f64) -> Result<String> {
    check_single_stdin(&[file, alloc])?;
    let h = load_graph(file)?;
    let p = StaticAllocation::parse(&h, &read_input(alloc)?)?;
    let x = parse_state(state)?;
    let report = drift_report(&h, &p, &x, delta)?;
    Ok(serde_json::to_string(&report).expect("drift reports serialize"))
}

fn run_simulation(
    file: &str,
    sim: &SimArgs,
    initial: Option<&str>,
    format: Format,
) -> Result<String> {
    let h = load_graph(file)?;
    let mut cfg = sim.config(&h, file)?;
    if let Some(x) = initial {
        cfg.initial_state = Some(parse_state(x)?);
        cfg.validate(&h)?;
    }
    let m = simulate(&h, &cfg)?;
    Ok(match format {
        Format::Json => m.to_json(),
        Format::SummaryCsv => m.summary_csv(),
        Format::SeriesCsv => m.series_csv(),
    })
}

fn threshold(file: &str, lo: f64, hi: f64, iters: usize, sim: &SimArgs) -> Result<String> {
    let h = load_graph(file)?;
    let cfg = sim.config(&h, file)?;
    let est = estimate_threshold(&h, &cfg, &ClassifierRule::default(), lo, hi, iters)?;
    eprintln!(
        "threshold estimate {:.4} from {} probes, final bracket [{:.4}, {:.4}]",
        est.estimate,
        est.probes.len(),
        est.lo,
        est.hi
    );
    Ok(serde_json::to_string(&est).expect("estimates serialize"))
}

/// One CSV row per rate, in ascending order; point `i` of the sorted list runs
/// on stream `stream + i`.
fn sweep(file: &str, lambdas: &[f64], sim: &SimArgs) -> Result<String> {
    let h = load_graph(file)?;
    let base = sim.config(&h, file)?;
    let mut lambdas = lambdas.to_vec();
    if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(CliError::Input(format!(
            "arrival rates must be finite and nonnegative, got {bad}"
        )));
    }
    lambdas.sort_by(f64::total_cmp);
    let rule = ClassifierRule::default();
    let rows = lambdas
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let hl = h.with_uniform_lambda(lambda)?;
            let cfg = base.clone().with_stream(base.stream + i as u64);
            let m = simulate(&hl, &cfg)?;
            let v = classify_metrics(&m, &rule);
            let label = serde_json::to_value(v.label).expect("labels serialize");
            Ok(format!(
                "{lambda},{},{},{},{},{}",
                label.as_str().unwrap_or_default(),
                v.mean_total_queue,
                v.growth_slope,
                v.growth_slope_se,
                v.min_idle_returns
            ))
        })
        .collect::<Result<Vec<String>, SimError>>()?;
    let mut out = String::from(
        "lambda,verdict,mean_total_queue,growth_slope,growth_slope_se,min_idle_returns\n",
    );
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    Ok(out)
}

fn validate(file: &str) -> Result<()> {
    let text = read_input(file)?;
    let doc: hypergraph::HypergraphDocument = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(GraphError::Syntax(e).to_string()))?;
    let violations = hypergraph::validate(&doc);
    if violations.is_empty() {
        eprintln!(
            "valid: {} vertices, {} edges",
            doc.vertices.len(),
            doc.edges.len()
        );
        return Ok(());
    }
    for v in &violations {
        eprintln!("{v}");
    }
    Err(CliError::Input(format!(
        "{} violation(s) found",
        violations.len()
    )))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Gen { kind, output } => {
            write_output(&output, &hypergraph::serialize(&gen(&kind)?))
        }
        Command::Optimize {
            file,
            tol,
            oracle,
            output,
        } => write_output(&output, &optimize(&file, tol, oracle)?),
        Command::Drift {
            file,
            alloc,
            state,
            delta,
            output,
        } => write_output(&output, &drift(&file, &alloc, &state, delta)?),
        Command::Simulate {
            file,
            sim,
            initial,
            format,
            output,
        } => write_output(
            &output,
            &run_simulation(&file, &sim, initial.as_deref(), format)?,
        ),
        Command::Threshold {
            file,
            lo,
            hi,
            iters,
            sim,
            output,
        } => write_output(&output, &threshold(&file, lo, hi, iters, &sim)?),
        Command::Sweep {
            file,
            lambdas,
            sim,
            output,
        } => write_output(&output, &sweep(&file, &lambdas, &sim)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
