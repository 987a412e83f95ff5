//! Command-line front end.
//!
//! Every command prints `key=value` lines on stdout. Exit codes: 2 for bad
//! input, 3 when a network cannot be generated, 4 when a solver fails and 5
//! when `verify-dc` finds a broken identity.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dcform::{build_dc_instance, verify};
use crate::dynamics::{assemble, hull_check, InfluenceAllocation, OpinionState};
use crate::error::Error;
use crate::game::{objective_j2, simplex_references};
use crate::harness::{
    ego_seed, load_scenario, opponent_allocations, run, summarize, write_outputs, OpponentPolicy,
    SolverKind,
};
use crate::netgen::{
    gen_archetype, gen_erdos_renyi, gen_sbm, gen_watts_strogatz, Archetype, SocialNetwork,
};
use crate::par::Execution;
use crate::solvers::{
    centrality_allocation, il_solve, pg_oracle, random_allocation, ILParams, OracleParams,
};

#[derive(Debug, Parser)]
#[command(name = "influence-game", version, about = "Budgeted influence on DeGroot networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample or build a network and write it as JSON.
    Generate(GenerateArgs),
    /// Optimize the last player's allocation against random opponents.
    Solve(SolveArgs),
    /// Run the dynamics for a number of steps from the origin.
    Simulate(SimulateArgs),
    /// Check the difference-of-convex identities on a random instance.
    VerifyDc(VerifyDcArgs),
    /// Run a scenario file and write CSV/JSONL results.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Er,
    Ws,
    Sbm,
    Star,
    TwoCliques,
    ThreeNode,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    /// Node count (star: hub plus leaves).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Edge probability (er).
    #[arg(long)]
    pub p: Option<f64>,
    /// Ring degree (ws).
    #[arg(long)]
    pub k: Option<usize>,
    /// Rewiring probability (ws).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Comma-separated block sizes (sbm).
    #[arg(long, value_delimiter = ',')]
    pub blocks: Option<Vec<usize>>,
    #[arg(long)]
    pub p_in: Option<f64>,
    #[arg(long)]
    pub p_out: Option<f64>,
    /// Required for random models.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub players: usize,
    #[arg(long)]
    pub budget: f64,
    #[arg(long, default_value = "il")]
    pub solver: String,
    #[arg(long)]
    pub seed: u64,
    /// Where to write the allocation JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub players: usize,
    #[arg(long)]
    pub budget: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Ego allocation written by `solve`; random when absent.
    #[arg(long)]
    pub allocation: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyDcArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub players: usize,
    #[arg(long, default_value_t = 1.0)]
    pub budget: f64,
    #[arg(long)]
    pub seed: u64,
    /// Shift every entry of `z` by this amount before checking.
    #[arg(long)]
    pub perturb: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write wall-clock times (outputs then differ between runs).
    #[arg(long)]
    pub timings: bool,
    /// Ignore the scenario's execution policy and run sequentially.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(Error),
    #[error("network generation failed: {0}")]
    Generation(Error),
    #[error("solver failed: {0}")]
    Solver(Error),
    #[error("difference-of-convex identities violated")]
    DcViolation,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Generation(_) => 3,
            CliError::Solver(_) => 4,
            CliError::DcViolation => 5,
        }
    }
}

type CliResult = std::result::Result<(), CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(Error::InvalidParameter(msg.into()))
}

fn io(e: std::io::Error) -> CliError {
    CliError::Invalid(e.into())
}

/// Allocation file written by `solve` and read by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationDocument {
    pub solver: SolverKind,
    pub players: usize,
    pub budget: f64,
    pub seed: u64,
    pub allocation: Vec<f64>,
    pub objective_j2: f64,
    pub objective_j2_mean: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Serialize)]
struct SimulationDocument {
    steps: usize,
    dim: usize,
    hull_ok: bool,
    final_state: Vec<f64>,
    asymptotic_state: Vec<f64>,
    distance_to_asymptote: f64,
}

fn read_network(path: &Path) -> Result<SocialNetwork, CliError> {
    let text = std::fs::read_to_string(path).map_err(io)?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(e.into()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.into()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn generate(args: &GenerateArgs, out: &mut dyn Write) -> CliResult {
    let given = [
        ("--p", args.p.is_some()),
        ("--k", args.k.is_some()),
        ("--beta", args.beta.is_some()),
        ("--blocks", args.blocks.is_some()),
        ("--p-in", args.p_in.is_some()),
        ("--p-out", args.p_out.is_some()),
        ("--seed", args.seed.is_some()),
    ];
    let allowed: &[&str] = match args.model {
        Model::Er => &["--p", "--seed"],
        Model::Ws => &["--k", "--beta", "--seed"],
        Model::Sbm => &["--blocks", "--p-in", "--p-out", "--seed"],
        Model::Star | Model::TwoCliques | Model::ThreeNode => &[],
    };
    if let Some((flag, _)) = given.iter().find(|(f, set)| *set && !allowed.contains(f)) {
        return Err(invalid(format!("{flag} does not apply to {:?}", args.model)));
    }
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| invalid(format!("{flag} is required")));
    let seed = || args.seed.ok_or_else(|| invalid("--seed is required for random models"));
    let nodes = || args.nodes.ok_or_else(|| invalid("--nodes is required"));
    let result = match args.model {
        Model::Er => gen_erdos_renyi(nodes()?, need(args.p, "--p")?, seed()?),
        Model::Ws => gen_watts_strogatz(
            nodes()?,
            args.k.ok_or_else(|| invalid("--k is required"))?,
            need(args.beta, "--beta")?,
            seed()?,
        ),
        Model::Sbm => {
            let blocks = args.blocks.clone().ok_or_else(|| invalid("--blocks is required"))?;
            if let Some(n) = args.nodes {
                if n != blocks.iter().sum::<usize>() {
                    return Err(invalid("--nodes differs from the sum of --blocks"));
                }
            }
            gen_sbm(&blocks, need(args.p_in, "--p-in")?, need(args.p_out, "--p-out")?, seed()?)
        }
        Model::Star => {
            let n = nodes()?;
            if n < 3 {
                return Err(invalid("a star needs at least 3 nodes"));
            }
            gen_archetype(Archetype::Star { leaves: n - 1 })
        }
        Model::TwoCliques | Model::ThreeNode => {
            let kind = if args.model == Model::TwoCliques {
                Archetype::TwoCliques
            } else {
                Archetype::ThreeNodeAsymmetric
            };
            let net = gen_archetype(kind);
            if let (Some(n), Ok(net)) = (args.nodes, &net) {
                if n != net.size() {
                    return Err(invalid(format!("{:?} has {} nodes", args.model, net.size())));
                }
            }
            net
        }
    };
    let net = result.map_err(|e| match e {
        Error::Disconnected { .. } | Error::NotConverged { .. } => CliError::Generation(e),
        other => CliError::Invalid(other),
    })?;
    write_json(&args.out, &net)?;
    writeln!(out, "nodes={}", net.size()).map_err(io)?;
    writeln!(out, "edges={}", net.undirected_edge_count()).map_err(io)?;
    writeln!(out, "connected={}", net.is_connected()).map_err(io)?;
    writeln!(out, "out={}", args.out.display()).map_err(io)?;
    Ok(())
}

fn check_game(players: usize, budget: f64) -> CliResult {
    simplex_references(players).map_err(CliError::Invalid)?;
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(invalid(format!("budget must be positive, got {budget}")));
    }
    Ok(())
}

fn solve(args: &SolveArgs, out: &mut dyn Write) -> CliResult {
    check_game(args.players, args.budget)?;
    let kind = SolverKind::parse(&args.solver).map_err(CliError::Invalid)?;
    let net = read_network(&args.network)?;
    let refs = simplex_references(args.players).map_err(CliError::Invalid)?;
    let m = net.size();
    let ego = args.players - 1;
    let opponents =
        opponent_allocations(OpponentPolicy::Random, m, args.players, args.budget, args.seed)
            .map_err(CliError::Invalid)?;
    let solved = || -> crate::error::Result<(InfluenceAllocation, usize, bool)> {
        Ok(match kind {
            SolverKind::Il => {
                let r = il_solve(&net, &refs, ego, &opponents, args.budget, &ILParams::default())?;
                (r.allocation, r.iterations, r.converged)
            }
            SolverKind::PgOracle => {
                let r = pg_oracle(
                    &net,
                    &refs,
                    ego,
                    &opponents,
                    args.budget,
                    &OracleParams::default(),
                    Execution::Parallel,
                )?;
                (r.allocation, r.iterations, r.converged)
            }
            SolverKind::Random => (random_allocation(m, args.budget, ego_seed(args.seed))?, 0, true),
            SolverKind::Centrality => (centrality_allocation(&net, args.budget)?, 0, true),
            SolverKind::Zero => (InfluenceAllocation::zeros(m, args.budget), 0, true),
        })
    };
    let (alloc, iterations, converged) = solved().map_err(CliError::Solver)?;
    let mut all = opponents;
    all.push(alloc.clone());
    let state = assemble(&net, all, &refs)
        .and_then(|sys| sys.long_run_state(&OpinionState::zeros(m, refs.dim())))
        .map_err(CliError::Solver)?;
    let j2 = objective_j2(&refs, ego, &state).map_err(CliError::Solver)?;
    let doc = AllocationDocument {
        solver: kind,
        players: args.players,
        budget: args.budget,
        seed: args.seed,
        allocation: alloc.weights().to_vec(),
        objective_j2: j2,
        objective_j2_mean: j2 / m as f64,
        iterations,
        converged,
    };
    if let Some(path) = &args.out {
        write_json(path, &doc)?;
    }
    writeln!(out, "solver={}", kind.name()).map_err(io)?;
    writeln!(out, "objective_j2={}", doc.objective_j2).map_err(io)?;
    writeln!(out, "objective_j2_mean={}", doc.objective_j2_mean).map_err(io)?;
    writeln!(out, "iterations={iterations}").map_err(io)?;
    writeln!(out, "converged={converged}").map_err(io)?;
    writeln!(out, "allocation={}", join(&doc.allocation)).map_err(io)?;
    Ok(())
}

fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult {
    check_game(args.players, args.budget)?;
    let net = read_network(&args.network)?;
    let refs = simplex_references(args.players).map_err(CliError::Invalid)?;
    let m = net.size();
    let ego = match &args.allocation {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io)?;
            let doc: AllocationDocument =
                serde_json::from_str(&text).map_err(|e| CliError::Invalid(e.into()))?;
            if doc.allocation.len() != m {
                return Err(invalid("allocation length differs from the network size"));
            }
            InfluenceAllocation::new(doc.allocation, args.budget).map_err(CliError::Invalid)?
        }
        None => random_allocation(m, args.budget, ego_seed(args.seed)).map_err(CliError::Invalid)?,
    };
    let mut all =
        opponent_allocations(OpponentPolicy::Random, m, args.players, args.budget, args.seed)
            .map_err(CliError::Invalid)?;
    all.push(ego);
    let sys = assemble(&net, all, &refs).map_err(CliError::Invalid)?;
    let x0 = OpinionState::zeros(m, refs.dim());
    let traj = sys.trajectory(&x0, args.steps).map_err(CliError::Solver)?;
    let hull_ok = hull_check(&refs, &traj);
    let last = traj.last().cloned().unwrap_or(x0);
    let limit = sys.asymptotic_state().map_err(CliError::Solver)?;
    let p = args.players - 1;
    let doc = SimulationDocument {
        steps: args.steps,
        dim: refs.dim(),
        hull_ok,
        distance_to_asymptote: last.max_abs_diff(&limit),
        final_state: last.values().to_vec(),
        asymptotic_state: limit.values().to_vec(),
    };
    if let Some(path) = &args.out {
        write_json(path, &doc)?;
    }
    let j2 = |x: &OpinionState| objective_j2(&refs, p, x).map_err(CliError::Solver);
    writeln!(out, "steps={}", args.steps).map_err(io)?;
    writeln!(out, "hull_ok={hull_ok}").map_err(io)?;
    writeln!(out, "objective_j2_final={}", j2(&last)?).map_err(io)?;
    writeln!(out, "objective_j2_asymptotic={}", j2(&limit)?).map_err(io)?;
    writeln!(out, "distance_to_asymptote={}", doc.distance_to_asymptote).map_err(io)?;
    Ok(())
}

fn verify_dc(args: &VerifyDcArgs, out: &mut dyn Write) -> CliResult {
    check_game(args.players, args.budget)?;
    let net = read_network(&args.network)?;
    let refs = simplex_references(args.players).map_err(CliError::Invalid)?;
    let m = net.size();
    let mut all =
        opponent_allocations(OpponentPolicy::Random, m, args.players, args.budget, args.seed)
            .map_err(CliError::Invalid)?;
    all.push(random_allocation(m, args.budget, ego_seed(args.seed)).map_err(CliError::Invalid)?);
    let p = args.players - 1;
    let mut inst = build_dc_instance(&net, &refs, p, &all).map_err(CliError::Solver)?;
    if let Some(eps) = args.perturb {
        if !eps.is_finite() {
            return Err(invalid("--perturb must be finite"));
        }
        inst.z.iter_mut().for_each(|z| *z += eps);
    }
    let report = verify(&inst, &net, &refs, &all).map_err(CliError::Solver)?;
    let ok = report.identities_hold();
    writeln!(out, "max_residual={}", report.max_residual).map_err(io)?;
    writeln!(out, "objective_error={}", report.objective_error).map_err(io)?;
    writeln!(out, "polarization_error={}", report.polarization_error).map_err(io)?;
    writeln!(out, "split_error={}", report.split_error).map_err(io)?;
    writeln!(out, "printed_max_abs={}", report.printed_max_abs).map_err(io)?;
    writeln!(out, "identities_hold={ok}").map_err(io)?;
    if ok {
        Ok(())
    } else {
        Err(CliError::DcViolation)
    }
}

fn bench(args: &BenchArgs, out: &mut dyn Write) -> CliResult {
    let mut cfg = load_scenario(&args.scenario).map_err(CliError::Invalid)?;
    if args.sequential {
        cfg.execution = Execution::Sequential;
    }
    let records = run(&cfg).map_err(CliError::Invalid)?;
    let written = write_outputs(&args.out_dir, &records, args.timings).map_err(CliError::Invalid)?;
    writeln!(out, "experiment={}", cfg.experiment.name()).map_err(io)?;
    writeln!(out, "records={}", records.len()).map_err(io)?;
    for row in summarize(&records) {
        writeln!(
            out,
            "solver={} nodes={} budget={} runs={} failed={} objective_mean={} objective_se={} improvement_mean={} improvement_se={}",
            row.solver.name(),
            row.nodes,
            row.budget,
            row.runs,
            row.failed,
            row.objective_mean,
            row.objective_se,
            row.improvement_mean,
            row.improvement_se
        )
        .map_err(io)?;
    }
    for path in written {
        writeln!(out, "wrote={}", path.display()).map_err(io)?;
    }
    Ok(())
}

/// Runs one parsed command, printing to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Generate(a) => generate(a, out),
        Command::Solve(a) => solve(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::VerifyDc(a) => verify_dc(a, out),
        Command::Bench(a) => bench(a, out),
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main_exit_code() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
