//! Seeded experiment batches.
//!
//! A [`ScenarioConfig`] names an experiment, a network generator and the game
//! settings; [`run`] turns it into [`RunRecord`]s, one per (seed, solver) and
//! per size or budget where the experiment sweeps one. Everything random is
//! derived from the record's seed: the network uses the seed itself, the
//! opponents and the random ego allocation use fixed sub-streams of it, so a
//! record can be regenerated on its own with [`reevaluate`].
//!
//! Seeds run in parallel under [`Execution::Parallel`]; records are sorted by
//! seed afterwards, so output does not depend on scheduling.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dynamics::{assemble, InfluenceAllocation, OpinionState};
use crate::error::{Error, Result};
use crate::game::{improvement, objective_j2, simplex_references, ReferenceSet, MAX_PLAYERS};
use crate::netgen::{
    eigenvector_centrality, gen_archetype, gen_erdos_renyi, gen_sbm, gen_watts_strogatz,
    Archetype, SocialNetwork,
};
use crate::par::{self, Execution};
use crate::solvers::{
    centrality_allocation, il_solve_within, pg_oracle_within, random_allocation, EgoProblem,
    ILParams, OracleParams, ORACLE_MAX_NODES,
};

/// Default per-run wall-clock limit.
pub const DEFAULT_TIMEOUT_SECS: f64 = 300.0;
/// Sizes used by the scaling experiment when none are configured.
pub const DEFAULT_SIZES: [usize; 6] = [10, 50, 100, 200, 500, 1000];
/// Budgets used by the budget sweep when none are configured.
pub const DEFAULT_BUDGETS: [f64; 4] = [0.1, 0.5, 1.0, 1.5];
/// Seed used by the archetype study when the config does not give one.
pub const ARCHETYPE_SEED: u64 = 0;
/// Budget of every player in the archetype study.
pub const ARCHETYPE_BUDGET: f64 = 1.0;
/// Player count in the archetype study.
pub const ARCHETYPE_PLAYERS: usize = 3;

// Sub-stream tags for seed derivation.
const EGO_STREAM: u64 = 0x45_47_4f;
const OPPONENT_STREAM: u64 = 0x4f_50_50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Compare,
    Scaling,
    BudgetSweep,
    CentralityStudy,
    Archetype,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Compare => "compare",
            Experiment::Scaling => "scaling",
            Experiment::BudgetSweep => "budget_sweep",
            Experiment::CentralityStudy => "centrality_study",
            Experiment::Archetype => "archetype",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Il,
    PgOracle,
    Random,
    Centrality,
    Zero,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Il => "il",
            SolverKind::PgOracle => "pg_oracle",
            SolverKind::Random => "random",
            SolverKind::Centrality => "centrality",
            SolverKind::Zero => "zero",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.replace('-', "_").as_str() {
            "il" => Ok(SolverKind::Il),
            "pg_oracle" | "oracle" => Ok(SolverKind::PgOracle),
            "random" => Ok(SolverKind::Random),
            "centrality" => Ok(SolverKind::Centrality),
            "zero" => Ok(SolverKind::Zero),
            other => Err(Error::InvalidParameter(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpponentPolicy {
    Random,
    Zero,
}

/// What a record's improvement is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// The ego player spends its budget at random on the same network and
    /// against the same opponents.
    Random,
    /// Nobody spends anything and opinions start at the origin.
    ZeroInfluence,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Random => "random",
            Baseline::ZeroInfluence => "zero_influence",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Timeout,
    Failed,
    /// Not attempted, e.g. the oracle above its size limit.
    Skipped,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Timeout => "timeout",
            RunStatus::Failed => "failed",
            RunStatus::Skipped => "skipped",
        }
    }
}

/// Network model. Random models take their size from the scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    #[serde(alias = "er")]
    ErdosRenyi { p: f64 },
    #[serde(alias = "ws")]
    WattsStrogatz { k: usize, beta: f64 },
    Sbm {
        blocks: Vec<usize>,
        p_in: f64,
        p_out: f64,
    },
    Archetype(Archetype),
}

impl GeneratorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::ErdosRenyi { .. } => "erdos_renyi",
            GeneratorSpec::WattsStrogatz { .. } => "watts_strogatz",
            GeneratorSpec::Sbm { .. } => "sbm",
            GeneratorSpec::Archetype(a) => a.name(),
        }
    }

    /// Builds the network for `seed`. `nodes` is ignored by fixtures and
    /// must match the block sizes for the block model.
    pub fn generate(&self, nodes: usize, seed: u64) -> Result<SocialNetwork> {
        match self {
            GeneratorSpec::ErdosRenyi { p } => gen_erdos_renyi(nodes, *p, seed),
            GeneratorSpec::WattsStrogatz { k, beta } => gen_watts_strogatz(nodes, *k, *beta, seed),
            GeneratorSpec::Sbm { blocks, p_in, p_out } => {
                let total: usize = blocks.iter().sum();
                if total != nodes {
                    return Err(Error::InvalidParameter(format!(
                        "block sizes sum to {total}, scenario has {nodes} nodes"
                    )));
                }
                gen_sbm(blocks, *p_in, *p_out, seed)
            }
            GeneratorSpec::Archetype(a) => gen_archetype(*a),
        }
    }

    /// Same model with a different node count; block sizes are scaled
    /// proportionally (the last block absorbs rounding).
    fn resized(&self, nodes: usize) -> GeneratorSpec {
        match self {
            GeneratorSpec::Sbm { blocks, p_in, p_out } => {
                let total: usize = blocks.iter().sum();
                let mut scaled: Vec<usize> =
                    blocks.iter().map(|b| b * nodes / total.max(1)).collect();
                let used: usize = scaled.iter().sum();
                if let Some(last) = scaled.last_mut() {
                    *last += nodes - used;
                }
                GeneratorSpec::Sbm {
                    blocks: scaled,
                    p_in: *p_in,
                    p_out: *p_out,
                }
            }
            other => other.clone(),
        }
    }
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}

/// A scenario file. Unknown fields are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub experiment: Experiment,
    pub generator: GeneratorSpec,
    pub nodes: usize,
    pub players: usize,
    pub budget: f64,
    pub ego_solver: SolverKind,
    /// Solvers to run for the ego player; defaults to `[ego_solver]`.
    #[serde(default)]
    pub solvers: Vec<SolverKind>,
    pub opponent_policy: OpponentPolicy,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub il_params: ILParams,
    #[serde(default)]
    pub oracle_params: OracleParams,
    /// Node counts for `scaling` (default [`DEFAULT_SIZES`]) and
    /// `budget_sweep` (default `[nodes]`).
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Budgets for `budget_sweep`; default [`DEFAULT_BUDGETS`].
    #[serde(default)]
    pub budgets: Vec<f64>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(2..=MAX_PLAYERS).contains(&self.players) {
            return bad(format!("players must be in 2..={MAX_PLAYERS}, got {}", self.players));
        }
        if !(self.budget > 0.0) || !self.budget.is_finite() {
            return bad(format!("budget must be positive, got {}", self.budget));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("seeds must be distinct".into());
        }
        if self.nodes == 0 {
            return bad("nodes must be positive".into());
        }
        if self.sizes.contains(&0) {
            return bad("sizes must be positive".into());
        }
        if self.experiment == Experiment::Scaling && self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("scaling sizes must be strictly ascending".into());
        }
        if self.budgets.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
            return bad("sweep budgets must be finite and nonnegative".into());
        }
        if !(self.timeout_secs > 0.0) {
            return bad(format!("timeout must be positive, got {}", self.timeout_secs));
        }
        self.il_params.validate()?;
        let needs = match self.experiment {
            Experiment::BudgetSweep => Some("watts_strogatz"),
            Experiment::CentralityStudy => Some("sbm"),
            _ => None,
        };
        if let Some(model) = needs {
            if self.generator.name() != model {
                return bad(format!(
                    "{} needs the {model} generator, got {}",
                    self.experiment.name(),
                    self.generator.name()
                ));
            }
        }
        Ok(())
    }

    fn solver_list(&self) -> Vec<SolverKind> {
        if self.solvers.is_empty() {
            vec![self.ego_solver]
        } else {
            self.solvers.clone()
        }
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

/// One solver's result on one seeded instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: Experiment,
    pub generator: GeneratorSpec,
    pub nodes: usize,
    pub players: usize,
    pub budget: f64,
    pub opponent_policy: OpponentPolicy,
    pub seed: u64,
    pub solver: SolverKind,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// `J2 / M` at the long-run state.
    pub objective_j2_mean: Option<f64>,
    pub baseline: Baseline,
    pub baseline_j2_mean: Option<f64>,
    /// `objective_j2_mean - baseline_j2_mean`.
    pub improvement: Option<f64>,
    /// Mean distance of individual opinions from the baseline state.
    pub drift: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Only written when timings are requested; varies between runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
    pub allocation: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percentiles: Option<Vec<f64>>,
    /// Stacked long-run opinions, `dim` values per individual.
    pub final_opinions: Vec<f64>,
    pub baseline_opinions: Vec<f64>,
    pub dim: usize,
}

impl RunRecord {
    fn skeleton(ctx: &Instance, solver: SolverKind, baseline: Baseline) -> Self {
        RunRecord {
            experiment: ctx.experiment,
            generator: ctx.generator.clone(),
            nodes: ctx.nodes,
            players: ctx.players,
            budget: ctx.budget,
            opponent_policy: ctx.policy,
            seed: ctx.seed,
            solver,
            status: RunStatus::Ok,
            error: None,
            objective_j2_mean: None,
            baseline,
            baseline_j2_mean: None,
            improvement: None,
            drift: None,
            iterations: 0,
            converged: false,
            wall_time_secs: None,
            allocation: Vec::new(),
            percentiles: None,
            final_opinions: Vec::new(),
            baseline_opinions: Vec::new(),
            dim: ctx.players - 1,
        }
    }

    fn fail(mut self, err: &Error) -> Self {
        self.status = match err {
            Error::Timeout { .. } => RunStatus::Timeout,
            _ => RunStatus::Failed,
        };
        self.error = Some(err.to_string());
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

/// Everything that identifies one seeded game instance.
#[derive(Clone, Debug)]
struct Instance {
    experiment: Experiment,
    generator: GeneratorSpec,
    nodes: usize,
    players: usize,
    budget: f64,
    policy: OpponentPolicy,
    seed: u64,
}

/// A generated game: network, references and the fixed opponents.
struct Game {
    net: SocialNetwork,
    refs: ReferenceSet,
    opponents: Vec<InfluenceAllocation>,
}

impl Game {
    fn ego(&self) -> usize {
        self.refs.count() - 1
    }

    fn problem(&self, budget: f64) -> Result<EgoProblem<'_>> {
        EgoProblem::new(&self.net, &self.refs, self.ego(), &self.opponents, budget)
    }

    /// Long-run opinions with `ego` added to the opponents. Without any
    /// influence this is the consensus from the origin.
    fn state(&self, ego: &InfluenceAllocation) -> Result<OpinionState> {
        let mut all = self.opponents.clone();
        all.push(ego.clone());
        let sys = assemble(&self.net, all, &self.refs)?;
        sys.long_run_state(&OpinionState::zeros(self.net.size(), self.refs.dim()))
    }
}

/// splitmix64 of `seed` mixed with a stream tag.
fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the ego player's random allocation for instance `seed`.
pub fn ego_seed(seed: u64) -> u64 {
    sub_seed(seed, EGO_STREAM)
}

/// Seed of opponent `j`'s random allocation for instance `seed`.
pub fn opponent_seed(seed: u64, j: usize) -> u64 {
    sub_seed(seed, OPPONENT_STREAM + j as u64)
}

/// The `players - 1` opponent allocations of instance `seed`.
pub fn opponent_allocations(
    policy: OpponentPolicy,
    nodes: usize,
    players: usize,
    budget: f64,
    seed: u64,
) -> Result<Vec<InfluenceAllocation>> {
    (0..players - 1)
        .map(|j| match policy {
            OpponentPolicy::Random if budget > 0.0 => {
                random_allocation(nodes, budget, opponent_seed(seed, j))
            }
            _ => Ok(InfluenceAllocation::zeros(nodes, budget)),
        })
        .collect()
}

fn build_game(inst: &Instance) -> Result<Game> {
    let net = inst.generator.generate(inst.nodes, inst.seed)?;
    let refs = simplex_references(inst.players)?;
    let opponents =
        opponent_allocations(inst.policy, net.size(), inst.players, inst.budget, inst.seed)?;
    Ok(Game {
        net,
        refs,
        opponents,
    })
}

struct EgoOutcome {
    allocation: InfluenceAllocation,
    iterations: usize,
    converged: bool,
    wall_time: Duration,
}

fn solve_ego(
    kind: SolverKind,
    game: &Game,
    inst: &Instance,
    il: &ILParams,
    oracle: &OracleParams,
    exec: Execution,
    limit: Duration,
) -> Result<EgoOutcome> {
    let start = Instant::now();
    let budget = inst.budget;
    let m = game.net.size();
    let simple = |allocation: InfluenceAllocation| EgoOutcome {
        allocation,
        iterations: 0,
        converged: true,
        wall_time: start.elapsed(),
    };
    Ok(match kind {
        SolverKind::Il => {
            let r = il_solve_within(&game.problem(budget)?, il, Some(limit))?;
            EgoOutcome {
                allocation: r.allocation,
                iterations: r.iterations,
                converged: r.converged,
                wall_time: r.wall_time,
            }
        }
        SolverKind::PgOracle => {
            let r = pg_oracle_within(&game.problem(budget)?, oracle, exec, Some(limit))?;
            EgoOutcome {
                allocation: r.allocation,
                iterations: r.iterations,
                converged: r.converged,
                wall_time: r.wall_time,
            }
        }
        SolverKind::Random => simple(random_allocation(m, budget, ego_seed(inst.seed))?),
        SolverKind::Centrality => simple(centrality_allocation(&game.net, budget)?),
        SolverKind::Zero => simple(InfluenceAllocation::zeros(m, budget)),
    })
}

fn mean_distance(a: &OpinionState, b: &OpinionState) -> f64 {
    let m = a.individuals();
    a.blocks()
        .zip(b.blocks())
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / m as f64
}

/// Computes the baseline state of an instance.
fn baseline_state(game: &Game, inst: &Instance, baseline: Baseline) -> Result<OpinionState> {
    match baseline {
        Baseline::Random => {
            let w = random_allocation(game.net.size(), inst.budget, ego_seed(inst.seed))?;
            game.state(&w)
        }
        Baseline::ZeroInfluence => Ok(OpinionState::zeros(game.net.size(), game.refs.dim())),
    }
}

struct SolveSettings<'a> {
    il: &'a ILParams,
    oracle: &'a OracleParams,
    exec: Execution,
    limit: Duration,
}

fn record_for(
    kind: SolverKind,
    game: &Game,
    inst: &Instance,
    base: &OpinionState,
    baseline: Baseline,
    settings: &SolveSettings,
) -> RunRecord {
    let rec = RunRecord::skeleton(inst, kind, baseline);
    if kind == SolverKind::PgOracle && game.net.size() > ORACLE_MAX_NODES {
        return RunRecord {
            status: RunStatus::Skipped,
            error: Some(format!("oracle limited to {ORACLE_MAX_NODES} nodes")),
            ..rec
        };
    }
    let outcome = match solve_ego(
        kind,
        game,
        inst,
        settings.il,
        settings.oracle,
        settings.exec,
        settings.limit,
    ) {
        Ok(o) => o,
        Err(e) => return rec.fail(&e),
    };
    let finish = || -> Result<RunRecord> {
        let x = game.state(&outcome.allocation)?;
        let ego = game.ego();
        let m = game.net.size() as f64;
        let objective = objective_j2(&game.refs, ego, &x)? / m;
        let base_objective = objective_j2(&game.refs, ego, base)? / m;
        Ok(RunRecord {
            objective_j2_mean: Some(objective),
            baseline_j2_mean: Some(base_objective),
            improvement: Some(improvement(&game.refs, ego, &x, base)?),
            drift: Some(mean_distance(&x, base)),
            iterations: outcome.iterations,
            converged: outcome.converged,
            wall_time_secs: Some(outcome.wall_time.as_secs_f64()),
            allocation: outcome.allocation.weights().to_vec(),
            final_opinions: x.into_values(),
            baseline_opinions: base.values().to_vec(),
            ..rec.clone()
        })
    };
    finish().unwrap_or_else(|e| rec.clone().fail(&e))
}

/// Runs `solvers` on one instance, turning generation failures into failed
/// records so the batch continues.
fn run_instance(
    inst: &Instance,
    solvers: &[SolverKind],
    baseline: Baseline,
    settings: &SolveSettings,
) -> Vec<RunRecord> {
    let prepared = build_game(inst).and_then(|g| {
        let base = baseline_state(&g, inst, baseline)?;
        Ok((g, base))
    });
    match prepared {
        Ok((game, base)) => solvers
            .iter()
            .map(|&k| record_for(k, &game, inst, &base, baseline, settings))
            .collect(),
        Err(e) => solvers
            .iter()
            .map(|&k| RunRecord::skeleton(inst, k, baseline).fail(&e))
            .collect(),
    }
}

fn settings(cfg: &ScenarioConfig) -> SolveSettings<'_> {
    SolveSettings {
        il: &cfg.il_params,
        oracle: &cfg.oracle_params,
        exec: cfg.execution,
        limit: cfg.timeout(),
    }
}

fn instance(cfg: &ScenarioConfig, generator: GeneratorSpec, nodes: usize, budget: f64, seed: u64) -> Instance {
    Instance {
        experiment: cfg.experiment,
        generator,
        nodes,
        players: cfg.players,
        budget,
        policy: cfg.opponent_policy,
        seed,
    }
}

/// Runs `jobs` (already in the wanted within-seed order) over the execution
/// policy, then stably sorts the records by seed.
fn run_jobs(
    cfg: &ScenarioConfig,
    jobs: Vec<Instance>,
    solvers: &[SolverKind],
    baseline: Baseline,
) -> Vec<RunRecord> {
    let s = settings(cfg);
    let mut records: Vec<RunRecord> = par::map(cfg.execution, &jobs, |inst| {
        run_instance(inst, solvers, baseline, &s)
    })
    .into_iter()
    .flatten()
    .collect();
    records.sort_by_key(|r| r.seed);
    records
}

/// Each solver against the random-allocation baseline, one network per seed.
pub fn run_compare(cfg: &ScenarioConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let jobs = cfg
        .seeds
        .iter()
        .map(|&seed| instance(cfg, cfg.generator.clone(), cfg.nodes, cfg.budget, seed))
        .collect();
    Ok(run_jobs(cfg, jobs, &cfg.solver_list(), Baseline::Random))
}

/// The configured solvers across growing network sizes. The oracle is
/// skipped above [`ORACLE_MAX_NODES`]; slow runs are marked as timed out.
pub fn run_scaling(cfg: &ScenarioConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let sizes = if cfg.sizes.is_empty() {
        DEFAULT_SIZES.to_vec()
    } else {
        cfg.sizes.clone()
    };
    let mut jobs = Vec::new();
    for &seed in &cfg.seeds {
        for &m in &sizes {
            jobs.push(instance(cfg, cfg.generator.resized(m), m, cfg.budget, seed));
        }
    }
    Ok(run_jobs(cfg, jobs, &cfg.solver_list(), Baseline::Random))
}

/// The ego solver at each budget (and size) against the zero-influence
/// state. Opponents spend the same budget as the ego player.
pub fn run_budget_sweep(cfg: &ScenarioConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let budgets = if cfg.budgets.is_empty() {
        DEFAULT_BUDGETS.to_vec()
    } else {
        cfg.budgets.clone()
    };
    let sizes = if cfg.sizes.is_empty() {
        vec![cfg.nodes]
    } else {
        cfg.sizes.clone()
    };
    let mut jobs = Vec::new();
    for &seed in &cfg.seeds {
        for &m in &sizes {
            for &b in &budgets {
                jobs.push(instance(cfg, cfg.generator.resized(m), m, b, seed));
            }
        }
    }
    let s = settings(cfg);
    let solvers = [cfg.ego_solver];
    let mut records: Vec<RunRecord> = par::map(cfg.execution, &jobs, |inst| {
        if inst.budget == 0.0 {
            zero_budget_record(inst, cfg.ego_solver)
        } else {
            run_instance(inst, &solvers, Baseline::ZeroInfluence, &s)
        }
    })
    .into_iter()
    .flatten()
    .collect();
    records.sort_by_key(|r| r.seed);
    Ok(records)
}

/// With no budget anywhere nothing moves: the long-run state is the
/// baseline itself.
fn zero_budget_record(inst: &Instance, solver: SolverKind) -> Vec<RunRecord> {
    let rec = RunRecord::skeleton(inst, solver, Baseline::ZeroInfluence);
    let res = build_game(inst).and_then(|g| {
        let w = InfluenceAllocation::zeros(g.net.size(), 0.0);
        let x = g.state(&w)?;
        let base = baseline_state(&g, inst, Baseline::ZeroInfluence)?;
        let m = g.net.size() as f64;
        Ok(RunRecord {
            objective_j2_mean: Some(objective_j2(&g.refs, g.ego(), &x)? / m),
            baseline_j2_mean: Some(objective_j2(&g.refs, g.ego(), &base)? / m),
            improvement: Some(improvement(&g.refs, g.ego(), &x, &base)?),
            drift: Some(mean_distance(&x, &base)),
            converged: true,
            wall_time_secs: Some(0.0),
            allocation: w.weights().to_vec(),
            final_opinions: x.into_values(),
            baseline_opinions: base.into_values(),
            ..rec.clone()
        })
    });
    vec![res.unwrap_or_else(|e| rec.fail(&e))]
}

/// IL and centrality-proportional allocations on block-model networks, with
/// each node's centrality percentile attached.
pub fn run_centrality_study(cfg: &ScenarioConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let jobs: Vec<Instance> = cfg
        .seeds
        .iter()
        .map(|&seed| instance(cfg, cfg.generator.clone(), cfg.nodes, cfg.budget, seed))
        .collect();
    let mut records = run_jobs(
        cfg,
        jobs,
        &[SolverKind::Il, SolverKind::Centrality],
        Baseline::Random,
    );
    // Percentiles depend only on the network; recomputed per seed.
    let pct: Vec<Option<Vec<f64>>> = par::map(cfg.execution, &records, |r| {
        if !r.is_ok() {
            return None;
        }
        let net = r.generator.generate(r.nodes, r.seed).ok()?;
        eigenvector_centrality(&net).ok().map(|c| c.percentiles)
    });
    for (r, p) in records.iter_mut().zip(pct) {
        r.percentiles = p;
    }
    Ok(records)
}

/// The three fixture networks with `P = 3` and `λ = 1`, against random
/// opponents. Uses the first configured seed.
pub fn run_archetypes_with(il_params: &ILParams, seed: u64) -> Result<Vec<RunRecord>> {
    let fixtures = [
        Archetype::Star { leaves: 4 },
        Archetype::TwoCliques,
        Archetype::ThreeNodeAsymmetric,
    ];
    let cfg = ScenarioConfig {
        experiment: Experiment::Archetype,
        generator: GeneratorSpec::Archetype(fixtures[0]),
        nodes: 1,
        players: ARCHETYPE_PLAYERS,
        budget: ARCHETYPE_BUDGET,
        ego_solver: SolverKind::Il,
        solvers: vec![SolverKind::Il],
        opponent_policy: OpponentPolicy::Random,
        seeds: vec![seed],
        il_params: *il_params,
        oracle_params: OracleParams::default(),
        sizes: Vec::new(),
        budgets: Vec::new(),
        timeout_secs: DEFAULT_TIMEOUT_SECS,
        execution: Execution::Sequential,
    };
    cfg.validate()?;
    let jobs = fixtures
        .iter()
        .map(|&a| {
            let g = GeneratorSpec::Archetype(a);
            let nodes = gen_archetype(a)?.size();
            Ok(instance(&cfg, g, nodes, ARCHETYPE_BUDGET, seed))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(run_jobs(&cfg, jobs, &[SolverKind::Il], Baseline::Random))
}

/// [`run_archetypes_with`] at the default IL settings and seed.
pub fn run_archetypes() -> Result<Vec<RunRecord>> {
    run_archetypes_with(&ILParams::default(), ARCHETYPE_SEED)
}

/// Dispatches on `cfg.experiment`.
pub fn run(cfg: &ScenarioConfig) -> Result<Vec<RunRecord>> {
    match cfg.experiment {
        Experiment::Compare => run_compare(cfg),
        Experiment::Scaling => run_scaling(cfg),
        Experiment::BudgetSweep => run_budget_sweep(cfg),
        Experiment::CentralityStudy => run_centrality_study(cfg),
        Experiment::Archetype => {
            cfg.validate()?;
            run_archetypes_with(&cfg.il_params, cfg.seeds[0])
        }
    }
}

/// Recomputes `J2 / M` for a stored record from its seed and allocation.
pub fn reevaluate(record: &RunRecord) -> Result<f64> {
    let inst = Instance {
        experiment: record.experiment,
        generator: record.generator.clone(),
        nodes: record.nodes,
        players: record.players,
        budget: record.budget,
        policy: record.opponent_policy,
        seed: record.seed,
    };
    let game = build_game(&inst)?;
    let w = InfluenceAllocation::new(record.allocation.clone(), record.budget)?;
    let x = game.state(&w)?;
    Ok(objective_j2(&game.refs, game.ego(), &x)? / game.net.size() as f64)
}

/// Improvement recomputed from the stored opinion states alone.
pub fn stored_improvement(record: &RunRecord) -> Result<f64> {
    let refs = simplex_references(record.players)?;
    let x = OpinionState::new(record.dim, record.final_opinions.clone())?;
    let b = OpinionState::new(record.dim, record.baseline_opinions.clone())?;
    improvement(&refs, record.players - 1, &x, &b)
}

/// Mean and standard error of a sample. The error is zero for one value.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregate over records sharing size, budget and solver.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub solver: SolverKind,
    pub nodes: usize,
    pub budget: f64,
    pub runs: usize,
    pub failed: usize,
    pub objective_mean: f64,
    pub objective_se: f64,
    pub improvement_mean: f64,
    pub improvement_se: f64,
}

/// Groups records by (size, budget, solver) in first-seen order.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, u64, SolverKind)> = Vec::new();
    for r in records {
        let k = (r.nodes, r.budget.to_bits(), r.solver);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(nodes, bits, solver)| {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.nodes == nodes && r.budget.to_bits() == bits && r.solver == solver)
                .collect();
            let ok: Vec<&&RunRecord> = group.iter().filter(|r| r.is_ok()).collect();
            let obj: Vec<f64> = ok.iter().filter_map(|r| r.objective_j2_mean).collect();
            let imp: Vec<f64> = ok.iter().filter_map(|r| r.improvement).collect();
            let (objective_mean, objective_se) = mean_se(&obj);
            let (improvement_mean, improvement_se) = mean_se(&imp);
            SummaryRow {
                solver,
                nodes,
                budget: f64::from_bits(bits),
                runs: group.len(),
                failed: group.len() - ok.len(),
                objective_mean,
                objective_se,
                improvement_mean,
                improvement_se,
            }
        })
        .collect()
}

/// Column order of the results CSV.
pub const CSV_COLUMNS: [&str; 16] = [
    "experiment",
    "generator",
    "nodes",
    "players",
    "budget",
    "seed",
    "solver",
    "status",
    "objective_j2_mean",
    "baseline",
    "baseline_j2_mean",
    "improvement",
    "drift",
    "iterations",
    "converged",
    "wall_time_secs",
];

// `{}` on f64 prints the shortest string that parses back to the same bits.
fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_row(r: &RunRecord) -> [String; 16] {
    [
        r.experiment.name().into(),
        r.generator.name().into(),
        r.nodes.to_string(),
        r.players.to_string(),
        r.budget.to_string(),
        r.seed.to_string(),
        r.solver.name().into(),
        r.status.name().into(),
        opt(r.objective_j2_mean),
        r.baseline.name().into(),
        opt(r.baseline_j2_mean),
        opt(r.improvement),
        opt(r.drift),
        r.iterations.to_string(),
        r.converged.to_string(),
        opt(r.wall_time_secs),
    ]
}

/// Output file names inside the output directory.
pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSONL: &str = "results.jsonl";
pub const HINGE_CSV: &str = "hinge.csv";
pub const SWEEP_CSV: &str = "sweep.csv";

/// Writes results (and the hinge or sweep table when the experiment has
/// one) into `dir`. Wall times are dropped unless `timings` is set, which
/// keeps reruns byte-identical.
pub fn write_outputs(dir: &Path, records: &[RunRecord], timings: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let records: Vec<RunRecord> = records
        .iter()
        .cloned()
        .map(|mut r| {
            if !timings {
                r.wall_time_secs = None;
            }
            r
        })
        .collect();
    let mut written = Vec::new();

    let path = dir.join(RESULTS_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(CSV_COLUMNS)?;
    for r in &records {
        w.write_record(csv_row(r))?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join(RESULTS_JSONL);
    let mut out = BufWriter::new(File::create(&path)?);
    for r in &records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    written.push(path);

    let hinge: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.solver == SolverKind::Il && r.percentiles.is_some())
        .collect();
    if !hinge.is_empty() {
        let path = dir.join(HINGE_CSV);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["percentile", "allocation"])?;
        for r in hinge {
            let pct = r.percentiles.as_deref().unwrap_or_default();
            for (p, a) in pct.iter().zip(&r.allocation) {
                w.write_record([p.to_string(), a.to_string()])?;
            }
        }
        w.flush()?;
        written.push(path);
    }

    if records.iter().any(|r| r.experiment == Experiment::BudgetSweep) {
        let path = dir.join(SWEEP_CSV);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["nodes", "budget", "improvement"])?;
        for r in records.iter().filter(|r| r.is_ok()) {
            w.write_record([r.nodes.to_string(), r.budget.to_string(), opt(r.improvement)])?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Reads records back from a JSONL file.
pub fn read_jsonl(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Parses a scenario file and validates it.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    cfg.validate()?;
    Ok(cfg)
}
