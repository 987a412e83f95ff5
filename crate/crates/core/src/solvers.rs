//! Budget allocation for one ego player against fixed opponents.
//!
//! The ego player's objective is `J2` at the asymptotic state. Holding the
//! normalizer `N_i` fixed makes it linear in the ego allocation, with
//! coefficients `c = y |r_p|²` where `(N_i - trust)ᵀ y = 1`. The iterated
//! linear (IL) solver repeatedly maximizes that linearization over the budget
//! simplex (a vertex, in closed form) and takes a damped, momentum-accelerated
//! step toward it.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{assemble, InfluenceAllocation};
use crate::error::{Error, Result};
use crate::game::{objective_j2, ReferenceSet};
use crate::linalg::{dot, influence_matrix_transposed, lu_solve_vec, max_abs_diff};
use crate::netgen::{eigenvector_centrality, SocialNetwork};
use crate::par::{self, Execution};

/// Largest network the finite-difference oracle accepts.
pub const ORACLE_MAX_NODES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Momentum {
    Nesterov,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ILParams {
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once the infinity-norm change of the allocation drops below this.
    pub tol: f64,
    pub momentum: Momentum,
}

impl Default for ILParams {
    fn default() -> Self {
        ILParams {
            step_size: 0.1,
            max_iters: 500,
            tol: 1e-8,
            momentum: Momentum::Nesterov,
        }
    }
}

impl ILParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "IL step size must be in (0, 1], got {}",
                self.step_size
            )));
        }
        if self.max_iters == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(
                "IL max_iters and tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    pub iters: usize,
    pub fd_eps: f64,
    /// First step as a fraction of the budget; step `k` is scaled by
    /// `1 / sqrt(k + 1)`.
    pub initial_step: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            iters: 150,
            fd_eps: 1e-6,
            initial_step: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub allocation: InfluenceAllocation,
    /// `J2` at the asymptotic state under the returned allocation.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

/// The ego player's view of a game: everything but its own allocation.
#[derive(Clone, Copy, Debug)]
pub struct EgoProblem<'a> {
    pub net: &'a SocialNetwork,
    pub refs: &'a ReferenceSet,
    pub player: usize,
    /// The other players' allocations, in player order with `player` skipped.
    pub opponents: &'a [InfluenceAllocation],
    pub budget: f64,
}

impl<'a> EgoProblem<'a> {
    pub fn new(
        net: &'a SocialNetwork,
        refs: &'a ReferenceSet,
        player: usize,
        opponents: &'a [InfluenceAllocation],
        budget: f64,
    ) -> Result<Self> {
        refs.check_player(player)?;
        if opponents.len() + 1 != refs.count() {
            return Err(Error::DimensionMismatch(format!(
                "{} opponents for {} players",
                opponents.len(),
                refs.count()
            )));
        }
        if opponents.iter().any(|a| a.len() != net.size()) {
            return Err(Error::DimensionMismatch(
                "opponent allocation length differs from network size".into(),
            ));
        }
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "budget must be positive, got {budget}"
            )));
        }
        Ok(EgoProblem {
            net,
            refs,
            player,
            opponents,
            budget,
        })
    }

    /// All players' allocations with `ego` in the ego slot.
    pub fn allocations_with(&self, ego: InfluenceAllocation) -> Vec<InfluenceAllocation> {
        let mut all = Vec::with_capacity(self.refs.count());
        let mut others = self.opponents.iter();
        for p in 0..self.refs.count() {
            if p == self.player {
                all.push(ego.clone());
            } else {
                all.push(others.next().expect("opponent count checked").clone());
            }
        }
        all
    }

    fn allocation(&self, w: &[f64]) -> Result<InfluenceAllocation> {
        InfluenceAllocation::new(w.to_vec(), self.budget)
    }

    /// `J2` through the forward asymptotic solve.
    pub fn evaluate(&self, w: &[f64]) -> Result<f64> {
        let allocations = self.allocations_with(self.allocation(w)?);
        let sys = assemble(self.net, allocations, self.refs)?;
        objective_j2(self.refs, self.player, &sys.asymptotic_state()?)
    }

    fn opponent_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.net.size()];
        for a in self.opponents {
            s.iter_mut().zip(a.weights()).for_each(|(x, w)| *x += w);
        }
        s
    }

    /// `Σ_{j≠p} W_j[k] (r_j · r_p)` per individual.
    fn opponent_projection(&self) -> Vec<f64> {
        let r_p = self.refs.get(self.player);
        let mut out = vec![0.0; self.net.size()];
        let mut others = self.opponents.iter();
        for q in 0..self.refs.count() {
            if q == self.player {
                continue;
            }
            let a = others.next().expect("opponent count checked");
            let align = dot(self.refs.get(q), r_p);
            out.iter_mut()
                .zip(a.weights())
                .for_each(|(o, w)| *o += w * align);
        }
        out
    }
}

/// Solves `(N_i - trust)ᵀ y = 1` and returns the linear coefficients
/// `y |r_p|²` together with `J2 = Σ_k y_k (δ_k · r_p)`.
fn linearize(
    net: &SocialNetwork,
    r_p_norm2: f64,
    total: &[f64],
    projected_pull: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let m = net.size();
    let a = influence_matrix_transposed(net.trust(), total);
    let y = lu_solve_vec(a, &DVector::from_element(m, 1.0))?;
    let j2 = dot(y.as_slice(), projected_pull);
    Ok((y.iter().map(|v| v * r_p_norm2).collect(), j2))
}

/// Marginal value of each unit of player `p`'s influence with the
/// normalizer frozen at `all_allocations`.
pub fn linear_coeffs(
    net: &SocialNetwork,
    refs: &ReferenceSet,
    p: usize,
    all_allocations: &[InfluenceAllocation],
) -> Result<Vec<f64>> {
    let sys = assemble(net, all_allocations.to_vec(), refs)?;
    if sys.total_influence() <= 0.0 {
        return Err(Error::Singular("no influence spent".into()));
    }
    refs.check_player(p)?;
    let r_p = refs.get(p);
    let pull = vec![0.0; net.size()];
    Ok(linearize(net, dot(r_p, r_p), &sys.influence_sums(), &pull)?.0)
}

/// Maximizes `cᵀw` over `{w ≥ 0, Σw ≤ budget}`: the whole budget on the
/// lowest-index largest coefficient if it is positive, nothing otherwise.
pub fn lp_step(c: &[f64], budget: f64) -> InfluenceAllocation {
    let mut w = vec![0.0; c.len()];
    let best = c
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, f64)>, (k, &v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((k, v)),
        });
    if let Some((k, v)) = best {
        if v > 0.0 {
            w[k] = budget;
        }
    }
    InfluenceAllocation::from_raw(w, budget)
}

/// Euclidean projection onto `{w ≥ 0, Σw ≤ budget}`.
pub fn project_budget(v: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    // Projection onto the simplex {Σw = budget, w ≥ 0} by sorting.
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - budget) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    // Absorb rounding so the budget holds to the last ulp.
    let total: f64 = w.iter().sum();
    if total > budget {
        let scale = budget / total;
        w.iter_mut().for_each(|x| *x *= scale);
    }
    w
}

fn check_deadline(start: Instant, limit: Option<Duration>) -> Result<()> {
    match limit {
        Some(l) if start.elapsed() > l => Err(Error::Timeout {
            limit_secs: l.as_secs_f64(),
        }),
        _ => Ok(()),
    }
}

fn finish(
    problem: &EgoProblem,
    best: Vec<f64>,
    iterations: usize,
    converged: bool,
    start: Instant,
) -> Result<SolveReport> {
    let objective = problem.evaluate(&best)?;
    Ok(SolveReport {
        allocation: InfluenceAllocation::new(best, problem.budget)?,
        objective,
        iterations,
        converged,
        wall_time: start.elapsed(),
    })
}

/// Iterated linear solver. See the module docs.
pub fn il_solve(
    net: &SocialNetwork,
    refs: &ReferenceSet,
    p: usize,
    opponents: &[InfluenceAllocation],
    budget: f64,
    params: &ILParams,
) -> Result<SolveReport> {
    il_solve_within(&EgoProblem::new(net, refs, p, opponents, budget)?, params, None)
}

/// [`il_solve`] with a wall-clock limit checked once per iteration.
pub fn il_solve_within(
    problem: &EgoProblem,
    params: &ILParams,
    time_limit: Option<Duration>,
) -> Result<SolveReport> {
    params.validate()?;
    let start = Instant::now();
    let m = problem.net.size();
    let budget = problem.budget;
    let r_p = problem.refs.get(problem.player);
    let r_norm2 = dot(r_p, r_p);
    let opp_sums = problem.opponent_sums();
    let opp_proj = problem.opponent_projection();

    // Returns (coefficients, J2) at ego allocation `w`.
    let probe = |w: &[f64]| -> Result<(Vec<f64>, f64)> {
        let total: Vec<f64> = opp_sums.iter().zip(w).map(|(a, b)| a + b).collect();
        let pull: Vec<f64> = opp_proj
            .iter()
            .zip(w)
            .map(|(o, x)| o + x * r_norm2)
            .collect();
        linearize(problem.net, r_norm2, &total, &pull)
    };

    // The first step lands on the LP vertex so nothing of the uniform start
    // survives; later steps follow the Frank-Wolfe schedule 2/(k+2), capped
    // at `step_size`, so the vertex targets average out instead of cycling.
    let mut w = vec![budget / m as f64; m];
    let mut w_prev = w.clone();
    let mut t = 1.0f64;
    let mut best = w.clone();
    let mut best_j = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for k in 0..params.max_iters {
        check_deadline(start, time_limit)?;
        iterations += 1;
        let step = if k == 0 { 1.0 } else { (2.0 / (k as f64 + 2.0)).min(params.step_size) };
        let beta = match params.momentum {
            Momentum::Nesterov => {
                let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
                let beta = (t - 1.0) / t_next;
                t = t_next;
                beta
            }
            Momentum::None => 0.0,
        };
        let look: Vec<f64> = w
            .iter()
            .zip(&w_prev)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        let look = project_budget(&look, budget);

        let (c, j_look) = probe(&look)?;
        if j_look > best_j {
            best_j = j_look;
            best.clone_from(&look);
        }
        let target = lp_step(&c, budget);
        let next: Vec<f64> = look
            .iter()
            .zip(target.weights())
            .map(|(y, g)| y + step * (g - y))
            .collect();
        let next = project_budget(&next, budget);
        let change = max_abs_diff(&next, &w);
        w_prev = std::mem::replace(&mut w, next);
        if change < params.tol {
            converged = true;
            break;
        }
    }
    let (_, j_last) = probe(&w)?;
    if j_last > best_j {
        best = w;
    }
    finish(problem, best, iterations, converged, start)
}

/// `M` entries drawn from `(0, 1)` and rescaled to spend exactly `budget`.
pub fn random_allocation(m: usize, budget: f64, seed: u64) -> Result<InfluenceAllocation> {
    if !(budget > 0.0) || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "random allocation needs a positive budget and size, got {budget} and {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..m).map(|_| rng.sample(Open01)).collect();
    let total: f64 = u.iter().sum();
    InfluenceAllocation::new(u.iter().map(|x| budget * (x / total)).collect(), budget)
}

/// Budget split in proportion to eigenvector centrality.
pub fn centrality_allocation(net: &SocialNetwork, budget: f64) -> Result<InfluenceAllocation> {
    if !(budget > 0.0) {
        return Err(Error::InvalidParameter(format!("budget must be positive, got {budget}")));
    }
    let c = eigenvector_centrality(net)?;
    let w = project_budget(&c.values.iter().map(|v| v * budget).collect::<Vec<_>>(), budget);
    InfluenceAllocation::new(w, budget)
}

/// Projected gradient ascent on the exact objective with central finite
/// differences. Slow and independent of the IL code path; used as a
/// reference for solution quality.
pub fn pg_oracle(
    net: &SocialNetwork,
    refs: &ReferenceSet,
    p: usize,
    opponents: &[InfluenceAllocation],
    budget: f64,
    params: &OracleParams,
    exec: Execution,
) -> Result<SolveReport> {
    pg_oracle_within(
        &EgoProblem::new(net, refs, p, opponents, budget)?,
        params,
        exec,
        None,
    )
}

pub fn pg_oracle_within(
    problem: &EgoProblem,
    params: &OracleParams,
    exec: Execution,
    time_limit: Option<Duration>,
) -> Result<SolveReport> {
    let start = Instant::now();
    let m = problem.net.size();
    if m > ORACLE_MAX_NODES {
        return Err(Error::InvalidParameter(format!(
            "oracle is limited to {ORACLE_MAX_NODES} nodes, got {m}"
        )));
    }
    if !(params.fd_eps > 0.0) || params.iters == 0 {
        return Err(Error::InvalidParameter("oracle needs fd_eps > 0 and iters > 0".into()));
    }
    let budget = problem.budget;
    let eps = params.fd_eps;
    // Finite-difference probes may step slightly outside the budget.
    let probe = |w: &[f64]| -> Result<f64> {
        let alloc = InfluenceAllocation::new(w.to_vec(), budget + 2.0 * eps)?;
        let sys = assemble(problem.net, problem.allocations_with(alloc), problem.refs)?;
        objective_j2(problem.refs, problem.player, &sys.asymptotic_state()?)
    };
    let shifted = |w: &[f64], k: usize, delta: f64| -> Vec<f64> {
        let mut v = w.to_vec();
        v[k] = (v[k] + delta).max(0.0);
        v
    };

    let mut w = vec![budget / m as f64; m];
    let mut best = w.clone();
    let mut best_j = probe(&w)?;
    let mut iterations = 0;
    for k in 0..params.iters {
        check_deadline(start, time_limit)?;
        iterations += 1;
        let grad: Vec<Result<f64>> = par::map_range(exec, m, |i| {
            let lo = shifted(&w, i, -eps);
            let hi = shifted(&w, i, eps);
            let span = hi[i] - lo[i];
            Ok((probe(&hi)? - probe(&lo)?) / span)
        });
        let grad: Vec<f64> = grad.into_iter().collect::<Result<_>>()?;
        let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if scale == 0.0 {
            break;
        }
        let step = params.initial_step * budget / ((k + 1) as f64).sqrt() / scale;
        let moved: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
        w = project_budget(&moved, budget);
        let j = probe(&w)?;
        if j > best_j {
            best_j = j;
            best.clone_from(&w);
        }
    }
    finish(problem, best, iterations, false, start)
}
