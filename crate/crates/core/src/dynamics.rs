//! Influenced DeGroot dynamics.
//!
//! With player allocations `W_1..W_P` and `s = Σ_p W_p`, individual `i`
//! updates to
//!
//! ```text
//! x_i(t+1) = (Σ_p W_p[i] r_p + Σ_k trust[i][k] x_k(t)) / (1 + s[i])
//! ```
//!
//! which is the network block of the row-normalized augmented system where
//! players are stubborn nodes holding their reference opinions. Everything is
//! done blockwise on `M x M` matrices; the `(P + M) D` augmented matrix and
//! the Kronecker products with `I_D` are never formed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::ReferenceSet;
use crate::linalg::{influence_matrix, lu_solve, max_abs_diff};
use crate::netgen::SocialNetwork;

/// Budget feasibility slack.
pub const BUDGET_TOL: f64 = 1e-12;

/// Successive-iterate tolerance for the consensus iteration.
pub const CONSENSUS_TOL: f64 = 1e-12;
pub const CONSENSUS_MAX_ITERS: usize = 100_000;

/// Slack used by [`hull_check`].
pub const HULL_TOL: f64 = 1e-9;

/// One player's nonnegative per-individual influence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceAllocation {
    weights: Vec<f64>,
    budget: f64,
}

impl InfluenceAllocation {
    pub fn new(weights: Vec<f64>, budget: f64) -> Result<Self> {
        if !budget.is_finite() || budget < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "budget must be a nonnegative number, got {budget}"
            )));
        }
        if let Some((k, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "allocation entry {k} is {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if total > budget + BUDGET_TOL {
            return Err(Error::InvalidParameter(format!(
                "allocation spends {total}, over the budget {budget}"
            )));
        }
        Ok(InfluenceAllocation { weights, budget })
    }

    /// Skips validation; callers guarantee feasibility.
    pub(crate) fn from_raw(weights: Vec<f64>, budget: f64) -> Self {
        InfluenceAllocation { weights, budget }
    }

    pub fn zeros(m: usize, budget: f64) -> Self {
        InfluenceAllocation {
            weights: vec![0.0; m],
            budget,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Fraction of the spent budget that lands on `nodes`.
    pub fn share_of<I: IntoIterator<Item = usize>>(&self, nodes: I) -> f64 {
        let total = self.total();
        if total == 0.0 {
            return 0.0;
        }
        nodes.into_iter().map(|k| self.weights[k]).sum::<f64>() / total
    }
}

/// Stacked opinions: individual `i` occupies `values[i*dim..(i+1)*dim]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpinionState {
    dim: usize,
    values: Vec<f64>,
}

impl OpinionState {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not stack into blocks of {dim}",
                values.len()
            )));
        }
        Ok(OpinionState { dim, values })
    }

    pub fn zeros(individuals: usize, dim: usize) -> Self {
        OpinionState {
            dim,
            values: vec![0.0; individuals * dim],
        }
    }

    /// Every individual holds `opinion`.
    pub fn uniform(individuals: usize, opinion: &[f64]) -> Self {
        OpinionState {
            dim: opinion.len(),
            values: opinion.repeat(individuals),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn individuals(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn sum_opinion(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.dim];
        for b in self.blocks() {
            sum.iter_mut().zip(b).for_each(|(s, v)| *s += v);
        }
        sum
    }

    pub fn mean_opinion(&self) -> Vec<f64> {
        let m = self.individuals() as f64;
        self.sum_opinion().into_iter().map(|v| v / m).collect()
    }

    pub fn max_abs_diff(&self, other: &OpinionState) -> f64 {
        max_abs_diff(&self.values, &other.values)
    }
}

/// A network with every player's allocation and reference attached.
#[derive(Clone, Debug)]
pub struct AugmentedSystem<'a> {
    network: &'a SocialNetwork,
    refs: &'a ReferenceSet,
    allocations: Vec<InfluenceAllocation>,
    n_inv_diag: Vec<f64>,
}

/// See [`AugmentedSystem::assemble`].
pub fn assemble<'a>(
    net: &'a SocialNetwork,
    allocations: Vec<InfluenceAllocation>,
    refs: &'a ReferenceSet,
) -> Result<AugmentedSystem<'a>> {
    AugmentedSystem::assemble(net, allocations, refs)
}

impl<'a> AugmentedSystem<'a> {
    /// Checks shapes and computes the normalizer diagonal `1 + Σ_p W_p`.
    pub fn assemble(
        net: &'a SocialNetwork,
        allocations: Vec<InfluenceAllocation>,
        refs: &'a ReferenceSet,
    ) -> Result<Self> {
        let m = net.size();
        if allocations.len() != refs.count() {
            return Err(Error::DimensionMismatch(format!(
                "{} allocations for {} references",
                allocations.len(),
                refs.count()
            )));
        }
        if let Some(a) = allocations.iter().find(|a| a.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "allocation of length {} on a network of {m}",
                a.len()
            )));
        }
        let mut n_inv_diag = vec![1.0; m];
        for a in &allocations {
            n_inv_diag
                .iter_mut()
                .zip(a.weights())
                .for_each(|(n, w)| *n += w);
        }
        Ok(AugmentedSystem {
            network: net,
            refs,
            allocations,
            n_inv_diag,
        })
    }

    pub fn network(&self) -> &SocialNetwork {
        self.network
    }

    pub fn refs(&self) -> &ReferenceSet {
        self.refs
    }

    pub fn allocations(&self) -> &[InfluenceAllocation] {
        &self.allocations
    }

    /// Diagonal of `N_i = diag(1 + Σ_p W_p)`.
    pub fn n_inv_diag(&self) -> &[f64] {
        &self.n_inv_diag
    }

    /// Total influence `s[k] = Σ_p W_p[k]` received by each individual.
    pub fn influence_sums(&self) -> Vec<f64> {
        self.n_inv_diag.iter().map(|n| n - 1.0).collect()
    }

    pub fn total_influence(&self) -> f64 {
        self.allocations.iter().map(|a| a.total()).sum()
    }

    /// `δ_i = Σ_p W_p[i] r_p`, the reference pull on each individual.
    pub fn reference_pull(&self) -> OpinionState {
        let m = self.network.size();
        let d = self.refs.dim();
        let mut delta = vec![0.0; m * d];
        for (p, a) in self.allocations.iter().enumerate() {
            let r = self.refs.get(p);
            for (i, w) in a.weights().iter().enumerate() {
                if *w != 0.0 {
                    for k in 0..d {
                        delta[i * d + k] += w * r[k];
                    }
                }
            }
        }
        OpinionState { dim: d, values: delta }
    }

    fn check_state(&self, x: &OpinionState) -> Result<()> {
        if x.dim() != self.refs.dim() || x.individuals() != self.network.size() {
            return Err(Error::DimensionMismatch(format!(
                "state is {} x {}, system is {} x {}",
                x.individuals(),
                x.dim(),
                self.network.size(),
                self.refs.dim()
            )));
        }
        Ok(())
    }

    /// One synchronous update.
    pub fn step(&self, x: &OpinionState) -> Result<OpinionState> {
        self.check_state(x)?;
        let m = self.network.size();
        let d = self.refs.dim();
        let trust = self.network.trust();
        let mut next = self.reference_pull().values;
        for i in 0..m {
            let row = &mut next[i * d..(i + 1) * d];
            for j in 0..m {
                let w = trust[(i, j)];
                if w != 0.0 {
                    let xj = x.block(j);
                    for k in 0..d {
                        row[k] += w * xj[k];
                    }
                }
            }
            let scale = 1.0 / self.n_inv_diag[i];
            row.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(OpinionState { dim: d, values: next })
    }

    /// `steps + 1` states starting with `x0`.
    pub fn trajectory(&self, x0: &OpinionState, steps: usize) -> Result<Vec<OpinionState>> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(x0.clone());
        for _ in 0..steps {
            let next = self.step(out.last().expect("non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }

    /// Fixed point of [`step`](Self::step), independent of the initial
    /// opinions.
    ///
    /// Solves `(N_i - trust) Y = [W_1 .. W_P]` once and sets
    /// `x_i = Σ_p Y[i][p] r_p`. Needs some positive influence; with none the
    /// matrix is the singular Laplacian and [`Self::long_run_state`] should be
    /// used instead.
    pub fn asymptotic_state(&self) -> Result<OpinionState> {
        if self.total_influence() <= 0.0 {
            return Err(Error::Singular(
                "no player spends any influence; the limit depends on the initial opinions"
                    .into(),
            ));
        }
        let m = self.network.size();
        let p_count = self.refs.count();
        let d = self.refs.dim();
        let a = influence_matrix(self.network.trust(), &self.influence_sums());
        let rhs = DMatrix::from_fn(m, p_count, |i, p| self.allocations[p].weights()[i]);
        let y = lu_solve(a, &rhs)?;
        let mut values = vec![0.0; m * d];
        for i in 0..m {
            for p in 0..p_count {
                let c = y[(i, p)];
                let r = self.refs.get(p);
                for k in 0..d {
                    values[i * d + k] += c * r[k];
                }
            }
        }
        Ok(OpinionState { dim: d, values })
    }

    /// [`asymptotic_state`](Self::asymptotic_state) when some influence is
    /// spent, otherwise the uninfluenced consensus reached from `x0`.
    pub fn long_run_state(&self, x0: &OpinionState) -> Result<OpinionState> {
        if self.total_influence() > 0.0 {
            self.asymptotic_state()
        } else {
            self.check_state(x0)?;
            consensus_state(self.network, x0)
        }
    }
}

/// Limit of the uninfluenced update `x <- (trust ⊗ I) x`.
pub fn consensus_state(net: &SocialNetwork, x0: &OpinionState) -> Result<OpinionState> {
    if x0.individuals() != net.size() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} individuals, network has {}",
            x0.individuals(),
            net.size()
        )));
    }
    let m = net.size();
    let d = x0.dim();
    let trust = net.trust();
    let mut x = x0.values.clone();
    let mut next = vec![0.0; x.len()];
    for _ in 0..CONSENSUS_MAX_ITERS {
        next.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            for j in 0..m {
                let w = trust[(i, j)];
                if w != 0.0 {
                    for k in 0..d {
                        next[i * d + k] += w * x[j * d + k];
                    }
                }
            }
        }
        let diff = max_abs_diff(&x, &next);
        std::mem::swap(&mut x, &mut next);
        if diff < CONSENSUS_TOL {
            return Ok(OpinionState { dim: d, values: x });
        }
    }
    Err(Error::NotConverged {
        what: "consensus iteration",
        iterations: CONSENSUS_MAX_ITERS,
    })
}

/// Whether `point` lies in the convex hull of the references, up to `tol`.
///
/// Solves for affine (barycentric) coordinates in the least-squares sense and
/// requires both a vanishing residual and nonnegative coordinates. The
/// references must be affinely independent, which holds for simplex
/// references; otherwise the point is reported as outside.
pub fn point_in_hull(refs: &ReferenceSet, point: &[f64], tol: f64) -> bool {
    let p = refs.count();
    let d = refs.dim();
    if point.len() != d {
        return false;
    }
    // Rows 0..d hold coordinates, row d is the affine constraint.
    let a = DMatrix::from_fn(d + 1, p, |row, col| {
        if row < d {
            refs.get(col)[row]
        } else {
            1.0
        }
    });
    let b = DMatrix::from_fn(d + 1, 1, |row, _| if row < d { point[row] } else { 1.0 });
    let gram = a.transpose() * &a;
    let Ok(lambda) = lu_solve(gram, &(a.transpose() * &b)) else {
        return false;
    };
    let residual = (&a * &lambda - b).amax();
    residual <= tol && lambda.iter().all(|&l| l >= -tol)
}

/// True iff every individual opinion in every state lies in the hull of the
/// references (tolerance [`HULL_TOL`]).
pub fn hull_check(refs: &ReferenceSet, trajectory: &[OpinionState]) -> bool {
    trajectory
        .iter()
        .all(|x| x.blocks().all(|b| point_in_hull(refs, b, HULL_TOL)))
}
