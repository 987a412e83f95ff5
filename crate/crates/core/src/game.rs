//! Reference opinions and player objectives.

use serde::{Deserialize, Serialize};

use crate::dynamics::OpinionState;
use crate::error::{Error, Result};
use crate::linalg::dot;

/// Largest player count supported by [`simplex_references`].
pub const MAX_PLAYERS: usize = 12;

/// One reference opinion per player, all of the same dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl ReferenceSet {
    /// Wraps arbitrary unit-norm vectors. Used for fixtures with a single
    /// player; games normally use [`simplex_references`].
    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::InvalidParameter("need at least one reference".into()))?;
        if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch(
                "references must share a positive dimension".into(),
            ));
        }
        for (p, v) in vectors.iter().enumerate() {
            let norm = dot(v, v).sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "reference {p} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(ReferenceSet { dim, vectors })
    }

    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, p: usize) -> &[f64] {
        &self.vectors[p]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub(crate) fn check_player(&self, p: usize) -> Result<()> {
        if p < self.count() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "player {p} out of range for {} players",
                self.count()
            )))
        }
    }
}

/// Vertices of a centered regular simplex on the unit sphere in `R^(P-1)`.
///
/// The points `e_i - 1/P` are expressed in the orthonormal basis obtained by
/// Gram-Schmidt on `e_1 - 1/P, ..., e_(P-1) - 1/P`, then scaled to unit norm.
/// The first reference is therefore always `[1, 0, ..., 0]`.
pub fn simplex_references(players: usize) -> Result<ReferenceSet> {
    if !(2..=MAX_PLAYERS).contains(&players) {
        return Err(Error::InvalidParameter(format!(
            "player count must be in 2..={MAX_PLAYERS}, got {players}"
        )));
    }
    let p = players;
    let centered: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|k| if k == i { 1.0 } else { 0.0 } - 1.0 / p as f64)
                .collect()
        })
        .collect();

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p - 1);
    for v in centered.iter().take(p - 1) {
        let mut u = v.clone();
        for b in &basis {
            let proj = dot(&u, b);
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = dot(&u, &u).sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
        basis.push(u);
    }

    // Point i < P-1 lies in the span of the first i+1 basis vectors, so its
    // remaining coordinates are exactly zero.
    let vectors = centered
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut coords: Vec<f64> = basis
                .iter()
                .enumerate()
                .map(|(j, b)| if j <= i { dot(v, b) } else { 0.0 })
                .collect();
            let norm = dot(&coords, &coords).sqrt();
            coords.iter_mut().for_each(|x| *x /= norm);
            coords
        })
        .collect();
    Ok(ReferenceSet {
        dim: p - 1,
        vectors,
    })
}

fn check_state(refs: &ReferenceSet, p: usize, x: &OpinionState) -> Result<()> {
    refs.check_player(p)?;
    if x.dim() != refs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} differs from reference dimension {}",
            x.dim(),
            refs.dim()
        )));
    }
    Ok(())
}

/// Distance from player `p`'s reference to the mean opinion.
pub fn objective_j1(refs: &ReferenceSet, p: usize, x: &OpinionState) -> Result<f64> {
    check_state(refs, p, x)?;
    let mean = x.mean_opinion();
    let r = refs.get(p);
    Ok(r.iter()
        .zip(&mean)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Projection of the summed opinions onto player `p`'s reference. Equals
/// `M` times the projection of the mean opinion.
pub fn objective_j2(refs: &ReferenceSet, p: usize, x: &OpinionState) -> Result<f64> {
    check_state(refs, p, x)?;
    Ok(dot(refs.get(p), &x.sum_opinion()))
}

/// Gain in mean projected opinion of `x_alg` over `x_base`.
pub fn improvement(
    refs: &ReferenceSet,
    p: usize,
    x_alg: &OpinionState,
    x_base: &OpinionState,
) -> Result<f64> {
    if x_alg.individuals() != x_base.individuals() {
        return Err(Error::DimensionMismatch(
            "states cover different numbers of individuals".into(),
        ));
    }
    let m = x_alg.individuals() as f64;
    Ok((objective_j2(refs, p, x_alg)? - objective_j2(refs, p, x_base)?) / m)
}
