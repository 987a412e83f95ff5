//! Evaluation of the difference-of-convex (DC) reformulation.
//!
//! With `M = N_i - trust`, the ego objective `J2` equals `zᵀδ` where
//! `(M ⊗ I_D)ᵀ z = 1 ⊗ r_p` and `δ = Σ_j W_j ⊗ r_j`. Row `k` of the defining
//! system (individual `i = k / D`, component `d = k % D`) reads
//!
//! ```text
//! h_k = (1 + s_i) z_k - Σ_j trust[j][i] z_(jD+d) - r_p[d] = 0
//! ```
//!
//! The bilinear term `s_i z_k` is split with `2ab = (a+b)² - a² - b²`, giving
//! `h_k = g⁺_k - g⁻_k` with both parts convex in `(s, z)`. The module also
//! evaluates the constraint exactly as it is usually printed, which does not
//! vanish at consistent points.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{assemble, InfluenceAllocation};
use crate::error::{Error, Result};
use crate::game::{objective_j2, ReferenceSet};
use crate::linalg::{dot, influence_matrix_transposed, lu_solve};
use crate::netgen::SocialNetwork;

/// Residual tolerance for a consistent `z`.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Tolerance on `g⁺ - g⁻ = h`.
pub const SPLIT_TOL: f64 = 1e-10;
/// Tolerance on `f = zᵀδ`, relative to the larger of the two squared-norm
/// parts since `f` is their difference.
pub const POLARIZATION_TOL: f64 = 1e-12;
/// Tolerance on `zᵀδ = J2(x(∞))`, relative to `max(1, |J2|)`.
pub const OBJECTIVE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DCInstance {
    pub z: Vec<f64>,
    pub delta: Vec<f64>,
    pub s: Vec<f64>,
    pub player: usize,
}

impl DCInstance {
    pub fn dim(&self) -> usize {
        self.z.len() / self.s.len()
    }
}

/// Builds `z`, `δ` and `s` for player `p` under `allocations`.
pub fn build_dc_instance(
    net: &SocialNetwork,
    refs: &ReferenceSet,
    p: usize,
    allocations: &[InfluenceAllocation],
) -> Result<DCInstance> {
    refs.check_player(p)?;
    let sys = assemble(net, allocations.to_vec(), refs)?;
    if sys.total_influence() <= 0.0 {
        return Err(Error::Singular("no influence spent".into()));
    }
    let m = net.size();
    let d = refs.dim();
    let s = sys.influence_sums();
    let r_p = refs.get(p);
    // Blockwise: Mᵀ Z = 1 r_pᵀ, z = vec(Zᵀ).
    let rhs = DMatrix::from_fn(m, d, |_, k| r_p[k]);
    let zmat = lu_solve(influence_matrix_transposed(net.trust(), &s), &rhs)?;
    let z = (0..m * d).map(|k| zmat[(k / d, k % d)]).collect();
    Ok(DCInstance {
        z,
        delta: sys.reference_pull().into_values(),
        s,
        player: p,
    })
}

fn check_row(inst: &DCInstance, net: &SocialNetwork, refs: &ReferenceSet, k: usize) -> Result<()> {
    let m = net.size();
    let d = refs.dim();
    if inst.s.len() != m || inst.z.len() != m * d || inst.delta.len() != m * d {
        return Err(Error::DimensionMismatch(
            "instance does not match the network and references".into(),
        ));
    }
    if k >= m * d {
        return Err(Error::InvalidParameter(format!(
            "row {k} out of range for {} rows",
            m * d
        )));
    }
    refs.check_player(inst.player)
}

/// `(trustᵀ ⊗ I_D) z` at row `k`.
fn trust_term(net: &SocialNetwork, z: &[f64], d: usize, k: usize) -> f64 {
    let i = k / d;
    let c = k % d;
    (0..net.size())
        .map(|j| net.weight(j, i) * z[j * d + c])
        .sum()
}

/// `h_k` as defined in the module docs.
pub fn row_residual(
    inst: &DCInstance,
    net: &SocialNetwork,
    refs: &ReferenceSet,
    k: usize,
) -> Result<f64> {
    check_row(inst, net, refs, k)?;
    let d = refs.dim();
    let u = trust_term(net, &inst.z, d, k);
    Ok((1.0 + inst.s[k / d]) * inst.z[k] - u - refs.get(inst.player)[k % d])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcObjective {
    pub value: f64,
    /// `½‖z + δ‖²`
    pub convex_part: f64,
    /// `½(‖z‖² + ‖δ‖²)`
    pub concave_part: f64,
}

pub fn dc_objective(inst: &DCInstance) -> DcObjective {
    let sum: Vec<f64> = inst.z.iter().zip(&inst.delta).map(|(a, b)| a + b).collect();
    let convex_part = 0.5 * dot(&sum, &sum);
    let concave_part = 0.5 * (dot(&inst.z, &inst.z) + dot(&inst.delta, &inst.delta));
    DcObjective {
        value: convex_part - concave_part,
        convex_part,
        concave_part,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowSplit {
    /// `z_k + ½(s_i + z_k)² - u_k - r_p[d]`
    pub convex_g: f64,
    /// `½ s_i² + ½ z_k²`
    pub concave_g: f64,
    /// The commonly printed constraint, evaluated term by term.
    pub printed_g: f64,
}

/// Convex and subtracted parts of row `k`, as functions of raw `(s, z)`.
pub fn split_parts(s_i: f64, z_k: f64, u_k: f64, r: f64) -> (f64, f64) {
    let convex = z_k + 0.5 * (s_i + z_k).powi(2) - u_k - r;
    let concave = 0.5 * s_i * s_i + 0.5 * z_k * z_k;
    (convex, concave)
}

/// The printed constraint
/// `((2+s+z)² + (2u+2r)²) - ((2+2s)² + z² + 4u² + 4r²)`.
pub fn printed_constraint(s_i: f64, z_k: f64, u_k: f64, r: f64) -> f64 {
    ((2.0 + s_i + z_k).powi(2) + (2.0 * u_k + 2.0 * r).powi(2))
        - ((2.0 + 2.0 * s_i).powi(2) + z_k * z_k + 4.0 * u_k * u_k + 4.0 * r * r)
}

pub fn dc_decompose_row(
    inst: &DCInstance,
    net: &SocialNetwork,
    refs: &ReferenceSet,
    k: usize,
) -> Result<RowSplit> {
    check_row(inst, net, refs, k)?;
    let d = refs.dim();
    let s_i = inst.s[k / d];
    let z_k = inst.z[k];
    let u_k = trust_term(net, &inst.z, d, k);
    let r = refs.get(inst.player)[k % d];
    let (convex_g, concave_g) = split_parts(s_i, z_k, u_k, r);
    Ok(RowSplit {
        convex_g,
        concave_g,
        printed_g: printed_constraint(s_i, z_k, u_k, r),
    })
}

/// Numbers reported by `verify-dc`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcReport {
    pub max_residual: f64,
    /// `|zᵀδ - J2(x(∞))| / max(1, |J2|)`
    pub objective_error: f64,
    /// `|f - zᵀδ| / max(1, |zᵀδ|)`
    pub polarization_error: f64,
    /// `max_k |g⁺_k - g⁻_k - h_k|`
    pub split_error: f64,
    /// Largest `|printed g_k|` over all rows.
    pub printed_max_abs: f64,
}

impl DcReport {
    pub fn identities_hold(&self) -> bool {
        self.max_residual < RESIDUAL_TOL
            && self.objective_error <= OBJECTIVE_TOL
            && self.polarization_error <= POLARIZATION_TOL
            && self.split_error <= SPLIT_TOL
    }
}

/// Checks every identity for `inst` against the dynamics module.
pub fn verify(
    inst: &DCInstance,
    net: &SocialNetwork,
    refs: &ReferenceSet,
    allocations: &[InfluenceAllocation],
) -> Result<DcReport> {
    let rows = inst.z.len();
    let mut max_residual = 0.0f64;
    let mut split_error = 0.0f64;
    let mut printed_max_abs = 0.0f64;
    for k in 0..rows {
        let h = row_residual(inst, net, refs, k)?;
        let split = dc_decompose_row(inst, net, refs, k)?;
        max_residual = max_residual.max(h.abs());
        split_error = split_error.max((split.convex_g - split.concave_g - h).abs());
        printed_max_abs = printed_max_abs.max(split.printed_g.abs());
    }
    let obj = dc_objective(inst);
    let ztd = dot(&inst.z, &inst.delta);
    let sys = assemble(net, allocations.to_vec(), refs)?;
    let j2 = objective_j2(refs, inst.player, &sys.asymptotic_state()?)?;
    Ok(DcReport {
        max_residual,
        objective_error: (ztd - j2).abs() / j2.abs().max(1.0),
        polarization_error: (obj.value - ztd).abs()
            / obj.convex_part.max(obj.concave_part).max(1.0),
        split_error,
        printed_max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::simplex_references;
    use crate::netgen::gen_erdos_renyi;
    use crate::solvers::random_allocation;
    use approx::assert_abs_diff_eq;

    fn scalar() -> (SocialNetwork, ReferenceSet, Vec<InfluenceAllocation>) {
        (
            SocialNetwork::from_rows(&[&[1.0]]).unwrap(),
            simplex_references(2).unwrap(),
            vec![
                InfluenceAllocation::new(vec![1.0], 1.0).unwrap(),
                InfluenceAllocation::zeros(1, 1.0),
            ],
        )
    }

    #[test]
    fn scalar_instance() {
        let (net, refs, allocs) = scalar();
        let inst = build_dc_instance(&net, &refs, 0, &allocs).unwrap();
        assert_eq!(inst.z, vec![1.0]);
        assert_eq!(inst.delta, vec![1.0]);
        assert_eq!(inst.s, vec![1.0]);
        assert_eq!(row_residual(&inst, &net, &refs, 0).unwrap(), 0.0);
        let split = dc_decompose_row(&inst, &net, &refs, 0).unwrap();
        assert_eq!(split.printed_g, 7.0);
        assert_eq!(split.convex_g - split.concave_g, 0.0);
    }

    #[test]
    fn objective_parts() {
        let inst = DCInstance {
            z: vec![1.0],
            delta: vec![1.0],
            s: vec![1.0],
            player: 0,
        };
        let o = dc_objective(&inst);
        assert_eq!(o.value, 1.0);
        assert_eq!(o.convex_part, 2.0);
        assert_eq!(o.concave_part, 1.0);
        let orth = DCInstance {
            z: vec![1.0, 0.0],
            delta: vec![0.0, 3.0],
            s: vec![1.0],
            player: 0,
        };
        assert_eq!(dc_objective(&orth).value, 0.0);
    }

    #[test]
    fn doubling_allocations_doubles_delta_and_s() {
        let net = gen_erdos_renyi(6, 0.6, 2).unwrap();
        let refs = simplex_references(3).unwrap();
        let allocs: Vec<_> = (0..3).map(|p| random_allocation(6, 0.4, p).unwrap()).collect();
        let doubled: Vec<_> = allocs
            .iter()
            .map(|a| {
                InfluenceAllocation::new(a.weights().iter().map(|w| 2.0 * w).collect(), 0.8)
                    .unwrap()
            })
            .collect();
        let a = build_dc_instance(&net, &refs, 1, &allocs).unwrap();
        let b = build_dc_instance(&net, &refs, 1, &doubled).unwrap();
        for (x, y) in a.s.iter().zip(&b.s) {
            assert_abs_diff_eq!(2.0 * x, *y, epsilon = 1e-15);
        }
        for (x, y) in a.delta.iter().zip(&b.delta) {
            assert_abs_diff_eq!(2.0 * x, *y, epsilon = 1e-15);
        }
    }

    #[test]
    fn residual_is_linear_in_z() {
        let net = gen_erdos_renyi(5, 0.8, 4).unwrap();
        let refs = simplex_references(3).unwrap();
        let allocs: Vec<_> = (0..3).map(|p| random_allocation(5, 0.5, p + 10).unwrap()).collect();
        let mut inst = build_dc_instance(&net, &refs, 2, &allocs).unwrap();
        let k = 7;
        let before = row_residual(&inst, &net, &refs, k).unwrap();
        let eps = 1e-3;
        inst.z[k] += eps;
        let after = row_residual(&inst, &net, &refs, k).unwrap();
        let i = k / 2;
        let expect = eps * (1.0 + inst.s[i] - net.weight(i, i));
        assert_abs_diff_eq!(after - before, expect, epsilon = 1e-12);
    }

    #[test]
    fn verify_random_instance() {
        let net = gen_erdos_renyi(12, 0.5, 6).unwrap();
        let refs = simplex_references(4).unwrap();
        let allocs: Vec<_> = (0..4).map(|p| random_allocation(12, 0.5, p).unwrap()).collect();
        let inst = build_dc_instance(&net, &refs, 3, &allocs).unwrap();
        let report = verify(&inst, &net, &refs, &allocs).unwrap();
        assert!(report.identities_hold(), "{report:?}");
        assert!(report.printed_max_abs > 0.0);
    }

    #[test]
    fn row_bounds_checked() {
        let (net, refs, allocs) = scalar();
        let inst = build_dc_instance(&net, &refs, 0, &allocs).unwrap();
        assert!(row_residual(&inst, &net, &refs, 1).is_err());
    }
}
