//! Commuting tuples of matrices on a model space: resolvents, sectoriality
//! profiles, joint diagonalization and ergodic splittings.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HfcError, Result};
use crate::linalg::CMatrix;
use crate::space::{operator_norm, NormSearchCfg, SpaceModel};
use crate::stochastic::rng_stream;

/// Default relative commutation tolerance; inputs above it are rejected.
pub const DEFAULT_COMMUTATION_TOL: f64 = 1e-10;

/// Relative threshold below which an eigenvalue counts as zero.
pub const KERNEL_EIGENVALUE_TOL: f64 = 1e-10;

/// A `d`-tuple of commuting square matrices acting on one model space.
#[derive(Debug, Clone, Serialize)]
pub struct CommutingTuple {
    pub space: SpaceModel,
    pub operators: Vec<CMatrix>,
    pub tolerance: f64,
}

impl CommutingTuple {
    pub fn new(space: SpaceModel, operators: Vec<CMatrix>, tolerance: f64) -> Result<Self> {
        space.validate()?;
        if operators.is_empty() {
            return Err(HfcError::InvalidParameter("empty tuple".into()));
        }
        for a in &operators {
            if !a.is_square() || a.rows() != space.dim {
                return Err(HfcError::DimensionMismatch(
                    "tuple operators must be square with the space dimension".into(),
                ));
            }
            if !a.is_finite() {
                return Err(HfcError::InvalidParameter("non-finite matrix entries".into()));
            }
        }
        let tuple = CommutingTuple {
            space,
            operators,
            tolerance,
        };
        let defect = commutation_defect(&tuple);
        if defect > tolerance {
            return Err(HfcError::InvalidParameter(format!(
                "commutation defect {defect:.3e} exceeds tolerance {tolerance:.3e}"
            )));
        }
        Ok(tuple)
    }

    pub fn d(&self) -> usize {
        self.operators.len()
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    /// Conjugate-transpose tuple on the dual model.
    pub fn adjoint(&self) -> CommutingTuple {
        CommutingTuple {
            space: self.space.dual(),
            operators: self.operators.iter().map(|a| a.adjoint()).collect(),
            tolerance: self.tolerance,
        }
    }

    /// Spectral angle of each operator: `max |Arg(lambda)|` over nonzero
    /// eigenvalues (0 when the spectrum is `{0}`).
    pub fn estimated_types(&self) -> Result<Vec<f64>> {
        self.operators.iter().map(estimated_type).collect()
    }
}

/// Max over pairs of `||[A_j, A_k]|| / (||A_j|| ||A_k||)` in spectral norm,
/// with `0/0` treated as `0`.
pub fn commutation_defect(tuple: &CommutingTuple) -> f64 {
    let ops = &tuple.operators;
    let norms: Vec<f64> = ops.iter().map(|a| a.spectral_norm()).collect();
    let mut worst = 0.0f64;
    for j in 0..ops.len() {
        for k in (j + 1)..ops.len() {
            let comm = ops[j].matmul(&ops[k]).sub(&ops[k].matmul(&ops[j]));
            let denom = norms[j] * norms[k];
            let defect = if denom == 0.0 {
                0.0
            } else {
                comm.spectral_norm() / denom
            };
            worst = worst.max(defect);
        }
    }
    worst
}

/// Spectral angle of a single matrix.
pub fn estimated_type(a: &CMatrix) -> Result<f64> {
    let eigs = a.eigenvalues()?;
    let scale = eigs.iter().map(|l| l.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut omega = 0.0f64;
    for l in &eigs {
        if l.norm() > KERNEL_EIGENVALUE_TOL * scale {
            omega = omega.max(l.arg().abs());
        }
    }
    Ok(omega)
}

/// Principal fractional square root of a matrix whose spectrum avoids
/// `(-inf, 0]`; kernel eigenvalues must be split off first.
pub fn fractional_sqrt(a: &CMatrix) -> Result<CMatrix> {
    a.sqrtm()
}

/// `R(z, A) = (z I - A)^{-1}` with a residual guard.
pub fn resolvent(a: &CMatrix, z: C64) -> Result<CMatrix> {
    let n = a.dim();
    let m = CMatrix::identity(n).scale(z).sub(a);
    let inv = m.inverse().map_err(|_| {
        HfcError::SingularResolvent(format!("z = {z} is in (or too close to) the spectrum"))
    })?;
    let resid = m.matmul(&inv).sub(&CMatrix::identity(n)).spectral_norm();
    let scale = 1.0 + m.spectral_norm() * inv.spectral_norm() * f64::EPSILON;
    if resid > 1e-10 * scale.max(1.0) {
        return Err(HfcError::SingularResolvent(format!(
            "resolvent at z = {z} has residual {resid:.3e}"
        )));
    }
    Ok(inv)
}

/// Log-spaced radii covering the spectral scale of `a`.
pub fn log_radii(a: &CMatrix, total: usize) -> Vec<f64> {
    let scale = a.spectral_norm().max(f64::MIN_POSITIVE.sqrt());
    let lo = (1e-4 * scale).ln();
    let hi = (1e4 * scale).ln();
    (0..total)
        .map(|i| (lo + (hi - lo) * i as f64 / (total - 1).max(1) as f64).exp())
        .collect()
}

/// Resolvent growth profile over a grid of sector angles.
#[derive(Debug, Clone, Serialize)]
pub struct SectorialProfile {
    pub angles: Vec<f64>,
    pub constants: Vec<f64>,
}

impl SectorialProfile {
    /// Smallest sampled angle whose constant is below `threshold`.
    pub fn inferred_type(&self, threshold: f64) -> Option<f64> {
        self.angles
            .iter()
            .zip(self.constants.iter())
            .find(|(_, &c)| c <= threshold)
            .map(|(&a, _)| a)
    }
}

/// Estimates `sup ||z R(z, A)||` outside each sector of the angle grid.
///
/// For matrices the supremum over the sector complement is attained on the
/// boundary rays; each rung also absorbs the boundary samples of all larger
/// rungs (they lie in its complement), which makes the reported constants
/// nonincreasing by construction.
pub fn sectorial_profile(
    a: &CMatrix,
    space: &SpaceModel,
    angle_grid: &[f64],
    samples_per_decade: usize,
    norm_cfg: &NormSearchCfg,
) -> Result<SectorialProfile> {
    let eigs = a.eigenvalues()?;
    let scale = eigs.iter().map(|l| l.norm()).fold(0.0, f64::max);
    for l in &eigs {
        if scale > 0.0
            && l.norm() > KERNEL_EIGENVALUE_TOL * scale
            && l.re < 0.0
            && l.im.abs() <= 1e-12 * l.norm()
        {
            return Err(HfcError::InvalidParameter(
                "spectrum touches the open negative real axis".into(),
            ));
        }
    }
    let mut angles: Vec<f64> = angle_grid.to_vec();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let norm_scale = a.spectral_norm().max(f64::MIN_POSITIVE.sqrt());
    let decades = 12usize;
    let total = samples_per_decade * decades + 1;
    let lo = (1e-6 * norm_scale).ln();
    let hi = (1e6 * norm_scale).ln();
    let radii: Vec<f64> = (0..total)
        .map(|i| (lo + (hi - lo) * i as f64 / (total - 1) as f64).exp())
        .collect();

    let mut raw = Vec::with_capacity(angles.len());
    for &theta in &angles {
        let mut sup = 0.0f64;
        for &r in &radii {
            for sgn in [1.0f64, -1.0] {
                let z = C64::from_polar(r, sgn * theta);
                let res = resolvent(a, z)?;
                let val = operator_norm(&res.scale(z), space, norm_cfg).value;
                sup = sup.max(val);
                if sgn > 0.0 && theta == std::f64::consts::PI {
                    break; // the two rays coincide on the negative axis
                }
            }
        }
        raw.push(sup);
    }
    // cumulative max from the top: rays of larger angles lie outside smaller sectors
    let mut constants = vec![0.0f64; angles.len()];
    let mut running = 0.0f64;
    for i in (0..angles.len()).rev() {
        running = running.max(raw[i]);
        constants[i] = running;
    }
    Ok(SectorialProfile { angles, constants })
}

/// Joint eigenstructure of a commuting tuple.
#[derive(Debug, Clone)]
pub struct JointSpectrum {
    /// Change of basis: `A_k = S diag(lambda_k) S^{-1}`.
    pub basis: CMatrix,
    pub basis_inv: CMatrix,
    /// `eigen_tuples[j][k]` is the `k`-th coordinate of the joint eigenvalue
    /// attached to basis column `j`.
    pub eigen_tuples: Vec<Vec<C64>>,
    /// Worst relative off-diagonal residual of `S^{-1} A_k S`.
    pub residual: f64,
}

impl JointSpectrum {
    pub fn dim(&self) -> usize {
        self.eigen_tuples.len()
    }

    pub fn d(&self) -> usize {
        self.eigen_tuples.first().map(|t| t.len()).unwrap_or(0)
    }

    /// Kernel mask per column: bit `k` set iff `lambda_k != 0` at that column
    /// (zero detected relative to the spectral scale of `A_k`).
    pub fn support_masks(&self) -> Vec<u32> {
        let d = self.d();
        let n = self.dim();
        let mut scale = vec![0.0f64; d];
        for tup in &self.eigen_tuples {
            for k in 0..d {
                scale[k] = scale[k].max(tup[k].norm());
            }
        }
        (0..n)
            .map(|j| {
                let mut mask = 0u32;
                for k in 0..d {
                    if self.eigen_tuples[j][k].norm() > KERNEL_EIGENVALUE_TOL * scale[k].max(f64::MIN_POSITIVE)
                    {
                        mask |= 1 << k;
                    }
                }
                mask
            })
            .collect()
    }
}

const JOINT_DIAG_RESIDUAL: f64 = 1e-8;

/// Simultaneous diagonalization of a commuting tuple.
///
/// Diagonalizes a random generic linear combination and refines per
/// eigenvalue cluster; fails with `NotSimultaneouslyDiagonalizable` when the
/// input is defective or does not commute within tolerance.
pub fn joint_spectral_decompose(tuple: &CommutingTuple) -> Result<JointSpectrum> {
    joint_spectral_decompose_seeded(tuple, 0x1009)
}

pub fn joint_spectral_decompose_seeded(tuple: &CommutingTuple, seed: u64) -> Result<JointSpectrum> {
    let defect = commutation_defect(tuple);
    if defect > tuple.tolerance.max(DEFAULT_COMMUTATION_TOL) {
        return Err(HfcError::NotSimultaneouslyDiagonalizable(format!(
            "commutation defect {defect:.3e}"
        )));
    }
    let mut rng = rng_stream(seed, "joint_diag", 0);
    let basis = joint_eigenbasis(&tuple.operators, 0, &mut rng)?;
    let basis_inv = basis.inverse().map_err(|_| {
        HfcError::NotSimultaneouslyDiagonalizable("eigenbasis is numerically singular".into())
    })?;
    let n = tuple.dim();
    let d = tuple.d();
    let mut eigen_tuples = vec![vec![C64::new(0.0, 0.0); d]; n];
    let mut residual = 0.0f64;
    for (k, a) in tuple.operators.iter().enumerate() {
        let dk = basis_inv.matmul(a).matmul(&basis);
        let scale = a.spectral_norm().max(f64::MIN_POSITIVE.sqrt());
        let mut off = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off.set(i, j, dk.get(i, j));
                }
            }
        }
        residual = residual.max(off.spectral_norm() / scale);
        for j in 0..n {
            eigen_tuples[j][k] = dk.get(j, j);
        }
    }
    if residual > JOINT_DIAG_RESIDUAL {
        return Err(HfcError::NotSimultaneouslyDiagonalizable(format!(
            "off-diagonal residual {residual:.3e} exceeds {JOINT_DIAG_RESIDUAL:.1e}"
        )));
    }
    Ok(JointSpectrum {
        basis,
        basis_inv,
        eigen_tuples,
        residual,
    })
}

fn is_scalar(a: &CMatrix) -> bool {
    let n = a.dim();
    if n == 0 {
        return true;
    }
    let lam = a.get(0, 0);
    let dev = a.sub(&CMatrix::identity(n).scale(lam)).spectral_norm();
    dev <= 1e-12 * a.spectral_norm().max(1e-300) || dev == 0.0
}

fn joint_eigenbasis(ops: &[CMatrix], depth: usize, rng: &mut ChaCha8Rng) -> Result<CMatrix> {
    use rand::Rng;
    let n = ops[0].dim();
    if n == 1 || ops.iter().all(is_scalar) {
        return Ok(CMatrix::identity(n));
    }
    if depth > 8 {
        return Err(HfcError::NotSimultaneouslyDiagonalizable(
            "cluster refinement did not terminate".into(),
        ));
    }
    let mut last_err = None;
    for _attempt in 0..4 {
        // balanced random combination
        let mut m = CMatrix::zeros(n, n);
        for a in ops {
            let s = a.spectral_norm();
            if s == 0.0 {
                continue;
            }
            let phi = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
            let mag = 0.5 + rng.gen::<f64>();
            m = m.add(&a.scale(C64::from_polar(mag / s, phi)));
        }
        if m.spectral_norm() == 0.0 {
            return Ok(CMatrix::identity(n));
        }
        let (vals, vecs) = m.eig()?;
        let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let ctol = 1e-7 * scale;
        // cluster eigenvalues
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            (vals[i].re, vals[i].im)
                .partial_cmp(&(vals[j].re, vals[j].im))
                .unwrap()
        });
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for &idx in &order {
            match clusters.last_mut() {
                Some(c) if (vals[*c.last().unwrap()] - vals[idx]).norm() <= ctol => c.push(idx),
                _ => clusters.push(vec![idx]),
            }
        }
        if clusters.len() == 1 {
            // unlucky combination; retry
            continue;
        }
        let mut columns: Vec<crate::linalg::CVector> = Vec::with_capacity(n);
        let mut failed = false;
        for cluster in &clusters {
            if cluster.len() == 1 {
                columns.push(vecs.column(cluster[0]));
                continue;
            }
            // orthonormal basis of the cluster eigenspace
            let mut w = CMatrix::zeros(n, cluster.len());
            for (c, &idx) in cluster.iter().enumerate() {
                w.set_column(c, &vecs.column(idx));
            }
            let (u, svals, _v) = w.svd_full()?;
            let smax = svals.first().copied().unwrap_or(0.0);
            let rank = svals.iter().filter(|&&s| s > 1e-8 * smax.max(1e-300)).count();
            if rank < cluster.len() {
                last_err = Some(HfcError::NotSimultaneouslyDiagonalizable(format!(
                    "defective cluster of size {} (rank {rank})",
                    cluster.len()
                )));
                failed = true;
                break;
            }
            let mut wq = CMatrix::zeros(n, cluster.len());
            for c in 0..cluster.len() {
                wq.set_column(c, &u.column(c));
            }
            // restrict the tuple to the invariant cluster subspace
            let wq_adj = wq.adjoint();
            let sub_ops: Vec<CMatrix> = ops
                .iter()
                .map(|a| wq_adj.matmul(&a.matmul(&wq)))
                .collect();
            let s_sub = joint_eigenbasis(&sub_ops, depth + 1, rng)?;
            let lifted = wq.matmul(&s_sub);
            for c in 0..cluster.len() {
                columns.push(lifted.column(c));
            }
        }
        if failed {
            break;
        }
        let mut s = CMatrix::zeros(n, n);
        for (j, col) in columns.iter().enumerate() {
            // normalize columns for conditioning
            let nn = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let col = col.mapv(|x| x / nn.max(1e-300));
            s.set_column(j, &col);
        }
        return Ok(s);
    }
    Err(last_err.unwrap_or_else(|| {
        HfcError::NotSimultaneouslyDiagonalizable(
            "no separating combination found (likely defective input)".into(),
        )
    }))
}

/// Projections onto the joint kernel/range components, indexed by the subset
/// of coordinates on which the eigenvalue is nonzero (bitmask).
#[derive(Debug, Clone)]
pub struct ErgodicSplit {
    pub projections: BTreeMap<u32, CMatrix>,
    pub spectrum: JointSpectrum,
}

impl ErgodicSplit {
    pub fn projection(&self, mask: u32) -> Option<&CMatrix> {
        self.projections.get(&mask)
    }

    /// Projection for the full subset `{1, ..., d}`.
    pub fn full_range_projection(&self, d: usize) -> CMatrix {
        let mask = (1u32 << d) - 1;
        self.projections
            .get(&mask)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(self.spectrum.dim(), self.spectrum.dim()))
    }
}

/// Splits the space into joint eigencomponents where each `A_k` is either
/// invertible or zero; projections commute with the tuple.
pub fn ergodic_split(tuple: &CommutingTuple) -> Result<ErgodicSplit> {
    let spectrum = joint_spectral_decompose(tuple)?;
    let masks = spectrum.support_masks();
    let n = tuple.dim();
    let mut projections = BTreeMap::new();
    let mut seen: Vec<u32> = masks.clone();
    seen.sort_unstable();
    seen.dedup();
    for mask in seen {
        let diag: Vec<C64> = masks
            .iter()
            .map(|&m| {
                if m == mask {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let p = spectrum
            .basis
            .matmul(&CMatrix::diag(&diag))
            .matmul(&spectrum.basis_inv);
        projections.insert(mask, p);
    }
    // always include the empty and full subsets for callers that expect them
    let full = (1u32 << tuple.d()) - 1;
    for mask in [0u32, full] {
        projections
            .entry(mask)
            .or_insert_with(|| CMatrix::zeros(n, n));
    }
    Ok(ErgodicSplit {
        projections,
        spectrum,
    })
}

// ---------------------------------------------------------------------------
// serde
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TupleWire {
    space: SpaceModel,
    operators: Vec<CMatrix>,
    #[serde(default = "default_tol")]
    tolerance: f64,
}

fn default_tol() -> f64 {
    DEFAULT_COMMUTATION_TOL
}

impl<'de> Deserialize<'de> for CommutingTuple {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = TupleWire::deserialize(deserializer)?;
        CommutingTuple::new(wire.space, wire.operators, wire.tolerance)
            .map_err(|e| D::Error::custom(e.to_string()))
    }
}
