//! Rademacher and Gaussian averages, R-bound estimation and gamma-norms of
//! finite-rank maps.
//!
//! Every randomized routine takes an explicit seed and derives independent
//! sub-streams from `(seed, label, index)`, so results are reproducible and
//! batches can run in parallel with a fixed reduction order.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{HfcError, Result};
use crate::linalg::{CMatrix, CVector};
use crate::space::{operator_norm, NormSearchCfg, SpaceModel};

/// Deterministic sub-stream derivation: FNV-1a over `(seed, label, index)`.
pub fn rng_stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    };
    for b in seed.to_le_bytes() {
        eat(b);
    }
    for b in label.bytes() {
        eat(b);
    }
    for b in index.to_le_bytes() {
        eat(b);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Standard real normal via Box-Muller.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Complex standard Gaussian normalized to `E|g|^2 = 1`
/// (real and imaginary parts each of variance 1/2).
pub fn complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let s = 0.5f64.sqrt();
    C64::new(standard_normal(rng) * s, standard_normal(rng) * s)
}

/// Uniform point on the complex unit disc.
pub fn unit_disc(rng: &mut ChaCha8Rng) -> C64 {
    let r = rng.gen::<f64>().sqrt();
    let phi = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
    C64::from_polar(r, phi)
}

/// A finitely supported family of vectors in one model space.
#[derive(Debug, Clone)]
pub struct VectorFamily {
    pub space: SpaceModel,
    pub vectors: Vec<CVector>,
}

impl VectorFamily {
    pub fn new(space: SpaceModel, vectors: Vec<CVector>) -> Result<Self> {
        if vectors.iter().any(|v| v.len() != space.dim) {
            return Err(HfcError::DimensionMismatch(
                "family vectors must share the model dimension".into(),
            ));
        }
        Ok(VectorFamily { space, vectors })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageMode {
    /// Full enumeration of sign patterns (family size <= 20).
    Exact,
    /// Seeded sampling with a batch-means confidence interval.
    MonteCarlo { samples: usize },
}

/// Point estimate with an optional 95% confidence interval.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    #[serde(rename = "estimate")]
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub mode: String,
    pub seed: u64,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Estimate {
            value,
            ci_low: None,
            ci_high: None,
            mode: "exact".into(),
            seed: 0,
        }
    }
}

const MC_BATCHES: usize = 16;

fn batch_means_estimate(sq_samples: &[f64], seed: u64) -> Estimate {
    let n = sq_samples.len();
    let mean: f64 = sq_samples.iter().sum::<f64>() / n as f64;
    let b = MC_BATCHES.min(n);
    let per = n / b;
    let mut batch_means = Vec::with_capacity(b);
    for k in 0..b {
        let chunk = &sq_samples[k * per..(k + 1) * per];
        batch_means.push(chunk.iter().sum::<f64>() / per as f64);
    }
    let bm: f64 = batch_means.iter().sum::<f64>() / b as f64;
    let var: f64 =
        batch_means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>() / (b.saturating_sub(1).max(1)) as f64;
    let se = (var / b as f64).sqrt();
    let lo = (mean - 1.96 * se).max(0.0).sqrt();
    let hi = (mean + 1.96 * se).sqrt();
    Estimate {
        value: mean.sqrt(),
        ci_low: Some(lo),
        ci_high: Some(hi),
        mode: "montecarlo".into(),
        seed,
    }
}

/// `(E || sum_j eps_j x_j ||^2)^{1/2}` over independent signs.
pub fn rademacher_average(
    family: &VectorFamily,
    mode: AverageMode,
    seed: u64,
) -> Result<Estimate> {
    let xs = &family.vectors;
    if xs.is_empty() {
        return Ok(Estimate::exact(0.0));
    }
    match mode {
        AverageMode::Exact => {
            let j = xs.len();
            if j > 20 {
                return Err(HfcError::InvalidParameter(format!(
                    "exact mode limited to 20 vectors, got {j}"
                )));
            }
            // fix the first sign by symmetry
            let patterns: u64 = 1 << (j - 1);
            let mut acc = 0.0f64;
            let mut sum: CVector = Array1::zeros(family.space.dim);
            for pat in 0..patterns {
                sum.fill(C64::new(0.0, 0.0));
                for (idx, x) in xs.iter().enumerate() {
                    let s = if idx == 0 || (pat >> (idx - 1)) & 1 == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    sum.iter_mut().zip(x.iter()).for_each(|(a, b)| *a += b * s);
                }
                let n = family.space.norm(&sum);
                acc += n * n;
            }
            Ok(Estimate::exact((acc / patterns as f64).sqrt()))
        }
        AverageMode::MonteCarlo { samples } => {
            let mut sq = Vec::with_capacity(samples);
            let mut rng = rng_stream(seed, "rademacher", 0);
            for _ in 0..samples {
                let mut sum: CVector = Array1::zeros(family.space.dim);
                for x in xs {
                    let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    sum.iter_mut().zip(x.iter()).for_each(|(a, b)| *a += b * s);
                }
                let n = family.space.norm(&sum);
                sq.push(n * n);
            }
            Ok(batch_means_estimate(&sq, seed))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianMode {
    /// Closed form `(sum ||x_j||^2)^{1/2}`; Euclidean models only.
    ExactHilbert,
    MonteCarlo { samples: usize },
}

/// `(E || sum_j g_j x_j ||^2)^{1/2}` over complex standard Gaussians.
pub fn gaussian_average(family: &VectorFamily, mode: GaussianMode, seed: u64) -> Result<Estimate> {
    let xs = &family.vectors;
    if xs.is_empty() {
        return Ok(Estimate::exact(0.0));
    }
    match mode {
        GaussianMode::ExactHilbert => {
            if !family.space.is_hilbert() {
                return Err(HfcError::InvalidParameter(
                    "exact-hilbert mode requires a Euclidean-equivalent model".into(),
                ));
            }
            let sq: f64 = xs
                .iter()
                .map(|x| {
                    let n = family.space.norm(x);
                    n * n
                })
                .sum();
            Ok(Estimate::exact(sq.sqrt()))
        }
        GaussianMode::MonteCarlo { samples } => {
            let mut sq = Vec::with_capacity(samples);
            let mut rng = rng_stream(seed, "gaussian", 0);
            for _ in 0..samples {
                let mut sum: CVector = Array1::zeros(family.space.dim);
                for x in xs {
                    let g = complex_gaussian(&mut rng);
                    sum.iter_mut().zip(x.iter()).for_each(|(a, b)| *a += b * g);
                }
                let n = family.space.norm(&sum);
                sq.push(n * n);
            }
            Ok(batch_means_estimate(&sq, seed))
        }
    }
}

/// Probe budget for R-bound searches.
#[derive(Debug, Clone, Copy)]
pub struct ProbeBudget {
    pub probes: usize,
    pub max_family: usize,
}

impl Default for ProbeBudget {
    fn default() -> Self {
        ProbeBudget {
            probes: 64,
            max_family: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RBoundReport {
    pub estimate: f64,
    pub witness: Vec<CVector>,
    pub witness_ops: Vec<usize>,
}

/// Lower bound on the R-bound constant of a finite operator family,
/// by maximizing the Rademacher-average ratio over seeded probe families.
///
/// Singleton probes use the norm-attaining vectors of each operator, so the
/// estimate always dominates `max_j ||T_j||` up to the norm-search defect.
pub fn r_bound_estimate(
    operators: &[CMatrix],
    space: &SpaceModel,
    budget: &ProbeBudget,
    seed: u64,
) -> Result<RBoundReport> {
    if operators.is_empty() {
        return Ok(RBoundReport {
            estimate: 0.0,
            witness: vec![],
            witness_ops: vec![],
        });
    }
    for t in operators {
        if t.cols() != space.dim {
            return Err(HfcError::DimensionMismatch(
                "operator does not act on the model space".into(),
            ));
        }
    }
    let mut best = RBoundReport {
        estimate: 0.0,
        witness: vec![],
        witness_ops: vec![],
    };
    let norm_cfg = NormSearchCfg {
        seed,
        ..NormSearchCfg::default()
    };
    // singleton probes at the norm witnesses
    for (j, t) in operators.iter().enumerate() {
        let est = operator_norm(t, space, &norm_cfg);
        let x = est.witness.clone();
        if space.norm(&x) == 0.0 {
            continue;
        }
        let ratio = space.norm(&t.apply(&x)) / space.norm(&x);
        if ratio > best.estimate {
            best = RBoundReport {
                estimate: ratio,
                witness: vec![x],
                witness_ops: vec![j],
            };
        }
    }
    // random multi-vector probes, exact sign enumeration
    for p in 0..budget.probes {
        let mut rng = rng_stream(seed, "rbound_probe", p as u64);
        let fam_size = 1 + (rng.gen::<usize>() % budget.max_family);
        let mut xs = Vec::with_capacity(fam_size);
        let mut txs = Vec::with_capacity(fam_size);
        let mut ops_idx = Vec::with_capacity(fam_size);
        for _ in 0..fam_size {
            let oi = rng.gen::<usize>() % operators.len();
            let x: CVector = Array1::from_iter(
                (0..space.dim).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)),
            );
            txs.push(operators[oi].apply(&x));
            xs.push(x);
            ops_idx.push(oi);
        }
        let denom = rademacher_average(
            &VectorFamily::new(*space, xs.clone())?,
            AverageMode::Exact,
            seed,
        )?
        .value;
        if denom <= f64::MIN_POSITIVE {
            continue;
        }
        let numer = rademacher_average(
            &VectorFamily::new(*space, txs)?,
            AverageMode::Exact,
            seed,
        )?
        .value;
        let ratio = numer / denom;
        if ratio > best.estimate {
            best = RBoundReport {
                estimate: ratio,
                witness: xs,
                witness_ops: ops_idx,
            };
        }
    }
    Ok(best)
}

/// R-bound profile of `{z R(z, A)}` sampled on sector boundary rays.
pub fn r_sectoriality_profile(
    a: &CMatrix,
    space: &SpaceModel,
    angles: &[f64],
    budget: &ProbeBudget,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    use crate::operator::resolvent;
    let mut raw = Vec::with_capacity(angles.len());
    for (ai, &theta) in angles.iter().enumerate() {
        // modest boundary sample: the probe search dominates the cost
        let mut ops = Vec::new();
        let radii = crate::operator::log_radii(a, 24);
        for &r in &radii {
            for sgn in [1.0, -1.0] {
                let z = C64::from_polar(r, sgn * theta);
                let res = resolvent(a, z)?;
                ops.push(res.scale(z));
            }
        }
        let rep = r_bound_estimate(&ops, space, budget, seed ^ (ai as u64) << 32)?;
        raw.push(rep.estimate);
    }
    // estimates at larger angles witness smaller-angle suprema as well
    let mut out = Vec::with_capacity(angles.len());
    let mut running = 0.0f64;
    for i in (0..angles.len()).rev() {
        running = running.max(raw[i]);
        out.push((angles[i], running));
    }
    out.reverse();
    Ok(out)
}

// ---------------------------------------------------------------------------
// gamma-norms of finite-rank maps
// ---------------------------------------------------------------------------

/// Finite-rank map from a weighted grid space into the model space.
///
/// Columns are coordinates against an orthonormal basis of the grid space
/// (grid samples are scaled by square-root weights at construction).
#[derive(Debug, Clone)]
pub struct GammaElement {
    pub space: SpaceModel,
    /// `space.dim x N` matrix; column `j` is `u(e_j)`.
    pub matrix: CMatrix,
}

impl GammaElement {
    pub fn new(space: SpaceModel, matrix: CMatrix) -> Result<Self> {
        if matrix.rows() != space.dim {
            return Err(HfcError::DimensionMismatch(
                "gamma element rows must equal the space dimension".into(),
            ));
        }
        Ok(GammaElement { space, matrix })
    }

    pub fn rank_bound(&self) -> usize {
        self.matrix.cols()
    }

    /// Hilbert-Schmidt norm of the coordinate matrix.
    pub fn hs_norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMode {
    /// Hilbert-Schmidt identity on Euclidean-equivalent models, Monte Carlo otherwise.
    Auto,
    ExactHilbert,
    MonteCarlo { samples: usize },
}

/// Gamma-norm of a finite-rank map: the Gaussian average of its columns
/// against an orthonormal basis of the grid space.
pub fn gamma_norm(u: &GammaElement, mode: GammaMode, seed: u64) -> Result<Estimate> {
    let resolved = match mode {
        GammaMode::Auto => {
            if u.space.is_hilbert() {
                GammaMode::ExactHilbert
            } else {
                GammaMode::MonteCarlo { samples: 4096 }
            }
        }
        m => m,
    };
    match resolved {
        GammaMode::ExactHilbert => {
            if !u.space.is_hilbert() {
                return Err(HfcError::InvalidParameter(
                    "exact gamma-norm requires a Euclidean-equivalent model".into(),
                ));
            }
            Ok(Estimate::exact(u.hs_norm()))
        }
        GammaMode::MonteCarlo { samples } => {
            let n_cols = u.matrix.cols();
            let mut sq = Vec::with_capacity(samples);
            let mut rng = rng_stream(seed, "gamma_norm", 0);
            for _ in 0..samples {
                let g: CVector =
                    Array1::from_iter((0..n_cols).map(|_| complex_gaussian(&mut rng)));
                let v = u.matrix.apply(&g);
                let n = u.space.norm(&v);
                sq.push(n * n);
            }
            Ok(batch_means_estimate(&sq, seed))
        }
        GammaMode::Auto => unreachable!(),
    }
}

/// Tensor extension `S (x) I`: acts on the grid index of `u`.
/// The new coordinate matrix is `U S^T`.
pub fn tensor_extend(s: &CMatrix, u: &GammaElement) -> Result<GammaElement> {
    if s.cols() != u.matrix.cols() {
        return Err(HfcError::DimensionMismatch(
            "grid operator does not match the gamma element".into(),
        ));
    }
    let new = u.matrix.matmul(&s.transpose());
    GammaElement::new(u.space, new)
}

/// Order-3 tensor on `grid_1 (x) grid_2 (x) space`.
#[derive(Debug, Clone)]
pub struct GammaTensor {
    pub space: SpaceModel,
    /// `outer` slices, each a `space.dim x inner` coordinate matrix.
    pub slices: Vec<CMatrix>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IteratedGammaReport {
    pub iterated: f64,
    pub flat: f64,
    pub ratio: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Compares the iterated norm `gamma(H_1; gamma(H_2; X))` with the flat norm
/// `gamma(H_1 (x) H_2; X)` on the finite model.
pub fn iterated_gamma_compare(
    tensor: &GammaTensor,
    seed: u64,
    outer_samples: usize,
) -> Result<IteratedGammaReport> {
    let outer = tensor.slices.len();
    if outer == 0 {
        return Err(HfcError::InvalidParameter("empty tensor".into()));
    }
    let inner = tensor.slices[0].cols();
    let dim = tensor.space.dim;
    // flat: one gamma element over the product grid
    let mut flat_mat = CMatrix::zeros(dim, outer * inner);
    for (i, sl) in tensor.slices.iter().enumerate() {
        for j in 0..inner {
            flat_mat.set_column(i * inner + j, &sl.column(j));
        }
    }
    let flat_elem = GammaElement::new(tensor.space, flat_mat)?;
    let flat = gamma_norm(&flat_elem, GammaMode::Auto, seed ^ 0xf1a7)?.value;

    // iterated: outer Gaussian average of inner gamma-norms
    let iterated_est = if tensor.space.is_hilbert() {
        // both levels collapse to the same l2 sum
        let sq: f64 = tensor
            .slices
            .iter()
            .map(|sl| {
                let f = sl.frobenius_norm();
                f * f
            })
            .sum();
        Estimate::exact(sq.sqrt())
    } else {
        let mut sq = Vec::with_capacity(outer_samples);
        let mut rng = rng_stream(seed, "iterated_outer", 0);
        for k in 0..outer_samples {
            let mut mixed = CMatrix::zeros(dim, inner);
            for sl in tensor.slices.iter() {
                let g = complex_gaussian(&mut rng);
                mixed = mixed.add(&sl.scale(g));
            }
            let elem = GammaElement::new(tensor.space, mixed)?;
            let inner_norm = gamma_norm(
                &elem,
                GammaMode::MonteCarlo { samples: 512 },
                seed ^ (k as u64).wrapping_mul(0x9e3779b97f4a7c15),
            )?
            .value;
            sq.push(inner_norm * inner_norm);
        }
        batch_means_estimate(&sq, seed)
    };
    let iterated = iterated_est.value;
    Ok(IteratedGammaReport {
        iterated,
        flat,
        ratio: if flat > 0.0 { iterated / flat } else { f64::NAN },
        ci_low: iterated_est.ci_low.map(|c| if flat > 0.0 { c / flat } else { f64::NAN }),
        ci_high: iterated_est.ci_high.map(|c| if flat > 0.0 { c / flat } else { f64::NAN }),
    })
}
