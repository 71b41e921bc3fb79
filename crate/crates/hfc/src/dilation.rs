//! Grid dilation of commuting analytic semigroups into commuting shift
//! groups, the transfer inequality back from a dilation, Fourier-multiplier
//! norms of group kernels, Laplace transforms and the bounded regularization
//! of generators.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::config::QuadProfile;
use crate::error::{HfcError, Result};
use crate::linalg::CMatrix;
use crate::operator::CommutingTuple;
use crate::sector::H01Form;
use crate::space::{operator_norm, NormSearchCfg};

/// Uniform grid on `[-S, S]^d` with step `h`; `S/h` must be an integer, so
/// index shifts map the node set into itself with zero fill at the boundary.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LineGrid {
    pub d: usize,
    pub h: f64,
    pub s_extent: f64,
}

impl LineGrid {
    pub fn new(d: usize, h: f64, s_extent: f64) -> Result<Self> {
        if !(h > 0.0 && s_extent > 0.0) {
            return Err(HfcError::InvalidParameter("need h > 0 and S > 0".into()));
        }
        let ratio = s_extent / h;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(HfcError::InvalidParameter(format!(
                "S/h = {ratio} is not an integer"
            )));
        }
        Ok(LineGrid { d, h, s_extent })
    }

    /// Step count per half axis: `S/h`.
    pub fn steps(&self) -> usize {
        (self.s_extent / self.h).round() as usize
    }

    /// Nodes on the positive part `[0, S]` of one axis.
    pub fn positive_nodes(&self) -> usize {
        self.steps() + 1
    }

    /// Nodes on the full axis `[-S, S]`.
    pub fn full_nodes(&self) -> usize {
        2 * self.steps() + 1
    }
}

/// Grid dilation of a commuting tuple of analytic semigroups: the embedding
/// `J`, the compression `Q = 2^d J~^*`, and index-shift groups.
#[derive(Debug, Clone)]
pub struct DilationSystem {
    pub grid: LineGrid,
    pub tuple: CommutingTuple,
    /// Principal square roots of the generators.
    sqrts: Vec<CMatrix>,
    /// One-step semigroups `exp(-h A_k)`.
    steps: Vec<CMatrix>,
    pub j_norm: f64,
    pub q_norm: f64,
    /// `exp(-2 sigma_min S)`: the reported boundary-truncation scale.
    pub truncation_scale: f64,
}

fn sigma_min(tuple: &CommutingTuple) -> Result<f64> {
    let mut sigma = f64::INFINITY;
    for a in &tuple.operators {
        for l in a.eigenvalues()? {
            sigma = sigma.min(l.re);
        }
    }
    Ok(sigma)
}

/// Gram matrix of the embedding: nested one-axis sums of
/// `h M_k(s)^* G M_k(s)` with `M_k(s) = A_k^{1/2} exp(-s A_k)`.
fn embedding_gram(
    sqrts: &[CMatrix],
    steps: &[CMatrix],
    grid: &LineGrid,
) -> CMatrix {
    let n = sqrts[0].dim();
    let mut g = CMatrix::identity(n);
    for (rt, e) in sqrts.iter().zip(steps.iter()) {
        let mut acc = CMatrix::zeros(n, n);
        let mut w = rt.clone(); // M_k(j h) = A_k^{1/2} E_k^j
        for _ in 0..=grid.steps() {
            let wg = w.adjoint().matmul(&g).matmul(&w);
            acc = acc.add(&wg);
            w = w.matmul(e);
        }
        g = acc.scale(C64::new(grid.h, 0.0));
    }
    g
}

/// Builds the dilation of an invertible commuting tuple with all estimated
/// types below `pi/2`. Tuples with kernel components must be restricted
/// through the ergodic splitting first.
pub fn build_dilation(tuple: &CommutingTuple, grid: LineGrid) -> Result<DilationSystem> {
    if grid.d != tuple.d() {
        return Err(HfcError::DimensionMismatch("grid arity vs tuple".into()));
    }
    let omegas = tuple.estimated_types()?;
    for (k, &w) in omegas.iter().enumerate() {
        if w >= std::f64::consts::FRAC_PI_2 {
            return Err(HfcError::TypeTooLarge(format!(
                "operator {} has estimated type {w:.4} >= pi/2",
                k + 1
            )));
        }
    }
    let mut sqrts = Vec::with_capacity(tuple.d());
    let mut steps = Vec::with_capacity(tuple.d());
    for a in &tuple.operators {
        sqrts.push(a.sqrtm()?); // BranchCutViolation on kernel eigenvalues
        steps.push(a.scale(C64::new(-grid.h, 0.0)).expm());
    }
    let g = embedding_gram(&sqrts, &steps, &grid);
    let (evals, _) = g.eigh()?;
    let j_norm = evals.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    let adjoint = tuple.adjoint();
    let adj_sqrts: Vec<CMatrix> = sqrts.iter().map(|m| m.adjoint()).collect();
    let adj_steps: Vec<CMatrix> = adjoint
        .operators
        .iter()
        .map(|a| a.scale(C64::new(-grid.h, 0.0)).expm())
        .collect();
    let g_adj = embedding_gram(&adj_sqrts, &adj_steps, &grid);
    let (evals, _) = g_adj.eigh()?;
    let q_norm = 2f64.powi(tuple.d() as i32)
        * evals.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    let truncation_scale = (-2.0 * sigma_min(tuple)? * grid.s_extent).exp();
    Ok(DilationSystem {
        grid,
        tuple: tuple.clone(),
        sqrts,
        steps,
        j_norm,
        q_norm,
        truncation_scale,
    })
}

impl DilationSystem {
    /// `Q U^1_{t_1} ... U^d_{t_d} J` as an operator on the base space: the
    /// product over coordinates of `2 h sum_j A_k exp(-(2 j h + t_k) A_k)`.
    pub fn compressed_shift(&self, times: &[f64]) -> Result<CMatrix> {
        if times.len() != self.tuple.d() {
            return Err(HfcError::DimensionMismatch("times arity".into()));
        }
        let n = self.tuple.dim();
        let h = self.grid.h;
        let mut out = CMatrix::identity(n);
        for (k, &t) in times.iter().enumerate() {
            if t < 0.0 || t > self.grid.s_extent {
                return Err(HfcError::InvalidParameter(format!(
                    "time {t} outside [0, S]"
                )));
            }
            let steps_t = (t / h).round();
            if (t / h - steps_t).abs() > 1e-9 {
                return Err(HfcError::InvalidParameter(format!(
                    "time {t} is not a grid multiple of h = {h}"
                )));
            }
            let a = &self.tuple.operators[k];
            // factor = 2 h A e^{-tA} sum_{j=0}^{N_t} P^j, P = e^{-2hA}
            let n_t = ((self.grid.s_extent - t) / h).round() as u64;
            let p = self.steps[k].matmul(&self.steps[k]);
            let geom = geometric_sum(&p, n_t)?;
            let e_t = a.scale(C64::new(-t, 0.0)).expm();
            let factor = a
                .matmul(&e_t)
                .matmul(&geom)
                .scale(C64::new(2.0 * h, 0.0));
            out = out.matmul(&factor);
        }
        Ok(out)
    }

    /// Index shifts with zero fill never increase the grid norm; the shift
    /// groups of the dilation are isometric up to the reported boundary
    /// leakage.
    pub fn shift_power_bound(&self) -> f64 {
        1.0
    }

    /// Persisted form: grid metadata, the materialized `J` and `Q` blocks,
    /// and the symbolic shift action. One-coordinate systems only.
    pub fn to_json(&self, max_rows: usize) -> Result<serde_json::Value> {
        let j = self.materialize_j(max_rows)?;
        let q = self.materialize_q(max_rows)?;
        Ok(serde_json::json!({
            "grid": {"h": self.grid.h, "S": self.grid.s_extent},
            "J": serde_json::to_value(&j).expect("matrix serializes"),
            "Q": serde_json::to_value(&q).expect("matrix serializes"),
            "shift": "index",
        }))
    }

    /// Materializes `Q = 2^d J~^*` (columns indexed by grid node then payload
    /// coordinate). One coordinate only.
    pub fn materialize_q(&self, max_cols: usize) -> Result<CMatrix> {
        if self.grid.d != 1 {
            return Err(HfcError::InvalidParameter(
                "matrix export of Q is one-coordinate only".into(),
            ));
        }
        let n = self.tuple.dim();
        let nodes = self.grid.positive_nodes();
        if nodes * n > max_cols {
            return Err(HfcError::InvalidParameter(format!(
                "Q would have {} columns; raise the export guard",
                nodes * n
            )));
        }
        let mut q = CMatrix::zeros(n, nodes * n);
        let scale = C64::new(2f64.powi(self.grid.d as i32) * self.grid.h.sqrt(), 0.0);
        let mut m = self.sqrts[0].clone();
        for node in 0..nodes {
            for i in 0..n {
                for c in 0..n {
                    q.set(i, node * n + c, m.get(i, c) * scale);
                }
            }
            m = m.matmul(&self.steps[0]);
        }
        Ok(q)
    }

    /// Materializes `J` (rows indexed by grid node then payload coordinate).
    /// Guarded to one coordinate and moderate grids.
    pub fn materialize_j(&self, max_rows: usize) -> Result<CMatrix> {
        if self.grid.d != 1 {
            return Err(HfcError::InvalidParameter(
                "matrix export of J is one-coordinate only".into(),
            ));
        }
        let n = self.tuple.dim();
        let nodes = self.grid.positive_nodes();
        if nodes * n > max_rows {
            return Err(HfcError::InvalidParameter(format!(
                "J would have {} rows; raise the export guard",
                nodes * n
            )));
        }
        let mut j = CMatrix::zeros(nodes * n, n);
        let sw = C64::new(self.grid.h.sqrt(), 0.0);
        let mut m = self.sqrts[0].clone();
        for node in 0..nodes {
            for i in 0..n {
                for c in 0..n {
                    j.set(node * n + i, c, m.get(i, c) * sw);
                }
            }
            m = m.matmul(&self.steps[0]);
        }
        Ok(j)
    }
}

/// `sum_{j=0}^{n} P^j` by binary splitting:
/// `S(2m+1) = S(m) (I + P^{m+1})` and padding with one extra term.
fn geometric_sum(p: &CMatrix, n: u64) -> Result<CMatrix> {
    let dim = p.dim();
    if n == 0 {
        return Ok(CMatrix::identity(dim));
    }
    let half = geometric_sum(p, (n - 1) / 2)?;
    let p_pow = matrix_power(p, (n - 1) / 2 + 1);
    let mut s = half.add(&half.matmul(&p_pow));
    if n % 2 == 0 {
        s = s.add(&matrix_power(p, n));
    }
    Ok(s)
}

fn matrix_power(p: &CMatrix, mut e: u64) -> CMatrix {
    let mut base = p.clone();
    let mut acc = CMatrix::identity(p.dim());
    while e > 0 {
        if e & 1 == 1 {
            acc = acc.matmul(&base);
        }
        base = base.matmul(&base);
        e >>= 1;
    }
    acc
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationReport {
    pub times: Vec<Vec<f64>>,
    /// `|| T_t - Q U_t J ||` per requested time.
    pub defects: Vec<f64>,
    pub max_defect: f64,
    pub truncation_scale: f64,
}

/// Verifies the semigroup factorization at grid times.
pub fn verify_factorization(
    system: &DilationSystem,
    times: &[Vec<f64>],
) -> Result<FactorizationReport> {
    let n = system.tuple.dim();
    let mut defects = Vec::with_capacity(times.len());
    for t in times {
        let mut semigroup = CMatrix::identity(n);
        for (k, &tk) in t.iter().enumerate() {
            semigroup =
                semigroup.matmul(&system.tuple.operators[k].scale(C64::new(-tk, 0.0)).expm());
        }
        let compressed = system.compressed_shift(t)?;
        defects.push(semigroup.sub(&compressed).spectral_norm());
    }
    let max_defect = defects.iter().cloned().fold(0.0, f64::max);
    Ok(FactorizationReport {
        times: times.to_vec(),
        defects,
        max_defect,
        truncation_scale: system.truncation_scale,
    })
}

// ---------------------------------------------------------------------------
// groups and power bounds
// ---------------------------------------------------------------------------

/// A commuting tuple of invertible matrices as unit steps of discrete groups.
#[derive(Debug, Clone)]
pub struct GroupTuple {
    pub d: usize,
    pub step: f64,
    pub unit_steps: Vec<CMatrix>,
    pub generators: Option<Vec<CMatrix>>,
}

impl GroupTuple {
    pub fn new(step: f64, unit_steps: Vec<CMatrix>) -> Result<Self> {
        if unit_steps.is_empty() || step <= 0.0 {
            return Err(HfcError::InvalidParameter("empty group tuple".into()));
        }
        let dim = unit_steps[0].dim();
        for u in &unit_steps {
            if u.dim() != dim {
                return Err(HfcError::DimensionMismatch("group dimensions".into()));
            }
            u.inverse().map_err(|_| {
                HfcError::InvalidParameter("unit step is not invertible".into())
            })?;
        }
        for i in 0..unit_steps.len() {
            for j in (i + 1)..unit_steps.len() {
                let c = unit_steps[i]
                    .matmul(&unit_steps[j])
                    .sub(&unit_steps[j].matmul(&unit_steps[i]))
                    .spectral_norm();
                let scale = unit_steps[i].spectral_norm() * unit_steps[j].spectral_norm();
                if c > 1e-9 * scale.max(1e-300) {
                    return Err(HfcError::InvalidParameter(
                        "group steps do not commute".into(),
                    ));
                }
            }
        }
        Ok(GroupTuple {
            d: unit_steps.len(),
            step,
            unit_steps,
            generators: None,
        })
    }

    pub fn with_generators(mut self, generators: Vec<CMatrix>) -> Self {
        self.generators = Some(generators);
        self
    }

    /// Negative generators `B_k = -log(U_k)/h` through the principal branch.
    pub fn negative_generators(&self) -> Result<Vec<CMatrix>> {
        if let Some(g) = &self.generators {
            return Ok(g.clone());
        }
        let mut out = Vec::with_capacity(self.d);
        for u in &self.unit_steps {
            let (vals, vecs) = u.eig()?;
            crate::linalg::branch_cut_check(&vals)?;
            let logs: Vec<C64> = vals
                .iter()
                .map(|l| -l.ln() / C64::new(self.step, 0.0))
                .collect();
            let vinv = vecs.inverse().map_err(|_| {
                HfcError::NotSimultaneouslyDiagonalizable(
                    "unit step is not diagonalizable".into(),
                )
            })?;
            out.push(vecs.matmul(&CMatrix::diag(&logs)).matmul(&vinv));
        }
        Ok(out)
    }

    /// `sup_{|m| <= max_power} || U_k^m ||` over all coordinates.
    pub fn power_bound(&self, max_power: u32) -> f64 {
        let mut bound = 1.0f64;
        for u in &self.unit_steps {
            let uinv = u.inverse().expect("validated invertible");
            for base in [u.clone(), uinv] {
                let mut p = CMatrix::identity(u.dim());
                for _ in 0..max_power {
                    p = p.matmul(&base);
                    bound = bound.max(p.spectral_norm());
                }
            }
        }
        bound
    }
}

// ---------------------------------------------------------------------------
// sampled kernels, Laplace transforms, multiplier norms
// ---------------------------------------------------------------------------

/// Finitely supported kernel on the grid `(h Z)^d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledKernel {
    pub d: usize,
    pub h: f64,
    /// `(index vector, value)`; the time is `index * h`.
    pub support: Vec<(Vec<i64>, [f64; 2])>,
}

impl SampledKernel {
    pub fn new(d: usize, h: f64, support: Vec<(Vec<i64>, C64)>) -> Result<Self> {
        if h <= 0.0 {
            return Err(HfcError::InvalidParameter("h > 0".into()));
        }
        for (idx, _) in &support {
            if idx.len() != d {
                return Err(HfcError::DimensionMismatch("kernel index arity".into()));
            }
        }
        Ok(SampledKernel {
            d,
            h,
            support: support
                .into_iter()
                .map(|(i, v)| (i, [v.re, v.im]))
                .collect(),
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[i64], C64)> + '_ {
        self.support
            .iter()
            .map(|(i, v)| (i.as_slice(), C64::new(v[0], v[1])))
    }

    /// Cell volume `h^d` of one grid node.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Continuous-transform sample `b^(xi) = sum b(t) e^{-i <t, xi>} h^d`.
    pub fn fourier(&self, xi: &[f64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (idx, v) in self.entries() {
            let phase: f64 = idx
                .iter()
                .zip(xi.iter())
                .map(|(&i, &x)| i as f64 * self.h * x)
                .sum();
            acc += v * C64::from_polar(1.0, -phase);
        }
        acc * self.cell()
    }
}

/// Discretized one-coordinate family `e^{-rate t} e^{i xi_0 t}` on `(h Z)_+`,
/// truncated where the envelope drops below 1e-9. Modulations move the
/// transform peak to `xi_0`, which lets a kernel family witness the spectrum
/// of a group.
pub fn modulated_exponential_kernel(h: f64, rate: f64, xi0: f64) -> Result<SampledKernel> {
    if rate <= 0.0 {
        return Err(HfcError::InvalidParameter("rate > 0".into()));
    }
    let cutoff = (9.0 * std::f64::consts::LN_10 / rate / h).ceil() as i64;
    let support: Vec<(Vec<i64>, C64)> = (0..=cutoff)
        .map(|j| {
            let t = j as f64 * h;
            (vec![j], C64::from_polar((-rate * t).exp(), xi0 * t))
        })
        .collect();
    SampledKernel::new(1, h, support)
}

/// Grid quadrature of the Laplace transform
/// `int beta(t) prod exp(-z_k t_k) dt` over the positive orthant.
pub fn laplace_transform(beta: &SampledKernel, z: &[C64]) -> Result<C64> {
    if z.len() != beta.d {
        return Err(HfcError::DimensionMismatch("laplace arity".into()));
    }
    for zk in z {
        if zk.re < 0.0 {
            return Err(HfcError::DomainViolation(
                "laplace transform needs Re z >= 0".into(),
            ));
        }
    }
    let mut acc = C64::new(0.0, 0.0);
    for (idx, v) in beta.entries() {
        if idx.iter().any(|&i| i < 0) {
            return Err(HfcError::InvalidParameter(
                "laplace kernel must live on the positive orthant".into(),
            ));
        }
        let mut factor = C64::new(1.0, 0.0);
        for (k, &i) in idx.iter().enumerate() {
            factor *= (-z[k] * (i as f64 * beta.h)).exp();
        }
        acc += v * factor;
    }
    Ok(acc * beta.cell())
}

/// Yosida-style bounded regularization `eps I + B (I + eps B)^{-1}`.
pub fn yosida_regularize(b: &CMatrix, eps: f64) -> Result<CMatrix> {
    if eps <= 0.0 {
        return Err(HfcError::InvalidParameter("eps > 0".into()));
    }
    let n = b.dim();
    let m = CMatrix::identity(n).add(&b.scale(C64::new(eps, 0.0)));
    let inv = m.inverse().map_err(|_| {
        HfcError::SingularResolvent(format!("-1/eps = {} is an eigenvalue", -1.0 / eps))
    })?;
    Ok(CMatrix::identity(n)
        .scale(C64::new(eps, 0.0))
        .add(&b.matmul(&inv)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplierMode {
    /// Periodic wrap: shifts are exactly diagonalized by the DFT.
    Circulant,
    /// Zero fill at the boundary; the operator norm comes from power
    /// iteration and the circulant discrepancy is reported.
    ZeroPadded,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplierReport {
    pub mode: MultiplierMode,
    /// Norm of `sum_t b(t) h^d U_t` on the scalar-payload grid.
    pub operator_norm: f64,
    /// `sup |b^|` over the frequency grid.
    pub symbol_sup: f64,
    pub grid_nodes: usize,
}

/// Operator norm of the kernel average of shifts against the symbol sup.
///
/// Circulant mode: eigenvalues are read off by applying the operator to a
/// delta vector and transforming; the symbol side evaluates the analytic
/// transform on the same frequency grid.
pub fn multiplier_norm(
    kernel: &SampledKernel,
    nodes_per_axis: usize,
    mode: MultiplierMode,
) -> Result<MultiplierReport> {
    if kernel.d > 2 {
        return Err(HfcError::InvalidParameter(
            "multiplier grids supported up to two coordinates".into(),
        ));
    }
    let n = nodes_per_axis;
    if n < 4 {
        return Err(HfcError::InvalidParameter("need at least 4 nodes".into()));
    }
    let total = n.pow(kernel.d as u32);
    let cell = kernel.cell();
    // apply the shift average to a vector indexed by the grid
    let apply = |x: &[C64], out: &mut [C64], wrap: bool| {
        for o in out.iter_mut() {
            *o = C64::new(0.0, 0.0);
        }
        for (idx, v) in kernel.entries() {
            let shift: Vec<i64> = idx.to_vec();
            for flat in 0..total {
                // decompose flat index
                let (mut rem, mut src_flat, mut valid) = (flat, 0usize, true);
                let mut stride = 1usize;
                for k in 0..kernel.d {
                    let i = (rem % n) as i64;
                    rem /= n;
                    let j = i + shift[k];
                    let j = if wrap { j.rem_euclid(n as i64) } else { j };
                    if j < 0 || j >= n as i64 {
                        valid = false;
                        break;
                    }
                    src_flat += (j as usize) * stride;
                    stride *= n;
                }
                if valid {
                    out[flat] += v * cell * x[src_flat];
                }
            }
        }
    };
    let operator_norm = match mode {
        MultiplierMode::Circulant => {
            // first column of the circulant: image of the delta at 0,
            // eigenvalues by discrete transform over each axis
            let mut delta = vec![C64::new(0.0, 0.0); total];
            delta[0] = C64::new(1.0, 0.0);
            let mut col = vec![C64::new(0.0, 0.0); total];
            apply(&delta, &mut col, true);
            // eigenvalue at frequency m: sum_s col[s] e^{-2 pi i <m, s>/n}
            // (the operator is circulant in each axis)
            let mut best = 0.0f64;
            for mflat in 0..total {
                let mut acc = C64::new(0.0, 0.0);
                for sflat in 0..total {
                    let (mut mr, mut sr, mut phase) = (mflat, sflat, 0.0f64);
                    for _ in 0..kernel.d {
                        let m = mr % n;
                        let s = sr % n;
                        mr /= n;
                        sr /= n;
                        phase += 2.0 * std::f64::consts::PI * (m * s) as f64 / n as f64;
                    }
                    acc += col[sflat] * C64::from_polar(1.0, -phase);
                }
                best = best.max(acc.norm());
            }
            best
        }
        MultiplierMode::ZeroPadded => {
            // power iteration on Op^* Op with a deterministic start
            let mut x: Vec<C64> = (0..total)
                .map(|i| C64::new(1.0 + (i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()))
                .collect();
            let norm = |v: &[C64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let nx = norm(&x);
            x.iter_mut().for_each(|c| *c /= nx);
            let mut y = vec![C64::new(0.0, 0.0); total];
            let mut est = 0.0f64;
            // adjoint kernel: reversed indices, conjugated values
            let adj = SampledKernel {
                d: kernel.d,
                h: kernel.h,
                support: kernel
                    .support
                    .iter()
                    .map(|(i, v)| (i.iter().map(|x| -x).collect(), [v[0], -v[1]]))
                    .collect(),
            };
            let apply_adj = |x: &[C64], out: &mut [C64]| {
                for o in out.iter_mut() {
                    *o = C64::new(0.0, 0.0);
                }
                for (idx, v) in adj.entries() {
                    for flat in 0..total {
                        let (mut rem, mut src_flat, mut valid) = (flat, 0usize, true);
                        let mut stride = 1usize;
                        for k in 0..adj.d {
                            let i = (rem % n) as i64;
                            rem /= n;
                            let j = i + idx[k];
                            if j < 0 || j >= n as i64 {
                                valid = false;
                                break;
                            }
                            src_flat += (j as usize) * stride;
                            stride *= n;
                        }
                        if valid {
                            out[flat] += v * cell * x[src_flat];
                        }
                    }
                }
            };
            let mut z = vec![C64::new(0.0, 0.0); total];
            for _ in 0..300 {
                apply(&x, &mut y, false);
                apply_adj(&y, &mut z);
                let nz = norm(&z);
                if nz <= f64::MIN_POSITIVE {
                    est = 0.0;
                    break;
                }
                let next = nz.sqrt();
                let rel = (next - est).abs() / next.max(1e-300);
                est = next;
                x.copy_from_slice(&z);
                x.iter_mut().for_each(|c| *c /= nz);
                if rel < 1e-12 {
                    break;
                }
            }
            est
        }
    };
    // symbol side: the analytic transform on the DFT frequency grid
    let mut symbol_sup = 0.0f64;
    let freqs: Vec<f64> = (0..n)
        .map(|m| {
            let m_signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            2.0 * std::f64::consts::PI * m_signed / (n as f64 * kernel.h)
        })
        .collect();
    let mut xi = vec![0.0f64; kernel.d];
    for mflat in 0..total {
        let mut rem = mflat;
        for k in 0..kernel.d {
            xi[k] = freqs[rem % n];
            rem /= n;
        }
        symbol_sup = symbol_sup.max(kernel.fourier(&xi).norm());
    }
    Ok(MultiplierReport {
        mode,
        operator_norm,
        symbol_sup,
        grid_nodes: total,
    })
}

/// Norm of `sum_t b(t) h^d U^{t/h}` for a matrix group against `sup |b^|`.
pub fn group_multiplier_norm(
    group: &GroupTuple,
    kernel: &SampledKernel,
    freq_samples: usize,
) -> Result<(f64, f64)> {
    if kernel.d != group.d {
        return Err(HfcError::DimensionMismatch("kernel arity vs group".into()));
    }
    if (kernel.h - group.step).abs() > 1e-12 * group.step {
        return Err(HfcError::InvalidParameter(
            "kernel step must match the group step".into(),
        ));
    }
    let dim = group.unit_steps[0].dim();
    let mut op = CMatrix::zeros(dim, dim);
    let inverses: Vec<CMatrix> = group
        .unit_steps
        .iter()
        .map(|u| u.inverse().expect("validated"))
        .collect();
    for (idx, v) in kernel.entries() {
        let mut term = CMatrix::identity(dim);
        for (k, &i) in idx.iter().enumerate() {
            let base = if i >= 0 {
                matrix_power(&group.unit_steps[k], i as u64)
            } else {
                matrix_power(&inverses[k], (-i) as u64)
            };
            term = term.matmul(&base);
        }
        op = op.add(&term.scale(v * kernel.cell()));
    }
    let op_norm = op.spectral_norm();
    // symbol sampled over [-pi/h, pi/h]^d
    let nyquist = std::f64::consts::PI / kernel.h;
    let m = freq_samples.max(8);
    let mut sup = 0.0f64;
    let total = m.pow(kernel.d as u32);
    let mut xi = vec![0.0f64; kernel.d];
    for flat in 0..total {
        let mut rem = flat;
        for k in 0..kernel.d {
            let i = rem % m;
            rem /= m;
            xi[k] = -nyquist + 2.0 * nyquist * i as f64 / m as f64;
        }
        sup = sup.max(kernel.fourier(&xi).norm());
    }
    Ok((op_norm, sup))
}

// ---------------------------------------------------------------------------
// transfer and the two-sided equivalence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    /// `||f(A)||` on the base space.
    pub lhs: f64,
    /// `||Q|| ||J||` times the shift-side multiplier bound of `f`.
    pub rhs: f64,
    pub q_norm: f64,
    pub j_norm: f64,
    pub factorization_defect: f64,
    /// Whether the domination holds within the defect slack.
    pub holds: bool,
}

/// Checks the domination `||f(A)|| <= ||Q|| ||J|| ||f(B)||` on a verified
/// dilation, with the shift side computed as a Fourier-multiplier sup.
pub fn transfer_fc(
    form: &H01Form,
    system: &DilationSystem,
    defect_times: &[Vec<f64>],
    profile: QuadProfile,
) -> Result<TransferReport> {
    let d = system.tuple.d();
    for &theta in &form.domain.angles {
        if theta <= std::f64::consts::FRAC_PI_2 {
            return Err(HfcError::AngleOrderViolation(
                "transfer needs domain angles above pi/2 on the shift side".into(),
            ));
        }
    }
    let spectrum = crate::operator::joint_spectral_decompose(&system.tuple).ok();
    let value = crate::contour::fc_auto(form, &system.tuple, spectrum.as_ref(), profile)?;
    let lhs = operator_norm(
        &value,
        &system.tuple.space,
        &NormSearchCfg::default(),
    )
    .value;
    // shift generators have spectrum on the imaginary axis; the multiplier
    // sup of f along i R witnesses ||f(B)|| on the circulant model
    let n_freq = 2048usize;
    let nyquist = std::f64::consts::PI / system.grid.h;
    let mut sup = 0.0f64;
    let full = (1u32 << d) - 1;
    let mut xi = vec![0.0f64; d];
    let per_axis = (n_freq as f64).powf(1.0 / d as f64) as usize;
    let total = per_axis.pow(d as u32);
    for flat in 0..total {
        let mut rem = flat;
        for k in 0..d {
            let i = rem % per_axis;
            rem /= per_axis;
            // logarithmic + linear coverage of [0, nyquist]
            let frac = i as f64 / (per_axis - 1) as f64;
            xi[k] = nyquist * frac * frac * if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let z: Vec<C64> = xi.iter().map(|&x| C64::new(0.0, x)).collect();
        let mask = z
            .iter()
            .enumerate()
            .fold(0u32, |m, (k, zk)| if zk.norm() > 0.0 { m | 1 << k } else { m });
        if let Ok(v) = crate::contour::eval_form_at_tuple(form, &z, mask & full) {
            sup = sup.max(v.norm());
        }
    }
    let fact = verify_factorization(system, defect_times)?;
    let rhs = system.q_norm * system.j_norm * sup;
    let slack = fact.max_defect * (1.0 + lhs);
    Ok(TransferReport {
        lhs,
        rhs,
        q_norm: system.q_norm,
        j_norm: system.j_norm,
        factorization_defect: fact.max_defect,
        holds: lhs <= rhs + slack,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupEquivReport {
    /// Max over the kernel family of operator norm / symbol sup.
    pub multiplier_constant: f64,
    /// Calculus-constant estimate of the negative generators just above pi/2.
    pub fc_constant: f64,
    pub ratio: f64,
}

/// Realizes the multiplier/functional-calculus equivalence for a matrix
/// group as a two-sided numerical comparison.
pub fn group_calculus_equivalence_check(
    group: &GroupTuple,
    kernels: &[SampledKernel],
    cfg: &crate::contour::EnsembleCfg,
    seed: u64,
    profile: QuadProfile,
) -> Result<GroupEquivReport> {
    let mut k_mult = 0.0f64;
    for kernel in kernels {
        let (op, sup) = group_multiplier_norm(group, kernel, 512)?;
        if sup > 1e-12 {
            k_mult = k_mult.max(op / sup);
        }
    }
    let generators = group.negative_generators()?;
    let dim = generators[0].dim();
    let tuple = CommutingTuple::new(
        crate::space::SpaceModel::euclidean(dim),
        generators,
        1e-6,
    )?;
    let theta = std::f64::consts::FRAC_PI_2 + 0.25;
    let domain = crate::sector::SectorDomain::uniform(group.d, theta)?;
    let rep = crate::contour::fc_constant_estimate(&tuple, &domain, cfg, seed, profile)?;
    Ok(GroupEquivReport {
        multiplier_constant: k_mult,
        fc_constant: rep.estimate,
        ratio: if rep.estimate > 0.0 {
            k_mult / rep.estimate
        } else {
            f64::NAN
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SpaceModel;
    use approx::assert_relative_eq;

    const PI: f64 = std::f64::consts::PI;

    fn euc_tuple(ops: Vec<CMatrix>) -> CommutingTuple {
        let dim = ops[0].dim();
        CommutingTuple::new(SpaceModel::euclidean(dim), ops, 1e-9).unwrap()
    }

    #[test]
    fn line_grid_integrality() {
        assert!(LineGrid::new(1, 1e-2, 30.0).is_ok());
        assert!(LineGrid::new(1, 0.3, 1.0).is_err());
    }

    #[test]
    fn scalar_dilation_norms_and_identity() {
        // a = 1: ||J||^2 = int_0^S e^{-2s} ds -> 1/2, Q J -> identity
        let tuple = euc_tuple(vec![CMatrix::diag_real(&[1.0])]);
        let grid = LineGrid::new(1, 1e-3, 20.0).unwrap();
        let sys = build_dilation(&tuple, grid).unwrap();
        assert!((sys.j_norm - 0.5f64.sqrt()).abs() < 2e-3, "J {}", sys.j_norm);
        assert!((sys.q_norm - 2.0 * 0.5f64.sqrt()).abs() < 4e-3, "Q {}", sys.q_norm);
        let qj = sys.compressed_shift(&[0.0]).unwrap();
        let defect = qj.sub(&CMatrix::identity(1)).spectral_norm();
        // left-endpoint rule: the t = 0 defect is h + O(h^2) + truncation
        assert!(defect < 2.0 * grid.h + sys.truncation_scale, "QJ defect {defect}");
        // the 2^d factor exactly cancels the per-coordinate 1/2
        assert_relative_eq!(qj.get(0, 0).re, 1.0, max_relative = 2e-3);
    }

    #[test]
    fn scalar_factorization_defect_small() {
        let tuple = euc_tuple(vec![CMatrix::diag_real(&[1.0])]);
        let grid = LineGrid::new(1, 1e-3, 20.0).unwrap();
        let sys = build_dilation(&tuple, grid).unwrap();
        let rep = verify_factorization(&sys, &[vec![1.0]]).unwrap();
        assert!(rep.max_defect <= 1e-3, "defect {}", rep.max_defect);
        // sanity: T_1 = e^{-1}
        let qj = sys.compressed_shift(&[1.0]).unwrap();
        assert!((qj.get(0, 0).re - (-1.0f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn factorization_defect_shrinks_with_h_and_s() {
        let tuple = euc_tuple(vec![CMatrix::from_real_rows(&[&[1.0, 0.4], &[0.0, 1.5]])]);
        let times = vec![vec![0.5]];
        let defect = |h: f64, s: f64| {
            let sys = build_dilation(&tuple, LineGrid::new(1, h, s).unwrap()).unwrap();
            verify_factorization(&sys, &times).unwrap().max_defect
        };
        let d1 = defect(2e-2, 16.0);
        let d2 = defect(1e-2, 16.0);
        let d3 = defect(1e-2, 32.0);
        assert!(d2 < d1, "h-halving: {d1} -> {d2}");
        assert!(d3 <= d2 + 1e-12, "S-doubling: {d2} -> {d3}");
        // left-endpoint rule: defect scales like O(h)
        assert!(d2 / d1 < 0.7, "expected roughly linear decay, got {}", d2 / d1);
    }

    #[test]
    fn dilation_rejects_wide_type_and_kernels() {
        let wide = euc_tuple(vec![CMatrix::diag(&[C64::from_polar(1.0, PI / 2.0 + 0.1)])]);
        assert!(matches!(
            build_dilation(&wide, LineGrid::new(1, 0.1, 10.0).unwrap()),
            Err(HfcError::TypeTooLarge(_))
        ));
        let kernel = euc_tuple(vec![CMatrix::diag_real(&[0.0, 1.0])]);
        assert!(matches!(
            build_dilation(&kernel, LineGrid::new(1, 0.1, 10.0).unwrap()),
            Err(HfcError::BranchCutViolation(_))
        ));
    }

    #[test]
    fn commuting_pair_factorization() {
        let tuple = euc_tuple(vec![
            CMatrix::diag_real(&[1.0, 2.0]),
            CMatrix::diag_real(&[1.5, 0.8]),
        ]);
        let grid = LineGrid::new(2, 1e-3, 15.0).unwrap();
        let sys = build_dilation(&tuple, grid).unwrap();
        let rep = verify_factorization(&sys, &[vec![0.5, 1.0], vec![1.0, 0.5]]).unwrap();
        assert!(rep.max_defect < 5e-3, "defect {}", rep.max_defect);
    }

    #[test]
    fn kernel_component_semigroup_is_identity() {
        // on the zero-eigenvalue component the semigroup is the identity, so
        // the trivial factorization (J = Q = U = I) dilates it; the split
        // convention routes such components around `build_dilation`
        let a = CMatrix::diag_real(&[0.0, 1.0]);
        let tuple = euc_tuple(vec![a.clone()]);
        let split = crate::operator::ergodic_split(&tuple).unwrap();
        let kernel_proj = split.projections[&0b0].clone();
        let t_half = a.scale(C64::new(-0.5, 0.0)).expm();
        let restricted = t_half.matmul(&kernel_proj);
        assert!(restricted.rel_diff(&kernel_proj) < 1e-14);
    }

    #[test]
    fn group_power_bounds() {
        let u = CMatrix::diag(&[C64::from_polar(1.0, 0.3)]);
        let g = GroupTuple::new(1.0, vec![u]).unwrap();
        assert!((g.power_bound(20) - 1.0).abs() < 1e-12);
        let grow = CMatrix::diag_real(&[2.0]);
        let g = GroupTuple::new(1.0, vec![grow]).unwrap();
        assert_relative_eq!(g.power_bound(5), 32.0, max_relative = 1e-12);
    }

    #[test]
    fn laplace_transform_examples() {
        // beta = e^{-t}: int e^{-(z+1)t} dt = 1/2 at z = 1, mass 1 at z = 0
        let h = 1e-3;
        let n = 20_000i64;
        let support: Vec<(Vec<i64>, C64)> = (0..n)
            .map(|j| (vec![j], C64::new((-(j as f64) * h).exp(), 0.0)))
            .collect();
        let beta = SampledKernel::new(1, h, support).unwrap();
        let v = laplace_transform(&beta, &[C64::new(1.0, 0.0)]).unwrap();
        assert!((v.re - 0.5).abs() < 2e-3, "L(1) = {v}");
        let mass = laplace_transform(&beta, &[C64::new(0.0, 0.0)]).unwrap();
        assert!((mass.re - 1.0).abs() < 2e-3, "L(0) = {mass}");
        // 2-d product kernel factorizes
        let support2: Vec<(Vec<i64>, C64)> = (0..200i64)
            .flat_map(|a| {
                (0..200i64).map(move |b| {
                    (
                        vec![a, b],
                        C64::new((-(a as f64) * 0.05 - (b as f64) * 0.05).exp(), 0.0),
                    )
                })
            })
            .collect();
        let beta2 = SampledKernel::new(2, 0.05, support2).unwrap();
        let z = [C64::new(1.0, 0.0), C64::new(2.0, 0.0)];
        let v2 = laplace_transform(&beta2, &z).unwrap();
        let support1a: Vec<(Vec<i64>, C64)> = (0..200i64)
            .map(|a| (vec![a], C64::new((-(a as f64) * 0.05).exp(), 0.0)))
            .collect();
        let b1 = SampledKernel::new(1, 0.05, support1a).unwrap();
        let va = laplace_transform(&b1, &[z[0]]).unwrap();
        let vb = laplace_transform(&b1, &[z[1]]).unwrap();
        assert!((v2 - va * vb).norm() < 1e-10 * v2.norm());
    }

    #[test]
    fn yosida_examples() {
        let b = CMatrix::diag_real(&[1.0]);
        let r = yosida_regularize(&b, 0.1).unwrap();
        assert_relative_eq!(r.get(0, 0).re, 0.1 + 1.0 / 1.1, max_relative = 1e-14);
        let zero = CMatrix::zeros(2, 2);
        let r = yosida_regularize(&zero, 0.5).unwrap();
        assert!(r.rel_diff(&CMatrix::identity(2).scale(C64::new(0.5, 0.0))) < 1e-15);
        // eps -> 0 convergence is O(eps)
        let b = CMatrix::diag_real(&[1.0, 2.0]);
        let mut last = f64::INFINITY;
        let mut ratios = Vec::new();
        for eps in [0.1, 0.05, 0.025] {
            let err = yosida_regularize(&b, eps).unwrap().sub(&b).spectral_norm();
            if last.is_finite() {
                ratios.push(err / last);
            }
            last = err;
        }
        for r in ratios {
            assert!((r - 0.5).abs() < 0.2, "O(eps) ratio {r}");
        }
        // composition rule on diagonalizable instances:
        // L_a(h_eps(B)) = (L_a o h_eps)(B)
        let eps = 0.3;
        let breg = yosida_regularize(&b, eps).unwrap();
        let support: Vec<(Vec<i64>, C64)> = (0..2000i64)
            .map(|j| (vec![j], C64::new((-(j as f64) * 0.01 * 0.7).exp(), 0.0)))
            .collect();
        let a_kernel = SampledKernel::new(1, 0.01, support).unwrap();
        // direct: sum a(t) e^{-t B_eps} h
        let mut direct = CMatrix::zeros(2, 2);
        for (idx, v) in a_kernel.entries() {
            let t = idx[0] as f64 * a_kernel.h;
            direct = direct.add(&breg.scale(C64::new(-t, 0.0)).expm().scale(v * a_kernel.h));
        }
        // composed: per eigenvalue of B, evaluate L_a(h_eps(lambda))
        let la = |z: C64| {
            let mut acc = C64::new(0.0, 0.0);
            for (idx, v) in a_kernel.entries() {
                let t = idx[0] as f64 * a_kernel.h;
                acc += v * (-z * t).exp() * a_kernel.h;
            }
            acc
        };
        let h_eps = |z: C64| C64::new(eps, 0.0) + z / (C64::new(1.0, 0.0) + z * eps);
        let composed = CMatrix::diag(&[la(h_eps(C64::new(1.0, 0.0))), la(h_eps(C64::new(2.0, 0.0)))]);
        assert!(direct.rel_diff(&composed) < 1e-8);
    }

    #[test]
    fn multiplier_delta_kernel() {
        let kernel = SampledKernel::new(1, 0.5, vec![(vec![0], C64::new(1.0, 0.0))]).unwrap();
        let rep = multiplier_norm(&kernel, 64, MultiplierMode::Circulant).unwrap();
        assert_relative_eq!(rep.operator_norm, 0.5, max_relative = 1e-12);
        assert_relative_eq!(rep.symbol_sup, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn multiplier_circulant_equals_symbol() {
        let h = 0.25;
        let mut support = Vec::new();
        let mut rng = crate::stochastic::rng_stream(9, "kernel", 0);
        use rand::Rng;
        for j in -6i64..=6 {
            support.push((
                vec![j],
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
            ));
        }
        let kernel = SampledKernel::new(1, h, support).unwrap();
        let rep = multiplier_norm(&kernel, 128, MultiplierMode::Circulant).unwrap();
        assert!(
            (rep.operator_norm - rep.symbol_sup).abs() <= 1e-10 * rep.symbol_sup,
            "op {} symbol {}",
            rep.operator_norm,
            rep.symbol_sup
        );
    }

    #[test]
    fn multiplier_zero_padded_close_to_circulant() {
        // kernel supported in the inner half of the grid
        let h = 0.5;
        let support: Vec<(Vec<i64>, C64)> = (0..24i64)
            .map(|j| (vec![j], C64::new((-(j as f64) * h).exp(), 0.0)))
            .collect();
        let kernel = SampledKernel::new(1, h, support).unwrap();
        let rep = multiplier_norm(&kernel, 512, MultiplierMode::ZeroPadded).unwrap();
        assert!(
            (rep.operator_norm - rep.symbol_sup).abs() <= 0.02 * rep.symbol_sup,
            "op {} symbol {}",
            rep.operator_norm,
            rep.symbol_sup
        );
    }

    #[test]
    fn exponential_kernel_symbol_approaches_one() {
        // b(t) = e^{-t} 1_{t >= 0}: sup |b^| at 0 -> 1 as h -> 0
        for (h, tol) in [(0.1, 0.06), (0.01, 0.006)] {
            let m = (20.0 / h) as i64;
            let support: Vec<(Vec<i64>, C64)> = (0..m)
                .map(|j| (vec![j], C64::new((-(j as f64) * h).exp(), 0.0)))
                .collect();
            let kernel = SampledKernel::new(1, h, support).unwrap();
            let rep = multiplier_norm(&kernel, 256, MultiplierMode::Circulant).unwrap();
            assert!((rep.symbol_sup - 1.0).abs() < tol, "h={h}: {}", rep.symbol_sup);
            assert!(
                (rep.operator_norm - rep.symbol_sup).abs() <= 1e-10 * rep.symbol_sup
            );
        }
    }

    #[test]
    fn transfer_inequality_on_scalar_dilation() {
        let tuple = euc_tuple(vec![CMatrix::diag_real(&[1.0])]);
        let grid = LineGrid::new(1, 1e-2, 20.0).unwrap();
        let sys = build_dilation(&tuple, grid).unwrap();
        // f = Phi_1 declared above pi/2
        let form = H01Form::from_function(crate::sector::phi_m(1, 0.6 * PI).unwrap());
        let rep = transfer_fc(&form, &sys, &[vec![0.0], vec![1.0]], QuadProfile::Default).unwrap();
        // ||Q|| ||J|| = 1 and sup over iR of |Phi_1| = 1/2 >= Phi_1(1) = 1/4
        assert!(rep.holds, "transfer violated: {rep:?}");
        assert!((rep.lhs - 0.25).abs() < 1e-6);
        assert!(rep.rhs > rep.lhs);
    }

    #[test]
    fn transfer_constant_function_consistency() {
        let tuple = euc_tuple(vec![CMatrix::diag_real(&[1.0, 0.5])]);
        let grid = LineGrid::new(1, 1e-2, 20.0).unwrap();
        let sys = build_dilation(&tuple, grid).unwrap();
        let form = H01Form::constant(
            crate::sector::SectorDomain::uniform(1, 0.6 * PI).unwrap(),
            C64::new(1.0, 0.0),
        );
        let rep = transfer_fc(&form, &sys, &[vec![0.0]], QuadProfile::Default).unwrap();
        // ||I|| = 1 <= ||Q|| ||J|| * 1 within the defect slack
        assert!(rep.holds, "constant transfer: {rep:?}");
    }

    #[test]
    fn group_equivalence_unitary_diagonal() {
        let h = 0.2;
        let u = CMatrix::diag(&[
            C64::from_polar(1.0, -0.4 * h),
            C64::from_polar(1.0, 0.9 * h),
        ]);
        let group = GroupTuple::new(h, vec![u]).unwrap();
        // kernel family: exponentials modulated onto the group frequencies
        let mut kernels = Vec::new();
        for xi0 in [0.0f64, -0.4, 0.4, 0.9, -0.9] {
            kernels.push(modulated_exponential_kernel(h, 1.0, xi0).unwrap());
        }
        let cfg = crate::contour::EnsembleCfg {
            size: 12,
            max_atoms: 4,
            ..Default::default()
        };
        let rep = group_calculus_equivalence_check(&group, &kernels, &cfg, 3, QuadProfile::Fast)
            .unwrap();
        assert!(
            (rep.multiplier_constant - 1.0).abs() < 0.05,
            "K_mult {}",
            rep.multiplier_constant
        );
        assert!(
            (rep.fc_constant - 1.0).abs() < 0.05,
            "K_fc {}",
            rep.fc_constant
        );
    }

    #[test]
    fn partial_kernel_regularization() {
        // a kernel on a coordinate subset extends to the full orthant by
        // n e^{-n t} factors: the transform sup is unchanged (the extra
        // factor has modulus <= 1 with value 1 at frequency zero) and the
        // group average converges to the partial-kernel average as n grows
        let h = 0.1;
        let beta = modulated_exponential_kernel(h, 1.0, 0.0).unwrap();
        let u1 = CMatrix::diag(&[C64::from_polar(1.0, 0.3 * h), C64::from_polar(1.0, -0.7 * h)]);
        let u2 = CMatrix::diag(&[C64::from_polar(1.0, 0.5 * h), C64::from_polar(1.0, 0.2 * h)]);
        let group2 = GroupTuple::new(h, vec![u1.clone(), u2]).unwrap();
        let group1 = GroupTuple::new(h, vec![u1]).unwrap();
        let (partial_op, partial_sup) = group_multiplier_norm(&group1, &beta, 512).unwrap();
        let mut last_gap = f64::INFINITY;
        for n in [2.0f64, 8.0, 32.0] {
            let reg = modulated_exponential_kernel(h, n, 0.0).unwrap();
            let scale = 1.0
                / reg
                    .entries()
                    .map(|(_, v)| v.re * reg.cell())
                    .sum::<f64>();
            let support: Vec<(Vec<i64>, C64)> = beta
                .entries()
                .flat_map(|(i, vb)| {
                    let scale = C64::new(scale, 0.0);
                    reg.entries()
                        .map(move |(j, vr)| (vec![i[0], j[0]], vb * vr * scale))
                        .collect::<Vec<_>>()
                })
                .collect();
            let bn = SampledKernel::new(2, h, support).unwrap();
            let (op2, sup2) = group_multiplier_norm(&group2, &bn, 32).unwrap();
            assert!(
                (sup2 - partial_sup).abs() <= 0.02 * partial_sup,
                "n={n}: transform sup {sup2} vs {partial_sup}"
            );
            let gap = (op2 - partial_op).abs() / partial_op;
            assert!(gap <= last_gap + 1e-9, "n={n}: gap grew {gap} > {last_gap}");
            last_gap = gap;
        }
        assert!(last_gap < 0.05, "regularized average did not converge: {last_gap}");
    }

    #[test]
    fn group_generator_branch_cut() {
        let u = CMatrix::diag_real(&[-1.0]);
        let group = GroupTuple::new(1.0, vec![u]).unwrap();
        assert!(matches!(
            group.negative_generators(),
            Err(HfcError::BranchCutViolation(_))
        ));
    }

    #[test]
    fn group_equivalence_circulant_shift() {
        // the shift on an odd circulant ring: eigenvalues e^{2 pi i m / n}
        // avoid the branch cut and the generators have spectrum on i R
        let n = 33usize;
        let h = 0.25;
        let mut u = CMatrix::zeros(n, n);
        for i in 0..n {
            u.set(i, (i + 1) % n, C64::new(1.0, 0.0));
        }
        let group = GroupTuple::new(h, vec![u]).unwrap();
        // kernels modulated onto a few ring frequencies
        let kernels: Vec<SampledKernel> = [0i32, 1, 5, -7]
            .iter()
            .map(|&m| {
                let xi = 2.0 * std::f64::consts::PI * m as f64 / (n as f64 * h);
                modulated_exponential_kernel(h, 1.0, xi).unwrap()
            })
            .collect();
        let cfg = crate::contour::EnsembleCfg {
            size: 9,
            max_atoms: 3,
            ..Default::default()
        };
        let rep = group_calculus_equivalence_check(&group, &kernels, &cfg, 5, QuadProfile::Fast)
            .unwrap();
        assert!(
            (rep.multiplier_constant - 1.0).abs() < 0.05,
            "K_mult {}",
            rep.multiplier_constant
        );
        assert!(
            (rep.fc_constant - 1.0).abs() < 0.05,
            "K_fc {}",
            rep.fc_constant
        );
    }

    #[test]
    fn group_equivalence_conjugated_unitary() {
        let h = 0.25;
        let s = CMatrix::from_real_rows(&[&[1.0, 0.7], &[0.0, 1.0]]);
        let sinv = s.inverse().unwrap();
        let u0 = CMatrix::diag(&[
            C64::from_polar(1.0, 0.5 * h),
            C64::from_polar(1.0, -0.8 * h),
        ]);
        let u = s.matmul(&u0).matmul(&sinv);
        let group = GroupTuple::new(h, vec![u]).unwrap();
        let m = (10.0 / h) as i64;
        let support: Vec<(Vec<i64>, C64)> = (0..m)
            .map(|j| (vec![j], C64::new((-(j as f64) * h).exp(), 0.0)))
            .collect();
        let kernels = vec![SampledKernel::new(1, h, support).unwrap()];
        let cfg = crate::contour::EnsembleCfg {
            size: 10,
            max_atoms: 3,
            ..Default::default()
        };
        let rep = group_calculus_equivalence_check(&group, &kernels, &cfg, 5, QuadProfile::Fast)
            .unwrap();
        let cond = {
            let sv = s.singular_values();
            sv[0] / sv[1]
        };
        assert!(rep.multiplier_constant <= cond * 1.05);
        assert!(rep.fc_constant <= cond * 1.05);
        assert!(
            rep.ratio > 0.25 && rep.ratio < 4.0,
            "exploratory band violated: {}",
            rep.ratio
        );
    }

    #[test]
    fn materialized_j_matches_gram_norm() {
        let tuple = euc_tuple(vec![CMatrix::from_real_rows(&[&[1.0, 0.3], &[0.0, 2.0]])]);
        let grid = LineGrid::new(1, 1e-2, 12.0).unwrap();
        let sys = build_dilation(&tuple, grid).unwrap();
        let j = sys.materialize_j(20_000).unwrap();
        assert_relative_eq!(j.spectral_norm(), sys.j_norm, max_relative = 1e-10);
        // the materialized blocks compose to the compressed identity
        let q = sys.materialize_q(20_000).unwrap();
        let qj = q.matmul(&j);
        let direct = sys.compressed_shift(&[0.0]).unwrap();
        assert!(qj.rel_diff(&direct) < 1e-12);
        let exported = sys.to_json(20_000).unwrap();
        assert_eq!(exported["shift"], "index");
        assert!(exported["J"].is_array());
    }
}
