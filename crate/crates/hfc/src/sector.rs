//! Holomorphic functions on products of sectors: expression trees, decay
//! certificates, sup-norm estimation on the distinguished boundary, and the
//! named families used throughout (the approximation family `Phi_m`, the
//! dyadic atoms `sigma_k`, the surrogate unit decomposition).
//!
//! All powers take the principal branch; the branch cut sits on `(-inf, 0]`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{HfcError, Result};

/// Product-of-sectors domain: angle `theta_k` in `(0, pi]` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorDomain {
    pub angles: Vec<f64>,
}

impl SectorDomain {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(HfcError::InvalidParameter("empty domain".into()));
        }
        for &t in &angles {
            if !(t > 0.0 && t <= std::f64::consts::PI) {
                return Err(HfcError::InvalidParameter(format!(
                    "sector angle {t} outside (0, pi]"
                )));
            }
        }
        Ok(SectorDomain { angles })
    }

    pub fn uniform(d: usize, theta: f64) -> Result<Self> {
        Self::new(vec![theta; d])
    }

    pub fn d(&self) -> usize {
        self.angles.len()
    }

    pub fn product(&self, other: &SectorDomain) -> SectorDomain {
        let mut angles = self.angles.clone();
        angles.extend_from_slice(&other.angles);
        SectorDomain { angles }
    }

    /// Membership in the closed sector product (tiny slack admits boundary
    /// points produced by sweeps). The origin and the cut are excluded.
    pub fn contains(&self, z: &[C64]) -> bool {
        if z.len() != self.d() {
            return false;
        }
        z.iter().zip(self.angles.iter()).all(|(&zk, &theta)| {
            zk.norm() > 0.0 && zk.arg().abs() <= theta + 1e-12 && !(zk.re < 0.0 && zk.im == 0.0)
        })
    }
}

/// Expression tree over the sector-function primitives.
#[derive(Debug, Clone)]
pub enum Expr {
    Const(C64),
    /// `z_coord^s`, principal branch, real exponent.
    Pow { coord: usize, s: f64 },
    /// `(a + z_coord)^{-1}` with `-a` outside the closed sector.
    ShiftRecip { coord: usize, a: C64 },
    /// `(w - z_coord^{1/2})^{-1}` with `w` outside the half-angle sector.
    SqrtShiftRecip { coord: usize, w: C64 },
    /// `(a + z_coord^alpha)^{-1}`, `0 < alpha <= 1`, with `-a` outside the
    /// compressed sector.
    PowShiftRecip { coord: usize, alpha: f64, a: C64 },
    /// `exp(-z_coord)`.
    Exp { coord: usize },
    /// Substitution `z_coord -> t z_coord`, `t > 0`.
    Dilate { coord: usize, t: f64, arg: Box<Expr> },
    /// Pointwise reciprocal of a nonvanishing subtree.
    Recip(Box<Expr>),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Scale(C64, Box<Expr>),
    /// Tensor product across coordinate groups: `left` uses coordinates
    /// `0..left_arity`, `right` uses the remaining ones (re-indexed from 0).
    Tensor {
        left: Box<Expr>,
        left_arity: usize,
        right: Box<Expr>,
    },
}

impl Expr {
    /// Bitmask of coordinates the expression depends on.
    pub fn deps(&self) -> u32 {
        match self {
            Expr::Const(_) => 0,
            Expr::Pow { coord, .. }
            | Expr::ShiftRecip { coord, .. }
            | Expr::SqrtShiftRecip { coord, .. }
            | Expr::PowShiftRecip { coord, .. }
            | Expr::Exp { coord } => 1 << coord,
            Expr::Dilate { arg, .. } => arg.deps(),
            Expr::Recip(arg) => arg.deps(),
            Expr::Scale(_, arg) => arg.deps(),
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().fold(0, |m, x| m | x.deps()),
            Expr::Tensor {
                left,
                left_arity,
                right,
            } => left.deps() | (right.deps() << left_arity),
        }
    }

    /// Re-index all coordinates by `offset`.
    pub fn shift_coords(&self, offset: usize) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Pow { coord, s } => Expr::Pow {
                coord: coord + offset,
                s: *s,
            },
            Expr::ShiftRecip { coord, a } => Expr::ShiftRecip {
                coord: coord + offset,
                a: *a,
            },
            Expr::SqrtShiftRecip { coord, w } => Expr::SqrtShiftRecip {
                coord: coord + offset,
                w: *w,
            },
            Expr::PowShiftRecip { coord, alpha, a } => Expr::PowShiftRecip {
                coord: coord + offset,
                alpha: *alpha,
                a: *a,
            },
            Expr::Exp { coord } => Expr::Exp {
                coord: coord + offset,
            },
            Expr::Dilate { coord, t, arg } => Expr::Dilate {
                coord: coord + offset,
                t: *t,
                arg: Box::new(arg.shift_coords(offset)),
            },
            Expr::Recip(arg) => Expr::Recip(Box::new(arg.shift_coords(offset))),
            Expr::Scale(c, arg) => Expr::Scale(*c, Box::new(arg.shift_coords(offset))),
            Expr::Add(xs) => Expr::Add(xs.iter().map(|x| x.shift_coords(offset)).collect()),
            Expr::Mul(xs) => Expr::Mul(xs.iter().map(|x| x.shift_coords(offset)).collect()),
            Expr::Tensor {
                left,
                left_arity,
                right,
            } => Expr::Tensor {
                left: Box::new(left.shift_coords(offset)),
                left_arity: *left_arity,
                right: right.clone(),
            },
        }
    }

    fn eval(&self, z: &[C64]) -> Result<C64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Pow { coord, s } => z[*coord].powf(*s),
            Expr::ShiftRecip { coord, a } => {
                let den = a + z[*coord];
                if den.norm() == 0.0 {
                    return Err(HfcError::DomainViolation("pole of (a + z)^{-1}".into()));
                }
                den.inv()
            }
            Expr::SqrtShiftRecip { coord, w } => {
                let den = w - z[*coord].sqrt();
                if den.norm() == 0.0 {
                    return Err(HfcError::DomainViolation("pole of (w - sqrt z)^{-1}".into()));
                }
                den.inv()
            }
            Expr::PowShiftRecip { coord, alpha, a } => {
                let den = a + z[*coord].powf(*alpha);
                if den.norm() == 0.0 {
                    return Err(HfcError::DomainViolation(
                        "pole of (a + z^alpha)^{-1}".into(),
                    ));
                }
                den.inv()
            }
            Expr::Exp { coord } => (-z[*coord]).exp(),
            Expr::Dilate { coord, t, arg } => {
                let mut zz = z.to_vec();
                zz[*coord] *= *t;
                arg.eval(&zz)?
            }
            Expr::Recip(arg) => {
                let v = arg.eval(z)?;
                if v.norm() == 0.0 {
                    return Err(HfcError::DomainViolation("reciprocal of zero".into()));
                }
                v.inv()
            }
            Expr::Add(xs) => {
                let mut acc = C64::new(0.0, 0.0);
                for x in xs {
                    acc += x.eval(z)?;
                }
                acc
            }
            Expr::Mul(xs) => {
                let mut acc = C64::new(1.0, 0.0);
                for x in xs {
                    acc *= x.eval(z)?;
                }
                acc
            }
            Expr::Scale(c, arg) => c * arg.eval(z)?,
            Expr::Tensor {
                left,
                left_arity,
                right,
            } => left.eval(&z[..*left_arity])? * right.eval(&z[*left_arity..])?,
        })
    }

    /// Structural image under `f -> conj(f(conj(.)))`.
    fn conjugate_reflect(&self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(c.conj()),
            Expr::Pow { coord, s } => Expr::Pow {
                coord: *coord,
                s: *s,
            },
            Expr::ShiftRecip { coord, a } => Expr::ShiftRecip {
                coord: *coord,
                a: a.conj(),
            },
            Expr::SqrtShiftRecip { coord, w } => Expr::SqrtShiftRecip {
                coord: *coord,
                w: w.conj(),
            },
            Expr::PowShiftRecip { coord, alpha, a } => Expr::PowShiftRecip {
                coord: *coord,
                alpha: *alpha,
                a: a.conj(),
            },
            Expr::Exp { coord } => Expr::Exp { coord: *coord },
            Expr::Dilate { coord, t, arg } => Expr::Dilate {
                coord: *coord,
                t: *t,
                arg: Box::new(arg.conjugate_reflect()),
            },
            Expr::Recip(arg) => Expr::Recip(Box::new(arg.conjugate_reflect())),
            Expr::Add(xs) => Expr::Add(xs.iter().map(|x| x.conjugate_reflect()).collect()),
            Expr::Mul(xs) => Expr::Mul(xs.iter().map(|x| x.conjugate_reflect()).collect()),
            Expr::Scale(c, arg) => Expr::Scale(c.conj(), Box::new(arg.conjugate_reflect())),
            Expr::Tensor {
                left,
                left_arity,
                right,
            } => Expr::Tensor {
                left: Box::new(left.conjugate_reflect()),
                left_arity: *left_arity,
                right: Box::new(right.conjugate_reflect()),
            },
        }
    }
}

/// A holomorphic function on a product of sectors.
#[derive(Debug, Clone)]
pub struct SectorFunction {
    pub domain: SectorDomain,
    pub tree: Expr,
}

impl SectorFunction {
    pub fn new(domain: SectorDomain, tree: Expr) -> Self {
        SectorFunction { domain, tree }
    }

    pub fn d(&self) -> usize {
        self.domain.d()
    }

    /// Evaluation with a domain check (closed sector, cut excluded).
    pub fn eval(&self, z: &[C64]) -> Result<C64> {
        if z.len() != self.d() {
            return Err(HfcError::DimensionMismatch(format!(
                "expected {} coordinates, got {}",
                self.d(),
                z.len()
            )));
        }
        if !self.domain.contains(z) {
            return Err(HfcError::DomainViolation(format!(
                "point outside the declared sector product: {z:?}"
            )));
        }
        let v = self.tree.eval(z)?;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(HfcError::NumericalFailure("non-finite evaluation".into()));
        }
        Ok(v)
    }

    /// Evaluation without the domain check, for boundary sweeps.
    pub fn eval_unchecked(&self, z: &[C64]) -> Result<C64> {
        self.tree.eval(z)
    }

    /// `f~(z) = conj(f(conj z))`; an involution.
    pub fn conjugate_reflect(&self) -> SectorFunction {
        SectorFunction {
            domain: self.domain.clone(),
            tree: self.tree.conjugate_reflect(),
        }
    }

    /// Product of two functions on the same domain.
    pub fn mul(&self, other: &SectorFunction) -> Result<SectorFunction> {
        if self.domain.d() != other.domain.d() {
            return Err(HfcError::DimensionMismatch("arity mismatch in mul".into()));
        }
        let angles: Vec<f64> = self
            .domain
            .angles
            .iter()
            .zip(other.domain.angles.iter())
            .map(|(&a, &b)| a.min(b))
            .collect();
        Ok(SectorFunction {
            domain: SectorDomain::new(angles)?,
            tree: Expr::Mul(vec![self.tree.clone(), other.tree.clone()]),
        })
    }

    pub fn add(&self, other: &SectorFunction) -> Result<SectorFunction> {
        if self.domain.d() != other.domain.d() {
            return Err(HfcError::DimensionMismatch("arity mismatch in add".into()));
        }
        let angles: Vec<f64> = self
            .domain
            .angles
            .iter()
            .zip(other.domain.angles.iter())
            .map(|(&a, &b)| a.min(b))
            .collect();
        Ok(SectorFunction {
            domain: SectorDomain::new(angles)?,
            tree: Expr::Add(vec![self.tree.clone(), other.tree.clone()]),
        })
    }

    pub fn scale(&self, c: C64) -> SectorFunction {
        SectorFunction {
            domain: self.domain.clone(),
            tree: Expr::Scale(c, Box::new(self.tree.clone())),
        }
    }

    /// Tensor product across coordinate groups.
    pub fn tensor(&self, other: &SectorFunction) -> SectorFunction {
        SectorFunction {
            domain: self.domain.product(&other.domain),
            tree: Expr::Tensor {
                left: Box::new(self.tree.clone()),
                left_arity: self.d(),
                right: Box::new(other.tree.clone()),
            },
        }
    }

    /// Substitution `z_k -> t_k z_k` for positive scales.
    pub fn dilate(&self, coord: usize, t: f64) -> Result<SectorFunction> {
        if !(t > 0.0) {
            return Err(HfcError::InvalidParameter("dilation scale must be > 0".into()));
        }
        Ok(SectorFunction {
            domain: self.domain.clone(),
            tree: Expr::Dilate {
                coord,
                t,
                arg: Box::new(self.tree.clone()),
            },
        })
    }
}

/// Certified decay: `|f(z)| <= C prod_{k in active} r_k^{s_k} / (1 + r_k)^{2 s_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    /// Active coordinate bitmask.
    pub active: u32,
    /// Exponent per coordinate (ignored on inactive coordinates).
    pub s: Vec<f64>,
    pub c: f64,
}

impl DecayCertificate {
    pub fn bound(&self, z: &[C64]) -> f64 {
        let mut b = self.c;
        for (k, zk) in z.iter().enumerate() {
            if self.active >> k & 1 == 1 {
                let r = zk.norm();
                let s = self.s[k];
                b *= r.powf(s) / (1.0 + r).powf(2.0 * s);
            }
        }
        b
    }

    /// Certificate of the dilated function `z -> f(.., t z_k, ..)`.
    pub fn dilated(&self, coord: usize, t: f64) -> DecayCertificate {
        let mut out = self.clone();
        if self.active >> coord & 1 == 1 {
            out.c *= t.max(1.0 / t).powf(self.s[coord]);
        }
        out
    }

    pub fn scaled(&self, c: C64) -> DecayCertificate {
        DecayCertificate {
            c: self.c * c.norm(),
            ..self.clone()
        }
    }
}

/// A sector function together with its verified decay certificate.
#[derive(Debug, Clone)]
pub struct CertifiedFunction {
    pub f: SectorFunction,
    pub cert: DecayCertificate,
}

impl CertifiedFunction {
    pub fn dilate(&self, coord: usize, t: f64) -> Result<CertifiedFunction> {
        Ok(CertifiedFunction {
            f: self.f.dilate(coord, t)?,
            cert: self.cert.dilated(coord, t),
        })
    }

    pub fn scale(&self, c: C64) -> CertifiedFunction {
        CertifiedFunction {
            f: self.f.scale(c),
            cert: self.cert.scaled(c),
        }
    }

    pub fn tensor(&self, other: &CertifiedFunction) -> CertifiedFunction {
        let d_left = self.f.d();
        let mut s = self.cert.s.clone();
        s.extend_from_slice(&other.cert.s);
        let cert = DecayCertificate {
            active: self.cert.active | (other.cert.active << d_left),
            s,
            c: self.cert.c * other.cert.c,
        };
        CertifiedFunction {
            f: self.f.tensor(&other.f),
            cert,
        }
    }

    pub fn conjugate_reflect(&self) -> CertifiedFunction {
        CertifiedFunction {
            f: self.f.conjugate_reflect(),
            cert: self.cert.clone(),
        }
    }
}

/// Direct-sum representative: constant plus one certified summand per
/// coordinate subset (bitmask).
#[derive(Debug, Clone)]
pub struct H01Form {
    pub domain: SectorDomain,
    pub constant: C64,
    pub components: Vec<(u32, CertifiedFunction)>,
}

impl H01Form {
    pub fn constant(domain: SectorDomain, a: C64) -> H01Form {
        H01Form {
            domain,
            constant: a,
            components: vec![],
        }
    }

    pub fn from_function(cf: CertifiedFunction) -> H01Form {
        let mask = cf.cert.active;
        H01Form {
            domain: cf.f.domain.clone(),
            constant: C64::new(0.0, 0.0),
            components: vec![(mask, cf)],
        }
    }

    pub fn d(&self) -> usize {
        self.domain.d()
    }

    pub fn eval(&self, z: &[C64]) -> Result<C64> {
        let mut acc = self.constant;
        for (_, cf) in &self.components {
            acc += cf.f.eval(z)?;
        }
        Ok(acc)
    }

    pub fn conjugate_reflect(&self) -> H01Form {
        H01Form {
            domain: self.domain.clone(),
            constant: self.constant.conj(),
            components: self
                .components
                .iter()
                .map(|(m, cf)| (*m, cf.conjugate_reflect()))
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// sampling, certification, decay checks
// ---------------------------------------------------------------------------

/// Log-spaced radii in `[r_min, r_max]`.
pub fn log_span(r_min: f64, r_max: f64, per_decade: usize) -> Vec<f64> {
    let decades = (r_max / r_min).log10();
    let total = ((decades * per_decade as f64).ceil() as usize).max(2) + 1;
    let (lo, hi) = (r_min.ln(), r_max.ln());
    (0..total)
        .map(|i| (lo + (hi - lo) * i as f64 / (total - 1) as f64).exp())
        .collect()
}

/// Sample points on boundary and interior rays of the active coordinates.
/// Inactive coordinates are pinned at 1.
fn ray_samples(
    domain: &SectorDomain,
    active: u32,
    radii: &[f64],
    ray_fracs: &[f64],
) -> Vec<Vec<C64>> {
    let d = domain.d();
    let coords: Vec<usize> = (0..d).filter(|k| active >> k & 1 == 1).collect();
    if coords.is_empty() {
        return vec![vec![C64::new(1.0, 0.0); d]];
    }
    // per-coordinate 1-D sample lists
    let per_coord: Vec<Vec<C64>> = coords
        .iter()
        .map(|&k| {
            let theta = domain.angles[k];
            let mut pts = Vec::new();
            for &frac in ray_fracs {
                for &r in radii {
                    if frac == 0.0 {
                        pts.push(C64::new(r, 0.0));
                    } else {
                        pts.push(C64::from_polar(r, frac * theta));
                        pts.push(C64::from_polar(r, -frac * theta));
                    }
                }
            }
            pts
        })
        .collect();
    // for multi-coordinate functions, couple the coordinates along a common
    // index sweep plus a diagonal sweep; full product grids live in sup_sweep
    let mut out = Vec::new();
    let base = vec![C64::new(1.0, 0.0); d];
    for (ci, &k) in coords.iter().enumerate() {
        for &p in &per_coord[ci] {
            let mut z = base.clone();
            z[k] = p;
            out.push(z);
        }
    }
    if coords.len() > 1 {
        let m = per_coord.iter().map(|v| v.len()).min().unwrap();
        for i in 0..m {
            let mut z = base.clone();
            for (ci, &k) in coords.iter().enumerate() {
                z[k] = per_coord[ci][i];
            }
            out.push(z);
        }
    }
    out
}

/// Report of a certificate verification run.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub pass: bool,
    /// Worst `|f(z)| - bound(z)`; positive values are violations.
    pub worst_slack: f64,
    pub samples: usize,
}

const DECAY_SLACK: f64 = 1e-9;

/// Verifies a declared certificate on a logarithmic sample grid of the
/// distinguished boundary and interior rays. Failures are report outcomes.
pub fn decay_check(f: &SectorFunction, cert: &DecayCertificate, per_decade: usize) -> DecayReport {
    let radii = log_span(1e-8, 1e8, per_decade);
    let pts = ray_samples(&f.domain, cert.active, &radii, &[1.0, 0.5, 0.0]);
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0usize;
    for z in &pts {
        if let Ok(v) = f.eval_unchecked(z) {
            let slack = v.norm() - cert.bound(z);
            worst = worst.max(slack);
            count += 1;
        }
    }
    DecayReport {
        pass: worst <= DECAY_SLACK * cert.c.max(1.0),
        worst_slack: worst,
        samples: count,
    }
}

/// Computes a numerical decay constant for given exponents and wraps the
/// function into a `CertifiedFunction`. The constant is a sampled supremum
/// with a 5% safety margin, re-verified by `decay_check`.
pub fn certify(f: SectorFunction, active: u32, s: Vec<f64>) -> Result<CertifiedFunction> {
    let radii = log_span(1e-8, 1e8, 16);
    let pts = ray_samples(&f.domain, active, &radii, &[1.0, 0.75, 0.5, 0.25, 0.0]);
    let probe = DecayCertificate {
        active,
        s: s.clone(),
        c: 1.0,
    };
    let mut c = 0.0f64;
    for z in &pts {
        let v = f
            .eval_unchecked(z)
            .map_err(|e| HfcError::NumericalFailure(format!("certify sample failed: {e}")))?;
        let b = probe.bound(z);
        if b > 0.0 {
            c = c.max(v.norm() / b);
        }
    }
    let cert = DecayCertificate {
        active,
        s,
        c: c * 1.05 + 1e-300,
    };
    let report = decay_check(&f, &cert, 16);
    if !report.pass {
        return Err(HfcError::NumericalFailure(format!(
            "certification failed with slack {:.3e}",
            report.worst_slack
        )));
    }
    Ok(CertifiedFunction { f, cert })
}

// ---------------------------------------------------------------------------
// sup-norm estimation on the distinguished boundary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct SupNormCfg {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
    pub refine_rounds: usize,
}

impl SupNormCfg {
    pub fn for_dimension(d: usize, profile: crate::config::QuadProfile) -> Self {
        SupNormCfg {
            r_min: 1e-6,
            r_max: 1e6,
            per_decade: profile.sup_nodes_per_decade(d),
            refine_rounds: 3,
        }
    }
}

impl Default for SupNormCfg {
    fn default() -> Self {
        SupNormCfg::for_dimension(1, crate::config::QuadProfile::Default)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SupNormEstimate {
    pub value: f64,
    pub grid_points: usize,
    pub refined_rounds: usize,
}

/// Generic sweep of a nonnegative functional over the distinguished boundary
/// of the active coordinates, with adaptive local refinement near the argmax.
/// Returns a lower bound on the supremum.
pub fn sup_sweep<F: Fn(&[C64]) -> f64 + Sync>(
    domain: &SectorDomain,
    active: u32,
    cfg: &SupNormCfg,
    eval: F,
) -> SupNormEstimate {
    let d = domain.d();
    let coords: Vec<usize> = (0..d).filter(|k| active >> k & 1 == 1).collect();
    if coords.is_empty() {
        let z = vec![C64::new(1.0, 0.0); d];
        return SupNormEstimate {
            value: eval(&z),
            grid_points: 1,
            refined_rounds: 0,
        };
    }
    let radii = log_span(cfg.r_min, cfg.r_max, cfg.per_decade);
    // boundary rays only: +theta and -theta per active coordinate
    let axis: Vec<Vec<C64>> = coords
        .iter()
        .map(|&k| {
            let theta = domain.angles[k];
            let mut pts = Vec::with_capacity(radii.len() * 2);
            for &r in &radii {
                pts.push(C64::from_polar(r, theta));
                pts.push(C64::from_polar(r, -theta));
            }
            pts
        })
        .collect();
    // odometer over the product grid, in parallel; ties break towards the
    // smallest flat index so the argmax is schedule-independent
    use rayon::prelude::*;
    let sizes: Vec<usize> = axis.iter().map(|a| a.len()).collect();
    let total: usize = sizes.iter().product();
    let at = |flat: usize| {
        let mut z = vec![C64::new(1.0, 0.0); d];
        let mut rem = flat;
        for (ci, &k) in coords.iter().enumerate() {
            let idx = rem % sizes[ci];
            rem /= sizes[ci];
            z[k] = axis[ci][idx];
        }
        z
    };
    let (best0, best_flat) = (0..total)
        .into_par_iter()
        .map(|flat| (eval(&at(flat)), flat))
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    let mut best = best0;
    let mut best_z = if best_flat == usize::MAX {
        vec![C64::new(1.0, 0.0); d]
    } else {
        at(best_flat)
    };
    let mut count = total;
    let mut z = vec![C64::new(1.0, 0.0); d];
    // local trisection refinement around the argmax
    let mut spacing = (10f64).powf(1.0 / cfg.per_decade as f64);
    for _ in 0..cfg.refine_rounds {
        let lo = 1.0 / spacing;
        let steps = 9usize;
        let local: Vec<Vec<C64>> = coords
            .iter()
            .map(|&k| {
                let z0 = best_z[k];
                (0..=steps)
                    .map(|i| {
                        let f = lo * spacing.powf(2.0 * i as f64 / steps as f64);
                        C64::from_polar(z0.norm() * f, z0.arg())
                    })
                    .collect()
            })
            .collect();
        let sizes: Vec<usize> = local.iter().map(|a| a.len()).collect();
        let total: usize = sizes.iter().product();
        for flat in 0..total {
            let mut rem = flat;
            for (ci, &k) in coords.iter().enumerate() {
                let idx = rem % sizes[ci];
                rem /= sizes[ci];
                z[k] = local[ci][idx];
            }
            let v = eval(&z);
            count += 1;
            if v > best {
                best = v;
                best_z.copy_from_slice(&z);
            }
        }
        spacing = spacing.powf(2.0 / steps as f64);
    }
    SupNormEstimate {
        value: best,
        grid_points: count,
        refined_rounds: cfg.refine_rounds,
    }
}

/// Sup-norm of `|f|` over the distinguished boundary of its domain.
///
/// Multiplicative structure over disjoint coordinate groups factorizes into
/// per-group sweeps; the reported value is a grid lower bound.
pub fn sup_norm_estimate(f: &SectorFunction, cfg: &SupNormCfg) -> SupNormEstimate {
    match &f.tree {
        Expr::Const(c) => SupNormEstimate {
            value: c.norm(),
            grid_points: 1,
            refined_rounds: 0,
        },
        Expr::Scale(c, inner) => {
            let sub = SectorFunction::new(f.domain.clone(), (**inner).clone());
            let e = sup_norm_estimate(&sub, cfg);
            SupNormEstimate {
                value: c.norm() * e.value,
                ..e
            }
        }
        Expr::Tensor { left, left_arity, right } => {
            let dl = SectorDomain::new(f.domain.angles[..*left_arity].to_vec()).unwrap();
            let dr = SectorDomain::new(f.domain.angles[*left_arity..].to_vec()).unwrap();
            let el = sup_norm_estimate(&SectorFunction::new(dl, (**left).clone()), cfg);
            let er = sup_norm_estimate(&SectorFunction::new(dr, (**right).clone()), cfg);
            SupNormEstimate {
                value: el.value * er.value,
                grid_points: el.grid_points + er.grid_points,
                refined_rounds: cfg.refine_rounds,
            }
        }
        Expr::Mul(factors) => {
            // disjoint dependency groups factorize
            let masks: Vec<u32> = factors.iter().map(|x| x.deps()).collect();
            let disjoint = (0..masks.len()).all(|i| {
                (0..masks.len()).all(|j| i == j || masks[i] & masks[j] == 0)
            });
            if disjoint && factors.len() > 1 {
                let mut value = 1.0f64;
                let mut pts = 0usize;
                for f_i in factors {
                    let sub = SectorFunction::new(f.domain.clone(), f_i.clone());
                    let e = sup_norm_estimate(&sub, cfg);
                    value *= e.value;
                    pts += e.grid_points;
                }
                return SupNormEstimate {
                    value,
                    grid_points: pts,
                    refined_rounds: cfg.refine_rounds,
                };
            }
            sweep_abs(f, cfg)
        }
        _ => sweep_abs(f, cfg),
    }
}

fn sweep_abs(f: &SectorFunction, cfg: &SupNormCfg) -> SupNormEstimate {
    let active = f.tree.deps();
    sup_sweep(&f.domain, active, cfg, |z| {
        f.eval_unchecked(z).map(|v| v.norm()).unwrap_or(0.0)
    })
}

/// Sup-norm of an `H^infty_{0,1}` representative (constant plus summands).
pub fn sup_norm_form(form: &H01Form, cfg: &SupNormCfg) -> SupNormEstimate {
    if form.components.is_empty() {
        return SupNormEstimate {
            value: form.constant.norm(),
            grid_points: 1,
            refined_rounds: 0,
        };
    }
    if form.components.len() == 1 && form.constant.norm() == 0.0 {
        return sup_norm_estimate(&form.components[0].1.f, cfg);
    }
    let active = form
        .components
        .iter()
        .fold(0u32, |m, (mask, _)| m | mask);
    sup_sweep(&form.domain, active, cfg, |z| {
        let mut acc = form.constant;
        for (_, cf) in &form.components {
            match cf.f.eval_unchecked(z) {
                Ok(v) => acc += v,
                Err(_) => return 0.0,
            }
        }
        acc.norm()
    })
}

// ---------------------------------------------------------------------------
// named families
// ---------------------------------------------------------------------------

/// `Phi_m(z) = m^2 z / ((m + z)(1 + m z))` on `Sigma_theta`, certified with
/// exponent 1.
pub fn phi_m(m: u32, theta: f64) -> Result<CertifiedFunction> {
    if m < 1 {
        return Err(HfcError::InvalidParameter("m >= 1 required".into()));
    }
    let domain = SectorDomain::new(vec![theta])?;
    let mf = m as f64;
    // m^2 z (m + z)^{-1} (1 + m z)^{-1} = m z (m + z)^{-1} (1/m + z)^{-1}
    let tree = Expr::Scale(
        C64::new(mf, 0.0),
        Box::new(Expr::Mul(vec![
            Expr::Pow { coord: 0, s: 1.0 },
            Expr::ShiftRecip {
                coord: 0,
                a: C64::new(mf, 0.0),
            },
            Expr::ShiftRecip {
                coord: 0,
                a: C64::new(1.0 / mf, 0.0),
            },
        ])),
    );
    certify(SectorFunction::new(domain, tree), 0b1, vec![1.0])
}

/// `d`-fold tensor power of `Phi_m`.
pub fn phi_m_tensor(m: u32, d: usize, theta: f64) -> Result<CertifiedFunction> {
    if d < 1 {
        return Err(HfcError::InvalidParameter("d >= 1 required".into()));
    }
    let base = phi_m(m, theta)?;
    let mut out = base.clone();
    for _ in 1..d {
        out = out.tensor(&base);
    }
    Ok(out)
}

/// `Phi_m` composed with the power map `z -> z^alpha` that compresses
/// `Sigma_theta` into the closed half-plane, where `|Phi_m| <= 1`. The value
/// on the positive axis stays `Phi_m(t^alpha)`-shaped, so dilated copies
/// witness the spectral constant on arbitrarily wide sectors.
pub fn phi_m_compressed(m: u32, theta: f64) -> Result<CertifiedFunction> {
    if m < 1 {
        return Err(HfcError::InvalidParameter("m >= 1 required".into()));
    }
    let domain = SectorDomain::new(vec![theta])?;
    let alpha = (0.98 * std::f64::consts::FRAC_PI_2 / theta).min(1.0);
    let mf = m as f64;
    let tree = Expr::Scale(
        C64::new(mf, 0.0),
        Box::new(Expr::Mul(vec![
            Expr::Pow { coord: 0, s: alpha },
            Expr::PowShiftRecip {
                coord: 0,
                alpha,
                a: C64::new(mf, 0.0),
            },
            Expr::PowShiftRecip {
                coord: 0,
                alpha,
                a: C64::new(1.0 / mf, 0.0),
            },
        ])),
    );
    certify(SectorFunction::new(domain, tree), 0b1, vec![alpha])
}

/// `z^{1/2} e^{-z}` on `Sigma_theta` (`theta < pi/2`), certified with
/// exponent 1/2.
pub fn sqrt_exp(theta: f64) -> Result<CertifiedFunction> {
    if theta >= std::f64::consts::FRAC_PI_2 {
        return Err(HfcError::InvalidParameter(
            "z^{1/2} e^{-z} decays only on sectors of angle < pi/2".into(),
        ));
    }
    let domain = SectorDomain::new(vec![theta])?;
    let tree = Expr::Mul(vec![Expr::Pow { coord: 0, s: 0.5 }, Expr::Exp { coord: 0 }]);
    certify(SectorFunction::new(domain, tree), 0b1, vec![0.5])
}

/// The dyadic comparison atom
/// `sigma_k(z) = rho^{k/4} z^{1/4} / ((rho^k e^{i gamma})^{1/2} - z^{1/2})`
/// on `Sigma_mu`, `mu < gamma`.
pub fn sigma_k(k: i32, rho: f64, gamma: f64, mu: f64) -> Result<CertifiedFunction> {
    if !(rho > 1.0) {
        return Err(HfcError::InvalidParameter("rho > 1 required".into()));
    }
    if !(0.0 < mu && mu < gamma && gamma < std::f64::consts::PI) {
        return Err(HfcError::InvalidParameter(
            "need 0 < mu < gamma < pi".into(),
        ));
    }
    let domain = SectorDomain::new(vec![mu])?;
    let w = C64::from_polar(rho.powf(k as f64 / 2.0), gamma / 2.0);
    let tree = Expr::Scale(
        C64::new(rho.powf(k as f64 / 4.0), 0.0),
        Box::new(Expr::Mul(vec![
            Expr::Pow { coord: 0, s: 0.25 },
            Expr::SqrtShiftRecip { coord: 0, w },
        ])),
    );
    certify(SectorFunction::new(domain, tree), 0b1, vec![0.25])
}

// ---------------------------------------------------------------------------
// surrogate unit decomposition
// ---------------------------------------------------------------------------

/// Candidate triple for a decomposition of the unit on `Sigma_mu`.
#[derive(Debug, Clone)]
pub struct UnitDecomposition {
    pub mu: f64,
    pub deltas: Vec<SectorFunction>,
    pub psis: Vec<SectorFunction>,
    pub psi_tildes: Vec<SectorFunction>,
}

/// Builds the dyadic surrogate triple on `Sigma_mu`:
/// `psi_i = psi~_i = (2^{i - N/2} z)^{1/2} / (1 + 2^{i - N/2} z)` and
/// `Delta_i = 1 / h` with `h(z) = sum_j Phi_1(2^j z)` truncated symmetrically.
/// The nonvanishing of `h` on the sector is checked at construction.
pub fn dyadic_surrogate(n: usize, mu: f64) -> Result<UnitDecomposition> {
    if n < 2 {
        return Err(HfcError::InvalidParameter("need at least 2 atoms".into()));
    }
    let domain = SectorDomain::new(vec![mu])?;
    let truncation = (n as i64) / 2 + 16;
    let h_terms: Vec<Expr> = (-truncation..=truncation)
        .map(|j| Expr::Dilate {
            coord: 0,
            t: 2f64.powi(j as i32),
            arg: Box::new(Expr::Mul(vec![
                Expr::Pow { coord: 0, s: 1.0 },
                Expr::ShiftRecip {
                    coord: 0,
                    a: C64::new(1.0, 0.0),
                },
                Expr::ShiftRecip {
                    coord: 0,
                    a: C64::new(1.0, 0.0),
                },
            ])),
        })
        .collect();
    let h = SectorFunction::new(domain.clone(), Expr::Add(h_terms));
    // nonvanishing probe on rays of the sector, within the truncation range
    let probe_exp = (truncation - 8).max(8) as i32;
    let radii = log_span(2f64.powi(-probe_exp), 2f64.powi(probe_exp), 8);
    for &frac in &[1.0, 0.5, 0.0] {
        for &r in &radii {
            for sgn in [1.0, -1.0] {
                let z = [C64::from_polar(r, sgn * frac * mu)];
                let v = h.eval_unchecked(&z)?;
                if v.norm() < 0.05 {
                    return Err(HfcError::NumericalFailure(format!(
                        "dyadic kernel h nearly vanishes at {z:?}: |h| = {:.3e}",
                        v.norm()
                    )));
                }
                if frac == 0.0 {
                    break;
                }
            }
        }
    }
    let delta = SectorFunction::new(domain.clone(), Expr::Recip(Box::new(h.tree.clone())));
    let mut psis = Vec::with_capacity(n);
    for i in 1..=n {
        let t = 2f64.powi(i as i32 - (n as i32) / 2);
        let atom = Expr::Dilate {
            coord: 0,
            t,
            arg: Box::new(Expr::Mul(vec![
                Expr::Pow { coord: 0, s: 0.5 },
                Expr::ShiftRecip {
                    coord: 0,
                    a: C64::new(1.0, 0.0),
                },
            ])),
        };
        psis.push(SectorFunction::new(domain.clone(), atom));
    }
    Ok(UnitDecomposition {
        mu,
        deltas: vec![delta; n],
        psis: psis.clone(),
        psi_tildes: psis,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitDecompReport {
    /// Sampled sup of `sum_i |psi_i|`.
    pub psi_sum_bound: f64,
    pub psi_tilde_sum_bound: f64,
    /// Sampled sup of `|Delta_i|` over all i.
    pub delta_sup: f64,
    /// Max over i of the truncated ray integral `int |Delta_i| |dz/z|`.
    pub delta_ray_integral_max: f64,
    /// Sampled sup of `|1 - sum_i Delta_i psi_i psi~_i|` on the check window.
    pub truncation_defect: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct UnitCheckCfg {
    /// Window in `|z|` on which the unit identity is checked.
    pub z_min: f64,
    pub z_max: f64,
    /// Radial truncation of the `Delta_i` ray integrals.
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
}

impl Default for UnitCheckCfg {
    fn default() -> Self {
        UnitCheckCfg {
            z_min: 2f64.powi(-8),
            z_max: 2f64.powi(8),
            r_min: 1e-6,
            r_max: 1e6,
            per_decade: 16,
        }
    }
}

/// Truncated ray integral `int_{rays of angle nu} |f(z)| |dz/z|`.
pub fn ray_integral(f: &SectorFunction, nu: f64, cfg: &UnitCheckCfg) -> Result<f64> {
    let radii = log_span(cfg.r_min, cfg.r_max, cfg.per_decade);
    let mut acc = 0.0f64;
    for w in radii.windows(2) {
        let dlog = (w[1] / w[0]).ln();
        let rm = (w[0] * w[1]).sqrt();
        for sgn in [1.0, -1.0] {
            let z = [C64::from_polar(rm, sgn * nu)];
            acc += f.eval_unchecked(&z)?.norm() * dlog;
        }
    }
    Ok(acc)
}

/// Verifies the three unit-decomposition properties on sample grids;
/// all failures are report outcomes, not errors.
pub fn unit_decomposition_check(
    ud: &UnitDecomposition,
    nu: f64,
    cfg: &UnitCheckCfg,
) -> Result<UnitDecompReport> {
    if !(nu < ud.mu) {
        return Err(HfcError::InvalidParameter("need nu < mu".into()));
    }
    let radii = log_span(cfg.z_min, cfg.z_max, cfg.per_decade);
    let fracs = [1.0, 0.5, 0.0];
    let mut psi_sum = 0.0f64;
    let mut psi_tilde_sum = 0.0f64;
    let mut delta_sup = 0.0f64;
    let mut defect = 0.0f64;
    for &frac in &fracs {
        for &r in &radii {
            let signs: &[f64] = if frac == 0.0 { &[1.0] } else { &[1.0, -1.0] };
            for &sgn in signs {
                let z = [C64::from_polar(r, sgn * frac * ud.mu)];
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                let mut unit = C64::new(0.0, 0.0);
                for i in 0..ud.psis.len() {
                    let p = ud.psis[i].eval_unchecked(&z)?;
                    let pt = ud.psi_tildes[i].eval_unchecked(&z)?;
                    let dl = ud.deltas[i].eval_unchecked(&z)?;
                    s1 += p.norm();
                    s2 += pt.norm();
                    delta_sup = delta_sup.max(dl.norm());
                    unit += dl * p * pt;
                }
                psi_sum = psi_sum.max(s1);
                psi_tilde_sum = psi_tilde_sum.max(s2);
                defect = defect.max((C64::new(1.0, 0.0) - unit).norm());
            }
        }
    }
    let mut ray_max = 0.0f64;
    for d in &ud.deltas {
        ray_max = ray_max.max(ray_integral(d, nu, cfg)?);
    }
    Ok(UnitDecompReport {
        psi_sum_bound: psi_sum,
        psi_tilde_sum_bound: psi_tilde_sum,
        delta_sup,
        delta_ray_integral_max: ray_max,
        truncation_defect: defect,
    })
}

// ---------------------------------------------------------------------------
// JSON AST (wire format)
// ---------------------------------------------------------------------------

/// Wire node: `{"op": ..., "args": [...], "coord": k, "s": .., "a": [re,im], "t": ..}`.
/// Coordinates are 1-based on the wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AstNode {
    pub op: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<AstNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl AstNode {
    pub fn to_expr(&self) -> Result<Expr> {
        let coord = || -> Result<usize> {
            let c = self
                .coord
                .ok_or_else(|| HfcError::SchemaError(format!("op {:?} needs coord", self.op)))?;
            if c == 0 {
                return Err(HfcError::SchemaError("coord is 1-based".into()));
            }
            Ok(c - 1)
        };
        let a = || -> Result<C64> {
            let p = self
                .a
                .ok_or_else(|| HfcError::SchemaError(format!("op {:?} needs a", self.op)))?;
            Ok(C64::new(p[0], p[1]))
        };
        let one_arg = || -> Result<Expr> {
            if self.args.len() != 1 {
                return Err(HfcError::SchemaError(format!(
                    "op {:?} takes exactly one arg",
                    self.op
                )));
            }
            self.args[0].to_expr()
        };
        Ok(match self.op.as_str() {
            "const" => Expr::Const(a()?),
            "pow" => Expr::Pow {
                coord: coord()?,
                s: self
                    .s
                    .ok_or_else(|| HfcError::SchemaError("pow needs s".into()))?,
            },
            "shift_recip" => Expr::ShiftRecip {
                coord: coord()?,
                a: a()?,
            },
            "sqrt_shift_recip" => Expr::SqrtShiftRecip {
                coord: coord()?,
                w: a()?,
            },
            "pow_shift_recip" => Expr::PowShiftRecip {
                coord: coord()?,
                alpha: self
                    .s
                    .ok_or_else(|| HfcError::SchemaError("pow_shift_recip needs s".into()))?,
                a: a()?,
            },
            "exp" => Expr::Exp { coord: coord()? },
            "dilate" => Expr::Dilate {
                coord: coord()?,
                t: self
                    .t
                    .ok_or_else(|| HfcError::SchemaError("dilate needs t".into()))?,
                arg: Box::new(one_arg()?),
            },
            "recip" => Expr::Recip(Box::new(one_arg()?)),
            "scale" => Expr::Scale(a()?, Box::new(one_arg()?)),
            "add" => Expr::Add(
                self.args
                    .iter()
                    .map(|n| n.to_expr())
                    .collect::<Result<Vec<_>>>()?,
            ),
            "mul" => Expr::Mul(
                self.args
                    .iter()
                    .map(|n| n.to_expr())
                    .collect::<Result<Vec<_>>>()?,
            ),
            "tensor" => {
                if self.args.len() != 2 {
                    return Err(HfcError::SchemaError("tensor takes two args".into()));
                }
                let left = self.args[0].to_expr()?;
                let right = self.args[1].to_expr()?;
                let left_arity = self
                    .s
                    .map(|v| v as usize)
                    .unwrap_or_else(|| 32 - left.deps().leading_zeros() as usize);
                Expr::Tensor {
                    left: Box::new(left),
                    left_arity,
                    right: Box::new(right),
                }
            }
            other => {
                return Err(HfcError::SchemaError(format!("unknown op {other:?}")));
            }
        })
    }

    pub fn from_expr(e: &Expr) -> AstNode {
        let blank = AstNode {
            op: String::new(),
            args: vec![],
            coord: None,
            s: None,
            a: None,
            t: None,
        };
        match e {
            Expr::Const(c) => AstNode {
                op: "const".into(),
                a: Some([c.re, c.im]),
                ..blank
            },
            Expr::Pow { coord, s } => AstNode {
                op: "pow".into(),
                coord: Some(coord + 1),
                s: Some(*s),
                ..blank
            },
            Expr::ShiftRecip { coord, a } => AstNode {
                op: "shift_recip".into(),
                coord: Some(coord + 1),
                a: Some([a.re, a.im]),
                ..blank
            },
            Expr::SqrtShiftRecip { coord, w } => AstNode {
                op: "sqrt_shift_recip".into(),
                coord: Some(coord + 1),
                a: Some([w.re, w.im]),
                ..blank
            },
            Expr::PowShiftRecip { coord, alpha, a } => AstNode {
                op: "pow_shift_recip".into(),
                coord: Some(coord + 1),
                s: Some(*alpha),
                a: Some([a.re, a.im]),
                ..blank
            },
            Expr::Exp { coord } => AstNode {
                op: "exp".into(),
                coord: Some(coord + 1),
                ..blank
            },
            Expr::Dilate { coord, t, arg } => AstNode {
                op: "dilate".into(),
                coord: Some(coord + 1),
                t: Some(*t),
                args: vec![AstNode::from_expr(arg)],
                ..blank
            },
            Expr::Recip(arg) => AstNode {
                op: "recip".into(),
                args: vec![AstNode::from_expr(arg)],
                ..blank
            },
            Expr::Scale(c, arg) => AstNode {
                op: "scale".into(),
                a: Some([c.re, c.im]),
                args: vec![AstNode::from_expr(arg)],
                ..blank
            },
            Expr::Add(xs) => AstNode {
                op: "add".into(),
                args: xs.iter().map(AstNode::from_expr).collect(),
                ..blank
            },
            Expr::Mul(xs) => AstNode {
                op: "mul".into(),
                args: xs.iter().map(AstNode::from_expr).collect(),
                ..blank
            },
            Expr::Tensor {
                left,
                left_arity,
                right,
            } => AstNode {
                op: "tensor".into(),
                s: Some(*left_arity as f64),
                args: vec![AstNode::from_expr(left), AstNode::from_expr(right)],
                ..blank
            },
        }
    }
}

/// Wire certificate: `{"active": [1,2], "s": [0.5, 0.5], "C": 1.0}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertWire {
    pub active: Vec<usize>,
    pub s: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
}

impl CertWire {
    pub fn to_cert(&self, d: usize) -> Result<DecayCertificate> {
        let mut active = 0u32;
        let mut s = vec![0.0; d];
        if self.active.len() != self.s.len() {
            return Err(HfcError::SchemaError(
                "certificate active/s length mismatch".into(),
            ));
        }
        for (&k, &sk) in self.active.iter().zip(self.s.iter()) {
            if k == 0 || k > d {
                return Err(HfcError::SchemaError(format!("coordinate {k} out of range")));
            }
            active |= 1 << (k - 1);
            s[k - 1] = sk;
        }
        Ok(DecayCertificate {
            active,
            s,
            c: self.c,
        })
    }

    pub fn from_cert(cert: &DecayCertificate) -> CertWire {
        let mut active = Vec::new();
        let mut s = Vec::new();
        for k in 0..cert.s.len() {
            if cert.active >> k & 1 == 1 {
                active.push(k + 1);
                s.push(cert.s[k]);
            }
        }
        CertWire {
            active,
            s,
            c: cert.c,
        }
    }
}

/// Wire form of a declared function: domain angles, AST, optional certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub domain: Vec<f64>,
    pub ast: AstNode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertWire>,
}

impl FunctionSpec {
    pub fn to_function(&self) -> Result<SectorFunction> {
        let domain = SectorDomain::new(self.domain.clone())?;
        let tree = self.ast.to_expr()?;
        let deps = tree.deps();
        if deps >> domain.d() != 0 {
            return Err(HfcError::SchemaError(
                "AST references coordinates outside the domain arity".into(),
            ));
        }
        Ok(SectorFunction::new(domain, tree))
    }

    /// Materializes and, when a certificate is attached, verifies it.
    pub fn to_certified(&self) -> Result<CertifiedFunction> {
        let f = self.to_function()?;
        match &self.certificate {
            Some(cw) => {
                let cert = cw.to_cert(f.d())?;
                let rep = decay_check(&f, &cert, 8);
                if !rep.pass {
                    return Err(HfcError::SchemaError(format!(
                        "declared certificate fails by {:.3e}",
                        rep.worst_slack
                    )));
                }
                Ok(CertifiedFunction { f, cert })
            }
            None => Err(HfcError::SchemaError(
                "function used in the calculus needs a certificate".into(),
            )),
        }
    }
}
