//! Finite-dimensional normed models: Euclidean, `l^p` and Schatten `S^p`.
//!
//! Operator norms on Euclidean models (and the `p = 2` cases, which coincide
//! with them) are exact largest singular values. On the other models the norm
//! is estimated by the Boyd/Higham dual power iteration with seeded random
//! restarts; the estimate is a certified lower bound and is deterministic for
//! a fixed seed.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{HfcError, Result};
use crate::linalg::{CMatrix, CVector};
use crate::stochastic::rng_stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Euclidean,
    Lp,
    Schatten,
}

/// A concrete normed model space.
///
/// `dim` is the vector dimension; for `Schatten`, vectors are `n x n`
/// matrices flattened row-major and `dim = n^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceModel {
    pub kind: SpaceKind,
    pub p: f64,
    pub dim: usize,
}

impl SpaceModel {
    pub fn euclidean(dim: usize) -> Self {
        SpaceModel {
            kind: SpaceKind::Euclidean,
            p: 2.0,
            dim,
        }
    }

    pub fn lp(p: f64, dim: usize) -> Self {
        SpaceModel {
            kind: SpaceKind::Lp,
            p,
            dim,
        }
    }

    /// Schatten class on `n x n` matrices; the model dimension is `n^2`.
    pub fn schatten(p: f64, side: usize) -> Self {
        SpaceModel {
            kind: SpaceKind::Schatten,
            p,
            dim: side * side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(HfcError::InvalidParameter("dim must be >= 1".into()));
        }
        match self.kind {
            SpaceKind::Euclidean => Ok(()),
            SpaceKind::Lp | SpaceKind::Schatten => {
                if self.p < 1.0 {
                    return Err(HfcError::InvalidParameter(format!(
                        "p = {} outside [1, inf]",
                        self.p
                    )));
                }
                if self.kind == SpaceKind::Schatten {
                    let n = (self.dim as f64).sqrt().round() as usize;
                    if n * n != self.dim {
                        return Err(HfcError::InvalidParameter(
                            "schatten dim must be a perfect square".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn schatten_side(&self) -> usize {
        (self.dim as f64).sqrt().round() as usize
    }

    /// True when the norm coincides with the Euclidean one.
    pub fn is_hilbert(&self) -> bool {
        match self.kind {
            SpaceKind::Euclidean => true,
            SpaceKind::Lp | SpaceKind::Schatten => self.p == 2.0,
        }
    }

    /// Dual model: `l^p -> l^{p'}`, `S^p -> S^{p'}`, Euclidean self-dual.
    pub fn dual(&self) -> SpaceModel {
        let pd = conjugate_exponent(self.p);
        match self.kind {
            SpaceKind::Euclidean => *self,
            SpaceKind::Lp => SpaceModel::lp(pd, self.dim),
            SpaceKind::Schatten => SpaceModel {
                kind: SpaceKind::Schatten,
                p: pd,
                dim: self.dim,
            },
        }
    }

    pub fn norm(&self, x: &CVector) -> f64 {
        match self.kind {
            SpaceKind::Euclidean => l2_norm(x),
            SpaceKind::Lp => lp_norm(x, self.p),
            SpaceKind::Schatten => {
                if self.p == 2.0 {
                    l2_norm(x)
                } else {
                    let m = unflatten(x, self.schatten_side());
                    schatten_norm(&m.singular_values(), self.p)
                }
            }
        }
    }

    /// Norming functional: returns `xi` with `<xi, x> = ||x||` under the
    /// sesquilinear pairing `sum conj(xi_i) x_i` and `||xi||_dual = 1`.
    /// Returns zero for `x = 0`.
    pub fn duality_map(&self, x: &CVector) -> CVector {
        match self.kind {
            SpaceKind::Euclidean => {
                let n = l2_norm(x);
                if n == 0.0 {
                    x.clone()
                } else {
                    x.mapv(|v| v / n)
                }
            }
            SpaceKind::Lp => lp_duality_map(x, self.p),
            SpaceKind::Schatten => {
                if self.p == 2.0 {
                    return SpaceModel::euclidean(self.dim).duality_map(x);
                }
                let side = self.schatten_side();
                let m = unflatten(x, side);
                let d = schatten_duality_map(&m, self.p);
                flatten(&d)
            }
        }
    }
}

pub fn conjugate_exponent(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn l2_norm(x: &CVector) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn lp_norm(x: &CVector, p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().map(|v| v.norm()).fold(0.0, f64::max)
    } else if p == 1.0 {
        x.iter().map(|v| v.norm()).sum()
    } else if p == 2.0 {
        l2_norm(x)
    } else {
        x.iter().map(|v| v.norm().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn csign(z: C64) -> C64 {
    let n = z.norm();
    if n == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        z / n
    }
}

fn lp_duality_map(x: &CVector, p: f64) -> CVector {
    let nx = lp_norm(x, p);
    if nx == 0.0 {
        return x.clone();
    }
    if p.is_infinite() {
        // support functional at the modulus argmax
        let (imax, _) = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        let mut xi = Array1::zeros(x.len());
        xi[imax] = csign(x[imax]);
        xi
    } else if p == 1.0 {
        x.mapv(csign)
    } else {
        x.mapv(|v| csign(v) * v.norm().powf(p - 1.0) / nx.powf(p - 1.0))
    }
}

fn unflatten(x: &CVector, side: usize) -> CMatrix {
    let mut m = CMatrix::zeros(side, side);
    for i in 0..side {
        for j in 0..side {
            m.set(i, j, x[i * side + j]);
        }
    }
    m
}

fn flatten(m: &CMatrix) -> CVector {
    let side = m.rows();
    Array1::from_iter((0..side).flat_map(|i| (0..side).map(move |j| (i, j))).map(|(i, j)| m.get(i, j)))
}

fn schatten_norm(svals: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        svals.first().copied().unwrap_or(0.0)
    } else if p == 1.0 {
        svals.iter().sum()
    } else {
        svals.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn schatten_duality_map(m: &CMatrix, p: f64) -> CMatrix {
    let (u, s, v) = m.svd_full().expect("svd of finite matrix");
    let norm = schatten_norm(&s, p);
    if norm == 0.0 {
        return CMatrix::zeros(m.rows(), m.cols());
    }
    let side = m.rows();
    let diag: Vec<C64> = if p.is_infinite() {
        // subgradient at the top singular direction
        let mut d = vec![C64::new(0.0, 0.0); side];
        d[0] = C64::new(1.0, 0.0);
        d
    } else if p == 1.0 {
        s.iter()
            .map(|&si| C64::new(if si > 0.0 { 1.0 } else { 0.0 }, 0.0))
            .collect()
    } else {
        s.iter()
            .map(|&si| C64::new(si.powf(p - 1.0) / norm.powf(p - 1.0), 0.0))
            .collect()
    };
    u.matmul(&CMatrix::diag(&diag)).matmul(&v.adjoint())
}

/// Configuration for the seeded multi-start norm maximization.
#[derive(Debug, Clone, Copy)]
pub struct NormSearchCfg {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NormSearchCfg {
    fn default() -> Self {
        NormSearchCfg {
            restarts: 32,
            max_iter: 200,
            tol: 1e-12,
            seed: 0x5eed,
        }
    }
}

/// Operator norm estimate with the attaining vector.
#[derive(Debug, Clone)]
pub struct NormEstimate {
    pub value: f64,
    pub witness: CVector,
    pub exact: bool,
}

/// Operator norm of `a` on the model space.
///
/// Euclidean (and `p = 2`) norms are exact; otherwise the Boyd dual power
/// iteration runs from `cfg.restarts` seeded starting vectors and the best
/// stationary value is reported as a lower bound.
pub fn operator_norm(a: &CMatrix, space: &SpaceModel, cfg: &NormSearchCfg) -> NormEstimate {
    assert_eq!(a.cols(), space.dim, "operator/space dimension mismatch");
    if space.is_hilbert() {
        let (u, s, v) = a.svd_full().expect("svd");
        let _ = u;
        let value = s.first().copied().unwrap_or(0.0);
        return NormEstimate {
            value,
            witness: v.column(0),
            exact: true,
        };
    }
    let dual = space.dual();
    let adj = a.adjoint();
    let mut best = NormEstimate {
        value: 0.0,
        witness: Array1::zeros(space.dim),
        exact: false,
    };
    let mut rng = rng_stream(cfg.seed, "operator_norm", 0);
    for restart in 0..cfg.restarts {
        let mut x: CVector = if restart == 0 {
            Array1::from_elem(space.dim, C64::new(1.0, 0.0))
        } else {
            Array1::from_iter(
                (0..space.dim).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)),
            )
        };
        let nx = space.norm(&x);
        if nx == 0.0 {
            continue;
        }
        x = x.mapv(|v| v / nx);
        let mut gamma = 0.0f64;
        let mut stall = 0usize;
        for _ in 0..cfg.max_iter {
            let y = a.apply(&x);
            let g = space.norm(&y);
            if g <= f64::MIN_POSITIVE {
                break;
            }
            // the Boyd estimate is nondecreasing; stop once it stalls
            if g <= gamma * (1.0 + 1e-13) {
                stall += 1;
                if stall >= 2 {
                    gamma = gamma.max(g);
                    break;
                }
            } else {
                stall = 0;
            }
            gamma = g;
            let xi = space.duality_map(&y);
            let z = adj.apply(&xi);
            let zn = dual.norm(&z);
            // stationarity: ||z||_* <= Re <z, x>
            let inner: f64 = z
                .iter()
                .zip(x.iter())
                .map(|(zi, xi)| (zi.conj() * xi).re)
                .sum();
            if zn <= inner * (1.0 + cfg.tol) + cfg.tol {
                break;
            }
            x = dual.duality_map(&z);
            // duality_map returns a unit vector of the primal norm
            let nx = space.norm(&x);
            if nx == 0.0 {
                break;
            }
            x = x.mapv(|v| v / nx);
        }
        if gamma > best.value {
            best.value = gamma;
            best.witness = x;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// serde: {"kind": "lp", "p": 2.0, "dim": 4}; p may be the string "inf"
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceModelWire {
    kind: SpaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<PWire>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PWire {
    Num(f64),
    Str(String),
}

impl Serialize for SpaceModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let p = match self.kind {
            SpaceKind::Euclidean => None,
            _ => Some(if self.p.is_infinite() {
                PWire::Str("inf".into())
            } else {
                PWire::Num(self.p)
            }),
        };
        SpaceModelWire {
            kind: self.kind,
            p,
            dim: self.dim,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpaceModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = SpaceModelWire::deserialize(deserializer)?;
        let p = match wire.p {
            None => 2.0,
            Some(PWire::Num(v)) => v,
            Some(PWire::Str(s)) if s == "inf" || s == "infinity" => f64::INFINITY,
            Some(PWire::Str(s)) => {
                return Err(D::Error::custom(format!("invalid p: {s:?}")));
            }
        };
        let model = SpaceModel {
            kind: wire.kind,
            p,
            dim: wire.dim,
        };
        model.validate().map_err(|e| D::Error::custom(e.to_string()))?;
        Ok(model)
    }
}
