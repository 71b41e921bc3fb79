//! Complex matrices and the dense kernels everything else is built on.
//!
//! Eigendecompositions, SVD and linear solves are delegated to LAPACK
//! (zgeev/zheev/zgesdd/zgesv via `ndarray-linalg`); the matrix exponential
//! (Pade 13 with scaling and squaring) and the principal square root
//! (Denman-Beavers iteration) are implemented here.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Determinant, Eig, Eigh, Inverse, Solve, UPLO};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{HfcError, Result};

pub type C64 = Complex64;
pub type CVector = Array1<C64>;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense complex matrix, row-major semantics.
///
/// JSON encoding: array of rows, each entry a `[re, im]` pair.
#[derive(Debug, Clone)]
pub struct CMatrix {
    data: Array2<C64>,
}

impl CMatrix {
    pub fn from_array(data: Array2<C64>) -> Self {
        CMatrix { data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            data: Array2::zeros((rows, cols)),
        }
    }

    pub fn identity(n: usize) -> Self {
        CMatrix {
            data: Array2::eye(n),
        }
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Array2::zeros((n, n));
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        CMatrix { data: m }
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        Self::diag(&entries.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>())
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(HfcError::InvalidParameter("empty matrix".into()));
        }
        let c = rows[0].len();
        if rows.iter().any(|row| row.len() != c) {
            return Err(HfcError::DimensionMismatch("ragged rows".into()));
        }
        let flat: Vec<C64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((r, c), flat)
            .map_err(|e| HfcError::DimensionMismatch(e.to_string()))?;
        Ok(CMatrix { data })
    }

    /// Real-entry convenience constructor, mostly for tests and examples.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let conv: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&conv).expect("rectangular real rows")
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows()
    }

    pub fn array(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn array_mut(&mut self) -> &mut Array2<C64> {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[(i, j)] = v;
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        CMatrix {
            data: self.data.dot(&other.data),
        }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        self.data.dot(v)
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        CMatrix {
            data: &self.data + &other.data,
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        CMatrix {
            data: &self.data - &other.data,
        }
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            data: self.data.mapv(|x| x * s),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let mut t = self.data.t().to_owned();
        t.mapv_inplace(|x| x.conj());
        CMatrix { data: t }
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix {
            data: self.data.t().to_owned(),
        }
    }

    pub fn conj(&self) -> CMatrix {
        CMatrix {
            data: self.data.mapv(|x| x.conj()),
        }
    }

    pub fn column(&self, j: usize) -> CVector {
        self.data.column(j).to_owned()
    }

    pub fn set_column(&mut self, j: usize, v: &CVector) {
        self.data.column_mut(j).assign(v);
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Largest singular value, computed by LAPACK.
    pub fn spectral_norm(&self) -> f64 {
        if self.rows() == 0 || self.cols() == 0 {
            return 0.0;
        }
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    /// Singular values in nonincreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        use ndarray_linalg::SVD;
        let (_, s, _) = self
            .data
            .svd(false, false)
            .expect("LAPACK svd on finite input");
        let mut v: Vec<f64> = s.to_vec();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }

    /// Full SVD `A = U diag(s) V^*`; returns `(U, s, V)`.
    pub fn svd_full(&self) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
        use ndarray_linalg::SVD;
        let (u, s, vt) = self
            .data
            .svd(true, true)
            .map_err(|e| HfcError::NumericalFailure(format!("svd: {e}")))?;
        let u = u.ok_or_else(|| HfcError::NumericalFailure("svd: no U".into()))?;
        let vt = vt.ok_or_else(|| HfcError::NumericalFailure("svd: no Vt".into()))?;
        let v = CMatrix { data: vt }.adjoint();
        Ok((CMatrix { data: u }, s.to_vec(), v))
    }

    pub fn solve_vec(&self, b: &CVector) -> Result<CVector> {
        self.data
            .solve(b)
            .map_err(|e| HfcError::SingularResolvent(format!("solve: {e}")))
    }

    pub fn solve_mat(&self, b: &CMatrix) -> Result<CMatrix> {
        let inv = self.inverse()?;
        Ok(inv.matmul(b))
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        let inv = self
            .data
            .inv()
            .map_err(|e| HfcError::SingularResolvent(format!("inverse: {e}")))?;
        Ok(CMatrix { data: inv })
    }

    pub fn determinant(&self) -> Result<C64> {
        self.data
            .det()
            .map_err(|e| HfcError::NumericalFailure(format!("det: {e}")))
    }

    /// Eigenvalues and eigenvectors (columns) of a general complex matrix.
    pub fn eig(&self) -> Result<(Vec<C64>, CMatrix)> {
        let (vals, vecs) = self
            .data
            .eig()
            .map_err(|e| HfcError::NumericalFailure(format!("eig: {e}")))?;
        Ok((vals.to_vec(), CMatrix { data: vecs }))
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        Ok(self.eig()?.0)
    }

    /// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
    pub fn eigh(&self) -> Result<(Vec<f64>, CMatrix)> {
        let (vals, vecs) = self
            .data
            .eigh(UPLO::Lower)
            .map_err(|e| HfcError::NumericalFailure(format!("eigh: {e}")))?;
        Ok((vals.to_vec(), CMatrix { data: vecs }))
    }

    /// Relative deviation `|A - B| / max(|A|, |B|, floor)` in spectral norm.
    pub fn rel_diff(&self, other: &CMatrix) -> f64 {
        let denom = self
            .spectral_norm()
            .max(other.spectral_norm())
            .max(f64::MIN_POSITIVE.sqrt());
        self.sub(other).spectral_norm() / denom
    }

    /// Matrix exponential by Pade-13 approximation with scaling and squaring.
    pub fn expm(&self) -> CMatrix {
        expm(self)
    }

    /// Principal matrix square root; spectrum must avoid `(-inf, 0]`.
    pub fn sqrtm(&self) -> Result<CMatrix> {
        sqrtm_principal(self)
    }
}

fn one_norm(a: &Array2<C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|x| x.norm()).sum();
        best = best.max(s);
    }
    best
}

const PADE13_B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Pade-13 scaling-and-squaring exponential (Higham 2005) over complex entries.
fn expm(a: &CMatrix) -> CMatrix {
    let n = a.dim();
    let norm = one_norm(a.array());
    let s = if norm > THETA13 {
        ((norm / THETA13).log2().ceil() as i32).max(0)
    } else {
        0
    };
    let scale = C64::new(0.5f64.powi(s), 0.0);
    let a1 = a.scale(scale);
    let a2 = a1.matmul(&a1);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);
    let b = |k: usize| C64::new(PADE13_B[k], 0.0);
    let eye = CMatrix::identity(n);

    // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let inner_u = a6
        .scale(b(13))
        .add(&a4.scale(b(11)))
        .add(&a2.scale(b(9)));
    let u_core = a6
        .matmul(&inner_u)
        .add(&a6.scale(b(7)))
        .add(&a4.scale(b(5)))
        .add(&a2.scale(b(3)))
        .add(&eye.scale(b(1)));
    let u = a1.matmul(&u_core);

    // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let inner_v = a6
        .scale(b(12))
        .add(&a4.scale(b(10)))
        .add(&a2.scale(b(8)));
    let v = a6
        .matmul(&inner_v)
        .add(&a6.scale(b(6)))
        .add(&a4.scale(b(4)))
        .add(&a2.scale(b(2)))
        .add(&eye.scale(b(0)));

    let num = v.add(&u);
    let den = v.sub(&u);
    let mut x = den
        .solve_mat(&num)
        .expect("Pade denominator is nonsingular for scaled input");
    for _ in 0..s {
        x = x.matmul(&x);
    }
    x
}

/// Tolerance used to decide that an eigenvalue sits on the branch cut.
const BRANCH_CUT_TOL: f64 = 1e-12;

/// Checks that no eigenvalue lies on `(-inf, 0]` relative to the spectral scale.
pub fn branch_cut_check(eigs: &[C64]) -> Result<()> {
    let scale = eigs.iter().map(|l| l.norm()).fold(0.0, f64::max).max(1e-300);
    for l in eigs {
        let on_cut = l.norm() <= BRANCH_CUT_TOL * scale
            || (l.re <= 0.0 && l.im.abs() <= BRANCH_CUT_TOL * scale);
        if on_cut {
            return Err(HfcError::BranchCutViolation(format!(
                "eigenvalue {l} lies on (-inf, 0]"
            )));
        }
    }
    Ok(())
}

/// Denman-Beavers iteration with determinant scaling.
fn sqrtm_principal(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(HfcError::DimensionMismatch("sqrtm of non-square".into()));
    }
    let n = a.dim();
    branch_cut_check(&a.eigenvalues()?)?;

    let mut y = a.clone();
    let mut z = CMatrix::identity(n);
    let norm_a = a.spectral_norm().max(f64::MIN_POSITIVE);
    for iter in 0..80 {
        if iter < 12 {
            let dy = y.determinant()?.norm();
            let dz = z.determinant()?.norm();
            if dy > 0.0 && dz > 0.0 && dy.is_finite() && dz.is_finite() {
                let g = (dy * dz).powf(-1.0 / (2.0 * n as f64));
                if g.is_finite() && g > 0.0 {
                    let gc = C64::new(g, 0.0);
                    y = y.scale(gc);
                    z = z.scale(gc);
                }
            }
        }
        let zi = z.inverse()?;
        let yi = y.inverse()?;
        let y_next = y.add(&zi).scale(C64::new(0.5, 0.0));
        let z_next = z.add(&yi).scale(C64::new(0.5, 0.0));
        let delta = y_next.sub(&y).spectral_norm();
        y = y_next;
        z = z_next;
        if delta <= 1e-14 * y.spectral_norm() {
            break;
        }
    }
    let resid = y.matmul(&y).sub(a).spectral_norm() / norm_a;
    if resid > 1e-10 {
        return Err(HfcError::NumericalFailure(format!(
            "sqrtm residual {resid:.3e} exceeds 1e-10"
        )));
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// serde: row-major array of arrays of [re, im]
// ---------------------------------------------------------------------------

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| [self.get(i, j).re, self.get(i, j).im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let conv: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|p| C64::new(p[0], p[1])).collect())
            .collect();
        let m = CMatrix::from_rows(&conv).map_err(|e| D::Error::custom(e.to_string()))?;
        if !m.is_finite() {
            return Err(D::Error::custom("matrix entries must be finite"));
        }
        Ok(m)
    }
}

/// Serialize a complex vector as an array of `[re, im]` pairs.
pub fn vector_to_json(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

pub fn vector_from_json(entries: &[[f64; 2]]) -> CVector {
    Array1::from_iter(entries.iter().map(|p| C64::new(p[0], p[1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expm_diagonal_matches_scalar_exp() {
        let a = CMatrix::diag(&[C64::new(1.0, 0.5), C64::new(-2.0, 0.0)]);
        let e = a.expm();
        assert_relative_eq!(e.get(0, 0).re, C64::new(1.0, 0.5).exp().re, max_relative = 1e-13);
        assert_relative_eq!(e.get(0, 0).im, C64::new(1.0, 0.5).exp().im, max_relative = 1e-13);
        assert_relative_eq!(e.get(1, 1).re, (-2.0f64).exp(), max_relative = 1e-13);
        assert!(e.get(0, 1).norm() < 1e-15);
    }

    #[test]
    fn expm_nilpotent_is_polynomial() {
        let a = CMatrix::from_real_rows(&[&[0.0, 3.0], &[0.0, 0.0]]);
        let e = a.expm();
        assert_relative_eq!(e.get(0, 0).re, 1.0, max_relative = 1e-14);
        assert_relative_eq!(e.get(0, 1).re, 3.0, max_relative = 1e-14);
        assert_relative_eq!(e.get(1, 1).re, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn expm_semigroup_property() {
        let a = CMatrix::from_real_rows(&[&[1.0, 2.0], &[0.3, -1.5]]);
        let e1 = a.scale(C64::new(0.7, 0.0)).expm();
        let e2 = a.scale(C64::new(0.3, 0.0)).expm();
        let e = a.expm();
        assert!(e1.matmul(&e2).rel_diff(&e) < 1e-12);
    }

    #[test]
    fn sqrtm_diagonal() {
        let a = CMatrix::diag_real(&[4.0, 9.0]);
        let s = a.sqrtm().unwrap();
        assert_relative_eq!(s.get(0, 0).re, 2.0, max_relative = 1e-12);
        assert_relative_eq!(s.get(1, 1).re, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn sqrtm_principal_branch_of_i() {
        let a = CMatrix::diag(&[I]);
        let s = a.sqrtm().unwrap();
        let expected = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        assert!((s.get(0, 0) - expected).norm() < 1e-12);
    }

    #[test]
    fn sqrtm_jordan_block_squares_back() {
        let a = CMatrix::from_real_rows(&[&[2.0, 1.0], &[0.0, 2.0]]);
        let s = a.sqrtm().unwrap();
        assert!(s.matmul(&s).rel_diff(&a) < 1e-10);
    }

    #[test]
    fn sqrtm_rejects_branch_cut() {
        let a = CMatrix::diag_real(&[-1.0, 2.0]);
        assert!(matches!(a.sqrtm(), Err(HfcError::BranchCutViolation(_))));
        let z = CMatrix::diag_real(&[0.0, 2.0]);
        assert!(matches!(z.sqrtm(), Err(HfcError::BranchCutViolation(_))));
    }

    #[test]
    fn eig_reconstructs() {
        let a = CMatrix::from_real_rows(&[&[3.0, 1.0, 0.0], &[0.2, 2.0, 0.5], &[0.0, 0.1, 1.0]]);
        let (vals, vecs) = a.eig().unwrap();
        let vinv = vecs.inverse().unwrap();
        let rec = vecs.matmul(&CMatrix::diag(&vals)).matmul(&vinv);
        assert!(rec.rel_diff(&a) < 1e-12);
    }

    #[test]
    fn matrix_json_round_trip() {
        let a = CMatrix::from_rows(&[
            vec![C64::new(1.0, -2.0), C64::new(0.25, 0.0)],
            vec![C64::new(0.0, 3.5), C64::new(-1.0, 1e-9)],
        ])
        .unwrap();
        let s = serde_json::to_string(&a).unwrap();
        let b: CMatrix = serde_json::from_str(&s).unwrap();
        assert!(a.rel_diff(&b) == 0.0);
        assert!(s.starts_with("[[["));
    }
}
