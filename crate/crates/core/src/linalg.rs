//! Dense complex linear algebra for small matrices: the matrix exponential,
//! Hermitian spectral calculus, and the Cartan (polar) decomposition
//! `g = k · exp(i ξ)` of an invertible matrix into a unitary factor and the
//! exponential of a Hermitian one.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CVec = DVector<C64>;

/// Absolute tolerance for algebraic identities in double precision.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Condition numbers above this are treated as singular by the polar factorization.
pub const DEFAULT_MAX_CONDITION: f64 = 1e10;

pub const I: C64 = Complex { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix must have at least one row and column".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let m = DMatrix::from_row_slice(rows, cols, &entries);
        Self::from_inner(m)
    }

    pub fn from_inner(m: DMatrix<C64>) -> Result<Self> {
        for col in 0..m.ncols() {
            for row in 0..m.nrows() {
                let z = m[(row, col)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(Self(m))
    }

    /// Wraps a matrix known to be finite (internal results of finite arithmetic).
    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(nrows, ncols, rows.concat())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| c(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, z: C64) -> Self {
        Self(&self.0 * z)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn determinant(&self) -> Result<C64> {
        self.require_square("determinant")?;
        Ok(self.0.clone().determinant())
    }

    pub fn try_inverse(&self) -> Result<Self> {
        self.require_square("inverse")?;
        self.0
            .clone()
            .try_inverse()
            .map(Self)
            .ok_or(Error::Singular { condition: f64::INFINITY })
    }

    /// Largest absolute entry.
    pub fn max_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply(&self, v: &CVec) -> Result<CVec> {
        if v.len() != self.cols() {
            return Err(Error::Dimension(format!(
                "vector of length {} applied to a {}x{} matrix",
                v.len(),
                self.rows(),
                self.cols()
            )));
        }
        Ok(&self.0 * v)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::identity(self.rows());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// `‖A + Aᴴ‖_max`; zero for anti-Hermitian matrices.
    pub fn anti_hermitian_residual(&self) -> f64 {
        (&self.0 + self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖A − Aᴴ‖_max`; zero for Hermitian matrices.
    pub fn hermitian_residual(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn rows_vec(&self) -> Vec<Vec<C64>> {
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows(),
                self.cols()
            )))
        }
    }
}

impl fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows() {
            let row: Vec<String> = (0..self.cols())
                .map(|j| {
                    let z = self.0[(i, j)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

// JSON layout: row-major nested arrays of [re, im] pairs.
impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = self
            .rows_vec()
            .into_iter()
            .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        let rows: Vec<Vec<C64>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(|[re, im]| c(re, im)).collect())
            .collect();
        ComplexMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for complex vectors as arrays of `[re, im]` pairs.
pub mod cvec_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_pairs(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CVec, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(from_pairs(&pairs))
    }

    pub fn to_pairs(v: &CVec) -> Vec<[f64; 2]> {
        v.iter().map(|z| [z.re, z.im]).collect()
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> CVec {
        CVec::from_iterator(pairs.len(), pairs.iter().map(|&[re, im]| c(re, im)))
    }
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn mat_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.require_square("exponential")?;
    if a.0.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Ok(ComplexMatrix::identity(a.rows()));
    }
    ComplexMatrix::from_inner(a.0.exp())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(h: &ComplexMatrix) -> Result<(Vec<f64>, DMatrix<C64>)> {
    h.require_square("Hermitian eigendecomposition")?;
    let sym = (&h.0 + h.0.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Ok((values, vectors))
}

/// Smallest eigenvalue of a Hermitian matrix; closed form for n ≤ 2.
pub fn min_hermitian_eigenvalue(h: &DMatrix<C64>) -> f64 {
    match h.nrows() {
        1 => h[(0, 0)].re,
        2 => {
            let a = h[(0, 0)].re;
            let d = h[(1, 1)].re;
            let b = 0.5 * (h[(0, 1)] + h[(1, 0)].conj());
            let mean = 0.5 * (a + d);
            let half_gap = 0.5 * (a - d);
            mean - (half_gap * half_gap + b.norm_sqr()).sqrt()
        }
        _ => {
            let sym = (h + h.adjoint()) * c(0.5, 0.0);
            SymmetricEigen::new(sym).eigenvalues.min()
        }
    }
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(h: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let (values, v) = hermitian_eigen(h)?;
    Ok(ComplexMatrix::wrap(spectral(&values, &v, f)))
}

fn spectral(values: &[f64], v: &DMatrix<C64>, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&x| c(f(x), 0.0)),
    ));
    v * d * v.adjoint()
}

/// True iff `‖g gᴴ − I‖_max ≤ tol`.
pub fn is_unitary(g: &ComplexMatrix, tol: f64) -> bool {
    unitarity_defect(g) <= tol
}

pub fn unitarity_defect(g: &ComplexMatrix) -> f64 {
    if !g.is_square() {
        return f64::INFINITY;
    }
    let n = g.rows();
    (&g.0 * g.0.adjoint() - DMatrix::<C64>::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Element of the compact Lie algebra: an anti-Hermitian matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LieAlgebraElement {
    matrix: ComplexMatrix,
}

impl LieAlgebraElement {
    pub fn new(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("Lie algebra elements are square".into()));
        }
        let residual = matrix.anti_hermitian_residual();
        if residual > tol {
            return Err(Error::Precondition(format!(
                "matrix is not anti-Hermitian (residual {residual:.3e} > {tol:.1e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn zero(n: usize) -> Self {
        Self { matrix: ComplexMatrix::zeros(n, n) }
    }

    /// `−i·h` for a Hermitian `h`.
    pub fn from_hermitian(h: &ComplexMatrix, tol: f64) -> Result<Self> {
        Self::new(h.scale(-I), tol)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// The Hermitian matrix `i·ξ`.
    pub fn times_i(&self) -> ComplexMatrix {
        self.matrix.scale(I)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

impl<'de> Deserialize<'de> for LieAlgebraElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(d)?;
        LieAlgebraElement::new(m, DEFAULT_TOL).map_err(serde::de::Error::custom)
    }
}

/// Factors of `g = k · exp(i ξ)`.
#[derive(Clone, Debug, Serialize)]
pub struct CartanFactors {
    pub k: ComplexMatrix,
    pub xi: LieAlgebraElement,
    /// Estimated 2-norm condition number of `g`.
    pub condition: f64,
}

impl CartanFactors {
    /// The positive-definite factor `exp(i ξ)`.
    pub fn positive_factor(&self) -> ComplexMatrix {
        hermitian_function(&self.xi.times_i(), f64::exp)
            .expect("Lie algebra elements are square")
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let p = mat_exp(&self.xi.times_i()).expect("Lie algebra elements are square");
        &self.k * &p
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CartanOptions {
    pub tol: f64,
    pub max_condition: f64,
}

impl Default for CartanOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_condition: DEFAULT_MAX_CONDITION }
    }
}

pub fn cartan_decompose(g: &ComplexMatrix) -> Result<CartanFactors> {
    cartan_decompose_with(g, CartanOptions::default())
}

/// Polar factorization through the Hermitian square root of `gᴴg`.
///
/// With `gᴴg = V diag(σ²) Vᴴ`, the positive factor is `P = V diag(σ) Vᴴ`,
/// `k = g P⁻¹`, and `i ξ = log P = V diag(ln σ) Vᴴ`.
pub fn cartan_decompose_with(g: &ComplexMatrix, opts: CartanOptions) -> Result<CartanFactors> {
    g.require_square("Cartan decomposition")?;
    let gram = ComplexMatrix::wrap(g.0.adjoint() * &g.0);
    let (values, v) = hermitian_eigen(&gram)?;
    let smallest = values[0];
    let largest = values[values.len() - 1];
    if !(smallest > 0.0) {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let condition = (largest / smallest).sqrt();
    if !condition.is_finite() || condition > opts.max_condition {
        return Err(Error::Singular { condition });
    }
    let p_inv = spectral(&values, &v, |x| 1.0 / x.sqrt());
    let log_p = spectral(&values, &v, |x| 0.5 * x.ln());
    let k = ComplexMatrix::wrap(&g.0 * p_inv);
    let hermitian = ComplexMatrix::wrap((&log_p + log_p.adjoint()) * c(0.5, 0.0));
    let xi = LieAlgebraElement::from_hermitian(&hermitian, opts.tol)?;
    Ok(CartanFactors { k, xi, condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    fn diag(xs: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&xs.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn exp_of_zero_is_exact_identity() {
        let e = mat_exp(&ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(e, ComplexMatrix::identity(2));
    }

    #[test]
    fn exp_of_diagonal_matches_scalar_exponential() {
        let e = mat_exp(&diag(&[LN_2, -LN_2])).unwrap();
        assert!((&e - &diag(&[2.0, 0.5])).max_norm() < 1e-14);
    }

    #[test]
    fn exp_of_rotation_generator() {
        let theta = FRAC_PI_2;
        let a = ComplexMatrix::from_real_rows(&[&[0.0, theta], &[-theta, 0.0]]).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).unwrap();
        assert!((&mat_exp(&a).unwrap() - &expected).max_norm() < 1e-14);
    }

    #[test]
    fn exp_rejects_rectangular() {
        assert!(matches!(mat_exp(&ComplexMatrix::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn non_finite_entries_rejected() {
        let err = ComplexMatrix::new(1, 2, vec![c(1.0, 0.0), c(f64::NAN, 0.0)]).unwrap_err();
        assert_eq!(err, Error::NonFinite { row: 0, col: 1 });
    }

    #[test]
    fn cartan_of_identity() {
        let f = cartan_decompose(&ComplexMatrix::identity(3)).unwrap();
        assert!((&f.k - &ComplexMatrix::identity(3)).max_norm() < 1e-15);
        assert!(f.xi.matrix().max_norm() < 1e-15);
    }

    #[test]
    fn cartan_of_positive_diagonal() {
        let f = cartan_decompose(&diag(&[2.0, 0.5])).unwrap();
        assert!((&f.k - &ComplexMatrix::identity(2)).max_norm() < 1e-14);
        let expected = diag(&[LN_2, -LN_2]).scale(-I);
        assert!((f.xi.matrix() - &expected).max_norm() < 1e-14);
    }

    #[test]
    fn cartan_rejects_singular() {
        let g = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(cartan_decompose(&g), Err(Error::Singular { .. })));
    }

    #[test]
    fn cartan_rejects_ill_conditioned() {
        let g = diag(&[1.0, 1e-12]);
        match cartan_decompose(&g) {
            Err(Error::Singular { condition }) => assert!(condition > 1e11),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn unitary_checks() {
        assert!(is_unitary(&ComplexMatrix::identity(2), 1e-12));
        assert!(!is_unitary(&diag(&[2.0, 0.5]), 1e-6));
        let a1 = ComplexMatrix::from_real_rows(&[&[-0.5, 1.5], &[-0.5, -0.5]]).unwrap();
        // A₁·A₁ᴴ has (0,0) entry 1/4 + 9/4 = 5/2.
        assert!(!is_unitary(&a1, 1e-6));
        assert!((a1.determinant().unwrap() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn lie_element_rejects_hermitian() {
        assert!(LieAlgebraElement::new(diag(&[1.0, -1.0]), 1e-9).is_err());
        assert!(LieAlgebraElement::new(diag(&[1.0, -1.0]).scale(I), 1e-9).is_ok());
    }

    #[test]
    fn json_layout_is_nested_pairs() {
        let m = ComplexMatrix::new(1, 2, vec![c(1.0, 2.0), c(3.0, -4.0)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[[1.0,2.0],[3.0,-4.0]]]");
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn min_eigenvalue_closed_form_matches_solver() {
        let h = ComplexMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(0.3, -0.7)],
            vec![c(0.3, 0.7), c(-1.0, 0.0)],
        ])
        .unwrap();
        let (values, _) = hermitian_eigen(&h).unwrap();
        assert!((min_hermitian_eigenvalue(h.inner()) - values[0]).abs() < 1e-13);
    }
}
