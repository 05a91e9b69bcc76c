//! Quadratic momentum maps of unitary linear actions.
//!
//! Conventions: the inner product `⟨u, w⟩ = Σ wᵢ conj(uᵢ) vᵢ` is antilinear in
//! the first slot, the symplectic form is `Ω = Im⟨·,·⟩`, and the Riemannian
//! metric is `Re⟨·,·⟩`. For an action matrix `A` (anti-self-adjoint for the
//! weighted product) the momentum component is `Φ^A(v) = ½ Im⟨Av, v⟩` and its
//! gradient is `i·A·v`. In one dimension with `A = i` this gives
//! `Φ(v) = −|v|²/2`, increasing along the flow `e^{−t} v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, CVec, C64, DEFAULT_TOL, I};

/// `Cⁿ` with a diagonal Hermitian inner product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct HermitianSpace {
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    dim: usize,
    weights: Vec<f64>,
}

impl TryFrom<SpaceRepr> for HermitianSpace {
    type Error = Error;
    fn try_from(r: SpaceRepr) -> Result<Self> {
        if r.dim != r.weights.len() {
            return Err(Error::Dimension(format!(
                "dim {} but {} weights",
                r.dim,
                r.weights.len()
            )));
        }
        HermitianSpace::new(r.weights)
    }
}

impl From<HermitianSpace> for SpaceRepr {
    fn from(s: HermitianSpace) -> Self {
        SpaceRepr { dim: s.dim(), weights: s.weights }
    }
}

impl HermitianSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Dimension("space must have positive dimension".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Invalid(format!("weights must be positive and finite, got {w}")));
        }
        Ok(Self { weights })
    }

    pub fn standard(dim: usize) -> Self {
        Self { weights: vec![1.0; dim.max(1)] }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn check_vector(&self, v: &CVec) -> Result<()> {
        if v.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "vector of length {} in a space of dimension {}",
                v.len(),
                self.dim()
            )))
        }
    }

    pub fn check_matrix(&self, a: &ComplexMatrix) -> Result<()> {
        if a.rows() == self.dim() && a.cols() == self.dim() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{}x{} matrix on a space of dimension {}",
                a.rows(),
                a.cols(),
                self.dim()
            )))
        }
    }

    pub fn inner(&self, u: &CVec, v: &CVec) -> C64 {
        u.iter()
            .zip(v.iter())
            .zip(&self.weights)
            .map(|((a, b), w)| a.conj() * b * *w)
            .sum()
    }

    /// The Riemannian metric `Re⟨u, v⟩`.
    pub fn real_inner(&self, u: &CVec, v: &CVec) -> f64 {
        self.inner(u, v).re
    }

    pub fn norm_sq(&self, v: &CVec) -> f64 {
        v.iter().zip(&self.weights).map(|(z, w)| z.norm_sqr() * w).sum()
    }

    pub fn norm(&self, v: &CVec) -> f64 {
        self.norm_sq(v).sqrt()
    }

    /// `max |W A + Aᴴ W|`: zero iff `A` is anti-self-adjoint for this product.
    pub fn anti_self_adjoint_residual(&self, a: &ComplexMatrix) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let lhs = a.get(i, j) * self.weights[i] + a.get(j, i).conj() * self.weights[j];
                worst = worst.max(lhs.norm());
            }
        }
        worst
    }

    /// `max |kᴴ W k − W|`: zero iff `k` is unitary for this product.
    pub fn unitarity_residual(&self, k: &ComplexMatrix) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s = c(0.0, 0.0);
                for l in 0..n {
                    s += k.get(l, i).conj() * k.get(l, j) * self.weights[l];
                }
                if i == j {
                    s -= self.weights[i];
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }
}

/// Linear action of a compact Lie algebra on a Hermitian space, given by the
/// images of a basis of the algebra.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RepRepr", into = "RepRepr")]
pub struct LinearRep {
    space: HermitianSpace,
    lie_basis: Vec<ComplexMatrix>,
    unitarity_residual: f64,
}

#[derive(Serialize, Deserialize)]
struct RepRepr {
    dim: usize,
    weights: Vec<f64>,
    lie_basis: Vec<ComplexMatrix>,
}

impl TryFrom<RepRepr> for LinearRep {
    type Error = Error;
    fn try_from(r: RepRepr) -> Result<Self> {
        let space = HermitianSpace::try_from(SpaceRepr { dim: r.dim, weights: r.weights })?;
        LinearRep::new(space, r.lie_basis, DEFAULT_TOL)
    }
}

impl From<LinearRep> for RepRepr {
    fn from(r: LinearRep) -> Self {
        RepRepr { dim: r.space.dim(), weights: r.space.weights, lie_basis: r.lie_basis }
    }
}

/// Components `Φ^{ξⱼ}(v)`, one per basis element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumValue {
    pub components: Vec<f64>,
}

impl LinearRep {
    /// Validated constructor: every basis image must be anti-self-adjoint for
    /// the weighted product within `tol`.
    pub fn new(space: HermitianSpace, lie_basis: Vec<ComplexMatrix>, tol: f64) -> Result<Self> {
        let rep = Self::unchecked(space, lie_basis)?;
        if rep.unitarity_residual > tol {
            return Err(Error::Precondition(format!(
                "basis is not anti-self-adjoint for the weighted product (residual {:.3e})",
                rep.unitarity_residual
            )));
        }
        Ok(rep)
    }

    /// Accepts a basis that may fail anti-self-adjointness and records the
    /// defect in [`LinearRep::unitarity_residual`].
    pub fn unchecked(space: HermitianSpace, lie_basis: Vec<ComplexMatrix>) -> Result<Self> {
        for a in &lie_basis {
            space.check_matrix(a)?;
        }
        let unitarity_residual = lie_basis
            .iter()
            .map(|a| space.anti_self_adjoint_residual(a))
            .fold(0.0, f64::max);
        Ok(Self { space, lie_basis, unitarity_residual })
    }

    /// `U(1)` acting on `C` by `A = i`.
    pub fn circle() -> Self {
        Self::new(HermitianSpace::standard(1), vec![ComplexMatrix::from_diagonal(&[I])], DEFAULT_TOL)
            .expect("i is anti-Hermitian")
    }

    /// Defining representation of `SU(2)` on `C²`, basis `iσ₁, iσ₂, iσ₃`.
    pub fn su2_defining() -> Self {
        Self::new(HermitianSpace::standard(2), su2_basis().to_vec(), DEFAULT_TOL)
            .expect("Pauli generators are anti-Hermitian")
    }

    /// Defining representation of `U(n)` with the basis `i E_jj`,
    /// `E_jk − E_kj`, `i(E_jk + E_kj)`.
    pub fn unitary(n: usize) -> Self {
        let mut basis = Vec::with_capacity(n * n);
        for j in 0..n {
            let mut m = ComplexMatrix::zeros(n, n).into_inner();
            m[(j, j)] = I;
            basis.push(ComplexMatrix::wrap(m));
        }
        for j in 0..n {
            for k in j + 1..n {
                let mut re = ComplexMatrix::zeros(n, n).into_inner();
                re[(j, k)] = c(1.0, 0.0);
                re[(k, j)] = c(-1.0, 0.0);
                basis.push(ComplexMatrix::wrap(re));
                let mut im = ComplexMatrix::zeros(n, n).into_inner();
                im[(j, k)] = I;
                im[(k, j)] = I;
                basis.push(ComplexMatrix::wrap(im));
            }
        }
        Self::new(HermitianSpace::standard(n), basis, DEFAULT_TOL).expect("u(n) basis")
    }

    pub fn space(&self) -> &HermitianSpace {
        &self.space
    }

    pub fn lie_basis(&self) -> &[ComplexMatrix] {
        &self.lie_basis
    }

    pub fn group_dim(&self) -> usize {
        self.lie_basis.len()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.unitarity_residual
    }

    /// Image of the real combination `Σ coeffsⱼ ξⱼ`.
    pub fn element(&self, coeffs: &[f64]) -> Result<ComplexMatrix> {
        if coeffs.len() != self.lie_basis.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a basis of size {}",
                coeffs.len(),
                self.lie_basis.len()
            )));
        }
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for (a, &t) in self.lie_basis.iter().zip(coeffs) {
            out = &out + &a.scale(c(t, 0.0));
        }
        Ok(out)
    }

    /// `Φ^A(v) = ½ Ω(A v, v) = ½ Im⟨A v, v⟩`.
    pub fn momentum_component(&self, a: &ComplexMatrix, v: &CVec) -> Result<f64> {
        self.space.check_matrix(a)?;
        self.space.check_vector(v)?;
        let av = a.apply(v)?;
        Ok(0.5 * self.space.inner(&av, v).im)
    }

    pub fn momentum_map(&self, v: &CVec) -> Result<MomentumValue> {
        let components = self
            .lie_basis
            .iter()
            .map(|a| self.momentum_component(a, v))
            .collect::<Result<_>>()?;
        Ok(MomentumValue { components })
    }

    /// Riemannian gradient of `Φ^A`, equal to `J A v = i A v`.
    pub fn momentum_gradient(&self, a: &ComplexMatrix, v: &CVec) -> Result<CVec> {
        self.space.check_matrix(a)?;
        self.space.check_vector(v)?;
        Ok(a.apply(v)? * I)
    }

    /// `max_j |Φ^{ξⱼ}(k v) − Φ^{k⁻¹ ξⱼ k}(v)|` for `k` unitary in the weighted product.
    pub fn equivariance_residual(&self, k: &ComplexMatrix, v: &CVec) -> Result<f64> {
        self.space.check_matrix(k)?;
        self.space.check_vector(v)?;
        let defect = self.space.unitarity_residual(k);
        if defect > 1e3 * DEFAULT_TOL {
            return Err(Error::Precondition(format!(
                "k is not unitary for the weighted product (residual {defect:.3e})"
            )));
        }
        let k_inv = k.try_inverse()?;
        let kv = k.apply(v)?;
        let mut worst: f64 = 0.0;
        for a in &self.lie_basis {
            let conj = &(&k_inv * a) * k;
            let lhs = self.momentum_component(a, &kv)?;
            let rhs = self.momentum_component(&conj, v)?;
            worst = worst.max((lhs - rhs).abs());
        }
        Ok(worst)
    }
}

/// `iσ₁, iσ₂, iσ₃`.
pub fn su2_basis() -> [ComplexMatrix; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    [
        ComplexMatrix::new(2, 2, vec![z, I, I, z]).unwrap(),
        ComplexMatrix::new(2, 2, vec![z, one, -one, z]).unwrap(),
        ComplexMatrix::new(2, 2, vec![I, z, z, -I]).unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec1(z: C64) -> CVec {
        CVec::from_vec(vec![z])
    }

    #[test]
    fn zero_element_has_zero_momentum() {
        let rep = LinearRep::su2_defining();
        let v = CVec::from_vec(vec![c(0.3, 1.0), c(-2.0, 0.5)]);
        let zero = ComplexMatrix::zeros(2, 2);
        assert_eq!(rep.momentum_component(&zero, &v).unwrap(), 0.0);
    }

    #[test]
    fn circle_action_one_dimensional_values() {
        let rep = LinearRep::circle();
        let a = &rep.lie_basis()[0];
        let phi = rep.momentum_component(a, &vec1(c(1.0, 0.0))).unwrap();
        assert!((phi + 0.5).abs() < 1e-15);
        let r = 1.7;
        let mm = rep.momentum_map(&vec1(c(r, 0.0))).unwrap();
        assert!((mm.components[0] + r * r / 2.0).abs() < 1e-15);
        let grad = rep.momentum_gradient(a, &vec1(c(1.0, 0.0))).unwrap();
        assert!((grad[0] - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn su2_diagonal_generator_on_first_axis() {
        let rep = LinearRep::su2_defining();
        let v = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let phi = rep.momentum_component(&su2_basis()[2], &v).unwrap();
        assert!((phi + 0.5).abs() < 1e-15);
    }

    #[test]
    fn momentum_vanishes_at_origin() {
        let rep = LinearRep::unitary(3);
        let mm = rep.momentum_map(&CVec::zeros(3)).unwrap();
        assert_eq!(mm.components.len(), 9);
        assert!(mm.components.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dimension_mismatch_reported() {
        let rep = LinearRep::circle();
        let err = rep.momentum_component(&rep.lie_basis()[0], &CVec::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn equivariance_trivial_for_identity_and_phases() {
        let rep = LinearRep::circle();
        let v = vec1(c(0.4, -1.2));
        for theta in [0.0, 0.7, 2.5] {
            let k = ComplexMatrix::from_diagonal(&[c(0.0, theta).exp()]);
            assert!(rep.equivariance_residual(&k, &v).unwrap() < 1e-15);
        }
    }

    #[test]
    fn equivariance_rejects_non_unitary() {
        let rep = LinearRep::circle();
        let k = ComplexMatrix::from_diagonal(&[c(2.0, 0.0)]);
        assert!(matches!(
            rep.equivariance_residual(&k, &vec1(c(1.0, 0.0))),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn validated_rep_rejects_hermitian_generator() {
        let h = ComplexMatrix::from_diagonal(&[c(1.0, 0.0)]);
        assert!(LinearRep::new(HermitianSpace::standard(1), vec![h], 1e-9).is_err());
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(HermitianSpace::new(vec![1.0, 0.0]).is_err());
        assert!(HermitianSpace::new(vec![]).is_err());
    }

    #[test]
    fn rep_json_round_trip() {
        let rep = LinearRep::su2_defining();
        let s = serde_json::to_string(&rep).unwrap();
        let back: LinearRep = serde_json::from_str(&s).unwrap();
        assert_eq!(back.lie_basis(), rep.lie_basis());
        assert_eq!(back.space(), rep.space());
    }
}
