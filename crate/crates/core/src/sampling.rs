//! Seeded random configurations for the property batteries.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{c, cartan_decompose, hermitian_eigen, mat_exp, ComplexMatrix, CVec, LieAlgebraElement, C64};
use crate::moment::{HermitianSpace, LinearRep};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex(rng: &mut impl Rng) -> C64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn vector(rng: &mut impl Rng, n: usize) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| complex(rng)))
}

pub fn matrix(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    ComplexMatrix::new(n, n, (0..n * n).map(|_| complex(rng)).collect()).expect("finite entries")
}

/// `sqrt(λmax/λmin)` of `gᴴg`.
pub fn condition_number(g: &ComplexMatrix) -> f64 {
    let (values, _) = hermitian_eigen(&(&g.adjoint() * g)).expect("square input");
    (values[values.len() - 1] / values[0]).sqrt()
}

/// Random `g ∈ GL(n, C)` with condition number at most `max_condition`.
pub fn well_conditioned(rng: &mut impl Rng, n: usize, max_condition: f64) -> ComplexMatrix {
    loop {
        let g = matrix(rng, n);
        if condition_number(&g) <= max_condition {
            return g;
        }
    }
}

/// Anti-Hermitian matrix with Frobenius norm `scale`.
pub fn anti_hermitian(rng: &mut impl Rng, n: usize, scale: f64) -> ComplexMatrix {
    let m = matrix(rng, n);
    let a = (&m - &m.adjoint()).scale(c(0.5, 0.0));
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return a;
    }
    a.scale(c(scale / norm, 0.0))
}

pub fn unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    cartan_decompose(&well_conditioned(rng, n, 1e3)).expect("invertible").k
}

/// Random element of `SU(2)`.
pub fn special_unitary_2(rng: &mut impl Rng) -> ComplexMatrix {
    let k = unitary(rng, 2);
    let det = k.determinant().expect("square");
    k.scale(c(1.0, 0.0) / det.sqrt())
}

/// `k·exp(iξ) ∈ SL(2, C)` with `k ∈ SU(2)` and traceless `ξ`, `‖ξ‖_F = xi_norm`.
pub fn special_linear_2(rng: &mut impl Rng, xi_norm: f64) -> (ComplexMatrix, LieAlgebraElement) {
    let k = special_unitary_2(rng);
    let a = anti_hermitian(rng, 2, 1.0);
    let shift = a.trace() * c(0.5, 0.0);
    let traceless = &a - &ComplexMatrix::identity(2).scale(shift);
    let norm = traceless.frobenius_norm();
    let xi = traceless.scale(c(xi_norm / norm, 0.0));
    let xi = LieAlgebraElement::new(xi, 1e-12).expect("anti-Hermitian by construction");
    let g = &k * &mat_exp(&xi.times_i()).expect("finite");
    (g, xi)
}

/// Weighted space of dimension `n` with weights in `[0.5, 2]`, and
/// `basis_size` generators `W^{−1/2} K W^{1/2}` with `K` anti-Hermitian.
pub fn weighted_rep(rng: &mut impl Rng, n: usize, basis_size: usize) -> Result<LinearRep> {
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let root = ComplexMatrix::from_diagonal(&weights.iter().map(|w| c(w.sqrt(), 0.0)).collect::<Vec<_>>());
    let root_inv = ComplexMatrix::from_diagonal(&weights.iter().map(|w| c(1.0 / w.sqrt(), 0.0)).collect::<Vec<_>>());
    let basis = (0..basis_size)
        .map(|_| {
            let scale = rng.gen_range(0.2..2.0);
            &(&root_inv * &anti_hermitian(rng, n, scale)) * &root
        })
        .collect();
    LinearRep::new(HermitianSpace::new(weights)?, basis, 1e-10)
}

/// Random real combination of the basis of `rep`.
pub fn generator(rng: &mut impl Rng, rep: &LinearRep) -> Result<ComplexMatrix> {
    let coeffs: Vec<f64> = (0..rep.group_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    rep.element(&coeffs)
}
