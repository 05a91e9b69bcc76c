//! Binary cubic forms `c₀x³ + c₁x²y + c₂xy² + c₃y³` under `SL(2, C)`.
//!
//! The action is substitution, `(g·f)(v) = f(g v)`, which reproduces
//! `A_ε·x²y = −x³/(8ε) + 5x²y/8 − 3εxy²/8 − 9ε²y³/8`. Substitution composes
//! contravariantly (`rep(gh) = rep(h)·rep(g)`), so [`CubicAction`] exposes the
//! left action `g ↦ rep(g⁻¹)` for code that needs a homomorphism.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extend::GroupAction;
use crate::linalg::{c, hermitian_eigen, ComplexMatrix, CVec, C64, DEFAULT_TOL, I};
use crate::moment::{su2_basis, HermitianSpace, LinearRep};

/// Pairs of roots closer than this (chordal metric) are always the same root.
pub const CLUSTER_TOL: f64 = 1e-7;
/// Largest chordal spread of a root cluster that may be merged after validation.
pub const MERGE_RADIUS: f64 = 1e-3;
/// Relative coefficient residual allowed when rebuilding a form from its roots.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
/// Merges whose reconstruction residual exceeds this are flagged borderline.
pub const CONFIDENT_RESIDUAL: f64 = 1e-11;
/// Relative residual for `g·f = f`.
pub const FIX_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 4]", into = "[[f64; 2]; 4]")]
pub struct BinaryCubic {
    coeffs: [C64; 4],
}

impl TryFrom<[[f64; 2]; 4]> for BinaryCubic {
    type Error = Error;
    fn try_from(p: [[f64; 2]; 4]) -> Result<Self> {
        BinaryCubic::new(p.map(|[re, im]| c(re, im)))
    }
}

impl From<BinaryCubic> for [[f64; 2]; 4] {
    fn from(f: BinaryCubic) -> Self {
        f.coeffs.map(|z| [z.re, z.im])
    }
}

impl BinaryCubic {
    pub fn new(coeffs: [C64; 4]) -> Result<Self> {
        if let Some(k) = coeffs.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite { row: k, col: 0 });
        }
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: [f64; 4]) -> Self {
        Self { coeffs: coeffs.map(|x| c(x, 0.0)) }
    }

    pub fn zero() -> Self {
        Self::from_real([0.0; 4])
    }

    /// `x²y`, the point with trivial stabilizer.
    pub fn x2y() -> Self {
        Self::from_real([0.0, 1.0, 0.0, 0.0])
    }

    pub fn y3() -> Self {
        Self::from_real([0.0, 0.0, 0.0, 1.0])
    }

    /// `(x + y)(x − y)y = x²y − y³`.
    pub fn three_factor_example() -> Self {
        Self::from_real([0.0, 1.0, 0.0, -1.0])
    }

    /// `m_ε = (x + εy)(x − εy)y = x²y − ε²y³`.
    pub fn m_eps(eps: C64) -> Self {
        Self { coeffs: [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), -eps * eps] }
    }

    pub fn coeffs(&self) -> [C64; 4] {
        self.coeffs
    }

    pub fn to_cvec(&self) -> CVec {
        CVec::from_row_slice(&self.coeffs)
    }

    pub fn from_cvec(v: &CVec) -> Result<Self> {
        if v.len() != 4 {
            return Err(Error::Dimension(format!("a cubic has 4 coefficients, got {}", v.len())));
        }
        Self::new([v[0], v[1], v[2], v[3]])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn eval(&self, a: C64, b: C64) -> C64 {
        let [c0, c1, c2, c3] = self.coeffs;
        c0 * a * a * a + c1 * a * a * b + c2 * a * b * b + c3 * b * b * b
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-norm of the coefficient difference.
    pub fn distance(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { coeffs: self.coeffs.map(|w| w * z) }
    }

    /// `b²c² − 4ac³ − 4b³d − 27a²d² + 18abcd`; vanishes iff a root is repeated.
    /// Under substitution, `Δ(g·f) = det(g)⁶ Δ(f)`.
    pub fn discriminant(&self) -> C64 {
        let [a, b, cc, d] = self.coeffs;
        b * b * cc * cc - 4.0 * a * cc * cc * cc - 4.0 * b * b * b * d - 27.0 * a * a * d * d
            + 18.0 * a * b * cc * d
    }
}

fn check_2x2(g: &ComplexMatrix) -> Result<()> {
    if g.rows() == 2 && g.cols() == 2 {
        Ok(())
    } else {
        Err(Error::Dimension(format!("expected a 2x2 matrix, got {}x{}", g.rows(), g.cols())))
    }
}

fn mul_linear(poly: &[C64], p: C64, q: C64) -> Vec<C64> {
    let mut out = vec![c(0.0, 0.0); poly.len() + 1];
    for (k, &z) in poly.iter().enumerate() {
        out[k] += z * p;
        out[k + 1] += z * q;
    }
    out
}

/// Matrix of `f ↦ f ∘ g` in the monomial basis `x³, x²y, xy², y³`.
pub fn rep_matrix(g: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_2x2(g)?;
    let det = g.determinant()?;
    if det.norm() == 0.0 {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let (a, b, cc, d) = (g.get(0, 0), g.get(0, 1), g.get(1, 0), g.get(1, 1));
    let mut m = DMatrix::zeros(4, 4);
    for k in 0..4 {
        // (a x + b y)^{3−k} (c x + d y)^k
        let mut poly = vec![c(1.0, 0.0)];
        for _ in 0..3 - k {
            poly = mul_linear(&poly, a, b);
        }
        for _ in 0..k {
            poly = mul_linear(&poly, cc, d);
        }
        for (row, z) in poly.into_iter().enumerate() {
            m[(row, k)] = z;
        }
    }
    Ok(ComplexMatrix::wrap(m))
}

/// Substitution action `(g·f)(v) = f(g v)`.
pub fn act(g: &ComplexMatrix, f: &BinaryCubic) -> Result<BinaryCubic> {
    BinaryCubic::from_cvec(&rep_matrix(g)?.apply(&f.to_cvec())?)
}

/// Left action `act(g⁻¹, f)`.
pub fn act_left(g: &ComplexMatrix, f: &BinaryCubic) -> Result<BinaryCubic> {
    act(&g.try_inverse()?, f)
}

/// `d/dt|₀ rep_matrix(exp(tξ))`, from the first-order substitution rule.
///
/// Defined for every 2×2 matrix; `sl(2)` elements are the traceless ones.
pub fn lie_rep(xi: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_2x2(xi)?;
    let (p, q, r, s) = (xi.get(0, 0), xi.get(0, 1), xi.get(1, 0), xi.get(1, 1));
    let mut m = DMatrix::zeros(4, 4);
    for k in 0..4 {
        let kf = k as f64;
        m[(k, k)] += p * (3.0 - kf) + s * kf;
        if k < 3 {
            m[(k + 1, k)] += q * (3.0 - kf);
        }
        if k > 0 {
            m[(k - 1, k)] += r * kf;
        }
    }
    Ok(ComplexMatrix::wrap(m))
}

/// Basis `e, f, h` of `sl(2, C)`.
pub fn sl2_basis() -> [ComplexMatrix; 3] {
    [
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap(),
        ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap(),
        ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap(),
    ]
}

/// Inner products on the space of cubics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CubicMetric {
    /// `‖x^{3−k}y^k‖² = k!(3−k)!/3!`, invariant under `SU(2)`.
    Binomial,
    /// Monomials orthonormal; not `SU(2)`-invariant.
    Monomial,
}

impl CubicMetric {
    pub fn space(self) -> HermitianSpace {
        match self {
            CubicMetric::Binomial => HermitianSpace::new(vec![1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0]),
            CubicMetric::Monomial => HermitianSpace::new(vec![1.0; 4]),
        }
        .expect("positive weights")
    }

    /// `SU(2)` Lie algebra acting on cubics (left action) with this metric.
    /// The monomial metric yields a representation that is not
    /// anti-self-adjoint; its defect is kept in `unitarity_residual`.
    pub fn su2_rep(self) -> LinearRep {
        let basis = su2_basis()
            .iter()
            .map(|xi| CubicAction.algebra_matrix(xi).expect("2x2 generator"))
            .collect();
        LinearRep::unchecked(self.space(), basis).expect("4x4 generators")
    }
}

/// `SL(2, C)` acting on cubics from the left.
#[derive(Clone, Copy, Debug, Default)]
pub struct CubicAction;

impl GroupAction for CubicAction {
    fn space_dim(&self) -> usize {
        4
    }

    fn group_dim(&self) -> usize {
        2
    }

    fn group_matrix(&self, g: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_2x2(g)?;
        rep_matrix(&g.try_inverse()?)
    }

    fn algebra_matrix(&self, xi: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(-&lie_rep(xi)?)
    }
}

/// Point `[a : b]` of the projective line, unit norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectiveRoot {
    #[serde(serialize_with = "serialize_point")]
    pub point: [C64; 2],
    pub multiplicity: usize,
}

fn serialize_point<S: serde::Serializer>(p: &[C64; 2], s: S) -> std::result::Result<S::Ok, S::Error> {
    p.map(|z| [z.re, z.im]).serialize(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectiveRootSet {
    pub roots: Vec<ProjectiveRoot>,
    pub reconstruction_residual: f64,
    pub borderline: bool,
}

impl ProjectiveRootSet {
    pub fn distinct(&self) -> usize {
        self.roots.len()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
}

/// `|a d − b c| / (‖(a,b)‖ ‖(c,d)‖)`.
pub fn chordal_distance(p: [C64; 2], q: [C64; 2]) -> f64 {
    let n = (p[0].norm_sqr() + p[1].norm_sqr()).sqrt() * (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
    (p[0] * q[1] - p[1] * q[0]).norm() / n
}

/// Unit representative; `b` real positive unless `b ≈ 0`, then `a` real positive.
pub fn normalize_point(p: [C64; 2]) -> [C64; 2] {
    let n = (p[0].norm_sqr() + p[1].norm_sqr()).sqrt();
    let mut out = [p[0] / n, p[1] / n];
    let pivot = if out[1].norm() > 1e-14 { out[1] } else { out[0] };
    let phase = pivot.conj() / pivot.norm();
    out = [out[0] * phase, out[1] * phase];
    out
}

/// Image of a projective point under `g`.
pub fn transform_point(g: &ComplexMatrix, p: [C64; 2]) -> [C64; 2] {
    normalize_point([
        g.get(0, 0) * p[0] + g.get(0, 1) * p[1],
        g.get(1, 0) * p[0] + g.get(1, 1) * p[1],
    ])
}

fn rotation(theta: f64) -> ComplexMatrix {
    let (s, co) = theta.sin_cos();
    ComplexMatrix::from_real_rows(&[&[co, -s], &[s, co]]).unwrap()
}

fn roots_of_depressed(h: &BinaryCubic) -> Vec<C64> {
    let [h0, h1, h2, h3] = h.coeffs();
    let (a2, a1, a0) = (h1 / h0, h2 / h0, h3 / h0);
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let companion = DMatrix::from_row_slice(3, 3, &[-a2, -a1, -a0, one, z, z, z, one, z]);
    let (_, t) = Schur::new(companion).unpack();
    (0..3).map(|i| t[(i, i)]).collect()
}

/// Linear-form product `Π (bⱼ x − aⱼ y)` over roots with multiplicity.
fn form_from_roots(roots: &[([C64; 2], usize)]) -> [C64; 4] {
    let mut poly = vec![c(1.0, 0.0)];
    for &(p, m) in roots {
        for _ in 0..m {
            poly = mul_linear(&poly, p[1], -p[0]);
        }
    }
    let mut out = [c(0.0, 0.0); 4];
    for (k, z) in poly.into_iter().enumerate().take(4) {
        out[k] = z;
    }
    out
}

fn reconstruction_residual(f: &BinaryCubic, roots: &[([C64; 2], usize)]) -> f64 {
    let p = form_from_roots(roots);
    let fc = f.coeffs();
    let pp: f64 = p.iter().map(|z| z.norm_sqr()).sum();
    let pf: C64 = p.iter().zip(&fc).map(|(a, b)| a.conj() * b).sum();
    let lambda = pf / pp;
    let resid: f64 = p.iter().zip(&fc).map(|(a, b)| (b - a * lambda).norm_sqr()).sum::<f64>().sqrt();
    resid / f.norm()
}

fn centroid(points: &[[C64; 2]]) -> [C64; 2] {
    let reference = points[0];
    let mut acc = [c(0.0, 0.0); 2];
    for p in points {
        let overlap = reference[0].conj() * p[0] + reference[1].conj() * p[1];
        let phase = if overlap.norm() > 0.0 { overlap.conj() / overlap.norm() } else { c(1.0, 0.0) };
        acc[0] += p[0] * phase;
        acc[1] += p[1] * phase;
    }
    normalize_point(acc)
}

/// Projective roots with multiplicities.
///
/// Roots come from companion-matrix eigenvalues after a rotation that keeps
/// all roots finite. Roots within [`CLUSTER_TOL`] are identified; wider
/// clusters (up to [`MERGE_RADIUS`]) are merged only if the merged roots
/// still reproduce the form to [`RECONSTRUCTION_TOL`].
pub fn factorize(f: &BinaryCubic) -> Result<ProjectiveRootSet> {
    if f.is_zero() {
        return Err(Error::ZeroForm);
    }
    let f_unit = f.scale(c(1.0 / f.norm(), 0.0));
    let (theta, _) = (0..9)
        .map(|j| {
            let theta = PI * j as f64 / 9.0;
            let (s, co) = theta.sin_cos();
            (theta, f_unit.eval(c(co, 0.0), c(s, 0.0)).norm())
        })
        .fold((0.0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let u = rotation(theta);
    let h = act(&u, &f_unit)?;
    let raw: Vec<[C64; 2]> = roots_of_depressed(&h)
        .into_iter()
        .map(|x| transform_point(&u, [x, c(1.0, 0.0)]))
        .collect();

    let dist = |i: usize, j: usize| chordal_distance(raw[i], raw[j]);
    let partitions: [&[&[usize]]; 5] = [
        &[&[0, 1, 2]],
        &[&[0, 1], &[2]],
        &[&[0, 2], &[1]],
        &[&[1, 2], &[0]],
        &[&[0], &[1], &[2]],
    ];
    let mut best: Option<(usize, f64, Vec<([C64; 2], usize)>)> = None;
    for partition in partitions {
        let spread_ok = partition.iter().all(|cluster| {
            cluster.iter().all(|&i| cluster.iter().all(|&j| dist(i, j) <= MERGE_RADIUS))
        });
        // pairs closer than CLUSTER_TOL may not be split
        let split_ok = (0..3).all(|i| {
            (i + 1..3).all(|j| {
                dist(i, j) > CLUSTER_TOL
                    || partition.iter().any(|cl| cl.contains(&i) && cl.contains(&j))
            })
        });
        if !spread_ok || !split_ok {
            continue;
        }
        let merged: Vec<([C64; 2], usize)> = partition
            .iter()
            .map(|cluster| {
                let pts: Vec<[C64; 2]> = cluster.iter().map(|&i| raw[i]).collect();
                (centroid(&pts), cluster.len())
            })
            .collect();
        let residual = reconstruction_residual(&f_unit, &merged);
        if residual > RECONSTRUCTION_TOL && partition.len() < 3 {
            continue;
        }
        let better = match &best {
            None => true,
            Some((len, res, _)) => partition.len() == *len && residual < *res,
        };
        if better {
            best = Some((partition.len(), residual, merged));
        }
    }
    let (_, residual, merged) = best.expect("the singleton partition is always admissible");

    let rejected_close_pair = merged.iter().enumerate().any(|(i, a)| {
        merged[i + 1..].iter().any(|b| chordal_distance(a.0, b.0) <= MERGE_RADIUS)
    });
    let merged_wide = merged.iter().any(|(_, m)| *m > 1) && residual > CONFIDENT_RESIDUAL;
    let borderline = rejected_close_pair || merged_wide || residual > RECONSTRUCTION_TOL;

    let mut roots: Vec<ProjectiveRoot> = merged
        .into_iter()
        .map(|(point, multiplicity)| ProjectiveRoot { point, multiplicity })
        .collect();
    roots.sort_by(|a, b| {
        b.multiplicity.cmp(&a.multiplicity).then_with(|| {
            let key = |r: &ProjectiveRoot| [r.point[0].re, r.point[0].im, r.point[1].re, r.point[1].im];
            let (ka, kb) = (key(a), key(b));
            ka.iter().zip(&kb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    Ok(ProjectiveRootSet { roots, reconstruction_residual: residual, borderline })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorType {
    I,
    II,
    III,
    IV,
}

impl FactorType {
    pub fn distinct_factors(self) -> usize {
        match self {
            FactorType::I => 3,
            FactorType::II => 2,
            FactorType::III => 1,
            FactorType::IV => 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub factor_type: FactorType,
    pub borderline: bool,
}

pub fn classify_type(f: &BinaryCubic) -> Result<Classification> {
    if f.is_zero() {
        return Ok(Classification { factor_type: FactorType::IV, borderline: false });
    }
    let roots = factorize(f)?;
    let factor_type = match roots.distinct() {
        3 => FactorType::I,
        2 => FactorType::II,
        1 => FactorType::III,
        n => return Err(Error::Invalid(format!("unexpected number of distinct roots {n}"))),
    };
    Ok(Classification { factor_type, borderline: roots.borderline })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilizerKind {
    Finite,
    PositiveDimensional,
    FullGroup,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilizerDescription {
    pub factor_type: FactorType,
    pub kind: StabilizerKind,
    /// Group order for finite stabilizers.
    pub order: Option<usize>,
    /// Complex dimension for positive-dimensional stabilizers.
    pub dimension: Option<usize>,
    /// Number of connected components.
    pub components: Option<usize>,
    pub generators: Vec<ComplexMatrix>,
    /// All elements, for finite stabilizers.
    pub elements: Vec<ComplexMatrix>,
    /// Largest relative `‖g·f − f‖` over the reported elements.
    pub max_fixing_residual: f64,
    pub borderline: bool,
}

fn fixing_residual(g: &ComplexMatrix, f: &BinaryCubic) -> Result<f64> {
    Ok(act(g, f)?.distance(f) / f.max_abs())
}

/// Scalar `λ` with `g·f ≈ λ f`.
fn eigen_scalar(g: &ComplexMatrix, f: &BinaryCubic) -> Result<C64> {
    let gf = act(g, f)?;
    let num: C64 = f.coeffs().iter().zip(gf.coeffs().iter()).map(|(a, b)| a.conj() * b).sum();
    Ok(num / (f.norm() * f.norm()))
}

/// Smallest `k ≤ max` with `gᵏ = I`.
pub fn element_order(g: &ComplexMatrix, max: u32, tol: f64) -> Option<u32> {
    let id = ComplexMatrix::identity(g.rows());
    let mut p = g.clone();
    for k in 1..=max {
        if (&p - &id).max_norm() <= tol {
            return Some(k);
        }
        p = &p * g;
    }
    None
}

fn unit_det(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let det = m.determinant()?;
    if det.norm() == 0.0 {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    Ok(m.scale(c(1.0, 0.0) / det.sqrt()))
}

fn column_matrix(p: [C64; 2], q: [C64; 2]) -> ComplexMatrix {
    ComplexMatrix::new(2, 2, vec![p[0], q[0], p[1], q[1]]).unwrap()
}

/// Matrix sending `e₁ ↦ r₁`, `e₂ ↦ r₂`, `e₁ + e₂ ↦ r₃` projectively.
fn frame(r: [[C64; 2]; 3]) -> Result<ComplexMatrix> {
    let basis = column_matrix(r[0], r[1]);
    let coeffs = basis.try_inverse()?.apply(&CVec::from_row_slice(&r[2]))?;
    Ok(column_matrix([r[0][0] * coeffs[0], r[0][1] * coeffs[0]], [r[1][0] * coeffs[1], r[1][1] * coeffs[1]]))
}

fn push_unique(list: &mut Vec<ComplexMatrix>, g: ComplexMatrix) {
    if list.iter().all(|h| (h - &g).max_norm() > 1e-6) {
        list.push(g);
    }
}

/// Stabilizer of `f` in `SL(2, C)`.
pub fn compute_stabilizer(f: &BinaryCubic) -> Result<StabilizerDescription> {
    let class = classify_type(f)?;
    let mut desc = StabilizerDescription {
        factor_type: class.factor_type,
        kind: StabilizerKind::Finite,
        order: None,
        dimension: None,
        components: None,
        generators: Vec::new(),
        elements: Vec::new(),
        max_fixing_residual: 0.0,
        borderline: class.borderline,
    };
    if class.factor_type == FactorType::IV {
        desc.kind = StabilizerKind::FullGroup;
        desc.dimension = Some(3);
        desc.components = Some(1);
        return Ok(desc);
    }
    let roots = factorize(f)?;
    match class.factor_type {
        FactorType::I => stabilizer_three_roots(f, &roots, &mut desc)?,
        FactorType::II => stabilizer_two_roots(f, &roots, &mut desc)?,
        FactorType::III => stabilizer_one_root(f, &roots, &mut desc)?,
        FactorType::IV => unreachable!(),
    }
    Ok(desc)
}

fn stabilizer_three_roots(
    f: &BinaryCubic,
    roots: &ProjectiveRootSet,
    desc: &mut StabilizerDescription,
) -> Result<()> {
    let r = [roots.roots[0].point, roots.roots[1].point, roots.roots[2].point];
    let source_inv = frame(r)?.try_inverse()?;
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut fixers = Vec::new();
    for p in perms {
        let target = frame([r[p[0]], r[p[1]], r[p[2]]])?;
        let m = unit_det(&(&target * &source_inv))?;
        for lift in [m.clone(), -&m] {
            let res = fixing_residual(&lift, f)?;
            if res <= FIX_TOL {
                desc.max_fixing_residual = desc.max_fixing_residual.max(res);
                push_unique(&mut fixers, lift);
            }
        }
    }
    let (generator, _) = fixers
        .iter()
        .map(|g| (g, element_order(g, 12, 1e-8).unwrap_or(0)))
        .max_by_key(|(_, k)| *k)
        .expect("the identity fixes every form");
    desc.kind = StabilizerKind::Finite;
    desc.order = Some(fixers.len());
    desc.components = Some(fixers.len());
    desc.dimension = Some(0);
    desc.generators = vec![generator.clone()];
    desc.elements = fixers;
    Ok(())
}

fn stabilizer_two_roots(
    f: &BinaryCubic,
    roots: &ProjectiveRootSet,
    desc: &mut StabilizerDescription,
) -> Result<()> {
    // roots are sorted by multiplicity: the double root comes first
    let p = column_matrix(roots.roots[0].point, roots.roots[1].point);
    let p_inv = p.try_inverse()?;
    let member = |t: C64| -> ComplexMatrix {
        let d = ComplexMatrix::from_diagonal(&[t, c(1.0, 0.0) / t]);
        &(&p * &d) * &p_inv
    };
    let k = scaling_exponent(|t| eigen_scalar(&member(t), f))?;
    let n = k.unsigned_abs() as usize;
    if n == 0 {
        desc.kind = StabilizerKind::PositiveDimensional;
        desc.dimension = Some(1);
        desc.components = Some(1);
        desc.generators = vec![member(c(2.0, 0.0))];
        return Ok(());
    }
    let mut elements = Vec::new();
    for j in 0..n {
        let t = c(0.0, 2.0 * PI * j as f64 / n as f64).exp();
        let g = member(t);
        let res = fixing_residual(&g, f)?;
        if res > FIX_TOL {
            desc.borderline = true;
        }
        desc.max_fixing_residual = desc.max_fixing_residual.max(res);
        elements.push(g);
    }
    desc.kind = StabilizerKind::Finite;
    desc.order = Some(n);
    desc.components = Some(n);
    desc.dimension = Some(0);
    desc.generators = vec![elements.get(1).unwrap_or(&elements[0]).clone()];
    desc.elements = elements;
    Ok(())
}

fn stabilizer_one_root(
    f: &BinaryCubic,
    roots: &ProjectiveRootSet,
    desc: &mut StabilizerDescription,
) -> Result<()> {
    let r = roots.roots[0].point;
    let p = column_matrix(r, [-r[1].conj(), r[0].conj()]);
    let p_inv = p.try_inverse()?;
    let member = |a: C64, b: C64| -> ComplexMatrix {
        let t = ComplexMatrix::new(2, 2, vec![a, b, c(0.0, 0.0), c(1.0, 0.0) / a]).unwrap();
        &(&p * &t) * &p_inv
    };
    // the fixing condition must not constrain the unipotent parameter b
    let base = eigen_scalar(&member(c(2.0, 0.0), c(0.0, 0.0)), f)?;
    for b in [c(1.0, 0.0), I, c(-0.7, 2.0)] {
        if (eigen_scalar(&member(c(2.0, 0.0), b), f)? - base).norm() > 1e-8 * base.norm() {
            return Err(Error::Invalid("stabilizer family depends on the unipotent part".into()));
        }
    }
    let k = scaling_exponent(|a| eigen_scalar(&member(a, c(0.0, 0.0)), f))?;
    let n = k.unsigned_abs() as usize;
    desc.kind = StabilizerKind::PositiveDimensional;
    desc.dimension = Some(1);
    desc.components = Some(n.max(1));
    let mut generators = Vec::new();
    for j in 0..n.max(1) {
        let a = c(0.0, 2.0 * PI * j as f64 / n.max(1) as f64).exp();
        for b in [c(0.0, 0.0), c(1.0, 0.0), c(0.3, -1.1)] {
            let g = member(a, b);
            let res = fixing_residual(&g, f)?;
            if res > FIX_TOL {
                desc.borderline = true;
            }
            desc.max_fixing_residual = desc.max_fixing_residual.max(res);
        }
    }
    if n > 1 {
        generators.push(member(c(0.0, 2.0 * PI / n as f64).exp(), c(0.0, 0.0)));
    }
    generators.push(member(c(1.0, 0.0), c(1.0, 0.0)));
    desc.generators = generators;
    Ok(())
}

/// Integer `k` with `λ(t) = tᵏ` on a one-parameter torus.
fn scaling_exponent(lambda: impl Fn(C64) -> Result<C64>) -> Result<i32> {
    let at_two = lambda(c(2.0, 0.0))?;
    let k = at_two.norm().log2().round() as i32;
    for t in [c(3.0, 0.0), c(0.0, 0.7).exp() * 1.3] {
        let expected = t.powi(k);
        if (lambda(t)? - expected).norm() > 1e-8 * expected.norm() {
            return Err(Error::Invalid("torus does not act on the form by a character".into()));
        }
    }
    Ok(k)
}

/// `[[−1/2, 3ε/2], [−1/(2ε), −1/2]]`, of order three, fixing `m_ε`.
pub fn a_eps(eps: C64) -> Result<ComplexMatrix> {
    if eps.norm() == 0.0 || !(eps.re.is_finite() && eps.im.is_finite()) {
        return Err(Error::Invalid("ε must be nonzero and finite".into()));
    }
    ComplexMatrix::new(2, 2, vec![c(-0.5, 0.0), eps * 1.5, -c(0.5, 0.0) / eps, c(-0.5, 0.0)])
}

/// Point `[g, η]` of the bundle `SL(2, C) × C` over the orbit of `x²y`.
#[derive(Clone, Debug, Serialize)]
pub struct SliceBundlePoint {
    pub g: ComplexMatrix,
    #[serde(serialize_with = "serialize_scalar")]
    pub eta: C64,
}

fn serialize_scalar<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

impl SliceBundlePoint {
    pub fn new(g: ComplexMatrix, eta: C64, tol: f64) -> Result<Self> {
        check_2x2(&g)?;
        let det = g.determinant()?;
        if (det - c(1.0, 0.0)).norm() > tol {
            return Err(Error::Precondition(format!("det g = {det} is not 1")));
        }
        Ok(Self { g, eta })
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (&self.g - &other.g).max_norm().max((self.eta - other.eta).norm())
    }
}

/// `[g, η] ↦ g·(x²y + η y³)`.
pub fn slice_map(p: &SliceBundlePoint) -> Result<BinaryCubic> {
    let fiber = BinaryCubic::new([c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), p.eta])?;
    act(&p.g, &fiber)
}

#[derive(Clone, Debug, Serialize)]
pub struct PointSummary {
    pub form: BinaryCubic,
    pub factor_type: FactorType,
    pub stabilizer_order: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NonInjectivityReport {
    #[serde(serialize_with = "serialize_scalar")]
    pub eps: C64,
    pub first: SliceBundlePoint,
    pub second: SliceBundlePoint,
    pub first_image: BinaryCubic,
    pub second_image: BinaryCubic,
    pub bundle_distance: f64,
    pub image_distance: f64,
    pub nearby: PointSummary,
    pub base: PointSummary,
    /// Max-norm distance between `m_ε` and `x²y`, equal to `|ε|²`.
    pub distance_to_base: f64,
}

fn summarize(f: BinaryCubic) -> Result<PointSummary> {
    let stab = compute_stabilizer(&f)?;
    Ok(PointSummary { form: f, factor_type: stab.factor_type, stabilizer_order: stab.order })
}

/// The bundle points `[I, −ε²]` and `[A_ε, −ε²]` have the same image `m_ε`.
pub fn non_injectivity_demo(eps: C64) -> Result<NonInjectivityReport> {
    let eta = -eps * eps;
    let first = SliceBundlePoint::new(ComplexMatrix::identity(2), eta, DEFAULT_TOL)?;
    let second = SliceBundlePoint::new(a_eps(eps)?, eta, 1e-9 * (1.0 + eps.norm() + 1.0 / eps.norm()))?;
    let first_image = slice_map(&first)?;
    let second_image = slice_map(&second)?;
    let m = BinaryCubic::x2y();
    let m_eps = BinaryCubic::m_eps(eps);
    Ok(NonInjectivityReport {
        eps,
        bundle_distance: first.distance(&second),
        image_distance: first_image.distance(&second_image),
        first,
        second,
        first_image,
        second_image,
        nearby: summarize(m_eps)?,
        base: summarize(m)?,
        distance_to_base: m_eps.distance(&m),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TangentComplement {
    pub orbit_tangent_rank: usize,
    /// Singular values of the orbit tangent vectors in the metric, descending.
    pub singular_values: Vec<f64>,
    /// Orthonormal basis (in the metric) of the orthogonal complement.
    pub complement: Vec<Vec<[f64; 2]>>,
    pub borderline: bool,
}

impl TangentComplement {
    pub fn complement_vectors(&self) -> Vec<CVec> {
        self.complement.iter().map(|v| crate::linalg::cvec_serde::from_pairs(v)).collect()
    }
}

/// Relative singular-value threshold for the orbit tangent rank.
pub const RANK_TOL: f64 = 1e-9;

/// Orthogonal complement of `span{ξ·f : ξ ∈ sl(2)}` in the given metric.
pub fn tangent_complement(f: &BinaryCubic, metric: &HermitianSpace) -> Result<TangentComplement> {
    if metric.dim() != 4 {
        return Err(Error::Dimension("cubics live in a 4-dimensional space".into()));
    }
    let sqrt_w: Vec<f64> = metric.weights().iter().map(|w| w.sqrt()).collect();
    let tangents: Vec<CVec> = sl2_basis()
        .iter()
        .map(|xi| lie_rep(xi)?.apply(&f.to_cvec()))
        .collect::<Result<_>>()?;
    // Gram operator S Sᴴ of the metric-scaled tangent vectors
    let mut gram = DMatrix::<C64>::zeros(4, 4);
    for t in &tangents {
        let s = CVec::from_iterator(4, t.iter().zip(&sqrt_w).map(|(z, w)| z * *w));
        gram += &s * s.adjoint();
    }
    let (values, vectors) = hermitian_eigen(&ComplexMatrix::wrap(gram))?;
    let sigma: Vec<f64> = values.iter().rev().map(|&x| x.max(0.0).sqrt()).collect();
    let sigma_max = sigma[0];
    let rank = if sigma_max == 0.0 {
        0
    } else {
        sigma.iter().filter(|&&s| s > RANK_TOL * sigma_max).count()
    };
    let borderline = sigma_max > 0.0
        && sigma.iter().any(|&s| s > 1e-13 * sigma_max && s <= 1e-6 * sigma_max);
    // eigenvalues ascending: the first 4 − rank columns span the complement
    let complement = (0..4 - rank)
        .map(|j| {
            let q = vectors.column(j);
            let mut u = CVec::from_iterator(4, q.iter().zip(&sqrt_w).map(|(z, w)| z / *w));
            let pivot = *u.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            u *= pivot.conj() / pivot.norm();
            crate::linalg::cvec_serde::to_pairs(&u)
        })
        .collect();
    Ok(TangentComplement { orbit_tangent_rank: rank, singular_values: sigma, complement, borderline })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &BinaryCubic, b: &BinaryCubic, tol: f64) -> bool {
        a.distance(b) <= tol
    }

    fn has_root(set: &ProjectiveRootSet, p: [C64; 2], mult: usize) -> bool {
        set.roots
            .iter()
            .any(|r| r.multiplicity == mult && chordal_distance(r.point, p) < 1e-9)
    }

    #[test]
    fn identity_acts_trivially() {
        let f = BinaryCubic::new([c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0), c(4.0, -1.0)]).unwrap();
        assert!(close(&act(&ComplexMatrix::identity(2), &f).unwrap(), &f, 0.0));
    }

    #[test]
    fn diagonal_torus_scales_monomials() {
        let t = 1.7;
        let g = ComplexMatrix::from_diagonal(&[c(t, 0.0), c(1.0 / t, 0.0)]);
        let image = act(&g, &BinaryCubic::x2y()).unwrap();
        assert!(close(&image, &BinaryCubic::x2y().scale(c(t, 0.0)), 1e-15));
        let rep = rep_matrix(&g).unwrap();
        let expected =
            ComplexMatrix::from_diagonal(&[t.powi(3), t, 1.0 / t, t.powi(-3)].map(|x| c(x, 0.0)));
        assert!((&rep - &expected).max_norm() < 1e-14);
    }

    #[test]
    fn a_eps_moves_x2y_as_printed() {
        for eps in [1.0, 0.5, 0.3] {
            let image = act(&a_eps(c(eps, 0.0)).unwrap(), &BinaryCubic::x2y()).unwrap();
            let expected = BinaryCubic::from_real([
                -1.0 / (8.0 * eps),
                5.0 / 8.0,
                -3.0 * eps / 8.0,
                -9.0 * eps * eps / 8.0,
            ]);
            assert!(close(&image, &expected, 1e-15), "eps = {eps}");
        }
    }

    #[test]
    fn a_eps_is_order_three_with_unit_det() {
        for eps in [c(1.0, 0.0), c(0.2, -0.7), c(-3.0, 1.0)] {
            let a = a_eps(eps).unwrap();
            assert!((a.determinant().unwrap() - c(1.0, 0.0)).norm() < 1e-14);
            assert!((a.trace() + c(1.0, 0.0)).norm() < 1e-15);
            assert_eq!(element_order(&a, 6, 1e-12), Some(3));
            let m = BinaryCubic::m_eps(eps);
            assert!(close(&act(&a, &m).unwrap(), &m, 1e-13));
        }
        let a1 = a_eps(c(1.0, 0.0)).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[&[-0.5, 1.5], &[-0.5, -0.5]]).unwrap();
        assert_eq!(a1, expected);
        assert!(a_eps(c(0.0, 0.0)).is_err());
    }

    #[test]
    fn lie_rep_examples() {
        let [e, _, h] = sl2_basis();
        let ex = lie_rep(&e).unwrap().apply(&BinaryCubic::x2y().to_cvec()).unwrap();
        assert_eq!(BinaryCubic::from_cvec(&ex).unwrap(), BinaryCubic::from_real([0.0, 0.0, 2.0, 0.0]));
        let hx = lie_rep(&h).unwrap().apply(&BinaryCubic::x2y().to_cvec()).unwrap();
        assert_eq!(BinaryCubic::from_cvec(&hx).unwrap(), BinaryCubic::x2y());
        assert_eq!(lie_rep(&ComplexMatrix::zeros(2, 2)).unwrap(), ComplexMatrix::zeros(4, 4));
    }

    #[test]
    fn factorize_x2y() {
        let roots = factorize(&BinaryCubic::x2y()).unwrap();
        assert_eq!(roots.distinct(), 2);
        assert!(has_root(&roots, [c(0.0, 0.0), c(1.0, 0.0)], 2));
        assert!(has_root(&roots, [c(1.0, 0.0), c(0.0, 0.0)], 1));
        assert!(roots.reconstruction_residual < 1e-12);
        assert!(!roots.borderline);
    }

    #[test]
    fn factorize_y3_and_three_factor_example() {
        let roots = factorize(&BinaryCubic::y3()).unwrap();
        assert_eq!(roots.distinct(), 1);
        assert!(has_root(&roots, [c(1.0, 0.0), c(0.0, 0.0)], 3));

        let roots = factorize(&BinaryCubic::three_factor_example()).unwrap();
        assert_eq!(roots.distinct(), 3);
        for p in [[c(1.0, 0.0), c(-1.0, 0.0)], [c(1.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]] {
            assert!(has_root(&roots, p, 1));
        }
    }

    #[test]
    fn zero_form_has_no_roots() {
        assert_eq!(factorize(&BinaryCubic::zero()).unwrap_err(), Error::ZeroForm);
        assert_eq!(classify_type(&BinaryCubic::zero()).unwrap().factor_type, FactorType::IV);
    }

    #[test]
    fn classification_table() {
        let cases = [
            (BinaryCubic::three_factor_example(), FactorType::I),
            (BinaryCubic::x2y(), FactorType::II),
            (BinaryCubic::y3(), FactorType::III),
            (BinaryCubic::zero(), FactorType::IV),
        ];
        for (f, expected) in cases {
            let class = classify_type(&f).unwrap();
            assert_eq!(class.factor_type, expected);
            assert!(!class.borderline);
        }
    }

    #[test]
    fn close_but_distinct_roots_are_flagged() {
        // roots at x = ±1e-5 (chordal ≈ 2e-5) plus y = 0
        let d = 1e-5;
        let f = BinaryCubic::from_real([0.0, 1.0, 0.0, -d * d]);
        let class = classify_type(&f).unwrap();
        assert!(class.borderline);
    }

    #[test]
    fn stabilizer_of_x2y_is_trivial() {
        let s = compute_stabilizer(&BinaryCubic::x2y()).unwrap();
        assert_eq!(s.kind, StabilizerKind::Finite);
        assert_eq!(s.order, Some(1));
        assert!((&s.elements[0] - &ComplexMatrix::identity(2)).max_norm() < 1e-12);
    }

    #[test]
    fn stabilizer_of_three_factor_example_contains_a1() {
        let s = compute_stabilizer(&BinaryCubic::three_factor_example()).unwrap();
        assert_eq!(s.kind, StabilizerKind::Finite);
        assert_eq!(s.order, Some(3));
        assert_eq!(element_order(&s.generators[0], 12, 1e-8), Some(3));
        let a1 = a_eps(c(1.0, 0.0)).unwrap();
        assert!(s.elements.iter().any(|g| (g - &a1).max_norm() < 1e-10));
        assert!(s.max_fixing_residual < 1e-12);
    }

    #[test]
    fn stabilizer_of_y3_has_three_components() {
        let s = compute_stabilizer(&BinaryCubic::y3()).unwrap();
        assert_eq!(s.kind, StabilizerKind::PositiveDimensional);
        assert_eq!(s.dimension, Some(1));
        assert_eq!(s.components, Some(3));
        assert_eq!(element_order(&s.generators[0], 12, 1e-10), Some(3));
        for g in &s.generators {
            assert!(fixing_residual(g, &BinaryCubic::y3()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn stabilizer_of_zero_is_everything() {
        let s = compute_stabilizer(&BinaryCubic::zero()).unwrap();
        assert_eq!(s.kind, StabilizerKind::FullGroup);
        assert_eq!(s.dimension, Some(3));
    }

    #[test]
    fn slice_map_values_and_collision() {
        let id = ComplexMatrix::identity(2);
        let p = SliceBundlePoint::new(id.clone(), c(0.0, 0.0), 1e-12).unwrap();
        assert_eq!(slice_map(&p).unwrap(), BinaryCubic::x2y());
        let eps = c(0.5, 0.0);
        let eta = -eps * eps;
        let p1 = SliceBundlePoint::new(id, eta, 1e-12).unwrap();
        let p2 = SliceBundlePoint::new(a_eps(eps).unwrap(), eta, 1e-12).unwrap();
        let m_eps = BinaryCubic::m_eps(eps);
        assert!(close(&slice_map(&p1).unwrap(), &m_eps, 0.0));
        assert!(close(&slice_map(&p2).unwrap(), &m_eps, 1e-14));
    }

    #[test]
    fn slice_point_requires_unit_det() {
        let g = ComplexMatrix::from_diagonal(&[c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(SliceBundlePoint::new(g, c(0.0, 0.0), 1e-9), Err(Error::Precondition(_))));
    }

    #[test]
    fn demo_reports_collision_and_types() {
        let r = non_injectivity_demo(c(0.5, 0.0)).unwrap();
        assert!(r.image_distance <= 1e-12);
        assert!(r.bundle_distance >= 1.0);
        assert!(close(&r.first_image, &BinaryCubic::from_real([0.0, 1.0, 0.0, -0.25]), 1e-15));
        assert_eq!(r.nearby.factor_type, FactorType::I);
        assert_eq!(r.nearby.stabilizer_order, Some(3));
        assert_eq!(r.base.factor_type, FactorType::II);
        assert_eq!(r.base.stabilizer_order, Some(1));

        let mut last = f64::INFINITY;
        for eps in [0.5, 0.2, 0.1, 0.01] {
            let d = non_injectivity_demo(c(eps, 0.0)).unwrap().distance_to_base;
            assert!((d - eps * eps).abs() < 1e-15);
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn complement_of_x2y_is_y3() {
        for metric in [CubicMetric::Binomial, CubicMetric::Monomial] {
            let tc = tangent_complement(&BinaryCubic::x2y(), &metric.space()).unwrap();
            assert_eq!(tc.orbit_tangent_rank, 3);
            let basis = tc.complement_vectors();
            assert_eq!(basis.len(), 1);
            let expected = BinaryCubic::y3().to_cvec();
            assert!((&basis[0] - &expected).iter().all(|z| z.norm() < 1e-12), "{metric:?}");
        }
    }

    #[test]
    fn complement_of_zero_is_everything() {
        let tc = tangent_complement(&BinaryCubic::zero(), &CubicMetric::Binomial.space()).unwrap();
        assert_eq!(tc.orbit_tangent_rank, 0);
        assert_eq!(tc.complement.len(), 4);
    }

    #[test]
    fn binomial_metric_makes_su2_unitary() {
        assert!(CubicMetric::Binomial.su2_rep().unitarity_residual() < 1e-14);
        assert!(CubicMetric::Monomial.su2_rep().unitarity_residual() > 0.5);
    }
}
