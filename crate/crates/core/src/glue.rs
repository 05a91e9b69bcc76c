//! Gluing a Kähler potential to the flat one near the origin:
//! `ũ(x) = ‖x‖² + χ(‖x‖²/λ²)·(u(x) − ‖x‖²)`, with grid certification of
//! positivity and closeness to the original form, and path-integrated
//! momentum maps for the glued form.
//!
//! Regions follow the convention `O(r) = {‖x‖² < r}`.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, min_hermitian_eigenvalue, CVec, LieAlgebraElement, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    /// `10τ³ − 15τ⁴ + 6τ⁵` on `[1, 2]`, `τ = t − 1`.
    C2Polynomial,
    /// `ψ(τ)/(ψ(τ) + ψ(1 − τ))` with `ψ(τ) = exp(−1/τ)`.
    CInfinityBump,
}

/// `χ` with `χ = 0` on `t ≤ 1` and `χ = 1` on `t ≥ 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub smoothness: Smoothness,
}

impl Default for CutoffProfile {
    fn default() -> Self {
        Self { smoothness: Smoothness::C2Polynomial }
    }
}

fn psi(tau: f64) -> [f64; 3] {
    if tau <= 0.0 {
        return [0.0; 3];
    }
    let p = (-1.0 / tau).exp();
    let t2 = tau * tau;
    [p, p / t2, p * (1.0 / (t2 * t2) - 2.0 / (t2 * tau))]
}

impl CutoffProfile {
    pub fn c2() -> Self {
        Self { smoothness: Smoothness::C2Polynomial }
    }

    pub fn bump() -> Self {
        Self { smoothness: Smoothness::CInfinityBump }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.derivatives(t)[0]
    }

    /// `[χ, χ′, χ″]` at `t`.
    pub fn derivatives(&self, t: f64) -> [f64; 3] {
        if t <= 1.0 {
            return [0.0; 3];
        }
        if t >= 2.0 {
            return [1.0, 0.0, 0.0];
        }
        let tau = t - 1.0;
        match self.smoothness {
            Smoothness::C2Polynomial => {
                let t2 = tau * tau;
                [
                    t2 * tau * (10.0 - 15.0 * tau + 6.0 * t2),
                    30.0 * t2 * (1.0 - tau) * (1.0 - tau),
                    60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau),
                ]
            }
            Smoothness::CInfinityBump => {
                let [a, a1, a2] = psi(tau);
                let [b, b1, b2] = psi(1.0 - tau);
                let (b1, s) = (-b1, a + b);
                let num = a1 * b - a * b1;
                let num1 = a2 * b - a * b2;
                let s1 = a1 + b1;
                [a / s, num / (s * s), (num1 * s - 2.0 * num * s1) / (s * s * s)]
            }
        }
    }
}

/// Real potential `u` on a domain of `Cⁿ`.
pub trait KahlerPotential: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &CVec) -> f64;

    fn description(&self) -> String;

    /// Supremum of `‖x‖²` over the domain.
    fn domain_radius2(&self) -> f64 {
        f64::INFINITY
    }

    /// `[F, F′, F″]` at `s` when `u(x) = F(‖x‖²)`.
    fn radial_derivatives(&self, _s: f64) -> Option<[f64; 3]> {
        None
    }

    /// `∂²u/∂x_α∂x̄_β`, when known in closed form.
    fn analytic_hessian(&self, x: &CVec) -> Option<DMatrix<C64>> {
        let s = x.norm_squared();
        let [_, f1, f2] = self.radial_derivatives(s)?;
        let n = self.dim();
        Some(DMatrix::from_fn(n, n, |a, b| {
            let diag = if a == b { f1 } else { 0.0 };
            x[a].conj() * x[b] * f2 + c(diag, 0.0)
        }))
    }
}

/// Radial profiles `F` with `u(x) = F(‖x‖²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadialProfile {
    /// `F(s) = s`.
    Flat,
    /// `F(s) = log(1 + s)`.
    FubiniStudy,
    /// `F(s) = s²`.
    Quartic,
    /// `F(s) = Σₖ coefficients[k]·s^{k+1}`, convergent for `s < radius2`.
    PowerSeries {
        coefficients: Vec<f64>,
        #[serde(default = "infinite")]
        radius2: f64,
    },
}

fn infinite() -> f64 {
    f64::INFINITY
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialPotential {
    pub dim: usize,
    pub profile: RadialProfile,
}

impl RadialPotential {
    pub fn new(dim: usize, profile: RadialProfile) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("potential needs at least one complex variable".into()));
        }
        if let RadialProfile::PowerSeries { coefficients, radius2 } = &profile {
            if coefficients.is_empty() || coefficients.iter().any(|a| !a.is_finite()) {
                return Err(Error::Invalid("power series needs finite coefficients".into()));
            }
            if !(*radius2 > 0.0) {
                return Err(Error::Invalid("power series radius must be positive".into()));
            }
        }
        Ok(Self { dim, profile })
    }

    pub fn flat(dim: usize) -> Self {
        Self { dim, profile: RadialProfile::Flat }
    }

    pub fn fubini_study(dim: usize) -> Self {
        Self { dim, profile: RadialProfile::FubiniStudy }
    }

    pub fn quartic(dim: usize) -> Self {
        Self { dim, profile: RadialProfile::Quartic }
    }

    pub fn profile_derivatives(&self, s: f64) -> [f64; 3] {
        match &self.profile {
            RadialProfile::Flat => [s, 1.0, 0.0],
            RadialProfile::FubiniStudy => {
                let q = 1.0 + s;
                [s.ln_1p(), 1.0 / q, -1.0 / (q * q)]
            }
            RadialProfile::Quartic => [s * s, 2.0 * s, 2.0],
            RadialProfile::PowerSeries { coefficients, .. } => {
                let (mut f, mut f1, mut f2) = (0.0, 0.0, 0.0);
                for (k, &a) in coefficients.iter().enumerate() {
                    let p = (k + 1) as f64;
                    f += a * s.powi(k as i32 + 1);
                    f1 += a * p * s.powi(k as i32);
                    if k >= 1 {
                        f2 += a * p * (p - 1.0) * s.powi(k as i32 - 1);
                    }
                }
                [f, f1, f2]
            }
        }
    }
}

impl KahlerPotential for RadialPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &CVec) -> f64 {
        self.profile_derivatives(x.norm_squared())[0]
    }

    fn description(&self) -> String {
        match &self.profile {
            RadialProfile::Flat => format!("flat on C^{}", self.dim),
            RadialProfile::FubiniStudy => format!("Fubini-Study log(1+|x|^2) on C^{}", self.dim),
            RadialProfile::Quartic => format!("|x|^4 on C^{}", self.dim),
            RadialProfile::PowerSeries { coefficients, .. } => {
                format!("radial power series of degree {} on C^{}", coefficients.len(), self.dim)
            }
        }
    }

    fn domain_radius2(&self) -> f64 {
        match &self.profile {
            RadialProfile::PowerSeries { radius2, .. } => *radius2,
            _ => f64::INFINITY,
        }
    }

    fn radial_derivatives(&self, s: f64) -> Option<[f64; 3]> {
        Some(self.profile_derivatives(s))
    }
}

/// `ũ(x) = ‖x‖² + χ(‖x‖²/λ²)·R(x)` with `R = u − ‖x‖²`.
#[derive(Clone)]
pub struct GluedPotential {
    pub base: Arc<dyn KahlerPotential>,
    pub cutoff: CutoffProfile,
    pub lambda: f64,
}

impl KahlerPotential for GluedPotential {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, x: &CVec) -> f64 {
        let s = x.norm_squared();
        let chi = self.cutoff.eval(s / (self.lambda * self.lambda));
        if chi == 0.0 {
            s
        } else if chi == 1.0 {
            self.base.eval(x)
        } else {
            s + chi * (self.base.eval(x) - s)
        }
    }

    fn description(&self) -> String {
        format!("{} glued at lambda = {}", self.base.description(), self.lambda)
    }

    fn domain_radius2(&self) -> f64 {
        self.base.domain_radius2()
    }

    fn radial_derivatives(&self, s: f64) -> Option<[f64; 3]> {
        let [f, f1, f2] = self.base.radial_derivatives(s)?;
        let l2 = self.lambda * self.lambda;
        let [chi, chi1, chi2] = self.cutoff.derivatives(s / l2);
        let (r, r1, r2) = (f - s, f1 - 1.0, f2);
        Some([
            s + chi * r,
            1.0 + chi1 * r / l2 + chi * r1,
            chi2 * r / (l2 * l2) + 2.0 * chi1 * r1 / l2 + chi * r2,
        ])
    }
}

/// Largest `‖H(0) − I‖` accepted as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-6;

pub fn glued_potential(
    u: Arc<dyn KahlerPotential>,
    chi: CutoffProfile,
    lambda: f64,
) -> Result<GluedPotential> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Invalid(format!("lambda must be positive, got {lambda}")));
    }
    if 3.0 * lambda * lambda >= u.domain_radius2() {
        return Err(Error::Domain(format!(
            "O(3 lambda^2) with lambda = {lambda} is not inside the domain of the potential"
        )));
    }
    let h0 = hessian_at(u.as_ref(), &CVec::zeros(u.dim()), DEFAULT_FD_STEP)?;
    let defect = (h0 - DMatrix::identity(u.dim(), u.dim())).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if defect > NORMALIZATION_TOL {
        return Err(Error::Precondition(format!(
            "complex Hessian at the origin differs from the identity by {defect:.3e}"
        )));
    }
    Ok(GluedPotential { base: u, cutoff: chi, lambda })
}

/// `|R(r·d)|/r³` for unit direction `d`, along the given radii.
pub fn remainder_ratios(u: &dyn KahlerPotential, direction: &CVec, radii: &[f64]) -> Vec<f64> {
    let d = direction / c(direction.norm(), 0.0);
    radii
        .iter()
        .map(|&r| {
            let x = &d * c(r, 0.0);
            (u.eval(&x) - r * r).abs() / (r * r * r)
        })
        .collect()
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Hermitian residual above which a finite-difference Hessian is flagged.
pub const HERMITIAN_TOL: f64 = 1e-7;
/// Deviation from a closed-form Hessian above which the estimate is flagged.
pub const CROSSCHECK_TOL: f64 = 1e-4;

#[derive(Clone, Debug, Serialize)]
pub struct HessianEstimate {
    /// Hermitian part of the finite-difference estimate.
    #[serde(serialize_with = "serialize_dmatrix")]
    pub matrix: DMatrix<C64>,
    pub hermitian_residual: f64,
    /// `max |H_fd − H_exact|` when a closed form is available.
    pub analytic_deviation: Option<f64>,
    pub warning: bool,
}

fn serialize_dmatrix<S: serde::Serializer>(m: &DMatrix<C64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> =
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    rows.serialize(s)
}

fn displaced(x: &CVec, moves: &[(usize, f64)]) -> CVec {
    let mut y = x.clone();
    for &(axis, h) in moves {
        if axis % 2 == 0 {
            y[axis / 2].re += h;
        } else {
            y[axis / 2].im += h;
        }
    }
    y
}

fn fd_hessian_raw(u: &dyn KahlerPotential, x: &CVec, h: f64) -> DMatrix<C64> {
    let n = u.dim();
    let mut d = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for a in 0..2 * n {
        for b in a..2 * n {
            let v = (u.eval(&displaced(x, &[(a, h), (b, h)])) - u.eval(&displaced(x, &[(a, h), (b, -h)]))
                - u.eval(&displaced(x, &[(a, -h), (b, h)]))
                + u.eval(&displaced(x, &[(a, -h), (b, -h)])))
                / (4.0 * h * h);
            d[(a, b)] = v;
            d[(b, a)] = v;
        }
    }
    DMatrix::from_fn(n, n, |al, be| {
        let (xa, ya, xb, yb) = (2 * al, 2 * al + 1, 2 * be, 2 * be + 1);
        c(d[(xa, xb)] + d[(ya, yb)], d[(xa, yb)] - d[(ya, xb)]) * 0.25
    })
}

/// Complex Hessian `∂²u/∂x_α∂x̄_β` by central differences of step `h` in the
/// real and imaginary parts, symmetrized, and cross-checked against the
/// closed form when the potential provides one.
pub fn complex_hessian(u: &dyn KahlerPotential, x: &CVec, h: f64) -> Result<HessianEstimate> {
    if x.len() != u.dim() {
        return Err(Error::Dimension(format!("point has {} entries, potential has {}", x.len(), u.dim())));
    }
    let scale = x.camax();
    if !(h.is_finite() && h > 1e-12 * scale.max(1.0)) {
        return Err(Error::Invalid(format!("finite-difference step {h} underflows at this point")));
    }
    if (x.norm() + 2.0 * h).powi(2) >= u.domain_radius2() {
        return Err(Error::Domain("stencil leaves the domain of the potential".into()));
    }
    let raw = fd_hessian_raw(u, x, h);
    let hermitian_residual = (&raw - raw.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let matrix = (&raw + raw.adjoint()) * c(0.5, 0.0);
    let analytic_deviation = u
        .analytic_hessian(x)
        .map(|exact| (&matrix - exact).iter().map(|z| z.norm()).fold(0.0, f64::max));
    let warning = hermitian_residual > HERMITIAN_TOL || analytic_deviation.is_some_and(|d| d > CROSSCHECK_TOL);
    Ok(HessianEstimate { matrix, hermitian_residual, analytic_deviation, warning })
}

/// Closed-form Hessian if available, otherwise finite differences.
pub fn hessian_at(u: &dyn KahlerPotential, x: &CVec, h: f64) -> Result<DMatrix<C64>> {
    match u.analytic_hessian(x) {
        Some(m) => Ok(m),
        None => Ok(complex_hessian(u, x, h)?.matrix),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub dim: usize,
    pub points_per_axis: usize,
    /// Half-width of the polydisc `[−L, L]^{2n}` enclosing `O(3λ²)`.
    pub half_width: f64,
}

impl GridSpec {
    pub fn total(&self) -> usize {
        self.points_per_axis.pow(2 * self.dim as u32)
    }

    pub fn point(&self, index: usize) -> CVec {
        let n = self.points_per_axis;
        let step = 2.0 * self.half_width / (n - 1) as f64;
        let mut idx = index;
        let mut coords = vec![0.0; 2 * self.dim];
        for slot in coords.iter_mut() {
            *slot = -self.half_width + step * (idx % n) as f64;
            idx /= n;
        }
        CVec::from_iterator(self.dim, coords.chunks(2).map(|p| c(p[0], p[1])))
    }
}

/// Smallest grid accepted as conclusive.
pub const MIN_GRID: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianSource {
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, Serialize)]
pub struct GlueReport {
    pub potential: String,
    pub cutoff: Smoothness,
    pub lambda: f64,
    pub grid: GridSpec,
    pub fd_step: f64,
    pub hessian_source: HessianSource,
    /// Smallest eigenvalue of the complex Hessian of `ũ` over `O(3λ²)`.
    pub min_eigenvalue: f64,
    /// `max |H̃_αβ − H_αβ|` over `O(3λ²)`.
    pub sup_f_ab: f64,
    /// `max |H̃ − I|` over `O(λ²)`, from finite differences.
    pub flat_region_residual: f64,
    /// `max |ũ − u|` over grid points outside `O(2λ²)`.
    pub outer_region_residual: f64,
    /// Largest `|ũ(kx) − ũ(x)|` over sampled unitary `k` and grid points.
    pub invariance_residual: f64,
    pub points_in_domain: usize,
    pub points_in_flat_region: usize,
    pub points_outside: usize,
    pub positive_definite: bool,
    pub inconclusive: bool,
}

impl GlueReport {
    /// Positive-definite, conclusive and `sup_f_ab < eps`.
    pub fn admissible(&self, eps: f64) -> bool {
        self.positive_definite && !self.inconclusive && self.sup_f_ab < eps
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GluePoint {
    pub point: Vec<[f64; 2]>,
    pub min_eigenvalue: f64,
}

/// Per-point minimum eigenvalues as CSV, header `re0,im0,…,min_eigenvalue`.
pub fn glue_points_csv(points: &[GluePoint], dim: usize) -> String {
    let mut out = String::new();
    for k in 0..dim {
        let _ = write!(out, "re{k},im{k},");
    }
    out.push_str("min_eigenvalue\n");
    for p in points {
        for [re, im] in &p.point {
            let _ = write!(out, "{re:.17e},{im:.17e},");
        }
        let _ = writeln!(out, "{:.17e}", p.min_eigenvalue);
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct GlueOptions {
    pub grid: usize,
    pub fd_step: f64,
    pub collect_points: bool,
}

impl Default for GlueOptions {
    fn default() -> Self {
        Self { grid: 64, fd_step: DEFAULT_FD_STEP, collect_points: false }
    }
}

#[derive(Clone, Copy, Default)]
struct Scan {
    min_eig: f64,
    sup_f: f64,
    flat: f64,
    outer: f64,
    in_domain: usize,
    in_flat: usize,
    outside: usize,
}

impl Scan {
    fn empty() -> Self {
        Scan { min_eig: f64::INFINITY, ..Default::default() }
    }

    fn merge(self, o: Scan) -> Scan {
        Scan {
            min_eig: self.min_eig.min(o.min_eig),
            sup_f: self.sup_f.max(o.sup_f),
            flat: self.flat.max(o.flat),
            outer: self.outer.max(o.outer),
            in_domain: self.in_domain + o.in_domain,
            in_flat: self.in_flat + o.in_flat,
            outside: self.outside + o.outside,
        }
    }
}

fn max_abs_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Fixed unitary rotations used for the invariance spot-check.
fn spot_unitaries(n: usize) -> Vec<DMatrix<C64>> {
    let phases = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            c(0.0, 0.7 + 0.9 * a as f64).exp()
        } else {
            c(0.0, 0.0)
        }
    });
    let mut rotation = DMatrix::<C64>::identity(n, n);
    if n >= 2 {
        let (s, co) = 0.4f64.sin_cos();
        rotation[(0, 0)] = c(co, 0.0);
        rotation[(0, 1)] = c(0.0, -s);
        rotation[(1, 0)] = c(0.0, -s);
        rotation[(1, 1)] = c(co, 0.0);
    }
    vec![phases.clone(), &rotation * &phases]
}

/// Scans the polydisc enclosing `O(3λ²)` on a uniform grid.
pub fn certify_glue(
    u: Arc<dyn KahlerPotential>,
    chi: CutoffProfile,
    lambda: f64,
    grid: usize,
) -> Result<GlueReport> {
    certify_glue_with(u, chi, lambda, GlueOptions { grid, ..Default::default() }).map(|(r, _)| r)
}

pub fn certify_glue_with(
    u: Arc<dyn KahlerPotential>,
    chi: CutoffProfile,
    lambda: f64,
    opts: GlueOptions,
) -> Result<(GlueReport, Vec<GluePoint>)> {
    if opts.grid < 2 {
        return Err(Error::Invalid("grid needs at least two points per axis".into()));
    }
    if !(opts.fd_step.is_finite() && opts.fd_step > 0.0) {
        return Err(Error::Invalid(format!("fd step must be positive, got {}", opts.fd_step)));
    }
    let glued = glued_potential(u.clone(), chi, lambda)?;
    let dim = u.dim();
    let l2 = lambda * lambda;
    let spec = GridSpec { dim, points_per_axis: opts.grid, half_width: (3.0 * l2).sqrt() };
    let analytic = glued.analytic_hessian(&CVec::zeros(dim)).is_some() && u.analytic_hessian(&CVec::zeros(dim)).is_some();
    let hess = |p: &dyn KahlerPotential, x: &CVec| -> Result<DMatrix<C64>> {
        if analytic {
            Ok(p.analytic_hessian(x).expect("closed form available"))
        } else {
            Ok(complex_hessian(p, x, opts.fd_step)?.matrix)
        }
    };
    let identity = DMatrix::<C64>::identity(dim, dim);

    let visit = |index: usize| -> Result<(Scan, Option<GluePoint>)> {
        let x = spec.point(index);
        let s = x.norm_squared();
        let mut scan = Scan::empty();
        let mut point = None;
        if s >= 2.0 * l2 {
            scan.outside = 1;
            scan.outer = (glued.eval(&x) - u.eval(&x)).abs();
        }
        if s < 3.0 * l2 {
            scan.in_domain = 1;
            let ht = hess(&glued, &x)?;
            let h = hess(u.as_ref(), &x)?;
            let eig = min_hermitian_eigenvalue(&ht);
            scan.min_eig = eig;
            scan.sup_f = max_abs_entry(&(&ht - h));
            if opts.collect_points {
                point = Some(GluePoint {
                    point: x.iter().map(|z| [z.re, z.im]).collect(),
                    min_eigenvalue: eig,
                });
            }
        }
        if s < l2 {
            scan.in_flat = 1;
            let fd = complex_hessian(&glued, &x, opts.fd_step)?.matrix;
            scan.flat = max_abs_entry(&(fd - &identity));
        }
        Ok((scan, point))
    };

    let total = spec.total();
    let (scan, points) = if opts.collect_points {
        let results: Vec<(Scan, Option<GluePoint>)> =
            (0..total).into_par_iter().map(visit).collect::<Result<_>>()?;
        let scan = results.iter().fold(Scan::empty(), |acc, (s, _)| acc.merge(*s));
        (scan, results.into_iter().filter_map(|(_, p)| p).collect())
    } else {
        let scan = (0..total)
            .into_par_iter()
            .map(|i| visit(i).map(|(s, _)| s))
            .try_reduce(Scan::empty, |a, b| Ok(a.merge(b)))?;
        (scan, Vec::new())
    };

    let stride = (total / 97).max(1);
    let mut invariance = 0.0f64;
    for k in spot_unitaries(dim) {
        for index in (0..total).step_by(stride) {
            let x = spec.point(index);
            if x.norm_squared() < 3.0 * l2 {
                invariance = invariance.max((glued.eval(&(&k * &x)) - glued.eval(&x)).abs());
            }
        }
    }

    let report = GlueReport {
        potential: u.description(),
        cutoff: chi.smoothness,
        lambda,
        grid: spec,
        fd_step: opts.fd_step,
        hessian_source: if analytic { HessianSource::Analytic } else { HessianSource::FiniteDifference },
        min_eigenvalue: scan.min_eig,
        sup_f_ab: scan.sup_f,
        flat_region_residual: scan.flat,
        outer_region_residual: scan.outer,
        invariance_residual: invariance,
        points_in_domain: scan.in_domain,
        points_in_flat_region: scan.in_flat,
        points_outside: scan.outside,
        positive_definite: scan.min_eig > 0.0,
        inconclusive: opts.grid < MIN_GRID || scan.in_flat == 0,
    };
    Ok((report, points))
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    pub eps: f64,
    pub lambda_range: (f64, f64),
    /// Largest admissible `λ` found, if any.
    pub lambda: Option<f64>,
    pub evaluations: usize,
}

/// Bisection for the largest `λ` in `range` with `sup_f_ab < eps` and a
/// positive-definite verdict.
pub fn find_lambda_threshold(
    u: Arc<dyn KahlerPotential>,
    chi: CutoffProfile,
    eps: f64,
    range: (f64, f64),
    grid: usize,
    iterations: usize,
) -> Result<ThresholdReport> {
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    let (mut lo, mut hi) = range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::Invalid(format!("invalid lambda range ({lo}, {hi})")));
    }
    let mut evaluations = 0;
    let mut admissible = |lambda: f64| -> Result<bool> {
        evaluations += 1;
        Ok(certify_glue(u.clone(), chi, lambda, grid)?.admissible(eps))
    };
    let lambda = if admissible(hi)? {
        Some(hi)
    } else if !admissible(lo)? {
        None
    } else {
        for _ in 0..iterations {
            let mid = 0.5 * (lo + hi);
            if admissible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    };
    Ok(ThresholdReport { eps, lambda_range: range, lambda, evaluations })
}

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];
/// Gauss–Legendre panels per polyline segment.
pub const PANELS_PER_SEGMENT: usize = 16;

/// `ω(u, w) = Im(uᴴ Hᵀ w)`, equal to `Im⟨u, w⟩` for the flat form.
pub fn kahler_form(h: &DMatrix<C64>, u: &CVec, w: &CVec) -> f64 {
    (u.adjoint() * h.transpose() * w)[(0, 0)].im
}

/// `base_value + ∫ ω(ξ·p, dp)` along a polyline, for the form with Hessian
/// field `hessian`; `region` must hold at every vertex and quadrature node.
pub fn momentum_by_path(
    hessian: &dyn Fn(&CVec) -> Result<DMatrix<C64>>,
    xi: &LieAlgebraElement,
    path: &[CVec],
    base_value: f64,
    region: &dyn Fn(&CVec) -> bool,
) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::Invalid("path needs at least one point".into()));
    }
    let a = xi.matrix().inner();
    for p in path {
        if p.len() != a.nrows() {
            return Err(Error::Dimension(format!("path point has {} entries, expected {}", p.len(), a.nrows())));
        }
        if !region(p) {
            return Err(Error::Domain("path leaves the region where the form is defined".into()));
        }
    }
    let mut total = base_value;
    for seg in path.windows(2) {
        let (p0, p1) = (&seg[0], &seg[1]);
        let dp = p1 - p0;
        let width = 1.0 / PANELS_PER_SEGMENT as f64;
        for panel in 0..PANELS_PER_SEGMENT {
            let mid = (panel as f64 + 0.5) * width;
            for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                let tau = mid + 0.5 * width * node;
                let p = p0 + &dp * c(tau, 0.0);
                if !region(&p) {
                    return Err(Error::Domain("path leaves the region where the form is defined".into()));
                }
                let h = hessian(&p)?;
                total += 0.5 * width * weight * kahler_form(&h, &(a * &p), &dp);
            }
        }
    }
    Ok(total)
}

/// `Φ^ξ(x) = ½ F′(‖x‖²) Im⟨ξx, x⟩` for a radial potential, zero at the origin.
pub fn radial_momentum(u: &dyn KahlerPotential, xi: &LieAlgebraElement, x: &CVec) -> Option<f64> {
    let [_, f1, _] = u.radial_derivatives(x.norm_squared())?;
    let ax = xi.matrix().inner() * x;
    Some(0.5 * f1 * ax.dotc(x).im)
}

/// Straight segment `from → to` as a polyline with `pieces` pieces.
pub fn segment(from: &CVec, to: &CVec, pieces: usize) -> Vec<CVec> {
    (0..=pieces).map(|k| from + (to - from) * c(k as f64 / pieces as f64, 0.0)).collect()
}

/// Arc `cos θ·x + sin θ·y`, `θ ∈ [0, π/2]`, for `Re⟨x, y⟩ = 0`, `‖x‖ = ‖y‖`.
pub fn quarter_arc(x: &CVec, y: &CVec, pieces: usize) -> Vec<CVec> {
    (0..=pieces)
        .map(|k| {
            let (s, co) = (std::f64::consts::FRAC_PI_2 * k as f64 / pieces as f64).sin_cos();
            x * c(co, 0.0) + y * c(s, 0.0)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentumMatch {
    pub lambda: f64,
    /// `Φ̃(x)` along the straight path from the origin.
    pub direct: f64,
    /// `Φ̃(x)` along a path through a second annulus point `z`.
    pub around: f64,
    pub path_agreement: f64,
    /// `Φ̃ − Φ` at `x` and at `z`.
    pub c_first: f64,
    pub c_second: f64,
    pub c_agreement: f64,
}

/// Checks that `Φ̃ − Φ` is one constant on the annulus `O(3λ²) − O(2λ²)`,
/// with `Φ̃` path-integrated from `Φ̃(0) = 0` and `Φ` integrated for the
/// original form from `Φ(0) = 0`.
pub fn match_momentum_constant(
    glued: &GluedPotential,
    xi: &LieAlgebraElement,
    x: &CVec,
    fd_step: f64,
) -> Result<MomentumMatch> {
    let l2 = glued.lambda * glued.lambda;
    let s = x.norm_squared();
    if !(s > 2.0 * l2 && s < 3.0 * l2) {
        return Err(Error::Domain("endpoint must lie in the annulus O(3λ²) − O(2λ²)".into()));
    }
    let glued_h = |p: &CVec| hessian_at(glued, p, fd_step);
    let base_h = |p: &CVec| hessian_at(glued.base.as_ref(), p, fd_step);
    let inside = |p: &CVec| p.norm_squared() < 3.0 * l2;
    let everywhere = |p: &CVec| p.norm_squared() < glued.base.domain_radius2();
    let origin = CVec::zeros(x.len());

    // second point: x rotated by i, moved radially within the annulus
    let target_s = if s > 2.5 * l2 { 2.2 * l2 } else { 2.8 * l2 };
    let ix = x * c(0.0, 1.0);
    let z = &ix * c((target_s / s).sqrt(), 0.0);

    let direct = momentum_by_path(&glued_h, xi, &segment(&origin, x, 8), 0.0, &inside)?;
    let mut around_path = segment(&origin, &z, 8);
    around_path.extend(segment(&z, &ix, 4).into_iter().skip(1));
    let mut arc = quarter_arc(&ix, x, 32);
    arc.remove(0);
    around_path.extend(arc);
    let around = momentum_by_path(&glued_h, xi, &around_path, 0.0, &inside)?;

    let phi_x = momentum_by_path(&base_h, xi, &segment(&origin, x, 8), 0.0, &everywhere)?;
    let glued_z = momentum_by_path(&glued_h, xi, &segment(&origin, &z, 8), 0.0, &inside)?;
    let phi_z = momentum_by_path(&base_h, xi, &segment(&origin, &z, 8), 0.0, &everywhere)?;
    let (c_first, c_second) = (direct - phi_x, glued_z - phi_z);
    Ok(MomentumMatch {
        lambda: glued.lambda,
        direct,
        around,
        path_agreement: (direct - around).abs(),
        c_first,
        c_second,
        c_agreement: (c_first - c_second).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(z: &[C64]) -> CVec {
        CVec::from_row_slice(z)
    }

    #[test]
    fn cutoff_values_and_derivatives() {
        for chi in [CutoffProfile::c2(), CutoffProfile::bump()] {
            assert_eq!(chi.derivatives(0.5), [0.0; 3]);
            assert_eq!(chi.derivatives(1.0), [0.0; 3]);
            assert_eq!(chi.derivatives(2.0), [1.0, 0.0, 0.0]);
            assert!((chi.eval(1.5) - 0.5).abs() < 1e-15);
            let h = 1e-5;
            for t in [1.1, 1.37, 1.5, 1.8, 1.95] {
                let [v, d1, d2] = chi.derivatives(t);
                assert!((0.0..=1.0).contains(&v));
                let fd1 = (chi.eval(t + h) - chi.eval(t - h)) / (2.0 * h);
                let fd2 = (chi.derivatives(t + h)[1] - chi.derivatives(t - h)[1]) / (2.0 * h);
                assert!((fd1 - d1).abs() < 1e-7, "{chi:?} t={t}");
                assert!((fd2 - d2).abs() < 1e-5, "{chi:?} t={t}");
            }
        }
    }

    #[test]
    fn flat_hessian_is_identity() {
        let u = RadialPotential::flat(2);
        let x = point(&[c(0.3, -0.1), c(0.2, 0.5)]);
        let est = complex_hessian(&u, &x, 1e-4).unwrap();
        let dev = max_abs_entry(&(est.matrix - DMatrix::identity(2, 2)));
        assert!(dev < 1e-9);
        assert!(!est.warning);
    }

    #[test]
    fn fubini_study_and_quartic_on_c1() {
        let x = point(&[c(0.6, 0.8)]);
        let s: f64 = 1.0;
        let fs = complex_hessian(&RadialPotential::fubini_study(1), &x, 1e-4).unwrap();
        assert!((fs.matrix[(0, 0)] - c(1.0 / ((1.0 + s) * (1.0 + s)), 0.0)).norm() < 1e-8);
        let q = complex_hessian(&RadialPotential::quartic(1), &x, 1e-4).unwrap();
        assert!((q.matrix[(0, 0)] - c(4.0 * s, 0.0)).norm() < 1e-7);
        assert!(q.analytic_deviation.unwrap() < 1e-7);
    }

    #[test]
    fn tiny_step_is_rejected() {
        let u = RadialPotential::flat(1);
        assert!(complex_hessian(&u, &point(&[c(1.0, 0.0)]), 1e-14).is_err());
    }

    #[test]
    fn glued_potential_regions() {
        let fs: Arc<dyn KahlerPotential> = Arc::new(RadialPotential::fubini_study(1));
        let g = glued_potential(fs.clone(), CutoffProfile::c2(), 0.1).unwrap();
        let inner = point(&[c(0.005f64.sqrt(), 0.0)]);
        assert_eq!(g.eval(&inner), inner.norm_squared());
        let outer = point(&[c(0.0, 0.05f64.sqrt())]);
        assert_eq!(g.eval(&outer), fs.eval(&outer));
        let flat: Arc<dyn KahlerPotential> = Arc::new(RadialPotential::flat(2));
        let gf = glued_potential(flat, CutoffProfile::c2(), 0.3).unwrap();
        let x = point(&[c(0.25, 0.1), c(-0.2, 0.0)]);
        assert!((gf.eval(&x) - x.norm_squared()).abs() < 1e-16);
    }

    #[test]
    fn unnormalized_or_small_domain_rejected() {
        let q: Arc<dyn KahlerPotential> = Arc::new(RadialPotential::quartic(1));
        assert!(matches!(glued_potential(q, CutoffProfile::c2(), 0.1), Err(Error::Precondition(_))));
        let series = RadialPotential::new(
            1,
            RadialProfile::PowerSeries { coefficients: vec![1.0, -0.5], radius2: 0.01 },
        )
        .unwrap();
        assert!(matches!(
            glued_potential(Arc::new(series), CutoffProfile::c2(), 0.1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn power_series_matches_closed_form() {
        let series = RadialPotential::new(
            1,
            RadialProfile::PowerSeries { coefficients: vec![1.0, 0.0, 2.0], radius2: f64::INFINITY },
        )
        .unwrap();
        let [f, f1, f2] = series.profile_derivatives(0.5);
        assert!((f - (0.5 + 2.0 * 0.125)).abs() < 1e-15);
        assert!((f1 - (1.0 + 6.0 * 0.25)).abs() < 1e-15);
        assert!((f2 - 12.0 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn glued_radial_derivatives_match_finite_differences() {
        let fs: Arc<dyn KahlerPotential> = Arc::new(RadialPotential::fubini_study(2));
        for chi in [CutoffProfile::c2(), CutoffProfile::bump()] {
            let g = glued_potential(fs.clone(), chi, 0.2).unwrap();
            for r in [0.1, 0.25, 0.3, 0.33] {
                let x = point(&[c(r * 0.6, 0.0), c(0.0, r * 0.8)]);
                let est = complex_hessian(&g, &x, 1e-5).unwrap();
                assert!(est.analytic_deviation.unwrap() < 1e-5, "r = {r}");
            }
        }
    }

    #[test]
    fn flat_certificate() {
        let flat: Arc<dyn KahlerPotential> = Arc::new(RadialPotential::flat(1));
        let r = certify_glue(flat, CutoffProfile::c2(), 0.2, 16).unwrap();
        assert!((r.min_eigenvalue - 1.0).abs() < 1e-15);
        assert_eq!(r.sup_f_ab, 0.0);
        assert!(r.positive_definite && !r.inconclusive);
    }

    #[test]
    fn coarse_grid_is_inconclusive() {
        let fs: Arc<dyn KahlerPotential> = Arc::new(RadialPotential::fubini_study(1));
        let r = certify_glue(fs, CutoffProfile::c2(), 0.1, 6).unwrap();
        assert!(r.inconclusive);
    }

    #[test]
    fn flat_threshold_is_upper_end() {
        let flat: Arc<dyn KahlerPotential> = Arc::new(RadialPotential::flat(1));
        let t = find_lambda_threshold(flat, CutoffProfile::c2(), 0.1, (0.01, 0.5), 12, 10).unwrap();
        assert_eq!(t.lambda, Some(0.5));
    }

    #[test]
    fn flat_loop_integrates_to_zero() {
        let xi = LieAlgebraElement::new(crate::linalg::ComplexMatrix::from_diagonal(&[c(0.0, 1.0)]), 1e-12).unwrap();
        let h = |_: &CVec| Ok(DMatrix::<C64>::identity(1, 1));
        let loop_path = vec![
            point(&[c(0.1, 0.0)]),
            point(&[c(0.3, 0.2)]),
            point(&[c(-0.1, 0.4)]),
            point(&[c(0.1, 0.0)]),
        ];
        let v = momentum_by_path(&h, &xi, &loop_path, 0.0, &|_| true).unwrap();
        assert!(v.abs() < 1e-15);
        let to = point(&[c(0.3, -0.4)]);
        let v = momentum_by_path(&h, &xi, &segment(&CVec::zeros(1), &to, 1), 0.0, &|_| true).unwrap();
        // ½ Im⟨i x, x⟩ = −|x|²/2
        assert!((v + 0.125).abs() < 1e-15);
    }

    #[test]
    fn path_leaving_region_is_rejected() {
        let xi = LieAlgebraElement::zero(1);
        let h = |_: &CVec| Ok(DMatrix::<C64>::identity(1, 1));
        let path = segment(&CVec::zeros(1), &point(&[c(2.0, 0.0)]), 1);
        let r = momentum_by_path(&h, &xi, &path, 0.0, &|p: &CVec| p.norm() < 1.0);
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
