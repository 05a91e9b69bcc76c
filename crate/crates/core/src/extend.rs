//! Extension of a `G`-equivariant holomorphic map from a ball to its
//! `G_C`-saturation, evaluated pointwise through the Cartan factors of `g`.

use std::fmt;
use std::sync::Arc;

use serde::Deserialize;

use crate::cubics::{BinaryCubic, CubicAction, CubicMetric};
use crate::error::{Error, Result};
use crate::flow::BallRegion;
use crate::linalg::{c, cartan_decompose, mat_exp, ComplexMatrix, CVec, LieAlgebraElement, C64, I};
use crate::moment::LinearRep;

/// A complex reductive group acting linearly, described by its matrices.
pub trait GroupAction: Send + Sync {
    fn space_dim(&self) -> usize;

    /// Size of the matrices representing group elements.
    fn group_dim(&self) -> usize;

    /// Image of `g` in `GL(space)`.
    fn group_matrix(&self, g: &ComplexMatrix) -> Result<ComplexMatrix>;

    /// Complex-linear derivative of [`GroupAction::group_matrix`] at the identity.
    fn algebra_matrix(&self, xi: &ComplexMatrix) -> Result<ComplexMatrix>;
}

/// `GL(n, C)` acting on `Cⁿ` by matrix multiplication.
#[derive(Clone, Copy, Debug)]
pub struct DefiningAction {
    pub dim: usize,
}

impl DefiningAction {
    fn check(&self, g: &ComplexMatrix) -> Result<()> {
        if g.rows() == self.dim && g.cols() == self.dim {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "expected a {n}x{n} matrix, got {}x{}",
                g.rows(),
                g.cols(),
                n = self.dim
            )))
        }
    }
}

impl GroupAction for DefiningAction {
    fn space_dim(&self) -> usize {
        self.dim
    }

    fn group_dim(&self) -> usize {
        self.dim
    }

    fn group_matrix(&self, g: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check(g)?;
        Ok(g.clone())
    }

    fn algebra_matrix(&self, xi: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check(xi)?;
        Ok(xi.clone())
    }
}

pub type MapFn = Arc<dyn Fn(&CVec) -> CVec + Send + Sync>;

/// Holomorphic map between representation spaces, equivariant for the
/// compact group on `ball`.
#[derive(Clone)]
pub struct EquivariantMapSample {
    pub name: String,
    pub domain_rep: LinearRep,
    pub codomain_rep: LinearRep,
    pub domain_action: Arc<dyn GroupAction>,
    pub codomain_action: Arc<dyn GroupAction>,
    pub eval: MapFn,
    pub ball: BallRegion,
}

impl fmt::Debug for EquivariantMapSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EquivariantMapSample")
            .field("name", &self.name)
            .field("ball", &self.ball)
            .finish_non_exhaustive()
    }
}

/// Coefficients `c₀, c₁, …` of `v ↦ v·Σ cₖ Δ(v)ᵏ`, as `[re, im]` pairs.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantScaleSpec {
    pub coefficients: Vec<[f64; 2]>,
}

impl EquivariantMapSample {
    /// Identity on `Cⁿ` with `U(n)` acting.
    pub fn identity(dim: usize, radius: f64) -> Result<Self> {
        Ok(Self {
            name: "identity".into(),
            domain_rep: LinearRep::unitary(dim),
            codomain_rep: LinearRep::unitary(dim),
            domain_action: Arc::new(DefiningAction { dim }),
            codomain_action: Arc::new(DefiningAction { dim }),
            eval: Arc::new(|v: &CVec| v.clone()),
            ball: BallRegion::at_origin(dim, radius)?,
        })
    }

    /// Identity on binary cubics.
    pub fn cubic_identity(radius: f64) -> Result<Self> {
        Self::cubic_map("identity", Arc::new(|v: &CVec| v.clone()), radius)
    }

    /// `v ↦ v·(1 + Δ(v))` on binary cubics.
    pub fn discriminant_scale(radius: f64) -> Result<Self> {
        Self::invariant_scale(&[c(1.0, 0.0), c(1.0, 0.0)], radius)
            .map(|m| Self { name: "discriminant-scale".into(), ..m })
    }

    /// `v ↦ v·Σ cₖ Δ(v)ᵏ` on binary cubics.
    pub fn invariant_scale(coefficients: &[C64], radius: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Invalid("at least one coefficient is required".into()));
        }
        if coefficients.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Invalid("coefficients must be finite".into()));
        }
        let coeffs = coefficients.to_vec();
        let eval = move |v: &CVec| {
            let delta = BinaryCubic::new([v[0], v[1], v[2], v[3]])
                .map(|f| f.discriminant())
                .unwrap_or(c(f64::NAN, 0.0));
            let scale = coeffs.iter().rev().fold(c(0.0, 0.0), |acc, &ck| acc * delta + ck);
            v * scale
        };
        Self::cubic_map("invariant-scale", Arc::new(eval), radius)
    }

    pub fn from_spec(spec: &InvariantScaleSpec, radius: f64) -> Result<Self> {
        let coeffs: Vec<C64> = spec.coefficients.iter().map(|&[re, im]| c(re, im)).collect();
        Self::invariant_scale(&coeffs, radius)
    }

    fn cubic_map(name: &str, eval: MapFn, radius: f64) -> Result<Self> {
        let rep = CubicMetric::Binomial.su2_rep();
        Ok(Self {
            name: name.into(),
            domain_rep: rep.clone(),
            codomain_rep: rep,
            domain_action: Arc::new(CubicAction),
            codomain_action: Arc::new(CubicAction),
            eval,
            ball: BallRegion::at_origin(4, radius)?,
        })
    }

    pub fn group_dim(&self) -> usize {
        self.domain_action.group_dim()
    }

    fn check_point(&self, x: &CVec) -> Result<()> {
        self.domain_rep.space().check_vector(x)?;
        if !self.ball.contains(&self.domain_rep, x) {
            return Err(Error::Domain(format!(
                "point of norm {:.6} lies outside the ball of radius {}",
                self.domain_rep.space().norm(&(x - &self.ball.center)),
                self.ball.radius
            )));
        }
        Ok(())
    }

    /// `eval` restricted to the ball.
    pub fn eval_checked(&self, x: &CVec) -> Result<CVec> {
        self.check_point(x)?;
        Ok((self.eval)(x))
    }

    /// `exp(i dρ(ξ))` on the domain or codomain.
    fn imaginary_exp(action: &dyn GroupAction, xi: &LieAlgebraElement) -> Result<ComplexMatrix> {
        mat_exp(&action.algebra_matrix(&xi.times_i())?)
    }
}

/// `f_C(g·x) = k·exp(iξ)·f(x)` where `g = k·exp(iξ)`.
pub fn extend_eval(map: &EquivariantMapSample, g: &ComplexMatrix, x: &CVec) -> Result<CVec> {
    let fx = map.eval_checked(x)?;
    let factors = cartan_decompose(g)?;
    let action = map.codomain_action.as_ref();
    let positive = EquivariantMapSample::imaginary_exp(action, &factors.xi)?;
    let k = action.group_matrix(&factors.k)?;
    k.apply(&positive.apply(&fx)?)
}

/// `‖f(exp(iξ)x) − exp(iξ)f(x)‖` with both `x` and `exp(iξ)x` in the ball.
pub fn well_definedness_residual(
    map: &EquivariantMapSample,
    x: &CVec,
    xi: &LieAlgebraElement,
) -> Result<f64> {
    map.check_point(x)?;
    let moved = EquivariantMapSample::imaginary_exp(map.domain_action.as_ref(), xi)?.apply(x)?;
    if !map.ball.contains(&map.domain_rep, &moved) {
        return Err(Error::Precondition("exp(iξ)·x leaves the ball".into()));
    }
    let lhs = (map.eval)(&moved);
    let rhs = EquivariantMapSample::imaginary_exp(map.codomain_action.as_ref(), xi)?.apply(&(map.eval)(x))?;
    Ok(map.codomain_rep.space().norm(&(lhs - rhs)))
}

/// `‖f(k·x) − k·f(x)‖` for a compact-group element `k`.
pub fn equivariance_residual(map: &EquivariantMapSample, k: &ComplexMatrix, x: &CVec) -> Result<f64> {
    let kx = map.domain_action.group_matrix(k)?.apply(x)?;
    let lhs = (map.eval)(&kx);
    let rhs = map.codomain_action.group_matrix(k)?.apply(&(map.eval)(x))?;
    Ok(map.codomain_rep.space().norm(&(lhs - rhs)))
}

/// Step used for the Cauchy–Riemann check.
pub const HOLOMORPHY_STEP: f64 = 1e-5;
/// Residual above which a map is reported as not holomorphic.
pub const HOLOMORPHY_TOL: f64 = 1e-4;

/// `‖df(i w) − i df(w)‖` by central differences of step `h`.
pub fn holomorphy_residual(map: &EquivariantMapSample, x: &CVec, w: &CVec, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {h}")));
    }
    map.domain_rep.space().check_vector(w)?;
    let f = &map.eval;
    let derivative = |dir: &CVec| (f(&(x + dir * c(h, 0.0))) - f(&(x - dir * c(h, 0.0)))) / c(2.0 * h, 0.0);
    let along_iw = derivative(&(w * I));
    let along_w = derivative(w);
    Ok((along_iw - along_w * I).iter().map(|z| z.norm()).fold(0.0, f64::max))
}
