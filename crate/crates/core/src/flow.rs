//! Gradient trajectories `δ(t) = exp(i t A) v₀` of momentum components and
//! sampled orbital-convexity certificates for metric balls.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, mat_exp, ComplexMatrix, CVec, I};
use crate::moment::LinearRep;

/// `exp(i t A) v₀`.
pub fn flow_point(rep: &LinearRep, a: &ComplexMatrix, v0: &CVec, t: f64) -> Result<CVec> {
    rep.space().check_matrix(a)?;
    rep.space().check_vector(v0)?;
    if !t.is_finite() {
        return Err(Error::Invalid(format!("flow time must be finite, got {t}")));
    }
    mat_exp(&a.scale(c(0.0, t)))?.apply(v0)
}

/// `|⟨grad R²(v), grad Φ^A(v)⟩ − 4 Φ^A(v)|` with `grad R² = 2v` in the flat metric.
pub fn angle_identity_residual(rep: &LinearRep, a: &ComplexMatrix, v: &CVec) -> Result<f64> {
    let (lhs, rhs) = angle_identity_sides(rep, a, v)?;
    Ok((lhs - rhs).abs())
}

/// The residual divided by `2‖v‖·‖grad Φ‖`, the Cauchy–Schwarz bound on the left side.
pub fn angle_identity_relative(rep: &LinearRep, a: &ComplexMatrix, v: &CVec) -> Result<f64> {
    let (lhs, rhs) = angle_identity_sides(rep, a, v)?;
    let grad = rep.momentum_gradient(a, v)?;
    let scale = 2.0 * rep.space().norm(v) * rep.space().norm(&grad);
    if scale == 0.0 {
        return Ok((lhs - rhs).abs());
    }
    Ok((lhs - rhs).abs() / scale)
}

fn angle_identity_sides(rep: &LinearRep, a: &ComplexMatrix, v: &CVec) -> Result<(f64, f64)> {
    let grad_r2 = v * c(2.0, 0.0);
    let grad_phi = rep.momentum_gradient(a, v)?;
    let lhs = rep.space().real_inner(&grad_r2, &grad_phi);
    let rhs = 4.0 * rep.momentum_component(a, v)?;
    Ok((lhs, rhs))
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    #[serde(with = "crate::linalg::cvec_serde")]
    pub point: CVec,
    pub phi: f64,
    pub radius2: f64,
}

/// Sampled gradient trajectory of `Φ^A` through `v₀`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    rep: LinearRep,
    a: ComplexMatrix,
    v0: CVec,
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn sample(rep: &LinearRep, a: &ComplexMatrix, v0: &CVec, times: &[f64]) -> Result<Self> {
        let samples = times
            .iter()
            .map(|&t| {
                let point = flow_point(rep, a, v0, t)?;
                let phi = rep.momentum_component(a, &point)?;
                let radius2 = rep.space().norm_sq(&point);
                Ok(TrajectorySample { t, point, phi, radius2 })
            })
            .collect::<Result<_>>()?;
        Ok(Self { rep: rep.clone(), a: a.clone(), v0: v0.clone(), samples })
    }

    /// `n` equally spaced samples on `[tmin, tmax]`.
    pub fn uniform(
        rep: &LinearRep,
        a: &ComplexMatrix,
        v0: &CVec,
        tmin: f64,
        tmax: f64,
        n: usize,
    ) -> Result<Self> {
        Self::sample(rep, a, v0, &uniform_grid(tmin, tmax, n)?)
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn rep(&self) -> &LinearRep {
        &self.rep
    }

    pub fn generator(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn v0(&self) -> &CVec {
        &self.v0
    }

    /// CSV with header `t,re0,im0,...,phi,radius2`.
    pub fn to_csv(&self) -> String {
        let n = self.v0.len();
        let mut out = String::from("t");
        for j in 0..n {
            out.push_str(&format!(",re{j},im{j}"));
        }
        out.push_str(",phi,radius2\n");
        for s in &self.samples {
            out.push_str(&format!("{:.17e}", s.t));
            for z in s.point.iter() {
                out.push_str(&format!(",{:.17e},{:.17e}", z.re, z.im));
            }
            out.push_str(&format!(",{:.17e},{:.17e}\n", s.phi, s.radius2));
        }
        out
    }
}

pub fn uniform_grid(tmin: f64, tmax: f64, n: usize) -> Result<Vec<f64>> {
    if !(tmin.is_finite() && tmax.is_finite() && tmin < tmax) {
        return Err(Error::Invalid(format!("bad time window [{tmin}, {tmax}]")));
    }
    if n < 2 {
        return Err(Error::Invalid("need at least two samples".into()));
    }
    let step = (tmax - tmin) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { tmax } else { tmin + step * i as f64 }).collect())
}

#[derive(Clone, Copy, Debug)]
pub struct MonotonicityOptions {
    /// Samples farther apart than this make the report inconclusive.
    pub max_step: f64,
    /// Base step of the five-point derivative stencil, divided by `max(1, ‖A‖)`.
    pub fd_step: f64,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        Self { max_step: 0.05, fd_step: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub conclusive: bool,
    /// Largest relative drop `(Φᵢ − Φᵢ₊₁) / max(1, |Φᵢ|, |Φᵢ₊₁|)`; ≤ 0 means nondecreasing.
    pub max_decrease: f64,
    /// Largest relative gap between `dΦ/dt` (finite differences) and `‖grad Φ‖²`.
    pub max_derivative_mismatch: f64,
}

impl MonotonicityReport {
    pub fn passes(&self, decrease_tol: f64, derivative_tol: f64) -> bool {
        self.conclusive
            && self.max_decrease <= decrease_tol
            && self.max_derivative_mismatch <= derivative_tol
    }
}

/// Checks that `Φ^A` is nondecreasing along the trajectory and that its time
/// derivative equals `‖grad Φ^A‖²`.
pub fn phi_monotonicity_check(
    traj: &Trajectory,
    opts: MonotonicityOptions,
) -> Result<MonotonicityReport> {
    let samples = traj.samples();
    let conclusive = samples.len() >= 3
        && samples.windows(2).all(|w| w[1].t > w[0].t && w[1].t - w[0].t <= opts.max_step);
    let mut max_decrease = f64::NEG_INFINITY;
    for w in samples.windows(2) {
        let scale = w[0].phi.abs().max(w[1].phi.abs()).max(1.0);
        max_decrease = max_decrease.max((w[0].phi - w[1].phi) / scale);
    }
    if samples.len() < 2 {
        max_decrease = 0.0;
    }

    let rep = traj.rep();
    let a = traj.generator();
    let a_norm = a.max_norm().max(1.0);
    let h = opts.fd_step / a_norm;
    let mut max_mismatch: f64 = 0.0;
    for s in samples {
        let phi_at = |dt: f64| -> Result<f64> {
            let p = flow_point(rep, a, traj.v0(), s.t + dt)?;
            rep.momentum_component(a, &p)
        };
        let deriv =
            (-phi_at(2.0 * h)? + 8.0 * phi_at(h)? - 8.0 * phi_at(-h)? + phi_at(-2.0 * h)?) / (12.0 * h);
        let grad = rep.momentum_gradient(a, &s.point)?;
        let g2 = rep.space().norm_sq(&grad);
        let scale = g2 + 1e-7 * s.phi.abs() * a_norm + f64::MIN_POSITIVE;
        max_mismatch = max_mismatch.max((deriv - g2).abs() / scale);
    }
    Ok(MonotonicityReport {
        samples: samples.len(),
        conclusive,
        max_decrease,
        max_derivative_mismatch: max_mismatch,
    })
}

/// Open ball `{v : ‖v − center‖ < radius}` in the weighted norm.
#[derive(Clone, Debug, Serialize)]
pub struct BallRegion {
    #[serde(with = "crate::linalg::cvec_serde")]
    pub center: CVec,
    pub radius: f64,
}

impl BallRegion {
    pub fn new(center: CVec, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn at_origin(dim: usize, radius: f64) -> Result<Self> {
        Self::new(CVec::zeros(dim), radius)
    }

    pub fn contains(&self, rep: &LinearRep, v: &CVec) -> bool {
        self.signed_gap(rep, v) < 0.0
    }

    /// `‖v − center‖² − radius²`.
    pub fn signed_gap(&self, rep: &LinearRep, v: &CVec) -> f64 {
        rep.space().norm_sq(&(v - &self.center)) - self.radius * self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Convex,
    Violation,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingKind {
    Entry,
    Exit,
}

#[derive(Clone, Debug, Serialize)]
pub struct Crossing {
    pub t: f64,
    pub kind: CrossingKind,
    pub phi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityCertificate {
    pub verdict: Verdict,
    pub crossing_times: Vec<f64>,
    pub crossings: Vec<Crossing>,
    pub entry_phi: Vec<f64>,
    pub exit_phi: Vec<f64>,
    /// Number of maximal runs of samples inside the ball.
    pub visit_components: usize,
    /// `Φ ≤ tol` at every entry and `Φ ≥ −tol` at every exit.
    pub sign_conditions_hold: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct ConvexityOptions {
    pub window: (f64, f64),
    pub n_samples: usize,
    /// Bisection stops once the bracket is shorter than this.
    pub time_tol: f64,
    pub sign_tol: f64,
}

impl Default for ConvexityOptions {
    fn default() -> Self {
        Self { window: (-10.0, 10.0), n_samples: 2000, time_tol: 1e-10, sign_tol: 1e-8 }
    }
}

const MIN_CONVEXITY_SAMPLES: usize = 100;

/// Samples `δ(t)` on the window and certifies whether `{t : δ(t) ∈ ball}` is
/// a single interval.
pub fn orbital_convexity_check(
    rep: &LinearRep,
    a: &ComplexMatrix,
    v0: &CVec,
    ball: &BallRegion,
    opts: ConvexityOptions,
) -> Result<ConvexityCertificate> {
    if opts.n_samples < MIN_CONVEXITY_SAMPLES {
        return Err(Error::Precondition(format!(
            "need at least {MIN_CONVEXITY_SAMPLES} samples, got {}",
            opts.n_samples
        )));
    }
    rep.space().check_vector(&ball.center)?;
    let times = uniform_grid(opts.window.0, opts.window.1, opts.n_samples)?;
    let gap_at = |t: f64| -> Result<f64> { Ok(ball.signed_gap(rep, &flow_point(rep, a, v0, t)?)) };
    // d/dt ‖δ − c‖² = 2 Re⟨δ − c, i A δ⟩
    let rate_at = |t: f64| -> Result<f64> {
        let p = flow_point(rep, a, v0, t)?;
        let vel = a.apply(&p)? * I;
        Ok(2.0 * rep.space().real_inner(&(&p - &ball.center), &vel))
    };

    let gaps: Vec<f64> = times.iter().map(|&t| gap_at(t)).collect::<Result<_>>()?;
    let rates: Vec<f64> = times.iter().map(|&t| rate_at(t)).collect::<Result<_>>()?;

    let mut crossings = Vec::new();
    let mut hint = None;
    for i in 0..times.len() - 1 {
        let (t0, t1) = (times[i], times[i + 1]);
        let (in0, in1) = (gaps[i] < 0.0, gaps[i + 1] < 0.0);
        if in0 != in1 {
            let t = bisect(&gap_at, t0, t1, gaps[i], opts.time_tol)?;
            let phi = rep.momentum_component(a, &flow_point(rep, a, v0, t)?)?;
            let kind = if in1 { CrossingKind::Entry } else { CrossingKind::Exit };
            crossings.push(Crossing { t, kind, phi });
        } else if !in0 && rates[i] < 0.0 && rates[i + 1] > 0.0 {
            // distance has a minimum inside the step: it may dip into the ball unseen
            let t_min = bisect(&rate_at, t0, t1, rates[i], opts.time_tol)?;
            if gap_at(t_min)? < 0.0 {
                hint = Some(format!(
                    "two crossings inside the sample step [{t0}, {t1}]; increase n_samples"
                ));
            }
        } else if in0 && rates[i] > 0.0 && rates[i + 1] < 0.0 {
            let t_max = bisect(&rate_at, t0, t1, rates[i], opts.time_tol)?;
            if gap_at(t_max)? >= 0.0 {
                hint = Some(format!(
                    "two crossings inside the sample step [{t0}, {t1}]; increase n_samples"
                ));
            }
        }
    }

    let mut visit_components = 0;
    let mut previous_inside = false;
    for &g in &gaps {
        let inside = g < 0.0;
        if inside && !previous_inside {
            visit_components += 1;
        }
        previous_inside = inside;
    }

    let entry_phi: Vec<f64> = crossings
        .iter()
        .filter(|c| c.kind == CrossingKind::Entry)
        .map(|c| c.phi)
        .collect();
    let exit_phi: Vec<f64> = crossings
        .iter()
        .filter(|c| c.kind == CrossingKind::Exit)
        .map(|c| c.phi)
        .collect();
    let sign_conditions_hold = entry_phi.iter().all(|&p| p <= opts.sign_tol)
        && exit_phi.iter().all(|&p| p >= -opts.sign_tol);
    let verdict = if hint.is_some() {
        Verdict::Inconclusive
    } else if visit_components <= 1 {
        Verdict::Convex
    } else {
        Verdict::Violation
    };
    Ok(ConvexityCertificate {
        verdict,
        crossing_times: crossings.iter().map(|c| c.t).collect(),
        crossings,
        entry_phi,
        exit_phi,
        visit_components,
        sign_conditions_hold,
        hint,
    })
}

/// Root of `f` on `[lo, hi]` given `f(lo)` and a sign change across the bracket.
fn bisect(f: &impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, f_lo: f64, tol: f64) -> Result<f64> {
    let lo_negative = f_lo < 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid)? < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
