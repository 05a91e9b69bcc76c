use std::fs;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use kahlerkit::cubics::{
    a_eps, act, classify_type, compute_stabilizer, element_order, factorize, non_injectivity_demo,
    tangent_complement, BinaryCubic, CubicMetric,
};
use kahlerkit::extend::{
    equivariance_residual, extend_eval, holomorphy_residual, EquivariantMapSample, InvariantScaleSpec,
    HOLOMORPHY_TOL,
};
use kahlerkit::flow::{
    angle_identity_relative, orbital_convexity_check, phi_monotonicity_check, BallRegion, ConvexityOptions,
    MonotonicityOptions, Trajectory, Verdict,
};
use kahlerkit::glue::{
    certify_glue_with, find_lambda_threshold, glue_points_csv, glued_potential, CutoffProfile, GlueOptions,
    KahlerPotential, RadialPotential, RadialProfile,
};
use kahlerkit::linalg::{cartan_decompose, unitarity_defect};
use kahlerkit::moment::LinearRep;
use kahlerkit::{c, sampling, CVec, ComplexMatrix};
use serde::Serialize;
use serde_json::json;

use crate::config::{OutputFormat, RunConfig};
use crate::input;

/// Rendered output plus the verdict that decides the exit code.
pub struct Report {
    pub body: String,
    pub pass: bool,
}

impl Report {
    pub fn json(value: &impl Serialize, pass: bool) -> Result<Self> {
        Ok(Self { body: serde_json::to_string_pretty(value)? + "\n", pass })
    }

    fn csv(body: String, pass: bool) -> Self {
        Self { body, pass }
    }
}

fn pairs(v: &CVec) -> Vec<[f64; 2]> {
    kahlerkit::linalg::cvec_serde::to_pairs(v)
}

pub fn cartan(cfg: &RunConfig, matrix: &str) -> Result<Report> {
    let g = input::matrix("--matrix", matrix)?;
    let f = cartan_decompose(&g)?;
    let reconstruction = (&f.reconstruct() - &g).max_norm() / g.max_norm();
    let unitarity = unitarity_defect(&f.k);
    let pass = reconstruction <= cfg.tol && unitarity <= cfg.tol;
    Report::json(
        &json!({
            "k": f.k,
            "xi": f.xi.matrix(),
            "condition": f.condition,
            "reconstruction_error": reconstruction,
            "unitarity_defect": unitarity,
            "pass": pass,
        }),
        pass,
    )
}

/// Named representation or JSON `{dim, weights, lie_basis}`.
pub fn representation(raw: &str) -> Result<LinearRep> {
    if let Some(n) = raw.strip_prefix("unitary:") {
        let n: usize = n.parse().with_context(|| format!("--rep: bad dimension in {raw}"))?;
        if n == 0 {
            bail!("--rep: dimension must be positive");
        }
        return Ok(LinearRep::unitary(n));
    }
    Ok(match raw {
        "circle" => LinearRep::circle(),
        "su2" => LinearRep::su2_defining(),
        "cubics" | "cubics-binomial" => CubicMetric::Binomial.su2_rep(),
        "cubics-monomial" => CubicMetric::Monomial.su2_rep(),
        _ => input::parse("--rep", raw)?,
    })
}

fn generator(rep: &LinearRep, xi: &str) -> Result<ComplexMatrix> {
    let coeffs: Vec<f64> = input::parse("--xi", xi)?;
    Ok(rep.element(&coeffs)?)
}

fn point(rep: &LinearRep, raw: &str) -> Result<CVec> {
    let v = input::vector("--point", raw)?;
    rep.space().check_vector(&v)?;
    Ok(v)
}

pub fn moment(cfg: &RunConfig, rep: &str, pt: &str) -> Result<Report> {
    let rep = representation(rep)?;
    let v = point(&rep, pt)?;
    let value = rep.momentum_map(&v)?;
    if cfg.output_format == OutputFormat::Csv {
        let mut out = String::from("index,value\n");
        for (k, x) in value.components.iter().enumerate() {
            out.push_str(&format!("{k},{x:.17e}\n"));
        }
        return Ok(Report::csv(out, true));
    }
    let angle: Vec<f64> = rep
        .lie_basis()
        .iter()
        .map(|a| angle_identity_relative(&rep, a, &v))
        .collect::<kahlerkit::Result<_>>()?;
    Report::json(
        &json!({
            "components": value.components,
            "norm": value.components.iter().map(|x| x * x).sum::<f64>().sqrt(),
            "unitarity_residual": rep.unitarity_residual(),
            "angle_identity_residuals": angle,
        }),
        true,
    )
}

pub struct FlowArgs<'a> {
    pub rep: &'a str,
    pub xi: &'a str,
    pub point: &'a str,
    pub tmin: f64,
    pub tmax: f64,
    pub samples: usize,
}

pub fn flow_trace(cfg: &RunConfig, a: &FlowArgs) -> Result<Report> {
    let rep = representation(a.rep)?;
    let xi = generator(&rep, a.xi)?;
    let v = point(&rep, a.point)?;
    let traj = Trajectory::uniform(&rep, &xi, &v, a.tmin, a.tmax, a.samples)?;
    match cfg.output_format {
        OutputFormat::Csv => Ok(Report::csv(traj.to_csv(), true)),
        OutputFormat::Json => Report::json(&json!({ "samples": traj.samples() }), true),
    }
}

pub fn flow_monotonicity(cfg: &RunConfig, a: &FlowArgs) -> Result<Report> {
    let rep = representation(a.rep)?;
    let xi = generator(&rep, a.xi)?;
    let v = point(&rep, a.point)?;
    let traj = Trajectory::uniform(&rep, &xi, &v, a.tmin, a.tmax, a.samples)?;
    let report = phi_monotonicity_check(&traj, MonotonicityOptions::default())?;
    let pass = report.passes(cfg.tol, 1e-5);
    Report::json(&json!({ "report": report, "pass": pass }), pass)
}

pub fn convexity(a: &FlowArgs, radius: f64, center: Option<&str>) -> Result<Report> {
    let rep = representation(a.rep)?;
    let xi = generator(&rep, a.xi)?;
    let v = point(&rep, a.point)?;
    let ball = match center {
        Some(raw) => BallRegion::new(point(&rep, raw)?, radius)?,
        None => BallRegion::at_origin(rep.dim(), radius)?,
    };
    let opts = ConvexityOptions { window: (a.tmin, a.tmax), n_samples: a.samples, ..Default::default() };
    let cert = orbital_convexity_check(&rep, &xi, &v, &ball, opts)?;
    let pass = cert.verdict != Verdict::Violation;
    Report::json(&cert, pass)
}

fn equivariant_map(name: &str, radius: f64, dim: Option<usize>) -> Result<EquivariantMapSample> {
    Ok(match (name, dim) {
        ("identity", Some(n)) => EquivariantMapSample::identity(n, radius)?,
        ("identity", None) => EquivariantMapSample::cubic_identity(radius)?,
        ("discriminant-scale", _) => EquivariantMapSample::discriminant_scale(radius)?,
        (raw, _) => {
            let spec: InvariantScaleSpec = input::parse("--map", raw)?;
            EquivariantMapSample::from_spec(&spec, radius)?
        }
    })
}

pub fn extend(cfg: &RunConfig, map: &str, g: &str, pt: &str, radius: f64, dim: Option<usize>) -> Result<Report> {
    let map = equivariant_map(map, radius, dim)?;
    let g = input::matrix("--g", g)?;
    let x = point(&map.domain_rep, pt)?;
    let value = extend_eval(&map, &g, &x)?;

    let mut rng = sampling::rng(cfg.seed);
    let n = map.group_dim();
    let k = sampling::unitary(&mut rng, n);
    // determinant one, since invariants such as the discriminant see det(k)
    let k = k.scale(k.determinant()?.powf(-1.0 / n as f64));
    let kg = &k * &g;
    let moved = map.codomain_action.group_matrix(&k)?.apply(&value)?;
    let cocycle = (extend_eval(&map, &kg, &x)? - moved).camax();
    let equivariance = equivariance_residual(&map, &k, &x)?;
    let w = sampling::vector(&mut rng, map.domain_rep.dim());
    let holomorphy = holomorphy_residual(&map, &x, &w, cfg.fd_step)?;
    let scale = 1.0 + value.camax();
    let pass = cocycle <= cfg.tol * scale && equivariance <= cfg.tol * scale && holomorphy <= HOLOMORPHY_TOL;
    Report::json(
        &json!({
            "map": map.name,
            "value": pairs(&value),
            "cocycle_residual": cocycle,
            "equivariance_residual": equivariance,
            "holomorphy_residual": holomorphy,
            "pass": pass,
        }),
        pass,
    )
}

pub fn potential(name: &str, dim: usize) -> Result<RadialPotential> {
    if dim == 0 {
        bail!("--dim must be positive");
    }
    Ok(match name {
        "flat" => RadialPotential::flat(dim),
        "fs" => RadialPotential::fubini_study(dim),
        raw => {
            let profile: RadialProfile = input::parse("--potential", raw)?;
            RadialPotential::new(dim, profile)?
        }
    })
}

pub fn cutoff(name: &str) -> Result<CutoffProfile> {
    match name {
        "c2" => Ok(CutoffProfile::c2()),
        "bump" => Ok(CutoffProfile::bump()),
        other => bail!("--cutoff must be c2 or bump, got {other}"),
    }
}

pub struct GlueArgs<'a> {
    pub potential: &'a str,
    pub dim: usize,
    pub cutoff: &'a str,
    pub grid: usize,
}

pub fn glue_verify(cfg: &RunConfig, a: &GlueArgs, lambda: f64, eps: f64, points_csv: Option<&str>) -> Result<Report> {
    if !(eps > 0.0) {
        bail!("--eps must be positive");
    }
    let u: Arc<dyn KahlerPotential> = Arc::new(potential(a.potential, a.dim)?);
    let opts = GlueOptions { grid: a.grid, fd_step: cfg.fd_step, collect_points: points_csv.is_some() };
    let (report, points) = certify_glue_with(u, cutoff(a.cutoff)?, lambda, opts)?;
    if let Some(path) = points_csv {
        fs::write(path, glue_points_csv(&points, a.dim)).with_context(|| format!("cannot write {path}"))?;
    }
    let pass = report.admissible(eps);
    Report::json(&json!({ "report": report, "eps": eps, "admissible": pass }), pass)
}

pub fn glue_threshold(a: &GlueArgs, eps: f64, range: (f64, f64), iterations: usize) -> Result<Report> {
    let u: Arc<dyn KahlerPotential> = Arc::new(potential(a.potential, a.dim)?);
    // the glued potential must exist at the bottom of the range
    glued_potential(u.clone(), cutoff(a.cutoff)?, range.0)?;
    let report = find_lambda_threshold(u, cutoff(a.cutoff)?, eps, range, a.grid, iterations)?;
    let pass = report.lambda.is_some();
    Report::json(&report, pass)
}

pub fn cubics_classify(form: &str) -> Result<Report> {
    let f = input::cubic("--form", form)?;
    let class = classify_type(&f)?;
    let roots = if f.is_zero() { None } else { Some(factorize(&f)?) };
    Report::json(
        &json!({
            "form": f,
            "factor_type": class.factor_type,
            "borderline": class.borderline,
            "roots": roots,
        }),
        true,
    )
}

pub fn cubics_stabilizer(form: &str) -> Result<Report> {
    let f = input::cubic("--form", form)?;
    Report::json(&compute_stabilizer(&f)?, true)
}

pub fn cubics_aeps(cfg: &RunConfig, eps: &str) -> Result<Report> {
    let eps = input::scalar("--eps", eps)?;
    let a = a_eps(eps)?;
    let det = a.determinant()?;
    let scale = a.max_norm().powi(3);
    let order = element_order(&a, 12, cfg.tol * scale);
    let m = BinaryCubic::m_eps(eps);
    let fixing = act(&a, &m)?.distance(&m) / m.max_abs();
    let x2y = act(&a, &BinaryCubic::x2y())?;
    let pass = (det - c(1.0, 0.0)).norm() <= cfg.tol * scale && order == Some(3) && fixing <= cfg.tol * scale;
    Report::json(
        &json!({
            "eps": [eps.re, eps.im],
            "matrix": a,
            "det": [det.re, det.im],
            "order": order,
            "image_of_x2y": x2y,
            "m_eps": m,
            "fixing_residual": fixing,
            "pass": pass,
        }),
        pass,
    )
}

pub fn cubics_slice_demo(cfg: &RunConfig, eps: &str) -> Result<Report> {
    let eps = input::scalar("--eps", eps)?;
    let r = non_injectivity_demo(eps)?;
    let pass = r.image_distance <= cfg.tol * (1.0 + r.first_image.max_abs()) && r.bundle_distance > cfg.tol;
    Report::json(&json!({ "report": r, "pass": pass }), pass)
}

pub fn cubics_complement(form: &str, metric: CubicMetric) -> Result<Report> {
    let f = input::cubic("--form", form)?;
    Report::json(&tangent_complement(&f, &metric.space())?, true)
}
