//! Seeded end-to-end battery over every module.

use std::sync::Arc;

use anyhow::Result;
use kahlerkit::cubics::{
    a_eps, act, act_left, classify_type, compute_stabilizer, non_injectivity_demo, BinaryCubic, CubicMetric,
    FactorType, StabilizerKind,
};
use kahlerkit::extend::{extend_eval, EquivariantMapSample};
use kahlerkit::flow::{
    angle_identity_relative, orbital_convexity_check, phi_monotonicity_check, uniform_grid, BallRegion,
    ConvexityOptions, CrossingKind, MonotonicityOptions, Trajectory, Verdict,
};
use kahlerkit::glue::{
    certify_glue, glued_potential, hessian_at, match_momentum_constant, momentum_by_path, segment, CutoffProfile,
    KahlerPotential, RadialPotential,
};
use kahlerkit::linalg::{cartan_decompose, unitarity_defect};
use kahlerkit::moment::LinearRep;
use kahlerkit::sampling;
use kahlerkit::{c, CVec, ComplexMatrix, LieAlgebraElement};
use rand::Rng;
use serde::Serialize;

#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Multiplies the number of random configurations per check.
    pub scale: f64,
    pub glue_grid: usize,
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub cases: usize,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.failed == 0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,name,pass,cases,detail\n");
        for ch in &self.checks {
            out.push_str(&format!("{},{},{},{},\"{}\"\n", ch.id, ch.name, ch.pass, ch.cases, ch.detail.replace('"', "'")));
        }
        out
    }
}

struct Ctx {
    opts: SuiteOptions,
}

impl Ctx {
    fn rng(&self, id: u64) -> impl Rng {
        sampling::rng(self.opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(id))
    }

    fn cases(&self, base: usize) -> usize {
        ((base as f64 * self.opts.scale).round() as usize).max(1)
    }
}

const EPS_SET: [f64; 3] = [1.0, 0.5, 0.3];

fn max_diff(a: &[kahlerkit::C64], b: &[kahlerkit::C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn check(id: usize, name: &'static str, pass: bool, cases: usize, detail: String) -> Check {
    Check { id, name, pass, cases, detail }
}

fn aeps_values() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for eps in EPS_SET {
        let image = act(&a_eps(c(eps, 0.0))?, &BinaryCubic::x2y())?;
        let expected = [-1.0 / (8.0 * eps), 5.0 / 8.0, -3.0 * eps / 8.0, -9.0 * eps * eps / 8.0].map(|x| c(x, 0.0));
        worst = worst.max(max_diff(&image.coeffs(), &expected));
    }
    Ok(check(1, "aeps-image", worst <= 1e-12, EPS_SET.len(), format!("max error {worst:.2e}")))
}

fn aeps_identities() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for eps in EPS_SET {
        let a = a_eps(c(eps, 0.0))?;
        worst = worst.max((a.determinant()? - c(1.0, 0.0)).norm());
        worst = worst.max((&(&(&a * &a) * &a) - &ComplexMatrix::identity(2)).max_norm());
        let m = BinaryCubic::m_eps(c(eps, 0.0));
        worst = worst.max(act(&a, &m)?.distance(&m));
    }
    Ok(check(2, "aeps-identities", worst <= 1e-12, EPS_SET.len(), format!("max residual {worst:.2e}")))
}

fn stabilizer_table() -> Result<Check> {
    let s1 = compute_stabilizer(&BinaryCubic::three_factor_example())?;
    let s2 = compute_stabilizer(&BinaryCubic::x2y())?;
    let s3 = compute_stabilizer(&BinaryCubic::y3())?;
    let s4 = compute_stabilizer(&BinaryCubic::zero())?;
    let rows = [
        s1.factor_type == FactorType::I && s1.order == Some(3),
        s2.factor_type == FactorType::II && s2.order == Some(1),
        s3.factor_type == FactorType::III && s3.dimension == Some(1) && s3.components == Some(3),
        s4.factor_type == FactorType::IV && s4.kind == StabilizerKind::FullGroup,
    ];
    let borderline = [&s1, &s2, &s3].iter().any(|s| s.borderline);
    Ok(check(3, "stabilizer-table", rows.iter().all(|&r| r) && !borderline, 4, format!("rows {rows:?}")))
}

fn slice_demo() -> Result<Check> {
    let r = non_injectivity_demo(c(0.5, 0.0))?;
    let pass = r.image_distance <= 1e-12 && r.bundle_distance >= 1.0;
    Ok(check(
        4,
        "slice-non-injectivity",
        pass,
        1,
        format!("image distance {:.2e}, bundle distance {:.3}", r.image_distance, r.bundle_distance),
    ))
}

fn random_rep(rng: &mut impl Rng) -> Result<LinearRep> {
    Ok(match rng.gen_range(0..6) {
        0 => CubicMetric::Binomial.su2_rep(),
        1 => CubicMetric::Monomial.su2_rep(),
        k => {
            let basis = rng.gen_range(1..4);
            sampling::weighted_rep(rng, k - 1, basis)?
        }
    })
}

fn angle_identity(ctx: &Ctx) -> Result<Check> {
    let mut rng = ctx.rng(5);
    let n = ctx.cases(1000);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let rep = random_rep(&mut rng)?;
        let a = sampling::generator(&mut rng, &rep)?;
        let v = sampling::vector(&mut rng, rep.dim()) * c(rng.gen_range(0.1..3.0), 0.0);
        worst = worst.max(angle_identity_relative(&rep, &a, &v)?);
    }
    Ok(check(5, "angle-identity", worst <= 1e-10, n, format!("max relative residual {worst:.2e}")))
}

fn gradient_identity(ctx: &Ctx) -> Result<Check> {
    let mut rng = ctx.rng(6);
    let n = ctx.cases(500);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let rep = loop {
            let r = random_rep(&mut rng)?;
            if r.unitarity_residual() < 1e-10 {
                break r;
            }
        };
        let a = sampling::generator(&mut rng, &rep)?;
        let v = sampling::vector(&mut rng, rep.dim());
        let grad = rep.momentum_gradient(&a, &v)?;
        let weights = rep.space().weights();
        let mut fd = CVec::zeros(rep.dim());
        for j in 0..rep.dim() {
            for imaginary in [false, true] {
                let dir = if imaginary { c(0.0, h) } else { c(h, 0.0) };
                let (mut plus, mut minus) = (v.clone(), v.clone());
                plus[j] += dir;
                minus[j] -= dir;
                let d = (rep.momentum_component(&a, &plus)? - rep.momentum_component(&a, &minus)?) / (2.0 * h);
                if imaginary {
                    fd[j].im = d / weights[j];
                } else {
                    fd[j].re = d / weights[j];
                }
            }
        }
        if grad.norm() > 1e-8 {
            worst = worst.max((&fd - &grad).norm() / grad.norm());
        }
    }
    Ok(check(6, "gradient-identity", worst <= 1e-5, n, format!("max relative error {worst:.2e}")))
}

fn orbital_convexity(ctx: &Ctx) -> Result<Check> {
    let mut rng = ctx.rng(7);
    let n = ctx.cases(200);
    let (mut violations, mut sign_failures, mut crossings) = (0, 0, 0);
    for _ in 0..n {
        let dim = rng.gen_range(1..5);
        let rep = sampling::weighted_rep(&mut rng, dim, 2)?;
        let a = sampling::generator(&mut rng, &rep)?;
        let v0 = sampling::vector(&mut rng, dim) * c(rng.gen_range(0.2..2.0), 0.0);
        let ball = BallRegion::at_origin(dim, rng.gen_range(0.3..2.0))?;
        let cert = orbital_convexity_check(&rep, &a, &v0, &ball, ConvexityOptions::default())?;
        if cert.verdict == Verdict::Violation {
            violations += 1;
        }
        for x in &cert.crossings {
            crossings += 1;
            let ok = match x.kind {
                CrossingKind::Entry => x.phi <= 1e-8,
                CrossingKind::Exit => x.phi >= -1e-8,
            };
            if !ok {
                sign_failures += 1;
            }
        }
    }
    Ok(check(
        7,
        "orbital-convexity",
        violations == 0 && sign_failures == 0,
        n,
        format!("{violations} violations, {sign_failures} sign failures, {crossings} crossings"),
    ))
}

fn monotonicity(ctx: &Ctx) -> Result<Check> {
    let mut rng = ctx.rng(8);
    let n = ctx.cases(100);
    let times = uniform_grid(-2.0, 2.0, 401)?;
    let mut pass = true;
    let (mut drop, mut mismatch): (f64, f64) = (f64::NEG_INFINITY, 0.0);
    for _ in 0..n {
        let dim = rng.gen_range(1..5);
        let rep = sampling::weighted_rep(&mut rng, dim, 2)?;
        let a = sampling::generator(&mut rng, &rep)?;
        let v0 = sampling::vector(&mut rng, dim);
        let r = phi_monotonicity_check(&Trajectory::sample(&rep, &a, &v0, &times)?, MonotonicityOptions::default())?;
        pass &= r.passes(1e-12, 1e-5);
        drop = drop.max(r.max_decrease);
        mismatch = mismatch.max(r.max_derivative_mismatch);
    }
    Ok(check(8, "monotonicity", pass, n, format!("max drop {drop:.2e}, derivative mismatch {mismatch:.2e}")))
}

fn extension(ctx: &Ctx) -> Result<Check> {
    let mut rng = ctx.rng(9);
    let n = ctx.cases(200);
    let map = EquivariantMapSample::discriminant_scale(0.3 + 1e-12)?;
    let metric = CubicMetric::Binomial.space();
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let xi_norm = rng.gen_range(0.0..1.0);
        let (g, _) = sampling::special_linear_2(&mut rng, xi_norm);
        let raw = sampling::vector(&mut rng, 4);
        let x = &raw * c(rng.gen_range(0.0..0.3) / metric.norm(&raw), 0.0);
        let moved = act_left(&g, &BinaryCubic::from_cvec(&x)?)?;
        let global = moved.to_cvec() * (c(1.0, 0.0) + moved.discriminant());
        worst = worst.max((extend_eval(&map, &g, &x)? - global).camax());
    }
    Ok(check(9, "extension", worst <= 1e-8, n, format!("max residual {worst:.2e}")))
}

fn glue(ctx: &Ctx) -> Result<Check> {
    let mut pass = true;
    let mut detail = Vec::new();
    for dim in [1, 2] {
        let fs: Arc<dyn KahlerPotential> = Arc::new(RadialPotential::fubini_study(dim));
        let mut sups = Vec::new();
        for lambda in [0.2, 0.1, 0.05] {
            let r = certify_glue(fs.clone(), CutoffProfile::c2(), lambda, ctx.opts.glue_grid)?;
            sups.push(r.sup_f_ab);
            if lambda == 0.1 {
                pass &= r.flat_region_residual <= 1e-6
                    && r.outer_region_residual <= 1e-12
                    && r.positive_definite
                    && !r.inconclusive;
                detail.push(format!("C^{dim} min eig {:.4}", r.min_eigenvalue));
            }
        }
        pass &= sups.windows(2).all(|w| w[1] < w[0]);
    }
    Ok(check(10, "glue-certificate", pass, 6, detail.join(", ")))
}

fn momentum_matching(ctx: &Ctx) -> Result<Check> {
    let mut rng = ctx.rng(11);
    let n = ctx.cases(10);
    let lambda = 0.1;
    let (mut flat, mut path, mut spread): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for dim in [1, 2] {
        let fs: Arc<dyn KahlerPotential> = Arc::new(RadialPotential::fubini_study(dim));
        let glued = glued_potential(fs, CutoffProfile::c2(), lambda)?;
        for _ in 0..n {
            let xi = LieAlgebraElement::new(sampling::anti_hermitian(&mut rng, dim, 1.0), 1e-12)?;
            let dir = sampling::vector(&mut rng, dim);
            let unit = &dir * c(1.0 / dir.norm(), 0.0);
            let x = &unit * c(lambda * rng.gen_range(0.1..0.99), 0.0);
            let h = |p: &CVec| hessian_at(&glued, p, 1e-5);
            let inside = |p: &CVec| p.norm_squared() < lambda * lambda;
            let integrated = momentum_by_path(&h, &xi, &segment(&CVec::zeros(dim), &x, 4), 0.0, &inside)?;
            let quadratic = 0.5 * xi.matrix().apply(&x)?.dotc(&x).im;
            flat = flat.max((integrated - quadratic).abs());
            let y = &unit * c(lambda * rng.gen_range(2.05f64..2.95).sqrt(), 0.0);
            let m = match_momentum_constant(&glued, &xi, &y, 1e-5)?;
            path = path.max(m.path_agreement);
            spread = spread.max(m.c_agreement);
        }
    }
    Ok(check(
        11,
        "momentum-matching",
        flat <= 1e-6 && path <= 1e-6 && spread <= 1e-6,
        2 * n,
        format!("flat {flat:.2e}, path {path:.2e}, constant {spread:.2e}"),
    ))
}

fn cartan_round_trip(ctx: &Ctx) -> Result<Check> {
    let mut rng = ctx.rng(12);
    let n = ctx.cases(500);
    let (mut recon, mut unit): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        let g = sampling::well_conditioned(&mut rng, if i % 2 == 0 { 2 } else { 4 }, 100.0);
        let f = cartan_decompose(&g)?;
        recon = recon.max((&f.reconstruct() - &g).max_norm() / g.max_norm());
        unit = unit.max(unitarity_defect(&f.k));
    }
    Ok(check(
        12,
        "cartan-round-trip",
        recon <= 1e-10 && unit <= 1e-10,
        n,
        format!("reconstruction {recon:.2e}, unitarity {unit:.2e}"),
    ))
}

fn type_invariance(ctx: &Ctx) -> Result<Check> {
    let mut rng = ctx.rng(13);
    let n = ctx.cases(100);
    let mut wrong = 0;
    for _ in 0..n {
        let g = sampling::well_conditioned(&mut rng, 2, 20.0);
        for (f, t) in [
            (BinaryCubic::three_factor_example(), FactorType::I),
            (BinaryCubic::x2y(), FactorType::II),
            (BinaryCubic::y3(), FactorType::III),
        ] {
            if classify_type(&act(&g, &f)?)?.factor_type != t {
                wrong += 1;
            }
        }
    }
    Ok(check(13, "type-invariance", wrong == 0, 3 * n, format!("{wrong} misclassified")))
}

pub fn run(opts: SuiteOptions) -> Result<SuiteReport> {
    let ctx = Ctx { opts };
    let checks = vec![
        aeps_values()?,
        aeps_identities()?,
        stabilizer_table()?,
        slice_demo()?,
        angle_identity(&ctx)?,
        gradient_identity(&ctx)?,
        orbital_convexity(&ctx)?,
        monotonicity(&ctx)?,
        extension(&ctx)?,
        glue(&ctx)?,
        momentum_matching(&ctx)?,
        cartan_round_trip(&ctx)?,
        type_invariance(&ctx)?,
    ];
    let passed = checks.iter().filter(|ch| ch.pass).count();
    Ok(SuiteReport { seed: opts.seed, passed, failed: checks.len() - passed, checks })
}
