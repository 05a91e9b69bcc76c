use kahlerkit::flow::{
    angle_identity_relative, flow_point, orbital_convexity_check, BallRegion, ConvexityOptions, CrossingKind,
    Trajectory, Verdict,
};
use kahlerkit::linalg::I;
use kahlerkit::ode::integrate_linear;
use kahlerkit::sampling;
use kahlerkit::{c, CVec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn differential_is_contraction_of_omega(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = sampling::rng(seed);
        let rep = sampling::weighted_rep(&mut rng, n, 2).unwrap();
        let a = sampling::generator(&mut rng, &rep).unwrap();
        let v = sampling::vector(&mut rng, n);
        let w = sampling::vector(&mut rng, n);
        let h = 1e-5;
        let plus = &v + &w * c(h, 0.0);
        let minus = &v - &w * c(h, 0.0);
        let fd = (rep.momentum_component(&a, &plus).unwrap() - rep.momentum_component(&a, &minus).unwrap()) / (2.0 * h);
        let exact = rep.space().inner(&a.apply(&v).unwrap(), &w).im;
        let scale = rep.space().norm(&a.apply(&v).unwrap()) * rep.space().norm(&w);
        prop_assert!((fd - exact).abs() <= 1e-5 * scale.max(1e-12), "fd {fd} exact {exact}");
    }

    #[test]
    fn momentum_is_linear_in_the_generator(seed in any::<u64>(), n in 1usize..5, s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let mut rng = sampling::rng(seed);
        let rep = sampling::weighted_rep(&mut rng, n, 2).unwrap();
        let (a, b) = (&rep.lie_basis()[0], &rep.lie_basis()[1]);
        let v = sampling::vector(&mut rng, n);
        let combined = &a.scale(c(s, 0.0)) + &b.scale(c(t, 0.0));
        let lhs = rep.momentum_component(&combined, &v).unwrap();
        let rhs = s * rep.momentum_component(a, &v).unwrap() + t * rep.momentum_component(b, &v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()));
    }

    #[test]
    fn gradient_is_i_times_the_vector_field(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = sampling::rng(seed);
        let rep = sampling::weighted_rep(&mut rng, n, 1).unwrap();
        let a = &rep.lie_basis()[0];
        let v = sampling::vector(&mut rng, n);
        let grad = rep.momentum_gradient(a, &v).unwrap();
        let field = a.apply(&v).unwrap() * I;
        prop_assert!((grad - field).camax() <= 1e-12);
    }

    #[test]
    fn momentum_is_quadratic(seed in any::<u64>(), n in 1usize..5, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let mut rng = sampling::rng(seed);
        let rep = sampling::weighted_rep(&mut rng, n, 1).unwrap();
        let a = &rep.lie_basis()[0];
        let v = sampling::vector(&mut rng, n);
        let z = c(re, im);
        let lhs = rep.momentum_component(a, &(&v * z)).unwrap();
        let rhs = z.norm_sqr() * rep.momentum_component(a, &v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn momentum_is_equivariant(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = sampling::rng(seed);
        let rep = sampling::weighted_rep(&mut rng, n, 2).unwrap();
        let a = sampling::generator(&mut rng, &rep).unwrap();
        // exp of a rep generator is unitary for the weighted product
        let k = kahlerkit::linalg::mat_exp(&a).unwrap();
        let v = sampling::vector(&mut rng, n);
        prop_assert!(rep.equivariance_residual(&k, &v).unwrap() <= 1e-10);
    }

    #[test]
    fn flow_group_law(seed in any::<u64>(), n in 1usize..5, t in -2.0f64..2.0, s in -2.0f64..2.0) {
        let mut rng = sampling::rng(seed);
        let rep = sampling::weighted_rep(&mut rng, n, 2).unwrap();
        let a = sampling::generator(&mut rng, &rep).unwrap();
        let v = sampling::vector(&mut rng, n);
        let direct = flow_point(&rep, &a, &v, t + s).unwrap();
        let twice = flow_point(&rep, &a, &flow_point(&rep, &a, &v, s).unwrap(), t).unwrap();
        prop_assert!((&direct - &twice).camax() <= 1e-10 * (1.0 + direct.camax()));
    }

    #[test]
    fn closed_form_matches_runge_kutta(seed in any::<u64>(), n in 1usize..4, t in -5.0f64..5.0) {
        let mut rng = sampling::rng(seed);
        let rep = sampling::weighted_rep(&mut rng, n, 1).unwrap();
        let a = &rep.lie_basis()[0];
        let a = a.scale(c(0.5 / a.frobenius_norm(), 0.0));
        let v = sampling::vector(&mut rng, n);
        let closed = flow_point(&rep, &a, &v, t).unwrap();
        let ode = integrate_linear(&a.scale(I), &v, t, 5e-3).unwrap();
        prop_assert!((&closed - &ode).camax() <= 1e-6 * (1.0 + closed.camax()));
    }

    #[test]
    fn angle_identity_holds(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = sampling::rng(seed);
        let rep = sampling::weighted_rep(&mut rng, n, 3).unwrap();
        let a = sampling::generator(&mut rng, &rep).unwrap();
        let v = sampling::vector(&mut rng, n);
        prop_assert!(angle_identity_relative(&rep, &a, &v).unwrap() <= 1e-10);
    }

    #[test]
    fn balls_at_the_fixed_point_are_orbitally_convex(seed in any::<u64>(), n in 1usize..4, radius in 0.2f64..2.0) {
        let mut rng = sampling::rng(seed);
        let rep = sampling::weighted_rep(&mut rng, n, 2).unwrap();
        let a = sampling::generator(&mut rng, &rep).unwrap();
        let v = sampling::vector(&mut rng, n);
        let ball = BallRegion::at_origin(n, radius).unwrap();
        let opts = ConvexityOptions { n_samples: 800, ..Default::default() };
        let cert = orbital_convexity_check(&rep, &a, &v, &ball, opts).unwrap();
        prop_assert_ne!(cert.verdict, Verdict::Violation);
        prop_assert!(cert.sign_conditions_hold);
        for x in &cert.crossings {
            match x.kind {
                CrossingKind::Entry => prop_assert!(x.phi <= 1e-8),
                CrossingKind::Exit => prop_assert!(x.phi >= -1e-8),
            }
        }
    }
}

#[test]
fn radius_derivative_is_four_phi_along_a_trajectory() {
    let mut rng = sampling::rng(99);
    let rep = sampling::weighted_rep(&mut rng, 3, 2).unwrap();
    let a = sampling::generator(&mut rng, &rep).unwrap();
    let v = sampling::vector(&mut rng, 3);
    let times: Vec<f64> = (0..=40).map(|k| -1.0 + 0.05 * k as f64).collect();
    let traj = Trajectory::sample(&rep, &a, &v, &times).unwrap();
    let h = 1e-5;
    for s in traj.samples() {
        let r2 = |t: f64| rep.space().norm_sq(&flow_point(&rep, &a, &v, t).unwrap());
        let deriv = (r2(s.t + h) - r2(s.t - h)) / (2.0 * h);
        assert!((deriv - 4.0 * s.phi).abs() <= 1e-6 * (1.0 + s.phi.abs()));
    }
}

#[test]
fn csv_has_one_row_per_sample() {
    let rep = kahlerkit::moment::LinearRep::circle();
    let a = rep.lie_basis()[0].clone();
    let v = CVec::from_row_slice(&[c(1.0, 0.0)]);
    let traj = Trajectory::sample(&rep, &a, &v, &[0.0, 0.5, 1.0]).unwrap();
    let csv = traj.to_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("t,re0,im0,phi,radius2"));
}
