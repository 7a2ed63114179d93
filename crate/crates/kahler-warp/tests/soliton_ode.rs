use std::f64::consts::FRAC_PI_4;

use kahler_warp::numerics::ode::{rk4_fixed, Dopri5};
use kahler_warp::soliton_ode::*;
use kahler_warp::warp_core::*;
use kahler_warp::Error;
use proptest::prelude::*;

fn cigar_closed_form(c: f64, s: f64) -> f64 {
    // ds² + a² dθ² with a = √(2/|c|) tanh(s √(|c|/2))
    let w = (0.5 * c.abs()).sqrt();
    (w * s).tanh() / w
}

/// Lowest sectional curvature over the coordinate planes and a batch of pseudo-random planes.
fn min_sectional(t: &CurvatureTensor) -> (f64, f64) {
    let d = 2 * t.dim;
    let mut coord = f64::INFINITY;
    for i in 0..d {
        for j in i + 1..d {
            let mut x = vec![0.0; d];
            let mut y = vec![0.0; d];
            x[i] = 1.0;
            y[j] = 1.0;
            coord = coord.min(t.sectional(&x, &y));
        }
    }
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let mut random = f64::INFINITY;
    for _ in 0..2000 {
        let x: Vec<f64> = (0..d).map(|_| next()).collect();
        let y: Vec<f64> = (0..d).map(|_| next()).collect();
        random = random.min(t.sectional(&x, &y));
    }
    (coord, random)
}

/// Richardson extrapolation of a quantity with an `O(h²)` tip expansion.
fn tip_limit<F: FnMut(f64) -> f64>(mut f: F, h: f64) -> f64 {
    (4.0 * f(h) - f(2.0 * h)) / 3.0
}

#[test]
fn cigar_reproduces_closed_form() {
    let p = solve_cao_steady(1, 20.0).unwrap();
    assert_eq!(p.model.c, -1.0);
    for k in 0..=400 {
        let s = 20.0 * k as f64 / 400.0;
        let a = p.jet(s).unwrap().a[0];
        assert!((a - cigar_closed_form(p.model.c, s)).abs() < 1e-8, "s={s}");
    }
}

#[test]
fn cigar_gaussian_curvature_is_positive_and_conformal() {
    let p = solve_cao_steady(1, 10.0).unwrap();
    for k in 1..50 {
        let s = 10.0 * k as f64 / 50.0;
        let j = p.jet(s).unwrap();
        assert!(-j.a[2] / j.a[0] > 0.0);
    }
    // tip Gaussian curvature -a''/a → (μ - c)/1 · 1 = 1 for R = 1
    let kt = tip_limit(|h| { let j = p.jet(h).unwrap(); -j.a[2] / j.a[0] }, 1e-3);
    assert!((kt - 1.0).abs() < 1e-6);
}

#[test]
fn steady_tip_sectional_is_c_n() {
    for n in 2..=4 {
        let nf = n as f64;
        let c_n = 1.0 / (2.0 * nf * (nf + 1.0));
        let p = solve_cao_steady(n, 30.0).unwrap();
        let lam = tip_limit(|h| lambda_at(&p, h).unwrap(), 1e-3);
        assert!((lam - c_n).abs() < 1e-6, "n={n} lambda_tip={lam} c_n={c_n}");
        let coord = tip_limit(|h| min_sectional(&CurvatureTensor::at(&p, h).unwrap()).0, 1e-3);
        assert!((coord - c_n).abs() < 1e-6, "n={n} sectional={coord}");
        let (_, random) = min_sectional(&CurvatureTensor::at(&p, 1e-3).unwrap());
        assert!(random >= c_n * (1.0 - 1e-4), "random plane below the minimum: {random}");
    }
}

#[test]
fn steady_scalar_curvature_is_one_at_the_tip_and_decreasing() {
    for n in 1..=4 {
        let p = solve_cao_steady(n, 30.0).unwrap();
        assert!((p.model.tip_scalar() - 1.0).abs() < 1e-15);
        let m = n - 1;
        let scalar = |s: f64| {
            let r = ricci_components(&p, s).unwrap();
            if n == 1 { r.rr } else { r.rr + m as f64 * r.transverse }
        };
        let r0 = tip_limit(scalar, 1e-3);
        if n > 1 {
            assert!((r0 - 1.0).abs() < 1e-6, "n={n} R(tip)={r0}");
        }
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let s = 30.0 * k as f64 / 200.0;
            let r = scalar(s);
            assert!(r < prev, "n={n} scalar not decreasing at s={s}");
            prev = r;
        }
    }
}

#[test]
fn steady_lambda_is_positive() {
    for n in 2..=3 {
        let p = solve_cao_steady(n, 30.0).unwrap();
        let samples = lambda::lambda_samples(&p, &p.sample_points(0), LAMBDA_TOL).unwrap();
        assert!(samples.iter().all(|&(_, l)| l > 0.0));
    }
}

#[test]
fn solitons_satisfy_the_assembled_tensor_equation() {
    let steady = solve_cao_steady(3, 20.0).unwrap();
    let expander = solve_expander(3, &ExpanderTarget::new(4.0)).unwrap();
    for p in [&steady, &expander] {
        for s in [0.01, 0.3, 1.0, 4.0, 15.0] {
            let r = p.tensor_residual(s).unwrap();
            assert!(r < 1e-8, "s={s} residual={r}");
        }
        assert!(p.max_residual() < SOLITON_RESIDUAL_TOL);
    }
}

#[test]
fn tip_ricci_is_isotropic() {
    for p in [solve_cao_steady(3, 20.0).unwrap(), solve_expander(3, &ExpanderTarget::new(2.0)).unwrap()] {
        let limit = |slot: fn(&RicciComponents<f64>) -> f64| tip_limit(|h| slot(&ricci_components(&p, h).unwrap()), 1e-3);
        let rr = limit(|r| r.rr);
        let eta = limit(|r| r.eta);
        let tt = limit(|r| r.transverse);
        assert!((rr - eta).abs() < 1e-6 && (rr - tt).abs() < 1e-6, "{rr} {eta} {tt}");
    }
}

#[test]
fn moment_route_matches_direct_integration() {
    let models = [
        MomentSoliton { dim: 2, mu: 0.0, c: -0.5 },
        MomentSoliton { dim: 3, mu: -0.5, c: -2.0 },
        MomentSoliton { dim: 1, mu: -0.5, c: -1.5 },
    ];
    for m in models {
        let p = SolitonProfile::build(m, 20.0).unwrap();
        let pts = integrate_tip_ode(&m, 20.0, 1e-6, &Dopri5::with_tol(1e-12, 1e-14)).unwrap();
        for pt in pts.iter().step_by(7) {
            if pt.t < 1e-3 {
                continue;
            }
            let j = p.jet(pt.t).unwrap();
            let (v, d) = if m.dim == 1 { (j.a[0], j.a[1]) } else { (j.b[0], j.b[1]) };
            assert!((v - pt.y[0]).abs() < 1e-8 * (1.0 + v.abs()), "dim={} s={}", m.dim, pt.t);
            assert!((d - pt.y[1]).abs() < 1e-8, "dim={} s={}", m.dim, pt.t);
        }
    }
}

#[test]
fn fixed_step_integration_converges_at_fourth_order() {
    let m = MomentSoliton { dim: 3, mu: -0.5, c: -1.0 };
    let p = SolitonProfile::build(m, 5.0).unwrap();
    let eps: f64 = 1e-3;
    let nn = m.dim as f64;
    let beta = (m.c - m.mu) / (12.0 * (nn + 1.0));
    let y0 = [eps + beta * eps.powi(3), 1.0 + 3.0 * beta * eps * eps];
    let f = |_: f64, y: &[f64; 2]| [y[1], nn * (1.0 - y[1] * y[1]) / y[0] + 0.5 * (m.c * y[1] * y[1] - m.mu) * y[0]];
    let exact = p.jet(5.0).unwrap().b;
    let err = |steps| {
        let y = rk4_fixed(f, eps, y0, 5.0, steps);
        (y[0] - exact[0]).abs().max((y[1] - exact[1]).abs())
    };
    let (e1, e2) = (err(400), err(800));
    let order = (e1 / e2).log2();
    assert!(order > 3.7, "observed order {order} ({e1:e} -> {e2:e})");
}

#[test]
fn moment_jets_satisfy_kahler_identity_and_derivative_chain() {
    let m = MomentSoliton { dim: 4, mu: -0.5, c: -3.0 };
    let p = SolitonProfile::build(m, 30.0).unwrap();
    for s in [0.2, 1.0, 3.0, 10.0] {
        let (j, b4) = p.jet_with_b4(s).unwrap();
        assert!(j.kahler_residual() < 1e-13);
        // central differences of the exact jets
        let h = 1e-3;
        let (jm, b4m) = p.jet_with_b4(s - h).unwrap();
        let (jp, b4p) = p.jet_with_b4(s + h).unwrap();
        for k in 0..3 {
            let fd = (jp.b[k] - jm.b[k]) / (2.0 * h);
            assert!((fd - j.b[k + 1]).abs() < 1e-5 * (1.0 + j.b[k + 1].abs()), "b^({k}) at {s}");
            let fd = (jp.a[k] - jm.a[k]) / (2.0 * h);
            assert!((fd - j.a[k + 1]).abs() < 1e-5 * (1.0 + j.a[k + 1].abs()), "a^({k}) at {s}");
        }
        let fd = (jp.b[3] - jm.b[3]) / (2.0 * h);
        assert!((fd - b4).abs() < 1e-5 * (1.0 + b4.abs()));
        assert!(b4m.is_finite() && b4p.is_finite());
    }
}

#[test]
fn expander_matches_the_cone_slope() {
    let p = solve_expander(2, &ExpanderTarget { alpha: 4.0, r_max: Some(50.0) }).unwrap();
    let s = p.summary().unwrap();
    assert!((s.b1_at_r_max - 0.5).abs() < 1e-9);
}

#[test]
fn expander_tip_parameter_tends_to_the_asymptotic_value() {
    // b'² → μ/c at infinity, so b' → 1/√α forces c = -α/2 in the limit
    for &alpha in &[2.0, 4.0, 9.0] {
        let near = shoot_expander(3, &ExpanderTarget { alpha, r_max: Some(25.0 * alpha) }).unwrap();
        let far = shoot_expander(3, &ExpanderTarget { alpha, r_max: Some(100.0 * alpha) }).unwrap();
        let (e1, e2) = ((near + 0.5 * alpha).abs(), (far + 0.5 * alpha).abs());
        assert!(e2 < e1 && e2 < 1e-3 * alpha, "alpha={alpha}: {e1:e} {e2:e}");
        let m = MomentSoliton { dim: 3, mu: -0.5, c: far };
        let q_inf = 1.0 - (0.5 * (m.mu - m.c)) / (-0.5 * m.c);
        assert!((q_inf - m.mu / m.c).abs() < 1e-14);
    }
}

#[test]
fn cone_matching_improves_with_radius() {
    for &(dim, alpha) in &[(3usize, 2.0), (4, 4.0)] {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for f in [100.0, 200.0, 400.0] {
            let r = f * alpha;
            let s = solve_expander(dim, &ExpanderTarget { alpha, r_max: Some(r) }).unwrap().summary().unwrap();
            let slope = (s.b1_at_r_max * alpha.sqrt() - 1.0).abs();
            let ratio = (s.a_over_r_at_r_max * alpha - 1.0).abs();
            assert!(slope < 1e-9);
            assert!(ratio < prev.1, "dim={dim} alpha={alpha} R={r}: {ratio}");
            prev = (slope, ratio);
        }
        assert!(prev.1 < 1e-2);
    }
}

#[test]
fn expander_below_unit_angle_is_rejected() {
    assert!(matches!(solve_expander(3, &ExpanderTarget::new(0.5)), Err(Error::BadConfig(_))));
}

#[test]
fn unit_angle_is_the_flat_gaussian_expander() {
    let p = solve_expander(3, &ExpanderTarget::new(1.0)).unwrap();
    assert_eq!(p.model.c, -0.5);
    for s in [0.5, 2.0, 10.0, 50.0] {
        let j = p.jet(s).unwrap();
        assert!((j.a[0] - s).abs() < 1e-9 * s && (j.b[0] - s).abs() < 1e-9 * s);
        assert!(p.model.ode_residual(&j) < 1e-12);
        // f' = -a/2: f = -s²/4
        let (f1, _) = p.potential_derivatives(s).unwrap();
        assert!((f1 + 0.5 * s).abs() < 1e-9 * s);
    }
    let flat = Jet { a: [3.0, 1.0, 0.0, 0.0], b: [3.0, 1.0, 0.0, 0.0] };
    assert_eq!(MomentSoliton { dim: 3, mu: -0.5, c: -0.5 }.ode_residual(&flat), 0.0);
}

#[test]
fn expanders_approach_flat_as_the_angle_tends_to_one() {
    let dev = |alpha: f64| {
        let p = solve_expander(3, &ExpanderTarget { alpha, r_max: Some(50.0) }).unwrap();
        (1..=40).map(|k| 0.25 * k as f64).map(|s| (p.jet(s).unwrap().b[0] - s).abs() / s).fold(0.0, f64::max)
    };
    let (d1, d2) = (dev(1.1), dev(1.01));
    assert!(d2 < 0.2 * d1, "{d1} {d2}");
}

#[test]
fn canonical_flow_distance_behaviour() {
    let alpha = 4.0;
    let p = solve_expander(3, &ExpanderTarget::new(alpha)).unwrap();
    let d: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&t| canonical_flow_distance(&p, alpha, t, (0.5, 2.0)).unwrap())
        .collect();
    for w in d.windows(2) {
        assert!(w[1] < w[0], "{d:?}");
    }
    assert!(d[3] < 0.1 * d[0]);
    // independent of the solve radius once the annulus is covered
    let p2 = solve_expander(3, &ExpanderTarget { alpha, r_max: Some(800.0) }).unwrap();
    let d2 = canonical_flow_distance(&p2, alpha, 1e-3, (0.5, 2.0)).unwrap();
    assert!((d2 - d[2]).abs() < 1e-3 * d[2]);
    assert!(matches!(canonical_flow_distance(&p, alpha, 1e-9, (0.5, 2.0)), Err(Error::OutOfDomain { .. })));
    let flat = solve_expander(3, &ExpanderTarget::new(1.0)).unwrap();
    for t in [1.0, 1e-2, 1e-3] {
        assert!(canonical_flow_distance(&flat, 1.0, t, (0.5, 2.0)).unwrap() < 1e-12);
    }
}

#[test]
fn expanders_have_positive_lambda_at_every_node() {
    let p = solve_expander(3, &ExpanderTarget::new(9.0)).unwrap();
    let samples = lambda::lambda_samples(&p, &p.sample_points(0), LAMBDA_TOL).unwrap();
    assert!(samples.iter().all(|&(_, l)| l > 0.0));
}

#[test]
fn hessian_examples() {
    let flat = FlatCone { n: 4, len: 3.0 };
    let h = hessian(&flat, 1.3, 1.3, 1.0).unwrap();
    assert_eq!((h.rr, h.eta, h.transverse), (1.0, 1.0, 1.0));
    let h = hessian(&flat, 1.3, 0.0, 2.5).unwrap();
    assert_eq!((h.rr, h.eta, h.transverse), (2.5, 0.0, 0.0));
    let fs = HalfFubiniStudy { n: 4 };
    let h = hessian::<f64, _>(&fs, FRAC_PI_4, FRAC_PI_4, 1.0).unwrap();
    assert!((h.rr - 1.0).abs() < 1e-15 && h.eta.abs() < 1e-15 && (h.transverse - FRAC_PI_4).abs() < 1e-15);
}

#[test]
fn einstein_and_flat_ricci_fixtures() {
    let fs = HalfFubiniStudy { n: 4 };
    let k = ricci_components::<f64, _>(&fs, 0.3).unwrap().rr;
    for s in [0.2, 0.7, 1.2] {
        let r = ricci_components::<f64, _>(&fs, s).unwrap();
        for v in [r.rr, r.eta, r.transverse] {
            assert!((v - k).abs() < 1e-8);
        }
    }
    let hk = ModelHk { n: 4, k: 2.0 };
    let r = ricci_components(&hk, FRAC_PI_4).unwrap();
    assert!(r.rr > 0.0 && r.eta > 0.0 && r.transverse > 0.0);
}

#[test]
fn product_with_cigar_descriptor() {
    let steady = solve_cao_steady(1, 10.0).unwrap();
    let d = product_with_cigar(&steady);
    assert_eq!(d.dim, 2);
    assert!((d.tip_scalar - 1.0).abs() < 1e-15);
    assert_eq!(d.min_sectional_at_tip, 0.0);
    assert_eq!(d.normalized().scale, d.scale);
    let d3 = product_with_cigar(&solve_cao_steady(2, 10.0).unwrap());
    assert!((d3.scale - 2.0).abs() < 1e-15 && d3.min_sectional_at_tip == 0.0);
}

#[test]
fn ac_integral_closed_form_for_n_two() {
    for a in [0.25, 0.5, 1.0, 2.0, 5.0] {
        let r = ac_integral_check(a, 2).unwrap();
        // ∫₀¹ (1 - 2x) e^{2ax} dx
        let e = (2.0 * a).exp();
        let closed = e * (1.0 / (2.0 * a * a) - 1.0 / (2.0 * a)) - 1.0 / (2.0 * a) - 1.0 / (2.0 * a * a);
        assert!((r.i - closed).abs() < 1e-12 * (1.0 + closed.abs()), "a={a}");
        assert!(r.residual < 1e-10);
        assert!(r.j < 0.0 && r.j_sign == -1 && r.j_sign_definite);
    }
}

#[test]
fn ac_integral_grid() {
    for &a in &[0.1, 0.5, 1.0, 2.0, 5.0] {
        for &n in &[2usize, 3, 4, 5, 8] {
            let r = ac_integral_check(a, n).unwrap();
            assert!(r.residual <= 1e-10 * (1.0 + r.i.abs()), "a={a} n={n}: {r:?}");
            assert!(r.j_sign_definite);
        }
    }
    assert!(ac_integral_check(1.0, 1).is_err());
}

#[test]
fn euler_field_predicate_examples() {
    assert!(euler_field_predicate(1.0, -3.0, 3, 0.0));
    assert!(!euler_field_predicate(1.0, -3.0, 2, 0.0));
    for n in 1..6 {
        assert!(!euler_field_predicate(0.0, 1.0, n, 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ac_identity_holds(a in 0.05f64..6.0, n in 2usize..10) {
        let r = ac_integral_check(a, n).unwrap();
        prop_assert!(r.residual <= 1e-10 * (1.0 + r.i.abs()));
        prop_assert!(r.j_sign_definite);
        prop_assert_eq!(r.j.signum() as i32, r.j_sign);
    }

    #[test]
    fn euler_predicate_accepts_exactly_the_line(q0 in -5.0f64..5.0, n in 1usize..8, d in 1e-6f64..1.0) {
        let q1 = -(n as f64) * q0;
        prop_assert!(euler_field_predicate(q0, q1, n, 0.0));
        prop_assert!(!euler_field_predicate(q0, q1 + d, n, 0.0));
    }

    #[test]
    fn moment_solution_solves_the_linear_ode(dim in 1usize..6, sigma in 0.3f64..8.0, x in 0.01f64..50.0, expanding in any::<bool>()) {
        let mu = if expanding { -0.5 } else { 0.0 };
        let m = MomentSoliton { dim, mu, c: -sigma };
        let q = m.q_jet(x).q;
        let rhs = dim as f64 * (1.0 - q[0]) / x + 0.5 * (m.c * q[0] - mu);
        prop_assert!((q[1] - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
    }
}
