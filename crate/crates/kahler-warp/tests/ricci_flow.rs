use std::f64::consts::FRAC_PI_2;

use kahler_warp::ricci_flow::*;
use kahler_warp::warp_core::{closure_residuals, lambda_at, CurvatureFrameData};
use kahler_warp::{Error, HalfFubiniStudy, WarpProfile};
use proptest::prelude::*;

fn fs_state(n: usize, cells: usize) -> FlowState {
    FlowState::from_profile(&HalfFubiniStudy { n }, cells, FarEnd::Closed).unwrap()
}

fn run_steps(st: &mut FlowState, steps: usize, p: &FlowParams) {
    for _ in 0..steps {
        let dt = st.stable_dt(p);
        st.step(dt, p).unwrap();
    }
}

#[test]
fn fubini_study_shrinks_by_pure_scaling() {
    let p = FlowParams::default();
    for n in [3, 4, 6] {
        let mut st = fs_state(n, 128);
        let (a0, b0, l0) = (st.a(), st.b(), st.length());
        assert!((l0 - FRAC_PI_2).abs() < 1e-12);
        run_steps(&mut st, 100, &p);
        // Ric = 2n g, so g(t) = (1 - 4nt) g(0)
        let sigma = (1.0 - 4.0 * n as f64 * st.t).sqrt();
        assert!(sigma < 0.999);
        assert!((st.length() / l0 - sigma).abs() < 1e-4);
        for j in 1..st.cells() {
            assert!((st.a()[j] / (a0[j] * sigma) - 1.0).abs() < 1e-4, "n = {n}, node {j}");
            assert!((st.b()[j] / (b0[j] * sigma) - 1.0).abs() < 1e-4);
        }
    }
}

#[test]
fn fubini_study_ricci_slots_are_equal() {
    let n = 4;
    let st = fs_state(n, 128);
    let einstein = 2.0 * n as f64;
    for jet in st.jets().iter().skip(2).take(120) {
        let (radial, transverse) = CurvatureFrameData::from_jet(jet).ricci(n - 2);
        assert!((radial - einstein).abs() < 1e-4 * einstein, "radial slot {radial}");
        assert!((transverse - einstein).abs() < 1e-4 * einstein, "transverse slot {transverse}");
    }
}

#[test]
fn flat_fragment_with_frozen_end_is_stationary() {
    let p = FlowParams::default();
    let mut st = FlowState::from_moment(3, 0.7, |x| x, 64, FarEnd::Frozen).unwrap();
    let u0 = st.u.clone();
    let x_l = st.x_l;
    run_steps(&mut st, 200, &p);
    assert_eq!(st.x_l, x_l);
    for (u, v) in st.u.iter().zip(&u0) {
        assert!((u - v).abs() < 1e-12);
    }
    assert!(st.sup_rm() < 1e-8);
}

#[test]
fn oversized_step_is_rejected() {
    let p = FlowParams::default();
    let mut st = fs_state(3, 64);
    let bound = st.stable_dt(&p);
    match st.step(2.0 * bound, &p) {
        Err(Error::StabilityViolation { dt, bound: b }) => assert!(dt > b && (b - bound).abs() < 1e-15),
        other => panic!("expected a stability violation, got {other:?}"),
    }
    assert_eq!(st.steps, 0);
    assert!(matches!(st.step(-1.0, &p), Err(Error::StabilityViolation { .. })));
}

#[test]
fn tight_closure_tolerance_is_reported() {
    let h = MollifiedHk::new(3, 10.0, 0.02).unwrap();
    let mut st = FlowState::from_moment(3, h.x_l(), |x| h.big_theta(x), 200, FarEnd::Closed).unwrap();
    let p = FlowParams { tol_closure: 1e-12, ..FlowParams::default() };
    let dt = st.stable_dt(&p);
    assert!(matches!(st.step(dt, &p), Err(Error::ClosureLost { step: 1, .. })));
}

#[test]
fn mollified_hk_closes_with_lambda_at_least_one() {
    let h = MollifiedHk::new(3, 10.0, 0.02).unwrap();
    let (tip, far) = closure_residuals(&h).unwrap();
    assert!(tip < 1e-12 && far < 1e-10, "{tip:e} {far:e}");
    let min = h.sample_points(300).into_iter().map(|s| lambda_at(&h, s).unwrap()).fold(f64::INFINITY, f64::min);
    assert!(min > 1.0 - 1e-6, "min λ = {min}");
    // away from the rounded ends Θ is that of h_10 up to the expander tail
    assert!((h.big_theta(0.05) - 0.05 * 0.05).abs() < 1e-4);
}

#[test]
fn mollified_length_gap_is_linear_in_w() {
    let gap = |w: f64| (MollifiedHk::new(3, 10.0, w).unwrap().length() - FRAC_PI_2).abs();
    let (g1, g2, g3) = (gap(0.02), gap(0.01), gap(0.005));
    for r in [g1 / g2, g2 / g3] {
        assert!((r - 2.0).abs() < 0.2, "ratio {r}");
    }
}

#[test]
fn mollified_hk_rejects_bad_parameters() {
    assert!(matches!(MollifiedHk::new(2, 10.0, 0.02), Err(Error::BadConfig(_))));
    assert!(matches!(MollifiedHk::new(3, 1.0, 0.02), Err(Error::BadConfig(_))));
    assert!(matches!(MollifiedHk::new(3, 10.0, 0.2), Err(Error::BadConfig(_))));
}

#[test]
fn mollified_hk_flow_keeps_min_lambda_monotone() {
    let h = MollifiedHk::new(3, 10.0, 0.02).unwrap();
    let p = FlowParams::default();
    let mut st = FlowState::from_moment(3, h.x_l(), |x| h.big_theta(x), 400, FarEnd::Closed).unwrap();
    let mut trace = FlowTrace::default();
    trace.rows.push(st.record().unwrap());
    for _ in 0..20 {
        run_steps(&mut st, 50, &p);
        trace.rows.push(st.record().unwrap());
    }
    assert_eq!(st.steps, 1000);
    assert!(trace.max_lambda_drop() <= 1e-3);
    assert!(trace.max_kahler() <= 10.0 * st.initial_kahler);
    assert!(trace.rows.windows(2).all(|w| w[1].length < w[0].length && w[1].vol < w[0].vol));
}

#[test]
fn volume_follows_total_scalar_curvature() {
    let h = MollifiedHk::new(3, 10.0, 0.02).unwrap();
    let p = FlowParams::default();
    let mut st = FlowState::from_moment(3, h.x_l(), |x| h.big_theta(x), 400, FarEnd::Closed).unwrap();
    for _ in 0..500 {
        let (v0, r0) = (st.volume(), st.total_scalar());
        let dt = st.stable_dt(&p);
        st.step(dt, &p).unwrap();
        let rate = (st.volume() - v0) / dt;
        let mid = 0.5 * (r0 + st.total_scalar());
        assert!((rate + mid).abs() <= 0.05 * rate.abs(), "step {}: {rate:e} vs {:e}", st.steps, -mid);
    }
}

#[test]
fn smoothing_run_for_k10() {
    let mut params = SmoothingParams::new(10.0, 0.02, 12.0 * 0.02 * 0.02);
    params.cells = 400;
    params.record_every = 1000;
    let r = run_smoothing(&params).unwrap();
    let late = r.min_lambda_late.expect("rows past t_min");
    assert!(r.lambda_ok && late >= 0.99, "late min λ = {late}");
    assert!(r.monotone && r.max_lambda_drop <= 1e-3);
    assert!(r.rm_t_bounded);
    assert!(r.kahler_ratio <= 10.0);
    // the initial length is π/2 up to the O(w) rounding of both ends
    assert!(r.length_gap < 0.15);
    assert!((r.initial_length - MollifiedHk::new(3, 10.0, 0.02).unwrap().length()).abs() < 1e-6);
    assert!(r.trace.rows.last().unwrap().t >= params.t_end);
}

#[test]
fn refinement_converges() {
    let mut params = SmoothingParams::new(10.0, 0.05, 2.5e-4);
    params.cells = 200;
    let r = refinement_study(&params).unwrap();
    assert!(r.fine_gap < r.coarse_gap);
    assert!(r.ratio >= 4.0, "ratio {}", r.ratio);
}

#[test]
fn trace_csv_has_fixed_header() {
    let mut st = fs_state(3, 32);
    let mut trace = FlowTrace::default();
    trace.rows.push(st.record().unwrap());
    run_steps(&mut st, 3, &FlowParams::default());
    trace.rows.push(st.record().unwrap());
    let csv = trace.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,L,min_lambda,sup_rm_t,vol");
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn volume_identity_on_perturbed_fubini_study(eps in -0.3f64..0.3, x_l in 0.2f64..2.0, n in 3usize..6) {
        let theta = |x: f64| {
            let z = x / x_l;
            x * (1.0 - z) * (1.0 + 4.0 * eps * z * (1.0 - z))
        };
        let p = FlowParams::default();
        let mut st = FlowState::from_moment(n, x_l, theta, 96, FarEnd::Closed).unwrap();
        let (v0, r0) = (st.volume(), st.total_scalar());
        let dt = st.stable_dt(&p);
        st.step(dt, &p).unwrap();
        let rate = (st.volume() - v0) / dt;
        prop_assert!((rate + 0.5 * (r0 + st.total_scalar())).abs() <= 0.05 * rate.abs());
    }

    #[test]
    fn flat_fragment_is_stationary_for_any_size(x_l in 0.05f64..5.0, n in 3usize..7) {
        let p = FlowParams::default();
        let mut st = FlowState::from_moment(n, x_l, |x| x, 48, FarEnd::Frozen).unwrap();
        run_steps(&mut st, 5, &p);
        prop_assert!(st.u.iter().all(|u| (u - 1.0).abs() < 1e-12));
    }
}
