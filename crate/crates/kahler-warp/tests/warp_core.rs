mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use common::{kahler_jet, lambda_closed_form, riemannian_ricci};
use kahler_warp::numerics::quad::integrate;
use kahler_warp::warp_core::lambda::{conditions_hold, lambda_samples};
use kahler_warp::warp_core::measure::{fubini_study_volume, unit_sphere_volume};
use kahler_warp::warp_core::*;
use kahler_warp::Error;
use nalgebra::Complex;
use proptest::prelude::*;

const FS: HalfFubiniStudy = HalfFubiniStudy { n: 4 };

fn grid(len: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|j| len * j as f64 / (count + 1) as f64).collect()
}

#[test]
fn half_fubini_study_has_lambda_one_everywhere() {
    for n in 2..=6 {
        let p = HalfFubiniStudy { n };
        for s in grid(FRAC_PI_2, 50) {
            let l = lambda_at(&p, s).unwrap();
            assert!((l - 1.0).abs() < 1e-8, "n={n} s={s} lambda={l}");
        }
    }
}

#[test]
fn fubini_study_frame_coefficients_are_one() {
    for s in grid(FRAC_PI_2, 20) {
        let f = CurvatureFrameData::from_jet(&WarpProfile::<f64>::jet(&FS, s).unwrap());
        for v in [f.p, f.ha, f.hb] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((1.0 / s.sin().powi(2) - (f.p + f.db)).abs() < 1e-9);
    }
}

#[test]
fn model_hk_frame_and_lambda() {
    for &k in &[2.0, 10.0, 100.0] {
        let p = ModelHk { n: 4, k };
        let f = CurvatureFrameData::from_jet(&p.jet(FRAC_PI_4).unwrap());
        assert!((f.p - (2.0 * k - 1.0)).abs() < 1e-9 * k);
        for s in grid(FRAC_PI_2, 40) {
            let f = CurvatureFrameData::from_jet(&p.jet(s).unwrap());
            assert!((f.ha - 1.0).abs() < 1e-9 && (f.hb - 1.0).abs() < 1e-9);
            let expect = (k - s.cos().powi(2)) / s.sin().powi(2);
            assert!((f.p - expect).abs() < 1e-9 * expect);
            let l = lambda_at(&p, s).unwrap();
            assert!((l - 1.0).abs() < 1e-8, "k={k} s={s} {l}");
        }
    }
}

#[test]
fn flat_cone_lambda_vanishes() {
    for n in 2..=5 {
        let p = FlatCone { n, len: 3.0 };
        for s in grid(3.0, 10) {
            assert!(lambda_at(&p, s).unwrap().abs() < 1e-9);
        }
    }
}

#[test]
fn lambda_brackets_are_tight() {
    let p = ModelHk { n: 5, k: 7.0 };
    for s in grid(FRAC_PI_2, 17) {
        let j = p.jet(s).unwrap();
        let l = lambda_at(&p, s).unwrap();
        assert!(conditions_hold(&j, 5, l - 1e-9));
        assert!(!conditions_hold(&j, 5, l + 1e-9));
    }
}

#[test]
fn lambda_scales_inversely_with_homothety() {
    let base = ModelHk { n: 4, k: 3.0 };
    for &c in &[0.5, 2.0] {
        let q = Scaled { inner: base, c };
        for s in grid(FRAC_PI_2, 9) {
            let l0 = lambda_at(&base, s).unwrap();
            let l1 = lambda_at(&q, c * s).unwrap();
            assert!((l1 - l0 / (c * c)).abs() < 1e-8, "c={c}");
        }
    }
    let g = FlatCone { n: 3, len: 1.0 };
    let l: f64 = lambda_at(&Scaled { inner: g, c: 2.0 }, 1.0).unwrap();
    assert!(l.abs() < 1e-9);
}

#[test]
fn negative_lambda_is_returned_not_clamped() {
    // b'' > 0 makes Hb negative
    let j = kahler_jet([0.5, 0.9, 0.3, 0.0]);
    let l = lambda_from_jet(&j, 3, 1e-10).unwrap();
    assert!(l < 0.0);
    assert!((l - lambda_closed_form(&j, 3)).abs() < 1e-8);
}

#[test]
fn certify_fubini_study() {
    let cert = certify::<f64, _>(&FS, &CertifyOptions::default()).unwrap();
    assert!(cert.positive);
    assert!((cert.min_lambda - 1.0).abs() < 1e-8);
    assert!(cert.kahler_residual < 1e-12);
    assert!(cert.tip_closure_residual < 1e-12 && cert.far_closure_residual < 1e-12);
}

#[test]
fn certify_rejects_cone_singularities() {
    let hk = ModelHk { n: 4, k: 4.0 };
    assert!(matches!(certify(&hk, &CertifyOptions::default()), Err(Error::NotSmoothClosure { .. })));
    let flat = FlatCone { n: 3, len: 1.0 };
    assert!(matches!(certify(&flat, &CertifyOptions::default()), Err(Error::NotSmoothClosure { .. })));
}

struct Skewed;

impl WarpProfile<f64> for Skewed {
    fn n(&self) -> usize {
        3
    }
    fn length(&self) -> f64 {
        FRAC_PI_2
    }
    fn jet(&self, s: f64) -> kahler_warp::Result<Jet<f64>> {
        let mut j = WarpProfile::<f64>::jet(&HalfFubiniStudy { n: 3 }, s)?;
        j.a[0] *= 1.01;
        Ok(j)
    }
}

#[test]
fn certify_rejects_non_kahler() {
    assert!(matches!(certify(&Skewed, &CertifyOptions::default()), Err(Error::NotKahler { .. })));
}

#[test]
fn sampled_profiles_use_looser_kahler_tolerance() {
    let nodes: Vec<f64> = (0..=200).map(|j| FRAC_PI_2 * j as f64 / 200.0).collect();
    let q = SampledProfile::from_profile(&FS, nodes).unwrap();
    let cert = certify(&q, &CertifyOptions::default()).unwrap();
    assert!((cert.min_lambda - 1.0).abs() < 1e-6);
}

#[test]
fn closure_of_fubini_study_and_failure_of_hk() {
    let (tip, far) = check_smooth_closure(&FS, 1e-6).unwrap();
    assert!(tip < 1e-14 && far < 1e-14);
    let hk = ModelHk { n: 3, k: 2.0 };
    assert!(check_smooth_closure(&hk, 1e-6).is_err());
}

#[test]
fn volume_forms_agree() {
    for n in 2..=6 {
        let nn = (n - 1) as i32;
        let fact: f64 = (1..=nn).map(|v| v as f64).product();
        let v_fs = fubini_study_volume::<f64>(n).unwrap();
        assert!((v_fs - PI.powi(nn) / fact).abs() < 1e-12 * v_fs, "n={n}");
        let c: f64 = volume_constant(n).unwrap();
        assert!((c - unit_sphere_volume::<f64>(n - 2)).abs() < 1e-12 * c);
        for p in [ModelHk { n, k: 1.0 }, ModelHk { n, k: 5.0 }] {
            let closed: f64 = volume(&p).unwrap();
            let quad: f64 = volume_by_quadrature(&p).unwrap();
            assert!((closed - quad).abs() < 1e-10 * closed, "n={n}");
        }
    }
}

#[test]
fn gh_bound_for_models() {
    let g: f64 = gh_upper_bound(&FS, 2001).unwrap();
    let exact = 0.5 * PI * 0.5 + 0.25 * PI; // sup of π sin s cos s + (π/2) sin s is below this sum
    assert!(g <= exact + 1e-12 && g > 0.5 * FRAC_PI_2);
    let mut prev = f64::INFINITY;
    for &k in &[25.0, 100.0, 400.0] {
        let b = gh_upper_bound(&ModelHk { n: 3, k }, 4001).unwrap();
        assert!(b < prev);
        assert!(b * k.sqrt() <= 0.5 * (FRAC_PI_2 + PI / (2.0 * k.sqrt())) + 1e-12);
        prev = b;
    }
}

#[test]
fn ricci_trace_matches_riemannian_formulas() {
    for n in 3..=6 {
        for p in [ModelHk { n, k: 3.0 }, ModelHk { n, k: 40.0 }] {
            for s in grid(FRAC_PI_2, 11) {
                let j = p.jet(s).unwrap();
                let r = ricci_components(&p, s).unwrap();
                let (rr, eta, tt) = riemannian_ricci(&j, n);
                let scale = 1.0 + rr.abs() + tt.abs();
                assert!((r.rr - rr).abs() < 1e-9 * scale);
                assert!((r.eta - eta).abs() < 1e-9 * scale);
                assert!((r.transverse - tt).abs() < 1e-9 * scale);
            }
        }
    }
}

#[test]
fn fubini_study_is_einstein() {
    for n in 2..=6 {
        let p = HalfFubiniStudy { n };
        let r = ricci_components(&p, 0.6).unwrap();
        let e = 2.0 * n as f64;
        assert!((r.rr - e).abs() < 1e-10 && (r.transverse - e).abs() < 1e-10);
        let t = CurvatureTensor::at(&p, 0.6).unwrap();
        for v in t.ricci_diag() {
            assert!((v - e).abs() < 1e-10);
        }
    }
}

#[test]
fn flat_cone_ricci_vanishes() {
    let p = FlatCone { n: 4, len: 2.0 };
    let (rr, eta, tt) = riemannian_ricci(&p.jet(0.8).unwrap(), 4);
    assert!(rr.abs() < 1e-14 && eta.abs() < 1e-14 && tt.abs() < 1e-14);
    let r = ricci_components(&p, 0.8).unwrap();
    assert!(r.rr.abs() < 1e-14 && r.transverse.abs() < 1e-14);
}

#[test]
fn hessian_of_half_square_on_flat_cone_is_identity() {
    let p = FlatCone { n: 3, len: 5.0 };
    for s in grid(5.0, 6) {
        let h = hessian(&p, s, s, 1.0).unwrap();
        assert!((h.rr - 1.0).abs() < 1e-15 && (h.eta - 1.0).abs() < 1e-15 && (h.transverse - 1.0).abs() < 1e-15);
    }
}

#[test]
fn sectional_curvature_pinching_of_fubini_study() {
    let t = CurvatureTensor::at(&FS, 0.9).unwrap();
    let mut x = vec![0.0; 6];
    x[4] = 1.0;
    let mut y = vec![0.0; 6];
    y[5] = 1.0; // J ∂_s: holomorphic plane along the radial line
    assert!((sectional(&FS, 0.9, &x, &y).unwrap() - 4.0).abs() < 1e-12);
    y[5] = 0.0;
    y[0] = 1.0;
    assert!((t.sectional(&x, &y) - 1.0).abs() < 1e-12);
}

#[test]
fn n2_lambda_is_the_radial_coefficient() {
    let p = ModelHk { n: 2, k: 3.0 };
    let s = 0.4;
    let f = CurvatureFrameData::from_jet(&p.jet(s).unwrap());
    let l: f64 = lambda_at(&p, s).unwrap();
    assert!((l - f.ha).abs() < 1e-9);
}

#[test]
fn lambda_samples_report_every_point() {
    let pts = grid(FRAC_PI_2, 5);
    let v = lambda_samples(&FS, &pts, 1e-10).unwrap();
    assert_eq!(v.len(), 5);
}

#[test]
fn quadrature_of_volume_form_directly() {
    // ∫₀^{π/2} ½ sin 2s sin² s ds = 1/4
    let v = integrate(|s: f64| 0.5 * (2.0 * s).sin() * s.sin().powi(2), 0.0, FRAC_PI_2).unwrap();
    assert!((v - 0.25).abs() < 1e-14);
}

fn jet_strategy() -> impl Strategy<Value = ([f64; 4], usize)> {
    (0.05f64..2.0, 0.05f64..1.5, -3.0f64..3.0, -5.0f64..5.0, 2usize..=6).prop_map(|(b, b1, b2, b3, n)| ([b, b1, b2, b3], n))
}

fn cvec(len: usize) -> impl Strategy<Value = Vec<Complex<f64>>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(r, i)| Complex::new(r, i)), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bisection_matches_closed_form((b, n) in jet_strategy()) {
        let j = kahler_jet(b);
        let l = lambda_from_jet(&j, n, 1e-11).unwrap();
        let c = lambda_closed_form(&j, n);
        prop_assert!((l - c).abs() < 1e-8 * (1.0 + c.abs()), "bisect {l} closed {c}");
    }

    #[test]
    fn bisection_matches_tensor_eigenvalue((b, n) in jet_strategy()) {
        let j = kahler_jet(b);
        let f = CurvatureFrameData::from_jet(&j);
        let t = CurvatureTensor::from_frame(&f, n - 1);
        let mu = t.min_pencil_eigenvalue().unwrap();
        let l = lambda_from_jet(&j, n, 1e-11).unwrap();
        prop_assert!((l - mu).abs() < 1e-7 * (1.0 + mu.abs()), "bisect {l} tensor {mu}");
        prop_assert!(t.symmetry_defect() < 1e-12);
    }

    #[test]
    fn bisectional_bounded_below_by_two_lambda((b, n) in jet_strategy(), v in cvec(5), w in cvec(5)) {
        let j = kahler_jet(b);
        let f = CurvatureFrameData::from_jet(&j);
        let t = CurvatureTensor::from_frame(&f, n - 1);
        let d = n - 1;
        let (v, w) = (&v[..d], &w[..d]);
        let norm: f64 = v.iter().chain(w).map(|z| z.norm_sqr()).sum();
        prop_assume!(norm > 1e-3);
        let l = lambda_from_jet(&j, n, 1e-11).unwrap();
        let bk = t.bisectional_ratio(v, w);
        prop_assert!(bk >= 2.0 * l - 1e-8 * (1.0 + l.abs()), "bk {bk} lambda {l}");
    }

    #[test]
    fn monotone_predicate((b, n) in jet_strategy(), d in 0.0f64..3.0) {
        let j = kahler_jet(b);
        let l = lambda_from_jet(&j, n, 1e-11).unwrap();
        prop_assert!(conditions_hold(&j, n, l - 1e-8 - d));
        prop_assert!(!conditions_hold(&j, n, l + 1e-8 + d));
    }

    #[test]
    fn kahler_ricci_identity((b, n) in jet_strategy()) {
        prop_assume!(n >= 3);
        let j = kahler_jet(b);
        let (rr, eta, tt) = riemannian_ricci(&j, n);
        let f = CurvatureFrameData::from_jet(&j);
        let (radial, transverse) = f.ricci(n - 2);
        let sc = 1.0 + rr.abs() + tt.abs();
        prop_assert!((rr - eta).abs() < 1e-9 * sc);
        prop_assert!((radial - rr).abs() < 1e-9 * sc);
        prop_assert!((transverse - tt).abs() < 1e-9 * sc);
    }
}
