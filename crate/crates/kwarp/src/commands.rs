//! The subcommands. Each resolves its keys, rejects leftovers, then writes one run directory.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use clap::Args;
use kahler_warp::cone_lift::{lift as lift_profile, sasaki_bounds, summarize, transverse_cone_check};
use kahler_warp::glue::{glue as run_glue, GlueParams};
use kahler_warp::ricci_flow::{run_smoothing, SmoothingParams};
use kahler_warp::soliton_ode::{ac_integral_check, solve_cao_steady, solve_expander, tip_min_sectional_over_scalar, ExpanderTarget};
use kahler_warp::warp_core::lambda::default_kahler_tol;
use kahler_warp::warp_core::{check_kahler, closure_residuals, condition_margins, lambda_at};
use kahler_warp::{FlatCone, HalfFubiniStudy, ModelHk, WarpProfile};
use serde_json::{json, Value};

use crate::config::Cfg;
use crate::output::{line_plot, profile_csv, profile_nodes, read_profile, RunDir};
use crate::{CliError, Common, Outcome};

fn open(cfg: &Cfg, common: &Common, name: &str) -> Result<RunDir, CliError> {
    let out = cfg.get("out", common.out.as_ref().map(|p| p.display().to_string()), format!("kwarp-out/{name}"))?;
    cfg.finish()?;
    let run = RunDir::create(PathBuf::from(out), common.json_only)?;
    run.extra("config.echo", &cfg.echo())?;
    Ok(run)
}

/// Runs `body`, and on an error still leaves a summary naming it.
fn guarded<F: FnOnce(&RunDir) -> Result<Outcome, CliError>>(run: &RunDir, command: &str, body: F) -> Result<Outcome, CliError> {
    body(run).inspect_err(|e| {
        let _ = run.summary(&json!({ "command": command, "status": "error", "exit_code": e.code, "error": e.message }));
    })
}

fn outcome(run: &RunDir, passed: bool, message: String) -> Outcome {
    Outcome { passed, message, quiet: run.json_only }
}

fn meta(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("summaries serialize")
}

/// A profile named on the command line, or read from a file written by `glue`.
enum Source {
    Closed(Box<dyn WarpProfile<f64>>, BTreeMap<String, String>),
}

fn resolve_profile(cfg: &Cfg, family: Option<String>, n: Option<usize>, k: Option<f64>, profile: Option<PathBuf>, allow: &[&str]) -> Result<(String, Source), CliError> {
    let file = cfg.opt("profile", profile.map(|p| p.display().to_string()))?;
    let default = if file.is_some() { "sampled" } else { "half-fs" };
    let family = cfg.get("family", family, default.to_string())?;
    if !allow.contains(&family.as_str()) {
        return Err(CliError::config(format!("unknown family `{family}`; expected one of {}", allow.join(", "))));
    }
    let src = match family.as_str() {
        "sampled" => {
            let path = file.ok_or_else(|| CliError::config("family `sampled` needs --profile"))?;
            let (p, m) = read_profile(std::path::Path::new(&path))?;
            Source::Closed(Box::new(p), m)
        }
        f => {
            if file.is_some() {
                return Err(CliError::config(format!("--profile only goes with family `sampled`, not `{f}`")));
            }
            let n = cfg.get("n", n, 3usize)?;
            if n < 2 {
                return Err(CliError::config(format!("n must be at least 2, got {n}")));
            }
            let p: Box<dyn WarpProfile<f64>> = match f {
                "half-fs" => Box::new(HalfFubiniStudy { n }),
                "hk" => {
                    let k = cfg.get("k", k, 2.0)?;
                    if !(k >= 1.0) {
                        return Err(CliError::config(format!("h_k needs k >= 1, got {k}")));
                    }
                    Box::new(ModelHk { n, k })
                }
                _ => {
                    let len = cfg.get("len", None, FRAC_PI_2)?;
                    if !(len > 0.0) {
                        return Err(CliError::config(format!("len must be positive, got {len}")));
                    }
                    Box::new(FlatCone { n, len })
                }
            };
            Source::Closed(p, BTreeMap::new())
        }
    };
    Ok((family, src))
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// half-fs, hk, flat-cone or sampled
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<f64>,
    /// Profile CSV (family sampled)
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Level the interior must reach
    #[arg(long)]
    threshold: Option<f64>,
    /// Ends excluded from the threshold check; a profile file may carry its own
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    tol_closure: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn certify(a: CertifyArgs) -> Result<Outcome, CliError> {
    let cfg = Cfg::load("certify", a.common.config.as_deref())?;
    let (family, Source::Closed(boxed, file_meta)) = resolve_profile(&cfg, a.family, a.n, a.k, a.profile, &["half-fs", "hk", "flat-cone", "sampled"])?;
    let p: &dyn WarpProfile<f64> = &*boxed;
    let threshold = cfg.get("threshold", a.threshold, 1.0)?;
    let file_delta = file_meta.get("delta").and_then(|v| v.parse().ok()).unwrap_or(0.0);
    let delta = cfg.get("delta", a.delta, file_delta)?;
    let samples = cfg.get("samples", a.samples, 2001usize)?;
    let tol = cfg.get("tol", a.tol, 1e-6)?;
    let tol_closure = cfg.get("tol_closure", a.tol_closure, 1e-6)?;
    let l = p.length();
    if !(delta >= 0.0 && 2.0 * delta < l) || samples < 3 {
        return Err(CliError::config(format!("need 0 <= delta < L/2 = {} and samples >= 3", 0.5 * l)));
    }
    let run = open(&cfg, &a.common, "certify")?;
    guarded(&run, "certify", |run| {
        let n = p.n();
        let points = p.sample_points(samples);
        let kahler = check_kahler(&p, &points)?;
        let kahler_tol = default_kahler_tol(&p);
        let (tip, far) = closure_residuals(&p)?;
        let mut lams = Vec::with_capacity(points.len());
        for &s in &points {
            lams.push((s, lambda_at(&p, s)?));
        }
        let min_of = |pred: &dyn Fn(f64) -> bool| lams.iter().filter(|(s, _)| pred(*s)).fold((f64::NAN, f64::INFINITY), |m, &(s, v)| if v < m.1 { (s, v) } else { m });
        let (argmin, min_all) = min_of(&|_| true);
        let (arg_int, min_int) = min_of(&|s| s > delta && s < l - delta);
        let kahler_ok = kahler <= kahler_tol;
        let positive = min_all > 0.0;
        let meets = min_int >= threshold - tol;
        let passed = kahler_ok && positive && meets;
        // conditions (1)-(4) at level `threshold` where the interior minimum sits
        let violated: Vec<usize> = if meets || !arg_int.is_finite() {
            vec![]
        } else {
            let m = condition_margins(&p.jet(arg_int)?, n, threshold);
            let mut v: Vec<usize> = (0..4).filter(|&i| m[i] < 0.0).map(|i| i + 1).collect();
            if v.is_empty() {
                v.push(1 + (0..4).min_by(|&i, &j| m[i].total_cmp(&m[j])).unwrap_or(0));
            }
            v
        };
        let smooth = tip <= tol_closure && far <= tol_closure;
        let note = if smooth {
            Value::Null
        } else {
            Value::String(format!("closure fails at the ends (tip residual {tip:.3e}, far residual {far:.3e}, tol {tol_closure:.1e}); λ is certified on the open interval only"))
        };
        let summary = json!({
            "command": "certify",
            "status": if passed { "pass" } else { "fail" },
            "family": family,
            "n": n,
            "length": l,
            "samples": points.len(),
            "threshold": threshold,
            "tol": tol,
            "delta": delta,
            "min_lambda": min_all,
            "argmin": argmin,
            "min_lambda_interior": min_int,
            "argmin_interior": arg_int,
            "positive": positive,
            "kahler_residual": kahler,
            "kahler_tol": kahler_tol,
            "closure": { "tip": tip, "far": far, "tol": tol_closure, "smooth": smooth },
            "violated_conditions": violated,
            "note": note,
        });
        run.summary(&summary)?;
        let mut m = file_meta.clone();
        m.insert("n".into(), n.to_string());
        run.extra("profile.csv", &profile_csv(&p, &profile_nodes(&p, samples), &m)?)?;
        run.extra("plot.svg", &line_plot(&format!("λ(s), {family}, n = {n}"), "s", "λ", &[("λ", lams.clone())]))?;
        let mut msg = format!("certify {family} n={n}: min λ = {min_all:.6e}, interior min λ = {min_int:.9} (threshold {threshold})");
        if !kahler_ok {
            msg.push_str(&format!("; FAIL: not Kähler, residual {kahler:.3e} > {kahler_tol:.1e}"));
        } else if !positive {
            msg.push_str(&format!("; FAIL: λ = {min_all:.3e} <= 0 at s = {argmin:.6}"));
        }
        if !meets {
            let list: Vec<String> = violated.iter().map(|i| format!("({i})")).collect();
            msg.push_str(&format!("; FAIL: λ < {threshold} at s = {arg_int:.6}, condition {} violated", list.join(", ")));
        }
        if let Value::String(nt) = &summary["note"] {
            msg.push_str(&format!("; note: {nt}"));
        }
        Ok(outcome(run, passed, msg))
    })
}

#[derive(Args, Debug)]
pub struct GlueArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<f64>,
    /// Closeness index (default 4k)
    #[arg(long)]
    i: Option<usize>,
    /// Fixed blend width instead of the halving policy
    #[arg(long)]
    t_cut: Option<f64>,
    #[arg(long)]
    k_min: Option<f64>,
    #[arg(long)]
    cert_tol: Option<f64>,
    #[arg(long)]
    tol_closure: Option<f64>,
    #[arg(long)]
    delta_max: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    common: Common,
}

pub fn glue(a: GlueArgs) -> Result<Outcome, CliError> {
    let cfg = Cfg::load("glue", a.common.config.as_deref())?;
    let n = cfg.get("n", a.n, 3usize)?;
    let k = cfg.get("k", a.k, 100.0)?;
    let mut params = GlueParams::new(n, k);
    params.i = cfg.get("i", a.i, params.i)?;
    params.t_cut = cfg.opt("t_cut", a.t_cut)?;
    params.k_min = cfg.get("k_min", a.k_min, params.k_min)?;
    params.cert_tol = cfg.get("cert_tol", a.cert_tol, params.cert_tol)?;
    params.tol_closure = cfg.get("tol_closure", a.tol_closure, params.tol_closure)?;
    params.delta_max = cfg.get("delta_max", a.delta_max, params.delta_max)?;
    params.samples = cfg.get("samples", a.samples, params.samples)?;
    params.validate()?;
    let run = open(&cfg, &a.common, "glue")?;
    guarded(&run, "glue", |run| {
        let r = run_glue(&params)?;
        let summary = r.summary()?;
        let mut v = to_value(&summary);
        v["command"] = json!("glue");
        v["status"] = json!("pass");
        run.summary(&v)?;
        let p = &r.profile;
        // the certified margin, in the rescaled profile's arclength
        let delta = r.report.delta_i * p.c;
        let m = meta(&[
            ("n", n.to_string()),
            ("k", k.to_string()),
            ("i", params.i.to_string()),
            ("delta", format!("{delta:e}")),
            ("epsilon_i", format!("{:e}", r.report.epsilon_i)),
            ("source", "glue".into()),
        ]);
        let nodes = profile_nodes(p, params.samples);
        run.extra("profile.csv", &profile_csv(p, &nodes, &m)?)?;
        let lam: Vec<(f64, f64)> = r.certificate.samples.iter().map(|&(s, l)| (s * p.c, l / p.c.powi(2))).collect();
        run.extra("plot.svg", &line_plot(&format!("λ(s) of the glued profile, k = {k}"), "s", "λ", &[("λ", lam)]))?;
        Ok(outcome(
            run,
            true,
            format!(
                "glue n={n} k={k} i={}: min λ = {:.6e}, interior min λ (rescaled) = {:.6} on ({delta:.4e}, L - {delta:.4e}), GH bound {:.4e}",
                params.i, r.report.min_lambda, r.report.min_lambda_interior_rescaled, r.report.gh_upper_bound
            ),
        ))
    })
}

#[derive(Args, Debug)]
pub struct ExpanderArgs {
    /// Complex dimension of the soliton
    #[arg(long)]
    n: Option<usize>,
    /// Cone angle α ≥ 1
    #[arg(long)]
    alpha: Option<f64>,
    /// Matching radius (default 400 max(1, α))
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    tol_slope: Option<f64>,
    #[arg(long)]
    tol_ratio: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn expander(a: ExpanderArgs) -> Result<Outcome, CliError> {
    let cfg = Cfg::load("expander", a.common.config.as_deref())?;
    let n = cfg.get("n", a.n, 3usize)?;
    let alpha = cfg.get("alpha", a.alpha, 4.0)?;
    let r_max = cfg.get("r_max", a.r_max, 400.0 * alpha.max(1.0))?;
    let tol_slope = cfg.get("tol_slope", a.tol_slope, 1e-3)?;
    let tol_ratio = cfg.get("tol_ratio", a.tol_ratio, 1e-2)?;
    if n < 1 {
        return Err(CliError::config("n must be at least 1"));
    }
    let run = open(&cfg, &a.common, "expander")?;
    guarded(&run, "expander", |run| {
        let p = solve_expander(n, &ExpanderTarget { alpha, r_max: Some(r_max) })?;
        let s = p.summary()?;
        let slope = (s.b1_at_r_max * alpha.sqrt() - 1.0).abs();
        let ratio = (s.a_over_r_at_r_max * alpha - 1.0).abs();
        let mut lams = Vec::new();
        for &x in &p.interp.s[1..] {
            lams.push((x, lambda_at(&p, x)?));
        }
        let min_lambda = lams.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let accepted = slope <= tol_slope && ratio <= tol_ratio && min_lambda > 0.0;
        let mut v = to_value(&s);
        v["command"] = json!("expander");
        v["status"] = json!(if accepted { "pass" } else { "fail" });
        v["alpha"] = json!(alpha);
        v["slope_residual"] = json!(slope);
        v["ratio_residual"] = json!(ratio);
        v["min_lambda"] = json!(min_lambda);
        v["accepted"] = json!(accepted);
        run.summary(&v)?;
        let m = meta(&[("n", (n + 1).to_string()), ("alpha", alpha.to_string()), ("source", "expander".into())]);
        run.extra("profile.csv", &profile_csv(&p, &p.interp.s, &m)?)?;
        run.extra("plot.svg", &line_plot(&format!("λ(s) of the α = {alpha} expander on ℂ^{n}"), "s", "λ", &[("λ", lams)]))?;
        Ok(outcome(run, accepted, format!("expander n={n} α={alpha} R={:.4e}: |√α b'(R) - 1| = {slope:.3e}, |α a(R)/R - 1| = {ratio:.3e}, min λ = {min_lambda:.4e}", s.r_max)))
    })
}

#[derive(Args, Debug)]
pub struct SteadyArgs {
    /// Complex dimension (≥ 2)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r_max: Option<f64>,
    /// Step of the tip extrapolation
    #[arg(long)]
    h: Option<f64>,
    /// Relative tolerance against 1/(2n(n+1))
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn steady(a: SteadyArgs) -> Result<Outcome, CliError> {
    let cfg = Cfg::load("steady", a.common.config.as_deref())?;
    let n = cfg.get("n", a.n, 2usize)?;
    let r_max = cfg.get("r_max", a.r_max, 30.0)?;
    let h = cfg.get("h", a.h, 1e-3)?;
    let tol = cfg.get("tol", a.tol, 1e-2)?;
    if n < 2 || !(h > 0.0) {
        return Err(CliError::config(format!("steady needs n >= 2 and h > 0 (n = {n}, h = {h})")));
    }
    let run = open(&cfg, &a.common, "steady")?;
    guarded(&run, "steady", |run| {
        let p = solve_cao_steady(n, r_max)?;
        let k = tip_min_sectional_over_scalar(&p, h)?;
        let nf = n as f64;
        let c_n = 1.0 / (2.0 * nf * (nf + 1.0));
        let rel = (k - c_n).abs() / c_n;
        let lam_tip = (4.0 * lambda_at(&p, h)? - lambda_at(&p, 2.0 * h)?) / 3.0;
        let passed = rel <= tol;
        let summary = json!({
            "command": "steady",
            "status": if passed { "pass" } else { "fail" },
            "n": n,
            "r_max": r_max,
            "f2_tip": p.model.c,
            "tip_scalar": p.model.tip_scalar(),
            "min_sectional_over_R": k,
            "c_n": c_n,
            "relative_error": rel,
            "lambda_tip": lam_tip,
            "max_ode_residual": p.max_residual(),
        });
        run.summary(&summary)?;
        let m = meta(&[("n", (n + 1).to_string()), ("source", "steady".into())]);
        run.extra("profile.csv", &profile_csv(&p, &p.interp.s, &m)?)?;
        let b1: Vec<(f64, f64)> = p.interp.s.iter().zip(&p.interp.b).map(|(&s, b)| (s, b[1])).collect();
        run.extra("plot.svg", &line_plot(&format!("b'(s) of the steady soliton on ℂ^{n}"), "s", "b'", &[("b'", b1)]))?;
        Ok(outcome(run, passed, format!("steady n={n}: min sectional / R at the tip = {k:.6} (1/(2n(n+1)) = {c_n:.6}, relative error {rel:.2e})")))
    })
}

#[derive(Args, Debug)]
pub struct LiftArgs {
    /// half-fs or sampled
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tol_closure: Option<f64>,
    /// Level offset of both transverse predicates
    #[arg(long)]
    margin: Option<f64>,
    /// Ends left out of the transverse check; a profile file may carry its own
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn lift(a: LiftArgs) -> Result<Outcome, CliError> {
    let cfg = Cfg::load("lift", a.common.config.as_deref())?;
    let (family, Source::Closed(boxed, file_meta)) = resolve_profile(&cfg, a.family, a.n, None, a.profile, &["half-fs", "sampled"])?;
    let p: &dyn WarpProfile<f64> = &*boxed;
    let samples = cfg.get("samples", a.samples, 2000usize)?;
    let tol_closure = cfg.get("tol_closure", a.tol_closure, 1e-5)?;
    let margin = cfg.get("margin", a.margin, 0.0)?;
    let file_delta = file_meta.get("delta").and_then(|v| v.parse().ok()).unwrap_or(0.0);
    let delta = cfg.get("delta", a.delta, file_delta)?;
    let l = p.length();
    if !(delta >= 0.0 && 2.0 * delta < l) {
        return Err(CliError::config(format!("need 0 <= delta < L/2 = {}", 0.5 * l)));
    }
    let run = open(&cfg, &a.common, "lift")?;
    guarded(&run, "lift", |run| {
        let cone = lift_profile(&p, samples, tol_closure)?;
        let check = transverse_cone_check(&p, margin, Some((delta, l - delta)), samples)?;
        let b = sasaki_bounds(&cone);
        let bracket = b.diam_direct >= b.diam_lower && b.diam_direct <= b.diam_upper;
        let passed = check.agree && bracket;
        let mut v = to_value(&summarize(&cone, &check));
        v["command"] = json!("lift");
        v["status"] = json!(if passed { "pass" } else { "fail" });
        v["family"] = json!(family);
        v["n"] = json!(cone.n);
        v["length"] = json!(cone.length);
        v["base_volume"] = json!(cone.base_volume);
        v["fiber_length"] = json!(b.fiber_length);
        v["check"] = to_value(&check);
        v["interval"] = json!([delta, l - delta]);
        run.summary(&v)?;
        let mut csv = String::from("s,ln_phi,phi_hat\n");
        for j in 0..cone.nodes.len() {
            csv.push_str(&format!("{:e},{:e},{:e}\n", cone.nodes[j], cone.ln_phi[j], cone.phi_hat[j]));
        }
        run.extra("profile.csv", &csv)?;
        let series: Vec<(f64, f64)> = cone.nodes.iter().cloned().zip(cone.phi_hat.iter().cloned()).collect();
        run.extra("plot.svg", &line_plot("φ̂(s) of the cone lift", "s", "φ̂", &[("φ̂", series)]))?;
        let mut msg = format!(
            "lift {family} n={}: bL² = {:.6e}, diam in [{:.6}, {:.6}] (direct {:.6}), vol <= {:.6e}, transverse check {} ({} nodes, {} disagreements)",
            cone.n, cone.b_l2, b.diam_lower, b.diam_upper, b.diam_direct, b.vol_upper, check.passes, check.nodes, check.disagreements
        );
        if !check.agree {
            msg.push_str("; FAIL: the base and cone predicates disagree");
        }
        Ok(outcome(run, passed, msg))
    })
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<f64>,
    /// Mollification width
    #[arg(long)]
    w: Option<f64>,
    /// End time (default 12 w²)
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    c_stab: Option<f64>,
    #[arg(long)]
    tol_closure: Option<f64>,
    #[arg(long)]
    flow_tol: Option<f64>,
    #[arg(long)]
    late_tol: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn flow(a: FlowArgs) -> Result<Outcome, CliError> {
    let cfg = Cfg::load("flow", a.common.config.as_deref())?;
    let k = cfg.get("k", a.k, 10.0)?;
    let w = cfg.get("w", a.w, 0.02)?;
    let t_end = cfg.get("t_end", a.t_end, 12.0 * w * w)?;
    let mut params = SmoothingParams::new(k, w, t_end);
    params.n = cfg.get("n", a.n, params.n)?;
    params.cells = cfg.get("cells", a.cells, 400)?;
    params.record_every = cfg.get("record_every", a.record_every, params.record_every)?;
    params.flow.c_stab = cfg.get("c_stab", a.c_stab, params.flow.c_stab)?;
    params.flow.tol_closure = cfg.get("tol_closure", a.tol_closure, params.flow.tol_closure)?;
    params.flow_tol = cfg.get("flow_tol", a.flow_tol, params.flow_tol)?;
    params.late_tol = cfg.get("late_tol", a.late_tol, params.late_tol)?;
    if !(params.flow.c_stab > 0.0 && params.flow.c_stab <= 1.0) {
        return Err(CliError::config(format!("c_stab must lie in (0, 1], got {}", params.flow.c_stab)));
    }
    let run = open(&cfg, &a.common, "flow")?;
    guarded(&run, "flow", |run| {
        let r = run_smoothing(&params)?;
        let passed = r.lambda_ok && r.monotone && r.rm_t_bounded && r.kahler_ratio <= 10.0;
        let last = *r.trace.rows.last().expect("trace has rows");
        let summary = json!({
            "command": "flow",
            "status": if passed { "pass" } else { "fail" },
            "params": to_value(&params),
            "initial_length": r.initial_length,
            "length_gap": r.length_gap,
            "t_min": r.t_min,
            "min_lambda_late": r.min_lambda_late,
            "lambda_ok": r.lambda_ok,
            "max_lambda_drop": r.max_lambda_drop,
            "monotone": r.monotone,
            "sup_rm_t_max": r.sup_rm_t_max,
            "rm_t_bounded": r.rm_t_bounded,
            "kahler_ratio": r.kahler_ratio,
            "steps": r.steps,
            "final": to_value(&last),
        });
        run.summary(&summary)?;
        run.extra("trace.csv", &r.trace.to_csv())?;
        let st = &r.state;
        let mut csv = String::from("s,a,b\n");
        for ((s, a), b) in st.arclength_nodes().iter().zip(st.a()).zip(st.b()) {
            csv.push_str(&format!("{s:e},{a:e},{b:e}\n"));
        }
        run.extra("profile.csv", &csv)?;
        let series: Vec<(f64, f64)> = r.trace.rows.iter().map(|row| (row.t, row.min_lambda)).collect();
        run.extra("plot.svg", &line_plot(&format!("min λ(t), mollified h_{k}, w = {w}"), "t", "min λ", &[("min λ", series)]))?;
        let late = r.min_lambda_late.map_or("not reached".to_string(), |v| format!("{v:.6}"));
        let mut msg = format!(
            "flow k={k} w={w}: {} steps to t = {:.4e}, late min λ (t >= {:.2e}) = {late}, largest drop {:.2e}, sup|Rm| t <= {:.3}, Kähler ratio {:.3}",
            r.steps, last.t, r.t_min, r.max_lambda_drop, r.sup_rm_t_max, r.kahler_ratio
        );
        if !passed {
            msg.push_str("; FAIL");
        }
        Ok(outcome(run, passed, msg))
    })
}

#[derive(Args, Debug)]
pub struct AcArgs {
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn acintegral(args: AcArgs) -> Result<Outcome, CliError> {
    let cfg = Cfg::load("acintegral", args.common.config.as_deref())?;
    let a = cfg.get("a", args.a, 1.0)?;
    let n = cfg.get("n", args.n, 2usize)?;
    let tol = cfg.get("tol", args.tol, 1e-10)?;
    if n < 2 || !a.is_finite() {
        return Err(CliError::config(format!("acintegral needs n >= 2 and finite a (n = {n}, a = {a})")));
    }
    let run = open(&cfg, &args.common, "acintegral")?;
    guarded(&run, "acintegral", |run| {
        let c = ac_integral_check(a, n)?;
        let passed = c.residual <= tol && c.j_sign_definite;
        let mut v = to_value(&c);
        v["command"] = json!("acintegral");
        v["status"] = json!(if passed { "pass" } else { "fail" });
        v["tol"] = json!(tol);
        run.summary(&v)?;
        let nf = n as f64;
        let e = n as i32 - 2;
        let mut csv = String::from("x,i_integrand,j_integrand\n");
        let (mut si, mut sj) = (vec![], vec![]);
        for k in 0..=200 {
            let x = k as f64 / 200.0;
            let fi = (2.0 * a * x).exp() * (1.0 - nf * x) * (x - 1.0).powi(e);
            let fj = x * (x - 1.0).powi(e + 1) * (2.0 * a * x).exp();
            csv.push_str(&format!("{x:e},{fi:e},{fj:e}\n"));
            si.push((x, fi));
            sj.push((x, 2.0 * a * fj));
        }
        run.extra("profile.csv", &csv)?;
        run.extra("plot.svg", &line_plot(&format!("integrands, a = {a}, n = {n}"), "x", "", &[("I integrand", si), ("2a J integrand", sj)]))?;
        Ok(outcome(run, passed, format!("acintegral a={a} n={n}: I = {:.15e}, 2aJ = {:.15e}, residual = {:.3e}, J sign-definite: {}", c.i, 2.0 * a * c.j, c.residual, c.j_sign_definite)))
    })
}
