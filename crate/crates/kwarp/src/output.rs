//! Run directories, profile CSV files and static SVG line plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kahler_warp::warp_core::lambda_at;
use kahler_warp::{SampledProfile, WarpProfile};
use serde_json::Value;

use crate::CliError;

pub struct RunDir {
    pub dir: PathBuf,
    pub json_only: bool,
}

impl RunDir {
    pub fn create(dir: PathBuf, json_only: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(RunDir { dir, json_only })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::numeric(format!("cannot write {}: {e}", path.display())))
    }

    /// Written in every mode; echoed to stdout under `--json-only`.
    pub fn summary(&self, v: &Value) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(v).expect("json values serialize") + "\n";
        if self.json_only {
            print!("{text}");
        }
        self.write("summary.json", &text)
    }

    /// Skipped under `--json-only`.
    pub fn extra(&self, name: &str, contents: &str) -> Result<(), CliError> {
        if self.json_only {
            return Ok(());
        }
        self.write(name, contents)
    }
}

pub const PROFILE_HEADER: &str = "s,a,a1,a2,a3,b,b1,b2,b3,lambda";

/// Node jets and `λ` as CSV, preceded by `# key = value` metadata lines.
pub fn profile_csv<P: WarpProfile<f64>>(p: &P, nodes: &[f64], meta: &BTreeMap<String, String>) -> Result<String, CliError> {
    let mut out = String::new();
    for (k, v) in meta {
        writeln!(out, "# {k} = {v}").unwrap();
    }
    out.push_str(PROFILE_HEADER);
    out.push('\n');
    for &s in nodes {
        let j = p.jet(s).map_err(CliError::from)?;
        let lam = lambda_at(p, s).unwrap_or(f64::NAN);
        let cols: Vec<String> = std::iter::once(s).chain(j.a).chain(j.b).chain([lam]).map(|v| format!("{v:e}")).collect();
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// `[0]`, the profile's sample points, `[L]`.
pub fn profile_nodes<P: WarpProfile<f64>>(p: &P, samples: usize) -> Vec<f64> {
    let l = p.length();
    let mut nodes = vec![0.0];
    nodes.extend(p.sample_points(samples).into_iter().filter(|&s| s > 0.0 && s < l));
    nodes.push(l);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    nodes
}

/// Reads a file written by [`profile_csv`]; `n` comes from the metadata.
pub fn read_profile(path: &Path) -> Result<(SampledProfile, BTreeMap<String, String>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read profile {}: {e}", path.display())))?;
    let meta_text: String = text.lines().filter_map(|l| l.strip_prefix('#')).map(|l| format!("{l}\n")).collect();
    let meta = crate::config::parse_pairs(&meta_text)?;
    let bad = |what: &str| CliError::config(format!("profile {}: {what}", path.display()));
    let n: usize = meta.get("n").and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing `# n = ...` line"))?;
    let mut rows = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    if rows.next().map(str::trim) != Some(PROFILE_HEADER) {
        return Err(bad(&format!("expected header `{PROFILE_HEADER}`")));
    }
    let (mut s, mut a, mut b) = (vec![], vec![], vec![]);
    for (no, row) in rows.enumerate() {
        let v: Vec<f64> = row.split(',').map(|c| c.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad(&format!("row {} is not numeric", no + 1)))?;
        if v.len() != 10 {
            return Err(bad(&format!("row {} has {} columns", no + 1, v.len())));
        }
        s.push(v[0]);
        a.push([v[1], v[2], v[3], v[4]]);
        b.push([v[5], v[6], v[7], v[8]]);
    }
    Ok((SampledProfile::new(n, s, a, b).map_err(CliError::from)?, meta))
}

/// One polyline per series, linear axes fitted to the finite data.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 60.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let pts = || series.iter().flat_map(|s| s.1.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        let pad = if y0.is_finite() { 0.5 * y0.abs().max(1.0) } else { 1.0 };
        (y0, y1) = if y0.is_finite() { (y0 - pad, y0 + pad) } else { (0.0, 1.0) };
    }
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title)).unwrap();
    writeln!(out, r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - 2.0 * M, H - 2.0 * M).unwrap();
    for (v, anchor, x, y) in [(x0, "start", M, H - M + 16.0), (x1, "end", W - M, H - M + 16.0)] {
        writeln!(out, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.4e}</text>"#).unwrap();
    }
    for (v, y) in [(y0, H - M), (y1, M + 10.0)] {
        writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end">{v:.4e}</text>"#, M - 4.0).unwrap();
    }
    writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(xlabel)).unwrap();
    writeln!(out, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#, H / 2.0, H / 2.0, escape(ylabel)).unwrap();
    for (i, (name, data)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = data.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
        writeln!(out, r#"<text x="{}" y="{}" fill="{color}">{}</text>"#, M + 8.0, M + 16.0 + 14.0 * i as f64, escape(name)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
