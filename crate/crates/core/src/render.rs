//! Static renderings of a report: a text table and three SVG figures.
//!
//! Output is a pure function of the report, so re-rendering the same
//! `report.json` gives byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::qubit::{viviani_point, BlochVector, Branch};
use crate::report::{JobWitness, ReportDocument};
use crate::witness::{AngleConfig, ProbMatrix, WitnessResult, N_MEAS, N_PREP};

pub const TEXT_FILE: &str = "report.txt";
pub const HEATMAP_FILE: &str = "heatmap.svg";
pub const JOBS_FILE: &str = "jobs.svg";
pub const VIVIANI_FILE: &str = "viviani.svg";

const CELL: f64 = 64.0;
const FONT: &str = "font-family=\"sans-serif\" font-size=\"12\"";

fn svg_open(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn scheme_line(name: &str, r: Option<&WitnessResult>) -> String {
    match r {
        None => format!("{name:<10} n/a (needs at least 2 jobs)\n"),
        Some(r) => {
            let z = r.z.map_or("inf".to_string(), |z| format!("{z:.3}"));
            format!(
                "{name:<10} W = {:+.6e}  sigma = {:.6e}  z = {z}  T = {}\n",
                r.w, r.sigma, r.t_total
            )
        }
    }
}

/// Plain-text summary: pooled `F`, both schemes, per-job values, verdict.
pub fn render_text(report: &ReportDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "platform   {}", report.platform_label);
    let _ = writeln!(out, "tool       {}", report.provenance.tool_version);
    if let Some(h) = &report.provenance.counts_sha256 {
        let _ = writeln!(out, "counts     sha256:{h}");
    }
    out.push_str("\npooled F (rows k = measurement, columns j = preparation)\n");
    for (k, row) in report.prob_matrix_pooled.to_rows().iter().enumerate() {
        let _ = write!(out, "  k={}", k + 1);
        for v in row {
            let _ = write!(out, " {v:>10.6}");
        }
        out.push('\n');
    }
    out.push('\n');
    out.push_str(&scheme_line("scheme_i", report.scheme_i.as_ref()));
    out.push_str(&scheme_line("scheme_ii", Some(&report.scheme_ii)));
    out.push_str("\njob        W              sigma\n");
    for j in &report.per_job_w {
        let _ = writeln!(out, "{:<10} {:+.6e}  {:.6e}", j.job_index, j.w, j.sigma);
    }
    let _ = writeln!(
        out,
        "\nthreshold  {} sigma\nverdict    {}",
        report.verdict.threshold_sigma, report.verdict
    );
    out
}

fn heat_color(v: f64) -> String {
    // white at 0, dark blue at 1
    let t = v.clamp(0.0, 1.0);
    let r = (255.0 * (1.0 - 0.85 * t)).round() as u8;
    let g = (255.0 * (1.0 - 0.6 * t)).round() as u8;
    format!("#{r:02x}{g:02x}ff")
}

/// 5x5 heatmap of `F`. Each cell is a `<g id="cell-k-j">` (one-based) holding
/// its rectangle and the value printed to four decimals.
pub fn render_heatmap(f: &ProbMatrix) -> String {
    let (left, top) = (40.0, 30.0);
    let mut svg = svg_open(left + CELL * N_PREP as f64 + 20.0, top + CELL * 5.0 + 20.0);
    let _ = writeln!(svg, "<text x=\"{left}\" y=\"18\" {FONT}>F[k][j]</text>");
    for (k, row) in f.to_rows().iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let (x, y) = (left + j as f64 * CELL, top + k as f64 * CELL);
            let ink = if v > 0.55 { "white" } else { "black" };
            let _ = writeln!(
                svg,
                "<g id=\"cell-{}-{}\"><rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"{}\" stroke=\"#888\"/><text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT} \
                 fill=\"{ink}\">{:.4}</text></g>",
                k + 1,
                j + 1,
                heat_color(v),
                x + CELL / 2.0,
                y + CELL / 2.0 + 4.0,
                v + 0.0, // no "-0.0000"
            );
        }
    }
    for j in 0..N_PREP {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>j={}</text>",
            left + (j as f64 + 0.5) * CELL,
            top + 5.0 * CELL + 14.0,
            j + 1
        );
    }
    for k in 0..=N_MEAS {
        let _ = writeln!(
            svg,
            "<text x=\"4\" y=\"{}\" {FONT}>k={}</text>",
            top + (k as f64 + 0.5) * CELL + 4.0,
            k + 1
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Per-job witness scatter with +-1 sigma whiskers and a dashed zero line.
pub fn render_jobs(jobs: &[JobWitness]) -> String {
    let (w, h, m) = (640.0, 360.0, 56.0);
    let mut svg = svg_open(w, h);
    let span = jobs
        .iter()
        .map(|j| j.w.abs() + j.sigma)
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let span = if span > 0.0 { span * 1.1 } else { 1.0 };
    let n = jobs.len().max(1) as f64;
    let px = |i: usize| m + (i as f64 + 0.5) * (w - 2.0 * m) / n;
    let py = |v: f64| h / 2.0 - v / span * (h / 2.0 - m / 2.0);
    let _ = writeln!(
        svg,
        "<line x1=\"{m}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>",
        h / 2.0,
        w - m
    );
    let _ = writeln!(svg, "<text x=\"4\" y=\"{}\" {FONT}>{:+.1e}</text>", py(span) + 10.0, span);
    let _ = writeln!(svg, "<text x=\"4\" y=\"{}\" {FONT}>0</text>", h / 2.0 + 4.0);
    let _ = writeln!(svg, "<text x=\"4\" y=\"{}\" {FONT}>{:+.1e}</text>", py(-span), -span);
    let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>job</text>", w / 2.0, h - 6.0);
    for (i, j) in jobs.iter().enumerate() {
        let x = px(i);
        let _ = writeln!(
            svg,
            "<line class=\"whisker\" x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            py(j.w - j.sigma),
            py(j.w + j.sigma)
        );
        let _ = writeln!(
            svg,
            "<circle class=\"job-point\" data-job=\"{}\" cx=\"{x:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"#1f4fbf\"/>",
            j.job_index,
            py(j.w)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

// orthographic view from azimuth -35 deg, elevation 20 deg; the sphere's
// outline is the circle of radius r
fn project(p: &BlochVector, cx: f64, cy: f64, r: f64) -> (f64, f64) {
    let (sa, ca) = (-35f64).to_radians().sin_cos();
    let (se, ce) = 20f64.to_radians().sin_cos();
    let u = -sa * p.x + ca * p.y;
    let v = ce * p.z - se * (ca * p.x + sa * p.y);
    (cx + r * u, cy - r * v)
}

/// Both Viviani curves on the Bloch sphere with the configured angles marked.
pub fn render_viviani(angles: &AngleConfig) -> String {
    let (w, h, r) = (420.0, 420.0, 150.0);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let mut svg = svg_open(w, h);
    let _ = writeln!(svg, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r}\" fill=\"none\" stroke=\"#bbb\"/>");
    for (axis, name) in [
        (BlochVector::new(1.0, 0.0, 0.0), "x"),
        (BlochVector::new(0.0, 1.0, 0.0), "y"),
        (BlochVector::new(0.0, 0.0, 1.0), "z"),
    ] {
        let (x, y) = project(&axis, cx, cy, r);
        let _ = writeln!(
            svg,
            "<line x1=\"{cx}\" y1=\"{cy}\" x2=\"{x:.2}\" y2=\"{y:.2}\" stroke=\"#999\" stroke-dasharray=\"3 3\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" {FONT} fill=\"#666\">{name}</text>",
            x + 4.0,
            y - 4.0
        );
    }
    for (branch, color, class) in [
        (Branch::Preparation, "#c0392b", "prep-curve"),
        (Branch::Measurement, "#1f4fbf", "meas-curve"),
    ] {
        let pts: Vec<String> = (0..=180)
            .map(|i| {
                let a = -std::f64::consts::PI + i as f64 * std::f64::consts::PI / 90.0;
                let (x, y) = project(&viviani_point(a, branch), cx, cy, r);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polyline class=\"{class}\" points=\"{}\" fill=\"none\" stroke=\"{color}\"/>",
            pts.join(" ")
        );
    }
    for (i, &b) in angles.beta.iter().enumerate() {
        let (x, y) = project(&viviani_point(b, Branch::Preparation), cx, cy, r);
        let _ = writeln!(
            svg,
            "<circle class=\"prep-point\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"#c0392b\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" {FONT}>P{}</text>",
            x + 6.0,
            y - 4.0,
            i + 1
        );
    }
    for (i, &p) in angles.phi.iter().enumerate() {
        let (x, y) = project(&viviani_point(p, Branch::Measurement), cx, cy, r);
        let _ = writeln!(
            svg,
            "<rect class=\"meas-point\" x=\"{:.2}\" y=\"{:.2}\" width=\"7\" height=\"7\" fill=\"#1f4fbf\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" {FONT}>M{}</text>",
            x - 3.5,
            y - 3.5,
            x + 6.0,
            y + 12.0,
            i + 1
        );
    }
    let _ = writeln!(svg, "<text x=\"8\" y=\"16\" {FONT}>{}</text>", escape("red: preparations, blue: measurements"));
    svg.push_str("</svg>\n");
    svg
}

/// Writes the four renderings into `out_dir`, creating it if needed.
pub fn render_report(report: &ReportDocument, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = [
        (TEXT_FILE, render_text(report)),
        (HEATMAP_FILE, render_heatmap(&report.prob_matrix_pooled)),
        (JOBS_FILE, render_jobs(&report.per_job_w)),
        (VIVIANI_FILE, render_viviani(&report.angle_config)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out_dir.join(name);
        crate::io::write(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}
