//! CSV, markdown and SVG renderings of metric reports.

use std::fmt::Write as _;

use super::{AccuracyReport, DriftReport, RepeatabilityReport, DOF_NAMES};

const HEADER_UNITS: [&str; 6] = ["Δx (mm)", "Δy (mm)", "Δz (mm)", "Δθx (°)", "Δθy (°)", "Δθz (°)"];

fn md_table(first: &str, rows: &[(String, [f64; 6])], digits: usize) -> String {
    let mut s = format!("| {first} | {} |\n", HEADER_UNITS.join(" | "));
    s.push_str(&format!("|{}\n", "---|".repeat(7)));
    for (name, v) in rows {
        let cells: Vec<String> = v.iter().map(|x| format!("{x:.digits$}")).collect();
        let _ = writeln!(s, "| {name} | {} |", cells.join(" | "));
    }
    s
}

fn csv_table(first: &str, rows: &[(String, [f64; 6])], extra: &[(&str, Vec<String>)]) -> String {
    let mut s = String::from(first);
    for d in DOF_NAMES {
        let _ = write!(s, ",{d}");
    }
    for (h, _) in extra {
        let _ = write!(s, ",{h}");
    }
    s.push('\n');
    for (i, (name, v)) in rows.iter().enumerate() {
        s.push_str(name);
        for x in v {
            let _ = write!(s, ",{x}");
        }
        for (_, col) in extra {
            let _ = write!(s, ",{}", col[i]);
        }
        s.push('\n');
    }
    s
}

/// Per-method static drift table with an unweighted mean row when more than
/// one scenario contributes to a method.
pub fn drift_markdown(rows: &[(String, DriftReport)]) -> String {
    let mae: Vec<(String, [f64; 6])> = rows.iter().map(|(n, r)| (n.clone(), r.mae)).collect();
    let fin: Vec<(String, [f64; 6])> = rows.iter().map(|(n, r)| (n.clone(), r.final_abs)).collect();
    format!(
        "### Static cumulative MAE\n\n{}\n### Final-frame drift\n\n{}",
        md_table("Method", &mae, 4),
        md_table("Method", &fin, 4)
    )
}

pub fn drift_csv(rows: &[(String, DriftReport)]) -> String {
    let mae: Vec<(String, [f64; 6])> = rows.iter().map(|(n, r)| (n.clone(), r.mae)).collect();
    let extra = vec![
        ("geodesic_mae_deg", rows.iter().map(|(_, r)| r.geodesic_mae_deg.to_string()).collect()),
        ("n_frames", rows.iter().map(|(_, r)| r.n_frames.to_string()).collect()),
        ("n_sequences", rows.iter().map(|(_, r)| r.n_sequences.to_string()).collect()),
    ];
    csv_table("method", &mae, &extra)
}

pub fn repeat_markdown(rows: &[(String, RepeatabilityReport)]) -> String {
    let r: Vec<(String, [f64; 6])> = rows
        .iter()
        .map(|(n, r)| (format!("{n} ({} trials)", r.trials), r.error))
        .collect();
    format!("### Return error\n\n{}", md_table("Method", &r, 4))
}

pub fn repeat_csv(rows: &[(String, RepeatabilityReport)]) -> String {
    let r: Vec<(String, [f64; 6])> = rows.iter().map(|(n, r)| (n.clone(), r.error)).collect();
    let extra = vec![("trials", rows.iter().map(|(_, r)| r.trials.to_string()).collect())];
    csv_table("method", &r, &extra)
}

pub fn accuracy_markdown(rows: &[(String, AccuracyReport)]) -> String {
    let rms: Vec<(String, [f64; 6])> = rows.iter().map(|(n, r)| (format!("{n} RMS"), r.rms)).collect();
    let max: Vec<(String, [f64; 6])> = rows.iter().map(|(n, r)| (format!("{n} max"), r.max_abs)).collect();
    let all: Vec<(String, [f64; 6])> = rms.into_iter().chain(max).collect();
    format!("### Tracking error\n\n{}", md_table("Method", &all, 4))
}

/// `frame,<method>_<dof>_err...` with one column per method and DoF.
pub fn accuracy_csv(rows: &[(String, AccuracyReport)]) -> String {
    let mut s = String::from("frame");
    for (n, _) in rows {
        for d in DOF_NAMES {
            let _ = write!(s, ",{n}_{d}_err");
        }
    }
    s.push('\n');
    let mut frames: Vec<usize> = rows.iter().flat_map(|(_, r)| r.series.iter().map(|e| e.0)).collect();
    frames.sort_unstable();
    frames.dedup();
    for f in frames {
        let _ = write!(s, "{f}");
        for (_, r) in rows {
            match r.series.iter().find(|e| e.0 == f) {
                Some((_, e)) => e.iter().for_each(|x| {
                    let _ = write!(s, ",{x}");
                }),
                None => s.push_str(",,,,,,"),
            }
        }
        s.push('\n');
    }
    s
}

/// A named polyline for [`line_chart_svg`].
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(title: &str, x_label: &str, y_label: &str, y: (f64, f64)) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n\
         <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n",
        W / 2.0,
        escape(title),
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        W / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (v, py) in [(y.0, H - PAD), (y.1, PAD)] {
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v:.3}</text>", PAD - 4.0, py + 4.0);
    }
    s
}

pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let xs = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let ys = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| PAD + (x - xs.0) / (xs.1 - xs.0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - ys.0) / (ys.1 - ys.0) * (H - 2.0 * PAD);
    let mut s = frame(title, x_label, y_label, ys);
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
            W - PAD + 4.0 - 120.0,
            PAD + 14.0 * i as f64,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped bars: one group per category, one bar per named value set.
pub fn bar_chart_svg(title: &str, y_label: &str, categories: &[&str], groups: &[(String, Vec<f64>)]) -> String {
    let ys = bounds(groups.iter().flat_map(|g| g.1.iter().copied()).chain(std::iter::once(0.0)));
    let sy = |y: f64| H - PAD - (y - ys.0) / (ys.1 - ys.0) * (H - 2.0 * PAD);
    let mut s = frame(title, "", y_label, ys);
    let slot = (W - 2.0 * PAD) / categories.len().max(1) as f64;
    let bar = slot * 0.8 / groups.len().max(1) as f64;
    for (c, name) in categories.iter().enumerate() {
        let x0 = PAD + c as f64 * slot + slot * 0.1;
        for (g, (_, vals)) in groups.iter().enumerate() {
            let v = vals.get(c).copied().unwrap_or(0.0);
            let (top, bottom) = (sy(v.max(0.0)), sy(v.min(0.0)));
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                x0 + g as f64 * bar,
                top,
                bar,
                (bottom - top).max(0.0),
                PALETTE[g % PALETTE.len()]
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            x0 + slot * 0.4,
            H - PAD + 14.0,
            escape(name)
        );
    }
    for (g, (label, _)) in groups.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>",
            W - PAD - 120.0,
            PAD + 14.0 * g as f64,
            PALETTE[g % PALETTE.len()],
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}
