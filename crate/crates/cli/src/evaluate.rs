use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;

use crate::commands::{echo_config, pick};
use crate::error::{CliError, CliResult};
use crate::{EvaluateArgs, Experiment};
use invcloud_core::contact::build_contact_mask;
use invcloud_core::metrics::{
    accuracy_csv, accuracy_markdown, bar_chart_svg, drift_csv, drift_markdown, line_chart_svg, mean_drift,
    mean_repeatability, repeat_csv, repeat_markdown, repeatability_error, static_drift, tracking_accuracy,
    AccuracyReport, DriftReport, RepeatabilityReport, Series, DOF_NAMES,
};
use invcloud_core::pose::load_track;
use invcloud_core::sim::FramesDir;
use invcloud_core::{BinaryImage, Error, Pose, RunConfig, TrackRow};

struct Run {
    label: String,
    track: Vec<TrackRow>,
    frames: FramesDir,
    truth: Vec<(usize, Pose)>,
}

fn load_runs(raw: &[String]) -> CliResult<Vec<Run>> {
    raw.chunks(3)
        .map(|c| {
            let [label, track, frames] = c else {
                return Err(CliError::Usage("--run takes LABEL TRACK FRAMES".into()));
            };
            let track_path = PathBuf::from(track);
            let track = load_track(&track_path).map_err(CliError::context(track_path.display()))?;
            let frames = FramesDir::open(frames)?;
            let truth = frames
                .ground_truth()?
                .ok_or_else(|| CliError::Data(format!("{} has no ground_truth.csv", frames.root().display())))?;
            if track.len() != truth.len() || track.iter().zip(&truth).any(|(r, g)| r.frame != g.0) {
                return Err(CliError::Data(format!(
                    "{} ({} rows) does not match the frames of {} ({} rows)",
                    track_path.display(),
                    track.len(),
                    frames.root().display(),
                    truth.len()
                )));
            }
            Ok(Run {
                label: label.clone(),
                track,
                frames,
                truth,
            })
        })
        .collect()
}

/// Labels in first-seen order with the indices of their runs.
fn groups(runs: &[Run]) -> Vec<(String, Vec<usize>)> {
    let mut out: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        match out.iter_mut().find(|g| g.0 == r.label) {
            Some(g) => g.1.push(i),
            None => out.push((r.label.clone(), vec![i])),
        }
    }
    out
}

fn contact_mask(cfg: &RunConfig, fd: &FramesDir, index: usize) -> CliResult<BinaryImage> {
    let reference = fd.reference()?;
    let (h, aux) = fd.frame(index)?;
    Ok(build_contact_mask(&h, &reference, &cfg.contact_params().mask, aux.as_ref())?)
}

fn write(dir: &Path, name: &str, text: &str) -> CliResult {
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

fn dof_bars(title: &str, rows: &[(String, [f64; 6])]) -> String {
    let groups: Vec<(String, Vec<f64>)> = rows.iter().map(|(n, v)| (n.clone(), v.to_vec())).collect();
    bar_chart_svg(title, "mm / deg", &DOF_NAMES, &groups)
}

fn drift(runs: &[Run], out: &Path, plots: bool) -> CliResult {
    let mut rows: Vec<(String, DriftReport)> = Vec::new();
    for (label, idx) in groups(runs) {
        let mut reports = Vec::new();
        for &i in &idx {
            let r = &runs[i];
            let still = r.truth[0].1;
            if r.truth.iter().any(|(_, p)| *p != still) {
                return Err(CliError::Data(format!(
                    "{}: drift needs a stationary ground truth",
                    r.frames.root().display()
                )));
            }
            reports.push(static_drift(&r.track, &still).map_err(CliError::context(&label))?);
        }
        rows.push((label, mean_drift(&reports)?));
    }
    write(out, "report.csv", &drift_csv(&rows))?;
    write(out, "report.md", &drift_markdown(&rows))?;
    if plots {
        let bars: Vec<(String, [f64; 6])> = rows.iter().map(|(n, r)| (n.clone(), r.mae)).collect();
        write(out, "drift_mae.svg", &dof_bars("Static cumulative MAE", &bars))?;
        let series: Vec<Series> = runs
            .iter()
            .map(|r| Series {
                name: r.label.clone(),
                points: r
                    .track
                    .iter()
                    .filter(|t| t.tracked)
                    .map(|t| (t.frame as f64, t.pose.rz - r.truth[0].1.rz))
                    .collect(),
            })
            .collect();
        write(out, "drift_rz.svg", &line_chart_svg("Yaw drift", "frame", "rz error (deg)", &series))?;
    }
    Ok(())
}

fn repeat(cfg: &RunConfig, runs: &[Run], out: &Path, plots: bool) -> CliResult {
    let gate = cfg.evaluate.return_gate;
    let mut rows: Vec<(String, RepeatabilityReport)> = Vec::new();
    let mut notes = String::new();
    let mut empty = Vec::new();
    for (label, idx) in groups(runs) {
        let mut reports = Vec::new();
        for &i in &idx {
            let r = &runs[i];
            let (first, last) = (r.truth[0].0, r.truth[r.truth.len() - 1].0);
            let a = contact_mask(cfg, &r.frames, first)?;
            let b = contact_mask(cfg, &r.frames, last)?;
            match repeatability_error(&r.track, &a, &b, gate) {
                Ok(rep) => reports.push(rep),
                Err(Error::GateFailure { similarity, .. }) => {
                    warn!("{label}: trial {} discarded, contact IoU {similarity:.4} < {gate}", r.frames.root().display());
                    let _ = writeln!(notes, "- {label}: discarded {} (contact IoU {similarity:.4})", r.frames.root().display());
                }
                Err(e) => return Err(CliError::context(&label)(e)),
            }
        }
        match mean_repeatability(&reports) {
            Ok(m) => rows.push((label, m)),
            Err(_) => empty.push(label),
        }
    }
    write(out, "report.csv", &repeat_csv(&rows))?;
    let mut md = repeat_markdown(&rows);
    if !notes.is_empty() {
        let _ = write!(md, "\nTrials failing the return gate ({gate}):\n\n{notes}");
    }
    write(out, "report.md", &md)?;
    if plots {
        let bars: Vec<(String, [f64; 6])> = rows.iter().map(|(n, r)| (n.clone(), r.error)).collect();
        write(out, "repeat_error.svg", &dof_bars("Return error", &bars))?;
    }
    if !empty.is_empty() {
        return Err(CliError::Algorithm(format!(
            "no trial passed the return gate for {}",
            empty.join(", ")
        )));
    }
    Ok(())
}

fn accuracy(runs: &[Run], out: &Path, plots: bool) -> CliResult {
    let mut rows: Vec<(String, AccuracyReport)> = Vec::new();
    let mut order = Vec::new();
    for (label, idx) in groups(runs) {
        for (k, &i) in idx.iter().enumerate() {
            let r = &runs[i];
            let name = if idx.len() > 1 { format!("{label}#{}", k + 1) } else { label.clone() };
            rows.push((name, tracking_accuracy(&r.track, &r.truth).map_err(CliError::context(&label))?));
            order.push(i);
        }
    }
    let mut csv = String::from("method,statistic");
    for d in DOF_NAMES {
        let _ = write!(csv, ",{d}");
    }
    csv.push_str(",geodesic_deg\n");
    for (n, r) in &rows {
        for (stat, v, g) in [("rms", r.rms, r.geodesic_rms_deg), ("max", r.max_abs, r.geodesic_max_deg)] {
            let _ = write!(csv, "{n},{stat}");
            for x in v {
                let _ = write!(csv, ",{x}");
            }
            let _ = writeln!(csv, ",{g}");
        }
    }
    write(out, "report.csv", &csv)?;
    write(out, "series.csv", &accuracy_csv(&rows))?;
    write(out, "report.md", &accuracy_markdown(&rows))?;
    if plots {
        // Plot the axis the ground truth moves along most.
        let range = |k: usize| {
            let v = runs[0].truth.iter().map(|(_, p)| p.as_array()[k]);
            v.clone().fold(f64::NEG_INFINITY, f64::max) - v.fold(f64::INFINITY, f64::min)
        };
        let k = (0..6).max_by(|&a, &b| range(a).total_cmp(&range(b))).unwrap_or(5);
        let dof = DOF_NAMES[k];
        let mut series = vec![Series {
            name: "ground truth".into(),
            points: runs[0].truth.iter().map(|(f, p)| (*f as f64, p.as_array()[k])).collect(),
        }];
        for (name, &i) in rows.iter().zip(&order) {
            let r = &runs[i];
            series.push(Series {
                name: name.0.clone(),
                points: r
                    .track
                    .iter()
                    .filter(|t| t.tracked)
                    .map(|t| (t.frame as f64, t.pose.as_array()[k]))
                    .collect(),
            });
        }
        write(out, &format!("trajectory_{dof}.svg"), &line_chart_svg(&format!("{dof} vs frame"), "frame", dof, &series))?;
        let errors: Vec<Series> = rows
            .iter()
            .map(|(n, r)| Series {
                name: n.clone(),
                points: r.series.iter().map(|(f, e)| (*f as f64, e[k])).collect(),
            })
            .collect();
        write(out, &format!("error_{dof}.svg"), &line_chart_svg(&format!("{dof} error"), "frame", "error", &errors))?;
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, a: EvaluateArgs) -> CliResult {
    let out = pick(a.out, cfg.paths.out.as_ref(), "out")?;
    let runs = load_runs(&a.runs)?;
    std::fs::create_dir_all(&out)?;
    echo_config(cfg, &out.join("effective_config.toml"))?;
    match a.experiment {
        Experiment::Drift => drift(&runs, &out, a.emit_plots)?,
        Experiment::Repeat => repeat(cfg, &runs, &out, a.emit_plots)?,
        Experiment::Accuracy => accuracy(&runs, &out, a.emit_plots)?,
    }
    println!("{:?} report for {} runs -> {}", a.experiment, runs.len(), out.display());
    Ok(())
}
