//! Evaluation metrics over pose tracks: static drift, return repeatability,
//! tracking accuracy, contour similarity and outline reconstruction error.

mod report;

pub use report::{
    accuracy_csv, accuracy_markdown, bar_chart_svg, drift_csv, drift_markdown, line_chart_svg, repeat_csv,
    repeat_markdown, Series,
};

use crate::binary::BinaryImage;
use crate::error::{Error, Result};
use crate::geometry::{distance_to_outline, point_in_polygon};
use crate::pose::{euler_zxy_to_matrix, rotation_distance_deg, wrap_deg, Pose, TrackRow};

pub const DOF_NAMES: [&str; 6] = ["tx", "ty", "tz", "rx", "ry", "rz"];

/// Signed per-DoF error; angle differences are wrapped to (-180, 180].
pub fn pose_error(est: &Pose, gt: &Pose) -> [f64; 6] {
    let (e, g) = (est.as_array(), gt.as_array());
    std::array::from_fn(|k| if k < 3 { e[k] - g[k] } else { wrap_deg(e[k] - g[k]) })
}

fn geodesic_deg(est: &Pose, gt: &Pose) -> f64 {
    rotation_distance_deg(
        &euler_zxy_to_matrix(est.rx, est.ry, est.rz),
        &euler_zxy_to_matrix(gt.rx, gt.ry, gt.rz),
    )
}

/// Mean absolute pose error while the object is stationary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftReport {
    /// mm for translations, degrees for rotations.
    pub mae: [f64; 6],
    /// Absolute error of the last tracked frame.
    pub final_abs: [f64; 6],
    pub geodesic_mae_deg: f64,
    pub n_frames: usize,
    pub n_sequences: usize,
}

/// Static drift over the tracked frames of `track` against a constant pose.
pub fn static_drift(track: &[TrackRow], gt: &Pose) -> Result<DriftReport> {
    let tracked: Vec<&TrackRow> = track.iter().filter(|r| r.tracked).collect();
    let Some(last) = tracked.last() else {
        return Err(Error::invalid("static drift needs at least one tracked frame"));
    };
    let mut mae = [0.0; 6];
    let mut geo = 0.0;
    for r in &tracked {
        for (m, e) in mae.iter_mut().zip(pose_error(&r.pose, gt)) {
            *m += e.abs();
        }
        geo += geodesic_deg(&r.pose, gt);
    }
    let n = tracked.len() as f64;
    Ok(DriftReport {
        mae: mae.map(|m| m / n),
        final_abs: pose_error(&last.pose, gt).map(f64::abs),
        geodesic_mae_deg: geo / n,
        n_frames: tracked.len(),
        n_sequences: 1,
    })
}

/// Unweighted mean of several drift reports.
pub fn mean_drift(reports: &[DriftReport]) -> Result<DriftReport> {
    if reports.is_empty() {
        return Err(Error::invalid("no drift reports to average"));
    }
    let n = reports.len() as f64;
    let avg = |f: &dyn Fn(&DriftReport) -> [f64; 6]| -> [f64; 6] {
        std::array::from_fn(|k| reports.iter().map(|r| f(r)[k]).sum::<f64>() / n)
    };
    Ok(DriftReport {
        mae: avg(&|r| r.mae),
        final_abs: avg(&|r| r.final_abs),
        geodesic_mae_deg: reports.iter().map(|r| r.geodesic_mae_deg).sum::<f64>() / n,
        n_frames: reports.iter().map(|r| r.n_frames).sum(),
        n_sequences: reports.iter().map(|r| r.n_sequences).sum(),
    })
}

/// Intersection over union of the largest components of two masks.
pub fn contour_similarity(a: &BinaryImage, b: &BinaryImage) -> Result<f64> {
    let (Some(a), Some(b)) = largest_pair(a, b)? else {
        return Ok(0.0);
    };
    let inter = a.and(&b)?.count();
    let union = a.or(&b)?.count();
    Ok(inter as f64 / union as f64)
}

/// Dice coefficient of the largest components, `2|A n B| / (|A| + |B|)`.
pub fn dice_similarity(a: &BinaryImage, b: &BinaryImage) -> Result<f64> {
    let (Some(a), Some(b)) = largest_pair(a, b)? else {
        return Ok(0.0);
    };
    let inter = a.and(&b)?.count();
    Ok(2.0 * inter as f64 / (a.count() + b.count()) as f64)
}

fn largest_pair(a: &BinaryImage, b: &BinaryImage) -> Result<(Option<BinaryImage>, Option<BinaryImage>)> {
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok((a.largest_component(), b.largest_component()))
}

/// Absolute final-pose error of a return trial (expected pose is zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepeatabilityReport {
    pub error: [f64; 6],
    pub trials: usize,
}

/// Return error of a trial whose final contact matches the first one.
/// `first_mask` and `last_mask` are the contact masks of the two frames.
pub fn repeatability_error(
    track: &[TrackRow],
    first_mask: &BinaryImage,
    last_mask: &BinaryImage,
    gate: f64,
) -> Result<RepeatabilityReport> {
    let Some(last) = track.last() else {
        return Err(Error::invalid("empty track"));
    };
    let similarity = contour_similarity(first_mask, last_mask)?;
    if similarity < gate {
        return Err(Error::GateFailure { similarity, gate });
    }
    Ok(RepeatabilityReport {
        error: pose_error(&last.pose, &Pose::ZERO).map(f64::abs),
        trials: 1,
    })
}

pub fn mean_repeatability(reports: &[RepeatabilityReport]) -> Result<RepeatabilityReport> {
    if reports.is_empty() {
        return Err(Error::invalid("no repeatability trials to average"));
    }
    let n = reports.len() as f64;
    Ok(RepeatabilityReport {
        error: std::array::from_fn(|k| reports.iter().map(|r| r.error[k]).sum::<f64>() / n),
        trials: reports.iter().map(|r| r.trials).sum(),
    })
}

/// Per-frame error series with summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    /// `(frame, signed error)` for every tracked frame.
    pub series: Vec<(usize, [f64; 6])>,
    pub rms: [f64; 6],
    pub max_abs: [f64; 6],
    pub geodesic_rms_deg: f64,
    pub geodesic_max_deg: f64,
}

/// Compares a track with its ground-truth schedule frame by frame.
pub fn tracking_accuracy(track: &[TrackRow], gt: &[(usize, Pose)]) -> Result<AccuracyReport> {
    if track.len() != gt.len() {
        return Err(Error::invalid(format!(
            "track has {} frames, ground truth {}",
            track.len(),
            gt.len()
        )));
    }
    let mut series = Vec::new();
    let (mut sq, mut max_abs) = ([0.0; 6], [0.0f64; 6]);
    let (mut gsq, mut gmax) = (0.0, 0.0f64);
    for (r, (i, p)) in track.iter().zip(gt) {
        if r.frame != *i {
            return Err(Error::invalid(format!(
                "frame index mismatch: track {} vs ground truth {i}",
                r.frame
            )));
        }
        if !r.tracked {
            continue;
        }
        let e = pose_error(&r.pose, p);
        for k in 0..6 {
            sq[k] += e[k] * e[k];
            max_abs[k] = max_abs[k].max(e[k].abs());
        }
        let g = geodesic_deg(&r.pose, p);
        gsq += g * g;
        gmax = gmax.max(g);
        series.push((r.frame, e));
    }
    let n = series.len().max(1) as f64;
    Ok(AccuracyReport {
        series,
        rms: sq.map(|v| (v / n).sqrt()),
        max_abs,
        geodesic_rms_deg: (gsq / n).sqrt(),
        geodesic_max_deg: gmax,
    })
}

/// Planar footprint: an outer outline minus holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Outline {
    pub outer: Vec<[f64; 2]>,
    pub holes: Vec<Vec<[f64; 2]>>,
}

impl Outline {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        point_in_polygon(&self.outer, x, y) && !self.holes.iter().any(|h| point_in_polygon(h, x, y))
    }

    /// Distance to the footprint; zero inside.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        if self.contains(x, y) {
            0.0
        } else {
            self.boundary_distance(x, y)
        }
    }

    pub fn boundary_distance(&self, x: f64, y: f64) -> f64 {
        self.holes
            .iter()
            .map(|h| distance_to_outline(h, x, y))
            .fold(distance_to_outline(&self.outer, x, y), f64::min)
    }

    /// Points every `step` along all boundary loops.
    pub fn boundary_samples(&self, step: f64) -> Vec<[f64; 2]> {
        let mut out = Vec::new();
        for ring in std::iter::once(&self.outer).chain(&self.holes) {
            for i in 0..ring.len() {
                let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                let n = (len / step).ceil().max(1.0) as usize;
                for k in 0..n {
                    let t = k as f64 / n as f64;
                    out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HausdorffReport {
    /// Largest distance from a reconstructed point to the footprint.
    pub map_to_outline: f64,
    /// Largest distance from a boundary sample inside the scanned region to
    /// the nearest reconstructed point.
    pub outline_to_map: f64,
    pub hausdorff: f64,
    pub boundary_samples: usize,
}

/// Symmetric reconstruction error of XY points against a footprint, limited
/// to the scanned `regions` (polygons in the footprint frame).
pub fn outline_hausdorff(points: &[[f64; 2]], outline: &Outline, regions: &[Vec<[f64; 2]>]) -> Result<HausdorffReport> {
    if points.is_empty() {
        return Err(Error::invalid("no reconstructed points"));
    }
    let map_to_outline = points.iter().map(|p| outline.distance(p[0], p[1])).fold(0.0, f64::max);
    let samples: Vec<[f64; 2]> = outline
        .boundary_samples(0.25)
        .into_iter()
        .filter(|s| regions.iter().any(|r| point_in_polygon(r, s[0], s[1])))
        .collect();
    let outline_to_map = samples
        .iter()
        .map(|s| {
            points
                .iter()
                .map(|p| (p[0] - s[0]).hypot(p[1] - s[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(HausdorffReport {
        map_to_outline,
        outline_to_map,
        hausdorff: map_to_outline.max(outline_to_map),
        boundary_samples: samples.len(),
    })
}
