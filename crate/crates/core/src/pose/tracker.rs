use log::{debug, warn};
use nalgebra::Matrix3;

use super::kabsch::{kabsch_rotation, match_by_id, Correspondences};
use super::yaw::{pca_yaw, pca_yaw_depth_weighted, yaw_continuity, YawState};
use super::{matrix_to_euler_zxy, Pose};
use crate::contact::{ContactFrame, ContactSubset};
use crate::error::Error;
use crate::geometry::WorldPoint;

/// Which earlier frame roll/pitch are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KabschAnchor {
    /// The oldest keyframe that still shares enough ids with the current frame.
    #[default]
    Keyframe,
    /// Always the previous frame.
    Previous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams {
    /// Minimum `lambda1 / lambda2` for the principal axis to define yaw.
    pub aniso_threshold: f64,
    pub anchor: KabschAnchor,
    /// Fraction of the current ids a keyframe must share to stay in use.
    pub keyframe_min_overlap: f64,
    /// Milliseconds per frame for the reported timestamps.
    pub frame_period_ms: f64,
    /// When set, principal-axis points are weighted by their depth beyond
    /// this many millimetres; `None` weights every point equally.
    pub yaw_depth_floor_mm: Option<f64>,
    /// Resample anchor points at their position moved by the contact's
    /// in-plane translation and yaw before solving roll/pitch, instead of
    /// pairing the sensor-fixed ids directly. Without this a curved surface
    /// sliding under the fixed ids reads as a tilt.
    pub compensate_motion: bool,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            aniso_threshold: 1.15,
            anchor: KabschAnchor::Keyframe,
            keyframe_min_overlap: 0.5,
            frame_period_ms: 40.0,
            yaw_depth_floor_mm: Some(0.2),
            compensate_motion: true,
        }
    }
}

/// One output row of a pose track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub frame: usize,
    pub t_ms: f64,
    pub pose: Pose,
    pub tracked: bool,
    pub n_corr: usize,
    /// NaN when no principal axis was computed.
    pub aniso_ratio: f64,
    pub yaw_observable: bool,
}

#[derive(Debug, Clone)]
struct Anchor {
    subset: ContactSubset,
    centroid: WorldPoint,
    rx: f64,
    ry: f64,
    rz: f64,
}

/// Sequential six-DoF tracker.
///
/// Translation is the contact centroid offset from the first contact frame and
/// yaw is the unwrapped principal-axis angle relative to the first observable
/// frame, so both return exactly when a frame repeats. Roll and pitch come from
/// id-matched Kabsch increments against an anchor frame.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    origin: Option<WorldPoint>,
    keyframes: Vec<Anchor>,
    prev: Option<Anchor>,
    yaw: Option<YawState>,
    yaw_offset: f64,
    pose: Pose,
    mm_per_world: f64,
}

impl Tracker {
    pub fn new(params: TrackerParams, mm_per_world: f64) -> Self {
        Self {
            params,
            origin: None,
            keyframes: Vec::new(),
            prev: None,
            yaw: None,
            yaw_offset: 0.0,
            pose: Pose::ZERO,
            mm_per_world,
        }
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    fn row(&self, frame: usize, tracked: bool, n_corr: usize, aniso_ratio: f64, yaw_observable: bool) -> TrackRow {
        TrackRow {
            frame,
            t_ms: frame as f64 * self.params.frame_period_ms,
            pose: self.pose,
            tracked,
            n_corr,
            aniso_ratio,
            yaw_observable,
        }
    }

    fn update_yaw(&mut self, subset: &ContactSubset) -> (f64, bool) {
        let raw = match self.params.yaw_depth_floor_mm {
            Some(floor) => pca_yaw_depth_weighted(subset, floor, self.params.aniso_threshold),
            None => pca_yaw(subset, self.params.aniso_threshold),
        };
        match raw {
            Ok(raw) => {
                let next = match &self.yaw {
                    Some(prev) => yaw_continuity(prev, &raw),
                    None => {
                        self.yaw_offset = self.pose.rz - raw.theta;
                        raw
                    }
                };
                self.pose.rz = next.theta + self.yaw_offset;
                self.yaw = Some(next);
                (raw.aniso_ratio, true)
            }
            Err(Error::YawUnobservable { ratio, .. }) => (ratio, false),
            Err(_) => (f64::NAN, false),
        }
    }

    /// Pairs of anchor and current points for the roll/pitch solve.
    fn pairs(&self, anchor: &Anchor, f: &ContactFrame, centroid: WorldPoint) -> Option<Correspondences> {
        if !self.params.compensate_motion {
            return match_by_id(&anchor.subset, &f.subset).ok();
        }
        let frame = f.height.frame();
        let (sin, cos) = (self.pose.rz - anchor.rz).to_radians().sin_cos();
        let (w, h) = (f.height.width() as i64, f.height.height() as i64);
        let mut out = Correspondences::default();
        for (id, p) in anchor.subset.ids.iter().zip(&anchor.subset.world_points) {
            let (dx, dy) = (p.x - anchor.centroid.x, p.y - anchor.centroid.y);
            let moved = WorldPoint::new(centroid.x + cos * dx - sin * dy, centroid.y + sin * dx + cos * dy, 0.0);
            let px = frame.world_to_pixel(moved);
            let (ix, iy) = px.rounded();
            if ix < 0 || iy < 0 || ix >= w || iy >= h || !f.mask.get(ix as usize, iy as usize) {
                continue;
            }
            if let Ok(z) = f.height.sample_bilinear(px) {
                out.ids.push(*id);
                out.p.push(*p);
                out.q.push(frame.lift(px, z));
            }
        }
        (out.len() >= 3).then_some(out)
    }

    /// Picks the Kabsch anchor and its correspondences.
    fn anchor_for(&mut self, f: &ContactFrame, centroid: WorldPoint) -> Option<(Anchor, Correspondences)> {
        if self.params.anchor == KabschAnchor::Keyframe {
            let need = (self.params.keyframe_min_overlap * f.subset.len() as f64).max(3.0);
            for k in &self.keyframes {
                if let Some(c) = self.pairs(k, f, centroid) {
                    if c.len() as f64 >= need {
                        return Some((k.clone(), c));
                    }
                }
            }
        }
        let prev = self.prev.clone()?;
        let c = self.pairs(&prev, f, centroid)?;
        if self.params.anchor == KabschAnchor::Keyframe {
            debug!("promoting frame {} to keyframe", prev.subset.frame_index);
            self.keyframes.push(prev.clone());
        }
        Some((prev, c))
    }

    fn anchor_here(&self, subset: &ContactSubset, centroid: WorldPoint) -> Anchor {
        Anchor {
            subset: subset.clone(),
            centroid,
            rx: self.pose.rx,
            ry: self.pose.ry,
            rz: self.pose.rz,
        }
    }

    /// Consumes the next frame and returns its track row.
    pub fn step(&mut self, f: &ContactFrame) -> TrackRow {
        let (Some(centroid), false) = (f.centroid, f.subset.is_empty()) else {
            debug!("frame {}: no contact, coasting", f.index);
            return self.row(f.index, false, 0, f64::NAN, false);
        };
        let Some(origin) = self.origin else {
            self.origin = Some(centroid);
            let (ratio, obs) = self.update_yaw(&f.subset);
            let anchor = self.anchor_here(&f.subset, centroid);
            self.keyframes.push(anchor.clone());
            self.prev = Some(anchor);
            return self.row(f.index, true, f.subset.len(), ratio, obs);
        };

        let held_yaw = (self.yaw, self.pose.rz);
        let (ratio, obs) = self.update_yaw(&f.subset);
        let Some((anchor, corr)) = self.anchor_for(f, centroid) else {
            debug!("frame {}: insufficient overlap, coasting", f.index);
            (self.yaw, self.pose.rz) = held_yaw;
            self.prev = Some(self.anchor_here(&f.subset, centroid));
            return self.row(f.index, false, 0, f64::NAN, false);
        };
        match kabsch_rotation(&corr) {
            Ok(r) => {
                let motion: Matrix3<f64> = r.transpose();
                match matrix_to_euler_zxy(&motion) {
                    Some((a, b, _)) => {
                        self.pose.rx = anchor.rx + a;
                        self.pose.ry = anchor.ry + b;
                    }
                    None => warn!(
                        "frame {}: roll near 90 degrees (rotation {:.3} deg), holding roll/pitch",
                        f.index,
                        super::rotation_distance_deg(&Matrix3::identity(), &motion)
                    ),
                }
            }
            Err(e) => debug!("frame {}: {e}; holding roll/pitch", f.index),
        }
        let k = self.mm_per_world;
        self.pose.tx = (centroid.x - origin.x) * k;
        self.pose.ty = (centroid.y - origin.y) * k;
        self.pose.tz = (centroid.z - origin.z) * k;
        self.prev = Some(self.anchor_here(&f.subset, centroid));
        self.row(f.index, true, corr.len(), ratio, obs)
    }
}
