//! Frame-to-frame nearest-neighbour ICP on raw contact pixels, without id
//! anchoring. Relative motions are chained, so errors accumulate.

use log::debug;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{icp_refine, PatchCloud, RegistrationParams, RigidTransform};
use crate::contact::ContactFrame;
use crate::error::{Error, Result};
use crate::geometry::{PixelCoord, WorldPoint};
use crate::pose::{matrix_to_euler_zxy, Pose, TrackRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineParams {
    /// Contact pixels are sampled on a lattice with this pitch.
    pub stride_px: usize,
    pub icp: RegistrationParams,
    pub frame_period_ms: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            stride_px: 2,
            icp: RegistrationParams::default(),
            frame_period_ms: 40.0,
        }
    }
}

/// Contact pixels on a `stride` lattice lifted to 3-D, in millimetres.
pub fn contact_points_mm(f: &ContactFrame, stride: usize) -> Vec<WorldPoint> {
    let stride = stride.max(1);
    let frame = f.height.frame();
    let (w, h) = (f.mask.width(), f.mask.height());
    let mut out = Vec::new();
    for y in (0..h).step_by(stride) {
        for x in (0..w).step_by(stride) {
            if f.mask.get(x, y) {
                let z = f.height.get(x, y);
                let [a, b, c] = frame.world_to_mm(frame.lift(PixelCoord::new(x as f64, y as f64), z));
                out.push(WorldPoint::new(a, b, c));
            }
        }
    }
    out
}

fn patch(points: Vec<WorldPoint>) -> Result<PatchCloud> {
    let ids = (1..=points.len() as u64).collect();
    PatchCloud::new(points, ids, f64::INFINITY)
}

/// Sequential ICP tracker state.
#[derive(Debug, Clone)]
pub struct BaselineTracker {
    params: BaselineParams,
    prev: Option<PatchCloud>,
    /// Accumulated object motion since the first contact frame.
    motion: RigidTransform,
    origin: Option<Vector3<f64>>,
    pose: Pose,
}

impl BaselineTracker {
    pub fn new(params: BaselineParams) -> Self {
        Self {
            params,
            prev: None,
            motion: RigidTransform::identity(),
            origin: None,
            pose: Pose::ZERO,
        }
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    fn row(&self, frame: usize, tracked: bool, n_corr: usize) -> TrackRow {
        TrackRow {
            frame,
            t_ms: frame as f64 * self.params.frame_period_ms,
            pose: self.pose,
            tracked,
            n_corr,
            aniso_ratio: f64::NAN,
            yaw_observable: tracked,
        }
    }

    pub fn step(&mut self, f: &ContactFrame) -> TrackRow {
        let Ok(curr) = patch(contact_points_mm(f, self.params.stride_px)) else {
            debug!("baseline frame {}: no contact, coasting", f.index);
            return self.row(f.index, false, 0);
        };
        let Some(prev) = self.prev.replace(curr.clone()) else {
            self.origin = Some(curr.centroid.to_vector());
            return self.row(f.index, true, curr.len());
        };
        let r = match icp_refine(&prev, &curr, &RigidTransform::identity(), &self.params.icp) {
            Ok(r) if r.accepted => r,
            Ok(r) => {
                debug!(
                    "baseline frame {}: ICP rejected (overlap {:.3}, rmse {:.3})",
                    f.index, r.overlap_ratio, r.rmse
                );
                return self.row(f.index, false, 0);
            }
            Err(e) => {
                debug!("baseline frame {}: {e}", f.index);
                return self.row(f.index, false, 0);
            }
        };
        // ICP maps current points onto previous ones; the object moved the other way.
        let step = r.transform().inverse();
        self.motion = step.after(&self.motion);
        let origin = self.origin.unwrap_or_default();
        let t = self.motion.rotation * origin + self.motion.translation - origin;
        let (rx, ry, rz) = matrix_to_euler_zxy(&self.motion.rotation)
            .unwrap_or((self.pose.rx, self.pose.ry, self.pose.rz));
        self.pose = Pose::new([t.x, t.y, t.z], [rx, ry, rz]);
        let n = (r.overlap_ratio * curr.len() as f64).round() as usize;
        self.row(f.index, true, n)
    }
}

/// Runs the baseline over a frame sequence.
pub fn baseline_nn_icp_track(frames: &[ContactFrame], params: BaselineParams) -> Result<Vec<TrackRow>> {
    if frames.len() < 2 {
        return Err(Error::invalid("baseline tracking needs at least two frames"));
    }
    params.icp.validate()?;
    let mut t = BaselineTracker::new(params);
    Ok(frames.iter().map(|f| t.step(f)).collect())
}
