//! Simulated experiment runs shared by the command line and the test suites.

use nalgebra::Vector3;

use crate::contact::{ContactFrame, ContactParams};
use crate::error::{Error, Result};
use crate::metrics::{outline_hausdorff, HausdorffReport, Outline};
use crate::pipeline::{init_cloud, GridSize, Session};
use crate::pose::{Pose, TrackRow, TrackerParams};
use crate::registration::{baseline_nn_icp_track, BaselineParams, FusedMap, PatchCloud, RegistrationParams, RigidTransform};
use crate::sim::{RenderedScenario, Scenario, SceneObject, Shape};

/// A rendered scenario with its reference cloud built from the no-contact frame.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub rendered: RenderedScenario,
    pub session: Session,
}

impl Prepared {
    pub fn new(scenario: Scenario, grid: GridSize, contact: ContactParams) -> Result<Self> {
        let rendered = scenario.render()?;
        let nc = &rendered.no_contact;
        let markers = nc
            .marker_mask
            .as_ref()
            .ok_or_else(|| Error::invalid("no-contact frame carries no marker mask"))?;
        let layout = scenario.sensor().markers;
        let cloud = init_cloud(&nc.height, markers, (layout.rows, layout.cols), grid)?;
        let session = Session::new(cloud, nc.height.clone(), contact);
        Ok(Self {
            scenario,
            rendered,
            session,
        })
    }

    /// Ground-truth schedule of the rendered frames.
    pub fn ground_truth(&self) -> Vec<(usize, Pose)> {
        self.rendered.frames.iter().map(|f| (f.index, f.pose_gt)).collect()
    }

    pub fn contact_frames(&self) -> Result<Vec<ContactFrame>> {
        self.rendered
            .frames
            .iter()
            .map(|f| self.session.observe(f.index, f.height.clone(), Some(&f.observed_mask)))
            .collect()
    }

    pub fn track_invariant(&self, params: TrackerParams) -> Result<Vec<TrackRow>> {
        let frames = self
            .rendered
            .frames
            .iter()
            .map(|f| (f.index, f.height.clone(), Some(f.observed_mask.clone())));
        self.session.track(params, frames)
    }

    pub fn track_baseline(&self, params: BaselineParams) -> Result<Vec<TrackRow>> {
        baseline_nn_icp_track(&self.contact_frames()?, params)
    }

    /// Transform from frame `k`'s sensor millimetres to frame 0's, from the
    /// simulator's ground truth.
    pub fn true_patch_pose(&self, k: usize) -> Result<RigidTransform> {
        let obj = self.scenario.object()?;
        let gt = self.ground_truth();
        let first = gt.first().ok_or_else(|| Error::invalid("scenario has no frames"))?.1;
        let kth = gt
            .iter()
            .find(|(i, _)| *i == k)
            .ok_or_else(|| Error::invalid(format!("no frame {k}")))?
            .1;
        Ok(patch_to_first(&obj, &first, &kth))
    }
}

fn patch_to_first(obj: &SceneObject, first: &Pose, kth: &Pose) -> RigidTransform {
    let (m0, t0) = obj.transform(first);
    let (mk, tk) = obj.transform(kth);
    let rot = m0 * mk.transpose();
    RigidTransform::new(rot, t0 - rot * tk)
}

/// Result of fusing every frame of a multi-contact scenario.
#[derive(Debug, Clone)]
pub struct SlamOutcome {
    pub map: FusedMap,
    /// Present when the object is an extruded outline.
    pub hausdorff: Option<HausdorffReport>,
}

/// Registers every frame as one patch and compares the fused map with the
/// object's outline. The map frame is frame 0's sensor frame; ground truth
/// is used only to express the finished map in body coordinates and to
/// outline the scanned regions.
pub fn run_slam(p: &Prepared, params: &RegistrationParams) -> Result<SlamOutcome> {
    let obj = p.scenario.object()?;
    let poses: Vec<Pose> = p.ground_truth().into_iter().map(|(_, q)| q).collect();
    fuse_contacts(&p.session, &p.contact_frames()?, Some((&obj, &poses)), params)
}

/// Fuses one patch per contact frame. `template` carries the scanned object
/// and the true object pose of each frame; when the object is an extruded
/// outline the result includes the outline Hausdorff report.
pub fn fuse_contacts(
    session: &Session,
    frames: &[ContactFrame],
    template: Option<(&SceneObject, &[Pose])>,
    params: &RegistrationParams,
) -> Result<SlamOutcome> {
    if let Some((_, poses)) = template {
        if poses.len() != frames.len() {
            return Err(Error::invalid(format!(
                "{} ground-truth poses for {} patches",
                poses.len(),
                frames.len()
            )));
        }
    }
    let margin = session.contact.border_margin_px;
    let mut map = FusedMap::new();
    let mut patches = Vec::with_capacity(frames.len());
    for cf in frames {
        let patch = PatchCloud::from_contact(cf, &session.cloud, margin, params.aniso_threshold)?;
        map.accumulate(&patch, params)?;
        patches.push(patch);
    }
    let Some((obj, poses)) = template else {
        return Ok(SlamOutcome { map, hausdorff: None });
    };
    let Shape::ExtrudedOutline { polygon_mm, holes_mm, .. } = &obj.shape else {
        return Ok(SlamOutcome { map, hausdorff: None });
    };
    let first = poses.first().ok_or_else(|| Error::invalid("no patches"))?;
    let (m0, t0) = obj.transform(first);
    let to_body = |x: f64, y: f64, z: f64| {
        let b = m0.transpose() * (Vector3::new(x, y, z) - t0);
        [b.x, b.y]
    };
    let regions: Vec<Vec<[f64; 2]>> = patches
        .iter()
        .zip(poses)
        .map(|(patch, pose)| {
            let truth = patch_to_first(obj, first, pose);
            patch.transformed(&truth).view.iter().map(|v| to_body(v[0], v[1], 0.0)).collect()
        })
        .collect();
    let outline = Outline {
        outer: polygon_mm.clone(),
        holes: holes_mm.clone(),
    };
    let pts: Vec<[f64; 2]> = map
        .points()
        .iter()
        .map(|q| to_body(q.position.x, q.position.y, q.position.z))
        .collect();
    let hausdorff = Some(outline_hausdorff(&pts, &outline, &regions)?);
    Ok(SlamOutcome { map, hausdorff })
}
