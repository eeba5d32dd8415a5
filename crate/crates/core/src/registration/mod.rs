//! Rigid registration of contact patches: principal-axis prealignment,
//! nearest-neighbour ICP with overlap gating, map fusion and the frame-to-frame
//! ICP tracker used as a comparison baseline.
//!
//! All patch coordinates are millimetres in the sensor frame.

mod baseline;
mod footprint;
mod map;
mod nn;
mod search;

pub use baseline::{baseline_nn_icp_track, contact_points_mm, BaselineParams, BaselineTracker};
pub use footprint::SensorFootprint;
pub use map::{FusedMap, JournalRow, MapPoint};
pub use nn::SpatialHash;

use std::sync::Arc;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{ContactFrame, ContactSubset};
use crate::error::{Error, Result};
use crate::geometry::{ImageFrame, WorldPoint};
use crate::pose::{fit_rigid, matrix_to_euler_zxy, pca_yaw_xy};
use crate::reference::ReferenceCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistrationParams {
    pub overlap_gate: f64,
    pub rmse_gate_mm: f64,
    pub nn_gate_mm: f64,
    pub max_iters: usize,
    pub tol_mm: f64,
    /// Minimum eigenvalue ratio for a usable principal axis.
    pub aniso_threshold: f64,
    /// Extra ICP starts are placed along the target's principal axis, this far each way.
    pub search_span_mm: f64,
    pub search_step_mm: f64,
    /// Half-width of the search across the axis.
    pub search_lateral_mm: f64,
    pub search_yaw_deg: f64,
    pub search_yaw_step_deg: f64,
    /// Best coarse candidates that are polished and handed to ICP.
    pub refine_candidates: usize,
    /// Full-credit radius when a patch without a recorded footprint is scored
    /// from its grid points alone.
    pub footprint_gate_mm: f64,
    /// Height agreement needed for a footprint hit.
    pub footprint_z_tol_mm: f64,
    /// Fused points closer than this are treated as the same surface point.
    pub merge_radius_mm: f64,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            overlap_gate: 0.35,
            rmse_gate_mm: 0.5,
            nn_gate_mm: 1.0,
            max_iters: 50,
            tol_mm: 1e-6,
            aniso_threshold: 1.15,
            search_span_mm: 12.0,
            search_step_mm: 1.0,
            search_lateral_mm: 4.0,
            search_yaw_deg: 20.0,
            search_yaw_step_deg: 2.0,
            refine_candidates: 6,
            footprint_gate_mm: 0.1,
            footprint_z_tol_mm: 0.1,
            merge_radius_mm: 0.4,
        }
    }
}

impl RegistrationParams {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.overlap_gate)
            && self.rmse_gate_mm > 0.0
            && self.nn_gate_mm > 0.0
            && self.max_iters > 0
            && self.tol_mm > 0.0
            && self.aniso_threshold >= 1.0
            && self.search_span_mm >= 0.0
            && self.search_step_mm > 0.0
            && self.search_lateral_mm >= 0.0
            && self.search_yaw_deg >= 0.0
            && self.search_yaw_step_deg > 0.0
            && self.refine_candidates > 0
            && self.footprint_gate_mm > 0.0
            && self.footprint_z_tol_mm > 0.0
            && self.merge_radius_mm > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("registration parameters out of range: {self:?}")))
        }
    }
}

/// Spacing of footprint samples used for candidate scoring.
const FOOTPRINT_SAMPLE_MM: f64 = 0.4;

/// `x -> rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_yaw_deg(yaw: f64, translation: Vector3<f64>) -> Self {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw.to_radians()).into_inner();
        Self::new(r, translation)
    }

    pub fn apply(&self, p: &WorldPoint) -> WorldPoint {
        WorldPoint::from_vector(&(self.rotation * p.to_vector() + self.translation))
    }

    /// `self` after `first`.
    pub fn after(&self, first: &RigidTransform) -> Self {
        Self::new(
            self.rotation * first.rotation,
            self.rotation * first.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// Z component of the Z-X-Y decomposition, in degrees.
    pub fn yaw_deg(&self) -> f64 {
        matrix_to_euler_zxy(&self.rotation).map_or_else(
            || self.rotation[(1, 0)].atan2(self.rotation[(0, 0)]).to_degrees(),
            |(_, _, z)| z,
        )
    }
}

/// A set of surface points from one contact with their grid ids.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchCloud {
    pub points: Vec<WorldPoint>,
    pub ids: Vec<u64>,
    /// Unit XY major axis; `None` when the footprint is too isotropic.
    pub principal_axis: Option<[f64; 2]>,
    pub centroid: WorldPoint,
    /// XY outline of the region the sensor could see, in the same frame as
    /// `points`; empty when unknown.
    pub view: Vec<[f64; 2]>,
    /// Pixel-resolution contact footprint in sensor millimetres, if recorded.
    pub footprint: Option<Arc<SensorFootprint>>,
    /// Sensor millimetres to this patch's frame.
    pub sensor_pose: RigidTransform,
}

impl PatchCloud {
    pub fn new(points: Vec<WorldPoint>, ids: Vec<u64>, aniso_threshold: f64) -> Result<Self> {
        if points.len() != ids.len() {
            return Err(Error::invalid(format!(
                "{} points but {} ids",
                points.len(),
                ids.len()
            )));
        }
        if points.len() < 3 {
            return Err(Error::InsufficientPoints(points.len()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite patch point"));
        }
        let n = points.len() as f64;
        let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.to_vector());
        let centroid = WorldPoint::from_vector(&(sum / n));
        let principal_axis = pca_yaw_xy(points.iter().map(|p| (p.x, p.y)), aniso_threshold)
            .ok()
            .map(|y| y.axis);
        Ok(Self {
            points,
            ids,
            principal_axis,
            centroid,
            view: Vec::new(),
            footprint: None,
            sensor_pose: RigidTransform::identity(),
        })
    }

    pub fn with_view(mut self, view: Vec<[f64; 2]>) -> Self {
        self.view = view;
        self
    }

    /// Patch from a tracked frame; the view is the rectangle spanned by the
    /// cloud points that survive the border margin.
    pub fn from_contact(
        f: &ContactFrame,
        cloud: &ReferenceCloud,
        border_margin_px: usize,
        aniso_threshold: f64,
    ) -> Result<Self> {
        let frame = cloud.frame();
        let (w, h) = cloud.image_size();
        let m = border_margin_px as i64;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in cloud.points() {
            let (x, y) = p.pixel.rounded();
            if x < m || y < m || x > w as i64 - 1 - m || y > h as i64 - 1 - m {
                continue;
            }
            let [a, b, _] = frame.world_to_mm(p.world);
            lo = [lo[0].min(a), lo[1].min(b)];
            hi = [hi[0].max(a), hi[1].max(b)];
        }
        let mut patch = Self::from_subset(&f.subset, &frame, aniso_threshold)?;
        let stride = (FOOTPRINT_SAMPLE_MM * frame.ppmm).round().max(1.0) as usize;
        patch.footprint = Some(Arc::new(SensorFootprint::new(&f.mask, &f.height, border_margin_px, stride)?));
        Ok(patch.with_view(vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]))
    }

    /// Converts a contact subset from world units to millimetres.
    pub fn from_subset(subset: &ContactSubset, frame: &ImageFrame, aniso_threshold: f64) -> Result<Self> {
        let points = subset
            .world_points
            .iter()
            .map(|w| {
                let [x, y, z] = frame.world_to_mm(*w);
                WorldPoint::new(x, y, z)
            })
            .collect();
        Self::new(points, subset.ids.clone(), aniso_threshold)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        let axis = self.principal_axis.map(|a| {
            let v = t.rotation * Vector3::new(a[0], a[1], 0.0);
            let n = v.x.hypot(v.y);
            [v.x / n, v.y / n]
        });
        Self {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            ids: self.ids.clone(),
            principal_axis: axis,
            centroid: t.apply(&self.centroid),
            view: self
                .view
                .iter()
                .map(|v| {
                    let q = t.apply(&WorldPoint::new(v[0], v[1], 0.0));
                    [q.x, q.y]
                })
                .collect(),
            footprint: self.footprint.clone(),
            sensor_pose: t.after(&self.sensor_pose),
        }
    }
}

/// Outcome of aligning patch `b` onto patch `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationResult {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub overlap_ratio: f64,
    /// Mean distance between matched pairs, mm.
    pub rmse: f64,
    pub accepted: bool,
    pub iterations: usize,
    pub converged: bool,
}

impl RegistrationResult {
    pub fn transform(&self) -> RigidTransform {
        RigidTransform::new(self.rotation, self.translation)
    }
}

fn wrap_half_turn(deg: f64) -> f64 {
    let mut d = deg % 180.0;
    if d <= -90.0 {
        d += 180.0;
    } else if d > 90.0 {
        d -= 180.0;
    }
    d
}

fn axis_angle_deg(a: [f64; 2]) -> f64 {
    a[1].atan2(a[0]).to_degrees()
}

/// Z rotation about `b`'s centroid followed by a shift onto `a`'s centroid.
fn centring(a: &PatchCloud, b: &PatchCloud, yaw: f64) -> RigidTransform {
    let r = RigidTransform::from_yaw_deg(yaw, Vector3::zeros()).rotation;
    RigidTransform::new(r, a.centroid.to_vector() - r * b.centroid.to_vector())
}

/// Principal-axis yaw from `b` to `a` on the branch nearest zero, plus centring.
pub fn prealign(a: &PatchCloud, b: &PatchCloud) -> Result<RigidTransform> {
    let (Some(aa), Some(ab)) = (a.principal_axis, b.principal_axis) else {
        return Err(Error::PrealignUnavailable);
    };
    Ok(centring(a, b, wrap_half_turn(axis_angle_deg(aa) - axis_angle_deg(ab))))
}

struct Pairs {
    a: Vec<WorldPoint>,
    b: Vec<WorldPoint>,
    mean: f64,
}

fn pairs(hash: &SpatialHash, b: &PatchCloud, t: &RigidTransform) -> Pairs {
    let mut out = Pairs {
        a: Vec::new(),
        b: Vec::new(),
        mean: 0.0,
    };
    for p in &b.points {
        if let Some((i, d)) = hash.nearest(&t.apply(p)) {
            out.a.push(hash.points()[i]);
            out.b.push(*p);
            out.mean += d;
        }
    }
    out.mean = if out.a.is_empty() {
        f64::INFINITY
    } else {
        out.mean / out.a.len() as f64
    };
    out
}

/// Overlap ratio and mean matched distance of `b` under `t` against `a`.
pub fn match_residual(a: &PatchCloud, b: &PatchCloud, t: &RigidTransform, nn_gate_mm: f64) -> (f64, f64) {
    let m = pairs(&SpatialHash::new(&a.points, nn_gate_mm), b, t);
    (m.a.len() as f64 / b.len().max(1) as f64, m.mean)
}

/// Footprint agreement score of `t` (mapping `b` into `a`'s frame), as used
/// to rank registration candidates.
pub fn footprint_score(a: &PatchCloud, b: &PatchCloud, t: &RigidTransform, params: &RegistrationParams) -> f64 {
    search::footprint_agreement(
        &search::Field::new(a, params.footprint_gate_mm, params.footprint_z_tol_mm),
        &search::Field::new(b, params.footprint_gate_mm, params.footprint_z_tol_mm),
        t,
    )
}

/// Point-to-point ICP of `b` onto `a` starting from `init`.
pub fn icp_refine(
    a: &PatchCloud,
    b: &PatchCloud,
    init: &RigidTransform,
    params: &RegistrationParams,
) -> Result<RegistrationResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("ICP needs non-empty patches"));
    }
    let hash = SpatialHash::new(&a.points, params.nn_gate_mm);
    let initial = pairs(&hash, b, init);
    let mut t = *init;
    let mut cur = initial.mean;
    let (mut rises, mut diverged, mut converged) = (0, false, false);
    let mut iterations = 0;
    let initial_mean = initial.mean;
    let mut matched = initial;
    while iterations < params.max_iters {
        if matched.a.len() < 3 {
            break;
        }
        let Ok((r, tr)) = fit_rigid(&matched.a, &matched.b) else {
            break;
        };
        iterations += 1;
        t = RigidTransform::new(r, tr);
        matched = pairs(&hash, b, &t);
        let next = matched.mean;
        if next > cur {
            rises += 1;
            if rises >= 3 {
                diverged = true;
                break;
            }
        } else {
            rises = 0;
        }
        let change = (cur - next).abs();
        cur = next;
        if change < params.tol_mm {
            converged = true;
            break;
        }
    }
    if matched.mean > initial_mean {
        // Never hand back something worse than the starting guess.
        t = *init;
        matched = pairs(&hash, b, init);
    }
    let overlap_ratio = matched.a.len() as f64 / b.len() as f64;
    let rmse = matched.mean;
    let accepted = !diverged
        && rmse.is_finite()
        && overlap_ratio >= params.overlap_gate
        && rmse <= params.rmse_gate_mm;
    Ok(RegistrationResult {
        rotation: t.rotation,
        translation: t.translation,
        overlap_ratio,
        rmse,
        accepted,
        iterations,
        converged,
    })
}

fn offsets(span: f64, step: f64) -> Vec<f64> {
    let n = (span / step + 1e-9).floor() as i64;
    // Zero first so ties favour the plain prealignment.
    std::iter::once(0).chain((1..=n).flat_map(|k| [k, -k])).map(|k| k as f64 * step).collect()
}

/// Full inter-contact registration. Principal-axis prealignment on both
/// branches seeds a coarse in-plane search scored by footprint agreement; the
/// best candidates are refined by ICP and re-scored.
pub fn register(a: &PatchCloud, b: &PatchCloud, params: &RegistrationParams) -> Result<RegistrationResult> {
    params.validate()?;
    let bases: Vec<RigidTransform> = match prealign(a, b) {
        Ok(t) => vec![t, about_z(a.centroid, 180.0).after(&t)],
        Err(Error::PrealignUnavailable) => vec![centring(a, b, 0.0)],
        Err(e) => return Err(e),
    };
    let axis = a.principal_axis.unwrap_or([1.0, 0.0]);
    let along = offsets(params.search_span_mm, params.search_step_mm);
    let across = offsets(params.search_lateral_mm, params.search_step_mm);
    let yaws = offsets(params.search_yaw_deg, params.search_yaw_step_deg);
    let mut starts = Vec::new();
    for base in &bases {
        for &dyaw in &yaws {
            let turned = about_z(a.centroid, dyaw).after(base);
            for &u in &along {
                for &v in &across {
                    let d = Vector3::new(axis[0] * u - axis[1] * v, axis[1] * u + axis[0] * v, 0.0);
                    starts.push(RigidTransform::new(Matrix3::identity(), d).after(&turned));
                }
            }
        }
    }
    let fa = search::Field::new(a, params.footprint_gate_mm, params.footprint_z_tol_mm);
    let fb = search::Field::new(b, params.footprint_gate_mm, params.footprint_z_tol_mm);
    let score = |t: &RigidTransform| search::footprint_agreement(&fa, &fb, t);
    let mut coarse: Vec<(f64, usize)> = starts.par_iter().enumerate().map(|(i, s)| (score(s), i)).collect();
    coarse.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let results: Vec<(f64, RegistrationResult)> = coarse
        .iter()
        .take(params.refine_candidates)
        .map(|&(s0, i)| {
            let (s1, polished) = polish(&score, a.centroid, starts[i], s0, params);
            let icp = icp_refine(a, b, &polished, params)?;
            let s2 = score(&icp.transform());
            if s2 >= s1 {
                return Ok((s2, icp));
            }
            // Point-to-point ICP between two sample lattices on a flat contact
            // drifts towards lattice-aligned poses; keep the polished start.
            let (overlap_ratio, rmse) = match_residual(a, b, &polished, params.nn_gate_mm);
            let accepted = rmse.is_finite() && overlap_ratio >= params.overlap_gate && rmse <= params.rmse_gate_mm;
            Ok((
                s1,
                RegistrationResult {
                    rotation: polished.rotation,
                    translation: polished.translation,
                    overlap_ratio,
                    rmse,
                    accepted,
                    iterations: icp.iterations,
                    converged: icp.converged,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let better = |x: &&(f64, RegistrationResult), y: &&(f64, RegistrationResult)| {
        y.0.total_cmp(&x.0).then(x.1.rmse.total_cmp(&y.1.rmse))
    };
    let best = results
        .iter()
        .filter(|(_, r)| r.accepted)
        .min_by(better)
        .or_else(|| results.iter().min_by(better))
        .map(|(_, r)| *r)
        .expect("at least one candidate");
    Ok(best)
}

/// Pattern search on the footprint score around `t`, halving the yaw and
/// shift steps whenever no neighbour improves.
fn polish(
    score: &impl Fn(&RigidTransform) -> f64,
    pivot: WorldPoint,
    mut t: RigidTransform,
    mut best: f64,
    params: &RegistrationParams,
) -> (f64, RigidTransform) {
    let mut yaw = params.search_yaw_step_deg / 2.0;
    let mut step = params.search_step_mm / 2.0;
    while step > params.footprint_gate_mm / 16.0 {
        let moves = [
            about_z(pivot, yaw),
            about_z(pivot, -yaw),
            RigidTransform::new(Matrix3::identity(), Vector3::new(step, 0.0, 0.0)),
            RigidTransform::new(Matrix3::identity(), Vector3::new(-step, 0.0, 0.0)),
            RigidTransform::new(Matrix3::identity(), Vector3::new(0.0, step, 0.0)),
            RigidTransform::new(Matrix3::identity(), Vector3::new(0.0, -step, 0.0)),
        ];
        let next = moves
            .iter()
            .map(|m| {
                let c = m.after(&t);
                (score(&c), c)
            })
            .max_by(|x, y| x.0.total_cmp(&y.0));
        match next {
            Some((s, c)) if s > best => {
                best = s;
                t = c;
            }
            _ => {
                yaw /= 2.0;
                step /= 2.0;
            }
        }
    }
    (best, t)
}

/// Rotation about the vertical line through `c`.
fn about_z(c: WorldPoint, yaw: f64) -> RigidTransform {
    let r = RigidTransform::from_yaw_deg(yaw, Vector3::zeros()).rotation;
    RigidTransform::new(r, c.to_vector() - r * c.to_vector())
}

#[cfg(test)]
mod tests;
