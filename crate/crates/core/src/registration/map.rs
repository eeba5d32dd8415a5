use std::fmt::Write as _;
use std::path::Path;

use super::{register, PatchCloud, RegistrationParams, RegistrationResult, RigidTransform, SpatialHash};
use crate::error::{Error, Result};
use crate::geometry::WorldPoint;

/// A fused surface point. `id` is unique within the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub id: u64,
    pub position: WorldPoint,
    pub n_obs: u32,
    /// Grid id under which the point was first observed.
    pub first_grid_id: u64,
}

/// One registration attempt, in map coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JournalRow {
    pub patch_idx: usize,
    pub accepted: bool,
    pub yaw_deg: f64,
    pub translation: [f64; 3],
    pub overlap: f64,
    pub rmse: f64,
}

/// Map built from successive contact patches, in the first patch's frame.
#[derive(Debug, Clone, Default)]
pub struct FusedMap {
    points: Vec<MapPoint>,
    next_id: u64,
    journal: Vec<JournalRow>,
    /// Most recent accepted patch, already in map coordinates.
    last: Option<PatchCloud>,
    poses: Vec<Option<RigidTransform>>,
}

impl FusedMap {
    pub fn new() -> Self {
        Self {
            next_id: 1,
            ..Self::default()
        }
    }

    pub fn points(&self) -> &[MapPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn journal(&self) -> &[JournalRow] {
        &self.journal
    }

    /// Patch-to-map transform of every submitted patch (`None` if rejected).
    pub fn patch_poses(&self) -> &[Option<RigidTransform>] {
        &self.poses
    }

    pub fn accepted_count(&self) -> usize {
        self.journal.iter().filter(|j| j.accepted).count()
    }

    /// Registers `next` against the latest accepted patch and fuses it on success.
    /// The first patch seeds the map at identity. A rejected patch leaves the
    /// map untouched apart from the journal.
    pub fn accumulate(&mut self, next: &PatchCloud, params: &RegistrationParams) -> Result<RegistrationResult> {
        let patch_idx = self.journal.len();
        let result = match &self.last {
            None => RegistrationResult {
                rotation: nalgebra::Matrix3::identity(),
                translation: nalgebra::Vector3::zeros(),
                overlap_ratio: 1.0,
                rmse: 0.0,
                accepted: true,
                iterations: 0,
                converged: true,
            },
            Some(last) => register(last, next, params)?,
        };
        let t = result.transform();
        self.journal.push(JournalRow {
            patch_idx,
            accepted: result.accepted,
            yaw_deg: t.yaw_deg(),
            translation: [t.translation.x, t.translation.y, t.translation.z],
            overlap: result.overlap_ratio,
            rmse: result.rmse,
        });
        if !result.accepted {
            log::info!(
                "patch {patch_idx} rejected: overlap {:.3}, rmse {:.3} mm",
                result.overlap_ratio,
                result.rmse
            );
            self.poses.push(None);
            return Ok(result);
        }
        let placed = next.transformed(&t);
        self.fuse(&placed, params.merge_radius_mm);
        self.last = Some(placed);
        self.poses.push(Some(t));
        Ok(result)
    }

    fn fuse(&mut self, patch: &PatchCloud, radius: f64) {
        let existing: Vec<WorldPoint> = self.points.iter().map(|p| p.position).collect();
        let hash = (!existing.is_empty()).then(|| SpatialHash::new(&existing, radius));
        let mut claimed = vec![false; existing.len()];
        let mut fresh = Vec::new();
        for (p, &gid) in patch.points.iter().zip(&patch.ids) {
            let hit = hash
                .as_ref()
                .and_then(|h| h.nearest(p))
                .filter(|&(i, _)| !claimed[i]);
            match hit {
                Some((i, _)) => {
                    claimed[i] = true;
                    let m = &mut self.points[i];
                    let n = m.n_obs as f64;
                    let avg = |old: f64, new: f64| (old * n + new) / (n + 1.0);
                    m.position = WorldPoint::new(
                        avg(m.position.x, p.x),
                        avg(m.position.y, p.y),
                        avg(m.position.z, p.z),
                    );
                    m.n_obs += 1;
                }
                None => fresh.push((p, gid)),
            }
        }
        for (p, gid) in fresh {
            self.points.push(MapPoint {
                id: self.next_id,
                position: *p,
                n_obs: 1,
                first_grid_id: gid,
            });
            self.next_id += 1;
        }
    }

    /// `id x y z n_obs` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# id x_mm y_mm z_mm n_obs\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                p.id, p.position.x, p.position.y, p.position.z, p.n_obs
            );
        }
        s
    }

    pub fn journal_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["patch_idx", "accepted", "yaw_deg", "tx", "ty", "tz", "overlap", "rmse"])
            .map_err(|e| Error::format(e.to_string()))?;
        for j in &self.journal {
            w.write_record([
                j.patch_idx.to_string(),
                j.accepted.to_string(),
                j.yaw_deg.to_string(),
                j.translation[0].to_string(),
                j.translation[1].to_string(),
                j.translation[2].to_string(),
                j.overlap.to_string(),
                j.rmse.to_string(),
            ])
            .map_err(|e| Error::format(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::format(e.to_string()))
    }

    pub fn save(&self, map_path: &Path, journal_path: &Path) -> Result<()> {
        std::fs::write(map_path, self.to_text())?;
        std::fs::write(journal_path, self.journal_csv()?)?;
        Ok(())
    }
}
