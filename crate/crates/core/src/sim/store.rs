//! On-disk frame directories written by the simulator and read by the trackers.
//!
//! Layout:
//! - `scenario.toml`: the scenario that produced the frames (optional when reading)
//! - `reference.ichm`: no-contact height map
//! - `markers.png`: marker mask of the no-contact frame (optional)
//! - `frame_NNNNNN.ichm`: height map of frame `NNNNNN`
//! - `mask_NNNNNN.png`: auxiliary contact mask of the same frame (optional)
//! - `ground_truth.csv`: object pose per frame (optional)

use std::path::{Path, PathBuf};

use super::{RenderedScenario, Scenario};
use crate::binary::BinaryImage;
use crate::error::{Error, Result};
use crate::geometry::HeightMap;
use crate::io::{load_height_map, load_mask_png, save_height_map, save_mask_png};
use crate::pose::{load_ground_truth, save_ground_truth, Pose};

pub const SCENARIO_FILE: &str = "scenario.toml";
pub const REFERENCE_FILE: &str = "reference.ichm";
pub const MARKERS_FILE: &str = "markers.png";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

fn frame_name(i: usize) -> String {
    format!("frame_{i:06}.ichm")
}

fn mask_name(i: usize) -> String {
    format!("mask_{i:06}.png")
}

/// Writes a rendered scenario as a frame directory, creating `dir` if needed.
pub fn write_frames_dir(dir: &Path, scenario: &Scenario, rendered: &RenderedScenario) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(SCENARIO_FILE), scenario.to_toml()?)?;
    save_height_map(&rendered.no_contact.height, dir.join(REFERENCE_FILE))?;
    if let Some(m) = &rendered.no_contact.marker_mask {
        save_mask_png(m, dir.join(MARKERS_FILE))?;
    }
    for f in &rendered.frames {
        save_height_map(&f.height, dir.join(frame_name(f.index)))?;
        save_mask_png(&f.observed_mask, dir.join(mask_name(f.index)))?;
    }
    let gt: Vec<(usize, Pose)> = rendered.frames.iter().map(|f| (f.index, f.pose_gt)).collect();
    save_ground_truth(&gt, scenario.sensor().frame_period_ms(), dir.join(GROUND_TRUTH_FILE))
}

/// A frame directory opened for reading. Frames are loaded on demand.
#[derive(Debug, Clone)]
pub struct FramesDir {
    root: PathBuf,
    indices: Vec<usize>,
}

impl FramesDir {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let root = dir.as_ref().to_path_buf();
        if !root.is_dir() {
            return Err(Error::format(format!("{} is not a directory", root.display())));
        }
        let mut indices = Vec::new();
        for entry in std::fs::read_dir(&root)? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if let Some(i) = name.strip_prefix("frame_").and_then(|s| s.strip_suffix(".ichm")) {
                indices.push(
                    i.parse()
                        .map_err(|_| Error::format(format!("bad frame file name {name}")))?,
                );
            }
        }
        indices.sort_unstable();
        Ok(Self { root, indices })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Frame indices present, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn reference(&self) -> Result<HeightMap> {
        load_height_map(self.root.join(REFERENCE_FILE))
    }

    pub fn markers(&self) -> Result<Option<BinaryImage>> {
        let p = self.root.join(MARKERS_FILE);
        p.exists().then(|| load_mask_png(p)).transpose()
    }

    pub fn scenario(&self) -> Result<Option<Scenario>> {
        let p = self.root.join(SCENARIO_FILE);
        p.exists()
            .then(|| Scenario::from_toml(&std::fs::read_to_string(p)?))
            .transpose()
    }

    pub fn ground_truth(&self) -> Result<Option<Vec<(usize, Pose)>>> {
        let p = self.root.join(GROUND_TRUTH_FILE);
        p.exists().then(|| load_ground_truth(p)).transpose()
    }

    /// Height map and auxiliary mask of frame `index`.
    pub fn frame(&self, index: usize) -> Result<(HeightMap, Option<BinaryImage>)> {
        let h = load_height_map(self.root.join(frame_name(index)))?;
        let m = self.root.join(mask_name(index));
        let aux = m.exists().then(|| load_mask_png(m)).transpose()?;
        Ok((h, aux))
    }

    /// Loads the frames in order.
    pub fn iter(&self) -> impl Iterator<Item = Result<(usize, HeightMap, Option<BinaryImage>)>> + '_ {
        self.indices.iter().map(|&i| self.frame(i).map(|(h, m)| (i, h, m)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Shape, TrajectorySection};

    #[test]
    fn frames_dir_round_trip() {
        let mut s = Scenario::preset("yaw_ramp").unwrap();
        s.trajectory = TrajectorySection::Static { frames: 3 };
        s.object = Shape::Sphere { radius_mm: 8.0 };
        let r = s.render().unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_frames_dir(dir.path(), &s, &r).unwrap();
        let fd = FramesDir::open(dir.path()).unwrap();
        assert_eq!(fd.indices(), &[0, 1, 2]);
        assert_eq!(fd.scenario().unwrap().unwrap(), s);
        assert_eq!(fd.markers().unwrap().as_ref(), r.no_contact.marker_mask.as_ref());
        let gt = fd.ground_truth().unwrap().unwrap();
        assert_eq!(gt.len(), 3);
        for (f, item) in r.frames.iter().zip(fd.iter()) {
            let (i, h, aux) = item.unwrap();
            assert_eq!(i, f.index);
            assert_eq!(aux.unwrap(), f.observed_mask);
            for (a, b) in h.data().iter().zip(f.height.data()) {
                assert_eq!(*a, *b as f32 as f64);
            }
        }
        assert!(FramesDir::open(dir.path().join("missing")).is_err());
    }
}
