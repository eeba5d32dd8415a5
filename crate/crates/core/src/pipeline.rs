//! End-to-end helpers: reference initialisation and frame-by-frame tracking.

use crate::binary::BinaryImage;
use crate::contact::{ContactFrame, ContactParams};
use crate::error::Result;
use crate::geometry::HeightMap;
use crate::pose::{TrackRow, Tracker, TrackerParams};
use crate::reference::{detect_markers, interpolate_grid, ReferenceCloud};

/// Dense grid size in points, e.g. 19 x 25.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSize {
    pub rows: usize,
    pub cols: usize,
}

impl GridSize {
    pub const DEFAULT: GridSize = GridSize { rows: 19, cols: 25 };
    pub const DENSE: GridSize = GridSize { rows: 31, cols: 41 };
}

impl Default for GridSize {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Builds the reference cloud from a no-contact frame.
pub fn init_cloud(
    no_contact: &HeightMap,
    marker_mask: &BinaryImage,
    markers: (usize, usize),
    grid: GridSize,
) -> Result<ReferenceCloud> {
    let m = detect_markers(no_contact, marker_mask, markers.0, markers.1)?;
    if grid.rows == 0 || grid.cols == 0 {
        return Err(crate::Error::invalid("grid size must be positive"));
    }
    interpolate_grid(&m, no_contact, grid.rows - 1, grid.cols - 1)
}

/// Reference data shared by all frames of a run.
#[derive(Debug, Clone)]
pub struct Session {
    pub cloud: ReferenceCloud,
    pub reference: HeightMap,
    pub contact: ContactParams,
}

impl Session {
    pub fn new(cloud: ReferenceCloud, reference: HeightMap, contact: ContactParams) -> Self {
        Self {
            cloud,
            reference,
            contact,
        }
    }

    pub fn observe(&self, index: usize, height: HeightMap, aux: Option<&BinaryImage>) -> Result<ContactFrame> {
        ContactFrame::observe(index, &self.cloud, &self.reference, height, aux, &self.contact)
    }

    pub fn tracker(&self, params: TrackerParams) -> Tracker {
        Tracker::new(params, self.cloud.frame().mm_per_world())
    }

    /// Runs the id-anchored tracker over `(index, height, aux)` frames.
    pub fn track<I>(&self, params: TrackerParams, frames: I) -> Result<Vec<TrackRow>>
    where
        I: IntoIterator<Item = (usize, HeightMap, Option<BinaryImage>)>,
    {
        let mut tracker = self.tracker(params);
        let mut rows = Vec::new();
        for (i, h, aux) in frames {
            let f = self.observe(i, h, aux.as_ref())?;
            rows.push(tracker.step(&f));
        }
        Ok(rows)
    }
}
