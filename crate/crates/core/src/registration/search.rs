//! Coarse in-plane search ranking rigid candidates by footprint agreement.

use crate::geometry::{point_in_polygon, WorldPoint};

use super::footprint::SensorFootprint;
use super::{PatchCloud, RigidTransform};

/// Raster pitch of the lattice fallback field.
const RASTER_CELL_MM: f64 = 0.05;
/// Distance over which a miss penalty ramps from a hit to a full miss.
const MISS_RAMP_MM: f64 = 1.0;
/// Height mismatch over which the same ramp runs.
const HEIGHT_RAMP_MM: f64 = 0.2;

/// XY proximity field of a patch: each cell near the patch holds the XY
/// distance to the nearest point and that point's height.
pub(crate) struct Footprint<'a> {
    patch: &'a PatchCloud,
    origin: [f64; 2],
    cell: f64,
    w: usize,
    h: usize,
    /// Height of the nearest point and its squared XY distance, per cell.
    occ: Vec<(f64, f64)>,
    gate: f64,
    z_tol: f64,
}

impl<'a> Footprint<'a> {
    pub(crate) fn new(patch: &'a PatchCloud, gate: f64, z_tol: f64) -> Self {
        let cell = RASTER_CELL_MM;
        let reach = gate + MISS_RAMP_MM;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &patch.points {
            lo = [lo[0].min(p.x), lo[1].min(p.y)];
            hi = [hi[0].max(p.x), hi[1].max(p.y)];
        }
        let origin = [lo[0] - reach - cell, lo[1] - reach - cell];
        let w = ((hi[0] + reach + cell - origin[0]) / cell).ceil() as usize + 1;
        let h = ((hi[1] + reach + cell - origin[1]) / cell).ceil() as usize + 1;
        let mut occ = vec![(f64::NAN, f64::INFINITY); w * h];
        let r = (reach / cell).ceil() as i64;
        for p in &patch.points {
            let cx = ((p.x - origin[0]) / cell).floor() as i64;
            let cy = ((p.y - origin[1]) / cell).floor() as i64;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (x, y) = (cx + dx, cy + dy);
                    if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                        continue;
                    }
                    // Test the cell centre against the gate disc.
                    let px = origin[0] + (x as f64 + 0.5) * cell;
                    let py = origin[1] + (y as f64 + 0.5) * cell;
                    let d2 = (px - p.x).powi(2) + (py - p.y).powi(2);
                    let c = &mut occ[y as usize * w + x as usize];
                    if d2 <= reach * reach && d2 < c.1 {
                        *c = (p.z, d2);
                    }
                }
            }
        }
        Self {
            patch,
            origin,
            cell,
            w,
            h,
            occ,
            gate,
            z_tol,
        }
    }

    /// +1 for a point that lands on the footprint at the right height, ramping
    /// down to -2 as it moves off the footprint or away in height.
    fn agreement(&self, x: f64, y: f64, z: f64) -> f64 {
        let cx = ((x - self.origin[0]) / self.cell).floor();
        let cy = ((y - self.origin[1]) / self.cell).floor();
        if cx < 0.0 || cy < 0.0 || cx >= self.w as f64 || cy >= self.h as f64 {
            return -2.0;
        }
        let (hz, d2) = self.occ[cy as usize * self.w + cx as usize];
        if !d2.is_finite() {
            return -2.0;
        }
        ramp(d2.sqrt(), hz - z, self.gate, self.z_tol)
    }

    fn sees(&self, x: f64, y: f64) -> bool {
        self.patch.view.len() < 3 || point_in_polygon(&self.patch.view, x, y)
    }
}

/// Agreement ramp shared by both field kinds.
fn ramp(d: f64, dz: f64, gate: f64, z_tol: f64) -> f64 {
    let off = (d - gate).max(0.0) / MISS_RAMP_MM + (dz.abs() - z_tol).max(0.0) / HEIGHT_RAMP_MM;
    1.0 - 3.0 * off.min(1.0)
}

/// Scoring field of one patch: the recorded contact footprint when the patch
/// carries one, otherwise a raster built from its lattice points.
pub(crate) enum Field<'a> {
    Lattice(Footprint<'a>),
    Sensor {
        fp: &'a SensorFootprint,
        to_sensor: RigidTransform,
        samples: Vec<WorldPoint>,
        gate: f64,
        z_tol: f64,
    },
}

impl<'a> Field<'a> {
    pub(crate) fn new(patch: &'a PatchCloud, gate: f64, z_tol: f64) -> Self {
        match &patch.footprint {
            Some(fp) => Field::Sensor {
                fp,
                to_sensor: patch.sensor_pose.inverse(),
                samples: fp.samples().iter().map(|p| patch.sensor_pose.apply(p)).collect(),
                gate: fp.pixel_mm(),
                z_tol,
            },
            None => Field::Lattice(Footprint::new(patch, gate, z_tol)),
        }
    }

    fn points(&self) -> &[WorldPoint] {
        match self {
            Field::Lattice(f) => &f.patch.points,
            Field::Sensor { samples, .. } => samples,
        }
    }

    /// `None` when the point falls outside the patch's view.
    fn agreement(&self, x: f64, y: f64, z: f64) -> Option<f64> {
        match self {
            Field::Lattice(f) => f.sees(x, y).then(|| f.agreement(x, y, z)),
            Field::Sensor {
                fp,
                to_sensor,
                gate,
                z_tol,
                ..
            } => {
                let q = to_sensor.apply(&WorldPoint::new(x, y, z));
                fp.probe(q.x, q.y).map(|(d, hz)| ramp(d, hz - q.z, *gate, *z_tol))
            }
        }
    }
}

/// Footprint agreement for `t` mapping `b` into `a`'s frame: the summed
/// per-point agreement of points inside the other patch's view, normalised by
/// the total point count.
pub(crate) fn footprint_agreement(fa: &Field, fb: &Field, t: &RigidTransform) -> f64 {
    let back = t.inverse();
    let mut sum = 0.0;
    for p in fb.points() {
        let q = t.apply(p);
        sum += fa.agreement(q.x, q.y, q.z).unwrap_or(0.0);
    }
    for p in fa.points() {
        let q = back.apply(p);
        sum += fb.agreement(q.x, q.y, q.z).unwrap_or(0.0);
    }
    sum / (fa.points().len() + fb.points().len()) as f64
}
