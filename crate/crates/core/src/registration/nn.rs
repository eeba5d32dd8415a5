//! Uniform-grid nearest-neighbour search.

use std::collections::HashMap;

use crate::geometry::WorldPoint;

type Cell = (i64, i64, i64);

/// Spatial hash over a fixed point set. Queries only search the 27 cells
/// around the query, so results beyond one cell size are not reported.
#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell: f64,
    points: Vec<WorldPoint>,
    buckets: HashMap<Cell, Vec<usize>>,
}

impl SpatialHash {
    pub fn new(points: &[WorldPoint], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        let mut buckets: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(key(p, cell)).or_default().push(i);
        }
        Self {
            cell,
            points: points.to_vec(),
            buckets,
        }
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn points(&self) -> &[WorldPoint] {
        &self.points
    }

    /// Index and distance of the closest point within `cell` of `q`.
    /// Ties go to the lower index so results are deterministic.
    pub fn nearest(&self, q: &WorldPoint) -> Option<(usize, f64)> {
        let (cx, cy, cz) = key(q, self.cell);
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(b) = self.buckets.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &i in b {
                        let p = &self.points[i];
                        let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
                        let better = match best {
                            None => true,
                            Some((j, bd)) => d2 < bd || (d2 == bd && i < j),
                        };
                        if better {
                            best = Some((i, d2));
                        }
                    }
                }
            }
        }
        best.map(|(i, d2)| (i, d2.sqrt())).filter(|&(_, d)| d <= self.cell)
    }
}

fn key(p: &WorldPoint, cell: f64) -> Cell {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}
