//! Workloads shared by the benchmarks.

use invcloud_core::experiment::Prepared;
use invcloud_core::pose::Correspondences;
use invcloud_core::{ContactParams, GradientField, GridSize, Scenario, WorldPoint};

/// Noisy yaw ramp with its reference cloud, as tracked at the sensor rate.
pub fn yaw_ramp(grid: GridSize) -> Prepared {
    let scenario = Scenario::preset("yaw_ramp").expect("built-in preset");
    Prepared::new(scenario, grid, ContactParams::default()).expect("preset renders")
}

/// `n` pairs related by a fixed rotation about a skew axis.
pub fn rotated_pairs(n: usize) -> Correspondences {
    let (s, c) = 0.3f64.sin_cos();
    let q: Vec<WorldPoint> = (0..n)
        .map(|i| {
            let t = i as f64;
            WorldPoint::new((1.3 * t).sin() * 8.0, (0.7 * t).cos() * 5.0, (2.1 * t).sin())
        })
        .collect();
    let p = q
        .iter()
        .map(|w| WorldPoint::new(c * w.x - s * w.y, s * w.x + c * w.y, w.z + 0.1 * w.x))
        .collect();
    Correspondences {
        ids: (1..=n as u64).collect(),
        p,
        q,
    }
}

/// Smooth gradient field of a full sensor image.
pub fn sensor_gradients(width: usize, height: usize) -> GradientField {
    let n = width * height;
    let gx = (0..n).map(|k| ((k % width) as f64 * 0.05).sin()).collect();
    let gy = (0..n).map(|k| ((k / width) as f64 * 0.07).cos()).collect();
    GradientField::new(width, height, 10.0, gx, gy).expect("consistent sizes")
}
