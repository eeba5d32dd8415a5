use crate::contact::ContactSubset;
use crate::error::{Error, Result};

/// Principal-axis orientation of a contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawState {
    /// Degrees; raw values lie in `(-90, 90]`, continued values are unwrapped.
    pub theta: f64,
    pub axis: [f64; 2],
    pub k: usize,
    /// Eigenvalue ratio `lambda1 / lambda2` of the XY covariance.
    pub aniso_ratio: f64,
}

/// Major axis and eigenvalue ratio of an XY point set.
pub fn pca_yaw_xy(pts: impl IntoIterator<Item = (f64, f64)> + Clone, threshold: f64) -> Result<YawState> {
    let pts: Vec<(f64, f64, f64)> = pts.into_iter().map(|(x, y)| (x, y, 1.0)).collect();
    pca_yaw_weighted_xy(pts, threshold)
}

/// As [`pca_yaw_xy`] with a non-negative weight per point.
pub fn pca_yaw_weighted_xy(pts: impl IntoIterator<Item = (f64, f64, f64)> + Clone, threshold: f64) -> Result<YawState> {
    let (mut n, mut sw, mut mx, mut my) = (0usize, 0.0, 0.0, 0.0);
    for (x, y, w) in pts.clone() {
        if w > 0.0 {
            n += 1;
            sw += w;
            mx += w * x;
            my += w * y;
        }
    }
    if n < 2 {
        return Err(Error::InsufficientPoints(n));
    }
    mx /= sw;
    my /= sw;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (x, y, w) in pts {
        if w > 0.0 {
            let (dx, dy) = (x - mx, y - my);
            a += w * dx * dx;
            b += w * dx * dy;
            c += w * dy * dy;
        }
    }
    a /= sw;
    b /= sw;
    c /= sw;
    let half_tr = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (half_tr + disc, half_tr - disc);
    let ratio = if l2 > 0.0 { l1 / l2 } else if l1 > 0.0 { f64::INFINITY } else { 1.0 };
    if !(ratio >= threshold) {
        return Err(Error::YawUnobservable { ratio, threshold });
    }
    let mut theta = 0.5 * (2.0 * b).atan2(a - c);
    // Keep the raw angle in (-90, 90].
    if theta <= -std::f64::consts::FRAC_PI_2 {
        theta += std::f64::consts::PI;
    }
    Ok(YawState {
        theta: theta.to_degrees(),
        axis: [theta.cos(), theta.sin()],
        k: n,
        aniso_ratio: ratio,
    })
}

/// Principal-axis yaw of a contact subset's XY projection.
pub fn pca_yaw(subset: &ContactSubset, threshold: f64) -> Result<YawState> {
    pca_yaw_xy(subset.world_points.iter().map(|p| (p.x, p.y)), threshold)
}

/// Principal-axis yaw with each point weighted by its depth beyond `floor_mm`,
/// so points entering or leaving the contact carry almost no weight. Falls
/// back to uniform weights when the subset has no depths.
pub fn pca_yaw_depth_weighted(subset: &ContactSubset, floor_mm: f64, threshold: f64) -> Result<YawState> {
    if subset.depth_mm.len() != subset.world_points.len() {
        return pca_yaw(subset, threshold);
    }
    pca_yaw_weighted_xy(
        subset
            .world_points
            .iter()
            .zip(&subset.depth_mm)
            .map(|(p, d)| (p.x, p.y, (d - floor_mm).max(0.0))),
        threshold,
    )
}

/// Picks the representative of `raw.theta` modulo 180 degrees nearest `prev.theta`.
pub fn yaw_continuity(prev: &YawState, raw: &YawState) -> YawState {
    let k = ((prev.theta - raw.theta) / 180.0).round();
    let mut out = *raw;
    if k != 0.0 {
        out.theta = raw.theta + 180.0 * k;
    }
    if prev.axis[0] * raw.axis[0] + prev.axis[1] * raw.axis[1] < 0.0 {
        out.axis = [-raw.axis[0], -raw.axis[1]];
    }
    out
}
