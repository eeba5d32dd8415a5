//! Six-DoF pose tracking from contact subsets.
//!
//! Angles use the Z-X-Y right-handed convention, `R = Rz(rz) * Rx(rx) * Ry(ry)`.

mod kabsch;
mod track_csv;
mod tracker;
mod yaw;

pub use kabsch::{fit_rigid, kabsch_rotation, match_by_id, Correspondences};
pub use track_csv::{
    ground_truth_from_csv, ground_truth_to_csv, load_ground_truth, load_track, save_ground_truth, save_track,
    track_from_csv, track_to_csv, GROUND_TRUTH_HEADER, TRACK_HEADER,
};
pub use tracker::{KabschAnchor, TrackRow, Tracker, TrackerParams};
pub use yaw::{pca_yaw, pca_yaw_depth_weighted, pca_yaw_weighted_xy, pca_yaw_xy, yaw_continuity, YawState};

use nalgebra::{Matrix3, Rotation3, Vector3};

/// Translation in millimetres and Z-X-Y Euler angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl Pose {
    pub const ZERO: Pose = Pose {
        tx: 0.0,
        ty: 0.0,
        tz: 0.0,
        rx: 0.0,
        ry: 0.0,
        rz: 0.0,
    };

    pub fn new(t: [f64; 3], r: [f64; 3]) -> Self {
        Self {
            tx: t[0],
            ty: t[1],
            tz: t[2],
            rx: r[0],
            ry: r[1],
            rz: r[2],
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.tx, self.ty, self.tz, self.rx, self.ry, self.rz]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new([a[0], a[1], a[2]], [a[3], a[4], a[5]])
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.tx, self.ty, self.tz)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        euler_zxy_to_matrix(self.rx, self.ry, self.rz)
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// `Rz(rz) * Rx(rx) * Ry(ry)`, angles in degrees.
pub fn euler_zxy_to_matrix(rx: f64, ry: f64, rz: f64) -> Matrix3<f64> {
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), rx.to_radians());
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), ry.to_radians());
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), rz.to_radians());
    (rz * rx * ry).into_inner()
}

/// Splits a rotation into Z-X-Y Euler angles `(rx, ry, rz)` in degrees.
///
/// Returns `None` within `1e-6` of the gimbal lock at `rx = +-90`.
pub fn matrix_to_euler_zxy(r: &Matrix3<f64>) -> Option<(f64, f64, f64)> {
    let s = r[(2, 1)].clamp(-1.0, 1.0);
    if 1.0 - s.abs() < 1e-12 {
        return None;
    }
    let rx = s.asin();
    let ry = (-r[(2, 0)]).atan2(r[(2, 2)]);
    let rz = (-r[(0, 1)]).atan2(r[(1, 1)]);
    Some((rx.to_degrees(), ry.to_degrees(), rz.to_degrees()))
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_deg(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Geodesic angle between two rotations in degrees.
pub fn rotation_distance_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let c = (((a.transpose() * b).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_round_trip() {
        for &(rx, ry, rz) in &[(0.0, 0.0, 0.0), (10.0, -20.0, 30.0), (-45.0, 80.0, -170.0), (1e-3, 2e-3, 179.0)] {
            let m = euler_zxy_to_matrix(rx, ry, rz);
            let (a, b, c) = matrix_to_euler_zxy(&m).unwrap();
            assert!((a - rx).abs() < 1e-9 && (b - ry).abs() < 1e-9 && (c - rz).abs() < 1e-9);
            assert!((m.determinant() - 1.0).abs() < 1e-12);
        }
        assert!(matrix_to_euler_zxy(&euler_zxy_to_matrix(90.0, 10.0, 5.0)).is_none());
    }

    #[test]
    fn convention_order() {
        // Rz * Rx * Ry: the yaw factor is applied last.
        let m = euler_zxy_to_matrix(0.0, 0.0, 90.0);
        let v = m * Vector3::x();
        assert!((v - Vector3::y()).norm() < 1e-12);
        let m = euler_zxy_to_matrix(90.0, 0.0, 0.0);
        assert!((m * Vector3::y() - Vector3::z()).norm() < 1e-12);
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_deg(180.0), 180.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert_eq!(wrap_deg(190.0), -170.0);
        assert_eq!(wrap_deg(-30.0), -30.0);
    }
}
