//! Synthetic tactile frames with exact ground truth.
//!
//! The gel is a rigid plane at `z = 0`; an object pressed into it leaves a
//! depression equal to its penetration depth. Heights are stored as negative
//! depressions in pixel-height units (`mm * ppmm`).

mod scenario;
mod shapes;
mod store;
mod trajectory;

pub use scenario::{
    scissors_scan_placements, NoiseSection, PlacementSection, RenderedScenario, Scenario, SensorSection, SlipSection,
    TrajectorySection, SCISSORS_SCAN,
};
pub use shapes::{
    distance_to_outline, point_in_polygon, polygon_is_simple, scissors_template, segment_distance, Relief, Shape,
};
pub use store::{
    write_frames_dir, FramesDir, GROUND_TRUTH_FILE, MARKERS_FILE, REFERENCE_FILE, SCENARIO_FILE,
};
pub use trajectory::{Dof, Trajectory, TrajectoryKind, MAX_STEP_DEG, MAX_STEP_MM};

use nalgebra::{Matrix3, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::binary::BinaryImage;
use crate::error::{Error, Result};
use crate::geometry::{HeightMap, PixelCoord};
use crate::pose::{euler_zxy_to_matrix, Pose};

/// Dot grid printed on the gel, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerLayout {
    pub rows: usize,
    pub cols: usize,
    pub x0: f64,
    pub y0: f64,
    pub spacing: f64,
    pub dot_radius: f64,
}

impl Default for MarkerLayout {
    fn default() -> Self {
        Self {
            rows: 7,
            cols: 9,
            x0: 27.5,
            y0: 20.5,
            spacing: 33.0,
            dot_radius: 3.0,
        }
    }
}

impl MarkerLayout {
    pub fn centers(&self) -> Vec<PixelCoord> {
        let mut v = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                v.push(PixelCoord::new(
                    self.x0 + self.spacing * c as f64,
                    self.y0 + self.spacing * r as f64,
                ));
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    pub width: usize,
    pub height: usize,
    pub ppmm: f64,
    pub fps: f64,
    pub markers: MarkerLayout,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            ppmm: 10.0,
            fps: 25.0,
            markers: MarkerLayout::default(),
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        crate::geometry::image_center_and_scale(self.width, self.height, self.ppmm)?;
        if self.width < 2 || self.height < 2 {
            return Err(Error::invalid("sensor must be at least 2x2 pixels"));
        }
        if !(self.fps > 0.0) {
            return Err(Error::invalid("frame rate must be positive"));
        }
        Ok(())
    }

    pub fn frame_period_ms(&self) -> f64 {
        1000.0 / self.fps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Standard deviation of additive height noise in millimetres.
    pub height_sigma_mm: f64,
    /// Per-pixel probability of flipping the observed contact mask.
    pub mask_flip_prob: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            height_sigma_mm: 0.02,
            mask_flip_prob: 0.002,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            height_sigma_mm: 0.0,
            mask_flip_prob: 0.0,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Initial placement of an object; trajectory poses are applied on top of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub indentation_mm: f64,
    pub x_mm: f64,
    pub y_mm: f64,
    pub yaw_deg: f64,
    pub rx_deg: f64,
    pub ry_deg: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Self {
            indentation_mm: 1.0,
            x_mm: 0.0,
            y_mm: 0.0,
            yaw_deg: 0.0,
            rx_deg: 0.0,
            ry_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub shape: Shape,
    pub placement: Placement,
}

impl SceneObject {
    pub fn new(shape: Shape, placement: Placement) -> Result<Self> {
        shape.validate()?;
        Ok(Self { shape, placement })
    }

    /// Body-to-sensor rotation and translation (mm) at a relative pose.
    ///
    /// The pose rotates about the body origin, so pure rotations keep the
    /// lowest point of the initial placement fixed.
    pub fn transform(&self, pose: &Pose) -> (Matrix3<f64>, Vector3<f64>) {
        let p = &self.placement;
        let base = euler_zxy_to_matrix(p.rx_deg, p.ry_deg, p.yaw_deg);
        let m = pose.rotation() * base;
        let t = Vector3::new(p.x_mm + pose.tx, p.y_mm + pose.ty, -p.indentation_mm + pose.tz);
        (m, t)
    }
}

/// Lower-surface height in sensor millimetres over sensor point `(x, y)`.
fn surface_z(shape: &Shape, mt: &Matrix3<f64>, t: &Vector3<f64>, extent: f64, x: f64, y: f64) -> Option<f64> {
    let dir = mt.column(2);
    if dir.z <= 1e-6 {
        return None;
    }
    let mut z = t.z;
    let mut b = mt * (Vector3::new(x, y, z) - t);
    if b.x.hypot(b.y) > extent * 1.5 + 1e-9 {
        return None;
    }
    for _ in 0..12 {
        let f = shape.lower_surface(b.x, b.y)?;
        let err = f - b.z;
        if err.abs() < 1e-10 {
            break;
        }
        z += err / dir.z;
        b = mt * (Vector3::new(x, y, z) - t);
    }
    Some(z)
}

/// Penetration depth (mm) at every pixel for an object at `pose`.
pub fn penetration_field(obj: &SceneObject, pose: &Pose, sensor: &SensorConfig) -> Vec<f64> {
    let (m, t) = obj.transform(pose);
    let mt = m.transpose();
    let extent = obj.shape.extent();
    let (w, h) = (sensor.width, sensor.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut out = vec![0.0; w * h];
    for v in 0..h {
        let y = (cy - v as f64) / sensor.ppmm;
        for u in 0..w {
            let x = (u as f64 - cx) / sensor.ppmm;
            if let Some(z) = surface_z(&obj.shape, &mt, &t, extent, x, y) {
                if z < 0.0 {
                    out[v * w + u] = -z;
                }
            }
        }
    }
    out
}

/// One rendered observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub index: usize,
    pub height: HeightMap,
    /// `penetration > 0`, noiseless.
    pub contact_mask_gt: BinaryImage,
    /// Ground-truth mask with per-pixel flips, standing in for a colour channel.
    pub observed_mask: BinaryImage,
    pub marker_mask: Option<BinaryImage>,
    pub pose_gt: Pose,
    pub noise_seed: u64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-frame noise seed derived from the scenario seed.
pub fn frame_seed(seed: u64, index: u64) -> u64 {
    splitmix(seed ^ splitmix(index))
}

const NO_CONTACT_INDEX: u64 = u64::MAX;

fn apply_noise(
    depth_mm: &[f64],
    sensor: &SensorConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<(Vec<f64>, BinaryImage, BinaryImage)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (sensor.width, sensor.height);
    let mut heights: Vec<f64> = depth_mm.iter().map(|d| -d * sensor.ppmm).collect();
    if noise.height_sigma_mm > 0.0 {
        let n = Normal::new(0.0, noise.height_sigma_mm * sensor.ppmm)
            .map_err(|e| Error::invalid(format!("height noise: {e}")))?;
        for v in heights.iter_mut() {
            *v += n.sample(&mut rng);
        }
    }
    let gt = BinaryImage::from_bits(w, h, depth_mm.iter().map(|&d| d > 0.0).collect())?;
    let observed = if noise.mask_flip_prob > 0.0 {
        let bits = gt
            .bits()
            .iter()
            .map(|&b| b ^ (rng.random::<f64>() < noise.mask_flip_prob))
            .collect();
        BinaryImage::from_bits(w, h, bits)?
    } else {
        gt.clone()
    };
    Ok((heights, gt, observed))
}

fn check_noise(noise: &NoiseConfig) -> Result<()> {
    if !(noise.height_sigma_mm >= 0.0) || !(0.0..=1.0).contains(&noise.mask_flip_prob) {
        return Err(Error::invalid("noise parameters out of range"));
    }
    Ok(())
}

/// Renders one frame at a relative pose; `index` selects the noise stream.
pub fn render_frame(
    obj: &SceneObject,
    pose: &Pose,
    sensor: &SensorConfig,
    noise: &NoiseConfig,
    index: usize,
) -> Result<FrameBundle> {
    sensor.validate()?;
    check_noise(noise)?;
    let depth = penetration_field(obj, pose, sensor);
    let seed = frame_seed(noise.seed, index as u64);
    let (heights, gt, observed) = apply_noise(&depth, sensor, noise, seed)?;
    Ok(FrameBundle {
        index,
        height: HeightMap::new(sensor.width, sensor.height, sensor.ppmm, heights)?,
        contact_mask_gt: gt,
        observed_mask: observed,
        marker_mask: None,
        pose_gt: *pose,
        noise_seed: seed,
    })
}

/// Binary image of the printed marker dots.
pub fn render_marker_mask(sensor: &SensorConfig) -> BinaryImage {
    let centers = sensor.markers.centers();
    let r = sensor.markers.dot_radius;
    let mut img = BinaryImage::new(sensor.width, sensor.height);
    for c in &centers {
        let (x0, x1) = ((c.x - r).floor().max(0.0) as usize, (c.x + r).ceil() as usize);
        let (y0, y1) = ((c.y - r).floor().max(0.0) as usize, (c.y + r).ceil() as usize);
        for y in y0..=y1.min(sensor.height - 1) {
            for x in x0..=x1.min(sensor.width - 1) {
                if (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2) <= r * r {
                    img.set(x, y, true);
                }
            }
        }
    }
    img
}

/// The untouched gel with its marker mask.
pub fn render_no_contact(sensor: &SensorConfig, noise: &NoiseConfig) -> Result<FrameBundle> {
    sensor.validate()?;
    check_noise(noise)?;
    let depth = vec![0.0; sensor.width * sensor.height];
    let seed = frame_seed(noise.seed, NO_CONTACT_INDEX);
    let (heights, gt, observed) = apply_noise(&depth, sensor, noise, seed)?;
    Ok(FrameBundle {
        index: 0,
        height: HeightMap::new(sensor.width, sensor.height, sensor.ppmm, heights)?,
        contact_mask_gt: gt,
        observed_mask: observed,
        marker_mask: Some(render_marker_mask(sensor)),
        pose_gt: Pose::ZERO,
        noise_seed: seed,
    })
}

/// Renders a whole trajectory in parallel; frames come back in schedule order.
pub fn render_sequence(
    obj: &SceneObject,
    traj: &Trajectory,
    sensor: &SensorConfig,
    noise: &NoiseConfig,
) -> Result<Vec<FrameBundle>> {
    traj.schedule()
        .par_iter()
        .map(|(i, pose)| render_frame(obj, pose, sensor, noise, *i))
        .collect()
}

/// Depth texture that stays fixed in the sensor frame during slip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipTexture {
    pub base_mm: f64,
    pub amplitude_mm: f64,
    pub wavelength_mm: f64,
}

impl Default for SlipTexture {
    fn default() -> Self {
        Self {
            base_mm: 1.0,
            amplitude_mm: 0.3,
            wavelength_mm: 3.0,
        }
    }
}

impl SlipTexture {
    /// Depth in mm at sensor point `(x, y)`; stays within `base +- amplitude`.
    pub fn depth(&self, x: f64, y: f64) -> f64 {
        let k = std::f64::consts::TAU / self.wavelength_mm;
        let t = 0.5 * (k * x + 0.3).sin() * (0.8 * k * y).cos() + 0.5 * (k * (x + y) / 1.7 + 1.1).sin();
        self.base_mm + self.amplitude_mm * t
    }
}

/// Frames where the contact silhouette turns with the object while the depth
/// inside it stays fixed to the sensor.
pub fn render_slip_sequence(
    obj: &SceneObject,
    traj: &Trajectory,
    sensor: &SensorConfig,
    noise: &NoiseConfig,
    texture: &SlipTexture,
) -> Result<Vec<FrameBundle>> {
    if !traj.is_pure_yaw() {
        return Err(Error::invalid("slip sequences require a pure Z rotation"));
    }
    sensor.validate()?;
    check_noise(noise)?;
    let (w, h) = (sensor.width, sensor.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let field: Vec<f64> = (0..w * h)
        .map(|i| {
            let x = ((i % w) as f64 - cx) / sensor.ppmm;
            let y = (cy - (i / w) as f64) / sensor.ppmm;
            texture.depth(x, y).max(0.0)
        })
        .collect();
    traj.schedule()
        .par_iter()
        .map(|(i, pose)| {
            let silhouette = penetration_field(obj, pose, sensor);
            let depth: Vec<f64> = silhouette
                .iter()
                .zip(&field)
                .map(|(&p, &f)| if p > 0.0 { f } else { 0.0 })
                .collect();
            let seed = frame_seed(noise.seed, *i as u64);
            let (heights, gt, observed) = apply_noise(&depth, sensor, noise, seed)?;
            Ok(FrameBundle {
                index: *i,
                height: HeightMap::new(w, h, sensor.ppmm, heights)?,
                contact_mask_gt: gt,
                observed_mask: observed,
                marker_mask: None,
                pose_gt: *pose,
                noise_seed: seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::pca_yaw_xy;

    fn sphere() -> SceneObject {
        SceneObject::new(Shape::Sphere { radius_mm: 10.0 }, Placement::default()).unwrap()
    }

    #[test]
    fn sphere_cap_radius() {
        let s = SensorConfig::default();
        let f = render_frame(&sphere(), &Pose::ZERO, &s, &NoiseConfig::noiseless(0), 0).unwrap();
        let r_px = (f.contact_mask_gt.count() as f64 / std::f64::consts::PI).sqrt();
        let expected = (2.0f64 * 10.0 * 1.0 - 1.0).sqrt() * s.ppmm;
        assert!((r_px - expected).abs() < 1.0, "{r_px} vs {expected}");
        // Deepest point sits at the image centre.
        let min = f.height.data().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min + 10.0).abs() < 0.05);
    }

    #[test]
    fn ellipse_orientation_and_empty() {
        let s = SensorConfig::default();
        let obj = SceneObject::new(
            Shape::Ellipsoid { a_mm: 16.0, b_mm: 6.4, c_mm: 10.0 },
            Placement { indentation_mm: 1.5, ..Placement::default() },
        )
        .unwrap();
        for phi in [0.0, 25.0, -60.0] {
            let pose = Pose::new([0.0; 3], [0.0, 0.0, phi]);
            let f = render_frame(&obj, &pose, &s, &NoiseConfig::noiseless(0), 0).unwrap();
            let pts: Vec<(f64, f64)> = f.contact_mask_gt.ones().map(|(x, y)| (x as f64, -(y as f64))).collect();
            let yaw = pca_yaw_xy(pts, 1.15).unwrap();
            assert!((yaw.theta - phi).abs() < 1.0, "{phi} -> {}", yaw.theta);
        }
        let lifted = Pose::new([0.0, 0.0, 1.5], [0.0; 3]);
        let f = render_frame(&obj, &lifted, &s, &NoiseConfig::noiseless(0), 0).unwrap();
        assert!(f.contact_mask_gt.is_empty());
    }

    #[test]
    fn deterministic_and_noisy() {
        let s = SensorConfig::default();
        let n = NoiseConfig::default().with_seed(5);
        let a = render_frame(&sphere(), &Pose::ZERO, &s, &n, 3).unwrap();
        let b = render_frame(&sphere(), &Pose::ZERO, &s, &n, 3).unwrap();
        assert_eq!(a, b);
        let c = render_frame(&sphere(), &Pose::ZERO, &s, &n, 4).unwrap();
        assert_ne!(a.height, c.height);
        assert_eq!(a.contact_mask_gt, c.contact_mask_gt);
    }

    #[test]
    fn scale_independence() {
        let s1 = SensorConfig::default();
        let s2 = SensorConfig { ppmm: 20.0, ..s1 };
        let obj = |k: f64| {
            SceneObject::new(
                Shape::Ellipsoid { a_mm: 16.0 * k, b_mm: 6.4 * k, c_mm: 10.0 * k },
                Placement { indentation_mm: 1.5 * k, x_mm: 1.0 * k, yaw_deg: 20.0, ..Placement::default() },
            )
            .unwrap()
        };
        let n = NoiseConfig::noiseless(0);
        let a = render_frame(&obj(1.0), &Pose::ZERO, &s1, &n, 0).unwrap();
        let b = render_frame(&obj(0.5), &Pose::ZERO, &s2, &n, 0).unwrap();
        assert_eq!(a.contact_mask_gt, b.contact_mask_gt);
    }

    #[test]
    fn slip_keeps_heights() {
        let s = SensorConfig::default();
        let obj = SceneObject::new(
            Shape::Ellipsoid { a_mm: 16.0, b_mm: 6.4, c_mm: 10.0 },
            Placement { indentation_mm: 1.5, ..Placement::default() },
        )
        .unwrap();
        let traj = Trajectory::single_axis(Dof::Rz, -1.0, 90).unwrap();
        let frames = render_slip_sequence(&obj, &traj, &s, &NoiseConfig::noiseless(0), &SlipTexture::default()).unwrap();
        assert_eq!(frames.len(), 91);
        let (a, b) = (&frames[0], &frames[90]);
        let both = a.contact_mask_gt.and(&b.contact_mask_gt).unwrap();
        assert!(both.count() > 0);
        for (x, y) in both.ones() {
            assert_eq!(a.height.get(x, y), b.height.get(x, y));
        }
        assert_ne!(a.contact_mask_gt, b.contact_mask_gt);
        let bad = Trajectory::single_axis(Dof::Tx, 0.1, 5).unwrap();
        assert!(render_slip_sequence(&obj, &bad, &s, &NoiseConfig::noiseless(0), &SlipTexture::default()).is_err());
    }

    #[test]
    fn marker_mask_dots() {
        let s = SensorConfig::default();
        let m = render_marker_mask(&s);
        let comps = m.components();
        assert_eq!(comps.stats.len(), 63);
        for (st, c) in comps.stats.iter().zip(s.markers.centers()) {
            let (x, y) = st.centroid();
            assert!((x - c.x).abs() < 1e-9 && (y - c.y).abs() < 1e-9);
        }
    }
}
