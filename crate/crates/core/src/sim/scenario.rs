//! Declarative scenario files (TOML).

use serde::{Deserialize, Serialize};

use super::shapes::{scissors_template, Shape};
use super::trajectory::{Dof, Trajectory};
use super::{
    render_no_contact, render_sequence, render_slip_sequence, FrameBundle, MarkerLayout, NoiseConfig, Placement,
    SceneObject, SensorConfig, SlipTexture,
};
use crate::error::{Error, Result};
use crate::pose::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub width: usize,
    pub height: usize,
    pub ppmm: f64,
    pub fps: f64,
    pub marker_rows: usize,
    pub marker_cols: usize,
    pub marker_x0: f64,
    pub marker_y0: f64,
    pub marker_spacing: f64,
    pub marker_radius: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        let s = SensorConfig::default();
        Self {
            width: s.width,
            height: s.height,
            ppmm: s.ppmm,
            fps: s.fps,
            marker_rows: s.markers.rows,
            marker_cols: s.markers.cols,
            marker_x0: s.markers.x0,
            marker_y0: s.markers.y0,
            marker_spacing: s.markers.spacing,
            marker_radius: s.markers.dot_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementSection {
    pub indentation_mm: f64,
    pub x_mm: f64,
    pub y_mm: f64,
    pub yaw_deg: f64,
    pub rx_deg: f64,
    pub ry_deg: f64,
}

impl Default for PlacementSection {
    fn default() -> Self {
        let p = Placement::default();
        Self {
            indentation_mm: p.indentation_mm,
            x_mm: p.x_mm,
            y_mm: p.y_mm,
            yaw_deg: p.yaw_deg,
            rx_deg: p.rx_deg,
            ry_deg: p.ry_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySection {
    Static {
        frames: usize,
    },
    SingleAxis {
        dof: Dof,
        rate: f64,
        steps: usize,
    },
    ReturnLoop {
        /// `[tx, ty, tz, rx, ry, rz]` at the turning point.
        peak: [f64; 6],
        half: usize,
    },
    MultiContact {
        placements: Vec<[f64; 6]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub height_sigma_mm: f64,
    pub mask_flip_prob: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseConfig::default();
        Self {
            height_sigma_mm: n.height_sigma_mm,
            mask_flip_prob: n.mask_flip_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlipSection {
    pub enabled: bool,
    pub base_mm: f64,
    pub amplitude_mm: f64,
    pub wavelength_mm: f64,
}

impl Default for SlipSection {
    fn default() -> Self {
        let t = SlipTexture::default();
        Self {
            enabled: false,
            base_mm: t.base_mm,
            amplitude_mm: t.amplitude_mm,
            wavelength_mm: t.wavelength_mm,
        }
    }
}

/// A complete simulation description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sensor: SensorSection,
    pub object: Shape,
    #[serde(default)]
    pub placement: PlacementSection,
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub slip: SlipSection,
}

/// Rendered scenario.
#[derive(Debug, Clone)]
pub struct RenderedScenario {
    pub no_contact: FrameBundle,
    pub frames: Vec<FrameBundle>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::format(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format(format!("scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor().validate()?;
        self.object()?;
        self.trajectory()?;
        let n = self.noise();
        if !(n.height_sigma_mm >= 0.0) || !(0.0..=1.0).contains(&n.mask_flip_prob) {
            return Err(Error::invalid("noise parameters out of range"));
        }
        if self.slip.enabled && !self.trajectory()?.is_pure_yaw() {
            return Err(Error::invalid("slip scenarios require a pure Z rotation trajectory"));
        }
        Ok(())
    }

    pub fn sensor(&self) -> SensorConfig {
        let s = &self.sensor;
        SensorConfig {
            width: s.width,
            height: s.height,
            ppmm: s.ppmm,
            fps: s.fps,
            markers: MarkerLayout {
                rows: s.marker_rows,
                cols: s.marker_cols,
                x0: s.marker_x0,
                y0: s.marker_y0,
                spacing: s.marker_spacing,
                dot_radius: s.marker_radius,
            },
        }
    }

    pub fn object(&self) -> Result<SceneObject> {
        let p = &self.placement;
        SceneObject::new(
            self.object.clone(),
            Placement {
                indentation_mm: p.indentation_mm,
                x_mm: p.x_mm,
                y_mm: p.y_mm,
                yaw_deg: p.yaw_deg,
                rx_deg: p.rx_deg,
                ry_deg: p.ry_deg,
            },
        )
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        match &self.trajectory {
            TrajectorySection::Static { frames } => Trajectory::stationary(*frames),
            TrajectorySection::SingleAxis { dof, rate, steps } => Trajectory::single_axis(*dof, *rate, *steps),
            TrajectorySection::ReturnLoop { peak, half } => Trajectory::return_loop(Pose::from_array(*peak), *half),
            TrajectorySection::MultiContact { placements } => {
                Trajectory::multi_contact(placements.iter().map(|p| Pose::from_array(*p)).collect())
            }
        }
    }

    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig {
            height_sigma_mm: self.noise.height_sigma_mm,
            mask_flip_prob: self.noise.mask_flip_prob,
            seed: self.seed,
        }
    }

    pub fn slip_texture(&self) -> SlipTexture {
        SlipTexture {
            base_mm: self.slip.base_mm,
            amplitude_mm: self.slip.amplitude_mm,
            wavelength_mm: self.slip.wavelength_mm,
        }
    }

    pub fn render(&self) -> Result<RenderedScenario> {
        self.validate()?;
        let sensor = self.sensor();
        let noise = self.noise();
        let obj = self.object()?;
        let traj = self.trajectory()?;
        let frames = if self.slip.enabled {
            render_slip_sequence(&obj, &traj, &sensor, &noise, &self.slip_texture())?
        } else {
            render_sequence(&obj, &traj, &sensor, &noise)?
        };
        Ok(RenderedScenario {
            no_contact: render_no_contact(&sensor, &noise)?,
            frames,
        })
    }

    fn base(object: Shape, trajectory: TrajectorySection, indentation_mm: f64) -> Self {
        Self {
            seed: 0,
            sensor: SensorSection::default(),
            object,
            placement: PlacementSection {
                indentation_mm,
                ..PlacementSection::default()
            },
            trajectory,
            noise: NoiseSection::default(),
            slip: SlipSection::default(),
        }
    }

    /// Names accepted by [`Scenario::preset`].
    pub const PRESETS: [&'static str; 8] = [
        "static",
        "yaw_ramp",
        "slip",
        "return",
        "translate_x",
        "sphere",
        "sphere_static",
        "scissors_slam",
    ];

    /// Built-in scenarios used by the experiments.
    pub fn preset(name: &str) -> Result<Self> {
        let ellipsoid = Shape::Ellipsoid {
            a_mm: 16.0,
            b_mm: 6.4,
            c_mm: 10.0,
        };
        let sphere = Shape::Sphere { radius_mm: 10.0 };
        let s = match name {
            "static" => Self::base(ellipsoid, TrajectorySection::Static { frames: 1500 }, 1.5),
            "yaw_ramp" => Self::base(
                ellipsoid,
                TrajectorySection::SingleAxis {
                    dof: Dof::Rz,
                    rate: -1.0,
                    steps: 90,
                },
                1.5,
            ),
            "slip" => {
                let mut s = Self::base(
                    ellipsoid,
                    TrajectorySection::SingleAxis {
                        dof: Dof::Rz,
                        rate: -1.0,
                        steps: 90,
                    },
                    1.5,
                );
                s.slip.enabled = true;
                s
            }
            "return" => Self::base(
                ellipsoid,
                TrajectorySection::ReturnLoop {
                    peak: [2.0, -1.5, 0.0, 0.0, 0.0, -30.0],
                    half: 30,
                },
                1.5,
            ),
            "translate_x" => Self::base(
                ellipsoid,
                TrajectorySection::SingleAxis {
                    dof: Dof::Tx,
                    rate: 0.1,
                    steps: 50,
                },
                1.5,
            ),
            "sphere" => Self::base(
                sphere,
                TrajectorySection::SingleAxis {
                    dof: Dof::Tx,
                    rate: 0.05,
                    steps: 60,
                },
                3.0,
            ),
            "sphere_static" => Self::base(sphere, TrajectorySection::Static { frames: 200 }, 3.0),
            "scissors_slam" => Self::base(
                scissors_template(),
                TrajectorySection::MultiContact {
                    placements: scissors_scan_placements(),
                },
                0.8,
            ),
            other => {
                return Err(Error::invalid(format!(
                    "unknown preset {other:?}; expected one of {:?}",
                    Self::PRESETS
                )))
            }
        };
        s.validate()?;
        Ok(s)
    }
}

/// Object point seen at the sensor centre and yaw for each scan patch.
pub const SCISSORS_SCAN: [(f64, f64, f64); 5] = [
    (-24.0, 0.0, 0.0),
    (-13.0, 1.5, 8.0),
    (-2.0, 0.0, -5.0),
    (9.0, 0.5, 12.0),
    (20.0, 0.0, 4.0),
];

/// Relative poses that bring each scan point of the scissors under the sensor centre.
pub fn scissors_scan_placements() -> Vec<[f64; 6]> {
    SCISSORS_SCAN
        .iter()
        .map(|&(x, y, yaw)| {
            let (s, c) = yaw.to_radians().sin_cos();
            [-(c * x - s * y), -(s * x + c * y), 0.0, 0.0, 0.0, yaw]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for name in Scenario::PRESETS {
            let s = Scenario::preset(name).unwrap();
            let text = s.to_toml().unwrap();
            assert_eq!(Scenario::from_toml(&text).unwrap(), s, "{name}");
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let ok = "seed = 3\n[object]\nkind = \"sphere\"\nradius_mm = 10.0\n[trajectory]\nkind = \"static\"\nframes = 4\n";
        let s = Scenario::from_toml(ok).unwrap();
        assert_eq!(s.trajectory().unwrap().len(), 4);
        assert!(Scenario::from_toml(&format!("{ok}bogus = 1\n")).is_err());
        assert!(Scenario::from_toml(&ok.replace("radius_mm = 10.0", "radius_mm = -1.0")).is_err());
        assert!(Scenario::from_toml(&ok.replace("radius_mm", "radius")).is_err());
        assert!(Scenario::preset("nope").is_err());
    }
}
