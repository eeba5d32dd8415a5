use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dof {
    Tx,
    Ty,
    Tz,
    Rx,
    Ry,
    Rz,
}

impl Dof {
    pub const ALL: [Dof; 6] = [Dof::Tx, Dof::Ty, Dof::Tz, Dof::Rx, Dof::Ry, Dof::Rz];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Dof::Rx | Dof::Ry | Dof::Rz)
    }

    pub fn name(self) -> &'static str {
        ["tx", "ty", "tz", "rx", "ry", "rz"][self.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryKind {
    Static,
    SingleAxis { dof: Dof, rate: f64 },
    ReturnLoop { peak: Pose },
    MultiContact,
}

/// Ground-truth pose schedule relative to the initial placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    kind: TrajectoryKind,
    schedule: Vec<(usize, Pose)>,
}

/// Largest allowed per-frame change for continuous trajectories.
pub const MAX_STEP_MM: f64 = 2.0;
pub const MAX_STEP_DEG: f64 = 5.0;

impl Trajectory {
    pub fn new(kind: TrajectoryKind, schedule: Vec<(usize, Pose)>) -> Result<Self> {
        if schedule.is_empty() {
            return Err(Error::invalid("empty trajectory"));
        }
        for w in schedule.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid(format!(
                    "frame indices must increase ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if schedule.iter().any(|(_, p)| !p.is_finite()) {
            return Err(Error::invalid("non-finite pose in trajectory"));
        }
        if kind != TrajectoryKind::MultiContact {
            for w in schedule.windows(2) {
                let (a, b) = (w[0].1.as_array(), w[1].1.as_array());
                for (k, (x, y)) in a.iter().zip(&b).enumerate() {
                    let limit = if k < 3 { MAX_STEP_MM } else { MAX_STEP_DEG };
                    if (y - x).abs() > limit {
                        return Err(Error::invalid(format!(
                            "discontinuous schedule at frame {}: {} jumps by {}",
                            w[1].0,
                            Dof::ALL[k].name(),
                            y - x
                        )));
                    }
                }
            }
        }
        Ok(Self { kind, schedule })
    }

    /// `frames` identical zero poses.
    pub fn stationary(frames: usize) -> Result<Self> {
        Self::new(TrajectoryKind::Static, (0..frames).map(|i| (i, Pose::ZERO)).collect())
    }

    /// Constant-rate motion along one axis over `steps` steps (`steps + 1` frames).
    pub fn single_axis(dof: Dof, rate: f64, steps: usize) -> Result<Self> {
        let schedule = (0..=steps)
            .map(|i| {
                let mut a = [0.0; 6];
                a[dof.index()] = rate * i as f64;
                (i, Pose::from_array(a))
            })
            .collect();
        Self::new(TrajectoryKind::SingleAxis { dof, rate }, schedule)
    }

    /// Linear excursion to `peak` over `half` steps and back; first and last poses are identical.
    pub fn return_loop(peak: Pose, half: usize) -> Result<Self> {
        if half == 0 {
            return Err(Error::invalid("return loop needs at least one step"));
        }
        let p = peak.as_array();
        let schedule = (0..=2 * half)
            .map(|i| {
                let j = i.min(2 * half - i);
                let f = j as f64 / half as f64;
                (i, Pose::from_array(p.map(|v| v * f)))
            })
            .collect();
        Self::new(TrajectoryKind::ReturnLoop { peak }, schedule)
    }

    /// One frame per placement; placements need not be continuous.
    pub fn multi_contact(placements: Vec<Pose>) -> Result<Self> {
        Self::new(
            TrajectoryKind::MultiContact,
            placements.into_iter().enumerate().collect(),
        )
    }

    pub fn kind(&self) -> &TrajectoryKind {
        &self.kind
    }

    pub fn schedule(&self) -> &[(usize, Pose)] {
        &self.schedule
    }

    pub fn len(&self) -> usize {
        self.schedule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schedule.is_empty()
    }

    pub fn is_pure_yaw(&self) -> bool {
        self.schedule
            .iter()
            .all(|(_, p)| p.tx == 0.0 && p.ty == 0.0 && p.tz == 0.0 && p.rx == 0.0 && p.ry == 0.0)
    }
}
