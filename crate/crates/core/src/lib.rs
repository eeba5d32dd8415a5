//! Dense, uniquely indexed reference clouds for six-DoF tracking with vision
//! based tactile sensors, plus the simulator, baseline and metrics used to
//! evaluate them.

pub mod binary;
pub mod config;
pub mod contact;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod poisson;
pub mod pose;
pub mod reference;
pub mod registration;
pub mod sim;

pub use binary::BinaryImage;
pub use config::RunConfig;
pub use contact::{CentroidMethod, ContactFrame, ContactMask, ContactParams, ContactSubset};
pub use error::{Error, Result};
pub use geometry::{
    image_center_and_scale, world_to_pixel, GradientField, HeightMap, ImageFrame, PixelCoord,
    WorldPoint,
};
pub use pipeline::{init_cloud, GridSize, Session};
pub use poisson::{gradient_of, integrate_gradients_dct};
pub use pose::{Pose, TrackRow, Tracker, TrackerParams};
pub use reference::{CloudPoint, ReferenceCloud};
pub use registration::{BaselineParams, FusedMap, PatchCloud, RegistrationParams, RigidTransform};
pub use sim::{FramesDir, Scenario};
