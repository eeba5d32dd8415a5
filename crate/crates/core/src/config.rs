//! Run configuration shared by every command: a TOML file whose sections map
//! onto the pipeline parameter structs. Unknown keys are rejected and every
//! value is range-checked.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contact::{CentroidMethod, CentroidParams, ContactParams, MaskParams};
use crate::error::{Error, Result};
use crate::pipeline::GridSize;
use crate::pose::{KabschAnchor, TrackerParams};
use crate::registration::{BaselineParams, RegistrationParams};
use crate::sim::Scenario;

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "IC_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub rows: usize,
    pub cols: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { rows: 19, cols: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactSection {
    pub depth_threshold_mm: f64,
    pub kernel_px: usize,
    pub kernel_iters: usize,
    pub min_component_px: usize,
    pub close_kernel_px: usize,
    pub close_iters: usize,
    pub border_margin_px: usize,
    pub centroid: CentroidMethod,
}

impl Default for ContactSection {
    fn default() -> Self {
        let c = ContactParams::default();
        Self {
            depth_threshold_mm: c.mask.depth_threshold_mm,
            kernel_px: c.mask.kernel_px,
            kernel_iters: c.mask.kernel_iters,
            min_component_px: c.mask.min_component_px,
            close_kernel_px: c.centroid.close_kernel_px,
            close_iters: c.centroid.close_iters,
            border_margin_px: c.border_margin_px,
            centroid: c.centroid.method,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YawWeighting {
    Uniform,
    Depth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseSection {
    pub aniso_threshold: f64,
    pub anchor: KabschAnchor,
    pub keyframe_min_overlap: f64,
    pub yaw_weighting: YawWeighting,
    pub yaw_depth_floor_mm: f64,
    pub compensate_motion: bool,
}

impl Default for PoseSection {
    fn default() -> Self {
        let t = TrackerParams::default();
        Self {
            aniso_threshold: t.aniso_threshold,
            anchor: t.anchor,
            keyframe_min_overlap: t.keyframe_min_overlap,
            yaw_weighting: if t.yaw_depth_floor_mm.is_some() {
                YawWeighting::Depth
            } else {
                YawWeighting::Uniform
            },
            yaw_depth_floor_mm: t.yaw_depth_floor_mm.unwrap_or(0.2),
            compensate_motion: t.compensate_motion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistrationSection {
    pub overlap_gate: f64,
    pub rmse_gate_mm: f64,
    pub nn_gate_mm: f64,
    pub max_iters: usize,
    pub tol_mm: f64,
    pub search_span_mm: f64,
    pub search_step_mm: f64,
    pub search_lateral_mm: f64,
    pub search_yaw_deg: f64,
    pub search_yaw_step_deg: f64,
    pub refine_candidates: usize,
    pub footprint_gate_mm: f64,
    pub footprint_z_tol_mm: f64,
    pub merge_radius_mm: f64,
}

impl Default for RegistrationSection {
    fn default() -> Self {
        let r = RegistrationParams::default();
        Self {
            overlap_gate: r.overlap_gate,
            rmse_gate_mm: r.rmse_gate_mm,
            nn_gate_mm: r.nn_gate_mm,
            max_iters: r.max_iters,
            tol_mm: r.tol_mm,
            search_span_mm: r.search_span_mm,
            search_step_mm: r.search_step_mm,
            search_lateral_mm: r.search_lateral_mm,
            search_yaw_deg: r.search_yaw_deg,
            search_yaw_step_deg: r.search_yaw_step_deg,
            refine_candidates: r.refine_candidates,
            footprint_gate_mm: r.footprint_gate_mm,
            footprint_z_tol_mm: r.footprint_z_tol_mm,
            merge_radius_mm: r.merge_radius_mm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub stride_px: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            stride_px: BaselineParams::default().stride_px,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    /// Minimum first/last contact IoU for a return trial to count.
    pub return_gate: f64,
    /// Fraction of tracked frames below which a tracking run fails.
    pub min_tracked_fraction: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            return_gate: 0.95,
            min_tracked_fraction: 0.95,
        }
    }
}

/// Replaces the scenario's noise when set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseOverride {
    pub height_sigma_mm: Option<f64>,
    pub mask_flip_prob: Option<f64>,
}

/// Default file locations; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub cloud: Option<PathBuf>,
    pub frames: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Overrides the scenario seed when set.
    pub seed: Option<u64>,
    pub grid: GridSection,
    pub contact: ContactSection,
    pub pose: PoseSection,
    pub registration: RegistrationSection,
    pub baseline: BaselineSection,
    pub evaluate: EvaluateSection,
    pub noise: NoiseOverride,
    pub paths: PathsSection,
}

fn check(ok: bool, what: &str, v: impl std::fmt::Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("config: {what} out of range: {v}")))
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn non_negative(v: f64) -> bool {
    v >= 0.0 && v.is_finite()
}

fn unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format(format!("config: {e}")))
    }

    /// Applies the value of [`SEED_ENV`], if any.
    pub fn with_seed_override(mut self, env: Option<&str>) -> Result<Self> {
        if let Some(v) = env {
            let seed = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
            self.seed = Some(seed);
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        check((2..=512).contains(&g.rows), "grid.rows", g.rows)?;
        check((2..=512).contains(&g.cols), "grid.cols", g.cols)?;

        let c = &self.contact;
        check(positive(c.depth_threshold_mm) && c.depth_threshold_mm <= 10.0, "contact.depth_threshold_mm", c.depth_threshold_mm)?;
        check((1..=63).contains(&c.kernel_px), "contact.kernel_px", c.kernel_px)?;
        check(c.kernel_iters <= 16, "contact.kernel_iters", c.kernel_iters)?;
        check((1..=63).contains(&c.close_kernel_px), "contact.close_kernel_px", c.close_kernel_px)?;
        check(c.close_iters <= 16, "contact.close_iters", c.close_iters)?;
        check(c.border_margin_px <= 64, "contact.border_margin_px", c.border_margin_px)?;

        let p = &self.pose;
        check(p.aniso_threshold >= 1.0 && p.aniso_threshold.is_finite(), "pose.aniso_threshold", p.aniso_threshold)?;
        check(positive(p.keyframe_min_overlap) && p.keyframe_min_overlap <= 1.0, "pose.keyframe_min_overlap", p.keyframe_min_overlap)?;
        check(non_negative(p.yaw_depth_floor_mm), "pose.yaw_depth_floor_mm", p.yaw_depth_floor_mm)?;

        let r = &self.registration;
        check(unit(r.overlap_gate), "registration.overlap_gate", r.overlap_gate)?;
        check(positive(r.rmse_gate_mm), "registration.rmse_gate_mm", r.rmse_gate_mm)?;
        check(positive(r.nn_gate_mm), "registration.nn_gate_mm", r.nn_gate_mm)?;
        check((1..=10_000).contains(&r.max_iters), "registration.max_iters", r.max_iters)?;
        check(positive(r.tol_mm), "registration.tol_mm", r.tol_mm)?;
        check(non_negative(r.search_span_mm), "registration.search_span_mm", r.search_span_mm)?;
        check(positive(r.search_step_mm), "registration.search_step_mm", r.search_step_mm)?;
        check(non_negative(r.search_lateral_mm), "registration.search_lateral_mm", r.search_lateral_mm)?;
        check(non_negative(r.search_yaw_deg) && r.search_yaw_deg <= 180.0, "registration.search_yaw_deg", r.search_yaw_deg)?;
        check(positive(r.search_yaw_step_deg), "registration.search_yaw_step_deg", r.search_yaw_step_deg)?;
        check(r.refine_candidates >= 1, "registration.refine_candidates", r.refine_candidates)?;
        check(non_negative(r.footprint_gate_mm), "registration.footprint_gate_mm", r.footprint_gate_mm)?;
        check(non_negative(r.footprint_z_tol_mm), "registration.footprint_z_tol_mm", r.footprint_z_tol_mm)?;
        check(positive(r.merge_radius_mm), "registration.merge_radius_mm", r.merge_radius_mm)?;

        check((1..=32).contains(&self.baseline.stride_px), "baseline.stride_px", self.baseline.stride_px)?;

        let e = &self.evaluate;
        check(unit(e.return_gate), "evaluate.return_gate", e.return_gate)?;
        check(unit(e.min_tracked_fraction), "evaluate.min_tracked_fraction", e.min_tracked_fraction)?;

        if let Some(s) = self.noise.height_sigma_mm {
            check(non_negative(s), "noise.height_sigma_mm", s)?;
        }
        if let Some(f) = self.noise.mask_flip_prob {
            check(unit(f), "noise.mask_flip_prob", f)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSize {
        GridSize {
            rows: self.grid.rows,
            cols: self.grid.cols,
        }
    }

    pub fn contact_params(&self) -> ContactParams {
        let c = &self.contact;
        ContactParams {
            mask: MaskParams {
                depth_threshold_mm: c.depth_threshold_mm,
                kernel_px: c.kernel_px,
                kernel_iters: c.kernel_iters,
                min_component_px: c.min_component_px,
            },
            centroid: CentroidParams {
                close_kernel_px: c.close_kernel_px,
                close_iters: c.close_iters,
                method: c.centroid,
            },
            border_margin_px: c.border_margin_px,
        }
    }

    pub fn tracker_params(&self, frame_period_ms: f64) -> TrackerParams {
        let p = &self.pose;
        TrackerParams {
            aniso_threshold: p.aniso_threshold,
            anchor: p.anchor,
            keyframe_min_overlap: p.keyframe_min_overlap,
            frame_period_ms,
            yaw_depth_floor_mm: (p.yaw_weighting == YawWeighting::Depth).then_some(p.yaw_depth_floor_mm),
            compensate_motion: p.compensate_motion,
        }
    }

    pub fn registration_params(&self) -> RegistrationParams {
        let r = &self.registration;
        RegistrationParams {
            overlap_gate: r.overlap_gate,
            rmse_gate_mm: r.rmse_gate_mm,
            nn_gate_mm: r.nn_gate_mm,
            max_iters: r.max_iters,
            tol_mm: r.tol_mm,
            aniso_threshold: self.pose.aniso_threshold,
            search_span_mm: r.search_span_mm,
            search_step_mm: r.search_step_mm,
            search_lateral_mm: r.search_lateral_mm,
            search_yaw_deg: r.search_yaw_deg,
            search_yaw_step_deg: r.search_yaw_step_deg,
            refine_candidates: r.refine_candidates,
            footprint_gate_mm: r.footprint_gate_mm,
            footprint_z_tol_mm: r.footprint_z_tol_mm,
            merge_radius_mm: r.merge_radius_mm,
        }
    }

    pub fn baseline_params(&self, frame_period_ms: f64) -> BaselineParams {
        BaselineParams {
            stride_px: self.baseline.stride_px,
            icp: self.registration_params(),
            frame_period_ms,
        }
    }

    /// Applies the seed and noise overrides to a scenario.
    pub fn apply_to_scenario(&self, s: &mut Scenario) -> Result<()> {
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(v) = self.noise.height_sigma_mm {
            s.noise.height_sigma_mm = v;
        }
        if let Some(v) = self.noise.mask_flip_prob {
            s.noise.mask_flip_prob = v;
        }
        s.validate()
    }
}
