use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;

use crate::error::{CliError, CliResult};
use crate::{InitCloudArgs, Method, SimulateArgs, SlamArgs, TrackArgs};
use invcloud_core::experiment::fuse_contacts;
use invcloud_core::io::{load_height_map, load_mask_png};
use invcloud_core::pose::{save_track, Pose};
use invcloud_core::registration::BaselineTracker;
use invcloud_core::sim::{write_frames_dir, FramesDir, Shape};
use invcloud_core::{GridSize, ReferenceCloud, RunConfig, Scenario, Session};

/// Frame period used when a frame directory carries no scenario.
const DEFAULT_FRAME_PERIOD_MS: f64 = 40.0;

pub(crate) fn pick(flag: Option<PathBuf>, fallback: Option<&PathBuf>, name: &str) -> CliResult<PathBuf> {
    flag.or_else(|| fallback.cloned())
        .ok_or_else(|| CliError::Usage(format!("--{name} is required (or set paths.{name} in the config)")))
}

/// Writes the effective configuration next to an output.
pub(crate) fn echo_config(cfg: &RunConfig, path: &Path) -> CliResult {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut text = format!("# effective configuration of: invcloud {}\n", args.join(" "));
    text.push_str(&cfg.to_toml()?);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// `<dir>/<stem>.config.toml` for a file output.
fn config_beside(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.config.toml"))
}

fn create_parent(path: &Path) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn init_cloud(cfg: &RunConfig, a: InitCloudArgs) -> CliResult {
    let out = pick(a.out, cfg.paths.cloud.as_ref(), "out")?;
    let (reference, markers, scenario) = match (a.reference, a.markers) {
        (Some(r), Some(m)) => (
            load_height_map(&r).map_err(CliError::context(r.display()))?,
            load_mask_png(&m).map_err(CliError::context(m.display()))?,
            None,
        ),
        _ => {
            let dir = pick(a.frames, cfg.paths.frames.as_ref(), "frames")?;
            let fd = FramesDir::open(&dir)?;
            let markers = fd
                .markers()?
                .ok_or_else(|| CliError::Data(format!("{} has no marker mask", dir.display())))?;
            (fd.reference()?, markers, fd.scenario()?)
        }
    };
    let layout = match (a.marker_grid, scenario) {
        (Some(g), _) => g,
        (None, Some(s)) => {
            let m = s.sensor().markers;
            (m.rows, m.cols)
        }
        (None, None) => return Err(CliError::Usage("--marker-grid is required without a scenario".into())),
    };
    let grid = a
        .grid
        .map(|(rows, cols)| GridSize { rows, cols })
        .unwrap_or_else(|| cfg.grid());
    let cloud = invcloud_core::init_cloud(&reference, &markers, layout, grid).map_err(CliError::context("marker detection"))?;
    create_parent(&out)?;
    cloud.save(&out)?;
    let mut eff = cfg.clone();
    eff.grid.rows = grid.rows;
    eff.grid.cols = grid.cols;
    echo_config(&eff, &config_beside(&out))?;
    println!(
        "reference cloud: {} points ({}x{} grid) -> {}",
        cloud.len(),
        cloud.grid_rows(),
        cloud.grid_cols(),
        out.display()
    );
    Ok(())
}

pub fn simulate(cfg: &RunConfig, a: SimulateArgs) -> CliResult {
    let out = pick(a.out, cfg.paths.frames.as_ref(), "out")?;
    let mut scenario = match (&a.preset, &a.scenario) {
        (Some(name), _) => Scenario::preset(name).map_err(|e| CliError::Usage(e.to_string()))?,
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Scenario::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        (None, None) => return Err(CliError::Usage("--preset or --scenario is required".into())),
    };
    let mut eff = cfg.clone();
    if a.seed.is_some() {
        eff.seed = a.seed;
    }
    eff.apply_to_scenario(&mut scenario)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    info!("rendering {} frames", scenario.trajectory()?.len());
    let rendered = scenario.render()?;
    write_frames_dir(&out, &scenario, &rendered)?;
    echo_config(&eff, &out.join("effective_config.toml"))?;
    println!("{} frames (seed {}) -> {}", rendered.frames.len(), scenario.seed, out.display());
    Ok(())
}

fn frame_period_ms(fd: &FramesDir) -> CliResult<f64> {
    Ok(fd
        .scenario()?
        .map(|s| s.sensor().frame_period_ms())
        .unwrap_or(DEFAULT_FRAME_PERIOD_MS))
}

fn load_cloud(path: &Path) -> CliResult<ReferenceCloud> {
    ReferenceCloud::load(path).map_err(CliError::context(path.display()))
}

/// Session for one frame directory, checking that the cloud fits its frames.
fn session_for(cfg: &RunConfig, cloud: &ReferenceCloud, fd: &FramesDir) -> CliResult<Session> {
    let reference = fd.reference()?;
    let dims = (reference.width(), reference.height());
    if cloud.image_size() != dims {
        return Err(CliError::Data(format!(
            "cloud was built for {:?} images but {} holds {:?}",
            cloud.image_size(),
            fd.root().display(),
            dims
        )));
    }
    Ok(Session::new(cloud.clone(), reference, cfg.contact_params()))
}

pub fn track(cfg: &RunConfig, a: TrackArgs) -> CliResult {
    let frames = pick(a.frames, cfg.paths.frames.as_ref(), "frames")?;
    let cloud_path = pick(a.cloud, cfg.paths.cloud.as_ref(), "cloud")?;
    let out = pick(a.out, cfg.paths.out.as_ref(), "out")?;
    let fd = FramesDir::open(&frames)?;
    if fd.is_empty() {
        return Err(CliError::Data(format!("no frame files in {}", frames.display())));
    }
    let cloud = load_cloud(&cloud_path)?;
    let session = session_for(cfg, &cloud, &fd)?;
    let period = frame_period_ms(&fd)?;
    let mut rows = Vec::with_capacity(fd.len());
    let mut invariant = session.tracker(cfg.tracker_params(period));
    let mut baseline = BaselineTracker::new(cfg.baseline_params(period));
    for item in fd.iter() {
        let (i, h, aux) = item?;
        let f = session
            .observe(i, h, aux.as_ref())
            .map_err(CliError::context(format!("frame {i}")))?;
        rows.push(match a.method {
            Method::Invariant => invariant.step(&f),
            Method::Baseline => baseline.step(&f),
        });
    }
    create_parent(&out)?;
    save_track(&rows, cfg.pose.aniso_threshold, &out)?;
    echo_config(cfg, &config_beside(&out))?;
    let tracked = rows.iter().filter(|r| r.tracked).count();
    let frac = tracked as f64 / rows.len() as f64;
    println!(
        "{:?}: tracked {tracked}/{} frames ({:.1}%) -> {}",
        a.method,
        rows.len(),
        100.0 * frac,
        out.display()
    );
    if frac < cfg.evaluate.min_tracked_fraction {
        return Err(CliError::Algorithm(format!(
            "only {:.1}% of frames tracked, need {:.1}%",
            100.0 * frac,
            100.0 * cfg.evaluate.min_tracked_fraction
        )));
    }
    Ok(())
}

pub fn slam(cfg: &RunConfig, a: SlamArgs) -> CliResult {
    let out = pick(a.out, cfg.paths.out.as_ref(), "out")?;
    let cloud_path = pick(a.cloud, cfg.paths.cloud.as_ref(), "cloud")?;
    let cloud = load_cloud(&cloud_path)?;
    let mut frames = Vec::new();
    let mut poses: Option<Vec<Pose>> = Some(Vec::new());
    let mut first_session = None;
    let mut first_scenario = None;
    for dir in &a.patches {
        let fd = FramesDir::open(dir)?;
        if fd.is_empty() {
            return Err(CliError::Data(format!("no frame files in {}", dir.display())));
        }
        let session = session_for(cfg, &cloud, &fd)?;
        for item in fd.iter() {
            let (i, h, aux) = item?;
            frames.push(
                session
                    .observe(i, h, aux.as_ref())
                    .map_err(CliError::context(format!("{} frame {i}", dir.display())))?,
            );
        }
        match (fd.ground_truth()?, poses.as_mut()) {
            (Some(gt), Some(p)) if gt.len() == fd.len() => p.extend(gt.into_iter().map(|(_, q)| q)),
            _ => poses = None,
        }
        if first_session.is_none() {
            first_scenario = fd.scenario()?;
            first_session = Some(session);
        }
    }
    let session = first_session.ok_or_else(|| CliError::Usage("no patch directories given".into()))?;
    if frames.len() < 2 {
        return Err(CliError::Usage(format!("need at least 2 patches, got {}", frames.len())));
    }
    let template = match &a.template {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Some(Scenario::from_toml(&text).map_err(CliError::context(p.display()))?)
        }
        None => first_scenario.filter(|s| matches!(s.object, Shape::ExtrudedOutline { .. })),
    };
    let object = template.map(|s| s.object()).transpose()?;
    if a.template.is_some() && poses.is_none() {
        return Err(CliError::Data("a template needs ground_truth.csv in every patch directory".into()));
    }
    let truth = match (&object, &poses) {
        (Some(o), Some(p)) => Some((o, p.as_slice())),
        _ => None,
    };
    let outcome = fuse_contacts(&session, &frames, truth, &cfg.registration_params())?;
    std::fs::create_dir_all(&out)?;
    outcome.map.save(&out.join("map.txt"), &out.join("journal.csv"))?;
    echo_config(cfg, &out.join("effective_config.toml"))?;

    let accepted = outcome.map.accepted_count();
    let mut md = String::from("### Fused map\n\n| quantity | value |\n|---|---|\n");
    let mut csv = String::from("quantity,value\n");
    let mut row = |k: &str, v: String| {
        let _ = writeln!(md, "| {k} | {v} |");
        let _ = writeln!(csv, "{k},{v}");
    };
    row("patches", frames.len().to_string());
    row("accepted", accepted.to_string());
    row("map_points", outcome.map.len().to_string());
    if let Some(h) = &outcome.hausdorff {
        row("hausdorff_mm", h.hausdorff.to_string());
        row("map_to_outline_mm", h.map_to_outline.to_string());
        row("outline_to_map_mm", h.outline_to_map.to_string());
        row("boundary_samples", h.boundary_samples.to_string());
    }
    std::fs::write(out.join("report.md"), md)?;
    std::fs::write(out.join("report.csv"), csv)?;
    let hd = outcome
        .hausdorff
        .map(|h| format!(", Hausdorff {:.3} mm", h.hausdorff))
        .unwrap_or_default();
    println!(
        "{accepted}/{} patches accepted, {} map points{hd} -> {}",
        frames.len(),
        outcome.map.len(),
        out.display()
    );
    if accepted <= 1 {
        return Err(CliError::Algorithm("every registration was rejected; see journal.csv".into()));
    }
    Ok(())
}
