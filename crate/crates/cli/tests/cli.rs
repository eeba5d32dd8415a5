use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use invcloud_core::io::{load_mask_png, save_mask_png};
use invcloud_core::pose::{load_track, TRACK_HEADER};
use invcloud_core::sim::{Dof, Shape, TrajectorySection};
use invcloud_core::{BinaryImage, Scenario};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_invcloud"));
    c.env_remove("IC_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn invcloud")
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a shortened variant of a preset and returns the scenario file.
fn scenario_file(dir: &Path, name: &str, preset: &str, edit: impl FnOnce(&mut Scenario)) -> PathBuf {
    let mut s = Scenario::preset(preset).unwrap();
    edit(&mut s);
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, s.to_toml().unwrap()).unwrap();
    path
}

fn simulate(dir: &Path, name: &str, preset: &str, edit: impl FnOnce(&mut Scenario)) -> PathBuf {
    let file = scenario_file(dir, name, preset, edit);
    let out = dir.join(name);
    ok(&["simulate", "--scenario", p(&file), "--out", p(&out)]);
    out
}

fn cloud(dir: &Path, frames: &Path) -> PathBuf {
    let out = dir.join("cloud.txt");
    if !out.exists() {
        ok(&["init-cloud", "--frames", p(frames), "--out", p(&out)]);
    }
    out
}

fn static_frames(n: usize) -> impl FnOnce(&mut Scenario) {
    move |s: &mut Scenario| s.trajectory = TrajectorySection::Static { frames: n }
}

fn csv_value(report: &Path, key: &str) -> f64 {
    fs::read_to_string(report)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")).map(|v| v.parse().unwrap()))
        .unwrap_or_else(|| panic!("{key} missing from {}", report.display()))
}

#[test]
fn init_cloud_default_and_dense_grids() {
    let t = tempfile::tempdir().unwrap();
    let frames = simulate(t.path(), "s", "static", static_frames(1));
    let out = ok(&["init-cloud", "--frames", p(&frames), "--out", p(&t.path().join("a.txt"))]);
    assert!(out.contains("475 points (19x25 grid)"), "{out}");
    let out = ok(&["init-cloud", "--frames", p(&frames), "--grid", "31x41", "--out", p(&t.path().join("b.txt"))]);
    assert!(out.contains("1271 points (31x41 grid)"), "{out}");
    assert!(t.path().join("b.config.toml").exists());
    let text = fs::read_to_string(t.path().join("b.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1271);
}

#[test]
fn init_cloud_reports_missing_markers() {
    let t = tempfile::tempdir().unwrap();
    let frames = simulate(t.path(), "s", "static", static_frames(1));
    let mpath = frames.join("markers.png");
    let m = load_mask_png(&mpath).unwrap();
    // Blank the left quarter of the image to occlude a column of markers.
    let cut = BinaryImage::from_fn(m.width(), m.height(), |x, y| x > m.width() / 4 && m.get(x, y));
    save_mask_png(&cut, &mpath).unwrap();
    let o = run(&["init-cloud", "--frames", p(&frames), "--out", p(&t.path().join("c.txt"))]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("found") && err.contains("expected"), "{err}");
}

#[test]
fn track_writes_one_row_per_frame_for_both_methods() {
    let t = tempfile::tempdir().unwrap();
    let frames = simulate(t.path(), "s", "static", static_frames(12));
    let c = cloud(t.path(), &frames);
    for method in ["invariant", "baseline"] {
        let out = t.path().join(format!("{method}.csv"));
        ok(&["track", "--frames", p(&frames), "--cloud", p(&c), "--method", method, "--out", p(&out)]);
        let text = fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().contains("Z-X-Y"));
        assert_eq!(lines.next().unwrap(), TRACK_HEADER.join(","));
        assert_eq!(load_track(&out).unwrap().len(), 12);
        assert!(t.path().join(format!("{method}.config.toml")).exists());
    }
}

#[test]
fn track_rejects_empty_and_missing_inputs() {
    let t = tempfile::tempdir().unwrap();
    let frames = simulate(t.path(), "s", "static", static_frames(2));
    let c = cloud(t.path(), &frames);
    let empty = t.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = t.path().join("x.csv");
    assert_eq!(code(&["track", "--frames", p(&empty), "--cloud", p(&c), "--out", p(&out)]), 3);
    assert_eq!(code(&["track", "--frames", p(&t.path().join("nope")), "--cloud", p(&c), "--out", p(&out)]), 3);
    assert_eq!(code(&["track", "--frames", p(&frames), "--cloud", p(&t.path().join("nope.txt")), "--out", p(&out)]), 3);
    fs::write(frames.join("frame_000001.ichm"), b"garbage").unwrap();
    assert_eq!(code(&["track", "--frames", p(&frames), "--cloud", p(&c), "--out", p(&out)]), 3);
    // Usage errors.
    assert_eq!(code(&["track", "--frames", p(&frames)]), 2);
    assert_eq!(code(&["track", "--method", "sift"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn config_is_validated_and_seed_precedence_holds() {
    let t = tempfile::tempdir().unwrap();
    let bad = t.path().join("bad.toml");
    fs::write(&bad, "[pose]\nanisotropy = 2.0\n").unwrap();
    assert_eq!(code(&["--config", p(&bad), "selftest"]), 2);
    fs::write(&bad, "[registration]\noverlap_gate = 3.0\n").unwrap();
    assert_eq!(code(&["--config", p(&bad), "selftest"]), 2);

    let good = t.path().join("good.toml");
    fs::write(&good, "seed = 5\n").unwrap();
    let file = scenario_file(t.path(), "s", "static", static_frames(1));
    let seed_of = |dir: &Path| Scenario::from_toml(&fs::read_to_string(dir.join("scenario.toml")).unwrap()).unwrap().seed;

    let a = t.path().join("a");
    ok(&["--config", p(&good), "simulate", "--scenario", p(&file), "--out", p(&a)]);
    assert_eq!(seed_of(&a), 5);
    let b = t.path().join("b");
    let o = bin()
        .env("IC_SEED", "11")
        .args(["--config", p(&good), "simulate", "--scenario", p(&file), "--out", p(&b)])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(seed_of(&b), 11);
    let e = fs::read_to_string(b.join("effective_config.toml")).unwrap();
    assert!(e.contains("seed = 11"), "{e}");
    let c = t.path().join("c");
    let o = bin()
        .env("IC_SEED", "11")
        .args(["simulate", "--scenario", p(&file), "--seed", "3", "--out", p(&c)])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(seed_of(&c), 3);
}

#[test]
fn commands_are_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let file = scenario_file(t.path(), "s", "yaw_ramp", |s| {
        s.trajectory = TrajectorySection::SingleAxis {
            dof: Dof::Rz,
            rate: -1.0,
            steps: 10,
        }
    });
    let mut tracks = Vec::new();
    for run in ["one", "two"] {
        let frames = t.path().join(run);
        ok(&["simulate", "--scenario", p(&file), "--out", p(&frames)]);
        let c = t.path().join(format!("{run}.cloud"));
        ok(&["init-cloud", "--frames", p(&frames), "--out", p(&c)]);
        let out = t.path().join(format!("{run}.csv"));
        ok(&["track", "--frames", p(&frames), "--cloud", p(&c), "--out", p(&out)]);
        tracks.push((frames, c, out));
    }
    let read = |p: &Path| fs::read(p).unwrap();
    assert_eq!(read(&tracks[0].1), read(&tracks[1].1));
    assert_eq!(read(&tracks[0].2), read(&tracks[1].2));
    for f in ["frame_000005.ichm", "mask_000005.png", "ground_truth.csv", "reference.ichm"] {
        assert_eq!(read(&tracks[0].0.join(f)), read(&tracks[1].0.join(f)), "{f}");
    }
}

#[test]
fn evaluate_drift_repeat_and_accuracy() {
    let t = tempfile::tempdir().unwrap();
    let st = simulate(t.path(), "static", "static", static_frames(40));
    let c = cloud(t.path(), &st);
    let track = |frames: &Path, method: &str, name: &str| {
        let out = t.path().join(name);
        // Exit 4 is allowed: the baseline may coast through some frames.
        let o = run(&["track", "--frames", p(frames), "--cloud", p(&c), "--method", method, "--out", p(&out)]);
        assert!(matches!(o.status.code(), Some(0 | 4)));
        out
    };

    let inv = track(&st, "invariant", "st_inv.csv");
    let base = track(&st, "baseline", "st_base.csv");
    let out = t.path().join("drift");
    ok(&[
        "evaluate", "--experiment", "drift", "--run", "invariant", p(&inv), p(&st), "--run", "baseline", p(&base), p(&st),
        "--out", p(&out), "--emit-plots",
    ]);
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("| Method | Δx (mm)") && md.contains("| invariant |") && md.contains("| baseline |"), "{md}");
    assert!(out.join("drift_mae.svg").exists() && out.join("effective_config.toml").exists());

    let ret = simulate(t.path(), "ret", "return", |s| {
        s.trajectory = TrajectorySection::ReturnLoop {
            peak: [1.0, -0.5, 0.0, 0.0, 0.0, -10.0],
            half: 10,
        }
    });
    let inv = track(&ret, "invariant", "ret_inv.csv");
    let base = track(&ret, "baseline", "ret_base.csv");
    let out = t.path().join("repeat");
    ok(&[
        "evaluate", "--experiment", "repeat", "--run", "invariant", p(&inv), p(&ret), "--run", "baseline", p(&base), p(&ret),
        "--out", p(&out), "--emit-plots",
    ]);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("method,tx,ty,tz,rx,ry,rz,trials\n"), "{csv}");
    assert!(out.join("repeat_error.svg").exists());
    // A moving sequence is not a drift experiment.
    assert_eq!(
        code(&["evaluate", "--experiment", "drift", "--run", "x", p(&inv), p(&ret), "--out", p(&out)]),
        3
    );
    // Track and frames must agree.
    assert_eq!(
        code(&["evaluate", "--experiment", "accuracy", "--run", "x", p(&inv), p(&st), "--out", p(&out)]),
        3
    );

    let slip = simulate(t.path(), "slip", "slip", |s| {
        s.trajectory = TrajectorySection::SingleAxis {
            dof: Dof::Rz,
            rate: -1.0,
            steps: 20,
        }
    });
    let inv = track(&slip, "invariant", "slip_inv.csv");
    let out = t.path().join("acc");
    ok(&["evaluate", "--experiment", "accuracy", "--run", "invariant", p(&inv), p(&slip), "--out", p(&out), "--emit-plots"]);
    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    assert_eq!(series.lines().count(), 22);
    assert!(out.join("trajectory_rz.svg").exists() && out.join("error_rz.svg").exists());
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let rms: Vec<f64> = report
        .lines()
        .find(|l| l.starts_with("invariant,rms,"))
        .unwrap()
        .split(',')
        .skip(2)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(rms[5] < 3.0, "slip yaw RMS {}", rms[5]);
}

#[test]
fn repeat_gate_failure_is_an_algorithmic_error() {
    let t = tempfile::tempdir().unwrap();
    // A one-way yaw ramp does not return to its first contact.
    let ramp = simulate(t.path(), "ramp", "yaw_ramp", |s| {
        s.trajectory = TrajectorySection::SingleAxis {
            dof: Dof::Rz,
            rate: -3.0,
            steps: 10,
        }
    });
    let c = cloud(t.path(), &ramp);
    let tr = t.path().join("t.csv");
    ok(&["track", "--frames", p(&ramp), "--cloud", p(&c), "--out", p(&tr)]);
    let out = t.path().join("rep");
    let o = run(&["evaluate", "--experiment", "repeat", "--run", "inv", p(&tr), p(&ramp), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(fs::read_to_string(out.join("report.md")).unwrap().contains("discarded"));
}

#[test]
fn slam_fuses_scissors_scan() {
    let t = tempfile::tempdir().unwrap();
    let sc = simulate(t.path(), "sc", "scissors_slam", |_| {});
    let c = cloud(t.path(), &sc);
    let out = t.path().join("map");
    let stdout = ok(&["slam", "--patches", p(&sc), "--cloud", p(&c), "--out", p(&out)]);
    assert!(stdout.contains("patches accepted"), "{stdout}");
    let report = out.join("report.csv");
    assert!(csv_value(&report, "accepted") >= 4.0);
    assert!(csv_value(&report, "hausdorff_mm") <= 1.5);
    let journal = fs::read_to_string(out.join("journal.csv")).unwrap();
    assert!(journal.starts_with("patch_idx,accepted,yaw_deg,tx,ty,tz,overlap,rmse\n"));
    assert_eq!(journal.lines().count(), 6);
    let map = fs::read_to_string(out.join("map.txt")).unwrap();
    let ids: Vec<&str> = map.lines().skip(1).map(|l| l.split(' ').next().unwrap()).collect();
    let mut unique = ids.clone();
    unique.sort_unstable();
    unique.dedup();
    assert_eq!(unique.len(), ids.len());
}

/// Copies frame 0 of a frame directory into a fresh single-frame directory.
fn single_frame(src: &Path, dst: &Path) -> PathBuf {
    fs::create_dir_all(dst).unwrap();
    for f in ["reference.ichm", "markers.png", "frame_000000.ichm", "mask_000000.png"] {
        fs::copy(src.join(f), dst.join(f)).unwrap();
    }
    dst.to_path_buf()
}

#[test]
fn slam_deduplicates_repeats_and_rejects_disjoint_patches() {
    let t = tempfile::tempdir().unwrap();
    let sc = simulate(t.path(), "sc", "scissors_slam", |_| {});
    let c = cloud(t.path(), &sc);
    let a = single_frame(&sc, &t.path().join("a"));
    let count = |dir: &Path| fs::read_to_string(dir.join("map.txt")).unwrap().lines().count() - 1;

    let two = t.path().join("two");
    ok(&["slam", "--patches", p(&a), p(&a), "--cloud", p(&c), "--out", p(&two)]);
    let three = t.path().join("three");
    ok(&["slam", "--patches", p(&a), p(&a), p(&a), "--cloud", p(&c), "--out", p(&three)]);
    assert_eq!(count(&two), count(&three));
    assert!(fs::read_to_string(three.join("map.txt")).unwrap().lines().skip(1).all(|l| l.ends_with(" 3")));

    let sphere = simulate(t.path(), "ball", "sphere_static", |s| {
        s.trajectory = TrajectorySection::Static { frames: 1 };
        s.object = Shape::Sphere { radius_mm: 4.0 };
    });
    let out = t.path().join("disjoint");
    let o = run(&["slam", "--patches", p(&a), p(&sphere), "--cloud", p(&c), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stdout));
    let journal = fs::read_to_string(out.join("journal.csv")).unwrap();
    assert!(journal.lines().nth(2).unwrap().starts_with("1,false,"), "{journal}");

    assert_eq!(code(&["slam", "--patches", p(&a), "--cloud", p(&c), "--out", p(&out)]), 2);
}

#[test]
fn selftest_passes() {
    let out = ok(&["selftest"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{out}");
}
