use std::collections::HashSet;
use std::time::Instant;

use crate::error::{CliError, CliResult};
use invcloud_core::experiment::Prepared;
use invcloud_core::pose::{euler_zxy_to_matrix, kabsch_rotation, Correspondences};
use invcloud_core::sim::{render_no_contact, NoiseConfig, SensorConfig};
use invcloud_core::{
    gradient_of, image_center_and_scale, init_cloud, integrate_gradients_dct, ContactParams, GridSize, HeightMap,
    PixelCoord, Scenario, TrackerParams, WorldPoint,
};

type Check = fn() -> Result<String, String>;

fn geometry() -> Result<String, String> {
    let f = image_center_and_scale(320, 240, 10.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for k in 0..10_000 {
        let p = PixelCoord::new((k as f64 * 7.31) % 319.0, (k as f64 * 5.17) % 239.0);
        let back = f.world_to_pixel(f.lift(p, 0.0));
        worst = worst.max((back.x - p.x).abs()).max((back.y - p.y).abs());
    }
    (worst <= 1e-12).then(|| format!("max round-trip error {worst:.1e} px")).ok_or(format!("round-trip error {worst:e}"))
}

fn kabsch() -> Result<String, String> {
    let mut worst = 0.0f64;
    for k in 0..50 {
        let a = k as f64;
        let r = euler_zxy_to_matrix(37.0 * a.sin(), 41.0 * (1.3 * a).cos(), 7.0 * a - 170.0);
        let q: Vec<WorldPoint> = (0..25)
            .map(|i| {
                let t = i as f64 + a;
                WorldPoint::new((1.7 * t).sin() * 3.0, (0.9 * t).cos() * 2.0, (2.3 * t).sin())
            })
            .collect();
        let p = q.iter().map(|x| WorldPoint::from_vector(&(r * x.to_vector()))).collect();
        let c = Correspondences {
            ids: (0..25).collect(),
            p,
            q,
        };
        let got = kabsch_rotation(&c).map_err(|e| e.to_string())?;
        worst = worst.max((got - r).norm());
    }
    (worst <= 1e-9).then(|| format!("max Frobenius error {worst:.1e}")).ok_or(format!("Frobenius error {worst:e}"))
}

fn poisson() -> Result<String, String> {
    let n = 64;
    let pi = std::f64::consts::PI;
    let data: Vec<f64> = (0..n * n)
        .map(|k| {
            let (x, y) = ((k % n) as f64, (k / n) as f64);
            (pi * (x + 0.5) / n as f64).cos() * (2.0 * pi * (y + 0.5) / n as f64).cos()
        })
        .collect();
    let truth = HeightMap::new(n, n, 10.0, data).map_err(|e| e.to_string())?;
    let g = gradient_of(&truth).map_err(|e| e.to_string())?;
    let rec = integrate_gradients_dct(&g).map_err(|e| e.to_string())?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(rec.data()), mean(truth.data()));
    let rms = (rec
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - ma - b + mb).powi(2))
        .sum::<f64>()
        / (n * n) as f64)
        .sqrt();
    (rms <= 1e-6).then(|| format!("cosine surface RMS {rms:.1e}")).ok_or(format!("RMS {rms:e}"))
}

fn reference_cloud() -> Result<String, String> {
    let sensor = SensorConfig::default();
    let nc = render_no_contact(&sensor, &NoiseConfig::noiseless(0)).map_err(|e| e.to_string())?;
    let markers = nc.marker_mask.as_ref().ok_or("no marker mask")?;
    let m = sensor.markers;
    let cloud = init_cloud(&nc.height, markers, (m.rows, m.cols), GridSize::DEFAULT).map_err(|e| e.to_string())?;
    let ids: HashSet<u64> = cloud.points().iter().map(|p| p.id).collect();
    (cloud.len() == 475 && ids.len() == 475)
        .then(|| "19x25 grid gives 475 unique ids".to_string())
        .ok_or(format!("{} points, {} unique ids", cloud.len(), ids.len()))
}

fn yaw_ramp() -> Result<String, String> {
    let mut s = Scenario::preset("yaw_ramp").map_err(|e| e.to_string())?;
    s.noise.height_sigma_mm = 0.0;
    s.noise.mask_flip_prob = 0.0;
    let p = Prepared::new(s, GridSize::DEFAULT, ContactParams::default()).map_err(|e| e.to_string())?;
    let track = p.track_invariant(TrackerParams::default()).map_err(|e| e.to_string())?;
    let last = track.last().ok_or("empty track")?;
    let truth = p.ground_truth().last().ok_or("no ground truth")?.1;
    let err = (last.pose.rz - truth.rz).abs();
    (err <= 2.0)
        .then(|| format!("final yaw error {err:.3} deg"))
        .ok_or(format!("final yaw error {err:.3} deg"))
}

pub fn selftest() -> CliResult {
    let checks: [(&str, Check); 5] = [
        ("geometry round trip", geometry),
        ("kabsch rotation", kabsch),
        ("dct poisson", poisson),
        ("reference cloud", reference_cloud),
        ("yaw ramp", yaw_ramp),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let t = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {name}: {detail} ({:.2} s)", t.elapsed().as_secs_f64());
    }
    if failed > 0 {
        return Err(CliError::Algorithm(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}
