use super::*;
use proptest::prelude::*;

fn surface(x: f64, y: f64) -> f64 {
    0.6 * (x / 3.0).sin() * (y / 4.0).cos() + 0.02 * x * y / 10.0
}

/// Lattice patch over columns `c0..c1`, rows `0..rows`, pitch `pitch`.
fn lattice(c0: u64, c1: u64, rows: u64, pitch: f64) -> PatchCloud {
    let mut pts = Vec::new();
    let mut ids = Vec::new();
    for r in 0..rows {
        for c in c0..c1 {
            let (x, y) = (c as f64 * pitch, r as f64 * pitch);
            pts.push(WorldPoint::new(x, y, surface(x, y)));
            ids.push(r * 1000 + c + 1);
        }
    }
    let (x0, x1) = (c0 as f64 * pitch - pitch / 2.0, (c1 - 1) as f64 * pitch + pitch / 2.0);
    let y1 = (rows - 1) as f64 * pitch + pitch / 2.0;
    let view = vec![[x0, -pitch / 2.0], [x1, -pitch / 2.0], [x1, y1], [x0, y1]];
    PatchCloud::new(pts, ids, 1.15).unwrap().with_view(view)
}

fn move_patch(p: &PatchCloud, t: &RigidTransform) -> PatchCloud {
    let view = p.transformed(t).view;
    PatchCloud::new(p.points.iter().map(|x| t.apply(x)).collect(), p.ids.clone(), 1.15)
        .unwrap()
        .with_view(view)
}

fn yaw_about(c: WorldPoint, yaw: f64, shift: Vector3<f64>) -> RigidTransform {
    let r = RigidTransform::from_yaw_deg(yaw, Vector3::zeros()).rotation;
    RigidTransform::new(r, c.to_vector() - r * c.to_vector() + shift)
}

fn is_rotation(r: &Matrix3<f64>) -> bool {
    (r.transpose() * r - Matrix3::identity()).norm() < 1e-9 && (r.determinant() - 1.0).abs() < 1e-9
}

#[test]
fn prealign_identity() {
    let a = lattice(0, 12, 6, 1.0);
    let t = prealign(&a, &a).unwrap();
    assert!((t.rotation - Matrix3::identity()).norm() < 1e-12);
    assert!(t.translation.norm() < 1e-12);
}

#[test]
fn prealign_recovers_yaw_and_shift() {
    let a = lattice(0, 12, 6, 1.0);
    let b = move_patch(&a, &yaw_about(a.centroid, 30.0, Vector3::new(3.0, -2.0, 0.0)));
    let t = prealign(&a, &b).unwrap();
    assert!((t.yaw_deg() + 30.0).abs() < 0.5);
    let shift = a.centroid.to_vector() - b.centroid.to_vector();
    assert!((shift - Vector3::new(-3.0, 2.0, 0.0)).norm() < 0.1);
    for (p, q) in a.points.iter().zip(&b.points) {
        assert!((t.apply(q).to_vector() - p.to_vector()).norm() < 1e-6);
    }
}

#[test]
fn prealign_nearest_branch() {
    let mut a = lattice(0, 12, 6, 1.0);
    let mut b = a.clone();
    // a's axis sits 170 degrees from b's.
    let th = 170f64.to_radians();
    a.principal_axis = Some([th.cos(), th.sin()]);
    b.principal_axis = Some([1.0, 0.0]);
    let t = prealign(&a, &b).unwrap();
    assert!((t.yaw_deg() + 10.0).abs() < 1e-9);
    b.principal_axis = None;
    assert!(matches!(prealign(&a, &b), Err(Error::PrealignUnavailable)));
}

#[test]
fn icp_identity() {
    let a = lattice(0, 10, 10, 1.5);
    let r = icp_refine(&a, &a, &RigidTransform::identity(), &RegistrationParams::default()).unwrap();
    assert!(r.accepted);
    assert!(r.rmse < 1e-12);
    assert_eq!(r.overlap_ratio, 1.0);
    assert!((r.rotation - Matrix3::identity()).norm() < 1e-12);
}

#[test]
fn icp_partial_overlap() {
    let a = lattice(0, 10, 10, 1.5);
    let b0 = lattice(4, 14, 10, 1.5);
    let shared = b0.ids.iter().filter(|i| a.ids.contains(i)).count() as f64 / b0.len() as f64;
    assert!((shared - 0.6).abs() < 1e-12);
    // b is observed in a frame moved by `truth`; the registration must undo it.
    let truth = yaw_about(b0.centroid, 1.5, Vector3::new(0.3, -0.2, 0.05));
    let b = move_patch(&b0, &truth);
    let r = icp_refine(&a, &b, &RigidTransform::identity(), &RegistrationParams::default()).unwrap();
    assert!(r.accepted, "{r:?}");
    let expect = truth.inverse();
    let err_deg = crate::pose::rotation_distance_deg(&r.rotation, &expect.rotation);
    assert!(err_deg < 1.0, "rotation error {err_deg}");
    for p in &b.points {
        let d = (r.transform().apply(p).to_vector() - expect.apply(p).to_vector()).norm();
        assert!(d < 0.2, "point error {d}");
    }
    assert!((0.5..=0.7).contains(&r.overlap_ratio), "{}", r.overlap_ratio);
}

#[test]
fn icp_disjoint_rejected() {
    let a = lattice(0, 10, 10, 1.5);
    let b = lattice(30, 40, 10, 1.5);
    let r = icp_refine(&a, &b, &RigidTransform::identity(), &RegistrationParams::default()).unwrap();
    assert!(!r.accepted);
    assert!(r.overlap_ratio < 0.35);
}

#[test]
fn register_finds_shifted_patch() {
    let a = lattice(0, 24, 8, 1.0);
    let b0 = lattice(6, 30, 8, 1.0);
    let truth = yaw_about(b0.centroid, 8.0, Vector3::new(-2.0, 1.0, 0.0));
    let b = move_patch(&b0, &truth);
    let r = register(&a, &b, &RegistrationParams::default()).unwrap();
    assert!(r.accepted, "{r:?}");
    let expect = truth.inverse();
    for p in &b.points {
        let d = (r.transform().apply(p).to_vector() - expect.apply(p).to_vector()).norm();
        assert!(d < 0.05, "{d} {r:?}");
    }
}

#[test]
fn map_dedup_and_rejection() {
    let params = RegistrationParams::default();
    let a = lattice(0, 20, 8, 1.0);
    let mut map = FusedMap::new();
    map.accumulate(&a, &params).unwrap();
    let n = map.len();
    assert_eq!(n, a.len());
    let r = map.accumulate(&a, &params).unwrap();
    assert!(r.accepted);
    assert_eq!(map.len(), n);
    assert!(map.points().iter().all(|p| p.n_obs == 2));
    // A strongly rippled surface shares no geometry with the lattice patch.
    let far = PatchCloud::new(
        a.points.iter().map(|p| WorldPoint::new(p.x, p.y, 6.0 * (1.3 * p.x + 0.7 * p.y).sin())).collect(),
        a.ids.iter().map(|i| i + 100_000).collect(),
        1.15,
    )
    .unwrap();
    let before: Vec<MapPoint> = map.points().to_vec();
    let r = map.accumulate(&far, &params).unwrap();
    assert!(!r.accepted, "{r:?}");
    assert_eq!(map.points(), &before[..]);
    assert_eq!(map.journal().len(), 3);
    assert!(!map.journal()[2].accepted);
    let csv = map.journal_csv().unwrap();
    assert!(csv.starts_with("patch_idx,accepted,yaw_deg,tx,ty,tz,overlap,rmse\n"));
    assert_eq!(map.to_text().lines().count(), n + 1);
}

fn unique_ids(map: &FusedMap) -> bool {
    let mut ids: Vec<u64> = map.points().iter().map(|p| p.id).collect();
    ids.sort_unstable();
    ids.windows(2).all(|w| w[0] != w[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gating_and_rotation_sound(yaw in -20.0f64..20.0, dx in -3.0f64..3.0, dy in -3.0f64..3.0, c0 in 0u64..12) {
        let params = RegistrationParams::default();
        let a = lattice(0, 16, 8, 1.2);
        let b = move_patch(&lattice(c0, c0 + 16, 8, 1.2), &yaw_about(WorldPoint::default(), yaw, Vector3::new(dx, dy, 0.0)));
        let r = icp_refine(&a, &b, &RigidTransform::identity(), &params).unwrap();
        prop_assert!(is_rotation(&r.rotation));
        prop_assert!((0.0..=1.0).contains(&r.overlap_ratio));
        if r.accepted {
            prop_assert!(r.overlap_ratio >= params.overlap_gate && r.rmse <= params.rmse_gate_mm);
            let (_, initial) = match_residual(&a, &b, &RigidTransform::identity(), params.nn_gate_mm);
            prop_assert!(r.rmse <= initial);
        }
    }

    #[test]
    fn map_ids_stay_unique(shifts in proptest::collection::vec((0u64..10, -3.0f64..3.0), 1..5)) {
        let params = RegistrationParams { search_span_mm: 2.0, ..RegistrationParams::default() };
        let mut map = FusedMap::new();
        map.accumulate(&lattice(0, 16, 8, 1.0), &params).unwrap();
        for (c0, yaw) in shifts {
            let b = move_patch(&lattice(c0, c0 + 16, 8, 1.0), &RigidTransform::from_yaw_deg(yaw, Vector3::zeros()));
            map.accumulate(&b, &params).unwrap();
            prop_assert!(unique_ids(&map));
        }
    }
}
