//! Pose track and ground-truth schedule CSV files.
//!
//! Values are written with the shortest representation that reads back to the
//! same `f64`, so a track survives a save/load cycle bit for bit.

use std::path::Path;

use super::{Pose, TrackRow};
use crate::error::{Error, Result};

pub const TRACK_HEADER: [&str; 11] = [
    "frame", "t_ms", "tx_mm", "ty_mm", "tz_mm", "rx_deg", "ry_deg", "rz_deg", "tracked", "n_corr", "aniso_ratio",
];

pub const GROUND_TRUTH_HEADER: [&str; 8] = ["frame", "t_ms", "tx_mm", "ty_mm", "tz_mm", "rx_deg", "ry_deg", "rz_deg"];

const ANISO_KEY: &str = "aniso_threshold=";

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::format(format!("csv: {e}"))
}

fn comment(aniso_threshold: f64) -> String {
    format!(
        "# rotation R = Rz(rz) * Rx(rx) * Ry(ry) (Z-X-Y), angles in degrees, lengths in mm; \
         yaw observable when aniso_ratio >= threshold; {ANISO_KEY}{aniso_threshold}\n"
    )
}

fn finish(w: csv::Writer<Vec<u8>>, mut head: String) -> Result<String> {
    let bytes = w.into_inner().map_err(csv_err)?;
    head.push_str(&String::from_utf8(bytes).map_err(csv_err)?);
    Ok(head)
}

/// Serialises a track. `aniso_threshold` is recorded in the comment line so a
/// reader can recover the yaw-observable flag.
pub fn track_to_csv(rows: &[TrackRow], aniso_threshold: f64) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACK_HEADER).map_err(csv_err)?;
    for r in rows {
        let p = r.pose;
        let mut rec = vec![r.frame.to_string(), r.t_ms.to_string()];
        rec.extend(p.as_array().iter().map(f64::to_string));
        rec.push(u8::from(r.tracked).to_string());
        rec.push(r.n_corr.to_string());
        rec.push(r.aniso_ratio.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w, comment(aniso_threshold))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(r: &mut csv::Reader<&[u8]>, expect: &[&str]) -> Result<()> {
    let h = r.headers().map_err(csv_err)?;
    if h.iter().ne(expect.iter().copied()) {
        return Err(Error::format(format!(
            "unexpected header {:?}, expected {}",
            h.iter().collect::<Vec<_>>(),
            expect.join(",")
        )));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, line: usize) -> Result<T> {
    rec.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(format!("row {line}: bad value in column {k}")))
}

fn pose_at(rec: &csv::StringRecord, line: usize) -> Result<Pose> {
    let mut a = [0.0; 6];
    for (k, v) in a.iter_mut().enumerate() {
        *v = field(rec, 2 + k, line)?;
    }
    Ok(Pose::from_array(a))
}

/// Parses a track written by [`track_to_csv`].
pub fn track_from_csv(text: &str) -> Result<Vec<TrackRow>> {
    let threshold = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.split(ANISO_KEY).nth(1))
        .and_then(|s| s.trim().parse::<f64>().ok())
        .unwrap_or(f64::INFINITY);
    let mut r = reader(text);
    check_header(&mut r, &TRACK_HEADER)?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let tracked: u8 = field(&rec, 8, line)?;
        let aniso_ratio: f64 = field(&rec, 10, line)?;
        out.push(TrackRow {
            frame: field(&rec, 0, line)?,
            t_ms: field(&rec, 1, line)?,
            pose: pose_at(&rec, line)?,
            tracked: tracked != 0,
            n_corr: field(&rec, 9, line)?,
            aniso_ratio,
            yaw_observable: aniso_ratio >= threshold,
        });
    }
    Ok(out)
}

pub fn ground_truth_to_csv(gt: &[(usize, Pose)], frame_period_ms: f64) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GROUND_TRUTH_HEADER).map_err(csv_err)?;
    for (i, p) in gt {
        let mut rec = vec![i.to_string(), (*i as f64 * frame_period_ms).to_string()];
        rec.extend(p.as_array().iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w, "# ground-truth object pose relative to the first frame, Z-X-Y degrees, mm\n".into())
}

pub fn ground_truth_from_csv(text: &str) -> Result<Vec<(usize, Pose)>> {
    let mut r = reader(text);
    check_header(&mut r, &GROUND_TRUTH_HEADER)?;
    r.records()
        .enumerate()
        .map(|(line, rec)| {
            let rec = rec.map_err(csv_err)?;
            Ok((field(&rec, 0, line)?, pose_at(&rec, line)?))
        })
        .collect()
}

pub fn save_track(rows: &[TrackRow], aniso_threshold: f64, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, track_to_csv(rows, aniso_threshold)?)?;
    Ok(())
}

pub fn load_track(path: impl AsRef<Path>) -> Result<Vec<TrackRow>> {
    track_from_csv(&std::fs::read_to_string(path)?)
}

pub fn save_ground_truth(gt: &[(usize, Pose)], frame_period_ms: f64, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, ground_truth_to_csv(gt, frame_period_ms)?)?;
    Ok(())
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<(usize, Pose)>> {
    ground_truth_from_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(frame: usize, a: [f64; 6], tracked: bool, aniso: f64) -> TrackRow {
        TrackRow {
            frame,
            t_ms: frame as f64 * 40.0,
            pose: Pose::from_array(a),
            tracked,
            n_corr: 3 * frame,
            aniso_ratio: aniso,
            yaw_observable: aniso >= 1.15,
        }
    }

    #[test]
    fn header_and_comment() {
        let text = track_to_csv(&[row(0, [0.0; 6], true, 2.0)], 1.15).unwrap();
        let mut lines = text.lines();
        let c = lines.next().unwrap();
        assert!(c.starts_with('#') && c.contains("Z-X-Y") && c.contains("aniso_threshold=1.15"));
        assert_eq!(lines.next().unwrap(), TRACK_HEADER.join(","));
    }

    #[test]
    fn nan_ratio_and_untracked_rows_survive() {
        let rows = vec![row(0, [0.0; 6], false, f64::NAN), row(1, [1.0; 6], true, 1.0)];
        let back = track_from_csv(&track_to_csv(&rows, 1.15).unwrap()).unwrap();
        assert!(back[0].aniso_ratio.is_nan() && !back[0].tracked && !back[0].yaw_observable);
        assert_eq!(back[1], rows[1]);
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(track_from_csv("frame,t_ms\n0,0\n").is_err());
        assert!(ground_truth_from_csv(&track_to_csv(&[], 1.15).unwrap()).is_err());
        assert!(track_from_csv(&format!("{}\n0,x,0,0,0,0,0,0,1,0,1\n", TRACK_HEADER.join(","))).is_err());
    }

    proptest! {
        #[test]
        fn track_round_trip_is_exact(
            poses in proptest::collection::vec((proptest::array::uniform6(-1e3f64..1e3), any::<bool>(), 0.5f64..5.0), 0..20)
        ) {
            let rows: Vec<TrackRow> = poses.iter().enumerate().map(|(i, (a, t, s))| row(i, *a, *t, *s)).collect();
            let back = track_from_csv(&track_to_csv(&rows, 1.15).unwrap()).unwrap();
            prop_assert_eq!(back, rows);
        }

        #[test]
        fn ground_truth_round_trip_is_exact(poses in proptest::collection::vec(proptest::array::uniform6(-1e3f64..1e3), 0..20)) {
            let gt: Vec<(usize, Pose)> = poses.iter().enumerate().map(|(i, a)| (i, Pose::from_array(*a))).collect();
            prop_assert_eq!(ground_truth_from_csv(&ground_truth_to_csv(&gt, 40.0).unwrap()).unwrap(), gt);
        }
    }
}
