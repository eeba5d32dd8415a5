//! Marker detection and the densified, uniquely indexed reference cloud.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::binary::BinaryImage;
use crate::error::{Error, Result};
use crate::geometry::{HeightMap, ImageFrame, PixelCoord, WorldPoint};

/// Marker centroids in row-major grid order (top-left first).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerGrid {
    rows: usize,
    cols: usize,
    pixels: Vec<PixelCoord>,
}

impl MarkerGrid {
    pub fn new(rows: usize, cols: usize, pixels: Vec<PixelCoord>) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::invalid(format!(
                "marker grid must be at least 2x2, got {rows}x{cols}"
            )));
        }
        if pixels.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} marker pixels for a {rows}x{cols} grid",
                pixels.len()
            )));
        }
        for r in 0..rows {
            for c in 0..cols {
                let p = pixels[r * cols + c];
                if c > 0 && p.x <= pixels[r * cols + c - 1].x {
                    return Err(Error::Layout(format!("row {r} is not increasing in x")));
                }
                if r > 0 && p.y <= pixels[(r - 1) * cols + c].y {
                    return Err(Error::Layout(format!("column {c} is not increasing in y")));
                }
            }
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[PixelCoord] {
        &self.pixels
    }

    pub fn at(&self, r: usize, c: usize) -> PixelCoord {
        self.pixels[r * self.cols + c]
    }
}

/// Finds exactly `rows * cols` marker blobs and sorts them into grid order.
///
/// The minimum blob area is swept from the largest component size downwards
/// until exactly the expected number of components survives.
pub fn detect_markers(
    no_contact: &HeightMap,
    marker_mask: &BinaryImage,
    rows: usize,
    cols: usize,
) -> Result<MarkerGrid> {
    if marker_mask.width() != no_contact.width() || marker_mask.height() != no_contact.height() {
        return Err(Error::invalid("marker mask and height map dimensions differ"));
    }
    if rows < 2 || cols < 2 {
        return Err(Error::invalid(format!(
            "expected marker grid must be at least 2x2, got {rows}x{cols}"
        )));
    }
    let expected = rows * cols;
    let comps = marker_mask.components();
    let mut areas: Vec<usize> = comps.stats.iter().map(|s| s.area).collect();
    areas.sort_unstable_by(|a, b| b.cmp(a));

    let mut min_area = None;
    let mut i = 0;
    while i < areas.len() {
        let t = areas[i];
        while i < areas.len() && areas[i] == t {
            i += 1;
        }
        if i == expected {
            min_area = Some(t);
            break;
        }
        if i > expected {
            break;
        }
    }
    let Some(min_area) = min_area else {
        // Report the blobs that look like markers rather than single-pixel specks.
        let typical = areas.get(areas.len().min(expected) / 2).copied().unwrap_or(0);
        let found = areas.iter().filter(|&&a| a * 4 >= typical).count();
        return Err(Error::DetectionFailure { found, expected });
    };
    log::debug!("marker detection settled at min blob area {min_area}");

    let centroids: Vec<PixelCoord> = comps
        .stats
        .iter()
        .filter(|s| s.area >= min_area)
        .map(|s| {
            let (x, y) = s.centroid();
            PixelCoord::new(x, y)
        })
        .collect();
    sort_into_grid(centroids, rows, cols)
}

/// Row-band clustering on y, then x within each band.
pub fn sort_into_grid(mut pts: Vec<PixelCoord>, rows: usize, cols: usize) -> Result<MarkerGrid> {
    if pts.len() != rows * cols {
        return Err(Error::DetectionFailure {
            found: pts.len(),
            expected: rows * cols,
        });
    }
    pts.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
    let mut gaps: Vec<f64> = pts.windows(2).map(|w| w[1].y - w[0].y).collect();
    gaps.sort_by(|a, b| b.total_cmp(a));
    let row_gaps = &gaps[..rows - 1];
    let median = row_gaps[row_gaps.len() / 2];
    let tol = median / 2.0;
    if !(tol > 0.0) {
        return Err(Error::Layout("row spacing is zero".into()));
    }

    let mut bands: Vec<Vec<PixelCoord>> = vec![vec![pts[0]]];
    for w in pts.windows(2) {
        if w[1].y - w[0].y > tol {
            bands.push(Vec::new());
        }
        bands.last_mut().unwrap().push(w[1]);
    }
    if bands.len() != rows || bands.iter().any(|b| b.len() != cols) {
        let sizes: Vec<usize> = bands.iter().map(Vec::len).collect();
        return Err(Error::Layout(format!(
            "row bands have sizes {sizes:?}, expected {rows} rows of {cols}"
        )));
    }
    let mut ordered = Vec::with_capacity(pts.len());
    for mut band in bands {
        band.sort_by(|a, b| a.x.total_cmp(&b.x));
        ordered.extend(band);
    }
    MarkerGrid::new(rows, cols, ordered)
}

/// One reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub id: u64,
    pub pixel: PixelCoord,
    pub world: WorldPoint,
}

/// Where a cloud came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub marker_rows: usize,
    pub marker_cols: usize,
    /// Hex SHA-256 over the marker pixels and the no-contact height payload.
    pub hash: String,
}

/// Dense reference grid; ids are `r * cols + c + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCloud {
    grid_rows: usize,
    grid_cols: usize,
    width: usize,
    height: usize,
    ppmm: f64,
    points: Vec<CloudPoint>,
    provenance: Provenance,
}

/// Densifies marker world points on a `rows x cols` grid into `(m+1) x (n+1)` points.
///
/// Original markers (cell remainder zero in both directions) are copied, edge
/// points interpolate linearly between two markers and interior points
/// bilinearly between four.
pub fn densify(rows: usize, cols: usize, markers: &[WorldPoint], m: usize, n: usize) -> Result<Vec<WorldPoint>> {
    if rows < 2 || cols < 2 || markers.len() != rows * cols {
        return Err(Error::invalid("marker world grid has the wrong shape"));
    }
    if m < rows - 1 || n < cols - 1 {
        return Err(Error::invalid(format!(
            "target {m}x{n} cells is coarser than the {rows}x{cols} marker grid"
        )));
    }
    if !m.is_multiple_of(rows - 1) || !n.is_multiple_of(cols - 1) {
        return Err(Error::invalid(format!(
            "target {m}x{n} cells is not an integer multiple of the {}x{} marker cells",
            rows - 1,
            cols - 1
        )));
    }
    let a = m / (rows - 1);
    let b = n / (cols - 1);
    let p = |i: usize, j: usize| markers[i * cols + j];
    let mix = |w: &[(f64, WorldPoint)]| {
        let mut q = WorldPoint::default();
        for (k, pt) in w {
            q.x += k * pt.x;
            q.y += k * pt.y;
            q.z += k * pt.z;
        }
        q
    };
    let mut out = Vec::with_capacity((m + 1) * (n + 1));
    for r in 0..=m {
        let (i, ru) = (r / a, r % a);
        let u = ru as f64 / a as f64;
        for c in 0..=n {
            let (j, cv) = (c / b, c % b);
            let v = cv as f64 / b as f64;
            let q = match (ru == 0, cv == 0) {
                (true, true) => p(i, j),
                (true, false) => mix(&[(1.0 - v, p(i, j)), (v, p(i, j + 1))]),
                (false, true) => mix(&[(1.0 - u, p(i, j)), (u, p(i + 1, j))]),
                (false, false) => mix(&[
                    ((1.0 - u) * (1.0 - v), p(i, j)),
                    ((1.0 - u) * v, p(i, j + 1)),
                    (u * (1.0 - v), p(i + 1, j)),
                    (u * v, p(i + 1, j + 1)),
                ]),
            };
            out.push(q);
        }
    }
    Ok(out)
}

fn provenance_hash(markers: &MarkerGrid, hm: &HeightMap) -> String {
    let mut h = Sha256::new();
    h.update((markers.rows as u64).to_le_bytes());
    h.update((markers.cols as u64).to_le_bytes());
    for p in &markers.pixels {
        h.update(p.x.to_le_bytes());
        h.update(p.y.to_le_bytes());
    }
    h.update((hm.width() as u64).to_le_bytes());
    h.update((hm.height() as u64).to_le_bytes());
    h.update(hm.ppmm().to_le_bytes());
    for v in hm.data() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Builds the reference cloud with `m x n` cells from detected markers.
pub fn interpolate_grid(markers: &MarkerGrid, hm: &HeightMap, m: usize, n: usize) -> Result<ReferenceCloud> {
    let marker_world = markers
        .pixels
        .iter()
        .map(|&p| hm.pixel_to_world(p))
        .collect::<Result<Vec<_>>>()?;
    let world = densify(markers.rows, markers.cols, &marker_world, m, n)?;
    let frame = hm.frame();
    let (wf, hf) = (hm.width() as f64 - 1.0, hm.height() as f64 - 1.0);
    let mut points = Vec::with_capacity(world.len());
    for (k, w) in world.into_iter().enumerate() {
        let pixel = frame.world_to_pixel(w);
        if !(pixel.x > 0.0 && pixel.y > 0.0 && pixel.x < wf && pixel.y < hf) {
            return Err(Error::Layout(format!(
                "reference point {} maps outside the image at ({}, {})",
                k + 1,
                pixel.x,
                pixel.y
            )));
        }
        points.push(CloudPoint {
            id: k as u64 + 1,
            pixel,
            world: w,
        });
    }
    Ok(ReferenceCloud {
        grid_rows: m + 1,
        grid_cols: n + 1,
        width: hm.width(),
        height: hm.height(),
        ppmm: hm.ppmm(),
        points,
        provenance: Provenance {
            marker_rows: markers.rows,
            marker_cols: markers.cols,
            hash: provenance_hash(markers, hm),
        },
    })
}

const HEADER_TAG: &str = "# invcloud-reference v1";

impl ReferenceCloud {
    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }

    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[CloudPoint] {
        &self.points
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Dimensions of the source lattice.
    pub fn image_size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn ppmm(&self) -> f64 {
        self.ppmm
    }

    pub fn frame(&self) -> ImageFrame {
        crate::geometry::image_center_and_scale(self.width, self.height, self.ppmm)
            .expect("cloud dimensions were validated at construction")
    }

    pub fn id_of(&self, r: usize, c: usize) -> u64 {
        (r * self.grid_cols + c + 1) as u64
    }

    /// Grid cell `(r, c)` of an id.
    pub fn cell_of(&self, id: u64) -> Result<(usize, usize)> {
        self.get(id)?;
        let k = id as usize - 1;
        Ok((k / self.grid_cols, k % self.grid_cols))
    }

    pub fn get(&self, id: u64) -> Result<&CloudPoint> {
        if id == 0 {
            return Err(Error::NotFound(id));
        }
        self.points.get(id as usize - 1).ok_or(Error::NotFound(id))
    }

    pub fn lookup(&self, id: u64) -> Result<(PixelCoord, WorldPoint)> {
        self.get(id).map(|p| (p.pixel, p.world))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(64 * (self.points.len() + 1));
        let _ = writeln!(
            s,
            "{HEADER_TAG} rows={} cols={} markers={}x{} width={} height={} ppmm={} hash={}",
            self.grid_rows,
            self.grid_cols,
            self.provenance.marker_rows,
            self.provenance.marker_cols,
            self.width,
            self.height,
            self.ppmm,
            self.provenance.hash
        );
        for p in &self.points {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {}",
                p.id, p.pixel.x, p.pixel.y, p.world.x, p.world.y, p.world.z
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::format("empty reference cloud file"))?;
        let rest = header
            .strip_prefix(HEADER_TAG)
            .ok_or_else(|| Error::format("missing reference cloud header"))?;
        let mut fields = std::collections::HashMap::new();
        for kv in rest.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::format(format!("bad header field {kv:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::format(format!("header lacks {k}")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::format(format!("header field {k} is not an integer")))
        };
        let grid_rows = num("rows")?;
        let grid_cols = num("cols")?;
        let width = num("width")?;
        let height = num("height")?;
        let ppmm: f64 = get("ppmm")?
            .parse()
            .map_err(|_| Error::format("header field ppmm is not a number"))?;
        crate::geometry::image_center_and_scale(width, height, ppmm)?;
        let (mr, mc) = get("markers")?
            .split_once('x')
            .ok_or_else(|| Error::format("markers must look like RxC"))?;
        let provenance = Provenance {
            marker_rows: mr.parse().map_err(|_| Error::format("bad marker rows"))?,
            marker_cols: mc.parse().map_err(|_| Error::format("bad marker cols"))?,
            hash: get("hash")?.to_string(),
        };

        let mut points = Vec::with_capacity(grid_rows * grid_cols);
        for (k, line) in lines.enumerate() {
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != 6 {
                return Err(Error::format(format!("point line {} has {} fields", k + 1, vals.len())));
            }
            let id: u64 = vals[0]
                .parse()
                .map_err(|_| Error::format(format!("bad id on point line {}", k + 1)))?;
            if id != k as u64 + 1 {
                return Err(Error::format(format!("expected id {}, found {id}", k + 1)));
            }
            let f = |i: usize| -> Result<f64> {
                vals[i]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(format!("bad number on point line {}", k + 1)))
            };
            points.push(CloudPoint {
                id,
                pixel: PixelCoord::new(f(1)?, f(2)?),
                world: WorldPoint::new(f(3)?, f(4)?, f(5)?),
            });
        }
        if points.len() != grid_rows * grid_cols {
            return Err(Error::format(format!(
                "{} points for a {grid_rows}x{grid_cols} grid",
                points.len()
            )));
        }
        Ok(Self {
            grid_rows,
            grid_cols,
            width,
            height,
            ppmm,
            points,
            provenance,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
