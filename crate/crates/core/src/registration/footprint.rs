//! Pixel-resolution contact footprint used to rank registration candidates.

use crate::binary::BinaryImage;
use crate::error::{Error, Result};
use crate::geometry::{HeightMap, PixelCoord, WorldPoint};

/// Distance field and heights of one contact, in sensor millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFootprint {
    width: usize,
    height: usize,
    ppmm: f64,
    cx: f64,
    cy: f64,
    margin: usize,
    /// Distance (mm) to the nearest contact pixel; zero on contact.
    dist: Vec<f32>,
    /// Surface height (mm) of the nearest contact pixel.
    z: Vec<f32>,
    /// Contact pixels on a coarse lattice, lifted to millimetres.
    samples: Vec<WorldPoint>,
}

/// Exact 1-D squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], d: &mut [f64], arg: &mut [usize]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut zb = vec![0.0f64; n + 1];
    let mut k = 0;
    let first = f.iter().position(|x| x.is_finite());
    let Some(first) = first else {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    };
    v[0] = first;
    zb[0] = f64::NEG_INFINITY;
    zb[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= zb[k] && k > 0 {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                zb[k] = s;
                zb[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut j = 0;
    for q in 0..n {
        while zb[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        d[q] = (q as f64 - p as f64).powi(2) + f[p];
        arg[q] = p;
    }
}

impl SensorFootprint {
    /// Builds the field from a contact mask and its height map. Pixels closer
    /// than `margin` to an edge are outside the view; samples are taken every
    /// `stride` pixels.
    pub fn new(mask: &BinaryImage, height: &HeightMap, margin: usize, stride: usize) -> Result<Self> {
        if mask.width() != height.width() || mask.height() != height.height() {
            return Err(Error::invalid("mask and height map sizes differ"));
        }
        let (w, h) = (mask.width(), mask.height());
        let ppmm = height.ppmm();
        let frame = height.frame();
        // Column pass then row pass, carrying the nearest contact pixel.
        let mut col_d = vec![f64::INFINITY; w * h];
        let mut col_arg = vec![0usize; w * h];
        let (mut f, mut d, mut arg) = (vec![0.0; h], vec![0.0; h], vec![0usize; h]);
        for x in 0..w {
            for y in 0..h {
                f[y] = if mask.get(x, y) { 0.0 } else { f64::INFINITY };
            }
            edt_1d(&f, &mut d, &mut arg);
            for y in 0..h {
                col_d[y * w + x] = d[y];
                col_arg[y * w + x] = arg[y];
            }
        }
        let mut dist = vec![f32::INFINITY; w * h];
        let mut z = vec![f32::NAN; w * h];
        let (mut f, mut d, mut arg) = (vec![0.0; w], vec![0.0; w], vec![0usize; w]);
        for y in 0..h {
            f.copy_from_slice(&col_d[y * w..(y + 1) * w]);
            edt_1d(&f, &mut d, &mut arg);
            for x in 0..w {
                if d[x].is_finite() {
                    let (sx, sy) = (arg[x], col_arg[y * w + arg[x]]);
                    dist[y * w + x] = (d[x].sqrt() / ppmm) as f32;
                    z[y * w + x] = (height.get(sx, sy) / ppmm) as f32;
                }
            }
        }
        let stride = stride.max(1);
        let mut samples = Vec::new();
        for y in (margin..h.saturating_sub(margin)).step_by(stride) {
            for x in (margin..w.saturating_sub(margin)).step_by(stride) {
                if mask.get(x, y) {
                    let [a, b, c] = frame.world_to_mm(frame.lift(PixelCoord::new(x as f64, y as f64), height.get(x, y)));
                    samples.push(WorldPoint::new(a, b, c));
                }
            }
        }
        Ok(Self {
            width: w,
            height: h,
            ppmm,
            cx: frame.cx,
            cy: frame.cy,
            margin,
            dist,
            z,
            samples,
        })
    }

    /// Size of one pixel in millimetres.
    pub fn pixel_mm(&self) -> f64 {
        1.0 / self.ppmm
    }

    pub fn samples(&self) -> &[WorldPoint] {
        &self.samples
    }

    /// Distance to contact and contact height at sensor point `(x, y)` mm,
    /// or `None` outside the view.
    pub fn probe(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let px = (x * self.ppmm + self.cx).round();
        let py = (self.cy - y * self.ppmm).round();
        let m = self.margin as f64;
        if px < m || py < m || px > (self.width - 1 - self.margin) as f64 || py > (self.height - 1 - self.margin) as f64 {
            return None;
        }
        let i = py as usize * self.width + px as usize;
        Some((self.dist[i] as f64, self.z[i] as f64))
    }
}
