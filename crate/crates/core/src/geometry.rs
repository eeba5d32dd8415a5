//! Pixel-lattice scalar fields and the pixel/world mapping.
//!
//! World coordinates follow the sensor convention: X to the right, Y up (the
//! image row axis is flipped), Z along the gel normal. A single scale `s`
//! converts pixel offsets and pixel-height units alike, so the mapping is
//! isotropic and rotations estimated in world space are scale-free.

use crate::error::{Error, Result};

/// Continuous pixel coordinate; sub-pixel values are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Nearest integer lattice site.
    pub fn rounded(&self) -> (i64, i64) {
        (self.x.round() as i64, self.y.round() as i64)
    }
}

/// A point in the sensor world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &nalgebra::Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Image center and world scale of a lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageFrame {
    pub cx: f64,
    pub cy: f64,
    /// World units per pixel, `ppmm / 1000`.
    pub s: f64,
    pub ppmm: f64,
}

/// Computes `(cx, cy, s)` for a `width` x `height` lattice.
pub fn image_center_and_scale(width: usize, height: usize, ppmm: f64) -> Result<ImageFrame> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "lattice dimensions must be positive, got {width}x{height}"
        )));
    }
    if !(ppmm > 0.0 && ppmm.is_finite()) {
        return Err(Error::invalid(format!("ppmm must be positive, got {ppmm}")));
    }
    Ok(ImageFrame {
        cx: (width as f64 - 1.0) / 2.0,
        cy: (height as f64 - 1.0) / 2.0,
        s: ppmm / 1000.0,
        ppmm,
    })
}

impl ImageFrame {
    /// XY part of the pixel to world mapping; `h` is the lattice height value.
    pub fn lift(&self, p: PixelCoord, h: f64) -> WorldPoint {
        WorldPoint {
            x: (p.x - self.cx) * self.s,
            y: (self.cy - p.y) * self.s,
            z: h * self.s,
        }
    }

    pub fn world_to_pixel(&self, w: WorldPoint) -> PixelCoord {
        PixelCoord {
            x: w.x / self.s + self.cx,
            y: -w.y / self.s + self.cy,
        }
    }

    /// Millimetres represented by one world unit.
    ///
    /// One pixel spans `s` world units and `1 / ppmm` millimetres.
    pub fn mm_per_world(&self) -> f64 {
        1.0 / (self.s * self.ppmm)
    }

    pub fn world_to_mm(&self, w: WorldPoint) -> [f64; 3] {
        let k = self.mm_per_world();
        [w.x * k, w.y * k, w.z * k]
    }
}

/// Inverse XY mapping with an explicit scale.
pub fn world_to_pixel(w: WorldPoint, cx: f64, cy: f64, s: f64) -> Result<PixelCoord> {
    if !(s > 0.0) {
        return Err(Error::invalid(format!("scale must be positive, got {s}")));
    }
    Ok(PixelCoord {
        x: w.x / s + cx,
        y: -w.y / s + cy,
    })
}

/// Row-major scalar field in pixel-height units.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    width: usize,
    height: usize,
    ppmm: f64,
    data: Vec<f64>,
}

impl HeightMap {
    pub fn new(width: usize, height: usize, ppmm: f64, data: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::invalid(format!(
                "height map needs at least 2x2 pixels, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if !(ppmm > 0.0 && ppmm.is_finite()) {
            return Err(Error::invalid(format!("ppmm must be positive, got {ppmm}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("height map contains non-finite values"));
        }
        Ok(Self {
            width,
            height,
            ppmm,
            data,
        })
    }

    pub fn flat(width: usize, height: usize, ppmm: f64, value: f64) -> Result<Self> {
        Self::new(width, height, ppmm, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ppmm(&self) -> f64 {
        self.ppmm
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn frame(&self) -> ImageFrame {
        // Dimensions and ppmm were validated at construction.
        ImageFrame {
            cx: (self.width as f64 - 1.0) / 2.0,
            cy: (self.height as f64 - 1.0) / 2.0,
            s: self.ppmm / 1000.0,
            ppmm: self.ppmm,
        }
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x <= (self.width - 1) as f64
            && p.y <= (self.height - 1) as f64
    }

    /// Bilinear height at a sub-pixel location.
    pub fn sample_bilinear(&self, p: PixelCoord) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutOfRange {
                x: p.x,
                y: p.y,
                width: self.width,
                height: self.height,
            });
        }
        let x0 = p.x.floor() as usize;
        let y0 = p.y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let alpha = p.x - x0 as f64;
        let beta = p.y - y0 as f64;
        let top = lerp(self.get(x0, y0), self.get(x1, y0), alpha);
        let bottom = lerp(self.get(x0, y1), self.get(x1, y1), alpha);
        Ok(lerp(top, bottom, beta))
    }

    pub fn pixel_to_world(&self, p: PixelCoord) -> Result<WorldPoint> {
        let h = self.sample_bilinear(p)?;
        Ok(self.frame().lift(p, h))
    }

    pub fn same_shape(&self, other: &HeightMap) -> bool {
        self.width == other.width && self.height == other.height
    }
}

// Same weights as the four-corner expansion, but exact on constant neighbourhoods.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + t * (b - a)
    }
}

/// Surface slopes `dh/dx`, `dh/dy` in pixel-height per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    ppmm: f64,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl GradientField {
    pub fn new(width: usize, height: usize, ppmm: f64, gx: Vec<f64>, gy: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::invalid(format!(
                "gradient field needs at least 2x2 pixels, got {width}x{height}"
            )));
        }
        let n = width * height;
        if gx.len() != n || gy.len() != n {
            return Err(Error::invalid(format!(
                "gradient lengths ({}, {}) do not match {width}x{height}",
                gx.len(),
                gy.len()
            )));
        }
        if !(ppmm > 0.0 && ppmm.is_finite()) {
            return Err(Error::invalid(format!("ppmm must be positive, got {ppmm}")));
        }
        if gx.iter().chain(gy.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("gradient field contains non-finite values"));
        }
        Ok(Self {
            width,
            height,
            ppmm,
            gx,
            gy,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ppmm(&self) -> f64 {
        self.ppmm
    }

    pub fn gx(&self) -> &[f64] {
        &self.gx
    }

    pub fn gy(&self) -> &[f64] {
        &self.gy
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &GradientField, b: f64) -> Result<GradientField> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::invalid("gradient fields differ in size"));
        }
        let mix = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| a * p + b * q).collect();
        GradientField::new(
            self.width,
            self.height,
            self.ppmm,
            mix(&self.gx, &other.gx),
            mix(&self.gy, &other.gy),
        )
    }
}

/// Even-odd point in polygon test.
pub fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

pub fn segment_distance(a: [f64; 2], b: [f64; 2], x: f64, y: f64) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((x - a[0]) * dx + (y - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x - a[0] - t * dx).hypot(y - a[1] - t * dy)
}

/// Unsigned distance from a point to the polygon boundary.
pub fn distance_to_outline(poly: &[[f64; 2]], x: f64, y: f64) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| segment_distance(poly[i], poly[(i + 1) % n], x, y))
        .fold(f64::INFINITY, f64::min)
}
