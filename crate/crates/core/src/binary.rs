//! Binary images: morphology with elliptical kernels, 8-connected components
//! and outer-contour tracing.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "mask length {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Out-of-bounds reads return `false`.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_shape(&self, other: &BinaryImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn bbox(&self) -> Option<BBox> {
        let mut b: Option<BBox> = None;
        for y in 0..self.height {
            let row = &self.bits[y * self.width..(y + 1) * self.width];
            let Some(first) = row.iter().position(|&v| v) else {
                continue;
            };
            let last = row.iter().rposition(|&v| v).unwrap_or(first);
            b = Some(match b {
                None => BBox {
                    x0: first,
                    y0: y,
                    x1: last,
                    y1: y,
                },
                Some(bb) => BBox {
                    x0: bb.x0.min(first),
                    y0: bb.y0,
                    x1: bb.x1.max(last),
                    y1: y,
                },
            });
        }
        b
    }

    pub fn and(&self, other: &BinaryImage) -> Result<BinaryImage> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryImage) -> Result<BinaryImage> {
        self.zip_with(other, |a, b| a || b)
    }

    fn zip_with(&self, other: &BinaryImage, f: impl Fn(bool, bool) -> bool) -> Result<BinaryImage> {
        if !self.same_shape(other) {
            return Err(Error::invalid("binary images differ in size"));
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        Ok(BinaryImage {
            width: self.width,
            height: self.height,
            bits,
        })
    }

    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.same_shape(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Integer shift; pixels leaving the frame are dropped.
    pub fn translated(&self, dx: i64, dy: i64) -> BinaryImage {
        BinaryImage::from_fn(self.width, self.height, |x, y| {
            self.get_signed(x as i64 - dx, y as i64 - dy)
        })
    }

    /// Set pixels in raster order.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    fn row_prefix(&self) -> Vec<u32> {
        let w1 = self.width + 1;
        let mut p = vec![0u32; w1 * self.height];
        for y in 0..self.height {
            let mut acc = 0u32;
            for x in 0..self.width {
                acc += self.bits[y * self.width + x] as u32;
                p[y * w1 + x + 1] = acc;
            }
        }
        p
    }

    /// Morphological dilation; pixels outside the image count as background.
    pub fn dilate(&self, k: &Kernel) -> BinaryImage {
        let mut out = BinaryImage::new(self.width, self.height);
        let Some(bb) = self.bbox() else {
            return out;
        };
        let pre = self.row_prefix();
        let w1 = self.width + 1;
        let (w, h) = (self.width as i64, self.height as i64);
        let ylo = (bb.y0 as i64 - k.max_dy()).max(0);
        let yhi = (bb.y1 as i64 + k.max_dy()).min(h - 1);
        let xlo = (bb.x0 as i64 - k.max_dx()).max(0);
        let xhi = (bb.x1 as i64 + k.max_dx()).min(w - 1);
        for y in ylo..=yhi {
            for x in xlo..=xhi {
                let hit = k.rows.iter().any(|&(dy, lo, hi)| {
                    // Output (x, y) sees source (x - dx, y - dy) for dx in the reflected span.
                    let sy = y - dy;
                    if sy < 0 || sy >= h {
                        return false;
                    }
                    let a = (x - hi).max(0);
                    let b = (x - lo).min(w - 1);
                    a <= b && pre[sy as usize * w1 + b as usize + 1] > pre[sy as usize * w1 + a as usize]
                });
                if hit {
                    out.bits[y as usize * self.width + x as usize] = true;
                }
            }
        }
        out
    }

    /// Morphological erosion; pixels outside the image count as foreground.
    pub fn erode(&self, k: &Kernel) -> BinaryImage {
        let mut out = BinaryImage::new(self.width, self.height);
        if self.bbox().is_none() {
            return out;
        }
        let pre = self.row_prefix();
        let w1 = self.width + 1;
        let (w, h) = (self.width as i64, self.height as i64);
        for (x, y) in self.ones().collect::<Vec<_>>() {
            let (x, y) = (x as i64, y as i64);
            let keep = k.rows.iter().all(|&(dy, lo, hi)| {
                let sy = y + dy;
                if sy < 0 || sy >= h {
                    return true;
                }
                let a = (x + lo).max(0);
                let b = (x + hi).min(w - 1);
                a > b || pre[sy as usize * w1 + b as usize + 1] - pre[sy as usize * w1 + a as usize] == (b - a + 1) as u32
            });
            if keep {
                out.bits[y as usize * self.width + x as usize] = true;
            }
        }
        out
    }

    /// `iterations` dilations followed by as many erosions.
    pub fn close(&self, k: &Kernel, iterations: usize) -> BinaryImage {
        let mut img = self.clone();
        for _ in 0..iterations {
            img = img.dilate(k);
        }
        for _ in 0..iterations {
            img = img.erode(k);
        }
        img
    }

    /// 8-connected component labelling. Labels start at 1; 0 is background.
    pub fn components(&self) -> Components {
        let mut labels = vec![0u32; self.bits.len()];
        let mut comps = Vec::new();
        let mut stack = Vec::new();
        let (w, h) = (self.width as i64, self.height as i64);
        for start in 0..self.bits.len() {
            if !self.bits[start] || labels[start] != 0 {
                continue;
            }
            let label = comps.len() as u32 + 1;
            let mut stats = ComponentStats {
                label,
                area: 0,
                sum_x: 0.0,
                sum_y: 0.0,
                first: (start % self.width, start / self.width),
            };
            labels[start] = label;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % self.width) as i64, (i / self.width) as i64);
                stats.area += 1;
                stats.sum_x += x as f64;
                stats.sum_y += y as f64;
                for (dx, dy) in NEIGHBORS_8 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = ny as usize * self.width + nx as usize;
                    if self.bits[j] && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
            comps.push(stats);
        }
        Components {
            width: self.width,
            height: self.height,
            labels,
            stats: comps,
        }
    }

    /// Removes 8-connected components with `area <= max_area`.
    pub fn remove_small_components(&self, max_area: usize) -> BinaryImage {
        if max_area == 0 {
            return self.clone();
        }
        let comps = self.components();
        let keep: Vec<bool> = comps.stats.iter().map(|s| s.area > max_area).collect();
        let bits = comps
            .labels
            .iter()
            .map(|&l| l != 0 && keep[l as usize - 1])
            .collect();
        BinaryImage {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    /// The largest component by pixel count (first in raster order on ties).
    pub fn largest_component(&self) -> Option<BinaryImage> {
        let comps = self.components();
        let best = comps
            .stats
            .iter()
            .fold(None::<&ComponentStats>, |acc, s| match acc {
                Some(a) if a.area >= s.area => Some(a),
                _ => Some(s),
            })?;
        Some(comps.mask_of(best.label))
    }
}

const NEIGHBORS_8: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

// Clockwise in image coordinates (y down), starting west.
const MOORE: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentStats {
    pub label: u32,
    pub area: usize,
    pub sum_x: f64,
    pub sum_y: f64,
    /// Topmost-leftmost pixel.
    pub first: (usize, usize),
}

impl ComponentStats {
    pub fn centroid(&self) -> (f64, f64) {
        (self.sum_x / self.area as f64, self.sum_y / self.area as f64)
    }
}

#[derive(Debug, Clone)]
pub struct Components {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    pub stats: Vec<ComponentStats>,
}

impl Components {
    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn mask_of(&self, label: u32) -> BinaryImage {
        BinaryImage {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }

    /// Outer boundary of a component by Moore-neighbour tracing.
    ///
    /// Pixels are listed in traversal order; thin parts are visited twice.
    pub fn outer_contour(&self, label: u32) -> Vec<(usize, usize)> {
        let Some(stats) = self.stats.iter().find(|s| s.label == label) else {
            return Vec::new();
        };
        let inside = |x: i64, y: i64| {
            x >= 0
                && y >= 0
                && (x as usize) < self.width
                && (y as usize) < self.height
                && self.labels[y as usize * self.width + x as usize] == label
        };
        let start = (stats.first.0 as i64, stats.first.1 as i64);
        let mut contour = vec![stats.first];
        // The west neighbour of the topmost-leftmost pixel is background.
        let step = |cur: (i64, i64), from: usize| -> Option<((i64, i64), usize)> {
            for i in 1..=8 {
                let d = (from + i) % 8;
                let (nx, ny) = (cur.0 + MOORE[d].0, cur.1 + MOORE[d].1);
                if inside(nx, ny) {
                    // Backtrack is the previously examined (background) neighbour.
                    let b = (from + i - 1) % 8;
                    let bx = cur.0 + MOORE[b].0 - nx;
                    let by = cur.1 + MOORE[b].1 - ny;
                    let back = MOORE.iter().position(|&m| m == (bx, by)).unwrap_or(0);
                    return Some(((nx, ny), back));
                }
            }
            None
        };
        let Some((first_move, mut from)) = step(start, 0) else {
            return contour;
        };
        let mut cur = first_move;
        let limit = 4 * self.width * self.height + 8;
        for _ in 0..limit {
            if cur == start {
                match step(cur, from) {
                    Some((next, _)) if next == first_move => break,
                    _ => {}
                }
            }
            contour.push((cur.0 as usize, cur.1 as usize));
            match step(cur, from) {
                Some((next, back)) => {
                    cur = next;
                    from = back;
                }
                None => break,
            }
        }
        contour
    }
}

/// Polygon area of a closed pixel contour (shoelace over pixel centres).
pub fn contour_area(contour: &[(usize, usize)]) -> f64 {
    if contour.len() < 3 {
        return 0.0;
    }
    let n = contour.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (x0, y0) = contour[i];
        let (x1, y1) = contour[(i + 1) % n];
        acc += x0 as f64 * y1 as f64 - x1 as f64 * y0 as f64;
    }
    0.5 * acc.abs()
}

/// Elliptical structuring element, stored as per-row horizontal spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    size: usize,
    /// `(dy, dx_lo, dx_hi)` relative to the anchor.
    rows: Vec<(i64, i64, i64)>,
}

impl Kernel {
    /// Ellipse inscribed in a `size` x `size` box, anchored at its centre.
    pub fn ellipse(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("kernel size must be positive"));
        }
        let r = (size / 2) as i64;
        let c = r;
        let mut rows = Vec::new();
        for i in 0..size as i64 {
            let dy = i - r;
            let (j1, j2) = if r == 0 {
                (0, size as i64)
            } else if dy.abs() <= r {
                let dx = (c as f64 * (((r * r - dy * dy) as f64) / (r * r) as f64).sqrt()).round() as i64;
                ((c - dx).max(0), (c + dx + 1).min(size as i64))
            } else {
                (0, 0)
            };
            if j2 > j1 {
                rows.push((dy, j1 - c, j2 - 1 - c));
            }
        }
        Ok(Self { size, rows })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Offsets covered by the element.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        self.rows
            .iter()
            .flat_map(|&(dy, lo, hi)| (lo..=hi).map(move |dx| (dx, dy)))
            .collect()
    }

    fn max_dy(&self) -> i64 {
        self.rows.iter().map(|r| r.0.abs()).max().unwrap_or(0)
    }

    fn max_dx(&self) -> i64 {
        self.rows.iter().map(|r| r.1.abs().max(r.2.abs())).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> BinaryImage {
        BinaryImage::from_fn(w, h, |x, y| {
            (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r
        })
    }

    // Direct definition over kernel offsets, for cross-checking the span version.
    fn dilate_naive(img: &BinaryImage, k: &Kernel) -> BinaryImage {
        let offs = k.offsets();
        BinaryImage::from_fn(img.width(), img.height(), |x, y| {
            offs.iter().any(|&(dx, dy)| img.get_signed(x as i64 - dx, y as i64 - dy))
        })
    }

    fn erode_naive(img: &BinaryImage, k: &Kernel) -> BinaryImage {
        let offs = k.offsets();
        let (w, h) = (img.width() as i64, img.height() as i64);
        BinaryImage::from_fn(img.width(), img.height(), |x, y| {
            offs.iter().all(|&(dx, dy)| {
                let (sx, sy) = (x as i64 + dx, y as i64 + dy);
                sx < 0 || sy < 0 || sx >= w || sy >= h || img.get(sx as usize, sy as usize)
            })
        })
    }

    #[test]
    fn ellipse_kernel_shapes() {
        let k7 = Kernel::ellipse(7).unwrap();
        let widths: Vec<i64> = k7.rows.iter().map(|r| r.2 - r.1 + 1).collect();
        assert_eq!(widths, vec![1, 5, 7, 7, 7, 5, 1]);
        let k5 = Kernel::ellipse(5).unwrap();
        let widths: Vec<i64> = k5.rows.iter().map(|r| r.2 - r.1 + 1).collect();
        assert_eq!(widths, vec![1, 5, 5, 5, 1]);
        assert_eq!(Kernel::ellipse(1).unwrap().offsets(), vec![(0, 0)]);
    }

    #[test]
    fn span_morphology_matches_naive() {
        let mut state = 12345u64;
        let img = BinaryImage::from_fn(23, 17, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33).is_multiple_of(3)
        });
        for size in [1, 3, 5, 7] {
            let k = Kernel::ellipse(size).unwrap();
            assert_eq!(img.dilate(&k), dilate_naive(&img, &k), "dilate {size}");
            assert_eq!(img.erode(&k), erode_naive(&img, &k), "erode {size}");
        }
    }

    #[test]
    fn components_and_largest() {
        let mut img = BinaryImage::new(10, 6);
        for (x, y) in [(0, 0), (1, 1), (2, 2), (7, 4), (8, 4), (8, 5), (9, 5), (5, 0)] {
            img.set(x, y, true);
        }
        let comps = img.components();
        assert_eq!(comps.stats.len(), 3);
        let areas: Vec<usize> = comps.stats.iter().map(|s| s.area).collect();
        assert_eq!(areas, vec![3, 1, 4]);
        let largest = img.largest_component().unwrap();
        assert_eq!(largest.count(), 4);
        assert!(largest.get(9, 5));
        assert_eq!(img.remove_small_components(1).count(), 7);
    }

    #[test]
    fn contour_of_square_and_disk() {
        let img = BinaryImage::from_fn(10, 10, |x, y| (2..=5).contains(&x) && (3..=6).contains(&y));
        let comps = img.components();
        let c = comps.outer_contour(1);
        assert_eq!(c.len(), 12);
        assert_eq!(contour_area(&c), 9.0);
        let mean_x = c.iter().map(|p| p.0 as f64).sum::<f64>() / c.len() as f64;
        let mean_y = c.iter().map(|p| p.1 as f64).sum::<f64>() / c.len() as f64;
        assert_eq!((mean_x, mean_y), (3.5, 4.5));

        let d = disk(40, 40, 20.0, 20.0, 8.0);
        let comps = d.components();
        let c = comps.outer_contour(1);
        let mean_x = c.iter().map(|p| p.0 as f64).sum::<f64>() / c.len() as f64;
        let mean_y = c.iter().map(|p| p.1 as f64).sum::<f64>() / c.len() as f64;
        assert!((mean_x - 20.0).abs() < 1e-9 && (mean_y - 20.0).abs() < 1e-9);
        assert!((contour_area(&c) - std::f64::consts::PI * 64.0).abs() < 30.0);
    }

    #[test]
    fn contour_single_pixel_and_line() {
        let mut img = BinaryImage::new(5, 5);
        img.set(2, 2, true);
        assert_eq!(img.components().outer_contour(1), vec![(2, 2)]);
        let line = BinaryImage::from_fn(6, 3, |x, y| y == 1 && (1..=4).contains(&x));
        let c = line.components().outer_contour(1);
        // There and back along a one-pixel-wide line.
        assert_eq!(c, vec![(1, 1), (2, 1), (3, 1), (4, 1), (3, 1), (2, 1)]);
    }

    #[test]
    fn closing_fills_small_holes() {
        let mut d = disk(30, 30, 15.0, 15.0, 9.0);
        d.set(15, 15, false);
        d.set(12, 14, false);
        let k = Kernel::ellipse(5).unwrap();
        let closed = d.close(&k, 1);
        assert!(closed.get(15, 15) && closed.get(12, 14));
        assert_eq!(closed, disk(30, 30, 15.0, 15.0, 9.0).close(&k, 1));
    }
}
