//! Contact masks, the contact subset of the reference cloud and the contact centroid.

use crate::binary::{contour_area, BinaryImage, Kernel};
use crate::error::{Error, Result};
use crate::geometry::{HeightMap, PixelCoord, WorldPoint};
use crate::reference::ReferenceCloud;

pub type ContactMask = BinaryImage;

/// Mask construction settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskParams {
    /// Minimum depression below the reference, in millimetres.
    pub depth_threshold_mm: f64,
    /// Closing kernel diameter in pixels.
    pub kernel_px: usize,
    pub kernel_iters: usize,
    /// Components of at most this many pixels are dropped.
    pub min_component_px: usize,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            depth_threshold_mm: 0.2,
            kernel_px: 5,
            kernel_iters: 1,
            min_component_px: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidMethod {
    /// Mean of the outer contour pixels of the largest contour.
    Contour,
    /// Area centroid of the largest component.
    Moments,
    /// Area centroid of the largest component with each pixel weighted by its
    /// depression beyond the contact threshold.
    #[default]
    DepthWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidParams {
    pub close_kernel_px: usize,
    pub close_iters: usize,
    pub method: CentroidMethod,
}

impl Default for CentroidParams {
    fn default() -> Self {
        Self {
            close_kernel_px: 7,
            close_iters: 2,
            method: CentroidMethod::DepthWeighted,
        }
    }
}

/// Thresholds the depression `reference - current`, fuses the optional auxiliary
/// mask and cleans up with a closing.
pub fn build_contact_mask(
    current: &HeightMap,
    reference: &HeightMap,
    params: &MaskParams,
    aux: Option<&BinaryImage>,
) -> Result<ContactMask> {
    if !current.same_shape(reference) {
        return Err(Error::invalid("current and reference height maps differ in shape"));
    }
    if !(params.depth_threshold_mm > 0.0) {
        return Err(Error::invalid(format!(
            "depth threshold must be positive, got {}",
            params.depth_threshold_mm
        )));
    }
    let (w, h) = (current.width(), current.height());
    let threshold = params.depth_threshold_mm * current.ppmm();
    let (cur, refd) = (current.data(), reference.data());
    let mut mask = BinaryImage::from_fn(w, h, |x, y| {
        let i = y * w + x;
        refd[i] - cur[i] > threshold
    });
    if let Some(aux) = aux {
        mask = mask.and(aux)?;
    }
    // Isolated specks go first so the closing cannot bridge them into blobs.
    mask = mask.remove_small_components(params.min_component_px);
    if params.kernel_px > 0 && params.kernel_iters > 0 {
        mask = mask.close(&Kernel::ellipse(params.kernel_px)?, params.kernel_iters);
    }
    Ok(mask.remove_small_components(params.min_component_px))
}

/// Reference points inside the contact, lifted with the frame's own heights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactSubset {
    pub ids: Vec<u64>,
    pub world_points: Vec<WorldPoint>,
    /// Depression below the reference at each point, mm; empty when unknown.
    pub depth_mm: Vec<f64>,
    pub frame_index: usize,
}

impl ContactSubset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn with_frame_index(mut self, frame_index: usize) -> Self {
        self.frame_index = frame_index;
        self
    }
}

/// Keeps cloud points at least `border_margin` pixels from every edge whose
/// rounded pixel lies in the mask.
pub fn extract_contact_subset(
    cloud: &ReferenceCloud,
    mask: &ContactMask,
    hm: &HeightMap,
    border_margin: usize,
) -> Result<ContactSubset> {
    let (w, h) = cloud.image_size();
    if mask.width() != w || mask.height() != h || hm.width() != w || hm.height() != h {
        return Err(Error::invalid(format!(
            "frame is {}x{}, reference cloud expects {w}x{h}",
            hm.width(),
            hm.height()
        )));
    }
    let m = border_margin as i64;
    let (xmax, ymax) = (w as i64 - 1 - m, h as i64 - 1 - m);
    let mut out = ContactSubset::default();
    for p in cloud.points() {
        let (x, y) = p.pixel.rounded();
        if x < m || y < m || x > xmax || y > ymax {
            continue;
        }
        if mask.get(x as usize, y as usize) {
            out.ids.push(p.id);
            out.world_points.push(hm.pixel_to_world(p.pixel)?);
        }
    }
    Ok(out)
}

/// Pixel location of the contact centroid.
pub fn contact_centroid_pixel(mask: &ContactMask, params: &CentroidParams) -> Result<PixelCoord> {
    let closed = if params.close_kernel_px > 0 && params.close_iters > 0 {
        mask.close(&Kernel::ellipse(params.close_kernel_px)?, params.close_iters)
    } else {
        mask.clone()
    };
    let comps = closed.components();
    if comps.stats.is_empty() {
        return Err(Error::NoContact);
    }
    match params.method {
        CentroidMethod::Contour => {
            let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
            for s in &comps.stats {
                let contour = comps.outer_contour(s.label);
                let area = contour_area(&contour);
                if best.as_ref().is_none_or(|(a, _)| area > *a) {
                    best = Some((area, contour));
                }
            }
            let (_, contour) = best.expect("at least one component");
            let n = contour.len() as f64;
            let (sx, sy) = contour
                .iter()
                .fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x as f64, ay + y as f64));
            Ok(PixelCoord::new(sx / n, sy / n))
        }
        CentroidMethod::Moments | CentroidMethod::DepthWeighted => {
            let best = comps
                .stats
                .iter()
                .fold(&comps.stats[0], |a, s| if s.area > a.area { s } else { a });
            let (x, y) = best.centroid();
            Ok(PixelCoord::new(x, y))
        }
    }
}

/// Centroid of the largest component with pixel weights
/// `max(0, reference - current - floor_mm)`; the plain area centroid when
/// every weight is zero.
pub fn depth_weighted_centroid_pixel(
    mask: &ContactMask,
    current: &HeightMap,
    reference: &HeightMap,
    floor_mm: f64,
    params: &CentroidParams,
) -> Result<PixelCoord> {
    if !current.same_shape(reference) || mask.width() != current.width() || mask.height() != current.height() {
        return Err(Error::invalid("mask and height maps differ in shape"));
    }
    let closed = if params.close_kernel_px > 0 && params.close_iters > 0 {
        mask.close(&Kernel::ellipse(params.close_kernel_px)?, params.close_iters)
    } else {
        mask.clone()
    };
    let comps = closed.components();
    let best = comps
        .stats
        .iter()
        .fold(None::<&crate::binary::ComponentStats>, |a, s| match a {
            Some(a) if a.area >= s.area => Some(a),
            _ => Some(s),
        })
        .ok_or(Error::NoContact)?;
    let floor = floor_mm * current.ppmm();
    let (w, h) = (mask.width(), mask.height());
    let (cur, refd) = (current.data(), reference.data());
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if comps.label_at(x, y) == best.label {
                let wgt = (refd[y * w + x] - cur[y * w + x] - floor).max(0.0);
                sw += wgt;
                sx += wgt * x as f64;
                sy += wgt * y as f64;
            }
        }
    }
    if sw > 0.0 {
        Ok(PixelCoord::new(sx / sw, sy / sw))
    } else {
        let (x, y) = best.centroid();
        Ok(PixelCoord::new(x, y))
    }
}

/// Contact centroid lifted to world coordinates, Z from the bilinear height.
pub fn contact_centroid(mask: &ContactMask, hm: &HeightMap, params: &CentroidParams) -> Result<WorldPoint> {
    if mask.width() != hm.width() || mask.height() != hm.height() {
        return Err(Error::invalid("mask and height map differ in shape"));
    }
    hm.pixel_to_world(contact_centroid_pixel(mask, params)?)
}

/// Half-width of the pixel window averaged for a point's depth.
const DEPTH_WINDOW_PX: i64 = 2;

/// Mean depression (mm) over a small window around `p`.
fn window_depth_mm(current: &HeightMap, reference: &HeightMap, p: PixelCoord) -> f64 {
    let (cx, cy) = p.rounded();
    let (w, h) = (current.width() as i64, current.height() as i64);
    let (mut sum, mut n) = (0.0, 0);
    for y in (cy - DEPTH_WINDOW_PX).max(0)..=(cy + DEPTH_WINDOW_PX).min(h - 1) {
        for x in (cx - DEPTH_WINDOW_PX).max(0)..=(cx + DEPTH_WINDOW_PX).min(w - 1) {
            sum += reference.get(x as usize, y as usize) - current.get(x as usize, y as usize);
            n += 1;
        }
    }
    sum / n.max(1) as f64 / current.ppmm()
}

/// Contact pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams {
    pub mask: MaskParams,
    pub centroid: CentroidParams,
    pub border_margin_px: usize,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            mask: MaskParams::default(),
            centroid: CentroidParams::default(),
            border_margin_px: 2,
        }
    }
}

/// Everything the trackers need from one sensor frame.
#[derive(Debug, Clone)]
pub struct ContactFrame {
    pub index: usize,
    pub height: HeightMap,
    pub mask: ContactMask,
    pub subset: ContactSubset,
    /// `None` when the mask is empty.
    pub centroid: Option<WorldPoint>,
}

impl ContactFrame {
    /// Runs mask construction, subset extraction and the centroid on one frame.
    pub fn observe(
        index: usize,
        cloud: &ReferenceCloud,
        reference: &HeightMap,
        height: HeightMap,
        aux: Option<&BinaryImage>,
        params: &ContactParams,
    ) -> Result<Self> {
        let mask = build_contact_mask(&height, reference, &params.mask, aux)?;
        let mut subset = extract_contact_subset(cloud, &mask, &height, params.border_margin_px)?
            .with_frame_index(index);
        subset.depth_mm = subset
            .ids
            .iter()
            .map(|&id| Ok(window_depth_mm(&height, reference, cloud.lookup(id)?.0)))
            .collect::<Result<_>>()?;
        let found = match params.centroid.method {
            CentroidMethod::DepthWeighted => depth_weighted_centroid_pixel(
                &mask,
                &height,
                reference,
                params.mask.depth_threshold_mm,
                &params.centroid,
            )
            .and_then(|p| height.pixel_to_world(p)),
            _ => contact_centroid(&mask, &height, &params.centroid),
        };
        let centroid = match found {
            Ok(c) => Some(c),
            Err(Error::NoContact) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            index,
            height,
            mask,
            subset,
            centroid,
        })
    }

    pub fn has_contact(&self) -> bool {
        self.centroid.is_some() && !self.subset.is_empty()
    }
}
