//! Height-map integration from surface gradients.
//!
//! The solver expands the height in the even (Neumann) cosine basis
//! `cos(pi k x / (W - 1)) cos(pi l y / (H - 1))`, whose x/y derivatives are the
//! matching sine-cosine products. Gradients are projected onto those bases with
//! type-I DST/DCT transforms and the height coefficients solve the per-mode
//! least-squares Poisson system
//!
//! ```text
//! A_kl = -(wk * Gx_kl + wl * Gy_kl) / (wk^2 + wl^2)
//! ```
//!
//! Cosine modes on the lattice are therefore reproduced exactly. The additive
//! constant is fixed by removing the sample mean.

use std::sync::Arc;

use rustdct::{Dct1, DctPlanner, Dst1};

use crate::error::{Error, Result};
use crate::geometry::{GradientField, HeightMap};

struct Transforms {
    dct_x: Arc<dyn Dct1<f64>>,
    dct_y: Arc<dyn Dct1<f64>>,
    dst_x: Option<Arc<dyn Dst1<f64>>>,
    dst_y: Option<Arc<dyn Dst1<f64>>>,
}

impl Transforms {
    fn new(w: usize, h: usize) -> Self {
        let mut planner = DctPlanner::new();
        Self {
            dct_x: planner.plan_dct1(w),
            dct_y: planner.plan_dct1(h),
            dst_x: (w > 2).then(|| planner.plan_dst1(w - 2)),
            dst_y: (h > 2).then(|| planner.plan_dst1(h - 2)),
        }
    }
}

fn transpose(data: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = data[y * w + x];
        }
    }
    out
}

fn dct_rows(data: &mut [f64], w: usize, plan: &Arc<dyn Dct1<f64>>, scale: f64) {
    let mut scratch = vec![0.0; plan.get_scratch_len()];
    for row in data.chunks_mut(w) {
        plan.process_dct1_with_scratch(row, &mut scratch);
        row.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Applies DST-I to the interior `1..w-1` of each row; border entries are zeroed.
fn dst_rows_interior(data: &mut [f64], w: usize, plan: &Arc<dyn Dst1<f64>>, scale: f64) {
    let mut scratch = vec![0.0; plan.get_scratch_len()];
    for row in data.chunks_mut(w) {
        row[0] = 0.0;
        row[w - 1] = 0.0;
        let inner = &mut row[1..w - 1];
        plan.process_dst1_with_scratch(inner, &mut scratch);
        inner.iter_mut().for_each(|v| *v *= scale);
    }
}

fn mode_freq(k: usize, n: usize) -> f64 {
    std::f64::consts::PI * k as f64 / (n as f64 - 1.0)
}

/// Integrates a gradient field into a zero-mean height map.
pub fn integrate_gradients_dct(g: &GradientField) -> Result<HeightMap> {
    let (w, h) = (g.width(), g.height());
    if g.gx().iter().chain(g.gy()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("gradient field contains non-finite values"));
    }
    let t = Transforms::new(w, h);
    let ax = 2.0 / (w as f64 - 1.0);
    let ay = 2.0 / (h as f64 - 1.0);

    // Gx[k, l]: DST-I along x (interior), cosine analysis along y. Stored row-major in (l, k).
    let gx_coef = t.dst_x.as_ref().map(|dst_x| {
        let mut c = g.gx().to_vec();
        dst_rows_interior(&mut c, w, dst_x, ax);
        let mut ct = transpose(&c, w, h);
        dct_rows(&mut ct, h, &t.dct_y, ay);
        transpose(&ct, h, w)
    });
    let gy_coef = t.dst_y.as_ref().map(|dst_y| {
        let mut ct = transpose(g.gy(), w, h);
        dst_rows_interior(&mut ct, h, dst_y, ay);
        let mut c = transpose(&ct, h, w);
        dct_rows(&mut c, w, &t.dct_x, ax);
        c
    });

    let mut coef = vec![0.0; w * h];
    for l in 0..h {
        let wl = mode_freq(l, h);
        let has_y = gy_coef.is_some() && l >= 1 && l + 2 <= h;
        for k in 0..w {
            let wk = mode_freq(k, w);
            let has_x = gx_coef.is_some() && k >= 1 && k + 2 <= w;
            let i = l * w + k;
            let (mut num, mut den) = (0.0, 0.0);
            if let (true, Some(c)) = (has_x, gx_coef.as_ref()) {
                num += wk * c[i];
                den += wk * wk;
            }
            if let (true, Some(c)) = (has_y, gy_coef.as_ref()) {
                num += wl * c[i];
                den += wl * wl;
            }
            if den > 0.0 {
                coef[i] = -num / den;
            }
        }
    }

    dct_rows(&mut coef, w, &t.dct_x, 1.0);
    let mut ct = transpose(&coef, w, h);
    dct_rows(&mut ct, h, &t.dct_y, 1.0);
    let mut heights = transpose(&ct, h, w);
    let mean = heights.iter().sum::<f64>() / heights.len() as f64;
    heights.iter_mut().for_each(|v| *v -= mean);
    HeightMap::new(w, h, g.ppmm(), heights)
}

/// Spectral gradient of a height map in the same basis the integrator uses.
///
/// `integrate_gradients_dct(&gradient_of(h))` returns `h` minus its mean for
/// any height map produced by the integrator.
pub fn gradient_of(hm: &HeightMap) -> Result<GradientField> {
    let (w, h) = (hm.width(), hm.height());
    let t = Transforms::new(w, h);
    let ax = 2.0 / (w as f64 - 1.0);
    let ay = 2.0 / (h as f64 - 1.0);

    let mut coef = hm.data().to_vec();
    dct_rows(&mut coef, w, &t.dct_x, ax);
    let mut ct = transpose(&coef, w, h);
    dct_rows(&mut ct, h, &t.dct_y, ay);
    let coef = transpose(&ct, h, w);

    let gx = match &t.dst_x {
        Some(dst_x) => {
            // Row-major (l, k): scale by -wk, shift k -> k-1 into the interior slots.
            let mut b = vec![0.0; w * h];
            for l in 0..h {
                for k in 1..w - 1 {
                    b[l * w + k] = -mode_freq(k, w) * coef[l * w + k];
                }
            }
            let mut bt = transpose(&b, w, h);
            dct_rows(&mut bt, h, &t.dct_y, 1.0);
            let mut b = transpose(&bt, h, w);
            dst_rows_interior(&mut b, w, dst_x, 1.0);
            b
        }
        None => vec![0.0; w * h],
    };
    let gy = match &t.dst_y {
        Some(dst_y) => {
            let mut b = vec![0.0; w * h];
            for l in 1..h - 1 {
                let wl = mode_freq(l, h);
                for k in 0..w {
                    b[l * w + k] = -wl * coef[l * w + k];
                }
            }
            dct_rows(&mut b, w, &t.dct_x, 1.0);
            let mut bt = transpose(&b, w, h);
            dst_rows_interior(&mut bt, h, dst_y, 1.0);
            transpose(&bt, h, w)
        }
        None => vec![0.0; w * h],
    };
    GradientField::new(w, h, hm.ppmm(), gx, gy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rms_diff_zero_mean(a: &[f64], b: &[f64]) -> f64 {
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        let ss: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| ((x - ma) - (y - mb)).powi(2))
            .sum();
        (ss / a.len() as f64).sqrt()
    }

    #[test]
    fn zero_gradient_gives_zero_height() {
        let g = GradientField::new(7, 5, 1.0, vec![0.0; 35], vec![0.0; 35]).unwrap();
        let h = integrate_gradients_dct(&g).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn analytic_cosine_surface_64() {
        let n = 64;
        let wk = PI / (n as f64 - 1.0);
        let mut h = Vec::new();
        let mut gx = Vec::new();
        for _y in 0..n {
            for x in 0..n {
                let xf = x as f64;
                h.push((wk * xf).cos());
                gx.push(-wk * (wk * xf).sin());
            }
        }
        let g = GradientField::new(n, n, 1.0, gx, vec![0.0; n * n]).unwrap();
        let rec = integrate_gradients_dct(&g).unwrap();
        assert!(rms_diff_zero_mean(rec.data(), &h) < 1e-6);
    }

    #[test]
    fn mixed_mode_in_y() {
        let (w, hgt) = (17, 12);
        let wx = 3.0 * PI / (w as f64 - 1.0);
        let wy = 2.0 * PI / (hgt as f64 - 1.0);
        let (mut h, mut gx, mut gy) = (vec![], vec![], vec![]);
        for y in 0..hgt {
            for x in 0..w {
                let (xf, yf) = (x as f64, y as f64);
                h.push((wx * xf).cos() * (wy * yf).cos());
                gx.push(-wx * (wx * xf).sin() * (wy * yf).cos());
                gy.push(-wy * (wx * xf).cos() * (wy * yf).sin());
            }
        }
        let g = GradientField::new(w, hgt, 1.0, gx, gy).unwrap();
        let rec = integrate_gradients_dct(&g).unwrap();
        assert!(rms_diff_zero_mean(rec.data(), &h) < 1e-10);
    }

    #[test]
    fn rejects_tiny_or_non_finite() {
        assert!(GradientField::new(1, 3, 1.0, vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(GradientField::new(2, 2, 1.0, vec![f64::INFINITY, 0.0, 0.0, 0.0], vec![0.0; 4]).is_err());
        // 2x2 is accepted: no interior, so only the constant survives.
        let g = GradientField::new(2, 2, 1.0, vec![1.0; 4], vec![1.0; 4]).unwrap();
        let h = integrate_gradients_dct(&g).unwrap();
        assert!(h.data().iter().all(|v| v.abs() < 1e-15));
    }
}
