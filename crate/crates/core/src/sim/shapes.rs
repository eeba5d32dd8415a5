//! Rigid object shapes described by their lower surface.
//!
//! Each shape lives in a body frame whose origin is the lowest point of the
//! undeformed shape, with +Z pointing away from the gel. The lower surface is
//! a height function `f(x, y) >= 0` over the shape's footprint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::geometry::{distance_to_outline, point_in_polygon, segment_distance};

/// Raised cosine bump on the lower surface, pointing towards the gel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relief {
    pub x_mm: f64,
    pub y_mm: f64,
    pub radius_mm: f64,
    pub height_mm: f64,
}

impl Relief {
    fn at(&self, x: f64, y: f64) -> f64 {
        let r = ((x - self.x_mm).powi(2) + (y - self.y_mm).powi(2)).sqrt();
        if r >= self.radius_mm {
            0.0
        } else {
            0.5 * self.height_mm * (1.0 + (std::f64::consts::PI * r / self.radius_mm).cos())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Sphere {
        radius_mm: f64,
    },
    Ellipsoid {
        a_mm: f64,
        b_mm: f64,
        c_mm: f64,
    },
    /// Box with a flat bottom and rounded bottom edges.
    BoxCorner {
        w_mm: f64,
        h_mm: f64,
        edge_round_mm: f64,
    },
    /// Flat-bottomed extrusion of a simple polygon, minus optional holes,
    /// with rounded bottom edges.
    ExtrudedOutline {
        polygon_mm: Vec<[f64; 2]>,
        #[serde(default)]
        holes_mm: Vec<Vec<[f64; 2]>>,
        edge_round_mm: f64,
        #[serde(default)]
        relief: Vec<Relief>,
    },
}

fn rounded_edge(inside: f64, r: f64) -> f64 {
    if r <= 0.0 || inside >= r {
        0.0
    } else {
        let t = r - inside;
        r - (r * r - t * t).max(0.0).sqrt()
    }
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            Shape::Sphere { radius_mm } => pos(*radius_mm, "sphere radius"),
            Shape::Ellipsoid { a_mm, b_mm, c_mm } => {
                pos(*a_mm, "ellipsoid a")?;
                pos(*b_mm, "ellipsoid b")?;
                pos(*c_mm, "ellipsoid c")
            }
            Shape::BoxCorner {
                w_mm,
                h_mm,
                edge_round_mm,
            } => {
                pos(*w_mm, "box width")?;
                pos(*h_mm, "box height")?;
                if *edge_round_mm < 0.0 || 2.0 * edge_round_mm > w_mm.min(*h_mm) {
                    return Err(Error::invalid("box edge rounding out of range"));
                }
                Ok(())
            }
            Shape::ExtrudedOutline {
                polygon_mm,
                holes_mm,
                edge_round_mm,
                relief,
            } => {
                if polygon_mm.len() < 3 || holes_mm.iter().any(|h| h.len() < 3) {
                    return Err(Error::invalid("outline and holes need at least 3 vertices"));
                }
                for h in holes_mm {
                    if !polygon_is_simple(h) || h.iter().any(|v| !point_in_polygon(polygon_mm, v[0], v[1])) {
                        return Err(Error::invalid("holes must be simple and inside the outline"));
                    }
                }
                if *edge_round_mm < 0.0 {
                    return Err(Error::invalid("edge rounding must be non-negative"));
                }
                if !polygon_is_simple(polygon_mm) {
                    return Err(Error::invalid("outline polygon self-intersects"));
                }
                for r in relief {
                    pos(r.radius_mm, "relief radius")?;
                }
                Ok(())
            }
        }
    }

    /// Radius around the body origin outside which the surface is absent.
    pub fn extent(&self) -> f64 {
        match self {
            Shape::Sphere { radius_mm } => *radius_mm,
            Shape::Ellipsoid { a_mm, b_mm, .. } => a_mm.max(*b_mm),
            Shape::BoxCorner { w_mm, h_mm, .. } => 0.5 * w_mm.hypot(*h_mm),
            Shape::ExtrudedOutline { polygon_mm, .. } => polygon_mm
                .iter()
                .map(|p| p[0].hypot(p[1]))
                .fold(0.0, f64::max),
        }
    }

    /// Lower-surface height at body `(x, y)`; `None` outside the footprint.
    pub fn lower_surface(&self, x: f64, y: f64) -> Option<f64> {
        match self {
            Shape::Sphere { radius_mm: r } => {
                let q = r * r - x * x - y * y;
                (q >= 0.0).then(|| r - q.sqrt())
            }
            Shape::Ellipsoid { a_mm, b_mm, c_mm } => {
                let q = 1.0 - (x / a_mm).powi(2) - (y / b_mm).powi(2);
                (q >= 0.0).then(|| c_mm - c_mm * q.sqrt())
            }
            Shape::BoxCorner {
                w_mm,
                h_mm,
                edge_round_mm,
            } => {
                let inside = (0.5 * w_mm - x.abs()).min(0.5 * h_mm - y.abs());
                (inside >= 0.0).then(|| rounded_edge(inside, *edge_round_mm))
            }
            Shape::ExtrudedOutline {
                polygon_mm,
                holes_mm,
                edge_round_mm,
                relief,
            } => {
                if !point_in_polygon(polygon_mm, x, y) || holes_mm.iter().any(|h| point_in_polygon(h, x, y)) {
                    return None;
                }
                let inside = holes_mm
                    .iter()
                    .map(|h| distance_to_outline(h, x, y))
                    .fold(distance_to_outline(polygon_mm, x, y), f64::min);
                let bumps: f64 = relief.iter().map(|r| r.at(x, y)).sum();
                Some(rounded_edge(inside, *edge_round_mm) - bumps)
            }
        }
    }
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

pub fn polygon_is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, tilt_deg: f64) -> Vec<[f64; 2]> {
    let (s, c) = tilt_deg.to_radians().sin_cos();
    (0..32)
        .map(|k| {
            let t = k as f64 * std::f64::consts::TAU / 32.0;
            let (u, v) = (rx * t.cos(), ry * t.sin());
            [cx + c * u - s * v, cy + s * u + c * v]
        })
        .collect()
}

/// A scissors-like outline, about 74 mm long, tip along +X, with two finger loops.
pub fn scissors_template() -> Shape {
    let polygon_mm = vec![
        [38.0, 0.0],
        [20.0, 3.2],
        [6.0, 5.8],
        [-2.0, 7.0],
        [-10.0, 12.0],
        [-18.0, 15.0],
        [-28.0, 14.0],
        [-35.0, 8.0],
        [-34.0, 2.5],
        [-24.0, 1.5],
        [-22.0, -1.0],
        [-33.0, -3.5],
        [-36.0, -10.0],
        [-30.0, -15.5],
        [-17.0, -15.0],
        [-8.0, -9.0],
        [-1.0, -6.5],
        [7.0, -5.0],
        [22.0, -2.6],
    ];
    let bump = |x_mm, y_mm, radius_mm, height_mm| Relief {
        x_mm,
        y_mm,
        radius_mm,
        height_mm,
    };
    Shape::ExtrudedOutline {
        polygon_mm,
        holes_mm: vec![ellipse(-22.0, 8.0, 8.0, 3.5, 10.0), ellipse(-24.0, -8.5, 8.0, 4.0, -10.0)],
        edge_round_mm: 1.0,
        relief: vec![
            bump(0.0, 0.0, 2.5, 0.4),
            bump(14.0, 1.0, 1.5, 0.25),
            bump(26.0, -0.5, 1.2, 0.2),
            bump(-20.0, 9.0, 2.0, 0.3),
            bump(-22.0, -9.0, 2.0, 0.3),
            bump(-9.0, 4.0, 1.2, 0.2),
            bump(-30.0, 5.0, 1.5, 0.25),
            bump(7.0, 2.0, 1.0, 0.2),
            bump(20.0, -1.0, 1.0, 0.2),
            bump(31.0, 0.4, 0.8, 0.15),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surfaces() {
        let s = Shape::Sphere { radius_mm: 10.0 };
        assert_eq!(s.lower_surface(0.0, 0.0), Some(0.0));
        assert!((s.lower_surface(6.0, 0.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(s.lower_surface(11.0, 0.0), None);
        let e = Shape::Ellipsoid { a_mm: 4.0, b_mm: 2.0, c_mm: 3.0 };
        assert!((e.lower_surface(4.0, 0.0).unwrap() - 3.0).abs() < 1e-12);
        let b = Shape::BoxCorner { w_mm: 10.0, h_mm: 6.0, edge_round_mm: 1.0 };
        assert_eq!(b.lower_surface(0.0, 0.0), Some(0.0));
        assert!((b.lower_surface(5.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(b.lower_surface(5.1, 0.0), None);
    }

    #[test]
    fn scissors_is_valid() {
        let t = scissors_template();
        t.validate().unwrap();
        assert!(t.lower_surface(0.0, 0.0).unwrap() < 0.0);
        assert_eq!(t.lower_surface(37.0, 5.0), None);
        // Inside a finger loop.
        assert_eq!(t.lower_surface(-22.0, 8.0), None);
        assert!(t.lower_surface(-22.0, 13.5).is_some());
        assert!(!polygon_is_simple(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]));
    }
}
