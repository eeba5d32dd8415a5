use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::contact::ContactSubset;
use crate::error::{Error, Result};
use crate::geometry::WorldPoint;

/// Id-matched point pairs between two frames.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Correspondences {
    pub ids: Vec<u64>,
    /// Points in the earlier frame.
    pub p: Vec<WorldPoint>,
    /// The same ids in the later frame.
    pub q: Vec<WorldPoint>,
}

impl Correspondences {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Merges two id-sorted subsets on their shared ids.
pub fn match_by_id(prev: &ContactSubset, curr: &ContactSubset) -> Result<Correspondences> {
    let mut out = Correspondences::default();
    let (mut i, mut j) = (0, 0);
    while i < prev.ids.len() && j < curr.ids.len() {
        match prev.ids[i].cmp(&curr.ids[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.ids.push(prev.ids[i]);
                out.p.push(prev.world_points[i]);
                out.q.push(curr.world_points[j]);
                i += 1;
                j += 1;
            }
        }
    }
    if out.len() < 3 {
        return Err(Error::InsufficientOverlap { found: out.len() });
    }
    Ok(out)
}

fn centroid(pts: &[WorldPoint]) -> Vector3<f64> {
    let s = pts.iter().fold(Vector3::zeros(), |a, p| a + p.to_vector());
    s / pts.len() as f64
}

/// Rotation and centroids of the least-squares fit `p ~ R q + t`.
fn solve(p: &[WorldPoint], q: &[WorldPoint]) -> Result<(Matrix3<f64>, Vector3<f64>, Vector3<f64>)> {
    if p.len() != q.len() {
        return Err(Error::invalid("point sets differ in length"));
    }
    if p.len() < 3 {
        return Err(Error::InsufficientPoints(p.len()));
    }
    let (cp, cq) = (centroid(p), centroid(q));
    let mut h = Matrix3::zeros();
    for (a, b) in p.iter().zip(q) {
        h += (b.to_vector() - cq) * (a.to_vector() - cp).transpose();
    }
    // The general bidiagonal SVD; the fixed-size 3x3 path works on H^T H and
    // loses half the digits on nearly collinear point sets.
    let svd = DMatrix::from_column_slice(3, 3, h.as_slice()).svd(true, true);
    let sv = &svd.singular_values;
    if !(sv[0] > 0.0) || sv[1] <= sv[0] * 1e-12 {
        return Err(Error::DegenerateGeometry);
    }
    let u = Matrix3::from_column_slice(svd.u.as_ref().expect("requested U").as_slice());
    let v = Matrix3::from_column_slice(svd.v_t.as_ref().expect("requested V").as_slice()).transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    Ok((r, cp, cq))
}

/// Rotation `R` minimising `sum |p_i - R q_i|^2` over centred points.
///
/// A determinant correction keeps the result a proper rotation. If the object
/// moved by `M` between the frames (`q = M p`), the result is `M^T`.
pub fn kabsch_rotation(c: &Correspondences) -> Result<Matrix3<f64>> {
    solve(&c.p, &c.q).map(|(r, _, _)| r)
}

/// Rigid fit `p ~ R q + t`.
pub fn fit_rigid(p: &[WorldPoint], q: &[WorldPoint]) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    let (r, cp, cq) = solve(p, q)?;
    Ok((r, cp - r * cq))
}
