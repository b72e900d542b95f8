use nalgebra::{DMatrix, DVector};

use super::Polytope;
use crate::error::{Error, Result};
use crate::numerics::{max_margin_point, FEASIBILITY_TOLERANCE};

/// Upper bound on the number of enumerated disturbance vertex sequences.
pub const MAX_VERTEX_SEQUENCES: u128 = 1 << 20;

/// `P ⊖ S = {x | x + S ⊆ P}`: every offset shrinks by the support of `S`
/// along its row.
pub fn pontryagin_difference(p: &Polytope, s: &Polytope) -> Result<Polytope> {
    if p.dim() != s.dim() {
        return Err(Error::DimensionMismatch("Pontryagin difference".into()));
    }
    let mut d = p.d.clone();
    for i in 0..p.num_rows() {
        d[i] -= s.support(&p.t.row(i).transpose())?;
    }
    let out = Polytope::new(p.t.clone(), d)?;
    if max_margin_point(&out.t, &out.d)?.margin < -FEASIBILITY_TOLERANCE {
        return Err(Error::EmptyResult("Pontryagin difference"));
    }
    Ok(out)
}

/// `{M x | x in P}` for images of dimension at most two.
pub fn linear_map(m: &DMatrix<f64>, p: &Polytope) -> Result<Polytope> {
    if m.ncols() != p.dim() {
        return Err(Error::DimensionMismatch("linear map width".into()));
    }
    match m.nrows() {
        1 => {
            let row = m.row(0).transpose();
            let hi = p.support(&row)?;
            let lo = -p.support(&(-row))?;
            Ok(Polytope::from_box(&[lo], &[hi]))
        }
        2 => {
            let points: Vec<[f64; 2]> = polytope_vertices(p)?
                .iter()
                .map(|v| {
                    let y = m * v;
                    [y[0], y[1]]
                })
                .collect();
            let hull = convex_hull_2d(&points);
            hull_halfspaces(&hull).remove_redundancy()
        }
        k => Err(Error::DimensionTooHigh(k)),
    }
}

/// Vertices of a polytope of dimension one or two.
fn polytope_vertices(p: &Polytope) -> Result<Vec<DVector<f64>>> {
    match p.dim() {
        1 => {
            let one = DVector::from_element(1, 1.0);
            let hi = p.support(&one)?;
            let lo = -p.support(&(-one))?;
            Ok(vec![
                DVector::from_element(1, lo),
                DVector::from_element(1, hi),
            ])
        }
        2 => Ok(p
            .vertices_2d()?
            .into_iter()
            .map(|v| DVector::from_column_slice(&v))
            .collect()),
        k => Err(Error::DimensionTooHigh(k)),
    }
}

/// Andrew's monotone chain; counter-clockwise without repeated points.
/// Collinear input collapses to its two extreme points.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let scale = pts
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(1.0, f64::max);
    pts.dedup_by(|a, b| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()) <= 1e-12 * scale);
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let eps = 1e-12 * scale * scale;
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= eps
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 2 {
        // every point collinear and the chain collapsed
        return vec![pts[0], pts[pts.len() - 1]];
    }
    hull
}

/// Halfspace form of a planar hull: edges for a polygon, a flat strip capped
/// at both ends for a segment, and a degenerate box for a point.
fn hull_halfspaces(hull: &[[f64; 2]]) -> Polytope {
    let mut rows: Vec<([f64; 2], f64)> = Vec::new();
    match hull.len() {
        0 => {}
        1 => {
            let p = hull[0];
            return Polytope::from_box(&[p[0], p[1]], &[p[0], p[1]]);
        }
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let dir = [b[0] - a[0], b[1] - a[1]];
            let nrm = [-dir[1], dir[0]];
            let off = nrm[0] * a[0] + nrm[1] * a[1];
            rows.push((nrm, off));
            rows.push(([-nrm[0], -nrm[1]], -off));
            rows.push((dir, dir[0] * b[0] + dir[1] * b[1]));
            rows.push(([-dir[0], -dir[1]], -(dir[0] * a[0] + dir[1] * a[1])));
        }
        k => {
            for i in 0..k {
                let (a, b) = (hull[i], hull[(i + 1) % k]);
                // outward normal of a counter-clockwise edge
                let nrm = [b[1] - a[1], a[0] - b[0]];
                rows.push((nrm, nrm[0] * a[0] + nrm[1] * a[1]));
            }
        }
    }
    let t = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i].0[j]);
    let d = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    Polytope { t, d }.normalized()
}

/// All vertex sequences of the box `[lo, hi]^horizon`, each stacked into a
/// vector of length `s * horizon`, in lexicographic order with the lower
/// bound first and the first component most significant.
pub fn box_vertices(lo: &[f64], hi: &[f64], horizon: usize) -> Result<Vec<DVector<f64>>> {
    if lo.len() != hi.len() {
        return Err(Error::DimensionMismatch("box bounds".into()));
    }
    let len = lo.len() * horizon;
    let count = if len >= 127 { u128::MAX } else { 1u128 << len };
    if count > MAX_VERTEX_SEQUENCES {
        return Err(Error::TooManyVertices {
            count,
            limit: MAX_VERTEX_SEQUENCES,
        });
    }
    let s = lo.len();
    Ok((0..count as usize)
        .map(|idx| {
            DVector::from_fn(len, |j, _| {
                let upper = (idx >> (len - 1 - j)) & 1 == 1;
                if upper {
                    hi[j % s]
                } else {
                    lo[j % s]
                }
            })
        })
        .collect())
}
