//! Halfspace polytopes and the set operations used to build constraint,
//! invariant and terminal sets.

mod invariant;
mod ops;

pub use invariant::{
    maximal_admissible_set, mrpi_approximation, robust_invariance_slack, support_gap, RPI_TOLERANCE,
};
pub use ops::{
    box_vertices, convex_hull_2d, linear_map, pontryagin_difference, MAX_VERTEX_SEQUENCES,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{max_margin_point, solve_lp, FEASIBILITY_TOLERANCE};
use crate::serde_mat;

/// Offset slack used when certifying a row as redundant.
pub const REDUNDANCY_TOLERANCE: f64 = 1e-9;

/// `{x | T x <= d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    #[serde(rename = "T", with = "serde_mat::matrix")]
    pub t: DMatrix<f64>,
    #[serde(rename = "d", with = "serde_mat::vector")]
    pub d: DVector<f64>,
}

impl Polytope {
    pub fn new(t: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        if t.nrows() != d.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} halfspace normals but {} offsets",
                t.nrows(),
                d.len()
            )));
        }
        Ok(Self { t, d })
    }

    /// Axis-aligned box; rows are `+e_i <= hi_i, -e_i <= -lo_i` per coordinate.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds differ in length");
        let n = lo.len();
        let mut t = DMatrix::zeros(2 * n, n);
        let mut d = DVector::zeros(2 * n);
        for i in 0..n {
            t[(2 * i, i)] = 1.0;
            t[(2 * i + 1, i)] = -1.0;
            d[2 * i] = hi[i];
            d[2 * i + 1] = -lo[i];
        }
        Self { t, d }
    }

    /// Symmetric box `[-half, half]` in every coordinate.
    pub fn symmetric_box(half: &[f64]) -> Self {
        let lo: Vec<f64> = half.iter().map(|h| -h).collect();
        Self::from_box(&lo, half)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Polytope = serde_json::from_str(text)?;
        Polytope::new(p.t, p.d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("polytope serializes")
    }

    pub fn dim(&self) -> usize {
        self.t.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.t.nrows()
    }

    /// Rows scaled to unit norm; vacuous zero rows are dropped.
    pub fn normalized(&self) -> Self {
        let mut rows = Vec::new();
        for i in 0..self.num_rows() {
            let norm = self.t.row(i).norm();
            if norm > 0.0 {
                rows.push((self.t.row(i) / norm, self.d[i] / norm));
            } else if self.d[i] < 0.0 {
                rows.push((self.t.row(i).into_owned(), self.d[i]));
            }
        }
        let mut t = DMatrix::zeros(rows.len(), self.dim());
        let mut d = DVector::zeros(rows.len());
        for (k, (row, off)) in rows.into_iter().enumerate() {
            t.row_mut(k).copy_from(&row);
            d[k] = off;
        }
        Self { t, d }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.num_rows() == 0 || (&self.t * x - &self.d).max() <= tol
    }

    /// Largest constraint violation at `x` (negative when strictly inside).
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        if self.num_rows() == 0 {
            return f64::NEG_INFINITY;
        }
        (&self.t * x - &self.d).max()
    }

    /// `h(a) = max { a'x | x in P }`.
    pub fn support(&self, direction: &DVector<f64>) -> Result<f64> {
        if direction.iter().all(|&v| v == 0.0) {
            // still requires nonemptiness
            if self.is_empty()? {
                return Err(Error::Infeasible);
            }
            return Ok(0.0);
        }
        Ok(-solve_lp(&(-direction), self)?.value)
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(max_margin_point(&self.t, &self.d)?.margin < -FEASIBILITY_TOLERANCE)
    }

    /// Nonempty and bounded in every coordinate direction.
    pub fn is_proper(&self) -> bool {
        if !matches!(self.is_empty(), Ok(false)) {
            return false;
        }
        (0..self.dim()).all(|i| {
            let mut e = DVector::zeros(self.dim());
            e[i] = 1.0;
            self.support(&e).is_ok() && self.support(&(-e)).is_ok()
        })
    }

    /// `(lo, hi)` coordinate bounds.
    pub fn bounding_box(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            hi[i] = self.support(&e)?;
            lo[i] = -self.support(&(-e))?;
        }
        Ok((lo, hi))
    }

    pub fn intersect(&self, other: &Polytope) -> Result<Polytope> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch("polytope intersection".into()));
        }
        let mut t = DMatrix::zeros(self.num_rows() + other.num_rows(), self.dim());
        t.rows_mut(0, self.num_rows()).copy_from(&self.t);
        t.rows_mut(self.num_rows(), other.num_rows())
            .copy_from(&other.t);
        let d = DVector::from_iterator(t.nrows(), self.d.iter().chain(other.d.iter()).copied());
        Polytope::new(t, d)
    }

    /// `{x | T M x <= d}`, the preimage under `x -> M x`.
    pub fn preimage(&self, m: &DMatrix<f64>) -> Polytope {
        Polytope {
            t: &self.t * m,
            d: self.d.clone(),
        }
    }

    /// Drops every row whose removal does not enlarge the set, certified by an
    /// LP against the remaining rows with the tested row relaxed by one.
    pub fn remove_redundancy(&self) -> Result<Polytope> {
        let p = self.normalized();
        let mut keep: Vec<usize> = (0..p.num_rows()).collect();
        let mut i = 0;
        while i < keep.len() {
            let k = keep[i];
            let mut t = DMatrix::zeros(keep.len(), p.dim());
            let mut d = DVector::zeros(keep.len());
            for (r, &j) in keep.iter().enumerate() {
                t.row_mut(r).copy_from(&p.t.row(j));
                d[r] = if j == k { p.d[j] + 1.0 } else { p.d[j] };
            }
            let relaxed = Polytope { t, d };
            let row = p.t.row(k).transpose();
            if relaxed.support(&row)? <= p.d[k] + REDUNDANCY_TOLERANCE {
                keep.remove(i);
            } else {
                i += 1;
            }
        }
        Ok(p.select_rows(&keep))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Polytope {
        let t = DMatrix::from_fn(rows.len(), self.dim(), |r, c| self.t[(rows[r], c)]);
        let d = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.d[r]));
        Polytope { t, d }
    }

    /// Vertices of a bounded planar polytope in counter-clockwise order,
    /// obtained by clipping a bounding square with every halfplane.
    pub fn vertices_2d(&self) -> Result<Vec<[f64; 2]>> {
        if self.dim() != 2 {
            return Err(Error::DimensionTooHigh(self.dim()));
        }
        let (lo, hi) = self.bounding_box()?;
        let pad = 1.0 + (&hi - &lo).amax();
        let mut poly = vec![
            [lo[0] - pad, lo[1] - pad],
            [hi[0] + pad, lo[1] - pad],
            [hi[0] + pad, hi[1] + pad],
            [lo[0] - pad, hi[1] + pad],
        ];
        for i in 0..self.num_rows() {
            let (a, b, c) = (self.t[(i, 0)], self.t[(i, 1)], self.d[i]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            poly = clip(&poly, a, b, c);
            if poly.is_empty() {
                return Err(Error::Infeasible);
            }
        }
        let scale = pad.max(1.0);
        let mut out: Vec<[f64; 2]> = Vec::new();
        for v in poly {
            let close =
                |w: &[f64; 2]| (w[0] - v[0]).abs().max((w[1] - v[1]).abs()) <= 1e-10 * scale;
            if !out.iter().any(close) {
                out.push(v);
            }
        }
        Ok(out)
    }

    /// Greedy nearest-row pairing of two normalized representations; returns
    /// the largest entry deviation, or `None` when the row counts differ.
    pub fn row_match_error(&self, other: &Polytope) -> Option<f64> {
        let a = self.normalized();
        let b = other.normalized();
        if a.num_rows() != b.num_rows() || a.dim() != b.dim() {
            return None;
        }
        let mut used = vec![false; b.num_rows()];
        let mut worst = 0.0f64;
        for i in 0..a.num_rows() {
            let mut best: Option<(usize, f64)> = None;
            for (j, _) in used.iter().enumerate().filter(|(_, u)| !**u) {
                let dev = (a.t.row(i) - b.t.row(j))
                    .amax()
                    .max((a.d[i] - b.d[j]).abs());
                if best.is_none_or(|(_, e)| dev < e) {
                    best = Some((j, dev));
                }
            }
            let (j, dev) = best?;
            used[j] = true;
            worst = worst.max(dev);
        }
        Some(worst)
    }
}

/// Sutherland-Hodgman step against `a x + b y <= c`.
fn clip(poly: &[[f64; 2]], a: f64, b: f64, c: f64) -> Vec<[f64; 2]> {
    let inside = |p: &[f64; 2]| a * p[0] + b * p[1] - c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let cur = poly[k];
        let next = poly[(k + 1) % poly.len()];
        let (fc, fn_) = (inside(&cur), inside(&next));
        if fc <= 0.0 {
            out.push(cur);
        }
        if (fc < 0.0 && fn_ > 0.0) || (fc > 0.0 && fn_ < 0.0) {
            let s = fc / (fc - fn_);
            out.push([
                cur[0] + s * (next[0] - cur[0]),
                cur[1] + s * (next[1] - cur[1]),
            ]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    #[test]
    fn box_support() {
        let b = Polytope::symmetric_box(&[1.0, 1.0]);
        assert!((b.support(&dvector![1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((b.support(&dvector![1.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let b = Polytope::from_box(&[-1.0, -2.0], &[3.0, 4.0]);
        let back = Polytope::from_json(&b.to_json()).unwrap();
        assert_eq!(b, back);
        let parsed = Polytope::from_json(r#"{"T": [[1.0], [-1.0]], "d": [2.0, 0.5]}"#).unwrap();
        assert_eq!(parsed.d, dvector![2.0, 0.5]);
        assert!(Polytope::from_json(r#"{"T": [[1.0]], "d": [2.0, 0.5]}"#).is_err());
    }

    #[test]
    fn redundant_rows_are_removed() {
        let t = dmatrix![1.0, 0.0; -1.0, 0.0; 0.0, 1.0; 0.0, -1.0; 1.0, 1.0; 2.0, 0.0];
        let d = dvector![1.0, 1.0, 1.0, 1.0, 5.0, 2.0];
        let p = Polytope::new(t, d).unwrap().remove_redundancy().unwrap();
        assert_eq!(p.num_rows(), 4);
        assert_eq!(p.remove_redundancy().unwrap().num_rows(), 4);
    }

    #[test]
    fn square_vertices() {
        let v = Polytope::symmetric_box(&[1.0, 2.0]).vertices_2d().unwrap();
        assert_eq!(v.len(), 4);
        for p in v {
            assert!((p[0].abs() - 1.0).abs() < 1e-12 && (p[1].abs() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn proper_and_empty() {
        assert!(Polytope::symmetric_box(&[1.0]).is_proper());
        let half = Polytope::new(dmatrix![1.0, 0.0], dvector![1.0]).unwrap();
        assert!(!half.is_proper());
        let empty = Polytope::from_box(&[1.0], &[0.0]);
        assert!(empty.is_empty().unwrap());
    }

    #[test]
    fn row_matching_ignores_order_and_scale() {
        let a = Polytope::symmetric_box(&[1.0, 1.0]);
        let b = Polytope::new(
            dmatrix![0.0, -2.0; 3.0, 0.0; -1.0, 0.0; 0.0, 1.0],
            dvector![2.0, 3.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(a.row_match_error(&b).unwrap() < 1e-15);
        assert!(a.row_match_error(&b.select_rows(&[0, 1, 2])).is_none());
    }

    /// Vertex enumeration oracle for 2-D LPs.
    fn brute_vertices(p: &Polytope) -> Vec<DVector<f64>> {
        let mut out = Vec::new();
        for i in 0..p.num_rows() {
            for j in i + 1..p.num_rows() {
                let m = dmatrix![p.t[(i, 0)], p.t[(i, 1)]; p.t[(j, 0)], p.t[(j, 1)]];
                if m.determinant().abs() < 1e-9 {
                    continue;
                }
                let v = m.lu().solve(&dvector![p.d[i], p.d[j]]).unwrap();
                if p.contains(&v, 1e-9) {
                    out.push(v);
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn lp_matches_vertex_enumeration(
            normals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.1f64..2.0), 3..8),
            cost in (-1.0f64..1.0, -1.0f64..1.0),
        ) {
            let mut p = Polytope::symmetric_box(&[3.0, 3.0]);
            for (a, b, c) in normals {
                p = p.intersect(&Polytope::new(dmatrix![a, b], dvector![c]).unwrap()).unwrap();
            }
            let c = dvector![cost.0, cost.1];
            let sol = solve_lp(&c, &p).unwrap();
            prop_assert!(p.contains(&sol.x, 1e-9));
            let oracle = brute_vertices(&p).iter().map(|v| c.dot(v)).fold(f64::INFINITY, f64::min);
            prop_assert!((sol.value - oracle).abs() <= 1e-8);
            // every clipped vertex is a brute-force vertex
            for v in p.vertices_2d().unwrap() {
                prop_assert!(p.contains(&dvector![v[0], v[1]], 1e-8));
            }
        }

        #[test]
        fn redundancy_removal_preserves_support(
            normals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.1f64..2.0), 2..8),
            dir in (-1.0f64..1.0, -1.0f64..1.0),
        ) {
            let mut p = Polytope::symmetric_box(&[2.0, 2.0]);
            for (a, b, c) in normals {
                p = p.intersect(&Polytope::new(dmatrix![a, b], dvector![c]).unwrap()).unwrap();
            }
            let r = p.remove_redundancy().unwrap();
            let a = dvector![dir.0, dir.1];
            prop_assert!((r.support(&a).unwrap() - p.support(&a).unwrap()).abs() <= 1e-8);
            prop_assert_eq!(r.remove_redundancy().unwrap().num_rows(), r.num_rows());
        }
    }
}
