use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::ops::convex_hull_2d;
use super::{Polytope, REDUNDANCY_TOLERANCE};
use crate::error::{Error, Result};

/// Slack allowed in the robust invariance check `A R + W ⊆ R`.
pub const RPI_TOLERANCE: f64 = 1e-9;

const MAX_TERMS: usize = 200;
const MAX_STEPS: usize = 500;
const SPREAD_DIRECTIONS: usize = 64;

/// Outer approximation of the minimal robust positively invariant set of
/// `x+ = A x + w`, `w in W`: `(1 - alpha_max)^-1 (W + A W + ... + A^{s-1} W)`.
///
/// The Minkowski sums are kept in support-function form on a dictionary of
/// directions (edge normals of every `A^i W` plus evenly spread directions),
/// which is exact for planar sets. `s` is the first number of terms with
/// `A^s W ⊆ alpha F_s`, `alpha <= alpha_max`, whose scaled sum also passes the
/// invariance check.
pub fn mrpi_approximation(a_cl: &DMatrix<f64>, w: &Polytope, alpha_max: f64) -> Result<Polytope> {
    let n = a_cl.nrows();
    if a_cl.ncols() != n || w.dim() != n {
        return Err(Error::DimensionMismatch("mRPI operands".into()));
    }
    if n > 2 {
        return Err(Error::DimensionTooHigh(n));
    }
    if !(0.0..1.0).contains(&alpha_max) {
        return Err(Error::InvalidConfig(format!(
            "alpha_max {alpha_max} outside [0, 1)"
        )));
    }
    let w_points = generators(w)?;
    let h_w = |a: &DVector<f64>| {
        w_points
            .iter()
            .map(|v| a.dot(v))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut powers = vec![DMatrix::identity(n, n)];
    for s in 1..=MAX_TERMS {
        powers.push(a_cl * &powers[s - 1]);
        let dictionary = directions(&powers[..s], &w_points);
        let h_f: Vec<f64> = dictionary
            .iter()
            .map(|a| powers[..s].iter().map(|p| h_w(&(p.transpose() * a))).sum())
            .collect();
        let mut alpha = 0.0f64;
        for (a, &hf) in dictionary.iter().zip(&h_f) {
            let tail = h_w(&(powers[s].transpose() * a));
            if hf > 1e-12 {
                alpha = alpha.max(tail / hf);
            } else if tail > 1e-12 {
                alpha = f64::INFINITY;
            }
        }
        if alpha > alpha_max {
            continue;
        }
        let scale = 1.0 / (1.0 - alpha_max);
        let t = DMatrix::from_fn(dictionary.len(), n, |i, j| dictionary[i][j]);
        let d = DVector::from_iterator(h_f.len(), h_f.iter().map(|h| h * scale));
        let candidate = Polytope::new(t, d)?.remove_redundancy()?;
        if rpi_violation(a_cl, &candidate, &h_w)? <= RPI_TOLERANCE {
            return Ok(candidate);
        }
    }
    Err(Error::NoConvergence {
        what: "mRPI approximation",
        iterations: MAX_TERMS,
    })
}

/// Smallest slack `d_i - h_R(A' t_i) - h_W(t_i)` over the rows of `R`;
/// nonnegative exactly when `A R + W ⊆ R`. `W` lives in state space.
pub fn robust_invariance_slack(a_cl: &DMatrix<f64>, r: &Polytope, w: &Polytope) -> Result<f64> {
    if a_cl.nrows() != r.dim() || w.dim() != r.dim() {
        return Err(Error::DimensionMismatch("invariance check operands".into()));
    }
    let w_points = generators(w)?;
    let h_w = |a: &DVector<f64>| {
        w_points
            .iter()
            .map(|v| a.dot(v))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(-rpi_violation(a_cl, r, &h_w)?)
}

/// Largest `|h_A(t_i) - h_B(t_i)|` over the unit normals of `normals`.
pub fn support_gap(a: &Polytope, b: &Polytope, normals: &Polytope) -> Result<f64> {
    let unit = normals.normalized();
    let mut gap = 0.0f64;
    for i in 0..unit.num_rows() {
        let dir = unit.t.row(i).transpose();
        gap = gap.max((a.support(&dir)? - b.support(&dir)?).abs());
    }
    Ok(gap)
}

/// Largest `h_R(A' t_i) + h_W(t_i) - d_i` over the rows of `R`.
fn rpi_violation(
    a_cl: &DMatrix<f64>,
    r: &Polytope,
    h_w: &impl Fn(&DVector<f64>) -> f64,
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..r.num_rows() {
        let row = r.t.row(i).transpose();
        let lhs = r.support(&(a_cl.transpose() * &row))? + h_w(&row);
        worst = worst.max(lhs - r.d[i]);
    }
    Ok(worst)
}

/// Vertices of a one- or two-dimensional polytope.
fn generators(w: &Polytope) -> Result<Vec<DVector<f64>>> {
    match w.dim() {
        1 => {
            let one = DVector::from_element(1, 1.0);
            Ok(vec![
                DVector::from_element(1, -w.support(&(-&one))?),
                DVector::from_element(1, w.support(&one)?),
            ])
        }
        _ => Ok(w
            .vertices_2d()?
            .into_iter()
            .map(|v| DVector::from_column_slice(&v))
            .collect()),
    }
}

fn directions(powers: &[DMatrix<f64>], w_points: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let n = w_points[0].len();
    if n == 1 {
        return vec![
            DVector::from_element(1, 1.0),
            DVector::from_element(1, -1.0),
        ];
    }
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    let mut push = |v: DVector<f64>| {
        let norm = v.norm();
        if norm <= 1e-14 {
            return;
        }
        let v = v / norm;
        if !dirs.iter().any(|u| (u - &v).amax() <= 1e-12) {
            dirs.push(v);
        }
    };
    for p in powers {
        let pts: Vec<[f64; 2]> = w_points
            .iter()
            .map(|v| {
                let y = p * v;
                [y[0], y[1]]
            })
            .collect();
        let hull = convex_hull_2d(&pts);
        match hull.len() {
            0 | 1 => {}
            2 => {
                let (a, b) = (hull[0], hull[1]);
                push(DVector::from_vec(vec![a[1] - b[1], b[0] - a[0]]));
                push(DVector::from_vec(vec![b[1] - a[1], a[0] - b[0]]));
            }
            k => {
                for i in 0..k {
                    let (a, b) = (hull[i], hull[(i + 1) % k]);
                    push(DVector::from_vec(vec![b[1] - a[1], a[0] - b[0]]));
                }
            }
        }
    }
    for k in 0..SPREAD_DIRECTIONS {
        let theta = 2.0 * PI * k as f64 / SPREAD_DIRECTIONS as f64;
        push(DVector::from_vec(vec![theta.cos(), theta.sin()]));
    }
    dirs
}

/// Maximal constraint-admissible set `{x | A^k x in S for all k >= 0}`,
/// stopping at the first `k` whose rows are all redundant.
pub fn maximal_admissible_set(a_k: &DMatrix<f64>, s: &Polytope) -> Result<Polytope> {
    if a_k.nrows() != s.dim() || a_k.ncols() != s.dim() {
        return Err(Error::DimensionMismatch("admissible-set dynamics".into()));
    }
    let s = s.normalized();
    let mut stack = s.clone();
    let mut power = DMatrix::identity(s.dim(), s.dim());
    for _ in 1..=MAX_STEPS {
        power = a_k * power;
        let next = s.preimage(&power);
        let mut redundant = true;
        for i in 0..next.num_rows() {
            let row = next.t.row(i).transpose();
            if stack.support(&row)? > next.d[i] + REDUNDANCY_TOLERANCE {
                redundant = false;
                break;
            }
        }
        if redundant {
            return stack.remove_redundancy();
        }
        stack = stack.intersect(&next)?;
    }
    Err(Error::NoTermination(MAX_STEPS))
}
