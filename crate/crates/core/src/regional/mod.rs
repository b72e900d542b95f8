//! Affine optimizer, multipliers and critical region generated by one
//! optimal active set, and the walk that updates the active set across
//! region facets without solving a QP.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::condense::CondensedQp;
use crate::error::{Error, FallbackReason, Result};
use crate::geometry::Polytope;
use crate::numerics::{qr_factorize, stack_rows};
use crate::serde_mat;

/// Slack allowed by region membership tests.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-9;
/// Largest accepted condition number of `Θ` and `Ψ`.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Step-length gap below which two facets count as crossed together.
pub const FACET_TIE_TOLERANCE: f64 = 1e-9;
/// Facet crossings allowed on one segment.
pub const MAX_CROSSINGS: usize = 50;

/// The QP constraint a region row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrigin {
    /// Feasibility of inactive row `j` (the 𝒞 block).
    Inactive(usize),
    /// Nonnegativity of the multiplier of active row `j` (the 𝒪 block).
    Multiplier(usize),
}

impl RowOrigin {
    pub fn constraint(self) -> usize {
        match self {
            RowOrigin::Inactive(j) | RowOrigin::Multiplier(j) => j,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    /// `x ∈ 𝒫 = 𝒞 ∩ 𝒪`: the law is optimal.
    Full,
    /// `x ∈ 𝒞`: the law is feasible.
    FeasibleOnly,
}

/// `ε*(x) = K_ε x + b_ε`, `λ*_𝒜(x) = K_λ x + b_λ` and `u*(x) = K x + b` on
/// the region `{T x <= d}`, whose first `feasible_rows` rows form 𝒞.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionalLaw {
    pub active: Vec<usize>,
    #[serde(with = "serde_mat::matrix")]
    pub k_eps: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub b_eps: DVector<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub k_lambda: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub b_lambda: DVector<f64>,
    pub region: Polytope,
    pub origins: Vec<RowOrigin>,
    pub feasible_rows: usize,
    #[serde(with = "serde_mat::matrix")]
    pub k: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub b: DVector<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub k_v: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub b_v: DVector<f64>,
}

impl RegionalLaw {
    pub fn contains(&self, x: &DVector<f64>, mode: Membership) -> bool {
        let rows = match mode {
            Membership::Full => self.region.num_rows(),
            Membership::FeasibleOnly => self.feasible_rows,
        };
        (0..rows).all(|i| {
            self.region.t.row(i).dot(&x.transpose()) <= self.region.d[i] + MEMBERSHIP_TOLERANCE
        })
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.k * x + &self.b
    }

    pub fn epsilon(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.k_eps * x + &self.b_eps
    }

    pub fn multipliers(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.k_lambda * x + &self.b_lambda
    }

    /// The 𝒞 block as a polytope.
    pub fn feasibility_region(&self) -> Polytope {
        self.region
            .select_rows(&(0..self.feasible_rows).collect::<Vec<_>>())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("law serializes")
    }
}

fn condition(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.singular_values();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

/// Builds the law of the active set `active` from the null-space
/// factorization `(G^𝒜)' = E F`, `Θ = (G^𝒜 E)^-1`, `Ψ = (J'ĤJ)^-1`:
///
/// `K_ε = EΘS^𝒜 - JΨJ'ĤEΘS^𝒜`, `b_ε = (E - JΨJ'ĤE)ΘW^𝒜 - JΨJ'c`,
/// `K_λ = -Θ'E'ĤK_ε`, `b_λ = -Θ'E'(Ĥb_ε + c)`.
pub fn build_regional_law(qp: &CondensedQp, active: &[usize]) -> Result<RegionalLaw> {
    let mut active = active.to_vec();
    active.sort_unstable();
    active.dedup();
    if let Some(&bad) = active
        .iter()
        .find(|&&i| i >= qp.num_rows() || qp.is_state_only_row(i))
    {
        return Err(Error::RankDeficient(format!(
            "row {bad} has no decision-variable part"
        )));
    }
    let (p, n) = (qp.num_vars(), qp.n);
    let g_a = stack_rows(&qp.g, &active);
    let s_a = stack_rows(&qp.s, &active);
    let w_a = DVector::from_iterator(active.len(), active.iter().map(|&i| qp.w[i]));

    let qr = qr_factorize(&g_a.transpose())?;
    let (e, j) = (&qr.range, &qr.complement);
    if condition(&qr.upper) > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            what: "Θ",
            condition: condition(&qr.upper),
        });
    }
    // G^𝒜 E = F'
    let theta = if active.is_empty() {
        DMatrix::zeros(0, 0)
    } else {
        qr.upper
            .transpose()
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient("G^𝒜 E singular".into()))?
    };
    let hat = &qp.hessian;
    let psi = if j.ncols() == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let reduced = j.transpose() * hat * j;
        let reduced = 0.5 * (&reduced + reduced.transpose());
        let eig = reduced.clone().symmetric_eigen();
        let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.amax());
        if lo <= 1e-12 * hi.max(1.0) {
            return Err(Error::RankDeficient(
                "reduced Hessian J'ĤJ is singular".into(),
            ));
        }
        if hi / lo > CONDITION_LIMIT {
            return Err(Error::IllConditioned {
                what: "Ψ",
                condition: hi / lo,
            });
        }
        reduced.try_inverse().expect("positive definite")
    };

    let e_theta = e * &theta;
    let j_psi_jt = j * &psi * j.transpose();
    let k_eps = &e_theta * &s_a - &j_psi_jt * hat * &e_theta * &s_a;
    let b_eps = (&e_theta - &j_psi_jt * hat * &e_theta) * &w_a - &j_psi_jt * &qp.linear;
    let theta_t_et = theta.transpose() * e.transpose();
    let k_lambda = -(&theta_t_et * hat * &k_eps);
    let b_lambda = -(&theta_t_et * (hat * &b_eps + &qp.linear));

    // 𝒞: G^ℐ ε(x) <= W^ℐ + S^ℐ x;  𝒪: λ(x) >= 0
    let mut feasible = Vec::new();
    let g_keps = &qp.g * &k_eps;
    let g_beps = &qp.g * &b_eps;
    let mut in_active = vec![false; qp.num_rows()];
    for &i in &active {
        in_active[i] = true;
    }
    for i in (0..qp.num_rows()).filter(|&i| !in_active[i]) {
        let t = (g_keps.row(i) - qp.s.row(i)).transpose();
        feasible.push((t, qp.w[i] - g_beps[i], RowOrigin::Inactive(i)));
    }
    let mut optimal = Vec::new();
    for (r, &i) in active.iter().enumerate() {
        optimal.push((
            -k_lambda.row(r).transpose(),
            b_lambda[r],
            RowOrigin::Multiplier(i),
        ));
    }
    let feasible = clean_rows(feasible);
    let optimal = clean_rows(optimal);
    let feasible_rows = feasible.len();
    let rows: Vec<_> = feasible.into_iter().chain(optimal).collect();
    let t = DMatrix::from_fn(rows.len(), n, |i, c| rows[i].0[c]);
    let d = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let origins = rows.iter().map(|r| r.2).collect();

    let k_v = &qp.sequence_x + &qp.sequence_eps * &k_eps;
    let b_v = &qp.sequence_eps * &b_eps;
    let k = &qp.input_x + &qp.input_eps * &k_eps;
    let b = &qp.input_eps * &b_eps;
    debug_assert_eq!(k_eps.shape(), (p, n));
    Ok(RegionalLaw {
        active,
        k_eps,
        b_eps,
        k_lambda,
        b_lambda,
        region: Polytope { t, d },
        origins,
        feasible_rows,
        k,
        b,
        k_v,
        b_v,
    })
}

type RegionRow = (DVector<f64>, f64, RowOrigin);

/// Normalizes rows, drops vacuous zero rows and merges duplicates.
fn clean_rows(rows: Vec<RegionRow>) -> Vec<RegionRow> {
    let mut out: Vec<RegionRow> = Vec::with_capacity(rows.len());
    for (t, d, origin) in rows {
        let norm = t.norm();
        if norm <= 1e-12 {
            if d >= -MEMBERSHIP_TOLERANCE {
                continue;
            }
            out.push((t, d, origin));
            continue;
        }
        out.push((t / norm, d / norm, origin));
    }
    let keys: Vec<Vec<f64>> = out
        .iter()
        .map(|r| r.0.iter().copied().chain(std::iter::once(r.1)).collect())
        .collect();
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .iter()
            .zip(&keys[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut duplicate = vec![false; out.len()];
    for w in order.windows(2) {
        let (a, b) = (&out[w[0]], &out[w[1]]);
        if (&a.0 - &b.0).amax() <= 1e-12 && (a.1 - b.1).abs() <= 1e-12 {
            let later = w[0].max(w[1]);
            duplicate[later] = true;
        }
    }
    out.into_iter()
        .enumerate()
        .filter(|(i, _)| !duplicate[*i])
        .map(|(_, r)| r)
        .collect()
}

/// Walks from `x_from ∈ 𝒫(law)` towards `x_to`, switching the active set at
/// every crossed facet: a 𝒞 facet of row `j` adds `j`, an 𝒪 facet removes it.
/// Returns every law built on the way (empty if `x_to` is already covered).
pub fn update_active_set_along_line(
    qp: &CondensedQp,
    law: &RegionalLaw,
    x_from: &DVector<f64>,
    x_to: &DVector<f64>,
) -> Result<Vec<RegionalLaw>> {
    let mut laws: Vec<RegionalLaw> = Vec::new();
    let mut y = x_from.clone();
    let mut last_changed: Option<usize> = None;
    loop {
        let current = laws.last().unwrap_or(law);
        if current.contains(x_to, Membership::Full) {
            return Ok(laws);
        }
        if laws.len() >= MAX_CROSSINGS {
            return Err(Error::FallbackRequired(FallbackReason::Runaway));
        }
        let dir = x_to - &y;
        let dnorm = dir.norm();
        let region = &current.region;
        let mut hits: Vec<(f64, usize)> = Vec::new();
        for i in 0..region.num_rows() {
            if Some(current.origins[i].constraint()) == last_changed {
                continue;
            }
            let den = region.t.row(i).dot(&dir.transpose());
            if den <= 1e-14 * dnorm {
                continue;
            }
            let slack = (region.d[i] - region.t.row(i).dot(&y.transpose())).max(0.0);
            hits.push((slack / den, i));
        }
        let tmin = hits.iter().map(|h| h.0).fold(f64::INFINITY, f64::min);
        if tmin >= 1.0 {
            // x_to violates the region only within tolerance noise
            return Ok(laws);
        }
        let crossing: Vec<usize> = hits
            .iter()
            .filter(|h| h.0 <= tmin + FACET_TIE_TOLERANCE)
            .map(|h| h.1)
            .collect();
        if crossing.len() > 1 {
            return Err(Error::FallbackRequired(FallbackReason::MultipleFacets));
        }
        let origin = current.origins[crossing[0]];
        let mut active = current.active.clone();
        match origin {
            RowOrigin::Inactive(j) => active.push(j),
            RowOrigin::Multiplier(j) => active.retain(|&a| a != j),
        }
        y += tmin * &dir;
        let next = match build_regional_law(qp, &active) {
            Ok(next) => next,
            Err(Error::RankDeficient(_) | Error::IllConditioned { .. }) => {
                return Err(Error::FallbackRequired(FallbackReason::RankLoss));
            }
            Err(other) => return Err(other),
        };
        last_changed = Some(origin.constraint());
        laws.push(next);
    }
}
