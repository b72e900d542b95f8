use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on the diagonal of the triangular factor below which
/// the factored matrix is treated as column-rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Full Householder QR of a tall matrix `M = [E J] [F; 0]`.
///
/// `range` (E) spans the column space of `M`, `complement` (J) its orthogonal
/// complement, and `upper` (F) is square upper-triangular.
#[derive(Debug, Clone)]
pub struct QrFactorization {
    pub range: DMatrix<f64>,
    pub complement: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

impl QrFactorization {
    /// The full orthogonal factor `[E J]`.
    pub fn orthogonal(&self) -> DMatrix<f64> {
        let rows = self.range.nrows();
        let mut q = DMatrix::zeros(rows, rows);
        q.columns_mut(0, self.range.ncols()).copy_from(&self.range);
        q.columns_mut(self.range.ncols(), self.complement.ncols())
            .copy_from(&self.complement);
        q
    }
}

/// Factorizes `m` (rows >= cols) and checks that it has full column rank.
pub fn qr_factorize(m: &DMatrix<f64>) -> Result<QrFactorization> {
    let (rows, cols) = m.shape();
    if cols > rows {
        return Err(Error::RankDeficient(format!(
            "{cols} columns cannot be independent in dimension {rows}"
        )));
    }
    let (q, r) = householder(m);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for k in 0..cols {
        if r[(k, k)].abs() < RANK_TOLERANCE * scale {
            return Err(Error::RankDeficient(format!(
                "diagonal entry {k} of the triangular factor is {:.3e}",
                r[(k, k)]
            )));
        }
    }
    Ok(QrFactorization {
        range: q.columns(0, cols).into_owned(),
        complement: q.columns(cols, rows - cols).into_owned(),
        upper: r.rows(0, cols).into_owned(),
    })
}

/// Householder reduction returning the full orthogonal factor and the
/// (rows x cols) triangular factor.
fn householder(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let mut r = m.clone();
    let mut q = DMatrix::<f64>::identity(rows, rows);
    for k in 0..cols.min(rows.saturating_sub(1)) {
        let x = r.view((k, k), (rows - k, 1)).column(0).into_owned();
        let alpha = x.norm();
        if alpha == 0.0 {
            continue;
        }
        let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: DVector<f64> = x;
        v[0] += sign * alpha;
        let vnorm = v.norm();
        if vnorm == 0.0 {
            continue;
        }
        v /= vnorm;
        // R <- (I - 2vv') R on the trailing block
        {
            let mut block = r.view_mut((k, k), (rows - k, cols - k));
            let proj = v.transpose() * &block;
            block -= 2.0 * &v * proj;
        }
        // Q <- Q (I - 2vv')
        {
            let mut block = q.view_mut((0, k), (rows, rows - k));
            let proj = &block * &v;
            block -= 2.0 * proj * v.transpose();
        }
        for i in k + 1..rows {
            r[(i, k)] = 0.0;
        }
    }
    (q, r)
}
