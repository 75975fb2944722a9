//! Least-squares helpers shared by the Wiener-filter estimators and the
//! partition selector.

use nalgebra::{DMatrix, DVector};

use crate::error::{LrdnError, Result};

/// Designs whose triangular factor exceeds this condition number are rejected
/// unless a ridge term is present.
pub const MAX_DESIGN_CONDITION: f64 = 1e10;

/// One regressor column: `channel` sampled `lag` steps back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagColumn {
    pub channel: usize,
    pub lag: usize,
}

/// `(T - p) x k` design with entry `(s, c) = data[(s + p - lag_c, channel_c)]`.
pub fn lagged_design(data: &DMatrix<f64>, columns: &[LagColumn], p: usize) -> DMatrix<f64> {
    let rows = data.nrows().saturating_sub(p);
    DMatrix::from_fn(rows, columns.len(), |s, c| {
        let col = columns[c];
        data[(s + p - col.lag, col.channel)]
    })
}

/// Samples `p..T` of one channel.
pub fn lagged_target(data: &DMatrix<f64>, channel: usize, p: usize) -> DVector<f64> {
    data.column(channel).rows(p, data.nrows() - p).into_owned()
}

#[derive(Debug, Clone)]
pub struct LsFit {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    pub condition: f64,
    /// `(X'X + ridge I)^-1`, `k x k`.
    pub gram_inverse: DMatrix<f64>,
}

/// Least squares by Householder QR; with `ridge > 0` the design is augmented
/// by `sqrt(ridge) I`. `row` only labels errors.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, ridge: f64, row: usize) -> Result<LsFit> {
    let (n, k) = x.shape();
    if k == 0 {
        return Ok(LsFit {
            coef: DVector::zeros(0),
            residuals: y.clone(),
            rss: y.norm_squared(),
            condition: 1.0,
            gram_inverse: DMatrix::zeros(0, 0),
        });
    }
    if n < k {
        return Err(LrdnError::InsufficientData {
            available: n,
            required: k,
        });
    }
    let (a, b) = if ridge > 0.0 {
        let mut a = DMatrix::zeros(n + k, k);
        a.rows_mut(0, n).copy_from(x);
        a.rows_mut(n, k).copy_from(&(DMatrix::identity(k, k) * ridge.sqrt()));
        let mut b = DVector::zeros(n + k);
        b.rows_mut(0, n).copy_from(y);
        (a, b)
    } else {
        (x.clone(), y.clone())
    };
    let qr = a.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let condition = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    if ridge == 0.0 && !(condition < MAX_DESIGN_CONDITION) {
        return Err(LrdnError::RankDeficientDesign { row, condition });
    }
    let mut qtb = b;
    qr.q_tr_mul(&mut qtb);
    let rhs = qtb.rows(0, k).into_owned();
    let coef = r
        .solve_upper_triangular(&rhs)
        .ok_or(LrdnError::RankDeficientDesign { row, condition })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(LrdnError::RankDeficientDesign { row, condition })?;
    let gram_inverse = &r_inv * r_inv.transpose();
    let residuals = y - x * &coef;
    let rss = residuals.norm_squared();
    Ok(LsFit {
        coef,
        residuals,
        rss,
        condition,
        gram_inverse,
    })
}

/// Orthonormal basis of the column space of `x` from a column-pivoted QR,
/// keeping pivots with `|R_kk| > rel_cutoff * |R_00|`.
pub fn column_space(x: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let k = x.nrows().min(x.ncols());
    if k == 0 {
        return DMatrix::zeros(x.nrows(), 0);
    }
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    let rank = (0..k).take_while(|&i| lead > 0.0 && r[(i, i)].abs() > rel_cutoff * lead).count();
    qr.q().columns(0, rank).into_owned()
}

/// Residual sum of squares of `y` after projecting out an orthonormal basis.
pub fn projection_rss(basis: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    if basis.ncols() == 0 {
        return y.norm_squared();
    }
    let proj = basis * (basis.transpose() * y);
    (y - proj).norm_squared()
}
