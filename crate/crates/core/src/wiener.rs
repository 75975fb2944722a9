//! The two causal Wiener filters of an LRDN.
//!
//! * `H(z)`: `y_m(t)` projected on the past and present of `y_l`. For an LRDN
//!   this is exactly `G_ml(z)`.
//! * `S(z)`: each `y_l(i)(t)` projected on its own strict past and the past
//!   and present of the other `y_l` channels, so `[S(inf)]_ii = 0`. In closed
//!   form `S = I - D W^-1` with `D = diag([W_0]_ii)`, hence
//!   `I - S = D (I - G_l)`.
//!
//! Both are available in closed form from a model and as FIR least-squares
//! estimates from data.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LrdnError, Result};
use crate::model::{validate, LrdnModel};
use crate::polymat::{invert_checked, PolynomialMatrix, DEFAULT_DECAY_TOL};
use crate::regress::{lagged_design, lagged_target, least_squares, LagColumn};
use crate::sim::TimeSeries;

/// Extra residual degrees of freedom required beyond the regressor count.
pub const MIN_DOF_MARGIN: usize = 10;
/// `|[S_0]_ii|` above this means the closed form is inconsistent.
pub const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    #[serde(rename = "M_BLOCK")]
    M,
    #[serde(rename = "L_BLOCK")]
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    pub order_p: usize,
    pub ridge: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self { order_p: 8, ridge: 0.0 }
    }
}

/// Design columns of one source channel within a row regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorGroup {
    /// 0-based `y_l` channel.
    pub source: usize,
    /// Column indices in the row's design.
    pub columns: Vec<usize>,
    pub lags: Vec<usize>,
}

/// Least-squares FIR estimate of `H` (M block) or `S` (L block).
#[derive(Debug, Clone)]
pub struct FilterEstimate {
    pub block: Block,
    pub order: usize,
    pub ridge: f64,
    /// `m x l` for `H`, `l x l` for `S`, degree `order`.
    pub coeffs: PolynomialMatrix,
    /// `T' x rows`, `T' = T - order`.
    pub residuals: DMatrix<f64>,
    pub rss_full: Vec<f64>,
    /// Root mean square of each row's target over the fitted window.
    pub target_rms: Vec<f64>,
    pub regressor_groups: Vec<Vec<RegressorGroup>>,
    /// Per row, per group: the matching diagonal block of `(X'X)^-1`.
    pub xtx_inverse_diag_blocks: Vec<Vec<DMatrix<f64>>>,
    pub num_regressors: Vec<usize>,
}

/// Export layout of a [`FilterEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterEstimateJson {
    pub block: Block,
    pub order: usize,
    pub coeffs: PolynomialMatrix,
    pub per_row_rss: Vec<f64>,
    pub residual_variances: Vec<f64>,
}

impl FilterEstimate {
    pub fn rows(&self) -> usize {
        self.coeffs.rows()
    }

    /// Number of samples used in each row regression.
    pub fn num_used(&self) -> usize {
        self.residuals.nrows()
    }

    /// `RSS / (T' - k)` per row.
    pub fn residual_variances(&self) -> Vec<f64> {
        self.rss_full
            .iter()
            .zip(&self.num_regressors)
            .map(|(&rss, &k)| rss / (self.num_used() - k) as f64)
            .collect()
    }

    pub fn residual_rms(&self, row: usize) -> f64 {
        (self.rss_full[row] / self.num_used() as f64).sqrt()
    }

    /// Estimated coefficients of group `(row, source)` in lag order.
    pub fn group_coeffs(&self, row: usize, source: usize) -> Vec<f64> {
        self.regressor_groups[row]
            .iter()
            .find(|g| g.source == source)
            .map(|g| g.lags.iter().map(|&k| self.coeffs.entry(k, row, source)).collect())
            .unwrap_or_default()
    }

    /// Design columns for a row, in column order.
    pub fn row_columns(&self, row: usize) -> Vec<LagColumn> {
        let mut cols = vec![LagColumn { channel: 0, lag: 0 }; self.num_regressors[row]];
        for g in &self.regressor_groups[row] {
            for (&c, &lag) in g.columns.iter().zip(&g.lags) {
                cols[c] = LagColumn {
                    channel: g.source,
                    lag,
                };
            }
        }
        cols
    }

    pub fn to_json(&self) -> FilterEstimateJson {
        FilterEstimateJson {
            block: self.block,
            order: self.order,
            coeffs: self.coeffs.clone(),
            per_row_rss: self.rss_full.clone(),
            residual_variances: self.residual_variances(),
        }
    }
}

/// Regressor layout for one row: sources in ascending order, lags ascending.
/// In the L block the row's own lag 0 is excluded.
fn row_layout(block: Block, row: usize, l: usize, p: usize) -> Vec<RegressorGroup> {
    let mut groups = Vec::with_capacity(l);
    let mut next = 0;
    for source in 0..l {
        let first = if block == Block::L && source == row { 1 } else { 0 };
        let lags: Vec<usize> = (first..=p).collect();
        let columns = (next..next + lags.len()).collect();
        next += lags.len();
        groups.push(RegressorGroup { source, columns, lags });
    }
    groups
}

fn estimate(data: &TimeSeries, block: Block, cfg: EstimationConfig) -> Result<FilterEstimate> {
    let (m, l, p) = (data.m, data.l, cfg.order_p);
    let rows = match block {
        Block::M => m,
        Block::L => l,
    };
    if rows == 0 || l == 0 {
        return Err(LrdnError::InvalidConfig(format!("{block:?} block is empty (m = {m}, l = {l})")));
    }
    if cfg.ridge < 0.0 || !cfg.ridge.is_finite() {
        return Err(LrdnError::InvalidConfig(format!("ridge {} must be nonnegative", cfg.ridge)));
    }
    let k_max = l * (p + 1);
    let required = p + k_max + MIN_DOF_MARGIN;
    if data.num_samples() <= required {
        return Err(LrdnError::InsufficientData {
            available: data.num_samples(),
            required: required + 1,
        });
    }

    // columns m..m+l of the data are y_l; work on the y_l block directly
    let yl = data.l_block();
    let fits = (0..rows)
        .into_par_iter()
        .map(|row| {
            let groups = row_layout(block, row, l, p);
            let columns: Vec<LagColumn> = groups
                .iter()
                .flat_map(|g| g.lags.iter().map(move |&lag| LagColumn { channel: g.source, lag }))
                .collect();
            let x = lagged_design(&yl, &columns, p);
            let target_channel = match block {
                Block::M => row,
                Block::L => m + row,
            };
            let y = lagged_target(&data.data, target_channel, p);
            let fit = least_squares(&x, &y, cfg.ridge, row + 1)?;
            Ok((groups, y, fit))
        })
        .collect::<Result<Vec<_>>>()?;

    let t_used = data.num_samples() - p;
    let mut coeffs = PolynomialMatrix::zeros(rows, l, p);
    let mut residuals = DMatrix::zeros(t_used, rows);
    let mut rss_full = Vec::with_capacity(rows);
    let mut target_rms = Vec::with_capacity(rows);
    let mut regressor_groups = Vec::with_capacity(rows);
    let mut blocks = Vec::with_capacity(rows);
    let mut num_regressors = Vec::with_capacity(rows);
    for (row, (groups, y, fit)) in fits.into_iter().enumerate() {
        let mut row_blocks = Vec::with_capacity(groups.len());
        for g in &groups {
            for (&c, &lag) in g.columns.iter().zip(&g.lags) {
                coeffs.coeff_mut(lag)[(row, g.source)] = fit.coef[c];
            }
            let (start, len) = (g.columns.first().copied().unwrap_or(0), g.columns.len());
            row_blocks.push(fit.gram_inverse.view((start, start), (len, len)).into_owned());
        }
        residuals.set_column(row, &fit.residuals);
        rss_full.push(fit.rss);
        target_rms.push((y.norm_squared() / t_used as f64).sqrt());
        num_regressors.push(fit.coef.len());
        regressor_groups.push(groups);
        blocks.push(row_blocks);
    }
    Ok(FilterEstimate {
        block,
        order: p,
        ridge: cfg.ridge,
        coeffs,
        residuals,
        rss_full,
        target_rms,
        regressor_groups,
        xtx_inverse_diag_blocks: blocks,
        num_regressors,
    })
}

/// Least-squares estimate of `H(z)`: each `y_m(i)(t)` on `y_l(j)(t - k)`, `k = 0..=p`.
pub fn estimate_h(data: &TimeSeries, cfg: EstimationConfig) -> Result<FilterEstimate> {
    estimate(data, Block::M, cfg)
}

/// Least-squares estimate of `S(z)`: each `y_l(i)(t)` on its own lags `1..=p`
/// and the other channels' lags `0..=p`.
pub fn estimate_s(data: &TimeSeries, cfg: EstimationConfig) -> Result<FilterEstimate> {
    estimate(data, Block::L, cfg)
}

/// Closed-form Wiener filters of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactFilters {
    pub s: PolynomialMatrix,
    pub h: PolynomialMatrix,
    /// `[D]_ii = [W_0]_ii = [(I - G_l(inf))^-1]_ii`.
    pub d: Vec<f64>,
}

/// `S = I - D (I - G_l)` and `H = G_ml`, computed without truncation.
///
/// Fails with [`LrdnError::ContemporaneousLoop`] when `[S(inf)]_ii` is not
/// zero, which happens when `G_l(inf)` contains a feedback cycle.
pub fn exact_filters(model: &LrdnModel) -> Result<ExactFilters> {
    validate(model).into_result()?;
    let l = model.l;
    let w0 = invert_checked(&(DMatrix::identity(l, l) - model.g_l.coeff(0)))?;
    let d: Vec<f64> = (0..l).map(|i| w0[(i, i)]).collect();
    let dmat = DMatrix::from_diagonal(&DVector::from_vec(d.clone()));
    let s = PolynomialMatrix::identity(l).sub(&model.i_minus_g_l().premultiply(&dmat)?)?;
    let mut s = s;
    for i in 0..l {
        let v = s.coeff(0)[(i, i)];
        if v.abs() > DIAGONAL_TOL {
            return Err(LrdnError::ContemporaneousLoop { index: i + 1, value: v });
        }
        // rounding-level residue of 1 - d_i is a structural zero
        s.coeff_mut(0)[(i, i)] = 0.0;
    }
    Ok(ExactFilters {
        s: s.normalized(),
        h: model.g_ml.clone(),
        d,
    })
}

/// `S = I - diag([W_0]_ii) W^-1` from a spectral factor, with `W^-1` truncated at `horizon`.
pub fn exact_s_via_factor(w: &PolynomialMatrix, horizon: usize) -> Result<PolynomialMatrix> {
    exact_s_via_factor_with(w, horizon, DEFAULT_DECAY_TOL)
}

pub fn exact_s_via_factor_with(w: &PolynomialMatrix, horizon: usize, decay_tol: f64) -> Result<PolynomialMatrix> {
    let l = w.rows();
    let winv = w.truncated_inverse(horizon, decay_tol)?.inverse;
    let d = DMatrix::from_diagonal(&w.coeff(0).diagonal());
    PolynomialMatrix::identity(l).sub(&winv.premultiply(&d)?)
}
