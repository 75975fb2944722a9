//! Spectra of models on uniform frequency grids.
//!
//! `Phi(theta) = T(theta) diag(sigma_l) T(theta)^H` where `T = [G_ml W; W]` and
//! `W = (I - G_l)^-1`. The spectrum has rank `l`; its `y_l` block is full rank
//! and yields the closed form `H = Phi_ml Phi_l^-1 = G_ml`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LrdnError, Result};
use crate::model::{reduced_form, LrdnModel};
use crate::polymat::PolynomialMatrix;

/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 64;
/// Relative singular-value cutoff for numerical rank.
pub const RANK_REL_TOL: f64 = 1e-6;
/// Spectral blocks with a larger condition number are treated as singular.
pub const MAX_BLOCK_CONDITION: f64 = 1e10;

/// Complex matrices at `theta_j = 2 pi j / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    pub thetas: Vec<f64>,
    pub values: Vec<DMatrix<Complex64>>,
}

/// Uniform grid angles; `n` must be a power of two.
pub fn grid_angles(n: usize) -> Result<Vec<f64>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(LrdnError::InvalidConfig(format!("grid size {n} is not a power of two")));
    }
    Ok((0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect())
}

impl SpectralGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Square sub-block starting at `offset` of size `size` at every point.
    pub fn block(&self, offset: usize, size: usize) -> SpectralGrid {
        SpectralGrid {
            thetas: self.thetas.clone(),
            values: self
                .values
                .iter()
                .map(|v| v.view((offset, offset), (size, size)).into_owned())
                .collect(),
        }
    }

    /// Largest deviation from Hermitian symmetry and smallest eigenvalue over the grid.
    pub fn hermitian_psd_margins(&self) -> (f64, f64) {
        let mut asym = 0.0f64;
        let mut min_eig = f64::INFINITY;
        for v in &self.values {
            asym = asym.max((v - v.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max));
            let herm = (v + v.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = herm.symmetric_eigenvalues();
            min_eig = min_eig.min(eig.min());
        }
        (asym, min_eig)
    }

    /// Hermitian within `1e-10` and PSD within `-1e-8` at every point.
    pub fn is_valid_spectrum(&self) -> bool {
        let (asym, min_eig) = self.hermitian_psd_margins();
        asym <= 1e-10 && min_eig >= -1e-8
    }

    /// Singular values (descending) at every grid point.
    pub fn singular_values(&self) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .map(|v| {
                let mut sv: Vec<f64> = v.singular_values().iter().copied().collect();
                sv.sort_by(|a, b| b.total_cmp(a));
                sv
            })
            .collect()
    }

    pub fn to_export(&self) -> Vec<GridPoint> {
        self.thetas
            .iter()
            .zip(&self.values)
            .map(|(&theta, v)| GridPoint {
                theta,
                re: rows_of(v, |z| z.re),
                im: rows_of(v, |z| z.im),
            })
            .collect()
    }
}

fn rows_of(v: &DMatrix<Complex64>, f: impl Fn(&Complex64) -> f64) -> Vec<Vec<f64>> {
    (0..v.nrows()).map(|i| (0..v.ncols()).map(|j| f(&v[(i, j)])).collect()).collect()
}

/// One exported grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub theta: f64,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(singular_values: &[f64], rel_tol: f64) -> usize {
    let max = singular_values.iter().copied().fold(0.0, f64::max);
    singular_values.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Full `(m + l) x (m + l)` spectrum of a model.
pub fn spectrum_of_model(model: &LrdnModel, n: usize, horizon: usize) -> Result<SpectralGrid> {
    let thetas = grid_angles(n)?;
    let rf = reduced_form(model, horizon)?;
    let lambda = lambda_matrix(&model.sigma_l);
    let values = thetas
        .iter()
        .map(|&theta| {
            let tf = rf.full_transfer.eval(theta);
            &tf * &lambda * tf.adjoint()
        })
        .collect();
    Ok(SpectralGrid { thetas, values })
}

fn lambda_matrix(sigma: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(sigma.len(), sigma.len(), |i, j| {
        if i == j {
            Complex64::new(sigma[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// The canonical minimum-phase factor `W = (I - G_l)^-1` (truncated) and `Lambda = sigma_l`.
pub fn spectral_factor_of_model(model: &LrdnModel, horizon: usize) -> Result<(PolynomialMatrix, Vec<f64>)> {
    let rf = reduced_form(model, horizon)?;
    Ok((rf.w_factor, model.sigma_l.clone()))
}

/// `max_theta ||Phi_l(theta) - W(theta) Lambda W(theta)^H||_F` against a given grid.
pub fn factorization_residual(phi_l: &SpectralGrid, w: &PolynomialMatrix, lambda: &[f64]) -> f64 {
    let lam = lambda_matrix(lambda);
    phi_l
        .thetas
        .iter()
        .zip(&phi_l.values)
        .map(|(&theta, phi)| {
            let wv = w.eval(theta);
            (phi - &wv * &lam * wv.adjoint()).norm()
        })
        .fold(0.0, f64::max)
}

fn checked_inverse(block: &DMatrix<Complex64>, theta: f64) -> Result<DMatrix<Complex64>> {
    let sv = block.singular_values();
    let condition = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    if !(condition < MAX_BLOCK_CONDITION) {
        return Err(LrdnError::SingularBlock { theta, condition });
    }
    block
        .clone()
        .try_inverse()
        .ok_or(LrdnError::SingularBlock { theta, condition })
}

/// `H(theta) = Phi_lm(theta)^H Phi_l(theta)^-1` at every grid point (`m x l`).
pub fn h_closed_form(model: &LrdnModel, n: usize, horizon: usize) -> Result<SpectralGrid> {
    let phi = spectrum_of_model(model, n, horizon)?;
    let (m, l) = (model.m, model.l);
    let values = phi
        .thetas
        .iter()
        .zip(&phi.values)
        .map(|(&theta, v)| {
            let phi_l = v.view((m, m), (l, l)).into_owned();
            let phi_lm = v.view((m, 0), (l, m)).into_owned();
            Ok(phi_lm.adjoint() * checked_inverse(&phi_l, theta)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralGrid {
        thetas: phi.thetas,
        values,
    })
}

/// Support of the inverse spectrum of a full-rank block: `(k, h)` is true iff
/// `max_theta |[Phi_l(theta)^-1]_kh| > zero_tol`.
pub fn inverse_support_fullrank(grid: &SpectralGrid, zero_tol: f64) -> Result<DMatrix<bool>> {
    let size = grid.values.first().map_or(0, |v| v.nrows());
    let mut peak = DMatrix::<f64>::zeros(size, size);
    for (&theta, v) in grid.thetas.iter().zip(&grid.values) {
        let inv = checked_inverse(v, theta)?;
        peak.zip_apply(&inv.map(|z| z.norm()), |p, a| *p = p.max(a));
    }
    Ok(peak.map(|p| p > zero_tol))
}
