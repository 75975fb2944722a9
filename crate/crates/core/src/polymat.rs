//! Matrix FIR filters `C_0 + C_1 z^-1 + ... + C_n z^-n` with real coefficients.
//!
//! Every transfer function in the toolkit (network filters, spectral factors,
//! Wiener filters and their truncated inverses) is carried by
//! [`PolynomialMatrix`]. Complex arithmetic only appears in [`PolynomialMatrix::eval`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LrdnError, Result};

/// Default horizon for truncated inverses.
pub const DEFAULT_HORIZON: usize = 256;
/// Default tail-norm bound for truncated inverses.
pub const DEFAULT_DECAY_TOL: f64 = 1e-8;
/// Default coefficient magnitude below which an entry counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;
/// Leading coefficients with a larger condition number are treated as singular.
pub const MAX_LEADING_CONDITION: f64 = 1e12;

/// Polynomial matrix in `z^-1`; `coeffs[k]` multiplies `z^-k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialMatrixJson", into = "PolynomialMatrixJson")]
pub struct PolynomialMatrix {
    rows: usize,
    cols: usize,
    coeffs: Vec<DMatrix<f64>>,
}

/// Result of [`PolynomialMatrix::truncated_inverse`].
#[derive(Debug, Clone)]
pub struct TruncatedInverse {
    pub inverse: PolynomialMatrix,
    /// Frobenius norm of the last computed coefficient.
    pub tail_norm: f64,
}

impl PolynomialMatrix {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| LrdnError::ShapeMismatch("polynomial needs at least one coefficient".into()))?;
        let (rows, cols) = first.shape();
        if let Some((k, c)) = coeffs.iter().enumerate().find(|(_, c)| c.shape() != (rows, cols)) {
            return Err(LrdnError::ShapeMismatch(format!(
                "coefficient {k} has shape {:?}, expected {:?}",
                c.shape(),
                (rows, cols)
            )));
        }
        Ok(Self { rows, cols, coeffs })
    }

    pub fn zeros(rows: usize, cols: usize, degree: usize) -> Self {
        Self {
            rows,
            cols,
            coeffs: vec![DMatrix::zeros(rows, cols); degree + 1],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn constant(c: DMatrix<f64>) -> Self {
        let (rows, cols) = c.shape();
        Self {
            rows,
            cols,
            coeffs: vec![c],
        }
    }

    /// Scalar polynomial `c_0 + c_1 z^-1 + ...`.
    pub fn scalar(coeffs: &[f64]) -> Self {
        assert!(!coeffs.is_empty(), "scalar polynomial needs a coefficient");
        Self {
            rows: 1,
            cols: 1,
            coeffs: coeffs.iter().map(|&c| DMatrix::from_element(1, 1, c)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &DMatrix<f64> {
        &self.coeffs[k]
    }

    pub fn coeff_mut(&mut self, k: usize) -> &mut DMatrix<f64> {
        &mut self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// Entry `(i, j)` of coefficient `k`, or zero beyond the degree.
    pub fn entry(&self, k: usize, i: usize, j: usize) -> f64 {
        self.coeffs.get(k).map_or(0.0, |c| c[(i, j)])
    }

    /// Strips trailing all-zero coefficients, keeping at least `C_0`.
    pub fn normalize(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.iter().all(|&v| v == 0.0)) {
            self.coeffs.pop();
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// Pads with zero coefficients (or truncates) to exactly `degree`.
    pub fn with_degree(&self, degree: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(degree + 1, DMatrix::zeros(self.rows, self.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            coeffs,
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(LrdnError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let degree = self.degree().max(other.degree());
        let coeffs = (0..=degree)
            .map(|k| {
                let mut c = DMatrix::zeros(self.rows, self.cols);
                if let Some(a) = self.coeffs.get(k) {
                    c += a;
                }
                if let Some(b) = other.coeffs.get(k) {
                    c += b;
                }
                c
            })
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            coeffs,
        }
        .normalized())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Coefficient convolution `C_k = sum_j A_j B_{k-j}`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(LrdnError::ShapeMismatch(format!(
                "inner dimensions differ: {:?} * {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let degree = self.degree() + other.degree();
        let mut coeffs = vec![DMatrix::zeros(self.rows, other.cols); degree + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j].gemm(1.0, a, b, 1.0);
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            coeffs,
        })
    }

    /// Multiplies every coefficient on the left by a constant matrix.
    pub fn premultiply(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.rows {
            return Err(LrdnError::ShapeMismatch(format!(
                "constant {:?} * polynomial {:?}",
                m.shape(),
                self.shape()
            )));
        }
        Ok(Self {
            rows: m.nrows(),
            cols: self.cols,
            coeffs: self.coeffs.iter().map(|c| m * c).collect(),
        })
    }

    /// Stacks `self` above `other` (same column count).
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(LrdnError::ShapeMismatch(format!(
                "cannot stack {:?} above {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let degree = self.degree().max(other.degree());
        let rows = self.rows + other.rows;
        let coeffs = (0..=degree)
            .map(|k| {
                let mut c = DMatrix::zeros(rows, self.cols);
                if let Some(a) = self.coeffs.get(k) {
                    c.rows_mut(0, self.rows).copy_from(a);
                }
                if let Some(b) = other.coeffs.get(k) {
                    c.rows_mut(self.rows, other.rows).copy_from(b);
                }
                c
            })
            .collect();
        Ok(Self {
            rows,
            cols: self.cols,
            coeffs,
        })
    }

    /// Frequency response `sum_k C_k e^{-i k theta}` (Horner in `e^{-i theta}`).
    pub fn eval(&self, theta: f64) -> DMatrix<Complex64> {
        let zinv = Complex64::from_polar(1.0, -theta);
        let mut acc = DMatrix::<Complex64>::zeros(self.rows, self.cols);
        for c in self.coeffs.iter().rev() {
            acc *= zinv;
            acc.zip_apply(c, |a, b| *a += Complex64::new(b, 0.0));
        }
        acc
    }

    /// Causal inverse of a square filter by the recursion
    /// `Q_0 = A_0^-1`, `Q_k = -A_0^-1 sum_{j=1..min(k, deg)} A_j Q_{k-j}`.
    ///
    /// The result has degree exactly `horizon`. Fails with `NoDecay` when
    /// `||Q_horizon||_F > decay_tol`.
    pub fn truncated_inverse(&self, horizon: usize, decay_tol: f64) -> Result<TruncatedInverse> {
        if self.rows != self.cols {
            return Err(LrdnError::ShapeMismatch(format!(
                "truncated inverse needs a square filter, got {:?}",
                self.shape()
            )));
        }
        let a0_inv = invert_checked(&self.coeffs[0])?;
        let mut q: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
        q.push(a0_inv.clone());
        let mut acc = DMatrix::zeros(self.rows, self.cols);
        for k in 1..=horizon {
            acc.fill(0.0);
            for j in 1..=k.min(self.degree()) {
                acc.gemm(1.0, &self.coeffs[j], &q[k - j], 1.0);
            }
            q.push(-(&a0_inv * &acc));
        }
        let tail_norm = q[horizon].norm();
        if !(tail_norm <= decay_tol) {
            return Err(LrdnError::NoDecay {
                tail_norm,
                decay_tol,
                horizon,
            });
        }
        Ok(TruncatedInverse {
            inverse: Self {
                rows: self.rows,
                cols: self.cols,
                coeffs: q,
            },
            tail_norm,
        })
    }

    /// Entry `(i, j)` is true iff some `|[C_k]_ij| > zero_tol`.
    pub fn support(&self, zero_tol: f64) -> DMatrix<bool> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| {
            self.coeffs.iter().any(|c| c[(i, j)].abs() > zero_tol)
        })
    }

    /// Largest absolute coefficient difference, padding the shorter side with zeros.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        let degree = self.degree().max(other.degree());
        let mut worst = 0.0f64;
        for k in 0..=degree {
            for i in 0..self.rows {
                for j in 0..self.cols {
                    worst = worst.max((self.entry(k, i, j) - other.entry(k, i, j)).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Coefficients of entry `(i, j)` for lags `0..=degree`.
    pub fn entry_coeffs(&self, i: usize, j: usize) -> Vec<f64> {
        self.coeffs.iter().map(|c| c[(i, j)]).collect()
    }
}

/// Inverts a square matrix, rejecting it when its condition number exceeds
/// [`MAX_LEADING_CONDITION`].
pub fn invert_checked(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = condition_number(a);
    if !(condition < MAX_LEADING_CONDITION) {
        return Err(LrdnError::SingularLeadingCoefficient { condition });
    }
    a.clone()
        .try_inverse()
        .ok_or(LrdnError::SingularLeadingCoefficient { condition })
}

/// 2-norm condition number via singular values (`inf` when singular).
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Elementary column vector `b_i` of length `l` (1-based `i`).
pub fn selector(i: usize, l: usize) -> Result<DVector<f64>> {
    if i == 0 || i > l {
        return Err(LrdnError::IndexOutOfRange { index: i, len: l });
    }
    let mut b = DVector::zeros(l);
    b[i - 1] = 1.0;
    Ok(b)
}

/// `B_I`: rows `b_i'` stacked for every (1-based) `i` in `indices`.
pub fn selector_stack(indices: &[usize], l: usize) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(indices.len(), l);
    for (r, &i) in indices.iter().enumerate() {
        out.set_row(r, &selector(i, l)?.transpose());
    }
    Ok(out)
}

/// `M_i(z) = I + (z^-1 - 1) b_i b_i'`: identity with `z^-1` at diagonal slot `i` (1-based).
pub fn selector_shift(i: usize, l: usize) -> Result<PolynomialMatrix> {
    let b = selector(i, l)?;
    let bbt = &b * b.transpose();
    let c0 = DMatrix::identity(l, l) - &bbt;
    PolynomialMatrix::new(vec![c0, bbt])
}

#[derive(Serialize, Deserialize)]
struct PolynomialMatrixJson {
    rows: usize,
    cols: usize,
    degree: usize,
    coeffs: Vec<Vec<Vec<f64>>>,
}

impl From<PolynomialMatrix> for PolynomialMatrixJson {
    fn from(p: PolynomialMatrix) -> Self {
        Self {
            rows: p.rows,
            cols: p.cols,
            degree: p.degree(),
            coeffs: p
                .coeffs
                .iter()
                .map(|c| (0..p.rows).map(|i| c.row(i).iter().copied().collect()).collect())
                .collect(),
        }
    }
}

impl TryFrom<PolynomialMatrixJson> for PolynomialMatrix {
    type Error = String;

    fn try_from(j: PolynomialMatrixJson) -> std::result::Result<Self, String> {
        if j.coeffs.len() != j.degree + 1 {
            return Err(format!(
                "degree {} requires {} coefficients, found {}",
                j.degree,
                j.degree + 1,
                j.coeffs.len()
            ));
        }
        let mut coeffs = Vec::with_capacity(j.coeffs.len());
        for (k, c) in j.coeffs.iter().enumerate() {
            if c.len() != j.rows || c.iter().any(|r| r.len() != j.cols) {
                return Err(format!("coefficient {k} is not {}x{}", j.rows, j.cols));
            }
            coeffs.push(DMatrix::from_fn(j.rows, j.cols, |r, s| c[r][s]));
        }
        Ok(Self {
            rows: j.rows,
            cols: j.cols,
            coeffs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    fn close(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() <= tol)
    }

    #[test]
    fn add_identity_and_disjoint_degrees() {
        let a = PolynomialMatrix::new(vec![mat(2, 2, &[1.0, 2.0, 3.0, 4.0]), mat(2, 2, &[0.5, 0.0, 0.0, -1.0])]).unwrap();
        let zero = PolynomialMatrix::zeros(2, 2, 0);
        assert_eq!(a.add(&zero).unwrap(), a);

        let i = PolynomialMatrix::identity(2);
        let iz = PolynomialMatrix::new(vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2)]).unwrap();
        let s = i.add(&iz).unwrap();
        assert_eq!(s.degree(), 1);
        assert_eq!(s.coeff(0), &DMatrix::identity(2, 2));
        assert_eq!(s.coeff(1), &DMatrix::identity(2, 2));

        let z = a.add(&a.scale(-1.0)).unwrap();
        assert_eq!(z.degree(), 0);
        assert!(z.coeff(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn add_rejects_shape_mismatch() {
        let a = PolynomialMatrix::zeros(2, 2, 1);
        let b = PolynomialMatrix::zeros(2, 3, 1);
        assert!(matches!(a.add(&b), Err(LrdnError::ShapeMismatch(_))));
    }

    #[test]
    fn mul_examples() {
        let p = PolynomialMatrix::new(vec![mat(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), mat(2, 3, &[0.1, 0.0, 0.0, 0.0, 0.2, 0.3])]).unwrap();
        assert_eq!(PolynomialMatrix::identity(2).mul(&p).unwrap(), p);

        let a = PolynomialMatrix::scalar(&[1.0, -0.5]);
        let b = PolynomialMatrix::scalar(&[1.0, 0.5]);
        let c = a.mul(&b).unwrap();
        assert_eq!(c.entry_coeffs(0, 0), vec![1.0, 0.0, -0.25]);

        assert!(matches!(p.mul(&p), Err(LrdnError::ShapeMismatch(_))));
    }

    #[test]
    fn eval_examples() {
        let p = PolynomialMatrix::new(vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)]).unwrap();
        let two = DMatrix::<Complex64>::identity(2, 2) * Complex64::new(2.0, 0.0);
        assert!(close(&p.eval(0.0), &two, 1e-15));
        assert!(close(&p.eval(PI), &DMatrix::zeros(2, 2), 1e-15));

        let s = PolynomialMatrix::scalar(&[1.0, -0.5]);
        let v = s.eval(PI / 2.0)[(0, 0)];
        assert!((v - Complex64::new(1.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn truncated_inverse_geometric_series() {
        let a = PolynomialMatrix::scalar(&[1.0, -0.5]);
        let inv = a.truncated_inverse(4, 0.1).unwrap();
        assert_eq!(inv.inverse.entry_coeffs(0, 0), vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
        assert_eq!(inv.tail_norm, 0.0625);
    }

    #[test]
    fn truncated_inverse_identity_and_nilpotent() {
        let inv = PolynomialMatrix::identity(3).truncated_inverse(5, 1e-8).unwrap();
        assert_eq!(inv.inverse.degree(), 5);
        assert_eq!(inv.inverse.coeff(0), &DMatrix::identity(3, 3));
        for k in 1..=5 {
            assert!(inv.inverse.coeff(k).iter().all(|&v| v == 0.0));
        }

        // hand-run: Q_1 = -A_1, Q_2 = -A_1 Q_1 = A_1^2 = 0
        let a = PolynomialMatrix::new(vec![DMatrix::identity(2, 2), mat(2, 2, &[0.0, 0.0, -0.5, 0.0])]).unwrap();
        let inv = a.truncated_inverse(6, 1e-8).unwrap().inverse;
        assert_eq!(inv.coeff(0), &DMatrix::identity(2, 2));
        assert_eq!(inv.coeff(1), &mat(2, 2, &[0.0, 0.0, 0.5, 0.0]));
        for k in 2..=6 {
            assert!(inv.coeff(k).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn truncated_inverse_errors() {
        let singular = PolynomialMatrix::new(vec![mat(2, 2, &[1.0, 1.0, 1.0, 1.0]), DMatrix::identity(2, 2)]).unwrap();
        assert!(matches!(
            singular.truncated_inverse(8, 1e-8),
            Err(LrdnError::SingularLeadingCoefficient { .. })
        ));
        let unstable = PolynomialMatrix::scalar(&[1.0, -1.1]);
        assert!(matches!(unstable.truncated_inverse(64, 1e-8), Err(LrdnError::NoDecay { .. })));
        let rect = PolynomialMatrix::zeros(2, 3, 0);
        assert!(rect.truncated_inverse(4, 1e-8).is_err());
    }

    #[test]
    fn support_examples() {
        assert!(PolynomialMatrix::zeros(3, 2, 4).support(1e-9).iter().all(|&b| !b));
        let p = PolynomialMatrix::new(vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)]).unwrap();
        let s = p.support(1e-9);
        assert!(s[(0, 0)] && s[(1, 1)] && !s[(0, 1)] && !s[(1, 0)]);

        let mut q = PolynomialMatrix::zeros(2, 2, 3);
        q.coeff_mut(3)[(1, 0)] = 1e-12;
        assert!(!q.support(1e-9)[(1, 0)]);
    }

    #[test]
    fn selector_shift_examples() {
        let m1 = selector_shift(1, 2).unwrap();
        assert_eq!(m1.degree(), 1);
        assert_eq!(m1.coeff(0), &mat(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        assert_eq!(m1.coeff(1), &mat(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let m2 = selector_shift(2, 2).unwrap();
        assert_eq!(m2.coeff(0), &mat(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(m2.coeff(1), &mat(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        assert!(matches!(selector_shift(0, 2), Err(LrdnError::IndexOutOfRange { .. })));
        assert!(matches!(selector_shift(3, 2), Err(LrdnError::IndexOutOfRange { .. })));
    }

    #[test]
    fn selector_shift_is_unitary_on_grid() {
        for l in 1..=4 {
            for i in 1..=l {
                let m = selector_shift(i, l).unwrap();
                for k in 0..8 {
                    let v = m.eval(2.0 * PI * k as f64 / 8.0);
                    let prod = &v * v.adjoint();
                    assert!(close(&prod, &DMatrix::identity(l, l), 1e-15));
                }
            }
        }
    }

    #[test]
    fn selector_stack_rows() {
        let b = selector_stack(&[3, 1], 3).unwrap();
        assert_eq!(b, mat(2, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]));
        assert!(selector_stack(&[4], 3).is_err());
    }

    #[test]
    fn json_layout() {
        let p = PolynomialMatrix::new(vec![mat(1, 2, &[1.0, 2.0]), mat(1, 2, &[3.0, 4.0])]).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v, serde_json::json!({"rows": 1, "cols": 2, "degree": 1, "coeffs": [[[1.0, 2.0]], [[3.0, 4.0]]]}));
        let bad = serde_json::json!({"rows": 1, "cols": 2, "degree": 2, "coeffs": [[[1.0, 2.0]]]});
        assert!(serde_json::from_value::<PolynomialMatrix>(bad).is_err());
    }

    fn arb_poly(rows: usize, cols: usize, max_deg: usize) -> impl Strategy<Value = PolynomialMatrix> {
        (0..=max_deg).prop_flat_map(move |d| {
            proptest::collection::vec(-1.0f64..1.0, rows * cols * (d + 1)).prop_map(move |v| {
                let coeffs = v.chunks(rows * cols).map(|c| DMatrix::from_row_slice(rows, cols, c)).collect();
                PolynomialMatrix::new(coeffs).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn mul_is_associative(a in arb_poly(2, 3, 3), b in arb_poly(3, 2, 3), c in arb_poly(2, 2, 3)) {
            let left = a.mul(&b).unwrap().mul(&c).unwrap();
            let right = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert!(left.max_abs_diff(&right).unwrap() < 1e-12);
        }

        #[test]
        fn eval_is_multiplicative(a in arb_poly(2, 3, 4), b in arb_poly(3, 2, 4), theta in 0.0f64..(2.0 * PI)) {
            let lhs = a.mul(&b).unwrap().eval(theta);
            let rhs = a.eval(theta) * b.eval(theta);
            prop_assert!(close(&lhs, &rhs, 1e-12));
        }

        #[test]
        fn truncated_inverse_inverts(tail in arb_poly(2, 2, 2), h in 8usize..40) {
            // Scale the tail so the filter I + tail is comfortably minimum phase.
            let mut a = tail.scale(0.2);
            *a.coeff_mut(0) = DMatrix::identity(2, 2);
            let inv = a.truncated_inverse(h, 1.0).unwrap().inverse;
            let prod = a.mul(&inv).unwrap();
            for k in 0..=(h - a.degree()) {
                let target = if k == 0 { DMatrix::identity(2, 2) } else { DMatrix::zeros(2, 2) };
                prop_assert!((prod.coeff(k) - target).amax() < 1e-10);
            }
        }
    }
}
