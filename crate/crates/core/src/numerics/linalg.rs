//! Small dense linear algebra: symmetric positive definite matrices,
//! Cholesky factors, extreme eigenvalues by cyclic Jacobi.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = *d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            check_dim(ncols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim(self.cols, other.rows)?;
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, x.len())?;
        Ok(self
            .data
            .chunks(self.cols.max(1))
            .take(self.rows)
            .map(|row| dot(row, x))
            .collect())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)?;
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.add(&other.scaled(-1.0))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `(M + M^T) / 2`; only meaningful for square matrices.
    pub fn symmetrized(&self) -> DenseMatrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, avg);
                out.set(j, i, avg);
            }
        }
        out
    }
}

impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        DenseMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Extreme eigenvalues of a symmetric positive definite matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRange {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// A validated symmetric positive definite matrix with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    matrix: DenseMatrix,
    /// Lower-triangular factor, row-major.
    chol: DenseMatrix,
    is_identity: bool,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl SpdMatrix {
    /// Validates symmetry (relative to the largest entry) and then positive
    /// definiteness through Cholesky.
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        check_dim(matrix.rows(), matrix.cols())?;
        if matrix.rows() == 0 {
            return Err(Error::domain("SPD matrix must have dimension >= 1"));
        }
        if matrix.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("SPD matrix has non-finite entries"));
        }
        let scale = matrix.max_abs();
        let p = matrix.rows();
        for i in 0..p {
            for j in (i + 1)..p {
                let diff = (matrix.get(i, j) - matrix.get(j, i)).abs();
                if diff > SYMMETRY_TOL * scale {
                    return Err(Error::Asymmetric { row: i, col: j, diff });
                }
            }
        }
        let matrix = matrix.symmetrized();
        let chol = cholesky(&matrix)?;
        let is_identity = matrix == DenseMatrix::identity(p);
        Ok(Self {
            matrix,
            chol,
            is_identity,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(rows)?)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DenseMatrix::identity(dim),
            chol: DenseMatrix::identity(dim),
            is_identity: true,
        }
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DenseMatrix::from_diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_identity(&self) -> bool {
        self.is_identity
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix.get(row, col)
    }

    pub fn cholesky(&self) -> &DenseMatrix {
        &self.chol
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.matrix.scaled(factor))
    }

    /// `x^T M x`, computed as `|L^T x|^2` so the result is never negative.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        if self.is_identity {
            return Ok(dot(x, x));
        }
        let p = self.dim();
        let mut total = 0.0;
        for j in 0..p {
            // (L^T x)_j = sum_{i >= j} L[i][j] x_i
            let s: f64 = (j..p).map(|i| self.chol.get(i, j) * x[i]).sum();
            total += s * s;
        }
        Ok(total)
    }

    /// `L z` for the Cholesky factor `L`.
    pub fn factor_mul(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), z.len())?;
        if self.is_identity {
            return Ok(z.to_vec());
        }
        let p = self.dim();
        Ok((0..p)
            .map(|i| (0..=i).map(|j| self.chol.get(i, j) * z[j]).sum())
            .collect())
    }

    /// Solves `L y = b` by forward substitution.
    pub fn factor_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), b.len())?;
        let p = self.dim();
        let mut y = vec![0.0; p];
        for i in 0..p {
            let s: f64 = (0..i).map(|j| self.chol.get(i, j) * y[j]).sum();
            y[i] = (b[i] - s) / self.chol.get(i, i);
        }
        Ok(y)
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let y = self.factor_solve(b)?;
        let p = self.dim();
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let s: f64 = ((i + 1)..p).map(|j| self.chol.get(j, i) * x[j]).sum();
            x[i] = (y[i] - s) / self.chol.get(i, i);
        }
        Ok(x)
    }

    /// Inverse with one step of iterative refinement.
    pub fn inverse(&self) -> DenseMatrix {
        let p = self.dim();
        let mut inv = DenseMatrix::zeros(p, p);
        let mut e = vec![0.0; p];
        for j in 0..p {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e).expect("dimension checked");
            for (i, v) in col.into_iter().enumerate() {
                inv.set(i, j, v);
            }
        }
        // X <- X + X (I - M X)
        let residual = DenseMatrix::identity(p)
            .sub(&self.matrix.matmul(&inv).expect("square"))
            .expect("square");
        let correction = inv.matmul(&residual).expect("square");
        inv.add(&correction).expect("square").symmetrized()
    }

    pub fn eigen_range(&self) -> EigenRange {
        if self.is_identity {
            return EigenRange {
                lambda_min: 1.0,
                lambda_max: 1.0,
            };
        }
        let eig = jacobi_eigenvalues(&self.matrix);
        let lambda_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let lambda_max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        EigenRange {
            lambda_min,
            lambda_max,
        }
    }
}

impl Serialize for SpdMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.matrix.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpdMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let m = DenseMatrix::deserialize(deserializer)?;
        SpdMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

fn cholesky(m: &DenseMatrix) -> Result<DenseMatrix> {
    let p = m.rows();
    let mut l = DenseMatrix::zeros(p, p);
    for j in 0..p {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in (j + 1)..p {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below
/// `1e-12 * |M|_F`.
pub fn jacobi_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    let p = m.rows();
    let mut a = m.symmetrized();
    let target = JACOBI_TOL * m.frobenius_norm();
    let off = |a: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    s += a.get(i, j) * a.get(i, j);
                }
            }
        }
        s.sqrt()
    };
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= target {
            break;
        }
        for r in 0..p {
            for q in (r + 1)..p {
                let arq = a.get(r, q);
                if arq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(r, r)) / (2.0 * arq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..p {
                    let akr = a.get(k, r);
                    let akq = a.get(k, q);
                    a.set(k, r, c * akr - s * akq);
                    a.set(k, q, s * akr + c * akq);
                }
                for k in 0..p {
                    let ark = a.get(r, k);
                    let aqk = a.get(q, k);
                    a.set(r, k, c * ark - s * aqk);
                    a.set(q, k, s * ark + c * aqk);
                }
            }
        }
    }
    a.diagonal()
}

/// Free-function form of [`SpdMatrix::eigen_range`].
pub fn eigen_range(m: &SpdMatrix) -> EigenRange {
    m.eigen_range()
}

/// Free-function form of [`SpdMatrix::cholesky`].
pub fn cholesky_factor(m: &SpdMatrix) -> DenseMatrix {
    m.cholesky().clone()
}

/// Free-function form of [`SpdMatrix::quadratic_form`].
pub fn quadratic_form(x: &[f64], m: &SpdMatrix) -> Result<f64> {
    m.quadratic_form(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_range_examples() {
        assert_eq!(
            SpdMatrix::identity(7).eigen_range(),
            EigenRange { lambda_min: 1.0, lambda_max: 1.0 }
        );
        let d = SpdMatrix::diagonal(&[0.25, 4.0]).unwrap().eigen_range();
        assert_eq!((d.lambda_min, d.lambda_max), (0.25, 4.0));
        let m = SpdMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let r = m.eigen_range();
        assert!((r.lambda_min - 1.0).abs() < 1e-12 && (r.lambda_max - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_matches_characteristic_polynomial_3x3() {
        // Tridiagonal [2 -1 0; -1 2 -1; 0 -1 2] has eigenvalues 2 - sqrt2, 2, 2 + sqrt2.
        let m = SpdMatrix::from_rows(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
        .unwrap();
        let r = m.eigen_range();
        let s2 = std::f64::consts::SQRT_2;
        assert!(((r.lambda_min - (2.0 - s2)) / (2.0 - s2)).abs() < 1e-10);
        assert!(((r.lambda_max - (2.0 + s2)) / (2.0 + s2)).abs() < 1e-10);
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(cholesky_factor(&SpdMatrix::identity(3)), DenseMatrix::identity(3));
        let d = SpdMatrix::diagonal(&[4.0, 9.0]).unwrap();
        assert_eq!(cholesky_factor(&d), DenseMatrix::from_diagonal(&[2.0, 3.0]));
        let m = SpdMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let l = cholesky_factor(&m);
        assert_eq!(l.to_rows(), vec![vec![2.0, 0.0], vec![1.0, 2.0]]);
        let llt = l.matmul(&l.transpose()).unwrap();
        assert!(llt.sub(m.matrix()).unwrap().max_abs() <= 1e-10 * m.matrix().max_abs());
    }

    #[test]
    fn validation_names_failing_condition() {
        let asym = SpdMatrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 2.0]]);
        assert!(matches!(asym, Err(Error::Asymmetric { row: 0, col: 1, .. })));
        let indefinite = SpdMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(indefinite, Err(Error::NotPositiveDefinite { index: 1, .. })));
        let zero = SpdMatrix::diagonal(&[1.0, 0.0]);
        assert!(matches!(zero, Err(Error::NotPositiveDefinite { index: 1, .. })));
        assert!(matches!(
            SpdMatrix::from_rows(&[vec![1.0, 0.0]]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn quadratic_form_examples() {
        let i2 = SpdMatrix::identity(2);
        assert_eq!(quadratic_form(&[1.0, 0.0], &i2).unwrap(), 1.0);
        let m = SpdMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((quadratic_form(&[1.0, 1.0], &m).unwrap() - 6.0).abs() < 1e-14);
        assert_eq!(quadratic_form(&[0.0, 0.0], &m).unwrap(), 0.0);
        assert!(matches!(quadratic_form(&[1.0], &m), Err(Error::Shape { expected: 2, got: 1 })));
    }

    #[test]
    fn solve_and_inverse() {
        let m = SpdMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let x = m.solve(&[6.0, 7.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let inv = m.inverse();
        let prod = m.matrix().matmul(&inv).unwrap();
        assert!(prod.sub(&DenseMatrix::identity(2)).unwrap().max_abs() < 1e-15);
    }
}
