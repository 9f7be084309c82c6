//! Small dense linear algebra: 3x3 matrices, symmetric eigenproblems by
//! cyclic Jacobi, and a pivoted solver for the few tiny systems we need.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matrix3(pub [[f64; 3]; 3]);

impl Default for Matrix3 {
    fn default() -> Self {
        Self::zeros()
    }
}

impl Matrix3 {
    pub const fn zeros() -> Self {
        Matrix3([[0.0; 3]; 3])
    }

    pub const fn identity() -> Self {
        Matrix3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn diag(d: [f64; 3]) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            m.0[i][i] = d[i];
        }
        m
    }

    /// Row-major construction from nine numbers.
    pub fn from_row_slice(v: &[f64]) -> Result<Self> {
        if v.len() != 9 {
            return Err(Error::Invalid(format!("expected 9 entries, got {}", v.len())));
        }
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = v[3 * i + j];
            }
        }
        Ok(m)
    }

    pub fn from_cols(c: [[f64; 3]; 3]) -> Self {
        let mut m = Self::zeros();
        for j in 0..3 {
            for i in 0..3 {
                m.0[i][j] = c[j][i];
            }
        }
        m
    }

    pub fn col(&self, j: usize) -> [f64; 3] {
        [self.0[0][j], self.0[1][j], self.0[2][j]]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|v| *v *= s);
        m
    }

    /// Inverse via the adjugate. `None` when the determinant is exactly zero.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let a = &self.0;
        let mut c = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                // cofactor of (i,j) placed at (j,i)
                c.0[j][i] = (a[i1][j1] * a[i2][j2] - a[i1][j2] * a[i2][j1]) / d;
            }
        }
        Some(c)
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sym_part(&self) -> Self {
        (*self + self.transpose()).scale(0.5)
    }

    pub fn skew_part(&self) -> Self {
        (*self - self.transpose()).scale(0.5)
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = self.0[i][0] * v[0] + self.0[i][1] * v[1] + self.0[i][2] * v[2];
        }
        out
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }
}

impl Add for Matrix3 {
    type Output = Matrix3;
    fn add(self, o: Matrix3) -> Matrix3 {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] += o.0[i][j];
            }
        }
        m
    }
}

impl Sub for Matrix3 {
    type Output = Matrix3;
    fn sub(self, o: Matrix3) -> Matrix3 {
        self + (-o)
    }
}

impl Neg for Matrix3 {
    type Output = Matrix3;
    fn neg(self) -> Matrix3 {
        self.scale(-1.0)
    }
}

impl Mul for Matrix3 {
    type Output = Matrix3;
    fn mul(self, o: Matrix3) -> Matrix3 {
        let mut m = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        m
    }
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Descending eigenvalues and a frame `q` in SO(3) whose columns are the
/// matching eigenvectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymSpectrum {
    pub mu: [f64; 3],
    pub q: Matrix3,
}

impl SymSpectrum {
    pub fn reconstruct(&self) -> Matrix3 {
        self.q * Matrix3::diag(self.mu) * self.q.transpose()
    }
}

pub fn sym_eigen(s: &Matrix3) -> Result<SymSpectrum> {
    let asym = (*s - s.transpose()).max_abs();
    if asym > 1e-10 * s.max_abs() {
        return Err(Error::Asymmetric(asym));
    }
    let a: Vec<Vec<f64>> = s.sym_part().0.iter().map(|r| r.to_vec()).collect();
    let (vals, vecs) = jacobi_eigen(a);
    let mut q = Matrix3::from_cols([
        [vecs[0][0], vecs[1][0], vecs[2][0]],
        [vecs[0][1], vecs[1][1], vecs[2][1]],
        [vecs[0][2], vecs[1][2], vecs[2][2]],
    ]);
    if q.det() < 0.0 {
        for i in 0..3 {
            q.0[i][2] = -q.0[i][2];
        }
    }
    Ok(SymSpectrum { mu: [vals[0], vals[1], vals[2]], q })
}

/// Cyclic Jacobi for a symmetric n x n matrix. Returns eigenvalues in
/// descending order and the eigenvector matrix (columns), in that order.
/// Sweep order is fixed so repeated eigenvalues give a reproducible frame.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= 1e-32 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    // stable sort keeps sweep order among ties
    idx.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = idx.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n).map(|r| idx.iter().map(|&i| v[r][i]).collect()).collect();
    (vals, vecs)
}

/// Gaussian elimination with partial pivoting. `None` if singular.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())?;
        if a[piv][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in (k + 1)..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}
