//! 2-forms on R^4 and their anti-self-dual part.
//!
//! A [`TwoForm`] stores coefficients of `dx^i ^ dx^j` for `i < j` in the
//! order 12, 13, 14, 23, 24, 34. These six are orthonormal, so the ASD basis
//! `w1 = dx12 - dx34`, `w2 = dx13 + dx24`, `w3 = dx14 - dx23` has
//! `(w_a, w_b) = 2 delta_ab`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwoForm(pub [f64; 6]);

/// Coordinates in the basis `w1, w2, w3`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AsdCoeffs(pub [f64; 3]);

pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

impl TwoForm {
    /// Antisymmetric component `w_ab` for any `a, b` in `0..4`.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        let (i, j, s) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let k = PAIRS.iter().position(|&pr| pr == (i, j)).unwrap();
        s * self.0[k]
    }

    pub fn from_matrix(w: &[[f64; 4]; 4]) -> Self {
        let mut out = [0.0; 6];
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            out[k] = w[i][j];
        }
        TwoForm(out)
    }

    pub fn hodge_star(&self) -> Self {
        let [w12, w13, w14, w23, w24, w34] = self.0;
        TwoForm([w34, -w24, w23, w14, -w13, w12])
    }

    pub fn dot(&self, o: &TwoForm) -> f64 {
        self.0.iter().zip(o.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// `d(sum_b f_b dx^b)` from the Jacobian `grad[b][a] = d f_b / d x_a`.
    pub fn d_of_oneform(grad: &[[f64; 4]; 4]) -> Self {
        let mut out = [0.0; 6];
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            out[k] = grad[b][a] - grad[a][b];
        }
        TwoForm(out)
    }
}

impl AsdCoeffs {
    pub fn to_two_form(&self) -> TwoForm {
        let [c1, c2, c3] = self.0;
        TwoForm([c1, c2, c3, -c3, c2, -c1])
    }

    pub fn norm_sq(&self) -> f64 {
        2.0 * (self.0[0] * self.0[0] + self.0[1] * self.0[1] + self.0[2] * self.0[2])
    }
}

/// Coefficients of `(w - *w)/2` in the `w_k` basis.
pub fn asd_project(w: &TwoForm) -> AsdCoeffs {
    let [w12, w13, w14, w23, w24, w34] = w.0;
    AsdCoeffs([0.5 * (w12 - w34), 0.5 * (w13 + w24), 0.5 * (w14 - w23)])
}

pub fn asd_basis(k: usize) -> TwoForm {
    let mut c = [0.0; 3];
    c[k] = 1.0;
    AsdCoeffs(c).to_two_form()
}

/// Coefficients of the 1-form `beta_k` at `x` (k = 1, 2, 3):
/// `x1 dx2 - x3 dx4`, `x1 dx3 + x2 dx4`, `-x2 dx3 + x1 dx4`.
pub fn beta(k: usize, x: &[f64; 4]) -> Result<[f64; 4]> {
    match k {
        1 => Ok([0.0, x[0], 0.0, -x[2]]),
        2 => Ok([0.0, 0.0, x[0], x[1]]),
        3 => Ok([0.0, 0.0, -x[1], x[0]]),
        _ => Err(Error::Index(k)),
    }
}

/// `d beta_k` in ASD coordinates; the k-th basis vector.
pub fn exterior_derivative_beta(k: usize) -> Result<AsdCoeffs> {
    let mut grad = [[0.0; 4]; 4];
    let e = |i: usize| {
        let mut x = [0.0; 4];
        x[i] = 1.0;
        x
    };
    beta(k, &[0.0; 4])?;
    for a in 0..4 {
        let col = beta(k, &e(a))?;
        for b in 0..4 {
            grad[b][a] = col[b];
        }
    }
    Ok(asd_project(&TwoForm::d_of_oneform(&grad)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures() {
        let dx12 = TwoForm([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(asd_project(&dx12).0, [0.5, 0.0, 0.0]);
        assert_eq!(asd_project(&asd_basis(1)).0, [0.0, 1.0, 0.0]);
        let sd = TwoForm([1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(asd_project(&sd).0, [0.0; 3]);
    }

    #[test]
    fn basis_is_asd_and_orthogonal() {
        for a in 0..3 {
            let w = asd_basis(a);
            let s = w.hodge_star();
            for k in 0..6 {
                assert_eq!(s.0[k], -w.0[k]);
            }
            for b in 0..3 {
                let want = if a == b { 2.0 } else { 0.0 };
                assert_eq!(w.dot(&asd_basis(b)), want);
            }
        }
    }

    #[test]
    fn beta_derivatives() {
        for k in 1..=3 {
            let mut want = [0.0; 3];
            want[k - 1] = 1.0;
            assert_eq!(exterior_derivative_beta(k).unwrap().0, want);
        }
        assert!(exterior_derivative_beta(4).is_err());
        assert!(exterior_derivative_beta(0).is_err());
    }
}
