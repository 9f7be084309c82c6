//! Rotations and the Lie algebra so(3) in the basis
//! `xi1 = e32 - e23`, `xi2 = e13 - e31`, `xi3 = e21 - e12`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix3;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct So3Vector(pub [f64; 3]);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rotation(Matrix3);

impl So3Vector {
    pub fn hat(&self) -> Matrix3 {
        let [a, b, c] = self.0;
        Matrix3([[0.0, -c, b], [c, 0.0, -a], [-b, a, 0.0]])
    }

    /// Coefficients of the antisymmetric part of `m`.
    pub fn vee(m: &Matrix3) -> Self {
        let k = m.skew_part();
        So3Vector([k.0[2][1], k.0[0][2], k.0[1][0]])
    }

    pub fn norm(&self) -> f64 {
        (self.0[0].powi(2) + self.0[1].powi(2) + self.0[2].powi(2)).sqrt()
    }

    pub fn basis(i: usize) -> Self {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        So3Vector(v)
    }
}

/// Rodrigues formula.
pub fn so3_exp(xi: &So3Vector) -> Rotation {
    let t = xi.norm();
    let k = xi.hat();
    let (a, b) = if t < 1e-6 {
        let t2 = t * t;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (t.sin() / t, (1.0 - t.cos()) / (t * t))
    };
    Rotation(Matrix3::identity() + k.scale(a) + (k * k).scale(b))
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Accepts `m` if it is orthogonal with unit determinant to `tol`.
    pub fn new(m: Matrix3, tol: f64) -> Result<Self> {
        let orth = (m.transpose() * m - Matrix3::identity()).max_abs();
        let d = m.det();
        if orth > tol || (d - 1.0).abs() > tol {
            return Err(Error::Invalid(format!(
                "not a rotation: |RtR - I| = {orth:e}, det = {d}"
            )));
        }
        Ok(Rotation(m))
    }

    /// Nearest rotation by re-orthogonalising the columns (Gram-Schmidt,
    /// third column as a cross product). For inputs already close to SO(3).
    pub fn project(m: Matrix3) -> Self {
        let c0 = m.col(0);
        let n0 = crate::linalg::dot3(c0, c0).sqrt();
        let u0 = [c0[0] / n0, c0[1] / n0, c0[2] / n0];
        let c1 = m.col(1);
        let p = crate::linalg::dot3(u0, c1);
        let w = [c1[0] - p * u0[0], c1[1] - p * u0[1], c1[2] - p * u0[2]];
        let n1 = crate::linalg::dot3(w, w).sqrt();
        let u1 = [w[0] / n1, w[1] / n1, w[2] / n1];
        let u2 = crate::linalg::cross(u0, u1);
        Rotation(Matrix3::from_cols([u0, u1, u2]))
    }

    pub fn matrix(&self) -> &Matrix3 {
        &self.0
    }

    pub fn compose(&self, o: &Rotation) -> Rotation {
        Rotation(self.0 * o.0)
    }

    pub fn inverse(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// `exp(xi) R`.
    pub fn perturb(&self, xi: &So3Vector) -> Rotation {
        so3_exp(xi).compose(self)
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let s = So3Vector::vee(&self.0).norm();
        let c = 0.5 * (self.0.trace() - 1.0);
        s.atan2(c)
    }

    pub fn geodesic_distance(&self, o: &Rotation) -> f64 {
        self.inverse().compose(o).angle()
    }

    /// Haar-uniform sample via a normalised Gaussian quaternion.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
        let mut q = [0.0f64; 4];
        let mut n = 0.0;
        while n < 1e-12 {
            for v in q.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
        let [w, x, y, z] = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        Rotation(Matrix3([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn exp_zero_and_pi() {
        assert_eq!(*so3_exp(&So3Vector::default()).matrix(), Matrix3::identity());
        let r = so3_exp(&So3Vector([0.0, 0.0, std::f64::consts::PI]));
        let want = Matrix3::diag([-1.0, -1.0, 1.0]);
        assert!((*r.matrix() - want).max_abs() < 1e-15);
    }

    #[test]
    fn exp_inverse_and_orthogonal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v: [f64; 3] = [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)];
            let xi = So3Vector(v);
            let r = so3_exp(&xi);
            let back = so3_exp(&So3Vector([-v[0], -v[1], -v[2]]));
            assert!((*r.compose(&back).matrix() - Matrix3::identity()).max_abs() < 1e-12);
            assert!((r.matrix().det() - 1.0).abs() < 1e-12);
            assert!((r.angle() - xi.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn hat_vee() {
        let v = So3Vector([0.3, -1.0, 2.0]);
        assert_eq!(So3Vector::vee(&v.hat()), v);
        assert_eq!(So3Vector::basis(0).hat().0, [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]);
    }

    #[test]
    fn random_is_rotation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let r = Rotation::random(&mut rng);
            assert!(Rotation::new(*r.matrix(), 1e-12).is_ok());
        }
    }
}
