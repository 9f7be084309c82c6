//! Harmonic extensions attached to a point `p` of the open ball.
//!
//! `alpha_{p,i}` is the harmonic function on `B^4` with boundary values
//! `(y_i - p_i)/|y - p|^4`. Closed form (image point `p* = p/|p|^2`):
//!
//! ```text
//! alpha_i = -p_i/(|p|^4 |x-p*|^2) + (x_i-p*_i)/(|p|^4 |x-p*|^4)
//!           - 2 p_i p.(x-p*)/(|p|^6 |x-p*|^4)
//! ```
//!
//! Each term blows up as `p -> 0` while the sum stays bounded. Below
//! [`P_MIN`] the regrouped form `(x_i - p_i|x|^2)/s^2` with
//! `s = 1 - 2x.p + |p|^2|x|^2 = |p|^2|x-p*|^2` is used instead.

use std::f64::consts::PI;

use crate::linalg::Matrix3;
use crate::quadrature::{integrate_s3_adaptive, IntegralResult};
use crate::{dot4, norm4, Error, Point4, Result};

pub const P_MIN: f64 = 1e-3;

/// Entry `(l, k)` is the `w_k` coefficient of `(dh_{p,l})^-`.
pub type DhMatrix = Matrix3;

#[derive(Clone, Copy, Debug)]
pub struct AlphaField {
    p: Point4,
    pn2: f64,
    pstar: Point4,
    regrouped: bool,
}

impl AlphaField {
    pub fn new(p: &Point4) -> Result<Self> {
        Self::with_cutoff(p, true)
    }

    /// With `allow_regrouped = false`, points below the cutoff are rejected
    /// instead of switching branches.
    pub fn with_cutoff(p: &Point4, allow_regrouped: bool) -> Result<Self> {
        let n = norm4(p);
        if !(n < 1.0) {
            return Err(Error::OutsideBall(*p, n));
        }
        let regrouped = n < P_MIN;
        if regrouped && !allow_regrouped {
            return Err(Error::BelowCutoff(n));
        }
        let pn2 = n * n;
        let pstar = if regrouped { [0.0; 4] } else { p.map(|v| v / pn2) };
        Ok(AlphaField { p: *p, pn2, pstar, regrouped })
    }

    /// Same field, but always through the three-term image formula.
    /// Only meaningful for `p != 0`; used to compare branches.
    pub fn image_branch(p: &Point4) -> Result<Self> {
        let mut a = Self::new(p)?;
        if a.pn2 == 0.0 {
            return Err(Error::BelowCutoff(0.0));
        }
        a.regrouped = false;
        a.pstar = p.map(|v| v / a.pn2);
        Ok(a)
    }

    pub fn p(&self) -> &Point4 {
        &self.p
    }

    pub fn values(&self, x: &Point4) -> [f64; 4] {
        let p = &self.p;
        if self.regrouped {
            let x2 = dot4(x, x);
            let s = 1.0 - 2.0 * dot4(x, p) + self.pn2 * x2;
            let s2 = s * s;
            return std::array::from_fn(|i| (x[i] - p[i] * x2) / s2);
        }
        let pn4 = self.pn2 * self.pn2;
        let pn6 = pn4 * self.pn2;
        let z: Point4 = std::array::from_fn(|i| x[i] - self.pstar[i]);
        let z2 = dot4(&z, &z);
        let z4 = z2 * z2;
        let pz = dot4(p, &z);
        std::array::from_fn(|i| -p[i] / (pn4 * z2) + z[i] / (pn4 * z4) - 2.0 * p[i] * pz / (pn6 * z4))
    }

    /// `g[i][j] = d alpha_i / d x_j`.
    pub fn grad(&self, x: &Point4) -> [[f64; 4]; 4] {
        let p = &self.p;
        let mut g = [[0.0; 4]; 4];
        if self.regrouped {
            let x2 = dot4(x, x);
            let s = 1.0 - 2.0 * dot4(x, p) + self.pn2 * x2;
            let s2 = s * s;
            let s3 = s2 * s;
            for i in 0..4 {
                let ni = x[i] - p[i] * x2;
                for j in 0..4 {
                    let d = if i == j { 1.0 } else { 0.0 };
                    g[i][j] = (d - 2.0 * p[i] * x[j]) / s2 - 2.0 * ni * (-2.0 * p[j] + 2.0 * self.pn2 * x[j]) / s3;
                }
            }
            return g;
        }
        let pn4 = self.pn2 * self.pn2;
        let pn6 = pn4 * self.pn2;
        let z: Point4 = std::array::from_fn(|i| x[i] - self.pstar[i]);
        let z2 = dot4(&z, &z);
        let z4 = z2 * z2;
        let z6 = z4 * z2;
        let pz = dot4(p, &z);
        for i in 0..4 {
            for j in 0..4 {
                let d = if i == j { 1.0 } else { 0.0 };
                g[i][j] = 2.0 * p[i] * z[j] / (pn4 * z4) + d / (pn4 * z4)
                    - 4.0 * z[i] * z[j] / (pn4 * z6)
                    - 2.0 * p[i] * p[j] / (pn6 * z4)
                    + 8.0 * p[i] * z[j] * pz / (pn6 * z6);
            }
        }
        g
    }

    /// The three 1-forms `h_{p,l}`, coefficients of `dx^1..dx^4`.
    pub fn h(&self, x: &Point4) -> [[f64; 4]; 3] {
        h_from_alpha(&self.values(x))
    }

    pub fn dh(&self, x: &Point4) -> DhMatrix {
        dh_from_grad(&self.grad(x))
    }
}

/// `h1 = -a2 dx1 + a1 dx2 + a4 dx3 - a3 dx4`, `h2 = -a3 dx1 - a4 dx2 + a1 dx3
/// + a2 dx4`, `h3 = -a4 dx1 + a3 dx2 - a2 dx3 + a1 dx4`.
pub fn h_from_alpha(a: &[f64; 4]) -> [[f64; 4]; 3] {
    [
        [-a[1], a[0], a[3], -a[2]],
        [-a[2], -a[3], a[0], a[1]],
        [-a[3], a[2], -a[1], a[0]],
    ]
}

pub fn dh_from_grad(g: &[[f64; 4]; 4]) -> DhMatrix {
    let h0 = 0.5 * (g[0][0] + g[1][1] + g[2][2] + g[3][3]);
    let a = 0.5 * (-g[0][3] + g[1][2] - g[2][1] + g[3][0]);
    let b = 0.5 * (g[0][2] + g[1][3] - g[2][0] - g[3][1]);
    let c = 0.5 * (-g[0][1] + g[1][0] + g[2][3] - g[3][2]);
    Matrix3([[h0, a, b], [-a, h0, c], [-b, -c, h0]])
}

fn check_i(i: usize) -> Result<usize> {
    if (1..=4).contains(&i) {
        Ok(i - 1)
    } else {
        Err(Error::Index(i))
    }
}

fn check_x(x: &Point4) -> Result<()> {
    let n = norm4(x);
    if n > 1.0 + 1e-12 {
        return Err(Error::OutsideBall(*x, n));
    }
    Ok(())
}

/// `alpha_{p,i}(x)`, `i` in `1..=4`.
pub fn alpha_closed(p: &Point4, i: usize, x: &Point4) -> Result<f64> {
    let k = check_i(i)?;
    check_x(x)?;
    Ok(AlphaField::new(p)?.values(x)[k])
}

pub fn alpha_grad(p: &Point4, i: usize, x: &Point4) -> Result<[f64; 4]> {
    let k = check_i(i)?;
    check_x(x)?;
    Ok(AlphaField::new(p)?.grad(x)[k])
}

pub fn h_oneforms(p: &Point4, x: &Point4) -> Result<[[f64; 4]; 3]> {
    check_x(x)?;
    Ok(AlphaField::new(p)?.h(x))
}

pub fn dh_asd(p: &Point4, x: &Point4) -> Result<DhMatrix> {
    check_x(x)?;
    Ok(AlphaField::new(p)?.dh(x))
}

/// Boundary data of `alpha_{p,i}`.
pub fn alpha_boundary(p: &Point4, i: usize, y: &Point4) -> f64 {
    let d: Point4 = std::array::from_fn(|k| y[k] - p[k]);
    let r2 = dot4(&d, &d);
    d[i - 1] / (r2 * r2)
}

/// Poisson representation
/// `(1-|x|^2)/(2 pi^2) * int_{S^3} (y_i-p_i)/(|x-y|^4 |y-p|^4) dy`,
/// evaluated by adaptive cubature. Independent of the closed form.
pub fn alpha_poisson(p: &Point4, i: usize, x: &Point4, rel_tol: f64) -> Result<IntegralResult> {
    check_i(i)?;
    let nx = norm4(x);
    if nx >= 0.97 {
        return Err(Error::Invalid(format!("Poisson kernel too singular at |x| = {nx}")));
    }
    let np = norm4(p);
    if np >= 1.0 {
        return Err(Error::OutsideBall(*p, np));
    }
    let pref = (1.0 - nx * nx) / (2.0 * PI * PI);
    let f = |y: &Point4| {
        let dx: Point4 = std::array::from_fn(|k| x[k] - y[k]);
        let kx = dot4(&dx, &dx);
        pref / (kx * kx) * alpha_boundary(p, i, y)
    };
    // absolute floor: the integrand scale is |y-p|^-3 at worst
    let abs_tol = rel_tol * 1e-3 / (1.0 - np).powi(3);
    integrate_s3_adaptive(f, rel_tol, abs_tol, 400_000)
}

/// Five-point-per-axis central FD Laplacian with step `h`.
pub fn laplacian_fd(f: impl Fn(&Point4) -> f64, x: &Point4, h: f64) -> f64 {
    let f0 = f(x);
    let mut s = 0.0;
    for k in 0..4 {
        let mut a = *x;
        let mut b = *x;
        a[k] += h;
        b[k] -= h;
        s += f(&a) + f(&b) - 2.0 * f0;
    }
    s / (h * h)
}

/// Laplacian divided by the field magnitude on the stencil (floored at 1).
pub fn scaled_laplacian_fd(f: impl Fn(&Point4) -> f64, x: &Point4, h: f64) -> f64 {
    let mut m: f64 = f(x).abs();
    for k in 0..4 {
        for s in [-h, h] {
            let mut y = *x;
            y[k] += s;
            m = m.max(f(&y).abs());
        }
    }
    laplacian_fd(&f, x, h).abs() / m.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{asd_project, TwoForm};

    #[test]
    fn p_zero_limit() {
        let x = [0.3, 0.0, 0.0, 0.0];
        assert!((alpha_closed(&[0.0; 4], 1, &x).unwrap() - 0.3).abs() < 1e-15);
        let g = AlphaField::new(&[0.0; 4]).unwrap().grad(&[0.1, -0.2, 0.3, 0.05]);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        let d = dh_asd(&[0.0; 4], &[0.2, 0.1, 0.0, -0.4]).unwrap();
        assert!((d - Matrix3::identity().scale(2.0)).max_abs() < 1e-15);
    }

    #[test]
    fn boundary_trace() {
        let p = [0.2, 0.0, 0.0, 0.0];
        let a = AlphaField::new(&p).unwrap();
        for y in [[0.0, 1.0, 0.0, 0.0], [0.5, 0.5, 0.5, 0.5], [-0.6, 0.0, 0.8, 0.0]] {
            let v = a.values(&y);
            for i in 0..4 {
                assert!((v[i] - alpha_boundary(&p, i + 1, &y)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn branches_agree_near_cutoff() {
        let p = [1.5e-3, -0.7e-3, 0.2e-3, 0.9e-3];
        let x = [0.4, 0.1, -0.3, 0.2];
        let a = AlphaField::new(&p).unwrap();
        let mut b = a;
        b.regrouped = true;
        let (va, vb) = (a.values(&x), b.values(&x));
        let (ga, gb) = (a.grad(&x), b.grad(&x));
        for i in 0..4 {
            assert!((va[i] - vb[i]).abs() < 1e-9);
            for j in 0..4 {
                assert!((ga[i][j] - gb[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn grad_matches_fd() {
        let p = [0.3, -0.2, 0.5, 0.1];
        let a = AlphaField::new(&p).unwrap();
        let x = [0.1, 0.4, -0.2, 0.3];
        let g = a.grad(&x);
        let h = 1e-5;
        for j in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (vp, vm) = (a.values(&xp), a.values(&xm));
            for i in 0..4 {
                let fd = (vp[i] - vm[i]) / (2.0 * h);
                assert!((fd - g[i][j]).abs() <= 1e-6 * g[i][j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn dh_matches_projection_of_exterior_derivative() {
        let p = [-0.4, 0.3, 0.2, 0.6];
        let a = AlphaField::new(&p).unwrap();
        let x = [0.2, -0.1, 0.5, 0.3];
        let g = a.grad(&x);
        // Jacobian of h_l from the Jacobian of alpha, column by column
        let mut jac = [[[0.0; 4]; 4]; 3];
        for c in 0..4 {
            let col = [g[0][c], g[1][c], g[2][c], g[3][c]];
            let hc = h_from_alpha(&col);
            for l in 0..3 {
                for b in 0..4 {
                    jac[l][b][c] = hc[l][b];
                }
            }
        }
        let d = a.dh(&x);
        for l in 0..3 {
            let c = asd_project(&TwoForm::d_of_oneform(&jac[l]));
            for k in 0..3 {
                assert!((c.0[k] - d.0[l][k]).abs() < 1e-12 * d.max_abs());
            }
        }
    }

    #[test]
    fn poisson_oracle_axis() {
        let p = [0.0, 0.0, 0.0, 0.5];
        let x = [0.0; 4];
        let r = alpha_poisson(&p, 4, &x, 1e-10).unwrap();
        let c = alpha_closed(&p, 4, &x).unwrap();
        assert!((r.value - c).abs() < 1e-7 * c.abs().max(1.0), "{} vs {c}", r.value);
        let z = alpha_poisson(&[0.0; 4], 1, &x, 1e-10).unwrap();
        assert!(z.value.abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(alpha_closed(&[1.0, 0.0, 0.0, 0.0], 1, &[0.0; 4]).is_err());
        assert!(alpha_closed(&[0.1, 0.0, 0.0, 0.0], 5, &[0.0; 4]).is_err());
        assert!(AlphaField::with_cutoff(&[1e-4, 0.0, 0.0, 0.0], false).is_err());
    }
}
