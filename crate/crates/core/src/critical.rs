//! Critical points of `tau_M(R) = Tr(R M)` on SO(3).
//!
//! `R0` is critical iff `R0 M` is symmetric. Writing `B = R0 M`, one has
//! `B^2 = M^t M` and `det B = det M`, so with `M^t M = Q diag(mu) Q^t` the
//! critical points are `B = Q diag(s_i sqrt(mu_i)) Q^t`, `R0 = B M^{-1}`,
//! over sign patterns with `s1 s2 s3 = sign det M`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::landscape::{det_is_zero, sqrt_mu, TOL_MU};
use crate::linalg::{cross, solve, sym_eigen, Matrix3};
use crate::so3::{Rotation, So3Vector};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalRotation {
    pub r0: Rotation,
    pub b: Matrix3,
    pub signs: [i8; 3],
    /// `(lambda_1, lambda_2, lambda_3)`, the eigenvalues of `B` in `frame`.
    pub lambda: [f64; 3],
    /// Columns diagonalise `B`.
    pub frame: Matrix3,
    pub value: f64,
    /// `None` at degenerate points.
    pub morse_index: Option<u8>,
    pub degenerate: bool,
    pub hessian_diag: [f64; 3],
}

const DET_POS: [[i8; 3]; 4] = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]];
const DET_NEG: [[i8; 3]; 4] = [[1, 1, -1], [1, -1, 1], [-1, 1, 1], [-1, -1, -1]];

fn classify(lambda: [f64; 3], mu: [f64; 3], signs: [i8; 3]) -> (Option<u8>, bool, [f64; 3]) {
    let tol = TOL_MU * mu[0].max(0.0);
    let hess = [-lambda[1] - lambda[2], -lambda[0] - lambda[2], -lambda[0] - lambda[1]];
    let mut degenerate = false;
    let mut index = 0u8;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let zero_i = mu[i] <= tol;
        let zero_j = mu[j] <= tol;
        let opposite = signs[i] != signs[j] || zero_i || zero_j;
        if opposite && (mu[i] - mu[j]).abs() <= tol {
            degenerate = true;
        } else if lambda[i] + lambda[j] > 0.0 {
            index += 1;
        }
    }
    (if degenerate { None } else { Some(index) }, degenerate, hess)
}

/// All critical points, sorted by value descending.
pub fn enumerate_critical(m: &Matrix3) -> Result<Vec<CriticalRotation>> {
    let spec = sym_eigen(&(m.transpose() * *m))?;
    let mu = spec.mu;
    let sm = sqrt_mu(&mu);
    let mut out = Vec::with_capacity(4);
    if det_is_zero(m) {
        out = svd_route(m)?;
    } else {
        let minv = m.inverse().ok_or_else(|| Error::Hypothesis("M not invertible".into()))?;
        let patterns = if m.det() > 0.0 { DET_POS } else { DET_NEG };
        for s in patterns {
            let lambda = [s[0] as f64 * sm[0], s[1] as f64 * sm[1], s[2] as f64 * sm[2]];
            let b = (spec.q * Matrix3::diag(lambda) * spec.q.transpose()).sym_part();
            let r0 = Rotation::project(b * minv);
            let (morse_index, degenerate, hessian_diag) = classify(lambda, mu, s);
            out.push(CriticalRotation {
                r0,
                b,
                signs: s,
                lambda,
                frame: spec.q,
                value: lambda.iter().sum(),
                morse_index,
                degenerate,
                hessian_diag,
            });
        }
    }
    out.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(out)
}

/// `M = U diag(s1, s2, s3') V^t` with `U, V` in SO(3); critical points are
/// `R = V W U^t` with `W = diag(w)`, `det W = 1`.
fn svd_route(m: &Matrix3) -> Result<Vec<CriticalRotation>> {
    let spec = sym_eigen(&(m.transpose() * *m))?;
    let v = spec.q;
    let sm = sqrt_mu(&spec.mu);
    let tiny = 1e-150;
    let unit = |x: [f64; 3]| {
        let n = crate::linalg::dot3(x, x).sqrt();
        [x[0] / n, x[1] / n, x[2] / n]
    };
    let u1 = if sm[0] > tiny { unit(m.mul_vec(v.col(0))) } else { [1.0, 0.0, 0.0] };
    let u2 = if sm[1] > tiny * sm[0].max(1.0) && sm[1] > 1e-8 * sm[0] {
        unit(m.mul_vec(v.col(1)))
    } else {
        // any unit vector orthogonal to u1
        let t = if u1[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        unit(cross(u1, t))
    };
    let u3 = cross(u1, u2);
    let u = Matrix3::from_cols([u1, u2, u3]);
    let sigma = (u.transpose() * *m * v).0;
    let sig = [sigma[0][0], sigma[1][1], sigma[2][2]];
    let mut out = Vec::with_capacity(4);
    for w in DET_POS {
        let wm = Matrix3::diag([w[0] as f64, w[1] as f64, w[2] as f64]);
        let r0 = Rotation::project(v * wm * u.transpose());
        let b = (*r0.matrix() * *m).sym_part();
        let lambda = [w[0] as f64 * sig[0], w[1] as f64 * sig[1], w[2] as f64 * sig[2]];
        let (morse_index, degenerate, hessian_diag) = classify(lambda, spec.mu, w);
        out.push(CriticalRotation {
            r0,
            b,
            signs: w,
            lambda,
            frame: v,
            value: (*r0.matrix() * *m).trace(),
            morse_index,
            degenerate,
            hessian_diag,
        });
    }
    Ok(out)
}

pub fn tau(m: &Matrix3, r: &Rotation) -> f64 {
    (*r.matrix() * *m).trace()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianCheck {
    pub fd: [[f64; 3]; 3],
    pub max_diag_deviation: f64,
    pub max_cross: f64,
}

/// Second differences of `t -> tau(exp(t xi) R0)` along `P xi_i P^{-1}`.
pub fn hessian_check(m: &Matrix3, cp: &CriticalRotation, h: f64) -> HessianCheck {
    let dirs: [So3Vector; 3] = std::array::from_fn(|i| So3Vector(cp.frame.col(i)));
    let f = |v: [f64; 3]| tau(m, &cp.r0.perturb(&So3Vector(v)));
    let t0 = f([0.0; 3]);
    let mut fd = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let a = dirs[i].0;
            let b = dirs[j].0;
            let comb = |sa: f64, sb: f64| std::array::from_fn(|k| h * (sa * a[k] + sb * b[k]));
            fd[i][j] = if i == j {
                (f(comb(1.0, 0.0)) - 2.0 * t0 + f(comb(-1.0, 0.0))) / (h * h)
            } else {
                (f(comb(1.0, 1.0)) - f(comb(1.0, -1.0)) - f(comb(-1.0, 1.0)) + f(comb(-1.0, -1.0))) / (4.0 * h * h)
            };
        }
    }
    let mut max_diag_deviation: f64 = 0.0;
    let mut max_cross: f64 = 0.0;
    for i in 0..3 {
        max_diag_deviation = max_diag_deviation.max((fd[i][i] - cp.hessian_diag[i]).abs());
        for j in 0..3 {
            if i != j {
                max_cross = max_cross.max(fd[i][j].abs());
            }
        }
    }
    HessianCheck { fd, max_diag_deviation, max_cross }
}

/// Riemannian gradient of `tau` in the `xi` basis at `R` (left chart).
fn tau_grad(m: &Matrix3, r: &Rotation) -> [f64; 3] {
    let a = *r.matrix() * *m;
    std::array::from_fn(|k| (So3Vector::basis(k).hat() * a).trace())
}

fn tau_hess(m: &Matrix3, r: &Rotation) -> [[f64; 3]; 3] {
    let a = *r.matrix() * *m;
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let (x, y) = (So3Vector::basis(i).hat(), So3Vector::basis(j).hat());
            0.5 * ((x * y + y * x) * a).trace()
        })
    })
}

/// `phi(R) = |skew(R M)|_F^2 / 2`, zero exactly at critical points.
fn phi(m: &Matrix3, r: &Rotation) -> f64 {
    let s = (*r.matrix() * *m).skew_part();
    0.5 * s.frobenius().powi(2)
}

fn phi_grad(m: &Matrix3, r: &Rotation) -> [f64; 3] {
    let a = *r.matrix() * *m;
    let s = a.skew_part();
    std::array::from_fn(|k| {
        let x = So3Vector::basis(k).hat();
        let ds = ((x * a) + (a.transpose() * x)).scale(0.5);
        (s.transpose() * ds).trace()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub representative: Rotation,
    pub value: f64,
    pub count: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub clusters: Vec<Cluster>,
    pub converged: usize,
    pub failed: usize,
}

pub const STATIONARY_TOL: f64 = 1e-10;

/// Drive one start to a critical point: backtracking descent on `phi`
/// (whose zeros are all critical points, saddles included), then Newton on
/// the gradient of `tau`.
fn descend(m: &Matrix3, start: Rotation) -> Option<Rotation> {
    let scale = m.frobenius().max(1e-300);
    let tol = STATIONARY_TOL * scale.max(1.0);
    let resid = |r: &Rotation| (*r.matrix() * *m).skew_part().frobenius();
    let mut r = start;
    let mut t = 1.0 / (scale * scale);
    for _ in 0..5000 {
        if resid(&r) <= 1e-4 * scale {
            break;
        }
        let g = phi_grad(m, &r);
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        let f0 = phi(m, &r);
        let mut accepted = false;
        for _ in 0..60 {
            let cand = r.perturb(&So3Vector(g.map(|v| -t * v)));
            if phi(m, &cand) <= f0 - 1e-4 * t * gn2 {
                r = cand;
                t *= 2.0;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    for _ in 0..60 {
        if resid(&r) <= tol {
            return Some(Rotation::project(*r.matrix()));
        }
        let g = tau_grad(m, &r);
        let h = tau_hess(m, &r);
        let step = solve(h.iter().map(|row| row.to_vec()).collect(), g.iter().map(|v| -v).collect());
        let before = resid(&r);
        let newton = step.map(|s| r.perturb(&So3Vector([s[0], s[1], s[2]])));
        match newton {
            Some(c) if resid(&c) < before => r = c,
            _ => {
                // singular or unhelpful Newton step: fall back to one descent step on phi
                let g = phi_grad(m, &r);
                let gn2: f64 = g.iter().map(|v| v * v).sum();
                let f0 = phi(m, &r);
                let mut tt = 1.0 / (scale * scale);
                let mut moved = false;
                for _ in 0..60 {
                    let cand = r.perturb(&So3Vector(g.map(|v| -tt * v)));
                    if phi(m, &cand) < f0 - 1e-4 * tt * gn2 {
                        r = cand;
                        moved = true;
                        break;
                    }
                    tt *= 0.5;
                }
                if !moved {
                    break;
                }
            }
        }
    }
    if resid(&r) <= tol {
        Some(r)
    } else {
        None
    }
}

/// Multistart search for critical points from Haar-random starts.
pub fn descent_oracle(m: &Matrix3, n_starts: usize, seed: u64) -> Result<DescentReport> {
    if n_starts == 0 {
        return Err(Error::Invalid("n_starts must be at least 1".into()));
    }
    let found: Vec<Option<Rotation>> = (0..n_starts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            descend(m, Rotation::random(&mut rng))
        })
        .collect();
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut failed = 0;
    for r in found {
        let Some(r) = r else {
            failed += 1;
            continue;
        };
        match clusters.iter_mut().find(|c| c.representative.geodesic_distance(&r) <= 1e-6) {
            Some(c) => c.count += 1,
            None => clusters.push(Cluster {
                representative: r,
                value: tau(m, &r),
                count: 1,
                residual: (*r.matrix() * *m).skew_part().max_abs(),
            }),
        }
    }
    clusters.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(DescentReport { converged: n_starts - failed, failed, clusters })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategoryCase {
    Case1,
    Case2,
    Case2Extra,
    Inapplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub case: CategoryCase,
    pub eta: Option<f64>,
    pub positive_critical_values: Vec<f64>,
    pub values_above_eta: usize,
    pub cat_lower_bound: Option<u8>,
}

/// Lower bound for the category of `{R : Tr(RM) >= eta}` in SO(3).
pub fn category_report(m: &Matrix3, eta: Option<f64>) -> Result<CategoryReport> {
    let crit = enumerate_critical(m)?;
    let positive: Vec<f64> = crit.iter().map(|c| c.value).filter(|&v| v > 0.0).collect();
    let mu = sym_eigen(&(m.transpose() * *m))?.mu;
    let tol = TOL_MU * mu[0];
    let separated = mu[0] - mu[1] > tol && mu[1] - mu[2] > tol;
    if !separated {
        return Ok(CategoryReport {
            case: CategoryCase::Inapplicable,
            eta,
            positive_critical_values: positive,
            values_above_eta: 0,
            cat_lower_bound: None,
        });
    }
    let [a, b, c] = sqrt_mu(&mu);
    let det_neg = !det_is_zero(m) && m.det() < 0.0;
    let (case, eta0, bound, count) = if !det_neg {
        if a > b + c {
            (CategoryCase::Case1, 0.5 * (a - b - c), 2u8, 2usize)
        } else {
            return Err(Error::Hypothesis(format!(
                "det M >= 0 needs sqrt(mu1) > sqrt(mu2) + sqrt(mu3), got {a} <= {}",
                b + c
            )));
        }
    } else if a < b + c {
        (CategoryCase::Case2Extra, 0.5 * (-a + b + c), 3, 3)
    } else {
        (CategoryCase::Case2, c, 2, 2)
    };
    let eta = eta.unwrap_or(eta0);
    let top = crit.first().map(|c| c.value).unwrap_or(0.0);
    if !(eta > 0.0) || eta >= top {
        return Err(Error::Invalid(format!("eta = {eta} must lie in (0, {top})")));
    }
    let above = crit.iter().filter(|c| c.value > eta).count();
    // an overridden eta keeps the bound only if it cuts the same critical values
    let cat_lower_bound = if above == count { Some(bound) } else { None };
    Ok(CategoryReport { case, eta: Some(eta), positive_critical_values: positive, values_above_eta: above, cat_lower_bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(m: &Matrix3) -> Vec<(f64, Option<u8>, bool)> {
        enumerate_critical(m).unwrap().iter().map(|c| (c.value, c.morse_index, c.degenerate)).collect()
    }

    fn close(a: &[(f64, Option<u8>, bool)], b: &[(f64, Option<u8>, bool)]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x.0 - y.0).abs() < 1e-12 && x.1 == y.1 && x.2 == y.2)
    }

    #[test]
    fn tables() {
        let v = values(&Matrix3::diag([5.0, 2.0, 1.0]));
        assert!(close(&v, &[(8.0, Some(3), false), (2.0, Some(2), false), (-4.0, Some(1), false), (-6.0, Some(0), false)]));
        let v = values(&Matrix3::diag([3.0, 2.0, -1.0]));
        assert!(close(&v, &[(4.0, Some(3), false), (2.0, Some(2), false), (0.0, Some(1), false), (-6.0, Some(0), false)]));
        let v = values(&Matrix3::identity());
        assert!(close(&v, &[(3.0, Some(3), false), (-1.0, None, true), (-1.0, None, true), (-1.0, None, true)]));
    }

    #[test]
    fn symmetric_and_rotation() {
        let m = Matrix3([[0.3, -1.2, 0.5], [0.8, 0.1, -0.4], [0.2, 0.9, 1.1]]);
        for c in enumerate_critical(&m).unwrap() {
            let rm = *c.r0.matrix() * m;
            assert!((rm - rm.transpose()).max_abs() < 1e-12);
            assert!(Rotation::new(*c.r0.matrix(), 1e-12).is_ok());
            assert!((c.b * c.b - m.transpose() * m).max_abs() < 1e-12);
            assert!((c.b.det() - m.det()).abs() < 1e-12);
            assert!((tau(&m, &c.r0) - c.value).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_route() {
        let m = Matrix3([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [1.0, 3.0, 0.0]]);
        let c = enumerate_critical(&m).unwrap();
        let s = sqrt_mu(&sym_eigen(&(m.transpose() * m)).unwrap().mu);
        let want = [s[0] + s[1], s[0] - s[1], -s[0] + s[1], -s[0] - s[1]];
        for (c, w) in c.iter().zip(want) {
            assert!((c.value - w).abs() < 1e-12);
            let rm = *c.r0.matrix() * m;
            assert!((rm - rm.transpose()).max_abs() < 1e-12);
        }
        let idx: Vec<_> = c.iter().map(|c| c.morse_index).collect();
        assert_eq!(idx, vec![Some(3), Some(2), Some(1), Some(0)]);
    }

    #[test]
    fn hessian_fixture() {
        let m = Matrix3::diag([3.0, 2.0, 1.0]);
        let c = &enumerate_critical(&m).unwrap()[0];
        assert_eq!(c.hessian_diag, [-3.0, -4.0, -5.0]);
        let h = hessian_check(&m, c, 1e-4);
        assert!(h.max_diag_deviation < 1e-5 && h.max_cross < 1e-5);
    }

    #[test]
    fn descent_finds_four() {
        let m = Matrix3::diag([5.0, 2.0, 1.0]);
        let r = descent_oracle(&m, 40, 1).unwrap();
        let v: Vec<f64> = r.clusters.iter().map(|c| c.value).collect();
        assert_eq!(v.len(), 4, "{v:?}");
        for (a, b) in v.iter().zip([8.0, 2.0, -4.0, -6.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn category_fixtures() {
        let r = category_report(&Matrix3::diag([5.0, 2.0, 1.0]), None).unwrap();
        assert_eq!((r.case, r.eta, r.cat_lower_bound), (CategoryCase::Case1, Some(1.0), Some(2)));
        let r = category_report(&Matrix3::diag([2.5, 2.0, -1.0]), None).unwrap();
        assert_eq!((r.case, r.eta, r.cat_lower_bound), (CategoryCase::Case2Extra, Some(0.25), Some(3)));
        let r = category_report(&Matrix3::diag([3.0, 2.0, -1.0]), None).unwrap();
        assert_eq!((r.case, r.cat_lower_bound), (CategoryCase::Case2, Some(2)));
        let r = category_report(&Matrix3::identity(), None).unwrap();
        assert_eq!(r.case, CategoryCase::Inapplicable);
        assert!(category_report(&Matrix3::diag([3.0, 2.0, 1.5]), None).is_err());
    }
}
