//! The reduced energy `F_eps(p, R, lambda) = 2 lambda^4 F(p) - 4 eps lambda^2
//! Tr(R M(p))` on the parameter space `B_{1-d0} x SO(3) x (0, lambda0)`.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{h_matrix, BoundarySpec};
use crate::critical::{category_report, enumerate_critical, CategoryReport, CriticalRotation};
use crate::landscape::{f_value_with, grid_points, m_volume_with, sqrt_mu, TOL_MU};
use crate::linalg::{jacobi_eigen, solve, Matrix3};
use crate::quadrature::{refine, Focus, ProductRule, QuadratureSpec};
use crate::so3::{Rotation, So3Vector};
use crate::{norm4, Error, Point4, Result};

pub const P_STEP: f64 = 1e-4;
pub const XI_STEP: f64 = 1e-4;
pub const LAMBDA_STEP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub p: Point4,
    pub r: Rotation,
    pub lambda: f64,
    pub epsilon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchWindow {
    pub d0: f64,
    pub lambda0: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
}

impl SearchWindow {
    pub fn validate(&self) -> Result<()> {
        let ok = self.d0 > 0.0
            && self.d0 < 1.0
            && self.lambda0 > 0.0
            && 2.0 * self.lambda0 < self.d0
            && self.d1 > 0.0
            && self.d1 < self.d2
            && self.c0 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid window {self:?}")))
        }
    }

    /// Which face, if any, `q` fails to be strictly inside of.
    pub fn violated_face(&self, q: &ParamPoint) -> Option<&'static str> {
        let l2 = q.lambda * q.lambda;
        if norm4(&q.p) >= 1.0 - self.d0 {
            Some("|p| = 1 - d0")
        } else if l2 <= self.d1 * q.epsilon {
            Some("lambda^2 = D1 eps")
        } else if l2 >= self.d2 * q.epsilon {
            Some("lambda^2 = D2 eps")
        } else if q.lambda >= self.lambda0 {
            Some("lambda = lambda0")
        } else {
            None
        }
    }
}

/// `2 lambda^4 F - 4 eps lambda^2 Tr(R M)`; the constant offset is omitted.
pub fn reduced_energy(q: &ParamPoint, m: &Matrix3, f: f64) -> f64 {
    energy(q.lambda, q.epsilon, f, (*q.r.matrix() * *m).trace())
}

fn energy(lambda: f64, eps: f64, f: f64, tau: f64) -> f64 {
    let l2 = lambda * lambda;
    2.0 * l2 * l2 * f - 4.0 * eps * l2 * tau
}

/// `dF_eps/dlambda = 8 lambda^3 F - 8 eps lambda Tr(R M)`.
pub fn energy_dlambda(q: &ParamPoint, m: &Matrix3, f: f64) -> f64 {
    let tau = (*q.r.matrix() * *m).trace();
    8.0 * q.lambda.powi(3) * f - 8.0 * q.epsilon * q.lambda * tau
}

/// Optimal `lambda` on the fibre of a critical rotation with value
/// `Gamma > 0`: `lambda*^2 = eps Gamma / F`, value `-2 eps^2 Gamma^2 / F`.
pub fn fiber_reduce(cp: &CriticalRotation, epsilon: f64, f: f64) -> Option<(f64, f64)> {
    fiber_from_value(cp.value, epsilon, f)
}

pub fn fiber_from_value(gamma: f64, epsilon: f64, f: f64) -> Option<(f64, f64)> {
    if !(gamma > 0.0) {
        return None;
    }
    let l2 = epsilon * gamma / f;
    Some((l2.sqrt(), -2.0 * epsilon * epsilon * gamma * gamma / f))
}

/// Landscape evaluator on one fixed quadrature rule, so that `F` and `M`
/// are smooth in `p` for finite differences.
pub struct Model {
    spec: BoundarySpec,
    rule: ProductRule,
}

impl Model {
    /// Rule chosen by refining `F` at `anchor` (focused when near the
    /// boundary).
    pub fn anchored(spec: &BoundarySpec, quad: &QuadratureSpec, anchor: &Point4) -> Result<Self> {
        let rule = crate::landscape::frozen_rule(anchor, quad)?;
        Ok(Model { spec: spec.clone(), rule })
    }

    /// Unfocused rule refined until `F` at radius `radius` is resolved;
    /// used for searches over a whole ball.
    pub fn for_radius(spec: &BoundarySpec, quad: &QuadratureSpec, radius: f64) -> Result<Self> {
        let p = [0.0, 0.0, 0.0, radius];
        let a = crate::harmonic::AlphaField::new(&p)?;
        let (_, lvl) = refine(
            |x| {
                let d = a.dh(x);
                [2.0 * d.0.iter().flatten().map(|v| v * v).sum::<f64>()]
            },
            quad,
            None,
            true,
        )?;
        Ok(Model { spec: spec.clone(), rule: ProductRule::ball(quad, None::<&Focus>, lvl) })
    }

    pub fn spec(&self) -> &BoundarySpec {
        &self.spec
    }

    pub fn f(&self, p: &Point4) -> Result<f64> {
        f_value_with(p, &self.rule)
    }

    /// `M(A0, p)` on the rule plus `pi^2 H(p) A` in closed form.
    pub fn m(&self, p: &Point4) -> Result<Matrix3> {
        let synth = h_matrix(p)?.matrix() * self.spec.synth.scale(std::f64::consts::PI.powi(2));
        if self.spec.base_is_zero() {
            return Ok(synth);
        }
        Ok(m_volume_with(&self.spec.base_only(), p, &self.rule)? + synth)
    }

    pub fn eval(&self, p: &Point4) -> Result<(f64, Matrix3)> {
        Ok((self.f(p)?, self.m(p)?))
    }

    /// Top critical value of `tau_{M(p)}` and `G = Gamma^2 / F` for the
    /// critical rotation of rank `rank` (0 = largest value).
    pub fn fiber_g(&self, p: &Point4, rank: usize) -> Result<(f64, f64, CriticalRotation)> {
        let (f, m) = self.eval(p)?;
        let cp = enumerate_critical(&m)?.into_iter().nth(rank).ok_or(Error::Index(rank))?;
        Ok((cp.value, cp.value * cp.value / f, cp))
    }
}

type Memo = RefCell<HashMap<[u64; 4], (f64, Matrix3)>>;

fn memo_eval(model: &Model, memo: &Memo, p: &Point4) -> Result<(f64, Matrix3)> {
    let key = p.map(f64::to_bits);
    if let Some(v) = memo.borrow().get(&key) {
        return Ok(*v);
    }
    let v = model.eval(p)?;
    memo.borrow_mut().insert(key, v);
    Ok(v)
}

/// Chart around `q`: `z[0..4]` shifts `p`, `z[4..7]` rotates by `exp(xi)`,
/// `z[7]` shifts `lambda` (or `log lambda` when `log_lambda`).
fn chart_energy(model: &Model, memo: &Memo, q: &ParamPoint, z: &[f64; 8], log_lambda: bool) -> Result<f64> {
    let p = [q.p[0] + z[0], q.p[1] + z[1], q.p[2] + z[2], q.p[3] + z[3]];
    let (f, m) = memo_eval(model, memo, &p)?;
    let r = q.r.perturb(&So3Vector([z[4], z[5], z[6]]));
    let lambda = if log_lambda { q.lambda * z[7].exp() } else { q.lambda + z[7] };
    Ok(energy(lambda, q.epsilon, f, (*r.matrix() * m).trace()))
}

fn steps(log_lambda: bool, q: &ParamPoint) -> [f64; 8] {
    let ls = if log_lambda { LAMBDA_STEP / q.lambda } else { LAMBDA_STEP };
    [P_STEP, P_STEP, P_STEP, P_STEP, XI_STEP, XI_STEP, XI_STEP, ls]
}

/// Five-point central differences in the `(p, xi, lambda)` chart.
pub fn energy_gradient(model: &Model, q: &ParamPoint) -> Result<[f64; 8]> {
    let memo = Memo::default();
    let h = steps(false, q);
    let mut g = [0.0; 8];
    for i in 0..8 {
        let at = |s: f64| {
            let mut z = [0.0; 8];
            z[i] = s * h[i];
            chart_energy(model, &memo, q, &z, false)
        };
        g[i] = (-at(2.0)? + 8.0 * at(1.0)? - 8.0 * at(-1.0)? + at(-2.0)?) / (12.0 * h[i]);
    }
    Ok(g)
}

/// Central-difference Hessian in the `(p, xi, log lambda)` chart.
pub fn energy_hessian(model: &Model, q: &ParamPoint) -> Result<[[f64; 8]; 8]> {
    let memo = Memo::default();
    let h = steps(true, q);
    let h = [h[0], h[1], h[2], h[3], h[4], h[5], h[6], 1e-4];
    let f = |z: [f64; 8]| chart_energy(model, &memo, q, &z, true);
    let f0 = f([0.0; 8])?;
    let mut hs = [[0.0; 8]; 8];
    for i in 0..8 {
        let mut zp = [0.0; 8];
        let mut zm = [0.0; 8];
        zp[i] = h[i];
        zm[i] = -h[i];
        hs[i][i] = (f(zp)? - 2.0 * f0 + f(zm)?) / (h[i] * h[i]);
        for j in (i + 1)..8 {
            let at = |si: f64, sj: f64| {
                let mut z = [0.0; 8];
                z[i] = si * h[i];
                z[j] = sj * h[j];
                f(z)
            };
            let v = (at(1.0, 1.0)? - at(1.0, -1.0)? - at(-1.0, 1.0)? + at(-1.0, -1.0)?) / (4.0 * h[i] * h[j]);
            hs[i][j] = v;
            hs[j][i] = v;
        }
    }
    Ok(hs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Classification {
    Min,
    Saddle { index: usize },
    Degenerate,
    /// The spectrum of `M^t M` is degenerate, so the rotation fibre is not
    /// isolated; no signature is assigned.
    So3Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberInfo {
    /// 0 for the largest critical value of `tau_{M(p)}`.
    pub rank: usize,
    pub gamma: f64,
    pub g: f64,
    pub f: f64,
    /// `|lambda^2 - eps Gamma / F| / lambda^2`.
    pub lambda_star_residual: f64,
    /// `|value + 2 eps^2 G| / |value|`.
    pub fiber_identity_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedCritical {
    pub q: ParamPoint,
    pub value: f64,
    pub gradient: [f64; 8],
    pub gradient_norm: f64,
    pub classification: Classification,
    pub hessian_eigenvalues: Option<Vec<f64>>,
    pub fiber: FiberInfo,
    pub violated_face: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Minimize,
    AllFibers,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub strategy: Strategy,
    pub n_starts: usize,
    pub grid: usize,
    pub seed: u64,
    pub gradient_tol_factor: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { strategy: Strategy::Minimize, n_starts: 32, grid: 5, seed: 0, gradient_tol_factor: 1e-8 }
    }
}

/// Central-difference gradient and Hessian of a function of `p`.
fn fd_grad_hess(f: &dyn Fn(&Point4) -> Result<f64>, p: &Point4, h: f64, hh: f64) -> Result<([f64; 4], [[f64; 4]; 4], f64)> {
    let at = |d: &[(usize, f64)]| {
        let mut x = *p;
        for &(i, s) in d {
            x[i] += s;
        }
        f(&x)
    };
    let f0 = f(p)?;
    let mut g = [0.0; 4];
    for i in 0..4 {
        g[i] = (-at(&[(i, 2.0 * h)])? + 8.0 * at(&[(i, h)])? - 8.0 * at(&[(i, -h)])? + at(&[(i, -2.0 * h)])?) / (12.0 * h);
    }
    let mut hs = [[0.0; 4]; 4];
    for i in 0..4 {
        hs[i][i] = (at(&[(i, hh)])? - 2.0 * f0 + at(&[(i, -hh)])?) / (hh * hh);
        for j in (i + 1)..4 {
            let v = (at(&[(i, hh), (j, hh)])? - at(&[(i, hh), (j, -hh)])? - at(&[(i, -hh), (j, hh)])?
                + at(&[(i, -hh), (j, -hh)])?)
                / (4.0 * hh * hh);
            hs[i][j] = v;
            hs[j][i] = v;
        }
    }
    Ok((g, hs, f0))
}

/// Newton iteration for a stationary point of `g` in `p`. With
/// `maximize`, non-ascent Newton steps are replaced by gradient ascent.
fn newton_p(
    g: &dyn Fn(&Point4) -> Result<f64>,
    start: &Point4,
    radius: f64,
    maximize: bool,
    tol: f64,
) -> Result<(Point4, f64, bool)> {
    let mut p = *start;
    let mut t = 1e-3;
    for _ in 0..60 {
        let (gr, hs, v0) = fd_grad_hess(g, &p, P_STEP, 1e-3)?;
        let gn = gr.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn <= tol {
            return Ok((p, gn, true));
        }
        let hv: Vec<Vec<f64>> = hs.iter().map(|r| r.to_vec()).collect();
        let (eig, _) = jacobi_eigen(hv.clone());
        let newton = solve(hv, gr.iter().map(|v| -v).collect());
        let use_newton = match (&newton, maximize) {
            (Some(_), true) => eig.iter().all(|&e| e < 0.0),
            (Some(_), false) => true,
            _ => false,
        };
        let mut next = None;
        if use_newton {
            let s = newton.unwrap();
            let cand = [p[0] + s[0], p[1] + s[1], p[2] + s[2], p[3] + s[3]];
            if norm4(&cand) < radius {
                next = Some(cand);
            }
        }
        if next.is_none() {
            // gradient step with backtracking
            let dir = if maximize { 1.0 } else { -1.0 };
            for _ in 0..40 {
                let cand = std::array::from_fn(|i| p[i] + dir * t * gr[i]);
                if norm4(&cand) < radius {
                    let v = g(&cand)?;
                    if (maximize && v > v0) || (!maximize && v < v0) {
                        next = Some(cand);
                        t *= 2.0;
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        match next {
            Some(c) => p = c,
            None => return Ok((p, gn, false)),
        }
    }
    let (gr, _, _) = fd_grad_hess(g, &p, P_STEP, 1e-3)?;
    let gn = gr.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((p, gn, gn <= tol))
}

fn mu_degenerate(m: &Matrix3) -> Result<bool> {
    let mu = crate::linalg::sym_eigen(&(m.transpose() * *m))?.mu;
    let tol = TOL_MU * mu[0];
    Ok(mu[0] - mu[1] <= tol || mu[1] - mu[2] <= tol)
}

fn assemble(
    model: &Model,
    window: &SearchWindow,
    epsilon: f64,
    p: Point4,
    rank: usize,
    classify: bool,
) -> Result<Option<ReducedCritical>> {
    let (f, m) = model.eval(&p)?;
    let crit = enumerate_critical(&m)?;
    let Some(cp) = crit.get(rank) else { return Ok(None) };
    let Some((lambda, value)) = fiber_reduce(cp, epsilon, f) else { return Ok(None) };
    let q = ParamPoint { p, r: cp.r0, lambda, epsilon };
    let direct = reduced_energy(&q, &m, f);
    let g = cp.value * cp.value / f;
    let gradient = energy_gradient(model, &q)?;
    let gradient_norm = gradient.iter().map(|v| v * v).sum::<f64>().sqrt();
    let degenerate_mu = mu_degenerate(&m)?;
    let (classification, hessian_eigenvalues) = if degenerate_mu {
        (Classification::So3Degenerate, None)
    } else if classify {
        let hs = energy_hessian(model, &q)?;
        let (eig, _) = jacobi_eigen(hs.iter().map(|r| r.to_vec()).collect());
        let scale = eig.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let c = if eig.iter().any(|e| e.abs() <= 1e-6 * scale) {
            Classification::Degenerate
        } else {
            match eig.iter().filter(|&&e| e < 0.0).count() {
                0 => Classification::Min,
                k => Classification::Saddle { index: k },
            }
        };
        (c, Some(eig))
    } else {
        (Classification::Degenerate, None)
    };
    let fiber = FiberInfo {
        rank,
        gamma: cp.value,
        g,
        f,
        lambda_star_residual: (lambda * lambda - epsilon * cp.value / f).abs() / (lambda * lambda),
        fiber_identity_residual: (direct + 2.0 * epsilon * epsilon * g).abs() / value.abs(),
    };
    let violated_face = window.violated_face(&q).map(str::to_string);
    Ok(Some(ReducedCritical { q, value: direct, gradient, gradient_norm, classification, hessian_eigenvalues, fiber, violated_face }))
}

fn dedupe(mut v: Vec<ReducedCritical>) -> Vec<ReducedCritical> {
    v.sort_by(|a, b| {
        a.value.total_cmp(&b.value).then_with(|| {
            a.q.p.iter().zip(&b.q.p).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut out: Vec<ReducedCritical> = Vec::new();
    for c in v {
        let dup = out.iter().any(|o| {
            o.fiber.rank == c.fiber.rank
                && norm4(&[c.q.p[0] - o.q.p[0], c.q.p[1] - o.q.p[1], c.q.p[2] - o.q.p[2], c.q.p[3] - o.q.p[3]]) <= 1e-6
        });
        if !dup {
            out.push(c);
        }
    }
    out
}

fn check_eps(window: &SearchWindow, epsilon: f64) -> Result<()> {
    window.validate()?;
    if !(epsilon > 0.0) || (window.d2 * epsilon).sqrt() >= window.lambda0 {
        return Err(Error::Invalid(format!(
            "epsilon = {epsilon} too large for the window: need sqrt(D2 eps) < lambda0 = {}",
            window.lambda0
        )));
    }
    Ok(())
}

/// Search the reduced energy for critical points inside the window.
pub fn find_critical(
    spec: &BoundarySpec,
    window: &SearchWindow,
    epsilon: f64,
    opts: &SearchOptions,
    quad: &QuadratureSpec,
) -> Result<Vec<ReducedCritical>> {
    check_eps(window, epsilon)?;
    let radius = 1.0 - window.d0;
    let model = Model::for_radius(spec, quad, radius)?;
    let tol = opts.gradient_tol_factor * epsilon * epsilon;
    let found = match opts.strategy {
        Strategy::Minimize => minimize(&model, spec, window, epsilon, opts, quad, tol)?,
        Strategy::AllFibers => all_fibers(&model, spec, window, epsilon, opts, quad, tol)?,
    };
    let found = dedupe(found);
    let (inside, outside): (Vec<_>, Vec<_>) = found.into_iter().partition(|c| c.violated_face.is_none());
    if inside.is_empty() {
        let faces: Vec<String> = outside.iter().filter_map(|c| c.violated_face.clone()).collect();
        return Err(Error::NoInterior(if faces.is_empty() {
            "no stationary point found".into()
        } else {
            format!("search attracted to the boundary faces {faces:?}")
        }));
    }
    Ok(inside)
}

fn start_points(n: usize, radius: f64, seed: u64) -> Vec<Point4> {
    let mut v = vec![[0.0; 4]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while v.len() < n {
        let x = crate::quadrature::uniform_ball(&mut rng);
        v.push(x.map(|c| 0.9 * radius * c));
    }
    v
}

/// Re-anchor the quadrature at the located point and polish there.
fn polish(
    spec: &BoundarySpec,
    quad: &QuadratureSpec,
    p: Point4,
    rank: usize,
    radius: f64,
    maximize: bool,
    tol_g: f64,
) -> Result<(Model, Point4)> {
    let model = Model::anchored(spec, quad, &p)?;
    let g = |x: &Point4| model.fiber_g(x, rank).map(|v| v.1);
    let (p, _, _) = newton_p(&g, &p, radius, maximize, tol_g)?;
    Ok((model, p))
}

fn minimize(
    model: &Model,
    spec: &BoundarySpec,
    window: &SearchWindow,
    epsilon: f64,
    opts: &SearchOptions,
    quad: &QuadratureSpec,
    tol: f64,
) -> Result<Vec<ReducedCritical>> {
    let radius = 1.0 - window.d0;
    // |grad_p F_eps| = 2 eps^2 |grad G| on the optimal fibre
    let tol_g = 0.25 * tol / (epsilon * epsilon);
    let starts = start_points(opts.n_starts.max(1), radius, opts.seed);
    let located: Vec<Result<Option<Point4>>> = starts
        .par_iter()
        .map(|s| {
            let g = |x: &Point4| model.fiber_g(x, 0).map(|v| v.1);
            if g(s)? <= 0.0 {
                return Ok(None);
            }
            let (p, _, ok) = newton_p(&g, s, radius, true, tol_g)?;
            Ok(ok.then_some(p))
        })
        .collect();
    let mut pts: Vec<Point4> = Vec::new();
    for r in located {
        if let Some(p) = r? {
            if !pts.iter().any(|o| norm4(&[p[0] - o[0], p[1] - o[1], p[2] - o[2], p[3] - o[3]]) <= 1e-6) {
                pts.push(p);
            }
        }
    }
    let mut out = Vec::new();
    for p in pts {
        let (m2, p2) = polish(spec, quad, p, 0, radius, true, tol_g)?;
        if let Some(c) = assemble(&m2, window, epsilon, p2, 0, true)? {
            out.push(c);
        }
    }
    Ok(out)
}

fn all_fibers(
    model: &Model,
    spec: &BoundarySpec,
    window: &SearchWindow,
    epsilon: f64,
    opts: &SearchOptions,
    quad: &QuadratureSpec,
    tol: f64,
) -> Result<Vec<ReducedCritical>> {
    let radius = 1.0 - window.d0;
    let tol_g = 0.25 * tol / (epsilon * epsilon);
    let n = opts.grid.clamp(2, 9);
    let pts = grid_points(n, window.d0);
    let vals: Vec<Result<Vec<f64>>> = pts
        .par_iter()
        .map(|p| {
            let (f, m) = model.eval(p)?;
            Ok(enumerate_critical(&m)?.iter().map(|c| if c.value > 0.0 { c.value * c.value / f } else { f64::NAN }).collect())
        })
        .collect();
    let vals: Vec<Vec<f64>> = vals.into_iter().collect::<Result<_>>()?;
    let idx = |c: [usize; 4]| ((c[0] * n + c[1]) * n + c[2]) * n + c[3];
    let mut candidates: Vec<(Point4, usize)> = Vec::new();
    for rank in 0..4 {
        let gv = |c: [usize; 4]| vals[idx(c)][rank];
        // discrete |grad G| on the grid (one-sided at the edges)
        let mut grad = vec![f64::NAN; pts.len()];
        for a in 0..n.pow(4) {
            let c = [a / n.pow(3), (a / n.pow(2)) % n, (a / n) % n, a % n];
            if gv(c).is_nan() {
                continue;
            }
            let mut s = 0.0;
            for k in 0..4 {
                let mut up = c;
                let mut dn = c;
                if c[k] + 1 < n {
                    up[k] += 1;
                }
                if c[k] > 0 {
                    dn[k] -= 1;
                }
                let d = gv(up) - gv(dn);
                s += d * d;
            }
            grad[a] = s.sqrt();
        }
        for a in 0..n.pow(4) {
            if grad[a].is_nan() {
                continue;
            }
            let c = [a / n.pow(3), (a / n.pow(2)) % n, (a / n) % n, a % n];
            let mut is_min = true;
            for k in 0..4 {
                for s in [-1i64, 1] {
                    let v = c[k] as i64 + s;
                    if v < 0 || v >= n as i64 {
                        continue;
                    }
                    let mut nb = c;
                    nb[k] = v as usize;
                    let gn = grad[idx(nb)];
                    if !gn.is_nan() && gn < grad[a] {
                        is_min = false;
                    }
                }
            }
            if is_min {
                candidates.push((pts[a], rank));
            }
        }
    }
    let refined: Vec<Result<Option<ReducedCritical>>> = candidates
        .par_iter()
        .map(|(p, rank)| {
            let g = |x: &Point4| model.fiber_g(x, *rank).map(|v| v.1);
            let (p, _, ok) = newton_p(&g, p, radius, false, tol_g)?;
            if !ok {
                return Ok(None);
            }
            let (m2, p2) = polish(spec, quad, p, *rank, radius, false, tol_g)?;
            assemble(&m2, window, epsilon, p2, *rank, true)
        })
        .collect();
    let mut out = Vec::new();
    for r in refined {
        if let Some(c) = r? {
            out.push(c);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub window: SearchWindow,
    #[serde(rename = "C4")]
    pub c4: f64,
    #[serde(rename = "C5")]
    pub c5: f64,
    pub max_f: f64,
    pub probe_points: usize,
}

/// The window recipe: `C5 = min F`, `C4 = max Gamma1+` over the probe grid,
/// `D2 = 2 C4 / C5`, `D1 = D d0^2` with `D^2 d0^4 max F < C0 / 16`, and
/// `lambda0 = 0.99 d0 / 2`.
pub fn suggest_window(spec: &BoundarySpec, c0: f64, d0: f64, probe: usize, quad: &QuadratureSpec) -> Result<WindowReport> {
    if !(c0 > 0.0) || !(d0 > 0.0 && d0 < 1.0) {
        return Err(Error::Invalid(format!("need C0 > 0 and d0 in (0, 1), got C0 = {c0}, d0 = {d0}")));
    }
    let model = Model::for_radius(spec, quad, 1.0 - d0)?;
    let pts = grid_points(probe.max(1), d0);
    let vals: Vec<Result<(f64, f64)>> = pts
        .par_iter()
        .map(|p| {
            let (f, m) = model.eval(p)?;
            let mu = crate::linalg::sym_eigen(&(m.transpose() * m))?.mu;
            Ok((f, sqrt_mu(&mu).iter().sum()))
        })
        .collect();
    let (mut c5, mut c4, mut max_f) = (f64::INFINITY, 0.0f64, 0.0f64);
    for v in vals {
        let (f, g) = v?;
        c5 = c5.min(f);
        max_f = max_f.max(f);
        c4 = c4.max(g);
    }
    let d2 = 2.0 * c4 / c5;
    let d = 0.999 * (c0 / (16.0 * d0.powi(4) * max_f)).sqrt();
    let window = SearchWindow { d0, lambda0: 0.99 * d0 / 2.0, d1: d * d0 * d0, d2, c0 };
    if window.d1 >= window.d2 {
        return Err(Error::Invalid(format!(
            "infeasible window for C0 = {c0}, d0 = {d0}: D1 = {} >= D2 = {}",
            window.d1, window.d2
        )));
    }
    Ok(WindowReport { window, c4, c5, max_f, probe_points: pts.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceMargin {
    pub face: String,
    pub candidates: usize,
    pub sublevel_points: usize,
    /// Sampled values of `p`.
    /// `None` when no sampled point of the face lies in the sublevel set.
    pub min_margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub threshold: f64,
    pub faces: Vec<FaceMargin>,
    pub all_positive: bool,
}

fn near_top<R: Rng>(rng: &mut R, top: &Rotation) -> Rotation {
    let dir = crate::quadrature::uniform_sphere(rng);
    let rad = std::f64::consts::PI * rng.random::<f64>().powf(1.0 / 3.0);
    top.perturb(&So3Vector([rad * dir[0], rad * dir[1], rad * dir[2]]))
}

/// Sample the three faces of the window restricted to
/// `F_eps <= -C0 eps^2` and report the smallest signed margin of the
/// inward-pointing inequalities on each.
pub fn check_flow_invariance(
    spec: &BoundarySpec,
    window: &SearchWindow,
    epsilon: f64,
    n_samples: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<InvarianceReport> {
    check_eps(window, epsilon)?;
    let radius = 1.0 - window.d0;
    let model = Model::for_radius(spec, quad, radius)?;
    let threshold = -window.c0 * epsilon * epsilon;
    let (l1, l2) = ((window.d1 * epsilon).sqrt(), (window.d2 * epsilon).sqrt());
    let cap = n_samples.max(1) * 5;
    let mut faces = Vec::new();
    for (fi, name) in ["|p| = 1 - d0", "lambda^2 = D1 eps", "lambda^2 = D2 eps"].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(fi as u64);
        let mut accepted = 0;
        let mut tried = 0;
        let mut min_margin: Option<f64> = None;
        while accepted < n_samples && tried < cap {
            tried += 1;
            let p = if fi == 0 {
                crate::quadrature::uniform_sphere(&mut rng).map(|c| radius * c)
            } else {
                crate::quadrature::uniform_ball(&mut rng).map(|c| radius * c)
            };
            let (f, m) = model.eval(&p)?;
            let top = enumerate_critical(&m)?[0].r0;
            // several rotation / scale draws per p, keeping the first in the sublevel set
            let mut hit = None;
            for _ in 0..64 {
                let r = near_top(&mut rng, &top);
                let lambda = match fi {
                    0 => l1 + (l2 - l1) * rng.random::<f64>(),
                    1 => l1,
                    _ => l2,
                };
                let q = ParamPoint { p, r, lambda, epsilon };
                if reduced_energy(&q, &m, f) <= threshold {
                    hit = Some(q);
                    break;
                }
            }
            let Some(q) = hit else { continue };
            accepted += 1;
            let margin = match fi {
                0 => {
                    let u = p.map(|c| c / radius);
                    let tau_at = |s: f64| -> Result<f64> {
                        let x = std::array::from_fn(|k| p[k] + s * u[k]);
                        let (fx, mx) = model.eval(&x)?;
                        Ok(reduced_energy(&ParamPoint { p: x, ..q.clone() }, &mx, fx))
                    };
                    let h = P_STEP;
                    (-tau_at(2.0 * h)? + 8.0 * tau_at(h)? - 8.0 * tau_at(-h)? + tau_at(-2.0 * h)?) / (12.0 * h)
                }
                1 => -energy_dlambda(&q, &m, f),
                _ => energy_dlambda(&q, &m, f),
            };
            min_margin = Some(min_margin.map_or(margin, |v| v.min(margin)));
        }
        faces.push(FaceMargin { face: name.to_string(), candidates: tried, sublevel_points: accepted, min_margin });
    }
    let all_positive = faces.iter().all(|f| f.min_margin.is_none_or(|m| m > 0.0));
    Ok(InvarianceReport { threshold, faces, all_positive })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StildeReport {
    pub p0: Point4,
    pub eta: f64,
    pub f_p0: f64,
    pub lambda0: f64,
    pub lambda0_sq: f64,
    pub category: CategoryReport,
    pub threshold: f64,
    pub samples: usize,
    pub max_energy: f64,
    pub inclusion_holds: bool,
}

/// `{p0} x S(p0, eta) x {lambda0}` with `lambda0^2 = eta eps / F(p0)`, and
/// a sampled check that it lies in `F_eps <= -(eta^2 / F(p0)) eps^2`.
#[allow(clippy::too_many_arguments)]
pub fn stilde_set(
    spec: &BoundarySpec,
    p0: &Point4,
    eta: Option<f64>,
    epsilon: f64,
    n_samples: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<StildeReport> {
    let model = Model::anchored(spec, quad, p0)?;
    let (f, m) = model.eval(p0)?;
    let crit = enumerate_critical(&m)?;
    let top = crit[0].value;
    let category = match category_report(&m, eta) {
        Ok(c) => c,
        Err(Error::Hypothesis(_)) | Err(Error::Invalid(_)) if eta.is_some() => CategoryReport {
            case: crate::critical::CategoryCase::Inapplicable,
            eta,
            positive_critical_values: crit.iter().map(|c| c.value).filter(|v| *v > 0.0).collect(),
            values_above_eta: crit.iter().filter(|c| c.value > eta.unwrap()).count(),
            cat_lower_bound: None,
        },
        Err(e) => return Err(e),
    };
    let eta = category.eta.or(eta).ok_or_else(|| Error::Hypothesis("no eta available".into()))?;
    if !(eta > 0.0) || eta >= top {
        return Err(Error::Invalid(format!("eta = {eta} leaves S(p0, eta) empty (top value {top})")));
    }
    let lambda0_sq = eta * epsilon / f;
    let lambda0 = lambda0_sq.sqrt();
    let threshold = -(eta * eta / f) * epsilon * epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = 0;
    let mut max_energy = f64::NEG_INFINITY;
    let mut tries = 0;
    while samples < n_samples && tries < 200 * n_samples.max(1) {
        tries += 1;
        let r = near_top(&mut rng, &crit[0].r0);
        if (*r.matrix() * m).trace() < eta {
            continue;
        }
        samples += 1;
        let e = reduced_energy(&ParamPoint { p: *p0, r, lambda: lambda0, epsilon }, &m, f);
        max_energy = max_energy.max(e);
    }
    Ok(StildeReport {
        p0: *p0,
        eta,
        f_p0: f,
        lambda0,
        lambda0_sq,
        category,
        threshold,
        samples,
        max_energy,
        inclusion_holds: samples > 0 && max_energy <= threshold,
    })
}
