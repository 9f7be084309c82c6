//! The interaction landscape: `F(p)`, `M(A0, p)` by volume and boundary
//! integrals, the spectrum of `M^t M`, and the derived `Gamma`/`G` values.

use serde::{Deserialize, Serialize};

use crate::boundary::{curvature_asd, BoundarySpec};
use crate::forms::{AsdCoeffs, TwoForm};
use crate::harmonic::AlphaField;
use crate::linalg::{sym_eigen, Matrix3, SymSpectrum};
use crate::quadrature::{refine, Focus, ProductRule, QuadratureSpec};
use crate::{dot4, norm4, Error, Point4, Result};

pub const TOL_MU: f64 = 1e-9;
pub const TOL_DET: f64 = 1e-10;
pub const P_MAX_VOLUME: f64 = 0.99;
pub const P_MAX_BOUNDARY: f64 = 0.9;

pub const CSV_HEADER: [&str; 21] = [
    "p1", "p2", "p3", "p4", "F", "mu1", "mu2", "mu3", "detM", "Gamma1p", "Gamma1m", "Gamma2p", "Gamma2m",
    "Gamma3m", "G1p", "G1m", "G2p", "G2m", "G3m", "G10", "G20",
];

/// `det M` treated as zero below `TOL_DET * |M|^3`.
pub fn det_is_zero(m: &Matrix3) -> bool {
    m.det().abs() <= TOL_DET * m.frobenius().powi(3)
}

pub fn sqrt_mu(mu: &[f64; 3]) -> [f64; 3] {
    mu.map(|v| v.max(0.0).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    pub m: Matrix3,
    pub spectrum: SymSpectrum,
    pub det_m: f64,
    pub p: Point4,
    pub est_rel_error: f64,
    pub nodes_used: usize,
    pub converged: bool,
}

impl InteractionMatrix {
    pub fn from_matrix(m: Matrix3, p: Point4) -> Result<Self> {
        let spectrum = sym_eigen(&(m.transpose() * m))?;
        Ok(InteractionMatrix { m, spectrum, det_m: m.det(), p, est_rel_error: 0.0, nodes_used: 0, converged: true })
    }

    pub fn sqrt_mu(&self) -> [f64; 3] {
        sqrt_mu(&self.spectrum.mu)
    }
}

fn check_p(p: &Point4, max: f64) -> Result<f64> {
    let n = norm4(p);
    if n > max {
        return Err(Error::OutsideBall(*p, n));
    }
    Ok(n)
}

fn f_integrand(a: &AlphaField, x: &Point4) -> [f64; 1] {
    let d = a.dh(x);
    [2.0 * d.0.iter().flatten().map(|v| v * v).sum::<f64>()]
}

/// `F(p) = int_B |(dh_p)^-|^2`.
pub fn f_value(p: &Point4, quad: &QuadratureSpec) -> Result<crate::IntegralResult> {
    check_p(p, P_MAX_VOLUME)?;
    let a = AlphaField::new(p)?;
    let (r, _) = refine(|x| f_integrand(&a, x), quad, Focus::for_point(p).as_ref(), true)?;
    Ok(crate::IntegralResult { value: r.value[0], est_rel_error: r.est_rel_error, nodes_used: r.nodes_used, converged: r.converged })
}

/// `F` through a rule fixed in advance, so nearby `p` see the same nodes.
pub fn f_value_with(p: &Point4, rule: &ProductRule) -> Result<f64> {
    let a = AlphaField::new(p)?;
    Ok(rule.integrate(|x| f_integrand(&a, x))?[0])
}

/// The rule `f_value` would settle on at `p`, for reuse at nearby points.
pub fn frozen_rule(p: &Point4, quad: &QuadratureSpec) -> Result<ProductRule> {
    check_p(p, P_MAX_VOLUME)?;
    let a = AlphaField::new(p)?;
    let focus = Focus::for_point(p);
    let (_, lvl) = refine(|x| f_integrand(&a, x), quad, focus.as_ref(), true)?;
    Ok(ProductRule::ball(quad, focus.as_ref(), lvl))
}

/// Central differences of `F` with step `1e-4 (1 - |p|)` on a frozen rule.
pub fn f_grad(p: &Point4, quad: &QuadratureSpec) -> Result<[f64; 4]> {
    let n = check_p(p, P_MAX_VOLUME)?;
    let rule = frozen_rule(p, quad)?;
    let h = 1e-4 * (1.0 - n);
    let mut g = [0.0; 4];
    for j in 0..4 {
        let (mut a, mut b) = (*p, *p);
        a[j] += h;
        b[j] -= h;
        g[j] = (f_value_with(&a, &rule)? - f_value_with(&b, &rule)?) / (2.0 * h);
    }
    Ok(g)
}

fn m_integrand(spec: &BoundarySpec, a: &AlphaField, x: &Point4) -> [f64; 9] {
    let c = curvature_asd(spec, x);
    let d = a.dh(x);
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = 2.0 * (0..3).map(|k| c.0[j][k] * d.0[i][k]).sum::<f64>();
        }
    }
    out
}

fn to_matrix(v: &[f64; 9]) -> Matrix3 {
    Matrix3::from_row_slice(v).unwrap()
}

/// `m_ij = int_B ((dB_j)^-, (dh_{p,i})^-)`.
pub fn m_volume(spec: &BoundarySpec, p: &Point4, quad: &QuadratureSpec) -> Result<InteractionMatrix> {
    check_p(p, P_MAX_VOLUME)?;
    let a = AlphaField::new(p)?;
    let (r, _) = refine(|x| m_integrand(spec, &a, x), quad, Focus::for_point(p).as_ref(), true)?;
    let mut im = InteractionMatrix::from_matrix(to_matrix(&r.value), *p)?;
    im.est_rel_error = r.est_rel_error;
    im.nodes_used = r.nodes_used;
    im.converged = r.converged;
    Ok(im)
}

pub fn m_volume_with(spec: &BoundarySpec, p: &Point4, rule: &ProductRule) -> Result<Matrix3> {
    let a = AlphaField::new(p)?;
    Ok(to_matrix(&rule.integrate(|x| m_integrand(spec, &a, x))?))
}

fn qmul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

/// Boundary values `Im[(conj(y - p) dy)] / |y - p|^4`, expanded by
/// quaternion multiplication: entry `[l][b]` is the `dy^b` coefficient of
/// the `l`-th imaginary part.
pub fn boundary_h(p: &Point4, y: &Point4) -> [[f64; 4]; 3] {
    let d: Point4 = std::array::from_fn(|k| y[k] - p[k]);
    let r2 = dot4(&d, &d);
    let s = 1.0 / (r2 * r2);
    let conj = [d[0], -d[1], -d[2], -d[3]];
    let mut h = [[0.0; 4]; 3];
    for b in 0..4 {
        let mut e = [0.0; 4];
        e[b] = 1.0;
        let q = qmul(&conj, &e);
        for l in 0..3 {
            h[l][b] = q[l + 1] * s;
        }
    }
    h
}

/// `y . V` where the 3-form `w ^ h` equals `iota_V vol`.
fn wedge_normal(w: &TwoForm, h: &[f64; 4], y: &Point4) -> f64 {
    let g = |a: usize, b: usize, c: usize| w.get(a, b) * h[c] - w.get(a, c) * h[b] + w.get(b, c) * h[a];
    let v = [g(1, 2, 3), -g(0, 2, 3), g(0, 1, 3), -g(0, 1, 2)];
    dot4(&v, y)
}

/// `m_ij = -int_{S^3} (dB_j)^- ^ h_{p,i}`. Valid when `d (dB)^- = 0`,
/// i.e. the base has constant divergence.
pub fn m_boundary(spec: &BoundarySpec, p: &Point4, quad: &QuadratureSpec) -> Result<InteractionMatrix> {
    check_p(p, P_MAX_BOUNDARY)?;
    if !spec.is_coclosed() {
        return Err(Error::NotCoclosed);
    }
    let f = |y: &Point4| {
        let c = curvature_asd(spec, y);
        let h = boundary_h(p, y);
        let mut out = [0.0; 9];
        for j in 0..3 {
            let w = AsdCoeffs(c.0[j]).to_two_form();
            for i in 0..3 {
                out[3 * i + j] = -wedge_normal(&w, &h[i], y);
            }
        }
        out
    };
    let (r, _) = refine(f, quad, Focus::for_point(p).as_ref(), false)?;
    let mut im = InteractionMatrix::from_matrix(to_matrix(&r.value), *p)?;
    im.est_rel_error = r.est_rel_error;
    im.nodes_used = r.nodes_used;
    im.converged = r.converged;
    Ok(im)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gammas {
    pub g1p: f64,
    pub g1m: f64,
    pub g2p: f64,
    pub g2m: f64,
    pub g3m: f64,
    pub g10: f64,
    pub g20: f64,
}

impl Gammas {
    pub fn from_mu(mu: &[f64; 3]) -> Self {
        let [a, b, c] = sqrt_mu(mu);
        Gammas { g1p: a + b + c, g1m: a + b - c, g2p: a - b - c, g2m: a - b + c, g3m: -a + b + c, g10: a + b, g20: a - b }
    }

    fn over_f(&self, f: f64) -> Self {
        let g = |v: f64| v * v / f;
        Gammas {
            g1p: g(self.g1p),
            g1m: g(self.g1m),
            g2p: g(self.g2p),
            g2m: g(self.g2m),
            g3m: g(self.g3m),
            g10: g(self.g10),
            g20: g(self.g20),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSample {
    pub p: Point4,
    pub f: f64,
    pub m: InteractionMatrix,
    /// `Gamma` values; the `g10`, `g20` slots hold `sqrt(mu1) +- sqrt(mu2)`.
    pub gamma: Gammas,
    /// `G = Gamma^2 / F` for each slot.
    pub g: Gammas,
}

impl LandscapeSample {
    pub fn from_parts(p: Point4, f: f64, m: InteractionMatrix) -> Self {
        let gamma = Gammas::from_mu(&m.spectrum.mu);
        let g = gamma.over_f(f);
        LandscapeSample { p, f, m, gamma, g }
    }

    pub fn csv_row(&self) -> Vec<f64> {
        let mu = self.m.spectrum.mu;
        let (a, g) = (self.gamma, self.g);
        vec![
            self.p[0], self.p[1], self.p[2], self.p[3], self.f, mu[0], mu[1], mu[2], self.m.det_m, a.g1p, a.g1m, a.g2p, a.g2m,
            a.g3m, g.g1p, g.g1m, g.g2p, g.g2m, g.g3m, g.g10, g.g20,
        ]
    }
}

/// `M(B0(A), p) = M(A0, p) + pi^2 H(p) A`, with `M(A0, p)` integrated only
/// when the base is non-zero.
pub fn m_fast(spec: &BoundarySpec, p: &Point4, quad: &QuadratureSpec) -> Result<InteractionMatrix> {
    let h = crate::boundary::h_matrix(p)?.matrix();
    let synth = h * spec.synth.scale(std::f64::consts::PI.powi(2));
    if spec.base_is_zero() {
        return InteractionMatrix::from_matrix(synth, *p);
    }
    let mut base = m_volume(&spec.base_only(), p, quad)?;
    let m = base.m + synth;
    let fresh = InteractionMatrix::from_matrix(m, *p)?;
    base.m = m;
    base.spectrum = fresh.spectrum;
    base.det_m = fresh.det_m;
    Ok(base)
}

pub fn landscape_sample(spec: &BoundarySpec, p: &Point4, quad: &QuadratureSpec) -> Result<LandscapeSample> {
    let f = f_value(p, quad)?.value;
    let m = m_volume(spec, p, quad)?;
    Ok(LandscapeSample::from_parts(*p, f, m))
}

/// Regular grid over the box `[-r, r]^4`, `r = (1 - d0)/2`, which lies in
/// `B_{1-d0}`. Points in lexicographic order.
pub fn grid_points(n: usize, d0: f64) -> Vec<Point4> {
    let r = 0.5 * (1.0 - d0);
    let c = |k: usize| if n == 1 { 0.0 } else { -r + 2.0 * r * k as f64 / (n - 1) as f64 };
    let mut v = Vec::with_capacity(n.pow(4));
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for d in 0..n {
                    v.push([c(a), c(b), c(cc), c(d)]);
                }
            }
        }
    }
    v
}

pub fn scan(spec: &BoundarySpec, points: &[Point4], quad: &QuadratureSpec) -> Result<Vec<LandscapeSample>> {
    points.iter().map(|p| landscape_sample(spec, p, quad)).collect()
}

pub fn write_csv<W: std::io::Write>(w: W, samples: &[LandscapeSample]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for s in samples {
        wr.write_record(s.csv_row().iter().map(|v| format!("{v:.17e}")))?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum ProbeQuantity {
    F,
    GradF,
    /// Largest `|m_ij|`.
    MEntry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub constant: f64,
}

/// Least squares `log v = slope log d + log constant`.
pub fn fit_power_law(points: &[(f64, f64)]) -> AsymptoticFit {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(d, _)| d.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    AsymptoticFit { points: points.to_vec(), slope, constant: (my - slope * mx).exp() }
}

/// Evaluate `quantity` at `p = (1 - d) direction` along `d_list` and fit.
pub fn asymptotic_probe(
    quantity: ProbeQuantity,
    direction: &Point4,
    d_list: &[f64],
    spec: &BoundarySpec,
    quad: &QuadratureSpec,
) -> Result<AsymptoticFit> {
    let n = norm4(direction);
    if !(n > 0.0) {
        return Err(Error::Invalid("direction must be non-zero".into()));
    }
    if d_list.windows(2).any(|w| w[1] >= w[0]) || d_list.iter().any(|&d| !(d > 0.0 && d <= 0.5)) {
        return Err(Error::Invalid("d_list must decrease within (0, 0.5]".into()));
    }
    let u = direction.map(|v| v / n);
    let mut pts = Vec::with_capacity(d_list.len());
    for &d in d_list {
        let p = u.map(|v| (1.0 - d) * v);
        let v = match quantity {
            ProbeQuantity::F => f_value(&p, quad)?.value,
            ProbeQuantity::GradF => norm4(&f_grad(&p, quad)?),
            ProbeQuantity::MEntry => m_volume(spec, &p, quad)?.m.max_abs(),
        };
        pts.push((d, v));
    }
    Ok(fit_power_law(&pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn f_at_origin() {
        let f = f_value(&[0.0; 4], &QuadratureSpec::default()).unwrap();
        assert!((f.value - 12.0 * PI * PI).abs() < 1e-10 * f.value);
    }

    #[test]
    fn m_flat_identity_origin() {
        let s = BoundarySpec::flat(Matrix3::identity());
        let m = m_volume(&s, &[0.0; 4], &QuadratureSpec::default()).unwrap();
        assert!((m.m - Matrix3::identity().scale(2.0 * PI * PI)).max_abs() < 1e-10);
        let b = m_boundary(&s, &[0.0; 4], &QuadratureSpec::default()).unwrap();
        assert!((b.m - m.m).max_abs() < 1e-10, "{:?}", b.m);
    }

    #[test]
    fn boundary_h_matches_closed_trace() {
        let p = [0.2, 0.0, 0.0, 0.0];
        let y = [0.5, -0.5, 0.5, 0.5];
        let h = AlphaField::new(&p).unwrap().h(&y);
        let b = boundary_h(&p, &y);
        for l in 0..3 {
            for k in 0..4 {
                assert!((h[l][k] - b[l][k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn power_fit_exact() {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05].iter().map(|&d: &f64| (d, 3.0 * d.powi(-4))).collect();
        let f = fit_power_law(&pts);
        assert!((f.slope + 4.0).abs() < 1e-12 && (f.constant - 3.0).abs() < 1e-10);
    }
}
