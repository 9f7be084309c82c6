//! Boundary connections: a harmonic-polynomial base `A0` plus the family
//! `B0(A)_l = A0_l + sum_k a_{kl} beta_k`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::forms::{asd_project, TwoForm};
use crate::harmonic::AlphaField;
use crate::linalg::{sym_eigen, Matrix3};
use crate::quadrature::QuadratureSpec;
use crate::{Error, Point4, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub mono: [u32; 4],
    pub coef: f64,
}

/// Four polynomial components, the coefficients of `dx^1..dx^4`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HarmonicPolyOneForm {
    pub comps: [Vec<Monomial>; 4],
}

fn eval_poly(terms: &[Monomial], x: &Point4) -> (f64, [f64; 4]) {
    let mut v = 0.0;
    let mut g = [0.0; 4];
    for t in terms {
        let pw: [f64; 4] = std::array::from_fn(|k| x[k].powi(t.mono[k] as i32));
        v += t.coef * pw[0] * pw[1] * pw[2] * pw[3];
        for j in 0..4 {
            let e = t.mono[j];
            if e == 0 {
                continue;
            }
            let mut prod = t.coef * e as f64 * x[j].powi(e as i32 - 1);
            for k in 0..4 {
                if k != j {
                    prod *= pw[k];
                }
            }
            g[j] += prod;
        }
    }
    (v, g)
}

fn collect(terms: impl Iterator<Item = ([u32; 4], f64)>) -> BTreeMap<[u32; 4], f64> {
    let mut m = BTreeMap::new();
    for (e, c) in terms {
        *m.entry(e).or_insert(0.0) += c;
    }
    m
}

fn laplacian_terms(terms: &[Monomial]) -> BTreeMap<[u32; 4], f64> {
    collect(terms.iter().flat_map(|t| {
        (0..4).filter(|&j| t.mono[j] >= 2).map(move |j| {
            let mut e = t.mono;
            e[j] -= 2;
            (e, t.coef * (t.mono[j] * (t.mono[j] - 1)) as f64)
        })
    }))
}

fn derivative_terms(terms: &[Monomial], j: usize) -> impl Iterator<Item = ([u32; 4], f64)> + '_ {
    terms.iter().filter(move |t| t.mono[j] >= 1).map(move |t| {
        let mut e = t.mono;
        e[j] -= 1;
        (e, t.coef * t.mono[j] as f64)
    })
}

fn negligible(m: &BTreeMap<[u32; 4], f64>, scale: f64) -> bool {
    m.values().all(|c| c.abs() <= 1e-12 * scale.max(1.0))
}

impl HarmonicPolyOneForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|t| t.coef == 0.0))
    }

    fn scale(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, t| m.max(t.coef.abs()))
    }

    /// Coefficient-level Laplacian check; returns the offending component.
    pub fn check_harmonic(&self) -> std::result::Result<(), usize> {
        let s = self.scale();
        for (j, c) in self.comps.iter().enumerate() {
            if !negligible(&laplacian_terms(c), s) {
                return Err(j);
            }
        }
        Ok(())
    }

    /// True when the divergence is a constant polynomial.
    pub fn has_constant_divergence(&self) -> bool {
        let div = collect((0..4).flat_map(|j| derivative_terms(&self.comps[j], j)));
        let nonconst: BTreeMap<_, _> = div.into_iter().filter(|(e, _)| e.iter().any(|&k| k > 0)).collect();
        negligible(&nonconst, self.scale())
    }

    pub fn eval(&self, x: &Point4) -> [f64; 4] {
        std::array::from_fn(|j| eval_poly(&self.comps[j], x).0)
    }

    /// `jac[b][a] = d A_b / d x_a`.
    pub fn jacobian(&self, x: &Point4) -> [[f64; 4]; 4] {
        std::array::from_fn(|b| eval_poly(&self.comps[b], x).1)
    }

    /// `beta_k` as a polynomial 1-form.
    pub fn beta(k: usize) -> Result<Self> {
        let m = |e: [u32; 4], c: f64| vec![Monomial { mono: e, coef: c }];
        let (x1, x2, x3) = ([1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]);
        let comps = match k {
            1 => [vec![], m(x1, 1.0), vec![], m(x3, -1.0)],
            2 => [vec![], vec![], m(x1, 1.0), m(x2, 1.0)],
            3 => [vec![], vec![], m(x2, -1.0), m(x1, 1.0)],
            _ => return Err(Error::Index(k)),
        };
        Ok(HarmonicPolyOneForm { comps })
    }

    /// Random components of degree at most 2: constant + linear + a
    /// traceless quadratic form, coefficients uniform in `[-scale, scale]`.
    pub fn random_quadratic<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Self {
        let mut comps: [Vec<Monomial>; 4] = Default::default();
        for c in comps.iter_mut() {
            let mut u = || rng.random_range(-scale..scale);
            c.push(Monomial { mono: [0; 4], coef: u() });
            for i in 0..4 {
                let mut e = [0; 4];
                e[i] = 1;
                c.push(Monomial { mono: e, coef: u() });
            }
            let mut diag = [u(), u(), u(), 0.0];
            diag[3] = -(diag[0] + diag[1] + diag[2]);
            for i in 0..4 {
                let mut e = [0; 4];
                e[i] = 2;
                c.push(Monomial { mono: e, coef: diag[i] });
                for j in (i + 1)..4 {
                    let mut e = [0; 4];
                    e[i] = 1;
                    e[j] = 1;
                    c.push(Monomial { mono: e, coef: u() });
                }
            }
        }
        HarmonicPolyOneForm { comps }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySpec {
    base: [HarmonicPolyOneForm; 3],
    /// The synthesis matrix.
    pub synth: Matrix3,
}

#[derive(Serialize, Deserialize)]
struct SpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    version: Option<u32>,
    base: Vec<HarmonicPolyOneForm>,
    #[serde(rename = "A")]
    a: Matrix3,
}

impl BoundarySpec {
    pub fn new(base: [HarmonicPolyOneForm; 3], synth: Matrix3) -> Result<Self> {
        for (l, b) in base.iter().enumerate() {
            if let Err(c) = b.check_harmonic() {
                return Err(Error::NotHarmonic { lie: l + 1, coord: c + 1 });
            }
        }
        Ok(BoundarySpec { base, synth })
    }

    /// Zero base connection; only the synthesis matrix.
    pub fn flat(synth: Matrix3) -> Self {
        BoundarySpec { base: Default::default(), synth }
    }

    pub fn base(&self) -> &[HarmonicPolyOneForm; 3] {
        &self.base
    }

    pub fn base_is_zero(&self) -> bool {
        self.base.iter().all(|b| b.is_zero())
    }

    pub fn with_synth(&self, synth: Matrix3) -> Self {
        BoundarySpec { base: self.base.clone(), synth }
    }

    pub fn base_only(&self) -> Self {
        self.with_synth(Matrix3::zeros())
    }

    /// The boundary integral for `M` needs `d (dA)^- = 0`, which for a
    /// harmonic base means constant divergence.
    pub fn is_coclosed(&self) -> bool {
        self.base.iter().all(|b| b.has_constant_divergence())
    }

    /// The three 1-forms `B0(A)_l` at `x`.
    pub fn connection(&self, x: &Point4) -> [[f64; 4]; 3] {
        let betas = [
            crate::forms::beta(1, x).unwrap(),
            crate::forms::beta(2, x).unwrap(),
            crate::forms::beta(3, x).unwrap(),
        ];
        std::array::from_fn(|l| {
            let mut v = self.base[l].eval(x);
            for k in 0..3 {
                for b in 0..4 {
                    v[b] += self.synth.0[k][l] * betas[k][b];
                }
            }
            v
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: SpecFile = serde_json::from_str(s)?;
        if f.base.len() != 3 {
            return Err(Error::Invalid(format!("base must have 3 Lie components, got {}", f.base.len())));
        }
        let [a, b, c]: [HarmonicPolyOneForm; 3] = f.base.try_into().unwrap();
        Self::new([a, b, c], f.a)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let f = SpecFile { version: Some(SCHEMA_VERSION), base: self.base.to_vec(), a: self.synth };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }
}

/// ASD coefficients of `d B0(A)_l`; row `l` is the Lie index, column `k`
/// the coefficient of `w_k`.
pub fn curvature_asd(spec: &BoundarySpec, x: &Point4) -> Matrix3 {
    let mut c = Matrix3::zeros();
    for l in 0..3 {
        if !spec.base[l].is_zero() {
            let d = TwoForm::d_of_oneform(&spec.base[l].jacobian(x));
            c.0[l] = asd_project(&d).0;
        }
        for k in 0..3 {
            c.0[l][k] += spec.synth.0[k][l];
        }
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HMatrix {
    pub h0: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

impl HMatrix {
    pub fn matrix(&self) -> Matrix3 {
        let HMatrix { h0, h1, h2, h3 } = *self;
        Matrix3([[h0, h1, h2], [-h1, h0, h3], [-h2, -h3, h0]])
    }

    pub fn det(&self) -> f64 {
        let HMatrix { h0, h1, h2, h3 } = *self;
        h0 * (h0 * h0 + h1 * h1 + h2 * h2 + h3 * h3)
    }
}

/// `H(p)` from the gradients of `alpha_p` at the origin.
pub fn h_matrix(p: &Point4) -> Result<HMatrix> {
    let g = AlphaField::new(p)?.grad(&[0.0; 4]);
    Ok(HMatrix {
        h0: 0.5 * (g[0][0] + g[1][1] + g[2][2] + g[3][3]),
        h1: 0.5 * (-g[0][3] + g[1][2] - g[2][1] + g[3][0]),
        h2: 0.5 * (g[0][2] + g[1][3] - g[2][0] - g[3][1]),
        h3: 0.5 * (-g[0][1] + g[1][0] + g[2][3] - g[3][2]),
    })
}

fn pi2_h_inverse(p: &Point4) -> Result<Matrix3> {
    let h = h_matrix(p)?.matrix().scale(std::f64::consts::PI.powi(2));
    h.inverse().ok_or_else(|| Error::Hypothesis("H(p) singular".into()))
}

/// Pick `A` so that `M(B0(A), p0) = target` for the given base.
pub fn synthesize(
    target: &Matrix3,
    p0: &Point4,
    base: [HarmonicPolyOneForm; 3],
    quad: &QuadratureSpec,
) -> Result<BoundarySpec> {
    let spec = BoundarySpec::new(base, Matrix3::zeros())?;
    let m_base = if spec.base_is_zero() {
        Matrix3::zeros()
    } else {
        crate::landscape::m_volume(&spec, p0, quad)?.m
    };
    let a = pi2_h_inverse(p0)? * (*target - m_base);
    Ok(spec.with_synth(a))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Perturbation {
    pub regularized: bool,
    pub mu_before: [f64; 3],
    pub mu_after: [f64; 3],
    pub gaps: [f64; 2],
    pub m_after: Matrix3,
}

/// Shift `A` so the spectrum of `M^t M` at `p0` separates, following
/// `X = (M^t)^{-1} Q diag(3mu, 2mu, mu) Q^{-1}`.
pub fn perturb_nondegenerate(
    spec: &BoundarySpec,
    p0: &Point4,
    mu: f64,
    quad: &QuadratureSpec,
) -> Result<(BoundarySpec, Perturbation)> {
    if !(mu > 0.0) {
        return Err(Error::Invalid(format!("mu must be positive, got {mu}")));
    }
    let inv = pi2_h_inverse(p0)?;
    let mut spec = spec.clone();
    let mut m = crate::landscape::m_volume(&spec, p0, quad)?.m;
    let mu_before = sym_eigen(&(m.transpose() * m))?.mu;
    let regularized = crate::landscape::det_is_zero(&m);
    if regularized {
        spec.synth = spec.synth + inv.scale(1e-8);
        m = m + Matrix3::identity().scale(1e-8);
    }
    let spec_q = sym_eigen(&(m.transpose() * m))?;
    let q = spec_q.q;
    let mt_inv = m.transpose().inverse().ok_or_else(|| Error::Hypothesis("M singular after regularization".into()))?;
    let x = mt_inv * q * Matrix3::diag([3.0 * mu, 2.0 * mu, mu]) * q.transpose();
    spec.synth = spec.synth + inv * x;
    let m_after = m + x;
    let mu_after = sym_eigen(&(m_after.transpose() * m_after))?.mu;
    let gaps = [mu_after[0] - mu_after[1], mu_after[1] - mu_after[2]];
    Ok((spec, Perturbation { regularized, mu_before, mu_after, gaps, m_after }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn flat_identity_curvature() {
        let s = BoundarySpec::flat(Matrix3::identity());
        let c = curvature_asd(&s, &[0.3, -0.1, 0.2, 0.5]);
        assert_eq!(c, Matrix3::identity());
    }

    #[test]
    fn beta_base_row() {
        let base = [HarmonicPolyOneForm::beta(1).unwrap(), HarmonicPolyOneForm::zero(), HarmonicPolyOneForm::zero()];
        let s = BoundarySpec::new(base, Matrix3::zeros()).unwrap();
        let c = curvature_asd(&s, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(c.0[0], [1.0, 0.0, 0.0]);
        assert_eq!(c.0[1], [0.0; 3]);
        assert!(s.is_coclosed());
    }

    #[test]
    fn rejects_non_harmonic() {
        let mut b = HarmonicPolyOneForm::zero();
        b.comps[2].push(Monomial { mono: [2, 0, 0, 0], coef: 1.0 });
        let e = BoundarySpec::new([HarmonicPolyOneForm::zero(), b, HarmonicPolyOneForm::zero()], Matrix3::zeros());
        assert!(matches!(e, Err(Error::NotHarmonic { lie: 2, coord: 3 })));
    }

    #[test]
    fn random_quadratic_is_harmonic_and_fd_curvature() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let base = std::array::from_fn(|_| HarmonicPolyOneForm::random_quadratic(&mut rng, 1.0));
        let a = Matrix3([[0.2, -0.1, 0.0], [0.3, 0.5, 0.1], [0.0, 0.4, -0.2]]);
        let s = BoundarySpec::new(base, a).unwrap();
        let x = [0.2, -0.3, 0.1, 0.4];
        let c = curvature_asd(&s, &x);
        let h = 1e-5;
        for l in 0..3 {
            let mut jac = [[0.0; 4]; 4];
            for a in 0..4 {
                let (mut xp, mut xm) = (x, x);
                xp[a] += h;
                xm[a] -= h;
                let (fp, fm) = (s.connection(&xp)[l], s.connection(&xm)[l]);
                for b in 0..4 {
                    jac[b][a] = (fp[b] - fm[b]) / (2.0 * h);
                }
            }
            let fd = asd_project(&TwoForm::d_of_oneform(&jac));
            for k in 0..3 {
                assert!((fd.0[k] - c.0[l][k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let base = std::array::from_fn(|_| HarmonicPolyOneForm::random_quadratic(&mut rng, 0.5));
        let s = BoundarySpec::new(base, Matrix3::diag([1.0, 2.0, 3.0])).unwrap();
        let back = BoundarySpec::from_json_str(&s.to_json_string().unwrap()).unwrap();
        assert_eq!(s, back);
        let txt = r#"{"base": [[[],[],[],[]],[[],[],[],[]],[[],[],[],[{"mono":[2,0,0,0],"coef":1.0}]]], "A": [[1,0,0],[0,1,0],[0,0,1]]}"#;
        assert!(BoundarySpec::from_json_str(txt).is_err());
    }

    #[test]
    fn h_at_origin_and_det() {
        let h = h_matrix(&[0.0; 4]).unwrap();
        assert_eq!(h.matrix(), Matrix3::identity().scale(2.0));
        let h = h_matrix(&[0.3, -0.5, 0.2, 0.6]).unwrap();
        assert!((h.matrix().det() - h.det()).abs() < 1e-12 * h.det());
        let d = crate::harmonic::dh_asd(&[0.3, -0.5, 0.2, 0.6], &[0.0; 4]).unwrap();
        assert!((d - h.matrix()).max_abs() < 1e-12);
    }
}
