//! CASK-domain geometry: prepotential, τ-matrix, Kähler potential r², central
//! charge, the projective special Kähler quotient and the semi-flat Kähler
//! forms on the torus fibration.
//!
//! A CASK domain is a ℂ×-invariant domain M ⊂ ℂ^{n+1}∖{0} with a holomorphic
//! prepotential 𝔉, homogeneous of degree 2, such that N = Im ∂²𝔉 has
//! signature (1, n) and N_ij zⁱz̄ʲ > 0 on M. Holomorphic coordinates are the
//! central charges of the electric frame, zⁱ = Z_{γⁱ}, with conjugate
//! coordinates w_i = ∂𝔉/∂zⁱ = τ_ij zʲ.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forms::{c64, re_checked, C64, CMat, CVec, RMat};
use crate::hk::{NChart, TorusPoint};
use crate::lattice::ChargeVector;

/// Analytic prepotential evaluator supplying first and second derivatives.
/// Third derivatives are never required; exterior-derivative checks are
/// finite-difference on components.
pub trait PrepotentialFn: Send + Sync {
    /// Complex dimension n+1 of the ambient space.
    fn dim(&self) -> usize;
    fn eval(&self, z: &CVec) -> C64;
    /// w_i = ∂𝔉/∂zⁱ.
    fn grad(&self, z: &CVec) -> CVec;
    /// τ_ij = ∂²𝔉/∂zⁱ∂zʲ.
    fn hessian(&self, z: &CVec) -> CMat;
    fn name(&self) -> &str {
        "plugin"
    }
}

/// Prepotential descriptor: a constant quadratic form ½ τ_ij zⁱzʲ or a plugin.
#[derive(Clone)]
pub enum Prepotential {
    Quadratic { tau: CMat },
    Plugin(Arc<dyn PrepotentialFn>),
}

impl Prepotential {
    pub fn quadratic(tau: CMat) -> Result<Self> {
        if tau.nrows() != tau.ncols() {
            return Err(Error::Config("tau must be square".into()));
        }
        for i in 0..tau.nrows() {
            for j in 0..i {
                if (tau[(i, j)] - tau[(j, i)]).norm() > 1e-14 {
                    return Err(Error::Config(format!(
                        "tau must be symmetric; entry ({i}, {j}) differs"
                    )));
                }
            }
        }
        Ok(Self::Quadratic { tau })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic { tau } => tau.nrows(),
            Self::Plugin(p) => p.dim(),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, Self::Quadratic { .. })
    }

    pub fn eval(&self, z: &CVec) -> C64 {
        match self {
            Self::Quadratic { tau } => (z.transpose() * tau * z)[(0, 0)] * 0.5,
            Self::Plugin(p) => p.eval(z),
        }
    }

    pub fn grad(&self, z: &CVec) -> CVec {
        match self {
            Self::Quadratic { tau } => tau * z,
            Self::Plugin(p) => p.grad(z),
        }
    }

    pub fn tau(&self, z: &CVec) -> CMat {
        match self {
            Self::Quadratic { tau } => tau.clone(),
            Self::Plugin(p) => p.hessian(z),
        }
    }
}

impl std::fmt::Debug for Prepotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Quadratic { tau } => write!(f, "Quadratic(dim {})", tau.nrows()),
            Self::Plugin(p) => write!(f, "Plugin({})", p.name()),
        }
    }
}

/// Membership tests for the domain M; all listed predicates must hold.
#[derive(Clone)]
pub enum DomainPredicate {
    /// |z⁰|² > Σ_{i≥1} |zⁱ|², the complex-hyperbolic ball model domain.
    ChnBall,
    /// |z⁰| > K, the truncation that restores compatibility at small radius.
    AbsZ0Above(f64),
    Custom(Arc<dyn Fn(&CVec) -> bool + Send + Sync>),
}

impl std::fmt::Debug for DomainPredicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ChnBall => write!(f, "ChnBall"),
            Self::AbsZ0Above(k) => write!(f, "AbsZ0Above({k})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl DomainPredicate {
    fn holds(&self, z: &CVec) -> bool {
        match self {
            Self::ChnBall => {
                let head = z[0].norm_sqr();
                let rest: f64 = (1..z.len()).map(|i| z[i].norm_sqr()).sum();
                head > rest
            }
            Self::AbsZ0Above(k) => z[0].norm() > *k,
            Self::Custom(f) => f(z),
        }
    }
}

/// CASK domain: prepotential + membership predicate + the one-loop constant c.
#[derive(Debug, Clone)]
pub struct CaskDomain {
    prepotential: Prepotential,
    n: usize,
    predicates: Vec<DomainPredicate>,
    pub one_loop_c: f64,
}

impl CaskDomain {
    pub fn new(
        prepotential: Prepotential,
        predicates: Vec<DomainPredicate>,
        one_loop_c: f64,
    ) -> Result<Self> {
        let m = prepotential.dim();
        if m == 0 {
            return Err(Error::Config("prepotential dimension must be positive".into()));
        }
        Ok(Self {
            prepotential,
            n: m - 1,
            predicates,
            one_loop_c,
        })
    }

    /// The ℂHⁿ family: 𝔉 = (i/2)((z⁰)² − Σ (zⁱ)²), domain |z⁰|² > Σ|zⁱ|²,
    /// optionally truncated to |z⁰| > K.
    pub fn chn(n: usize, c: f64, k: Option<f64>) -> Self {
        let m = n + 1;
        let mut tau = CMat::zeros(m, m);
        tau[(0, 0)] = c64(0.0, 1.0);
        for i in 1..m {
            tau[(i, i)] = c64(0.0, -1.0);
        }
        let mut predicates = vec![DomainPredicate::ChnBall];
        if let Some(k) = k {
            predicates.push(DomainPredicate::AbsZ0Above(k));
        }
        Self {
            prepotential: Prepotential::Quadratic { tau },
            n,
            predicates,
            one_loop_c: c,
        }
    }

    /// Same geometry as [`CaskDomain::chn`] but exercised through the plugin
    /// interface, for testing the plugin code paths.
    pub fn chn_plugin(n: usize, c: f64, k: Option<f64>) -> Self {
        struct ChnPrepotential {
            m: usize,
        }
        impl PrepotentialFn for ChnPrepotential {
            fn dim(&self) -> usize {
                self.m
            }
            fn eval(&self, z: &CVec) -> C64 {
                let mut s = z[0] * z[0];
                for i in 1..self.m {
                    s -= z[i] * z[i];
                }
                c64(0.0, 0.5) * s
            }
            fn grad(&self, z: &CVec) -> CVec {
                CVec::from_fn(self.m, |i, _| {
                    if i == 0 {
                        c64(0.0, 1.0) * z[0]
                    } else {
                        c64(0.0, -1.0) * z[i]
                    }
                })
            }
            fn hessian(&self, _z: &CVec) -> CMat {
                let mut tau = CMat::zeros(self.m, self.m);
                tau[(0, 0)] = c64(0.0, 1.0);
                for i in 1..self.m {
                    tau[(i, i)] = c64(0.0, -1.0);
                }
                tau
            }
            fn name(&self) -> &str {
                "chn"
            }
        }
        let mut predicates = vec![DomainPredicate::ChnBall];
        if let Some(k) = k {
            predicates.push(DomainPredicate::AbsZ0Above(k));
        }
        Self {
            prepotential: Prepotential::Plugin(Arc::new(ChnPrepotential { m: n + 1 })),
            n,
            predicates,
            one_loop_c: c,
        }
    }

    pub fn prepotential(&self) -> &Prepotential {
        &self.prepotential
    }

    /// n, with dim_ℂ M = n + 1.
    pub fn n(&self) -> usize {
        self.n
    }

    /// m = n + 1, half the lattice rank.
    pub fn m(&self) -> usize {
        self.n + 1
    }

    pub fn chart(&self) -> NChart {
        NChart::new(self.m())
    }

    pub fn contains(&self, z: &CVec) -> bool {
        z.len() == self.m()
            && z.iter().any(|v| v.norm() > 0.0)
            && self.predicates.iter().all(|p| p.holds(z))
    }

    pub fn check_point(&self, z: &CVec) -> Result<()> {
        if z.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: z.len(),
            });
        }
        if !self.contains(z) {
            return Err(Error::DomainViolation(format!(
                "point fails the domain predicate: {z:?}"
            )));
        }
        Ok(())
    }

    /// τ_ij = ∂²𝔉/∂zⁱ∂zʲ at z; symmetric, constant for the quadratic kind.
    pub fn tau_matrix(&self, z: &CVec) -> Result<CMat> {
        self.check_point(z)?;
        Ok(self.prepotential.tau(z))
    }

    /// N_ij = Im τ_ij; validates the (1, n) signature.
    pub fn n_matrix(&self, z: &CVec) -> Result<RMat> {
        let tau = self.tau_matrix(z)?;
        let n = tau.map(|v| v.im);
        let ev = crate::forms::symmetric_eigenvalues(&n);
        let (pos, neg, _) = crate::forms::signature(&ev, 1e-12);
        if pos != 1 || neg != self.n {
            return Err(Error::WrongSignature { pos, neg });
        }
        Ok(n)
    }

    /// r² = N_ij zⁱz̄ʲ = g(ξ, ξ) > 0.
    pub fn cask_potential_r2(&self, z: &CVec) -> Result<f64> {
        let n = self.n_matrix(z)?;
        let r2 = hermitian_value(&n, z, z);
        if r2 <= 0.0 {
            return Err(Error::DomainViolation(format!(
                "r^2 = {r2:.6e} is not positive"
            )));
        }
        Ok(r2)
    }

    /// Z_γ = nⁱ(γ) w_i + n_i(γ) zⁱ for γ = nⁱ γ̃_i + n_i γⁱ.
    pub fn central_charge(&self, z: &CVec, gamma: &ChargeVector) -> Result<C64> {
        self.check_point(z)?;
        let m = self.m();
        if gamma.dim() != 2 * m {
            return Err(Error::DimensionMismatch {
                expected: 2 * m,
                got: gamma.dim(),
            });
        }
        let w = self.prepotential.grad(z);
        let mut acc = c64(0.0, 0.0);
        for i in 0..m {
            acc += c64(gamma.coeff_f64(i), 0.0) * w[i];
            acc += c64(gamma.coeff_f64(m + i), 0.0) * z[i];
        }
        Ok(acc)
    }

    /// τ̂(X) = τ(1, X¹..Xⁿ); τ is degree-0 homogeneous so this fixes the scale.
    pub fn tau_hat(&self, x: &CVec) -> Result<CMat> {
        let z = embed_affine(x);
        Ok(self.prepotential.tau(&z))
    }

    /// N̂(X) = Im τ̂(X).
    pub fn n_hat(&self, x: &CVec) -> Result<RMat> {
        Ok(self.tau_hat(x)?.map(|v| v.im))
    }

    /// S(X) = N̂_ij XⁱX̄ʲ with X⁰ = 1; e^{-𝒦}.
    pub fn psk_s(&self, x: &CVec) -> Result<f64> {
        let z = embed_affine(x);
        let n = self.n_hat(x)?;
        let s = hermitian_value(&n, &z, &z);
        if s <= 0.0 {
            return Err(Error::DomainViolation(format!(
                "Kähler potential argument N_ij X^i conj(X^j) = {s:.6e} is not positive"
            )));
        }
        Ok(s)
    }

    /// 𝒦(X) = −log S(X), the PSK Kähler potential.
    pub fn kahler_potential(&self, x: &CVec) -> Result<f64> {
        Ok(-self.psk_s(x)?.ln())
    }

    /// (𝒦, g_psk) with g_psk the Hermitian n×n matrix ∂²𝒦/∂Xᵃ∂X̄ᵇ.
    ///
    /// For the quadratic kind the derivative is closed-form; plugins are
    /// differentiated numerically.
    pub fn psk_data(&self, x: &CVec) -> Result<(f64, CMat)> {
        let kp = self.kahler_potential(x)?;
        let n = self.n();
        let g = if self.prepotential.is_quadratic() {
            let s = self.psk_s(x)?;
            let nm = self.n_hat(x)?;
            let z = embed_affine(x);
            let nxbar = complex_matvec(&nm, &z.map(|v| v.conj())); // (N X̄)_a
            let nx = complex_matvec(&nm, &z); // (N X)_a
            CMat::from_fn(n, n, |a, b| {
                -c64(nm[(a + 1, b + 1)], 0.0) / s + nxbar[a + 1] * nx[b + 1] / (s * s)
            })
        } else {
            self.psk_metric_fd(x)?
        };
        Ok((kp, g))
    }

    fn psk_metric_fd(&self, x: &CVec) -> Result<CMat> {
        let n = self.n();
        // ∂𝒦/∂Xᵃ = −(N̂(X)X̄)_a/S holds for every degree-2 homogeneous
        // prepotential (the third-derivative contraction with z vanishes), so
        // only one numerical derivative is needed for the Hessian.
        let grad = |xx: &CVec| -> Result<CVec> {
            let s = self.psk_s(xx)?;
            let nm = self.n_hat(xx)?;
            let z = embed_affine(xx);
            let nxbar = complex_matvec(&nm, &z.map(|v| v.conj()));
            Ok(CVec::from_fn(n, |a, _| -nxbar[a + 1] / s))
        };
        let mut g = CMat::zeros(n, n);
        for b in 0..n {
            let sr = crate::forms::fd_step(x[b].re.max(0.1), 1e-5);
            let si = crate::forms::fd_step(x[b].im.max(0.1), 1e-5);
            let shift = |d: C64| -> CVec {
                let mut xx = x.clone();
                xx[b] += d;
                xx
            };
            let dre = (grad(&shift(c64(sr, 0.0)))? - grad(&shift(c64(-sr, 0.0)))?) / c64(2.0 * sr, 0.0);
            let dim = (grad(&shift(c64(0.0, si)))? - grad(&shift(c64(0.0, -si)))?) / c64(2.0 * si, 0.0);
            // ∂̄_b = ½(∂_Re + i ∂_Im)
            for a in 0..n {
                g[(a, b)] = (dre[a] + c64(0.0, 1.0) * dim[a]) * 0.5;
            }
        }
        Ok(g)
    }

    /// ∂𝒦/∂Xᵃ for a = 1..n. Closed-form for the quadratic kind, central
    /// differences for plugins.
    pub fn dk_dx(&self, x: &CVec) -> Result<CVec> {
        let n = self.n();
        if self.prepotential.is_quadratic() {
            let s = self.psk_s(x)?;
            let nm = self.n_hat(x)?;
            let z = embed_affine(x);
            let nxbar = complex_matvec(&nm, &z.map(|v| v.conj()));
            Ok(CVec::from_fn(n, |a, _| -nxbar[a + 1] / s))
        } else {
            let h = 1e-5;
            let mut out = CVec::zeros(n);
            for a in 0..n {
                let sr = crate::forms::fd_step(x[a].re, h);
                let si = crate::forms::fd_step(x[a].im, h);
                let shift = |da: C64| -> CVec {
                    let mut xx = x.clone();
                    xx[a] += da;
                    xx
                };
                let dre = (self.kahler_potential(&shift(c64(sr, 0.0)))?
                    - self.kahler_potential(&shift(c64(-sr, 0.0)))?)
                    / (2.0 * sr);
                let dim = (self.kahler_potential(&shift(c64(0.0, si)))?
                    - self.kahler_potential(&shift(c64(0.0, -si)))?)
                    / (2.0 * si);
                out[a] = c64(0.5 * dre, -0.5 * dim);
            }
            Ok(out)
        }
    }

    /// Numerical sanity checks on the prepotential at a sample point:
    /// degree-2 homogeneity, the Euler identity w = τz, ℂ×-invariance of the
    /// domain, and the (1, n) signature.
    pub fn validate_at(&self, z: &CVec) -> Result<()> {
        self.check_point(z)?;
        self.n_matrix(z)?;
        self.cask_potential_r2(z)?;
        let f = self.prepotential.eval(z);
        for lambda in [c64(1.7, 0.0), c64(0.8, 0.6), c64(0.0, 1.3)] {
            let zs = z.map(|v| v * lambda);
            let fs = self.prepotential.eval(&zs);
            let want = lambda * lambda * f;
            if (fs - want).norm() > 1e-10 * want.norm().max(1e-10) {
                return Err(Error::DomainViolation(format!(
                    "prepotential is not degree-2 homogeneous: F(lambda z) = {fs}, lambda^2 F(z) = {want}"
                )));
            }
            if !self.contains(&zs) {
                return Err(Error::DomainViolation(
                    "domain is not C^x-invariant at the sample point".into(),
                ));
            }
        }
        let w = self.prepotential.grad(z);
        let tz = self.prepotential.tau(z) * z;
        let scale = w.iter().fold(0.0f64, |a, v| a.max(v.norm())).max(1e-10);
        for i in 0..self.m() {
            if (w[i] - tz[i]).norm() > 1e-10 * scale {
                return Err(Error::DomainViolation(format!(
                    "Euler identity w_i = tau_ij z^j fails at component {i}"
                )));
            }
        }
        Ok(())
    }
}

/// (1, X¹..Xⁿ) from the inhomogeneous coordinates.
pub fn embed_affine(x: &CVec) -> CVec {
    let n = x.len();
    CVec::from_fn(n + 1, |i, _| if i == 0 { c64(1.0, 0.0) } else { x[i - 1] })
}

/// Re Σ m_ij a_i conj(b_j) for a real symmetric m.
pub fn hermitian_value(m: &RMat, a: &CVec, b: &CVec) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                acc += m[(i, j)] * (a[i] * b[j].conj()).re;
            }
        }
    }
    acc
}

fn complex_matvec(m: &RMat, v: &CVec) -> CVec {
    CVec::from_fn(m.nrows(), |i, _| {
        let mut acc = c64(0.0, 0.0);
        for j in 0..m.ncols() {
            acc += c64(m[(i, j)], 0.0) * v[j];
        }
        acc
    })
}

/// Semi-flat Kähler forms (ω₁^sf, ω₂^sf, ω₃^sf) in the real chart
/// (x, u, θ̃, θ):
///
///   ω₁^sf + iω₂^sf = (1/2π) dZⁱ ∧ (dθ̃_i − τ_ij dθʲ)
///   ω₃^sf = N_ij dxⁱ∧duʲ − (1/4π²) dθ̃_i∧dθⁱ
pub fn semiflat_forms(dom: &CaskDomain, p: &TorusPoint) -> Result<[RMat; 3]> {
    let m = dom.m();
    let chart = dom.chart();
    let z = p.base();
    let tau = dom.tau_matrix(z)?;
    let nm = dom.n_matrix(z)?;

    let mut varpi = CMat::zeros(chart.dim(), chart.dim());
    for i in 0..m {
        let dz = chart.dz(i);
        let mut w = chart.dtheta_tilde_c(i);
        for j in 0..m {
            w -= chart.dtheta_c(j) * tau[(i, j)];
        }
        varpi += crate::forms::wedge(&dz, &w).unscale(2.0 * std::f64::consts::PI);
    }
    let omega1 = varpi.map(|v| v.re);
    let omega2 = varpi.map(|v| v.im);

    let mut omega3 = RMat::zeros(chart.dim(), chart.dim());
    let quarter_pi2 = 1.0 / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
    for i in 0..m {
        for j in 0..m {
            omega3[(chart.idx_x(i), chart.idx_u(j))] += nm[(i, j)];
            omega3[(chart.idx_u(j), chart.idx_x(i))] -= nm[(i, j)];
        }
        omega3[(chart.idx_tt(i), chart.idx_th(i))] -= quarter_pi2;
        omega3[(chart.idx_th(i), chart.idx_tt(i))] += quarter_pi2;
    }
    Ok([omega1, omega2, omega3])
}

/// Consistency route for ω₃^sf through the fiber-frame expansion
/// (i/2) N dZ∧dZ̄ + (i/8π²) N⁻¹ W∧W̄; used by tests as a second derivation.
pub fn semiflat_omega3_fiber_route(dom: &CaskDomain, p: &TorusPoint) -> Result<RMat> {
    let m = dom.m();
    let chart = dom.chart();
    let z = p.base();
    let tau = dom.tau_matrix(z)?;
    let nm = dom.n_matrix(z)?;
    let ninv = crate::forms::inverse_with_guard(&nm, 1e12)?;

    let mut acc = CMat::zeros(chart.dim(), chart.dim());
    let half_i = c64(0.0, 0.5);
    for i in 0..m {
        for j in 0..m {
            let dz = chart.dz(i);
            let dzbar = chart.dz(j).map(|v| v.conj());
            acc += crate::forms::wedge(&dz, &dzbar) * (half_i * nm[(i, j)]);
        }
    }
    let coef = c64(0.0, 1.0 / (8.0 * std::f64::consts::PI * std::f64::consts::PI));
    let w_forms: Vec<CVec> = (0..m)
        .map(|i| {
            let mut w = chart.dtheta_tilde_c(i);
            for j in 0..m {
                w -= chart.dtheta_c(j) * tau[(i, j)];
            }
            w
        })
        .collect();
    for i in 0..m {
        for j in 0..m {
            let wbar = w_forms[j].map(|v| v.conj());
            acc += crate::forms::wedge(&w_forms[i], &wbar) * (coef * ninv[(i, j)]);
        }
    }
    re_checked(&acc, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hk::TorusPoint;

    fn cvec(vals: &[(f64, f64)]) -> CVec {
        CVec::from_fn(vals.len(), |i, _| c64(vals[i].0, vals[i].1))
    }

    #[test]
    fn chn_tau_is_constant_diag() {
        let dom = CaskDomain::chn(2, 0.0, None);
        let z = cvec(&[(2.0, 0.0), (0.3, 0.1), (/* z2 */ 0.2, -0.4)]);
        let tau = dom.tau_matrix(&z).unwrap();
        assert_eq!(tau[(0, 0)], c64(0.0, 1.0));
        assert_eq!(tau[(1, 1)], c64(0.0, -1.0));
        assert_eq!(tau[(2, 2)], c64(0.0, -1.0));
        assert_eq!(tau[(0, 1)], c64(0.0, 0.0));
    }

    #[test]
    fn quadratic_i_identity_n0() {
        let tau = CMat::from_fn(1, 1, |_, _| c64(0.0, 1.0));
        let dom = CaskDomain::new(
            Prepotential::quadratic(tau).unwrap(),
            vec![],
            0.0,
        )
        .unwrap();
        let z = cvec(&[(0.4, 1.1)]);
        assert_eq!(dom.tau_matrix(&z).unwrap()[(0, 0)], c64(0.0, 1.0));
    }

    #[test]
    fn plugin_hessian_matches_finite_difference() {
        let dom = CaskDomain::chn_plugin(1, 0.0, None);
        let z = cvec(&[(2.0, 0.0), (1.0, 0.0)]);
        let tau = dom.tau_matrix(&z).unwrap();
        assert_eq!(tau[(0, 0)], c64(0.0, 1.0));
        assert_eq!(tau[(1, 1)], c64(0.0, -1.0));
        // finite-difference Hessian of the plugin eval against the analytic one
        let h = 1e-5;
        for i in 0..2 {
            for j in 0..2 {
                let mut f = |di: C64, dj: C64| {
                    let mut zz = z.clone();
                    zz[i] += di;
                    zz[j] += dj;
                    dom.prepotential().eval(&zz)
                };
                let fd = (f(c64(h, 0.0), c64(h, 0.0)) - f(c64(h, 0.0), c64(-h, 0.0))
                    - f(c64(-h, 0.0), c64(h, 0.0))
                    + f(c64(-h, 0.0), c64(-h, 0.0)))
                    / c64(4.0 * h * h, 0.0);
                assert!((fd - tau[(i, j)]).norm() < 1e-6, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn r2_examples() {
        let dom0 = CaskDomain::chn(0, 0.0, None);
        let z = cvec(&[(1.0, 0.0)]);
        assert!((dom0.cask_potential_r2(&z).unwrap() - 1.0).abs() < 1e-15);

        let dom = CaskDomain::chn(2, 0.0, None);
        let z = cvec(&[(2.0, 1.0), (0.5, -0.25), (0.1, 0.3)]);
        let want = z[0].norm_sqr() - z[1].norm_sqr() - z[2].norm_sqr();
        assert!((dom.cask_potential_r2(&z).unwrap() - want).abs() < 1e-12);

        // |lambda|^2 scaling
        let lambda = c64(0.7, 1.9);
        let zs = z.map(|v| v * lambda);
        let r2s = dom.cask_potential_r2(&zs).unwrap();
        assert!((r2s - lambda.norm_sqr() * want).abs() < 1e-10);
    }

    #[test]
    fn central_charge_examples() {
        let dom = CaskDomain::chn(1, 0.0, None);
        let z = cvec(&[(1.0, 0.0), (0.0, 0.0)]);
        // γ = ∂_{y_0} = γ⁰ → Z = z⁰
        let g_y0 = ChargeVector::new(vec![0, 0, 1, 0]);
        let zc = dom.central_charge(&z, &g_y0).unwrap();
        assert!((zc - c64(1.0, 0.0)).norm() < 1e-15);
        // γ = ∂_{x⁰} = γ̃₀ → Z = w₀ = i z⁰
        let g_x0 = ChargeVector::new(vec![1, 0, 0, 0]);
        let zc = dom.central_charge(&z, &g_x0).unwrap();
        assert!((zc - c64(0.0, 1.0)).norm() < 1e-15);
        // γ = 0 → 0
        let zero = ChargeVector::new(vec![0, 0, 0, 0]);
        assert_eq!(dom.central_charge(&z, &zero).unwrap(), c64(0.0, 0.0));
    }

    #[test]
    fn psk_examples() {
        let dom = CaskDomain::chn(2, 0.0, None);
        let x0 = CVec::zeros(2);
        let (kp, g) = dom.psk_data(&x0).unwrap();
        assert!(kp.abs() < 1e-15);
        for a in 0..2 {
            for b in 0..2 {
                let want = if a == b { c64(1.0, 0.0) } else { c64(0.0, 0.0) };
                assert!((g[(a, b)] - want).norm() < 1e-12);
            }
        }

        let dom1 = CaskDomain::chn(1, 0.0, None);
        let x = cvec(&[(0.5, 0.0)]);
        let (kp, g) = dom1.psk_data(&x).unwrap();
        assert!((kp - 0.2876820724517809).abs() < 1e-14);
        assert!((g[(0, 0)] - c64(16.0 / 9.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn psk_plugin_matches_quadratic() {
        let dq = CaskDomain::chn(2, 0.0, None);
        let dp = CaskDomain::chn_plugin(2, 0.0, None);
        let x = cvec(&[(0.31, -0.12), (0.05, 0.22)]);
        let (k1, g1) = dq.psk_data(&x).unwrap();
        let (k2, g2) = dp.psk_data(&x).unwrap();
        assert!((k1 - k2).abs() < 1e-12);
        for a in 0..2 {
            for b in 0..2 {
                assert!((g1[(a, b)] - g2[(a, b)]).norm() < 1e-6);
            }
        }
        let d1 = dq.dk_dx(&x).unwrap();
        let d2 = dp.dk_dx(&x).unwrap();
        for a in 0..2 {
            assert!((d1[a] - d2[a]).norm() < 1e-8);
        }
    }

    #[test]
    fn homogeneity_and_euler_validation() {
        let dom = CaskDomain::chn_plugin(1, 0.0, None);
        let z = cvec(&[(1.5, 0.4), (0.2, -0.3)]);
        dom.validate_at(&z).unwrap();
    }

    #[test]
    fn semiflat_block_values() {
        // CH^0 at z0 = 1: ω₃(∂θ̃, ∂θ) = −1/4π², ω₃(∂x, ∂u) = Im τ = 1
        let dom = CaskDomain::chn(0, 0.0, None);
        let p = TorusPoint::new(cvec(&[(1.0, 0.0)]), vec![0.3], vec![1.2]).unwrap();
        let [_o1, _o2, o3] = semiflat_forms(&dom, &p).unwrap();
        let chart = dom.chart();
        let pi = std::f64::consts::PI;
        assert!((o3[(chart.idx_tt(0), chart.idx_th(0))] + 1.0 / (4.0 * pi * pi)).abs() < 1e-15);
        assert!((o3[(chart.idx_x(0), chart.idx_u(0))] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn semiflat_omega3_two_routes_agree() {
        let dom = CaskDomain::chn(1, 0.0, None);
        let p = TorusPoint::new(
            cvec(&[(1.3, 0.2), (0.4, -0.1)]),
            vec![0.3, 2.2],
            vec![1.2, 0.4],
        )
        .unwrap();
        let [_, _, o3] = semiflat_forms(&dom, &p).unwrap();
        let o3b = semiflat_omega3_fiber_route(&dom, &p).unwrap();
        assert!(crate::forms::max_abs(&(o3 - o3b)) < 1e-12);
    }
}
