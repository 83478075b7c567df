//! Dense pointwise representations of forms, metrics and the finite
//! difference machinery.
//!
//! All geometry in this crate is materialized in fixed real charts: a 1-form
//! is its coefficient vector, a 2-form an antisymmetric matrix, a metric a
//! symmetric matrix. Complex combinations are accumulated in complex
//! matrices and the imaginary residue is checked before extracting the real
//! answer.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type RVec = DVector<f64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;

/// Default relative finite-difference step.
pub const FD_STEP: f64 = 1e-4;
/// Absolute floor for finite-difference steps.
pub const FD_FLOOR: f64 = 1e-6;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// a ∧ b as a matrix: (a∧b)(u, v) = a(u)b(v) − b(u)a(v).
pub fn wedge(a: &CVec, b: &CVec) -> CMat {
    a * b.transpose() - b * a.transpose()
}

/// Matrix of the symmetric product a·b̄ (conjugation applied to `b` here).
pub fn herm_pair(a: &CVec, b: &CVec) -> CMat {
    let bc = b.map(|z| z.conj());
    (a * bc.transpose() + &bc * a.transpose()).scale(0.5)
}

/// Matrix of the symmetric product of two real 1-forms.
pub fn sym_pair(a: &RVec, b: &RVec) -> RMat {
    (a * b.transpose() + b * a.transpose()).scale(0.5)
}

pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

pub fn max_abs_vec(v: &RVec) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Real part of a matrix whose imaginary part must be numerical noise.
pub fn re_checked(m: &CMat, tol: f64) -> Result<RMat> {
    let imag = m.iter().fold(0.0f64, |acc, v| acc.max(v.im.abs()));
    let scale = 1.0 + max_abs_c(m);
    if imag > tol * scale {
        return Err(Error::Config(format!(
            "expected a real matrix; imaginary residue {imag:.3e} (scale {scale:.3e})"
        )));
    }
    Ok(m.map(|v| v.re))
}

pub fn re_vec_checked(v: &CVec, tol: f64) -> Result<RVec> {
    let imag = v.iter().fold(0.0f64, |acc, x| acc.max(x.im.abs()));
    let scale = 1.0 + v.iter().fold(0.0f64, |acc, x| acc.max(x.norm()));
    if imag > tol * scale {
        return Err(Error::Config(format!(
            "expected a real 1-form; imaginary residue {imag:.3e}"
        )));
    }
    Ok(v.map(|x| x.re))
}

pub fn to_complex(v: &RVec) -> CVec {
    v.map(|x| c64(x, 0.0))
}

/// Per-coordinate step: relative to the coordinate magnitude with a floor.
pub fn fd_step(p: f64, h: f64) -> f64 {
    (h * p.abs()).max(FD_FLOOR * h / FD_STEP)
}

fn checked_step(p: f64, h: f64) -> Result<f64> {
    let s = fd_step(p, h);
    if p + s == p || !s.is_finite() {
        return Err(Error::StepUnderflow(s));
    }
    Ok(s)
}

/// Central-difference gradient of a scalar field.
pub fn grad_fd<F>(f: F, p: &RVec, h: f64) -> Result<RVec>
where
    F: Fn(&RVec) -> Result<f64>,
{
    let n = p.len();
    let mut g = RVec::zeros(n);
    for i in 0..n {
        let s = checked_step(p[i], h)?;
        let mut pp = p.clone();
        pp[i] += s;
        let fp = f(&pp)?;
        pp[i] = p[i] - s;
        let fm = f(&pp)?;
        g[i] = (fp - fm) / (2.0 * s);
    }
    Ok(g)
}

/// Central-difference Jacobian of a map between charts.
pub fn jacobian_fd<F>(f: F, p: &RVec, h: f64) -> Result<RMat>
where
    F: Fn(&RVec) -> Result<RVec>,
{
    let n = p.len();
    let f0 = f(p)?;
    let m = f0.len();
    let mut jac = RMat::zeros(m, n);
    for i in 0..n {
        let s = checked_step(p[i], h)?;
        let mut pp = p.clone();
        pp[i] += s;
        let fp = f(&pp)?;
        pp[i] = p[i] - s;
        let fm = f(&pp)?;
        for r in 0..m {
            jac[(r, i)] = (fp[r] - fm[r]) / (2.0 * s);
        }
    }
    Ok(jac)
}

/// Exterior derivative of a 1-form field by central differences:
/// (dα)_{ab} = ∂_a α_b − ∂_b α_a.
pub fn d_one_form_fd<F>(alpha: F, p: &RVec, h: f64) -> Result<RMat>
where
    F: Fn(&RVec) -> Result<RVec>,
{
    let jac = jacobian_fd(alpha, p, h)?; // jac[(b, a)] = ∂_a α_b
    Ok(jac.transpose() - jac.clone())
}

/// Max over coordinate triples of the cyclic finite-difference sum
/// ∂_a ω_{bc} + ∂_b ω_{ca} + ∂_c ω_{ab}; vanishes for closed forms.
pub fn exterior_derivative_residual<F>(omega: F, p: &RVec, h: f64) -> Result<f64>
where
    F: Fn(&RVec) -> Result<RMat>,
{
    let n = p.len();
    let mut partials: Vec<RMat> = Vec::with_capacity(n);
    for i in 0..n {
        let s = checked_step(p[i], h)?;
        let mut pp = p.clone();
        pp[i] += s;
        let wp = omega(&pp)?;
        pp[i] = p[i] - s;
        let wm = omega(&pp)?;
        partials.push((wp - wm).unscale(2.0 * s));
    }
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in (a + 1)..n {
            for c in (b + 1)..n {
                let r = partials[a][(b, c)] + partials[b][(c, a)] + partials[c][(a, b)];
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

/// Classical fourth-order Runge-Kutta flow of a vector field.
pub fn flow_rk4<F>(field: F, p: &RVec, t: f64, steps: usize) -> RVec
where
    F: Fn(&RVec) -> RVec,
{
    let dt = t / steps as f64;
    let mut x = p.clone();
    for _ in 0..steps {
        let k1 = field(&x);
        let k2 = field(&(&x + &k1 * (dt / 2.0)));
        let k3 = field(&(&x + &k2 * (dt / 2.0)));
        let k4 = field(&(&x + &k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    x
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &RMat) -> Vec<f64> {
    let sym = (m + m.transpose()).scale(0.5);
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// (positive, negative, null) eigenvalue counts at the given tolerance.
pub fn signature(eigenvalues: &[f64], tol: f64) -> (usize, usize, usize) {
    let mut pos = 0;
    let mut neg = 0;
    let mut nul = 0;
    for &e in eigenvalues {
        if e > tol {
            pos += 1;
        } else if e < -tol {
            neg += 1;
        } else {
            nul += 1;
        }
    }
    (pos, neg, nul)
}

/// Coordinate frame a metric matrix refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    /// (x, u, θ̃, θ) on the torus fibration, dimension 4m.
    TorusFibration { m: usize },
    /// (x, u, θ̃, θ, σ) on the circle bundle, dimension 4m + 1.
    Bundle { m: usize },
    /// (ρ, Re X, Im X, θ̃, θ, σ) on the slice, dimension 4n + 4.
    QkSlice { n: usize },
}

impl std::fmt::Display for ChartKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::TorusFibration { m } => write!(f, "torus-fibration(m={m})"),
            Self::Bundle { m } => write!(f, "bundle(m={m})"),
            Self::QkSlice { n } => write!(f, "qk-slice(n={n})"),
        }
    }
}

/// Symmetric metric matrix with its eigenvalue summary.
#[derive(Debug, Clone)]
pub struct MetricSample {
    pub chart: ChartKind,
    pub matrix: RMat,
    pub eigenvalues: Vec<f64>,
}

impl MetricSample {
    pub fn new(chart: ChartKind, matrix: RMat) -> Self {
        let matrix = (matrix.clone() + matrix.transpose()).scale(0.5);
        let eigenvalues = symmetric_eigenvalues(&matrix);
        Self {
            chart,
            matrix,
            eigenvalues,
        }
    }

    pub fn signature(&self, tol: f64) -> (usize, usize, usize) {
        signature(&self.eigenvalues, tol)
    }

    pub fn is_positive_definite(&self, tol: f64) -> bool {
        self.eigenvalues.iter().all(|&e| e > tol)
    }
}

pub fn min_singular_value(m: &RMat) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc, &s| acc.min(s))
}

/// Dense inverse guarded by the SVD condition number.
pub fn inverse_with_guard(m: &RMat, max_cond: f64) -> Result<RMat> {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let smin = svd
        .singular_values
        .iter()
        .fold(f64::INFINITY, |a, &s| a.min(s));
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > max_cond {
        return Err(Error::IllConditioned { cond });
    }
    m.clone()
        .try_inverse()
        .ok_or(Error::IllConditioned { cond })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_form_field_is_closed() {
        let p = RVec::from_vec(vec![0.3, -1.2, 2.0, 0.7]);
        let omega = |_: &RVec| {
            let mut w = RMat::zeros(4, 4);
            w[(0, 1)] = 1.0;
            w[(1, 0)] = -1.0;
            w[(2, 3)] = -0.25;
            w[(3, 2)] = 0.25;
            Ok(w)
        };
        let r = exterior_derivative_residual(omega, &p, FD_STEP).unwrap();
        assert!(r < 1e-12, "residual {r}");
    }

    #[test]
    fn exact_derivative_detected() {
        // ω = x1 dx0∧dx2 + x0 dx1∧dx2 = d(x0 x1 dx2) is closed
        let omega = |p: &RVec| {
            let mut w = RMat::zeros(3, 3);
            w[(0, 2)] = p[1];
            w[(2, 0)] = -p[1];
            w[(1, 2)] = p[0];
            w[(2, 1)] = -p[0];
            Ok(w)
        };
        let p = RVec::from_vec(vec![0.8, 1.5, -0.2]);
        let r = exterior_derivative_residual(omega, &p, FD_STEP).unwrap();
        assert!(r < 1e-9, "residual {r}");

        // corrupting a coefficient produces an O(1) residual
        let bad = |p: &RVec| {
            let mut w = RMat::zeros(3, 3);
            w[(0, 2)] = p[1];
            w[(2, 0)] = -p[1];
            w[(1, 2)] = p[0] * p[0];
            w[(2, 1)] = -p[0] * p[0];
            Ok(w)
        };
        let r = exterior_derivative_residual(bad, &p, FD_STEP).unwrap();
        assert!(r > 0.4, "residual {r}");
    }

    #[test]
    fn rk4_rotation_flow() {
        // ẋ = -y, ẏ = x: flow by t is a rotation
        let field = |p: &RVec| RVec::from_vec(vec![-p[1], p[0]]);
        let p = RVec::from_vec(vec![1.0, 0.0]);
        let q = flow_rk4(field, &p, std::f64::consts::FRAC_PI_2, 256);
        assert!((q[0]).abs() < 1e-9);
        assert!((q[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn signature_counts() {
        let m = RMat::from_diagonal(&RVec::from_vec(vec![2.0, -1.0, 1e-14, 3.0]));
        let ev = symmetric_eigenvalues(&m);
        assert_eq!(signature(&ev, 1e-10), (2, 1, 1));
    }
}
