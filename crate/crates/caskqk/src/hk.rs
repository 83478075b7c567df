//! Instanton-corrected hyperkähler structure on the torus fibration
//! N = T*M/Λ* over a CASK domain.
//!
//! The corrections enter through the Bessel series
//!
//!   V_γ = (1/2π) Σ_{n>0} e^{inθ_γ} K₀(2πn|Z_γ|)
//!   A_γ = −(1/4π) Σ_{n>0} e^{inθ_γ} |Z_γ| K₁(2πn|Z_γ|) (dZ_γ/Z_γ − dZ̄_γ/Z̄_γ)
//!
//! which deform the semi-flat Kähler forms. With W_i = dθ̃_i − τ_ij dθʲ,
//! W_i^inst = Σ_γ Ω(γ) n_i(γ) (2πA_γ − iV_γ dθ_γ), Y_i = W_i + W_i^inst and
//! M_ij = Im τ_ij + Σ_γ Ω(γ) V_γ n_i n_j, the corrected structure is
//!
//!   ω₁ + iω₂ = (1/2π) dZⁱ ∧ Y_i
//!   ω₃ = (i/2) M_ij dZⁱ∧dZ̄ʲ + (i/8π²) Mⁱʲ Y_i∧Ȳ_j
//!   g_N = dZⁱ M_ij dZ̄ʲ + (1/4π²) Y_i Mⁱʲ Ȳ_j
//!
//! and the triple is hyperkähler exactly when M is invertible (the
//! compatibility condition). Everything below is evaluated as dense matrices
//! in the fixed real chart (x⁰..xⁿ, u⁰..uⁿ, θ̃₀..θ̃ₙ, θ⁰..θⁿ), zⁱ = xⁱ + iuⁱ.

use std::f64::consts::PI;

use crate::bessel::bessel_k01;
use crate::cask::CaskDomain;
use crate::error::{Error, Result};
use crate::forms::{
    c64, herm_pair, inverse_with_guard, min_singular_value, re_checked, symmetric_eigenvalues,
    wedge, CMat, CVec, RMat, RVec, C64,
};
use crate::lattice::{BpsStructure, ChargeVector};

/// Fixed real chart (x, u, θ̃, θ) on N, dimension 4m.
#[derive(Debug, Clone, Copy)]
pub struct NChart {
    m: usize,
}

impl NChart {
    pub fn new(m: usize) -> Self {
        Self { m }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        4 * self.m
    }

    pub fn idx_x(&self, i: usize) -> usize {
        i
    }

    pub fn idx_u(&self, i: usize) -> usize {
        self.m + i
    }

    pub fn idx_tt(&self, i: usize) -> usize {
        2 * self.m + i
    }

    pub fn idx_th(&self, i: usize) -> usize {
        3 * self.m + i
    }

    pub fn unit_c(&self, idx: usize) -> CVec {
        CVec::from_fn(self.dim(), |k, _| if k == idx { c64(1.0, 0.0) } else { c64(0.0, 0.0) })
    }

    /// dZⁱ = dxⁱ + i duⁱ.
    pub fn dz(&self, i: usize) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[self.idx_x(i)] = c64(1.0, 0.0);
        v[self.idx_u(i)] = c64(0.0, 1.0);
        v
    }

    pub fn dtheta_tilde_c(&self, i: usize) -> CVec {
        self.unit_c(self.idx_tt(i))
    }

    pub fn dtheta_c(&self, i: usize) -> CVec {
        self.unit_c(self.idx_th(i))
    }
}

/// Point of N in the chart (zⁱ, θ̃_i, θⁱ).
#[derive(Debug, Clone)]
pub struct TorusPoint {
    z: CVec,
    theta_tilde: Vec<f64>,
    theta: Vec<f64>,
}

fn reduce_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a % two_pi;
    if r < 0.0 {
        r += two_pi;
    }
    r
}

impl TorusPoint {
    /// Angles are stored as given (lift coordinates); every evaluated
    /// quantity depends on them only through e^{inθ} and dθ, so they matter
    /// mod 2π. Keeping the raw values makes finite differences and the
    /// circle-bundle σ-transition behave.
    pub fn new(z: CVec, theta_tilde: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let m = z.len();
        if theta_tilde.len() != m || theta.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: theta_tilde.len().max(theta.len()),
            });
        }
        Ok(Self {
            z,
            theta_tilde,
            theta,
        })
    }

    /// The same point with angles reduced to [0, 2π).
    pub fn reduced(&self) -> Self {
        Self {
            z: self.z.clone(),
            theta_tilde: self.theta_tilde.iter().map(|&a| reduce_angle(a)).collect(),
            theta: self.theta.iter().map(|&a| reduce_angle(a)).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.z.len()
    }

    pub fn base(&self) -> &CVec {
        &self.z
    }

    pub fn theta_tilde(&self) -> &[f64] {
        &self.theta_tilde
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// θ_γ = nⁱ(γ) θ̃_i + n_i(γ) θⁱ, reduced mod 2π.
    pub fn theta_gamma(&self, gamma: &ChargeVector) -> Result<f64> {
        let m = self.m();
        if gamma.dim() != 2 * m {
            return Err(Error::DimensionMismatch {
                expected: 2 * m,
                got: gamma.dim(),
            });
        }
        let mut acc = 0.0;
        for i in 0..m {
            acc += gamma.coeff_f64(i) * self.theta_tilde[i];
            acc += gamma.coeff_f64(m + i) * self.theta[i];
        }
        Ok(reduce_angle(acc))
    }

    /// Chart coordinates (x, u, θ̃, θ).
    pub fn to_chart(&self) -> RVec {
        let m = self.m();
        RVec::from_fn(4 * m, |k, _| match k / m {
            0 => self.z[k].re,
            1 => self.z[k - m].im,
            2 => self.theta_tilde[k - 2 * m],
            _ => self.theta[k - 3 * m],
        })
    }

    /// Rebuild from raw chart coordinates without angle reduction; used by
    /// finite-difference and flow plumbing where reduction would cut the
    /// coordinate lines.
    pub fn from_chart_raw(m: usize, p: &RVec) -> Self {
        Self {
            z: CVec::from_fn(m, |i, _| c64(p[i], p[m + i])),
            theta_tilde: (0..m).map(|i| p[2 * m + i]).collect(),
            theta: (0..m).map(|i| p[3 * m + i]).collect(),
        }
    }
}

/// Numerical knobs shared by the whole pipeline.
#[derive(Debug, Clone, Copy)]
pub struct Numerics {
    /// Relative truncation tolerance for the instanton series.
    pub tol: f64,
    /// Hard cap on series terms.
    pub n_max: usize,
    /// Relative finite-difference step.
    pub h: f64,
    /// Compatibility threshold on the smallest singular value of M.
    pub compat_threshold: f64,
    /// Threshold below which f, f₁, g(X,X) count as vanishing.
    pub region_threshold: f64,
    /// Condition-number guard for dense inverses.
    pub max_cond: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            n_max: 500,
            h: 1e-4,
            compat_threshold: 1e-10,
            region_threshold: 1e-10,
            max_cond: 1e12,
        }
    }
}

/// Partial sums of the three instanton series attached to one charge.
#[derive(Debug, Clone, Copy)]
pub struct InstantonSeriesValue {
    /// V_γ = (1/2π) Σ e^{inθ} K₀(2πn|Z|).
    pub v_inst: C64,
    /// Σ e^{inθ} |Z| K₁(2πn|Z|); A_γ = −(1/4π) · a_coeff · (dZ/Z − dZ̄/Z̄).
    pub a_inst_coeff: C64,
    /// Σ e^{inθ}/n |Z| K₁(2πn|Z|); η_γ = (i/8π²) · eta_coeff · (dZ/Z − dZ̄/Z̄).
    pub eta_inst_coeff: C64,
    pub truncation_n: usize,
    pub tail_bound: f64,
}

/// Direct evaluation of the series for |Z_γ| and θ_γ.
///
/// Terms are added until the Bessel bound drops below tol·(|partial| + floor);
/// the returned tail bound is certified by the ratio bound
/// K_ν(2π(n+1)x)/K_ν(2πnx) ≤ e^{−2πx}.
pub fn instanton_series_scalar(
    abs_z: f64,
    theta: f64,
    params: &Numerics,
) -> Result<InstantonSeriesValue> {
    if !(abs_z > 0.0) || abs_z < 1e-14 {
        return Err(Error::SupportPropertyViolation);
    }
    const FLOOR: f64 = 1e-300;
    let phase = c64(theta.cos(), theta.sin());
    let mut rot = c64(1.0, 0.0);
    let mut v = c64(0.0, 0.0);
    let mut a = c64(0.0, 0.0);
    let mut eta = c64(0.0, 0.0);
    let mut last = 0.0f64;
    for n in 1..=params.n_max {
        rot *= phase;
        let arg = 2.0 * PI * n as f64 * abs_z;
        let (k0, k1) = bessel_k01(arg)?;
        v += rot * (k0 / (2.0 * PI));
        let a_term = abs_z * k1;
        a += rot * a_term;
        eta += rot * (a_term / n as f64);
        let v_bound = k0 / (2.0 * PI);
        let a_bound = a_term / (4.0 * PI);
        last = v_bound.max(a_bound);
        let v_ok = v_bound <= params.tol * (v.norm() + FLOOR);
        let a_ok = a_bound <= params.tol * (a.norm() / (4.0 * PI) + FLOOR);
        if v_ok && a_ok {
            let r = (-2.0 * PI * abs_z).exp();
            let tail = if r < 1.0 { last * r / (1.0 - r) } else { f64::INFINITY };
            return Ok(InstantonSeriesValue {
                v_inst: v,
                a_inst_coeff: a,
                eta_inst_coeff: eta,
                truncation_n: n,
                tail_bound: tail,
            });
        }
    }
    let _ = last;
    Err(Error::SeriesDivergence { n_max: params.n_max })
}

/// Series evaluation at a torus point for a support charge γ.
pub fn instanton_series(
    dom: &CaskDomain,
    gamma: &ChargeVector,
    p: &TorusPoint,
    params: &Numerics,
) -> Result<InstantonSeriesValue> {
    let z_gamma = dom.central_charge(p.base(), gamma)?;
    instanton_series_scalar(z_gamma.norm(), p.theta_gamma(gamma)?, params)
}

/// Everything attached to one support charge at a fixed point.
#[derive(Debug, Clone)]
pub struct ChargeTerm {
    pub omega: i64,
    /// n_i(γ), the electric components.
    pub n_elec: Vec<f64>,
    pub z_gamma: C64,
    pub theta_gamma: f64,
    pub series: InstantonSeriesValue,
}

impl ChargeTerm {
    /// dZ_γ = Σ n_i dZⁱ in the chart.
    pub fn dz_gamma(&self, chart: &NChart) -> CVec {
        let mut v = CVec::zeros(chart.dim());
        for (i, &c) in self.n_elec.iter().enumerate() {
            if c != 0.0 {
                v += chart.dz(i) * c64(c, 0.0);
            }
        }
        v
    }

    /// dθ_γ = Σ n_i dθⁱ.
    pub fn dtheta_gamma(&self, chart: &NChart) -> CVec {
        let mut v = CVec::zeros(chart.dim());
        for (i, &c) in self.n_elec.iter().enumerate() {
            if c != 0.0 {
                v += chart.dtheta_c(i) * c64(c, 0.0);
            }
        }
        v
    }

    /// The real combination dZ_γ/Z_γ − dZ̄_γ/Z̄_γ carried by A_γ and η_γ.
    pub fn log_diff(&self, chart: &NChart) -> CVec {
        let dz = self.dz_gamma(chart);
        let dzbar = dz.map(|v| v.conj());
        dz / self.z_gamma - dzbar / self.z_gamma.conj()
    }

    /// A_γ as a chart 1-form.
    pub fn a_form(&self, chart: &NChart) -> CVec {
        self.log_diff(chart) * (self.series.a_inst_coeff * (-1.0 / (4.0 * PI)))
    }

    /// η_γ as a chart 1-form.
    pub fn eta_form(&self, chart: &NChart) -> CVec {
        self.log_diff(chart) * (self.series.eta_inst_coeff * c64(0.0, 1.0 / (8.0 * PI * PI)))
    }

    /// A_γ(V) = −(i/2π) Σ e^{inθ} |Z| K₁(2πn|Z|) for the rotating field V.
    pub fn a_of_v(&self) -> C64 {
        self.series.a_inst_coeff * c64(0.0, -1.0 / (2.0 * PI))
    }

    /// ι_V η_γ = −(1/4π²) Σ e^{inθ}/n |Z| K₁(2πn|Z|).
    pub fn eta_of_v(&self) -> C64 {
        self.series.eta_inst_coeff * (-1.0 / (4.0 * PI * PI))
    }
}

/// All charge terms of the BPS structure at a point. Requires the support to
/// lie in the electric span of the stored frame.
pub fn support_terms(
    dom: &CaskDomain,
    bps: &BpsStructure,
    p: &TorusPoint,
    params: &Numerics,
) -> Result<Vec<ChargeTerm>> {
    let m = dom.m();
    let mut out = Vec::with_capacity(bps.entries().len());
    for entry in bps.entries() {
        if !entry.charge.is_electric(m) {
            return Err(Error::SupportNotElectric(entry.charge.to_string()));
        }
        let n_elec: Vec<f64> = (0..m).map(|i| entry.charge.coeff_f64(m + i)).collect();
        let z_gamma = dom.central_charge(p.base(), &entry.charge)?;
        let theta_gamma = p.theta_gamma(&entry.charge)?;
        let series = instanton_series_scalar(z_gamma.norm(), theta_gamma, params)?;
        out.push(ChargeTerm {
            omega: entry.index,
            n_elec,
            z_gamma,
            theta_gamma,
            series,
        });
    }
    Ok(out)
}

/// M_ij = N_ij + Σ_γ Ω(γ) V_γ n_i(γ) n_j(γ); real symmetric after the ±γ sum.
pub fn m_matrix(dom: &CaskDomain, terms: &[ChargeTerm], n_mat: &RMat) -> Result<RMat> {
    let m = dom.m();
    let mut acc = CMat::zeros(m, m);
    for t in terms {
        for i in 0..m {
            for j in 0..m {
                acc[(i, j)] += t.series.v_inst * (t.omega as f64 * t.n_elec[i] * t.n_elec[j]);
            }
        }
    }
    let inst = re_checked(&acc, 1e-13)?;
    Ok(n_mat + inst)
}

/// Compatibility test: smallest singular value of M against the threshold.
pub fn compatibility_check(
    dom: &CaskDomain,
    bps: &BpsStructure,
    p: &TorusPoint,
    threshold: f64,
    params: &Numerics,
) -> Result<(bool, f64)> {
    let terms = support_terms(dom, bps, p, params)?;
    let n_mat = dom.n_matrix(p.base())?;
    let m = m_matrix(dom, &terms, &n_mat)?;
    let sv = min_singular_value(&m);
    Ok((sv > threshold, sv))
}

/// The W_i, W_i^inst and Y_i 1-forms plus M at a point.
pub struct FrameForms {
    pub chart: NChart,
    pub w: Vec<CVec>,
    pub w_inst: Vec<CVec>,
    pub y: Vec<CVec>,
    pub m_mat: RMat,
    pub m_inv: RMat,
}

pub fn frame_forms(
    dom: &CaskDomain,
    terms: &[ChargeTerm],
    p: &TorusPoint,
    params: &Numerics,
) -> Result<FrameForms> {
    frame_forms_with_options(dom, terms, p, params, true)
}

/// `include_a_term = false` drops the A_γ contribution from W_i^inst; this is
/// the deliberate corruption used as the closedness negative control.
pub fn frame_forms_with_options(
    dom: &CaskDomain,
    terms: &[ChargeTerm],
    p: &TorusPoint,
    params: &Numerics,
    include_a_term: bool,
) -> Result<FrameForms> {
    let m = dom.m();
    let chart = dom.chart();
    let tau = dom.tau_matrix(p.base())?;
    let n_mat = dom.n_matrix(p.base())?;

    let w: Vec<CVec> = (0..m)
        .map(|i| {
            let mut wi = chart.dtheta_tilde_c(i);
            for j in 0..m {
                wi -= chart.dtheta_c(j) * tau[(i, j)];
            }
            wi
        })
        .collect();

    let mut w_inst: Vec<CVec> = (0..m).map(|_| CVec::zeros(chart.dim())).collect();
    for t in terms {
        let a_part = if include_a_term {
            t.a_form(&chart) * c64(2.0 * PI, 0.0)
        } else {
            CVec::zeros(chart.dim())
        };
        let theta_part = t.dtheta_gamma(&chart) * (t.series.v_inst * c64(0.0, -1.0));
        let combo = a_part + theta_part;
        for (i, wi) in w_inst.iter_mut().enumerate() {
            if t.n_elec[i] != 0.0 {
                *wi += &combo * c64(t.omega as f64 * t.n_elec[i], 0.0);
            }
        }
    }

    let y: Vec<CVec> = w.iter().zip(w_inst.iter()).map(|(a, b)| a + b).collect();
    let m_mat = m_matrix(dom, terms, &n_mat)?;
    let sv = min_singular_value(&m_mat);
    if sv <= params.compat_threshold {
        return Err(Error::Incompatible {
            sigma_min: sv,
            threshold: params.compat_threshold,
        });
    }
    let m_inv = inverse_with_guard(&m_mat, params.max_cond)?;
    Ok(FrameForms {
        chart,
        w,
        w_inst,
        y,
        m_mat,
        m_inv,
    })
}

/// The corrected Kähler forms (ω₁, ω₂, ω₃) as antisymmetric chart matrices.
pub fn kahler_forms(
    dom: &CaskDomain,
    bps: &BpsStructure,
    p: &TorusPoint,
    params: &Numerics,
) -> Result<[RMat; 3]> {
    let terms = support_terms(dom, bps, p, params)?;
    let frame = frame_forms(dom, &terms, p, params)?;
    kahler_forms_from_frame(dom, &frame)
}

pub fn kahler_forms_from_frame(dom: &CaskDomain, frame: &FrameForms) -> Result<[RMat; 3]> {
    let m = dom.m();
    let chart = frame.chart;

    let mut varpi = CMat::zeros(chart.dim(), chart.dim());
    for i in 0..m {
        varpi += wedge(&chart.dz(i), &frame.y[i]).unscale(2.0 * PI);
    }
    let omega1 = varpi.map(|v| v.re);
    let omega2 = varpi.map(|v| v.im);

    // ω₃ = (i/2) M dZ∧dZ̄ + (i/8π²) M⁻¹ Y∧Ȳ; the first piece is exactly
    // M_ij dxⁱ∧duʲ
    let mut omega3 = CMat::zeros(chart.dim(), chart.dim());
    for i in 0..m {
        for j in 0..m {
            let c = c64(frame.m_mat[(i, j)], 0.0);
            omega3[(chart.idx_x(i), chart.idx_u(j))] += c;
            omega3[(chart.idx_u(j), chart.idx_x(i))] -= c;
        }
    }
    let coef = c64(0.0, 1.0 / (8.0 * PI * PI));
    for i in 0..m {
        for j in 0..m {
            let ybar = frame.y[j].map(|v| v.conj());
            omega3 += wedge(&frame.y[i], &ybar) * (coef * frame.m_inv[(i, j)]);
        }
    }
    let omega3 = re_checked(&omega3, 1e-12)?;
    Ok([omega1, omega2, omega3])
}

/// ω₃ assembled from its defining expression (semi-flat part plus
/// d(Ση_γ)-shaped corrections) instead of the fiber-frame expansion. The two
/// routes agree identically; tests compare them.
pub fn omega3_definition_route(
    dom: &CaskDomain,
    bps: &BpsStructure,
    p: &TorusPoint,
    params: &Numerics,
) -> Result<RMat> {
    let terms = support_terms(dom, bps, p, params)?;
    let chart = dom.chart();
    let [_, _, sf] = crate::cask::semiflat_forms(dom, p)?;
    let mut acc = CMat::zeros(chart.dim(), chart.dim());
    for t in terms {
        let dz = t.dz_gamma(&chart);
        let dzbar = dz.map(|v| v.conj());
        let half_i_v = c64(0.0, 0.5) * t.series.v_inst * t.omega as f64;
        acc += wedge(&dz, &dzbar) * half_i_v;
        let a = t.a_form(&chart);
        acc += wedge(&t.dtheta_gamma(&chart), &a) * c64(t.omega as f64 / (2.0 * PI), 0.0);
    }
    Ok(sf + re_checked(&acc, 1e-12)?)
}

/// Complex structures I_α = −ω_β⁻¹ ω_γ (cyclic) and the metric −I_αᵀ ω_α,
/// returned for α = 3; the suite checks independence of α.
pub fn complex_structures(forms: &[RMat; 3], max_cond: f64) -> Result<([RMat; 3], RMat)> {
    let inv = |m: &RMat| inverse_with_guard(m, max_cond);
    let i1 = -(inv(&forms[1])? * &forms[2]);
    let i2 = -(inv(&forms[2])? * &forms[0]);
    let i3 = -(inv(&forms[0])? * &forms[1]);
    let g = -(i3.transpose() * &forms[2]);
    let g = (g.clone() + g.transpose()).scale(0.5);
    Ok(([i1, i2, i3], g))
}

/// Everything Theorem-level checks need at one point.
pub struct HkSample {
    pub m_matrix: RMat,
    pub omega: [RMat; 3],
    pub i_structs: [RMat; 3],
    /// Metric from −ω_α I_α.
    pub g: RMat,
    /// Metric assembled independently from the dZ M dZ̄ + Y M⁻¹ Ȳ expression.
    pub g_direct: RMat,
}

pub fn hk_sample(
    dom: &CaskDomain,
    bps: &BpsStructure,
    p: &TorusPoint,
    params: &Numerics,
) -> Result<HkSample> {
    let terms = support_terms(dom, bps, p, params)?;
    let frame = frame_forms(dom, &terms, p, params)?;
    let omega = kahler_forms_from_frame(dom, &frame)?;
    let (i_structs, g) = complex_structures(&omega, params.max_cond)?;
    let g_direct = hk_metric_direct(dom, &frame)?;
    Ok(HkSample {
        m_matrix: frame.m_mat.clone(),
        omega,
        i_structs,
        g,
        g_direct,
    })
}

/// g_N = dZⁱ M_ij dZ̄ʲ + (1/4π²) Y_i Mⁱʲ Ȳ_j as a symmetric chart matrix.
pub fn hk_metric_direct(dom: &CaskDomain, frame: &FrameForms) -> Result<RMat> {
    let m = dom.m();
    let chart = frame.chart;
    let mut acc = CMat::zeros(chart.dim(), chart.dim());
    for i in 0..m {
        for j in 0..m {
            if frame.m_mat[(i, j)] != 0.0 {
                acc += herm_pair(&chart.dz(i), &chart.dz(j)) * c64(frame.m_mat[(i, j)], 0.0);
            }
            if frame.m_inv[(i, j)] != 0.0 {
                acc += herm_pair(&frame.y[i], &frame.y[j])
                    * c64(frame.m_inv[(i, j)] / (4.0 * PI * PI), 0.0);
            }
        }
    }
    let g = re_checked(&acc, 1e-12)?;
    Ok((g.clone() + g.transpose()).scale(0.5))
}

/// The HK metric with its eigenvalue summary.
pub fn hk_metric(
    dom: &CaskDomain,
    bps: &BpsStructure,
    p: &TorusPoint,
    params: &Numerics,
) -> Result<crate::forms::RMat> {
    let sample = hk_sample(dom, bps, p, params)?;
    Ok(sample.g_direct)
}

/// Rotating vector field V = iZⁱ∂_{Zⁱ} − iZ̄ⁱ∂_{Z̄ⁱ} in chart components:
/// V(xⁱ) = −uⁱ, V(uⁱ) = xⁱ, V(θ) = 0.
pub fn rotating_vector(m: usize, p: &TorusPoint) -> RVec {
    let chart = NChart::new(m);
    let mut v = RVec::zeros(chart.dim());
    for i in 0..m {
        v[chart.idx_x(i)] = -p.base()[i].im;
        v[chart.idx_u(i)] = p.base()[i].re;
    }
    v
}

/// Finite-difference closedness residual; re-exported convenience wrapper.
pub fn exterior_derivative_residual<F>(omega: F, p: &RVec, h: f64) -> Result<f64>
where
    F: Fn(&RVec) -> Result<RMat>,
{
    crate::forms::exterior_derivative_residual(omega, p, h)
}

/// Signature of the sample metric as eigenvalue sign counts.
pub fn metric_signature(g: &RMat, tol: f64) -> (usize, usize, usize) {
    crate::forms::signature(&symmetric_eigenvalues(g), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BpsStructure;

    fn chn_point(m: usize, z0: (f64, f64)) -> TorusPoint {
        let z = CVec::from_fn(m, |i, _| {
            if i == 0 {
                c64(z0.0, z0.1)
            } else {
                c64(0.07 * (i as f64 + 1.0), -0.05 * i as f64)
            }
        });
        let tt: Vec<f64> = (0..m).map(|i| 0.4 + 0.3 * i as f64).collect();
        let th: Vec<f64> = (0..m).map(|i| 1.1 + 0.5 * i as f64).collect();
        TorusPoint::new(z, tt, th).unwrap()
    }

    fn gamma0(m: usize) -> ChargeVector {
        let mut v = vec![0i64; 2 * m];
        v[m] = 1;
        ChargeVector::new(v)
    }

    fn bps_unit(m: usize) -> BpsStructure {
        BpsStructure::new(vec![(gamma0(m), 1)], 2 * m).unwrap()
    }

    /// Frozen 50-digit direct-summation oracles at |Z| = 1 and |Z| = 0.35.
    #[test]
    fn series_matches_oracle() {
        let params = Numerics::default();
        let s = instanton_series_scalar(1.0, 0.0, &params).unwrap();
        assert!((s.v_inst - c64(0.00014607359045071153, 0.0)).norm() < 1e-17);
        assert!((s.a_inst_coeff - c64(0.0009882668752767423, 0.0)).norm() < 1e-16);
        assert!((s.eta_inst_coeff - c64(0.000987631146242869, 0.0)).norm() < 1e-16);

        let s = instanton_series_scalar(1.0, PI, &params).unwrap();
        assert!((s.v_inst.re + 0.00014568486770571544).abs() < 1e-17);
        assert!(s.v_inst.im.abs() < 1e-18);
        assert!((s.a_inst_coeff.re + 0.0009857290736537625).abs() < 1e-16);

        let s = instanton_series_scalar(1.0, PI / 3.0, &params).unwrap();
        assert!((s.v_inst - c64(7.284198793473165e-5, 0.00012650318186592488)).norm() < 1e-16);
        assert!(
            (s.a_inst_coeff - c64(0.000492861661658291, 0.0008558625543763134)).norm() < 1e-15
        );
        assert!(
            (s.eta_inst_coeff - c64(0.0004931801650974624, 0.0008553131075508971)).norm() < 1e-15
        );

        let s = instanton_series_scalar(0.35, PI / 3.0, &params).unwrap();
        assert!((s.v_inst - c64(0.006432898243768952, 0.013295082541647947)).norm() < 1e-14);
        assert!((s.a_inst_coeff - c64(0.01725814698707184, 0.035125892152296076)).norm() < 1e-14);
        assert!(
            (s.eta_inst_coeff - c64(0.018124188681623605, 0.033939384378544217)).norm() < 1e-14
        );
    }

    #[test]
    fn series_alternates_at_theta_pi() {
        // e^{inπ} = (−1)ⁿ: partial sums are real with the leading term negative
        let s = instanton_series_scalar(0.5, PI, &Numerics::default()).unwrap();
        assert!(s.v_inst.im.abs() < 1e-18);
        assert!(s.v_inst.re < 0.0);
    }

    #[test]
    fn series_conjugation_symmetry() {
        // V̄_γ = V_{−γ}: negating the charge negates θ_γ
        let params = Numerics::default();
        let a = instanton_series_scalar(0.8, 1.234, &params).unwrap();
        let b = instanton_series_scalar(0.8, -1.234, &params).unwrap();
        assert!((a.v_inst.conj() - b.v_inst).norm() < 1e-18);
        assert!((a.a_inst_coeff.conj() - b.a_inst_coeff).norm() < 1e-17);
    }

    #[test]
    fn series_decays_at_large_z() {
        let s = instanton_series_scalar(20.0, 0.3, &Numerics::default()).unwrap();
        let bound = crate::bessel::bessel_k(0, 2.0 * PI * 20.0).unwrap() / (2.0 * PI) * 1.01;
        assert!(s.v_inst.norm() <= bound);
        assert!(s.tail_bound < 1e-40);
    }

    #[test]
    fn series_rejects_vanishing_charge() {
        assert!(matches!(
            instanton_series_scalar(0.0, 0.1, &Numerics::default()),
            Err(Error::SupportPropertyViolation)
        ));
    }

    #[test]
    fn compatibility_trivial_support_gives_min_n_eigenvalue() {
        let dom = CaskDomain::chn(1, 0.0, None);
        let p = chn_point(2, (1.5, 0.3));
        let (ok, sv) = compatibility_check(&dom, &BpsStructure::trivial(), &p, 1e-10, &Numerics::default()).unwrap();
        assert!(ok);
        assert!((sv - 1.0).abs() < 1e-12); // |eigenvalues of Im tau| = 1
    }

    #[test]
    fn compatibility_fails_for_huge_omega_near_small_z0() {
        // θ⁰ = π makes the correction negative; M₀₀ = 1 + 2Ω Re V flips sign
        // as |z⁰| shrinks and the compatibility check fails at the crossing
        let dom = CaskDomain::chn(0, 0.0, None);
        let params = Numerics::default();
        let bps = BpsStructure::new(vec![(gamma0(1), 40)], 2).unwrap();
        let m00 = |r: f64| -> f64 {
            let p = TorusPoint::new(CVec::from_fn(1, |_, _| c64(r, 0.0)), vec![0.0], vec![PI])
                .unwrap();
            let terms = support_terms(&dom, &bps, &p, &params).unwrap();
            let n_mat = dom.n_matrix(p.base()).unwrap();
            m_matrix(&dom, &terms, &n_mat).unwrap()[(0, 0)]
        };
        assert!(m00(1.5) > 0.0);
        assert!(m00(0.12) < 0.0);
        // bisect the crossing, then the compatibility check reports failure
        let (mut lo, mut hi) = (0.12, 1.5);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if m00(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = TorusPoint::new(
            CVec::from_fn(1, |_, _| c64(0.5 * (lo + hi), 0.0)),
            vec![0.0],
            vec![PI],
        )
        .unwrap();
        let (ok, sv) = compatibility_check(&dom, &bps, &p, 1e-6, &params).unwrap();
        assert!(!ok, "min singular value {sv} at the crossing");
    }

    #[test]
    fn kahler_forms_block_identities() {
        let dom = CaskDomain::chn(1, 0.0, Some(1.0));
        let bps = bps_unit(2);
        let p = chn_point(2, (1.4, 0.2));
        let params = Numerics::default();
        let terms = support_terms(&dom, &bps, &p, &params).unwrap();
        let frame = frame_forms(&dom, &terms, &p, &params).unwrap();
        let [o1, _o2, o3] = kahler_forms_from_frame(&dom, &frame).unwrap();
        let chart = dom.chart();
        let m = dom.m();
        for i in 0..m {
            for j in 0..m {
                // ω₁(∂θ̃_i, ∂xʲ) = −δ_ij/2π
                let want = if i == j { -1.0 / (2.0 * PI) } else { 0.0 };
                assert!((o1[(chart.idx_tt(i), chart.idx_x(j))] - want).abs() < 1e-13);
                // ω₁(∂θⁱ, ∂uʲ) = −M_ij/2π
                assert!(
                    (o1[(chart.idx_th(i), chart.idx_u(j))] + frame.m_mat[(i, j)] / (2.0 * PI))
                        .abs()
                        < 1e-13
                );
                // ω₃(∂θ̃_i, ∂θʲ) = −δ_ij/4π²
                let want3 = if i == j { -1.0 / (4.0 * PI * PI) } else { 0.0 };
                assert!((o3[(chart.idx_tt(i), chart.idx_th(j))] - want3).abs() < 1e-13);
                // ω₃(∂xⁱ, ∂uʲ) = M_ij
                assert!((o3[(chart.idx_x(i), chart.idx_u(j))] - frame.m_mat[(i, j)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn trivial_support_reproduces_semiflat() {
        let dom = CaskDomain::chn(1, 0.0, None);
        let p = chn_point(2, (1.3, -0.4));
        let params = Numerics::default();
        let forms = kahler_forms(&dom, &BpsStructure::trivial(), &p, &params).unwrap();
        let sf = crate::cask::semiflat_forms(&dom, &p).unwrap();
        for k in 0..3 {
            assert!(
                crate::forms::max_abs(&(forms[k].clone() - sf[k].clone())) < 1e-13,
                "form {k}"
            );
        }
    }

    #[test]
    fn omega3_routes_agree_with_instantons() {
        let dom = CaskDomain::chn(1, 0.0, Some(1.0));
        let bps = bps_unit(2);
        let p = chn_point(2, (1.2, 0.5));
        let params = Numerics::default();
        let [_, _, o3] = kahler_forms(&dom, &bps, &p, &params).unwrap();
        let o3b = omega3_definition_route(&dom, &bps, &p, &params).unwrap();
        assert!(crate::forms::max_abs(&(o3 - o3b)) < 1e-12);
    }

    #[test]
    fn quaternion_relations_hold() {
        let dom = CaskDomain::chn(1, 0.0, Some(1.0));
        let bps = bps_unit(2);
        let p = chn_point(2, (1.25, 0.3));
        let params = Numerics::default();
        let sample = hk_sample(&dom, &bps, &p, &params).unwrap();
        let d = sample.g.nrows();
        let id = RMat::identity(d, d);
        for i in &sample.i_structs {
            assert!(crate::forms::max_abs(&(i * i + &id)) < 1e-9);
        }
        let i1i2 = &sample.i_structs[0] * &sample.i_structs[1];
        assert!(crate::forms::max_abs(&(i1i2 - &sample.i_structs[2])) < 1e-9);
        // metric symmetric and equal along both routes
        assert!(crate::forms::max_abs(&(sample.g.clone() - sample.g.transpose())) < 1e-10);
        assert!(crate::forms::max_abs(&(sample.g.clone() - sample.g_direct.clone())) < 1e-9);
        // metric compatibility ω_α = g I_α for each α
        for k in 0..3 {
            let got = -(sample.i_structs[k].transpose() * &sample.omega[k]);
            assert!(crate::forms::max_abs(&(got - &sample.g)) < 1e-9, "alpha {k}");
        }
    }

    #[test]
    fn hk_metric_flat_block_ch0() {
        let dom = CaskDomain::chn(0, 0.0, None);
        let p = TorusPoint::new(CVec::from_fn(1, |_, _| c64(1.0, 0.0)), vec![0.2], vec![0.9])
            .unwrap();
        let g = hk_metric(&dom, &BpsStructure::trivial(), &p, &Numerics::default()).unwrap();
        let chart = dom.chart();
        assert!((g[(chart.idx_x(0), chart.idx_x(0))] - 1.0).abs() < 1e-14);
        assert!((g[(chart.idx_tt(0), chart.idx_tt(0))] - 1.0 / (4.0 * PI * PI)).abs() < 1e-14);
    }

    #[test]
    fn signature_is_4_4n_at_large_radius() {
        let dom = CaskDomain::chn(1, 0.0, Some(1.0));
        let bps = bps_unit(2);
        let p = chn_point(2, (2.4, 0.3));
        let g = hk_metric(&dom, &bps, &p, &Numerics::default()).unwrap();
        let (pos, neg, nul) = metric_signature(&g, 1e-10);
        assert_eq!((pos, neg, nul), (4, 4, 0));
    }

    #[test]
    fn rotating_vector_components() {
        let dom = CaskDomain::chn(1, 0.0, None);
        let z = CVec::from_fn(2, |i, _| if i == 0 { c64(1.0, 0.0) } else { c64(0.0, 0.0) });
        let p = TorusPoint::new(z, vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let v = rotating_vector(dom.m(), &p);
        let chart = dom.chart();
        assert_eq!(v[chart.idx_x(0)], 0.0);
        assert_eq!(v[chart.idx_u(0)], 1.0);
        for i in 0..2 {
            assert_eq!(v[chart.idx_tt(i)], 0.0);
            assert_eq!(v[chart.idx_th(i)], 0.0);
        }
    }

    #[test]
    fn rotating_flow_rotates_central_charge() {
        // 𝓛_V Z_γ = iZ_γ: flowing by t multiplies Z_γ by e^{it}
        let dom = CaskDomain::chn(1, 0.0, None);
        let m = dom.m();
        let p = chn_point(2, (1.2, 0.4));
        let gamma = gamma0(2);
        let z0 = dom.central_charge(p.base(), &gamma).unwrap();
        let t = 1e-2;
        let chart_p = p.to_chart();
        let flowed = crate::forms::flow_rk4(
            |q| rotating_vector(m, &TorusPoint::from_chart_raw(m, q)),
            &chart_p,
            t,
            16,
        );
        let pf = TorusPoint::from_chart_raw(m, &flowed);
        let z1 = dom.central_charge(pf.base(), &gamma).unwrap();
        let want = z0 * c64(t.cos(), t.sin());
        assert!((z1 - want).norm() < 1e-8 * t);
    }

    #[test]
    fn closedness_and_negative_control() {
        // small |z⁰| keeps the dropped A_γ term large enough to be seen
        let dom = CaskDomain::chn(0, 0.0, Some(0.25));
        let bps = bps_unit(1);
        let params = Numerics::default();
        let p = TorusPoint::new(CVec::from_fn(1, |_, _| c64(0.3, 0.04)), vec![0.7], vec![1.3])
            .unwrap();
        let m = dom.m();

        let field = |q: &RVec| -> Result<RMat> {
            let tp = TorusPoint::from_chart_raw(m, q);
            let terms = support_terms(&dom, &bps, &tp, &params)?;
            let frame = frame_forms(&dom, &terms, &tp, &params)?;
            let [_, _, o3] = kahler_forms_from_frame(&dom, &frame)?;
            Ok(o3)
        };
        let r = exterior_derivative_residual(field, &p.to_chart(), params.h).unwrap();
        assert!(r < 1e-6, "closedness residual {r}");

        let corrupted = |q: &RVec| -> Result<RMat> {
            let tp = TorusPoint::from_chart_raw(m, q);
            let terms = support_terms(&dom, &bps, &tp, &params)?;
            let frame = frame_forms_with_options(&dom, &terms, &tp, &params, false)?;
            let [o1, _, _] = kahler_forms_from_frame(&dom, &frame)?;
            Ok(o1)
        };
        let r_bad = exterior_derivative_residual(corrupted, &p.to_chart(), params.h).unwrap();
        assert!(r_bad > 1e-3, "corrupted residual {r_bad}");
    }
}
