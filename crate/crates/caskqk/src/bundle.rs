//! Hyperholomorphic circle bundle over N and the HK/QK correspondence.
//!
//! The bundle P → N carries the connection
//!
//!   η = Θ + 2π[(i/4)(∂̄r² − ∂r²) + Σ_γ Ω(γ) η_γ − ι_V g_N],
//!   Θ = dσ − (1/4π)⟨θ, dθ⟩,
//!
//! whose curvature is 2π(ω₃ − d(ι_V g_N)). The moment functions
//! f = 2πr² − c + 4πΣΩι_Vη_γ and f₁ = f − 4π g_N(V,V) cut out the region
//! N' = {f ≠ 0, f₁ ≠ 0, g_N(X,X) ≠ 0}, and on the slice N̄ = {Arg z⁰ = 0}
//! the correspondence metric is
//!
//!   g_N̄ = −(1/f)(g_P − (2/f) Σᵢ (θᵢᴾ)²)|_N̄,  g_P = (2/f₁)η² + 2π g_N.
//!
//! This is the global route to the QK metric; it shares no assembled formula
//! with the coordinate route in [`crate::qk`], which makes their agreement a
//! strong mutual check.

use std::f64::consts::PI;

use crate::cask::CaskDomain;
use crate::error::{Error, Result};
use crate::forms::{
    c64, herm_pair, re_vec_checked, ChartKind, CMat, CVec, MetricSample, RMat, RVec,
};
use crate::hk::{
    frame_forms, kahler_forms_from_frame, rotating_vector, support_terms, ChargeTerm, NChart,
    Numerics, TorusPoint,
};
use crate::lattice::{BpsStructure, ChargeVector};
use crate::qk::{QkChart, QkPoint};

/// Point of the circle bundle in lift coordinates (σ has period π on the
/// quotient, with σ ↦ σ + ½⟨δ, θ⟩ under θ ↦ θ + 2πδ).
#[derive(Debug, Clone)]
pub struct BundlePoint {
    pub torus: TorusPoint,
    pub sigma: f64,
}

impl BundlePoint {
    pub fn new(torus: TorusPoint, sigma: f64) -> Self {
        Self { torus, sigma }
    }

    pub fn m(&self) -> usize {
        self.torus.m()
    }

    /// Chart (x, u, θ̃, θ, σ), dimension 4m + 1.
    pub fn to_chart(&self) -> RVec {
        let base = self.torus.to_chart();
        let d = base.len();
        RVec::from_fn(d + 1, |k, _| if k < d { base[k] } else { self.sigma })
    }

    pub fn from_chart_raw(m: usize, p: &RVec) -> Self {
        let base = RVec::from_fn(4 * m, |k, _| p[k]);
        Self {
            torus: TorusPoint::from_chart_raw(m, &base),
            sigma: p[4 * m],
        }
    }
}

/// σ index in the bundle chart.
pub fn sigma_index(m: usize) -> usize {
    4 * m
}

fn pad_vec(v: &RVec) -> RVec {
    RVec::from_fn(v.len() + 1, |k, _| if k < v.len() { v[k] } else { 0.0 })
}

fn pad_mat(m: &RMat) -> RMat {
    let d = m.nrows();
    RMat::from_fn(d + 1, d + 1, |r, c| if r < d && c < d { m[(r, c)] } else { 0.0 })
}

/// η_γ as an N-chart 1-form for one support charge.
pub fn eta_gamma_inst(
    dom: &CaskDomain,
    bps: &BpsStructure,
    gamma: &ChargeVector,
    p: &TorusPoint,
    params: &Numerics,
) -> Result<CVec> {
    let terms = support_terms(dom, bps, p, params)?;
    let chart = dom.chart();
    terms
        .iter()
        .find(|t| {
            (0..dom.m()).all(|i| (t.n_elec[i] - gamma.coeff_f64(dom.m() + i)).abs() < 0.5)
                && gamma.is_electric(dom.m())
        })
        .map(|t| t.eta_form(&chart))
        .ok_or_else(|| Error::Config("charge is not in the BPS support".into()))
}

/// Σ_γ Ω(γ) η_γ, a real N-chart 1-form.
pub fn eta_sum_form(chart: &NChart, terms: &[ChargeTerm]) -> Result<RVec> {
    let mut acc = CVec::zeros(chart.dim());
    for t in terms {
        acc += t.eta_form(chart) * c64(t.omega as f64, 0.0);
    }
    re_vec_checked(&acc, 1e-12)
}

/// Moment-type functions of the correspondence.
#[derive(Debug, Clone, Copy)]
pub struct MomentData {
    pub f: f64,
    pub f1: f64,
    pub f_inst: f64,
    pub f1_inst: f64,
    pub f_plus_inst: f64,
    pub f_minus_inst: f64,
    pub r2: f64,
    /// g_N(V, V).
    pub g_n_vv: f64,
}

/// Ambient data shared by the bundle-level operations at one fiber point.
pub struct AmbientFrame {
    pub chart: NChart,
    pub terms: Vec<ChargeTerm>,
    pub omega: [RMat; 3],
    pub g_n: RMat,
    pub v: RVec,
    pub r2: f64,
    pub moment: MomentData,
    /// Σ Ω η_γ as a chart form.
    pub eta_sum: RVec,
    /// (i/4)(∂̄r² − ∂r²) as a chart form.
    pub r2_rotation_form: RVec,
}

pub fn ambient_frame(
    dom: &CaskDomain,
    bps: &BpsStructure,
    p: &TorusPoint,
    params: &Numerics,
) -> Result<AmbientFrame> {
    let m = dom.m();
    let chart = dom.chart();
    let terms = support_terms(dom, bps, p, params)?;
    let frame = frame_forms(dom, &terms, p, params)?;
    let omega = kahler_forms_from_frame(dom, &frame)?;
    let g_n = crate::hk::hk_metric_direct(dom, &frame)?;
    let v = rotating_vector(m, p);
    let r2 = dom.cask_potential_r2(p.base())?;

    let mut f_inst_c = c64(0.0, 0.0);
    for t in &terms {
        f_inst_c += t.eta_of_v() * (4.0 * PI * t.omega as f64);
    }
    if f_inst_c.im.abs() > 1e-12 * (1.0 + f_inst_c.norm()) {
        return Err(Error::Config(format!(
            "f^inst has imaginary residue {:.3e}",
            f_inst_c.im
        )));
    }
    let f_inst = f_inst_c.re;
    let c = dom.one_loop_c;
    let f = 2.0 * PI * r2 - c + f_inst;
    let g_n_vv = (v.transpose() * &g_n * &v)[(0, 0)];
    let f1 = f - 4.0 * PI * g_n_vv;
    let f1_inst = f1 + 2.0 * PI * r2 + c;
    let moment = MomentData {
        f,
        f1,
        f_inst,
        f1_inst,
        f_plus_inst: 0.5 * (f_inst + f1_inst),
        f_minus_inst: 0.5 * (f_inst - f1_inst),
        r2,
        g_n_vv,
    };

    let eta_sum = eta_sum_form(&chart, &terms)?;

    // (i/4)(∂̄r² − ∂r²): on dx^k the coefficient Im((Nz̄)_k)/2, on du^k
    // Re((Nz̄)_k)/2, using dr² = N_kj z̄ʲ dz^k + c.c.
    let n_mat = dom.n_matrix(p.base())?;
    let mut rot = RVec::zeros(chart.dim());
    for k in 0..m {
        let mut nzbar = c64(0.0, 0.0);
        for j in 0..m {
            nzbar += c64(n_mat[(k, j)], 0.0) * p.base()[j].conj();
        }
        rot[chart.idx_x(k)] = 0.5 * nzbar.im;
        rot[chart.idx_u(k)] = 0.5 * nzbar.re;
    }

    Ok(AmbientFrame {
        chart,
        terms,
        omega,
        g_n,
        v,
        r2,
        moment,
        eta_sum,
        r2_rotation_form: rot,
    })
}

pub fn moment_data(
    dom: &CaskDomain,
    bps: &BpsStructure,
    p: &TorusPoint,
    params: &Numerics,
) -> Result<MomentData> {
    Ok(ambient_frame(dom, bps, p, params)?.moment)
}

/// Classification against the region N' and its positivity core N'₊.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    OutsideNPrime,
    InNPrime,
    InNPrimePlus,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::OutsideNPrime => write!(f, "outside-N'"),
            Self::InNPrime => write!(f, "in-N'"),
            Self::InNPrimePlus => write!(f, "in-N'+"),
        }
    }
}

pub fn region_classify(
    dom: &CaskDomain,
    bps: &BpsStructure,
    p: &TorusPoint,
    params: &Numerics,
) -> Result<(Region, MomentData)> {
    let md = moment_data(dom, bps, p, params)?;
    let thr = params.region_threshold;
    let g_xx = 4.0 * md.g_n_vv; // X = 2V
    let region = if md.f.abs() <= thr || md.f1.abs() <= thr || g_xx.abs() <= thr {
        Region::OutsideNPrime
    } else if md.f > 0.0 && md.f1 < 0.0 {
        Region::InNPrimePlus
    } else {
        Region::InNPrime
    };
    Ok((region, md))
}

/// Θ = dσ − (1/4π)⟨θ, dθ⟩ over the bundle chart.
pub fn theta_connection(m: usize, p: &TorusPoint) -> RVec {
    let chart = NChart::new(m);
    let d = chart.dim() + 1;
    let mut v = RVec::zeros(d);
    v[sigma_index(m)] = 1.0;
    for i in 0..m {
        v[chart.idx_th(i)] = -p.theta_tilde()[i] / (4.0 * PI);
        v[chart.idx_tt(i)] = p.theta()[i] / (4.0 * PI);
    }
    v
}

/// The hyperholomorphic connection η as a bundle-chart 1-form; the dσ
/// coefficient is identically 1.
pub fn connection_eta(
    dom: &CaskDomain,
    bps: &BpsStructure,
    bp: &BundlePoint,
    params: &Numerics,
) -> Result<RVec> {
    let frame = ambient_frame(dom, bps, &bp.torus, params)?;
    Ok(connection_eta_from(dom, &frame, bp))
}

fn connection_eta_from(dom: &CaskDomain, frame: &AmbientFrame, bp: &BundlePoint) -> RVec {
    let m = dom.m();
    let theta = theta_connection(m, &bp.torus);
    let iota_v_g = &frame.g_n * &frame.v;
    let n_part = (&frame.r2_rotation_form + &frame.eta_sum - &iota_v_g) * (2.0 * PI);
    theta + pad_vec(&n_part)
}

/// The four 1-forms θᵢᴾ of the correspondence over the bundle chart.
pub fn theta_p_forms(
    dom: &CaskDomain,
    bps: &BpsStructure,
    bp: &BundlePoint,
    params: &Numerics,
) -> Result<[RVec; 4]> {
    let frame = ambient_frame(dom, bps, &bp.torus, params)?;
    Ok(theta_p_from(dom, &frame, bp))
}

fn theta_p_from(dom: &CaskDomain, frame: &AmbientFrame, bp: &BundlePoint) -> [RVec; 4] {
    // ι_X ω as a covector has components (Ωᵀ X)_j = ω(X, e_j)
    let iota = |w: &RMat, x: &RVec| -> RVec { w.transpose() * x };
    // θ₀ = −½df with df = −4π ι_V ω₃
    let theta0 = pad_vec(&(iota(&frame.omega[2], &frame.v) * (2.0 * PI)));
    // θ₁ = η + 2π ι_V g_N
    let eta = connection_eta_from(dom, frame, bp);
    let theta1 = eta + pad_vec(&((&frame.g_n * &frame.v) * (2.0 * PI)));
    // θ₂ = 2π ι_V ω₂, θ₃ = −2π ι_V ω₁
    let theta2 = pad_vec(&(iota(&frame.omega[1], &frame.v) * (2.0 * PI)));
    let theta3 = pad_vec(&(iota(&frame.omega[0], &frame.v) * (-2.0 * PI)));
    [theta0, theta1, theta2, theta3]
}

/// g_P = (2/f₁) η² + 2π g_N on the bundle chart.
pub fn g_p_metric(
    dom: &CaskDomain,
    bps: &BpsStructure,
    bp: &BundlePoint,
    params: &Numerics,
) -> Result<RMat> {
    let frame = ambient_frame(dom, bps, &bp.torus, params)?;
    let eta = connection_eta_from(dom, &frame, bp);
    Ok(&eta * eta.transpose() * (2.0 / frame.moment.f1) + pad_mat(&frame.g_n) * (2.0 * PI))
}

/// X₁ᴾ = X̃ + f₁ ∂_σ with X = 2V lifted through the trivialization.
pub fn x1_vector(
    dom: &CaskDomain,
    bps: &BpsStructure,
    bp: &BundlePoint,
    params: &Numerics,
) -> Result<RVec> {
    let frame = ambient_frame(dom, bps, &bp.torus, params)?;
    let mut v = pad_vec(&(&frame.v * 2.0));
    v[sigma_index(dom.m())] += frame.moment.f1;
    Ok(v)
}

/// Embeds a slice point into the bundle: z⁰ real positive with
/// |z⁰|² = ((ρ+c)/2π) e^𝒦, zᵃ = z⁰ Xᵃ.
pub fn embed_qk_point(dom: &CaskDomain, q: &QkPoint) -> Result<BundlePoint> {
    let m = dom.m();
    if q.m() != m {
        return Err(Error::DimensionMismatch { expected: m, got: q.m() });
    }
    let z0 = q.abs_z0_sq(dom)?.sqrt();
    let z = CVec::from_fn(m, |i, _| {
        if i == 0 {
            c64(z0, 0.0)
        } else {
            q.x[i - 1] * z0
        }
    });
    let torus = TorusPoint::new(z, q.theta_tilde.clone(), q.theta.clone())?;
    Ok(BundlePoint::new(torus, q.sigma))
}

/// Jacobian of the slice embedding, mapping slice chart differentials into
/// bundle chart differentials. The Arg z⁰ direction is transverse to the
/// slice, so the u⁰ row vanishes.
pub fn slice_jacobian(dom: &CaskDomain, q: &QkPoint) -> Result<RMat> {
    let n = dom.n();
    let m = dom.m();
    let qchart = QkChart::new(n);
    let nchart = NChart::new(m);
    let rho = q.rho;
    let c = dom.one_loop_c;
    let z0 = q.abs_z0_sq(dom)?.sqrt();
    let dk = dom.dk_dx(&q.x)?;

    // ∂z⁰/∂ρ and ∂z⁰/∂(Re X, Im X) through 𝒦
    let dz0_drho = z0 / (2.0 * (rho + c));
    let mut dz0 = RVec::zeros(qchart.dim());
    dz0[qchart.idx_rho()] = dz0_drho;
    for a in 0..n {
        dz0[qchart.idx_rex(a)] = z0 * dk[a].re; // (z⁰/2)·2Re ∂𝒦
        dz0[qchart.idx_imx(a)] = -z0 * dk[a].im;
    }

    let mut jac = RMat::zeros(nchart.dim() + 1, qchart.dim());
    // x⁰ = z⁰, u⁰ = 0
    for k in 0..qchart.dim() {
        jac[(nchart.idx_x(0), k)] = dz0[k];
    }
    // xᵃ = z⁰ Re Xᵃ, uᵃ = z⁰ Im Xᵃ
    for a in 0..n {
        let i = a + 1;
        for k in 0..qchart.dim() {
            jac[(nchart.idx_x(i), k)] = dz0[k] * q.x[a].re;
            jac[(nchart.idx_u(i), k)] = dz0[k] * q.x[a].im;
        }
        jac[(nchart.idx_x(i), qchart.idx_rex(a))] += z0;
        jac[(nchart.idx_u(i), qchart.idx_imx(a))] += z0;
    }
    // angles and σ map identically
    for i in 0..m {
        jac[(nchart.idx_tt(i), qchart.idx_tt(i))] = 1.0;
        jac[(nchart.idx_th(i), qchart.idx_th(i))] = 1.0;
    }
    jac[(sigma_index(m), qchart.idx_sigma())] = 1.0;
    Ok(jac)
}

/// The correspondence metric restricted to the slice chart:
/// g_N̄ = −(1/f)(g_P − (2/f) Σ (θᵢᴾ)²) pulled back through the embedding.
pub fn qk_metric_global(
    dom: &CaskDomain,
    bps: &BpsStructure,
    q: &QkPoint,
    params: &Numerics,
) -> Result<MetricSample> {
    let bp = embed_qk_point(dom, q)?;
    let frame = ambient_frame(dom, bps, &bp.torus, params)?;
    let md = frame.moment;
    let g_xx = 4.0 * md.g_n_vv;
    if md.f.abs() <= params.region_threshold
        || md.f1.abs() <= params.region_threshold
        || g_xx.abs() <= params.region_threshold
    {
        return Err(Error::OutsideNPrime {
            f: md.f,
            f1: md.f1,
            gxx: g_xx,
        });
    }

    let eta = connection_eta_from(dom, &frame, &bp);
    let mut g_amb = &eta * eta.transpose() * (2.0 / md.f1) + pad_mat(&frame.g_n) * (2.0 * PI);
    for theta in theta_p_from(dom, &frame, &bp) {
        g_amb -= &theta * theta.transpose() * (2.0 / md.f);
    }
    g_amb = g_amb.unscale(-md.f);

    let jac = slice_jacobian(dom, q)?;
    let g = jac.transpose() * g_amb * jac;
    Ok(MetricSample::new(ChartKind::QkSlice { n: dom.n() }, g))
}

/// ι_V g_N as an N-chart 1-form; the field the curvature identity subtracts.
pub fn iota_v_g_field(
    dom: &CaskDomain,
    bps: &BpsStructure,
    p: &TorusPoint,
    params: &Numerics,
) -> Result<RVec> {
    let terms = support_terms(dom, bps, p, params)?;
    let frame = frame_forms(dom, &terms, p, params)?;
    let g_n = crate::hk::hk_metric_direct(dom, &frame)?;
    Ok(&g_n * rotating_vector(dom.m(), p))
}

/// Hermitian-pair helper for tests comparing complex combinations.
pub fn herm_matrix(a: &CVec, b: &CVec) -> CMat {
    herm_pair(a, b)
}
