//! Fisher information and Cramér-Rao bounds for joint range/angle
//! estimation of a bistatic near-field target with unknown complex gain.
//!
//! The echo mean is `β G X` with `G = b(r_r, θ_r) a^H(r_t, θ_t)`; the receive
//! coordinates depend on the transmit ones through the bistatic map, so the
//! derivatives of `G` chain-rule through it.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{center_offset, near_focusing, rx_geometry, ArrayConfig, PolarCoord};
use crate::numkernel::{pinv_sym2, CMatrix};
use crate::sensing::TargetTruth;

type Mat2 = [[f64; 2]; 2];

/// Parameter vector `[r_t, θ_t, Re β, Im β]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimationParams {
    pub r_t: f64,
    pub theta_t: f64,
    pub beta_re: f64,
    pub beta_im: f64,
}

impl From<&TargetTruth> for EstimationParams {
    fn from(t: &TargetTruth) -> Self {
        Self {
            r_t: t.tx.range,
            theta_t: t.tx.angle,
            beta_re: t.beta.re,
            beta_im: t.beta.im,
        }
    }
}

/// `G = b(r_r, θ_r) a^H(r_t, θ_t)`.
pub fn g_matrix(truth: &TargetTruth, cfg_tx: &ArrayConfig, cfg_rx: &ArrayConfig) -> CMatrix {
    near_focusing(cfg_rx, &truth.rx) * near_focusing(cfg_tx, &truth.tx).adjoint()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
    /// Treats the receive vector as constant. Wrong on purpose; kept to show
    /// the size of the error the chain rule removes.
    FixedReceiver,
}

/// Partial derivatives of the focusing vector with respect to (r, θ).
fn focusing_partials(cfg: &ArrayConfig, p: &PolarCoord) -> (CMatrix, CMatrix, CMatrix) {
    let k = 2.0 * PI / cfg.wavelength;
    let (s, c) = p.angle.sin_cos();
    let r = p.range;
    let n = cfg.n_elements;
    let mut a = CMatrix::zeros(n, 1);
    let mut da_r = CMatrix::zeros(n, 1);
    let mut da_t = CMatrix::zeros(n, 1);
    for i in 0..n {
        let x = cfg.delta(i) * cfg.spacing;
        let rn = (r * r + x * x - 2.0 * r * x * s).sqrt();
        let an = Complex64::from_polar(1.0, -k * (rn - r));
        let drn_r = (r - x * s) / rn;
        let drn_t = -r * x * c / rn;
        let mj = Complex64::new(0.0, -k);
        a[i] = an;
        da_r[i] = mj * (drn_r - 1.0) * an;
        da_t[i] = mj * drn_t * an;
    }
    (a, da_r, da_t)
}

/// Jacobian `∂(r_r, θ_r)/∂(r_t, θ_t)` of the bistatic map.
pub fn bistatic_jacobian(tx: &PolarCoord, rx: &PolarCoord, offset: f64) -> Mat2 {
    let (st, ct) = tx.angle.sin_cos();
    let (rt, rr) = (tx.range, rx.range);
    let cr = rx.angle.cos();
    let drr = [(rt - offset * st) / rr, -rt * offset * ct / rr];
    let num = offset - rt * st;
    let dnum = [-st, -rt * ct];
    let dth = [0, 1].map(|i| ((dnum[i] * rr - num * drr[i]) / (rr * rr)) / cr);
    [drr, dth]
}

/// Total derivatives `(∂G/∂r_t, ∂G/∂θ_t)`.
pub fn g_derivatives(
    truth: &TargetTruth,
    cfg_tx: &ArrayConfig,
    cfg_rx: &ArrayConfig,
    mode: DerivativeMode,
) -> Result<(CMatrix, CMatrix)> {
    match mode {
        DerivativeMode::Analytic | DerivativeMode::FixedReceiver => {
            let (a, da_r, da_t) = focusing_partials(cfg_tx, &truth.tx);
            let (b, db_r, db_t) = focusing_partials(cfg_rx, &truth.rx);
            let (dbx_r, dbx_t) = if mode == DerivativeMode::Analytic {
                let jac = bistatic_jacobian(&truth.tx, &truth.rx, center_offset(cfg_tx, cfg_rx));
                (
                    db_r.scale(jac[0][0]) + db_t.scale(jac[1][0]),
                    db_r.scale(jac[0][1]) + db_t.scale(jac[1][1]),
                )
            } else {
                (CMatrix::zeros(b.nrows(), 1), CMatrix::zeros(b.nrows(), 1))
            };
            let ah = a.adjoint();
            Ok((
                &dbx_r * &ah + &b * da_r.adjoint(),
                &dbx_t * &ah + &b * da_t.adjoint(),
            ))
        }
        DerivativeMode::FiniteDifference => {
            let at = |r: f64, t: f64| -> Result<CMatrix> {
                let tx = PolarCoord { range: r, angle: t };
                let rx = rx_geometry(&tx, cfg_tx, cfg_rx)?;
                Ok(g_matrix(&TargetTruth { beta: truth.beta, tx, rx }, cfg_tx, cfg_rx))
            };
            let (r, t) = (truth.tx.range, truth.tx.angle);
            let (hr, ht) = (1e-4 * r, 1e-6);
            let gr = (at(r + hr, t)? - at(r - hr, t)?).unscale(2.0 * hr);
            let gt = (at(r, t + ht)? - at(r, t - ht)?).unscale(2.0 * ht);
            Ok((gr, gt))
        }
    }
}

/// Trace quantities shared by the FIM blocks and the closed-form bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceTerms {
    /// `tr(G R G^H)`.
    pub t_gg: f64,
    /// `tr(G R Ġ_l^H)`.
    pub t_g: [Complex64; 2],
    /// `tr(Ġ_p R Ġ_l^H)` at `[l][p]`.
    pub t_dd: [[Complex64; 2]; 2],
}

impl TraceTerms {
    pub fn compute(g: &CMatrix, dg: [&CMatrix; 2], r_x: &CMatrix) -> Self {
        let gr = g * r_x;
        let dr = [dg[0] * r_x, dg[1] * r_x];
        let tr = |a: &CMatrix, b: &CMatrix| -> Complex64 {
            // tr(A B^H) without forming the product.
            a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
        };
        Self {
            t_gg: tr(&gr, g).re,
            t_g: [tr(&gr, dg[0]), tr(&gr, dg[1])],
            t_dd: [
                [tr(&dr[0], dg[0]), tr(&dr[1], dg[0])],
                [tr(&dr[0], dg[1]), tr(&dr[1], dg[1])],
            ],
        }
    }

    /// `M_lp = Re{tr(Ġ_p R Ġ_l^H)·T − t_l t_p*}`.
    pub fn m_matrix(&self) -> Mat2 {
        let mut m = [[0.0; 2]; 2];
        for (l, row) in m.iter_mut().enumerate() {
            for (p, v) in row.iter_mut().enumerate() {
                *v = (self.t_dd[l][p] * self.t_gg - self.t_g[l] * self.t_g[p].conj()).re;
            }
        }
        m
    }
}

/// Real Fisher information blocks for `[r_t, θ_t]` and `[Re β, Im β]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FimBlocks {
    pub j_phiphi: Mat2,
    pub j_phibeta: Mat2,
    pub j_betabeta: Mat2,
    pub terms: TraceTerms,
    pub beta: Complex64,
    pub snapshots: usize,
    pub noise_power: f64,
}

impl FimBlocks {
    /// Full 4×4 information matrix, ordered `[r_t, θ_t, Re β, Im β]`.
    pub fn full(&self) -> [[f64; 4]; 4] {
        let mut j = [[0.0; 4]; 4];
        for l in 0..2 {
            for p in 0..2 {
                j[l][p] = self.j_phiphi[l][p];
                j[l][p + 2] = self.j_phibeta[l][p];
                j[p + 2][l] = self.j_phibeta[l][p];
                j[l + 2][p + 2] = self.j_betabeta[l][p];
            }
        }
        j
    }
}

pub fn fim_blocks(
    g: &CMatrix,
    dg_r: &CMatrix,
    dg_theta: &CMatrix,
    r_x: &CMatrix,
    beta: Complex64,
    snapshots: usize,
    noise_power: f64,
) -> Result<FimBlocks> {
    if !(noise_power > 0.0) {
        return Err(Error::arg("noise_power", "must be positive"));
    }
    if snapshots == 0 {
        return Err(Error::arg("snapshots", "need at least one snapshot"));
    }
    let terms = TraceTerms::compute(g, [dg_r, dg_theta], r_x);
    let c = 2.0 * snapshots as f64 / noise_power;
    let b2 = beta.norm_sqr();
    let mut j_phiphi = [[0.0; 2]; 2];
    let mut j_phibeta = [[0.0; 2]; 2];
    for l in 0..2 {
        for p in 0..2 {
            j_phiphi[l][p] = c * b2 * terms.t_dd[l][p].re;
        }
        let z = beta.conj() * terms.t_g[l];
        j_phibeta[l] = [c * z.re, -c * z.im];
    }
    // The real part of a Hermitian form is symmetric; drop rounding asymmetry.
    let off = 0.5 * (j_phiphi[0][1] + j_phiphi[1][0]);
    j_phiphi[0][1] = off;
    j_phiphi[1][0] = off;
    let jb = c * terms.t_gg;
    Ok(FimBlocks {
        j_phiphi,
        j_phibeta,
        j_betabeta: [[jb, 0.0], [0.0, jb]],
        terms,
        beta,
        snapshots,
        noise_power,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrbStatus {
    Finite,
    /// The Schur complement is singular; the pseudo-inverse was used.
    RankDeficient,
    /// No echo power or zero gain: the parameters are not identifiable.
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrbReport {
    pub crb_matrix: Mat2,
    pub crb_r: f64,
    pub crb_theta: f64,
    pub rcrb_r: f64,
    pub rcrb_theta: f64,
    /// `|β|² L P_t / σ²`; NaN when the transmit power is unknown.
    pub snr_r: f64,
    pub status: CrbStatus,
    /// The trace-form closed expression, evaluated independently.
    pub closed_form: Mat2,
}

fn infinite_report(snr_r: f64) -> CrbReport {
    let inf = f64::INFINITY;
    CrbReport {
        crb_matrix: [[inf, 0.0], [0.0, inf]],
        crb_r: inf,
        crb_theta: inf,
        rcrb_r: inf,
        rcrb_theta: inf,
        snr_r,
        status: CrbStatus::Infinite,
        closed_form: [[inf, 0.0], [0.0, inf]],
    }
}

fn not_identifiable(blocks: &FimBlocks) -> bool {
    let scale = blocks.terms.t_dd[0][0].norm() + blocks.terms.t_dd[1][1].norm();
    blocks.beta.norm_sqr() == 0.0 || !(blocks.terms.t_gg > 1e-15 * scale.max(f64::MIN_POSITIVE))
}

/// Closed-form bound `σ² T / (2 |β|² L) · M^†`.
pub fn crb_closed_form(blocks: &FimBlocks) -> Mat2 {
    let pre = blocks.noise_power * blocks.terms.t_gg / (2.0 * blocks.beta.norm_sqr() * blocks.snapshots as f64);
    let p = pinv_sym2(blocks.terms.m_matrix());
    [[pre * p[0][0], pre * p[0][1]], [pre * p[1][0], pre * p[1][1]]]
}

/// Bound on `[r_t, θ_t]` from the Schur complement of the `β` block. The
/// transmit power is only needed for the reported SNR.
pub fn crb_matrix(blocks: &FimBlocks, p_t: Option<f64>) -> CrbReport {
    let snr = p_t.map_or(f64::NAN, |p| snr_r(blocks.beta, blocks.snapshots, p, blocks.noise_power));
    if not_identifiable(blocks) {
        return infinite_report(snr);
    }
    let jb = blocks.j_betabeta[0][0];
    let (a, j) = (blocks.j_phiphi, blocks.j_phibeta);
    let mut s = [[0.0; 2]; 2];
    for l in 0..2 {
        for p in 0..2 {
            s[l][p] = a[l][p] - (j[l][0] * j[p][0] + j[l][1] * j[p][1]) / jb;
        }
    }
    let crb = pinv_sym2(s);
    let tr = s[0][0] + s[1][1];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let status = if det > 1e-12 * tr * tr {
        CrbStatus::Finite
    } else {
        CrbStatus::RankDeficient
    };
    let closed = crb_closed_form(blocks);
    let delta = (0..2)
        .flat_map(|i| (0..2).map(move |k| (i, k)))
        .map(|(i, k)| (crb[i][k] - closed[i][k]).abs())
        .fold(0.0, f64::max);
    let scale = crb[0][0].abs().max(crb[1][1].abs());
    if delta > 1e-6 * scale {
        log::warn!("closed-form and Schur CRB differ by {delta:e} (scale {scale:e})");
    }
    CrbReport {
        crb_matrix: crb,
        crb_r: crb[0][0],
        crb_theta: crb[1][1],
        rcrb_r: crb[0][0].max(0.0).sqrt(),
        rcrb_theta: crb[1][1].max(0.0).sqrt(),
        snr_r: snr,
        status,
        closed_form: closed,
    }
}

/// Angle bound when the range is known, `σ² T / (2 |β|² L M_22)`.
pub fn crb_theta_known_range(blocks: &FimBlocks) -> f64 {
    known_param(blocks, 1)
}

/// Range bound when the angle is known, `σ² T / (2 |β|² L M_11)`.
pub fn crb_range_known_angle(blocks: &FimBlocks) -> f64 {
    known_param(blocks, 0)
}

fn known_param(blocks: &FimBlocks, i: usize) -> f64 {
    if not_identifiable(blocks) {
        return f64::INFINITY;
    }
    let m = blocks.terms.m_matrix()[i][i];
    if !(m > 0.0) {
        return f64::INFINITY;
    }
    blocks.noise_power * blocks.terms.t_gg / (2.0 * blocks.beta.norm_sqr() * blocks.snapshots as f64 * m)
}

/// Radar receive SNR `|β|² L P_t / σ²`.
pub fn snr_r(beta: Complex64, snapshots: usize, p_t: f64, noise_power: f64) -> f64 {
    beta.norm_sqr() * snapshots as f64 * p_t / noise_power
}

/// Noise power that yields a target radar SNR.
pub fn noise_for_snr_r(beta: Complex64, snapshots: usize, p_t: f64, snr: f64) -> f64 {
    beta.norm_sqr() * snapshots as f64 * p_t / snr
}

/// End-to-end bound for a transmit covariance.
pub fn crb_for_covariance(
    truth: &TargetTruth,
    cfg_tx: &ArrayConfig,
    cfg_rx: &ArrayConfig,
    r_x: &CMatrix,
    snapshots: usize,
    noise_power: f64,
    p_t: f64,
) -> Result<CrbReport> {
    let g = g_matrix(truth, cfg_tx, cfg_rx);
    let (dr, dt) = g_derivatives(truth, cfg_tx, cfg_rx, DerivativeMode::Analytic)?;
    let blocks = fim_blocks(&g, &dr, &dt, r_x, truth.beta, snapshots, noise_power)?;
    Ok(crb_matrix(&blocks, Some(p_t)))
}
