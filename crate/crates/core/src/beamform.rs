//! Reference precoders and the weighted communication/radar trade-off design.
//!
//! The trade-off objective for a weight `η` is
//! `η‖F − F_com‖² + (1 − η)‖F − F_rad F_u‖²` subject to `‖F‖² = P_t`, where
//! `F_u` is a unit-norm auxiliary row.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{ChannelMatrix, Model};
use crate::error::{Error, Result};
use crate::geometry::{far_steering, near_focusing, ArrayConfig, PolarCoord};
use crate::numkernel::{frob2, hermitian_eig, pinv, svd_thin, CMatrix};

/// `N_t × K` precoder normalized to its power budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Precoder {
    pub entries: CMatrix,
    pub power_budget: f64,
}

impl Precoder {
    /// Scales `m` to Frobenius power `p_t`.
    pub fn normalized(m: CMatrix, p_t: f64) -> Result<Self> {
        if !(p_t > 0.0) {
            return Err(Error::arg("p_t", "must be positive"));
        }
        let norm = m.norm();
        if !(norm > 0.0) {
            return Err(Error::Contract("cannot normalize a zero precoder".into()));
        }
        Ok(Self {
            entries: m.scale(p_t.sqrt() / norm),
            power_budget: p_t,
        })
    }

    pub fn power(&self) -> f64 {
        frob2(&self.entries)
    }

    pub fn n_streams(&self) -> usize {
        self.entries.ncols()
    }
}

fn dependent_rows(h: &CMatrix) -> Vec<usize> {
    let scale = h.norm().max(f64::MIN_POSITIVE);
    let mut basis: Vec<CMatrix> = Vec::new();
    let mut bad = Vec::new();
    for k in 0..h.nrows() {
        let mut v = h.rows(k, 1).adjoint();
        for _ in 0..2 {
            for b in &basis {
                let p = (b.adjoint() * &v)[0];
                v -= b * p;
            }
        }
        let n = v.norm();
        if n <= 1e-10 * scale {
            bad.push(k);
        } else {
            basis.push(v.unscale(n));
        }
    }
    bad
}

/// Zero-forcing precoder `H^H (H H^H)^{-1}` scaled to `P_t`.
pub fn zf_precoder(h: &ChannelMatrix, p_t: f64) -> Result<Precoder> {
    let rows = dependent_rows(&h.entries);
    if !rows.is_empty() {
        return Err(Error::RankDeficient { rows });
    }
    Precoder::normalized(pinv(&h.entries, None)?, p_t)
}

/// Response used by a design model.
pub fn design_response(cfg: &ArrayConfig, p: &PolarCoord, model: Model) -> CMatrix {
    match model {
        Model::Near => near_focusing(cfg, p),
        Model::Far => far_steering(cfg, p.angle),
    }
}

/// Single-beam radar precoder matched to the target response.
pub fn radar_precoder(cfg: &ArrayConfig, target: &PolarCoord, p_t: f64, model: Model) -> Result<Precoder> {
    Precoder::normalized(design_response(cfg, target, model), p_t)
}

/// Closed-form orthogonal Procrustes solution
/// `argmin_{F_u F_u^H = 1} ‖F_com − F_rad F_u‖_F`.
pub fn opp_aux(f_rad: &CMatrix, f_com: &CMatrix) -> Result<CMatrix> {
    if f_rad.ncols() != 1 || f_rad.nrows() != f_com.nrows() {
        return Err(Error::Contract("opp_aux needs an N x 1 radar beam matching F_com".into()));
    }
    let ns = f_com.ncols();
    let m = f_rad.adjoint() * f_com;
    if m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        let mut e = CMatrix::zeros(1, ns);
        e[(0, 0)] = Complex64::new(1.0, 0.0);
        return Ok(e);
    }
    let (u, _, v) = svd_thin(&m)?;
    Ok(u.columns(0, 1) * v.columns(0, 1).adjoint())
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::arg("eta", format!("must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

/// Trade-off objective at `(F, F_u)`.
pub fn tradeoff_objective(f: &CMatrix, f_com: &CMatrix, f_rad: &CMatrix, f_u: &CMatrix, eta: f64) -> f64 {
    eta * frob2(&(f - f_com)) + (1.0 - eta) * frob2(&(f - f_rad * f_u))
}

/// Unconstrained least-squares minimizer, `η F_com + (1 − η) F_rad F_u`.
pub fn ls_unscaled(f_com: &CMatrix, f_rad: &CMatrix, f_u: &CMatrix, eta: f64) -> CMatrix {
    f_com.scale(eta) + (f_rad * f_u).scale(1.0 - eta)
}

/// The same minimizer through the stacked system `A† B`; used to cross-check
/// [`ls_unscaled`].
pub fn ls_unscaled_stacked(f_com: &CMatrix, f_rad: &CMatrix, f_u: &CMatrix, eta: f64) -> Result<CMatrix> {
    let n = f_com.nrows();
    let (a1, a2) = (eta.sqrt(), (1.0 - eta).sqrt());
    let mut a = CMatrix::zeros(2 * n, n);
    a.view_mut((0, 0), (n, n)).copy_from(&CMatrix::identity(n, n).scale(a1));
    a.view_mut((n, 0), (n, n)).copy_from(&CMatrix::identity(n, n).scale(a2));
    let mut b = CMatrix::zeros(2 * n, f_com.ncols());
    b.view_mut((0, 0), f_com.shape()).copy_from(&f_com.scale(a1));
    b.view_mut((n, 0), f_com.shape()).copy_from(&(f_rad * f_u).scale(a2));
    Ok(pinv(&a, None)? * b)
}

/// Outcome of a trade-off design.
#[derive(Clone, Debug)]
pub struct TradeoffDesign {
    pub precoder: Precoder,
    pub aux: CMatrix,
    pub objective: f64,
}

/// Single-shot design: OPP auxiliary row from `(F_rad, F_com)`, then the
/// scaled LS solution.
pub fn tradeoff_ls(f_com: &Precoder, f_rad: &Precoder, eta: f64, p_t: f64) -> Result<TradeoffDesign> {
    check_eta(eta)?;
    let (com, rad) = (&f_com.entries, &f_rad.entries);
    let f_u = opp_aux(rad, com)?;
    let precoder = if eta == 1.0 {
        Precoder::normalized(com.clone(), p_t)?
    } else if eta == 0.0 {
        Precoder::normalized(rad * &f_u, p_t)?
    } else {
        Precoder::normalized(ls_unscaled(com, rad, &f_u, eta), p_t)?
    };
    let objective = tradeoff_objective(&precoder.entries, com, rad, &f_u, eta);
    Ok(TradeoffDesign {
        precoder,
        aux: f_u,
        objective,
    })
}

/// Starting auxiliary row for alternating minimization.
#[derive(Clone, Copy, Debug, Default)]
pub enum AmInit {
    /// Normalized all-ones row.
    #[default]
    Ones,
    /// Random unit row drawn from the given seed.
    Random(u64),
}

#[derive(Clone, Debug)]
pub struct AmOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations to run before the tolerance test is allowed to stop the loop.
    pub min_iter: usize,
    pub init: AmInit,
}

impl Default for AmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
            min_iter: 0,
            init: AmInit::Ones,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AmDesign {
    pub design: TradeoffDesign,
    /// Objective after each full iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Alternating minimization between the LS precoder step and the OPP
/// auxiliary-row step.
pub fn tradeoff_am(f_com: &Precoder, f_rad: &Precoder, eta: f64, p_t: f64, opts: &AmOptions) -> Result<AmDesign> {
    check_eta(eta)?;
    if !(opts.tol > 0.0) {
        return Err(Error::arg("tol", "must be positive"));
    }
    let (com, rad) = (&f_com.entries, &f_rad.entries);
    let ns = com.ncols();
    let mut f_u = match opts.init {
        AmInit::Ones => CMatrix::from_element(1, ns, Complex64::new(1.0, 0.0)),
        AmInit::Random(seed) => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            CMatrix::from_fn(1, ns, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            })
        }
    };
    f_u = f_u.unscale(f_u.norm());

    if eta == 1.0 {
        let precoder = Precoder::normalized(com.clone(), p_t)?;
        let objective = tradeoff_objective(&precoder.entries, com, rad, &f_u, eta);
        return Ok(AmDesign {
            design: TradeoffDesign {
                precoder,
                aux: f_u,
                objective,
            },
            trace: vec![objective],
            converged: true,
        });
    }

    let mut trace = Vec::new();
    let mut best: Option<TradeoffDesign> = None;
    let mut converged = false;
    for k in 0..opts.max_iter.max(1) {
        let precoder = Precoder::normalized(ls_unscaled(com, rad, &f_u, eta), p_t)?;
        f_u = opp_aux(rad, &precoder.entries)?;
        let objective = tradeoff_objective(&precoder.entries, com, rad, &f_u, eta);
        let prev = trace.last().copied();
        trace.push(objective);
        if best.as_ref().is_none_or(|b| objective <= b.objective) {
            best = Some(TradeoffDesign {
                precoder,
                aux: f_u.clone(),
                objective,
            });
        }
        if k + 1 >= opts.min_iter && prev.is_some_and(|p| (p - objective).abs() <= opts.tol) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("alternating minimization stopped after {} iterations", trace.len());
    }
    Ok(AmDesign {
        design: best.expect("at least one iteration"),
        trace,
        converged,
    })
}

/// Transmit covariance `F F^H`.
pub fn tx_covariance(f: &Precoder) -> CMatrix {
    &f.entries * f.entries.adjoint()
}

/// Factor `R = Σ λ_i u_i u_i^H` keeping the numerically positive part.
fn psd_factor(r: &CMatrix) -> Result<Vec<(f64, CMatrix)>> {
    let (vals, vecs) = hermitian_eig(r)?;
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    Ok(vals
        .iter()
        .enumerate()
        .filter(|(_, l)| **l > 1e-14 * top && **l > 0.0)
        .map(|(i, l)| (*l, vecs.columns(i, 1).into_owned()))
        .collect())
}

fn gain(factor: &[(f64, CMatrix)], a: &CMatrix) -> f64 {
    factor
        .iter()
        .map(|(l, u)| l * (u.adjoint() * a)[0].norm_sqr())
        .sum()
}

/// Angular beampattern `a^H(θ) R a(θ)`.
pub fn beampattern_far(r: &CMatrix, cfg: &ArrayConfig, angles: &[f64]) -> Result<Vec<f64>> {
    let factor = psd_factor(r)?;
    Ok(angles
        .par_iter()
        .map(|&t| gain(&factor, &far_steering(cfg, t)))
        .collect())
}

/// Point beampattern `a^H(r, θ) R a(r, θ)` on a list of points.
pub fn beampattern_near(r: &CMatrix, cfg: &ArrayConfig, points: &[PolarCoord]) -> Result<Vec<f64>> {
    let factor = psd_factor(r)?;
    Ok(points
        .par_iter()
        .map(|p| gain(&factor, &near_focusing(cfg, p)))
        .collect())
}

/// Point beampattern on a `ranges × angles` grid.
pub fn beampattern_near_grid(r: &CMatrix, cfg: &ArrayConfig, ranges: &[f64], angles: &[f64]) -> Result<DMatrix<f64>> {
    let factor = psd_factor(r)?;
    let cols: Vec<Vec<f64>> = angles
        .par_iter()
        .map(|&t| {
            ranges
                .iter()
                .map(|&rr| gain(&factor, &near_focusing(cfg, &PolarCoord { range: rr, angle: t })))
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(ranges.len(), angles.len(), |i, j| cols[j][i]))
}

/// Random `n × k` complex Gaussian matrix, for synthetic instances.
pub fn random_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> CMatrix {
    CMatrix::from_fn(n, k, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}
