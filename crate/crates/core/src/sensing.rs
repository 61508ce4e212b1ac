//! Bistatic near-field echo synthesis, 2-D MUSIC range/angle estimation and
//! a matched-subspace energy detector.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::beamform::Precoder;
use crate::error::{Error, Result};
use crate::geometry::{near_focusing, rx_geometry, tx_geometry, ArrayConfig, PolarCoord};
use crate::numkernel::{frob2, hermitian_eig, CMatrix};

/// A point target with its coordinates in both array frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetTruth {
    pub beta: Complex64,
    pub tx: PolarCoord,
    pub rx: PolarCoord,
}

impl TargetTruth {
    pub fn new(beta: Complex64, tx: PolarCoord, cfg_tx: &ArrayConfig, cfg_rx: &ArrayConfig) -> Result<Self> {
        Ok(Self {
            beta,
            tx,
            rx: rx_geometry(&tx, cfg_tx, cfg_rx)?,
        })
    }
}

/// Received radar snapshots `Y_R` (N_r × L).
#[derive(Clone, Debug, PartialEq)]
pub struct EchoBatch {
    pub y: CMatrix,
    pub noise_power: f64,
    pub snapshots: usize,
}

/// Search domain for the MUSIC spectrum, in the receive frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MusicGrid {
    pub ranges: Vec<f64>,
    pub angles: Vec<f64>,
}

impl MusicGrid {
    pub fn new(ranges: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        let increasing = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&ranges) || ranges[0] <= 0.0 {
            return Err(Error::arg("ranges", "must be nonempty, positive and strictly increasing"));
        }
        if !increasing(&angles) || angles[0] <= -FRAC_PI_2 || *angles.last().unwrap() >= FRAC_PI_2 {
            return Err(Error::arg("angles", "must be nonempty, strictly increasing and inside (-pi/2, pi/2)"));
        }
        Ok(Self { ranges, angles })
    }

    /// Uniform grid `[start, stop]` with the given steps (inclusive ends when
    /// they fall on the lattice).
    pub fn uniform(r: (f64, f64, f64), theta: (f64, f64, f64)) -> Result<Self> {
        let axis = |(a, b, h): (f64, f64, f64)| -> Vec<f64> {
            let n = ((b - a) / h + 1e-9).floor() as usize;
            (0..=n).map(|i| a + i as f64 * h).collect()
        };
        Self::new(axis(r), axis(theta))
    }

    /// 1–30 m at 0.1 m, ±89.75° at 0.25°.
    pub fn default_grid() -> Self {
        Self::uniform(
            (1.0, 30.0, 0.1),
            ((-89.75f64).to_radians(), 89.75f64.to_radians(), 0.25f64.to_radians()),
        )
        .expect("static grid is valid")
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ranges.len(), self.angles.len())
    }

    pub fn point(&self, i: usize, j: usize) -> PolarCoord {
        PolarCoord {
            range: self.ranges[i],
            angle: self.angles[j],
        }
    }

    /// Closest grid cell to `p`.
    pub fn nearest(&self, p: &PolarCoord) -> (usize, usize) {
        let near = |v: &[f64], x: f64| {
            v.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map(|(i, _)| i)
                .unwrap()
        };
        (near(&self.ranges, p.range), near(&self.angles, p.angle))
    }

    fn steps(&self) -> (f64, f64) {
        let step = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 1e-3 };
        (step(&self.ranges), step(&self.angles))
    }
}

/// Unit-modulus QPSK symbols, `N_s × L`.
pub fn synthesize_symbols<R: Rng + ?Sized>(rng: &mut R, n_streams: usize, snapshots: usize) -> CMatrix {
    CMatrix::from_fn(n_streams, snapshots, |_, _| {
        let re = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
        let im = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
        Complex64::new(re, im)
    })
}

/// Receive focusing vector `b(r, θ)`.
pub fn rx_focusing(cfg_rx: &ArrayConfig, p: &PolarCoord) -> CMatrix {
    near_focusing(cfg_rx, p)
}

/// Circularly-symmetric Gaussian matrix with per-entry variance `var`.
pub fn complex_noise<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMatrix {
    let s = (var / 2.0).sqrt();
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    })
}

/// Noiseless echo `β b(r_r, θ_r) a^H(r_t, θ_t) F S`.
pub fn echo_mean(f: &Precoder, s: &CMatrix, truth: &TargetTruth, cfg_tx: &ArrayConfig, cfg_rx: &ArrayConfig) -> Result<CMatrix> {
    if f.entries.nrows() != cfg_tx.n_elements || f.entries.ncols() != s.nrows() {
        return Err(Error::Contract("precoder and symbol dimensions are inconsistent".into()));
    }
    let a = near_focusing(cfg_tx, &truth.tx);
    let b = rx_focusing(cfg_rx, &truth.rx);
    let x = a.adjoint() * &f.entries * s;
    Ok(b * x * truth.beta)
}

pub fn synthesize_echo<R: Rng + ?Sized>(
    f: &Precoder,
    s: &CMatrix,
    truth: &TargetTruth,
    cfg_tx: &ArrayConfig,
    cfg_rx: &ArrayConfig,
    noise_power: f64,
    rng: &mut R,
) -> Result<EchoBatch> {
    if !(noise_power >= 0.0) {
        return Err(Error::arg("noise_power", "must be non-negative"));
    }
    let mut y = echo_mean(f, s, truth, cfg_tx, cfg_rx)?;
    if noise_power > 0.0 {
        y += complex_noise(rng, y.nrows(), y.ncols(), noise_power);
    }
    Ok(EchoBatch {
        snapshots: y.ncols(),
        y,
        noise_power,
    })
}

/// `R_Y = Y Y^H / L`.
pub fn sample_covariance(echo: &EchoBatch) -> CMatrix {
    let l = echo.y.ncols() as f64;
    let r = (&echo.y * echo.y.adjoint()).unscale(l);
    (&r + r.adjoint()).scale(0.5)
}

/// Signal and noise subspaces of a sample covariance for `m` sources.
#[derive(Clone, Debug)]
pub struct Subspaces {
    pub eigenvalues: Vec<f64>,
    pub signal: CMatrix,
    pub noise: CMatrix,
}

pub fn subspaces(r_y: &CMatrix, m: usize) -> Result<Subspaces> {
    let n = r_y.nrows();
    if m >= n {
        return Err(Error::arg("m", format!("source count {m} must be below N_r = {n}")));
    }
    let (eigenvalues, v) = hermitian_eig(r_y)?;
    Ok(Subspaces {
        eigenvalues,
        signal: v.columns(0, m).into_owned(),
        noise: v.columns(m, n - m).into_owned(),
    })
}

/// Eigenvectors of the `N_r − m` smallest eigenvalues.
pub fn noise_subspace(r_y: &CMatrix, m: usize) -> Result<CMatrix> {
    Ok(subspaces(r_y, m)?.noise)
}

fn music_value(q_n: &CMatrix, b: &CMatrix) -> f64 {
    1.0 / frob2(&(q_n.adjoint() * b)).max(f64::MIN_POSITIVE)
}

/// MUSIC pseudo-spectrum `1 / (b^H Q_N Q_N^H b)` on every grid cell
/// (rows: ranges, columns: angles).
pub fn music_spectrum(q_n: &CMatrix, grid: &MusicGrid, cfg_rx: &ArrayConfig) -> DMatrix<f64> {
    let cols: Vec<Vec<f64>> = grid
        .angles
        .par_iter()
        .map(|&t| {
            grid.ranges
                .iter()
                .map(|&r| music_value(q_n, &rx_focusing(cfg_rx, &PolarCoord { range: r, angle: t })))
                .collect()
        })
        .collect();
    DMatrix::from_fn(grid.ranges.len(), grid.angles.len(), |i, j| cols[j][i])
}

/// Post-processing of the grid peak.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Refinement {
    /// Grid cell center.
    #[default]
    None,
    /// Separable three-point parabolic interpolation on each axis.
    Parabolic,
    /// Joint Newton iterations on the continuous spectrum, started at the
    /// grid peak.
    Newton,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MusicEstimate {
    pub rx: PolarCoord,
    pub tx: PolarCoord,
    pub cell: (usize, usize),
    /// Spectrum maximum over median.
    pub peak_ratio: f64,
}

const MIN_PEAK_RATIO: f64 = 1.5;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn parabolic_offset(ym: f64, y0: f64, yp: f64) -> f64 {
    let den = ym - 2.0 * y0 + yp;
    if den < 0.0 {
        (0.5 * (ym - yp) / den).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

fn parabolic(spec: &DMatrix<f64>, grid: &MusicGrid, (i, j): (usize, usize)) -> PolarCoord {
    let (nr, na) = spec.shape();
    let mut p = grid.point(i, j);
    let (hr, ha) = grid.steps();
    if i > 0 && i + 1 < nr {
        p.range += hr * parabolic_offset(spec[(i - 1, j)], spec[(i, j)], spec[(i + 1, j)]);
    }
    if j > 0 && j + 1 < na {
        p.angle += ha * parabolic_offset(spec[(i, j - 1)], spec[(i, j)], spec[(i, j + 1)]);
    }
    p
}

fn finish(rx: PolarCoord, cell: (usize, usize), peak_ratio: f64, cfg_tx: &ArrayConfig, cfg_rx: &ArrayConfig) -> Result<MusicEstimate> {
    if peak_ratio < MIN_PEAK_RATIO {
        return Err(Error::NoPeak { ratio: peak_ratio });
    }
    Ok(MusicEstimate {
        tx: tx_geometry(&rx, cfg_tx, cfg_rx)?,
        rx,
        cell,
        peak_ratio,
    })
}

/// Peak of a precomputed spectrum, mapped back to the transmit frame.
/// `Refinement::Newton` needs the covariance and is treated as parabolic here.
pub fn music_estimate(
    spectrum: &DMatrix<f64>,
    grid: &MusicGrid,
    cfg_tx: &ArrayConfig,
    cfg_rx: &ArrayConfig,
    refine: Refinement,
) -> Result<MusicEstimate> {
    if spectrum.shape() != grid.shape() {
        return Err(Error::Contract("spectrum and grid shapes differ".into()));
    }
    let (k, &peak) = spectrum
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");
    let nr = spectrum.nrows();
    let cell = (k % nr, k / nr);
    let ratio = peak / median(spectrum.iter().copied().collect());
    let rx = match refine {
        Refinement::None => grid.point(cell.0, cell.1),
        _ => parabolic(spectrum, grid, cell),
    };
    finish(rx, cell, ratio, cfg_tx, cfg_rx)
}

#[derive(Clone, Debug)]
pub struct MusicOptions {
    /// Subsampling factor of the first search stage.
    pub coarse_factor: usize,
    pub refine: Refinement,
}

impl Default for MusicOptions {
    fn default() -> Self {
        Self {
            coarse_factor: 10,
            refine: Refinement::None,
        }
    }
}

/// Evaluates the projector denominator through the (small) signal subspace:
/// `b^H Q_N Q_N^H b = ‖b‖² − ‖Q_S^H b‖²`.
struct Spectrum<'a> {
    q_s: &'a CMatrix,
    cfg: &'a ArrayConfig,
}

impl Spectrum<'_> {
    fn signal_energy(&self, p: &PolarCoord) -> f64 {
        frob2(&(self.q_s.adjoint() * rx_focusing(self.cfg, p)))
    }

    fn value(&self, p: &PolarCoord) -> f64 {
        let n = self.cfg.n_elements as f64;
        1.0 / (n - self.signal_energy(p)).max(n * 1e-15)
    }
}

/// Two-stage MUSIC search from a sample covariance, single source.
pub fn music_search(
    r_y: &CMatrix,
    grid: &MusicGrid,
    cfg_tx: &ArrayConfig,
    cfg_rx: &ArrayConfig,
    opts: &MusicOptions,
) -> Result<MusicEstimate> {
    let sub = subspaces(r_y, 1)?;
    let spec = Spectrum { q_s: &sub.signal, cfg: cfg_rx };
    let (nr, na) = grid.shape();
    let f = opts.coarse_factor.max(1);
    let lattice = |n: usize| {
        let mut v: Vec<usize> = (0..n).step_by(f).collect();
        if *v.last().unwrap() != n - 1 {
            v.push(n - 1);
        }
        v
    };
    let (ci, cj) = (lattice(nr), lattice(na));
    let mut values = DMatrix::from_element(nr, na, f64::NAN);
    let coarse: Vec<(usize, usize, f64)> = cj
        .par_iter()
        .flat_map_iter(|&j| ci.iter().map(move |&i| (i, j)))
        .map(|(i, j)| (i, j, spec.value(&grid.point(i, j))))
        .collect();
    for &(i, j, v) in &coarse {
        values[(i, j)] = v;
    }
    let coarse_median = median(coarse.iter().map(|c| c.2).collect());
    let mut best = coarse
        .iter()
        .copied()
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .map(|(i, j, _)| (i, j))
        .unwrap();

    // Fine stage: scan a window around the current peak and recenter while
    // the peak sits on an interior window edge.
    for _ in 0..64 {
        let (i0, i1) = (best.0.saturating_sub(f), (best.0 + f).min(nr - 1));
        let (j0, j1) = (best.1.saturating_sub(f), (best.1 + f).min(na - 1));
        let todo: Vec<(usize, usize)> = (j0..=j1)
            .flat_map(|j| (i0..=i1).map(move |i| (i, j)))
            .filter(|&(i, j)| values[(i, j)].is_nan())
            .collect();
        let fresh: Vec<f64> = todo.par_iter().map(|&(i, j)| spec.value(&grid.point(i, j))).collect();
        for (&(i, j), v) in todo.iter().zip(fresh) {
            values[(i, j)] = v;
        }
        let mut next = best;
        for j in j0..=j1 {
            for i in i0..=i1 {
                if values[(i, j)] > values[next] {
                    next = (i, j);
                }
            }
        }
        let on_edge = (next.0 == i0 && i0 > 0)
            || (next.0 == i1 && i1 < nr - 1)
            || (next.1 == j0 && j0 > 0)
            || (next.1 == j1 && j1 < na - 1);
        best = next;
        if !on_edge {
            break;
        }
    }

    let ratio = values[best] / coarse_median;
    let rx = match opts.refine {
        Refinement::None => grid.point(best.0, best.1),
        Refinement::Parabolic => {
            let mut local = values.clone();
            let (i, j) = best;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if a >= 0 && b >= 0 && (a as usize) < nr && (b as usize) < na && local[(a as usize, b as usize)].is_nan() {
                    local[(a as usize, b as usize)] = spec.value(&grid.point(a as usize, b as usize));
                }
            }
            parabolic(&local, grid, best)
        }
        Refinement::Newton => newton_refine(&spec, grid.point(best.0, best.1), grid.steps()),
    };
    finish(rx, best, ratio, cfg_tx, cfg_rx)
}

/// Maximizes the signal-subspace energy `‖Q_S^H b(r, θ)‖²` with Newton steps
/// on a central-difference stencil, in units of the grid steps.
fn newton_refine(spec: &Spectrum, start: PolarCoord, (hr, ha): (f64, f64)) -> PolarCoord {
    let eval = |u: [f64; 2]| {
        let p = PolarCoord {
            range: start.range + u[0] * hr,
            angle: start.angle + u[1] * ha,
        };
        if p.range <= 0.0 || p.angle.abs() >= FRAC_PI_2 {
            f64::NEG_INFINITY
        } else {
            spec.signal_energy(&p)
        }
    };
    let mut u = [0.0f64; 2];
    let mut j0 = eval(u);
    let mut h = 0.25;
    for _ in 0..60 {
        let e = |a: f64, b: f64| eval([u[0] + a, u[1] + b]);
        let (rp, rm, tp, tm) = (e(h, 0.0), e(-h, 0.0), e(0.0, h), e(0.0, -h));
        let (pp, pm, mp, mm) = (e(h, h), e(h, -h), e(-h, h), e(-h, -h));
        let g = [(rp - rm) / (2.0 * h), (tp - tm) / (2.0 * h)];
        let h11 = (rp - 2.0 * j0 + rm) / (h * h);
        let h22 = (tp - 2.0 * j0 + tm) / (h * h);
        let h12 = (pp - pm - mp + mm) / (4.0 * h * h);
        let det = h11 * h22 - h12 * h12;
        let mut step = if h11 < 0.0 && det > 0.0 {
            [-(h22 * g[0] - h12 * g[1]) / det, -(h11 * g[1] - h12 * g[0]) / det]
        } else {
            let gn = (g[0] * g[0] + g[1] * g[1]).sqrt().max(f64::MIN_POSITIVE);
            [h * g[0] / gn, h * g[1] / gn]
        };
        let size = step[0].abs().max(step[1].abs());
        if size > 1.0 {
            step = [step[0] / size, step[1] / size];
        }
        let mut accepted = false;
        for _ in 0..20 {
            let cand = [u[0] + step[0], u[1] + step[1]];
            let jc = eval(cand);
            if jc > j0 {
                u = cand;
                j0 = jc;
                accepted = true;
                break;
            }
            step = [0.5 * step[0], 0.5 * step[1]];
        }
        let size = step[0].abs().max(step[1].abs());
        if !accepted || size < 1e-9 {
            if h <= 1e-6 {
                break;
            }
            h *= 0.1;
            continue;
        }
        h = h.min(size.max(1e-6));
    }
    PolarCoord {
        range: start.range + u[0] * hr,
        angle: start.angle + u[1] * ha,
    }
}

/// Matched-subspace statistic `‖b^H Y‖² / (N_r σ² L)`. Under noise only,
/// `L·T` is Gamma(L, 1).
pub fn detection_statistic(echo: &EchoBatch, cfg_rx: &ArrayConfig, candidate: &PolarCoord) -> Result<f64> {
    if !(echo.noise_power > 0.0) {
        return Err(Error::arg("noise_power", "detector needs positive noise power"));
    }
    let b = rx_focusing(cfg_rx, candidate);
    let e = frob2(&(b.adjoint() * &echo.y));
    Ok(e / (cfg_rx.n_elements as f64 * echo.noise_power * echo.snapshots as f64))
}

pub fn detect(echo: &EchoBatch, cfg_rx: &ArrayConfig, candidate: &PolarCoord, threshold: f64) -> Result<bool> {
    Ok(detection_statistic(echo, cfg_rx, candidate)? > threshold)
}

fn check_pfa(p_fa: f64) -> Result<()> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(Error::arg("p_fa", "must lie in (0, 1)"));
    }
    Ok(())
}

/// Exact threshold: `P(Gamma(L,1)/L > t) = p_fa`, solved by bisection.
pub fn threshold_analytic(p_fa: f64, snapshots: usize) -> Result<f64> {
    check_pfa(p_fa)?;
    use statrs::function::gamma::gamma_ur;
    let l = snapshots.max(1) as f64;
    let tail = |t: f64| gamma_ur(l, l * t);
    let (mut lo, mut hi) = (0.0, 1.0);
    while tail(hi) > p_fa {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > p_fa {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Draws of the noise-only statistic. The projection `b^H z` of white noise
/// is `CN(0, N_r σ²)`, so normalized draws are simulated directly.
pub fn noise_only_statistics<R: Rng + ?Sized>(draws: usize, snapshots: usize, rng: &mut R) -> Vec<f64> {
    let l = snapshots.max(1);
    (0..draws)
        .map(|_| {
            (0..l)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    0.5 * (re * re + im * im)
                })
                .sum::<f64>()
                / l as f64
        })
        .collect()
}

/// Empirical `(1 − p_fa)` quantile of the noise-only statistic.
pub fn threshold_from_pfa<R: Rng + ?Sized>(p_fa: f64, draws: usize, snapshots: usize, rng: &mut R) -> Result<f64> {
    check_pfa(p_fa)?;
    if (draws as f64) * p_fa < 1.0 {
        return Err(Error::arg("draws", "too few draws to resolve the requested false-alarm rate"));
    }
    let mut t = noise_only_statistics(draws, snapshots, rng);
    t.sort_by(f64::total_cmp);
    let k = ((1.0 - p_fa) * draws as f64).ceil() as usize;
    Ok(t[k.min(draws) - 1])
}
