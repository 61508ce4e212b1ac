//! QoS-constrained transmit power minimization by semidefinite relaxation.
//!
//! Minimize `Σ_k tr(F_k)` subject to the per-user SINR floors `Γ_k` and a
//! beampattern floor `a^H (Σ_k F_k) a ≥ Ĝ` at the target, with the rank-1
//! constraints on `F_k` dropped. The relaxation is solved by a log-barrier
//! interior-point method, by default in the span of the channels and the
//! target response, and rank-1 beams are recovered afterwards.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::beamform::Precoder;
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, hpd_logdet_inverse, inner, quad_form, CMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct QosSpec {
    /// `Γ_k`, linear.
    pub sinr_thresholds: Vec<f64>,
    /// `Ĝ`, watts at the target.
    pub target_power_floor: f64,
    /// `σ_n²`.
    pub noise_power: f64,
}

/// Constraint data of the relaxed problem.
#[derive(Clone, Debug)]
pub struct PowerProblem {
    /// Columns `h_k`.
    pub users: Vec<CMatrix>,
    /// Target response `a(r_t, θ_t)`.
    pub target: CMatrix,
    pub qos: QosSpec,
}

pub fn build_problem(h: &ChannelMatrix, target: &CMatrix, qos: &QosSpec) -> Result<PowerProblem> {
    let k = h.n_users();
    if qos.sinr_thresholds.len() != k {
        return Err(Error::Contract(format!(
            "{} SINR thresholds for {k} users",
            qos.sinr_thresholds.len()
        )));
    }
    if target.nrows() != h.entries.ncols() || target.ncols() != 1 {
        return Err(Error::Contract("target response does not match the channel width".into()));
    }
    if qos.sinr_thresholds.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::arg("sinr_thresholds", "must be non-negative"));
    }
    if !(qos.target_power_floor >= 0.0) {
        return Err(Error::arg("target_power_floor", "must be non-negative"));
    }
    if !(qos.noise_power > 0.0) {
        return Err(Error::arg("noise_power", "must be positive"));
    }
    Ok(PowerProblem {
        users: (0..k).map(|i| h.user(i)).collect(),
        target: target.clone(),
        qos: qos.clone(),
    })
}

impl PowerProblem {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn dim(&self) -> usize {
        self.target.nrows()
    }

    /// Linearized SINR margins `tr(Q_k F_k) − Γ_k(Σ_{i≠k} tr(Q_k F_i) + σ²)`.
    pub fn sinr_margins(&self, covs: &[CMatrix]) -> Vec<f64> {
        (0..self.n_users())
            .map(|k| {
                let hk = &self.users[k];
                let own = quad_form(&covs[k], hk);
                let other: f64 = (0..covs.len()).filter(|&i| i != k).map(|i| quad_form(&covs[i], hk)).sum();
                own - self.qos.sinr_thresholds[k] * (other + self.qos.noise_power)
            })
            .collect()
    }

    /// `a^H (Σ F_k) a`.
    pub fn target_gain(&self, covs: &[CMatrix]) -> f64 {
        covs.iter().map(|c| quad_form(c, &self.target)).sum()
    }

    /// Largest constraint violation relative to its right-hand side.
    pub fn max_relative_violation(&self, covs: &[CMatrix]) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, m) in self.sinr_margins(covs).iter().enumerate() {
            let rhs = self.qos.sinr_thresholds[k] * self.qos.noise_power;
            if rhs > 0.0 {
                worst = worst.max(-m / rhs);
            }
        }
        if self.qos.target_power_floor > 0.0 {
            let g = self.target_gain(covs);
            worst = worst.max((self.qos.target_power_floor - g) / self.qos.target_power_floor);
        }
        worst
    }
}

/// Orthonormal basis of `span{h_1, …, h_K, a}`.
pub fn reduce_subspace(users: &[CMatrix], target: &CMatrix) -> CMatrix {
    let n = target.nrows();
    let scale = users.iter().chain(std::iter::once(target)).map(|v| v.norm()).fold(0.0, f64::max);
    let mut basis: Vec<CMatrix> = Vec::new();
    for v in users.iter().chain(std::iter::once(target)) {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let p = inner(b, &w);
                w -= b * p;
            }
        }
        let nw = w.norm();
        if nw > 1e-10 * scale {
            basis.push(w.unscale(nw));
        }
    }
    let mut out = CMatrix::zeros(n, basis.len());
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, &b.column(0));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    /// `F_k` in the full antenna space.
    pub covariances: Vec<CMatrix>,
    pub total_power: f64,
    /// Numerical rank of each `F_k` (`σ_i > 1e-6 σ_1`).
    pub ranks: Vec<usize>,
    pub recovered: Option<Precoder>,
    pub status: SdpStatus,
    /// Duality-gap bound of the final barrier iterate, in watts.
    pub gap: f64,
    /// Name of the constraint that blocks feasibility, when infeasible.
    pub violated: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SdpOptions {
    /// Relative duality-gap target.
    pub tol: f64,
    /// Newton iterations over all barrier stages.
    pub max_iter: usize,
    /// Solve in the reduced span (default) or the full antenna space.
    pub reduce: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 2000,
            reduce: true,
        }
    }
}

mod barrier {
    //! Minimize `c^T z` over `G z > h` and affine Hermitian LMIs `M(z) ≻ 0`.

    use super::*;

    pub struct Lmi {
        pub base: CMatrix,
        pub coefs: Vec<(usize, CMatrix)>,
    }

    impl Lmi {
        fn at(&self, z: &[f64]) -> CMatrix {
            let mut m = self.base.clone();
            for (i, c) in &self.coefs {
                if z[*i] != 0.0 {
                    m += c.scale(z[*i]);
                }
            }
            m
        }
    }

    pub struct Problem {
        pub c: Vec<f64>,
        pub lin: Vec<(Vec<f64>, f64)>,
        pub lmis: Vec<Lmi>,
    }

    pub struct Outcome {
        pub z: Vec<f64>,
        pub gap: f64,
        pub converged: bool,
        pub stopped_early: bool,
    }

    impl Problem {
        fn nu(&self) -> f64 {
            (self.lin.len() + self.lmis.iter().map(|l| l.base.nrows()).sum::<usize>()) as f64
        }

        fn slack(row: &(Vec<f64>, f64), z: &[f64]) -> f64 {
            row.0.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() - row.1
        }

        /// Barrier value, or `None` outside the strict interior.
        fn value(&self, t: f64, z: &[f64]) -> Option<f64> {
            let mut f = t * self.c.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            for row in &self.lin {
                let s = Self::slack(row, z);
                if !(s > 0.0) {
                    return None;
                }
                f -= s.ln();
            }
            for l in &self.lmis {
                f -= crate::numkernel::cholesky_hpd(&l.at(z)).map(|ch| {
                    2.0 * (0..ch.nrows()).map(|i| ch[(i, i)].re.ln()).sum::<f64>()
                })?;
            }
            Some(f)
        }

        fn newton_system(&self, t: f64, z: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
            let n = z.len();
            let mut g: Vec<f64> = self.c.iter().map(|c| t * c).collect();
            let mut h = DMatrix::<f64>::zeros(n, n);
            for row in &self.lin {
                let s = Self::slack(row, z);
                for i in 0..n {
                    if row.0[i] == 0.0 {
                        continue;
                    }
                    g[i] -= row.0[i] / s;
                    for j in 0..n {
                        h[(i, j)] += row.0[i] * row.0[j] / (s * s);
                    }
                }
            }
            for l in &self.lmis {
                let (_, inv) = hpd_logdet_inverse(&l.at(z)).expect("interior iterate");
                let w: Vec<(usize, CMatrix)> = l.coefs.iter().map(|(i, c)| (*i, &inv * c)).collect();
                for (a, (i, wi)) in w.iter().enumerate() {
                    g[*i] -= wi.trace().re;
                    for (j, wj) in w.iter().skip(a) {
                        // tr(W_i W_j) without the full product.
                        let mut tr = Complex64::new(0.0, 0.0);
                        let d = wi.nrows();
                        for p in 0..d {
                            for q in 0..d {
                                tr += wi[(p, q)] * wj[(q, p)];
                            }
                        }
                        h[(*i, *j)] += tr.re;
                        if *i != *j {
                            h[(*j, *i)] += tr.re;
                        }
                    }
                }
            }
            (g, h)
        }

        pub fn solve(
            &self,
            z0: Vec<f64>,
            rel_tol: f64,
            max_iter: usize,
            stop: impl Fn(&[f64]) -> bool,
        ) -> Outcome {
            let nu = self.nu();
            let mut z = z0;
            let obj = |z: &[f64]| self.c.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            let mut t = (nu / obj(&z).abs().max(1.0)).max(1e-3);
            let mut iters = 0;
            loop {
                // Centering.
                loop {
                    if iters >= max_iter {
                        return Outcome { gap: nu / t, z, converged: false, stopped_early: false };
                    }
                    iters += 1;
                    let (g, mut h) = self.newton_system(t, &z);
                    let n = z.len();
                    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
                    let dz = loop {
                        match h.clone().cholesky() {
                            Some(ch) => break ch.solve(&nalgebra::DVector::from_vec(g.clone())),
                            None => {
                                for i in 0..n {
                                    h[(i, i)] += 1e-12 * scale;
                                }
                            }
                        }
                    };
                    let dz: Vec<f64> = dz.iter().map(|v| -v).collect();
                    let dec: f64 = -g.iter().zip(&dz).map(|(a, b)| a * b).sum::<f64>();
                    let f0 = self.value(t, &z).expect("interior iterate");
                    // Below this the decrement is lost in the rounding of f.
                    if dec / 2.0 <= 1e-12_f64.max(1e-14 * f0.abs()) {
                        break;
                    }
                    let mut alpha = 1.0;
                    let mut moved = false;
                    for _ in 0..60 {
                        let cand: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + alpha * b).collect();
                        if let Some(f1) = self.value(t, &cand) {
                            if f1 <= f0 - 0.25 * alpha * dec {
                                z = cand;
                                moved = true;
                                break;
                            }
                        }
                        alpha *= 0.5;
                    }
                    if stop(&z) {
                        return Outcome { gap: nu / t, z, converged: true, stopped_early: true };
                    }
                    if !moved {
                        break;
                    }
                }
                if nu / t <= rel_tol * obj(&z).abs().max(1e-300) || nu / t < 1e-300 {
                    return Outcome { gap: nu / t, z, converged: true, stopped_early: false };
                }
                t *= 10.0;
            }
        }
    }
}

/// Real coordinates for `d × d` Hermitian matrices.
fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut e = CMatrix::zeros(d, d);
        e[(i, i)] = Complex64::new(1.0, 0.0);
        out.push(e);
    }
    for i in 0..d {
        for j in i + 1..d {
            let mut e = CMatrix::zeros(d, d);
            e[(i, j)] = Complex64::new(s, 0.0);
            e[(j, i)] = Complex64::new(s, 0.0);
            out.push(e);
            let mut e = CMatrix::zeros(d, d);
            e[(i, j)] = Complex64::new(0.0, s);
            e[(j, i)] = Complex64::new(0.0, -s);
            out.push(e);
        }
    }
    out
}

fn numerical_rank(m: &CMatrix) -> usize {
    let (vals, _) = hermitian_eig(m).expect("covariance is Hermitian");
    let top = vals[0].max(0.0);
    if top == 0.0 {
        return 0;
    }
    vals.iter().filter(|l| **l > 1e-6 * top).count()
}

/// Relaxed optimum of the power-minimization problem.
pub fn solve_sdp(problem: &PowerProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let k = problem.n_users();
    let n = problem.dim();
    let basis = if opts.reduce {
        reduce_subspace(&problem.users, &problem.target)
    } else {
        CMatrix::identity(n, n)
    };
    let d = basis.ncols();
    let hs: Vec<CMatrix> = problem.users.iter().map(|h| basis.adjoint() * h).collect();
    let a = basis.adjoint() * &problem.target;
    let q = &problem.qos;

    // Power scale so that the scaled unknowns are O(1).
    let p0 = {
        let comm: f64 = hs
            .iter()
            .zip(&q.sinr_thresholds)
            .map(|(h, g)| g * q.noise_power / h.norm_squared().max(f64::MIN_POSITIVE))
            .sum();
        let sens = q.target_power_floor / a.norm_squared().max(f64::MIN_POSITIVE);
        let p = comm + sens;
        if p > 0.0 { p } else { 1.0 }
    };

    let herm = hermitian_basis(d);
    let m = herm.len();
    let nvar = k * m;
    let coef = |c: &CMatrix| -> Vec<f64> { herm.iter().map(|e| (c * e).trace().re).collect() };

    // Rows `G y > h` with names; constraints implied by PSD are dropped.
    let mut rows: Vec<(Vec<f64>, f64, String)> = Vec::new();
    for u in 0..k {
        let g = q.sinr_thresholds[u];
        let rhs = g * q.noise_power;
        if rhs <= 0.0 {
            continue;
        }
        let qk = &hs[u] * hs[u].adjoint();
        let cq = coef(&qk);
        let mut row = vec![0.0; nvar];
        for b in 0..k {
            let w = if b == u { 1.0 } else { -g };
            for i in 0..m {
                row[b * m + i] = w * cq[i] * p0 / rhs;
            }
        }
        rows.push((row, 1.0, format!("sinr[{u}]")));
    }
    if q.target_power_floor > 0.0 {
        let ca = coef(&(&a * a.adjoint()));
        let mut row = vec![0.0; nvar];
        for b in 0..k {
            for i in 0..m {
                row[b * m + i] = ca[i] * p0 / q.target_power_floor;
            }
        }
        rows.push((row, 1.0, "target_power".to_string()));
    }

    let mut c2 = vec![0.0; nvar];
    for b in 0..k {
        for i in 0..d {
            c2[b * m + i] = 1.0;
        }
    }

    let lmis = |extra: Option<usize>| -> Vec<barrier::Lmi> {
        (0..k)
            .map(|b| {
                let mut coefs: Vec<(usize, CMatrix)> = (0..m).map(|i| (b * m + i, herm[i].clone())).collect();
                if let Some(s) = extra {
                    coefs.push((s, CMatrix::identity(d, d)));
                }
                barrier::Lmi { base: CMatrix::zeros(d, d), coefs }
            })
            .collect()
    };

    // Phase 1: minimize s with every constraint relaxed by s, under a trace cap.
    let mut y0 = vec![0.0; nvar];
    for b in 0..k {
        for i in 0..d {
            y0[b * m + i] = 1.0;
        }
    }
    let slack = |row: &[f64], rhs: f64, y: &[f64]| row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - rhs;
    let cap = 1e8 * (k * d) as f64;
    let feasible_start = rows.iter().all(|r| slack(&r.0, r.1, &y0) > 0.0);
    let y_start = if feasible_start {
        y0
    } else {
        let s0 = rows.iter().map(|r| -slack(&r.0, r.1, &y0)).fold(0.0, f64::max) + 1.0;
        let mut lin: Vec<(Vec<f64>, f64)> = rows
            .iter()
            .map(|r| {
                let mut row = r.0.clone();
                row.push(1.0);
                (row, r.1)
            })
            .collect();
        let mut trace_row: Vec<f64> = c2.iter().map(|v| -v).collect();
        trace_row.push(0.0);
        lin.push((trace_row, -cap));
        let mut c1 = vec![0.0; nvar + 1];
        c1[nvar] = 1.0;
        let p1 = barrier::Problem { c: c1, lin, lmis: lmis(Some(nvar)) };
        let mut z0 = y0.clone();
        z0.push(s0);
        let out = p1.solve(z0, 1e-9, opts.max_iter, |z| z[nvar] < -1e-3);
        if !out.stopped_early {
            let y = &out.z[..nvar];
            let worst = rows
                .iter()
                .min_by(|a, b| slack(&a.0, a.1, y).total_cmp(&slack(&b.0, b.1, y)))
                .map(|r| r.2.clone());
            return Ok(SdpSolution {
                covariances: vec![CMatrix::zeros(n, n); k],
                total_power: f64::INFINITY,
                ranks: vec![0; k],
                recovered: None,
                status: SdpStatus::Infeasible,
                gap: f64::INFINITY,
                violated: worst,
            });
        }
        out.z[..nvar].to_vec()
    };

    let p2 = barrier::Problem {
        c: c2,
        lin: rows.iter().map(|r| (r.0.clone(), r.1)).collect(),
        lmis: lmis(None),
    };
    let out = p2.solve(y_start, opts.tol, opts.max_iter, |_| false);

    let covariances: Vec<CMatrix> = (0..k)
        .map(|b| {
            let mut x = CMatrix::zeros(d, d);
            for i in 0..m {
                x += herm[i].scale(out.z[b * m + i]);
            }
            let f = &basis * x * basis.adjoint() * Complex64::new(p0, 0.0);
            (&f + f.adjoint()).scale(0.5)
        })
        .collect();
    let total_power = covariances.iter().map(|c| c.trace().re).sum();
    let ranks = covariances.iter().map(numerical_rank).collect();
    Ok(SdpSolution {
        covariances,
        total_power,
        ranks,
        recovered: None,
        status: if out.converged { SdpStatus::Optimal } else { SdpStatus::MaxIter },
        gap: out.gap * p0,
        violated: None,
    })
}

/// Minimum-power allocation `p_k ≥ 0` for fixed unit beam directions,
/// solved exactly by vertex enumeration of the small LP. Returns `None`
/// when the directions cannot meet the constraints.
pub fn allocate_power(problem: &PowerProblem, directions: &[CMatrix]) -> Option<Vec<f64>> {
    let k = problem.n_users();
    let q = &problem.qos;
    // Rows `A p ≥ b`.
    let mut a_rows: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    for u in 0..k {
        let gains: Vec<f64> = directions.iter().map(|d| inner(&problem.users[u], d).norm_sqr()).collect();
        let g = q.sinr_thresholds[u];
        a_rows.push((0..k).map(|i| if i == u { gains[i] } else { -g * gains[i] }).collect());
        b.push(g * q.noise_power);
    }
    a_rows.push(directions.iter().map(|d| inner(&problem.target, d).norm_sqr()).collect());
    b.push(q.target_power_floor);
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        a_rows.push(e);
        b.push(0.0);
    }

    let rows = a_rows.len();
    let feasible = |p: &[f64]| {
        (0..rows).all(|r| {
            let v: f64 = a_rows[r].iter().zip(p).map(|(x, y)| x * y).sum();
            let scale = a_rows[r].iter().zip(p).map(|(x, y)| (x * y).abs()).sum::<f64>().max(b[r].abs());
            v >= b[r] - 1e-12 * scale
        })
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pick = vec![0usize; k];
    fn next(pick: &mut [usize], rows: usize) -> bool {
        let k = pick.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if pick[i] < rows - k + i {
                pick[i] += 1;
                for j in i + 1..k {
                    pick[j] = pick[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, p) in pick.iter_mut().enumerate() {
        *p = i;
    }
    loop {
        let m = DMatrix::from_fn(k, k, |i, j| a_rows[pick[i]][j]);
        let rhs = nalgebra::DVector::from_fn(k, |i, _| b[pick[i]]);
        if let Some(sol) = m.lu().solve(&rhs) {
            let p: Vec<f64> = sol.iter().map(|v| v.max(0.0)).collect();
            if sol.iter().all(|v| v.is_finite()) && feasible(&p) {
                let total: f64 = p.iter().sum();
                if best.as_ref().is_none_or(|(t, _)| total < *t) {
                    best = Some((total, p));
                }
            }
        }
        if !next(&mut pick, rows) {
            break;
        }
    }
    best.map(|(_, p)| p)
}

/// Beam matrix `[√p_k u_k]`.
fn beams(directions: &[CMatrix], powers: &[f64]) -> CMatrix {
    let n = directions[0].nrows();
    let mut f = CMatrix::zeros(n, directions.len());
    for (k, (d, p)) in directions.iter().zip(powers).enumerate() {
        f.set_column(k, &d.scale(p.sqrt()).column(0));
    }
    f
}

fn principal(m: &CMatrix) -> (f64, CMatrix) {
    let (vals, vecs) = hermitian_eig(m).expect("covariance is Hermitian");
    (vals[0], vecs.columns(0, 1).into_owned())
}

/// Rank-1 recovery. Principal eigenvectors when every `F_k` is rank one,
/// else Gaussian randomization `f_k = F_k^{1/2} g`; every candidate set of
/// directions gets its optimal power allocation and the cheapest feasible
/// one is kept.
pub fn randomize_rank1<R: Rng + ?Sized>(
    problem: &PowerProblem,
    sol: &SdpSolution,
    trials: usize,
    rng: &mut R,
) -> SdpSolution {
    let mut out = sol.clone();
    if sol.status == SdpStatus::Infeasible {
        return out;
    }
    let mut candidates: Vec<Vec<CMatrix>> = Vec::new();
    let principal_dirs: Vec<CMatrix> = sol
        .covariances
        .iter()
        .enumerate()
        .map(|(u, c)| {
            let (l, v) = principal(c);
            if l > 0.0 {
                v
            } else {
                problem.users[u].unscale(problem.users[u].norm())
            }
        })
        .collect();
    candidates.push(principal_dirs);
    let all_rank1 = sol.ranks.iter().all(|r| *r <= 1);
    if !all_rank1 {
        let roots: Vec<CMatrix> = sol.covariances.iter().map(psd_sqrt).collect();
        for _ in 0..trials {
            let dirs: Vec<CMatrix> = roots
                .iter()
                .enumerate()
                .map(|(u, r)| {
                    let g = CMatrix::from_fn(r.ncols(), 1, |_, _| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(re, im)
                    });
                    let v = r * g;
                    let nv = v.norm();
                    if nv > 0.0 {
                        v.unscale(nv)
                    } else {
                        problem.users[u].unscale(problem.users[u].norm())
                    }
                })
                .collect();
            candidates.push(dirs);
        }
    }
    let mut best: Option<(f64, CMatrix)> = None;
    for dirs in candidates.iter() {
        if let Some(p) = allocate_power(problem, dirs) {
            let total: f64 = p.iter().sum();
            if best.as_ref().is_none_or(|(t, _)| total < *t) {
                best = Some((total, beams(dirs, &p)));
            }
        }
    }
    match best {
        Some((total, f)) => out.recovered = Some(Precoder { entries: f, power_budget: total }),
        None => log::warn!("no feasible rank-1 candidate among {} draws", candidates.len()),
    }
    out
}

fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eig(m).expect("covariance is Hermitian");
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (i, l) in vals.iter().enumerate() {
        if *l > 0.0 {
            let v = vecs.columns(i, 1);
            out += (v * v.adjoint()).scale(l.sqrt());
        }
    }
    out
}

/// Covariances `f_k f_k^H` of a precoder's columns.
pub fn column_covariances(f: &CMatrix) -> Vec<CMatrix> {
    (0..f.ncols())
        .map(|k| f.columns(k, 1) * f.columns(k, 1).adjoint())
        .collect()
}

/// Power of the relaxed optimum, then rank-1 recovery with the given draws.
pub fn minimize_power<R: Rng + ?Sized>(
    problem: &PowerProblem,
    opts: &SdpOptions,
    trials: usize,
    rng: &mut R,
) -> Result<SdpSolution> {
    let sol = solve_sdp(problem, opts)?;
    Ok(randomize_rank1(problem, &sol, trials, rng))
}
