//! Dense complex linear algebra used by every other module.
//!
//! Thin wrappers over nalgebra that add the contracts the rest of the crate
//! relies on: descending order, deterministic eigenvector phases and
//! tie-breaking, full unitary SVD factors, and a tolerance-controlled
//! pseudo-inverse.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Shorthand constructor for a complex scalar.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Column vector from a slice.
pub fn col(entries: &[Complex64]) -> CMatrix {
    CMatrix::from_column_slice(entries.len(), 1, entries)
}

/// Column `j` of `m` as an owned `n × 1` matrix.
pub fn column(m: &CMatrix, j: usize) -> CMatrix {
    m.columns(j, 1).into_owned()
}

/// Checks the construction invariants: nonzero dimensions and finite entries.
pub fn check_matrix(m: &CMatrix) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Contract("matrix has a zero dimension".into()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Contract("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Squared Frobenius norm.
#[inline]
pub fn frob2(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H b` for column vectors.
pub fn inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `a^H m a` for a column vector `a`, real part only (m Hermitian).
pub fn quad_form(m: &CMatrix, a: &CMatrix) -> f64 {
    inner(a, &(m * a)).re
}

pub fn is_hermitian(m: &CMatrix, rel_tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    (m - m.adjoint()).norm() <= rel_tol * scale
}

/// Hermitian eigendecomposition with eigenvalues in descending order.
///
/// Each eigenvector is phase-canonicalized so that its first entry of
/// non-negligible magnitude is real and positive. Eigenvalues equal up to
/// rounding are ordered by the lexicographic order of these canonical vectors.
pub fn hermitian_eig(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    check_matrix(m)?;
    if m.nrows() != m.ncols() {
        return Err(Error::Contract(format!(
            "hermitian_eig needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_hermitian(m, 1e-10) {
        return Err(Error::Contract("hermitian_eig input is not Hermitian".into()));
    }
    let n = m.nrows();
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();

    let mut pairs: Vec<(f64, Vec<Complex64>)> = (0..n)
        .map(|i| {
            let v: Vec<Complex64> = eig.eigenvectors.column(i).iter().copied().collect();
            (eig.eigenvalues[i], canonical_phase(v))
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let scale = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(1.0);
    let tie = 64.0 * f64::EPSILON * scale * n as f64;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end - 1].0 - pairs[end].0).abs() <= tie {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| lex_cmp(&a.1, &b.1));
        }
        start = end;
    }

    let values = pairs.iter().map(|p| p.0).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (j, (_, v)) in pairs.iter().enumerate() {
        for (i, z) in v.iter().enumerate() {
            vectors[(i, j)] = *z;
        }
    }
    Ok((values, vectors))
}

fn canonical_phase(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-8 * peak).copied() {
        let rot = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= rot;
        }
    }
    v
}

fn lex_cmp(a: &[Complex64], b: &[Complex64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = y
            .re
            .partial_cmp(&x.re)
            .unwrap_or(Ordering::Equal)
            .then(y.im.partial_cmp(&x.im).unwrap_or(Ordering::Equal));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Lower Cholesky factor of a Hermitian positive-definite matrix, or `None`
/// when a pivot is not strictly positive. Reads the lower triangle only.
pub fn cholesky_hpd(m: &CMatrix) -> Option<CMatrix> {
    let n = m.nrows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = c64(djj, 0.0);
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// `log det m` and `m^{-1}` for Hermitian positive-definite `m`.
pub fn hpd_logdet_inverse(m: &CMatrix) -> Option<(f64, CMatrix)> {
    let l = cholesky_hpd(m)?;
    let n = m.nrows();
    let logdet = 2.0 * (0..n).map(|i| l[(i, i)].re.ln()).sum::<f64>();
    let linv = l.solve_lower_triangular(&CMatrix::identity(n, n))?;
    Some((logdet, linv.adjoint() * linv))
}

/// Full singular value decomposition `m = U Σ V^H`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// rows × rows, unitary.
    pub u: CMatrix,
    /// min(rows, cols) values in descending order.
    pub singular_values: Vec<f64>,
    /// cols × cols, unitary.
    pub v: CMatrix,
}

impl Svd {
    /// Rebuilds `U Σ V^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let (m, n) = (self.u.nrows(), self.v.nrows());
        let mut sigma = CMatrix::zeros(m, n);
        for (i, s) in self.singular_values.iter().enumerate() {
            sigma[(i, i)] = c64(*s, 0.0);
        }
        &self.u * sigma * self.v.adjoint()
    }
}

/// Thin SVD: `U` is rows×k, `V` is cols×k with k = min(rows, cols).
pub fn svd_thin(m: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    check_matrix(m)?;
    let k = m.nrows().min(m.ncols());
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("left singular vectors requested");
    let vt = dec.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        dec.singular_values[b]
            .partial_cmp(&dec.singular_values[a])
            .unwrap_or(Ordering::Equal)
    });
    let s = order.iter().map(|&i| dec.singular_values[i]).collect();
    let u = CMatrix::from_fn(m.nrows(), k, |r, c| u[(r, order[c])]);
    let v = CMatrix::from_fn(m.ncols(), k, |r, c| vt[(order[c], r)].conj());
    Ok((u, s, v))
}

pub fn svd(m: &CMatrix) -> Result<Svd> {
    let (u, s, v) = svd_thin(m)?;
    Ok(Svd {
        u: complete_basis(&u),
        singular_values: s,
        v: complete_basis(&v),
    })
}

/// Extends orthonormal columns to a full unitary matrix by Gram-Schmidt
/// against the standard basis.
pub fn complete_basis(q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    let mut cols: Vec<CMatrix> = (0..q.ncols()).map(|j| column(q, j)).collect();
    let mut e = 0;
    while cols.len() < n && e < n {
        let mut v = CMatrix::zeros(n, 1);
        v[(e, 0)] = c64(1.0, 0.0);
        for _ in 0..2 {
            for c in &cols {
                let p = inner(c, &v);
                v -= c * p;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            cols.push(v.unscale(norm));
        }
        e += 1;
    }
    let mut out = CMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, &c.column(0));
    }
    out
}

/// Default pseudo-inverse cut-off: max(rows, cols)·σ_max·ε.
pub fn default_pinv_tol(m: &CMatrix, sigma_max: f64) -> f64 {
    m.nrows().max(m.ncols()) as f64 * sigma_max * f64::EPSILON
}

/// Moore-Penrose pseudo-inverse. Singular values at or below `tol` are
/// treated as zero; `None` selects [`default_pinv_tol`].
pub fn pinv(m: &CMatrix, tol: Option<f64>) -> Result<CMatrix> {
    if let Some(t) = tol {
        if !(t >= 0.0) {
            return Err(Error::arg("tol", "must be non-negative"));
        }
    }
    let (u, s, v) = svd_thin(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let cut = tol.unwrap_or_else(|| default_pinv_tol(m, smax));
    let mut out = CMatrix::zeros(m.ncols(), m.nrows());
    for (i, &si) in s.iter().enumerate() {
        if si > cut && si > 0.0 {
            let vi = v.column(i);
            let ui = u.column(i);
            out += (vi * ui.adjoint()).unscale(si);
        }
    }
    Ok(out)
}

/// Pseudo-inverse of a real symmetric 2×2 matrix given as `[[a, b], [b, d]]`.
pub fn pinv_sym2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let (a, b, d) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
    let l1 = 0.5 * (tr + disc);
    let l2 = 0.5 * (tr - disc);
    // Eigenvector of l1.
    let (vx, vy) = if b.abs() > 0.0 {
        (l1 - d, b)
    } else if a >= d {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let nv = (vx * vx + vy * vy).sqrt();
    let (c, s) = (vx / nv, vy / nv);
    let cut = 2.0 * l1.abs().max(l2.abs()) * f64::EPSILON;
    let inv = |l: f64| if l.abs() > cut { 1.0 / l } else { 0.0 };
    let (i1, i2) = (inv(l1), inv(l2));
    [
        [i1 * c * c + i2 * s * s, (i1 - i2) * c * s],
        [(i1 - i2) * c * s, i1 * s * s + i2 * c * c],
    ]
}
