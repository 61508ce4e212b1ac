//! Multiuser downlink channels under the spherical (near) and planar (far)
//! wavefront models, gain sampling, and SINR / sum-rate metrics.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{far_steering, near_focusing, ArrayConfig, PolarCoord};
use crate::numkernel::{quad_form, CMatrix};

/// Wavefront model used to synthesize a channel or design a precoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Near,
    Far,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Near => "near",
            Model::Far => "far",
        }
    }
}

/// One user: a line-of-sight point plus `P` scatterers.
#[derive(Clone, Debug, PartialEq)]
pub struct UserPlacement {
    pub los: PolarCoord,
    pub scatterers: Vec<PolarCoord>,
    pub los_gain: Complex64,
    pub scatter_gains: Vec<Complex64>,
}

impl UserPlacement {
    /// User with unit LoS gain, unit scatterer gains.
    pub fn new(los: PolarCoord, scatterers: Vec<PolarCoord>) -> Self {
        let p = scatterers.len();
        Self {
            los,
            scatterers,
            los_gain: Complex64::new(1.0, 0.0),
            scatter_gains: vec![Complex64::new(1.0, 0.0); p],
        }
    }

    pub fn los_only(los: PolarCoord) -> Self {
        Self::new(los, Vec::new())
    }
}

/// `K × N_t` matrix whose row `k` is `h_k^H`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMatrix {
    pub entries: CMatrix,
    pub model: Model,
}

impl ChannelMatrix {
    pub fn n_users(&self) -> usize {
        self.entries.nrows()
    }

    /// Column vector `h_k`.
    pub fn user(&self, k: usize) -> CMatrix {
        self.entries.rows(k, 1).adjoint()
    }
}

fn synthesize(u: &UserPlacement, response: impl Fn(&PolarCoord) -> CMatrix) -> CMatrix {
    let mut h = response(&u.los) * u.los_gain;
    let p = u.scatterers.len();
    if p > 0 {
        let w = (1.0 / p as f64).sqrt();
        for (s, g) in u.scatterers.iter().zip(&u.scatter_gains) {
            h += response(s) * (g * w);
        }
    }
    h
}

/// Spherical-wave channel vector `h` (N_t × 1).
pub fn near_channel(cfg: &ArrayConfig, u: &UserPlacement) -> CMatrix {
    synthesize(u, |p| near_focusing(cfg, p))
}

/// Planar-wave channel vector with the same gains and angles.
pub fn far_channel(cfg: &ArrayConfig, u: &UserPlacement) -> CMatrix {
    synthesize(u, |p| far_steering(cfg, p.angle))
}

pub fn channel_vector(cfg: &ArrayConfig, u: &UserPlacement, model: Model) -> CMatrix {
    match model {
        Model::Near => near_channel(cfg, u),
        Model::Far => far_channel(cfg, u),
    }
}

pub fn channel_matrix(cfg: &ArrayConfig, users: &[UserPlacement], model: Model) -> ChannelMatrix {
    let n = cfg.n_elements;
    let mut entries = CMatrix::zeros(users.len(), n);
    for (k, u) in users.iter().enumerate() {
        entries.set_row(k, &channel_vector(cfg, u, model).adjoint().row(0));
    }
    ChannelMatrix { entries, model }
}

/// Fills the gains: free-space LoS magnitude with uniform phase, and
/// circularly-symmetric Gaussian scatterer gains with per-component standard
/// deviation `0.1·|α_0|`.
pub fn sample_gains<R: Rng + ?Sized>(rng: &mut R, u: &UserPlacement, wavelength: f64) -> UserPlacement {
    let mag = wavelength / (4.0 * PI * u.los.range);
    let phase = rng.random_range(0.0..2.0 * PI);
    let sd = 0.1 * mag;
    let scatter_gains = u
        .scatterers
        .iter()
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sd * re, sd * im)
        })
        .collect();
    UserPlacement {
        los: u.los,
        scatterers: u.scatterers.clone(),
        los_gain: Complex64::from_polar(mag, phase),
        scatter_gains,
    }
}

fn check_noise(noise_power: f64) -> Result<()> {
    if !(noise_power > 0.0) {
        return Err(Error::arg("noise_power", "must be positive"));
    }
    Ok(())
}

fn check_dims(h: &ChannelMatrix, f: &CMatrix) -> Result<()> {
    if h.entries.ncols() != f.nrows() || f.ncols() != h.n_users() {
        return Err(Error::Contract(format!(
            "channel is {}x{} but precoder is {}x{}",
            h.entries.nrows(),
            h.entries.ncols(),
            f.nrows(),
            f.ncols()
        )));
    }
    Ok(())
}

/// SINR of user `k`, `|h_k^H f_k|² / (Σ_{i≠k} |h_k^H f_i|² + σ²)`.
pub fn user_sinr(h: &ChannelMatrix, f: &CMatrix, noise_power: f64, k: usize) -> Result<f64> {
    check_noise(noise_power)?;
    check_dims(h, f)?;
    let g = h.entries.row(k) * f;
    let signal = g[k].norm_sqr();
    let interference: f64 = (0..g.len()).filter(|&i| i != k).map(|i| g[i].norm_sqr()).sum();
    Ok(signal / (interference + noise_power))
}

/// SINR of user `k` in covariance form, with `covs[i] = F_i = f_i f_i^H`.
pub fn user_sinr_cov(h: &ChannelMatrix, covs: &[CMatrix], noise_power: f64, k: usize) -> Result<f64> {
    check_noise(noise_power)?;
    let hk = h.user(k);
    let signal = quad_form(&covs[k], &hk);
    let interference: f64 = covs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, c)| quad_form(c, &hk))
        .sum();
    Ok(signal / (interference + noise_power))
}

/// Sum spectral efficiency in bit/s/Hz. The channel must be the near-field
/// truth; far-model precoders are always scored against it.
pub fn sum_rate(h_true: &ChannelMatrix, f: &CMatrix, noise_power: f64) -> Result<f64> {
    if h_true.model != Model::Near {
        return Err(Error::Contract("sum rate is evaluated on the near-field channel".into()));
    }
    (0..h_true.n_users())
        .map(|k| user_sinr(h_true, f, noise_power, k).map(|s| (1.0 + s).log2()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{column, frob2, inner};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize) -> ArrayConfig {
        ArrayConfig::half_wavelength(n, 0.01).unwrap()
    }

    fn pc(r: f64, deg: f64) -> PolarCoord {
        PolarCoord::from_degrees(r, deg).unwrap()
    }

    fn corr(a: &CMatrix, b: &CMatrix) -> f64 {
        inner(a, b).norm() / (a.norm() * b.norm())
    }

    #[test]
    fn los_only_channels() {
        let c = cfg(32);
        let u = UserPlacement::los_only(pc(4.0, 20.0));
        let h = near_channel(&c, &u);
        assert_eq!(h, near_focusing(&c, &u.los));
        assert!((frob2(&h) - 32.0).abs() < 1e-10);
        assert_eq!(far_channel(&c, &u), far_steering(&c, u.los.angle));
    }

    #[test]
    fn scattered_channel_matches_direct_sum() {
        let c = cfg(16);
        let u = UserPlacement::new(pc(4.0, 10.0), vec![pc(3.0, -20.0), pc(9.0, 40.0)]);
        let h = near_channel(&c, &u);
        let w = 0.5f64.sqrt();
        let want = near_focusing(&c, &u.los)
            + (near_focusing(&c, &u.scatterers[0]) + near_focusing(&c, &u.scatterers[1])) * Complex64::new(w, 0.0);
        assert!((h - &want).norm() < 1e-12);
        let hf = far_channel(&c, &u);
        let want = far_steering(&c, u.los.angle)
            + (far_steering(&c, u.scatterers[0].angle) + far_steering(&c, u.scatterers[1].angle))
                * Complex64::new(w, 0.0);
        assert!((hf - want).norm() < 1e-12);
    }

    #[test]
    fn distance_domain_decorrelation() {
        let c = cfg(256);
        let h1 = near_channel(&c, &UserPlacement::los_only(pc(5.0, 0.0)));
        let h2 = near_channel(&c, &UserPlacement::los_only(pc(15.0, 0.0)));
        assert!(corr(&h1, &h2) < 0.9);
        let f1 = far_channel(&c, &UserPlacement::los_only(pc(5.0, 0.0)));
        let f2 = far_channel(&c, &UserPlacement::los_only(pc(15.0, 0.0)));
        assert!((corr(&f1, &f2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_converges_to_far_at_long_range() {
        let c = cfg(32);
        let far = 100.0 * c.fraunhofer_distance();
        let u = UserPlacement::new(
            PolarCoord::new(far, 0.2).unwrap(),
            vec![PolarCoord::new(far * 2.0, -0.4).unwrap()],
        );
        let hn = near_channel(&c, &u);
        let hf = far_channel(&c, &u);
        for n in 0..32 {
            assert!((hn[n] / hf[n]).arg().abs() < 1e-2);
        }
    }

    #[test]
    fn gains_follow_free_space_and_are_reproducible() {
        let u = UserPlacement::new(pc(5.0, 0.0), vec![pc(3.0, 10.0); 2]);
        let a = sample_gains(&mut ChaCha8Rng::seed_from_u64(3), &u, 0.01);
        let b = sample_gains(&mut ChaCha8Rng::seed_from_u64(3), &u, 0.01);
        assert_eq!(a, b);
        let u2 = UserPlacement { los: pc(10.0, 0.0), ..u.clone() };
        let c = sample_gains(&mut ChaCha8Rng::seed_from_u64(3), &u2, 0.01);
        assert!((a.los_gain.norm() - 2.0 * c.los_gain.norm()).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sum = Complex64::new(0.0, 0.0);
        let draws = 10_000;
        for _ in 0..draws {
            sum += sample_gains(&mut rng, &u, 0.01).scatter_gains[0];
        }
        let mean = sum / draws as f64;
        let sd = 0.1 * 0.01 / (4.0 * PI * 5.0);
        let sem = sd / (draws as f64).sqrt();
        assert!(mean.re.abs() < 3.0 * sem && mean.im.abs() < 3.0 * sem);
    }

    fn two_user_setup() -> (ChannelMatrix, CMatrix) {
        let c = cfg(16);
        let users = [
            UserPlacement::new(pc(4.0, 0.0), vec![pc(2.0, 30.0)]),
            UserPlacement::new(pc(8.0, 10.0), vec![pc(6.0, -30.0)]),
        ];
        let h = channel_matrix(&c, &users, Model::Near);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = CMatrix::from_fn(16, 2, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        (h, f)
    }

    #[test]
    fn rate_and_sinr_cases() {
        let (h, f) = two_user_setup();
        assert_eq!(sum_rate(&h, &CMatrix::zeros(16, 2), 1.0).unwrap(), 0.0);
        assert_eq!(user_sinr(&h, &CMatrix::zeros(16, 2), 1.0, 0).unwrap(), 0.0);

        let sigma = 0.3;
        let mut want = 0.0;
        for k in 0..2 {
            let hk = h.user(k);
            let s = inner(&hk, &column(&f, k)).norm_sqr();
            let i = inner(&hk, &column(&f, 1 - k)).norm_sqr();
            want += (1.0 + s / (i + sigma)).log2();
        }
        assert!((sum_rate(&h, &f, sigma).unwrap() - want).abs() < 1e-12);

        let covs: Vec<CMatrix> = (0..2).map(|k| f.column(k) * f.column(k).adjoint()).collect();
        for k in 0..2 {
            let a = user_sinr(&h, &f, sigma, k).unwrap();
            let b = user_sinr_cov(&h, &covs, sigma, k).unwrap();
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
        assert!(sum_rate(&h, &f, 0.0).is_err());
        assert!(user_sinr(&h, &f, -1.0, 0).is_err());
    }

    #[test]
    fn matched_filter_single_user() {
        let c = cfg(16);
        let h = channel_matrix(&c, &[UserPlacement::los_only(pc(3.0, 5.0))], Model::Near);
        let hk = h.user(0);
        let pt: f64 = 2.0;
        let f = hk.scale(pt.sqrt() / hk.norm());
        let want = (1.0 + pt * frob2(&hk) / 0.1).log2();
        assert!((sum_rate(&h, &f, 0.1).unwrap() - want).abs() < 1e-12);
        assert!((user_sinr(&h, &f, 0.1, 0).unwrap() - pt * frob2(&hk) / 0.1).abs() < 1e-9);
    }

    #[test]
    fn far_channel_is_not_a_rate_reference() {
        let (mut h, f) = two_user_setup();
        h.model = Model::Far;
        assert!(sum_rate(&h, &f, 1.0).is_err());
    }
}
