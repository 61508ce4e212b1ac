//! Property tests over randomly drawn instances.

use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nfisac::beamform::{
    beampattern_far, beampattern_near, opp_aux, radar_precoder, random_gaussian, tradeoff_ls, tx_covariance, zf_precoder,
    Precoder,
};
use nfisac::channel::{channel_matrix, sample_gains, sum_rate, user_sinr, user_sinr_cov, Model, UserPlacement};
use nfisac::cli::{parse_config_str, Config};
use nfisac::crb::{crb_for_covariance, crb_matrix, fim_blocks, g_derivatives, g_matrix, DerivativeMode};
use nfisac::experiments::{power_point, Scenario};
use nfisac::geometry::{
    far_steering, fresnel_w_matrix, near_focusing, rx_geometry, tx_geometry, ArrayConfig, PolarCoord,
};
use nfisac::numkernel::{hermitian_eig, pinv, CMatrix};
use nfisac::powermin::column_covariances;
use nfisac::sensing::{echo_mean, subspaces, synthesize_symbols, TargetTruth};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn angle() -> impl Strategy<Value = f64> {
    -1.4f64..1.4
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn steering_vectors_have_unit_modulus(n in 2usize..96, theta in angle(), r in 0.5f64..50.0) {
        let cfg = ArrayConfig::half_wavelength(n, 0.01).unwrap();
        let a = far_steering(&cfg, theta);
        let b = near_focusing(&cfg, &PolarCoord::new(r, theta).unwrap());
        prop_assert!(a.iter().chain(b.iter()).all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn far_steering_is_conjugate_symmetric(n in 2usize..96, theta in angle()) {
        let cfg = ArrayConfig::half_wavelength(n, 0.01).unwrap();
        let d = far_steering(&cfg, -theta) - far_steering(&cfg, theta).map(|z| z.conj());
        prop_assert!(max_abs(&d) < 1e-12);
    }

    #[test]
    fn fresnel_w_support_is_even_and_positive(half in 2usize..80) {
        let w = fresnel_w_matrix(2 * half).unwrap();
        prop_assert!(w.support().all(|v| v > 0 && v % 2 == 0));
    }

    #[test]
    fn hermitian_eig_reconstructs(n in 1usize..12, seed in any::<u64>()) {
        let x = random_gaussian(&mut rng(seed), n, n);
        let m = &x + x.adjoint();
        let (vals, vecs) = hermitian_eig(&m).unwrap();
        let trace: f64 = (0..n).map(|i| m[(i, i)].re).sum();
        let sum: f64 = vals.iter().sum();
        prop_assert!((trace - sum).abs() <= 1e-10 * (1.0 + m.norm()));
        prop_assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let lambda = CMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(vals[i], 0.0) } else { Complex64::new(0.0, 0.0) });
        prop_assert!(rel_diff(&(&vecs * lambda * vecs.adjoint()), &m) < 1e-10);
    }

    #[test]
    fn pinv_of_pinv_is_identity_map(rows in 1usize..10, cols in 1usize..10, seed in any::<u64>()) {
        let a = random_gaussian(&mut rng(seed), rows, cols);
        let back = pinv(&pinv(&a, None).unwrap(), None).unwrap();
        prop_assert!(rel_diff(&back, &a) < 1e-8);
    }

    #[test]
    fn sum_rate_ignores_per_stream_phase(seed in any::<u64>(), phases in prop::collection::vec(0.0f64..TAU, 2)) {
        let mut r = rng(seed);
        let cfg = ArrayConfig::half_wavelength(16, 0.01).unwrap();
        let users: Vec<UserPlacement> = [(3.0, 10.0), (6.0, -20.0)]
            .iter()
            .map(|&(d, a)| sample_gains(&mut r, &UserPlacement::los_only(PolarCoord::from_degrees(d, a).unwrap()), 0.01))
            .collect();
        let h = channel_matrix(&cfg, &users, Model::Near);
        let f = random_gaussian(&mut r, 16, 2);
        let mut g = f.clone();
        for (k, p) in phases.iter().enumerate() {
            let rot = Complex64::from_polar(1.0, *p);
            for v in g.column_mut(k).iter_mut() {
                *v *= rot;
            }
        }
        let a = sum_rate(&h, &f, 1e-3).unwrap();
        let b = sum_rate(&h, &g, 1e-3).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        let covs = column_covariances(&f);
        for k in 0..2 {
            let s1 = user_sinr(&h, &f, 1e-3, k).unwrap();
            let s2 = user_sinr_cov(&h, &covs, 1e-3, k).unwrap();
            prop_assert!((s1 - s2).abs() <= 1e-9 * s1.max(1e-12));
        }
    }

    #[test]
    fn beampatterns_are_non_negative(seed in any::<u64>(), k in 1usize..4) {
        let cfg = ArrayConfig::half_wavelength(24, 0.01).unwrap();
        let f = Precoder::normalized(random_gaussian(&mut rng(seed), 24, k), 1.0).unwrap();
        let r = tx_covariance(&f);
        let angles: Vec<f64> = (0..37).map(|i| -1.5 + i as f64 / 12.0).collect();
        let points: Vec<PolarCoord> = angles.iter().map(|&t| PolarCoord::new(2.0, t).unwrap()).collect();
        let far = beampattern_far(&r, &cfg, &angles).unwrap();
        let near = beampattern_near(&r, &cfg, &points).unwrap();
        prop_assert!(far.iter().chain(&near).all(|g| g.is_finite() && *g >= 0.0));
    }

    #[test]
    fn aux_row_follows_radar_phase(seed in any::<u64>(), phi in 0.0f64..TAU) {
        let mut r = rng(seed);
        let com = random_gaussian(&mut r, 16, 2);
        let rad = random_gaussian(&mut r, 16, 1);
        let rot = Complex64::from_polar(1.0, phi);
        let u1 = opp_aux(&rad, &com).unwrap();
        let u2 = opp_aux(&rad.map(|z| z * rot), &com).unwrap();
        prop_assert!(((u1.norm() - 1.0).abs()) < 1e-12);
        // The fitted beam F_rad F_u does not depend on the radar beam's phase.
        prop_assert!(rel_diff(&(rad.map(|z| z * rot) * u2), &(&rad * u1)) < 1e-10);
    }

    #[test]
    fn designs_meet_the_power_budget(seed in any::<u64>(), eta in 0.0f64..=1.0, p_t in 0.1f64..10.0) {
        let mut r = rng(seed);
        let cfg = ArrayConfig::half_wavelength(16, 0.01).unwrap();
        let users: Vec<UserPlacement> = [(2.0, 5.0), (4.0, 35.0)]
            .iter()
            .map(|&(d, a)| sample_gains(&mut r, &UserPlacement::los_only(PolarCoord::from_degrees(d, a).unwrap()), 0.01))
            .collect();
        let h = channel_matrix(&cfg, &users, Model::Near);
        let com = zf_precoder(&h, p_t).unwrap();
        let rad = radar_precoder(&cfg, &PolarCoord::from_degrees(3.0, -40.0).unwrap(), p_t, Model::Near).unwrap();
        let d = tradeoff_ls(&com, &rad, eta, p_t).unwrap();
        prop_assert!((d.precoder.power() - p_t).abs() <= 1e-9 * p_t);
        prop_assert!(((&d.aux * d.aux.adjoint())[0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn signal_and_noise_subspaces_are_orthogonal(seed in any::<u64>(), m in 1usize..3) {
        let x = random_gaussian(&mut rng(seed), 12, 20);
        let r_y = (&x * x.adjoint()).unscale(20.0);
        let s = subspaces(&r_y, m).unwrap();
        prop_assert_eq!(s.signal.ncols() + s.noise.ncols(), 12);
        prop_assert!(max_abs(&(s.signal.adjoint() * &s.noise)) < 1e-10);
    }

    #[test]
    fn rx_tx_geometry_round_trip(r in 0.5f64..60.0, theta in -1.3f64..1.3, nt in 4usize..80, nr in 4usize..80) {
        let (tx, rx) = (ArrayConfig::half_wavelength(nt, 0.01).unwrap(), ArrayConfig::half_wavelength(nr, 0.01).unwrap());
        let p = PolarCoord::new(r, theta).unwrap();
        let q = rx_geometry(&p, &tx, &rx).unwrap();
        let back = tx_geometry(&q, &tx, &rx).unwrap();
        prop_assert!((back.range - r).abs() <= 1e-10 * r);
        prop_assert!((back.angle - theta).abs() <= 1e-10);
    }

    #[test]
    fn echo_is_linear_in_reflection_gain(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let mut r = rng(seed);
        let cfg = ArrayConfig::half_wavelength(16, 0.01).unwrap();
        let p = PolarCoord::from_degrees(3.0, 25.0).unwrap();
        let f = Precoder::normalized(random_gaussian(&mut r, 16, 2), 1.0).unwrap();
        let s = synthesize_symbols(&mut r, 2, 8);
        let c = Complex64::new(re, im);
        let one = TargetTruth::new(Complex64::new(1.0, 0.0), p, &cfg, &cfg).unwrap();
        let scaled = TargetTruth::new(c, p, &cfg, &cfg).unwrap();
        let y1 = echo_mean(&f, &s, &one, &cfg, &cfg).unwrap();
        let yc = echo_mean(&f, &s, &scaled, &cfg, &cfg).unwrap();
        prop_assert!(max_abs(&(yc - y1.map(|z| z * c))) <= 1e-12 * (1.0 + max_abs(&y1) * c.norm()));
    }

    #[test]
    fn crb_is_symmetric_psd_and_scales(seed in any::<u64>(), r in 1.0f64..5.0, theta in -1.0f64..1.0, noise in 0.01f64..10.0) {
        let mut rr = rng(seed);
        // Ranges stay inside the 5.1 m Fraunhofer distance, where the range
        // information is well conditioned.
        let cfg = ArrayConfig::half_wavelength(32, 0.01).unwrap();
        let truth = TargetTruth::new(Complex64::new(0.7, -0.4), PolarCoord::new(r, theta).unwrap(), &cfg, &cfg).unwrap();
        let rx = tx_covariance(&Precoder::normalized(random_gaussian(&mut rr, 32, 2), 1.0).unwrap());
        let g = g_matrix(&truth, &cfg, &cfg);
        let (dr, dt) = g_derivatives(&truth, &cfg, &cfg, DerivativeMode::Analytic).unwrap();
        let base = crb_matrix(&fim_blocks(&g, &dr, &dt, &rx, truth.beta, 16, noise).unwrap(), None).crb_matrix;
        let more_l = crb_matrix(&fim_blocks(&g, &dr, &dt, &rx, truth.beta, 32, noise).unwrap(), None).crb_matrix;
        let more_noise = crb_matrix(&fim_blocks(&g, &dr, &dt, &rx, truth.beta, 16, 3.0 * noise).unwrap(), None).crb_matrix;
        prop_assert!(base[0][1] == base[1][0]);
        prop_assert!(base[0][0] >= 0.0 && base[1][1] >= 0.0);
        prop_assert!(base[0][0] * base[1][1] - base[0][1] * base[1][0] >= -1e-12 * base[0][0] * base[1][1]);
        for i in 0..2 {
            for j in 0..2 {
                let tol = 1e-9 * (base[i][i] * base[j][j]).sqrt();
                prop_assert!((more_l[i][j] - 0.5 * base[i][j]).abs() <= tol);
                prop_assert!((more_noise[i][j] - 3.0 * base[i][j]).abs() <= 3.0 * tol);
            }
        }
    }

    #[test]
    fn focused_beam_bounds_below_blended_designs(seed in any::<u64>(), eta in 0.05f64..0.95) {
        let mut r = rng(seed);
        let cfg = ArrayConfig::half_wavelength(32, 0.01).unwrap();
        let target = PolarCoord::from_degrees(4.0, 45.0).unwrap();
        let truth = TargetTruth::new(Complex64::new(1.0, 0.0), target, &cfg, &cfg).unwrap();
        let users: Vec<UserPlacement> = [(3.0, 0.0), (9.0, 0.0)]
            .iter()
            .map(|&(d, a)| sample_gains(&mut r, &UserPlacement::los_only(PolarCoord::from_degrees(d, a).unwrap()), 0.01))
            .collect();
        let h = channel_matrix(&cfg, &users, Model::Near);
        let com = zf_precoder(&h, 1.0).unwrap();
        let rad = radar_precoder(&cfg, &target, 1.0, Model::Near).unwrap();
        let mix = tradeoff_ls(&com, &rad, eta, 1.0).unwrap().precoder;
        let a = crb_for_covariance(&truth, &cfg, &cfg, &tx_covariance(&rad), 64, 1.0, 1.0).unwrap();
        let b = crb_for_covariance(&truth, &cfg, &cfg, &tx_covariance(&mix), 64, 1.0, 1.0).unwrap();
        prop_assert!(a.rcrb_theta <= b.rcrb_theta * (1.0 + 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn relaxed_power_is_a_lower_bound(gamma_db in 0.0f64..15.0, g in 10.0f64..150.0, seed in 0u64..1000) {
        let mut sc = Scenario::desk();
        sc.master_seed = seed;
        let real = sc.realization(0);
        let p = power_point(&sc, &real, gamma_db, g, 0).unwrap();
        prop_assert!(p.nfbf_relaxed <= p.nfbf * (1.0 + 1e-6));
        prop_assert!(p.ffbf.is_nan() || p.nfbf_relaxed <= p.ffbf * (1.0 + 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_survives_a_toml_round_trip(
        seed in any::<u32>(),
        n in 8usize..300,
        eta in 0.0f64..=1.0,
        snr in -20.0f64..40.0,
        angle in -89.0f64..89.0,
        range in 0.5f64..80.0,
        desk in any::<bool>(),
    ) {
        let mut c = Config {
            seed: seed as u64,
            profile: if desk { nfisac::cli::ProfileName::Desk } else { nfisac::cli::ProfileName::Paper },
            ..Config::default()
        };
        c.array.n_tx = Some(n);
        c.design.eta = eta;
        c.radar.snr_r_db = snr;
        c.target.angle_deg = angle;
        c.target.range_m = range;
        let c = c.normalized();
        let text = c.to_toml().unwrap();
        let back = parse_config_str(&text).unwrap();
        prop_assert_eq!(back, c);
    }
}
