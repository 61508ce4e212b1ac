//! Cramér-Rao bounds on target range and angle as the target moves away
//! from the array, for near- and far-field designed beams.

use nfisac::crb::{crb_range_known_angle, crb_theta_known_range, fim_blocks, g_derivatives, g_matrix, DerivativeMode};
use nfisac::beamform::tx_covariance;
use nfisac::experiments::{Pipeline, Scenario};
use nfisac::geometry::PolarCoord;

fn main() -> nfisac::Result<()> {
    let sc = Scenario::desk();
    let real = sc.realization(0);
    let noise = sc.radar_noise(sc.snr_r_db);
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "r [m]", "RCRB_r NF", "RCRB_r FF", "RCRB_th NF", "known-r th");
    for r in [2.0, 5.0, 10.0, 20.0, 50.0] {
        let target = PolarCoord::new(r, sc.target.angle)?;
        let nf = sc.design(Pipeline::Nfbf, &real, &target, sc.eta)?;
        let ff = sc.design(Pipeline::Ffbf, &real, &target, sc.eta)?;
        let a = sc.crb(&nf, &target, noise)?;
        let b = sc.crb(&ff, &target, noise)?;

        let truth = sc.truth_at(&target)?;
        let g = g_matrix(&truth, &sc.cfg_tx, &sc.cfg_rx);
        let (dr, dt) = g_derivatives(&truth, &sc.cfg_tx, &sc.cfg_rx, DerivativeMode::Analytic)?;
        let blocks = fim_blocks(&g, &dr, &dt, &tx_covariance(&nf), truth.beta, sc.snapshots, noise)?;
        let known = crb_theta_known_range(&blocks).sqrt();
        assert!(crb_range_known_angle(&blocks) <= a.crb_r * (1.0 + 1e-9));
        println!("{r:>6} {:>12.3e} {:>12.3e} {:>12.3e} {known:>12.3e}", a.rcrb_r, b.rcrb_r, a.rcrb_theta);
    }
    Ok(())
}
