//! Joint range-angle estimation of one target with two-stage MUSIC.

use nfisac::experiments::{stream_rng, Pipeline, Scenario, Stream};
use nfisac::sensing::{music_search, sample_covariance, synthesize_echo, synthesize_symbols};

fn main() -> nfisac::Result<()> {
    let sc = Scenario::desk();
    let real = sc.realization(0);
    let truth = sc.truth()?;
    let f = sc.design(Pipeline::Nfbf, &real, &sc.target, sc.eta)?;
    let mut rng = stream_rng(sc.master_seed, Stream::Estimation, 0);
    println!("truth: r = {:.4} m, theta = {:.4} deg", sc.target.range, sc.target.angle.to_degrees());
    for snr_db in [0.0, 10.0, 20.0, 30.0] {
        let s = synthesize_symbols(&mut rng, f.n_streams(), sc.snapshots);
        let echo = synthesize_echo(&f, &s, &truth, &sc.cfg_tx, &sc.cfg_rx, sc.radar_noise(snr_db), &mut rng)?;
        let est = music_search(&sample_covariance(&echo), &sc.music_grid, &sc.cfg_tx, &sc.cfg_rx, &sc.music)?;
        println!(
            "SNR_r {snr_db:>4} dB: r = {:.4} m, theta = {:.4} deg, peak ratio {:.1}",
            est.tx.range,
            est.tx.angle.to_degrees(),
            est.peak_ratio
        );
    }
    Ok(())
}
