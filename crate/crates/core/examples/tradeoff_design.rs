//! Weighted ISAC design between the ZF communication precoder and the radar
//! beam, with the closed-form LS solution and alternating minimization.

use nfisac::beamform::{radar_precoder, tradeoff_am, tradeoff_ls, AmOptions};
use nfisac::channel::{sum_rate, Model};
use nfisac::experiments::{Pipeline, Scenario};

fn main() -> nfisac::Result<()> {
    let sc = Scenario::desk();
    let real = sc.realization(0);
    let noise_r = sc.radar_noise(sc.snr_r_db);
    println!("{:>5} {:>12} {:>12} {:>12} {:>12}", "eta", "rate NFBF", "RCRB_r NFBF", "rate FFBF", "RCRB_r FFBF");
    for i in 0..=10 {
        let eta = i as f64 / 10.0;
        let mut row = format!("{eta:>5.1}");
        for p in [Pipeline::Nfbf, Pipeline::Ffbf] {
            let f = sc.design(p, &real, &sc.target, eta)?;
            let rate = sum_rate(&real.near, &f.entries, sc.comm_noise)?;
            let crb = sc.crb(&f, &sc.target, noise_r)?;
            row += &format!(" {rate:>12.3} {:>12.3e}", crb.rcrb_r);
        }
        println!("{row}");
    }

    let f_com = sc.design(Pipeline::NfbfComm, &real, &sc.target, 1.0)?;
    let f_rad = radar_precoder(&sc.cfg_tx, &sc.target, sc.p_t, Model::Near)?;
    let ls = tradeoff_ls(&f_com, &f_rad, 0.3, sc.p_t)?;
    let am = tradeoff_am(&f_com, &f_rad, 0.3, sc.p_t, &AmOptions { max_iter: 2000, ..Default::default() })?;
    println!(
        "eta 0.3: LS objective {:.6}, AM objective {:.6} after {} iterations",
        ls.objective,
        am.design.objective,
        am.trace.len()
    );
    Ok(())
}
