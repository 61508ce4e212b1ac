//! Minimum transmit power under per-user SINR and target illumination
//! constraints: relaxation, rank-1 recovery, and the far-field comparison.

use nfisac::experiments::{power_point, Scenario};

fn main() -> nfisac::Result<()> {
    let sc = Scenario::desk();
    let real = sc.realization(0);
    println!("{:>8} {:>6} {:>14} {:>14} {:>14}", "Gamma dB", "G", "relaxed [W]", "NFBF [W]", "FFBF [W]");
    for (i, (gamma_db, g)) in [(5.0, 100.0), (10.0, 100.0), (15.0, 100.0), (15.0, 200.0)].into_iter().enumerate() {
        let p = power_point(&sc, &real, gamma_db, g, i as u64)?;
        let ffbf = if p.ffbf.is_nan() { "infeasible".to_string() } else { format!("{:.4e}", p.ffbf) };
        println!("{gamma_db:>8} {g:>6} {:>14.4e} {:>14.4e} {ffbf:>14}", p.nfbf_relaxed, p.nfbf);
    }
    Ok(())
}
