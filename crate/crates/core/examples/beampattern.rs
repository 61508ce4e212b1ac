//! Near- and far-field radar beams aimed at the same point: the far beam
//! covers the whole angular ray, the near beam focuses in range as well.

use nfisac::beamform::{beampattern_far, beampattern_near, radar_precoder, tx_covariance};
use nfisac::channel::Model;
use nfisac::geometry::{ArrayConfig, PolarCoord};

fn main() -> nfisac::Result<()> {
    let cfg = ArrayConfig::half_wavelength(128, 0.01)?;
    let target = PolarCoord::from_degrees(4.0, 30.0)?;
    let angles: Vec<f64> = (-90..=90).step_by(15).map(|d| (d as f64).to_radians()).collect();
    let ranges = [1.0, 2.0, 3.0, 4.0, 6.0, 10.0, 20.0];
    for model in [Model::Far, Model::Near] {
        let r = tx_covariance(&radar_precoder(&cfg, &target, 1.0, model)?);
        let far = beampattern_far(&r, &cfg, &angles)?;
        let ray: Vec<PolarCoord> = ranges
            .iter()
            .map(|&d| PolarCoord::new(d, target.angle))
            .collect::<nfisac::Result<_>>()?;
        let near = beampattern_near(&r, &cfg, &ray)?;
        println!("{} beam", model.as_str());
        let cut: Vec<String> = angles.iter().zip(&far).map(|(a, g)| format!("{:.0}:{g:.2}", a.to_degrees())).collect();
        println!("  angle cut   {}", cut.join(" "));
        let cut: Vec<String> = ranges.iter().zip(&near).map(|(d, g)| format!("{d}m:{g:.2}")).collect();
        println!("  range cut   {}", cut.join(" "));
    }
    Ok(())
}
