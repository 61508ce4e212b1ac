//! Far-field model mismatch: gain loss of a far-field steering vector
//! against the exact spherical response, along broadside and off-axis.

use nfisac::geometry::{gain_loss_approx, gain_loss_exact, wavelength_from_carrier, ArrayConfig, PolarCoord};

fn main() -> nfisac::Result<()> {
    let lambda = wavelength_from_carrier(30e9)?;
    let cfg = ArrayConfig::half_wavelength(256, lambda)?;
    println!(
        "N = {}, aperture {:.3} m, Fresnel boundary {:.2} m, Fraunhofer distance {:.1} m",
        cfg.n_elements,
        cfg.aperture(),
        cfg.fresnel_lower_boundary(),
        cfg.fraunhofer_distance()
    );
    println!("{:>8} {:>8} {:>10} {:>10}", "r [m]", "deg", "exact", "approx");
    for deg in [0.0, 30.0, 60.0] {
        for r in [2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 300.0] {
            let p = PolarCoord::from_degrees(r, deg)?;
            let exact = gain_loss_exact(&cfg, &p);
            let approx = gain_loss_approx(&cfg, &p)?;
            println!("{r:>8} {deg:>8} {exact:>10.4} {approx:>10.4}");
        }
    }
    Ok(())
}
