//! Runs one named sweep at desk scale and writes its CSV and SVG plots.
//!
//! `cargo run --release --example monte_carlo_sweep -- rate out/`

use std::path::PathBuf;

use nfisac::experiments::{run_sweep, Scenario, SWEEPS};

fn main() -> nfisac::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "rate".into());
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    if !SWEEPS.contains(&name.as_str()) {
        eprintln!("unknown sweep {name}; one of {}", SWEEPS.join(", "));
        std::process::exit(2);
    }
    let sc = Scenario::desk();
    let res = run_sweep(&sc, &name)?;
    std::fs::create_dir_all(&dir)?;
    let csv = res.write_csv(&dir)?;
    let plots = res.write_plots(&dir)?;
    println!("{} rows in {:.1} s -> {}", res.rows(), res.runtime_secs, csv.display());
    for p in plots {
        println!("plot {}", p.display());
    }
    Ok(())
}
