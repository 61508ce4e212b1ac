//! Command-line front end: strict TOML scenario files, subcommands and
//! on-disk artifacts. Degrees, dBm and GHz exist only here; everything is
//! converted to radians, watts and hertz before it reaches the library.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beamform::{beampattern_far, beampattern_near_grid, tx_covariance, AmInit, AmOptions};
use crate::channel::{sum_rate, user_sinr, UserPlacement};
use crate::experiments::{
    dbm_to_watts, linspace_step, power_point, run_sweep, sample_scatterers, stream_rng, watts_to_dbm,
    DesignAlgorithm, Pipeline, Profile, Scenario, Stream, SweepGrids, SWEEPS,
};
use crate::geometry::{gain_loss_approx, gain_loss_exact, ArrayConfig, PolarCoord};
use crate::numkernel::CMatrix;
use crate::powermin::{build_problem, minimize_power, QosSpec, SdpOptions, SdpStatus};
use crate::sensing::{
    music_search, music_spectrum, noise_subspace, sample_covariance, synthesize_echo,
    synthesize_symbols, MusicGrid, MusicOptions, Refinement,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    #[default]
    Paper,
    Desk,
}

impl From<ProfileName> for Profile {
    fn from(p: ProfileName) -> Self {
        match p {
            ProfileName::Paper => Profile::Paper,
            ProfileName::Desk => Profile::Desk,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmName {
    #[default]
    Ls,
    Am,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefineName {
    None,
    Parabolic,
    #[default]
    Newton,
}

impl From<RefineName> for Refinement {
    fn from(r: RefineName) -> Self {
        match r {
            RefineName::None => Refinement::None,
            RefineName::Parabolic => Refinement::Parabolic,
            RefineName::Newton => Refinement::Newton,
        }
    }
}

/// Scenario file. Absent keys take their defaults; unknown keys are errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub profile: ProfileName,
    pub seed: u64,
    /// Profile default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Worker threads; all cores when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub array: ArraySection,
    pub target: TargetSection,
    pub power: PowerSection,
    pub radar: RadarSection,
    pub design: DesignSection,
    pub music: MusicSection,
    pub sweeps: SweepSection,
    /// The two default users when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub users: Option<Vec<UserSection>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_tx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_rx: Option<usize>,
    pub carrier_ghz: f64,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSection {
    pub range_m: f64,
    pub angle_deg: f64,
    pub beta_re: f64,
    pub beta_im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSection {
    pub transmit_dbm: f64,
    pub comm_noise_dbm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarSection {
    pub snapshots: usize,
    pub snr_r_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    pub eta: f64,
    pub algorithm: AlgorithmName,
    pub am_tol: f64,
    pub am_max_iter: usize,
    pub am_min_iter: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MusicSection {
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub range_step_m: f64,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub angle_step_deg: f64,
    pub coarse_factor: usize,
    pub refine: RefineName,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub snr_r_db: Vec<f64>,
    pub detection_snr_r_db: Vec<f64>,
    pub p_fa: f64,
    pub tx_snr_db: Vec<f64>,
    pub eta: Vec<f64>,
    pub tradeoff_ranges_m: Vec<f64>,
    pub distance_m: Vec<f64>,
    pub gamma_db: Vec<f64>,
    pub g_floor: Vec<f64>,
    pub fixed_gamma_db: f64,
    pub fixed_g_floor: f64,
    pub randomization_trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSection {
    pub range_m: f64,
    pub angle_deg: f64,
    /// Explicit scatterer positions; drawn from the seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scatterers: Option<Vec<PointSection>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_scatterers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSection {
    pub range_m: f64,
    pub angle_deg: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            profile: ProfileName::Paper,
            seed: 0,
            trials: None,
            threads: None,
            array: ArraySection::default(),
            target: TargetSection::default(),
            power: PowerSection::default(),
            radar: RadarSection::default(),
            design: DesignSection::default(),
            music: MusicSection::default(),
            sweeps: SweepSection::default(),
            users: None,
        }
    }
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            n_tx: None,
            n_rx: None,
            carrier_ghz: 30.0,
            spacing_wavelengths: 0.5,
        }
    }
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            range_m: 5.0,
            angle_deg: 60.0,
            beta_re: 1.0,
            beta_im: 0.0,
        }
    }
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            transmit_dbm: 30.0,
            comm_noise_dbm: -90.0,
        }
    }
}

impl Default for RadarSection {
    fn default() -> Self {
        Self {
            snapshots: 64,
            snr_r_db: 15.0,
        }
    }
}

impl Default for DesignSection {
    fn default() -> Self {
        let am = AmOptions::default();
        Self {
            eta: 0.5,
            algorithm: AlgorithmName::Ls,
            am_tol: am.tol,
            am_max_iter: am.max_iter,
            am_min_iter: am.min_iter,
        }
    }
}

impl Default for MusicSection {
    fn default() -> Self {
        Self {
            range_min_m: 1.0,
            range_max_m: 30.0,
            range_step_m: 0.1,
            angle_min_deg: -89.75,
            angle_max_deg: 89.75,
            angle_step_deg: 0.25,
            coarse_factor: 10,
            refine: RefineName::Newton,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        let g = SweepGrids::default();
        Self {
            snr_r_db: g.snr_r_db,
            detection_snr_r_db: g.detection_snr_r_db,
            p_fa: g.p_fa,
            tx_snr_db: g.tx_snr_db,
            eta: g.eta,
            tradeoff_ranges_m: g.tradeoff_ranges,
            distance_m: g.distance,
            gamma_db: g.gamma_db,
            g_floor: g.g_floor,
            fixed_gamma_db: g.fixed_gamma_db,
            fixed_g_floor: g.fixed_g_floor,
            randomization_trials: g.randomization_trials,
        }
    }
}

fn config_err(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Parses scenario text without normalizing it.
pub fn parse_config_raw(text: &str) -> Result<Config> {
    let de = toml::Deserializer::parse(text).map_err(|e| config_err("document", e.message().to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = e.path().to_string();
        let msg = e.inner().message().to_string();
        // Name the offending key itself when the path stops at its table.
        let field = ["unknown field `", "missing field `"]
            .iter()
            .find_map(|p| msg.strip_prefix(p))
            .and_then(|rest| rest.split('`').next());
        if let Some(field) = field {
            if path == "." {
                path = field.to_string();
            } else if !path.ends_with(field) {
                path = format!("{path}.{field}");
            }
        }
        config_err(path, msg)
    })
}

/// Parses, normalizes and validates scenario text.
pub fn parse_config_str(text: &str) -> Result<Config> {
    let c = parse_config_raw(text)?.normalized();
    c.validate()?;
    Ok(c)
}

/// Reads a scenario file into a validated [`Scenario`].
pub fn parse_config(path: &Path) -> Result<Scenario> {
    read_config(path)?.scenario()
}

pub fn read_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(path.display().to_string(), e.to_string()))?;
    parse_config_str(&text)
}

fn check(ok: bool, path: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(config_err(path, reason))
    }
}

fn check_angle(deg: f64, path: &str) -> Result<()> {
    check(
        deg.is_finite() && deg.abs() < 90.0,
        path,
        &format!("angle {deg} deg is outside (-90, 90)"),
    )
}

fn check_range(r: f64, path: &str) -> Result<()> {
    check(r.is_finite() && r > 0.0, path, &format!("range {r} m must be positive"))
}

fn check_finite(v: &[f64], path: &str) -> Result<()> {
    check(!v.is_empty(), path, "must not be empty")?;
    check(v.iter().all(|x| x.is_finite()), path, "values must be finite")
}

impl Config {
    /// Fills every profile-dependent default so the result reads back to
    /// itself.
    pub fn normalized(mut self) -> Self {
        let p: Profile = self.profile.into();
        self.array.n_tx.get_or_insert(p.n_elements());
        self.array.n_rx.get_or_insert(p.n_elements());
        self.trials.get_or_insert(p.trials());
        let users = self.users.get_or_insert_with(|| {
            [(5.0, 0.0), (15.0, 0.0)]
                .iter()
                .map(|&(r, a)| UserSection {
                    range_m: r,
                    angle_deg: a,
                    scatterers: None,
                    n_scatterers: None,
                })
                .collect()
        });
        for u in users.iter_mut() {
            if u.scatterers.is_none() {
                u.n_scatterers.get_or_insert(crate::experiments::DEFAULT_SCATTERERS);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.array;
        for (n, path) in [(a.n_tx, "array.n_tx"), (a.n_rx, "array.n_rx")] {
            if let Some(n) = n {
                check(n >= 2, path, "needs at least 2 elements")?;
            }
        }
        check(a.carrier_ghz.is_finite() && a.carrier_ghz > 0.0, "array.carrier_ghz", "must be positive")?;
        check(
            a.spacing_wavelengths.is_finite() && a.spacing_wavelengths > 0.0,
            "array.spacing_wavelengths",
            "must be positive",
        )?;
        if let Some(t) = self.trials {
            check(t >= 1, "trials", "must be at least 1")?;
        }
        if let Some(t) = self.threads {
            check(t >= 1, "threads", "must be at least 1")?;
        }
        check_range(self.target.range_m, "target.range_m")?;
        check_angle(self.target.angle_deg, "target.angle_deg")?;
        check(
            self.target.beta_re.is_finite() && self.target.beta_im.is_finite(),
            "target.beta_re",
            "must be finite",
        )?;
        check(
            self.power.transmit_dbm.is_finite(),
            "power.transmit_dbm",
            "must be finite",
        )?;
        check(
            self.power.comm_noise_dbm.is_finite(),
            "power.comm_noise_dbm",
            "must be finite",
        )?;
        check(self.radar.snapshots >= 1, "radar.snapshots", "must be at least 1")?;
        check(self.radar.snr_r_db.is_finite(), "radar.snr_r_db", "must be finite")?;
        let d = &self.design;
        check((0.0..=1.0).contains(&d.eta), "design.eta", "must lie in [0, 1]")?;
        check(d.am_tol > 0.0, "design.am_tol", "must be positive")?;
        check(d.am_max_iter >= 1, "design.am_max_iter", "must be at least 1")?;
        let m = &self.music;
        check_range(m.range_min_m, "music.range_min_m")?;
        check(m.range_max_m > m.range_min_m, "music.range_max_m", "must exceed music.range_min_m")?;
        check(m.range_step_m > 0.0, "music.range_step_m", "must be positive")?;
        check_angle(m.angle_min_deg, "music.angle_min_deg")?;
        check_angle(m.angle_max_deg, "music.angle_max_deg")?;
        check(
            m.angle_max_deg > m.angle_min_deg,
            "music.angle_max_deg",
            "must exceed music.angle_min_deg",
        )?;
        check(m.angle_step_deg > 0.0, "music.angle_step_deg", "must be positive")?;
        check(m.coarse_factor >= 1, "music.coarse_factor", "must be at least 1")?;
        let s = &self.sweeps;
        check_finite(&s.snr_r_db, "sweeps.snr_r_db")?;
        check_finite(&s.detection_snr_r_db, "sweeps.detection_snr_r_db")?;
        check(s.p_fa > 0.0 && s.p_fa < 1.0, "sweeps.p_fa", "must lie in (0, 1)")?;
        check_finite(&s.tx_snr_db, "sweeps.tx_snr_db")?;
        check_finite(&s.eta, "sweeps.eta")?;
        for (i, e) in s.eta.iter().enumerate() {
            check((0.0..=1.0).contains(e), &format!("sweeps.eta[{i}]"), "must lie in [0, 1]")?;
        }
        for (v, name) in [(&s.tradeoff_ranges_m, "sweeps.tradeoff_ranges_m"), (&s.distance_m, "sweeps.distance_m")] {
            check_finite(v, name)?;
            for (i, r) in v.iter().enumerate() {
                check_range(*r, &format!("{name}[{i}]"))?;
            }
        }
        check_finite(&s.gamma_db, "sweeps.gamma_db")?;
        check_finite(&s.g_floor, "sweeps.g_floor")?;
        for (i, g) in s.g_floor.iter().enumerate() {
            check(*g >= 0.0, &format!("sweeps.g_floor[{i}]"), "must be non-negative")?;
        }
        check(s.fixed_gamma_db.is_finite(), "sweeps.fixed_gamma_db", "must be finite")?;
        check(s.fixed_g_floor >= 0.0, "sweeps.fixed_g_floor", "must be non-negative")?;
        if let Some(users) = &self.users {
            check(!users.is_empty(), "users", "needs at least one user")?;
            for (k, u) in users.iter().enumerate() {
                check_range(u.range_m, &format!("users[{k}].range_m"))?;
                check_angle(u.angle_deg, &format!("users[{k}].angle_deg"))?;
                for (j, p) in u.scatterers.iter().flatten().enumerate() {
                    check_range(p.range_m, &format!("users[{k}].scatterers[{j}].range_m"))?;
                    check_angle(p.angle_deg, &format!("users[{k}].scatterers[{j}].angle_deg"))?;
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Output(e.to_string()))
    }

    /// SI scenario. Expects a normalized, validated config.
    pub fn scenario(&self) -> Result<Scenario> {
        let c = self.clone().normalized();
        c.validate()?;
        let profile: Profile = c.profile.into();
        let mut sc = Scenario::for_profile(profile, c.seed);
        let lambda = crate::geometry::wavelength_from_carrier(c.array.carrier_ghz * 1e9)?;
        let d = c.array.spacing_wavelengths * lambda;
        sc.carrier = c.array.carrier_ghz * 1e9;
        sc.cfg_tx = ArrayConfig::new(c.array.n_tx.unwrap_or(profile.n_elements()), d, lambda)?;
        sc.cfg_rx = ArrayConfig::new(c.array.n_rx.unwrap_or(profile.n_elements()), d, lambda)?;
        sc.trials = c.trials.unwrap_or(profile.trials());
        sc.target = PolarCoord::from_degrees(c.target.range_m, c.target.angle_deg)?;
        sc.beta = Complex64::new(c.target.beta_re, c.target.beta_im);
        sc.p_t = dbm_to_watts(c.power.transmit_dbm);
        sc.comm_noise = dbm_to_watts(c.power.comm_noise_dbm);
        sc.snapshots = c.radar.snapshots;
        sc.snr_r_db = c.radar.snr_r_db;
        sc.eta = c.design.eta;
        sc.algorithm = match c.design.algorithm {
            AlgorithmName::Ls => DesignAlgorithm::Ls,
            AlgorithmName::Am => DesignAlgorithm::Am(AmOptions {
                tol: c.design.am_tol,
                max_iter: c.design.am_max_iter,
                min_iter: c.design.am_min_iter,
                init: AmInit::Ones,
            }),
        };
        let m = &c.music;
        sc.music_grid = MusicGrid::uniform(
            (m.range_min_m, m.range_max_m, m.range_step_m),
            (
                m.angle_min_deg.to_radians(),
                m.angle_max_deg.to_radians(),
                m.angle_step_deg.to_radians(),
            ),
        )?;
        sc.music = MusicOptions {
            coarse_factor: m.coarse_factor,
            refine: m.refine.into(),
        };
        let s = &c.sweeps;
        sc.grids = SweepGrids {
            snr_r_db: s.snr_r_db.clone(),
            detection_snr_r_db: s.detection_snr_r_db.clone(),
            p_fa: s.p_fa,
            tx_snr_db: s.tx_snr_db.clone(),
            eta: s.eta.clone(),
            tradeoff_ranges: s.tradeoff_ranges_m.clone(),
            distance: s.distance_m.clone(),
            gamma_db: s.gamma_db.clone(),
            g_floor: s.g_floor.clone(),
            fixed_gamma_db: s.fixed_gamma_db,
            fixed_g_floor: s.fixed_g_floor,
            randomization_trials: s.randomization_trials,
        };
        sc.users = c
            .users
            .iter()
            .flatten()
            .enumerate()
            .map(|(k, u)| -> Result<UserPlacement> {
                let los = PolarCoord::from_degrees(u.range_m, u.angle_deg)?;
                let scat = match &u.scatterers {
                    Some(list) => list
                        .iter()
                        .map(|p| PolarCoord::from_degrees(p.range_m, p.angle_deg))
                        .collect::<Result<Vec<_>>>()?,
                    None => sample_scatterers(c.seed, k, u.n_scatterers.unwrap_or(0)),
                };
                Ok(UserPlacement::new(los, scat))
            })
            .collect::<Result<_>>()?;
        Ok(sc)
    }
}

/// Writes `<prefix>_re.csv` and `<prefix>_im.csv`, each with a one-line
/// shape header and 17 significant digits per entry.
pub fn write_complex_csv(prefix: &Path, m: &CMatrix, seed: u64) -> Result<(PathBuf, PathBuf)> {
    let name = prefix
        .file_name()
        .ok_or_else(|| Error::Output(format!("bad output prefix {}", prefix.display())))?
        .to_string_lossy()
        .into_owned();
    let paths = (
        prefix.with_file_name(format!("{name}_re.csv")),
        prefix.with_file_name(format!("{name}_im.csv")),
    );
    for (path, part) in [(&paths.0, 0), (&paths.1, 1)] {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# shape={}x{} part={} master_seed={}",
            m.nrows(),
            m.ncols(),
            if part == 0 { "re" } else { "im" },
            seed
        );
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols())
                .map(|j| {
                    let z = m[(i, j)];
                    format!("{:.16e}", if part == 0 { z.re } else { z.im })
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        std::fs::write(path, out)?;
    }
    Ok(paths)
}

fn read_real_csv(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let bad = |why: &str| Error::Output(format!("{}: {why}", path.display()));
    let head = lines.next().ok_or_else(|| bad("empty file"))?;
    let shape = head
        .split_whitespace()
        .find_map(|t| t.strip_prefix("shape="))
        .ok_or_else(|| bad("missing shape header"))?;
    let (r, c) = shape.split_once('x').ok_or_else(|| bad("malformed shape"))?;
    let rows: usize = r.parse().map_err(|_| bad("malformed shape"))?;
    let cols: usize = c.parse().map_err(|_| bad("malformed shape"))?;
    let vals: Vec<f64> = lines
        .flat_map(|l| l.split(','))
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad("non-numeric entry")))
        .collect::<Result<_>>()?;
    if vals.len() != rows * cols {
        return Err(bad("entry count does not match the shape"));
    }
    Ok((rows, cols, vals))
}

/// Inverse of [`write_complex_csv`].
pub fn read_complex_csv(re: &Path, im: &Path) -> Result<CMatrix> {
    let (r, c, a) = read_real_csv(re)?;
    let (r2, c2, b) = read_real_csv(im)?;
    if (r, c) != (r2, c2) {
        return Err(Error::Output("real and imaginary parts differ in shape".into()));
    }
    Ok(CMatrix::from_fn(r, c, |i, j| Complex64::new(a[i * c + j], b[i * c + j])))
}

const PIPELINES: [&str; 5] = ["nfbf", "ffbf", "radar_only", "nfbf_comm", "ffbf_comm"];

#[derive(Parser, Debug)]
#[command(name = "nfisac", version, about = "Near-field ISAC beamforming simulator")]
pub struct Cli {
    /// Scenario file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub profile: Option<ProfileName>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Exact and approximate near-field gain loss of a far-field beam.
    Gainloss,
    /// Precoder of one pipeline plus its beampatterns.
    Design {
        #[arg(long, default_value = "nfbf", value_parser = PIPELINES)]
        pipeline: String,
    },
    /// Far-field and near-field beampatterns of one pipeline.
    Beampattern {
        #[arg(long, default_value = "nfbf", value_parser = PIPELINES)]
        pipeline: String,
    },
    /// One MUSIC estimation run with a spectrum dump.
    Music {
        #[arg(long, default_value = "nfbf", value_parser = PIPELINES)]
        pipeline: String,
    },
    /// Cramér-Rao bound of one pipeline at the configured radar SNR.
    Crb {
        #[arg(long, default_value = "nfbf", value_parser = PIPELINES)]
        pipeline: String,
    },
    /// QoS power minimization at the fixed sweep thresholds.
    Powermin,
    /// One Monte-Carlo sweep, or all of them.
    Sweep {
        #[arg(value_parser = ["estimation", "detection", "rate", "tradeoff", "distance", "power", "all"])]
        name: String,
    },
    /// Prints the normalized configuration.
    Config,
}

/// Resolved invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub config_path: Option<PathBuf>,
    pub command: Command,
    pub output_dir: PathBuf,
    pub config: Config,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| config_err(p.display().to_string(), e.to_string()))?;
                parse_config_raw(&text)?
            }
            None => Config::default(),
        };
        if let Some(p) = cli.profile {
            config.profile = p;
        }
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        if let Some(e) = cli.eta {
            config.design.eta = e;
        }
        if let Some(t) = cli.trials {
            config.trials = Some(t);
        }
        if let Some(t) = cli.threads {
            config.threads = Some(t);
        }
        let config = config.normalized();
        config.validate()?;
        Ok(Self {
            config_path: cli.config.clone(),
            command: cli.command.clone(),
            output_dir: cli.out.clone(),
            config,
        })
    }

    fn ensure_output_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.output_dir)
            .map_err(|e| config_err("--out", format!("{}: {e}", self.output_dir.display())))?;
        Ok(&self.output_dir)
    }
}

/// Exit status of an error: 2 for configuration and usage errors, 1 for
/// runtime failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::UnknownCommand(_) => 2,
        _ => 1,
    }
}

/// `error kind=<tag> [path=<key>] message="<text>"`.
pub fn error_line(e: &Error) -> String {
    match e {
        Error::Config { path, reason } => format!("error kind=config path={path:?} message={reason:?}"),
        other => format!("error kind={} message={:?}", other.kind(), other.to_string()),
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error kind=usage message={first:?}");
            eprint!("{}", e.render());
            return 2;
        }
    };
    match RunConfig::from_cli(&cli).and_then(|rc| dispatch(&rc)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(&e)
        }
    }
}

/// Runs one command on a resolved configuration.
pub fn dispatch(rc: &RunConfig) -> Result<()> {
    let threads = rc.config.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Output(e.to_string()))?;
    pool.install(|| dispatch_inner(rc))
}

fn pipeline(name: &str) -> Result<Pipeline> {
    Pipeline::from_name(name).ok_or_else(|| Error::UnknownCommand(format!("pipeline {name}")))
}

fn dispatch_inner(rc: &RunConfig) -> Result<()> {
    let sc = rc.config.scenario()?;
    match &rc.command {
        Command::Config => {
            print!("{}", rc.config.to_toml()?);
            Ok(())
        }
        Command::Gainloss => cmd_gainloss(&sc, rc.ensure_output_dir()?),
        Command::Design { pipeline: p } => cmd_design(&sc, pipeline(p)?, rc.ensure_output_dir()?),
        Command::Beampattern { pipeline: p } => {
            let out = rc.ensure_output_dir()?;
            let real = sc.realization(0);
            let f = sc.design(pipeline(p)?, &real, &sc.target, sc.eta)?;
            write_beampatterns(&sc, &tx_covariance(&f), out, p)
        }
        Command::Music { pipeline: p } => cmd_music(&sc, pipeline(p)?, rc.ensure_output_dir()?),
        Command::Crb { pipeline: p } => cmd_crb(&sc, pipeline(p)?),
        Command::Powermin => cmd_powermin(&sc, rc.ensure_output_dir()?),
        Command::Sweep { name } => {
            let out = rc.ensure_output_dir()?;
            let names: Vec<&str> = if name == "all" { SWEEPS.to_vec() } else { vec![name.as_str()] };
            for n in names {
                let res = run_sweep(&sc, n)?;
                let csv = res.write_csv(out)?;
                let plots = res.write_plots(out)?;
                println!("sweep={n} csv={} runtime_s={:.3}", csv.display(), res.runtime_secs);
                for p in plots {
                    println!("sweep={n} plot={}", p.display());
                }
            }
            Ok(())
        }
    }
}

fn header(sc: &Scenario, what: &str) -> String {
    format!(
        "# {what}\n# master_seed: {}\n# profile: {}\n# n_tx: {}\n# n_rx: {}\n# carrier_hz: {}\n",
        sc.master_seed,
        sc.profile.name(),
        sc.cfg_tx.n_elements,
        sc.cfg_rx.n_elements,
        sc.carrier
    )
}

fn cmd_gainloss(sc: &Scenario, out: &Path) -> Result<()> {
    let cfg = &sc.cfg_tx;
    let lo = cfg.fresnel_lower_boundary();
    let hi = 10.0 * cfg.fraunhofer_distance();
    let n = 60;
    let mut text = header(sc, "gain loss of a far-field beam at a near-field point");
    text.push_str("# columns: angle_deg, range_m, range over Fraunhofer distance, exact loss, Fresnel-approximation loss\n");
    text.push_str("angle_deg,range_m,r_over_df,exact,approx\n");
    for deg in [0.0, 30.0, 60.0] {
        for i in 0..n {
            let r = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
            let p = PolarCoord::from_degrees(r, deg)?;
            let approx = gain_loss_approx(cfg, &p).unwrap_or(f64::NAN);
            let _ = writeln!(
                text,
                "{deg},{r},{},{},{approx}",
                r / cfg.fraunhofer_distance(),
                gain_loss_exact(cfg, &p)
            );
        }
    }
    let path = out.join("gainloss.csv");
    std::fs::write(&path, text)?;
    println!("fraunhofer_distance_m={}", cfg.fraunhofer_distance());
    println!("fresnel_lower_boundary_m={lo}");
    println!("csv={}", path.display());
    Ok(())
}

fn cmd_design(sc: &Scenario, p: Pipeline, out: &Path) -> Result<()> {
    let real = sc.realization(0);
    let f = sc.design(p, &real, &sc.target, sc.eta)?;
    let (re, im) = write_complex_csv(&out.join(format!("design_{}", p.name())), &f.entries, sc.master_seed)?;
    let rate = sum_rate(&real.near, &f.entries, sc.comm_noise)?;
    println!("pipeline={} eta={} power_w={}", p.name(), sc.eta, f.power());
    println!("sum_rate_bps_hz={rate}");
    for k in 0..real.near.n_users() {
        println!("sinr_user{}={}", k + 1, user_sinr(&real.near, &f.entries, sc.comm_noise, k)?);
    }
    println!("precoder_re={}", re.display());
    println!("precoder_im={}", im.display());
    write_beampatterns(sc, &tx_covariance(&f), out, p.name())
}

fn write_beampatterns(sc: &Scenario, r: &CMatrix, out: &Path, tag: &str) -> Result<()> {
    let angles = linspace_step(-90.0, 90.0, 0.25);
    let rad: Vec<f64> = angles.iter().map(|a| a.to_radians()).collect();
    let far = beampattern_far(r, &sc.cfg_tx, &rad)?;
    let mut text = header(sc, "far-field beampattern a(theta)^H R_x a(theta)");
    text.push_str("angle_deg,gain\n");
    for (a, g) in angles.iter().zip(&far) {
        let _ = writeln!(text, "{a},{g}");
    }
    let far_path = out.join(format!("beampattern_far_{tag}.csv"));
    std::fs::write(&far_path, text)?;

    let ranges = linspace_step(0.5, 30.0, 0.5);
    let near_angles = linspace_step(-89.0, 89.0, 1.0);
    let near_rad: Vec<f64> = near_angles.iter().map(|a| a.to_radians()).collect();
    let grid = beampattern_near_grid(r, &sc.cfg_tx, &ranges, &near_rad)?;
    let mut text = header(sc, "near-field beampattern a(r, theta)^H R_x a(r, theta)");
    text.push_str("range_m,angle_deg,gain\n");
    for (i, rr) in ranges.iter().enumerate() {
        for (j, a) in near_angles.iter().enumerate() {
            let _ = writeln!(text, "{rr},{a},{}", grid[(i, j)]);
        }
    }
    let near_path = out.join(format!("beampattern_near_{tag}.csv"));
    std::fs::write(&near_path, text)?;
    println!("beampattern_far={}", far_path.display());
    println!("beampattern_near={}", near_path.display());
    Ok(())
}

fn cmd_music(sc: &Scenario, p: Pipeline, out: &Path) -> Result<()> {
    let real = sc.realization(0);
    let truth = sc.truth()?;
    let f = sc.design(p, &real, &sc.target, sc.eta)?;
    let noise = sc.radar_noise(sc.snr_r_db);
    let mut rng = stream_rng(sc.master_seed, Stream::Estimation, 0);
    let s = synthesize_symbols(&mut rng, f.n_streams(), sc.snapshots);
    let echo = synthesize_echo(&f, &s, &truth, &sc.cfg_tx, &sc.cfg_rx, noise, &mut rng)?;
    let r_y = sample_covariance(&echo);
    let est = music_search(&r_y, &sc.music_grid, &sc.cfg_tx, &sc.cfg_rx, &sc.music)?;
    // The dump uses the coarse lattice; the full grid is searched only near
    // the peak.
    let g = &sc.music_grid;
    let f_c = sc.music.coarse_factor.max(1);
    let dump = MusicGrid::new(
        g.ranges.iter().step_by(f_c).copied().collect(),
        g.angles.iter().step_by(f_c).copied().collect(),
    )?;
    let spec = music_spectrum(&noise_subspace(&r_y, 1)?, &dump, &sc.cfg_rx);
    let mut text = header(sc, "MUSIC pseudo-spectrum on the coarse lattice, receive frame");
    let _ = writeln!(text, "# pipeline: {} snr_r_db: {}", p.name(), sc.snr_r_db);
    text.push_str("range_m,angle_deg,spectrum\n");
    for (i, r) in dump.ranges.iter().enumerate() {
        for (j, a) in dump.angles.iter().enumerate() {
            let _ = writeln!(text, "{r},{},{}", a.to_degrees(), spec[(i, j)]);
        }
    }
    let path = out.join(format!("music_spectrum_{}.csv", p.name()));
    std::fs::write(&path, text)?;
    println!("true_range_m={} true_angle_deg={}", sc.target.range, sc.target.angle.to_degrees());
    println!("est_range_m={} est_angle_deg={}", est.tx.range, est.tx.angle.to_degrees());
    println!("peak_ratio={}", est.peak_ratio);
    println!("spectrum={}", path.display());
    Ok(())
}

fn cmd_crb(sc: &Scenario, p: Pipeline) -> Result<()> {
    let real = sc.realization(0);
    let f = sc.design(p, &real, &sc.target, sc.eta)?;
    let rep = sc.crb(&f, &sc.target, sc.radar_noise(sc.snr_r_db))?;
    println!("pipeline={} eta={}", p.name(), sc.eta);
    println!("crb_r={}", rep.crb_r);
    println!("crb_theta={}", rep.crb_theta);
    println!("rcrb_r={}", rep.rcrb_r);
    println!("rcrb_theta={}", rep.rcrb_theta);
    println!("snr_r={}", rep.snr_r);
    println!("snr_r_db={}", 10.0 * rep.snr_r.log10());
    println!("status={:?}", rep.status);
    Ok(())
}

fn cmd_powermin(sc: &Scenario, out: &Path) -> Result<()> {
    let g = &sc.grids;
    let real = sc.realization(0);
    let qos = QosSpec {
        sinr_thresholds: vec![crate::experiments::db_to_linear(g.fixed_gamma_db); sc.users.len()],
        target_power_floor: g.fixed_g_floor,
        noise_power: sc.comm_noise,
    };
    let a = crate::geometry::near_focusing(&sc.cfg_tx, &sc.target);
    let problem = build_problem(&real.near, &a, &qos)?;
    let mut rng = stream_rng(sc.master_seed, Stream::Randomization, 0);
    let sol = minimize_power(&problem, &SdpOptions::default(), g.randomization_trials, &mut rng)?;
    println!("status={:?}", sol.status);
    println!("relaxed_power_w={}", sol.total_power);
    println!("relaxed_power_dbm={}", watts_to_dbm(sol.total_power));
    println!("duality_gap_w={}", sol.gap);
    println!("ranks={:?}", sol.ranks);
    if let Some(v) = &sol.violated {
        println!("violated={v}");
    }
    match &sol.recovered {
        Some(f) if sol.status != SdpStatus::Infeasible => {
            let covs = crate::powermin::column_covariances(&f.entries);
            println!("recovered_power_w={}", f.power());
            println!("max_relative_violation={}", problem.max_relative_violation(&covs));
            let (re, im) = write_complex_csv(&out.join("powermin_precoder"), &f.entries, sc.master_seed)?;
            println!("precoder_re={}", re.display());
            println!("precoder_im={}", im.display());
        }
        _ => println!("recovered_power_w=NaN"),
    }
    let pt = power_point(sc, &real, g.fixed_gamma_db, g.fixed_g_floor, 0)?;
    println!("ffbf_power_w={}", pt.ffbf);
    Ok(())
}
