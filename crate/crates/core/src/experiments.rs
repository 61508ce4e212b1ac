//! Scenarios, seeded Monte-Carlo sweeps and their CSV / SVG artifacts.
//!
//! Every random draw comes from a ChaCha8 stream keyed by the master seed,
//! a purpose tag and an index, so trials can run in any order and on any
//! number of threads while the merged result stays bit-identical.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::beamform::{
    radar_precoder, tradeoff_am, tradeoff_ls, tx_covariance, zf_precoder, AmOptions, Precoder,
};
use crate::channel::{channel_matrix, sample_gains, sum_rate, user_sinr, ChannelMatrix, Model, UserPlacement};
use crate::crb::{crb_for_covariance, noise_for_snr_r, CrbReport};
use crate::geometry::{far_steering, near_focusing, wavelength_from_carrier, ArrayConfig, PolarCoord};
use crate::numkernel::CMatrix;
use crate::powermin::{allocate_power, build_problem, minimize_power, QosSpec, SdpOptions, SdpStatus};
use crate::sensing::{
    detection_statistic, echo_mean, complex_noise, music_search, sample_covariance, synthesize_symbols,
    threshold_analytic, EchoBatch, MusicGrid, MusicOptions, Refinement, TargetTruth,
};
use crate::{Error, Result};

/// Purpose tags of the random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scatterers = 1,
    Channel = 2,
    Estimation = 3,
    Detection = 4,
    Randomization = 5,
}

/// Independent generator for `(master, purpose, index)`.
pub fn stream_rng(master: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((purpose as u64) << 48) | index);
    rng
}

/// Square root of the mean squared error.
pub fn rmse(estimates: &[f64], truth: f64) -> f64 {
    if estimates.is_empty() {
        return f64::NAN;
    }
    let s: f64 = estimates.iter().map(|e| (e - truth).powi(2)).sum();
    (s / estimates.len() as f64).sqrt()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w / 1e-3)
}

/// Inclusive arithmetic sequence.
pub fn linspace_step(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // Rounded to 12 decimals so grids like 0.1 steps print as written.
    (0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

/// Named design pipelines. Each fixes the model the precoder is designed
/// with; all are scored against the near-field truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    /// Trade-off design on the near-field model.
    Nfbf,
    /// Trade-off design on the far-field model.
    Ffbf,
    /// `η = 0` on the near-field model.
    RadarOnly,
    /// ZF on the near-field channel.
    NfbfComm,
    /// ZF on the far-field channel.
    FfbfComm,
}

impl Pipeline {
    pub const ALL: [Pipeline; 5] = [
        Pipeline::Nfbf,
        Pipeline::Ffbf,
        Pipeline::RadarOnly,
        Pipeline::NfbfComm,
        Pipeline::FfbfComm,
    ];

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Nfbf => "nfbf",
            Pipeline::Ffbf => "ffbf",
            Pipeline::RadarOnly => "radar_only",
            Pipeline::NfbfComm => "nfbf_comm",
            Pipeline::FfbfComm => "ffbf_comm",
        }
    }

    pub fn design_model(self) -> Model {
        match self {
            Pipeline::Nfbf | Pipeline::RadarOnly | Pipeline::NfbfComm => Model::Near,
            Pipeline::Ffbf | Pipeline::FfbfComm => Model::Far,
        }
    }
}

/// Trade-off solver used by the pipelines.
#[derive(Clone, Debug, Default)]
pub enum DesignAlgorithm {
    #[default]
    Ls,
    Am(AmOptions),
}

/// Which preset the defaults come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Profile {
    /// 256 elements, 500 trials.
    #[default]
    Paper,
    /// 64 elements, 100 trials.
    Desk,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Paper => "paper",
            Profile::Desk => "desk",
        }
    }

    pub fn n_elements(self) -> usize {
        match self {
            Profile::Paper => 256,
            Profile::Desk => 64,
        }
    }

    pub fn trials(self) -> usize {
        match self {
            Profile::Paper => 500,
            Profile::Desk => 100,
        }
    }
}

/// Sweep axes and fixed operating points.
#[derive(Clone, Debug)]
pub struct SweepGrids {
    /// Radar SNR `|β|² L P_t / σ_w²` in dB, estimation sweep.
    pub snr_r_db: Vec<f64>,
    /// Radar SNR in dB, detection sweep.
    pub detection_snr_r_db: Vec<f64>,
    /// False-alarm probability of the detector threshold.
    pub p_fa: f64,
    /// Transmit SNR `P_t / σ_n²` in dB, rate sweep.
    pub tx_snr_db: Vec<f64>,
    pub eta: Vec<f64>,
    /// Target ranges of the trade-off sweep, meters.
    pub tradeoff_ranges: Vec<f64>,
    /// Target ranges of the distance sweep, meters.
    pub distance: Vec<f64>,
    /// SINR thresholds in dB with the target floor held at `fixed_g_floor`.
    pub gamma_db: Vec<f64>,
    /// Target gain floors with the SINR thresholds held at `fixed_gamma_db`.
    pub g_floor: Vec<f64>,
    pub fixed_gamma_db: f64,
    pub fixed_g_floor: f64,
    /// Gaussian randomization draws of the rank-1 recovery.
    pub randomization_trials: usize,
}

impl Default for SweepGrids {
    fn default() -> Self {
        Self {
            snr_r_db: linspace_step(0.0, 30.0, 5.0),
            detection_snr_r_db: linspace_step(-40.0, 0.0, 2.5),
            p_fa: 1e-7,
            tx_snr_db: linspace_step(60.0, 160.0, 5.0),
            eta: linspace_step(0.0, 1.0, 0.1),
            tradeoff_ranges: vec![5.0, 15.0],
            distance: vec![2.0, 3.0, 4.0, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0, 50.0, 75.0, 100.0],
            gamma_db: linspace_step(5.0, 20.0, 2.5),
            g_floor: linspace_step(20.0, 200.0, 20.0),
            fixed_gamma_db: 15.0,
            fixed_g_floor: 100.0,
            randomization_trials: 100,
        }
    }
}

/// A full simulation setup in SI units and radians.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub profile: Profile,
    pub cfg_tx: ArrayConfig,
    pub cfg_rx: ArrayConfig,
    /// Hz.
    pub carrier: f64,
    /// User positions; gains are drawn per channel realization.
    pub users: Vec<UserPlacement>,
    /// Target position in the transmit frame.
    pub target: PolarCoord,
    pub beta: Complex64,
    /// Watts.
    pub p_t: f64,
    /// Communication noise power σ_n², watts.
    pub comm_noise: f64,
    pub snapshots: usize,
    pub eta: f64,
    /// Radar SNR in dB for single-point runs and the η and distance sweeps.
    pub snr_r_db: f64,
    pub algorithm: DesignAlgorithm,
    pub music_grid: MusicGrid,
    pub music: MusicOptions,
    pub grids: SweepGrids,
    pub trials: usize,
    pub master_seed: u64,
}

/// Scatterers drawn when a user has none listed.
pub const DEFAULT_SCATTERERS: usize = 2;

impl Scenario {
    pub fn paper() -> Self {
        Self::for_profile(Profile::Paper, 0)
    }

    pub fn desk() -> Self {
        Self::for_profile(Profile::Desk, 0)
    }

    /// Defaults of a profile; scatterer positions come from `seed`.
    pub fn for_profile(profile: Profile, seed: u64) -> Self {
        let carrier = 30e9;
        let lambda = wavelength_from_carrier(carrier).expect("static carrier is valid");
        let n = profile.n_elements();
        let cfg = ArrayConfig::half_wavelength(n, lambda).expect("static array is valid");
        let users = [(5.0, 0.0), (15.0, 0.0)]
            .iter()
            .enumerate()
            .map(|(k, &(r, deg))| {
                let los = PolarCoord::from_degrees(r, deg).expect("static position is valid");
                UserPlacement::new(los, sample_scatterers(seed, k, DEFAULT_SCATTERERS))
            })
            .collect();
        Self {
            profile,
            cfg_tx: cfg,
            cfg_rx: cfg,
            carrier,
            users,
            target: PolarCoord::from_degrees(5.0, 60.0).expect("static position is valid"),
            beta: Complex64::new(1.0, 0.0),
            p_t: dbm_to_watts(30.0),
            comm_noise: dbm_to_watts(-90.0),
            snapshots: 64,
            eta: 0.5,
            snr_r_db: 15.0,
            algorithm: DesignAlgorithm::Ls,
            music_grid: MusicGrid::default_grid(),
            music: MusicOptions {
                coarse_factor: 10,
                refine: Refinement::Newton,
            },
            grids: SweepGrids::default(),
            trials: profile.trials(),
            master_seed: seed,
        }
    }

    pub fn wavelength(&self) -> f64 {
        self.cfg_tx.wavelength
    }

    pub fn truth_at(&self, target: &PolarCoord) -> Result<TargetTruth> {
        TargetTruth::new(self.beta, *target, &self.cfg_tx, &self.cfg_rx)
    }

    pub fn truth(&self) -> Result<TargetTruth> {
        self.truth_at(&self.target)
    }

    /// Radar noise power for an SNR in dB.
    pub fn radar_noise(&self, snr_db: f64) -> f64 {
        noise_for_snr_r(self.beta, self.snapshots, self.p_t, db_to_linear(snr_db))
    }

    /// Channel realization `index`: fresh gains on the fixed positions.
    pub fn realization(&self, index: u64) -> Realization {
        let mut rng = stream_rng(self.master_seed, Stream::Channel, index);
        let users: Vec<UserPlacement> = self
            .users
            .iter()
            .map(|u| sample_gains(&mut rng, u, self.wavelength()))
            .collect();
        Realization {
            near: channel_matrix(&self.cfg_tx, &users, Model::Near),
            far: channel_matrix(&self.cfg_tx, &users, Model::Far),
            users,
        }
    }

    /// Precoder of a pipeline for one realization and target position.
    pub fn design(&self, pipeline: Pipeline, real: &Realization, target: &PolarCoord, eta: f64) -> Result<Precoder> {
        let model = pipeline.design_model();
        let h = real.channel(model);
        let f_com = zf_precoder(h, self.p_t)?;
        let eta = match pipeline {
            Pipeline::NfbfComm | Pipeline::FfbfComm => return Ok(f_com),
            Pipeline::RadarOnly => 0.0,
            Pipeline::Nfbf | Pipeline::Ffbf if eta == 1.0 => return Ok(f_com),
            Pipeline::Nfbf | Pipeline::Ffbf => eta,
        };
        let f_rad = radar_precoder(&self.cfg_tx, target, self.p_t, model)?;
        match &self.algorithm {
            DesignAlgorithm::Ls => Ok(tradeoff_ls(&f_com, &f_rad, eta, self.p_t)?.precoder),
            DesignAlgorithm::Am(opts) => Ok(tradeoff_am(&f_com, &f_rad, eta, self.p_t, opts)?.design.precoder),
        }
    }

    /// Bound for a precoder against the near-field truth at `target`.
    pub fn crb(&self, f: &Precoder, target: &PolarCoord, noise_power: f64) -> Result<CrbReport> {
        let truth = self.truth_at(target)?;
        crb_for_covariance(
            &truth,
            &self.cfg_tx,
            &self.cfg_rx,
            &tx_covariance(f),
            self.snapshots,
            noise_power,
            self.p_t,
        )
    }

    fn metadata(&self, sweep: &str) -> Vec<(String, String)> {
        vec![
            ("sweep".into(), sweep.into()),
            ("master_seed".into(), self.master_seed.to_string()),
            ("profile".into(), self.profile.name().into()),
            ("n_tx".into(), self.cfg_tx.n_elements.to_string()),
            ("n_rx".into(), self.cfg_rx.n_elements.to_string()),
            ("carrier_hz".into(), self.carrier.to_string()),
            ("p_t_w".into(), self.p_t.to_string()),
            ("snapshots".into(), self.snapshots.to_string()),
            ("eta".into(), self.eta.to_string()),
            ("trials".into(), self.trials.to_string()),
            (
                "target_tx".into(),
                format!("{} m, {} rad", self.target.range, self.target.angle),
            ),
        ]
    }
}

/// Scatterer positions of user `k`, uniform over 1–30 m and ±60°.
pub fn sample_scatterers(seed: u64, k: usize, count: usize) -> Vec<PolarCoord> {
    let mut rng = stream_rng(seed, Stream::Scatterers, k as u64);
    let lim = PI / 3.0;
    (0..count)
        .map(|_| {
            let r = rng.random_range(1.0..30.0);
            let t = rng.random_range(-lim..lim);
            PolarCoord::new(r, t).expect("sampled inside the open half-plane")
        })
        .collect()
}

/// Gains and both channel matrices of one realization.
#[derive(Clone, Debug)]
pub struct Realization {
    pub users: Vec<UserPlacement>,
    pub near: ChannelMatrix,
    pub far: ChannelMatrix,
}

impl Realization {
    pub fn channel(&self, model: Model) -> &ChannelMatrix {
        match model {
            Model::Near => &self.near,
            Model::Far => &self.far,
        }
    }
}

/// One CSV column.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// One line of a figure: `y` against `x`, optionally restricted to rows
/// where column `filter.0` equals `filter.1`.
#[derive(Clone, Debug)]
pub struct Line {
    pub label: String,
    pub x: String,
    pub y: String,
    pub filter: Option<(String, f64)>,
}

#[derive(Clone, Debug)]
pub struct PlotSpec {
    pub file: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub lines: Vec<Line>,
}

/// Tabular sweep output. `axes` are the key columns, `series` the metrics;
/// all columns have one value per row.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub name: String,
    pub axes: Vec<Column>,
    pub series: Vec<Column>,
    /// Written as comment lines ahead of the header.
    pub metadata: Vec<(String, String)>,
    pub plots: Vec<PlotSpec>,
    pub runtime_secs: f64,
}

impl SweepResult {
    pub fn rows(&self) -> usize {
        self.axes.first().map_or(0, |c| c.values.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.axes
            .iter()
            .chain(&self.series)
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    fn check(&self) -> Result<()> {
        let n = self.rows();
        for c in self.axes.iter().chain(&self.series) {
            if c.values.len() != n {
                return Err(Error::Contract(format!(
                    "column {} has {} rows, expected {}",
                    c.name,
                    c.values.len(),
                    n
                )));
            }
        }
        Ok(())
    }

    /// CSV text: `# key: value` lines, a header row, then data. Values use
    /// the shortest round-trip representation. The runtime is left out so
    /// reruns compare equal byte for byte.
    pub fn to_csv(&self) -> Result<String> {
        self.check()?;
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let cols: Vec<&Column> = self.axes.iter().chain(&self.series).collect();
        let header: Vec<&str> = cols.iter().map(|c| c.name.as_str()).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for i in 0..self.rows() {
            let row: Vec<String> = cols.iter().map(|c| format!("{}", c.values[i])).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        Ok(out)
    }

    /// Writes `<dir>/<name>.csv` and returns its path.
    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.to_csv()?)?;
        Ok(path)
    }

    /// Renders every figure of the sweep into `dir`.
    pub fn write_plots(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.plots.iter().map(|p| render_plot(self, p, dir)).collect()
    }
}

fn col(name: impl Into<String>, values: Vec<f64>) -> Column {
    Column {
        name: name.into(),
        values,
    }
}

fn line(label: impl Into<String>, x: &str, y: impl Into<String>) -> Line {
    Line {
        label: label.into(),
        x: x.into(),
        y: y.into(),
        filter: None,
    }
}

fn render_plot(res: &SweepResult, spec: &PlotSpec, dir: &Path) -> Result<PathBuf> {
    use plotters::prelude::*;

    let path = dir.join(&spec.file);
    let mut data: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for l in &spec.lines {
        let xs = res
            .column(&l.x)
            .ok_or_else(|| Error::Output(format!("no column {}", l.x)))?;
        let ys = res
            .column(&l.y)
            .ok_or_else(|| Error::Output(format!("no column {}", l.y)))?;
        let keep: Vec<bool> = match &l.filter {
            None => vec![true; xs.len()],
            Some((c, v)) => res
                .column(c)
                .ok_or_else(|| Error::Output(format!("no column {c}")))?
                .iter()
                .map(|x| x == v)
                .collect(),
        };
        let pts = xs
            .iter()
            .zip(ys)
            .zip(keep)
            .filter(|((x, y), k)| *k && x.is_finite() && y.is_finite() && (!spec.log_y || **y > 0.0))
            .map(|((x, y), _)| (*x, *y))
            .collect();
        data.push((l.label.clone(), pts));
    }
    let all: Vec<(f64, f64)> = data.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), (x, y)| (a.min(*x), b.max(*x), c.min(*y), d.max(*y)),
    );
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.1, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if spec.log_y {
        y0 /= 1.5;
        y1 *= 1.5;
    } else {
        let pad = 0.05 * (y1 - y0).max(1e-12);
        y0 -= pad;
        y1 += pad;
    }
    let err = |e: &dyn std::fmt::Display| Error::Output(format!("{}: {e}", path.display()));
    let root = SVGBackend::new(&path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let colors = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];
    let mut builder = ChartBuilder::on(&root);
    builder
        .caption(&spec.title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70);
    macro_rules! draw {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart
                .configure_mesh()
                .x_desc(spec.x_label.as_str())
                .y_desc(spec.y_label.as_str())
                .draw()
                .map_err(|e| err(&e))?;
            for (i, (label, pts)) in data.iter().enumerate() {
                let c = colors[i % colors.len()];
                chart
                    .draw_series(LineSeries::new(pts.iter().copied(), c.stroke_width(2)))
                    .map_err(|e| err(&e))?
                    .label(label.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], c.stroke_width(2)));
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(|e| err(&e))?;
        }};
    }
    if spec.log_y {
        draw!(builder
            .build_cartesian_2d(x0..x1, (y0..y1).log_scale())
            .map_err(|e| err(&e))?);
    } else {
        draw!(builder.build_cartesian_2d(x0..x1, y0..y1).map_err(|e| err(&e))?);
    }
    root.present().map_err(|e| err(&e))?;
    drop(root);
    Ok(path)
}

const SENSING_PIPELINES: [Pipeline; 3] = [Pipeline::Nfbf, Pipeline::Ffbf, Pipeline::RadarOnly];

/// MUSIC RMSE and root CRB of range and angle against radar SNR.
pub fn run_estimation_sweep(sc: &Scenario) -> Result<SweepResult> {
    let start = Instant::now();
    let real = sc.realization(0);
    let truth = sc.truth()?;
    let designs: Vec<Precoder> = SENSING_PIPELINES
        .iter()
        .map(|p| sc.design(*p, &real, &sc.target, sc.eta))
        .collect::<Result<_>>()?;
    let snrs = &sc.grids.snr_r_db;
    let k = designs[0].n_streams();

    // Common random numbers: trial t uses the same symbols and unit noise at
    // every SNR and for every pipeline.
    let per_trial: Vec<Vec<Vec<Option<(f64, f64)>>>> = (0..sc.trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<Vec<Option<(f64, f64)>>>> {
            let mut rng = stream_rng(sc.master_seed, Stream::Estimation, t);
            let s = synthesize_symbols(&mut rng, k, sc.snapshots);
            let z = complex_noise(&mut rng, sc.cfg_rx.n_elements, sc.snapshots, 1.0);
            let mut out = Vec::with_capacity(snrs.len());
            let mean: Vec<CMatrix> = designs
                .iter()
                .map(|f| echo_mean(f, &s, &truth, &sc.cfg_tx, &sc.cfg_rx))
                .collect::<Result<_>>()?;
            for snr in snrs {
                let sigma2 = sc.radar_noise(*snr);
                let y_noise = z.scale(sigma2.sqrt());
                let row = mean
                    .iter()
                    .map(|m| {
                        let echo = EchoBatch {
                            y: m + &y_noise,
                            noise_power: sigma2,
                            snapshots: sc.snapshots,
                        };
                        let r_y = sample_covariance(&echo);
                        music_search(&r_y, &sc.music_grid, &sc.cfg_tx, &sc.cfg_rx, &sc.music)
                            .ok()
                            .map(|e| (e.tx.range, e.tx.angle))
                    })
                    .collect();
                out.push(row);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut series = Vec::new();
    for (pi, (p, f)) in SENSING_PIPELINES.iter().zip(&designs).enumerate() {
        let mut rmse_r = Vec::new();
        let mut rmse_t = Vec::new();
        let mut rcrb_r = Vec::new();
        let mut rcrb_t = Vec::new();
        let mut fails = Vec::new();
        for (si, snr) in snrs.iter().enumerate() {
            let est: Vec<(f64, f64)> = per_trial.iter().filter_map(|tr| tr[si][pi]).collect();
            let rs: Vec<f64> = est.iter().map(|e| e.0).collect();
            let ts: Vec<f64> = est.iter().map(|e| e.1).collect();
            rmse_r.push(rmse(&rs, sc.target.range));
            rmse_t.push(rmse(&ts, sc.target.angle));
            fails.push((sc.trials - est.len()) as f64);
            let rep = sc.crb(f, &sc.target, sc.radar_noise(*snr))?;
            rcrb_r.push(rep.rcrb_r);
            rcrb_t.push(rep.rcrb_theta);
        }
        let n = p.name();
        series.push(col(format!("{n}_rmse_r_m"), rmse_r));
        series.push(col(format!("{n}_rcrb_r_m"), rcrb_r));
        series.push(col(format!("{n}_rmse_theta_rad"), rmse_t));
        series.push(col(format!("{n}_rcrb_theta_rad"), rcrb_t));
        series.push(col(format!("{n}_failures"), fails));
    }
    let mut metadata = sc.metadata("estimation");
    metadata.push((
        "axis snr_r_db".into(),
        "radar SNR |beta|^2 L P_t / sigma_w^2 in dB".into(),
    ));
    metadata.push((
        "metrics".into(),
        "RMSE of MUSIC estimates and root CRB in the transmit frame; failures = trials without a peak".into(),
    ));
    let plots = ["r_m", "theta_rad"]
        .iter()
        .map(|m| PlotSpec {
            file: format!("estimation_{}.svg", m.split('_').next().unwrap()),
            title: format!("RMSE and RCRB of {}", if m.starts_with('r') { "range" } else { "angle" }),
            x_label: "SNR_r [dB]".into(),
            y_label: if m.starts_with('r') { "m".into() } else { "rad".into() },
            log_y: true,
            lines: SENSING_PIPELINES
                .iter()
                .flat_map(|p| {
                    let n = p.name();
                    [
                        line(format!("{n} RMSE"), "snr_r_db", format!("{n}_rmse_{m}")),
                        line(format!("{n} RCRB"), "snr_r_db", format!("{n}_rcrb_{m}")),
                    ]
                })
                .collect(),
        })
        .collect();
    Ok(SweepResult {
        name: "estimation".into(),
        axes: vec![col("snr_r_db", snrs.clone())],
        series,
        metadata,
        plots,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Detection probability against radar SNR at the analytic threshold.
pub fn run_detection_sweep(sc: &Scenario) -> Result<SweepResult> {
    let start = Instant::now();
    let real = sc.realization(0);
    let truth = sc.truth()?;
    let designs: Vec<Precoder> = SENSING_PIPELINES
        .iter()
        .map(|p| sc.design(*p, &real, &sc.target, sc.eta))
        .collect::<Result<_>>()?;
    let threshold = threshold_analytic(sc.grids.p_fa, sc.snapshots)?;
    let snrs = &sc.grids.detection_snr_r_db;
    let k = designs[0].n_streams();
    let per_trial: Vec<(Vec<Vec<bool>>, bool)> = (0..sc.trials as u64)
        .into_par_iter()
        .map(|t| -> Result<(Vec<Vec<bool>>, bool)> {
            let mut rng = stream_rng(sc.master_seed, Stream::Detection, t);
            let s = synthesize_symbols(&mut rng, k, sc.snapshots);
            let z = complex_noise(&mut rng, sc.cfg_rx.n_elements, sc.snapshots, 1.0);
            let noise_only = EchoBatch {
                y: z.clone(),
                noise_power: 1.0,
                snapshots: sc.snapshots,
            };
            let false_alarm = detection_statistic(&noise_only, &sc.cfg_rx, &truth.rx)? > threshold;
            let mean: Vec<CMatrix> = designs
                .iter()
                .map(|f| echo_mean(f, &s, &truth, &sc.cfg_tx, &sc.cfg_rx))
                .collect::<Result<_>>()?;
            let mut out = Vec::with_capacity(snrs.len());
            for snr in snrs {
                let sigma2 = sc.radar_noise(*snr);
                let y_noise = z.scale(sigma2.sqrt());
                let row = mean
                    .iter()
                    .map(|m| {
                        let echo = EchoBatch {
                            y: m + &y_noise,
                            noise_power: sigma2,
                            snapshots: sc.snapshots,
                        };
                        detection_statistic(&echo, &sc.cfg_rx, &truth.rx).map(|v| v > threshold)
                    })
                    .collect::<Result<_>>()?;
                out.push(row);
            }
            Ok((out, false_alarm))
        })
        .collect::<Result<_>>()?;
    let trials = sc.trials as f64;
    let mut series = Vec::new();
    for (pi, p) in SENSING_PIPELINES.iter().enumerate() {
        let pd = (0..snrs.len())
            .map(|si| per_trial.iter().filter(|(d, _)| d[si][pi]).count() as f64 / trials)
            .collect();
        series.push(col(format!("{}_pd", p.name()), pd));
    }
    let fa = per_trial.iter().filter(|(_, f)| *f).count() as f64 / trials;
    series.push(col("pfa_empirical", vec![fa; snrs.len()]));
    let mut metadata = sc.metadata("detection");
    metadata.push((
        "axis snr_r_db".into(),
        "radar SNR |beta|^2 L P_t / sigma_w^2 in dB".into(),
    ));
    metadata.push(("p_fa".into(), sc.grids.p_fa.to_string()));
    metadata.push(("threshold".into(), threshold.to_string()));
    let plots = vec![PlotSpec {
        file: "detection.svg".into(),
        title: "Detection probability".into(),
        x_label: "SNR_r [dB]".into(),
        y_label: "P_D".into(),
        log_y: false,
        lines: SENSING_PIPELINES
            .iter()
            .map(|p| line(p.name(), "snr_r_db", format!("{}_pd", p.name())))
            .collect(),
    }];
    Ok(SweepResult {
        name: "detection".into(),
        axes: vec![col("snr_r_db", snrs.clone())],
        series,
        metadata,
        plots,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

const RATE_PIPELINES: [Pipeline; 4] = [Pipeline::Nfbf, Pipeline::Ffbf, Pipeline::NfbfComm, Pipeline::FfbfComm];

/// Sum rate and per-user SINR against transmit SNR, averaged over channel
/// realizations.
pub fn run_rate_sweep(sc: &Scenario) -> Result<SweepResult> {
    let start = Instant::now();
    let snrs = &sc.grids.tx_snr_db;
    let k = sc.users.len();
    // [trial][pipeline][snr] -> (rate, per-user sinr)
    let per_trial: Vec<Vec<Vec<(f64, Vec<f64>)>>> = (0..sc.trials as u64)
        .into_par_iter()
        .map(|t| -> Result<_> {
            let real = sc.realization(t);
            RATE_PIPELINES
                .iter()
                .map(|p| {
                    let f = sc.design(*p, &real, &sc.target, sc.eta)?;
                    snrs.iter()
                        .map(|snr| {
                            let noise = sc.p_t / db_to_linear(*snr);
                            let rate = sum_rate(&real.near, &f.entries, noise)?;
                            let sinr = (0..k)
                                .map(|u| user_sinr(&real.near, &f.entries, noise, u))
                                .collect::<Result<Vec<f64>>>()?;
                            Ok((rate, sinr))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let trials = sc.trials as f64;
    let mut series = Vec::new();
    for (pi, p) in RATE_PIPELINES.iter().enumerate() {
        let n = p.name();
        let rate = (0..snrs.len())
            .map(|si| per_trial.iter().map(|tr| tr[pi][si].0).sum::<f64>() / trials)
            .collect();
        series.push(col(format!("{n}_rate_bps_hz"), rate));
        for u in 0..k {
            let s = (0..snrs.len())
                .map(|si| linear_to_db(per_trial.iter().map(|tr| tr[pi][si].1[u]).sum::<f64>() / trials))
                .collect();
            series.push(col(format!("{n}_sinr_user{}_db", u + 1), s));
        }
    }
    let mut metadata = sc.metadata("rate");
    metadata.push(("axis tx_snr_db".into(), "transmit SNR P_t / sigma_n^2 in dB".into()));
    metadata.push((
        "metrics".into(),
        "sum rate in bit/s/Hz and mean per-user SINR in dB over channel realizations, scored on the near-field channel".into(),
    ));
    let mut plots = vec![PlotSpec {
        file: "rate.svg".into(),
        title: "Sum rate".into(),
        x_label: "P_t / sigma_n^2 [dB]".into(),
        y_label: "bit/s/Hz".into(),
        log_y: false,
        lines: RATE_PIPELINES
            .iter()
            .map(|p| line(p.name(), "tx_snr_db", format!("{}_rate_bps_hz", p.name())))
            .collect(),
    }];
    plots.push(PlotSpec {
        file: "rate_sinr.svg".into(),
        title: "Per-user SINR".into(),
        x_label: "P_t / sigma_n^2 [dB]".into(),
        y_label: "SINR [dB]".into(),
        log_y: false,
        lines: [Pipeline::Nfbf, Pipeline::Ffbf]
            .iter()
            .flat_map(|p| {
                (0..k).map(move |u| {
                    line(
                        format!("{} user {}", p.name(), u + 1),
                        "tx_snr_db",
                        format!("{}_sinr_user{}_db", p.name(), u + 1),
                    )
                })
            })
            .collect(),
    });
    Ok(SweepResult {
        name: "rate".into(),
        axes: vec![col("tx_snr_db", snrs.clone())],
        series,
        metadata,
        plots,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Rate and root CRB over the η grid for each target range.
pub fn run_tradeoff_sweep(sc: &Scenario) -> Result<SweepResult> {
    let start = Instant::now();
    let real = sc.realization(0);
    let noise_r = sc.radar_noise(sc.snr_r_db);
    let points: Vec<(f64, f64)> = sc
        .grids
        .tradeoff_ranges
        .iter()
        .flat_map(|r| sc.grids.eta.iter().map(move |e| (*r, *e)))
        .collect();
    let pipes = [Pipeline::Nfbf, Pipeline::Ffbf];
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&(r, eta)| -> Result<Vec<f64>> {
            let target = PolarCoord::new(r, sc.target.angle)?;
            let mut v = Vec::new();
            for p in pipes {
                let f = sc.design(p, &real, &target, eta)?;
                let rate = sum_rate(&real.near, &f.entries, sc.comm_noise)?;
                let rep = sc.crb(&f, &target, noise_r)?;
                v.extend([rate, rep.rcrb_r, rep.rcrb_theta]);
            }
            for p in [Pipeline::NfbfComm, Pipeline::FfbfComm] {
                let f = sc.design(p, &real, &target, eta)?;
                v.push(sum_rate(&real.near, &f.entries, sc.comm_noise)?);
            }
            let f = sc.design(Pipeline::RadarOnly, &real, &target, eta)?;
            let rep = sc.crb(&f, &target, noise_r)?;
            v.extend([rep.rcrb_r, rep.rcrb_theta]);
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let names = [
        "nfbf_rate_bps_hz",
        "nfbf_rcrb_r_m",
        "nfbf_rcrb_theta_rad",
        "ffbf_rate_bps_hz",
        "ffbf_rcrb_r_m",
        "ffbf_rcrb_theta_rad",
        "nfbf_comm_rate_bps_hz",
        "ffbf_comm_rate_bps_hz",
        "radar_only_rcrb_r_m",
        "radar_only_rcrb_theta_rad",
    ];
    let series = names
        .iter()
        .enumerate()
        .map(|(i, n)| col(*n, rows.iter().map(|r| r[i]).collect()))
        .collect();
    let mut metadata = sc.metadata("tradeoff");
    metadata.push(("axes".into(), "target range in m (angle fixed), weighting factor eta".into()));
    metadata.push(("snr_r_db".into(), sc.snr_r_db.to_string()));
    metadata.push(("comm_noise_w".into(), sc.comm_noise.to_string()));
    let mut plots = Vec::new();
    for (m, unit) in [("r_m", "m"), ("theta_rad", "rad")] {
        let mut lines = Vec::new();
        for r in &sc.grids.tradeoff_ranges {
            for p in pipes {
                let n = p.name();
                lines.push(Line {
                    label: format!("{n} {r} m"),
                    x: format!("{n}_rate_bps_hz"),
                    y: format!("{n}_rcrb_{m}"),
                    filter: Some(("target_range_m".into(), *r)),
                });
            }
        }
        plots.push(PlotSpec {
            file: format!("tradeoff_{}.svg", m.split('_').next().unwrap()),
            title: "RCRB against sum rate over eta".into(),
            x_label: "sum rate [bit/s/Hz]".into(),
            y_label: format!("RCRB [{unit}]"),
            log_y: true,
            lines,
        });
    }
    Ok(SweepResult {
        name: "tradeoff".into(),
        axes: vec![
            col("target_range_m", points.iter().map(|p| p.0).collect()),
            col("eta", points.iter().map(|p| p.1).collect()),
        ],
        series,
        metadata,
        plots,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// CRB of both design pipelines against target range at a fixed angle.
pub fn run_distance_sweep(sc: &Scenario) -> Result<SweepResult> {
    let start = Instant::now();
    let real = sc.realization(0);
    let noise_r = sc.radar_noise(sc.snr_r_db);
    let pipes = [Pipeline::Nfbf, Pipeline::Ffbf];
    let rows: Vec<Vec<f64>> = sc
        .grids
        .distance
        .par_iter()
        .map(|&r| -> Result<Vec<f64>> {
            let target = PolarCoord::new(r, sc.target.angle)?;
            let mut v = Vec::new();
            for p in pipes {
                let f = sc.design(p, &real, &target, sc.eta)?;
                let rep = sc.crb(&f, &target, noise_r)?;
                v.extend([rep.crb_r, rep.crb_theta]);
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let names = ["nfbf_crb_r_m2", "nfbf_crb_theta_rad2", "ffbf_crb_r_m2", "ffbf_crb_theta_rad2"];
    let series = names
        .iter()
        .enumerate()
        .map(|(i, n)| col(*n, rows.iter().map(|r| r[i]).collect()))
        .collect();
    let mut metadata = sc.metadata("distance");
    metadata.push(("axis target_range_m".into(), "target range in the transmit frame, angle fixed".into()));
    metadata.push(("snr_r_db".into(), sc.snr_r_db.to_string()));
    let plots = [("r_m2", "m^2"), ("theta_rad2", "rad^2")]
        .iter()
        .map(|(m, unit)| PlotSpec {
            file: format!("distance_{}.svg", m.split('_').next().unwrap()),
            title: "CRB against target distance".into(),
            x_label: "target range [m]".into(),
            y_label: format!("CRB [{unit}]"),
            log_y: true,
            lines: pipes
                .iter()
                .map(|p| line(p.name(), "target_range_m", format!("{}_crb_{m}", p.name())))
                .collect(),
        })
        .collect();
    Ok(SweepResult {
        name: "distance".into(),
        axes: vec![col("target_range_m", sc.grids.distance.clone())],
        series,
        metadata,
        plots,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Outcome of both power-minimization pipelines at one `(Γ, Ĝ)` point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerPoint {
    /// Relaxed optimum on the near model.
    pub nfbf_relaxed: f64,
    /// Recovered rank-1 precoder power on the near model.
    pub nfbf: f64,
    /// Far-model directions with the optimal near-truth allocation; NaN when
    /// they cannot meet the constraints.
    pub ffbf: f64,
}

/// Solves both pipelines for one threshold pair. Infeasible outcomes are
/// NaN.
pub fn power_point(sc: &Scenario, real: &Realization, gamma_db: f64, g_floor: f64, index: u64) -> Result<PowerPoint> {
    let qos = QosSpec {
        sinr_thresholds: vec![db_to_linear(gamma_db); sc.users.len()],
        target_power_floor: g_floor,
        noise_power: sc.comm_noise,
    };
    let a_near = near_focusing(&sc.cfg_tx, &sc.target);
    let a_far = far_steering(&sc.cfg_tx, sc.target.angle);
    let near = build_problem(&real.near, &a_near, &qos)?;
    let far = build_problem(&real.far, &a_far, &qos)?;
    let opts = SdpOptions::default();
    let trials = sc.grids.randomization_trials;
    let mut rng = stream_rng(sc.master_seed, Stream::Randomization, 2 * index);
    let n_sol = minimize_power(&near, &opts, trials, &mut rng)?;
    let (nfbf_relaxed, nfbf) = if n_sol.status == SdpStatus::Infeasible {
        (f64::NAN, f64::NAN)
    } else {
        (
            n_sol.total_power,
            n_sol.recovered.as_ref().map_or(f64::NAN, |p| p.power()),
        )
    };
    let mut rng = stream_rng(sc.master_seed, Stream::Randomization, 2 * index + 1);
    let f_sol = minimize_power(&far, &opts, trials, &mut rng)?;
    let ffbf = match (&f_sol.status, &f_sol.recovered) {
        (SdpStatus::Infeasible, _) | (_, None) => f64::NAN,
        (_, Some(p)) => {
            let dirs: Vec<CMatrix> = (0..p.entries.ncols())
                .map(|j| {
                    let c = p.entries.columns(j, 1).into_owned();
                    let n = c.norm();
                    c.unscale(n)
                })
                .collect();
            allocate_power(&near, &dirs).map_or(f64::NAN, |w| w.iter().sum())
        }
    };
    Ok(PowerPoint { nfbf_relaxed, nfbf, ffbf })
}

/// Minimized transmit power against the SINR threshold (target floor
/// fixed) and against the target floor (threshold fixed).
pub fn run_power_sweep(sc: &Scenario) -> Result<SweepResult> {
    let start = Instant::now();
    let real = sc.realization(0);
    let g = &sc.grids;
    let points: Vec<(f64, f64)> = g
        .gamma_db
        .iter()
        .map(|x| (*x, g.fixed_g_floor))
        .chain(g.g_floor.iter().map(|x| (g.fixed_gamma_db, *x)))
        .collect();
    let out: Vec<PowerPoint> = points
        .par_iter()
        .enumerate()
        .map(|(i, &(gam, gf))| power_point(sc, &real, gam, gf, i as u64))
        .collect::<Result<_>>()?;
    let n_gamma = g.gamma_db.len();
    let part: Vec<f64> = (0..points.len()).map(|i| if i < n_gamma { 0.0 } else { 1.0 }).collect();
    let w = |f: fn(&PowerPoint) -> f64| out.iter().map(f).collect::<Vec<f64>>();
    let series = vec![
        col("nfbf_relaxed_w", w(|p| p.nfbf_relaxed)),
        col("nfbf_power_w", w(|p| p.nfbf)),
        col("ffbf_power_w", w(|p| p.ffbf)),
    ];
    let mut metadata = sc.metadata("power");
    metadata.push((
        "axes".into(),
        "part 0 sweeps gamma_db at fixed g_floor, part 1 sweeps g_floor at fixed gamma_db; gamma is the per-user SINR threshold in dB, g_floor the target gain floor".into(),
    ));
    metadata.push(("comm_noise_w".into(), sc.comm_noise.to_string()));
    metadata.push(("gaps".into(), "NaN marks an infeasible point".into()));
    let plots = vec![
        PlotSpec {
            file: "power_gamma.svg".into(),
            title: format!("Minimum power, target floor {}", g.fixed_g_floor),
            x_label: "SINR threshold [dB]".into(),
            y_label: "transmit power [W]".into(),
            log_y: false,
            lines: ["nfbf", "ffbf"]
                .iter()
                .map(|n| Line {
                    label: n.to_string(),
                    x: "gamma_db".into(),
                    y: format!("{n}_power_w"),
                    filter: Some(("part".into(), 0.0)),
                })
                .collect(),
        },
        PlotSpec {
            file: "power_floor.svg".into(),
            title: format!("Minimum power, SINR threshold {} dB", g.fixed_gamma_db),
            x_label: "target gain floor".into(),
            y_label: "transmit power [W]".into(),
            log_y: false,
            lines: ["nfbf", "ffbf"]
                .iter()
                .map(|n| Line {
                    label: n.to_string(),
                    x: "g_floor".into(),
                    y: format!("{n}_power_w"),
                    filter: Some(("part".into(), 1.0)),
                })
                .collect(),
        },
    ];
    Ok(SweepResult {
        name: "power".into(),
        axes: vec![
            col("part", part),
            col("gamma_db", points.iter().map(|p| p.0).collect()),
            col("g_floor", points.iter().map(|p| p.1).collect()),
        ],
        series,
        metadata,
        plots,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Names accepted by [`run_sweep`].
pub const SWEEPS: [&str; 6] = ["estimation", "detection", "rate", "tradeoff", "distance", "power"];

pub fn run_sweep(sc: &Scenario, name: &str) -> Result<SweepResult> {
    match name {
        "estimation" => run_estimation_sweep(sc),
        "detection" => run_detection_sweep(sc),
        "rate" => run_rate_sweep(sc),
        "tradeoff" => run_tradeoff_sweep(sc),
        "distance" => run_distance_sweep(sc),
        "power" => run_power_sweep(sc),
        other => Err(Error::UnknownCommand(format!("sweep {other}"))),
    }
}
