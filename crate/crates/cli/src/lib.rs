//! Configuration-driven experiment runner: builds initial data, dispatches to
//! the solver pipelines, and emits plot-ready CSV/JSON artifacts plus a
//! deterministic manifest.
//!
// Negated comparisons like `!(dt > 0.0)` are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Determinism contract: identical (config, seed) produce byte-identical
//! artifacts. All randomness comes from the explicit seed, reductions run in
//! a fixed order, and wall-clock timing is kept out of the manifest (it goes
//! to a separate run_stats.json).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use novikov_core::camassa_holm::{ch_evolve, ch_evolve_tangent, ch_verify_growth};
use novikov_core::characteristic::{peakon_to_characteristic, to_characteristic, CharState};
use novikov_core::energy::{
    char_energy, char_energy_total, concentration_report, energy_e, energy_f,
};
use novikov_core::grid::{GridFunction, GridSpec};
use novikov_core::peakon::{
    detect_crossing, integrate_peakons, peakon_field, peakon_field_smoothed, PeakonState,
};
use novikov_core::rng::SplitMix64;
use novikov_core::semilinear::{
    detect_singularity, evolve, picard_solve, CharTrajectory, EventKind, PICARD_TOL,
    SINGULARITY_EPS,
};
use novikov_core::smooth::smooth_evolve;
use novikov_core::tangent::{
    d_star_upper_bound, finsler_cost, geodesic_upper_bound, kr_discrepancy, sobolev_comparison,
    weighted_l1_distance, TangentFrame, DEFAULT_THETA_SAMPLES,
};
use novikov_core::Error as CoreError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_NO_COLLISION: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Peakons,
    Semilinear,
    Smooth,
    Metric,
    Ch,
    Concentration,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakonPair {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum InitialData {
    Peakons {
        pairs: Vec<PeakonPair>,
        /// Gaussian mollification width of the peaks; 0 keeps the exact
        /// kinked profile (slope jumps tracked as interfaces).
        #[serde(default)]
        smoothing: f64,
    },
    Gaussian {
        amp: f64,
        width: f64,
        center: f64,
    },
    Sum {
        terms: Vec<InitialData>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridConfig {
    pub l: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { l: 20.0, n: 4096 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimeConfig {
    pub t_end: f64,
    pub dt: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t_end: 1.0,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Rk4,
    Picard,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub initial_data: InitialData,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_solver() -> SolverKind {
    SolverKind::Rk4
}

#[derive(Debug)]
pub enum RunError {
    InvalidConfig(String),
    Blowup { t: f64 },
    NoCollision,
    Io(std::io::Error),
    Solver(CoreError),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            RunError::Blowup { t } => write!(f, "blowup at t = {t}"),
            RunError::NoCollision => write!(f, "no collision detected"),
            RunError::Io(e) => write!(f, "io error: {e}"),
            RunError::Solver(e) => write!(f, "solver error: {e}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::InvalidConfig(_) => EXIT_INVALID_CONFIG,
            RunError::Blowup { .. } => EXIT_BLOWUP,
            RunError::NoCollision => EXIT_NO_COLLISION,
            RunError::Io(_) | RunError::Solver(_) => EXIT_FAILURE,
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::PeakonBlowup { t, .. } => RunError::Blowup { t },
            CoreError::CharBlowup { t, .. } => RunError::Blowup { t },
            other => RunError::Solver(other),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self, RunError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(json).map_err(|e| RunError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let n = self.grid.n;
        if n < 256 || !n.is_power_of_two() {
            return Err(RunError::InvalidConfig(format!(
                "grid.n must be a power of two >= 256, got {n}"
            )));
        }
        if !(self.grid.l > 0.0) {
            return Err(RunError::InvalidConfig("grid.l must be positive".into()));
        }
        if !(self.time.dt > 0.0) {
            return Err(RunError::InvalidConfig("time.dt must be positive".into()));
        }
        if !(self.time.t_end > 0.0) {
            return Err(RunError::InvalidConfig("time.t_end must be positive".into()));
        }
        validate_initial(&self.initial_data)?;
        Ok(())
    }
}

fn validate_initial(data: &InitialData) -> Result<(), RunError> {
    match data {
        InitialData::Peakons { pairs, smoothing } => {
            if pairs.is_empty() {
                return Err(RunError::InvalidConfig("empty peakon list".into()));
            }
            if pairs.windows(2).any(|w| w[1].q <= w[0].q) {
                return Err(RunError::InvalidConfig(
                    "peakon positions must be strictly increasing".into(),
                ));
            }
            if *smoothing < 0.0 {
                return Err(RunError::InvalidConfig("smoothing must be >= 0".into()));
            }
            Ok(())
        }
        InitialData::Gaussian { width, .. } => {
            if !(*width > 0.0) {
                return Err(RunError::InvalidConfig("gaussian width must be positive".into()));
            }
            Ok(())
        }
        InitialData::Sum { terms } => {
            if terms.is_empty() {
                return Err(RunError::InvalidConfig("empty sum".into()));
            }
            terms.iter().try_for_each(validate_initial)
        }
    }
}

fn sample_initial(data: &InitialData, spec: GridSpec) -> Result<GridFunction, RunError> {
    match data {
        InitialData::Peakons { pairs, smoothing } => {
            let state = peakon_state(pairs)?;
            Ok(if *smoothing > 0.0 {
                peakon_field_smoothed(&state, spec, *smoothing)
            } else {
                peakon_field(&state, spec)
            })
        }
        InitialData::Gaussian { amp, width, center } => {
            GridFunction::from_fn(spec, |x| amp * (-((x - center) / width).powi(2)).exp())
                .map_err(RunError::from)
        }
        InitialData::Sum { terms } => {
            let mut acc = GridFunction::zeros(spec);
            for term in terms {
                let g = sample_initial(term, spec)?;
                acc = acc.zip_with(&g, |a, b| a + b)?;
            }
            Ok(acc)
        }
    }
}

fn peakon_state(pairs: &[PeakonPair]) -> Result<PeakonState, RunError> {
    PeakonState::new(
        0.0,
        pairs.iter().map(|p| p.p).collect(),
        pairs.iter().map(|p| p.q).collect(),
    )
    .map_err(RunError::from)
}

/// Initial characteristic state: exact peakon data goes through the
/// interface-tracking transform, everything else through the gridded one.
fn initial_char_state(cfg: &ExperimentConfig) -> Result<CharState, RunError> {
    match &cfg.initial_data {
        InitialData::Peakons { pairs, smoothing } if *smoothing == 0.0 => {
            let state = peakon_state(pairs)?;
            peakon_to_characteristic(&state, cfg.grid.l, cfg.grid.n).map_err(RunError::from)
        }
        other => {
            let spec = GridSpec::symmetric(cfg.grid.l, cfg.grid.n);
            let u0 = sample_initial(other, spec)?;
            to_characteristic(&u0).map_err(RunError::from)
        }
    }
}

#[derive(Debug, Serialize)]
struct ManifestEvent {
    t: f64,
    #[serde(rename = "Y")]
    y: f64,
    kind: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    versions: Versions,
    times: Vec<f64>,
    events: Vec<ManifestEvent>,
    files: Vec<String>,
    content_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Debug, Serialize)]
struct Versions {
    package: &'static str,
    version: &'static str,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Everything a finished run reports back.
#[derive(Debug)]
pub struct RunSummary {
    pub files: Vec<String>,
    pub events: Vec<ManifestEventPublic>,
}

#[derive(Debug, Clone)]
pub struct ManifestEventPublic {
    pub t: f64,
    pub y: f64,
    pub kind: String,
}

struct ArtifactSink {
    dir: PathBuf,
    files: Vec<String>,
}

impl ArtifactSink {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactSink {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), RunError> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut json = serde_json::to_vec_pretty(value)
            .map_err(|e| RunError::InvalidConfig(e.to_string()))?;
        json.push(b'\n');
        self.write(name, &json)
    }
}

/// Run the configured experiment, writing artifacts under `out_override`
/// (or the config's output_dir).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_override: Option<&Path>,
) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let out = out_override.unwrap_or(&cfg.output_dir).to_path_buf();
    let mut sink = ArtifactSink::new(&out)?;

    let outcome = match cfg.command {
        Command::Peakons => run_peakons(cfg, &mut sink),
        Command::Smooth => run_smooth(cfg, &mut sink),
        Command::Semilinear => run_semilinear(cfg, &mut sink, false),
        Command::Concentration => run_semilinear(cfg, &mut sink, true),
        Command::Metric => run_metric(cfg, &mut sink),
        Command::Ch => run_ch(cfg, &mut sink),
    };

    let (times, events, note) = match outcome {
        Ok(ok) => (ok.times, ok.events, None),
        Err(RunError::Blowup { t }) => {
            // partial artifacts already written by the pipeline
            (Vec::new(), Vec::new(), Some(format!("blowup at t = {t}")))
        }
        Err(other) => return Err(other),
    };

    let config_json =
        serde_json::to_vec(cfg).map_err(|e| RunError::InvalidConfig(e.to_string()))?;
    let mut files = sink.files.clone();
    files.sort();
    let manifest = Manifest {
        config: cfg,
        versions: Versions {
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        times,
        events: events
            .iter()
            .map(|e| ManifestEvent {
                t: e.t,
                y: e.y,
                kind: e.kind.clone(),
            })
            .collect(),
        files: files.clone(),
        content_hash: format!("{:016x}", fnv1a(&config_json)),
        note: note.clone(),
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| RunError::InvalidConfig(e.to_string()))?;
    manifest_bytes.push(b'\n');
    fs::write(out.join("manifest.json"), &manifest_bytes)?;
    // wall-clock stats live outside the deterministic artifact set
    let stats = format!(
        "{{\n  \"wall_clock_seconds\": {}\n}}\n",
        started.elapsed().as_secs_f64()
    );
    fs::write(out.join("run_stats.json"), stats)?;

    match note {
        Some(n) => Err(RunError::Blowup {
            t: n.rsplit(' ')
                .next()
                .and_then(|s| s.parse().ok())
                .unwrap_or(f64::NAN),
        }),
        None => Ok(RunSummary {
            files,
            events: events.to_vec(),
        }),
    }
}

struct PipelineOutcome {
    times: Vec<f64>,
    events: Vec<ManifestEventPublic>,
}

fn run_peakons(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<PipelineOutcome, RunError> {
    let InitialData::Peakons { pairs, .. } = &cfg.initial_data else {
        return Err(RunError::InvalidConfig(
            "peakons command needs peakon initial data".into(),
        ));
    };
    let s0 = peakon_state(pairs)?;
    let traj = integrate_peakons(&s0, cfg.time.t_end, cfg.time.dt)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    sink.write("trajectory.csv", &csv)?;
    let mut events = Vec::new();
    if let Some((t, q)) = detect_crossing(&traj) {
        events.push(ManifestEventPublic {
            t,
            y: q,
            kind: "crossing-extrapolated".into(),
        });
    }
    Ok(PipelineOutcome {
        times: traj.states.iter().map(|s| s.t).collect(),
        events,
    })
}

fn run_smooth(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<PipelineOutcome, RunError> {
    let spec = GridSpec::symmetric(cfg.grid.l, cfg.grid.n);
    let u0 = sample_initial(&cfg.initial_data, spec)?;
    let traj = smooth_evolve(&u0, cfg.time.t_end, cfg.time.dt)?;
    let stride = (traj.len() / 512).max(1);
    let mut series = String::from("t,E,F\n");
    let mut times = Vec::new();
    for (k, u) in traj.iter().enumerate().step_by(stride) {
        let t = k as f64 * cfg.time.dt;
        series.push_str(&format!("{},{},{}\n", t, energy_e(u)?, energy_f(u)?));
        times.push(t);
    }
    sink.write("series.csv", series.as_bytes())?;
    let mut final_csv = Vec::new();
    traj.last().unwrap().write_csv(&mut final_csv)?;
    sink.write("final_state.csv", &final_csv)?;

    let e0 = energy_e(&u0)?;
    let f0 = energy_f(&u0)?;
    let e1 = energy_e(traj.last().unwrap())?;
    let f1 = energy_f(traj.last().unwrap())?;
    #[derive(Serialize)]
    struct SmoothReport {
        e_initial: f64,
        e_final: f64,
        e_relative_drift: f64,
        f_initial: f64,
        f_final: f64,
        f_relative_drift: f64,
    }
    sink.write_json(
        "report.json",
        &SmoothReport {
            e_initial: e0,
            e_final: e1,
            e_relative_drift: ((e1 - e0) / e0).abs(),
            f_initial: f0,
            f_final: f1,
            f_relative_drift: ((f1 - f0) / f0).abs(),
        },
    )?;
    Ok(PipelineOutcome {
        times,
        events: Vec::new(),
    })
}

fn store_stride(dt: f64) -> usize {
    ((0.01 / dt).round() as usize).max(1)
}

fn write_char_slices(
    sink: &mut ArtifactSink,
    states: &[CharState],
) -> Result<Vec<f64>, RunError> {
    let mut times = Vec::with_capacity(states.len());
    for (k, st) in states.iter().enumerate() {
        let mut csv = Vec::new();
        st.write_csv(&mut csv)?;
        sink.write(&format!("slice_{k:04}.csv"), &csv)?;
        times.push(st.t);
    }
    Ok(times)
}

fn run_semilinear(
    cfg: &ExperimentConfig,
    sink: &mut ArtifactSink,
    concentration: bool,
) -> Result<PipelineOutcome, RunError> {
    let s0 = initial_char_state(cfg)?;

    // tracked window: the labels of the first two peak tips when available
    let window = match &cfg.initial_data {
        InitialData::Peakons { pairs, .. } if pairs.len() >= 2 => {
            let tips = [pairs[0].q, pairs[1].q];
            let label = |target: f64| {
                let j = (0..s0.len()).min_by(|&a, &b| {
                    (s0.x()[a] - target)
                        .abs()
                        .total_cmp(&(s0.x()[b] - target).abs())
                });
                s0.y(j.unwrap())
            };
            Some((label(tips[0]), label(tips[1])))
        }
        _ => None,
    };
    if concentration && window.is_none() {
        return Err(RunError::InvalidConfig(
            "concentration command needs at least two peakons".into(),
        ));
    }

    let states: Vec<CharState> = match cfg.solver {
        SolverKind::Rk4 => {
            let traj: CharTrajectory = match evolve(
                &s0,
                cfg.time.t_end,
                cfg.time.dt,
                store_stride(cfg.time.dt),
            ) {
                Ok(traj) => traj,
                Err(CoreError::CharBlowup { t, partial }) => {
                    // keep what we have, then surface the blowup
                    write_char_slices(sink, &partial.states)?;
                    return Err(RunError::Blowup { t });
                }
                Err(e) => return Err(e.into()),
            };
            traj.states
        }
        SolverKind::Picard => {
            let sol = picard_solve(&s0, cfg.time.t_end, 200, PICARD_TOL)?;
            sol.slices
        }
    };

    let times = write_char_slices(sink, &states)?;
    let raw_events = detect_singularity(&states, SINGULARITY_EPS);
    let events: Vec<ManifestEventPublic> = raw_events
        .iter()
        .map(|e| ManifestEventPublic {
            t: e.t,
            y: e.y,
            kind: match e.kind {
                EventKind::Crossing => "crossing".into(),
                EventKind::Grazing => "grazing".into(),
            },
        })
        .collect();

    // energy series (with window columns when tracked)
    let mut series = String::from("t,E,F,E_win,F_win,L_win\n");
    for st in &states {
        let tot = char_energy_total(st)?;
        let (ew, fw, lw) = match window {
            Some((y1, y2)) => {
                let w = char_energy(st, y1, y2)?;
                (w.e, w.f, w.l)
            }
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        series.push_str(&format!(
            "{},{},{},{},{},{}\n",
            st.t, tot.e, tot.f, ew, fw, lw
        ));
    }
    sink.write("energy_series.csv", series.as_bytes())?;

    #[derive(Serialize)]
    struct IndexJson {
        times: Vec<f64>,
        y0: f64,
        dy: f64,
        n: usize,
        events: Vec<(f64, f64, String)>,
    }
    sink.write_json(
        "index.json",
        &IndexJson {
            times: times.clone(),
            y0: s0.y0(),
            dy: s0.dy(),
            n: s0.len(),
            events: events.iter().map(|e| (e.t, e.y, e.kind.clone())).collect(),
        },
    )?;

    if concentration {
        let (y1, y2) = window.unwrap();
        if raw_events.is_empty() {
            return Err(RunError::NoCollision);
        }
        let report = concentration_report(&states, &raw_events, y1, y2)?;
        sink.write_json("energy_report.json", &report)?;
    }

    Ok(PipelineOutcome { times, events })
}

fn run_metric(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<PipelineOutcome, RunError> {
    let spec = GridSpec::symmetric(cfg.grid.l, cfg.grid.n);
    let mut rng = SplitMix64::new(cfg.seed);
    let gaussian = |rng: &mut SplitMix64| {
        let amp = rng.uniform(0.2, 0.8);
        let width = rng.uniform(0.7, 1.5);
        let center = rng.uniform(-2.0, 2.0);
        GridFunction::from_fn(spec, move |x| amp * (-((x - center) / width).powi(2)).exp())
    };
    // fixed C¹ test function with sup and slope bounds 1
    let test_fn = GridFunction::from_fn(spec, |x| x.tanh()).map_err(RunError::from)?;

    let mut csv = String::from("pair_id,upper_bound,sobolev_rhs,weighted_l1,kr\n");
    let mut max_sobolev_ratio = 0.0f64;
    let mut max_l1_ratio = 0.0f64;
    let mut max_kr_ratio = 0.0f64;
    let mut costs = Vec::new();
    for pair_id in 0..20 {
        let u = gaussian(&mut rng)?;
        let v = gaussian(&mut rng)?;
        let upper = geodesic_upper_bound(&u, &v, DEFAULT_THETA_SAMPLES)?;
        let sobolev = sobolev_comparison(&u, &v)?;
        let l1 = weighted_l1_distance(&u, &v)?;
        let kr = kr_discrepancy(&u, &v, &test_fn)?;
        let d_star = d_star_upper_bound(&u, &v, DEFAULT_THETA_SAMPLES)?;
        csv.push_str(&format!("{pair_id},{upper},{sobolev},{l1},{kr}\n"));
        max_sobolev_ratio = max_sobolev_ratio.max(upper / sobolev);
        max_l1_ratio = max_l1_ratio.max(l1 / upper);
        max_kr_ratio = max_kr_ratio.max(kr / d_star);
        // per-evaluation transport-cost breakdown of the endpoint tangent
        // with zero horizontal shift
        let delta = v.zip_with(&u, |a, b| a - b)?;
        let breakdown = finsler_cost(&u, &TangentFrame::from_vertical(&delta))?;
        costs.push(serde_json::json!({ "pair_id": pair_id, "cost": breakdown }));
    }
    sink.write("distances.csv", csv.as_bytes())?;
    sink.write_json("costs.json", &costs)?;
    #[derive(Serialize)]
    struct MetricReport {
        pairs: usize,
        max_upper_over_sobolev: f64,
        max_weighted_l1_over_upper: f64,
        max_kr_over_d_star: f64,
    }
    sink.write_json(
        "metric_report.json",
        &MetricReport {
            pairs: 20,
            max_upper_over_sobolev: max_sobolev_ratio,
            max_weighted_l1_over_upper: max_l1_ratio,
            max_kr_over_d_star: max_kr_ratio,
        },
    )?;
    Ok(PipelineOutcome {
        times: Vec::new(),
        events: Vec::new(),
    })
}

fn run_ch(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<PipelineOutcome, RunError> {
    let spec = GridSpec::symmetric(cfg.grid.l, cfg.grid.n);
    let u0 = sample_initial(&cfg.initial_data, spec)?;
    let traj = ch_evolve(&u0, cfg.time.t_end, cfg.time.dt)?;
    let stride = (traj.len() / 512).max(1);
    let mut series = String::from("t,H1\n");
    let mut times = Vec::new();
    for (k, u) in traj.iter().enumerate().step_by(stride) {
        let t = k as f64 * cfg.time.dt;
        series.push_str(&format!("{},{}\n", t, energy_e(u)?));
        times.push(t);
    }
    sink.write("series.csv", series.as_bytes())?;

    // generic tangent transported along the flow, with its growth fit
    let v0 = GridFunction::from_fn(spec, |x| 0.2 * (-(x - 0.5).powi(2)).exp())
        .map_err(RunError::from)?;
    let tf0 = TangentFrame::from_vertical(&v0);
    let frames = ch_evolve_tangent(&traj, &tf0, cfg.time.dt)?;
    let growth = ch_verify_growth(&traj, &frames, cfg.time.dt)?;
    let e0 = energy_e(&u0)?;
    let e1 = energy_e(traj.last().unwrap())?;
    #[derive(Serialize)]
    struct ChReport {
        h1_initial: f64,
        h1_final: f64,
        h1_relative_drift: f64,
        growth_fitted_rate: f64,
        growth_max_ratio: f64,
    }
    sink.write_json(
        "ch_report.json",
        &ChReport {
            h1_initial: e0,
            h1_final: e1,
            h1_relative_drift: ((e1 - e0) / e0).abs(),
            growth_fitted_rate: growth.fitted_rate,
            growth_max_ratio: growth.max_ratio,
        },
    )?;
    Ok(PipelineOutcome {
        times,
        events: Vec::new(),
    })
}
