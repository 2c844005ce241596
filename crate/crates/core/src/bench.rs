//! Elementary-step scaling study.
//!
//! For each `B` on a grid the series length is `T = 512·B`. The three-kernel
//! elementary step is executed `reps` times on a synthetic dataset and the
//! average wall-clock time per step is recorded. Each backend's
//! `(B, seconds)` series is fitted with `f(B) = A + C·B`, and the gain of a
//! fast backend over a slow one is `f_slow(B) / f_fast(B)`, tending to
//! `C_slow / C_fast` as `B → ∞`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::data::simulate_rsv;
use crate::exec::{default_workers, Backend, ExecError, Executor, DEFAULT_CHUNK};
use crate::float::{Precision, Real};
use crate::integrator::{elementary_step, MdConfig};
use crate::io::fmt_real;
use crate::model::{Dataset, ModelData, ModelError, Params, PhaseState, Posterior};
use crate::rng;

/// Sites per unit of `B`.
pub const SITES_PER_B: usize = 512;
/// Untimed steps before each measurement.
pub const WARMUP_STEPS: usize = 10;
/// Momenta are redrawn (untimed) after this many timed steps.
pub const REFRESH_EVERY: usize = 100;
/// Step-size halvings attempted after a divergence.
pub const MAX_RETRIES: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("trajectory diverged at B = {b} after {retries} step-size reductions (last step size {step_size})")]
    Diverged { b: usize, retries: usize, step_size: f64 },
    #[error("degenerate fit: need at least two distinct B values")]
    DegenerateFit,
    #[error("predicted time {value} at B = {b} is not positive")]
    Domain { b: f64, value: f64 },
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub b_values: Vec<usize>,
    pub reps: usize,
    pub chunk: usize,
    pub backends: Vec<Backend>,
    pub precision: Precision,
    /// Independent repetitions of each whole measurement.
    pub repeats: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            b_values: vec![1, 2, 4, 8, 16, 32],
            reps: 10_000,
            chunk: DEFAULT_CHUNK,
            backends: vec![
                Backend::Serial,
                Backend::Parallel {
                    workers: default_workers(),
                },
            ],
            precision: Precision::Single,
            repeats: 5,
            step_size: MdConfig::default().step_size(),
            seed: 2014,
        }
    }
}

/// Optional overrides read from a `key = value` file.
#[derive(Debug, Clone, Default, PartialEq, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFileConfig {
    pub b_values: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub chunk: Option<usize>,
    pub backends: Option<Vec<String>>,
    pub workers: Option<usize>,
    pub precision: Option<String>,
    pub repeats: Option<usize>,
    pub step_size: Option<f64>,
    pub seed: Option<u64>,
}

impl BenchFileConfig {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        BenchFileConfig::parse(&text)
    }

    /// Applies every field that is set on top of `base`. A bare `parallel`
    /// backend uses `workers` when given.
    pub fn apply(&self, mut base: BenchConfig) -> Result<BenchConfig, BenchError> {
        if let Some(v) = &self.b_values {
            base.b_values = v.clone();
        }
        if let Some(v) = self.reps {
            base.reps = v;
        }
        if let Some(v) = self.chunk {
            base.chunk = v;
        }
        if let Some(v) = self.repeats {
            base.repeats = v;
        }
        if let Some(v) = self.step_size {
            base.step_size = v;
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(p) = &self.precision {
            base.precision = p.parse().map_err(BenchError::Config)?;
        }
        if let Some(list) = &self.backends {
            base.backends = parse_backends(list, self.workers)?;
        } else if let Some(w) = self.workers {
            for b in base.backends.iter_mut() {
                if let Backend::Parallel { workers } = b {
                    *workers = w;
                }
            }
        }
        Ok(base)
    }
}

/// Parses backend names; bare `parallel` takes `workers` if given.
pub fn parse_backends<S: AsRef<str>>(list: &[S], workers: Option<usize>) -> Result<Vec<Backend>, BenchError> {
    list.iter()
        .map(|s| {
            let s = s.as_ref().trim();
            match (s, workers) {
                ("parallel", Some(w)) => Ok(Backend::Parallel { workers: w }),
                _ => s.parse::<Backend>().map_err(BenchError::Config),
            }
        })
        .collect()
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.b_values.is_empty() || self.b_values.contains(&0) {
            return bad("b_values must be a non-empty list of positive integers");
        }
        if self.reps == 0 {
            return bad("reps must be at least 1");
        }
        if self.chunk == 0 {
            return bad("chunk must be at least 1");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.backends.is_empty() {
            return bad("at least one backend is required");
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        let max_b = *self.b_values.iter().max().unwrap_or(&1);
        if max_b.checked_mul(SITES_PER_B).is_none() || max_b > (1 << 24) {
            return bad("B too large");
        }
        Ok(())
    }
}

/// Model parameters used for benchmark data.
pub fn bench_params() -> Params {
    Params {
        phi: 0.95,
        mu: -0.3,
        xi: -0.25,
        sigma_eta_sq: 0.04,
        sigma_u_sq: 0.08,
    }
}

/// Average time per elementary step at one `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTiming {
    pub b: usize,
    pub mean_seconds: f64,
    /// Standard error across the independent repetitions.
    pub std_error: f64,
    pub repeats: usize,
    pub step_size: f64,
}

impl StepTiming {
    /// Flags timings whose standard error exceeds 10 % of the mean.
    pub fn is_stable(&self) -> bool {
        self.mean_seconds >= 0.0 && self.std_error < 0.1 * self.mean_seconds
    }
}

/// One `(B, backend)` cell of the study. The phase state carries over from
/// one timed segment to the next; momenta are redrawn outside the timed
/// region every [`REFRESH_EVERY`] steps.
struct StepTimer<'a, F> {
    b: usize,
    exec: &'a Executor,
    data: ModelData<F>,
    params: Params,
    h0: &'a [f64],
    seed: u64,
    step_size: f64,
    retries: usize,
    healthy: bool,
    state: PhaseState<F>,
    rng: rng::ChainRng,
    noise: Vec<f64>,
    per_repeat: Vec<f64>,
}

impl<'a, F: Real> StepTimer<'a, F> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        b: usize,
        exec: &'a Executor,
        params: &Params,
        data: &Dataset,
        h0: &'a [f64],
        step_size: f64,
        seed: u64,
    ) -> Result<Self, BenchError> {
        let data = ModelData::new(data);
        Posterior::new(&data, params)?;
        if h0.len() != data.len() {
            return Err(ModelError::LengthMismatch {
                expected: data.len(),
                found: h0.len(),
            }
            .into());
        }
        let mut timer = StepTimer {
            b,
            exec,
            data,
            params: *params,
            h0,
            seed,
            step_size,
            retries: 0,
            healthy: false,
            state: PhaseState {
                h: Vec::new(),
                p: Vec::new(),
            },
            rng: rng::seeded(seed),
            noise: vec![0.0; h0.len()],
            per_repeat: Vec::new(),
        };
        timer.restart();
        Ok(timer)
    }

    fn posterior(&self) -> Posterior<'_, F> {
        Posterior::new(&self.data, &self.params).expect("parameters validated in new")
    }

    fn refresh(&mut self) {
        rng::fill_standard_normal(&mut self.rng, &mut self.noise);
        for (x, y) in self.state.p.iter_mut().zip(&self.noise) {
            *x = F::of(*y);
        }
    }

    fn take_state(&mut self) -> PhaseState<F> {
        std::mem::replace(
            &mut self.state,
            PhaseState {
                h: Vec::new(),
                p: Vec::new(),
            },
        )
    }

    /// Back to `h0` with fresh momenta, then the untimed warmup.
    fn restart(&mut self) {
        self.rng = rng::seeded(self.seed);
        self.per_repeat.clear();
        self.state = PhaseState {
            h: self.h0.iter().map(|&x| F::of(x)).collect(),
            p: vec![F::zero(); self.h0.len()],
        };
        self.refresh();
        let dt = F::of(self.step_size);
        let mut ps = self.take_state();
        let mut ok = true;
        {
            let post = self.posterior();
            for _ in 0..WARMUP_STEPS {
                ok &= elementary_step(&mut ps, dt, &post, self.exec);
            }
        }
        self.state = ps;
        self.healthy = ok;
    }

    /// Seconds per step over `reps` steps, or `None` on divergence.
    fn segment(&mut self, reps: usize) -> Option<f64> {
        let dt = F::of(self.step_size);
        let mut elapsed = Duration::ZERO;
        let mut done = 0;
        let mut ok = true;
        while done < reps {
            let seg = REFRESH_EVERY.min(reps - done);
            self.refresh();
            let mut ps = self.take_state();
            {
                let post = self.posterior();
                let start = Instant::now();
                for _ in 0..seg {
                    ok &= elementary_step(&mut ps, dt, &post, self.exec);
                }
                elapsed += start.elapsed();
            }
            self.state = ps;
            if !ok {
                return None;
            }
            done += seg;
        }
        Some(elapsed.as_secs_f64() / reps as f64)
    }

    /// Adds repeats until there are `target`. A divergence halves the step
    /// size and starts the cell over, at most [`MAX_RETRIES`] times.
    fn fill(&mut self, target: usize, reps: usize) -> Result<(), BenchError> {
        while self.per_repeat.len() < target {
            if self.healthy {
                if let Some(s) = self.segment(reps) {
                    self.per_repeat.push(s);
                    continue;
                }
            }
            if self.retries == MAX_RETRIES {
                return Err(BenchError::Diverged {
                    b: self.b,
                    retries: MAX_RETRIES,
                    step_size: self.step_size,
                });
            }
            log::warn!(
                "divergence while timing B = {} at step size {}, halving",
                self.b,
                self.step_size
            );
            self.retries += 1;
            self.step_size /= 2.0;
            self.restart();
        }
        Ok(())
    }

    fn finish(&self) -> StepTiming {
        let n = self.per_repeat.len() as f64;
        let mean = self.per_repeat.iter().sum::<f64>() / n;
        let var = if self.per_repeat.len() > 1 {
            self.per_repeat.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        StepTiming {
            b: self.b,
            mean_seconds: mean,
            std_error: (var / n).sqrt(),
            repeats: self.per_repeat.len(),
            step_size: self.step_size,
        }
    }
}

/// Times `reps` consecutive elementary steps `repeats` times on the given
/// data, starting from `h0`.
#[allow(clippy::too_many_arguments)]
pub fn time_elementary_step<F: Real>(
    b: usize,
    exec: &Executor,
    reps: usize,
    repeats: usize,
    params: &Params,
    data: &Dataset,
    h0: &[f64],
    step_size: f64,
    seed: u64,
) -> Result<StepTiming, BenchError> {
    if reps == 0 || repeats == 0 {
        return Err(BenchError::Config("reps and repeats must be at least 1".into()));
    }
    let mut timer = StepTimer::<F>::new(b, exec, params, data, h0, step_size, seed)?;
    timer.fill(repeats, reps)?;
    Ok(timer.finish())
}

/// Ordinary least-squares fit `f(B) = A + C·B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingFit {
    pub intercept_a: f64,
    pub slope_c: f64,
    pub r_squared: f64,
}

impl TimingFit {
    pub fn predict(&self, b: f64) -> f64 {
        self.intercept_a + self.slope_c * b
    }
}

pub fn fit_linear(points: &[(f64, f64)]) -> Result<TimingFit, BenchError> {
    if points.len() < 2 {
        return Err(BenchError::DegenerateFit);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(BenchError::DegenerateFit);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(TimingFit {
        intercept_a: intercept,
        slope_c: slope,
        r_squared,
    })
}

/// `f_slow(B) / f_fast(B)`.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
pub fn compute_gain(slow: &TimingFit, fast: &TimingFit, b: f64) -> Result<f64, BenchError> {
    let f = fast.predict(b);
    if !(f > 0.0) {
        return Err(BenchError::Domain { b, value: f });
    }
    let s = slow.predict(b);
    if !(s > 0.0) {
        return Err(BenchError::Domain { b, value: s });
    }
    Ok(s / f)
}

/// `C_slow / C_fast`, the `B → ∞` limit of [`compute_gain`].
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn asymptotic_gain(slow: &TimingFit, fast: &TimingFit) -> Result<f64, BenchError> {
    if !(fast.slope_c > 0.0) {
        return Err(BenchError::Domain {
            b: f64::INFINITY,
            value: fast.slope_c,
        });
    }
    Ok(slow.slope_c / fast.slope_c)
}

/// Timings of one backend across the `B` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendSeries {
    pub backend: Backend,
    pub timings: Vec<StepTiming>,
}

impl BackendSeries {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.timings
            .iter()
            .map(|t| (t.b as f64, t.mean_seconds))
            .collect()
    }

    pub fn fit(&self) -> Option<TimingFit> {
        fit_linear(&self.points()).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub precision: Precision,
    pub reps: usize,
    pub series: Vec<BackendSeries>,
}

/// Gain of one backend over the reference backend.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    pub slow: Backend,
    pub fast: Backend,
    pub points: Vec<(usize, f64)>,
    pub asymptotic: Option<f64>,
}

impl StudyResult {
    /// Gains of every other backend over the first one, evaluated on the
    /// first backend's `B` grid. Empty with fewer than two fitted backends.
    pub fn gain_curves(&self) -> Vec<GainCurve> {
        let Some((first, rest)) = self.series.split_first() else {
            return Vec::new();
        };
        let Some(slow_fit) = first.fit() else {
            return Vec::new();
        };
        rest.iter()
            .filter_map(|s| {
                let fast_fit = s.fit()?;
                let points = first
                    .timings
                    .iter()
                    .filter_map(|t| {
                        compute_gain(&slow_fit, &fast_fit, t.b as f64)
                            .ok()
                            .map(|g| (t.b, g))
                    })
                    .collect();
                Some(GainCurve {
                    slow: first.backend,
                    fast: s.backend,
                    points,
                    asymptotic: asymptotic_gain(&slow_fit, &fast_fit).ok(),
                })
            })
            .collect()
    }
}

/// Runs the scaling study over every backend and `B`.
///
/// Repeats are taken in rounds: each round times every `(backend, B)` cell
/// once, so slow drifts in machine speed affect the whole grid alike
/// instead of bending the fitted line.
pub fn run_study(config: &BenchConfig) -> Result<StudyResult, BenchError> {
    config.validate()?;
    match config.precision {
        Precision::Single => study_in::<f32>(config),
        Precision::Double => study_in::<f64>(config),
    }
}

fn study_in<F: Real>(config: &BenchConfig) -> Result<StudyResult, BenchError> {
    let params = bench_params();
    let executors = config
        .backends
        .iter()
        .map(|b| Executor::new(*b).and_then(|e| e.with_chunk(config.chunk)))
        .collect::<Result<Vec<_>, _>>()?;
    let truths = config
        .b_values
        .iter()
        .map(|&b| simulate_rsv(&params, SITES_PER_B * b, config.seed.wrapping_add(b as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cells = executors
        .iter()
        .map(|exec| {
            config
                .b_values
                .iter()
                .zip(&truths)
                .map(|(&b, tr)| {
                    StepTimer::<F>::new(b, exec, &params, &tr.dataset, &tr.latent, config.step_size, config.seed)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    for round in 1..=config.repeats {
        for row in cells.iter_mut() {
            for cell in row.iter_mut() {
                cell.fill(round, config.reps)?;
            }
        }
    }
    let series = config
        .backends
        .iter()
        .zip(&cells)
        .map(|(backend, row)| {
            let timings = row
                .iter()
                .map(|cell| {
                    let timing = cell.finish();
                    if !timing.is_stable() {
                        log::warn!(
                            "unstable timing for {backend} at B = {}: {:.3e} +/- {:.3e} s",
                            timing.b,
                            timing.mean_seconds,
                            timing.std_error
                        );
                    }
                    log::info!(
                        "{backend} B = {}: {:.4e} s/step (+/- {:.2e})",
                        timing.b,
                        timing.mean_seconds,
                        timing.std_error
                    );
                    timing
                })
                .collect();
            BackendSeries {
                backend: *backend,
                timings,
            }
        })
        .collect();
    Ok(StudyResult {
        precision: config.precision,
        reps: config.reps,
        series,
    })
}

pub const TIMING_HEADER: &str = "B,T,mean_seconds,std_error,repeats,step_size";
pub const FIT_HEADER: &str = "backend,A,C,r_squared,n_points";
pub const GAIN_HEADER: &str = "slow,fast,B,gain";

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub timings: Vec<PathBuf>,
    pub fit_summary: PathBuf,
    pub gain: PathBuf,
}

fn stamp_line(stamp: &str) -> String {
    format!("# generated {stamp}\n")
}

/// Seconds since the Unix epoch, used as the report header stamp.
pub fn unix_stamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix={secs}")
}

pub fn timing_csv(series: &BackendSeries, stamp: &str) -> String {
    let mut out = stamp_line(stamp);
    out.push_str(TIMING_HEADER);
    out.push('\n');
    for t in &series.timings {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            t.b,
            t.b * SITES_PER_B,
            fmt_real(t.mean_seconds),
            fmt_real(t.std_error),
            t.repeats,
            fmt_real(t.step_size)
        );
    }
    out
}

pub fn fit_csv(study: &StudyResult, stamp: &str) -> String {
    let mut out = stamp_line(stamp);
    out.push_str(FIT_HEADER);
    out.push('\n');
    for s in &study.series {
        if let Some(f) = s.fit() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.backend.label(),
                fmt_real(f.intercept_a),
                fmt_real(f.slope_c),
                fmt_real(f.r_squared),
                s.timings.len()
            );
        }
    }
    out
}

/// Gain curve rows; the asymptotic slope ratio is written with `B = inf`.
pub fn gain_csv(study: &StudyResult, stamp: &str) -> String {
    let mut out = stamp_line(stamp);
    out.push_str(GAIN_HEADER);
    out.push('\n');
    for g in study.gain_curves() {
        let (slow, fast) = (g.slow.label(), g.fast.label());
        for (b, v) in &g.points {
            let _ = writeln!(out, "{slow},{fast},{b},{}", fmt_real(*v));
        }
        if let Some(a) = g.asymptotic {
            let _ = writeln!(out, "{slow},{fast},inf,{}", fmt_real(a));
        }
    }
    out
}

/// Writes `timing_<backend>.csv`, `fit_summary.csv` and `gain.csv` into
/// `dir`. Each file starts with a `# generated` stamp line.
pub fn emit_report(study: &StudyResult, dir: &Path, stamp: &str) -> Result<ReportFiles, BenchError> {
    let write = |path: PathBuf, body: String| -> Result<PathBuf, BenchError> {
        std::fs::write(&path, body).map_err(|source| BenchError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    };
    std::fs::create_dir_all(dir).map_err(|source| BenchError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let timings = study
        .series
        .iter()
        .map(|s| {
            write(
                dir.join(format!("timing_{}.csv", s.backend.label())),
                timing_csv(s, stamp),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReportFiles {
        timings,
        fit_summary: write(dir.join("fit_summary.csv"), fit_csv(study, stamp))?,
        gain: write(dir.join("gain.csv"), gain_csv(study, stamp))?,
    })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|(i, l)| (i + 1, l))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> BenchError {
    BenchError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read(path: &Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a timing CSV back as `StepTiming` rows.
pub fn read_timing_csv(path: &Path) -> Result<Vec<StepTiming>, BenchError> {
    let text = read(path)?;
    data_lines(&text)
        .map(|(ln, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(parse_err(path, ln, "expected 6 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(path, ln, format!("bad number '{s}'")));
            let int = |s: &str| s.parse::<usize>().map_err(|_| parse_err(path, ln, format!("bad integer '{s}'")));
            Ok(StepTiming {
                b: int(f[0])?,
                mean_seconds: num(f[2])?,
                std_error: num(f[3])?,
                repeats: int(f[4])?,
                step_size: num(f[5])?,
            })
        })
        .collect()
}

/// Reads `fit_summary.csv` as `(backend label, fit, n_points)`.
pub fn read_fit_csv(path: &Path) -> Result<Vec<(String, TimingFit, usize)>, BenchError> {
    let text = read(path)?;
    data_lines(&text)
        .map(|(ln, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(parse_err(path, ln, "expected 5 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(path, ln, format!("bad number '{s}'")));
            Ok((
                f[0].to_string(),
                TimingFit {
                    intercept_a: num(f[1])?,
                    slope_c: num(f[2])?,
                    r_squared: num(f[3])?,
                },
                f[4].parse().map_err(|_| parse_err(path, ln, "bad count"))?,
            ))
        })
        .collect()
}

/// One `gain.csv` row: `(slow, fast, B, gain)`.
pub type GainRow = (String, String, Option<usize>, f64);

/// Reads `gain.csv` as `(slow, fast, B, gain)`; `B = None` marks the
/// asymptotic row.
pub fn read_gain_csv(path: &Path) -> Result<Vec<GainRow>, BenchError> {
    let text = read(path)?;
    data_lines(&text)
        .map(|(ln, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(parse_err(path, ln, "expected 4 fields"));
            }
            let b = if f[2] == "inf" {
                None
            } else {
                Some(f[2].parse().map_err(|_| parse_err(path, ln, "bad B"))?)
            };
            let g = f[3].parse().map_err(|_| parse_err(path, ln, "bad gain"))?;
            Ok((f[0].to_string(), f[1].to_string(), b, g))
        })
        .collect()
}
