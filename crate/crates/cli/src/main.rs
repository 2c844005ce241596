//! `rsv-hmc`: simulate, estimate, diagnose and benchmark the RSV model.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rsv_hmc::bench::{self, BenchConfig, BenchError, BenchFileConfig, StudyResult};
use rsv_hmc::data::{self, simulate_rsv};
use rsv_hmc::diagnostics::{self, DiagnosticsError};
use rsv_hmc::integrator::MdConfigError;
use rsv_hmc::io::{self, fmt_real, DataError};
use rsv_hmc::model::ModelError;
use rsv_hmc::sampler::{self, SamplerError};
use rsv_hmc::{Backend, Executor, MdConfig, Params, PriorSpec, SamplerConfig};

#[derive(Debug, Parser)]
#[command(name = "rsv-hmc", version, about = "Realized stochastic volatility inference with Hybrid Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it with the true latent path and parameters.
    Simulate(SimulateArgs),
    /// Run the MCMC sampler on a dataset and summarize the chain.
    Estimate(EstimateArgs),
    /// Summarize a stored chain.
    Diagnose(DiagnoseArgs),
    /// Time the elementary leapfrog step over a grid of series lengths.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Series length.
    #[arg(long = "t", value_name = "T")]
    t: usize,
    #[arg(long)]
    seed: u64,
    /// Dataset file (`date,return,rv`).
    #[arg(long, default_value = "data.csv")]
    out: PathBuf,
    /// True latent path; defaults to `<out>_latent.csv`.
    #[arg(long)]
    truth_latent: Option<PathBuf>,
    /// True parameters; defaults to `<out>_params.csv`.
    #[arg(long)]
    truth_params: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95, allow_hyphen_values = true)]
    phi: f64,
    #[arg(long, default_value_t = -0.3, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, default_value_t = -0.25, allow_hyphen_values = true)]
    xi: f64,
    #[arg(long, default_value_t = 0.04)]
    sigma_eta_sq: f64,
    #[arg(long, default_value_t = 0.08)]
    sigma_u_sq: f64,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Daily dataset (`date,return,rv`).
    #[arg(long, required_unless_present = "intraday", conflicts_with = "intraday")]
    data: Option<PathBuf>,
    /// Intraday returns (`date,time,return`), aggregated to daily RV first.
    #[arg(long)]
    intraday: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Total sweeps including burn-in.
    #[arg(long, default_value_t = 20_000)]
    sweeps: usize,
    #[arg(long, default_value_t = 5_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// HMC sweeps on the latent path alone before the chain starts.
    #[arg(long, default_value_t = sampler::DEFAULT_LATENT_WARMUP)]
    latent_warmup: usize,
    /// Leapfrog step size.
    #[arg(long, default_value_t = 0.02)]
    step_size: f64,
    /// Leapfrog steps per trajectory.
    #[arg(long, default_value_t = 50)]
    n_steps: usize,
    /// `serial`, `parallel` or `parallel:N`.
    #[arg(long, default_value = "serial")]
    backend: String,
    /// Worker count for a bare `parallel` backend.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "chain.csv")]
    chain_out: PathBuf,
    #[arg(long, default_value = "summary.csv")]
    summary_out: PathBuf,
    /// Also store the latent path of every kept sweep.
    #[arg(long)]
    store_latent: bool,
    /// Latent snapshot file; defaults to `<chain-out>_latent.csv`.
    #[arg(long)]
    latent_out: Option<PathBuf>,
    #[command(flatten)]
    prior: PriorArgs,
}

#[derive(Debug, Args)]
struct PriorArgs {
    #[arg(long, allow_hyphen_values = true)]
    prior_mu_mean: Option<f64>,
    #[arg(long)]
    prior_mu_var: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    prior_xi_mean: Option<f64>,
    #[arg(long)]
    prior_xi_var: Option<f64>,
    /// Inverse-gamma shape for both variances.
    #[arg(long)]
    prior_var_shape: Option<f64>,
    /// Inverse-gamma scale for both variances.
    #[arg(long)]
    prior_var_scale: Option<f64>,
    /// Beta prior on (phi + 1) / 2.
    #[arg(long)]
    prior_phi_a: Option<f64>,
    #[arg(long)]
    prior_phi_b: Option<f64>,
}

impl PriorArgs {
    fn resolve(&self) -> PriorSpec {
        let d = PriorSpec::default();
        PriorSpec {
            mu_mean: self.prior_mu_mean.unwrap_or(d.mu_mean),
            mu_var: self.prior_mu_var.unwrap_or(d.mu_var),
            xi_mean: self.prior_xi_mean.unwrap_or(d.xi_mean),
            xi_var: self.prior_xi_var.unwrap_or(d.xi_var),
            var_shape: self.prior_var_shape.unwrap_or(d.var_shape),
            var_scale: self.prior_var_scale.unwrap_or(d.var_scale),
            phi_a: self.prior_phi_a.unwrap_or(d.phi_a),
            phi_b: self.prior_phi_b.unwrap_or(d.phi_b),
        }
    }
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[arg(long)]
    chain: PathBuf,
    /// Write the summary CSV here as well as printing the table.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the summary CSV instead of the table.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// TOML file with defaults; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated B grid (T = 512 B).
    #[arg(long, value_delimiter = ',')]
    b_values: Option<Vec<usize>>,
    /// Elementary steps per timed segment.
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated backends, e.g. `serial,parallel:4`.
    #[arg(long, value_delimiter = ',')]
    backends: Option<Vec<String>>,
    #[arg(long)]
    workers: Option<usize>,
    /// `single` or `double`.
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    chunk: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "bench_out")]
    out_dir: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParams(_) => CliError::Usage(e.to_string()),
            ModelError::NonFinite => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Model(m) => m.into(),
            SamplerError::Config(_) | SamplerError::Prior(_) => CliError::Usage(e.to_string()),
            SamplerError::DivergenceStorm { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::NonFinite => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Config(_) | BenchError::Exec(_) => CliError::Usage(e.to_string()),
            BenchError::Io { .. } | BenchError::Parse { .. } => CliError::Data(e.to_string()),
            BenchError::Model(m) => m.into(),
            BenchError::Diverged { .. } | BenchError::DegenerateFit | BenchError::Domain { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<MdConfigError> for CliError {
    fn from(e: MdConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// `dir/stem.ext` → `dir/stem_<suffix>.csv`
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let params = Params {
        phi: a.phi,
        mu: a.mu,
        xi: a.xi,
        sigma_eta_sq: a.sigma_eta_sq,
        sigma_u_sq: a.sigma_u_sq,
    };
    if a.t < 2 {
        return Err(CliError::Usage(format!("--t must be at least 2, got {}", a.t)));
    }
    let truth = simulate_rsv(&params, a.t, a.seed)?;
    let latent = a.truth_latent.unwrap_or_else(|| sibling(&a.out, "latent"));
    let params_path = a.truth_params.unwrap_or_else(|| sibling(&a.out, "params"));
    io::save_dataset(&truth.dataset, &a.out)?;
    io::save_truth(&truth, &latent, &params_path)?;
    println!("dataset  {}", a.out.display());
    println!("latent   {}", latent.display());
    println!("params   {}", params_path.display());
    Ok(())
}

fn cmd_estimate(a: EstimateArgs) -> Result<(), CliError> {
    if a.burnin >= a.sweeps {
        return Err(CliError::Usage(format!(
            "--burnin ({}) must be smaller than --sweeps ({})",
            a.burnin, a.sweeps
        )));
    }
    if a.thin == 0 {
        return Err(CliError::Usage("--thin must be at least 1".into()));
    }
    let md = MdConfig::new(a.step_size, a.n_steps)?;
    let backend = bench::parse_backends(&[a.backend.as_str()], a.workers)?[0];
    let exec = Executor::new(backend).map_err(|e| CliError::Usage(e.to_string()))?;
    let prior = a.prior.resolve();

    let dataset = match (&a.data, &a.intraday) {
        (Some(p), _) => io::load_dataset(p)?,
        (None, Some(p)) => {
            let panel = io::load_intraday(p)?;
            data::dataset_from_panel(&panel)?
        }
        (None, None) => return Err(CliError::Usage("one of --data or --intraday is required".into())),
    };

    let mut config = SamplerConfig::new(a.seed, a.burnin, (a.sweeps - a.burnin) / a.thin);
    config.md = md;
    config.thin = a.thin;
    config.store_latent = a.store_latent;
    config.latent_warmup = a.latent_warmup;
    let (init, h0) = sampler::initial_state(&dataset);
    let out = sampler::run_chain(&dataset, init, h0, &prior, &config, &exec)?;

    let latent_path = a
        .store_latent
        .then(|| a.latent_out.clone().unwrap_or_else(|| sibling(&a.chain_out, "latent")));
    io::save_chain(&out.samples, &a.chain_out, latent_path.as_deref())?;
    let summary = diagnostics::summarize(&out.samples)?;
    write_text(&a.summary_out, &diagnostics::summary_to_csv(&summary))?;

    print!("{}", diagnostics::render_table(&summary));
    println!(
        "phi acceptance   {:.4}",
        out.phi_accepted as f64 / out.sweeps.max(1) as f64
    );
    println!("chain            {}", a.chain_out.display());
    if let Some(p) = &latent_path {
        println!("latent           {}", p.display());
    }
    println!("summary          {}", a.summary_out.display());
    Ok(())
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<(), CliError> {
    let chain = io::load_chain(&a.chain, None)?;
    let summary = diagnostics::summarize(&chain)?;
    let csv = diagnostics::summary_to_csv(&summary);
    if let Some(p) = &a.out {
        write_text(p, &csv)?;
    }
    if a.csv {
        print!("{csv}");
    } else {
        print!("{}", diagnostics::render_table(&summary));
    }
    Ok(())
}

fn bench_config(a: &BenchArgs) -> Result<BenchConfig, CliError> {
    let file = match &a.config {
        Some(p) => BenchFileConfig::load(p)?,
        None => BenchFileConfig::default(),
    };
    let base = file.apply(BenchConfig::default())?;
    let flags = BenchFileConfig {
        b_values: a.b_values.clone(),
        reps: a.reps,
        chunk: a.chunk,
        backends: a.backends.clone(),
        // a bare `parallel` on the command line still picks up the file's worker count
        workers: a.workers.or(if a.backends.is_some() { file.workers } else { None }),
        precision: a.precision.clone(),
        repeats: a.repeats,
        step_size: a.step_size,
        seed: a.seed,
    };
    let config = flags.apply(base)?;
    config.validate()?;
    Ok(config)
}

fn bench_report(study: &StudyResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "precision {}, {} steps per segment", study.precision, study.reps);
    for s in &study.series {
        let _ = writeln!(out, "\n[{}]", s.backend.label());
        let _ = writeln!(out, "{:>6} {:>9} {:>14} {:>12}", "B", "T", "seconds", "std_error");
        for t in &s.timings {
            let _ = writeln!(
                out,
                "{:>6} {:>9} {:>14.6e} {:>12.3e}",
                t.b,
                t.b * bench::SITES_PER_B,
                t.mean_seconds,
                t.std_error
            );
        }
        match s.fit() {
            Some(f) => {
                let _ = writeln!(out, "A   = {}", fmt_real(f.intercept_a));
                let _ = writeln!(out, "C   = {}", fmt_real(f.slope_c));
                let _ = writeln!(out, "R^2 = {}", fmt_real(f.r_squared));
            }
            None => {
                let _ = writeln!(out, "fit unavailable (need two distinct B values)");
            }
        }
    }
    let curves = study.gain_curves();
    if !curves.is_empty() {
        let _ = writeln!(out, "\ngain");
        for g in curves {
            let _ = writeln!(out, "{} / {}", g.slow.label(), g.fast.label());
            for (b, v) in &g.points {
                let _ = writeln!(out, "  B = {b:<6} {}", fmt_real(*v));
            }
            if let Some(v) = g.asymptotic {
                let _ = writeln!(out, "  B = inf    {}", fmt_real(v));
            }
        }
    }
    out
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    let config = bench_config(&a)?;
    if config.backends.iter().any(|b| matches!(b, Backend::Parallel { workers: 0 })) {
        return Err(CliError::Usage("parallel backend needs at least one worker".into()));
    }
    let study = bench::run_study(&config)?;
    let files = bench::emit_report(&study, &a.out_dir, &bench::unix_stamp())?;
    print!("{}", bench_report(&study));
    println!("\nreport  {}", files.fit_summary.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
