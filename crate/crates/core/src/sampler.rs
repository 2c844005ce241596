//! MCMC driver: HMC for the latent volatility path, Metropolis-within-Gibbs
//! for the static parameters.
//!
//! One sweep runs, in this order:
//!
//! 1. HMC update of `h`
//! 2. `μ`   exact normal full conditional
//! 3. `φ`   Metropolis step, normal proposal at the conditional least-squares value
//! 4. `σ_η²` exact inverse-gamma full conditional
//! 5. `ξ`   exact normal full conditional
//! 6. `σ_u²` exact inverse-gamma full conditional

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::exec::Executor;
use crate::integrator::{Leapfrog, MdConfig, Trajectory, DELTA_H_LIMIT};
use crate::model::{Dataset, ModelData, ModelError, Params, PhaseState, Posterior};
use crate::rng;

/// Width of the sliding window used to detect divergence storms.
pub const STORM_WINDOW: usize = 100;

/// HMC sweeps on `h` alone, at the initial parameters, before the first
/// Gibbs sweep.
pub const DEFAULT_LATENT_WARMUP: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("invalid prior: {0}")]
    Prior(String),
    #[error(
        "divergence storm at sweep {sweep}: {divergent} of the last {window} HMC proposals diverged"
    )]
    DivergenceStorm {
        sweep: usize,
        divergent: usize,
        window: usize,
    },
}

/// Priors on the static parameters.
///
/// `μ ~ N(mu_mean, mu_var)`, `ξ ~ N(xi_mean, xi_var)`,
/// `σ_η², σ_u² ~ IG(var_shape, var_scale)`, `(φ + 1)/2 ~ Beta(phi_a, phi_b)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PriorSpec {
    pub mu_mean: f64,
    pub mu_var: f64,
    pub xi_mean: f64,
    pub xi_var: f64,
    pub var_shape: f64,
    pub var_scale: f64,
    pub phi_a: f64,
    pub phi_b: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            mu_mean: 0.0,
            mu_var: 100.0,
            xi_mean: 0.0,
            xi_var: 100.0,
            var_shape: 2.5,
            var_scale: 0.025,
            phi_a: 20.0,
            phi_b: 1.5,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let positive = [
            ("mu_var", self.mu_var),
            ("xi_var", self.xi_var),
            ("var_shape", self.var_shape),
            ("var_scale", self.var_scale),
            ("phi_a", self.phi_a),
            ("phi_b", self.phi_b),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SamplerError::Prior(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.mu_mean.is_finite() || !self.xi_mean.is_finite() {
            return Err(SamplerError::Prior("prior means must be finite".into()));
        }
        Ok(())
    }

    /// Log Beta prior density of `φ` on `(−1, 1)`, up to a constant.
    pub fn log_phi_prior(&self, phi: f64) -> f64 {
        (self.phi_a - 1.0) * ((1.0 + phi) / 2.0).ln() + (self.phi_b - 1.0) * ((1.0 - phi) / 2.0).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub md: MdConfig,
    pub n_burnin: usize,
    pub n_samples: usize,
    pub thin: usize,
    pub store_latent: bool,
    /// Volatility-only sweeps run before the chain proper. Starting from
    /// `h = ln RV` every RV residual is zero, so a rejected first proposal
    /// would collapse the `σ_u²` draw and leave the integrator unstable.
    pub latent_warmup: usize,
}

impl SamplerConfig {
    pub fn new(seed: u64, n_burnin: usize, n_samples: usize) -> Self {
        SamplerConfig {
            seed,
            md: MdConfig::default(),
            n_burnin,
            n_samples,
            thin: 1,
            store_latent: false,
            latent_warmup: DEFAULT_LATENT_WARMUP,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.thin == 0 {
            return Err(SamplerError::Config("thin must be at least 1".into()));
        }
        if self.n_samples == 0 {
            return Err(SamplerError::Config("n_samples must be at least 1".into()));
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> usize {
        self.n_burnin + self.n_samples * self.thin
    }
}

/// One stored sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample {
    /// 1-based sweep number, counting burn-in.
    pub iter: usize,
    pub params: Params,
    pub accept: bool,
    /// `ΔH` of the HMC proposal; `+∞` if the trajectory diverged.
    pub delta_h: f64,
    pub latent: Option<Vec<f64>>,
}

impl ChainSample {
    pub fn is_divergent(&self) -> bool {
        self.delta_h == f64::INFINITY
    }
}

/// Stored samples plus whole-run counters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainOutput {
    pub samples: Vec<ChainSample>,
    pub sweeps: usize,
    pub hmc_accepted: usize,
    pub divergent: usize,
    pub phi_accepted: usize,
    /// Latent path after the final sweep.
    pub final_latent: Vec<f64>,
}

impl ChainOutput {
    /// Series of parameter `index` in [`Params::NAMES`] order.
    pub fn param_series(&self, index: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.params.as_array()[index]).collect()
    }
}

/// Normal distribution given by mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalConditional {
    pub mean: f64,
    pub var: f64,
}

impl NormalConditional {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.mean + self.var.sqrt() * rng::standard_normal(rng)
    }
}

/// Inverse-gamma distribution with density `∝ x^{−shape−1} e^{−scale/x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaConditional {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaConditional {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.shape, 1.0 / self.scale).expect("positive shape and scale");
        1.0 / g.sample(rng)
    }

    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }
}

/// I.i.d. standard normal momenta.
pub fn refresh_momenta<R: Rng + ?Sized>(rng: &mut R, t: usize) -> Vec<f64> {
    let mut p = vec![0.0; t];
    rng::fill_standard_normal(rng, &mut p);
    p
}

/// Outcome of one HMC proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcOutcome {
    pub accept: bool,
    pub delta_h: f64,
}

impl HmcOutcome {
    pub fn is_divergent(&self) -> bool {
        self.delta_h == f64::INFINITY
    }
}

/// `min{1, e^{−ΔH}}` decision given a uniform draw `u ∈ [0, 1)`.
pub fn metropolis_accept(delta_h: f64, u: f64) -> bool {
    if delta_h.is_nan() {
        return false;
    }
    delta_h <= 0.0 || u < (-delta_h).exp()
}

/// HMC update of the latent path in place. On rejection `h` is unchanged.
pub fn hmc_update_volatility<R: Rng + ?Sized>(
    h: &mut Vec<f64>,
    posterior: &Posterior<'_, f64>,
    md: &MdConfig,
    leapfrog: &Leapfrog,
    rng: &mut R,
) -> HmcOutcome {
    let exec = leapfrog.executor();
    let p = refresh_momenta(rng, h.len());
    let u: f64 = rng.random();
    let start = PhaseState { h: std::mem::take(h), p };
    let h_old = posterior.hamiltonian(&start, exec);
    let traj = leapfrog.integrate_trajectory(&start, md, posterior);
    let PhaseState { h: h_start, .. } = start;
    let proposal = match traj {
        Trajectory::Completed(s) => {
            let h_new = posterior.hamiltonian(&s, exec);
            let delta = h_new - h_old;
            (delta.is_finite() && delta.abs() <= DELTA_H_LIMIT).then_some((s.h, delta))
        }
        Trajectory::Diverged { .. } => None,
    };
    match proposal {
        Some((h_new, delta)) => {
            let accept = h_old.is_finite() && metropolis_accept(delta, u);
            *h = if accept { h_new } else { h_start };
            HmcOutcome {
                accept,
                delta_h: delta,
            }
        }
        None => {
            *h = h_start;
            HmcOutcome {
                accept: false,
                delta_h: f64::INFINITY,
            }
        }
    }
}

/// Full conditional of `μ` given `h`, `φ`, `σ_η²`.
///
/// Collects the `μ`-quadratic terms of the stationary initial density and
/// the transitions `h_{t+1} − φ h_t − (1 − φ) μ`.
pub fn mu_conditional(h: &[f64], params: &Params, prior: &PriorSpec) -> NormalConditional {
    let phi = params.phi;
    let one_m = 1.0 - phi;
    let stat = 1.0 - phi * phi;
    let n_trans = (h.len() - 1) as f64;
    let trans_sum: f64 = h.windows(2).map(|w| w[1] - phi * w[0]).sum();
    let precision = (stat + n_trans * one_m * one_m) / params.sigma_eta_sq + 1.0 / prior.mu_var;
    let numer = (stat * h[0] + one_m * trans_sum) / params.sigma_eta_sq + prior.mu_mean / prior.mu_var;
    NormalConditional {
        mean: numer / precision,
        var: 1.0 / precision,
    }
}

pub fn update_mu<R: Rng + ?Sized>(h: &[f64], params: &Params, prior: &PriorSpec, rng: &mut R) -> f64 {
    mu_conditional(h, params, prior).sample(rng)
}

/// Full conditional of `ξ` from the residuals `ln RV_t − h_t`.
pub fn xi_conditional(
    h: &[f64],
    data: &Dataset,
    params: &Params,
    prior: &PriorSpec,
) -> NormalConditional {
    let resid: f64 = data.log_rv().iter().zip(h).map(|(l, x)| l - x).sum();
    let precision = h.len() as f64 / params.sigma_u_sq + 1.0 / prior.xi_var;
    let numer = resid / params.sigma_u_sq + prior.xi_mean / prior.xi_var;
    NormalConditional {
        mean: numer / precision,
        var: 1.0 / precision,
    }
}

pub fn update_xi<R: Rng + ?Sized>(
    h: &[f64],
    data: &Dataset,
    params: &Params,
    prior: &PriorSpec,
    rng: &mut R,
) -> f64 {
    xi_conditional(h, data, params, prior).sample(rng)
}

/// `IG(shape + T/2, scale + Σ (ln RV_t − ξ − h_t)² / 2)`.
pub fn sigma_u_sq_conditional(
    h: &[f64],
    data: &Dataset,
    xi: f64,
    prior: &PriorSpec,
) -> InvGammaConditional {
    let ss: f64 = data
        .log_rv()
        .iter()
        .zip(h)
        .map(|(l, x)| (l - xi - x).powi(2))
        .sum();
    InvGammaConditional {
        shape: prior.var_shape + h.len() as f64 / 2.0,
        scale: prior.var_scale + ss / 2.0,
    }
}

pub fn update_sigma_u_sq<R: Rng + ?Sized>(
    h: &[f64],
    data: &Dataset,
    xi: f64,
    prior: &PriorSpec,
    rng: &mut R,
) -> f64 {
    sigma_u_sq_conditional(h, data, xi, prior).sample(rng)
}

/// Sum of squared AR(1) innovations including the stationary initial term.
fn ar_sum_of_squares(h: &[f64], phi: f64, mu: f64) -> f64 {
    let init = (1.0 - phi * phi) * (h[0] - mu).powi(2);
    init + h
        .windows(2)
        .map(|w| (w[1] - mu - phi * (w[0] - mu)).powi(2))
        .sum::<f64>()
}

/// `IG(shape + T/2, scale + [(1−φ²)(h_1−μ)² + Σ (h_{t+1} − μ − φ(h_t − μ))²] / 2)`.
pub fn sigma_eta_sq_conditional(h: &[f64], params: &Params, prior: &PriorSpec) -> InvGammaConditional {
    InvGammaConditional {
        shape: prior.var_shape + h.len() as f64 / 2.0,
        scale: prior.var_scale + ar_sum_of_squares(h, params.phi, params.mu) / 2.0,
    }
}

pub fn update_sigma_eta_sq<R: Rng + ?Sized>(
    h: &[f64],
    params: &Params,
    prior: &PriorSpec,
    rng: &mut R,
) -> f64 {
    sigma_eta_sq_conditional(h, params, prior).sample(rng)
}

/// Sufficient statistics of the `φ` full conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiStats {
    /// `(h_1 − μ)²`
    pub x0_sq: f64,
    /// `Σ_{t<T} (h_t − μ)²`
    pub sxx: f64,
    /// `Σ_{t<T} (h_t − μ)(h_{t+1} − μ)`
    pub sxy: f64,
    /// `Σ_{t<T} (h_{t+1} − μ)²`
    pub syy: f64,
    pub sigma_eta_sq: f64,
}

impl PhiStats {
    pub fn new(h: &[f64], params: &Params) -> Self {
        let mu = params.mu;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for w in h.windows(2) {
            let (x, y) = (w[0] - mu, w[1] - mu);
            sxx += x * x;
            sxy += x * y;
            syy += y * y;
        }
        PhiStats {
            x0_sq: (h[0] - mu).powi(2),
            sxx,
            sxy,
            syy,
            sigma_eta_sq: params.sigma_eta_sq,
        }
    }

    /// Conditional least-squares estimate and its standard deviation.
    pub fn proposal(&self) -> Option<(f64, f64)> {
        (self.sxx > 0.0).then(|| (self.sxy / self.sxx, (self.sigma_eta_sq / self.sxx).sqrt()))
    }

    /// Log full conditional of `φ` up to a constant; `−∞` outside `(−1, 1)`.
    pub fn log_conditional(&self, phi: f64, prior: &PriorSpec) -> f64 {
        if phi.abs() >= 1.0 {
            return f64::NEG_INFINITY;
        }
        let stat = 1.0 - phi * phi;
        let ss = self.syy - 2.0 * phi * self.sxy + phi * phi * self.sxx;
        0.5 * stat.ln() - (stat * self.x0_sq + ss) / (2.0 * self.sigma_eta_sq)
            + prior.log_phi_prior(phi)
    }

    /// Log Metropolis-Hastings ratio for moving `current → proposed` under the
    /// independence proposal.
    pub fn log_acceptance(&self, current: f64, proposed: f64, prior: &PriorSpec) -> f64 {
        let Some((centre, sd)) = self.proposal() else {
            return f64::NEG_INFINITY;
        };
        let log_q = |x: f64| -0.5 * ((x - centre) / sd).powi(2);
        (self.log_conditional(proposed, prior) - self.log_conditional(current, prior))
            - (log_q(proposed) - log_q(current))
    }
}

/// Metropolis update of `φ`. Returns the new value and whether it moved.
pub fn update_phi<R: Rng + ?Sized>(
    h: &[f64],
    params: &Params,
    prior: &PriorSpec,
    rng: &mut R,
) -> (f64, bool) {
    let stats = PhiStats::new(h, params);
    let z = rng::standard_normal(rng);
    let u: f64 = rng.random();
    let Some((centre, sd)) = stats.proposal() else {
        return (params.phi, false);
    };
    let proposed = centre + sd * z;
    if proposed.abs() >= 1.0 {
        return (params.phi, false);
    }
    let log_a = stats.log_acceptance(params.phi, proposed, prior);
    if log_a >= 0.0 || u < log_a.exp() {
        (proposed, true)
    } else {
        (params.phi, false)
    }
}

/// Starting point anchored on the realized variances: `h_t = ln RV_t`,
/// `φ = 0.9`, `μ = mean(h)`, `ξ = 0`, `σ_η² = σ_u² = 0.1`.
pub fn initial_state(data: &Dataset) -> (Params, Vec<f64>) {
    let h = data.log_rv().to_vec();
    let mu = h.iter().sum::<f64>() / h.len() as f64;
    (
        Params {
            phi: 0.9,
            mu,
            xi: 0.0,
            sigma_eta_sq: 0.1,
            sigma_u_sq: 0.1,
        },
        h,
    )
}

/// Runs a chain from `(init, h0)`.
pub fn run_chain(
    data: &Dataset,
    init: Params,
    h0: Vec<f64>,
    prior: &PriorSpec,
    config: &SamplerConfig,
    exec: &Executor,
) -> Result<ChainOutput, SamplerError> {
    config.validate()?;
    prior.validate()?;
    init.validate()?;
    if h0.len() != data.len() {
        return Err(ModelError::LengthMismatch {
            expected: data.len(),
            found: h0.len(),
        }
        .into());
    }
    let model_data = ModelData::new(data);
    let leapfrog = Leapfrog::new(exec.clone());
    let mut rng = rng::seeded(config.seed);
    let mut params = init;
    let mut h = h0;
    let mut out = ChainOutput::default();
    let mut window: VecDeque<bool> = VecDeque::with_capacity(STORM_WINDOW);
    let mut window_divergent = 0usize;
    let total = config.total_sweeps();

    if config.latent_warmup > 0 {
        let posterior = Posterior::new(&model_data, &params)?;
        for _ in 0..config.latent_warmup {
            hmc_update_volatility(&mut h, &posterior, &config.md, &leapfrog, &mut rng);
        }
    }

    for sweep in 1..=total {
        let posterior = Posterior::new(&model_data, &params)?;
        let hmc = hmc_update_volatility(&mut h, &posterior, &config.md, &leapfrog, &mut rng);

        let d = hmc.is_divergent();
        window.push_back(d);
        window_divergent += d as usize;
        if window.len() > STORM_WINDOW {
            window_divergent -= window.pop_front().unwrap_or(false) as usize;
        }
        if window.len() == STORM_WINDOW && 2 * window_divergent > STORM_WINDOW {
            return Err(SamplerError::DivergenceStorm {
                sweep,
                divergent: window_divergent,
                window: STORM_WINDOW,
            });
        }
        out.divergent += d as usize;
        out.hmc_accepted += hmc.accept as usize;

        params.mu = update_mu(&h, &params, prior, &mut rng);
        let (phi, moved) = update_phi(&h, &params, prior, &mut rng);
        params.phi = phi;
        out.phi_accepted += moved as usize;
        params.sigma_eta_sq = update_sigma_eta_sq(&h, &params, prior, &mut rng);
        params.xi = update_xi(&h, data, &params, prior, &mut rng);
        params.sigma_u_sq = update_sigma_u_sq(&h, data, params.xi, prior, &mut rng);

        if sweep > config.n_burnin && (sweep - config.n_burnin).is_multiple_of(config.thin) {
            out.samples.push(ChainSample {
                iter: sweep,
                params,
                accept: hmc.accept,
                delta_h: hmc.delta_h,
                latent: config.store_latent.then(|| h.clone()),
            });
        }
    }
    out.sweeps = total;
    out.final_latent = h;
    Ok(out)
}

/// Runs HMC on `h` alone with `params` held fixed. `on_sweep` sees the path
/// and outcome after every sweep; the final path is returned.
pub fn run_volatility_only<R: Rng + ?Sized>(
    data: &Dataset,
    params: &Params,
    h0: Vec<f64>,
    md: &MdConfig,
    sweeps: usize,
    rng: &mut R,
    mut on_sweep: impl FnMut(&[f64], &HmcOutcome),
) -> Result<Vec<f64>, SamplerError> {
    let model_data = ModelData::new(data);
    let posterior = Posterior::new(&model_data, params)?;
    let leapfrog = Leapfrog::default();
    let mut h = h0;
    for _ in 0..sweeps {
        let o = hmc_update_volatility(&mut h, &posterior, md, &leapfrog, rng);
        on_sweep(&h, &o);
    }
    Ok(h)
}
