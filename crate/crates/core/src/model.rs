//! The realized stochastic volatility model.
//!
//! ```text
//! y_t      = exp(h_t / 2) ε_t,          ε_t ~ N(0, 1)
//! ln RV_t  = ξ + h_t + u_t,             u_t ~ N(0, σ_u²)
//! h_{t+1}  = μ + φ (h_t − μ) + η_t,     η_t ~ N(0, σ_η²)
//! h_1      ~ N(μ, σ_η² / (1 − φ²))
//! ```
//!
//! [`Posterior`] evaluates the log density of the latent path `h` given the
//! data and the static parameters, and the gradient of its negative. The
//! `−ln(2π)/2` constants are dropped everywhere; every other normalization
//! term is kept because the parameter updates depend on it.

use chrono::{Days, NaiveDate};

use crate::exec::Executor;
use crate::float::Real;

/// Latent values beyond this magnitude mark a diverged trajectory.
pub const H_LIMIT: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("series length {0} is too short, at least 2 observations are required")]
    TooShort(usize),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value in {what} at index {index}")]
    NonFiniteInput { what: &'static str, index: usize },
    #[error("realized variance must be positive, found {value} at index {index}")]
    NonPositiveRv { index: usize, value: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("numeric overflow evaluating the posterior")]
    NonFinite,
}

/// Observed daily returns and realized variances.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dates: Vec<String>,
    returns: Vec<f64>,
    rv: Vec<f64>,
    log_rv: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from returns and (positive) realized variances.
    /// Dates default to consecutive calendar days from 2000-01-01.
    pub fn new(returns: Vec<f64>, rv: Vec<f64>) -> Result<Self, ModelError> {
        let dates = default_dates(returns.len());
        Dataset::with_dates(dates, returns, rv)
    }

    pub fn with_dates(
        dates: Vec<String>,
        returns: Vec<f64>,
        rv: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let t = returns.len();
        if t < 2 {
            return Err(ModelError::TooShort(t));
        }
        for (found, _) in [(rv.len(), "rv"), (dates.len(), "dates")] {
            if found != t {
                return Err(ModelError::LengthMismatch { expected: t, found });
            }
        }
        if let Some(index) = returns.iter().position(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteInput {
                what: "returns",
                index,
            });
        }
        if let Some(index) = rv.iter().position(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteInput { what: "rv", index });
        }
        if let Some(index) = rv.iter().position(|&x| x <= 0.0) {
            return Err(ModelError::NonPositiveRv {
                index,
                value: rv[index],
            });
        }
        let log_rv = rv.iter().map(|x| x.ln()).collect();
        Ok(Dataset {
            dates,
            returns,
            rv,
            log_rv,
        })
    }

    /// Builds a dataset from log realized variances. The stored `ln RV_t` is
    /// recomputed from `exp(ln RV_t)` so that persisted files round-trip.
    pub fn from_log_rv(returns: Vec<f64>, log_rv: &[f64]) -> Result<Self, ModelError> {
        let rv = log_rv.iter().map(|x| x.exp()).collect();
        Dataset::new(returns, rv)
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn rv(&self) -> &[f64] {
        &self.rv
    }

    pub fn log_rv(&self) -> &[f64] {
        &self.log_rv
    }
}

/// ISO-8601 dates for `n` consecutive days starting 2000-01-01.
pub fn default_dates(n: usize) -> Vec<String> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    (0..n)
        .map(|i| {
            start
                .checked_add_days(Days::new(i as u64))
                .map(|d| d.format("%Y-%m-%d").to_string())
                .unwrap_or_else(|| format!("day-{i}"))
        })
        .collect()
}

/// Static model parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Params {
    pub phi: f64,
    pub mu: f64,
    pub xi: f64,
    pub sigma_eta_sq: f64,
    pub sigma_u_sq: f64,
}

impl Params {
    pub const NAMES: [&'static str; 5] = ["phi", "mu", "xi", "sigma_eta_sq", "sigma_u_sq"];

    pub fn validate(&self) -> Result<(), ModelError> {
        let all = self.as_array();
        if let Some(i) = all.iter().position(|x| !x.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "{} is not finite",
                Params::NAMES[i]
            )));
        }
        if self.phi.abs() >= 1.0 {
            return Err(ModelError::InvalidParams(format!(
                "|phi| must be < 1, got {}",
                self.phi
            )));
        }
        if self.sigma_eta_sq <= 0.0 || self.sigma_u_sq <= 0.0 {
            return Err(ModelError::InvalidParams(
                "variances must be positive".to_string(),
            ));
        }
        Ok(())
    }

    /// Values in the order of [`Params::NAMES`].
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.phi,
            self.mu,
            self.xi,
            self.sigma_eta_sq,
            self.sigma_u_sq,
        ]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Params {
            phi: v[0],
            mu: v[1],
            xi: v[2],
            sigma_eta_sq: v[3],
            sigma_u_sq: v[4],
        }
    }
}

/// Latent path and conjugate momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState<F = f64> {
    pub h: Vec<F>,
    pub p: Vec<F>,
}

impl<F: Real> PhaseState<F> {
    pub fn new(h: Vec<F>, p: Vec<F>) -> Result<Self, ModelError> {
        if h.len() != p.len() {
            return Err(ModelError::LengthMismatch {
                expected: h.len(),
                found: p.len(),
            });
        }
        Ok(PhaseState { h, p })
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.p).all(|x| x.is_finite())
    }

    /// Flips the sign of every momentum.
    pub fn negate_momenta(&mut self) {
        self.p.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Observation arrays converted to the working precision.
#[derive(Debug, Clone)]
pub struct ModelData<F> {
    y_sq: Vec<F>,
    log_rv: Vec<F>,
}

impl<F: Real> ModelData<F> {
    pub fn new(data: &Dataset) -> Self {
        ModelData {
            y_sq: data.returns.iter().map(|y| F::of(y * y)).collect(),
            log_rv: data.log_rv.iter().map(|&x| F::of(x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.y_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_sq.is_empty()
    }
}

/// Conditional posterior of the latent path for fixed parameters.
#[derive(Debug, Clone)]
pub struct Posterior<'a, F> {
    data: &'a ModelData<F>,
    phi: F,
    mu: F,
    xi: F,
    inv_eta: F,
    inv_u: F,
    stationary: F,
    log_norm: F,
}

impl<'a, F: Real> Posterior<'a, F> {
    pub fn new(data: &'a ModelData<F>, params: &Params) -> Result<Self, ModelError> {
        params.validate()?;
        if data.len() < 2 {
            return Err(ModelError::TooShort(data.len()));
        }
        let t = data.len() as f64;
        let stationary = 1.0 - params.phi * params.phi;
        let log_norm = -0.5 * t * params.sigma_u_sq.ln()
            - 0.5 * (params.sigma_eta_sq / stationary).ln()
            - 0.5 * (t - 1.0) * params.sigma_eta_sq.ln();
        Ok(Posterior {
            data,
            phi: F::of(params.phi),
            mu: F::of(params.mu),
            xi: F::of(params.xi),
            inv_eta: F::of(1.0 / params.sigma_eta_sq),
            inv_u: F::of(1.0 / params.sigma_u_sq),
            stationary: F::of(stationary),
            log_norm: F::of(log_norm),
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn check_len(&self, n: usize) -> Result<(), ModelError> {
        if n != self.len() {
            return Err(ModelError::LengthMismatch {
                expected: self.len(),
                found: n,
            });
        }
        Ok(())
    }

    /// Log-density contribution attributed to site `t`: its observation
    /// terms plus the transition into it (or the stationary term at `t = 0`).
    #[inline(always)]
    fn site_log_density(&self, t: usize, h: &[F]) -> F {
        let half = F::of(0.5);
        let ht = h[t];
        let resid_rv = self.data.log_rv[t] - self.xi - ht;
        let obs = -half * ht
            - half * self.data.y_sq[t] * (-ht).exp()
            - half * resid_rv * resid_rv * self.inv_u;
        let dyn_term = if t == 0 {
            let d = ht - self.mu;
            -half * self.stationary * d * d * self.inv_eta
        } else {
            let e = ht - self.mu - self.phi * (h[t - 1] - self.mu);
            -half * e * e * self.inv_eta
        };
        obs + dyn_term
    }

    /// `∂(−ln f)/∂h_t`.
    #[inline(always)]
    pub fn grad_at(&self, t: usize, h: &[F]) -> F {
        let half = F::of(0.5);
        let n = h.len();
        let ht = h[t];
        let dt = ht - self.mu;
        let mut g = half - half * self.data.y_sq[t] * (-ht).exp()
            + (self.xi + ht - self.data.log_rv[t]) * self.inv_u;
        g = g + if t == 0 {
            self.stationary * dt * self.inv_eta
        } else {
            (dt - self.phi * (h[t - 1] - self.mu)) * self.inv_eta
        };
        if t + 1 < n {
            let next = h[t + 1] - self.mu - self.phi * dt;
            g = g - self.phi * next * self.inv_eta;
        }
        g
    }

    /// `ln f(h, θ)`; the sum over sites uses the executor's fixed partition.
    pub fn log_density(&self, h: &[F], exec: &Executor) -> F {
        debug_assert_eq!(h.len(), self.len());
        let body = exec.chunked_sum(h.len(), |r| {
            r.fold(F::zero(), |acc, t| acc + self.site_log_density(t, h))
        });
        body + self.log_norm
    }

    /// Writes the gradient of `−ln f` into `out`.
    pub fn gradient_into(&self, h: &[F], out: &mut [F], exec: &Executor) {
        debug_assert_eq!(h.len(), out.len());
        exec.map_chunks_mut(out, |off, c| {
            for (j, g) in c.iter_mut().enumerate() {
                *g = self.grad_at(off + j, h);
            }
        });
    }

    pub fn kinetic(&self, p: &[F], exec: &Executor) -> F {
        let half = F::of(0.5);
        exec.chunked_sum(p.len(), |r| {
            p[r].iter().fold(F::zero(), |acc, &x| acc + half * x * x)
        })
    }

    /// `H(p, h) = ½ Σ p² − ln f(h, θ)`.
    pub fn hamiltonian(&self, state: &PhaseState<F>, exec: &Executor) -> F {
        self.kinetic(&state.p, exec) - self.log_density(&state.h, exec)
    }

    pub fn try_log_density(&self, h: &[F], exec: &Executor) -> Result<F, ModelError> {
        self.check_len(h.len())?;
        finite(self.log_density(h, exec))
    }

    pub fn try_hamiltonian(&self, state: &PhaseState<F>, exec: &Executor) -> Result<F, ModelError> {
        self.check_len(state.h.len())?;
        self.check_len(state.p.len())?;
        finite(self.hamiltonian(state, exec))
    }
}

fn finite<F: Real>(x: F) -> Result<F, ModelError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ModelError::NonFinite)
    }
}

/// `ln f(h, θ)` in double precision.
pub fn log_posterior(h: &[f64], params: &Params, data: &Dataset) -> Result<f64, ModelError> {
    let md = ModelData::new(data);
    Posterior::new(&md, params)?.try_log_density(h, &Executor::serial())
}

/// Gradient of `−ln f(h, θ)` with respect to `h`.
pub fn grad_neg_log_posterior(
    h: &[f64],
    params: &Params,
    data: &Dataset,
) -> Result<Vec<f64>, ModelError> {
    let md = ModelData::new(data);
    let post = Posterior::new(&md, params)?;
    post.check_len(h.len())?;
    let mut g = vec![0.0; h.len()];
    post.gradient_into(h, &mut g, &Executor::serial());
    if g.iter().all(|x| x.is_finite()) {
        Ok(g)
    } else {
        Err(ModelError::NonFinite)
    }
}

pub fn hamiltonian(state: &PhaseState, params: &Params, data: &Dataset) -> Result<f64, ModelError> {
    let md = ModelData::new(data);
    Posterior::new(&md, params)?.try_hamiltonian(state, &Executor::serial())
}
