//! Synthetic data generation and realized-variance construction.

use crate::model::{default_dates, Dataset, ModelError, Params};
use crate::rng;

/// Value substituted for a day whose realized variance is zero.
pub const RV_FLOOR: f64 = 1e-12;

/// Simulated data together with the latent path that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub params: Params,
    pub latent: Vec<f64>,
    pub dataset: Dataset,
}

/// Draws a series of length `t` from the model.
///
/// The latent path is drawn first (stationary start, then the AR(1)
/// recursion), followed by all return shocks and then all RV noise.
pub fn simulate_rsv(params: &Params, t: usize, seed: u64) -> Result<SyntheticTruth, ModelError> {
    params.validate()?;
    if t < 2 {
        return Err(ModelError::TooShort(t));
    }
    let mut rng = rng::seeded(seed);
    let eta_sd = params.sigma_eta_sq.sqrt();
    let stationary_sd = (params.sigma_eta_sq / (1.0 - params.phi * params.phi)).sqrt();

    let mut latent = Vec::with_capacity(t);
    latent.push(params.mu + stationary_sd * rng::standard_normal(&mut rng));
    for i in 1..t {
        let prev = latent[i - 1];
        latent.push(params.mu + params.phi * (prev - params.mu) + eta_sd * rng::standard_normal(&mut rng));
    }
    let returns: Vec<f64> = latent
        .iter()
        .map(|h| (h / 2.0).exp() * rng::standard_normal(&mut rng))
        .collect();
    let u_sd = params.sigma_u_sq.sqrt();
    let log_rv: Vec<f64> = latent
        .iter()
        .map(|h| params.xi + h + u_sd * rng::standard_normal(&mut rng))
        .collect();
    let dataset = Dataset::from_log_rv(returns, &log_rv)?;
    Ok(SyntheticTruth {
        params: *params,
        latent,
        dataset,
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PanelError {
    #[error("intraday panel has no days")]
    Empty,
    #[error("day {day} has no intraday returns")]
    EmptyDay { day: usize },
    #[error("non-finite intraday return on day {day}, position {index}")]
    NonFinite { day: usize, index: usize },
    #[error("{dates} dates for {days} days")]
    DateCount { dates: usize, days: usize },
}

/// Intraday log-returns grouped by day.
#[derive(Debug, Clone, PartialEq)]
pub struct IntradayPanel {
    dates: Vec<String>,
    days: Vec<Vec<f64>>,
}

impl IntradayPanel {
    pub fn new(days: Vec<Vec<f64>>) -> Result<Self, PanelError> {
        let dates = default_dates(days.len());
        IntradayPanel::with_dates(dates, days)
    }

    pub fn with_dates(dates: Vec<String>, days: Vec<Vec<f64>>) -> Result<Self, PanelError> {
        if days.is_empty() {
            return Err(PanelError::Empty);
        }
        if dates.len() != days.len() {
            return Err(PanelError::DateCount {
                dates: dates.len(),
                days: days.len(),
            });
        }
        for (day, r) in days.iter().enumerate() {
            if r.is_empty() {
                return Err(PanelError::EmptyDay { day });
            }
            if let Some(index) = r.iter().position(|x| !x.is_finite()) {
                return Err(PanelError::NonFinite { day, index });
            }
        }
        Ok(IntradayPanel { dates, days })
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn day(&self, t: usize) -> &[f64] {
        &self.days[t]
    }

    /// Sum of intraday returns per day (the daily close-to-close return).
    pub fn daily_returns(&self) -> Vec<f64> {
        self.days.iter().map(|d| d.iter().sum()).collect()
    }
}

/// Daily realized variances and the days that had to be floored.
#[derive(Debug, Clone, PartialEq)]
pub struct RvSeries {
    pub rv: Vec<f64>,
    /// Indices of days whose squared-return sum was zero.
    pub floored: Vec<usize>,
}

/// `RV_t = Σ_j r_{t,j}²`. Days summing to zero are floored at [`RV_FLOOR`]
/// and reported, since `ln RV_t` is otherwise undefined.
pub fn compute_rv(panel: &IntradayPanel) -> RvSeries {
    let mut floored = Vec::new();
    let rv = panel
        .days
        .iter()
        .enumerate()
        .map(|(t, day)| {
            let s: f64 = day.iter().map(|r| r * r).sum();
            if s > 0.0 {
                s
            } else {
                log::warn!("day {t} ({}) has zero realized variance, flooring at {RV_FLOOR:e}", panel.dates[t]);
                floored.push(t);
                RV_FLOOR
            }
        })
        .collect();
    RvSeries { rv, floored }
}

/// Builds a model dataset from an intraday panel: daily return is the sum
/// of intraday returns, daily RV the squared-return sum.
pub fn dataset_from_panel(panel: &IntradayPanel) -> Result<Dataset, ModelError> {
    let rv = compute_rv(panel).rv;
    Dataset::with_dates(panel.dates.clone(), panel.daily_returns(), rv)
}
