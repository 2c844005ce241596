//! Chain diagnostics: acceptance, the `⟨e^{−ΔH}⟩ = 1` identity,
//! integrated autocorrelation time, effective sample size and posterior
//! summaries.

use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::model::Params;
use crate::sampler::ChainSample;

/// Minimum series length for autocorrelation estimates.
pub const MIN_ACF_LEN: usize = 100;

/// Sokal window constant: the window is the first lag `M` with `M ≥ c·τ(M)`.
pub const WINDOW_C: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("chain is empty")]
    EmptyChain,
    #[error("need at least {needed} samples, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("malformed summary CSV at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub fn acceptance_rate(chain: &[ChainSample]) -> Result<f64, DiagnosticsError> {
    if chain.is_empty() {
        return Err(DiagnosticsError::EmptyChain);
    }
    Ok(chain.iter().filter(|s| s.accept).count() as f64 / chain.len() as f64)
}

/// Mean of `e^{−ΔH}` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpDeltaH {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    /// Divergent proposals; each contributes `e^{−∞} = 0` to the mean.
    pub n_divergent: usize,
}

impl ExpDeltaH {
    /// Distance of the mean from 1 in standard errors.
    pub fn z_score(&self) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == 1.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - 1.0) / self.std_error
        }
    }
}

/// `⟨e^{−ΔH}⟩` over the chain. The standard error is corrected for
/// autocorrelation when at least [`MIN_ACF_LEN`] samples are available.
pub fn mean_exp_neg_dh(chain: &[ChainSample]) -> Result<ExpDeltaH, DiagnosticsError> {
    if chain.len() < 2 {
        return Err(DiagnosticsError::TooFew {
            needed: 2,
            got: chain.len(),
        });
    }
    let xs: Vec<f64> = chain.iter().map(|s| (-s.delta_h).exp()).collect();
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(DiagnosticsError::NonFinite);
    }
    let n = xs.len();
    let (mean, var) = mean_var(&xs);
    let tau = if n >= MIN_ACF_LEN {
        integrated_autocorrelation(&xs)?
    } else {
        0.5
    };
    Ok(ExpDeltaH {
        mean,
        std_error: (var * 2.0 * tau / n as f64).sqrt(),
        n,
        n_divergent: chain.iter().filter(|s| s.is_divergent()).count(),
    })
}

/// Sample mean and unbiased variance (variance 0 for a single point).
fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    // shifted by the first point so constant series are exact
    let x0 = xs[0];
    let mean = x0 + xs.iter().map(|x| x - x0).sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Normalized autocorrelation `ρ_0..ρ_{N−1}` via zero-padded FFT.
/// Returns `None` for a constant series.
pub fn autocorrelation(series: &[f64]) -> Option<Vec<f64>> {
    let n = series.len();
    if series.iter().all(|&x| x == series[0]) {
        return None;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        return None;
    }
    Some(buf[..n].iter().map(|c| c.re / c0).collect())
}

/// Integrated autocorrelation time `τ_int = ½ + Σ_{k=1}^{M} ρ_k` with the
/// self-consistent window `M` = first lag where `M ≥ 5 τ_int(M)`.
/// Clamped below at ½; a constant series gives ½.
pub fn integrated_autocorrelation(series: &[f64]) -> Result<f64, DiagnosticsError> {
    if series.len() < MIN_ACF_LEN {
        return Err(DiagnosticsError::TooFew {
            needed: MIN_ACF_LEN,
            got: series.len(),
        });
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(DiagnosticsError::NonFinite);
    }
    let Some(rho) = autocorrelation(series) else {
        return Ok(0.5);
    };
    let mut tau = 0.5;
    for (m, r) in rho.iter().enumerate().skip(1) {
        tau += r;
        if m as f64 >= WINDOW_C * tau {
            break;
        }
    }
    Ok(tau.max(0.5))
}

/// `N / (2 τ_int)`, never more than `N`.
pub fn ess(series: &[f64]) -> Result<f64, DiagnosticsError> {
    let tau = integrated_autocorrelation(series)?;
    let n = series.len() as f64;
    Ok((n / (2.0 * tau)).min(n))
}

/// Linear-interpolation quantile of sorted data (`q ∈ [0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q95: f64,
    /// `None` when the chain is shorter than [`MIN_ACF_LEN`].
    pub tau_int: Option<f64>,
    pub ess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub n_samples: usize,
    pub params: Vec<ParamSummary>,
    pub acceptance_rate: f64,
    pub n_divergent: usize,
    /// `None` when fewer than two samples are stored.
    pub exp_neg_dh: Option<ExpDeltaH>,
}

impl ChainSummary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

pub fn summarize_series(name: &str, series: &[f64]) -> Result<ParamSummary, DiagnosticsError> {
    if series.is_empty() {
        return Err(DiagnosticsError::EmptyChain);
    }
    let (mean, var) = mean_var(series);
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (tau_int, ess) = if series.len() >= MIN_ACF_LEN {
        let tau = integrated_autocorrelation(series)?;
        let n = series.len() as f64;
        (Some(tau), Some((n / (2.0 * tau)).min(n)))
    } else {
        (None, None)
    };
    Ok(ParamSummary {
        name: name.to_string(),
        mean,
        sd: var.sqrt(),
        q05: quantile_sorted(&sorted, 0.05),
        q95: quantile_sorted(&sorted, 0.95),
        tau_int,
        ess,
    })
}

pub fn summarize(chain: &[ChainSample]) -> Result<ChainSummary, DiagnosticsError> {
    if chain.is_empty() {
        return Err(DiagnosticsError::EmptyChain);
    }
    let params = Params::NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let series: Vec<f64> = chain.iter().map(|s| s.params.as_array()[i]).collect();
            summarize_series(name, &series)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ChainSummary {
        n_samples: chain.len(),
        params,
        acceptance_rate: acceptance_rate(chain)?,
        n_divergent: chain.iter().filter(|s| s.is_divergent()).count(),
        exp_neg_dh: mean_exp_neg_dh(chain).ok(),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(crate::io::fmt_real).unwrap_or_else(|| "NA".to_string())
}

fn fmt_opt_short(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.1}")).unwrap_or_else(|| "-".to_string())
}

/// Aligned text table for terminals.
pub fn render_table(s: &ChainSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>12} {:>12} {:>12} {:>12} {:>9} {:>9}",
        "parameter", "mean", "sd", "q05", "q95", "tau_int", "ess"
    );
    for p in &s.params {
        let _ = writeln!(
            out,
            "{:<14} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>9} {:>9}",
            p.name,
            p.mean,
            p.sd,
            p.q05,
            p.q95,
            fmt_opt_short(p.tau_int),
            fmt_opt_short(p.ess)
        );
    }
    let _ = writeln!(out, "samples          {}", s.n_samples);
    let _ = writeln!(out, "acceptance rate  {:.4}", s.acceptance_rate);
    let _ = writeln!(out, "divergent        {}", s.n_divergent);
    if let Some(e) = &s.exp_neg_dh {
        let _ = writeln!(
            out,
            "<exp(-dH)>       {:.5} +/- {:.5} (z = {:.2})",
            e.mean,
            e.std_error,
            e.z_score()
        );
    }
    out
}

pub const SUMMARY_HEADER: [&str; 7] = ["parameter", "mean", "sd", "q05", "q95", "tau_int", "ess"];

/// Machine-readable summary: one row per parameter, then `key,value`
/// rows prefixed `@` for the chain-level statistics.
pub fn summary_to_csv(s: &ChainSummary) -> String {
    use crate::io::fmt_real;
    let mut out = SUMMARY_HEADER.join(",");
    out.push('\n');
    for p in &s.params {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.name,
            fmt_real(p.mean),
            fmt_real(p.sd),
            fmt_real(p.q05),
            fmt_real(p.q95),
            opt(p.tau_int),
            opt(p.ess)
        );
    }
    let _ = writeln!(out, "@n_samples,{},,,,,", s.n_samples);
    let _ = writeln!(out, "@acceptance_rate,{},,,,,", fmt_real(s.acceptance_rate));
    let _ = writeln!(out, "@n_divergent,{},,,,,", s.n_divergent);
    if let Some(e) = &s.exp_neg_dh {
        let _ = writeln!(
            out,
            "@exp_neg_dh,{},{},{},,,",
            fmt_real(e.mean),
            fmt_real(e.std_error),
            e.n
        );
    }
    out
}

/// Inverse of [`summary_to_csv`].
pub fn summary_from_csv(text: &str) -> Result<ChainSummary, DiagnosticsError> {
    let perr = |line: usize, msg: &str| DiagnosticsError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SUMMARY_HEADER.join(",") => {}
        _ => return Err(perr(1, "unexpected header")),
    }
    let num = |s: &str, line: usize| s.parse::<f64>().map_err(|_| perr(line, &format!("bad number '{s}'")));
    let opt_num = |s: &str, line: usize| -> Result<Option<f64>, DiagnosticsError> {
        if s == "NA" {
            Ok(None)
        } else {
            num(s, line).map(Some)
        }
    };
    let mut params = Vec::new();
    let (mut n_samples, mut acc, mut n_div, mut edh) = (None, None, None, None);
    for (i, line) in lines {
        let ln = i + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != SUMMARY_HEADER.len() {
            return Err(perr(ln, "wrong number of fields"));
        }
        match f[0] {
            "@n_samples" => n_samples = Some(f[1].parse::<usize>().map_err(|_| perr(ln, "bad count"))?),
            "@acceptance_rate" => acc = Some(num(f[1], ln)?),
            "@n_divergent" => n_div = Some(f[1].parse::<usize>().map_err(|_| perr(ln, "bad count"))?),
            "@exp_neg_dh" => {
                edh = Some((num(f[1], ln)?, num(f[2], ln)?, f[3].parse::<usize>().map_err(|_| perr(ln, "bad count"))?))
            }
            name => params.push(ParamSummary {
                name: name.to_string(),
                mean: num(f[1], ln)?,
                sd: num(f[2], ln)?,
                q05: num(f[3], ln)?,
                q95: num(f[4], ln)?,
                tau_int: opt_num(f[5], ln)?,
                ess: opt_num(f[6], ln)?,
            }),
        }
    }
    let n_divergent = n_div.ok_or_else(|| perr(0, "missing @n_divergent"))?;
    Ok(ChainSummary {
        n_samples: n_samples.ok_or_else(|| perr(0, "missing @n_samples"))?,
        params,
        acceptance_rate: acc.ok_or_else(|| perr(0, "missing @acceptance_rate"))?,
        n_divergent,
        exp_neg_dh: edh.map(|(mean, std_error, n)| ExpDeltaH {
            mean,
            std_error,
            n,
            n_divergent,
        }),
    })
}
