//! Single-device availability with timeouts.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AvailError {
    #[error("invalid availability parameters: {0}")]
    Invalid(String),
    #[error("no sign change of the timeout equation on [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate data: all durations are equal")]
    Degenerate,
    #[error("bad sample on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityParams {
    /// death rate per hour
    pub lambda: f64,
    pub t_up: f64,
    pub t_down: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRates {
    pub lambda12: f64,
    pub lambda13: f64,
    pub lambda21: f64,
    /// probability an up period ends in death, `λ(t_up + t_down)`
    pub p13: f64,
}

impl AvailabilityParams {
    pub fn p_a(&self) -> f64 {
        self.t_up / (self.t_up + self.t_down)
    }

    pub fn p13(&self) -> f64 {
        self.lambda * (self.t_up + self.t_down)
    }

    fn validate(&self) -> Result<(), AvailError> {
        if !(self.lambda > 0.0 && self.t_up > 0.0 && self.t_down >= 0.0) {
            return Err(AvailError::Invalid(format!("need lambda > 0, t_up > 0, t_down >= 0; got {self:?}")));
        }
        if self.p13() > 1.0 {
            return Err(AvailError::Invalid(format!("p13 = {} exceeds 1", self.p13())));
        }
        Ok(())
    }
}

pub fn node_rates(p: &AvailabilityParams) -> Result<NodeRates, AvailError> {
    p.validate()?;
    let p_a = p.p_a();
    let lambda12 = (p_a - p.lambda * p.t_up) / (p.t_up * p_a);
    if lambda12 < -1e-15 / p.t_up {
        return Err(AvailError::Invalid(format!("lambda12 = {lambda12} is negative")));
    }
    Ok(NodeRates {
        lambda12: lambda12.max(0.0),
        lambda13: p.lambda / p_a,
        lambda21: if p.t_down > 0.0 { 1.0 / p.t_down } else { f64::INFINITY },
        p13: p.p13(),
    })
}

/// `E[Y_α]`, the expected time until a device is declared dead when
/// downtimes longer than `α t_down` count as deaths.
pub fn expected_timeout_life(alpha: f64, p: &AvailabilityParams) -> Result<f64, AvailError> {
    p.validate()?;
    if !(alpha >= 0.0) {
        return Err(AvailError::Invalid(format!("alpha must be nonnegative, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(p.t_up);
    }
    let p13 = p.p13();
    let e = (-alpha).exp();
    // α e^{-α} / (1 - e^{-α}) = α / (e^α - 1)
    let tail = if alpha > 700.0 { 0.0 } else { alpha / alpha.exp_m1() };
    let num = (1.0 - p13) * -(-alpha).exp_m1() * (p.t_up + p.t_down * (1.0 - tail));
    Ok(num / (p13 + (1.0 - p13) * e) + p.t_up)
}

/// Limit of [`expected_timeout_life`] as `α → ∞`.
pub fn expected_life_limit(p: &AvailabilityParams) -> f64 {
    let p13 = p.p13();
    (1.0 - p13) / p13 * (p.t_up + p.t_down) + p.t_up
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unknown {
    Alpha,
    TUp,
}

/// `E[Y_α] + α t_down - 1/λ`.
pub fn timeout_residual(alpha: f64, p: &AvailabilityParams) -> Result<f64, AvailError> {
    Ok(expected_timeout_life(alpha, p)? + alpha * p.t_down - 1.0 / p.lambda)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64, AvailError>) -> Result<f64, AvailError> {
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(AvailError::NoRoot { lo, hi });
    }
    let rising = fhi > 0.0;
    while (hi - lo) > 1e-10 * hi.abs().max(lo.abs()) {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves the timeout equation for `α` (with `p.t_up` fixed) or for `t_up`
/// (with `alpha` fixed; `p.t_up` is ignored).
pub fn solve_timeout_equation(p: &AvailabilityParams, alpha: f64, unknown: Unknown) -> Result<f64, AvailError> {
    match unknown {
        Unknown::Alpha => {
            p.validate()?;
            bisect(1e-6, 1e3, |a| timeout_residual(a, p))
        }
        Unknown::TUp => {
            if !(p.lambda > 0.0 && p.t_down >= 0.0) {
                return Err(AvailError::Invalid(format!("need lambda > 0 and t_down >= 0, got {p:?}")));
            }
            // p13 <= 1 caps t_up
            let hi = (1.0 / p.lambda - p.t_down).min(1e9);
            if hi <= 1e-3 {
                return Err(AvailError::NoRoot { lo: 1e-3, hi });
            }
            bisect(1e-3, hi, |t_up| timeout_residual(alpha, &AvailabilityParams { t_up, ..*p }))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialFit {
    pub p: f64,
    pub n_trials: u64,
    pub c_u: f64,
    pub mean_downtime_hours: f64,
    pub sse: f64,
}

pub const MIN_FIT_SAMPLES: usize = 30;

/// Mean downtime in hours implied by `C_u log10 d ~ Binomial(n, p)` with `d` in seconds,
/// taken as `10^{E[log10 d]}`.
pub fn binomial_mean_downtime_hours(p: f64, n: u64, c_u: f64) -> f64 {
    10f64.powf(n as f64 * p / c_u) / 3600.0
}

fn fit_sse(sorted_y: &[f64], n: u64, p: f64, c_u: f64) -> f64 {
    let dist = Binomial::new(p, n).expect("p in (0,1)");
    let total = sorted_y.len() as f64;
    let mut below = 0;
    (0..=n)
        .map(|x| {
            while below < sorted_y.len() && c_u * sorted_y[below] < x as f64 + 0.5 {
                below += 1;
            }
            let d = below as f64 / total - dist.cdf(x);
            d * d
        })
        .sum()
}

/// Fits `C_u log10(d) ~ Binomial(n, p)` to durations `d` in seconds.
///
/// For each `n` in 5..=30, `p` and `C_u` match the mean and variance of
/// `log10 d`; the `n` whose CDF is closest to the empirical one in least
/// squares wins.
pub fn fit_downtime_binomial(samples: &[f64]) -> Result<BinomialFit, AvailError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(AvailError::TooFewSamples { needed: MIN_FIT_SAMPLES, got: samples.len() });
    }
    if let Some(bad) = samples.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(AvailError::Invalid(format!("durations must be positive, got {bad}")));
    }
    let mut y: Vec<f64> = samples.iter().map(|d| d.log10()).collect();
    y.sort_by(f64::total_cmp);
    let count = y.len() as f64;
    let mean = y.iter().sum::<f64>() / count;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
    if var <= 1e-24 * mean.abs().max(1.0) {
        return Err(AvailError::Degenerate);
    }
    if mean <= 0.0 {
        return Err(AvailError::Invalid("mean log10 duration must be positive".into()));
    }
    let r = var / (mean * mean);
    let mut best: Option<BinomialFit> = None;
    for n in 5..=30u64 {
        let p = 1.0 / (1.0 + n as f64 * r);
        let c_u = n as f64 * p / mean;
        let sse = fit_sse(&y, n, p, c_u);
        if best.is_none_or(|f| sse < f.sse) {
            best = Some(BinomialFit {
                p,
                n_trials: n,
                c_u,
                mean_downtime_hours: binomial_mean_downtime_hours(p, n, c_u),
                sse,
            });
        }
    }
    Ok(best.expect("nonempty grid"))
}

/// One duration in seconds per line; `#` starts a comment line.
pub fn parse_downtime_samples(text: &str) -> Result<Vec<f64>, AvailError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        let v: f64 = field.parse().map_err(|e| AvailError::Parse { line: i + 1, msg: format!("{e}") })?;
        out.push(v);
    }
    Ok(out)
}
