//! Weibull model of carrier exchanges-before-failure.

use std::path::Path;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no samples in input")]
    Empty,
    #[error("need at least {needed} samples with 2 distinct values, got {got}")]
    Degenerate { needed: usize, got: usize },
    #[error("invalid Weibull parameters: shape {shape}, scale {scale}")]
    Invalid { shape: f64, scale: f64 },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub shape: f64,
    pub scale: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self, FitError> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(FitError::Invalid { shape, scale });
        }
        Ok(WeibullParams { shape, scale })
    }

    /// `y Γ(1 + 1/g)`.
    pub fn mean(&self) -> f64 {
        self.scale * gamma(1.0 + 1.0 / self.shape)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.scale * (-(-u).ln_1p()).powf(1.0 / self.shape)
    }

    /// Inverse-CDF draw rounded up to a whole number of exchanges.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        (self.quantile(u).ceil() as u64).max(1)
    }
}

pub fn weibull_mean(p: &WeibullParams) -> f64 {
    p.mean()
}

pub fn sample_weibull<R: Rng + ?Sized>(p: &WeibullParams, rng: &mut R) -> u64 {
    p.sample(rng)
}

/// One positive count per line; `#` starts a comment line. Only the first
/// comma-separated field is read.
pub fn parse_exchange_log(text: &str) -> Result<Vec<f64>, FitError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        let v: f64 = field.parse().map_err(|e| FitError::Parse { line: i + 1, msg: format!("{field:?}: {e}") })?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(FitError::Parse { line: i + 1, msg: format!("count must be positive, got {v}") });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(FitError::Empty);
    }
    Ok(out)
}

pub fn ingest_exchange_log(path: impl AsRef<Path>) -> Result<Vec<f64>, FitError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| FitError::Io { path: path.display().to_string(), source })?;
    parse_exchange_log(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlottingPosition {
    /// `(i - 0.3) / (N + 0.4)`
    #[default]
    MedianRank,
    /// `i / (N + 1)`
    MeanRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullFit {
    pub shape: f64,
    pub scale: f64,
    pub r2: f64,
    pub n_samples: usize,
    pub mean_exchanges: f64,
}

impl WeibullFit {
    pub fn params(&self) -> WeibullParams {
        WeibullParams { shape: self.shape, scale: self.scale }
    }
}

pub const MIN_WEIBULL_SAMPLES: usize = 10;

/// Least-squares line through `(ln t, ln(-ln(1 - W)))`; the slope is the
/// shape and the scale is `exp(-intercept / shape)`.
pub fn fit_weibull(samples: &[f64], positions: PlottingPosition) -> Result<WeibullFit, FitError> {
    let mut t: Vec<f64> = samples.to_vec();
    t.sort_by(f64::total_cmp);
    let n = t.len();
    if n < MIN_WEIBULL_SAMPLES || t[0] == t[n - 1] {
        return Err(FitError::Degenerate { needed: MIN_WEIBULL_SAMPLES, got: n });
    }
    if let Some(bad) = t.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(FitError::Parse { line: 0, msg: format!("count must be positive, got {bad}") });
    }
    let nf = n as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, v) in t.iter().enumerate() {
        let rank = (i + 1) as f64;
        let w = match positions {
            PlottingPosition::MedianRank => (rank - 0.3) / (nf + 0.4),
            PlottingPosition::MeanRank => rank / (nf + 1.0),
        };
        let x = v.ln();
        let y = (-(-w).ln_1p()).ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let cov = sxy - sx * sy / nf;
    let varx = sxx - sx * sx / nf;
    let vary = syy - sy * sy / nf;
    let slope = cov / varx;
    let intercept = (sy - slope * sx) / nf;
    let params = WeibullParams::new(slope, (-intercept / slope).exp())?;
    Ok(WeibullFit {
        shape: params.shape,
        scale: params.scale,
        r2: cov * cov / (varx * vary),
        n_samples: n,
        mean_exchanges: params.mean(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn draws(p: &WeibullParams, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| p.sample(&mut rng) as f64).collect()
    }

    #[test]
    fn parses_logs() {
        assert_eq!(parse_exchange_log("100\n200\n300").unwrap(), vec![100.0, 200.0, 300.0]);
        assert_eq!(parse_exchange_log("#header\n5\n").unwrap(), vec![5.0]);
        assert!(matches!(parse_exchange_log("1\n-5\n"), Err(FitError::Parse { line: 2, .. })));
        assert!(matches!(parse_exchange_log("# nothing\n"), Err(FitError::Empty)));
    }

    #[test]
    fn means() {
        let p = WeibullParams::new(0.76, 491669.0).unwrap();
        assert!((p.mean() - 579135.767).abs() < 1e-2, "{}", p.mean());
        assert_relative_eq!(WeibullParams::new(1.0, 1234.5).unwrap().mean(), 1234.5, max_relative = 1e-13);
        let a = WeibullParams::new(0.37, 525985.0).unwrap().mean();
        let b = WeibullParams::new(0.67, 525985.0).unwrap().mean();
        assert!((a / 2.2e6 - 1.0).abs() < 0.01, "{a}");
        assert!((b / 6.96e5 - 1.0).abs() < 0.01, "{b}");
    }

    #[test]
    fn quantile_identity() {
        let p = WeibullParams::new(0.76, 491669.0).unwrap();
        assert_relative_eq!(p.quantile(1.0 - (-1.0f64).exp()), 491669.0, max_relative = 1e-12);
    }

    #[test]
    fn sampler_is_deterministic_and_unbiased() {
        let p = WeibullParams::new(0.76, 491669.0).unwrap();
        assert_eq!(draws(&p, 100, 3), draws(&p, 100, 3));
        let d = draws(&p, 1_000_000, 5);
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        assert!((mean / p.mean() - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn fit_recovers_reference_parameters() {
        let p = WeibullParams::new(0.76, 491669.0).unwrap();
        let fit = fit_weibull(&draws(&p, 100_000, 9), PlottingPosition::MedianRank).unwrap();
        assert!((0.74..=0.78).contains(&fit.shape), "{fit:?}");
        assert!((fit.scale / 491669.0 - 1.0).abs() < 0.03, "{fit:?}");
        assert!(fit.r2 > 0.99);
    }

    #[test]
    fn fit_exponential_data() {
        let p = WeibullParams::new(1.0, 5000.0).unwrap();
        let fit = fit_weibull(&draws(&p, 100_000, 13), PlottingPosition::MedianRank).unwrap();
        assert!((fit.shape - 1.0).abs() < 0.03, "{fit:?}");
    }

    #[test]
    fn fit_scale_equivariance() {
        let p = WeibullParams::new(1.3, 800.0).unwrap();
        let d = draws(&p, 2000, 17);
        let scaled: Vec<f64> = d.iter().map(|v| v * 7.0).collect();
        let a = fit_weibull(&d, PlottingPosition::MeanRank).unwrap();
        let b = fit_weibull(&scaled, PlottingPosition::MeanRank).unwrap();
        assert!((a.shape - b.shape).abs() < 1e-6);
        assert_relative_eq!(b.scale, 7.0 * a.scale, max_relative = 1e-9);
    }

    #[test]
    fn fit_round_trip_over_shapes() {
        for (i, g) in [0.5, 0.7, 1.5, 3.0].into_iter().enumerate() {
            let p = WeibullParams::new(g, 1e6).unwrap();
            let fit = fit_weibull(&draws(&p, 100_000, 100 + i as u64), PlottingPosition::MedianRank).unwrap();
            assert!((fit.shape / g - 1.0).abs() < 0.03, "{g}: {fit:?}");
            assert!((fit.scale / 1e6 - 1.0).abs() < 0.05, "{g}: {fit:?}");
            assert!(fit.r2 > 0.99);
        }
    }

    #[test]
    fn degenerate_rejected() {
        assert!(matches!(fit_weibull(&[5.0; 20], PlottingPosition::MedianRank), Err(FitError::Degenerate { .. })));
        assert!(matches!(fit_weibull(&[1.0, 2.0], PlottingPosition::MedianRank), Err(FitError::Degenerate { .. })));
    }
}
