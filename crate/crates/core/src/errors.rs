//! Hard-error, sector-error and AFR probabilities.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::ctmc::HOURS_PER_YEAR;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErrorModelError {
    #[error("probability {name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("delta_i needs i > k, got i = {i}, k = {k}")]
    Domain { i: usize, k: usize },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

fn check_prob(name: &'static str, value: f64) -> Result<f64, ErrorModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ErrorModelError::Probability { name, value })
    }
}

/// Unit in which an uncorrectable-error rate is quoted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UcerUnit {
    #[default]
    Byte,
    Bit,
}

/// `1 - (1 - ucer)^capacity`.
pub fn hard_error_prob(ucer: f64, capacity: f64) -> Result<f64, ErrorModelError> {
    check_prob("ucer", ucer)?;
    if !(capacity >= 0.0) {
        return Err(ErrorModelError::Invalid(format!("capacity must be nonnegative, got {capacity}")));
    }
    if ucer == 1.0 {
        return Ok(if capacity > 0.0 { 1.0 } else { 0.0 });
    }
    Ok(-(capacity * (-ucer).ln_1p()).exp_m1())
}

/// Like [`hard_error_prob`] with `capacity` in bytes and `ucer` per `unit` read.
pub fn hard_error_prob_in(ucer: f64, capacity_bytes: f64, unit: UcerUnit) -> Result<f64, ErrorModelError> {
    match unit {
        UcerUnit::Byte => hard_error_prob(ucer, capacity_bytes),
        UcerUnit::Bit => hard_error_prob(ucer, 8.0 * capacity_bytes),
    }
}

/// `P_UCER = 1 - (1 - η)^m`.
pub fn uncorrectable_read_prob(eta: f64, m: usize) -> Result<f64, ErrorModelError> {
    check_prob("eta", eta)?;
    if eta == 1.0 {
        return Ok(if m > 0 { 1.0 } else { 0.0 });
    }
    Ok(-(m as f64 * (-eta).ln_1p()).exp_m1())
}

/// Probability that a rebuild reading `i` devices of an `(·, k)` code sees
/// at most `i - k - 1` hard errors: `1 - I_η(i-k, k+1)`.
pub fn delta_i(i: usize, k: usize, eta: f64) -> Result<f64, ErrorModelError> {
    check_prob("eta", eta)?;
    if i <= k {
        return Err(ErrorModelError::Domain { i, k });
    }
    if eta == 0.0 {
        return Ok(1.0);
    }
    if eta == 1.0 {
        return Ok(0.0);
    }
    Ok(beta_reg((k + 1) as f64, (i - k) as f64, 1.0 - eta))
}

/// Static damage and read errors of one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediaErrorParams {
    pub ucer: f64,
    pub capacity: f64,
    #[serde(default)]
    pub unit: UcerUnit,
    pub kappa: f64,
}

impl MediaErrorParams {
    pub fn epsilon(&self) -> Result<f64, ErrorModelError> {
        hard_error_prob_in(self.ucer, self.capacity, self.unit)
    }

    /// `η = 1 - (1 - ε)(1 - κ)`.
    pub fn eta(&self) -> Result<f64, ErrorModelError> {
        let eps = self.epsilon()?;
        let kappa = check_prob("kappa", self.kappa)?;
        Ok(eps + kappa - eps * kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorParams {
    /// scrub period, hours
    pub scrub_period: f64,
    /// requests per hour per sector
    pub load: f64,
    pub p_write: f64,
    pub write_fraction: f64,
    pub sectors: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorProbs {
    pub p_s: f64,
    pub p_s_at: Option<f64>,
    pub p_lse: f64,
}

/// `1 - (1 - e^{-x}) / x` without cancellation near zero.
fn scrub_factor(x: f64) -> f64 {
    if x < 1e-4 {
        x / 2.0 - x * x / 6.0 + x * x * x / 24.0
    } else {
        1.0 + (-x).exp_m1() / x
    }
}

pub fn sector_error_probs(p: &SectorParams, t: Option<f64>) -> Result<SectorProbs, ErrorModelError> {
    check_prob("p_write", p.p_write)?;
    check_prob("write_fraction", p.write_fraction)?;
    if !(p.scrub_period > 0.0) || !(p.load >= 0.0) || !(p.sectors >= 0.0) {
        return Err(ErrorModelError::Invalid("need scrub_period > 0, load >= 0, sectors >= 0".into()));
    }
    let p_e = p.p_write * p.write_fraction;
    let p_s = scrub_factor(p.load * p.scrub_period) * p_e;
    let p_s_at = t.map(|t| -(-p.load * t.rem_euclid(p.scrub_period)).exp_m1() * p_e);
    let p_lse = if p_s >= 1.0 { 1.0 } else { -(p.sectors * (-p_s).ln_1p()).exp_m1() };
    Ok(SectorProbs { p_s, p_s_at, p_lse })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Afr {
    pub exact: f64,
    pub linear: f64,
}

/// Annualized failure rate of an exponential lifetime with mean `mttf` hours.
pub fn afr(mttf: f64) -> Result<Afr, ErrorModelError> {
    if !(mttf > 0.0) {
        return Err(ErrorModelError::Invalid(format!("mttf must be positive, got {mttf}")));
    }
    let x = HOURS_PER_YEAR / mttf;
    Ok(Afr { exact: -(-x).exp_m1(), linear: x })
}

/// Hourly failure rate whose exact AFR is `afr`.
pub fn lambda_from_afr(afr: f64) -> Result<f64, ErrorModelError> {
    check_prob("afr", afr)?;
    Ok(-(-afr).ln_1p() / HOURS_PER_YEAR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::binomial;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn hard_error_examples() {
        assert!((hard_error_prob(1e-15, 1e12).unwrap() - 1e-3).abs() < 1e-6);
        assert_eq!(hard_error_prob(0.0, 1e12).unwrap(), 0.0);
        let x: f64 = 6e-7;
        assert!((hard_error_prob(1e-19, 6e12).unwrap() - 6e-7).abs() < 2e-13);
        assert!((hard_error_prob(1e-19, 6e12).unwrap() - (x - x * x / 2.0)).abs() < 1e-19);
        assert_relative_eq!(
            hard_error_prob_in(1e-16, 1e12, UcerUnit::Bit).unwrap(),
            hard_error_prob(1e-16, 8e12).unwrap()
        );
    }

    #[test]
    fn pucer_examples() {
        assert_relative_eq!(uncorrectable_read_prob(1e-3, 8).unwrap(), 1.0 - 0.999f64.powi(8), max_relative = 1e-12);
        assert!((uncorrectable_read_prob(1e-3, 8).unwrap() - 0.007972).abs() < 1e-6);
        assert_relative_eq!(uncorrectable_read_prob(0.3, 1).unwrap(), 0.3, max_relative = 1e-15);
        assert_eq!(uncorrectable_read_prob(1.0, 4).unwrap(), 1.0);
    }

    fn delta_sum(i: usize, k: usize, eta: f64) -> f64 {
        (0..i - k).map(|l| binomial(i, l) * eta.powi(l as i32) * (1.0 - eta).powi((i - l) as i32)).sum()
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_i(5, 2, 0.0).unwrap(), 1.0);
        assert!(delta_i(5, 2, 1.0 - 1e-12).unwrap() < 1e-20);
        assert_relative_eq!(delta_i(4, 3, 0.01).unwrap(), 0.99f64.powi(4), max_relative = 1e-12);
        assert_eq!(delta_i(2, 2, 0.1), Err(ErrorModelError::Domain { i: 2, k: 2 }));
    }

    #[test]
    fn delta_matches_binomial_sum() {
        for i in 1..=60 {
            for k in 0..i {
                for eta in [1e-6, 1e-3, 0.05, 0.3, 0.7] {
                    let d = delta_i(i, k, eta).unwrap();
                    assert!((d - delta_sum(i, k, eta)).abs() < 1e-12, "{i} {k} {eta}");
                }
            }
        }
    }

    #[test]
    fn sector_limits() {
        let mut p = SectorParams { scrub_period: 168.0, load: 1e-12, p_write: 1e-4, write_fraction: 0.3, sectors: 1.0 };
        let r = sector_error_probs(&p, Some(200.0)).unwrap();
        assert!(r.p_s < 1e-12);
        assert_eq!(r.p_lse, r.p_s);
        assert!(r.p_s_at.unwrap() > 0.0);
        p.load = 1e6;
        let r = sector_error_probs(&p, None).unwrap();
        assert_relative_eq!(r.p_s, 3e-5, max_relative = 1e-6);
        p.load = 0.0;
        assert_eq!(sector_error_probs(&p, Some(10.0)).unwrap().p_s, 0.0);
        p.load = 0.01;
        p.sectors = 1e9;
        let r = sector_error_probs(&p, None).unwrap();
        assert_relative_eq!(r.p_lse, 1.0 - (1.0 - r.p_s).powf(1e9), max_relative = 1e-6);
    }

    #[test]
    fn afr_examples() {
        let a = afr(HOURS_PER_YEAR / 0.04).unwrap();
        assert_eq!(a.linear, 0.04);
        assert!((a.exact - 0.0392).abs() < 1e-4);
        assert!((afr(200000.0).unwrap().exact - 0.04285).abs() < 1e-5);
        assert!(afr(1e300).unwrap().exact < 1e-290);
        assert_relative_eq!(afr(1.0 / lambda_from_afr(0.04).unwrap()).unwrap().exact, 0.04, max_relative = 1e-12);
    }

    #[test]
    fn media_eta_combines() {
        let m = MediaErrorParams { ucer: 1e-19, capacity: 6e12, unit: UcerUnit::Byte, kappa: 0.001 };
        let eta = m.eta().unwrap();
        assert!(eta >= m.epsilon().unwrap().max(0.001));
        assert_relative_eq!(eta, 1.0 - (1.0 - 6e-7) * 0.999, max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn delta_monotone(k in 0usize..20, extra in 1usize..10, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let i = k + extra;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(delta_i(i, k, hi).unwrap() <= delta_i(i, k, lo).unwrap() + 1e-14);
            prop_assert!(delta_i(i + 1, k, lo).unwrap() + 1e-14 >= delta_i(i, k, lo).unwrap());
        }

        #[test]
        fn pucer_below_linear(eta in 0.0f64..1.0, m in 1usize..200) {
            let p = uncorrectable_read_prob(eta, m).unwrap();
            prop_assert!(p <= (m as f64 * eta).min(1.0) + 1e-15);
        }
    }
}
