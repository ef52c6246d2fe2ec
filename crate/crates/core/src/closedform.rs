//! Explicit MTTDL and reliability formulas, and the generalized model with
//! the key-rate-vector closed form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctmc::{CtmcError, Elimination, RateModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosedFormError {
    #[error("closed form only available for c <= 3, got c = {0}")]
    UnsupportedC(usize),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("Lemma 3 condition fails: c = {c} needs at least {} leading zero gammas, found {leading_zeros}", c.saturating_sub(3))]
    Lemma3Violated { c: usize, leading_zeros: usize },
    #[error(transparent)]
    Ctmc(#[from] CtmcError),
}

fn check_rates(lambda: f64, mu: f64) -> Result<(), ClosedFormError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ClosedFormError::Invalid(format!("lambda must be positive, got {lambda}")));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(ClosedFormError::Invalid(format!("mu must be nonnegative, got {mu}")));
    }
    Ok(())
}

/// Exact MTTDL of the canonical model for `c` in 1..=3 with `m` data devices.
pub fn mttdl_exact(m: usize, c: usize, lambda: f64, mu: f64) -> Result<f64, ClosedFormError> {
    check_rates(lambda, mu)?;
    if m == 0 {
        return Err(ClosedFormError::Invalid("m must be at least 1".into()));
    }
    let (l, u, m) = (lambda, mu, m as f64);
    let v = match c {
        1 => (u + l * (2.0 * m + 1.0)) / (l * l * m * (m + 1.0)),
        2 => {
            (2.0 * u * u + u * l * (5.0 * m + 6.0) + l * l * (3.0 * m * m + 6.0 * m + 2.0))
                / (l.powi(3) * m * (m + 1.0) * (m + 2.0))
        }
        3 => {
            (6.0 * u.powi(3)
                + u * u * l * (17.0 * m + 33.0)
                + u * l * l * (14.0 * m * m + 47.0 * m + 33.0)
                + 2.0 * l.powi(3) * (2.0 * m.powi(3) + 9.0 * m * m + 11.0 * m + 3.0))
                / (l.powi(4) * m * (m + 1.0) * (m + 2.0) * (m + 3.0))
        }
        _ => return Err(ClosedFormError::UnsupportedC(c)),
    };
    Ok(v)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Large-ω approximation `ω^c / (λ (n-c) C(n,c))`.
pub fn mttdl_simple(n: usize, c: usize, lambda: f64, mu: f64) -> f64 {
    let omega = mu / lambda;
    omega.powi(c as i32) / (lambda * (n - c) as f64 * binomial(n, c))
}

/// Hard-error extension `c! ω^c / (n (n-1) ... (n-c) (λ + ημ))`.
pub fn mttdl_hard_error(n: usize, c: usize, lambda: f64, mu: f64, eta: f64) -> f64 {
    let omega = mu / lambda;
    let mut v = 1.0;
    for i in 0..c {
        v *= (i + 1) as f64 * omega / (n - i) as f64;
    }
    v / ((n - c) as f64 * (lambda + eta * mu))
}

/// `1 - R_c(t)` for the sum-of-exponentials approximation, evaluated without
/// cancelling the leading term.
pub fn unreliability_approx(m: usize, c: usize, lambda: f64, mu: f64, t: f64) -> Result<f64, ClosedFormError> {
    check_rates(lambda, mu)?;
    if t < 0.0 {
        return Err(ClosedFormError::Invalid(format!("negative time {t}")));
    }
    let mf = m as f64;
    if c == 0 {
        return Ok(-(-mf * lambda * t).exp_m1());
    }
    if c > 3 {
        return Err(ClosedFormError::UnsupportedC(c));
    }
    let mttdl = mttdl_exact(m, c, lambda, mu)?;
    let omega = mu / lambda;
    let harmonic: f64 = (1..=c).map(|i| 1.0 / i as f64).sum();
    let excess = harmonic * mf * binomial(m + c, c) * omega.powi(-(c as i32) - 1);
    let rise: f64 = (0..=c).map(|i| mf + i as f64).product();
    let base = lambda.powi(c as i32 + 1) * rise / mu.powi(c as i32 + 1);
    // (coefficient magnitude, decay rate) of the fast terms
    let fast: Vec<(f64, f64)> = match c {
        1 => vec![(base, mu + lambda * (2.0 * mf + 1.0))],
        2 => vec![(base, mu + lambda * (2.0 * mf + 3.0)), (base / 4.0, 2.0 * mu + lambda * mf)],
        _ => vec![
            (base / 2.0, mu + lambda * (2.0 * mf + 5.0)),
            (base / 4.0, 2.0 * mu + lambda * (mf + 1.0)),
            (base / 18.0, 3.0 * mu + lambda * mf),
        ],
    };
    let slow = (-t / mttdl).exp();
    let mut u = -(-t / mttdl).exp_m1() - excess * slow;
    for (coef, rate) in fast {
        u += coef * (-rate * t).exp();
    }
    Ok(u.clamp(0.0, 1.0))
}

/// `R_c(t)` approximation for `c` in 0..=3.
pub fn reliability_approx(m: usize, c: usize, lambda: f64, mu: f64, t: f64) -> Result<f64, ClosedFormError> {
    Ok(1.0 - unreliability_approx(m, c, lambda, mu, t)?)
}

/// Rates of the generalized chain: state `x` has `x` failures, failure rate
/// `λ_x` to `x+1`, loss rate `γ_x` to the absorbing state and repair `μ_{x-1}`
/// back to state 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralRates {
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub mus: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneralMode {
    /// Drops the `ξ_t` correction; an upper estimate.
    Approx,
    /// `ξ_t` from Lemma 3; rejected when its condition fails.
    ExactLemma3,
    /// `φ_c(0)` taken as the determinant of the transient block; exact for any rates.
    Determinant,
}

impl GeneralRates {
    pub fn new(lambdas: Vec<f64>, gammas: Vec<f64>, mus: Vec<f64>) -> Result<Self, ClosedFormError> {
        let r = GeneralRates { lambdas, gammas, mus };
        r.validate()?;
        Ok(r)
    }

    /// Canonical `(m+c, m)` model: `λ_x = (n-x)λ`, no loss shortcuts, `μ_x = (x+1)μ`.
    pub fn canonical(m: usize, c: usize, lambda: f64, mu: f64) -> Self {
        let n = m + c;
        GeneralRates {
            lambdas: (0..=c).map(|x| (n - x) as f64 * lambda).collect(),
            gammas: vec![0.0; c + 1],
            mus: (0..c).map(|x| (x + 1) as f64 * mu).collect(),
        }
    }

    pub fn c(&self) -> usize {
        self.lambdas.len() - 1
    }

    pub fn validate(&self) -> Result<(), ClosedFormError> {
        if self.lambdas.is_empty() {
            return Err(ClosedFormError::Invalid("need at least one state".into()));
        }
        let c = self.lambdas.len() - 1;
        if self.gammas.len() != c + 1 || self.mus.len() != c {
            return Err(ClosedFormError::Invalid(format!(
                "expected {} gammas and {} mus, got {} and {}",
                c + 1,
                c,
                self.gammas.len(),
                self.mus.len()
            )));
        }
        for v in self.lambdas.iter().chain(&self.gammas).chain(&self.mus) {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(ClosedFormError::Invalid(format!("rates must be finite and nonnegative, got {v}")));
            }
        }
        if self.lambdas[c] + self.gammas[c] <= 0.0 {
            return Err(ClosedFormError::Invalid("last state has no exit to data loss".into()));
        }
        Ok(())
    }

    fn scaled(&self, s: f64) -> GeneralRates {
        let f = |v: &Vec<f64>| v.iter().map(|x| x / s).collect();
        GeneralRates { lambdas: f(&self.lambdas), gammas: f(&self.gammas), mus: f(&self.mus) }
    }

    fn max_rate(&self) -> f64 {
        self.lambdas.iter().chain(&self.gammas).chain(&self.mus).cloned().fold(0.0, f64::max)
    }

    /// Number of leading zero loss rates `γ_0 = ... = γ_{z-1} = 0`.
    pub fn leading_zero_gammas(&self) -> usize {
        let c = self.c();
        self.gammas[..c].iter().take_while(|&&g| g == 0.0).count()
    }

    /// Whether the Lemma 3 recursion is exact for these rates.
    pub fn lemma3_holds(&self) -> bool {
        self.c() <= self.leading_zero_gammas() + 3
    }

    /// Builds the chain as a [`RateModel`] with states `0..=c` and `F`.
    pub fn to_rate_model(&self) -> RateModel {
        let c = self.c();
        let mut states: Vec<String> = (0..=c).map(|x| format!("x{x}")).collect();
        states.push("F".into());
        let f = c + 1;
        let mut model = RateModel::new(states, 0, &[f]).expect("valid layout");
        for x in 0..=c {
            let to = if x == c { f } else { x + 1 };
            model.add_rate(x, to, self.lambdas[x]).expect("validated rate");
            model.add_rate(x, f, self.gammas[x]).expect("validated rate");
            if x > 0 {
                model.add_rate(x, 0, self.mus[x - 1]).expect("validated rate");
            }
        }
        model
    }

    /// Key rate vector `Λ_x^(c)`.
    pub fn key_rate_vector(&self, x: usize) -> Vec<f64> {
        let c = self.c();
        (0..=c)
            .map(|j| {
                let v = if j == 0 {
                    if c == 0 {
                        0.0
                    } else {
                        self.gammas[0]
                    }
                } else if j == c {
                    self.mus[c - 1]
                } else {
                    self.mus[j - 1] + self.gammas[j]
                };
                self.lambdas[j] + if j >= x { v } else { 0.0 }
            })
            .collect()
    }
}

fn phi_recursive(r: &GeneralRates, lemma3: bool) -> f64 {
    let c = r.c();
    let l = &r.lambdas;
    let g = &r.gammas;
    let mu = &r.mus;
    // prefix products of λ: lam_prod[k] = Π_{i<k} λ_i
    let mut lam_prod = vec![1.0; c + 2];
    for k in 0..=c {
        lam_prod[k + 1] = lam_prod[k] * l[k];
    }
    let mut phi = l[0];
    let mut gl_prod = 1.0; // Π_{i<=t-2} (γ_i + λ_i)
    for t in 1..=c {
        if t >= 2 {
            gl_prod *= g[t - 2] + l[t - 2];
        }
        let xi = if lemma3 && t >= 3 { g[t - 3] * mu[t - 3] * lam_prod[t - 3] } else { 0.0 };
        phi = lam_prod[t + 1] + (mu[t - 1] + l[t]) * (phi - lam_prod[t] + g[t - 1] * (gl_prod + xi));
    }
    phi
}

fn phi_determinant(r: &GeneralRates) -> Result<f64, ClosedFormError> {
    let c = r.c();
    let n = c + 1;
    let mut a = vec![0.0; n * n];
    let mut exit = vec![0.0; n];
    for x in 0..=c {
        if x < c {
            a[x * n + x + 1] = r.lambdas[x];
            exit[x] = r.gammas[x];
        } else {
            exit[x] = r.lambdas[x] + r.gammas[x];
        }
        if x > 0 {
            a[x * n] += r.mus[x - 1];
        }
    }
    let elim = Elimination::factor(a, exit, n)?;
    Ok(elim.pivots().iter().product())
}

/// Generalized MTTDL `Σ_x Π_{j≠x} Λ_x(j) / φ_c(0)`.
pub fn mttdl_general(rates: &GeneralRates, mode: GeneralMode) -> Result<f64, ClosedFormError> {
    rates.validate()?;
    if mode == GeneralMode::ExactLemma3 && !rates.lemma3_holds() {
        return Err(ClosedFormError::Lemma3Violated { c: rates.c(), leading_zeros: rates.leading_zero_gammas() });
    }
    let s = rates.max_rate();
    let mut r = rates.scaled(s);
    let c = r.c();
    // both exits of the last state lead to F, so only their sum matters
    r.lambdas[c] += r.gammas[c];
    r.gammas[c] = 0.0;
    let mut numerator = 0.0;
    for x in 0..=c {
        let key = r.key_rate_vector(x);
        numerator += key.iter().enumerate().filter(|&(j, _)| j != x).map(|(_, v)| v).product::<f64>();
    }
    let phi = match mode {
        GeneralMode::Approx => phi_recursive(&r, false),
        GeneralMode::ExactLemma3 => phi_recursive(&r, true),
        GeneralMode::Determinant => phi_determinant(&r)?,
    };
    if !(phi > 0.0) {
        return Err(ClosedFormError::Invalid("denominator vanished".into()));
    }
    Ok(numerator / phi / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::{canonical_model, durability_nines, mttdl_linear_solve, HOURS_PER_YEAR};
    use approx::assert_relative_eq;

    #[test]
    fn last_state_split_does_not_matter() {
        let a = GeneralRates::new(vec![4e-4, 3e-4], vec![1e-4, 2e-4], vec![0.05]).unwrap();
        let b = GeneralRates::new(vec![4e-4, 5e-4], vec![1e-4, 0.0], vec![0.05]).unwrap();
        let chain = mttdl_linear_solve(&a.to_rate_model()).unwrap().mttdl;
        for mode in [GeneralMode::Approx, GeneralMode::Determinant] {
            assert_relative_eq!(
                mttdl_general(&a, mode).unwrap(),
                mttdl_general(&b, mode).unwrap(),
                max_relative = 1e-14
            );
        }
        assert_relative_eq!(mttdl_general(&a, GeneralMode::Determinant).unwrap(), chain, max_relative = 1e-12);
    }

    #[test]
    fn exact_matches_chain() {
        for c in 1..=3 {
            for &(m, lambda, mu) in &[(1, 1.0 / 200e3, 1.0 / 24.0), (8, 1.0 / 500e3, 1.0 / 240.0), (100, 1e-4, 1e-2)] {
                let exact = mttdl_exact(m, c, lambda, mu).unwrap();
                let chain = mttdl_linear_solve(&canonical_model(m, c, lambda, mu)).unwrap().mttdl;
                assert_relative_eq!(exact, chain, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn exact_examples() {
        let m = mttdl_exact(1, 1, 1.0 / 200e3, 1.0 / 24.0).unwrap();
        assert_eq!(durability_nines(m, HOURS_PER_YEAR), 4);
        let lambda = 1e-3;
        assert_relative_eq!(mttdl_exact(1, 2, lambda, 0.0).unwrap(), 11.0 / (6.0 * lambda), max_relative = 1e-12);
        let m = mttdl_exact(1, 3, 1.0 / 1.2e6, 1.0 / 240.0).unwrap();
        assert_eq!(durability_nines(m, HOURS_PER_YEAR), 12);
        let m = mttdl_exact(100, 3, 1.0 / 1.2e6, 1.0 / 240.0).unwrap();
        assert_eq!(durability_nines(m, HOURS_PER_YEAR), 6);
        assert_eq!(mttdl_exact(1, 4, 1.0, 1.0), Err(ClosedFormError::UnsupportedC(4)));
    }

    #[test]
    fn simple_is_leading_term() {
        let (lambda, mu) = (1e-5, 1e-1);
        let simple = mttdl_simple(2, 1, lambda, mu);
        assert_relative_eq!(simple, mu / (2.0 * lambda * lambda), max_relative = 1e-12);
        let exact = mttdl_exact(1, 1, lambda, mu).unwrap();
        assert!((exact - simple).abs() / exact < 3.0 * lambda / mu);
        let (lambda, mu) = (1.0 / 500e3, 1.0 / 24.0);
        let exact = mttdl_exact(8, 2, lambda, mu).unwrap();
        assert!((mttdl_simple(10, 2, lambda, mu) / exact - 1.0).abs() < 0.1);
    }

    #[test]
    fn conventional_two_raid6() {
        let v = mttdl_simple(10, 2, 1.0 / 200e3, 1.0 / 24.0) / 2.0;
        assert!((v / 1.93e10 - 1.0).abs() < 0.01, "{v}");
    }

    #[test]
    fn hard_error_identity_and_monotonicity() {
        let (lambda, mu) = (1.0 / 500e3, 1.0 / 24.0);
        for c in 1..4 {
            let n = 10;
            let a = mttdl_hard_error(n, c, lambda, mu, 0.0);
            let b = mttdl_simple(n, c, lambda, mu);
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        assert!(mttdl_hard_error(10, 2, lambda, mu, 1e-3) < mttdl_hard_error(10, 2, lambda, mu, 0.0));
    }

    #[test]
    fn reliability_approx_examples() {
        let r0 = reliability_approx(5, 0, 1e-4, 1.0, 100.0).unwrap();
        assert_relative_eq!(r0, (-5e-2_f64).exp(), max_relative = 1e-14);
        let u = unreliability_approx(1, 3, 1.0 / 500e3, 1.0 / 24.0, 8760.0).unwrap();
        assert_eq!(crate::ctmc::nines_from_unreliability(u, 18), 14);
        let u = unreliability_approx(100, 1, 1.0 / 200e3, 1.0 / 240.0, 8760.0).unwrap();
        assert_eq!(crate::ctmc::nines_from_unreliability(u, 18), 0);
    }

    #[test]
    fn general_canonical_c1() {
        let (n, lambda, mu) = (6.0, 1e-5, 1e-1);
        let r = GeneralRates::new(vec![n * lambda, (n - 1.0) * lambda], vec![0.0, 0.0], vec![mu]).unwrap();
        let expect = (mu + lambda * (2.0 * n - 1.0)) / (lambda * lambda * n * (n - 1.0));
        for mode in [GeneralMode::Approx, GeneralMode::ExactLemma3, GeneralMode::Determinant] {
            assert_relative_eq!(mttdl_general(&r, mode).unwrap(), expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn lemma3_guard() {
        let mut r = GeneralRates::canonical(4, 5, 1e-5, 1e-2);
        assert!(r.lemma3_holds());
        r.gammas[0] = 1e-6;
        r.gammas[1] = 1e-6;
        assert!(!r.lemma3_holds());
        assert!(matches!(mttdl_general(&r, GeneralMode::ExactLemma3), Err(ClosedFormError::Lemma3Violated { .. })));
    }

    #[test]
    fn determinant_mode_matches_chain() {
        let r =
            GeneralRates::new(vec![2.0, 1.5, 0.7, 0.9, 1.1], vec![0.3, 0.2, 0.5, 0.1, 0.0], vec![3.0, 0.4, 1.7, 2.2])
                .unwrap();
        let chain = mttdl_linear_solve(&r.to_rate_model()).unwrap().mttdl;
        assert_relative_eq!(mttdl_general(&r, GeneralMode::Determinant).unwrap(), chain, max_relative = 1e-12);
        assert!(mttdl_general(&r, GeneralMode::Approx).unwrap() >= chain);
    }
}
