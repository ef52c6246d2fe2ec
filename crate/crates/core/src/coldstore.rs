//! Cold-storage model: nodes are available (A), failed but undetected (F) or
//! detected and under repair (D). Detection and repair need a robot carrier,
//! and carriers wear out after a Weibull number of exchanges.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::ctmc::{fundamental_matrix_mttdl, CtmcError, RateModel};
use crate::errors::{delta_i, ErrorModelError, MediaErrorParams, UcerUnit};
use crate::fitdata::WeibullParams;

/// Node states with defined dynamics (A, F, D).
pub const NODE_STATES: usize = 3;

/// Above this `harmonic_sum` switches to the asymptotic expansion.
pub const HS_CROSSOVER: u64 = 1_000_000;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColdError {
    #[error("invalid cold model: {0}")]
    Invalid(String),
    #[error("state index {index} outside 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("({a}, {f}, {d}) is not a live state for n = {n}, k = {k}")]
    BadState { a: usize, f: usize, d: usize, n: usize, k: usize },
    #[error(transparent)]
    Ctmc(#[from] CtmcError),
    #[error(transparent)]
    Media(#[from] ErrorModelError),
}

fn binom_u64(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

fn check_nks(n: usize, k: usize, s: usize) -> Result<(), ColdError> {
    if k == 0 || n <= k {
        return Err(ColdError::Invalid(format!("need n > k >= 1, got n = {n}, k = {k}")));
    }
    if s < 2 {
        return Err(ColdError::Invalid(format!("need s >= 2 node states, got {s}")));
    }
    Ok(())
}

/// `N_s = C(n-k+s-1, n-k) + 1`, counting the absorbing state.
pub fn ns_count(n: usize, k: usize, s: usize) -> Result<u64, ColdError> {
    check_nks(n, k, s)?;
    let r = (n - k) as u64;
    Ok(binom_u64(r + s as u64 - 1, r) + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NsBounds {
    pub lower: u64,
    pub upper: u64,
}

/// Bounds on `N_s` (absorbing state included). The lower bound is tight for s = 2, 3.
pub fn ns_bounds(n: usize, k: usize, s: usize) -> Result<NsBounds, ColdError> {
    check_nks(n, k, s)?;
    let r = (n - k) as u64;
    let s = s as u64;
    Ok(NsBounds { lower: (0..s).map(|j| binom_u64(r + 1, j)).sum(), upper: binom_u64(s + r, s - 1) })
}

/// Live states as per-type node counts `[available, other types...]`,
/// followed implicitly by the absorbing state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    pub n: usize,
    pub k: usize,
    pub s: usize,
    pub states: Vec<Vec<usize>>,
}

impl StateSpace {
    /// Number of states including the absorbing one.
    pub fn ns(&self) -> usize {
        self.states.len() + 1
    }
}

// Compositions of `total` into `parts` parts, ordered by the last part first.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for last in 0..=total {
        for mut head in compositions(total - last, parts - 1) {
            head.push(last);
            out.push(head);
        }
    }
    out
}

/// Ordered by number of unavailable nodes, then by the trailing counts. For
/// s = 3 the position of `(i, j, z)` is `state_index - 1`.
pub fn enumerate_states(n: usize, k: usize, s: usize) -> Result<StateSpace, ColdError> {
    check_nks(n, k, s)?;
    let mut states = Vec::new();
    for r in 0..=n - k {
        for tail in compositions(r, s - 1) {
            let mut st = Vec::with_capacity(s);
            st.push(n - r);
            st.extend(tail);
            states.push(st);
        }
    }
    Ok(StateSpace { n, k, s, states })
}

/// A live three-type state: `a` available, `f` failed undetected, `d` detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColdState {
    pub a: usize,
    pub f: usize,
    pub d: usize,
}

impl ColdState {
    pub fn new(a: usize, f: usize, d: usize) -> Self {
        ColdState { a, f, d }
    }

    pub fn check(&self, n: usize, k: usize) -> Result<(), ColdError> {
        if self.a + self.f + self.d != n || self.a < k || self.a > n {
            return Err(ColdError::BadState { a: self.a, f: self.f, d: self.d, n, k });
        }
        Ok(())
    }
}

/// `c_ind = C(n-i+1, 2) + z + 1`, so the all-available state is 1.
pub fn state_index(n: usize, st: ColdState) -> usize {
    let r = n - st.a;
    r * (r + 1) / 2 + st.d + 1
}

pub fn max_state_index(n: usize, k: usize) -> usize {
    let r = n - k;
    r * (r + 1) / 2 + r + 1
}

pub fn index_to_state(n: usize, k: usize, index: usize) -> Result<ColdState, ColdError> {
    let max = max_state_index(n, k);
    if index == 0 || index > max {
        return Err(ColdError::IndexOutOfRange { index, max });
    }
    // largest r with C(r+1, 2) < index, i.e. the smallest i
    let mut r = 0;
    while (r + 1) * (r + 2) / 2 < index {
        r += 1;
    }
    let d = index - r * (r + 1) / 2 - 1;
    Ok(ColdState { a: n - r, f: r - d, d })
}

/// Probability a carrier with `l` exchanges left survives `t` hours of
/// exchanges at rate `omega`: `Γ(l, ωt) / Γ(l)`.
pub fn carrier_survival(l: f64, omega: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    gamma_ur(l, omega * t)
}

/// Distribution of the number of successes among independent Bernoullis,
/// by direct convolution.
pub fn poisson_binomial_convolution(betas: &[f64]) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for &b in betas {
        let mut next = vec![0.0; pmf.len() + 1];
        for (o, &p) in pmf.iter().enumerate() {
            next[o] += p * (1.0 - b);
            next[o + 1] += p * b;
        }
        pmf = next;
    }
    pmf
}

/// Same distribution from the characteristic function sampled at `roots`
/// roots of unity; `roots` must exceed `betas.len()`.
pub fn poisson_binomial_dft(betas: &[f64], roots: usize) -> Result<Vec<f64>, ColdError> {
    let i = betas.len();
    if roots <= i {
        return Err(ColdError::Invalid(format!("need more than {i} roots, got {roots}")));
    }
    if let Some(b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(ColdError::Invalid(format!("survival probability {b} outside [0, 1]")));
    }
    let w = std::f64::consts::TAU / roots as f64;
    let chi: Vec<Complex64> = (0..roots)
        .map(|l| {
            let c = Complex64::from_polar(1.0, w * l as f64);
            betas.iter().fold(Complex64::new(1.0, 0.0), |acc, &b| acc * (Complex64::new(1.0, 0.0) + (c - 1.0) * b))
        })
        .collect();
    let mut pmf = Vec::with_capacity(i + 1);
    for o in 0..=i {
        let s: Complex64 =
            chi.iter().enumerate().map(|(l, x)| x * Complex64::from_polar(1.0, -w * (l * o % roots) as f64)).sum();
        pmf.push((s.re / roots as f64).max(0.0));
    }
    Ok(pmf)
}

/// `ψ_o` for `o = 0..=betas.len()`: probability that `o` of the carriers are
/// up, using `n + 1` roots.
pub fn available_carriers_dist(betas: &[f64], n: usize) -> Result<Vec<f64>, ColdError> {
    poisson_binomial_dft(betas, n + 1)
}

/// `H_x`, exact up to [`HS_CROSSOVER`].
pub fn harmonic_sum(x: u64) -> f64 {
    if x <= HS_CROSSOVER {
        (1..=x).rev().map(|m| 1.0 / m as f64).sum()
    } else {
        let xf = x as f64;
        let x2 = xf * xf;
        xf.ln() + EULER_GAMMA + 0.5 / xf - 1.0 / (12.0 * x2) + 1.0 / (120.0 * x2 * x2)
    }
}

/// Rate of an exponential matched to a chain of exponential stages.
pub fn exp_tail_rate(phi: f64, thetas: &[f64]) -> f64 {
    1.0 / (1.0 / phi + thetas.iter().map(|t| 1.0 / t).sum::<f64>())
}

/// `θ_j = jθ - θ²/(θ+φ) Σ (1 - β_m)` over the carriers of the `j` undetected nodes.
pub fn detection_rate(theta: f64, phi: f64, betas: &[f64]) -> f64 {
    let j = betas.len() as f64;
    j * theta - theta * theta / (theta + phi) * betas.iter().map(|b| 1.0 - b).sum::<f64>()
}

/// `μ_z = zμ - μ²/(μ+φ) Σ (1 - β_m)`.
pub fn mu_z(z: usize, mu: f64, phi: f64, betas: &[f64]) -> f64 {
    z as f64 * mu - mu * mu / (mu + phi) * betas.iter().map(|b| 1.0 - b).sum::<f64>()
}

/// Repair rate `μ_iz` with `z` detected nodes, `k` helpers drawn from the
/// `i = avail_betas.len()` available nodes, and `sum_betas` feeding `μ_z`.
/// A helper whose carrier is down adds the wait for the slowest of the `x`
/// carrier repairs, `H_x / φ`.
pub fn repair_rate(
    k: usize,
    z: usize,
    mu: f64,
    phi: f64,
    avail_betas: &[f64],
    sum_betas: &[f64],
    n: usize,
) -> Result<f64, ColdError> {
    let i = avail_betas.len();
    if z == 0 {
        return Ok(0.0);
    }
    if i < k {
        return Err(ColdError::Invalid(format!("repair needs {k} helpers, only {i} available")));
    }
    let mz = mu_z(z, mu, phi, sum_betas);
    let psi = available_carriers_dist(avail_betas, n.max(i))?;
    let cik = binom_u64(i as u64, k as u64) as f64;
    let mut total = 0.0;
    for l in 0..=i {
        let w = psi[i - l];
        if w == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for x in 0..=l.min(k) {
            if k - x > i - l {
                continue;
            }
            let h = binom_u64((i - l) as u64, (k - x) as u64) as f64 * binom_u64(l as u64, x as u64) as f64 / cik;
            inner += h / (1.0 / mz + harmonic_sum(x as u64) / phi);
        }
        total += w * inner;
    }
    Ok(total)
}

/// Which carriers enter the `μ_z` correction sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairSumLimit {
    /// the `z` nodes being written
    #[default]
    Detected,
    /// the `j` undetected nodes, for compatibility with the printed formula
    Undetected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColdModel {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub mu: f64,
    pub theta: f64,
    /// carrier repair rate per hour
    pub phi: f64,
    /// carrier exchanges per hour
    pub exchange_rate: f64,
    pub media: MediaErrorParams,
    pub weibull: WeibullParams,
    #[serde(default)]
    pub repair_sum: RepairSumLimit,
}

impl ColdModel {
    /// Tape-library defaults: λ = 1/50000, μ = 1/24, θ = 1/8760, UCER 1e-19
    /// on 6 TB, κ = 0.001, Weibull(0.67, 525985), φ = 1/48, 10 exchanges/h.
    pub fn tape_defaults(n: usize, k: usize) -> Self {
        ColdModel {
            n,
            k,
            lambda: 1.0 / 50000.0,
            mu: 1.0 / 24.0,
            theta: 1.0 / 8760.0,
            phi: 1.0 / 48.0,
            exchange_rate: 10.0,
            media: MediaErrorParams { ucer: 1e-19, capacity: 6e12, unit: UcerUnit::Byte, kappa: 0.001 },
            weibull: WeibullParams { shape: 0.67, scale: 525985.0 },
            repair_sum: RepairSumLimit::Detected,
        }
    }

    pub fn validate(&self) -> Result<(), ColdError> {
        check_nks(self.n, self.k, NODE_STATES)?;
        for (name, v) in [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("theta", self.theta),
            ("phi", self.phi),
            ("exchange_rate", self.exchange_rate),
        ] {
            if !(v > 0.0) || v.is_nan() {
                return Err(ColdError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        WeibullParams::new(self.weibull.shape, self.weibull.scale).map_err(|e| ColdError::Invalid(e.to_string()))?;
        self.media.eta()?;
        Ok(())
    }

    pub fn eta(&self) -> Result<f64, ColdError> {
        Ok(self.media.eta()?)
    }

    /// `Δ_i` for `i = 0..=n`, with `Δ_i = 0` for `i <= k`.
    pub fn deltas(&self) -> Result<Vec<f64>, ColdError> {
        let eta = self.eta()?;
        (0..=self.n).map(|i| if i <= self.k { Ok(0.0) } else { Ok(delta_i(i, self.k, eta)?) }).collect()
    }

    /// Hard-error transition model without carrier failures. States follow
    /// [`state_index`] order with the absorbing state last.
    pub fn hard_error_model(&self) -> Result<RateModel, ColdError> {
        self.validate()?;
        let (n, k) = (self.n, self.k);
        let deltas = self.deltas()?;
        let live = max_state_index(n, k);
        let mut names: Vec<String> = (1..=live)
            .map(|c| {
                let st = index_to_state(n, k, c).expect("in range");
                format!("({},{},{})", st.a, st.f, st.d)
            })
            .collect();
        names.push("F".into());
        let fail = live;
        let mut model = RateModel::new(names, 0, &[fail])?;
        for c in 1..=live {
            let st = index_to_state(n, k, c)?;
            let from = c - 1;
            let down = st.a as f64 * self.lambda;
            let d = deltas[st.a];
            if st.a > k {
                let to = state_index(n, ColdState::new(st.a - 1, st.f + 1, st.d)) - 1;
                model.add_rate(from, to, down * d)?;
            }
            model.add_rate(from, fail, down * (1.0 - d))?;
            if st.f > 0 {
                let to = state_index(n, ColdState::new(st.a, st.f - 1, st.d + 1)) - 1;
                model.add_rate(from, to, st.f as f64 * self.theta)?;
            }
            if st.d > 0 {
                let to = state_index(n, ColdState::new(st.a + 1, st.f, st.d - 1)) - 1;
                model.add_rate(from, to, st.d as f64 * self.mu)?;
            }
        }
        Ok(model)
    }

    /// Mean time to loss with no detection or repair at all.
    pub fn lower_bound(&self) -> Result<f64, ColdError> {
        self.validate()?;
        let deltas = self.deltas()?;
        let hn = harmonic_sum(self.n as u64);
        let mut total = 0.0;
        for i in self.k..=self.n {
            let reach: f64 = deltas[i + 1..=self.n].iter().product();
            total += (1.0 - deltas[i]) * reach * (hn - harmonic_sum(i as u64 - 1));
        }
        Ok(total / self.lambda)
    }

    /// Mean time to loss when carriers never fail.
    pub fn upper_bound(&self) -> Result<f64, ColdError> {
        Ok(fundamental_matrix_mttdl(&self.hard_error_model()?)?.mttdl)
    }

    /// Detection and repair rates of a live state given the survival
    /// probabilities of the carriers serving each group of nodes.
    pub fn approx_rates(
        &self,
        st: ColdState,
        avail_betas: &[f64],
        undetected_betas: &[f64],
        detected_betas: &[f64],
    ) -> Result<(f64, f64), ColdError> {
        let detect = detection_rate(self.theta, self.phi, undetected_betas) * (st.f > 0) as u8 as f64;
        let sum_betas = match self.repair_sum {
            RepairSumLimit::Detected => detected_betas,
            RepairSumLimit::Undetected => undetected_betas,
        };
        let repair = repair_rate(self.k, st.d, self.mu, self.phi, avail_betas, sum_betas, self.n)?;
        Ok((detect, repair))
    }
}
