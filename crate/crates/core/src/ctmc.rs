//! Absorbing continuous-time Markov chains.
//!
//! Mean time to absorption is solved with a subtraction-free elimination
//! (Grassmann/Taksar/Heyman style) so that models with a large repair to
//! failure ratio keep full relative accuracy. Transient reliability uses
//! uniformization and accumulates the absorbed mass directly.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One year in hours.
pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Nines are saturated at this value when `1 - R` underflows.
pub const DEFAULT_NINES_CAP: u32 = 18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtmcError {
    #[error("model has no transient states")]
    Empty,
    #[error("state index {0} out of range")]
    BadState(usize),
    #[error("rate {rate} from state {from} to state {to} is negative or not finite")]
    BadRate { from: usize, to: usize, rate: f64 },
    #[error("absorbing state {0} cannot have outgoing rates")]
    AbsorbingExit(usize),
    #[error("no absorbing state is reachable from state {0}")]
    Unreachable(usize),
    #[error("transient state {0} has zero total outgoing rate")]
    ZeroExit(usize),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("linear system is singular")]
    Singular,
    #[error("invalid model document: {0}")]
    Document(String),
}

/// An absorbing CTMC with rates per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct RateModel {
    states: Vec<String>,
    rates: BTreeMap<(usize, usize), f64>,
    initial: usize,
    absorbing: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDoc {
    states: Vec<String>,
    rates: Vec<(usize, usize, f64)>,
    initial: usize,
    absorbing: Vec<usize>,
}

impl TryFrom<ModelDoc> for RateModel {
    type Error = CtmcError;

    fn try_from(doc: ModelDoc) -> Result<Self, CtmcError> {
        let mut m = RateModel::new(doc.states, doc.initial, &doc.absorbing)?;
        for (from, to, rate) in doc.rates {
            m.add_rate(from, to, rate)?;
        }
        Ok(m)
    }
}

impl From<RateModel> for ModelDoc {
    fn from(m: RateModel) -> Self {
        ModelDoc {
            rates: m.rates.iter().map(|(&(f, t), &r)| (f, t, r)).collect(),
            absorbing: (0..m.states.len()).filter(|&i| m.absorbing[i]).collect(),
            states: m.states,
            initial: m.initial,
        }
    }
}

impl RateModel {
    pub fn new(states: Vec<String>, initial: usize, absorbing: &[usize]) -> Result<Self, CtmcError> {
        let n = states.len();
        if initial >= n {
            return Err(CtmcError::BadState(initial));
        }
        let mut flags = vec![false; n];
        for &a in absorbing {
            if a >= n {
                return Err(CtmcError::BadState(a));
            }
            flags[a] = true;
        }
        Ok(RateModel { states, rates: BTreeMap::new(), initial, absorbing: flags })
    }

    /// Adds `rate` to the transition `from -> to`. Zero rates and self loops are ignored.
    pub fn add_rate(&mut self, from: usize, to: usize, rate: f64) -> Result<(), CtmcError> {
        let n = self.states.len();
        if from >= n {
            return Err(CtmcError::BadState(from));
        }
        if to >= n {
            return Err(CtmcError::BadState(to));
        }
        if !rate.is_finite() || rate < 0.0 {
            return Err(CtmcError::BadRate { from, to, rate });
        }
        if rate == 0.0 || from == to {
            return Ok(());
        }
        if self.absorbing[from] {
            return Err(CtmcError::AbsorbingExit(from));
        }
        *self.rates.entry((from, to)).or_insert(0.0) += rate;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_absorbing(&self, i: usize) -> bool {
        self.absorbing[i]
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates.get(&(from, to)).copied().unwrap_or(0.0)
    }

    /// Iterates over `(from, to, rate)` for every positive rate.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rates.iter().map(|(&(f, t), &r)| (f, t, r))
    }

    /// Total outgoing rate `|q_ii|`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.rates.range((i, 0)..(i + 1, 0)).map(|(_, r)| r).sum()
    }

    pub fn from_json(text: &str) -> Result<Self, CtmcError> {
        serde_json::from_str(text).map_err(|e| CtmcError::Document(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Checks that every transient state can reach an absorbing state.
    pub fn validate(&self) -> Result<(), CtmcError> {
        let n = self.len();
        if !(0..n).any(|i| !self.absorbing[i]) {
            return Err(CtmcError::Empty);
        }
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (f, t, _) in self.transitions() {
            preds[t].push(f);
        }
        let mut seen = self.absorbing.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| self.absorbing[i]).collect();
        while let Some(s) = queue.pop_front() {
            for &p in &preds[s] {
                if !seen[p] {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        match seen.iter().position(|&s| !s) {
            Some(i) => Err(CtmcError::Unreachable(i)),
            None => Ok(()),
        }
    }

    fn transient_block(&self) -> TransientBlock {
        let index: Vec<Option<usize>> = {
            let mut next = 0;
            self.absorbing
                .iter()
                .map(|&a| {
                    if a {
                        None
                    } else {
                        next += 1;
                        Some(next - 1)
                    }
                })
                .collect()
        };
        let global: Vec<usize> = (0..self.len()).filter(|&i| !self.absorbing[i]).collect();
        let n = global.len();
        let mut a = vec![0.0; n * n];
        let mut r = vec![0.0; n];
        for (f, t, rate) in self.transitions() {
            let li = index[f].expect("absorbing states have no exits");
            match index[t] {
                Some(lj) => a[li * n + lj] += rate,
                None => r[li] += rate,
            }
        }
        TransientBlock { global, a, r }
    }
}

struct TransientBlock {
    global: Vec<usize>,
    a: Vec<f64>,
    r: Vec<f64>,
}

/// LU-style factorization of `-Q_TT` computed without subtractions.
///
/// `-Q_TT = (I - F) U` where `F` holds the nonnegative multipliers below the
/// diagonal, `U` has diagonal `d` and off-diagonal `-a` above it.
#[derive(Debug, Clone)]
pub(crate) struct Elimination {
    n: usize,
    a: Vec<f64>,
    d: Vec<f64>,
}

impl Elimination {
    /// `a` is the row-major matrix of transient-to-transient rates (diagonal ignored),
    /// `r` the rates into absorption.
    pub(crate) fn factor(mut a: Vec<f64>, mut r: Vec<f64>, n: usize) -> Result<Self, CtmcError> {
        let mut d = vec![0.0; n];
        for k in 0..n {
            let dk = r[k] + a[k * n + k + 1..(k + 1) * n].iter().sum::<f64>();
            if !(dk > 0.0) || !dk.is_finite() {
                return Err(CtmcError::Singular);
            }
            d[k] = dk;
            for i in k + 1..n {
                let aik = a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                let f = aik / dk;
                a[i * n + k] = f;
                for j in k + 1..n {
                    if j != i {
                        let akj = a[k * n + j];
                        if akj != 0.0 {
                            a[i * n + j] += f * akj;
                        }
                    }
                }
                r[i] += f * r[k];
            }
        }
        Ok(Elimination { n, a, d })
    }

    /// Solves `-Q_TT x = b`.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        for k in 0..n {
            if z[k] == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let f = self.a[i * n + k];
                if f != 0.0 {
                    z[i] += f * z[k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = z[k];
            for j in k + 1..n {
                s += self.a[k * n + j] * x[j];
            }
            x[k] = s / self.d[k];
        }
        x
    }

    /// Solves `y^T (-Q_TT) = e_start^T`; `y_j` is the expected time spent in `j`.
    pub(crate) fn occupancy(&self, start: usize) -> Vec<f64> {
        let n = self.n;
        let mut w = vec![0.0; n];
        for j in 0..n {
            let mut s = if j == start { 1.0 } else { 0.0 };
            for i in 0..j {
                s += w[i] * self.a[i * n + j];
            }
            w[j] = s / self.d[j];
        }
        let mut y = w;
        for i in (0..n).rev() {
            let mut s = y[i];
            for l in i + 1..n {
                s += y[l] * self.a[l * n + i];
            }
            y[i] = s;
        }
        y
    }

    /// Pivots of the elimination; their product is `det(-Q_TT)`.
    pub(crate) fn pivots(&self) -> &[f64] {
        &self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    LinearSolve,
    FundamentalMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Mean time to absorption from the initial state, in hours.
    pub mttdl: f64,
    /// Expected hours spent in each state before absorption (zero for absorbing states).
    pub per_state_expected_time: Vec<f64>,
    pub method: SolveMethod,
}

/// MTTDL by solving `(-Q_TT) x = 1` over the transient block.
pub fn mttdl_linear_solve(model: &RateModel) -> Result<SolveResult, CtmcError> {
    model.validate()?;
    let mut per_state = vec![0.0; model.len()];
    let Some(start) = model.transient_block_index(model.initial) else {
        return Ok(SolveResult { mttdl: 0.0, per_state_expected_time: per_state, method: SolveMethod::LinearSolve });
    };
    let block = model.transient_block();
    let n = block.global.len();
    let elim = Elimination::factor(block.a, block.r, n)?;
    let x = elim.solve(&vec![1.0; n]);
    let y = elim.occupancy(start);
    for (l, &g) in block.global.iter().enumerate() {
        per_state[g] = y[l];
    }
    Ok(SolveResult { mttdl: x[start], per_state_expected_time: per_state, method: SolveMethod::LinearSolve })
}

impl RateModel {
    fn transient_block_index(&self, state: usize) -> Option<usize> {
        if self.absorbing[state] {
            None
        } else {
            Some((0..state).filter(|&i| !self.absorbing[i]).count())
        }
    }
}

/// Row-stochastic embedded jump matrix `P = I + Q̄`, `q̄_ij = q_ij / |q_ii|`.
pub fn to_probability_matrix(model: &RateModel) -> Result<DMatrix<f64>, CtmcError> {
    let n = model.len();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        if model.absorbing[i] {
            p[(i, i)] = 1.0;
            continue;
        }
        let out = model.exit_rate(i);
        if !(out > 0.0) {
            return Err(CtmcError::ZeroExit(i));
        }
        for ((_, j), r) in model.rates.range((i, 0)..(i + 1, 0)) {
            p[(i, *j)] = r / out;
        }
    }
    Ok(p)
}

/// MTTDL from the fundamental matrix `M = (I - L)^{-1}` as `-Σ_j m_1j / q_jj`.
///
/// Uses a pivoted LU factorization, so it is intended for well-conditioned models.
pub fn fundamental_matrix_mttdl(model: &RateModel) -> Result<SolveResult, CtmcError> {
    model.validate()?;
    let p = to_probability_matrix(model)?;
    let mut per_state = vec![0.0; model.len()];
    let Some(start) = model.transient_block_index(model.initial) else {
        return Ok(SolveResult {
            mttdl: 0.0,
            per_state_expected_time: per_state,
            method: SolveMethod::FundamentalMatrix,
        });
    };
    let block = model.transient_block();
    let n = block.global.len();
    let mut i_minus_l = DMatrix::identity(n, n);
    for (li, &gi) in block.global.iter().enumerate() {
        for (lj, &gj) in block.global.iter().enumerate() {
            i_minus_l[(li, lj)] -= p[(gi, gj)];
        }
    }
    let mut e = DVector::zeros(n);
    e[start] = 1.0;
    // Row `start` of M is the solution of (I - L)^T y = e_start.
    let visits = i_minus_l.transpose().lu().solve(&e).ok_or(CtmcError::Singular)?;
    let mut total = 0.0;
    for (l, &g) in block.global.iter().enumerate() {
        let t = visits[l] / model.exit_rate(g);
        per_state[g] = t;
        total += t;
    }
    if !total.is_finite() {
        return Err(CtmcError::Singular);
    }
    Ok(SolveResult { mttdl: total, per_state_expected_time: per_state, method: SolveMethod::FundamentalMatrix })
}

/// Probability of having been absorbed by time `t`, by uniformization.
///
/// The series is truncated once the remaining Poisson tail is below `1e-12`
/// relative to the accumulated value.
pub fn unreliability_at(model: &RateModel, t: f64) -> Result<f64, CtmcError> {
    if !(t >= 0.0) {
        return Err(CtmcError::NegativeTime(t));
    }
    let Some(start) = model.transient_block_index(model.initial) else {
        return Ok(1.0);
    };
    if t == 0.0 {
        return Ok(0.0);
    }
    let block = model.transient_block();
    let n = block.global.len();
    let mut out = vec![0.0; n];
    let mut edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        out[i] = block.r[i];
        for j in 0..n {
            let v = block.a[i * n + j];
            if v > 0.0 && i != j {
                edges[i].push((j, v));
                out[i] += v;
            }
        }
    }
    let rate = out.iter().cloned().fold(0.0, f64::max);
    if rate == 0.0 {
        return Ok(0.0);
    }
    let lt = rate * t;
    let ln_lt = lt.ln();
    let cap = (lt + 60.0 * lt.sqrt() + 200.0).ceil() as usize;

    let mut pi = vec![0.0; n];
    pi[start] = 1.0;
    let mut next = vec![0.0; n];
    let mut absorbed = 0.0_f64;
    let mut ln_w = -lt;
    let mut sum = 0.0_f64;
    for step in 0..=cap {
        let w = ln_w.exp();
        sum += w * absorbed;
        if step as f64 > lt {
            let ratio = lt / (step as f64 + 1.0);
            let tail = w * ratio / (1.0 - ratio);
            if tail <= 1e-12 * sum || tail < f64::MIN_POSITIVE {
                break;
            }
        }
        // one step of the uniformized chain
        let mut gained = 0.0;
        for x in next.iter_mut() {
            *x = 0.0;
        }
        for i in 0..n {
            let m = pi[i];
            if m == 0.0 {
                continue;
            }
            let stay = 1.0 - out[i] / rate;
            next[i] += m * stay;
            for &(j, v) in &edges[i] {
                next[j] += m * v / rate;
            }
            gained += m * block.r[i] / rate;
        }
        absorbed += gained;
        std::mem::swap(&mut pi, &mut next);
        ln_w += ln_lt - ((step + 1) as f64).ln();
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// `R(t)`: probability that no absorbing state has been entered by time `t`.
pub fn reliability_at(model: &RateModel, t: f64) -> Result<f64, CtmcError> {
    Ok(1.0 - unreliability_at(model, t)?)
}

/// Durability nines `⌊log10(1/(1 - e^{-horizon/mttdl}))⌋` with the default cap.
pub fn durability_nines(mttdl: f64, horizon: f64) -> u32 {
    durability_nines_capped(mttdl, horizon, DEFAULT_NINES_CAP)
}

pub fn durability_nines_capped(mttdl: f64, horizon: f64, cap: u32) -> u32 {
    let u = -(-horizon / mttdl).exp_m1();
    nines_from_unreliability(u, cap)
}

/// Nines from an unreliability value `1 - R`.
pub fn nines_from_unreliability(u: f64, cap: u32) -> u32 {
    if !(u > 0.0) {
        return cap;
    }
    let v = (-u.log10()).floor();
    if v <= 0.0 {
        0
    } else if v >= cap as f64 {
        cap
    } else {
        v as u32
    }
}

/// The canonical `(n, m)` model with concurrent repair: state `x` failures,
/// failure rate `(n-x)λ`, repair back to the all-healthy state at rate `xμ`.
pub fn canonical_model(m: usize, c: usize, lambda: f64, mu: f64) -> RateModel {
    let n = m + c;
    let mut states: Vec<String> = (0..=c).map(|x| format!("{}", n - x)).collect();
    states.push("F".to_string());
    let f = c + 1;
    let mut model = RateModel::new(states, 0, &[f]).expect("valid layout");
    for x in 0..=c {
        let to = if x == c { f } else { x + 1 };
        model.add_rate(x, to, (n - x) as f64 * lambda).expect("finite rate");
        if x > 0 {
            model.add_rate(x, 0, x as f64 * mu).expect("finite rate");
        }
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn two_state(r: f64) -> RateModel {
        let mut m = RateModel::new(vec!["up".into(), "F".into()], 0, &[1]).unwrap();
        m.add_rate(0, 1, r).unwrap();
        m
    }

    #[test]
    fn no_repair_parity_pair() {
        let lambda = 5e-6;
        let m = canonical_model(1, 1, lambda, 0.0);
        let res = mttdl_linear_solve(&m).unwrap();
        assert_relative_eq!(res.mttdl, 3.0e5, max_relative = 1e-12);
        let sum: f64 = res.per_state_expected_time.iter().sum();
        assert_relative_eq!(sum, res.mttdl, max_relative = 1e-12);
    }

    #[test]
    fn canonical_c1_matches_closed_form() {
        let (lambda, mu) = (1.0 / 200_000.0, 1.0 / 24.0);
        let n = 2.0;
        let expect = (mu + lambda * (2.0 * n - 1.0)) / (lambda * lambda * n * (n - 1.0));
        let res = mttdl_linear_solve(&canonical_model(1, 1, lambda, mu)).unwrap();
        assert_relative_eq!(res.mttdl, expect, max_relative = 1e-9);
        let fm = fundamental_matrix_mttdl(&canonical_model(1, 1, lambda, mu)).unwrap();
        assert_relative_eq!(fm.mttdl, res.mttdl, max_relative = 1e-6);
    }

    #[test]
    fn single_transient_state() {
        let m = two_state(0.25);
        assert_relative_eq!(mttdl_linear_solve(&m).unwrap().mttdl, 4.0);
        assert_relative_eq!(fundamental_matrix_mttdl(&m).unwrap().mttdl, 4.0);
    }

    #[test]
    fn probability_matrix_rows() {
        let p = to_probability_matrix(&two_state(3.0)).unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]));
        let (lambda, mu) = (1e-4, 1e-2);
        let p = to_probability_matrix(&canonical_model(1, 1, lambda, mu)).unwrap();
        assert_relative_eq!(p[(1, 0)], mu / (lambda + mu), max_relative = 1e-15);
        assert_relative_eq!(p[(1, 2)], lambda / (lambda + mu), max_relative = 1e-15);
    }

    #[test]
    fn reliability_basics() {
        let m = canonical_model(3, 0, 1e-3, 0.0);
        assert_eq!(reliability_at(&m, 0.0).unwrap(), 1.0);
        for t in [1.0, 100.0, 5000.0] {
            assert_abs_diff_eq!(reliability_at(&m, t).unwrap(), (-3e-3 * t).exp(), epsilon = 1e-11);
        }
        assert!(matches!(reliability_at(&m, -1.0), Err(CtmcError::NegativeTime(_))));
    }

    #[test]
    fn unreliability_small_values_keep_precision() {
        let m = two_state(1e-12);
        let u = unreliability_at(&m, 10.0).unwrap();
        assert_relative_eq!(u, -(-1e-11_f64).exp_m1(), max_relative = 1e-9);
    }

    #[test]
    fn nines_examples() {
        assert_eq!(durability_nines(2.5e6, 8760.0), 2);
        assert_eq!(durability_nines(1.0, 8760.0), 0);
        assert_eq!(durability_nines(f64::INFINITY, 8760.0), DEFAULT_NINES_CAP);
    }

    #[test]
    fn unreachable_absorption_is_rejected() {
        let mut m = RateModel::new(vec!["a".into(), "b".into(), "F".into()], 0, &[2]).unwrap();
        m.add_rate(0, 1, 1.0).unwrap();
        m.add_rate(1, 0, 1.0).unwrap();
        assert_eq!(mttdl_linear_solve(&m), Err(CtmcError::Unreachable(0)));
    }

    #[test]
    fn absorbing_state_cannot_exit() {
        let mut m = RateModel::new(vec!["a".into(), "F".into()], 0, &[1]).unwrap();
        assert_eq!(m.add_rate(1, 0, 1.0), Err(CtmcError::AbsorbingExit(1)));
    }

    #[test]
    fn json_round_trip() {
        let m = canonical_model(2, 2, 1e-5, 1e-1);
        let back = RateModel::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
    }
}
