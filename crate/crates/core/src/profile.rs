//! Fault-tolerance profiles `s_k`, `q_k`, `p_k` and the transition rates they
//! induce in the generalized chain.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closedform::GeneralRates;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("s_{k} is unknown for this profile (known up to k = {known})")]
    Unknown { k: usize, known: usize },
    #[error("generator matrix has rank {rank}, expected {k}")]
    RankDeficient { rank: usize, k: usize },
    #[error("generator matrix parse error: {0}")]
    Parse(String),
    #[error("negative rate lambda_{state} = {value}")]
    NegativeRate { state: usize, value: f64 },
}

pub fn big_binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut v = BigUint::one();
    for i in 0..k {
        v = v * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    v
}

/// `a / b` rounded to f64 without overflowing either operand.
pub fn ratio_f64(a: &BigUint, b: &BigUint) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let shift = b.bits() as i64 - a.bits() as i64 + 64;
    let q = if shift >= 0 { (a << shift as u64) / b } else { (a >> (-shift) as u64) / b };
    q.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(-shift as i32)
}

fn poly_mul(a: &[BigUint], b: &[BigUint]) -> Vec<BigUint> {
    let mut out = vec![BigUint::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_pow(base: &[BigUint], e: usize) -> Vec<BigUint> {
    let mut out = vec![BigUint::one()];
    for _ in 0..e {
        out = poly_mul(&out, base);
    }
    out
}

/// Counts `s_k` of tolerable `k`-failure sets among `n_total` devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileDoc", into = "ProfileDoc")]
pub struct FaultProfile {
    n_total: usize,
    s: Vec<BigUint>,
    known_up_to: usize,
}

#[derive(Serialize, Deserialize)]
struct ProfileDoc {
    n_total: usize,
    s: Vec<String>,
    q: Vec<f64>,
    p: Vec<Option<f64>>,
}

impl TryFrom<ProfileDoc> for FaultProfile {
    type Error = ProfileError;
    fn try_from(doc: ProfileDoc) -> Result<Self, ProfileError> {
        let s = doc
            .s
            .iter()
            .map(|v| v.parse::<BigUint>().map_err(|e| ProfileError::Parse(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        FaultProfile::from_counts(doc.n_total, s)
    }
}

impl From<FaultProfile> for ProfileDoc {
    fn from(p: FaultProfile) -> Self {
        ProfileDoc {
            n_total: p.n_total,
            s: p.s.iter().take(p.known_up_to + 1).map(|v| v.to_string()).collect(),
            q: p.q_vec(),
            p: p.p_vec(),
        }
    }
}

impl FaultProfile {
    /// Profile from `s_0..s_j`; entries past `j` are unknown.
    pub fn from_counts(n_total: usize, mut s: Vec<BigUint>) -> Result<Self, ProfileError> {
        if s.is_empty() {
            return Err(ProfileError::Invalid("empty profile".into()));
        }
        if s.len() > n_total + 1 {
            if s[n_total + 1..].iter().any(|v| !v.is_zero()) {
                return Err(ProfileError::Invalid("counts beyond n_total".into()));
            }
            s.truncate(n_total + 1);
        }
        for (k, v) in s.iter().enumerate() {
            if *v > big_binomial(n_total, k) {
                return Err(ProfileError::Invalid(format!("s_{k} = {v} exceeds C({n_total},{k})")));
            }
        }
        let known_up_to = s.len() - 1;
        s.resize(n_total + 1, BigUint::zero());
        Ok(FaultProfile { n_total, s, known_up_to })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn known_up_to(&self) -> usize {
        self.known_up_to
    }

    pub fn s(&self, k: usize) -> Result<&BigUint, ProfileError> {
        if k > self.known_up_to {
            return Err(ProfileError::Unknown { k, known: self.known_up_to });
        }
        Ok(&self.s[k])
    }

    pub fn counts(&self) -> &[BigUint] {
        &self.s[..=self.known_up_to]
    }

    pub fn q(&self, k: usize) -> Result<f64, ProfileError> {
        if k > self.n_total {
            return Ok(0.0);
        }
        Ok(ratio_f64(self.s(k)?, &big_binomial(self.n_total, k)))
    }

    /// `p_k = q_{k+1} / q_k`, absent when `q_k = 0`.
    pub fn p(&self, k: usize) -> Result<Option<f64>, ProfileError> {
        let sk = self.s(k)?;
        if sk.is_zero() {
            return Ok(None);
        }
        if k >= self.n_total {
            return Ok(Some(0.0));
        }
        let num = self.s(k + 1)? * BigUint::from(k + 1);
        let den = sk * BigUint::from(self.n_total - k);
        Ok(Some(ratio_f64(&num, &den)))
    }

    pub fn q_vec(&self) -> Vec<f64> {
        (0..=self.known_up_to).map(|k| self.q(k).expect("known")).collect()
    }

    pub fn p_vec(&self) -> Vec<Option<f64>> {
        (0..self.known_up_to).map(|k| self.p(k).expect("known")).collect()
    }

    /// Largest `k` with `s_k > 0` within the known range.
    pub fn max_tolerable(&self) -> usize {
        (0..=self.known_up_to).rev().find(|&k| !self.s[k].is_zero()).unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }
}

/// `π` independent MDS arrays of `n` devices each tolerating `c` failures.
pub fn profile_mds_arrays(pi: usize, n: usize, c: usize) -> Result<FaultProfile, ProfileError> {
    if pi == 0 || c >= n {
        return Err(ProfileError::Invalid(format!("need pi >= 1 and c < n, got pi={pi}, n={n}, c={c}")));
    }
    let base: Vec<BigUint> = (0..=c).map(|i| big_binomial(n, i)).collect();
    let mut s = poly_pow(&base, pi);
    s.resize(pi * n + 1, BigUint::zero());
    FaultProfile::from_counts(pi * n, s)
}

/// Largest `k` for which the 2D conjecture is claimed.
pub fn two_d_validity(c1: usize, c2: usize) -> usize {
    (c1 + 1) * (c2 + 1) + c1.min(c2)
}

/// `n1 x n2` product code with column code `(n1, m1)` and row code `(n2, m2)`.
/// Only `k` up to [`two_d_validity`] is known.
pub fn profile_2d(n1: usize, m1: usize, n2: usize, m2: usize) -> Result<FaultProfile, ProfileError> {
    if m1 > n1 || m2 > n2 || n1 == 0 || n2 == 0 {
        return Err(ProfileError::Invalid(format!("need m <= n, got ({n1},{m1}) x ({n2},{m2})")));
    }
    let (c1, c2) = (n1 - m1, n2 - m2);
    let total = n1 * n2;
    let limit = two_d_validity(c1, c2).min(total);
    let square = (c1 + 1) * (c2 + 1);
    let s = (0..=limit)
        .map(|k| {
            let all = big_binomial(total, k);
            if k <= c1 * c2 + c1 + c2 {
                all
            } else {
                all - big_binomial(n1, c1 + 1) * big_binomial(n2, c2 + 1) * big_binomial(total - square, k - square)
            }
        })
        .collect();
    FaultProfile::from_counts(total, s)
}

/// `n1` mirror groups of `n2` replicas whose row code tolerates `c1` lost groups.
pub fn profile_mirrored(n1: usize, c1: usize, n2: usize) -> Result<FaultProfile, ProfileError> {
    if n2 < 2 || c1 > n1 || n1 == 0 {
        return Err(ProfileError::Invalid(format!("need n2 >= 2 and c1 <= n1, got n1={n1}, c1={c1}, n2={n2}")));
    }
    let total = n1 * n2;
    // (1+x)^n2 - x^n2: a group survives unless all replicas fail
    let group: Vec<BigUint> = (0..n2).map(|i| big_binomial(n2, i)).collect();
    let mut pows = vec![vec![BigUint::one()]];
    for _ in 0..n1 {
        let next = poly_mul(pows.last().unwrap(), &group);
        pows.push(next);
    }
    let s = (0..=total)
        .map(|k| {
            let mut acc = BigUint::zero();
            for j in 0..=(k / n2).min(c1) {
                let rest = &pows[n1 - j];
                if let Some(v) = rest.get(k - n2 * j) {
                    acc += big_binomial(n1, j) * v;
                }
            }
            acc
        })
        .collect();
    FaultProfile::from_counts(total, s)
}

/// Generated by `(1+2x)^{n1}` terms, for `n2 = 2` mirrors.
pub fn profile_mirrored_pairs(n1: usize, c1: usize) -> Result<FaultProfile, ProfileError> {
    if c1 > n1 {
        return Err(ProfileError::Invalid(format!("c1 = {c1} exceeds n1 = {n1}")));
    }
    let total = 2 * n1;
    let base = [BigUint::one(), BigUint::from(2u32)];
    let s = (0..=total)
        .map(|k| {
            let mut acc = BigUint::zero();
            for j in 0..=(k / 2).min(c1) {
                let e = n1 - j;
                let i = k - 2 * j;
                if i <= e {
                    acc += big_binomial(n1, j) * big_binomial(e, i) * base[1].pow(i as u32);
                }
            }
            acc
        })
        .collect();
    FaultProfile::from_counts(total, s)
}

/// Binary generator matrix, `k` rows by `n` columns, at most 64 of each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    k: usize,
    n: usize,
    /// column `j` as a `k`-bit word
    cols: Vec<u64>,
}

impl GeneratorMatrix {
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, ProfileError> {
        let k = rows.len();
        if k == 0 || k > 64 {
            return Err(ProfileError::Parse(format!("need 1..=64 rows, got {k}")));
        }
        let n = rows[0].len();
        if n == 0 || n > 64 || rows.iter().any(|r| r.len() != n) {
            return Err(ProfileError::Parse("rows must share a length in 1..=64".into()));
        }
        let mut cols = vec![0u64; n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                match b {
                    0 => {}
                    1 => cols[j] |= 1 << i,
                    _ => return Err(ProfileError::Parse(format!("entry {b} is not a bit"))),
                }
            }
        }
        let g = GeneratorMatrix { k, n, cols };
        let rank = g.rank_of(u64::MAX >> (64 - n));
        if rank != k {
            return Err(ProfileError::RankDeficient { rank, k });
        }
        Ok(g)
    }

    /// One row per line of `0`/`1` characters; blank lines and `#` comments skipped.
    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.chars()
                    .filter(|c| !c.is_whitespace())
                    .map(|c| match c {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        other => Err(ProfileError::Parse(format!("unexpected character {other:?}"))),
                    })
                    .collect::<Result<Vec<u8>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rows(&rows)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn rank_of(&self, keep: u64) -> usize {
        let mut basis = [0u64; 64];
        let mut rank = 0;
        let mut mask = keep;
        while mask != 0 {
            let j = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            let mut v = self.cols[j];
            while v != 0 {
                let top = 63 - v.leading_zeros() as usize;
                if basis[top] == 0 {
                    basis[top] = v;
                    rank += 1;
                    break;
                }
                v ^= basis[top];
            }
            if rank == self.k {
                break;
            }
        }
        rank
    }

    /// Whether the data survives erasure of the columns in `erased`.
    pub fn recoverable(&self, erased: u64) -> bool {
        let all = u64::MAX >> (64 - self.n);
        self.rank_of(all & !erased) == self.k
    }
}

/// Result of enumerating erasure patterns of a generator matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorProfile {
    pub profile: FaultProfile,
    /// minimal erasures as column bitmasks
    pub mel: Vec<u64>,
    /// `mev[i]` counts minimal erasures of weight `i + 1`, for weights up to `n - k`
    pub mev: Vec<usize>,
}

/// Visits every `w`-subset of `n` bits in increasing lexicographic order.
fn for_each_subset(n: usize, w: usize, mut f: impl FnMut(u64)) {
    if w > n {
        return;
    }
    if w == 0 {
        f(0);
        return;
    }
    let mut v: u64 = (1u64 << w) - 1;
    let limit = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    loop {
        f(v);
        let t = v | (v - 1);
        let next = (t.wrapping_add(1)) | (((!t & t.wrapping_add(1)) - 1) >> (v.trailing_zeros() + 1));
        if next > limit || next <= v {
            break;
        }
        v = next;
    }
}

/// Enumerates erasures of weight up to `max_weight`; a pattern containing a
/// known minimal erasure is irrecoverable without a rank test.
pub fn profile_from_generator(g: &GeneratorMatrix, max_weight: usize) -> Result<GeneratorProfile, ProfileError> {
    let n = g.n;
    let redundancy = n - g.k;
    let max_weight = max_weight.min(n);
    let mut mel = Vec::new();
    let mut s = Vec::with_capacity(n + 1);
    // minimal erasures weigh at most n - k + 1
    for w in 0..=max_weight.min(redundancy + 1) {
        let mut good = BigUint::zero();
        let mut fresh = Vec::new();
        for_each_subset(n, w, |e| {
            if mel.iter().any(|&m: &u64| m & !e == 0) {
                return;
            }
            if g.recoverable(e) {
                good += 1u32;
            } else {
                fresh.push(e);
            }
        });
        mel.extend(fresh);
        if w <= redundancy {
            s.push(good);
        }
    }
    // more than n - k erasures leave fewer than k columns
    let known = if max_weight >= redundancy { n } else { max_weight };
    s.resize(known + 1, BigUint::zero());
    // weight n - k + 1 erasures defeat every code, so the vector stops at n - k
    let mut mev = vec![0; redundancy];
    for m in &mel {
        if let Some(slot) = mev.get_mut(m.count_ones() as usize - 1) {
            *slot += 1;
        }
    }
    let profile = FaultProfile::from_counts(n, s)?;
    Ok(GeneratorProfile { profile, mel, mev })
}

/// The (8,4) code used as a worked example for minimal erasures.
pub const EXAMPLE_GENERATOR: &str = include_str!("../data/example2_generator.txt");

/// Failure and loss rates `λ_x`, `γ_x` for `x = 0..=c` with `c = n - m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRates {
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl TransitionRates {
    pub fn with_repair(&self, mus: Vec<f64>) -> Result<GeneralRates, crate::closedform::ClosedFormError> {
        GeneralRates::new(self.lambdas.clone(), self.gammas.clone(), mus)
    }
}

/// `γ_x = (n-x) λ ((1-p_x) + p_x (1-p_{x+1}) (n-x-1) η)` and `λ_x = (n-x)λ - γ_x`
/// for `x < c`; the last state fails at `mλ` with no shortcut.
pub fn transition_rates(
    profile: &FaultProfile,
    lambda: f64,
    eta: f64,
    n: usize,
    m: usize,
) -> Result<TransitionRates, ProfileError> {
    if n != profile.n_total {
        return Err(ProfileError::Invalid(format!("n = {n} but the profile covers {} devices", profile.n_total)));
    }
    rates_with(|k| Ok(profile.p(k)?.unwrap_or(0.0)), lambda, eta, n, m)
}

/// [`transition_rates`] from recoverability fractions `q_0, q_1, ...`;
/// entries past the end count as zero.
pub fn transition_rates_from_q(
    q: &[f64],
    lambda: f64,
    eta: f64,
    n: usize,
    m: usize,
) -> Result<TransitionRates, ProfileError> {
    if let Some(v) = q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(ProfileError::Invalid(format!("recoverability {v} outside [0, 1]")));
    }
    let at = |k: usize| q.get(k).copied().unwrap_or(0.0);
    rates_with(|k| Ok(if at(k) == 0.0 { 0.0 } else { at(k + 1) / at(k) }), lambda, eta, n, m)
}

fn rates_with(
    p: impl Fn(usize) -> Result<f64, ProfileError>,
    lambda: f64,
    eta: f64,
    n: usize,
    m: usize,
) -> Result<TransitionRates, ProfileError> {
    if !(lambda > 0.0) || !(0.0..=1.0).contains(&eta) || m > n {
        return Err(ProfileError::Invalid(format!(
            "need lambda > 0, eta in [0,1], m <= n; got lambda={lambda}, eta={eta}, n={n}, m={m}"
        )));
    }
    let c = n - m;
    let mut lambdas = Vec::with_capacity(c + 1);
    let mut gammas = Vec::with_capacity(c + 1);
    for x in 0..c {
        let j = (n - x) as f64;
        let (px, px1) = (p(x)?, p(x + 1)?);
        let g = j * lambda * ((1.0 - px) + px * (1.0 - px1) * (j - 1.0) * eta);
        let l = j * lambda - g;
        if l < -1e-12 * j * lambda {
            return Err(ProfileError::NegativeRate { state: x, value: l });
        }
        gammas.push(g);
        lambdas.push(l.max(0.0));
    }
    lambdas.push(m as f64 * lambda);
    gammas.push(0.0);
    Ok(TransitionRates { lambdas, gammas })
}

/// Exhaustive oracles over explicit failure patterns.
pub mod oracle {
    use super::*;

    /// Tolerable patterns of each size when array `i` holds devices `i*n..(i+1)*n`.
    pub fn mds_arrays(pi: usize, n: usize, c: usize) -> Vec<u64> {
        let total = pi * n;
        let mut s = vec![0u64; total + 1];
        let group = (1u64 << n) - 1;
        for e in 0u64..(1u64 << total) {
            if (0..pi).all(|i| ((e >> (i * n)) & group).count_ones() as usize <= c) {
                s[e.count_ones() as usize] += 1;
            }
        }
        s
    }

    /// Iterative row/column decoding on an `n1 x n2` grid where each
    /// column (length `n1`) fixes up to `c1` erasures and each row up to `c2`.
    pub fn grid_decodes(n1: usize, c1: usize, n2: usize, c2: usize, mut e: u64) -> bool {
        let cell = |i: usize, j: usize| 1u64 << (i * n2 + j);
        loop {
            let before = e;
            for i in 0..n1 {
                let row: u64 = (0..n2).map(|j| cell(i, j)).sum();
                let cnt = (e & row).count_ones() as usize;
                if cnt > 0 && cnt <= c2 {
                    e &= !row;
                }
            }
            for j in 0..n2 {
                let col: u64 = (0..n1).map(|i| cell(i, j)).sum();
                let cnt = (e & col).count_ones() as usize;
                if cnt > 0 && cnt <= c1 {
                    e &= !col;
                }
            }
            if e == 0 {
                return true;
            }
            if e == before {
                return false;
            }
        }
    }

    pub fn grid(n1: usize, c1: usize, n2: usize, c2: usize) -> Vec<u64> {
        let total = n1 * n2;
        let mut s = vec![0u64; total + 1];
        for e in 0u64..(1u64 << total) {
            if grid_decodes(n1, c1, n2, c2, e) {
                s[e.count_ones() as usize] += 1;
            }
        }
        s
    }

    /// Generator-matrix profile by rank tests on every pattern.
    pub fn generator(g: &GeneratorMatrix) -> Vec<u64> {
        let n = g.n();
        let mut s = vec![0u64; n + 1];
        for e in 0u64..(1u64 << n) {
            if g.recoverable(e) {
                s[e.count_ones() as usize] += 1;
            }
        }
        s
    }
}
