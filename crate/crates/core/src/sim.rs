//! Monte Carlo replicates of absorbing Markov chains and of the cold-storage
//! model, with optional failure biasing.
//!
//! Replicate `r` draws from ChaCha8 seeded with the master seed on stream `r`,
//! so outcomes do not depend on how replicates are scheduled.

use std::collections::VecDeque;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coldstore::{carrier_survival, ColdError, ColdModel, ColdState};
use crate::ctmc::{CtmcError, RateModel};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("no replicates of the requested kind ({0})")]
    NoEvents(&'static str),
    #[error(transparent)]
    Ctmc(#[from] CtmcError),
    #[error(transparent)]
    Cold(#[from] ColdError),
    #[error("thread pool: {0}")]
    Threads(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    /// exponential holding times of a rate model
    #[default]
    Markov,
    /// per-node carriers with Weibull exchange budgets
    ColdFull,
    /// exponential-tail detection and repair rates frozen at state entry
    ColdApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// each replicate runs to absorption
    #[default]
    Direct,
    /// each replicate is one excursion from the initial state; the mean time
    /// is `E[cycle length] / P(absorbed in a cycle)`
    Regenerative,
}

/// Failure biasing: once `threshold` failures are outstanding, transitions
/// that move further from the initial state are sped up by `factor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bias {
    pub threshold: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub mode: SimMode,
    #[serde(default)]
    pub bias: Option<Bias>,
    #[serde(default)]
    pub estimator: Estimator,
    /// worker threads; `None` uses the global pool
    #[serde(default)]
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        SimConfig {
            replicates,
            seed,
            horizon: None,
            mode: SimMode::Markov,
            bias: None,
            estimator: Estimator::Direct,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.replicates == 0 {
            return Err(SimError::Config("replicates must be at least 1".into()));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return Err(SimError::Config(format!("horizon must be positive, got {h}")));
            }
        }
        if let Some(b) = self.bias {
            if !(b.factor >= 1.0 && b.factor.is_finite()) {
                return Err(SimError::Config(format!("bias factor must be >= 1, got {}", b.factor)));
            }
            if self.mode != SimMode::Markov {
                return Err(SimError::Config("failure biasing is only available in markov mode".into()));
            }
        }
        if self.estimator == Estimator::Regenerative && self.mode != SimMode::Markov {
            return Err(SimError::Config("the regenerative estimator needs markov mode".into()));
        }
        if self.threads == Some(0) {
            return Err(SimError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    DataLoss,
    /// absorbed while some carrier was down
    Unavailability,
    /// horizon reached first
    Censored,
    /// returned to the initial state (regenerative estimator)
    Regenerated,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::DataLoss => "data-loss",
            EventKind::Unavailability => "unavailability",
            EventKind::Censored => "censored",
            EventKind::Regenerated => "regenerated",
        }
    }

    fn absorbed(&self) -> bool {
        matches!(self, EventKind::DataLoss | EventKind::Unavailability)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub times: Vec<f64>,
    pub kinds: Vec<EventKind>,
    pub weights: Vec<f64>,
    pub estimator: Estimator,
    pub warnings: Vec<String>,
}

/// What to simulate.
#[derive(Debug, Clone, PartialEq)]
pub enum SimModel {
    Markov(RateModel),
    Cold(ColdModel),
}

struct Replicate {
    time: f64,
    kind: EventKind,
    weight: f64,
}

// Precomputed transitions of a rate model with failure levels.
struct Chain {
    out: Vec<Vec<(usize, f64, bool)>>,
    totals: Vec<f64>,
    level: Vec<usize>,
    absorbing: Vec<bool>,
    initial: usize,
}

impl Chain {
    fn new(model: &RateModel) -> Result<Self, SimError> {
        model.validate()?;
        let n = model.len();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (f, t, r) in model.transitions() {
            adj[f].push((t, r));
        }
        let mut level = vec![usize::MAX; n];
        level[model.initial()] = 0;
        let mut queue = VecDeque::from([model.initial()]);
        while let Some(s) = queue.pop_front() {
            for &(t, _) in &adj[s] {
                if level[t] == usize::MAX {
                    level[t] = level[s] + 1;
                    queue.push_back(t);
                }
            }
        }
        let absorbing: Vec<bool> = (0..n).map(|i| model.is_absorbing(i)).collect();
        let out = adj
            .iter()
            .enumerate()
            .map(|(s, v)| v.iter().map(|&(t, r)| (t, r, absorbing[t] || level[t] > level[s])).collect())
            .collect();
        let totals = (0..n).map(|s| model.exit_rate(s)).collect();
        Ok(Chain { out, totals, level, absorbing, initial: model.initial() })
    }

    fn run(&self, rng: &mut ChaCha8Rng, cfg: &SimConfig) -> Replicate {
        let mut s = self.initial;
        let mut t = 0.0;
        let mut w = 1.0;
        let mut rates = Vec::new();
        loop {
            if self.absorbing[s] {
                return Replicate { time: t, kind: EventKind::DataLoss, weight: w };
            }
            let factor = match cfg.bias {
                Some(b) if self.level[s] >= b.threshold => b.factor,
                _ => 1.0,
            };
            if factor == 1.0 {
                let total = self.totals[s];
                let e: f64 = Exp1.sample(rng);
                let dt = e / total;
                if let Some(h) = cfg.horizon {
                    if t + dt > h {
                        return Replicate { time: h, kind: EventKind::Censored, weight: w };
                    }
                }
                t += dt;
                let mut u = rng.random::<f64>() * total;
                let out = &self.out[s];
                let mut next = out[out.len() - 1].0;
                for &(to, r, _) in out {
                    if u < r {
                        next = to;
                        break;
                    }
                    u -= r;
                }
                s = next;
                if cfg.estimator == Estimator::Regenerative && s == self.initial {
                    return Replicate { time: t, kind: EventKind::Regenerated, weight: w };
                }
                continue;
            }
            rates.clear();
            let (mut total, mut biased) = (0.0, 0.0);
            for &(_, r, fwd) in &self.out[s] {
                let b = if fwd { r * factor } else { r };
                total += r;
                biased += b;
                rates.push(b);
            }
            let e: f64 = Exp1.sample(rng);
            let dt = e / biased;
            if let Some(h) = cfg.horizon {
                if t + dt > h {
                    if factor != 1.0 {
                        w *= (-(total - biased) * (h - t)).exp();
                    }
                    return Replicate { time: h, kind: EventKind::Censored, weight: w };
                }
            }
            t += dt;
            let pick = pick_index(&rates, biased, rng);
            if factor != 1.0 {
                let (_, r, _) = self.out[s][pick];
                w *= r / rates[pick] * (-(total - biased) * dt).exp();
            }
            s = self.out[s][pick].0;
            if cfg.estimator == Estimator::Regenerative && s == self.initial {
                return Replicate { time: t, kind: EventKind::Regenerated, weight: w };
            }
        }
    }
}

fn pick_index(rates: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (i, r) in rates.iter().enumerate() {
        if u < *r {
            return i;
        }
        u -= r;
    }
    rates.iter().rposition(|r| *r > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeStatus {
    Available,
    Failed,
    Detected,
}

struct Carrier {
    up: bool,
    /// absolute time of the next failure (when up) or repair (when down)
    next: f64,
}

struct ColdSim<'a> {
    model: &'a ColdModel,
    deltas: Vec<f64>,
}

impl<'a> ColdSim<'a> {
    fn new(model: &'a ColdModel) -> Result<Self, SimError> {
        model.validate()?;
        Ok(ColdSim { model, deltas: model.deltas()? })
    }

    fn carrier_life(&self, rng: &mut ChaCha8Rng) -> f64 {
        let budget = self.model.weibull.sample(rng) as f64;
        let g = Gamma::new(budget, 1.0 / self.model.exchange_rate).expect("positive shape and scale");
        g.sample(rng)
    }

    fn uniform_pick(
        nodes: &[NodeStatus],
        carriers: Option<&[Carrier]>,
        want: NodeStatus,
        count: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let mut target = rng.random_range(0..count);
        for (i, s) in nodes.iter().enumerate() {
            if *s == want && carriers.is_none_or(|c| c[i].up) {
                if target == 0 {
                    return i;
                }
                target -= 1;
            }
        }
        unreachable!("count matches eligible nodes")
    }

    fn run_full(&self, rng: &mut ChaCha8Rng, horizon: Option<f64>) -> Replicate {
        let m = self.model;
        let mut nodes = vec![NodeStatus::Available; m.n];
        let mut carriers: Vec<Carrier> = (0..m.n).map(|_| Carrier { up: true, next: self.carrier_life(rng) }).collect();
        let mut t = 0.0;
        loop {
            let (mut a, mut f_up, mut d_up, mut a_up) = (0, 0, 0, 0);
            for (s, c) in nodes.iter().zip(&carriers) {
                match s {
                    NodeStatus::Available => {
                        a += 1;
                        a_up += c.up as usize;
                    }
                    NodeStatus::Failed => f_up += c.up as usize,
                    NodeStatus::Detected => d_up += c.up as usize,
                }
            }
            if a_up < m.k {
                d_up = 0;
            }
            let (rf, rd, rr) = (a as f64 * m.lambda, f_up as f64 * m.theta, d_up as f64 * m.mu);
            let total = rf + rd + rr;
            let e: f64 = Exp1.sample(rng);
            let dt = e / total;
            let (ci, cnext) = carriers
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.next))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .expect("n > 0");
            let next = (t + dt).min(cnext);
            if let Some(h) = horizon {
                if next > h {
                    return Replicate { time: h, kind: EventKind::Censored, weight: 1.0 };
                }
            }
            if cnext <= t + dt {
                t = cnext;
                let c = &mut carriers[ci];
                if c.up {
                    let e: f64 = Exp1.sample(rng);
                    *c = Carrier { up: false, next: t + e / m.phi };
                } else {
                    let life = self.carrier_life(rng);
                    *c = Carrier { up: true, next: t + life };
                }
                continue;
            }
            t += dt;
            let u = rng.random::<f64>() * total;
            if u < rf {
                if rng.random::<f64>() >= self.deltas[a] {
                    let kind =
                        if carriers.iter().all(|c| c.up) { EventKind::DataLoss } else { EventKind::Unavailability };
                    return Replicate { time: t, kind, weight: 1.0 };
                }
                let i = Self::uniform_pick(&nodes, None, NodeStatus::Available, a, rng);
                nodes[i] = NodeStatus::Failed;
            } else if u < rf + rd {
                let i = Self::uniform_pick(&nodes, Some(&carriers), NodeStatus::Failed, f_up, rng);
                nodes[i] = NodeStatus::Detected;
            } else {
                let i = Self::uniform_pick(&nodes, Some(&carriers), NodeStatus::Detected, d_up, rng);
                nodes[i] = NodeStatus::Available;
            }
        }
    }

    fn run_approx(&self, rng: &mut ChaCha8Rng, horizon: Option<f64>) -> Result<Replicate, ColdError> {
        let m = self.model;
        let budgets: Vec<f64> = (0..m.n).map(|_| m.weibull.sample(rng) as f64).collect();
        let mut nodes = vec![NodeStatus::Available; m.n];
        let mut t = 0.0;
        let (mut av, mut fa, mut de) = (Vec::new(), Vec::new(), Vec::new());
        loop {
            av.clear();
            fa.clear();
            de.clear();
            for (i, s) in nodes.iter().enumerate() {
                let b = carrier_survival(budgets[i], m.exchange_rate, t);
                match s {
                    NodeStatus::Available => av.push(b),
                    NodeStatus::Failed => fa.push(b),
                    NodeStatus::Detected => de.push(b),
                }
            }
            let st = ColdState::new(av.len(), fa.len(), de.len());
            let (detect, repair) = m.approx_rates(st, &av, &fa, &de)?;
            let rf = st.a as f64 * m.lambda;
            let total = rf + detect + repair;
            let e: f64 = Exp1.sample(rng);
            t += e / total;
            if let Some(h) = horizon {
                if t > h {
                    return Ok(Replicate { time: h, kind: EventKind::Censored, weight: 1.0 });
                }
            }
            let u = rng.random::<f64>() * total;
            let (want, count) = if u < rf {
                if rng.random::<f64>() >= self.deltas[st.a] {
                    return Ok(Replicate { time: t, kind: EventKind::DataLoss, weight: 1.0 });
                }
                (NodeStatus::Available, st.a)
            } else if u < rf + detect {
                (NodeStatus::Failed, st.f)
            } else {
                (NodeStatus::Detected, st.d)
            };
            let i = Self::uniform_pick(&nodes, None, want, count, rng);
            nodes[i] = match want {
                NodeStatus::Available => NodeStatus::Failed,
                NodeStatus::Failed => NodeStatus::Detected,
                NodeStatus::Detected => NodeStatus::Available,
            };
        }
    }
}

fn replicate_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

fn map_replicates<T: Send>(
    count: usize,
    threads: Option<usize>,
    f: impl Fn(usize) -> T + Sync + Send,
) -> Result<Vec<T>, SimError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let run = || (0..count).into_par_iter().map(&f).collect();
        match threads {
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| SimError::Threads(e.to_string()))?;
                Ok(pool.install(run))
            }
            None => Ok(run()),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok((0..count).map(f).collect())
    }
}

/// Effective sample size below this fraction of the replicates is flagged.
pub const MIN_ESS_FRACTION: f64 = 0.05;

pub fn run_replicates(model: &SimModel, cfg: &SimConfig) -> Result<SimOutcome, SimError> {
    cfg.validate()?;
    let reps: Vec<Replicate> = match (model, cfg.mode) {
        (SimModel::Markov(rm), SimMode::Markov) => {
            let chain = Chain::new(rm)?;
            map_replicates(cfg.replicates, cfg.threads, |r| chain.run(&mut replicate_rng(cfg.seed, r), cfg))?
        }
        (SimModel::Cold(cm), SimMode::Markov) => {
            let chain = Chain::new(&cm.hard_error_model()?)?;
            map_replicates(cfg.replicates, cfg.threads, |r| chain.run(&mut replicate_rng(cfg.seed, r), cfg))?
        }
        (SimModel::Cold(cm), SimMode::ColdFull) => {
            let sim = ColdSim::new(cm)?;
            map_replicates(cfg.replicates, cfg.threads, |r| sim.run_full(&mut replicate_rng(cfg.seed, r), cfg.horizon))?
        }
        (SimModel::Cold(cm), SimMode::ColdApprox) => {
            let sim = ColdSim::new(cm)?;
            map_replicates(cfg.replicates, cfg.threads, |r| {
                sim.run_approx(&mut replicate_rng(cfg.seed, r), cfg.horizon)
            })?
            .into_iter()
            .collect::<Result<_, _>>()?
        }
        (SimModel::Markov(_), mode) => {
            return Err(SimError::Config(format!("{mode:?} mode needs a cold-storage model")));
        }
    };
    let mut out = SimOutcome {
        times: reps.iter().map(|r| r.time).collect(),
        kinds: reps.iter().map(|r| r.kind).collect(),
        weights: reps.iter().map(|r| r.weight).collect(),
        estimator: cfg.estimator,
        warnings: Vec::new(),
    };
    if cfg.bias.is_some() {
        let ess = out.effective_sample_size();
        if ess < MIN_ESS_FRACTION * out.len() as f64 {
            out.warnings
                .push(format!("weights are degenerate: effective sample size {ess:.1} of {} replicates", out.len()));
        }
    }
    Ok(out)
}

/// [`run_replicates`] with biasing required.
pub fn failure_biasing(model: &SimModel, cfg: &SimConfig) -> Result<SimOutcome, SimError> {
    if cfg.bias.is_none() {
        return Err(SimError::Config("failure biasing needs a bias setting".into()));
    }
    run_replicates(model, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    /// 95% normal interval
    pub ci: (f64, f64),
    pub n: usize,
}

impl Estimate {
    fn new(value: f64, std_err: f64, n: usize) -> Self {
        let h = 1.959963984540054 * std_err;
        Estimate { value, std_err, ci: (value - h, value + h), n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeKind {
    DataLoss,
    Unavailability,
    Either,
}

impl SimOutcome {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn censored(&self) -> usize {
        self.kinds.iter().filter(|k| **k == EventKind::Censored).count()
    }

    pub fn effective_sample_size(&self) -> f64 {
        let s: f64 = self.weights.iter().sum();
        let s2: f64 = self.weights.iter().map(|w| w * w).sum();
        if s2 == 0.0 {
            0.0
        } else {
            s * s / s2
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("replicate,time_hours,kind,weight\n");
        for i in 0..self.len() {
            s.push_str(&format!("{i},{},{},{}\n", self.times[i], self.kinds[i].as_str(), self.weights[i]));
        }
        s
    }

    pub fn summary(&self) -> Summary {
        Summary {
            mttdl: estimate_mean_time(self, TimeKind::DataLoss).ok(),
            mttdu: estimate_mean_time(self, TimeKind::Either).ok(),
            n: self.len(),
            censored: self.censored(),
            effective_sample_size: self.effective_sample_size(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mttdl: Option<Estimate>,
    pub mttdu: Option<Estimate>,
    pub n: usize,
    pub censored: usize,
    pub effective_sample_size: f64,
    pub warnings: Vec<String>,
}

fn kind_matches(k: EventKind, want: TimeKind) -> bool {
    match want {
        TimeKind::DataLoss => k == EventKind::DataLoss,
        TimeKind::Unavailability => k == EventKind::Unavailability,
        TimeKind::Either => k.absorbed(),
    }
}

/// Weighted mean absorption time over replicates of the requested kind;
/// censored replicates are left out. For regenerative outcomes this is the
/// ratio of mean cycle length to absorption probability.
pub fn estimate_mean_time(o: &SimOutcome, kind: TimeKind) -> Result<Estimate, SimError> {
    let label = match kind {
        TimeKind::DataLoss => "data-loss",
        TimeKind::Unavailability => "unavailability",
        TimeKind::Either => "any absorption",
    };
    match o.estimator {
        Estimator::Direct => {
            let sel: Vec<usize> = (0..o.len()).filter(|&i| kind_matches(o.kinds[i], kind)).collect();
            if sel.is_empty() {
                return Err(SimError::NoEvents(label));
            }
            let sw: f64 = sel.iter().map(|&i| o.weights[i]).sum();
            let mean = sel.iter().map(|&i| o.weights[i] * o.times[i]).sum::<f64>() / sw;
            let var: f64 = sel.iter().map(|&i| (o.weights[i] * (o.times[i] - mean)).powi(2)).sum();
            let m = sel.len() as f64;
            let se = if sel.len() > 1 { (var * m / (m - 1.0)).sqrt() / sw } else { 0.0 };
            Ok(Estimate::new(mean, se, sel.len()))
        }
        Estimator::Regenerative => {
            let n = o.len() as f64;
            let x: Vec<f64> = (0..o.len()).map(|i| o.weights[i] * o.times[i]).collect();
            let y: Vec<f64> =
                (0..o.len()).map(|i| if kind_matches(o.kinds[i], kind) { o.weights[i] } else { 0.0 }).collect();
            let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
            if my == 0.0 {
                return Err(SimError::NoEvents(label));
            }
            let r = mx / my;
            let var = x.iter().zip(&y).map(|(a, b)| (a - r * b).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            Ok(Estimate::new(r, (var / n).sqrt() / my, o.len()))
        }
    }
}

/// `Û(t)`: weighted fraction of replicates absorbed by `t`.
pub fn estimate_unreliability(o: &SimOutcome, t: f64) -> Result<Estimate, SimError> {
    if o.estimator != Estimator::Direct {
        return Err(SimError::Config("unreliability needs direct replicates".into()));
    }
    if o.is_empty() {
        return Err(SimError::NoEvents("any replicate"));
    }
    let n = o.len() as f64;
    let v: Vec<f64> =
        (0..o.len()).map(|i| if o.kinds[i].absorbed() && o.times[i] <= t { o.weights[i] } else { 0.0 }).collect();
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(Estimate::new(mean, (var / n).sqrt(), o.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::mttdl_exact;
    use crate::ctmc::{canonical_model, mttdl_linear_solve, reliability_at};

    fn markov(m: RateModel) -> SimModel {
        SimModel::Markov(m)
    }

    #[test]
    fn canonical_mean_matches_closed_form() {
        let (lambda, mu) = (1.0 / 5000.0, 1.0 / 24.0);
        let o = run_replicates(&markov(canonical_model(1, 1, lambda, mu)), &SimConfig::new(10_000, 1)).unwrap();
        let est = estimate_mean_time(&o, TimeKind::DataLoss).unwrap();
        let exact = mttdl_exact(1, 1, lambda, mu).unwrap();
        assert!((est.value - exact).abs() < 3.0 * est.std_err, "{est:?} vs {exact}");
    }

    #[test]
    fn no_repair_pair() {
        let lambda = 1e-3;
        let o = run_replicates(&markov(canonical_model(1, 1, lambda, 0.0)), &SimConfig::new(100_000, 2)).unwrap();
        let est = estimate_mean_time(&o, TimeKind::Either).unwrap();
        assert!((est.value * lambda / 1.5 - 1.0).abs() < 0.02, "{est:?}");
    }

    #[test]
    fn unreliability_estimates() {
        let (lambda, mu) = (1.0 / 1000.0, 1.0 / 24.0);
        let model = canonical_model(1, 1, lambda, mu);
        let o = run_replicates(&markov(model.clone()), &SimConfig::new(20_000, 3)).unwrap();
        assert_eq!(estimate_unreliability(&o, 0.0).unwrap().value, 0.0);
        assert_eq!(estimate_unreliability(&o, f64::INFINITY).unwrap().value, 1.0);
        let u = estimate_unreliability(&o, 8760.0).unwrap();
        let exact = 1.0 - reliability_at(&model, 8760.0).unwrap();
        assert!((u.value - exact).abs() < 3.0 * u.std_err, "{u:?} vs {exact}");
    }

    #[test]
    fn constant_times() {
        let o = SimOutcome {
            times: vec![5.0; 4],
            kinds: vec![EventKind::DataLoss; 4],
            weights: vec![1.0; 4],
            estimator: Estimator::Direct,
            warnings: Vec::new(),
        };
        let e = estimate_mean_time(&o, TimeKind::DataLoss).unwrap();
        assert_eq!(e.value, 5.0);
        assert_eq!(e.ci, (5.0, 5.0));
        assert!(matches!(estimate_mean_time(&o, TimeKind::Unavailability), Err(SimError::NoEvents(_))));
    }

    #[test]
    fn horizon_censors() {
        let mut cfg = SimConfig::new(500, 4);
        cfg.horizon = Some(10.0);
        let o = run_replicates(&markov(canonical_model(1, 1, 1e-6, 0.1)), &cfg).unwrap();
        assert!(o.censored() > 490);
        assert!(o.times.iter().all(|t| *t <= 10.0));
    }

    #[test]
    fn unit_bias_is_identity() {
        let model = markov(canonical_model(1, 1, 1.0 / 1000.0, 1.0 / 24.0));
        let plain = run_replicates(&model, &SimConfig::new(2000, 5)).unwrap();
        let mut cfg = SimConfig::new(2000, 5);
        cfg.bias = Some(Bias { threshold: 1, factor: 1.0 });
        let biased = run_replicates(&model, &cfg).unwrap();
        assert_eq!(plain, biased);
    }

    #[test]
    fn bias_stays_unbiased() {
        let model = markov(canonical_model(1, 1, 1.0 / 1000.0, 1.0 / 24.0));
        let plain =
            estimate_mean_time(&run_replicates(&model, &SimConfig::new(40_000, 6)).unwrap(), TimeKind::DataLoss)
                .unwrap();
        let mut cfg = SimConfig::new(40_000, 7);
        cfg.bias = Some(Bias { threshold: 1, factor: 3.0 });
        let o = run_replicates(&model, &cfg).unwrap();
        let b = estimate_mean_time(&o, TimeKind::DataLoss).unwrap();
        let se = (plain.std_err.powi(2) + b.std_err.powi(2)).sqrt();
        assert!((plain.value - b.value).abs() < 3.0 * se, "{plain:?} {b:?}");
    }

    #[test]
    fn regenerative_bias_reduces_variance() {
        let model = canonical_model(8, 3, 1.0 / 20000.0, 1.0 / 24.0);
        let exact = mttdl_linear_solve(&model).unwrap().mttdl;
        let mut cfg = SimConfig::new(200_000, 8);
        cfg.estimator = Estimator::Regenerative;
        let plain = run_replicates(&markov(model.clone()), &cfg).unwrap();
        cfg.bias = Some(Bias { threshold: 1, factor: 40.0 });
        let biased = run_replicates(&markov(model), &cfg).unwrap();
        let b = estimate_mean_time(&biased, TimeKind::DataLoss).unwrap();
        assert!((b.value / exact - 1.0).abs() < 3.0 * b.std_err / exact, "{b:?} vs {exact}");
        assert!(biased.warnings.is_empty(), "{:?}", biased.warnings);
        match estimate_mean_time(&plain, TimeKind::DataLoss) {
            Ok(p) => assert!(b.std_err / b.value < p.std_err / p.value, "{p:?} {b:?}"),
            Err(SimError::NoEvents(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn csv_and_summary() {
        let o = run_replicates(&markov(canonical_model(1, 1, 1e-3, 0.0)), &SimConfig::new(3, 9)).unwrap();
        let csv = o.to_csv();
        assert!(csv.starts_with("replicate,time_hours,kind,weight\n0,"));
        assert_eq!(csv.lines().count(), 4);
        let s = o.summary();
        assert_eq!(s.n, 3);
        assert!(s.mttdl.is_some());
        serde_json::to_string(&s).unwrap();
    }

    #[test]
    fn config_errors() {
        let model = markov(canonical_model(1, 1, 1e-3, 0.0));
        assert!(run_replicates(&model, &SimConfig::new(0, 1)).is_err());
        let mut cfg = SimConfig::new(10, 1);
        cfg.bias = Some(Bias { threshold: 1, factor: 0.5 });
        assert!(run_replicates(&model, &cfg).is_err());
        let mut cfg = SimConfig::new(10, 1);
        cfg.mode = SimMode::ColdFull;
        assert!(run_replicates(&model, &cfg).is_err());
    }

    #[test]
    fn cold_modes_run_and_are_deterministic() {
        let mut m = ColdModel::tape_defaults(4, 2);
        m.exchange_rate = 100.0;
        let model = SimModel::Cold(m);
        for mode in [SimMode::ColdFull, SimMode::ColdApprox, SimMode::Markov] {
            let mut cfg = SimConfig::new(200, 11);
            cfg.mode = mode;
            let a = run_replicates(&model, &cfg).unwrap();
            let b = run_replicates(&model, &cfg).unwrap();
            assert_eq!(a, b);
            let lb = m.lower_bound().unwrap();
            let est = estimate_mean_time(&a, TimeKind::Either).unwrap();
            assert!(est.value > 0.5 * lb, "{mode:?} {est:?}");
        }
    }
}
