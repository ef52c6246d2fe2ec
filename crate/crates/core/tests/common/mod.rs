//! Checks shared by the property and acceptance targets. Each returns the
//! first disagreement as an error message.

#![allow(dead_code)]

use durability::closedform::{mttdl_general, GeneralMode, GeneralRates};
use durability::coldstore::{available_carriers_dist, poisson_binomial_convolution, ColdModel};
use durability::ctmc::{fundamental_matrix_mttdl, mttdl_linear_solve, RateModel};
use durability::profile::{
    oracle, profile_2d, profile_from_generator, profile_mds_arrays, profile_mirrored, profile_mirrored_pairs,
    two_d_validity, FaultProfile, GeneratorMatrix,
};
use durability::sim::{estimate_mean_time, run_replicates, SimConfig, SimMode, SimModel, TimeKind};
use num_traits::ToPrimitive;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

pub fn counts(p: &FaultProfile) -> Vec<u64> {
    p.counts().iter().map(|v| v.to_u64().unwrap()).collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Mirrored single-parity code as an explicit generator: `n1 - 1` data
/// groups plus a parity group, each stored `n2` times.
pub fn mirrored_parity_generator(n1: usize, n2: usize) -> GeneratorMatrix {
    let k = n1 - 1;
    let rows: Vec<Vec<u8>> = (0..k)
        .map(|r| {
            (0..n1)
                .flat_map(|g| {
                    let bit = u8::from(g == r || g == k);
                    std::iter::repeat_n(bit, n2)
                })
                .collect()
        })
        .collect();
    GeneratorMatrix::from_rows(&rows).unwrap()
}

/// Closed form, generating function and enumeration agree on every code
/// with at most 20 devices that has all three.
pub fn profiles_agree() -> Check {
    for n1 in 2..=10 {
        for c1 in 0..=2.min(n1) {
            let formula = profile_mirrored(n1, c1, 2).unwrap();
            let gf = profile_mirrored_pairs(n1, c1).unwrap();
            let brute = oracle::grid(n1, c1, 2, 1);
            ensure!(formula == gf, "mirrored n1={n1} c1={c1}: formula and GF differ");
            ensure!(counts(&formula) == brute, "mirrored n1={n1} c1={c1}: formula vs enumeration");
        }
        // c1 = 1 is also a binary code, so rank tests give a third count
        let g = mirrored_parity_generator(n1, 2);
        let by_rank = profile_from_generator(&g, g.n()).unwrap();
        ensure!(
            counts(&by_rank.profile) == counts(&profile_mirrored(n1, 1, 2).unwrap()),
            "mirrored parity n1={n1}: rank enumeration differs"
        );
    }
    for (pi, n) in [(1, 20), (2, 10), (4, 5), (5, 4)] {
        for c in 0..n.min(4) {
            let p = profile_mds_arrays(pi, n, c).unwrap();
            ensure!(counts(&p) == oracle::mds_arrays(pi, n, c), "mds arrays pi={pi} n={n} c={c}");
        }
    }
    for (n1, n2) in [(3, 3), (4, 4), (4, 5), (5, 4), (3, 6)] {
        for c1 in 1..n1 {
            for c2 in 1..n2 {
                let p = profile_2d(n1, n1 - c1, n2, n2 - c2).unwrap();
                ensure!(p.known_up_to() == two_d_validity(c1, c2).min(n1 * n2), "2d {n1}x{n2}: validity range");
                let brute = oracle::grid(n1, c1, n2, c2);
                ensure!(counts(&p) == brute[..=p.known_up_to()], "2d {n1}x{n2} c=({c1},{c2})");
            }
        }
    }
    Ok(())
}

pub fn random_general_rates(rng: &mut ChaCha8Rng, c: usize) -> GeneralRates {
    let lambda = 10f64.powf(rng.random_range(-6.0..-3.0));
    let mu = 10f64.powf(rng.random_range(-2.0..0.0));
    let n = c + rng.random_range(1..20usize);
    let mut lambdas = Vec::new();
    let mut gammas = Vec::new();
    for x in 0..=c {
        let total = (n - x) as f64 * lambda;
        let share = rng.random_range(0.0..0.3);
        gammas.push(total * share);
        lambdas.push(total * (1.0 - share));
    }
    let mus = (1..=c).map(|i| mu * if rng.random() { i as f64 } else { 1.0 }).collect();
    GeneralRates::new(lambdas, gammas, mus).unwrap()
}

/// Determinant closed form, elimination solve and (where conditioned) the
/// fundamental matrix agree to 1e-6 on random birth-death chains.
pub fn ctmc_methods_agree(cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..cases {
        let c = 1 + case % 5;
        let rates = random_general_rates(&mut rng, c);
        let model = rates.to_rate_model();
        let lu = mttdl_linear_solve(&model).unwrap().mttdl;
        let det = mttdl_general(&rates, GeneralMode::Determinant).unwrap();
        ensure!(rel(det, lu) < 1e-6, "case {case}: determinant {det} vs solve {lu}");
        // plain LU loses accuracy as mu/lambda grows
        if c <= 3 {
            let fm = fundamental_matrix_mttdl(&model).unwrap().mttdl;
            ensure!(rel(fm, lu) < 1e-6, "case {case}: fundamental matrix {fm} vs solve {lu}");
        }
    }
    Ok(())
}

pub fn psi_matches_convolution(cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..cases {
        let len = rng.random_range(1..24usize);
        let betas: Vec<f64> = (0..len).map(|_| rng.random()).collect();
        let n = len + rng.random_range(0..4usize);
        let dft = available_carriers_dist(&betas, n).unwrap();
        let conv = poisson_binomial_convolution(&betas);
        for (o, (a, b)) in dft.iter().zip(&conv).enumerate() {
            ensure!((a - b).abs() < 1e-10, "case {case}, o={o}: {a} vs {b}");
        }
    }
    Ok(())
}

/// Small chain with every rate within two decades so runs stay short.
pub fn random_chain(rng: &mut ChaCha8Rng) -> RateModel {
    let transient = rng.random_range(2..6usize);
    let names = (0..=transient).map(|i| format!("s{i}")).collect();
    let mut m = RateModel::new(names, 0, &[transient]).unwrap();
    for from in 0..transient {
        for to in 0..=transient {
            if from != to && rng.random_bool(0.6) {
                m.add_rate(from, to, rng.random_range(0.01..1.0)).unwrap();
            }
        }
        // a path forward keeps absorption certain
        m.add_rate(from, from + 1, rng.random_range(0.01..1.0)).unwrap();
    }
    m
}

pub fn simulator_unbiased(models: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..models {
        let model = random_chain(&mut rng);
        let exact = mttdl_linear_solve(&model).unwrap().mttdl;
        let o = run_replicates(&SimModel::Markov(model), &SimConfig::new(4000, 1000 + case as u64)).unwrap();
        let est = estimate_mean_time(&o, TimeKind::Either).unwrap();
        ensure!((est.value - exact).abs() <= 3.0 * est.std_err, "model {case}: {est:?} vs {exact}");
    }
    Ok(())
}

pub fn thread_count_invariant() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cold = ColdModel::tape_defaults(4, 2);
    cold.exchange_rate = 10.0;
    let cases = [
        (SimModel::Markov(random_chain(&mut rng)), SimMode::Markov),
        (SimModel::Cold(cold), SimMode::ColdFull),
        (SimModel::Cold(cold), SimMode::ColdApprox),
    ];
    for (model, mode) in cases {
        let run = |threads| {
            let mut cfg = SimConfig::new(300, 99);
            cfg.mode = mode;
            cfg.threads = Some(threads);
            run_replicates(&model, &cfg).unwrap()
        };
        let one = run(1);
        for t in [3, 4] {
            ensure!(one == run(t), "{mode:?}: 1 thread and {t} threads differ");
        }
    }
    Ok(())
}
