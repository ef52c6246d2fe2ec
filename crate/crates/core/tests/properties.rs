//! Cross-method properties that need no published numbers.

mod common;

use durability::coldstore::{available_carriers_dist, poisson_binomial_convolution};
use proptest::prelude::*;

#[test]
fn profiles_agree_three_ways() {
    common::profiles_agree().unwrap();
}

#[test]
fn ctmc_methods_agree() {
    common::ctmc_methods_agree(200).unwrap();
}

proptest! {
    #[test]
    fn dft_matches_convolution(betas in prop::collection::vec(0.0f64..=1.0, 1..24), extra in 0usize..4) {
        let n = betas.len() + extra;
        let dft = available_carriers_dist(&betas, n).unwrap();
        let conv = poisson_binomial_convolution(&betas);
        prop_assert_eq!(dft.len(), conv.len());
        for (a, b) in dft.iter().zip(&conv) {
            prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
        }
    }
}

#[test]
fn simulator_unbiased_on_random_models() {
    common::simulator_unbiased(20).unwrap();
}

#[test]
fn results_do_not_depend_on_thread_count() {
    common::thread_count_invariant().unwrap();
}
