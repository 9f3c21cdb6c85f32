//! Fixtures shared by the benchmarks.

use lpmodel_core::invariants::{generate_trace, FuzzConfig, GeneratedTrace};
use lpmodel_core::scenario::{parse_scenario, Scenario};

pub const FIG1: &str = include_str!("../../../scenarios/fig1.lp");

pub fn fig1() -> Scenario {
    parse_scenario(FIG1).expect("shipped scenario parses")
}

/// A generated trace of `steps` enabled transactions over three users and
/// two tokens.
pub fn generated(seed: u64, steps: usize) -> (FuzzConfig, GeneratedTrace) {
    let config = FuzzConfig { seed, steps, ..FuzzConfig::default() };
    let trace = generate_trace(&config).expect("default config is valid");
    (config, trace)
}
