#![allow(dead_code)]

use lpmodel_core::invariants::{generate_trace, FuzzConfig};
use lpmodel_core::rational::ratio;
use lpmodel_core::semantics::apply;
use lpmodel_core::{
    AddressId, BlockchainState, InterestRateFn, ProtocolParams, Rational, TokenId,
};

pub fn t(s: &str) -> TokenId {
    TokenId::new(s)
}

pub fn a(s: &str) -> AddressId {
    AddressId::new(s)
}

pub fn params(threshold: Rational, reward: Rational, alpha: Rational, beta: Rational) -> ProtocolParams {
    ProtocolParams::new(threshold, reward, InterestRateFn::linear(alpha, beta).unwrap()).unwrap()
}

/// Every state visited by the generated trace of `config`, initial state
/// included.
pub fn visited_states(config: &FuzzConfig) -> Vec<BlockchainState> {
    let generated = generate_trace(config).unwrap();
    let mut states = vec![generated.initial.clone()];
    let mut current = generated.initial;
    for tx in &generated.trace {
        current = apply(&config.params, &current, tx).unwrap();
        states.push(current.clone());
    }
    states
}

pub fn config_with_rate(alpha: Rational, beta: Rational, seed: u64) -> FuzzConfig {
    let base = FuzzConfig::default();
    let params = base.params.with_rate(InterestRateFn::linear(alpha, beta).unwrap());
    FuzzConfig { params, seed, ..base }
}

/// `n / den` for a random `n` in `lo..=hi`.
pub fn grid<R: rand::Rng>(rng: &mut R, lo: i64, hi: i64, den: i64) -> Rational {
    ratio(rng.gen_range(lo..=hi), den)
}
