//! Exact-arithmetic model of a lending pool as a labelled transition
//! system, with gain and health-factor analysis, front-running strategies,
//! price and utilization attacks, invariant checking and a scenario format.

#![allow(clippy::result_large_err, clippy::large_enum_variant)]

pub mod analysis;
pub mod attacks;
pub mod invariants;
pub mod ledger;
pub mod rational;
pub mod scenario;
pub mod semantics;
pub mod strategies;

pub use ledger::{
    AddressId, BlockchainState, InterestRateFn, LedgerError, LendingPoolState, PriceOracle,
    ProtocolParams, TokenId, WalletState,
};
pub use rational::{Extended, Rational};
pub use semantics::{Transaction, TxKind, StepError, TraceMode};
