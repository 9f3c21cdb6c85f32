//! Line-oriented scenario files: protocol parameters, initial wallets and
//! prices, a trace, and expected values at given steps.
//!
//! ```text
//! param Tliq 2/3
//! param Rliq 1.1
//! param rate linear 0 0.12
//! wallet A 100:T0
//! price T0 1
//! A:dep(50:T0)
//! expect step 1 credit A T0 50
//! expect step 3 health B 10/9 ≈1.11
//! ```

mod parse;
mod render;

use std::fmt;

use crate::ledger::{
    exchange_rate, health_factor, net_worth, AddressId, BlockchainState, InterestRateFn,
    LedgerError, ProtocolParams, TokenId,
};
use crate::rational::{parse_rational, truncate_to, Extended, Rational};
use crate::semantics::{apply_trace_with, initial_state, TraceError, TraceMode, Transaction};

pub use parse::{parse_scenario, parse_transaction, ParseError};
pub use render::{render_scenario, render_state_report, ReportOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioParams {
    pub liq_threshold: Rational,
    pub liq_reward: Rational,
    pub alpha: Rational,
    pub beta: Rational,
}

impl ScenarioParams {
    pub fn protocol(&self) -> Result<ProtocolParams, LedgerError> {
        ProtocolParams::new(
            self.liq_threshold.clone(),
            self.liq_reward.clone(),
            InterestRateFn::linear(self.alpha.clone(), self.beta.clone())?,
        )
    }
}

/// A ledger quantity observed after some step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Quantity {
    Health(AddressId),
    NetWorth(AddressId),
    Wallet(AddressId, TokenId),
    Credit(AddressId, TokenId),
    Debit(AddressId, TokenId),
    Reserve(TokenId),
    ExchangeRate(TokenId),
    Price(TokenId),
}

impl Quantity {
    pub fn evaluate(
        &self,
        params: &ProtocolParams,
        state: &BlockchainState,
    ) -> Result<Extended, LedgerError> {
        Ok(match self {
            Quantity::Health(u) => health_factor(params, state, u)?,
            Quantity::NetWorth(u) => net_worth(state, u)?.into(),
            Quantity::Wallet(u, t) => state.wallet.balance(t, u).into(),
            Quantity::Credit(u, t) => state.pool.credit(t, u).into(),
            Quantity::Debit(u, t) => state.pool.debit(t, u).into(),
            Quantity::Reserve(t) => state.pool.reserve(t).into(),
            Quantity::ExchangeRate(t) => exchange_rate(&state.pool, t).into(),
            Quantity::Price(t) => state.price(t)?.clone().into(),
        })
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Health(u) => write!(f, "health {u}"),
            Quantity::NetWorth(u) => write!(f, "networth {u}"),
            Quantity::Wallet(u, t) => write!(f, "wallet {u} {t}"),
            Quantity::Credit(u, t) => write!(f, "credit {u} {t}"),
            Quantity::Debit(u, t) => write!(f, "debit {u} {t}"),
            Quantity::Reserve(t) => write!(f, "reserve {t}"),
            Quantity::ExchangeRate(t) => write!(f, "rate {t}"),
            Quantity::Price(t) => write!(f, "price {t}"),
        }
    }
}

/// `expect step N <quantity> [exact] [≈approx]`; at least one value is
/// present. Step 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expectation {
    pub step: usize,
    pub quantity: Quantity,
    pub exact: Option<Extended>,
    /// Printed approximation, compared after truncating the actual value to
    /// the same number of decimals.
    pub approx: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub wallets: Vec<(AddressId, TokenId, Rational)>,
    pub prices: Vec<(TokenId, Rational)>,
    pub trace: Vec<Transaction>,
    pub expectations: Vec<Expectation>,
}

impl Scenario {
    pub fn initial_state(&self) -> Result<BlockchainState, LedgerError> {
        initial_state(self.wallets.iter().cloned(), self.prices.iter().cloned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("expectation refers to step {step} but the trace has {len} steps")]
    StepOutOfRange { step: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectationCheck {
    pub expectation: Expectation,
    pub actual: Extended,
    pub exact_ok: Option<bool>,
    pub approx_ok: Option<bool>,
}

impl ExpectationCheck {
    pub fn passed(&self) -> bool {
        self.exact_ok != Some(false) && self.approx_ok != Some(false)
    }
}

/// Whether `actual`, truncated to the decimals printed in `approx`, equals it.
pub fn matches_approx(actual: &Extended, approx: &str) -> bool {
    match actual {
        Extended::Infinity => matches!(approx, "inf" | "+inf"),
        Extended::Finite(value) => {
            let Ok(printed) = parse_rational(approx) else {
                return false;
            };
            let digits = approx.split_once('.').map_or(0, |(_, frac)| frac.len());
            truncate_to(value, digits) == printed
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub params: ProtocolParams,
    /// `states[i]` is the state after `i` steps.
    pub states: Vec<BlockchainState>,
    pub checks: Vec<ExpectationCheck>,
}

impl ScenarioRun {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(ExpectationCheck::passed)
    }
}

/// Runs the trace in strict mode and evaluates every expectation.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun, ScenarioError> {
    let params = scenario.params.protocol()?;
    let initial = scenario.initial_state()?;
    let mut states = vec![initial.clone()];
    apply_trace_with(&params, &initial, &scenario.trace, TraceMode::Strict, |record| {
        if let Ok(post) = record.outcome {
            states.push(post.clone());
        }
    })?;
    let mut checks = Vec::with_capacity(scenario.expectations.len());
    for expectation in &scenario.expectations {
        let state = states.get(expectation.step).ok_or(ScenarioError::StepOutOfRange {
            step: expectation.step,
            len: scenario.trace.len(),
        })?;
        let actual = expectation.quantity.evaluate(&params, state)?;
        let exact_ok = expectation.exact.as_ref().map(|e| *e == actual);
        let approx_ok = expectation.approx.as_deref().map(|a| matches_approx(&actual, a));
        checks.push(ExpectationCheck { expectation: expectation.clone(), actual, exact_ok, approx_ok });
    }
    Ok(ScenarioRun { params, states, checks })
}
