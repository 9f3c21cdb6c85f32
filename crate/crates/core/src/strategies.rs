//! Front-running strategies: a user foresees a liquidation, a price update
//! or an interest accrual and fires actions ahead of it.

use std::fmt;

use num_traits::{Signed, Zero};

use crate::analysis::{gain_of, require_enabled, AnalysisError};
use crate::ledger::{
    credit_value, debt_value, health_factor, AddressId, BlockchainState, InterestRateFn,
    LedgerError, ProtocolParams, TokenId,
};
use crate::rational::{Extended, Rational};
use crate::semantics::{StepError, Transaction, TxKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("{user} is not liquidatable (health {health})")]
    UserHealthy { user: AddressId, health: Extended },
    #[error("{user} needs {required} of {token} but has {available}")]
    InsufficientFunds { user: AddressId, token: TokenId, required: Rational, available: Rational },
    #[error("{tx} is not enabled: {error}")]
    Disabled { tx: Transaction, error: StepError },
    #[error("the interest rate model is not a linear utilization model")]
    UnsupportedRateFn,
    #[error("no closed form for {0}")]
    Unsupported(Transaction),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

impl From<AnalysisError> for StrategyError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Disabled { tx, error } => StrategyError::Disabled { tx, error },
            AnalysisError::Ledger(e) => StrategyError::Ledger(e),
            AnalysisError::NotUserAction(tx) | AnalysisError::NotLiquidation(tx) => {
                StrategyError::Unsupported(tx)
            }
            AnalysisError::NonPositivePrice { token, value } => {
                StrategyError::Ledger(LedgerError::NonPositivePrice { token, value })
            }
        }
    }
}

/// Predicted comparison between `gain(prefix · event)` and `gain(event)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Gt,
    Lt,
    Eq,
    Ge,
    Le,
    Indeterminate,
}

impl Relation {
    pub fn of_sign(value: &Rational) -> Relation {
        if value.is_positive() {
            Relation::Gt
        } else if value.is_negative() {
            Relation::Lt
        } else {
            Relation::Eq
        }
    }

    /// Whether a gain difference `with - without` satisfies the relation.
    pub fn admits(self, difference: &Rational) -> bool {
        match self {
            Relation::Gt => difference.is_positive(),
            Relation::Lt => difference.is_negative(),
            Relation::Eq => difference.is_zero(),
            Relation::Ge => !difference.is_negative(),
            Relation::Le => !difference.is_positive(),
            Relation::Indeterminate => true,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Gt => ">",
            Relation::Lt => "<",
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Le => "<=",
            Relation::Indeterminate => "?",
        })
    }
}

/// A user's transactions placed ahead of a foreseen event, with the
/// predicted effect on the user's gain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyPlan {
    pub user: AddressId,
    pub prefix: Vec<Transaction>,
    pub event: Transaction,
    pub relation: Relation,
    pub predicted_delta: Option<Rational>,
}

impl StrategyPlan {
    /// `gain(prefix · event) - gain(event)`, by execution.
    pub fn executed_delta(
        &self,
        params: &ProtocolParams,
        state: &BlockchainState,
    ) -> Result<Rational, LedgerError> {
        let mut trace = self.prefix.clone();
        trace.push(self.event.clone());
        Ok(gain_of(params, state, &self.user, &trace)?
            - gain_of(params, state, &self.user, std::slice::from_ref(&self.event))?)
    }

    /// Executes both traces and checks the relation and, when present, the
    /// exact delta.
    pub fn verify(&self, params: &ProtocolParams, state: &BlockchainState) -> Result<bool, LedgerError> {
        let delta = self.executed_delta(params, state)?;
        let exact = self.predicted_delta.as_ref().is_none_or(|p| *p == delta);
        Ok(exact && self.relation.admits(&delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvoidanceAction {
    Deposit,
    Repay,
}

impl AvoidanceAction {
    pub fn transaction(self, user: &AddressId, amount: Rational, token: &TokenId) -> Transaction {
        let (user, token) = (user.clone(), token.clone());
        match self {
            AvoidanceAction::Deposit => Transaction::Deposit { user, amount, token },
            AvoidanceAction::Repay => Transaction::Repay { user, amount, token },
        }
    }
}

/// Smallest amount of `token` that, deposited or repaid by an unhealthy
/// user, lifts the health factor to at least 1, which disables every
/// liquidation against them.
///
/// Deposit: `(D / threshold - C) / p`. Repay: `(D - C * threshold) / p`.
pub fn liquidation_avoidance_threshold(
    params: &ProtocolParams,
    state: &BlockchainState,
    user: &AddressId,
    action: AvoidanceAction,
    token: &TokenId,
) -> Result<Rational, StrategyError> {
    let health = health_factor(params, state, user)?;
    if health.at_least_one() {
        return Err(StrategyError::UserHealthy { user: user.clone(), health });
    }
    let credit = credit_value(state, user)?;
    let debt = debt_value(state, user)?;
    let price = state.price(token)?;
    let t = &params.liq_threshold;
    Ok(match action {
        AvoidanceAction::Deposit => (debt / t - credit) / price,
        AvoidanceAction::Repay => (debt - credit * t) / price,
    })
}

/// Checks that the user can actually fire the avoidance action for `amount`.
pub fn check_avoidance_funds(
    state: &BlockchainState,
    user: &AddressId,
    action: AvoidanceAction,
    token: &TokenId,
    amount: &Rational,
) -> Result<(), StrategyError> {
    let mut available = state.wallet.balance(token, user);
    if action == AvoidanceAction::Repay {
        available = available.min(state.pool.debit(token, user));
    }
    if *amount > available {
        return Err(StrategyError::InsufficientFunds {
            user: user.clone(),
            token: token.clone(),
            required: amount.clone(),
            available,
        });
    }
    Ok(())
}

/// The avoidance action needing the smaller amount, with both thresholds.
pub fn cheaper_avoidance(
    params: &ProtocolParams,
    state: &BlockchainState,
    user: &AddressId,
    deposit_token: &TokenId,
    repay_token: &TokenId,
) -> Result<(AvoidanceAction, Rational, Rational), StrategyError> {
    let dep =
        liquidation_avoidance_threshold(params, state, user, AvoidanceAction::Deposit, deposit_token)?;
    let rep =
        liquidation_avoidance_threshold(params, state, user, AvoidanceAction::Repay, repay_token)?;
    let choice = if dep < rep { AvoidanceAction::Deposit } else { AvoidanceAction::Repay };
    Ok((choice, dep, rep))
}

/// Plan: fire the avoidance action for `threshold + margin` before the
/// liquidation `event`.
pub fn avoidance_plan(
    params: &ProtocolParams,
    state: &BlockchainState,
    user: &AddressId,
    action: AvoidanceAction,
    token: &TokenId,
    margin: &Rational,
    event: Transaction,
) -> Result<StrategyPlan, StrategyError> {
    let amount = liquidation_avoidance_threshold(params, state, user, action, token)? + margin;
    check_avoidance_funds(state, user, action, token, &amount)?;
    let tx = action.transaction(user, amount, token);
    require_enabled(params, state, &tx)?;
    let relation = if margin.is_negative() { Relation::Indeterminate } else { Relation::Gt };
    Ok(StrategyPlan { user: user.clone(), prefix: vec![tx], event, relation, predicted_delta: None })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PxFrontrun {
    /// `gain(tx · px) - gain(px)`
    pub delta: Rational,
    pub relation: Relation,
}

/// Effect of firing `tx` before the price update `px(delta: token)`.
///
/// Buying `token` with `v` units of another token `t'` adds
/// `v * delta * p(t') / p(token)`; selling `v` units of `token` adds
/// `-v * delta`. Other enabled user actions add nothing.
pub fn px_frontrun_gain_delta(
    params: &ProtocolParams,
    state: &BlockchainState,
    tx: &Transaction,
    delta: &Rational,
    token: &TokenId,
) -> Result<PxFrontrun, StrategyError> {
    let px = Transaction::PriceUpdate { delta: delta.clone(), token: token.clone() };
    require_enabled(params, state, tx)?;
    require_enabled(params, state, &px)?;
    let value = match tx {
        Transaction::Swap { amount, from, to, .. } if to == token => {
            amount * delta * state.price(from)? / state.price(to)?
        }
        Transaction::Swap { amount, from, .. } if from == token => -(amount * delta),
        Transaction::Liquidate { .. } | Transaction::AccrueInterest | Transaction::PriceUpdate { .. } => {
            return Err(StrategyError::Unsupported(tx.clone()))
        }
        _ => Rational::zero(),
    };
    Ok(PxFrontrun { relation: Relation::of_sign(&value), delta: value })
}

/// `dep(v1: t1) · bor(v2: t2) · swp(v2: t2 -> t1)` ahead of a rise of the
/// price of `t1`: the swap raises the exposure to `t1` by `v2 * p2 / p1`.
#[allow(clippy::too_many_arguments)]
pub fn build_leverage_strategy(
    params: &ProtocolParams,
    state: &BlockchainState,
    user: &AddressId,
    v1: &Rational,
    t1: &TokenId,
    v2: &Rational,
    t2: &TokenId,
    delta: &Rational,
) -> Result<StrategyPlan, StrategyError> {
    let prefix = vec![
        Transaction::Deposit { user: user.clone(), amount: v1.clone(), token: t1.clone() },
        Transaction::Borrow { user: user.clone(), amount: v2.clone(), token: t2.clone() },
        Transaction::Swap { user: user.clone(), amount: v2.clone(), from: t2.clone(), to: t1.clone() },
    ];
    let mut current = state.clone();
    for tx in &prefix {
        current = require_enabled(params, &current, tx)?;
    }
    let event = Transaction::PriceUpdate { delta: delta.clone(), token: t1.clone() };
    require_enabled(params, &current, &event)?;
    let exposure = v2 * state.price(t2)? / state.price(t1)?;
    Ok(StrategyPlan {
        user: user.clone(),
        prefix,
        event,
        relation: if delta.is_positive() { Relation::Gt } else { Relation::of_sign(delta) },
        predicted_delta: Some(exposure * delta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccrualClass {
    /// Front-running the accrual never lowers the gain.
    Beneficial,
    /// Front-running the accrual never raises the gain.
    Detrimental,
    /// Front-running the accrual makes no difference.
    Neutral,
    Indeterminate,
}

impl AccrualClass {
    pub fn relation(self) -> Relation {
        match self {
            AccrualClass::Beneficial => Relation::Ge,
            AccrualClass::Detrimental => Relation::Le,
            AccrualClass::Neutral => Relation::Eq,
            AccrualClass::Indeterminate => Relation::Indeterminate,
        }
    }
}

/// Sign of the effect of firing an action of `kind` before an interest
/// accrual, under a linear utilization rate model.
pub fn accrual_frontrun_classification(
    rate: &InterestRateFn,
    kind: TxKind,
) -> Result<AccrualClass, StrategyError> {
    let alpha = rate.linear_alpha().ok_or(StrategyError::UnsupportedRateFn)?;
    if kind == TxKind::Swap {
        return Ok(AccrualClass::Neutral);
    }
    if !alpha.is_zero() {
        return Ok(AccrualClass::Indeterminate);
    }
    Ok(match kind {
        TxKind::Deposit | TxKind::Repay => AccrualClass::Beneficial,
        TxKind::Borrow | TxKind::Redeem => AccrualClass::Detrimental,
        TxKind::Swap => AccrualClass::Neutral,
        _ => AccrualClass::Indeterminate,
    })
}

/// Candidates found by [`find_witnesses`], one per sign of
/// `gain(tx · event) - gain(event)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Witnesses {
    pub better: Option<(Transaction, Rational)>,
    pub worse: Option<(Transaction, Rational)>,
    pub neutral: Option<(Transaction, Rational)>,
}

impl Witnesses {
    pub fn both_directions(&self) -> bool {
        self.better.is_some() && self.worse.is_some()
    }
}

/// Exhaustive search over candidate front-running transactions, e.g. an
/// amount grid. Disabled candidates are ignored.
pub fn find_witnesses<I>(
    params: &ProtocolParams,
    state: &BlockchainState,
    user: &AddressId,
    candidates: I,
    event: &Transaction,
) -> Result<Witnesses, LedgerError>
where
    I: IntoIterator<Item = Transaction>,
{
    let baseline = gain_of(params, state, user, std::slice::from_ref(event))?;
    let mut found = Witnesses::default();
    for tx in candidates {
        if crate::semantics::apply(params, state, &tx).is_err() {
            continue;
        }
        let with = gain_of(params, state, user, &[tx.clone(), event.clone()])?;
        let diff = with - &baseline;
        let slot = match Relation::of_sign(&diff) {
            Relation::Gt => &mut found.better,
            Relation::Lt => &mut found.worse,
            _ => &mut found.neutral,
        };
        if slot.is_none() {
            *slot = Some((tx, diff));
        }
    }
    Ok(found)
}
