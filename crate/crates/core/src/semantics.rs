//! The labelled transition relation over blockchain states: enabling
//! conditions and updates for every transaction kind, and trace execution.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::ledger::{
    exchange_rate, health_factor, interest_rate, AddressId, BlockchainState, LedgerError,
    PriceOracle, ProtocolParams, TokenId, WalletState,
};
use crate::rational::{format_exact, Extended, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Transaction {
    /// Move `amount` base tokens from the wallet into the pool, minting
    /// credit tokens at the current exchange rate.
    Deposit { user: AddressId, amount: Rational, token: TokenId },
    Borrow { user: AddressId, amount: Rational, token: TokenId },
    Repay { user: AddressId, amount: Rational, token: TokenId },
    /// `amount` is in credit-token units.
    Redeem { user: AddressId, amount: Rational, token: TokenId },
    /// Repay `amount` of the borrower's debt in `debt_token`, seizing credit
    /// tokens of `collateral_token`.
    Liquidate {
        liquidator: AddressId,
        borrower: AddressId,
        amount: Rational,
        debt_token: TokenId,
        collateral_token: TokenId,
    },
    AccrueInterest,
    PriceUpdate { delta: Rational, token: TokenId },
    Swap { user: AddressId, amount: Rational, from: TokenId, to: TokenId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TxKind {
    Deposit,
    Borrow,
    Repay,
    Redeem,
    Liquidate,
    AccrueInterest,
    PriceUpdate,
    Swap,
}

impl TxKind {
    pub const ALL: [TxKind; 8] = [
        TxKind::Deposit,
        TxKind::Borrow,
        TxKind::Repay,
        TxKind::Redeem,
        TxKind::Liquidate,
        TxKind::AccrueInterest,
        TxKind::PriceUpdate,
        TxKind::Swap,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TxKind::Deposit => "dep",
            TxKind::Borrow => "bor",
            TxKind::Repay => "rep",
            TxKind::Redeem => "rdm",
            TxKind::Liquidate => "liq",
            TxKind::AccrueInterest => "int",
            TxKind::PriceUpdate => "px",
            TxKind::Swap => "swp",
        }
    }
}

impl fmt::Display for TxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Transaction {
    pub fn kind(&self) -> TxKind {
        match self {
            Transaction::Deposit { .. } => TxKind::Deposit,
            Transaction::Borrow { .. } => TxKind::Borrow,
            Transaction::Repay { .. } => TxKind::Repay,
            Transaction::Redeem { .. } => TxKind::Redeem,
            Transaction::Liquidate { .. } => TxKind::Liquidate,
            Transaction::AccrueInterest => TxKind::AccrueInterest,
            Transaction::PriceUpdate { .. } => TxKind::PriceUpdate,
            Transaction::Swap { .. } => TxKind::Swap,
        }
    }

    /// The signing user; `None` for interest accruals and price updates.
    pub fn actor(&self) -> Option<&AddressId> {
        match self {
            Transaction::Deposit { user, .. }
            | Transaction::Borrow { user, .. }
            | Transaction::Repay { user, .. }
            | Transaction::Redeem { user, .. }
            | Transaction::Swap { user, .. } => Some(user),
            Transaction::Liquidate { liquidator, .. } => Some(liquidator),
            Transaction::AccrueInterest | Transaction::PriceUpdate { .. } => None,
        }
    }

    /// Whether `user` signs the transaction or is the liquidated borrower.
    pub fn involves(&self, user: &AddressId) -> bool {
        match self {
            Transaction::Liquidate { liquidator, borrower, .. } => {
                liquidator == user || borrower == user
            }
            other => other.actor() == Some(user),
        }
    }

    /// Base tokens named by the transaction.
    pub fn tokens(&self) -> Vec<&TokenId> {
        match self {
            Transaction::Deposit { token, .. }
            | Transaction::Borrow { token, .. }
            | Transaction::Repay { token, .. }
            | Transaction::Redeem { token, .. }
            | Transaction::PriceUpdate { token, .. } => vec![token],
            Transaction::Liquidate { debt_token, collateral_token, .. } => {
                vec![debt_token, collateral_token]
            }
            Transaction::Swap { from, to, .. } => vec![from, to],
            Transaction::AccrueInterest => vec![],
        }
    }

    pub fn amount(&self) -> Option<&Rational> {
        match self {
            Transaction::Deposit { amount, .. }
            | Transaction::Borrow { amount, .. }
            | Transaction::Repay { amount, .. }
            | Transaction::Redeem { amount, .. }
            | Transaction::Liquidate { amount, .. }
            | Transaction::Swap { amount, .. } => Some(amount),
            Transaction::PriceUpdate { delta, .. } => Some(delta),
            Transaction::AccrueInterest => None,
        }
    }

    /// Copy of the transaction with its amount (or price delta) replaced.
    pub fn with_amount(&self, value: Rational) -> Transaction {
        let mut tx = self.clone();
        match &mut tx {
            Transaction::Deposit { amount, .. }
            | Transaction::Borrow { amount, .. }
            | Transaction::Repay { amount, .. }
            | Transaction::Redeem { amount, .. }
            | Transaction::Liquidate { amount, .. }
            | Transaction::Swap { amount, .. } => *amount = value,
            Transaction::PriceUpdate { delta, .. } => *delta = value,
            Transaction::AccrueInterest => {}
        }
        tx
    }

    fn validate(&self) -> Result<(), StepError> {
        if let Some(v) = self.amount() {
            match self {
                Transaction::PriceUpdate { .. } if v.is_zero() => {
                    return Err(StepError::Malformed("price delta must be non-zero"))
                }
                Transaction::PriceUpdate { .. } => {}
                _ if !v.is_positive() => {
                    return Err(StepError::Malformed("amounts must be strictly positive"))
                }
                _ => {}
            }
        }
        match self {
            Transaction::Swap { from, to, .. } if from == to => {
                Err(StepError::Malformed("swap tokens must differ"))
            }
            Transaction::Liquidate { liquidator, borrower, .. } if liquidator == borrower => {
                Err(StepError::Malformed("liquidator and borrower must differ"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Transaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transaction::Deposit { user, amount, token } => {
                write!(f, "{user}:dep({}:{token})", format_exact(amount))
            }
            Transaction::Borrow { user, amount, token } => {
                write!(f, "{user}:bor({}:{token})", format_exact(amount))
            }
            Transaction::Repay { user, amount, token } => {
                write!(f, "{user}:rep({}:{token})", format_exact(amount))
            }
            Transaction::Redeem { user, amount, token } => {
                write!(f, "{user}:rdm({}:{token})", format_exact(amount))
            }
            Transaction::Liquidate { liquidator, borrower, amount, debt_token, collateral_token } => {
                write!(
                    f,
                    "{liquidator}:liq({borrower},{}:{debt_token},{collateral_token})",
                    format_exact(amount)
                )
            }
            Transaction::AccrueInterest => f.write_str("int"),
            Transaction::PriceUpdate { delta, token } => {
                let sign = if delta.is_negative() { "" } else { "+" };
                write!(f, "px({sign}{}:{token})", format_exact(delta))
            }
            Transaction::Swap { user, amount, from, to } => {
                write!(f, "{user}:swp({}:{from},{to})", format_exact(amount))
            }
        }
    }
}

/// Why a transaction is not enabled: names the violated rule premise.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("{user} holds {available} of {token} in the wallet, needs {required}")]
    InsufficientWallet { user: AddressId, token: TokenId, required: Rational, available: Rational },
    #[error("pool reserves of {token} are {available}, needs {required}")]
    InsufficientReserves { token: TokenId, required: Rational, available: Rational },
    #[error("{user} owes {available} of {token}, cannot cancel {required}")]
    InsufficientDebt { user: AddressId, token: TokenId, required: Rational, available: Rational },
    #[error("{user} holds {available} credits of {token}, needs {required}")]
    InsufficientCredits { user: AddressId, token: TokenId, required: Rational, available: Rational },
    #[error("health factor of {user} would drop to {health}")]
    HealthTooLowAfter { user: AddressId, health: Extended },
    #[error("borrower {borrower} is healthy (health factor {health})")]
    BorrowerHealthy { borrower: AddressId, health: Extended },
    #[error("liquidation would raise the health factor of {borrower} to {health} > 1")]
    OverLiquidation { borrower: AddressId, health: Extended },
    #[error("price of {token} would become {value}")]
    NonPositivePrice { token: TokenId, value: Rational },
    #[error("token {0} has no price")]
    MissingPrice(TokenId),
    #[error("malformed transaction: {0}")]
    Malformed(&'static str),
}

impl From<LedgerError> for StepError {
    fn from(err: LedgerError) -> Self {
        match err {
            LedgerError::MissingPrice(t) => StepError::MissingPrice(t),
            LedgerError::NonPositivePrice { token, value } => {
                StepError::NonPositivePrice { token, value }
            }
            LedgerError::NegativeBalance { .. } => StepError::Malformed("negative balance"),
            LedgerError::InvalidParams(msg) => StepError::Malformed(msg),
        }
    }
}

/// Builds an initial state: the given wallets and prices and an empty pool.
/// Every token held in a wallet must be priced.
pub fn initial_state<W, P>(wallets: W, prices: P) -> Result<BlockchainState, LedgerError>
where
    W: IntoIterator<Item = (AddressId, TokenId, Rational)>,
    P: IntoIterator<Item = (TokenId, Rational)>,
{
    let prices = PriceOracle::new(prices)?;
    let mut wallet = WalletState::default();
    for (user, token, amount) in wallets {
        if amount.is_negative() {
            return Err(LedgerError::NegativeBalance {
                what: format!("wallet {user}:{token}"),
                value: amount,
            });
        }
        prices.get(&token)?;
        wallet.balances.add((token, user), &amount);
    }
    Ok(BlockchainState { wallet, pool: Default::default(), prices })
}

/// Applies one transaction. Application is all-or-nothing: on error the
/// input state is untouched.
pub fn apply(
    params: &ProtocolParams,
    state: &BlockchainState,
    tx: &Transaction,
) -> Result<BlockchainState, StepError> {
    tx.validate()?;
    let mut next = state.clone();
    match tx {
        Transaction::Deposit { user, amount, token } => {
            state.price(token)?;
            take_from_wallet(&mut next, user, token, amount)?;
            let minted = amount / exchange_rate(&state.pool, token);
            next.pool.reserves.add(token.clone(), amount);
            next.pool.credits.add((token.clone(), user.clone()), &minted);
        }
        Transaction::Borrow { user, amount, token } => {
            state.price(token)?;
            take_from_reserves(&mut next, token, amount)?;
            next.wallet.balances.add((token.clone(), user.clone()), amount);
            next.pool.debits.add((token.clone(), user.clone()), amount);
            require_healthy_after(params, &next, user)?;
        }
        Transaction::Repay { user, amount, token } => {
            take_from_wallet(&mut next, user, token, amount)?;
            cancel_debt(&mut next, user, token, amount)?;
            next.pool.reserves.add(token.clone(), amount);
        }
        Transaction::Redeem { user, amount, token } => {
            state.price(token)?;
            let units = amount * exchange_rate(&state.pool, token);
            burn_credits(&mut next, user, token, amount)?;
            take_from_reserves(&mut next, token, &units)?;
            next.wallet.balances.add((token.clone(), user.clone()), &units);
            require_healthy_after(params, &next, user)?;
        }
        Transaction::Liquidate { liquidator, borrower, amount, debt_token, collateral_token } => {
            let seized = seized_credits(params, state, amount, debt_token, collateral_token)?;
            let before = health_factor(params, state, borrower)?;
            if before.at_least_one() {
                return Err(StepError::BorrowerHealthy { borrower: borrower.clone(), health: before });
            }
            take_from_wallet(&mut next, liquidator, debt_token, amount)?;
            cancel_debt(&mut next, borrower, debt_token, amount)?;
            burn_credits(&mut next, borrower, collateral_token, &seized)?;
            next.pool.reserves.add(debt_token.clone(), amount);
            next.pool.credits.add((collateral_token.clone(), liquidator.clone()), &seized);
            let after = health_factor(params, &next, borrower)?;
            if after > Extended::Finite(Rational::one()) {
                return Err(StepError::OverLiquidation { borrower: borrower.clone(), health: after });
            }
        }
        Transaction::AccrueInterest => {
            let rates: BTreeMap<TokenId, Rational> = state
                .pool
                .debits
                .keys()
                .map(|(t, _)| t.clone())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .map(|t| {
                    let rate = interest_rate(params, &state.pool, &t);
                    (t, rate)
                })
                .collect();
            next.pool.debits.map_values(|(t, _), debt| debt + debt * &rates[t]);
        }
        Transaction::PriceUpdate { delta, token } => {
            let updated = state.price(token)? + delta;
            if !updated.is_positive() {
                return Err(StepError::NonPositivePrice { token: token.clone(), value: updated });
            }
            next.prices.set(token.clone(), updated)?;
        }
        Transaction::Swap { user, amount, from, to } => {
            let received = amount * state.price(from)? / state.price(to)?;
            take_from_wallet(&mut next, user, from, amount)?;
            next.wallet.balances.add((to.clone(), user.clone()), &received);
        }
    }
    Ok(next)
}

/// Credit tokens of `collateral_token` handed to a liquidator repaying
/// `amount` of `debt_token`: repaid value times the reward, at the credit
/// token's price.
pub fn seized_credits(
    params: &ProtocolParams,
    state: &BlockchainState,
    amount: &Rational,
    debt_token: &TokenId,
    collateral_token: &TokenId,
) -> Result<Rational, StepError> {
    let ratio = state.price(debt_token)? / state.price(collateral_token)?;
    Ok(amount / exchange_rate(&state.pool, collateral_token) * ratio * &params.liq_reward)
}

fn take_from_wallet(
    state: &mut BlockchainState,
    user: &AddressId,
    token: &TokenId,
    amount: &Rational,
) -> Result<(), StepError> {
    if state.wallet.balances.sub((token.clone(), user.clone()), amount) {
        return Ok(());
    }
    Err(StepError::InsufficientWallet {
        user: user.clone(),
        token: token.clone(),
        required: amount.clone(),
        available: state.wallet.balance(token, user),
    })
}

fn take_from_reserves(
    state: &mut BlockchainState,
    token: &TokenId,
    amount: &Rational,
) -> Result<(), StepError> {
    if state.pool.reserves.sub(token.clone(), amount) {
        return Ok(());
    }
    Err(StepError::InsufficientReserves {
        token: token.clone(),
        required: amount.clone(),
        available: state.pool.reserve(token),
    })
}

fn cancel_debt(
    state: &mut BlockchainState,
    user: &AddressId,
    token: &TokenId,
    amount: &Rational,
) -> Result<(), StepError> {
    if state.pool.debits.sub((token.clone(), user.clone()), amount) {
        return Ok(());
    }
    Err(StepError::InsufficientDebt {
        user: user.clone(),
        token: token.clone(),
        required: amount.clone(),
        available: state.pool.debit(token, user),
    })
}

fn burn_credits(
    state: &mut BlockchainState,
    user: &AddressId,
    token: &TokenId,
    amount: &Rational,
) -> Result<(), StepError> {
    if state.pool.credits.sub((token.clone(), user.clone()), amount) {
        return Ok(());
    }
    Err(StepError::InsufficientCredits {
        user: user.clone(),
        token: token.clone(),
        required: amount.clone(),
        available: state.pool.credit(token, user),
    })
}

fn require_healthy_after(
    params: &ProtocolParams,
    post: &BlockchainState,
    user: &AddressId,
) -> Result<(), StepError> {
    let health = health_factor(params, post, user)?;
    if health.at_least_one() {
        Ok(())
    } else {
        Err(StepError::HealthTooLowAfter { user: user.clone(), health })
    }
}

/// `Ok` iff `apply` would succeed; the error is the first violated premise.
pub fn check_enabled(
    params: &ProtocolParams,
    state: &BlockchainState,
    tx: &Transaction,
) -> Result<(), StepError> {
    apply(params, state, tx).map(|_| ())
}

pub fn is_enabled(params: &ProtocolParams, state: &BlockchainState, tx: &Transaction) -> bool {
    check_enabled(params, state, tx).is_ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    /// Fail on the first disabled transaction.
    Strict,
    /// Drop disabled transactions and continue.
    SkipDisabled,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("step {} ({tx}) is not enabled: {error}", .index + 1)]
pub struct TraceError {
    /// Zero-based position in the trace.
    pub index: usize,
    pub tx: Transaction,
    pub error: StepError,
}

/// One executed (or skipped) step of a trace.
#[derive(Debug)]
pub struct StepRecord<'a> {
    pub index: usize,
    pub tx: &'a Transaction,
    pub pre: &'a BlockchainState,
    pub outcome: Result<&'a BlockchainState, &'a StepError>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRun {
    pub final_state: BlockchainState,
    /// Per step: `true` if applied, `false` if skipped.
    pub applied: Vec<bool>,
}

impl TraceRun {
    pub fn skipped(&self) -> Vec<usize> {
        self.applied.iter().enumerate().filter(|(_, a)| !**a).map(|(i, _)| i).collect()
    }
}

/// Runs a trace, reporting every step to `observe`.
pub fn apply_trace_with<F>(
    params: &ProtocolParams,
    state: &BlockchainState,
    trace: &[Transaction],
    mode: TraceMode,
    mut observe: F,
) -> Result<TraceRun, TraceError>
where
    F: FnMut(&StepRecord<'_>),
{
    let mut current = state.clone();
    let mut applied = Vec::with_capacity(trace.len());
    for (index, tx) in trace.iter().enumerate() {
        match apply(params, &current, tx) {
            Ok(next) => {
                observe(&StepRecord { index, tx, pre: &current, outcome: Ok(&next) });
                current = next;
                applied.push(true);
            }
            Err(error) => {
                observe(&StepRecord { index, tx, pre: &current, outcome: Err(&error) });
                if mode == TraceMode::Strict {
                    return Err(TraceError { index, tx: tx.clone(), error });
                }
                applied.push(false);
            }
        }
    }
    Ok(TraceRun { final_state: current, applied })
}

pub fn apply_trace(
    params: &ProtocolParams,
    state: &BlockchainState,
    trace: &[Transaction],
    mode: TraceMode,
) -> Result<TraceRun, TraceError> {
    apply_trace_with(params, state, trace, mode, |_| {})
}

/// Final state of a trace run with disabled transactions dropped.
pub fn run_skipping(
    params: &ProtocolParams,
    state: &BlockchainState,
    trace: &[Transaction],
) -> BlockchainState {
    apply_trace(params, state, trace, TraceMode::SkipDisabled)
        .expect("skip mode never fails")
        .final_state
}
