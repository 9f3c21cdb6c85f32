use num_traits::{One, Zero};

use super::{
    utilization_of, AddressId, BlockchainState, LedgerError, LendingPoolState, PriceOracle,
    ProtocolParams, TokenId, TokenTotals, WalletState,
};
use crate::rational::{Extended, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupplyKind {
    Base,
    Credit,
    Debt,
}

pub fn wallet_supply(wallet: &WalletState, token: &TokenId) -> Rational {
    wallet.balances.total(token)
}

pub fn credit_supply(pool: &LendingPoolState, token: &TokenId) -> Rational {
    pool.credits.total(token)
}

pub fn debt_supply(pool: &LendingPoolState, token: &TokenId) -> Rational {
    pool.debits.total(token)
}

/// Total units of `token` of the given kind: base tokens are summed over
/// wallets, credit and debit tokens over the pool.
pub fn supply(state: &BlockchainState, kind: SupplyKind, token: &TokenId) -> Rational {
    match kind {
        SupplyKind::Base => wallet_supply(&state.wallet, token),
        SupplyKind::Credit => credit_supply(&state.pool, token),
        SupplyKind::Debt => debt_supply(&state.pool, token),
    }
}

pub fn token_totals(pool: &LendingPoolState, token: &TokenId) -> TokenTotals {
    TokenTotals {
        reserves: pool.reserve(token),
        credit_supply: credit_supply(pool, token),
        debt_supply: debt_supply(pool, token),
    }
}

/// `(reserves + debt supply) / credit supply`, or 1 when no credits exist.
pub fn exchange_rate(pool: &LendingPoolState, token: &TokenId) -> Rational {
    exchange_rate_of(&token_totals(pool, token))
}

pub(crate) fn exchange_rate_of(totals: &TokenTotals) -> Rational {
    if totals.credit_supply.is_zero() {
        Rational::one()
    } else {
        (&totals.reserves + &totals.debt_supply) / &totals.credit_supply
    }
}

/// Price of one credit token: exchange rate times the underlying price.
pub fn credit_token_price(
    pool: &LendingPoolState,
    prices: &PriceOracle,
    token: &TokenId,
) -> Result<Rational, LedgerError> {
    Ok(exchange_rate(pool, token) * prices.get(token)?)
}

/// Values of a user's wallet, credits and debts at current prices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortfolioValues {
    pub wallet: Rational,
    pub credit: Rational,
    pub debt: Rational,
}

pub fn wallet_value(state: &BlockchainState, user: &AddressId) -> Result<Rational, LedgerError> {
    state
        .wallet
        .balances
        .of_user(user)
        .try_fold(Rational::zero(), |acc, (t, v)| Ok(acc + v * state.price(t)?))
}

pub fn credit_value(state: &BlockchainState, user: &AddressId) -> Result<Rational, LedgerError> {
    state.pool.credits.of_user(user).try_fold(Rational::zero(), |acc, (t, v)| {
        Ok(acc + v * credit_token_price(&state.pool, &state.prices, t)?)
    })
}

pub fn debt_value(state: &BlockchainState, user: &AddressId) -> Result<Rational, LedgerError> {
    state
        .pool
        .debits
        .of_user(user)
        .try_fold(Rational::zero(), |acc, (t, v)| Ok(acc + v * state.price(t)?))
}

pub fn portfolio_values(
    state: &BlockchainState,
    user: &AddressId,
) -> Result<PortfolioValues, LedgerError> {
    Ok(PortfolioValues {
        wallet: wallet_value(state, user)?,
        credit: credit_value(state, user)?,
        debt: debt_value(state, user)?,
    })
}

/// Wallet value plus credit value minus debt value.
pub fn net_worth(state: &BlockchainState, user: &AddressId) -> Result<Rational, LedgerError> {
    let v = portfolio_values(state, user)?;
    Ok(v.wallet + v.credit - v.debt)
}

/// The part of the net worth that mentions `token` only.
pub fn net_worth_restricted(
    state: &BlockchainState,
    user: &AddressId,
    token: &TokenId,
) -> Result<Rational, LedgerError> {
    let units = state.wallet.balance(token, user)
        + state.pool.credit(token, user) * exchange_rate(&state.pool, token)
        - state.pool.debit(token, user);
    if units.is_zero() {
        return Ok(units);
    }
    Ok(units * state.price(token)?)
}

/// Credit value minus debt value.
pub fn net_position(state: &BlockchainState, user: &AddressId) -> Result<Rational, LedgerError> {
    Ok(credit_value(state, user)? - debt_value(state, user)?)
}

/// Sum of every user's net worth.
pub fn total_net_worth(state: &BlockchainState) -> Result<Rational, LedgerError> {
    state.users().iter().try_fold(Rational::zero(), |acc, u| Ok(acc + net_worth(state, u)?))
}

/// Credit value over debt value; `+∞` when the user has no debt.
pub fn collateralization(
    state: &BlockchainState,
    user: &AddressId,
) -> Result<Extended, LedgerError> {
    let debt = debt_value(state, user)?;
    if debt.is_zero() {
        return Ok(Extended::Infinity);
    }
    Ok(Extended::Finite(credit_value(state, user)? / debt))
}

/// Collateralization scaled by the liquidation threshold.
pub fn health_factor(
    params: &ProtocolParams,
    state: &BlockchainState,
    user: &AddressId,
) -> Result<Extended, LedgerError> {
    Ok(match collateralization(state, user)? {
        Extended::Finite(c) => Extended::Finite(c * &params.liq_threshold),
        Extended::Infinity => Extended::Infinity,
    })
}

/// Debt supply over reserves plus debt supply; 0 without debt.
pub fn utilization(pool: &LendingPoolState, token: &TokenId) -> Rational {
    utilization_of(&token_totals(pool, token))
}

pub fn interest_rate(params: &ProtocolParams, pool: &LendingPoolState, token: &TokenId) -> Rational {
    params.rate.evaluate(&token_totals(pool, token))
}
