//! Gains of users over traces and the closed-form economics of single
//! transactions: gain predictors and health-factor change laws.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::ledger::{
    credit_supply, debt_supply, debt_value, credit_value, exchange_rate, health_factor,
    interest_rate, net_worth, net_worth_restricted, AddressId, BlockchainState, LedgerError,
    ProtocolParams, TokenId,
};
use crate::rational::{Extended, Rational};
use crate::semantics::{apply, apply_trace, StepError, TraceMode, Transaction, TxKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("{tx} is not enabled: {error}")]
    Disabled { tx: Transaction, error: StepError },
    #[error("{0} is not a user action")]
    NotUserAction(Transaction),
    #[error("expected a liquidation, got {0}")]
    NotLiquidation(Transaction),
    #[error("price of {token} would become {value}")]
    NonPositivePrice { token: TokenId, value: Rational },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

pub(crate) fn require_enabled(
    params: &ProtocolParams,
    state: &BlockchainState,
    tx: &Transaction,
) -> Result<BlockchainState, AnalysisError> {
    apply(params, state, tx).map_err(|error| AnalysisError::Disabled { tx: tx.clone(), error })
}

/// Net-worth change of one user over a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GainReport {
    pub user: AddressId,
    pub definitional_gain: Rational,
    /// Change of the net worth restricted to each token; sums to the gain.
    pub breakdown: BTreeMap<TokenId, Rational>,
    /// Zero-based indices of the transactions that were not enabled.
    pub skipped: Vec<usize>,
}

/// Net worth after the trace minus net worth before it. Disabled
/// transactions are dropped from the trace.
pub fn gain(
    params: &ProtocolParams,
    state: &BlockchainState,
    user: &AddressId,
    trace: &[Transaction],
) -> Result<GainReport, LedgerError> {
    let run = apply_trace(params, state, trace, TraceMode::SkipDisabled)
        .expect("skip mode never fails");
    let after = &run.final_state;
    let definitional_gain = net_worth(after, user)? - net_worth(state, user)?;
    let mut breakdown = BTreeMap::new();
    for token in state.tokens().union(&after.tokens()) {
        let delta = net_worth_restricted(after, user, token)?
            - net_worth_restricted(state, user, token)?;
        if !delta.is_zero() {
            breakdown.insert(token.clone(), delta);
        }
    }
    Ok(GainReport { user: user.clone(), definitional_gain, breakdown, skipped: run.skipped() })
}

/// Shorthand for [`gain`] when only the total is needed.
pub fn gain_of(
    params: &ProtocolParams,
    state: &BlockchainState,
    user: &AddressId,
    trace: &[Transaction],
) -> Result<Rational, LedgerError> {
    let after = crate::semantics::run_skipping(params, state, trace);
    Ok(net_worth(&after, user)? - net_worth(state, user)?)
}

/// Liquidator and borrower gains of an enabled liquidation: the liquidator
/// earns `(reward - 1) * repaid value`, the borrower loses the same.
pub fn predicted_gain_liquidation(
    params: &ProtocolParams,
    state: &BlockchainState,
    tx: &Transaction,
) -> Result<(Rational, Rational), AnalysisError> {
    let Transaction::Liquidate { amount, debt_token, .. } = tx else {
        return Err(AnalysisError::NotLiquidation(tx.clone()));
    };
    require_enabled(params, state, tx)?;
    let premium = (&params.liq_reward - Rational::from_integer(1.into()))
        * amount
        * state.price(debt_token)?;
    let loss = -premium.clone();
    Ok((premium, loss))
}

/// Predicted gain of `user` from an enabled user action: zero unless the
/// action is a liquidation involving `user`.
pub fn predicted_gain_user_action(
    params: &ProtocolParams,
    state: &BlockchainState,
    tx: &Transaction,
    user: &AddressId,
) -> Result<Rational, AnalysisError> {
    match tx {
        Transaction::AccrueInterest | Transaction::PriceUpdate { .. } => {
            Err(AnalysisError::NotUserAction(tx.clone()))
        }
        Transaction::Liquidate { liquidator, borrower, .. } => {
            let (won, lost) = predicted_gain_liquidation(params, state, tx)?;
            Ok(if liquidator == user {
                won
            } else if borrower == user {
                lost
            } else {
                Rational::zero()
            })
        }
        _ => {
            require_enabled(params, state, tx)?;
            Ok(Rational::zero())
        }
    }
}

/// Gain of `user` when the price of `token` moves by `delta`: the user's
/// net exposure to `token` in units, times `delta`.
pub fn predicted_gain_price_update(
    state: &BlockchainState,
    user: &AddressId,
    delta: &Rational,
    token: &TokenId,
) -> Result<Rational, AnalysisError> {
    let updated = state.price(token)? + delta;
    if !updated.is_positive() {
        return Err(AnalysisError::NonPositivePrice { token: token.clone(), value: updated });
    }
    let exposure = state.wallet.balance(token, user)
        + state.pool.credit(token, user) * exchange_rate(&state.pool, token)
        - state.pool.debit(token, user);
    Ok(exposure * delta)
}

/// The part of the accrual gain of `user` that comes from `token`.
pub fn predicted_accrual_gain_in(
    params: &ProtocolParams,
    state: &BlockchainState,
    user: &AddressId,
    token: &TokenId,
) -> Result<Rational, LedgerError> {
    let credits = credit_supply(&state.pool, token);
    if credits.is_zero() {
        return Ok(Rational::zero());
    }
    let share = state.pool.credit(token, user) / credits * debt_supply(&state.pool, token);
    let net = share - state.pool.debit(token, user);
    if net.is_zero() {
        return Ok(net);
    }
    Ok(net * interest_rate(params, &state.pool, token) * state.price(token)?)
}

/// Gain of `user` from one interest accrual: per token, the user's share of
/// the interest paid to creditors minus the interest on their own debt.
pub fn predicted_gain_interest_accrual(
    params: &ProtocolParams,
    state: &BlockchainState,
    user: &AddressId,
) -> Result<Rational, LedgerError> {
    state.pool.tokens().iter().try_fold(Rational::zero(), |acc, token| {
        Ok(acc + predicted_accrual_gain_in(params, state, user, token)?)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HealthTrend {
    NonDecreasing,
    NonIncreasing,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HealthDirection {
    pub trend: HealthTrend,
    /// The change is strict: the signer had debt before the action.
    pub strict: bool,
}

/// How an enabled user action moves the signer's health factor.
pub fn health_delta_direction(
    params: &ProtocolParams,
    state: &BlockchainState,
    tx: &Transaction,
) -> Result<HealthDirection, AnalysisError> {
    let user = tx.actor().ok_or_else(|| AnalysisError::NotUserAction(tx.clone()))?;
    require_enabled(params, state, tx)?;
    let indebted = debt_value(state, user)?.is_positive();
    let trend = match tx.kind() {
        TxKind::Deposit | TxKind::Repay | TxKind::Liquidate => HealthTrend::NonDecreasing,
        TxKind::Borrow | TxKind::Redeem => HealthTrend::NonIncreasing,
        TxKind::Swap => HealthTrend::Equal,
        TxKind::AccrueInterest | TxKind::PriceUpdate => unreachable!("no actor"),
    };
    Ok(HealthDirection { trend, strict: indebted && trend != HealthTrend::Equal })
}

/// Change of the borrower's health factor caused by an enabled
/// liquidation, in closed form:
/// `(C - D * reward) * v * p * threshold / (D * (D - v * p))`
/// where `C`, `D` are the borrower's credit and debt values and `v * p` the
/// repaid value.
pub fn borrower_liq_health_delta(
    params: &ProtocolParams,
    state: &BlockchainState,
    tx: &Transaction,
) -> Result<Rational, AnalysisError> {
    let Transaction::Liquidate { borrower, amount, debt_token, .. } = tx else {
        return Err(AnalysisError::NotLiquidation(tx.clone()));
    };
    require_enabled(params, state, tx)?;
    let credit = credit_value(state, borrower)?;
    let debt = debt_value(state, borrower)?;
    let repaid = amount * state.price(debt_token)?;
    Ok((credit - &debt * &params.liq_reward) * &repaid * &params.liq_threshold
        / (&debt * (&debt - &repaid)))
}

/// Executed health-factor difference of the borrower; the oracle for
/// [`borrower_liq_health_delta`].
pub fn executed_liq_health_delta(
    params: &ProtocolParams,
    state: &BlockchainState,
    tx: &Transaction,
) -> Result<Rational, AnalysisError> {
    let Transaction::Liquidate { borrower, .. } = tx else {
        return Err(AnalysisError::NotLiquidation(tx.clone()));
    };
    let after = require_enabled(params, state, tx)?;
    match (health_factor(params, state, borrower)?, health_factor(params, &after, borrower)?) {
        (Extended::Finite(before), Extended::Finite(after)) => Ok(after - before),
        _ => unreachable!("an enabled liquidation leaves the borrower indebted"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepositOrRepay {
    RepayBetterOrEqual,
    DepositBetter,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepositRepayVerdict {
    pub choice: DepositOrRepay,
    /// `v * p - (D - C)`; repaying is at least as good iff this is `>= 0`.
    pub threshold: Rational,
}

/// Whether repaying `amount` of `token` raises the user's health factor at
/// least as much as depositing it.
pub fn deposit_vs_repay(
    params: &ProtocolParams,
    state: &BlockchainState,
    user: &AddressId,
    amount: &Rational,
    token: &TokenId,
) -> Result<DepositRepayVerdict, AnalysisError> {
    for tx in [
        Transaction::Deposit { user: user.clone(), amount: amount.clone(), token: token.clone() },
        Transaction::Repay { user: user.clone(), amount: amount.clone(), token: token.clone() },
    ] {
        require_enabled(params, state, &tx)?;
    }
    let threshold =
        amount * state.price(token)? - (debt_value(state, user)? - credit_value(state, user)?);
    let choice = if threshold.is_negative() {
        DepositOrRepay::DepositBetter
    } else {
        DepositOrRepay::RepayBetterOrEqual
    };
    Ok(DepositRepayVerdict { choice, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::InterestRateFn;
    use crate::rational::{int, ratio};
    use crate::semantics::initial_state;

    fn t(s: &str) -> TokenId {
        TokenId::new(s)
    }
    fn a(s: &str) -> AddressId {
        AddressId::new(s)
    }

    fn params() -> ProtocolParams {
        ProtocolParams::new(
            ratio(2, 3),
            ratio(11, 10),
            InterestRateFn::linear(int(0), ratio(12, 100)).unwrap(),
        )
        .unwrap()
    }

    fn fig1_trace() -> Vec<Transaction> {
        vec![
            Transaction::Deposit { user: a("A"), amount: int(50), token: t("T0") },
            Transaction::Deposit { user: a("B"), amount: int(50), token: t("T1") },
            Transaction::Borrow { user: a("B"), amount: int(30), token: t("T0") },
            Transaction::AccrueInterest,
            Transaction::Repay { user: a("B"), amount: int(5), token: t("T0") },
            Transaction::PriceUpdate { delta: ratio(3, 10), token: t("T0") },
            liquidation(11),
        ]
    }

    fn liquidation(v: i64) -> Transaction {
        Transaction::Liquidate {
            liquidator: a("A"),
            borrower: a("B"),
            amount: int(v),
            debt_token: t("T0"),
            collateral_token: t("T1"),
        }
    }

    fn fig1(n: usize) -> BlockchainState {
        let init = initial_state(
            [(a("A"), t("T0"), int(100)), (a("B"), t("T1"), int(50))],
            [(t("T0"), int(1)), (t("T1"), int(1))],
        )
        .unwrap();
        apply_trace(&params(), &init, &fig1_trace()[..n], TraceMode::Strict).unwrap().final_state
    }

    #[test]
    fn liquidation_gain_matches_definition() {
        let s = fig1(6);
        let report = gain(&params(), &s, &a("A"), &[liquidation(11)]).unwrap();
        assert_eq!(report.definitional_gain, ratio(143, 100));
        assert_eq!(
            report.breakdown.values().fold(int(0), |acc, v| acc + v),
            report.definitional_gain
        );
        let (won, lost) = predicted_gain_liquidation(&params(), &s, &liquidation(11)).unwrap();
        assert_eq!((won.clone(), lost), (ratio(143, 100), ratio(-143, 100)));
        let doubled = predicted_gain_liquidation(&params(), &s, &liquidation(10)).unwrap();
        let single = predicted_gain_liquidation(&params(), &s, &liquidation(5)).unwrap();
        assert_eq!(doubled.0, single.0 * int(2));
    }

    #[test]
    fn empty_trace_has_no_gain() {
        for n in [0, 3, 7] {
            for user in ["A", "B", "C"] {
                let r = gain(&params(), &fig1(n), &a(user), &[]).unwrap();
                assert_eq!(r.definitional_gain, int(0));
                assert!(r.breakdown.is_empty());
            }
        }
    }

    #[test]
    fn accrual_gains() {
        let s = fig1(3);
        let b = gain(&params(), &s, &a("B"), &[Transaction::AccrueInterest]).unwrap();
        assert_eq!(b.definitional_gain, ratio(-36, 10));
        assert_eq!(predicted_gain_interest_accrual(&params(), &s, &a("B")).unwrap(), ratio(-36, 10));
        assert_eq!(predicted_gain_interest_accrual(&params(), &s, &a("A")).unwrap(), ratio(36, 10));
        assert_eq!(predicted_accrual_gain_in(&params(), &s, &a("A"), &t("T1")).unwrap(), int(0));
    }

    #[test]
    fn price_update_gains() {
        let s = fig1(5);
        let delta = ratio(3, 10);
        assert_eq!(
            predicted_gain_price_update(&s, &a("B"), &delta, &t("T0")).unwrap(),
            ratio(-108, 100)
        );
        assert_eq!(
            predicted_gain_price_update(&s, &a("A"), &delta, &t("T0")).unwrap(),
            ratio(3108, 100)
        );
        assert_eq!(predicted_gain_price_update(&s, &a("Z"), &delta, &t("T0")).unwrap(), int(0));
        let px = Transaction::PriceUpdate { delta: delta.clone(), token: t("T0") };
        for user in ["A", "B"] {
            assert_eq!(
                gain_of(&params(), &s, &a(user), std::slice::from_ref(&px)).unwrap(),
                predicted_gain_price_update(&s, &a(user), &delta, &t("T0")).unwrap()
            );
        }
        assert!(matches!(
            predicted_gain_price_update(&s, &a("A"), &int(-1), &t("T0")),
            Err(AnalysisError::NonPositivePrice { .. })
        ));
    }

    #[test]
    fn user_actions_other_than_liquidation_have_zero_gain() {
        let s = fig1(5);
        let dep = Transaction::Deposit { user: a("A"), amount: int(3), token: t("T0") };
        assert_eq!(predicted_gain_user_action(&params(), &s, &dep, &a("A")).unwrap(), int(0));
        assert_eq!(gain_of(&params(), &s, &a("A"), &[dep]).unwrap(), int(0));
        let liq = liquidation(11);
        let s6 = fig1(6);
        assert_eq!(predicted_gain_user_action(&params(), &s6, &liq, &a("C")).unwrap(), int(0));
        assert!(matches!(
            predicted_gain_user_action(&params(), &s6, &Transaction::AccrueInterest, &a("A")),
            Err(AnalysisError::NotUserAction(_))
        ));
    }

    #[test]
    fn health_directions() {
        let s = fig1(4);
        let repay = Transaction::Repay { user: a("B"), amount: int(5), token: t("T0") };
        assert_eq!(
            health_delta_direction(&params(), &s, &repay).unwrap(),
            HealthDirection { trend: HealthTrend::NonDecreasing, strict: true }
        );
        let swap = Transaction::Swap { user: a("A"), amount: int(1), from: t("T0"), to: t("T1") };
        assert_eq!(
            health_delta_direction(&params(), &s, &swap).unwrap().trend,
            HealthTrend::Equal
        );
        let s2 = fig1(2);
        let borrow = Transaction::Borrow { user: a("A"), amount: int(1), token: t("T1") };
        assert_eq!(
            health_delta_direction(&params(), &s2, &borrow).unwrap(),
            HealthDirection { trend: HealthTrend::NonIncreasing, strict: false }
        );
        assert!(matches!(
            health_delta_direction(&params(), &fig1(3), &liquidation(1)),
            Err(AnalysisError::Disabled { .. })
        ));
    }

    #[test]
    fn borrower_health_delta_matches_execution() {
        let s = fig1(6);
        let closed = borrower_liq_health_delta(&params(), &s, &liquidation(11)).unwrap();
        let executed = executed_liq_health_delta(&params(), &s, &liquidation(11)).unwrap();
        assert_eq!(closed, executed);
        let before = health_factor(&params(), &s, &a("B")).unwrap();
        assert_eq!(before.display(4), "0.8965");
        let after = health_factor(&params(), &fig1(7), &a("B")).unwrap();
        assert_eq!(after.display(4), "0.9985");
    }

    #[test]
    fn deposit_versus_repay() {
        let s = fig1(6);
        // B: D = 37.18, C = 50, positive net position
        for v in [1, 5, 20] {
            let verdict = deposit_vs_repay(&params(), &s, &a("B"), &int(v), &t("T0")).unwrap();
            assert_eq!(verdict.choice, DepositOrRepay::RepayBetterOrEqual);
        }
    }
}
