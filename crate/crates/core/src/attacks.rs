//! Attack constructors. Each derives the attack parameters from the state,
//! emits the attack as an ordinary trace, executes it and checks the claimed
//! effect on the adversary's (and victim's) gain.

use num_traits::{One, Signed, Zero};

use crate::analysis::{gain_of, predicted_gain_liquidation};
use crate::ledger::{
    credit_supply, debt_supply, exchange_rate, health_factor, net_position, AddressId,
    BlockchainState, LedgerError, ProtocolParams, TokenId,
};
use crate::rational::Rational;
use crate::semantics::{apply_trace, TraceError, TraceMode, Transaction};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttackError {
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("no price in the search range makes the liquidation feasible")]
    NoFeasibleDelta,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

fn violated(msg: impl Into<String>) -> AttackError {
    AttackError::HypothesisViolated(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Succeeded,
    PreconditionFailed,
    ClaimViolated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackOutcome {
    pub trace: Vec<Transaction>,
    pub enabled: bool,
    /// The first disabled step, when `enabled` is false.
    pub failure: Option<TraceError>,
    pub adversary_gain: Rational,
    pub victim_gain: Option<Rational>,
    /// Gains over the accrual alone, for the utilization attacks.
    pub adversary_baseline: Option<Rational>,
    pub victim_baseline: Option<Rational>,
    pub adversary_net_position: Rational,
    /// Gain of the liquidation step alone, for the liquidation attack.
    pub liquidation_gain: Option<Rational>,
    pub verdict: Verdict,
}

impl AttackOutcome {
    fn disabled(trace: Vec<Transaction>, failure: TraceError) -> Self {
        AttackOutcome {
            trace,
            enabled: false,
            failure: Some(failure),
            adversary_gain: Rational::zero(),
            victim_gain: None,
            adversary_baseline: None,
            victim_baseline: None,
            adversary_net_position: Rational::zero(),
            liquidation_gain: None,
            verdict: Verdict::PreconditionFailed,
        }
    }
}

struct Executed {
    final_state: BlockchainState,
    adversary_gain: Rational,
}

fn execute(
    params: &ProtocolParams,
    state: &BlockchainState,
    adversary: &AddressId,
    trace: &[Transaction],
) -> Result<Result<Executed, TraceError>, LedgerError> {
    match apply_trace(params, state, trace, TraceMode::Strict) {
        Ok(run) => {
            let adversary_gain = gain_of(params, state, adversary, trace)?;
            Ok(Ok(Executed { final_state: run.final_state, adversary_gain }))
        }
        Err(e) => Ok(Err(e)),
    }
}

fn verdict(claim: bool) -> Verdict {
    if claim {
        Verdict::Succeeded
    } else {
        Verdict::ClaimViolated
    }
}

fn has_pool_position(state: &BlockchainState, user: &AddressId) -> bool {
    state.pool.credits.keys().chain(state.pool.debits.keys()).any(|(_, u)| u == user)
}

/// Net-position threshold of the undercollateralized loan attack: the
/// adversary ends with a negative net position iff `delta` exceeds
/// `p(t2) * (1 - threshold / X(t1))`.
pub fn undercollateralized_threshold(
    params: &ProtocolParams,
    state: &BlockchainState,
    t1: &TokenId,
    t2: &TokenId,
) -> Result<Rational, LedgerError> {
    let x = exchange_rate(&state.pool, t1);
    Ok(state.price(t2)? * (Rational::one() - &params.liq_threshold / x))
}

/// `dep(v1: t1) · px(-delta: t2) · bor(v2: t2) · px(+delta: t2)`: the
/// adversary borrows at a depressed price of `t2`, taking the largest loan
/// the collateral allows, and the price is restored afterwards.
pub fn build_undercollateralized_loan_attack(
    params: &ProtocolParams,
    state: &BlockchainState,
    adversary: &AddressId,
    v1: &Rational,
    t1: &TokenId,
    t2: &TokenId,
    delta: &Rational,
) -> Result<AttackOutcome, AttackError> {
    if has_pool_position(state, adversary) {
        return Err(violated(format!("{adversary} already holds credits or debts")));
    }
    if t1 == t2 {
        return Err(violated("collateral and loan tokens coincide"));
    }
    if !v1.is_positive() {
        return Err(violated("collateral amount must be positive"));
    }
    let p1 = state.price(t1)?;
    let p2 = state.price(t2)?;
    if !delta.is_positive() || delta >= p2 {
        return Err(violated(format!("delta {delta} outside (0, {p2})")));
    }
    let x = exchange_rate(&state.pool, t1);
    let v2 = v1 / &x * p1 / (p2 - delta) * &params.liq_threshold;
    let trace = vec![
        Transaction::Deposit { user: adversary.clone(), amount: v1.clone(), token: t1.clone() },
        Transaction::PriceUpdate { delta: -delta.clone(), token: t2.clone() },
        Transaction::Borrow { user: adversary.clone(), amount: v2, token: t2.clone() },
        Transaction::PriceUpdate { delta: delta.clone(), token: t2.clone() },
    ];
    let run = match execute(params, state, adversary, &trace)? {
        Ok(run) => run,
        Err(failure) => return Ok(AttackOutcome::disabled(trace, failure)),
    };
    let position = net_position(&run.final_state, adversary)?;
    let threshold = undercollateralized_threshold(params, state, t1, t2)?;
    let claim = run.adversary_gain.is_zero()
        && run.final_state.prices == state.prices
        && (position.is_negative() == (*delta > threshold));
    Ok(AttackOutcome {
        trace,
        enabled: true,
        failure: None,
        adversary_gain: run.adversary_gain,
        victim_gain: None,
        adversary_baseline: None,
        victim_baseline: None,
        adversary_net_position: position,
        liquidation_gain: None,
        verdict: verdict(claim),
    })
}

/// Range of the geometric search for the manipulated price of the
/// collateral token: `start, start/2, start/4, ...` while `>= floor`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaSearch {
    pub start: Rational,
    pub floor: Rational,
}

impl DeltaSearch {
    /// From half the current price down to `price / 2^64`.
    pub fn for_price(price: &Rational) -> Self {
        let start = price / Rational::from_integer(2.into());
        let floor = price / Rational::from_integer(num_bigint::BigInt::from(2).pow(64));
        DeltaSearch { start, floor }
    }
}

fn only_token<'a>(
    entries: impl Iterator<Item = (&'a (TokenId, AddressId), &'a Rational)>,
    user: &AddressId,
) -> Vec<(TokenId, Rational)> {
    entries.filter(|((_, u), _)| u == user).map(|((t, _), v)| (t.clone(), v.clone())).collect()
}

/// Prefer [`build_liquidation_attack_with`] to pick the delta yourself. This
/// searches for a price of `t1` low enough to make the victim liquidatable.
#[allow(clippy::too_many_arguments)]
pub fn build_liquidation_attack(
    params: &ProtocolParams,
    state: &BlockchainState,
    adversary: &AddressId,
    victim: &AddressId,
    t1: &TokenId,
    t2: &TokenId,
    v_l: &Rational,
    search: Option<DeltaSearch>,
) -> Result<AttackOutcome, AttackError> {
    check_liquidation_hypotheses(params, state, adversary, victim, t1, t2, v_l)?;
    let search = match search {
        Some(s) => s,
        None => DeltaSearch::for_price(state.price(t1)?),
    };
    let mut delta = search.start.clone();
    while delta >= search.floor {
        let outcome =
            build_liquidation_attack_with(params, state, adversary, victim, t1, t2, v_l, &delta)?;
        if outcome.enabled {
            return Ok(outcome);
        }
        delta /= Rational::from_integer(2.into());
    }
    Err(AttackError::NoFeasibleDelta)
}

fn check_liquidation_hypotheses(
    params: &ProtocolParams,
    state: &BlockchainState,
    adversary: &AddressId,
    victim: &AddressId,
    t1: &TokenId,
    t2: &TokenId,
    v_l: &Rational,
) -> Result<(), AttackError> {
    if adversary == victim {
        return Err(violated("adversary and victim coincide"));
    }
    if t1 == t2 {
        return Err(violated("collateral and debt tokens coincide"));
    }
    let credits = only_token(state.pool.credits.iter(), victim);
    if credits.len() != 1 || credits[0].0 != *t1 {
        return Err(violated(format!("{victim} must hold credits only in {t1}")));
    }
    let debts = only_token(state.pool.debits.iter(), victim);
    if debts.len() != 1 || debts[0].0 != *t2 {
        return Err(violated(format!("{victim} must owe only {t2}")));
    }
    let held = state.wallet.balance(t2, adversary);
    if !held.is_positive() {
        return Err(violated(format!("{adversary} holds no {t2}")));
    }
    let health = health_factor(params, state, victim)?;
    if !health.at_least_one() {
        return Err(violated(format!("{victim} is already liquidatable (health {health})")));
    }
    if !v_l.is_positive() || *v_l > held || *v_l > debts[0].1 {
        return Err(violated(format!("repaid amount {v_l} out of range")));
    }
    Ok(())
}

/// `px(delta - p(t1): t1) · A:liq(victim, v_l: t2, t1) · px(p(t1) - delta: t1)`:
/// the adversary drops the price of the victim's collateral to `delta`,
/// liquidates, and restores the price.
#[allow(clippy::too_many_arguments)]
pub fn build_liquidation_attack_with(
    params: &ProtocolParams,
    state: &BlockchainState,
    adversary: &AddressId,
    victim: &AddressId,
    t1: &TokenId,
    t2: &TokenId,
    v_l: &Rational,
    delta: &Rational,
) -> Result<AttackOutcome, AttackError> {
    check_liquidation_hypotheses(params, state, adversary, victim, t1, t2, v_l)?;
    let p1 = state.price(t1)?;
    if !delta.is_positive() || delta >= p1 {
        return Err(violated(format!("delta {delta} outside (0, {p1})")));
    }
    let drop = Transaction::PriceUpdate { delta: delta - p1, token: t1.clone() };
    let liq = Transaction::Liquidate {
        liquidator: adversary.clone(),
        borrower: victim.clone(),
        amount: v_l.clone(),
        debt_token: t2.clone(),
        collateral_token: t1.clone(),
    };
    let restore = Transaction::PriceUpdate { delta: p1 - delta, token: t1.clone() };
    let trace = vec![drop.clone(), liq.clone(), restore];
    let run = match execute(params, state, adversary, &trace)? {
        Ok(run) => run,
        Err(failure) => return Ok(AttackOutcome::disabled(trace, failure)),
    };
    let manipulated = crate::semantics::apply(params, state, &drop).expect("executed above");
    let liquidation_gain = gain_of(params, &manipulated, adversary, std::slice::from_ref(&liq))?;
    let predicted = predicted_gain_liquidation(params, &manipulated, &liq)
        .map(|(won, _)| won)
        .ok();
    let victim_gain = gain_of(params, state, victim, &trace)?;
    let claim = run.adversary_gain.is_positive() && predicted.as_ref() == Some(&liquidation_gain);
    Ok(AttackOutcome {
        trace,
        enabled: true,
        failure: None,
        adversary_net_position: net_position(&run.final_state, adversary)?,
        adversary_gain: run.adversary_gain,
        victim_gain: Some(victim_gain),
        adversary_baseline: None,
        victim_baseline: None,
        liquidation_gain: Some(liquidation_gain),
        verdict: verdict(claim),
    })
}

fn require_utilization_sensitive(params: &ProtocolParams) -> Result<(), AttackError> {
    match params.rate.linear_alpha() {
        Some(alpha) if alpha.is_positive() => Ok(()),
        Some(_) => Err(violated("the rate model must depend on utilization (alpha > 0)")),
        None => Err(violated("the rate model must be linear in utilization")),
    }
}

fn utilization_outcome(
    params: &ProtocolParams,
    state: &BlockchainState,
    adversary: &AddressId,
    victim: &AddressId,
    trace: Vec<Transaction>,
    run: Executed,
) -> Result<AttackOutcome, AttackError> {
    let accrual = [Transaction::AccrueInterest];
    let adversary_baseline = gain_of(params, state, adversary, &accrual)?;
    let victim_baseline = gain_of(params, state, victim, &accrual)?;
    let victim_gain = gain_of(params, state, victim, &trace)?;
    let claim = run.adversary_gain > adversary_baseline && victim_gain < victim_baseline;
    Ok(AttackOutcome {
        trace,
        enabled: true,
        failure: None,
        adversary_net_position: net_position(&run.final_state, adversary)?,
        adversary_gain: run.adversary_gain,
        victim_gain: Some(victim_gain),
        adversary_baseline: Some(adversary_baseline),
        victim_baseline: Some(victim_baseline),
        liquidation_gain: None,
        verdict: verdict(claim),
    })
}

/// `dep(v: t) · int · rdm(all credits: t)`: the adversary dilutes the
/// utilization of `t` around the accrual and takes a share of the interest
/// that would have gone to the victim.
pub fn build_underutilization_attack(
    params: &ProtocolParams,
    state: &BlockchainState,
    adversary: &AddressId,
    victim: &AddressId,
    token: &TokenId,
    v: &Rational,
) -> Result<AttackOutcome, AttackError> {
    require_utilization_sensitive(params)?;
    if adversary == victim {
        return Err(violated("adversary and victim coincide"));
    }
    if !state.pool.credit(token, adversary).is_zero() {
        return Err(violated(format!("{adversary} already holds credits of {token}")));
    }
    if !state.pool.credit(token, victim).is_positive() {
        return Err(violated(format!("{victim} holds no credits of {token}")));
    }
    if !state.pool.debit(token, victim).is_zero() {
        return Err(violated(format!("{victim} owes {token}")));
    }
    if !debt_supply(&state.pool, token).is_positive() {
        return Err(violated(format!("nobody owes {token}")));
    }
    if !v.is_positive() {
        return Err(violated("deposit amount must be positive"));
    }
    let deposit = Transaction::Deposit { user: adversary.clone(), amount: v.clone(), token: token.clone() };
    let minted = match crate::semantics::apply(params, state, &deposit) {
        Ok(after) => after.pool.credit(token, adversary),
        Err(error) => {
            let trace = vec![deposit.clone()];
            return Ok(AttackOutcome::disabled(trace, TraceError { index: 0, tx: deposit, error }));
        }
    };
    let trace = vec![
        deposit,
        Transaction::AccrueInterest,
        Transaction::Redeem { user: adversary.clone(), amount: minted, token: token.clone() },
    ];
    match execute(params, state, adversary, &trace)? {
        Ok(run) => utilization_outcome(params, state, adversary, victim, trace, run),
        Err(failure) => Ok(AttackOutcome::disabled(trace, failure)),
    }
}

/// `bor(v: t) · int · rep(v: t)`: the adversary, sole creditor of `t`,
/// inflates its utilization around the accrual so the victim pays more
/// interest.
pub fn build_overutilization_attack(
    params: &ProtocolParams,
    state: &BlockchainState,
    adversary: &AddressId,
    victim: &AddressId,
    token: &TokenId,
    v: &Rational,
) -> Result<AttackOutcome, AttackError> {
    require_utilization_sensitive(params)?;
    if adversary == victim {
        return Err(violated("adversary and victim coincide"));
    }
    let credits = credit_supply(&state.pool, token);
    if !credits.is_positive() || state.pool.credit(token, adversary) != credits {
        return Err(violated(format!("{adversary} must hold all credits of {token}")));
    }
    if state.pool.debit(token, adversary) >= debt_supply(&state.pool, token) {
        return Err(violated(format!("{adversary} must owe less than the whole debt of {token}")));
    }
    if !state.pool.debit(token, victim).is_positive() {
        return Err(violated(format!("{victim} owes no {token}")));
    }
    if !v.is_positive() {
        return Err(violated("borrowed amount must be positive"));
    }
    let trace = vec![
        Transaction::Borrow { user: adversary.clone(), amount: v.clone(), token: token.clone() },
        Transaction::AccrueInterest,
        Transaction::Repay { user: adversary.clone(), amount: v.clone(), token: token.clone() },
    ];
    match execute(params, state, adversary, &trace)? {
        Ok(run) => utilization_outcome(params, state, adversary, victim, trace, run),
        Err(failure) => Ok(AttackOutcome::disabled(trace, failure)),
    }
}
