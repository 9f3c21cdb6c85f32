//! Runnable invariants of the transition system: per-step checks, trace
//! checks, differential gain checks, and a random trace generator.

mod fuzz;

use std::fmt;

use num_traits::{One, Signed, Zero};

pub use fuzz::{generate_trace, sample_candidate, FuzzConfig, FuzzError, GeneratedTrace};

use crate::analysis::{
    gain_of, predicted_gain_interest_accrual, predicted_gain_price_update,
    predicted_gain_user_action, require_enabled, AnalysisError, HealthTrend,
};
use crate::ledger::{
    credit_supply, debt_supply, debt_value, exchange_rate, health_factor, interest_rate,
    total_net_worth, wallet_supply, AddressId, BlockchainState, ProtocolParams,
    TokenId,
};
use crate::rational::{Extended, Rational};
use crate::semantics::{apply, apply_trace_with, TraceError, TraceMode, Transaction, TxKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InvariantId {
    Determinism,
    BaseTokenConservation,
    ExchangeRateLaw,
    ExchangeRateAtLeastOne,
    NoCreditsNoDebts,
    CreditSupplyBound,
    NetWorthPreservation,
    HealthDirection,
}

impl InvariantId {
    pub const ALL: [InvariantId; 8] = [
        InvariantId::Determinism,
        InvariantId::BaseTokenConservation,
        InvariantId::ExchangeRateLaw,
        InvariantId::ExchangeRateAtLeastOne,
        InvariantId::NoCreditsNoDebts,
        InvariantId::CreditSupplyBound,
        InvariantId::NetWorthPreservation,
        InvariantId::HealthDirection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InvariantId::Determinism => "determinism",
            InvariantId::BaseTokenConservation => "base-token-conservation",
            InvariantId::ExchangeRateLaw => "exchange-rate-law",
            InvariantId::ExchangeRateAtLeastOne => "exchange-rate-at-least-one",
            InvariantId::NoCreditsNoDebts => "no-credits-no-debts",
            InvariantId::CreditSupplyBound => "credit-supply-bound",
            InvariantId::NetWorthPreservation => "net-worth-preservation",
            InvariantId::HealthDirection => "health-direction",
        }
    }
}

impl fmt::Display for InvariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The two sides of a violated relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub subject: String,
    pub left: Extended,
    pub right: Extended,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} vs {}", self.subject, self.left, self.right)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail(Witness),
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    /// Zero-based trace position.
    pub step: usize,
    pub invariant: InvariantId,
    pub status: Status,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvariantReport {
    pub entries: Vec<CheckResult>,
}

impl InvariantReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.entries.iter().filter(|e| matches!(e.status, Status::Fail(_)))
    }

    pub fn is_clean(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn count(&self, invariant: InvariantId, pass: bool) -> usize {
        self.entries
            .iter()
            .filter(|e| e.invariant == invariant)
            .filter(|e| match &e.status {
                Status::Pass => pass,
                Status::Fail(_) => !pass,
                Status::NotApplicable => false,
            })
            .count()
    }

    pub fn status(&self, step: usize, invariant: InvariantId) -> Option<&Status> {
        self.entries.iter().find(|e| e.step == step && e.invariant == invariant).map(|e| &e.status)
    }

    pub fn merge(&mut self, other: InvariantReport) {
        self.entries.extend(other.entries);
    }

    fn with_step(mut self, step: usize) -> Self {
        for e in &mut self.entries {
            e.step = step;
        }
        self
    }
}

fn witness(subject: impl Into<String>, left: impl Into<Extended>, right: impl Into<Extended>) -> Status {
    Status::Fail(Witness { subject: subject.into(), left: left.into(), right: right.into() })
}

fn first_failure(checks: impl IntoIterator<Item = Status>) -> Status {
    checks.into_iter().find(|s| matches!(s, Status::Fail(_))).unwrap_or(Status::Pass)
}

fn equal(subject: impl FnOnce() -> String, left: Rational, right: Rational) -> Status {
    if left == right {
        Status::Pass
    } else {
        witness(subject(), left, right)
    }
}

fn all_tokens(pre: &BlockchainState, post: &BlockchainState) -> Vec<TokenId> {
    pre.tokens().union(&post.tokens()).cloned().collect()
}

/// Checks one step `pre --tx--> post`; the step index of the entries is 0.
pub fn check_step(
    params: &ProtocolParams,
    pre: &BlockchainState,
    tx: &Transaction,
    post: &BlockchainState,
) -> InvariantReport {
    let tokens = all_tokens(pre, post);
    let mut entries = Vec::with_capacity(InvariantId::ALL.len());
    let mut push = |invariant, status| entries.push(CheckResult { step: 0, invariant, status });

    push(
        InvariantId::Determinism,
        match apply(params, pre, tx) {
            Ok(again) if again == *post => Status::Pass,
            Ok(_) => witness(format!("re-applying {tx}"), Rational::one(), Rational::zero()),
            Err(e) => witness(format!("re-applying {tx} failed: {e}"), Rational::one(), Rational::zero()),
        },
    );

    push(
        InvariantId::BaseTokenConservation,
        if tx.kind() == TxKind::Swap {
            Status::NotApplicable
        } else {
            first_failure(tokens.iter().map(|t| {
                let before = wallet_supply(&pre.wallet, t) + pre.pool.reserve(t);
                let after = wallet_supply(&post.wallet, t) + post.pool.reserve(t);
                equal(|| format!("wallets + reserves of {t}"), before, after)
            }))
        },
    );

    push(InvariantId::ExchangeRateLaw, first_failure(tokens.iter().map(|t| exchange_rate_law(params, pre, tx, post, t))));

    push(
        InvariantId::ExchangeRateAtLeastOne,
        first_failure(tokens.iter().map(|t| {
            let x = exchange_rate(&post.pool, t);
            if x >= Rational::one() {
                Status::Pass
            } else {
                witness(format!("X({t})"), x, Rational::one())
            }
        })),
    );

    push(
        InvariantId::NoCreditsNoDebts,
        first_failure(tokens.iter().map(|t| {
            if !credit_supply(&post.pool, t).is_zero() {
                return Status::Pass;
            }
            let reserves = post.pool.reserve(t);
            let debts = debt_supply(&post.pool, t);
            if reserves.is_zero() && debts.is_zero() {
                Status::Pass
            } else {
                witness(format!("reserves + debts of {t} with no credits"), reserves + debts, Rational::zero())
            }
        })),
    );

    push(
        InvariantId::CreditSupplyBound,
        first_failure(tokens.iter().map(|t| {
            let credits = credit_supply(&post.pool, t);
            let backing = post.pool.reserve(t) + debt_supply(&post.pool, t);
            if credits <= backing {
                Status::Pass
            } else {
                witness(format!("credits of {t} vs reserves + debts"), credits, backing)
            }
        })),
    );

    push(
        InvariantId::NetWorthPreservation,
        if tx.kind() == TxKind::PriceUpdate {
            Status::NotApplicable
        } else {
            match (total_net_worth(pre), total_net_worth(post)) {
                (Ok(before), Ok(after)) => equal(|| "total net worth".to_string(), before, after),
                (Err(e), _) | (_, Err(e)) => witness(format!("total net worth: {e}"), Rational::one(), Rational::zero()),
            }
        },
    );

    push(InvariantId::HealthDirection, health_direction(params, pre, tx, post));

    InvariantReport { entries }
}

fn exchange_rate_law(
    params: &ProtocolParams,
    pre: &BlockchainState,
    tx: &Transaction,
    post: &BlockchainState,
    token: &TokenId,
) -> Status {
    let before = exchange_rate(&pre.pool, token);
    let after = exchange_rate(&post.pool, token);
    let subject = || format!("X({token}) after {tx}");
    match tx {
        Transaction::AccrueInterest => {
            let credits = credit_supply(&pre.pool, token);
            if credits.is_zero() {
                return equal(subject, after, before);
            }
            let increment =
                debt_supply(&pre.pool, token) / credits * interest_rate(params, &pre.pool, token);
            equal(subject, after, before + increment)
        }
        Transaction::Redeem { token: t, .. }
            if t == token && credit_supply(&post.pool, token).is_zero() =>
        {
            equal(subject, after, Rational::one())
        }
        _ => equal(subject, after, before),
    }
}

fn health_direction(
    params: &ProtocolParams,
    pre: &BlockchainState,
    tx: &Transaction,
    post: &BlockchainState,
) -> Status {
    let Some(user) = tx.actor() else {
        return Status::NotApplicable;
    };
    let (before, after, indebted) = match (
        health_factor(params, pre, user),
        health_factor(params, post, user),
        debt_value(pre, user),
    ) {
        (Ok(b), Ok(a), Ok(d)) => (b, a, d.is_positive()),
        _ => return witness(format!("health of {user}: missing price"), Rational::one(), Rational::zero()),
    };
    let trend = match tx.kind() {
        TxKind::Deposit | TxKind::Repay | TxKind::Liquidate => HealthTrend::NonDecreasing,
        TxKind::Borrow | TxKind::Redeem => HealthTrend::NonIncreasing,
        _ => HealthTrend::Equal,
    };
    let strict = indebted && trend != HealthTrend::Equal;
    let ok = match trend {
        HealthTrend::NonDecreasing if strict => after > before,
        HealthTrend::NonDecreasing => after >= before,
        HealthTrend::NonIncreasing if strict => after < before,
        HealthTrend::NonIncreasing => after <= before,
        HealthTrend::Equal => after == before,
    };
    if ok {
        Status::Pass
    } else {
        Status::Fail(Witness { subject: format!("H({user}) after {tx}"), left: after, right: before })
    }
}

/// Runs the trace in strict mode and checks every step.
pub fn check_trace(
    params: &ProtocolParams,
    initial: &BlockchainState,
    trace: &[Transaction],
) -> Result<InvariantReport, TraceError> {
    let mut report = InvariantReport::default();
    apply_trace_with(params, initial, trace, TraceMode::Strict, |record| {
        if let Ok(post) = record.outcome {
            report.merge(check_step(params, record.pre, record.tx, post).with_step(record.index));
        }
    })?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserGainCheck {
    pub user: AddressId,
    pub definitional: Rational,
    pub predicted: Rational,
}

impl UserGainCheck {
    pub fn matches(&self) -> bool {
        self.definitional == self.predicted
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferentialReport {
    pub tx: Transaction,
    pub users: Vec<UserGainCheck>,
    pub total: Rational,
    /// Gains must cancel out for every transaction but price updates.
    pub total_must_vanish: bool,
}

impl DifferentialReport {
    pub fn ok(&self) -> bool {
        self.users.iter().all(UserGainCheck::matches)
            && (!self.total_must_vanish || self.total.is_zero())
    }
}

/// Compares, for every user of the state, the gain of `[tx]` by execution
/// with the closed-form prediction for its kind.
pub fn differential_gain_check(
    params: &ProtocolParams,
    state: &BlockchainState,
    tx: &Transaction,
) -> Result<DifferentialReport, AnalysisError> {
    require_enabled(params, state, tx)?;
    let mut users = state.users();
    if let Some(actor) = tx.actor() {
        users.insert(actor.clone());
    }
    if let Transaction::Liquidate { borrower, .. } = tx {
        users.insert(borrower.clone());
    }
    let mut checks = Vec::with_capacity(users.len());
    let mut total = Rational::zero();
    for user in users {
        let definitional = gain_of(params, state, &user, std::slice::from_ref(tx))?;
        let predicted = match tx {
            Transaction::AccrueInterest => predicted_gain_interest_accrual(params, state, &user)?,
            Transaction::PriceUpdate { delta, token } => {
                predicted_gain_price_update(state, &user, delta, token)?
            }
            _ => predicted_gain_user_action(params, state, tx, &user)?,
        };
        total += &definitional;
        checks.push(UserGainCheck { user, definitional, predicted });
    }
    Ok(DifferentialReport {
        tx: tx.clone(),
        users: checks,
        total,
        total_must_vanish: tx.kind() != TxKind::PriceUpdate,
    })
}
