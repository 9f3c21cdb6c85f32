use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ledger::{
    credit_value, debt_value, exchange_rate, health_factor, AddressId, BlockchainState,
    InterestRateFn, ProtocolParams, TokenId,
};
use crate::rational::{int, ratio, Rational};
use crate::semantics::{apply, initial_state, Transaction, TxKind};

const RETRIES: usize = 64;
const PRICE_DENOMINATOR: i64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FuzzError {
    #[error("invalid fuzz configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    pub users: usize,
    pub tokens: usize,
    /// Inclusive range of initial whole-unit wallet balances.
    pub initial_balance: (u64, u64),
    pub steps: usize,
    pub weights: BTreeMap<TxKind, u32>,
    /// Random amounts are multiples of `1 / amount_denominator`.
    pub amount_denominator: u64,
    pub params: ProtocolParams,
    pub seed: u64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        let weights = [
            (TxKind::Deposit, 5),
            (TxKind::Borrow, 4),
            (TxKind::Repay, 3),
            (TxKind::Redeem, 3),
            (TxKind::Liquidate, 3),
            (TxKind::AccrueInterest, 2),
            (TxKind::PriceUpdate, 2),
            (TxKind::Swap, 1),
        ];
        FuzzConfig {
            users: 3,
            tokens: 2,
            initial_balance: (10, 200),
            steps: 25,
            weights: weights.into_iter().collect(),
            amount_denominator: 10_000,
            params: ProtocolParams::new(
                ratio(2, 3),
                ratio(11, 10),
                InterestRateFn::linear(ratio(1, 10), ratio(1, 20)).expect("valid rate"),
            )
            .expect("valid params"),
            seed: 0,
        }
    }
}

impl FuzzConfig {
    pub fn validate(&self) -> Result<(), FuzzError> {
        let bad = |m: &str| Err(FuzzError::InvalidConfig(m.to_string()));
        if self.users == 0 || self.tokens == 0 {
            return bad("at least one user and one token are required");
        }
        if self.initial_balance.0 > self.initial_balance.1 {
            return bad("empty initial balance range");
        }
        if self.amount_denominator == 0 {
            return bad("amount denominator must be positive");
        }
        if self.weights.values().all(|w| *w == 0) {
            return bad("at least one transaction weight must be positive");
        }
        Ok(())
    }

    pub fn user(i: usize) -> AddressId {
        AddressId::new(format!("U{i}"))
    }

    pub fn token(i: usize) -> TokenId {
        TokenId::new(format!("T{i}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedTrace {
    pub initial: BlockchainState,
    pub trace: Vec<Transaction>,
    /// State after the whole trace.
    pub final_state: BlockchainState,
}

/// Generates a random trace of enabled transactions, fully determined by
/// the seed.
pub fn generate_trace(config: &FuzzConfig) -> Result<GeneratedTrace, FuzzError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let users: Vec<_> = (0..config.users).map(FuzzConfig::user).collect();
    let tokens: Vec<_> = (0..config.tokens).map(FuzzConfig::token).collect();
    let prices: Vec<_> = tokens
        .iter()
        .map(|t| (t.clone(), ratio(rng.gen_range(1..=16), 4)))
        .collect();
    let (lo, hi) = config.initial_balance;
    let mut wallets = Vec::new();
    for u in &users {
        for t in &tokens {
            let amount = rng.gen_range(lo..=hi);
            wallets.push((u.clone(), t.clone(), Rational::from_integer(BigInt::from(amount))));
        }
    }
    let initial = initial_state(wallets, prices)
        .map_err(|e| FuzzError::InvalidConfig(e.to_string()))?;

    let kinds: Vec<(TxKind, u32)> = config.weights.iter().map(|(k, w)| (*k, *w)).collect();
    let total: u32 = kinds.iter().map(|(_, w)| w).sum();
    let mut state = initial.clone();
    let mut trace = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        let mut chosen = None;
        for _ in 0..RETRIES {
            let mut pick = rng.gen_range(0..total);
            let kind = kinds
                .iter()
                .find(|(_, w)| {
                    if pick < *w {
                        true
                    } else {
                        pick -= w;
                        false
                    }
                })
                .map(|(k, _)| *k)
                .expect("weights sum to total");
            let Some(tx) = sample_candidate(&mut rng, config, &state, kind) else {
                continue;
            };
            if let Ok(next) = apply(&config.params, &state, &tx) {
                chosen = Some((tx, next));
                break;
            }
        }
        let (tx, next) = chosen.unwrap_or_else(|| {
            let next = apply(&config.params, &state, &Transaction::AccrueInterest)
                .expect("accrual is always enabled");
            (Transaction::AccrueInterest, next)
        });
        trace.push(tx);
        state = next;
    }
    Ok(GeneratedTrace { initial, trace, final_state: state })
}

/// Uniform amount in `(0, upper]` on the grid `1 / denominator`.
fn draw_amount<R: Rng>(rng: &mut R, upper: &Rational, denominator: u64) -> Option<Rational> {
    if !upper.is_positive() {
        return None;
    }
    let den = Rational::from_integer(BigInt::from(denominator));
    let steps = (upper * &den).floor().to_integer().to_u64().unwrap_or(u64::MAX / 2);
    if steps == 0 {
        return None;
    }
    // favour small amounts half of the time so boundaries are exercised
    let top = if rng.gen_bool(0.5) { steps } else { steps.min(rng.gen_range(1..=steps)) };
    let n = rng.gen_range(1..=top);
    Some(Rational::new(BigInt::from(n), BigInt::from(denominator)))
}

fn pick<'a, R: Rng, T>(rng: &mut R, items: &'a [T]) -> Option<&'a T> {
    items.choose(rng)
}

/// A random candidate of the given kind with an amount inside the bounds
/// implied by the current balances. The candidate may still be disabled.
pub fn sample_candidate<R: Rng>(
    rng: &mut R,
    config: &FuzzConfig,
    state: &BlockchainState,
    kind: TxKind,
) -> Option<Transaction> {
    let params = &config.params;
    let users: Vec<_> = (0..config.users).map(FuzzConfig::user).collect();
    let tokens: Vec<_> = (0..config.tokens).map(FuzzConfig::token).collect();
    let den = config.amount_denominator;
    let user = pick(rng, &users)?.clone();
    let token = pick(rng, &tokens)?.clone();
    match kind {
        TxKind::Deposit => {
            let amount = draw_amount(rng, &state.wallet.balance(&token, &user), den)?;
            Some(Transaction::Deposit { user, amount, token })
        }
        TxKind::Borrow => {
            let headroom = credit_value(state, &user).ok()? * &params.liq_threshold
                - debt_value(state, &user).ok()?;
            let upper = (headroom / state.price(&token).ok()?).min(state.pool.reserve(&token));
            let amount = draw_amount(rng, &upper, den)?;
            Some(Transaction::Borrow { user, amount, token })
        }
        TxKind::Repay => {
            let upper = state.wallet.balance(&token, &user).min(state.pool.debit(&token, &user));
            let amount = draw_amount(rng, &upper, den)?;
            Some(Transaction::Repay { user, amount, token })
        }
        TxKind::Redeem => {
            let x = exchange_rate(&state.pool, &token);
            let mut upper = state.pool.credit(&token, &user).min(state.pool.reserve(&token) / &x);
            let debt = debt_value(state, &user).ok()?;
            if debt.is_positive() {
                let spare = credit_value(state, &user).ok()? - debt / &params.liq_threshold;
                upper = upper.min(spare / (x * state.price(&token).ok()?));
            }
            // redeeming everything exercises the drain law
            if upper == state.pool.credit(&token, &user) && rng.gen_bool(0.2) {
                return Some(Transaction::Redeem { user, amount: upper, token });
            }
            let amount = draw_amount(rng, &upper, den)?;
            Some(Transaction::Redeem { user, amount, token })
        }
        TxKind::Liquidate => sample_liquidation(rng, config, state, &users),
        TxKind::AccrueInterest => Some(Transaction::AccrueInterest),
        TxKind::PriceUpdate => {
            let price = state.price(&token).ok()?;
            let lo = (price / int(2)).max(ratio(1, PRICE_DENOMINATOR));
            let hi = (price * int(2)).min(int(PRICE_DENOMINATOR));
            let scale = Rational::from_integer(BigInt::from(PRICE_DENOMINATOR));
            let lo_n = (lo * &scale).ceil().to_integer().to_i64()?;
            let hi_n = (hi * &scale).floor().to_integer().to_i64()?;
            if lo_n > hi_n {
                return None;
            }
            let target = ratio(rng.gen_range(lo_n..=hi_n), PRICE_DENOMINATOR);
            let delta = target - price;
            if delta.is_zero() {
                return None;
            }
            Some(Transaction::PriceUpdate { delta, token })
        }
        TxKind::Swap => {
            let to = pick(rng, &tokens)?.clone();
            if to == token {
                return None;
            }
            let amount = draw_amount(rng, &state.wallet.balance(&token, &user), den)?;
            Some(Transaction::Swap { user, amount, from: token, to })
        }
    }
}

fn sample_liquidation<R: Rng>(
    rng: &mut R,
    config: &FuzzConfig,
    state: &BlockchainState,
    users: &[AddressId],
) -> Option<Transaction> {
    let params = &config.params;
    let unhealthy: Vec<_> = users
        .iter()
        .filter(|u| health_factor(params, state, u).is_ok_and(|h| !h.at_least_one()))
        .collect();
    let borrower = (*pick(rng, &unhealthy)?).clone();
    let debts: Vec<_> = state
        .pool
        .debits
        .iter()
        .filter(|((_, u), _)| *u == borrower)
        .map(|((t, _), _)| t.clone())
        .collect();
    let collaterals: Vec<_> = state
        .pool
        .credits
        .iter()
        .filter(|((_, u), _)| *u == borrower)
        .map(|((t, _), _)| t.clone())
        .collect();
    let debt_token = pick(rng, &debts)?.clone();
    let collateral_token = pick(rng, &collaterals)?.clone();
    let others: Vec<_> = users
        .iter()
        .filter(|u| **u != borrower && state.wallet.balance(&debt_token, u).is_positive())
        .collect();
    let liquidator = (*pick(rng, &others)?).clone();

    let p0 = state.price(&debt_token).ok()?;
    let p1 = state.price(&collateral_token).ok()?;
    let x1 = exchange_rate(&state.pool, &collateral_token);
    let reward = &params.liq_reward;
    let threshold = &params.liq_threshold;
    let mut upper = state
        .wallet
        .balance(&debt_token, &liquidator)
        .min(state.pool.debit(&debt_token, &borrower))
        .min(state.pool.credit(&collateral_token, &borrower) * &x1 * p1 / (p0 * reward));
    // post-health <= 1 bounds the repaid value when reward * threshold < 1
    let slack = Rational::one() - reward * threshold;
    if slack.is_positive() {
        let debt = debt_value(state, &borrower).ok()?;
        let credit = credit_value(state, &borrower).ok()?;
        upper = upper.min((debt - credit * threshold) / (slack * p0));
    }
    let amount = draw_amount(rng, &upper, config.amount_denominator)?;
    Some(Transaction::Liquidate { liquidator, borrower, amount, debt_token, collateral_token })
}
