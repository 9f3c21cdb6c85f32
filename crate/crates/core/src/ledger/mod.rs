//! Domain types of the lending model: wallets, the lending pool, the price
//! oracle and protocol parameters, plus the economic metrics defined over them.

mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

pub use metrics::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("token {0} has no price")]
    MissingPrice(TokenId),
    #[error("price of {token} must be strictly positive, got {value}")]
    NonPositivePrice { token: TokenId, value: Rational },
    #[error("balance of {what} must be non-negative, got {value}")]
    NegativeBalance { what: String, value: Rational },
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(&'static str),
}

macro_rules! identifier {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(Arc<str>);

        impl $name {
            /// Panics on an empty name.
            pub fn new(name: impl AsRef<str>) -> Self {
                let name = name.as_ref();
                assert!(!name.is_empty(), concat!(stringify!($name), " must be non-empty"));
                $name(Arc::from(name))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(name: &str) -> Self {
                $name::new(name)
            }
        }
    };
}

identifier!(
    /// A base token type.
    TokenId
);
identifier!(
    /// A user address.
    AddressId
);

/// A finite map to non-negative rationals in which absent keys read as zero.
/// Zero entries are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Balances<K: Ord>(BTreeMap<K, Rational>);

impl<K: Ord> Default for Balances<K> {
    fn default() -> Self {
        Balances(BTreeMap::new())
    }
}

impl<K: Ord + Clone> Balances<K> {
    pub fn get(&self, key: &K) -> Rational {
        self.0.get(key).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn get_ref(&self, key: &K) -> Option<&Rational> {
        self.0.get(key)
    }

    /// Stores `value`, dropping the entry when it is zero.
    pub fn set(&mut self, key: K, value: Rational) {
        debug_assert!(!value.is_negative(), "balances are non-negative");
        if value.is_zero() {
            self.0.remove(&key);
        } else {
            self.0.insert(key, value);
        }
    }

    pub fn add(&mut self, key: K, amount: &Rational) {
        let next = self.get(&key) + amount;
        self.set(key, next);
    }

    /// Subtracts `amount` if the balance covers it; leaves the map untouched
    /// and returns `false` otherwise.
    pub fn sub(&mut self, key: K, amount: &Rational) -> bool {
        let current = self.get(&key);
        if current < *amount {
            return false;
        }
        self.set(key, current - amount);
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Rational)> {
        self.0.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.0.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub(crate) fn map_values(&mut self, mut f: impl FnMut(&K, &Rational) -> Rational) {
        for (k, v) in self.0.iter_mut() {
            *v = f(k, v);
        }
        self.0.retain(|_, v| !v.is_zero());
    }
}

pub type UserBalances = Balances<(TokenId, AddressId)>;

impl UserBalances {
    /// Entries `(token, amount)` held by `user`.
    pub fn of_user<'a>(
        &'a self,
        user: &'a AddressId,
    ) -> impl Iterator<Item = (&'a TokenId, &'a Rational)> + 'a {
        self.0.iter().filter(move |((_, a), _)| a == user).map(|((t, _), v)| (t, v))
    }

    /// Sum of all users' balances of `token`.
    pub fn total(&self, token: &TokenId) -> Rational {
        self.0
            .iter()
            .filter(|((t, _), _)| t == token)
            .fold(Rational::zero(), |acc, (_, v)| acc + v)
    }

    pub fn amount(&self, token: &TokenId, user: &AddressId) -> Rational {
        self.get(&(token.clone(), user.clone()))
    }
}

/// Users' wallets: base-token balances per `(token, address)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WalletState {
    pub balances: UserBalances,
}

impl WalletState {
    pub fn balance(&self, token: &TokenId, user: &AddressId) -> Rational {
        self.balances.amount(token, user)
    }
}

/// The lending pool: reserves per base token, credit-token and debit-token
/// balances per `(token, address)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LendingPoolState {
    pub reserves: Balances<TokenId>,
    pub credits: UserBalances,
    pub debits: UserBalances,
}

impl LendingPoolState {
    pub fn reserve(&self, token: &TokenId) -> Rational {
        self.reserves.get(token)
    }

    pub fn credit(&self, token: &TokenId, user: &AddressId) -> Rational {
        self.credits.amount(token, user)
    }

    pub fn debit(&self, token: &TokenId, user: &AddressId) -> Rational {
        self.debits.amount(token, user)
    }

    pub fn is_empty(&self) -> bool {
        self.reserves.is_empty() && self.credits.is_empty() && self.debits.is_empty()
    }

    /// Every token with reserves, credits or debits in the pool.
    pub fn tokens(&self) -> BTreeSet<TokenId> {
        self.reserves
            .keys()
            .cloned()
            .chain(self.credits.keys().map(|(t, _)| t.clone()))
            .chain(self.debits.keys().map(|(t, _)| t.clone()))
            .collect()
    }
}

/// Strictly positive price per base token.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PriceOracle {
    prices: BTreeMap<TokenId, Rational>,
}

impl PriceOracle {
    pub fn new<I>(entries: I) -> Result<Self, LedgerError>
    where
        I: IntoIterator<Item = (TokenId, Rational)>,
    {
        let mut oracle = PriceOracle::default();
        for (token, price) in entries {
            oracle.set(token, price)?;
        }
        Ok(oracle)
    }

    pub fn get(&self, token: &TokenId) -> Result<&Rational, LedgerError> {
        self.prices.get(token).ok_or_else(|| LedgerError::MissingPrice(token.clone()))
    }

    pub fn set(&mut self, token: TokenId, price: Rational) -> Result<(), LedgerError> {
        if !price.is_positive() {
            return Err(LedgerError::NonPositivePrice { token, value: price });
        }
        self.prices.insert(token, price);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TokenId, &Rational)> {
        self.prices.iter()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &TokenId> {
        self.prices.keys()
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// A full blockchain state: wallets, lending pool and price oracle.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockchainState {
    pub wallet: WalletState,
    pub pool: LendingPoolState,
    pub prices: PriceOracle,
}

impl BlockchainState {
    /// Every address holding base, credit or debit tokens.
    pub fn users(&self) -> BTreeSet<AddressId> {
        self.wallet
            .balances
            .keys()
            .chain(self.pool.credits.keys())
            .chain(self.pool.debits.keys())
            .map(|(_, a)| a.clone())
            .collect()
    }

    /// Every token that is priced or held anywhere.
    pub fn tokens(&self) -> BTreeSet<TokenId> {
        let mut tokens = self.pool.tokens();
        tokens.extend(self.prices.tokens().cloned());
        tokens.extend(self.wallet.balances.keys().map(|(t, _)| t.clone()));
        tokens
    }

    pub fn price(&self, token: &TokenId) -> Result<&Rational, LedgerError> {
        self.prices.get(token)
    }
}

/// Totals of one token in the pool; the only input an interest rate may
/// depend on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenTotals {
    pub reserves: Rational,
    pub credit_supply: Rational,
    pub debt_supply: Rational,
}

type RateFn = dyn Fn(&TokenTotals) -> Rational + Send + Sync;

/// A user-supplied interest rate model.
#[derive(Clone)]
pub struct CustomRate {
    name: String,
    rate: Arc<RateFn>,
}

impl CustomRate {
    pub fn new(
        name: impl Into<String>,
        rate: impl Fn(&TokenTotals) -> Rational + Send + Sync + 'static,
    ) -> Self {
        CustomRate { name: name.into(), rate: Arc::new(rate) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRate").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum InterestRateFn {
    /// `alpha * utilization + beta`, with `alpha >= 0` and `beta > 0`.
    LinearUtilization { alpha: Rational, beta: Rational },
    Custom(CustomRate),
}

impl InterestRateFn {
    pub fn linear(alpha: Rational, beta: Rational) -> Result<Self, LedgerError> {
        if alpha.is_negative() {
            return Err(LedgerError::InvalidParams("alpha must be >= 0"));
        }
        if !beta.is_positive() {
            return Err(LedgerError::InvalidParams("beta must be > 0"));
        }
        Ok(InterestRateFn::LinearUtilization { alpha, beta })
    }

    /// Panics if a custom model returns a non-positive rate.
    pub fn evaluate(&self, totals: &TokenTotals) -> Rational {
        match self {
            InterestRateFn::LinearUtilization { alpha, beta } => {
                alpha * utilization_of(totals) + beta
            }
            InterestRateFn::Custom(custom) => {
                let rate = (custom.rate)(totals);
                assert!(rate.is_positive(), "interest rate model `{}` returned {rate}", custom.name);
                rate
            }
        }
    }

    pub fn linear_alpha(&self) -> Option<&Rational> {
        match self {
            InterestRateFn::LinearUtilization { alpha, .. } => Some(alpha),
            InterestRateFn::Custom(_) => None,
        }
    }
}

pub(crate) fn utilization_of(totals: &TokenTotals) -> Rational {
    if totals.debt_supply.is_zero() {
        Rational::zero()
    } else {
        &totals.debt_supply / (&totals.reserves + &totals.debt_supply)
    }
}

/// Liquidation threshold, liquidation reward and interest rate model.
#[derive(Debug, Clone)]
pub struct ProtocolParams {
    pub liq_threshold: Rational,
    pub liq_reward: Rational,
    pub rate: InterestRateFn,
}

impl ProtocolParams {
    pub fn new(
        liq_threshold: Rational,
        liq_reward: Rational,
        rate: InterestRateFn,
    ) -> Result<Self, LedgerError> {
        if !liq_threshold.is_positive() || liq_threshold >= Rational::one() {
            return Err(LedgerError::InvalidParams("liquidation threshold must lie in (0, 1)"));
        }
        if liq_reward <= Rational::one() {
            return Err(LedgerError::InvalidParams("liquidation reward must be > 1"));
        }
        Ok(ProtocolParams { liq_threshold, liq_reward, rate })
    }

    pub fn with_rate(&self, rate: InterestRateFn) -> Self {
        ProtocolParams { rate, ..self.clone() }
    }
}
