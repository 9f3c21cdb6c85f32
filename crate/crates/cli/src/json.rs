use serde_json::{json, Map, Value};

use lpmodel_core::ledger::{exchange_rate, health_factor, net_worth, Balances};
use lpmodel_core::rational::format_fraction;
use lpmodel_core::scenario::ExpectationCheck;
use lpmodel_core::{AddressId, BlockchainState, Extended, ProtocolParams, Rational, TokenId};

pub fn rational(v: &Rational) -> Value {
    Value::String(format_fraction(v))
}

pub fn extended(v: &Extended) -> Value {
    match v {
        Extended::Finite(r) => rational(r),
        Extended::Infinity => Value::String("+inf".to_string()),
    }
}

/// `{user: {token: amount}}`
fn per_user(balances: &Balances<(TokenId, AddressId)>) -> Value {
    let mut users: Map<String, Value> = Map::new();
    for ((token, user), amount) in balances.iter() {
        let entry = users.entry(user.to_string()).or_insert_with(|| Value::Object(Map::new()));
        entry.as_object_mut().unwrap().insert(token.to_string(), rational(amount));
    }
    Value::Object(users)
}

pub fn state(params: &ProtocolParams, state: &BlockchainState) -> Value {
    let reserves: Map<_, _> =
        state.pool.reserves.iter().map(|(t, v)| (t.to_string(), rational(v))).collect();
    let prices: Map<_, _> = state.prices.iter().map(|(t, v)| (t.to_string(), rational(v))).collect();
    let rates: Map<_, _> = state
        .pool
        .tokens()
        .iter()
        .map(|t| (t.to_string(), rational(&exchange_rate(&state.pool, t))))
        .collect();
    let mut health = Map::new();
    let mut worth = Map::new();
    for user in state.users() {
        if let Ok(h) = health_factor(params, state, &user) {
            health.insert(user.to_string(), extended(&h));
        }
        if let Ok(w) = net_worth(state, &user) {
            worth.insert(user.to_string(), rational(&w));
        }
    }
    json!({
        "wallets": per_user(&state.wallet.balances),
        "credits": per_user(&state.pool.credits),
        "debits": per_user(&state.pool.debits),
        "reserves": reserves,
        "prices": prices,
        "exchange_rates": rates,
        "health": health,
        "net_worth": worth,
    })
}

pub fn check(c: &ExpectationCheck) -> Value {
    json!({
        "step": c.expectation.step,
        "quantity": c.expectation.quantity.to_string(),
        "expected": c.expectation.exact.as_ref().map(extended),
        "approx": c.expectation.approx,
        "actual": extended(&c.actual),
        "passed": c.passed(),
    })
}
