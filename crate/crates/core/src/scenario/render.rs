use std::fmt::Write;

use crate::ledger::{health_factor, net_worth, BlockchainState, ProtocolParams};
use crate::rational::{format_exact, format_truncated, Extended, Rational};

use super::Scenario;

/// Canonical text of a scenario: parameters, wallets, prices, trace,
/// expectations, one item per line.
pub fn render_scenario(scenario: &Scenario) -> String {
    let p = &scenario.params;
    let mut out = String::new();
    let _ = writeln!(out, "param Tliq {}", format_exact(&p.liq_threshold));
    let _ = writeln!(out, "param Rliq {}", format_exact(&p.liq_reward));
    let _ = writeln!(out, "param rate linear {} {}", format_exact(&p.alpha), format_exact(&p.beta));
    if !scenario.wallets.is_empty() {
        out.push('\n');
    }
    for (user, token, amount) in &scenario.wallets {
        let _ = writeln!(out, "wallet {user} {}:{token}", format_exact(amount));
    }
    for (token, price) in &scenario.prices {
        let _ = writeln!(out, "price {token} {}", format_exact(price));
    }
    if !scenario.trace.is_empty() {
        out.push('\n');
    }
    for tx in &scenario.trace {
        let _ = writeln!(out, "{tx}");
    }
    if !scenario.expectations.is_empty() {
        out.push('\n');
    }
    for e in &scenario.expectations {
        let _ = write!(out, "expect step {} {}", e.step, e.quantity);
        if let Some(exact) = &e.exact {
            let _ = write!(out, " {}", exact.display_exact());
        }
        if let Some(approx) = &e.approx {
            let _ = write!(out, " ≈{approx}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportOptions {
    /// Decimals shown; values are truncated toward zero.
    pub precision: usize,
    /// Show exact values instead.
    pub exact: bool,
    pub title: String,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { precision: 2, exact: false, title: "state".to_string() }
    }
}

impl ReportOptions {
    fn value(&self, v: &Rational) -> String {
        if self.exact {
            format_exact(v)
        } else {
            format_truncated(v, self.precision)
        }
    }

    fn extended(&self, v: &Extended) -> String {
        if self.exact {
            v.display_exact()
        } else {
            v.display(self.precision)
        }
    }
}

/// A state as a compact listing, one line per user:
///
/// ```text
/// B: 25:T0, 34.27:ĉT1, 17.6:δT0  H(B)=0.99  W(B)=36.39
/// ```
///
/// followed by the pool reserves and the prices. An empty state renders as
/// the title line alone.
pub fn render_state_report(
    params: &ProtocolParams,
    state: &BlockchainState,
    options: &ReportOptions,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", options.title);
    let users = state.users();
    for user in &users {
        let mut holdings = Vec::new();
        for ((token, u), amount) in state.wallet.balances.iter() {
            if u == user {
                holdings.push(format!("{}:{token}", options.value(amount)));
            }
        }
        for ((token, u), amount) in state.pool.credits.iter() {
            if u == user {
                holdings.push(format!("{}:ĉ{token}", options.value(amount)));
            }
        }
        for ((token, u), amount) in state.pool.debits.iter() {
            if u == user {
                holdings.push(format!("{}:δ{token}", options.value(amount)));
            }
        }
        let _ = write!(out, "{user}: {}", holdings.join(", "));
        if let Ok(h) = health_factor(params, state, user) {
            let _ = write!(out, "  H({user})={}", options.extended(&h));
        }
        if let Ok(w) = net_worth(state, user) {
            let _ = write!(out, "  W({user})={}", options.value(&w));
        }
        out.push('\n');
    }
    if !state.pool.reserves.is_empty() {
        let reserves: Vec<_> = state
            .pool
            .reserves
            .iter()
            .map(|(token, amount)| format!("{}:{token}", options.value(amount)))
            .collect();
        let _ = writeln!(out, "LP: {}", reserves.join(", "));
    }
    if !users.is_empty() || !state.pool.is_empty() {
        let prices: Vec<_> = state
            .prices
            .iter()
            .map(|(token, p)| format!("{token}={}", options.value(p)))
            .collect();
        let _ = writeln!(out, "p: {}", prices.join(", "));
    }
    out
}
