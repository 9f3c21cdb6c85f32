use std::fmt;

use crate::ledger::{AddressId, TokenId};
use crate::rational::{parse_rational, Extended, Rational};
use crate::semantics::Transaction;

use super::{Expectation, Quantity, Scenario, ScenarioParams};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: expected {}, found {}",
            self.line, self.column, self.expected, self.found
        )
    }
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(text: &str, line: usize) -> Self {
        Cursor { chars: text.chars().collect(), pos: 0, line }
    }

    fn error(&self, at: usize, expected: impl Into<String>) -> ParseError {
        let found = if at >= self.chars.len() {
            "end of line".to_string()
        } else {
            let rest: String = self.chars[at..].iter().take_while(|c| !c.is_whitespace()).collect();
            format!("`{rest}`")
        };
        ParseError { line: self.line, column: at + 1, expected: expected.into(), found }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| f(*c)) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.chars.get(self.pos) {
            Some(c) if c.is_alphabetic() || *c == '_' => {}
            _ => return Err(self.error(start, what)),
        }
        Ok(self.take_while(|c| c.is_alphanumeric() || c == '_'))
    }

    fn keyword(&mut self, word: &str) -> Result<(), ParseError> {
        let start = self.pos;
        match self.ident(&format!("`{word}`")) {
            Ok(w) if w == word => Ok(()),
            _ => Err(self.error_at_word(start, &format!("`{word}`"))),
        }
    }

    fn error_at_word(&mut self, start: usize, expected: &str) -> ParseError {
        self.pos = start;
        self.skip_ws();
        self.error(self.pos, expected)
    }

    fn number(&mut self, what: &str) -> Result<Rational, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let text = self.take_while(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | '/'));
        parse_rational(&text).map_err(|_| self.error(start, what))
    }

    fn count(&mut self, what: &str) -> Result<usize, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let text = self.take_while(|c| c.is_ascii_digit());
        text.parse().map_err(|_| self.error(start, what))
    }

    fn punct(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(self.pos, format!("`{c}`")))
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        if self.pos < self.chars.len() {
            return Err(self.error(self.pos, "end of line"));
        }
        Ok(())
    }

    fn rest(&self) -> String {
        self.chars[self.pos..].iter().collect()
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn amount_token(&mut self) -> Result<(Rational, TokenId), ParseError> {
        let amount = self.number("an amount")?;
        self.punct(':')?;
        let token = self.ident("a token name")?;
        Ok((amount, TokenId::new(token)))
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(code, _)| code)
}

/// Parses one transaction in scenario syntax, e.g. `A:liq(B,11:T0,T1)`.
pub fn parse_transaction(text: &str) -> Result<Transaction, ParseError> {
    let mut cursor = Cursor::new(text, 1);
    let tx = transaction(&mut cursor)?;
    cursor.end()?;
    Ok(tx)
}

fn transaction(c: &mut Cursor) -> Result<Transaction, ParseError> {
    let start = c.pos;
    let head = c.ident("a transaction")?;
    match head.as_str() {
        "int" if c.peek() != Some(':') => return Ok(Transaction::AccrueInterest),
        "px" if c.peek() == Some('(') => {
            c.punct('(')?;
            let (delta, token) = c.amount_token()?;
            c.punct(')')?;
            return Ok(Transaction::PriceUpdate { delta, token });
        }
        _ => {}
    }
    if c.peek() != Some(':') {
        return Err(c.error_at_word(start, "a transaction"));
    }
    c.punct(':')?;
    let user = AddressId::new(&head);
    let kind_start = c.pos;
    let kind = c.ident("a transaction kind")?;
    c.punct('(')?;
    let tx = match kind.as_str() {
        "dep" | "bor" | "rep" | "rdm" => {
            let (amount, token) = c.amount_token()?;
            match kind.as_str() {
                "dep" => Transaction::Deposit { user, amount, token },
                "bor" => Transaction::Borrow { user, amount, token },
                "rep" => Transaction::Repay { user, amount, token },
                _ => Transaction::Redeem { user, amount, token },
            }
        }
        "liq" => {
            let borrower = AddressId::new(c.ident("a borrower")?);
            c.punct(',')?;
            let (amount, debt_token) = c.amount_token()?;
            c.punct(',')?;
            let collateral_token = TokenId::new(c.ident("a collateral token")?);
            Transaction::Liquidate { liquidator: user, borrower, amount, debt_token, collateral_token }
        }
        "swp" => {
            let (amount, from) = c.amount_token()?;
            c.punct(',')?;
            let to = TokenId::new(c.ident("a token name")?);
            Transaction::Swap { user, amount, from, to }
        }
        _ => return Err(c.error_at_word(kind_start, "one of dep, bor, rep, rdm, liq, swp")),
    };
    c.punct(')')?;
    Ok(tx)
}

fn expectation(c: &mut Cursor) -> Result<Expectation, ParseError> {
    c.keyword("step")?;
    let step = c.count("a step number")?;
    let start = c.pos;
    let kind = c.ident("a quantity")?;
    let user = |c: &mut Cursor| c.ident("a user").map(AddressId::new);
    let token = |c: &mut Cursor| c.ident("a token name").map(TokenId::new);
    let quantity = match kind.as_str() {
        "health" => Quantity::Health(user(c)?),
        "networth" => Quantity::NetWorth(user(c)?),
        "wallet" => Quantity::Wallet(user(c)?, token(c)?),
        "credit" => Quantity::Credit(user(c)?, token(c)?),
        "debit" => Quantity::Debit(user(c)?, token(c)?),
        "reserve" => Quantity::Reserve(token(c)?),
        "rate" => Quantity::ExchangeRate(token(c)?),
        "price" => Quantity::Price(token(c)?),
        _ => {
            return Err(c.error_at_word(
                start,
                "one of health, networth, wallet, credit, debit, reserve, rate, price",
            ))
        }
    };
    let mut exact = None;
    let mut approx = None;
    match c.peek() {
        Some('≈' | '~') | None => {}
        Some(_) if c.rest().trim_start_matches('+').starts_with("inf") => {
            c.take_while(|ch| ch == '+');
            c.keyword("inf")?;
            exact = Some(Extended::Infinity);
        }
        Some(_) => exact = Some(Extended::Finite(c.number("an expected value")?)),
    }
    if matches!(c.peek(), Some('≈' | '~')) {
        c.pos += 1;
        let at = c.pos;
        let text = c.take_while(|ch| !ch.is_whitespace());
        if !(text == "inf" || text == "+inf" || parse_rational(&text).is_ok()) {
            return Err(c.error(at, "an approximate value"));
        }
        approx = Some(text);
    }
    if exact.is_none() && approx.is_none() {
        return Err(c.error(c.pos, "an expected value"));
    }
    c.end()?;
    Ok(Expectation { step, quantity, exact, approx })
}

/// Parses a scenario file. `#` starts a comment; blank lines are ignored.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut liq_threshold = None;
    let mut liq_reward = None;
    let mut rate = None;
    let mut wallets = Vec::new();
    let mut prices = Vec::new();
    let mut trace = Vec::new();
    let mut expectations = Vec::new();
    let mut last_line = 0;
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        last_line = line;
        let code = strip_comment(raw);
        let mut c = Cursor::new(code, line);
        if c.at_end() {
            continue;
        }
        let start = c.pos;
        let head = c.take_while(|ch| ch.is_alphanumeric() || ch == '_');
        let is_directive = c.chars.get(c.pos).is_none_or(|ch| ch.is_whitespace());
        match head.as_str() {
            "param" if is_directive => {
                let name_at = c.pos;
                let name = c.ident("a parameter name")?;
                let slot_taken = match name.as_str() {
                    "Tliq" => liq_threshold.replace(c.number("a number")?).is_some(),
                    "Rliq" => liq_reward.replace(c.number("a number")?).is_some(),
                    "rate" => {
                        c.keyword("linear")?;
                        let alpha = c.number("alpha")?;
                        let beta = c.number("beta")?;
                        rate.replace((alpha, beta)).is_some()
                    }
                    _ => return Err(c.error_at_word(name_at, "one of Tliq, Rliq, rate")),
                };
                if slot_taken {
                    return Err(c.error_at_word(name_at, "a parameter not set before"));
                }
                c.end()?;
            }
            "wallet" if is_directive => {
                let user = AddressId::new(c.ident("a user")?);
                let (amount, token) = c.amount_token()?;
                wallets.push((user, token, amount));
                c.end()?;
            }
            "price" if is_directive => {
                let token = TokenId::new(c.ident("a token name")?);
                let value = c.number("a price")?;
                prices.push((token, value));
                c.end()?;
            }
            "expect" if is_directive => expectations.push(expectation(&mut c)?),
            _ => {
                c.pos = start;
                trace.push(transaction(&mut c)?);
                c.end()?;
            }
        }
    }
    let missing = |what: &str| ParseError {
        line: last_line + 1,
        column: 1,
        expected: what.to_string(),
        found: "end of input".to_string(),
    };
    let liq_threshold = liq_threshold.ok_or_else(|| missing("`param Tliq`"))?;
    let liq_reward = liq_reward.ok_or_else(|| missing("`param Rliq`"))?;
    let (alpha, beta) = rate.ok_or_else(|| missing("`param rate linear`"))?;
    Ok(Scenario {
        params: ScenarioParams { liq_threshold, liq_reward, alpha, beta },
        wallets,
        prices,
        trace,
        expectations,
    })
}
