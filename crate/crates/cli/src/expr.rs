//! Exact arithmetic expressions for CPT entries, e.g. `"3/4"`, `"0.25"` or `"1 - delta"`.

use std::collections::BTreeMap;

use maxleak::rational::{parse_rational, Rational};
use num_traits::Zero;

use crate::error::{CliError, Result};

/// Named parameter values available to expressions.
pub type Params = BTreeMap<String, Rational>;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(String),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            out.push(Token::Num(chars[start..i].iter().collect()));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(CliError::Format(format!("unexpected `{c}` in expression `{text}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    text: &'a str,
    params: &'a Params,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> CliError {
        CliError::Format(format!("{msg} in expression `{}`", self.text))
    }

    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Rational> {
        let mut v = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            v = if op == '+' { v + rhs } else { v - rhs };
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<Rational> {
        let mut v = self.factor()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.factor()?;
            if op == '*' {
                v *= rhs;
            } else {
                if rhs.is_zero() {
                    return Err(self.err("division by zero"));
                }
                v /= rhs;
            }
        }
        Ok(v)
    }

    fn factor(&mut self) -> Result<Rational> {
        let tok = self.tokens.get(self.pos).cloned().ok_or_else(|| self.err("unexpected end"))?;
        self.pos += 1;
        match tok {
            Token::Op('-') => Ok(-self.factor()?),
            Token::Op('+') => self.factor(),
            Token::Op('(') => {
                let v = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err(self.err("missing `)`"));
                }
                self.pos += 1;
                Ok(v)
            }
            Token::Num(s) => parse_rational(&s).map_err(|_| self.err(&format!("bad number `{s}`"))),
            Token::Ident(name) => self
                .params
                .get(&name)
                .cloned()
                .ok_or_else(|| self.err(&format!("unknown parameter `{name}`"))),
            Token::Op(c) => Err(self.err(&format!("unexpected `{c}`"))),
        }
    }
}

/// Evaluates `text` exactly, resolving identifiers from `params`.
pub fn eval(text: &str, params: &Params) -> Result<Rational> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(CliError::Format("empty expression".into()));
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        text,
        params,
    };
    let v = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(p.err("trailing input"));
    }
    Ok(v)
}

/// Parses `name=value` assignments.
pub fn parse_assignments(items: &[String]) -> Result<Params> {
    let mut out = Params::new();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected name=value, got `{item}`")))?;
        out.insert(k.trim().to_string(), eval(v, &Params::new())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use maxleak::rational::rat;

    #[test]
    fn evaluates() {
        let mut p = Params::new();
        p.insert("delta".into(), rat(1, 4));
        assert_eq!(eval("3/4", &p).unwrap(), rat(3, 4));
        assert_eq!(eval("0.125", &p).unwrap(), rat(1, 8));
        assert_eq!(eval("1 - delta", &p).unwrap(), rat(3, 4));
        assert_eq!(eval("(1-delta)/2 + delta*delta", &p).unwrap(), rat(7, 16));
        assert_eq!(eval("-1/2", &p).unwrap(), rat(-1, 2));
        assert!(eval("1/0", &p).is_err());
        assert!(eval("eps", &p).is_err());
        assert!(eval("1 +", &p).is_err());
        assert!(eval("(1", &p).is_err());
        assert!(eval("1 2", &p).is_err());
    }
}
