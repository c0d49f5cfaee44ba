//! Tiny expression grammar shared by the canonical text forms of score
//! functions and process models: `name(arg, ...)`, numbers, `[a, b]` lists
//! and `{k: v, ...}` maps.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Expr {
    Num(f64),
    Call(String, Vec<Expr>),
    List(Vec<Expr>),
    Map(Vec<(Expr, Expr)>),
}

impl Expr {
    pub(crate) fn num(&self) -> Result<f64> {
        match self {
            Expr::Num(v) => Ok(*v),
            other => Err(Error::Parse(format!("expected a number, found {other:?}"))),
        }
    }

    pub(crate) fn list(&self) -> Result<&[Expr]> {
        match self {
            Expr::List(v) => Ok(v),
            other => Err(Error::Parse(format!("expected a list, found {other:?}"))),
        }
    }

    pub(crate) fn num_list(&self) -> Result<Vec<f64>> {
        self.list()?.iter().map(Expr::num).collect()
    }
}

pub(crate) fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

/// Parses `a; b; c` into its parts.
pub(crate) fn parse_seq(text: &str) -> Result<Vec<Expr>> {
    text.split(';').map(parse).collect()
}

pub(crate) fn expect_args<'a>(name: &str, args: &'a [Expr], n: usize) -> Result<&'a [Expr]> {
    if args.len() != n {
        return Err(Error::Parse(format!(
            "{name} takes {n} argument(s), got {}",
            args.len()
        )));
    }
    Ok(args)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, what: &str) -> Error {
        let rest = String::from_utf8_lossy(&self.src[self.pos..]);
        Error::Parse(format!("{what} at offset {} (near {rest:?})", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                let items = self.items(b']')?;
                Ok(Expr::List(items))
            }
            Some(b'{') => {
                self.pos += 1;
                let mut entries = Vec::new();
                if self.peek() == Some(b'}') {
                    self.pos += 1;
                    return Ok(Expr::Map(entries));
                }
                loop {
                    let k = self.expr()?;
                    self.eat(b':')?;
                    let v = self.expr()?;
                    entries.push((k, v));
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b'}') => {
                            self.pos += 1;
                            return Ok(Expr::Map(entries));
                        }
                        _ => return Err(self.err("expected ',' or '}'")),
                    }
                }
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos])
                    .expect("ascii")
                    .to_ascii_lowercase();
                if name == "inf" {
                    return Ok(Expr::Num(f64::INFINITY));
                }
                self.eat(b'(')?;
                let args = self.items(b')')?;
                Ok(Expr::Call(name, args))
            }
            Some(_) => self.number(),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn items(&mut self, close: u8) -> Result<Vec<Expr>> {
        let mut items = Vec::new();
        if self.peek() == Some(close) {
            self.pos += 1;
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(items);
                }
                _ => return Err(self.err(&format!("expected ',' or '{}'", close as char))),
            }
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if s == "-inf" || (s == "-" && self.src[self.pos..].starts_with(b"inf")) {
            self.pos = start + 4;
            return Ok(Expr::Num(f64::NEG_INFINITY));
        }
        s.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| Error::Parse(format!("bad number {s:?} at offset {start}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_forms() {
        let e = parse("affine(0.5, [1, 2.5e-1], {1: 0.25, 2: 0.75}, indicator(0.25))").unwrap();
        match e {
            Expr::Call(name, args) => {
                assert_eq!(name, "affine");
                assert_eq!(args.len(), 4);
                assert_eq!(args[1].num_list().unwrap(), vec![1.0, 0.25]);
            }
            _ => panic!("not a call"),
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse("indicator(0.25").is_err());
        assert!(parse("indicator(0.25) x").is_err());
        assert!(parse("1.2.3").is_err());
    }
}
