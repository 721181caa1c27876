//! Text parser for the linear-algebra surface language.
//!
//! Grammar (lowest precedence first):
//!   expr    := term (("+" | "-") term)*
//!   term    := factor (("*" | "%*%") factor)*
//!   factor  := unary ("^" INT)?
//!   unary   := "-" unary | atom
//!   atom    := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"
//!            | "t(" expr ")" | "sum(" expr ")" | "rowSums(" expr ")"
//!            | "colSums(" expr ")"
//!
//! A leading "-" parses as `0 - e`. Unknown NAME "(" calls must match a
//! declared opaque function in the catalog (arity is checked later at shape
//! time). Power exponents are positive integers.

use super::{IrError, LAExpr};

pub fn parse_la(input: &str) -> Result<LAExpr, IrError> {
    let mut p = Parser::new(input);
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> IrError {
        IrError::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> Result<(), IrError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", b as char)))
        }
    }

    fn starts_with(&mut self, s: &str) -> bool {
        self.skip_ws();
        self.src[self.pos..].starts_with(s)
    }

    fn expr(&mut self) -> Result<LAExpr, IrError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = LAExpr::ElemPlus(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = LAExpr::ElemMinus(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<LAExpr, IrError> {
        let mut lhs = self.factor()?;
        loop {
            if self.starts_with("%*%") {
                self.pos += 3;
                let rhs = self.factor()?;
                lhs = LAExpr::MMult(Box::new(lhs), Box::new(rhs));
            } else if self.peek() == Some(b'*') {
                self.pos += 1;
                let rhs = self.factor()?;
                lhs = LAExpr::ElemMult(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<LAExpr, IrError> {
        let base = self.unary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.integer()?;
            if k == 0 {
                return Err(self.err("exponent must be at least 1"));
            }
            if k == 1 {
                return Ok(base);
            }
            return Ok(LAExpr::ElemPow(Box::new(base), k));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<LAExpr, IrError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let e = self.unary()?;
            return Ok(LAExpr::ElemMinus(Box::new(LAExpr::Lit(0.0)), Box::new(e)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<LAExpr, IrError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.eat(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self.ident();
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(b',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.eat(b')')?;
                    let one = |args: Vec<LAExpr>, p: &Self| -> Result<Box<LAExpr>, IrError> {
                        let mut args = args;
                        if args.len() != 1 {
                            return Err(p.err(format!("{} takes one argument", name)));
                        }
                        Ok(Box::new(args.remove(0)))
                    };
                    match name.as_str() {
                        "t" => Ok(LAExpr::Transpose(one(args, self)?)),
                        "sum" => Ok(LAExpr::Agg(one(args, self)?)),
                        "rowSums" => Ok(LAExpr::RowAgg(one(args, self)?)),
                        "colSums" => Ok(LAExpr::ColAgg(one(args, self)?)),
                        _ => Ok(LAExpr::Call(name, args)),
                    }
                } else {
                    Ok(LAExpr::Mat(name))
                }
            }
            _ => Err(self.err("expected expression")),
        }
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_alphanumeric() || b == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.src[start..self.pos].to_string()
    }

    fn number(&mut self) -> Result<LAExpr, IrError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_digit() || b == b'.' {
                self.pos += 1;
            } else if (b == b'e' || b == b'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.bytes.get(self.pos), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(LAExpr::Lit)
            .map_err(|_| self.err("bad number"))
    }

    fn integer(&mut self) -> Result<u32, IrError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected integer exponent"));
        }
        self.src[start..self.pos]
            .parse::<u32>()
            .map_err(|_| self.err("exponent out of range"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = parse_la("A + B * C").unwrap();
        assert_eq!(e.to_string(), "A + B * C");
        match &e {
            LAExpr::ElemPlus(_, rhs) => assert!(matches!(**rhs, LAExpr::ElemMult(..))),
            other => panic!("unexpected {other:?}"),
        }
        let e = parse_la("A - B - C").unwrap();
        match &e {
            LAExpr::ElemMinus(lhs, _) => assert!(matches!(**lhs, LAExpr::ElemMinus(..))),
            other => panic!("unexpected {other:?}"),
        }
        let e = parse_la("A %*% B * C").unwrap();
        match &e {
            LAExpr::ElemMult(lhs, _) => assert!(matches!(**lhs, LAExpr::MMult(..))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn functions_and_calls() {
        let e = parse_la("sum(t(A) %*% B)").unwrap();
        assert_eq!(e.to_string(), "sum(t(A) %*% B)");
        let e = parse_la("sigmoid(A %*% w, b)").unwrap();
        match &e {
            LAExpr::Call(name, args) => {
                assert_eq!(name, "sigmoid");
                assert_eq!(args.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unary_minus_and_powers() {
        let e = parse_la("-A * B").unwrap();
        assert_eq!(e.to_string(), "(0 - A) * B");
        let e = parse_la("A^2").unwrap();
        assert!(matches!(e, LAExpr::ElemPow(_, 2)));
        // ^1 folds away
        let e = parse_la("A^1").unwrap();
        assert!(matches!(e, LAExpr::Mat(_)));
        assert!(parse_la("A^0").is_err());
    }

    #[test]
    fn roundtrip_display_reparses() {
        for src in [
            "A %*% B + C * D",
            "t(A - B) %*% (C + D)",
            "sum(X * Y) - rowSums(Z)^2",
            "(A + B) * (A - B)",
            "colSums(t(X))",
        ] {
            let e = parse_la(src).unwrap();
            let printed = e.to_string();
            let e2 = parse_la(&printed).unwrap();
            assert_eq!(e, e2, "roundtrip failed for {src}: printed {printed}");
        }
    }

    #[test]
    fn errors_carry_position() {
        let err = parse_la("A + ").unwrap_err();
        match err {
            IrError::Parse { pos, .. } => assert_eq!(pos, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_la("A ** B").is_err());
        assert!(parse_la("(A + B").is_err());
    }
}
