use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::exact::Q;

/// A (max,+) expression over exact rationals.
///
/// `Max` and `Sum` always carry at least two children.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TropicalExpr {
    Const(Q),
    Var(usize),
    Max(Vec<TropicalExpr>),
    Sum(Vec<TropicalExpr>),
    Neg(Box<TropicalExpr>),
}

/// Names used when parsing and printing variables.
///
/// Index forms `v0`, `v1`, ... are always understood in addition to the
/// configured names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarNames {
    names: Vec<String>,
}

const LETTERS: [&str; 4] = ["x", "y", "z", "w"];

impl VarNames {
    /// `x, y, z, w` for arity up to four, `v0..` beyond.
    pub fn default_for(arity: usize) -> Self {
        let names = if arity <= LETTERS.len() {
            LETTERS[..arity].iter().map(|s| s.to_string()).collect()
        } else {
            (0..arity).map(|i| format!("v{i}")).collect()
        };
        VarNames { names }
    }

    pub fn custom<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().trim().to_string()).collect();
        for (i, n) in names.iter().enumerate() {
            let valid = n.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid || n == "max" {
                return Err(Error::InvalidArgument(format!("invalid variable name {n:?}")));
            }
            if names[..i].contains(n) {
                return Err(Error::InvalidArgument(format!("duplicate variable name {n:?}")));
            }
        }
        Ok(VarNames { names })
    }

    pub fn arity(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, index: usize) -> String {
        self.names.get(index).cloned().unwrap_or_else(|| format!("v{index}"))
    }

    fn resolve(&self, ident: &str) -> Option<usize> {
        if let Some(i) = self.names.iter().position(|n| n == ident) {
            return Some(i);
        }
        if let Some(rest) = ident.strip_prefix('v') {
            if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                return rest.parse().ok();
            }
        }
        if self.names.len() <= LETTERS.len() && self.names.iter().zip(LETTERS).all(|(a, b)| a == b) {
            return LETTERS.iter().position(|l| *l == ident);
        }
        None
    }
}

impl TropicalExpr {
    pub fn constant(v: Q) -> Self {
        TropicalExpr::Const(v)
    }

    pub fn var(i: usize) -> Self {
        TropicalExpr::Var(i)
    }

    pub fn max(children: Vec<TropicalExpr>) -> Result<Self> {
        if children.len() < 2 {
            return Err(Error::InvalidArgument("max needs at least two children".into()));
        }
        Ok(TropicalExpr::Max(children))
    }

    pub fn sum(children: Vec<TropicalExpr>) -> Result<Self> {
        if children.len() < 2 {
            return Err(Error::InvalidArgument("sum needs at least two children".into()));
        }
        Ok(TropicalExpr::Sum(children))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(child: TropicalExpr) -> Self {
        TropicalExpr::Neg(Box::new(child))
    }

    /// Parses with the default variable names for `arity`.
    pub fn parse(text: &str, arity: usize) -> Result<Self> {
        Self::parse_with(text, &VarNames::default_for(arity))
    }

    pub fn parse_with(text: &str, names: &VarNames) -> Result<Self> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
            names,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.unexpected());
        }
        e.check_arity(names.arity())?;
        Ok(e)
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            TropicalExpr::Const(_) => None,
            TropicalExpr::Var(i) => Some(*i),
            TropicalExpr::Max(cs) | TropicalExpr::Sum(cs) => cs.iter().filter_map(|c| c.max_var()).max(),
            TropicalExpr::Neg(c) => c.max_var(),
        }
    }

    pub fn check_arity(&self, arity: usize) -> Result<()> {
        match self.max_var() {
            Some(i) if i >= arity => Err(Error::VariableOutOfRange { index: i, arity }),
            _ => Ok(()),
        }
    }

    /// Exact evaluation; `point` supplies one coordinate per variable.
    pub fn eval(&self, point: &[Q]) -> Result<Q> {
        if let Some(i) = self.max_var() {
            if i >= point.len() {
                return Err(Error::DimensionMismatch {
                    expected: i + 1,
                    actual: point.len(),
                });
            }
        }
        Ok(self.eval_unchecked(point))
    }

    fn eval_unchecked(&self, point: &[Q]) -> Q {
        match self {
            TropicalExpr::Const(c) => c.clone(),
            TropicalExpr::Var(i) => point[*i].clone(),
            TropicalExpr::Max(cs) => cs
                .iter()
                .map(|c| c.eval_unchecked(point))
                .max()
                .expect("max has children"),
            TropicalExpr::Sum(cs) => cs.iter().map(|c| c.eval_unchecked(point)).sum(),
            TropicalExpr::Neg(c) => -c.eval_unchecked(point),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            TropicalExpr::Const(_) | TropicalExpr::Var(_) => 1,
            TropicalExpr::Max(cs) | TropicalExpr::Sum(cs) => 1 + cs.iter().map(|c| c.size()).sum::<usize>(),
            TropicalExpr::Neg(c) => 1 + c.size(),
        }
    }

    /// Renders in the parser's grammar; `parse_with(to_text(names), names)`
    /// reproduces the same tree.
    pub fn to_text(&self, names: &VarNames) -> String {
        let mut out = String::new();
        write_expr(self, names, &mut out);
        out
    }
}

impl fmt::Display for TropicalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arity = self.max_var().map_or(0, |i| i + 1);
        f.write_str(&self.to_text(&VarNames::default_for(arity)))
    }
}

fn write_literal(v: &Q, out: &mut String) {
    out.push_str(&v.to_string());
}

fn write_expr(e: &TropicalExpr, names: &VarNames, out: &mut String) {
    match e {
        TropicalExpr::Sum(cs) => {
            for (i, c) in cs.iter().enumerate() {
                if i == 0 {
                    write_unary(c, names, out);
                } else if let TropicalExpr::Neg(inner) = c {
                    out.push_str(" - ");
                    write_unary(inner, names, out);
                } else {
                    out.push_str(" + ");
                    write_unary(c, names, out);
                }
            }
        }
        _ => write_unary(e, names, out),
    }
}

fn write_unary(e: &TropicalExpr, names: &VarNames, out: &mut String) {
    match e {
        TropicalExpr::Const(v) => write_literal(v, out),
        TropicalExpr::Var(i) => out.push_str(&names.name(*i)),
        TropicalExpr::Max(cs) => {
            out.push_str("max(");
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(c, names, out);
            }
            out.push(')');
        }
        TropicalExpr::Neg(inner) => {
            out.push('-');
            match inner.as_ref() {
                // "-3" would read back as a negative literal
                TropicalExpr::Const(v) if !v.is_negative() => {
                    out.push('(');
                    write_literal(v, out);
                    out.push(')');
                }
                other => write_unary(other, names, out),
            }
        }
        TropicalExpr::Sum(_) => {
            out.push('(');
            write_expr(e, names, out);
            out.push(')');
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    names: &'a VarNames,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn unexpected(&mut self) -> Error {
        match self.peek() {
            Some(c) => Error::syntax(self.pos, format!("unexpected character {:?}", c as char)),
            None => Error::syntax(self.pos, "unexpected end of input"),
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(match self.peek() {
                Some(found) => Error::syntax(self.pos, format!("expected {:?}, found {:?}", c as char, found as char)),
                None => Error::syntax(self.pos, format!("expected {:?}, found end of input", c as char)),
            })
        }
    }

    fn expr(&mut self) -> Result<TropicalExpr> {
        let mut items = vec![self.unary()?];
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    items.push(self.unary()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    items.push(TropicalExpr::neg(self.unary()?));
                }
                _ => break,
            }
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            TropicalExpr::Sum(items)
        })
    }

    fn unary(&mut self) -> Result<TropicalExpr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                let v = self.rational()?;
                return Ok(TropicalExpr::Const(-v));
            }
            return Ok(TropicalExpr::neg(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<TropicalExpr> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => Ok(TropicalExpr::Const(self.rational()?)),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let ident = self.ident();
                if ident == "max" {
                    return self.max_call(start);
                }
                let index = self
                    .names
                    .resolve(&ident)
                    .ok_or_else(|| Error::syntax(start, format!("unknown variable {ident:?}")))?;
                if index >= self.names.arity() {
                    return Err(Error::VariableOutOfRange {
                        index,
                        arity: self.names.arity(),
                    });
                }
                self.reject_scaling()?;
                Ok(TropicalExpr::Var(index))
            }
            _ => Err(self.unexpected()),
        }
    }

    fn max_call(&mut self, start: usize) -> Result<TropicalExpr> {
        self.expect(b'(')?;
        let mut children = vec![self.expr()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            children.push(self.expr()?);
        }
        if children.len() < 2 {
            return Err(Error::syntax(start, "max needs at least two arguments"));
        }
        self.expect(b')')?;
        self.reject_scaling()?;
        Ok(TropicalExpr::Max(children))
    }

    /// Variables and max-terms cannot be divided or multiplied: monomial
    /// exponents stay integral.
    fn reject_scaling(&mut self) -> Result<()> {
        match self.peek() {
            Some(b'/') => Err(Error::syntax(
                self.pos,
                "rational exponents are not supported: variables may only be added, subtracted and maximized",
            )),
            Some(b'*') => Err(Error::syntax(
                self.pos,
                "multiplication is not part of the grammar; write repeated sums instead",
            )),
            _ => Ok(()),
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn digits(&mut self) -> Result<BigInt> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.unexpected());
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        Ok(s.parse().expect("digit string"))
    }

    fn rational(&mut self) -> Result<Q> {
        self.skip_ws();
        let num = self.digits()?;
        if self.src.get(self.pos).is_some_and(|c| c.is_ascii_alphabetic()) {
            return Err(Error::syntax(
                self.pos,
                "implicit multiplication is not part of the grammar",
            ));
        }
        if self.peek() == Some(b'/') {
            self.pos += 1;
            self.skip_ws();
            let den_pos = self.pos;
            if !self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                return Err(Error::syntax(den_pos, "denominator must be a positive integer literal"));
            }
            let den = self.digits()?;
            if den.is_zero() {
                return Err(Error::syntax(den_pos, "zero denominator"));
            }
            return Ok(Q::new(num, den));
        }
        Ok(Q::from_integer(num))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{frac, q};
    use TropicalExpr::*;

    fn lyness() -> TropicalExpr {
        TropicalExpr::parse("max(max(0,y)-x, -x)", 2).unwrap()
    }

    #[test]
    fn parses_lyness_tree() {
        let expected = Max(vec![
            Sum(vec![Max(vec![Const(q(0)), Var(1)]), TropicalExpr::neg(Var(0))]),
            TropicalExpr::neg(Var(0)),
        ]);
        assert_eq!(lyness(), expected);
    }

    #[test]
    fn parses_identity() {
        assert_eq!(TropicalExpr::parse("x", 1).unwrap(), Var(0));
        assert_eq!(TropicalExpr::parse("v3", 4).unwrap(), Var(3));
    }

    #[test]
    fn max_needs_two_arguments() {
        let err = TropicalExpr::parse("max(0)", 1).unwrap_err();
        assert!(matches!(err, Error::Syntax { .. }), "{err:?}");
    }

    #[test]
    fn rejects_out_of_range_and_unknown_variables() {
        assert_eq!(
            TropicalExpr::parse("x + z", 2).unwrap_err(),
            Error::VariableOutOfRange { index: 2, arity: 2 }
        );
        assert!(matches!(
            TropicalExpr::parse("foo", 2).unwrap_err(),
            Error::Syntax { .. }
        ));
    }

    #[test]
    fn rejects_rational_exponents_and_products() {
        for bad in ["x/2", "max(x,0)/3", "2*x", "2x", "1/0", "1/", "(x", "x y", ""] {
            assert!(TropicalExpr::parse(bad, 2).is_err(), "{bad}");
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        match TropicalExpr::parse("max(x, )", 1).unwrap_err() {
            Error::Syntax { position, .. } => assert_eq!(position, 7),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn negative_literals_and_binary_minus() {
        assert_eq!(TropicalExpr::parse("-3/2", 0).unwrap(), Const(frac(-3, 2)));
        assert_eq!(
            TropicalExpr::parse("x - 3", 1).unwrap(),
            Sum(vec![Var(0), TropicalExpr::neg(Const(q(3)))])
        );
        assert_eq!(TropicalExpr::parse("-(3)", 0).unwrap(), TropicalExpr::neg(Const(q(3))));
    }

    #[test]
    fn custom_names() {
        let names = VarNames::custom(&["V1", "V2", "V3", "V4"]).unwrap();
        let e = TropicalExpr::parse_with("V1 + max(0, V2 + V3)", &names).unwrap();
        assert_eq!(e.max_var(), Some(2));
        assert_eq!(e.to_text(&names), "V1 + max(0, V2 + V3)");
        assert!(VarNames::custom(&["a", "a"]).is_err());
        assert!(VarNames::custom(&["max"]).is_err());
    }

    #[test]
    fn evaluates_lyness() {
        let e = lyness();
        assert_eq!(e.eval(&[q(1), q(2)]).unwrap(), q(1));
        assert_eq!(e.eval(&[q(0), q(0)]).unwrap(), q(0));
        assert_eq!(
            e.eval(&[q(1)]).unwrap_err(),
            Error::DimensionMismatch { expected: 2, actual: 1 }
        );
    }

    #[test]
    fn identity_returns_coordinate() {
        let v = frac(-22, 7);
        assert_eq!(Var(0).eval(std::slice::from_ref(&v)).unwrap(), v);
    }

    #[test]
    fn printer_round_trips_tricky_signs() {
        let names = VarNames::default_for(2);
        let cases = vec![
            Const(q(-3)),
            TropicalExpr::neg(Const(q(3))),
            TropicalExpr::neg(Const(q(-3))),
            Sum(vec![Var(0), Const(q(-3))]),
            Sum(vec![TropicalExpr::neg(Const(q(0))), Sum(vec![Var(1), Var(0)])]),
            TropicalExpr::neg(TropicalExpr::neg(Var(1))),
            Sum(vec![Var(0), TropicalExpr::neg(TropicalExpr::neg(Var(1)))]),
            lyness(),
        ];
        for e in cases {
            let text = e.to_text(&names);
            assert_eq!(TropicalExpr::parse_with(&text, &names).unwrap(), e, "{text}");
        }
    }
}
