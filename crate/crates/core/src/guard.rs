//! Boolean guards over atomic propositions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! guard   := implies
//! implies := or ("->" implies)?
//! or      := and ("|" and)*
//! and     := unary ("&" unary)*
//! unary   := "!" unary | "(" guard ")" | ident | "true" | "false"
//! ```

use std::collections::BTreeSet;
use std::fmt;

use crate::alphabet::{Alphabet, Phase, Valuation};
use crate::error::SpecError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Guard {
    Const(bool),
    Var(String),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Implies(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn var(name: impl Into<String>) -> Self {
        Guard::Var(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(g: Guard) -> Self {
        match g {
            Guard::Const(b) => Guard::Const(!b),
            g => Guard::Not(Box::new(g)),
        }
    }

    pub fn and(a: Guard, b: Guard) -> Self {
        match (a, b) {
            (Guard::Const(true), g) | (g, Guard::Const(true)) => g,
            (Guard::Const(false), _) | (_, Guard::Const(false)) => Guard::Const(false),
            (a, b) => Guard::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Guard, b: Guard) -> Self {
        match (a, b) {
            (Guard::Const(false), g) | (g, Guard::Const(false)) => g,
            (Guard::Const(true), _) | (_, Guard::Const(true)) => Guard::Const(true),
            (a, b) => Guard::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn all(gs: impl IntoIterator<Item = Guard>) -> Self {
        gs.into_iter().fold(Guard::Const(true), Guard::and)
    }

    pub fn any(gs: impl IntoIterator<Item = Guard>) -> Self {
        gs.into_iter().fold(Guard::Const(false), Guard::or)
    }

    pub fn parse(text: &str) -> Result<Guard, SpecError> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let g = p.implies()?;
        if let Some(t) = p.tokens.get(p.pos) {
            return Err(syntax(t.col, format!("unexpected `{}`", t.tok)));
        }
        Ok(g)
    }

    /// Names of all referenced propositions.
    pub fn vars(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Guard::Const(_) => {}
            Guard::Var(v) => {
                out.insert(v);
            }
            Guard::Not(g) => g.collect_vars(out),
            Guard::And(a, b) | Guard::Or(a, b) | Guard::Implies(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Evaluates the guard; `lookup` returns the value of a proposition, or
    /// `None` when the valuation does not cover it.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<bool>) -> Result<bool, SpecError> {
        Ok(match self {
            Guard::Const(b) => *b,
            Guard::Var(v) => lookup(v).ok_or_else(|| SpecError::UnknownProposition(v.clone()))?,
            Guard::Not(g) => !g.eval(lookup)?,
            Guard::And(a, b) => a.eval(lookup)? && b.eval(lookup)?,
            Guard::Or(a, b) => a.eval(lookup)? || b.eval(lookup)?,
            Guard::Implies(a, b) => !a.eval(lookup)? || b.eval(lookup)?,
        })
    }

    /// Evaluates against a full valuation of `alphabet`.
    pub fn eval_valuation(&self, alphabet: &Alphabet, v: Valuation) -> Result<bool, SpecError> {
        self.eval(&|name| alphabet.lookup(v, name))
    }

    /// Compiles the guard against the propositions of one phase.
    pub fn compile(&self, alphabet: &Alphabet, phase: Phase) -> Result<CompiledGuard, SpecError> {
        let names = alphabet.names(phase);
        Ok(CompiledGuard(self.compile_node(names)?))
    }

    fn compile_node(&self, names: &[String]) -> Result<Node, SpecError> {
        Ok(match self {
            Guard::Const(b) => Node::Const(*b),
            Guard::Var(v) => match names.iter().position(|n| n == v) {
                Some(i) => Node::Var(i as u32),
                None => return Err(SpecError::UnknownProposition(v.clone())),
            },
            Guard::Not(g) => Node::Not(Box::new(g.compile_node(names)?)),
            Guard::And(a, b) => {
                let mut items = Vec::new();
                for g in [a, b] {
                    match g.compile_node(names)? {
                        Node::And(inner) => items.extend(inner),
                        n => items.push(n),
                    }
                }
                Node::And(items)
            }
            Guard::Or(a, b) => {
                let mut items = Vec::new();
                for g in [a, b] {
                    match g.compile_node(names)? {
                        Node::Or(inner) => items.extend(inner),
                        n => items.push(n),
                    }
                }
                Node::Or(items)
            }
            Guard::Implies(a, b) => Node::Or(vec![
                Node::Not(Box::new(a.compile_node(names)?)),
                b.compile_node(names)?,
            ]),
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Guard::Implies(..) => 0,
            Guard::Or(..) => 1,
            Guard::And(..) => 2,
            Guard::Not(_) => 3,
            Guard::Const(_) | Guard::Var(_) => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Guard::Const(b) => write!(f, "{b}")?,
            Guard::Var(v) => f.write_str(v)?,
            Guard::Not(g) => {
                f.write_str("!")?;
                g.fmt_prec(f, 3)?;
            }
            // Left-associative: the right operand needs parentheses at equal
            // precedence so that printing then parsing gives back the same tree.
            Guard::And(a, b) => {
                a.fmt_prec(f, 2)?;
                f.write_str(" & ")?;
                b.fmt_prec(f, 3)?;
            }
            Guard::Or(a, b) => {
                a.fmt_prec(f, 1)?;
                f.write_str(" | ")?;
                b.fmt_prec(f, 2)?;
            }
            Guard::Implies(a, b) => {
                a.fmt_prec(f, 1)?;
                f.write_str(" -> ")?;
                b.fmt_prec(f, 0)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// A guard resolved against one phase; evaluates directly on a phase bit mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledGuard(Node);

#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    Const(bool),
    Var(u32),
    Not(Box<Node>),
    And(Vec<Node>),
    Or(Vec<Node>),
}

impl Node {
    fn eval(&self, bits: u32) -> bool {
        match self {
            Node::Const(b) => *b,
            Node::Var(i) => bits >> i & 1 == 1,
            Node::Not(n) => !n.eval(bits),
            Node::And(ns) => ns.iter().all(|n| n.eval(bits)),
            Node::Or(ns) => ns.iter().any(|n| n.eval(bits)),
        }
    }
}

impl CompiledGuard {
    pub fn eval(&self, bits: u32) -> bool {
        self.0.eval(bits)
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: String,
    col: usize,
}

fn syntax(col: usize, message: String) -> SpecError {
    SpecError::Syntax {
        line: 1,
        column: col,
        message,
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, SpecError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Token {
                tok: "->".into(),
                col,
            });
            i += 2;
        } else if matches!(c, '!' | '&' | '|' | '(' | ')') {
            out.push(Token {
                tok: c.to_string(),
                col,
            });
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: chars[start..i].iter().collect(),
                col,
            });
        } else {
            return Err(syntax(col, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(|t| t.tok.as_str())
    }

    fn end_col(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.col + t.tok.len())
    }

    fn implies(&mut self) -> Result<Guard, SpecError> {
        let lhs = self.or()?;
        if self.peek() == Some("->") {
            self.pos += 1;
            let rhs = self.implies()?;
            return Ok(Guard::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Guard, SpecError> {
        let mut g = self.and()?;
        while self.peek() == Some("|") {
            self.pos += 1;
            g = Guard::Or(Box::new(g), Box::new(self.and()?));
        }
        Ok(g)
    }

    fn and(&mut self) -> Result<Guard, SpecError> {
        let mut g = self.unary()?;
        while self.peek() == Some("&") {
            self.pos += 1;
            g = Guard::And(Box::new(g), Box::new(self.unary()?));
        }
        Ok(g)
    }

    fn unary(&mut self) -> Result<Guard, SpecError> {
        let Some(t) = self.tokens.get(self.pos).cloned() else {
            return Err(syntax(self.end_col(), "unexpected end of guard".into()));
        };
        self.pos += 1;
        match t.tok.as_str() {
            "!" => Ok(Guard::Not(Box::new(self.unary()?))),
            "(" => {
                let g = self.implies()?;
                if self.peek() != Some(")") {
                    return Err(syntax(self.end_col(), "expected `)`".into()));
                }
                self.pos += 1;
                Ok(g)
            }
            "true" => Ok(Guard::Const(true)),
            "false" => Ok(Guard::Const(false)),
            s if s.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') => {
                Ok(Guard::Var(t.tok))
            }
            _ => Err(syntax(t.col, format!("unexpected `{}`", t.tok))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval_with(g: &str, assign: &[(&str, bool)]) -> Result<bool, SpecError> {
        let g = Guard::parse(g).unwrap();
        g.eval(&|name| assign.iter().find(|(n, _)| *n == name).map(|(_, v)| *v))
    }

    #[test]
    fn conjunction_from_carriage_guard() {
        let v = [("cargo", true), ("bwdlimit", true), ("fwdlimit", false)];
        assert!(eval_with("cargo & bwdlimit", &v).unwrap());
    }

    #[test]
    fn constant_true() {
        assert!(eval_with("true", &[]).unwrap());
        assert!(eval_with("true", &[("x", false)]).unwrap());
    }

    #[test]
    fn negated_set_bit_fails() {
        let v = [("movefwd", true), ("movebwd", false)];
        assert!(!eval_with("!movefwd & !movebwd", &v).unwrap());
    }

    #[test]
    fn unknown_proposition_is_named() {
        let err = eval_with("a & zz", &[("a", true)]).unwrap_err();
        assert_eq!(err, SpecError::UnknownProposition("zz".into()));
    }

    #[test]
    fn precedence_not_and_or() {
        // ! > & > |
        let g = Guard::parse("!a & b | c").unwrap();
        let expected = Guard::Or(
            Box::new(Guard::And(
                Box::new(Guard::Not(Box::new(Guard::var("a")))),
                Box::new(Guard::var("b")),
            )),
            Box::new(Guard::var("c")),
        );
        assert_eq!(g, expected);
        assert!(eval_with("a -> b", &[("a", false), ("b", false)]).unwrap());
        assert!(!eval_with("a -> b", &[("a", true), ("b", false)]).unwrap());
    }

    #[test]
    fn syntax_errors_carry_columns() {
        match Guard::parse("a & (b | ").unwrap_err() {
            SpecError::Syntax { column, .. } => assert!(column >= 8),
            e => panic!("unexpected {e:?}"),
        }
        match Guard::parse("a $ b").unwrap_err() {
            SpecError::Syntax { column, .. } => assert_eq!(column, 3),
            e => panic!("unexpected {e:?}"),
        }
        assert!(Guard::parse("a b").is_err());
        assert!(Guard::parse("").is_err());
    }

    fn arb_guard() -> impl Strategy<Value = Guard> {
        let leaf = prop_oneof![
            any::<bool>().prop_map(Guard::Const),
            prop::sample::select(vec!["p", "q", "r"]).prop_map(Guard::var),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|g| Guard::Not(Box::new(g))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Guard::And(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Guard::Or(Box::new(a), Box::new(b))),
                (inner.clone(), inner).prop_map(|(a, b)| Guard::Implies(Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_parse_roundtrip(g in arb_guard()) {
            let text = g.to_string();
            prop_assert_eq!(Guard::parse(&text).unwrap(), g);
        }

        #[test]
        fn compiled_agrees_with_tree(g in arb_guard(), bits in 0u32..8) {
            let alphabet = Alphabet::from_names(&["p", "q", "r"], &[]).unwrap();
            let compiled = g.compile(&alphabet, Phase::Input).unwrap();
            let names = ["p", "q", "r"];
            let direct = g.eval(&|n| names.iter().position(|x| *x == n).map(|i| bits >> i & 1 == 1)).unwrap();
            prop_assert_eq!(compiled.eval(bits), direct);
        }
    }
}
