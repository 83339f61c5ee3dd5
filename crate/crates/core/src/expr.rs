//! A small arithmetic expression language for payoffs, Hamiltonians and
//! operator coefficients.
//!
//! Grammar, lowest to highest precedence:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          # right associative
//! primary := number | variable | call | '(' sum ')'
//! call    := name '(' sum (',' sum)* ')'
//! ```
//!
//! Variables are `x`, `y` (position), `z` (the value u), `p1`, `p2` (gradient
//! components) and `r` (Euclidean norm of the position). Functions are
//! `abs`, `min`, `max`, `sqrt`, `sin`, `cos`, `exp` and `log`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X,
    Y,
    Z,
    P1,
    P2,
    R,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::X, Var::Y, Var::Z, Var::P1, Var::P2, Var::R];

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
            Var::P1 => "p1",
            Var::P2 => "p2",
            Var::R => "r",
        }
    }

    fn from_name(name: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == name)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Min,
    Max,
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    const ALL: [Func; 8] = [
        Func::Abs,
        Func::Min,
        Func::Max,
        Func::Sqrt,
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Fully parenthesized form; reparses to a tree that evaluates identically.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(-{:?})", -v)
            }
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier '{name}' at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("function '{name}' at position {pos} takes {expected} argument(s), got {found}")]
    Arity {
        name: &'static str,
        pos: usize,
        expected: usize,
        found: usize,
    },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { pos, .. }
            | ParseError::UnknownIdentifier { pos, .. }
            | ParseError::Arity { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no value bound for variable '{0}'")]
    MissingBinding(Var),
    #[error("non-finite result in {op}")]
    NonFinite { op: &'static str },
}

/// Values for the expression variables. Unset variables are reported as
/// [`EvalError::MissingBinding`] when an expression reads them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings {
    slots: [Option<f64>; 6],
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.slots[var.slot()] = Some(value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.slots[var.slot()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.slots[var.slot()]
    }

    /// Binds `x`, `r` and, in two dimensions, `y`.
    pub fn at_point(point: [f64; 2], dim: usize) -> Self {
        let mut b = Bindings::new().with(Var::X, point[0]);
        if dim >= 2 {
            b.set(Var::Y, point[1]);
            b.set(Var::R, point[0].hypot(point[1]));
        } else {
            b.set(Var::R, point[0].abs());
        }
        b
    }

    /// Point bindings plus the state `z` and gradient `p`.
    pub fn at_state(point: [f64; 2], dim: usize, z: f64, p: [f64; 2]) -> Self {
        let mut b = Bindings::at_point(point, dim).with(Var::Z, z).with(Var::P1, p[0]);
        if dim >= 2 {
            b.set(Var::P2, p[1]);
        }
        b
    }
}

impl Expr {
    pub fn eval(&self, env: &Bindings) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(var) => env.get(*var).ok_or(EvalError::MissingBinding(*var))?,
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Bin(op, a, b) => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                match op {
                    BinOp::Add => finite(a + b, "addition")?,
                    BinOp::Sub => finite(a - b, "subtraction")?,
                    BinOp::Mul => finite(a * b, "multiplication")?,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::NonFinite { op: "division" });
                        }
                        finite(a / b, "division")?
                    }
                    BinOp::Pow => finite(a.powf(b), "power")?,
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(env)?;
                match func {
                    Func::Abs => a.abs(),
                    Func::Min => a.min(args[1].eval(env)?),
                    Func::Max => a.max(args[1].eval(env)?),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::NonFinite { op: "sqrt" });
                        }
                        a.sqrt()
                    }
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => finite(a.exp(), "exp")?,
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(EvalError::NonFinite { op: "log" });
                        }
                        a.ln()
                    }
                }
            }
        };
        Ok(v)
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Number of `Bin(Pow, ..)` nodes.
    pub fn power_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 0,
            Expr::Neg(e) => e.power_count(),
            Expr::Bin(op, a, b) => {
                usize::from(*op == BinOp::Pow) + a.power_count() + b.power_count()
            }
            Expr::Call(_, args) => args.iter().map(Expr::power_count).sum(),
        }
    }
}

fn finite(v: f64, op: &'static str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { op })
    }
}

/// A parsed expression together with its source text and variable set.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    source: String,
    expr: Expr,
    vars: BTreeSet<Var>,
}

impl FunctionSpec {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let expr = Parser::new(source).parse_all()?;
        Ok(Self::from_expr(source.to_string(), expr))
    }

    pub fn constant(value: f64) -> Self {
        Self::from_expr(format!("{value:?}"), Expr::Num(value))
    }

    fn from_expr(source: String, expr: Expr) -> Self {
        let mut vars = BTreeSet::new();
        expr.collect_vars(&mut vars);
        Self { source, expr, vars }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn vars(&self) -> &BTreeSet<Var> {
        &self.vars
    }

    pub fn uses(&self, var: Var) -> bool {
        self.vars.contains(&var)
    }

    /// Spatial dimension the expression needs: 2 if it reads `y` or `p2`.
    pub fn spatial_arity(&self) -> usize {
        if self.uses(Var::Y) || self.uses(Var::P2) {
            2
        } else {
            1
        }
    }

    pub fn is_constant(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn eval(&self, env: &Bindings) -> Result<f64, EvalError> {
        self.expr.eval(env)
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for FunctionSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    cursor: usize,
    lex_error: Option<ParseError>,
}

impl Parser {
    fn new(src: &str) -> Self {
        match lex(src) {
            Ok(tokens) => Self {
                tokens,
                cursor: 0,
                lex_error: None,
            },
            Err(e) => Self {
                tokens: Vec::new(),
                cursor: 0,
                lex_error: Some(e),
            },
        }
    }

    fn parse_all(mut self) -> Result<Expr, ParseError> {
        if let Some(e) = self.lex_error.take() {
            return Err(e);
        }
        let e = self.sum()?;
        match self.peek() {
            (Token::End, _) => Ok(e),
            (tok, pos) => Err(ParseError::Syntax {
                pos: *pos,
                message: format!("unexpected {}", describe(tok)),
            }),
        }
    }

    fn peek(&self) -> &(Token, usize) {
        &self.tokens[self.cursor]
    }

    fn bump(&mut self) -> (Token, usize) {
        let t = self.tokens[self.cursor].clone();
        if self.cursor + 1 < self.tokens.len() {
            self.cursor += 1;
        }
        t
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek().0 {
                Token::Op('+') => BinOp::Add,
                Token::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().0 {
                Token::Op('*') => BinOp::Mul,
                Token::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().0 == Token::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().0 == Token::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (tok, pos) = self.bump();
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::LParen => {
                let e = self.sum()?;
                self.expect(Token::RParen, "')'")?;
                Ok(e)
            }
            Token::Ident(name) => {
                if let Some(var) = Var::from_name(&name) {
                    return Ok(Expr::Var(var));
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError::UnknownIdentifier { name, pos });
                };
                self.expect(Token::LParen, "'(' after function name")?;
                let mut args = vec![self.sum()?];
                while self.peek().0 == Token::Comma {
                    self.bump();
                    args.push(self.sum()?);
                }
                self.expect(Token::RParen, "')'")?;
                if args.len() != func.arity() {
                    return Err(ParseError::Arity {
                        name: func.name(),
                        pos,
                        expected: func.arity(),
                        found: args.len(),
                    });
                }
                Ok(Expr::Call(func, args))
            }
            other => Err(ParseError::Syntax {
                pos,
                message: format!("unexpected {}", describe(&other)),
            }),
        }
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), ParseError> {
        let (tok, pos) = self.peek().clone();
        if tok == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::Syntax {
                pos,
                message: format!("expected {what}, found {}", describe(&tok)),
            })
        }
    }
}

fn describe(tok: &Token) -> String {
    match tok {
        Token::Num(v) => format!("number {v}"),
        Token::Ident(s) => format!("'{s}'"),
        Token::Op(c) => format!("'{c}'"),
        Token::LParen => "'('".into(),
        Token::RParen => "')'".into(),
        Token::Comma => "','".into(),
        Token::End => "end of input".into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                pos: start,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((Token::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Token::Ident(chars[start..i].iter().collect()), start));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Token::Op(c),
            '(' => Token::LParen,
            ')' => Token::RParen,
            ',' => Token::Comma,
            _ => {
                return Err(ParseError::Syntax {
                    pos: start,
                    message: format!("unexpected character '{c}'"),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Token::End, chars.len()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_at(src: &str, env: Bindings) -> Result<f64, EvalError> {
        FunctionSpec::parse(src).unwrap().eval(&env)
    }

    fn x(v: f64) -> Bindings {
        Bindings::new().with(Var::X, v)
    }

    #[test]
    fn aronsson_example_has_two_powers() {
        let f = FunctionSpec::parse("x^(4/3) - y^(4/3)").unwrap();
        assert_eq!(f.expr().power_count(), 2);
        assert_eq!(f.spatial_arity(), 2);
        let at = Bindings::new().with(Var::X, 1.0).with(Var::Y, 1.0);
        assert_eq!(f.eval(&at).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_value() {
        assert_eq!(eval_at("2*x - x^2", x(0.5)).unwrap(), 0.75);
    }

    #[test]
    fn malformed_input_reports_the_operator() {
        let err = FunctionSpec::parse("x + * 2").unwrap_err();
        assert_eq!(err.position(), 4);
        assert!(matches!(err, ParseError::Syntax { .. }));
        assert!(err.to_string().contains("'*'"));
    }

    #[test]
    fn unknown_identifier_is_named() {
        let err = FunctionSpec::parse("2*w + 1").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "w".into(),
                pos: 2
            }
        );
    }

    #[test]
    fn function_arity_is_checked() {
        assert!(matches!(
            FunctionSpec::parse("min(x)"),
            Err(ParseError::Arity { expected: 2, found: 1, .. })
        ));
        assert!(FunctionSpec::parse("sqrt(x, 1)").is_err());
    }

    #[test]
    fn builtins() {
        assert_eq!(eval_at("abs(x)", x(-2.0)).unwrap(), 2.0);
        let env = Bindings::new().with(Var::X, 3.0).with(Var::Y, -1.0);
        assert_eq!(eval_at("min(x, y)", env).unwrap(), -1.0);
        assert_eq!(eval_at("max(x, y)", env).unwrap(), 3.0);
        assert_eq!(eval_at("sqrt(x)", x(9.0)).unwrap(), 3.0);
        assert_eq!(eval_at("exp(0) + log(1) + cos(0) + sin(0)", x(0.0)).unwrap(), 2.0);
    }

    #[test]
    fn non_finite_operations_are_named() {
        assert_eq!(
            eval_at("1/x", x(0.0)),
            Err(EvalError::NonFinite { op: "division" })
        );
        assert_eq!(
            eval_at("log(x)", x(-1.0)),
            Err(EvalError::NonFinite { op: "log" })
        );
        assert_eq!(
            eval_at("sqrt(x)", x(-1.0)),
            Err(EvalError::NonFinite { op: "sqrt" })
        );
        assert_eq!(
            eval_at("x^0.5", x(-1.0)),
            Err(EvalError::NonFinite { op: "power" })
        );
    }

    #[test]
    fn missing_binding() {
        assert_eq!(
            eval_at("x + p1", x(1.0)),
            Err(EvalError::MissingBinding(Var::P1))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let env = Bindings::new();
        assert_eq!(eval_at("2+3*4", env).unwrap(), 14.0);
        assert_eq!(eval_at("2^3^2", env).unwrap(), 512.0);
        assert_eq!(eval_at("-2^2", env).unwrap(), -4.0);
        assert_eq!(eval_at("2^-1", env).unwrap(), 0.5);
        assert_eq!(eval_at("8/4/2", env).unwrap(), 1.0);
        assert_eq!(eval_at("1-2-3", env).unwrap(), -4.0);
        assert_eq!(eval_at("-(1+2)*3", env).unwrap(), -9.0);
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(eval_at("1e-3 + 2.5E2", Bindings::new()).unwrap(), 250.001);
        assert_eq!(eval_at(".5", Bindings::new()).unwrap(), 0.5);
    }

    #[test]
    fn variable_set_and_point_bindings() {
        let f = FunctionSpec::parse("r + z*p1").unwrap();
        let names: Vec<_> = f.vars().iter().map(|v| v.name()).collect();
        assert_eq!(names, ["z", "p1", "r"]);
        let b = Bindings::at_state([3.0, 4.0], 2, 2.0, [0.5, 0.0]);
        assert_eq!(f.eval(&b).unwrap(), 6.0);
    }

    #[test]
    fn printing_is_reparsable() {
        let f = FunctionSpec::parse("-x^2 + min(3, y) / (1 - 2e-7)").unwrap();
        let printed = f.expr().to_string();
        let g = FunctionSpec::parse(&printed).unwrap();
        assert_eq!(f.expr(), g.expr());
    }
}
