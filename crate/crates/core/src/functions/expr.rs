//! Expression language for scalar fields on n×p matrices.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := base ("^" integer)?
//! base   := number | "u[" int "," int "]" | func "(" expr ")" | "(" expr ")" | "-" base
//! func   := "sin" | "cos" | "exp" | "log" | "sqrt"
//! ```
//!
//! Whitespace (including newlines) is insignificant. Variables are 1-based:
//! `u[i,j]` is the entry in row i, column j. Note that `-` binds tighter
//! than `^`, so `-u[1,1]^2` is (−u₁₁)².

use std::fmt;

use nalgebra::DMatrix;

use super::dual::{HyperDual, Real};
use super::{check_shape, ScalarField};
use crate::error::{Error, Result};

/// Nesting limit for parenthesized/unary constructs.
const MAX_DEPTH: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Entry u[row, col], 1-based.
    Var {
        row: usize,
        col: usize,
    },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Integer power.
    Pow(Box<Expr>, i32),
    Sum(Vec<Expr>),
}

impl Expr {
    pub fn var(row: usize, col: usize) -> Self {
        Expr::Var { row, col }
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Self {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn pow(e: Expr, k: i32) -> Self {
        Expr::Pow(Box::new(e), k)
    }

    /// Largest (row, col) referenced.
    pub fn max_indices(&self) -> (usize, usize) {
        match self {
            Expr::Const(_) => (0, 0),
            Expr::Var { row, col } => (*row, *col),
            Expr::Unary(_, e) | Expr::Pow(e, _) => e.max_indices(),
            Expr::Binary(_, a, b) => {
                let (ra, ca) = a.max_indices();
                let (rb, cb) = b.max_indices();
                (ra.max(rb), ca.max(cb))
            }
            Expr::Sum(items) => items
                .iter()
                .map(Expr::max_indices)
                .fold((0, 0), |(r, c), (ri, ci)| (r.max(ri), c.max(ci))),
        }
    }

    /// Evaluates with variable values supplied by `var(row, col)` (1-based).
    /// Domain violations are reported with the offending subexpression.
    pub fn eval<T: Real>(&self, var: &dyn Fn(usize, usize) -> T) -> Result<T> {
        let out = match self {
            Expr::Const(c) => T::constant(*c),
            Expr::Var { row, col } => var(*row, *col),
            Expr::Unary(op, e) => {
                let x = e.eval(var)?;
                match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Log => {
                        if x.re() <= 0.0 {
                            return Err(self.domain(format!("log of non-positive value {}", x.re())));
                        }
                        x.ln()
                    }
                    UnaryOp::Sqrt => {
                        if x.re() < 0.0 || (x.re() == 0.0 && x.carries_derivative()) {
                            return Err(self.domain(format!("sqrt undefined or not differentiable at {}", x.re())));
                        }
                        x.sqrt()
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval(var)?;
                let y = b.eval(var)?;
                match op {
                    BinaryOp::Add => x + y,
                    BinaryOp::Sub => x - y,
                    BinaryOp::Mul => x * y,
                    BinaryOp::Div => {
                        if y.re() == 0.0 {
                            return Err(self.domain("division by zero".into()));
                        }
                        x / y
                    }
                }
            }
            Expr::Pow(e, k) => {
                let x = e.eval(var)?;
                if *k < 0 && x.re() == 0.0 {
                    return Err(self.domain(format!("zero raised to negative power {k}")));
                }
                x.powi(*k)
            }
            Expr::Sum(items) => {
                let mut acc = T::constant(0.0);
                for item in items {
                    acc = acc + item.eval(var)?;
                }
                acc
            }
        };
        if !out.is_finite() {
            return Err(self.domain("non-finite result".into()));
        }
        Ok(out)
    }

    fn domain(&self, message: String) -> Error {
        Error::Domain {
            node: self.to_string(),
            message,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Sum(_) | Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Expr::Binary(..) => 2,
            Expr::Pow(..) => 3,
            Expr::Unary(UnaryOp::Neg, _) => 4,
            Expr::Const(c) if *c < 0.0 => 4,
            _ => 5,
        }
    }

    fn fmt_child(&self, child: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if child.precedence() < min_prec {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

/// Prints in the input grammar; the output re-parses to the same value.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 => write!(f, "-{}", -c),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var { row, col } => write!(f, "u[{row},{col}]"),
            Expr::Unary(UnaryOp::Neg, e) => {
                f.write_str("-")?;
                self.fmt_child(e, 5, f)
            }
            Expr::Unary(op, e) => write!(f, "{}({e})", op.name()),
            Expr::Binary(op, a, b) => {
                let (sym, rhs_prec) = match op {
                    BinaryOp::Add => (" + ", 2),
                    BinaryOp::Sub => (" - ", 2),
                    BinaryOp::Mul => ("*", 3),
                    BinaryOp::Div => ("/", 3),
                };
                self.fmt_child(a, rhs_prec - 1, f)?;
                f.write_str(sym)?;
                self.fmt_child(b, rhs_prec, f)
            }
            Expr::Pow(e, k) => {
                self.fmt_child(e, 4, f)?;
                write!(f, "^{k}")
            }
            Expr::Sum(items) => {
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Expr::Unary(UnaryOp::Neg, inner) if i > 0 => {
                            f.write_str(" - ")?;
                            self.fmt_child(inner, 2, f)?;
                        }
                        _ => {
                            if i > 0 {
                                f.write_str(" + ")?;
                            }
                            self.fmt_child(item, 2, f)?;
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num { value: f64, integer: Option<u64> },
    Ident(String),
    Sym(char),
    End,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            let mut is_int = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                is_int = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_int = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| Error::Syntax {
                line: tl,
                column: tc,
                message: format!("invalid number {text:?}"),
            })?;
            let integer = if is_int { text.parse::<u64>().ok() } else { None };
            out.push(Spanned {
                tok: Tok::Num { value, integer },
                line: tl,
                column: tc,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Spanned {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
        } else if "+-*/^()[],".contains(c) {
            i += 1;
            out.push(Spanned {
                tok: Tok::Sym(c),
                line: tl,
                column: tc,
            });
        } else {
            return Err(Error::Syntax {
                line: tl,
                column: tc,
                message: format!("unexpected character {c:?}"),
            });
        }
        column += i - start;
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    depth: usize,
    shape: (usize, usize),
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(t: &Spanned, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Num { value, .. } => format!("number {value}"),
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Sym(c) => format!("{c:?}"),
            Tok::End => "end of input".into(),
        }
    }

    fn is_sym(&self, c: char) -> bool {
        self.peek().tok == Tok::Sym(c)
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        let t = self.bump();
        if t.tok == Tok::Sym(c) {
            Ok(())
        } else {
            Err(Self::error_at(
                &t,
                format!("expected {c:?}, found {}", Self::describe(&t.tok)),
            ))
        }
    }

    fn expect_int(&mut self, what: &str) -> Result<(u64, Spanned)> {
        let t = self.bump();
        match t.tok {
            Tok::Num { integer: Some(k), .. } => Ok((k, t)),
            _ => Err(Self::error_at(
                &t,
                format!("expected integer {what}, found {}", Self::describe(&t.tok)),
            )),
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(Self::error_at(self.peek(), "expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut terms = vec![self.term()?];
        while self.is_sym('+') || self.is_sym('-') {
            let negate = self.bump().tok == Tok::Sym('-');
            let t = self.term()?;
            terms.push(if negate { Expr::unary(UnaryOp::Neg, t) } else { t });
        }
        self.depth -= 1;
        Ok(if terms.len() == 1 {
            terms.pop().expect("one term")
        } else {
            Expr::Sum(terms)
        })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        while self.is_sym('*') || self.is_sym('/') {
            let op = if self.bump().tok == Tok::Sym('*') {
                BinaryOp::Mul
            } else {
                BinaryOp::Div
            };
            acc = Expr::binary(op, acc, self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if !self.is_sym('^') {
            return Ok(base);
        }
        self.bump();
        let negative = if self.is_sym('-') {
            self.bump();
            true
        } else {
            false
        };
        let (k, t) = self.expect_int("exponent")?;
        let k = i32::try_from(k).map_err(|_| Self::error_at(&t, format!("exponent {k} too large")))?;
        Ok(Expr::pow(base, if negative { -k } else { k }))
    }

    fn base(&mut self) -> Result<Expr> {
        self.enter()?;
        let t = self.bump();
        let out = match &t.tok {
            Tok::Num { value, .. } => Expr::Const(*value),
            Tok::Sym('-') => Expr::unary(UnaryOp::Neg, self.base()?),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                e
            }
            Tok::Ident(name) if name == "u" => {
                self.expect_sym('[')?;
                let (row, rt) = self.expect_int("row index")?;
                self.expect_sym(',')?;
                let (col, ct) = self.expect_int("column index")?;
                self.expect_sym(']')?;
                let (n, p) = self.shape;
                if row == 0 || row as usize > n {
                    return Err(Error::IndexOutOfRange(format!(
                        "row index {row} at line {}, column {} outside 1..={n}",
                        rt.line, rt.column
                    )));
                }
                if col == 0 || col as usize > p {
                    return Err(Error::IndexOutOfRange(format!(
                        "column index {col} at line {}, column {} outside 1..={p}",
                        ct.line, ct.column
                    )));
                }
                Expr::var(row as usize, col as usize)
            }
            Tok::Ident(name) => {
                let op =
                    UnaryOp::from_name(name).ok_or_else(|| Self::error_at(&t, format!("unknown function {name:?}")))?;
                self.expect_sym('(')?;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Expr::unary(op, e)
            }
            other => {
                return Err(Self::error_at(
                    &t,
                    format!(
                        "expected a number, variable, function or '(', found {}",
                        Self::describe(other)
                    ),
                ))
            }
        };
        self.depth -= 1;
        Ok(out)
    }
}

/// Parses `source` for fields on n×p matrices; indices outside the shape are rejected.
pub fn parse_expression(source: &str, n: usize, p: usize) -> Result<Expr> {
    let mut parser = Parser {
        toks: tokenize(source)?,
        pos: 0,
        depth: 0,
        shape: (n, p),
    };
    let e = parser.expr()?;
    let t = parser.peek();
    if t.tok != Tok::End {
        return Err(Parser::error_at(
            t,
            format!("unexpected {} after expression", Parser::describe(&t.tok)),
        ));
    }
    Ok(e)
}

/// A scalar field defined by a parsed expression, differentiated with
/// hyper-dual numbers.
#[derive(Clone, Debug)]
pub struct ExpressionField {
    expr: Expr,
    n: usize,
    p: usize,
}

impl ExpressionField {
    pub fn parse(source: &str, n: usize, p: usize) -> Result<Self> {
        Ok(Self {
            expr: parse_expression(source, n, p)?,
            n,
            p,
        })
    }

    /// Wraps an existing tree after checking its indices against (n, p).
    pub fn from_expr(expr: Expr, n: usize, p: usize) -> Result<Self> {
        let (r, c) = expr.max_indices();
        if r > n || c > p {
            return Err(Error::IndexOutOfRange(format!(
                "expression references u[{r},{c}] beyond {n}x{p}"
            )));
        }
        Ok(Self { expr, n, p })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Evaluates with ε₁ seeded on vec-index `k` and ε₂ on `l` (0-based,
    /// column-major), if given.
    fn eval_seeded(&self, u: &DMatrix<f64>, k: Option<usize>, l: Option<usize>) -> Result<HyperDual> {
        let n = self.n;
        let var = |row: usize, col: usize| {
            let idx = (col - 1) * n + (row - 1);
            HyperDual::variable(u[(row - 1, col - 1)], k == Some(idx), l == Some(idx))
        };
        self.expr.eval(&var)
    }
}

impl ScalarField for ExpressionField {
    fn shape(&self) -> (usize, usize) {
        (self.n, self.p)
    }

    fn value(&self, u: &DMatrix<f64>) -> Result<f64> {
        check_shape(self, u)?;
        self.expr.eval(&|r: usize, c: usize| u[(r - 1, c - 1)])
    }

    fn gradient(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_shape(self, u)?;
        let mut g = DMatrix::zeros(self.n, self.p);
        for k in 0..self.n * self.p {
            g[k] = self.eval_seeded(u, Some(k), None)?.e1;
        }
        Ok(g)
    }

    fn hessian(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_shape(self, u)?;
        let m = self.n * self.p;
        let mut h = DMatrix::zeros(m, m);
        for k in 0..m {
            for l in k..m {
                let d = self.eval_seeded(u, Some(k), Some(l))?.e12;
                h[(k, l)] = d;
                h[(l, k)] = d;
            }
        }
        Ok(h)
    }

    fn describe(&self) -> String {
        self.expr.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str, n: usize, cols: usize) -> Expr {
        parse_expression(src, n, cols).unwrap()
    }

    #[test]
    fn parses_documented_example() {
        let e = p("u[1,1]^2 + sin(u[2,1])", 2, 1);
        let expected = Expr::Sum(vec![
            Expr::pow(Expr::var(1, 1), 2),
            Expr::unary(UnaryOp::Sin, Expr::var(2, 1)),
        ]);
        assert_eq!(e, expected);
    }

    #[test]
    fn rejects_out_of_range_index() {
        assert!(matches!(
            parse_expression("u[3,1]", 2, 1),
            Err(Error::IndexOutOfRange(_))
        ));
        assert!(matches!(
            parse_expression("u[1,0]", 2, 1),
            Err(Error::IndexOutOfRange(_))
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_expression("u[1,1] +\n  * 2", 2, 1).unwrap_err();
        assert_eq!(
            err,
            Error::Syntax {
                line: 2,
                column: 3,
                message: "expected a number, variable, function or '(', found '*'".into()
            }
        );
        assert!(matches!(
            parse_expression("tan(u[1,1])", 1, 1),
            Err(Error::Syntax { line: 1, column: 1, .. })
        ));
        assert!(matches!(
            parse_expression("u[1,1]^2.5", 1, 1),
            Err(Error::Syntax { line: 1, column: 8, .. })
        ));
        assert!(matches!(parse_expression("(u[1,1]", 1, 1), Err(Error::Syntax { .. })));
        assert!(matches!(
            parse_expression("u[1,1] u[1,1]", 1, 1),
            Err(Error::Syntax { line: 1, column: 8, .. })
        ));
        assert!(matches!(parse_expression("2 $ 3", 1, 1), Err(Error::Syntax { .. })));
        let deep = format!("{}1{}", "(".repeat(500), ")".repeat(500));
        assert!(matches!(parse_expression(&deep, 1, 1), Err(Error::Syntax { .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        let eval = |s: &str| {
            ExpressionField::parse(s, 1, 1)
                .unwrap()
                .value(&DMatrix::from_element(1, 1, 3.0))
                .unwrap()
        };
        assert_eq!(eval("1 + 2*3"), 7.0);
        assert_eq!(eval("8/4/2"), 1.0);
        assert_eq!(eval("10 - 4 - 3"), 3.0);
        assert_eq!(eval("2*u[1,1]^2"), 18.0);
        assert_eq!(eval("-u[1,1]^2"), 9.0);
        assert_eq!(eval("-(u[1,1]^2)"), -9.0);
        assert_eq!(eval("u[1,1]^-2"), 1.0 / 9.0);
        assert_eq!(eval("1.5e1 + .5"), 15.5);
    }

    #[test]
    fn display_round_trips() {
        let src = "-u[1,1]^2 - 2.5*(u[2,1] - u[1,1])/exp(u[2,1]) + sqrt(3 + u[1,1]^-1)";
        let e = p(src, 2, 1);
        let again = p(&e.to_string(), 2, 1);
        let u = DMatrix::from_column_slice(2, 1, &[0.3, -0.7]);
        let var = |r: usize, _c: usize| u[(r - 1, 0)];
        assert_eq!(e.eval(&var).unwrap(), again.eval(&var).unwrap());
    }

    #[test]
    fn product_example() {
        let f = ExpressionField::parse("u[1,1]*u[1,2]", 2, 2).unwrap();
        assert_eq!(f.value(&DMatrix::identity(2, 2)).unwrap(), 0.0);

        let f = ExpressionField::parse("u[1,1]*u[2,1]", 2, 1).unwrap();
        let u = DMatrix::from_column_slice(2, 1, &[3.0, 5.0]);
        assert_eq!(f.gradient(&u).unwrap().as_slice(), &[5.0, 3.0]);
        assert_eq!(
            f.hessian(&u).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
        );
    }

    #[test]
    fn domain_errors_name_the_node() {
        let f = ExpressionField::parse("1 + log(u[1,1] - 1)", 1, 1).unwrap();
        match f.value(&DMatrix::from_element(1, 1, 0.5)) {
            Err(Error::Domain { node, .. }) => assert_eq!(node, "log(u[1,1] - 1)"),
            other => panic!("unexpected {other:?}"),
        }
        let f = ExpressionField::parse("1/u[1,1]", 1, 1).unwrap();
        assert!(matches!(
            f.value(&DMatrix::from_element(1, 1, 0.0)),
            Err(Error::Domain { .. })
        ));
        let f = ExpressionField::parse("sqrt(u[1,1])", 1, 1).unwrap();
        let zero = DMatrix::from_element(1, 1, 0.0);
        assert_eq!(f.value(&zero).unwrap(), 0.0);
        assert!(matches!(f.gradient(&zero), Err(Error::Domain { .. })));
        let f = ExpressionField::parse("exp(exp(exp(u[1,1])))", 1, 1).unwrap();
        assert!(matches!(
            f.value(&DMatrix::from_element(1, 1, 10.0)),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let f = ExpressionField::parse("u[1,1]", 2, 1).unwrap();
        assert!(matches!(f.value(&DMatrix::zeros(3, 1)), Err(Error::Shape(_))));
        assert!(ExpressionField::from_expr(Expr::var(3, 1), 2, 1).is_err());
    }
}
