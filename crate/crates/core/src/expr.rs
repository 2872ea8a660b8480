//! Closed-form scalar expressions over chart coordinates.
//!
//! Grammar (recursive descent, `^` right-associative, unary minus between
//! `^` and `*`/`/` in binding strength):
//!
//! ```text
//! expr   := term (('+'|'-') term)* ;
//! term   := factor (('*'|'/') factor)* ;
//! factor := '-' factor | power ;
//! power  := atom ('^' factor)? ;
//! atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')' ;
//! ```
//!
//! Evaluation is pure f64; derivatives come from dual-number propagation with
//! one seed direction per coordinate (see [`crate::jet::Jet`]).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::Jet;

/// The eight supported univariate functions. The set is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Atan,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "atan" => Func::Atan,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Atan => "atan",
        }
    }

    fn eval(self, x: f64) -> Result<f64> {
        let v = match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => {
                if x <= 0.0 {
                    return Err(Error::DomainError { function: "log", argument: x });
                }
                x.ln()
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(Error::DomainError { function: "sqrt", argument: x });
                }
                x.sqrt()
            }
            Func::Abs => x.abs(),
            Func::Atan => x.atan(),
        };
        Ok(v)
    }

    /// First derivative at x (value of the function already computed as v).
    fn deriv(self, x: f64, v: f64) -> f64 {
        match self {
            Func::Sin => x.cos(),
            Func::Cos => -x.sin(),
            Func::Tan => 1.0 + v * v,
            Func::Exp => v,
            Func::Log => 1.0 / x,
            Func::Sqrt => {
                if v == 0.0 {
                    f64::INFINITY
                } else {
                    0.5 / v
                }
            }
            Func::Abs => {
                if x >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Func::Atan => 1.0 / (1.0 + x * x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    /// Index into the owning chart's coordinate list.
    Coord(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed arithmetic expression bound to a coordinate list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    coords: Arc<Vec<String>>,
    root: Node,
}

impl ScalarExpr {
    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Constant expression over the given coordinates.
    pub fn number(value: f64, coords: Arc<Vec<String>>) -> Self {
        ScalarExpr { coords, root: literal(value) }
    }

    /// The coordinate function x_index.
    pub fn coordinate(index: usize, coords: Arc<Vec<String>>) -> Self {
        assert!(index < coords.len());
        ScalarExpr { coords, root: Node::Coord(index) }
    }

    pub fn apply(self, f: Func) -> Self {
        ScalarExpr {
            coords: self.coords,
            root: Node::Call(f, Box::new(self.root)),
        }
    }

    pub fn pow_int(self, p: i32) -> Self {
        let exp = literal(p as f64);
        ScalarExpr {
            coords: self.coords,
            root: Node::Pow(Box::new(self.root), Box::new(exp)),
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        self.check_point(point)?;
        let v = eval_f64(&self.root, point)?;
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(v)
    }

    /// Value plus gradient via dual-number propagation, one seed per coordinate.
    pub fn eval_jet(&self, point: &[f64]) -> Result<Jet> {
        self.check_point(point)?;
        let jet = eval_jet_node(&self.root, point)?;
        if !jet.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(jet)
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.coords.len() {
            return Err(Error::DimensionMismatch { expected: self.coords.len(), got: point.len() });
        }
        Ok(())
    }

    /// True when the expression contains no coordinate references.
    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::Coord(_) => false,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                    walk(a) && walk(b)
                }
            }
        }
        walk(&self.root)
    }

    /// True when the expression references coordinate `index`.
    pub fn depends_on(&self, index: usize) -> bool {
        fn walk(n: &Node, index: usize) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Coord(i) => *i == index,
                Node::Neg(a) | Node::Call(_, a) => walk(a, index),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                    walk(a, index) || walk(b, index)
                }
            }
        }
        walk(&self.root, index)
    }
}

/// Nonnegative numeric literal; negative values are wrapped in a Neg node so
/// that parse(format(e)) is structurally equal to e.
fn literal(value: f64) -> Node {
    if value.is_sign_negative() && value != 0.0 {
        Node::Neg(Box::new(Node::Num(-value)))
    } else {
        Node::Num(value)
    }
}

fn binary(
    a: ScalarExpr,
    b: ScalarExpr,
    make: impl Fn(Box<Node>, Box<Node>) -> Node,
) -> ScalarExpr {
    assert_eq!(a.coords, b.coords, "operands must share a chart");
    ScalarExpr { coords: a.coords, root: make(Box::new(a.root), Box::new(b.root)) }
}

impl std::ops::Add for ScalarExpr {
    type Output = ScalarExpr;
    fn add(self, rhs: ScalarExpr) -> ScalarExpr {
        binary(self, rhs, Node::Add)
    }
}

impl std::ops::Sub for ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: ScalarExpr) -> ScalarExpr {
        binary(self, rhs, Node::Sub)
    }
}

impl std::ops::Mul for ScalarExpr {
    type Output = ScalarExpr;
    fn mul(self, rhs: ScalarExpr) -> ScalarExpr {
        binary(self, rhs, Node::Mul)
    }
}

impl std::ops::Div for ScalarExpr {
    type Output = ScalarExpr;
    fn div(self, rhs: ScalarExpr) -> ScalarExpr {
        binary(self, rhs, Node::Div)
    }
}

impl std::ops::Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr { coords: self.coords, root: Node::Neg(Box::new(self.root)) }
    }
}

fn eval_f64(node: &Node, point: &[f64]) -> Result<f64> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Coord(i) => point[*i],
        Node::Neg(a) => -eval_f64(a, point)?,
        Node::Add(a, b) => eval_f64(a, point)? + eval_f64(b, point)?,
        Node::Sub(a, b) => eval_f64(a, point)? - eval_f64(b, point)?,
        Node::Mul(a, b) => eval_f64(a, point)? * eval_f64(b, point)?,
        Node::Div(a, b) => eval_f64(a, point)? / eval_f64(b, point)?,
        Node::Pow(a, b) => eval_f64(a, point)?.powf(eval_f64(b, point)?),
        Node::Call(f, a) => f.eval(eval_f64(a, point)?)?,
    })
}

fn eval_jet_node(node: &Node, point: &[f64]) -> Result<Jet> {
    let m = point.len();
    Ok(match node {
        Node::Num(v) => Jet::constant(*v, m),
        Node::Coord(i) => Jet::coordinate(point[*i], *i, m),
        Node::Neg(a) => eval_jet_node(a, point)?.neg(),
        Node::Add(a, b) => eval_jet_node(a, point)?.add(&eval_jet_node(b, point)?),
        Node::Sub(a, b) => eval_jet_node(a, point)?.sub(&eval_jet_node(b, point)?),
        Node::Mul(a, b) => eval_jet_node(a, point)?.mul(&eval_jet_node(b, point)?),
        Node::Div(a, b) => eval_jet_node(a, point)?.div(&eval_jet_node(b, point)?),
        Node::Pow(a, b) => eval_jet_node(a, point)?.pow(&eval_jet_node(b, point)?)?,
        Node::Call(f, a) => {
            let inner = eval_jet_node(a, point)?;
            let v = f.eval(inner.value)?;
            inner.chain(v, f.deriv(inner.value, v))
        }
    })
}

// ---------------------------------------------------------------------------
// Tokenizer and parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            '^' => {
                tokens.push((Token::Caret, i));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let slice = &text[start..i];
                let value: f64 = slice.parse().map_err(|_| Error::Parse {
                    position: start,
                    message: format!("invalid number `{slice}`"),
                })?;
                tokens.push((Token::Num(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Parse {
                    position: i,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    coords: &'a [String],
    len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn position(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(self.len)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, token: Token, what: &str) -> Result<()> {
        let pos = self.position();
        match self.bump() {
            Some(t) if t == token => Ok(()),
            _ => Err(Error::Parse { position: pos, message: format!("expected {what}") }),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut node = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    node = Node::Add(Box::new(node), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.bump();
                    node = Node::Sub(Box::new(node), Box::new(self.term()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut node = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    node = Node::Mul(Box::new(node), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.bump();
                    node = Node::Div(Box::new(node), Box::new(self.factor()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn factor(&mut self) -> Result<Node> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let pos = self.position();
        match self.bump() {
            Some(Token::Num(v)) => Ok(Node::Num(v)),
            Some(Token::Ident(name)) => {
                if matches!(self.peek(), Some(Token::LParen)) {
                    let func = Func::from_name(&name).ok_or_else(|| {
                        if self.coords.contains(&name) {
                            Error::NotAFunction(name.clone())
                        } else {
                            Error::UnknownIdentifier(name.clone())
                        }
                    })?;
                    self.bump(); // '('
                    let arg = self.expr()?;
                    self.expect(Token::RParen, "`)`")?;
                    Ok(Node::Call(func, Box::new(arg)))
                } else {
                    let index = self
                        .coords
                        .iter()
                        .position(|c| *c == name)
                        .ok_or(Error::UnknownIdentifier(name))?;
                    Ok(Node::Coord(index))
                }
            }
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(Error::Parse { position: pos, message: "expected a value".into() }),
        }
    }
}

/// Parse `text` against the declared coordinate names.
pub fn parse_expr(text: &str, coords: &[String]) -> Result<ScalarExpr> {
    if text.trim().is_empty() {
        return Err(Error::Parse { position: 0, message: "empty expression".into() });
    }
    if coords.is_empty() {
        return Err(Error::InvalidArgument("coordinate list is empty".into()));
    }
    for (i, a) in coords.iter().enumerate() {
        if coords[i + 1..].contains(a) {
            return Err(Error::InvalidArgument(format!("duplicate coordinate `{a}`")));
        }
    }
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens: &tokens, pos: 0, coords, len: text.len() };
    let root = parser.expr()?;
    if parser.pos != tokens.len() {
        return Err(Error::Parse {
            position: parser.position(),
            message: "trailing input".into(),
        });
    }
    Ok(ScalarExpr { coords: Arc::new(coords.to_vec()), root })
}

// ---------------------------------------------------------------------------
// Formatting (precedence-aware, minimal parentheses, parse(format(e)) == e)
// ---------------------------------------------------------------------------

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Pow(..) => 4,
        Node::Num(_) | Node::Coord(_) | Node::Call(..) => 5,
    }
}

fn fmt_node(node: &Node, coords: &[String], out: &mut String) {
    let wrap = |child: &Node, min: u8, out: &mut String| {
        if precedence(child) < min {
            out.push('(');
            fmt_node(child, coords, out);
            out.push(')');
        } else {
            fmt_node(child, coords, out);
        }
    };
    match node {
        Node::Num(v) => out.push_str(&format!("{v}")),
        Node::Coord(i) => out.push_str(&coords[*i]),
        Node::Neg(a) => {
            out.push('-');
            // The operand of unary minus must bind at least as tightly as the
            // minus itself, otherwise "-a+b" would reparse as (-a)+b.
            wrap(a, 3, out);
        }
        Node::Add(a, b) => {
            wrap(a, 1, out);
            out.push('+');
            wrap(b, 2, out);
        }
        Node::Sub(a, b) => {
            wrap(a, 1, out);
            out.push('-');
            wrap(b, 2, out);
        }
        Node::Mul(a, b) => {
            wrap(a, 2, out);
            out.push('*');
            wrap(b, 3, out);
        }
        Node::Div(a, b) => {
            wrap(a, 2, out);
            out.push('/');
            wrap(b, 3, out);
        }
        Node::Pow(a, b) => {
            // Left side must be an atom: '^' binds a full factor on the right
            // but only an atom on the left.
            wrap(a, 5, out);
            out.push('^');
            wrap(b, 3, out);
        }
        Node::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            fmt_node(a, coords, out);
            out.push(')');
        }
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        fmt_node(&self.root, &self.coords, &mut out);
        f.write_str(&out)
    }
}
