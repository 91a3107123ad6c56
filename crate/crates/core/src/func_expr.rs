//! Closed-form test functions on the torus.
//!
//! Expressions are real-valued and use the variables `x1..xn`, `y1..yn`, the
//! constant `pi`, the functions `sin`, `cos`, `exp`, the binary operators
//! `+ - * /` and `^` with an integer exponent. Precedence from tightest:
//! `^`, unary `-`, `* /`, `+ -`.
//!
//! [`project`] turns an expression into a band-limited [`TrigPoly`] by sampling
//! on a uniform grid and taking a discrete Fourier transform.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::trig_poly::{FreqVector, TrigPoly};

/// Largest grid (total sample count) a projection may allocate.
pub const MAX_GRID_SAMPLES: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    pub axis: Axis,
    /// 1-based index.
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    /// Smallest `n` for which every variable is in range.
    pub fn required_dim(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Pi => 0,
            Expr::Var(v) => v.index,
            Expr::Neg(e) | Expr::Call(_, e) | Expr::Pow(e, _) => e.required_dim(),
            Expr::Binary(_, a, b) => a.required_dim().max(b.required_dim()),
        }
    }

    pub fn uses_axis(&self, axis: Axis) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Var(v) => v.axis == axis,
            Expr::Neg(e) | Expr::Call(_, e) | Expr::Pow(e, _) => e.uses_axis(axis),
            Expr::Binary(_, a, b) => a.uses_axis(axis) || b.uses_axis(axis),
        }
    }

    /// Real value at `(x, y)`. Both slices must cover `required_dim()`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Pi => PI,
            Expr::Var(v) => {
                let src = match v.axis {
                    Axis::X => x,
                    Axis::Y => y,
                };
                *src.get(v.index - 1).ok_or_else(|| Error::VariableOutOfRange {
                    name: v.to_string(),
                    required: v.index,
                    n: src.len(),
                })?
            }
            Expr::Neg(e) => -e.eval(x, y)?,
            Expr::Call(f, e) => f.apply(e.eval(x, y)?),
            Expr::Binary(op, a, b) => {
                let a = a.eval(x, y)?;
                let b = b.eval(x, y)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(division_error(x, y));
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(e, exp) => {
                let b = e.eval(x, y)?;
                if b == 0.0 && *exp < 0 {
                    return Err(division_error(x, y));
                }
                b.powi(*exp)
            }
        };
        Ok(v)
    }
}

fn division_error(x: &[f64], y: &[f64]) -> Error {
    Error::DivisionByZero {
        x: x.to_vec(),
        y: y.to_vec(),
    }
}

/// Evaluates an expression as a complex number (imaginary part zero).
pub fn evaluate_ast(ast: &Expr, x: &[f64], y: &[f64]) -> Result<Complex64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(Complex64::new(ast.eval(x, y)?, 0.0))
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.axis {
            Axis::X => 'x',
            Axis::Y => 'y',
        };
        write!(f, "{}{}", c, self.index)
    }
}

// Fully parenthesised so that printing and re-parsing gives the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{}", v),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => write!(f, "{}", v),
            Expr::Neg(e) => write!(f, "(-{})", e),
            Expr::Call(func, e) => write!(f, "{}({})", func.name(), e),
            Expr::Binary(op, a, b) => write!(f, "({} {} {})", a, op.symbol(), b),
            Expr::Pow(e, k) => write!(f, "({})^{}", e, k),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    /// 1-based character position.
    pos: usize,
}

fn tokenize(source: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
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
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                position: pos,
                message: format!("malformed number `{}`", text),
            })?;
            out.push(Token {
                tok: Tok::Num(v, text),
                pos,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                pos,
            });
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                return Err(Error::Syntax {
                    position: pos,
                    message: format!("unexpected character `{}`", c),
                })
            }
        };
        out.push(Token { tok, pos });
        i += 1;
    }
    out.push(Token {
        tok: Tok::End,
        pos: chars.len() + 1,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.peek().pos,
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if self.peek().tok == want {
            self.bump();
            Ok(())
        } else {
            self.syntax(format!("expected {}", what))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let exponent = self.integer_exponent()?;
        Ok(Expr::Pow(Box::new(base), exponent))
    }

    fn integer_exponent(&mut self) -> Result<i32> {
        let parenthesised = self.peek().tok == Tok::LParen;
        if parenthesised {
            self.bump();
        }
        let negative = self.peek().tok == Tok::Op('-');
        if negative {
            self.bump();
        }
        let pos = self.peek().pos;
        let value = match self.bump().tok {
            Tok::Num(v, _) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
            _ => {
                return Err(Error::Syntax {
                    position: pos,
                    message: "exponent must be an integer literal".into(),
                })
            }
        };
        if parenthesised {
            self.expect(Tok::RParen, "`)`")?;
        }
        Ok(if negative { -value } else { value })
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.bump();
        match tok.tok {
            Tok::Num(v, _) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => self.identifier(name, tok.pos),
            Tok::End => Err(Error::Syntax {
                position: tok.pos,
                message: "unexpected end of input".into(),
            }),
            other => Err(Error::Syntax {
                position: tok.pos,
                message: format!("unexpected token {:?}", other),
            }),
        }
    }

    fn identifier(&mut self, name: String, pos: usize) -> Result<Expr> {
        let func = match name.as_str() {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        };
        if let Some(func) = func {
            if self.peek().tok != Tok::LParen {
                return Err(Error::Arity {
                    name,
                    expected: 1,
                    found: 0,
                    position: pos,
                });
            }
            let args = self.arguments()?;
            if args.len() != 1 {
                return Err(Error::Arity {
                    name,
                    expected: 1,
                    found: args.len(),
                    position: pos,
                });
            }
            let arg = args.into_iter().next().expect("one argument");
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        let leaf = if name == "pi" {
            Some(Expr::Pi)
        } else {
            parse_variable(&name).map(Expr::Var)
        };
        match leaf {
            Some(leaf) => {
                if self.peek().tok == Tok::LParen {
                    let found = self.arguments()?.len();
                    return Err(Error::Arity {
                        name,
                        expected: 0,
                        found,
                        position: pos,
                    });
                }
                Ok(leaf)
            }
            None => Err(Error::UnknownIdentifier {
                name,
                position: pos,
            }),
        }
    }

    fn arguments(&mut self) -> Result<Vec<Expr>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.peek().tok == Tok::RParen {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek().tok {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    return Ok(args);
                }
                _ => return self.syntax("expected `,` or `)`"),
            }
        }
    }
}

fn parse_variable(name: &str) -> Option<Var> {
    let axis = match name.as_bytes().first()? {
        b'x' => Axis::X,
        b'y' => Axis::Y,
        _ => return None,
    };
    let digits = &name[1..];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let index = digits.parse().ok()?;
    Some(Var { axis, index })
}

pub fn parse(source: &str) -> Result<Expr> {
    let mut parser = Parser {
        tokens: tokenize(source)?,
        at: 0,
    };
    let e = parser.expr()?;
    if parser.peek().tok != Tok::End {
        return parser.syntax("unexpected trailing input");
    }
    Ok(e)
}

/// Bandwidth and grid size for [`project`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProjectionSpec {
    pub bandwidth: usize,
    pub grid: usize,
}

impl ProjectionSpec {
    pub fn new(bandwidth: usize, grid: usize) -> Result<Self> {
        let spec = ProjectionSpec { bandwidth, grid };
        spec.validate()?;
        Ok(spec)
    }

    /// `M = max(4 (B + 1), 16)`.
    pub fn with_default_grid(bandwidth: usize) -> Self {
        ProjectionSpec {
            bandwidth,
            grid: (4 * (bandwidth + 1)).max(16),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid % 2 != 0 {
            return Err(Error::InvalidProjection(format!(
                "grid size {} must be even",
                self.grid
            )));
        }
        if self.grid < 2 * self.bandwidth + 2 {
            return Err(Error::InvalidProjection(format!(
                "grid size {} must be at least 2B + 2 = {}",
                self.grid,
                2 * self.bandwidth + 2
            )));
        }
        Ok(())
    }
}

/// Samples `ast` on the `M^{2n}` grid `(j / M, l / M)` and keeps the DFT
/// coefficients with `|p_i|, |q_i| <= B`.
pub fn project(ast: &Expr, n: usize, spec: &ProjectionSpec) -> Result<TrigPoly> {
    project_complex(ast, None, n, spec)
}

/// Projects `re + i im`.
pub fn project_complex(
    re: &Expr,
    im: Option<&Expr>,
    n: usize,
    spec: &ProjectionSpec,
) -> Result<TrigPoly> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    for e in std::iter::once(re).chain(im) {
        let required = e.required_dim();
        if required > n {
            return Err(Error::VariableOutOfRange {
                name: e.to_string(),
                required,
                n,
            });
        }
    }
    let m = spec.grid;
    let axes = 2 * n;
    let total = (m as u128).pow(axes as u32);
    if total > MAX_GRID_SAMPLES as u128 {
        return Err(Error::InvalidProjection(format!(
            "grid of {} samples exceeds the cap {}",
            total, MAX_GRID_SAMPLES
        )));
    }
    let total = total as usize;

    let mut samples: Vec<Complex64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut coords = vec![0.0; axes];
            let mut rest = flat;
            for a in (0..axes).rev() {
                coords[a] = (rest % m) as f64 / m as f64;
                rest /= m;
            }
            let (x, y) = coords.split_at(n);
            let r = re.eval(x, y)?;
            let i = match im {
                Some(e) => e.eval(x, y)?,
                None => 0.0,
            };
            if !r.is_finite() || !i.is_finite() {
                return Err(Error::NonFinite {
                    x: x.to_vec(),
                    y: y.to_vec(),
                });
            }
            Ok(Complex64::new(r, i))
        })
        .collect::<Result<_>>()?;

    fft_all_axes(&mut samples, m, axes);

    let norm = 1.0 / total as f64;
    let b = spec.bandwidth as i64;
    let side = (2 * b + 1) as usize;
    let mut terms = Vec::with_capacity(side.pow(axes as u32));
    for flat in 0..side.pow(axes as u32) {
        let mut freq = vec![0i64; axes];
        let mut rest = flat;
        for a in (0..axes).rev() {
            freq[a] = (rest % side) as i64 - b;
            rest /= side;
        }
        let mut index = 0usize;
        for &f in &freq {
            index = index * m + f.rem_euclid(m as i64) as usize;
        }
        let (p, q) = freq.split_at(n);
        terms.push((
            FreqVector::new(p.to_vec()),
            FreqVector::new(q.to_vec()),
            samples[index] * norm,
        ));
    }
    TrigPoly::from_terms(n, terms)
}

/// In-place unnormalised forward DFT along every axis of a row-major cube.
fn fft_all_axes(data: &mut [Complex64], m: usize, axes: usize) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut line = vec![Complex64::default(); m];
    for a in 0..axes {
        let stride = m.pow((axes - 1 - a) as u32);
        let block = stride * m;
        for start in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}
