//! Nonlinearities `g(t, x)` as small arithmetic expressions.
//!
//! The grammar (whitespace insensitive, lowest precedence first):
//!
//! ```text
//! expr    := sum (cmp sum)?          cmp = < <= > >= == !=
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := primary ('^' unary)?    right associative, binds tighter than unary minus
//! primary := number | t | x | pi | name '(' args ')' | if '(' expr ',' expr ',' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `abs exp ln sin cos tanh atan sqrt sign` (one argument) and
//! `min max` (two arguments). Comparisons evaluate to `1` or `0`; `if`
//! selects its second argument when the first is nonzero and only evaluates
//! the selected branch.

mod estimate;
mod parser;

use std::fmt;

use thiserror::Error;

pub use estimate::{
    bound_on_box, lipschitz_estimate, lobatto_points, sample_points, Bound, ScalarField, DEFAULT_SAMPLES,
};
pub use parser::{parse, ParseError};

/// Binary arithmetic operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Comparison operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

/// Built-in functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Exp,
    Ln,
    Sin,
    Cos,
    Tanh,
    Atan,
    Sqrt,
    Sign,
    Min,
    Max,
}

impl Func {
    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "atan" | "arctan" => Func::Atan,
            "sqrt" => Func::Sqrt,
            "sign" => Func::Sign,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Atan => "atan",
            Func::Sqrt => "sqrt",
            Func::Sign => "sign",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    T,
    X,
    Pi,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
}

/// Evaluation failure. `subexpr` is the printed form of the offending node.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },
}

impl EvalError {
    fn domain(node: &Expr, reason: impl Into<String>) -> Self {
        EvalError::Domain {
            subexpr: node.to_string(),
            reason: reason.into(),
        }
    }
}

impl Expr {
    /// Parses `text`; shorthand for [`parse`].
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        parse(text)
    }

    /// Evaluates the expression at `(t, x)`.
    pub fn eval(&self, t: f64, x: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::T => t,
            Expr::X => x,
            Expr::Pi => std::f64::consts::PI,
            Expr::Neg(a) => -a.eval(t, x)?,
            Expr::Binary(op, a, b) => {
                let a = a.eval(t, x)?;
                let b = b.eval(t, x)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::domain(self, "division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(EvalError::domain(
                                self,
                                "negative base with non-integer exponent",
                            ));
                        }
                        if a == 0.0 && b < 0.0 {
                            return Err(EvalError::domain(self, "zero to a negative power"));
                        }
                        a.powf(b)
                    }
                }
            }
            Expr::Compare(op, a, b) => {
                let a = a.eval(t, x)?;
                let b = b.eval(t, x)?;
                let r = match op {
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                };
                if r {
                    1.0
                } else {
                    0.0
                }
            }
            Expr::If(c, a, b) => {
                if c.eval(t, x)? != 0.0 {
                    a.eval(t, x)?
                } else {
                    b.eval(t, x)?
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(t, x)?;
                match f {
                    Func::Abs => a.abs(),
                    Func::Exp => a.exp(),
                    Func::Ln => {
                        if a <= 0.0 {
                            return Err(EvalError::domain(self, "logarithm of a nonpositive value"));
                        }
                        a.ln()
                    }
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tanh => a.tanh(),
                    Func::Atan => a.atan(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::domain(self, "square root of a negative value"));
                        }
                        a.sqrt()
                    }
                    Func::Sign => {
                        if a > 0.0 {
                            1.0
                        } else if a < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                    Func::Min => a.min(args[1].eval(t, x)?),
                    Func::Max => a.max(args[1].eval(t, x)?),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::domain(self, "non-finite result"))
        }
    }

    /// True when the variable `t` occurs anywhere in the tree.
    pub fn depends_on_t(&self) -> bool {
        match self {
            Expr::T => true,
            Expr::Num(_) | Expr::X | Expr::Pi => false,
            Expr::Neg(a) => a.depends_on_t(),
            Expr::Binary(_, a, b) | Expr::Compare(_, a, b) => a.depends_on_t() || b.depends_on_t(),
            Expr::Call(_, args) => args.iter().any(Expr::depends_on_t),
            Expr::If(c, a, b) => c.depends_on_t() || a.depends_on_t() || b.depends_on_t(),
        }
    }

    /// Number of nodes in the tree.
    pub fn node_count(&self) -> usize {
        1 + match self {
            Expr::Num(_) | Expr::T | Expr::X | Expr::Pi => 0,
            Expr::Neg(a) => a.node_count(),
            Expr::Binary(_, a, b) | Expr::Compare(_, a, b) => a.node_count() + b.node_count(),
            Expr::Call(_, args) => args.iter().map(Expr::node_count).sum(),
            Expr::If(c, a, b) => c.node_count() + a.node_count() + b.node_count(),
        }
    }

    /// Structural test for the constant zero function (`0`, `-0`, `0*...`).
    pub fn is_identically_zero(&self) -> bool {
        match self {
            Expr::Num(v) => *v == 0.0,
            Expr::Neg(a) => a.is_identically_zero(),
            Expr::Binary(BinOp::Mul, a, b) => a.is_identically_zero() || b.is_identically_zero(),
            _ => false,
        }
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        })
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        })
    }
}

/// Fully parenthesized form; reparsing it yields an identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 => write!(f, "(-{})", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::T => f.write_str("t"),
            Expr::X => f.write_str("x"),
            Expr::Pi => f.write_str("pi"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {op} {b})"),
            Expr::Compare(op, a, b) => write!(f, "({a} {op} {b})"),
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
            Expr::If(c, a, b) => write!(f, "if({c}, {a}, {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(src: &str, x: f64) -> Result<f64, EvalError> {
        parse(src).unwrap().eval(0.0, x)
    }

    #[test]
    fn log_sign_expression_at_e_squared() {
        let e = parse("0.5*ln(1+abs(x))*sign(x)").unwrap();
        let x = std::f64::consts::E.powi(2) - 1.0;
        assert!((e.eval(0.0, x).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(e.eval(0.0, -x).unwrap(), -e.eval(0.0, x).unwrap());
    }

    #[test]
    fn identity_and_cubic() {
        assert_eq!(ev("x", 3.5).unwrap(), 3.5);
        assert_eq!(ev("x^3 - x", 2.0).unwrap(), 6.0);
    }

    #[test]
    fn domain_errors_are_errors() {
        assert!(matches!(ev("ln(x)", -1.0), Err(EvalError::Domain { .. })));
        assert!(ev("sqrt(x)", -1e-300).is_err());
        assert!(ev("1/x", 0.0).is_err());
        assert!(ev("x^0.5", -2.0).is_err());
        assert!(ev("exp(x)", 1000.0).is_err());
        assert_eq!(ev("x^2", -2.0).unwrap(), 4.0);
        match ev("2 + ln(x)", 0.0) {
            Err(EvalError::Domain { subexpr, .. }) => assert_eq!(subexpr, "ln(x)"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn if_evaluates_only_selected_branch() {
        assert_eq!(ev("if(x>0, ln(1+x), -ln(1-x))", 0.0).unwrap(), 0.0);
        assert!((ev("if(x>0, ln(1+x), -ln(1-x))", 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(ev("if(x < 0, ln(x), 7)", 3.0).unwrap(), 7.0);
    }

    #[test]
    fn precedence_rules() {
        assert_eq!(ev("-x^2", 3.0).unwrap(), -9.0);
        assert_eq!(ev("2^3^2", 0.0).unwrap(), 512.0);
        assert_eq!(ev("2^-1", 0.0).unwrap(), 0.5);
        assert_eq!(ev("1 + 2*3 - 4/2", 0.0).unwrap(), 5.0);
        assert_eq!(ev("1 + 2 < 4", 0.0).unwrap(), 1.0);
        assert_eq!(ev("min(x, 2) + max(x, 2)", 5.0).unwrap(), 7.0);
        assert_eq!(ev("sign(x)", 0.0).unwrap(), 0.0);
        assert_eq!(ev("t*x", 0.0).unwrap(), 0.0);
        assert!((ev("atan(x)", 1.0).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn time_dependence_and_zero_detection() {
        assert!(parse("t*x").unwrap().depends_on_t());
        assert!(!parse("sin(x)+1").unwrap().depends_on_t());
        assert!(parse("0").unwrap().is_identically_zero());
        assert!(parse("0*x").unwrap().is_identically_zero());
        assert!(!parse("x-x").unwrap().is_identically_zero());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|v| Expr::Num(f64::from(v) / 8.0)),
            Just(Expr::X),
            Just(Expr::T),
            Just(Expr::Pi),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
                (
                    prop_oneof![Just(CmpOp::Lt), Just(CmpOp::Ge), Just(CmpOp::Ne)],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Compare(op, Box::new(a), Box::new(b))),
                inner.clone().prop_map(|a| Expr::Call(Func::Tanh, vec![a])),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
                (inner.clone(), inner.clone(), inner)
                    .prop_map(|(c, a, b)| Expr::If(Box::new(c), Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap();
            prop_assert_eq!(&reparsed, &e);
            prop_assert_eq!(reparsed.to_string(), printed);
        }

        #[test]
        fn eval_is_bit_reproducible(e in arb_expr(), t in 0u32..20, x in -10.0f64..10.0) {
            let a = e.eval(f64::from(t), x);
            let b = e.eval(f64::from(t), x);
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                (Err(a), Err(b)) => prop_assert_eq!(a, b),
                _ => prop_assert!(false, "evaluation outcome changed"),
            }
        }
    }
}
