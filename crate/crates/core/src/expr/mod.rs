//! Closed-form scalar functions on `R^n`: parsing, printing, evaluation and
//! exact first derivatives by forward-mode dual numbers.

mod parse;
mod print;
pub mod scalar;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use scalar::{Dual, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("variable `{name}` at position {pos} exceeds arity {arity}")]
    VariableOutOfRange {
        name: String,
        pos: usize,
        arity: usize,
    },
    #[error("arity must be positive")]
    ZeroArity,
    #[error("domain error in `{node}`: {op} of {arg}")]
    Domain {
        op: &'static str,
        node: String,
        arg: f64,
    },
    #[error("point has dimension {got}, expression expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl UnaryOp {
    pub(crate) fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Log => Some("log"),
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Sqrt => Some("sqrt"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Expression tree node. Variables are stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    /// Power with a constant real exponent.
    Pow(Box<Node>, f64),
}

impl Node {
    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Unary(_, a) | Node::Pow(a, _) => a.max_var(),
            Node::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(i), Some(j)) => Some(i.max(j)),
                (i, j) => i.or(j),
            },
        }
    }

    fn eval<T: Scalar>(&self, x: &[T], arity: usize) -> Result<T, ExprError> {
        match self {
            Node::Const(c) => Ok(T::from_f64(*c)),
            Node::Var(i) => Ok(x[*i]),
            Node::Unary(op, a) => {
                let v = a.eval(x, arity)?;
                let guard = |name: &'static str| ExprError::Domain {
                    op: name,
                    node: print::render(self, arity),
                    arg: v.value(),
                };
                Ok(match op {
                    UnaryOp::Neg => -v,
                    UnaryOp::Exp => v.exp(),
                    UnaryOp::Sin => v.sin(),
                    UnaryOp::Cos => v.cos(),
                    UnaryOp::Log => {
                        if !(v.value() > 0.0) {
                            return Err(guard("log"));
                        }
                        v.ln()
                    }
                    UnaryOp::Sqrt => {
                        if !(v.value() > 0.0) {
                            return Err(guard("sqrt"));
                        }
                        v.sqrt()
                    }
                })
            }
            Node::Binary(op, a, b) => {
                let l = a.eval(x, arity)?;
                let r = b.eval(x, arity)?;
                Ok(match op {
                    BinaryOp::Add => l + r,
                    BinaryOp::Sub => l - r,
                    BinaryOp::Mul => l * r,
                    BinaryOp::Div => {
                        if r.value() == 0.0 {
                            return Err(ExprError::Domain {
                                op: "division",
                                node: print::render(self, arity),
                                arg: 0.0,
                            });
                        }
                        l / r
                    }
                })
            }
            Node::Pow(a, p) => {
                let base = a.eval(x, arity)?;
                if p.fract() == 0.0 && p.abs() <= 1024.0 {
                    let k = p.abs() as u32;
                    let mut acc = T::one();
                    for _ in 0..k {
                        acc = acc * base;
                    }
                    if *p < 0.0 {
                        if acc.value() == 0.0 {
                            return Err(ExprError::Domain {
                                op: "negative power",
                                node: print::render(self, arity),
                                arg: base.value(),
                            });
                        }
                        acc = T::one() / acc;
                    }
                    Ok(acc)
                } else {
                    if !(base.value() > 0.0) {
                        return Err(ExprError::Domain {
                            op: "real power",
                            node: print::render(self, arity),
                            arg: base.value(),
                        });
                    }
                    Ok(base.powf(*p))
                }
            }
        }
    }
}

/// A smooth scalar function of `arity` real variables.
///
/// Immutable once built; evaluation is pure and can be shared across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    arity: usize,
}

impl Expression {
    /// Parses an infix formula in `x1..xn` (or `x`, `y`, `z` when `n <= 3`).
    pub fn parse(text: &str, arity: usize) -> Result<Self, ExprError> {
        if arity == 0 {
            return Err(ExprError::ZeroArity);
        }
        let root = parse::Parser::new(text, arity).parse()?;
        Ok(Self { root, arity })
    }

    /// Builds an expression from a tree, checking variable indices.
    pub fn from_node(root: Node, arity: usize) -> Result<Self, ExprError> {
        if arity == 0 {
            return Err(ExprError::ZeroArity);
        }
        if let Some(i) = root.max_var() {
            if i >= arity {
                return Err(ExprError::VariableOutOfRange {
                    name: format!("x{}", i + 1),
                    pos: 0,
                    arity,
                });
            }
        }
        Ok(Self { root, arity })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    fn check_dim(&self, len: usize) -> Result<(), ExprError> {
        if len != self.arity {
            return Err(ExprError::DimensionMismatch {
                expected: self.arity,
                got: len,
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.eval_generic(x)
    }

    pub fn eval_generic<T: Scalar>(&self, x: &[T]) -> Result<T, ExprError> {
        self.check_dim(x.len())?;
        self.root.eval(x, self.arity)
    }

    /// Exact gradient by `n` forward passes.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.value_and_grad_generic(x).map(|(_, g)| g)
    }

    pub fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ExprError> {
        self.value_and_grad_generic(x)
    }

    /// Value and gradient over any scalar type. Called with dual inputs this
    /// yields directional derivatives of the gradient (Hessian-vector terms).
    pub fn value_and_grad_generic<T: Scalar>(&self, x: &[T]) -> Result<(T, Vec<T>), ExprError> {
        self.check_dim(x.len())?;
        let mut seeded: Vec<Dual<T>> = x.iter().map(|&v| Dual::constant(v)).collect();
        let mut value = T::zero();
        let mut grad = Vec::with_capacity(self.arity);
        for i in 0..self.arity {
            seeded[i].eps = T::one();
            let out = self.root.eval(&seeded, self.arity)?;
            seeded[i].eps = T::zero();
            value = out.re;
            grad.push(out.eps);
        }
        Ok((value, grad))
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::render(&self.root, self.arity))
    }
}

/// `∂f1/∂x·∂f2/∂y − ∂f1/∂y·∂f2/∂x` for two functions of the plane.
pub fn jacobian2(f1: &Expression, f2: &Expression, x: &[f64]) -> Result<f64, ExprError> {
    for e in [f1, f2] {
        if e.arity() != 2 {
            return Err(ExprError::DimensionMismatch {
                expected: 2,
                got: e.arity(),
            });
        }
    }
    let a = f1.grad(x)?;
    let b = f2.grad(x)?;
    Ok(a[0] * b[1] - a[1] * b[0])
}

impl FromStr for UnaryOp {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "exp" => UnaryOp::Exp,
            "log" | "ln" => UnaryOp::Log,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "sqrt" => UnaryOp::Sqrt,
            _ => return Err(()),
        })
    }
}
