use std::fmt;

use thiserror::Error;

use super::ast::{BinaryOp, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Real,
    Bool,
}

impl Type {
    pub fn is_numeric(self) -> bool {
        matches!(self, Type::Int | Type::Real)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Int => "int",
            Type::Real => "double",
            Type::Bool => "bool",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn ty(self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Real(_) => Type::Real,
            Value::Bool(_) => Type::Bool,
        }
    }

    pub fn as_f64(self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(i as f64),
            Value::Real(r) => Some(r),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(i),
            _ => None,
        }
    }

    /// Parses an override literal: `true`/`false`, an integer, or a real.
    pub fn parse_literal(s: &str) -> Option<Value> {
        let s = s.trim();
        match s {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            _ => s.parse::<i64>().map(Value::Int).ok().or_else(|| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Value::Real)
            }),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("type error: {0}")]
    Type(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("formula `{0}` is defined in terms of itself")]
    CyclicFormula(String),
}

pub fn apply_unary(op: UnaryOp, v: Value) -> Result<Value, EvalError> {
    match (op, v) {
        (UnaryOp::Neg, Value::Int(i)) => i.checked_neg().map(Value::Int).ok_or(EvalError::Overflow),
        (UnaryOp::Neg, Value::Real(r)) => Ok(Value::Real(-r)),
        (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (op, v) => Err(EvalError::Type(format!(
            "cannot apply {op:?} to {}",
            v.ty()
        ))),
    }
}

pub fn apply_binary(op: BinaryOp, a: Value, b: Value) -> Result<Value, EvalError> {
    use BinaryOp::*;
    let mismatch = || {
        EvalError::Type(format!(
            "operands {} and {} do not fit `{}`",
            a.ty(),
            b.ty(),
            op.symbol()
        ))
    };
    match op {
        And | Or | Implies => {
            let (x, y) = (
                a.as_bool().ok_or_else(mismatch)?,
                b.as_bool().ok_or_else(mismatch)?,
            );
            Ok(Value::Bool(match op {
                And => x && y,
                Or => x || y,
                _ => !x || y,
            }))
        }
        Eq | Ne => {
            let equal = match (a, b) {
                (Value::Bool(x), Value::Bool(y)) => x == y,
                (Value::Int(x), Value::Int(y)) => x == y,
                _ => {
                    let (x, y) = (
                        a.as_f64().ok_or_else(mismatch)?,
                        b.as_f64().ok_or_else(mismatch)?,
                    );
                    x == y
                }
            };
            Ok(Value::Bool(if op == Eq { equal } else { !equal }))
        }
        Lt | Le | Gt | Ge => {
            let ord = match (a, b) {
                (Value::Int(x), Value::Int(y)) => x.partial_cmp(&y),
                _ => {
                    let (x, y) = (
                        a.as_f64().ok_or_else(mismatch)?,
                        b.as_f64().ok_or_else(mismatch)?,
                    );
                    x.partial_cmp(&y)
                }
            };
            let ord = ord.ok_or_else(|| EvalError::Type("comparison with NaN".into()))?;
            Ok(Value::Bool(match op {
                Lt => ord.is_lt(),
                Le => ord.is_le(),
                Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        Div => {
            let (x, y) = (
                a.as_f64().ok_or_else(mismatch)?,
                b.as_f64().ok_or_else(mismatch)?,
            );
            if y == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            Ok(Value::Real(x / y))
        }
        Add | Sub | Mul => match (a, b) {
            (Value::Int(x), Value::Int(y)) => {
                let r = match op {
                    Add => x.checked_add(y),
                    Sub => x.checked_sub(y),
                    _ => x.checked_mul(y),
                };
                r.map(Value::Int).ok_or(EvalError::Overflow)
            }
            _ => {
                let (x, y) = (
                    a.as_f64().ok_or_else(mismatch)?,
                    b.as_f64().ok_or_else(mismatch)?,
                );
                Ok(Value::Real(match op {
                    Add => x + y,
                    Sub => x - y,
                    _ => x * y,
                }))
            }
        },
    }
}
