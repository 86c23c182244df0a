//! Runtime values and built-in arithmetic.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Default)]
pub enum Value {
    #[default]
    Undefined,
    Number(f64),
    Text(String),
    /// Handle of a class-instance record.
    Instance(usize),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        !matches!(self, Value::Undefined)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Undefined => write!(f, "undefined"),
            Value::Number(n) => write!(f, "{}", n),
            Value::Text(s) => write!(f, "{}", s),
            Value::Instance(r) => write!(f, "<instance {}>", r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ArithmeticError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("negative base {base} raised to fractional power {exponent}")]
    NegativeFractionalPower { base: f64, exponent: f64 },
    #[error("operator `{op}` is not defined on these operands")]
    BadOperands { op: String },
}

fn b(x: bool) -> f64 {
    if x {
        1.0
    } else {
        0.0
    }
}

/// Checked numeric built-ins; `u-` ignores `y`.
pub fn apply_number(op: &str, x: f64, y: Option<f64>) -> Result<f64, ArithmeticError> {
    let bad = || ArithmeticError::BadOperands { op: op.to_string() };
    if op == "u-" {
        return Ok(-x);
    }
    let y = y.ok_or_else(bad)?;
    Ok(match op {
        "+" => x + y,
        "-" => x - y,
        "*" => x * y,
        "/" => {
            if y == 0.0 {
                return Err(ArithmeticError::DivisionByZero);
            }
            x / y
        }
        "^" => {
            if x < 0.0 && y.fract() != 0.0 {
                return Err(ArithmeticError::NegativeFractionalPower { base: x, exponent: y });
            }
            x.powf(y)
        }
        "==" => b(x == y),
        ">" => b(x > y),
        "<" => b(x < y),
        ">=" => b(x >= y),
        "<=" => b(x <= y),
        _ => return Err(bad()),
    })
}

/// Unchecked variant for static evaluation; errors become `None`.
pub fn apply_builtin_number(op: &str, x: Option<f64>, y: Option<f64>) -> Option<f64> {
    apply_number(op, x?, y).ok()
}

pub fn apply_builtin(op: &str, x: &Value, y: &Value) -> Result<Value, ArithmeticError> {
    match (op, x, y) {
        ("+", Value::Text(a), q) => Ok(Value::Text(format!("{}{}", a, q))),
        ("+", a @ Value::Number(_), Value::Text(q)) => Ok(Value::Text(format!("{}{}", a, q))),
        ("==", Value::Text(p), Value::Text(q)) => Ok(Value::Number(b(p == q))),
        (_, Value::Number(a), _) => apply_number(op, *a, y.as_number()).map(Value::Number),
        _ => Err(ArithmeticError::BadOperands { op: op.to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        assert_eq!(apply_number("^", 2.0, Some(10.0)), Ok(1024.0));
        assert_eq!(apply_number("/", 1.0, Some(0.0)), Err(ArithmeticError::DivisionByZero));
        assert!(apply_number("^", -8.0, Some(0.5)).is_err());
        assert_eq!(apply_number("u-", 3.0, None), Ok(-3.0));
        assert_eq!(apply_builtin_number("==", Some(2.0), Some(2.0)), Some(1.0));
    }

    #[test]
    fn display_matches_f64() {
        let x = 36.100_505_063_388_33;
        assert_eq!(Value::Number(x).to_string().parse::<f64>(), Ok(x));
        assert_eq!(Value::Number(5.0).to_string(), "5");
    }
}
