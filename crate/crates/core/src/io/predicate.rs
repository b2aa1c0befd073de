use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{EitError, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    X,
    Y,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Clause {
    var: Var,
    op: Op,
    value: f64,
}

/// Conjunction of comparisons on `x`, `y` and `r = sqrt(x² + y²)`,
/// e.g. `"y>0"` or `"r<=0.1 && x>=-0.02"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RoiPredicate {
    clauses: Vec<Clause>,
}

impl RoiPredicate {
    pub fn eval(&self, p: Point) -> bool {
        self.clauses.iter().all(|c| {
            let v = match c.var {
                Var::X => p[0],
                Var::Y => p[1],
                Var::R => p[0].hypot(p[1]),
            };
            match c.op {
                Op::Lt => v < c.value,
                Op::Le => v <= c.value,
                Op::Gt => v > c.value,
                Op::Ge => v >= c.value,
            }
        })
    }
}

fn parse_clause(s: &str) -> Result<Clause> {
    let bad = || EitError::Config(format!("cannot parse ROI clause '{s}'; expected e.g. 'y>0' or 'r<=0.1'"));
    let s = s.trim();
    let (var, rest) = match s.chars().next() {
        Some('x') => (Var::X, &s[1..]),
        Some('y') => (Var::Y, &s[1..]),
        Some('r') => (Var::R, &s[1..]),
        _ => return Err(bad()),
    };
    let rest = rest.trim_start();
    let (op, num) = if let Some(n) = rest.strip_prefix("<=") {
        (Op::Le, n)
    } else if let Some(n) = rest.strip_prefix(">=") {
        (Op::Ge, n)
    } else if let Some(n) = rest.strip_prefix('<') {
        (Op::Lt, n)
    } else if let Some(n) = rest.strip_prefix('>') {
        (Op::Gt, n)
    } else {
        return Err(bad());
    };
    let value: f64 = num.trim().parse().map_err(|_| bad())?;
    if !value.is_finite() {
        return Err(bad());
    }
    Ok(Clause { var, op, value })
}

impl FromStr for RoiPredicate {
    type Err = EitError;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Err(EitError::Config("empty ROI predicate".into()));
        }
        let clauses = s.split("&&").map(parse_clause).collect::<Result<Vec<_>>>()?;
        Ok(Self { clauses })
    }
}

impl TryFrom<String> for RoiPredicate {
    type Error = EitError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RoiPredicate> for String {
    fn from(p: RoiPredicate) -> String {
        p.to_string()
    }
}

impl fmt::Display for RoiPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            let var = match c.var {
                Var::X => "x",
                Var::Y => "y",
                Var::R => "r",
            };
            let op = match c.op {
                Op::Lt => "<",
                Op::Le => "<=",
                Op::Gt => ">",
                Op::Ge => ">=",
            };
            write!(f, "{var}{op}{}", c.value)?;
        }
        Ok(())
    }
}
