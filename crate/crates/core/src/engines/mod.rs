//! Numeric engines for DTMCs and MDPs: reachability, expected total reward,
//! reward-bounded reachability, with scheduler extraction.

mod bounded;
pub mod graph;
mod reach;
pub(crate) mod system;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::format::sig;
use crate::model::Scheduler;

pub use bounded::check_bounded_reachability;
pub use graph::{maximal_end_components, prob01_max, prob01_min, EndComponent, QualitativeSets};
pub use reach::{check_reachability, check_reachability_bounds, check_total_reward, solve_dtmc};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Max,
    Min,
}

impl Direction {
    /// Whether `a` beats `b` by more than `tol`.
    #[inline]
    pub fn better(self, a: f64, b: f64, tol: f64) -> bool {
        match self {
            Direction::Max => a > b + tol,
            Direction::Min => a < b - tol,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Max => Direction::Min,
            Direction::Min => Direction::Max,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Max => "max",
            Direction::Min => "min",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    ValueIteration,
    GaussSeidel,
    PolicyIteration,
    OptimisticValueIteration,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vi" | "value-iteration" => Ok(Method::ValueIteration),
            "gs" | "gauss-seidel" => Ok(Method::GaussSeidel),
            "pi" | "policy-iteration" => Ok(Method::PolicyIteration),
            "ovi" | "optimistic" => Ok(Method::OptimisticValueIteration),
            _ => Err(Error::Config(format!(
                "unknown method \"{s}\" (expected vi, gauss-seidel, pi or ovi)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ValueIteration => "vi",
            Method::GaussSeidel => "gauss-seidel",
            Method::PolicyIteration => "pi",
            Method::OptimisticValueIteration => "ovi",
        })
    }
}

/// Solver settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub method: Method,
    pub precision: f64,
    /// Relative instead of absolute difference between iterates.
    pub relative: bool,
    pub max_iterations: usize,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            method: Method::ValueIteration,
            precision: 1e-6,
            relative: false,
            max_iterations: 1_000_000,
        }
    }
}

impl Environment {
    pub fn with_method(method: Method) -> Self {
        Environment {
            method,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.precision > 0.0) || !self.precision.is_finite() {
            return Err(Error::Config(format!("precision must be positive, got {}", self.precision)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Per-state results; rewards may be `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub enum ResultValues {
    Scalar(Vec<f64>),
    Interval(Vec<(f64, f64)>),
}

impl ResultValues {
    pub fn len(&self) -> usize {
        match self {
            ResultValues::Scalar(v) => v.len(),
            ResultValues::Interval(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point value at `state`; the midpoint for intervals.
    pub fn at(&self, state: usize) -> f64 {
        match self {
            ResultValues::Scalar(v) => v[state],
            ResultValues::Interval(v) => 0.5 * (v[state].0 + v[state].1),
        }
    }

    pub fn bounds(&self, state: usize) -> (f64, f64) {
        match self {
            ResultValues::Scalar(v) => (v[state], v[state]),
            ResultValues::Interval(v) => v[state],
        }
    }

    pub fn scalars(&self) -> Option<&[f64]> {
        match self {
            ResultValues::Scalar(v) => Some(v),
            ResultValues::Interval(_) => None,
        }
    }

    /// Text with 16 significant digits.
    pub fn describe(&self, state: usize) -> String {
        match self {
            ResultValues::Scalar(v) => sig(v[state], 16),
            ResultValues::Interval(v) => format!("[{}, {}]", sig(v[state].0, 16), sig(v[state].1, 16)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub values: ResultValues,
    pub scheduler: Option<Scheduler>,
}

impl CheckResult {
    pub fn scalar(values: Vec<f64>) -> Self {
        CheckResult {
            values: ResultValues::Scalar(values),
            scheduler: None,
        }
    }

    pub fn at(&self, state: usize) -> f64 {
        self.values.at(state)
    }
}
