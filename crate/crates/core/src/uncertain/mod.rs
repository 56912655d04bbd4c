//! Uncertain transition probabilities: interval MDPs resolved cooperatively
//! or robustly, and parametric models checked by instantiation.

mod interval;
mod parametric;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use interval::{check_interval_reachability, inner_extremum};
pub use parametric::{grid_csv, sample_grid, GridRow, GridSpec, ParamExpr, ParametricModel};

/// Who resolves the interval uncertainty: the scheduler's ally or its adversary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UncertaintyMode {
    Cooperative,
    Robust,
}

impl FromStr for UncertaintyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cooperative" | "angelic" => Ok(UncertaintyMode::Cooperative),
            "robust" | "demonic" => Ok(UncertaintyMode::Robust),
            _ => Err(Error::Config(format!("unknown uncertainty mode \"{s}\" (expected robust or cooperative)"))),
        }
    }
}

impl fmt::Display for UncertaintyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UncertaintyMode::Cooperative => "cooperative",
            UncertaintyMode::Robust => "robust",
        })
    }
}
