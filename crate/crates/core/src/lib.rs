//! Explicit-state probabilistic model checking.
//!
//! Models are built either by exploring user callbacks ([`explore`]) or from
//! a PRISM-language subset ([`prism`]), and are checked with the engines in
//! [`engines`], [`uncertain`] and [`beliefs`]. Policies come back as
//! [`Scheduler`]s and can be applied to obtain induced chains.

pub mod beliefs;
pub mod bitvec;
pub mod check;
pub mod engines;
mod error;
pub mod explore;
pub mod format;
pub mod lp;
pub mod model;
pub mod prism;
pub mod props;
pub mod rational;
pub mod reduce;
pub mod uncertain;

pub use bitvec::BitVector;
pub use check::{check_property, CheckOptions};
pub use engines::{CheckResult, Direction, Environment, Method, ResultValues};
pub use error::{Error, Result};
pub use model::{
    ExplicitModel, ModelKind, RewardModel, Scheduler, SparseChoiceMatrix, StateValuations,
};
pub use props::{parse_property, PropertyAst};
