//! Explicit models: sparse row-grouped transitions, labels, rewards,
//! optional choice labels, state valuations and observations.

mod dot;
mod io;
mod matrix;
mod scheduler;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bitvec::BitVector;
use crate::error::{Error, Result};

pub use dot::export_dot;
pub use io::{read_model, write_model};
pub use matrix::{MatrixBuilder, Row, SparseChoiceMatrix};
pub use scheduler::{apply_scheduler, Scheduler};
pub use validate::{validate, Violation, ViolationRule};

/// Tolerance for point rows summing to one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dtmc,
    Mdp,
    Imdp,
    Pomdp,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Dtmc => "DTMC",
            ModelKind::Mdp => "MDP",
            ModelKind::Imdp => "IMDP",
            ModelKind::Pomdp => "POMDP",
        })
    }
}

/// State rewards are collected when leaving a state, choice rewards when a
/// choice is taken; both are non-negative.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RewardModel {
    pub state: Option<Vec<f64>>,
    pub choice: Option<Vec<f64>>,
}

impl RewardModel {
    /// Total reward collected when `row` of `state` is taken.
    #[inline]
    pub fn total(&self, state: usize, row: usize) -> f64 {
        self.state.as_ref().map_or(0.0, |v| v[state]) + self.choice.as_ref().map_or(0.0, |v| v[row])
    }

    pub fn scaled(&self, factor: f64) -> RewardModel {
        let scale = |v: &Vec<f64>| v.iter().map(|x| x * factor).collect();
        RewardModel {
            state: self.state.as_ref().map(scale),
            choice: self.choice.as_ref().map(scale),
        }
    }
}

/// Integer-valued state variables, one row of values per state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateValuations {
    pub variables: Vec<String>,
    pub values: Vec<Vec<i64>>,
}

impl StateValuations {
    pub fn index_of(&self, variable: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == variable)
    }

    pub fn get(&self, state: usize, variable: &str) -> Option<i64> {
        self.index_of(variable).map(|i| self.values[state][i])
    }

    pub fn describe(&self, state: usize) -> String {
        self.variables
            .iter()
            .zip(&self.values[state])
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(" & ")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitModel {
    pub kind: ModelKind,
    pub matrix: SparseChoiceMatrix,
    pub initial_states: BitVector,
    pub labels: BTreeMap<String, BitVector>,
    pub reward_models: BTreeMap<String, RewardModel>,
    /// One optional action name per row.
    pub choice_labels: Option<Vec<Option<String>>>,
    pub valuations: Option<StateValuations>,
    /// Observation index per state, POMDPs only.
    pub observations: Option<Vec<u32>>,
}

impl ExplicitModel {
    pub fn new(kind: ModelKind, matrix: SparseChoiceMatrix, initial_state: usize) -> Self {
        let n = matrix.num_states();
        ExplicitModel {
            kind,
            matrix,
            initial_states: BitVector::from_indices(n, [initial_state]),
            labels: BTreeMap::new(),
            reward_models: BTreeMap::new(),
            choice_labels: None,
            valuations: None,
            observations: None,
        }
    }

    pub fn num_states(&self) -> usize {
        self.matrix.num_states()
    }

    pub fn num_choices(&self) -> usize {
        self.matrix.num_rows()
    }

    pub fn num_transitions(&self) -> usize {
        self.matrix.num_entries()
    }

    /// The unique initial state; models built here always have exactly one.
    pub fn initial_state(&self) -> usize {
        self.initial_states
            .iter_ones()
            .next()
            .expect("model without initial state")
    }

    pub fn label(&self, name: &str) -> Result<&BitVector> {
        self.labels
            .get(name)
            .ok_or_else(|| Error::Semantic(format!("unknown label \"{name}\"")))
    }

    pub fn reward_model(&self, name: &str) -> Result<&RewardModel> {
        self.reward_models
            .get(name)
            .ok_or_else(|| Error::Semantic(format!("unknown reward structure \"{name}\"")))
    }

    pub fn choice_label(&self, row: usize) -> Option<&str> {
        self.choice_labels.as_ref()?.get(row)?.as_deref()
    }

    pub fn is_point_valued(&self) -> bool {
        !self.matrix.is_interval()
    }

    /// Adds (or replaces) a label computed from the state valuations.
    pub fn add_label_from_valuations(
        &mut self,
        name: &str,
        predicate: impl Fn(&StateValuations, usize) -> bool,
    ) -> Result<()> {
        let vals = self
            .valuations
            .as_ref()
            .ok_or_else(|| Error::Model("model has no state valuations".into()))?;
        let bv = BitVector::from_fn(self.num_states(), |s| predicate(vals, s));
        self.labels.insert(name.to_string(), bv);
        Ok(())
    }

    /// Turns the model into a POMDP with the given observation per state.
    pub fn with_observations(mut self, observations: Vec<u32>) -> Result<ExplicitModel> {
        if observations.len() != self.num_states() {
            return Err(Error::Model(format!(
                "{} observations for {} states",
                observations.len(),
                self.num_states()
            )));
        }
        if !matches!(self.kind, ModelKind::Mdp | ModelKind::Dtmc | ModelKind::Pomdp) {
            return Err(Error::Unsupported(format!("observations on {} models", self.kind)));
        }
        self.kind = ModelKind::Pomdp;
        self.observations = Some(observations);
        if let Some(v) = validate(&self)
            .into_iter()
            .find(|v| v.rule == ViolationRule::ObservationActions)
        {
            return Err(Error::Model(v.to_string()));
        }
        Ok(self)
    }

    /// Drops the observation function; a POMDP becomes its underlying MDP.
    pub fn fully_observable(&self) -> ExplicitModel {
        let mut m = self.clone();
        if m.kind == ModelKind::Pomdp {
            m.kind = ModelKind::Mdp;
            m.observations = None;
        }
        m
    }

    pub fn summary(&self) -> Summary {
        summary(self)
    }
}

/// Size report of a model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub kind: ModelKind,
    pub states: usize,
    pub transitions: usize,
    pub choices: usize,
    pub actions: usize,
    pub labels: usize,
    pub observations: Option<usize>,
}

pub fn summary(model: &ExplicitModel) -> Summary {
    let actions: BTreeSet<&str> = model
        .choice_labels
        .iter()
        .flatten()
        .filter_map(|l| l.as_deref())
        .collect();
    let labels = model.labels.values().filter(|bv| !bv.is_all_zero()).count();
    let observations = model
        .observations
        .as_ref()
        .map(|o| o.iter().collect::<BTreeSet<_>>().len());
    Summary {
        kind: model.kind,
        states: model.num_states(),
        transitions: model.num_transitions(),
        choices: model.num_choices(),
        actions: actions.len(),
        labels,
        observations,
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} model with {} states, {} actions, and {} distinct labels ({} transitions, {} choices",
            self.kind, self.states, self.actions, self.labels, self.transitions, self.choices
        )?;
        if let Some(o) = self.observations {
            write!(f, ", {o} observations")?;
        }
        write!(f, ")")
    }
}
