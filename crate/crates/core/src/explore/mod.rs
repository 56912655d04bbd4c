//! Model construction by breadth-first exploration of user callbacks.

mod orchard;
mod simulate;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::hash::Hash;

use crate::bitvec::BitVector;
use crate::error::{Error, Result};
use crate::model::{
    ExplicitModel, MatrixBuilder, ModelKind, RewardModel, StateValuations, ROW_SUM_TOLERANCE,
};
use crate::uncertain::{ParamExpr, ParametricModel};

pub use orchard::{orchard_model, orchard_parametric, OrchardConfig, OrchardVariant};
pub use simulate::{simulate, Policy, SimulationOptions, Trace, TraceStep};

/// Name of the label placed on the initial state.
pub const INIT_LABEL: &str = "init";

/// Transition weight returned by [`ExplorationSpec::delta`].
#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    Point(f64),
    Interval(f64, f64),
    Expr(ParamExpr),
}

/// Callbacks describing a model. States equal under `Eq`/`Hash` must yield
/// identical actions, transitions, labels and rewards.
pub trait ExplorationSpec {
    type State: Clone + Eq + Hash;

    fn initial_state(&self) -> Self::State;

    /// Enabled actions, in the order their choices should appear.
    fn available_actions(&self, state: &Self::State) -> Vec<String>;

    fn delta(&self, state: &Self::State, action: &str) -> Vec<(Weight, Self::State)>;

    fn labels(&self, _state: &Self::State) -> Vec<String> {
        Vec::new()
    }

    /// Choice rewards collected when `action` is taken in `state`.
    fn rewards(&self, _state: &Self::State, _action: &str) -> Vec<(String, f64)> {
        Vec::new()
    }

    /// Variable names for [`ExplorationSpec::valuation`]; empty disables valuations.
    fn valuation_variables(&self) -> Vec<String> {
        Vec::new()
    }

    fn valuation(&self, _state: &Self::State) -> Vec<i64> {
        Vec::new()
    }

    /// Observation key; returning `Some` for any state makes the result a POMDP.
    fn observation(&self, _state: &Self::State) -> Option<Vec<i64>> {
        None
    }
}

struct Raw {
    num_states: usize,
    group_offsets: Vec<usize>,
    rows: Vec<Vec<(usize, Weight)>>,
    actions: Vec<String>,
    labels: BTreeMap<String, Vec<usize>>,
    rewards: BTreeMap<String, Vec<(usize, f64)>>,
    valuations: Option<StateValuations>,
    observations: Option<Vec<u32>>,
}

fn explore_raw<S: ExplorationSpec>(spec: &S, max_size: usize) -> Result<Raw> {
    if max_size == 0 {
        return Err(Error::Config("max_size must be positive".into()));
    }
    let mut index: HashMap<S::State, usize> = HashMap::new();
    let mut states: Vec<S::State> = Vec::new();
    let mut queue = VecDeque::new();
    let init = spec.initial_state();
    index.insert(init.clone(), 0);
    states.push(init);
    queue.push_back(0usize);

    let variables = spec.valuation_variables();
    let mut valuations = Vec::new();
    let mut obs_keys: HashMap<Vec<i64>, u32> = HashMap::new();
    let mut observations = Vec::new();
    let mut any_observation = false;

    let mut raw = Raw {
        num_states: 0,
        group_offsets: vec![0],
        rows: Vec::new(),
        actions: Vec::new(),
        labels: BTreeMap::new(),
        rewards: BTreeMap::new(),
        valuations: None,
        observations: None,
    };
    raw.labels.insert(INIT_LABEL.to_string(), vec![0]);

    while let Some(s) = queue.pop_front() {
        let state = states[s].clone();
        let actions = spec.available_actions(&state);
        if actions.is_empty() {
            return Err(Error::Model(format!("state {s} has no available actions")));
        }
        for action in actions {
            let mut row = Vec::new();
            let mut point_sum = 0.0;
            let mut all_point = true;
            for (w, succ) in spec.delta(&state, &action) {
                match &w {
                    Weight::Point(p) => {
                        if !(*p > 0.0 && *p <= 1.0 + ROW_SUM_TOLERANCE) {
                            return Err(Error::Model(format!(
                                "state {s} action {action}: weight {p} is not a positive probability"
                            )));
                        }
                        point_sum += p;
                    }
                    Weight::Interval(l, u) => {
                        all_point = false;
                        if !(0.0 <= *l && l <= u && *u <= 1.0 && *u > 0.0) {
                            return Err(Error::Model(format!(
                                "state {s} action {action}: invalid interval [{l}, {u}]"
                            )));
                        }
                    }
                    Weight::Expr(_) => all_point = false,
                }
                let t = match index.get(&succ) {
                    Some(&t) => t,
                    None => {
                        let t = states.len();
                        if t >= max_size {
                            return Err(Error::SizeLimit {
                                limit: max_size,
                                explored: t + 1,
                            });
                        }
                        index.insert(succ.clone(), t);
                        states.push(succ);
                        queue.push_back(t);
                        t
                    }
                };
                row.push((t, w));
            }
            if row.is_empty() {
                return Err(Error::Model(format!("state {s} action {action}: empty distribution")));
            }
            if all_point && (point_sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Model(format!(
                    "state {s} action {action}: probabilities sum to {point_sum}"
                )));
            }
            let r = raw.rows.len();
            for (name, v) in spec.rewards(&state, &action) {
                if !(v >= 0.0) {
                    return Err(Error::Model(format!(
                        "state {s} action {action}: negative reward {v} for \"{name}\""
                    )));
                }
                raw.rewards.entry(name).or_default().push((r, v));
            }
            raw.rows.push(row);
            raw.actions.push(action);
        }
        raw.group_offsets.push(raw.rows.len());
        for l in spec.labels(&state) {
            let v = raw.labels.entry(l).or_default();
            if v.last() != Some(&s) {
                v.push(s);
            }
        }
        if !variables.is_empty() {
            valuations.push(spec.valuation(&state));
        }
        match spec.observation(&state) {
            Some(key) => {
                any_observation = true;
                let next = obs_keys.len() as u32;
                observations.push(*obs_keys.entry(key).or_insert(next));
            }
            None => observations.push(u32::MAX),
        }
    }
    raw.num_states = states.len();
    if !variables.is_empty() {
        raw.valuations = Some(StateValuations {
            variables,
            values: valuations,
        });
    }
    if any_observation {
        if observations.contains(&u32::MAX) {
            return Err(Error::Model("observation missing for some states".into()));
        }
        raw.observations = Some(observations);
    }
    Ok(raw)
}

fn finish_common(raw: &Raw) -> (BitVector, BTreeMap<String, BitVector>, Vec<Option<String>>) {
    let n = raw.num_states;
    let labels = raw
        .labels
        .iter()
        .map(|(k, v)| (k.clone(), BitVector::from_indices(n, v.iter().copied())))
        .collect();
    let choice_labels = raw.actions.iter().cloned().map(Some).collect();
    (BitVector::from_indices(n, [0]), labels, choice_labels)
}

fn choice_rewards(raw: &Raw) -> BTreeMap<String, RewardModel> {
    raw.rewards
        .iter()
        .map(|(name, entries)| {
            let mut v = vec![0.0; raw.rows.len()];
            for &(r, x) in entries {
                v[r] += x;
            }
            (
                name.clone(),
                RewardModel {
                    state: None,
                    choice: Some(v),
                },
            )
        })
        .collect()
}

/// Explores the reachable state space breadth-first from the initial state.
///
/// Indices follow discovery order (initial state = 0, successors in delta order).
/// Interval weights produce an `imdp`, observations a `pomdp`, otherwise an `mdp`.
pub fn explore<S: ExplorationSpec>(spec: &S, max_size: usize) -> Result<ExplicitModel> {
    let raw = explore_raw(spec, max_size)?;
    let interval = raw
        .rows
        .iter()
        .flatten()
        .any(|(_, w)| matches!(w, Weight::Interval(..)));
    let mut b = MatrixBuilder::new(interval);
    for s in 0..raw.num_states {
        b.new_row_group();
        for r in raw.group_offsets[s]..raw.group_offsets[s + 1] {
            let mut entries = Vec::with_capacity(raw.rows[r].len());
            for (t, w) in &raw.rows[r] {
                entries.push(match w {
                    Weight::Point(p) => (*t, *p, *p),
                    Weight::Interval(l, u) => (*t, *l, *u),
                    Weight::Expr(_) => {
                        return Err(Error::Unsupported(
                            "parametric weights; use explore_parametric".into(),
                        ))
                    }
                });
            }
            b.push_interval_row(entries);
        }
    }
    let (initial_states, labels, choice_labels) = finish_common(&raw);
    let kind = if interval {
        ModelKind::Imdp
    } else if raw.observations.is_some() {
        ModelKind::Pomdp
    } else {
        ModelKind::Mdp
    };
    if interval && raw.observations.is_some() {
        return Err(Error::Unsupported("interval POMDPs".into()));
    }
    Ok(ExplicitModel {
        kind,
        matrix: b.finish(),
        initial_states,
        labels,
        reward_models: choice_rewards(&raw),
        choice_labels: Some(choice_labels),
        valuations: raw.valuations.clone(),
        observations: raw.observations.clone(),
    })
}

/// Like [`explore`] but keeps parametric weights symbolic.
pub fn explore_parametric<S: ExplorationSpec>(spec: &S, max_size: usize) -> Result<ParametricModel> {
    let raw = explore_raw(spec, max_size)?;
    let mut rows = Vec::with_capacity(raw.rows.len());
    for (r, row) in raw.rows.iter().enumerate() {
        let mut entries: Vec<(usize, ParamExpr)> = Vec::with_capacity(row.len());
        for (t, w) in row {
            let e = match w {
                Weight::Point(p) => ParamExpr::constant_f64(*p),
                Weight::Expr(e) => e.clone(),
                Weight::Interval(..) => {
                    return Err(Error::Unsupported(format!(
                        "interval weight in parametric row {r}"
                    )))
                }
            };
            entries.push((*t, e));
        }
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, ParamExpr)> = Vec::with_capacity(entries.len());
        for (t, e) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == t => {
                    let prev = std::mem::replace(&mut last.1, ParamExpr::zero());
                    last.1 = prev + e;
                }
                _ => merged.push((t, e)),
            }
        }
        rows.push(merged);
    }
    let (initial_states, labels, choice_labels) = finish_common(&raw);
    ParametricModel::new(
        raw.group_offsets.clone(),
        rows,
        initial_states,
        labels,
        choice_rewards(&raw),
        Some(choice_labels),
    )
}
