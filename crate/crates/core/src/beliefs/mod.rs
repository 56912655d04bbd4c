//! POMDP reachability by exploring the belief MDP with exact rational
//! beliefs; unexplored beliefs are cut off with sound value bounds.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num::{One, Zero};
use serde::Serialize;

use crate::bitvec::BitVector;
use crate::engines::{check_reachability, CheckResult, Direction, Environment};
use crate::error::{Error, Result};
use crate::model::{ExplicitModel, MatrixBuilder, ModelKind};
use crate::rational::{recover_from_f64, to_f64, to_text, Rational};

/// Distribution over states sharing one observation, sorted by state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Belief {
    pub support: Vec<(usize, Rational)>,
}

impl Belief {
    pub fn point(state: usize) -> Self {
        Belief {
            support: vec![(state, Rational::one())],
        }
    }

    pub fn is_point(&self) -> bool {
        self.support.len() == 1
    }

    pub fn total(&self) -> Rational {
        self.support.iter().map(|(_, p)| p).sum()
    }

    /// `Σ b(s)·v(s)`.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.support.iter().map(|(s, p)| to_f64(p) * values[*s]).sum()
    }
}

/// Transition probabilities of a POMDP as exact rationals.
struct ExactPomdp<'a> {
    model: &'a ExplicitModel,
    observations: &'a [u32],
    rows: Vec<Vec<(usize, Rational)>>,
}

impl<'a> ExactPomdp<'a> {
    fn new(model: &'a ExplicitModel) -> Result<Self> {
        if model.kind != ModelKind::Pomdp {
            return Err(Error::Unsupported(format!("belief exploration needs a POMDP, got {}", model.kind)));
        }
        let observations = model.observations.as_deref().ok_or_else(|| Error::Model("POMDP without observations".into()))?;
        let m = &model.matrix;
        let rows = (0..m.num_rows())
            .map(|r| {
                m.row(r)
                    .iter()
                    .filter(|(_, p)| *p > 0.0)
                    .map(|(t, p)| (t, recover_from_f64(p).expect("finite probability")))
                    .collect()
            })
            .collect();
        Ok(ExactPomdp {
            model,
            observations,
            rows,
        })
    }

    /// Action names of a state, in row order.
    fn actions(&self, state: usize) -> Vec<String> {
        self.model
            .matrix
            .row_group(state)
            .map(|r| match self.model.choice_label(r) {
                Some(l) => l.to_string(),
                None => (r - self.model.matrix.row_group(state).start).to_string(),
            })
            .collect()
    }

    fn row_for(&self, state: usize, action: &str) -> Option<usize> {
        let start = self.model.matrix.row_group(state).start;
        self.actions(state).iter().position(|a| a == action).map(|i| start + i)
    }

    fn successors(&self, b: &Belief, action: &str) -> Result<Vec<(Rational, u32, Belief)>> {
        let mut by_obs: BTreeMap<u32, BTreeMap<usize, Rational>> = BTreeMap::new();
        for (s, p) in &b.support {
            let r = self.row_for(*s, action).ok_or_else(|| {
                Error::Model(format!("action \"{action}\" is not enabled in state {s} of the belief"))
            })?;
            for (t, q) in &self.rows[r] {
                let acc = by_obs.entry(self.observations[*t]).or_default().entry(*t).or_insert_with(Rational::zero);
                *acc += p * q;
            }
        }
        Ok(by_obs
            .into_iter()
            .filter_map(|(z, dist)| {
                let pz: Rational = dist.values().sum();
                if pz.is_zero() {
                    return None;
                }
                let support = dist.into_iter().filter(|(_, p)| !p.is_zero()).map(|(t, p)| (t, p / &pz)).collect();
                Some((pz, z, Belief { support }))
            })
            .collect())
    }
}

/// Observation-filtered successors of `b` under `action`:
/// `(Pr(z | b, a), z, posterior)` for every observation of positive probability.
pub fn belief_successors(pomdp: &ExplicitModel, b: &Belief, action: &str) -> Result<Vec<(Rational, u32, Belief)>> {
    ExactPomdp::new(pomdp)?.successors(b, action)
}

/// Explored fragment of the belief MDP.
#[derive(Clone, Debug)]
pub struct BeliefMdp {
    pub beliefs: Vec<Belief>,
    pub observations: Vec<u32>,
    pub goal: Vec<bool>,
    /// Per belief, per action: `(probability, successor belief)`; `None` for
    /// goal beliefs and unexpanded frontier beliefs.
    pub transitions: Vec<Option<Vec<(String, Vec<(f64, usize)>)>>>,
}

impl BeliefMdp {
    pub fn frontier(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.beliefs.len()).filter(|&i| !self.goal[i] && self.transitions[i].is_none())
    }

    /// Diagnostic dump: `[{"obs": z, "support": [[state, "num/den"], ...]}, ...]`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Entry {
            obs: u32,
            support: Vec<(usize, String)>,
        }
        let entries: Vec<Entry> = self
            .beliefs
            .iter()
            .zip(&self.observations)
            .map(|(b, &obs)| Entry {
                obs,
                support: b.support.iter().map(|(s, p)| (*s, to_text(p))).collect(),
            })
            .collect();
        serde_json::to_string_pretty(&entries).expect("belief dump serializes")
    }
}

/// Goal states as a set of observations; fails if `goal` splits an observation.
fn goal_observations(pomdp: &ExplicitModel, goal: &BitVector) -> Result<HashMap<u32, bool>> {
    let obs = pomdp.observations.as_deref().ok_or_else(|| Error::Model("POMDP without observations".into()))?;
    let mut out: HashMap<u32, bool> = HashMap::new();
    for (s, &z) in obs.iter().enumerate() {
        let g = goal.get(s);
        if *out.entry(z).or_insert(g) != g {
            return Err(Error::Unsupported(format!(
                "goal is not determined by the observation (observation {z} has goal and non-goal states)"
            )));
        }
    }
    Ok(out)
}

/// Breadth-first belief exploration from the initial point belief; at most
/// `cap` beliefs are expanded.
pub fn explore_beliefs(pomdp: &ExplicitModel, goal: &BitVector, cap: usize) -> Result<BeliefMdp> {
    let exact = ExactPomdp::new(pomdp)?;
    let goal_obs = goal_observations(pomdp, goal)?;
    let init = Belief::point(pomdp.initial_state());
    let mut index: HashMap<Belief, usize> = HashMap::new();
    let mut mdp = BeliefMdp {
        beliefs: Vec::new(),
        observations: Vec::new(),
        goal: Vec::new(),
        transitions: Vec::new(),
    };
    let mut add = |b: Belief, mdp: &mut BeliefMdp, queue: &mut VecDeque<usize>| -> usize {
        if let Some(&i) = index.get(&b) {
            return i;
        }
        let i = mdp.beliefs.len();
        let z = exact.observations[b.support[0].0];
        index.insert(b.clone(), i);
        mdp.beliefs.push(b);
        mdp.observations.push(z);
        mdp.goal.push(goal_obs[&z]);
        mdp.transitions.push(None);
        queue.push_back(i);
        i
    };
    let mut queue = VecDeque::new();
    add(init, &mut mdp, &mut queue);
    let mut expanded = 0usize;
    while let Some(i) = queue.pop_front() {
        if mdp.goal[i] {
            continue;
        }
        if expanded >= cap {
            break;
        }
        expanded += 1;
        let b = mdp.beliefs[i].clone();
        let actions = exact.actions(b.support[0].0);
        let mut out = Vec::with_capacity(actions.len());
        for a in actions {
            let succ = exact.successors(&b, &a)?;
            let mut row = Vec::with_capacity(succ.len());
            for (p, _, nb) in succ {
                let j = add(nb, &mut mdp, &mut queue);
                row.push((to_f64(&p), j));
            }
            out.push((a, row));
        }
        mdp.transitions[i] = Some(out);
    }
    Ok(mdp)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PomdpResult {
    pub lower: f64,
    pub upper: f64,
    pub beliefs: usize,
    pub frontier: usize,
    /// Whether every explored belief has a single support state.
    pub point_beliefs_only: bool,
    /// Set when the cap stopped exploration with a gap above the precision.
    pub notice: Option<String>,
}

/// Bounds `[lb, ub]` on the maximal probability of reaching `goal` from the
/// initial belief. Frontier beliefs get 0 below and the fully observable
/// value above.
pub fn check_pomdp_reachability(
    pomdp: &ExplicitModel,
    goal: &BitVector,
    dir: Direction,
    env: &Environment,
    belief_cap: usize,
) -> Result<PomdpResult> {
    if dir != Direction::Max {
        return Err(Error::Unsupported("POMDP analysis supports maximal probabilities only".into()));
    }
    let mdp_values = fully_observable_value(pomdp, goal, Direction::Max, env)?;
    let mdp_values = mdp_values.values.scalars().expect("scalar values").to_vec();
    let beliefs = explore_beliefs(pomdp, goal, belief_cap)?;
    let solve = |frontier_value: &dyn Fn(&Belief) -> f64| -> Result<f64> {
        let (model, goal) = belief_model(&beliefs, frontier_value);
        let r = check_reachability(&model, &goal, Direction::Max, env, false)?;
        Ok(r.at(0))
    };
    let lower = solve(&|_| 0.0)?;
    let upper = solve(&|b| b.expectation(&mdp_values).clamp(0.0, 1.0))?.max(lower);
    let frontier = beliefs.frontier().count();
    let notice = (frontier > 0 && upper - lower > env.precision).then(|| {
        format!(
            "belief cap of {belief_cap} reached with {frontier} unexplored beliefs; bounds are valid but not tight"
        )
    });
    Ok(PomdpResult {
        lower,
        upper,
        beliefs: beliefs.beliefs.len(),
        frontier,
        point_beliefs_only: beliefs.beliefs.iter().all(Belief::is_point),
        notice,
    })
}

/// Finite MDP over the explored beliefs plus two sinks (goal, fail); a
/// frontier belief with value `v` moves to the goal sink with probability `v`.
fn belief_model(beliefs: &BeliefMdp, frontier_value: &dyn Fn(&Belief) -> f64) -> (ExplicitModel, BitVector) {
    let n = beliefs.beliefs.len();
    let (win, lose) = (n, n + 1);
    let mut b = MatrixBuilder::new(false);
    for i in 0..n {
        b.new_row_group();
        if beliefs.goal[i] {
            b.push_row([(win, 1.0)]);
            continue;
        }
        match &beliefs.transitions[i] {
            Some(actions) => {
                for (_, row) in actions {
                    let mut entries: BTreeMap<usize, f64> = BTreeMap::new();
                    for &(p, j) in row {
                        *entries.entry(j).or_insert(0.0) += p;
                    }
                    b.push_row(entries);
                }
            }
            None => {
                let v = frontier_value(&beliefs.beliefs[i]);
                b.push_row([(win, v), (lose, 1.0 - v)].into_iter().filter(|e| e.1 > 0.0));
            }
        }
    }
    b.new_row_group();
    b.push_row([(win, 1.0)]);
    b.new_row_group();
    b.push_row([(lose, 1.0)]);
    let model = ExplicitModel::new(ModelKind::Mdp, b.finish(), 0);
    (model, BitVector::from_indices(n + 2, [win]))
}

/// Optimal value when the observation function is ignored.
pub fn fully_observable_value(
    pomdp: &ExplicitModel,
    goal: &BitVector,
    dir: Direction,
    env: &Environment,
) -> Result<CheckResult> {
    check_reachability(&pomdp.fully_observable(), goal, dir, env, false)
}
