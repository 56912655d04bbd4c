use std::collections::HashMap;

use super::graph::{attractor_choices, maximal_end_components, prob01_max, prob01_min, support};
use super::system::System;
use super::{CheckResult, Direction, Environment, Method, ResultValues};
use crate::bitvec::BitVector;
use crate::error::{Error, Result};
use crate::model::{ExplicitModel, ModelKind, Scheduler};

const FIXED: usize = usize::MAX;

/// The numeric part of a query: unknown states grouped into variables
/// (end components collapsed), everything else fixed.
struct Reduced {
    system: System,
    var_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    /// Rows staying inside a collapsed component, per variable.
    internal: Vec<Vec<usize>>,
}

fn reduce(
    model: &ExplicitModel,
    unknown: &BitVector,
    collapse: Option<&dyn Fn(usize) -> bool>,
    fixed: &[f64],
    row_ok: &dyn Fn(usize) -> bool,
    row_const: &dyn Fn(usize, usize) -> f64,
) -> Reduced {
    let m = &model.matrix;
    let n = m.num_states();
    let mut component: Vec<usize> = vec![FIXED; n];
    let mut components = Vec::new();
    if let Some(allowed) = collapse {
        for ec in maximal_end_components(model, unknown, |r| allowed(r) && row_ok(r)) {
            for &s in &ec.states {
                component[s] = components.len();
            }
            components.push(ec);
        }
    }
    let mut var_of = vec![FIXED; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut internal: Vec<Vec<usize>> = Vec::new();
    for s in unknown.iter_ones() {
        if var_of[s] != FIXED {
            continue;
        }
        let v = members.len();
        match component[s] {
            FIXED => {
                var_of[s] = v;
                members.push(vec![s]);
                internal.push(Vec::new());
            }
            c => {
                for &t in &components[c].states {
                    var_of[t] = v;
                }
                members.push(components[c].states.clone());
                internal.push(components[c].rows.clone());
            }
        }
    }

    let mut system = System::new();
    let mut merged: HashMap<usize, f64> = HashMap::new();
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for v in 0..members.len() {
        let mut pushed = false;
        for &s in &members[v] {
            for r in m.row_group(s) {
                if !row_ok(r) || internal[v].binary_search(&r).is_ok() {
                    continue;
                }
                let mut b = row_const(s, r);
                let mut exit = 0.0;
                merged.clear();
                for (t, p) in m.row(r).iter() {
                    if p == 0.0 {
                        continue;
                    }
                    match var_of[t] {
                        FIXED => {
                            b += p * fixed[t];
                            exit += p;
                        }
                        u => *merged.entry(u).or_insert(0.0) += p,
                    }
                }
                entries.clear();
                entries.extend(merged.iter().map(|(&u, &p)| (u, p)));
                entries.sort_unstable_by_key(|e| e.0);
                // x = b + x carries no information.
                if entries.len() == 1 && entries[0].0 == v && entries[0].1 >= 1.0 - 1e-12 {
                    continue;
                }
                system.push_row(b, exit, &entries, r);
                pushed = true;
            }
        }
        if !pushed {
            system.push_row(0.0, 0.0, &[], FIXED);
        }
        system.finish_var();
    }
    Reduced {
        system,
        var_of,
        members,
        internal,
    }
}

impl Reduced {
    /// Reports a non-converged iterate per state rather than per variable.
    fn lift_error(&self, e: Error, fixed: impl Fn(usize) -> f64) -> Error {
        match e {
            Error::NonConvergence {
                iterations,
                last_difference,
                last_iterate,
            } if last_iterate.len() == self.members.len() => Error::NonConvergence {
                iterations,
                last_difference,
                last_iterate: self.expand(&last_iterate, fixed),
            },
            e => e,
        }
    }

    fn expand(&self, x: &[f64], fixed: impl Fn(usize) -> f64) -> Vec<f64> {
        self.var_of
            .iter()
            .enumerate()
            .map(|(s, &v)| if v == FIXED { fixed(s) } else { x[v] })
            .collect()
    }

    /// Greedy choices for unknown states; inside a collapsed component, states
    /// walk towards the member owning the best exit.
    fn choices(&self, model: &ExplicitModel, x: &[f64], dir: Direction, out: &mut [Option<usize>]) {
        let m = &model.matrix;
        let greedy = self.system.greedy(x, dir);
        for v in 0..self.members.len() {
            let r = self.system.origin[self.system.rows(v).start + greedy[v]];
            if r == FIXED {
                continue;
            }
            let owner = m.state_of_row(r);
            out[owner] = Some(r - m.row_group(owner).start);
            if self.members[v].len() == 1 {
                continue;
            }
            let mut reached = vec![owner];
            loop {
                let mut progress = false;
                for &u in &self.members[v] {
                    if reached.contains(&u) {
                        continue;
                    }
                    let row = self.internal[v].iter().copied().find(|&r| {
                        m.state_of_row(r) == u && support(m, r).any(|t| reached.contains(&t))
                    });
                    if let Some(r) = row {
                        out[u] = Some(r - m.row_group(u).start);
                        reached.push(u);
                        progress = true;
                    }
                }
                if !progress {
                    break;
                }
            }
        }
    }
}

fn check_point_model(model: &ExplicitModel) -> Result<()> {
    match model.kind {
        ModelKind::Dtmc | ModelKind::Mdp => Ok(()),
        ModelKind::Pomdp => Err(Error::Unsupported(
            "POMDP queries need belief exploration or a fully observable relaxation".into(),
        )),
        ModelKind::Imdp => Err(Error::Unsupported(
            "interval models are checked with an uncertainty resolution mode".into(),
        )),
    }
}

fn check_goal(model: &ExplicitModel, goal: &BitVector) -> Result<()> {
    if goal.len() != model.num_states() {
        return Err(Error::Semantic(format!(
            "goal set has {} entries for {} states",
            goal.len(),
            model.num_states()
        )));
    }
    Ok(())
}

fn finish_scheduler(choices: Vec<Option<usize>>) -> Scheduler {
    Scheduler::new(choices.into_iter().map(|c| c.unwrap_or(0)).collect())
}

fn reduce_reachability(model: &ExplicitModel, goal: &BitVector, dir: Direction) -> (super::QualitativeSets, Vec<f64>, Reduced) {
    let all = BitVector::ones(model.num_states());
    let q = match dir {
        Direction::Max => prob01_max(model, &all, goal),
        Direction::Min => prob01_min(model, &all, goal),
    };
    let fixed: Vec<f64> = (0..model.num_states()).map(|s| if q.prob1.get(s) { 1.0 } else { 0.0 }).collect();
    // Maximizing end components would otherwise admit spurious fixpoints.
    let any_row = |_: usize| true;
    let collapse: Option<&dyn Fn(usize) -> bool> = match dir {
        Direction::Max => Some(&any_row),
        Direction::Min => None,
    };
    let mut red = reduce(model, &q.maybe(), collapse, &fixed, &|_| true, &|_, _| 0.0);
    red.system.cap = 1.0;
    (q, fixed, red)
}

/// Optimal probability of eventually reaching `goal`, per state.
pub fn check_reachability(
    model: &ExplicitModel,
    goal: &BitVector,
    dir: Direction,
    env: &Environment,
    extract_scheduler: bool,
) -> Result<CheckResult> {
    check_point_model(model)?;
    check_goal(model, goal)?;
    env.check()?;
    let (q, fixed, red) = reduce_reachability(model, goal, dir);
    let n_vars = red.system.num_vars();
    let x = red
        .system
        .solve(dir, env, vec![0.0; n_vars], None)
        .map_err(|e| red.lift_error(e, |s| fixed[s]))?;
    let values: Vec<f64> = red.expand(&x, |s| fixed[s]).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();

    let scheduler = extract_scheduler.then(|| {
        let m = &model.matrix;
        let mut choices = vec![None; model.num_states()];
        red.choices(model, &x, dir, &mut choices);
        match dir {
            Direction::Max => {
                let progress = attractor_choices(model, &q.prob1, goal, |_| true);
                for s in q.prob1.difference(goal).iter_ones() {
                    choices[s] = progress[s];
                }
            }
            Direction::Min => {
                for s in q.prob0.iter_ones() {
                    choices[s] = m
                        .row_group(s)
                        .find(|&r| support(m, r).all(|t| q.prob0.get(t)))
                        .map(|r| r - m.row_group(s).start);
                }
            }
        }
        finish_scheduler(choices)
    });
    Ok(CheckResult {
        values: ResultValues::Scalar(values),
        scheduler,
    })
}

/// Certified per-state enclosures `[lb, ub]` of the reachability probability
/// (optimistic value iteration).
pub fn check_reachability_bounds(
    model: &ExplicitModel,
    goal: &BitVector,
    dir: Direction,
    env: &Environment,
) -> Result<Vec<(f64, f64)>> {
    check_point_model(model)?;
    check_goal(model, goal)?;
    env.check()?;
    let (_, fixed, red) = reduce_reachability(model, goal, dir);
    let n_vars = red.system.num_vars();
    let (lb, ub) = red
        .system
        .optimistic(dir, env, vec![0.0; n_vars], 1.0)
        .map_err(|e| red.lift_error(e, |s| fixed[s]))?;
    let lo = red.expand(&lb, |s| fixed[s]);
    let hi = red.expand(&ub, |s| fixed[s]);
    Ok(lo.into_iter().zip(hi).collect())
}

fn reward_vectors_ok(model: &ExplicitModel, name: &str) -> Result<()> {
    let rm = model.reward_model(name)?;
    for v in rm.state.iter().chain(rm.choice.iter()) {
        if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Model(format!("reward structure \"{name}\" has value {x}")));
        }
    }
    Ok(())
}

/// Expected reward accumulated until `goal` is first reached; `+inf` where
/// the goal is missed with positive probability (under some scheduler for
/// `Max`, under every scheduler for `Min`).
pub fn check_total_reward(
    model: &ExplicitModel,
    reward: &str,
    goal: &BitVector,
    dir: Direction,
    env: &Environment,
    extract_scheduler: bool,
) -> Result<CheckResult> {
    check_point_model(model)?;
    check_goal(model, goal)?;
    env.check()?;
    reward_vectors_ok(model, reward)?;
    let rm = model.reward_model(reward)?;
    let m = &model.matrix;
    let n = model.num_states();
    let all = BitVector::ones(n);
    let (finite, avoid) = match dir {
        Direction::Max => {
            let q = prob01_min(model, &all, goal);
            (q.prob1, q.prob0)
        }
        Direction::Min => (prob01_max(model, &all, goal).prob1, BitVector::zeros(n)),
    };
    let unknown = finite.difference(goal);
    let row_ok = |r: usize| support(m, r).all(|t| finite.get(t));
    let zero_reward = |r: usize| rm.total(m.state_of_row(r), r) == 0.0;
    let collapse: Option<&dyn Fn(usize) -> bool> = match dir {
        Direction::Max => None,
        Direction::Min => Some(&zero_reward),
    };
    let fixed = vec![0.0; n];
    let red = reduce(model, &unknown, collapse, &fixed, &row_ok, &|s, r| rm.total(s, r));
    let init = match (dir, env.method) {
        (Direction::Min, Method::PolicyIteration) => {
            Some(red.system.proper_policy().into_iter().map(|c| c.unwrap_or(0)).collect())
        }
        _ => None,
    };
    let x = red
        .system
        .solve(dir, env, vec![0.0; red.system.num_vars()], init)
        .map_err(|e| red.lift_error(e, |s| if goal.get(s) { 0.0 } else { f64::INFINITY }))?;
    let values = red.expand(&x, |s| if goal.get(s) { 0.0 } else { f64::INFINITY });

    let scheduler = extract_scheduler.then(|| {
        let mut choices = vec![None; n];
        red.choices(model, &x, dir, &mut choices);
        if dir == Direction::Max {
            // Steer into the region where the goal can be avoided forever.
            let trap = avoid.difference(goal);
            for s in trap.iter_ones() {
                choices[s] = m
                    .row_group(s)
                    .find(|&r| support(m, r).all(|t| trap.get(t)))
                    .map(|r| r - m.row_group(s).start);
            }
            let towards = attractor_choices(model, &all, &trap, |_| true);
            for s in finite.complement().difference(&trap).iter_ones() {
                choices[s] = towards[s];
            }
        }
        finish_scheduler(choices)
    });
    Ok(CheckResult {
        values: ResultValues::Scalar(values),
        scheduler,
    })
}

/// Solves a DTMC query as a linear system: reachability of `goal`, or, with
/// `reward`, the expected reward until `goal`. Small systems are solved
/// directly, larger ones by Gauss-Seidel.
pub fn solve_dtmc(
    model: &ExplicitModel,
    goal: &BitVector,
    reward: Option<&str>,
    env: &Environment,
) -> Result<CheckResult> {
    check_goal(model, goal)?;
    env.check()?;
    let m = &model.matrix;
    let n = model.num_states();
    if let Some(s) = (0..n).find(|&s| m.row_group_size(s) != 1) {
        return Err(Error::Unsupported(format!(
            "linear solving needs one choice per state; state {s} has {}",
            m.row_group_size(s)
        )));
    }
    let all = BitVector::ones(n);
    let q = prob01_max(model, &all, goal);
    let (red, fixed_value): (Reduced, Box<dyn Fn(usize) -> f64>) = match reward {
        None => {
            let fixed: Vec<f64> = (0..n).map(|s| if q.prob1.get(s) { 1.0 } else { 0.0 }).collect();
            let red = reduce(model, &q.maybe(), None, &fixed, &|_| true, &|_, _| 0.0);
            (red, Box::new(move |s| fixed[s]))
        }
        Some(name) => {
            reward_vectors_ok(model, name)?;
            let rm = model.reward_model(name)?;
            let unknown = q.prob1.difference(goal);
            let red = reduce(model, &unknown, None, &vec![0.0; n], &|_| true, &|s, r| rm.total(s, r));
            let goal = goal.clone();
            (red, Box::new(move |s| if goal.get(s) { 0.0 } else { f64::INFINITY }))
        }
    };
    let sys = &red.system;
    let policy = vec![0; sys.num_vars()];
    let x = sys.solve_linear(&policy, vec![0.0; sys.num_vars()], env.precision, env.max_iterations)?;
    Ok(CheckResult::scalar(red.expand(&x, fixed_value)))
}
