use super::system::System;
use super::{CheckResult, Direction, Environment, Method};
use crate::bitvec::BitVector;
use crate::error::{Error, Result};
use crate::model::{ExplicitModel, ModelKind};

/// Optimal probability of reaching `goal` with accumulated reward at most `k`.
///
/// Solved epoch by epoch over the remaining budget `j = 0..=k`: rows with
/// positive reward `c` read the already solved epoch `j - c` (or yield 0 if
/// `c > j`), zero-reward rows stay within epoch `j`. This is the
/// reward-counter product restricted to its reachable layers.
pub fn check_bounded_reachability(
    model: &ExplicitModel,
    reward: &str,
    k: u64,
    goal: &BitVector,
    dir: Direction,
    env: &Environment,
) -> Result<CheckResult> {
    if !matches!(model.kind, ModelKind::Dtmc | ModelKind::Mdp) {
        return Err(Error::Unsupported(format!("reward-bounded reachability on {} models", model.kind)));
    }
    env.check()?;
    let m = &model.matrix;
    let n = model.num_states();
    if goal.len() != n {
        return Err(Error::Semantic("goal set size does not match the model".into()));
    }
    let rm = model.reward_model(reward)?;
    let owners = m.row_owners();
    let mut cost = Vec::with_capacity(m.num_rows());
    for (r, &s) in owners.iter().enumerate() {
        let c = rm.total(s, r);
        if !(c >= 0.0 && c.fract() == 0.0 && c < u32::MAX as f64) {
            return Err(Error::Unsupported(format!(
                "reward-bounded reachability needs non-negative integer rewards; row {r} has {c}"
            )));
        }
        cost.push(c as u64);
    }
    let k = usize::try_from(k).map_err(|_| Error::Config("bound too large".into()))?;

    let unknown: Vec<usize> = (0..n).filter(|&s| !goal.get(s)).collect();
    let mut var_of = vec![usize::MAX; n];
    for (v, &s) in unknown.iter().enumerate() {
        var_of[s] = v;
    }
    let in_place = env.method != Method::ValueIteration;
    let mut epochs: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    let mut entries = Vec::new();
    for j in 0..=k {
        let mut sys = System::new();
        sys.cap = 1.0;
        for &s in &unknown {
            for r in m.row_group(s) {
                let c = cost[r] as usize;
                entries.clear();
                let mut b = 0.0;
                let mut exit = 0.0;
                if c == 0 {
                    for (t, p) in m.row(r).iter() {
                        if goal.get(t) {
                            b += p;
                            exit += p;
                        } else if p > 0.0 {
                            entries.push((var_of[t], p));
                        }
                    }
                } else if c <= j {
                    let prev = &epochs[j - c];
                    for (t, p) in m.row(r).iter() {
                        b += p * if goal.get(t) { 1.0 } else { prev[t] };
                    }
                    exit = 1.0;
                } else {
                    exit = 1.0;
                }
                sys.push_row(b, exit, &entries, r);
            }
            sys.finish_var();
        }
        // Values grow with the budget, so the previous epoch is a valid start from below.
        let x0 = match epochs.last() {
            Some(prev) => unknown.iter().map(|&s| prev[s]).collect(),
            None => vec![0.0; unknown.len()],
        };
        let x = sys.value_iteration(dir, env, x0, in_place)?;
        let mut full = vec![1.0; n];
        for (v, &s) in unknown.iter().enumerate() {
            full[s] = x[v].clamp(0.0, 1.0);
        }
        epochs.push(full);
    }
    Ok(CheckResult::scalar(epochs.pop().expect("at least one epoch")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::check_reachability;
    use crate::model::{MatrixBuilder, RewardModel};

    // Geometric: each step costs 1 and hits the goal w.p. 1/2.
    fn geometric() -> ExplicitModel {
        let mut b = MatrixBuilder::new(false);
        b.new_row_group();
        b.push_row([(0, 0.5), (1, 0.5)]);
        b.new_row_group();
        b.push_row([(1, 1.0)]);
        let mut m = ExplicitModel::new(ModelKind::Dtmc, b.finish(), 0);
        m.reward_models.insert(
            "steps".into(),
            RewardModel {
                state: None,
                choice: Some(vec![1.0, 0.0]),
            },
        );
        m
    }

    #[test]
    fn geometric_bound() {
        let m = geometric();
        let goal = BitVector::from_indices(2, [1]);
        let env = Environment::default();
        for k in 0..6u64 {
            let r = check_bounded_reachability(&m, "steps", k, &goal, Direction::Max, &env).unwrap();
            let exact = 1.0 - 0.5f64.powi(k as i32);
            assert!((r.at(0) - exact).abs() < 1e-9, "k={k}: {}", r.at(0));
        }
        let unbounded = check_reachability(&m, &goal, Direction::Max, &env, false).unwrap();
        let far = check_bounded_reachability(&m, "steps", 60, &goal, Direction::Max, &env).unwrap();
        assert!((far.at(0) - unbounded.at(0)).abs() < 1e-6);
    }

    #[test]
    fn zero_bound_at_goal() {
        let m = geometric();
        let goal = BitVector::from_indices(2, [0]);
        let r = check_bounded_reachability(&m, "steps", 0, &goal, Direction::Max, &Environment::default()).unwrap();
        assert_eq!(r.at(0), 1.0);
    }

    #[test]
    fn fractional_rewards_rejected() {
        let mut m = geometric();
        m.reward_models.get_mut("steps").unwrap().choice = Some(vec![0.5, 0.0]);
        let goal = BitVector::from_indices(2, [1]);
        let err = check_bounded_reachability(&m, "steps", 3, &goal, Direction::Max, &Environment::default());
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }
}
