//! Dispatch of parsed properties to the engine matching the model kind.

use crate::engines::{
    check_bounded_reachability, check_reachability, check_total_reward, CheckResult, Direction, Environment,
};
use crate::error::{Error, Result};
use crate::model::{ExplicitModel, ModelKind};
use crate::props::{evaluate_state_formula, Operator, PropertyAst};
use crate::uncertain::{check_interval_reachability, UncertaintyMode};

#[derive(Clone, Debug, Default)]
pub struct CheckOptions {
    pub env: Environment,
    pub extract_scheduler: bool,
    /// Required for interval models.
    pub uncertainty: Option<UncertaintyMode>,
}

fn direction(model: &ExplicitModel, prop: &PropertyAst) -> Result<Direction> {
    match (prop.direction, model.kind) {
        (Some(d), _) => Ok(d),
        (None, ModelKind::Dtmc) => Ok(Direction::Max),
        (None, _) => Err(Error::Unsupported(format!(
            "\"{prop}\" has no min/max, which is ambiguous on a nondeterministic {} model",
            model.kind
        ))),
    }
}

/// Checks `prop` on every state of `model`.
pub fn check_property(model: &ExplicitModel, prop: &PropertyAst, options: &CheckOptions) -> Result<CheckResult> {
    let goal = evaluate_state_formula(model, &prop.formula)?;
    if prop.operator == Operator::LabelQuery {
        return Ok(CheckResult::scalar(
            (0..model.num_states()).map(|s| if goal.get(s) { 1.0 } else { 0.0 }).collect(),
        ));
    }
    let dir = direction(model, prop)?;
    let env = &options.env;
    match model.kind {
        ModelKind::Pomdp => Err(Error::Unsupported(
            "POMDP properties need belief exploration (check-pomdp) or the fully observable relaxation".into(),
        )),
        ModelKind::Imdp => {
            let mode = options.uncertainty.ok_or_else(|| {
                Error::Unsupported("interval models need an uncertainty resolution mode (robust or cooperative)".into())
            })?;
            match (&prop.operator, &prop.reward_bound) {
                (Operator::Probability, None) => check_interval_reachability(model, &goal, dir, mode, env),
                _ => Err(Error::Unsupported(
                    "only unbounded reachability probabilities are supported on interval models".into(),
                )),
            }
        }
        ModelKind::Dtmc | ModelKind::Mdp => match (&prop.operator, &prop.reward_bound) {
            (Operator::Probability, None) => check_reachability(model, &goal, dir, env, options.extract_scheduler),
            (Operator::Probability, Some(rb)) => {
                check_bounded_reachability(model, &rb.reward, rb.bound, &goal, dir, env)
            }
            (Operator::Reward(r), _) => check_total_reward(model, r, &goal, dir, env, options.extract_scheduler),
            (Operator::LabelQuery, _) => unreachable!("handled above"),
        },
    }
}
