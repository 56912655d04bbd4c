use serde::{Deserialize, Serialize};

use super::{ExplicitModel, MatrixBuilder, ModelKind, RewardModel};
use crate::error::{Error, Result};

/// Memoryless deterministic scheduler: a local choice index per state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scheduler {
    pub choices: Vec<usize>,
}

impl Scheduler {
    pub fn new(choices: Vec<usize>) -> Self {
        Scheduler { choices }
    }

    /// Always picks the first choice.
    pub fn lowest(num_states: usize) -> Self {
        Scheduler {
            choices: vec![0; num_states],
        }
    }

    pub fn check(&self, model: &ExplicitModel) -> Result<()> {
        if self.choices.len() != model.num_states() {
            return Err(Error::InvalidScheduler(format!(
                "{} choices for {} states",
                self.choices.len(),
                model.num_states()
            )));
        }
        for (s, &c) in self.choices.iter().enumerate() {
            let size = model.matrix.row_group_size(s);
            if c >= size {
                return Err(Error::InvalidScheduler(format!(
                    "state {s} selects choice {c} but has {size}"
                )));
            }
        }
        Ok(())
    }

    /// Global row selected at `state`.
    pub fn row(&self, model: &ExplicitModel, state: usize) -> usize {
        model.matrix.row_group(state).start + self.choices[state]
    }
}

/// Induced chain of `model` under `scheduler`.
pub fn apply_scheduler(model: &ExplicitModel, scheduler: &Scheduler) -> Result<ExplicitModel> {
    if !matches!(model.kind, ModelKind::Mdp | ModelKind::Dtmc) {
        return Err(Error::Unsupported(format!(
            "applying a scheduler to a {} model",
            model.kind
        )));
    }
    scheduler.check(model)?;
    let n = model.num_states();
    let rows: Vec<usize> = (0..n).map(|s| scheduler.row(model, s)).collect();
    let mut b = MatrixBuilder::new(false);
    for &r in &rows {
        b.new_row_group();
        b.push_row(model.matrix.row(r).iter());
    }
    let reward_models = model
        .reward_models
        .iter()
        .map(|(name, rm)| {
            let choice = rm
                .choice
                .as_ref()
                .map(|c| rows.iter().map(|&r| c[r]).collect());
            (
                name.clone(),
                RewardModel {
                    state: rm.state.clone(),
                    choice,
                },
            )
        })
        .collect();
    Ok(ExplicitModel {
        kind: ModelKind::Dtmc,
        matrix: b.finish(),
        initial_states: model.initial_states.clone(),
        labels: model.labels.clone(),
        reward_models,
        choice_labels: model
            .choice_labels
            .as_ref()
            .map(|cl| rows.iter().map(|&r| cl[r].clone()).collect()),
        valuations: model.valuations.clone(),
        observations: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    fn small_mdp() -> ExplicitModel {
        let mut b = MatrixBuilder::new(false);
        b.new_row_group();
        b.push_row([(1, 1.0)]);
        b.push_row([(0, 0.5), (1, 0.5)]);
        b.new_row_group();
        b.push_row([(1, 1.0)]);
        let mut m = ExplicitModel::new(ModelKind::Mdp, b.finish(), 0);
        m.reward_models.insert(
            "r".into(),
            RewardModel {
                state: None,
                choice: Some(vec![1.0, 2.0, 0.0]),
            },
        );
        m
    }

    #[test]
    fn induced_chain_takes_selected_rows() {
        let m = small_mdp();
        let d = apply_scheduler(&m, &Scheduler::new(vec![1, 0])).unwrap();
        assert_eq!(d.kind, ModelKind::Dtmc);
        assert_eq!(d.matrix.row(0).values, &[0.5, 0.5]);
        assert_eq!(d.reward_models["r"].choice.as_deref(), Some(&[2.0, 0.0][..]));
        assert!(validate(&d).is_empty());
        assert_eq!(d.labels, m.labels);
    }

    #[test]
    fn out_of_range_choice_is_rejected() {
        let err = apply_scheduler(&small_mdp(), &Scheduler::new(vec![0, 1])).unwrap_err();
        assert!(matches!(err, Error::InvalidScheduler(_)));
    }

    #[test]
    fn identity_on_single_choice_models() {
        let mut b = MatrixBuilder::new(false);
        b.new_row_group();
        b.push_row([(0, 0.3), (1, 0.7)]);
        b.new_row_group();
        b.push_row([(1, 1.0)]);
        let m = ExplicitModel::new(ModelKind::Mdp, b.finish(), 0);
        let d = apply_scheduler(&m, &Scheduler::lowest(2)).unwrap();
        assert_eq!(d.matrix, m.matrix);
    }
}
