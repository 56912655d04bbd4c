use std::collections::HashMap;
use std::fmt;

use super::{ExplicitModel, ModelKind, ROW_SUM_TOLERANCE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationRule {
    EmptyRowGroup,
    DtmcRowCount,
    ColumnOrder,
    ColumnRange,
    ProbabilityRange,
    RowSum,
    IntervalBounds,
    IntervalRealizability,
    KindMismatch,
    InitialStates,
    LabelLength,
    RewardLength,
    NegativeReward,
    ChoiceLabelLength,
    ValuationShape,
    ObservationLength,
    ObservationActions,
}

impl fmt::Display for ViolationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationRule::EmptyRowGroup => "empty row group",
            ViolationRule::DtmcRowCount => "dtmc row count",
            ViolationRule::ColumnOrder => "column order",
            ViolationRule::ColumnRange => "column range",
            ViolationRule::ProbabilityRange => "probability range",
            ViolationRule::RowSum => "row sum",
            ViolationRule::IntervalBounds => "interval bounds",
            ViolationRule::IntervalRealizability => "interval realizability",
            ViolationRule::KindMismatch => "kind mismatch",
            ViolationRule::InitialStates => "initial states",
            ViolationRule::LabelLength => "label length",
            ViolationRule::RewardLength => "reward length",
            ViolationRule::NegativeReward => "negative reward",
            ViolationRule::ChoiceLabelLength => "choice label length",
            ViolationRule::ValuationShape => "valuation shape",
            ViolationRule::ObservationLength => "observation length",
            ViolationRule::ObservationActions => "observation actions",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub rule: ViolationRule,
    /// Where the rule fails, e.g. `state 3 row 7`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.rule, self.location, self.message)
    }
}

/// Checks every structural invariant of `model`; an empty list means valid.
pub fn validate(model: &ExplicitModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |rule, location: String, message: String| {
        out.push(Violation {
            rule,
            location,
            message,
        })
    };
    let m = &model.matrix;
    let n = m.num_states();

    if m.is_interval() != (model.kind == ModelKind::Imdp) {
        push(
            ViolationRule::KindMismatch,
            "matrix".into(),
            format!(
                "{} model with {} matrix",
                model.kind,
                if m.is_interval() { "interval" } else { "point" }
            ),
        );
    }

    for s in 0..n {
        let size = m.row_group_size(s);
        if size == 0 {
            push(ViolationRule::EmptyRowGroup, format!("state {s}"), "no choices".into());
        }
        if model.kind == ModelKind::Dtmc && size > 1 {
            push(
                ViolationRule::DtmcRowCount,
                format!("state {s}"),
                format!("{size} choices in a dtmc"),
            );
        }
        for r in m.row_group(s) {
            let row = m.row(r);
            let loc = || format!("state {s} row {r}");
            if row.columns.windows(2).any(|w| w[0] >= w[1]) {
                push(ViolationRule::ColumnOrder, loc(), "columns not strictly increasing".into());
            }
            if let Some(&c) = row.columns.iter().find(|&&c| c >= n) {
                push(ViolationRule::ColumnRange, loc(), format!("column {c} >= {n}"));
            }
            match row.upper {
                None => {
                    if let Some(v) = row.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                        push(ViolationRule::ProbabilityRange, loc(), format!("probability {v}"));
                    }
                    let sum: f64 = row.values.iter().sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                        push(ViolationRule::RowSum, loc(), format!("row sums to {sum}"));
                    }
                }
                Some(_) => {
                    let mut lo = 0.0;
                    let mut hi = 0.0;
                    for (c, l, u) in row.iter_intervals() {
                        if !(0.0 <= l && l <= u && u <= 1.0) {
                            push(
                                ViolationRule::IntervalBounds,
                                loc(),
                                format!("column {c} has interval [{l}, {u}]"),
                            );
                        }
                        lo += l;
                        hi += u;
                    }
                    if lo > 1.0 + ROW_SUM_TOLERANCE || hi < 1.0 - ROW_SUM_TOLERANCE {
                        push(
                            ViolationRule::IntervalRealizability,
                            loc(),
                            format!("sum of lower bounds {lo}, sum of upper bounds {hi}"),
                        );
                    }
                }
            }
        }
    }

    if model.initial_states.len() != n || (n > 0 && model.initial_states.count_ones() != 1) {
        push(
            ViolationRule::InitialStates,
            "initial".into(),
            format!(
                "expected exactly one initial state among {n}, found {}",
                model.initial_states.count_ones()
            ),
        );
    }
    for (name, bv) in &model.labels {
        if bv.len() != n {
            push(
                ViolationRule::LabelLength,
                format!("label \"{name}\""),
                format!("length {} for {n} states", bv.len()),
            );
        }
    }
    for (name, rm) in &model.reward_models {
        let loc = format!("reward \"{name}\"");
        if let Some(v) = &rm.state {
            if v.len() != n {
                push(ViolationRule::RewardLength, loc.clone(), format!("{} state rewards", v.len()));
            }
            if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
                push(ViolationRule::NegativeReward, format!("{loc} state {i}"), format!("reward {x}"));
            }
        }
        if let Some(v) = &rm.choice {
            if v.len() != m.num_rows() {
                push(ViolationRule::RewardLength, loc.clone(), format!("{} choice rewards", v.len()));
            }
            if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
                push(ViolationRule::NegativeReward, format!("{loc} row {i}"), format!("reward {x}"));
            }
        }
    }
    if let Some(cl) = &model.choice_labels {
        if cl.len() != m.num_rows() {
            push(
                ViolationRule::ChoiceLabelLength,
                "choice labels".into(),
                format!("{} labels for {} rows", cl.len(), m.num_rows()),
            );
        }
    }
    if let Some(v) = &model.valuations {
        if v.values.len() != n || v.values.iter().any(|row| row.len() != v.variables.len()) {
            push(ViolationRule::ValuationShape, "valuations".into(), "shape mismatch".into());
        }
    }

    match (&model.observations, model.kind) {
        (Some(obs), ModelKind::Pomdp) => {
            if obs.len() != n {
                push(
                    ViolationRule::ObservationLength,
                    "observations".into(),
                    format!("{} observations for {n} states", obs.len()),
                );
            } else {
                // Equal observation must imply equal enabled actions.
                let mut seen: HashMap<u32, (usize, Vec<Option<&str>>)> = HashMap::new();
                for s in 0..n {
                    let mut acts: Vec<Option<&str>> =
                        m.row_group(s).map(|r| model.choice_label(r)).collect();
                    acts.sort();
                    match seen.get(&obs[s]) {
                        None => {
                            seen.insert(obs[s], (s, acts));
                        }
                        Some((rep, rep_acts)) if *rep_acts != acts => push(
                            ViolationRule::ObservationActions,
                            format!("state {s}"),
                            format!(
                                "observation {} shared with state {rep} but enabled actions differ",
                                obs[s]
                            ),
                        ),
                        Some(_) => {}
                    }
                }
            }
        }
        (None, ModelKind::Pomdp) => push(
            ViolationRule::ObservationLength,
            "observations".into(),
            "pomdp without observations".into(),
        ),
        (Some(_), kind) => push(
            ViolationRule::KindMismatch,
            "observations".into(),
            format!("observations on a {kind}"),
        ),
        (None, _) => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MatrixBuilder;

    fn two_state(kind: ModelKind, row0: &[(usize, f64)]) -> ExplicitModel {
        let mut b = MatrixBuilder::new(false);
        b.new_row_group();
        b.push_row(row0.iter().copied());
        b.new_row_group();
        b.push_row([(1, 1.0)]);
        ExplicitModel::new(kind, b.finish(), 0)
    }

    #[test]
    fn valid_chain_has_no_violations() {
        assert!(validate(&two_state(ModelKind::Dtmc, &[(0, 0.5), (1, 0.5)])).is_empty());
    }

    #[test]
    fn short_row_sum_is_reported_once() {
        let v = validate(&two_state(ModelKind::Mdp, &[(0, 0.4), (1, 0.5)]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, ViolationRule::RowSum);
        assert!(v[0].location.contains("row 0"));
    }

    #[test]
    fn unrealizable_interval_row() {
        let mut b = MatrixBuilder::new(true);
        b.new_row_group();
        b.push_interval_row([(0, 0.1, 0.4), (1, 0.1, 0.4)]);
        b.new_row_group();
        b.push_interval_row([(1, 1.0, 1.0)]);
        let m = ExplicitModel::new(ModelKind::Imdp, b.finish(), 0);
        let v = validate(&m);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, ViolationRule::IntervalRealizability);
    }

    #[test]
    fn dtmc_with_two_choices() {
        let mut b = MatrixBuilder::new(false);
        b.new_row_group();
        b.push_row([(0, 1.0)]);
        b.push_row([(0, 1.0)]);
        let m = ExplicitModel::new(ModelKind::Dtmc, b.finish(), 0);
        assert_eq!(validate(&m)[0].rule, ViolationRule::DtmcRowCount);
    }

    #[test]
    fn observation_with_different_actions() {
        let mut b = MatrixBuilder::new(false);
        b.new_row_group();
        b.push_row([(1, 1.0)]);
        b.new_row_group();
        b.push_row([(1, 1.0)]);
        let mut m = ExplicitModel::new(ModelKind::Mdp, b.finish(), 0);
        m.choice_labels = Some(vec![Some("a".into()), Some("b".into())]);
        assert!(m.clone().with_observations(vec![0, 0]).is_err());
        m.kind = ModelKind::Pomdp;
        m.observations = Some(vec![0, 0]);
        let v = validate(&m);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, ViolationRule::ObservationActions);
    }

    #[test]
    fn negative_reward() {
        let mut m = two_state(ModelKind::Dtmc, &[(1, 1.0)]);
        m.reward_models.insert(
            "r".into(),
            crate::model::RewardModel {
                state: Some(vec![1.0, -1.0]),
                choice: None,
            },
        );
        assert_eq!(validate(&m)[0].rule, ViolationRule::NegativeReward);
    }
}
