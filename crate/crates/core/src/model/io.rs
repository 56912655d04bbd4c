//! Model JSON format.
//!
//! ```json
//! {"kind": "mdp", "numStates": 2, "initial": [0], "rowGroupOffsets": [0, 1, 2],
//!  "rows": [{"label": "a", "entries": [[1, 1.0]]}, {"entries": [[1, [0.5, 1.0]]]}],
//!  "labels": {"goal": [1]}, "rewards": {"r": {"choice": [1, 0]}}}
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{validate, ExplicitModel, ModelKind, RewardModel, SparseChoiceMatrix, StateValuations};
use crate::bitvec::BitVector;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ModelFile {
    kind: ModelKind,
    num_states: usize,
    initial: Vec<usize>,
    row_group_offsets: Vec<usize>,
    rows: Vec<RowFile>,
    #[serde(default)]
    labels: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    rewards: BTreeMap<String, RewardFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observations: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    valuations: Option<Vec<Map<String, Value>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    entries: Vec<(usize, EntryValue)>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EntryValue {
    Point(f64),
    Interval([f64; 2]),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choice: Option<Vec<f64>>,
}

pub fn write_model(model: &ExplicitModel) -> String {
    let m = &model.matrix;
    let rows = (0..m.num_rows())
        .map(|r| {
            let row = m.row(r);
            let entries = match row.upper {
                None => row.iter().map(|(c, v)| (c, EntryValue::Point(v))).collect(),
                Some(_) => row
                    .iter_intervals()
                    .map(|(c, l, u)| (c, EntryValue::Interval([l, u])))
                    .collect(),
            };
            RowFile {
                label: model.choice_label(r).map(str::to_string),
                entries,
            }
        })
        .collect();
    let file = ModelFile {
        kind: model.kind,
        num_states: model.num_states(),
        initial: model.initial_states.iter_ones().collect(),
        row_group_offsets: m.row_group_offsets().to_vec(),
        rows,
        labels: model
            .labels
            .iter()
            .map(|(k, v)| (k.clone(), v.iter_ones().collect()))
            .collect(),
        rewards: model
            .reward_models
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    RewardFile {
                        state: v.state.clone(),
                        choice: v.choice.clone(),
                    },
                )
            })
            .collect(),
        observations: model.observations.clone(),
        valuations: model.valuations.as_ref().map(|v| {
            v.values
                .iter()
                .map(|row| {
                    v.variables
                        .iter()
                        .zip(row)
                        .map(|(name, &x)| (name.clone(), Value::from(x)))
                        .collect()
                })
                .collect()
        }),
    };
    serde_json::to_string(&file).expect("model serialization cannot fail")
}

pub fn read_model(text: &str) -> Result<ExplicitModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::format(path, e.into_inner().to_string())
    })?;
    from_file(file)
}

fn from_file(f: ModelFile) -> Result<ExplicitModel> {
    let n = f.num_states;
    if f.row_group_offsets.len() != n + 1 {
        return Err(Error::format(
            "rowGroupOffsets",
            format!("expected {} entries, found {}", n + 1, f.row_group_offsets.len()),
        ));
    }
    let interval = f.kind == ModelKind::Imdp;
    let mut row_offsets = vec![0];
    let mut columns = Vec::new();
    let mut values = Vec::new();
    let mut upper = Vec::new();
    let mut choice_labels = Vec::with_capacity(f.rows.len());
    for (ri, row) in f.rows.into_iter().enumerate() {
        for (ei, (c, v)) in row.entries.into_iter().enumerate() {
            let path = || format!("rows[{ri}].entries[{ei}]");
            if c >= n {
                return Err(Error::format(path(), format!("column {c} out of range")));
            }
            let (l, u) = match (v, interval) {
                (EntryValue::Point(p), false) => (p, p),
                (EntryValue::Interval([l, u]), true) => (l, u),
                (EntryValue::Point(_), true) => {
                    return Err(Error::format(path(), "imdp entries must be intervals"))
                }
                (EntryValue::Interval(_), false) => {
                    return Err(Error::format(path(), "interval entry in a point model"))
                }
            };
            if !(0.0..=1.0).contains(&l) || !(0.0..=1.0).contains(&u) || l > u {
                return Err(Error::format(
                    path(),
                    format!("probability out of range: [{l}, {u}]"),
                ));
            }
            columns.push(c);
            values.push(l);
            upper.push(u);
        }
        row_offsets.push(columns.len());
        choice_labels.push(row.label);
    }
    let matrix = SparseChoiceMatrix::from_parts(
        f.row_group_offsets,
        row_offsets,
        columns,
        values,
        interval.then_some(upper),
    )
    .map_err(|e| Error::format("rowGroupOffsets", e))?;

    let bits = |what: String, idx: Vec<usize>| -> Result<BitVector> {
        if let Some(&i) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::format(what, format!("state {i} out of range")));
        }
        Ok(BitVector::from_indices(n, idx))
    };
    let initial_states = bits("initial".into(), f.initial)?;
    let mut labels = BTreeMap::new();
    for (name, idx) in f.labels {
        let bv = bits(format!("labels.{name}"), idx)?;
        labels.insert(name, bv);
    }
    let reward_models = f
        .rewards
        .into_iter()
        .map(|(k, v)| {
            (
                k,
                RewardModel {
                    state: v.state,
                    choice: v.choice,
                },
            )
        })
        .collect();
    let valuations = match f.valuations {
        None => None,
        Some(rows) => {
            let variables: Vec<String> = rows.first().map_or(Vec::new(), |r| r.keys().cloned().collect());
            let mut values = Vec::with_capacity(rows.len());
            for (i, row) in rows.into_iter().enumerate() {
                let keys: Vec<&String> = row.keys().collect();
                if keys.len() != variables.len() || keys.iter().zip(&variables).any(|(a, b)| *a != b) {
                    return Err(Error::format(format!("valuations[{i}]"), "inconsistent variables"));
                }
                let vals = row
                    .values()
                    .map(|v| {
                        v.as_i64().ok_or_else(|| {
                            Error::format(format!("valuations[{i}]"), "values must be integers")
                        })
                    })
                    .collect::<Result<Vec<i64>>>()?;
                values.push(vals);
            }
            Some(StateValuations { variables, values })
        }
    };
    let has_labels = choice_labels.iter().any(Option::is_some);
    let model = ExplicitModel {
        kind: f.kind,
        matrix,
        initial_states,
        labels,
        reward_models,
        choice_labels: has_labels.then_some(choice_labels),
        valuations,
        observations: f.observations,
    };
    if let Some(v) = validate(&model).into_iter().next() {
        return Err(Error::format(v.location.clone(), format!("{}: {}", v.rule, v.message)));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_probability_names_entry() {
        let text = r#"{"kind":"dtmc","numStates":1,"initial":[0],"rowGroupOffsets":[0,1],
            "rows":[{"entries":[[0,-0.5]]}]}"#;
        match read_model(text).unwrap_err() {
            Error::Format { path, .. } => assert_eq!(path, "rows[0].entries[0]"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn schema_error_names_path() {
        let text = r#"{"kind":"mdp","numStates":1,"initial":[0],"rowGroupOffsets":[0,1],
            "rows":[{"entries":[[0,"x"]]}]}"#;
        match read_model(text).unwrap_err() {
            Error::Format { path, .. } => assert!(path.starts_with("rows[0].entries"), "{path}"),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(read_model("{").unwrap_err(), Error::Format { .. }));
    }

    #[test]
    fn invariant_violation_is_reported() {
        let text = r#"{"kind":"dtmc","numStates":1,"initial":[0],"rowGroupOffsets":[0,1],
            "rows":[{"entries":[[0,0.5]]}]}"#;
        let err = read_model(text).unwrap_err().to_string();
        assert!(err.contains("row sum"), "{err}");
    }

    #[test]
    fn interval_round_trip_is_exact() {
        let text = r#"{"kind":"imdp","numStates":2,"initial":[0],"rowGroupOffsets":[0,1,2],
            "rows":[{"entries":[[0,[0.1388888888888889,0.19444444444444445]],[1,[0.8,0.9]]]},
                    {"entries":[[1,[1,1]]]}]}"#;
        let m = read_model(text).unwrap();
        let again = read_model(&write_model(&m)).unwrap();
        assert_eq!(m, again);
        assert_eq!(again.matrix.row(0).upper.unwrap()[0], 7.0 / 36.0);
    }
}
