//! Strong bisimulation minimisation by signature-based partition refinement.

use std::collections::{BTreeMap, HashMap};

use crate::bitvec::BitVector;
use crate::error::{Error, Result};
use crate::model::{ExplicitModel, MatrixBuilder, ModelKind, RewardModel};

/// Block index per state, dense in `0..num_blocks`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub block_of: Vec<usize>,
    pub num_blocks: usize,
}

impl Partition {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.block_of).expect("partition serializes")
    }
}

#[derive(Clone, Debug, Default)]
pub struct BisimulationOptions {
    /// Labels that must be respected; `"init"` is always kept.
    pub labels: Vec<String>,
    /// Keep all reward structures (state and choice rewards).
    pub rewards: bool,
    /// Make action names part of the signature.
    pub action_labels: bool,
}

// Probabilities compared after rounding to 12 decimals.
fn quantize(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

/// Signature of one choice: action, rewards and lifted distribution.
type ChoiceSig = (Option<String>, Vec<i64>, Vec<(usize, i64)>);

fn choice_signature(
    model: &ExplicitModel,
    row: usize,
    block_of: &[usize],
    rewards: &[&RewardModel],
    with_action: bool,
) -> ChoiceSig {
    let mut lifted: BTreeMap<usize, f64> = BTreeMap::new();
    for (t, p) in model.matrix.row(row).iter() {
        if p > 0.0 {
            *lifted.entry(block_of[t]).or_insert(0.0) += p;
        }
    }
    let action = if with_action { model.choice_label(row).map(str::to_string) } else { None };
    let rew = rewards
        .iter()
        .map(|r| quantize(r.choice.as_ref().map_or(0.0, |c| c[row])))
        .collect();
    (action, rew, lifted.into_iter().map(|(b, p)| (b, quantize(p))).collect())
}

/// Renumbers keys densely in order of first occurrence.
fn renumber<K: std::hash::Hash + Eq>(keys: Vec<K>) -> (Vec<usize>, usize) {
    let mut ids: HashMap<K, usize> = HashMap::new();
    let mut out = Vec::with_capacity(keys.len());
    for k in keys {
        let n = ids.len();
        out.push(*ids.entry(k).or_insert(n));
    }
    (out, ids.len())
}

/// Coarsest strong bisimulation respecting the chosen labels and rewards,
/// and the quotient model with one state per block.
pub fn bisimulation_quotient(model: &ExplicitModel, options: &BisimulationOptions) -> Result<(ExplicitModel, Partition)> {
    if !matches!(model.kind, ModelKind::Dtmc | ModelKind::Mdp) {
        return Err(Error::Unsupported(format!("bisimulation on {} models", model.kind)));
    }
    let n = model.num_states();
    let mut labels: Vec<(&str, &BitVector)> = Vec::new();
    for l in &options.labels {
        labels.push((l, model.label(l)?));
    }
    if let Some(init) = model.labels.get(crate::explore::INIT_LABEL) {
        if !options.labels.iter().any(|l| l == crate::explore::INIT_LABEL) {
            labels.push((crate::explore::INIT_LABEL, init));
        }
    }
    let rewards: Vec<(&String, &RewardModel)> = if options.rewards { model.reward_models.iter().collect() } else { Vec::new() };
    let reward_refs: Vec<&RewardModel> = rewards.iter().map(|r| r.1).collect();

    let initial_keys: Vec<(Vec<bool>, Vec<i64>)> = (0..n)
        .map(|s| {
            (
                labels.iter().map(|(_, bv)| bv.get(s)).collect(),
                reward_refs.iter().map(|r| quantize(r.state.as_ref().map_or(0.0, |v| v[s]))).collect(),
            )
        })
        .collect();
    let (mut block_of, mut num_blocks) = renumber(initial_keys);
    loop {
        let keys: Vec<(usize, Vec<ChoiceSig>)> = (0..n)
            .map(|s| {
                let mut sig: Vec<ChoiceSig> = model
                    .matrix
                    .row_group(s)
                    .map(|r| choice_signature(model, r, &block_of, &reward_refs, options.action_labels))
                    .collect();
                sig.sort();
                sig.dedup();
                (block_of[s], sig)
            })
            .collect();
        let (next, count) = renumber(keys);
        block_of = next;
        if count == num_blocks {
            break;
        }
        num_blocks = count;
    }
    let partition = Partition { block_of, num_blocks };
    Ok((quotient(model, &partition, &labels, &rewards, options.action_labels), partition))
}

fn quotient(
    model: &ExplicitModel,
    partition: &Partition,
    labels: &[(&str, &BitVector)],
    rewards: &[(&String, &RewardModel)],
    with_action: bool,
) -> ExplicitModel {
    let k = partition.num_blocks;
    let block_of = &partition.block_of;
    let mut rep = vec![usize::MAX; k];
    for (s, &b) in block_of.iter().enumerate().rev() {
        rep[b] = s;
    }
    let reward_refs: Vec<&RewardModel> = rewards.iter().map(|r| r.1).collect();
    let mut builder = MatrixBuilder::new(false);
    let mut choice_labels = Vec::new();
    let mut choice_rewards: Vec<Vec<f64>> = vec![Vec::new(); rewards.len()];
    for &s in &rep {
        builder.new_row_group();
        let mut seen: Vec<ChoiceSig> = Vec::new();
        for r in model.matrix.row_group(s) {
            let sig = choice_signature(model, r, block_of, &reward_refs, with_action);
            if seen.contains(&sig) {
                continue;
            }
            seen.push(sig);
            let mut lifted: BTreeMap<usize, f64> = BTreeMap::new();
            for (t, p) in model.matrix.row(r).iter() {
                if p > 0.0 {
                    *lifted.entry(block_of[t]).or_insert(0.0) += p;
                }
            }
            builder.push_row(lifted);
            choice_labels.push(model.choice_label(r).map(str::to_string));
            for (i, rm) in reward_refs.iter().enumerate() {
                choice_rewards[i].push(rm.choice.as_ref().map_or(0.0, |c| c[r]));
            }
        }
    }
    let mut q = ExplicitModel::new(model.kind, builder.finish(), block_of[model.initial_state()]);
    q.initial_states = BitVector::from_indices(k, model.initial_states.iter_ones().map(|s| block_of[s]));
    for (name, bv) in labels {
        q.labels.insert(name.to_string(), BitVector::from_fn(k, |b| bv.get(rep[b])));
    }
    for ((name, rm), choice) in rewards.iter().zip(choice_rewards) {
        q.reward_models.insert(
            name.to_string(),
            RewardModel {
                state: rm.state.as_ref().map(|v| rep.iter().map(|&s| v[s]).collect()),
                choice: rm.choice.as_ref().map(|_| choice),
            },
        );
    }
    if model.choice_labels.is_some() {
        q.choice_labels = Some(choice_labels);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::{check_reachability, Direction, Environment};

    // Two symmetric branches 1 and 2 that both reach goal 3 w.p. 1/2.
    fn diamond() -> ExplicitModel {
        let mut b = MatrixBuilder::new(false);
        b.new_row_group();
        b.push_row([(1, 0.5), (2, 0.5)]);
        for _ in 0..2 {
            b.new_row_group();
            b.push_row([(3, 0.5), (4, 0.5)]);
        }
        for s in [3, 4] {
            b.new_row_group();
            b.push_row([(s, 1.0)]);
        }
        let mut m = ExplicitModel::new(ModelKind::Dtmc, b.finish(), 0);
        m.labels.insert("goal".into(), BitVector::from_indices(5, [3]));
        m
    }

    #[test]
    fn merges_symmetric_states() {
        let m = diamond();
        let opts = BisimulationOptions {
            labels: vec!["goal".into()],
            ..Default::default()
        };
        let (q, p) = bisimulation_quotient(&m, &opts).unwrap();
        assert_eq!(p.num_blocks, 4);
        assert_eq!(p.block_of[1], p.block_of[2]);
        assert!(crate::model::validate(&q).is_empty());
        let env = Environment::default();
        let v = check_reachability(&q, q.label("goal").unwrap(), Direction::Max, &env, false).unwrap();
        assert!((v.at(q.initial_state()) - 0.5).abs() < 1e-12);
        let (q2, p2) = bisimulation_quotient(&q, &opts).unwrap();
        assert_eq!(p2.num_blocks, q.num_states());
        assert_eq!(q2.num_states(), q.num_states());
    }

    #[test]
    fn distinct_labels_give_identity() {
        let mut m = diamond();
        for s in 0..5 {
            m.labels.insert(format!("s{s}"), BitVector::from_indices(5, [s]));
        }
        let opts = BisimulationOptions {
            labels: (0..5).map(|s| format!("s{s}")).collect(),
            ..Default::default()
        };
        let (q, p) = bisimulation_quotient(&m, &opts).unwrap();
        assert_eq!(p.block_of, vec![0, 1, 2, 3, 4]);
        assert_eq!(q.matrix, m.matrix);
    }
}
