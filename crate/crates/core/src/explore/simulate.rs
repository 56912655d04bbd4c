use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ExplicitModel, ModelKind, Scheduler};

#[derive(Clone, Debug)]
pub enum Policy {
    Scheduler(Scheduler),
    UniformRandom,
}

#[derive(Clone, Debug)]
pub struct SimulationOptions {
    pub seed: u64,
    pub max_steps: usize,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    pub state: usize,
    /// Action taken here; `None` on the final step.
    pub action: Option<String>,
    /// Rewards accumulated before this step.
    pub reward: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trace {
    pub seed: u64,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn last_state(&self) -> usize {
        self.steps.last().map_or(0, |s| s.state)
    }
}

fn is_absorbing(model: &ExplicitModel, s: usize) -> bool {
    let g = model.matrix.row_group(s);
    g.len() == 1 && model.matrix.row(g.start).columns == [s]
}

fn run(model: &ExplicitModel, policy: &Policy, seed: u64, max_steps: usize) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc: BTreeMap<String, f64> = model.reward_models.keys().map(|k| (k.clone(), 0.0)).collect();
    let mut s = model.initial_state();
    let mut steps = Vec::new();
    for _ in 0..max_steps {
        if is_absorbing(model, s) {
            break;
        }
        let g = model.matrix.row_group(s);
        let r = match policy {
            Policy::Scheduler(sc) => sc.row(model, s),
            Policy::UniformRandom => rng.gen_range(g),
        };
        steps.push(TraceStep {
            state: s,
            action: Some(model.choice_label(r).unwrap_or("").to_string()),
            reward: acc.clone(),
        });
        for (name, rm) in &model.reward_models {
            *acc.get_mut(name).expect("reward key") += rm.total(s, r);
        }
        let row = model.matrix.row(r);
        let mut u: f64 = rng.gen();
        let mut next = *row.columns.last().expect("nonempty row");
        for (c, p) in row.iter() {
            if u < p {
                next = c;
                break;
            }
            u -= p;
        }
        s = next;
    }
    steps.push(TraceStep {
        state: s,
        action: None,
        reward: acc,
    });
    Trace { seed, steps }
}

/// Samples `runs` paths from the initial state. Run `i` uses seed `seed + i`,
/// so results do not depend on thread scheduling.
pub fn simulate(model: &ExplicitModel, policy: &Policy, options: &SimulationOptions) -> Result<Vec<Trace>> {
    if !matches!(model.kind, ModelKind::Dtmc | ModelKind::Mdp | ModelKind::Pomdp) {
        return Err(Error::Unsupported(format!("simulating a {} model", model.kind)));
    }
    if let Policy::Scheduler(sc) = policy {
        sc.check(model)?;
    }
    Ok((0..options.runs)
        .into_par_iter()
        .map(|i| run(model, policy, options.seed.wrapping_add(i as u64), options.max_steps))
        .collect())
}
