#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use stormlet::prism::{build_from_prism, parse_prism, BuildOptions};
use stormlet::{rational, ExplicitModel, ModelKind, RewardModel};
use stormlet::model::MatrixBuilder;

pub fn orchard_prism_source() -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/orchard.prism");
    std::fs::read_to_string(path).expect("models/orchard.prism")
}

/// The PRISM Orchard game with `NUM_FRUIT` and `DISTANCE_RAVEN` bound.
pub fn prism_orchard(fruits: i64, raven: i64) -> ExplicitModel {
    let program = parse_prism(&orchard_prism_source()).unwrap();
    let bindings = BTreeMap::from([
        ("NUM_FRUIT".to_string(), rational::int(fruits)),
        ("DISTANCE_RAVEN".to_string(), rational::int(raven)),
    ]);
    build_from_prism(&program.instantiate_constants(&bindings).unwrap(), &BuildOptions::default()).unwrap()
}

/// Random MDP: every state has 1..=3 choices over up to 4 successors; the
/// last two states are a goal and a trap, both absorbing.
pub fn random_mdp(rng: &mut impl Rng, n: usize) -> ExplicitModel {
    assert!(n >= 3);
    let mut b = MatrixBuilder::new(false);
    for s in 0..n {
        b.new_row_group();
        if s >= n - 2 {
            b.push_row([(s, 1.0)]);
            continue;
        }
        for _ in 0..rng.gen_range(1..=3) {
            let k = rng.gen_range(1..=4);
            let mut targets: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
            targets.sort_unstable();
            targets.dedup();
            let weights: Vec<f64> = targets.iter().map(|_| rng.gen_range(1..=10) as f64).collect();
            let total: f64 = weights.iter().sum();
            b.push_row(targets.into_iter().zip(weights.into_iter().map(|w| w / total)));
        }
    }
    let mut m = ExplicitModel::new(ModelKind::Mdp, b.finish(), 0);
    m.labels.insert("goal".into(), stormlet::BitVector::from_indices(n, [n - 2]));
    m.reward_models.insert(
        "steps".into(),
        RewardModel {
            state: Some((0..n).map(|s| if s >= n - 2 { 0.0 } else { 1.0 }).collect()),
            choice: None,
        },
    );
    m
}
