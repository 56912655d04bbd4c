mod common;

use std::collections::{BTreeSet, HashMap};

use stormlet::engines::{check_bounded_reachability, check_reachability};
use stormlet::explore::{orchard_model, OrchardConfig, OrchardVariant};
use stormlet::model::validate;
use stormlet::rational::{int, ratio, to_f64, Rational};
use stormlet::{Direction, Environment, ExplicitModel, Method};

/// Exact optimal winning probability by recursion over the game rules:
/// trees, raven distance; a throw picks a fruit type, the basket or the raven.
struct Exact {
    types: usize,
    memo: HashMap<(Vec<u32>, u32), Rational>,
}

impl Exact {
    fn value(&mut self, trees: &[u32], raven: u32) -> Rational {
        if trees.iter().all(|&t| t == 0) {
            return int(1);
        }
        if raven == 0 {
            return int(0);
        }
        if let Some(v) = self.memo.get(&(trees.to_vec(), raven)) {
            return v.clone();
        }
        let p = ratio(1, self.types as i64 + 2);
        let mut moving = int(0);
        let mut stay = int(0);
        let picked = |i: usize| {
            let mut t = trees.to_vec();
            t[i] -= 1;
            t
        };
        for i in 0..self.types {
            if trees[i] == 0 {
                stay += &p;
            } else {
                moving += &p * self.value(&picked(i), raven);
            }
        }
        let basket = (0..self.types)
            .filter(|&i| trees[i] > 0)
            .map(|i| self.value(&picked(i), raven))
            .max()
            .unwrap();
        moving += &p * basket;
        moving += &p * self.value(trees, raven - 1);
        // Throwing an empty tree's colour repeats the round.
        let v = moving / (int(1) - stay);
        self.memo.insert((trees.to_vec(), raven), v.clone());
        v
    }
}

fn config(types: usize, fruits: u32, raven: u32) -> OrchardConfig {
    let mut c = OrchardConfig::full();
    c.fruit_types.truncate(types);
    c.num_fruits = fruits;
    c.raven_distance = raven;
    c
}

fn exact(c: &OrchardConfig) -> Rational {
    let mut e = Exact { types: c.fruit_types.len(), memo: HashMap::new() };
    e.value(&vec![c.num_fruits; c.fruit_types.len()], c.raven_distance)
}

#[test]
fn full_game_counts() {
    let m = orchard_model(&OrchardConfig::full()).unwrap();
    let s = m.summary();
    assert_eq!((s.states, s.choices, s.transitions, s.labels), (22469, 29349, 44949, 3));
    assert!(validate(&m).is_empty());
    let p = orchard_model(&OrchardConfig::full().with_variant(OrchardVariant::Pomdp)).unwrap();
    let s = p.summary();
    assert_eq!((s.states, s.choices, s.observations), (22469, 29349, Some(545)));
}

#[test]
fn prism_game_counts_and_observations() {
    let m = common::prism_orchard(4, 5);
    let s = m.summary();
    assert_eq!((s.states, s.choices, s.transitions), (22469, 29354, 44954));
    assert!(validate(&m).is_empty());
    // What the players see: phase, dice, raven and which trees are empty.
    let v = m.valuations.as_ref().unwrap();
    let observations: BTreeSet<Vec<i64>> = (0..m.num_states())
        .map(|st| {
            let mut key = vec![v.get(st, "s").unwrap(), v.get(st, "d").unwrap(), v.get(st, "raven").unwrap()];
            key.extend(["apple", "pear", "cherry", "plum"].map(|f| (v.get(st, f).unwrap() == 0) as i64));
            key
        })
        .collect();
    assert_eq!(observations.len(), 546);
}

#[test]
fn optimal_values_match_the_rules() {
    let env = Environment { method: Method::PolicyIteration, ..Environment::default() };
    for c in [config(1, 1, 1), config(2, 1, 2), config(2, 3, 2), OrchardConfig::simplified(), OrchardConfig::full()] {
        let m = orchard_model(&c).unwrap();
        let v = check_reachability(&m, m.label("PlayersWon").unwrap(), Direction::Max, &env, false).unwrap();
        let want = to_f64(&exact(&c));
        assert!((v.at(m.initial_state()) - want).abs() < 1e-9, "{:?}: {} vs {want}", c.fruit_types, v.at(0));
    }
    assert_eq!(exact(&config(1, 1, 1)), ratio(2, 3));
    let full = to_f64(&exact(&OrchardConfig::full()));
    assert!((full - 0.631357).abs() < 1e-6, "{full}");
}

#[test]
fn simplified_values_from_the_walkthrough() {
    // Values quoted for individual states of the two-fruit game.
    let m = orchard_model(&OrchardConfig::simplified()).unwrap();
    let env = Environment { method: Method::PolicyIteration, ..Environment::default() };
    let v = check_reachability(&m, m.label("PlayersWon").unwrap(), Direction::Max, &env, false).unwrap();
    let vals = m.valuations.as_ref().unwrap();
    let find = |apple: i64, cherry: i64, raven: i64| {
        (0..m.num_states())
            .find(|&s| {
                vals.get(s, "apple") == Some(apple)
                    && vals.get(s, "cherry") == Some(cherry)
                    && vals.get(s, "raven") == Some(raven)
                    && vals.get(s, "dice") == Some(0)
            })
            .unwrap()
    };
    for ((a, c, r), want) in [((2, 1, 1), 13.0 / 36.0), ((2, 1, 2), 145.0 / 216.0)] {
        let s = find(a, c, r);
        assert!((v.at(s) - want).abs() < 1e-12, "({a},{c},{r}): {}", v.at(s));
    }
}

/// Reward-bounded value by recursion over (state, remaining budget); the
/// only zero-reward cycles are the absorbing end states.
fn bounded(m: &ExplicitModel, s: usize, budget: u64, memo: &mut HashMap<(usize, u64), f64>) -> f64 {
    let goal = m.label("PlayersWon").unwrap();
    if goal.get(s) {
        return 1.0;
    }
    let g = m.matrix.row_group(s);
    if g.len() == 1 && m.matrix.row(g.start).columns == [s] {
        return 0.0;
    }
    if let Some(&v) = memo.get(&(s, budget)) {
        return v;
    }
    let rm = m.reward_model("rounds").unwrap();
    let mut best = 0.0f64;
    for r in g {
        let c = rm.total(s, r) as u64;
        if c > budget {
            continue;
        }
        let v: f64 = m.matrix.row(r).iter().map(|(t, p)| p * bounded(m, t, budget - c, memo)).sum();
        best = best.max(v);
    }
    memo.insert((s, budget), best);
    best
}

#[test]
fn bounded_reachability_matches_recursion() {
    let env = Environment { precision: 1e-12, ..Environment::default() };
    for c in [config(1, 1, 1), config(1, 2, 2), config(2, 2, 2), OrchardConfig::simplified()] {
        let m = orchard_model(&c).unwrap();
        let mut memo = HashMap::new();
        for k in 0..12 {
            let want = bounded(&m, m.initial_state(), k, &mut memo);
            let got = check_bounded_reachability(&m, "rounds", k, m.label("PlayersWon").unwrap(), Direction::Max, &env)
                .unwrap()
                .at(m.initial_state());
            assert!((got - want).abs() < 1e-9, "{:?} k={k}: {got} vs {want}", c.fruit_types);
        }
    }
}

#[test]
fn interval_width_zero_is_the_point_model() {
    use stormlet::uncertain::{check_interval_reachability, UncertaintyMode};
    let env = Environment::default();
    let point = orchard_model(&OrchardConfig::simplified()).unwrap();
    let imdp = orchard_model(&OrchardConfig::simplified().with_variant(OrchardVariant::Interval(0.0))).unwrap();
    assert!(validate(&imdp).is_empty());
    let p = check_reachability(&point, point.label("PlayersWon").unwrap(), Direction::Max, &env, false).unwrap();
    for mode in [UncertaintyMode::Robust, UncertaintyMode::Cooperative] {
        let r = check_interval_reachability(&imdp, imdp.label("PlayersWon").unwrap(), Direction::Max, mode, &env).unwrap();
        assert!((r.at(0) - p.at(0)).abs() < 1e-6);
    }
    // Every throw row of the full game carries [5/36, 7/36].
    let full = orchard_model(&OrchardConfig::full().with_variant(OrchardVariant::Interval(1.0 / 36.0))).unwrap();
    let row = full.matrix.row(full.matrix.row_group(full.initial_state()).start);
    assert_eq!(row.len(), 6);
    for (_, l, u) in row.iter_intervals() {
        assert!((l - 5.0 / 36.0).abs() < 1e-15 && (u - 7.0 / 36.0).abs() < 1e-15);
    }
}
