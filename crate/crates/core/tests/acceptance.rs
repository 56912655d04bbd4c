//! End-to-end acceptance run over the Orchard family. Prints one line per
//! criterion and fails if any criterion fails.

mod common;

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stormlet::beliefs::{check_pomdp_reachability, fully_observable_value};
use stormlet::engines::{
    check_bounded_reachability, check_reachability, check_reachability_bounds, check_total_reward, solve_dtmc,
};
use stormlet::explore::{orchard_model, orchard_parametric, simulate, OrchardConfig, OrchardVariant, Policy, SimulationOptions};
use stormlet::lp::{encode_reachability_lp, export_lp, solve_lp};
use stormlet::model::{apply_scheduler, read_model, validate, write_model};
use stormlet::rational::ratio;
use stormlet::reduce::{bisimulation_quotient, BisimulationOptions};
use stormlet::uncertain::{check_interval_reachability, inner_extremum, UncertaintyMode};
use stormlet::{BitVector, Direction, Environment, ExplicitModel, Method};

const METHODS: [Method; 4] = [
    Method::ValueIteration,
    Method::GaussSeidel,
    Method::PolicyIteration,
    Method::OptimisticValueIteration,
];

#[derive(Default)]
struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn close(&mut self, got: f64, want: f64, tol: f64, what: &str) {
        self.check((got - want).abs() <= tol, format!("{what}: got {got}, want {want} ± {tol}"));
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

struct Games {
    simple: ExplicitModel,
    full: ExplicitModel,
    prism: ExplicitModel,
}

fn win(m: &ExplicitModel) -> &BitVector {
    m.label("PlayersWon").unwrap()
}

fn ended(m: &ExplicitModel) -> BitVector {
    win(m).or(m.label("RavenWon").unwrap())
}

fn pmax(m: &ExplicitModel, goal: &BitVector, env: &Environment) -> f64 {
    let r = check_reachability(m, goal, Direction::Max, env, false).unwrap();
    r.at(m.initial_state())
}

fn tight() -> Environment {
    Environment {
        precision: 1e-10,
        ..Environment::default()
    }
}

fn criterion_1(g: &Games, o: &mut Outcome) {
    let s = g.simple.summary();
    o.check(s.states == 90, format!("simplified states {}", s.states));
    o.check(s.actions == 7, format!("simplified choice labels {}", s.actions));
    o.check(s.labels == 33, format!("simplified labels {}", s.labels));
    o.check(g.full.num_states() == 22469, format!("full states {}", g.full.num_states()));
    let p = g.prism.summary();
    o.check(p.states == 22469, format!("PRISM states {}", p.states));
    o.check(p.transitions == 44954, format!("PRISM transitions {}", p.transitions));
    o.note(format!(
        "simplified {}/{}/{}, full {} states {} transitions, PRISM {} states {} transitions",
        s.states, s.actions, s.labels, g.full.num_states(), g.full.num_transitions(), p.states, p.transitions
    ));
}

fn criterion_2(g: &Games, o: &mut Outcome) {
    let v = pmax(&g.simple, win(&g.simple), &Environment::default());
    o.close(v, 0.5711805425946498, 1e-6, "simplified Pmax win");
    let mut values = Vec::new();
    for method in METHODS {
        let v = pmax(&g.full, win(&g.full), &Environment::with_method(method));
        o.close(v, 0.631357, 1e-5, &format!("full Pmax win ({method})"));
        values.push(v);
    }
    let spread = values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min);
    o.check(spread <= 1e-5, format!("methods disagree by {spread}"));
    let env = Environment::with_method(Method::OptimisticValueIteration);
    let (lo, hi) = check_reachability_bounds(&g.full, win(&g.full), Direction::Max, &env).unwrap()[g.full.initial_state()];
    o.check(lo <= 0.631357 + 1e-5 && 0.631357 - 1e-5 <= hi, format!("OVI [{lo}, {hi}] misses 0.631357"));
    o.check(hi - lo <= 1e-6, format!("OVI width {}", hi - lo));
    o.note(format!("vi/gs/pi/ovi = {values:?}; OVI [{lo}, {hi}]"));
}

fn criterion_3(g: &Games, o: &mut Outcome) {
    let env = Environment::default();
    let goal = ended(&g.full);
    let max = check_total_reward(&g.full, "rounds", &goal, Direction::Max, &env, false).unwrap().at(0);
    let min = check_total_reward(&g.full, "rounds", &goal, Direction::Min, &env, false).unwrap().at(0);
    o.close(max, 22.339089, 1e-4, "Rmax rounds");
    o.close(min, 20.882790, 1e-4, "Rmin rounds");
    o.note(format!("Rmax {max}, Rmin {min}"));
}

/// Fewest reward units on any path from the initial state into `goal`
/// (0-1 BFS over the graph, rewards are 0 or 1 per state).
fn min_reward_to_goal(m: &ExplicitModel, reward: &str, goal: &BitVector) -> Option<u64> {
    let rm = m.reward_model(reward).unwrap();
    let n = m.num_states();
    let mut dist = vec![u64::MAX; n];
    let mut queue = VecDeque::new();
    dist[m.initial_state()] = 0;
    queue.push_back(m.initial_state());
    while let Some(s) = queue.pop_front() {
        if goal.get(s) {
            continue;
        }
        for r in m.matrix.row_group(s) {
            let c = rm.total(s, r) as u64;
            assert!(c <= 1);
            for (t, p) in m.matrix.row(r).iter() {
                if p > 0.0 && dist[s] + c < dist[t] {
                    dist[t] = dist[s] + c;
                    if c == 0 {
                        queue.push_front(t);
                    } else {
                        queue.push_back(t);
                    }
                }
            }
        }
    }
    goal.iter_ones().map(|s| dist[s]).min().filter(|&d| d != u64::MAX)
}

fn criterion_4(g: &Games, o: &mut Outcome) {
    let env = Environment::default();
    // Tiny configurations: the bounded value is zero exactly below the graph distance.
    for (types, fruits, raven) in [(1, 1, 1), (1, 2, 2), (2, 1, 2), (2, 2, 3)] {
        let mut c = OrchardConfig::full();
        c.fruit_types.truncate(types);
        c.num_fruits = fruits;
        c.raven_distance = raven;
        let m = orchard_model(&c).unwrap();
        let d = min_reward_to_goal(&m, "rounds", win(&m)).unwrap();
        for k in 0..=d + 2 {
            let v = check_bounded_reachability(&m, "rounds", k, win(&m), Direction::Max, &env).unwrap().at(0);
            o.check((v == 0.0) == (k < d), format!("tiny {types}/{fruits}/{raven}: k={k} value {v}, distance {d}"));
        }
    }
    let d = min_reward_to_goal(&g.full, "rounds", win(&g.full)).unwrap();
    o.check(d == 16, format!("full game needs {d} rounds at least"));
    let mut previous = 0.0;
    let mut at = BTreeMap::new();
    for k in (0..=40).chain([120]) {
        let v = check_bounded_reachability(&g.full, "rounds", k, win(&g.full), Direction::Max, &env).unwrap().at(0);
        if k <= 15 {
            o.check(v == 0.0, format!("k={k} gives {v}"));
        }
        o.check(v + 1e-12 >= previous, format!("decrease at k={k}: {v} < {previous}"));
        o.check(v <= 0.6314 + 1e-3, format!("k={k} above the unbounded value: {v}"));
        previous = v;
        at.insert(k, v);
    }
    o.close(at[&120], 0.631357, 1e-3, "k=120");
    o.note(format!("k=15 {}, k=16 {:.3e}, k=40 {:.6}, k=120 {:.7}", at[&15], at[&16], at[&40], at[&120]));
}

fn criterion_5(g: &Games, o: &mut Outcome) {
    let env = Environment::default();
    let r = check_reachability(&g.full, win(&g.full), Direction::Max, &env, true).unwrap();
    let sched = r.scheduler.clone().unwrap();
    let induced = apply_scheduler(&g.full, &sched).unwrap();
    let v = solve_dtmc(&induced, win(&induced), None, &env).unwrap().at(0);
    o.close(v, r.at(0), 1e-5, "induced DTMC win");

    let mut c = OrchardConfig::full();
    c.cherry_label = true;
    let m = orchard_model(&c).unwrap();
    let cherries = m.label("allCherriesPicked").unwrap();
    let best = pmax(&m, cherries, &env);
    o.close(best, 0.912056, 1e-5, "Pmax allCherriesPicked");
    let induced = apply_scheduler(&m, &sched).unwrap();
    let fixed = solve_dtmc(&induced, induced.label("allCherriesPicked").unwrap(), None, &env).unwrap().at(0);
    o.check(fixed <= 0.912056 + 1e-5, format!("induced cherry value {fixed}"));
    o.note(format!("induced win {v}; cherries optimal {best}, under the win policy {fixed} (reference run: 0.7726100987523447)"));
}

fn criterion_6(g: &Games, o: &mut Outcome) {
    let env = Environment::default();
    let m = orchard_model(&OrchardConfig::full().with_variant(OrchardVariant::Interval(1.0 / 36.0))).unwrap();
    let goal = win(&m);
    let coop = check_interval_reachability(&m, goal, Direction::Max, UncertaintyMode::Cooperative, &env).unwrap();
    let robust = check_interval_reachability(&m, goal, Direction::Max, UncertaintyMode::Robust, &env).unwrap();
    o.close(coop.at(0), 0.7961, 1e-4, "cooperative");
    o.close(robust.at(0), 0.4315, 1e-4, "robust");
    let point = check_reachability(&g.full, win(&g.full), Direction::Max, &env, false).unwrap();
    let bad = (0..m.num_states())
        .filter(|&s| !(robust.at(s) <= point.at(s) + 1e-6 && point.at(s) <= coop.at(s) + 1e-6))
        .count();
    o.check(m.num_states() == g.full.num_states(), "interval game has a different state space");
    o.check(bad == 0, format!("{bad} states violate robust ≤ point ≤ cooperative"));

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let centre: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = centre.iter().sum();
        let intervals: Vec<(f64, f64)> = centre
            .iter()
            .map(|c| {
                let c = c / total;
                ((c - rng.gen_range(0.0..0.2)).max(0.0), (c + rng.gen_range(0.0..0.2)).min(1.0))
            })
            .collect();
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        for maximize in [true, false] {
            let (got, witness) = inner_extremum(&intervals, &values, maximize).unwrap();
            let want = vertex_extremum(&intervals, &values, maximize);
            let sum: f64 = witness.iter().sum();
            let inside = witness.iter().zip(&intervals).all(|(p, (l, u))| *l - 1e-12 <= *p && *p <= *u + 1e-12);
            if (got - want).abs() > 1e-9 || (sum - 1.0).abs() > 1e-9 || !inside {
                mismatches += 1;
            }
        }
    }
    o.check(mismatches == 0, format!("{mismatches} inner problems disagree with vertex enumeration"));
    o.note(format!("cooperative {}, robust {}", coop.at(0), robust.at(0)));
}

/// Optimum over the vertices of `{p : l ≤ p ≤ u, Σp = 1}`: all coordinates
/// but one at a bound, the free one taking the remaining mass.
fn vertex_extremum(intervals: &[(f64, f64)], values: &[f64], maximize: bool) -> f64 {
    let n = intervals.len();
    let mut best = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    for free in 0..n {
        for mask in 0u32..(1 << n) {
            let mut p = vec![0.0; n];
            let mut mass = 0.0;
            for i in (0..n).filter(|&i| i != free) {
                p[i] = if mask & (1 << i) != 0 { intervals[i].1 } else { intervals[i].0 };
                mass += p[i];
            }
            p[free] = 1.0 - mass;
            if p[free] < intervals[free].0 - 1e-12 || p[free] > intervals[free].1 + 1e-12 {
                continue;
            }
            let v: f64 = p.iter().zip(values).map(|(p, v)| p * v).sum();
            best = if maximize { best.max(v) } else { best.min(v) };
        }
    }
    best
}

fn criterion_7(_: &Games, o: &mut Outcome) {
    let pm = orchard_parametric(&OrchardConfig::simplified()).unwrap();
    let env = Environment::default();
    let at = |p: (i64, i64), q: (i64, i64)| {
        let valuation = BTreeMap::from([("p".to_string(), ratio(p.0, p.1)), ("q".to_string(), ratio(q.0, q.1))]);
        let m = pm.instantiate(&valuation).unwrap();
        pmax(&m, win(&m), &env)
    };
    let base = at((1, 4), (1, 4));
    let none = at((0, 1), (0, 1));
    let no_raven = at((1, 4), (1, 2));
    let no_raven_2 = at((1, 3), (1, 3));
    o.close(base, 0.5711805, 1e-6, "(1/4, 1/4)");
    o.close(none, 0.0, 1e-6, "(0, 0)");
    o.close(no_raven, 1.0, 1e-6, "(1/4, 1/2)");
    o.close(no_raven_2, 1.0, 1e-6, "(1/3, 1/3)");
    o.note(format!("(1/4,1/4) {base}, (0,0) {none}, (1/4,1/2) {no_raven}, (1/3,1/3) {no_raven_2}"));
}

fn criterion_8(g: &Games, o: &mut Outcome) {
    let env = Environment::default();
    let base = orchard_model(&OrchardConfig::full().with_variant(OrchardVariant::Pomdp)).unwrap();
    let observations = base.summary().observations.unwrap_or(0);
    let r = check_pomdp_reachability(&base, win(&base), Direction::Max, &env, 1_000_000).unwrap();
    o.check(r.upper - r.lower <= 1e-4, format!("gap {}", r.upper - r.lower));
    o.close(r.lower, 0.631357, 1e-4, "POMDP lower bound");
    o.close(r.upper, 0.631357, 1e-4, "POMDP upper bound");
    o.check(r.point_beliefs_only, "base game produced a non-point belief");
    let v_base = fully_observable_value(&base, win(&base), Direction::Max, &env).unwrap().at(0);
    o.check(r.upper <= v_base + 1e-6, "POMDP upper bound above the MDP value");
    o.close(v_base, pmax(&g.full, win(&g.full), &env), 1e-9, "fully observable vs MDP");

    let steal = orchard_model(&OrchardConfig::full().with_variant(OrchardVariant::PomdpSteal(2))).unwrap();
    let s = check_pomdp_reachability(&steal, win(&steal), Direction::Max, &env, 1_000_000).unwrap();
    let v_steal = fully_observable_value(&steal, win(&steal), Direction::Max, &env).unwrap().at(steal.initial_state());
    o.check(s.lower <= s.upper + 1e-12, "steal bounds inverted");
    o.check(s.upper <= v_steal + 1e-6, format!("steal POMDP ub {} above its MDP value {v_steal}", s.upper));
    o.check(v_steal >= v_base - 1e-6, format!("steal MDP value {v_steal} below base {v_base}"));
    o.note(format!(
        "base [{}, {}] over {} beliefs, {observations} observations (PRISM initial state adds one: 546); steal k=2 [{}, {}], MDP {v_steal}",
        r.lower, r.upper, r.beliefs, s.lower, s.upper
    ));
}

fn criterion_9(g: &Games, o: &mut Outcome) {
    let env = tight();
    let options = BisimulationOptions {
        labels: vec!["PlayersWon".into(), "RavenWon".into()],
        rewards: true,
        action_labels: false,
    };
    for (name, m) in [("BIRD", &g.full), ("PRISM", &g.prism)] {
        let (q, _) = bisimulation_quotient(m, &options).unwrap();
        let queries = |m: &ExplicitModel| {
            let goal = ended(m);
            let init = m.initial_state();
            [
                check_reachability(m, win(m), Direction::Max, &env, false).unwrap().at(init),
                check_reachability(m, win(m), Direction::Min, &env, false).unwrap().at(init),
                check_total_reward(m, "rounds", &goal, Direction::Max, &env, false).unwrap().at(init),
                check_total_reward(m, "rounds", &goal, Direction::Min, &env, false).unwrap().at(init),
            ]
        };
        let (a, b) = (queries(m), queries(&q));
        for i in 0..4 {
            o.close(b[i], a[i], 1e-6, &format!("{name} quotient query {i}"));
        }
        let reduction = 1.0 - q.num_states() as f64 / m.num_states() as f64;
        o.check(reduction >= 0.9, format!("{name} reduction {reduction}"));
        o.note(format!(
            "{name}: {} states / {} transitions (reference tool: 956 / 2446)",
            q.num_states(),
            q.num_transitions()
        ));
    }
}

fn criterion_10(g: &Games, o: &mut Outcome) {
    let env = tight();
    let lp = encode_reachability_lp(&g.simple, win(&g.simple)).unwrap();
    let x = solve_lp(&lp).unwrap();
    let vi = check_reachability(&g.simple, win(&g.simple), Direction::Max, &env, false).unwrap();
    let worst = (0..x.len()).map(|s| (x[s] - vi.at(s)).abs()).fold(0.0, f64::max);
    o.check(worst <= 1e-6, format!("simplified LP vs VI differ by {worst}"));
    let fixture = include_str!("fixtures/orchard_simple.lp");
    o.check(export_lp(&lp) == fixture, "simplified LP export differs from the fixture");
    o.check(export_lp(&lp) == export_lp(&lp.clone()), "export not deterministic");

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut bad = 0;
    for _ in 0..100 {
        let m = common::random_mdp(&mut rng, 30);
        let goal = m.label("goal").unwrap();
        let x = solve_lp(&encode_reachability_lp(&m, goal).unwrap()).unwrap();
        let vi = check_reachability(&m, goal, Direction::Max, &env, false).unwrap();
        if (0..30).any(|s| (x[s] - vi.at(s)).abs() > 1e-6) {
            bad += 1;
        }
    }
    o.check(bad == 0, format!("{bad} of 100 random MDPs: LP ≠ VI"));
    o.note(format!("simplified LP max deviation {worst:.2e}; 100 random MDPs checked"));
}

fn criterion_11(g: &Games, o: &mut Outcome) {
    let env = tight();
    let run = |m: &ExplicitModel| {
        let goal = ended(m);
        [
            check_reachability(m, win(m), Direction::Max, &env, false).unwrap().at(0),
            check_reachability(m, win(m), Direction::Min, &env, false).unwrap().at(0),
            check_total_reward(m, "rounds", &goal, Direction::Max, &env, false).unwrap().at(0),
            check_total_reward(m, "rounds", &goal, Direction::Min, &env, false).unwrap().at(0),
        ]
    };
    let (a, b) = (run(&g.full), run(&g.prism));
    for (i, name) in ["Pmax win", "Pmin win", "Rmax rounds", "Rmin rounds"].iter().enumerate() {
        o.close(b[i], a[i], 1e-6, name);
    }
    o.note(format!("BIRD {a:?}, PRISM {b:?}"));
}

fn criterion_12(g: &Games, o: &mut Outcome) {
    // VI monotonicity: truncated runs are pointwise nondecreasing in the iteration count.
    let mut last: Option<Vec<f64>> = None;
    for iters in [1, 2, 4, 8, 16, 32, 64] {
        let env = Environment {
            max_iterations: iters,
            precision: 1e-14,
            ..Environment::default()
        };
        let x = match check_reachability(&g.simple, win(&g.simple), Direction::Max, &env, false) {
            Ok(r) => r.values.scalars().unwrap().to_vec(),
            Err(stormlet::Error::NonConvergence { last_iterate, .. }) => last_iterate,
            Err(e) => panic!("{e}"),
        };
        if let Some(prev) = &last {
            o.check(
                prev.len() == x.len() && prev.iter().zip(&x).all(|(a, b)| *b + 1e-15 >= *a),
                format!("VI not monotone at {iters} iterations"),
            );
        }
        last = Some(x);
    }
    for m in [&g.simple, &g.full, &g.prism] {
        let v = validate(m);
        o.check(v.is_empty(), format!("validation: {:?}", v.first()));
        let back = read_model(&write_model(m)).unwrap();
        o.check(&back == m, "serialization round trip changed the model");
    }

    let env = Environment::default();
    let r = check_reachability(&g.full, win(&g.full), Direction::Max, &env, true).unwrap();
    let policy = Policy::Scheduler(r.scheduler.clone().unwrap());
    let options = SimulationOptions {
        seed: 1,
        max_steps: 10_000,
        runs: 10_000,
    };
    let traces = simulate(&g.full, &policy, &options).unwrap();
    o.check(traces == simulate(&g.full, &policy, &options).unwrap(), "simulation not deterministic for a fixed seed");
    let won = traces.iter().filter(|t| win(&g.full).get(t.last_state())).count();
    let freq = won as f64 / traces.len() as f64;
    o.close(freq, r.at(0), 0.02, "Monte-Carlo win frequency");
    o.note(format!("Monte-Carlo {freq} over {} runs vs {}", traces.len(), r.at(0)));
}

#[test]
fn acceptance() {
    let games = Games {
        simple: orchard_model(&OrchardConfig::simplified()).unwrap(),
        full: orchard_model(&OrchardConfig::full()).unwrap(),
        prism: common::prism_orchard(4, 5),
    };
    let criteria: [(&str, fn(&Games, &mut Outcome)); 12] = [
        ("state-space sizes", criterion_1),
        ("reachability", criterion_2),
        ("total rewards", criterion_3),
        ("reward-bounded reachability", criterion_4),
        ("scheduler extraction", criterion_5),
        ("interval MDP", criterion_6),
        ("parametric instantiation", criterion_7),
        ("POMDP bounds", criterion_8),
        ("bisimulation", criterion_9),
        ("LP encoding", criterion_10),
        ("BIRD vs PRISM", criterion_11),
        ("property suites", criterion_12),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let mut o = Outcome::default();
        run(&games, &mut o);
        let verdict = if o.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict} {name} ({:.1?})", i + 1, start.elapsed());
        for n in &o.notes {
            println!("    {n}");
        }
        for f in &o.failures {
            println!("    failed: {f}");
        }
        if !o.failures.is_empty() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
