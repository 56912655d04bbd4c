mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stormlet::engines::check_reachability;
use stormlet::explore::{orchard_model, OrchardConfig};
use stormlet::lp::{encode_reachability_lp, export_lp, solve_lp, ConstraintKind, LpConstraint, LpProblem};
use stormlet::model::MatrixBuilder;
use stormlet::{BitVector, Direction, Environment, Error, ExplicitModel, Method, ModelKind};

/// Just enough of the CPLEX LP format to read back what the exporter writes.
fn read_lp(text: &str) -> LpProblem {
    let mut section = "";
    let mut num_vars = 0;
    let mut constraints = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        match line {
            "Minimize" | "Subject To" | "Bounds" | "End" => {
                section = line;
                continue;
            }
            _ => {}
        }
        match section {
            "Subject To" => {
                let (_, body) = line.split_once(':').unwrap();
                let (lhs, op, rhs) = if let Some((l, r)) = body.split_once(">=") {
                    (l, ">=", r)
                } else {
                    let (l, r) = body.split_once('=').unwrap();
                    (l, "=", r)
                };
                let rhs: f64 = rhs.trim().parse().unwrap();
                let mut terms = Vec::new();
                let mut sign = 1.0;
                let mut coef = 1.0;
                for tok in lhs.split_whitespace() {
                    match tok {
                        "+" => sign = 1.0,
                        "-" => sign = -1.0,
                        _ if tok.starts_with('x') => {
                            terms.push((tok[1..].parse::<usize>().unwrap(), sign * coef));
                            sign = 1.0;
                            coef = 1.0;
                        }
                        _ => coef = tok.parse().unwrap(),
                    }
                }
                let kind = match (op, rhs) {
                    (">=", _) => ConstraintKind::Choice,
                    (_, r) if r == 1.0 => ConstraintKind::Goal,
                    _ => ConstraintKind::Unreachable,
                };
                let state = terms.iter().find(|t| t.1 > 0.0).map_or(terms[0].0, |t| t.0);
                constraints.push(LpConstraint { kind, state, terms, rhs });
            }
            "Bounds" => num_vars += 1,
            _ => {}
        }
    }
    LpProblem { num_vars, constraints }
}

fn strip_states(p: &LpProblem) -> Vec<(ConstraintKind, Vec<(usize, f64)>, f64)> {
    p.constraints.iter().map(|c| (c.kind, c.terms.clone(), c.rhs)).collect()
}

#[test]
fn simplified_fixture_reads_back() {
    let m = orchard_model(&OrchardConfig::simplified()).unwrap();
    let goal = m.label("PlayersWon").unwrap();
    let ours = encode_reachability_lp(&m, goal).unwrap();
    let read = read_lp(include_str!("fixtures/orchard_simple.lp"));
    assert_eq!(read.num_vars, 90);
    assert_eq!(strip_states(&read), strip_states(&ours));
    let x = solve_lp(&read).unwrap();
    let env = Environment { method: Method::PolicyIteration, ..Environment::default() };
    let v = check_reachability(&m, goal, Direction::Max, &env, false).unwrap();
    for s in 0..m.num_states() {
        assert!((x[s] - v.at(s)).abs() < 1e-9);
    }
}

#[test]
fn two_state_golden() {
    // s0: either a fair coin between s0 and s1, or stay; s1 is the goal.
    let mut b = MatrixBuilder::new(false);
    b.new_row_group();
    b.push_row([(0, 0.5), (1, 0.5)]);
    b.push_row([(0, 1.0)]);
    b.new_row_group();
    b.push_row([(1, 1.0)]);
    let m = ExplicitModel::new(ModelKind::Mdp, b.finish(), 0);
    let p = encode_reachability_lp(&m, &BitVector::from_indices(2, [1])).unwrap();
    assert_eq!(export_lp(&p), include_str!("fixtures/two_state.lp"));
    assert_eq!(read_lp(&export_lp(&p)), p);
}

#[test]
fn empty_goal_fixes_everything_to_zero() {
    let m = orchard_model(&OrchardConfig::simplified()).unwrap();
    let p = encode_reachability_lp(&m, &BitVector::zeros(m.num_states())).unwrap();
    assert_eq!(p.count(ConstraintKind::Unreachable), m.num_states());
    assert_eq!(p.constraints.len(), m.num_states());
    assert!(export_lp(&p).lines().filter(|l| l.starts_with(" c")).all(|l| l.ends_with(" = 0")));
    assert!(solve_lp(&p).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn constraint_counts_follow_the_cases() {
    for c in [OrchardConfig::simplified(), OrchardConfig::full()] {
        let m = orchard_model(&c).unwrap();
        let goal = m.label("PlayersWon").unwrap();
        let p = encode_reachability_lp(&m, goal).unwrap();
        let goals = goal.count_ones();
        let fixed = p.count(ConstraintKind::Goal) + p.count(ConstraintKind::Unreachable);
        assert_eq!(p.count(ConstraintKind::Goal), goals);
        let choices: usize = (0..m.num_states())
            .filter(|&s| !p.constraints.iter().any(|k| k.kind != ConstraintKind::Choice && k.state == s))
            .map(|s| m.matrix.row_group(s).len())
            .sum();
        assert_eq!(p.count(ConstraintKind::Choice), choices);
        assert_eq!(fixed + (m.num_states() - fixed), p.num_vars);
    }
}

#[test]
fn full_game_is_too_large_for_the_builtin_solver() {
    let m = orchard_model(&OrchardConfig::full()).unwrap();
    let p = encode_reachability_lp(&m, m.label("PlayersWon").unwrap()).unwrap();
    assert_eq!(p.num_vars, 22469);
    assert!(matches!(solve_lp(&p), Err(Error::TooLarge { .. })));
    let text = export_lp(&p);
    assert_eq!(text.lines().filter(|l| l.starts_with(" c")).count(), p.constraints.len());
}

#[test]
fn random_models_agree_with_policy_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let env = Environment { method: Method::PolicyIteration, ..Environment::default() };
    for n in [5, 20, 60] {
        let m = common::random_mdp(&mut rng, n);
        let goal = m.label("goal").unwrap();
        let x = solve_lp(&encode_reachability_lp(&m, goal).unwrap()).unwrap();
        let v = check_reachability(&m, goal, Direction::Max, &env, false).unwrap();
        for s in 0..n {
            assert!((x[s] - v.at(s)).abs() < 1e-9, "n={n} s={s}: {} vs {}", x[s], v.at(s));
        }
    }
}

#[test]
fn only_markov_models_encode() {
    let m = orchard_model(&OrchardConfig::simplified().with_variant(stormlet::explore::OrchardVariant::Interval(0.01))).unwrap();
    assert!(matches!(
        encode_reachability_lp(&m, m.label("PlayersWon").unwrap()),
        Err(Error::Unsupported(_))
    ));
}
