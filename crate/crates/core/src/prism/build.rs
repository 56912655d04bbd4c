use std::collections::{BTreeMap, HashMap, VecDeque};

use super::{BinOp, Expr, PrismProgram};
use crate::bitvec::BitVector;
use crate::error::{Error, Result};
use crate::explore::INIT_LABEL;
use crate::model::{ExplicitModel, MatrixBuilder, ModelKind, RewardModel, StateValuations, ROW_SUM_TOLERANCE};
use crate::rational::to_f64;

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub valuations: bool,
    pub choice_labels: bool,
    pub max_states: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            valuations: true,
            choice_labels: true,
            max_states: 10_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Val {
    Int(i64),
    Num(f64),
    Bool(bool),
}

/// Expression over state variable indices; constants already folded.
#[derive(Clone, Debug)]
enum Code {
    Lit(Val),
    Var(usize),
    Not(Box<Code>),
    Neg(Box<Code>),
    Bin(BinOp, Box<Code>, Box<Code>),
}

fn compile(e: &Expr, vars: &HashMap<String, usize>) -> Result<Code> {
    Ok(match e {
        Expr::Int(i) => Code::Lit(Val::Int(*i)),
        Expr::Real(r) => Code::Lit(Val::Num(to_f64(r))),
        Expr::Bool(b) => Code::Lit(Val::Bool(*b)),
        Expr::Ident(n) => Code::Var(*vars.get(n).ok_or_else(|| {
            Error::Semantic(format!("\"{n}\" is not a variable; constants must be instantiated before building"))
        })?),
        Expr::Not(a) => Code::Not(Box::new(compile(a, vars)?)),
        Expr::Neg(a) => Code::Neg(Box::new(compile(a, vars)?)),
        Expr::Binary(BinOp::Div, a, b) => {
            return Err(Error::Semantic(format!("division involving variables: ({a} / {b})")));
        }
        Expr::Binary(op, a, b) => Code::Bin(*op, Box::new(compile(a, vars)?), Box::new(compile(b, vars)?)),
    })
}

fn num(v: Val) -> Result<f64> {
    match v {
        Val::Int(i) => Ok(i as f64),
        Val::Num(x) => Ok(x),
        Val::Bool(_) => Err(Error::Semantic("boolean used as a number".into())),
    }
}

impl Code {
    fn eval(&self, s: &[i64]) -> Result<Val> {
        Ok(match self {
            Code::Lit(v) => *v,
            Code::Var(i) => Val::Int(s[*i]),
            Code::Not(a) => Val::Bool(!a.eval_bool(s)?),
            Code::Neg(a) => match a.eval(s)? {
                Val::Int(i) => Val::Int(-i),
                Val::Num(x) => Val::Num(-x),
                Val::Bool(_) => return Err(Error::Semantic("negation of a boolean".into())),
            },
            Code::Bin(op, a, b) => {
                use BinOp::*;
                match op {
                    And => Val::Bool(a.eval_bool(s)? && b.eval_bool(s)?),
                    Or => Val::Bool(a.eval_bool(s)? || b.eval_bool(s)?),
                    _ => {
                        let (x, y) = (a.eval(s)?, b.eval(s)?);
                        match (op, x, y) {
                            (Eq, Val::Bool(p), Val::Bool(q)) => Val::Bool(p == q),
                            (Ne, Val::Bool(p), Val::Bool(q)) => Val::Bool(p != q),
                            (Add, Val::Int(p), Val::Int(q)) => Val::Int(p + q),
                            (Sub, Val::Int(p), Val::Int(q)) => Val::Int(p - q),
                            (Mul, Val::Int(p), Val::Int(q)) => Val::Int(p * q),
                            (Eq, Val::Int(p), Val::Int(q)) => Val::Bool(p == q),
                            (Ne, Val::Int(p), Val::Int(q)) => Val::Bool(p != q),
                            (Lt, Val::Int(p), Val::Int(q)) => Val::Bool(p < q),
                            (Le, Val::Int(p), Val::Int(q)) => Val::Bool(p <= q),
                            (Gt, Val::Int(p), Val::Int(q)) => Val::Bool(p > q),
                            (Ge, Val::Int(p), Val::Int(q)) => Val::Bool(p >= q),
                            _ => {
                                let (p, q) = (num(x)?, num(y)?);
                                match op {
                                    Add => Val::Num(p + q),
                                    Sub => Val::Num(p - q),
                                    Mul => Val::Num(p * q),
                                    Eq => Val::Bool(p == q),
                                    Ne => Val::Bool(p != q),
                                    Lt => Val::Bool(p < q),
                                    Le => Val::Bool(p <= q),
                                    Gt => Val::Bool(p > q),
                                    Ge => Val::Bool(p >= q),
                                    Div | And | Or => unreachable!("handled above"),
                                }
                            }
                        }
                    }
                }
            }
        })
    }

    fn eval_bool(&self, s: &[i64]) -> Result<bool> {
        match self.eval(s)? {
            Val::Bool(b) => Ok(b),
            _ => Err(Error::Semantic("number used as a condition".into())),
        }
    }

    fn eval_num(&self, s: &[i64]) -> Result<f64> {
        num(self.eval(s)?)
    }

    fn eval_int(&self, s: &[i64]) -> Result<i64> {
        match self.eval(s)? {
            Val::Int(i) => Ok(i),
            Val::Num(x) if x.fract() == 0.0 => Ok(x as i64),
            _ => Err(Error::Semantic("expected an integer value".into())),
        }
    }
}

struct CUpdate {
    probability: Code,
    assignments: Vec<(usize, Code)>,
}

struct CCommand {
    action: Option<usize>,
    guard: Code,
    updates: Vec<CUpdate>,
}

/// Builds the reachable state space of an instantiated program.
///
/// A labelled action fires jointly in every module whose alphabet contains
/// it (guards conjoined, probabilities multiplied); unlabelled commands fire
/// alone. Choices are enumerated in module order, then command order, and
/// identical distributions under the same action are merged.
pub fn build_from_prism(program: &PrismProgram, options: &BuildOptions) -> Result<ExplicitModel> {
    let mut names = Vec::new();
    let mut vars = HashMap::new();
    let mut bounds = Vec::new();
    let mut init = Vec::new();
    for m in &program.modules {
        for v in &m.variables {
            vars.insert(v.name.clone(), names.len());
            names.push(v.name.clone());
            let lo = compile(&v.low, &HashMap::new())?.eval_int(&[])?;
            let hi = compile(&v.high, &HashMap::new())?.eval_int(&[])?;
            let i0 = compile(&v.init, &HashMap::new())?.eval_int(&[])?;
            if lo > hi || i0 < lo || i0 > hi {
                return Err(Error::Semantic(format!(
                    "variable \"{}\" has range [{lo}..{hi}] and initial value {i0}",
                    v.name
                )));
            }
            bounds.push((lo, hi));
            init.push(i0);
        }
    }
    let mut actions: Vec<String> = Vec::new();
    let mut modules: Vec<Vec<CCommand>> = Vec::new();
    for m in &program.modules {
        let mut cmds = Vec::new();
        for c in &m.commands {
            let action = c.action.as_ref().map(|a| match actions.iter().position(|x| x == a) {
                Some(i) => i,
                None => {
                    actions.push(a.clone());
                    actions.len() - 1
                }
            });
            let mut updates = Vec::new();
            for u in &c.updates {
                updates.push(CUpdate {
                    probability: compile(&u.probability, &vars)?,
                    assignments: u
                        .assignments
                        .iter()
                        .map(|(v, e)| Ok((vars[v], compile(e, &vars)?)))
                        .collect::<Result<_>>()?,
                });
            }
            cmds.push(CCommand {
                action,
                guard: compile(&c.guard, &vars)?,
                updates,
            });
        }
        modules.push(cmds);
    }
    // participants[a]: modules whose alphabet contains action a, in order.
    let participants: Vec<Vec<usize>> = (0..actions.len())
        .map(|a| {
            (0..modules.len())
                .filter(|&m| modules[m].iter().any(|c| c.action == Some(a)))
                .collect()
        })
        .collect();
    let labels: Vec<(String, Code)> = program
        .labels
        .iter()
        .map(|(n, e)| Ok((n.clone(), compile(e, &vars)?)))
        .collect::<Result<_>>()?;
    let rewards: Vec<(String, Vec<(Code, Code)>)> = program
        .rewards
        .iter()
        .map(|r| {
            Ok((
                r.name.clone(),
                r.items
                    .iter()
                    .map(|(g, v)| Ok((compile(g, &vars)?, compile(v, &vars)?)))
                    .collect::<Result<_>>()?,
            ))
        })
        .collect::<Result<_>>()?;

    let describe = |s: &[i64]| -> String {
        names.iter().zip(s).map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(", ")
    };

    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut states: Vec<Vec<i64>> = Vec::new();
    let mut queue = VecDeque::new();
    index.insert(init.clone(), 0);
    states.push(init.clone());
    queue.push_back(0usize);

    let mut builder = MatrixBuilder::new(false);
    let mut choice_labels = Vec::new();
    let mut state_rewards: Vec<Vec<f64>> = vec![Vec::new(); rewards.len()];
    let mut label_bits: Vec<Vec<usize>> = vec![Vec::new(); labels.len()];

    while let Some(s) = queue.pop_front() {
        let state = states[s].clone();
        for (i, (_, items)) in rewards.iter().enumerate() {
            let mut r = 0.0;
            for (g, v) in items {
                if g.eval_bool(&state)? {
                    r += v.eval_num(&state)?;
                }
            }
            if !(r >= 0.0) {
                return Err(Error::Model(format!("negative reward {r} in state ({})", describe(&state))));
            }
            state_rewards[i].push(r);
        }
        for (i, (_, g)) in labels.iter().enumerate() {
            if g.eval_bool(&state)? {
                label_bits[i].push(s);
            }
        }

        // (action, distribution over successor valuations)
        let mut choices: Vec<(Option<usize>, Vec<(Vec<i64>, f64)>)> = Vec::new();
        for (mi, cmds) in modules.iter().enumerate() {
            for cmd in cmds {
                if !cmd.guard.eval_bool(&state)? {
                    continue;
                }
                let combos: Vec<Vec<&CCommand>> = match cmd.action {
                    None => vec![vec![cmd]],
                    Some(a) if participants[a][0] == mi => {
                        let mut combos = vec![vec![cmd]];
                        for &mj in &participants[a][1..] {
                            let enabled: Vec<&CCommand> = modules[mj]
                                .iter()
                                .filter(|c| c.action == Some(a))
                                .filter_map(|c| match c.guard.eval_bool(&state) {
                                    Ok(true) => Some(Ok(c)),
                                    Ok(false) => None,
                                    Err(e) => Some(Err(e)),
                                })
                                .collect::<Result<_>>()?;
                            combos = combos
                                .into_iter()
                                .flat_map(|prefix| {
                                    enabled.iter().map(move |c| {
                                        let mut p = prefix.clone();
                                        p.push(*c);
                                        p
                                    })
                                })
                                .collect();
                        }
                        combos
                    }
                    Some(_) => continue,
                };
                for combo in combos {
                    let dist = joint_distribution(&combo, &state, &bounds, &names, &describe, &actions)?;
                    if !choices.iter().any(|(a, d)| *a == cmd.action && *d == dist) {
                        choices.push((cmd.action, dist));
                    }
                }
            }
        }
        if choices.is_empty() {
            return Err(Error::Model(format!(
                "state ({}) has no enabled command (deadlock)",
                describe(&state)
            )));
        }
        builder.new_row_group();
        for (action, dist) in choices {
            let mut row = Vec::with_capacity(dist.len());
            for (succ, p) in dist {
                let t = match index.get(&succ) {
                    Some(&t) => t,
                    None => {
                        let t = states.len();
                        if t >= options.max_states {
                            return Err(Error::SizeLimit {
                                limit: options.max_states,
                                explored: t + 1,
                            });
                        }
                        index.insert(succ.clone(), t);
                        states.push(succ);
                        queue.push_back(t);
                        t
                    }
                };
                row.push((t, p));
            }
            row.sort_by_key(|e| e.0);
            builder.push_row(row);
            choice_labels.push(action.map(|a| actions[a].clone()));
        }
    }

    let n = states.len();
    let mut model = ExplicitModel::new(ModelKind::Mdp, builder.finish(), 0);
    for ((name, _), bits) in labels.iter().zip(label_bits) {
        model.labels.insert(name.clone(), BitVector::from_indices(n, bits));
    }
    model
        .labels
        .entry(INIT_LABEL.to_string())
        .or_insert_with(|| BitVector::from_indices(n, [0]));
    for ((name, _), v) in rewards.iter().zip(state_rewards) {
        model.reward_models.insert(
            name.clone(),
            RewardModel {
                state: Some(v),
                choice: None,
            },
        );
    }
    if options.choice_labels {
        model.choice_labels = Some(choice_labels);
    }
    if options.valuations {
        model.valuations = Some(StateValuations {
            variables: names.clone(),
            values: states,
        });
    }
    Ok(model)
}

fn joint_distribution(
    combo: &[&CCommand],
    state: &[i64],
    bounds: &[(i64, i64)],
    names: &[String],
    describe: &dyn Fn(&[i64]) -> String,
    actions: &[String],
) -> Result<Vec<(Vec<i64>, f64)>> {
    let mut dist: Vec<(Vec<i64>, f64)> = vec![(state.to_vec(), 1.0)];
    for cmd in combo {
        let mut sum = 0.0;
        let mut next = Vec::new();
        for u in &cmd.updates {
            let p = u.probability.eval_num(state)?;
            if p < 0.0 {
                return Err(Error::Model(format!(
                    "negative probability {p} in state ({})",
                    describe(state)
                )));
            }
            sum += p;
            if p == 0.0 {
                continue;
            }
            for (partial, q) in &dist {
                let mut t = partial.clone();
                for (v, e) in &u.assignments {
                    let x = e.eval_int(state)?;
                    let (lo, hi) = bounds[*v];
                    if x < lo || x > hi {
                        return Err(Error::Model(format!(
                            "update in state ({}) sets variable {} to {x}, outside [{lo}..{hi}]",
                            describe(state),
                            names[*v]
                        )));
                    }
                    t[*v] = x;
                }
                next.push((t, q * p));
            }
        }
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            let name = cmd.action.map_or("", |a| actions[a].as_str());
            return Err(Error::Model(format!(
                "command [{name}] in state ({}) has probabilities summing to {sum}",
                describe(state)
            )));
        }
        dist = next;
    }
    // Merge equal successors, keeping first-occurrence order.
    let mut merged: Vec<(Vec<i64>, f64)> = Vec::with_capacity(dist.len());
    let mut pos: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for (t, p) in dist {
        match pos.get(&t) {
            Some(&i) => merged[i].1 += p,
            None => {
                pos.insert(t.clone(), merged.len());
                merged.push((t, p));
            }
        }
    }
    Ok(merged)
}
