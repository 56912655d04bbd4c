//! Linear-programming encoding of maximal reachability, a dense simplex
//! solver for small instances, and CPLEX-LP export for larger ones.

mod simplex;

use std::fmt::Write as _;

use crate::bitvec::BitVector;
use crate::engines::prob01_max;
use crate::error::{Error, Result};
use crate::format::g17;
use crate::model::{ExplicitModel, ModelKind};

pub use simplex::{simplex, LinearProgram, Sense};

/// Largest variable count accepted by [`solve_lp`].
pub const SOLVER_LIMIT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `x_s = 1`
    Goal,
    /// `x_s = 0`: the goal is unreachable from `s`.
    Unreachable,
    /// `x_s >= Σ P(s,α,t)·x_t` for one choice α.
    Choice,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpConstraint {
    pub kind: ConstraintKind,
    pub state: usize,
    /// Coefficients per variable, by increasing variable index.
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Minimise `Σ x_s` subject to the reachability constraints, `0 <= x_s <= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub num_vars: usize,
    pub constraints: Vec<LpConstraint>,
}

impl LpProblem {
    pub fn count(&self, kind: ConstraintKind) -> usize {
        self.constraints.iter().filter(|c| c.kind == kind).count()
    }
}

/// The three-case encoding: goal states fixed to 1, states that cannot reach
/// the goal fixed to 0, one inequality per choice of every other state.
pub fn encode_reachability_lp(model: &ExplicitModel, goal: &BitVector) -> Result<LpProblem> {
    if !matches!(model.kind, ModelKind::Dtmc | ModelKind::Mdp) {
        return Err(Error::Unsupported(format!("LP encoding of {} models", model.kind)));
    }
    let n = model.num_states();
    if goal.len() != n {
        return Err(Error::Semantic("goal set size does not match the model".into()));
    }
    let prob0 = prob01_max(model, &BitVector::ones(n), goal).prob0;
    let m = &model.matrix;
    let mut constraints = Vec::new();
    for s in 0..n {
        if goal.get(s) {
            constraints.push(LpConstraint {
                kind: ConstraintKind::Goal,
                state: s,
                terms: vec![(s, 1.0)],
                rhs: 1.0,
            });
        } else if prob0.get(s) {
            constraints.push(LpConstraint {
                kind: ConstraintKind::Unreachable,
                state: s,
                terms: vec![(s, 1.0)],
                rhs: 0.0,
            });
        } else {
            for r in m.row_group(s) {
                let mut terms = vec![(s, 1.0)];
                for (t, p) in m.row(r).iter() {
                    if p == 0.0 {
                        continue;
                    }
                    match terms.binary_search_by_key(&t, |e| e.0) {
                        Ok(i) => terms[i].1 -= p,
                        Err(i) => terms.insert(i, (t, -p)),
                    }
                }
                constraints.push(LpConstraint {
                    kind: ConstraintKind::Choice,
                    state: s,
                    terms,
                    rhs: 0.0,
                });
            }
        }
    }
    Ok(LpProblem { num_vars: n, constraints })
}

/// Solves with the built-in simplex after substituting the fixed variables.
///
/// Works in `y = 1 - x`: every choice row `a·x >= b` becomes `a·y <= a·1 - b`,
/// whose right-hand side is non-negative because `x = 1` is feasible for this
/// encoding. The slack basis is then a feasible start and no phase 1 is needed.
pub fn solve_lp(problem: &LpProblem) -> Result<Vec<f64>> {
    let n = problem.num_vars;
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for c in &problem.constraints {
        if c.kind != ConstraintKind::Choice {
            fixed[c.state] = Some(c.rhs);
        }
    }
    let free: Vec<usize> = (0..n).filter(|&s| fixed[s].is_none()).collect();
    if free.len() > SOLVER_LIMIT {
        return Err(Error::TooLarge {
            variables: free.len(),
            limit: SOLVER_LIMIT,
        });
    }
    let mut column = vec![usize::MAX; n];
    for (j, &s) in free.iter().enumerate() {
        column[s] = j;
    }
    let mut lp = LinearProgram::new(free.len());
    lp.objective = vec![-1.0; free.len()];
    for c in problem.constraints.iter().filter(|c| c.kind == ConstraintKind::Choice) {
        let mut row = vec![0.0; free.len()];
        let mut rhs = -c.rhs;
        for &(v, a) in &c.terms {
            match fixed[v] {
                Some(x) => rhs += a * x,
                None => {
                    row[column[v]] += a;
                    rhs += a;
                }
            }
        }
        if rhs < -1e-9 {
            return Err(Error::Internal(format!("constraint of state {} excludes x = 1", c.state)));
        }
        lp.add(row, Sense::Le, rhs.max(0.0));
    }
    for j in 0..free.len() {
        let mut row = vec![0.0; free.len()];
        row[j] = 1.0;
        lp.add(row, Sense::Le, 1.0);
    }
    let y = simplex(&lp)?;
    Ok((0..n)
        .map(|s| fixed[s].unwrap_or_else(|| (1.0 - y[column[s]]).clamp(0.0, 1.0)))
        .collect())
}

/// CPLEX LP text; variables `x<state>`, constraints `c<i>` in emission order.
pub fn export_lp(problem: &LpProblem) -> String {
    let mut out = String::from("Minimize\n obj:");
    for s in 0..problem.num_vars {
        if s > 0 {
            out.push_str(" +");
            if s % 8 == 0 {
                out.push_str("\n   ");
            }
        }
        let _ = write!(out, " x{s}");
    }
    out.push_str("\nSubject To\n");
    for (i, c) in problem.constraints.iter().enumerate() {
        let _ = write!(out, " c{i}:");
        for (k, &(v, a)) in c.terms.iter().enumerate() {
            let sign = if a < 0.0 { "-" } else if k > 0 { "+" } else { "" };
            let mag = a.abs();
            let space = if k > 0 || a < 0.0 { " " } else { "" };
            let _ = write!(out, " {sign}{space}");
            if mag != 1.0 {
                let _ = write!(out, "{} ", g17(mag));
            }
            let _ = write!(out, "x{v}");
        }
        let op = if c.kind == ConstraintKind::Choice { ">=" } else { "=" };
        let _ = writeln!(out, " {op} {}", g17(c.rhs));
    }
    out.push_str("Bounds\n");
    for s in 0..problem.num_vars {
        let _ = writeln!(out, " 0 <= x{s} <= 1");
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MatrixBuilder;

    fn two_state() -> ExplicitModel {
        let mut b = MatrixBuilder::new(false);
        b.new_row_group();
        b.push_row([(0, 0.5), (1, 0.5)]);
        b.push_row([(0, 1.0)]);
        b.new_row_group();
        b.push_row([(1, 1.0)]);
        ExplicitModel::new(ModelKind::Mdp, b.finish(), 0)
    }

    #[test]
    fn encoding_cases() {
        let m = two_state();
        let p = encode_reachability_lp(&m, &BitVector::from_indices(2, [1])).unwrap();
        assert_eq!(p.count(ConstraintKind::Goal), 1);
        assert_eq!(p.count(ConstraintKind::Choice), 2);
        assert_eq!(p.constraints[0].terms, vec![(0, 0.5), (1, -0.5)]);
        assert_eq!(solve_lp(&p).unwrap(), vec![1.0, 1.0]);
        let none = encode_reachability_lp(&m, &BitVector::zeros(2)).unwrap();
        assert_eq!(none.count(ConstraintKind::Unreachable), 2);
        assert!(export_lp(&none).contains(" c0: x0 = 0\n c1: x1 = 0\n"));
    }

    #[test]
    fn export_shape() {
        let p = encode_reachability_lp(&two_state(), &BitVector::from_indices(2, [1])).unwrap();
        assert_eq!(
            export_lp(&p),
            "Minimize\n obj: x0 + x1\nSubject To\n c0: 0.5 x0 - 0.5 x1 >= 0\n c1: 0 x0 >= 0\n c2: x1 = 1\nBounds\n 0 <= x0 <= 1\n 0 <= x1 <= 1\nEnd\n"
        );
    }
}
