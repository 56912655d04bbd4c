use super::UncertaintyMode;
use crate::bitvec::BitVector;
use crate::engines::{CheckResult, Direction, Environment, Method, ResultValues};
use crate::error::{Error, Result};
use crate::model::{ExplicitModel, ModelKind, Scheduler, ROW_SUM_TOLERANCE};

/// Extremal expectation of `values` over distributions within `intervals`.
///
/// Sort-and-saturate: every entry starts at its lower bound, the remaining
/// mass goes to entries in order of decreasing (`maximize`) or increasing
/// value, each up to its upper bound. Equal values favour the lower index.
pub fn inner_extremum(intervals: &[(f64, f64)], values: &[f64], maximize: bool) -> Result<(f64, Vec<f64>)> {
    let mut order: Vec<usize> = (0..intervals.len()).collect();
    let mut witness = vec![0.0; intervals.len()];
    let (expectation, rest) = saturate(intervals, values, maximize, &mut order, &mut witness)?;
    if rest > ROW_SUM_TOLERANCE {
        return Err(Error::Model(format!("interval row is not realizable: {rest} probability mass left over")));
    }
    Ok((expectation, witness))
}

fn saturate(
    intervals: &[(f64, f64)],
    values: &[f64],
    maximize: bool,
    order: &mut [usize],
    witness: &mut [f64],
) -> Result<(f64, f64)> {
    if intervals.len() != values.len() {
        return Err(Error::Internal("interval and value lengths differ".into()));
    }
    let lower: f64 = intervals.iter().map(|i| i.0).sum();
    if lower > 1.0 + ROW_SUM_TOLERANCE {
        return Err(Error::Model(format!("interval row is not realizable: lower bounds sum to {lower}")));
    }
    order.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        (if maximize { c.reverse() } else { c }).then(a.cmp(&b))
    });
    let mut rest = 1.0 - lower;
    let mut expectation = 0.0;
    for (i, &(l, _)) in intervals.iter().enumerate() {
        witness[i] = l;
    }
    for &i in order.iter() {
        if rest <= 0.0 {
            break;
        }
        let add = (intervals[i].1 - intervals[i].0).min(rest);
        witness[i] += add;
        rest -= add;
    }
    for (w, v) in witness.iter().zip(values) {
        expectation += w * v;
    }
    Ok((expectation, rest.max(0.0)))
}

/// Optimal reachability probability in an interval MDP, where each visit
/// may resolve the intervals anew (cooperatively or against the scheduler).
/// For reachability this coincides with fixing one resolution up front.
pub fn check_interval_reachability(
    model: &ExplicitModel,
    goal: &BitVector,
    dir: Direction,
    mode: UncertaintyMode,
    env: &Environment,
) -> Result<CheckResult> {
    if model.kind != ModelKind::Imdp {
        return Err(Error::Unsupported(format!("interval checking needs an IMDP, got {}", model.kind)));
    }
    env.check()?;
    let n = model.num_states();
    if goal.len() != n {
        return Err(Error::Semantic("goal set size does not match the model".into()));
    }
    let m = &model.matrix;
    let maximize_inner = match (mode, dir) {
        (UncertaintyMode::Cooperative, d) => d == Direction::Max,
        (UncertaintyMode::Robust, d) => d == Direction::Min,
    };
    for r in 0..m.num_rows() {
        let (lo, hi) = m.row(r).iter_intervals().fold((0.0, 0.0), |(a, b), (_, l, u)| (a + l, b + u));
        if lo > 1.0 + ROW_SUM_TOLERANCE || hi < 1.0 - ROW_SUM_TOLERANCE {
            return Err(Error::Model(format!(
                "state {} row {r}: intervals are not realizable (lower sum {lo}, upper sum {hi})",
                m.state_of_row(r)
            )));
        }
    }
    let unknown: Vec<usize> = (0..n).filter(|&s| !goal.get(s)).collect();
    let mut x: Vec<f64> = (0..n).map(|s| if goal.get(s) { 1.0 } else { 0.0 }).collect();
    let mut y = x.clone();
    let in_place = env.method != Method::ValueIteration;

    let mut intervals = Vec::new();
    let mut vals = Vec::new();
    let mut order = Vec::new();
    let mut witness = Vec::new();
    let mut row_value = |r: usize, x: &[f64]| -> Result<f64> {
        intervals.clear();
        vals.clear();
        for (t, l, u) in m.row(r).iter_intervals() {
            intervals.push((l, u));
            vals.push(x[t]);
        }
        order.clear();
        order.extend(0..intervals.len());
        witness.resize(intervals.len(), 0.0);
        Ok(saturate(&intervals, &vals, maximize_inner, &mut order, &mut witness)?.0)
    };
    let mut best_rows = vec![0usize; n];
    let mut diff = f64::INFINITY;
    for _ in 0..env.max_iterations {
        diff = 0.0;
        for &s in unknown.iter().rev() {
            let mut best = f64::NAN;
            for r in m.row_group(s) {
                let v = row_value(r, if in_place { &x } else { &y })?;
                if best.is_nan() || dir.better(v, best, 1e-12) {
                    best = v;
                    best_rows[s] = r - m.row_group(s).start;
                }
            }
            let d = (best - x[s]).abs();
            diff = diff.max(if env.relative && best != 0.0 { d / best.abs() } else { d });
            x[s] = best;
        }
        if !in_place {
            y.copy_from_slice(&x);
        }
        if diff < env.precision {
            return Ok(CheckResult {
                values: ResultValues::Scalar(x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()),
                scheduler: Some(Scheduler::new(best_rows)),
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: env.max_iterations,
        last_difference: diff,
        last_iterate: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MatrixBuilder;

    #[test]
    fn saturates_towards_extremum() {
        let (e, w) = inner_extremum(&[(0.0, 1.0), (0.0, 1.0)], &[1.0, 0.0], true).unwrap();
        assert_eq!((e, w), (1.0, vec![1.0, 0.0]));
        let (e, _) = inner_extremum(&[(0.25, 0.75), (0.25, 0.75)], &[1.0, 0.0], false).unwrap();
        assert_eq!(e, 0.25);
        assert!(inner_extremum(&[(0.6, 0.7), (0.6, 0.7)], &[1.0, 0.0], true).is_err());
        assert!(inner_extremum(&[(0.1, 0.2), (0.1, 0.2)], &[1.0, 0.0], true).is_err());
    }

    #[test]
    fn ties_prefer_lower_index() {
        let (_, w) = inner_extremum(&[(0.0, 1.0), (0.0, 1.0)], &[0.5, 0.5], true).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
    }

    fn coin(eps: f64) -> ExplicitModel {
        let mut b = MatrixBuilder::new(true);
        b.new_row_group();
        b.push_interval_row([(0, 0.5 - eps, 0.5 + eps), (1, 0.25 - eps, 0.25 + eps), (2, 0.25 - eps, 0.25 + eps)]);
        b.new_row_group();
        b.push_interval_row([(1, 1.0, 1.0)]);
        b.new_row_group();
        b.push_interval_row([(2, 1.0, 1.0)]);
        ExplicitModel::new(ModelKind::Imdp, b.finish(), 0)
    }

    #[test]
    fn modes_bracket_point_value() {
        let goal = BitVector::from_indices(3, [1]);
        let env = Environment::default();
        let value = |eps, mode| {
            check_interval_reachability(&coin(eps), &goal, Direction::Max, mode, &env).unwrap().at(0)
        };
        for mode in [UncertaintyMode::Robust, UncertaintyMode::Cooperative] {
            assert!((value(0.0, mode) - 0.5).abs() < 1e-6);
        }
        // From state 0: goal weight p1 with loop weight p0 gives p1 / (p1 + p2).
        assert!((value(0.1, UncertaintyMode::Cooperative) - 0.35 / 0.5).abs() < 1e-6);
        assert!((value(0.1, UncertaintyMode::Robust) - 0.15 / 0.5).abs() < 1e-6);
    }
}
