use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::{One, Zero};
use rayon::prelude::*;

use crate::bitvec::BitVector;
use crate::engines::{check_reachability, Direction, Environment};
use crate::error::{Error, Result};
use crate::format::g17;
use crate::model::{ExplicitModel, MatrixBuilder, ModelKind, RewardModel, ROW_SUM_TOLERANCE};
use crate::rational::{recover_from_f64, to_f64, to_text, Rational};

/// Polynomial expression over named parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamExpr {
    Const(Rational),
    Param(String),
    Add(Box<ParamExpr>, Box<ParamExpr>),
    Sub(Box<ParamExpr>, Box<ParamExpr>),
    Mul(Box<ParamExpr>, Box<ParamExpr>),
    Neg(Box<ParamExpr>),
}

impl ParamExpr {
    pub fn constant(r: Rational) -> Self {
        ParamExpr::Const(r)
    }

    /// Constant from a double, recovering simple fractions such as 1/6.
    pub fn constant_f64(x: f64) -> Self {
        ParamExpr::Const(recover_from_f64(x).unwrap_or_else(Rational::zero))
    }

    pub fn zero() -> Self {
        ParamExpr::Const(Rational::zero())
    }

    pub fn param(name: &str) -> Self {
        ParamExpr::Param(name.to_string())
    }

    pub fn eval(&self, valuation: &BTreeMap<String, Rational>) -> Result<Rational> {
        Ok(match self {
            ParamExpr::Const(r) => r.clone(),
            ParamExpr::Param(p) => valuation
                .get(p)
                .cloned()
                .ok_or_else(|| Error::Semantic(format!("parameter \"{p}\" is not bound")))?,
            ParamExpr::Add(a, b) => a.eval(valuation)? + b.eval(valuation)?,
            ParamExpr::Sub(a, b) => a.eval(valuation)? - b.eval(valuation)?,
            ParamExpr::Mul(a, b) => a.eval(valuation)? * b.eval(valuation)?,
            ParamExpr::Neg(a) => -a.eval(valuation)?,
        })
    }

    pub fn collect_parameters(&self, out: &mut BTreeSet<String>) {
        match self {
            ParamExpr::Const(_) => {}
            ParamExpr::Param(p) => {
                out.insert(p.clone());
            }
            ParamExpr::Add(a, b) | ParamExpr::Sub(a, b) | ParamExpr::Mul(a, b) => {
                a.collect_parameters(out);
                b.collect_parameters(out);
            }
            ParamExpr::Neg(a) => a.collect_parameters(out),
        }
    }

    fn is_const(&self, v: &Rational) -> bool {
        matches!(self, ParamExpr::Const(c) if c == v)
    }
}

impl Add for ParamExpr {
    type Output = ParamExpr;
    fn add(self, rhs: ParamExpr) -> ParamExpr {
        match (self, rhs) {
            (ParamExpr::Const(a), ParamExpr::Const(b)) => ParamExpr::Const(a + b),
            (a, b) if b.is_const(&Rational::zero()) => a,
            (a, b) if a.is_const(&Rational::zero()) => b,
            (a, b) => ParamExpr::Add(Box::new(a), Box::new(b)),
        }
    }
}

impl Sub for ParamExpr {
    type Output = ParamExpr;
    fn sub(self, rhs: ParamExpr) -> ParamExpr {
        match (self, rhs) {
            (ParamExpr::Const(a), ParamExpr::Const(b)) => ParamExpr::Const(a - b),
            (a, b) => ParamExpr::Sub(Box::new(a), Box::new(b)),
        }
    }
}

impl Mul for ParamExpr {
    type Output = ParamExpr;
    fn mul(self, rhs: ParamExpr) -> ParamExpr {
        match (self, rhs) {
            (ParamExpr::Const(a), ParamExpr::Const(b)) => ParamExpr::Const(a * b),
            (a, b) if b.is_const(&Rational::one()) => a,
            (a, b) if a.is_const(&Rational::one()) => b,
            (a, b) => ParamExpr::Mul(Box::new(a), Box::new(b)),
        }
    }
}

impl Neg for ParamExpr {
    type Output = ParamExpr;
    fn neg(self) -> ParamExpr {
        match self {
            ParamExpr::Const(a) => ParamExpr::Const(-a),
            a => ParamExpr::Neg(Box::new(a)),
        }
    }
}

impl fmt::Display for ParamExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamExpr::Const(r) => write!(f, "{}", to_text(r)),
            ParamExpr::Param(p) => f.write_str(p),
            ParamExpr::Add(a, b) => write!(f, "({a} + {b})"),
            ParamExpr::Sub(a, b) => write!(f, "({a} - {b})"),
            ParamExpr::Mul(a, b) => write!(f, "{a}*{b}"),
            ParamExpr::Neg(a) => write!(f, "-{a}"),
        }
    }
}

/// Model whose transition probabilities are expressions over parameters.
#[derive(Clone, Debug)]
pub struct ParametricModel {
    pub parameters: Vec<String>,
    pub row_group_offsets: Vec<usize>,
    pub rows: Vec<Vec<(usize, ParamExpr)>>,
    pub initial_states: BitVector,
    pub labels: BTreeMap<String, BitVector>,
    pub reward_models: BTreeMap<String, RewardModel>,
    pub choice_labels: Option<Vec<Option<String>>>,
}

impl ParametricModel {
    pub fn new(
        row_group_offsets: Vec<usize>,
        rows: Vec<Vec<(usize, ParamExpr)>>,
        initial_states: BitVector,
        labels: BTreeMap<String, BitVector>,
        reward_models: BTreeMap<String, RewardModel>,
        choice_labels: Option<Vec<Option<String>>>,
    ) -> Result<Self> {
        if row_group_offsets.last() != Some(&rows.len()) {
            return Err(Error::Model("row group offsets do not cover the rows".into()));
        }
        let mut params = BTreeSet::new();
        for (_, e) in rows.iter().flatten() {
            e.collect_parameters(&mut params);
        }
        Ok(ParametricModel {
            parameters: params.into_iter().collect(),
            row_group_offsets,
            rows,
            initial_states,
            labels,
            reward_models,
            choice_labels,
        })
    }

    pub fn num_states(&self) -> usize {
        self.row_group_offsets.len() - 1
    }

    /// Substitutes `valuation`, checks every row is a distribution, and
    /// drops zero entries.
    pub fn instantiate(&self, valuation: &BTreeMap<String, Rational>) -> Result<ExplicitModel> {
        if let Some(p) = self.parameters.iter().find(|p| !valuation.contains_key(*p)) {
            return Err(Error::Semantic(format!("parameter \"{p}\" is not bound")));
        }
        let mut b = MatrixBuilder::new(false);
        let mut kept_rows = Vec::with_capacity(self.rows.len());
        for s in 0..self.num_states() {
            b.new_row_group();
            for r in self.row_group_offsets[s]..self.row_group_offsets[s + 1] {
                let mut entries = Vec::with_capacity(self.rows[r].len());
                let mut sum = 0.0;
                for (t, e) in &self.rows[r] {
                    let v = e.eval(valuation)?;
                    if v < Rational::zero() || v > Rational::one() {
                        return Err(Error::Model(format!(
                            "state {s} row {r} entry {t}: probability {} outside [0, 1]",
                            to_text(&v)
                        )));
                    }
                    let x = to_f64(&v);
                    sum += x;
                    if !v.is_zero() {
                        entries.push((*t, x));
                    }
                }
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::Model(format!("state {s} row {r}: probabilities sum to {sum}")));
                }
                b.push_row(entries);
                kept_rows.push(r);
            }
        }
        let matrix = b.finish();
        let initial = self.initial_states.iter_ones().next().unwrap_or(0);
        let mut m = ExplicitModel::new(ModelKind::Mdp, matrix, initial);
        m.initial_states = self.initial_states.clone();
        m.labels = self.labels.clone();
        m.reward_models = self.reward_models.clone();
        m.choice_labels = self.choice_labels.clone();
        Ok(m)
    }
}

/// Cartesian grid of parameter values.
#[derive(Clone, Debug, Default)]
pub struct GridSpec {
    pub axes: BTreeMap<String, Vec<Rational>>,
}

impl GridSpec {
    /// `steps + 1` evenly spaced points from `lo` to `hi` per parameter.
    pub fn uniform(params: &[&str], lo: Rational, hi: Rational, steps: u32) -> Self {
        let points: Vec<Rational> = (0..=steps)
            .map(|i| {
                if steps == 0 {
                    lo.clone()
                } else {
                    &lo + (&hi - &lo) * Rational::new(i.into(), steps.into())
                }
            })
            .collect();
        GridSpec {
            axes: params.iter().map(|p| (p.to_string(), points.clone())).collect(),
        }
    }

    fn points(&self) -> Vec<BTreeMap<String, Rational>> {
        let mut out = vec![BTreeMap::new()];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|partial| {
                    values.iter().map(move |v| {
                        let mut p = partial.clone();
                        p.insert(name.clone(), v.clone());
                        p
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct GridRow {
    pub valuation: BTreeMap<String, Rational>,
    /// `Err` marks an invalid grid point with the reason.
    pub value: std::result::Result<f64, String>,
}

/// Checks `P dir=? [F goal]` at the initial state for every grid point.
pub fn sample_grid(
    model: &ParametricModel,
    goal: &str,
    dir: Direction,
    grid: &GridSpec,
    env: &Environment,
) -> Result<Vec<GridRow>> {
    let goal_bits = model
        .labels
        .get(goal)
        .ok_or_else(|| Error::Semantic(format!("unknown label \"{goal}\"")))?;
    let points = grid.points();
    Ok(points
        .into_par_iter()
        .map(|valuation| {
            let value = model
                .instantiate(&valuation)
                .and_then(|m| {
                    let r = check_reachability(&m, goal_bits, dir, env, false)?;
                    Ok(r.at(m.initial_state()))
                })
                .map_err(|e| e.to_string());
            GridRow { valuation, value }
        })
        .collect())
}

/// CSV with one column per parameter and a `value` column; invalid points
/// carry `invalid` instead of a number.
pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut out = String::new();
    let names: Vec<&String> = rows.first().map_or(Vec::new(), |r| r.valuation.keys().collect());
    for n in &names {
        out.push_str(n);
        out.push(',');
    }
    out.push_str("value\n");
    for r in rows {
        for v in r.valuation.values() {
            out.push_str(&g17(to_f64(v)));
            out.push(',');
        }
        match &r.value {
            Ok(x) => out.push_str(&g17(*x)),
            Err(_) => out.push_str("invalid"),
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn coin() -> ParametricModel {
        // 0 -p-> 1 (goal), 0 -(1-p)-> 2
        let rows = vec![
            vec![(1, ParamExpr::param("p")), (2, ParamExpr::constant(ratio(1, 1)) - ParamExpr::param("p"))],
            vec![(1, ParamExpr::constant_f64(1.0))],
            vec![(2, ParamExpr::constant_f64(1.0))],
        ];
        let mut labels = BTreeMap::new();
        labels.insert("goal".into(), BitVector::from_indices(3, [1]));
        ParametricModel::new(vec![0, 1, 2, 3], rows, BitVector::from_indices(3, [0]), labels, BTreeMap::new(), None)
            .unwrap()
    }

    #[test]
    fn instantiate_drops_zero_entries() {
        let m = coin();
        assert_eq!(m.parameters, vec!["p".to_string()]);
        let v = BTreeMap::from([("p".to_string(), ratio(0, 1))]);
        let inst = m.instantiate(&v).unwrap();
        assert_eq!(inst.matrix.row(0).columns, &[2]);
        assert!(crate::model::validate(&inst).is_empty());
    }

    #[test]
    fn out_of_range_names_entry() {
        let v = BTreeMap::from([("p".to_string(), ratio(3, 2))]);
        let err = coin().instantiate(&v).unwrap_err().to_string();
        assert!(err.contains("state 0 row 0 entry 1"), "{err}");
    }

    #[test]
    fn grid_flags_invalid_points() {
        let grid = GridSpec::uniform(&["p"], ratio(0, 1), ratio(2, 1), 2);
        let rows = sample_grid(&coin(), "goal", Direction::Max, &grid, &Environment::default()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].value, Ok(0.0));
        assert!((rows[1].value.clone().unwrap() - 1.0).abs() < 1e-12);
        assert!(rows[2].value.is_err());
        let csv = grid_csv(&rows);
        assert!(csv.starts_with("p,value\n0,0\n"));
        assert!(csv.ends_with("2,invalid\n"));
    }

    #[test]
    fn simple_fractions_recovered() {
        assert_eq!(ParamExpr::constant_f64(1.0 / 6.0), ParamExpr::Const(ratio(1, 6)));
    }
}
