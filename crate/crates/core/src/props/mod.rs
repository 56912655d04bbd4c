//! Property strings: probability and reward queries over eventually-formulas
//! with label-only state formulas.

mod parser;

use std::fmt;

use crate::bitvec::BitVector;
use crate::engines::Direction;
use crate::error::Result;
use crate::format::g17;
use crate::model::ExplicitModel;

pub use parser::parse_property;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateFormula {
    True,
    False,
    Label(String),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
}

impl StateFormula {
    pub fn labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            StateFormula::Label(l) => out.push(l),
            StateFormula::Not(a) => a.collect_labels(out),
            StateFormula::And(a, b) | StateFormula::Or(a, b) => {
                a.collect_labels(out);
                b.collect_labels(out);
            }
            StateFormula::True | StateFormula::False => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            StateFormula::Or(..) => 0,
            StateFormula::And(..) => 1,
            _ => 2,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            StateFormula::True => f.write_str("true")?,
            StateFormula::False => f.write_str("false")?,
            StateFormula::Label(l) => write!(f, "\"{l}\"")?,
            StateFormula::Not(a) => {
                f.write_str("!")?;
                a.fmt_at(f, 2)?;
            }
            StateFormula::And(a, b) => {
                a.fmt_at(f, 1)?;
                f.write_str(" & ")?;
                b.fmt_at(f, 2)?;
            }
            StateFormula::Or(a, b) => {
                a.fmt_at(f, 0)?;
                f.write_str(" | ")?;
                b.fmt_at(f, 1)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Operator {
    Probability,
    Reward(String),
    /// A bare state formula, answered with 1/0 per state.
    LabelQuery,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Ge,
    Gt,
    Le,
    Lt,
}

impl Relation {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Ge => value >= threshold,
            Relation::Gt => value > threshold,
            Relation::Le => value <= threshold,
            Relation::Lt => value < threshold,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Ge => ">=",
            Relation::Gt => ">",
            Relation::Le => "<=",
            Relation::Lt => "<",
        }
    }
}

/// `F{"reward"}<=k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardBound {
    pub reward: String,
    pub bound: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyAst {
    pub operator: Operator,
    pub direction: Option<Direction>,
    pub bound: Option<(Relation, f64)>,
    pub reward_bound: Option<RewardBound>,
    /// Goal of `F`, or the queried formula for a label query.
    pub formula: StateFormula,
}

impl PropertyAst {
    /// Whether `value` satisfies the bound; `None` for `=?` queries.
    pub fn holds(&self, value: f64) -> Option<bool> {
        self.bound.map(|(rel, t)| rel.holds(value, t))
    }
}

impl fmt::Display for PropertyAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.operator {
            Operator::LabelQuery => return write!(f, "{}", self.formula),
            Operator::Probability => f.write_str("P")?,
            Operator::Reward(r) => write!(f, "R{{\"{r}\"}}")?,
        }
        if let Some(d) = self.direction {
            write!(f, "{d}")?;
        }
        match self.bound {
            Some((rel, t)) => write!(f, "{}{}", rel.symbol(), g17(t))?,
            None => f.write_str("=?")?,
        }
        f.write_str(" [F")?;
        if let Some(rb) = &self.reward_bound {
            write!(f, "{{\"{}\"}}<={}", rb.reward, rb.bound)?;
        }
        write!(f, " {}]", self.formula)
    }
}

/// Pointwise evaluation of a state formula over the model's labels.
pub fn evaluate_state_formula(model: &ExplicitModel, formula: &StateFormula) -> Result<BitVector> {
    let n = model.num_states();
    Ok(match formula {
        StateFormula::True => BitVector::ones(n),
        StateFormula::False => BitVector::zeros(n),
        StateFormula::Label(l) => model.label(l)?.clone(),
        StateFormula::Not(a) => evaluate_state_formula(model, a)?.complement(),
        StateFormula::And(a, b) => evaluate_state_formula(model, a)?.and(&evaluate_state_formula(model, b)?),
        StateFormula::Or(a, b) => evaluate_state_formula(model, a)?.or(&evaluate_state_formula(model, b)?),
    })
}
