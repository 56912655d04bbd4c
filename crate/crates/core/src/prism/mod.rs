//! PRISM-language subset: guarded-command MDP modules with integer
//! variables, constants, formulas, labels and state rewards.

mod build;
mod lexer;
mod parser;

use std::collections::BTreeMap;
use std::fmt;

use num::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rational::{int, to_text, Rational};

pub use build::{build_from_prism, BuildOptions};
pub use parser::parse_prism;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&",
            BinOp::Or => "|",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Int(i64),
    Real(Rational),
    Bool(bool),
    Ident(String),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub(crate) fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub(crate) fn visit_idents(&self, f: &mut impl FnMut(&str)) {
        match self {
            Expr::Ident(n) => f(n),
            Expr::Not(a) | Expr::Neg(a) => a.visit_idents(f),
            Expr::Binary(_, a, b) => {
                a.visit_idents(f);
                b.visit_idents(f);
            }
            _ => {}
        }
    }

    /// Replaces identifiers found in `subst`, leaving others untouched.
    pub(crate) fn substitute(&self, subst: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Ident(n) => subst(n).unwrap_or_else(|| self.clone()),
            Expr::Not(a) => Expr::Not(Box::new(a.substitute(subst))),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(subst))),
            Expr::Binary(op, a, b) => Expr::bin(*op, a.substitute(subst), b.substitute(subst)),
            _ => self.clone(),
        }
    }

    /// Evaluates constant subexpressions exactly.
    pub(crate) fn fold(&self) -> Result<Expr> {
        Ok(match self {
            Expr::Not(a) => match a.fold()? {
                Expr::Bool(b) => Expr::Bool(!b),
                Expr::Int(_) | Expr::Real(_) => return Err(type_error("!", "a number")),
                a => Expr::Not(Box::new(a)),
            },
            Expr::Neg(a) => match a.fold()? {
                Expr::Int(i) => Expr::Int(i.checked_neg().ok_or_else(overflow)?),
                Expr::Real(r) => Expr::Real(-r),
                Expr::Bool(_) => return Err(type_error("-", "a boolean")),
                a => Expr::Neg(Box::new(a)),
            },
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.fold()?, b.fold()?);
                match (literal(&a), literal(&b)) {
                    (Some(x), Some(y)) => apply(*op, x, y)?.into_expr(),
                    _ => Expr::bin(*op, a, b),
                }
            }
            _ => self.clone(),
        })
    }
}

fn overflow() -> Error {
    Error::Semantic("integer overflow in constant expression".into())
}

fn type_error(op: &str, what: &str) -> Error {
    Error::Semantic(format!("operator {op} applied to {what}"))
}

/// Exact value of a constant expression.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Lit {
    Int(i64),
    Real(Rational),
    Bool(bool),
}

impl Lit {
    fn into_expr(self) -> Expr {
        match self {
            Lit::Int(i) => Expr::Int(i),
            Lit::Real(r) => Expr::Real(r),
            Lit::Bool(b) => Expr::Bool(b),
        }
    }

    fn number(&self, op: BinOp) -> Result<Rational> {
        match self {
            Lit::Int(i) => Ok(int(*i)),
            Lit::Real(r) => Ok(r.clone()),
            Lit::Bool(_) => Err(type_error(op.symbol(), "a boolean")),
        }
    }
}

fn literal(e: &Expr) -> Option<Lit> {
    match e {
        Expr::Int(i) => Some(Lit::Int(*i)),
        Expr::Real(r) => Some(Lit::Real(r.clone())),
        Expr::Bool(b) => Some(Lit::Bool(*b)),
        _ => None,
    }
}

pub(crate) fn apply(op: BinOp, a: Lit, b: Lit) -> Result<Lit> {
    use BinOp::*;
    Ok(match op {
        And | Or => match (a, b) {
            (Lit::Bool(x), Lit::Bool(y)) => Lit::Bool(if op == And { x && y } else { x || y }),
            _ => return Err(type_error(op.symbol(), "a number")),
        },
        Eq | Ne if matches!((&a, &b), (Lit::Bool(_), Lit::Bool(_))) => {
            let same = a == b;
            Lit::Bool(if op == Eq { same } else { !same })
        }
        Add | Sub | Mul => match (&a, &b) {
            (Lit::Int(x), Lit::Int(y)) => Lit::Int(
                match op {
                    Add => x.checked_add(*y),
                    Sub => x.checked_sub(*y),
                    _ => x.checked_mul(*y),
                }
                .ok_or_else(overflow)?,
            ),
            _ => {
                let (x, y) = (a.number(op)?, b.number(op)?);
                Lit::Real(match op {
                    Add => x + y,
                    Sub => x - y,
                    _ => x * y,
                })
            }
        },
        Div => {
            let (x, y) = (a.number(op)?, b.number(op)?);
            if y.is_zero() {
                return Err(Error::Semantic("division by zero in constant expression".into()));
            }
            Lit::Real(x / y)
        }
        Eq | Ne | Lt | Le | Gt | Ge => {
            let (x, y) = (a.number(op)?, b.number(op)?);
            Lit::Bool(match op {
                Eq => x == y,
                Ne => x != y,
                Lt => x < y,
                Le => x <= y,
                Gt => x > y,
                _ => x >= y,
            })
        }
    })
}

/// Decimal text if `r` has a terminating expansion, `(n/d)` otherwise.
fn real_text(r: &Rational) -> String {
    let mut d = r.denom().clone();
    let mut digits = 0usize;
    let (two, five): (num::BigInt, num::BigInt) = (2.into(), 5.into());
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("({})", to_text(r));
    }
    digits += twos.max(fives).max(1);
    let scaled = r * Rational::from_integer(num::pow(num::BigInt::from(10), digits));
    let n = scaled.to_integer();
    let s = n.abs().to_string();
    let s = format!("{:0>width$}", s, width = digits + 1);
    let (ip, fp) = s.split_at(s.len() - digits);
    format!("{}{ip}.{fp}", if n.is_negative() { "-" } else { "" })
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(i) if *i < 0 => write!(f, "({i})"),
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Real(r) => f.write_str(&real_text(r)),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Ident(n) => f.write_str(n),
            Expr::Not(a) => write!(f, "!{a}"),
            Expr::Neg(a) => write!(f, "-{a}"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstType {
    Int,
    Double,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constant {
    pub name: String,
    pub ty: ConstType,
    pub value: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub low: Expr,
    pub high: Expr,
    pub init: Expr,
}

/// One probabilistic alternative: probability and assignments (empty = `true`).
#[derive(Clone, Debug, PartialEq)]
pub struct Update {
    pub probability: Expr,
    pub assignments: Vec<(String, Expr)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Command {
    pub action: Option<String>,
    pub guard: Expr,
    pub updates: Vec<Update>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrismModule {
    pub name: String,
    pub variables: Vec<Variable>,
    pub commands: Vec<Command>,
}

impl PrismModule {
    /// Actions occurring syntactically in the module.
    pub fn alphabet(&self) -> Vec<&str> {
        let mut a: Vec<&str> = self.commands.iter().filter_map(|c| c.action.as_deref()).collect();
        a.sort_unstable();
        a.dedup();
        a
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardStructure {
    pub name: String,
    /// State-reward items `guard : value`.
    pub items: Vec<(Expr, Expr)>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PrismProgram {
    pub constants: Vec<Constant>,
    pub formulas: Vec<(String, Expr)>,
    pub modules: Vec<PrismModule>,
    pub labels: Vec<(String, Expr)>,
    pub rewards: Vec<RewardStructure>,
}

impl PrismProgram {
    /// Folds all constants to literals and expands formulas.
    ///
    /// Constants without a definition must be bound; derived constants are
    /// evaluated exactly (so `1 - 1/6 - 1/6` is exactly 2/3).
    pub fn instantiate_constants(&self, bindings: &BTreeMap<String, Rational>) -> Result<PrismProgram> {
        for name in bindings.keys() {
            match self.constants.iter().find(|c| &c.name == name) {
                None => return Err(Error::Config(format!("no constant named \"{name}\" to bind"))),
                Some(c) if c.value.is_some() => {
                    return Err(Error::Config(format!("constant \"{name}\" is already defined in the model")))
                }
                _ => {}
            }
        }
        let mut values: BTreeMap<String, Expr> = BTreeMap::new();
        let mut constants = Vec::with_capacity(self.constants.len());
        for c in &self.constants {
            let value = match &c.value {
                Some(e) => {
                    let e = e.substitute(&|n| values.get(n).cloned());
                    e.fold()?
                }
                None => match bindings.get(&c.name) {
                    Some(r) => Expr::Real(r.clone()),
                    None => {
                        return Err(Error::Config(format!(
                            "constant \"{}\" has no value; bind it (e.g. {}=...)",
                            c.name, c.name
                        )))
                    }
                },
            };
            let value = match (c.ty, literal(&value)) {
                (ConstType::Int, Some(Lit::Int(i))) => Expr::Int(i),
                (ConstType::Int, Some(Lit::Real(r))) if r.is_integer() => {
                    Expr::Int(r.to_integer().to_i64().ok_or_else(overflow)?)
                }
                (ConstType::Double, Some(Lit::Int(i))) => Expr::Real(int(i)),
                (ConstType::Double, Some(Lit::Real(r))) => Expr::Real(r),
                (_, Some(Lit::Bool(_))) | (_, None) | (ConstType::Int, Some(Lit::Real(_))) => {
                    return Err(Error::Semantic(format!(
                        "constant \"{}\" does not evaluate to a {} value",
                        c.name,
                        if c.ty == ConstType::Int { "int" } else { "double" }
                    )))
                }
            };
            values.insert(c.name.clone(), value.clone());
            constants.push(Constant {
                name: c.name.clone(),
                ty: c.ty,
                value: Some(value),
            });
        }
        let formulas = self.expanded_formulas()?;
        let resolve = |e: &Expr| -> Result<Expr> {
            e.substitute(&|n| formulas.get(n).cloned())
                .substitute(&|n| values.get(n).cloned())
                .fold()
        };
        let mut out = PrismProgram {
            constants,
            ..PrismProgram::default()
        };
        for (name, _) in &self.formulas {
            out.formulas.push((name.clone(), resolve(&formulas[name])?));
        }
        for m in &self.modules {
            let mut pm = PrismModule {
                name: m.name.clone(),
                variables: Vec::new(),
                commands: Vec::new(),
            };
            for v in &m.variables {
                pm.variables.push(Variable {
                    name: v.name.clone(),
                    low: resolve(&v.low)?,
                    high: resolve(&v.high)?,
                    init: resolve(&v.init)?,
                });
            }
            for c in &m.commands {
                let mut updates = Vec::new();
                for u in &c.updates {
                    updates.push(Update {
                        probability: resolve(&u.probability)?,
                        assignments: u
                            .assignments
                            .iter()
                            .map(|(n, e)| Ok((n.clone(), resolve(e)?)))
                            .collect::<Result<_>>()?,
                    });
                }
                pm.commands.push(Command {
                    action: c.action.clone(),
                    guard: resolve(&c.guard)?,
                    updates,
                });
            }
            out.modules.push(pm);
        }
        for (n, e) in &self.labels {
            out.labels.push((n.clone(), resolve(e)?));
        }
        for r in &self.rewards {
            out.rewards.push(RewardStructure {
                name: r.name.clone(),
                items: r
                    .items
                    .iter()
                    .map(|(g, v)| Ok((resolve(g)?, resolve(v)?)))
                    .collect::<Result<_>>()?,
            });
        }
        Ok(out)
    }

    /// Formula bodies with other formulas expanded; rejects cycles.
    fn expanded_formulas(&self) -> Result<BTreeMap<String, Expr>> {
        fn expand(
            name: &str,
            program: &PrismProgram,
            done: &mut BTreeMap<String, Expr>,
            stack: &mut Vec<String>,
        ) -> Result<()> {
            if done.contains_key(name) {
                return Ok(());
            }
            if stack.iter().any(|s| s == name) {
                return Err(Error::Semantic(format!("formula \"{name}\" is defined cyclically")));
            }
            let body = &program.formulas.iter().find(|(n, _)| n == name).expect("formula exists").1;
            stack.push(name.to_string());
            let mut deps = Vec::new();
            body.visit_idents(&mut |n| {
                if program.formulas.iter().any(|(f, _)| f == n) {
                    deps.push(n.to_string());
                }
            });
            for d in deps {
                expand(&d, program, done, stack)?;
            }
            stack.pop();
            let e = body.substitute(&|n| done.get(n).cloned());
            done.insert(name.to_string(), e);
            Ok(())
        }
        let mut done = BTreeMap::new();
        for (n, _) in &self.formulas {
            expand(n, self, &mut done, &mut Vec::new())?;
        }
        Ok(done)
    }
}

impl fmt::Display for PrismProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mdp")?;
        for c in &self.constants {
            let ty = match c.ty {
                ConstType::Int => "int",
                ConstType::Double => "double",
            };
            match &c.value {
                Some(v) => writeln!(f, "const {ty} {} = {v};", c.name)?,
                None => writeln!(f, "const {ty} {};", c.name)?,
            }
        }
        for (n, e) in &self.formulas {
            writeln!(f, "formula {n} = {e};")?;
        }
        for m in &self.modules {
            writeln!(f, "\nmodule {}", m.name)?;
            for v in &m.variables {
                writeln!(f, "  {} : [{}..{}] init {};", v.name, v.low, v.high, v.init)?;
            }
            for c in &m.commands {
                write!(f, "  [{}] {} -> ", c.action.as_deref().unwrap_or(""), c.guard)?;
                for (i, u) in c.updates.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{} : ", u.probability)?;
                    if u.assignments.is_empty() {
                        write!(f, "true")?;
                    }
                    for (k, (v, e)) in u.assignments.iter().enumerate() {
                        if k > 0 {
                            write!(f, " & ")?;
                        }
                        write!(f, "({v}'={e})")?;
                    }
                }
                writeln!(f, ";")?;
            }
            writeln!(f, "endmodule")?;
        }
        for (n, e) in &self.labels {
            writeln!(f, "label \"{n}\" = {e};")?;
        }
        for r in &self.rewards {
            writeln!(f, "rewards \"{}\"", r.name)?;
            for (g, v) in &r.items {
                writeln!(f, "  {g} : {v};")?;
            }
            writeln!(f, "endrewards")?;
        }
        Ok(())
    }
}
