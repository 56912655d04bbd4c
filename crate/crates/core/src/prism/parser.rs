use std::collections::BTreeSet;

use super::lexer::{tokenize, Tok, Token};
use super::{BinOp, Command, ConstType, Constant, Expr, PrismModule, PrismProgram, RewardStructure, Update, Variable};
use crate::error::{Error, Result};
use crate::rational::parse_decimal;

const OTHER_KINDS: &[&str] = &["dtmc", "ctmc", "pomdp", "pta", "smg", "probabilistic", "nondeterministic", "stochastic"];
const OUT_OF_SUBSET: &[&str] = &["global", "init", "system", "endsystem", "rate", "invariant", "observables", "player"];
const FUNCTIONS: &[&str] = &["min", "max", "floor", "ceil", "pow", "mod", "log", "func"];

/// Parses a program of the supported subset and resolves all names.
pub fn parse_prism(text: &str) -> Result<PrismProgram> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        refs: Vec::new(),
    };
    let program = p.program()?;
    check_names(&program, &p.refs)?;
    Ok(program)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Identifier references with their positions, resolved after parsing.
    refs: Vec<(String, usize, usize)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let t = &self.toks[self.pos];
        Err(Error::parse(t.line, t.column, message))
    }

    fn unsupported<T>(&self, what: &str) -> Result<T> {
        let t = &self.toks[self.pos];
        Err(Error::Unsupported(format!(
            "{what} (line {}, column {}) is outside the supported PRISM subset",
            t.line, t.column
        )))
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("\"{s}\""),
            Tok::Int(i) => i.to_string(),
            Tok::Real(r) => r.clone(),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Sym(s) => format!("'{s}'"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected '{s}', found {}", Self::describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, s: &str) -> Result<()> {
        if self.is_kw(s) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected \"{s}\", found {}", Self::describe(self.peek())))
        }
    }

    fn name(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.pos += 1;
                Ok(s)
            }
            t => self.error(format!("expected a name, found {}", Self::describe(&t))),
        }
    }

    fn string(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.pos += 1;
                Ok(s)
            }
            t => self.error(format!("expected a quoted name, found {}", Self::describe(&t))),
        }
    }

    fn program(&mut self) -> Result<PrismProgram> {
        match self.peek().clone() {
            Tok::Ident(k) if k == "mdp" => self.pos += 1,
            Tok::Ident(k) if OTHER_KINDS.contains(&k.as_str()) => {
                return Err(Error::Unsupported(format!("model type \"{k}\" (only mdp is supported)")))
            }
            t => return self.error(format!("expected model type \"mdp\", found {}", Self::describe(&t))),
        }
        let mut prog = PrismProgram::default();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(k) => match k.as_str() {
                    "const" => prog.constants.push(self.constant()?),
                    "formula" => {
                        self.pos += 1;
                        let n = self.name()?;
                        self.expect_sym("=")?;
                        let e = self.expr()?;
                        self.expect_sym(";")?;
                        prog.formulas.push((n, e));
                    }
                    "module" => prog.modules.push(self.module()?),
                    "label" => {
                        self.pos += 1;
                        let n = self.string()?;
                        self.expect_sym("=")?;
                        let e = self.expr()?;
                        self.expect_sym(";")?;
                        prog.labels.push((n, e));
                    }
                    "rewards" => prog.rewards.push(self.rewards()?),
                    k if OUT_OF_SUBSET.contains(&k) => return self.unsupported(&format!("\"{k}\" block")),
                    k if OTHER_KINDS.contains(&k) => return self.error("model type declared twice"),
                    _ => return self.error(format!("unexpected {}", Self::describe(self.peek()))),
                },
                t => return self.error(format!("unexpected {}", Self::describe(&t))),
            }
        }
        Ok(prog)
    }

    fn constant(&mut self) -> Result<Constant> {
        self.expect_kw("const")?;
        let ty = match self.peek().clone() {
            Tok::Ident(t) if t == "int" => {
                self.pos += 1;
                ConstType::Int
            }
            Tok::Ident(t) if t == "double" => {
                self.pos += 1;
                ConstType::Double
            }
            Tok::Ident(t) if t == "bool" => return self.unsupported("boolean constant"),
            _ => ConstType::Int,
        };
        let name = self.name()?;
        let value = if self.eat_sym("=") { Some(self.expr()?) } else { None };
        self.expect_sym(";")?;
        Ok(Constant { name, ty, value })
    }

    fn module(&mut self) -> Result<PrismModule> {
        self.expect_kw("module")?;
        let name = self.name()?;
        if self.is_sym("=") {
            return self.unsupported("module renaming");
        }
        let mut m = PrismModule {
            name,
            variables: Vec::new(),
            commands: Vec::new(),
        };
        loop {
            if self.is_kw("endmodule") {
                self.pos += 1;
                return Ok(m);
            }
            if self.is_sym("[") {
                m.commands.push(self.command()?);
            } else if self.is_kw("global") {
                return self.unsupported("global variable");
            } else if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Sym(":")) {
                m.variables.push(self.variable()?);
            } else {
                return self.error(format!(
                    "expected a variable, a command or \"endmodule\", found {}",
                    Self::describe(self.peek())
                ));
            }
        }
    }

    fn variable(&mut self) -> Result<Variable> {
        let name = self.name()?;
        self.expect_sym(":")?;
        if self.is_kw("bool") {
            return self.unsupported("boolean variable");
        }
        self.expect_sym("[")?;
        let low = self.expr()?;
        self.expect_sym("..")?;
        let high = self.expr()?;
        self.expect_sym("]")?;
        if self.is_sym(";") {
            return self.error("variable needs an \"init\" value");
        }
        self.expect_kw("init")?;
        let init = self.expr()?;
        self.expect_sym(";")?;
        Ok(Variable { name, low, high, init })
    }

    fn command(&mut self) -> Result<Command> {
        self.expect_sym("[")?;
        let action = if self.is_sym("]") { None } else { Some(self.name()?) };
        self.expect_sym("]")?;
        let guard = self.expr()?;
        self.expect_sym("->")?;
        let mut updates = Vec::new();
        loop {
            // A lone update without probability means probability 1.
            let implicit = (self.is_kw("true") && matches!(self.peek_at(1), Tok::Sym(";")))
                || (self.is_sym("(") && matches!(self.peek_at(2), Tok::Sym("'")));
            let probability = if implicit {
                Expr::Int(1)
            } else {
                let p = self.expr()?;
                self.expect_sym(":")?;
                p
            };
            let assignments = self.update()?;
            updates.push(Update { probability, assignments });
            if !self.eat_sym("+") {
                break;
            }
        }
        self.expect_sym(";")?;
        Ok(Command { action, guard, updates })
    }

    fn update(&mut self) -> Result<Vec<(String, Expr)>> {
        if self.is_kw("true") {
            self.pos += 1;
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        loop {
            self.expect_sym("(")?;
            let v = self.name()?;
            self.expect_sym("'")?;
            self.expect_sym("=")?;
            let e = self.expr()?;
            self.expect_sym(")")?;
            out.push((v, e));
            if !self.eat_sym("&") {
                return Ok(out);
            }
        }
    }

    fn rewards(&mut self) -> Result<RewardStructure> {
        self.expect_kw("rewards")?;
        let name = if matches!(self.peek(), Tok::Str(_)) { self.string()? } else { String::new() };
        let mut items = Vec::new();
        while !self.is_kw("endrewards") {
            if self.is_sym("[") {
                return self.unsupported("transition reward");
            }
            if matches!(self.peek(), Tok::Eof) {
                return self.error("missing \"endrewards\"");
            }
            let g = self.expr()?;
            self.expect_sym(":")?;
            let v = self.expr()?;
            self.expect_sym(";")?;
            items.push((g, v));
        }
        self.pos += 1;
        Ok(RewardStructure { name, items })
    }

    // Precedence, loosest first: | & ! relations +- */ unary-minus.
    fn expr(&mut self) -> Result<Expr> {
        if self.is_sym("=>") || self.is_sym("<=>") {
            return self.unsupported("implication");
        }
        let mut e = self.and()?;
        while self.eat_sym("|") {
            e = Expr::bin(BinOp::Or, e, self.and()?);
        }
        if self.is_sym("?") {
            return self.unsupported("conditional expression");
        }
        if self.is_sym("=>") || self.is_sym("<=>") {
            return self.unsupported("implication");
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<Expr> {
        let mut e = self.not()?;
        while self.is_sym("&") && !self.starts_assignment(1) {
            self.pos += 1;
            e = Expr::bin(BinOp::And, e, self.not()?);
        }
        Ok(e)
    }

    /// Whether `(name'` follows at offset `k`; separates update conjunctions
    /// from boolean ones.
    fn starts_assignment(&self, k: usize) -> bool {
        matches!(self.peek_at(k), Tok::Sym("(")) && matches!(self.peek_at(k + 2), Tok::Sym("'"))
    }

    fn not(&mut self) -> Result<Expr> {
        if self.eat_sym("!") {
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.relation()
    }

    fn relation(&mut self) -> Result<Expr> {
        let e = self.additive()?;
        let op = match self.peek() {
            Tok::Sym("=") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            _ => return Ok(e),
        };
        self.pos += 1;
        Ok(Expr::bin(op, e, self.additive()?))
    }

    fn additive(&mut self) -> Result<Expr> {
        let mut e = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(e),
            };
            self.pos += 1;
            e = Expr::bin(op, e, self.multiplicative()?);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                _ => return Ok(e),
            };
            self.pos += 1;
            e = Expr::bin(op, e, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.toks[self.pos].clone();
        match t.tok {
            Tok::Int(i) => {
                self.pos += 1;
                Ok(Expr::Int(i))
            }
            Tok::Real(r) => {
                self.pos += 1;
                let v = parse_decimal(&r).ok_or_else(|| Error::parse(t.line, t.column, format!("bad number {r}")))?;
                Ok(Expr::Real(v))
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(ref k) if k == "true" || k == "false" => {
                self.pos += 1;
                Ok(Expr::Bool(k == "true"))
            }
            Tok::Ident(ref k) if FUNCTIONS.contains(&k.as_str()) && matches!(self.peek_at(1), Tok::Sym("(")) => {
                self.unsupported(&format!("function \"{k}\""))
            }
            Tok::Ident(ref k) if !is_keyword(k) => {
                self.pos += 1;
                self.refs.push((k.clone(), t.line, t.column));
                Ok(Expr::Ident(k.clone()))
            }
            Tok::Sym("\"") | Tok::Str(_) => self.unsupported("label reference inside an expression"),
            ref other => self.error(format!("expected an expression, found {}", Self::describe(other))),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "mdp" | "const" | "int" | "double" | "bool" | "formula" | "module" | "endmodule" | "label" | "rewards"
            | "endrewards" | "init" | "true" | "false" | "global"
    )
}

fn check_names(p: &PrismProgram, refs: &[(String, usize, usize)]) -> Result<()> {
    let mut seen = BTreeSet::new();
    let vars = p.modules.iter().flat_map(|m| m.variables.iter().map(|v| &v.name));
    let all = p
        .constants
        .iter()
        .map(|c| &c.name)
        .chain(p.formulas.iter().map(|f| &f.0))
        .chain(vars);
    for n in all {
        if !seen.insert(n.clone()) {
            return Err(Error::Semantic(format!("\"{n}\" is declared more than once")));
        }
    }
    let mut modules = BTreeSet::new();
    for m in &p.modules {
        if !modules.insert(&m.name) {
            return Err(Error::Semantic(format!("module \"{}\" is declared more than once", m.name)));
        }
    }
    let mut labels = BTreeSet::new();
    for (l, _) in &p.labels {
        if !labels.insert(l) {
            return Err(Error::Semantic(format!("label \"{l}\" is declared more than once")));
        }
    }
    for (n, line, col) in refs {
        if !seen.contains(n) {
            return Err(Error::Semantic(format!("undefined identifier \"{n}\" at line {line}, column {col}")));
        }
    }
    for m in &p.modules {
        for c in &m.commands {
            for u in &c.updates {
                for (v, _) in &u.assignments {
                    if !m.variables.iter().any(|x| &x.name == v) {
                        return Err(Error::Semantic(format!(
                            "module \"{}\" assigns \"{v}\", which is not one of its variables",
                            m.name
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}
