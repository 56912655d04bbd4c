use super::{Operator, PropertyAst, Relation, RewardBound, StateFormula};
use crate::engines::Direction;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

const SYMBOLS: &[&str] = &["=?", "||", "<=", ">=", "<", ">", "=", "[", "]", "{", "}", "(", ")", "!", "&", "|", ","];

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let b: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(b[start..i].iter().collect()), start + 1));
        } else if c.is_ascii_digit() || c == '.' {
            while i < b.len()
                && (b[i].is_ascii_digit()
                    || matches!(b[i], '.' | 'e' | 'E')
                    || (matches!(b[i], '-' | '+') && matches!(b[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            out.push((Tok::Num(b[start..i].iter().collect()), start + 1));
        } else if c == '"' {
            i += 1;
            while i < b.len() && b[i] != '"' {
                i += 1;
            }
            if i == b.len() {
                return Err(Error::parse(1, start + 1, "unterminated label name"));
            }
            out.push((Tok::Str(b[start + 1..i].iter().collect()), start + 1));
            i += 1;
        } else {
            let rest: String = b[i..(i + 2).min(b.len())].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    i += s.len();
                    out.push((Tok::Sym(s), start + 1));
                }
                None => return Err(Error::parse(1, start + 1, format!("unexpected character '{c}'"))),
            }
        }
    }
    out.push((Tok::Eof, b.len() + 1));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn unsupported<T>(construct: &str) -> Result<T> {
    Err(Error::Unsupported(construct.to_string()))
}

/// Parses `P[min|max](=?|~t) [F[{"r"}<=k] φ]`, `R{"r"}[min|max](=?|~t) [F φ]`
/// or a bare state formula φ over quoted labels.
pub fn parse_property(text: &str) -> Result<PropertyAst> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let ast = p.property()?;
    p.expect_end()?;
    Ok(ast)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::parse(1, self.toks[self.pos].1, message))
    }

    fn eat(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.eat(s) {
            Ok(())
        } else {
            self.error(format!("expected '{s}'"))
        }
    }

    fn expect_end(&mut self) -> Result<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            Tok::Sym("||") => unsupported("conditional probabilities (\"||\")"),
            _ => self.error("unexpected trailing input"),
        }
    }

    fn property(&mut self) -> Result<PropertyAst> {
        let head = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.label_query(),
        };
        match head.as_str() {
            "multi" => unsupported("multi-objective queries (\"multi(\")"),
            "S" | "LRA" => unsupported("long-run queries"),
            "T" => unsupported("expected time queries"),
            "P" | "Pmax" | "Pmin" => {
                self.pos += 1;
                self.operator(Operator::Probability, &head[1..])
            }
            "R" | "Rmax" | "Rmin" => {
                self.pos += 1;
                self.expect("{")?;
                let name = match self.peek().clone() {
                    Tok::Str(s) => s,
                    _ => return self.error("expected a quoted reward structure name"),
                };
                self.pos += 1;
                self.expect("}")?;
                // Direction may follow the braces: R{"r"}max=?
                let rest = if head.len() > 1 {
                    head[1..].to_string()
                } else {
                    match self.peek().clone() {
                        Tok::Ident(d) if d == "max" || d == "min" => {
                            self.pos += 1;
                            d
                        }
                        _ => String::new(),
                    }
                };
                self.operator(Operator::Reward(name), &rest)
            }
            _ => self.label_query(),
        }
    }

    fn label_query(&mut self) -> Result<PropertyAst> {
        let formula = self.state_formula()?;
        Ok(PropertyAst {
            operator: Operator::LabelQuery,
            direction: None,
            bound: None,
            reward_bound: None,
            formula,
        })
    }

    fn operator(&mut self, operator: Operator, dir: &str) -> Result<PropertyAst> {
        let direction = match dir {
            "max" => Some(Direction::Max),
            "min" => Some(Direction::Min),
            "" => None,
            _ => return self.error(format!("unknown optimisation direction \"{dir}\"")),
        };
        let bound = if self.eat("=?") {
            None
        } else {
            let rel = match self.peek() {
                Tok::Sym(">=") => Relation::Ge,
                Tok::Sym(">") => Relation::Gt,
                Tok::Sym("<=") => Relation::Le,
                Tok::Sym("<") => Relation::Lt,
                _ => return self.error("expected \"=?\" or a comparison"),
            };
            self.pos += 1;
            let t = self.number()?;
            if operator == Operator::Probability && !(0.0..=1.0).contains(&t) {
                return Err(Error::Semantic(format!("probability threshold {t} outside [0, 1]")));
            }
            if t < 0.0 {
                return Err(Error::Semantic(format!("reward threshold {t} is negative")));
            }
            Some((rel, t))
        };
        self.expect("[")?;
        let reward_bound = match self.peek().clone() {
            Tok::Ident(op) if op == "F" => {
                self.pos += 1;
                self.path_bound()?
            }
            Tok::Ident(op) if op == "U" || op == "G" || op == "X" || op == "C" || op == "I" => {
                return unsupported(&format!("path operator \"{op}\""))
            }
            _ => {
                // `φ U ψ` starts with a state formula.
                let save = self.pos;
                if self.state_formula().is_ok() && matches!(self.peek(), Tok::Ident(u) if u == "U") {
                    return unsupported("path operator \"U\"");
                }
                self.pos = save;
                return self.error("expected \"F\"");
            }
        };
        if reward_bound.is_some() && matches!(operator, Operator::Reward(_)) {
            return unsupported("reward-bounded reward queries");
        }
        let formula = self.state_formula()?;
        match self.peek() {
            Tok::Sym("||") => return unsupported("conditional probabilities (\"||\")"),
            Tok::Ident(u) if u == "U" => return unsupported("path operator \"U\""),
            _ => {}
        }
        self.expect("]")?;
        Ok(PropertyAst {
            operator,
            direction,
            bound,
            reward_bound,
            formula,
        })
    }

    fn path_bound(&mut self) -> Result<Option<RewardBound>> {
        if self.eat("{") {
            let reward = match self.peek().clone() {
                Tok::Str(s) => s,
                _ => return self.error("expected a quoted reward structure name"),
            };
            self.pos += 1;
            self.expect("}")?;
            if !self.eat("<=") {
                return unsupported("reward bounds other than \"<=\"");
            }
            let bound = self.integer()?;
            return Ok(Some(RewardBound { reward, bound }));
        }
        if matches!(self.peek(), Tok::Sym("<=" | "<" | ">=" | ">" | "[")) {
            return unsupported("step-bounded \"F\"");
        }
        Ok(None)
    }

    fn number(&mut self) -> Result<f64> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.pos += 1;
                n.parse().or_else(|_| self.error(format!("bad number {n}")))
            }
            _ => self.error("expected a number"),
        }
    }

    fn integer(&mut self) -> Result<u64> {
        match self.peek().clone() {
            Tok::Num(n) => match n.parse::<u64>() {
                Ok(k) => {
                    self.pos += 1;
                    Ok(k)
                }
                Err(_) => self.error(format!("reward bound must be a non-negative integer, got {n}")),
            },
            _ => self.error("expected a non-negative integer bound"),
        }
    }

    // Precedence: ! binds tighter than &, which binds tighter than |.
    fn state_formula(&mut self) -> Result<StateFormula> {
        let mut f = self.conjunction()?;
        while self.eat("|") {
            f = StateFormula::Or(Box::new(f), Box::new(self.conjunction()?));
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> Result<StateFormula> {
        let mut f = self.negation()?;
        while self.eat("&") {
            f = StateFormula::And(Box::new(f), Box::new(self.negation()?));
        }
        Ok(f)
    }

    fn negation(&mut self) -> Result<StateFormula> {
        if self.eat("!") {
            return Ok(StateFormula::Not(Box::new(self.negation()?)));
        }
        match self.peek().clone() {
            Tok::Str(s) => {
                self.pos += 1;
                Ok(StateFormula::Label(s))
            }
            Tok::Ident(k) if k == "true" => {
                self.pos += 1;
                Ok(StateFormula::True)
            }
            Tok::Ident(k) if k == "false" => {
                self.pos += 1;
                Ok(StateFormula::False)
            }
            Tok::Ident(k) if k.starts_with('P') || k.starts_with('R') => {
                unsupported("nested probability or reward operators")
            }
            Tok::Ident(k) => unsupported(&format!("variable \"{k}\" in a state formula (use a label)")),
            Tok::Sym("(") => {
                self.pos += 1;
                let f = self.state_formula()?;
                self.expect(")")?;
                Ok(f)
            }
            _ => self.error("expected a label, true, false, '!' or '('"),
        }
    }
}
