//! The Orchard board game and its variants.

use super::{explore, explore_parametric, ExplorationSpec, Weight};
use crate::error::{Error, Result};
use crate::model::ExplicitModel;
use crate::rational::int;
use crate::uncertain::{ParamExpr, ParametricModel};

#[derive(Clone, Debug, PartialEq)]
pub enum OrchardVariant {
    Mdp,
    /// Dice probabilities widened to `[p - eps, p + eps]`.
    Interval(f64),
    /// Two fruit types: fruit `p`, basket `q`, raven `1 - 2p - q`.
    Parametric,
    /// Players observe which trees are empty, the dice and the raven.
    Pomdp,
    /// As `Pomdp`, after `k` hidden steals of one fruit from a random nonempty tree.
    PomdpSteal(u32),
}

#[derive(Clone, Debug)]
pub struct OrchardConfig {
    pub fruit_types: Vec<String>,
    pub num_fruits: u32,
    pub raven_distance: u32,
    /// Per-state string labels such as `2-APPLE, 2-CHERRY, 2+RAVEN`.
    pub diagnostic_labels: bool,
    /// Adds `allCherriesPicked` (no cherries left, raven not arrived).
    pub cherry_label: bool,
    pub variant: OrchardVariant,
    pub max_size: usize,
}

impl OrchardConfig {
    /// Four fruit types, four fruits per tree, raven five steps away.
    pub fn full() -> Self {
        OrchardConfig {
            fruit_types: ["APPLE", "CHERRY", "PEAR", "PLUM"].map(String::from).to_vec(),
            num_fruits: 4,
            raven_distance: 5,
            diagnostic_labels: false,
            cherry_label: false,
            variant: OrchardVariant::Mdp,
            max_size: 1_000_000,
        }
    }

    /// Apples and cherries, two each, raven two steps away, with diagnostic labels.
    pub fn simplified() -> Self {
        OrchardConfig {
            fruit_types: ["APPLE", "CHERRY"].map(String::from).to_vec(),
            num_fruits: 2,
            raven_distance: 2,
            diagnostic_labels: true,
            ..Self::full()
        }
    }

    pub fn with_variant(mut self, variant: OrchardVariant) -> Self {
        self.variant = variant;
        self
    }

    fn dice_probability(&self) -> f64 {
        1.0 / (self.fruit_types.len() as f64 + 2.0)
    }

    fn check(&self) -> Result<()> {
        let t = self.fruit_types.len();
        if t == 0 {
            return Err(Error::Config("at least one fruit type is required".into()));
        }
        if t > 64 || self.num_fruits > 255 || self.raven_distance > 255 {
            return Err(Error::Config("configuration too large".into()));
        }
        for (i, f) in self.fruit_types.iter().enumerate() {
            if f.is_empty() || self.fruit_types[..i].contains(f) {
                return Err(Error::Config(format!("invalid or duplicate fruit type \"{f}\"")));
            }
        }
        if self.num_fruits == 0 || self.raven_distance == 0 {
            return Err(Error::Config("num_fruits and raven_distance must be at least 1".into()));
        }
        match self.variant {
            OrchardVariant::Interval(eps) => {
                if !(eps >= 0.0) || self.dice_probability() - eps < 0.0 {
                    return Err(Error::Config(format!(
                        "interval width {eps} gives a negative lower bound"
                    )));
                }
            }
            OrchardVariant::Parametric if t != 2 => {
                return Err(Error::Unsupported(format!(
                    "parametric Orchard needs exactly 2 fruit types, got {t}"
                )))
            }
            OrchardVariant::PomdpSteal(k) if k > 255 || k as u64 >= t as u64 * self.num_fruits as u64 => {
                return Err(Error::Config(format!(
                    "cannot steal {k} of {} fruits",
                    t as u64 * self.num_fruits as u64
                )))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Dice {
    None,
    Fruit(u8),
    Basket,
    Raven,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Game {
    trees: Vec<u8>,
    raven: u8,
    dice: Dice,
    /// Hidden steals still to happen before the first round.
    steals: u8,
}

#[derive(PartialEq)]
enum Outcome {
    Running,
    PlayersWon,
    RavenWon,
}

impl Game {
    fn outcome(&self) -> Outcome {
        if self.trees.iter().all(|&n| n == 0) {
            debug_assert!(self.raven > 0);
            Outcome::PlayersWon
        } else if self.raven == 0 {
            Outcome::RavenWon
        } else {
            Outcome::Running
        }
    }

    fn after(&self, f: impl FnOnce(&mut Game)) -> Game {
        let mut g = self.clone();
        f(&mut g);
        g
    }

    fn pick(&mut self, fruit: usize) {
        if self.trees[fruit] > 0 {
            self.trees[fruit] -= 1;
        }
        self.dice = Dice::None;
    }
}

struct Orchard<'a> {
    config: &'a OrchardConfig,
}

impl Orchard<'_> {
    fn fruit_index(&self, name: &str) -> usize {
        self.config
            .fruit_types
            .iter()
            .position(|f| f == name)
            .expect("action refers to a known fruit")
    }

    fn dice_weight(&self, outcome: Dice) -> Weight {
        let p = self.config.dice_probability();
        match self.config.variant {
            OrchardVariant::Interval(eps) => Weight::Interval(p - eps, p + eps),
            OrchardVariant::Parametric => Weight::Expr(match outcome {
                Dice::Fruit(_) => ParamExpr::param("p"),
                Dice::Basket => ParamExpr::param("q"),
                _ => ParamExpr::constant(int(1)) - ParamExpr::param("p") * ParamExpr::constant(int(2))
                    - ParamExpr::param("q"),
            }),
            _ => Weight::Point(p),
        }
    }

    fn dice_code(&self, dice: Dice) -> i64 {
        let t = self.config.fruit_types.len() as i64;
        match dice {
            Dice::None => 0,
            Dice::Fruit(i) => 1 + i as i64,
            Dice::Basket => t + 1,
            Dice::Raven => t + 2,
        }
    }
}

impl ExplorationSpec for Orchard<'_> {
    type State = Game;

    fn initial_state(&self) -> Game {
        let c = self.config;
        Game {
            trees: vec![c.num_fruits as u8; c.fruit_types.len()],
            raven: c.raven_distance as u8,
            dice: Dice::None,
            steals: match c.variant {
                OrchardVariant::PomdpSteal(k) => k as u8,
                _ => 0,
            },
        }
    }

    fn available_actions(&self, g: &Game) -> Vec<String> {
        if g.steals > 0 {
            return vec!["steal".into()];
        }
        if g.outcome() != Outcome::Running {
            return vec!["gameEnded".into()];
        }
        let fruits = &self.config.fruit_types;
        match g.dice {
            Dice::None => vec!["nextRound".into()],
            Dice::Fruit(i) => vec![format!("pick{}", fruits[i as usize])],
            Dice::Basket => (0..fruits.len())
                .filter(|&i| g.trees[i] > 0)
                .map(|i| format!("choose{}", fruits[i]))
                .collect(),
            Dice::Raven => vec!["moveRaven".into()],
        }
    }

    fn delta(&self, g: &Game, action: &str) -> Vec<(Weight, Game)> {
        if g.steals > 0 {
            let nonempty: Vec<usize> = (0..g.trees.len()).filter(|&i| g.trees[i] > 0).collect();
            let p = 1.0 / nonempty.len() as f64;
            return nonempty
                .into_iter()
                .map(|i| {
                    let next = g.after(|n| {
                        n.trees[i] -= 1;
                        n.steals -= 1;
                    });
                    (Weight::Point(p), next)
                })
                .collect();
        }
        if g.outcome() != Outcome::Running {
            return vec![(Weight::Point(1.0), g.clone())];
        }
        match g.dice {
            Dice::None => {
                let mut outcomes: Vec<Dice> =
                    (0..g.trees.len()).map(|i| Dice::Fruit(i as u8)).collect();
                outcomes.push(Dice::Basket);
                outcomes.push(Dice::Raven);
                outcomes
                    .into_iter()
                    .map(|d| (self.dice_weight(d), g.after(|n| n.dice = d)))
                    .collect()
            }
            Dice::Fruit(i) => vec![(Weight::Point(1.0), g.after(|n| n.pick(i as usize)))],
            Dice::Basket => {
                let fruit = action.strip_prefix("choose").expect("basket actions choose a fruit");
                let i = self.fruit_index(fruit);
                vec![(Weight::Point(1.0), g.after(|n| n.pick(i)))]
            }
            Dice::Raven => vec![(
                Weight::Point(1.0),
                g.after(|n| {
                    n.raven -= 1;
                    n.dice = Dice::None;
                }),
            )],
        }
    }

    fn labels(&self, g: &Game) -> Vec<String> {
        let mut out = Vec::new();
        if self.config.diagnostic_labels {
            let fruits = &self.config.fruit_types;
            out.push(if g.steals > 0 {
                format!("steal{}", g.steals)
            } else {
                match g.dice {
                    Dice::None => {
                        let mut s: Vec<String> = fruits
                            .iter()
                            .zip(&g.trees)
                            .map(|(f, n)| format!("{n}-{f}"))
                            .collect();
                        s.push(format!("{}+RAVEN", g.raven));
                        s.join(", ")
                    }
                    Dice::Fruit(i) => format!("♣{}", fruits[i as usize]),
                    Dice::Basket => "♣BASKET".into(),
                    Dice::Raven => "♣RAVEN".into(),
                }
            });
        }
        if g.steals == 0 {
            match g.outcome() {
                Outcome::PlayersWon => out.push("PlayersWon".into()),
                Outcome::RavenWon => out.push("RavenWon".into()),
                Outcome::Running => {}
            }
        }
        out
    }

    fn rewards(&self, g: &Game, _action: &str) -> Vec<(String, f64)> {
        let r = if g.steals == 0 && g.outcome() == Outcome::Running && g.dice == Dice::None {
            1.0
        } else {
            0.0
        };
        vec![("rounds".into(), r)]
    }

    fn valuation_variables(&self) -> Vec<String> {
        let mut v: Vec<String> = self.config.fruit_types.iter().map(|f| f.to_lowercase()).collect();
        v.push("raven".into());
        v.push("dice".into());
        if matches!(self.config.variant, OrchardVariant::PomdpSteal(_)) {
            v.push("steal".into());
        }
        v
    }

    fn valuation(&self, g: &Game) -> Vec<i64> {
        let mut v: Vec<i64> = g.trees.iter().map(|&n| n as i64).collect();
        v.push(g.raven as i64);
        v.push(self.dice_code(g.dice));
        if matches!(self.config.variant, OrchardVariant::PomdpSteal(_)) {
            v.push(g.steals as i64);
        }
        v
    }

    fn observation(&self, g: &Game) -> Option<Vec<i64>> {
        if !matches!(
            self.config.variant,
            OrchardVariant::Pomdp | OrchardVariant::PomdpSteal(_)
        ) {
            return None;
        }
        if g.steals > 0 {
            return Some(vec![-1]);
        }
        let mut key: Vec<i64> = g.trees.iter().map(|&n| (n == 0) as i64).collect();
        key.push(self.dice_code(g.dice));
        key.push(g.raven as i64);
        Some(key)
    }
}

fn add_cherry_label(model: &mut ExplicitModel, config: &OrchardConfig) -> Result<()> {
    if !config.cherry_label {
        return Ok(());
    }
    let cherry = config
        .fruit_types
        .iter()
        .find(|f| f.eq_ignore_ascii_case("cherry"))
        .ok_or_else(|| Error::Config("allCherriesPicked needs a CHERRY fruit type".into()))?
        .to_lowercase();
    model.add_label_from_valuations("allCherriesPicked", |v, s| {
        v.get(s, &cherry) == Some(0) && v.get(s, "raven").is_some_and(|r| r > 0)
    })
}

/// Builds the Orchard game. The variant selects the model kind: `mdp`,
/// `imdp` for intervals, `pomdp` for both observation variants.
pub fn orchard_model(config: &OrchardConfig) -> Result<ExplicitModel> {
    config.check()?;
    if config.variant == OrchardVariant::Parametric {
        return Err(Error::Unsupported(
            "parametric Orchard is built with orchard_parametric".into(),
        ));
    }
    let mut model = explore(&Orchard { config }, config.max_size)?;
    add_cherry_label(&mut model, config)?;
    Ok(model)
}

/// Parametric Orchard over `p` (each fruit) and `q` (basket); needs two fruit types.
pub fn orchard_parametric(config: &OrchardConfig) -> Result<ParametricModel> {
    let config = config.clone().with_variant(OrchardVariant::Parametric);
    config.check()?;
    explore_parametric(&Orchard { config: &config }, config.max_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, ModelKind};

    #[test]
    fn simplified_game_counts() {
        let m = orchard_model(&OrchardConfig::simplified()).unwrap();
        let s = m.summary();
        assert_eq!((s.states, s.actions, s.labels), (90, 7, 33));
        assert!(validate(&m).is_empty());
    }

    #[test]
    fn ended_states_have_one_self_loop() {
        let m = orchard_model(&OrchardConfig::simplified()).unwrap();
        let ended = m.labels["PlayersWon"].or(&m.labels["RavenWon"]);
        assert!(m.labels["PlayersWon"].is_disjoint(&m.labels["RavenWon"]));
        for s in ended.iter_ones() {
            let g = m.matrix.row_group(s);
            assert_eq!(g.len(), 1);
            assert_eq!(m.matrix.row(g.start).columns, &[s]);
            assert_eq!(m.choice_label(g.start), Some("gameEnded"));
        }
    }

    #[test]
    fn dice_states_match_reachable_configurations() {
        // With N = D = 2 every (counts, raven) pair with raven > 0 or some fruit left is
        // reachable, except the all-empty / raven-gone combination.
        let m = orchard_model(&OrchardConfig::simplified()).unwrap();
        let v = m.valuations.as_ref().unwrap();
        let none = (0..m.num_states()).filter(|&s| v.get(s, "dice") == Some(0)).count();
        let mut expected = 0;
        for a in 0..=2 {
            for c in 0..=2 {
                for r in 0..=2 {
                    if !(a == 0 && c == 0 && r == 0) {
                        expected += 1;
                    }
                }
            }
        }
        assert_eq!(none, expected);
    }

    #[test]
    fn interval_rows_are_realizable() {
        let c = OrchardConfig::simplified().with_variant(OrchardVariant::Interval(1.0 / 36.0));
        let m = orchard_model(&c).unwrap();
        assert_eq!(m.kind, ModelKind::Imdp);
        assert!(validate(&m).is_empty());
        let row = m.matrix.row(0);
        assert_eq!(row.len(), 4);
        for (_, l, u) in row.iter_intervals() {
            assert!((l - (0.25 - 1.0 / 36.0)).abs() < 1e-15 && (u - (0.25 + 1.0 / 36.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_configs() {
        let c = OrchardConfig::full().with_variant(OrchardVariant::Interval(0.2));
        assert!(matches!(orchard_model(&c), Err(Error::Config(_))));
        assert!(matches!(
            orchard_parametric(&OrchardConfig::full()),
            Err(Error::Unsupported(_))
        ));
        let c = OrchardConfig::simplified().with_variant(OrchardVariant::PomdpSteal(4));
        assert!(matches!(orchard_model(&c), Err(Error::Config(_))));
    }

    #[test]
    fn zero_steals_equal_base_pomdp() {
        let base = orchard_model(&OrchardConfig::simplified().with_variant(OrchardVariant::Pomdp)).unwrap();
        let steal =
            orchard_model(&OrchardConfig::simplified().with_variant(OrchardVariant::PomdpSteal(0))).unwrap();
        assert_eq!(base.matrix, steal.matrix);
        assert_eq!(base.observations, steal.observations);
        assert!(validate(&steal).is_empty());
    }
}
