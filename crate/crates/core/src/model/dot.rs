use std::fmt::Write;

use super::{ExplicitModel, Scheduler};
use crate::engines::CheckResult;
use crate::format::sig;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: states as ellipses, choices as boxes, probability-labeled
/// edges from boxes to successors. Scheduled choices are drawn red.
pub fn export_dot(
    model: &ExplicitModel,
    result: Option<&CheckResult>,
    scheduler: Option<&Scheduler>,
) -> String {
    let mut out = String::from("digraph model {\n  rankdir=LR;\n");
    let n = model.num_states();
    let mut state_labels: Vec<Vec<&str>> = vec![Vec::new(); n];
    for (name, bv) in &model.labels {
        for s in bv.iter_ones() {
            state_labels[s].push(name);
        }
    }
    for s in 0..n {
        let mut text = format!("{s}");
        if !state_labels[s].is_empty() {
            text.push_str("\\n");
            text.push_str(&escape(&state_labels[s].join(", ")));
        }
        if let Some(r) = result {
            text.push_str("\\n★ ");
            text.push_str(&r.values.describe(s));
        }
        let _ = writeln!(out, "  s{s} [shape=ellipse, label=\"{text}\"];");
    }
    for s in 0..n {
        let chosen = scheduler.map(|sc| sc.row(model, s));
        for r in model.matrix.row_group(s) {
            let mut text = model.choice_label(r).map(escape).unwrap_or_default();
            for (name, rm) in &model.reward_models {
                let v = rm.choice.as_ref().map_or(0.0, |c| c[r]);
                if v != 0.0 {
                    let _ = write!(text, "\\n€ {}: {}", escape(name), sig(v, 6));
                }
            }
            let highlight = if chosen == Some(r) {
                ", color=red, penwidth=2"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "  c{r} [shape=box, style=filled, fillcolor=lightblue, label=\"{text}\"{highlight}];"
            );
            let _ = writeln!(out, "  s{s} -> c{r} [arrowhead=none{highlight}];");
            for (t, l, u) in model.matrix.row(r).iter_intervals() {
                let p = if model.matrix.is_interval() {
                    format!("[{}, {}]", sig(l, 6), sig(u, 6))
                } else {
                    sig(l, 6)
                };
                let _ = writeln!(out, "  c{r} -> s{t} [label=\"{p}\"];");
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MatrixBuilder, ModelKind};

    #[test]
    fn self_loop_chain() {
        let mut b = MatrixBuilder::new(false);
        b.new_row_group();
        b.push_row([(0, 1.0)]);
        let m = ExplicitModel::new(ModelKind::Dtmc, b.finish(), 0);
        let dot = export_dot(&m, None, None);
        assert_eq!(dot.matches("shape=ellipse").count(), 1);
        assert_eq!(dot.matches("shape=box").count(), 1);
        assert_eq!(dot.matches("[label=\"1\"]").count(), 1);
        assert!(dot.starts_with("digraph"));
    }
}
