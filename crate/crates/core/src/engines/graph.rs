//! Graph-based precomputations: qualitative reachability, SCCs, end components.

use std::collections::VecDeque;

use crate::bitvec::BitVector;
use crate::model::{ExplicitModel, SparseChoiceMatrix};

/// States with probability exactly 0 and exactly 1 for some direction.
#[derive(Clone, Debug, PartialEq)]
pub struct QualitativeSets {
    pub prob0: BitVector,
    pub prob1: BitVector,
}

impl QualitativeSets {
    pub fn maybe(&self) -> BitVector {
        self.prob0.or(&self.prob1).complement()
    }
}

/// Positive-probability successors of `row`.
pub(crate) fn support(m: &SparseChoiceMatrix, row: usize) -> impl Iterator<Item = usize> + '_ {
    m.row(row)
        .iter_intervals()
        .filter(|&(_, l, u)| u > 0.0 || l > 0.0)
        .map(|(c, _, _)| c)
}

/// Rows entering each state with positive probability, plus row owners.
pub(crate) struct RowPredecessors {
    offsets: Vec<usize>,
    rows: Vec<usize>,
    pub owners: Vec<usize>,
}

impl RowPredecessors {
    pub fn new(m: &SparseChoiceMatrix) -> Self {
        let n = m.num_states();
        let mut counts = vec![0usize; n + 1];
        for r in 0..m.num_rows() {
            for t in support(m, r) {
                counts[t + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut rows = vec![0; counts[n]];
        for r in 0..m.num_rows() {
            for t in support(m, r) {
                rows[fill[t]] = r;
                fill[t] += 1;
            }
        }
        RowPredecessors {
            offsets: counts,
            rows,
            owners: m.row_owners(),
        }
    }

    pub fn rows_into(&self, t: usize) -> &[usize] {
        &self.rows[self.offsets[t]..self.offsets[t + 1]]
    }
}

/// States that can reach `target` through `through` states with positive
/// probability under some choice (targets included).
fn exists_reach(m: &SparseChoiceMatrix, pred: &RowPredecessors, through: &BitVector, target: &BitVector) -> BitVector {
    let mut reached = target.clone();
    let mut queue: VecDeque<usize> = target.iter_ones().collect();
    while let Some(t) = queue.pop_front() {
        for &r in pred.rows_into(t) {
            let s = pred.owners[r];
            if !reached.get(s) && through.get(s) {
                reached.set(s, true);
                queue.push_back(s);
            }
        }
    }
    debug_assert_eq!(reached.len(), m.num_states());
    reached
}

/// States from which every choice reaches `target` with positive probability
/// (through `through` states), i.e. the universal attractor.
fn forall_reach(m: &SparseChoiceMatrix, pred: &RowPredecessors, through: &BitVector, target: &BitVector) -> BitVector {
    let n = m.num_states();
    let mut open_rows: Vec<usize> = (0..n).map(|s| m.row_group_size(s)).collect();
    let mut row_hit = vec![false; m.num_rows()];
    let mut reached = target.clone();
    let mut queue: VecDeque<usize> = target.iter_ones().collect();
    while let Some(t) = queue.pop_front() {
        for &r in pred.rows_into(t) {
            if row_hit[r] {
                continue;
            }
            row_hit[r] = true;
            let s = pred.owners[r];
            open_rows[s] -= 1;
            if open_rows[s] == 0 && !reached.get(s) && through.get(s) {
                reached.set(s, true);
                queue.push_back(s);
            }
        }
    }
    reached
}

/// Greatest set `U` from which `psi` is reachable using only rows that stay in `U`.
fn prob1_exists(m: &SparseChoiceMatrix, pred: &RowPredecessors, phi: &BitVector, psi: &BitVector) -> BitVector {
    let mut u = exists_reach(m, pred, phi, psi);
    loop {
        let row_ok: Vec<bool> = (0..m.num_rows()).map(|r| support(m, r).all(|t| u.get(t))).collect();
        let mut r_set = psi.clone();
        let mut queue: VecDeque<usize> = psi.iter_ones().collect();
        while let Some(t) = queue.pop_front() {
            for &r in pred.rows_into(t) {
                let s = pred.owners[r];
                if row_ok[r] && !r_set.get(s) && phi.get(s) && u.get(s) {
                    r_set.set(s, true);
                    queue.push_back(s);
                }
            }
        }
        if r_set == u {
            return u;
        }
        u = r_set;
    }
}

/// Pmax(φ U ψ) = 0 and Pmax(φ U ψ) = 1.
pub fn prob01_max(model: &ExplicitModel, phi: &BitVector, psi: &BitVector) -> QualitativeSets {
    let m = &model.matrix;
    let pred = RowPredecessors::new(m);
    let phi = phi.or(psi);
    let prob0 = exists_reach(m, &pred, &phi, psi).complement();
    let prob1 = prob1_exists(m, &pred, &phi, psi);
    QualitativeSets { prob0, prob1 }
}

/// Pmin(φ U ψ) = 0 and Pmin(φ U ψ) = 1.
pub fn prob01_min(model: &ExplicitModel, phi: &BitVector, psi: &BitVector) -> QualitativeSets {
    let m = &model.matrix;
    let pred = RowPredecessors::new(m);
    let phi = phi.or(psi);
    let prob0 = forall_reach(m, &pred, &phi, psi).complement();
    // Pmin < 1 iff some choice sequence reaches a Pmin = 0 state while staying in φ \ ψ.
    let avoiding = phi.difference(psi);
    let prob1 = exists_reach(m, &pred, &avoiding, &prob0).complement();
    QualitativeSets { prob0, prob1 }
}

/// Strongly connected components of the graph over `states`, with edges
/// given by `succ`. Components come out in reverse topological order.
pub(crate) fn sccs(n: usize, states: &[usize], succ: impl Fn(usize, &mut Vec<usize>)) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    let mut buf = Vec::new();
    // Explicit DFS frames: (node, successors, position).
    let mut frames: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    for &root in states {
        if index[root] != UNSEEN {
            continue;
        }
        buf.clear();
        succ(root, &mut buf);
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        frames.push((root, buf.clone(), 0));
        while let Some(frame) = frames.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if index[w] == UNSEEN {
                    buf.clear();
                    succ(w, &mut buf);
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, buf.clone(), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(parent) = frames.last() {
                    let p = parent.0;
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// A maximal end component: states plus the rows that stay inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct EndComponent {
    pub states: Vec<usize>,
    pub rows: Vec<usize>,
}

/// Maximal end components of the sub-MDP on `states` restricted to rows for
/// which `allowed` holds and whose successors stay in `states`.
pub fn maximal_end_components(
    model: &ExplicitModel,
    states: &BitVector,
    allowed: impl Fn(usize) -> bool,
) -> Vec<EndComponent> {
    let m = &model.matrix;
    let n = m.num_states();
    let mut cand = states.clone();
    let mut ok = vec![false; m.num_rows()];
    for s in cand.iter_ones() {
        for r in m.row_group(s) {
            ok[r] = allowed(r) && support(m, r).all(|t| cand.get(t));
        }
    }
    loop {
        let list: Vec<usize> = cand.iter_ones().collect();
        let comps = sccs(n, &list, |s, out| {
            for r in m.row_group(s) {
                if ok[r] {
                    out.extend(support(m, r));
                }
            }
        });
        let mut comp_of = vec![usize::MAX; n];
        for (i, c) in comps.iter().enumerate() {
            for &s in c {
                comp_of[s] = i;
            }
        }
        let mut changed = false;
        for &s in &list {
            let mut any = false;
            for r in m.row_group(s) {
                if ok[r] && support(m, r).any(|t| comp_of[t] != comp_of[s]) {
                    ok[r] = false;
                    changed = true;
                }
                any |= ok[r];
            }
            if !any {
                cand.set(s, false);
                changed = true;
            }
        }
        if !changed {
            return comps
                .into_iter()
                .map(|states| {
                    let rows = states.iter().flat_map(|&s| m.row_group(s)).filter(|&r| ok[r]).collect();
                    EndComponent { states, rows }
                })
                .collect();
        }
    }
}

/// Chooses, for every state that can reach `target` via `allowed` rows, a row
/// that moves strictly closer to `target` (lowest qualifying index first).
/// Rows must keep all successors inside `domain`.
pub(crate) fn attractor_choices(
    model: &ExplicitModel,
    domain: &BitVector,
    target: &BitVector,
    allowed: impl Fn(usize) -> bool,
) -> Vec<Option<usize>> {
    let m = &model.matrix;
    let pred = RowPredecessors::new(m);
    let mut choice = vec![None; m.num_states()];
    let mut reached = target.clone();
    let mut frontier: Vec<usize> = target.iter_ones().collect();
    while !frontier.is_empty() {
        let mut candidates: Vec<usize> = Vec::new();
        for &t in &frontier {
            for &r in pred.rows_into(t) {
                let s = pred.owners[r];
                if !reached.get(s) && domain.get(s) {
                    candidates.push(s);
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        let mut next = Vec::new();
        for s in candidates {
            let row = m.row_group(s).find(|&r| {
                allowed(r) && support(m, r).all(|t| domain.get(t)) && support(m, r).any(|t| reached.get(t))
            });
            if let Some(r) = row {
                choice[s] = Some(r - m.row_group(s).start);
                next.push(s);
            }
        }
        for &s in &next {
            reached.set(s, true);
        }
        frontier = next;
    }
    choice
}
