//! Min/max equation systems `x_v = opt_r (b_r + Σ p·x_u)` and their solvers.

use super::{Direction, Environment, Method};
use crate::error::{Error, Result};

/// Above this many variables the linear solver switches from dense Gaussian
/// elimination to Gauss-Seidel.
pub const DIRECT_SOLVE_LIMIT: usize = 500;

#[derive(Clone, Debug, Default)]
pub struct System {
    groups: Vec<usize>,
    b: Vec<f64>,
    /// Probability mass leaving the system (to fixed states) per row.
    exit: Vec<f64>,
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Caller-defined tag per row, usually the originating model row.
    pub origin: Vec<usize>,
    /// Upper bound on every solution component (1 for probabilities).
    pub cap: f64,
}

impl System {
    pub fn new() -> Self {
        System {
            groups: vec![0],
            row_offsets: vec![0],
            cap: f64::INFINITY,
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.groups.len() - 1
    }

    /// Closes the current variable; rows pushed since the last call belong to it.
    pub fn finish_var(&mut self) {
        self.groups.push(self.b.len());
    }

    pub fn push_row(&mut self, b: f64, exit: f64, entries: &[(usize, f64)], origin: usize) {
        self.b.push(b);
        self.exit.push(exit);
        self.cols.extend(entries.iter().map(|e| e.0));
        self.vals.extend(entries.iter().map(|e| e.1));
        self.row_offsets.push(self.cols.len());
        self.origin.push(origin);
    }

    #[inline]
    pub fn rows(&self, v: usize) -> std::ops::Range<usize> {
        self.groups[v]..self.groups[v + 1]
    }

    #[inline]
    pub fn entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let e = self.row_offsets[r]..self.row_offsets[r + 1];
        self.cols[e.clone()].iter().copied().zip(self.vals[e].iter().copied())
    }

    #[inline]
    pub fn row_value(&self, r: usize, x: &[f64]) -> f64 {
        let mut acc = self.b[r];
        for k in self.row_offsets[r]..self.row_offsets[r + 1] {
            acc += self.vals[k] * x[self.cols[k]];
        }
        acc
    }

    /// Best row of `v` under `x` and the exact extremum. For the row, ties go
    /// to the earliest one unless a later one is better by more than 1e-12;
    /// the value is never affected by that tolerance, which keeps iterates
    /// monotone.
    #[inline]
    fn best(&self, v: usize, x: &[f64], dir: Direction) -> (usize, f64) {
        let rows = self.rows(v);
        let mut best = rows.start;
        let mut best_val = self.row_value(best, x);
        let mut extremum = best_val;
        for r in rows.start + 1..rows.end {
            let y = self.row_value(r, x);
            if dir.better(y, best_val, 1e-12) {
                best = r;
                best_val = y;
            }
            if dir.better(y, extremum, 0.0) {
                extremum = y;
            }
        }
        (best, extremum)
    }

    /// One Bellman application.
    pub fn bellman(&self, x: &[f64], dir: Direction, out: &mut [f64]) {
        for v in 0..self.num_vars() {
            out[v] = self.best(v, x, dir).1;
        }
    }

    /// Greedy choice per variable, as a local row index.
    pub fn greedy(&self, x: &[f64], dir: Direction) -> Vec<usize> {
        (0..self.num_vars())
            .map(|v| self.best(v, x, dir).0 - self.groups[v])
            .collect()
    }

    /// Solves with the method of `env`, starting value iteration at `x0`.
    /// Policy iteration starts from `init` (lowest rows if `None`).
    pub fn solve(
        &self,
        dir: Direction,
        env: &Environment,
        x0: Vec<f64>,
        init: Option<Vec<usize>>,
    ) -> Result<Vec<f64>> {
        match env.method {
            Method::ValueIteration => self.value_iteration(dir, env, x0, false),
            Method::GaussSeidel => self.value_iteration(dir, env, x0, true),
            Method::PolicyIteration => {
                let init = init.unwrap_or_else(|| vec![0; self.num_vars()]);
                Ok(self.policy_iteration(dir, env, init)?.0)
            }
            Method::OptimisticValueIteration => {
                let (lb, ub) = self.optimistic(dir, env, x0, self.cap)?;
                Ok(lb.iter().zip(&ub).map(|(l, u)| 0.5 * (l + u)).collect())
            }
        }
    }

    fn difference(env: &Environment, old: f64, new: f64) -> f64 {
        let d = (new - old).abs();
        if env.relative && new != 0.0 {
            d / new.abs()
        } else {
            d
        }
    }

    /// Iterates until successive iterates differ by less than the precision.
    pub fn value_iteration(
        &self,
        dir: Direction,
        env: &Environment,
        mut x: Vec<f64>,
        in_place: bool,
    ) -> Result<Vec<f64>> {
        let n = self.num_vars();
        let mut y = x.clone();
        let mut diff = f64::INFINITY;
        for _ in 0..env.max_iterations {
            diff = 0.0;
            if in_place {
                for v in (0..n).rev() {
                    let new = self.best(v, &x, dir).1;
                    diff = diff.max(Self::difference(env, x[v], new));
                    x[v] = new;
                }
            } else {
                self.bellman(&x, dir, &mut y);
                for v in 0..n {
                    diff = diff.max(Self::difference(env, x[v], y[v]));
                }
                std::mem::swap(&mut x, &mut y);
            }
            if diff < env.precision {
                return Ok(x);
            }
        }
        Err(Error::NonConvergence {
            iterations: env.max_iterations,
            last_difference: diff,
            last_iterate: x,
        })
    }

    /// Policy iteration from `policy` (local row indices), which must reach the
    /// exit with probability 1 for the evaluation systems to be regular.
    pub fn policy_iteration(
        &self,
        dir: Direction,
        env: &Environment,
        mut policy: Vec<usize>,
    ) -> Result<(Vec<f64>, Vec<usize>)> {
        let n = self.num_vars();
        let mut x = vec![0.0; n];
        for _ in 0..env.max_iterations {
            x = self.evaluate(&policy, x, env)?;
            let mut changed = false;
            for v in 0..n {
                let current = self.groups[v] + policy[v];
                let cur_val = self.row_value(current, &x);
                let tol = 1e-12 * cur_val.abs().max(1.0);
                let mut best = current;
                let mut best_val = cur_val;
                for r in self.rows(v) {
                    let y = self.row_value(r, &x);
                    if dir.better(y, best_val, tol) {
                        best = r;
                        best_val = y;
                    }
                }
                if best != current {
                    policy[v] = best - self.groups[v];
                    changed = true;
                }
            }
            if !changed {
                return Ok((x, policy));
            }
        }
        Err(Error::NonConvergence {
            iterations: env.max_iterations,
            last_difference: f64::NAN,
            last_iterate: x,
        })
    }

    /// Solves the linear system of a fixed policy during policy iteration.
    pub fn evaluate(&self, policy: &[usize], x0: Vec<f64>, env: &Environment) -> Result<Vec<f64>> {
        let tol = (env.precision * 1e-6).max(1e-14);
        self.solve_linear(policy, x0, tol, env.max_iterations)
    }

    /// `x = b + P x` for the rows selected by `policy`: Gaussian elimination up to
    /// [`DIRECT_SOLVE_LIMIT`] variables, Gauss-Seidel to `tol` beyond.
    pub fn solve_linear(&self, policy: &[usize], x0: Vec<f64>, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let rows: Vec<usize> = policy.iter().enumerate().map(|(v, &c)| self.groups[v] + c).collect();
        if rows.len() <= DIRECT_SOLVE_LIMIT {
            self.solve_direct(&rows)
        } else {
            self.solve_gauss_seidel(&rows, x0, tol, max_iter)
        }
    }

    fn solve_direct(&self, rows: &[usize]) -> Result<Vec<f64>> {
        let n = rows.len();
        // (I - P) x = b, dense with partial pivoting.
        let mut a = vec![0.0; n * (n + 1)];
        let w = n + 1;
        for (v, &r) in rows.iter().enumerate() {
            a[v * w + v] = 1.0;
            for (u, p) in self.entries(r) {
                a[v * w + u] -= p;
            }
            a[v * w + n] = self.b[r];
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i * w + col].abs().total_cmp(&a[j * w + col].abs()))
                .expect("nonempty range");
            if a[pivot * w + col].abs() < 1e-14 {
                return Err(Error::Internal(format!(
                    "singular linear system at variable {col}"
                )));
            }
            if pivot != col {
                for k in 0..w {
                    a.swap(pivot * w + k, col * w + k);
                }
            }
            let d = a[col * w + col];
            for i in col + 1..n {
                let f = a[i * w + col] / d;
                if f != 0.0 {
                    for k in col..w {
                        a[i * w + k] -= f * a[col * w + k];
                    }
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = a[i * w + n];
            for k in i + 1..n {
                s -= a[i * w + k] * x[k];
            }
            x[i] = s / a[i * w + i];
        }
        Ok(x)
    }

    fn solve_gauss_seidel(&self, rows: &[usize], mut x: Vec<f64>, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = rows.len();
        let mut diff = f64::INFINITY;
        for _ in 0..max_iter {
            diff = 0.0;
            for v in (0..n).rev() {
                let r = rows[v];
                let mut acc = self.b[r];
                let mut diag = 1.0;
                for (u, p) in self.entries(r) {
                    if u == v {
                        diag -= p;
                    } else {
                        acc += p * x[u];
                    }
                }
                if diag <= 0.0 {
                    return Err(Error::Internal(format!("singular linear system at variable {v}")));
                }
                let new = acc / diag;
                diff = diff.max((new - x[v]).abs() / new.abs().max(1.0));
                x[v] = new;
            }
            if diff < tol {
                return Ok(x);
            }
        }
        Err(Error::NonConvergence {
            iterations: max_iter,
            last_difference: diff,
            last_iterate: x,
        })
    }

    /// Optimistic value iteration: returns `(lb, ub)` with `lfp ≤ ub`
    /// certified by `Bellman(ub) ≤ ub`, and `ub - lb ≤ ε·max(1, lb)`.
    /// Values are clamped to `cap` (1 for probabilities).
    pub fn optimistic(
        &self,
        dir: Direction,
        env: &Environment,
        mut lb: Vec<f64>,
        cap: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.num_vars();
        let eps = env.precision;
        let mut delta = eps;
        let mut used = 0usize;
        let mut tmp = vec![0.0; n];
        let width_ok = |lb: &[f64], ub: &[f64]| {
            lb.iter().zip(ub).all(|(l, u)| u - l <= eps * l.abs().max(1.0))
        };
        loop {
            // Lower phase: Gauss-Seidel from below to the current threshold.
            loop {
                if used >= env.max_iterations {
                    return Err(Error::NonConvergence {
                        iterations: used,
                        last_difference: delta,
                        last_iterate: lb,
                    });
                }
                used += 1;
                let mut diff: f64 = 0.0;
                for v in (0..n).rev() {
                    let new = self.best(v, &lb, dir).1.min(cap);
                    diff = diff.max(Self::difference(env, lb[v], new));
                    lb[v] = new;
                }
                if diff < delta {
                    break;
                }
            }
            // Guess an upper bound and try to verify it inductive.
            let mut ub: Vec<f64> = lb.iter().map(|&l| (l + 0.5 * eps * l.abs().max(1.0)).min(cap)).collect();
            let rounds = used.clamp(10, 1000);
            let mut verified = false;
            for _ in 0..rounds {
                used += 1;
                self.bellman(&ub, dir, &mut tmp);
                let mut inductive = true;
                let mut crossed = false;
                for v in 0..n {
                    let new = tmp[v].min(cap);
                    if new > ub[v] + 4.0 * f64::EPSILON * ub[v].abs().max(1.0) {
                        inductive = false;
                    }
                    ub[v] = new;
                }
                self.bellman(&lb, dir, &mut tmp);
                for v in 0..n {
                    lb[v] = lb[v].max(tmp[v].min(cap));
                    if ub[v] < lb[v] {
                        crossed = true;
                    }
                }
                if crossed {
                    break;
                }
                if inductive {
                    verified = true;
                    break;
                }
            }
            if verified {
                // ub stays a pre-fixpoint under further Bellman steps; tighten both sides.
                while !width_ok(&lb, &ub) {
                    if used >= env.max_iterations {
                        return Err(Error::NonConvergence {
                            iterations: used,
                            last_difference: f64::NAN,
                            last_iterate: lb,
                        });
                    }
                    used += 1;
                    self.bellman(&ub, dir, &mut tmp);
                    for v in 0..n {
                        ub[v] = ub[v].min(tmp[v].min(cap));
                    }
                    self.bellman(&lb, dir, &mut tmp);
                    for v in 0..n {
                        lb[v] = lb[v].max(tmp[v].min(cap));
                    }
                }
                return Ok((lb, ub));
            }
            delta *= 0.5;
        }
    }

    /// A policy that reaches the exit with probability 1 from every variable
    /// for which this is possible (`None` elsewhere), lowest row first.
    pub fn proper_policy(&self) -> Vec<Option<usize>> {
        let n = self.num_vars();
        let mut choice: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        loop {
            let mut progress = false;
            for v in 0..n {
                if done[v] {
                    continue;
                }
                for r in self.rows(v) {
                    let forward = self.exit[r] > 0.0 || self.entries(r).any(|(u, p)| p > 0.0 && done[u]);
                    if forward {
                        choice[v] = Some(r - self.groups[v]);
                        progress = true;
                        break;
                    }
                }
            }
            // Commit the whole layer at once so chosen rows always point to earlier layers.
            for v in 0..n {
                if choice[v].is_some() && !done[v] {
                    done[v] = true;
                }
            }
            if !progress {
                return choice;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // x0 = max(0.5 + 0.5 x1, 0.2); x1 = 0.5 x0 + 0.25
    fn sys() -> System {
        let mut s = System::new();
        s.push_row(0.5, 0.5, &[(1, 0.5)], 0);
        s.push_row(0.2, 1.0, &[], 1);
        s.finish_var();
        s.push_row(0.25, 0.5, &[(0, 0.5)], 2);
        s.finish_var();
        s
    }

    fn exact() -> [f64; 2] {
        // x0 = 0.5 + 0.25 x0 + 0.125 -> x0 = 5/6, x1 = 2/3
        [5.0 / 6.0, 2.0 / 3.0]
    }

    #[test]
    fn near_ties_pick_the_first_row_but_keep_the_extremum() {
        let mut s = System::new();
        s.push_row(0.5, 0.5, &[], 0);
        s.push_row(0.5 + 5e-13, 0.5, &[], 1);
        s.finish_var();
        let mut out = [0.0];
        s.bellman(&[0.0], Direction::Max, &mut out);
        assert_eq!(out[0], 0.5 + 5e-13);
        assert_eq!(s.greedy(&[0.0], Direction::Max), vec![0]);
    }

    #[test]
    fn all_methods_agree() {
        let s = sys();
        for method in [
            Method::ValueIteration,
            Method::GaussSeidel,
            Method::PolicyIteration,
            Method::OptimisticValueIteration,
        ] {
            let env = Environment {
                method,
                precision: 1e-10,
                ..Environment::default()
            };
            let x = s.solve(Direction::Max, &env, vec![0.0; 2], None).unwrap();
            for (a, b) in x.iter().zip(exact()) {
                assert!((a - b).abs() < 1e-8, "{method:?}: {x:?}");
            }
        }
    }

    #[test]
    fn optimistic_bounds_enclose() {
        let env = Environment {
            precision: 1e-4,
            ..Environment::default()
        };
        let (lb, ub) = sys().optimistic(Direction::Max, &env, vec![0.0; 2], 1.0).unwrap();
        for v in 0..2 {
            assert!(lb[v] <= exact()[v] && exact()[v] <= ub[v]);
            assert!(ub[v] - lb[v] <= 1e-4);
        }
    }

    #[test]
    fn nonconvergence_reports_iterate() {
        let env = Environment {
            max_iterations: 2,
            precision: 1e-12,
            ..Environment::default()
        };
        match sys().value_iteration(Direction::Max, &env, vec![0.0; 2], false) {
            Err(Error::NonConvergence { iterations, last_iterate, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(last_iterate.len(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn proper_policy_prefers_exits() {
        let mut s = System::new();
        s.push_row(0.0, 0.0, &[(0, 1.0)], 0);
        s.push_row(1.0, 1.0, &[], 1);
        s.finish_var();
        assert_eq!(s.proper_policy(), vec![Some(1)]);
    }
}
