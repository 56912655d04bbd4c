use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `min c·x` subject to rows `a·x (<=|>=|=) b` and `x >= 0`.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn add(&mut self, row: Vec<f64>, sense: Sense, rhs: f64) {
        debug_assert_eq!(row.len(), self.num_vars);
        self.rows.push((row, sense, rhs));
    }
}

/// Smallest pivot element and most negative reduced cost treated as zero.
const EPS: f64 = 1e-9;
/// Entries below this after elimination are cancellation noise.
const ZERO: f64 = 1e-12;
/// Scale of the right-hand-side perturbation that breaks degenerate ties.
const PERTURB: f64 = 1e-7;

struct Tableau {
    /// `m` constraint rows followed by the objective row. Column `cols` holds
    /// the perturbed right-hand side that drives the ratio test, column
    /// `cols + 1` the original one, carried along to read off the solution.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                    if v.abs() < ZERO {
                        *v = 0.0;
                    }
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Minimises the objective row with Bland's rule over columns `< allowed`.
    fn run(&mut self, allowed: usize) -> Result<()> {
        let m = self.basis.len();
        let rhs = self.cols;
        for _ in 0..1_000_000 {
            let obj = &self.t[m];
            let Some(c) = (0..allowed).find(|&j| obj[j] < -EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][c];
                if a > EPS {
                    let ratio = self.t[i][rhs].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => ratio < lr || (ratio == lr && self.basis[i] < self.basis[li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return Err(Error::Internal("linear program is unbounded".into())),
            }
        }
        Err(Error::Internal("simplex iteration limit reached".into()))
    }

    /// Dual simplex from a dual feasible basis until the right-hand side is
    /// non-negative.
    fn repair(&mut self, allowed: usize) -> Result<()> {
        let m = self.basis.len();
        let rhs = self.cols;
        for _ in 0..1_000_000 {
            let Some(r) = (0..m).filter(|&i| self.t[i][rhs] < -ZERO).min_by(|&a, &b| {
                self.t[a][rhs].total_cmp(&self.t[b][rhs])
            }) else {
                return Ok(());
            };
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..allowed {
                let a = self.t[r][j];
                if a < -EPS {
                    let ratio = self.t[m][j].max(0.0) / -a;
                    if enter.map_or(true, |(_, best)| ratio < best) {
                        enter = Some((j, ratio));
                    }
                }
            }
            match enter {
                Some((c, _)) => self.pivot(r, c),
                // A rounding-level violation with no way to fix it is zero.
                None if self.t[r][rhs] > -1e-7 => self.t[r][rhs] = 0.0,
                None => return Err(Error::Internal("linear program is infeasible".into())),
            }
        }
        Err(Error::Internal("simplex iteration limit reached".into()))
    }
}

/// Two-phase dense simplex with Bland's anti-cycling rule. Right-hand sides
/// are perturbed by distinct tiny amounts so that ties in the ratio test are
/// decided by geometry rather than rounding noise; the returned point is the
/// final basis evaluated at the unperturbed right-hand side.
pub fn simplex(lp: &LinearProgram) -> Result<Vec<f64>> {
    let n = lp.num_vars;
    let m = lp.rows.len();
    // Normalise to non-negative right-hand sides.
    let rows: Vec<(Vec<f64>, Sense, f64)> = lp
        .rows
        .iter()
        .map(|(a, s, b)| {
            if *b < 0.0 {
                let flipped = match s {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
                (a.iter().map(|x| -x).collect(), flipped, -b)
            } else {
                (a.clone(), *s, *b)
            }
        })
        .collect();
    let slacks = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let artificials = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let cols = n + slacks + artificials;
    let (rhs, orig) = (cols, cols + 1);
    let mut t = vec![vec![0.0; cols + 2]; m + 1];
    let mut basis = vec![0; m];
    let (mut next_slack, mut next_art) = (n, n + slacks);
    for (i, (a, s, b)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(a);
        // Loosening only: `<=` rows grow, `>=` rows keep their bound.
        let shift = if *s == Sense::Le {
            PERTURB * (1.0 + b) * (1.0 + (i as f64 * 0.618_033_988_749_895).fract())
        } else {
            0.0
        };
        t[i][rhs] = b + shift;
        t[i][orig] = *b;
        match s {
            Sense::Le => {
                t[i][next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                t[i][next_slack] = -1.0;
                next_slack += 1;
                t[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            Sense::Eq => {
                t[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, cols };
    // Phase 1: minimise the sum of artificials.
    if artificials > 0 {
        for i in 0..m {
            if tab.basis[i] >= n + slacks {
                for j in 0..cols + 2 {
                    let v = tab.t[i][j];
                    tab.t[m][j] -= v;
                }
            }
        }
        for j in n + slacks..cols {
            tab.t[m][j] = 0.0;
        }
        tab.run(n + slacks)?;
        if tab.t[m][orig] < -1e-7 {
            return Err(Error::Internal("linear program is infeasible".into()));
        }
        // Drive remaining (zero-valued) artificials out of the basis.
        for i in 0..m {
            if tab.basis[i] >= n + slacks {
                if let Some(c) = (0..n + slacks).find(|&j| tab.t[i][j].abs() > EPS) {
                    tab.pivot(i, c);
                }
            }
        }
    }
    // Phase 2: original objective over the non-artificial columns.
    for j in 0..cols + 2 {
        tab.t[m][j] = if j < n { lp.objective[j] } else { 0.0 };
    }
    for i in 0..m {
        let b = tab.basis[i];
        let f = tab.t[m][b];
        if f != 0.0 {
            for j in 0..cols + 2 {
                let v = tab.t[i][j];
                tab.t[m][j] -= f * v;
            }
        }
    }
    tab.run(n + slacks)?;
    // Back to the exact right-hand side; the basis stays dual feasible.
    for row in tab.t.iter_mut() {
        row[rhs] = row[orig];
    }
    tab.repair(n + slacks)?;
    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.t[i][rhs].max(0.0);
        }
    }
    Ok(x)
}
