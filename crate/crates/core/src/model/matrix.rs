use std::ops::Range;

/// Transition structure grouped by state: each state owns a contiguous
/// block of rows (its choices), each row is a sparse distribution.
///
/// Interval matrices store lower bounds in `values` and upper bounds in `upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseChoiceMatrix {
    row_group_offsets: Vec<usize>,
    row_offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
    upper: Option<Vec<f64>>,
}

/// Borrowed view of one row.
#[derive(Clone, Copy, Debug)]
pub struct Row<'a> {
    pub columns: &'a [usize],
    pub values: &'a [f64],
    pub upper: Option<&'a [f64]>,
}

impl<'a> Row<'a> {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.columns.iter().copied().zip(self.values.iter().copied())
    }

    /// `(column, lower, upper)`; point rows report `lower == upper`.
    pub fn iter_intervals(&self) -> impl Iterator<Item = (usize, f64, f64)> + 'a {
        let up = self.upper.unwrap_or(self.values);
        self.columns
            .iter()
            .zip(self.values.iter().zip(up))
            .map(|(&c, (&l, &u))| (c, l, u))
    }
}

impl SparseChoiceMatrix {
    pub fn empty() -> Self {
        SparseChoiceMatrix {
            row_group_offsets: vec![0],
            row_offsets: vec![0],
            columns: Vec::new(),
            values: Vec::new(),
            upper: None,
        }
    }

    /// Assembles a matrix from raw parts without checking the model invariants
    /// (see `model::validate`). Only the offset arrays are checked for shape.
    pub fn from_parts(
        row_group_offsets: Vec<usize>,
        row_offsets: Vec<usize>,
        columns: Vec<usize>,
        values: Vec<f64>,
        upper: Option<Vec<f64>>,
    ) -> Result<Self, String> {
        if row_group_offsets.first() != Some(&0) || row_offsets.first() != Some(&0) {
            return Err("offset arrays must start at 0".into());
        }
        if row_group_offsets.windows(2).any(|w| w[0] > w[1])
            || row_offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err("offset arrays must be monotone".into());
        }
        if *row_group_offsets.last().unwrap() != row_offsets.len() - 1 {
            return Err(format!(
                "row group offsets end at {} but there are {} rows",
                row_group_offsets.last().unwrap(),
                row_offsets.len() - 1
            ));
        }
        if *row_offsets.last().unwrap() != columns.len() || columns.len() != values.len() {
            return Err("entry arrays have inconsistent lengths".into());
        }
        if let Some(u) = &upper {
            if u.len() != values.len() {
                return Err("upper bound array has wrong length".into());
            }
        }
        Ok(SparseChoiceMatrix {
            row_group_offsets,
            row_offsets,
            columns,
            values,
            upper,
        })
    }

    pub fn num_states(&self) -> usize {
        self.row_group_offsets.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn num_entries(&self) -> usize {
        self.columns.len()
    }

    pub fn is_interval(&self) -> bool {
        self.upper.is_some()
    }

    pub fn row_group_offsets(&self) -> &[usize] {
        &self.row_group_offsets
    }

    #[inline]
    pub fn row_group(&self, state: usize) -> Range<usize> {
        self.row_group_offsets[state]..self.row_group_offsets[state + 1]
    }

    #[inline]
    pub fn row_group_size(&self, state: usize) -> usize {
        self.row_group_offsets[state + 1] - self.row_group_offsets[state]
    }

    #[inline]
    pub fn row(&self, row: usize) -> Row<'_> {
        let r = self.row_offsets[row]..self.row_offsets[row + 1];
        Row {
            columns: &self.columns[r.clone()],
            values: &self.values[r.clone()],
            upper: self.upper.as_ref().map(|u| &u[r]),
        }
    }

    /// State owning `row`.
    pub fn state_of_row(&self, row: usize) -> usize {
        debug_assert!(row < self.num_rows());
        self.row_group_offsets.partition_point(|&o| o <= row) - 1
    }

    /// Per-row owning state, computed once.
    pub fn row_owners(&self) -> Vec<usize> {
        let mut owners = Vec::with_capacity(self.num_rows());
        for s in 0..self.num_states() {
            owners.extend(std::iter::repeat(s).take(self.row_group_size(s)));
        }
        owners
    }

    /// Predecessor lists: `preds[t]` holds every state with some row reaching `t`
    /// with positive (upper) probability. Each predecessor appears once.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); self.num_states()];
        for s in 0..self.num_states() {
            for r in self.row_group(s) {
                for (t, l, u) in self.row(r).iter_intervals() {
                    if u > 0.0 || l > 0.0 {
                        if preds[t].last() != Some(&s) {
                            preds[t].push(s);
                        }
                    }
                }
            }
        }
        for p in &mut preds {
            p.dedup();
        }
        preds
    }
}

/// Incremental construction of a [`SparseChoiceMatrix`]; rows are sorted
/// by column and duplicate columns merged.
#[derive(Debug)]
pub struct MatrixBuilder {
    row_group_offsets: Vec<usize>,
    row_offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
    upper: Option<Vec<f64>>,
    group_open: bool,
}

impl MatrixBuilder {
    pub fn new(interval: bool) -> Self {
        MatrixBuilder {
            row_group_offsets: vec![0],
            row_offsets: vec![0],
            columns: Vec::new(),
            values: Vec::new(),
            upper: interval.then(Vec::new),
            group_open: false,
        }
    }

    /// Starts the row group of the next state. Rows pushed afterwards belong to it.
    pub fn new_row_group(&mut self) {
        if self.group_open {
            self.row_group_offsets.push(self.row_offsets.len() - 1);
        }
        self.group_open = true;
    }

    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        self.push_interval_row(entries.into_iter().map(|(c, v)| (c, v, v)));
    }

    pub fn push_interval_row(&mut self, entries: impl IntoIterator<Item = (usize, f64, f64)>) {
        assert!(self.group_open, "push_row before new_row_group");
        let mut e: Vec<(usize, f64, f64)> = entries.into_iter().collect();
        e.sort_by_key(|x| x.0);
        let mut merged: Vec<(usize, f64, f64)> = Vec::with_capacity(e.len());
        for (c, l, u) in e {
            match merged.last_mut() {
                Some(last) if last.0 == c => {
                    last.1 += l;
                    last.2 += u;
                }
                _ => merged.push((c, l, u)),
            }
        }
        for (c, l, u) in merged {
            self.columns.push(c);
            self.values.push(l);
            if let Some(up) = &mut self.upper {
                up.push(u);
            }
        }
        self.row_offsets.push(self.columns.len());
    }

    pub fn finish(mut self) -> SparseChoiceMatrix {
        if self.group_open {
            self.row_group_offsets.push(self.row_offsets.len() - 1);
        }
        SparseChoiceMatrix {
            row_group_offsets: self.row_group_offsets,
            row_offsets: self.row_offsets,
            columns: self.columns,
            values: self.values,
            upper: self.upper,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_merges_and_sorts() {
        let mut b = MatrixBuilder::new(false);
        b.new_row_group();
        b.push_row([(2, 0.25), (0, 0.5), (2, 0.25)]);
        b.push_row([(1, 1.0)]);
        b.new_row_group();
        b.push_row([(1, 1.0)]);
        let m = b.finish();
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.num_rows(), 3);
        assert_eq!(m.row(0).columns, &[0, 2]);
        assert_eq!(m.row(0).values, &[0.5, 0.5]);
        assert_eq!(m.row_group(1), 2..3);
        assert_eq!(m.state_of_row(1), 0);
        assert_eq!(m.state_of_row(2), 1);
        assert_eq!(m.row_owners(), vec![0, 0, 1]);
    }

    #[test]
    fn from_parts_rejects_bad_offsets() {
        assert!(SparseChoiceMatrix::from_parts(vec![0, 2], vec![0, 1], vec![0], vec![1.0], None)
            .is_err());
        assert!(SparseChoiceMatrix::from_parts(vec![0, 1], vec![0, 1], vec![0], vec![1.0], None)
            .is_ok());
    }
}
