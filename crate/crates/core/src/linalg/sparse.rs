use nalgebra::{DMatrix, DVector};

/// Contribution list `(row, col, value)`; duplicates are summed on
/// compression.
#[derive(Debug, Clone, Default)]
pub struct TripletList {
    entries: Vec<(usize, usize, f64)>,
}

impl TripletList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Adds `block[(i, j)]` at `(rows[i], cols[j])`.
    pub fn add_block(&mut self, rows: &[usize], cols: &[usize], block: &DMatrix<f64>) {
        for (j, &c) in cols.iter().enumerate() {
            for (i, &r) in rows.iter().enumerate() {
                self.push(r, c, block[(i, j)]);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn extend(&mut self, other: TripletList) {
        self.entries.extend(other.entries);
    }

    pub fn compress(mut self, nrows: usize, ncols: usize) -> CscMatrix {
        CscMatrix::from_entries(nrows, ncols, &mut self.entries)
    }
}

/// Compressed sparse column matrix with sorted, unique row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Duplicates are summed in ascending value order, so the result does not
    /// depend on the order of the contributions.
    fn from_entries(nrows: usize, ncols: usize, entries: &mut [(usize, usize, f64)]) -> Self {
        entries.sort_unstable_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)).then(a.2.total_cmp(&b.2)));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in entries.iter() {
            assert!(r < nrows && c < ncols, "entry ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        Self { nrows, ncols, col_ptr, row_idx, values }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut e = triplets.to_vec();
        Self::from_entries(nrows, ncols, &mut e)
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut t = TripletList::new();
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                t.push(i, j, a[(i, j)]);
            }
        }
        t.compress(a.nrows(), a.ncols())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(row, col, value)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    /// Row indices and values of column `c`.
    pub fn column(&self, c: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[c]..self.col_ptr[c + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (rows, vals) = self.column(c);
        rows.binary_search(&r).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<(usize, usize, f64)> = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.nrows);
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * xc;
            }
        }
        y
    }

    pub fn mul_vec_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.ncols, |c, _| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(|k| self.values[k] * x[self.row_idx[k]]).sum()
        })
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.nrows];
        for (r, _, v) in self.iter() {
            rows[r] += v.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.ncols).map(|c| self.column(c).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - B|` over all entries.
    pub fn max_abs_diff(&self, other: &CscMatrix) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let neg: Vec<(usize, usize, f64)> = other.iter().map(|(r, c, v)| (r, c, -v)).chain(self.iter()).collect();
        Self::from_triplets(self.nrows, self.ncols, &neg).max_abs()
    }

    /// `max |A - A^T|`.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.transpose())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            a[(r, c)] = v;
        }
        a
    }

    /// Sub-matrix over index ranges.
    pub fn submatrix(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> CscMatrix {
        let t: Vec<(usize, usize, f64)> = self
            .iter()
            .filter(|(r, c, _)| rows.contains(r) && cols.contains(c))
            .map(|(r, c, v)| (r - rows.start, c - cols.start, v))
            .collect();
        Self::from_triplets(rows.len(), cols.len(), &t)
    }
}
