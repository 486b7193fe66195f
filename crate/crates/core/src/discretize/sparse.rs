//! Compressed sparse row operators.

use std::io::Write;

use super::SolverError;

/// Row-compressed real matrix. `symmetric` is only ever set after a verified check.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

/// Coordinate-format accumulator; duplicate entries are summed.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseOperator {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_offsets = vec![0usize; self.nrows + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_offsets[r + 1] += row_offsets[r];
        }
        SparseOperator {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            cols,
            values,
            symmetric: false,
        }
    }
}

impl SparseOperator {
    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 1.0);
        }
        b.build().into_symmetric(0.0).expect("identity is symmetric")
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut b = TripletBuilder::new(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            b.push(i, i, *v);
        }
        b.build().into_symmetric(0.0).expect("diagonal is symmetric")
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut b = TripletBuilder::new(rows.len(), ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    b.push(i, j, *v);
                }
            }
        }
        b.build()
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

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// `Aᵀ x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                y[self.cols[k]] += self.values[k] * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut b = TripletBuilder::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                b.push(j, i, v);
            }
        }
        let mut t = b.build();
        t.symmetric = self.symmetric;
        t
    }

    /// `max |A - Aᵀ|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Marks the operator symmetric after checking `max |A - Aᵀ| <= tol`.
    pub fn into_symmetric(mut self, tol: f64) -> Result<Self, SolverError> {
        let asym = self.asymmetry();
        if asym > tol {
            return Err(SolverError::NotSymmetric { asymmetry: asym });
        }
        self.symmetric = true;
        Ok(self)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Scales row `i` by `s[i]`; clears the symmetry flag.
    pub fn scale_rows(&self, s: &[f64]) -> SparseOperator {
        let mut out = self.clone();
        for (i, si) in s.iter().enumerate() {
            for k in out.row_offsets[i]..out.row_offsets[i + 1] {
                out.values[k] *= si;
            }
        }
        out.symmetric = false;
        out
    }

    /// Principal submatrix on the rows/columns listed in `keep` (in order).
    pub fn principal_submatrix(&self, keep: &[usize]) -> SparseOperator {
        let mut map = vec![usize::MAX; self.ncols];
        for (new, old) in keep.iter().enumerate() {
            map[*old] = new;
        }
        let mut b = TripletBuilder::new(keep.len(), keep.len());
        for (new_r, old_r) in keep.iter().enumerate() {
            for (c, v) in self.row(*old_r) {
                if map[c] != usize::MAX {
                    b.push(new_r, map[c], v);
                }
            }
        }
        let mut out = b.build();
        out.symmetric = self.symmetric;
        out
    }

    /// Adds `d[i]` to the diagonal.
    pub fn add_diagonal(&self, d: &[f64]) -> SparseOperator {
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                b.push(i, j, v);
            }
            if d[i] != 0.0 {
                b.push(i, i, d[i]);
            }
        }
        let mut out = b.build();
        out.symmetric = self.symmetric;
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Writes `row,col,value` triples for external inspection.
    pub fn write_triplets_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "value"])?;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                w.write_record([i.to_string(), j.to_string(), format!("{v:.17e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 0, 1.0);
        b.push(0, 0, 2.0);
        b.push(1, 0, -1.0);
        let a = b.build();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.matvec(&[1.0, 5.0]), vec![3.0, -1.0]);
        assert_eq!(a.matvec_transpose(&[1.0, 1.0]), vec![2.0, 0.0]);
    }

    #[test]
    fn symmetry_is_verified() {
        let a = SparseOperator::from_dense(&[vec![2.0, 1.0], vec![1.0 + 1e-9, 2.0]]);
        assert!(a.clone().into_symmetric(1e-13).is_err());
        assert!(a.into_symmetric(1e-8).unwrap().is_symmetric());
    }

    #[test]
    fn submatrix_and_csv() {
        let a = SparseOperator::from_dense(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ]);
        let s = a.principal_submatrix(&[0, 2]);
        assert_eq!(s.to_dense(), nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));
        let mut buf = Vec::new();
        a.write_triplets_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + a.nnz());
        assert!(text.starts_with("row,col,value\n0,0,2.0"));
    }
}
