//! Compressed sparse row matrices with a fixed pattern.

use rayon::prelude::*;

use crate::dofmap::DofId;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrixCsr {
    n: usize,
    offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrixCsr {
    /// Zero matrix whose pattern is the union of `map × map` over all maps.
    pub fn from_location_maps(maps: &[Vec<DofId>], n: usize) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for map in maps {
            if let Some(&bad) = map.iter().find(|&&id| id >= n) {
                return invalid(format!("dof id {bad} out of range for {n} dofs"));
            }
            for &i in map {
                rows[i].extend_from_slice(map);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut columns = Vec::new();
        offsets.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            columns.extend_from_slice(row);
            offsets.push(columns.len());
        }
        let values = vec![0.0; columns.len()];
        Ok(Self {
            n,
            offsets,
            columns,
            values,
        })
    }

    /// Builds a matrix from raw CSR arrays; columns must be sorted per row.
    pub fn from_raw(n: usize, offsets: Vec<usize>, columns: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if offsets.len() != n + 1 || offsets[0] != 0 || offsets[n] != columns.len() || values.len() != columns.len() {
            return invalid("inconsistent CSR arrays");
        }
        for row in 0..n {
            let cols = &columns[offsets[row]..offsets[row + 1]];
            if offsets[row] > offsets[row + 1] || cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n) {
                return invalid(format!("row {row} has unsorted or out of range columns"));
            }
        }
        Ok(Self {
            n,
            offsets,
            columns,
            values,
        })
    }

    /// Dense row-major input, keeping only nonzeros (plus the diagonal).
    pub fn from_dense(n: usize, dense: &[f64]) -> Self {
        let mut offsets = vec![0];
        let mut columns = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = dense[i * n + j];
                if v != 0.0 || i == j {
                    columns.push(j);
                    values.push(v);
                }
            }
            offsets.push(columns.len());
        }
        Self {
            n,
            offsets,
            columns,
            values,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.columns.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.offsets[i]..self.offsets[i + 1];
        (&self.columns[range.clone()], &self.values[range])
    }

    pub fn row_mut(&mut self, i: usize) -> (&[usize], &mut [f64]) {
        let range = self.offsets[i]..self.offsets[i + 1];
        (&self.columns[range.clone()], &mut self.values[range])
    }

    /// Storage index of entry `(i, j)`, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|k| self.offsets[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `value` to an existing entry; missing slots are an error.
    pub fn add(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        match self.position(i, j) {
            Some(k) => {
                self.values[k] += value;
                Ok(())
            }
            None => Err(Error::PatternViolation { row: i, col: j }),
        }
    }

    /// Adds a dense element matrix (row-major, `map.len()` square).
    pub fn scatter(&mut self, map: &[DofId], element: &[f64]) -> Result<()> {
        let m = map.len();
        for (a, &i) in map.iter().enumerate() {
            let start = self.offsets[i];
            let cols = &self.columns[start..self.offsets[i + 1]];
            for (b, &j) in map.iter().enumerate() {
                match cols.binary_search(&j) {
                    Ok(k) => self.values[start + k] += element[a * m + b],
                    Err(_) => return Err(Error::PatternViolation { row: i, col: j }),
                }
            }
        }
        Ok(())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
    }

    pub fn matvec_parallel(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = self.row_dot(i, x));
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|` over the pattern.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                dense[i * self.n + j] = v;
            }
        }
        dense
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_pattern() {
        let m = SparseMatrixCsr::from_location_maps(&[vec![0, 1], vec![1, 2]], 3).unwrap();
        assert_eq!(m.nnz(), 7);
        assert_eq!(m.offsets(), &[0, 2, 5, 7]);
        let dense = SparseMatrixCsr::from_location_maps(&[vec![3, 0, 2, 1]], 4).unwrap();
        assert_eq!(dense.nnz(), 16);
        assert!(SparseMatrixCsr::from_location_maps(&[vec![0, 3]], 3).is_err());
    }

    #[test]
    fn scatter_and_violation() {
        let mut m = SparseMatrixCsr::from_location_maps(&[vec![0, 1], vec![1, 2]], 3).unwrap();
        m.scatter(&[1, 0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(0, 0), 4.0);
        assert!(matches!(m.add(0, 2, 1.0), Err(Error::PatternViolation { row: 0, col: 2 })));
        assert!(m.scatter(&[0, 2], &[0.0; 4]).is_err());

        let mut y = vec![0.0; 3];
        m.matvec(&[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![7.0, 3.0, 0.0]);
        let mut z = vec![0.0; 3];
        m.matvec_parallel(&[1.0, 1.0, 1.0], &mut z);
        assert_eq!(y, z);
        assert_eq!(m.asymmetry(), 1.0);
    }

    #[test]
    fn raw_validation() {
        assert!(SparseMatrixCsr::from_raw(2, vec![0, 1, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
        assert!(SparseMatrixCsr::from_raw(2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
    }
}
