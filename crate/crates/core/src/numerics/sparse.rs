//! Compressed sparse row matrix (f64), canonical form: column indices
//! strictly increasing within each row, no explicit duplicates.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a canonical CSR matrix from (row, col, value) triplets.
    /// Duplicate coordinates are summed; exact zeros are kept out.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::Index(format!(
                    "sparse entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            entries.push((r, c, v));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_offsets = Vec::with_capacity(rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        let mut i = 0;
        for r in 0..rows {
            while i < entries.len() && entries[i].0 == r {
                let c = entries[i].1;
                let mut v = entries[i].2;
                i += 1;
                while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                    v += entries[i].2;
                    i += 1;
                }
                if v != 0.0 {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a CSR view of a dense rank-2 tensor, skipping exact zeros.
    pub fn from_dense(dense: &Tensor<f64>) -> Result<Self> {
        if dense.rank() != 2 {
            return Err(Error::Argument(format!(
                "from_dense: expected rank-2 tensor, got {:?}",
                dense.shape()
            )));
        }
        let (rows, cols) = (dense.dim(0), dense.dim(1));
        let mut row_offsets = Vec::with_capacity(rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for r in 0..rows {
            for (c, &v) in dense.row(r).iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nonzero (column, value) pairs of one row.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_offsets[r];
        let hi = self.row_offsets[r + 1];
        self.col_indices[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&c, &v)| (c, v))
    }

    /// Verifies the canonical-form invariants.
    pub fn check_canonical(&self) -> Result<()> {
        if self.row_offsets.len() != self.rows + 1
            || self.row_offsets[self.rows] != self.values.len()
            || self.col_indices.len() != self.values.len()
        {
            return Err(Error::Argument("CSR offset bookkeeping broken".into()));
        }
        for r in 0..self.rows {
            if self.row_offsets[r] > self.row_offsets[r + 1] {
                return Err(Error::Argument(format!("row_offsets decrease at row {r}")));
            }
            let mut prev: Option<usize> = None;
            for (c, _) in self.row_entries(r) {
                if c >= self.cols {
                    return Err(Error::Index(format!("column {c} out of range")));
                }
                if let Some(p) = prev {
                    if c <= p {
                        return Err(Error::Argument(format!(
                            "row {r}: columns not strictly increasing ({p} then {c})"
                        )));
                    }
                }
                prev = Some(c);
            }
        }
        Ok(())
    }

    pub fn densify(&self) -> Tensor<f64> {
        let mut out = Tensor::zeros(vec![self.rows, self.cols]);
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                out.as_mut_slice()[r * self.cols + c] = v;
            }
        }
        out
    }

    /// Same sparsity pattern, values transformed in storage order.
    /// Zeroed entries stay stored; canonical ordering is untouched.
    pub(crate) fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> SparseMatrix {
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        self.transpose_with_map().0
    }

    /// Transpose plus, per transposed entry, the storage index of its
    /// source entry (so per-entry weights can follow the transposition).
    pub(crate) fn transpose_with_map(&self) -> (SparseMatrix, Vec<usize>) {
        let mut counts = vec![0usize; self.cols];
        for &c in &self.col_indices {
            counts[c] += 1;
        }
        let mut row_offsets = vec![0usize; self.cols + 1];
        for c in 0..self.cols {
            row_offsets[c + 1] = row_offsets[c] + counts[c];
        }
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut source = vec![0usize; self.nnz()];
        let mut cursor = row_offsets.clone();
        for r in 0..self.rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                let c = self.col_indices[k];
                let dst = cursor[c];
                col_indices[dst] = r;
                values[dst] = self.values[k];
                source[dst] = k;
                cursor[c] += 1;
            }
        }
        (
            SparseMatrix {
                rows: self.cols,
                cols: self.rows,
                row_offsets,
                col_indices,
                values,
            },
            source,
        )
    }

    /// `spmm` with every stored value multiplied by its per-entry scale;
    /// avoids materializing a scaled copy of the matrix.
    pub(crate) fn spmm_scaled(
        &self,
        entry_scale: &[f64],
        d: &Tensor<f64>,
        out: &mut Tensor<f64>,
    ) -> Result<()> {
        debug_assert_eq!(entry_scale.len(), self.nnz());
        if self.cols != d.dim(0) {
            return Err(Error::dimension(
                "spmm_scaled",
                &[self.rows, self.cols],
                d.shape(),
            ));
        }
        let n = d.dim(1);
        debug_assert_eq!(out.shape(), &[self.rows, n]);
        let dense = d.as_slice();
        let out_data = out.as_mut_slice();
        out_data.fill(0.0);
        for r in 0..self.rows {
            let dst = &mut out_data[r * n..(r + 1) * n];
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                let v = self.values[k] * entry_scale[k];
                if v == 0.0 {
                    continue;
                }
                let src = &dense[self.col_indices[k] * n..(self.col_indices[k] + 1) * n];
                for (o, &s) in dst.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        Ok(())
    }

    /// Sparse-dense product; equals `matmul(self.densify(), d)`.
    pub fn spmm(&self, d: &Tensor<f64>) -> Result<Tensor<f64>> {
        if d.rank() != 2 {
            return Err(Error::Argument(format!(
                "spmm: expected rank-2 dense operand, got {:?}",
                d.shape()
            )));
        }
        if self.cols != d.dim(0) {
            return Err(Error::dimension(
                "spmm",
                &[self.rows, self.cols],
                d.shape(),
            ));
        }
        let n = d.dim(1);
        let mut out = Tensor::zeros(vec![self.rows, n]);
        let dense = d.as_slice();
        let out_data = out.as_mut_slice();
        for r in 0..self.rows {
            let dst = &mut out_data[r * n..(r + 1) * n];
            for (c, v) in self.row_entries(r) {
                let src = &dense[c * n..(c + 1) * n];
                for (o, &s) in dst.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tensor::matmul;
    use crate::util::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    pub(crate) fn random_sparse(
        rows: usize,
        cols: usize,
        density: f64,
        seed: u64,
    ) -> SparseMatrix {
        let mut rng = seeded_rng(seed);
        let mut triplets = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if rng.random::<f64>() < density {
                    triplets.push((r, c, rng.random::<f64>() * 2.0 - 1.0));
                }
            }
        }
        SparseMatrix::from_triplets(rows, cols, triplets).unwrap()
    }

    #[test]
    fn identity_spmm_is_identity() {
        let eye = SparseMatrix::identity(4);
        let mut rng = seeded_rng(5);
        let m = Tensor::<f64>::random_uniform(vec![4, 3], -1.0, 1.0, &mut rng);
        assert_eq!(eye.spmm(&m).unwrap(), m);
    }

    #[test]
    fn empty_sparse_gives_zeros() {
        let z = SparseMatrix::from_triplets(3, 5, []).unwrap();
        let mut rng = seeded_rng(6);
        let m = Tensor::<f64>::random_uniform(vec![5, 2], -1.0, 1.0, &mut rng);
        assert_eq!(z.spmm(&m).unwrap(), Tensor::zeros(vec![3, 2]));
    }

    #[test]
    fn spmm_matches_densified_matmul() {
        let s = random_sparse(20, 20, 0.1, 7);
        let mut rng = seeded_rng(8);
        let d = Tensor::<f64>::random_uniform(vec![20, 8], -1.0, 1.0, &mut rng);
        let sparse_path = s.spmm(&d).unwrap();
        let dense_path = matmul(&s.densify(), &d).unwrap();
        assert!(sparse_path.max_abs_diff(&dense_path) < 1e-12);
    }

    #[test]
    fn duplicate_triplets_are_summed_into_canonical_form() {
        let s =
            SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, -1.0)])
                .unwrap();
        s.check_canonical().unwrap();
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.densify().as_slice(), &[0.0, 3.0, -1.0, 0.0]);
    }

    #[test]
    fn transpose_round_trips() {
        let s = random_sparse(9, 13, 0.2, 9);
        let tt = s.transpose().transpose();
        assert_eq!(s, tt);
        s.transpose().check_canonical().unwrap();
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let s = SparseMatrix::identity(3);
        let d = Tensor::<f64>::zeros(vec![4, 2]);
        assert!(s.spmm(&d).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn prop_spmm_equals_densified_matmul(seed in 0u64..500, rows in 1usize..24, cols in 1usize..24, n in 1usize..6) {
            let s = random_sparse(rows, cols, 0.15, seed);
            s.check_canonical().unwrap();
            let mut rng = seeded_rng(seed ^ 0xabcd);
            let d = Tensor::<f64>::random_uniform(vec![cols, n], -1.0, 1.0, &mut rng);
            let a = s.spmm(&d).unwrap();
            let b = matmul(&s.densify(), &d).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-12);
        }
    }
}
