use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{PauliSumHamiltonian, RydbergModel};

pub const DEFAULT_DENSE_LIMIT: usize = 12;
pub const DEFAULT_SPARSE_LIMIT: usize = 20;

fn check_size(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::TooLarge { sites: n, limit })
    } else {
        Ok(())
    }
}

/// Dense real symmetric Hamiltonian matrix.
pub fn build_dense_hamiltonian(model: &RydbergModel) -> Result<DMatrix<f64>> {
    build_dense_hamiltonian_limited(model, DEFAULT_DENSE_LIMIT)
}

pub fn build_dense_hamiltonian_limited(model: &RydbergModel, limit: usize) -> Result<DMatrix<f64>> {
    let n = model.n_sites();
    check_size(n, limit)?;
    let dim = 1usize << n;
    let off = -model.omega() / 2.0;
    let mut h = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        h[(s, s)] = model.diagonal_energy_index(s as u64);
        if off != 0.0 {
            for j in 0..n {
                h[(s ^ (1 << j), s)] = off;
            }
        }
    }
    Ok(h)
}

/// Dense complex Hermitian matrix of a Pauli sum.
pub fn build_dense_pauli_matrix(ham: &PauliSumHamiltonian) -> Result<DMatrix<Complex64>> {
    let n = ham.n_sites();
    check_size(n, DEFAULT_DENSE_LIMIT)?;
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        for (t, v) in ham.row_index(s as u64) {
            h[(t as usize, s)] += v;
        }
    }
    Ok(h)
}

/// Real symmetric sparse matrix: explicit diagonal plus CSR off-diagonal part.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    dim: usize,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseHamiltonian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `out = H v`.
    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for (row, o) in out.iter_mut().enumerate() {
            let mut acc = self.diag[row] * v[row];
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.vals[k] * v[self.cols[k] as usize];
            }
            *o = acc;
        }
    }

    /// Off-diagonal entries of `row` as `(column, value)`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[row]..self.row_ptr[row + 1])
            .map(move |k| (self.cols[k] as usize, self.vals[k]))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            m[(r, r)] = self.diag[r];
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}

pub fn build_sparse_hamiltonian(model: &RydbergModel) -> Result<SparseHamiltonian> {
    build_sparse_hamiltonian_limited(model, DEFAULT_SPARSE_LIMIT)
}

pub fn build_sparse_hamiltonian_limited(
    model: &RydbergModel,
    limit: usize,
) -> Result<SparseHamiltonian> {
    let n = model.n_sites();
    check_size(n, limit.min(31))?;
    let dim = 1usize << n;
    let off = -model.omega() / 2.0;
    let per_row = if off != 0.0 { n } else { 0 };
    let mut diag = Vec::with_capacity(dim);
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::with_capacity(dim * per_row);
    let mut vals = Vec::with_capacity(dim * per_row);
    row_ptr.push(0);
    for s in 0..dim {
        diag.push(model.diagonal_energy_index(s as u64));
        for j in 0..per_row {
            cols.push((s ^ (1 << j)) as u32);
            vals.push(off);
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseHamiltonian {
        dim,
        diag,
        row_ptr,
        cols,
        vals,
    })
}
