//! Sparse symmetric matrices and an envelope (skyline) Cholesky solver.
//!
//! Finite element matrices on 2D meshes have a small profile once the
//! unknowns are renumbered with reverse Cuthill-McKee, so a row-oriented
//! envelope factorization is both simple and fast enough for the mesh sizes
//! used here. Dense trailing rows (electrode unknowns) are handled by placing
//! them last in the ordering.

use std::collections::VecDeque;

use crate::error::{EitError, Result};

/// Accumulates `(row, col, value)` contributions of a symmetric matrix.
///
/// Only one triangle needs to be supplied; `push_sym` mirrors off-diagonal
/// entries automatically.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self { n, entries: Vec::with_capacity(cap) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` at `(i, j)` and, when `i != j`, at `(j, i)`.
    pub fn push_sym(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.entries.push((i, j, v));
        if i != j {
            self.entries.push((j, i, v));
        }
    }

    pub fn build(mut self) -> SparseSym {
        self.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSym { n: self.n, row_ptr, col_idx, values }
    }
}

/// Symmetric sparse matrix in CSR form with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over the stored entries of `row`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> SparseSym {
        let mut local = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            local[i] = k;
        }
        let mut b = TripletBuilder::new(idx.len());
        for (k, &i) in idx.iter().enumerate() {
            for (j, v) in self.row(i) {
                let l = local[j];
                if l != usize::MAX {
                    b.entries.push((k, l, v));
                }
            }
        }
        b.build()
    }

    /// Reverse Cuthill-McKee ordering of the leading `n_graph` unknowns,
    /// followed by the remaining unknowns in their natural order.
    ///
    /// Returned vector maps new position to original index.
    pub fn rcm_ordering(&self, n_graph: usize) -> Vec<usize> {
        let n = n_graph.min(self.n);
        let degree: Vec<usize> = (0..n)
            .map(|i| self.row(i).filter(|&(j, _)| j < n && j != i).count())
            .collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(self.n);
        let mut nbrs = Vec::new();
        loop {
            // Start each component from a pseudo-peripheral node of minimum degree.
            let start = match (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]) {
                Some(s) => self.pseudo_peripheral(s, n, &visited),
                None => break,
            };
            let mut queue = VecDeque::from([start]);
            visited[start] = true;
            while let Some(i) = queue.pop_front() {
                order.push(i);
                nbrs.clear();
                nbrs.extend(self.row(i).map(|(j, _)| j).filter(|&j| j < n && !visited[j]));
                nbrs.sort_unstable_by_key(|&j| (degree[j], j));
                for &j in &nbrs {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
        order.reverse();
        order.extend(n..self.n);
        order
    }

    fn pseudo_peripheral(&self, start: usize, n: usize, visited: &[bool]) -> usize {
        let mut node = start;
        let mut ecc = 0;
        for _ in 0..8 {
            let mut level = vec![usize::MAX; n];
            level[node] = 0;
            let mut queue = VecDeque::from([node]);
            let mut far = node;
            while let Some(i) = queue.pop_front() {
                for (j, _) in self.row(i) {
                    if j < n && !visited[j] && level[j] == usize::MAX {
                        level[j] = level[i] + 1;
                        queue.push_back(j);
                        if level[j] > level[far] || (level[j] == level[far] && j < far) {
                            far = j;
                        }
                    }
                }
            }
            if level[far] <= ecc {
                break;
            }
            ecc = level[far];
            node = far;
        }
        node
    }
}

/// Cholesky factor `P A Pᵀ = L Lᵀ` stored row-wise over the envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    /// new position -> original index
    perm: Vec<usize>,
    /// first stored column of each row (new numbering)
    first: Vec<usize>,
    /// start offset of each row in `data`
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors `a` using reverse Cuthill-McKee over all unknowns.
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let perm = a.rcm_ordering(a.dim());
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &SparseSym, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        if perm.len() != n {
            return Err(EitError::Shape(format!(
                "ordering has length {} for a {n}x{n} matrix",
                perm.len()
            )));
        }
        let mut iperm = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        if iperm.iter().any(|&p| p == usize::MAX) {
            return Err(EitError::Input("ordering is not a permutation".into()));
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                let jn = iperm[j];
                if jn < first[new] {
                    first[new] = jn;
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            offset.push(total);
            total += i - first[i] + 1;
        }
        offset.push(total);
        let mut data = vec![0.0; total];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let jn = iperm[j];
                if jn <= new {
                    data[offset[new] + jn - first[new]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = data.split_at_mut(offset[i]);
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let row_j = &done[offset[j]..offset[j] + j - fj + 1];
                let dot: f64 = row_i[lo - fi..j - fi]
                    .iter()
                    .zip(&row_j[lo - fj..j - fj])
                    .map(|(x, y)| x * y)
                    .sum();
                row_i[j - fi] = (row_i[j - fi] - dot) / row_j[j - fj];
            }
            let d = row_i[i - fi] - row_i[..i - fi].iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(EitError::Singular(format!(
                    "non-positive pivot {d:e} at position {i} (original index {})",
                    perm[i]
                )));
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(Self { n, perm, first, offset, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.offset[i]..self.offset[i + 1]]
    }

    /// `z = L⁻¹ P b`, the first half of a solve.
    pub fn half_solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut z: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..self.n {
            let fi = self.first[i];
            let row = self.row(i);
            let dot: f64 = row[..i - fi].iter().zip(&z[fi..i]).map(|(l, x)| l * x).sum();
            z[i] = (z[i] - dot) / row[i - fi];
        }
        z
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut z = self.half_solve(b);
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            z[i] /= row[i - fi];
            let zi = z[i];
            for (l, x) in row[..i - fi].iter().zip(&mut z[fi..i]) {
                *x -= l * zi;
            }
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = z[new];
        }
        x
    }

    /// log-determinant of the factored matrix.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.row(i)[i - self.first[i]].ln()).sum()
    }
}
