//! Compressed sparse row storage for complex matrices.
//!
//! Only what the assemblies and solvers need: triplet construction, products,
//! adjoints, Gram products with exact Hermitian symmetry and principal
//! submatrices.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

type C = Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    /// Builds from (row, col, value) triplets. Duplicates are summed in input
    /// order; explicit zeros are kept so the sparsity pattern is predictable.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, C)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1, t));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for t in order {
            let (r, c, v) = triplets[t];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    /// Builds from rows already sorted by column without duplicates.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, C)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                debug_assert!(c < ncols);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
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

    pub fn row(&self, i: usize) -> (&[usize], &[C]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> C {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => C::new(0.0, 0.0),
        }
    }

    /// y = A x, rows in parallel.
    pub fn mul_vec(&self, x: &[C]) -> Vec<C> {
        let mut y = vec![C::new(0.0, 0.0); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[C], y: &mut [C]) {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mul_vec");
        assert_eq!(y.len(), self.nrows, "dimension mismatch in mul_vec");
        y.par_iter_mut().with_min_len(512).enumerate().for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            let mut acc = C::new(0.0, 0.0);
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            *yi = acc;
        });
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![C::new(0.0, 0.0); self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                let p = next[*c];
                indices[p] = r;
                values[p] = v.conj();
                next[*c] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, indptr, indices, values }
    }

    /// Aᴴ A. Only the upper triangle is computed; the lower triangle is its
    /// exact conjugate mirror and the diagonal is real, so the result equals
    /// its conjugate transpose bit for bit.
    pub fn gram(&self) -> CsrMatrix {
        let at = self.adjoint();
        let n = self.ncols;
        let upper: Vec<Vec<(usize, C)>> = (0..n)
            .into_par_iter()
            .map_init(
                || (vec![C::new(0.0, 0.0); n], vec![false; n], Vec::<usize>::new()),
                |(acc, seen, touched), i| {
                    let (ks, aki) = at.row(i);
                    for (k, a) in ks.iter().zip(aki) {
                        let (js, akj) = self.row(*k);
                        for (j, b) in js.iter().zip(akj) {
                            if *j < i {
                                continue;
                            }
                            if !seen[*j] {
                                seen[*j] = true;
                                touched.push(*j);
                            }
                            acc[*j] += a * b;
                        }
                    }
                    touched.sort_unstable();
                    let mut row = Vec::with_capacity(touched.len());
                    for &j in touched.iter() {
                        let mut v = acc[j];
                        if j == i {
                            v.im = 0.0;
                        }
                        row.push((j, v));
                        acc[j] = C::new(0.0, 0.0);
                        seen[j] = false;
                    }
                    touched.clear();
                    row
                },
            )
            .collect();
        mirror_upper(n, upper)
    }

    /// Principal submatrix on `idx` (which must be strictly increasing).
    pub fn principal_submatrix(&self, idx: &[usize]) -> CsrMatrix {
        assert_eq!(self.nrows, self.ncols);
        let mut map = vec![usize::MAX; self.ncols];
        for (new, &old) in idx.iter().enumerate() {
            map[old] = new;
        }
        let rows = idx
            .iter()
            .map(|&old| {
                let (cols, vals) = self.row(old);
                cols.iter()
                    .zip(vals)
                    .filter(|(c, _)| map[**c] != usize::MAX)
                    .map(|(c, v)| (map[*c], *v))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>();
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.sort_by_key(|e| e.0);
                r
            })
            .collect();
        CsrMatrix::from_rows(idx.len(), rows)
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> CsrMatrix {
        let rows = (start..end)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().copied().zip(v.iter().copied()).collect()
            })
            .collect();
        CsrMatrix::from_rows(self.ncols, rows)
    }

    /// `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for (m, s) in [(self, alpha), (other, beta)] {
            for i in 0..m.nrows {
                let (cols, vals) = m.row(i);
                for (c, v) in cols.iter().zip(vals) {
                    trip.push((i, *c, v * s));
                }
            }
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, &trip)
    }

    /// max |a_ij - conj(a_ji)|.
    pub fn hermitian_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let adj = self.adjoint();
        let diff = self.linear_combination(1.0, &adj, -1.0);
        diff.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// True when every stored entry matches its mirrored conjugate exactly.
    pub fn is_exactly_hermitian(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        (0..self.nrows).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(j, v)| self.get(*j, i) == v.conj())
        })
    }

    /// Half-bandwidth max |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.nrows)
            .map(|i| {
                let (cols, _) = self.row(i);
                match (cols.first(), cols.last()) {
                    (Some(a), Some(b)) => (i.abs_diff(*a)).max(i.abs_diff(*b)),
                    _ => 0,
                }
            })
            .max()
            .unwrap_or(0)
    }

    pub fn diagonal(&self) -> Vec<C> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<C> {
        let mut m = DMatrix::from_element(self.nrows, self.ncols, C::new(0.0, 0.0));
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c)] = *v;
            }
        }
        m
    }

    /// Matrix Market coordinate output. With `hermitian` only the lower
    /// triangle is written, as the format requires.
    pub fn write_matrix_market<W: Write>(&self, mut out: W, hermitian: bool) -> std::io::Result<()> {
        let sym = if hermitian { "hermitian" } else { "general" };
        writeln!(out, "%%MatrixMarket matrix coordinate complex {sym}")?;
        let mut entries = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if !hermitian || *c <= i {
                    entries.push((i, *c, *v));
                }
            }
        }
        writeln!(out, "{} {} {}", self.nrows, self.ncols, entries.len())?;
        for (i, j, v) in entries {
            writeln!(out, "{} {} {:e} {:e}", i + 1, j + 1, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Completes a Hermitian matrix from its upper-triangle rows.
pub(crate) fn mirror_upper(n: usize, upper: Vec<Vec<(usize, C)>>) -> CsrMatrix {
    let mut lower: Vec<Vec<(usize, C)>> = vec![Vec::new(); n];
    for (i, row) in upper.iter().enumerate() {
        for &(j, v) in row {
            if j > i {
                lower[j].push((i, v.conj()));
            }
        }
    }
    let rows = lower
        .into_iter()
        .zip(upper)
        .map(|(mut l, u)| {
            l.extend(u);
            l
        })
        .collect();
    CsrMatrix::from_rows(n, rows)
}
