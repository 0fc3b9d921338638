//! Column-major blocks of complex vectors and the GEMM kernels the Krylov
//! solver is built from.

use matrixmultiply::{zgemm, CGemmOption};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

type C = Complex64;

/// `rows × cols`, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C>,
}

fn as_raw(p: *const C) -> *const [f64; 2] {
    p as *const [f64; 2]
}

impl Block {
    pub fn new(rows: usize) -> Self {
        Self { rows, cols: 0, data: Vec::new() }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_columns(rows: usize, cols: &[Vec<C>]) -> Self {
        let mut b = Self::new(rows);
        for c in cols {
            b.push(c);
        }
        b
    }

    pub fn col(&self, j: usize) -> &[C] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn push(&mut self, v: &[C]) {
        assert_eq!(v.len(), self.rows);
        self.data.extend_from_slice(v);
        self.cols += 1;
    }

    pub fn append(&mut self, other: &Block) {
        assert_eq!(other.rows, self.rows);
        self.data.extend_from_slice(&other.data);
        self.cols += other.cols;
    }

    pub fn columns(&self, start: usize, end: usize) -> Block {
        Block { rows: self.rows, cols: end - start, data: self.data[start * self.rows..end * self.rows].to_vec() }
    }

    pub fn to_columns(&self) -> Vec<Vec<C>> {
        (0..self.cols).map(|j| self.col(j).to_vec()).collect()
    }

    /// Selfᴴ·w restricted to the first `upto` columns of self.
    pub fn adjoint_mul(&self, upto: usize, w: &Block) -> DMatrix<C> {
        assert_eq!(self.rows, w.rows);
        let (n, p, q) = (self.rows, upto, w.cols);
        let mut out = DMatrix::from_element(p, q, C::new(0.0, 0.0));
        if p == 0 || q == 0 || n == 0 {
            return out;
        }
        let wc: Vec<C> = w.data.iter().map(|x| x.conj()).collect();
        // out = conj(selfᵀ · conj(w)); nalgebra storage is column-major
        unsafe {
            zgemm(
                CGemmOption::Standard,
                CGemmOption::Standard,
                p,
                n,
                q,
                [1.0, 0.0],
                as_raw(self.data.as_ptr()),
                n as isize,
                1,
                as_raw(wc.as_ptr()),
                1,
                n as isize,
                [0.0, 0.0],
                out.as_mut_ptr() as *mut [f64; 2],
                1,
                p as isize,
            );
        }
        out.iter_mut().for_each(|x| *x = x.conj());
        out
    }

    /// out ← alpha·self[:, ..c.nrows()]·c + beta·out
    pub fn mul_into(&self, c: &DMatrix<C>, alpha: C, beta: C, out: &mut Block) {
        let (n, p, q) = (self.rows, c.nrows(), c.ncols());
        assert!(p <= self.cols);
        assert_eq!((out.rows, out.cols), (n, q));
        if n == 0 || q == 0 {
            return;
        }
        if p == 0 {
            out.data.iter_mut().for_each(|x| *x *= beta);
            return;
        }
        unsafe {
            zgemm(
                CGemmOption::Standard,
                CGemmOption::Standard,
                n,
                p,
                q,
                [alpha.re, alpha.im],
                as_raw(self.data.as_ptr()),
                1,
                n as isize,
                as_raw(c.as_ptr()),
                1,
                p as isize,
                [beta.re, beta.im],
                out.data.as_mut_ptr() as *mut [f64; 2],
                1,
                n as isize,
            );
        }
    }

    pub fn mul(&self, c: &DMatrix<C>) -> Block {
        let mut out = Block::zeros(self.rows, c.ncols());
        self.mul_into(c, C::new(1.0, 0.0), C::new(0.0, 0.0), &mut out);
        out
    }

    fn max_col_norm(&self) -> f64 {
        (0..self.cols).map(|j| self.col(j).iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }
}

/// w ← w − V Vᴴ w over the first `upto` columns of V.
pub fn project_out(v: &Block, upto: usize, w: &mut Block) {
    if upto == 0 || w.cols == 0 {
        return;
    }
    let c = v.adjoint_mul(upto, w);
    v.mul_into(&c, C::new(-1.0, 0.0), C::new(1.0, 0.0), w);
}

/// Orthonormal basis of span(w) via the eigen-decomposition of its Gram
/// matrix, dropping directions whose Gram eigenvalue is below `floor`.
fn svqb(w: &Block, floor: f64) -> Block {
    if w.cols == 0 {
        return w.clone();
    }
    let mut g = w.adjoint_mul(w.cols, w);
    for i in 0..g.nrows() {
        g[(i, i)].im = 0.0;
        for j in 0..i {
            let avg = 0.5 * (g[(i, j)] + g[(j, i)].conj());
            g[(i, j)] = avg;
            g[(j, i)] = avg.conj();
        }
    }
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..w.cols).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let keep: Vec<usize> = order.into_iter().filter(|&i| eig.eigenvalues[i] > floor).collect();
    let mut t = DMatrix::from_element(w.cols, keep.len(), C::new(0.0, 0.0));
    for (c, &i) in keep.iter().enumerate() {
        let s = 1.0 / eig.eigenvalues[i].sqrt();
        for r in 0..w.cols {
            t[(r, c)] = eig.eigenvectors[(r, i)] * s;
        }
    }
    w.mul(&t)
}

/// Orthonormalises `w` against the first `upto` (orthonormal) columns of
/// `v` and internally; directions numerically inside span(v) are dropped.
pub fn orthonormalize_against(v: &Block, upto: usize, mut w: Block) -> Block {
    let scale = w.max_col_norm();
    if scale == 0.0 {
        return Block::new(w.rows);
    }
    project_out(v, upto, &mut w);
    project_out(v, upto, &mut w);
    let w = svqb(&w, (1e-10 * scale).powi(2));
    let mut w = w;
    project_out(v, upto, &mut w);
    svqb(&w, 0.25)
}
