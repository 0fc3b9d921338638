//! Dense vector kernels, conjugate gradients and a banded Cholesky factor.
//!
//! Reductions are split into fixed-size chunks whose partial sums are added in
//! order, so results do not depend on the number of worker threads.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

type C = Complex64;

const CHUNK: usize = 4096;

/// Σ conj(a_i)·b_i
pub fn cdot(a: &[C], b: &[C]) -> C {
    assert_eq!(a.len(), b.len());
    let partial: Vec<C> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.conj() * q).sum())
        .collect();
    partial.into_iter().sum()
}

pub fn norm2(a: &[C]) -> f64 {
    let partial: Vec<f64> = a.par_chunks(CHUNK).map(|x| x.iter().map(|p| p.norm_sqr()).sum()).collect();
    partial.into_iter().sum::<f64>().sqrt()
}

/// y += alpha·x
pub fn axpy(alpha: C, x: &[C], y: &mut [C]) {
    y.par_iter_mut().with_min_len(CHUNK).zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn scale(alpha: C, x: &mut [C]) {
    x.par_iter_mut().with_min_len(CHUNK).for_each(|v| *v *= alpha);
}

/// Complex vector with independent standard normal real and imaginary parts.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C> {
    (0..n).map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<C>,
    pub iterations: usize,
    /// ‖Ax - b‖/‖b‖ recomputed from scratch at exit.
    pub residual: f64,
}

/// Conjugate gradients for a Hermitian positive definite `a`.
///
/// Stops once the recurrence residual falls below `tol·‖b‖`, then recomputes
/// the true residual; if that one is still too large (drift) the iteration is
/// resumed from the current iterate.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[C], tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let n = b.len();
    assert_eq!(a.nrows(), n);
    let bnorm = norm2(b);
    let zero = C::new(0.0, 0.0);
    if bnorm == 0.0 {
        return Ok(CgOutcome { x: vec![zero; n], iterations: 0, residual: 0.0 });
    }
    let target = tol * bnorm;
    let mut x = vec![zero; n];
    let mut iterations = 0;
    let mut ap = vec![zero; n];
    loop {
        let ax = a.mul_vec(&x);
        let mut r: Vec<C> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let true_res = norm2(&r);
        if true_res <= target {
            return Ok(CgOutcome { x, iterations, residual: true_res / bnorm });
        }
        if iterations >= max_iter {
            return Err(Error::NonConvergence { iterations, residual: true_res / bnorm });
        }
        let mut p = r.clone();
        let mut rr = cdot(&r, &r).re;
        while iterations < max_iter {
            a.mul_vec_into(&p, &mut ap);
            let pap = cdot(&p, &ap).re;
            if pap <= 0.0 {
                return Err(Error::Consistency(format!(
                    "conjugate gradients met a non-positive curvature pᴴAp = {pap:e}"
                )));
            }
            let alpha = C::new(rr / pap, 0.0);
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            iterations += 1;
            let rr_new = cdot(&r, &r).re;
            if rr_new.sqrt() <= 0.5 * target {
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            p.par_iter_mut().with_min_len(CHUNK).zip(&r).for_each(|(pi, ri)| *pi = ri + *pi * beta);
        }
    }
}

/// Cholesky factor A = L Lᴴ of a Hermitian positive definite band matrix.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// Row i holds L[i, i-bw..=i] at offsets 0..=bw.
    l: Vec<C>,
}

impl BandedCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Usage("banded Cholesky needs a square matrix".into()));
        }
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut l = vec![C::new(0.0, 0.0); n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if *c <= i {
                    l[i * w + (c + bw - i)] = *v;
                }
            }
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = l[i * w + (j + bw - i)];
                if klo < j {
                    let ri = &l[i * w + (klo + bw - i)..i * w + (j + bw - i)];
                    let rj = &l[j * w + (klo + bw - j)..j * w + bw];
                    for (p, q) in ri.iter().zip(rj) {
                        s -= p * q.conj();
                    }
                }
                if j < i {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw].re;
                } else {
                    if !(s.re > 0.0) {
                        return Err(Error::Consistency(format!(
                            "matrix is not positive definite (pivot {i}: {:e})",
                            s.re
                        )));
                    }
                    l[i * w + bw] = C::new(s.re.sqrt(), 0.0);
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[C]) -> Vec<C> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.l[i * w + (lo + bw - i)..i * w + bw];
            let mut s = y[i];
            for (lk, yk) in row.iter().zip(&y[lo..i]) {
                s -= lk * yk;
            }
            y[i] = s / self.l[i * w + bw].re;
        }
        for i in (0..n).rev() {
            let xi = y[i] / self.l[i * w + bw].re;
            y[i] = xi;
            let lo = i.saturating_sub(bw);
            let row = &self.l[i * w + (lo + bw - i)..i * w + bw];
            for (lk, yk) in row.iter().zip(&mut y[lo..i]) {
                *yk -= lk.conj() * xi;
            }
        }
        y
    }

    pub fn solve_many(&self, bs: &[Vec<C>]) -> Vec<Vec<C>> {
        bs.par_iter().map(|b| self.solve(b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn laplacian_like(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C::new(4.0, 0.0)));
            if i + 1 < n {
                t.push((i, i + 1, C::new(-1.0, 0.5)));
                t.push((i + 1, i, C::new(-1.0, -0.5)));
            }
            if i + 3 < n {
                t.push((i, i + 3, C::new(0.0, -1.0)));
                t.push((i + 3, i, C::new(0.0, 1.0)));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn cholesky_solves() {
        let a = laplacian_like(40);
        let f = BandedCholesky::factor(&a).unwrap();
        assert_eq!(f.bandwidth(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_vector(&mut rng, 40);
        let b = a.mul_vec(&x);
        let y = f.solve(&b);
        let err: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, C::new(1.0, 0.0)), (1, 1, C::new(-1.0, 0.0))]);
        assert!(matches!(BandedCholesky::factor(&a), Err(Error::Consistency(_))));
    }

    #[test]
    fn cg_solves_and_handles_zero() {
        let a = laplacian_like(60);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_vector(&mut rng, 60);
        let out = conjugate_gradient(&a, &b, 1e-12, 500).unwrap();
        assert!(out.residual <= 1e-12);
        let z = conjugate_gradient(&a, &vec![C::new(0.0, 0.0); 60], 1e-12, 500).unwrap();
        assert_eq!(z.iterations, 0);
        assert!(z.x.iter().all(|v| *v == C::new(0.0, 0.0)));
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let a = laplacian_like(60);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_vector(&mut rng, 60);
        match conjugate_gradient(&a, &b, 1e-14, 2) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
