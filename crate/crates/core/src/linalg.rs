//! Symmetric positive (semi)definite factor-and-solve for the Fisher matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest equilibrated condition number accepted before a solve is refused.
pub const MAX_CONDITION: f64 = 1e12;

/// `P A P^T = L D L^T` with diagonal pivoting.
///
/// The pivot at each step is the remaining diagonal entry that is largest
/// relative to its original value, which makes the pivot order independent of
/// the units carried by each row.
#[derive(Debug, Clone)]
pub struct PivotedLdl {
    perm: Vec<usize>,
    lower: DMatrix<f64>,
    diag: Vec<f64>,
}

impl PivotedLdl {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::SingularFim {
                condition: f64::INFINITY,
            });
        }
        let mut work = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let reference: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        if reference.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::SingularFim {
                condition: f64::INFINITY,
            });
        }
        let mut diag = vec![0.0; n];

        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| {
                    let ri = work[(i, i)] / reference[perm[i]];
                    let rj = work[(j, j)] / reference[perm[j]];
                    ri.total_cmp(&rj)
                })
                .unwrap();
            if pivot != k {
                work.swap_rows(k, pivot);
                work.swap_columns(k, pivot);
                perm.swap(k, pivot);
            }
            let d = work[(k, k)];
            // relative pivot below rounding level means rank deficiency
            if !(d > 1e-14 * reference[perm[k]]) {
                return Err(Error::SingularFim {
                    condition: f64::INFINITY,
                });
            }
            diag[k] = d;
            for i in k + 1..n {
                work[(i, k)] /= d;
            }
            // full trailing update: later symmetric swaps read both triangles
            for j in k + 1..n {
                let ljk = work[(j, k)] * d;
                for i in k + 1..n {
                    let v = work[(i, k)] * ljk;
                    work[(i, j)] -= v;
                }
            }
        }
        Ok(PivotedLdl {
            perm,
            lower: work,
            diag,
        })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.diag.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lower[(i, j)] * y[j]).sum();
            y[i] -= s;
        }
        for (yi, d) in y.iter_mut().zip(&self.diag) {
            *yi /= d;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lower[(j, i)] * y[j]).sum();
            y[i] -= s;
        }
        let mut x = DVector::zeros(n);
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}

/// `D^{-1/2} A D^{-1/2}` with `D = diag(A)`; `None` if a diagonal entry is not positive.
pub fn equilibrate(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = a[(i, i)];
            (d > 0.0).then(|| 1.0 / d.sqrt())
        })
        .collect::<Option<_>>()?;
    Some(DMatrix::from_fn(n, n, |i, j| {
        a[(i, j)] * scale[i] * scale[j]
    }))
}

/// Extreme eigenvalues of the equilibrated matrix, `(min, max)`.
pub fn equilibrated_spectrum(a: &DMatrix<f64>) -> Option<(f64, f64)> {
    let scaled = equilibrate(a)?;
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((min, max))
}

/// 2-norm condition number of the equilibrated matrix, infinite when it is
/// singular or indefinite.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    match equilibrated_spectrum(a) {
        Some((min, max)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}
