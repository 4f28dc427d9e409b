//! Small dense linear-algebra helpers shared by the physics modules:
//! sorted Hermitian eigendecompositions, a certified eigensolver for the
//! 4x4 real flow matrices, and matrix functions built on them.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Eigendecomposition of a Hermitian complex matrix, eigenvalues ascending.
pub fn eigh(m: &DMatrix<Complex64>) -> (DVector<f64>, DMatrix<Complex64>) {
    let se = nalgebra::SymmetricEigen::new(m.clone());
    sort_eigh(se.eigenvalues, se.eigenvectors)
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
pub fn eigh_real(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let se = nalgebra::SymmetricEigen::new(m.clone());
    sort_eigh(se.eigenvalues, se.eigenvectors)
}

fn sort_eigh<T: nalgebra::Scalar + Copy + num_complex::ComplexFloat>(
    vals: DVector<f64>,
    vecs: DMatrix<T>,
) -> (DVector<f64>, DMatrix<T>) {
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let sorted_vals = DVector::from_iterator(n, order.iter().map(|&i| vals[i]));
    let mut sorted_vecs = DMatrix::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vecs.set_column(dst, &vecs.column(src));
    }
    (sorted_vals, sorted_vecs)
}

/// Largest singular value, via the largest eigenvalue of M^dag M.
pub fn sigma_max(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    let se = nalgebra::SymmetricEigen::new(gram);
    se.eigenvalues
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x.max(0.0)))
        .sqrt()
}

/// f(M) for Hermitian M: apply `f` to the eigenvalues.
pub fn hermitian_function(m: &DMatrix<Complex64>, f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let fj = Complex64::new(f(vals[j]), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vecs.adjoint()
}

fn frobenius4(m: &Matrix4<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One eigenpair of a 4x4 real matrix with its certification data.
#[derive(Debug, Clone)]
pub struct EigenPair4 {
    pub value: Complex64,
    pub vector: Vector4<Complex64>,
    /// ||(M - value I) vector||_2 / ||M||_F with a unit vector.
    pub backward_error: f64,
}

/// Certified eigenpairs of a 4x4 real matrix, sorted by (Re, Im).
///
/// Eigenvalues come from the real Schur form; each eigenvector is extracted
/// as the null direction of `M - value I` by full-pivot elimination and the
/// backward error is certified against `tol` (the flow analysis needs
/// imaginary parts trusted near zero).
pub fn eig4_certified(m: &Matrix4<f64>, tol: f64) -> Result<[EigenPair4; 4]> {
    let values = m.complex_eigenvalues();
    let scale = frobenius4(m).max(1.0);
    let mc = m.map(|x| Complex64::new(x, 0.0));
    let mut pairs: Vec<EigenPair4> = Vec::with_capacity(4);
    for idx in 0..4 {
        let nu = values[idx];
        let shifted = mc - Matrix4::identity().map(|x: f64| Complex64::new(x, 0.0)) * nu;
        let vector = null_direction4(&shifted);
        let backward_error = (shifted * vector).norm() / scale;
        if backward_error > tol {
            return Err(CoreError::EigenFailure(format!(
                "backward error {backward_error:e} above {tol:e} for eigenvalue {nu}"
            )));
        }
        pairs.push(EigenPair4 {
            value: nu,
            vector,
            backward_error,
        });
    }
    pairs.sort_by(|a, b| {
        (a.value.re, a.value.im)
            .partial_cmp(&(b.value.re, b.value.im))
            .unwrap()
    });
    Ok(pairs
        .try_into()
        .map_err(|_| CoreError::EigenFailure("pair count".into()))?)
}

/// Approximate null direction of a (near-singular) 4x4 complex matrix via
/// Gaussian elimination with full pivoting; the last pivot is treated as the
/// null one.
fn null_direction4(m: &Matrix4<Complex64>) -> Vector4<Complex64> {
    let mut a = *m;
    let mut row_perm = [0usize, 1, 2, 3];
    let mut col_perm = [0usize, 1, 2, 3];
    for step in 0..3 {
        // full pivot over the trailing block
        let (mut pi, mut pj, mut best) = (step, step, -1.0f64);
        for i in step..4 {
            for j in step..4 {
                let v = a[(i, j)].norm();
                if v > best {
                    best = v;
                    pi = i;
                    pj = j;
                }
            }
        }
        a.swap_rows(step, pi);
        a.swap_columns(step, pj);
        row_perm.swap(step, pi);
        col_perm.swap(step, pj);
        if best == 0.0 {
            break;
        }
        for i in step + 1..4 {
            let f = a[(i, step)] / a[(step, step)];
            for j in step..4 {
                let sub = f * a[(step, j)];
                a[(i, j)] -= sub;
            }
        }
    }
    // back-substitute with the last (permuted) variable set to 1
    let mut x = Vector4::from_element(Complex64::ZERO);
    x[3] = Complex64::new(1.0, 0.0);
    for i in (0..3).rev() {
        let mut acc = Complex64::ZERO;
        for j in i + 1..4 {
            acc += a[(i, j)] * x[j];
        }
        let piv = a[(i, i)];
        x[i] = if piv.norm() > 0.0 {
            -acc / piv
        } else {
            Complex64::ZERO
        };
    }
    let mut out = Vector4::from_element(Complex64::ZERO);
    for (permuted, &orig) in col_perm.iter().enumerate() {
        out[orig] = x[permuted];
    }
    let n = out.norm();
    if n > 0.0 {
        out /= Complex64::new(n, 0.0);
    }
    out
}

/// Solve a 4x4 complex system by LU; `None` when singular.
pub fn solve4(a: &Matrix4<Complex64>, rhs: &Vector4<Complex64>) -> Option<Vector4<Complex64>> {
    a.lu().solve(rhs)
}

/// 1-norm condition number of a real 4x4 matrix (infinite when singular).
pub fn cond1_4(a: &Matrix4<f64>) -> f64 {
    let norm1 = |m: &Matrix4<f64>| {
        (0..4)
            .map(|j| (0..4).map(|i| m[(i, j)].abs()).sum::<f64>())
            .fold(0.0f64, f64::max)
    };
    match a.try_inverse() {
        Some(inv) => norm1(a) * norm1(&inv),
        None => f64::INFINITY,
    }
}
