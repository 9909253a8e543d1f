//! Dense and tridiagonal eigensolvers plus small helpers on complex matrices.
//!
//! The lattice Hamiltonians are real symmetric tridiagonal, so the workhorse is
//! an implicit-shift QL iteration on the tridiagonal form. Dense symmetric input
//! falls back to nalgebra's Householder + QR path. Unitary matrices are
//! diagonalized through a complex Schur decomposition, which for a normal
//! matrix is diagonal, so the Schur vectors are an orthonormal eigenbasis.

use nalgebra::{Complex, ComplexField, DMatrix};

use crate::error::{Error, Result};
use crate::scalar::Real;

const QL_MAX_SWEEPS: usize = 64;
const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues in ascending order with matching orthonormal eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct SymmetricEigenpairs<T: Real> {
    pub values: Vec<T>,
    pub vectors: DMatrix<T>,
}

/// Eigen-decomposition of a real symmetric tridiagonal matrix.
///
/// `diag` has length n, `off` has length n - 1 (entry j couples j and j + 1).
pub fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T]) -> Result<SymmetricEigenpairs<T>> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::InvalidArgument(format!(
            "tridiagonal shape mismatch: {} diagonal, {} off-diagonal entries",
            n,
            off.len()
        )));
    }
    let mut d = diag.to_vec();
    let mut e: Vec<T> = off.iter().copied().chain(std::iter::once(T::zero())).collect();
    let mut z = DMatrix::<T>::identity(n, n);
    let eps = T::default_epsilon();
    let two = T::lit(2.0);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(Error::NoConvergence);
            }

            // Wilkinson-style shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let signed_r = if g >= T::zero() { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + signed_r);
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;

            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (mut col_i, mut col_f) = z.columns_range_pair_mut(i, i + 1);
                for (zi, zf) in col_i.iter_mut().zip(col_f.iter_mut()) {
                    let (a, b) = (*zi, *zf);
                    *zf = s * a + c * b;
                    *zi = c * a - s * b;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }

    Ok(sorted_pairs(d, z))
}

fn sorted_pairs<T: Real>(values: Vec<T>, vectors: DMatrix<T>) -> SymmetricEigenpairs<T> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let sorted_vectors = DMatrix::from_fn(vectors.nrows(), n, |r, c| vectors[(r, order[c])]);
    SymmetricEigenpairs { values: sorted_values, vectors: sorted_vectors }
}

/// Largest |m[i][j] - m[j][i]| over the matrix.
pub fn max_asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn is_tridiagonal<T: Real>(m: &DMatrix<T>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i.abs_diff(j) <= 1 || m[(i, j)] == T::zero()))
}

/// Eigen-decomposition of a real symmetric matrix, tridiagonal fast path included.
pub fn symmetric_eigen<T: Real>(m: &DMatrix<T>) -> Result<SymmetricEigenpairs<T>> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(T::one());
    let asym = max_asymmetry(m);
    if asym > T::lit(1e-12) * scale {
        return Err(Error::NotHermitian(asym.as_f64()));
    }
    if is_tridiagonal(m) {
        let n = m.nrows();
        let diag: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
        let off: Vec<T> = (0..n.saturating_sub(1)).map(|i| m[(i, i + 1)]).collect();
        return tridiagonal_eigen(&diag, &off);
    }
    let eig = m.clone().symmetric_eigen();
    Ok(sorted_pairs(eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// exp(-i * t * H) assembled from the eigenpairs of H.
pub fn exp_i_symmetric<T: Real>(eig: &SymmetricEigenpairs<T>, t: T) -> DMatrix<Complex<T>> {
    let n = eig.values.len();
    let phases: Vec<Complex<T>> = eig
        .values
        .iter()
        .map(|&lambda| {
            let theta = lambda * t;
            Complex::new(theta.cos(), -theta.sin())
        })
        .collect();
    let v = &eig.vectors;
    DMatrix::from_fn(n, n, |r, c| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for k in 0..n {
            acc += phases[k] * (v[(r, k)] * v[(c, k)]);
        }
        acc
    })
}

/// Max entrywise |U^H U - I|.
pub fn unitarity_deviation<T: Real>(u: &DMatrix<Complex<T>>) -> T {
    let prod = u.adjoint() * u;
    let n = prod.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { T::one() } else { T::zero() };
            let d = prod[(i, j)] - Complex::new(target, T::zero());
            worst = worst.max(d.modulus());
        }
    }
    worst
}

/// Max entrywise modulus of a complex matrix.
pub fn max_modulus<T: Real>(m: &DMatrix<Complex<T>>) -> T {
    m.iter().fold(T::zero(), |acc, c| acc.max(c.modulus()))
}

/// Operator 2-norm (largest singular value).
pub fn operator_norm<T: Real>(m: &DMatrix<Complex<T>>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone().singular_values().iter().fold(T::zero(), |acc, &s| acc.max(s))
}

/// Smallest singular value.
pub fn min_singular_value<T: Real>(m: &DMatrix<Complex<T>>) -> T {
    let sv = m.clone().singular_values();
    sv.iter().copied().fold(T::max_value().unwrap_or(T::lit(f64::MAX)), |acc, s| acc.min(s))
}

/// Promotes a real matrix to a complex one.
pub fn complexify<T: Real>(m: &DMatrix<T>) -> DMatrix<Complex<T>> {
    m.map(|x| Complex::new(x, T::zero()))
}

/// Eigenvalues and orthonormal eigenvectors of a unitary matrix.
#[derive(Clone, Debug)]
pub struct UnitaryEigen<T: Real> {
    pub values: Vec<Complex<T>>,
    pub vectors: DMatrix<Complex<T>>,
}

/// Diagonalizes a unitary (more generally, normal) matrix via complex Schur.
pub fn unitary_eigen<T: Real>(u: &DMatrix<Complex<T>>) -> Result<UnitaryEigen<T>> {
    if !u.is_square() {
        return Err(Error::InvalidArgument("unitary eigen: matrix not square".into()));
    }
    let schur = nalgebra::Schur::try_new(u.clone(), T::default_epsilon(), SCHUR_MAX_ITER)
        .ok_or(Error::NoConvergence)?;
    let (q, t) = schur.unpack();
    let values = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    Ok(UnitaryEigen { values, vectors: q })
}
