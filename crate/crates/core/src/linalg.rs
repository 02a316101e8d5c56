//! Dense complex linear algebra used by the certification pipeline.
//!
//! Everything here works on `DMatrix<Complex64>` and is built on the complex
//! Schur form: eigenvalues are read off the triangular factor, Lyapunov
//! equations are solved by Bartels-Stewart, and Riccati equations through
//! an ordered Schur basis of the associated Hamiltonian matrix.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

const SCHUR_MAX_ITER: usize = 100_000;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entry magnitude.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entry magnitude together with its position.
pub fn max_abs_at(m: &CMatrix) -> (f64, usize, usize) {
    let mut best = (0.0, 0, 0);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)].norm();
            if v > best.0 {
                best = (v, i, j);
            }
        }
    }
    best
}

pub fn check_finite(name: &str, m: &CMatrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite {
                    matrix: name.to_string(),
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(())
}

pub fn conj(m: &CMatrix) -> CMatrix {
    m.map(|z| z.conj())
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `(m + m†) / 2`
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |a: f64, &s| a.max(s))
}

/// Complex Schur decomposition `m = q t q†` with `t` upper triangular.
pub fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            what: "schur".into(),
            expected: "square matrix".into(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let s = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    let (q, mut t) = s.unpack();
    for j in 0..t.ncols() {
        for i in (j + 1)..t.nrows() {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    let (_, t) = schur(m)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Max real part over the spectrum.
pub fn spectral_abscissa(m: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .fold(f64::NEG_INFINITY, |a, z| a.max(z.re)))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_hermitian_eig(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(f64::NAN)
}

pub fn max_hermitian_eig(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).last().copied().unwrap_or(f64::NAN)
}

/// Solves `(t + shift·I) y = rhs` for upper triangular `t`.
fn upper_triangular_solve(t: &CMatrix, shift: C64, rhs: &DVector<C64>) -> Result<DVector<C64>> {
    let n = t.nrows();
    let mut y = rhs.clone();
    let scale = max_abs(t).max(1.0);
    for i in (0..n).rev() {
        let mut acc = y[i];
        for k in (i + 1)..n {
            acc -= t[(i, k)] * y[k];
        }
        let d = t[(i, i)] + shift;
        if d.norm() <= 1e3 * f64::EPSILON * scale {
            return Err(Error::Numeric(
                "singular Sylvester operator (eigenvalues of A and -A† overlap)".into(),
            ));
        }
        y[i] = acc / d;
    }
    Ok(y)
}

/// Solves the continuous Lyapunov equation `a x + x a† + q = 0`.
///
/// Bartels-Stewart on the complex Schur form of `a`. The result is made
/// exactly Hermitian when `q` is Hermitian.
pub fn lyapunov(a: &CMatrix, q: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "lyapunov".into(),
            expected: format!("{n}x{n}"),
            got: format!("A {}x{}, Q {}x{}", a.nrows(), a.ncols(), q.nrows(), q.ncols()),
        });
    }
    let (u, t) = schur(a)?;
    // t y + y t† = -u† q u
    let rhs = -(u.adjoint() * q * &u);
    let mut y = CMatrix::zeros(n, n);
    for j in (0..n).rev() {
        let mut col: DVector<C64> = rhs.column(j).into_owned();
        for k in (j + 1)..n {
            let coeff = t[(j, k)].conj();
            col -= y.column(k) * coeff;
        }
        let sol = upper_triangular_solve(&t, t[(j, j)].conj(), &col)?;
        y.set_column(j, &sol);
    }
    let x = &u * y * u.adjoint();
    if max_abs(&(q - q.adjoint())) <= 1e-14 * max_abs(q).max(f64::MIN_POSITIVE) {
        Ok(hermitian_part(&x))
    } else {
        Ok(x)
    }
}

/// Swaps the adjacent diagonal entries `k`, `k+1` of the upper triangular `t`,
/// updating the unitary basis `q` so that `q t q†` is unchanged.
fn swap_schur_pair(q: &mut CMatrix, t: &mut CMatrix, k: usize) {
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let t12 = t[(k, k + 1)];
    let v1 = t12;
    let v2 = t22 - t11;
    let nrm = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if nrm == 0.0 {
        return;
    }
    let (g11, g21) = (v1 / nrm, v2 / nrm);
    let (g12, g22) = (-g21.conj(), g11.conj());
    let n = t.nrows();
    // t <- g† t  on rows k, k+1
    for j in 0..n {
        let a = t[(k, j)];
        let b = t[(k + 1, j)];
        t[(k, j)] = g11.conj() * a + g21.conj() * b;
        t[(k + 1, j)] = g12.conj() * a + g22.conj() * b;
    }
    // t <- t g  and  q <- q g  on columns k, k+1
    for i in 0..n {
        let a = t[(i, k)];
        let b = t[(i, k + 1)];
        t[(i, k)] = a * g11 + b * g21;
        t[(i, k + 1)] = a * g12 + b * g22;
        let a = q[(i, k)];
        let b = q[(i, k + 1)];
        q[(i, k)] = a * g11 + b * g21;
        q[(i, k + 1)] = a * g12 + b * g22;
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
}

/// Reorders a complex Schur form so that every eigenvalue selected by `keep`
/// comes first. Returns the number of selected eigenvalues.
pub fn reorder_schur(q: &mut CMatrix, t: &mut CMatrix, keep: impl Fn(C64) -> bool) -> usize {
    let n = t.nrows();
    let mut placed = 0;
    for j in 0..n {
        if keep(t[(j, j)]) {
            let mut k = j;
            while k > placed {
                swap_schur_pair(q, t, k - 1);
                k -= 1;
            }
            placed += 1;
        }
    }
    placed
}

/// Stabilizing solution of `a† x + x a + x r x + q = 0`.
///
/// `r` and `q` must be Hermitian. The stable invariant subspace of
/// `[[a, r], [-q, -a†]]` is extracted from an ordered Schur basis; the
/// solution makes `a + r x` Hurwitz. `axis_tol` rejects Hamiltonians with
/// eigenvalues this close to the imaginary axis.
pub fn care(a: &CMatrix, r: &CMatrix, q: &CMatrix, axis_tol: f64) -> Result<CMatrix> {
    let n = a.nrows();
    if a.ncols() != n || r.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            what: "care".into(),
            expected: format!("{n}x{n} blocks"),
            got: format!("r {:?}, q {:?}", r.shape(), q.shape()),
        });
    }
    let mut h = CMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(r);
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.adjoint()));

    let (mut u, mut t) = schur(&h)?;
    let scale = max_abs(&h).max(1.0);
    for i in 0..2 * n {
        if t[(i, i)].re.abs() <= axis_tol * scale {
            return Err(Error::Numeric(format!(
                "Hamiltonian eigenvalue {:.3e}{:+.3e}i on the imaginary axis",
                t[(i, i)].re,
                t[(i, i)].im
            )));
        }
    }
    let stable = reorder_schur(&mut u, &mut t, |z| z.re < 0.0);
    if stable != n {
        return Err(Error::Numeric(format!(
            "expected {n} stable Hamiltonian eigenvalues, found {stable}"
        )));
    }
    let u11 = u.view((0, 0), (n, n)).into_owned();
    let u21 = u.view((n, 0), (n, n)).into_owned();
    let sv = u11.clone().svd(false, false).singular_values;
    let smin = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if smin < 1e-12 {
        return Err(Error::Numeric(
            "stable invariant subspace is not a graph (U11 singular)".into(),
        ));
    }
    let u11_inv = u11
        .try_inverse()
        .ok_or_else(|| Error::Numeric("U11 not invertible".into()))?;
    Ok(hermitian_part(&(u21 * u11_inv)))
}

/// Solves `m x = b` by LU; `None` when `m` is numerically singular.
pub fn solve(m: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    m.clone().lu().solve(b)
}
