//! Dense symmetric linear algebra used by the solver.
//!
//! The eigen-solver is the classic two-phase route: Householder reduction to
//! tridiagonal form followed by implicit QL iterations (EISPACK `tred2` /
//! `tql2`). Both phases run over any [`Scalar`].

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Symmetry tolerance for eigen-solver input, relative to `max(1, max|m_ij|)`.
pub const EIGEN_SYMMETRY_TOL: f64 = 1e-8;

/// `count` eigenpairs in ascending eigenvalue order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigenResult<T> {
    pub eigenvalues: Array1<T>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Array2<T>,
}

/// The `count` algebraically smallest eigenpairs of a symmetric matrix.
///
/// The input is symmetrized as `(M + M^T) / 2` first. Each returned
/// eigenvector has its largest-magnitude entry positive (lowest index wins
/// ties), which makes the output deterministic for a given input.
pub fn smallest_eigenpairs<T: Scalar>(m: ArrayView2<'_, T>, count: usize) -> Result<SymEigenResult<T>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!("eigenproblem on {}x{} matrix", n, m.ncols())));
    }
    if count > n {
        return Err(Error::InvalidArgument(format!("requested {count} eigenpairs of a {n}x{n} matrix")));
    }
    let mut scale = T::one();
    for ((i, j), v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row: i, col: j });
        }
        scale = scale.max(v.abs());
    }
    let tol = T::tol(EIGEN_SYMMETRY_TOL) * scale;
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (m[[i, j]] - m[[j, i]]).abs();
            if diff > tol {
                return Err(Error::Asymmetric { row: i, col: j, diff: diff.as_f64() });
            }
        }
    }
    let half = T::lit(0.5);
    let sym = Array2::from_shape_fn((n, n), |(i, j)| (m[[i, j]] + m[[j, i]]) * half);

    let (values, mut vectors) = tridiagonal_eigen(sym)?;
    apply_sign_convention(&mut vectors);
    Ok(SymEigenResult {
        eigenvalues: values.slice(ndarray::s![..count]).to_owned(),
        eigenvectors: vectors.slice(ndarray::s![.., ..count]).to_owned(),
    })
}

/// Full symmetric eigendecomposition, ascending.
pub fn symmetric_eigen<T: Scalar>(m: ArrayView2<'_, T>) -> Result<SymEigenResult<T>> {
    smallest_eigenpairs(m, m.nrows())
}

/// Flips each column so that its largest-magnitude entry is positive.
pub fn apply_sign_convention<T: Scalar>(vectors: &mut Array2<T>) {
    for mut col in vectors.axis_iter_mut(Axis(1)) {
        let max = col.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        if max == T::zero() {
            continue;
        }
        let slack = max * T::epsilon() * T::lit(8.0);
        let pivot = col.iter().position(|v| v.abs() >= max - slack).unwrap_or(0);
        if col[pivot] < T::zero() {
            col.mapv_inplace(|v| -v);
        }
    }
}

fn tridiagonal_eigen<T: Scalar>(a: Array2<T>) -> Result<(Array1<T>, Array2<T>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Array1::zeros(0), a));
    }
    let mut v = a;
    let mut d = Array1::<T>::zeros(n);
    let mut e = Array1::<T>::zeros(n);
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    Ok((d, v))
}

// Householder reduction to tridiagonal form, accumulating the orthogonal
// transform in `v`.
fn tred2<T: Scalar>(v: &mut Array2<T>, d: &mut Array1<T>, e: &mut Array1<T>) {
    let n = v.nrows();
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[[n - 1, j]];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[[i - 1, j]];
                v[[i, j]] = zero;
                v[[j, i]] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = zero;
            }
            for j in 0..i {
                f = d[j];
                v[[j, i]] = f;
                g = e[j] + v[[j, j]] * f;
                for k in (j + 1)..i {
                    g += v[[k, j]] * d[k];
                    e[k] += v[[k, j]] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[[k, j]] -= upd;
                }
                d[j] = v[[i - 1, j]];
                v[[i, j]] = zero;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[[n - 1, i]] = v[[i, i]];
        v[[i, i]] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[[k, i + 1]] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[[k, i + 1]] * v[[k, j]];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[[k, j]] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[[k, i + 1]] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[[n - 1, j]];
        v[[n - 1, j]] = zero;
    }
    v[[n - 1, n - 1]] = T::one();
    e[0] = zero;
}

// Implicit QL on the tridiagonal (d, e), rotating `v` along. Leaves the
// eigenvalues in `d` sorted ascending with matching columns in `v`.
fn tql2<T: Scalar>(v: &mut Array2<T>, d: &mut Array1<T>, e: &mut Array1<T>) -> Result<()> {
    let n = v.nrows();
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    let max_sweeps = 64 * n.max(1);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        let m = m.min(n - 1);
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::Invariant("QL iteration failed to converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in (l + 2)..n {
                    d[i] -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[[k, i + 1]];
                        v[[k, i + 1]] = s * v[[k, i]] + c * h;
                        v[[k, i]] = c * v[[k, i]] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }

    // Selection sort keeps eigenvector columns paired with their values.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in (i + 1)..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in 0..n {
                v.swap([row, i], [row, k]);
            }
        }
    }
    Ok(())
}

/// Sum of Euclidean row norms.
pub fn l21_norm<T: Scalar>(m: ArrayView2<'_, T>) -> T {
    m.rows().into_iter().map(|r| r.dot(&r).sqrt()).sum()
}

pub fn frobenius_norm<T: Scalar>(m: ArrayView2<'_, T>) -> T {
    m.iter().map(|&v| v * v).sum::<T>().sqrt()
}

/// `Tr(F^T L F)`.
pub fn trace_form<T: Scalar>(f: ArrayView2<'_, T>, l: ArrayView2<'_, T>) -> Result<T> {
    let n = f.nrows();
    if l.dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "trace form of {}x{} embedding with {}x{} matrix",
            n,
            f.ncols(),
            l.nrows(),
            l.ncols()
        )));
    }
    let lf = l.dot(&f);
    Ok(f.iter().zip(lf.iter()).map(|(&a, &b)| a * b).sum())
}

/// `max_ij |(F^T F - I)_ij|`.
pub fn orthogonality_error<T: Scalar>(f: ArrayView2<'_, T>) -> T {
    let gram = f.t().dot(&f);
    gram.indexed_iter().fold(T::zero(), |acc, ((i, j), &g)| {
        let target = if i == j { T::one() } else { T::zero() };
        acc.max((g - target).abs())
    })
}
