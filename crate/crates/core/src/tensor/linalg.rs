//! Matricized QR and truncated SVD.
//!
//! QR is Householder with the diagonal of `R` forced non-negative. The SVD
//! is one-sided Jacobi (Hestenes) on the tall orientation, preceded by a QR
//! step when the matrix is strictly tall; it gives singular vectors that are
//! orthonormal to working precision even for tiny singular values.

use super::kernels::{dot, permute};
use super::DenseTensor;
use crate::{Error, Result, Scalar};

#[derive(Clone, Debug)]
pub struct QrResult<T> {
    /// Shape `(row axes..., k)`, orthonormal columns.
    pub q: DenseTensor<T>,
    /// Shape `(k, col axes...)`, upper triangular with non-negative
    /// diagonal; carries the input's log-scale.
    pub r: DenseTensor<T>,
}

#[derive(Clone, Debug)]
pub struct SvdResult<T> {
    /// Shape `(row axes..., k)`, orthonormal columns.
    pub u: DenseTensor<T>,
    /// Kept singular values in data units, descending.
    pub s: Vec<T>,
    /// Shape `(k, col axes...)`, orthonormal rows; carries the input's
    /// log-scale so that `u · diag(s) · v` reproduces the represented input.
    pub v: DenseTensor<T>,
    /// Discarded squared weight over total squared weight.
    pub truncation_error: T,
}

/// Thin Householder QR of a row-major `m × n` matrix.
///
/// Returns `(q, r, k)` with `q` row-major `m × k`, `r` row-major `k × n`,
/// `k = min(m, n)` and `diag(r) ≥ 0`.
pub fn qr_matrix<T: Scalar>(a: &[T], m: usize, n: usize) -> (Vec<T>, Vec<T>, usize) {
    let k = m.min(n);
    // column-major working copy
    let mut w = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            w[j * m + i] = a[i * n + j];
        }
    }
    let mut vs: Vec<Vec<T>> = Vec::with_capacity(k);
    let mut taus = Vec::with_capacity(k);
    for j in 0..k {
        let col = &w[j * m + j..(j + 1) * m];
        let scale = col.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        if scale == T::zero() {
            vs.push(col.to_vec());
            taus.push(T::zero());
            continue;
        }
        // reflector built from the column scaled to unit max-magnitude so
        // that squared entries neither underflow nor overflow
        let mut v: Vec<T> = col.iter().map(|&x| x / scale).collect();
        let norm = dot(&v, &v).sqrt();
        let alpha = if v[0] > T::zero() { -norm } else { norm };
        v[0] = v[0] - alpha;
        let vn = dot(&v, &v);
        let tau = if vn == T::zero() { T::zero() } else { T::lit(2.0) / vn };
        if tau != T::zero() {
            for c in j..n {
                let cc = &mut w[c * m + j..(c + 1) * m];
                let f = tau * dot(&v, cc);
                for (x, &vi) in cc.iter_mut().zip(&v) {
                    *x = *x - f * vi;
                }
            }
        }
        vs.push(v);
        taus.push(tau);
    }
    let mut r = vec![T::zero(); k * n];
    for i in 0..k {
        for j in i..n {
            r[i * n + j] = w[j * m + i];
        }
    }
    // Q = H_0 ... H_{k-1} applied to the first k columns of the identity
    let mut qc = vec![T::zero(); m * k];
    for i in 0..k {
        qc[i * m + i] = T::one();
    }
    for j in (0..k).rev() {
        let tau = taus[j];
        if tau == T::zero() {
            continue;
        }
        let v = &vs[j];
        for c in 0..k {
            let cc = &mut qc[c * m + j..(c + 1) * m];
            let f = tau * dot(v, cc);
            for (x, &vi) in cc.iter_mut().zip(v) {
                *x = *x - f * vi;
            }
        }
    }
    for i in 0..k {
        if r[i * n + i] < T::zero() {
            for j in i..n {
                r[i * n + j] = -r[i * n + j];
            }
            for x in &mut qc[i * m..(i + 1) * m] {
                *x = -*x;
            }
        }
    }
    let mut q = vec![T::zero(); m * k];
    for i in 0..m {
        for c in 0..k {
            q[i * k + c] = qc[c * m + i];
        }
    }
    (q, r, k)
}

/// Full thin SVD of a row-major `m × n` matrix.
///
/// Returns `(u, s, vt)` with `u` row-major `m × r`, `s` descending of length
/// `r = min(m, n)`, `vt` row-major `r × n`. Equal singular values keep
/// their original column order.
pub fn svd_matrix<T: Scalar>(a: &[T], m: usize, n: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    if m < n {
        let mut at = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                at[j * m + i] = a[i * n + j];
            }
        }
        let (u2, s, vt2) = svd_matrix(&at, n, m);
        // a = (u2 s vt2)ᵀ = vt2ᵀ s u2ᵀ
        let r = s.len();
        let mut u = vec![T::zero(); m * r];
        for i in 0..m {
            for c in 0..r {
                u[i * r + c] = vt2[c * m + i];
            }
        }
        let mut vt = vec![T::zero(); r * n];
        for c in 0..r {
            for j in 0..n {
                vt[c * n + j] = u2[j * r + c];
            }
        }
        return (u, s, vt);
    }
    if m > n {
        let (q, rmat, k) = qr_matrix(a, m, n);
        let (ur, s, vt) = svd_matrix(&rmat, k, n);
        let mut u = vec![T::zero(); m * n];
        super::kernels::matmul(&q, &ur, &mut u, m, k, n);
        return (u, s, vt);
    }
    jacobi_square(a, n)
}

fn jacobi_square<T: Scalar>(a: &[T], n: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    // columns of the working matrix and of V, each stored contiguously
    let mut w = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            w[j * n + i] = a[i * n + j];
        }
    }
    let mut v = vec![T::zero(); n * n];
    for j in 0..n {
        v[j * n + j] = T::one();
    }
    let eps = T::epsilon();
    let mut norms: Vec<T> = (0..n).map(|j| dot(&w[j * n..(j + 1) * n], &w[j * n..(j + 1) * n])).collect();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                let (wp, wq) = two_cols(&mut w, n, p, q);
                let gamma = dot(wp, wq);
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(wp, wq, c, s);
                let (vp, vq) = two_cols(&mut v, n, p, q);
                rotate(vp, vq, c, s);
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;
            }
        }
        for (j, nj) in norms.iter_mut().enumerate() {
            let col = &w[j * n..(j + 1) * n];
            *nj = dot(col, col);
        }
        if !rotated {
            break;
        }
    }
    let sig: Vec<T> = norms.iter().map(|x| x.sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sig[y].partial_cmp(&sig[x]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u_cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let tiny = T::min_positive_value() * T::lit(1e10);
    let mut null_slots = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let col = &w[j * n..(j + 1) * n];
        let sj = sig[j];
        s.push(sj);
        if sj > tiny {
            let inv = T::one() / sj;
            u_cols.push(col.iter().map(|&x| x * inv).collect());
        } else {
            u_cols.push(vec![T::zero(); n]);
            null_slots.push(slot);
        }
    }
    complete_basis(&mut u_cols, &null_slots, n);

    let mut u = vec![T::zero(); n * n];
    let mut vt = vec![T::zero(); n * n];
    for (slot, &j) in order.iter().enumerate() {
        for i in 0..n {
            u[i * n + slot] = u_cols[slot][i];
            vt[slot * n + i] = v[j * n + i];
        }
    }
    (u, s, vt)
}

fn two_cols<T>(buf: &mut [T], n: usize, p: usize, q: usize) -> (&mut [T], &mut [T]) {
    debug_assert!(p < q);
    let (lo, hi) = buf.split_at_mut(q * n);
    (&mut lo[p * n..(p + 1) * n], &mut hi[..n])
}

#[inline]
fn rotate<T: Scalar>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let xa = *a;
        let yb = *b;
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills the listed slots with unit vectors orthogonal to every other
/// column, using Gram-Schmidt on the standard basis.
fn complete_basis<T: Scalar>(cols: &mut [Vec<T>], slots: &[usize], n: usize) {
    let mut candidate = 0usize;
    for &slot in slots {
        loop {
            if candidate >= n {
                return;
            }
            let mut e = vec![T::zero(); n];
            e[candidate] = T::one();
            candidate += 1;
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot || c.iter().all(|&x| x == T::zero()) {
                        continue;
                    }
                    let f = dot(&e, c);
                    for (x, &ci) in e.iter_mut().zip(c) {
                        *x = *x - f * ci;
                    }
                }
            }
            let nrm = dot(&e, &e).sqrt();
            if nrm > T::lit(1e-3) {
                cols[slot] = e.iter().map(|&x| x / nrm).collect();
                break;
            }
        }
    }
}

/// Row-major matrix view of `t` with `row_axes` as rows, plus the two
/// dimension lists.
fn matricize<T: Scalar>(
    t: &DenseTensor<T>,
    row_axes: &[usize],
    col_axes: &[usize],
) -> Result<(Vec<T>, Vec<usize>, Vec<usize>)> {
    let rank = t.rank();
    let mut seen = vec![false; rank];
    for &a in row_axes.iter().chain(col_axes) {
        if a >= rank || seen[a] {
            return Err(Error::Dimension(format!(
                "axes {row_axes:?} | {col_axes:?} are not a partition of {rank} axes"
            )));
        }
        seen[a] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Dimension(format!(
            "axes {row_axes:?} | {col_axes:?} do not cover all {rank} axes"
        )));
    }
    let perm: Vec<usize> = row_axes.iter().chain(col_axes).copied().collect();
    let rows = row_axes.iter().map(|&a| t.shape()[a]).collect();
    let cols = col_axes.iter().map(|&a| t.shape()[a]).collect();
    Ok((permute(t.data(), t.shape(), &perm), rows, cols))
}

/// QR of `t` matricized as `row_axes × col_axes`.
pub fn qr_split<T: Scalar>(
    t: &DenseTensor<T>,
    row_axes: &[usize],
    col_axes: &[usize],
) -> Result<QrResult<T>> {
    let (mat, rows, cols) = matricize(t, row_axes, col_axes)?;
    let m: usize = rows.iter().product();
    let n: usize = cols.iter().product();
    let (q, r, k) = qr_matrix(&mat, m, n);
    let mut qshape = rows;
    qshape.push(k);
    let mut rshape = vec![k];
    rshape.extend(cols);
    Ok(QrResult {
        q: DenseTensor::from_parts(qshape, q, T::zero()),
        r: DenseTensor::from_parts(rshape, r, t.log_scale()),
    })
}

/// Truncated SVD of `t` matricized as `row_axes × col_axes`.
///
/// Keeps `min(d_max, #{σᵢ² / Σσ² > cutoff}, full rank)` singular values,
/// never fewer than one.
pub fn svd_split<T: Scalar>(
    t: &DenseTensor<T>,
    row_axes: &[usize],
    col_axes: &[usize],
    d_max: usize,
    cutoff: T,
) -> Result<SvdResult<T>> {
    if d_max == 0 {
        return Err(Error::Argument("d_max must be at least 1".into()));
    }
    let (mat, rows, cols) = matricize(t, row_axes, col_axes)?;
    let m: usize = rows.iter().product();
    let n: usize = cols.iter().product();
    let (u, s, vt) = svd_matrix(&mat, m, n);
    let full = s.len();
    let total: T = s.iter().map(|&x| x * x).sum();

    let (keep, trunc) = if total == T::zero() {
        (1, T::zero())
    } else {
        let above = s.iter().filter(|&&x| x * x / total > cutoff).count();
        let keep = d_max.min(above).min(full).max(1);
        let dropped: T = s[keep..].iter().map(|&x| x * x).sum();
        (keep, (dropped / total).min(T::one()).max(T::zero()))
    };

    let mut ud = Vec::with_capacity(m * keep);
    for i in 0..m {
        ud.extend_from_slice(&u[i * full..i * full + keep]);
    }
    let vd = vt[..keep * n].to_vec();
    let mut ushape = rows;
    ushape.push(keep);
    let mut vshape = vec![keep];
    vshape.extend(cols);
    Ok(SvdResult {
        u: DenseTensor::from_parts(ushape, ud, T::zero()),
        s: s[..keep].to_vec(),
        v: DenseTensor::from_parts(vshape, vd, t.log_scale()),
        truncation_error: trunc,
    })
}
