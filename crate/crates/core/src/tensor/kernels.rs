//! Flat row-major kernels underneath [`DenseTensor`](super::DenseTensor).
//!
//! Everything here works on plain slices plus a shape, so the per-sample
//! message passing in the network code can call them without wrapping
//! every vector in a tensor.

use crate::Scalar;

/// Row-major strides for `shape`.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut out = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * shape[k + 1];
    }
    out
}

/// `out[m×n] = a[m×k] · b[k×n]`, all row-major. `out` is overwritten.
pub fn matmul<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.iter_mut().for_each(|x| *x = T::zero());
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (l, &ail) in a[i * k..(i + 1) * k].iter().enumerate() {
            if ail == T::zero() {
                continue;
            }
            let brow = &b[l * n..(l + 1) * n];
            for (o, &blj) in row.iter_mut().zip(brow) {
                *o = *o + ail * blj;
            }
        }
    }
}

/// `out[m×n] = a[m×k] · b[n×k]ᵀ`, the form used for Gram-type products.
pub fn matmul_nt<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] = dot(ar, &b[j * k..(j + 1) * k]);
        }
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Permutes axes: output axis `k` is input axis `perm[k]`.
pub fn permute<T: Scalar>(data: &[T], shape: &[usize], perm: &[usize]) -> Vec<T> {
    if perm.iter().enumerate().all(|(k, &p)| k == p) {
        return data.to_vec();
    }
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut out = Vec::with_capacity(data.len());
    if data.is_empty() {
        return out;
    }
    let rank = out_shape.len();
    let mut idx = vec![0usize; rank];
    let mut offset = 0usize;
    loop {
        out.push(data[offset]);
        // odometer increment over the output index
        let mut k = rank;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            offset += src_strides[k];
            if idx[k] < out_shape[k] {
                break;
            }
            offset -= src_strides[k] * out_shape[k];
            idx[k] = 0;
        }
    }
}

/// Contracts `axis` of a tensor with vector `v`, removing the axis.
pub fn ttv<T: Scalar>(data: &[T], shape: &[usize], axis: usize, v: &[T]) -> Vec<T> {
    let d = shape[axis];
    debug_assert_eq!(v.len(), d);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![T::zero(); outer * inner];
    for a in 0..outer {
        let dst = &mut out[a * inner..(a + 1) * inner];
        let base = a * d * inner;
        for (j, &vj) in v.iter().enumerate() {
            if vj == T::zero() {
                continue;
            }
            let src = &data[base + j * inner..base + (j + 1) * inner];
            for (o, &s) in dst.iter_mut().zip(src) {
                *o = *o + vj * s;
            }
        }
    }
    out
}

/// Applies a `d × d2` matrix along `axis`: `out[.., j2, ..] = Σ_j t[.., j, ..] m[j, j2]`.
pub fn ttm<T: Scalar>(data: &[T], shape: &[usize], axis: usize, m: &[T], d2: usize) -> Vec<T> {
    let d = shape[axis];
    debug_assert_eq!(m.len(), d * d2);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![T::zero(); outer * d2 * inner];
    for a in 0..outer {
        let src_base = a * d * inner;
        let dst_base = a * d2 * inner;
        for j in 0..d {
            let src = &data[src_base + j * inner..src_base + (j + 1) * inner];
            for j2 in 0..d2 {
                let w = m[j * d2 + j2];
                if w == T::zero() {
                    continue;
                }
                let dst = &mut out[dst_base + j2 * inner..dst_base + (j2 + 1) * inner];
                for (o, &s) in dst.iter_mut().zip(src) {
                    *o = *o + w * s;
                }
            }
        }
    }
    out
}

/// Largest absolute value, zero for an empty slice.
#[inline]
pub fn max_abs<T: Scalar>(data: &[T]) -> T {
    data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Scales `data` to unit max-magnitude and returns the log of the factor
/// removed. All-zero data is left alone and reports zero.
pub fn normalize_max<T: Scalar>(data: &mut [T]) -> T {
    let m = max_abs(data);
    if m == T::zero() || !m.is_finite() {
        return T::zero();
    }
    let inv = T::one() / m;
    data.iter_mut().for_each(|x| *x = *x * inv);
    m.ln()
}

/// Overflow-safe log of the Euclidean norm; `-inf` for all-zero data.
pub fn log_norm<T: Scalar>(data: &[T]) -> T {
    let m = max_abs(data);
    if m == T::zero() {
        return T::neg_infinity();
    }
    let inv = T::one() / m;
    let ss: T = data.iter().map(|&x| (x * inv) * (x * inv)).sum();
    m.ln() + ss.ln() * T::lit(0.5)
}
