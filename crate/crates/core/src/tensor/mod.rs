//! Dense real tensors with a tracked log-scale factor.
//!
//! A [`DenseTensor`] stands for `exp(log_scale) * data`. Contractions of
//! long tensor chains drift far outside the floating-point range, so every
//! operation keeps `data` inside a fixed magnitude window and moves the rest
//! into `log_scale`.

pub mod kernels;
mod linalg;

pub use linalg::{qr_matrix, qr_split, svd_matrix, svd_split, QrResult, SvdResult};

use crate::{Error, Result, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    log_scale: T,
}

impl<T: Scalar> DenseTensor<T> {
    /// Builds a tensor from row-major data.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!("zero-length axis in shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite entry at flat index {pos}")));
        }
        Ok(Self {
            shape,
            data,
            log_scale: T::zero(),
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); len],
            log_scale: T::zero(),
        }
    }

    /// Fills a tensor by evaluating `f` at every multi-index, row-major.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self {
            shape,
            data,
            log_scale: T::zero(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(vec![n, n], |i| if i[0] == i[1] { T::one() } else { T::zero() })
    }

    /// A 0-way tensor.
    pub fn scalar(value: T) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
            log_scale: T::zero(),
        }
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>, log_scale: T) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            shape,
            data,
            log_scale,
        }
    }

    pub fn with_log_scale(mut self, log_scale: T) -> Self {
        self.log_scale = log_scale;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[cfg(test)]
    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn log_scale(&self) -> T {
        self.log_scale
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    /// Raw data entry, without the scale factor.
    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.flat_index(idx)]
    }

    /// Represented entry `exp(log_scale) * data[idx]`.
    pub fn value(&self, idx: &[usize]) -> T {
        self.get(idx) * self.log_scale.exp()
    }

    /// All represented entries. Overflows to infinity when the scale
    /// factor is out of range; intended for small tensors and checks.
    pub fn represented(&self) -> Vec<T> {
        let f = self.log_scale.exp();
        self.data.iter().map(|&x| x * f).collect()
    }

    pub fn max_abs(&self) -> T {
        kernels::max_abs(&self.data)
    }

    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.rank())?;
        let shape = perm.iter().map(|&p| self.shape[p]).collect();
        Ok(Self {
            shape,
            data: kernels::permute(&self.data, &self.shape, perm),
            log_scale: self.log_scale,
        })
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Represented values multiplied by `factor` (sign kept in data,
    /// magnitude in the log-scale).
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        if factor == T::zero() {
            out.data.iter_mut().for_each(|x| *x = T::zero());
            return out;
        }
        if factor < T::zero() {
            out.data.iter_mut().for_each(|x| *x = -*x);
        }
        out.log_scale = out.log_scale + factor.abs().ln();
        out
    }

    /// Moves the magnitude into `log_scale` when the data left the
    /// `[RESCALE_LOW, RESCALE_HIGH]` window.
    pub fn rescale(&mut self) {
        let m = self.max_abs();
        if m == T::zero() {
            return;
        }
        if m < T::lit(T::RESCALE_LOW) || m > T::lit(T::RESCALE_HIGH) {
            self.normalize_max();
        }
    }

    /// Unconditionally scales data to unit max-magnitude.
    pub fn normalize_max(&mut self) {
        let l = kernels::normalize_max(&mut self.data);
        self.log_scale = self.log_scale + l;
    }

    /// Multiplies `exp(log_scale)` into the data if the result stays finite
    /// and nonzero; otherwise normalizes data to unit max-magnitude.
    pub fn fold_scale(&mut self) {
        if self.log_scale == T::zero() {
            return;
        }
        let f = self.log_scale.exp();
        let m = self.max_abs();
        let top = m * f;
        if f.is_finite() && f > T::zero() && top.is_finite() && (m == T::zero() || top > T::zero()) {
            self.data.iter_mut().for_each(|x| *x = *x * f);
            self.log_scale = T::zero();
        } else {
            self.normalize_max();
        }
    }

    /// Sets the represented Frobenius norm to one. Zero tensors stay zero.
    pub fn normalize_frobenius(&mut self) {
        let ln = kernels::log_norm(&self.data);
        if ln == T::neg_infinity() {
            self.log_scale = T::zero();
            return;
        }
        let inv = (-ln).exp();
        self.data.iter_mut().for_each(|x| *x = *x * inv);
        self.log_scale = T::zero();
    }

    pub fn all_finite(&self) -> bool {
        self.log_scale.is_finite() && self.data.iter().all(|x| x.is_finite())
    }
}

fn check_permutation(perm: &[usize], rank: usize) -> Result<()> {
    let mut seen = vec![false; rank];
    if perm.len() != rank {
        return Err(Error::Dimension(format!(
            "permutation {perm:?} does not match rank {rank}"
        )));
    }
    for &p in perm {
        if p >= rank || seen[p] {
            return Err(Error::Dimension(format!("invalid permutation {perm:?}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Sums over the paired axes of `a` and `b`.
///
/// The result carries the unpaired axes of `a` followed by those of `b`.
/// Pairing every axis yields a 0-way tensor.
pub fn contract<T: Scalar>(
    a: &DenseTensor<T>,
    b: &DenseTensor<T>,
    axis_pairs: &[(usize, usize)],
) -> Result<DenseTensor<T>> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(i, j) in axis_pairs {
        if i >= a.rank() || j >= b.rank() {
            return Err(Error::Dimension(format!(
                "axis pair ({i}, {j}) out of range for ranks {} and {}",
                a.rank(),
                b.rank()
            )));
        }
        if used_a[i] || used_b[j] {
            return Err(Error::Dimension(format!("axis pair ({i}, {j}) repeats an axis")));
        }
        if a.shape[i] != b.shape[j] {
            return Err(Error::Dimension(format!(
                "axis {i} of length {} paired with axis {j} of length {}",
                a.shape[i], b.shape[j]
            )));
        }
        used_a[i] = true;
        used_b[j] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&j| !used_b[j]).collect();

    let perm_a: Vec<usize> = free_a
        .iter()
        .copied()
        .chain(axis_pairs.iter().map(|p| p.0))
        .collect();
    let perm_b: Vec<usize> = axis_pairs
        .iter()
        .map(|p| p.1)
        .chain(free_b.iter().copied())
        .collect();
    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = axis_pairs.iter().map(|p| a.shape[p.0]).product();
    let n: usize = free_b.iter().map(|&j| b.shape[j]).product();

    let ad = kernels::permute(&a.data, &a.shape, &perm_a);
    let bd = kernels::permute(&b.data, &b.shape, &perm_b);
    let mut out = vec![T::zero(); m * n];
    kernels::matmul(&ad, &bd, &mut out, m, k, n);

    let shape = free_a
        .iter()
        .map(|&i| a.shape[i])
        .chain(free_b.iter().map(|&j| b.shape[j]))
        .collect();
    let mut t = DenseTensor::from_parts(shape, out, a.log_scale + b.log_scale);
    t.rescale();
    Ok(t)
}

/// Log of the represented Frobenius norm; `-inf` for an all-zero tensor.
pub fn frobenius_norm<T: Scalar>(t: &DenseTensor<T>) -> T {
    let l = kernels::log_norm(&t.data);
    if l == T::neg_infinity() {
        l
    } else {
        l + t.log_scale
    }
}
