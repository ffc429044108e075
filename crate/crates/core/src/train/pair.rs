//! Two-site update kept in factored form.
//!
//! With the pair written as `M = A·B` (`A` is `m × d`, `B` is `d × n`) and
//! each sample environment as an outer product `a_s b_sᵀ`, a gradient step
//! gives `M' = c·A·B + Σ_s κ_s a_s b_sᵀ`, a matrix of rank at most
//! `d + |batch|`. Its truncated SVD comes from two thin QRs and the SVD of a
//! small core, and the batch likelihood of any step size only needs
//! `|batch| × |batch|` Gram matrices.

use crate::network::{place_first_axis, place_last_axis, NodeId, TreeNetwork};
use crate::tensor::{kernels, qr_matrix, svd_split};
use crate::{DenseTensor, Error, Result, Scalar};

use super::TrainConfig;

pub(super) struct FactoredPair<T> {
    a_shape: Vec<usize>,
    b_shape: Vec<usize>,
    m: usize,
    d: usize,
    n: usize,
    /// `m × d`, row-major.
    a_mat: Vec<T>,
    /// `d × n`, row-major.
    b_mat: Vec<T>,
    /// Per-sample left and right environments, `m` and `n` long.
    left: Vec<Vec<T>>,
    right: Vec<Vec<T>>,
}

fn outer<T: Scalar>(vecs: &[Vec<T>]) -> Vec<T> {
    let mut buf = vec![T::one()];
    for v in vecs {
        let mut next = Vec::with_capacity(buf.len() * v.len());
        for &b in &buf {
            next.extend(v.iter().map(|&x| b * x));
        }
        buf = next;
    }
    buf
}

impl<T: Scalar> FactoredPair<T> {
    /// `envs[s]` lists the environment vectors of the pair's open axes:
    /// first those of `a` (in axis order, bond excluded), then those of `b`.
    pub fn new(net: &TreeNetwork<T>, a: NodeId, b: NodeId, envs: &[Vec<Vec<T>>], normalize: bool) -> Result<Self> {
        let ab = net.axis_to(a, b).expect("adjacent");
        let ba = net.axis_to(b, a).expect("adjacent");
        let ta = net.tensor(a);
        let tb = net.tensor(b);
        let ra = ta.rank() - 1;
        let a_perm: Vec<usize> = (0..ta.rank()).filter(|&i| i != ab).chain([ab]).collect();
        let b_perm: Vec<usize> = std::iter::once(ba).chain((0..tb.rank()).filter(|&i| i != ba)).collect();
        let a_shape: Vec<usize> = a_perm[..ra].iter().map(|&i| ta.shape()[i]).collect();
        let b_shape: Vec<usize> = b_perm[1..].iter().map(|&i| tb.shape()[i]).collect();
        let d = ta.shape()[ab];
        let m: usize = a_shape.iter().product();
        let n: usize = b_shape.iter().product();
        let mut a_mat = kernels::permute(ta.data(), ta.shape(), &a_perm);
        let b_mat = kernels::permute(tb.data(), tb.shape(), &b_perm);
        let mut pair = Self {
            a_shape,
            b_shape,
            m,
            d,
            n,
            a_mat: Vec::new(),
            b_mat,
            left: envs.iter().map(|e| outer(&e[..ra])).collect(),
            right: envs.iter().map(|e| outer(&e[ra..])).collect(),
        };
        let scale = if normalize {
            pair.a_mat = a_mat.clone();
            let ln = pair.log_norm();
            if ln == T::neg_infinity() {
                T::one()
            } else {
                (-ln).exp()
            }
        } else {
            (ta.log_scale() + tb.log_scale()).exp()
        };
        a_mat.iter_mut().for_each(|x| *x = *x * scale);
        if a_mat.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("merged pair magnitude outside the floating-point range".into()));
        }
        pair.a_mat = a_mat;
        Ok(pair)
    }

    /// `ln ‖A·B‖` from `tr(AᵀA · B·Bᵀ)`.
    fn log_norm(&self) -> T {
        let (m, d, n) = (self.m, self.d, self.n);
        let mut at = vec![T::zero(); d * m];
        for i in 0..m {
            for j in 0..d {
                at[j * m + i] = self.a_mat[i * d + j];
            }
        }
        let mut ga = vec![T::zero(); d * d];
        kernels::matmul_nt(&at, &at, &mut ga, d, m, d);
        let mut gb = vec![T::zero(); d * d];
        kernels::matmul_nt(&self.b_mat, &self.b_mat, &mut gb, d, n, d);
        let t: T = ga.iter().zip(&gb).map(|(x, y)| *x * *y).sum();
        if t > T::zero() {
            t.ln() * T::lit(0.5)
        } else {
            T::neg_infinity()
        }
    }

    /// The dense candidate `c·A·B + Σ κ_s a_s b_sᵀ`, axes as in
    /// [`super::MergedPair`].
    #[cfg(test)]
    pub fn dense(&self, step: &Step<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.m * self.n];
        kernels::matmul(&self.a_mat, &self.b_mat, &mut out, self.m, self.d, self.n);
        out.iter_mut().for_each(|x| *x = *x * step.c);
        for (s, &k) in step.kappa.iter().enumerate() {
            for i in 0..self.m {
                for j in 0..self.n {
                    out[i * self.n + j] = out[i * self.n + j] + k * self.left[s][i] * self.right[s][j];
                }
            }
        }
        out
    }
}

/// Coefficients of a candidate step `M' = c·M + Σ κ_s a_s b_sᵀ`.
pub(super) struct Step<T> {
    c: T,
    kappa: Vec<T>,
}

pub(super) struct Line<T> {
    psi: Vec<T>,
    norm2: T,
    ga: Vec<T>,
    gb: Vec<T>,
    pub floored: usize,
}

impl<T: Scalar> Line<T> {
    /// Amplitudes `ψ_s = a_sᵀ M b_s`, `‖M‖²` and the environment Grams.
    pub fn new(p: &FactoredPair<T>, strict: bool) -> Result<Self> {
        let bsz = p.left.len();
        let mut psi = Vec::with_capacity(bsz);
        let mut floored = 0;
        for s in 0..bsz {
            let mut u = vec![T::zero(); p.d];
            kernels::matmul(&p.left[s], &p.a_mat, &mut u, 1, p.m, p.d);
            let mut w = vec![T::zero(); p.d];
            kernels::matmul_nt(&p.b_mat, &p.right[s], &mut w, p.d, p.n, 1);
            let v = kernels::dot(&u, &w);
            if v == T::zero() {
                if strict {
                    return Err(Error::DegenerateSample { index: s });
                }
                floored += 1;
                psi.push(T::lit(-300.0).exp());
            } else {
                psi.push(v);
            }
        }
        let ln = p.log_norm();
        let norm2 = (ln + ln).exp();
        if norm2 == T::zero() {
            return Err(Error::Numeric("gradient of a zero tensor".into()));
        }
        let mut ga = vec![T::zero(); bsz * bsz];
        let mut gb = vec![T::zero(); bsz * bsz];
        for s in 0..bsz {
            for t in 0..bsz {
                ga[s * bsz + t] = kernels::dot(&p.left[s], &p.left[t]);
                gb[s * bsz + t] = kernels::dot(&p.right[s], &p.right[t]);
            }
        }
        Ok(Self {
            psi,
            norm2,
            ga,
            gb,
            floored,
        })
    }

    /// Gradient step of size `alpha`: `M − α(2M/‖M‖² − (2/B) Σ a_s b_sᵀ/ψ_s)`.
    pub fn step(&self, alpha: T) -> Step<T> {
        let two = T::lit(2.0);
        let bsz = T::lit(self.psi.len() as f64);
        Step {
            c: T::one() - two * alpha / self.norm2,
            kappa: self.psi.iter().map(|&p| two * alpha / (bsz * p)).collect(),
        }
    }

    /// Batch NLL up to a constant for the candidate `step`.
    pub fn loss(&self, step: &Step<T>) -> T {
        let bsz = self.psi.len();
        let kappa: Vec<T> = (0..bsz).map(|s| step.kappa.get(s).copied().unwrap_or_else(T::zero)).collect();
        let mut norm2 = step.c * step.c * self.norm2;
        let mut acc = T::zero();
        for s in 0..bsz {
            let mut v = step.c * self.psi[s];
            for t in 0..bsz {
                let g = self.ga[s * bsz + t] * self.gb[s * bsz + t];
                v = v + kappa[t] * g;
                norm2 = norm2 + kappa[s] * kappa[t] * g;
            }
            norm2 = norm2 + T::lit(2.0) * step.c * kappa[s] * self.psi[s];
            if v == T::zero() {
                return T::infinity();
            }
            acc = acc + v.abs().ln();
        }
        if !(norm2 > T::zero()) {
            return T::infinity();
        }
        let b = T::lit(bsz as f64);
        -(acc + acc) / b + norm2.ln()
    }

    pub fn identity() -> Step<T> {
        Step {
            c: T::one(),
            kappa: Vec::new(),
        }
    }
}

/// Writes `M'` back as two tensors via a truncated SVD, singular values on
/// `b`. Returns `(t_a, t_b, truncation error)`.
pub(super) fn split<T: Scalar>(
    net: &TreeNetwork<T>,
    a: NodeId,
    b: NodeId,
    p: &FactoredPair<T>,
    step: &Step<T>,
    config: &TrainConfig,
) -> Result<(DenseTensor<T>, DenseTensor<T>, T)> {
    let (m, d, n) = (p.m, p.d, p.n);
    let extra: Vec<usize> = (0..step.kappa.len()).filter(|&s| step.kappa[s] != T::zero()).collect();
    let k = d + extra.len();
    let mut x = vec![T::zero(); m * k];
    let mut y = vec![T::zero(); n * k];
    for i in 0..m {
        for j in 0..d {
            x[i * k + j] = step.c * p.a_mat[i * d + j];
        }
        for (e, &s) in extra.iter().enumerate() {
            x[i * k + d + e] = step.kappa[s] * p.left[s][i];
        }
    }
    for i in 0..n {
        for j in 0..d {
            y[i * k + j] = p.b_mat[j * n + i];
        }
        for (e, &s) in extra.iter().enumerate() {
            y[i * k + d + e] = p.right[s][i];
        }
    }
    let log_x = kernels::normalize_max(&mut x);
    let (qx, rx, kx) = qr_matrix(&x, m, k);
    let (qy, ry, ky) = qr_matrix(&y, n, k);
    let mut core = vec![T::zero(); kx * ky];
    kernels::matmul_nt(&rx, &ry, &mut core, kx, k, ky);
    let core = DenseTensor::from_parts(vec![kx, ky], core, T::zero());
    let svd = svd_split(&core, &[0], &[1], config.d_max, T::lit(config.svd_cutoff))?;
    let keep = svd.s.len();
    let mut u = vec![T::zero(); m * keep];
    kernels::matmul(&qx, svd.u.data(), &mut u, m, kx, keep);
    let mut vt = vec![T::zero(); keep * n];
    kernels::matmul_nt(svd.v.data(), &qy, &mut vt, keep, ky, n);
    for (r, s) in svd.s.iter().enumerate() {
        vt[r * n..(r + 1) * n].iter_mut().for_each(|x| *x = *x * *s);
    }
    let mut ua = p.a_shape.clone();
    ua.push(keep);
    let mut vb = vec![keep];
    vb.extend(&p.b_shape);
    let ab = net.axis_to(a, b).expect("adjacent");
    let ba = net.axis_to(b, a).expect("adjacent");
    let ta = place_last_axis(DenseTensor::from_parts(ua, u, T::zero()), ab)?;
    let mut tb = place_first_axis(DenseTensor::from_parts(vb, vt, log_x), ba)?;
    if config.renormalize_center {
        tb.normalize_frobenius();
    } else {
        tb.rescale();
    }
    Ok((ta, tb, svd.truncation_error))
}
