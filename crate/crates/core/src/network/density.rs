use crate::tensor::kernels;
use crate::{DenseTensor, Scalar};

/// Reduced density on one leg of the doubled network, up to the factor
/// `exp(log)`.
#[derive(Clone, Debug)]
pub enum Density<T> {
    /// Exact identity of the given dimension.
    Identity(usize),
    /// Rank-one `exp(log) · v vᵀ`.
    Pure { v: Vec<T>, log: T },
    /// Symmetric `dim × dim` matrix, row-major.
    Dense { m: Vec<T>, dim: usize, log: T },
}

impl<T: Scalar> Density<T> {
    pub fn dim(&self) -> usize {
        match self {
            Density::Identity(d) => *d,
            Density::Pure { v, .. } => v.len(),
            Density::Dense { dim, .. } => *dim,
        }
    }

    pub fn log(&self) -> T {
        match self {
            Density::Identity(_) => T::zero(),
            Density::Pure { log, .. } | Density::Dense { log, .. } => *log,
        }
    }

    pub(crate) fn basis(v: u8) -> Self {
        let mut e = vec![T::zero(); 2];
        e[v as usize] = T::one();
        Density::Pure { v: e, log: T::zero() }
    }

    /// Diagonal entry `i` including the scale factor; may underflow.
    pub fn diag(&self, i: usize) -> T {
        match self {
            Density::Identity(_) => T::one(),
            Density::Pure { v, log } => v[i] * v[i] * log.exp(),
            Density::Dense { m, dim, log } => m[i * dim + i] * log.exp(),
        }
    }

    /// Diagonal normalized to sum one; `None` if it vanishes.
    pub fn diag_probs(&self) -> Option<Vec<T>> {
        let raw: Vec<T> = match self {
            Density::Identity(d) => vec![T::one(); *d],
            Density::Pure { v, .. } => v.iter().map(|x| *x * *x).collect(),
            Density::Dense { m, dim, .. } => (0..*dim).map(|i| m[i * dim + i].max(T::zero())).collect(),
        };
        let s: T = raw.iter().copied().sum();
        if s > T::zero() && s.is_finite() {
            Some(raw.into_iter().map(|x| x / s).collect())
        } else {
            None
        }
    }
}

/// Result of a doubled contraction: a scalar `exp(log) · value` when no axis
/// is open, or a density on the open axis.
pub(crate) enum Doubled<T> {
    Scalar { value: T, log: T },
    Density(Density<T>),
}

/// Contracts `t ⊗ t` with one density per axis, leaving `open` (if any)
/// free on both copies.
pub(crate) fn doubled_reduce<T: Scalar>(
    t: &DenseTensor<T>,
    dens: &[&Density<T>],
    open: Option<usize>,
) -> Doubled<T> {
    let shape = t.shape();
    debug_assert_eq!(dens.len(), shape.len());
    let mut log = t.log_scale() + t.log_scale();
    let mut ket = t.data().to_vec();
    let mut cur_shape = shape.to_vec();
    let mut open_pos = open;
    // pure axes act on both copies identically
    for a in (0..shape.len()).rev() {
        if Some(a) == open {
            continue;
        }
        if let Density::Pure { v, log: l } = dens[a] {
            ket = kernels::ttv(&ket, &cur_shape, a, v);
            cur_shape.remove(a);
            log = log + *l;
            if let Some(o) = open_pos.as_mut() {
                if *o > a {
                    *o -= 1;
                }
            }
        }
    }
    let bra = ket.clone();
    // dense axes act on the ket only; track their new positions
    let mut pos = 0;
    for (a, d) in dens.iter().enumerate() {
        if Some(a) == open {
            pos += 1;
            continue;
        }
        match d {
            Density::Pure { .. } => {}
            Density::Identity(_) => pos += 1,
            Density::Dense { m, dim, log: l } => {
                ket = kernels::ttm(&ket, &cur_shape, pos, m, *dim);
                log = log + *l;
                pos += 1;
            }
        }
    }
    match open_pos {
        None => Doubled::Scalar {
            value: kernels::dot(&ket, &bra),
            log,
        },
        Some(o) => {
            let d = cur_shape[o];
            let rest = ket.len() / d;
            let perm: Vec<usize> = std::iter::once(o)
                .chain((0..cur_shape.len()).filter(|&i| i != o))
                .collect();
            let k = kernels::permute(&ket, &cur_shape, &perm);
            let b = kernels::permute(&bra, &cur_shape, &perm);
            let mut m = vec![T::zero(); d * d];
            kernels::matmul_nt(&k, &b, &mut m, d, rest, d);
            // exact symmetry
            for i in 0..d {
                for j in i + 1..d {
                    let s = (m[i * d + j] + m[j * d + i]) * T::lit(0.5);
                    m[i * d + j] = s;
                    m[j * d + i] = s;
                }
            }
            log = log + kernels::normalize_max(&mut m);
            Doubled::Density(Density::Dense { m, dim: d, log })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubled_matches_direct_sum() {
        let t = DenseTensor::<f64>::from_fn(vec![2, 3, 2], |i| ((i[0] * 7 + i[1] * 3 + i[2]) as f64 * 0.61).cos())
            .with_log_scale(0.3);
        let rho = Density::Dense {
            m: vec![2.0, 0.5, 0.1, 0.5, 1.0, -0.2, 0.1, -0.2, 0.7],
            dim: 3,
            log: -0.4,
        };
        let pure = Density::Pure { v: vec![0.6, -1.1], log: 0.2 };
        let id = Density::Identity(2);
        let out = doubled_reduce(&t, &[&pure, &rho, &id], None);
        let Doubled::Scalar { value, log } = out else { panic!() };
        let got = value * log.exp();
        let (pv, rm) = ([0.6, -1.1], [2.0, 0.5, 0.1, 0.5, 1.0, -0.2, 0.1, -0.2, 0.7]);
        let mut want = 0.0;
        for a in 0..2 {
            for a2 in 0..2 {
                for b in 0..3 {
                    for b2 in 0..3 {
                        for c in 0..2 {
                            want += t.value(&[a, b, c]) * t.value(&[a2, b2, c]) * pv[a] * pv[a2] * rm[b * 3 + b2];
                        }
                    }
                }
            }
        }
        want *= (0.2f64 - 0.4).exp();
        assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));

        let Doubled::Density(Density::Dense { m, dim, log }) = doubled_reduce(&t, &[&pure, &rho, &id], Some(2))
        else {
            panic!()
        };
        assert_eq!(dim, 2);
        let trace = (m[0] + m[3]) * log.exp();
        assert!((trace - want).abs() < 1e-12 * want.abs().max(1.0));
    }
}
