//! Exact ancestral sampling.
//!
//! With the center at node 0, every subtree hanging below a node contracts
//! to the identity in the doubled network. Descending from the root, the
//! density on a node's open leg therefore only involves its parent-side
//! density, the pure states of the already sampled branches, and identities
//! for branches not yet visited. Pixels come out in the order of a
//! depth-first traversal, which is pixel order for both topologies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::network::{doubled_reduce, reduce, Density, Doubled, Leg, NodeId, TreeNetwork};
use crate::tensor::kernels;
use crate::{BornModel, Error, Result, Scalar};

/// One drawn configuration together with the conditional probability of
/// every pixel at the moment it was drawn.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTrace<T> {
    pub sample: Vec<u8>,
    /// Pixels in the order they were drawn.
    pub order: Vec<usize>,
    /// `p(x_order[i] | earlier pixels)` for the drawn value.
    pub conditionals: Vec<T>,
}

impl<T: Scalar> SampleTrace<T> {
    /// `Σ ln p(x_k | earlier)`, which equals `ln p(x)`.
    pub fn log_prob(&self) -> T {
        self.conditionals.iter().map(|p| p.ln()).sum()
    }
}

/// Generator for sample `index` of a run seeded with `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw<T: Scalar>(p0: T, rng: &mut ChaCha8Rng) -> u8 {
    let u: f64 = rng.gen();
    if T::lit(u) < p0 {
        0
    } else {
        1
    }
}

/// A model in root-centered canonical form, ready for repeated sampling.
pub struct Sampler<T> {
    net: TreeNetwork<T>,
}

impl<T: Scalar> Sampler<T> {
    pub fn new(model: &BornModel<T>) -> Result<Self> {
        let mut net = model.network().clone();
        if net.center() != Some(0) {
            net.canonicalize(0)?;
        }
        if net.log_partition()? == T::neg_infinity() {
            return Err(Error::DegenerateDistribution("model has zero norm".into()));
        }
        Ok(Self { net })
    }

    pub fn n_pixels(&self) -> usize {
        self.net.n_pixels()
    }

    pub fn sample_traced(&self, rng: &mut ChaCha8Rng) -> Result<SampleTrace<T>> {
        let n = self.net.n_pixels();
        let mut trace = SampleTrace {
            sample: vec![0; n],
            order: Vec::with_capacity(n),
            conditionals: Vec::with_capacity(n),
        };
        self.descend(0, None, Density::Identity(1), &mut trace, rng)?;
        Ok(trace)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Vec<u8>> {
        Ok(self.sample_traced(rng)?.sample)
    }

    fn descend(
        &self,
        u: NodeId,
        parent_axis: Option<usize>,
        parent_rho: Density<T>,
        trace: &mut SampleTrace<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<T>> {
        let t = self.net.tensor(u);
        let legs = self.net.legs(u);
        let mut known: Vec<Density<T>> = legs
            .iter()
            .enumerate()
            .map(|(a, l)| match l {
                Leg::Unit => Density::Pure {
                    v: vec![T::one()],
                    log: T::zero(),
                },
                _ if Some(a) == parent_axis => Density::Identity(0),
                _ => Density::Identity(t.shape()[a]),
            })
            .collect();
        if let Some(pa) = parent_axis {
            known[pa] = parent_rho;
        }
        for a in 0..legs.len() {
            if Some(a) == parent_axis || legs[a] == Leg::Unit {
                continue;
            }
            let rho = {
                let refs: Vec<&Density<T>> = known.iter().collect();
                match doubled_reduce(t, &refs, Some(a)) {
                    Doubled::Density(d) => d,
                    Doubled::Scalar { .. } => unreachable!(),
                }
            };
            match legs[a] {
                Leg::Phys(p) => {
                    let probs = rho.diag_probs().ok_or_else(|| {
                        Error::DegenerateDistribution(format!("conditional of pixel {p} has zero mass"))
                    })?;
                    let v = draw(probs[0], rng);
                    trace.sample[p] = v;
                    trace.order.push(p);
                    trace.conditionals.push(probs[v as usize]);
                    known[a] = Density::basis(v);
                }
                Leg::Bond(w) => {
                    let back = self.net.axis_to(w, u).expect("adjacent");
                    let psi = self.descend(w, Some(back), rho, trace, rng)?;
                    known[a] = Density::Pure { v: psi, log: T::zero() };
                }
                Leg::Unit => unreachable!(),
            }
        }
        let vecs: Vec<Option<&[T]>> = known
            .iter()
            .enumerate()
            .map(|(a, d)| match d {
                _ if Some(a) == parent_axis => None,
                Density::Pure { v, .. } => Some(v.as_slice()),
                _ => unreachable!("every child axis is pure once sampled"),
            })
            .collect();
        let mut out = reduce::reduce(t.data(), t.shape(), &vecs);
        kernels::normalize_max(&mut out);
        Ok(out)
    }
}

/// Draws sample `index` of the run seeded with `seed`.
pub fn sample_one<T: Scalar>(model: &BornModel<T>, seed: u64, index: u64) -> Result<Vec<u8>> {
    Sampler::new(model)?.sample(&mut stream(seed, index))
}

/// Draws `count` samples; sample `i` uses stream `(seed, i)`, so the result
/// does not depend on how the work is scheduled.
pub fn sample_batch<T: Scalar>(model: &BornModel<T>, count: usize, seed: u64) -> Result<Vec<Vec<u8>>> {
    if count == 0 {
        return Err(Error::Argument("sample count must be at least 1".into()));
    }
    let sampler = Sampler::new(model)?;
    (0..count as u64)
        .into_par_iter()
        .map(|i| sampler.sample(&mut stream(seed, i)))
        .collect()
}

/// Sampling in an arbitrary pixel order, one clamped marginal per step.
pub fn sample_in_order<T: Scalar>(
    model: &BornModel<T>,
    order: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<SampleTrace<T>> {
    let n = model.n_pixels();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::Argument("order must be a permutation of the pixels".into()));
    }
    let mut fixed = Vec::with_capacity(n);
    let mut trace = SampleTrace {
        sample: vec![0; n],
        order: order.to_vec(),
        conditionals: Vec::with_capacity(n),
    };
    for &p in order {
        let m = model.marginal(&fixed, p)?;
        let v = draw(m[0], rng);
        trace.sample[p] = v;
        trace.conditionals.push(m[v as usize]);
        fixed.push((p, v));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests;
