//! Born machines on the two supported topologies.

use std::ops::Deref;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network::{Leg, NodeId, TreeNetwork};
use crate::{mps, ttn, DenseTensor, Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Balanced binary tree in heap order.
    Ttn,
    /// Open-boundary chain.
    Mps,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ttn => "ttn",
            ModelKind::Mps => "mps",
        }
    }

    fn check_sites(self, n: usize) -> Result<()> {
        match self {
            ModelKind::Ttn => ttn::check_sites(n),
            ModelKind::Mps if n < 2 => Err(Error::Topology(format!("a chain needs at least 2 sites, got {n}"))),
            ModelKind::Mps => Ok(()),
        }
    }

    fn legs(self, n: usize) -> Vec<Vec<Leg>> {
        match self {
            ModelKind::Ttn => ttn::legs(n),
            ModelKind::Mps => mps::legs(n),
        }
    }

    fn shapes(self, n: usize, d_max: usize) -> Vec<Vec<usize>> {
        match self {
            ModelKind::Ttn => ttn::shapes(n, d_max),
            ModelKind::Mps => mps::shapes(n, d_max),
        }
    }
}

/// A tree network read as a Born machine, `p(x) = Ψ(x)² / Z`.
#[derive(Clone, Debug)]
pub struct BornModel<T> {
    kind: ModelKind,
    net: TreeNetwork<T>,
    d_max: usize,
}

impl<T: Scalar> Deref for BornModel<T> {
    type Target = TreeNetwork<T>;

    fn deref(&self) -> &TreeNetwork<T> {
        &self.net
    }
}

impl<T: Scalar> BornModel<T> {
    /// Wraps an existing network after checking it has the topology of
    /// `kind` with `n_sites` pixels.
    pub fn from_network(kind: ModelKind, net: TreeNetwork<T>, d_max: usize) -> Result<Self> {
        let n = net.n_pixels();
        kind.check_sites(n)?;
        let want = kind.legs(n);
        if (0..net.n_nodes()).any(|u| net.legs(u) != want.get(u).map(|l| l.as_slice()).unwrap_or(&[]))
            || net.n_nodes() != want.len()
        {
            return Err(Error::Topology(format!("network is not a {} over {n} sites", kind.name())));
        }
        if d_max == 0 {
            return Err(Error::Argument("d_max must be at least 1".into()));
        }
        Ok(Self { kind, net, d_max })
    }

    /// Random tensors with entries uniform in (−1, 1), canonicalized to
    /// node 0.
    pub fn random(kind: ModelKind, n_sites: usize, d_max: usize, seed: u64) -> Result<Self> {
        kind.check_sites(n_sites)?;
        if d_max == 0 {
            return Err(Error::Argument("d_max must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = kind
            .shapes(n_sites, d_max)
            .into_iter()
            .map(|shape| {
                DenseTensor::from_fn(shape, |_| {
                    let u: f64 = rng.sample(Open01);
                    T::lit(2.0 * u - 1.0)
                })
            })
            .collect();
        let mut net = TreeNetwork::new(n_sites, kind.legs(n_sites), tensors)?;
        net.canonicalize(0)?;
        Ok(Self { kind, net, d_max })
    }

    /// Every configuration equally likely; all bonds have dimension 1.
    pub fn uniform(kind: ModelKind, n_sites: usize) -> Result<Self> {
        kind.check_sites(n_sites)?;
        let tensors = kind
            .shapes(n_sites, 1)
            .into_iter()
            .map(|shape| DenseTensor::from_fn(shape, |_| T::one()))
            .collect();
        let mut net = TreeNetwork::new(n_sites, kind.legs(n_sites), tensors)?;
        net.canonicalize(0)?;
        Ok(Self { kind, net, d_max: 1 })
    }

    /// Equal superposition of the stored patterns: `Ψ(x)` counts the
    /// copies of `x` among them, so distinct patterns each get `1/|T|`.
    pub fn from_patterns(kind: ModelKind, patterns: &[Vec<u8>]) -> Result<Self> {
        let m = patterns.len();
        if m == 0 {
            return Err(Error::Argument("no patterns".into()));
        }
        let n = patterns[0].len();
        kind.check_sites(n)?;
        for (i, p) in patterns.iter().enumerate() {
            if p.len() != n || p.iter().any(|&x| x > 1) {
                return Err(Error::Argument(format!("pattern {i} is not a binary vector of length {n}")));
            }
        }
        let legs = kind.legs(n);
        let tensors = legs
            .iter()
            .map(|ls| {
                let shape = ls
                    .iter()
                    .map(|l| match l {
                        Leg::Bond(_) => m,
                        Leg::Phys(_) => 2,
                        Leg::Unit => 1,
                    })
                    .collect();
                DenseTensor::from_fn(shape, |idx| {
                    let ok = (0..m).any(|tau| {
                        ls.iter().zip(idx).all(|(l, &i)| match *l {
                            Leg::Bond(_) => i == tau,
                            Leg::Phys(p) => i == patterns[tau][p] as usize,
                            Leg::Unit => true,
                        })
                    });
                    if ok {
                        T::one()
                    } else {
                        T::zero()
                    }
                })
            })
            .collect();
        let mut net = TreeNetwork::new(n, legs, tensors)?;
        net.canonicalize(0)?;
        Ok(Self { kind, net, d_max: m })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn set_d_max(&mut self, d_max: usize) -> Result<()> {
        if d_max == 0 {
            return Err(Error::Argument("d_max must be at least 1".into()));
        }
        self.d_max = d_max;
        Ok(())
    }

    pub fn network(&self) -> &TreeNetwork<T> {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut TreeNetwork<T> {
        &mut self.net
    }

    pub fn into_network(self) -> TreeNetwork<T> {
        self.net
    }

    pub fn canonicalize(&mut self, center: NodeId) -> Result<()> {
        self.net.canonicalize(center)
    }

    /// The node holding the last pixel, where every sweep starts and ends.
    pub fn sweep_anchor(&self) -> NodeId {
        self.net.pixel_site(self.net.n_pixels() - 1).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors() {
        let m = BornModel::<f64>::random(ModelKind::Ttn, 8, 2, 3).unwrap();
        assert_eq!(m.n_nodes(), 7);
        assert_eq!(m.center(), Some(0));
        assert_eq!(m.sweep_anchor(), 6);
        let again = BornModel::<f64>::random(ModelKind::Ttn, 8, 2, 3).unwrap();
        for u in 0..7 {
            assert_eq!(m.tensor(u).data(), again.tensor(u).data());
        }
        assert!(BornModel::<f64>::random(ModelKind::Ttn, 12, 2, 3).is_err());
        let c = BornModel::<f64>::random(ModelKind::Mps, 5, 3, 1).unwrap();
        assert_eq!(c.sweep_anchor(), 4);
        let u = BornModel::<f64>::uniform(ModelKind::Ttn, 4).unwrap();
        for x in 0..16u8 {
            let s: Vec<u8> = (0..4).map(|i| (x >> i) & 1).collect();
            assert!((u.log_prob(&s).unwrap() + 4.0 * 2f64.ln()).abs() < 1e-14);
        }
    }
}
