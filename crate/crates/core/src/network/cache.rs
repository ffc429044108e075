use rayon::prelude::*;

use super::{one_hot, reduce, Leg, NodeId, TreeNetwork};
use crate::tensor::kernels;
use crate::Scalar;

struct Slot<T> {
    dim: usize,
    data: Vec<T>,
    log: Vec<T>,
    valid: bool,
}

/// Per-sample single-copy environment vectors on every bond, in both
/// directions, recomputed lazily after tensors change.
///
/// `slot[u][a]` holds the contraction of everything on the far side of
/// bond axis `a` of node `u`, one normalized vector per sample.
pub(crate) struct MessageCache<T> {
    samples: Vec<Vec<u8>>,
    slots: Vec<Vec<Option<Slot<T>>>>,
}

impl<T: Scalar> MessageCache<T> {
    pub fn new(net: &TreeNetwork<T>, samples: Vec<Vec<u8>>) -> Self {
        let slots = (0..net.n_nodes())
            .map(|u| {
                net.legs(u)
                    .iter()
                    .map(|l| match l {
                        Leg::Bond(_) => Some(Slot {
                            dim: 0,
                            data: Vec::new(),
                            log: Vec::new(),
                            valid: false,
                        }),
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        Self { samples, slots }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Marks stale every message that depends on node `w`.
    pub fn invalidate(&mut self, net: &TreeNetwork<T>, w: NodeId) {
        for u in 0..net.n_nodes() {
            for (a, leg) in net.legs(u).iter().enumerate() {
                if let Leg::Bond(v) = *leg {
                    if net.on_side(w, u, v) {
                        if let Some(s) = self.slots[u][a].as_mut() {
                            s.valid = false;
                        }
                    }
                }
            }
        }
    }

    fn is_valid(&self, u: NodeId, a: usize) -> bool {
        self.slots[u][a].as_ref().map_or(true, |s| s.valid)
    }

    pub fn ensure(&mut self, net: &TreeNetwork<T>, u: NodeId, a: usize) {
        let mut stack = vec![(u, a)];
        while let Some(&(x, ax)) = stack.last() {
            if self.is_valid(x, ax) {
                stack.pop();
                continue;
            }
            let Leg::Bond(v) = net.legs(x)[ax] else { unreachable!() };
            let mut pending = false;
            for (b, leg) in net.legs(v).iter().enumerate() {
                if *leg != Leg::Bond(x) && !self.is_valid(v, b) {
                    stack.push((v, b));
                    pending = true;
                }
            }
            if !pending {
                self.compute(net, x, ax, v);
                stack.pop();
            }
        }
    }

    fn compute(&mut self, net: &TreeNetwork<T>, u: NodeId, a: usize, v: NodeId) {
        let t = net.tensor(v);
        let legs = net.legs(v);
        let open = net.axis_to(v, u).expect("adjacent");
        let dim = t.shape()[open];
        let slots = &self.slots[v];
        let results: Vec<(Vec<T>, T)> = self
            .samples
            .par_iter()
            .enumerate()
            .map(|(s, x)| {
                let mut log = t.log_scale();
                let mut owned: Vec<Option<Vec<T>>> = Vec::with_capacity(legs.len());
                for (b, leg) in legs.iter().enumerate() {
                    owned.push(match *leg {
                        Leg::Phys(p) => Some(one_hot::<T>(x[p]).to_vec()),
                        Leg::Unit => Some(vec![T::one()]),
                        Leg::Bond(_) if b == open => None,
                        Leg::Bond(_) => {
                            let sl = slots[b].as_ref().expect("bond slot");
                            log = log + sl.log[s];
                            Some(sl.data[s * sl.dim..(s + 1) * sl.dim].to_vec())
                        }
                    });
                }
                let refs: Vec<Option<&[T]>> = owned.iter().map(|o| o.as_deref()).collect();
                let mut out = reduce::reduce(t.data(), t.shape(), &refs);
                log = log + kernels::normalize_max(&mut out);
                (out, log)
            })
            .collect();
        let slot = self.slots[u][a].as_mut().expect("bond slot");
        slot.dim = dim;
        slot.data.clear();
        slot.log.clear();
        for (vec, l) in results {
            slot.data.extend(vec);
            slot.log.push(l);
        }
        slot.valid = true;
    }

    /// Environment vector of sample `s` on axis `a` of node `u`, with its
    /// log factor. The slot must be valid.
    pub fn env(&self, net: &TreeNetwork<T>, u: NodeId, a: usize, s: usize) -> (Vec<T>, T) {
        match net.legs(u)[a] {
            Leg::Phys(p) => (one_hot::<T>(self.samples[s][p]).to_vec(), T::zero()),
            Leg::Unit => (vec![T::one()], T::zero()),
            Leg::Bond(_) => {
                let sl = self.slots[u][a].as_ref().expect("bond slot");
                debug_assert!(sl.valid);
                (sl.data[s * sl.dim..(s + 1) * sl.dim].to_vec(), sl.log[s])
            }
        }
    }
}
