//! Binary-tree topology in heap numbering.
//!
//! Heap node `n` (1-based) has children `2n` and `2n + 1`; with
//! `N_t = n_sites − 1` nodes, those with `2n > N_t` are leaves carrying two
//! pixels each. Heap position `n_sites + p` is pixel `p`. Internally node
//! ids are `heap − 1`, so the root is node 0.

use crate::network::{Leg, NodeId};
use crate::{Error, Result};

pub fn check_sites(n_sites: usize) -> Result<()> {
    if n_sites < 2 || !n_sites.is_power_of_two() {
        return Err(Error::Topology(format!(
            "number of sites must be a power of two of at least 2, got {n_sites}"
        )));
    }
    Ok(())
}

pub fn node_of_heap(heap: usize) -> NodeId {
    heap - 1
}

pub fn heap_of_node(u: NodeId) -> usize {
    u + 1
}

fn child_leg(n_sites: usize, heap_child: usize) -> Leg {
    if heap_child >= n_sites {
        Leg::Phys(heap_child - n_sites)
    } else {
        Leg::Bond(node_of_heap(heap_child))
    }
}

/// Leg lists of every node, root axes `(left, right)`, others
/// `(up, left, right)`.
pub fn legs(n_sites: usize) -> Vec<Vec<Leg>> {
    let nt = n_sites - 1;
    (1..=nt)
        .map(|h| {
            let mut l = Vec::with_capacity(3);
            if h > 1 {
                l.push(Leg::Bond(node_of_heap(h / 2)));
            }
            l.push(child_leg(n_sites, 2 * h));
            l.push(child_leg(n_sites, 2 * h + 1));
            l
        })
        .collect()
}

/// Pixels below heap node `h`.
pub fn pixels_below(n_sites: usize, h: usize) -> usize {
    let depth = usize::BITS - 1 - h.leading_zeros();
    n_sites >> depth
}

/// Bond dimension of the edge above heap node `h`:
/// `min(d_max, 2^(pixels below h))`.
pub fn bond_above(n_sites: usize, h: usize, d_max: usize) -> usize {
    let k = pixels_below(n_sites, h);
    if k >= 63 {
        d_max
    } else {
        d_max.min(1usize << k)
    }
}

pub fn shapes(n_sites: usize, d_max: usize) -> Vec<Vec<usize>> {
    let nt = n_sites - 1;
    let dim = |h: usize| if h >= n_sites { 2 } else { bond_above(n_sites, h, d_max) };
    (1..=nt)
        .map(|h| {
            let mut s = Vec::with_capacity(3);
            if h > 1 {
                s.push(dim(h));
            }
            s.push(dim(2 * h));
            s.push(dim(2 * h + 1));
            s
        })
        .collect()
}

/// Pixels stored under each node (in pixel order).
pub fn leaf_pixels(n_sites: usize, u: NodeId) -> std::ops::Range<usize> {
    let h = heap_of_node(u);
    let k = pixels_below(n_sites, h);
    let depth = usize::BITS - 1 - h.leading_zeros();
    let first = (h - (1 << depth)) * k;
    first..first + k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heap_layout() {
        assert_eq!(legs(4), vec![
            vec![Leg::Bond(1), Leg::Bond(2)],
            vec![Leg::Bond(0), Leg::Phys(0), Leg::Phys(1)],
            vec![Leg::Bond(0), Leg::Phys(2), Leg::Phys(3)],
        ]);
        assert_eq!(legs(2), vec![vec![Leg::Phys(0), Leg::Phys(1)]]);
        assert_eq!(shapes(4, 10), vec![vec![4, 4], vec![4, 2, 2], vec![4, 2, 2]]);
        let s = shapes(8, 2);
        assert_eq!(s.len(), 7);
        assert!(s.iter().flatten().all(|&d| d == 2));
        assert_eq!(shapes(8, 100)[0], vec![16, 16]);
        assert_eq!(shapes(1024, 10)[0], vec![10, 10]);
        assert_eq!(leaf_pixels(8, 6), 6..8);
        assert_eq!(leaf_pixels(8, 1), 0..4);
        assert!(check_sites(12).is_err());
    }
}
