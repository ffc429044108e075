//! Open-boundary chain topology: site `i` has axes `(left, pixel, right)`,
//! with unit-length boundary axes at both ends.

use crate::network::Leg;

pub fn legs(n: usize) -> Vec<Vec<Leg>> {
    (0..n)
        .map(|i| {
            vec![
                if i == 0 { Leg::Unit } else { Leg::Bond(i - 1) },
                Leg::Phys(i),
                if i + 1 == n { Leg::Unit } else { Leg::Bond(i + 1) },
            ]
        })
        .collect()
}

/// Dimension of the bond between sites `i` and `i + 1`.
pub fn bond_right(n: usize, i: usize, d_max: usize) -> usize {
    let k = (i + 1).min(n - i - 1);
    if k >= 63 {
        d_max
    } else {
        d_max.min(1usize << k)
    }
}

pub fn shapes(n: usize, d_max: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| {
            let l = if i == 0 { 1 } else { bond_right(n, i - 1, d_max) };
            let r = if i + 1 == n { 1 } else { bond_right(n, i, d_max) };
            vec![l, 2, r]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_shapes() {
        assert_eq!(shapes(5, 3), vec![vec![1, 2, 2], vec![2, 2, 3], vec![3, 2, 3], vec![3, 2, 2], vec![2, 2, 1]]);
        assert_eq!(shapes(4, 8), vec![vec![1, 2, 2], vec![2, 2, 4], vec![4, 2, 2], vec![2, 2, 1]]);
        assert_eq!(legs(2), vec![vec![Leg::Unit, Leg::Phys(0), Leg::Bond(1)], vec![Leg::Bond(0), Leg::Phys(1), Leg::Unit]]);
    }
}
