//! Brute-force oracles shared by unit tests.

use crate::network::{Leg, TreeNetwork};
use crate::tensor::contract;
use crate::DenseTensor;

/// Full state vector `Ψ(x)` indexed by `Σ x_p 2^p`, built by contracting
/// the whole network with generic pairwise contractions.
pub fn dense_state(net: &TreeNetwork<f64>) -> Vec<f64> {
    let n = net.n_nodes();
    let mut acc: DenseTensor<f64> = net.tensor(0).clone();
    let mut labels: Vec<Leg> = net.legs(0).to_vec();
    let mut owner: Vec<usize> = vec![0; labels.len()];
    let mut done = vec![false; n];
    done[0] = true;
    loop {
        let Some(pos) = labels
            .iter()
            .position(|l| matches!(l, Leg::Bond(v) if !done[*v]))
        else {
            break;
        };
        let Leg::Bond(v) = labels[pos] else { unreachable!() };
        let from = owner[pos];
        let b = net.axis_to(v, from).unwrap();
        acc = contract(&acc, net.tensor(v), &[(pos, b)]).unwrap();
        labels.remove(pos);
        owner.remove(pos);
        for (a, l) in net.legs(v).iter().enumerate() {
            if a != b {
                labels.push(*l);
                owner.push(v);
            }
        }
        done[v] = true;
    }
    let mut acc = acc;
    acc.fold_scale();
    let np = net.n_pixels();
    let mut pix_axis = vec![0; np];
    for (a, l) in labels.iter().enumerate() {
        if let Leg::Phys(p) = l {
            pix_axis[p.to_owned()] = a;
        }
    }
    let shape = acc.shape().to_vec();
    let strides = crate::tensor::kernels::strides(&shape);
    (0..1usize << np)
        .map(|x| {
            let off: usize = (0..np).map(|p| ((x >> p) & 1) * strides[pix_axis[p]]).sum();
            acc.data()[off] * acc.log_scale().exp()
        })
        .collect()
}

pub fn bits(x: usize, n: usize) -> Vec<u8> {
    (0..n).map(|p| ((x >> p) & 1) as u8).collect()
}

pub fn probs(net: &TreeNetwork<f64>) -> Vec<f64> {
    let psi = dense_state(net);
    let z: f64 = psi.iter().map(|a| a * a).sum();
    psi.iter().map(|a| a * a / z).collect()
}

/// Network equal to `model` except that the pair `(a, b)` is replaced by
/// the merged tensor `m` on `a` and a reshaped identity on `b`.
pub fn network_with_pair(
    model: &crate::BornModel<f64>,
    a: usize,
    b: usize,
    m: &DenseTensor<f64>,
) -> TreeNetwork<f64> {
    use crate::network::{place_first_axis, place_last_axis};
    let ab = model.axis_to(a, b).unwrap();
    let ba = model.axis_to(b, a).unwrap();
    let ra = model.legs(a).len() - 1;
    let a_shape: Vec<usize> = m.shape()[..ra].to_vec();
    let b_shape: Vec<usize> = m.shape()[ra..].to_vec();
    let p: usize = b_shape.iter().product();
    let mut sa = a_shape.clone();
    sa.push(p);
    let ta = place_last_axis(m.clone().reshape(sa).unwrap(), ab).unwrap();
    let mut sb = vec![p];
    sb.extend(&b_shape);
    let ident = DenseTensor::<f64>::identity(p).reshape(sb).unwrap();
    let tb = place_first_axis(ident, ba).unwrap();
    let mut tensors = model.tensors().to_vec();
    tensors[a] = ta;
    tensors[b] = tb;
    let legs = (0..model.n_nodes()).map(|u| model.legs(u).to_vec()).collect();
    let mut net = TreeNetwork::new(model.n_pixels(), legs, tensors).unwrap();
    net.set_center(Some(a));
    net
}
