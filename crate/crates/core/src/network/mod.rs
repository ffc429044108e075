//! Generic tree-shaped tensor network.
//!
//! Both the binary tree network and the matrix product state are trees of
//! tensors whose axes are either bonds to neighbouring tensors, physical
//! pixel axes of dimension 2, or unit-length boundary axes. Everything that
//! only depends on that structure lives here: canonical gauge, exact
//! amplitudes and norms, clamped (doubled-network) contractions, marginals
//! and correlations.

mod cache;
mod clamped;
mod density;
pub(crate) mod reduce;

pub(crate) use cache::MessageCache;
pub use density::Density;
pub(crate) use density::{doubled_reduce, Doubled};

use crate::tensor::{contract, frobenius_norm, kernels, qr_split, DenseTensor};
use crate::{Error, Result, Scalar};

pub type NodeId = usize;

/// What a tensor axis is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Leg {
    /// Virtual bond shared with another node.
    Bond(NodeId),
    /// Physical axis of one pixel, dimension 2.
    Phys(usize),
    /// Dangling axis of dimension 1 (open-boundary bond of a chain).
    Unit,
}

/// Signed log-magnitude of a scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Amplitude<T> {
    pub log_abs: T,
    pub sign: i8,
}

impl<T: Scalar> Amplitude<T> {
    pub fn zero() -> Self {
        Self {
            log_abs: T::neg_infinity(),
            sign: 0,
        }
    }

    pub(crate) fn from_parts(value: T, log: T) -> Self {
        if value == T::zero() {
            return Self::zero();
        }
        Self {
            log_abs: value.abs().ln() + log,
            sign: if value > T::zero() { 1 } else { -1 },
        }
    }

    /// `sign · exp(log_abs)`; may under- or overflow.
    pub fn value(&self) -> T {
        T::from(self.sign).unwrap_or_else(T::zero) * self.log_abs.exp()
    }
}

#[derive(Clone, Debug)]
pub struct TreeNetwork<T> {
    n_pixels: usize,
    legs: Vec<Vec<Leg>>,
    tensors: Vec<DenseTensor<T>>,
    center: Option<NodeId>,
    // rooted at node 0
    parent: Vec<Option<NodeId>>,
    post_order: Vec<NodeId>,
    tin: Vec<usize>,
    tout: Vec<usize>,
    pixel_site: Vec<(NodeId, usize)>,
}

impl<T: Scalar> TreeNetwork<T> {
    /// Assembles a network and checks that legs and shapes describe a tree.
    pub fn new(n_pixels: usize, legs: Vec<Vec<Leg>>, tensors: Vec<DenseTensor<T>>) -> Result<Self> {
        let n = legs.len();
        if n == 0 || tensors.len() != n {
            return Err(Error::Topology(format!(
                "{} leg lists for {} tensors",
                legs.len(),
                tensors.len()
            )));
        }
        let mut pixel_site = vec![(usize::MAX, 0); n_pixels];
        let mut n_edges = 0usize;
        for (u, ls) in legs.iter().enumerate() {
            if tensors[u].rank() != ls.len() {
                return Err(Error::Dimension(format!(
                    "node {u}: tensor rank {} but {} legs",
                    tensors[u].rank(),
                    ls.len()
                )));
            }
            for (a, leg) in ls.iter().enumerate() {
                let d = tensors[u].shape()[a];
                match *leg {
                    Leg::Phys(p) => {
                        if p >= n_pixels || pixel_site[p].0 != usize::MAX {
                            return Err(Error::Topology(format!("pixel {p} attached twice or out of range")));
                        }
                        if d != 2 {
                            return Err(Error::Dimension(format!("pixel {p} axis has length {d}")));
                        }
                        pixel_site[p] = (u, a);
                    }
                    Leg::Unit => {
                        if d != 1 {
                            return Err(Error::Dimension(format!("unit axis of node {u} has length {d}")));
                        }
                    }
                    Leg::Bond(v) => {
                        if v >= n || v == u {
                            return Err(Error::Topology(format!("node {u} bonds to invalid node {v}")));
                        }
                        let back: Vec<usize> = legs[v]
                            .iter()
                            .enumerate()
                            .filter(|(_, l)| **l == Leg::Bond(u))
                            .map(|(i, _)| i)
                            .collect();
                        if back.len() != 1 || ls.iter().filter(|l| **l == Leg::Bond(v)).count() != 1 {
                            return Err(Error::Topology(format!("bond {u}-{v} is not a single symmetric edge")));
                        }
                        if tensors[v].shape()[back[0]] != d {
                            return Err(Error::Dimension(format!(
                                "bond {u}-{v}: lengths {d} and {}",
                                tensors[v].shape()[back[0]]
                            )));
                        }
                        n_edges += 1;
                    }
                }
            }
        }
        if pixel_site.iter().any(|s| s.0 == usize::MAX) {
            return Err(Error::Topology("some pixel has no physical axis".into()));
        }
        if n_edges != 2 * (n - 1) {
            return Err(Error::Topology(format!("{} bonds for {n} nodes: not a tree", n_edges / 2)));
        }
        let mut net = Self {
            n_pixels,
            legs,
            tensors,
            center: None,
            parent: vec![None; n],
            post_order: Vec::with_capacity(n),
            tin: vec![0; n],
            tout: vec![0; n],
            pixel_site,
        };
        net.index_tree()?;
        Ok(net)
    }

    fn index_tree(&mut self) -> Result<()> {
        let n = self.legs.len();
        let mut visited = vec![false; n];
        let mut clock = 0;
        // iterative DFS: (node, next leg index)
        let mut stack = vec![(0usize, 0usize)];
        visited[0] = true;
        self.tin[0] = clock;
        clock += 1;
        while let Some(&mut (u, ref mut li)) = stack.last_mut() {
            if *li < self.legs[u].len() {
                let leg = self.legs[u][*li];
                *li += 1;
                if let Leg::Bond(v) = leg {
                    if Some(v) == self.parent[u] {
                        continue;
                    }
                    if visited[v] {
                        return Err(Error::Topology("cycle detected".into()));
                    }
                    visited[v] = true;
                    self.parent[v] = Some(u);
                    self.tin[v] = clock;
                    clock += 1;
                    stack.push((v, 0));
                }
            } else {
                self.tout[u] = clock;
                self.post_order.push(u);
                stack.pop();
            }
        }
        if visited.iter().any(|v| !v) {
            return Err(Error::Topology("network is not connected".into()));
        }
        Ok(())
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn n_nodes(&self) -> usize {
        self.tensors.len()
    }

    pub fn legs(&self, u: NodeId) -> &[Leg] {
        &self.legs[u]
    }

    pub fn tensor(&self, u: NodeId) -> &DenseTensor<T> {
        &self.tensors[u]
    }

    pub fn tensors(&self) -> &[DenseTensor<T>] {
        &self.tensors
    }

    pub fn center(&self) -> Option<NodeId> {
        self.center
    }

    pub(crate) fn parent(&self, u: NodeId) -> Option<NodeId> {
        self.parent[u]
    }

    pub(crate) fn post_order(&self) -> &[NodeId] {
        &self.post_order
    }

    /// Node and axis holding pixel `p`.
    pub fn pixel_site(&self, p: usize) -> (NodeId, usize) {
        self.pixel_site[p]
    }

    /// True if `w` lies in the subtree of `u` (tree rooted at node 0).
    pub(crate) fn in_subtree(&self, w: NodeId, u: NodeId) -> bool {
        self.tin[u] <= self.tin[w] && self.tin[w] < self.tout[u]
    }

    /// True if `w` is on `v`'s side of the edge `u`–`v`.
    pub(crate) fn on_side(&self, w: NodeId, u: NodeId, v: NodeId) -> bool {
        if self.parent[v] == Some(u) {
            self.in_subtree(w, v)
        } else {
            !self.in_subtree(w, u)
        }
    }

    /// Axis of `u` bonded to `v`.
    pub fn axis_to(&self, u: NodeId, v: NodeId) -> Option<usize> {
        self.legs[u].iter().position(|l| *l == Leg::Bond(v))
    }

    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.legs[u].iter().filter_map(|l| match l {
            Leg::Bond(v) => Some(*v),
            _ => None,
        })
    }

    /// Bond dimension of every edge, listed as `(u, v, dim)` with `u < v`.
    pub fn bond_dims(&self) -> Vec<(NodeId, NodeId, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n_nodes() {
            for (a, l) in self.legs[u].iter().enumerate() {
                if let Leg::Bond(v) = *l {
                    if u < v {
                        out.push((u, v, self.tensors[u].shape()[a]));
                    }
                }
            }
        }
        out
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().iter().map(|b| b.2).max().unwrap_or(1)
    }

    /// Nodes on the path from `a` to `b`, both included.
    pub fn path(&self, a: NodeId, b: NodeId) -> Vec<NodeId> {
        let mut up_a = vec![a];
        let mut x = a;
        while !self.in_subtree(b, x) {
            x = self.parent[x].expect("root contains every node");
            up_a.push(x);
        }
        let mut down_b = Vec::new();
        let mut y = b;
        while y != x {
            down_b.push(y);
            y = self.parent[y].expect("walk stays below the meeting node");
        }
        up_a.extend(down_b.into_iter().rev());
        up_a
    }

    /// Replaces a tensor, keeping the current gauge bookkeeping only when
    /// the caller promises the canonical identities still hold.
    pub(crate) fn set_tensor(&mut self, u: NodeId, t: DenseTensor<T>) {
        debug_assert_eq!(t.rank(), self.legs[u].len());
        self.tensors[u] = t;
    }

    pub(crate) fn set_center(&mut self, c: Option<NodeId>) {
        self.center = c;
    }

    pub fn tensor_mut_unchecked(&mut self, u: NodeId) -> &mut DenseTensor<T> {
        self.center = None;
        &mut self.tensors[u]
    }

    /// Replaces tensor `u` (same shape). Drops the canonical center unless
    /// `u` is the center itself.
    pub fn replace_tensor(&mut self, u: NodeId, t: DenseTensor<T>) -> Result<()> {
        if t.shape() != self.tensors[u].shape() {
            return Err(Error::Dimension(format!(
                "tensor {u}: expected shape {:?}, got {:?}",
                self.tensors[u].shape(),
                t.shape()
            )));
        }
        if self.center != Some(u) {
            self.center = None;
        }
        self.tensors[u] = t;
        Ok(())
    }

    fn check_node(&self, u: NodeId) -> Result<()> {
        if u >= self.n_nodes() {
            return Err(Error::Argument(format!(
                "node {u} out of range for {} nodes",
                self.n_nodes()
            )));
        }
        Ok(())
    }

    /// QR-orthogonalizes `from` toward its neighbour `to` and absorbs the
    /// triangular factor into `to`.
    pub(crate) fn push_gauge(&mut self, from: NodeId, to: NodeId) -> Result<()> {
        let a = self.axis_to(from, to).ok_or_else(|| {
            Error::Topology(format!("nodes {from} and {to} are not adjacent"))
        })?;
        let b = self.axis_to(to, from).expect("bonds are symmetric");
        let t = &self.tensors[from];
        let rows: Vec<usize> = (0..t.rank()).filter(|&i| i != a).collect();
        let split = qr_split(t, &rows, &[a])?;
        self.tensors[from] = place_last_axis(split.q, a)?;
        let absorbed = contract(&split.r, &self.tensors[to], &[(1, b)])?;
        self.tensors[to] = place_first_axis(absorbed, b)?;
        Ok(())
    }

    /// Brings the network into mixed canonical form centered on `center`.
    ///
    /// When a center already exists only the path between the two centers
    /// is touched.
    pub fn canonicalize(&mut self, center: NodeId) -> Result<()> {
        self.check_node(center)?;
        match self.center {
            Some(c) => {
                let path = self.path(c, center);
                for w in path.windows(2) {
                    self.push_gauge(w[0], w[1])?;
                }
            }
            None => {
                // post-order of the tree re-rooted at `center`
                let mut order = Vec::with_capacity(self.n_nodes());
                let mut stack = vec![(center, usize::MAX, false)];
                while let Some((u, from, expanded)) = stack.pop() {
                    if expanded {
                        order.push((u, from));
                        continue;
                    }
                    stack.push((u, from, true));
                    for v in self.neighbors(u).collect::<Vec<_>>() {
                        if v != from {
                            stack.push((v, u, false));
                        }
                    }
                }
                for (u, toward) in order {
                    if toward != usize::MAX {
                        self.push_gauge(u, toward)?;
                    }
                }
            }
        }
        self.center = Some(center);
        Ok(())
    }

    /// Worst deviation from the identity over all canonical identities.
    /// Returns `None` when the network has no center.
    pub fn canonical_defect(&self) -> Option<T> {
        let c = self.center?;
        let mut worst = T::zero();
        for u in 0..self.n_nodes() {
            if u == c {
                continue;
            }
            let toward = self.path(u, c)[1];
            let a = self.axis_to(u, toward).expect("adjacent");
            worst = worst.max(isometry_defect(&self.tensors[u], a));
        }
        Some(worst)
    }

    /// `ln Z` from the center tensor's norm.
    pub fn log_partition(&self) -> Result<T> {
        let c = self
            .center
            .ok_or_else(|| Error::State("partition function needs a canonical center".into()))?;
        let l = frobenius_norm(&self.tensors[c]);
        Ok(if l == T::neg_infinity() { l } else { l + l })
    }

    /// Contracts the network with one length-2 vector per pixel.
    ///
    /// With one-hot vectors this is the amplitude; with `[1, 1]` on free
    /// pixels it is a linear sum over configurations.
    pub fn contract_with(&self, pixel: impl Fn(usize) -> [T; 2]) -> Amplitude<T> {
        let n = self.n_nodes();
        let mut msgs: Vec<Vec<T>> = vec![Vec::new(); n];
        let mut logs = vec![T::zero(); n];
        for &u in &self.post_order {
            let t = &self.tensors[u];
            let mut vecs: Vec<Option<Vec<T>>> = Vec::with_capacity(t.rank());
            let mut log = t.log_scale();
            for leg in &self.legs[u] {
                vecs.push(match *leg {
                    Leg::Phys(p) => Some(pixel(p).to_vec()),
                    Leg::Unit => Some(vec![T::one()]),
                    Leg::Bond(v) if Some(v) == self.parent[u] => None,
                    Leg::Bond(v) => {
                        log = log + logs[v];
                        Some(std::mem::take(&mut msgs[v]))
                    }
                });
            }
            let refs: Vec<Option<&[T]>> = vecs.iter().map(|v| v.as_deref()).collect();
            let mut out = reduce::reduce(t.data(), t.shape(), &refs);
            log = log + kernels::normalize_max(&mut out);
            msgs[u] = out;
            logs[u] = log;
        }
        Amplitude::from_parts(msgs[0][0], logs[0])
    }

    pub fn check_sample(&self, sample: &[u8]) -> Result<()> {
        if sample.len() != self.n_pixels {
            return Err(Error::Dimension(format!(
                "sample has {} pixels, model has {}",
                sample.len(),
                self.n_pixels
            )));
        }
        if let Some(p) = sample.iter().position(|&x| x > 1) {
            return Err(Error::Argument(format!("pixel {p} is not 0 or 1")));
        }
        Ok(())
    }

    pub fn amplitude(&self, sample: &[u8]) -> Result<Amplitude<T>> {
        self.check_sample(sample)?;
        Ok(self.contract_with(|p| one_hot(sample[p])))
    }

    /// `2 ln|Ψ(x)| − ln Z`; `-inf` for zero amplitude.
    pub fn log_prob(&self, sample: &[u8]) -> Result<T> {
        let log_z = self.log_partition()?;
        let amp = self.amplitude(sample)?;
        Ok(log_prob_from(amp, log_z))
    }

    /// Mean negative log-likelihood; `+inf` if any sample has zero
    /// probability.
    pub fn nll(&self, samples: &[Vec<u8>]) -> Result<T> {
        if samples.is_empty() {
            return Err(Error::Argument("empty dataset".into()));
        }
        let log_z = self.log_partition()?;
        let mut acc = T::zero();
        for s in samples {
            let lp = log_prob_from(self.amplitude(s)?, log_z);
            if lp == T::neg_infinity() {
                return Ok(T::infinity());
            }
            acc = acc + lp;
        }
        Ok(-acc / T::lit(samples.len() as f64))
    }
}

pub(crate) fn log_prob_from<T: Scalar>(amp: Amplitude<T>, log_z: T) -> T {
    if amp.sign == 0 || log_z == T::neg_infinity() {
        return T::neg_infinity();
    }
    amp.log_abs + amp.log_abs - log_z
}

#[inline]
pub(crate) fn one_hot<T: Scalar>(v: u8) -> [T; 2] {
    if v == 0 {
        [T::one(), T::zero()]
    } else {
        [T::zero(), T::one()]
    }
}

/// Moves the last axis of `t` to position `a`.
pub(crate) fn place_last_axis<T: Scalar>(t: DenseTensor<T>, a: usize) -> Result<DenseTensor<T>> {
    let r = t.rank();
    let perm: Vec<usize> = (0..r)
        .map(|i| match i.cmp(&a) {
            std::cmp::Ordering::Less => i,
            std::cmp::Ordering::Equal => r - 1,
            std::cmp::Ordering::Greater => i - 1,
        })
        .collect();
    t.permute(&perm)
}

/// Moves the first axis of `t` to position `a`.
pub(crate) fn place_first_axis<T: Scalar>(t: DenseTensor<T>, a: usize) -> Result<DenseTensor<T>> {
    let r = t.rank();
    let perm: Vec<usize> = (0..r)
        .map(|i| match i.cmp(&a) {
            std::cmp::Ordering::Less => i + 1,
            std::cmp::Ordering::Equal => 0,
            std::cmp::Ordering::Greater => i,
        })
        .collect();
    t.permute(&perm)
}

/// Max deviation of `Σ_{other axes} t[.., i, ..] t[.., j, ..]` from `δ_ij`,
/// where `axis` is the free axis. Uses data values only.
pub fn isometry_defect<T: Scalar>(t: &DenseTensor<T>, axis: usize) -> T {
    let r = t.rank();
    let perm: Vec<usize> = std::iter::once(axis).chain((0..r).filter(|&i| i != axis)).collect();
    let d = t.shape()[axis];
    let rest = t.len() / d;
    let p = kernels::permute(t.data(), t.shape(), &perm);
    let mut g = vec![T::zero(); d * d];
    kernels::matmul_nt(&p, &p, &mut g, d, rest, d);
    let mut worst = T::zero();
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((g[i * d + j] - target).abs());
        }
    }
    worst
}
