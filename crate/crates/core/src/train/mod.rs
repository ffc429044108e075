//! Likelihood training by sweeping the canonical center through the tree.
//!
//! Each update takes a guarded gradient step on the center tensor (or on
//! the merged pair for two-site updates) and re-establishes the mixed
//! canonical form with QR or a truncated SVD before moving on.

use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network::{place_first_axis, place_last_axis, reduce, MessageCache, NodeId, TreeNetwork};
use crate::tensor::{contract, kernels, svd_split};
use crate::{BornModel, DenseTensor, Error, Result, Scalar};

mod pair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    OneSite,
    TwoSite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BatchSize {
    Full,
    Size(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub d_max: usize,
    pub scheme: Scheme,
    pub svd_cutoff: f64,
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub seed: u64,
    pub renormalize_center: bool,
    /// Zero-amplitude training samples abort training when set; otherwise
    /// their amplitude is floored at `exp(-300)` and counted as a warning.
    pub strict: bool,
    /// Step halvings tried before a step is rejected.
    pub max_halvings: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            d_max: 10,
            scheme: Scheme::TwoSite,
            svd_cutoff: 1e-12,
            epochs: 1,
            batch_size: BatchSize::Full,
            seed: 0,
            renormalize_center: true,
            strict: true,
            max_halvings: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Argument(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.d_max == 0 {
            return Err(Error::Argument("d_max must be at least 1".into()));
        }
        if !(self.svd_cutoff >= 0.0) {
            return Err(Error::Argument(format!("svd cutoff must be non-negative, got {}", self.svd_cutoff)));
        }
        if self.batch_size == BatchSize::Size(0) {
            return Err(Error::Argument("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub nll: f64,
    pub seconds: f64,
    pub max_bond: usize,
    pub mean_truncation_error: f64,
    pub truncation_errors: Vec<f64>,
    pub rejected_steps: usize,
    pub warnings: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub epochs: Vec<EpochStats>,
    /// `(u, v, dim)` for every bond after training.
    pub bond_profile: Vec<(NodeId, NodeId, usize)>,
    pub warnings: usize,
}

impl TrainStats {
    pub fn final_nll(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.nll)
    }

    /// CSV with a version comment line. `timing` controls whether the
    /// wall-clock column is filled in or written as zero.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from("# ttnborn-stats v1\nepoch,nll,seconds,max_bond,mean_truncation_error\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{:.12e},{},{},{:.6e}\n",
                e.epoch,
                e.nll,
                if timing { format!("{:.3}", e.seconds) } else { "0".into() },
                e.max_bond,
                e.mean_truncation_error
            ));
        }
        out
    }
}

/// What happened at one step of a sweep, for instrumentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepEvent {
    /// One-site update of the center tensor.
    Update(NodeId),
    /// Two-site update of the pair; the center moved to the second node.
    Split(NodeId, NodeId),
    /// Center moved by a QR step.
    Push(NodeId, NodeId),
}

/// A center tensor contracted with one neighbour over their shared bond.
///
/// Axes are the center's remaining axes in order, then the neighbour's.
#[derive(Clone, Debug)]
pub struct MergedPair<T> {
    pub tensor: DenseTensor<T>,
    pub center: NodeId,
    pub neighbor: NodeId,
}

/// Per-sample environments of one site (single tensor or merged pair).
struct SiteEnv<T> {
    vecs: Vec<Vec<Vec<T>>>,
}

enum Overlap<T> {
    Ok(Vec<T>, usize),
    Zero(usize),
}

impl<T: Scalar> SiteEnv<T> {
    fn gather(net: &TreeNetwork<T>, cache: &mut MessageCache<T>, axes: &[(NodeId, usize)]) -> Self {
        for &(u, a) in axes {
            cache.ensure(net, u, a);
        }
        let b = cache.len();
        let vecs = (0..b)
            .map(|s| axes.iter().map(|&(u, a)| cache.env(net, u, a, s).0).collect())
            .collect();
        Self { vecs }
    }

    fn overlaps(&self, data: &[T], shape: &[usize], floor: bool) -> Overlap<T> {
        let floor_value = T::lit(-300.0).exp();
        let mut out = Vec::with_capacity(self.vecs.len());
        let mut floored = 0;
        for (s, vs) in self.vecs.iter().enumerate() {
            let refs: Vec<&[T]> = vs.iter().map(|v| v.as_slice()).collect();
            let a = reduce::full_contract(data, shape, &refs);
            if a == T::zero() {
                if !floor {
                    return Overlap::Zero(s);
                }
                floored += 1;
                out.push(floor_value);
            } else {
                out.push(a);
            }
        }
        Overlap::Ok(out, floored)
    }

    /// Batch NLL up to a constant that does not depend on `data`.
    fn loss(&self, data: &[T], shape: &[usize]) -> T {
        let Overlap::Ok(a, _) = self.overlaps(data, shape, false) else {
            return T::infinity();
        };
        let b = T::lit(a.len() as f64);
        let s: T = a.iter().map(|x| x.abs().ln()).sum();
        let ln = kernels::log_norm(data);
        -(s + s) / b + ln + ln
    }

    /// `2T/‖T‖² − (2/B) Σ_s E_s / ⟨T, E_s⟩`.
    fn gradient(&self, data: &[T], shape: &[usize], strict: bool) -> Result<(Vec<T>, usize)> {
        let (a, floored) = match self.overlaps(data, shape, !strict) {
            Overlap::Ok(a, f) => (a, f),
            Overlap::Zero(index) => return Err(Error::DegenerateSample { index }),
        };
        let nrm2: T = data.iter().map(|x| *x * *x).sum();
        if nrm2 == T::zero() {
            return Err(Error::Numeric("gradient of a zero tensor".into()));
        }
        let two = T::lit(2.0);
        let mut g: Vec<T> = data.iter().map(|x| two * *x / nrm2).collect();
        let scale = -two / T::lit(a.len() as f64);
        for (vs, &amp) in self.vecs.iter().zip(&a) {
            let refs: Vec<&[T]> = vs.iter().map(|v| v.as_slice()).collect();
            reduce::add_outer(&mut g, &refs, scale / amp);
        }
        Ok((g, floored))
    }
}

fn represented<T: Scalar>(t: &DenseTensor<T>) -> Result<Vec<T>> {
    let f = t.log_scale().exp();
    let out: Vec<T> = t.data().iter().map(|x| *x * f).collect();
    if out.iter().all(|x| x.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Numeric("center tensor magnitude outside the floating-point range".into()))
    }
}

/// Values the descent works on: unit-norm data when the center is
/// renormalized anyway, the represented values otherwise.
fn site_values<T: Scalar>(t: &DenseTensor<T>, config: &TrainConfig) -> Result<Vec<T>> {
    if config.renormalize_center {
        let mut u = t.clone();
        u.normalize_frobenius();
        Ok(u.into_data())
    } else {
        represented(t)
    }
}

fn center_axes<T: Scalar>(net: &TreeNetwork<T>, k: NodeId) -> Vec<(NodeId, usize)> {
    (0..net.legs(k).len()).map(|a| (k, a)).collect()
}

fn pair_axes<T: Scalar>(net: &TreeNetwork<T>, a: NodeId, b: NodeId) -> Vec<(NodeId, usize)> {
    let ab = net.axis_to(a, b).expect("adjacent");
    let ba = net.axis_to(b, a).expect("adjacent");
    (0..net.legs(a).len())
        .filter(|&i| i != ab)
        .map(|i| (a, i))
        .chain((0..net.legs(b).len()).filter(|&i| i != ba).map(|i| (b, i)))
        .collect()
}

fn require_center<T: Scalar>(model: &BornModel<T>, k: NodeId) -> Result<()> {
    if k >= model.n_nodes() {
        return Err(Error::Argument(format!("node {k} out of range")));
    }
    if model.center() != Some(k) {
        return Err(Error::State(format!(
            "model is centered at {:?}, not at node {k}",
            model.center()
        )));
    }
    Ok(())
}

fn check_batch<T: Scalar>(model: &BornModel<T>, batch: &[Vec<u8>]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    batch.iter().try_for_each(|s| model.check_sample(s))
}

/// Gradient of the batch NLL with respect to the center tensor `k`.
pub fn gradient_one_site<T: Scalar>(model: &BornModel<T>, batch: &[Vec<u8>], k: NodeId) -> Result<DenseTensor<T>> {
    require_center(model, k)?;
    check_batch(model, batch)?;
    let net = model.network();
    let mut cache = MessageCache::new(net, batch.to_vec());
    let env = SiteEnv::gather(net, &mut cache, &center_axes(net, k));
    let t = net.tensor(k);
    let (g, _) = env.gradient(&represented(t)?, t.shape(), true)?;
    DenseTensor::new(t.shape().to_vec(), g)
}

/// `T_k ← T_k − α ∇`, then optionally rescaled to unit norm.
pub fn update_one_site<T: Scalar>(
    model: &mut BornModel<T>,
    k: NodeId,
    gradient: &DenseTensor<T>,
    config: &TrainConfig,
) -> Result<()> {
    require_center(model, k)?;
    let t = model.tensor(k);
    if gradient.shape() != t.shape() {
        return Err(Error::Dimension(format!(
            "gradient shape {:?} does not match tensor shape {:?}",
            gradient.shape(),
            t.shape()
        )));
    }
    let alpha = T::lit(config.learning_rate);
    let g = gradient.represented();
    let data: Vec<T> = represented(t)?.iter().zip(&g).map(|(x, d)| *x - alpha * *d).collect();
    let mut next = DenseTensor::from_parts(t.shape().to_vec(), data, T::zero());
    if config.renormalize_center {
        next.normalize_frobenius();
    }
    model.network_mut().set_tensor(k, next);
    Ok(())
}

/// Contracts the center with an adjacent node.
pub fn merge_pair<T: Scalar>(model: &BornModel<T>, center: NodeId, neighbor: NodeId) -> Result<MergedPair<T>> {
    require_center(model, center)?;
    let ab = model
        .axis_to(center, neighbor)
        .ok_or_else(|| Error::Topology(format!("nodes {center} and {neighbor} are not adjacent")))?;
    let ba = model.axis_to(neighbor, center).expect("adjacent");
    let tensor = contract(model.tensor(center), model.tensor(neighbor), &[(ab, ba)])?;
    Ok(MergedPair {
        tensor,
        center,
        neighbor,
    })
}

/// Gradient of the batch NLL with respect to a merged pair.
pub fn gradient_merged<T: Scalar>(
    model: &BornModel<T>,
    pair: &MergedPair<T>,
    batch: &[Vec<u8>],
) -> Result<DenseTensor<T>> {
    require_center(model, pair.center)?;
    check_batch(model, batch)?;
    let net = model.network();
    let mut cache = MessageCache::new(net, batch.to_vec());
    let env = SiteEnv::gather(net, &mut cache, &pair_axes(net, pair.center, pair.neighbor));
    let (g, _) = env.gradient(&represented(&pair.tensor)?, pair.tensor.shape(), true)?;
    DenseTensor::new(pair.tensor.shape().to_vec(), g)
}

/// Splits a merged pair back into its two nodes with a truncated SVD.
/// Singular values go to the neighbour, which becomes the center.
/// Returns the discarded weight.
pub fn split_pair<T: Scalar>(model: &mut BornModel<T>, pair: &MergedPair<T>, config: &TrainConfig) -> Result<T> {
    require_center(model, pair.center)?;
    let (a, b) = (pair.center, pair.neighbor);
    let ab = model.axis_to(a, b).expect("adjacent");
    let ba = model.axis_to(b, a).expect("adjacent");
    let ra = model.legs(a).len() - 1;
    let r = pair.tensor.rank();
    let rows: Vec<usize> = (0..ra).collect();
    let cols: Vec<usize> = (ra..r).collect();
    let split = svd_split(&pair.tensor, &rows, &cols, config.d_max, T::lit(config.svd_cutoff))?;
    let ta = place_last_axis(split.u, ab)?;
    let k = split.s.len();
    let mut v = split.v;
    let inner = v.len() / k;
    let ls = v.log_scale();
    let mut sv = v.clone().into_data();
    for (i, s) in split.s.iter().enumerate() {
        sv[i * inner..(i + 1) * inner].iter_mut().for_each(|x| *x = *x * *s);
    }
    v = DenseTensor::from_parts(v.shape().to_vec(), sv, ls);
    let mut tb = place_first_axis(v, ba)?;
    if config.renormalize_center {
        tb.normalize_frobenius();
    } else {
        tb.rescale();
    }
    let net = model.network_mut();
    net.set_tensor(a, ta);
    net.set_tensor(b, tb);
    net.set_center(Some(b));
    Ok(split.truncation_error)
}

/// Guarded descent on a site tensor: halves the step while the batch NLL
/// would increase, keeping the old tensor if no step helps.
fn descend<T: Scalar>(
    env: &SiteEnv<T>,
    data: Vec<T>,
    shape: &[usize],
    config: &TrainConfig,
    warnings: &mut usize,
    rejected: &mut usize,
) -> Result<Vec<T>> {
    let (g, floored) = env.gradient(&data, shape, config.strict)?;
    *warnings += floored;
    let l0 = env.loss(&data, shape);
    let mut step = T::lit(config.learning_rate);
    for _ in 0..=config.max_halvings {
        let mut cand: Vec<T> = data.iter().zip(&g).map(|(x, d)| *x - step * *d).collect();
        if config.renormalize_center {
            let ln = kernels::log_norm(&cand);
            if ln.is_finite() {
                let inv = (-ln).exp();
                cand.iter_mut().for_each(|x| *x = *x * inv);
            }
        }
        let l = env.loss(&cand, shape);
        if l.is_finite() && (l <= l0 || !l0.is_finite()) {
            return Ok(cand);
        }
        step = step * T::lit(0.5);
    }
    *rejected += 1;
    let mut keep = data;
    if config.renormalize_center {
        let ln = kernels::log_norm(&keep);
        let inv = (-ln).exp();
        keep.iter_mut().for_each(|x| *x = *x * inv);
    }
    Ok(keep)
}

/// Guarded two-site update on the edge `center`–`neighbor`; the center
/// ends on `neighbor`. Returns the truncation error of the split.
pub fn merge_split_two_site<T: Scalar>(
    model: &mut BornModel<T>,
    center: NodeId,
    neighbor: NodeId,
    batch: &[Vec<u8>],
    config: &TrainConfig,
) -> Result<T> {
    check_batch(model, batch)?;
    let mut cache = MessageCache::new(model.network(), batch.to_vec());
    let (mut w, mut r) = (0, 0);
    two_site_step(model, &mut cache, center, neighbor, config, &mut w, &mut r)
}

fn two_site_step<T: Scalar>(
    model: &mut BornModel<T>,
    cache: &mut MessageCache<T>,
    a: NodeId,
    b: NodeId,
    config: &TrainConfig,
    warnings: &mut usize,
    rejected: &mut usize,
) -> Result<T> {
    require_center(model, a)?;
    let net = model.network();
    if net.axis_to(a, b).is_none() {
        return Err(Error::Topology(format!("nodes {a} and {b} are not adjacent")));
    }
    let env = SiteEnv::gather(net, cache, &pair_axes(net, a, b));
    let fp = pair::FactoredPair::new(net, a, b, &env.vecs, config.renormalize_center)?;
    let line = pair::Line::new(&fp, config.strict)?;
    *warnings += line.floored;
    let l0 = line.loss(&pair::Line::identity());
    let mut alpha = T::lit(config.learning_rate);
    let mut chosen = None;
    for _ in 0..=config.max_halvings {
        let step = line.step(alpha);
        let l = line.loss(&step);
        if l.is_finite() && (l <= l0 || !l0.is_finite()) {
            chosen = Some(step);
            break;
        }
        alpha = alpha * T::lit(0.5);
    }
    let step = chosen.unwrap_or_else(|| {
        *rejected += 1;
        pair::Line::identity()
    });
    let (ta, tb, err) = pair::split(net, a, b, &fp, &step, config)?;
    let net = model.network_mut();
    net.set_tensor(a, ta);
    net.set_tensor(b, tb);
    net.set_center(Some(b));
    cache.invalidate(model.network(), a);
    cache.invalidate(model.network(), b);
    check_finite(model, a)?;
    check_finite(model, b)?;
    Ok(err)
}

fn one_site_step<T: Scalar>(
    model: &mut BornModel<T>,
    cache: &mut MessageCache<T>,
    k: NodeId,
    config: &TrainConfig,
    warnings: &mut usize,
    rejected: &mut usize,
) -> Result<()> {
    let env = SiteEnv::gather(model.network(), cache, &center_axes(model.network(), k));
    let t = model.tensor(k);
    let shape = t.shape().to_vec();
    let data = descend(&env, site_values(t, config)?, &shape, config, warnings, rejected)?;
    let mut next = DenseTensor::from_parts(shape, data, T::zero());
    next.rescale();
    model.network_mut().set_tensor(k, next);
    cache.invalidate(model.network(), k);
    check_finite(model, k)
}

fn check_finite<T: Scalar>(model: &BornModel<T>, u: NodeId) -> Result<()> {
    if model.tensor(u).all_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite entries in tensor {u} after update")))
    }
}

fn push<T: Scalar>(model: &mut BornModel<T>, cache: &mut MessageCache<T>, a: NodeId, b: NodeId) -> Result<()> {
    let net = model.network_mut();
    net.push_gauge(a, b)?;
    net.set_center(Some(b));
    cache.invalidate(model.network(), a);
    cache.invalidate(model.network(), b);
    Ok(())
}

/// Smallest and largest pixel on `v`'s side of the edge `u`–`v`.
fn side_extent<T: Scalar>(net: &TreeNetwork<T>, u: NodeId, v: NodeId) -> (usize, usize) {
    let mut lo = usize::MAX;
    let mut hi = 0;
    for p in 0..net.n_pixels() {
        if net.on_side(net.pixel_site(p).0, u, v) {
            lo = lo.min(p);
            hi = hi.max(p);
        }
    }
    (lo, hi)
}

/// Depth-first walk over the whole tree from `start`, including the hops
/// back up after finishing a branch, cut after the last new node.
///
/// `leftward` explores the branch holding the highest pixel first;
/// otherwise the branch holding the lowest pixel goes first.
pub fn sweep_walk<T: Scalar>(net: &TreeNetwork<T>, start: NodeId, leftward: bool) -> Vec<NodeId> {
    let mut walk = vec![start];
    let mut stack: Vec<(NodeId, Vec<NodeId>)> = Vec::new();
    let branches = |u: NodeId, from: Option<NodeId>| {
        let mut nb: Vec<(usize, NodeId)> = net
            .neighbors(u)
            .filter(|&v| Some(v) != from)
            .map(|v| {
                let (lo, hi) = side_extent(net, u, v);
                (if leftward { usize::MAX - hi } else { lo }, v)
            })
            .collect();
        nb.sort();
        nb.into_iter().rev().map(|x| x.1).collect::<Vec<_>>()
    };
    stack.push((start, branches(start, None)));
    while let Some((u, todo)) = stack.last_mut() {
        let u = *u;
        match todo.pop() {
            Some(v) => {
                walk.push(v);
                let b = branches(v, Some(u));
                stack.push((v, b));
            }
            None => {
                stack.pop();
                if let Some((p, _)) = stack.last() {
                    walk.push(*p);
                }
            }
        }
    }
    let n = net.n_nodes();
    let mut seen = vec![false; n];
    let mut last_new = 0;
    for (i, &u) in walk.iter().enumerate() {
        if !seen[u] {
            seen[u] = true;
            last_new = i;
        }
    }
    walk.truncate(last_new + 1);
    walk
}

/// The two walks of an epoch: leftward from the anchor, then rightward back.
pub fn epoch_walks<T: Scalar>(model: &BornModel<T>) -> (Vec<NodeId>, Vec<NodeId>) {
    let left = sweep_walk(model.network(), model.sweep_anchor(), true);
    let end = *left.last().expect("nonempty walk");
    let right = sweep_walk(model.network(), end, false);
    (left, right)
}

struct Sweeper<'a, T> {
    config: &'a TrainConfig,
    walks: (Vec<NodeId>, Vec<NodeId>),
    warnings: usize,
    rejected: usize,
    trunc: Vec<f64>,
    _t: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar> Sweeper<'a, T> {
    fn pass(
        &mut self,
        model: &mut BornModel<T>,
        cache: &mut MessageCache<T>,
        walk: &[NodeId],
        observer: &mut dyn FnMut(&BornModel<T>, SweepEvent),
    ) -> Result<()> {
        let n = model.n_nodes();
        let mut seen = vec![false; n];
        seen[walk[0]] = true;
        let one_site = self.config.scheme == Scheme::OneSite;
        if one_site {
            one_site_step(model, cache, walk[0], self.config, &mut self.warnings, &mut self.rejected)?;
            observer(model, SweepEvent::Update(walk[0]));
        }
        for w in walk.windows(2) {
            let (a, b) = (w[0], w[1]);
            let fresh = !seen[b];
            seen[b] = true;
            if fresh && !one_site {
                let e = two_site_step(model, cache, a, b, self.config, &mut self.warnings, &mut self.rejected)?;
                self.trunc.push(e.as_f64());
                observer(model, SweepEvent::Split(a, b));
            } else {
                push(model, cache, a, b)?;
                observer(model, SweepEvent::Push(a, b));
                if fresh {
                    one_site_step(model, cache, b, self.config, &mut self.warnings, &mut self.rejected)?;
                    observer(model, SweepEvent::Update(b));
                }
            }
        }
        Ok(())
    }
}

fn epoch_batch(data: &[Vec<u8>], config: &TrainConfig, epoch: usize) -> Vec<Vec<u8>> {
    match config.batch_size {
        BatchSize::Size(b) if b < data.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(epoch as u64 + 1);
            let mut idx = sample(&mut rng, data.len(), b).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| data[i].clone()).collect()
        }
        _ => data.to_vec(),
    }
}

/// One leftward and one rightward pass. The model must be centered on its
/// sweep anchor and ends there again.
pub fn sweep_epoch<T: Scalar>(
    model: &mut BornModel<T>,
    data: &[Vec<u8>],
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats> {
    sweep_epoch_observed(model, data, config, epoch, &mut |_, _| {})
}

/// [`sweep_epoch`] with a callback after every step.
pub fn sweep_epoch_observed<T: Scalar>(
    model: &mut BornModel<T>,
    data: &[Vec<u8>],
    config: &TrainConfig,
    epoch: usize,
    observer: &mut dyn FnMut(&BornModel<T>, SweepEvent),
) -> Result<EpochStats> {
    config.validate()?;
    check_batch(model, data)?;
    let anchor = model.sweep_anchor();
    require_center(model, anchor)?;
    let walks = epoch_walks(model);
    run_epoch(model, data, config, epoch, walks, observer)
}

fn run_epoch<T: Scalar>(
    model: &mut BornModel<T>,
    data: &[Vec<u8>],
    config: &TrainConfig,
    epoch: usize,
    walks: (Vec<NodeId>, Vec<NodeId>),
    observer: &mut dyn FnMut(&BornModel<T>, SweepEvent),
) -> Result<EpochStats> {
    let start = Instant::now();
    let batch = epoch_batch(data, config, epoch);
    let mut cache = MessageCache::new(model.network(), batch);
    let mut sw = Sweeper {
        config,
        walks,
        warnings: 0,
        rejected: 0,
        trunc: Vec::new(),
        _t: std::marker::PhantomData,
    };
    let (left, right) = std::mem::take(&mut sw.walks);
    sw.pass(model, &mut cache, &left, observer)?;
    sw.pass(model, &mut cache, &right, observer)?;
    let nll = model.nll(data)?.as_f64();
    let mean = if sw.trunc.is_empty() {
        0.0
    } else {
        sw.trunc.iter().sum::<f64>() / sw.trunc.len() as f64
    };
    Ok(EpochStats {
        epoch,
        nll,
        seconds: start.elapsed().as_secs_f64(),
        max_bond: model.max_bond(),
        mean_truncation_error: mean,
        truncation_errors: sw.trunc,
        rejected_steps: sw.rejected,
        warnings: sw.warnings,
    })
}

/// Runs `config.epochs` epochs.
pub fn train<T: Scalar>(model: &mut BornModel<T>, data: &[Vec<u8>], config: &TrainConfig) -> Result<TrainStats> {
    train_with(model, data, config, |_, _| Ok(()))
}

/// [`train`] with a callback after every epoch (used for checkpoints and
/// progress output).
pub fn train_with<T: Scalar>(
    model: &mut BornModel<T>,
    data: &[Vec<u8>],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&BornModel<T>, &EpochStats) -> Result<()>,
) -> Result<TrainStats> {
    config.validate()?;
    check_batch(model, data)?;
    let mut stats = TrainStats::default();
    if config.epochs > 0 {
        model.set_d_max(config.d_max)?;
        model.canonicalize(model.sweep_anchor())?;
        let walks = epoch_walks(model);
        for epoch in 1..=config.epochs {
            let e = run_epoch(model, data, config, epoch, walks.clone(), &mut |_, _| {})?;
            stats.warnings += e.warnings;
            on_epoch(model, &e)?;
            stats.epochs.push(e);
        }
    }
    stats.bond_profile = model.bond_dims();
    Ok(stats)
}
