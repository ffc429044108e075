//! Tree-structured factor graphs over binary variables.
//!
//! Factors sit on edges as strictly positive 2×2 tables stored as their
//! logarithms, so gradient steps never leave the positive cone. Exact
//! partition functions and edge marginals come from two-pass sum-product
//! in the log domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::qr_matrix;
use crate::train::{EpochStats, TrainStats};
use crate::{ttn, BornModel, DenseTensor, Error, Model, ModelKind, Result, TreeNetwork};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeFactorGraph {
    n_vars: usize,
    /// `(i, j)` per factor; the table is indexed `[2·s_i + s_j]`.
    edges: Vec<(usize, usize)>,
    log_tables: Vec<[f64; 4]>,
    /// Variable index of each pixel.
    visible: Vec<usize>,
}

struct Plan {
    order: Vec<usize>,
    /// Parent variable, edge index, and whether the parent is the edge's
    /// first variable.
    up: Vec<Option<(usize, usize, bool)>>,
}

/// Log partition function plus normalized edge marginals, laid out like the
/// factor tables.
#[derive(Clone, Debug)]
pub struct EdgeMarginals {
    pub log_z: f64,
    pub edges: Vec<[f64; 4]>,
}

fn lse2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

impl TreeFactorGraph {
    pub fn new(n_vars: usize, edges: Vec<(usize, usize)>, log_tables: Vec<[f64; 4]>, visible: Vec<usize>) -> Result<Self> {
        if edges.len() != log_tables.len() {
            return Err(Error::Dimension(format!("{} edges but {} tables", edges.len(), log_tables.len())));
        }
        if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| i >= n_vars || j >= n_vars || i == j) {
            return Err(Error::Topology(format!("edge ({i}, {j}) is invalid for {n_vars} variables")));
        }
        if let Some(&v) = visible.iter().find(|&&v| v >= n_vars) {
            return Err(Error::Topology(format!("visible variable {v} out of range")));
        }
        let mut seen = vec![false; n_vars];
        for &v in &visible {
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Topology(format!("variable {v} is visible twice")));
            }
        }
        if log_tables.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("factor tables must be finite and positive".into()));
        }
        Ok(Self {
            n_vars,
            edges,
            log_tables,
            visible,
        })
    }

    /// Hidden node per tree node and one visible variable per pixel,
    /// wired like the heap binary tree: variable `h − 1` for heap position
    /// `h`, edges listed by child heap position.
    pub fn heap(n_sites: usize, log_tables: Vec<[f64; 4]>) -> Result<Self> {
        ttn::check_sites(n_sites)?;
        let edges = (2..2 * n_sites).map(|c| (c / 2 - 1, c - 1)).collect();
        Self::new(2 * n_sites - 1, edges, log_tables, (n_sites - 1..2 * n_sites - 1).collect())
    }

    pub fn heap_uniform(n_sites: usize) -> Result<Self> {
        Self::heap(n_sites, vec![[0.0; 4]; 2 * n_sites.max(1) - 2])
    }

    /// Heap topology with log-table entries uniform in `[-scale, scale)`.
    pub fn heap_random(n_sites: usize, scale: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tables = (2..2 * n_sites.max(1))
            .map(|_| std::array::from_fn(|_| rng.gen_range(-scale..scale)))
            .collect();
        Self::heap(n_sites, tables)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_pixels(&self) -> usize {
        self.visible.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn visible(&self) -> &[usize] {
        &self.visible
    }

    pub fn log_tables(&self) -> &[[f64; 4]] {
        &self.log_tables
    }

    pub fn table(&self, e: usize) -> [f64; 4] {
        self.log_tables[e].map(f64::exp)
    }

    fn plan(&self) -> Result<Plan> {
        if self.n_vars == 0 {
            return Err(Error::Topology("empty factor graph".into()));
        }
        let mut adj = vec![Vec::new(); self.n_vars];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            adj[i].push((j, e, true));
            adj[j].push((i, e, false));
        }
        let mut up = vec![None; self.n_vars];
        let mut visited = vec![false; self.n_vars];
        let mut order = Vec::with_capacity(self.n_vars);
        visited[0] = true;
        order.push(0);
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            let came = up[u].map(|(_, e, _)| e);
            for &(v, e, u_first) in &adj[u] {
                if Some(e) == came {
                    continue;
                }
                if visited[v] {
                    return Err(Error::Topology(format!("cycle through edge ({}, {})", self.edges[e].0, self.edges[e].1)));
                }
                visited[v] = true;
                up[v] = Some((u, e, u_first));
                order.push(v);
            }
        }
        if order.len() != self.n_vars {
            return Err(Error::Topology("factor graph is not connected".into()));
        }
        Ok(Plan { order, up })
    }

    fn oriented(&self, e: usize, parent_first: bool, a: usize, b: usize) -> f64 {
        let t = &self.log_tables[e];
        if parent_first {
            t[2 * a + b]
        } else {
            t[2 * b + a]
        }
    }

    fn unary(&self, clamps: &[Option<u8>]) -> Result<Vec<[f64; 2]>> {
        if clamps.len() != self.n_vars {
            return Err(Error::Dimension(format!(
                "{} clamps for {} variables",
                clamps.len(),
                self.n_vars
            )));
        }
        clamps
            .iter()
            .map(|c| match *c {
                None => Ok([0.0, 0.0]),
                Some(0) => Ok([0.0, f64::NEG_INFINITY]),
                Some(1) => Ok([f64::NEG_INFINITY, 0.0]),
                Some(x) => Err(Error::Argument(format!("clamp value {x} is not binary"))),
            })
            .collect()
    }

    /// Returns inside beliefs and upward messages.
    fn upward(&self, plan: &Plan, unary: &[[f64; 2]]) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let mut inside = unary.to_vec();
        let mut msg = vec![[0.0; 2]; self.n_vars];
        for &c in plan.order.iter().rev() {
            if let Some((p, e, pf)) = plan.up[c] {
                let m: [f64; 2] = std::array::from_fn(|a| {
                    lse2(self.oriented(e, pf, a, 0) + inside[c][0], self.oriented(e, pf, a, 1) + inside[c][1])
                });
                inside[p][0] += m[0];
                inside[p][1] += m[1];
                msg[c] = m;
            }
        }
        (inside, msg)
    }

    /// Exact `ln Z` with the given variables clamped (`None` = summed).
    pub fn log_z(&self, clamps: &[Option<u8>]) -> Result<f64> {
        let plan = self.plan()?;
        let (inside, _) = self.upward(&plan, &self.unary(clamps)?);
        Ok(lse2(inside[0][0], inside[0][1]))
    }

    /// `ln Z` with pixel clamps translated onto the visible variables.
    pub fn log_z_pixels(&self, pixels: &[Option<u8>]) -> Result<f64> {
        self.log_z(&self.var_clamps(pixels)?)
    }

    fn var_clamps(&self, pixels: &[Option<u8>]) -> Result<Vec<Option<u8>>> {
        if pixels.len() != self.visible.len() {
            return Err(Error::Dimension(format!(
                "{} pixel values for {} visible variables",
                pixels.len(),
                self.visible.len()
            )));
        }
        let mut c = vec![None; self.n_vars];
        for (&v, &x) in self.visible.iter().zip(pixels) {
            c[v] = x;
        }
        Ok(c)
    }

    pub fn edge_marginals(&self, clamps: &[Option<u8>]) -> Result<EdgeMarginals> {
        let plan = self.plan()?;
        let unary = self.unary(clamps)?;
        let (inside, msg) = self.upward(&plan, &unary);
        let log_z = lse2(inside[0][0], inside[0][1]);
        let mut outside = vec![[0.0; 2]; self.n_vars];
        let mut edges = vec![[0.0; 4]; self.edges.len()];
        for &c in &plan.order {
            let Some((p, e, pf)) = plan.up[c] else { continue };
            let excl: [f64; 2] = std::array::from_fn(|a| inside[p][a] + outside[p][a] - msg[c][a]);
            outside[c] = std::array::from_fn(|b| {
                lse2(self.oriented(e, pf, 0, b) + excl[0], self.oriented(e, pf, 1, b) + excl[1])
            });
            for a in 0..2 {
                for b in 0..2 {
                    let w = (excl[a] + self.oriented(e, pf, a, b) + inside[c][b] - log_z).exp();
                    let idx = if pf { 2 * a + b } else { 2 * b + a };
                    edges[e][idx] = w;
                }
            }
        }
        Ok(EdgeMarginals { log_z, edges })
    }

    /// `ln p̃(x)`: hidden variables summed out, pixels clamped.
    pub fn log_weight(&self, sample: &[u8]) -> Result<f64> {
        let pix: Vec<Option<u8>> = sample.iter().map(|&x| Some(x)).collect();
        self.log_z_pixels(&pix)
    }

    pub fn nll(&self, samples: &[Vec<u8>]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Argument("empty dataset".into()));
        }
        let log_z = self.log_z(&vec![None; self.n_vars])?;
        let mut acc = 0.0;
        for s in samples {
            acc += self.log_weight(s)?;
        }
        Ok(log_z - acc / samples.len() as f64)
    }

    /// NLL and its gradient with respect to the log-tables.
    pub fn nll_gradient(&self, samples: &[Vec<u8>]) -> Result<(f64, Vec<[f64; 4]>)> {
        if samples.is_empty() {
            return Err(Error::Argument("empty dataset".into()));
        }
        let free = self.edge_marginals(&vec![None; self.n_vars])?;
        let mut grad = free.edges;
        let mut acc = 0.0;
        let w = 1.0 / samples.len() as f64;
        for s in samples {
            if s.len() != self.visible.len() {
                return Err(Error::Dimension(format!(
                    "sample has {} pixels, graph has {}",
                    s.len(),
                    self.visible.len()
                )));
            }
            let clamped = self.edge_marginals(&self.var_clamps(&s.iter().map(|&x| Some(x)).collect::<Vec<_>>())?)?;
            acc += clamped.log_z;
            for (g, m) in grad.iter_mut().zip(&clamped.edges) {
                for k in 0..4 {
                    g[k] -= w * m[k];
                }
            }
        }
        Ok((free.log_z - acc * w, grad))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FgTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub max_halvings: u32,
}

impl Default for FgTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 100,
            max_halvings: 8,
        }
    }
}

/// Full-batch gradient descent on the NLL in log-table coordinates. A step
/// that raises the NLL or produces non-finite tables is halved, and dropped
/// after `max_halvings` attempts.
pub fn fg_train(fg: &TreeFactorGraph, data: &[Vec<u8>], config: &FgTrainConfig) -> Result<(TreeFactorGraph, TrainStats)> {
    if !(config.learning_rate > 0.0) || !config.learning_rate.is_finite() {
        return Err(Error::Argument(format!("learning rate must be positive, got {}", config.learning_rate)));
    }
    let mut cur = fg.clone();
    let mut stats = TrainStats::default();
    for epoch in 0..config.epochs {
        let (nll, grad) = cur.nll_gradient(data)?;
        let mut step = config.learning_rate;
        let mut rejected = 0;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let mut trial = cur.clone();
            for (t, g) in trial.log_tables.iter_mut().zip(&grad) {
                for k in 0..4 {
                    t[k] -= step * g[k];
                }
            }
            if trial.log_tables.iter().flatten().all(|x| x.is_finite()) {
                let n = trial.nll(data)?;
                if n <= nll {
                    accepted = Some((trial, n));
                    break;
                }
            }
            rejected += 1;
            step *= 0.5;
        }
        let nll_after = match accepted {
            Some((t, n)) => {
                cur = t;
                n
            }
            None => nll,
        };
        stats.epochs.push(EpochStats {
            epoch: epoch + 1,
            nll: nll_after,
            max_bond: 2,
            rejected_steps: rejected,
            ..Default::default()
        });
    }
    Ok((cur, stats))
}

/// Oriented table of the edge above each heap position, `[parent][child]`.
fn heap_matrices(fg: &TreeFactorGraph) -> Result<(usize, Vec<[f64; 4]>)> {
    let n = fg.visible.len();
    let mismatch = || Error::Argument("factor graph does not have the heap binary-tree topology".into());
    if ttn::check_sites(n).is_err() || fg.n_vars != 2 * n - 1 || fg.visible.iter().enumerate().any(|(p, &v)| v != n - 1 + p) {
        return Err(mismatch());
    }
    let mut mats = vec![None; 2 * n];
    for (e, &(i, j)) in fg.edges.iter().enumerate() {
        let (hi, hj) = (i + 1, j + 1);
        let (child, parent_first) = if hj / 2 == hi {
            (hj, true)
        } else if hi / 2 == hj {
            (hi, false)
        } else {
            return Err(mismatch());
        };
        if child < 2 || mats[child].is_some() {
            return Err(mismatch());
        }
        let t = fg.table(e);
        mats[child] = Some(if parent_first { t } else { [t[0], t[2], t[1], t[3]] });
    }
    let mats = mats.into_iter().skip(2).collect::<Option<Vec<_>>>().ok_or_else(mismatch)?;
    Ok((n, mats))
}

/// `M = A·B` with `A` orthogonal and `B` upper triangular.
pub fn split_factor(m: &[f64; 4]) -> ([f64; 4], [f64; 4]) {
    let (q, r, k) = qr_matrix(m, 2, 2);
    debug_assert_eq!(k, 2);
    ([q[0], q[1], q[2], q[3]], [r[0], r[1], r[2], r[3]])
}

/// Rewrites a heap-shaped factor graph as a tree tensor network whose
/// linear contraction with pixel vectors reproduces the factor graph's
/// unnormalized weights (no squaring).
///
/// Hidden variables become copy tensors; each edge table is split with QR
/// and its halves absorbed into the two endpoint nodes, except that tables
/// on pixel edges are absorbed whole into the parent.
pub fn fg_to_ttn(fg: &TreeFactorGraph) -> Result<Model> {
    let (n, mats) = heap_matrices(fg)?;
    let mat = |c: usize| &mats[c - 2];
    let mut down = vec![[0.0; 4]; 2 * n];
    let mut up = vec![[0.0; 4]; 2 * n];
    for c in 2..2 * n {
        if c < n {
            let (a, b) = split_factor(mat(c));
            down[c] = a;
            up[c] = b;
        } else {
            down[c] = *mat(c);
        }
    }
    let tensors = (1..n)
        .map(|h| {
            let (l, r) = (&down[2 * h], &down[2 * h + 1]);
            if h == 1 {
                DenseTensor::from_fn(vec![2, 2], |i| (0..2).map(|s| l[2 * s + i[0]] * r[2 * s + i[1]]).sum())
            } else {
                let b = &up[h];
                DenseTensor::from_fn(vec![2, 2, 2], |i| {
                    (0..2).map(|s| b[2 * i[0] + s] * l[2 * s + i[1]] * r[2 * s + i[2]]).sum()
                })
            }
        })
        .collect();
    let net = TreeNetwork::new(n, ttn::legs(n), tensors)?;
    BornModel::from_network(ModelKind::Ttn, net, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn enumerate_log_z(fg: &TreeFactorGraph, clamps: &[Option<u8>]) -> f64 {
        let n = fg.n_vars();
        let mut total = 0.0;
        'outer: for x in 0..1usize << n {
            let s: Vec<usize> = (0..n).map(|i| (x >> i) & 1).collect();
            for (i, c) in clamps.iter().enumerate() {
                if c.is_some_and(|c| c as usize != s[i]) {
                    continue 'outer;
                }
            }
            let w: f64 = fg
                .edges()
                .iter()
                .enumerate()
                .map(|(e, &(i, j))| fg.log_tables()[e][2 * s[i] + s[j]])
                .sum();
            total += w.exp();
        }
        total.ln()
    }

    fn random_tree(n: usize, n_visible: usize, seed: u64) -> TreeFactorGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for v in 1..n {
            let p = rng.gen_range(0..v);
            edges.push(if rng.gen_bool(0.5) { (p, v) } else { (v, p) });
        }
        let tables = edges.iter().map(|_| std::array::from_fn(|_| rng.gen_range(-1.5..1.5))).collect();
        let mut vars: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            vars.swap(i, rng.gen_range(0..=i));
        }
        vars.truncate(n_visible);
        TreeFactorGraph::new(n, edges, tables, vars).unwrap()
    }

    #[test]
    fn hand_cases() {
        let one = TreeFactorGraph::new(2, vec![(0, 1)], vec![[0.0; 4]], vec![1]).unwrap();
        assert!((one.log_z(&[None, None]).unwrap() - 4f64.ln()).abs() < 1e-14);
        let f = [1.0f64, 2.0, 3.0, 4.0].map(f64::ln);
        let g = [0.5f64, 1.0, 2.0, 0.25].map(f64::ln);
        let chain = TreeFactorGraph::new(3, vec![(0, 1), (1, 2)], vec![f, g], vec![2]).unwrap();
        // Σ_{a,b,c} f[a,b] g[b,c] = Σ_b (Σ_a f[a,b]) (Σ_c g[b,c]) = 4·1.5 + 6·2.25
        assert!((chain.log_z(&[None; 3]).unwrap() - 19.5f64.ln()).abs() < 1e-14);
        assert!((chain.log_z(&[None, Some(1), None]).unwrap() - 13.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn topology_errors() {
        let cyc = TreeFactorGraph::new(3, vec![(0, 1), (1, 2), (2, 0)], vec![[0.0; 4]; 3], vec![0]).unwrap();
        assert!(matches!(cyc.log_z(&[None; 3]), Err(Error::Topology(_))));
        let split = TreeFactorGraph::new(4, vec![(0, 1), (2, 3)], vec![[0.0; 4]; 2], vec![0]).unwrap();
        assert!(matches!(split.log_z(&[None; 4]), Err(Error::Topology(_))));
        assert!(TreeFactorGraph::new(2, vec![(0, 2)], vec![[0.0; 4]], vec![]).is_err());
        assert!(TreeFactorGraph::new(2, vec![(0, 1)], vec![[f64::NAN; 4]], vec![]).is_err());
        assert!(matches!(fg_to_ttn(&random_tree(7, 4, 1)), Err(Error::Argument(_))));
    }

    #[test]
    fn matches_enumeration_on_random_trees() {
        for seed in 0..200u64 {
            let n = 2 + (seed as usize % 11);
            let fg = random_tree(n, n / 2, seed);
            let mut clamps = vec![None; n];
            assert!((fg.log_z(&clamps).unwrap() - enumerate_log_z(&fg, &clamps)).abs() < 1e-10);
            clamps[seed as usize % n] = Some((seed % 2) as u8);
            clamps[(seed as usize * 7) % n] = Some(1);
            assert!((fg.log_z(&clamps).unwrap() - enumerate_log_z(&fg, &clamps)).abs() < 1e-10);
        }
    }

    #[test]
    fn edge_marginals_match_enumeration() {
        let fg = random_tree(9, 3, 5);
        let m = fg.edge_marginals(&[None; 9]).unwrap();
        let log_z = enumerate_log_z(&fg, &[None; 9]);
        for (e, &(i, j)) in fg.edges().iter().enumerate() {
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let mut c = vec![None; 9];
                    c[i] = Some(a);
                    c[j] = Some(b);
                    let want = (enumerate_log_z(&fg, &c) - log_z).exp();
                    assert!((m.edges[e][2 * a as usize + b as usize] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let fg = random_tree(7, 4, 100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<Vec<u8>> = (0..6).map(|_| (0..4).map(|_| rng.gen_range(0..2)).collect()).collect();
            let (_, grad) = fg.nll_gradient(&data).unwrap();
            let h = 1e-5;
            for e in 0..fg.edges().len() {
                for k in 0..4 {
                    let shifted = |d: f64| {
                        let mut g = fg.clone();
                        g.log_tables[e][k] += d;
                        g.nll(&data).unwrap()
                    };
                    let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                    assert!((fd - grad[e][k]).abs() < 1e-8 + 1e-5 * fd.abs(), "{fd} vs {}", grad[e][k]);
                }
            }
        }
    }

    #[test]
    fn training_fits_single_mode() {
        let fg = TreeFactorGraph::new(2, vec![(0, 1)], vec![[0.0; 4]], vec![1]).unwrap();
        let data = vec![vec![0u8]; 5];
        let cfg = FgTrainConfig {
            learning_rate: 5.0,
            epochs: 2000,
            max_halvings: 8,
        };
        let (fit, stats) = fg_train(&fg, &data, &cfg).unwrap();
        assert!(stats.epochs.windows(2).all(|w| w[1].nll <= w[0].nll));
        let p0 = (fit.log_z_pixels(&[Some(0)]).unwrap() - fit.log_z_pixels(&[None]).unwrap()).exp();
        assert!(p0 > 1.0 - 1e-3, "{p0}");
    }

    #[test]
    fn training_decreases_nll_on_heap_tree() {
        let fg = TreeFactorGraph::heap_random(8, 0.1, 3).unwrap();
        let data = crate::data::gen_random_patterns(8, 6, 2, false).unwrap().samples;
        let (_, stats) = fg_train(&fg, &data, &FgTrainConfig { epochs: 30, ..Default::default() }).unwrap();
        let first = fg.nll(&data).unwrap();
        assert!(stats.final_nll().unwrap() < first - 0.1);
    }

    #[test]
    fn split_reconstructs_factor() {
        let m = [0.3, 1.7, 2.2, 0.4];
        let (a, b) = split_factor(&m);
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| a[2 * i + k] * b[2 * k + j]).sum();
                assert!((v - m[2 * i + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_factors_map_to_uniform_measure() {
        let fg = TreeFactorGraph::heap_uniform(8).unwrap();
        let model = fg_to_ttn(&fg).unwrap();
        let z = model.contract_with(|_| [1.0, 1.0]);
        assert!((z.log_abs - fg.log_z(&[None; 15]).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn mapped_network_reproduces_weights() {
        let fg = TreeFactorGraph::heap_random(4, 1.0, 11).unwrap();
        let model = fg_to_ttn(&fg).unwrap();
        for x in 0..16usize {
            let s: Vec<u8> = (0..4).map(|p| ((x >> p) & 1) as u8).collect();
            let amp = model.amplitude(&s).unwrap();
            assert_eq!(amp.sign, 1);
            assert!((amp.value() - fg.log_weight(&s).unwrap().exp()).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn mapped_network_matches_clamped_sums(seed in any::<u64>(), k in 1u32..4) {
            let n = 1usize << k.max(1);
            let fg = TreeFactorGraph::heap_random(n, 1.0, seed).unwrap();
            let model = fg_to_ttn(&fg).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
            let mut clamps = vec![None; n];
            for _ in 0..3.min(n) {
                clamps[rng.gen_range(0..n)] = Some(rng.gen_range(0..2u8));
            }
            let amp = model.contract_with(|p| match clamps[p] {
                None => [1.0, 1.0],
                Some(0) => [1.0, 0.0],
                Some(_) => [0.0, 1.0],
            });
            prop_assert!((amp.log_abs - fg.log_z_pixels(&clamps).unwrap()).abs() < 1e-10);
        }
    }
}
