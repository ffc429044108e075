use super::density::Doubled;
use super::{doubled_reduce, Density, Leg, NodeId, TreeNetwork};
use crate::{Error, Result, Scalar};

struct Pass<T> {
    pix: Vec<Density<T>>,
    unit: Density<T>,
    up: Vec<Density<T>>,
    clamped_below: Vec<usize>,
}

impl<T: Scalar> TreeNetwork<T> {
    fn check_clamps(&self, clamps: &[Option<u8>]) -> Result<()> {
        if clamps.len() != self.n_pixels() {
            return Err(Error::Dimension(format!(
                "{} clamps for {} pixels",
                clamps.len(),
                self.n_pixels()
            )));
        }
        if let Some(p) = clamps.iter().position(|c| matches!(c, Some(v) if *v > 1)) {
            return Err(Error::Argument(format!("pixel {p} clamped to a non-binary value")));
        }
        Ok(())
    }

    fn axis_densities<'a>(
        &self,
        u: NodeId,
        pass: &'a Pass<T>,
        down: Option<&'a [Density<T>]>,
        open: Option<usize>,
        id: &'a Density<T>,
    ) -> Vec<&'a Density<T>> {
        self.legs(u)
            .iter()
            .enumerate()
            .map(|(a, leg)| {
                if Some(a) == open {
                    return id;
                }
                match *leg {
                    Leg::Phys(p) => &pass.pix[p],
                    Leg::Unit => &pass.unit,
                    Leg::Bond(v) if Some(v) == self.parent(u) => &down.expect("down pass")[u],
                    Leg::Bond(v) => &pass.up[v],
                }
            })
            .collect()
    }

    fn up_pass(&self, clamps: &[Option<u8>]) -> Pass<T> {
        let n = self.n_nodes();
        let pix = clamps
            .iter()
            .map(|c| match c {
                Some(v) => Density::basis(*v),
                None => Density::Identity(2),
            })
            .collect();
        let mut pass = Pass {
            pix,
            unit: Density::Pure {
                v: vec![T::one()],
                log: T::zero(),
            },
            up: (0..n).map(|_| Density::Identity(1)).collect(),
            clamped_below: vec![0; n],
        };
        let id = Density::Identity(0);
        for &u in self.post_order() {
            let mut below = 0;
            for leg in self.legs(u) {
                match *leg {
                    Leg::Phys(p) => below += clamps[p].is_some() as usize,
                    Leg::Bond(v) if Some(v) != self.parent(u) => below += pass.clamped_below[v],
                    _ => {}
                }
            }
            pass.clamped_below[u] = below;
            let Some(p) = self.parent(u) else { continue };
            let a = self.axis_to(u, p).expect("adjacent");
            let gauge_free = matches!(self.center(), Some(c) if !self.in_subtree(c, u));
            let rho = if below == 0 && gauge_free {
                Density::Identity(self.tensor(u).shape()[a])
            } else {
                let dens = self.axis_densities(u, &pass, None, Some(a), &id);
                match doubled_reduce(self.tensor(u), &dens, Some(a)) {
                    Doubled::Density(d) => d,
                    Doubled::Scalar { .. } => unreachable!(),
                }
            };
            pass.up[u] = rho;
        }
        pass
    }

    /// `ln Σ Ψ(x)²` over configurations agreeing with the clamps; `-inf`
    /// when that sum vanishes.
    pub fn log_norm_clamped(&self, clamps: &[Option<u8>]) -> Result<T> {
        self.check_clamps(clamps)?;
        let pass = self.up_pass(clamps);
        let id = Density::Identity(0);
        let dens = self.axis_densities(0, &pass, None, None, &id);
        match doubled_reduce(self.tensor(0), &dens, None) {
            Doubled::Scalar { value, log } => Ok(if value > T::zero() {
                value.ln() + log
            } else {
                T::neg_infinity()
            }),
            Doubled::Density(_) => unreachable!(),
        }
    }

    /// `[p(x_k = 0 | fixed), p(x_k = 1 | fixed)]`.
    pub fn marginal(&self, fixed: &[(usize, u8)], k: usize) -> Result<[T; 2]> {
        let n = self.n_pixels();
        if k >= n {
            return Err(Error::Argument(format!("pixel {k} out of range for {n} pixels")));
        }
        let mut clamps = vec![None; n];
        for &(p, v) in fixed {
            if p >= n || v > 1 {
                return Err(Error::Argument(format!("invalid clamp ({p}, {v})")));
            }
            if p == k {
                return Err(Error::Argument(format!("pixel {k} is both fixed and queried")));
            }
            if matches!(clamps[p], Some(w) if w != v) {
                return Err(Error::Argument(format!("pixel {p} fixed to two values")));
            }
            clamps[p] = Some(v);
        }
        clamps[k] = Some(0);
        let l0 = self.log_norm_clamped(&clamps)?;
        clamps[k] = Some(1);
        let l1 = self.log_norm_clamped(&clamps)?;
        if l0 == T::neg_infinity() && l1 == T::neg_infinity() {
            return Err(Error::DegenerateDistribution(
                "conditioning event has zero probability".into(),
            ));
        }
        let p1 = T::one() / (T::one() + (l0 - l1).exp());
        let p0 = T::one() / (T::one() + (l1 - l0).exp());
        Ok([p0, p1])
    }

    /// Single-pixel marginals of every pixel given the clamps, from one
    /// upward and one downward pass. Clamped pixels get a point mass.
    pub fn all_marginals(&self, clamps: &[Option<u8>]) -> Result<Vec<[T; 2]>> {
        self.check_clamps(clamps)?;
        let n = self.n_nodes();
        let pass = self.up_pass(clamps);
        let mut down: Vec<Density<T>> = (0..n).map(|_| Density::Identity(1)).collect();
        let id = Density::Identity(0);
        let preorder: Vec<NodeId> = self.post_order().iter().rev().copied().collect();
        for &u in &preorder {
            let Some(p) = self.parent(u) else { continue };
            let a = self.axis_to(p, u).expect("adjacent");
            let outside_clamped = pass.clamped_below[0] > pass.clamped_below[u];
            let gauge_free = matches!(self.center(), Some(c) if self.in_subtree(c, u));
            let rho = if !outside_clamped && gauge_free {
                Density::Identity(self.tensor(p).shape()[a])
            } else {
                let dens = self.axis_densities(p, &pass, Some(&down), Some(a), &id);
                match doubled_reduce(self.tensor(p), &dens, Some(a)) {
                    Doubled::Density(d) => d,
                    Doubled::Scalar { .. } => unreachable!(),
                }
            };
            down[u] = rho;
        }
        let mut out = vec![[T::zero(); 2]; self.n_pixels()];
        for (q, o) in out.iter_mut().enumerate() {
            if let Some(v) = clamps[q] {
                o[v as usize] = T::one();
                continue;
            }
            let (u, a) = self.pixel_site(q);
            let dens = self.axis_densities(u, &pass, Some(&down), Some(a), &id);
            let Doubled::Density(d) = doubled_reduce(self.tensor(u), &dens, Some(a)) else {
                unreachable!()
            };
            let probs = d.diag_probs().ok_or_else(|| {
                Error::DegenerateDistribution("clamped configuration has zero probability".into())
            })?;
            *o = [probs[0], probs[1]];
        }
        Ok(out)
    }

    /// Connected correlation of the spins `s = 2x − 1` at pixels `i`, `j`.
    pub fn correlation(&self, i: usize, j: usize) -> Result<T> {
        let n = self.n_pixels();
        if i >= n || j >= n {
            return Err(Error::Argument(format!("pixel pair ({i}, {j}) out of range")));
        }
        if i == j {
            return Err(Error::Argument(format!("correlation of pixel {i} with itself")));
        }
        let mut logs = [[T::zero(); 2]; 2];
        let mut clamps = vec![None; n];
        for (a, row) in logs.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                clamps[i] = Some(a as u8);
                clamps[j] = Some(b as u8);
                *cell = self.log_norm_clamped(&clamps)?;
            }
        }
        let top = logs.iter().flatten().fold(T::neg_infinity(), |m, &x| m.max(x));
        if top == T::neg_infinity() {
            return Err(Error::DegenerateDistribution("model has zero norm".into()));
        }
        let w: Vec<T> = logs.iter().flatten().map(|&l| (l - top).exp()).collect();
        let total: T = w.iter().copied().sum();
        let p: Vec<T> = w.iter().map(|&x| x / total).collect();
        let spin = |v: usize| if v == 0 { -T::one() } else { T::one() };
        let mut e_ij = T::zero();
        let mut e_i = T::zero();
        let mut e_j = T::zero();
        for a in 0..2 {
            for b in 0..2 {
                let q = p[a * 2 + b];
                e_ij = e_ij + q * spin(a) * spin(b);
                e_i = e_i + q * spin(a);
                e_j = e_j + q * spin(b);
            }
        }
        Ok(e_ij - e_i * e_j)
    }

    /// Correlation of pixel `i` with every pixel, from three marginal
    /// passes.
    pub fn correlation_map(&self, i: usize) -> Result<Vec<T>> {
        let n = self.n_pixels();
        if i >= n {
            return Err(Error::Argument(format!("pixel {i} out of range for {n} pixels")));
        }
        let free = self.all_marginals(&vec![None; n])?;
        let pi = free[i];
        let mut cond = Vec::with_capacity(2);
        for v in 0..2u8 {
            if pi[v as usize] == T::zero() {
                cond.push(None);
                continue;
            }
            let mut clamps = vec![None; n];
            clamps[i] = Some(v);
            cond.push(Some(self.all_marginals(&clamps)?));
        }
        let e_i = pi[1] - pi[0];
        Ok((0..n)
            .map(|j| {
                let e_j = free[j][1] - free[j][0];
                let mut e_ij = T::zero();
                for v in 0..2 {
                    if let Some(c) = &cond[v] {
                        let s = if v == 0 { -T::one() } else { T::one() };
                        e_ij = e_ij + pi[v] * s * (c[j][1] - c[j][0]);
                    }
                }
                e_ij - e_i * e_j
            })
            .collect())
    }
}
