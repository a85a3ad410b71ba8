//! Classical ferromagnetic Ising partition functions.
//!
//! `E(σ) = Σ_{(i,j)} w_ij σ_i σ_j` with `w_ij ≥ 0` and `Z = e^{c} Σ_σ e^{E(σ)}`
//! where `c` is the model's log prefactor. Exact values come from Gray-code
//! enumeration or a layered transfer matrix; estimates come from an annealed
//! ratio estimator driven by Swendsen–Wang sweeps.
//!
//! The estimator starts from an exactly solvable reference: a maximum-weight
//! pseudoforest (every component holds at most one cycle), whose partition
//! function has a closed form and which can be sampled exactly. The remaining
//! edges are switched on along `b ∈ [0, 1]` and
//! `Z(1)/Z(0) = Π_k E_{b_k}[exp((b_{k+1} − b_k) E_R)]`.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::TimModel;
use crate::rng;
use crate::stats::{log_cosh, median};
use crate::trotter::{self, ClassicalMapping, FieldFloor, TrotterPlan};

/// Largest `N` for Gray-code enumeration.
pub const MAX_ENUM_SPINS: usize = 24;
/// Largest layer width for the transfer-matrix route.
pub const MAX_LAYER_WIDTH: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalIsingModel {
    #[serde(rename = "N")]
    num_spins: usize,
    /// `(i, j, w)` with `i < j`.
    edges: Vec<(usize, usize, f64)>,
    log_prefactor: f64,
}

impl ClassicalIsingModel {
    /// Edges are stored with `i < j`; self-loops, duplicates and negative weights are rejected.
    pub fn new(num_spins: usize, edges: Vec<(usize, usize, f64)>, log_prefactor: f64) -> Result<Self> {
        if num_spins == 0 || num_spins > u32::MAX as usize {
            return Err(Error::validation("N", format!("must be positive, got {num_spins}")));
        }
        if !log_prefactor.is_finite() {
            return Err(Error::validation("log_prefactor", "must be finite"));
        }
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for (k, &(i, j, w)) in edges.iter().enumerate() {
            let field = || format!("edges[{k}]");
            if i == j {
                return Err(Error::validation(field(), format!("self-loop on spin {i}")));
            }
            if i >= num_spins || j >= num_spins {
                return Err(Error::validation(field(), format!("spin index out of range for N = {num_spins}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::validation(
                    field(),
                    format!("weight {w} must be finite and non-negative (ferromagnetic)"),
                ));
            }
            let pair = (i.min(j), i.max(j));
            if !seen.insert(pair) {
                return Err(Error::validation(field(), format!("duplicate edge {pair:?}")));
            }
            normalized.push((pair.0, pair.1, w));
        }
        Ok(Self {
            num_spins,
            edges: normalized,
            log_prefactor,
        })
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn log_prefactor(&self) -> f64 {
        self.log_prefactor
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// Same couplings with spins renamed by `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_spins || perm.iter().collect::<BTreeSet<_>>().len() != perm.len() {
            return Err(Error::validation("perm", "must be a permutation of 0..N"));
        }
        let edges = self.edges.iter().map(|&(i, j, w)| (perm[i], perm[j], w)).collect();
        Self::new(self.num_spins, edges, self.log_prefactor)
    }
}

/// `Σ_edges w σ_i σ_j`, prefactor excluded.
pub fn energy(model: &ClassicalIsingModel, spins: &[i8]) -> Result<f64> {
    if spins.len() != model.num_spins {
        return Err(Error::validation(
            "spins",
            format!("expected {} spins, got {}", model.num_spins, spins.len()),
        ));
    }
    Ok(edge_energy(&model.edges, spins))
}

fn edge_energy(edges: &[(usize, usize, f64)], spins: &[i8]) -> f64 {
    edges
        .iter()
        .map(|&(i, j, w)| w * f64::from(spins[i] * spins[j]))
        .sum()
}

/// `log Z` (prefactor included) by Gray-code enumeration with the last spin fixed.
pub fn partition_exact_enum(model: &ClassicalIsingModel) -> Result<f64> {
    let n = model.num_spins;
    if n > MAX_ENUM_SPINS {
        return Err(Error::TooLarge {
            what: "Gray-code enumeration",
            got: n,
            max: MAX_ENUM_SPINS,
        });
    }
    let mut neighbours: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, w) in &model.edges {
        neighbours[i].push((j, w));
        neighbours[j].push((i, w));
    }
    let mut spins = vec![1i8; n];
    // E ≤ Σw, so every shifted term is ≤ 1.
    let top = model.total_weight();
    let mut e = top;
    let mut sum = (e - top).exp();
    let free = n - 1;
    for k in 1u64..(1u64 << free) {
        let i = k.trailing_zeros() as usize;
        let field: f64 = neighbours[i].iter().map(|&(j, w)| w * f64::from(spins[j])).sum();
        e -= 2.0 * f64::from(spins[i]) * field;
        spins[i] = -spins[i];
        sum += (e - top).exp();
    }
    Ok(std::f64::consts::LN_2 + sum.ln() + top + model.log_prefactor)
}

/// `log Z` by a periodic transfer matrix over layers of `width` spins (spin
/// `layer·width + u`). Every edge must join spins in the same or cyclically
/// adjacent layers.
pub fn partition_exact_layered(model: &ClassicalIsingModel, width: usize) -> Result<f64> {
    if width == 0 || model.num_spins % width != 0 {
        return Err(Error::validation("width", "must divide N"));
    }
    if width > MAX_LAYER_WIDTH {
        return Err(Error::TooLarge {
            what: "transfer-matrix layer",
            got: width,
            max: MAX_LAYER_WIDTH,
        });
    }
    let layers = model.num_spins / width;
    let states = 1usize << width;
    let spin = |s: usize, u: usize| if (s >> u) & 1 == 0 { 1.0 } else { -1.0 };
    let mut intra: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); layers];
    // inter[l]: edges between layer l and layer (l + 1) mod layers, as (u in l, v in l + 1, w).
    let mut inter: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); layers];
    for &(i, j, w) in &model.edges {
        let (li, ui) = (i / width, i % width);
        let (lj, uj) = (j / width, j % width);
        if li == lj {
            intra[li].push((ui, uj, w));
        } else if (li + 1) % layers == lj {
            inter[li].push((ui, uj, w));
        } else if (lj + 1) % layers == li {
            inter[lj].push((uj, ui, w));
        } else {
            return Err(Error::validation(
                "edges",
                format!("edge ({i}, {j}) skips a layer for width {width}"),
            ));
        }
    }
    let mut acc = DMatrix::<f64>::identity(states, states);
    let mut log_scale = 0.0;
    for l in 0..layers {
        let m = DMatrix::from_fn(states, states, |s, s2| {
            let e_in: f64 = intra[l].iter().map(|&(u, v, w)| w * spin(s, u) * spin(s, v)).sum();
            let e_out: f64 = inter[l].iter().map(|&(u, v, w)| w * spin(s, u) * spin(s2, v)).sum();
            (e_in + e_out).exp()
        });
        acc *= m;
        let s = acc.amax();
        acc /= s;
        log_scale += s.ln();
    }
    let tr = acc.trace().ln() + log_scale;
    Ok(tr + model.log_prefactor)
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i as u32;
        }
        self.size.iter_mut().for_each(|s| *s = 1);
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        true
    }
}

/// Swendsen–Wang kernel with fixed per-edge bond probabilities.
struct SwKernel {
    edges: Vec<(u32, u32, f64)>,
    uf: UnionFind,
    cluster_spin: Vec<i8>,
}

impl SwKernel {
    /// Bond probability `1 − e^{−2w}` for each effective weight.
    fn new(num_spins: usize, weighted: impl Iterator<Item = (usize, usize, f64)>) -> Self {
        let edges = weighted
            .filter(|e| e.2 > 0.0)
            .map(|(i, j, w)| (i as u32, j as u32, -(-2.0 * w).exp_m1()))
            .collect();
        Self {
            edges,
            uf: UnionFind::new(num_spins),
            cluster_spin: vec![0; num_spins],
        }
    }

    fn sweep<R: Rng + ?Sized>(&mut self, spins: &mut [i8], rng: &mut R) {
        self.uf.reset();
        for &(i, j, p) in &self.edges {
            if spins[i as usize] == spins[j as usize] && rng.random::<f64>() < p {
                self.uf.union(i, j);
            }
        }
        self.cluster_spin.iter_mut().for_each(|s| *s = 0);
        for v in 0..spins.len() {
            let root = self.uf.find(v as u32) as usize;
            if self.cluster_spin[root] == 0 {
                self.cluster_spin[root] = if rng.random::<bool>() { 1 } else { -1 };
            }
            spins[v] = self.cluster_spin[root];
        }
    }
}

/// One Swendsen–Wang update of the Gibbs measure with all weights scaled by `beta_scale`.
pub fn sw_sweep<R: Rng + ?Sized>(
    model: &ClassicalIsingModel,
    beta_scale: f64,
    spins: &mut [i8],
    rng: &mut R,
) -> Result<()> {
    if !(0.0..=1.0).contains(&beta_scale) {
        return Err(Error::Range {
            name: "beta_scale",
            value: beta_scale,
            expected: "[0, 1]",
        });
    }
    if spins.len() != model.num_spins {
        return Err(Error::validation("spins", "length differs from N"));
    }
    let mut kernel = SwKernel::new(
        model.num_spins,
        model.edges.iter().map(|&(i, j, w)| (i, j, beta_scale * w)),
    );
    kernel.sweep(spins, rng);
    Ok(())
}

/// Which exactly solvable model the annealing starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Independent spins, `Z_0 = 2^N`; every edge is annealed.
    Uniform,
    /// Maximum-weight pseudoforest at full weight; only the other edges are annealed.
    Pseudoforest,
}

/// The reference edges, grouped by component, with `log Z_0` and an exact sampler.
struct ReferenceModel {
    num_spins: usize,
    /// Per component: root, BFS order of `(child, parent, w)` over tree edges, and the
    /// optional cycle-closing edge `(a, b, w)`.
    components: Vec<Component>,
    log_z: f64,
}

struct Component {
    root: usize,
    tree: Vec<(usize, usize, f64)>,
    closing: Option<(usize, usize, f64)>,
}

impl ReferenceModel {
    fn build(num_spins: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); num_spins];
        let mut closing_of_root: Vec<Option<(usize, usize, f64)>> = vec![None; num_spins];
        let mut uf = UnionFind::new(num_spins);
        let mut cyclic = vec![false; num_spins];
        let mut closings = Vec::new();
        for &(i, j, w) in edges {
            let (ri, rj) = (uf.find(i as u32) as usize, uf.find(j as u32) as usize);
            if ri != rj {
                let c = cyclic[ri] || cyclic[rj];
                uf.union(i as u32, j as u32);
                cyclic[uf.find(i as u32) as usize] = c;
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
            } else {
                closings.push((i, j, w));
                cyclic[ri] = true;
            }
        }
        for &(i, j, w) in &closings {
            let root = uf.find(i as u32) as usize;
            closing_of_root[root] = Some((i, j, w));
        }
        let mut visited = vec![false; num_spins];
        let mut parent = vec![usize::MAX; num_spins];
        let mut parent_w = vec![0.0; num_spins];
        let mut depth = vec![0usize; num_spins];
        let mut components = Vec::new();
        let mut log_z = 0.0;
        for start in 0..num_spins {
            if visited[start] {
                continue;
            }
            visited[start] = true;
            let mut tree = Vec::new();
            let mut queue = VecDeque::from([start]);
            let mut size = 0usize;
            while let Some(v) = queue.pop_front() {
                size += 1;
                for &(u, w) in &adjacency[v] {
                    if !visited[u] {
                        visited[u] = true;
                        parent[u] = v;
                        parent_w[u] = w;
                        depth[u] = depth[v] + 1;
                        tree.push((u, v, w));
                        queue.push_back(u);
                    }
                }
            }
            let closing = closing_of_root[uf.find(start as u32) as usize];
            log_z += size as f64 * std::f64::consts::LN_2 + tree.iter().map(|e| log_cosh(e.2)).sum::<f64>();
            if let Some((a, b, w)) = closing {
                // Z_comp gains cosh(w)(1 + tanh(w) Π_{path a..b} tanh(w_e)).
                let (mut x, mut y) = (a, b);
                let mut path_tanh = 1.0;
                while x != y {
                    if depth[x] >= depth[y] {
                        path_tanh *= parent_w[x].tanh();
                        x = parent[x];
                    } else {
                        path_tanh *= parent_w[y].tanh();
                        y = parent[y];
                    }
                }
                log_z += log_cosh(w) + (w.tanh() * path_tanh).ln_1p();
            }
            components.push(Component {
                root: start,
                tree,
                closing,
            });
        }
        Self {
            num_spins,
            components,
            log_z,
        }
    }

    /// Exact draw: tree edges independently, then rejection on the closing edge
    /// with acceptance `e^{w(σ_aσ_b − 1)}` (at least 1/2 on average).
    fn sample<R: Rng + ?Sized>(&self, spins: &mut [i8], rng: &mut R) {
        debug_assert_eq!(spins.len(), self.num_spins);
        for c in &self.components {
            loop {
                spins[c.root] = if rng.random::<bool>() { 1 } else { -1 };
                for &(child, parent, w) in &c.tree {
                    // P(aligned) = e^w / (2 cosh w) = 1 / (1 + e^{-2w}).
                    let aligned = rng.random::<f64>() * (1.0 + (-2.0 * w).exp()) < 1.0;
                    spins[child] = if aligned { spins[parent] } else { -spins[parent] };
                }
                match c.closing {
                    Some((a, b, w)) if spins[a] != spins[b] => {
                        if rng.random::<f64>() < (-2.0 * w).exp() {
                            break;
                        }
                    }
                    _ => break,
                }
            }
        }
    }
}

/// Maximum-weight pseudoforest by greedy selection in decreasing weight:
/// an edge is kept if its component(s) would still hold at most one cycle.
fn split_pseudoforest(model: &ClassicalIsingModel) -> (Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>) {
    let mut order: Vec<usize> = (0..model.edges.len()).collect();
    order.sort_by(|&a, &b| model.edges[b].2.total_cmp(&model.edges[a].2).then(a.cmp(&b)));
    let mut uf = UnionFind::new(model.num_spins);
    let mut cyclic = vec![false; model.num_spins];
    let mut kept = Vec::new();
    let mut rest = Vec::new();
    for k in order {
        let (i, j, w) = model.edges[k];
        if w == 0.0 {
            continue;
        }
        let (ri, rj) = (uf.find(i as u32) as usize, uf.find(j as u32) as usize);
        if ri != rj {
            if cyclic[ri] && cyclic[rj] {
                rest.push((i, j, w));
            } else {
                let c = cyclic[ri] || cyclic[rj];
                uf.union(i as u32, j as u32);
                cyclic[uf.find(i as u32) as usize] = c;
                kept.push((i, j, w));
            }
        } else if !cyclic[ri] {
            cyclic[ri] = true;
            kept.push((i, j, w));
        } else {
            rest.push((i, j, w));
        }
    }
    (kept, rest)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorConfig {
    pub delta: f64,
    pub seed: u64,
    pub reference: Reference,
    /// Independent groups combined by the median.
    pub groups: usize,
    /// Initial rungs per unit of annealed weight.
    pub rung_density: f64,
    /// A rung is halved while `Var((b_{k+1} − b_k) E_R)` exceeds this.
    pub split_threshold: f64,
    pub max_split_depth: u32,
    pub pilot_samples: usize,
    /// Sweeps from an exact reference draw before sampling a rung.
    pub burn_in: usize,
    pub min_samples: usize,
    pub max_samples: usize,
    /// Per-group standard deviation target is `ln(1 + δ) / sigma_ratio`.
    pub sigma_ratio: f64,
    /// Minimum importance-weight effective sample fraction per rung.
    pub min_ess_fraction: f64,
}

impl EstimatorConfig {
    pub fn new(delta: f64, seed: u64) -> Self {
        Self {
            delta,
            seed,
            reference: Reference::Pseudoforest,
            groups: 3,
            rung_density: 10.0,
            split_threshold: 0.1,
            max_split_depth: 8,
            pilot_samples: 64,
            burn_in: 20,
            min_samples: 64,
            max_samples: 200_000,
            sigma_ratio: 2.5,
            min_ess_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RungDiagnostics {
    pub b_lo: f64,
    pub b_hi: f64,
    /// Pilot relative variance of the importance weights.
    pub relvar: f64,
    /// Pilot integrated autocorrelation estimate.
    pub tau: f64,
    /// Smallest effective-sample fraction over the groups.
    pub ess_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorDiagnostics {
    pub reference: Reference,
    pub log_reference: f64,
    pub annealed_edges: usize,
    pub annealed_weight: f64,
    pub samples_per_rung: usize,
    /// Set when `samples_per_rung` was clamped at `max_samples`.
    pub capped: bool,
    pub tau: f64,
    pub relvar_sum: f64,
    /// `log Z` per group, prefactor included.
    pub group_log_values: Vec<f64>,
    pub rungs: Vec<RungDiagnostics>,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionEstimate {
    /// `log Z̃`, prefactor included.
    pub log_value: f64,
    pub delta: f64,
    /// Design confidence; `None` when the sample budget was capped.
    pub confidence: Option<f64>,
    pub diagnostics: EstimatorDiagnostics,
}

impl PartitionEstimate {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

pub fn estimate_partition(model: &ClassicalIsingModel, delta: f64, seed: u64) -> Result<PartitionEstimate> {
    estimate_partition_with(model, &EstimatorConfig::new(delta, seed))
}

struct Rung {
    lo: f64,
    hi: f64,
    relvar: f64,
    tau: f64,
    spread: f64,
}

struct Annealer<'a> {
    num_spins: usize,
    reference: &'a ReferenceModel,
    fixed: &'a [(usize, usize, f64)],
    annealed: &'a [(usize, usize, f64)],
    burn_in: usize,
}

impl Annealer<'_> {
    fn kernel(&self, b: f64) -> SwKernel {
        SwKernel::new(
            self.num_spins,
            self.fixed
                .iter()
                .copied()
                .chain(self.annealed.iter().map(|&(i, j, w)| (i, j, b * w))),
        )
    }

    /// `(b_hi − b_lo) E_R` at `count` states drawn at `b_lo`.
    fn log_weights(&self, lo: f64, hi: f64, count: usize, stream_seed: u64, stream_id: u64) -> Vec<f64> {
        let mut r = rng::stream(stream_seed, stream_id);
        let mut spins = vec![1i8; self.num_spins];
        let db = hi - lo;
        let mut out = Vec::with_capacity(count);
        if lo == 0.0 {
            for _ in 0..count {
                self.reference.sample(&mut spins, &mut r);
                out.push(db * edge_energy(self.annealed, &spins));
            }
            return out;
        }
        let mut kernel = self.kernel(lo);
        self.reference.sample(&mut spins, &mut r);
        for _ in 0..self.burn_in {
            kernel.sweep(&mut spins, &mut r);
        }
        for _ in 0..count {
            kernel.sweep(&mut spins, &mut r);
            out.push(db * edge_energy(self.annealed, &spins));
        }
        out
    }

    fn pilot(&self, lo: f64, hi: f64, count: usize, seed: u64, id: u64) -> Rung {
        let ys = self.log_weights(lo, hi, count, seed, id);
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let spread = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let top = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ws: Vec<f64> = ys.iter().map(|y| (y - top).exp()).collect();
        let wm = ws.iter().sum::<f64>() / n;
        let wv = ws.iter().map(|w| (w - wm).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let relvar = wv / (wm * wm);
        let tau = if lo == 0.0 || spread <= 0.0 {
            1.0
        } else {
            let c1 = ys.windows(2).map(|p| (p[0] - mean) * (p[1] - mean)).sum::<f64>() / (n - 1.0);
            let rho1 = (c1 / spread).clamp(-0.99, 0.99);
            ((1.0 + rho1) / (1.0 - rho1)).clamp(1.0, 50.0)
        };
        Rung {
            lo,
            hi,
            relvar,
            tau,
            spread,
        }
    }
}

/// Mean of `exp(y)` in log space and the effective-sample fraction of the weights.
fn log_mean_exp(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let top = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (s1, s2) = ys.iter().fold((0.0, 0.0), |(a, b), y| {
        let w = (y - top).exp();
        (a + w, b + w * w)
    });
    (top + (s1 / n).ln(), s1 * s1 / (s2 * n))
}

const PILOT_LABEL: u64 = 0x0050_494c_4f54;

/// Annealed ratio estimate of `log Z` with median-of-groups combination.
pub fn estimate_partition_with(model: &ClassicalIsingModel, config: &EstimatorConfig) -> Result<PartitionEstimate> {
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(Error::Range {
            name: "delta",
            value: config.delta,
            expected: "(0, 1)",
        });
    }
    if config.groups == 0 || config.min_samples == 0 || config.max_samples < config.min_samples {
        return Err(Error::validation("estimator", "groups and sample bounds must be positive and ordered"));
    }
    let n = model.num_spins;
    let (fixed, annealed) = match config.reference {
        Reference::Uniform => (Vec::new(), model.edges.iter().copied().filter(|e| e.2 > 0.0).collect()),
        Reference::Pseudoforest => split_pseudoforest(model),
    };
    let reference = ReferenceModel::build(n, &fixed);
    let annealed_weight: f64 = annealed.iter().map(|e: &(usize, usize, f64)| e.2).sum();
    let mut diagnostics = EstimatorDiagnostics {
        reference: config.reference,
        log_reference: reference.log_z,
        annealed_edges: annealed.len(),
        annealed_weight,
        samples_per_rung: 0,
        capped: false,
        tau: 1.0,
        relvar_sum: 0.0,
        group_log_values: Vec::new(),
        rungs: Vec::new(),
        exact: annealed.is_empty(),
    };
    if annealed.is_empty() {
        let log_value = reference.log_z + model.log_prefactor;
        diagnostics.group_log_values = vec![log_value];
        return Ok(PartitionEstimate {
            log_value,
            delta: config.delta,
            confidence: Some(1.0),
            diagnostics,
        });
    }
    let annealer = Annealer {
        num_spins: n,
        reference: &reference,
        fixed: &fixed,
        annealed: &annealed,
        burn_in: config.burn_in,
    };
    let k0 = ((config.rung_density * annealed_weight).ceil() as usize).max(1);
    let pilot_seed = rng::derive_seed(config.seed, PILOT_LABEL);
    let initial: Vec<Rung> = (0..k0)
        .into_par_iter()
        .map(|k| {
            let lo = k as f64 / k0 as f64;
            let hi = (k + 1) as f64 / k0 as f64;
            annealer.pilot(lo, hi, config.pilot_samples, pilot_seed, k as u64)
        })
        .collect();
    let mut next_id = k0 as u64;
    let mut rungs = Vec::with_capacity(k0);
    for (k, rung) in initial.into_iter().enumerate() {
        let mut stack = vec![(rung, 0u32)];
        let mut done = Vec::new();
        while let Some((r, depth)) = stack.pop() {
            if r.spread <= config.split_threshold {
                done.push(r);
                continue;
            }
            if depth >= config.max_split_depth {
                return Err(Error::Diagnostic {
                    rung: k,
                    reason: format!(
                        "weight variance {:.3} above {} after {depth} splits",
                        r.spread, config.split_threshold
                    ),
                });
            }
            let mid = 0.5 * (r.lo + r.hi);
            let a = annealer.pilot(r.lo, mid, config.pilot_samples, pilot_seed, next_id);
            let b = annealer.pilot(mid, r.hi, config.pilot_samples, pilot_seed, next_id + 1);
            next_id += 2;
            stack.push((b, depth + 1));
            stack.push((a, depth + 1));
        }
        rungs.extend(done);
    }
    let relvar_sum: f64 = rungs.iter().map(|r| r.relvar).sum();
    let tau = if relvar_sum > 0.0 {
        rungs.iter().map(|r| r.tau * r.relvar).sum::<f64>() / relvar_sum
    } else {
        1.0
    };
    let target_sd = config.delta.ln_1p() / config.sigma_ratio;
    let wanted = (1.5 * tau * relvar_sum / (target_sd * target_sd)).ceil();
    let capped = wanted > config.max_samples as f64;
    let m = (wanted as usize).clamp(config.min_samples, config.max_samples);
    let burn_in = config.burn_in.max((5.0 * tau).ceil() as usize);
    let annealer = Annealer { burn_in, ..annealer };
    let jobs: Vec<(usize, usize)> = (0..config.groups)
        .flat_map(|g| (0..rungs.len()).map(move |k| (g, k)))
        .collect();
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(g, k)| {
            let seed = rng::derive_seed(config.seed, g as u64 + 1);
            log_mean_exp(&annealer.log_weights(rungs[k].lo, rungs[k].hi, m, seed, k as u64))
        })
        .collect();
    let mut group_logs = vec![reference.log_z + model.log_prefactor; config.groups];
    let mut ess = vec![f64::INFINITY; rungs.len()];
    for (&(g, k), &(lr, e)) in jobs.iter().zip(&results) {
        group_logs[g] += lr;
        ess[k] = ess[k].min(e);
    }
    if let Some(k) = ess.iter().position(|&e| e < config.min_ess_fraction) {
        return Err(Error::Diagnostic {
            rung: k,
            reason: format!("effective sample fraction {:.3} below {}", ess[k], config.min_ess_fraction),
        });
    }
    let log_value = median(&mut group_logs.clone());
    diagnostics.samples_per_rung = m;
    diagnostics.capped = capped;
    diagnostics.tau = tau;
    diagnostics.relvar_sum = relvar_sum;
    diagnostics.group_log_values = group_logs;
    diagnostics.rungs = rungs
        .iter()
        .zip(&ess)
        .map(|(r, &e)| RungDiagnostics {
            b_lo: r.lo,
            b_hi: r.hi,
            relvar: r.relvar,
            tau: r.tau,
            ess_fraction: e,
        })
        .collect();
    Ok(PartitionEstimate {
        log_value,
        delta: config.delta,
        confidence: if capped { None } else { Some(2.0 / 3.0) },
        diagnostics,
    })
}

/// End-to-end TIM estimate with its error budget.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimPartitionEstimate {
    pub estimate: PartitionEstimate,
    pub delta: f64,
    /// Trotter budget `ln(1 + δ/2)` on `|log Z′ − log Z|`.
    pub delta_trotter: f64,
    /// Estimator budget chosen so `(1 + δ/2)(1 + δ_est) = 1 + δ`.
    pub delta_estimator: f64,
    pub plan: TrotterPlan,
    pub floor: Option<FieldFloor>,
    /// Relative tolerance including the field-floor perturbation: `(1 + δ) e^{p} − 1`.
    pub combined_tolerance: f64,
    pub num_spins: usize,
    pub num_edges: usize,
}

impl TimPartitionEstimate {
    pub fn log_value(&self) -> f64 {
        self.estimate.log_value
    }
}

/// Floor fields, plan `r`, map to the classical model and estimate its partition sum.
pub fn estimate_tim_partition(tim: &TimModel, delta: f64, seed: u64) -> Result<TimPartitionEstimate> {
    estimate_tim_partition_with(tim, &EstimatorConfig::new(delta, seed))
}

pub fn estimate_tim_partition_with(tim: &TimModel, config: &EstimatorConfig) -> Result<TimPartitionEstimate> {
    let delta = config.delta;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Range {
            name: "delta",
            value: delta,
            expected: "(0, 1)",
        });
    }
    tim.require_ferromagnetic()?;
    let delta_trotter = (0.5 * delta).ln_1p();
    let delta_estimator = (1.0 + delta) / (1.0 + 0.5 * delta) - 1.0;
    let floor = trotter::floor_fields(tim, delta)?;
    let plan = trotter::plan_trotter(&floor.model, delta_trotter)?;
    let mapping: ClassicalMapping = trotter::map_to_classical(&floor.model, &plan, None)?;
    let sub = EstimatorConfig {
        delta: delta_estimator,
        ..config.clone()
    };
    let estimate = estimate_partition_with(&mapping.ising, &sub)?;
    let combined_tolerance = (1.0 + delta) * floor.log_perturbation.exp() - 1.0;
    Ok(TimPartitionEstimate {
        estimate,
        delta,
        delta_trotter,
        delta_estimator,
        plan,
        floor: (!floor.raised.is_empty()).then_some(floor),
        combined_tolerance,
        num_spins: mapping.ising.num_spins(),
        num_edges: mapping.ising.edges().len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_spin() -> ClassicalIsingModel {
        ClassicalIsingModel::new(2, vec![(0, 1, 1.0)], 0.0).unwrap()
    }

    #[test]
    fn energy_examples() {
        let m = two_spin();
        assert_eq!(energy(&m, &[1, 1]).unwrap(), 1.0);
        assert_eq!(energy(&m, &[1, -1]).unwrap(), -1.0);
        let free = ClassicalIsingModel::new(3, vec![], 0.0).unwrap();
        assert_eq!(energy(&free, &[1, -1, 1]).unwrap(), 0.0);
        assert!(energy(&m, &[1]).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let one = ClassicalIsingModel::new(1, vec![], 0.0).unwrap();
        assert!((partition_exact_enum(&one).unwrap() - 2f64.ln()).abs() < 1e-15);
        let z = 2.0 * 1f64.exp() + 2.0 * (-1f64).exp();
        assert!((partition_exact_enum(&two_spin()).unwrap() - z.ln()).abs() < 1e-14);
        assert!((z - 6.17232).abs() < 1e-5);
    }

    #[test]
    fn validation() {
        assert!(ClassicalIsingModel::new(2, vec![(0, 1, -0.1)], 0.0).is_err());
        assert!(ClassicalIsingModel::new(2, vec![(0, 0, 0.1)], 0.0).is_err());
        assert!(ClassicalIsingModel::new(2, vec![(0, 1, 0.1), (1, 0, 0.2)], 0.0).is_err());
        assert!(ClassicalIsingModel::new(2, vec![(0, 2, 0.1)], 0.0).is_err());
    }

    #[test]
    fn layered_matches_enumeration_on_ring() {
        // 3 layers of width 2, periodic.
        let mut edges = Vec::new();
        for l in 0..3 {
            edges.push((2 * l, 2 * l + 1, 0.3 + 0.1 * l as f64));
            for u in 0..2 {
                edges.push((2 * l + u, 2 * ((l + 1) % 3) + u, 0.7));
            }
        }
        let m = ClassicalIsingModel::new(6, edges, 0.25).unwrap();
        let a = partition_exact_enum(&m).unwrap();
        let b = partition_exact_layered(&m, 2).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        let single = partition_exact_layered(&m, 6).unwrap();
        assert!((a - single).abs() < 1e-12);
    }

    #[test]
    fn reference_partition_is_exact() {
        // Triangle plus pendant: one cycle, so the pseudoforest is the whole graph.
        let m = ClassicalIsingModel::new(4, vec![(0, 1, 0.8), (1, 2, 0.5), (0, 2, 0.3), (2, 3, 1.1)], 0.0).unwrap();
        let (kept, rest) = split_pseudoforest(&m);
        assert!(rest.is_empty());
        let r = ReferenceModel::build(4, &kept);
        assert!((r.log_z - partition_exact_enum(&m).unwrap()).abs() < 1e-12);
        let est = estimate_partition(&m, 0.1, 1).unwrap();
        assert!(est.diagnostics.exact);
    }

    #[test]
    fn no_edges_is_exact() {
        let m = ClassicalIsingModel::new(5, vec![], 0.0).unwrap();
        let est = estimate_partition(&m, 0.1, 3).unwrap();
        assert!((est.log_value - 5.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(est.confidence, Some(1.0));
    }

    #[test]
    fn beta_zero_sweep_is_uniform() {
        let m = two_spin();
        let mut r = rng::stream(8, 0);
        let mut counts = [0u32; 4];
        let mut spins = vec![1i8, 1];
        for _ in 0..40_000 {
            sw_sweep(&m, 0.0, &mut spins, &mut r).unwrap();
            let idx = (spins[0] < 0) as usize * 2 + (spins[1] < 0) as usize;
            counts[idx] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 500.0, "{counts:?}");
        }
        assert!(sw_sweep(&m, 1.5, &mut spins, &mut r).is_err());
    }

    #[test]
    fn strong_bond_locks_spins() {
        let m = ClassicalIsingModel::new(2, vec![(0, 1, 40.0)], 0.0).unwrap();
        let mut r = rng::stream(2, 0);
        let mut spins = vec![1i8, 1];
        for _ in 0..1000 {
            sw_sweep(&m, 1.0, &mut spins, &mut r).unwrap();
            assert_eq!(spins[0], spins[1]);
        }
    }

    #[test]
    fn two_spin_estimate_close() {
        let m = two_spin();
        let mut cfg = EstimatorConfig::new(0.05, 11);
        cfg.reference = Reference::Uniform;
        let est = estimate_partition_with(&m, &cfg).unwrap();
        assert!((est.value() / 6.17232 - 1.0).abs() < 0.05, "{}", est.value());
    }
}
