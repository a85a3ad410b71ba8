//! The guided Poisson branching walk and the verifier built on it.
//!
//! A population `γ_t` of walkers on bitstrings evolves by
//! `γ_{t+1}(y) = Σ_x Pois(γ_t(x) P(x,y))` with `P(x,y) = φ(y)G(x,y)/φ(x)`.
//! The verifier starts from one walker at `x_M`, aborts on overflow or
//! extinction and accepts iff the population survives `L` steps.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::BasisState;
use crate::error::{Error, Result};
use crate::guiding::{GuideKind, RegularizedGuide};
use crate::model::{protocol_params, GreenOperator, ProblemInstance, StoquasticHamiltonian};
use crate::oracle;
use crate::rng;
use crate::stats::RunningStats;

/// Entries of `G` above `-NEGATIVE_TOL` are clamped to zero; below it they are an error.
pub const NEGATIVE_TOL: f64 = 1e-12;
/// Means below this use sequential-search inversion; above, rejection sampling.
pub const INVERSION_LIMIT: f64 = 10.0;
/// Rows cached per trial before the cache stops growing.
pub const ROW_CACHE_LIMIT: usize = 1 << 16;
/// Trials per work unit; fixed so that aggregation order never depends on scheduling.
const TRIAL_BLOCK: u64 = 256;

/// Sparse occupation numbers; stored counts are always ≥ 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WalkerPopulation {
    occupations: BTreeMap<BasisState, u64>,
    total: u64,
}

impl WalkerPopulation {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(x: BasisState) -> Self {
        let mut p = Self::default();
        p.add(x, 1);
        p
    }

    pub fn add(&mut self, x: BasisState, count: u64) {
        if count == 0 {
            return;
        }
        *self.occupations.entry(x).or_insert(0) += count;
        self.total += count;
    }

    pub fn count(&self, x: BasisState) -> u64 {
        self.occupations.get(&x).copied().unwrap_or(0)
    }

    /// `Γ = Σ_x γ(x)`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Number of occupied bitstrings.
    pub fn support_size(&self) -> usize {
        self.occupations.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (BasisState, u64)> + '_ {
        self.occupations.iter().map(|(&x, &c)| (x, c))
    }
}

/// Exact Poisson draw. Zero mean gives zero.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < INVERSION_LIMIT {
        // Sequential search on the CDF.
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            let next = cdf + p;
            if next == cdf {
                break;
            }
            cdf = next;
        }
        return k;
    }
    let d = Poisson::new(mean).expect("finite positive mean");
    d.sample(rng) as u64
}

/// Row `x` of `G = I − β(H − λ_M I)`: the diagonal entry plus every state
/// reached by a nonzero off-diagonal block entry. Sorted by `y`; zero
/// off-diagonal entries are dropped, the diagonal is always present.
pub fn green_row(
    h: &StoquasticHamiltonian,
    green: GreenOperator,
    x: BasisState,
) -> Result<Vec<(BasisState, f64)>> {
    let beta = green.beta;
    let mut entries: Vec<(u64, f64)> = Vec::new();
    entries.push((x.0, 1.0 - beta * (h.diagonal(x.0) - green.lambda_m)));
    for term in h.terms() {
        let i = term.local_index(x.0);
        for j in 0..term.dim() {
            if j == i {
                continue;
            }
            let v = term.entry(i, j);
            if v != 0.0 {
                entries.push((term.embed(x.0, j), -beta * v));
            }
        }
    }
    entries.sort_unstable_by_key(|e| e.0);
    let mut row: Vec<(BasisState, f64)> = Vec::with_capacity(entries.len());
    for (y, v) in entries {
        match row.last_mut() {
            Some(last) if last.0 .0 == y => last.1 += v,
            _ => row.push((BasisState(y), v)),
        }
    }
    for &(y, v) in &row {
        if v < -NEGATIVE_TOL {
            return Err(Error::Consistency(format!(
                "G({x}, {y}) = {v:e} is negative; check stoquasticity and that λ_M ≥ -J"
            )));
        }
    }
    row.retain(|e| e.0 == x || e.1 > 0.0);
    for e in &mut row {
        e.1 = e.1.max(0.0);
    }
    Ok(row)
}

/// `P(x,y) = φ(y) g_xy / φ(x)` for one Green-operator row.
pub fn transition_row(
    green_row: &[(BasisState, f64)],
    guide: &RegularizedGuide,
    x: BasisState,
) -> Vec<(BasisState, f64)> {
    let phi_x = guide.value(x);
    green_row
        .iter()
        .map(|&(y, g)| (y, guide.value(y) * g / phi_x))
        .collect()
}

/// Per-trial memo of transition rows.
#[derive(Default)]
pub struct RowCache {
    rows: HashMap<BasisState, Vec<(BasisState, f64)>>,
}

impl RowCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// The Hamiltonian, Green operator and guide that define `P`.
#[derive(Clone, Copy)]
pub struct BranchingWalk<'a> {
    hamiltonian: &'a StoquasticHamiltonian,
    green: GreenOperator,
    guide: &'a RegularizedGuide,
}

impl<'a> BranchingWalk<'a> {
    pub fn new(
        hamiltonian: &'a StoquasticHamiltonian,
        green: GreenOperator,
        guide: &'a RegularizedGuide,
    ) -> Result<Self> {
        if guide.n() != hamiltonian.n() {
            return Err(Error::validation(
                "guide",
                format!("guide has {} qubits, Hamiltonian has {}", guide.n(), hamiltonian.n()),
            ));
        }
        Ok(Self {
            hamiltonian,
            green,
            guide,
        })
    }

    pub fn green(&self) -> GreenOperator {
        self.green
    }

    pub fn transition_row(&self, x: BasisState) -> Result<Vec<(BasisState, f64)>> {
        let g = green_row(self.hamiltonian, self.green, x)?;
        Ok(transition_row(&g, self.guide, x))
    }

    fn with_row<T>(
        &self,
        x: BasisState,
        cache: &mut RowCache,
        f: impl FnOnce(&[(BasisState, f64)]) -> T,
    ) -> Result<T> {
        if let Some(row) = cache.rows.get(&x) {
            return Ok(f(row));
        }
        let row = self.transition_row(x)?;
        let out = f(&row);
        if cache.rows.len() < ROW_CACHE_LIMIT {
            cache.rows.insert(x, row);
        }
        Ok(out)
    }

    /// One branching step; independent Poisson draws per occupied `(x, y)`.
    pub fn step<R: Rng + ?Sized>(
        &self,
        pop: &WalkerPopulation,
        rng: &mut R,
        cache: &mut RowCache,
    ) -> Result<WalkerPopulation> {
        let mut next = WalkerPopulation::empty();
        for (x, count) in pop.iter() {
            self.with_row(x, cache, |row| {
                for &(y, p) in row {
                    next.add(y, sample_poisson(count as f64 * p, rng));
                }
            })?;
        }
        Ok(next)
    }

    /// Runs one walk from `{x_M: 1}`.
    pub fn run<R: Rng + ?Sized>(
        &self,
        start: BasisState,
        limits: &RunLimits,
        rng: &mut R,
        cache: &mut RowCache,
    ) -> Result<WalkOutcome> {
        let mut pop = WalkerPopulation::single(start);
        let mut trajectory = vec![pop.total()];
        let overflow = |t: usize, g: u64| limits.gamma_max.filter(|&m| g > m).map(|_| t);
        if let Some(step) = overflow(0, pop.total()) {
            return Ok(WalkOutcome::rejected(RejectReason::Overflow { step }, trajectory));
        }
        for t in 1..=limits.steps {
            pop = self.step(&pop, rng, cache)?;
            trajectory.push(pop.total());
            if let Some(step) = overflow(t, pop.total()) {
                return Ok(WalkOutcome::rejected(RejectReason::Overflow { step }, trajectory));
            }
            if pop.is_empty() && limits.early_exit {
                return Ok(WalkOutcome::rejected(RejectReason::Extinct { step: t }, trajectory));
            }
        }
        if pop.is_empty() {
            let step = trajectory.iter().position(|&g| g == 0).unwrap_or(limits.steps);
            return Ok(WalkOutcome::rejected(RejectReason::Extinct { step }, trajectory));
        }
        Ok(WalkOutcome {
            verdict: Verdict::Accept,
            reject_reason: None,
            trajectory,
        })
    }
}

/// Step count and abort rules for one walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RunLimits {
    pub steps: usize,
    /// `None` disables the overflow test.
    pub gamma_max: Option<u64>,
    /// Stop as soon as the population dies out.
    pub early_exit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkConfig {
    pub steps: usize,
    pub gamma_max: u64,
    pub lambda_m: f64,
    pub x_m: BasisState,
    pub seed: u64,
    pub trials: u64,
    pub early_exit: bool,
}

impl WalkConfig {
    pub fn new(steps: usize, gamma_max: u64, lambda_m: f64, x_m: BasisState, seed: u64, trials: u64) -> Self {
        Self {
            steps,
            gamma_max,
            lambda_m,
            x_m,
            seed,
            trials,
            early_exit: true,
        }
    }

    pub fn limits(&self) -> RunLimits {
        RunLimits {
            steps: self.steps,
            gamma_max: Some(self.gamma_max),
            early_exit: self.early_exit,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RejectReason {
    Overflow { step: usize },
    Extinct { step: usize },
    /// The witness failed its format check before any walk ran.
    MalformedWitness { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WalkOutcome {
    pub verdict: Verdict,
    pub reject_reason: Option<RejectReason>,
    /// `Γ_0, Γ_1, …` up to the step at which the walk stopped.
    pub trajectory: Vec<u64>,
}

impl WalkOutcome {
    fn rejected(reason: RejectReason, trajectory: Vec<u64>) -> Self {
        Self {
            verdict: Verdict::Reject,
            reject_reason: Some(reason),
            trajectory,
        }
    }

    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accept
    }
}

fn check_witness(instance: &ProblemInstance, config: &WalkConfig) -> Result<std::result::Result<GreenOperator, String>> {
    let params = protocol_params(instance)?;
    let n = instance.hamiltonian.n();
    if n < 64 && config.x_m.0 >> n != 0 {
        return Ok(Err(format!("x_M = {} has bits beyond qubit {}", config.x_m.0, n - 1)));
    }
    if let Err(e) = params.check_witness_energy(config.lambda_m, instance.lambda_yes) {
        return Ok(Err(e.to_string()));
    }
    Ok(Ok(params.green(config.lambda_m)))
}

/// One verification run: witness format check, then the walk.
pub fn run_walk<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    guide: &RegularizedGuide,
    config: &WalkConfig,
    rng: &mut R,
) -> Result<WalkOutcome> {
    let green = match check_witness(instance, config)? {
        Ok(g) => g,
        Err(reason) => {
            return Ok(WalkOutcome::rejected(RejectReason::MalformedWitness { reason }, Vec::new()));
        }
    };
    let walk = BranchingWalk::new(&instance.hamiltonian, green, guide)?;
    walk.run(config.x_m, &config.limits(), rng, &mut RowCache::new())
}

/// Survivor count and population sum at one step, over all trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub step: usize,
    /// Trials whose walk was still running at this step.
    pub running: u64,
    /// Mean `Γ_t` over those trials.
    pub mean_population: f64,
    pub max_population: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcceptanceEstimate {
    pub trials: u64,
    pub accepted: u64,
    pub p_hat: f64,
    /// Binomial standard error `sqrt(p(1-p)/T)`.
    pub stderr: f64,
    pub overflow: u64,
    pub extinct: u64,
    pub malformed: Option<String>,
    pub per_step: Vec<StepStats>,
}

#[derive(Clone, Default)]
struct Tally {
    accepted: u64,
    overflow: u64,
    extinct: u64,
    running: Vec<u64>,
    sums: Vec<u128>,
    maxima: Vec<u64>,
}

impl Tally {
    fn new(steps: usize) -> Self {
        Self {
            running: vec![0; steps + 1],
            sums: vec![0; steps + 1],
            maxima: vec![0; steps + 1],
            ..Self::default()
        }
    }

    fn record(&mut self, outcome: &WalkOutcome) {
        match outcome.reject_reason {
            None => self.accepted += 1,
            Some(RejectReason::Overflow { .. }) => self.overflow += 1,
            Some(RejectReason::Extinct { .. }) => self.extinct += 1,
            Some(RejectReason::MalformedWitness { .. }) => {}
        }
        for (t, &g) in outcome.trajectory.iter().enumerate() {
            self.running[t] += 1;
            self.sums[t] += g as u128;
            self.maxima[t] = self.maxima[t].max(g);
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.accepted += other.accepted;
        self.overflow += other.overflow;
        self.extinct += other.extinct;
        for t in 0..self.running.len() {
            self.running[t] += other.running[t];
            self.sums[t] += other.sums[t];
            self.maxima[t] = self.maxima[t].max(other.maxima[t]);
        }
        self
    }
}

fn blocks(trials: u64) -> Vec<(u64, u64)> {
    (0..trials.div_ceil(TRIAL_BLOCK))
        .map(|b| (b * TRIAL_BLOCK, ((b + 1) * TRIAL_BLOCK).min(trials)))
        .collect()
}

/// Runs `trials` independent walks, trial `i` on stream `(seed, i)`.
/// Integer aggregation makes the result independent of thread count.
pub fn estimate_acceptance(
    instance: &ProblemInstance,
    guide: &RegularizedGuide,
    config: &WalkConfig,
) -> Result<AcceptanceEstimate> {
    if config.trials == 0 {
        return Err(Error::validation("trials", "must be at least 1"));
    }
    let green = match check_witness(instance, config)? {
        Ok(g) => g,
        Err(reason) => {
            return Ok(AcceptanceEstimate {
                trials: config.trials,
                accepted: 0,
                p_hat: 0.0,
                stderr: 0.0,
                overflow: 0,
                extinct: 0,
                malformed: Some(reason),
                per_step: Vec::new(),
            });
        }
    };
    let walk = BranchingWalk::new(&instance.hamiltonian, green, guide)?;
    estimate_walk_acceptance(&walk, config.x_m, &config.limits(), config.trials, config.seed)
}

/// Acceptance statistics of `trials` walks with the given limits, no witness check.
pub fn estimate_walk_acceptance(
    walk: &BranchingWalk<'_>,
    start: BasisState,
    limits: &RunLimits,
    trials: u64,
    seed: u64,
) -> Result<AcceptanceEstimate> {
    if trials == 0 {
        return Err(Error::validation("trials", "must be at least 1"));
    }
    let tallies: Vec<Tally> = blocks(trials)
        .into_par_iter()
        .map(|(lo, hi)| -> Result<Tally> {
            let mut tally = Tally::new(limits.steps);
            let mut cache = RowCache::new();
            for trial in lo..hi {
                let mut r = rng::stream(seed, trial);
                tally.record(&walk.run(start, limits, &mut r, &mut cache)?);
            }
            Ok(tally)
        })
        .collect::<Result<_>>()?;
    let total = tallies
        .into_iter()
        .fold(Tally::new(limits.steps), Tally::merge);
    let t = trials as f64;
    let p_hat = total.accepted as f64 / t;
    let per_step = (0..=limits.steps)
        .map(|s| StepStats {
            step: s,
            running: total.running[s],
            mean_population: if total.running[s] > 0 {
                total.sums[s] as f64 / total.running[s] as f64
            } else {
                0.0
            },
            max_population: total.maxima[s],
        })
        .collect();
    Ok(AcceptanceEstimate {
        trials,
        accepted: total.accepted,
        p_hat,
        stderr: (p_hat * (1.0 - p_hat) / t).sqrt(),
        overflow: total.overflow,
        extinct: total.extinct,
        malformed: None,
        per_step,
    })
}

/// Monte Carlo moments of `Γ_t` with no overflow test and no early exit.
#[derive(Clone, Debug, Serialize)]
pub struct PopulationMoments {
    pub trials: u64,
    /// Statistics of `Γ_t`, `t = 0..=L`.
    pub first: Vec<RunningStats>,
    /// Statistics of `Γ_t²`.
    pub second: Vec<RunningStats>,
}

/// Unconstrained walks for comparison with the exact moment formulas.
pub fn sample_population_moments(
    walk: &BranchingWalk<'_>,
    start: BasisState,
    steps: usize,
    trials: u64,
    seed: u64,
) -> Result<PopulationMoments> {
    let limits = RunLimits {
        steps,
        gamma_max: None,
        early_exit: false,
    };
    let parts: Vec<(Vec<RunningStats>, Vec<RunningStats>)> = blocks(trials)
        .into_par_iter()
        .map(|(lo, hi)| -> Result<_> {
            let mut first = vec![RunningStats::default(); steps + 1];
            let mut second = vec![RunningStats::default(); steps + 1];
            let mut cache = RowCache::new();
            for trial in lo..hi {
                let mut r = rng::stream(seed, trial);
                let out = walk.run(start, &limits, &mut r, &mut cache)?;
                for (t, &g) in out.trajectory.iter().enumerate() {
                    let g = g as f64;
                    first[t].push(g);
                    second[t].push(g * g);
                }
            }
            Ok((first, second))
        })
        .collect::<Result<_>>()?;
    let mut first = vec![RunningStats::default(); steps + 1];
    let mut second = vec![RunningStats::default(); steps + 1];
    for (f, s) in &parts {
        for t in 0..=steps {
            first[t].merge(&f[t]);
            second[t].merge(&s[t]);
        }
    }
    Ok(PopulationMoments {
        trials,
        first,
        second,
    })
}

/// Upper bounds on `E[Γ_L]` for a no-instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Envelope {
    /// `‖φ‖ / φ(x_M)`.
    pub ratio: f64,
    /// `(1 − Δ)^L`.
    pub decay: f64,
    /// `ratio · decay`.
    pub bound: f64,
    /// `2^{3n/2 + 1} (1 − Δ)^L`, valid for any regularized guide.
    pub generic_cap: f64,
}

impl Envelope {
    /// The envelope as a probability bound.
    pub fn probability_bound(&self) -> f64 {
        self.bound.min(1.0)
    }
}

pub fn soundness_envelope(n: usize, guide_norm: f64, phi_xm: f64, gap: f64, steps: usize) -> Result<Envelope> {
    if !(0.0..=1.0).contains(&gap) {
        return Err(Error::Range {
            name: "gap",
            value: gap,
            expected: "[0, 1]",
        });
    }
    if !(phi_xm > 0.0) || !(guide_norm > 0.0) {
        return Err(Error::validation("guide", "norm and φ(x_M) must be positive"));
    }
    let ratio = guide_norm / phi_xm;
    let decay = (1.0 - gap).powi(steps.min(i32::MAX as usize) as i32);
    Ok(Envelope {
        ratio,
        decay,
        bound: ratio * decay,
        generic_cap: 2f64.powf(1.5 * n as f64 + 1.0) * decay,
    })
}

/// Default multiplier in `Γ_max = ceil(overflow_c · L)`.
pub const DEFAULT_OVERFLOW_C: f64 = 10.0;

/// `L = max(1, ceil(c·n/Δ))` and `Γ_max = ceil(overflow_c · L)`.
pub fn default_lengths(n: usize, gap: f64, safety_c: f64, overflow_c: f64) -> Result<(usize, u64)> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::Range {
            name: "gap",
            value: gap,
            expected: "(0, inf)",
        });
    }
    if !(safety_c > 0.0 && overflow_c > 0.0) {
        return Err(Error::validation("safety_c", "constants must be positive"));
    }
    let steps = ((safety_c * n as f64 / gap).ceil() as usize).max(1);
    let gamma_max = ((overflow_c * steps as f64).ceil() as u64).max(1);
    Ok((steps, gamma_max))
}

/// Acceptance of the OR of `rounds` independent runs: `1 − (1 − p)^rounds`.
pub fn amplified_acceptance(p: f64, rounds: u32) -> f64 {
    1.0 - (1.0 - p.clamp(0.0, 1.0)).powi(rounds as i32)
}

/// How `choose_start` picks `x_M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartMode {
    /// Argmax of `π` over the good set, from the exact ground state.
    Oracle,
    /// Sampling from `φ²` for product guides, else the best of `probes` random states.
    Heuristic { probes: usize },
}

/// Picks a start state `x_M`. Oracle-mode ties go to the lexicographically first bitstring.
pub fn choose_start<R: Rng + ?Sized>(
    h: &StoquasticHamiltonian,
    guide: &RegularizedGuide,
    mode: StartMode,
    rng: &mut R,
) -> Result<BasisState> {
    let n = h.n();
    match mode {
        StartMode::Oracle => {
            let good = oracle::pi_and_good_set(h, guide)?;
            let best = good
                .members
                .iter()
                .map(|&x| good.pi[x.index()])
                .fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-12 * best.abs().max(1.0);
            good.members
                .iter()
                .copied()
                .filter(|x| good.pi[x.index()] >= best - tol)
                .min_by_key(|x| x.lex_key(n))
                .ok_or_else(|| Error::Consistency("good set is empty".into()))
        }
        StartMode::Heuristic { probes } => {
            let base = guide.base();
            if let Some(ps) = base.product_probabilities() {
                let mut x = 0u64;
                for (q, p) in ps.iter().enumerate() {
                    if rng.random::<f64>() < *p {
                        x |= 1 << q;
                    }
                }
                return Ok(BasisState(x));
            }
            let mask = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
            if base.kind() == GuideKind::Uniform {
                return Ok(BasisState(rng.random::<u64>() & mask));
            }
            let mut best = (BasisState(0), base.amplitude(BasisState(0)));
            for _ in 0..probes {
                let x = BasisState(rng.random::<u64>() & mask);
                let a = base.amplitude(x);
                if a > best.1 {
                    best = (x, a);
                }
            }
            if !(best.1 > 0.0) {
                log::warn!("no probed state has positive guide amplitude; starting from all zeros");
                return Ok(BasisState(0));
            }
            Ok(best.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guiding::GuidingState;
    use crate::model::LocalTerm;
    use nalgebra::DMatrix;
    use rand::SeedableRng;

    fn minus_x() -> StoquasticHamiltonian {
        let t = LocalTerm::from_rows(vec![0], &[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        StoquasticHamiltonian::new(1, vec![t]).unwrap()
    }

    #[test]
    fn minus_x_green_row() {
        let h = minus_x();
        let g = GreenOperator::new(0.5, -1.0).unwrap();
        let row = green_row(&h, g, BasisState(0)).unwrap();
        assert_eq!(row, vec![(BasisState(0), 0.5), (BasisState(1), 0.5)]);
    }

    #[test]
    fn diagonal_hamiltonian_has_single_entry() {
        let t = LocalTerm::new(vec![0, 1], DMatrix::from_diagonal(&nalgebra::dvector![1.0, -1.0, -1.0, 1.0]))
            .unwrap();
        let h = StoquasticHamiltonian::new(2, vec![t]).unwrap();
        let g = GreenOperator::for_hamiltonian(&h, -1.0).unwrap();
        for x in 0..4 {
            let row = green_row(&h, g, BasisState(x)).unwrap();
            assert_eq!(row.len(), 1);
            assert_eq!(row[0].0, BasisState(x));
        }
    }

    #[test]
    fn lambda_below_minus_j_is_inconsistent() {
        let h = minus_x();
        let g = GreenOperator::new(0.5, -5.0).unwrap();
        assert!(matches!(green_row(&h, g, BasisState(0)), Err(Error::Consistency(_))));
    }

    #[test]
    fn transition_row_ratio() {
        let table = GuidingState::from_table(1, vec![0.5, 0.25], GuideKind::User).unwrap();
        let guide = RegularizedGuide::new(table);
        let row = transition_row(&[(BasisState(1), 0.5)], &guide, BasisState(0));
        assert_eq!(row, vec![(BasisState(1), 0.25)]);
    }

    #[test]
    fn uniform_guide_transition_equals_green() {
        let h = minus_x();
        let guide = RegularizedGuide::new(GuidingState::uniform(1));
        let g = green_row(&h, GreenOperator::new(0.5, -1.0).unwrap(), BasisState(1)).unwrap();
        assert_eq!(transition_row(&g, &guide, BasisState(1)), g);
    }

    #[test]
    fn empty_population_is_absorbing() {
        let h = minus_x();
        let guide = RegularizedGuide::new(GuidingState::uniform(1));
        let walk = BranchingWalk::new(&h, GreenOperator::new(0.5, -1.0).unwrap(), &guide).unwrap();
        let mut r = rng::stream(1, 0);
        let next = walk.step(&WalkerPopulation::empty(), &mut r, &mut RowCache::new()).unwrap();
        assert!(next.is_empty());
    }

    #[test]
    fn zero_gamma_max_overflows_at_start() {
        let h = minus_x();
        let inst = ProblemInstance::new(h, -0.9, 0.5).unwrap();
        let guide = RegularizedGuide::new(GuidingState::uniform(1));
        let cfg = WalkConfig::new(5, 0, -1.0, BasisState(0), 3, 1);
        let out = run_walk(&inst, &guide, &cfg, &mut rng::stream(3, 0)).unwrap();
        assert_eq!(out.reject_reason, Some(RejectReason::Overflow { step: 0 }));
    }

    #[test]
    fn malformed_witness_is_format_reject() {
        let inst = ProblemInstance::new(minus_x(), -0.9, 0.5).unwrap();
        let guide = RegularizedGuide::new(GuidingState::uniform(1));
        let cfg = WalkConfig::new(5, 10, -0.5, BasisState(0), 3, 4);
        let out = run_walk(&inst, &guide, &cfg, &mut rng::stream(3, 0)).unwrap();
        assert!(matches!(out.reject_reason, Some(RejectReason::MalformedWitness { .. })));
        let est = estimate_acceptance(&inst, &guide, &cfg).unwrap();
        assert!(est.malformed.is_some());
        assert_eq!((est.p_hat, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn all_reject_gives_zero_estimate() {
        let inst = ProblemInstance::new(minus_x(), -0.9, 0.5).unwrap();
        let guide = RegularizedGuide::new(GuidingState::uniform(1));
        let cfg = WalkConfig::new(5, 0, -1.0, BasisState(0), 9, 50);
        let est = estimate_acceptance(&inst, &guide, &cfg).unwrap();
        assert_eq!((est.p_hat, est.stderr), (0.0, 0.0));
        assert_eq!(est.overflow, 50);
    }

    #[test]
    fn extinction_stops_the_walk() {
        let inst = ProblemInstance::new(minus_x(), -0.9, 0.5).unwrap();
        let guide = RegularizedGuide::new(GuidingState::uniform(1));
        let cfg = WalkConfig::new(200, 1_000_000, -1.0, BasisState(0), 5, 1);
        for trial in 0..200 {
            let out = run_walk(&inst, &guide, &cfg, &mut rng::stream(5, trial)).unwrap();
            if let Some(RejectReason::Extinct { step }) = out.reject_reason {
                assert_eq!(out.trajectory.len(), step + 1);
                assert_eq!(*out.trajectory.last().unwrap(), 0);
                assert!(out.trajectory[..step].iter().all(|&g| g > 0));
                return;
            }
        }
        panic!("no extinct trial in 200 critical walks");
    }

    #[test]
    fn estimate_is_deterministic() {
        let inst = ProblemInstance::new(minus_x(), -0.9, 0.5).unwrap();
        let guide = RegularizedGuide::new(GuidingState::uniform(1));
        let cfg = WalkConfig::new(20, 200, -1.0, BasisState(0), 77, 3000);
        let a = estimate_acceptance(&inst, &guide, &cfg).unwrap();
        let b = estimate_acceptance(&inst, &guide, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn poisson_small_and_large_means() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for &mean in &[0.3, 4.0, 25.0] {
            let m = 40_000;
            let xs: Vec<f64> = (0..m).map(|_| sample_poisson(mean, &mut r) as f64).collect();
            let avg = xs.iter().sum::<f64>() / m as f64;
            let var = xs.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (m - 1) as f64;
            assert!((avg - mean).abs() < 5.0 * (mean / m as f64).sqrt(), "mean {mean}: {avg}");
            assert!((var / mean - 1.0).abs() < 0.05, "var {mean}: {var}");
        }
        assert_eq!(sample_poisson(0.0, &mut r), 0);
    }

    #[test]
    fn envelope_examples() {
        let e = soundness_envelope(1, 1.0, 1.0, 0.1, 200).unwrap();
        assert!((e.bound - 7.055e-10).abs() < 1e-12);
        let e0 = soundness_envelope(3, 2.0, 0.5, 0.3, 0).unwrap();
        assert_eq!(e0.bound, 4.0);
        let flat = soundness_envelope(3, 2.0, 0.5, 0.0, 1000).unwrap();
        assert_eq!(flat.bound, flat.ratio);
    }

    #[test]
    fn default_length_examples() {
        assert_eq!(default_lengths(4, 0.25, 3.0, 10.0).unwrap(), (48, 480));
        assert_eq!(default_lengths(2, 10.0, 1.0, 10.0).unwrap().0, 1);
    }

    #[test]
    fn amplification_formula() {
        assert!((amplified_acceptance(0.5, 3) - 0.875).abs() < 1e-15);
        assert_eq!(amplified_acceptance(0.0, 10), 0.0);
    }

    #[test]
    fn start_for_minus_x_is_zero() {
        let h = minus_x();
        let guide = RegularizedGuide::new(GuidingState::uniform(1));
        let mut r = rng::stream(0, 0);
        assert_eq!(choose_start(&h, &guide, StartMode::Oracle, &mut r).unwrap(), BasisState(0));
    }

    #[test]
    fn product_guide_start_is_deterministic() {
        let t = LocalTerm::from_rows(vec![0, 1], &[
            vec![0.0, -1.0, -1.0, 0.0],
            vec![-1.0, 0.0, 0.0, -1.0],
            vec![-1.0, 0.0, 0.0, -1.0],
            vec![0.0, -1.0, -1.0, 0.0],
        ])
        .unwrap();
        let h = StoquasticHamiltonian::new(2, vec![t]).unwrap();
        let guide = RegularizedGuide::new(GuidingState::product(&[1.0, 0.0]).unwrap());
        let mut r = rng::stream(0, 0);
        let x = choose_start(&h, &guide, StartMode::Heuristic { probes: 8 }, &mut r).unwrap();
        assert_eq!(x.to_bitstring(2), "10");
    }
}
