//! Small statistical tests used by the acceptance suite.

use serde::Serialize;

/// `P[X ≥ k]` for `X ~ Binomial(n, p)`, summed exactly in log space.
pub fn binomial_upper_tail(n: u64, k: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let ln_choose = |j: u64| -> f64 { (1..=j).map(|i| ((n - j + i) as f64 / i as f64).ln()).sum() };
    (k..=n)
        .map(|j| (ln_choose(j) + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Smallest `k` with `P[X ≥ k | p0] ≤ alpha`: the one-sided critical count for
/// rejecting `success rate ≤ p0`.
pub fn binomial_critical_count(n: u64, p0: f64, alpha: f64) -> u64 {
    (0..=n + 1)
        .find(|&k| binomial_upper_tail(n, k, p0) <= alpha)
        .unwrap_or(n + 1)
}

/// Counts at one walk length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayPoint {
    pub steps: usize,
    pub trials: u64,
    pub accepted: u64,
}

/// Binomial maximum-likelihood fit of `log p(L) = a + bL`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// `None` when no trial was accepted at any length.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// False when the likelihood keeps rising towards the lower slope bound,
    /// as happens when only one length has acceptances.
    pub identified: bool,
    /// `2(ℓ(b̂) − ℓ(b₀))` for the reference slope `b₀`, zero when `b̂ ≤ b₀`.
    pub likelihood_ratio: f64,
}

impl DecayFit {
    /// Signed distance of the reference slope in likelihood-ratio sigmas.
    pub fn excess_sigmas(&self) -> f64 {
        self.likelihood_ratio.sqrt()
    }
}

const SLOPE_RANGE: (f64, f64) = (-20.0, 2.0);

fn log_lik(points: &[DecayPoint], a: f64, b: f64) -> f64 {
    points
        .iter()
        .map(|p| {
            let eta = a + b * p.steps as f64;
            let fails = (p.trials - p.accepted) as f64;
            let mut l = 0.0;
            if p.accepted > 0 {
                l += p.accepted as f64 * eta;
            }
            if fails > 0.0 {
                l += fails * (-eta.exp()).ln_1p();
            }
            l
        })
        .sum()
}

/// `max_a ℓ(a, b)`; the maximiser is the root of a decreasing score.
fn profile(points: &[DecayPoint], b: f64) -> (f64, f64) {
    let successes: u64 = points.iter().map(|p| p.accepted).sum();
    if successes == 0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    let score = |a: f64| -> f64 {
        points
            .iter()
            .map(|p| {
                let e = (a + b * p.steps as f64).exp();
                p.accepted as f64 - (p.trials - p.accepted) as f64 * e / (1.0 - e)
            })
            .sum()
    };
    // η_L < 0 wherever a trial failed.
    let a_max = points
        .iter()
        .filter(|p| p.trials > p.accepted)
        .map(|p| -b * p.steps as f64)
        .fold(f64::INFINITY, f64::min);
    let mut hi = if a_max.is_finite() { a_max - 1e-12 } else { 0.0 };
    let mut lo = hi - 1.0;
    while score(lo) < 0.0 {
        lo = hi - 2.0 * (hi - lo);
    }
    if score(hi) > 0.0 {
        return (hi, log_lik(points, hi, b));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    (a, log_lik(points, a, b))
}

/// Fits the decay and tests the slope against `reference`.
pub fn fit_decay(points: &[DecayPoint], reference: f64) -> DecayFit {
    let successes: u64 = points.iter().map(|p| p.accepted).sum();
    if successes == 0 {
        return DecayFit {
            slope: None,
            intercept: None,
            identified: false,
            likelihood_ratio: 0.0,
        };
    }
    // The profile likelihood is concave in b; golden-section search.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = SLOPE_RANGE;
    let f = |b: f64| profile(points, b).1;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let b = 0.5 * (lo + hi);
    let (a, best) = profile(points, b);
    let likelihood_ratio = if b <= reference {
        0.0
    } else {
        (2.0 * (best - profile(points, reference).1)).max(0.0)
    };
    DecayFit {
        slope: Some(b),
        intercept: Some(a),
        identified: b > SLOPE_RANGE.0 + 1e-6,
        likelihood_ratio,
    }
}
