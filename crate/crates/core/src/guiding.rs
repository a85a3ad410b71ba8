//! Guiding states: non-negative amplitude functions `x → φ_M(x)`, their
//! regularization into `[φ_min, 1]`, and the padding construction that
//! guarantees every amplitude is at least `2^{-n-1}`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::basis::BasisState;
use crate::error::{Error, Result};
use crate::model::StoquasticHamiltonian;
use crate::oracle;

/// Largest `n` for which amplitude sums are computed by direct summation.
pub const MAX_SUMMED_QUBITS: usize = 20;
/// Tolerance on `Σ ω(x)^2 = 1` when padding.
pub const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuideKind {
    Uniform,
    Product,
    ExactOracle,
    Padded,
    User,
}

type AmplitudeFn = dyn Fn(BasisState) -> f64 + Send + Sync;

#[derive(Clone)]
enum Source {
    Uniform(f64),
    /// `(sqrt(1 - p_u), sqrt(p_u))` per qubit.
    Product(Arc<[(f64, f64)]>),
    Table(Arc<[f64]>),
    Padded {
        base: Arc<GuidingState>,
        scale: f64,
        offset: f64,
    },
    Function(Arc<AmplitudeFn>),
}

/// A pure amplitude evaluator on `n` qubits.
#[derive(Clone)]
pub struct GuidingState {
    n: usize,
    kind: GuideKind,
    source: Source,
}

impl fmt::Debug for GuidingState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GuidingState")
            .field("n", &self.n)
            .field("kind", &self.kind)
            .finish()
    }
}

impl GuidingState {
    /// `2^{-n/2}` everywhere.
    pub fn uniform(n: usize) -> Self {
        Self {
            n,
            kind: GuideKind::Uniform,
            source: Source::Uniform((-(n as f64) * 0.5 * std::f64::consts::LN_2).exp()),
        }
    }

    /// `Π_u (x_u ? √p_u : √(1−p_u))`.
    pub fn product(probabilities: &[f64]) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::validation("product", "needs one probability per qubit"));
        }
        if let Some(i) = probabilities.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::validation(
                format!("product[{i}]"),
                format!("probability {} outside [0, 1]", probabilities[i]),
            ));
        }
        let factors: Vec<(f64, f64)> = probabilities.iter().map(|&p| ((1.0 - p).sqrt(), p.sqrt())).collect();
        Ok(Self {
            n: probabilities.len(),
            kind: GuideKind::Product,
            source: Source::Product(factors.into()),
        })
    }

    /// Amplitude table indexed by basis state.
    pub fn from_table(n: usize, amplitudes: Vec<f64>, kind: GuideKind) -> Result<Self> {
        if n >= usize::BITS as usize || amplitudes.len() != 1usize << n {
            return Err(Error::validation(
                "guide",
                format!("table needs 2^{n} entries, got {}", amplitudes.len()),
            ));
        }
        if let Some(i) = amplitudes.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::validation(
                format!("guide[{i}]"),
                format!("amplitude {} must be finite and non-negative", amplitudes[i]),
            ));
        }
        Ok(Self {
            n,
            kind,
            source: Source::Table(amplitudes.into()),
        })
    }

    /// User amplitude callback; negative values are clamped to zero on evaluation.
    pub fn from_fn(n: usize, f: impl Fn(BasisState) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            n,
            kind: GuideKind::User,
            source: Source::Function(Arc::new(f)),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GuideKind {
        self.kind
    }

    pub fn amplitude(&self, x: BasisState) -> f64 {
        match &self.source {
            Source::Uniform(a) => *a,
            Source::Product(factors) => factors
                .iter()
                .enumerate()
                .map(|(q, &(off, on))| if x.bit(q) { on } else { off })
                .product(),
            Source::Table(t) => t[x.index()],
            Source::Padded { base, scale, offset } => scale * (base.amplitude(x) + offset),
            Source::Function(f) => f(x).max(0.0),
        }
    }

    /// `Σ_x φ(x)`, in closed form where possible.
    pub fn amplitude_sum(&self) -> Result<f64> {
        match &self.source {
            Source::Uniform(a) => Ok(a * 2f64.powi(self.n as i32)),
            Source::Product(factors) => Ok(factors.iter().map(|(a, b)| a + b).product()),
            Source::Padded { base, scale, offset } => {
                Ok(scale * (base.amplitude_sum()? + offset * 2f64.powi(self.n as i32)))
            }
            _ => self.summed(|a| a),
        }
    }

    /// `Σ_x φ(x)^2`.
    pub fn norm_squared(&self) -> Result<f64> {
        match &self.source {
            Source::Uniform(a) => Ok(a * a * 2f64.powi(self.n as i32)),
            Source::Product(factors) => Ok(factors.iter().map(|(a, b)| a * a + b * b).product()),
            Source::Padded { base, scale, offset } => {
                let dim = 2f64.powi(self.n as i32);
                Ok(scale
                    * scale
                    * (base.norm_squared()? + 2.0 * offset * base.amplitude_sum()? + offset * offset * dim))
            }
            _ => self.summed(|a| a * a),
        }
    }

    fn summed(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        if self.n > MAX_SUMMED_QUBITS {
            return Err(Error::TooLarge {
                what: "guide summation",
                got: self.n,
                max: MAX_SUMMED_QUBITS,
            });
        }
        Ok((0..1u64 << self.n).map(|x| f(self.amplitude(BasisState(x)))).sum())
    }

    /// Bit probabilities `p_u` when this is a product guide.
    pub fn product_probabilities(&self) -> Option<Vec<f64>> {
        match &self.source {
            Source::Product(factors) => Some(factors.iter().map(|&(_, on)| on * on).collect()),
            _ => None,
        }
    }

    /// Dense amplitude vector (small `n` only).
    pub fn to_vec(&self) -> Result<Vec<f64>> {
        if self.n > MAX_SUMMED_QUBITS {
            return Err(Error::TooLarge {
                what: "guide table",
                got: self.n,
                max: MAX_SUMMED_QUBITS,
            });
        }
        Ok((0..1u64 << self.n).map(|x| self.amplitude(BasisState(x))).collect())
    }
}

/// Default cutoff `φ_min = 2^{-n-1}`.
pub fn default_phi_min(n: usize) -> f64 {
    2f64.powi(-(n as i32) - 1)
}

/// Amplitude clamped into `[φ_min, 1]` with the default `φ_min`.
pub fn regularize(g: &GuidingState, x: BasisState) -> f64 {
    clamp_amplitude(g.amplitude(x), default_phi_min(g.n()))
}

fn clamp_amplitude(a: f64, phi_min: f64) -> f64 {
    if a > 1.0 {
        1.0
    } else if a < phi_min || a.is_nan() {
        phi_min
    } else {
        a
    }
}

/// A guide together with its cutoff; values always lie in `[φ_min, 1]`.
#[derive(Clone, Debug)]
pub struct RegularizedGuide {
    base: GuidingState,
    phi_min: f64,
}

impl RegularizedGuide {
    pub fn new(base: GuidingState) -> Self {
        let phi_min = default_phi_min(base.n());
        Self { base, phi_min }
    }

    /// Overrides the cutoff; intended for experiments only.
    pub fn with_phi_min(base: GuidingState, phi_min: f64) -> Result<Self> {
        if !(phi_min > 0.0 && phi_min <= 1.0) {
            return Err(Error::Range {
                name: "phi_min",
                value: phi_min,
                expected: "(0, 1]",
            });
        }
        Ok(Self { base, phi_min })
    }

    #[inline]
    pub fn value(&self, x: BasisState) -> f64 {
        clamp_amplitude(self.base.amplitude(x), self.phi_min)
    }

    pub fn phi_min(&self) -> f64 {
        self.phi_min
    }

    pub fn base(&self) -> &GuidingState {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// Regularized amplitudes as a dense vector.
    pub fn to_vec(&self) -> Result<Vec<f64>> {
        Ok(self
            .base
            .to_vec()?
            .into_iter()
            .map(|a| clamp_amplitude(a, self.phi_min))
            .collect())
    }

    /// `‖φ‖` of the regularized vector; closed form for unclamped uniform guides.
    pub fn norm(&self) -> Result<f64> {
        if let Source::Uniform(a) = self.base.source {
            let v = clamp_amplitude(a, self.phi_min);
            return Ok(v * 2f64.powf(self.n() as f64 / 2.0));
        }
        Ok(self.to_vec()?.iter().map(|a| a * a).sum::<f64>().sqrt())
    }
}

/// `φ(x) = C_n (ω(x) + 2^{-n})` with `C_n` fixing `Σ φ^2 = 1`.
pub fn padded_guide(omega: &GuidingState) -> Result<GuidingState> {
    let n = omega.n();
    if n <= oracle::MAX_ORACLE_QUBITS {
        let norm2 = omega.norm_squared()?;
        if (norm2 - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::validation(
                "guide",
                format!("padding needs a normalized state, Σω² = {norm2}"),
            ));
        }
    }
    let offset = 2f64.powi(-(n as i32));
    let sum = omega.amplitude_sum()?;
    // Σ (ω + a)^2 = Σω² + 2aΣω + 2^n a², with Σω² = 1 and 2^n a² = a.
    let scale = 1.0 / (1.0 + 2.0 * offset * sum + offset).sqrt();
    Ok(GuidingState {
        n,
        kind: GuideKind::Padded,
        source: Source::Padded {
            base: Arc::new(omega.clone()),
            scale,
            offset,
        },
    })
}

/// CLI-level guide choice: `uniform`, `exact`, or `product:p1,p2,...`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuideSpec {
    Uniform,
    Exact,
    Product(Vec<f64>),
}

impl FromStr for GuideSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "uniform" => Ok(GuideSpec::Uniform),
            "exact" => Ok(GuideSpec::Exact),
            _ => {
                let probs = s
                    .strip_prefix("product:")
                    .ok_or_else(|| Error::validation("guide", format!("unknown guide {s:?}")))?;
                let values = probs
                    .split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::validation("guide", format!("bad probability {p:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(GuideSpec::Product(values))
            }
        }
    }
}

impl fmt::Display for GuideSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuideSpec::Uniform => f.write_str("uniform"),
            GuideSpec::Exact => f.write_str("exact"),
            GuideSpec::Product(p) => {
                let parts: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                write!(f, "product:{}", parts.join(","))
            }
        }
    }
}

/// Builds one of the stock guides for `h`.
pub fn builtin_guide(h: &StoquasticHamiltonian, spec: &GuideSpec) -> Result<GuidingState> {
    match spec {
        GuideSpec::Uniform => Ok(GuidingState::uniform(h.n())),
        GuideSpec::Exact => {
            let summary = oracle::spectrum(h)?;
            GuidingState::from_table(h.n(), summary.ground_state, GuideKind::ExactOracle)
        }
        GuideSpec::Product(p) => {
            if p.len() != h.n() {
                return Err(Error::validation(
                    "guide",
                    format!("product guide needs {} probabilities, got {}", h.n(), p.len()),
                ));
            }
            GuidingState::product(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{x_term, StoquasticHamiltonian};

    #[test]
    fn regularize_three_cases() {
        // n = 1, φ_min = 0.25
        let g = GuidingState::from_fn(1, |x| if x.0 == 0 { 0.1 } else { 1.5 });
        assert_eq!(regularize(&g, BasisState(0)), 0.25);
        assert_eq!(regularize(&g, BasisState(1)), 1.0);
        let h = GuidingState::from_fn(1, |_| 0.5);
        assert_eq!(regularize(&h, BasisState(0)), 0.5);
    }

    #[test]
    fn uniform_amplitudes() {
        let g = GuidingState::uniform(2);
        assert!((g.amplitude(BasisState(3)) - 0.5).abs() < 1e-15);
        assert!((g.norm_squared().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_guide_for_minus_x() {
        let h = StoquasticHamiltonian::new(1, vec![x_term(0, 1.0).unwrap()]).unwrap();
        let g = builtin_guide(&h, &GuideSpec::Exact).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((g.amplitude(BasisState(0)) - s).abs() < 1e-12);
        assert!((g.amplitude(BasisState(1)) - s).abs() < 1e-12);
        assert_eq!(g.kind(), GuideKind::ExactOracle);
    }

    #[test]
    fn deterministic_product_guide() {
        let g = GuidingState::product(&[1.0, 0.0]).unwrap();
        let (x, _) = BasisState::parse("10").unwrap();
        assert_eq!(g.amplitude(x), 1.0);
        assert_eq!(g.amplitude(BasisState(0)), 0.0);
        assert!(GuidingState::product(&[1.2]).is_err());
    }

    #[test]
    fn padded_uniform_stays_uniform() {
        let g = padded_guide(&GuidingState::uniform(2)).unwrap();
        for x in 0..4 {
            assert!((g.amplitude(BasisState(x)) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn padded_basis_state() {
        let omega = GuidingState::from_table(2, vec![1.0, 0.0, 0.0, 0.0], GuideKind::User).unwrap();
        let g = padded_guide(&omega).unwrap();
        // Σφ² = C²(1 + 2/4 + 1/4) = 1
        let c = (1.0f64 / 1.75).sqrt();
        assert!((g.amplitude(BasisState(3)) - c * 0.25).abs() < 1e-12);
        assert!(g.amplitude(BasisState(3)) >= 0.125);
        assert!((g.norm_squared().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn padding_rejects_unnormalized() {
        let omega = GuidingState::from_table(1, vec![1.0, 1.0], GuideKind::User).unwrap();
        assert!(padded_guide(&omega).is_err());
    }

    #[test]
    fn guide_spec_parsing() {
        assert_eq!("uniform".parse::<GuideSpec>().unwrap(), GuideSpec::Uniform);
        assert_eq!(
            "product:0.5, 1".parse::<GuideSpec>().unwrap(),
            GuideSpec::Product(vec![0.5, 1.0])
        );
        assert!("gaussian".parse::<GuideSpec>().is_err());
        assert_eq!(GuideSpec::Product(vec![0.5, 1.0]).to_string(), "product:0.5,1");
    }

    #[test]
    fn phi_min_override_checked() {
        assert!(RegularizedGuide::with_phi_min(GuidingState::uniform(1), 0.0).is_err());
        let g = RegularizedGuide::with_phi_min(GuidingState::from_fn(1, |_| 0.0), 0.01).unwrap();
        assert_eq!(g.value(BasisState(0)), 0.01);
    }
}
