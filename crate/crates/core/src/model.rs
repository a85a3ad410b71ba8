//! Local stoquastic Hamiltonians, transverse-field Ising instances and the
//! parameters (`J`, `β`, `Δ`) of the verification protocol.
//!
//! A [`LocalTerm`] is a dense real symmetric block acting on an ordered list of
//! qubits. Inside a block, local basis index `i` has bit `j` equal to the state
//! of qubit `support[j]`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::basis::MAX_QUBITS;
use crate::error::{Error, Result};
use crate::linalg;

/// Absolute tolerance on positive off-diagonal entries.
pub const STOQUASTIC_TOL: f64 = 1e-12;
/// Absolute tolerance on `|B_ij - B_ji|`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Largest supported term locality.
pub const MAX_LOCALITY: usize = 10;

/// True iff every off-diagonal entry is at most [`STOQUASTIC_TOL`].
///
/// Fails when the block is not square or not symmetric.
pub fn is_stoquastic(block: &DMatrix<f64>) -> Result<bool> {
    if block.nrows() != block.ncols() {
        return Err(Error::validation("matrix", "block is not square"));
    }
    let asym = linalg::max_asymmetry(block);
    if asym > HERMITIAN_TOL {
        return Err(Error::validation(
            "matrix",
            format!("block is not Hermitian (max |B_ij - B_ji| = {asym:e})"),
        ));
    }
    Ok(first_positive_off_diagonal(block).is_none())
}

fn first_positive_off_diagonal(block: &DMatrix<f64>) -> Option<(usize, usize, f64)> {
    for i in 0..block.nrows() {
        for j in 0..block.ncols() {
            if i != j && block[(i, j)] > STOQUASTIC_TOL {
                return Some((i, j, block[(i, j)]));
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    support: Vec<usize>,
    block: DMatrix<f64>,
    mask: u64,
}

impl LocalTerm {
    /// Builds a term; the block must be symmetric with dimension `2^|support|`.
    pub fn new(support: Vec<usize>, block: DMatrix<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::validation("qubits", "support must not be empty"));
        }
        if support.len() > MAX_LOCALITY {
            return Err(Error::TooLarge {
                what: "local term",
                got: support.len(),
                max: MAX_LOCALITY,
            });
        }
        let mut mask = 0u64;
        for &q in &support {
            if q >= MAX_QUBITS {
                return Err(Error::validation("qubits", format!("qubit index {q} too large")));
            }
            if mask & (1 << q) != 0 {
                return Err(Error::validation("qubits", format!("qubit {q} repeated")));
            }
            mask |= 1 << q;
        }
        let dim = 1usize << support.len();
        if block.nrows() != dim || block.ncols() != dim {
            return Err(Error::validation(
                "matrix",
                format!(
                    "expected {dim}x{dim} for {} qubits, got {}x{}",
                    support.len(),
                    block.nrows(),
                    block.ncols()
                ),
            ));
        }
        if block.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("matrix", "entries must be finite"));
        }
        let asym = linalg::max_asymmetry(&block);
        if asym > HERMITIAN_TOL {
            return Err(Error::validation(
                "matrix",
                format!("block is not Hermitian (max |B_ij - B_ji| = {asym:e})"),
            ));
        }
        Ok(Self { support, block, mask })
    }

    /// Builds a term from row-major rows.
    pub fn from_rows(support: Vec<usize>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::validation("matrix", "rows have unequal lengths"));
        }
        let block = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
        Self::new(support, block)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn block(&self) -> &DMatrix<f64> {
        &self.block
    }

    pub fn dim(&self) -> usize {
        self.block.nrows()
    }

    pub fn is_stoquastic(&self) -> bool {
        first_positive_off_diagonal(&self.block).is_none()
    }

    /// Spectral norm `‖H_α‖`.
    pub fn norm(&self) -> f64 {
        linalg::spectral_norm_sym(&self.block)
    }

    /// Local block index of global basis state `x`.
    #[inline]
    pub fn local_index(&self, x: u64) -> usize {
        self.support
            .iter()
            .enumerate()
            .fold(0usize, |acc, (j, &q)| acc | ((((x >> q) & 1) as usize) << j))
    }

    /// Global state equal to `x` outside the support and to `local` on it.
    #[inline]
    pub fn embed(&self, x: u64, local: usize) -> u64 {
        let mut y = x & !self.mask;
        for (j, &q) in self.support.iter().enumerate() {
            y |= (((local >> j) & 1) as u64) << q;
        }
        y
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.block[(i, j)]
    }

    /// Block as row-major rows.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.block[(i, j)]).collect())
            .collect()
    }
}

/// `H = Σ_α H_α` on `n` qubits, every term stoquastic.
#[derive(Clone, Debug, PartialEq)]
pub struct StoquasticHamiltonian {
    n: usize,
    terms: Vec<LocalTerm>,
}

impl StoquasticHamiltonian {
    pub fn new(n: usize, terms: Vec<LocalTerm>) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::validation("n", format!("must be in 1..={MAX_QUBITS}, got {n}")));
        }
        if terms.is_empty() {
            return Err(Error::validation("terms", "at least one term is required"));
        }
        for (a, term) in terms.iter().enumerate() {
            if let Some(&q) = term.support.iter().find(|&&q| q >= n) {
                return Err(Error::validation(
                    format!("terms[{a}].qubits"),
                    format!("qubit {q} out of range for n = {n}"),
                ));
            }
            if let Some((row, col, value)) = first_positive_off_diagonal(&term.block) {
                return Err(Error::NotStoquastic { term: a, row, col, value });
            }
        }
        Ok(Self { n, terms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    /// Largest support size `k`.
    pub fn locality(&self) -> usize {
        self.terms.iter().map(|t| t.support.len()).max().unwrap_or(0)
    }

    /// `J = Σ_α ‖H_α‖`.
    pub fn total_norm(&self) -> f64 {
        self.terms.iter().map(LocalTerm::norm).sum()
    }

    /// `⟨x|H|x⟩`.
    pub fn diagonal(&self, x: u64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let i = t.local_index(x);
                t.entry(i, i)
            })
            .sum()
    }
}

/// `H = -Σ_{u<v} J_uv Z_u Z_v - Σ_u h_u X_u`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimModel {
    n: usize,
    couplings: Vec<(usize, usize, f64)>,
    fields: Vec<f64>,
}

impl TimModel {
    /// Pairs are stored with `u < v`; duplicate pairs and self-couplings are rejected.
    pub fn new(n: usize, couplings: Vec<(usize, usize, f64)>, fields: Vec<f64>) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::validation("n", format!("must be in 1..={MAX_QUBITS}, got {n}")));
        }
        if fields.len() != n {
            return Err(Error::validation(
                "fields",
                format!("expected {n} entries, got {}", fields.len()),
            ));
        }
        if let Some(i) = fields.iter().position(|h| !h.is_finite()) {
            return Err(Error::validation(format!("fields[{i}]"), "must be finite"));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut normalized = Vec::with_capacity(couplings.len());
        for (idx, &(u, v, j)) in couplings.iter().enumerate() {
            let field = || format!("couplings[{idx}]");
            if u == v {
                return Err(Error::validation(field(), format!("self-coupling on qubit {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::validation(field(), format!("qubit out of range for n = {n}")));
            }
            if !j.is_finite() {
                return Err(Error::validation(field(), "coupling must be finite"));
            }
            let pair = (u.min(v), u.max(v));
            if !seen.insert(pair) {
                return Err(Error::validation(field(), format!("duplicate pair {pair:?}")));
            }
            normalized.push((pair.0, pair.1, j));
        }
        Ok(Self {
            n,
            couplings: normalized,
            fields,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn is_ferromagnetic(&self) -> bool {
        self.couplings.iter().all(|&(_, _, j)| j >= 0.0)
    }

    pub fn is_stoquastic(&self) -> bool {
        self.fields.iter().all(|&h| h >= 0.0)
    }

    pub fn require_ferromagnetic(&self) -> Result<()> {
        match self.couplings.iter().position(|&(_, _, j)| j < 0.0) {
            Some(i) => Err(Error::validation(
                format!("couplings[{i}]"),
                "ferromagnetic model requires J_uv >= 0",
            )),
            None => Ok(()),
        }
    }

    /// `max{J_uv, |h_u|}`.
    pub fn max_interaction(&self) -> f64 {
        self.couplings
            .iter()
            .map(|c| c.2.abs())
            .chain(self.fields.iter().map(|h| h.abs()))
            .fold(0.0, f64::max)
    }

    /// Conjugation by `Z_u` on the listed qubits, which negates their `h_u`.
    pub fn sign_flip(&self, qubits: &[usize]) -> Result<Self> {
        let mut fields = self.fields.clone();
        for &q in qubits {
            let h = fields
                .get_mut(q)
                .ok_or_else(|| Error::validation("sign_flip", format!("qubit {q} out of range")))?;
            *h = -*h;
        }
        Ok(Self {
            fields,
            ..self.clone()
        })
    }

    /// Conjugation that makes every field non-negative.
    pub fn stoquastic_gauge(&self) -> Self {
        let negative: Vec<usize> = (0..self.n).filter(|&u| self.fields[u] < 0.0).collect();
        self.sign_flip(&negative).expect("indices are in range")
    }

    pub fn with_fields(&self, fields: Vec<f64>) -> Result<Self> {
        Self::new(self.n, self.couplings.clone(), fields)
    }
}

/// `-J Z⊗Z` on two qubits in the local basis convention of [`LocalTerm`].
pub fn zz_term(u: usize, v: usize, coupling: f64) -> Result<LocalTerm> {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        -coupling, coupling, coupling, -coupling,
    ]));
    LocalTerm::new(vec![u, v], d)
}

/// `-h X` on one qubit.
pub fn x_term(u: usize, field: f64) -> Result<LocalTerm> {
    LocalTerm::new(vec![u], DMatrix::from_row_slice(2, 2, &[0.0, -field, -field, 0.0]))
}

/// Converts a stoquastic TIM into local terms, skipping zero coefficients.
pub fn tim_to_local(tim: &TimModel) -> Result<StoquasticHamiltonian> {
    if let Some(u) = tim.fields.iter().position(|&h| h < 0.0) {
        return Err(Error::NotStoquastic {
            term: u,
            row: 0,
            col: 1,
            value: -tim.fields[u],
        });
    }
    let mut terms = Vec::new();
    for &(u, v, j) in &tim.couplings {
        if j != 0.0 {
            terms.push(zz_term(u, v, j)?);
        }
    }
    for (u, &h) in tim.fields.iter().enumerate() {
        if h != 0.0 {
            terms.push(x_term(u, h)?);
        }
    }
    if terms.is_empty() {
        return Err(Error::Degenerate("TIM has no non-zero coefficients".into()));
    }
    StoquasticHamiltonian::new(tim.n, terms)
}

/// A decision instance `(H, λ_yes, λ_no)`.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub hamiltonian: StoquasticHamiltonian,
    pub lambda_yes: f64,
    pub lambda_no: f64,
}

impl ProblemInstance {
    pub fn new(hamiltonian: StoquasticHamiltonian, lambda_yes: f64, lambda_no: f64) -> Result<Self> {
        if !lambda_yes.is_finite() || !lambda_no.is_finite() {
            return Err(Error::validation("lambda", "thresholds must be finite"));
        }
        if lambda_yes >= lambda_no {
            return Err(Error::validation(
                "lambda_yes",
                format!("must be below lambda_no ({lambda_yes} >= {lambda_no})"),
            ));
        }
        Ok(Self {
            hamiltonian,
            lambda_yes,
            lambda_no,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProtocolParams {
    /// `J = Σ_α ‖H_α‖`.
    pub total_norm: f64,
    /// `β = 1/(2J)`.
    pub beta: f64,
    /// `Δ = β(λ_no − λ_yes)`.
    pub decision_gap: f64,
    /// Set when the thresholds fall outside `[-J, J]`, making the instance trivial.
    pub trivial: bool,
}

impl ProtocolParams {
    /// Format check on the claimed energy: `-J ≤ λ_M ≤ λ_yes`.
    pub fn check_witness_energy(&self, lambda_m: f64, lambda_yes: f64) -> Result<()> {
        if !lambda_m.is_finite() || lambda_m < -self.total_norm || lambda_m > lambda_yes {
            return Err(Error::validation(
                "lambda_m",
                format!(
                    "{lambda_m} outside [-J, lambda_yes] = [{}, {lambda_yes}]",
                    -self.total_norm
                ),
            ));
        }
        Ok(())
    }

    pub fn green(&self, lambda_m: f64) -> GreenOperator {
        GreenOperator {
            beta: self.beta,
            lambda_m,
        }
    }
}

pub fn protocol_params(instance: &ProblemInstance) -> Result<ProtocolParams> {
    let total_norm = instance.hamiltonian.total_norm();
    if total_norm <= 0.0 {
        return Err(Error::Degenerate("J = Σ‖H_α‖ is zero".into()));
    }
    let beta = 1.0 / (2.0 * total_norm);
    let decision_gap = beta * (instance.lambda_no - instance.lambda_yes);
    let trivial = instance.lambda_yes < -total_norm || instance.lambda_no > total_norm;
    Ok(ProtocolParams {
        total_norm,
        beta,
        decision_gap,
        trivial,
    })
}

/// `G = I − β(H − λ_M I)`, described by its two scalars.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenOperator {
    pub beta: f64,
    pub lambda_m: f64,
}

impl GreenOperator {
    pub fn new(beta: f64, lambda_m: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Range {
                name: "beta",
                value: beta,
                expected: "(0, inf)",
            });
        }
        if !lambda_m.is_finite() {
            return Err(Error::validation("lambda_m", "must be finite"));
        }
        Ok(Self { beta, lambda_m })
    }

    /// Green operator with the protocol's `β = 1/(2J)` for this Hamiltonian.
    pub fn for_hamiltonian(h: &StoquasticHamiltonian, lambda_m: f64) -> Result<Self> {
        let j = h.total_norm();
        if j <= 0.0 {
            return Err(Error::Degenerate("J = Σ‖H_α‖ is zero".into()));
        }
        Self::new(1.0 / (2.0 * j), lambda_m)
    }

    /// `‖G‖ = 1 − β(λ − λ_M)` given the ground energy `λ`.
    pub fn norm_from_ground(&self, ground_energy: f64) -> f64 {
        1.0 - self.beta * (ground_energy - self.lambda_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minus_x() -> StoquasticHamiltonian {
        StoquasticHamiltonian::new(1, vec![x_term(0, 1.0).unwrap()]).unwrap()
    }

    #[test]
    fn stoquastic_sign_of_x() {
        let minus = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        let plus = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(is_stoquastic(&minus).unwrap());
        assert!(!is_stoquastic(&plus).unwrap());
    }

    #[test]
    fn non_hermitian_block_is_an_error() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -0.5, 0.0]);
        assert!(matches!(is_stoquastic(&m), Err(Error::Validation { .. })));
        assert!(LocalTerm::new(vec![0], m).is_err());
    }

    #[test]
    fn tim_terms_are_stoquastic_for_nonnegative_fields() {
        let tim = TimModel::new(3, vec![(0, 1, 1.0), (2, 1, 0.5)], vec![0.3, 0.0, 2.0]).unwrap();
        assert!(tim.is_stoquastic());
        let h = tim_to_local(&tim).unwrap();
        assert!(h.terms().iter().all(LocalTerm::is_stoquastic));
        assert_eq!(h.terms().len(), 4);
        assert_eq!(tim.couplings()[1], (1, 2, 0.5));
    }

    #[test]
    fn negative_field_rejected_until_gauge_flip() {
        let tim = TimModel::new(2, vec![(0, 1, 1.0)], vec![-0.5, 1.0]).unwrap();
        assert!(!tim.is_stoquastic());
        assert!(matches!(tim_to_local(&tim), Err(Error::NotStoquastic { .. })));
        let flipped = tim.stoquastic_gauge();
        assert_eq!(flipped.fields(), &[0.5, 1.0]);
        assert!(tim_to_local(&flipped).is_ok());
    }

    #[test]
    fn classical_tim_is_single_zz_term() {
        let tim = TimModel::new(2, vec![(0, 1, 1.0)], vec![0.0, 0.0]).unwrap();
        let h = tim_to_local(&tim).unwrap();
        assert_eq!(h.terms().len(), 1);
        assert_eq!(h.terms()[0].support(), &[0, 1]);
        let single = tim_to_local(&TimModel::new(1, vec![], vec![1.0]).unwrap()).unwrap();
        assert_eq!(single.terms()[0].rows(), vec![vec![0.0, -1.0], vec![-1.0, 0.0]]);
    }

    #[test]
    fn protocol_params_minus_x() {
        let inst = ProblemInstance::new(minus_x(), -1.0, -0.5).unwrap();
        let p = protocol_params(&inst).unwrap();
        assert!((p.total_norm - 1.0).abs() < 1e-12);
        assert!((p.beta - 0.5).abs() < 1e-12);
        assert!((p.decision_gap - 0.25).abs() < 1e-12);
        assert!(!p.trivial);
    }

    #[test]
    fn protocol_params_two_qubit_tim() {
        let tim = TimModel::new(2, vec![(0, 1, 1.0)], vec![1.0, 1.0]).unwrap();
        let inst = ProblemInstance::new(tim_to_local(&tim).unwrap(), -2.0, -1.0).unwrap();
        let p = protocol_params(&inst).unwrap();
        assert!((p.total_norm - 3.0).abs() < 1e-12);
        assert!((p.beta - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn empty_gap_rejected() {
        assert!(ProblemInstance::new(minus_x(), -0.7, -0.7).is_err());
    }

    #[test]
    fn witness_energy_range() {
        let inst = ProblemInstance::new(minus_x(), -0.9, -0.5).unwrap();
        let p = protocol_params(&inst).unwrap();
        assert!(p.check_witness_energy(-1.0, -0.9).is_ok());
        assert!(p.check_witness_energy(-0.8, -0.9).is_err());
        assert!(p.check_witness_energy(-1.1, -0.9).is_err());
    }

    #[test]
    fn embedding_roundtrip() {
        let term = zz_term(4, 1, 1.0).unwrap();
        let x = 0b10010u64;
        let local = term.local_index(x);
        assert_eq!(local, 0b11);
        assert_eq!(term.embed(x, local), x);
        assert_eq!(term.embed(x, 0), 0);
    }

    #[test]
    fn support_validation() {
        assert!(LocalTerm::new(vec![0, 0], DMatrix::zeros(4, 4)).is_err());
        assert!(LocalTerm::new(vec![0], DMatrix::zeros(4, 4)).is_err());
        let t = x_term(3, 1.0).unwrap();
        assert!(StoquasticHamiltonian::new(2, vec![t]).is_err());
        assert!(StoquasticHamiltonian::new(2, vec![]).is_err());
    }
}
