//! Exact dense computations for small systems (`n ≤ 12`).
//!
//! These routines are the ground truth the stochastic components are checked
//! against: spectra, partition functions, the first and second population
//! moments of the branching walk, and the stationary distribution `π` with its
//! good set `S`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::basis::BasisState;
use crate::error::{Error, Result};
use crate::guiding::RegularizedGuide;
use crate::linalg;
use crate::model::{GreenOperator, StoquasticHamiltonian};
use crate::stats::log_sum_exp;

pub const MAX_ORACLE_QUBITS: usize = 12;

/// Relative tolerance used to group degenerate ground eigenvalues.
const DEGENERACY_TOL: f64 = 1e-9;

fn check_size(what: &'static str, n: usize) -> Result<()> {
    if n > MAX_ORACLE_QUBITS {
        return Err(Error::TooLarge {
            what,
            got: n,
            max: MAX_ORACLE_QUBITS,
        });
    }
    Ok(())
}

/// Dense `2^n × 2^n` real matrix, row/column index = basis state.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    n: usize,
    matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn entry(&self, x: BasisState, y: BasisState) -> f64 {
        self.matrix[(x.index(), y.index())]
    }
}

/// Sums every term into its place in the full matrix.
pub fn build_dense(h: &StoquasticHamiltonian) -> Result<DenseOperator> {
    check_size("dense build", h.n())?;
    let dim = 1usize << h.n();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for term in h.terms() {
        for x in 0..dim as u64 {
            let i = term.local_index(x);
            for j in 0..term.dim() {
                let v = term.entry(i, j);
                if v != 0.0 {
                    m[(x as usize, term.embed(x, j) as usize)] += v;
                }
            }
        }
    }
    Ok(DenseOperator { n: h.n(), matrix: m })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralSummary {
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    pub ground_energy: f64,
    /// Normalized ground state with non-negative amplitudes.
    pub ground_state: Vec<f64>,
}

/// Full spectrum plus a non-negative ground state.
///
/// The ground state is the projection of the all-ones vector onto the ground
/// eigenspace. That projector is a limit of powers of the entrywise
/// non-negative Green matrix, so the result is non-negative even when the
/// ground level is degenerate.
pub fn spectrum(h: &StoquasticHamiltonian) -> Result<SpectralSummary> {
    let dense = build_dense(h)?;
    let (values, vectors) = linalg::sorted_eigen(dense.matrix());
    let ground_energy = values[0];
    let tol = DEGENERACY_TOL * ground_energy.abs().max(1.0);
    let dim = values.len();
    let mut psi = DVector::<f64>::zeros(dim);
    for (k, &v) in values.iter().enumerate() {
        if v - ground_energy > tol {
            break;
        }
        let col = vectors.column(k);
        let overlap = col.sum();
        psi += col * overlap;
    }
    let norm = psi.norm();
    if norm == 0.0 {
        return Err(Error::Consistency("ground eigenspace orthogonal to all-ones vector".into()));
    }
    psi /= norm;
    let ground_state = psi
        .iter()
        .map(|&a| {
            if a < -1e-9 {
                Err(Error::Consistency(format!("negative ground amplitude {a:e}")))
            } else {
                Ok(a.max(0.0))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralSummary {
        eigenvalues: values,
        ground_energy,
        ground_state,
    })
}

pub fn ground_energy_exact(h: &StoquasticHamiltonian) -> Result<f64> {
    Ok(spectrum(h)?.ground_energy)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartitionValue {
    pub log_z: f64,
    /// `exp(log_z)`; may be `inf` for very large systems.
    pub z: f64,
}

impl PartitionValue {
    pub fn from_log(log_z: f64) -> Self {
        Self { log_z, z: log_z.exp() }
    }
}

/// `Z = tr e^{-H} = Σ_i e^{-λ_i}`.
pub fn partition_exact(h: &StoquasticHamiltonian) -> Result<PartitionValue> {
    let dense = build_dense(h)?;
    Ok(partition_from_eigenvalues(&linalg::eigenvalues(dense.matrix())))
}

pub fn partition_from_eigenvalues(eigenvalues: &[f64]) -> PartitionValue {
    let neg: Vec<f64> = eigenvalues.iter().map(|v| -v).collect();
    PartitionValue::from_log(log_sum_exp(&neg))
}

/// Dense `G = I − β(H − λ_M I)`.
pub fn green_dense(h: &StoquasticHamiltonian, green: GreenOperator) -> Result<DenseOperator> {
    let mut m = build_dense(h)?.into_matrix();
    m *= -green.beta;
    for i in 0..m.nrows() {
        m[(i, i)] += 1.0 + green.beta * green.lambda_m;
    }
    Ok(DenseOperator { n: h.n(), matrix: m })
}

/// Dense evaluation of the walk's moment formulas for one `(H, G, φ)`.
///
/// `V_t(x)` and `W(x)` of the completeness argument are
/// [`MomentOracle::first_moment`] and [`MomentOracle::second_moment`] at `x`.
#[derive(Clone, Debug)]
pub struct MomentOracle {
    green: DMatrix<f64>,
    phi: DVector<f64>,
}

impl MomentOracle {
    pub fn new(h: &StoquasticHamiltonian, green: GreenOperator, guide: &RegularizedGuide) -> Result<Self> {
        check_size("moment oracle", h.n())?;
        if guide.n() != h.n() {
            return Err(Error::validation("guide", "qubit count differs from the Hamiltonian"));
        }
        Ok(Self {
            green: green_dense(h, green)?.into_matrix(),
            phi: DVector::from_vec(guide.to_vec()?),
        })
    }

    pub fn green_matrix(&self) -> &DMatrix<f64> {
        &self.green
    }

    pub fn phi(&self) -> &DVector<f64> {
        &self.phi
    }

    /// `‖G‖` as the largest-magnitude eigenvalue of the symmetric `G`.
    pub fn green_norm(&self) -> f64 {
        linalg::spectral_norm_sym(&self.green)
    }

    /// `P(x,y) = φ(y) G(x,y) / φ(x)`.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let phi = &self.phi;
        DMatrix::from_fn(self.green.nrows(), self.green.ncols(), |x, y| {
            self.green[(x, y)] * phi[y] / phi[x]
        })
    }

    /// `E[Γ_t] = ⟨x|G^t|φ⟩ / φ(x)` for `t = 0..=t_max`.
    pub fn first_moments(&self, x: BasisState, t_max: usize) -> Vec<f64> {
        let xi = x.index();
        let mut v = self.phi.clone();
        let mut out = Vec::with_capacity(t_max + 1);
        out.push(v[xi] / self.phi[xi]);
        for _ in 0..t_max {
            v = &self.green * v;
            out.push(v[xi] / self.phi[xi]);
        }
        out
    }

    pub fn first_moment(&self, x: BasisState, t: usize) -> f64 {
        self.first_moments(x, t)[t]
    }

    /// `E[Γ_L²] = (1/φ(x)) Σ_s Σ_y ⟨x|G^s|y⟩ ⟨y|G^{L−s}|φ⟩² / φ(y)`.
    pub fn second_moment(&self, x: BasisState, steps: usize) -> f64 {
        let dim = self.phi.len();
        // forward[k] = G^k φ
        let mut forward = Vec::with_capacity(steps + 1);
        forward.push(self.phi.clone());
        for k in 0..steps {
            let next = &self.green * &forward[k];
            forward.push(next);
        }
        let mut row = DVector::<f64>::zeros(dim);
        row[x.index()] = 1.0;
        let mut total = 0.0;
        for s in 0..=steps {
            let gphi = &forward[steps - s];
            total += (0..dim).map(|y| row[y] * gphi[y] * gphi[y] / self.phi[y]).sum::<f64>();
            if s < steps {
                row = self.green.tr_mul(&row);
            }
        }
        total / self.phi[x.index()]
    }

    /// `E[Γ_{t,s}] = Σ_{y,z} E[γ_t(y)] ⟨y|P^s|z⟩`, evaluated as `(e_x P^t)(P^s 1)`.
    pub fn gamma_ts(&self, x: BasisState, t: usize, s: usize) -> f64 {
        let p = self.transition_matrix();
        let dim = p.nrows();
        let mut row = DVector::<f64>::zeros(dim);
        row[x.index()] = 1.0;
        for _ in 0..t {
            row = p.tr_mul(&row);
        }
        let mut col = DVector::<f64>::from_element(dim, 1.0);
        for _ in 0..s {
            col = &p * col;
        }
        row.dot(&col)
    }
}

pub fn expected_population_exact(
    h: &StoquasticHamiltonian,
    green: GreenOperator,
    guide: &RegularizedGuide,
    x_m: BasisState,
    t: usize,
) -> Result<f64> {
    Ok(MomentOracle::new(h, green, guide)?.first_moment(x_m, t))
}

pub fn second_moment_exact(
    h: &StoquasticHamiltonian,
    green: GreenOperator,
    guide: &RegularizedGuide,
    x_m: BasisState,
    steps: usize,
) -> Result<f64> {
    Ok(MomentOracle::new(h, green, guide)?.second_moment(x_m, steps))
}

/// `π(x) = ψ(x)φ(x)/⟨ψ|φ⟩` and `S = {x : ψ(x)/φ(x) ≥ ⟨ψ|φ⟩/2}`.
#[derive(Clone, Debug, Serialize)]
pub struct GoodSet {
    pub pi: Vec<f64>,
    /// Members of `S`, ascending basis index.
    pub members: Vec<BasisState>,
    /// `π(S)`.
    pub mass: f64,
    /// `⟨ψ|φ⟩` with `φ` normalized.
    pub overlap: f64,
}

impl GoodSet {
    pub fn contains(&self, x: BasisState) -> bool {
        self.members.binary_search(&x).is_ok()
    }
}

/// Computes `π` and `S` from the exact ground state and the unit-normalized
/// regularized guide vector.
pub fn pi_and_good_set(h: &StoquasticHamiltonian, guide: &RegularizedGuide) -> Result<GoodSet> {
    let summary = spectrum(h)?;
    good_set_from(&summary.ground_state, &guide.to_vec()?)
}

pub fn good_set_from(psi: &[f64], phi: &[f64]) -> Result<GoodSet> {
    if psi.len() != phi.len() {
        return Err(Error::validation("guide", "dimension mismatch"));
    }
    let norm = phi.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::OrthogonalGuide);
    }
    let phi: Vec<f64> = phi.iter().map(|a| a / norm).collect();
    let overlap: f64 = psi.iter().zip(&phi).map(|(a, b)| a * b).sum();
    if overlap <= 0.0 {
        return Err(Error::OrthogonalGuide);
    }
    let pi: Vec<f64> = psi.iter().zip(&phi).map(|(a, b)| a * b / overlap).collect();
    let members: Vec<BasisState> = (0..psi.len())
        .filter(|&x| phi[x] > 0.0 && psi[x] / phi[x] >= overlap / 2.0)
        .map(|x| BasisState(x as u64))
        .collect();
    let mass = members.iter().map(|x| pi[x.index()]).sum();
    Ok(GoodSet {
        pi,
        members,
        mass,
        overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guiding::GuidingState;
    use crate::model::{tim_to_local, x_term, zz_term, TimModel};

    fn minus_x() -> StoquasticHamiltonian {
        StoquasticHamiltonian::new(1, vec![x_term(0, 1.0).unwrap()]).unwrap()
    }

    #[test]
    fn dense_minus_x() {
        let d = build_dense(&minus_x()).unwrap();
        assert_eq!(d.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
    }

    #[test]
    fn dense_minus_zz() {
        let h = StoquasticHamiltonian::new(2, vec![zz_term(0, 1, 1.0).unwrap()]).unwrap();
        let d = build_dense(&h).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0, -1.0]));
        assert_eq!(d.matrix(), &expected);
        assert!((ground_energy_exact(&h).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_limit() {
        let h = StoquasticHamiltonian::new(13, vec![x_term(12, 1.0).unwrap()]).unwrap();
        assert!(matches!(build_dense(&h), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn minus_x_spectrum_and_partition() {
        let s = spectrum(&minus_x()).unwrap();
        assert!((s.ground_energy + 1.0).abs() < 1e-12);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(s.ground_state.iter().all(|a| (a - r).abs() < 1e-12));
        let z = partition_exact(&minus_x()).unwrap();
        assert!((z.z - (1f64.exp() + (-1f64).exp())).abs() < 1e-12);
        assert!((z.z - 3.08616).abs() < 1e-5);
    }

    #[test]
    fn zero_hamiltonian_partition() {
        let zero = crate::model::LocalTerm::new(vec![0], DMatrix::zeros(2, 2)).unwrap();
        let h = StoquasticHamiltonian::new(2, vec![zero]).unwrap();
        assert!((partition_exact(&h).unwrap().z - 4.0).abs() < 1e-12);
    }

    #[test]
    fn classical_two_spin_partition() {
        let h = StoquasticHamiltonian::new(2, vec![zz_term(0, 1, 1.0).unwrap()]).unwrap();
        let expected = 2.0 * 1f64.exp() + 2.0 * (-1f64).exp();
        assert!((partition_exact(&h).unwrap().z - expected).abs() < 1e-12);
        assert!((expected - 6.17232).abs() < 1e-5);
    }

    #[test]
    fn degenerate_ground_state_is_nonnegative() {
        // Diagonal Hamiltonian with a two-fold degenerate ground level.
        let h = StoquasticHamiltonian::new(2, vec![zz_term(0, 1, 1.0).unwrap()]).unwrap();
        let s = spectrum(&h).unwrap();
        assert!(s.ground_state.iter().all(|&a| a >= 0.0));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.ground_state[0] - r).abs() < 1e-12 && (s.ground_state[3] - r).abs() < 1e-12);
    }

    #[test]
    fn minus_x_moments() {
        let h = minus_x();
        let guide = RegularizedGuide::new(GuidingState::uniform(1));
        let g = GreenOperator::new(0.5, -1.0).unwrap();
        let oracle = MomentOracle::new(&h, g, &guide).unwrap();
        for t in 0..6 {
            assert!((oracle.first_moment(BasisState(0), t) - 1.0).abs() < 1e-12);
        }
        assert!((oracle.second_moment(BasisState(0), 0) - 1.0).abs() < 1e-12);
        assert!((oracle.second_moment(BasisState(0), 1) - 2.0).abs() < 1e-12);
        assert!((oracle.second_moment(BasisState(0), 5) - 6.0).abs() < 1e-12);

        let shifted = GreenOperator::new(0.5, -1.2).unwrap();
        let v = expected_population_exact(&h, shifted, &guide, BasisState(0), 1).unwrap();
        assert!((v - 0.9).abs() < 1e-12);
    }

    #[test]
    fn green_norm_formula() {
        let tim = TimModel::new(2, vec![(0, 1, 1.0)], vec![1.0, 1.0]).unwrap();
        let h = tim_to_local(&tim).unwrap();
        let lambda = ground_energy_exact(&h).unwrap();
        let guide = RegularizedGuide::new(GuidingState::uniform(2));
        for lambda_m in [lambda, lambda - 0.4, -3.0] {
            let g = GreenOperator::for_hamiltonian(&h, lambda_m).unwrap();
            let oracle = MomentOracle::new(&h, g, &guide).unwrap();
            assert!((oracle.green_norm() - g.norm_from_ground(lambda)).abs() < 1e-10);
        }
    }

    #[test]
    fn good_set_minus_x() {
        let guide = RegularizedGuide::new(GuidingState::uniform(1));
        let s = pi_and_good_set(&minus_x(), &guide).unwrap();
        assert!((s.pi[0] - 0.5).abs() < 1e-12 && (s.pi[1] - 0.5).abs() < 1e-12);
        assert_eq!(s.members, vec![BasisState(0), BasisState(1)]);
        assert!((s.mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn good_set_with_exact_guide() {
        let psi = [0.8f64, 0.6, 0.0];
        let s = good_set_from(&psi, &psi).unwrap();
        assert!((s.pi[0] - 0.64).abs() < 1e-12);
        assert!((s.pi[1] - 0.36).abs() < 1e-12);
        assert!(s.contains(BasisState(0)) && s.contains(BasisState(1)));
        assert!(matches!(good_set_from(&[1.0, 0.0], &[0.0, 1.0]), Err(Error::OrthogonalGuide)));
    }
}
