//! Symmetric Trotter splitting error and the mapping of the ferromagnetic
//! transverse-field Ising model onto a classical Ising model in one more
//! dimension.
//!
//! Conventions: `H = −A − B` with `A = Σ J_uv Z_u Z_v` and `B = Σ h_u X_u`,
//! so `Z = tr e^{A+B}` and the Trotterized value is `tr (e^{At} e^{Bt})^r`
//! with `t = 1/r`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ising::ClassicalIsingModel;
use crate::linalg;
use crate::model::TimModel;
use crate::oracle::{PartitionValue, MAX_ORACLE_QUBITS};
use crate::stats::log_sum_exp;

/// Largest matrix dimension accepted by [`trotter_error_operator`].
pub const MAX_ERROR_DIM: usize = 256;
/// Largest `n` for the dense Trotterized trace.
pub const MAX_TRACE_QUBITS: usize = 10;
/// Constant in `‖D‖ ≤ 12ρ³`.
pub const ERROR_CONSTANT: f64 = 12.0;

/// `ρ(A) + ρ(B) ≤ 2(Σ J_uv + Σ h_u)` by the triangle inequality.
pub fn spectral_spread_bound(tim: &TimModel) -> f64 {
    let j: f64 = tim.couplings().iter().map(|c| c.2.abs()).sum();
    let h: f64 = tim.fields().iter().map(|h| h.abs()).sum();
    2.0 * (j + h)
}

/// Dense `A = Σ J Z Z` and `B = Σ h X`; qubit `q` is bit `q` of the row index and
/// `Z = +1` on bit value 0.
pub fn tim_dense_parts(tim: &TimModel) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = tim.n();
    if n > MAX_ORACLE_QUBITS {
        return Err(Error::TooLarge {
            what: "dense TIM",
            got: n,
            max: MAX_ORACLE_QUBITS,
        });
    }
    let dim = 1usize << n;
    let z = |x: usize, q: usize| if (x >> q) & 1 == 0 { 1.0 } else { -1.0 };
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DMatrix::<f64>::zeros(dim, dim);
    for x in 0..dim {
        a[(x, x)] = tim.couplings().iter().map(|&(u, v, j)| j * z(x, u) * z(x, v)).sum();
        for (q, &h) in tim.fields().iter().enumerate() {
            if h != 0.0 {
                b[(x, x ^ (1 << q))] += h;
            }
        }
    }
    Ok((a, b))
}

/// Exact `ρ(A) + ρ(B)` from the dense spectra.
pub fn spectral_spread_exact(tim: &TimModel) -> Result<f64> {
    let (a, b) = tim_dense_parts(tim)?;
    Ok(linalg::spread(&a) + linalg::spread(&b))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrotterPlan {
    pub r: u64,
    /// `1/r`.
    pub t: f64,
    /// Upper bound on `ρ(A) + ρ(B)`.
    pub rho: f64,
    pub delta: f64,
    /// `12ρ³/r²`, the Weyl bound on every eigenvalue shift; at most `delta`.
    pub eigenvalue_shift: f64,
}

/// `r = max(1, ceil(max(2ρ, sqrt(12ρ³/δ))))`.
pub fn plan_from_spread(rho: f64, delta: f64) -> Result<TrotterPlan> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Range {
            name: "delta",
            value: delta,
            expected: "(0, 1)",
        });
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::Range {
            name: "rho",
            value: rho,
            expected: "[0, inf)",
        });
    }
    let needed = (2.0 * rho).max((ERROR_CONSTANT * rho.powi(3) / delta).sqrt());
    let r = (needed.ceil() as u64).max(1);
    let shift = ERROR_CONSTANT * rho.powi(3) / (r as f64 * r as f64);
    if shift > delta * (1.0 + 1e-12) {
        return Err(Error::Consistency(format!(
            "planned r = {r} leaves eigenvalue shift {shift} above delta = {delta}"
        )));
    }
    Ok(TrotterPlan {
        r,
        t: 1.0 / r as f64,
        rho,
        delta,
        eigenvalue_shift: shift,
    })
}

pub fn plan_trotter(tim: &TimModel, delta: f64) -> Result<TrotterPlan> {
    plan_from_spread(spectral_spread_bound(tim), delta)
}

/// A plan with a caller-chosen `r`; `delta` records the resulting shift bound `12ρ³/r²`.
pub fn plan_with_steps(tim: &TimModel, r: u64) -> Result<TrotterPlan> {
    if r == 0 {
        return Err(Error::validation("r", "must be at least 1"));
    }
    let rho = spectral_spread_bound(tim);
    let shift = ERROR_CONSTANT * rho.powi(3) / (r as f64 * r as f64);
    Ok(TrotterPlan {
        r,
        t: 1.0 / r as f64,
        rho,
        delta: shift,
        eigenvalue_shift: shift,
    })
}

/// `D = t^{-3}[−(A+B)t + log(e^{At/2} e^{Bt} e^{At/2})]` and `‖D‖`.
pub fn trotter_error_operator(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> Result<(DMatrix<f64>, f64)> {
    let dim = a.nrows();
    if a.ncols() != dim || b.nrows() != dim || b.ncols() != dim {
        return Err(Error::validation("matrices", "A and B must be square of equal size"));
    }
    if dim > MAX_ERROR_DIM {
        return Err(Error::TooLarge {
            what: "Trotter error operator",
            got: dim,
            max: MAX_ERROR_DIM,
        });
    }
    if linalg::max_asymmetry(a) > 1e-12 || linalg::max_asymmetry(b) > 1e-12 {
        return Err(Error::validation("matrices", "A and B must be symmetric"));
    }
    let rho = linalg::spread(a) + linalg::spread(b);
    if !(t > 0.0) || 2.0 * rho * t > 1.0 + 1e-12 {
        return Err(Error::Range {
            name: "t",
            value: t,
            expected: "(0, 1/(2ρ)]",
        });
    }
    let half_a = linalg::sym_exp(a, t / 2.0);
    let product = &half_a * linalg::sym_exp(b, t) * &half_a;
    let log = linalg::sym_log(&product)?;
    let d = (log - (a + b) * t) / t.powi(3);
    let d = 0.5 * (&d + d.transpose());
    let norm = linalg::spectral_norm_sym(&d);
    Ok((d, norm))
}

/// Fields raised to a floor, with the induced change in `log Z`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldFloor {
    pub model: TimModel,
    pub floor: f64,
    /// Qubits whose field was raised.
    pub raised: Vec<usize>,
    /// `Σ_u (floor − h_u)_+`, a bound on `|log Z' − log Z|` since `‖X_u‖ = 1`.
    pub log_perturbation: f64,
}

/// Raises every field to at least `delta / n`.
pub fn floor_fields(tim: &TimModel, delta: f64) -> Result<FieldFloor> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Range {
            name: "delta",
            value: delta,
            expected: "(0, inf)",
        });
    }
    let floor = delta / tim.n() as f64;
    let mut raised = Vec::new();
    let mut perturbation = 0.0;
    let fields: Vec<f64> = tim
        .fields()
        .iter()
        .enumerate()
        .map(|(u, &h)| {
            if h < floor {
                raised.push(u);
                perturbation += floor - h;
                floor
            } else {
                h
            }
        })
        .collect();
    if !raised.is_empty() {
        log::info!(
            "raised {} field(s) to {floor}; |Δ log Z| ≤ {perturbation}",
            raised.len()
        );
    }
    Ok(FieldFloor {
        model: tim.with_fields(fields)?,
        floor,
        raised,
        log_perturbation: perturbation,
    })
}

/// The classical model whose weighted partition sum equals the Trotterized trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalMapping {
    /// Spin `layer·n + u`; carries `log_prefactor`.
    pub ising: ClassicalIsingModel,
    pub n: usize,
    pub plan: TrotterPlan,
    /// `h̃_u = −½ log tanh(t h_u)`.
    pub interlayer: Vec<f64>,
    pub floor: Option<FieldFloor>,
}

/// `h̃ = −½ log tanh(x)` for `x = t·h > 0`.
pub fn interlayer_coupling(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Range {
            name: "t*h",
            value: x,
            expected: "(0, inf)",
        });
    }
    Ok(-0.5 * x.tanh().ln())
}

/// `log Γ = −½ log 2 + ½ log sinh(2x)` for one qubit, `x = t·h`.
pub fn log_gamma_factor(x: f64) -> f64 {
    // log sinh(2x) = 2x + log(1 − e^{−4x}) − log 2
    let log_sinh = 2.0 * x + (-(-4.0 * x).exp()).ln_1p() - std::f64::consts::LN_2;
    -0.5 * std::f64::consts::LN_2 + 0.5 * log_sinh
}

/// Builds the `n·r`-spin classical model.
///
/// With `field_floor_delta = Some(δ)` the fields are first raised to `δ/n`.
/// One layer (`r = 1`) has no inter-layer edges; its constant `Σ h̃_u` goes into
/// the prefactor. Two layers get a single edge of weight `2h̃_u` per qubit.
pub fn map_to_classical(
    tim: &TimModel,
    plan: &TrotterPlan,
    field_floor_delta: Option<f64>,
) -> Result<ClassicalMapping> {
    tim.require_ferromagnetic()?;
    if let Some(u) = tim.fields().iter().position(|&h| h < 0.0) {
        return Err(Error::validation(
            format!("fields[{u}]"),
            "negative field; apply the stoquastic gauge first",
        ));
    }
    let floor = field_floor_delta.map(|d| floor_fields(tim, d)).transpose()?;
    let model = floor.as_ref().map_or(tim, |f| &f.model);
    let n = model.n();
    let r = usize::try_from(plan.r).map_err(|_| Error::validation("r", "too large"))?;
    let t = plan.t;
    let interlayer = model
        .fields()
        .iter()
        .map(|&h| interlayer_coupling(t * h))
        .collect::<Result<Vec<f64>>>()?;
    let mut log_prefactor = r as f64 * model.fields().iter().map(|&h| log_gamma_factor(t * h)).sum::<f64>();
    let mut edges = Vec::new();
    for layer in 0..r {
        let base = layer * n;
        for &(u, v, j) in model.couplings() {
            if j != 0.0 {
                edges.push((base + u, base + v, t * j));
            }
        }
    }
    match r {
        1 => log_prefactor += interlayer.iter().sum::<f64>(),
        2 => {
            for (u, &w) in interlayer.iter().enumerate() {
                edges.push((u, n + u, 2.0 * w));
            }
        }
        _ => {
            for layer in 0..r {
                let next = (layer + 1) % r;
                for (u, &w) in interlayer.iter().enumerate() {
                    edges.push((layer * n + u, next * n + u, w));
                }
            }
        }
    }
    let ising = ClassicalIsingModel::new(n * r, edges, log_prefactor)?;
    Ok(ClassicalMapping {
        ising,
        n,
        plan: *plan,
        interlayer,
        floor,
    })
}

/// Dense `tr (e^{At} e^{Bt})^r` with `t = 1/r`, evaluated through the
/// symmetric form `e^{At/2} e^{Bt} e^{At/2}`.
pub fn trotterized_trace_exact(tim: &TimModel, r: u64) -> Result<PartitionValue> {
    if tim.n() > MAX_TRACE_QUBITS {
        return Err(Error::TooLarge {
            what: "Trotterized trace",
            got: tim.n(),
            max: MAX_TRACE_QUBITS,
        });
    }
    if r == 0 {
        return Err(Error::validation("r", "must be at least 1"));
    }
    let (a, b) = tim_dense_parts(tim)?;
    let t = 1.0 / r as f64;
    let half_a = linalg::sym_exp(&a, t / 2.0);
    let s = &half_a * linalg::sym_exp(&b, t) * &half_a;
    let s = 0.5 * (&s + s.transpose());
    let mu = linalg::eigenvalues(&s);
    if let Some(bad) = mu.iter().find(|&&m| m <= 0.0) {
        return Err(Error::Consistency(format!("Trotter product has eigenvalue {bad:e}")));
    }
    let logs: Vec<f64> = mu.iter().map(|m| r as f64 * m.ln()).collect();
    Ok(PartitionValue::from_log(log_sum_exp(&logs)))
}

/// Dense `Z = tr e^{A+B}`.
pub fn tim_partition_exact(tim: &TimModel) -> Result<PartitionValue> {
    let (a, b) = tim_dense_parts(tim)?;
    let logs: Vec<f64> = linalg::eigenvalues(&(a + b));
    Ok(PartitionValue::from_log(log_sum_exp(&logs)))
}
