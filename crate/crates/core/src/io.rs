//! JSON model files.
//!
//! Three shapes are recognised by their keys:
//!
//! - local Hamiltonian: `{"n": 2, "terms": [{"qubits": [0, 1], "matrix": [[...], ...]}]}`
//! - TIM: `{"n": 2, "couplings": [[0, 1, 1.0]], "fields": [1.0, 1.0]}`
//! - classical Ising: `{"N": 4, "edges": [[0, 1, 0.5]], "log_prefactor": 0.0}`
//!
//! Local and TIM files may carry optional `lambda_yes` / `lambda_no` thresholds.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ising::ClassicalIsingModel;
use crate::model::{tim_to_local, LocalTerm, StoquasticHamiltonian, TimModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub qubits: Vec<usize>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianFile {
    pub n: usize,
    pub terms: Vec<TermFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_yes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_no: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimFile {
    pub n: usize,
    #[serde(default)]
    pub couplings: Vec<(usize, usize, f64)>,
    pub fields: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_yes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_no: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingFile {
    #[serde(rename = "N", alias = "n")]
    pub num_spins: usize,
    #[serde(default)]
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub log_prefactor: f64,
}

impl HamiltonianFile {
    pub fn build(&self) -> Result<StoquasticHamiltonian> {
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| {
                LocalTerm::from_rows(t.qubits.clone(), &t.matrix).map_err(|e| prefix(e, &format!("terms[{i}]")))
            })
            .collect::<Result<Vec<_>>>()?;
        StoquasticHamiltonian::new(self.n, terms)
    }

    pub fn from_hamiltonian(h: &StoquasticHamiltonian) -> Self {
        Self {
            n: h.n(),
            terms: h
                .terms()
                .iter()
                .map(|t| TermFile {
                    qubits: t.support().to_vec(),
                    matrix: t.rows(),
                })
                .collect(),
            lambda_yes: None,
            lambda_no: None,
        }
    }
}

impl TimFile {
    pub fn build(&self) -> Result<TimModel> {
        TimModel::new(self.n, self.couplings.clone(), self.fields.clone())
    }

    pub fn from_model(tim: &TimModel) -> Self {
        Self {
            n: tim.n(),
            couplings: tim.couplings().to_vec(),
            fields: tim.fields().to_vec(),
            lambda_yes: None,
            lambda_no: None,
        }
    }
}

impl IsingFile {
    pub fn build(&self) -> Result<ClassicalIsingModel> {
        ClassicalIsingModel::new(self.num_spins, self.edges.clone(), self.log_prefactor)
    }

    pub fn from_model(model: &ClassicalIsingModel) -> Self {
        Self {
            num_spins: model.num_spins(),
            edges: model.edges().to_vec(),
            log_prefactor: model.log_prefactor(),
        }
    }
}

fn prefix(e: Error, path: &str) -> Error {
    match e {
        Error::Validation { field, reason } => Error::Validation {
            field: format!("{path}.{field}"),
            reason,
        },
        other => other,
    }
}

/// Any of the three model shapes, parsed and validated.
#[derive(Clone, Debug)]
pub enum ModelFile {
    Local(HamiltonianFile),
    Tim(TimFile),
    Ising(IsingFile),
}

impl ModelFile {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelFile::Local(_) => "local",
            ModelFile::Tim(_) => "tim",
            ModelFile::Ising(_) => "ising",
        }
    }

    /// The stoquastic Hamiltonian of a local or TIM file.
    pub fn hamiltonian(&self) -> Result<StoquasticHamiltonian> {
        match self {
            ModelFile::Local(f) => f.build(),
            ModelFile::Tim(f) => tim_to_local(&f.build()?),
            ModelFile::Ising(_) => Err(Error::validation("model", "expected a quantum model, got a classical Ising file")),
        }
    }

    pub fn tim(&self) -> Result<TimModel> {
        match self {
            ModelFile::Tim(f) => f.build(),
            _ => Err(Error::validation("model", format!("expected a TIM file, got a {} file", self.kind()))),
        }
    }

    pub fn ising(&self) -> Result<ClassicalIsingModel> {
        match self {
            ModelFile::Ising(f) => f.build(),
            _ => Err(Error::validation("model", format!("expected a classical Ising file, got a {} file", self.kind()))),
        }
    }

    /// `(λ_yes, λ_no)` stored in the file, if any.
    pub fn thresholds(&self) -> (Option<f64>, Option<f64>) {
        match self {
            ModelFile::Local(f) => (f.lambda_yes, f.lambda_no),
            ModelFile::Tim(f) => (f.lambda_yes, f.lambda_no),
            ModelFile::Ising(_) => (None, None),
        }
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::validation("json", e.to_string())
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let value: Value = serde_json::from_str(text).map_err(json_error)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::validation("json", "top level must be an object"))?;
    let model = if obj.contains_key("terms") {
        ModelFile::Local(serde_json::from_value(value).map_err(json_error)?)
    } else if obj.contains_key("couplings") || obj.contains_key("fields") {
        ModelFile::Tim(serde_json::from_value(value).map_err(json_error)?)
    } else if obj.contains_key("edges") || obj.contains_key("N") {
        ModelFile::Ising(serde_json::from_value(value).map_err(json_error)?)
    } else {
        return Err(Error::validation(
            "model",
            "cannot tell the model type: expected `terms`, `couplings`/`fields` or `edges`",
        ));
    };
    // Validate eagerly so field errors surface at load time.
    match &model {
        ModelFile::Local(f) => {
            f.build()?;
        }
        ModelFile::Tim(f) => {
            f.build()?;
        }
        ModelFile::Ising(f) => {
            f.build()?;
        }
    }
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::validation("model", format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text)
}

pub fn ising_to_json(model: &ClassicalIsingModel) -> String {
    serde_json::to_string_pretty(&IsingFile::from_model(model)).expect("plain data serializes")
}
