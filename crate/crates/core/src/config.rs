//! JSON model configuration and the validation report behind `twotime check`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    max_abs_diff, DensityOperator, DensityRole, HermitianOperator, HilbertSpace, OperatorData,
};
use crate::model::{
    build_grw_family, build_projective_family, build_projective_family_weighted,
    check_symmetry_conditions, position_operator, CollapseFamily, EventSchedule, TwoTimeModel,
};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilyConfig {
    /// Complete orthogonal projectors. `weights` defaults to all ones.
    Projective {
        projectors: Vec<OperatorData>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// GRW Gaussians on `lattice` for a particle at the given positions.
    Grw {
        lattice: Vec<f64>,
        positions: Vec<f64>,
        alpha: f64,
    },
}

impl FamilyConfig {
    pub fn build(&self) -> Result<CollapseFamily> {
        match self {
            FamilyConfig::Projective { projectors, weights } => {
                let ps = projectors
                    .iter()
                    .map(HermitianOperator::from_data)
                    .collect::<Result<Vec<_>>>()?;
                match weights {
                    None => build_projective_family(ps),
                    Some(w) => build_projective_family_weighted(ps, w.clone()),
                }
            }
            FamilyConfig::Grw {
                lattice,
                positions,
                alpha,
            } => build_grw_family(lattice, &position_operator(positions)?, *alpha),
        }
    }
}

/// Model description as read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub basis_labels: Vec<String>,
    #[serde(rename = "H")]
    pub hamiltonian: OperatorData,
    pub family: FamilyConfig,
    pub schedule: Vec<f64>,
    #[serde(rename = "rho_I")]
    pub rho_initial: OperatorData,
    #[serde(rename = "rho_F")]
    pub rho_final: OperatorData,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn space(&self) -> Result<HilbertSpace> {
        if self.basis_labels.len() != self.dim {
            return Err(Error::Shape(format!(
                "dim is {} but {} basis labels given",
                self.dim,
                self.basis_labels.len()
            )));
        }
        HilbertSpace::new(self.basis_labels.clone())
    }

    /// Fully validated model.
    pub fn build(&self) -> Result<TwoTimeModel> {
        TwoTimeModel::new(
            self.space()?,
            HermitianOperator::from_data(&self.hamiltonian)?,
            self.family.build()?,
            EventSchedule::new(self.schedule.clone())?,
            HermitianOperator::from_data(&self.rho_initial)?,
            HermitianOperator::from_data(&self.rho_final)?,
        )
    }

    /// Runs every model check without stopping at the first failure.
    pub fn check(&self) -> CheckReport {
        let tol = Tolerances::DEFAULT;
        let mut items = Vec::new();

        match self.space() {
            Ok(_) => items.push(CheckItem::flag("basis", true, "")),
            Err(e) => items.push(CheckItem::flag("basis", false, e.to_string())),
        }
        match EventSchedule::new(self.schedule.clone()) {
            Ok(s) => items.push(CheckItem::flag(
                "schedule",
                true,
                format!("{} interior events", s.interior_count()),
            )),
            Err(e) => items.push(CheckItem::flag("schedule", false, e.to_string())),
        }

        let h = match self.hamiltonian.to_matrix() {
            Ok(m) => {
                let residual = max_abs_diff(&m, &m.adjoint());
                items.push(CheckItem::measured("h_hermiticity", residual, tol.herm, ""));
                HermitianOperator::new(m).ok()
            }
            Err(e) => {
                items.push(CheckItem::flag("h_hermiticity", false, e.to_string()));
                None
            }
        };

        let family = match self.family.build() {
            Ok(f) => {
                items.push(CheckItem::measured(
                    "completeness_residual",
                    f.completeness_residual(),
                    tol.complete,
                    "",
                ));
                Some(f)
            }
            Err(e) => {
                items.push(CheckItem::flag("completeness_residual", false, e.to_string()));
                None
            }
        };

        match (&h, &family) {
            (Some(h), Some(f)) => {
                let s = check_symmetry_conditions(h, f);
                items.push(CheckItem::measured("symmetry_h_asym", s.h_asym, tol.sym, "H must be a symmetric matrix"));
                items.push(CheckItem::measured("symmetry_l_asym", s.l_asym, tol.sym, "every L must be a symmetric matrix"));
            }
            _ => items.push(CheckItem::flag(
                "symmetry",
                false,
                "not evaluated: H or the collapse family failed to build",
            )),
        }

        items.push(boundary_item("rho_I", &self.rho_initial, DensityRole::State, self.dim));
        items.push(boundary_item("rho_F", &self.rho_final, DensityRole::PovmElement, self.dim));

        let dims_ok = [
            self.hamiltonian.dim,
            self.rho_initial.dim,
            self.rho_final.dim,
        ]
        .iter()
        .chain(family.as_ref().map(|f| f.dim()).as_ref())
        .all(|&d| d == self.dim);
        items.push(CheckItem::flag(
            "dimensions",
            dims_ok,
            if dims_ok { "" } else { "operator dimensions disagree with dim" },
        ));

        let pass = items.iter().all(|i| i.pass);
        CheckReport { items, pass }
    }
}

fn boundary_item(name: &str, data: &OperatorData, role: DensityRole, dim: usize) -> CheckItem {
    let what = match role {
        DensityRole::State => "positive semidefinite with unit trace",
        _ => "eigenvalues within [0, 1]",
    };
    let op = match HermitianOperator::from_data(data) {
        Ok(op) => op,
        Err(e) => return CheckItem::flag(name, false, e.to_string()),
    };
    if op.dim() != dim {
        return CheckItem::flag(name, false, format!("dim {} != {dim}", op.dim()));
    }
    let eig = op.eigenvalues().unwrap_or_default();
    let range = match (eig.first(), eig.last()) {
        (Some(lo), Some(hi)) => format!("eigenvalues in [{lo:.6e}, {hi:.6e}], trace {:.6e}", op.trace()),
        _ => String::new(),
    };
    match DensityOperator::new(op, role) {
        Ok(_) => CheckItem::flag(name, true, format!("{what}; {range}")),
        Err(e) => CheckItem::flag(name, false, format!("{e}; {range}")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: String,
    pub value: Option<f64>,
    pub limit: Option<f64>,
    pub pass: bool,
    pub note: String,
}

impl CheckItem {
    fn measured(name: &str, value: f64, limit: f64, note: &str) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            limit: Some(limit),
            pass: value <= limit,
            note: note.into(),
        }
    }

    fn flag(name: &str, pass: bool, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: None,
            limit: None,
            pass,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
    pub pass: bool,
}

impl CheckReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| !i.pass)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24} {:>12} {:>12}  {:<6} note", "check", "value", "limit", "status")?;
        for i in &self.items {
            let num = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
            writeln!(
                f,
                "{:<24} {:>12} {:>12}  {:<6} {}",
                i.name,
                num(i.value),
                num(i.limit),
                if i.pass { "ok" } else { "FAIL" },
                i.note
            )?;
        }
        writeln!(f, "result: {}", if self.pass { "PASS" } else { "FAIL" })
    }
}
