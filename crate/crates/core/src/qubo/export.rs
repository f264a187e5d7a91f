//! File formats for models: dense JSON and upper-triangular sparse text.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use super::{Formulation, PenaltyBounds, QuadraticForm, QuboModel};
use crate::error::{Error, Result};

pub(crate) mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        crate::qap::matrix_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        crate::qap::matrix_from_rows(&rows, rows.len(), ncols, "Q").map_err(serde::de::Error::custom)
    }
}

pub(crate) mod vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelParts {
    pub data: QuadraticForm,
    pub penalty: QuadraticForm,
}

/// Dense JSON layout of a [`QuboModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuboFile {
    pub dim: usize,
    pub formulation: Formulation,
    pub n: usize,
    #[serde(rename = "Q", with = "rows")]
    pub quad: DMatrix<f64>,
    pub q: Vec<f64>,
    pub offset: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<PenaltyBounds>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<ModelParts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<crate::Provenance>,
}

fn one() -> f64 {
    1.0
}

impl From<&QuboModel> for QuboFile {
    fn from(m: &QuboModel) -> Self {
        Self {
            dim: m.dim(),
            formulation: m.formulation(),
            n: m.n(),
            quad: m.q_matrix().clone(),
            q: m.q_vector().iter().copied().collect(),
            offset: m.offset(),
            scale: m.scale(),
            bounds: m.bounds().cloned(),
            lambdas: m.applied_lambdas(),
            parts: m.parts().map(|(d, p)| ModelParts {
                data: d.clone(),
                penalty: p.clone(),
            }),
            provenance: None,
        }
    }
}

impl TryFrom<QuboFile> for QuboModel {
    type Error = Error;

    fn try_from(f: QuboFile) -> Result<Self> {
        if f.dim != f.formulation.dim(f.n) {
            return Err(Error::invalid(format!(
                "dim {} does not match formulation {} with n = {}",
                f.dim, f.formulation, f.n
            )));
        }
        let total = QuadraticForm {
            quad: f.quad,
            linear: nalgebra::DVector::from_vec(f.q),
            offset: f.offset,
        };
        match f.parts {
            Some(parts) => {
                let model = QuboModel::from_parts(f.formulation, f.n, f.scale, f.bounds, parts.data, parts.penalty)?;
                if model.total() != &total {
                    log::warn!("stored Q/q/offset differ from data + penalty; using the stored totals");
                    return QuboModel::from_total(f.formulation, f.n, f.scale, model.bounds().cloned(), total);
                }
                Ok(model)
            }
            None => QuboModel::from_total(f.formulation, f.n, f.scale, f.bounds, total),
        }
    }
}

impl QuboModel {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&QuboFile::from(self))?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: QuboFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    /// SHA-256 of the JSON serialization, hex encoded.
    pub fn content_hash(&self) -> Result<String> {
        Ok(crate::sha256_hex(self.to_json_string()?.as_bytes()))
    }

    /// Upper-triangular text form: an `offset <value>` line, then `i j value`
    /// lines with `i ≤ j`. Off-diagonal values are `Q_ij + Q_ji`; diagonal
    /// values are `Q_ii + q_i`. Zero coefficients are omitted.
    pub fn to_sparse_text(&self) -> String {
        let q = self.q_matrix();
        let lin = self.q_vector();
        let mut out = String::new();
        let _ = writeln!(out, "offset {:?}", self.offset());
        for i in 0..self.dim() {
            let d = q[(i, i)] + lin[i];
            if d != 0.0 {
                let _ = writeln!(out, "{i} {i} {d:?}");
            }
            for j in i + 1..self.dim() {
                let v = q[(i, j)] + q[(j, i)];
                if v != 0.0 {
                    let _ = writeln!(out, "{i} {j} {v:?}");
                }
            }
        }
        out
    }
}

/// Reads the sparse text form back into a dense symmetric form.
pub fn parse_sparse_text(text: &str, dim: usize) -> Result<QuadraticForm> {
    let mut form = QuadraticForm::zeros(dim);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::invalid(format!("line {}: cannot parse `{line}`", lineno + 1));
        match fields.as_slice() {
            ["offset", v] => form.offset += v.parse::<f64>().map_err(|_| bad())?,
            [i, j, v] => {
                let i: usize = i.parse().map_err(|_| bad())?;
                let j: usize = j.parse().map_err(|_| bad())?;
                let v: f64 = v.parse().map_err(|_| bad())?;
                if i >= dim || j >= dim || i > j {
                    return Err(bad());
                }
                if i == j {
                    form.linear[i] += v;
                } else {
                    form.quad[(i, j)] += v / 2.0;
                    form.quad[(j, i)] += v / 2.0;
                }
            }
            _ => return Err(bad()),
        }
    }
    Ok(form)
}
