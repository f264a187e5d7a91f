use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{QuboModel, SpinModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if min > max {
            Self { min: 0.0, max: 0.0 }
        } else {
            Self { min, max }
        }
    }

    pub fn abs_max(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

/// Coefficient ranges of the data and penalty contributions, in the Ising
/// form handed to an annealer, after joint rescaling into
/// `|Q| ≤ 1`, `|q| ≤ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub scale_factor: f64,
    pub q_total: ValueRange,
    pub lin_total: ValueRange,
    pub q_prob: ValueRange,
    pub lin_prob: ValueRange,
    pub q_reg: ValueRange,
    pub lin_reg: ValueRange,
    /// `max|Q_reg| / max|Q_prob|`; `None` when the data couplings vanish.
    pub coupling_ratio: Option<f64>,
    /// `max|q_reg| / max|q_prob|`; `None` when the data biases vanish.
    pub bias_ratio: Option<f64>,
}

fn off_diagonal(m: &DMatrix<f64>) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).filter(move |&j| j != i).map(move |j| m[(i, j)]))
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Splits the model into problem and penalty parts and reports their ranges.
pub fn coupling_report(model: &QuboModel) -> Result<CouplingReport> {
    let (data, pen) = model
        .parts()
        .ok_or_else(|| Error::invalid("model does not carry its data/penalty split"))?;
    let total = SpinModel::from_binary_form(model.total())?;
    let prob = SpinModel::from_binary_form(data)?;
    let reg = SpinModel::from_binary_form(pen)?;
    let s = total.normalization_factor();

    let q = |m: &SpinModel| ValueRange::of(off_diagonal(&(&m.quad * s)));
    let l = |m: &SpinModel| ValueRange::of(m.linear.iter().map(|v| v * s));
    let (q_prob, q_reg) = (q(&prob), q(&reg));
    let (lin_prob, lin_reg) = (l(&prob), l(&reg));
    Ok(CouplingReport {
        scale_factor: s,
        q_total: q(&total),
        lin_total: l(&total),
        q_prob,
        lin_prob,
        q_reg,
        lin_reg,
        coupling_ratio: ratio(q_reg.abs_max(), q_prob.abs_max()),
        bias_ratio: ratio(lin_reg.abs_max(), lin_prob.abs_max()),
    })
}
