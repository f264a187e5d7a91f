use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{QuadraticForm, QuboModel};
use crate::error::{Error, Result};

/// Ising form `sᵀ Q_s s + q_sᵀ s + offset_s` over `s ∈ {-1, 1}^m`, related to
/// the binary model by `s = 2x − 1`. `Q_s` is symmetric with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinModel {
    #[serde(rename = "Q_s", with = "super::export::rows")]
    pub quad: DMatrix<f64>,
    #[serde(rename = "q_s", with = "super::export::vector")]
    pub linear: DVector<f64>,
    #[serde(rename = "offset_s")]
    pub offset: f64,
}

impl SpinModel {
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    /// Converts a symmetric binary form.
    pub fn from_binary_form(form: &QuadraticForm) -> Result<Self> {
        let q = &form.quad;
        let scale = q.amax().max(1.0);
        for i in 0..q.nrows() {
            for j in 0..i {
                if (q[(i, j)] - q[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!(
                        "spin conversion needs a symmetric Q (entry ({i},{j}) differs)"
                    )));
                }
            }
        }
        let dim = form.dim();
        let row_sums = DVector::from_iterator(dim, q.row_iter().map(|r| r.sum()));
        let mut quad = q * 0.25;
        let mut diag = 0.0;
        for i in 0..dim {
            diag += quad[(i, i)];
            quad[(i, i)] = 0.0;
        }
        let linear = (row_sums + &form.linear) * 0.5;
        let offset = 0.25 * q.sum() + diag + 0.5 * form.linear.sum() + form.offset;
        Ok(Self { quad, linear, offset })
    }

    pub fn energy(&self, spins: &[i8]) -> f64 {
        let mut e = self.offset;
        for (i, &si) in spins.iter().enumerate() {
            let si = f64::from(si);
            let mut row = 0.0;
            for (j, &sj) in spins.iter().enumerate() {
                row += self.quad[(i, j)] * f64::from(sj);
            }
            e += si * row + self.linear[i] * si;
        }
        e
    }

    /// Energy of basis state `z`: bit `i` set means spin `i` is `+1`.
    pub fn energy_of_index(&self, z: u64) -> f64 {
        let spins: Vec<i8> = (0..self.dim())
            .map(|i| if (z >> i) & 1 == 1 { 1 } else { -1 })
            .collect();
        self.energy(&spins)
    }

    /// Largest absolute coupling and bias.
    pub fn coefficient_extent(&self) -> (f64, f64) {
        (self.quad.amax(), self.linear.amax())
    }

    /// Factor bringing couplings into `[-1, 1]` and biases into `[-2, 2]`
    /// jointly (the tighter of the two ranges decides); `1` for an all-zero
    /// model.
    pub fn normalization_factor(&self) -> f64 {
        let (qmax, lmax) = self.coefficient_extent();
        let m = qmax.max(lmax / 2.0);
        if m > 0.0 {
            1.0 / m
        } else {
            1.0
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            quad: &self.quad * factor,
            linear: &self.linear * factor,
            offset: self.offset * factor,
        }
    }

    /// Copy rescaled by [`SpinModel::normalization_factor`].
    pub fn normalized(&self) -> Self {
        self.scaled(self.normalization_factor())
    }
}

/// Spin form of a model; energies agree state by state.
pub fn to_spin(model: &QuboModel) -> Result<SpinModel> {
    SpinModel::from_binary_form(model.total())
}
