//! Provable penalty multipliers and the reduced objective of the inserted
//! formulation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::constraints::line_support;
use crate::error::{Error, Result};
use crate::qap::{vec_index, QapInstance};

/// Lower bounds on the penalty multipliers of each formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyBounds {
    /// Single multiplier of the baseline formulation.
    pub lambda_baseline: f64,
    /// One multiplier per row of the constraint matrix (`2n` entries).
    pub lambda_rows: Vec<f64>,
    /// Exclusion multipliers of the inserted formulation, one per reduced
    /// line (`2(n-1)` entries; empty for `n = 1`).
    pub lambda1: Vec<f64>,
    /// Cardinality multiplier of the inserted formulation.
    pub lambda2: f64,
}

/// Largest change of `xᵀWx + cᵀx` caused by flipping a single variable `k`,
/// maximized over `k ∈ set`.
pub fn max_flip_influence(w: &DMatrix<f64>, c: &DVector<f64>, set: impl IntoIterator<Item = usize>) -> f64 {
    set.into_iter()
        .map(|k| {
            let cross: f64 = (0..w.nrows()).map(|i| (w[(k, i)] + w[(i, k)]).abs()).sum();
            cross + w[(k, k)].abs() + c[k].abs()
        })
        .fold(0.0, f64::max)
}

/// The QAP objective after eliminating the first row and column of `X`.
///
/// Reduced variable `r` stands for `X[i, j]` with `i, j ≥ 1`, numbered
/// column-major over the `(n-1) × (n-1)` lower-right block:
/// `r = (j - 1)(n - 1) + (i - 1)`. On every binary `y` the value
/// `yᵀ W̃ y + c̃ᵀ y + constant` equals `f(X(y))` where `X(y)` fills the first
/// row and column from the sum-to-one identities. `W̃` is symmetric with zero
/// diagonal (squares were folded into `c̃`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedObjective {
    pub n: usize,
    pub w: DMatrix<f64>,
    pub c: DVector<f64>,
    pub constant: f64,
}

/// Column-major index of `X[i, j]` (`i, j ≥ 1`) among the reduced variables.
#[inline]
pub fn reduced_index(n: usize, row: usize, col: usize) -> usize {
    (col - 1) * (n - 1) + (row - 1)
}

/// Affine map `x = M y + m0` from reduced to full (column-major) variables.
pub fn elimination_map(n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let m = (n - 1) * (n - 1);
    let mut map = DMatrix::zeros(n * n, m);
    let mut shift = DVector::zeros(n * n);
    for col in 1..n {
        for row in 1..n {
            let r = reduced_index(n, row, col);
            map[(vec_index(n, row, col), r)] = 1.0;
            // X[0, col] = 1 - Σ_i X[i, col]
            map[(vec_index(n, 0, col), r)] = -1.0;
            // X[row, 0] = 1 - Σ_j X[row, j]
            map[(vec_index(n, row, 0), r)] = -1.0;
            // X[0, 0] = 2 - n + Σ X[i, j]
            map[(vec_index(n, 0, 0), r)] = 1.0;
        }
    }
    for k in 1..n {
        shift[vec_index(n, 0, k)] = 1.0;
        shift[vec_index(n, k, 0)] = 1.0;
    }
    shift[vec_index(n, 0, 0)] = 2.0 - n as f64;
    (map, shift)
}

/// Substitutes the eliminated variables into `xᵀWx + cᵀx` and collects terms.
pub fn reduce_inserted(inst: &QapInstance) -> Result<ReducedObjective> {
    let n = inst.n();
    if n < 2 {
        return Err(Error::invalid("the inserted formulation needs n >= 2"));
    }
    let (map, shift) = elimination_map(n);
    let w = inst.w();
    let c = inst.c();
    let quad = map.transpose() * w * &map;
    let mut lin = map.transpose() * ((w + w.transpose()) * &shift) + map.transpose() * c;
    let constant = shift.dot(&(w * &shift)) + c.dot(&shift);
    let mut sym = (&quad + quad.transpose()) * 0.5;
    for r in 0..sym.nrows() {
        lin[r] += sym[(r, r)];
        sym[(r, r)] = 0.0;
    }
    Ok(ReducedObjective {
        n,
        w: sym,
        c: lin,
        constant,
    })
}

impl ReducedObjective {
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn energy(&self, y: &[u8]) -> f64 {
        let ones: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
        let mut e = self.constant;
        for &a in &ones {
            for &b in &ones {
                e += self.w[(a, b)];
            }
            e += self.c[a];
        }
        e
    }
}

/// Reduced variables on line `g` of the `(n-1) × (n-1)` grid: `g < n-1` is
/// the block `⌊r/(n-1)⌋ = g`, otherwise the residue class `r mod (n-1) = g-(n-1)`.
pub(crate) fn reduced_line_support(n: usize, g: usize) -> Vec<usize> {
    line_support(n - 1, g)
}

/// Computes every bound from the instance.
pub fn penalty_bounds(inst: &QapInstance) -> PenaltyBounds {
    let n = inst.n();
    let w = inst.w();
    let c = inst.c();
    let abs_sum: f64 = w.iter().chain(c.iter()).map(|v| v.abs()).sum();
    let lambda_baseline = 0.5 * abs_sum;

    let d_all = max_flip_influence(w, c, 0..n * n);
    let lambda_rows = (0..2 * n)
        .map(|i| max_flip_influence(w, c, line_support(n, i)) + 0.5 * d_all)
        .collect();

    let (lambda1, lambda2) = match reduce_inserted(inst) {
        Ok(red) => {
            let m = red.dim();
            let d_red = max_flip_influence(&red.w, &red.c, 0..m);
            let l1 = (0..2 * (n - 1))
                .map(|g| 0.5 * max_flip_influence(&red.w, &red.c, reduced_line_support(n, g)) + 0.5 * d_red)
                .collect();
            (l1, 0.5 * d_red)
        }
        Err(_) => (Vec::new(), 0.0),
    };

    PenaltyBounds {
        lambda_baseline,
        lambda_rows,
        lambda1,
        lambda2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qap::{vectorize, BinaryVector, PermutationMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_instance_has_zero_bounds() {
        let b = penalty_bounds(&QapInstance::zeros(3));
        assert_eq!(b.lambda_baseline, 0.0);
        assert!(b.lambda_rows.iter().all(|&v| v == 0.0));
        assert!(b.lambda1.iter().all(|&v| v == 0.0));
        assert_eq!(b.lambda2, 0.0);
        assert_eq!(b.lambda_rows.len(), 6);
        assert_eq!(b.lambda1.len(), 4);
    }

    #[test]
    fn uniform_linear_costs() {
        let inst = QapInstance::linear(2, vec![1.0; 4]).unwrap();
        let b = penalty_bounds(&inst);
        assert_eq!(b.lambda_baseline, 2.0);
        assert_eq!(b.lambda_rows, vec![1.5; 4]);
    }

    #[test]
    fn random_bounds_are_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = QapInstance::random_uniform(3, &mut rng);
        let b = penalty_bounds(&inst);
        assert!(b.lambda_baseline > 0.0 && b.lambda2 > 0.0);
        assert!(b.lambda_rows.iter().chain(&b.lambda1).all(|&v| v > 0.0));
    }

    #[test]
    fn elimination_reproduces_permutations() {
        for n in 2..=4 {
            let (map, shift) = elimination_map(n);
            crate::qap::for_each_permutation(n, |a| {
                let p = PermutationMatrix::new(a.to_vec()).unwrap();
                let x = vectorize(&p);
                let y = DVector::from_iterator(
                    (n - 1) * (n - 1),
                    (0..(n - 1) * (n - 1)).map(|r| {
                        let (col, row) = (r / (n - 1) + 1, r % (n - 1) + 1);
                        f64::from(x.get(vec_index(n, row, col)))
                    }),
                );
                let full = &map * y + &shift;
                for k in 0..n * n {
                    assert_eq!(full[k], f64::from(x.get(k)));
                }
            });
        }
    }

    #[test]
    fn reduced_energy_matches_substitution_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = QapInstance::random_uniform(3, &mut rng);
        let red = reduce_inserted(&inst).unwrap();
        let (map, shift) = elimination_map(3);
        for z in 0..16u64 {
            let y = BinaryVector::from_index(z, 4);
            let yv = DVector::from_iterator(4, y.bits().iter().map(|&b| f64::from(b)));
            // X(y) may hold entries outside {0,1}; evaluate the polynomial directly.
            let x = &map * yv + &shift;
            let direct = x.dot(&(inst.w() * &x)) + inst.c().dot(&x);
            assert!((red.energy(y.bits()) - direct).abs() < 1e-12);
        }
    }
}
