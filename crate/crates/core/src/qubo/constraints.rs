use nalgebra::{DMatrix, DVector};

/// The linear system `A x = b` whose binary solutions are exactly the
/// vectorized permutation matrices.
///
/// Rows `0..n` are the `Id ⊗ 𝟙ᵀ` block (with column-major `vec` these sum
/// column `i` of `X`), rows `n..2n` are the `𝟙ᵀ ⊗ Id` block (row `i - n` of
/// `X`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    n: usize,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl ConstraintSystem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn num_constraints(&self) -> usize {
        2 * self.n
    }

    /// Variable indices appearing in constraint `i`.
    pub fn support(&self, i: usize) -> Vec<usize> {
        line_support(self.n, i)
    }

    /// `true` iff `A x = b` for the 0/1 vector `x`.
    pub fn is_satisfied(&self, x: &[u8]) -> bool {
        (0..self.num_constraints()).all(|i| self.residual(i, x) == 0)
    }

    /// `(A x)_i - b_i` evaluated in integers.
    pub fn residual(&self, i: usize, x: &[u8]) -> i64 {
        let s: i64 = self.support(i).iter().map(|&k| i64::from(x[k])).sum();
        s - 1
    }
}

/// Support of row `i` of `A` for side length `n`.
pub(crate) fn line_support(n: usize, i: usize) -> Vec<usize> {
    if i < n {
        (i * n..(i + 1) * n).collect()
    } else {
        let r = i - n;
        (0..n).map(|col| col * n + r).collect()
    }
}

/// `A = (Id ⊗ 𝟙ᵀ ; 𝟙ᵀ ⊗ Id)`, `b = 𝟙`.
pub fn build_constraints(n: usize) -> ConstraintSystem {
    assert!(n >= 1, "constraint system needs n >= 1");
    let mut a = DMatrix::zeros(2 * n, n * n);
    for i in 0..2 * n {
        for k in line_support(n, i) {
            a[(i, k)] = 1.0;
        }
    }
    ConstraintSystem {
        n,
        a,
        b: DVector::from_element(2 * n, 1.0),
    }
}
