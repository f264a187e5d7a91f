//! Lanczos iteration with full reorthogonalization for the bottom of the
//! spectrum of a real symmetric operator.
//!
//! The second eigenvalue is found by a second run kept orthogonal to the
//! converged ground state, so a degenerate ground level is reported with its
//! multiplicity (a single Krylov space only ever sees one copy).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A real symmetric operator available only through its action.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl SymmetricOperator for super::Interpolated<'_> {
    fn dim(&self) -> usize {
        super::Interpolated::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        super::Interpolated::apply(self, x, y)
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, out) in y.iter_mut().enumerate() {
            *out = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Initial Krylov dimension; doubled on every retry.
    pub krylov_dim: usize,
    /// Restarts allowed after the first attempt.
    pub retries: usize,
    /// Residual threshold `‖Av − θv‖ ≤ tol · max(1, ‖A‖)`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            krylov_dim: 160,
            retries: 3,
            tol: 1e-10,
            seed: 0x51ec_7a1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(w: &mut [f64], against: &[Vec<f64>]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for v in against {
            let c = dot(v, w);
            axpy(-c, v, w);
        }
    }
}

fn random_unit(dim: usize, seed: u64, deflate: &[Vec<f64>]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    orthogonalize(&mut v, deflate);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// One Lanczos run of at most `max_k` steps from `start`; returns the lowest
/// Ritz pair and whether its residual met `tol`.
fn lanczos_run<A: SymmetricOperator + ?Sized>(
    op: &A,
    start: Vec<f64>,
    deflate: &[Vec<f64>],
    max_k: usize,
    tol: f64,
) -> (EigenPair, bool) {
    let dim = op.dim();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_k);
    let mut alphas = Vec::with_capacity(max_k);
    let mut betas: Vec<f64> = Vec::with_capacity(max_k);
    let mut v = start;
    let mut w = vec![0.0; dim];
    let mut scale = 0.0f64;
    let mut ritz: Option<(f64, Vec<f64>, f64)> = None;
    let mut next_check = 3;

    for j in 0..max_k {
        op.apply(&v, &mut w);
        let alpha = dot(&v, &w);
        axpy(-alpha, &v, &mut w);
        if let Some(prev) = basis.last() {
            axpy(-betas[j - 1], prev, &mut w);
        }
        basis.push(v);
        orthogonalize(&mut w, deflate);
        orthogonalize(&mut w, &basis);
        let beta = norm(&w);
        alphas.push(alpha);
        scale = scale.max(alpha.abs()).max(beta);

        let exhausted = beta <= 1e-13 * scale.max(1.0) || j + 1 == max_k || basis.len() + deflate.len() >= dim;
        if exhausted || j >= next_check {
            // Checks thin out geometrically; each costs a dense k×k solve.
            next_check = (j + 4).max(j + j / 6);
            let k = alphas.len();
            let t = DMatrix::from_fn(k, k, |a, b| {
                if a == b {
                    alphas[a]
                } else if a + 1 == b {
                    betas[a]
                } else if b + 1 == a {
                    betas[b]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (imin, &theta) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty tridiagonal");
            let s = eig.eigenvectors.column(imin).into_owned();
            let residual = beta * s[k - 1].abs();
            let done = exhausted || residual <= tol * scale.max(1.0);
            ritz = Some((theta, s.iter().copied().collect(), residual));
            if done {
                let converged = residual <= tol * scale.max(1.0) || beta <= 1e-13 * scale.max(1.0);
                let (theta, s, residual) = ritz.take().unwrap();
                return (ritz_pair(&basis, theta, &s, residual), converged);
            }
        }
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
    }
    let (theta, s, residual) = ritz.expect("at least one step");
    (ritz_pair(&basis, theta, &s, residual), false)
}

fn ritz_pair(basis: &[Vec<f64>], theta: f64, s: &[f64], residual: f64) -> EigenPair {
    let dim = basis[0].len();
    let mut vector = vec![0.0; dim];
    for (coef, b) in s.iter().zip(basis) {
        axpy(*coef, b, &mut vector);
    }
    let nv = norm(&vector);
    vector.iter_mut().for_each(|x| *x /= nv);
    EigenPair {
        value: theta,
        vector,
        residual,
    }
}

/// Lowest eigenpair of `op` restricted to the orthogonal complement of
/// `deflate` (orthonormal vectors).
pub fn lowest_eigenpair<A: SymmetricOperator + ?Sized>(
    op: &A,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
) -> Result<EigenPair> {
    let dim = op.dim();
    let room = dim.saturating_sub(deflate.len());
    if room == 0 {
        return Err(Error::invalid("no room left after deflation"));
    }
    let mut start = random_unit(dim, opts.seed ^ deflate.len() as u64, deflate);
    let mut k = opts.krylov_dim.max(2);
    for attempt in 0..=opts.retries {
        let (pair, converged) = lanczos_run(op, start, deflate, k.min(room), opts.tol);
        if converged {
            return Ok(pair);
        }
        log::debug!(
            "lanczos attempt {attempt} stopped at residual {:.3e}; restarting",
            pair.residual
        );
        // Restart from the current Ritz vector with a larger subspace.
        start = pair.vector;
        orthogonalize(&mut start, deflate);
        let ns = norm(&start);
        start.iter_mut().for_each(|x| *x /= ns);
        k *= 2;
    }
    Err(Error::NonConvergence(format!(
        "lowest eigenpair not resolved to {:.1e} after {} restarts",
        opts.tol, opts.retries
    )))
}

/// The two lowest eigenvalues, counted with multiplicity.
pub fn lowest_two<A: SymmetricOperator + ?Sized>(op: &A, opts: &LanczosOptions) -> Result<(f64, f64)> {
    if op.dim() < 2 {
        return Err(Error::invalid("need a dimension of at least two"));
    }
    let ground = lowest_eigenpair(op, &[], opts)?;
    let excited = lowest_eigenpair(op, std::slice::from_ref(&ground.vector), opts)?;
    let (e0, e1) = if excited.value < ground.value {
        (excited.value, ground.value)
    } else {
        (ground.value, excited.value)
    };
    Ok((e0, e1))
}
