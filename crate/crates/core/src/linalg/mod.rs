//! Sparse systems: triplet assembly, compressed storage, sparse LU solves,
//! multiplier condensation and 1-norm condition estimation.

mod condest;
mod schur;
mod sparse;

use std::io::Write;
use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::DVector;

pub use condest::{condest_1norm, dense_condition_1norm};
pub use schur::{schur_back_substitute, schur_condense_bh};
pub use sparse::{CscMatrix, TripletList};

use crate::{Error, Result};

/// Relative residual bound enforced after every solve.
pub const RESIDUAL_BOUND: f64 = 1e-10;

/// Multiplier unknowns of one boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiplierBlock {
    pub edge: usize,
    /// First global index (at least `n_u`).
    pub offset: usize,
    pub size: usize,
}

/// Layout `[u; lambda]` of a saddle system.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePartition {
    pub n_u: usize,
    pub blocks: Vec<MultiplierBlock>,
}

impl SaddlePartition {
    pub fn n_lambda(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CscMatrix,
    pub rhs: DVector<f64>,
    /// Set when the assembled form is symmetric; checked on construction.
    pub symmetric: bool,
    pub partition: Option<SaddlePartition>,
}

impl LinearSystem {
    pub fn new(
        matrix: CscMatrix,
        rhs: DVector<f64>,
        symmetric: bool,
        partition: Option<SaddlePartition>,
    ) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != rhs.len() {
            return Err(Error::InvalidArgument(format!(
                "system shape {}x{} with rhs of length {}",
                matrix.nrows(),
                matrix.ncols(),
                rhs.len()
            )));
        }
        if let Some(p) = &partition {
            if p.n_u + p.n_lambda() != matrix.nrows() {
                return Err(Error::InvalidArgument("saddle partition does not match the system size".into()));
            }
        }
        if symmetric {
            let asym = matrix.asymmetry();
            if asym > 1e-12 {
                return Err(Error::InvalidArgument(format!("system flagged symmetric but max |A - A^T| = {asym:.3e}")));
            }
        }
        Ok(Self { matrix, rhs, symmetric, partition })
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// `||A x - b||_inf / (||A||_inf ||x||_inf + ||b||_inf)`.
    pub fn relative_residual(&self, x: &DVector<f64>) -> f64 {
        let r = self.matrix.mul_vec(x) - &self.rhs;
        let denom = self.matrix.norm_inf() * x.amax() + self.rhs.amax();
        if denom == 0.0 {
            0.0
        } else {
            r.amax() / denom
        }
    }

    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.matrix.nrows(), self.matrix.ncols(), self.matrix.nnz())?;
        for (r, c, v) in self.matrix.iter() {
            writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
        }
        Ok(())
    }
}

/// Sparse LU factors of a square matrix.
pub struct Factorization {
    lu: Lu<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization").field("n", &self.n).finish()
    }
}

impl Factorization {
    pub fn new(matrix: &CscMatrix) -> Result<Self> {
        let n = matrix.nrows();
        let triplets: Vec<Triplet<usize, usize, f64>> = matrix.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Backend(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::SingularMatrix { pivot: Some(index) },
            LuError::Generic(g) => Error::Backend(format!("{g:?}")),
        })?;
        let f = Self { lu, n };
        // the numeric factorization does not report zero pivots: probe with a solve
        f.solve(&DVector::from_element(n, 1.0))?;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let mut m = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(m.as_mut());
        finite(DVector::from_fn(self.n, |i, _| m[(i, 0)]))
    }

    pub fn solve_transpose(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let mut m = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_transpose_in_place(m.as_mut());
        finite(DVector::from_fn(self.n, |i, _| m[(i, 0)]))
    }
}

fn finite(x: DVector<f64>) -> Result<DVector<f64>> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::SingularMatrix { pivot: Some(i) }),
        None => Ok(x),
    }
}

/// Solution and diagnostics of a direct solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: DVector<f64>,
    pub residual: f64,
    pub refinement_steps: usize,
}

/// Sparse LU solve with the residual bound enforced; up to three steps of
/// iterative refinement are applied before failing.
pub fn solve(system: &LinearSystem) -> Result<SolveOutcome> {
    let f = Factorization::new(&system.matrix)?;
    solve_factored(system, &f)
}

pub fn solve_factored(system: &LinearSystem, f: &Factorization) -> Result<SolveOutcome> {
    let mut x = f.solve(&system.rhs)?;
    let mut residual = system.relative_residual(&x);
    let mut steps = 0;
    while residual > RESIDUAL_BOUND && steps < 3 {
        let r = &system.rhs - system.matrix.mul_vec(&x);
        x += f.solve(&r)?;
        residual = system.relative_residual(&x);
        steps += 1;
    }
    if residual > RESIDUAL_BOUND {
        return Err(Error::ResidualTooLarge { residual, bound: RESIDUAL_BOUND });
    }
    Ok(SolveOutcome { x, residual, refinement_steps: steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn dense_system(a: &DMatrix<f64>, b: DVector<f64>) -> LinearSystem {
        LinearSystem::new(CscMatrix::from_dense(a), b, false, None).unwrap()
    }

    #[test]
    fn identity_solve() {
        let s = dense_system(&DMatrix::identity(4, 4), DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]));
        let x = solve(&s).unwrap().x;
        assert_eq!(x, DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn small_saddle() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        let x = solve(&dense_system(&a, DVector::from_vec(vec![2.0, 1.0]))).unwrap().x;
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_spd_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 50;
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &m * m.transpose() + DMatrix::identity(n, n) * n as f64;
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let x = solve(&dense_system(&a, b.clone())).unwrap();
        let oracle = a.clone().lu().solve(&b).unwrap();
        assert!((x.x - oracle).amax() < 1e-10);
        assert!(x.residual <= RESIDUAL_BOUND);
    }

    #[test]
    fn singular_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(solve(&dense_system(&a, DVector::from_vec(vec![1.0, 1.0]))).is_err());
    }

    #[test]
    fn symmetric_flag_checked() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(LinearSystem::new(CscMatrix::from_dense(&a), DVector::zeros(2), true, None).is_err());
    }

    #[test]
    fn matrix_market_export() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let s = dense_system(&a, DVector::zeros(2));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mtx");
        s.write_matrix_market(&p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("%%MatrixMarket"));
        assert_eq!(text.lines().nth(1).unwrap(), "2 2 3");
    }
}
