//! Graph matching between the egocentric and top-view graphs.
//!
//! Candidate correspondences `(i, k)` (egocentric video `i` recorded by
//! top-view viewer `k`) are indexed as `i * n_top + k`. The affinity between
//! two candidates comes from correlating egocentric and top-view features;
//! the leading eigenvector of the affinity gives a soft assignment which is
//! rounded to a one-to-one hard assignment.

mod affinity;
mod hungarian;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use affinity::{build_affinity_fixed, build_affinity_free, CorrelationBank};
pub use hungarian::max_profit_assignment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinityMatrix {
    pub n_ego: usize,
    pub n_top: usize,
    pub data: Matrix,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl AffinityMatrix {
    pub fn new(n_ego: usize, n_top: usize, data: Matrix) -> Result<Self> {
        let n = n_ego * n_top;
        if data.rows() != n || data.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: data.rows() });
        }
        Ok(Self { n_ego, n_top, data, diagnostics: Vec::new() })
    }

    #[inline]
    pub fn index(&self, ego: usize, top: usize) -> usize {
        ego * self.n_top + top
    }

    pub fn entry(&self, i: usize, k: usize, j: usize, l: usize) -> f64 {
        self.data.get(self.index(i, k), self.index(j, l))
    }

    pub fn dim(&self) -> usize {
        self.n_ego * self.n_top
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { data: self.data.scale(c), ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub power_iter_tol: f64,
    pub power_iter_max: usize,
    /// Eigenvector entries are raised to at least this value.
    pub nonneg_floor: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { power_iter_tol: 1e-10, power_iter_max: 1000, nonneg_floor: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadingEigen {
    pub lambda: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration from the uniform positive vector.
///
/// Stops when successive unit iterates differ by less than `power_iter_tol`
/// in the infinity norm. Running out of iterations yields
/// [`Error::NoConvergence`] carrying the last iterate.
pub fn leading_eigenvector(a: &Matrix, cfg: &SpectralConfig) -> Result<LeadingEigen> {
    let e = power_iteration(a, cfg)?;
    if e.converged {
        Ok(e)
    } else {
        Err(Error::NoConvergence { lambda: e.lambda, vector: e.vector, iterations: e.iterations })
    }
}

/// Like [`leading_eigenvector`] but returns the last iterate when the
/// iteration budget runs out.
pub fn power_iteration(a: &Matrix, cfg: &SpectralConfig) -> Result<LeadingEigen> {
    let n = a.rows();
    if n == 0 || a.as_slice().iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let mut p = vec![1.0 / (n as f64).sqrt(); n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.power_iter_max {
        iterations += 1;
        let q = a.mul_vec(&p);
        let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let next: Vec<f64> = q.iter().map(|x| x / norm).collect();
        let change = next.iter().zip(&p).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        p = next;
        if change < cfg.power_iter_tol {
            converged = true;
            break;
        }
    }
    let ap = a.mul_vec(&p);
    let lambda = p.iter().zip(&ap).map(|(x, y)| x * y).sum::<f64>();
    for v in &mut p {
        *v = v.max(cfg.nonneg_floor);
    }
    Ok(LeadingEigen { lambda, vector: p, iterations, converged })
}

/// Row-stochastic `n_ego x n_top` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftAssignment {
    pub p: Matrix,
}

impl SoftAssignment {
    pub fn n_ego(&self) -> usize {
        self.p.rows()
    }

    pub fn n_top(&self) -> usize {
        self.p.cols()
    }
}

/// Reshapes `p` row-major into `n_ego x n_top` and normalizes every row to
/// sum to one; an all-zero row becomes uniform.
pub fn soft_assignment(p: &[f64], n_ego: usize, n_top: usize) -> SoftAssignment {
    assert_eq!(p.len(), n_ego * n_top, "eigenvector length");
    let mut m = Matrix::zeros(n_ego, n_top);
    for i in 0..n_ego {
        let row: Vec<f64> = p[i * n_top..(i + 1) * n_top].iter().map(|v| v.max(0.0)).collect();
        let sum: f64 = row.iter().sum();
        for (k, v) in row.iter().enumerate() {
            m.set(i, k, if sum > 0.0 { v / sum } else { 1.0 / n_top as f64 });
        }
    }
    SoftAssignment { p: m }
}

/// One-to-one assignment: `assignment[i]` is the top-view viewer of egocentric video `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardAssignment {
    pub n_top: usize,
    pub assignment: Vec<usize>,
}

impl HardAssignment {
    pub fn n_ego(&self) -> usize {
        self.assignment.len()
    }

    /// Binary `n_ego x n_top` matrix.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n_ego(), self.n_top, |i, k| if self.assignment[i] == k { 1.0 } else { 0.0 })
    }

    /// Row-major indicator vector of length `n_ego * n_top`.
    pub fn indicator(&self) -> Vec<f64> {
        self.to_matrix().into_vec()
    }
}

/// Maximizes the total soft-assignment probability over injective maps.
pub fn hungarian(p: &SoftAssignment) -> Result<HardAssignment> {
    let (ne, nt) = (p.n_ego(), p.n_top());
    if ne > nt {
        return Err(Error::TooManyEgo { n_ego: ne, n_top: nt });
    }
    let profit: Vec<Vec<f64>> = (0..ne).map(|i| p.p.row(i).to_vec()).collect();
    Ok(HardAssignment { n_top: nt, assignment: max_profit_assignment(&profit) })
}

/// The quadratic form `x^T A x` for the indicator `x` of `x_hard`.
pub fn matching_score(a: &AffinityMatrix, x_hard: &HardAssignment) -> f64 {
    assert_eq!((a.n_ego, a.n_top), (x_hard.n_ego(), x_hard.n_top), "shapes");
    let support: Vec<usize> = x_hard.assignment.iter().enumerate().map(|(i, &k)| a.index(i, k)).collect();
    support.iter().map(|&r| support.iter().map(|&c| a.data.get(r, c)).sum::<f64>()).sum()
}

/// Spectral soft assignment followed by Hungarian rounding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralMatch {
    pub lambda: f64,
    pub converged: bool,
    pub soft: SoftAssignment,
    pub hard: HardAssignment,
    pub score: f64,
}

pub fn spectral_match(a: &AffinityMatrix, cfg: &SpectralConfig) -> Result<SpectralMatch> {
    if a.n_ego > a.n_top {
        return Err(Error::TooManyEgo { n_ego: a.n_ego, n_top: a.n_top });
    }
    let e = power_iteration(&a.data, cfg)?;
    let soft = soft_assignment(&e.vector, a.n_ego, a.n_top);
    let hard = hungarian(&soft)?;
    let score = matching_score(a, &hard);
    Ok(SpectralMatch { lambda: e.lambda, converged: e.converged, soft, hard, score })
}
