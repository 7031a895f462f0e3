//! Jointly Gaussian market with two experts holding disjoint coordinate
//! blocks of a predictor vector.
//!
//! Announcing a conditional mean reveals a linear functional of the
//! predictors, so public information is a growing span of linear
//! statistics and every step is one exact conditioning computation. All
//! numerics are dense Cholesky solves; tolerances guard only rank
//! decisions and convergence detection, never the algebra itself.

mod conditional;
mod dataset;
mod market;
mod study;

pub use conditional::{conditional_gaussian, PublicSpan, SPAN_TOL};
pub use dataset::{load_dispersion, load_dispersion_from_reader, CsvOptions};
pub use market::{
    expert_turn, report_from_linear, run_linear_market, trace_csv, LinearRow, LinearTrace,
    CONSENSUS_TOL, CONVERGENCE_TOL,
};
pub use study::{
    default_dataset_path, load_study_dataset, replicate_study, StudyCheck, StudyReport,
    DATA_DIR_ENV, STUDY_ROWS,
};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::prob::{GaussianDist, ProbError};

#[derive(Debug, Error)]
pub enum GaussianError {
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("dispersion matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("dispersion matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("conditioning statistics are numerically singular")]
    SingularConditioningSet,
    #[error("market did not converge within {rounds} rounds")]
    MaxRoundsExceeded { rounds: usize },
    #[error("cell at row {row}, column {col} is not numeric: {cell:?}")]
    NonNumericCell {
        row: usize,
        col: usize,
        cell: String,
    },
    #[error("dataset shape mismatch: expected {expected} usable rows, found {found}")]
    DatasetShapeMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// Which expert is speaking. Expert one holds the `x` block, expert two
/// the `z` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianExpert {
    One,
    Two,
}

impl GaussianExpert {
    pub fn index(self) -> usize {
        match self {
            GaussianExpert::One => 1,
            GaussianExpert::Two => 2,
        }
    }
}

/// A public statistic: an affine function of the predictor vector
/// together with its realized value. `coeffs` has one entry per
/// predictor coordinate (x block first, then z block).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStatistic {
    pub coeffs: DVector<f64>,
    pub intercept: f64,
    pub value: f64,
}

/// Joint distribution of (x block, z block, target), stored as a mean
/// vector and dispersion matrix in that coordinate order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    x_names: Vec<String>,
    z_names: Vec<String>,
    y_name: String,
    mean: DVector<f64>,
    dispersion: DMatrix<f64>,
}

const SYMMETRY_TOL: f64 = 1e-9;

impl GaussianModel {
    pub fn new(
        x_names: Vec<String>,
        z_names: Vec<String>,
        y_name: String,
        mean: DVector<f64>,
        dispersion: DMatrix<f64>,
    ) -> Result<Self, GaussianError> {
        let p = x_names.len() + z_names.len() + 1;
        if mean.len() != p {
            return Err(GaussianError::DimensionMismatch {
                what: "mean vector",
                expected: p,
                found: mean.len(),
            });
        }
        if dispersion.nrows() != p || dispersion.ncols() != p {
            return Err(GaussianError::DimensionMismatch {
                what: "dispersion matrix",
                expected: p,
                found: dispersion.nrows().max(dispersion.ncols()),
            });
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let scale = 1.0f64.max(dispersion[(i, j)].abs());
                if (dispersion[(i, j)] - dispersion[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(GaussianError::NotSymmetric { i, j });
                }
            }
        }
        // Work with the symmetrized matrix so later solves see an exactly
        // symmetric input.
        let dispersion = (&dispersion + dispersion.transpose()) * 0.5;
        if dispersion.clone().cholesky().is_none() {
            return Err(GaussianError::NotPositiveDefinite);
        }
        Ok(GaussianModel {
            x_names,
            z_names,
            y_name,
            mean,
            dispersion,
        })
    }

    /// Size of expert one's block.
    pub fn k(&self) -> usize {
        self.x_names.len()
    }

    /// Size of expert two's block.
    pub fn h(&self) -> usize {
        self.z_names.len()
    }

    /// Number of predictor coordinates, `k + h`.
    pub fn predictor_dim(&self) -> usize {
        self.k() + self.h()
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn z_names(&self) -> &[String] {
        &self.z_names
    }

    pub fn y_name(&self) -> &str {
        &self.y_name
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn dispersion(&self) -> &DMatrix<f64> {
        &self.dispersion
    }

    /// Coordinate indices of an expert's own block.
    pub fn block(&self, expert: GaussianExpert) -> std::ops::Range<usize> {
        match expert {
            GaussianExpert::One => 0..self.k(),
            GaussianExpert::Two => self.k()..self.predictor_dim(),
        }
    }

    /// The prior forecast: the target's marginal.
    pub fn prior(&self) -> GaussianDist {
        let y = self.predictor_dim();
        GaussianDist::new(self.mean[y], self.dispersion[(y, y)])
            .expect("positive definite dispersion has positive target variance")
    }

    /// Coordinate statistic `w_i = value`.
    pub fn coordinate_stat(&self, i: usize, value: f64) -> LinearStatistic {
        let mut coeffs = DVector::zeros(self.predictor_dim());
        coeffs[i] = 1.0;
        LinearStatistic {
            coeffs,
            intercept: 0.0,
            value,
        }
    }
}
