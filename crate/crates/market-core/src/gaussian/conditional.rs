use nalgebra::{Cholesky, DMatrix, DVector};

use crate::prob::GaussianDist;

use super::{GaussianError, GaussianModel, LinearStatistic};

/// Rank tolerance for span membership: a coefficient vector belongs to
/// the span when its residual after projection is below
/// `SPAN_TOL * (1 + norm)`.
pub const SPAN_TOL: f64 = 1e-9;

/// The linear statistics announced so far, with an orthonormal basis of
/// their coefficient vectors for cheap span tests.
#[derive(Debug, Clone)]
pub struct PublicSpan {
    dim: usize,
    stats: Vec<LinearStatistic>,
    basis: Vec<DVector<f64>>,
}

impl PublicSpan {
    pub fn empty(dim: usize) -> Self {
        PublicSpan {
            dim,
            stats: Vec::new(),
            basis: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stats(&self) -> &[LinearStatistic] {
        &self.stats
    }

    fn residual(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        let mut r = coeffs.clone();
        for b in &self.basis {
            let proj = r.dot(b);
            r -= b * proj;
        }
        r
    }

    pub fn contains(&self, coeffs: &DVector<f64>) -> bool {
        assert_eq!(coeffs.len(), self.dim);
        self.residual(coeffs).norm() < SPAN_TOL * (1.0 + coeffs.norm())
    }

    /// Add a statistic unless its coefficients already lie in the span.
    /// Returns whether the span grew.
    pub fn push(&mut self, stat: LinearStatistic) -> bool {
        let r = self.residual(&stat.coeffs);
        if r.norm() < SPAN_TOL * (1.0 + stat.coeffs.norm()) {
            return false;
        }
        self.basis.push(&r / r.norm());
        self.stats.push(stat);
        true
    }
}

pub(super) struct CondSolution {
    pub dist: GaussianDist,
    /// Regression coefficients of the target on the orthonormalized
    /// conditioning directions.
    pub alpha: DVector<f64>,
    /// Orthonormal basis of the conditioning span, one vector per kept
    /// direction, in the order they were accepted.
    pub basis: Vec<DVector<f64>>,
}

/// Exact conditional of the target given affine statistics of the
/// predictors.
///
/// Statistics whose coefficients lie in the span of earlier ones are
/// dropped; their values are assumed consistent with the kept set, which
/// holds whenever all values come from one realization. The rest is the
/// standard partitioned-Gaussian formula computed through a Cholesky
/// solve of the statistic covariance.
pub fn conditional_gaussian(
    model: &GaussianModel,
    stats: &[LinearStatistic],
) -> Result<GaussianDist, GaussianError> {
    Ok(solve_conditional(model, stats)?.dist)
}

pub(super) fn solve_conditional(
    model: &GaussianModel,
    stats: &[LinearStatistic],
) -> Result<CondSolution, GaussianError> {
    let p = model.predictor_dim();
    let y = p;
    for s in stats {
        if s.coeffs.len() != p {
            return Err(GaussianError::DimensionMismatch {
                what: "statistic coefficients",
                expected: p,
                found: s.coeffs.len(),
            });
        }
    }

    let sigma = model.dispersion();
    let mu_w = model.mean().rows(0, p).into_owned();

    // Orthonormalize the conditioning set before touching the covariance.
    // Announcement functionals pile up nearly dependent directions as the
    // market approaches its fixed point; conditioning on them raw makes
    // the statistic covariance arbitrarily ill-conditioned, while an
    // orthonormal basis keeps its condition number at the data's own.
    // Each basis vector carries the centered value of the corresponding
    // functional, maintained through the same eliminations (modified
    // Gram-Schmidt, with one re-orthogonalization pass).
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut centered: Vec<f64> = Vec::new();
    for s in stats {
        let mut r = s.coeffs.clone();
        let mut c = s.value - s.intercept - r.dot(&mu_w);
        for _ in 0..2 {
            for (b, cb) in basis.iter().zip(&centered) {
                let proj = r.dot(b);
                r.axpy(-proj, b, 1.0);
                c -= proj * cb;
            }
        }
        let norm = r.norm();
        if norm >= SPAN_TOL * (1.0 + s.coeffs.norm()) {
            basis.push(r / norm);
            centered.push(c / norm);
        }
    }

    let m = basis.len();
    if m == 0 {
        return Ok(CondSolution {
            dist: model.prior(),
            alpha: DVector::zeros(0),
            basis,
        });
    }

    // cov(B_a, B_b) = b_a' S_ww b_b, cov(B_a, Y) = b_a' s_wy.
    let sigma_ww = sigma.view((0, 0), (p, p));
    let sigma_wy = DVector::from_fn(p, |i, _| sigma[(i, y)]);

    let mut cov = DMatrix::zeros(m, m);
    let mut cross = DVector::zeros(m);
    for (a, ba) in basis.iter().enumerate() {
        let sw_a = sigma_ww * ba;
        for (b, bb) in basis.iter().enumerate() {
            cov[(a, b)] = bb.dot(&sw_a);
        }
        cross[a] = ba.dot(&sigma_wy);
    }

    let chol = Cholesky::new(cov).ok_or(GaussianError::SingularConditioningSet)?;
    let alpha = chol.solve(&cross);
    let centered = DVector::from_vec(centered);
    let mean = model.mean()[y] + alpha.dot(&centered);
    let variance = sigma[(y, y)] - alpha.dot(&cross);
    let dist =
        GaussianDist::new(mean, variance).map_err(|_| GaussianError::SingularConditioningSet)?;
    Ok(CondSolution { dist, alpha, basis })
}
