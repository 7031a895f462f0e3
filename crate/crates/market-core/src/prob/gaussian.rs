//! Gaussian and Gaussian-mixture predictive distributions.

use std::f64::consts::PI;

use super::ProbError;

/// A univariate normal, parameterized by mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDist {
    mean: f64,
    variance: f64,
}

impl GaussianDist {
    pub fn new(mean: f64, variance: f64) -> Result<Self, ProbError> {
        if !(variance.is_finite() && variance > 0.0 && mean.is_finite()) {
            return Err(ProbError::NonPositiveVariance(variance));
        }
        Ok(GaussianDist { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = x - self.mean;
        (-0.5 * z * z / self.variance).exp() / (2.0 * PI * self.variance).sqrt()
    }
}

/// A finite convex combination of Gaussians.
///
/// Components with coinciding parameters are deliberately kept unmerged;
/// merging is a display concern, and equality tests elsewhere either
/// compare canonicalized component lists or the (mean, variance) summary.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<(f64, GaussianDist)>,
}

impl GaussianMixture {
    const WEIGHT_TOL: f64 = 1e-12;

    pub fn new(components: Vec<(f64, GaussianDist)>) -> Result<Self, ProbError> {
        if components.is_empty() {
            return Err(ProbError::EmptyMixture);
        }
        let sum: f64 = components.iter().map(|(w, _)| w).sum();
        if components.iter().any(|(w, _)| *w < 0.0 || !w.is_finite())
            || (sum - 1.0).abs() > Self::WEIGHT_TOL
        {
            return Err(ProbError::BadMixtureWeights(sum));
        }
        Ok(GaussianMixture { components })
    }

    /// Wraps a single Gaussian as a one-component mixture.
    pub fn single(dist: GaussianDist) -> Self {
        GaussianMixture {
            components: vec![(1.0, dist)],
        }
    }

    pub fn components(&self) -> &[(f64, GaussianDist)] {
        &self.components
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|(w, d)| w * d.pdf(x))
            .sum()
    }

    /// Overall mean and variance of the mixture:
    /// mean = Σ wᵢμᵢ, variance = Σ wᵢ(σᵢ² + μᵢ²) − mean².
    pub fn mean_variance(&self) -> (f64, f64) {
        let mean: f64 = self.components.iter().map(|(w, d)| w * d.mean()).sum();
        let second: f64 = self
            .components
            .iter()
            .map(|(w, d)| w * (d.variance() + d.mean() * d.mean()))
            .sum();
        (mean, (second - mean * mean).max(0.0))
    }
}


#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(GaussianDist::new(0.0, 0.0).is_err());
        assert!(GaussianDist::new(0.0, -1.0).is_err());
        assert!(GaussianDist::new(f64::NAN, 1.0).is_err());
        assert!(GaussianMixture::new(vec![]).is_err());
        let g = GaussianDist::new(0.0, 1.0).unwrap();
        assert!(GaussianMixture::new(vec![(0.5, g), (0.4, g)]).is_err());
        assert!(GaussianMixture::new(vec![(1.5, g), (-0.5, g)]).is_err());
    }

    #[test]
    fn single_component_summary_is_the_component() {
        let m = GaussianMixture::single(GaussianDist::new(3.0, 2.0).unwrap());
        assert_eq!(m.mean_variance(), (3.0, 2.0));
    }

    #[test]
    fn symmetric_pair_summary() {
        // 50-50 mixture of N(c, v) and N(-c, v) has mean 0, variance v + c^2.
        for (c, v) in [(0.5, 0.5), (2.0, 1.0), (0.0, 3.0)] {
            let m = GaussianMixture::new(vec![
                (0.5, GaussianDist::new(c, v).unwrap()),
                (0.5, GaussianDist::new(-c, v).unwrap()),
            ])
            .unwrap();
            let (mean, var) = m.mean_variance();
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(var, v + c * c, epsilon = 1e-12);
        }
    }

    #[test]
    fn summary_matches_monte_carlo() {
        // Sampling oracle for the hand formula: draw a component by weight,
        // then a normal variate from it.
        let m = GaussianMixture::new(vec![
            (0.5, GaussianDist::new(0.5, 0.5).unwrap()),
            (0.5, GaussianDist::new(-0.5, 0.5).unwrap()),
        ])
        .unwrap();
        let (mean, var) = m.mean_variance();
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(var, 0.75, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = m.components()[0].1;
            for (w, d) in m.components() {
                acc += w;
                if u < acc {
                    pick = *d;
                    break;
                }
            }
            let z: f64 = {
                // Box-Muller
                let u1: f64 = rng.random::<f64>().max(1e-15);
                let u2: f64 = rng.random();
                (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
            };
            let x = pick.mean() + pick.sd() * z;
            sum += x;
            sumsq += x * x;
        }
        let sample_mean = sum / n as f64;
        let sample_var = sumsq / n as f64 - sample_mean * sample_mean;
        // ~3 standard errors for n = 2e5 draws of a sub-Gaussian variate.
        assert_abs_diff_eq!(sample_mean, mean, epsilon = 0.01);
        assert_abs_diff_eq!(sample_var, var, epsilon = 0.02);
    }

    #[test]
    fn pdf_integrates_to_one() {
        let m = GaussianMixture::new(vec![
            (0.3, GaussianDist::new(-1.0, 0.5).unwrap()),
            (0.7, GaussianDist::new(2.0, 2.0).unwrap()),
        ])
        .unwrap();
        let mass = crate::numeric::integrate(|x| m.pdf(x), -30.0, 30.0, 1e-10);
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
    }
}
