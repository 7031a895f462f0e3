//! Market over a product statistic: a latent coefficient with a Gaussian
//! prior, one expert holding a sign-ambiguous pair of statistics, the
//! other the magnitude of a noisy product observation.
//!
//! The generative model is
//!
//! ```text
//! theta ~ N(mu, 1),  x1 ~ N(0, 1) independent,  x2 = theta x1 + e,
//! e ~ N(0, 1).
//! ```
//!
//! Given the pair `(x1, x2)` the posterior of `theta` is one Gaussian; the
//! market, where expert one holds `(|x1 x2|, |x1|)` and expert two holds
//! `x2`, converges in two rounds to a two-component mixture: the sign of
//! `x1 x2` never becomes common knowledge, only its distribution does.

use std::f64::consts::PI;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::numeric::integrate_rel;
use crate::prob::{GaussianDist, GaussianMixture, ProbError};
use crate::protocol::{classify, Classification, CompareMode, ConsensusReport, Forecast};

#[derive(Debug, Error)]
pub enum MixtureError {
    #[error("degenerate statistic: expert one's magnitude must be positive")]
    DegenerateStatistic,
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// Posterior of the coefficient given the full pair: one Bayes linear
/// regression step with `s1 = x1 x2` and `s2 = |x1|`.
pub fn component_posterior(s1: f64, s2: f64, mu: f64) -> GaussianDist {
    assert!(s2 >= 0.0, "s2 is a magnitude");
    let prec = 1.0 + s2 * s2;
    GaussianDist::new((mu + s1) / prec, prec.recip())
        .expect("posterior variance 1/(1+s2^2) is positive")
}

/// Marginal joint density of `(x1, x2)` with the coefficient integrated
/// out: `x2 | x1 ~ N(mu x1, 1 + x1^2)`.
pub fn joint_density(x1: f64, x2: f64, mu: f64) -> f64 {
    let v = 1.0 + x1 * x1;
    let d = x2 - mu * x1;
    (2.0 * PI * v.sqrt()).recip() * (-0.5 * (x1 * x1 + d * d / v)).exp()
}

/// Posterior probability of each sign of `s1 = x1 x2` given the
/// magnitudes `m1 = |x1 x2|` and `m2 = |x1|`. The four sign patterns of
/// `(x1, x2)` collapse into two groups by the sign of their product.
///
/// `m1 = 0` means the two signs describe the same outcome; by convention
/// the weights are then exactly one half each, which is also the exact
/// result at `mu = 0` because the density is symmetric under joint
/// negation.
pub fn sign_weights(m1: f64, m2: f64, mu: f64) -> Result<(f64, f64), MixtureError> {
    assert!(m1 >= 0.0, "m1 is a magnitude");
    if m2 <= 0.0 || m2.is_nan() {
        return Err(MixtureError::DegenerateStatistic);
    }
    if m1 == 0.0 {
        return Ok((0.5, 0.5));
    }
    let b = m1 / m2;
    let plus = joint_density(m2, b, mu) + joint_density(-m2, -b, mu);
    let minus = joint_density(m2, -b, mu) + joint_density(-m2, b, mu);
    let total = plus + minus;
    assert!(total > 0.0, "sign weights underflowed");
    Ok((plus / total, minus / total))
}

/// The market's limit: a two-component mixture over the unresolved sign,
/// each component the full-information posterior for that sign.
pub fn mixture_posterior(m1: f64, m2: f64, mu: f64) -> Result<GaussianMixture, MixtureError> {
    let (wp, wm) = sign_weights(m1, m2, mu)?;
    let comps = vec![
        (wp, component_posterior(m1, m2, mu)),
        (wm, component_posterior(-m1, m2, mu)),
    ];
    Ok(GaussianMixture::new(comps)?)
}

/// Mean and standard deviation of the coefficient given only `|x2|`,
/// by quadrature: the unnormalized posterior is
/// `phi(theta - mu) (1 + theta^2)^{-1/2} exp(-b^2 / (2 (1 + theta^2)))`.
pub fn magnitude_posterior(b: f64, mu: f64) -> (f64, f64) {
    assert!(b >= 0.0, "b is a magnitude");
    let g = move |theta: f64| {
        let v = 1.0 + theta * theta;
        let d = theta - mu;
        (-0.5 * (d * d + b * b / v)).exp() / v.sqrt()
    };
    // The prior confines theta near mu; the likelihood can pull the peak
    // out to roughly b^(2/3), so widen the window accordingly.
    let half_width = 16.0 + b;
    let (lo, hi) = (mu - half_width, mu + half_width);
    let z = integrate_rel(g, lo, hi, 1e-9);
    let m1 = integrate_rel(|t| t * g(t), lo, hi, 1e-9);
    let m2 = integrate_rel(|t| t * t * g(t), lo, hi, 1e-9);
    let mean = m1 / z;
    let var = (m2 / z - mean * mean).max(0.0);
    (mean, var.sqrt())
}

/// Posterior given `x1` and `|x2|`: a mixture over the sign of `x2`,
/// weighted by the conditional density of each signed value. Written
/// independently of [`mixture_posterior`] so the two routes can check
/// each other.
pub fn posterior_from_x1_abs_x2(
    x1: f64,
    abs_x2: f64,
    mu: f64,
) -> Result<GaussianMixture, MixtureError> {
    if x1 == 0.0 {
        return Err(MixtureError::DegenerateStatistic);
    }
    assert!(abs_x2 >= 0.0);
    let v = 1.0 + x1 * x1;
    let wp = (-0.5 * (abs_x2 - mu * x1).powi(2) / v).exp();
    let wm = (-0.5 * (abs_x2 + mu * x1).powi(2) / v).exp();
    let total = wp + wm;
    let comp = |x2: f64| GaussianDist::new((mu + x1 * x2) / v, v.recip()).expect("var > 0");
    Ok(GaussianMixture::new(vec![
        (wp / total, comp(abs_x2)),
        (wm / total, comp(-abs_x2)),
    ])?)
}

/// Posterior given `x2` and `|x1|`: the sign of `x1` is unresolved.
pub fn posterior_from_x2_abs_x1(
    x2: f64,
    abs_x1: f64,
    mu: f64,
) -> Result<GaussianMixture, MixtureError> {
    if abs_x1 <= 0.0 || abs_x1.is_nan() {
        return Err(MixtureError::DegenerateStatistic);
    }
    let v = 1.0 + abs_x1 * abs_x1;
    let wp = (-0.5 * (x2 - mu * abs_x1).powi(2) / v).exp();
    let wm = (-0.5 * (x2 + mu * abs_x1).powi(2) / v).exp();
    let total = wp + wm;
    let comp = |x1: f64| GaussianDist::new((mu + x1 * x2) / v, v.recip()).expect("var > 0");
    Ok(GaussianMixture::new(vec![
        (wp / total, comp(abs_x1)),
        (wm / total, comp(-abs_x1)),
    ])?)
}

/// The signs of `x1` and `x2` are individually independent of the
/// magnitudes: each conditional sign probability is one half. Checked to
/// within `1e-12`; this is why announcing the mixture resolves nothing
/// further.
pub fn verify_sign_independence(m1: f64, m2: f64, mu: f64) -> Result<bool, MixtureError> {
    if m2 <= 0.0 || m2.is_nan() {
        return Err(MixtureError::DegenerateStatistic);
    }
    assert!(m1 >= 0.0);
    let b = m1 / m2;
    let f = |s1: f64, s2: f64| joint_density(s1 * m2, s2 * b, mu);
    let total = f(1.0, 1.0) + f(1.0, -1.0) + f(-1.0, 1.0) + f(-1.0, -1.0);
    let p_x1_pos = (f(1.0, 1.0) + f(1.0, -1.0)) / total;
    let p_x2_pos = (f(1.0, 1.0) + f(-1.0, 1.0)) / total;
    Ok((p_x1_pos - 0.5).abs() <= 1e-12 && (p_x2_pos - 0.5).abs() <= 1e-12)
}

/// One announcement in the product-statistic market.
#[derive(Debug, Clone, PartialEq)]
pub enum TsAnnouncement {
    /// Expert one's first turn: their magnitudes alone say nothing about
    /// the coefficient, so they repeat the prior.
    Prior(GaussianDist),
    /// Expert two's first turn: a non-Gaussian posterior summarized by
    /// quadrature.
    Numeric { mean: f64, sd: f64 },
    Mixture(GaussianMixture),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsStep {
    pub round: usize,
    /// 1 or 2.
    pub expert: usize,
    pub announcement: TsAnnouncement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsTrace {
    pub steps: Vec<TsStep>,
    pub rounds: usize,
    pub prior: GaussianDist,
    pub pooled: GaussianDist,
    pub limit: GaussianMixture,
    pub classification: Classification,
}

impl TsTrace {
    pub fn to_json(&self) -> Json {
        let step = |s: &TsStep| {
            let ann = match &s.announcement {
                TsAnnouncement::Prior(g) => json!({
                    "kind": "prior", "mean": g.mean(), "sd": g.sd(),
                }),
                TsAnnouncement::Numeric { mean, sd } => json!({
                    "kind": "numeric", "mean": mean, "sd": sd,
                }),
                TsAnnouncement::Mixture(m) => Forecast::Mixture(m.clone()).to_json(),
            };
            json!({ "round": s.round, "expert": s.expert, "announcement": ann })
        };
        json!({
            "steps": self.steps.iter().map(step).collect::<Vec<_>>(),
            "rounds": self.rounds,
        })
    }
}

pub fn report_from_ts(trace: &TsTrace) -> ConsensusReport {
    ConsensusReport {
        limit: Forecast::Mixture(trace.limit.clone()),
        prior: Forecast::Gaussian(trace.prior),
        pooled: Forecast::Gaussian(trace.pooled),
        rounds: trace.rounds,
        classification: trace.classification,
    }
}

/// Run the two-round market with expert one speaking first.
pub fn run_ts_market(x1: f64, x2: f64, mu: f64) -> Result<TsTrace, MixtureError> {
    run_ts_market_ordered(x1, x2, mu, false)
}

/// Run the market in either speaking order. The limit is the same
/// mixture both ways; only the path differs. Convergence is at round
/// two: both round-two announcements coincide and reveal nothing new.
pub fn run_ts_market_ordered(
    x1: f64,
    x2: f64,
    mu: f64,
    expert_two_first: bool,
) -> Result<TsTrace, MixtureError> {
    assert!(
        x1.is_finite() && x2.is_finite() && mu.is_finite(),
        "inputs must be finite"
    );
    if x1 == 0.0 {
        return Err(MixtureError::DegenerateStatistic);
    }

    let m1 = (x1 * x2).abs();
    let m2 = x1.abs();
    let prior = GaussianDist::new(mu, 1.0).expect("unit prior variance");
    let pooled = component_posterior(x1 * x2, m2, mu);
    let limit = mixture_posterior(m1, m2, mu)?;

    let (nmean, nsd) = magnitude_posterior(x2.abs(), mu);
    let numeric = TsAnnouncement::Numeric {
        mean: nmean,
        sd: nsd,
    };
    let mix = TsAnnouncement::Mixture(limit.clone());

    let steps = if expert_two_first {
        // Expert two's announcement reveals |x2|; expert one then holds
        // (x1, |x2|), which already pins the limit mixture.
        vec![
            TsStep { round: 1, expert: 2, announcement: numeric },
            TsStep { round: 1, expert: 1, announcement: mix.clone() },
            TsStep { round: 2, expert: 2, announcement: mix.clone() },
            TsStep { round: 2, expert: 1, announcement: mix },
        ]
    } else {
        vec![
            TsStep { round: 1, expert: 1, announcement: TsAnnouncement::Prior(prior) },
            TsStep { round: 1, expert: 2, announcement: numeric },
            TsStep { round: 2, expert: 1, announcement: mix.clone() },
            TsStep { round: 2, expert: 2, announcement: mix },
        ]
    };

    let classification = classify(
        &Forecast::Mixture(limit.clone()),
        &Forecast::Gaussian(prior),
        &Forecast::Gaussian(pooled),
        CompareMode::Tolerance,
    )
    .expect("tolerance comparison of continuous forecasts cannot fail");

    Ok(TsTrace {
        steps,
        rounds: 2,
        prior,
        pooled,
        limit,
        classification,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::numeric::integrate;

    #[test]
    fn component_posterior_is_bayes_regression() {
        let d = component_posterior(2.0, 1.0, 0.0);
        assert_relative_eq!(d.mean(), 1.0);
        assert_relative_eq!(d.variance(), 0.5);
        let d = component_posterior(-1.0, 2.0, 3.0);
        assert_relative_eq!(d.mean(), 0.4);
        assert_relative_eq!(d.variance(), 0.2);
    }

    #[test]
    fn centered_prior_gives_exactly_even_sign_weights() {
        for (m1, m2) in [(1.0, 1.0), (0.3, 2.5), (4.0, 0.7)] {
            let (wp, wm) = sign_weights(m1, m2, 0.0).unwrap();
            assert_eq!(wp, 0.5);
            assert_eq!(wm, 0.5);
        }
        let (wp, wm) = sign_weights(0.0, 1.3, -0.8).unwrap();
        assert_eq!((wp, wm), (0.5, 0.5));
    }

    #[test]
    fn off_center_prior_favors_the_matching_sign() {
        // Hand value at mu = m2 = 1, b = 1: the agreeing patterns sit on
        // the regression line, so w+ = 1 / (1 + exp(-1)).
        let (wp, wm) = sign_weights(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(wp, 1.0 / (1.0 + (-1.0f64).exp()), max_relative = 1e-12);
        assert!(wp > wm);

        let (wp_neg, _) = sign_weights(1.0, 1.0, -1.0).unwrap();
        assert_relative_eq!(wp_neg, 1.0 - wp, max_relative = 1e-12);
    }

    #[test]
    fn sign_weights_match_rejection_sampling() {
        // Generative oracle: simulate the model and condition on a thin
        // shell around the magnitudes.
        let (m2, b, mu) = (1.0, 1.2, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut normal = move || {
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
        };
        let (mut hits, mut positive) = (0u64, 0u64);
        for _ in 0..800_000 {
            let theta = mu + normal();
            let x1 = normal();
            let x2 = theta * x1 + normal();
            if (x1.abs() - m2).abs() < 0.05 && (x2.abs() - b).abs() < 0.05 {
                hits += 1;
                if x1 * x2 > 0.0 {
                    positive += 1;
                }
            }
        }
        assert!(hits > 1_000, "conditioning shell too thin: {hits}");
        let empirical = positive as f64 / hits as f64;
        let (wp, _) = sign_weights(m2 * b, m2, mu).unwrap();
        assert!(
            (empirical - wp).abs() < 0.05,
            "empirical {empirical} vs exact {wp}"
        );
    }

    #[test]
    fn signs_are_independent_of_magnitudes() {
        for (m1, m2, mu) in [(1.0, 1.0, 0.0), (2.4, 0.8, 1.5), (0.2, 3.0, -2.0)] {
            assert!(verify_sign_independence(m1, m2, mu).unwrap());
        }
    }

    #[test]
    fn mixture_matches_the_quadrature_oracle() {
        // Independent oracle for the limit: p(theta | |x1| = a, |x2| = b)
        // is proportional to phi(theta - mu) (phi(b - theta a) + phi(b + theta a)).
        let (a, b, mu) = (0.9, 1.7, 0.4);
        let mix = mixture_posterior(a * b, a, mu).unwrap();
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        let oracle = move |theta: f64| {
            phi(theta - mu) * (phi(b - theta * a) + phi(b + theta * a))
        };
        let z = integrate(oracle, mu - 20.0, mu + 20.0, 1e-12);
        for i in 0..=100 {
            let theta = mu - 5.0 + 0.1 * f64::from(i);
            assert!(
                (mix.pdf(theta) - oracle(theta) / z).abs() < 1e-9,
                "density mismatch at {theta}"
            );
        }
    }

    #[test]
    fn conditioning_routes_agree() {
        // The same information set reached three ways must give one
        // answer: direct magnitudes, x1 with |x2|, and x2 with |x1|.
        let cases: [(f64, f64, f64); 4] = [
            (0.8, 1.5, 0.0),
            (-0.8, 1.5, 0.7),
            (0.8, -1.5, 0.7),
            (-1.6, -0.4, -1.3),
        ];
        for (x1, x2, mu) in cases {
            let direct = mixture_posterior((x1 * x2).abs(), x1.abs(), mu).unwrap();
            for other in [
                posterior_from_x1_abs_x2(x1, x2.abs(), mu).unwrap(),
                posterior_from_x2_abs_x1(x2, x1.abs(), mu).unwrap(),
            ] {
                let mut a = direct.components().to_vec();
                let mut b = other.components().to_vec();
                a.sort_by(|p, q| p.1.mean().total_cmp(&q.1.mean()));
                b.sort_by(|p, q| p.1.mean().total_cmp(&q.1.mean()));
                for ((wa, ga), (wb, gb)) in a.iter().zip(&b) {
                    assert!((wa - wb).abs() <= 1e-12);
                    assert!((ga.mean() - gb.mean()).abs() <= 1e-12);
                    assert!((ga.sd() - gb.sd()).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn market_converges_to_the_mixture_in_two_rounds() {
        let t = run_ts_market(0.8, 1.5, 0.7).unwrap();
        assert_eq!(t.rounds, 2);
        assert_eq!(t.steps.len(), 4);
        assert!(matches!(t.steps[0].announcement, TsAnnouncement::Prior(_)));
        assert!(matches!(
            t.steps[1].announcement,
            TsAnnouncement::Numeric { .. }
        ));
        assert_eq!(t.classification, Classification::Limited);
        // The pooled posterior knows the sign; the limit does not.
        assert_eq!(t.limit.components().len(), 2);
        let report = report_from_ts(&t);
        assert_eq!(report.rounds, 2);

        // Expert order changes the path, not the limit.
        let swapped = run_ts_market_ordered(0.8, 1.5, 0.7, true).unwrap();
        assert_eq!(swapped.limit, t.limit);
        assert_eq!(swapped.steps[0].expert, 2);
        assert!(matches!(
            swapped.steps[1].announcement,
            TsAnnouncement::Mixture(_)
        ));
    }

    #[test]
    fn zero_product_collapses_to_complete_consensus() {
        let t = run_ts_market(1.1, 0.0, 0.5).unwrap();
        assert_eq!(t.classification, Classification::Complete);
        let (m, v) = t.limit.mean_variance();
        assert_relative_eq!(m, t.pooled.mean(), epsilon = 1e-12);
        assert_relative_eq!(v, t.pooled.variance(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_first_statistic_is_an_error() {
        assert!(matches!(
            run_ts_market(0.0, 1.0, 0.0),
            Err(MixtureError::DegenerateStatistic)
        ));
        assert!(matches!(
            sign_weights(1.0, 0.0, 0.0),
            Err(MixtureError::DegenerateStatistic)
        ));
    }

    #[test]
    fn magnitude_posterior_is_symmetric_at_zero_prior() {
        let (mean, sd) = magnitude_posterior(1.4, 0.0);
        assert!(mean.abs() < 1e-9);
        assert!(sd > 0.0);
    }

    #[test]
    fn trace_json_lists_every_step() {
        let t = run_ts_market(0.8, 1.5, 0.7).unwrap();
        let j = t.to_json();
        assert_eq!(j["rounds"], 2);
        assert_eq!(j["steps"].as_array().unwrap().len(), 4);
        assert_eq!(j["steps"][0]["announcement"]["kind"], "prior");
        assert_eq!(j["steps"][2]["announcement"]["kind"], "mixture");
    }
}
