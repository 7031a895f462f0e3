//! Engine-independent market vocabulary: schedules, forecasts, consensus
//! classification, and the exact protocol checks for finite models.

mod martingale;
mod vacuity;

pub use martingale::{martingale_check_exact, martingale_check_exact_with};
pub use vacuity::{vacuity_criterion, VacuityOutcome};

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::finite::{run_market, FiniteError, FiniteModel, FiniteTrace};
use crate::prob::{format_rational, GaussianDist, GaussianMixture, Rational, Value};

/// Forecasts closer than this are treated as equal when classifying
/// float-valued consensus.
pub const CLASSIFY_TOL: f64 = 1e-8;

/// Mixture components this close are the same component.
const COMPONENT_MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("cannot compare {left} forecast with {right} forecast in {mode} mode")]
    KindMismatch {
        left: &'static str,
        right: &'static str,
        mode: &'static str,
    },
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error(transparent)]
    Finite(#[from] FiniteError),
}

/// A repeating block of expert turns. Every expert must appear in the
/// block, otherwise a stalled public event would say nothing about the
/// silent experts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    block: Vec<usize>,
}

impl Schedule {
    pub fn new(block: Vec<usize>, n_experts: usize) -> Result<Self, ProtocolError> {
        if block.is_empty() {
            return Err(ProtocolError::BadSchedule("empty block".into()));
        }
        if let Some(&bad) = block.iter().find(|&&e| e >= n_experts) {
            return Err(ProtocolError::BadSchedule(format!(
                "expert index {bad} out of range for {n_experts} experts"
            )));
        }
        if let Some(missing) = (0..n_experts).find(|e| !block.contains(e)) {
            return Err(ProtocolError::BadSchedule(format!(
                "expert {missing} never speaks"
            )));
        }
        Ok(Schedule { block })
    }

    /// Round-robin over all experts in index order.
    pub fn cyclic(n_experts: usize) -> Self {
        Schedule {
            block: (0..n_experts).collect(),
        }
    }

    pub fn block(&self) -> &[usize] {
        &self.block
    }

    pub fn expert_at(&self, step: usize) -> usize {
        self.block[step % self.block.len()]
    }
}

/// A forecast in whichever form the engine produces it. Exact engines
/// forecast rationals; the continuous engines forecast Gaussians or
/// Gaussian mixtures.
#[derive(Debug, Clone, PartialEq)]
pub enum Forecast {
    /// Probability of a binary event.
    Event(Rational),
    /// Posterior over a finite target range.
    Finite {
        values: Vec<Value>,
        probs: Vec<Rational>,
    },
    Gaussian(GaussianDist),
    Mixture(GaussianMixture),
}

impl Forecast {
    fn kind(&self) -> &'static str {
        match self {
            Forecast::Event(_) => "event",
            Forecast::Finite { .. } => "finite",
            Forecast::Gaussian(_) => "gaussian",
            Forecast::Mixture(_) => "mixture",
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Forecast::Event(p) => json!({ "kind": "event", "prob": format_rational(p) }),
            Forecast::Finite { values, probs } => json!({
                "kind": "finite",
                "values": values,
                "probs": probs.iter().map(format_rational).collect::<Vec<_>>(),
            }),
            Forecast::Gaussian(g) => json!({
                "kind": "gaussian", "mean": g.mean(), "sd": g.sd(),
            }),
            Forecast::Mixture(m) => json!({
                "kind": "mixture",
                "components": m
                    .components()
                    .iter()
                    .map(|(w, g)| json!({ "weight": w, "mean": g.mean(), "sd": g.sd() }))
                    .collect::<Vec<_>>(),
            }),
        }
    }
}

/// Where the market limit sits relative to the two reference forecasts:
/// at the prior (the market revealed nothing), at the pooled forecast
/// (it revealed everything), or strictly between.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Vacuous,
    Limited,
    Complete,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Vacuous => "vacuous",
            Classification::Limited => "limited",
            Classification::Complete => "complete",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareMode {
    /// Rational equality; only exact forecast kinds allowed.
    Exact,
    /// Float comparison within [`CLASSIFY_TOL`]; only continuous kinds.
    Tolerance,
}

/// Decide the consensus class. When the prior, limit, and pooled forecast
/// all coincide the market is degenerate and `Complete` wins: there was
/// nothing left to reveal.
pub fn classify(
    limit: &Forecast,
    prior: &Forecast,
    pooled: &Forecast,
    mode: CompareMode,
) -> Result<Classification, ProtocolError> {
    let eq = |a: &Forecast, b: &Forecast| forecast_eq(a, b, mode);
    if eq(limit, pooled)? {
        Ok(Classification::Complete)
    } else if eq(limit, prior)? {
        Ok(Classification::Vacuous)
    } else {
        Ok(Classification::Limited)
    }
}

fn forecast_eq(a: &Forecast, b: &Forecast, mode: CompareMode) -> Result<bool, ProtocolError> {
    let mismatch = || ProtocolError::KindMismatch {
        left: a.kind(),
        right: b.kind(),
        mode: match mode {
            CompareMode::Exact => "exact",
            CompareMode::Tolerance => "tolerance",
        },
    };
    match mode {
        CompareMode::Exact => match (a, b) {
            (Forecast::Event(p), Forecast::Event(q)) => Ok(p == q),
            (
                Forecast::Finite { values, probs },
                Forecast::Finite {
                    values: v2,
                    probs: p2,
                },
            ) => Ok(values == v2 && probs == p2),
            _ => Err(mismatch()),
        },
        CompareMode::Tolerance => {
            let ca = canonical_components(a).ok_or_else(mismatch)?;
            let cb = canonical_components(b).ok_or_else(mismatch)?;
            Ok(mixture_distance(&ca, &cb) <= CLASSIFY_TOL)
        }
    }
}

/// (weight, mean, sd) triples in canonical order: indistinguishable
/// components merged, then sorted by descending weight with mean as
/// tiebreak. `None` for exact forecast kinds.
fn canonical_components(f: &Forecast) -> Option<Vec<(f64, f64, f64)>> {
    let raw: Vec<(f64, f64, f64)> = match f {
        Forecast::Gaussian(g) => vec![(1.0, g.mean(), g.sd())],
        Forecast::Mixture(m) => m
            .components()
            .iter()
            .map(|(w, g)| (*w, g.mean(), g.sd()))
            .collect(),
        _ => return None,
    };
    let mut raw: Vec<_> = raw
        .into_iter()
        .filter(|(w, _, _)| *w > COMPONENT_MERGE_TOL)
        .collect();
    raw.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)));
    let mut merged: Vec<(f64, f64, f64)> = Vec::new();
    for (w, m, s) in raw {
        match merged.last_mut() {
            Some(last)
                if (m - last.1).abs() <= COMPONENT_MERGE_TOL
                    && (s - last.2).abs() <= COMPONENT_MERGE_TOL =>
            {
                last.0 += w;
            }
            _ => merged.push((w, m, s)),
        }
    }
    merged.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
    Some(merged)
}

/// Maximum componentwise discrepancy between canonical mixtures; infinite
/// when the component counts differ.
fn mixture_distance(a: &[(f64, f64, f64)], b: &[(f64, f64, f64)]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            (x.0 - y.0)
                .abs()
                .max((x.1 - y.1).abs())
                .max((x.2 - y.2).abs())
        })
        .fold(0.0, f64::max)
}

/// Outcome summary of one market run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusReport {
    pub limit: Forecast,
    pub prior: Forecast,
    pub pooled: Forecast,
    pub rounds: usize,
    pub classification: Classification,
}

impl ConsensusReport {
    pub fn new(
        limit: Forecast,
        prior: Forecast,
        pooled: Forecast,
        rounds: usize,
        mode: CompareMode,
    ) -> Result<Self, ProtocolError> {
        let classification = classify(&limit, &prior, &pooled, mode)?;
        Ok(ConsensusReport {
            limit,
            prior,
            pooled,
            rounds,
            classification,
        })
    }

    pub fn to_json(&self) -> Json {
        json!({
            "rounds": self.rounds,
            "classification": self.classification.to_string(),
            "limit": self.limit.to_json(),
            "prior": self.prior.to_json(),
            "pooled": self.pooled.to_json(),
        })
    }
}

/// Package a finite trace as a report. Binary `{0, 1}` targets report
/// event probabilities, everything else the full posterior vector.
pub fn report_from_finite(
    model: &FiniteModel,
    trace: &FiniteTrace,
) -> Result<ConsensusReport, ProtocolError> {
    let wrap = |f: &crate::finite::FiniteForecast| -> Forecast {
        if model.has_event_target() {
            Forecast::Event(f.event_prob(model).expect("event target has value 1").clone())
        } else {
            Forecast::Finite {
                values: model.target_range().to_vec(),
                probs: f.probs().to_vec(),
            }
        }
    };
    ConsensusReport::new(
        wrap(&trace.limit_forecast),
        wrap(&trace.prior_forecast),
        wrap(&trace.pooled_forecast),
        trace.rounds_to_convergence,
        CompareMode::Exact,
    )
}

/// Run the same realization under several schedules and report each
/// outcome, for studying how speaking order affects the limit.
pub fn order_experiment(
    model: &FiniteModel,
    realization: &[Value],
    schedules: &[Schedule],
) -> Result<Vec<ConsensusReport>, ProtocolError> {
    schedules
        .iter()
        .map(|s| {
            let trace = run_market(model, realization, s.block())?;
            report_from_finite(model, &trace)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::rat;

    fn gauss(mean: f64, var: f64) -> Forecast {
        Forecast::Gaussian(GaussianDist::new(mean, var).unwrap())
    }

    #[test]
    fn schedules_must_cover_all_experts() {
        assert!(Schedule::new(vec![0, 1], 2).is_ok());
        assert!(Schedule::new(vec![0, 1, 0], 2).is_ok());
        assert!(matches!(
            Schedule::new(vec![0, 0], 2),
            Err(ProtocolError::BadSchedule(_))
        ));
        assert!(matches!(
            Schedule::new(vec![], 1),
            Err(ProtocolError::BadSchedule(_))
        ));
        assert!(matches!(
            Schedule::new(vec![2], 2),
            Err(ProtocolError::BadSchedule(_))
        ));
        let s = Schedule::new(vec![1, 0, 0], 2).unwrap();
        assert_eq!(s.expert_at(0), 1);
        assert_eq!(s.expert_at(3), 1);
        assert_eq!(s.expert_at(5), 0);
    }

    #[test]
    fn exact_classification_orders_by_precedence() {
        let half = Forecast::Event(rat(1, 2));
        let four_fifths = Forecast::Event(rat(4, 5));
        let one = Forecast::Event(rat(1, 1));
        assert_eq!(
            classify(&half, &half, &one, CompareMode::Exact).unwrap(),
            Classification::Vacuous
        );
        assert_eq!(
            classify(&four_fifths, &half, &four_fifths, CompareMode::Exact).unwrap(),
            Classification::Complete
        );
        assert_eq!(
            classify(&four_fifths, &half, &one, CompareMode::Exact).unwrap(),
            Classification::Limited
        );
        // All three equal: nothing was hidden, so the market is complete.
        assert_eq!(
            classify(&half, &half, &half, CompareMode::Exact).unwrap(),
            Classification::Complete
        );
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        let e = Forecast::Event(rat(1, 2));
        let g = gauss(0.0, 1.0);
        assert!(matches!(
            classify(&e, &e, &g, CompareMode::Exact),
            Err(ProtocolError::KindMismatch { .. })
        ));
        assert!(matches!(
            classify(&e, &e, &e, CompareMode::Tolerance),
            Err(ProtocolError::KindMismatch { .. })
        ));
    }

    #[test]
    fn tolerance_classification_compares_canonical_mixtures() {
        let prior = gauss(0.0, 1.0);
        let pooled = gauss(0.5, 0.5);
        // A mixture that collapses to the pooled Gaussian.
        let collapsed = Forecast::Mixture(
            GaussianMixture::new(vec![
                (0.25, GaussianDist::new(0.5, 0.5).unwrap()),
                (0.75, GaussianDist::new(0.5 + 1e-13, 0.5).unwrap()),
            ])
            .unwrap(),
        );
        assert_eq!(
            classify(&collapsed, &prior, &pooled, CompareMode::Tolerance).unwrap(),
            Classification::Complete
        );

        // A genuine two-component mixture is neither prior nor pooled.
        let split = Forecast::Mixture(
            GaussianMixture::new(vec![
                (0.5, GaussianDist::new(1.0, 0.5).unwrap()),
                (0.5, GaussianDist::new(-1.0, 0.5).unwrap()),
            ])
            .unwrap(),
        );
        assert_eq!(
            classify(&split, &prior, &pooled, CompareMode::Tolerance).unwrap(),
            Classification::Limited
        );

        let near_prior = gauss(0.0 + 1e-9, 1.0);
        assert_eq!(
            classify(&near_prior, &prior, &pooled, CompareMode::Tolerance).unwrap(),
            Classification::Vacuous
        );
    }

    #[test]
    fn mixture_weight_order_does_not_matter() {
        let a = Forecast::Mixture(
            GaussianMixture::new(vec![
                (0.3, GaussianDist::new(1.0, 1.0).unwrap()),
                (0.7, GaussianDist::new(-1.0, 1.0).unwrap()),
            ])
            .unwrap(),
        );
        let b = Forecast::Mixture(
            GaussianMixture::new(vec![
                (0.7, GaussianDist::new(-1.0, 1.0).unwrap()),
                (0.3, GaussianDist::new(1.0, 1.0).unwrap()),
            ])
            .unwrap(),
        );
        assert!(forecast_eq(&a, &b, CompareMode::Tolerance).unwrap());
    }

    #[test]
    fn report_json_shape_is_stable() {
        let report = ConsensusReport::new(
            Forecast::Event(rat(4, 5)),
            Forecast::Event(rat(1, 2)),
            Forecast::Event(rat(4, 5)),
            2,
            CompareMode::Exact,
        )
        .unwrap();
        let j = report.to_json();
        assert_eq!(j["classification"], "complete");
        assert_eq!(j["rounds"], 2);
        assert_eq!(j["limit"]["prob"], "4/5");
        assert_eq!(j["prior"]["kind"], "event");
    }
}
