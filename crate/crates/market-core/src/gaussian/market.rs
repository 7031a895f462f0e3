use nalgebra::DVector;

use crate::prob::GaussianDist;
use crate::protocol::{CompareMode, ConsensusReport, Forecast, ProtocolError};

use super::conditional::{solve_conditional, PublicSpan};
use super::{GaussianError, GaussianExpert, GaussianModel, LinearStatistic};

/// Consecutive announcement means closer than this, relative to the size
/// of the means themselves, signal convergence. Once a full round adds no
/// public statistic the announcements agree exactly in real arithmetic,
/// so this only needs to sit above solver noise, and below it any
/// statistic the span test could have discarded moves the mean by less
/// than the tolerance itself.
pub const CONVERGENCE_TOL: f64 = 1e-8;

/// Converged forecasts must agree with the pooled forecast to this
/// relative tolerance; the runner enforces it.
pub const CONSENSUS_TOL: f64 = 1e-7;

/// One announcement in a linear market run.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub round: usize,
    pub expert: GaussianExpert,
    pub mean: f64,
    pub sd: f64,
    pub new_statistic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearTrace {
    pub rows: Vec<LinearRow>,
    /// Round at which no announcement moved and no statistic was added.
    pub rounds: usize,
    pub converged: bool,
    pub prior: GaussianDist,
    pub pooled: GaussianDist,
    pub limit: GaussianDist,
}

/// One expert's turn: condition the target on their own coordinates plus
/// everything public, and work out which linear functional the
/// announcement reveals. The returned statistic is `None` when that
/// functional already lies in the public span, in which case observers
/// learn nothing new.
pub fn expert_turn(
    model: &GaussianModel,
    expert: GaussianExpert,
    own_values: &[f64],
    span: &PublicSpan,
) -> Result<(GaussianDist, Option<LinearStatistic>), GaussianError> {
    let block = model.block(expert);
    if own_values.len() != block.len() {
        return Err(GaussianError::DimensionMismatch {
            what: "expert block values",
            expected: block.len(),
            found: own_values.len(),
        });
    }

    let mut stats: Vec<LinearStatistic> = block
        .clone()
        .zip(own_values)
        .map(|(i, &v)| model.coordinate_stat(i, v))
        .collect();
    stats.extend(span.stats().iter().cloned());

    let sol = solve_conditional(model, &stats)?;

    // The announced mean, as a function of the predictor vector, is
    // mu_y + sum_a alpha_a (B_a(W) - E B_a) = gamma' W + beta.
    let p = model.predictor_dim();
    let mut gamma = DVector::zeros(p);
    for (a, b) in sol.basis.iter().enumerate() {
        gamma += b * sol.alpha[a];
    }
    let mu_w = model.mean().rows(0, p);
    let beta = model.mean()[p] - gamma.dot(&mu_w);

    let revealed = if span.contains(&gamma) {
        None
    } else {
        Some(LinearStatistic {
            coeffs: gamma,
            intercept: beta,
            value: sol.dist.mean(),
        })
    };
    Ok((sol.dist, revealed))
}

/// Alternate expert one and expert two until a full round changes
/// nothing: every announcement mean within [`CONVERGENCE_TOL`] of its
/// predecessor and no new public statistic.
///
/// On success the limit provably agrees with the pooled forecast (the
/// conditional given both blocks); the runner checks this within
/// [`CONSENSUS_TOL`] and that the round count is at most
/// `min(k, h) + 2`.
pub fn run_linear_market(
    model: &GaussianModel,
    x: &[f64],
    z: &[f64],
    max_rounds: usize,
) -> Result<LinearTrace, GaussianError> {
    if x.len() != model.k() {
        return Err(GaussianError::DimensionMismatch {
            what: "x block",
            expected: model.k(),
            found: x.len(),
        });
    }
    if z.len() != model.h() {
        return Err(GaussianError::DimensionMismatch {
            what: "z block",
            expected: model.h(),
            found: z.len(),
        });
    }

    let prior = model.prior();
    let pooled_stats: Vec<LinearStatistic> = x
        .iter()
        .chain(z)
        .enumerate()
        .map(|(i, &v)| model.coordinate_stat(i, v))
        .collect();
    let pooled = solve_conditional(model, &pooled_stats)?.dist;

    let mut span = PublicSpan::empty(model.predictor_dim());
    let mut rows: Vec<LinearRow> = Vec::new();
    let mut prev_mean = prior.mean();
    let mut last: Option<GaussianDist> = None;

    for round in 1..=max_rounds {
        let mut moved = false;
        for (expert, values) in [(GaussianExpert::One, x), (GaussianExpert::Two, z)] {
            let (dist, revealed) = expert_turn(model, expert, values, &span)?;
            let mut added = false;
            if let Some(stat) = revealed {
                added = span.push(stat);
            }
            let scale = 1.0 + dist.mean().abs().max(prev_mean.abs());
            if (dist.mean() - prev_mean).abs() >= CONVERGENCE_TOL * scale || added {
                moved = true;
            }
            prev_mean = dist.mean();
            rows.push(LinearRow {
                round,
                expert,
                mean: dist.mean(),
                sd: dist.sd(),
                new_statistic: added,
            });
            last = Some(dist);
        }

        if !moved {
            let limit = last.expect("at least one announcement per round");
            let bound = model.k().min(model.h()) + 2;
            assert!(
                round <= bound,
                "converged in {round} rounds, above the {bound} round bound"
            );
            let (u, v) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
            let mean_tol = CONSENSUS_TOL * (1.0 + pooled.mean().abs());
            let sd_tol = CONSENSUS_TOL * (1.0 + pooled.sd());
            for r in [u, v] {
                assert!(
                    (r.mean - pooled.mean()).abs() <= mean_tol
                        && (r.sd - pooled.sd()).abs() <= sd_tol,
                    "converged forecast ({}, {}) disagrees with pooled ({}, {})",
                    r.mean,
                    r.sd,
                    pooled.mean(),
                    pooled.sd()
                );
            }
            return Ok(LinearTrace {
                rows,
                rounds: round,
                converged: true,
                prior,
                pooled,
                limit,
            });
        }
    }
    Err(GaussianError::MaxRoundsExceeded { rounds: max_rounds })
}

pub fn report_from_linear(trace: &LinearTrace) -> Result<ConsensusReport, ProtocolError> {
    ConsensusReport::new(
        Forecast::Gaussian(trace.limit),
        Forecast::Gaussian(trace.prior),
        Forecast::Gaussian(trace.pooled),
        trace.rounds,
        CompareMode::Tolerance,
    )
}

/// Render a trace as CSV, one row per announcement.
pub fn trace_csv(trace: &LinearTrace) -> String {
    let mut out = String::from("round,expert,mean,sd,new_statistic\n");
    for r in &trace.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.round,
            r.expert.index(),
            r.mean,
            r.sd,
            r.new_statistic
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector, DMatrix, DVector};

    use super::*;
    use crate::protocol::Classification;

    fn cross_model(a: f64, b: f64) -> GaussianModel {
        GaussianModel::new(
            vec!["x".into()],
            vec!["z".into()],
            "y".into(),
            dvector![0.0, 0.0, 0.0],
            dmatrix![
                1.0, 0.0, a;
                0.0, 1.0, b;
                a,   b,   1.0
            ],
        )
        .unwrap()
    }

    #[test]
    fn independent_blocks_converge_in_two_rounds() {
        let m = cross_model(0.6, 0.3);
        let t = run_linear_market(&m, &[1.0], &[2.0], 20).unwrap();
        assert_eq!(t.rounds, 2);
        // u1 = a x; v1 already pools both blocks since the first
        // announcement reveals x exactly.
        assert_relative_eq!(t.rows[0].mean, 0.6, epsilon = 1e-12);
        assert_relative_eq!(t.rows[1].mean, 1.2, epsilon = 1e-12);
        assert_relative_eq!(t.limit.mean(), t.pooled.mean(), epsilon = 1e-12);
        assert_relative_eq!(
            t.limit.variance(),
            1.0 - 0.36 - 0.09,
            epsilon = 1e-12
        );
        assert_eq!(
            t.rows.iter().map(|r| r.new_statistic).collect::<Vec<_>>(),
            vec![true, true, false, false]
        );
        let report = report_from_linear(&t).unwrap();
        assert_eq!(report.classification, Classification::Complete);
    }

    #[test]
    fn uninformative_second_block_repeats_the_public_forecast() {
        // z independent of (x, y): expert two only echoes what expert
        // one already revealed.
        let m = cross_model(0.5, 0.0);
        let t = run_linear_market(&m, &[2.0], &[-3.0], 20).unwrap();
        assert_eq!(t.rounds, 2);
        assert_relative_eq!(t.rows[0].mean, 1.0, epsilon = 1e-12);
        assert_relative_eq!(t.rows[1].mean, 1.0, epsilon = 1e-12);
        assert!(!t.rows[1].new_statistic);
    }

    #[test]
    fn prior_market_when_nothing_is_informative() {
        let m = cross_model(0.0, 0.0);
        let t = run_linear_market(&m, &[4.0], &[-1.0], 20).unwrap();
        assert_eq!(t.rounds, 1);
        assert_relative_eq!(t.limit.mean(), 0.0);
        assert_relative_eq!(t.limit.variance(), 1.0);
        assert!(t.rows.iter().all(|r| !r.new_statistic));
        // Degenerate case: prior, limit, and pooled coincide.
        let report = report_from_linear(&t).unwrap();
        assert_eq!(report.classification, Classification::Complete);
    }

    #[test]
    fn wider_blocks_still_land_on_the_pooled_forecast() {
        // Fixed 2 + 2 predictor model built from a full-rank factor, so
        // the dispersion is positive definite by construction.
        let a = DMatrix::from_row_slice(
            5,
            5,
            &[
                1.0, 0.3, 0.0, 0.2, 0.1, //
                0.3, 1.2, 0.4, 0.0, 0.0, //
                0.0, 0.4, 0.9, 0.3, 0.2, //
                0.2, 0.0, 0.3, 1.1, 0.4, //
                0.1, 0.0, 0.2, 0.4, 1.0,
            ],
        );
        let sigma = &a * a.transpose();
        let m = GaussianModel::new(
            vec!["x1".into(), "x2".into()],
            vec!["z1".into(), "z2".into()],
            "y".into(),
            DVector::zeros(5),
            sigma,
        )
        .unwrap();
        let t = run_linear_market(&m, &[1.0, -0.5], &[0.25, 2.0], 20).unwrap();
        assert!(t.rounds <= 4);
        assert_relative_eq!(t.limit.mean(), t.pooled.mean(), epsilon = 1e-9);
        assert_relative_eq!(t.limit.sd(), t.pooled.sd(), epsilon = 1e-9);
    }

    #[test]
    fn block_length_mismatch_is_reported() {
        let m = cross_model(0.5, 0.2);
        assert!(matches!(
            run_linear_market(&m, &[1.0, 2.0], &[0.0], 10),
            Err(GaussianError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn trace_csv_has_one_line_per_announcement() {
        let m = cross_model(0.6, 0.3);
        let t = run_linear_market(&m, &[1.0], &[2.0], 20).unwrap();
        let csv = trace_csv(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "round,expert,mean,sd,new_statistic");
        assert_eq!(lines.len(), 1 + t.rows.len());
        assert!(lines[1].starts_with("1,1,0.6,"));
    }
}
