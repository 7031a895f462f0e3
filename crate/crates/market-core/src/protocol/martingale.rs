//! Exact martingale verification for finite markets.
//!
//! The announcement sequence is a martingale with respect to public
//! information: conditional on today's public event, the expected value
//! of the next announcement equals the current market probability. For a
//! finite model this can be checked without sampling by walking the tree
//! of reachable public events and comparing exact rationals.

use std::collections::BTreeMap;

use crate::finite::{forecast_function, turn_classes, FiniteForecast, FiniteModel, PublicEvent};
use crate::finite::{posterior_on, Announcement};
use crate::prob::Value;

use super::{ProtocolError, Schedule};

/// Check the martingale identity at every reachable public event for the
/// first `steps` announcements. Returns false as soon as one node fails.
pub fn martingale_check_exact(
    model: &FiniteModel,
    schedule: &Schedule,
    steps: usize,
) -> Result<bool, ProtocolError> {
    martingale_check_exact_with(model, schedule, steps, |_, map| map.clone())
}

/// Same walk, but announcements pass through `distort` first. The
/// identity is checked against whatever would actually be announced, so
/// a distorting forecaster should fail; this gives the harness a negative
/// control that the checker has teeth.
pub fn martingale_check_exact_with<F>(
    model: &FiniteModel,
    schedule: &Schedule,
    steps: usize,
    distort: F,
) -> Result<bool, ProtocolError>
where
    F: Fn(usize, &BTreeMap<Value, FiniteForecast>) -> BTreeMap<Value, FiniteForecast>,
{
    let public = PublicEvent::initial(model);
    let prior = posterior_on(model, public.atoms());
    walk(model, schedule, &distort, &public, &prior, 0, steps)
}

fn walk<F>(
    model: &FiniteModel,
    schedule: &Schedule,
    distort: &F,
    public: &PublicEvent,
    current: &FiniteForecast,
    step: usize,
    steps: usize,
) -> Result<bool, ProtocolError>
where
    F: Fn(usize, &BTreeMap<Value, FiniteForecast>) -> BTreeMap<Value, FiniteForecast>,
{
    if step == steps {
        return Ok(true);
    }
    let expert = schedule.expert_at(step);
    let map = distort(step, &forecast_function(model, public, expert)?);
    let classes = turn_classes(model, public, expert, &map);

    // sum_c P(class) * announced_c = current, cleared of denominators:
    // sum_c w_c * v_c = current * total.
    let total = model.table().weight_of(public.atoms());
    for t in 0..current.probs().len() {
        let lhs: crate::prob::Rational = classes
            .iter()
            .map(|c| &c.weight * &c.forecast.probs()[t])
            .sum();
        if lhs != &current.probs()[t] * &total {
            return Ok(false);
        }
    }

    for class in classes {
        let entry = Announcement {
            expert,
            comment: class.comment,
            forecast: class.forecast.clone(),
        };
        let next = public.with(class.atoms, entry);
        if !walk(model, schedule, distort, &next, &class.forecast, step + 1, steps)? {
            return Ok(false);
        }
    }
    Ok(true)
}
