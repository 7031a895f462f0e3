//! Predicting vacuous consensus from the model, and confirming it by
//! exhaustive simulation.

use crate::finite::{forecast_function, posterior_on, run_market, FiniteModel, PublicEvent};

use super::{ProtocolError, Schedule};

/// `predicted` is the structural test: every expert's private variable is
/// marginally uninformative about the target, so no first announcement
/// can move the market. `observed` runs the market from every outcome
/// and asks whether the limit ever leaves the prior.
///
/// For comment-free models the two always agree. A comment can separate
/// outcomes that forecasts alone would not, after which a marginally
/// uninformative variable may become conditionally informative, so only
/// the observed answer is meaningful when comments are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VacuityOutcome {
    pub predicted: bool,
    pub observed: bool,
}

pub fn vacuity_criterion(model: &FiniteModel) -> Result<VacuityOutcome, ProtocolError> {
    let initial = PublicEvent::initial(model);
    let prior = posterior_on(model, initial.atoms());

    let mut predicted = true;
    for i in 0..model.n_experts() {
        let map = forecast_function(model, &initial, i)?;
        if map.values().any(|f| *f != prior) {
            predicted = false;
            break;
        }
    }

    let schedule = Schedule::cyclic(model.n_experts());
    let mut observed = true;
    for (assign, _) in model.table().atoms().to_vec() {
        let trace = run_market(model, &assign, schedule.block())?;
        if trace.limit_forecast != prior {
            observed = false;
            break;
        }
    }

    Ok(VacuityOutcome {
        predicted,
        observed,
    })
}
