use std::collections::BTreeMap;

use num_traits::Zero;

use crate::prob::{Rational, Value};

use super::{Announcement, FiniteError, FiniteForecast, FiniteModel, FiniteStep, FiniteTrace, PublicEvent};

/// Exact posterior over the target within the given atom subset.
pub(crate) fn posterior_on(model: &FiniteModel, atoms: &[usize]) -> FiniteForecast {
    let table = model.table();
    let total = table.weight_of(atoms);
    debug_assert!(!total.is_zero(), "public events have positive probability");
    let probs = model
        .target_range()
        .iter()
        .map(|&t| {
            let hit: Vec<usize> = atoms
                .iter()
                .copied()
                .filter(|&a| table.value(a, model.target()) == t)
                .collect();
            table.weight_of(&hit) / &total
        })
        .collect();
    FiniteForecast(probs)
}

/// The forecast expert `expert` would announce for each private value
/// consistent with the current public event. This is itself computable
/// from public information, which is what lets observers invert the
/// announcement.
pub fn forecast_function(
    model: &FiniteModel,
    public: &PublicEvent,
    expert: usize,
) -> Result<BTreeMap<Value, FiniteForecast>, FiniteError> {
    let e = model
        .experts()
        .get(expert)
        .ok_or(FiniteError::BadExpert(expert))?;
    let mut groups: BTreeMap<Value, Vec<usize>> = BTreeMap::new();
    for &a in public.atoms() {
        groups
            .entry(model.table().value(a, e.var()))
            .or_default()
            .push(a);
    }
    Ok(groups
        .into_iter()
        .map(|(h, atoms)| (h, posterior_on(model, &atoms)))
        .collect())
}

/// One refinement class of an expert's turn: all outcomes in the current
/// public event that would produce the same (comment, forecast) pair.
#[derive(Debug, Clone)]
pub(crate) struct TurnClass {
    pub comment: Option<Value>,
    pub forecast: FiniteForecast,
    pub atoms: Vec<usize>,
    pub weight: Rational,
}

/// Partition the public event by what the expert's announcement would be.
/// `forecasts` must be the forecast function against this same event.
pub(crate) fn turn_classes(
    model: &FiniteModel,
    public: &PublicEvent,
    expert: usize,
    forecasts: &BTreeMap<Value, FiniteForecast>,
) -> Vec<TurnClass> {
    let e = &model.experts()[expert];
    let mut classes: BTreeMap<(Option<Value>, &FiniteForecast), Vec<usize>> = BTreeMap::new();
    for &a in public.atoms() {
        let h = model.table().value(a, e.var());
        classes
            .entry((e.comment_for(h), &forecasts[&h]))
            .or_default()
            .push(a);
    }
    classes
        .into_iter()
        .map(|((comment, forecast), atoms)| TurnClass {
            comment,
            forecast: forecast.clone(),
            weight: model.table().weight_of(&atoms),
            atoms,
        })
        .collect()
}

fn atom_of(model: &FiniteModel, realization: &[Value]) -> Option<usize> {
    model
        .table()
        .atoms()
        .iter()
        .position(|(assign, _)| assign.as_slice() == realization)
}

/// One expert turn at the given true outcome. Returns the announcement
/// and the refined public event: observers keep exactly the outcomes
/// that share the announced comment and whose forecast-function value
/// equals the announced forecast.
pub fn announce(
    model: &FiniteModel,
    public: &PublicEvent,
    expert: usize,
    realization: &[Value],
) -> Result<(FiniteForecast, PublicEvent), FiniteError> {
    let e = model
        .experts()
        .get(expert)
        .ok_or(FiniteError::BadExpert(expert))?;
    let atom = atom_of(model, realization)
        .filter(|a| public.atoms().contains(a))
        .ok_or(FiniteError::RealizationOutsidePublicEvent)?;

    let forecasts = forecast_function(model, public, expert)?;
    let h_true = model.table().value(atom, e.var());
    let comment = e.comment_for(h_true);
    let announced = forecasts[&h_true].clone();

    let atoms: Vec<usize> = public
        .atoms()
        .iter()
        .copied()
        .filter(|&a| {
            let h = model.table().value(a, e.var());
            e.comment_for(h) == comment && forecasts[&h] == announced
        })
        .collect();
    debug_assert!(atoms.contains(&atom));

    let entry = Announcement {
        expert,
        comment,
        forecast: announced.clone(),
    };
    Ok((announced, public.with(atoms, entry)))
}

/// Run the market to convergence under a repeating schedule block.
///
/// A round is one pass through the block; the market has converged at the
/// first round whose announcements leave the public event unchanged.
/// Termination is guaranteed: any round that refines the event removes at
/// least one private value of some announcing expert.
pub fn run_market(
    model: &FiniteModel,
    realization: &[Value],
    schedule_block: &[usize],
) -> Result<FiniteTrace, FiniteError> {
    assert!(!schedule_block.is_empty(), "schedule block must be nonempty");
    if atom_of(model, realization).is_none() {
        return Err(FiniteError::RealizationOutsidePublicEvent);
    }
    for &e in schedule_block {
        if e >= model.n_experts() {
            return Err(FiniteError::BadExpert(e));
        }
    }

    let mut public = PublicEvent::initial(model);
    let prior_forecast = posterior_on(model, public.atoms());
    let pooled_forecast = pooled(model, realization);

    let mut steps = Vec::new();
    let mut round = 0usize;
    loop {
        round += 1;
        assert!(
            round <= model.table().atoms().len() + 1,
            "refinement must terminate within one round per atom"
        );
        let size_at_round_start = public.size();
        for &expert in schedule_block {
            let before = public.size();
            let (forecast, next) = announce(model, &public, expert, realization)?;
            let comment = next.log().last().and_then(|a| a.comment);
            steps.push(FiniteStep {
                round,
                expert,
                comment,
                forecast,
                event_size_before: before,
                event_size_after: next.size(),
            });
            public = next;
        }
        if public.size() == size_at_round_start {
            break;
        }
    }

    let limit_forecast = steps
        .last()
        .map(|s| s.forecast.clone())
        .expect("schedule block is nonempty");
    Ok(FiniteTrace {
        steps,
        rounds_to_convergence: round,
        limit_forecast,
        prior_forecast,
        pooled_forecast,
        final_event: public,
    })
}

/// Forecast given every expert's private value at this realization.
fn pooled(model: &FiniteModel, realization: &[Value]) -> FiniteForecast {
    let atoms: Vec<usize> = (0..model.table().atoms().len())
        .filter(|&a| {
            model.experts().iter().all(|e| {
                model.table().value(a, e.var())
                    == realization[e.var()]
            })
        })
        .collect();
    posterior_on(model, &atoms)
}

/// At a converged public event no expert's announcement can refine it:
/// every consistent private value yields the forecast already implied by
/// the event, and comments separate nothing new. Returns the per-expert
/// check results.
pub fn verify_fixed_point(
    model: &FiniteModel,
    public: &PublicEvent,
) -> Result<Vec<bool>, FiniteError> {
    let base = posterior_on(model, public.atoms());
    let mut ok = Vec::with_capacity(model.n_experts());
    for i in 0..model.n_experts() {
        let forecasts = forecast_function(model, public, i)?;
        let classes = turn_classes(model, public, i, &forecasts);
        ok.push(classes.len() == 1 && forecasts.values().all(|f| *f == base));
    }
    Ok(ok)
}
