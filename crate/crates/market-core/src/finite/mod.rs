//! Exact sequential market for finite models.
//!
//! Every probability here is a [`Rational`]; announcements partition the
//! outcome space by exact forecast equality, so the common-knowledge
//! refinement step is well-defined with no tolerances anywhere.

mod builders;
mod market;

pub use builders::{build_overlapping_bernoulli, build_parity_model};
pub use market::{announce, forecast_function, run_market, verify_fixed_point};
pub(crate) use market::{posterior_on, turn_classes};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::prob::{OutcomeTable, ProbError, Rational, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FiniteError {
    #[error("realization lies outside the current public event")]
    RealizationOutsidePublicEvent,
    #[error("expert index {0} out of range")]
    BadExpert(usize),
    #[error("comment function for expert {expert} does not cover value {value}")]
    PartialComment { expert: usize, value: Value },
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// One market participant: which table variable they observe privately,
/// and an optional comment function announced alongside each forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct Expert {
    var: usize,
    comment: Option<BTreeMap<Value, Value>>,
}

impl Expert {
    pub fn var(&self) -> usize {
        self.var
    }

    pub fn comment_for(&self, h: Value) -> Option<Value> {
        self.comment.as_ref().map(|k| k[&h])
    }

    pub fn comment_map(&self) -> Option<&BTreeMap<Value, Value>> {
        self.comment.as_ref()
    }
}

/// A finite world model: a joint outcome table, a designated target
/// variable, and the experts' private variables.
///
/// The target may be a binary event (range `{0, 1}`) or any finite
/// variable; forecasts are always the full posterior vector over the
/// target range, which reduces to the event probability in the binary
/// case.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteModel {
    table: OutcomeTable,
    target: usize,
    experts: Vec<Expert>,
}

impl FiniteModel {
    /// `experts` pairs a private-variable name with an optional comment
    /// function, which must be total over that variable's range.
    pub fn new(
        table: OutcomeTable,
        target: &str,
        experts: Vec<(&str, Option<BTreeMap<Value, Value>>)>,
    ) -> Result<Self, FiniteError> {
        let target = table.var_index(target)?;
        let mut resolved = Vec::with_capacity(experts.len());
        for (i, (name, comment)) in experts.into_iter().enumerate() {
            let var = table.var_index(name)?;
            if let Some(map) = &comment {
                for value in &table.variables()[var].range {
                    if !map.contains_key(value) {
                        return Err(FiniteError::PartialComment {
                            expert: i,
                            value: *value,
                        });
                    }
                }
            }
            resolved.push(Expert { var, comment });
        }
        Ok(FiniteModel {
            table,
            target,
            experts: resolved,
        })
    }

    pub fn table(&self) -> &OutcomeTable {
        &self.table
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn target_range(&self) -> &[Value] {
        &self.table.variables()[self.target].range
    }

    /// True when the target is the indicator of an event.
    pub fn has_event_target(&self) -> bool {
        self.target_range() == [0, 1]
    }

    pub fn experts(&self) -> &[Expert] {
        &self.experts
    }

    pub fn n_experts(&self) -> usize {
        self.experts.len()
    }

    /// Cardinality of expert `i`'s private range (the K_i of the round
    /// bound).
    pub fn private_cardinality(&self, i: usize) -> usize {
        self.table.variables()[self.experts[i].var].range.len()
    }
}

/// A forecast for the target: exact posterior probabilities aligned with
/// the model's target range. Ordered so forecasts can key grouping maps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FiniteForecast(pub(crate) Vec<Rational>);

impl FiniteForecast {
    pub fn probs(&self) -> &[Rational] {
        &self.0
    }

    /// P(target = 1) for binary event targets.
    pub fn event_prob(&self, model: &FiniteModel) -> Option<&Rational> {
        model
            .target_range()
            .iter()
            .position(|&v| v == 1)
            .map(|i| &self.0[i])
    }
}

/// One public announcement: the expert, their comment (if any), and the
/// forecast they stated.
#[derive(Debug, Clone, PartialEq)]
pub struct Announcement {
    pub expert: usize,
    pub comment: Option<Value>,
    pub forecast: FiniteForecast,
}

/// Everything that is common knowledge after some announcements: the set
/// of outcomes still possible (as indices into the model's atom list)
/// plus the announcement log. The atom set only ever shrinks.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicEvent {
    atoms: Vec<usize>,
    log: Vec<Announcement>,
}

impl PublicEvent {
    pub fn initial(model: &FiniteModel) -> Self {
        PublicEvent {
            atoms: (0..model.table().atoms().len()).collect(),
            log: Vec::new(),
        }
    }

    pub fn atoms(&self) -> &[usize] {
        &self.atoms
    }

    pub fn log(&self) -> &[Announcement] {
        &self.log
    }

    pub fn size(&self) -> usize {
        self.atoms.len()
    }

    pub(crate) fn with(&self, atoms: Vec<usize>, entry: Announcement) -> Self {
        debug_assert!(atoms.iter().all(|a| self.atoms.contains(a)));
        let mut log = self.log.clone();
        log.push(entry);
        PublicEvent { atoms, log }
    }
}

/// Per-announcement record in a market trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteStep {
    pub round: usize,
    pub expert: usize,
    pub comment: Option<Value>,
    pub forecast: FiniteForecast,
    pub event_size_before: usize,
    pub event_size_after: usize,
}

/// Full history of a finite market run.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTrace {
    pub steps: Vec<FiniteStep>,
    /// Index (1-based) of the first full schedule cycle that left the
    /// public event unchanged.
    pub rounds_to_convergence: usize,
    pub limit_forecast: FiniteForecast,
    pub prior_forecast: FiniteForecast,
    /// Forecast given every expert's private value — the complete-consensus
    /// reference point.
    pub pooled_forecast: FiniteForecast,
    pub final_event: PublicEvent,
}
