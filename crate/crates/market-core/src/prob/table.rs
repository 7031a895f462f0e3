//! Finite joint distributions with exact rational weights.

use std::collections::HashSet;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{format_rational, ProbError, Rational};

/// Outcome of a finite-range variable. Derived quantities (sums, parities,
/// indicator events) are materialized as ordinary columns, so a single
/// integer type covers every model.
pub type Value = i64;

/// One joint outcome: a value per table variable, in variable order.
pub type Assignment = Vec<Value>;

/// A named variable together with its finite range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub range: Vec<Value>,
}

impl Variable {
    pub fn new(name: impl Into<String>, range: Vec<Value>) -> Self {
        Variable {
            name: name.into(),
            range,
        }
    }

    /// `{0, 1}` — events and coin flips.
    pub fn binary(name: impl Into<String>) -> Self {
        Variable::new(name, vec![0, 1])
    }
}

/// A finite joint distribution over named variables, stored sparsely:
/// only positive-weight assignments are kept, and the kept weights sum
/// to exactly 1 in rational arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeTable {
    variables: Vec<Variable>,
    atoms: Vec<(Assignment, Rational)>,
}

impl OutcomeTable {
    /// Validates and normalizes the atom list: zero weights are dropped,
    /// negative weights and duplicate assignments are rejected, and the
    /// total weight must be exactly 1.
    pub fn new(
        variables: Vec<Variable>,
        atoms: Vec<(Assignment, Rational)>,
    ) -> Result<Self, ProbError> {
        for v in &variables {
            let distinct: HashSet<_> = v.range.iter().collect();
            if v.range.is_empty() || distinct.len() != v.range.len() {
                return Err(ProbError::BadVariableRange);
            }
        }
        let mut kept: Vec<(Assignment, Rational)> = Vec::with_capacity(atoms.len());
        let mut seen: HashSet<Assignment> = HashSet::with_capacity(atoms.len());
        let mut total = Rational::zero();
        for (assignment, weight) in atoms {
            if assignment.len() != variables.len() {
                return Err(ProbError::AssignmentArity {
                    got: assignment.len(),
                    want: variables.len(),
                });
            }
            for (var, &value) in variables.iter().zip(&assignment) {
                if !var.range.contains(&value) {
                    return Err(ProbError::ValueOutsideRange {
                        variable: var.name.clone(),
                        value,
                    });
                }
            }
            if weight.is_negative() {
                return Err(ProbError::NegativeWeight);
            }
            if !seen.insert(assignment.clone()) {
                return Err(ProbError::DuplicateAssignment);
            }
            if weight.is_zero() {
                continue;
            }
            total += &weight;
            kept.push((assignment, weight));
        }
        if !total.is_one() {
            return Err(ProbError::UnnormalizedTable(format_rational(&total)));
        }
        Ok(OutcomeTable {
            variables,
            atoms: kept,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn atoms(&self) -> &[(Assignment, Rational)] {
        &self.atoms
    }

    pub fn var_index(&self, name: &str) -> Result<usize, ProbError> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| ProbError::UnknownVariable(name.to_owned()))
    }

    pub fn value(&self, atom: usize, var: usize) -> Value {
        self.atoms[atom].0[var]
    }

    pub fn weight(&self, atom: usize) -> &Rational {
        &self.atoms[atom].1
    }

    /// Exact probability of an event given as a predicate over assignments.
    pub fn marginal_prob<F>(&self, event: F) -> Rational
    where
        F: Fn(&[Value]) -> bool,
    {
        self.atoms
            .iter()
            .filter(|(a, _)| event(a))
            .map(|(_, w)| w)
            .sum()
    }

    /// Total weight of a set of atom indices.
    pub fn weight_of(&self, indices: &[usize]) -> Rational {
        indices.iter().map(|&i| &self.atoms[i].1).sum()
    }

    /// Restricts to the event and renormalizes exactly.
    pub fn condition<F>(&self, event: F) -> Result<OutcomeTable, ProbError>
    where
        F: Fn(&[Value]) -> bool,
    {
        let keep: Vec<usize> = (0..self.atoms.len())
            .filter(|&i| event(&self.atoms[i].0))
            .collect();
        self.condition_to_indices(&keep)
    }

    /// Like [`condition`](Self::condition) but the event is an atom index set.
    pub fn condition_to_indices(&self, indices: &[usize]) -> Result<OutcomeTable, ProbError> {
        let total = self.weight_of(indices);
        if total.is_zero() {
            return Err(ProbError::ZeroProbabilityEvent);
        }
        let atoms = indices
            .iter()
            .map(|&i| {
                let (a, w) = &self.atoms[i];
                (a.clone(), w / &total)
            })
            .collect();
        Ok(OutcomeTable {
            variables: self.variables.clone(),
            atoms,
        })
    }

    /// Conditional probability of `event` given the sub-population `given`
    /// (atom indices), without materializing the conditioned table.
    pub fn conditional_prob<F>(&self, given: &[usize], event: F) -> Result<Rational, ProbError>
    where
        F: Fn(&[Value]) -> bool,
    {
        let total = self.weight_of(given);
        if total.is_zero() {
            return Err(ProbError::ZeroProbabilityEvent);
        }
        let hit: Rational = given
            .iter()
            .filter(|&&i| event(&self.atoms[i].0))
            .map(|&i| &self.atoms[i].1)
            .sum();
        Ok(hit / total)
    }
}
