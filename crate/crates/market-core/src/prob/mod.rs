//! Shared probability primitives: exact rationals, finite joint tables,
//! Gaussian and Gaussian-mixture distributions.
//!
//! Everything the finite engine touches is exact rational arithmetic;
//! floating point appears only in the Gaussian and mixture types. All
//! types are immutable values after construction and safe to share
//! across threads.

mod gaussian;
mod table;

pub use gaussian::{GaussianDist, GaussianMixture};
pub use table::{Assignment, OutcomeTable, Value, Variable};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact probability carrier: arbitrary-precision rational, always kept
/// normalized (positive denominator, reduced to lowest terms).
pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbError {
    #[error("conditioning event has probability zero")]
    ZeroProbabilityEvent,
    #[error("variance must be positive and finite, got {0}")]
    NonPositiveVariance(f64),
    #[error("mixture weights must be nonnegative and sum to 1, got sum {0}")]
    BadMixtureWeights(f64),
    #[error("mixture must have at least one component")]
    EmptyMixture,
    #[error("probability must lie in [0, 1]")]
    ProbabilityOutOfRange,
    #[error("atom weights must be nonnegative")]
    NegativeWeight,
    #[error("atom weights must sum to 1, got {0}")]
    UnnormalizedTable(String),
    #[error("duplicate assignment in outcome table")]
    DuplicateAssignment,
    #[error("assignment has {got} values but the table has {want} variables")]
    AssignmentArity { got: usize, want: usize },
    #[error("value {value} outside the declared range of variable {variable}")]
    ValueOutsideRange { variable: String, value: Value },
    #[error("variable ranges must be non-empty and duplicate-free")]
    BadVariableRange,
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("cannot parse rational from {0:?}")]
    BadRational(String),
}

/// Shorthand for small rational constants.
pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses `"num/den"` or a bare integer. Whitespace around tokens is
/// accepted; the denominator must be nonzero.
pub fn parse_rational(s: &str) -> Result<Rational, ProbError> {
    let bad = || ProbError::BadRational(s.to_owned());
    let mut parts = s.splitn(2, '/');
    let numer: BigInt = parts
        .next()
        .ok_or_else(bad)?
        .trim()
        .parse()
        .map_err(|_| bad())?;
    let denom: BigInt = match parts.next() {
        Some(d) => d.trim().parse().map_err(|_| bad())?,
        None => BigInt::one(),
    };
    if denom.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(numer, denom))
}

/// Formats as `"num/den"`, or just `"num"` for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Lossy conversion for display and continuous-mode summaries.
pub fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// A probability forecast for a single event, tagged by arithmetic mode.
#[derive(Debug, Clone, PartialEq)]
pub enum EventProbability {
    Exact(Rational),
    Approx(f64),
}

impl EventProbability {
    pub fn exact(p: Rational) -> Result<Self, ProbError> {
        if p.is_negative() || p > Rational::one() {
            return Err(ProbError::ProbabilityOutOfRange);
        }
        Ok(EventProbability::Exact(p))
    }

    pub fn approx(p: f64) -> Result<Self, ProbError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ProbError::ProbabilityOutOfRange);
        }
        Ok(EventProbability::Approx(p))
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            EventProbability::Exact(r) => rational_to_f64(r),
            EventProbability::Approx(p) => *p,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_normalization_is_canonical() {
        assert_eq!(rat(2, 4), rat(1, 2));
        assert_eq!(rat(-3, -6), rat(1, 2));
        assert_eq!(format_rational(&rat(2, 4)), "1/2");
        assert_eq!(format_rational(&rat(6, 3)), "2");
    }

    #[test]
    fn parse_rational_accepts_fractions_and_integers() {
        assert_eq!(parse_rational("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_rational(" -1 / 2 ").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), rat(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("a/b").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational("1/2/3").is_err());
    }

    #[test]
    fn event_probability_bounds() {
        assert!(EventProbability::exact(rat(1, 2)).is_ok());
        assert!(EventProbability::exact(rat(3, 2)).is_err());
        assert!(EventProbability::exact(rat(-1, 2)).is_err());
        assert!(EventProbability::approx(1.0).is_ok());
        assert!(EventProbability::approx(1.0 + 1e-9).is_err());
    }
}
