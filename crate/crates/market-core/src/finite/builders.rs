use num_bigint::BigInt;

use crate::prob::{OutcomeTable, Rational, Value, Variable};

use super::{FiniteError, FiniteModel};

/// Two independent fair bits and the event that they agree. Each bit alone
/// says nothing about the target; both together determine it.
pub fn build_parity_model() -> FiniteModel {
    let vars = vec![
        Variable::binary("X1"),
        Variable::binary("X2"),
        Variable::binary("A"),
    ];
    let quarter = Rational::new(BigInt::from(1), BigInt::from(4));
    let mut atoms = Vec::new();
    for x1 in 0..2 {
        for x2 in 0..2 {
            let a = i64::from(x1 == x2);
            atoms.push((vec![x1, x2, a], quarter.clone()));
        }
    }
    let table = OutcomeTable::new(vars, atoms).expect("parity table is valid");
    FiniteModel::new(table, "A", vec![("X1", None), ("X2", None)])
        .expect("parity model is valid")
}

fn factorial(n: u64) -> BigInt {
    (1..=n).map(BigInt::from).product()
}

fn binomial(n: u64, k: u64) -> BigInt {
    num_integer::binomial(BigInt::from(n), BigInt::from(k))
}

/// Bernoulli trials with a uniform prior on the success rate and one extra
/// hidden trial as the target. Expert one sees the success count of the
/// first `n0 + n1` trials, expert two of the first `n0` and last `n2`, so
/// their information overlaps on the shared block.
///
/// Latent variables `Y0, Y1, Y2` are the per-block success counts;
/// `X1 = Y0 + Y1` and `X2 = Y0 + Y2` are the experts' observations and
/// `A` is the outcome of the extra trial.
pub fn build_overlapping_bernoulli(n0: u64, n1: u64, n2: u64) -> Result<FiniteModel, FiniteError> {
    let n = n0 + n1 + n2;
    let vars = vec![
        Variable::new("Y0", (0..=n0 as Value).collect()),
        Variable::new("Y1", (0..=n1 as Value).collect()),
        Variable::new("Y2", (0..=n2 as Value).collect()),
        Variable::new("X1", (0..=(n0 + n1) as Value).collect()),
        Variable::new("X2", (0..=(n0 + n2) as Value).collect()),
        Variable::binary("A"),
    ];

    // Integrating the binomial likelihood against the uniform prior gives
    // P(y0, y1, y2, a) = C(n0,y0) C(n1,y1) C(n2,y2) (s+a)! (n+1-s-a)! / (n+2)!
    // with s = y0 + y1 + y2.
    let denom = factorial(n + 2);
    let mut atoms = Vec::new();
    for y0 in 0..=n0 {
        for y1 in 0..=n1 {
            for y2 in 0..=n2 {
                let s = y0 + y1 + y2;
                let combo = binomial(n0, y0) * binomial(n1, y1) * binomial(n2, y2);
                for a in 0..=1u64 {
                    let numer = &combo * factorial(s + a) * factorial(n + 1 - s - a);
                    let assign = vec![
                        y0 as Value,
                        y1 as Value,
                        y2 as Value,
                        (y0 + y1) as Value,
                        (y0 + y2) as Value,
                        a as Value,
                    ];
                    atoms.push((assign, Rational::new(numer, denom.clone())));
                }
            }
        }
    }

    let table = OutcomeTable::new(vars, atoms)?;
    FiniteModel::new(table, "A", vec![("X1", None), ("X2", None)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::market::posterior_on;
    use crate::finite::{forecast_function, PublicEvent};
    use crate::prob::rat;

    #[test]
    fn parity_shape() {
        let m = build_parity_model();
        assert_eq!(m.table().atoms().len(), 4);
        assert!(m.has_event_target());
        assert_eq!(m.n_experts(), 2);
        let prior = posterior_on(&m, PublicEvent::initial(&m).atoms());
        assert_eq!(prior.probs(), &[rat(1, 2), rat(1, 2)]);
    }

    #[test]
    fn parity_single_bit_is_uninformative() {
        let m = build_parity_model();
        let public = PublicEvent::initial(&m);
        for expert in 0..2 {
            let map = forecast_function(&m, &public, expert).unwrap();
            assert_eq!(map.len(), 2);
            for f in map.values() {
                assert_eq!(f.probs(), &[rat(1, 2), rat(1, 2)]);
            }
        }
    }

    // Independent route: P(A = a, Y = y) integrates the trial likelihood
    // against the uniform rate prior, so every weight must be a Beta
    // integral B(s + a + 1, n - s - a + 2) times the choose factors.
    fn beta_weight(n: &[u64; 3], y: &[u64; 3], a: u64) -> Rational {
        fn fact(k: u64) -> BigInt {
            (1..=k).map(BigInt::from).product()
        }
        let s: u64 = y.iter().sum();
        let total: u64 = n.iter().sum();
        let choose: BigInt = (0..3).map(|i| binomial(n[i], y[i])).product();
        // B(p, q) = (p-1)! (q-1)! / (p+q-1)! for integer arguments.
        let p = s + a + 1;
        let q = total - s + 2 - a;
        Rational::new(choose * fact(p - 1) * fact(q - 1), fact(p + q - 1))
    }

    #[test]
    fn bernoulli_weights_match_beta_integrals() {
        let n = [2u64, 1, 3];
        let m = build_overlapping_bernoulli(n[0], n[1], n[2]).unwrap();
        for (assign, w) in m.table().atoms() {
            let y = [assign[0] as u64, assign[1] as u64, assign[2] as u64];
            assert_eq!(*w, beta_weight(&n, &y, assign[5] as u64));
            assert_eq!(assign[3], assign[0] + assign[1]);
            assert_eq!(assign[4], assign[0] + assign[2]);
        }
    }

    #[test]
    fn bernoulli_prior_is_even() {
        for (n0, n1, n2) in [(1, 1, 1), (2, 2, 0), (0, 0, 0), (3, 1, 2)] {
            let m = build_overlapping_bernoulli(n0, n1, n2).unwrap();
            let prior = posterior_on(&m, PublicEvent::initial(&m).atoms());
            assert_eq!(prior.probs(), &[rat(1, 2), rat(1, 2)]);
        }
    }

    #[test]
    fn bernoulli_first_forecast_is_laplace_rule() {
        let (n0, n1, n2) = (2u64, 1, 3);
        let m = build_overlapping_bernoulli(n0, n1, n2).unwrap();
        let map = forecast_function(&m, &PublicEvent::initial(&m), 0).unwrap();
        assert_eq!(map.len(), (n0 + n1 + 1) as usize);
        for (x1, f) in &map {
            // Expert one's count alone is a sufficient statistic for the
            // rate, so the forecast is the Laplace rule of succession.
            let expect = rat(x1 + 1, (n0 + n1) as i64 + 2);
            assert_eq!(*f.event_prob(&m).unwrap(), expect);
        }
    }
}
