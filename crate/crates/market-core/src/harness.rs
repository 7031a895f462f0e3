//! Seeded verification suites: generate random models, run the exact
//! protocol checks, and report deterministically. The same seed and
//! count always produce byte-identical reports.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

use crate::finite::{
    build_parity_model, run_market, verify_fixed_point, FiniteForecast, FiniteModel,
};
use crate::mixture::{
    run_ts_market, run_ts_market_ordered, sign_weights, verify_sign_independence,
};
use crate::numeric::integrate;
use crate::prob::{format_rational, OutcomeTable, Rational, Value, Variable};
use crate::protocol::{
    martingale_check_exact, martingale_check_exact_with, vacuity_criterion, Classification,
    Schedule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteKind {
    Martingale,
    Vacuity,
    Bounds,
    Mixture,
}

impl SuiteKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "martingale" => Some(SuiteKind::Martingale),
            "vacuity" => Some(SuiteKind::Vacuity),
            "bounds" => Some(SuiteKind::Bounds),
            "mixture" => Some(SuiteKind::Mixture),
            _ => None,
        }
    }

    pub fn all() -> [SuiteKind; 4] {
        [
            SuiteKind::Martingale,
            SuiteKind::Vacuity,
            SuiteKind::Bounds,
            SuiteKind::Mixture,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            SuiteKind::Martingale => "martingale",
            SuiteKind::Vacuity => "vacuity",
            SuiteKind::Bounds => "bounds",
            SuiteKind::Mixture => "mixture",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub property: &'static str,
    pub pass: bool,
    pub cases: usize,
    pub detail: String,
    /// Serialized model and context for the first failing case.
    pub failing_case: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub seed: u64,
    pub count: usize,
    pub outcomes: Vec<PropertyOutcome>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "suite {} (seed {}, count {})\n",
            self.suite, self.seed, self.count
        );
        for o in &self.outcomes {
            let verdict = if o.pass { "pass" } else { "FAIL" };
            let _ = writeln!(
                out,
                "  [{verdict}] {} ({} {}{}{})",
                o.property,
                o.cases,
                if o.cases == 1 { "case" } else { "cases" },
                if o.detail.is_empty() { "" } else { "; " },
                o.detail
            );
            if let Some(case) = &o.failing_case {
                let _ = writeln!(out, "    failing case: {case}");
            }
        }
        out
    }
}

pub fn run_suite(kind: SuiteKind, seed: u64, count: usize) -> SuiteReport {
    let outcomes = match kind {
        SuiteKind::Martingale => martingale_suite(seed, count),
        SuiteKind::Vacuity => vacuity_suite(seed, count),
        SuiteKind::Bounds => bounds_suite(seed, count),
        SuiteKind::Mixture => mixture_suite(seed, count),
    };
    SuiteReport {
        suite: kind.name(),
        seed,
        count,
        outcomes,
    }
}

/// JSON form of a finite model, for failure dumps. Weights and any
/// conditional probabilities appear as exact rational strings.
pub fn finite_model_json(model: &FiniteModel) -> Json {
    let table = model.table();
    json!({
        "variables": table
            .variables()
            .iter()
            .map(|v| json!({ "name": v.name, "range": v.range }))
            .collect::<Vec<_>>(),
        "target": table.variables()[model.target()].name,
        "atoms": table
            .atoms()
            .iter()
            .map(|(a, w)| json!([a, format_rational(w)]))
            .collect::<Vec<_>>(),
        "experts": model
            .experts()
            .iter()
            .map(|e| {
                json!({
                    "observes": table.variables()[e.var()].name,
                    "comment": e.comment_map(),
                })
            })
            .collect::<Vec<_>>(),
    })
}

/// Random two-expert model over private variables `H1`, `H2` and target
/// `Y`: a sparse random weight on each cell of the joint grid.
pub fn random_finite_model(rng: &mut ChaCha8Rng, allow_comments: bool) -> FiniteModel {
    loop {
        let k1 = rng.random_range(2..=5usize);
        let k2 = rng.random_range(2..=5usize);
        let t = if rng.random_bool(0.25) { 3 } else { 2 };
        // Uniform weights produce tied forecasts, which stall refinement
        // and exercise multi-round convergence; generic weights almost
        // always reveal everything in one pass.
        let uniform = rng.random_bool(0.5);

        let mut atoms: Vec<(Vec<Value>, u64)> = Vec::new();
        for h1 in 0..k1 as Value {
            for h2 in 0..k2 as Value {
                for y in 0..t as Value {
                    if rng.random_bool(0.78) {
                        let w = if uniform { 1 } else { rng.random_range(1..=99u64) };
                        atoms.push((vec![h1, h2, y], w));
                    }
                }
            }
        }
        if atoms.len() < 2 {
            continue;
        }
        let total: u64 = atoms.iter().map(|(_, w)| w).sum();
        let atoms: Vec<(Vec<Value>, Rational)> = atoms
            .into_iter()
            .map(|(a, w)| (a, Rational::new(w.into(), total.into())))
            .collect();

        let vars = vec![
            Variable::new("H1", (0..k1 as Value).collect()),
            Variable::new("H2", (0..k2 as Value).collect()),
            Variable::new("Y", (0..t as Value).collect()),
        ];
        let table = OutcomeTable::new(vars, atoms).expect("generated table is valid");

        let mut comment_for = |k: usize| {
            (allow_comments && rng.random_bool(0.3)).then(|| {
                (0..k as Value)
                    .map(|h| (h, rng.random_range(0..=2)))
                    .collect()
            })
        };
        let e1 = comment_for(k1);
        let e2 = comment_for(k2);
        return FiniteModel::new(table, "Y", vec![("H1", e1), ("H2", e2)])
            .expect("generated model is valid");
    }
}

/// Model with the target independent of both private variables jointly:
/// a random joint weight on `(H1, H2)` times a random target marginal.
pub fn random_product_model(rng: &mut ChaCha8Rng) -> FiniteModel {
    let k1 = rng.random_range(2..=4usize);
    let k2 = rng.random_range(2..=4usize);
    let t = if rng.random_bool(0.3) { 3 } else { 2 };

    let joint: Vec<u64> = (0..k1 * k2).map(|_| rng.random_range(0..=9u64)).collect();
    let joint = if joint.iter().all(|&w| w == 0) {
        vec![1; k1 * k2]
    } else {
        joint
    };
    let marginal: Vec<u64> = (0..t).map(|_| rng.random_range(1..=9u64)).collect();
    let joint_total: u64 = joint.iter().sum();
    let marg_total: u64 = marginal.iter().sum();

    let mut atoms = Vec::new();
    for h1 in 0..k1 {
        for h2 in 0..k2 {
            for (y, &m) in marginal.iter().enumerate() {
                let w = joint[h1 * k2 + h2] * m;
                if w > 0 {
                    atoms.push((
                        vec![h1 as Value, h2 as Value, y as Value],
                        Rational::new(w.into(), (joint_total * marg_total).into()),
                    ));
                }
            }
        }
    }
    let vars = vec![
        Variable::new("H1", (0..k1 as Value).collect()),
        Variable::new("H2", (0..k2 as Value).collect()),
        Variable::new("Y", (0..t as Value).collect()),
    ];
    let table = OutcomeTable::new(vars, atoms).expect("product table is valid");
    FiniteModel::new(table, "Y", vec![("H1", None), ("H2", None)])
        .expect("product model is valid")
}

/// Weighted draw of one outcome from the model.
fn sample_realization(rng: &mut ChaCha8Rng, model: &FiniteModel) -> Vec<Value> {
    let atoms = model.table().atoms();
    let mut u = Rational::from_float(rng.random::<f64>()).expect("uniform draw is finite");
    for (assign, w) in atoms {
        if u < *w {
            return assign.clone();
        }
        u -= w;
    }
    atoms.last().expect("tables are nonempty").0.clone()
}

const MARTINGALE_DEPTH: usize = 6;

fn martingale_suite(seed: u64, count: usize) -> Vec<PropertyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schedule = Schedule::cyclic(2);

    let mut identity = PropertyOutcome {
        property: "announcements form an exact martingale at every reachable event",
        pass: true,
        cases: count,
        detail: format!("checked to depth {MARTINGALE_DEPTH}"),
        failing_case: None,
    };
    for i in 0..count {
        let model = random_finite_model(&mut rng, true);
        let ok = martingale_check_exact(&model, &schedule, MARTINGALE_DEPTH)
            .expect("generated models have valid schedules");
        if !ok && identity.pass {
            identity.pass = false;
            identity.failing_case = Some(format!(
                "case {i}: {}",
                finite_model_json(&model)
            ));
        }
    }

    // Negative control: a forecaster that shades one announcement must be
    // caught, otherwise the identity check is vacuous.
    let control_model = crate::finite::build_overlapping_bernoulli(1, 1, 1)
        .expect("control model is valid");
    let distort = |step: usize,
                   map: &std::collections::BTreeMap<Value, FiniteForecast>|
     -> std::collections::BTreeMap<Value, FiniteForecast> {
        let mut out = map.clone();
        if step == 0 {
            if let Some(f) = out.values_mut().next() {
                let mut probs: Vec<Rational> = f.probs().to_vec();
                probs[0] = &probs[0] * Rational::new(9.into(), 10.into());
                let rest: Rational = probs[1..].iter().sum();
                probs[1] = &probs[1] + (Rational::from_integer(1.into()) - &probs[0] - rest);
                *f = FiniteForecast(probs);
            }
        }
        out
    };
    let control_caught =
        !martingale_check_exact_with(&control_model, &schedule, 3, distort)
            .expect("control model has a valid schedule");
    let control = PropertyOutcome {
        property: "distorted announcements are rejected (negative control)",
        pass: control_caught,
        cases: 1,
        detail: String::new(),
        failing_case: (!control_caught)
            .then(|| "distorted bernoulli control passed the martingale check".to_string()),
    };

    vec![identity, control]
}

fn vacuity_suite(seed: u64, count: usize) -> Vec<PropertyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let constructed_count = (count / 10).max(2);

    // Comment-free models only: a comment can make a marginally
    // uninformative variable conditionally informative, in which case the
    // structural prediction no longer matches the observed limit.
    let mut agree = PropertyOutcome {
        property: "structural vacuity prediction matches every observed limit",
        pass: true,
        cases: count,
        detail: String::new(),
        failing_case: None,
    };
    let mut vacuous_seen = 0usize;
    for i in 0..count {
        let model = random_finite_model(&mut rng, false);
        let v = vacuity_criterion(&model).expect("generated models are valid");
        if v.predicted {
            vacuous_seen += 1;
        }
        if v.predicted != v.observed && agree.pass {
            agree.pass = false;
            agree.failing_case = Some(format!(
                "case {i}: predicted {} observed {}: {}",
                v.predicted,
                v.observed,
                finite_model_json(&model)
            ));
        }
    }
    agree.detail = format!("{vacuous_seen} predicted vacuous");

    let mut constructed = PropertyOutcome {
        property: "independent-target constructions are vacuous",
        pass: true,
        cases: constructed_count + 1,
        detail: "random product models plus the parity model".to_string(),
        failing_case: None,
    };
    let check_vacuous = |label: String, model: &FiniteModel, out: &mut PropertyOutcome| {
        let v = vacuity_criterion(model).expect("constructed models are valid");
        if !(v.predicted && v.observed) && out.pass {
            out.pass = false;
            out.failing_case = Some(format!(
                "{label}: predicted {} observed {}: {}",
                v.predicted,
                v.observed,
                finite_model_json(model)
            ));
        }
    };
    for i in 0..constructed_count {
        let model = random_product_model(&mut rng);
        check_vacuous(format!("product case {i}"), &model, &mut constructed);
    }
    check_vacuous(
        "parity".to_string(),
        &build_parity_model(),
        &mut constructed,
    );

    vec![agree, constructed]
}

fn bounds_suite(seed: u64, count: usize) -> Vec<PropertyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bound = PropertyOutcome {
        property: "markets converge within K1 + K2 rounds",
        pass: true,
        cases: count,
        detail: String::new(),
        failing_case: None,
    };
    let mut fixed_point = PropertyOutcome {
        property: "the limit event is a fixed point and carries the limit forecast",
        pass: true,
        cases: count,
        detail: String::new(),
        failing_case: None,
    };

    let mut max_rounds = 0usize;
    let mut max_bound = 0usize;
    for i in 0..count {
        let model = random_finite_model(&mut rng, true);
        let realization = sample_realization(&mut rng, &model);
        let trace = run_market(&model, &realization, &[0, 1])
            .expect("sampled realizations lie in the table");
        let k_bound = model.private_cardinality(0) + model.private_cardinality(1);
        max_rounds = max_rounds.max(trace.rounds_to_convergence);
        max_bound = max_bound.max(k_bound);

        if trace.rounds_to_convergence > k_bound && bound.pass {
            bound.pass = false;
            bound.failing_case = Some(format!(
                "case {i}: {} rounds exceeds bound {k_bound} at realization {:?}: {}",
                trace.rounds_to_convergence,
                realization,
                finite_model_json(&model)
            ));
        }

        let fixed = verify_fixed_point(&model, &trace.final_event)
            .expect("final events are valid")
            .into_iter()
            .all(|b| b);
        let limit_is_posterior = {
            use crate::finite::forecast_function;
            // At the fixed point the forecast function is constant, so
            // any expert's map must echo the limit forecast.
            forecast_function(&model, &trace.final_event, 0)
                .expect("final events are valid")
                .values()
                .all(|f| *f == trace.limit_forecast)
        };
        if !(fixed && limit_is_posterior) && fixed_point.pass {
            fixed_point.pass = false;
            fixed_point.failing_case = Some(format!(
                "case {i}: fixed point {fixed}, limit matches {limit_is_posterior}: {}",
                finite_model_json(&model)
            ));
        }
    }
    bound.detail = format!("max rounds used {max_rounds}, largest bound {max_bound}");

    vec![bound, fixed_point]
}

fn mixture_suite(seed: u64, count: usize) -> Vec<PropertyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| {
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    };
    let mus = [0.0, 0.5, -1.0, 2.0];

    let mut shape = PropertyOutcome {
        property: "product-statistic markets converge to the sign mixture in two rounds",
        pass: true,
        cases: count,
        detail: String::new(),
        failing_case: None,
    };
    let mut oracle = PropertyOutcome {
        property: "limit density matches the quadrature oracle",
        pass: true,
        cases: count,
        detail: "21 grid points within 1e-6".to_string(),
        failing_case: None,
    };
    let mut symmetry = PropertyOutcome {
        property: "sign independence and centered-prior symmetries hold",
        pass: true,
        cases: count,
        detail: String::new(),
        failing_case: None,
    };

    for i in 0..count {
        let mu = mus[i % mus.len()];
        let (mut x1, mut x2);
        loop {
            x1 = normal(&mut rng);
            x2 = normal(&mut rng);
            if x1.abs() > 1e-3 && (x1 * x2).abs() > 1e-3 {
                break;
            }
        }
        let label = |extra: &str| format!("case {i}: x1 {x1}, x2 {x2}, mu {mu}{extra}");

        let trace = match run_ts_market(x1, x2, mu) {
            Ok(t) => t,
            Err(e) => {
                if shape.pass {
                    shape.pass = false;
                    shape.failing_case = Some(label(&format!(" -> error {e}")));
                }
                continue;
            }
        };
        let swapped = run_ts_market_ordered(x1, x2, mu, true)
            .expect("nondegenerate inputs run in either order");
        let good_shape = trace.rounds == 2
            && trace.classification == Classification::Limited
            && trace.limit.components().len() == 2
            && swapped.limit == trace.limit;
        if !good_shape && shape.pass {
            shape.pass = false;
            shape.failing_case = Some(label(&format!(
                " -> rounds {}, classification {}",
                trace.rounds, trace.classification
            )));
        }

        // Generative oracle: theta prior times the likelihood of |x2|
        // given |x1|, integrated numerically.
        let (a, b) = (x1.abs(), x2.abs());
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        let dens = move |theta: f64| {
            phi(theta - mu) * (phi(b - theta * a) + phi(b + theta * a))
        };
        let z = integrate(dens, mu - 20.0 - b, mu + 20.0 + b, 1e-12);
        let (limit_mean, limit_var) = trace.limit.mean_variance();
        let spread = limit_var.sqrt().max(1.0);
        let mut worst = 0.0f64;
        for g in 0..21 {
            let theta = limit_mean + spread * (f64::from(g) - 10.0) * 0.5;
            worst = worst.max((trace.limit.pdf(theta) - dens(theta) / z).abs());
        }
        if worst > 1e-6 && oracle.pass {
            oracle.pass = false;
            oracle.failing_case = Some(label(&format!(" -> worst density gap {worst}")));
        }

        let m1 = (x1 * x2).abs();
        let m2 = x1.abs();
        let sign_ok = verify_sign_independence(m1, m2, mu)
            .expect("m2 is positive for nondegenerate draws");
        let centered_ok = if mu == 0.0 {
            sign_weights(m1, m2, 0.0).expect("m2 positive") == (0.5, 0.5)
        } else {
            true
        };
        if !(sign_ok && centered_ok) && symmetry.pass {
            symmetry.pass = false;
            symmetry.failing_case = Some(label(&format!(
                " -> sign independence {sign_ok}, centered weights {centered_ok}"
            )));
        }
    }

    vec![shape, oracle, symmetry]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_and_render_deterministically() {
        for kind in SuiteKind::all() {
            let a = run_suite(kind, 7, 25);
            assert!(a.pass(), "suite {} failed:\n{}", kind.name(), a.render());
            let b = run_suite(kind, 7, 25);
            assert_eq!(a.render(), b.render());
        }
    }

    #[test]
    fn different_seeds_give_different_models() {
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let m1 = random_finite_model(&mut r1, true);
        let m2 = random_finite_model(&mut r2, true);
        assert_ne!(finite_model_json(&m1), finite_model_json(&m2));
    }

    #[test]
    fn product_models_have_independent_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let m = random_product_model(&mut rng);
            let v = vacuity_criterion(&m).unwrap();
            assert!(v.predicted && v.observed);
        }
    }

    #[test]
    fn suite_names_round_trip() {
        for kind in SuiteKind::all() {
            assert_eq!(SuiteKind::parse(kind.name()), Some(kind));
        }
        assert_eq!(SuiteKind::parse("nope"), None);
    }
}
