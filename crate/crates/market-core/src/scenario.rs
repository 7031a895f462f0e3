//! Declarative market scenarios. One TOML document names an engine,
//! describes its model, fixes a realization, and says where outputs go;
//! running it yields a consensus report plus a trace. Scenarios double as
//! regression fixtures, so finite probabilities are written as exact
//! `"num/den"` strings.
//!
//! A minimal finite scenario:
//!
//! ```toml
//! engine = "finite"
//!
//! [finite.builder]
//! name = "parity"
//!
//! [realization.assign]
//! X1 = 0
//! X2 = 1
//! A = 0
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::finite::{
    build_overlapping_bernoulli, build_parity_model, run_market, FiniteError, FiniteModel,
    FiniteTrace,
};
use crate::gaussian::{
    default_dataset_path, load_dispersion, report_from_linear, run_linear_market, trace_csv,
    CsvOptions, GaussianError, GaussianModel, DATA_DIR_ENV,
};
use crate::mixture::{report_from_ts, run_ts_market, MixtureError};
use crate::prob::{format_rational, parse_rational, OutcomeTable, Value, Variable};
use crate::protocol::{report_from_finite, ConsensusReport, ProtocolError, Schedule};

/// Configuration problems ([`ScenarioError::is_config`]) are kept apart
/// from engine failures so the command line can exit differently for
/// each.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("dataset unavailable: {0}")]
    DatasetUnavailable(String),
    #[error(transparent)]
    Finite(#[from] FiniteError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl ScenarioError {
    /// True for problems in the scenario text itself, as opposed to
    /// failures while loading data or running the market.
    pub fn is_config(&self) -> bool {
        matches!(self, ScenarioError::Parse(_) | ScenarioError::Invalid(_))
    }
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Finite,
    Gaussian,
    Mixture,
}

impl EngineKind {
    fn name(self) -> &'static str {
        match self {
            EngineKind::Finite => "finite",
            EngineKind::Gaussian => "gaussian",
            EngineKind::Mixture => "mixture",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub engine: EngineKind,
    pub finite: Option<FiniteSection>,
    pub gaussian: Option<GaussianSection>,
    pub mixture: Option<MixtureSection>,
    #[serde(default)]
    pub realization: RealizationSection,
    pub schedule: Option<ScheduleSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Finite model: either a named builder or an inline table, not both.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSection {
    pub builder: Option<BuilderSection>,
    pub target: Option<String>,
    #[serde(default)]
    pub variables: Vec<VariableDecl>,
    #[serde(default)]
    pub atoms: Vec<AtomDecl>,
    #[serde(default)]
    pub experts: Vec<ExpertDecl>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderSection {
    /// `"parity"` or `"overlapping-bernoulli"`.
    pub name: String,
    /// Block sizes for the overlapping-Bernoulli builder.
    pub counts: Option<[u64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDecl {
    pub name: String,
    pub range: Vec<Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDecl {
    pub assign: BTreeMap<String, Value>,
    /// Exact weight, e.g. `"1/4"`.
    pub weight: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertDecl {
    pub observes: String,
    /// Optional comment function, keyed by the observed value.
    pub comment: Option<BTreeMap<String, Value>>,
}

/// Gaussian model: a CSV dispersion source or an inline matrix, not both.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSection {
    pub csv: Option<CsvSection>,
    pub inline: Option<InlineGaussian>,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
}

fn default_max_rounds() -> usize {
    64
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSection {
    /// Defaults to `$PREDMARKET_DATA_DIR/93cars.csv`, then
    /// `data/93cars.csv`.
    pub path: Option<PathBuf>,
    /// 1-based column indices.
    pub x_cols: Vec<usize>,
    pub z_cols: Vec<usize>,
    pub y_col: usize,
    #[serde(default)]
    pub has_header: bool,
    /// Missing-value sentinel; empty string disables it.
    #[serde(default = "default_missing")]
    pub missing: String,
    pub expected_rows: Option<usize>,
}

fn default_missing() -> String {
    "*".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineGaussian {
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    pub y_name: String,
    pub mean: Vec<f64>,
    pub dispersion: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    /// Prior mean of the latent coefficient.
    pub mu: f64,
}

/// Realized data, engine-specific: `assign` for finite models, `x`/`z`
/// block vectors for Gaussian models, `x1`/`x2` for the mixture model.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationSection {
    pub assign: Option<BTreeMap<String, Value>>,
    pub x: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    pub x1: Option<f64>,
    pub x2: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// Expert turns within one round, 1-based. Finite engine only; the
    /// other engines always alternate expert one, expert two.
    pub block: Vec<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub report: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Structural checks that need no external data: the right sections
    /// and realization fields for the declared engine, and nothing else.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let sections = [
            (EngineKind::Finite, self.finite.is_some()),
            (EngineKind::Gaussian, self.gaussian.is_some()),
            (EngineKind::Mixture, self.mixture.is_some()),
        ];
        for (kind, present) in sections {
            if (kind == self.engine) != present {
                return Err(invalid(format!(
                    "engine is {} but the [{}] section is {}",
                    self.engine.name(),
                    kind.name(),
                    if present { "present" } else { "missing" },
                )));
            }
        }
        if self.schedule.is_some() && self.engine != EngineKind::Finite {
            return Err(invalid(
                "[schedule] applies only to the finite engine; the others \
                 alternate expert one and expert two",
            ));
        }

        let r = &self.realization;
        let fields = [
            ("assign", r.assign.is_some()),
            ("x", r.x.is_some()),
            ("z", r.z.is_some()),
            ("x1", r.x1.is_some()),
            ("x2", r.x2.is_some()),
        ];
        let wanted: &[&str] = match self.engine {
            EngineKind::Finite => &["assign"],
            EngineKind::Gaussian => &["x", "z"],
            EngineKind::Mixture => &["x1", "x2"],
        };
        for (field, present) in fields {
            if present != wanted.contains(&field) {
                return Err(invalid(format!(
                    "the {} engine takes exactly the realization fields {wanted:?}; \
                     check `{field}`",
                    self.engine.name(),
                )));
            }
        }
        let mut continuous = r.x.iter().chain(&r.z).flatten().chain(&r.x1).chain(&r.x2);
        if continuous.any(|v| !v.is_finite()) {
            return Err(invalid("realization values must be finite"));
        }

        match self.engine {
            EngineKind::Finite => validate_finite(self.finite.as_ref().expect("checked")),
            EngineKind::Gaussian => validate_gaussian(self.gaussian.as_ref().expect("checked")),
            EngineKind::Mixture => {
                let mu = self.mixture.as_ref().expect("checked").mu;
                if !mu.is_finite() {
                    return Err(invalid("mixture.mu must be finite"));
                }
                Ok(())
            }
        }
    }
}

fn validate_finite(section: &FiniteSection) -> Result<(), ScenarioError> {
    let inline_parts = section.target.is_some()
        || !section.variables.is_empty()
        || !section.atoms.is_empty()
        || !section.experts.is_empty();
    match &section.builder {
        Some(builder) => {
            if inline_parts {
                return Err(invalid(
                    "give either [finite.builder] or an inline model, not both",
                ));
            }
            match builder.name.as_str() {
                "parity" => {
                    if builder.counts.is_some() {
                        return Err(invalid("the parity builder takes no counts"));
                    }
                }
                "overlapping-bernoulli" => {
                    if builder.counts.is_none() {
                        return Err(invalid(
                            "the overlapping-bernoulli builder needs counts = [n0, n1, n2]",
                        ));
                    }
                }
                other => {
                    return Err(invalid(format!(
                        "unknown builder {other:?}; expected \"parity\" or \
                         \"overlapping-bernoulli\"",
                    )));
                }
            }
        }
        None => {
            if section.target.is_none()
                || section.variables.is_empty()
                || section.atoms.is_empty()
                || section.experts.is_empty()
            {
                return Err(invalid(
                    "an inline finite model needs target, variables, atoms and experts",
                ));
            }
        }
    }
    Ok(())
}

fn validate_gaussian(section: &GaussianSection) -> Result<(), ScenarioError> {
    if section.csv.is_some() == section.inline.is_some() {
        return Err(invalid(
            "give either gaussian.csv or gaussian.inline, not both",
        ));
    }
    if section.max_rounds == 0 {
        return Err(invalid("gaussian.max_rounds must be at least 1"));
    }
    if let Some(inline) = &section.inline {
        let p = inline.x_names.len() + inline.z_names.len() + 1;
        if inline.mean.len() != p
            || inline.dispersion.len() != p
            || inline.dispersion.iter().any(|row| row.len() != p)
        {
            return Err(invalid(format!(
                "inline Gaussian model needs a mean of length {p} and a {p}x{p} dispersion",
            )));
        }
        let mut entries = inline.mean.iter().chain(inline.dispersion.iter().flatten());
        if entries.any(|v| !v.is_finite()) {
            return Err(invalid("inline Gaussian entries must be finite"));
        }
    }
    if let Some(csv) = &section.csv {
        if csv.x_cols.is_empty() || csv.z_cols.is_empty() {
            return Err(invalid("csv.x_cols and csv.z_cols must be nonempty"));
        }
        if csv.x_cols.iter().chain(&csv.z_cols).chain([&csv.y_col]).any(|&c| c == 0) {
            return Err(invalid("csv column indices are 1-based"));
        }
    }
    Ok(())
}

/// The trace half of a scenario's output: CSV for the Gaussian engine,
/// JSON for the others.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceBody {
    Json(Json),
    Csv(String),
}

impl TraceBody {
    pub fn render(&self) -> String {
        match self {
            TraceBody::Json(v) => {
                let mut s = serde_json::to_string_pretty(v).expect("traces serialize");
                s.push('\n');
                s
            }
            TraceBody::Csv(s) => s.clone(),
        }
    }
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub report: ConsensusReport,
    pub trace: TraceBody,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome, ScenarioError> {
    config.validate()?;
    match config.engine {
        EngineKind::Finite => run_finite(config),
        EngineKind::Gaussian => run_gaussian(config),
        EngineKind::Mixture => run_mixture(config),
    }
}

fn compile_finite(section: &FiniteSection) -> Result<FiniteModel, ScenarioError> {
    if let Some(builder) = &section.builder {
        return match builder.name.as_str() {
            "parity" => Ok(build_parity_model()),
            "overlapping-bernoulli" => {
                let [n0, n1, n2] = builder.counts.expect("validated");
                build_overlapping_bernoulli(n0, n1, n2)
                    .map_err(|e| invalid(format!("overlapping-bernoulli builder: {e}")))
            }
            _ => unreachable!("validated"),
        };
    }

    let variables: Vec<Variable> = section
        .variables
        .iter()
        .map(|v| Variable::new(&v.name, v.range.clone()))
        .collect();
    let names: Vec<&str> = section.variables.iter().map(|v| v.name.as_str()).collect();
    let mut atoms = Vec::with_capacity(section.atoms.len());
    for (i, atom) in section.atoms.iter().enumerate() {
        let mut assignment = Vec::with_capacity(names.len());
        for name in &names {
            match atom.assign.get(*name) {
                Some(&v) => assignment.push(v),
                None => {
                    return Err(invalid(format!(
                        "atom {i} does not assign variable {name:?}",
                    )))
                }
            }
        }
        if atom.assign.len() != names.len() {
            let extra = atom
                .assign
                .keys()
                .find(|k| !names.contains(&k.as_str()))
                .expect("some key is unknown");
            return Err(invalid(format!(
                "atom {i} assigns unknown variable {extra:?}",
            )));
        }
        let weight = parse_rational(&atom.weight)
            .map_err(|e| invalid(format!("atom {i} weight {:?}: {e}", atom.weight)))?;
        atoms.push((assignment, weight));
    }
    let table = OutcomeTable::new(variables, atoms)
        .map_err(|e| invalid(format!("finite model table: {e}")))?;

    let mut experts = Vec::with_capacity(section.experts.len());
    for (i, decl) in section.experts.iter().enumerate() {
        let comment = match &decl.comment {
            None => None,
            Some(map) => {
                let mut parsed = BTreeMap::new();
                for (key, &out) in map {
                    let value: Value = key.parse().map_err(|_| {
                        invalid(format!(
                            "expert {} comment key {key:?} is not an integer",
                            i + 1
                        ))
                    })?;
                    parsed.insert(value, out);
                }
                Some(parsed)
            }
        };
        experts.push((decl.observes.as_str(), comment));
    }
    FiniteModel::new(table, section.target.as_deref().expect("validated"), experts)
        .map_err(|e| invalid(format!("finite model: {e}")))
}

fn finite_schedule(
    config: &ScenarioConfig,
    n_experts: usize,
) -> Result<Schedule, ScenarioError> {
    let block_1based = match &config.schedule {
        Some(s) => s.block.clone(),
        None => (1..=n_experts).collect(),
    };
    if block_1based.contains(&0) {
        return Err(invalid("schedule.block entries are 1-based"));
    }
    let block: Vec<usize> = block_1based.iter().map(|&e| e - 1).collect();
    Schedule::new(block, n_experts).map_err(|e| invalid(e.to_string()))
}

fn run_finite(config: &ScenarioConfig) -> Result<ScenarioOutcome, ScenarioError> {
    let model = compile_finite(config.finite.as_ref().expect("validated"))?;
    let assign = config.realization.assign.as_ref().expect("validated");

    let variables = model.table().variables();
    let mut realization = Vec::with_capacity(variables.len());
    for v in variables {
        match assign.get(&v.name) {
            Some(&value) => realization.push(value),
            None => {
                return Err(invalid(format!(
                    "realization does not assign variable {:?}",
                    v.name
                )))
            }
        }
    }
    if assign.len() != variables.len() {
        let extra = assign
            .keys()
            .find(|k| variables.iter().all(|v| &v.name != *k))
            .expect("some key is unknown");
        return Err(invalid(format!(
            "realization assigns unknown variable {extra:?}",
        )));
    }

    let schedule = finite_schedule(config, model.n_experts())?;
    let trace = run_market(&model, &realization, schedule.block())?;
    let report = report_from_finite(&model, &trace)?;
    let trace = TraceBody::Json(finite_trace_json(&model, &trace));
    Ok(ScenarioOutcome { report, trace })
}

fn finite_trace_json(model: &FiniteModel, trace: &FiniteTrace) -> Json {
    let forecast_json = |f: &crate::finite::FiniteForecast| -> Json {
        let map: BTreeMap<String, String> = model
            .target_range()
            .iter()
            .zip(f.probs())
            .map(|(v, p)| (v.to_string(), format_rational(p)))
            .collect();
        json!(map)
    };
    json!({
        "steps": trace
            .steps
            .iter()
            .map(|s| {
                json!({
                    "round": s.round,
                    "expert": s.expert + 1,
                    "comment": s.comment,
                    "forecast": forecast_json(&s.forecast),
                    "event_size_before": s.event_size_before,
                    "event_size_after": s.event_size_after,
                })
            })
            .collect::<Vec<_>>(),
        "rounds_to_convergence": trace.rounds_to_convergence,
        "final_event_size": trace.final_event.size(),
    })
}

fn run_gaussian(config: &ScenarioConfig) -> Result<ScenarioOutcome, ScenarioError> {
    let section = config.gaussian.as_ref().expect("validated");
    let model = if let Some(inline) = &section.inline {
        let p = inline.mean.len();
        let mut dispersion = DMatrix::zeros(p, p);
        for (i, row) in inline.dispersion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                dispersion[(i, j)] = v;
            }
        }
        GaussianModel::new(
            inline.x_names.clone(),
            inline.z_names.clone(),
            inline.y_name.clone(),
            DVector::from_vec(inline.mean.clone()),
            dispersion,
        )
        .map_err(|e| invalid(format!("inline Gaussian model: {e}")))?
    } else {
        let csv = section.csv.as_ref().expect("validated");
        let path = match &csv.path {
            Some(p) => p.clone(),
            None => default_dataset_path().ok_or_else(|| {
                ScenarioError::DatasetUnavailable(format!(
                    "no csv.path given and no default dataset found; set \
                     {DATA_DIR_ENV} to the directory holding 93cars.csv or \
                     place it at data/93cars.csv",
                ))
            })?,
        };
        let opts = CsvOptions {
            has_header: csv.has_header,
            missing_sentinel: (!csv.missing.is_empty()).then(|| csv.missing.clone()),
            expected_rows: csv.expected_rows,
        };
        load_dispersion(&path, &csv.x_cols, &csv.z_cols, csv.y_col, &opts)?.0
    };

    let x = config.realization.x.as_ref().expect("validated");
    let z = config.realization.z.as_ref().expect("validated");
    let trace = run_linear_market(&model, x, z, section.max_rounds)?;
    let report = report_from_linear(&trace)?;
    Ok(ScenarioOutcome {
        report,
        trace: TraceBody::Csv(trace_csv(&trace)),
    })
}

fn run_mixture(config: &ScenarioConfig) -> Result<ScenarioOutcome, ScenarioError> {
    let mu = config.mixture.as_ref().expect("validated").mu;
    let x1 = config.realization.x1.expect("validated");
    let x2 = config.realization.x2.expect("validated");
    let trace = run_ts_market(x1, x2, mu)?;
    let report = report_from_ts(&trace);
    Ok(ScenarioOutcome {
        report,
        trace: TraceBody::Json(trace.to_json()),
    })
}
