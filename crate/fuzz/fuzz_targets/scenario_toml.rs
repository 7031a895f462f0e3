//! Fuzzes the scenario TOML front end: parsing, validation, and, for
//! configurations that are cheap and self-contained, a full market run.

#![no_main]

use libfuzzer_sys::fuzz_target;
use market_core::scenario::{run_scenario, EngineKind, ScenarioConfig};

/// Keep end-to-end runs bounded: no file access, small tables, few
/// rounds. Everything else still goes through parse + validate.
fn cheap_to_run(config: &ScenarioConfig) -> bool {
    match config.engine {
        EngineKind::Finite => {
            let Some(finite) = &config.finite else {
                return false;
            };
            finite.builder.is_none()
                && finite.atoms.len() <= 64
                && finite.experts.len() <= 4
                && finite.variables.len() <= 8
                && finite.variables.iter().all(|v| {
                    matches!(v.range.as_slice(), [lo, hi] if hi.saturating_sub(*lo) <= 16)
                })
        }
        EngineKind::Gaussian => {
            let Some(gaussian) = &config.gaussian else {
                return false;
            };
            let small = gaussian
                .inline
                .as_ref()
                .is_some_and(|m| m.x_names.len() + m.z_names.len() <= 12);
            gaussian.csv.is_none() && small && gaussian.max_rounds <= 64
        }
        EngineKind::Mixture => true,
    }
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = ScenarioConfig::from_toml_str(text) else {
        return;
    };
    if cheap_to_run(&config) {
        if let Ok(outcome) = run_scenario(&config) {
            let _ = outcome.report.to_json();
            let _ = outcome.trace.render();
        }
    }
});
