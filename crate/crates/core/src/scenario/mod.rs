//! Everything a run needs: network case, plant and grid-operator settings,
//! exogenous traces and the seed.

mod case;
mod config;
mod trace;

pub use case::{load_network_case, Generator, Line, NetworkCase};
pub use config::{
    AidcConfig, BessSpec, ClusterId, ClusterSpec, FeatureScales, HeuristicConfig,
    ParticipationRule, Penalties, PolicyConfig, Role, TsoConfig,
};
pub use trace::{
    load_traces, read_traces, synth_traces, DemandSpike, Diurnal, ExogenousTrace,
    SyntheticProfile, TraceError, TRACE_COLUMNS,
};

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("{path}: {source}")]
    Trace { path: String, source: TraceError },
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
}

impl ScenarioError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(origin: &str, e: &serde_json::Error) -> Self {
        Self::Parse {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// A complete, validated simulation setup.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// Nominal ratings; see [`Scenario::grid`].
    pub network: NetworkCase,
    pub aidc: AidcConfig,
    pub tso: TsoConfig,
    pub trace: ExogenousTrace,
    pub seed: u64,
    pub line_rating_scale: f64,
    pub policy: PolicyConfig,
}

impl Scenario {
    /// The network with ratings scaled by `line_rating_scale`.
    pub fn grid(&self) -> NetworkCase {
        self.network.with_rating_scale(self.line_rating_scale)
    }

    pub fn horizon(&self) -> usize {
        self.trace.horizon()
    }

    pub fn dt_h(&self) -> f64 {
        self.trace.dt_h
    }

    pub fn with_trace(&self, trace: ExogenousTrace) -> Self {
        Self {
            trace,
            ..self.clone()
        }
    }

    /// Loads one of the scenarios shipped with the crate.
    pub fn builtin(name: &str) -> Result<Self, ScenarioError> {
        Self::builtin_file(name)?.resolve(Path::new("."))
    }

    fn builtin_file(name: &str) -> Result<ScenarioFile, ScenarioError> {
        let text = match name {
            "default" => include_str!("../../data/scenarios/default.json"),
            "stress" => include_str!("../../data/scenarios/stress.json"),
            "generous" => include_str!("../../data/scenarios/generous.json"),
            "spike" => include_str!("../../data/scenarios/spike.json"),
            "infeasible" => include_str!("../../data/scenarios/infeasible.json"),
            other => return Err(ScenarioError::UnknownBuiltin(other.to_string())),
        };
        ScenarioFile::from_json(text, &format!("builtin:{name}"))
    }

    pub const BUILTINS: [&'static str; 5] = ["default", "stress", "generous", "spike", "infeasible"];

    /// Loads a scenario file, or a builtin when `spec` has the form `builtin:NAME`.
    pub fn load(spec: &str) -> Result<Self, ScenarioError> {
        Self::load_seeded(spec, None)
    }

    /// As [`Scenario::load`], with `seed` replacing the file's seed before
    /// synthetic traces are generated.
    pub fn load_seeded(spec: &str, seed: Option<u64>) -> Result<Self, ScenarioError> {
        let (mut file, base) = match spec.strip_prefix("builtin:") {
            Some(name) => (Self::builtin_file(name)?, PathBuf::from(".")),
            None => {
                let path = Path::new(spec);
                let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
                let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
                (ScenarioFile::from_json(&text, spec)?, base)
            }
        };
        if let Some(seed) = seed {
            file.seed = seed;
        }
        file.resolve(&base)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSource {
    /// `builtin:ieee39` or a path relative to the scenario file.
    Path(String),
    Inline(Box<NetworkCase>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    Csv {
        path: PathBuf,
        dt_h: f64,
        horizon: usize,
        /// Rows to skip before the window starts.
        #[serde(default)]
        offset: usize,
    },
    Synthetic(SyntheticProfile),
}

/// On-disk scenario layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub network: NetworkSource,
    #[serde(default)]
    pub aidc: AidcConfig,
    #[serde(default)]
    pub tso: TsoConfig,
    pub trace: TraceSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "unit_scale")]
    pub line_rating_scale: f64,
    #[serde(default)]
    pub policy: PolicyConfig,
}

fn unit_scale() -> f64 {
    1.0
}

impl ScenarioFile {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::parse(origin, &e))
    }

    /// Loads referenced files, builds the trace and validates the result.
    pub fn resolve(&self, base: &Path) -> Result<Scenario, ScenarioError> {
        let network = match &self.network {
            NetworkSource::Path(p) if p == "builtin:ieee39" => NetworkCase::ieee39(),
            NetworkSource::Path(p) => load_network_case(base.join(p))?,
            NetworkSource::Inline(c) => {
                let issues = c.check();
                if !issues.is_empty() {
                    return Err(ScenarioError::Invalid(issues));
                }
                (**c).clone()
            }
        };
        let shares = network.share_vector();
        let trace = match &self.trace {
            TraceSource::Csv {
                path,
                dt_h,
                horizon,
                offset,
            } => {
                let full = load_traces(base.join(path), *dt_h, offset + horizon, &shares)?;
                full.window(*offset, *horizon)
            }
            TraceSource::Synthetic(p) => {
                synth_traces(p, self.seed, &shares).map_err(|source| ScenarioError::Trace {
                    path: self.name.clone(),
                    source,
                })?
            }
        };
        let scenario = Scenario {
            name: self.name.clone(),
            network,
            aidc: self.aidc.clone(),
            tso: self.tso.clone(),
            trace,
            seed: self.seed,
            line_rating_scale: self.line_rating_scale,
            policy: self.policy.clone(),
        };
        let report = validate_scenario(&scenario);
        if report.is_ok() {
            Ok(scenario)
        } else {
            Err(ScenarioError::Invalid(report.issues))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut issues = s.network.check();
    issues.extend(s.aidc.check());
    if !s.network.generators.is_empty() {
        issues.extend(s.tso.check(s.network.max_cost(), s.network.n_buses()));
    }
    issues.extend(s.trace.check(s.network.n_buses()));
    if !(s.line_rating_scale > 0.0) {
        issues.push(format!(
            "line rating scale must be positive, got {}",
            s.line_rating_scale
        ));
    }
    ValidationReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in Scenario::BUILTINS {
            let s = Scenario::builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(validate_scenario(&s).is_ok());
        }
    }

    #[test]
    fn default_scenario_matches_table_values() {
        let s = Scenario::builtin("default").unwrap();
        assert_eq!(s.aidc, AidcConfig::default());
        assert_eq!(s.tso, TsoConfig::default());
        assert_eq!(s.line_rating_scale, 0.78);
        assert_eq!(s.horizon(), 672);
        assert!(validate_scenario(&s).issues.is_empty());
    }

    #[test]
    fn report_lists_each_violation() {
        let mut s = Scenario::builtin("generous").unwrap();
        s.tso.gamma_kappa = 50.0;
        s.tso.gamma_u = 45.0;
        let r = validate_scenario(&s);
        assert_eq!(r.issues.len(), 2, "{:?}", r.issues);
    }

    #[test]
    fn bus_forecasts_sum_to_system_demand() {
        let s = Scenario::builtin("default").unwrap();
        for (d, row) in s.trace.demand.iter().zip(&s.trace.bus_demand) {
            assert!((row.iter().sum::<f64>() - d).abs() <= 1e-6);
        }
    }
}
