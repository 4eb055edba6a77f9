//! Experiment runner: configuration, scenario reports and output files.

pub mod battery;
mod scenarios;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohomlab::{self, CohomError, GramReport, LejmiReport};
use crate::hermitian::{HermitianError, SUP_NORM_MARGIN};
use crate::torusfield::{BumpParams, FieldError, GridSpec};

pub use battery::CheckSummary;
pub use scenarios::*;

#[derive(Debug, Error)]
pub enum LabError {
  #[error("invalid configuration: {0}")]
  Config(String),
  #[error(transparent)]
  Hermitian(#[from] HermitianError),
  #[error(transparent)]
  Cohomology(#[from] CohomError),
  #[error(transparent)]
  Field(#[from] FieldError),
  #[error(transparent)]
  Io(#[from] std::io::Error),
  #[error(transparent)]
  Json(#[from] serde_json::Error),
  #[error(transparent)]
  Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

/// All experiment parameters. Missing keys in a config file take the
/// defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
  pub grid_n:      usize,
  pub oracle_n:    usize,
  pub tol_null:    f64,
  pub eps_nodal:   f64,
  pub bump1:       BumpParams,
  pub bump2:       BumpParams,
  pub seed:        u64,
  pub amplitude:   f64,
  pub bandlimit:   usize,
  pub sweep_count: usize,
  pub path_steps:  usize,
  pub output_dir:  PathBuf,
}

impl Default for LabConfig {
  fn default() -> Self {
    Self {
      grid_n:      16,
      oracle_n:    6,
      tol_null:    cohomlab::DEFAULT_TOL_NULL,
      eps_nodal:   cohomlab::DEFAULT_EPS_NODAL,
      bump1:       BumpParams::new([0.5; 4], 0.15, 0.5),
      bump2:       BumpParams::new([0.0; 4], 0.1, 0.5),
      seed:        1,
      amplitude:   0.3,
      bandlimit:   2,
      sweep_count: 50,
      path_steps:  20,
      output_dir:  PathBuf::from("lab-output"),
    }
  }
}

impl LabConfig {
  pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
  }

  pub fn grid(&self) -> Result<GridSpec> { Ok(GridSpec::new(self.grid_n)?) }

  pub fn oracle_grid(&self) -> Result<GridSpec> { Ok(GridSpec::new(self.oracle_n)?) }

  pub fn validate(&self) -> Result<()> {
    let bad = |msg: String| Err(LabError::Config(msg));
    self.grid()?;
    self.oracle_grid()?;
    if 2 * self.oracle_n.pow(4) > cohomlab::MAX_LEJMI_UNKNOWNS {
      return bad(format!(
        "oracle_n = {} needs {} unknowns, above {}",
        self.oracle_n,
        2 * self.oracle_n.pow(4),
        cohomlab::MAX_LEJMI_UNKNOWNS
      ));
    }
    if !(self.tol_null > 0.0 && self.tol_null < 1.0) {
      return bad(format!("tol_null must lie in (0, 1), got {}", self.tol_null));
    }
    if !(self.eps_nodal > 0.0 && self.eps_nodal < 1.0) {
      return bad(format!("eps_nodal must lie in (0, 1), got {}", self.eps_nodal));
    }
    self.bump1.validate()?;
    self.bump2.validate()?;
    if !(self.amplitude > 0.0 && self.amplitude * self.amplitude <= SUP_NORM_MARGIN) {
      return bad(format!("amplitude^2 must lie in (0, {SUP_NORM_MARGIN}], got amplitude {}", self.amplitude));
    }
    if self.bandlimit == 0 || 2 * self.bandlimit >= self.grid_n || 2 * self.bandlimit >= self.oracle_n {
      return bad(format!("bandlimit {} must be >= 1 and below both Nyquist limits", self.bandlimit));
    }
    if self.sweep_count == 0 {
      return bad("sweep_count must be >= 1".into());
    }
    if self.path_steps < 2 {
      return bad(format!("path_steps must be >= 2, got {}", self.path_steps));
    }
    Ok(())
  }
}

/// One checked statement of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
  pub name:      String,
  pub measured:  f64,
  /// `<=`, `<`, `>`, `==`
  pub relation:  String,
  pub tolerance: f64,
  pub passed:    bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
  pub stage: String,
  pub ms:    f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
  pub scenario:   String,
  pub config:     LabConfig,
  pub h_values:   BTreeMap<String, usize>,
  pub gram:       BTreeMap<String, GramReport>,
  pub lejmi:      BTreeMap<String, LejmiReport>,
  pub checks:     Vec<CheckSummary>,
  pub details:    serde_json::Value,
  pub assertions: Vec<Assertion>,
  pub errors:     Vec<String>,
  pub timings:    Vec<Timing>,
  pub files:      Vec<String>,
  pub passed:     bool,
}

impl ScenarioReport {
  pub fn new(scenario: &str, config: &LabConfig) -> Self {
    Self {
      scenario:   scenario.into(),
      config:     config.clone(),
      h_values:   BTreeMap::new(),
      gram:       BTreeMap::new(),
      lejmi:      BTreeMap::new(),
      checks:     Vec::new(),
      details:    serde_json::Value::Object(Default::default()),
      assertions: Vec::new(),
      errors:     Vec::new(),
      timings:    Vec::new(),
      files:      Vec::new(),
      passed:     true,
    }
  }

  fn check(&mut self, name: &str, measured: f64, relation: &str, tolerance: f64) -> bool {
    let passed = match relation {
      "<=" => measured <= tolerance,
      "<" => measured < tolerance,
      ">" => measured > tolerance,
      "==" => measured == tolerance,
      _ => unreachable!("unknown relation {relation}"),
    };
    self.assertions.push(Assertion { name: name.into(), measured, relation: relation.into(), tolerance, passed });
    self.passed &= passed;
    passed
  }

  pub fn assert_le(&mut self, name: &str, measured: f64, bound: f64) -> bool { self.check(name, measured, "<=", bound) }

  pub fn assert_lt(&mut self, name: &str, measured: f64, bound: f64) -> bool { self.check(name, measured, "<", bound) }

  pub fn assert_gt(&mut self, name: &str, measured: f64, bound: f64) -> bool { self.check(name, measured, ">", bound) }

  pub fn assert_eq(&mut self, name: &str, measured: usize, expected: usize) -> bool {
    self.check(name, measured as f64, "==", expected as f64)
  }

  pub fn assert_true(&mut self, name: &str, value: bool) -> bool { self.check(name, value as u8 as f64, "==", 1.0) }

  /// Records a failed stage; the scenario fails but keeps going where it can.
  pub fn fail(&mut self, stage: &str, err: impl fmt::Display) {
    self.errors.push(format!("{stage}: {err}"));
    self.passed = false;
  }

  pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    self.timings.push(Timing { stage: stage.into(), ms: start.elapsed().as_secs_f64() * 1e3 });
    out
  }

  pub fn total_ms(&self) -> f64 { self.timings.iter().map(|t| t.ms).sum() }

  pub fn detail(&mut self, key: &str, value: impl Serialize) {
    let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
    if let serde_json::Value::Object(map) = &mut self.details {
      map.insert(key.into(), value);
    }
  }

  pub fn assertion(&self, name: &str) -> Option<&Assertion> { self.assertions.iter().find(|a| a.name == name) }

  pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.report.json", self.scenario));
    fs::write(&path, serde_json::to_string_pretty(self)?)?;
    Ok(path)
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
  Baseline,
  OneBump,
  TwoStage,
  RandomSweep,
  Path,
  Resolution,
  Battery,
}

impl Scenario {
  pub const ALL: [Scenario; 7] = [
    Scenario::Baseline,
    Scenario::OneBump,
    Scenario::TwoStage,
    Scenario::RandomSweep,
    Scenario::Path,
    Scenario::Resolution,
    Scenario::Battery,
  ];

  pub fn name(&self) -> &'static str {
    match self {
      Scenario::Baseline => "baseline",
      Scenario::OneBump => "one-bump",
      Scenario::TwoStage => "two-stage",
      Scenario::RandomSweep => "random-sweep",
      Scenario::Path => "path",
      Scenario::Resolution => "resolution",
      Scenario::Battery => "battery",
    }
  }

  /// Runs the scenario; field dumps and the CSV go under `cfg.output_dir`.
  pub fn run(&self, cfg: &LabConfig) -> ScenarioReport {
    match self {
      Scenario::Baseline => scenario_baseline(cfg),
      Scenario::OneBump => scenario_one_bump(cfg),
      Scenario::TwoStage => scenario_two_stage(cfg),
      Scenario::RandomSweep => scenario_random_sweep(cfg),
      Scenario::Path => scenario_path(cfg),
      Scenario::Resolution => scenario_resolution(cfg),
      Scenario::Battery => identity_battery(cfg),
    }
  }
}

/// Validates `cfg`, runs the scenarios and writes `<scenario>.report.json`
/// for each. Reports are written even when assertions fail.
pub fn run_and_write(scenarios: &[Scenario], cfg: &LabConfig) -> Result<Vec<ScenarioReport>> {
  cfg.validate()?;
  fs::create_dir_all(&cfg.output_dir)?;
  let mut reports = Vec::new();
  for s in scenarios {
    let report = s.run(cfg);
    report.write(&cfg.output_dir)?;
    reports.push(report);
  }
  Ok(reports)
}
