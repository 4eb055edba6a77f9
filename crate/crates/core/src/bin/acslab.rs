use std::path::PathBuf;
use std::process::ExitCode;

use acslab::lab::{self, LabConfig, Scenario};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "acslab", version, about = "Anti-invariant cohomology experiments on the flat 4-torus")]
struct Cli {
  #[command(subcommand)]
  command: Command,

  /// JSON config file; missing keys take their defaults.
  #[arg(long, global = true, value_name = "PATH")]
  config: Option<PathBuf>,

  /// Directory for reports, CSV and field dumps.
  #[arg(long, global = true, value_name = "DIR")]
  output: Option<PathBuf>,

  #[command(flatten)]
  overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
  Baseline,
  OneBump,
  TwoStage,
  RandomSweep,
  Path,
  Resolution,
  Battery,
  All,
}

/// Per-key overrides applied on top of the config file.
#[derive(Args)]
struct Overrides {
  #[arg(long, global = true)]
  grid_n:        Option<usize>,
  #[arg(long, global = true)]
  oracle_n:      Option<usize>,
  #[arg(long, global = true)]
  tol_null:      Option<f64>,
  #[arg(long, global = true)]
  eps_nodal:     Option<f64>,
  #[arg(long, global = true)]
  seed:          Option<u64>,
  #[arg(long, global = true)]
  amplitude:     Option<f64>,
  #[arg(long, global = true)]
  bandlimit:     Option<usize>,
  #[arg(long, global = true)]
  sweep_count:   Option<usize>,
  #[arg(long, global = true)]
  path_steps:    Option<usize>,
  #[arg(long, global = true, value_delimiter = ',', num_args = 4, value_name = "X1,X2,X3,X4")]
  bump1_center:  Option<Vec<f64>>,
  #[arg(long, global = true)]
  bump1_radius:  Option<f64>,
  #[arg(long, global = true)]
  bump1_height:  Option<f64>,
  #[arg(long, global = true, value_delimiter = ',', num_args = 4, value_name = "X1,X2,X3,X4")]
  bump2_center:  Option<Vec<f64>>,
  #[arg(long, global = true)]
  bump2_radius:  Option<f64>,
  #[arg(long, global = true)]
  bump2_height:  Option<f64>,
}

fn center(v: Vec<f64>) -> [f64; 4] { [v[0], v[1], v[2], v[3]] }

impl Overrides {
  fn apply(self, cfg: &mut LabConfig) {
    macro_rules! set {
      ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
    }
    set!(grid_n, oracle_n, tol_null, eps_nodal, seed, amplitude, bandlimit, sweep_count, path_steps);
    if let Some(c) = self.bump1_center {
      cfg.bump1.center = center(c);
    }
    if let Some(r) = self.bump1_radius {
      cfg.bump1.radius = r;
    }
    if let Some(h) = self.bump1_height {
      cfg.bump1.height = h;
    }
    if let Some(c) = self.bump2_center {
      cfg.bump2.center = center(c);
    }
    if let Some(r) = self.bump2_radius {
      cfg.bump2.radius = r;
    }
    if let Some(h) = self.bump2_height {
      cfg.bump2.height = h;
    }
  }
}

fn main() -> ExitCode {
  let cli = Cli::parse();
  let mut cfg = match &cli.config {
    Some(path) => match LabConfig::from_json_file(path) {
      Ok(cfg) => cfg,
      Err(e) => {
        eprintln!("error: {}: {e}", path.display());
        return ExitCode::from(2);
      }
    },
    None => LabConfig::default(),
  };
  if let Some(dir) = cli.output {
    cfg.output_dir = dir;
  }
  cli.overrides.apply(&mut cfg);

  let scenarios: Vec<Scenario> = match cli.command {
    Command::Baseline => vec![Scenario::Baseline],
    Command::OneBump => vec![Scenario::OneBump],
    Command::TwoStage => vec![Scenario::TwoStage],
    Command::RandomSweep => vec![Scenario::RandomSweep],
    Command::Path => vec![Scenario::Path],
    Command::Resolution => vec![Scenario::Resolution],
    Command::Battery => vec![Scenario::Battery],
    Command::All => Scenario::ALL.to_vec(),
  };

  let reports = match lab::run_and_write(&scenarios, &cfg) {
    Ok(r) => r,
    Err(e @ lab::LabError::Config(_)) | Err(e @ lab::LabError::Field(_)) => {
      eprintln!("error: {e}");
      return ExitCode::from(2);
    }
    Err(e) => {
      eprintln!("error: {e}");
      return ExitCode::FAILURE;
    }
  };

  let mut all_passed = true;
  for report in &reports {
    let status = if report.passed { "PASS" } else { "FAIL" };
    println!("{status} {} ({:.0} ms)", report.scenario, report.total_ms());
    for a in report.assertions.iter().filter(|a| !a.passed) {
      println!("  failed: {}: measured {:e}, required {} {:e}", a.name, a.measured, a.relation, a.tolerance);
    }
    for e in &report.errors {
      println!("  error: {e}");
    }
    all_passed &= report.passed;
  }
  println!("reports written to {}", cfg.output_dir.display());
  if all_passed { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
