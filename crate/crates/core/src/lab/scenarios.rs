use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::battery;
use super::{LabConfig, ScenarioReport};
use crate::cohomlab::{self, GramReport};
use crate::hermitian::{self, DeformOptions, HermitianTriple, StageRecord, TwoStageOutcome};
use crate::pointlin::{self, OMEGA2, OMEGA3};
use crate::torusfield::{self, FormField, GridSpec};

/// Grid sizes of the resolution study.
pub const RESOLUTION_GRIDS: [usize; 4] = [8, 16, 24, 32];

/// Random structures of the sweep that are also checked by the elliptic oracle.
pub const SWEEP_ORACLE_SEEDS: usize = 2;

const SPAN_W2_W3: [[f64; 3]; 2] = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn deform_options(cfg: &LabConfig) -> DeformOptions {
  DeformOptions { tol_null: cfg.tol_null, eps_nodal: cfg.eps_nodal, ..DeformOptions::default() }
}

/// `J_{c1}`: the first cut-off deformation of the standard structure on `grid`.
pub fn one_bump_structure(cfg: &LabConfig, grid: GridSpec) -> hermitian::Result<(HermitianTriple, StageRecord)> {
  hermitian::one_bump_deform(&hermitian::standard_acs(grid), &cfg.bump1, &deform_options(cfg))
}

/// Both cut-off stages starting from the standard structure on `grid`.
pub fn two_stage_structure(cfg: &LabConfig, grid: GridSpec) -> hermitian::Result<TwoStageOutcome> {
  hermitian::two_stage_deform(&hermitian::standard_acs(grid), &cfg.bump1, &cfg.bump2, &deform_options(cfg))
}

pub fn random_structure(cfg: &LabConfig, seed: u64, grid: GridSpec) -> hermitian::Result<HermitianTriple> {
  hermitian::random_compatible_acs(grid, seed, cfg.amplitude, cfg.bandlimit)
}

/// Elliptic-oracle cross-check of a structure built on the oracle grid.
/// Returns whether the kernel matched the Gram count.
pub fn oracle_check(report: &mut ScenarioReport, label: &str, triple: &HermitianTriple, cfg: &LabConfig) -> bool {
  let gram = cohomlab::gram_matrix(triple, cfg.tol_null);
  let lejmi = report.timed(&format!("oracle {label}"), || {
    cohomlab::lejmi_kernel_dim(triple, triple.grid(), cohomlab::DEFAULT_LEJMI_TOL)
  });
  match lejmi {
    Ok(lejmi) => {
      let ok = report.assert_eq(&format!("oracle kernel = gram h_minus [{label}]"), lejmi.kernel_dim, gram.h_minus);
      report.lejmi.insert(label.into(), lejmi);
      report.gram.insert(format!("{label} (oracle grid)"), gram);
      ok
    }
    Err(e) => {
      report.fail(&format!("oracle {label}"), e);
      false
    }
  }
}

fn frobenius(m: &[[f64; 3]; 3]) -> f64 { m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt() }

fn normalization_residual(triple: &HermitianTriple) -> f64 {
  (0..triple.grid().node_count())
    .into_par_iter()
    .map(|i| {
      let f = triple.f().at(i);
      (pointlin::wedge_to_volume(&f, &f) - 2.0).abs()
    })
    .reduce(|| 0.0, f64::max)
}

fn save_triple(report: &mut ScenarioReport, cfg: &LabConfig, stem: &str, triple: &HermitianTriple, params: serde_json::Value) {
  match triple.save(&cfg.output_dir, stem, &params) {
    Ok(()) => report.files.extend(["json", "J.ajc", "F.ajc"].map(|ext| format!("{stem}.{ext}"))),
    Err(e) => report.fail(&format!("write {stem}"), e),
  }
}

fn save_gram(report: &mut ScenarioReport, cfg: &LabConfig, stem: &str, gram: &GramReport) {
  match gram.write_json(&cfg.output_dir, stem) {
    Ok(_) => {
      report.files.push(format!("{stem}.gram.json"));
      report.files.extend((0..gram.h_minus).map(|k| format!("{stem}.null{k}.ajc")));
    }
    Err(e) => report.fail(&format!("write {stem} gram"), e),
  }
}

macro_rules! try_stage {
  ($report:expr, $stage:expr, $e:expr) => {
    match $e {
      Ok(v) => v,
      Err(err) => {
        $report.fail($stage, err);
        return $report;
      }
    }
  };
}

pub fn scenario_baseline(cfg: &LabConfig) -> ScenarioReport {
  let mut r = ScenarioReport::new("baseline", cfg);
  let grid = try_stage!(r, "grid", cfg.grid());
  let triple = r.timed("construct", || hermitian::standard_acs(grid));
  let gram = r.timed("gram", || cohomlab::gram_matrix(&triple, cfg.tol_null));
  r.h_values.insert("J0".into(), gram.h_minus);
  r.h_values.insert("J0 h_plus".into(), cohomlab::h_plus(&gram));
  r.assert_eq("h_minus = 2", gram.h_minus, 2);
  r.assert_eq("h_plus = 4", cohomlab::h_plus(&gram), 4);
  let expected = [[4.0, 0.0, 0.0], [0.0; 3], [0.0; 3]];
  let dev = gram.matrix.iter().flatten().zip(expected.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
  r.assert_le("|G - diag(4,0,0)|", dev, 1e-10);

  let forms = gram.null_forms(grid);
  let closed = forms.iter().map(|f| torusfield::d_twoform(f).max_abs()).fold(0.0, f64::max);
  r.assert_le("null forms closed: |d a|", closed, 1e-12);
  let j0 = pointlin::Endomorphism4::standard();
  let invariant_part = forms
    .iter()
    .flat_map(|f| (0..grid.node_count()).map(move |i| f.at(i)))
    .map(|a| pointlin::split_j(&j0, &a).map_or(f64::INFINITY, |s| s.plus.max_abs()))
    .fold(0.0, f64::max);
  r.assert_le("null forms anti-invariant: |a^+|", invariant_part, 1e-12);
  let rotated = pointlin::j_act_anti(&j0, &OMEGA2).map_or(f64::INFINITY, |a| a.max_abs_diff(&OMEGA3));
  r.assert_le("J acts on null space: |J w2 - w3|", rotated, 1e-12);
  r.detail("eigenvalues", gram.eigenvalues);
  save_gram(&mut r, cfg, "baseline", &gram);
  r.gram.insert("J0".into(), gram);

  let oracle_grid = try_stage!(r, "oracle grid", cfg.oracle_grid());
  oracle_check(&mut r, "J0", &hermitian::standard_acs(oracle_grid), cfg);
  r
}

/// Checks shared by the one-bump and two-stage scenarios on `J_{c1}`.
fn check_first_stage(r: &mut ScenarioReport, gram0: &GramReport, gram1: &GramReport, record: &StageRecord) {
  r.assert_le("h(J_c1) <= 1", gram1.h_minus as f64, 1.0);
  let angle = cohomlab::max_principal_angle(&gram1.null_basis, &SPAN_W2_W3);
  r.assert_lt("null(J_c1) in span{w2, w3}: max principal angle", angle, cohomlab::ANGLE_TOL);
  r.assert_true("null(J_c1) contained in null(J0)", cohomlab::null_space_contained(gram1, gram0, cohomlab::ANGLE_TOL));
  r.assert_le("intersection_dim(J0, J_c1) <= 1", cohomlab::intersection_dim_of(gram0, gram1) as f64, 1.0);
  if let Some(delta) = record.delta_estimate {
    r.assert_lt("stage-1 bump volume < delta_J0", record.support_volume, delta);
  }
}

pub fn scenario_one_bump(cfg: &LabConfig) -> ScenarioReport {
  let mut r = ScenarioReport::new("one-bump", cfg);
  let grid = try_stage!(r, "grid", cfg.grid());
  let j0 = hermitian::standard_acs(grid);
  let gram0 = cohomlab::gram_matrix(&j0, cfg.tol_null);
  let (j1, record) = try_stage!(r, "deform", r.timed("deform", || one_bump_structure(cfg, grid)));
  let gram1 = r.timed("gram", || cohomlab::gram_matrix(&j1, cfg.tol_null));
  r.h_values.insert("J0".into(), gram0.h_minus);
  r.h_values.insert("J_c1".into(), gram1.h_minus);
  check_first_stage(&mut r, &gram0, &gram1, &record);
  r.assert_le("J_c1 invariants", j1.invariant_residual(), hermitian::TRIPLE_TOL);

  // sensitivity of delta_{J_c1} to the nodal threshold
  if gram1.h_minus < cohomlab::B_PLUS {
    let opts = deform_options(cfg);
    let sens: Vec<(f64, Option<f64>)> = [cfg.eps_nodal * 1e-2, cfg.eps_nodal, cfg.eps_nodal * 1e2]
      .into_iter()
      .map(|eps| (eps, cohomlab::delta_j_estimate_with(&j1, &gram1, opts.delta_samples, eps).ok()))
      .collect();
    r.detail("delta_J_c1_vs_eps", sens);
  }
  r.detail("stage", &record);
  save_triple(&mut r, cfg, "one-bump.J_c1", &j1, serde_json::json!({ "stage": &record }));
  save_gram(&mut r, cfg, "one-bump.J_c1", &gram1);
  r.gram.insert("J0".into(), gram0);
  r.gram.insert("J_c1".into(), gram1);

  let oracle_grid = try_stage!(r, "oracle grid", cfg.oracle_grid());
  match one_bump_structure(cfg, oracle_grid) {
    Ok((t, _)) => {
      oracle_check(&mut r, "J_c1", &t, cfg);
    }
    Err(e) => r.fail("oracle J_c1 construction", e),
  }
  r
}

pub fn scenario_two_stage(cfg: &LabConfig) -> ScenarioReport {
  let mut r = ScenarioReport::new("two-stage", cfg);
  let grid = try_stage!(r, "grid", cfg.grid());
  let gram0 = cohomlab::gram_matrix(&hermitian::standard_acs(grid), cfg.tol_null);
  let out = try_stage!(r, "deform", r.timed("deform", || two_stage_structure(cfg, grid)));
  let gram1 = cohomlab::gram_matrix(&out.stage1, cfg.tol_null);
  let gram2 = r.timed("gram", || cohomlab::gram_matrix(&out.stage2, cfg.tol_null));
  r.h_values.insert("J0".into(), gram0.h_minus);
  r.h_values.insert("J_c1".into(), gram1.h_minus);
  r.h_values.insert("J_c2".into(), gram2.h_minus);
  check_first_stage(&mut r, &gram0, &gram1, &out.log.stages[0]);
  r.assert_eq("h(J_c2) = 0", gram2.h_minus, 0);
  r.assert_gt("lambda_min(G_c2) > 10 tau", gram2.lambda_min(), 10.0 * gram2.tolerance);
  r.assert_le("|F_c2 ^ F_c2 - 2|", normalization_residual(&out.stage2), 1e-9);
  r.assert_le("J_c2 invariants", out.stage2.invariant_residual(), hermitian::TRIPLE_TOL);
  if let Some(stage2) = out.log.stages.get(1) {
    if let Some(delta) = stage2.delta_estimate {
      r.assert_lt("stage-2 bump volume < delta_J_c1", stage2.support_volume, delta);
    }
  }
  if let Some(agreement) = out.log.stage2_route_agreement {
    r.assert_le("stage-2 normalization vs rational route", agreement, 1e-9);
  }
  r.detail("log", &out.log);
  let params = serde_json::json!({ "log": &out.log });
  save_triple(&mut r, cfg, "two-stage.J_c1", &out.stage1, params.clone());
  save_triple(&mut r, cfg, "two-stage.J_c2", &out.stage2, params);
  save_gram(&mut r, cfg, "two-stage.J_c2", &gram2);
  r.gram.insert("J0".into(), gram0);
  r.gram.insert("J_c1".into(), gram1);
  r.gram.insert("J_c2".into(), gram2);

  let oracle_grid = try_stage!(r, "oracle grid", cfg.oracle_grid());
  match two_stage_structure(cfg, oracle_grid) {
    Ok(o) => {
      oracle_check(&mut r, "J_c2", &o.stage2, cfg);
    }
    Err(e) => r.fail("oracle J_c2 construction", e),
  }
  r
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
  pub seed:       u64,
  pub amplitude:  f64,
  pub bandlimit:  usize,
  pub h_minus:    usize,
  pub lambda_min: f64,
  pub runtime_ms: f64,
}

pub fn scenario_random_sweep(cfg: &LabConfig) -> ScenarioReport {
  let mut r = ScenarioReport::new("random-sweep", cfg);
  let grid = try_stage!(r, "grid", cfg.grid());
  let seeds: Vec<u64> = (cfg.seed..cfg.seed + cfg.sweep_count as u64).collect();
  let results: Vec<(u64, hermitian::Result<SweepRow>)> = r.timed("sweep", || {
    seeds
      .par_iter()
      .map(|&seed| {
        let start = Instant::now();
        let row = random_structure(cfg, seed, grid).map(|t| {
          let gram = cohomlab::gram_matrix(&t, cfg.tol_null);
          SweepRow {
            seed,
            amplitude: cfg.amplitude,
            bandlimit: cfg.bandlimit,
            h_minus: gram.h_minus,
            lambda_min: gram.lambda_min(),
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
          }
        });
        (seed, row)
      })
      .collect()
  });
  let mut rows = Vec::new();
  for (seed, res) in results {
    match res {
      Ok(row) => rows.push(row),
      Err(e) => r.fail(&format!("seed {seed}"), e),
    }
  }
  let zeros = rows.iter().filter(|row| row.h_minus == 0).count();
  r.assert_eq("seeds with h_minus = 0", zeros, seeds.len());
  let nonzero: Vec<u64> = rows.iter().filter(|row| row.h_minus > 0).map(|row| row.seed).collect();
  r.detail("seeds_with_nonzero_h", nonzero);
  r.detail("fraction_h_zero", zeros as f64 / seeds.len() as f64);
  if let Some(min) = rows.iter().map(|row| row.lambda_min).min_by(f64::total_cmp) {
    r.detail("smallest_lambda_min", min);
  }
  let write = || -> super::Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut w = csv::Writer::from_path(cfg.output_dir.join("sweep.csv"))?;
    for row in &rows {
      w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
  };
  match write() {
    Ok(()) => r.files.push("sweep.csv".into()),
    Err(e) => r.fail("write sweep.csv", e),
  }

  let oracle_grid = try_stage!(r, "oracle grid", cfg.oracle_grid());
  for &seed in seeds.iter().take(SWEEP_ORACLE_SEEDS) {
    match random_structure(cfg, seed, oracle_grid) {
      Ok(t) => {
        oracle_check(&mut r, &format!("random seed {seed}"), &t, cfg);
      }
      Err(e) => r.fail(&format!("oracle seed {seed}"), e),
    }
  }
  r
}

/// `t_k = 0.95 k / (steps - 1)`.
pub fn path_parameters(steps: usize) -> Vec<f64> { (0..steps).map(|k| 0.95 * k as f64 / (steps - 1) as f64).collect() }

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
  pub t:           f64,
  pub h_minus:     usize,
  pub eigenvalues: [f64; 3],
}

pub fn scenario_path(cfg: &LabConfig) -> ScenarioReport {
  let mut r = ScenarioReport::new("path", cfg);
  let grid = try_stage!(r, "grid", cfg.grid());
  let j0 = hermitian::standard_acs(grid);
  let gram0 = cohomlab::gram_matrix(&j0, cfg.tol_null);
  let direction = try_stage!(r, "direction", gram0.preferred_null_direction().ok_or("J0 has no null direction"));
  let (form, used, _) = try_stage!(r, "cut-off form", hermitian::cutoff_form(&j0, direction, &cfg.bump1));
  let samples: Vec<PathSample> = try_stage!(
    r,
    "path",
    r.timed("path", || {
      path_parameters(cfg.path_steps)
        .into_iter()
        .map(|t| {
          let jt = hermitian::deform_field(&j0, &form.scale(t))?;
          let g = cohomlab::gram_matrix(&jt, cfg.tol_null);
          Ok(PathSample { t, h_minus: g.h_minus, eigenvalues: g.eigenvalues })
        })
        .collect::<hermitian::Result<Vec<_>>>()
    })
  );
  let h0 = samples[0].h_minus;
  r.h_values.insert("t=0".into(), h0);
  r.assert_eq("h(0) = 2", h0, 2);
  let max_h = samples.iter().map(|s| s.h_minus).max().unwrap_or(0);
  r.assert_le("max_t h(t) <= h(0)", max_h as f64, h0 as f64);
  let max_positive = samples.iter().filter(|s| s.t > 0.0).map(|s| s.h_minus).max().unwrap_or(0);
  r.assert_le("h(t) <= 1 for t > 0", max_positive as f64, 1.0);

  // A nearly flat bump perturbs G far below the null threshold.
  let faint = torusfield::BumpParams { height: 1e-3, ..used };
  match hermitian::one_bump_deform(&j0, &faint, &deform_options(cfg)) {
    Ok((_, rec)) => {
      r.h_values.insert("faint bump".into(), rec.h_minus_after);
      r.assert_eq("height 1e-3 bump is below resolution: h = 2", rec.h_minus_after, 2);
      r.detail("faint_bump_lambda_min", rec.lambda_min_after);
    }
    Err(e) => r.fail("faint bump", e),
  }
  r.detail("bump", used);
  r.detail("samples", samples);
  r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionSample {
  pub n:           usize,
  pub h_minus:     usize,
  pub matrix:      [[f64; 3]; 3],
  pub eigenvalues: [f64; 3],
}

pub fn scenario_resolution(cfg: &LabConfig) -> ScenarioReport {
  let mut r = ScenarioReport::new("resolution", cfg);
  let mut samples = Vec::new();
  for n in RESOLUTION_GRIDS {
    let grid = try_stage!(r, "grid", GridSpec::new(n));
    match r.timed(&format!("n = {n}"), || two_stage_structure(cfg, grid)) {
      Ok(out) => {
        let g = cohomlab::gram_matrix(&out.stage2, cfg.tol_null);
        r.h_values.insert(format!("J_c2 n={n}"), g.h_minus);
        samples.push(ResolutionSample { n, h_minus: g.h_minus, matrix: g.matrix, eigenvalues: g.eigenvalues });
      }
      Err(e) => r.fail(&format!("two-stage at n = {n}"), e),
    }
  }
  let rel: Vec<f64> = samples
    .windows(2)
    .map(|w| {
      let d: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| w[1].matrix[i][j] - w[0].matrix[i][j]));
      frobenius(&d) / frobenius(&w[1].matrix)
    })
    .collect();
  let entrywise: Vec<f64> = samples
    .windows(2)
    .map(|w| w[0].matrix.iter().flatten().zip(w[1].matrix.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    .collect();
  match rel.last() {
    Some(&last) if samples.len() == RESOLUTION_GRIDS.len() => {
      r.assert_lt("final successive relative difference", last, 1e-3);
    }
    _ => r.fail("resolution", "not every grid produced a structure"),
  }
  let lambda_rel: Vec<f64> = samples
    .windows(2)
    .map(|w| (w[1].eigenvalues[0] - w[0].eigenvalues[0]).abs() / w[1].eigenvalues[0].abs())
    .collect();
  r.detail("relative_differences", &rel);
  r.detail("lambda_min_relative_differences", &lambda_rel);
  r.detail("max_entry_differences", &entrywise);
  r.detail("monotone_decreasing", rel.windows(2).all(|w| w[1] <= w[0]));
  r.detail("samples", samples);
  r
}

pub fn identity_battery(cfg: &LabConfig) -> ScenarioReport {
  let mut r = ScenarioReport::new("battery", cfg);
  let grid = try_stage!(r, "grid", cfg.grid());
  let mut checks = r.timed("deformation", || battery::deformation_checks(10_000, cfg.seed));
  checks.extend(r.timed("splitting", || battery::splitting_checks(10_000, cfg.seed.wrapping_add(1))));
  checks.extend(r.timed("calculus", || battery::calculus_checks(100, grid, cfg.bandlimit, cfg.seed.wrapping_add(2))));
  for c in &checks {
    r.assert_le(&format!("{} (max residual over {} cases)", c.name, c.cases), c.max_residual, c.tolerance);
  }
  r.checks = checks;
  r
}
