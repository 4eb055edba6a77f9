//! Two successive cut-off deformations removing all anti-invariant classes.
//!
//! `cargo run --example two_stage`

use acslab::cohomlab;
use acslab::hermitian::{self, DeformOptions};
use acslab::torusfield::{BumpParams, GridSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
  let grid = GridSpec::new(16)?;
  let j0 = hermitian::standard_acs(grid);
  let bump1 = BumpParams::new([0.5; 4], 0.15, 0.5);
  let bump2 = BumpParams::new([0.0; 4], 0.1, 0.5);
  let out = hermitian::two_stage_deform(&j0, &bump1, &bump2, &DeformOptions::default())?;
  for s in &out.log.stages {
    println!("stage {}: h_minus {} -> {}, lambda_min {:.3e}", s.stage, s.h_minus_before, s.h_minus_after, s.lambda_min_after);
  }
  if let Some(d) = out.log.stage2_route_agreement {
    println!("normalization vs rational route: {d:.1e}");
  }
  let before = cohomlab::gram_matrix(&out.stage1, cohomlab::DEFAULT_TOL_NULL);
  let after = cohomlab::gram_matrix(&out.stage2, cohomlab::DEFAULT_TOL_NULL);
  println!("null space of J_c2 inside that of J_c1: {}", cohomlab::null_space_contained(&after, &before, cohomlab::ANGLE_TOL));
  Ok(())
}
