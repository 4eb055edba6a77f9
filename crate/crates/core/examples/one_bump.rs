//! One cut-off deformation of `J0` inside a small ball: `h_minus` drops
//! from 2 to 1.
//!
//! `cargo run --example one_bump`

use acslab::cohomlab;
use acslab::hermitian::{self, DeformOptions};
use acslab::torusfield::{BumpParams, GridSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
  let grid = GridSpec::new(16)?;
  let j0 = hermitian::standard_acs(grid);
  let bump = BumpParams::new([0.5; 4], 0.15, 0.5);
  let (j1, record) = hermitian::one_bump_deform(&j0, &bump, &DeformOptions::default())?;
  println!("support volume {:.3e}, delta_J estimate {:?}", record.support_volume, record.delta_estimate);
  println!("direction {:?}, sup |c a|^2 = {:.4}", record.direction, record.sup_norm_sq);
  println!("h_minus {} -> {}", record.h_minus_before, record.h_minus_after);
  println!("invariant residual {:.1e}", j1.invariant_residual());
  let gram = cohomlab::gram_matrix(&j1, cohomlab::DEFAULT_TOL_NULL);
  println!("Gram eigenvalues {:?}", gram.eigenvalues);
  Ok(())
}
