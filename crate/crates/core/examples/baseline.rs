//! Gram analysis of the standard structure `J0` on the flat torus.
//!
//! `cargo run --example baseline`

use acslab::cohomlab;
use acslab::hermitian;
use acslab::torusfield::GridSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
  let grid = GridSpec::new(8)?;
  let j0 = hermitian::standard_acs(grid);
  let gram = cohomlab::gram_matrix(&j0, cohomlab::DEFAULT_TOL_NULL);
  println!("Gram matrix of <w_i, F>:");
  for row in &gram.matrix {
    println!("  {:>8.4} {:>8.4} {:>8.4}", row[0], row[1], row[2]);
  }
  println!("eigenvalues {:?}", gram.eigenvalues);
  println!("h_minus = {}, h_plus = {}", gram.h_minus, cohomlab::h_plus(&gram));
  for (k, v) in gram.null_basis.iter().enumerate() {
    println!("null direction {k}: {v:?}");
  }
  Ok(())
}
