//! Cross-check of the Gram count against the kernel of the discretized
//! elliptic operator on a coarse grid.
//!
//! `cargo run --example lejmi_oracle`

use acslab::cohomlab;
use acslab::hermitian::{self, HermitianTriple};
use acslab::torusfield::GridSpec;

fn report(name: &str, t: &HermitianTriple, grid: GridSpec) -> Result<(), Box<dyn std::error::Error>> {
  let gram = cohomlab::gram_matrix(t, cohomlab::DEFAULT_TOL_NULL);
  let lejmi = cohomlab::lejmi_kernel_dim(t, grid, cohomlab::DEFAULT_LEJMI_TOL)?;
  println!(
    "{name:<10} gram {}  kernel {}  ({} unknowns, smallest sv {:.1e}, largest {:.1e})",
    gram.h_minus,
    lejmi.kernel_dim,
    lejmi.unknowns,
    lejmi.smallest_singular_values.first().copied().unwrap_or(f64::NAN),
    lejmi.largest_singular_value,
  );
  Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
  let grid = GridSpec::new(4)?;
  report("J0", &hermitian::standard_acs(grid), grid)?;
  report("random", &hermitian::random_compatible_acs(grid, 3, 0.3, 1)?, grid)?;
  Ok(())
}
