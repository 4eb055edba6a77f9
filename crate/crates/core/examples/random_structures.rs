//! Random bandlimited compatible structures generically have `h_minus = 0`.
//!
//! `cargo run --example random_structures -- [count]`

use acslab::cohomlab;
use acslab::hermitian;
use acslab::torusfield::GridSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
  let count: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
  let grid = GridSpec::new(12)?;
  println!("seed  h_minus  lambda_min");
  for seed in 1..=count {
    let t = hermitian::random_compatible_acs(grid, seed, 0.3, 2)?;
    let gram = cohomlab::gram_matrix(&t, cohomlab::DEFAULT_TOL_NULL);
    println!("{seed:>4}  {:>7}  {:.4e}", gram.h_minus, gram.lambda_min());
  }
  Ok(())
}
