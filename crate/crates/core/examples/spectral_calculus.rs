//! Spectral exterior calculus on the torus: exact derivatives of trigonometric
//! fields, `d d = 0`, and the adjointness of `d` and `delta`.
//!
//! `cargo run --example spectral_calculus`

use std::f64::consts::TAU;

use acslab::torusfield::{self, GridSpec, OneFormField, ScalarField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
  let grid = GridSpec::new(12)?;
  let f = ScalarField::from_fn(grid, |x| (TAU * (x[0] + 2.0 * x[2])).sin() * (TAU * x[3]).cos());
  let df1 = torusfield::partial(&f, 0);
  let exact = ScalarField::from_fn(grid, |x| TAU * (TAU * (x[0] + 2.0 * x[2])).cos() * (TAU * x[3]).cos());
  println!("d/dx1 error: {:.2e}", (&df1 - &exact).max_abs());

  let ddf = torusfield::d_oneform(&torusfield::d_scalar(&f));
  println!("|d d f|: {:.2e}", torusfield::FormField::max_abs(&ddf));

  let theta = OneFormField::new(std::array::from_fn(|a| {
    ScalarField::from_fn(grid, move |x| (TAU * (x[a] + x[(a + 1) % 4])).cos() * (a as f64 + 1.0))
  }))?;
  let psi = OneFormField::new(std::array::from_fn(|a| {
    ScalarField::from_fn(grid, move |x| (TAU * (x[a] + x[(a + 1) % 4]) + 0.3 * a as f64).sin() + (TAU * x[(a + 2) % 4]).cos())
  }))?;
  let phi = torusfield::d_oneform(&psi);
  let lhs = torusfield::l2_inner(&torusfield::d_oneform(&theta), &phi)?;
  let rhs = torusfield::l2_inner(&theta, &torusfield::codiff_twoform(&phi))?;
  println!("(d theta, phi) = {lhs:.12}  (theta, delta phi) = {rhs:.12}");
  println!("mean of f^2: {:.12}", torusfield::integrate(&f.map(|v| v * v)));
  Ok(())
}
