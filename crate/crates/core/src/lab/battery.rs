//! Randomized identity checks for the pointwise algebra and the spectral
//! calculus. Each check reports its worst residual and failure count rather
//! than stopping at the first failure.

use nalgebra::Matrix4;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hermitian::TrigPolynomial;
use crate::pointlin::{self, Endomorphism4, TwoForm};
use crate::torusfield::{self, FormField, GridSpec, OneFormField, ScalarField, TwoFormField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
  pub name:         String,
  pub cases:        usize,
  pub max_residual: f64,
  pub tolerance:    f64,
  pub failures:     usize,
}

impl CheckSummary {
  fn new(name: &str, tolerance: f64) -> Self {
    Self { name: name.into(), cases: 0, max_residual: 0.0, tolerance, failures: 0 }
  }

  fn record(&mut self, residual: f64) {
    self.cases += 1;
    if residual.is_nan() || residual > self.tolerance {
      self.failures += 1;
    }
    if residual.is_nan() {
      self.max_residual = f64::NAN;
    } else if !self.max_residual.is_nan() {
      self.max_residual = self.max_residual.max(residual);
    }
  }

  pub fn passed(&self) -> bool { self.cases > 0 && self.failures == 0 }
}

/// A random compatible structure: half the cases deform the standard one,
/// the other half take an arbitrary unit self-dual fundamental form.
pub fn random_structure(rng: &mut ChaCha8Rng) -> Endomorphism4 {
  if rng.random_bool(0.5) {
    let r = rng.random_range(0.0..0.95_f64).sqrt();
    let t = rng.random_range(0.0..std::f64::consts::TAU);
    let alpha = pointlin::OMEGA2 * (r * t.cos()) + pointlin::OMEGA3 * (r * t.sin());
    pointlin::deform_closed_form(&Endomorphism4::standard(), &alpha, r * r)
  } else {
    let mut u: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt().max(1e-3);
    u.iter_mut().for_each(|x| *x /= n);
    pointlin::acs_from_sd_form(&TwoForm::from_sd_coords(u)).expect("unit self-dual form")
  }
}

pub fn random_form(rng: &mut ChaCha8Rng) -> TwoForm { TwoForm(std::array::from_fn(|_| rng.random_range(-1.0..1.0))) }

/// A random J-anti-invariant form with norm squared `paper_norm_sq` uniform in `[0, max_norm_sq)`.
pub fn random_anti_invariant(rng: &mut ChaCha8Rng, j: &Endomorphism4, max_norm_sq: f64) -> TwoForm {
  loop {
    let minus = pointlin::split_j(j, &random_form(rng)).expect("valid structure").minus;
    let n2 = pointlin::wedge_to_volume(&minus, &minus) / 2.0;
    if n2 > 1e-6 {
      let target = rng.random_range(0.0..max_norm_sq);
      return minus * (target / n2).sqrt();
    }
  }
}

/// Deformation identities: conjugation against closed form, `J_a^2 = -Id`,
/// orthogonality, `|F_a|^2 = 1`, skewness of `K_a` and the determinant bound
/// `det(Id + J K_a) >= (1 - |a|^2)^2`.
pub fn deformation_checks(cases: usize, seed: u64) -> Vec<CheckSummary> {
  let mut rng = ChaCha8Rng::seed_from_u64(seed);
  let mut formulas = CheckSummary::new("conjugation vs closed form", 1e-10);
  let mut square = CheckSummary::new("J_a^2 = -Id", 1e-10);
  let mut ortho = CheckSummary::new("J_a g-orthogonal", 1e-10);
  let mut norm = CheckSummary::new("|F_a|^2 = 1", 1e-12);
  let mut skew = CheckSummary::new("K_a skew-adjoint", 1e-15);
  let mut det = CheckSummary::new("det(Id + J K_a) >= (1 - |a|^2)^2", 1e-10);
  for _ in 0..cases {
    let j = random_structure(&mut rng);
    let alpha = random_anti_invariant(&mut rng, &j, 0.95);
    let n2 = pointlin::paper_norm_sq(&alpha).expect("self-dual");
    let closed = pointlin::deform_closed_form(&j, &alpha, n2);
    let conj = pointlin::deform_by_conjugation(&j, &alpha);
    formulas.record(conj.map_or(f64::INFINITY, |c| c.max_abs_diff(&closed)));
    square.record(closed.square_residual());
    ortho.record(closed.orthogonality_residual());
    let f = pointlin::fundamental_form(&j).expect("compatible");
    let fa = f * ((1.0 - n2) / (1.0 + n2)) + alpha * (2.0 / (1.0 + n2));
    norm.record((pointlin::wedge_to_volume(&fa, &fa) / 2.0 - 1.0).abs());
    let k = pointlin::k_endo(&alpha).0;
    skew.record((k + k.transpose()).amax());
    let d = (Matrix4::identity() + j.0 * k).determinant();
    det.record(((1.0 - n2).powi(2) - d).max(0.0));
  }
  vec![formulas, square, ortho, norm, skew, det]
}

/// The two splittings and the three bundle relations.
pub fn splitting_checks(cases: usize, seed: u64) -> Vec<CheckSummary> {
  let mut rng = ChaCha8Rng::seed_from_u64(seed);
  let tol = 1e-10;
  let mut recon = CheckSummary::new("splittings reconstruct", tol);
  let mut eigen = CheckSummary::new("pull-back eigenvalues +-1", tol);
  let mut rel_plus = CheckSummary::new("invariant self-dual part is a multiple of F", tol);
  let mut rel_minus = CheckSummary::new("anti-invariant part self-dual and orthogonal to F", tol);
  let mut rel_meet = CheckSummary::new("anti-invariant forms have no anti-self-dual part", tol);
  for _ in 0..cases {
    let j = random_structure(&mut rng);
    let f = pointlin::fundamental_form(&j).expect("compatible");
    let phi = random_form(&mut rng);
    let sd = pointlin::split_sd(&phi);
    let js = pointlin::split_j(&j, &phi).expect("valid structure");
    recon.record(sd.sum().max_abs_diff(&phi).max(js.sum().max_abs_diff(&phi)));
    eigen.record(
      pointlin::pull_back(&j, &js.plus)
        .max_abs_diff(&js.plus)
        .max(pointlin::pull_back(&j, &js.minus).max_abs_diff(&(-js.minus))),
    );
    let inv_sd = pointlin::split_sd(&js.plus).plus;
    // <F, F>_g = 2
    let along_f = f * (inv_sd.inner(&f) / 2.0);
    rel_plus.record(inv_sd.max_abs_diff(&along_f));
    rel_minus.record(js.minus.self_dual_residual().max(js.minus.inner(&f).abs()));
    let alpha = random_anti_invariant(&mut rng, &j, 1.0);
    rel_meet.record(pointlin::split_sd(&alpha).minus.max_abs());
  }
  vec![recon, eigen, rel_plus, rel_minus, rel_meet]
}

/// A random real trigonometric polynomial with modes `|k_i| <= bandlimit`,
/// scaled to sup norm 1.
pub fn random_bandlimited(grid: GridSpec, rng: &mut ChaCha8Rng, bandlimit: usize) -> ScalarField {
  let p = TrigPolynomial::random(rng, bandlimit as i64);
  let f = p.sample(grid);
  let sup = f.max_abs();
  if sup > 0.0 { f.map(|v| v / sup) } else { f }
}

/// `d d = 0` on functions and 1-forms, and `<d theta, phi> = <theta, delta phi>`.
pub fn calculus_checks(cases: usize, grid: GridSpec, bandlimit: usize, seed: u64) -> Vec<CheckSummary> {
  let mut rng = ChaCha8Rng::seed_from_u64(seed);
  let mut dd0 = CheckSummary::new("d d f = 0", 1e-12);
  let mut dd1 = CheckSummary::new("d d theta = 0", 1e-12);
  let mut adj = CheckSummary::new("d / delta adjointness (relative)", 1e-10);
  for _ in 0..cases {
    let f = random_bandlimited(grid, &mut rng, bandlimit);
    dd0.record(torusfield::d_oneform(&torusfield::d_scalar(&f)).max_abs());
    let theta = OneFormField::new(std::array::from_fn(|_| random_bandlimited(grid, &mut rng, bandlimit))).unwrap();
    dd1.record(torusfield::d_twoform(&torusfield::d_oneform(&theta)).max_abs());
    let phi = TwoFormField::new(std::array::from_fn(|_| random_bandlimited(grid, &mut rng, bandlimit))).unwrap();
    let lhs = torusfield::l2_inner(&torusfield::d_oneform(&theta), &phi).unwrap();
    let rhs = torusfield::l2_inner(&theta, &torusfield::codiff_twoform(&phi)).unwrap();
    adj.record((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300));
  }
  vec![dd0, dd1, adj]
}
