//! Exact linear algebra of 2-forms and almost complex structures on one
//! oriented Euclidean 4-dimensional tangent space.
//!
//! The metric is the identity bilinear form and the orientation is
//! `dx1^dx2^dx3^dx4`. A [`TwoForm`] stores its six components in the basis
//! `(e12, e13, e14, e23, e24, e34)` with `eij = dxi ^ dxj`. Every sign
//! convention of the crate follows from this ordering together with the
//! self-dual basis
//!
//! ```text
//! w1 = e12 + e34,   w2 = e13 - e24,   w3 = e14 + e23
//! ```
//!
//! An endomorphism `J` is stored as the 4x4 matrix whose `i`-th column is
//! `J e_i`. With that layout the fundamental form `F(X, Y) = g(JX, Y)` has
//! antisymmetric matrix `J^T`, the endomorphism `K_a` defined by
//! `g(X, K_a Y) = a(X, Y)` has matrix equal to the antisymmetric matrix of
//! `a`, and the pull-back `a(J., J.)` is `J^T A J`.
//!
//! Two norms are in play. [`TwoForm::inner`] is the Riemannian inner product
//! `sum_{i<j} a_ij b_ij`, so `<w1, w1> = 2`. [`paper_norm_sq`] is the norm
//! defined through `a ^ a = 2 |a|^2 dvol`, so `|w1|^2 = 1`. All deformation
//! formulas use the latter.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix4, Vector4 as NaVector4};
use thiserror::Error;

/// Absolute tolerance for algebraic identities on unit-scale inputs.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Tolerance used when validating preconditions (J^2 = -Id, self-duality, ...).
pub const PRECONDITION_TOL: f64 = 1e-9;

/// Index pairs of the six basis 2-forms, zero-based.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PointError {
  #[error("endomorphism is not an almost complex structure: |J^2 + Id| = {residual:e}")]
  NotAlmostComplex { residual: f64 },
  #[error("endomorphism is not metric compatible: |J^T J - Id| = {residual:e}")]
  NotCompatible { residual: f64 },
  #[error("2-form is not self-dual: |phi - *phi| = {residual:e}")]
  NotSelfDual { residual: f64 },
  #[error("self-dual form has wedge square {value}, expected 2")]
  BadNormalization { value: f64 },
  #[error("2-form is not J-anti-invariant: |invariant part| = {residual:e}")]
  NotAntiInvariant { residual: f64 },
  #[error("deformation form has |a|^2 = {norm_sq}, must be < 1")]
  NormTooLarge { norm_sq: f64 },
  #[error("conjugation and closed-form deformation disagree by {residual:e}")]
  FormulaMismatch { residual: f64 },
}

pub type Result<T> = std::result::Result<T, PointError>;

/// A tangent vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vector4(pub [f64; 4]);

impl Vector4 {
  pub fn basis(i: usize) -> Self {
    let mut v = [0.0; 4];
    v[i] = 1.0;
    Self(v)
  }

  pub fn dot(&self, other: &Self) -> f64 { self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum() }

  fn to_na(self) -> NaVector4<f64> { NaVector4::from(self.0) }

  fn from_na(v: NaVector4<f64>) -> Self { Self([v[0], v[1], v[2], v[3]]) }
}

/// An endomorphism of the tangent space; column `i` is the image of `e_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endomorphism4(pub Matrix4<f64>);

impl Endomorphism4 {
  pub fn identity() -> Self { Self(Matrix4::identity()) }

  pub fn zero() -> Self { Self(Matrix4::zeros()) }

  /// The standard structure `e1 -> e2, e2 -> -e1, e3 -> e4, e4 -> -e3`.
  pub fn standard() -> Self {
    let mut m = Matrix4::zeros();
    m[(1, 0)] = 1.0;
    m[(0, 1)] = -1.0;
    m[(3, 2)] = 1.0;
    m[(2, 3)] = -1.0;
    Self(m)
  }

  pub fn apply(&self, v: Vector4) -> Vector4 { Vector4::from_na(self.0 * v.to_na()) }

  pub fn compose(&self, other: &Self) -> Self { Self(self.0 * other.0) }

  pub fn transpose(&self) -> Self { Self(self.0.transpose()) }

  pub fn max_abs_diff(&self, other: &Self) -> f64 { (self.0 - other.0).amax() }

  /// `max |J^2 + Id|`.
  pub fn square_residual(&self) -> f64 { (self.0 * self.0 + Matrix4::identity()).amax() }

  /// `max |J^T J - Id|`, zero iff `g(JX, JY) = g(X, Y)`.
  pub fn orthogonality_residual(&self) -> f64 { (self.0.transpose() * self.0 - Matrix4::identity()).amax() }

  /// Row-major entries, the on-disk layout of `endo` fields.
  pub fn to_row_major(&self) -> [f64; 16] {
    let mut out = [0.0; 16];
    for i in 0..4 {
      for j in 0..4 {
        out[4 * i + j] = self.0[(i, j)];
      }
    }
    out
  }

  pub fn from_row_major(v: &[f64; 16]) -> Self { Self(Matrix4::from_row_slice(v)) }

  pub fn is_finite(&self) -> bool { self.0.iter().all(|x| x.is_finite()) }

  /// Checks `J^2 = -Id` and `J^T J = Id` within `tol`.
  pub fn check_compatible(&self, tol: f64) -> Result<()> {
    let sq = self.square_residual();
    if !(sq <= tol) {
      return Err(PointError::NotAlmostComplex { residual: sq });
    }
    let orth = self.orthogonality_residual();
    if !(orth <= tol) {
      return Err(PointError::NotCompatible { residual: orth });
    }
    Ok(())
  }
}

impl Add for Endomorphism4 {
  type Output = Self;

  fn add(self, rhs: Self) -> Self { Self(self.0 + rhs.0) }
}

impl Sub for Endomorphism4 {
  type Output = Self;

  fn sub(self, rhs: Self) -> Self { Self(self.0 - rhs.0) }
}

impl Mul<f64> for Endomorphism4 {
  type Output = Self;

  fn mul(self, rhs: f64) -> Self { Self(self.0 * rhs) }
}

/// A 2-form at a point, components in `(e12, e13, e14, e23, e24, e34)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TwoForm(pub [f64; 6]);

pub const E12: TwoForm = TwoForm([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
pub const E13: TwoForm = TwoForm([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
pub const E14: TwoForm = TwoForm([0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
pub const E23: TwoForm = TwoForm([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
pub const E24: TwoForm = TwoForm([0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
pub const E34: TwoForm = TwoForm([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);

/// Self-dual basis.
pub const OMEGA1: TwoForm = TwoForm([1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
pub const OMEGA2: TwoForm = TwoForm([0.0, 1.0, 0.0, 0.0, -1.0, 0.0]);
pub const OMEGA3: TwoForm = TwoForm([0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
pub const SELF_DUAL_BASIS: [TwoForm; 3] = [OMEGA1, OMEGA2, OMEGA3];

/// Anti-self-dual basis.
pub const OMEGA1_BAR: TwoForm = TwoForm([1.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
pub const OMEGA2_BAR: TwoForm = TwoForm([0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
pub const OMEGA3_BAR: TwoForm = TwoForm([0.0, 0.0, 1.0, -1.0, 0.0, 0.0]);
pub const ANTI_SELF_DUAL_BASIS: [TwoForm; 3] = [OMEGA1_BAR, OMEGA2_BAR, OMEGA3_BAR];

impl TwoForm {
  pub fn zero() -> Self { Self([0.0; 6]) }

  /// `sum c_i w_i` over the self-dual basis.
  pub fn from_sd_coords(c: [f64; 3]) -> Self { OMEGA1 * c[0] + OMEGA2 * c[1] + OMEGA3 * c[2] }

  /// Coordinates of the self-dual part in the `w_i` basis.
  pub fn sd_coords(&self) -> [f64; 3] { SELF_DUAL_BASIS.map(|w| self.inner(&w) / 2.0) }

  /// Riemannian inner product `sum_{i<j} a_ij b_ij`.
  pub fn inner(&self, other: &Self) -> f64 { self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum() }

  pub fn max_abs(&self) -> f64 { self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs())) }

  pub fn max_abs_diff(&self, other: &Self) -> f64 { (*self - *other).max_abs() }

  pub fn is_finite(&self) -> bool { self.0.iter().all(|x| x.is_finite()) }

  /// `phi(X, Y)`.
  pub fn eval(&self, x: Vector4, y: Vector4) -> f64 { (x.to_na().transpose() * self.to_matrix() * y.to_na())[0] }

  /// The antisymmetric matrix `A_ij = phi(e_i, e_j)`.
  pub fn to_matrix(&self) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for (c, &(i, j)) in self.0.iter().zip(PAIRS.iter()) {
      m[(i, j)] = *c;
      m[(j, i)] = -*c;
    }
    m
  }

  /// Reads the strict upper triangle; the lower triangle is ignored.
  pub fn from_matrix(m: &Matrix4<f64>) -> Self { Self(PAIRS.map(|(i, j)| m[(i, j)])) }

  /// Reads the antisymmetric part of an arbitrary matrix.
  pub fn from_matrix_antisym(m: &Matrix4<f64>) -> Self { Self(PAIRS.map(|(i, j)| 0.5 * (m[(i, j)] - m[(j, i)]))) }

  /// `|phi - *phi|`, zero iff self-dual.
  pub fn self_dual_residual(&self) -> f64 { self.max_abs_diff(&hodge_star(self)) }
}

impl Add for TwoForm {
  type Output = Self;

  fn add(self, rhs: Self) -> Self {
    let mut out = self.0;
    out.iter_mut().zip(rhs.0.iter()).for_each(|(a, b)| *a += b);
    Self(out)
  }
}

impl Sub for TwoForm {
  type Output = Self;

  fn sub(self, rhs: Self) -> Self { self + (-rhs) }
}

impl Neg for TwoForm {
  type Output = Self;

  fn neg(self) -> Self { Self(self.0.map(|x| -x)) }
}

impl Mul<f64> for TwoForm {
  type Output = Self;

  fn mul(self, rhs: f64) -> Self { Self(self.0.map(|x| x * rhs)) }
}

/// The two parts of a splitting; `plus + minus` is the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormSplit {
  pub plus:  TwoForm,
  pub minus: TwoForm,
}

impl FormSplit {
  pub fn sum(&self) -> TwoForm { self.plus + self.minus }
}

/// The coefficient `c` in `phi ^ psi = c dx1^dx2^dx3^dx4`.
pub fn wedge_to_volume(phi: &TwoForm, psi: &TwoForm) -> f64 {
  let (a, b) = (&phi.0, &psi.0);
  a[0] * b[5] + a[5] * b[0] - a[1] * b[4] - a[4] * b[1] + a[2] * b[3] + a[3] * b[2]
}

/// Euclidean Hodge star on 2-forms.
pub fn hodge_star(phi: &TwoForm) -> TwoForm {
  let a = &phi.0;
  TwoForm([a[5], -a[4], a[3], a[2], -a[1], a[0]])
}

pub fn split_sd(phi: &TwoForm) -> FormSplit {
  let star = hodge_star(phi);
  FormSplit { plus: (*phi + star) * 0.5, minus: (*phi - star) * 0.5 }
}

/// `psi(X, Y) = phi(JX, JY)`.
pub fn pull_back(j: &Endomorphism4, phi: &TwoForm) -> TwoForm {
  TwoForm::from_matrix(&(j.0.transpose() * phi.to_matrix() * j.0))
}

fn check_acs(j: &Endomorphism4) -> Result<()> {
  let residual = j.square_residual();
  if !(residual <= PRECONDITION_TOL) {
    return Err(PointError::NotAlmostComplex { residual });
  }
  Ok(())
}

/// J-invariant / J-anti-invariant splitting.
pub fn split_j(j: &Endomorphism4, phi: &TwoForm) -> Result<FormSplit> {
  check_acs(j)?;
  let pulled = pull_back(j, phi);
  Ok(FormSplit { plus: (*phi + pulled) * 0.5, minus: (*phi - pulled) * 0.5 })
}

/// `F(X, Y) = g(JX, Y)`.
pub fn fundamental_form(j: &Endomorphism4) -> Result<TwoForm> {
  j.check_compatible(PRECONDITION_TOL)?;
  Ok(TwoForm::from_matrix(&j.0.transpose()))
}

fn check_self_dual(phi: &TwoForm) -> Result<()> {
  let residual = phi.self_dual_residual();
  if !(residual <= PRECONDITION_TOL * phi.max_abs().max(1.0)) {
    return Err(PointError::NotSelfDual { residual });
  }
  Ok(())
}

/// Inverse of [`fundamental_form`]: the compatible structure whose
/// fundamental form is the given self-dual `F` with `F ^ F = 2`.
pub fn acs_from_sd_form(f: &TwoForm) -> Result<Endomorphism4> {
  check_self_dual(f)?;
  let value = wedge_to_volume(f, f);
  if !((value - 2.0).abs() <= PRECONDITION_TOL) {
    return Err(PointError::BadNormalization { value });
  }
  // Lowering the index of J with the identity metric gives F_ik = J_ki.
  Ok(Endomorphism4(f.to_matrix().transpose()))
}

/// `K_a` with `g(X, K_a Y) = a(X, Y)`.
pub fn k_endo(alpha: &TwoForm) -> Endomorphism4 { Endomorphism4(alpha.to_matrix()) }

/// `|a|^2` defined by `a ^ a = 2 |a|^2 dvol`; only meaningful for self-dual `a`.
pub fn paper_norm_sq(alpha: &TwoForm) -> Result<f64> {
  check_self_dual(alpha)?;
  Ok(wedge_to_volume(alpha, alpha) / 2.0)
}

fn check_deformation(j: &Endomorphism4, alpha: &TwoForm) -> Result<f64> {
  let split = split_j(j, alpha)?;
  let residual = split.plus.max_abs();
  if !(residual <= PRECONDITION_TOL * alpha.max_abs().max(1.0)) {
    return Err(PointError::NotAntiInvariant { residual });
  }
  let norm_sq = paper_norm_sq(alpha)?;
  if !(norm_sq < 1.0) {
    return Err(PointError::NormTooLarge { norm_sq });
  }
  Ok(norm_sq)
}

/// `(Id + J K_a)^{-1} J (Id + J K_a)`, no precondition checks.
pub fn deform_by_conjugation(j: &Endomorphism4, alpha: &TwoForm) -> Option<Endomorphism4> {
  let m = Matrix4::identity() + j.0 * k_endo(alpha).0;
  m.try_inverse().map(|inv| Endomorphism4(inv * j.0 * m))
}

/// `((1 - |a|^2) J - 2 K_a) / (1 + |a|^2)`, no precondition checks.
pub fn deform_closed_form(j: &Endomorphism4, alpha: &TwoForm, norm_sq: f64) -> Endomorphism4 {
  let denom = 1.0 + norm_sq;
  *j * ((1.0 - norm_sq) / denom) - k_endo(alpha) * (2.0 / denom)
}

/// The g-related structure `J_a`, evaluated both by conjugation and by the
/// closed form; the two must agree to [`IDENTITY_TOL`].
pub fn deform_acs(j: &Endomorphism4, alpha: &TwoForm) -> Result<Endomorphism4> {
  let norm_sq = check_deformation(j, alpha)?;
  let closed = deform_closed_form(j, alpha, norm_sq);
  let conj = deform_by_conjugation(j, alpha).ok_or(PointError::FormulaMismatch { residual: f64::INFINITY })?;
  let residual = closed.max_abs_diff(&conj);
  if !(residual <= IDENTITY_TOL) {
    return Err(PointError::FormulaMismatch { residual });
  }
  Ok(closed)
}

/// `F_a = ((1 - |a|^2) F + 2 a) / (1 + |a|^2)`, checked against the
/// fundamental form of [`deform_acs`].
pub fn f_deformed(j: &Endomorphism4, alpha: &TwoForm) -> Result<TwoForm> {
  let norm_sq = check_deformation(j, alpha)?;
  let f = fundamental_form(j)?;
  let denom = 1.0 + norm_sq;
  let closed = f * ((1.0 - norm_sq) / denom) + *alpha * (2.0 / denom);
  let via_j = fundamental_form(&deform_acs(j, alpha)?)?;
  let residual = closed.max_abs_diff(&via_j);
  if !(residual <= IDENTITY_TOL) {
    return Err(PointError::FormulaMismatch { residual });
  }
  Ok(closed)
}

/// The induced complex structure on anti-invariant forms, `(Ja)(X, Y) = -a(JX, Y)`.
pub fn j_act_anti(j: &Endomorphism4, alpha: &TwoForm) -> Result<TwoForm> {
  let split = split_j(j, alpha)?;
  let residual = split.plus.max_abs();
  if !(residual <= PRECONDITION_TOL * alpha.max_abs().max(1.0)) {
    return Err(PointError::NotAntiInvariant { residual });
  }
  Ok(TwoForm::from_matrix(&(-(j.0.transpose() * alpha.to_matrix()))))
}

#[cfg(test)]
mod tests {
  use super::*;

  fn close(a: &TwoForm, b: &TwoForm) -> bool { a.max_abs_diff(b) <= 1e-12 }

  /// Brute-force wedge: sum over all permutations of the alternation.
  fn wedge_oracle(phi: &TwoForm, psi: &TwoForm) -> f64 {
    let a = phi.to_matrix();
    let b = psi.to_matrix();
    let mut total = 0.0;
    let perms = permutations4();
    for p in perms {
      total += sign(&p) * a[(p[0], p[1])] * b[(p[2], p[3])];
    }
    total / 4.0
  }

  fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
      for b in 0..4 {
        for c in 0..4 {
          for d in 0..4 {
            let p = [a, b, c, d];
            let mut seen = [false; 4];
            p.iter().for_each(|&i| seen[i] = true);
            if seen.iter().all(|&s| s) {
              out.push(p);
            }
          }
        }
      }
    }
    out
  }

  fn sign(p: &[usize; 4]) -> f64 {
    let mut inv = 0;
    for i in 0..4 {
      for j in i + 1..4 {
        if p[i] > p[j] {
          inv += 1;
        }
      }
    }
    if inv % 2 == 0 { 1.0 } else { -1.0 }
  }

  #[test]
  fn wedge_examples() {
    assert_eq!(wedge_to_volume(&E12, &E34), 1.0);
    assert_eq!(wedge_to_volume(&OMEGA1, &OMEGA1), 2.0);
    assert_eq!(wedge_to_volume(&OMEGA1, &OMEGA2), 0.0);
    assert_eq!(wedge_oracle(&OMEGA1, &OMEGA2), 0.0);
    let phi = TwoForm([0.3, -1.2, 0.7, 2.0, 0.1, -0.4]);
    let psi = TwoForm([1.1, 0.5, -0.9, 0.2, 1.7, 0.6]);
    assert!((wedge_to_volume(&phi, &psi) - wedge_oracle(&phi, &psi)).abs() < 1e-14);
    assert!((wedge_to_volume(&phi, &psi) - wedge_to_volume(&psi, &phi)).abs() < 1e-15);
  }

  #[test]
  fn hodge_star_matches_defining_identity() {
    assert!(close(&hodge_star(&E12), &E34));
    assert!(close(&hodge_star(&OMEGA1), &OMEGA1));
    assert!(close(&hodge_star(&E13), &(-E24)));
    // psi ^ *phi = <psi, phi> dvol on every basis pair
    let basis = [E12, E13, E14, E23, E24, E34];
    for a in &basis {
      for b in &basis {
        assert_eq!(wedge_to_volume(a, &hodge_star(b)), a.inner(b));
      }
    }
    for w in SELF_DUAL_BASIS {
      assert!(close(&hodge_star(&w), &w));
    }
    for w in ANTI_SELF_DUAL_BASIS {
      assert!(close(&hodge_star(&w), &(-w)));
    }
  }

  #[test]
  fn split_sd_examples() {
    let s = split_sd(&OMEGA2);
    assert!(close(&s.plus, &OMEGA2) && close(&s.minus, &TwoForm::zero()));
    let s = split_sd(&E12);
    assert!(close(&s.plus, &((E12 + E34) * 0.5)));
    assert!(close(&s.minus, &((E12 - E34) * 0.5)));
  }

  #[test]
  fn pull_back_examples() {
    let j0 = Endomorphism4::standard();
    assert!(close(&pull_back(&j0, &OMEGA1), &OMEGA1));
    assert!(close(&pull_back(&j0, &OMEGA2), &(-OMEGA2)));
    let phi = TwoForm([0.3, -1.2, 0.7, 2.0, 0.1, -0.4]);
    assert!(close(&pull_back(&Endomorphism4::identity(), &phi), &phi));
    // definition on basis vectors
    for i in 0..4 {
      for k in 0..4 {
        let (x, y) = (Vector4::basis(i), Vector4::basis(k));
        let lhs = pull_back(&j0, &phi).eval(x, y);
        let rhs = phi.eval(j0.apply(x), j0.apply(y));
        assert!((lhs - rhs).abs() < 1e-14);
      }
    }
  }

  #[test]
  fn split_j_examples() {
    let j0 = Endomorphism4::standard();
    let s = split_j(&j0, &OMEGA2).unwrap();
    assert!(close(&s.plus, &TwoForm::zero()) && close(&s.minus, &OMEGA2));
    let s = split_j(&j0, &OMEGA1).unwrap();
    assert!(close(&s.plus, &OMEGA1) && close(&s.minus, &TwoForm::zero()));
    let s = split_j(&j0, &OMEGA1_BAR).unwrap();
    assert!(close(&s.plus, &OMEGA1_BAR) && close(&s.minus, &TwoForm::zero()));
    assert!(matches!(
      split_j(&(j0 * 2.0), &OMEGA1),
      Err(PointError::NotAlmostComplex { .. })
    ));
  }

  #[test]
  fn fundamental_form_examples() {
    let j0 = Endomorphism4::standard();
    assert!(close(&fundamental_form(&j0).unwrap(), &OMEGA1));
    assert!(close(&fundamental_form(&(j0 * -1.0)).unwrap(), &(-OMEGA1)));
    let f = fundamental_form(&j0).unwrap();
    assert_eq!(f.inner(&f), 2.0);
    // F(X, Y) = g(JX, Y)
    for i in 0..4 {
      for k in 0..4 {
        let (x, y) = (Vector4::basis(i), Vector4::basis(k));
        assert_eq!(f.eval(x, y), j0.apply(x).dot(&y));
      }
    }
    let mut skew = Endomorphism4::standard();
    skew.0[(0, 0)] = 0.1;
    assert!(fundamental_form(&skew).is_err());
  }

  #[test]
  fn acs_from_sd_form_examples() {
    let j0 = Endomorphism4::standard();
    assert!(acs_from_sd_form(&OMEGA1).unwrap().max_abs_diff(&j0) < 1e-15);
    let j2 = acs_from_sd_form(&OMEGA2).unwrap();
    assert!(close(&fundamental_form(&j2).unwrap(), &OMEGA2));
    let t: f64 = 0.5;
    let f = OMEGA1 * ((1.0 - t * t) / (1.0 + t * t)) + OMEGA2 * (2.0 * t / (1.0 + t * t));
    let via_f = acs_from_sd_form(&f).unwrap();
    let via_deform = deform_acs(&j0, &(OMEGA2 * t)).unwrap();
    assert!(via_f.max_abs_diff(&via_deform) < 1e-12);
    assert!(matches!(acs_from_sd_form(&E12), Err(PointError::NotSelfDual { .. })));
    assert!(matches!(
      acs_from_sd_form(&(OMEGA1 * 2.0)),
      Err(PointError::BadNormalization { .. })
    ));
  }

  #[test]
  fn k_endo_examples() {
    let k = k_endo(&OMEGA2);
    assert_eq!(k.apply(Vector4::basis(2)), Vector4::basis(0));
    assert_eq!(k.apply(Vector4::basis(0)), Vector4([0.0, 0.0, -1.0, 0.0]));
    assert_eq!(k.apply(Vector4::basis(3)), Vector4([0.0, -1.0, 0.0, 0.0]));
    assert_eq!(k.apply(Vector4::basis(1)), Vector4::basis(3));
    assert_eq!(k_endo(&TwoForm::zero()), Endomorphism4::zero());
    let a = TwoForm([0.3, -1.2, 0.7, 2.0, 0.1, -0.4]);
    let k = k_endo(&a);
    assert_eq!((k.0 + k.0.transpose()).amax(), 0.0);
    for i in 0..4 {
      for m in 0..4 {
        let (x, y) = (Vector4::basis(i), Vector4::basis(m));
        assert_eq!(x.dot(&k.apply(y)), a.eval(x, y));
      }
    }
  }

  #[test]
  fn norm_sq_examples() {
    assert_eq!(paper_norm_sq(&OMEGA2).unwrap(), 1.0);
    assert!((paper_norm_sq(&(OMEGA2 * 0.7)).unwrap() - 0.49).abs() < 1e-15);
    let (a, b) = (0.3, -0.8);
    assert!((paper_norm_sq(&(OMEGA2 * a + OMEGA3 * b)).unwrap() - (a * a + b * b)).abs() < 1e-15);
    assert!(matches!(paper_norm_sq(&OMEGA1_BAR), Err(PointError::NotSelfDual { .. })));
  }

  #[test]
  fn deform_acs_examples() {
    let j0 = Endomorphism4::standard();
    assert!(deform_acs(&j0, &TwoForm::zero()).unwrap().max_abs_diff(&j0) < 1e-15);
    // |0.5 w2|^2 = 0.25, so J_a = 0.6 J0 - 1.6 K_{0.5 w2} = 0.6 J0 - 0.8 K_{w2}
    let ja = deform_acs(&j0, &(OMEGA2 * 0.5)).unwrap();
    let expected = j0 * 0.6 - k_endo(&OMEGA2) * 0.8;
    assert!(ja.max_abs_diff(&expected) < 1e-15);
    assert!(ja.square_residual() < 1e-15);
    for t in [0.9, 0.99, 0.999] {
      let ja = deform_acs(&j0, &(OMEGA2 * t)).unwrap();
      assert!(ja.square_residual() < 1e-12);
      let f = fundamental_form(&ja).unwrap();
      assert!(f.sd_coords()[1] > 2.0 * t / (1.0 + t * t) - 1e-12);
    }
    assert!(matches!(deform_acs(&j0, &OMEGA1), Err(PointError::NotAntiInvariant { .. })));
    assert!(matches!(deform_acs(&j0, &OMEGA2), Err(PointError::NormTooLarge { .. })));
  }

  #[test]
  fn f_deformed_examples() {
    let j0 = Endomorphism4::standard();
    assert!(close(&f_deformed(&j0, &TwoForm::zero()).unwrap(), &OMEGA1));
    let f = f_deformed(&j0, &(OMEGA2 * 0.5)).unwrap();
    assert!(close(&f, &(OMEGA1 * 0.6 + OMEGA2 * 0.8)));
    assert!((paper_norm_sq(&f).unwrap() - 1.0).abs() < 1e-15);
  }

  #[test]
  fn j_act_anti_examples() {
    let j0 = Endomorphism4::standard();
    assert!(close(&j_act_anti(&j0, &OMEGA2).unwrap(), &OMEGA3));
    assert!(close(&j_act_anti(&j0, &OMEGA3).unwrap(), &(-OMEGA2)));
    assert!(close(&j_act_anti(&j0, &TwoForm::zero()).unwrap(), &TwoForm::zero()));
    assert!(j_act_anti(&j0, &OMEGA1).is_err());
  }

  #[test]
  fn sd_coords_round_trip() {
    let c = [0.2, -0.7, 1.3];
    let back = TwoForm::from_sd_coords(c).sd_coords();
    for i in 0..3 {
      assert!((back[i] - c[i]).abs() < 1e-15);
    }
  }
}
