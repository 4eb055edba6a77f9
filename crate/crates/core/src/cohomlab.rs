//! Dimension of the J-anti-invariant cohomology on the flat torus.
//!
//! # Gram method
//!
//! On the flat torus every harmonic form has constant coefficients, so the
//! self-dual harmonic space is spanned by the constant fields `w1, w2, w3`.
//! A closed J-anti-invariant 2-form is self-dual, hence harmonic, hence one
//! of these constants `b`. A self-dual form lies in `Lambda_J^-` exactly when
//! it is orthogonal to `F`, because `Lambda^+ = R F + Lambda_J^-`
//! orthogonally. So `b = sum v_i w_i` represents a class in `H_J^-` iff
//! `f_b(x) = <b, F(x)> = sum v_i f_{w_i}(x)` vanishes at every point, iff
//! `v^T G v = integral f_b^2 = 0` for the Gram matrix
//! `G_ij = integral f_{w_i} f_{w_j}`. Thus `h_J^- = dim ker G`.
//!
//! # Elliptic oracle
//!
//! [`lejmi_kernel_dim`] discretizes `psi -> P_J^-(d delta psi)` on sections
//! of `Lambda_J^-` and counts its numerically zero singular values; it is an
//! independent check of the Gram count at low resolution.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hermitian::{pivoted_complement, HermitianTriple};
use crate::pointlin::{TwoForm, SELF_DUAL_BASIS};
use crate::torusfield::{self, FieldError, FormField, GridSpec, ScalarField, TwoFormField};

/// Relative null threshold of the Gram matrix.
pub const DEFAULT_TOL_NULL: f64 = 1e-7;

/// Relative threshold for "f_w does not vanish" in [`v_measure`].
pub const DEFAULT_EPS_NODAL: f64 = 1e-6;

/// Relative singular-value threshold of the elliptic oracle.
pub const DEFAULT_LEJMI_TOL: f64 = 1e-8;

/// Largest number of unknowns (`2 n^4`) for the dense elliptic oracle,
/// about 130 MB for the assembled matrix.
pub const MAX_LEJMI_UNKNOWNS: usize = 4096;

/// Principal-angle threshold (radians) for subspace equality.
pub const ANGLE_TOL: f64 = 1e-3;

pub const B_PLUS: usize = 3;
pub const B2: usize = 6;

#[derive(Debug, Error)]
pub enum CohomError {
  #[error(transparent)]
  Field(#[from] FieldError),
  #[error("form is not self-dual (residual {0:e})")]
  NotSelfDual(f64),
  #[error("invalid parameter: {0}")]
  InvalidParameter(String),
  #[error("S_J is empty: every self-dual harmonic form is anti-invariant")]
  EmptySphere,
  #[error("elliptic oracle needs {unknowns} unknowns, above the bound {max}")]
  MemoryBound { unknowns: usize, max: usize },
  #[error("assembled operator is not symmetric: residual {residual:e} relative to {scale:e}")]
  NonSymmetric { residual: f64, scale: f64 },
  #[error("eigenvalue computation failed: {0}")]
  Eigen(String),
  #[error(transparent)]
  Io(#[from] std::io::Error),
  #[error(transparent)]
  Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CohomError>;

/// The constant self-dual harmonic forms `w1, w2, w3` on a grid.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
  forms: [TwoFormField; 3],
}

impl HarmonicBasis {
  pub fn new(grid: GridSpec) -> Self { Self { forms: SELF_DUAL_BASIS.map(|w| TwoFormField::constant(grid, w)) } }

  pub fn form(&self, i: usize) -> &TwoFormField { &self.forms[i] }

  pub fn forms(&self) -> &[TwoFormField; 3] { &self.forms }

  /// Constant field `sum c_i w_i`.
  pub fn combination(grid: GridSpec, c: [f64; 3]) -> TwoFormField { TwoFormField::constant(grid, TwoForm::from_sd_coords(c)) }
}

/// `f_w(x) = <w(x), F(x)>` for a self-dual field `w`.
pub fn f_omega(triple: &HermitianTriple, omega: &TwoFormField) -> Result<ScalarField> {
  let grid = triple.grid();
  if omega.grid() != grid {
    return Err(FieldError::GridMismatch { left: grid.n(), right: omega.grid().n() }.into());
  }
  let residual = omega.self_dual_residual();
  if !(residual <= 1e-9 * omega.max_abs().max(1.0)) {
    return Err(CohomError::NotSelfDual(residual));
  }
  let f = triple.f();
  let values = (0..grid.node_count()).into_par_iter().map(|i| omega.at(i).inner(&f.at(i))).collect();
  Ok(ScalarField::new(grid, values)?)
}

/// `f_{w_i}` for the three basis forms, as nodal vectors `phi(x)`.
fn basis_profiles(triple: &HermitianTriple) -> Vec<[f64; 3]> {
  let f = triple.f();
  (0..triple.grid().node_count())
    .into_par_iter()
    .map(|i| {
      let fx = f.at(i);
      SELF_DUAL_BASIS.map(|w| w.inner(&fx))
    })
    .collect()
}

/// Gram matrix of the `f_{w_i}` functions with its spectral data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
  pub grid_n:          usize,
  pub matrix:          [[f64; 3]; 3],
  /// Ascending.
  pub eigenvalues:     [f64; 3],
  /// `eigenvectors[k]` belongs to `eigenvalues[k]`, in `w`-coordinates.
  pub eigenvectors:    [[f64; 3]; 3],
  pub tol_rel:         f64,
  /// Absolute null threshold `tol_rel * max(1, lambda_max)`.
  pub tolerance:       f64,
  pub h_minus:         usize,
  /// Canonical orthonormal basis of the null space, `w`-coordinates.
  pub null_basis:      Vec<[f64; 3]>,
  /// Eigenvectors of the non-null eigenvalues.
  pub non_null_basis:  Vec<[f64; 3]>,
  /// Relative paths of dumped null-form fields, filled by [`GramReport::write_json`].
  #[serde(default)]
  pub null_form_files: Vec<String>,
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 { a[0] * b[0] + a[1] * b[1] + a[2] * b[2] }

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
  [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize3(a: [f64; 3]) -> [f64; 3] {
  let n = dot3(&a, &a).sqrt();
  a.map(|x| x / n)
}

/// Orthonormal basis of `span(vectors)` chosen independently of the input
/// basis: greedy Gram-Schmidt on the projections of the coordinate axes,
/// always taking the axis with the largest remaining component (lowest index
/// on ties).
fn canonical_basis(vectors: &[[f64; 3]]) -> Vec<[f64; 3]> {
  let project = |e: &[f64; 3]| -> [f64; 3] {
    let mut out = [0.0; 3];
    for v in vectors {
      let c = dot3(v, e);
      for k in 0..3 {
        out[k] += c * v[k];
      }
    }
    out
  };
  let mut basis: Vec<[f64; 3]> = Vec::new();
  while basis.len() < vectors.len() {
    let mut best: Option<([f64; 3], f64)> = None;
    for i in 0..3 {
      let mut e = [0.0; 3];
      e[i] = 1.0;
      let mut w = project(&e);
      for b in &basis {
        let c = dot3(b, &w);
        for k in 0..3 {
          w[k] -= c * b[k];
        }
      }
      let norm = dot3(&w, &w).sqrt();
      if best.is_none_or(|(_, m)| norm > m + 1e-12) {
        best = Some((w, norm));
      }
    }
    let (w, _) = best.unwrap();
    basis.push(normalize3(w));
  }
  basis
}

impl GramReport {
  pub fn lambda_min(&self) -> f64 { self.eigenvalues[0] }

  pub fn lambda_max(&self) -> f64 { self.eigenvalues[2] }

  /// Constant null-form fields normalized to `integral a^2 = 1`.
  pub fn null_forms(&self, grid: GridSpec) -> Vec<TwoFormField> {
    self.null_basis.iter().map(|v| HarmonicBasis::combination(grid, v.map(|x| x * std::f64::consts::FRAC_1_SQRT_2))).collect()
  }

  /// Deformation direction for a cut-off construction: among the canonical
  /// null basis vectors, the one whose Rayleigh quotient sits furthest below
  /// the threshold; ties go to the lexicographically greatest coefficients.
  pub fn preferred_null_direction(&self) -> Option<[f64; 3]> {
    let g = Matrix3::from_fn(|i, j| self.matrix[i][j]);
    let margin = |v: &[f64; 3]| {
      let v = nalgebra::Vector3::from(*v);
      self.tolerance - (v.transpose() * g * v)[0]
    };
    let tie = 1e-12 * self.tolerance.max(1e-300);
    self.null_basis.iter().copied().reduce(|best, v| {
      let (mb, mv) = (margin(&best), margin(&v));
      if mv > mb + tie {
        v
      } else if (mv - mb).abs() <= tie && v.partial_cmp(&best) == Some(std::cmp::Ordering::Greater) {
        v
      } else {
        best
      }
    })
  }

  /// Writes the null forms as field files next to `<stem>.gram.json`.
  pub fn write_json(&self, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let grid = GridSpec::new(self.grid_n)?;
    let mut report = self.clone();
    report.null_form_files.clear();
    for (k, form) in self.null_forms(grid).iter().enumerate() {
      let name = format!("{stem}.null{k}.ajc");
      torusfield::serialize_field(form, dir.join(&name))?;
      report.null_form_files.push(name);
    }
    let path = dir.join(format!("{stem}.gram.json"));
    fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    Ok(path)
  }
}

/// `G_ij = integral f_{w_i} f_{w_j}`; `h_minus` counts eigenvalues at or
/// below `tol_rel * max(1, lambda_max)`.
pub fn gram_matrix(triple: &HermitianTriple, tol_rel: f64) -> GramReport {
  let profiles = basis_profiles(triple);
  let count = profiles.len() as f64;
  let sums = profiles
    .par_iter()
    .fold(
      || [[0.0; 3]; 3],
      |mut acc, p| {
        for i in 0..3 {
          for j in 0..3 {
            acc[i][j] += p[i] * p[j];
          }
        }
        acc
      },
    )
    .reduce(
      || [[0.0; 3]; 3],
      |mut a, b| {
        for i in 0..3 {
          for j in 0..3 {
            a[i][j] += b[i][j];
          }
        }
        a
      },
    );
  let mut matrix = [[0.0; 3]; 3];
  for i in 0..3 {
    for j in 0..3 {
      // symmetrize exactly; the two sums are identical up to ordering
      matrix[i][j] = 0.5 * (sums[i][j] + sums[j][i]) / count;
    }
  }
  let eig = SymmetricEigen::new(Matrix3::from_fn(|i, j| matrix[i][j]));
  let mut order = [0usize, 1, 2];
  order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
  let eigenvalues = order.map(|k| eig.eigenvalues[k]);
  let eigenvectors = order.map(|k| {
    let c = eig.eigenvectors.column(k);
    [c[0], c[1], c[2]]
  });
  let tolerance = tol_rel * eigenvalues[2].max(1.0);
  let h_minus = eigenvalues.iter().filter(|&&l| l <= tolerance).count();
  let null_vectors: Vec<[f64; 3]> = eigenvectors[..h_minus].to_vec();
  GramReport {
    grid_n: triple.grid().n(),
    matrix,
    eigenvalues,
    eigenvectors,
    tol_rel,
    tolerance,
    h_minus,
    null_basis: canonical_basis(&null_vectors),
    non_null_basis: eigenvectors[h_minus..].to_vec(),
    null_form_files: Vec::new(),
  }
}

/// `h_J^+ = b_2 - h_J^-`.
pub fn h_plus(report: &GramReport) -> usize { B2 - report.h_minus }

/// Fraction of nodes where `|f_w| > eps * max(1, sup |f_w|)`.
pub fn v_measure(triple: &HermitianTriple, omega: &TwoFormField, eps: f64) -> Result<f64> {
  if !(eps > 0.0) {
    return Err(CohomError::InvalidParameter(format!("eps must be positive, got {eps}")));
  }
  let f = f_omega(triple, omega)?;
  Ok(nonvanishing_fraction(f.values(), eps))
}

fn nonvanishing_fraction(values: &[f64], eps: f64) -> f64 {
  let sup = values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
  let threshold = eps * sup.max(1.0);
  values.iter().filter(|x| x.abs() > threshold).count() as f64 / values.len() as f64
}

/// Estimate of `delta_J = inf V(w)` over the sphere `integral w^2 = 1` in
/// the non-null Gram directions.
pub fn delta_j_estimate(triple: &HermitianTriple, samples: usize, eps: f64) -> Result<f64> {
  let report = gram_matrix(triple, DEFAULT_TOL_NULL);
  delta_j_estimate_with(triple, &report, samples, eps)
}

/// Sample directions on the unit sphere of `R^dim` (dim 1, 2 or 3): golden
/// ratio angles on the circle, a Fibonacci lattice on the 2-sphere.
pub fn low_discrepancy_sphere(dim: usize, samples: usize) -> Vec<Vec<f64>> {
  let golden = (5f64.sqrt() - 1.0) / 2.0;
  let tau = 2.0 * std::f64::consts::PI;
  match dim {
    1 => vec![vec![1.0]],
    2 => (0..samples).map(|k| {
      let t = tau * (k as f64 * golden).fract();
      vec![t.cos(), t.sin()]
    })
    .collect(),
    3 => (0..samples)
      .map(|k| {
        let z = 1.0 - (2.0 * k as f64 + 1.0) / samples as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let t = tau * (k as f64 * golden).fract();
        vec![r * t.cos(), r * t.sin(), z]
      })
      .collect(),
    _ => Vec::new(),
  }
}

/// [`delta_j_estimate`] against an existing Gram report.
///
/// The sampled set is the low-discrepancy points plus, for each of the most
/// frequent nodal profile directions, the sphere points annihilating it.
/// `V` is discontinuous exactly at such points (where `f_w` vanishes on a
/// whole region), so pure sampling would overestimate the infimum.
pub fn delta_j_estimate_with(triple: &HermitianTriple, report: &GramReport, samples: usize, eps: f64) -> Result<f64> {
  if samples == 0 {
    return Err(CohomError::InvalidParameter("samples must be >= 1".into()));
  }
  if !(eps > 0.0) {
    return Err(CohomError::InvalidParameter(format!("eps must be positive, got {eps}")));
  }
  let basis = &report.non_null_basis;
  let dim = basis.len();
  if dim == 0 {
    return Err(CohomError::EmptySphere);
  }
  let profiles = basis_profiles(triple);
  // nodal profiles expressed in the sphere's coordinates
  let reduced: Vec<Vec<f64>> = profiles.iter().map(|p| basis.iter().map(|b| dot3(b, p)).collect()).collect();

  let mut directions = low_discrepancy_sphere(dim, samples);
  if dim >= 2 {
    let mut groups: HashMap<Vec<i64>, (usize, Vec<f64>)> = HashMap::new();
    for r in &reduced {
      let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
      if norm == 0.0 {
        continue;
      }
      let unit: Vec<f64> = r.iter().map(|x| x / norm).collect();
      let key = unit.iter().map(|x| (x * 1e9).round() as i64).collect();
      groups.entry(key).or_insert((0, unit)).0 += 1;
    }
    let mut ranked: Vec<(usize, Vec<i64>, Vec<f64>)> = groups.into_iter().map(|(k, (c, u))| (c, k, u)).collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.truncate(16);
    let units: Vec<Vec<f64>> = ranked.into_iter().map(|r| r.2).collect();
    if dim == 2 {
      directions.extend(units.iter().map(|u| vec![-u[1], u[0]]));
    } else {
      for i in 0..units.len() {
        for j in i + 1..units.len() {
          let c = cross3(&[units[i][0], units[i][1], units[i][2]], &[units[j][0], units[j][1], units[j][2]]);
          let n = dot3(&c, &c).sqrt();
          if n > 1e-9 {
            directions.push(c.map(|x| x / n).to_vec());
          }
        }
      }
    }
  }

  let min = directions
    .par_iter()
    .map(|s| {
      // integral w^2 = 1 for w = sum v_i w_i means |v| = 1/sqrt(2)
      let values: Vec<f64> = reduced
        .iter()
        .map(|r| r.iter().zip(s.iter()).map(|(a, b)| a * b).sum::<f64>() * std::f64::consts::FRAC_1_SQRT_2)
        .collect();
      nonvanishing_fraction(&values, eps)
    })
    .reduce(|| f64::INFINITY, f64::min);
  Ok(min)
}

/// Summary of the discretized elliptic operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LejmiReport {
  pub grid_n:                  usize,
  /// Unknowns of the discrete section space, `2 n^4`.
  pub unknowns:                usize,
  /// Fourier modes per coefficient that the spectral derivative resolves.
  pub retained_modes:          usize,
  pub smallest_singular_values: Vec<f64>,
  pub largest_singular_value:  f64,
  pub symmetry_residual:       f64,
  pub tolerance:               f64,
  pub kernel_dim:              usize,
}

/// Kernel dimension of `psi -> P_J^-(d delta psi)` on `Lambda_J^-` sections.
///
/// Sections are `c1(x) e1(x) + c2(x) e2(x)` with `(e1, e2)` the pivoted
/// g-orthonormal frame of the complement of `F(x)`. Modes with a Nyquist
/// component are invisible to the spectral derivative and would add spurious
/// kernel; they are given the exact Laplacian eigenvalue bound `(pi n)^2`
/// instead, so the discrete kernel is the set of sections that are constant
/// and resolved. The triple must be built on `oracle_grid`.
pub fn lejmi_kernel_dim(triple: &HermitianTriple, oracle_grid: GridSpec, tau: f64) -> Result<LejmiReport> {
  let grid = triple.grid();
  if grid != oracle_grid {
    return Err(FieldError::GridMismatch { left: grid.n(), right: oracle_grid.n() }.into());
  }
  if !(tau > 0.0) {
    return Err(CohomError::InvalidParameter(format!("tau must be positive, got {tau}")));
  }
  let nodes = grid.node_count();
  let unknowns = 2 * nodes;
  if unknowns > MAX_LEJMI_UNKNOWNS {
    return Err(CohomError::MemoryBound { unknowns, max: MAX_LEJMI_UNKNOWNS });
  }
  let n = grid.n();

  // g-orthonormal frame per node: |e|_g = 1 means self-dual coordinates 1/sqrt(2)
  let frames: Vec<[TwoForm; 2]> = (0..nodes)
    .map(|i| {
      let u = normalize3(triple.f().at(i).sd_coords());
      pivoted_complement(u).map(|v| TwoForm::from_sd_coords(v) * std::f64::consts::FRAC_1_SQRT_2)
    })
    .collect();

  // Translation-invariant response of d delta + (pi n)^2 Pi_nyquist to a unit
  // impulse at the origin in each of the six components.
  let nyquist_weight = (std::f64::consts::PI * n as f64).powi(2);
  let responses: Vec<[Vec<f64>; 6]> = (0..6)
    .into_par_iter()
    .map(|b| {
      let mut comps: [ScalarField; 6] = std::array::from_fn(|_| ScalarField::zeros(grid));
      let mut impulse = vec![0.0; nodes];
      impulse[0] = 1.0;
      comps[b] = ScalarField::new(grid, impulse).unwrap();
      let psi = TwoFormField::new(comps).unwrap();
      let ddelta = torusfield::d_oneform(&torusfield::codiff_twoform(&psi));
      std::array::from_fn(|a| {
        let nyq = torusfield::nyquist_part(psi.component(a));
        ddelta.component(a).values().iter().zip(nyq.values().iter()).map(|(x, y)| x + nyquist_weight * y).collect()
      })
    })
    .collect();

  let diff_index = |x: usize, y: usize| -> usize {
    let (mx, my) = (grid.multi_index(x), grid.multi_index(y));
    grid.index(std::array::from_fn(|k| (mx[k] + n - my[k]) % n))
  };

  let rows: Vec<Vec<f64>> = (0..nodes)
    .into_par_iter()
    .flat_map_iter(|x| {
      let mut r = vec![vec![0.0; unknowns]; 2];
      for y in 0..nodes {
        let z = diff_index(x, y);
        // response at x to the unit impulses at y, contracted with e_l(y)
        for (l, el) in frames[y].iter().enumerate() {
          let mut out = [0.0; 6];
          for b in 0..6 {
            let w = el.0[b];
            if w != 0.0 {
              for a in 0..6 {
                out[a] += w * responses[b][a][z];
              }
            }
          }
          for (k, ek) in frames[x].iter().enumerate() {
            r[k][2 * y + l] = ek.inner(&TwoForm(out));
          }
        }
      }
      r.into_iter()
    })
    .collect();

  let matrix = faer::Mat::<f64>::from_fn(unknowns, unknowns, |i, j| rows[i][j]);
  let scale = rows.iter().flat_map(|r| r.iter()).fold(0.0_f64, |m, x| m.max(x.abs()));
  let mut symmetry_residual = 0.0_f64;
  for i in 0..unknowns {
    for j in i + 1..unknowns {
      symmetry_residual = symmetry_residual.max((rows[i][j] - rows[j][i]).abs());
    }
  }
  if !(symmetry_residual <= 1e-9 * scale) {
    return Err(CohomError::NonSymmetric { residual: symmetry_residual, scale });
  }
  drop(rows);

  let eig = matrix
    .self_adjoint_eigenvalues(faer::Side::Lower)
    .map_err(|e| CohomError::Eigen(format!("{e:?}")))?;
  let mut singular: Vec<f64> = eig.iter().map(|x| x.abs()).collect();
  singular.sort_by(f64::total_cmp);
  let largest = *singular.last().unwrap();
  let kernel_dim = singular.iter().filter(|&&s| s <= tau * largest).count();
  Ok(LejmiReport {
    grid_n: n,
    unknowns,
    retained_modes: (n - 1).pow(4),
    smallest_singular_values: singular.iter().take(8).copied().collect(),
    largest_singular_value: largest,
    symmetry_residual,
    tolerance: tau,
    kernel_dim,
  })
}

/// Principal angles (radians, ascending) between the spans of two
/// orthonormal families in `R^3`.
pub fn principal_angles(a: &[[f64; 3]], b: &[[f64; 3]]) -> Vec<f64> {
  if a.is_empty() || b.is_empty() {
    return Vec::new();
  }
  let c = DMatrix::from_fn(a.len(), b.len(), |i, j| dot3(&a[i], &b[j]));
  let mut angles: Vec<f64> = c.singular_values().iter().map(|s| s.min(1.0).acos()).collect();
  angles.sort_by(f64::total_cmp);
  angles
}

/// `dim(N1 ∩ N2)` for the Gram null spaces of two reports.
pub fn intersection_dim_of(r1: &GramReport, r2: &GramReport) -> usize {
  principal_angles(&r1.null_basis, &r2.null_basis).iter().filter(|&&t| t < ANGLE_TOL).count()
}

/// Dimension of `H_{J1}^- ∩ H_{J2}^-`.
pub fn intersection_dim(j1: &HermitianTriple, j2: &HermitianTriple) -> Result<usize> {
  if j1.grid() != j2.grid() {
    return Err(FieldError::GridMismatch { left: j1.grid().n(), right: j2.grid().n() }.into());
  }
  Ok(intersection_dim_of(&gram_matrix(j1, DEFAULT_TOL_NULL), &gram_matrix(j2, DEFAULT_TOL_NULL)))
}

/// Whether every null direction of `sub` lies in the null space of `sup`
/// (all principal angles below `max_angle`).
pub fn null_space_contained(sub: &GramReport, sup: &GramReport, max_angle: f64) -> bool {
  if sub.h_minus == 0 {
    return true;
  }
  if sub.h_minus > sup.h_minus {
    return false;
  }
  let angles = principal_angles(&sub.null_basis, &sup.null_basis);
  angles.len() == sub.h_minus && angles.iter().all(|&t| t < max_angle)
}

/// Largest principal angle between `sub`'s null space and its best match
/// inside the span of `target` (orthonormal), `0` for an empty `sub`.
pub fn max_principal_angle(sub: &[[f64; 3]], target: &[[f64; 3]]) -> f64 {
  if sub.is_empty() {
    return 0.0;
  }
  if target.len() < sub.len() {
    return std::f64::consts::FRAC_PI_2;
  }
  principal_angles(sub, target).into_iter().take(sub.len()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
  use super::*;
  use crate::hermitian::{self, standard_acs, DeformOptions};
  use crate::pointlin::{OMEGA1, OMEGA2, OMEGA3};
  use crate::torusfield::BumpParams;

  fn grid(n: usize) -> GridSpec { GridSpec::new(n).unwrap() }

  fn constant_triple(n: usize, f: TwoForm) -> HermitianTriple {
    HermitianTriple::from_fundamental_form(TwoFormField::constant(grid(n), f)).unwrap()
  }

  fn one_bump(n: usize) -> HermitianTriple {
    let bump = BumpParams::new([0.5; 4], 0.15, 0.5);
    hermitian::one_bump_deform(&standard_acs(grid(n)), &bump, &DeformOptions::default()).unwrap().0
  }

  #[test]
  fn harmonic_basis_is_orthonormal_in_cup_product() {
    let basis = HarmonicBasis::new(grid(4));
    for i in 0..3 {
      for j in 0..3 {
        let w = torusfield::wedge_integral(basis.form(i), basis.form(j)).unwrap();
        assert!((w - if i == j { 2.0 } else { 0.0 }).abs() < 1e-14);
      }
      assert!(torusfield::d_twoform(basis.form(i)).max_abs() < 1e-14);
    }
  }

  #[test]
  fn f_omega_examples() {
    let j0 = standard_acs(grid(4));
    let g = grid(4);
    let f1 = f_omega(&j0, &TwoFormField::constant(g, OMEGA1)).unwrap();
    assert!(f1.values().iter().all(|&v| (v - 2.0).abs() < 1e-15));
    let f2 = f_omega(&j0, &TwoFormField::constant(g, OMEGA2)).unwrap();
    assert!(f2.max_abs() < 1e-15);
    let deformed = constant_triple(4, OMEGA1 * 0.6 + OMEGA2 * 0.8);
    let f = f_omega(&deformed, &TwoFormField::constant(g, OMEGA2)).unwrap();
    assert!(f.values().iter().all(|&v| (v - 1.6).abs() < 1e-14));
  }

  #[test]
  fn f_omega_rejects_anti_self_dual() {
    let j0 = standard_acs(grid(4));
    let bad = TwoFormField::constant(grid(4), crate::pointlin::OMEGA1_BAR);
    assert!(matches!(f_omega(&j0, &bad), Err(CohomError::NotSelfDual(_))));
  }

  #[test]
  fn gram_of_standard_structure() {
    for n in [4, 8, 16] {
      let r = gram_matrix(&standard_acs(grid(n)), DEFAULT_TOL_NULL);
      let expected = [[4.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
      for i in 0..3 {
        for j in 0..3 {
          assert!((r.matrix[i][j] - expected[i][j]).abs() < 1e-12);
        }
      }
      assert_eq!(r.h_minus, 2);
      assert!(r.eigenvalues[..2].iter().all(|l| l.abs() <= 1e-12));
      assert_eq!(h_plus(&r), 4);
      assert_eq!(r.null_basis, vec![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
      assert_eq!(r.preferred_null_direction(), Some([0.0, 1.0, 0.0]));
    }
  }

  #[test]
  fn gram_of_constant_form() {
    let r = gram_matrix(&constant_triple(4, OMEGA1 * 0.6 + OMEGA2 * 0.8), DEFAULT_TOL_NULL);
    assert_eq!(r.h_minus, 2);
    // null space is the orthogonal complement of (0.6, 0.8, 0)
    for v in &r.null_basis {
      assert!((0.6 * v[0] + 0.8 * v[1]).abs() < 1e-12);
    }
    assert!(max_principal_angle(&r.null_basis, &[[-0.8, 0.6, 0.0], [0.0, 0.0, 1.0]]) < 1e-9);
    assert!((r.lambda_max() - 4.0).abs() < 1e-12);
  }

  #[test]
  fn gram_of_random_structure_is_nondegenerate() {
    let t = hermitian::random_compatible_acs(grid(16), 1, 0.3, 2).unwrap();
    let r = gram_matrix(&t, DEFAULT_TOL_NULL);
    assert_eq!(r.h_minus, 0);
    assert!(r.lambda_min() > 10.0 * r.tolerance);
    assert_eq!(h_plus(&r), 6);
  }

  #[test]
  fn h_plus_examples() {
    let mut r = gram_matrix(&standard_acs(grid(4)), DEFAULT_TOL_NULL);
    for (m, p) in [(2, 4), (0, 6), (3, 3)] {
      r.h_minus = m;
      assert_eq!(h_plus(&r), p);
    }
  }

  #[test]
  fn v_measure_examples() {
    let j0 = standard_acs(grid(4));
    let g = grid(4);
    for eps in [1e-9, 1e-3, 0.9] {
      assert_eq!(v_measure(&j0, &TwoFormField::constant(g, OMEGA1), eps).unwrap(), 1.0);
      assert_eq!(v_measure(&j0, &TwoFormField::constant(g, OMEGA2), eps).unwrap(), 0.0);
    }
    assert!(v_measure(&j0, &TwoFormField::constant(g, OMEGA1), 0.0).is_err());
  }

  #[test]
  fn v_measure_decreases_in_eps_after_a_bump() {
    let t = one_bump(8);
    let r = gram_matrix(&t, DEFAULT_TOL_NULL);
    let w = HarmonicBasis::combination(t.grid(), r.non_null_basis[0]);
    let values: Vec<f64> = [1e-9, 1e-6, 1e-3, 1e-1].iter().map(|&e| v_measure(&t, &w, e).unwrap()).collect();
    assert!(values.iter().all(|&v| v > 0.0 && v <= 1.0));
    assert!(values.windows(2).all(|p| p[1] <= p[0]));
  }

  #[test]
  fn delta_examples() {
    let d = delta_j_estimate(&standard_acs(grid(4)), 64, DEFAULT_EPS_NODAL).unwrap();
    assert_eq!(d, 1.0);
    let d = delta_j_estimate(&constant_triple(4, OMEGA1 * 0.6 + OMEGA2 * 0.8), 64, DEFAULT_EPS_NODAL).unwrap();
    assert_eq!(d, 1.0);
    let d = delta_j_estimate(&one_bump(8), 64, DEFAULT_EPS_NODAL).unwrap();
    assert!(d > 0.0 && d <= 1.0);
    assert!(delta_j_estimate(&standard_acs(grid(4)), 0, DEFAULT_EPS_NODAL).is_err());
  }

  #[test]
  fn delta_needs_a_nonempty_sphere() {
    let t = standard_acs(grid(4));
    let mut r = gram_matrix(&t, DEFAULT_TOL_NULL);
    r.non_null_basis.clear();
    assert!(matches!(delta_j_estimate_with(&t, &r, 8, 1e-6), Err(CohomError::EmptySphere)));
  }

  #[test]
  fn sphere_samples_are_unit() {
    for dim in 1..=3 {
      for s in low_discrepancy_sphere(dim, 50) {
        assert!((s.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
      }
    }
  }

  #[test]
  fn lejmi_standard_structure() {
    for n in [4, 6] {
      let r = lejmi_kernel_dim(&standard_acs(grid(n)), grid(n), DEFAULT_LEJMI_TOL).unwrap();
      assert_eq!(r.kernel_dim, 2, "{r:?}");
      assert_eq!(r.unknowns, 2 * n.pow(4));
    }
  }

  #[test]
  fn lejmi_constant_structure() {
    let r = lejmi_kernel_dim(&constant_triple(4, OMEGA1 * 0.6 + OMEGA2 * 0.8), grid(4), DEFAULT_LEJMI_TOL).unwrap();
    assert_eq!(r.kernel_dim, 2);
  }

  #[test]
  fn lejmi_preconditions() {
    let t = standard_acs(grid(4));
    assert!(matches!(lejmi_kernel_dim(&t, grid(6), 1e-8), Err(CohomError::Field(FieldError::GridMismatch { .. }))));
    let big = standard_acs(grid(8));
    assert!(matches!(lejmi_kernel_dim(&big, grid(8), 1e-8), Err(CohomError::MemoryBound { .. })));
  }

  #[test]
  fn intersection_examples() {
    let j0 = standard_acs(grid(8));
    assert_eq!(intersection_dim(&j0, &j0).unwrap(), 2);
    let w2 = constant_triple(8, OMEGA2);
    assert_eq!(intersection_dim(&j0, &w2).unwrap(), 1);
    assert!(intersection_dim(&j0, &one_bump(8)).unwrap() <= 1);
    assert!(intersection_dim(&j0, &standard_acs(grid(4))).is_err());
  }

  #[test]
  fn containment_after_one_bump() {
    let j0 = gram_matrix(&standard_acs(grid(8)), DEFAULT_TOL_NULL);
    let r1 = gram_matrix(&one_bump(8), DEFAULT_TOL_NULL);
    assert!(r1.h_minus <= 1);
    assert!(null_space_contained(&r1, &j0, ANGLE_TOL));
    assert!(!null_space_contained(&j0, &r1, ANGLE_TOL));
    let w3 = [OMEGA3.sd_coords()];
    assert!(max_principal_angle(&r1.null_basis, &w3) < 1e-9);
  }

  #[test]
  fn report_json_references_null_forms() {
    let dir = tempfile::tempdir().unwrap();
    let r = gram_matrix(&standard_acs(grid(4)), DEFAULT_TOL_NULL);
    let path = r.write_json(dir.path(), "baseline").unwrap();
    let back: GramReport = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(back.null_form_files, vec!["baseline.null0.ajc", "baseline.null1.ajc"]);
    let form: TwoFormField = torusfield::deserialize_field(dir.path().join(&back.null_form_files[0])).unwrap();
    assert_eq!(form.at(0), OMEGA2 * std::f64::consts::FRAC_1_SQRT_2);
  }
}
