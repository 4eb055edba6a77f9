//! Almost complex structure fields on the torus, their fundamental forms,
//! and the deformation constructions built on them: fieldwise g-related
//! deformations, random generic structures and the two-stage cut-off
//! pipeline that drives `h_J^-` to zero.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohomlab::{self, CohomError};
use crate::pointlin::{self, Endomorphism4, PointError, TwoForm, OMEGA2, OMEGA3};
use crate::torusfield::{self, BumpParams, FieldError, FieldKind, GridSpec, RawField, ScalarField, TwoFormField};

/// Tolerance of the nodewise triple invariants.
pub const TRIPLE_TOL: f64 = 1e-9;

/// Largest admitted sup of `|a|^2` for a deformation form.
pub const SUP_NORM_MARGIN: f64 = 0.95;

#[derive(Debug, Error)]
pub enum HermitianError {
  #[error("at node {node}: {source}")]
  Point {
    node:   usize,
    #[source]
    source: PointError,
  },
  #[error(transparent)]
  Field(#[from] FieldError),
  #[error(transparent)]
  Cohomology(#[from] CohomError),
  #[error("invalid parameter: {0}")]
  InvalidParameter(String),
  #[error("precondition violated: {0}")]
  Precondition(String),
  #[error("no anti-invariant frame available for a non-standard structure; supply one")]
  FrameUnavailable,
  #[error("stage-2 normalization failed at node {node}: |c2 a|^2 = {norm_sq}")]
  Stage2Normalization { node: usize, norm_sq: f64 },
  #[error("invalid triple sidecar: {0}")]
  Sidecar(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HermitianError>;

fn at_node(node: usize) -> impl FnOnce(PointError) -> HermitianError { move |source| HermitianError::Point { node, source } }

/// Nodewise g-compatible almost complex structure.
#[derive(Debug, Clone, PartialEq)]
pub struct AcsField {
  grid: GridSpec,
  data: Vec<Endomorphism4>,
}

impl AcsField {
  pub fn new(grid: GridSpec, data: Vec<Endomorphism4>) -> Result<Self> {
    if data.len() != grid.node_count() {
      return Err(FieldError::WrongLength { expected: grid.node_count(), found: data.len() }.into());
    }
    data.par_iter().enumerate().try_for_each(|(i, j)| j.check_compatible(TRIPLE_TOL).map_err(at_node(i)))?;
    Ok(Self { grid, data })
  }

  pub fn constant(grid: GridSpec, j: Endomorphism4) -> Result<Self> { Self::new(grid, vec![j; grid.node_count()]) }

  pub fn grid(&self) -> GridSpec { self.grid }

  pub fn at(&self, idx: usize) -> &Endomorphism4 { &self.data[idx] }

  pub fn nodes(&self) -> &[Endomorphism4] { &self.data }

  pub fn max_abs_diff(&self, other: &AcsField) -> f64 {
    self.data.iter().zip(other.data.iter()).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
  }

  pub fn to_raw(&self) -> RawField {
    let n = self.grid.node_count();
    let mut comps = vec![vec![0.0; n]; 16];
    for (i, j) in self.data.iter().enumerate() {
      for (c, v) in j.to_row_major().iter().enumerate() {
        comps[c][i] = *v;
      }
    }
    RawField { kind: FieldKind::Endo, grid: self.grid, comps }
  }

  pub fn from_raw(raw: RawField) -> Result<Self> {
    if raw.kind != FieldKind::Endo {
      return Err(
        FieldError::KindMismatch { expected: FieldKind::Endo.name().into(), found: raw.kind.name().into() }.into(),
      );
    }
    let data = (0..raw.grid.node_count())
      .map(|i| Endomorphism4::from_row_major(&std::array::from_fn(|c| raw.comps[c][i])))
      .collect();
    Self::new(raw.grid, data)
  }
}

/// `(g, J, F)` with `F = g(J., .)` cached nodewise.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianTriple {
  j: AcsField,
  f: TwoFormField,
}

impl HermitianTriple {
  /// Computes the fundamental form of a validated structure field.
  pub fn from_acs(j: AcsField) -> Result<Self> {
    let grid = j.grid;
    let forms: Vec<TwoForm> = j
      .data
      .par_iter()
      .enumerate()
      .map(|(i, jx)| pointlin::fundamental_form(jx).map_err(at_node(i)))
      .collect::<Result<_>>()?;
    let f = TwoFormField::from_forms(grid, |i| forms[i]);
    let triple = Self { j, f };
    triple.validate()?;
    Ok(triple)
  }

  /// Builds `J` from a self-dual fundamental form field with `F ^ F = 2`.
  pub fn from_fundamental_form(f: TwoFormField) -> Result<Self> {
    let grid = torusfield::FormField::grid(&f);
    let data: Vec<Endomorphism4> = (0..grid.node_count())
      .into_par_iter()
      .map(|i| pointlin::acs_from_sd_form(&f.at(i)).map_err(at_node(i)))
      .collect::<Result<_>>()?;
    let triple = Self { j: AcsField::new(grid, data)?, f };
    triple.validate()?;
    Ok(triple)
  }

  pub fn grid(&self) -> GridSpec { self.j.grid }

  pub fn j(&self) -> &AcsField { &self.j }

  pub fn f(&self) -> &TwoFormField { &self.f }

  /// Largest violation over all nodes of `J^2 = -Id`, `J^T J = Id`,
  /// `F = g(J., .)`, `*F = F` and `F ^ F = 2`.
  pub fn invariant_residual(&self) -> f64 {
    (0..self.grid().node_count())
      .into_par_iter()
      .map(|i| {
        let j = self.j.at(i);
        let f = self.f.at(i);
        let cached = TwoForm::from_matrix_antisym(&j.0.transpose());
        [
          j.square_residual(),
          j.orthogonality_residual(),
          f.max_abs_diff(&cached),
          f.self_dual_residual(),
          (pointlin::wedge_to_volume(&f, &f) - 2.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
      })
      .reduce(|| 0.0, f64::max)
  }

  fn validate(&self) -> Result<()> {
    let r = self.invariant_residual();
    if !(r <= TRIPLE_TOL) {
      return Err(HermitianError::Precondition(format!("triple invariants violated by {r:e}")));
    }
    Ok(())
  }

  /// True when `J` is the standard structure at every node.
  pub fn is_standard(&self) -> bool {
    let j0 = Endomorphism4::standard();
    self.j.data.iter().all(|j| *j == j0)
  }

  /// Writes `<stem>.J.ajc` (kind `endo`), `<stem>.F.ajc` and a JSON sidecar
  /// `<stem>.json` holding `params`.
  pub fn save(&self, dir: impl AsRef<Path>, stem: &str, params: &serde_json::Value) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(FieldError::from)?;
    let j_name = format!("{stem}.J.ajc");
    let f_name = format!("{stem}.F.ajc");
    torusfield::write_raw(dir.join(&j_name), &self.j.to_raw())?;
    torusfield::serialize_field(&self.f, dir.join(&f_name))?;
    let sidecar = serde_json::json!({
      "grid_n": self.grid().n(),
      "j_file": j_name,
      "f_file": f_name,
      "params": params,
    });
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&sidecar)?).map_err(FieldError::from)?;
    Ok(())
  }

  /// Reads a triple written by [`HermitianTriple::save`]; the stored `F` must
  /// match the fundamental form of the stored `J`.
  pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<(Self, serde_json::Value)> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join(format!("{stem}.json"))).map_err(FieldError::from)?;
    let sidecar: serde_json::Value = serde_json::from_str(&text)?;
    let name = |key: &str| -> Result<String> {
      sidecar[key].as_str().map(str::to_string).ok_or_else(|| HermitianError::Precondition(format!("sidecar lacks `{key}`")))
    };
    let j = AcsField::from_raw(torusfield::read_raw(dir.join(name("j_file")?))?)?;
    let f: TwoFormField = torusfield::deserialize_field_on(dir.join(name("f_file")?), j.grid)?;
    let triple = Self { j, f };
    triple.validate()?;
    Ok((triple, sidecar["params"].clone()))
  }
}

/// Record of one stage of a cut-off deformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
  pub stage:           u8,
  /// Bump actually used (height may have been lowered to respect the margin).
  pub bump:            BumpParams,
  pub support_volume:  f64,
  pub delta_estimate:  Option<f64>,
  /// Self-dual coordinates of the constant deformation direction.
  pub direction:       [f64; 3],
  pub sup_norm_sq:     f64,
  pub h_minus_before:  usize,
  pub h_minus_after:   usize,
  pub lambda_min_after: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeformLog {
  pub stages: Vec<StageRecord>,
  /// Largest difference between the normalization route and the rational
  /// parametrization in stage 2.
  pub stage2_route_agreement: Option<f64>,
  pub early_exit: bool,
}

impl DeformLog {
  pub fn push(&mut self, record: StageRecord) { self.stages.push(record); }
}

/// The integrable base point: `J0` at every node, `F = w1`.
pub fn standard_acs(grid: GridSpec) -> HermitianTriple {
  let j = AcsField { grid, data: vec![Endomorphism4::standard(); grid.node_count()] };
  let f = TwoFormField::constant(grid, pointlin::OMEGA1);
  HermitianTriple { j, f }
}

/// Nodewise frame `(e1(x), e2(x))` of `Lambda_J^-`, each with `|e|^2 = 1`
/// in the wedge norm (self-dual coordinates of unit length).
#[derive(Debug, Clone, PartialEq)]
pub struct AntiFrame {
  grid:  GridSpec,
  pairs: Vec<[[f64; 3]; 2]>,
}

/// Orthonormal complement of a unit vector in `R^3`: the first vector is the
/// normalized projection of the axis where `|u|` is smallest (lowest index on
/// ties), the second completes a right-handed triple `(u, v1, v2)`.
pub fn pivoted_complement(u: [f64; 3]) -> [[f64; 3]; 2] {
  let mut p = 0;
  for i in 1..3 {
    if u[i].abs() < u[p].abs() {
      p = i;
    }
  }
  let mut v1 = [0.0; 3];
  v1[p] = 1.0;
  let up = u[p];
  for i in 0..3 {
    v1[i] -= up * u[i];
  }
  let norm = (v1[0] * v1[0] + v1[1] * v1[1] + v1[2] * v1[2]).sqrt();
  v1.iter_mut().for_each(|x| *x /= norm);
  let v2 = [u[1] * v1[2] - u[2] * v1[1], u[2] * v1[0] - u[0] * v1[2], u[0] * v1[1] - u[1] * v1[0]];
  [v1, v2]
}

impl AntiFrame {
  /// `(w2, w3)` everywhere; valid for the standard structure only.
  pub fn standard(grid: GridSpec) -> Self { Self { grid, pairs: vec![[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]; grid.node_count()] } }

  /// Pivoted orthonormal complement of `F(x)` inside the self-dual forms.
  /// Need not vary continuously from node to node.
  pub fn pivoted(triple: &HermitianTriple) -> Self {
    let grid = triple.grid();
    let pairs = (0..grid.node_count())
      .into_par_iter()
      .map(|i| {
        let u = triple.f.at(i).sd_coords();
        let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        pivoted_complement(u.map(|x| x / norm))
      })
      .collect();
    Self { grid, pairs }
  }

  pub fn grid(&self) -> GridSpec { self.grid }

  pub fn forms_at(&self, idx: usize) -> [TwoForm; 2] { self.pairs[idx].map(TwoForm::from_sd_coords) }
}

/// `a(x) w2 + b(x) w3`, anti-invariant for the standard structure.
pub fn anti_invariant_field(triple: &HermitianTriple, a: &ScalarField, b: &ScalarField) -> Result<TwoFormField> {
  if !triple.is_standard() {
    return Err(HermitianError::FrameUnavailable);
  }
  anti_invariant_field_with_frame(&AntiFrame::standard(triple.grid()), a, b)
}

/// `a(x) e1(x) + b(x) e2(x)` for a caller-supplied frame.
pub fn anti_invariant_field_with_frame(frame: &AntiFrame, a: &ScalarField, b: &ScalarField) -> Result<TwoFormField> {
  let grid = frame.grid;
  if a.grid() != grid || b.grid() != grid {
    return Err(FieldError::GridMismatch { left: grid.n(), right: a.grid().n().max(b.grid().n()) }.into());
  }
  let (av, bv) = (a.values(), b.values());
  Ok(TwoFormField::from_forms(grid, |i| {
    let [e1, e2] = frame.forms_at(i);
    e1 * av[i] + e2 * bv[i]
  }))
}

/// Nodewise projection `split_j(J(x), phi(x)).minus`.
pub fn project_anti_invariant(triple: &HermitianTriple, phi: &TwoFormField) -> Result<TwoFormField> {
  let grid = triple.grid();
  if torusfield::FormField::grid(phi) != grid {
    return Err(FieldError::GridMismatch { left: grid.n(), right: torusfield::FormField::grid(phi).n() }.into());
  }
  let forms: Vec<TwoForm> = (0..grid.node_count())
    .into_par_iter()
    .map(|i| pointlin::split_j(triple.j.at(i), &phi.at(i)).map(|s| s.minus).map_err(at_node(i)))
    .collect::<Result<_>>()?;
  Ok(TwoFormField::from_forms(grid, |i| forms[i]))
}

/// Largest nodewise `|a|^2` of a self-dual field.
pub fn sup_norm_sq(alpha: &TwoFormField) -> f64 {
  let grid = torusfield::FormField::grid(alpha);
  (0..grid.node_count())
    .into_par_iter()
    .map(|i| {
      let a = alpha.at(i);
      pointlin::wedge_to_volume(&a, &a) / 2.0
    })
    .reduce(|| 0.0, f64::max)
}

/// Fieldwise `J_a` and `F_a`. Nodes where `a` vanishes keep `J` unchanged.
pub fn deform_field(triple: &HermitianTriple, alpha: &TwoFormField) -> Result<HermitianTriple> {
  let grid = triple.grid();
  if torusfield::FormField::grid(alpha) != grid {
    return Err(FieldError::GridMismatch { left: grid.n(), right: torusfield::FormField::grid(alpha).n() }.into());
  }
  let nodes: Vec<(Endomorphism4, TwoForm)> = (0..grid.node_count())
    .into_par_iter()
    .map(|i| {
      let a = alpha.at(i);
      let j = triple.j.at(i);
      if a.0.iter().all(|&c| c == 0.0) {
        return Ok((*j, triple.f.at(i)));
      }
      let ja = pointlin::deform_acs(j, &a).map_err(at_node(i))?;
      let fa = pointlin::f_deformed(j, &a).map_err(at_node(i))?;
      Ok((ja, fa))
    })
    .collect::<Result<_>>()?;
  let j = AcsField::new(grid, nodes.iter().map(|n| n.0).collect())?;
  let f = TwoFormField::from_forms(grid, |i| nodes[i].1);
  let out = HermitianTriple { j, f };
  out.validate()?;
  Ok(out)
}

/// A real trigonometric polynomial with modes `|k_i| <= bandlimit`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
  bandlimit: i64,
  constant:  f64,
  modes:     Vec<([i64; 4], f64, f64)>,
}

impl TrigPolynomial {
  /// Coefficients uniform in `[-1, 1]`, one per cosine/sine of each mode in
  /// the half-lattice `k > 0` (lexicographically).
  pub fn random(rng: &mut ChaCha8Rng, bandlimit: i64) -> Self {
    let constant = rng.random_range(-1.0..=1.0);
    let mut modes = Vec::new();
    let r = -bandlimit..=bandlimit;
    for k0 in r.clone() {
      for k1 in r.clone() {
        for k2 in r.clone() {
          for k3 in r.clone() {
            let k = [k0, k1, k2, k3];
            if k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0) {
              let c = rng.random_range(-1.0..=1.0);
              let s = rng.random_range(-1.0..=1.0);
              modes.push((k, c, s));
            }
          }
        }
      }
    }
    Self { bandlimit, constant, modes }
  }

  /// Values at the grid nodes; agrees with [`TrigPolynomial::eval`] but
  /// sums one axis at a time.
  pub fn sample(&self, grid: GridSpec) -> ScalarField {
    let n = grid.n();
    let b = self.bandlimit;
    let width = (2 * b + 1) as usize;
    let tau = 2.0 * std::f64::consts::PI;
    // table[k + b][m] = exp(2 pi i k m / n), phase reduced exactly
    let table: Vec<Vec<Complex64>> = (-b..=b)
      .map(|k| (0..n).map(|m| Complex64::from_polar(1.0, tau * (k * m as i64).rem_euclid(n as i64) as f64 / n as f64)).collect())
      .collect();
    // c cos(p) + s sin(p) = Re((c - i s) e^{ip})
    let mut t = vec![Complex64::new(0.0, 0.0); width.pow(4)];
    for (k, c, s) in &self.modes {
      let idx = k.iter().fold(0, |acc, &ki| acc * width + (ki + b) as usize);
      t[idx] = Complex64::new(*c, -*s);
    }
    // contract the last spectral axis into a physical one, four times
    let mut rest = 1;
    for axis in (0..4).rev() {
      let outer = width.pow(axis as u32);
      let mut out = vec![Complex64::new(0.0, 0.0); outer * n * rest];
      for o in 0..outer {
        for (k, row) in table.iter().enumerate() {
          let src = &t[(o * width + k) * rest..(o * width + k + 1) * rest];
          for (m, &e) in row.iter().enumerate() {
            let dst = &mut out[(o * n + m) * rest..(o * n + m + 1) * rest];
            dst.iter_mut().zip(src).for_each(|(d, &v)| *d += v * e);
          }
        }
      }
      t = out;
      rest *= n;
    }
    ScalarField::new(grid, t.into_iter().map(|z| self.constant + z.re).collect()).expect("n^4 values")
  }

  pub fn eval(&self, x: &[f64; 4]) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    self.constant
      + self
        .modes
        .iter()
        .map(|(k, c, s)| {
          let phase = tau * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2] + k[3] as f64 * x[3]);
          c * phase.cos() + s * phase.sin()
        })
        .sum::<f64>()
  }
}

/// Generic structure `J_a` with `a = a(x) w2 + b(x) w3` from two random
/// trigonometric polynomials, rescaled so that `sup (a^2 + b^2) = amplitude^2`.
pub fn random_compatible_acs(grid: GridSpec, seed: u64, amplitude: f64, bandlimit: usize) -> Result<HermitianTriple> {
  if !(amplitude > 0.0 && amplitude < 1.0) || amplitude * amplitude > SUP_NORM_MARGIN {
    return Err(HermitianError::InvalidParameter(format!(
      "amplitude {amplitude} must lie in (0, 1) with amplitude^2 <= {SUP_NORM_MARGIN}"
    )));
  }
  if bandlimit == 0 || bandlimit >= grid.n() / 2 {
    return Err(HermitianError::InvalidParameter(format!(
      "bandlimit {bandlimit} must lie in [1, {})",
      grid.n() / 2
    )));
  }
  let mut rng = ChaCha8Rng::seed_from_u64(seed);
  let pa = TrigPolynomial::random(&mut rng, bandlimit as i64);
  let pb = TrigPolynomial::random(&mut rng, bandlimit as i64);
  let a = pa.sample(grid);
  let b = pb.sample(grid);
  let sup = a.values().iter().zip(b.values().iter()).map(|(x, y)| x * x + y * y).fold(0.0, f64::max);
  let scale = amplitude / sup.sqrt();
  let base = standard_acs(grid);
  let alpha = anti_invariant_field(&base, &(&a * scale), &(&b * scale))?;
  deform_field(&base, &alpha)
}

/// Options shared by the cut-off constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformOptions {
  pub tol_null:      f64,
  pub eps_nodal:     f64,
  pub delta_samples: usize,
}

impl Default for DeformOptions {
  fn default() -> Self {
    Self { tol_null: cohomlab::DEFAULT_TOL_NULL, eps_nodal: cohomlab::DEFAULT_EPS_NODAL, delta_samples: 256 }
  }
}

/// `c(x) a(x)` with `a` the nodewise anti-invariant projection of the
/// constant form `direction / sqrt(2)` (so that `integral a^2 = 1`), the bump
/// height lowered if needed so that `sup |c a|^2 <= SUP_NORM_MARGIN`.
/// Returns the form, the bump actually used and its sup norm.
pub fn cutoff_form(
  triple: &HermitianTriple,
  direction: [f64; 3],
  bump: &BumpParams,
) -> Result<(TwoFormField, BumpParams, f64)> {
  let grid = triple.grid();
  let unit = TwoForm::from_sd_coords(direction) * std::f64::consts::FRAC_1_SQRT_2;
  let alpha = project_anti_invariant(triple, &TwoFormField::constant(grid, unit))?;
  let mut used = *bump;
  let c = torusfield::bump_cutoff(grid, &used)?;
  let mut form = alpha.scale_by(&c)?;
  let mut sup = sup_norm_sq(&form);
  if sup > SUP_NORM_MARGIN {
    let s = (SUP_NORM_MARGIN / sup).sqrt();
    used.height *= s;
    form = form.scale(s);
    sup = sup_norm_sq(&form);
  }
  Ok((form, used, sup))
}

/// Stage 1 of the cut-off construction: deform `J` by `c1 a1` with `a1` the
/// preferred Gram-null form of `J`.
pub fn one_bump_deform(
  triple: &HermitianTriple,
  bump: &BumpParams,
  opts: &DeformOptions,
) -> Result<(HermitianTriple, StageRecord)> {
  let report = cohomlab::gram_matrix(triple, opts.tol_null);
  let h_before = report.h_minus;
  let direction = report
    .preferred_null_direction()
    .ok_or_else(|| HermitianError::Precondition("h_minus(J) >= 1 required for a cut-off deformation".into()))?;
  bump.validate()?;
  let delta = if h_before < cohomlab::B_PLUS {
    let delta = cohomlab::delta_j_estimate_with(triple, &report, opts.delta_samples, opts.eps_nodal)?;
    if !(bump.support_volume() < delta) {
      return Err(HermitianError::Precondition(format!(
        "stage-1 bump support volume {} is not below delta_J = {delta}",
        bump.support_volume()
      )));
    }
    Some(delta)
  } else {
    None
  };
  let (form, used, sup) = cutoff_form(triple, direction, bump)?;
  let deformed = deform_field(triple, &form)?;
  let after = cohomlab::gram_matrix(&deformed, opts.tol_null);
  let record = StageRecord {
    stage: 1,
    bump: used,
    support_volume: used.support_volume(),
    delta_estimate: delta,
    direction,
    sup_norm_sq: sup,
    h_minus_before: h_before,
    h_minus_after: after.h_minus,
    lambda_min_after: after.lambda_min(),
  };
  Ok((deformed, record))
}

/// Result of [`two_stage_deform`].
#[derive(Debug, Clone)]
pub struct TwoStageOutcome {
  pub stage1: HermitianTriple,
  /// Equal to `stage1` when stage 1 already reached `h_minus = 0`.
  pub stage2: HermitianTriple,
  pub log:    DeformLog,
}

/// The two-stage construction. Stage 1 deforms along a Gram-null form of `J`
/// inside the first bump. If a null form `a` survives, stage 2 sets
/// `F2 = f1 F1 + c2 a` with `f1 = sqrt(1 - c2^2 |a|^2)`, which keeps
/// `F2 ^ F2 = 2` because `F1 ^ a = 0` nodewise, and takes `J2` to be the
/// compatible structure of `F2`.
pub fn two_stage_deform(
  triple: &HermitianTriple,
  bump1: &BumpParams,
  bump2: &BumpParams,
  opts: &DeformOptions,
) -> Result<TwoStageOutcome> {
  let mut log = DeformLog::default();
  let (stage1, record1) = one_bump_deform(triple, bump1, opts)?;
  let h1 = record1.h_minus_after;
  log.push(record1);
  if h1 == 0 {
    log.early_exit = true;
    return Ok(TwoStageOutcome { stage2: stage1.clone(), stage1, log });
  }

  bump2.validate()?;
  let report1 = cohomlab::gram_matrix(&stage1, opts.tol_null);
  let direction = report1.preferred_null_direction().expect("h_minus >= 1 has a null direction");
  let delta = if h1 < cohomlab::B_PLUS {
    let delta = cohomlab::delta_j_estimate_with(&stage1, &report1, opts.delta_samples, opts.eps_nodal)?;
    if !(bump2.support_volume() < delta) {
      return Err(HermitianError::Precondition(format!(
        "stage-2 bump support volume {} is not below delta_J1 = {delta}",
        bump2.support_volume()
      )));
    }
    Some(delta)
  } else {
    None
  };

  let grid = triple.grid();
  let (c2_alpha, used, sup) = cutoff_form(&stage1, direction, bump2)?;
  if let Some((node, norm_sq)) = (0..grid.node_count())
    .map(|i| {
      let a = c2_alpha.at(i);
      (i, pointlin::wedge_to_volume(&a, &a) / 2.0)
    })
    .find(|(_, n)| !(*n < 1.0))
  {
    return Err(HermitianError::Stage2Normalization { node, norm_sq });
  }
  let f2 = TwoFormField::from_forms(grid, |i| {
    let a = c2_alpha.at(i);
    let n2 = pointlin::wedge_to_volume(&a, &a) / 2.0;
    stage1.f.at(i) * (1.0 - n2).sqrt() + a
  });
  let stage2 = HermitianTriple::from_fundamental_form(f2)?;

  // Same structure through the rational parametrization: with cos t = f1 the
  // form beta = c2 a / (1 + f1) has F_beta = F2.
  let beta = TwoFormField::from_forms(grid, |i| {
    let a = c2_alpha.at(i);
    let n2 = pointlin::wedge_to_volume(&a, &a) / 2.0;
    a * (1.0 / (1.0 + (1.0 - n2).sqrt()))
  });
  let via_rational = deform_field(&stage1, &beta)?;
  let agreement = via_rational.j.max_abs_diff(&stage2.j);
  if !(agreement <= TRIPLE_TOL) {
    return Err(HermitianError::Precondition(format!(
      "stage-2 normalization and rational routes disagree by {agreement:e}"
    )));
  }
  log.stage2_route_agreement = Some(agreement);

  let after = cohomlab::gram_matrix(&stage2, opts.tol_null);
  log.push(StageRecord {
    stage: 2,
    bump: used,
    support_volume: used.support_volume(),
    delta_estimate: delta,
    direction,
    sup_norm_sq: sup,
    h_minus_before: h1,
    h_minus_after: after.h_minus,
    lambda_min_after: after.lambda_min(),
  });
  Ok(TwoStageOutcome { stage1, stage2, log })
}

/// Convenience: the constant anti-invariant field `a w2 + b w3` on a grid.
pub fn constant_anti_invariant(grid: GridSpec, a: f64, b: f64) -> TwoFormField {
  TwoFormField::constant(grid, OMEGA2 * a + OMEGA3 * b)
}
