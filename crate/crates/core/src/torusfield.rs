//! Periodic scalar, 1-, 2- and 3-form fields on the unit 4-torus `[0,1)^4`
//! with the flat metric, and their spectral exterior calculus.
//!
//! Fields are stored by nodal values on the uniform grid `(i1, i2, i3, i4) / n`
//! with the last coordinate varying fastest. Derivatives are taken with the
//! discrete Fourier transform along one axis at a time; the Nyquist mode is
//! given zero derivative, which keeps the differentiation matrix real and
//! skew-symmetric so that `d` and `delta` are exact adjoints on the grid.
//!
//! Component conventions:
//! - 1-forms: `(dx1, dx2, dx3, dx4)`
//! - 2-forms: the [`crate::pointlin`] basis `(e12, e13, e14, e23, e24, e34)`
//! - 3-forms: `(e123, e124, e134, e234)`

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::{Add, Mul, Sub};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointlin::{self, TwoForm, PAIRS};

/// Index triples of the four basis 3-forms.
pub const TRIPLES: [(usize, usize, usize); 4] = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)];

#[derive(Debug, Error)]
pub enum FieldError {
  #[error("grid resolution must be even and >= 4, got {0}")]
  InvalidGrid(usize),
  #[error("grid mismatch: {left} vs {right}")]
  GridMismatch { left: usize, right: usize },
  #[error("invalid bump parameters: {0}")]
  InvalidBump(String),
  #[error("field has {found} values, expected {expected}")]
  WrongLength { expected: usize, found: usize },
  #[error("malformed field file: {0}")]
  Malformed(String),
  #[error("unsupported field file version `{0}`")]
  Version(String),
  #[error("field kind mismatch: expected {expected}, found {found}")]
  KindMismatch { expected: String, found: String },
  #[error("truncated field file: expected {expected} bytes of data, found {found}")]
  Truncated { expected: usize, found: usize },
  #[error(transparent)]
  Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FieldError>;

/// Uniform discretization of the unit 4-torus with `n` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
  n: usize,
}

impl GridSpec {
  pub fn new(n: usize) -> Result<Self> {
    if n < 4 || n % 2 != 0 {
      return Err(FieldError::InvalidGrid(n));
    }
    Ok(Self { n })
  }

  pub fn n(&self) -> usize { self.n }

  pub fn node_count(&self) -> usize { self.n.pow(4) }

  pub fn spacing(&self) -> f64 { 1.0 / self.n as f64 }

  pub fn index(&self, i: [usize; 4]) -> usize { ((i[0] * self.n + i[1]) * self.n + i[2]) * self.n + i[3] }

  pub fn multi_index(&self, mut idx: usize) -> [usize; 4] {
    let mut out = [0; 4];
    for a in (0..4).rev() {
      out[a] = idx % self.n;
      idx /= self.n;
    }
    out
  }

  pub fn coord(&self, idx: usize) -> [f64; 4] { self.multi_index(idx).map(|i| i as f64 / self.n as f64) }

  /// Signed wavenumber of DFT bin `m`; `None` for the Nyquist bin.
  pub fn wavenumber(&self, m: usize) -> Option<i64> {
    let half = self.n / 2;
    match m {
      m if m < half => Some(m as i64),
      m if m == half => None,
      m => Some(m as i64 - self.n as i64),
    }
  }

  fn check_same(&self, other: &GridSpec) -> Result<()> {
    if self != other {
      return Err(FieldError::GridMismatch { left: self.n, right: other.n });
    }
    Ok(())
  }
}

/// Wrap-around distance on the unit torus.
pub fn torus_distance(a: &[f64; 4], b: &[f64; 4]) -> f64 {
  a.iter()
    .zip(b.iter())
    .map(|(x, y)| {
      let d = (x - y).rem_euclid(1.0);
      let d = d.min(1.0 - d);
      d * d
    })
    .sum::<f64>()
    .sqrt()
}

/// Volume of a Euclidean 4-ball.
pub fn ball_volume(radius: f64) -> f64 { PI * PI / 2.0 * radius.powi(4) }

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
  grid:   GridSpec,
  values: Vec<f64>,
}

impl ScalarField {
  pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
    if values.len() != grid.node_count() {
      return Err(FieldError::WrongLength { expected: grid.node_count(), found: values.len() });
    }
    Ok(Self { grid, values })
  }

  pub fn constant(grid: GridSpec, c: f64) -> Self { Self { grid, values: vec![c; grid.node_count()] } }

  pub fn zeros(grid: GridSpec) -> Self { Self::constant(grid, 0.0) }

  /// Samples `f` at every node.
  pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 4]) -> f64 + Sync) -> Self {
    let values = (0..grid.node_count()).into_par_iter().map(|i| f(grid.coord(i))).collect();
    Self { grid, values }
  }

  pub fn grid(&self) -> GridSpec { self.grid }

  pub fn values(&self) -> &[f64] { &self.values }

  pub fn into_values(self) -> Vec<f64> { self.values }

  pub fn max_abs(&self) -> f64 { self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs())) }

  pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
    Self { grid: self.grid, values: self.values.iter().map(|&x| f(x)).collect() }
  }

  pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
    self.grid.check_same(&other.grid)?;
    let values = self.values.iter().zip(other.values.iter()).map(|(&a, &b)| f(a, b)).collect();
    Ok(Self { grid: self.grid, values })
  }

  pub fn is_finite(&self) -> bool { self.values.iter().all(|x| x.is_finite()) }
}

impl Add for &ScalarField {
  type Output = ScalarField;

  fn add(self, rhs: Self) -> ScalarField { self.zip_map(rhs, |a, b| a + b).expect("grid mismatch in field addition") }
}

impl Sub for &ScalarField {
  type Output = ScalarField;

  fn sub(self, rhs: Self) -> ScalarField { self.zip_map(rhs, |a, b| a - b).expect("grid mismatch in field subtraction") }
}

impl Mul<f64> for &ScalarField {
  type Output = ScalarField;

  fn mul(self, rhs: f64) -> ScalarField { self.map(|a| a * rhs) }
}

/// Common view of multi-component fields.
pub trait FormField {
  fn grid(&self) -> GridSpec;
  fn components(&self) -> &[ScalarField];

  /// Largest absolute nodal value over all components.
  fn max_abs(&self) -> f64 { self.components().iter().map(ScalarField::max_abs).fold(0.0, f64::max) }
}

impl FormField for ScalarField {
  fn grid(&self) -> GridSpec { self.grid }

  fn components(&self) -> &[ScalarField] { std::slice::from_ref(self) }
}

macro_rules! form_field {
  ($(#[$meta:meta])* $name:ident, $k:expr) => {
    $(#[$meta])*
    #[derive(Debug, Clone, PartialEq)]
    pub struct $name {
      comps: [ScalarField; $k],
    }

    impl $name {
      pub const COMPONENTS: usize = $k;

      pub fn new(comps: [ScalarField; $k]) -> Result<Self> {
        let grid = comps[0].grid;
        for c in comps.iter() {
          grid.check_same(&c.grid)?;
        }
        Ok(Self { comps })
      }

      pub fn zeros(grid: GridSpec) -> Self { Self { comps: std::array::from_fn(|_| ScalarField::zeros(grid)) } }

      pub fn component(&self, i: usize) -> &ScalarField { &self.comps[i] }

      pub fn into_components(self) -> [ScalarField; $k] { self.comps }

      /// Nodal values at one node.
      pub fn node(&self, idx: usize) -> [f64; $k] { std::array::from_fn(|c| self.comps[c].values[idx]) }

      /// Builds a field from its nodal values.
      pub fn from_node_fn(grid: GridSpec, f: impl Fn(usize) -> [f64; $k] + Sync) -> Self {
        let nodes: Vec<[f64; $k]> = (0..grid.node_count()).into_par_iter().map(|i| f(i)).collect();
        let comps = std::array::from_fn(|c| ScalarField { grid, values: nodes.iter().map(|v| v[c]).collect() });
        Self { comps }
      }

      pub fn scale(&self, s: f64) -> Self { Self { comps: std::array::from_fn(|c| &self.comps[c] * s) } }

      pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid().check_same(&other.grid())?;
        Ok(Self { comps: std::array::from_fn(|c| &self.comps[c] + &other.comps[c]) })
      }

      pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid().check_same(&other.grid())?;
        Ok(Self { comps: std::array::from_fn(|c| &self.comps[c] - &other.comps[c]) })
      }
    }

    impl FormField for $name {
      fn grid(&self) -> GridSpec { self.comps[0].grid }

      fn components(&self) -> &[ScalarField] { &self.comps }
    }
  };
}

form_field!(
  /// 1-form field, components `(dx1, dx2, dx3, dx4)`.
  OneFormField,
  4
);
form_field!(
  /// 2-form field in the `(e12, e13, e14, e23, e24, e34)` basis.
  TwoFormField,
  6
);
form_field!(
  /// 3-form field, components `(e123, e124, e134, e234)`.
  ThreeFormField,
  4
);

impl TwoFormField {
  pub fn constant(grid: GridSpec, form: TwoForm) -> Self {
    Self { comps: std::array::from_fn(|c| ScalarField::constant(grid, form.0[c])) }
  }

  pub fn at(&self, idx: usize) -> TwoForm { TwoForm(self.node(idx)) }

  pub fn from_forms(grid: GridSpec, f: impl Fn(usize) -> TwoForm + Sync) -> Self { Self::from_node_fn(grid, |i| f(i).0) }

  /// `c(x) * phi(x)` nodewise.
  pub fn scale_by(&self, c: &ScalarField) -> Result<Self> {
    self.grid().check_same(&c.grid)?;
    Ok(Self { comps: std::array::from_fn(|k| self.comps[k].zip_map(c, |a, b| a * b).unwrap()) })
  }

  /// Nodewise Hodge star.
  pub fn hodge_star(&self) -> Self { Self::from_forms(self.grid(), |i| pointlin::hodge_star(&self.at(i))) }

  /// Largest nodewise `|phi - *phi|`.
  pub fn self_dual_residual(&self) -> f64 {
    (0..self.grid().node_count()).map(|i| self.at(i).self_dual_residual()).fold(0.0, f64::max)
  }
}

// ---------------------------------------------------------------------------
// Fourier machinery
// ---------------------------------------------------------------------------

thread_local! {
  static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
  PLANNER.with(|p| {
    let mut p = p.borrow_mut();
    (p.plan_fft_forward(n), p.plan_fft_inverse(n))
  })
}

/// Offsets of the first element of every line along `axis`, and the stride.
fn lines(grid: GridSpec, axis: usize) -> (Vec<usize>, usize) {
  let n = grid.n;
  let stride = n.pow(3 - axis as u32);
  let starts = (0..grid.node_count()).filter(|&i| (i / stride) % n == 0).collect();
  (starts, stride)
}

/// Applies `op` to every line of `data` along `axis` in Fourier space.
fn transform_lines(grid: GridSpec, data: &mut [Complex64], axis: usize, op: impl Fn(&mut [Complex64])) {
  let n = grid.n;
  let (fwd, inv) = plans(n);
  let (starts, stride) = lines(grid, axis);
  let mut line = vec![Complex64::new(0.0, 0.0); n];
  let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
  for s in starts {
    for (m, v) in line.iter_mut().enumerate() {
      *v = data[s + m * stride];
    }
    fwd.process_with_scratch(&mut line, &mut scratch);
    op(&mut line);
    inv.process_with_scratch(&mut line, &mut scratch);
    for (m, v) in line.iter().enumerate() {
      data[s + m * stride] = v / n as f64;
    }
  }
}

/// Spectral partial derivative `d f / d x_axis` (unit-period coordinates).
pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
  let grid = f.grid;
  let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
  let factors: Vec<Complex64> = (0..grid.n)
    .map(|m| match grid.wavenumber(m) {
      Some(k) => Complex64::new(0.0, 2.0 * PI * k as f64),
      None => Complex64::new(0.0, 0.0),
    })
    .collect();
  transform_lines(grid, &mut data, axis, |line| line.iter_mut().zip(factors.iter()).for_each(|(v, f)| *v *= f));
  ScalarField { grid, values: data.into_iter().map(|c| c.re).collect() }
}

/// Keeps only the Fourier modes whose signed wavenumber vector satisfies
/// `keep`; the Nyquist bin is reported as `None`.
pub fn fourier_filter(f: &ScalarField, keep: impl Fn([Option<i64>; 4]) -> bool) -> ScalarField {
  let grid = f.grid;
  let n = grid.n;
  let (fwd, inv) = plans(n);
  let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
  let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
  let mut line = vec![Complex64::new(0.0, 0.0); n];
  let apply = |data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>, line: &mut [Complex64], scratch: &mut [Complex64]| {
    for axis in 0..4 {
      let (starts, stride) = lines(grid, axis);
      for s in starts {
        for (m, v) in line.iter_mut().enumerate() {
          *v = data[s + m * stride];
        }
        plan.process_with_scratch(line, scratch);
        for (m, v) in line.iter().enumerate() {
          data[s + m * stride] = *v;
        }
      }
    }
  };
  apply(&mut data, &fwd, &mut line, &mut scratch);
  for (idx, v) in data.iter_mut().enumerate() {
    let k = grid.multi_index(idx).map(|m| grid.wavenumber(m));
    if !keep(k) {
      *v = Complex64::new(0.0, 0.0);
    }
  }
  apply(&mut data, &inv, &mut line, &mut scratch);
  let norm = grid.node_count() as f64;
  ScalarField { grid, values: data.into_iter().map(|c| c.re / norm).collect() }
}

/// Two-thirds-rule truncation: drops every mode with some `|k_i| > n/3`.
/// Optional dealiasing for products of near-Nyquist fields.
pub fn dealias_two_thirds(f: &ScalarField) -> ScalarField {
  let cutoff = (f.grid.n / 3) as i64;
  fourier_filter(f, |k| k.iter().all(|ki| matches!(ki, Some(v) if v.abs() <= cutoff)))
}

/// The part of `f` carried by modes with a Nyquist component; these modes
/// are invisible to [`partial`].
pub fn nyquist_part(f: &ScalarField) -> ScalarField { fourier_filter(f, |k| k.iter().any(Option::is_none)) }

// ---------------------------------------------------------------------------
// Exterior calculus
// ---------------------------------------------------------------------------

fn gradient(f: &ScalarField) -> [ScalarField; 4] {
  let parts: Vec<ScalarField> = (0..4).into_par_iter().map(|a| partial(f, a)).collect();
  let mut it = parts.into_iter();
  std::array::from_fn(|_| it.next().unwrap())
}

pub fn d_scalar(f: &ScalarField) -> OneFormField { OneFormField { comps: gradient(f) } }

/// `(d theta)_ij = d_i theta_j - d_j theta_i`.
pub fn d_oneform(theta: &OneFormField) -> TwoFormField {
  let grads: Vec<[ScalarField; 4]> = theta.comps.par_iter().map(gradient).collect();
  TwoFormField { comps: PAIRS.map(|(i, j)| &grads[j][i] - &grads[i][j]) }
}

/// `(d phi)_ijk = d_i phi_jk - d_j phi_ik + d_k phi_ij`.
pub fn d_twoform(phi: &TwoFormField) -> ThreeFormField {
  let grads: Vec<[ScalarField; 4]> = phi.comps.par_iter().map(gradient).collect();
  let pair = |i: usize, j: usize| PAIRS.iter().position(|&p| p == (i, j)).unwrap();
  ThreeFormField {
    comps: TRIPLES.map(|(i, j, k)| {
      let a = &grads[pair(j, k)][i];
      let b = &grads[pair(i, k)][j];
      let c = &grads[pair(i, j)][k];
      &(a - b) + c
    }),
  }
}

/// Hodge star from 3-forms to 1-forms: `e123 -> e4`, `e124 -> -e3`,
/// `e134 -> e2`, `e234 -> -e1`.
pub fn hodge_star_three(chi: &ThreeFormField) -> OneFormField {
  let c = &chi.comps;
  OneFormField { comps: [&c[3] * -1.0, c[2].clone(), &c[1] * -1.0, c[0].clone()] }
}

/// Codifferential on 2-forms, `delta = - * d *`.
pub fn codiff_twoform(phi: &TwoFormField) -> OneFormField {
  let out = hodge_star_three(&d_twoform(&phi.hodge_star()));
  OneFormField { comps: out.comps.map(|c| &c * -1.0) }
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// Integral over the unit-volume torus: the mean of the nodal values.
pub fn integrate(f: &ScalarField) -> f64 { f.values.iter().sum::<f64>() / f.values.len() as f64 }

/// `integral <phi, psi>_g` for fields of the same type.
pub fn l2_inner<F: FormField>(phi: &F, psi: &F) -> Result<f64> {
  phi.grid().check_same(&psi.grid())?;
  let total: f64 = phi
    .components()
    .iter()
    .zip(psi.components().iter())
    .map(|(a, b)| a.values.iter().zip(b.values.iter()).map(|(x, y)| x * y).sum::<f64>())
    .sum();
  Ok(total / phi.grid().node_count() as f64)
}

/// `integral phi ^ psi` (the cup-product pairing).
pub fn wedge_integral(phi: &TwoFormField, psi: &TwoFormField) -> Result<f64> {
  phi.grid().check_same(&psi.grid())?;
  let n = phi.grid().node_count();
  let total: f64 = (0..n).into_par_iter().map(|i| pointlin::wedge_to_volume(&phi.at(i), &psi.at(i))).sum();
  Ok(total / n as f64)
}

// ---------------------------------------------------------------------------
// Cut-off functions
// ---------------------------------------------------------------------------

/// Parameters of a smooth compactly supported bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpParams {
  pub center: [f64; 4],
  pub radius: f64,
  pub height: f64,
}

impl BumpParams {
  pub fn new(center: [f64; 4], radius: f64, height: f64) -> Self { Self { center, radius, height } }

  pub fn validate(&self) -> Result<()> {
    if !self.center.iter().all(|c| (0.0..1.0).contains(c)) {
      return Err(FieldError::InvalidBump(format!("center {:?} outside [0,1)^4", self.center)));
    }
    if !(self.radius > 0.0 && self.radius < 0.5) {
      return Err(FieldError::InvalidBump(format!("radius {} outside (0, 1/2)", self.radius)));
    }
    if !(self.height > 0.0 && self.height <= 1.0) {
      return Err(FieldError::InvalidBump(format!("height {} outside (0, 1]", self.height)));
    }
    Ok(())
  }

  /// Volume of the closed support.
  pub fn support_volume(&self) -> f64 { ball_volume(self.radius) }

  pub fn value_at(&self, x: &[f64; 4]) -> f64 {
    let s = torus_distance(x, &self.center) / self.radius;
    if s < 1.0 { self.height * (1.0 - 1.0 / (1.0 - s * s)).exp() } else { 0.0 }
  }
}

/// `height * exp(1 - 1/(1 - s^2))` with `s` the torus distance to `center`
/// over `radius`, zero for `s >= 1`.
pub fn bump_cutoff(grid: GridSpec, params: &BumpParams) -> Result<ScalarField> {
  params.validate()?;
  Ok(ScalarField::from_fn(grid, |x| params.value_at(&x)))
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

pub const FORMAT_MAGIC: &str = "AJC1";

/// Field kinds understood by the on-disk format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
  Scalar,
  OneForm,
  TwoForm,
  ThreeForm,
  /// 16 components, row-major endomorphism entries.
  Endo,
}

impl FieldKind {
  pub fn name(&self) -> &'static str {
    match self {
      FieldKind::Scalar => "scalar",
      FieldKind::OneForm => "oneform",
      FieldKind::TwoForm => "twoform",
      FieldKind::ThreeForm => "threeform",
      FieldKind::Endo => "endo",
    }
  }

  pub fn components(&self) -> usize {
    match self {
      FieldKind::Scalar => 1,
      FieldKind::OneForm | FieldKind::ThreeForm => 4,
      FieldKind::TwoForm => 6,
      FieldKind::Endo => 16,
    }
  }

  fn parse(s: &str) -> Option<Self> {
    [FieldKind::Scalar, FieldKind::OneForm, FieldKind::TwoForm, FieldKind::ThreeForm, FieldKind::Endo]
      .into_iter()
      .find(|k| k.name() == s)
  }
}

/// Untyped field contents as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawField {
  pub kind:  FieldKind,
  pub grid:  GridSpec,
  pub comps: Vec<Vec<f64>>,
}

impl RawField {
  /// Header line, then components-major, last-axis-fastest little-endian f64.
  pub fn encode<W: Write>(&self, mut w: W) -> Result<()> {
    write!(w, "{} {} {}\n", FORMAT_MAGIC, self.kind.name(), self.grid.n)?;
    for comp in &self.comps {
      for v in comp {
        w.write_all(&v.to_le_bytes())?;
      }
    }
    w.flush()?;
    Ok(())
  }

  pub fn decode<R: Read>(mut r: R) -> Result<Self> {
    let mut header = Vec::new();
    let mut byte = [0u8; 1];
    loop {
      if r.read(&mut byte)? == 0 {
        return Err(FieldError::Malformed("missing header newline".into()));
      }
      if byte[0] == b'\n' {
        break;
      }
      header.push(byte[0]);
      if header.len() > 64 {
        return Err(FieldError::Malformed("header too long".into()));
      }
    }
    let header = String::from_utf8(header).map_err(|_| FieldError::Malformed("header is not ASCII".into()))?;
    let parts: Vec<&str> = header.split(' ').collect();
    if parts.len() != 3 {
      return Err(FieldError::Malformed(format!("bad header `{header}`")));
    }
    if parts[0] != FORMAT_MAGIC {
      if parts[0].starts_with("AJC") {
        return Err(FieldError::Version(parts[0].to_string()));
      }
      return Err(FieldError::Malformed(format!("bad magic `{}`", parts[0])));
    }
    let kind = FieldKind::parse(parts[1]).ok_or_else(|| FieldError::Malformed(format!("unknown kind `{}`", parts[1])))?;
    let n: usize = parts[2].parse().map_err(|_| FieldError::Malformed(format!("bad resolution `{}`", parts[2])))?;
    let grid = GridSpec::new(n)?;
    let expected = kind.components() * grid.node_count() * 8;
    let mut data = Vec::with_capacity(expected);
    r.take(expected as u64 + 1).read_to_end(&mut data)?;
    if data.len() < expected {
      return Err(FieldError::Truncated { expected, found: data.len() });
    }
    if data.len() > expected {
      return Err(FieldError::Malformed("trailing bytes after field data".into()));
    }
    let values: Vec<f64> = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let comps = values.chunks_exact(grid.node_count()).map(<[f64]>::to_vec).collect();
    Ok(Self { kind, grid, comps })
  }
}

/// Field types with a fixed on-disk kind.
pub trait StoredField: Sized {
  const KIND: FieldKind;
  fn to_raw(&self) -> RawField;
  fn from_raw(raw: RawField) -> Result<Self>;
}

fn check_kind(raw: &RawField, kind: FieldKind) -> Result<()> {
  if raw.kind != kind {
    return Err(FieldError::KindMismatch { expected: kind.name().into(), found: raw.kind.name().into() });
  }
  Ok(())
}

impl StoredField for ScalarField {
  const KIND: FieldKind = FieldKind::Scalar;

  fn to_raw(&self) -> RawField { RawField { kind: Self::KIND, grid: self.grid, comps: vec![self.values.clone()] } }

  fn from_raw(raw: RawField) -> Result<Self> {
    check_kind(&raw, Self::KIND)?;
    let grid = raw.grid;
    ScalarField::new(grid, raw.comps.into_iter().next().unwrap())
  }
}

macro_rules! stored_form {
  ($name:ident, $kind:expr) => {
    impl StoredField for $name {
      const KIND: FieldKind = $kind;

      fn to_raw(&self) -> RawField {
        RawField { kind: Self::KIND, grid: self.grid(), comps: self.comps.iter().map(|c| c.values.clone()).collect() }
      }

      fn from_raw(raw: RawField) -> Result<Self> {
        check_kind(&raw, Self::KIND)?;
        let grid = raw.grid;
        let mut it = raw.comps.into_iter();
        Ok(Self { comps: std::array::from_fn(|_| ScalarField { grid, values: it.next().unwrap() }) })
      }
    }
  };
}

stored_form!(OneFormField, FieldKind::OneForm);
stored_form!(TwoFormField, FieldKind::TwoForm);
stored_form!(ThreeFormField, FieldKind::ThreeForm);

pub fn write_raw(path: impl AsRef<Path>, raw: &RawField) -> Result<()> { raw.encode(BufWriter::new(File::create(path)?)) }

pub fn read_raw(path: impl AsRef<Path>) -> Result<RawField> { RawField::decode(BufReader::new(File::open(path)?)) }

pub fn serialize_field<F: StoredField>(field: &F, path: impl AsRef<Path>) -> Result<()> { write_raw(path, &field.to_raw()) }

pub fn deserialize_field<F: StoredField>(path: impl AsRef<Path>) -> Result<F> { F::from_raw(read_raw(path)?) }

/// Like [`deserialize_field`], additionally requiring the stored grid.
pub fn deserialize_field_on<F: StoredField>(path: impl AsRef<Path>, grid: GridSpec) -> Result<F> {
  let raw = read_raw(path)?;
  grid.check_same(&raw.grid)?;
  F::from_raw(raw)
}

#[cfg(test)]
mod tests {
  use super::*;

  fn grid(n: usize) -> GridSpec { GridSpec::new(n).unwrap() }

  fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values.iter().zip(b.values.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
  }

  #[test]
  fn grid_validation() {
    assert!(GridSpec::new(3).is_err());
    assert!(GridSpec::new(2).is_err());
    assert!(GridSpec::new(7).is_err());
    let g = grid(6);
    assert_eq!(g.node_count(), 1296);
    for idx in [0, 1, 17, 1295] {
      assert_eq!(g.index(g.multi_index(idx)), idx);
    }
    assert_eq!(g.coord(1), [0.0, 0.0, 0.0, 1.0 / 6.0]);
  }

  #[test]
  fn d_scalar_single_mode() {
    let g = grid(8);
    let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin());
    let df = d_scalar(&f);
    let expected = ScalarField::from_fn(g, |x| 2.0 * PI * (2.0 * PI * x[0]).cos());
    assert!(max_diff(df.component(0), &expected) < 1e-12);
    for a in 1..4 {
      assert!(df.component(a).max_abs() < 1e-12);
    }
    assert!(d_scalar(&ScalarField::constant(g, 4.2)).max_abs() < 1e-13);
  }

  #[test]
  fn d_scalar_product_of_modes() {
    let g = grid(12);
    let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[1]).sin() * (4.0 * PI * x[3]).cos());
    let df = d_scalar(&f);
    let d1 = ScalarField::from_fn(g, |x| 2.0 * PI * (2.0 * PI * x[1]).cos() * (4.0 * PI * x[3]).cos());
    let d3 = ScalarField::from_fn(g, |x| -4.0 * PI * (2.0 * PI * x[1]).sin() * (4.0 * PI * x[3]).sin());
    assert!(max_diff(df.component(1), &d1) < 1e-10);
    assert!(max_diff(df.component(3), &d3) < 1e-10);
    assert!(df.component(0).max_abs() < 1e-12);
  }

  #[test]
  fn curl_of_single_mode() {
    // theta = sin(2 pi x2) dx1 => d theta = -2 pi cos(2 pi x2) e12
    let g = grid(8);
    let zero = ScalarField::zeros(g);
    let theta = OneFormField::new([
      ScalarField::from_fn(g, |x| (2.0 * PI * x[1]).sin()),
      zero.clone(),
      zero.clone(),
      zero,
    ])
    .unwrap();
    let dt = d_oneform(&theta);
    let expected = ScalarField::from_fn(g, |x| -2.0 * PI * (2.0 * PI * x[1]).cos());
    assert!(max_diff(dt.component(0), &expected) < 1e-12);
    for c in 1..6 {
      assert!(dt.component(c).max_abs() < 1e-12);
    }
  }

  #[test]
  fn d_twoform_of_constant_is_zero() {
    let g = grid(6);
    let phi = TwoFormField::constant(g, TwoForm([1.0, -2.0, 0.5, 3.0, 0.25, -1.0]));
    assert!(d_twoform(&phi).max_abs() < 1e-13);
    assert!(codiff_twoform(&phi).max_abs() < 1e-13);
  }

  #[test]
  fn codiff_of_exact_single_mode() {
    // theta = sin(2 pi x2) dx1, phi = d theta = -2 pi cos(2 pi x2) e12.
    // delta phi_j = -sum_i d_i phi_ij, so (delta phi)_1 = -d_2 phi_21 = d_2 phi_12
    //   = 4 pi^2 sin(2 pi x2), which is Delta-theta for this co-closed theta.
    let g = grid(8);
    let zero = ScalarField::zeros(g);
    let mut comps: [ScalarField; 6] = std::array::from_fn(|_| zero.clone());
    comps[0] = ScalarField::from_fn(g, |x| -2.0 * PI * (2.0 * PI * x[1]).cos());
    let phi = TwoFormField::new(comps).unwrap();
    let delta = codiff_twoform(&phi);
    let expected = ScalarField::from_fn(g, |x| 4.0 * PI * PI * (2.0 * PI * x[1]).sin());
    assert!(max_diff(delta.component(0), &expected) < 1e-10);
    for a in 1..4 {
      assert!(delta.component(a).max_abs() < 1e-10);
    }
  }

  #[test]
  fn integration_examples() {
    let g = grid(8);
    assert!((integrate(&ScalarField::constant(g, 3.0)) - 3.0).abs() < 1e-15);
    let mode = ScalarField::from_fn(g, |x| (2.0 * PI * (x[0] + 2.0 * x[2])).cos());
    assert!(integrate(&mode).abs() < 1e-15);
    let w1 = TwoFormField::constant(g, pointlin::OMEGA1);
    let w2 = TwoFormField::constant(g, pointlin::OMEGA2);
    assert!((l2_inner(&w1, &w1).unwrap() - 2.0).abs() < 1e-14);
    assert!((wedge_integral(&w1, &w1).unwrap() - 2.0).abs() < 1e-14);
    assert!(wedge_integral(&w1, &w2).unwrap().abs() < 1e-15);
    let other = TwoFormField::constant(grid(4), pointlin::OMEGA1);
    assert!(matches!(wedge_integral(&w1, &other), Err(FieldError::GridMismatch { .. })));
    assert!(l2_inner(&w1, &other).is_err());
  }

  #[test]
  fn self_dual_wedge_equals_inner() {
    let g = grid(6);
    let phi = TwoFormField::from_forms(g, |i| {
      let x = g.coord(i);
      TwoForm::from_sd_coords([(2.0 * PI * x[0]).sin(), 0.3, (2.0 * PI * x[3]).cos()])
    });
    let w = wedge_integral(&phi, &phi).unwrap();
    let l = l2_inner(&phi, &phi).unwrap();
    assert!((w - l).abs() < 1e-14);
  }

  #[test]
  fn bump_examples() {
    let g = grid(16);
    let params = BumpParams::new([0.5; 4], 0.15, 0.5);
    let bump = bump_cutoff(g, &params).unwrap();
    let center = g.index([8, 8, 8, 8]);
    assert_eq!(bump.values()[center], 0.5);
    for i in 0..g.node_count() {
      let d = torus_distance(&g.coord(i), &params.center);
      if d >= params.radius {
        assert_eq!(bump.values()[i], 0.0);
      }
      assert!(bump.values()[i] >= 0.0 && bump.values()[i] <= 0.5);
    }
    let total = integrate(&bump);
    assert!(total > 0.0 && total < 0.5 * params.support_volume());
    // wrap-around support
    let edge = bump_cutoff(g, &BumpParams::new([0.0; 4], 0.15, 1.0)).unwrap();
    assert!(edge.values()[g.index([15, 0, 0, 0])] > 0.0);
    assert!(bump_cutoff(g, &BumpParams::new([0.5; 4], 0.5, 1.0)).is_err());
    assert!(bump_cutoff(g, &BumpParams::new([0.5; 4], 0.1, 0.0)).is_err());
    assert!(bump_cutoff(g, &BumpParams::new([0.5; 4], 0.1, 1.5)).is_err());
    assert!(bump_cutoff(g, &BumpParams::new([1.5, 0.0, 0.0, 0.0], 0.1, 0.5)).is_err());
  }

  #[test]
  fn nyquist_and_dealias_filters() {
    let g = grid(8);
    let nyq = ScalarField::from_fn(g, |x| (8.0 * PI * x[2]).cos());
    let smooth = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin());
    let sum = &nyq + &smooth;
    assert!(max_diff(&nyquist_part(&sum), &nyq) < 1e-13);
    assert!(d_scalar(&nyq).max_abs() < 1e-12);
    let high = ScalarField::from_fn(g, |x| (6.0 * PI * x[1]).sin());
    let filtered = dealias_two_thirds(&(&high + &smooth));
    assert!(max_diff(&filtered, &smooth) < 1e-13);
  }

  #[test]
  fn raw_round_trip_and_errors() {
    let g = grid(4);
    let f = ScalarField::from_fn(g, |x| x[0] - 2.0 * x[3] + 1e-300);
    let mut buf = Vec::new();
    f.to_raw().encode(&mut buf).unwrap();
    assert!(buf.starts_with(b"AJC1 scalar 4\n"));
    assert_eq!(buf.len(), 14 + 256 * 8);
    let back = ScalarField::from_raw(RawField::decode(&buf[..]).unwrap()).unwrap();
    assert_eq!(back, f);

    let truncated = &buf[..buf.len() - 3];
    assert!(matches!(RawField::decode(truncated), Err(FieldError::Truncated { .. })));
    let mut v2 = buf.clone();
    v2[3] = b'2';
    assert!(matches!(RawField::decode(&v2[..]), Err(FieldError::Version(_))));
    let mut garbage = b"hello world".to_vec();
    garbage.push(b'\n');
    assert!(matches!(RawField::decode(&garbage[..]), Err(FieldError::Malformed(_))));
    let raw = RawField::decode(&buf[..]).unwrap();
    assert!(matches!(TwoFormField::from_raw(raw), Err(FieldError::KindMismatch { .. })));
  }

  #[test]
  fn file_round_trip_with_grid_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi.ajc");
    let g = grid(4);
    let phi = TwoFormField::from_forms(g, |i| TwoForm([i as f64, 1.0, -2.0, 0.5, 0.0, 3.0]));
    serialize_field(&phi, &path).unwrap();
    let back: TwoFormField = deserialize_field(&path).unwrap();
    assert_eq!(back, phi);
    let wrong = deserialize_field_on::<TwoFormField>(&path, grid(6));
    assert!(matches!(wrong, Err(FieldError::GridMismatch { .. })));
  }
}
