use acslab::cohomlab;
use acslab::hermitian::{self, HermitianTriple};
use acslab::lab::{battery, LabConfig};
use acslab::pointlin::{self, Endomorphism4, TwoForm};
use acslab::torusfield::{self, BumpParams, FormField, GridSpec, OneFormField, ScalarField, TwoFormField};
use nalgebra::Matrix4;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn form() -> impl Strategy<Value = TwoForm> { prop::array::uniform6(-1.0..1.0f64).prop_map(TwoForm) }

/// Unit self-dual fundamental form, away from the degenerate zero vector.
fn compatible() -> impl Strategy<Value = Endomorphism4> {
  prop::array::uniform3(-1.0..1.0f64)
    .prop_filter("nonzero", |u| u.iter().map(|x| x * x).sum::<f64>() > 1e-2)
    .prop_map(|u| {
      let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
      pointlin::acs_from_sd_form(&TwoForm::from_sd_coords(u.map(|x| x / n))).unwrap()
    })
}

/// A compatible structure with an anti-invariant form with `paper_norm_sq` below `max`.
fn structure_and_anti(max: f64) -> impl Strategy<Value = (Endomorphism4, TwoForm)> {
  (compatible(), form(), 0.0..max).prop_map(|(j, phi, target)| {
    let minus = pointlin::split_j(&j, &phi).unwrap().minus;
    let n2 = pointlin::wedge_to_volume(&minus, &minus) / 2.0;
    let alpha = if n2 > 1e-8 { minus * (target / n2).sqrt() } else { TwoForm::zero() };
    (j, alpha)
  })
}

fn grid(n: usize) -> GridSpec { GridSpec::new(n).unwrap() }

proptest! {
  #[test]
  fn hodge_star_is_an_involution_and_splits(phi in form()) {
    prop_assert!(pointlin::hodge_star(&pointlin::hodge_star(&phi)).max_abs_diff(&phi) == 0.0);
    let s = pointlin::split_sd(&phi);
    prop_assert!(s.sum().max_abs_diff(&phi) < 1e-15);
    prop_assert!(s.plus.self_dual_residual() < 1e-15);
    prop_assert!(pointlin::hodge_star(&s.minus).max_abs_diff(&(-s.minus)) < 1e-15);
  }

  #[test]
  fn wedge_is_symmetric_and_matches_inner_with_star(a in form(), b in form()) {
    prop_assert!((pointlin::wedge_to_volume(&a, &b) - pointlin::wedge_to_volume(&b, &a)).abs() < 1e-15);
    prop_assert!((pointlin::wedge_to_volume(&a, &b) - a.inner(&pointlin::hodge_star(&b))).abs() < 1e-14);
  }

  #[test]
  fn j_splitting_reconstructs_with_eigenvalues(j in compatible(), phi in form()) {
    let s = pointlin::split_j(&j, &phi).unwrap();
    prop_assert!(s.sum().max_abs_diff(&phi) < 1e-14);
    prop_assert!(pointlin::pull_back(&j, &s.plus).max_abs_diff(&s.plus) < 1e-10);
    prop_assert!(pointlin::pull_back(&j, &s.minus).max_abs_diff(&(-s.minus)) < 1e-10);
    let f = pointlin::fundamental_form(&j).unwrap();
    // the anti-invariant part is self-dual and orthogonal to F
    prop_assert!(s.minus.self_dual_residual() < 1e-10);
    prop_assert!(s.minus.inner(&f).abs() < 1e-10);
    // the self-dual invariant part is a multiple of F
    let sd = pointlin::split_sd(&s.plus).plus;
    prop_assert!(sd.max_abs_diff(&(f * (sd.inner(&f) / 2.0))) < 1e-10);
  }

  #[test]
  fn deformation_identities((j, alpha) in structure_and_anti(0.95)) {
    let ja = pointlin::deform_acs(&j, &alpha).unwrap();
    let n2 = pointlin::paper_norm_sq(&alpha).unwrap();
    let conj = pointlin::deform_by_conjugation(&j, &alpha).unwrap();
    prop_assert!(conj.max_abs_diff(&ja) < 1e-10);
    prop_assert!(ja.square_residual() < 1e-10);
    prop_assert!(ja.orthogonality_residual() < 1e-10);
    let fa = pointlin::f_deformed(&j, &alpha).unwrap();
    prop_assert!((pointlin::paper_norm_sq(&fa).unwrap() - 1.0).abs() < 1e-12);
    let k = pointlin::k_endo(&alpha).0;
    prop_assert!((k + k.transpose()).amax() == 0.0);
    let det = (Matrix4::identity() + j.0 * k).determinant();
    prop_assert!(det >= (1.0 - n2).powi(2) - 1e-10);
  }

  #[test]
  fn anti_invariant_forms_have_no_anti_self_dual_part((j, alpha) in structure_and_anti(1.0)) {
    prop_assert!(pointlin::split_sd(&alpha).minus.max_abs() < 1e-10);
    // J acts as a complex structure on the anti-invariant plane
    let ja = pointlin::j_act_anti(&j, &alpha).unwrap();
    let jja = pointlin::j_act_anti(&j, &ja).unwrap();
    prop_assert!(jja.max_abs_diff(&(-alpha)) < 1e-10);
  }

  #[test]
  fn deformed_fundamental_form_is_unit((j, alpha) in structure_and_anti(0.9)) {
    let fa = pointlin::fundamental_form(&pointlin::deform_acs(&j, &alpha).unwrap()).unwrap();
    prop_assert!((pointlin::wedge_to_volume(&fa, &fa) - 2.0).abs() < 1e-12);
  }

  #[test]
  fn sd_coordinates_round_trip(c in prop::array::uniform3(-2.0..2.0f64)) {
    let f = TwoForm::from_sd_coords(c);
    let back = f.sd_coords();
    prop_assert!(c.iter().zip(back.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
  }

  #[test]
  fn principal_angles_of_a_subspace_with_itself_vanish(u in prop::array::uniform3(-1.0..1.0f64)) {
    prop_assume!(u.iter().map(|x| x * x).sum::<f64>() > 1e-2);
    let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u = u.map(|x| x / n);
    let [v1, v2] = hermitian::pivoted_complement(u);
    let angles = cohomlab::principal_angles(&[v1, v2], &[v2, v1]);
    prop_assert!(angles.iter().all(|&a| a < 1e-7));
    prop_assert!(cohomlab::principal_angles(&[u], &[v1, v2])[0] > 1.57);
  }
}

proptest! {
  #![proptest_config(ProptestConfig::with_cases(12))]

  #[test]
  fn exterior_derivative_squares_to_zero_and_is_adjoint(seed in any::<u64>(), n in prop::sample::select(vec![6usize, 8])) {
    let g = grid(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = battery::random_bandlimited(g, &mut rng, 2);
    prop_assert!(torusfield::d_oneform(&torusfield::d_scalar(&f)).max_abs() < 1e-12);
    let theta = OneFormField::new(std::array::from_fn(|_| battery::random_bandlimited(g, &mut rng, 2))).unwrap();
    prop_assert!(torusfield::d_twoform(&torusfield::d_oneform(&theta)).max_abs() < 1e-12);
    let phi = TwoFormField::new(std::array::from_fn(|_| battery::random_bandlimited(g, &mut rng, 2))).unwrap();
    let lhs = torusfield::l2_inner(&torusfield::d_oneform(&theta), &phi).unwrap();
    let rhs = torusfield::l2_inner(&theta, &torusfield::codiff_twoform(&phi)).unwrap();
    prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-3));
  }

  #[test]
  fn integration_is_exact_inside_the_band(c in -1.0..1.0f64, seed in any::<u64>()) {
    let g = grid(8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let oscillating = battery::random_bandlimited(g, &mut rng, 3);
    // subtract the mean mode so only the constant c remains after integration
    let mean = torusfield::integrate(&oscillating);
    let f = oscillating.map(|v| v - mean + c);
    prop_assert!((torusfield::integrate(&f) - c).abs() <= 1e-14 * c.abs().max(1.0));
  }

  #[test]
  fn wedge_integral_is_symmetric(seed in any::<u64>()) {
    let g = grid(4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = TwoFormField::new(std::array::from_fn(|_| battery::random_bandlimited(g, &mut rng, 1))).unwrap();
    let b = TwoFormField::new(std::array::from_fn(|_| battery::random_bandlimited(g, &mut rng, 1))).unwrap();
    let ab = torusfield::wedge_integral(&a, &b).unwrap();
    let ba = torusfield::wedge_integral(&b, &a).unwrap();
    prop_assert!((ab - ba).abs() < 1e-15);
  }

  #[test]
  fn field_files_round_trip(values in prop::collection::vec(-1e6..1e6f64, 256)) {
    let g = grid(4);
    let f = ScalarField::new(g, values).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.ajc");
    torusfield::serialize_field(&f, &path).unwrap();
    let back: ScalarField = torusfield::deserialize_field(&path).unwrap();
    prop_assert_eq!(back, f);
  }

  #[test]
  fn random_structures_satisfy_triple_invariants(seed in 0u64..1000, amp in 0.05..0.9f64) {
    let t = hermitian::random_compatible_acs(grid(6), seed, amp, 2).unwrap();
    prop_assert!(t.invariant_residual() <= hermitian::TRIPLE_TOL);
    let r = cohomlab::gram_matrix(&t, cohomlab::DEFAULT_TOL_NULL);
    prop_assert!(r.h_minus <= cohomlab::B_PLUS);
    prop_assert!(r.eigenvalues[0] >= -1e-12);
    for i in 0..3 {
      for j in 0..3 {
        prop_assert!((r.matrix[i][j] - r.matrix[j][i]).abs() <= 1e-14);
      }
    }
    // every non-null direction has a nonvanishing f
    for v in &r.non_null_basis {
      let w = cohomlab::HarmonicBasis::combination(t.grid(), *v);
      prop_assert!(cohomlab::f_omega(&t, &w).unwrap().max_abs() > 0.0);
    }
  }

  #[test]
  fn bump_deformation_is_local(cx in 0.0..1.0f64, r in 0.1..0.3f64, h in 0.1..1.0f64) {
    let g = grid(8);
    let j0 = hermitian::standard_acs(g);
    let bump = BumpParams::new([cx, 0.5, 0.25, 0.0], r, h);
    let (alpha, _, _) = hermitian::cutoff_form(&j0, [0.0, 1.0, 0.0], &bump).unwrap();
    let t = hermitian::deform_field(&j0, &alpha).unwrap();
    for x in 0..g.node_count() {
      if alpha.at(x).max_abs() == 0.0 {
        prop_assert_eq!(t.j().at(x), j0.j().at(x));
      }
    }
    prop_assert!(hermitian::sup_norm_sq(&alpha) <= hermitian::SUP_NORM_MARGIN);
  }

  #[test]
  fn v_measure_is_a_fraction(seed in 0u64..100, c in prop::array::uniform3(-1.0..1.0f64), eps in 1e-9..0.5f64) {
    let t = hermitian::random_compatible_acs(grid(6), seed, 0.5, 2).unwrap();
    let w = cohomlab::HarmonicBasis::combination(t.grid(), c);
    let v = cohomlab::v_measure(&t, &w, eps).unwrap();
    prop_assert!((0.0..=1.0).contains(&v));
  }

  #[test]
  fn config_round_trips_through_json(grid_n in prop::sample::select(vec![4usize, 8, 16]), seed in any::<u64>(), amp in 0.01..0.9f64) {
    let cfg = LabConfig { grid_n, seed, amplitude: amp, ..LabConfig::default() };
    let back: LabConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    prop_assert_eq!(back, cfg);
  }
}

#[test]
fn semicontinuity_along_a_scaled_bump() {
  let g = grid(8);
  let j0 = hermitian::standard_acs(g);
  let (alpha, _, _) = hermitian::cutoff_form(&j0, [0.0, 1.0, 0.0], &BumpParams::new([0.5; 4], 0.2, 0.5)).unwrap();
  for k in 0..=19 {
    let t = hermitian::deform_field(&j0, &alpha.scale(0.05 * k as f64)).unwrap();
    assert!(cohomlab::gram_matrix(&t, cohomlab::DEFAULT_TOL_NULL).h_minus <= 2);
  }
}

#[test]
fn constant_structures_have_two_dimensional_kernel() {
  for c in [[1.0, 0.0, 0.0], [0.6, 0.8, 0.0], [0.0, 0.0, -1.0], [0.48, 0.6, 0.64]] {
    let f = TwoFormField::constant(grid(4), TwoForm::from_sd_coords(c));
    let t = HermitianTriple::from_fundamental_form(f).unwrap();
    let r = cohomlab::gram_matrix(&t, cohomlab::DEFAULT_TOL_NULL);
    assert_eq!(r.h_minus, 2);
    assert_eq!(cohomlab::lejmi_kernel_dim(&t, grid(4), cohomlab::DEFAULT_LEJMI_TOL).unwrap().kernel_dim, 2);
  }
}

/// Spectral derivative of the bump against its closed-form derivative.
fn bump_derivative_error(n: usize, bump: &BumpParams) -> f64 {
  let g = grid(n);
  let c = torusfield::bump_cutoff(g, bump).unwrap();
  let d = torusfield::partial(&c, 0);
  let exact = ScalarField::from_fn(g, |x| {
    let mut delta = [0.0; 4];
    for a in 0..4 {
      let t = x[a] - bump.center[a];
      delta[a] = t - t.round();
    }
    let r2: f64 = delta.iter().map(|t| t * t).sum();
    let s2 = r2 / (bump.radius * bump.radius);
    if s2 >= 1.0 {
      return 0.0;
    }
    bump.value_at(&x) * (-2.0 * delta[0] / (bump.radius * bump.radius * (1.0 - s2).powi(2)))
  });
  d.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn bump_derivative_converges_spectrally() {
  // Widest admissible bump; narrower ones are under-resolved at n = 16.
  let bump = BumpParams::new([0.5; 4], 0.49, 1.0);
  let e: Vec<f64> = [16, 32, 64].iter().map(|&n| bump_derivative_error(n, &bump)).collect();
  let (r1, r2) = (e[1] / e[0], e[2] / e[1]);
  assert!(r2 < r1, "ratio must shrink under refinement: {r1:e} then {r2:e}");
  assert!(r2 < 0.2, "32 -> 64 ratio {r2:e}");
}

