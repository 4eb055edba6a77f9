//! Deforming a single compatible structure by an anti-invariant 2-form, with
//! the conjugation formula and the closed form compared.
//!
//! `cargo run --example pointwise_deformation`

use acslab::pointlin::{self, Endomorphism4, OMEGA2, OMEGA3};

fn main() -> Result<(), Box<dyn std::error::Error>> {
  let j0 = Endomorphism4::standard();
  for s in [0.0, 0.25, 0.5, 0.9] {
    let alpha = OMEGA2 * (0.6 * s) + OMEGA3 * (0.8 * s);
    let norm_sq = pointlin::paper_norm_sq(&alpha)?;
    let closed = pointlin::deform_closed_form(&j0, &alpha, norm_sq);
    let conj = pointlin::deform_by_conjugation(&j0, &alpha).ok_or("Id + J K singular")?;
    let j = pointlin::deform_acs(&j0, &alpha)?;
    let f = pointlin::fundamental_form(&j)?;
    println!(
      "|a|^2 = {norm_sq:.4}  routes differ by {:.1e}  J^2+1 = {:.1e}  F sd-coords {:?}",
      closed.max_abs_diff(&conj),
      j.square_residual(),
      f.sd_coords().map(|c| (c * 1e6).round() / 1e6),
    );
  }
  Ok(())
}
