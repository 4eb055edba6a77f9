//! Writing and reading fields and whole structures in the binary field format.
//!
//! `cargo run --example field_io`

use acslab::hermitian::{self, HermitianTriple};
use acslab::torusfield::{self, FieldKind, GridSpec, TwoFormField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
  let dir = std::env::temp_dir().join(format!("acslab-field-io-{}", std::process::id()));
  std::fs::create_dir_all(&dir)?;
  let grid = GridSpec::new(6)?;
  let t = hermitian::random_compatible_acs(grid, 11, 0.3, 1)?;

  let path = dir.join("F.ajc");
  torusfield::serialize_field(t.f(), &path)?;
  let bytes = std::fs::read(&path)?;
  let header_len = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
  println!("header {:?}, payload {} bytes", String::from_utf8_lossy(&bytes[..header_len]), bytes.len() - header_len);
  let back: TwoFormField = torusfield::deserialize_field(&path)?;
  println!("round trip exact: {}", &back == t.f());

  t.save(&dir, "random11", &serde_json::json!({ "seed": 11, "amplitude": 0.3 }))?;
  let (loaded, params) = HermitianTriple::load(&dir, "random11")?;
  println!("triple reloaded, max |dJ| = {:.1e}, params {params}", loaded.j().max_abs_diff(t.j()));
  assert_eq!(torusfield::read_raw(dir.join("random11.J.ajc"))?.kind, FieldKind::Endo);

  std::fs::remove_dir_all(&dir)?;
  Ok(())
}
