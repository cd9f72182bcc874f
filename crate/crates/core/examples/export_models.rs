//! Writes the shipped model files `delta_mpp3h.json` and `fourbar.json`.
//!
//! Usage: `cargo run --example export_models [-- <dir>]` (default `models/`).

use std::path::PathBuf;

use pkmdyn::models::delta::{build_delta, DeltaParams};
use pkmdyn::models::fourbar::{build_fourbar, FourbarParams};

fn main() -> pkmdyn::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
    });
    std::fs::create_dir_all(&dir).map_err(|source| pkmdyn::Error::Io { path: dir.clone(), source })?;
    for (name, file) in [
        ("delta_mpp3h.json", build_delta(&DeltaParams::default())?),
        ("fourbar.json", build_fourbar(&FourbarParams::default())?),
    ] {
        let path = dir.join(name);
        file.save(&path)?;
        let pkm = file.compile()?;
        println!("{}: {} limbs, {} actuators, {} DOF", path.display(), pkm.limbs.len(), pkm.n_act(), pkm.dof());
    }
    Ok(())
}
