//! Writes a generated dataset in the layout the `superglobal` binary reads:
//!
//! ```text
//! <out>/features/db/<name>.s<k>.sgt
//! <out>/features/queries/<name>.s<k>.sgt
//! <out>/gt.json
//! ```
//!
//! Usage: `cargo run --example export_dataset -- <out-dir>`

use std::path::Path;

use superglobal::synthetic::{generate, SyntheticSpec, SyntheticView};
use superglobal::tensor_file::write_json;
use superglobal::{write_tensor, TensorFile};

fn write_views(dir: &Path, views: &[SyntheticView]) -> superglobal::Result<()> {
    for v in views {
        for (k, m) in v.maps.maps().iter().enumerate() {
            write_tensor(dir.join(format!("{}.s{k}.sgt", v.name)), &TensorFile::from(m))?;
        }
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic-data".into());
    let out = Path::new(&out);
    let ds = generate(&SyntheticSpec::default())?;
    for (sub, views) in [("features/db", &ds.database), ("features/queries", &ds.queries)] {
        let dir = out.join(sub);
        std::fs::create_dir_all(&dir)?;
        write_views(&dir, views)?;
    }
    write_json(out.join("gt.json"), &ds.ground_truth)?;
    println!(
        "wrote {} database and {} query images to {}",
        ds.database.len(),
        ds.queries.len(),
        out.display()
    );
    Ok(())
}
