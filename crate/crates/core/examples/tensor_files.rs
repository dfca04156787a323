//! Writes a feature map and a descriptor set in the SGT1 binary format,
//! reads them back, and shows what malformed files produce.
//!
//! cargo run --example tensor_files

use superglobal::tensor_file::{read_descriptor_set, read_feature_map, read_names, write_names};
use superglobal::{write_tensor, DescriptorSet, FeatureMap, TensorFile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;

    let map = FeatureMap::new(2, 2, 3, (0..12).map(|i| i as f32 * 0.25).collect())?;
    let map_path = dir.path().join("image.s0.sgt");
    write_tensor(&map_path, &TensorFile::from(&map))?;
    let bytes = std::fs::read(&map_path)?;
    println!("2x2x3 map -> {} bytes, header {:02x?}", bytes.len(), &bytes[..18]);
    assert_eq!(read_feature_map(&map_path)?, map);

    let set = DescriptorSet::new(4, vec![1.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5])?;
    let set_path = dir.path().join("descriptors.sgt");
    write_tensor(&set_path, &TensorFile::from(&set))?;
    let names_path = superglobal::tensor_file::names_path(&set_path);
    write_names(&names_path, &["first".into(), "second".into()])?;
    let back = read_descriptor_set(&set_path)?;
    println!(
        "{} descriptors of dim {} named {:?}",
        back.len(),
        back.dim(),
        read_names(&names_path)?
    );

    let mut truncated = bytes.clone();
    truncated.truncate(bytes.len() - 4);
    let mut bad_magic = bytes.clone();
    bad_magic[..4].copy_from_slice(b"SGT2");
    for (what, b) in [("truncated", truncated), ("bad magic", bad_magic)] {
        match TensorFile::decode(&b) {
            Err(e) => println!("{what}: {e}"),
            Ok(_) => unreachable!(),
        }
    }
    Ok(())
}
