use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pooling::ScaleSet;
use crate::tensor_file;

/// Splits `<image>.s<k>.sgt` into `(image, k)`.
pub fn parse_scale_file_name(file: &str) -> Option<(&str, usize)> {
    let stem = file.strip_suffix(".sgt")?;
    let (image, scale) = stem.rsplit_once(".s")?;
    if image.is_empty() || scale.is_empty() || !scale.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((image, scale.parse().ok()?))
}

/// Loads every `<image>.s<k>.sgt` in `dir`, grouped per image in
/// lexicographic name order, scales in ascending `k`. Other files are
/// ignored.
pub fn load_features_dir(dir: &Path) -> Result<Vec<(String, ScaleSet)>> {
    let mut grouped: BTreeMap<String, BTreeMap<usize, std::path::PathBuf>> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let file = entry.file_name();
        let Some(file) = file.to_str() else { continue };
        if let Some((image, k)) = parse_scale_file_name(file) {
            grouped
                .entry(image.to_string())
                .or_default()
                .insert(k, entry.path());
        }
    }
    if grouped.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no <image>.s<k>.sgt files in {}",
            dir.display()
        )));
    }
    let mut channels = None;
    grouped
        .into_iter()
        .map(|(image, scales)| {
            let maps = scales
                .values()
                .map(tensor_file::read_feature_map)
                .collect::<Result<Vec<_>>>()?;
            let set = ScaleSet::new(maps)?;
            match channels {
                None => channels = Some(set.channels()),
                Some(c) if c != set.channels() => {
                    return Err(Error::DimMismatch(format!(
                        "{image} has {} channels, earlier images have {c}",
                        set.channels()
                    )))
                }
                _ => {}
            }
            Ok((image, set))
        })
        .collect()
}
