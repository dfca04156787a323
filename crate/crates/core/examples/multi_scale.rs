//! Multi-scale descriptors. Each scale is pooled with Regional-GeM and the
//! per-scale vectors are merged with Scale-GeM, compared here with the
//! plain average over scales.

use superglobal::pooling::scale_gem;
use superglobal::{extract_descriptor, regional_gem, Descriptor, FeatureMap, PoolingConfig, ScaleSet, WhiteningParams};

fn scaled_map(size: usize, gain: f32) -> superglobal::Result<FeatureMap> {
    let channels = 4;
    let data = (0..size * size)
        .flat_map(|pos| (0..channels).map(move |c| gain * (1.0 + ((pos * 7 + c * 3) % 5) as f32) / 5.0))
        .collect();
    FeatureMap::new(size, size, channels, data)
}

fn main() -> superglobal::Result<()> {
    let scales = ScaleSet::new(vec![scaled_map(9, 1.0)?, scaled_map(6, 0.8)?, scaled_map(4, 1.3)?])?;
    let w = WhiteningParams::identity(4);
    let cfg = PoolingConfig::default();

    let per_scale: Vec<Descriptor> = scales
        .maps()
        .iter()
        .map(|m| regional_gem(m, &cfg, &w))
        .collect::<superglobal::Result<_>>()?;
    for (i, d) in per_scale.iter().enumerate() {
        println!("scale {i}: {:?}", d.as_slice());
    }
    for p_ms in [1.0, 4.0, f64::INFINITY] {
        println!("Scale-GeM p_ms = {p_ms}: {:?}", scale_gem(&per_scale, p_ms)?.as_slice());
    }

    let superglobal = extract_descriptor(&scales, &cfg, &w)?;
    let baseline = extract_descriptor(&scales, &PoolingConfig::baseline(3.0), &w)?;
    println!("final descriptor:    {:?}", superglobal.as_slice());
    println!("averaged baseline:   {:?}", baseline.as_slice());
    println!("cosine between them: {:.4}", superglobal.dot(&baseline));
    Ok(())
}
