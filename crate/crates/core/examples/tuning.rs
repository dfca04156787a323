//! Coarse-to-fine search of one pooling power.
//!
//! The first search runs on a closed-form objective. The second runs on
//! generated images in which a small object patch sits on top of strong
//! per-image clutter, so the GeM power decides how much of the object
//! survives pooling.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use superglobal::{
    evaluate, extract_batch, tune_parameter, DescriptorIndex, DescriptorSet, FeatureMap, GroundTruth,
    Interpolation, PoolingConfig, QueryTruth, ScaleSet, TuneSpec, TunedParameter, WhiteningParams,
};

const CHANNELS: usize = 16;
const SIDE: usize = 7;

fn random_unit(rng: &mut ChaCha8Rng) -> Vec<f32> {
    let v: Vec<f32> = (0..CHANNELS).map(|_| rng.random::<f32>()).collect();
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn image(rng: &mut ChaCha8Rng, center: &[f32]) -> superglobal::Result<ScaleSet> {
    let object: Vec<f32> = center.iter().map(|c| (c + rng.random_range(-0.1f32..0.1)).max(0.0)).collect();
    let clutter = random_unit(rng);
    let (top, left) = (rng.random_range(0..SIDE - 1), rng.random_range(0..SIDE - 1));
    let mut data = Vec::with_capacity(SIDE * SIDE * CHANNELS);
    for h in 0..SIDE {
        for w in 0..SIDE {
            let inside = (top..top + 2).contains(&h) && (left..left + 2).contains(&w);
            let gain = rng.random_range(0.2f32..0.5);
            for c in 0..CHANNELS {
                data.push(gain * clutter[c] + if inside { object[c] } else { 0.0 });
            }
        }
    }
    ScaleSet::new(vec![FeatureMap::new(SIDE, SIDE, CHANNELS, data)?])
}

fn main() -> superglobal::Result<()> {
    let spec = TuneSpec::for_parameter(TunedParameter::P);
    let bowl = tune_parameter(&spec, |x| Ok(-(x - 4.6) * (x - 4.6)))?;
    println!("-(x - 4.6)^2 peaks at {:.2} after {} evaluations\n", bowl.best_value, bowl.trace.len());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centers: Vec<Vec<f32>> = (0..12).map(|_| random_unit(&mut rng)).collect();
    let (mut db_maps, mut q_maps, mut database, mut queries) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, center) in centers.iter().enumerate() {
        let first = db_maps.len();
        for v in 0..8 {
            db_maps.push(image(&mut rng, center)?);
            database.push(format!("c{k}_v{v}"));
        }
        q_maps.push(image(&mut rng, center)?);
        queries.push(QueryTruth {
            name: format!("q{k}"),
            easy: (first..first + 8).collect(),
            hard: vec![],
            junk: vec![],
        });
    }
    let gt = GroundTruth { database, queries };
    let w = WhiteningParams::identity(CHANNELS);

    let spec = TuneSpec {
        upper: 16.0,
        ..TuneSpec::for_parameter(TunedParameter::P)
    };
    let outcome = tune_parameter(&spec, |value| {
        let mut cfg = PoolingConfig::default();
        spec.parameter.apply(&mut cfg, value);
        let db = extract_batch(&db_maps, &cfg, &w)?;
        let index = DescriptorIndex::build(&DescriptorSet::from_descriptors(&db)?, gt.database.clone())?;
        let mut results = HashMap::new();
        for (qt, q) in gt.queries.iter().zip(extract_batch(&q_maps, &cfg, &w)?) {
            results.insert(qt.name.clone(), index.search(&qt.name, &q, index.len())?.indices());
        }
        Ok(evaluate(&gt, &results, spec.protocol, Interpolation::Trapezoid)?.map)
    })?;

    for point in &outcome.trace {
        println!("p = {:>4.1}  mAP {:.2}", point.value, point.map * 100.0);
    }
    println!("best p = {:.1} ({:.2})", outcome.best_value, outcome.best_map * 100.0);
    Ok(())
}
