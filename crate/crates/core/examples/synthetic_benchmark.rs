//! End-to-end run on generated data: pool every view, retrieve, rerank and
//! compare Medium/Hard mAP for the plain GeM baseline and the full pooling.

use std::collections::HashMap;
use std::time::Instant;

use superglobal::synthetic::{generate, SyntheticSpec, SyntheticView};
use superglobal::{
    evaluate, extract_batch, rerank, DescriptorIndex, DescriptorSet, Interpolation, PoolingConfig, Protocol,
    RerankParams, ScaleSet, WhiteningParams,
};

fn main() -> superglobal::Result<()> {
    let start = Instant::now();
    let spec = SyntheticSpec::default();
    let ds = generate(&spec)?;
    println!(
        "{} database views, {} queries, {} channels",
        ds.database.len(),
        ds.queries.len(),
        spec.channels
    );
    let maps = |v: &[SyntheticView]| v.iter().map(|x| x.maps.clone()).collect::<Vec<ScaleSet>>();
    let w = WhiteningParams::identity(spec.channels);

    for (label, cfg) in [("GeM baseline", PoolingConfig::baseline(3.0)), ("full pooling", PoolingConfig::default())] {
        let db = extract_batch(&maps(&ds.database), &cfg, &w)?;
        let queries = extract_batch(&maps(&ds.queries), &cfg, &w)?;
        let index = DescriptorIndex::build(&DescriptorSet::from_descriptors(&db)?, ds.ground_truth.database.clone())?;

        let mut first = HashMap::new();
        let mut second = HashMap::new();
        for (qt, q) in ds.ground_truth.queries.iter().zip(&queries) {
            let initial = index.search(&qt.name, q, index.len())?;
            second.insert(qt.name.clone(), rerank(q, &initial, &index, &RerankParams::default())?.indices());
            first.insert(qt.name.clone(), initial.indices());
        }
        for protocol in [Protocol::Medium, Protocol::Hard] {
            let score = |r| evaluate(&ds.ground_truth, r, protocol, Interpolation::Trapezoid).map(|e| e.map * 100.0);
            println!(
                "{label:<13} {protocol:?}: retrieval {:.2}  reranked {:.2}",
                score(&first)?,
                score(&second)?
            );
        }
    }
    println!("{:.2} s", start.elapsed().as_secs_f64());
    Ok(())
}
