//! Exact nearest-neighbour retrieval over a small descriptor index.

use superglobal::{Descriptor, DescriptorIndex, DescriptorSet};

fn main() -> superglobal::Result<()> {
    let raw: [(&str, [f64; 3]); 5] = [
        ("harbour", [1.0, 0.1, 0.0]),
        ("harbour_night", [0.9, 0.3, 0.1]),
        ("bridge", [0.2, 1.0, 0.1]),
        ("tower", [0.0, 0.2, 1.0]),
        ("tower_fog", [0.1, 0.1, 0.9]),
    ];
    let descs: Vec<Descriptor> = raw
        .iter()
        .map(|(_, v)| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            Descriptor::from_f64(&v.map(|x| x / n))
        })
        .collect::<superglobal::Result<_>>()?;
    let names = raw.iter().map(|(n, _)| n.to_string()).collect();
    let index = DescriptorIndex::build(&DescriptorSet::from_descriptors(&descs)?, names)?;

    let query = Descriptor::from_f64(&[0.8, 0.6, 0.0])?;
    let ranked = index.search("query", &query, 3)?;
    for (rank, hit) in ranked.hits.iter().enumerate() {
        println!("{}. {:<14} {:.4}", rank + 1, index.name(hit.index), hit.score);
    }

    println!("k = 5 returns {} hits", index.knn(&query, 5)?.len());
    if let Err(e) = index.knn(&query, 6) {
        println!("k = 6: {e}");
    }

    let wrong = Descriptor::from_f64(&[1.0, 0.0])?;
    if let Err(e) = index.knn(&wrong, 1) {
        println!("2-d query: {e}");
    }
    Ok(())
}
