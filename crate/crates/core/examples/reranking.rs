//! Global-only reranking. A distractor that happens to sit close to the
//! query is pushed down once the top results are refined against each
//! other and the query is expanded.

use superglobal::rerank::rerank_with_scores;
use superglobal::{Descriptor, DescriptorIndex, DescriptorSet, RerankParams};

fn unit(v: &[f64]) -> superglobal::Result<Descriptor> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Descriptor::from_f64(&v.iter().map(|x| x / n).collect::<Vec<_>>())
}

fn main() -> superglobal::Result<()> {
    let q = unit(&[0.9, 0.5, 0.2, 0.3])?;
    let db = [unit(&[0.7, 0.0, 0.1, 0.3])?, unit(&[0.9, 0.7, 1.0, 0.5])?];
    let index = DescriptorIndex::build(
        &DescriptorSet::from_descriptors(&db)?,
        vec!["distractor".into(), "landmark".into()],
    )?;
    let initial = index.search("query", &q, 2)?;

    let params = RerankParams {
        m_top: 2,
        k_neighbors: 2,
        ..RerankParams::default()
    };
    let (reranked, scores) = rerank_with_scores(&q, &initial, &index, &params)?;

    println!("before:");
    for h in &initial.hits {
        println!("  {:<11} {:.4}", index.name(h.index), h.score);
    }
    println!("after (beta = {}, K = {}):", params.beta, params.k_neighbors);
    for h in &reranked.hits {
        println!("  {:<11} {:.4}", index.name(h.index), h.score);
    }
    println!("S1 {:?}", scores.s1);
    println!("S2 {:?}", scores.s2);

    let untouched = superglobal::rerank(&q, &initial, &index, &RerankParams::no_op())?;
    assert_eq!(untouched.indices(), initial.indices());
    println!("no-op parameters keep the initial order");
    Ok(())
}
