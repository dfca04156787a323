//! Average precision and mAP under the Medium, Hard and mAP@k protocols.

use std::collections::{HashMap, HashSet};

use superglobal::{average_precision, evaluate, GroundTruth, Interpolation, Protocol, QueryTruth};

fn main() -> superglobal::Result<()> {
    let positives: HashSet<usize> = [0].into();
    let none = HashSet::new();
    for mode in [Interpolation::Trapezoid, Interpolation::Plain] {
        let ap = average_precision(&[7, 0], &positives, &none, None, mode)?;
        println!("one positive at rank 2, {mode:?}: {ap:.4}");
    }

    let gt = GroundTruth {
        database: (0..6).map(|i| format!("img{i}")).collect(),
        queries: vec![
            QueryTruth {
                name: "bridge".into(),
                easy: vec![0, 2],
                hard: vec![4],
                junk: vec![1],
            },
            QueryTruth {
                name: "tower".into(),
                easy: vec![3],
                hard: vec![],
                junk: vec![],
            },
        ],
    };
    let results: HashMap<String, Vec<usize>> = [
        ("bridge".to_string(), vec![1, 0, 5, 4, 2, 3]),
        ("tower".to_string(), vec![0, 3, 1, 2, 4, 5]),
    ]
    .into();

    for protocol in [Protocol::Medium, Protocol::Hard, Protocol::PlainAt(2)] {
        let mode = match protocol {
            Protocol::PlainAt(_) => Interpolation::Plain,
            _ => Interpolation::Trapezoid,
        };
        let report = evaluate(&gt, &results, protocol, mode)?;
        println!("\n{protocol:?}");
        print!("{}", report.table());
    }
    Ok(())
}
