//! Seeded synthetic retrieval datasets.
//!
//! Each cluster has a random non-negative center. A view of a cluster is
//! `normalize(max(center + noise, 0))`, and its feature maps are that vector
//! modulated by a random positive spatial pattern, so every pooling operator
//! recovers a descriptor close to the view vector. A fraction of views get
//! stronger noise and are labelled `hard`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::eval::{GroundTruth, QueryTruth};
use crate::pooling::ScaleSet;
use crate::tensor::FeatureMap;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub clusters: usize,
    /// Database views per cluster.
    pub views: usize,
    pub queries_per_cluster: usize,
    pub channels: usize,
    /// Spatial size of each scale, largest first.
    pub scales: Vec<(usize, usize)>,
    pub noise: f32,
    pub hard_noise: f32,
    pub hard_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            clusters: 20,
            views: 10,
            queries_per_cluster: 1,
            channels: 32,
            scales: vec![(7, 7), (5, 5)],
            noise: 0.08,
            hard_noise: 0.2,
            hard_fraction: 0.3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticView {
    pub name: String,
    pub cluster: usize,
    pub hard: bool,
    /// Unit-norm generating vector.
    pub vector: Vec<f32>,
    pub maps: ScaleSet,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub database: Vec<SyntheticView>,
    pub queries: Vec<SyntheticView>,
    pub ground_truth: GroundTruth,
}

fn unit(v: &mut [f32]) {
    let n = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x = (*x as f64 / n) as f32);
    }
}

fn view(
    rng: &mut ChaCha8Rng,
    spec: &SyntheticSpec,
    name: String,
    cluster: usize,
    center: &[f32],
    hard: bool,
) -> Result<SyntheticView> {
    let sigma = if hard { spec.hard_noise } else { spec.noise };
    let normal = Normal::new(0.0f32, sigma).expect("noise must be finite and >= 0");
    let mut vector: Vec<f32> = center
        .iter()
        .map(|&c| (c + normal.sample(rng)).max(0.0))
        .collect();
    if vector.iter().all(|&v| v == 0.0) {
        vector = center.to_vec();
    }
    unit(&mut vector);

    let maps = spec
        .scales
        .iter()
        .map(|&(h, w)| {
            let pattern: Vec<f32> = (0..h * w).map(|_| rng.random_range(0.5f32..1.5)).collect();
            let data = pattern
                .iter()
                .flat_map(|&s| vector.iter().map(move |&v| v * s))
                .collect();
            FeatureMap::new(h, w, spec.channels, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticView {
        name,
        cluster,
        hard,
        vector,
        maps: ScaleSet::new(maps)?,
    })
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f32>> = (0..spec.clusters)
        .map(|_| {
            let mut c: Vec<f32> = (0..spec.channels).map(|_| rng.random::<f32>()).collect();
            unit(&mut c);
            c
        })
        .collect();

    let mut database = Vec::with_capacity(spec.clusters * spec.views);
    for (k, center) in centers.iter().enumerate() {
        for v in 0..spec.views {
            let hard = rng.random_bool(spec.hard_fraction);
            database.push(view(&mut rng, spec, format!("c{k:02}_v{v:02}"), k, center, hard)?);
        }
    }
    let mut queries = Vec::with_capacity(spec.clusters * spec.queries_per_cluster);
    for (k, center) in centers.iter().enumerate() {
        for q in 0..spec.queries_per_cluster {
            queries.push(view(&mut rng, spec, format!("q{k:02}_{q}"), k, center, false)?);
        }
    }

    let ground_truth = GroundTruth {
        database: database.iter().map(|v| v.name.clone()).collect(),
        queries: queries
            .iter()
            .map(|q| {
                let (mut easy, mut hard) = (Vec::new(), Vec::new());
                for (i, d) in database.iter().enumerate().filter(|(_, d)| d.cluster == q.cluster) {
                    if d.hard {
                        hard.push(i);
                    } else {
                        easy.push(i);
                    }
                }
                QueryTruth {
                    name: q.name.clone(),
                    easy,
                    hard,
                    junk: Vec::new(),
                }
            })
            .collect(),
    };
    Ok(SyntheticDataset {
        database,
        queries,
        ground_truth,
    })
}
