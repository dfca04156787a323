//! Direct-definition oracles and on-disk fixtures shared by the integration
//! tests. Nothing here calls into the library's numeric code.

#![allow(dead_code)]

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use superglobal::eval::NamedGroundTruth;
use superglobal::synthetic::{SyntheticDataset, SyntheticView};
use superglobal::tensor_file::{write_json, write_tensor};
use superglobal::{FeatureMap, PoolingConfig, ScaleSet, TensorFile};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

pub fn random_map(rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> FeatureMap {
    let (h, w, c) = (rng.random_range(1..9), rng.random_range(1..9), rng.random_range(1..17));
    let data = (0..h * w * c).map(|_| rng.random_range(lo..hi)).collect();
    FeatureMap::new(h, w, c, data).unwrap()
}

/// Unit vector with mostly positive entries, as post-ReLU descriptors are.
pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.2..1.0)).collect();
    normalize(&v).iter().map(|&x| x as f32).collect()
}

/// Channel `c` of a map as a list of values.
pub fn channel(m: &FeatureMap, c: usize) -> Vec<f64> {
    (0..m.height())
        .flat_map(|h| (0..m.width()).map(move |w| (h, w)))
        .map(|(h, w)| m.get(h, w, c) as f64)
        .collect()
}

pub fn power_mean(values: &[f64], p: f64) -> f64 {
    (values.iter().map(|v| v.powf(p)).sum::<f64>() / values.len() as f64).powf(1.0 / p)
}

/// Index reflected into `0..n` without repeating the edge.
pub fn reflect(mut i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let last = n as isize - 1;
    while i < 0 || i > last {
        if i < 0 {
            i = -i;
        }
        if i > last {
            i = 2 * last - i;
        }
    }
    i as usize
}

/// Windowed power mean at every position, one channel at a time.
pub fn regional_map(m: &FeatureMap, p_r: f64, window: usize) -> Vec<Vec<Vec<f64>>> {
    let r = (window / 2) as isize;
    let (hh, ww) = (m.height(), m.width());
    (0..hh)
        .map(|h| {
            (0..ww)
                .map(|w| {
                    (0..m.channels())
                        .map(|c| {
                            let mut vals = Vec::new();
                            for dh in -r..=r {
                                for dw in -r..=r {
                                    let y = reflect(h as isize + dh, hh);
                                    let x = reflect(w as isize + dw, ww);
                                    vals.push(m.get(y, x, c) as f64);
                                }
                            }
                            power_mean(&vals, p_r)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Full single-image descriptor with identity whitening, straight from the
/// formulas. Returned unit-norm in `f64`.
pub fn descriptor(scales: &ScaleSet, cfg: &PoolingConfig) -> Vec<f64> {
    let per_scale: Vec<Vec<f64>> = scales
        .maps()
        .iter()
        .map(|m| {
            let alpha = cfg.alpha as f32;
            let data = m.data().iter().map(|&v| if v < alpha { alpha } else { v }).collect();
            let m = FeatureMap::new(m.height(), m.width(), m.channels(), data).unwrap();
            let regional = regional_map(&m, cfg.p_r, cfg.region_window);
            (0..m.channels())
                .map(|c| {
                    let blended: Vec<f64> = (0..m.height())
                        .flat_map(|h| (0..m.width()).map(move |w| (h, w)))
                        .map(|(h, w)| {
                            if cfg.regional_enabled {
                                (regional[h][w][c] + m.get(h, w, c) as f64) / 2.0
                            } else {
                                m.get(h, w, c) as f64
                            }
                        })
                        .collect();
                    power_mean(&blended, cfg.p)
                })
                .collect()
        })
        .collect();
    let dim = per_scale[0].len();
    let merged: Vec<f64> = (0..dim)
        .map(|c| {
            let col: Vec<f64> = per_scale.iter().map(|g| g[c]).collect();
            if !cfg.scale_gem_enabled {
                col.iter().sum::<f64>() / col.len() as f64
            } else if cfg.p_ms.is_infinite() {
                col.iter().cloned().fold(f64::MIN, f64::max)
            } else {
                let all_min = per_scale.iter().flatten().cloned().fold(f64::MAX, f64::min);
                let zeta = (-all_min).max(0.0);
                let shifted: Vec<f64> = col.iter().map(|v| v + zeta).collect();
                power_mean(&shifted, cfg.p_ms) - zeta
            }
        })
        .collect();
    normalize(&merged)
}

/// Every database row scored against `q`, best first, ties by index.
pub fn rank_all(db: &[Vec<f64>], q: &[f64]) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = db.iter().enumerate().map(|(i, d)| (i, dot(q, d))).collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}

/// Refined descriptors of pool members `1..`, pool member 0 being the
/// query: weighted average with the `k` most similar other members.
pub fn refine(pool: &[&[f64]], k: usize, beta: f64) -> Vec<Vec<f64>> {
    (1..pool.len())
        .map(|d| {
            let mut others: Vec<(usize, f64)> = (0..pool.len())
                .filter(|&j| j != d)
                .map(|j| (j, dot(pool[d], pool[j])))
                .collect();
            others.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let mut num = pool[d].to_vec();
            let mut den = 1.0;
            for &(j, s) in &others[..k] {
                let w = s.max(0.0) * beta;
                for (n, v) in num.iter_mut().zip(pool[j]) {
                    *n += w * v;
                }
                den += w;
            }
            normalize(&num.iter().map(|n| n / den).collect::<Vec<_>>())
        })
        .collect()
}

/// Elementwise max, normalized.
pub fn expand(refined: &[Vec<f64>]) -> Vec<f64> {
    let mut mx = refined[0].clone();
    for r in &refined[1..] {
        for (a, b) in mx.iter_mut().zip(r) {
            *a = a.max(*b);
        }
    }
    normalize(&mx)
}

/// Reranked top-`m` block as `(database index, fused score)`, then the tail
/// of `initial` unchanged.
pub fn rerank(
    q: &[f64],
    db: &[Vec<f64>],
    initial: &[usize],
    m: usize,
    k: usize,
    beta: f64,
    expand_query: bool,
) -> Vec<(usize, f64)> {
    let m = m.min(initial.len());
    let k = k.min(m);
    let mut pool: Vec<&[f64]> = vec![q];
    pool.extend(initial[..m].iter().map(|&i| db[i].as_slice()));
    let refined = refine(&pool, k, beta);

    let s1: Vec<f64> = refined.iter().map(|r| dot(q, r)).collect();
    let fused: Vec<f64> = if expand_query {
        let qe = expand(&refined[..k]);
        (0..m).map(|r| (s1[r] + dot(&qe, pool[r + 1])) / 2.0).collect()
    } else {
        s1
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| fused[b].partial_cmp(&fused[a]).unwrap().then(a.cmp(&b)));
    let mut out: Vec<(usize, f64)> = order.into_iter().map(|r| (initial[r], fused[r])).collect();
    out.extend(initial[m..].iter().map(|&i| (i, f64::NAN)));
    out
}

/// Average precision from explicit prefix counts: drop ignored items,
/// then for each relevant rank count positives strictly before and up to it.
pub fn average_precision(
    ranked: &[usize],
    positives: &HashSet<usize>,
    ignore: &HashSet<usize>,
    truncate: Option<usize>,
    trapezoid: bool,
) -> f64 {
    let kept: Vec<usize> = ranked.iter().copied().filter(|i| !ignore.contains(i)).collect();
    let limit = truncate.unwrap_or(kept.len()).min(kept.len());
    let count = |upto: usize| kept[..upto].iter().filter(|i| positives.contains(i)).count() as f64;
    let mut total = 0.0;
    for r in 0..limit {
        if !positives.contains(&kept[r]) {
            continue;
        }
        let at = count(r + 1) / (r + 1) as f64;
        total += if trapezoid {
            let before = if r == 0 { 1.0 } else { count(r) / r as f64 };
            (before + at) / 2.0
        } else {
            at
        };
    }
    let denom = match truncate {
        Some(k) => positives.len().min(k),
        None => positives.len(),
    };
    total / denom as f64
}

/// Medium-protocol mAP from per-query rankings of database indices.
pub fn medium_map(dataset: &SyntheticDataset, rankings: &[Vec<usize>]) -> f64 {
    let gt = &dataset.ground_truth;
    let aps: Vec<f64> = gt
        .queries
        .iter()
        .zip(rankings)
        .filter(|(q, _)| !q.easy.is_empty() || !q.hard.is_empty())
        .map(|(q, r)| {
            let pos: HashSet<usize> = q.easy.iter().chain(&q.hard).copied().collect();
            let junk: HashSet<usize> = q.junk.iter().copied().collect();
            average_precision(r, &pos, &junk, None, true)
        })
        .collect();
    aps.iter().sum::<f64>() / aps.len() as f64
}

/// Files for running the command-line tool over a synthetic dataset.
pub struct DatasetFiles {
    pub database_features: PathBuf,
    pub query_features: PathBuf,
    /// Database and query maps together, for tuning.
    pub all_features: PathBuf,
    pub ground_truth: PathBuf,
    pub named_ground_truth: PathBuf,
}

fn write_views(dir: &Path, views: &[SyntheticView]) {
    fs::create_dir_all(dir).unwrap();
    for v in views {
        for (k, m) in v.maps.maps().iter().enumerate() {
            write_tensor(dir.join(format!("{}.s{k}.sgt", v.name)), &TensorFile::from(m)).unwrap();
        }
    }
}

pub fn write_dataset(root: &Path, ds: &SyntheticDataset) -> DatasetFiles {
    let files = DatasetFiles {
        database_features: root.join("features/db"),
        query_features: root.join("features/queries"),
        all_features: root.join("features/all"),
        ground_truth: root.join("gt.json"),
        named_ground_truth: root.join("gt_named.json"),
    };
    write_views(&files.database_features, &ds.database);
    write_views(&files.query_features, &ds.queries);
    write_views(&files.all_features, &ds.database);
    write_views(&files.all_features, &ds.queries);
    write_json(&files.ground_truth, &ds.ground_truth).unwrap();

    let gt = &ds.ground_truth;
    let names = |ix: &[usize]| ix.iter().map(|&i| gt.database[i].clone()).collect();
    let named = NamedGroundTruth {
        database: gt.database.clone(),
        queries: gt
            .queries
            .iter()
            .map(|q| superglobal::eval::NamedQueryTruth {
                name: q.name.clone(),
                easy: names(&q.easy),
                hard: names(&q.hard),
                junk: names(&q.junk),
            })
            .collect(),
    };
    write_json(&files.named_ground_truth, &named).unwrap();
    files
}

/// Runs the command-line tool and returns `(exit code, stdout, stderr)`.
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_superglobal"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
