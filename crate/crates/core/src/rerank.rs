//! Reranking with global descriptors only.
//!
//! For one query and its top-`M` results:
//!
//! 1. Every top-`M` descriptor `g_d` is refined by weighted average pooling
//!    over its `K` nearest neighbours drawn from the pool `{g_q} ∪ top-M`:
//!    `g_dr = (g_d + Σ w_i β g_i) / (1 + Σ w_i β)`, `w_i = max(g_d·g_i, 0)`,
//!    then re-normalized.
//! 2. The query is expanded by elementwise max pooling over the refined
//!    descriptors of its own top-`K` results, then normalized (`g_qe`).
//! 3. Each item is scored `(g_q·g_dr + g_qe·g_d) / 2` and the top-`M` block
//!    is re-sorted. Items past rank `M` keep their place.
//!
//! The dominant cost is the `(M+1)²` similarity matrix of the pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{DescriptorIndex, Hit, RankedList, TopK};
use crate::tensor::{self, Descriptor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RerankParams {
    /// Number of first-stage results reranked (`M`).
    pub m_top: usize,
    /// Neighbours used to refine each descriptor (`K`).
    pub k_neighbors: usize,
    /// Weight multiplier for neighbours.
    pub beta: f64,
    pub query_expansion_enabled: bool,
}

impl Default for RerankParams {
    fn default() -> Self {
        Self {
            m_top: 400,
            k_neighbors: 9,
            beta: 0.15,
            query_expansion_enabled: true,
        }
    }
}

impl RerankParams {
    /// Settings under which reranking leaves the first-stage order untouched.
    pub fn no_op() -> Self {
        Self {
            beta: 0.0,
            query_expansion_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_top == 0 || self.k_neighbors == 0 {
            return Err(Error::InvalidConfig(
                "m_top and k_neighbors must be positive".into(),
            ));
        }
        if self.k_neighbors > self.m_top + 1 {
            return Err(Error::InvalidConfig(format!(
                "k_neighbors {} exceeds m_top + 1 = {}",
                self.k_neighbors,
                self.m_top + 1
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// `a · b` for an `f32` row against an `f64` vector. Same lane layout as
/// [`tensor::dot`], so an `f64` copy of an `f32` row scores bit-identically.
#[inline]
fn dot_mixed(a: &[f32], b: &[f64]) -> f64 {
    tensor::dot_widen(a, b)
}

/// Register tile of the similarity kernel: `ROWS × COLS` dot products, each
/// accumulated in `LANES` independent lanes.
const ROWS: usize = 4;
const COLS: usize = 4;
const LANES: usize = 4;

#[inline(always)]
fn tile_dots<const FUSED: bool>(a: [&[f64]; ROWS], b: [&[f64]; COLS]) -> [[f64; COLS]; ROWS] {
    let mut acc = [[[0.0f64; LANES]; COLS]; ROWS];
    let dim = a[0].len();
    let full = dim / LANES * LANES;
    let mut k = 0;
    while k < full {
        let y: [&[f64; LANES]; COLS] = std::array::from_fn(|c| b[c][k..k + LANES].try_into().unwrap());
        for r in 0..ROWS {
            let x: &[f64; LANES] = a[r][k..k + LANES].try_into().unwrap();
            for c in 0..COLS {
                for l in 0..LANES {
                    acc[r][c][l] = if FUSED {
                        x[l].mul_add(y[c][l], acc[r][c][l])
                    } else {
                        acc[r][c][l] + x[l] * y[c][l]
                    };
                }
            }
        }
        k += LANES;
    }
    let mut out = [[0.0f64; COLS]; ROWS];
    for r in 0..ROWS {
        for c in 0..COLS {
            let s = &acc[r][c];
            let tail: f64 = (full..dim).map(|t| a[r][t] * b[c][t]).sum();
            out[r][c] = (s[0] + s[2]) + (s[1] + s[3]) + tail;
        }
    }
    out
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn tile_dots_fma(a: [&[f64]; ROWS], b: [&[f64]; COLS]) -> [[f64; COLS]; ROWS] {
    tile_dots::<true>(a, b)
}

#[inline]
fn tile_dots_dispatch(a: [&[f64]; ROWS], b: [&[f64]; COLS]) -> [[f64; COLS]; ROWS] {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the CPU supports AVX2 and FMA.
            return unsafe { tile_dots_fma(a, b) };
        }
    }
    tile_dots::<false>(a, b)
}

/// Symmetric pairwise similarity matrix of the pool, row-major. The diagonal
/// is left at zero; nothing reads it.
fn similarity_matrix(pool: &[&[f32]]) -> Vec<f64> {
    let n = pool.len();
    let dim = pool.first().map_or(0, |r| r.len());
    let wide: Vec<f64> = pool.iter().flat_map(|r| r.iter().map(|&v| v as f64)).collect();
    let row = |i: usize| &wide[i.min(n - 1) * dim..(i.min(n - 1) + 1) * dim];

    let mut sims = vec![0.0f64; n * n];
    sims.par_chunks_mut(ROWS * n).enumerate().for_each(|(blk, out)| {
        let i0 = blk * ROWS;
        let a: [&[f64]; ROWS] = std::array::from_fn(|r| row(i0 + r));
        for j0 in (i0..n).step_by(COLS) {
            let d = tile_dots_dispatch(a, std::array::from_fn(|c| row(j0 + c)));
            for (r, dr) in d.iter().enumerate() {
                for (c, &v) in dr.iter().enumerate() {
                    let j = j0 + c;
                    if j > i0 + r && j < n && r * n < out.len() {
                        out[r * n + j] = v;
                    }
                }
            }
        }
    });
    for i in 1..n {
        for j in 0..i {
            sims[i * n + j] = sims[j * n + i];
        }
    }
    sims
}

/// Refines pool members `1..pool.len()` (pool member 0 is the query).
fn refine(pool: &[&[f32]], sims: &[f64], k: usize, beta: f64) -> Result<Vec<Vec<f64>>> {
    let n = pool.len();
    (1..n)
        .into_par_iter()
        .map(|d| {
            let own = pool[d];
            let mut top = TopK::new(k);
            for j in (0..n).filter(|&j| j != d) {
                top.push(Hit {
                    index: j,
                    score: sims[d * n + j],
                });
            }
            let mut acc: Vec<f64> = own.iter().map(|&v| v as f64).collect();
            let mut total = 0.0f64;
            for h in top.into_sorted() {
                let w = h.score.max(0.0) * beta;
                if w > 0.0 {
                    total += w;
                    for (a, &v) in acc.iter_mut().zip(pool[h.index]) {
                        *a += w * v as f64;
                    }
                }
            }
            if total == 0.0 {
                // Nothing was mixed in: keep the original row bit-for-bit.
                return Ok(acc);
            }
            let denom = 1.0 + total;
            acc.iter_mut().for_each(|a| *a /= denom);
            tensor::normalized_f64(&acc)
        })
        .collect()
}

/// Refined descriptors `g_dr` for every database member of `pool`.
///
/// `pool[0]` is the query, followed by the top-`M` database descriptors in
/// rank order; all must be unit-norm. Returns `M` refined descriptors.
pub fn refine_database(pool: &[Descriptor], params: &RerankParams) -> Result<Vec<Descriptor>> {
    let first = pool.first().ok_or(Error::EmptyInput)?;
    if pool.iter().any(|d| d.dim() != first.dim()) {
        return Err(Error::DimMismatch("pool descriptors differ in length".into()));
    }
    if pool.len() < params.k_neighbors + 1 {
        return Err(Error::PoolTooSmall {
            pool: pool.len(),
            k: params.k_neighbors,
        });
    }
    let rows: Vec<&[f32]> = pool.iter().map(|d| d.as_slice()).collect();
    let sims = similarity_matrix(&rows);
    refine(&rows, &sims, params.k_neighbors, params.beta)?
        .iter()
        .map(|v| Descriptor::from_f64(v))
        .collect()
}

fn max_pool_normalized<'a>(refined: impl IntoIterator<Item = &'a Vec<f64>>) -> Result<Vec<f64>> {
    let mut it = refined.into_iter();
    let mut out = it.next().ok_or(Error::EmptyInput)?.clone();
    for r in it {
        if r.len() != out.len() {
            return Err(Error::DimMismatch("refined descriptors differ in length".into()));
        }
        for (o, &v) in out.iter_mut().zip(r) {
            *o = o.max(v);
        }
    }
    tensor::normalized_f64(&out)
}

/// Expanded query `g_qe`: elementwise max over the given refined
/// descriptors, L2-normalized.
pub fn expand_query(refined_topk: &[Descriptor]) -> Result<Descriptor> {
    let rows: Vec<Vec<f64>> = refined_topk
        .iter()
        .map(|d| d.as_slice().iter().map(|&v| v as f64).collect())
        .collect();
    Descriptor::from_f64(&max_pool_normalized(&rows)?)
}

/// Per-item scores behind a reranked block, in original rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankScores {
    /// `g_q · g_dr`.
    pub s1: Vec<f64>,
    /// `g_qe · g_d`; empty when query expansion is disabled.
    pub s2: Vec<f64>,
    pub fused: Vec<f64>,
}

/// Reranks the top-`M` block of `initial`.
pub fn rerank(
    g_q: &Descriptor,
    initial: &RankedList,
    index: &DescriptorIndex,
    params: &RerankParams,
) -> Result<RankedList> {
    Ok(rerank_with_scores(g_q, initial, index, params)?.0)
}

pub fn rerank_with_scores(
    g_q: &Descriptor,
    initial: &RankedList,
    index: &DescriptorIndex,
    params: &RerankParams,
) -> Result<(RankedList, RerankScores)> {
    params.validate()?;
    if g_q.dim() != index.dim() {
        return Err(Error::DimMismatch(format!(
            "query has {} dims, index has {}",
            g_q.dim(),
            index.dim()
        )));
    }
    if let Some(h) = initial.hits.iter().find(|h| h.index >= index.len()) {
        return Err(Error::DimMismatch(format!(
            "result index {} outside database of {}",
            h.index,
            index.len()
        )));
    }
    let m = params.m_top.min(initial.hits.len());
    if m == 0 {
        return Ok((
            initial.clone(),
            RerankScores {
                s1: vec![],
                s2: vec![],
                fused: vec![],
            },
        ));
    }
    // Databases smaller than K + 1 refine with every other pool member.
    let k = params.k_neighbors.min(m);
    let block = &initial.hits[..m];

    let mut pool: Vec<&[f32]> = Vec::with_capacity(m + 1);
    pool.push(g_q.as_slice());
    pool.extend(block.iter().map(|h| index.row(h.index)));
    let sims = similarity_matrix(&pool);
    let refined = refine(&pool, &sims, k, params.beta)?;

    let q = g_q.as_slice();
    let s1: Vec<f64> = refined.iter().map(|r| dot_mixed(q, r)).collect();
    let (s2, fused) = if params.query_expansion_enabled {
        let expanded = max_pool_normalized(&refined[..k])?;
        let s2: Vec<f64> = block
            .iter()
            .map(|h| dot_mixed(index.row(h.index), &expanded))
            .collect();
        let fused = s1.iter().zip(&s2).map(|(a, b)| (a + b) / 2.0).collect();
        (s2, fused)
    } else {
        (Vec::new(), s1.clone())
    };

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| fused[b].total_cmp(&fused[a]).then(a.cmp(&b)));
    let mut hits: Vec<Hit> = order
        .into_iter()
        .map(|r| Hit {
            index: block[r].index,
            score: fused[r],
        })
        .collect();
    hits.extend_from_slice(&initial.hits[m..]);
    Ok((
        RankedList {
            query: initial.query.clone(),
            hits,
        },
        RerankScores { s1, s2, fused },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f32]) -> Descriptor {
        tensor::l2_normalize(&Descriptor::new(v.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn zero_beta_keeps_descriptors() {
        let pool = vec![unit(&[1.0, 0.2, 0.0]), unit(&[0.3, 1.0, 0.1]), unit(&[0.0, 0.5, 1.0])];
        let params = RerankParams {
            beta: 0.0,
            k_neighbors: 2,
            ..RerankParams::default()
        };
        let out = refine_database(&pool, &params).unwrap();
        assert_eq!(out, pool[1..].to_vec());
    }

    #[test]
    fn identical_pool_is_fixed_point() {
        let u = unit(&[0.2, 0.4, 0.1, 0.9]);
        let pool = vec![u.clone(); 6];
        let params = RerankParams {
            k_neighbors: 3,
            ..RerankParams::default()
        };
        for d in refine_database(&pool, &params).unwrap() {
            for (a, b) in d.as_slice().iter().zip(u.as_slice()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pool_too_small() {
        let pool = vec![unit(&[1.0, 0.0]), unit(&[0.0, 1.0])];
        let params = RerankParams {
            k_neighbors: 2,
            ..RerankParams::default()
        };
        assert!(matches!(
            refine_database(&pool, &params),
            Err(Error::PoolTooSmall { pool: 2, k: 2 })
        ));
    }

    #[test]
    fn expand_examples() {
        let u = unit(&[0.3, 0.4, 0.5]);
        let out = expand_query(std::slice::from_ref(&u)).unwrap();
        for (a, b) in out.as_slice().iter().zip(u.as_slice()) {
            assert!((a - b).abs() < 1e-7);
        }
        let out = expand_query(&[unit(&[1.0, 0.0]), unit(&[0.0, 1.0])]).unwrap();
        let r = std::f32::consts::FRAC_1_SQRT_2;
        assert!((out.as_slice()[0] - r).abs() < 1e-6);
        assert!((out.as_slice()[1] - r).abs() < 1e-6);
        assert!(matches!(expand_query(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn params_validation() {
        assert!(RerankParams::default().validate().is_ok());
        let bad = RerankParams {
            m_top: 3,
            k_neighbors: 5,
            ..RerankParams::default()
        };
        assert!(bad.validate().is_err());
        let json: RerankParams = serde_json::from_str(r#"{"beta": 0.0}"#).unwrap();
        assert_eq!(json.m_top, 400);
        assert_eq!(json.beta, 0.0);
    }

    #[test]
    fn mixed_dot_matches_plain_dot() {
        let a: Vec<f32> = (0..29).map(|i| (i as f32 * 0.7).sin()).collect();
        let b: Vec<f32> = (0..29).map(|i| (i as f32 * 0.3).cos()).collect();
        let b64: Vec<f64> = b.iter().map(|&v| v as f64).collect();
        assert_eq!(dot_mixed(&a, &b64), tensor::dot(&a, &b));
    }
}
