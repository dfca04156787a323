//! Exact top-k retrieval over an in-memory set of unit-norm descriptors.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{self, Descriptor, DescriptorSet};

/// Rows scanned per parallel task.
const CHUNK_ROWS: usize = 1024;

#[derive(Debug, Clone)]
pub struct DescriptorIndex {
    rows: DescriptorSet,
    names: Vec<String>,
}

/// One retrieved database item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub index: usize,
    pub score: f64,
}

/// Results for one query, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query: String,
    pub hits: Vec<Hit>,
}

impl RankedList {
    pub fn indices(&self) -> Vec<usize> {
        self.hits.iter().map(|h| h.index).collect()
    }
}

/// Orders hits best-first: higher score, then lower database index.
#[inline]
pub(crate) fn rank_order(a: &Hit, b: &Hit) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.index.cmp(&b.index))
}

/// Heap wrapper whose maximum is the *worst* hit kept so far.
#[derive(PartialEq)]
struct Worst(Hit);

impl Eq for Worst {}

impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

/// Keeps the best `k` hits seen.
pub(crate) struct TopK {
    k: usize,
    heap: BinaryHeap<Worst>,
}

impl TopK {
    pub(crate) fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, hit: Hit) {
        if self.k == 0 {
            return;
        }
        if self.heap.len() < self.k {
            self.heap.push(Worst(hit));
        } else if let Some(mut top) = self.heap.peek_mut() {
            if rank_order(&hit, &top.0) == Ordering::Less {
                *top = Worst(hit);
            }
        }
    }

    pub(crate) fn merge(mut self, other: TopK) -> TopK {
        for Worst(h) in other.heap {
            self.push(h);
        }
        self
    }

    pub(crate) fn into_sorted(self) -> Vec<Hit> {
        let mut hits: Vec<Hit> = self.heap.into_iter().map(|w| w.0).collect();
        hits.sort_by(rank_order);
        hits
    }
}

impl DescriptorIndex {
    /// Re-normalizes every row and checks names are unique.
    pub fn build(descs: &DescriptorSet, names: Vec<String>) -> Result<Self> {
        if names.len() != descs.len() {
            return Err(Error::DimMismatch(format!(
                "{} descriptors but {} names",
                descs.len(),
                names.len()
            )));
        }
        let mut seen = HashSet::with_capacity(names.len());
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::DuplicateName(n.clone()));
            }
        }
        let mut data = Vec::with_capacity(descs.data().len());
        for row in descs.rows() {
            data.extend(tensor::normalized(row)?);
        }
        Ok(Self {
            rows: DescriptorSet::new(descs.dim(), data)?,
            names,
        })
    }

    pub fn dim(&self) -> usize {
        self.rows.dim()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        self.rows.row(i)
    }

    pub fn descriptors(&self) -> &DescriptorSet {
        &self.rows
    }

    /// The `k` rows with the largest dot product against `q`, best first,
    /// ties broken by ascending row index.
    pub fn knn(&self, q: &Descriptor, k: usize) -> Result<Vec<Hit>> {
        if q.dim() != self.dim() {
            return Err(Error::DimMismatch(format!(
                "query has {} dims, index has {}",
                q.dim(),
                self.dim()
            )));
        }
        if k == 0 || k > self.len() {
            return Err(Error::KTooLarge { k, n: self.len() });
        }
        let q = q.as_slice();
        let dim = self.dim();
        let best = self
            .rows
            .data()
            .par_chunks(CHUNK_ROWS * dim)
            .enumerate()
            .map(|(chunk, block)| {
                let mut top = TopK::new(k);
                for (j, row) in block.chunks_exact(dim).enumerate() {
                    top.push(Hit {
                        index: chunk * CHUNK_ROWS + j,
                        score: tensor::dot(q, row),
                    });
                }
                top
            })
            .reduce(|| TopK::new(k), TopK::merge);
        Ok(best.into_sorted())
    }

    pub fn search(&self, query: &str, q: &Descriptor, k: usize) -> Result<RankedList> {
        Ok(RankedList {
            query: query.to_string(),
            hits: self.knn(q, k)?,
        })
    }
}
