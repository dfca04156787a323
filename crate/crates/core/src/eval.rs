//! Mean average precision under the revisited Oxford/Paris protocols and
//! truncated mAP@k.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relevance labels for one query, as indices into the database list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTruth {
    pub name: String,
    #[serde(default)]
    pub easy: Vec<usize>,
    #[serde(default)]
    pub hard: Vec<usize>,
    #[serde(default)]
    pub junk: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub database: Vec<String>,
    pub queries: Vec<QueryTruth>,
}

/// Same shape as [`GroundTruth`] but with image names in the label sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedGroundTruth {
    pub database: Vec<String>,
    pub queries: Vec<NamedQueryTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedQueryTruth {
    pub name: String,
    #[serde(default)]
    pub easy: Vec<String>,
    #[serde(default)]
    pub hard: Vec<String>,
    #[serde(default)]
    pub junk: Vec<String>,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        let n = self.database.len();
        let mut names = HashSet::new();
        for db in &self.database {
            if !names.insert(db) {
                return Err(Error::DuplicateName(db.clone()));
            }
        }
        for q in &self.queries {
            let mut seen = HashSet::new();
            for &i in q.easy.iter().chain(&q.hard).chain(&q.junk) {
                if i >= n {
                    return Err(Error::InvalidConfig(format!(
                        "query {:?} labels index {i} outside database of {n}",
                        q.name
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidConfig(format!(
                        "query {:?} puts index {i} in more than one label set",
                        q.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Resolves name-based label sets against the database list.
    pub fn from_named(named: &NamedGroundTruth) -> Result<Self> {
        let lookup: HashMap<&str, usize> = named
            .database
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        if lookup.len() != named.database.len() {
            let mut seen = HashSet::new();
            let dup = named.database.iter().find(|n| !seen.insert(*n)).unwrap();
            return Err(Error::DuplicateName(dup.clone()));
        }
        let resolve = |q: &str, list: &[String]| -> Result<Vec<usize>> {
            list.iter()
                .map(|n| {
                    lookup.get(n.as_str()).copied().ok_or_else(|| {
                        Error::InvalidConfig(format!("query {q:?} labels unknown image {n:?}"))
                    })
                })
                .collect()
        };
        let queries = named
            .queries
            .iter()
            .map(|q| {
                Ok(QueryTruth {
                    name: q.name.clone(),
                    easy: resolve(&q.name, &q.easy)?,
                    hard: resolve(&q.name, &q.hard)?,
                    junk: resolve(&q.name, &q.junk)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let gt = GroundTruth {
            database: named.database.clone(),
            queries,
        };
        gt.validate()?;
        Ok(gt)
    }
}

/// Which labels count as relevant and which are removed before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Positives: easy ∪ hard. Ignored: junk.
    Medium,
    /// Positives: hard. Ignored: easy ∪ junk.
    Hard,
    /// Positives: easy ∪ hard, ignoring junk, truncated at rank `k`.
    PlainAt(usize),
}

impl Protocol {
    /// `(positives, ignored)` for one query.
    pub fn split(&self, q: &QueryTruth) -> (HashSet<usize>, HashSet<usize>) {
        let easy = q.easy.iter().copied();
        let hard = q.hard.iter().copied();
        let junk = q.junk.iter().copied();
        match self {
            Protocol::Medium | Protocol::PlainAt(_) => (easy.chain(hard).collect(), junk.collect()),
            Protocol::Hard => (hard.collect(), easy.chain(junk).collect()),
        }
    }

    pub fn truncation(&self) -> Option<usize> {
        match self {
            Protocol::PlainAt(k) => Some(*k),
            _ => None,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Medium => f.write_str("medium"),
            Protocol::Hard => f.write_str("hard"),
            Protocol::PlainAt(k) => write!(f, "plain@{k}"),
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "medium" => Ok(Protocol::Medium),
            "hard" => Ok(Protocol::Hard),
            other => {
                let k = other
                    .strip_prefix("plain@")
                    .or_else(|| other.strip_prefix("map@"))
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "unknown protocol {s:?}; expected medium, hard or plain@<k>"
                        ))
                    })?;
                Ok(Protocol::PlainAt(k))
            }
        }
    }
}

impl Serialize for Protocol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Protocol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How precision is integrated over recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Trapezoid between precision just before and at each hit, with
    /// precision 1 before a hit at the first rank (revisited-benchmark
    /// `compute_ap`).
    #[default]
    Trapezoid,
    /// Precision at each hit, no interpolation.
    Plain,
}

/// Average precision of one ranking.
///
/// Ignored items are dropped and the remaining ranks close up. Positives
/// that never appear contribute zero. With `truncate = Some(k)` only the
/// first `k` remaining ranks count and the denominator is
/// `min(|positives|, k)`.
pub fn average_precision(
    ranked: &[usize],
    positives: &HashSet<usize>,
    ignore: &HashSet<usize>,
    truncate: Option<usize>,
    mode: Interpolation,
) -> Result<f64> {
    let mut seen = HashSet::with_capacity(ranked.len());
    for &i in ranked {
        if !seen.insert(i) {
            return Err(Error::DuplicateRank(i));
        }
    }
    if positives.is_empty() {
        return Ok(0.0);
    }
    let denom = match truncate {
        Some(k) => positives.len().min(k),
        None => positives.len(),
    } as f64;
    let limit = truncate.unwrap_or(usize::MAX);

    let mut ap = 0.0;
    let mut found = 0usize;
    for (rank, idx) in ranked
        .iter()
        .filter(|i| !ignore.contains(i))
        .enumerate()
        .take_while(|(r, _)| *r < limit)
    {
        if !positives.contains(idx) {
            continue;
        }
        let after = (found + 1) as f64 / (rank + 1) as f64;
        ap += match mode {
            Interpolation::Plain => after,
            Interpolation::Trapezoid => {
                let before = if rank == 0 {
                    1.0
                } else {
                    found as f64 / rank as f64
                };
                (before + after) / 2.0
            }
        };
        found += 1;
    }
    Ok(ap / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub name: String,
    /// `None` when the query has no positives under the protocol.
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub interpolation: Interpolation,
    pub map: f64,
    pub evaluated: usize,
    pub skipped: usize,
    pub per_query: Vec<QueryScore>,
}

impl EvalReport {
    /// Aligned text table with AP in percent.
    pub fn table(&self) -> String {
        let width = self
            .per_query
            .iter()
            .map(|q| q.name.len())
            .chain([5])
            .max()
            .unwrap_or(5);
        let mut out = format!("{:<width$}  {:>7}\n", "query", "AP");
        for q in &self.per_query {
            match q.ap {
                Some(ap) => out += &format!("{:<width$}  {:>7.2}\n", q.name, ap * 100.0),
                None => out += &format!("{:<width$}  {:>7}\n", q.name, "skip"),
            }
        }
        out += &format!("{:<width$}  {:>7.2}\n", format!("mAP ({})", self.protocol), self.map * 100.0);
        out
    }
}

/// mAP over the ground-truth queries. `results` maps query name to a ranking
/// of ground-truth database indices.
pub fn evaluate(
    gt: &GroundTruth,
    results: &HashMap<String, Vec<usize>>,
    protocol: Protocol,
    mode: Interpolation,
) -> Result<EvalReport> {
    if let Protocol::PlainAt(0) = protocol {
        return Err(Error::InvalidConfig("truncation rank must be >= 1".into()));
    }
    let per_query = gt
        .queries
        .par_iter()
        .map(|q| {
            let ranked = results
                .get(&q.name)
                .ok_or_else(|| Error::MissingQueryResult(q.name.clone()))?;
            let (pos, ignore) = protocol.split(q);
            let ap = if pos.is_empty() {
                None
            } else {
                Some(average_precision(ranked, &pos, &ignore, protocol.truncation(), mode)?)
            };
            Ok(QueryScore {
                name: q.name.clone(),
                ap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scored: Vec<f64> = per_query.iter().filter_map(|q| q.ap).collect();
    let map = if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    Ok(EvalReport {
        protocol,
        interpolation: mode,
        map,
        evaluated: scored.len(),
        skipped: per_query.len() - scored.len(),
        per_query,
    })
}
