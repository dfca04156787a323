use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::pooling::PoolingConfig;
use crate::rerank::RerankParams;

/// Contents of the `--config` JSON. Every field is optional; command-line
/// flags take precedence over `paths`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pooling: PoolingConfig,
    pub rerank: RerankParams,
    pub paths: PathConfig,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub features: Option<PathBuf>,
    pub whitening: Option<PathBuf>,
    pub whitening_bias: Option<PathBuf>,
    pub descriptors: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub results: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"pooling": {"p": 3.0, "p_ms": "inf"}, "rerank": {"beta": 0}, "threads": 2}"#,
        )
        .unwrap();
        assert_eq!(cfg.pooling.p, 3.0);
        assert_eq!(cfg.pooling.p_r, 2.5);
        assert_eq!(cfg.rerank.beta, 0.0);
        assert_eq!(cfg.rerank.k_neighbors, 9);
        assert_eq!(cfg.threads, Some(2));
        assert!(serde_json::from_str::<RunConfig>(r#"{"pooling": {}, "bogus": 1}"#).is_err());
    }
}
