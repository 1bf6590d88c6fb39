//! Experiment configuration: a JSON document describing the model, the
//! communication graph, the gossip distribution and the run parameters.
//!
//! ```json
//! {
//!   "schema_version": "1.0",
//!   "model": { "F": [[1.2]], "Q": [[1.0]], "P0": [[1.0]],
//!              "sensors": [ { "C": [[1.0]], "R": [[1.0]] } ] },
//!   "graph": { "family": "path", "nodes": 1 },
//!   "distribution": { "kind": "explicit", "support": [[0]], "weights": [1.0] },
//!   "horizon": 100
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GikfError, Result};
use crate::matrix::{matrix_from_rows, PsdMatrix, SensorModel, SystemModel};
use crate::network::{default_matching_distribution, GossipDistribution, Graph, Matching};

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "P0")]
    pub p0: Vec<Vec<f64>>,
    pub sensors: Vec<SensorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GraphSpec {
    Path { nodes: usize },
    Cycle { nodes: usize },
    Complete { nodes: usize },
    Custom { nodes: usize, edges: Vec<(usize, usize)> },
}

impl GraphSpec {
    pub fn nodes(&self) -> usize {
        match self {
            GraphSpec::Path { nodes }
            | GraphSpec::Cycle { nodes }
            | GraphSpec::Complete { nodes }
            | GraphSpec::Custom { nodes, .. } => *nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistributionSpec {
    /// Matchings given as partner vectors with their probabilities.
    Explicit { support: Vec<Vec<usize>>, weights: Vec<f64> },
    Procedural { p_gossip: f64 },
}

/// Thresholds and grids for the statistical checks. Every field has a
/// default, so the whole block may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestSettings {
    /// Significance level of the two-sample KS comparisons.
    pub ks_alpha: f64,
    pub consensus_threshold: f64,
    pub consensus_horizon: usize,
    pub probe_times: Vec<usize>,
    pub boundedness_times: Vec<usize>,
    /// Multiples of α₀ forming the tail grid; the largest sets `J`.
    pub tail_multiples: Vec<f64>,
    pub epsilon_tail: f64,
    pub dominance_epsilon: f64,
    pub majorization_start: usize,
    pub majorization_horizon: usize,
    pub psd_tolerance: f64,
}

impl Default for TestSettings {
    fn default() -> Self {
        TestSettings {
            ks_alpha: 0.01,
            consensus_threshold: 0.05,
            consensus_horizon: 200,
            probe_times: vec![5, 25, 100],
            boundedness_times: vec![100, 500, 1000],
            tail_multiples: vec![0.25, 0.5, 1.0, 2.0, 5.0, 10.0],
            epsilon_tail: 0.05,
            dominance_epsilon: 1e-3,
            majorization_start: 5,
            majorization_horizon: 50,
            psd_tolerance: 1e-9,
        }
    }
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: String,
    #[serde(default)]
    pub name: String,
    pub model: ModelSpec,
    pub graph: GraphSpec,
    pub distribution: DistributionSpec,
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub snapshots: Vec<usize>,
    #[serde(default)]
    pub tests: TestSettings,
}

/// A validated configuration with its model and distribution built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: SystemModel,
    pub dist: GossipDistribution,
}

fn check_schema(version: &str) -> Result<()> {
    let major = version.split('.').next().and_then(|m| m.parse::<u32>().ok());
    if major != Some(SCHEMA_MAJOR) {
        return Err(GikfError::SchemaVersion {
            found: version.to_string(),
            supported: SCHEMA_MAJOR,
        });
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| GikfError::config("<document>", e.to_string()))?;
        match value.get("schema_version") {
            Some(serde_json::Value::String(v)) => check_schema(v)?,
            Some(_) => return Err(GikfError::config("schema_version", "must be a string such as \"1.0\"")),
            None => return Err(GikfError::config("schema_version", "missing field")),
        }
        let config: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| GikfError::config("<document>", e.to_string()))?;
        config.build()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical (compact) serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Validates every field and builds the model and distribution.
    pub fn build(&self) -> Result<Experiment> {
        check_schema(&self.schema_version)?;
        let model = self.build_model()?;
        let graph = self.build_graph()?;
        if graph.num_nodes() != model.num_sensors() {
            return Err(GikfError::config(
                "graph.nodes",
                format!("{} nodes but {} sensors", graph.num_nodes(), model.num_sensors()),
            ));
        }
        let dist = self.build_distribution(graph)?;
        if self.trials == 0 {
            return Err(GikfError::config("trials", "must be at least 1"));
        }
        if let Some(s) = self.snapshots.iter().find(|&&s| s > self.horizon) {
            return Err(GikfError::config("snapshots", format!("time {s} exceeds horizon {}", self.horizon)));
        }
        let t = &self.tests;
        if !(t.ks_alpha > 0.0 && t.ks_alpha < 1.0) {
            return Err(GikfError::config("tests.ks_alpha", "must lie in (0, 1)"));
        }
        if t.tail_multiples.is_empty() || t.tail_multiples.iter().any(|m| !(*m > 0.0)) {
            return Err(GikfError::config("tests.tail_multiples", "must be a nonempty list of positive numbers"));
        }
        if t.majorization_start > t.majorization_horizon {
            return Err(GikfError::config("tests.majorization_start", "exceeds tests.majorization_horizon"));
        }
        Ok(Experiment {
            config: self.clone(),
            model,
            dist,
        })
    }

    fn build_model(&self) -> Result<SystemModel> {
        let m = &self.model;
        let f = matrix_from_rows(&m.f).map_err(|e| GikfError::config("model.F", e.to_string()))?;
        if f.nrows() != f.ncols() {
            return Err(GikfError::config("model.F", format!("must be square, got {}x{}", f.nrows(), f.ncols())));
        }
        let dim = f.nrows();
        let psd = |rows: &[Vec<f64>], name: &str, field: &str| -> Result<PsdMatrix> {
            let mat = matrix_from_rows(rows).map_err(|e| GikfError::config(field, e.to_string()))?;
            PsdMatrix::named(mat, name).map_err(|e| GikfError::config(field, e.to_string()))
        };
        let q = psd(&m.q, "Q", "model.Q")?;
        let p0 = psd(&m.p0, "P0", "model.P0")?;
        for (x, field) in [(&q, "model.Q"), (&p0, "model.P0")] {
            if x.dim() != dim {
                return Err(GikfError::config(field, format!("expected {dim}x{dim} to match F, got {0}x{0}", x.dim())));
            }
        }
        if m.sensors.is_empty() {
            return Err(GikfError::config("model.sensors", "at least one sensor is required"));
        }
        let sensors = m
            .sensors
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let c = matrix_from_rows(&s.c).map_err(|e| GikfError::config(format!("model.sensors[{i}].C"), e.to_string()))?;
                if c.ncols() != dim {
                    return Err(GikfError::config(
                        format!("model.sensors[{i}].C"),
                        format!("expected {dim} columns, got {}", c.ncols()),
                    ));
                }
                let r = psd(&s.r, "R", &format!("model.sensors[{i}].R"))?;
                if r.dim() != c.nrows() {
                    return Err(GikfError::config(
                        format!("model.sensors[{i}].R"),
                        format!("expected {0}x{0} to match C, got {1}x{1}", c.nrows(), r.dim()),
                    ));
                }
                SensorModel::new(c, r).map_err(|e| GikfError::config(format!("model.sensors[{i}].R"), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        SystemModel::new(f, q, p0, sensors).map_err(|e| GikfError::config("model", e.to_string()))
    }

    fn build_graph(&self) -> Result<Graph> {
        let g = match &self.graph {
            GraphSpec::Path { nodes } => Graph::path(*nodes),
            GraphSpec::Cycle { nodes } => Graph::cycle(*nodes),
            GraphSpec::Complete { nodes } => Graph::complete(*nodes),
            GraphSpec::Custom { nodes, edges } => Graph::from_edges(*nodes, edges),
        };
        g.map_err(|e| GikfError::config("graph", e.to_string()))
    }

    fn build_distribution(&self, graph: Graph) -> Result<GossipDistribution> {
        match &self.distribution {
            DistributionSpec::Explicit { support, weights } => {
                let matchings = support
                    .iter()
                    .enumerate()
                    .map(|(k, p)| {
                        Matching::new(p.clone())
                            .map_err(|e| GikfError::config(format!("distribution.support[{k}]"), e.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if let Some(k) = matchings.iter().position(|m| m.num_nodes() != graph.num_nodes()) {
                    return Err(GikfError::config(
                        format!("distribution.support[{k}]"),
                        format!("expected {} entries", graph.num_nodes()),
                    ));
                }
                let total: f64 = weights.iter().sum();
                if weights.len() != matchings.len() || (total - 1.0).abs() > 1e-12 {
                    return Err(GikfError::config(
                        "distribution.weights",
                        format!("{} weights summing to {total}; need {} summing to 1", weights.len(), matchings.len()),
                    ));
                }
                GossipDistribution::explicit(graph, matchings, weights.clone())
                    .map_err(|e| GikfError::config("distribution", e.to_string()))
            }
            DistributionSpec::Procedural { p_gossip } => default_matching_distribution(graph, *p_gossip)
                .map_err(|e| GikfError::config("distribution.p_gossip", e.to_string())),
        }
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    ExperimentConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": "1.0",
        "model": { "F": [[1.2]], "Q": [[1.0]], "P0": [[1.0]],
                   "sensors": [ { "C": [[1.0]], "R": [[1.0]] } ] },
        "graph": { "family": "path", "nodes": 1 },
        "distribution": { "kind": "explicit", "support": [[0]], "weights": [1.0] },
        "horizon": 10
    }"#;

    fn field_of(err: GikfError) -> String {
        match err {
            GikfError::Config { field, .. } => field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.trials, 1);
        assert_eq!(c.tests, TestSettings::default());
        let exp = c.build().unwrap();
        assert_eq!(exp.model.num_sensors(), 1);
    }

    #[test]
    fn negative_q_is_rejected_by_name() {
        let text = MINIMAL.replace(r#""Q": [[1.0]]"#, r#""Q": [[-1.0]]"#);
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("Q"));
        assert_eq!(field_of(err), "model.Q");
    }

    #[test]
    fn field_precise_errors() {
        let cases = [
            (r#""weights": [1.0]"#, r#""weights": [0.9]"#, "distribution.weights"),
            (r#""C": [[1.0]]"#, r#""C": [[1.0, 0.0]]"#, "model.sensors[0].C"),
            (r#""nodes": 1"#, r#""nodes": 2"#, "graph.nodes"),
            (r#""horizon": 10"#, r#""horizon": 10, "trials": 0"#, "trials"),
        ];
        for (from, to, field) in cases {
            let err = ExperimentConfig::from_json(&MINIMAL.replace(from, to)).unwrap_err();
            assert_eq!(field_of(err), field);
        }
        let err = ExperimentConfig::from_json(&MINIMAL.replace(r#""horizon": 10"#, r#""horizn": 10"#)).unwrap_err();
        assert!(err.to_string().contains("horizn"));
    }

    #[test]
    fn unknown_major_version_is_rejected() {
        let err = ExperimentConfig::from_json(&MINIMAL.replace("\"1.0\"", "\"2.0\"")).unwrap_err();
        assert!(matches!(err, GikfError::SchemaVersion { .. }));
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("\"1.0\"", "\"1.3\"")).is_ok());
    }

    #[test]
    fn save_load_round_trip() {
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.model.q = vec![vec![0.1 + 0.2]];
        c.tests.dominance_epsilon = 1.0 / 3.0;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        c.save(&path).unwrap();
        let back = load_config(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn procedural_distribution() {
        let text = MINIMAL.replace(
            r#"{ "kind": "explicit", "support": [[0]], "weights": [1.0] }"#,
            r#"{ "kind": "procedural", "p_gossip": 1.5 }"#,
        );
        assert_eq!(field_of(ExperimentConfig::from_json(&text).unwrap_err()), "distribution.p_gossip");
    }
}
