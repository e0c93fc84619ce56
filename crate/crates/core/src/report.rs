//! Metric reports and configuration fingerprints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Which task produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    NodeCls,
    NodeGnn,
    LpRank,
    LpThresh,
    LpBinary,
    LpGnn,
    TripleCls,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::NodeCls,
        TaskKind::NodeGnn,
        TaskKind::LpRank,
        TaskKind::LpThresh,
        TaskKind::LpBinary,
        TaskKind::LpGnn,
        TaskKind::TripleCls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::NodeCls => "node-cls",
            TaskKind::NodeGnn => "node-gnn",
            TaskKind::LpRank => "lp-rank",
            TaskKind::LpThresh => "lp-thresh",
            TaskKind::LpBinary => "lp-binary",
            TaskKind::LpGnn => "lp-gnn",
            TaskKind::TripleCls => "triple-cls",
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown task `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: TaskKind,
    #[serde(default)]
    pub dataset: String,
    /// Embedding or network the metrics belong to, e.g. `transe-l2`.
    #[serde(default)]
    pub model: String,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub fingerprint: String,
    pub seed: u64,
}

impl MetricsReport {
    pub fn new(task: TaskKind, seed: u64) -> Self {
        MetricsReport {
            task,
            dataset: String::new(),
            model: String::new(),
            metrics: BTreeMap::new(),
            fingerprint: String::new(),
            seed,
        }
    }

    pub fn insert(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    /// Flat text form: metadata as `# key=value` comments, then one
    /// `metric=value` line per metric in key order.
    pub fn to_kv(&self) -> String {
        let mut out = format!(
            "# task={}\n# dataset={}\n# model={}\n# fingerprint={}\n# seed={}\n",
            self.task, self.dataset, self.model, self.fingerprint, self.seed
        );
        for (k, v) in &self.metrics {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut task = None;
        let mut report = MetricsReport::new(TaskKind::LpRank, 0);
        for (i, line) in text.lines().enumerate() {
            let err = |m: &str| Error::Parse {
                line: i + 1,
                message: m.to_string(),
            };
            if line.trim().is_empty() {
                continue;
            }
            let (meta, body) = match line.strip_prefix("# ") {
                Some(rest) => (true, rest),
                None => (false, line),
            };
            let (k, v) = body.split_once('=').ok_or_else(|| err("expected key=value"))?;
            if meta {
                match k {
                    "task" => task = Some(v.parse()?),
                    "dataset" => report.dataset = v.to_string(),
                    "model" => report.model = v.to_string(),
                    "fingerprint" => report.fingerprint = v.to_string(),
                    "seed" => report.seed = v.parse().map_err(|_| err("bad seed"))?,
                    _ => return Err(err("unknown metadata key")),
                }
            } else {
                let value: f64 = v.parse().map_err(|_| err("bad metric value"))?;
                report.metrics.insert(k.to_string(), value);
            }
        }
        report.task = task.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing task".into(),
        })?;
        Ok(report)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Metric values must be finite; rates must lie in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        for (k, &v) in &self.metrics {
            if !v.is_finite() {
                return Err(Error::invalid(format!("metric {k} is not finite")));
            }
            let is_rate = ["accuracy", "f1", ".ap", "mrr", "hits@"]
                .iter()
                .any(|s| k.contains(s));
            if is_rate && !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("metric {k}={v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn fingerprint(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricsReport {
        let mut r = MetricsReport::new(TaskKind::LpRank, 7);
        r.dataset = "cycle".into();
        r.model = "transe-l2".into();
        r.fingerprint = fingerprint(b"cfg");
        r.insert("lp.rank.filtered.mrr", 0.1 + 0.2);
        r.insert("lp.rank.raw.hits@1", 1.0 / 3.0);
        r
    }

    #[test]
    fn kv_and_json_round_trip() {
        let r = sample();
        assert_eq!(MetricsReport::from_kv(&r.to_kv()).unwrap(), r);
        assert_eq!(MetricsReport::from_json(&r.to_json().unwrap()).unwrap(), r);
        assert!(r.to_kv().contains("\nlp.rank.filtered.mrr=0.30000000000000004\n"));
    }

    #[test]
    fn validation_bounds() {
        let mut r = sample();
        assert!(r.validate().is_ok());
        r.insert("node.accuracy", 1.5);
        assert!(r.validate().is_err());
        let mut r = sample();
        r.insert("x", f64::NAN);
        assert!(r.validate().is_err());
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            fingerprint(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
