//! Experiment configuration: one TOML file with a section per stage.

use std::path::{Path, PathBuf};

use kgrefine::downstream::{ClassifierConfig, NodeTaskConfig};
use kgrefine::features::{DeepWalkConfig, FeatureKind};
use kgrefine::gnn::{GnnConfig, GnnKind};
use kgrefine::graph::{Format, Structure, SyntheticSpec};
use kgrefine::kge::{ModelKind, TrainConfig};
use kgrefine::report::TaskKind;
use kgrefine::search::SearchSpace;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds every stage: graph generation, splits, initializations, walks
    /// and negative sampling.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub kge: KgeSection,
    #[serde(default)]
    pub features: FeaturesSection,
    #[serde(default)]
    pub gnn: GnnSection,
    #[serde(default)]
    pub task: TaskSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSpace>,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs/default")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Relative paths resolve against the config file's directory.
    pub triples: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

fn default_format() -> Format {
    Format::Tsv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub structure: Structure,
    pub n_entities: usize,
    #[serde(default = "one")]
    pub n_relations: usize,
    #[serde(default)]
    pub noise_frac: f64,
}

fn one() -> usize {
    1
}

impl SyntheticSection {
    pub fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            noise_frac: self.noise_frac,
            ..SyntheticSpec::new(self.structure, self.n_entities, self.n_relations, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train: f64,
    pub valid: f64,
    pub node_train: f64,
    pub node_valid: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train: 0.8,
            valid: 0.1,
            node_train: 0.8,
            node_valid: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KgeSection {
    pub model: ModelKind,
    pub train: TrainConfig,
}

impl Default for KgeSection {
    fn default() -> Self {
        KgeSection {
            model: ModelKind::TransEL2,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub kind: FeatureKind,
    /// Width of the one-hot encodings.
    pub max_bins: usize,
    /// Width of random features.
    pub dim: usize,
    pub deepwalk: DeepWalkConfig,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            kind: FeatureKind::InDegree,
            max_bins: 32,
            dim: 16,
            deepwalk: DeepWalkConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnSection {
    pub model: GnnKind,
    /// When false, R-GCN learns its own input table.
    pub use_features: bool,
    pub train: GnnConfig,
}

impl Default for GnnSection {
    fn default() -> Self {
        GnnSection {
            model: GnnKind::Gcn,
            use_features: true,
            train: GnnConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub kind: TaskKind,
    /// Corruptions per positive for triple classification (1 or 2).
    pub neg_ratio: usize,
    /// Corruptions per positive for threshold-based link prediction.
    pub negatives_per_positive: usize,
    pub node: NodeTaskConfig,
    pub classifier: ClassifierConfig,
}

impl Default for TaskSection {
    fn default() -> Self {
        TaskSection {
            kind: TaskKind::LpRank,
            neg_ratio: 1,
            negatives_per_positive: 1,
            node: NodeTaskConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a config file, resolving relative data paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(data) = cfg.data.as_mut() {
            data.triples = base.join(&data.triples);
            if let Some(labels) = data.labels.as_mut() {
                *labels = base.join(&*labels);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Every check that can be made without touching data.
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: kgrefine::Error| CliError::Usage(e.to_string());
        match (&self.data, &self.synthetic) {
            (Some(_), Some(_)) => return Err(CliError::Usage("set either [data] or [synthetic], not both".into())),
            (None, None) => return Err(CliError::Usage("config needs a [data] or [synthetic] section".into())),
            (None, Some(s)) if s.n_entities == 0 => {
                return Err(CliError::Usage("synthetic graph needs at least one entity".into()))
            }
            _ => {}
        }
        if self.kge.train.seed != 0 || self.features.deepwalk.seed != 0 || self.gnn.train.seed != 0 {
            return Err(CliError::Usage(
                "stage sections take no seed; set the top-level `seed` instead".into(),
            ));
        }
        self.kge.train.validate().map_err(usage)?;
        self.features.deepwalk.validate().map_err(usage)?;
        self.gnn.train.validate().map_err(usage)?;
        self.task.classifier.validate().map_err(usage)?;
        self.task.node.classifier.validate().map_err(usage)?;
        if self.features.max_bins == 0 || self.features.dim == 0 {
            return Err(CliError::Usage("features.max_bins and features.dim must be at least 1".into()));
        }
        if !(1..=2).contains(&self.task.neg_ratio) {
            return Err(CliError::Usage("task.neg_ratio must be 1 or 2".into()));
        }
        if self.task.negatives_per_positive == 0 {
            return Err(CliError::Usage("task.negatives_per_positive must be at least 1".into()));
        }
        for (name, f) in [
            ("split.train", self.split.train),
            ("split.valid", self.split.valid),
            ("split.node_train", self.split.node_train),
            ("split.node_valid", self.split.node_valid),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(CliError::Usage(format!("{name} = {f} is not a fraction")));
            }
        }
        if self.split.train + self.split.valid > 1.0 || self.split.node_train + self.split.node_valid > 1.0 {
            return Err(CliError::Usage("split fractions sum past 1".into()));
        }
        if let Some(search) = &self.search {
            search.validate().map_err(usage)?;
        }
        Ok(())
    }

    /// Label for reports: the data name, file stem, or synthetic structure.
    pub fn dataset_name(&self) -> String {
        match (&self.data, &self.synthetic) {
            (Some(d), _) => d.name.clone().unwrap_or_else(|| {
                d.triples
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            }),
            (None, Some(s)) => format!("{}-{}", structure_name(s.structure), s.n_entities),
            (None, None) => String::new(),
        }
    }

    pub fn kge_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.kge.train.clone()
        }
    }

    pub fn deepwalk_config(&self) -> DeepWalkConfig {
        DeepWalkConfig {
            seed: self.seed,
            ..self.features.deepwalk.clone()
        }
    }

    pub fn gnn_config(&self) -> GnnConfig {
        GnnConfig {
            seed: self.seed,
            ..self.gnn.train.clone()
        }
    }
}

fn structure_name(s: Structure) -> String {
    match serde_json::to_value(s) {
        Ok(serde_json::Value::String(name)) => name,
        _ => format!("{s:?}"),
    }
}
