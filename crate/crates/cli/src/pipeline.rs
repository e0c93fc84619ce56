//! Stage graph: ingest → split → kge / features → gnn → task report.
//!
//! Each stage has a fingerprint computed from the config alone (plus the
//! bytes of the input files), so it is known before anything runs. With a
//! store attached, a stage whose artifact already carries its fingerprint
//! is loaded instead of recomputed.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use kgrefine::downstream::{run_link_prediction_binary, run_node_classification, run_triple_classification};
use kgrefine::eval::{evaluate_lp_rank, evaluate_lp_threshold};
use kgrefine::features::{
    coloring_features, deepwalk_embed, in_degree_features, random_features, random_walks,
};
use kgrefine::gnn::{evaluate_gnn_node, train_gnn_link, train_gnn_node, GnnParams};
use kgrefine::graph::{generate_synthetic, ingest, ingest_labels, split_nodes, split_triples, NodeSplit, TripleSplit};
use kgrefine::kge::{train_kge, EmbeddingModel};
use kgrefine::pca::{pca_project, Pca};
use kgrefine::report::{fingerprint, MetricsReport, TaskKind};
use kgrefine::{FeatureKind, FeatureMatrix, KnowledgeGraph, Matrix};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifact::{Status, Store};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const GRAPH_FILE: &str = "graph.json";
pub const SPLIT_FILE: &str = "split.json";
pub const KGE_FILE: &str = "kge.json";
pub const FEATURES_FILE: &str = "features.tsv";
pub const GNN_FILE: &str = "gnn.json";
pub const PCA_FILE: &str = "pca.tsv";
pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

/// What the task stage consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upstream {
    Kge,
    Features,
    Gnn,
}

pub fn task_upstream(kind: TaskKind) -> Upstream {
    match kind {
        TaskKind::LpRank | TaskKind::LpThresh | TaskKind::TripleCls => Upstream::Kge,
        TaskKind::NodeCls | TaskKind::LpBinary => Upstream::Features,
        TaskKind::NodeGnn | TaskKind::LpGnn => Upstream::Gnn,
    }
}

fn hash(value: serde_json::Value) -> String {
    fingerprint(value.to_string().as_bytes())
}

fn file_hash(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(fingerprint(&bytes))
}

fn section<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("config sections serialize")
}

/// Fingerprint of every stage for one config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprints {
    pub ingest: String,
    pub split: String,
    pub kge: String,
    pub features: String,
    pub gnn: String,
    pub task: String,
}

impl Fingerprints {
    pub fn compute(cfg: &ExperimentConfig) -> CliResult<Self> {
        let seed = cfg.seed;
        let source = match (&cfg.data, &cfg.synthetic) {
            (Some(d), _) => json!({
                "format": section(&d.format),
                "triples": file_hash(&d.triples)?,
                "labels": d.labels.as_deref().map(file_hash).transpose()?,
            }),
            (None, Some(s)) => json!({ "synthetic": section(s), "seed": seed }),
            (None, None) => return Err(CliError::Usage("config has no graph source".into())),
        };
        let ingest = hash(json!({ "stage": "ingest", "source": source }));
        let split = hash(json!({ "stage": "split", "split": section(&cfg.split), "seed": seed, "upstream": [&ingest] }));
        let kge = hash(json!({ "stage": "kge", "kge": section(&cfg.kge), "seed": seed, "upstream": [&split] }));
        let f = &cfg.features;
        let (params, upstream) = match f.kind {
            FeatureKind::InDegree | FeatureKind::Coloring => (json!({ "max_bins": f.max_bins }), &ingest),
            FeatureKind::Random => (json!({ "dim": f.dim }), &ingest),
            FeatureKind::Deepwalk => (section(&f.deepwalk), &ingest),
            FeatureKind::Kge => (json!(null), &kge),
        };
        let features = hash(json!({
            "stage": "features", "kind": section(&f.kind), "params": params, "seed": seed, "upstream": [upstream],
        }));
        let link = cfg.task.kind == TaskKind::LpGnn;
        let gnn_inputs = match (link, cfg.gnn.use_features) {
            (true, true) => vec![&ingest, &features],
            (true, false) => vec![&ingest],
            (false, true) => vec![&split, &features],
            (false, false) => vec![&split],
        };
        let gnn = hash(json!({
            "stage": "gnn", "gnn": section(&cfg.gnn), "link": link, "seed": seed, "upstream": gnn_inputs,
        }));
        let task_inputs = match task_upstream(cfg.task.kind) {
            Upstream::Kge => vec![&kge],
            Upstream::Features => vec![&split, &features],
            Upstream::Gnn => vec![&split, &gnn],
        };
        let task = hash(json!({
            "stage": "task", "task": section(&cfg.task), "seed": seed,
            "dataset": cfg.dataset_name(), "upstream": task_inputs,
        }));
        Ok(Fingerprints {
            ingest,
            split,
            kge,
            features,
            gnn,
            task,
        })
    }

    pub fn pca(&self, components: usize) -> String {
        hash(json!({ "stage": "pca", "components": components, "upstream": [&self.features] }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitArtifact {
    pub triples: TripleSplit,
    /// Present when the graph has labeled entities.
    pub nodes: Option<NodeSplit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgeArtifact {
    pub model: EmbeddingModel,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnArtifact {
    pub params: GnnParams,
    /// Hadamard head weights of a link predictor.
    pub head: Option<Matrix>,
    pub losses: Vec<f64>,
    /// Node training: epoch and validation macro-F1 of the kept snapshot.
    pub best_epoch: Option<usize>,
    pub best_valid_f1: Option<f64>,
    /// Link training: shuffled test pairs, their probabilities and the AP.
    pub test_edges: Vec<(usize, usize, bool)>,
    pub test_scores: Vec<f64>,
    pub test_ap: Option<f64>,
}

/// Lazily evaluated stages of one experiment.
pub struct Pipeline<'a> {
    cfg: &'a ExperimentConfig,
    fps: Fingerprints,
    store: Option<Store>,
    verbose: bool,
    graph: Option<KnowledgeGraph>,
    split: Option<SplitArtifact>,
    kge: Option<KgeArtifact>,
    features: Option<FeatureMatrix>,
    gnn: Option<GnnArtifact>,
}

impl<'a> Pipeline<'a> {
    /// Persisting pipeline rooted at `cfg.out`.
    pub fn new(cfg: &'a ExperimentConfig) -> CliResult<Self> {
        let mut p = Self::in_memory(cfg)?;
        p.store = Some(Store::new(&cfg.out));
        p.verbose = true;
        Ok(p)
    }

    /// Nothing read from or written to disk except the input data.
    pub fn in_memory(cfg: &'a ExperimentConfig) -> CliResult<Self> {
        Ok(Pipeline {
            cfg,
            fps: Fingerprints::compute(cfg)?,
            store: None,
            verbose: false,
            graph: None,
            split: None,
            kge: None,
            features: None,
            gnn: None,
        })
    }

    pub fn fingerprints(&self) -> &Fingerprints {
        &self.fps
    }

    pub fn config(&self) -> &ExperimentConfig {
        self.cfg
    }

    fn note(&self, stage: &str, reused: bool) {
        if self.verbose {
            let what = if reused { "up to date" } else { "done" };
            eprintln!("{stage}: {what}");
        }
    }

    /// Record the effective configuration next to the artifacts.
    pub fn write_resolved_config(&self) -> CliResult<()> {
        if let Some(store) = &self.store {
            let text = format!("# fingerprint={}\n{}", self.fps.task, self.cfg.to_toml());
            if fs::read_to_string(store.path(RESOLVED_CONFIG)).ok().as_deref() != Some(text.as_str()) {
                crate::artifact::write_atomic(&store.path(RESOLVED_CONFIG), text.as_bytes())?;
            }
        }
        Ok(())
    }

    fn load_json<T: serde::de::DeserializeOwned>(&self, file: &str, fp: &str) -> CliResult<Option<T>> {
        match &self.store {
            Some(s) => s.load_json(file, fp),
            None => Ok(None),
        }
    }

    fn save_json<T: Serialize>(&self, file: &str, stage: &str, fp: &str, value: &T) -> CliResult<()> {
        match &self.store {
            Some(s) => s.save_json(file, stage, fp, value),
            None => Ok(()),
        }
    }

    pub fn graph(&mut self) -> CliResult<&KnowledgeGraph> {
        if self.graph.is_none() {
            let fp = self.fps.ingest.clone();
            let (g, reused) = match self.load_json(GRAPH_FILE, &fp)? {
                Some(g) => (g, true),
                None => {
                    let g = self.build_graph()?;
                    self.save_json(GRAPH_FILE, "ingest", &fp, &g)?;
                    (g, false)
                }
            };
            self.note("ingest", reused);
            self.graph = Some(g);
        }
        Ok(self.graph.as_ref().expect("graph just set"))
    }

    fn build_graph(&self) -> CliResult<KnowledgeGraph> {
        let open = |p: &Path| {
            fs::File::open(p)
                .map(BufReader::new)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        };
        match (&self.cfg.data, &self.cfg.synthetic) {
            (Some(d), _) => {
                let mut g = ingest(open(&d.triples)?, d.format)?.graph;
                if let Some(labels) = &d.labels {
                    g = ingest_labels(g, open(labels)?, d.format)?;
                }
                Ok(g)
            }
            (None, Some(s)) => Ok(generate_synthetic(&s.spec(self.cfg.seed))?),
            (None, None) => Err(CliError::Usage("config has no graph source".into())),
        }
    }

    pub fn split(&mut self) -> CliResult<&SplitArtifact> {
        if self.split.is_none() {
            let fp = self.fps.split.clone();
            let (s, reused) = match self.load_json(SPLIT_FILE, &fp)? {
                Some(s) => (s, true),
                None => {
                    let (seed, sc) = (self.cfg.seed, self.cfg.split.clone());
                    let g = self.graph()?;
                    let triples = split_triples(g, sc.train, sc.valid, seed)?;
                    let nodes = if g.labels().is_empty() {
                        None
                    } else {
                        Some(split_nodes(g, sc.node_train, sc.node_valid, seed)?)
                    };
                    let s = SplitArtifact { triples, nodes };
                    self.save_json(SPLIT_FILE, "split", &fp, &s)?;
                    (s, false)
                }
            };
            self.note("split", reused);
            self.split = Some(s);
        }
        Ok(self.split.as_ref().expect("split just set"))
    }

    pub fn kge(&mut self) -> CliResult<&KgeArtifact> {
        if self.kge.is_none() {
            let fp = self.fps.kge.clone();
            let (k, reused) = match self.load_json(KGE_FILE, &fp)? {
                Some(k) => (k, true),
                None => {
                    self.split()?;
                    let g = self.graph.as_ref().expect("graph loaded with split");
                    let split = &self.split.as_ref().expect("split loaded").triples;
                    let trained = train_kge(g, split, &self.cfg.kge_config(), self.cfg.kge.model)?;
                    let k = KgeArtifact {
                        model: trained.model,
                        losses: trained.losses,
                    };
                    self.save_json(KGE_FILE, "kge", &fp, &k)?;
                    (k, false)
                }
            };
            self.note("train-kge", reused);
            self.kge = Some(k);
        }
        Ok(self.kge.as_ref().expect("kge just set"))
    }

    pub fn features(&mut self) -> CliResult<&FeatureMatrix> {
        if self.features.is_none() {
            let fp = self.fps.features.clone();
            self.graph()?;
            let stored = self.store.as_ref().and_then(|s| s.load_text(FEATURES_FILE, &fp));
            let (f, reused) = match stored {
                Some(body) => {
                    let g = self.graph.as_ref().expect("graph loaded");
                    let (names, f) = FeatureMatrix::read_tsv(body.as_bytes())?;
                    (FeatureMatrix::aligned_to(&names, &f, g.entities())?, true)
                }
                None => {
                    let f = self.build_features()?;
                    if let Some(store) = &self.store {
                        let g = self.graph.as_ref().expect("graph loaded");
                        let mut body = Vec::new();
                        f.write_tsv(g.entities().names(), &mut body)?;
                        let body = String::from_utf8(body).expect("feature TSV is UTF-8");
                        store.save_text(FEATURES_FILE, "features", &fp, &body)?;
                    }
                    (f, false)
                }
            };
            self.note("features", reused);
            self.features = Some(f);
        }
        Ok(self.features.as_ref().expect("features just set"))
    }

    fn build_features(&mut self) -> CliResult<FeatureMatrix> {
        let fc = self.cfg.features.clone();
        let seed = self.cfg.seed;
        if fc.kind == FeatureKind::Kge {
            return Ok(FeatureMatrix::from_model(&self.kge()?.model));
        }
        let dw = self.cfg.deepwalk_config();
        let g = self.graph()?;
        Ok(match fc.kind {
            FeatureKind::InDegree => in_degree_features(g, fc.max_bins)?,
            FeatureKind::Coloring => coloring_features(g, fc.max_bins)?,
            FeatureKind::Random => random_features(g.num_entities(), fc.dim, seed)?,
            FeatureKind::Deepwalk => {
                let walks = random_walks(g, dw.walks_per_node, dw.walk_length, seed)?;
                deepwalk_embed(&walks, g.num_entities(), &dw)?.features
            }
            FeatureKind::Kge => unreachable!("handled above"),
        })
    }

    fn node_split(&mut self) -> CliResult<NodeSplit> {
        self.split()?
            .nodes
            .clone()
            .ok_or_else(|| CliError::Data("node tasks need entity labels".into()))
    }

    pub fn gnn(&mut self) -> CliResult<&GnnArtifact> {
        if self.gnn.is_none() {
            let fp = self.fps.gnn.clone();
            let (a, reused) = match self.load_json(GNN_FILE, &fp)? {
                Some(a) => (a, true),
                None => {
                    let a = self.train_gnn()?;
                    self.save_json(GNN_FILE, "gnn", &fp, &a)?;
                    (a, false)
                }
            };
            self.note("train-gnn", reused);
            self.gnn = Some(a);
        }
        Ok(self.gnn.as_ref().expect("gnn just set"))
    }

    fn train_gnn(&mut self) -> CliResult<GnnArtifact> {
        let kind = self.cfg.gnn.model;
        let gc = self.cfg.gnn_config();
        if self.cfg.gnn.use_features {
            self.features()?;
        }
        let link = self.cfg.task.kind == TaskKind::LpGnn;
        let nodes = if link { None } else { Some(self.node_split()?) };
        self.graph()?;
        let g = self.graph.as_ref().expect("graph loaded");
        let x = self.features.as_ref().filter(|_| self.cfg.gnn.use_features);
        Ok(match nodes {
            None => {
                let t = train_gnn_link(g, x, kind, &gc, self.cfg.seed)?;
                GnnArtifact {
                    params: t.params,
                    head: t.head,
                    losses: t.losses,
                    best_epoch: None,
                    best_valid_f1: None,
                    test_edges: t.test_edges,
                    test_scores: t.test_scores,
                    test_ap: Some(t.test_ap),
                }
            }
            Some(split) => {
                let t = train_gnn_node(g, x, &split, kind, &gc)?;
                GnnArtifact {
                    params: t.params,
                    head: None,
                    losses: t.losses,
                    best_epoch: Some(t.best_epoch),
                    best_valid_f1: Some(t.best_valid_f1),
                    test_edges: Vec::new(),
                    test_scores: Vec::new(),
                    test_ap: None,
                }
            }
        })
    }

    /// Model label for reports and the aggregate table.
    pub fn model_name(&self) -> String {
        let feat = self.cfg.features.kind.name();
        match task_upstream(self.cfg.task.kind) {
            Upstream::Kge => self.cfg.kge.model.name().to_string(),
            Upstream::Features if self.cfg.features.kind == FeatureKind::Kge => {
                format!("kge:{}", self.cfg.kge.model.name())
            }
            Upstream::Features => feat.to_string(),
            Upstream::Gnn if self.cfg.gnn.use_features => format!("{}+{feat}", self.cfg.gnn.model),
            Upstream::Gnn => self.cfg.gnn.model.to_string(),
        }
    }

    /// Run the configured task, reusing a stored report when current.
    pub fn report(&mut self) -> CliResult<MetricsReport> {
        let fp = self.fps.task.clone();
        if let Some(r) = self.store.as_ref().and_then(|s| s.load_report(&fp)) {
            self.note("task", true);
            return Ok(r);
        }
        let mut report = self.compute_report()?;
        report.dataset = self.cfg.dataset_name();
        report.model = self.model_name();
        report.fingerprint = fp;
        report.seed = self.cfg.seed;
        report.validate()?;
        if let Some(store) = &self.store {
            store.save_report(&report)?;
        }
        self.note("task", false);
        Ok(report)
    }

    fn compute_report(&mut self) -> CliResult<MetricsReport> {
        let tc = self.cfg.task.clone();
        let seed = self.cfg.seed;
        Ok(match tc.kind {
            TaskKind::LpRank | TaskKind::LpThresh | TaskKind::TripleCls => {
                self.kge()?;
                let g = self.graph.as_ref().expect("graph loaded");
                let split = &self.split.as_ref().expect("split loaded").triples;
                let model = &self.kge.as_ref().expect("kge loaded").model;
                match tc.kind {
                    TaskKind::LpRank => evaluate_lp_rank(model, split)?,
                    TaskKind::LpThresh => evaluate_lp_threshold(model, g, split, tc.negatives_per_positive, seed)?,
                    _ => run_triple_classification(model, g, split, tc.neg_ratio, seed)?,
                }
            }
            TaskKind::NodeCls => {
                let split = self.node_split()?;
                self.features()?;
                let g = self.graph.as_ref().expect("graph loaded");
                run_node_classification(g, self.features.as_ref().expect("features loaded"), &split, &tc.node)?
            }
            TaskKind::LpBinary => {
                self.features()?;
                let g = self.graph.as_ref().expect("graph loaded");
                run_link_prediction_binary(g, self.features.as_ref().expect("features loaded"), &tc.classifier, seed)?
            }
            TaskKind::NodeGnn => {
                let split = self.node_split()?;
                self.gnn()?;
                let g = self.graph.as_ref().expect("graph loaded");
                let x = self.features.as_ref().filter(|_| self.cfg.gnn.use_features);
                let params = &self.gnn.as_ref().expect("gnn loaded").params;
                evaluate_gnn_node(g, x, &split, params)?
            }
            TaskKind::LpGnn => {
                let a = self.gnn()?;
                let positives = a.test_edges.iter().filter(|e| e.2).count();
                let mut r = MetricsReport::new(TaskKind::LpGnn, seed);
                r.insert("lp.gnn.ap", a.test_ap.unwrap_or(f64::NAN));
                r.insert("lp.gnn.positives", positives as f64);
                r.insert("lp.gnn.negatives", (a.test_edges.len() - positives) as f64);
                r
            }
        })
    }

    /// Top-`components` PCA of the configured features.
    pub fn pca(&mut self, components: usize) -> CliResult<Pca> {
        Ok(pca_project(&self.features()?.data, components)?)
    }

    /// Current/stale state of every artifact this config would produce.
    pub fn audit(&self, pca_components: Option<usize>) -> Vec<(&'static str, Status)> {
        let Some(store) = &self.store else { return Vec::new() };
        let mut out = vec![
            (GRAPH_FILE, store.json_status(GRAPH_FILE, &self.fps.ingest)),
            (SPLIT_FILE, store.json_status(SPLIT_FILE, &self.fps.split)),
            (KGE_FILE, store.json_status(KGE_FILE, &self.fps.kge)),
            (FEATURES_FILE, store.text_status(FEATURES_FILE, &self.fps.features)),
            (GNN_FILE, store.json_status(GNN_FILE, &self.fps.gnn)),
            ("report", store.report_status(&self.fps.task)),
        ];
        if let Some(k) = pca_components {
            out.push((PCA_FILE, store.text_status(PCA_FILE, &self.fps.pca(k))));
        }
        out
    }

    pub fn store(&self) -> Option<&Store> {
        self.store.as_ref()
    }
}
