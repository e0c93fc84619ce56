//! Subcommand implementations. Each returns after its artifacts are on disk.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use kgrefine::graph::{write_graph, Format};
use kgrefine::report::{fingerprint, MetricsReport};
use kgrefine::search::{random_search, ParamValue, SearchResult};
use kgrefine::FeatureMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifact::{write_atomic, Status, Store};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::{Pipeline, PCA_FILE};

pub const SEARCH_FILE: &str = "search.json";
pub const BEST_CONFIG: &str = "best.toml";

/// Which stage a pipeline command stops after.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Split,
    TrainKge,
    Features,
    TrainGnn,
    Task,
}

/// Run the pipeline through `stage`, reusing current artifacts.
pub fn run_stage(cfg: &ExperimentConfig, stage: Stage) -> CliResult<Option<MetricsReport>> {
    let mut p = Pipeline::new(cfg)?;
    let report = match stage {
        Stage::Ingest => p.graph().map(|_| None)?,
        Stage::Split => p.split().map(|_| None)?,
        Stage::TrainKge => p.kge().map(|_| None)?,
        Stage::Features => p.features().map(|_| None)?,
        Stage::TrainGnn => p.gnn().map(|_| None)?,
        Stage::Task => Some(p.report()?),
    };
    p.write_resolved_config()?;
    Ok(report)
}

/// Which artifact to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportTarget {
    Graph,
    /// Entity rows of the trained embedding model.
    Model,
    Features,
}

#[derive(Serialize, Deserialize)]
struct VectorRecord {
    entity: String,
    vector: Vec<f64>,
}

fn vectors_text(names: &[String], f: &FeatureMatrix, format: Format) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        Format::Tsv => f.write_tsv(names, &mut out)?,
        Format::JsonLines => {
            for (name, row) in names.iter().zip(f.data.iter_rows()) {
                let rec = VectorRecord {
                    entity: name.clone(),
                    vector: row.to_vec(),
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.push(b'\n');
            }
        }
    }
    Ok(out)
}

/// Write `target` in `format` to `to`. The first line is a comment naming
/// the fingerprint of the stage the data came from; both ingest formats and
/// the feature reader skip it.
pub fn export(cfg: &ExperimentConfig, target: ExportTarget, format: Format, to: &Path) -> CliResult<()> {
    let mut p = Pipeline::new(cfg)?;
    let (fp, body) = match target {
        ExportTarget::Graph => {
            let mut out = Vec::new();
            write_graph(p.graph()?, format, &mut out)?;
            (p.fingerprints().ingest.clone(), out)
        }
        ExportTarget::Model => {
            let f = FeatureMatrix::from_model(&p.kge()?.model);
            let names = p.graph()?.entities().names().to_vec();
            (p.fingerprints().kge.clone(), vectors_text(&names, &f, format)?)
        }
        ExportTarget::Features => {
            let f = p.features()?.clone();
            let names = p.graph()?.entities().names().to_vec();
            (p.fingerprints().features.clone(), vectors_text(&names, &f, format)?)
        }
    };
    let mut text = format!("# source={target:?} fingerprint={fp}\n").to_lowercase().into_bytes();
    text.extend_from_slice(&body);
    write_atomic(to, &text)?;
    p.write_resolved_config()
}

/// Parse exported vectors in either format.
pub fn read_vectors(text: &str, format: Format) -> CliResult<(Vec<String>, FeatureMatrix)> {
    match format {
        Format::Tsv => Ok(FeatureMatrix::read_tsv(text.as_bytes())?),
        Format::JsonLines => {
            let mut names = Vec::new();
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
                let rec: VectorRecord = serde_json::from_str(line)?;
                names.push(rec.entity);
                rows.push(rec.vector);
            }
            let d = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != d) {
                return Err(CliError::Data("vectors of unequal length".into()));
            }
            let m = kgrefine::Matrix::from_vec(rows.len(), d, rows.concat());
            Ok((names, FeatureMatrix::new(kgrefine::FeatureKind::Kge, m)))
        }
    }
}

/// Project the configured features onto their top principal directions and
/// write `pca.tsv`: `name<TAB>c1…ck`.
pub fn pca(cfg: &ExperimentConfig, components: usize) -> CliResult<PathBuf> {
    let mut p = Pipeline::new(cfg)?;
    let fp = p.fingerprints().pca(components);
    let store = Store::new(&cfg.out);
    if store.text_status(PCA_FILE, &fp) != Status::Current {
        let result = p.pca(components)?;
        let names = p.graph()?.entities().names().to_vec();
        let ratios: Vec<String> = result.explained_ratio.iter().map(f64::to_string).collect();
        let mut body = format!("# components={components} explained={}\n", ratios.join(","));
        for (name, row) in names.iter().zip(result.coords.iter_rows()) {
            body.push_str(name);
            for v in row {
                body.push('\t');
                body.push_str(&v.to_string());
            }
            body.push('\n');
        }
        store.save_text(PCA_FILE, "pca", &fp, &body)?;
    } else {
        eprintln!("pca: up to date");
    }
    p.write_resolved_config()?;
    Ok(store.path(PCA_FILE))
}

fn to_toml_value(v: &ParamValue) -> toml::Value {
    match v {
        ParamValue::Bool(b) => toml::Value::Boolean(*b),
        ParamValue::Int(i) => toml::Value::Integer(*i),
        ParamValue::Float(f) => toml::Value::Float(*f),
        ParamValue::Text(s) => toml::Value::String(s.clone()),
    }
}

/// A copy of `cfg` with each dotted key (e.g. `kge.train.learning_rate`)
/// replaced, validated as a whole.
pub fn apply_params(cfg: &ExperimentConfig, params: &BTreeMap<String, ParamValue>) -> CliResult<ExperimentConfig> {
    let mut root = toml::Value::try_from(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    for (key, value) in params {
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        let (last, path) = parts.split_last().expect("split yields at least one part");
        for part in path {
            let table = node
                .as_table_mut()
                .ok_or_else(|| CliError::Usage(format!("`{key}` does not name a config field")))?;
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        node.as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("`{key}` does not name a config field")))?
            .insert(last.to_string(), to_toml_value(value));
    }
    let out: ExperimentConfig = root
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("search parameter: {e}")))?;
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchLog {
    pub result: SearchResult,
    pub best_config: ExperimentConfig,
}

/// Random search over the `[search]` space. Every trial runs the whole
/// pipeline in memory with the experiment seed; the trial log goes to
/// `search.json` and the winning config to `best.toml`.
pub fn search(cfg: &ExperimentConfig) -> CliResult<SearchLog> {
    let space = cfg
        .search
        .clone()
        .ok_or_else(|| CliError::Usage("config has no [search] section".into()))?;
    let base = ExperimentConfig {
        search: None,
        ..cfg.clone()
    };
    for key in space.params.keys() {
        let probe = space.draw(0);
        apply_params(&base, &BTreeMap::from([(key.clone(), probe[key].clone())]))?;
    }
    let fp = search_fingerprint(cfg)?;
    let store = Store::new(&cfg.out);
    if let Some(log) = store.load_json::<SearchLog>(SEARCH_FILE, &fp)? {
        eprintln!("search: up to date");
        return Ok(log);
    }
    let mut numeric = None;
    let result = random_search(&space, |params| {
        let trial = apply_params(&base, params).map_err(|e| kgrefine::Error::InvalidArgument(e.to_string()))?;
        let outcome = Pipeline::in_memory(&trial)
            .and_then(|mut p| p.report())
            .map_err(|e| {
                if let CliError::Numeric(m) = &e {
                    numeric.get_or_insert_with(|| m.clone());
                }
                kgrefine::Error::InvalidArgument(e.to_string())
            })?;
        outcome.get(&space.objective).ok_or_else(|| {
            kgrefine::Error::InvalidArgument(format!("task does not emit `{}`", space.objective))
        })
    });
    let result = match result {
        Ok(r) => r,
        Err(e) => return Err(numeric.map_or_else(|| CliError::from(e), CliError::Numeric)),
    };
    for t in &result.trials {
        match (&t.objective, &t.error) {
            (Some(v), _) => eprintln!("trial {}: {} = {v}", t.index, space.objective),
            (None, Some(e)) => eprintln!("trial {}: failed: {e}", t.index),
            (None, None) => {}
        }
    }
    let best_config = apply_params(&base, &result.best_trial().params)?;
    let log = SearchLog { result, best_config };
    store.save_json(SEARCH_FILE, "search", &fp, &log)?;
    let best_text = format!("# fingerprint={fp}\n{}", log.best_config.to_toml());
    write_atomic(&store.path(BEST_CONFIG), best_text.as_bytes())?;
    let text = format!("# fingerprint={fp}\n{}", cfg.to_toml());
    write_atomic(&store.path(crate::pipeline::RESOLVED_CONFIG), text.as_bytes())?;
    Ok(log)
}

pub fn search_fingerprint(cfg: &ExperimentConfig) -> CliResult<String> {
    let fps = crate::pipeline::Fingerprints::compute(cfg)?;
    let space = serde_json::to_value(&cfg.search)?;
    Ok(fingerprint(
        json!({ "stage": "search", "space": space, "ingest": fps.ingest, "task": fps.task })
            .to_string()
            .as_bytes(),
    ))
}

/// Check every artifact in the output directory against the fingerprints
/// this config implies. Absent artifacts are fine; stale or corrupt ones
/// are a data error.
pub fn verify(cfg: &ExperimentConfig) -> CliResult<Vec<(String, Status)>> {
    let p = Pipeline::new(cfg)?;
    let store = Store::new(&cfg.out);
    let components = fs::read_to_string(store.path(PCA_FILE)).ok().and_then(|t| {
        t.split_whitespace()
            .find_map(|f| f.strip_prefix("components=")?.parse::<usize>().ok())
    });
    let mut rows: Vec<(String, Status)> = p
        .audit(components)
        .into_iter()
        .map(|(name, s)| (name.to_string(), s))
        .collect();
    if components.is_none() && store.path(PCA_FILE).exists() {
        rows.push((PCA_FILE.into(), Status::Corrupt("no components field".into())));
    }
    if cfg.search.is_some() {
        rows.push((SEARCH_FILE.into(), store.json_status(SEARCH_FILE, &search_fingerprint(cfg)?)));
    }
    Ok(rows)
}

/// One row per dataset, one column per `model/metric`; duplicates (e.g.
/// several seeds) are averaged.
pub fn aggregate<W: Write>(inputs: &[PathBuf], out: W) -> CliResult<usize> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for entry in walkdir::WalkDir::new(input).sort_by_file_name() {
                let entry = entry.map_err(|e| CliError::Data(e.to_string()))?;
                if entry.file_name() == crate::artifact::REPORT_JSON {
                    files.push(entry.into_path());
                }
            }
        } else if input.exists() {
            files.push(input.clone());
        } else {
            return Err(CliError::Data(format!("{}: no such file or directory", input.display())));
        }
    }
    let mut cells: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for file in &files {
        let text = fs::read_to_string(file)?;
        let report = MetricsReport::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", file.display())))?;
        let row = cells.entry(report.dataset.clone()).or_default();
        for (metric, v) in &report.metrics {
            let column = if report.model.is_empty() {
                metric.clone()
            } else {
                format!("{}/{metric}", report.model)
            };
            row.entry(column).or_default().push(*v);
        }
    }
    let mut columns: Vec<&String> = cells.values().flat_map(BTreeMap::keys).collect();
    columns.sort();
    columns.dedup();
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(std::iter::once("dataset").chain(columns.iter().map(|c| c.as_str())))
        .map_err(csv_err)?;
    for (dataset, row) in &cells {
        let mut record = vec![dataset.clone()];
        for c in &columns {
            record.push(match row.get(*c) {
                Some(vs) => (vs.iter().sum::<f64>() / vs.len() as f64).to_string(),
                None => String::new(),
            });
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(files.len())
}
