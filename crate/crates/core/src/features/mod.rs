//! Initial node representations: one-hot centrality encodings, random
//! baselines, DeepWalk, and imported embeddings.

mod centrality;
mod walks;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Interner;
use crate::kge::EmbeddingModel;
use crate::linalg::Matrix;

pub use centrality::{coloring_features, greedy_coloring, in_degree_features, random_features};
pub use walks::{
    deepwalk_embed, random_walks, sgns_gradient, sgns_loss, DeepWalkConfig, DeepWalkEmbedding,
    SgnsGradient,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    InDegree,
    Coloring,
    Deepwalk,
    Kge,
    Random,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::InDegree,
        FeatureKind::Coloring,
        FeatureKind::Deepwalk,
        FeatureKind::Kge,
        FeatureKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::InDegree => "in-degree",
            FeatureKind::Coloring => "coloring",
            FeatureKind::Deepwalk => "deepwalk",
            FeatureKind::Kge => "kge",
            FeatureKind::Random => "random",
        }
    }

    pub fn is_one_hot(self) -> bool {
        matches!(self, FeatureKind::InDegree | FeatureKind::Coloring)
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature kind `{s}`")))
    }
}

/// Dense `n×d` node features; row `i` belongs to entity `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    pub data: Matrix,
}

impl FeatureMatrix {
    pub fn new(kind: FeatureKind, data: Matrix) -> Self {
        FeatureMatrix { kind, data }
    }

    /// Entity embedding table of a trained model.
    pub fn from_model(model: &EmbeddingModel) -> Self {
        FeatureMatrix::new(FeatureKind::Kge, model.entity.clone())
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    /// `entity<TAB>v1<TAB>…<TAB>vd` lines after a `#` header. Values use the
    /// shortest representation that parses back to the same `f64`.
    pub fn write_tsv<W: Write>(&self, names: &[String], mut out: W) -> Result<()> {
        if names.len() != self.rows() {
            return Err(Error::shape(format!(
                "{} names for {} rows",
                names.len(),
                self.rows()
            )));
        }
        writeln!(out, "# kind={} dim={}", self.kind, self.dim())?;
        for (name, row) in names.iter().zip(self.data.iter_rows()) {
            let mut line = name.clone();
            for v in row {
                line.push('\t');
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parse the TSV interchange format, returning names in file order.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<(Vec<String>, FeatureMatrix)> {
        let mut kind = FeatureKind::Kge;
        let mut dim: Option<usize> = None;
        let mut names = Vec::new();
        let mut data = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            if let Some(header) = line.strip_prefix('#') {
                for field in header.split_whitespace() {
                    match field.split_once('=') {
                        Some(("kind", v)) => kind = v.parse()?,
                        Some(("dim", v)) => {
                            dim = Some(v.parse().map_err(|_| err(format!("bad dim `{v}`")))?)
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let name = fields.next().unwrap_or_default();
            if name.is_empty() {
                return Err(err("empty entity name".into()));
            }
            let values = fields
                .map(|f| f.parse::<f64>().map_err(|_| err(format!("bad value `{f}`"))))
                .collect::<Result<Vec<_>>>()?;
            match dim {
                Some(d) if d != values.len() => {
                    return Err(err(format!("expected {d} values, found {}", values.len())))
                }
                None => dim = Some(values.len()),
                _ => {}
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(err("non-finite feature value".into()));
            }
            names.push(name.to_string());
            data.extend(values);
        }
        let d = dim.unwrap_or(0);
        Ok((names.clone(), FeatureMatrix::new(kind, Matrix::from_vec(names.len(), d, data))))
    }

    /// Reorder rows read from a file to follow the graph's entity order.
    /// Every entity must appear exactly once.
    pub fn aligned_to(names: &[String], features: &FeatureMatrix, entities: &Interner) -> Result<FeatureMatrix> {
        let mut slot = vec![None; entities.len()];
        for (row, name) in names.iter().enumerate() {
            let e = entities
                .get(name)
                .ok_or_else(|| Error::invalid(format!("feature row for unknown entity `{name}`")))?;
            if slot[e].replace(row).is_some() {
                return Err(Error::invalid(format!("duplicate feature row for `{name}`")));
            }
        }
        let order = slot
            .iter()
            .enumerate()
            .map(|(e, s)| {
                s.ok_or_else(|| Error::invalid(format!("no feature row for `{}`", entities.name(e))))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMatrix::new(features.kind, features.data.select_rows(&order)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_line() {
        let f = FeatureMatrix::new(FeatureKind::Kge, Matrix::from_vec(1, 1, vec![0.5]));
        let mut buf = Vec::new();
        f.write_tsv(&["name".to_string()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, ["name\t0.5"]);
    }

    #[test]
    fn empty_matrix_is_header_only() {
        let f = FeatureMatrix::new(FeatureKind::Kge, Matrix::zeros(0, 3));
        let mut buf = Vec::new();
        f.write_tsv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# kind=kge dim=3\n");
        let (names, back) = FeatureMatrix::read_tsv("# kind=kge dim=3\n".as_bytes()).unwrap();
        assert!(names.is_empty());
        assert_eq!(back, f);
    }

    #[test]
    fn ragged_rows_rejected() {
        let r = FeatureMatrix::read_tsv("a\t1\t2\nb\t1\n".as_bytes());
        assert!(matches!(r, Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn alignment_follows_interner() {
        let mut ents = Interner::default();
        ents.intern("x");
        ents.intern("y");
        let (names, f) = FeatureMatrix::read_tsv("y\t2\nx\t1\n".as_bytes()).unwrap();
        let a = FeatureMatrix::aligned_to(&names, &f, &ents).unwrap();
        assert_eq!(a.data.data(), [1.0, 2.0]);
        let (names, f) = FeatureMatrix::read_tsv("y\t2\n".as_bytes()).unwrap();
        assert!(FeatureMatrix::aligned_to(&names, &f, &ents).is_err());
    }
}
