use std::io::{BufRead, Write};

use serde::Deserialize;

use super::{GraphBuilder, KnowledgeGraph};
use crate::error::{Error, Result};

/// Record layout of a triple stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    /// `head<TAB>relation<TAB>tail`; two-field lines are `entity<TAB>class` labels.
    Tsv,
    /// One object per line: `{"h","r","t"}` for triples, `{"e","c"}` for labels.
    #[serde(alias = "jsonl")]
    JsonLines,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(Format::Tsv),
            "json-lines" | "jsonl" => Ok(Format::JsonLines),
            other => Err(Error::invalid(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug)]
pub struct Ingested {
    pub graph: KnowledgeGraph,
    /// Number of repeated triples that were collapsed.
    pub duplicates: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonRecord {
    Triple {
        h: String,
        r: String,
        t: String,
    },
    Label {
        e: String,
        c: String,
    },
}

enum Record {
    Triple(String, String, String),
    Label(String, String),
}

struct PendingLabel {
    line: usize,
    entity: String,
    class: String,
}

/// Read a triple stream. Label records are resolved after all triples, so
/// they may appear anywhere in the stream but must name an entity that
/// occurs in some triple.
pub fn ingest<R: BufRead>(reader: R, format: Format) -> Result<Ingested> {
    let mut builder = KnowledgeGraph::builder();
    let mut pending = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let Some(record) = parse_line(&line, line_no, format)? else {
            continue;
        };
        match record {
            Record::Triple(h, r, t) => {
                builder.add_named_triple(&h, &r, &t);
            }
            Record::Label(entity, class) => pending.push(PendingLabel {
                line: line_no,
                entity,
                class,
            }),
        }
    }
    apply_labels(&mut builder, pending)?;
    let duplicates = builder.duplicates();
    Ok(Ingested {
        graph: builder.build(),
        duplicates,
    })
}

/// Attach labels from a separate `entity<TAB>class` (or `{"e","c"}`) stream.
pub fn ingest_labels<R: BufRead>(graph: KnowledgeGraph, reader: R, format: Format) -> Result<KnowledgeGraph> {
    let mut pending = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        match parse_line(&line, line_no, format)? {
            None => {}
            Some(Record::Label(entity, class)) => pending.push(PendingLabel {
                line: line_no,
                entity,
                class,
            }),
            Some(Record::Triple(..)) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected a label record".into(),
                })
            }
        }
    }
    let mut builder = rebuild(graph);
    apply_labels(&mut builder, pending)?;
    Ok(builder.build())
}

fn rebuild(graph: KnowledgeGraph) -> GraphBuilder {
    GraphBuilder {
        entities: graph.entities,
        relations: graph.relations,
        classes: graph.classes,
        triples: graph.triples,
        triple_set: graph.triple_set,
        labels: graph.labels,
        duplicates: 0,
    }
}

fn apply_labels(builder: &mut GraphBuilder, pending: Vec<PendingLabel>) -> Result<()> {
    for p in pending {
        let entity = builder.entity_index(&p.entity).ok_or_else(|| Error::UnknownEntity {
            line: p.line,
            entity: p.entity.clone(),
        })?;
        builder.set_label(entity, &p.class).map_err(|e| Error::Parse {
            line: p.line,
            message: e.to_string(),
        })?;
    }
    Ok(())
}

fn parse_line(line: &str, line_no: usize, format: Format) -> Result<Option<Record>> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let parse_err = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let record = match format {
        Format::Tsv => {
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                [h, r, t] => Record::Triple(h.to_string(), r.to_string(), t.to_string()),
                [e, c] => Record::Label(e.to_string(), c.to_string()),
                _ => {
                    return Err(parse_err(format!(
                        "expected 3 tab-separated fields (or 2 for a label), found {}",
                        fields.len()
                    )))
                }
            }
        }
        Format::JsonLines => match serde_json::from_str::<JsonRecord>(line) {
            Ok(JsonRecord::Triple { h, r, t }) => Record::Triple(h, r, t),
            Ok(JsonRecord::Label { e, c }) => Record::Label(e, c),
            Err(e) => return Err(parse_err(format!("invalid record: {e}"))),
        },
    };
    let empty = match &record {
        Record::Triple(h, r, t) => h.is_empty() || r.is_empty() || t.is_empty(),
        Record::Label(e, c) => e.is_empty() || c.is_empty(),
    };
    if empty {
        return Err(parse_err("empty name".into()));
    }
    Ok(Some(record))
}

/// Write triples (in graph order) followed by label lines as TSV.
pub fn write_tsv<W: Write>(graph: &KnowledgeGraph, mut out: W) -> Result<()> {
    let ents = graph.entities();
    for t in graph.triples() {
        writeln!(
            out,
            "{}\t{}\t{}",
            ents.name(t.head),
            graph.relations().name(t.relation),
            ents.name(t.tail)
        )?;
    }
    for (&e, &c) in graph.labels() {
        writeln!(out, "{}\t{}", ents.name(e), graph.classes().name(c))?;
    }
    Ok(())
}

/// One `{"h","r","t"}` object per triple, then one `{"e","c"}` per label.
pub fn write_json_lines<W: Write>(graph: &KnowledgeGraph, mut out: W) -> Result<()> {
    let ents = graph.entities();
    for t in graph.triples() {
        let record = serde_json::json!({
            "h": ents.name(t.head),
            "r": graph.relations().name(t.relation),
            "t": ents.name(t.tail),
        });
        writeln!(out, "{record}")?;
    }
    for (&e, &c) in graph.labels() {
        let record = serde_json::json!({"e": ents.name(e), "c": graph.classes().name(c)});
        writeln!(out, "{record}")?;
    }
    Ok(())
}

/// Serialize in either ingest format.
pub fn write_graph<W: Write>(graph: &KnowledgeGraph, format: Format, out: W) -> Result<()> {
    match format {
        Format::Tsv => write_tsv(graph, out),
        Format::JsonLines => write_json_lines(graph, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Triple;

    #[test]
    fn duplicates_collapsed_and_counted() {
        let src = "a\tlikes\tb\nb\tlikes\tc\na\tlikes\tb\n";
        let ing = ingest(src.as_bytes(), Format::Tsv).unwrap();
        assert_eq!(ing.graph.num_entities(), 3);
        assert_eq!(ing.graph.num_relations(), 1);
        assert_eq!(ing.graph.num_triples(), 2);
        assert_eq!(ing.duplicates, 1);
    }

    #[test]
    fn empty_input_gives_empty_graph() {
        let ing = ingest("".as_bytes(), Format::Tsv).unwrap();
        assert_eq!(ing.graph.num_entities(), 0);
        assert_eq!(ing.graph.num_triples(), 0);
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let src = "# header\n\na\tr\tb\r\n";
        let ing = ingest(src.as_bytes(), Format::Tsv).unwrap();
        assert_eq!(ing.graph.triples(), [Triple::new(0, 0, 1)]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let src = "a\tr\tb\nbroken line\n";
        match ingest(src.as_bytes(), Format::Tsv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match ingest("a\t\tb\n".as_bytes(), Format::Tsv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_for_unknown_entity_is_reference_error() {
        let src = "a\tr\tb\nzzz\tclass\n";
        match ingest(src.as_bytes(), Format::Tsv) {
            Err(Error::UnknownEntity { line, entity }) => {
                assert_eq!(line, 2);
                assert_eq!(entity, "zzz");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_lines_with_labels() {
        let src = r#"{"e":"b","c":"thing"}
{"h":"a","r":"r","t":"b"}
# comment
{"h":"b","r":"s","t":"c"}
"#;
        let g = ingest(src.as_bytes(), Format::JsonLines).unwrap().graph;
        assert_eq!(g.num_triples(), 2);
        assert_eq!(g.label(1), Some(0));
        assert_eq!(g.classes().names(), ["thing"]);
        assert!(matches!(
            ingest(r#"{"h":"a","r":"r"}"#.as_bytes(), Format::JsonLines),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn separate_label_stream() {
        let g = ingest("a\tr\tb\n".as_bytes(), Format::Tsv).unwrap().graph;
        let g = ingest_labels(g, "b\tx\na\ty\n".as_bytes(), Format::Tsv).unwrap();
        assert_eq!(g.label(0), Some(1));
        assert_eq!(g.label(1), Some(0));
        let g2 = ingest("a\tr\tb\n".as_bytes(), Format::Tsv).unwrap().graph;
        assert!(ingest_labels(g2, "a\tr\tb\n".as_bytes(), Format::Tsv).is_err());
    }

    #[test]
    fn export_then_ingest_is_identity() {
        let src = "x\tr\ty\ny\ts\tz\nz\tr\tx\nx\tlab\n";
        let g = ingest(src.as_bytes(), Format::Tsv).unwrap().graph;
        let mut buf = Vec::new();
        write_tsv(&g, &mut buf).unwrap();
        let back = ingest(buf.as_slice(), Format::Tsv).unwrap().graph;
        assert_eq!(g, back);
    }

    #[test]
    fn json_lines_export_round_trips() {
        let src = "a\tr\tb\nb\tr\tc\na\tx\n";
        let g = ingest(src.as_bytes(), Format::Tsv).unwrap().graph;
        let mut buf = Vec::new();
        write_graph(&g, Format::JsonLines, &mut buf).unwrap();
        let back = ingest(buf.as_slice(), Format::JsonLines).unwrap().graph;
        assert_eq!(back, g);
    }
}
