//! Knowledge graph storage: interned entities and relations, the triple set,
//! and optional single-label classes per entity.

mod ingest;
mod negative;
mod split;
mod synthetic;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ingest::{ingest, ingest_labels, write_graph, write_json_lines, write_tsv, Format, Ingested};
pub use negative::{corrupt_triple, sample_negative_edges, CorruptMode, MAX_NEGATIVE_ATTEMPTS};
pub use split::{split_edges, split_nodes, split_triples, EdgeSplit, LabeledEdge, NodeSplit, TripleSplit};
pub use synthetic::{generate_synthetic, Structure, SyntheticSpec};

/// A directed, typed edge `(head, relation, tail)` over interned indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// Bidirectional name ↔ index map; indices follow first insertion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn from_names(names: Vec<String>) -> Result<Self> {
        let mut out = Interner::default();
        for n in names {
            let before = out.len();
            if out.intern(&n) != before {
                return Err(Error::invalid(format!("duplicate name `{n}`")));
            }
        }
        Ok(out)
    }
}

/// Immutable knowledge graph. Safe to share read-only across threads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphData", into = "GraphData")]
pub struct KnowledgeGraph {
    entities: Interner,
    relations: Interner,
    classes: Interner,
    triples: Vec<Triple>,
    triple_set: HashSet<Triple>,
    labels: BTreeMap<usize, usize>,
}

impl KnowledgeGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn entities(&self) -> &Interner {
        &self.entities
    }

    pub fn relations(&self) -> &Interner {
        &self.relations
    }

    pub fn classes(&self) -> &Interner {
        &self.classes
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triple_set.contains(t)
    }

    pub fn label(&self, entity: usize) -> Option<usize> {
        self.labels.get(&entity).copied()
    }

    pub fn labels(&self) -> &BTreeMap<usize, usize> {
        &self.labels
    }

    /// Labeled entity indices in ascending order.
    pub fn labeled_entities(&self) -> Vec<usize> {
        self.labels.keys().copied().collect()
    }

    /// Number of triples whose tail is each entity.
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_entities()];
        for t in &self.triples {
            deg[t.tail] += 1;
        }
        deg
    }

    /// Sorted neighbor lists of the undirected skeleton: relations and
    /// direction dropped, parallel edges collapsed, self-loops removed.
    pub fn skeleton(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_entities()];
        for t in &self.triples {
            if t.head != t.tail {
                adj[t.head].push(t.tail);
                adj[t.tail].push(t.head);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Distinct directed `(head, tail)` pairs in first-appearance order.
    pub fn directed_pairs(&self) -> Vec<(usize, usize)> {
        let mut seen = HashSet::new();
        self.triples
            .iter()
            .map(|t| (t.head, t.tail))
            .filter(|p| seen.insert(*p))
            .collect()
    }
}

/// Incremental constructor for [`KnowledgeGraph`].
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entities: Interner,
    relations: Interner,
    classes: Interner,
    triples: Vec<Triple>,
    triple_set: HashSet<Triple>,
    labels: BTreeMap<usize, usize>,
    duplicates: usize,
}

impl GraphBuilder {
    pub fn add_entity(&mut self, name: &str) -> usize {
        self.entities.intern(name)
    }

    pub fn add_relation(&mut self, name: &str) -> usize {
        self.relations.intern(name)
    }

    pub fn add_class(&mut self, name: &str) -> usize {
        self.classes.intern(name)
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.entities.get(name)
    }

    /// Intern names and insert the triple. Returns `false` for a duplicate.
    pub fn add_named_triple(&mut self, head: &str, relation: &str, tail: &str) -> bool {
        let h = self.add_entity(head);
        let r = self.add_relation(relation);
        let t = self.add_entity(tail);
        self.insert(Triple::new(h, r, t))
    }

    /// Insert a triple over already-interned indices. Returns `false` for a duplicate.
    pub fn add_triple(&mut self, t: Triple) -> Result<bool> {
        if t.head >= self.entities.len() || t.tail >= self.entities.len() {
            return Err(Error::invalid(format!("entity index out of range in {t:?}")));
        }
        if t.relation >= self.relations.len() {
            return Err(Error::invalid(format!("relation index out of range in {t:?}")));
        }
        Ok(self.insert(t))
    }

    fn insert(&mut self, t: Triple) -> bool {
        if self.triple_set.insert(t) {
            self.triples.push(t);
            true
        } else {
            self.duplicates += 1;
            false
        }
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triple_set.contains(t)
    }

    /// Attach a class to an entity. Re-labeling with the same class is a no-op;
    /// a different class is rejected (single-label graphs only).
    pub fn set_label(&mut self, entity: usize, class: &str) -> Result<()> {
        if entity >= self.entities.len() {
            return Err(Error::invalid(format!("entity index {entity} out of range")));
        }
        let c = self.classes.intern(class);
        match self.labels.insert(entity, c) {
            Some(prev) if prev != c => Err(Error::invalid(format!(
                "entity `{}` labeled both `{}` and `{class}`",
                self.entities.name(entity),
                self.classes.name(prev)
            ))),
            _ => Ok(()),
        }
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn build(self) -> KnowledgeGraph {
        KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            classes: self.classes,
            triples: self.triples,
            triple_set: self.triple_set,
            labels: self.labels,
        }
    }
}

/// On-disk form of a graph; the membership set is rebuilt on load.
#[derive(Serialize, Deserialize)]
struct GraphData {
    entities: Vec<String>,
    relations: Vec<String>,
    classes: Vec<String>,
    triples: Vec<[usize; 3]>,
    labels: Vec<[usize; 2]>,
}

impl From<KnowledgeGraph> for GraphData {
    fn from(g: KnowledgeGraph) -> Self {
        GraphData {
            triples: g
                .triples
                .iter()
                .map(|t| [t.head, t.relation, t.tail])
                .collect(),
            labels: g.labels.iter().map(|(&e, &c)| [e, c]).collect(),
            entities: g.entities.names,
            relations: g.relations.names,
            classes: g.classes.names,
        }
    }
}

impl TryFrom<GraphData> for KnowledgeGraph {
    type Error = Error;

    fn try_from(d: GraphData) -> Result<Self> {
        let mut b = GraphBuilder {
            entities: Interner::from_names(d.entities)?,
            relations: Interner::from_names(d.relations)?,
            classes: Interner::from_names(d.classes)?,
            ..GraphBuilder::default()
        };
        for [h, r, t] in d.triples {
            if !b.add_triple(Triple::new(h, r, t))? {
                return Err(Error::invalid("duplicate triple in graph data"));
            }
        }
        for [e, c] in d.labels {
            if e >= b.entities.len() || c >= b.classes.len() {
                return Err(Error::invalid("label index out of range"));
            }
            b.labels.insert(e, c);
        }
        Ok(b.build())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> KnowledgeGraph {
        let mut b = KnowledgeGraph::builder();
        b.add_named_triple("a", "likes", "b");
        b.add_named_triple("b", "likes", "c");
        b.add_named_triple("c", "near", "c");
        b.add_named_triple("b", "near", "a");
        let a = b.entity_index("a").unwrap();
        b.set_label(a, "person").unwrap();
        b.build()
    }

    #[test]
    fn interning_follows_first_appearance() {
        let g = sample();
        assert_eq!(g.entities().names(), ["a", "b", "c"]);
        assert_eq!(g.relations().names(), ["likes", "near"]);
        assert!(g.contains(&Triple::new(0, 0, 1)));
        assert!(!g.contains(&Triple::new(1, 0, 0)));
    }

    #[test]
    fn skeleton_drops_loops_and_direction() {
        let g = sample();
        assert_eq!(g.skeleton(), vec![vec![1], vec![0, 2], vec![1]]);
        assert_eq!(g.in_degrees(), vec![1, 1, 2]);
        assert_eq!(g.directed_pairs(), vec![(0, 1), (1, 2), (2, 2), (1, 0)]);
    }

    #[test]
    fn conflicting_label_rejected() {
        let mut b = KnowledgeGraph::builder();
        b.add_named_triple("a", "r", "b");
        b.set_label(0, "x").unwrap();
        b.set_label(0, "x").unwrap();
        assert!(b.set_label(0, "y").is_err());
        assert!(b.set_label(7, "x").is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = sample();
        let s = serde_json::to_string(&g).unwrap();
        let back: KnowledgeGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }
}
