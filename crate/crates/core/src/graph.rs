//! Edge-labeled directed graphs and their per-label binary relations.
//!
//! A [`LabeledGraph`] is built once from an edge list and is immutable
//! afterwards. Every label doubles as a binary relation `R(src, dst)` with
//! set semantics: duplicate `(src, dst, label)` triples are collapsed on load.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type VertexId = u64;

/// Dense id of a label inside one graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelId(pub u32);

/// Which column of a binary relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Position {
    Src,
    Dst,
}

const RESERVED_LABEL_CHARS: &[char] = &[',', ':', '>', '|', '?'];

/// Checks that a label token can be used in pattern keys and query files.
pub fn validate_label(label: &str) -> std::result::Result<(), String> {
    if label.is_empty() {
        return Err("empty label".into());
    }
    if label.chars().any(char::is_whitespace) {
        return Err(format!("label {label:?} contains whitespace"));
    }
    if let Some(c) = label.chars().find(|c| RESERVED_LABEL_CHARS.contains(c)) {
        return Err(format!("label {label:?} contains reserved character {c:?}"));
    }
    Ok(())
}

#[derive(Debug, Default, Clone)]
struct RelationIndex {
    /// Sorted by `(src, dst)`.
    pairs: Vec<(VertexId, VertexId)>,
    out: HashMap<VertexId, Vec<VertexId>>,
    inc: HashMap<VertexId, Vec<VertexId>>,
}

impl RelationIndex {
    fn build(mut pairs: Vec<(VertexId, VertexId)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut out: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
        let mut inc: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
        for &(s, d) in &pairs {
            out.entry(s).or_default().push(d);
            inc.entry(d).or_default().push(s);
        }
        // `out` lists come out sorted from the sorted pair list; `inc` lists do not.
        for list in inc.values_mut() {
            list.sort_unstable();
        }
        RelationIndex { pairs, out, inc }
    }
}

/// An incident edge seen from one endpoint: label, the other endpoint, and
/// whether the edge points away from the viewing vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Incident {
    pub label: LabelId,
    pub other: VertexId,
    pub outgoing: bool,
}

#[derive(Debug, Clone, Default)]
pub struct LabeledGraph {
    vertices: Vec<VertexId>,
    labels: Vec<String>,
    label_ids: HashMap<String, LabelId>,
    relations: Vec<RelationIndex>,
    incident: HashMap<VertexId, Vec<Incident>>,
    num_edges: usize,
}

impl LabeledGraph {
    /// Builds a graph from `(src, dst, label)` triples; duplicates collapse.
    pub fn from_edges<I, S>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (VertexId, VertexId, S)>,
        S: AsRef<str>,
    {
        let mut by_label: BTreeMap<String, Vec<(VertexId, VertexId)>> = BTreeMap::new();
        for (s, d, l) in edges {
            let l = l.as_ref();
            validate_label(l).map_err(Error::Validation)?;
            by_label.entry(l.to_string()).or_default().push((s, d));
        }
        Ok(Self::from_grouped(by_label))
    }

    fn from_grouped(by_label: BTreeMap<String, Vec<(VertexId, VertexId)>>) -> Self {
        let mut labels = Vec::with_capacity(by_label.len());
        let mut label_ids = HashMap::with_capacity(by_label.len());
        let mut relations = Vec::with_capacity(by_label.len());
        let mut vertices = BTreeSet::new();
        let mut incident: HashMap<VertexId, Vec<Incident>> = HashMap::new();
        let mut num_edges = 0;
        for (i, (label, pairs)) in by_label.into_iter().enumerate() {
            let id = LabelId(i as u32);
            let rel = RelationIndex::build(pairs);
            for &(s, d) in &rel.pairs {
                vertices.insert(s);
                vertices.insert(d);
                incident.entry(s).or_default().push(Incident {
                    label: id,
                    other: d,
                    outgoing: true,
                });
                incident.entry(d).or_default().push(Incident {
                    label: id,
                    other: s,
                    outgoing: false,
                });
            }
            num_edges += rel.pairs.len();
            label_ids.insert(label.clone(), id);
            labels.push(label);
            relations.push(rel);
        }
        for list in incident.values_mut() {
            list.sort_unstable();
        }
        LabeledGraph {
            vertices: vertices.into_iter().collect(),
            labels,
            label_ids,
            relations,
            incident,
            num_edges,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Sorted vertex ids.
    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    /// Label tokens in sorted order; `LabelId(i)` names `labels()[i]`.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_id(&self, label: &str) -> Option<LabelId> {
        self.label_ids.get(label).copied()
    }

    pub fn label_name(&self, id: LabelId) -> &str {
        &self.labels[id.0 as usize]
    }

    /// The relation for `label`; empty when the label does not occur.
    pub fn relation(&self, label: &str) -> Relation<'_> {
        match self.label_id(label) {
            Some(id) => self.relation_by_id(id),
            None => Relation {
                label: None,
                index: None,
            },
        }
    }

    pub fn relation_by_id(&self, id: LabelId) -> Relation<'_> {
        Relation {
            label: Some(id),
            index: Some(&self.relations[id.0 as usize]),
        }
    }

    /// Edges touching `v` across all labels, sorted.
    pub fn incident(&self, v: VertexId) -> &[Incident] {
        self.incident.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All edges as `(src, dst, label)`, sorted by `(src, dst, label)`.
    pub fn edges(&self) -> Vec<(VertexId, VertexId, &str)> {
        let mut out: Vec<_> = self
            .relations
            .iter()
            .zip(&self.labels)
            .flat_map(|(r, l)| r.pairs.iter().map(move |&(s, d)| (s, d, l.as_str())))
            .collect();
        out.sort_unstable();
        out
    }

    /// Edge-list text that [`load_graph`] reads back into an equal graph.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (src, dst, label) in self.edges() {
            let _ = writeln!(s, "{src} {dst} {label}");
        }
        s
    }

    /// SHA-256 over the sorted edge list; identifies the source graph of a catalogue.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_edge_list().as_bytes());
        hex::encode(hasher.finalize())
    }
}

/// Read-only view of the tuples carrying one label.
#[derive(Clone, Copy, Debug)]
pub struct Relation<'g> {
    label: Option<LabelId>,
    index: Option<&'g RelationIndex>,
}

impl<'g> Relation<'g> {
    pub fn label(&self) -> Option<LabelId> {
        self.label
    }

    pub fn len(&self) -> usize {
        self.index.map_or(0, |r| r.pairs.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tuples sorted by `(src, dst)`.
    pub fn tuples(&self) -> &'g [(VertexId, VertexId)] {
        self.index.map_or(&[], |r| r.pairs.as_slice())
    }

    pub fn out_neighbors(&self, v: VertexId) -> &'g [VertexId] {
        self.index
            .and_then(|r| r.out.get(&v))
            .map_or(&[], Vec::as_slice)
    }

    pub fn in_neighbors(&self, v: VertexId) -> &'g [VertexId] {
        self.index
            .and_then(|r| r.inc.get(&v))
            .map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, src: VertexId, dst: VertexId) -> bool {
        self.out_neighbors(src).binary_search(&dst).is_ok()
    }

    /// `deg(X, R)` for a single column: the largest multiplicity of any value.
    pub fn max_degree(&self, position: Position) -> usize {
        let Some(r) = self.index else { return 0 };
        let lists = match position {
            Position::Src => &r.out,
            Position::Dst => &r.inc,
        };
        lists.values().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of distinct values in a column, `|π_p R|`.
    pub fn distinct(&self, position: Position) -> usize {
        self.index.map_or(0, |r| match position {
            Position::Src => r.out.len(),
            Position::Dst => r.inc.len(),
        })
    }
}

/// Free-function form of [`LabeledGraph::relation`].
pub fn relation<'g>(g: &'g LabeledGraph, label: &str) -> Relation<'g> {
    g.relation(label)
}

/// Free-function form of [`Relation::max_degree`].
pub fn max_degree(r: &Relation<'_>, position: Position) -> usize {
    r.max_degree(position)
}

fn parse_vertex(tok: &str, line: usize) -> Result<VertexId> {
    tok.parse::<VertexId>().map_err(|_| {
        if tok.parse::<i128>().is_ok() {
            Error::parse(line, format!("negative vertex id {tok}"))
        } else {
            Error::parse(line, format!("vertex id {tok:?} is not a non-negative integer"))
        }
    })
}

/// Reads an edge list: one `src dst label` triple per line, `#` comments.
pub fn load_graph<R: BufRead>(source: R) -> Result<LabeledGraph> {
    let mut by_label: BTreeMap<String, Vec<(VertexId, VertexId)>> = BTreeMap::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let [src, dst, label] = fields[..] else {
            return Err(Error::parse(
                lineno,
                format!("expected `src dst label`, found {} fields", fields.len()),
            ));
        };
        let src = parse_vertex(src, lineno)?;
        let dst = parse_vertex(dst, lineno)?;
        validate_label(label).map_err(|m| Error::parse(lineno, m))?;
        by_label.entry(label.to_string()).or_default().push((src, dst));
    }
    Ok(LabeledGraph::from_grouped(by_label))
}

/// Convenience wrapper over [`load_graph`] for in-memory text.
pub fn parse_graph(text: &str) -> Result<LabeledGraph> {
    load_graph(text.as_bytes())
}
