//! Immutable attributed graphs, attribute schemas and star subgraphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Undirected edge as `(min, max)`.
pub type EdgeKey = (NodeId, NodeId);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionKind {
    Numerical,
    Categorical,
}

/// One attribute dimension shared by every graph of a dataset.
///
/// Numerical dimensions carry the dataset-wide `(min, max)` once ranges have
/// been computed. Categorical dimensions carry their symbol table: the value
/// `Symbol(i)` stands for `categories[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub name: String,
    pub kind: DimensionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl DimensionSpec {
    pub fn numerical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: DimensionKind::Numerical,
            range: None,
            categories: Vec::new(),
        }
    }

    pub fn numerical_with_range(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self {
            range: Some((min, max)),
            ..Self::numerical(name)
        }
    }

    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: DimensionKind::Categorical,
            range: None,
            categories,
        }
    }

    /// `max - min` for a numerical dimension with a computed range.
    pub fn range_width(&self) -> Option<f64> {
        self.range.map(|(lo, hi)| hi - lo)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub node_dims: Vec<DimensionSpec>,
    pub edge_dims: Vec<DimensionSpec>,
}

impl AttributeSchema {
    pub fn has_edge_attributes(&self) -> bool {
        !self.edge_dims.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AttributeValue {
    Real(f64),
    Symbol(u32),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector(Vec<AttributeValue>);

impl AttributeVector {
    pub fn new(values: Vec<AttributeValue>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[AttributeValue] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks length, kinds and finiteness against a dimension list.
    pub fn conforms_to(&self, dims: &[DimensionSpec]) -> std::result::Result<(), String> {
        if self.0.len() != dims.len() {
            return Err(format!(
                "attribute vector has {} values, schema has {} dimensions",
                self.0.len(),
                dims.len()
            ));
        }
        for (d, (value, dim)) in self.0.iter().zip(dims).enumerate() {
            match (value, dim.kind) {
                (AttributeValue::Real(x), DimensionKind::Numerical) => {
                    if !x.is_finite() {
                        return Err(format!("dimension {d} holds non-finite value {x}"));
                    }
                }
                (AttributeValue::Symbol(s), DimensionKind::Categorical) => {
                    if !dim.categories.is_empty() && *s as usize >= dim.categories.len() {
                        return Err(format!("dimension {d} holds unknown symbol {s}"));
                    }
                }
                _ => return Err(format!("dimension {d} holds a value of the wrong kind")),
            }
        }
        Ok(())
    }
}

impl From<Vec<AttributeValue>> for AttributeVector {
    fn from(values: Vec<AttributeValue>) -> Self {
        Self(values)
    }
}

/// Returns `(min(u, v), max(u, v))`.
pub fn canonical_edge(u: NodeId, v: NodeId) -> Result<EdgeKey> {
    if u == v {
        return Err(Error::SelfLoop(u));
    }
    Ok((u.min(v), u.max(v)))
}

/// An undirected graph with attributed nodes and optionally attributed edges.
///
/// Edges are stored once, in canonical form, sorted. Every adjacency entry
/// carries the id of the edge it came from so star expansion never has to
/// search the edge list.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributedGraph {
    graph_id: usize,
    label: usize,
    adjacency: Vec<Vec<NodeId>>,
    incident: Vec<Vec<usize>>,
    edges: Vec<EdgeKey>,
    node_attrs: Vec<AttributeVector>,
    edge_attrs: Option<Vec<AttributeVector>>,
}

impl AttributedGraph {
    /// Builds a graph from an undirected edge list. `edge_attrs`, when given,
    /// is aligned with `edges`.
    pub fn new(
        graph_id: usize,
        label: usize,
        node_attrs: Vec<AttributeVector>,
        edges: &[(NodeId, NodeId)],
        edge_attrs: Option<Vec<AttributeVector>>,
    ) -> Result<Self> {
        let num_nodes = node_attrs.len();
        if let Some(attrs) = &edge_attrs {
            if attrs.len() != edges.len() {
                return Err(Error::Invariant(format!(
                    "{} edge attribute vectors for {} edges",
                    attrs.len(),
                    edges.len()
                )));
            }
        }
        let mut keyed = Vec::with_capacity(edges.len());
        for (i, &(u, v)) in edges.iter().enumerate() {
            for node in [u, v] {
                if node >= num_nodes {
                    return Err(Error::InvalidNode { node, num_nodes });
                }
            }
            keyed.push((canonical_edge(u, v)?, i));
        }
        keyed.sort_unstable();
        if let Some(w) = keyed.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateEdge(w[0].0 .0, w[0].0 .1));
        }

        let sorted_edges: Vec<EdgeKey> = keyed.iter().map(|(k, _)| *k).collect();
        let sorted_attrs = edge_attrs.map(|attrs| {
            let mut slots: Vec<Option<AttributeVector>> = attrs.into_iter().map(Some).collect();
            keyed
                .iter()
                .map(|&(_, i)| slots[i].take().expect("edge index used once"))
                .collect()
        });

        let mut adjacency = vec![Vec::new(); num_nodes];
        for (id, &(u, v)) in sorted_edges.iter().enumerate() {
            adjacency[u].push((v, id));
            adjacency[v].push((u, id));
        }
        let (adjacency, incident) = adjacency
            .into_iter()
            .map(|mut list| {
                list.sort_unstable();
                list.into_iter().unzip()
            })
            .unzip();

        Ok(Self {
            graph_id,
            label,
            adjacency,
            incident,
            edges: sorted_edges,
            node_attrs,
            edge_attrs: sorted_attrs,
        })
    }

    /// Builds a graph directly from adjacency lists without validating them.
    ///
    /// Edges are derived from the entries with `u < v`. Intended for
    /// constructing fixtures, including broken ones for
    /// [`AttributedGraph::check_invariants`].
    pub fn from_adjacency_unchecked(
        graph_id: usize,
        label: usize,
        adjacency: Vec<Vec<NodeId>>,
        node_attrs: Vec<AttributeVector>,
    ) -> Self {
        let mut edges: Vec<EdgeKey> = adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let incident = adjacency
            .iter()
            .enumerate()
            .map(|(u, list)| {
                list.iter()
                    .map(|&v| {
                        edges
                            .binary_search(&(u.min(v), u.max(v)))
                            .unwrap_or(usize::MAX)
                    })
                    .collect()
            })
            .collect();
        Self {
            graph_id,
            label,
            adjacency,
            incident,
            edges,
            node_attrs,
            edge_attrs: None,
        }
    }

    pub fn graph_id(&self) -> usize {
        self.graph_id
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: NodeId) -> Result<&[NodeId]> {
        self.adjacency
            .get(v)
            .map(Vec::as_slice)
            .ok_or(Error::InvalidNode {
                node: v,
                num_nodes: self.num_nodes(),
            })
    }

    /// Edge ids aligned with `neighbors(v)`.
    pub(crate) fn incident_edges(&self, v: NodeId) -> &[usize] {
        &self.incident[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency.get(v).map_or(0, Vec::len)
    }

    /// Canonical edges, sorted ascending. An edge's id is its index here.
    pub fn edges(&self) -> &[EdgeKey] {
        &self.edges
    }

    pub fn edge_id(&self, key: EdgeKey) -> Option<usize> {
        self.edges.binary_search(&key).ok()
    }

    pub fn node_attrs(&self) -> &[AttributeVector] {
        &self.node_attrs
    }

    pub fn edge_attrs(&self) -> Option<&[AttributeVector]> {
        self.edge_attrs.as_deref()
    }

    /// Returns a copy with node `v` renamed to `perm[v]`.
    pub fn permuted(&self, perm: &[NodeId]) -> Result<Self> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Invariant("not a permutation of the node set".into()));
        }
        let mut node_attrs = vec![AttributeVector::default(); n];
        for (v, attrs) in self.node_attrs.iter().enumerate() {
            node_attrs[perm[v]] = attrs.clone();
        }
        let edges: Vec<EdgeKey> = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        Self::new(
            self.graph_id,
            self.label,
            node_attrs,
            &edges,
            self.edge_attrs.clone(),
        )
    }

    /// Checks structural invariants and attribute conformance, returning one
    /// message per violation.
    pub fn check_invariants(&self, schema: Option<&AttributeSchema>) -> Vec<String> {
        let mut problems = Vec::new();
        let id = self.graph_id;
        if self.node_attrs.len() != self.num_nodes() {
            problems.push(format!(
                "graph {id}: {} attribute vectors for {} nodes",
                self.node_attrs.len(),
                self.num_nodes()
            ));
        }
        for (u, list) in self.adjacency.iter().enumerate() {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                problems.push(format!("graph {id}: neighbors of {u} not sorted or duplicated"));
            }
            for &v in list {
                if v == u {
                    problems.push(format!("graph {id}: self-loop on {u}"));
                } else if v >= self.num_nodes() {
                    problems.push(format!("graph {id}: neighbor {v} of {u} out of range"));
                } else if self.adjacency[v].binary_search(&u).is_err() {
                    problems.push(format!("graph {id}: asymmetric adjacency {u} -> {v}"));
                }
            }
        }
        if let Some(attrs) = &self.edge_attrs {
            if attrs.len() != self.edges.len() {
                problems.push(format!(
                    "graph {id}: {} edge attribute vectors for {} edges",
                    attrs.len(),
                    self.edges.len()
                ));
            }
        }
        if let Some(schema) = schema {
            for (v, attrs) in self.node_attrs.iter().enumerate() {
                if let Err(e) = attrs.conforms_to(&schema.node_dims) {
                    problems.push(format!("graph {id}: node {v}: {e}"));
                }
            }
            match (&self.edge_attrs, schema.has_edge_attributes()) {
                (Some(attrs), _) => {
                    for (e, a) in attrs.iter().enumerate() {
                        if let Err(msg) = a.conforms_to(&schema.edge_dims) {
                            problems.push(format!("graph {id}: edge {e}: {msg}"));
                        }
                    }
                }
                (None, true) if !self.edges.is_empty() => {
                    problems.push(format!("graph {id}: schema has edge dimensions but graph has no edge attributes"));
                }
                _ => {}
            }
        }
        problems
    }
}

/// A star grown to `depth` hops around `center`.
///
/// `edges` holds edge ids of the owning graph, sorted, so they are also sorted
/// by canonical key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpandedStar {
    pub graph_id: usize,
    pub center: NodeId,
    pub depth: usize,
    pub ball_nodes: Vec<NodeId>,
    pub edges: Vec<usize>,
}

impl ExpandedStar {
    pub fn edge_keys(&self, g: &AttributedGraph) -> Vec<EdgeKey> {
        self.edges.iter().map(|&e| g.edges()[e]).collect()
    }

    /// True when both stars cover the same nodes and edges.
    pub fn same_content(&self, other: &Self) -> bool {
        self.ball_nodes == other.ball_nodes && self.edges == other.edges
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unlabeled(n: usize) -> Vec<AttributeVector> {
        vec![AttributeVector::new(vec![AttributeValue::Symbol(0)]); n]
    }

    fn graph(n: usize, edges: &[(usize, usize)]) -> AttributedGraph {
        AttributedGraph::new(0, 0, unlabeled(n), edges, None).unwrap()
    }

    #[test]
    fn neighbors_path_isolated_star() {
        let path = graph(3, &[(0, 1), (2, 1)]);
        assert_eq!(path.neighbors(1).unwrap(), &[0, 2]);
        let isolated = graph(2, &[]);
        assert!(isolated.neighbors(1).unwrap().is_empty());
        let star = graph(4, &[(3, 0), (0, 1), (2, 0)]);
        assert_eq!(star.neighbors(0).unwrap(), &[1, 2, 3]);
        assert!(matches!(
            star.neighbors(4),
            Err(Error::InvalidNode { node: 4, num_nodes: 4 })
        ));
    }

    #[test]
    fn canonical_edge_orders_and_rejects_loops() {
        assert_eq!(canonical_edge(3, 1).unwrap(), (1, 3));
        assert_eq!(canonical_edge(1, 3).unwrap(), (1, 3));
        assert!(matches!(canonical_edge(5, 5), Err(Error::SelfLoop(5))));
    }

    #[test]
    fn construction_rejects_bad_edges() {
        let attrs = unlabeled(3);
        assert!(matches!(
            AttributedGraph::new(0, 0, attrs.clone(), &[(1, 1)], None),
            Err(Error::SelfLoop(1))
        ));
        assert!(matches!(
            AttributedGraph::new(0, 0, attrs.clone(), &[(0, 1), (1, 0)], None),
            Err(Error::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            AttributedGraph::new(0, 0, attrs, &[(0, 7)], None),
            Err(Error::InvalidNode { node: 7, .. })
        ));
    }

    #[test]
    fn edge_attributes_follow_canonical_order() {
        let attr = |x: f64| AttributeVector::new(vec![AttributeValue::Real(x)]);
        let g = AttributedGraph::new(
            0,
            0,
            unlabeled(3),
            &[(2, 1), (1, 0)],
            Some(vec![attr(21.0), attr(10.0)]),
        )
        .unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.edge_attrs().unwrap(), &[attr(10.0), attr(21.0)]);
        assert_eq!(g.incident_edges(1), &[0, 1]);
    }

    #[test]
    fn asymmetric_adjacency_is_reported() {
        let g = AttributedGraph::from_adjacency_unchecked(3, 0, vec![vec![1], vec![]], unlabeled(2));
        let problems = g.check_invariants(None);
        assert_eq!(problems.len(), 1);
        assert!(problems[0].contains("asymmetric"));
    }

    #[test]
    fn permutation_preserves_degrees_and_attributes() {
        let attrs: Vec<_> = (0..4)
            .map(|i| AttributeVector::new(vec![AttributeValue::Real(i as f64)]))
            .collect();
        let g = AttributedGraph::new(0, 0, attrs, &[(0, 1), (1, 2), (1, 3)], None).unwrap();
        let p = g.permuted(&[2, 0, 3, 1]).unwrap();
        let mut d1: Vec<_> = (0..4).map(|v| g.degree(v)).collect();
        let mut d2: Vec<_> = (0..4).map(|v| p.degree(v)).collect();
        d1.sort_unstable();
        d2.sort_unstable();
        assert_eq!(d1, d2);
        assert_eq!(p.node_attrs()[0], g.node_attrs()[1]);
        assert_eq!(p.neighbors(0).unwrap(), &[1, 2, 3]);
        assert!(g.permuted(&[0, 0, 1, 2]).is_err());
    }
}
