//! Star subgraphs and the star kernel.
//!
//! A star is a center node with its neighbors and the center's incident
//! edges. Two stars are compared by the similarity of their centers times the
//! summed similarity of every pair of their elements (node with node, edge
//! with edge). The graph-level kernel sums that over all star pairs.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeSchema, AttributedGraph, ExpandedStar, NodeId};
use crate::similarity::{ElementSimilarity, SimilarityParams};

/// Whether edges take part in star decompositions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeElements {
    /// Include edges iff the dataset has edge attributes.
    #[default]
    Auto,
    On,
    Off,
}

impl EdgeElements {
    pub fn resolve(self, schema: &AttributeSchema) -> bool {
        match self {
            EdgeElements::Auto => schema.has_edge_attributes(),
            EdgeElements::On => true,
            EdgeElements::Off => false,
        }
    }
}

impl FromStr for EdgeElements {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "on" => Ok(Self::On),
            "off" => Ok(Self::Off),
            _ => Err(Error::Config(format!("edge elements mode must be auto, on or off, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for EdgeElements {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::On => "on",
            Self::Off => "off",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Summation {
    #[default]
    Plain,
    /// Neumaier-compensated accumulation of star-pair terms.
    Compensated,
}

/// Everything a kernel evaluation needs besides the two graphs.
#[derive(Clone, Debug)]
pub struct KernelContext {
    params: SimilarityParams,
    node_dims: usize,
    edge_dims: usize,
    node_sim: ElementSimilarity,
    edge_sim: Option<ElementSimilarity>,
    tau: f64,
    summation: Summation,
}

impl KernelContext {
    /// Numerical dimensions must have ranges. With no node dimensions every
    /// node pair has similarity 1, and likewise for edges when edge elements
    /// are forced on without edge attributes.
    pub fn new(schema: &AttributeSchema, params: SimilarityParams, edges: EdgeElements) -> Result<Self> {
        let edge_sim = if edges.resolve(schema) {
            Some(ElementSimilarity::new(&schema.edge_dims, &params)?)
        } else {
            None
        };
        Ok(Self {
            params,
            node_dims: schema.node_dims.len(),
            edge_dims: schema.edge_dims.len(),
            node_sim: ElementSimilarity::new(&schema.node_dims, &params)?,
            edge_sim,
            tau: 0.0,
            summation: Summation::Plain,
        })
    }

    /// Star pairs whose center similarity is below `tau` contribute 0.
    pub fn with_pruning(mut self, tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!("pruning threshold must lie in [0, 1], got {tau}")));
        }
        self.tau = tau;
        Ok(self)
    }

    pub fn with_summation(mut self, summation: Summation) -> Self {
        self.summation = summation;
        self
    }

    pub fn params(&self) -> &SimilarityParams {
        &self.params
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn includes_edges(&self) -> bool {
        self.edge_sim.is_some()
    }

    pub fn check_graph(&self, g: &AttributedGraph) -> Result<()> {
        let id = g.graph_id();
        if let Some(v) = g.node_attrs().iter().position(|a| a.len() != self.node_dims) {
            return Err(Error::SchemaMismatch(format!(
                "graph {id} node {v} has {} values, schema has {}",
                g.node_attrs()[v].len(),
                self.node_dims
            )));
        }
        if let Some(sim) = &self.edge_sim {
            if sim.dims() > 0 {
                match g.edge_attrs() {
                    Some(attrs) => {
                        if let Some(e) = attrs.iter().position(|a| a.len() != self.edge_dims) {
                            return Err(Error::SchemaMismatch(format!(
                                "graph {id} edge {e} has {} values, schema has {}",
                                attrs[e].len(),
                                self.edge_dims
                            )));
                        }
                    }
                    None if g.num_edges() > 0 => {
                        return Err(Error::SchemaMismatch(format!("graph {id} has no edge attributes")));
                    }
                    None => {}
                }
            }
        }
        Ok(())
    }

    fn node_similarity(&self, g: &AttributedGraph, u: NodeId, h: &AttributedGraph, v: NodeId) -> f64 {
        self.node_sim.eval(&g.node_attrs()[u], &h.node_attrs()[v])
    }

    fn edge_similarity(sim: &ElementSimilarity, g: &AttributedGraph, e: usize, h: &AttributedGraph, f: usize) -> f64 {
        if sim.dims() == 0 {
            return 1.0;
        }
        sim.eval(&g.edge_attrs().unwrap()[e], &h.edge_attrs().unwrap()[f])
    }
}

/// Running sum, optionally compensated.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Accumulator {
    sum: f64,
    carry: f64,
    compensated: bool,
}

impl Accumulator {
    pub(crate) fn new(summation: Summation) -> Self {
        Self {
            sum: 0.0,
            carry: 0.0,
            compensated: summation == Summation::Compensated,
        }
    }

    pub(crate) fn add(&mut self, x: f64) {
        if self.compensated {
            let t = self.sum + x;
            if self.sum.abs() >= x.abs() {
                self.carry += (self.sum - t) + x;
            } else {
                self.carry += (x - t) + self.sum;
            }
            self.sum = t;
        } else {
            self.sum += x;
        }
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Star centered at `v`: `{v} ∪ N(v)` with the edges from `v` to its
/// neighbors. Leaf-to-leaf edges are not part of it.
pub fn extract_star(g: &AttributedGraph, v: NodeId) -> Result<ExpandedStar> {
    let neighbors = g.neighbors(v)?;
    let mut ball_nodes = Vec::with_capacity(neighbors.len() + 1);
    ball_nodes.push(v);
    ball_nodes.extend_from_slice(neighbors);
    ball_nodes.sort_unstable();
    let mut edges = g.incident_edges(v).to_vec();
    edges.sort_unstable();
    Ok(ExpandedStar {
        graph_id: g.graph_id(),
        center: v,
        depth: 1,
        ball_nodes,
        edges,
    })
}

/// One star per node, by ascending center id.
pub fn enumerate_stars(g: &AttributedGraph) -> Vec<ExpandedStar> {
    (0..g.num_nodes())
        .map(|v| extract_star(g, v).expect("node id in range"))
        .collect()
}

/// The elements a star is broken into for comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub center: NodeId,
    /// Every node of the star, center included, ascending.
    pub node_ids: Vec<NodeId>,
    /// Edge ids of the owning graph, ascending; empty when edges are excluded.
    pub edge_ids: Vec<usize>,
}

pub fn decompose(s: &ExpandedStar, include_edges: bool) -> Decomposition {
    Decomposition {
        center: s.center,
        node_ids: s.ball_nodes.clone(),
        edge_ids: if include_edges { s.edges.clone() } else { Vec::new() },
    }
}

/// Star-pair kernel, evaluated element pair by element pair.
///
/// `s` must be a star of `gs` and `t` a star of `gt`.
pub fn star_pair_kernel(
    s: &ExpandedStar,
    gs: &AttributedGraph,
    t: &ExpandedStar,
    gt: &AttributedGraph,
    ctx: &KernelContext,
) -> Result<f64> {
    for (star, g) in [(s, gs), (t, gt)] {
        if star.graph_id != g.graph_id() {
            return Err(Error::GraphMismatch {
                star: star.graph_id,
                graph: g.graph_id(),
            });
        }
        ctx.check_graph(g)?;
    }
    let center = ctx.node_similarity(gs, s.center, gt, t.center);
    if ctx.tau > 0.0 && center < ctx.tau {
        return Ok(0.0);
    }
    let ds = decompose(s, ctx.includes_edges());
    let dt = decompose(t, ctx.includes_edges());
    let mut sum = 0.0;
    for &n in &ds.node_ids {
        for &m in &dt.node_ids {
            sum += ctx.node_similarity(gs, n, gt, m);
        }
    }
    if let Some(sim) = &ctx.edge_sim {
        for &e in &ds.edge_ids {
            for &f in &dt.edge_ids {
                sum += KernelContext::edge_similarity(sim, gs, e, gt, f);
            }
        }
    }
    Ok(center * sum)
}

/// Element similarities between two graphs, computed once per graph pair and
/// shared by every depth.
pub(crate) struct PairTables {
    node: Vec<f64>,
    cols: usize,
    edge: Option<(Vec<f64>, usize)>,
}

impl PairTables {
    pub(crate) fn new(g: &AttributedGraph, h: &AttributedGraph, ctx: &KernelContext) -> Self {
        let cols = h.num_nodes();
        let mut node = Vec::with_capacity(g.num_nodes() * cols);
        for u in 0..g.num_nodes() {
            for v in 0..cols {
                node.push(ctx.node_similarity(g, u, h, v));
            }
        }
        let edge = ctx.edge_sim.as_ref().map(|sim| {
            let ecols = h.num_edges();
            let mut table = Vec::with_capacity(g.num_edges() * ecols);
            for e in 0..g.num_edges() {
                for f in 0..ecols {
                    table.push(KernelContext::edge_similarity(sim, g, e, h, f));
                }
            }
            (table, ecols)
        });
        Self { node, cols, edge }
    }
}

/// Sum of the star-pair kernel over every pair of `left × right`.
///
/// For each left star the similarity rows of its elements are summed once,
/// so each right star only needs a gather over its own elements. Star pairs
/// are visited in lexicographic order.
pub(crate) fn family_sum(
    left: &[ExpandedStar],
    right: &[ExpandedStar],
    tables: &PairTables,
    ctx: &KernelContext,
) -> f64 {
    let cols = tables.cols;
    let mut acc = Accumulator::new(ctx.summation);
    let mut node_row = vec![0.0; cols];
    let mut edge_row = vec![0.0; tables.edge.as_ref().map_or(0, |(_, c)| *c)];
    for s in left {
        node_row.iter_mut().for_each(|x| *x = 0.0);
        for &n in &s.ball_nodes {
            let row = &tables.node[n * cols..(n + 1) * cols];
            node_row.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        if let Some((table, ecols)) = &tables.edge {
            edge_row.iter_mut().for_each(|x| *x = 0.0);
            for &e in &s.edges {
                let row = &table[e * ecols..(e + 1) * ecols];
                edge_row.iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
        }
        let centers = &tables.node[s.center * cols..(s.center + 1) * cols];
        for t in right {
            let weight = centers[t.center];
            if ctx.tau > 0.0 && weight < ctx.tau {
                continue;
            }
            let mut inner = 0.0;
            for &m in &t.ball_nodes {
                inner += node_row[m];
            }
            if tables.edge.is_some() {
                for &f in &t.edges {
                    inner += edge_row[f];
                }
            }
            acc.add(weight * inner);
        }
    }
    acc.total()
}

/// Star kernel between two graphs: the star-pair kernel summed over all
/// `|V_g| * |V_h|` star pairs.
pub fn graph_kernel_ks(g: &AttributedGraph, h: &AttributedGraph, ctx: &KernelContext) -> Result<f64> {
    ctx.check_graph(g)?;
    ctx.check_graph(h)?;
    let tables = PairTables::new(g, h, ctx);
    Ok(family_sum(&enumerate_stars(g), &enumerate_stars(h), &tables, ctx))
}
