//! Hop-by-hop star expansion and the neighborhood-aware star kernel.
//!
//! A depth-`h` star is the `h`-hop ball around its root center together with
//! every edge incident to its depth-`h-1` ball. The kernel sums the star
//! kernel between the depth-`h` families of both graphs for `h = 1..=H`,
//! where `H` is capped by the smaller node count. Center similarity always
//! compares the two root centers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, ExpandedStar};
use crate::star::{enumerate_stars, family_sum, KernelContext, PairTables};

pub const DEFAULT_DEPTH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionPlan {
    max_depth: usize,
}

impl ExpansionPlan {
    pub fn new(max_depth: usize) -> Result<Self> {
        if max_depth == 0 {
            return Err(Error::Config("expansion depth must be at least 1".into()));
        }
        Ok(Self { max_depth })
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// `min(H, |V_g|, |V_h|)`.
    pub fn effective_depth(&self, g: &AttributedGraph, h: &AttributedGraph) -> usize {
        self.max_depth.min(g.num_nodes()).min(h.num_nodes())
    }
}

impl Default for ExpansionPlan {
    fn default() -> Self {
        Self { max_depth: DEFAULT_DEPTH }
    }
}

/// Grows `s` by one hop: the ball gains every neighbor of the current ball,
/// and the edge set gains every edge incident to the current ball.
pub fn expand_star(s: &ExpandedStar, g: &AttributedGraph) -> Result<ExpandedStar> {
    if s.graph_id != g.graph_id() {
        return Err(Error::GraphMismatch {
            star: s.graph_id,
            graph: g.graph_id(),
        });
    }
    let mut ball_nodes = s.ball_nodes.clone();
    let mut edges = s.edges.clone();
    for &u in &s.ball_nodes {
        ball_nodes.extend_from_slice(g.neighbors(u)?);
        edges.extend_from_slice(g.incident_edges(u));
    }
    ball_nodes.sort_unstable();
    ball_nodes.dedup();
    edges.sort_unstable();
    edges.dedup();
    Ok(ExpandedStar {
        graph_id: s.graph_id,
        center: s.center,
        depth: s.depth + 1,
        ball_nodes,
        edges,
    })
}

/// The depth-`depth` star of every node, by ascending center id.
pub fn expanded_family(g: &AttributedGraph, depth: usize) -> Result<Vec<ExpandedStar>> {
    Ok(families(g, depth)?.pop().unwrap_or_default())
}

/// Families for depths `1..=max_depth`; entry `h - 1` holds depth `h`.
pub fn families(g: &AttributedGraph, max_depth: usize) -> Result<Vec<Vec<ExpandedStar>>> {
    if max_depth == 0 {
        return Err(Error::Config("expansion depth must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(max_depth);
    out.push(enumerate_stars(g));
    for _ in 1..max_depth {
        let next = out
            .last()
            .unwrap()
            .iter()
            .map(|s| expand_star(s, g))
            .collect::<Result<Vec<_>>>()?;
        out.push(next);
    }
    Ok(out)
}

fn same_family(a: &[ExpandedStar], b: &[ExpandedStar]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_content(y))
}

/// Per-depth kernel increments for depths `1..=min(fam_g.len(), fam_h.len(),
/// |V_g|, |V_h|)`. Families must come from [`families`] for the same graphs.
///
/// When neither family changed from the previous depth the previous
/// increment is reused; it would be recomputed bit for bit anyway.
pub(crate) fn depth_increments(
    g: &AttributedGraph,
    fam_g: &[Vec<ExpandedStar>],
    h: &AttributedGraph,
    fam_h: &[Vec<ExpandedStar>],
    ctx: &KernelContext,
) -> Vec<f64> {
    let depth = fam_g
        .len()
        .min(fam_h.len())
        .min(g.num_nodes())
        .min(h.num_nodes());
    let tables = PairTables::new(g, h, ctx);
    let mut terms: Vec<f64> = Vec::with_capacity(depth);
    for d in 0..depth {
        let reuse = d > 0 && same_family(&fam_g[d], &fam_g[d - 1]) && same_family(&fam_h[d], &fam_h[d - 1]);
        let term = if reuse {
            terms[d - 1]
        } else {
            family_sum(&fam_g[d], &fam_h[d], &tables, ctx)
        };
        terms.push(term);
    }
    terms
}

/// Neighborhood-aware star kernel of depth `plan.max_depth()`.
///
/// With depth 1 this is exactly [`crate::star::graph_kernel_ks`].
pub fn nask_kernel(
    g: &AttributedGraph,
    h: &AttributedGraph,
    plan: &ExpansionPlan,
    ctx: &KernelContext,
) -> Result<f64> {
    ctx.check_graph(g)?;
    ctx.check_graph(h)?;
    let depth = plan.effective_depth(g, h).max(1);
    let fam_g = families(g, depth)?;
    let fam_h = families(h, depth)?;
    Ok(depth_increments(g, &fam_g, h, &fam_h, ctx)
        .into_iter()
        .fold(0.0, |acc, x| acc + x))
}
