//! Seeded random attributed graphs with a mixed schema, for tests and
//! benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{compute_ranges, Dataset};
use crate::graph::{AttributeSchema, AttributeValue, AttributeVector, AttributedGraph, DimensionSpec};

#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub graphs: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Probability of each possible edge.
    pub density: f64,
    pub edge_attributes: bool,
    pub classes: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            graphs: 20,
            min_nodes: 1,
            max_nodes: 12,
            density: 0.3,
            edge_attributes: false,
            classes: 2,
        }
    }
}

/// Node dims: categorical (4 symbols), two numerical. Edge dims when enabled:
/// categorical (3 symbols), numerical.
pub fn mixed_schema(edge_attributes: bool) -> AttributeSchema {
    let symbols = |k: usize| (0..k).map(|s| s.to_string()).collect();
    AttributeSchema {
        node_dims: vec![
            DimensionSpec::categorical("kind", symbols(4)),
            DimensionSpec::numerical("x"),
            DimensionSpec::numerical("y"),
        ],
        edge_dims: if edge_attributes {
            vec![
                DimensionSpec::categorical("bond", symbols(3)),
                DimensionSpec::numerical("w"),
            ]
        } else {
            Vec::new()
        },
    }
}

fn node_attrs(rng: &mut ChaCha8Rng) -> AttributeVector {
    AttributeVector::new(vec![
        AttributeValue::Symbol(rng.gen_range(0..4)),
        AttributeValue::Real(rng.gen_range(-5.0..5.0)),
        AttributeValue::Real((rng.gen_range(0..20) as f64) * 0.5),
    ])
}

fn edge_attrs(rng: &mut ChaCha8Rng) -> AttributeVector {
    AttributeVector::new(vec![
        AttributeValue::Symbol(rng.gen_range(0..3)),
        AttributeValue::Real(rng.gen_range(0.0..2.0)),
    ])
}

pub fn random_graph(rng: &mut ChaCha8Rng, id: usize, spec: &SynthSpec) -> AttributedGraph {
    let n = rng.gen_range(spec.min_nodes..=spec.max_nodes);
    let nodes = (0..n).map(|_| node_attrs(rng)).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(spec.density) {
                edges.push((u, v));
            }
        }
    }
    let attrs = spec
        .edge_attributes
        .then(|| edges.iter().map(|_| edge_attrs(rng)).collect());
    let label = rng.gen_range(0..spec.classes.max(1));
    AttributedGraph::new(id, label, nodes, &edges, attrs).expect("generated graph is valid")
}

/// A dataset of random graphs with ranges computed.
pub fn random_dataset(spec: &SynthSpec, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs: Vec<_> = (0..spec.graphs).map(|i| random_graph(&mut rng, i, spec)).collect();
    // Make sure every class id occurs.
    for (c, g) in graphs.iter_mut().enumerate().take(spec.classes) {
        *g = AttributedGraph::new(
            g.graph_id(),
            c,
            g.node_attrs().to_vec(),
            g.edges(),
            g.edge_attrs().map(<[_]>::to_vec),
        )
        .expect("relabelled graph is valid");
    }
    compute_ranges(Dataset::from_graphs(
        format!("synthetic-{seed}"),
        graphs,
        mixed_schema(spec.edge_attributes),
    ))
}

/// A uniformly random permutation of `0..n`.
pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}
