//! Inputs shared by the benchmarks.

use std::path::PathBuf;

use nask::synth::{random_dataset, SynthSpec};
use nask::{compute_ranges, load_tu_dataset, Dataset};

/// The vendored MUTAG dataset with ranges computed.
pub fn mutag() -> Dataset {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/MUTAG");
    compute_ranges(load_tu_dataset(dir, "MUTAG").expect("MUTAG is vendored under data/"))
}

/// Random graphs with node and edge attributes.
pub fn synthetic(graphs: usize, max_nodes: usize) -> Dataset {
    let spec = SynthSpec {
        graphs,
        min_nodes: 2,
        max_nodes,
        density: 0.25,
        edge_attributes: true,
        classes: 2,
    };
    random_dataset(&spec, 7)
}
