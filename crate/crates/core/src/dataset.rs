//! Reading and writing graph-classification datasets in the TU Dortmund
//! text layout.
//!
//! A dataset `NAME` is a directory holding `NAME_A.txt` (1-indexed directed
//! endpoint pairs), `NAME_graph_indicator.txt` (graph id of every node) and
//! `NAME_graph_labels.txt` (class of every graph), plus the optional
//! `NAME_node_labels.txt`, `NAME_node_attributes.txt`, `NAME_edge_labels.txt`
//! and `NAME_edge_attributes.txt`. Label columns become categorical
//! dimensions and attribute columns numerical ones, categorical first.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{
    AttributeSchema, AttributeValue, AttributeVector, AttributedGraph, DimensionKind,
    DimensionSpec,
};

#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<AttributedGraph>,
    /// Contiguous 0-based class id per graph.
    pub labels: Vec<usize>,
    /// Original class value for every class id, ascending.
    pub class_values: Vec<i64>,
    pub schema: AttributeSchema,
    /// SHA-256 over the source files, or over the canonical in-memory form
    /// for datasets built in code.
    pub digest: String,
}

const FILES: [&str; 7] = [
    "A",
    "graph_indicator",
    "graph_labels",
    "node_labels",
    "node_attributes",
    "edge_labels",
    "edge_attributes",
];

struct Table {
    file: String,
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn read(path: &Path, hasher: &mut Sha256) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        hasher.update(path.file_name().unwrap().to_string_lossy().as_bytes());
        hasher.update((text.len() as u64).to_le_bytes());
        hasher.update(text.as_bytes());
        let rows = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.split(',').map(|f| f.trim().to_string()).collect()))
            .collect();
        Ok(Self {
            file: path.file_name().unwrap().to_string_lossy().into_owned(),
            rows,
        })
    }

    fn width(&self) -> Result<usize> {
        let width = self.rows.first().map_or(0, |(_, r)| r.len());
        for (line, row) in &self.rows {
            if row.len() != width {
                return Err(self.parse_error(
                    *line,
                    format!("expected {width} fields, found {}", row.len()),
                ));
            }
        }
        Ok(width)
    }

    fn expect_rows(&self, expected: usize, what: &str) -> Result<()> {
        if self.rows.len() != expected {
            let line = self.rows.last().map_or(0, |(l, _)| *l);
            return Err(self.parse_error(
                line,
                format!("expected {expected} rows ({what}), found {}", self.rows.len()),
            ));
        }
        Ok(())
    }

    fn parse_error(&self, line: usize, message: String) -> Error {
        Error::Parse {
            file: self.file.clone(),
            line,
            message,
        }
    }

    fn int(&self, line: usize, token: &str) -> Result<i64> {
        token
            .parse()
            .map_err(|_| self.parse_error(line, format!("expected an integer, found `{token}`")))
    }

    fn index(&self, line: usize, token: &str, count: usize) -> Result<usize> {
        let value = self.int(line, token)?;
        if value < 1 || value as usize > count {
            return Err(self.parse_error(line, format!("index {value} outside 1..={count}")));
        }
        Ok(value as usize - 1)
    }

    fn real(&self, line: usize, token: &str) -> Result<f64> {
        let value: f64 = token
            .parse()
            .map_err(|_| self.parse_error(line, format!("expected a number, found `{token}`")))?;
        if !value.is_finite() {
            return Err(Error::InvalidValue {
                file: self.file.clone(),
                line,
                value: token.to_string(),
            });
        }
        Ok(value)
    }

    fn int_columns(&self) -> Result<Vec<Vec<i64>>> {
        self.rows
            .iter()
            .map(|(line, row)| row.iter().map(|t| self.int(*line, t)).collect())
            .collect()
    }

    fn real_columns(&self) -> Result<Vec<Vec<f64>>> {
        self.rows
            .iter()
            .map(|(line, row)| row.iter().map(|t| self.real(*line, t)).collect())
            .collect()
    }
}

/// Interns every label column to dense symbol ids in ascending value order.
fn intern_columns(rows: &[Vec<i64>], prefix: &str) -> (Vec<DimensionSpec>, Vec<Vec<u32>>) {
    let width = rows.first().map_or(0, Vec::len);
    let mut dims = Vec::with_capacity(width);
    let mut lookups = Vec::with_capacity(width);
    for c in 0..width {
        let values: BTreeSet<i64> = rows.iter().map(|r| r[c]).collect();
        let lookup: HashMap<i64, u32> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u32))
            .collect();
        dims.push(DimensionSpec::categorical(
            format!("{prefix}_label_{c}"),
            values.iter().map(i64::to_string).collect(),
        ));
        lookups.push(lookup);
    }
    let symbols = rows
        .iter()
        .map(|r| r.iter().zip(&lookups).map(|(v, l)| l[v]).collect())
        .collect();
    (dims, symbols)
}

fn assemble(symbols: Option<&Vec<u32>>, reals: Option<&Vec<f64>>) -> AttributeVector {
    let mut values = Vec::new();
    if let Some(s) = symbols {
        values.extend(s.iter().map(|&x| AttributeValue::Symbol(x)));
    }
    if let Some(r) = reals {
        values.extend(r.iter().map(|&x| AttributeValue::Real(x)));
    }
    AttributeVector::new(values)
}

/// Loads `dir/{name}_*.txt`. Ranges of numerical dimensions are left unset;
/// see [`compute_ranges`].
pub fn load_tu_dataset(dir: impl AsRef<Path>, name: &str) -> Result<Dataset> {
    let dir = dir.as_ref();
    let mut hasher = Sha256::new();
    let mut tables: BTreeMap<&str, Table> = BTreeMap::new();
    for (i, suffix) in FILES.iter().enumerate() {
        let path = dir.join(format!("{name}_{suffix}.txt"));
        if path.is_file() {
            tables.insert(suffix, Table::read(&path, &mut hasher)?);
        } else if i < 3 {
            return Err(Error::MissingFile(path));
        }
    }
    let digest = hex::encode(hasher.finalize());

    let indicator = &tables["graph_indicator"];
    let graph_labels = &tables["graph_labels"];
    let num_graphs = graph_labels.rows.len();
    let num_nodes = indicator.rows.len();
    if num_graphs == 0 {
        return Err(Error::EmptyDataset);
    }

    let mut graph_of = Vec::with_capacity(num_nodes);
    let mut local = Vec::with_capacity(num_nodes);
    let mut sizes = vec![0usize; num_graphs];
    for (line, row) in &indicator.rows {
        let g = indicator.index(*line, &row[0], num_graphs)?;
        graph_of.push(g);
        local.push(sizes[g]);
        sizes[g] += 1;
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Invariant(format!("graph {} has no nodes", g + 1)));
    }

    let class_raw: Vec<i64> = graph_labels
        .rows
        .iter()
        .map(|(line, row)| graph_labels.int(*line, &row[0]))
        .collect::<Result<_>>()?;
    let class_values: Vec<i64> = class_raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let labels: Vec<usize> = class_raw
        .iter()
        .map(|v| class_values.binary_search(v).unwrap())
        .collect();

    let mut node_dims = Vec::new();
    let node_symbols = match tables.get("node_labels") {
        Some(t) => {
            t.expect_rows(num_nodes, "one per node")?;
            t.width()?;
            let (dims, symbols) = intern_columns(&t.int_columns()?, "node");
            node_dims.extend(dims);
            Some(symbols)
        }
        None => None,
    };
    let node_reals = match tables.get("node_attributes") {
        Some(t) => {
            t.expect_rows(num_nodes, "one per node")?;
            let width = t.width()?;
            node_dims.extend((0..width).map(|c| DimensionSpec::numerical(format!("node_attr_{c}"))));
            Some(t.real_columns()?)
        }
        None => None,
    };

    let adjacency = &tables["A"];
    let num_rows = adjacency.rows.len();
    let mut edge_dims = Vec::new();
    let edge_symbols = match tables.get("edge_labels") {
        Some(t) => {
            t.expect_rows(num_rows, "one per adjacency row")?;
            t.width()?;
            let (dims, symbols) = intern_columns(&t.int_columns()?, "edge");
            edge_dims.extend(dims);
            Some(symbols)
        }
        None => None,
    };
    let edge_reals = match tables.get("edge_attributes") {
        Some(t) => {
            t.expect_rows(num_rows, "one per adjacency row")?;
            let width = t.width()?;
            edge_dims.extend((0..width).map(|c| DimensionSpec::numerical(format!("edge_attr_{c}"))));
            Some(t.real_columns()?)
        }
        None => None,
    };
    let has_edge_attrs = !edge_dims.is_empty();

    // Merge directed rows into canonical undirected edges per graph.
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    let mut edge_values: Vec<Vec<AttributeVector>> = vec![Vec::new(); num_graphs];
    let mut seen: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for (r, (line, row)) in adjacency.rows.iter().enumerate() {
        if row.len() != 2 {
            return Err(adjacency.parse_error(*line, format!("expected 2 fields, found {}", row.len())));
        }
        let u = adjacency.index(*line, &row[0], num_nodes)?;
        let v = adjacency.index(*line, &row[1], num_nodes)?;
        if u == v {
            return Err(adjacency.parse_error(*line, format!("self-loop on node {}", u + 1)));
        }
        let (gu, gv) = (graph_of[u], graph_of[v]);
        if gu != gv {
            return Err(Error::CrossGraphEdge {
                u: u + 1,
                v: v + 1,
                graph_u: gu + 1,
                graph_v: gv + 1,
            });
        }
        let value = assemble(
            edge_symbols.as_ref().map(|s| &s[r]),
            edge_reals.as_ref().map(|s| &s[r]),
        );
        let key = (u.min(v), u.max(v));
        match seen.get(&key) {
            Some(&(g, slot)) => {
                if has_edge_attrs && edge_values[g][slot] != value {
                    return Err(Error::EdgeAttributeConflict { u: key.0 + 1, v: key.1 + 1 });
                }
            }
            None => {
                seen.insert(key, (gu, edges[gu].len()));
                edges[gu].push((local[u], local[v]));
                edge_values[gu].push(value);
            }
        }
    }

    let mut node_values: Vec<Vec<AttributeVector>> =
        sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    for node in 0..num_nodes {
        node_values[graph_of[node]].push(assemble(
            node_symbols.as_ref().map(|s| &s[node]),
            node_reals.as_ref().map(|s| &s[node]),
        ));
    }

    let graphs = node_values
        .into_iter()
        .zip(edges)
        .zip(edge_values)
        .enumerate()
        .map(|(g, ((nodes, edge_list), values))| {
            AttributedGraph::new(
                g,
                labels[g],
                nodes,
                &edge_list,
                has_edge_attrs.then_some(values),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        name: name.to_string(),
        graphs,
        labels,
        class_values,
        schema: AttributeSchema { node_dims, edge_dims },
        digest,
    })
}

/// Writes `ds` in the TU layout. Every undirected edge is written in both
/// directions, smaller endpoint first.
pub fn write_tu_dataset(ds: &Dataset, dir: impl AsRef<Path>, name: &str) -> Result<()> {
    use std::fmt::Write as _;
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut files: BTreeMap<&str, String> = BTreeMap::new();
    let split = |dims: &[DimensionSpec]| dims.iter().filter(|d| d.kind == DimensionKind::Categorical).count();
    let node_cats = split(&ds.schema.node_dims);
    let edge_cats = split(&ds.schema.edge_dims);

    let render = |values: &[AttributeValue], dims: &[DimensionSpec]| -> String {
        values
            .iter()
            .zip(dims)
            .map(|(v, d)| match v {
                AttributeValue::Symbol(s) => d.categories[*s as usize].clone(),
                AttributeValue::Real(x) => x.to_string(),
            })
            .collect::<Vec<_>>()
            .join(", ")
    };

    let mut offset = 0;
    for (g, graph) in ds.graphs.iter().enumerate() {
        for attrs in graph.node_attrs() {
            writeln!(files.entry("graph_indicator").or_default(), "{}", g + 1).unwrap();
            let values = attrs.values();
            if node_cats > 0 {
                let line = render(&values[..node_cats], &ds.schema.node_dims[..node_cats]);
                writeln!(files.entry("node_labels").or_default(), "{line}").unwrap();
            }
            if values.len() > node_cats {
                let line = render(&values[node_cats..], &ds.schema.node_dims[node_cats..]);
                writeln!(files.entry("node_attributes").or_default(), "{line}").unwrap();
            }
        }
        for (e, &(u, v)) in graph.edges().iter().enumerate() {
            for (a, b) in [(u, v), (v, u)] {
                writeln!(files.entry("A").or_default(), "{}, {}", a + offset + 1, b + offset + 1).unwrap();
                if let Some(attrs) = graph.edge_attrs() {
                    let values = attrs[e].values();
                    if edge_cats > 0 {
                        let line = render(&values[..edge_cats], &ds.schema.edge_dims[..edge_cats]);
                        writeln!(files.entry("edge_labels").or_default(), "{line}").unwrap();
                    }
                    if values.len() > edge_cats {
                        let line = render(&values[edge_cats..], &ds.schema.edge_dims[edge_cats..]);
                        writeln!(files.entry("edge_attributes").or_default(), "{line}").unwrap();
                    }
                }
            }
        }
        offset += graph.num_nodes();
        writeln!(
            files.entry("graph_labels").or_default(),
            "{}",
            ds.class_values[ds.labels[g]]
        )
        .unwrap();
    }
    files.entry("A").or_default();
    for (suffix, contents) in files {
        fs::write(dir.join(format!("{name}_{suffix}.txt")), contents)?;
    }
    Ok(())
}

impl Dataset {
    /// Builds a dataset from graphs constructed in code. Class ids are the
    /// graph labels; the digest covers the canonical in-memory form.
    pub fn from_graphs(
        name: impl Into<String>,
        graphs: Vec<AttributedGraph>,
        schema: AttributeSchema,
    ) -> Self {
        let num_classes = graphs.iter().map(|g| g.label() + 1).max().unwrap_or(0);
        let labels = graphs.iter().map(AttributedGraph::label).collect();
        let mut ds = Self {
            name: name.into(),
            graphs,
            labels,
            class_values: (0..num_classes as i64).collect(),
            schema,
            digest: String::new(),
        };
        ds.digest = ds.canonical_digest();
        ds
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_values.len()
    }

    /// SHA-256 over schema, structure, attributes and labels.
    pub fn canonical_digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.schema).expect("schema serializes"));
        let put_attrs = |h: &mut Sha256, a: &AttributeVector| {
            for v in a.values() {
                match v {
                    AttributeValue::Real(x) => {
                        h.update([0u8]);
                        h.update(x.to_bits().to_le_bytes());
                    }
                    AttributeValue::Symbol(s) => {
                        h.update([1u8]);
                        h.update(s.to_le_bytes());
                    }
                }
            }
        };
        for (g, label) in self.graphs.iter().zip(&self.labels) {
            h.update((g.num_nodes() as u64).to_le_bytes());
            h.update((self.class_values[*label]).to_le_bytes());
            for a in g.node_attrs() {
                put_attrs(&mut h, a);
            }
            for &(u, v) in g.edges() {
                h.update((u as u64).to_le_bytes());
                h.update((v as u64).to_le_bytes());
            }
            for a in g.edge_attrs().unwrap_or_default() {
                put_attrs(&mut h, a);
            }
        }
        hex::encode(h.finalize())
    }

    /// Restricts the dataset to `indices`, keeping schema, class ids and the
    /// parent digest suffixed with the selection.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut h = Sha256::new();
        h.update(self.digest.as_bytes());
        for &i in indices {
            h.update((i as u64).to_le_bytes());
        }
        Self {
            name: self.name.clone(),
            graphs: indices.iter().map(|&i| self.graphs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_values: self.class_values.clone(),
            schema: self.schema.clone(),
            digest: hex::encode(h.finalize()),
        }
    }
}

type Ranges = Vec<Option<(f64, f64)>>;

fn scan_ranges<'a>(
    dims: &[DimensionSpec],
    vectors: impl Iterator<Item = &'a AttributeVector>,
) -> Ranges {
    let mut ranges: Ranges = vec![None; dims.len()];
    for attrs in vectors {
        for (slot, value) in ranges.iter_mut().zip(attrs.values()) {
            if let AttributeValue::Real(x) = *value {
                *slot = Some(match *slot {
                    Some((lo, hi)) => (lo.min(x), hi.max(x)),
                    None => (x, x),
                });
            }
        }
    }
    ranges
}

fn apply_ranges(dims: &mut [DimensionSpec], ranges: Ranges) {
    for (dim, range) in dims.iter_mut().zip(ranges) {
        if dim.kind == DimensionKind::Numerical {
            dim.range = range;
        }
    }
}

/// Sets the `(min, max)` of every numerical dimension from all nodes (resp.
/// edges) of all graphs.
pub fn compute_ranges(ds: Dataset) -> Dataset {
    let all: Vec<usize> = (0..ds.len()).collect();
    compute_ranges_over(ds, &all)
}

/// Like [`compute_ranges`] but only scans the graphs at `indices`.
pub fn compute_ranges_over(mut ds: Dataset, indices: &[usize]) -> Dataset {
    let node = scan_ranges(
        &ds.schema.node_dims,
        indices.iter().flat_map(|&i| ds.graphs[i].node_attrs()),
    );
    let edge = scan_ranges(
        &ds.schema.edge_dims,
        indices
            .iter()
            .flat_map(|&i| ds.graphs[i].edge_attrs().unwrap_or_default()),
    );
    apply_ranges(&mut ds.schema.node_dims, node);
    apply_ranges(&mut ds.schema.edge_dims, edge);
    ds
}

#[derive(Clone, Debug, Serialize)]
pub struct SchemaSummary {
    pub node_categorical: usize,
    pub node_numerical: usize,
    pub edge_categorical: usize,
    pub edge_numerical: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DatasetReport {
    pub name: String,
    pub num_graphs: usize,
    pub num_classes: usize,
    pub class_counts: Vec<usize>,
    pub total_nodes: usize,
    pub total_edges: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub mean_nodes: f64,
    pub mean_degree: f64,
    pub max_degree: usize,
    /// `degree_histogram[d]` counts nodes of degree `d`.
    pub degree_histogram: Vec<usize>,
    pub schema: SchemaSummary,
}

impl fmt::Display for DatasetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.schema;
        writeln!(f, "{}: {} graphs, {} classes", self.name, self.num_graphs, self.num_classes)?;
        writeln!(f, "class counts: {:?}", self.class_counts)?;
        writeln!(
            f,
            "nodes: {} total, {}..{} per graph, mean {:.2}",
            self.total_nodes, self.min_nodes, self.max_nodes, self.mean_nodes
        )?;
        writeln!(f, "edges: {} total", self.total_edges)?;
        writeln!(f, "degree: mean {:.3}, max {}", self.mean_degree, self.max_degree)?;
        writeln!(
            f,
            "node schema: {} dims ({} categorical + {} numerical)",
            s.node_categorical + s.node_numerical,
            s.node_categorical,
            s.node_numerical
        )?;
        write!(
            f,
            "edge schema: {} dims ({} categorical + {} numerical)",
            s.edge_categorical + s.edge_numerical,
            s.edge_categorical,
            s.edge_numerical
        )
    }
}

/// Checks every graph against the schema and summarises the dataset.
pub fn validate_dataset(ds: &Dataset) -> Result<DatasetReport> {
    if ds.graphs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut problems = Vec::new();
    if ds.labels.len() != ds.graphs.len() {
        problems.push(format!("{} labels for {} graphs", ds.labels.len(), ds.graphs.len()));
    }
    let mut class_counts = vec![0usize; ds.num_classes()];
    for (i, &label) in ds.labels.iter().enumerate() {
        match class_counts.get_mut(label) {
            Some(c) => *c += 1,
            None => problems.push(format!("graph {i}: class id {label} out of range")),
        }
        if ds.graphs.get(i).is_some_and(|g| g.label() != label) {
            problems.push(format!("graph {i}: stored label disagrees with dataset label"));
        }
    }
    if let Some(c) = class_counts.iter().position(|&c| c == 0) {
        problems.push(format!("class id {c} has no graphs"));
    }
    for g in &ds.graphs {
        if g.num_nodes() == 0 {
            problems.push(format!("graph {}: no nodes", g.graph_id()));
        }
        problems.extend(g.check_invariants(Some(&ds.schema)));
    }
    if !problems.is_empty() {
        return Err(Error::InvalidDataset(problems));
    }

    let mut degree_histogram = Vec::new();
    let mut degree_sum = 0usize;
    for g in &ds.graphs {
        for v in 0..g.num_nodes() {
            let d = g.degree(v);
            if degree_histogram.len() <= d {
                degree_histogram.resize(d + 1, 0);
            }
            degree_histogram[d] += 1;
            degree_sum += d;
        }
    }
    let total_nodes: usize = ds.graphs.iter().map(AttributedGraph::num_nodes).sum();
    let count = |dims: &[DimensionSpec], kind| dims.iter().filter(|d| d.kind == kind).count();
    Ok(DatasetReport {
        name: ds.name.clone(),
        num_graphs: ds.len(),
        num_classes: ds.num_classes(),
        class_counts,
        total_nodes,
        total_edges: ds.graphs.iter().map(AttributedGraph::num_edges).sum(),
        min_nodes: ds.graphs.iter().map(AttributedGraph::num_nodes).min().unwrap_or(0),
        max_nodes: ds.graphs.iter().map(AttributedGraph::num_nodes).max().unwrap_or(0),
        mean_nodes: total_nodes as f64 / ds.len() as f64,
        mean_degree: degree_sum as f64 / total_nodes.max(1) as f64,
        max_degree: degree_histogram.len().saturating_sub(1),
        degree_histogram,
        schema: SchemaSummary {
            node_categorical: count(&ds.schema.node_dims, DimensionKind::Categorical),
            node_numerical: count(&ds.schema.node_dims, DimensionKind::Numerical),
            edge_categorical: count(&ds.schema.edge_dims, DimensionKind::Categorical),
            edge_numerical: count(&ds.schema.edge_dims, DimensionKind::Numerical),
        },
    })
}
