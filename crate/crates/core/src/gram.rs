//! Gram matrices over a dataset: parallel computation, cosine normalization,
//! spectral PSD check, and the `NASK-GRAM v1` text format.
//!
//! Every upper-triangle entry is computed by exactly one task with a fixed
//! summation order, so the result does not depend on the thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::expansion::{depth_increments, families, DEFAULT_DEPTH};
use crate::similarity::SimilarityParams;
use crate::star::{EdgeElements, KernelContext, Summation};

pub const GRAM_HEADER: &str = "NASK-GRAM v1";
pub const DEFAULT_PSD_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMeta {
    pub dataset_digest: String,
    pub gamma: f64,
    #[serde(rename = "H")]
    pub depth: usize,
    pub tau: f64,
    pub normalize: bool,
    pub edge_elements: EdgeElements,
    pub version: String,
}

impl Default for GramMeta {
    fn default() -> Self {
        Self {
            dataset_digest: String::new(),
            gamma: crate::similarity::DEFAULT_GAMMA,
            depth: DEFAULT_DEPTH,
            tau: 0.0,
            normalize: false,
            edge_elements: EdgeElements::Auto,
            version: crate::VERSION.to_string(),
        }
    }
}

/// Symmetric kernel matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    n: usize,
    values: Vec<f64>,
    pub meta: GramMeta,
}

impl GramMatrix {
    /// Wraps row-major values; they must form an exactly symmetric `n × n`
    /// matrix.
    pub fn from_values(n: usize, values: Vec<f64>, meta: GramMeta) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::GramDimension(format!("{} values for a {n}x{n} matrix", values.len())));
        }
        for i in 0..n {
            for j in 0..i {
                if values[i * n + j].to_bits() != values[j * n + i].to_bits() {
                    return Err(Error::InvalidGram(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
                }
            }
        }
        Ok(Self { n, values, meta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Row-major `rows × cols` block.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Vec<f64> {
        rows.iter()
            .flat_map(|&i| cols.iter().map(move |&j| self.get(i, j)))
            .collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|x| x * c).collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for x in &self.values {
            h.update(x.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Kernel settings for a Gram computation.
#[derive(Clone, Debug)]
pub struct GramConfig {
    pub params: SimilarityParams,
    pub depth: usize,
    pub tau: f64,
    pub edge_elements: EdgeElements,
    pub normalize: bool,
    pub summation: Summation,
}

impl Default for GramConfig {
    fn default() -> Self {
        Self {
            params: SimilarityParams::default(),
            depth: DEFAULT_DEPTH,
            tau: 0.0,
            edge_elements: EdgeElements::Auto,
            normalize: false,
            summation: Summation::Plain,
        }
    }
}

impl GramConfig {
    fn meta(&self, ds: &Dataset, depth: usize) -> GramMeta {
        GramMeta {
            dataset_digest: ds.digest.clone(),
            gamma: self.params.gamma(),
            depth,
            tau: self.tau,
            normalize: false,
            edge_elements: self.edge_elements,
            version: crate::VERSION.to_string(),
        }
    }
}

/// Gram matrix of `ds` at depth `cfg.depth`. Numerical ranges must already
/// be computed.
pub fn compute_gram(ds: &Dataset, cfg: &GramConfig) -> Result<GramMatrix> {
    Ok(compute_gram_depths(ds, cfg)?.pop().expect("depth is at least 1"))
}

/// Gram matrices for every depth `1..=cfg.depth` from one pass: the depth-`H`
/// matrix is the running sum of the first `H` per-depth increments.
pub fn compute_gram_depths(ds: &Dataset, cfg: &GramConfig) -> Result<Vec<GramMatrix>> {
    if cfg.depth == 0 {
        return Err(Error::Config("expansion depth must be at least 1".into()));
    }
    let ctx = KernelContext::new(&ds.schema, cfg.params, cfg.edge_elements)?
        .with_pruning(cfg.tau)?
        .with_summation(cfg.summation);
    for (i, g) in ds.graphs.iter().enumerate() {
        ctx.check_graph(g).map_err(|e| Error::GramEntry {
            i,
            j: i,
            source: Box::new(e),
        })?;
    }

    let cache = ds
        .graphs
        .par_iter()
        .map(|g| families(g, cfg.depth.min(g.num_nodes().max(1))))
        .collect::<Result<Vec<_>>>()?;

    let n = ds.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let increments: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| depth_increments(&ds.graphs[i], &cache[i], &ds.graphs[j], &cache[j], &ctx))
        .collect();

    let mut out = Vec::with_capacity(cfg.depth);
    for depth in 1..=cfg.depth {
        let mut values = vec![0.0; n * n];
        for (&(i, j), terms) in pairs.iter().zip(&increments) {
            let k = terms[..depth.min(terms.len())]
                .iter()
                .fold(0.0, |acc, x| acc + x);
            values[i * n + j] = k;
            values[j * n + i] = k;
        }
        let gram = GramMatrix {
            n,
            values,
            meta: cfg.meta(ds, depth),
        };
        out.push(if cfg.normalize { normalize_gram(&gram)? } else { gram });
    }
    Ok(out)
}

/// Cosine normalization `K[i][j] / sqrt(K[i][i] K[j][j])`.
pub fn normalize_gram(k: &GramMatrix) -> Result<GramMatrix> {
    let diag = k.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::InvalidGram(format!("diagonal entry {i} is {}", diag[i])));
    }
    let n = k.n;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = k.get(i, j) / (diag[i] * diag[j]).sqrt();
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    let mut meta = k.meta.clone();
    meta.normalize = true;
    Ok(GramMatrix { n, values, meta })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PsdVerdict {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub tol: f64,
}

impl PsdVerdict {
    /// `min_eig >= -tol * max(1, max_eig)`.
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= -self.tol * self.max_eigenvalue.max(1.0)
    }
}

/// Symmetric eigendecomposition in double precision.
pub fn check_psd(k: &GramMatrix, tol: f64) -> Result<PsdVerdict> {
    let n = k.n;
    if n == 0 {
        return Err(Error::InvalidGram("empty matrix".into()));
    }
    let m = DMatrix::from_row_slice(n, n, &k.values);
    let eig = m
        .try_symmetric_eigen(f64::EPSILON, 10_000 * n)
        .ok_or_else(|| Error::EigenNonConvergence(k.digest()))?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in eig.eigenvalues.iter() {
        if !x.is_finite() {
            return Err(Error::EigenNonConvergence(k.digest()));
        }
        lo = lo.min(x);
        hi = hi.max(x);
    }
    Ok(PsdVerdict {
        min_eigenvalue: lo,
        max_eigenvalue: hi,
        tol,
    })
}

pub fn render_gram(k: &GramMatrix) -> Result<String> {
    let mut out = String::with_capacity(k.n * k.n * 24 + 256);
    out.push_str(GRAM_HEADER);
    out.push('\n');
    out.push_str(&serde_json::to_string(&k.meta)?);
    out.push('\n');
    writeln!(out, "{}", k.n).unwrap();
    for i in 0..k.n {
        for (j, x) in k.row(i).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{x:.16e}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_gram(text: &str) -> Result<GramMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::GramParse {
            line: 0,
            message: format!("file ends before {what}"),
        })
    };
    let (_, header) = next("the header")?;
    if header.trim() != GRAM_HEADER {
        return match header.trim().strip_prefix("NASK-GRAM ") {
            Some(version) => Err(Error::GramVersion(version.to_string())),
            None => Err(Error::GramParse {
                line: 1,
                message: format!("expected `{GRAM_HEADER}`"),
            }),
        };
    }
    let (line, json) = next("the metadata")?;
    let meta: GramMeta = serde_json::from_str(json).map_err(|e| Error::GramParse {
        line,
        message: format!("metadata: {e}"),
    })?;
    let (line, count) = next("the dimension")?;
    let n: usize = count.trim().parse().map_err(|_| Error::GramParse {
        line,
        message: format!("expected a dimension, found `{count}`"),
    })?;
    let mut values = Vec::with_capacity(n * n);
    for r in 0..n {
        let (line, row) = next("all rows").map_err(|_| Error::GramParse {
            line: 4 + r,
            message: format!("truncated: expected {n} rows, found {r}"),
        })?;
        let before = values.len();
        for token in row.split_whitespace() {
            values.push(token.parse::<f64>().map_err(|_| Error::GramParse {
                line,
                message: format!("invalid number `{token}`"),
            })?);
        }
        if values.len() - before != n {
            return Err(Error::GramDimension(format!(
                "line {line} has {} values, expected {n}",
                values.len() - before
            )));
        }
    }
    if let Some((line, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::GramDimension(format!(
            "line {line}: unexpected content after {n} rows: `{}`",
            extra.chars().take(32).collect::<String>()
        )));
    }
    GramMatrix::from_values(n, values, meta)
}

pub fn export_gram(k: &GramMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render_gram(k)?)?;
    Ok(())
}

pub fn import_gram(path: impl AsRef<Path>) -> Result<GramMatrix> {
    parse_gram(&fs::read_to_string(path)?)
}
