//! Gower partial similarities, their exponential transform, and the averaged
//! attribute similarity used for node pairs and edge pairs.
//!
//! For one dimension the partial similarity `s` is `1 - |a - b| / range` on
//! numerical data and the equality indicator on categorical data. The
//! transform `exp(-gamma * (1 - s))` turns it into a positive definite
//! function; averaging over dimensions keeps that property.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeValue, AttributeVector, DimensionKind, DimensionSpec};

pub const DEFAULT_GAMMA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    gamma: f64,
}

impl SimilarityParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidGamma(gamma));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self { gamma: DEFAULT_GAMMA }
    }
}

/// Numerical partial similarity with the distance clamped to the range.
/// A zero-width range degenerates to the exact-match indicator.
fn numerical_similarity(a: f64, b: f64, width: f64) -> f64 {
    if width > 0.0 {
        1.0 - ((a - b).abs() / width).min(1.0)
    } else if a == b {
        1.0
    } else {
        0.0
    }
}

/// Gower partial similarity of two values of one dimension, in `[0, 1]`.
pub fn partial_similarity(dim: &DimensionSpec, a: AttributeValue, b: AttributeValue) -> Result<f64> {
    match (dim.kind, a, b) {
        (DimensionKind::Categorical, AttributeValue::Symbol(x), AttributeValue::Symbol(y)) => {
            Ok(if x == y { 1.0 } else { 0.0 })
        }
        (DimensionKind::Numerical, AttributeValue::Real(x), AttributeValue::Real(y)) => {
            let width = dim
                .range_width()
                .ok_or_else(|| Error::UnconfiguredRange(dim.name.clone()))?;
            Ok(numerical_similarity(x, y, width))
        }
        _ => Err(Error::SchemaMismatch(format!(
            "value kinds do not match dimension `{}`",
            dim.name
        ))),
    }
}

/// `exp(-gamma * (1 - s))`.
pub fn exp_transform(s: f64, params: &SimilarityParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(s));
    }
    Ok((-params.gamma * (1.0 - s)).exp())
}

/// Mean of the transformed partial similarities over all dimensions.
pub fn element_similarity(
    dims: &[DimensionSpec],
    x: &AttributeVector,
    y: &AttributeVector,
    params: &SimilarityParams,
) -> Result<f64> {
    if dims.is_empty() {
        return Err(Error::SchemaMismatch("no attribute dimensions".into()));
    }
    for v in [x, y] {
        v.conforms_to(dims).map_err(Error::SchemaMismatch)?;
    }
    Ok(ElementSimilarity::new(dims, params)?.eval(x, y))
}

#[derive(Clone, Copy, Debug)]
enum Term {
    Categorical { mismatch: f64 },
    Numerical { width: f64 },
}

/// [`element_similarity`] with the per-dimension setup hoisted out: ranges
/// resolved and the categorical mismatch value precomputed. Inputs are
/// assumed to conform to the schema it was built from.
///
/// An empty dimension list makes every pair similarity 1.
#[derive(Clone, Debug)]
pub struct ElementSimilarity {
    gamma: f64,
    terms: Vec<Term>,
}

impl ElementSimilarity {
    pub fn new(dims: &[DimensionSpec], params: &SimilarityParams) -> Result<Self> {
        let gamma = params.gamma;
        let terms = dims
            .iter()
            .map(|dim| match dim.kind {
                DimensionKind::Categorical => Ok(Term::Categorical {
                    mismatch: (-gamma * (1.0 - 0.0)).exp(),
                }),
                DimensionKind::Numerical => dim
                    .range_width()
                    .map(|width| Term::Numerical { width })
                    .ok_or_else(|| Error::UnconfiguredRange(dim.name.clone())),
            })
            .collect::<Result<_>>()?;
        Ok(Self { gamma, terms })
    }

    pub fn dims(&self) -> usize {
        self.terms.len()
    }

    pub fn eval(&self, x: &AttributeVector, y: &AttributeVector) -> f64 {
        if self.terms.is_empty() {
            return 1.0;
        }
        let mut sum = 0.0;
        for ((term, a), b) in self.terms.iter().zip(x.values()).zip(y.values()) {
            sum += match (*term, *a, *b) {
                (Term::Categorical { mismatch }, AttributeValue::Symbol(p), AttributeValue::Symbol(q)) => {
                    if p == q {
                        1.0
                    } else {
                        mismatch
                    }
                }
                (Term::Numerical { width }, AttributeValue::Real(p), AttributeValue::Real(q)) => {
                    (-self.gamma * (1.0 - numerical_similarity(p, q, width))).exp()
                }
                _ => unreachable!("attribute vector does not conform to schema"),
            };
        }
        sum / self.terms.len() as f64
    }
}
