//! Repeated stratified k-fold cross-validation with nested hyperparameter
//! selection over `(gamma, depth, normalize, C)`.
//!
//! Gram matrices are computed once per `(gamma, depth)` on the whole dataset
//! and sub-indexed per fold. Kernel values between two graphs do not depend
//! on the split; only the numerical attribute ranges do, and by default those
//! come from the whole dataset. Reports state which range mode was used.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{compute_ranges_over, Dataset};
use crate::error::{Error, Result};
use crate::gram::{compute_gram_depths, normalize_gram, GramConfig, GramMatrix};
use crate::similarity::SimilarityParams;
use crate::star::EdgeElements;
use crate::svm::{predict_block, train_ovr, KernelBlock, SmoParams};

/// Splits `0..labels.len()` into `k` folds. Within each class the indices
/// are shuffled and dealt round-robin, continuing where the previous class
/// stopped, so per-class counts and fold sizes each differ by at most one.
/// Each fold is sorted ascending.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Config(format!("{k} folds requested for {n} examples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: BTreeSet<usize> = labels.iter().copied().collect();
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for class in classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            log::warn!(
                "class {class} has {} examples for {k} folds; some folds will lack it",
                members.len()
            );
        }
        members.shuffle(&mut rng);
        for i in members {
            folds[slot].push(i);
            slot = (slot + 1) % k;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub gammas: Vec<f64>,
    pub depths: Vec<usize>,
    pub normalize: Vec<bool>,
    pub cs: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            gammas: vec![0.1, 1.0, 10.0],
            depths: vec![1, 2, 3, 4],
            normalize: vec![true, false],
            cs: vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3],
        }
    }
}

impl Grid {
    pub fn single(params: HyperParams) -> Self {
        Self {
            gammas: vec![params.gamma],
            depths: vec![params.depth],
            normalize: vec![params.normalize],
            cs: vec![params.c],
        }
    }

    /// All combinations, gamma outermost and C innermost.
    pub fn combinations(&self) -> Vec<HyperParams> {
        let mut out = Vec::new();
        for &gamma in &self.gammas {
            for &depth in &self.depths {
                for &normalize in &self.normalize {
                    for &c in &self.cs {
                        out.push(HyperParams { gamma, depth, normalize, c });
                    }
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.depths.is_empty() || self.normalize.is_empty() || self.cs.is_empty() {
            return Err(Error::Config("every grid axis needs at least one value".into()));
        }
        for &g in &self.gammas {
            SimilarityParams::new(g)?;
        }
        if self.depths.contains(&0) {
            return Err(Error::Config("depths must be at least 1".into()));
        }
        if let Some(c) = self.cs.iter().find(|&&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::Config(format!("C must be positive, got {c}")));
        }
        Ok(())
    }
}

/// Parses `gamma=0.1,1;depth=1,2;normalize=on,off;C=0.1,1`. Axes left out
/// keep their defaults.
impl FromStr for Grid {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        fn list<T: FromStr>(key: &str, values: &str) -> Result<Vec<T>> {
            values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad value `{v}` for grid axis `{key}`")))
                })
                .collect()
        }
        let mut grid = Grid::default();
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, values) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("grid entry `{part}` is not key=values")))?;
            match key.trim() {
                "gamma" => grid.gammas = list(key, values)?,
                "depth" | "H" => grid.depths = list(key, values)?,
                "C" | "c" => grid.cs = list(key, values)?,
                "normalize" => {
                    grid.normalize = values
                        .split(',')
                        .map(|v| match v.trim() {
                            "on" | "true" => Ok(true),
                            "off" | "false" => Ok(false),
                            other => Err(Error::Config(format!("normalize takes on/off, got `{other}`"))),
                        })
                        .collect::<Result<_>>()?
                }
                other => return Err(Error::Config(format!("unknown grid axis `{other}`"))),
            }
        }
        grid.validate()?;
        Ok(grid)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeMode {
    /// Ranges from the whole dataset; one Gram per configuration.
    #[default]
    Transductive,
    /// Ranges from each outer training portion; Grams recomputed per fold.
    PerFold,
}

#[derive(Clone, Debug)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub inner_folds: usize,
    pub grid: Grid,
    pub edge_elements: EdgeElements,
    pub range_mode: RangeMode,
    pub smo: SmoParams,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            repeats: 10,
            seed: 0,
            inner_folds: 5,
            grid: Grid::default(),
            edge_elements: EdgeElements::Auto,
            range_mode: RangeMode::Transductive,
            smo: SmoParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub gamma: f64,
    pub depth: usize,
    pub normalize: bool,
    pub c: f64,
}

/// One outer split and the inner splits of its training portion, all as
/// dataset indices.
#[derive(Clone, Debug)]
pub struct SplitPlan {
    pub repeat: usize,
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// `(train, validation)` pairs drawn from `train` only.
    pub inner: Vec<(Vec<usize>, Vec<usize>)>,
}

fn repeat_seed(seed: u64, repeat: usize) -> u64 {
    seed.wrapping_add((repeat as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Every outer and inner split the harness will use.
pub fn plan_splits(labels: &[usize], cfg: &CvConfig, with_inner: bool) -> Result<Vec<SplitPlan>> {
    if cfg.repeats == 0 {
        return Err(Error::Config("need at least one repeat".into()));
    }
    let mut plans = Vec::new();
    for repeat in 0..cfg.repeats {
        let seed = repeat_seed(cfg.seed, repeat);
        let folds = stratified_folds(labels, cfg.folds, seed)?;
        for (fold, test) in folds.iter().enumerate() {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(f, _)| f != fold)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let inner = if with_inner {
                let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
                let inner_folds = stratified_folds(&train_labels, cfg.inner_folds, seed ^ (fold as u64 + 1))?;
                (0..inner_folds.len())
                    .map(|v| {
                        let val: Vec<usize> = inner_folds[v].iter().map(|&p| train[p]).collect();
                        let fit: Vec<usize> = inner_folds
                            .iter()
                            .enumerate()
                            .filter(|&(w, _)| w != v)
                            .flat_map(|(_, p)| p.iter().map(|&q| train[q]))
                            .collect::<BTreeSet<_>>()
                            .into_iter()
                            .collect();
                        (fit, val)
                    })
                    .collect()
            } else {
                Vec::new()
            };
            plans.push(SplitPlan {
                repeat,
                fold,
                train,
                test: test.clone(),
                inner,
            });
        }
    }
    Ok(plans)
}

/// Gram matrices keyed by `(gamma, depth, normalize)` for one dataset.
#[derive(Clone, Debug)]
pub struct GramCache {
    digest: String,
    entries: Vec<((f64, usize, bool), GramMatrix)>,
}

impl GramCache {
    pub fn compute(ds: &Dataset, grid: &Grid, edge_elements: EdgeElements) -> Result<Self> {
        let max_depth = *grid.depths.iter().max().expect("grid validated");
        let mut entries = Vec::new();
        for &gamma in &grid.gammas {
            let cfg = GramConfig {
                params: SimilarityParams::new(gamma)?,
                depth: max_depth,
                edge_elements,
                ..GramConfig::default()
            };
            let by_depth = compute_gram_depths(ds, &cfg)?;
            for &depth in &grid.depths {
                let raw = &by_depth[depth - 1];
                for &normalize in &grid.normalize {
                    let gram = if normalize { normalize_gram(raw)? } else { raw.clone() };
                    entries.push(((gamma, depth, normalize), gram));
                }
            }
        }
        Ok(Self {
            digest: ds.digest.clone(),
            entries,
        })
    }

    /// Wraps precomputed matrices; each must carry `ds`'s digest.
    pub fn from_matrices(ds: &Dataset, grams: Vec<GramMatrix>) -> Result<Self> {
        let mut entries = Vec::new();
        for g in grams {
            if g.meta.dataset_digest != ds.digest {
                return Err(Error::DigestMismatch {
                    expected: ds.digest.clone(),
                    found: g.meta.dataset_digest.clone(),
                });
            }
            if g.n() != ds.len() {
                return Err(Error::GramDimension(format!("{} graphs but Gram is {}x{}", ds.len(), g.n(), g.n())));
            }
            entries.push(((g.meta.gamma, g.meta.depth, g.meta.normalize), g));
        }
        Ok(Self {
            digest: ds.digest.clone(),
            entries,
        })
    }

    pub fn get(&self, p: &HyperParams) -> Result<&GramMatrix> {
        self.entries
            .iter()
            .find(|((g, d, n), _)| *g == p.gamma && *d == p.depth && *n == p.normalize)
            .map(|(_, m)| m)
            .ok_or_else(|| {
                Error::Config(format!(
                    "no Gram matrix for gamma={} depth={} normalize={}",
                    p.gamma, p.depth, p.normalize
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub test_size: usize,
    pub accuracy: f64,
    pub selected: HyperParams,
    /// Mean inner validation accuracy of the selected configuration.
    pub validation_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub params: HyperParams,
    /// Outer-fold accuracy when this configuration is fixed, without
    /// selection.
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub gram_seconds: f64,
    pub evaluation_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub dataset: String,
    pub dataset_digest: String,
    pub folds: usize,
    pub repeats: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub edge_elements: EdgeElements,
    pub range_mode: RangeMode,
    pub range_note: String,
    pub grid: Grid,
    /// Nested-selection accuracy: mean and population std over every outer
    /// fold of every repeat.
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub fold_results: Vec<FoldResult>,
    pub configurations: Vec<ConfigResult>,
    pub wall_times: WallTimes,
    pub version: String,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn accuracy(gram: &GramMatrix, labels: &[usize], train: &[usize], test: &[usize], c: f64, smo: &SmoParams) -> Result<f64> {
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let classes: Vec<usize> = train_labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let predicted = if classes.len() < 2 {
        vec![classes[0]; test.len()]
    } else {
        let model = train_ovr(
            &KernelBlock::from_gram(gram, train, train),
            &train_labels,
            &classes,
            &SmoParams { c, ..*smo },
        )?;
        predict_block(&model, &KernelBlock::from_gram(gram, test, train))?
    };
    let correct = predicted
        .iter()
        .zip(test)
        .filter(|(p, &i)| **p == labels[i])
        .count();
    Ok(correct as f64 / test.len() as f64)
}

struct FoldOutcome {
    per_config: Vec<f64>,
    selected: usize,
    validation: f64,
}

fn evaluate_split(
    plan: &SplitPlan,
    labels: &[usize],
    configs: &[HyperParams],
    grams: &GramCache,
    smo: &SmoParams,
) -> Result<FoldOutcome> {
    let mut per_config = Vec::with_capacity(configs.len());
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, p) in configs.iter().enumerate() {
        let gram = grams.get(p)?;
        if configs.len() > 1 {
            let scores = plan
                .inner
                .iter()
                .map(|(fit, val)| accuracy(gram, labels, fit, val, p.c, smo))
                .collect::<Result<Vec<_>>>()?;
            let (score, _) = mean_std(&scores);
            if score > best.0 {
                best = (score, k);
            }
        }
        per_config.push(accuracy(gram, labels, &plan.train, &plan.test, p.c, smo)?);
    }
    Ok(FoldOutcome {
        per_config,
        selected: best.1,
        validation: if configs.len() > 1 { best.0 } else { f64::NAN },
    })
}

/// Runs the full protocol on `ds` (ranges need not be computed beforehand).
pub fn cross_validate(ds: &Dataset, cfg: &CvConfig) -> Result<CvReport> {
    cfg.grid.validate()?;
    let start = Instant::now();
    let configs = cfg.grid.combinations();
    let plans = plan_splits(&ds.labels, cfg, configs.len() > 1)?;

    let mut gram_seconds = 0.0;
    let outcomes: Vec<FoldOutcome> = match cfg.range_mode {
        RangeMode::Transductive => {
            let t = Instant::now();
            let all: Vec<usize> = (0..ds.len()).collect();
            let ranged = compute_ranges_over(ds.clone(), &all);
            let grams = GramCache::compute(&ranged, &cfg.grid, cfg.edge_elements)?;
            gram_seconds += t.elapsed().as_secs_f64();
            evaluate_all(ds, &plans, &configs, &grams, cfg)?
        }
        RangeMode::PerFold => {
            let mut out = Vec::with_capacity(plans.len());
            for plan in &plans {
                let t = Instant::now();
                let ranged = compute_ranges_over(ds.clone(), &plan.train);
                let grams = GramCache::compute(&ranged, &cfg.grid, cfg.edge_elements)?;
                gram_seconds += t.elapsed().as_secs_f64();
                out.push(evaluate_split(plan, &ds.labels, &configs, &grams, &cfg.smo)?);
            }
            out
        }
    };
    cross_validate_report(ds, cfg, &configs, &plans, outcomes, gram_seconds, start)
}

/// Runs the protocol on precomputed Gram matrices, refusing any whose digest
/// does not match `ds`.
pub fn cross_validate_with_grams(ds: &Dataset, cfg: &CvConfig, grams: &GramCache) -> Result<CvReport> {
    cfg.grid.validate()?;
    if grams.digest != ds.digest {
        return Err(Error::DigestMismatch {
            expected: ds.digest.clone(),
            found: grams.digest.clone(),
        });
    }
    let start = Instant::now();
    let configs = cfg.grid.combinations();
    let plans = plan_splits(&ds.labels, cfg, configs.len() > 1)?;
    let outcomes = evaluate_all(ds, &plans, &configs, grams, cfg)?;
    cross_validate_report(ds, cfg, &configs, &plans, outcomes, 0.0, start)
}

fn evaluate_all(
    ds: &Dataset,
    plans: &[SplitPlan],
    configs: &[HyperParams],
    grams: &GramCache,
    cfg: &CvConfig,
) -> Result<Vec<FoldOutcome>> {
    plans
        .par_iter()
        .map(|plan| evaluate_split(plan, &ds.labels, configs, grams, &cfg.smo))
        .collect()
}

fn cross_validate_report(
    ds: &Dataset,
    cfg: &CvConfig,
    configs: &[HyperParams],
    plans: &[SplitPlan],
    outcomes: Vec<FoldOutcome>,
    gram_seconds: f64,
    start: Instant,
) -> Result<CvReport> {
    let fold_results: Vec<FoldResult> = plans
        .iter()
        .zip(&outcomes)
        .map(|(plan, o)| FoldResult {
            repeat: plan.repeat,
            fold: plan.fold,
            test_size: plan.test.len(),
            accuracy: o.per_config[o.selected],
            selected: configs[o.selected],
            validation_accuracy: o.validation,
        })
        .collect();
    let configurations = configs
        .iter()
        .enumerate()
        .map(|(k, &params)| {
            let fold_accuracies: Vec<f64> = outcomes.iter().map(|o| o.per_config[k]).collect();
            let (mean_accuracy, std_accuracy) = mean_std(&fold_accuracies);
            ConfigResult {
                params,
                fold_accuracies,
                mean_accuracy,
                std_accuracy,
            }
        })
        .collect();
    let accuracies: Vec<f64> = fold_results.iter().map(|f| f.accuracy).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accuracies);
    let total = start.elapsed().as_secs_f64();
    Ok(CvReport {
        dataset: ds.name.clone(),
        dataset_digest: ds.digest.clone(),
        folds: cfg.folds,
        repeats: cfg.repeats,
        inner_folds: cfg.inner_folds,
        seed: cfg.seed,
        edge_elements: cfg.edge_elements,
        range_mode: cfg.range_mode,
        range_note: match cfg.range_mode {
            RangeMode::Transductive => "numerical attribute ranges were computed on the full dataset (train and test pooled); kernel values are otherwise split-independent".into(),
            RangeMode::PerFold => "numerical attribute ranges were computed on each outer training portion; test values outside a range are clamped".into(),
        },
        grid: cfg.grid.clone(),
        mean_accuracy,
        std_accuracy,
        fold_results,
        configurations,
        wall_times: WallTimes {
            gram_seconds,
            evaluation_seconds: total - gram_seconds.min(total),
            total_seconds: total,
        },
        version: crate::VERSION.to_string(),
    })
}

impl CvReport {
    /// Aligned-column summary for humans.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "dataset {} ({} folds x {} repeats, inner {} folds, seed {})",
            self.dataset, self.folds, self.repeats, self.inner_folds, self.seed
        );
        let _ = writeln!(
            out,
            "nested accuracy: {:.4} +- {:.4}",
            self.mean_accuracy, self.std_accuracy
        );
        let _ = writeln!(out, "ranges: {}", self.range_note);
        let _ = writeln!(
            out,
            "wall time: {:.2}s total, {:.2}s Gram",
            self.wall_times.total_seconds, self.wall_times.gram_seconds
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:>8} {:>5} {:>9} {:>9} {:>8} {:>8} {:>8}",
            "gamma", "H", "normalize", "C", "mean", "std", "chosen"
        );
        for c in &self.configurations {
            let chosen = self
                .fold_results
                .iter()
                .filter(|f| f.selected == c.params)
                .count();
            let _ = writeln!(
                out,
                "{:>8} {:>5} {:>9} {:>9} {:>8.4} {:>8.4} {:>8}",
                c.params.gamma,
                c.params.depth,
                if c.params.normalize { "on" } else { "off" },
                c.params.c,
                c.mean_accuracy,
                c.std_accuracy,
                chosen
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_two_class_folds() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let folds = stratified_folds(&labels, 5, 42).unwrap();
        for fold in &folds {
            assert_eq!(fold.len(), 2);
            assert_eq!(fold.iter().filter(|&&i| labels[i] == 0).count(), 1);
        }
        assert_eq!(folds, stratified_folds(&labels, 5, 42).unwrap());
    }

    #[test]
    fn fold_sizes_and_partition() {
        let folds = stratified_folds(&[0; 7], 3, 1).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![3, 2, 2]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        assert!(stratified_folds(&[0; 7], 8, 1).is_err());
        assert!(stratified_folds(&[0; 7], 1, 1).is_err());
    }

    #[test]
    fn grid_parsing() {
        let g: Grid = "gamma=0.5,2; depth=1,3; normalize=on; C=1e-1,10".parse().unwrap();
        assert_eq!(g.gammas, vec![0.5, 2.0]);
        assert_eq!(g.depths, vec![1, 3]);
        assert_eq!(g.normalize, vec![true]);
        assert_eq!(g.cs, vec![0.1, 10.0]);
        assert_eq!(g.combinations().len(), 8);
        let partial: Grid = "C=1".parse().unwrap();
        assert_eq!(partial.gammas, Grid::default().gammas);
        assert!("gamma=0".parse::<Grid>().is_err());
        assert!("depth=0".parse::<Grid>().is_err());
        assert!("alpha=1".parse::<Grid>().is_err());
        assert!("normalize=maybe".parse::<Grid>().is_err());
        assert_eq!(Grid::default().combinations().len(), 3 * 4 * 2 * 7);
    }

    #[test]
    fn mean_and_std() {
        let (m, s) = mean_std(&[0.5, 1.0, 0.75, 0.75]);
        assert_eq!(m, 0.75);
        assert!((s - 0.03125f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn inner_splits_stay_inside_training_portion() {
        let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let cfg = CvConfig {
            folds: 4,
            repeats: 2,
            inner_folds: 3,
            ..CvConfig::default()
        };
        let plans = plan_splits(&labels, &cfg, true).unwrap();
        assert_eq!(plans.len(), 8);
        for plan in &plans {
            let test: BTreeSet<_> = plan.test.iter().collect();
            assert!(plan.train.iter().all(|i| !test.contains(i)));
            assert_eq!(plan.train.len() + plan.test.len(), 40);
            assert_eq!(plan.inner.len(), 3);
            for (fit, val) in &plan.inner {
                assert!(fit.iter().chain(val).all(|i| !test.contains(i)));
                assert_eq!(fit.len() + val.len(), plan.train.len());
            }
        }
    }
}
