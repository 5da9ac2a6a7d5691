use std::collections::BTreeSet;

use nask::eval::{cross_validate_with_grams, plan_splits, GramCache, HyperParams};
use nask::gram::{compute_gram, GramConfig};
use nask::synth::{random_dataset, SynthSpec};
use nask::{cross_validate, stratified_folds, CvConfig, CvReport, Error, Grid};
use proptest::prelude::*;

fn small_config(grid: Grid) -> CvConfig {
    CvConfig {
        folds: 4,
        repeats: 2,
        seed: 11,
        inner_folds: 3,
        grid,
        ..CvConfig::default()
    }
}

fn dataset() -> nask::Dataset {
    random_dataset(
        &SynthSpec {
            graphs: 40,
            max_nodes: 9,
            ..SynthSpec::default()
        },
        5,
    )
}

fn without_timing(mut r: CvReport) -> CvReport {
    r.wall_times = Default::default();
    r
}

proptest! {
    #[test]
    fn folds_partition_and_stratify(labels in prop::collection::vec(0usize..4, 2..80), k in 2usize..8, seed in any::<u64>()) {
        prop_assume!(k <= labels.len());
        let folds = stratified_folds(&labels, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for class in labels.iter().collect::<BTreeSet<_>>() {
            let counts: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == *class).count()).collect();
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
        prop_assert_eq!(folds, stratified_folds(&labels, k, seed).unwrap());
    }
}

#[test]
fn fold_hygiene() {
    let ds = dataset();
    let cfg = CvConfig {
        folds: 5,
        repeats: 3,
        inner_folds: 4,
        ..CvConfig::default()
    };
    for plan in plan_splits(&ds.labels, &cfg, true).unwrap() {
        let test: BTreeSet<usize> = plan.test.iter().copied().collect();
        for (fit, val) in &plan.inner {
            assert!(fit.iter().chain(val).all(|i| !test.contains(i)));
        }
        assert!(plan.train.iter().all(|i| !test.contains(i)));
    }
}

#[test]
fn reports_are_reproducible() {
    let ds = dataset();
    let cfg = small_config("gamma=1;depth=1,2;normalize=on,off;C=0.1,10".parse().unwrap());
    let a = cross_validate(&ds, &cfg).unwrap();
    let b = cross_validate(&ds, &cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&without_timing(a.clone())).unwrap(),
        serde_json::to_string(&without_timing(b)).unwrap()
    );
    assert_eq!(a.fold_results.len(), 8);
    let accuracies: Vec<f64> = a.fold_results.iter().map(|f| f.accuracy).collect();
    let mean = accuracies.iter().sum::<f64>() / 8.0;
    assert!((a.mean_accuracy - mean).abs() < 1e-12);
    assert!((0.0..=1.0).contains(&a.mean_accuracy));
    assert_eq!(a.configurations.len(), 8);
    assert!(a.to_text().contains("nested accuracy"));
    assert!(a.range_note.contains("full dataset"));
}

#[test]
fn single_configuration_is_plain_kfold() {
    let ds = dataset();
    let params = HyperParams {
        gamma: 1.0,
        depth: 2,
        normalize: true,
        c: 1.0,
    };
    let report = cross_validate(&ds, &small_config(Grid::single(params))).unwrap();
    let plain: Vec<f64> = report.fold_results.iter().map(|f| f.accuracy).collect();
    assert_eq!(plain, report.configurations[0].fold_accuracies);
    assert!(report.fold_results.iter().all(|f| f.selected == params));
}

#[test]
fn per_fold_ranges_run() {
    let ds = dataset();
    let mut cfg = small_config("gamma=1;depth=2;normalize=on;C=1".parse().unwrap());
    cfg.range_mode = nask::eval::RangeMode::PerFold;
    let report = cross_validate(&ds, &cfg).unwrap();
    assert!(report.range_note.contains("outer training portion"));
}

#[test]
fn foreign_grams_are_refused() {
    let ds = dataset();
    let other = random_dataset(&SynthSpec::default(), 6);
    let gram = compute_gram(&other, &GramConfig { depth: 1, ..GramConfig::default() }).unwrap();
    assert!(matches!(GramCache::from_matrices(&ds, vec![gram]), Err(Error::DigestMismatch { .. })));

    let own = compute_gram(&ds, &GramConfig { depth: 1, ..GramConfig::default() }).unwrap();
    let cache = GramCache::from_matrices(&ds, vec![own]).unwrap();
    let cfg = small_config("gamma=1;depth=1;normalize=off;C=1".parse().unwrap());
    cross_validate_with_grams(&ds, &cfg, &cache).unwrap();
    let mut renamed = ds.clone();
    renamed.digest = "0".repeat(64);
    assert!(matches!(
        cross_validate_with_grams(&renamed, &cfg, &cache),
        Err(Error::DigestMismatch { .. })
    ));
}

#[test]
fn too_many_folds() {
    let ds = dataset();
    let cfg = CvConfig {
        folds: 41,
        ..small_config(Grid::default())
    };
    assert!(matches!(cross_validate(&ds, &cfg), Err(Error::Config(_))));
}
