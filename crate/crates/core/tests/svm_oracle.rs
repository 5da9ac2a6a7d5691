use nask::svm::{predict_block, train_binary_traced};
use nask::{predict, train_binary, train_ovr, KernelBlock, SmoParams};
use nask_oracle::{dual_objective, oracle_svm_dual};
use proptest::prelude::*;

/// Gaussian or linear kernel over random points in the plane.
fn kernel_from_points(points: &[(f64, f64)], gaussian: bool) -> Vec<f64> {
    let n = points.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (points[i], points[j]);
            k[i * n + j] = if gaussian {
                (-((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2))).exp()
            } else {
                a.0 * b.0 + a.1 * b.1
            };
        }
    }
    k
}

fn fixture() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<f64>, bool, f64)> {
    (2usize..=6)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n),
                prop::collection::vec(prop::bool::ANY, n),
                any::<bool>(),
                prop::sample::select(vec![0.01, 0.1, 1.0, 10.0, 100.0]),
            )
        })
        .prop_map(|(points, signs, gaussian, c)| {
            let mut y: Vec<f64> = signs.iter().map(|&s| if s { 1.0 } else { -1.0 }).collect();
            // Both classes present.
            y[0] = 1.0;
            y[1] = -1.0;
            (points, y, gaussian, c)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn smo_matches_exact_dual((points, y, gaussian, c) in fixture()) {
        let n = y.len();
        let k = kernel_from_points(&points, gaussian);
        let (best, _) = oracle_svm_dual(&k, &y, c).unwrap();
        let out = train_binary_traced(&KernelBlock::square(n, k.clone()).unwrap(), &y, &SmoParams::with_c(c)).unwrap();
        let ours = dual_objective(&k, &y, &out.alphas);
        prop_assert!((ours - best).abs() <= 1e-4, "smo {ours} vs oracle {best}");
        prop_assert!((out.model.objective - ours).abs() <= 1e-9 * ours.abs().max(1.0));
        prop_assert!(out.alphas.iter().all(|&a| (0.0..=c).contains(&a)));
        let balance: f64 = out.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
        prop_assert!(balance.abs() <= 1e-6);
        prop_assert!(out.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0)));
    }

    #[test]
    fn kernel_scale_keeps_training_signs((points, y, _, c) in fixture(), scale in prop::sample::select(vec![0.01, 0.5, 4.0, 100.0])) {
        // A strictly positive definite kernel, so the optimum is unique.
        let n = y.len();
        let k = KernelBlock::square(n, kernel_from_points(&points, true)).unwrap();
        let a = train_binary(&k, &y, &SmoParams { tol: 1e-9, ..SmoParams::with_c(c) }).unwrap();
        let b = train_binary(&k.scaled(scale), &y, &SmoParams { tol: 1e-9, ..SmoParams::with_c(c / scale) }).unwrap();
        for i in 0..n {
            let (fa, fb) = (a.decision_value(k.row(i)), b.decision_value(k.scaled(scale).row(i)));
            // Values agree up to solver tolerance; compare signs away from zero.
            if fa.abs() > 1e-3 {
                prop_assert_eq!(fa > 0.0, fb > 0.0, "{} vs {}", fa, fb);
            }
        }
    }
}

#[test]
fn ten_point_problem_against_exact_dual() {
    let points: Vec<(f64, f64)> = (0..10).map(|i| ((i as f64 * 0.37).sin() * 2.0, (i as f64 * 0.91).cos())).collect();
    let y: Vec<f64> = (0..10).map(|i| if (i * 7) % 3 == 0 { 1.0 } else { -1.0 }).collect();
    let k = kernel_from_points(&points, true);
    for c in [0.1, 1.0, 10.0] {
        let (best, _) = oracle_svm_dual(&k, &y, c).unwrap();
        let out = train_binary_traced(&KernelBlock::square(10, k.clone()).unwrap(), &y, &SmoParams::with_c(c)).unwrap();
        assert!((dual_objective(&k, &y, &out.alphas) - best).abs() <= 1e-4);
    }
}

#[test]
fn two_class_ovr_is_one_binary_machine() {
    let points: Vec<(f64, f64)> = (0..12).map(|i| ((i as f64).cos() * 1.5, (i as f64 * 1.3).sin())).collect();
    let labels: Vec<usize> = (0..12).map(|i| usize::from(points[i].0 > 0.2)).collect();
    let k = KernelBlock::square(12, kernel_from_points(&points, true)).unwrap();
    let model = train_ovr(&k, &labels, &[0, 1], &SmoParams::with_c(5.0)).unwrap();
    assert_eq!(model.machines.len(), 1);
    let y: Vec<f64> = labels.iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
    let single = train_binary(&k, &y, &SmoParams::with_c(5.0)).unwrap();
    for i in 0..12 {
        let expected = if single.decision_value(k.row(i)) >= 0.0 { 0 } else { 1 };
        assert_eq!(predict(&model, k.row(i)).unwrap(), expected);
    }
    assert_eq!(predict_block(&model, &k).unwrap().len(), 12);
}
