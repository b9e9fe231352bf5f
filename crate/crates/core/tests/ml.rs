use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadsift::ml::{
    fit, kfold_evaluate, load_model, oversample_minority, save_model, split, stratified_folds, ClassifierSpec,
    Dataset, EvalReport, Family, Parameters,
};
use roadsift::Label;

fn separable(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    while rows.len() < n {
        let (a, b): (f64, f64) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let m = a + 2.0 * b - 1.0;
        if m.abs() < 0.5 {
            continue;
        }
        rows.push(vec![a, b]);
        labels.push(if m > 0.0 { Label::Unsafe } else { Label::Safe });
    }
    Dataset::from_rows(rows, labels).unwrap()
}

fn xor(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let labels = rows
        .iter()
        .map(|r| if (r[0] > 0.0) != (r[1] > 0.0) { Label::Unsafe } else { Label::Safe })
        .collect();
    Dataset::from_rows(rows, labels).unwrap()
}

fn held_out(spec: &ClassifierSpec, data: &Dataset, seed: u64) -> EvalReport {
    let (train, test) = split(data, 0.8, seed).unwrap();
    let model = fit(spec, &oversample_minority(&train, seed).unwrap()).unwrap();
    EvalReport::from_pairs(&test.labels, &model.predict_dataset(&test).unwrap())
}

#[test]
fn logistic_separates_linear_data() {
    let r = held_out(&ClassifierSpec::new(Family::Logistic), &separable(500, 1), 2);
    assert!(r.unsafe_class.f1 >= 0.99, "{r:?}");
}

#[test]
fn tree_learns_xor_and_logistic_cannot() {
    let data = xor(1000, 3);
    let tree = held_out(&ClassifierSpec::new(Family::DecisionTree), &data, 4);
    let logistic = held_out(&ClassifierSpec::new(Family::Logistic), &data, 4);
    assert!(tree.accuracy >= 0.95, "tree {}", tree.accuracy);
    assert!(logistic.accuracy <= 0.6, "logistic {}", logistic.accuracy);
}

#[test]
fn every_family_fits_and_beats_chance_on_separable_data() {
    let data = separable(300, 5);
    for family in Family::ALL {
        let r = held_out(&ClassifierSpec::new(family), &data, 6);
        assert!(r.accuracy >= 0.85, "{family}: {}", r.accuracy);
    }
}

#[test]
fn naive_bayes_priors_are_even_after_oversampling() {
    let data = separable(200, 7);
    let (train, _) = split(&data, 0.8, 1).unwrap();
    let model = fit(&ClassifierSpec::new(Family::NaiveBayes), &oversample_minority(&train, 1).unwrap()).unwrap();
    let Parameters::NaiveBayes { log_priors, .. } = model.parameters else { panic!() };
    assert_eq!(log_priors, [0.5f64.ln(); 2]);
}

#[test]
fn standardization_absorbs_affine_rescaling() {
    let data = separable(200, 8);
    let mut scaled = data.clone();
    for r in &mut scaled.rows {
        r[0] = 1000.0 * r[0] - 7.0;
        r[1] = 0.01 * r[1] + 3.0;
    }
    for family in [Family::Logistic, Family::LinearSvm] {
        let a = fit(&ClassifierSpec::new(family), &data).unwrap();
        let b = fit(&ClassifierSpec::new(family), &scaled).unwrap();
        assert_eq!(a.predict_dataset(&data).unwrap(), b.predict_dataset(&scaled).unwrap(), "{family}");
    }
}

#[test]
fn saved_model_predicts_identically() {
    let data = separable(200, 9);
    let dir = tempfile::tempdir().unwrap();
    for family in Family::ALL {
        let model = fit(&ClassifierSpec::new(family).clone(), &data).unwrap();
        let path = dir.path().join(format!("{family}.json"));
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        let probe = separable(100, 10);
        assert_eq!(back.predict_dataset(&probe).unwrap(), model.predict_dataset(&probe).unwrap());
    }
}

#[test]
fn kfold_total_covers_every_row() {
    let data = separable(120, 11);
    let r = kfold_evaluate(&data, &ClassifierSpec::new(Family::NaiveBayes), 10, 3).unwrap();
    assert_eq!(r.confusion.total(), 120);
    assert_eq!(r, kfold_evaluate(&data, &ClassifierSpec::new(Family::NaiveBayes), 10, 3).unwrap());
}

#[test]
fn single_tree_forest_without_bootstrap_matches_tree_shape() {
    let data = xor(400, 12);
    let forest = ClassifierSpec::new(Family::RandomForest)
        .with("I", 1i64)
        .with("K", 2i64)
        .with("bootstrap", false);
    let r = held_out(&forest, &data, 13);
    assert!(r.accuracy >= 0.9, "{}", r.accuracy);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn folds_partition_rows(n in 10usize..300, unsafe_share in 0.05f64..0.95, seed in any::<u64>()) {
        let labels: Vec<Label> = (0..n)
            .map(|i| if (i as f64) < unsafe_share * n as f64 { Label::Unsafe } else { Label::Safe })
            .collect();
        let folds = stratified_folds(&labels, 10, seed);
        let mut seen = vec![0u8; n];
        for f in &folds {
            for &i in f {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn oversampling_balances(safe in 1usize..80, unsafe_ in 1usize..80, seed in any::<u64>()) {
        let labels: Vec<Label> = (0..safe + unsafe_).map(|i| if i < safe { Label::Safe } else { Label::Unsafe }).collect();
        let rows = (0..safe + unsafe_).map(|i| vec![i as f64]).collect();
        let d = Dataset::from_rows(rows, labels).unwrap();
        let o = oversample_minority(&d, seed).unwrap();
        let m = safe.max(unsafe_);
        prop_assert_eq!(o.class_counts(), [m, m]);
        prop_assert_eq!(&o.rows[..d.len()], &d.rows[..]);
    }

    #[test]
    fn report_rates_are_bounded(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
        let r = EvalReport::from_confusion(roadsift::ml::Confusion::new(tp, fp, tn, fn_));
        for v in [r.accuracy, r.weighted_avg_f1, r.unsafe_class.f1, r.safe_class.f1, r.unsafe_class.precision, r.safe_class.recall] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
